//! Binary genome encodings for weights, architectures, and trainer
//! parameters.
//!
//! A chromosome has three parts. Connection weights are fixed-width binary
//! codes (default 4 bits each) mapped linearly onto `[-range, +range]`,
//! concatenated with all weights into the same node contiguous — the same
//! layout as [`Mlp::params`](crate::net::Mlp::params). The architecture
//! part holds a hidden-node-count gene plus one 3-bit activation code per
//! potential node. The parameter part holds one fixed-width field per
//! trainer parameter, decoded linearly into that parameter's search range.
//! Every bitstring of the right length decodes to a valid individual:
//! counts clamp into bounds and activation codes wrap over the alphabet.

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::{ActivationKind, ACTIVATION_KINDS};
use crate::trainers::{Algorithm, BpConfig, LmConfig, QnaConfig, ScgConfig, TrainerConfig};

/// Width of the hidden-node-count gene.
pub const HIDDEN_GENE_BITS: usize = 5;
/// Width of one activation code.
pub const ACT_GENE_BITS: usize = 3;
/// Width of one trainer-parameter field.
pub const PARAM_FIELD_BITS: usize = 8;

fn bits_to_code(bits: &[bool]) -> u32 {
    bits.iter().fold(0u32, |acc, b| (acc << 1) | u32::from(*b))
}

fn code_to_bits(code: u32, width: usize) -> Vec<bool> {
    (0..width)
        .map(|i| code >> (width - 1 - i) & 1 == 1)
        .collect()
}

/// Linear map of a fixed-width code onto `[lo, hi]`.
fn decode_linear(bits: &[bool], lo: f64, hi: f64) -> f64 {
    let levels = (1u32 << bits.len()) - 1;
    lo + (hi - lo) * f64::from(bits_to_code(bits)) / f64::from(levels)
}

/// Linear map of a code onto `(0, hi]` via `(c+1)/2^w * hi`.
fn decode_linear_open(bits: &[bool], hi: f64) -> f64 {
    let levels = 1u32 << bits.len();
    hi * f64::from(bits_to_code(bits) + 1) / f64::from(levels)
}

fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.gen::<bool>()).collect()
}

/// Connection-weight chromosome: `bits_per_weight` bits per parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightGenome {
    bits: Vec<bool>,
    bits_per_weight: usize,
}

impl WeightGenome {
    pub fn random<R: Rng + ?Sized>(
        param_count: usize,
        bits_per_weight: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            bits: random_bits(param_count * bits_per_weight, rng),
            bits_per_weight,
        }
    }

    pub fn from_bits(bits: Vec<bool>, bits_per_weight: usize) -> Result<Self> {
        if bits_per_weight == 0 || !bits.len().is_multiple_of(bits_per_weight) {
            return Err(Error::InvalidConfig(format!(
                "weight genome of {} bits is not a multiple of {} bits per weight",
                bits.len(),
                bits_per_weight
            )));
        }
        Ok(Self {
            bits,
            bits_per_weight,
        })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn bits_per_weight(&self) -> usize {
        self.bits_per_weight
    }

    pub fn weight_count(&self) -> usize {
        self.bits.len() / self.bits_per_weight
    }

    /// Decode every code through the linear map onto `[-range, +range]`.
    pub fn decode(&self, range: f64) -> Vec<f64> {
        self.bits
            .chunks(self.bits_per_weight)
            .map(|code| decode_linear(code, -range, range))
            .collect()
    }

    /// Encode a weight vector by rounding each entry to its nearest code.
    /// Inverse of [`decode`](Self::decode) on exactly representable values.
    pub fn encode(weights: &[f64], range: f64, bits_per_weight: usize) -> Self {
        let levels = (1u32 << bits_per_weight) - 1;
        let mut bits = Vec::with_capacity(weights.len() * bits_per_weight);
        for w in weights {
            let frac = ((w + range) / (2.0 * range)).clamp(0.0, 1.0);
            let code = (frac * f64::from(levels)).round() as u32;
            bits.extend(code_to_bits(code, bits_per_weight));
        }
        Self {
            bits,
            bits_per_weight,
        }
    }

    /// Rebuild the genome for a changed hidden-node count, preserving the
    /// codes of surviving parameters. Layout per node is `input_dim + 1`
    /// codes (weights then bias), followed by one output-weight code per
    /// node and the output bias code. New codes are drawn uniformly.
    pub fn resized<R: Rng + ?Sized>(
        &self,
        input_dim: usize,
        old_hidden: usize,
        new_hidden: usize,
        rng: &mut R,
    ) -> Self {
        let b = self.bits_per_weight;
        let block = (input_dim + 1) * b;
        debug_assert_eq!(self.bits.len(), old_hidden * block + (old_hidden + 1) * b);

        let keep = old_hidden.min(new_hidden);
        let mut bits = Vec::with_capacity(new_hidden * block + (new_hidden + 1) * b);
        // Hidden-node blocks.
        bits.extend_from_slice(&self.bits[..keep * block]);
        for _ in old_hidden..new_hidden {
            bits.extend(random_bits(block, rng));
        }
        // Output weights, then output bias.
        let out_start = old_hidden * block;
        bits.extend_from_slice(&self.bits[out_start..out_start + keep * b]);
        for _ in old_hidden..new_hidden {
            bits.extend(random_bits(b, rng));
        }
        bits.extend_from_slice(&self.bits[out_start + old_hidden * b..]);
        Self {
            bits,
            bits_per_weight: b,
        }
    }
}

/// Architecture chromosome: hidden count gene plus per-node activation
/// codes. Codes beyond the decoded count are carried but ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchGenome {
    hidden_bits: Vec<bool>,
    act_bits: Vec<bool>,
}

impl ArchGenome {
    /// Random genome with the count gene drawn uniformly inside `bounds`
    /// so initial populations are not skewed by clamping.
    pub fn random<R: Rng + ?Sized>(bounds: (usize, usize), rng: &mut R) -> Self {
        let count = rng.gen_range(bounds.0..=bounds.1) as u32;
        Self {
            hidden_bits: code_to_bits(count, HIDDEN_GENE_BITS),
            act_bits: random_bits(ACT_GENE_BITS * bounds.1, rng),
        }
    }

    /// Build from raw bit vectors; `act_bits` must hold whole codes.
    pub fn from_bits(hidden_bits: Vec<bool>, act_bits: Vec<bool>) -> Result<Self> {
        if hidden_bits.len() != HIDDEN_GENE_BITS || !act_bits.len().is_multiple_of(ACT_GENE_BITS) {
            return Err(Error::InvalidConfig(format!(
                "architecture genome needs {HIDDEN_GENE_BITS} count bits and whole {ACT_GENE_BITS}-bit activation codes"
            )));
        }
        Ok(Self {
            hidden_bits,
            act_bits,
        })
    }

    pub fn from_layout(hidden_count: usize, acts: &[ActivationKind], max_hidden: usize) -> Self {
        let mut act_bits = Vec::with_capacity(ACT_GENE_BITS * max_hidden);
        for i in 0..max_hidden {
            let kind = acts.get(i).copied().unwrap_or(ActivationKind::Tanh);
            act_bits.extend(code_to_bits(kind.index() as u32, ACT_GENE_BITS));
        }
        Self {
            hidden_bits: code_to_bits(hidden_count as u32, HIDDEN_GENE_BITS),
            act_bits,
        }
    }

    pub fn hidden_bits(&self) -> &[bool] {
        &self.hidden_bits
    }

    pub fn hidden_bits_mut(&mut self) -> &mut [bool] {
        &mut self.hidden_bits
    }

    pub fn act_bits_mut(&mut self) -> &mut [bool] {
        &mut self.act_bits
    }

    pub fn bit_len(&self) -> usize {
        self.hidden_bits.len() + self.act_bits.len()
    }

    /// Decode into `(hidden_count, activations)`; the count clamps into
    /// `bounds` and each 3-bit code wraps over the five-label alphabet.
    pub fn decode(&self, bounds: (usize, usize)) -> (usize, Vec<ActivationKind>) {
        let raw = bits_to_code(&self.hidden_bits) as usize;
        let count = raw.clamp(bounds.0, bounds.1);
        let acts = self
            .act_bits
            .chunks(ACT_GENE_BITS)
            .take(count)
            .map(|code| ACTIVATION_KINDS[bits_to_code(code) as usize % ACTIVATION_KINDS.len()])
            .collect();
        (count, acts)
    }
}

/// Per-algorithm learning-parameter chromosome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGenome {
    bits: Vec<bool>,
}

impl ParamGenome {
    pub fn field_count(algorithm: Algorithm) -> usize {
        match algorithm {
            Algorithm::Bp => 2,
            Algorithm::Scg => 2,
            Algorithm::Qna => 4,
            Algorithm::Lm => 1,
        }
    }

    pub fn bit_len_for(algorithm: Algorithm) -> usize {
        Self::field_count(algorithm) * PARAM_FIELD_BITS
    }

    pub fn random<R: Rng + ?Sized>(algorithm: Algorithm, rng: &mut R) -> Self {
        Self {
            bits: random_bits(Self::bit_len_for(algorithm), rng),
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    fn field(&self, idx: usize) -> &[bool] {
        &self.bits[idx * PARAM_FIELD_BITS..(idx + 1) * PARAM_FIELD_BITS]
    }

    /// Decode into the tagged trainer configuration. Search ranges:
    /// learning rate and momentum 0.05..0.25; curvature probe (0, 1e-4]
    /// and Hessian regulator (0, 1e-6]; quasi-Newton step lengths
    /// 1e-6..100, step cap 0.1..0.6, decrease constant 0.001..0.003, step
    /// granularity 0.1..0.4; damping 0.001..0.02.
    pub fn decode(&self, algorithm: Algorithm, epochs: usize) -> TrainerConfig {
        match algorithm {
            Algorithm::Bp => TrainerConfig::Bp(BpConfig {
                learning_rate: decode_linear(self.field(0), 0.05, 0.25),
                momentum: decode_linear(self.field(1), 0.05, 0.25),
                epochs,
            }),
            Algorithm::Scg => TrainerConfig::Scg(ScgConfig {
                sigma: decode_linear_open(self.field(0), 1e-4),
                lambda0: decode_linear_open(self.field(1), 1e-6),
                epochs,
            }),
            Algorithm::Qna => TrainerConfig::Qna(QnaConfig {
                step_init: decode_linear(self.field(0), 1e-6, 100.0),
                step_limit: decode_linear(self.field(1), 0.1, 0.6),
                perf_scale: decode_linear(self.field(2), 0.001, 0.003),
                step_scale: decode_linear(self.field(3), 0.1, 0.4),
                epochs,
            }),
            Algorithm::Lm => TrainerConfig::Lm(LmConfig {
                mu0: decode_linear(self.field(0), 0.001, 0.02),
                epochs,
                ..Default::default()
            }),
        }
    }
}

/// Parameter count of a one-hidden-layer network, `d*h + 2h + 1`.
pub fn param_count(input_dim: usize, hidden: usize) -> usize {
    input_dim * hidden + 2 * hidden + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weight_code_endpoints_and_midpoint() {
        let zeros = WeightGenome::from_bits(vec![false; 4], 4).unwrap();
        assert_eq!(zeros.decode(0.3), vec![-0.3]);
        let ones = WeightGenome::from_bits(vec![true; 4], 4).unwrap();
        assert_eq!(ones.decode(0.3), vec![0.3]);
        // code 1000 = 8 -> -0.3 + 0.6 * 8/15 = 0.02
        let code8 = WeightGenome::from_bits(vec![true, false, false, false], 4).unwrap();
        assert!((code8.decode(0.3)[0] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn encode_decode_is_identity_on_codes() {
        for code in 0u32..16 {
            let g = WeightGenome::from_bits(code_to_bits(code, 4), 4).unwrap();
            let w = g.decode(0.3);
            let back = WeightGenome::encode(&w, 0.3, 4);
            assert_eq!(back, g, "code {code}");
        }
    }

    #[test]
    fn resize_grows_by_input_dim_plus_two_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 4;
        let g = WeightGenome::random(param_count(d, 8), 4, &mut rng);
        let grown = g.resized(d, 8, 9, &mut rng);
        assert_eq!(grown.bits().len(), g.bits().len() + 4 * (d + 2));
        assert_eq!(grown.weight_count(), param_count(d, 9));

        let shrunk = g.resized(d, 8, 6, &mut rng);
        assert_eq!(shrunk.weight_count(), param_count(d, 6));
    }

    #[test]
    fn resize_preserves_surviving_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 2;
        let g = WeightGenome::random(param_count(d, 3), 4, &mut rng);
        let w_old = g.decode(0.3);
        let grown = g.resized(d, 3, 4, &mut rng);
        let w_new = grown.decode(0.3);
        // Hidden blocks of surviving nodes: first 3*(d+1) weights.
        assert_eq!(&w_new[..3 * (d + 1)], &w_old[..3 * (d + 1)]);
        // Output weights of surviving nodes.
        let old_out = 3 * (d + 1);
        let new_out = 4 * (d + 1);
        assert_eq!(&w_new[new_out..new_out + 3], &w_old[old_out..old_out + 3]);
        // Output bias survives as the final code.
        assert_eq!(w_new.last(), w_old.last());
    }

    #[test]
    fn arch_decode_clamps_and_wraps() {
        // Count gene 31 with bounds (5, 16) clamps to 16.
        let g = ArchGenome {
            hidden_bits: code_to_bits(31, HIDDEN_GENE_BITS),
            act_bits: vec![false; ACT_GENE_BITS * 16],
        };
        let (count, acts) = g.decode((5, 16));
        assert_eq!(count, 16);
        assert!(acts.iter().all(|k| *k == ActivationKind::Tanh));

        // Below the lower bound clamps up.
        let g = ArchGenome {
            hidden_bits: code_to_bits(1, HIDDEN_GENE_BITS),
            act_bits: vec![false; ACT_GENE_BITS * 16],
        };
        assert_eq!(g.decode((5, 16)).0, 5);

        // Codes 5..7 wrap onto the alphabet instead of failing.
        let g = ArchGenome {
            hidden_bits: code_to_bits(2, HIDDEN_GENE_BITS),
            act_bits: code_to_bits(0b111_110, 6),
        };
        let (_, acts) = g.decode((1, 2));
        assert_eq!(acts[0], ACTIVATION_KINDS[7 % 5]);
        assert_eq!(acts[1], ACTIVATION_KINDS[6 % 5]);
    }

    #[test]
    fn table_architecture_decodes_back() {
        use crate::net::parse_arch;
        let hidden = parse_arch("8T,2T*,1L*").unwrap();
        let g = ArchGenome::from_layout(hidden.len(), &hidden, 16);
        let (count, acts) = g.decode((5, 16));
        assert_eq!(count, 11);
        assert_eq!(acts, hidden);
    }

    #[test]
    fn param_decode_endpoints() {
        let zeros = ParamGenome::from_bits(vec![false; 16]);
        match zeros.decode(Algorithm::Bp, 10) {
            TrainerConfig::Bp(c) => {
                assert_eq!(c.learning_rate, 0.05);
                assert_eq!(c.momentum, 0.05);
            }
            _ => unreachable!(),
        }
        let ones = ParamGenome::from_bits(vec![true; 16]);
        match ones.decode(Algorithm::Bp, 10) {
            TrainerConfig::Bp(c) => {
                assert_eq!(c.learning_rate, 0.25);
                assert_eq!(c.momentum, 0.25);
            }
            _ => unreachable!(),
        }
        let zeros = ParamGenome::from_bits(vec![false; 8]);
        match zeros.decode(Algorithm::Lm, 10) {
            TrainerConfig::Lm(c) => assert_eq!(c.mu0, 0.001),
            _ => unreachable!(),
        }
    }

    #[test]
    fn random_param_genomes_decode_inside_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..2000 {
            for algo in crate::trainers::ALGORITHMS {
                let g = ParamGenome::random(algo, &mut rng);
                match g.decode(algo, 1) {
                    TrainerConfig::Bp(c) => {
                        assert!((0.05..=0.25).contains(&c.learning_rate));
                        assert!((0.05..=0.25).contains(&c.momentum));
                    }
                    TrainerConfig::Scg(c) => {
                        assert!(c.sigma > 0.0 && c.sigma <= 1e-4);
                        assert!(c.lambda0 > 0.0 && c.lambda0 <= 1e-6);
                    }
                    TrainerConfig::Qna(c) => {
                        assert!((1e-6..=100.0).contains(&c.step_init));
                        assert!((0.1..=0.6).contains(&c.step_limit));
                        assert!((0.001..=0.003).contains(&c.perf_scale));
                        assert!((0.1..=0.4).contains(&c.step_scale));
                    }
                    TrainerConfig::Lm(c) => {
                        assert!((0.001..=0.02).contains(&c.mu0));
                    }
                }
            }
        }
    }
}
