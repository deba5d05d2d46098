//! Mutation-only generational evolution over network weights,
//! architectures, and trainer parameters.
//!
//! Each algorithm (BP, SCG, QNA, LM) evolves its own population in an
//! independent stream. An individual's fitness is the RMSE its decoded
//! network reaches on the held-out rows after a bout of local search
//! starting from the decoded weights — evolution locates a basin, the
//! trainer descends into it. Reproduction is rank-truncation selection
//! plus per-offspring mutation; a small elite is copied unchanged, which
//! makes the per-generation best fitness non-increasing.

mod genome;

pub use genome::{
    param_count, ArchGenome, ParamGenome, WeightGenome, ACT_GENE_BITS, HIDDEN_GENE_BITS,
    PARAM_FIELD_BITS,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Row};
use crate::error::{Error, Result};
use crate::flops::FlopLedger;
use crate::net::{self, format_arch, Mlp};
use crate::trainers::{self, Algorithm, TrainerConfig};

/// Which rows fitness is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitnessSplit {
    /// Test-set RMSE.
    #[default]
    Test,
    /// Hold out the last 20% of the training rows instead, leaving the
    /// test set untouched during evolution.
    Validation,
}

impl std::str::FromStr for FitnessSplit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "test" => Ok(FitnessSplit::Test),
            "validation" => Ok(FitnessSplit::Validation),
            _ => Err(Error::InvalidConfig(format!("unknown fitness split '{s}'"))),
        }
    }
}

/// Population and genome parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population: usize,
    pub generations: usize,
    /// Local-search epochs per fitness evaluation.
    pub epochs_per_eval: usize,
    /// Inclusive bounds on the hidden-node count.
    pub hidden_bounds: (usize, usize),
    /// Decoded weights span `[-weight_range, +weight_range]`.
    pub weight_range: f64,
    pub selection_fraction: f64,
    pub elitism: f64,
    /// Per-offspring probability of mutation.
    pub mutation_rate: f64,
    pub bits_per_weight: usize,
    pub seed: u64,
    /// Evaluate fitnesses one at a time instead of in parallel.
    pub serial: bool,
    /// Write locally-refined weights back into the genome.
    pub write_back: bool,
    pub fitness_split: FitnessSplit,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population: 40,
            generations: 40,
            epochs_per_eval: 500,
            hidden_bounds: (5, 16),
            weight_range: 0.3,
            selection_fraction: 0.5,
            elitism: 0.05,
            mutation_rate: 0.4,
            bits_per_weight: 4,
            seed: 0,
            serial: false,
            write_back: false,
            fitness_split: FitnessSplit::Test,
        }
    }
}

impl EvolutionConfig {
    /// Bounds used when the architecture restriction is imposed.
    pub const RESTRICTED_BOUNDS: (usize, usize) = (1, 4);

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidConfig("population must be >= 2".into()));
        }
        let ordered = self.elitism > 0.0
            && self.elitism < self.selection_fraction
            && self.selection_fraction <= 1.0;
        if !ordered {
            return Err(Error::InvalidConfig(
                "need 0 < elitism < selection_fraction <= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::InvalidConfig(
                "mutation rate must be in [0, 1]".into(),
            ));
        }
        let (lo, hi) = self.hidden_bounds;
        if lo == 0 || lo > hi || hi >= (1 << HIDDEN_GENE_BITS) {
            return Err(Error::InvalidConfig(format!(
                "hidden bounds ({lo}, {hi}) must satisfy 0 < lo <= hi < {}",
                1 << HIDDEN_GENE_BITS
            )));
        }
        if self.bits_per_weight == 0 || self.bits_per_weight > 16 {
            return Err(Error::InvalidConfig(
                "bits per weight must be in 1..=16".into(),
            ));
        }
        if self.weight_range.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidConfig("weight range must be positive".into()));
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        ((self.elitism * self.population as f64).ceil() as usize).min(self.population)
    }

    pub fn parent_count(&self) -> usize {
        ((self.selection_fraction * self.population as f64).floor() as usize)
            .clamp(1, self.population)
    }
}

/// One genome plus its evaluation record.
#[derive(Debug, Clone)]
pub struct Individual {
    pub arch: ArchGenome,
    pub weights: WeightGenome,
    pub params: ParamGenome,
    pub algorithm: Algorithm,
    /// Refined RMSE; set only after evaluation. Lower is better; aborted
    /// local searches score infinity.
    pub fitness: Option<f64>,
    /// Network produced by the fitness evaluation's local search.
    pub trained: Option<Mlp>,
    /// Flops spent evaluating this individual (zero for cached clones).
    pub eval_flops: u64,
}

impl Individual {
    pub fn random<R: Rng + ?Sized>(
        algorithm: Algorithm,
        input_dim: usize,
        cfg: &EvolutionConfig,
        rng: &mut R,
    ) -> Self {
        let arch = ArchGenome::random(cfg.hidden_bounds, rng);
        let (hidden_count, _) = arch.decode(cfg.hidden_bounds);
        let weights = WeightGenome::random(
            param_count(input_dim, hidden_count),
            cfg.bits_per_weight,
            rng,
        );
        let params = ParamGenome::random(algorithm, rng);
        Self {
            arch,
            weights,
            params,
            algorithm,
            fitness: None,
            trained: None,
            eval_flops: 0,
        }
    }

    /// Decode into a ready-to-train network and its trainer parameters.
    pub fn decode(&self, input_dim: usize, cfg: &EvolutionConfig) -> Result<(Mlp, TrainerConfig)> {
        let (hidden_count, acts) = self.arch.decode(cfg.hidden_bounds);
        let expected = param_count(input_dim, hidden_count);
        if self.weights.weight_count() != expected {
            return Err(Error::DimensionMismatch {
                what: "weight genome",
                expected,
                actual: self.weights.weight_count(),
            });
        }
        let mut net = Mlp::new(input_dim, acts)?;
        net.set_params(&self.weights.decode(cfg.weight_range))?;
        let trainer = self.params.decode(self.algorithm, cfg.epochs_per_eval);
        Ok((net, trainer))
    }

    pub fn arch_string(&self, cfg: &EvolutionConfig) -> String {
        let (_, acts) = self.arch.decode(cfg.hidden_bounds);
        format_arch(&acts)
    }

    fn genome_bit_len(&self) -> usize {
        self.arch.bit_len() + self.weights.bits().len() + self.params.bits().len()
    }
}

/// Rows used for (local-search, fitness) under a split policy.
fn fitness_slices(ds: &Dataset, split: FitnessSplit) -> (&[Row], &[Row]) {
    match split {
        FitnessSplit::Test => (ds.train(), ds.test()),
        FitnessSplit::Validation => {
            let train = ds.train();
            let cut = (train.len() * 4 / 5).max(1).min(train.len() - 1);
            (&train[..cut], &train[cut..])
        }
    }
}

/// Decode, locally train, and score one individual. The decoded weights
/// seed the local search; fitness is the refined network's RMSE on the
/// held-out rows. A trainer abort scores infinity.
pub fn evaluate_fitness(ind: &mut Individual, ds: &Dataset, cfg: &EvolutionConfig) {
    let (fit, trained, spent) = match ind.decode(ds.input_dim, cfg) {
        Ok((net, trainer)) => {
            let (train_rows, fit_rows) = fitness_slices(ds, cfg.fitness_split);
            match trainers::train(&net, train_rows, &trainer, None) {
                Ok(report) => {
                    let mut fl = FlopLedger::new();
                    match net::rmse(&report.net, fit_rows, &mut fl) {
                        Ok(r) => (r, Some(report.net), report.flops + fl.total()),
                        Err(_) => (f64::INFINITY, None, report.flops),
                    }
                }
                Err(_) => (f64::INFINITY, None, 0),
            }
        }
        Err(_) => (f64::INFINITY, None, 0),
    };
    if cfg.write_back {
        if let Some(net) = &trained {
            ind.weights =
                WeightGenome::encode(&net.params(), cfg.weight_range, cfg.bits_per_weight);
        }
    }
    ind.fitness = Some(fit);
    ind.trained = trained;
    ind.eval_flops = spent;
}

/// Evaluate every unscored individual; returns the flops newly spent.
fn evaluate_population(pop: &mut [Individual], ds: &Dataset, cfg: &EvolutionConfig) -> u64 {
    let fresh: Vec<usize> = pop
        .iter()
        .enumerate()
        .filter(|(_, i)| i.fitness.is_none())
        .map(|(k, _)| k)
        .collect();
    if cfg.serial {
        for &k in &fresh {
            evaluate_fitness(&mut pop[k], ds, cfg);
        }
    } else {
        pop.par_iter_mut()
            .enumerate()
            .filter(|(k, _)| fresh.contains(k))
            .for_each(|(_, ind)| evaluate_fitness(ind, ds, cfg));
    }
    fresh.iter().map(|&k| pop[k].eval_flops).sum()
}

fn fitness_of(ind: &Individual) -> f64 {
    ind.fitness.expect("population must be evaluated")
}

/// Indices of the parent pool: the top `fraction` of the population by
/// ascending fitness. Ties keep insertion order (stable sort).
pub fn rank_select(pop: &[Individual], fraction: f64) -> Result<Vec<usize>> {
    if pop.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|a, b| fitness_of(&pop[*a]).total_cmp(&fitness_of(&pop[*b])));
    let keep = ((fraction * pop.len() as f64).floor() as usize).clamp(1, pop.len());
    order.truncate(keep);
    Ok(order)
}

/// Produce one offspring. With probability `rate` the clone is mutated:
/// every genome bit flips independently with probability `1/genome_len`
/// (one expected flip), and a changed hidden-node count re-sizes the
/// weight genome with fresh random codes for new parameters.
pub fn mutate<R: Rng + ?Sized>(
    ind: &Individual,
    rate: f64,
    input_dim: usize,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> Individual {
    let mut child = Individual {
        arch: ind.arch.clone(),
        weights: ind.weights.clone(),
        params: ind.params.clone(),
        algorithm: ind.algorithm,
        fitness: ind.fitness,
        trained: None,
        eval_flops: 0,
    };
    if !rng.gen_bool(rate) {
        child.trained = ind.trained.clone();
        return child;
    }

    let (old_hidden, _) = child.arch.decode(cfg.hidden_bounds);
    let flip_p = 1.0 / child.genome_bit_len() as f64;
    let mut flipped = false;
    let mut flip_bits = |bits: &mut [bool], rng: &mut R| {
        for bit in bits {
            if rng.gen_bool(flip_p) {
                *bit = !*bit;
                flipped = true;
            }
        }
    };
    flip_bits(child.arch.hidden_bits_mut(), rng);
    flip_bits(child.arch.act_bits_mut(), rng);
    flip_bits(child.weights.bits_mut(), rng);
    flip_bits(child.params.bits_mut(), rng);
    let (new_hidden, _) = child.arch.decode(cfg.hidden_bounds);
    if new_hidden != old_hidden {
        child.weights = child
            .weights
            .resized(input_dim, old_hidden, new_hidden, rng);
    }
    if flipped {
        child.fitness = None;
    } else {
        child.trained = ind.trained.clone();
    }
    child
}

/// One generational step: elites copied unchanged, parents drawn by rank
/// truncation, offspring by mutation until the population refills, then
/// every new individual evaluated. Returns the next population and the
/// flops spent on fresh evaluations.
pub fn evolve_generation<R: Rng + ?Sized>(
    pop: &[Individual],
    cfg: &EvolutionConfig,
    ds: &Dataset,
    rng: &mut R,
) -> Result<(Vec<Individual>, u64)> {
    let order = rank_select(pop, 1.0)?;
    let elite_n = cfg.elite_count();
    let mut next: Vec<Individual> = order[..elite_n.min(order.len())]
        .iter()
        .map(|i| pop[*i].clone())
        .collect();

    let parents = &order[..cfg.parent_count().min(order.len())];
    let mut slot = 0usize;
    while next.len() < cfg.population {
        let parent = &pop[parents[slot % parents.len()]];
        next.push(mutate(parent, cfg.mutation_rate, ds.input_dim, cfg, rng));
        slot += 1;
    }
    let spent = evaluate_population(&mut next, ds, cfg);
    Ok((next, spent))
}

/// Per-generation summary of one stream.
#[derive(Debug, Clone)]
pub struct GenerationStat {
    pub generation: usize,
    pub best_rmse: f64,
    pub mean_rmse: f64,
    pub best_arch: String,
}

/// Outcome of one algorithm's evolution stream.
#[derive(Debug, Clone)]
pub struct StreamResult {
    pub algorithm: Algorithm,
    pub best: Individual,
    pub trace: Vec<GenerationStat>,
    /// Total flops spent on fitness evaluations across all generations.
    pub flops: u64,
}

fn summarize(pop: &[Individual], generation: usize, cfg: &EvolutionConfig) -> GenerationStat {
    let best = pop
        .iter()
        .min_by(|a, b| fitness_of(a).total_cmp(&fitness_of(b)))
        .expect("population not empty");
    let finite: Vec<f64> = pop
        .iter()
        .map(fitness_of)
        .filter(|f| f.is_finite())
        .collect();
    let mean = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    GenerationStat {
        generation,
        best_rmse: fitness_of(best),
        mean_rmse: mean,
        best_arch: best.arch_string(cfg),
    }
}

fn stream_seed(base: u64, algorithm: Algorithm) -> u64 {
    let salt = match algorithm {
        Algorithm::Bp => 1u64,
        Algorithm::Scg => 2,
        Algorithm::Qna => 3,
        Algorithm::Lm => 4,
    };
    base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Evolve one independent population per requested algorithm and return
/// each stream's best individual of the final generation together with
/// its per-generation trace (generation 0 included). Picking among the
/// four returned networks is left to the caller.
pub fn run_mleann(
    cfg: &EvolutionConfig,
    ds: &Dataset,
    algorithms: &[Algorithm],
) -> Result<Vec<StreamResult>> {
    cfg.validate()?;
    let mut results = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, algorithm));
        let mut pop: Vec<Individual> = (0..cfg.population)
            .map(|_| Individual::random(algorithm, ds.input_dim, cfg, &mut rng))
            .collect();
        let mut flops = evaluate_population(&mut pop, ds, cfg);

        let mut trace = vec![summarize(&pop, 0, cfg)];
        for generation in 1..=cfg.generations {
            let (next, spent) = evolve_generation(&pop, cfg, ds, &mut rng)?;
            pop = next;
            flops += spent;
            trace.push(summarize(&pop, generation, cfg));
        }

        let best_idx = rank_select(&pop, 1.0)?[0];
        results.push(StreamResult {
            algorithm,
            best: pop[best_idx].clone(),
            trace,
            flops,
        });
    }
    Ok(results)
}
