//! One-hidden-layer feedforward network with per-node activation kinds,
//! sum-squared-error loss, backpropagated gradient, and the per-residual
//! Jacobian used by the damped least-squares trainer.
//!
//! Parameters are ordered with all weights into the same node contiguous:
//! for each hidden node h the block `(w_in[h][0..d], b_hid[h])`, followed
//! by `w_out[0..H]` and finally `b_out`. The genome encoding and the flat
//! weight vectors seen by the trainers both use this layout.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::data::Row;
use crate::error::{Error, Result};
use crate::flops::{self, FlopLedger};

/// Hidden-node transfer function label.
///
/// Five labels form the genome alphabet. `Tanh`/`TanhSigmoid` evaluate the
/// same function (the latter is the `2/(1+e^(-2x))-1` form, algebraically
/// identical to tanh), as do `Logistic`/`LogSigmoid`; `Sigmoid` is the
/// rational `x/(1+|x|)`. The output node is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// tanh(x), label `T`
    Tanh,
    /// 1/(1+e^(-x)), label `L`
    Logistic,
    /// x/(1+|x|), label `S`
    Sigmoid,
    /// tanh-sigmoidal form, label `T*`
    TanhSigmoid,
    /// log-sigmoidal form, label `L*`
    LogSigmoid,
}

pub const ACTIVATION_KINDS: [ActivationKind; 5] = [
    ActivationKind::Tanh,
    ActivationKind::Logistic,
    ActivationKind::Sigmoid,
    ActivationKind::TanhSigmoid,
    ActivationKind::LogSigmoid,
];

impl ActivationKind {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ActivationKind::Tanh | ActivationKind::TanhSigmoid => x.tanh(),
            ActivationKind::Logistic | ActivationKind::LogSigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Sigmoid => x / (1.0 + x.abs()),
        }
    }

    /// Exact derivative at pre-activation `z`, given the cached output `a`.
    #[inline]
    pub fn deriv(self, z: f64, a: f64) -> f64 {
        match self {
            ActivationKind::Tanh | ActivationKind::TanhSigmoid => 1.0 - a * a,
            ActivationKind::Logistic | ActivationKind::LogSigmoid => a * (1.0 - a),
            ActivationKind::Sigmoid => {
                let d = 1.0 + z.abs();
                1.0 / (d * d)
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "T",
            ActivationKind::Logistic => "L",
            ActivationKind::Sigmoid => "S",
            ActivationKind::TanhSigmoid => "T*",
            ActivationKind::LogSigmoid => "L*",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "T" => Some(ActivationKind::Tanh),
            "L" => Some(ActivationKind::Logistic),
            "S" => Some(ActivationKind::Sigmoid),
            "T*" => Some(ActivationKind::TanhSigmoid),
            "L*" => Some(ActivationKind::LogSigmoid),
            _ => None,
        }
    }

    /// Index into [`ACTIVATION_KINDS`]; genome codes map through this.
    pub fn index(self) -> usize {
        ACTIVATION_KINDS.iter().position(|k| *k == self).unwrap()
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Parse an architecture string such as `"8T,2T*,1L*"` into the hidden
/// layer it describes.
pub fn parse_arch(s: &str) -> Result<Vec<ActivationKind>> {
    let mut hidden = Vec::new();
    for token in s.split(',') {
        let token = token.trim();
        if token.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "empty token in architecture string '{s}'"
            )));
        }
        let digits_end = token
            .char_indices()
            .find(|(_, c)| !c.is_ascii_digit())
            .map(|(i, _)| i)
            .unwrap_or(token.len());
        let (count_str, label) = token.split_at(digits_end);
        let count: usize = if count_str.is_empty() {
            1
        } else {
            count_str.parse().map_err(|_| {
                Error::InvalidConfig(format!("bad count in architecture token '{token}'"))
            })?
        };
        let kind = ActivationKind::from_label(label).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown activation label '{label}' in architecture token '{token}'"
            ))
        })?;
        if count == 0 {
            return Err(Error::InvalidConfig(format!(
                "zero count in architecture token '{token}'"
            )));
        }
        hidden.extend(std::iter::repeat_n(kind, count));
    }
    if hidden.is_empty() {
        return Err(Error::InvalidConfig("architecture string is empty".into()));
    }
    Ok(hidden)
}

/// Compact rendering of a hidden layer, grouping consecutive runs:
/// `[T,T,T*,L*] -> "2T,1T*,1L*"`.
pub fn format_arch(hidden: &[ActivationKind]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < hidden.len() {
        let kind = hidden[i];
        let mut j = i;
        while j < hidden.len() && hidden[j] == kind {
            j += 1;
        }
        parts.push(format!("{}{}", j - i, kind.label()));
        i = j;
    }
    parts.join(",")
}

/// Feedforward network: `input_dim` inputs, one hidden layer with per-node
/// activations, one linear output node.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden: Vec<ActivationKind>,
    /// Node-major input weights: `w_in[h * input_dim + i]`.
    w_in: Vec<f64>,
    b_hid: Vec<f64>,
    w_out: Vec<f64>,
    b_out: f64,
}

impl Mlp {
    /// Zero-initialized network.
    pub fn new(input_dim: usize, hidden: Vec<ActivationKind>) -> Result<Self> {
        if input_dim == 0 || hidden.is_empty() {
            return Err(Error::InvalidConfig(
                "network needs at least one input and one hidden node".into(),
            ));
        }
        let h = hidden.len();
        Ok(Self {
            input_dim,
            hidden,
            w_in: vec![0.0; input_dim * h],
            b_hid: vec![0.0; h],
            w_out: vec![0.0; h],
            b_out: 0.0,
        })
    }

    /// Network with all parameters drawn uniformly from `[-range, range]`.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: Vec<ActivationKind>,
        range: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::new(input_dim, hidden)?;
        let p = net.param_count();
        let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-range..=range)).collect();
        net.set_params(&w)?;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> &[ActivationKind] {
        &self.hidden
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden.len()
    }

    pub fn arch_string(&self) -> String {
        format_arch(&self.hidden)
    }

    /// Total trainable parameter count `d*H + H + H + 1`.
    pub fn param_count(&self) -> usize {
        let h = self.hidden.len();
        self.input_dim * h + h + h + 1
    }

    /// Flatten parameters in the canonical node-contiguous order.
    pub fn params(&self) -> Vec<f64> {
        let d = self.input_dim;
        let h = self.hidden.len();
        let mut w = Vec::with_capacity(self.param_count());
        for node in 0..h {
            w.extend_from_slice(&self.w_in[node * d..(node + 1) * d]);
            w.push(self.b_hid[node]);
        }
        w.extend_from_slice(&self.w_out);
        w.push(self.b_out);
        w
    }

    /// Overwrite parameters from a flat vector in canonical order.
    pub fn set_params(&mut self, w: &[f64]) -> Result<()> {
        let p = self.param_count();
        if w.len() != p {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: p,
                actual: w.len(),
            });
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameter vector",
                index: i,
            });
        }
        let d = self.input_dim;
        let h = self.hidden.len();
        for node in 0..h {
            let block = &w[node * (d + 1)..(node + 1) * (d + 1)];
            self.w_in[node * d..(node + 1) * d].copy_from_slice(&block[..d]);
            self.b_hid[node] = block[d];
        }
        self.w_out.copy_from_slice(&w[h * (d + 1)..h * (d + 1) + h]);
        self.b_out = w[p - 1];
        Ok(())
    }

    /// Single forward pass, caching intermediates for backpropagation.
    pub fn forward(&self, x: &[f64], fl: &mut FlopLedger) -> Result<(f64, EvalTape)> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "input vector",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let d = self.input_dim;
        let h = self.hidden.len();
        let mut pre = Vec::with_capacity(h);
        let mut act = Vec::with_capacity(h);
        let mut y = self.b_out;
        for node in 0..h {
            let mut z = self.b_hid[node];
            let row = &self.w_in[node * d..(node + 1) * d];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            let a = self.hidden[node].eval(z);
            y += self.w_out[node] * a;
            pre.push(z);
            act.push(a);
        }
        fl.add(h as u64 * (flops::vector_op(d) + 1 + flops::ACTIVATION_FLOPS + 2) + 1);
        Ok((
            y,
            EvalTape {
                pre_activations: pre,
                activations: act,
                output: y,
            },
        ))
    }

    /// Forward pass without a caller-owned ledger.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut fl = FlopLedger::new();
        Ok(self.forward(x, &mut fl)?.0)
    }
}

/// Plain-text rendering: an architecture header line followed by one
/// parameter per line in canonical order.
pub fn write_net_text(net: &Mlp) -> String {
    let mut out = format!("arch {} {}\n", net.input_dim(), net.arch_string());
    for w in net.params() {
        out.push_str(&format!("{w:.17e}\n"));
    }
    out
}

/// Parse the plain-text network format produced by [`write_net_text`].
pub fn parse_net_text(text: &str) -> Result<Mlp> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let l = l.trim();
        !l.is_empty() && !l.starts_with('#')
    });
    let (lineno, header) = lines.next().ok_or(Error::EmptyData)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "arch" {
        return Err(Error::Parse {
            line: lineno + 1,
            message: "expected header 'arch <input_dim> <architecture>'".into(),
        });
    }
    let input_dim: usize = fields[1].parse().map_err(|_| Error::Parse {
        line: lineno + 1,
        message: format!("bad input dimension '{}'", fields[1]),
    })?;
    let hidden = parse_arch(fields[2])?;
    let mut net = Mlp::new(input_dim, hidden)?;
    let mut w = Vec::with_capacity(net.param_count());
    for (lineno, line) in lines {
        let v: f64 = line.trim().parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            message: format!("bad weight '{}'", line.trim()),
        })?;
        w.push(v);
    }
    net.set_params(&w)?;
    Ok(net)
}

/// Cached intermediates of one `(network, input row)` forward pass.
/// A tape is only valid for the exact parameters that produced it.
#[derive(Debug, Clone)]
pub struct EvalTape {
    pub pre_activations: Vec<f64>,
    pub activations: Vec<f64>,
    pub output: f64,
}

/// Gradient of the sum-squared error together with its value.
#[derive(Debug, Clone)]
pub struct GradientResult {
    /// d(psi)/dw, length `param_count`.
    pub g: Vec<f64>,
    /// Sum of squared residuals.
    pub psi: f64,
}

/// Per-residual derivatives: column j holds d(e_j)/dw.
#[derive(Debug, Clone)]
pub struct JacobianResult {
    /// p x n matrix of residual derivatives.
    pub j: DMatrix<f64>,
    /// Residual vector, e_j = y_j - t_j.
    pub e: DVector<f64>,
}

/// Sum-squared error over a dataset slice.
pub fn loss(net: &Mlp, rows: &[Row], fl: &mut FlopLedger) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut psi = 0.0;
    for row in rows {
        let (y, _) = net.forward(&row.inputs, fl)?;
        let e = y - row.target;
        psi += e * e;
    }
    fl.add(3 * rows.len() as u64);
    Ok(psi)
}

/// Root mean squared error over a dataset slice.
pub fn rmse(net: &Mlp, rows: &[Row], fl: &mut FlopLedger) -> Result<f64> {
    let psi = loss(net, rows, fl)?;
    fl.add(2);
    Ok((psi / rows.len() as f64).sqrt())
}

/// Backpropagated gradient of the sum-squared error.
pub fn backward_gradient(net: &Mlp, rows: &[Row], fl: &mut FlopLedger) -> Result<GradientResult> {
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let d = net.input_dim;
    let h = net.hidden.len();
    let p = net.param_count();
    let mut g = vec![0.0; p];
    let mut psi = 0.0;

    for row in rows {
        let (y, tape) = net.forward(&row.inputs, fl)?;
        let e = y - row.target;
        psi += e * e;
        let factor = 2.0 * e;
        accumulate_residual_grad(net, row, &tape, factor, &mut g, d, h, p);
    }
    fl.add(rows.len() as u64 * per_row_backward_flops(d, h) + 3 * rows.len() as u64);

    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            index: i,
        });
    }
    Ok(GradientResult { g, psi })
}

/// Per-residual Jacobian (columns are residual gradients) and residuals.
pub fn jacobian(net: &Mlp, rows: &[Row], fl: &mut FlopLedger) -> Result<JacobianResult> {
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let d = net.input_dim;
    let h = net.hidden.len();
    let p = net.param_count();
    let n = rows.len();
    let mut j = DMatrix::<f64>::zeros(p, n);
    let mut e = DVector::<f64>::zeros(n);

    for (col, row) in rows.iter().enumerate() {
        let (y, tape) = net.forward(&row.inputs, fl)?;
        e[col] = y - row.target;
        let mut column = vec![0.0; p];
        accumulate_residual_grad(net, row, &tape, 1.0, &mut column, d, h, p);
        j.column_mut(col).copy_from_slice(&column);
    }
    fl.add(n as u64 * per_row_backward_flops(d, h));

    for (idx, v) in j.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "jacobian",
                index: idx,
            });
        }
    }
    Ok(JacobianResult { j, e })
}

/// Accumulate `factor * d(e_row)/dw` into `g` using the canonical layout.
#[allow(clippy::too_many_arguments)]
fn accumulate_residual_grad(
    net: &Mlp,
    row: &Row,
    tape: &EvalTape,
    factor: f64,
    g: &mut [f64],
    d: usize,
    h: usize,
    p: usize,
) {
    g[p - 1] += factor;
    for node in 0..h {
        let a = tape.activations[node];
        let z = tape.pre_activations[node];
        g[h * (d + 1) + node] += factor * a;
        let s = factor * net.w_out[node] * net.hidden[node].deriv(z, a);
        let block = node * (d + 1);
        g[block + d] += s;
        for (i, xi) in row.inputs.iter().enumerate() {
            g[block + i] += s * xi;
        }
    }
}

fn per_row_backward_flops(d: usize, h: usize) -> u64 {
    h as u64 * (flops::vector_op(d) + flops::ACTIVATION_DERIV_FLOPS + 5) + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Row;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn row(inputs: Vec<f64>, target: f64) -> Row {
        Row {
            time: 0.0,
            inputs,
            target,
        }
    }

    fn fl() -> FlopLedger {
        FlopLedger::new()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::new(3, vec![ActivationKind::Tanh; 4]).unwrap();
        assert_eq!(net.predict(&[0.3, -1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_tanh_node_identity_cases() {
        let mut net = Mlp::new(1, vec![ActivationKind::Tanh]).unwrap();
        // w_in=1, b_hid=0, w_out=1, b_out=0
        net.set_params(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(net.predict(&[0.0]).unwrap(), 0.0);
        let y = net.predict(&[2.0]).unwrap();
        assert!((y - 2.0f64.tanh()).abs() < 1e-15);
        assert!((y - 0.9640).abs() < 1e-4);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = Mlp::random(4, vec![ActivationKind::Sigmoid; 6], 0.3, &mut rng).unwrap();
        let x = [0.1, -0.4, 2.0, 0.7];
        let a = net.predict(&x).unwrap();
        let b = net.predict(&x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = Mlp::new(2, vec![ActivationKind::Tanh]).unwrap();
        assert!(matches!(
            net.predict(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn loss_cases() {
        let net = Mlp::new(1, vec![ActivationKind::Tanh]).unwrap();
        // Zero net predicts 0 everywhere.
        assert_eq!(loss(&net, &[row(vec![1.0], 0.0)], &mut fl()).unwrap(), 0.0);
        assert_eq!(loss(&net, &[row(vec![1.0], -1.0)], &mut fl()).unwrap(), 1.0);
        // Residuals (1, -2) -> 1 + 4.
        assert_eq!(
            loss(
                &net,
                &[row(vec![1.0], -1.0), row(vec![1.0], 2.0)],
                &mut fl()
            )
            .unwrap(),
            5.0
        );
        assert!(matches!(loss(&net, &[], &mut fl()), Err(Error::EmptyData)));
    }

    #[test]
    fn rmse_cases() {
        let net = Mlp::new(1, vec![ActivationKind::Tanh]).unwrap();
        assert_eq!(rmse(&net, &[row(vec![0.5], 0.0)], &mut fl()).unwrap(), 0.0);
        let r = rmse(
            &net,
            &[row(vec![0.0], 1.0), row(vec![0.0], -1.0)],
            &mut fl(),
        )
        .unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    // A network whose hidden activation saturates to exactly 1.0 behaves as
    // y = w_out * 1.0, so hand chain-rule values are exact.
    #[test]
    fn gradient_matches_hand_chain_rule_on_saturated_node() {
        let mut net = Mlp::new(1, vec![ActivationKind::Tanh]).unwrap();
        // tanh(20) rounds to 1.0 in f64.
        net.set_params(&[1.0, 0.0, 3.0, 0.0]).unwrap();
        let rows = [row(vec![20.0], 0.0)];
        let gr = backward_gradient(&net, &rows, &mut fl()).unwrap();
        // e = 3, d(psi)/d(w_out) = 2*e*a = 6.
        let w_out_idx = 2;
        assert_eq!(gr.g[w_out_idx], 6.0);
        assert_eq!(gr.psi, 9.0);
    }

    #[test]
    fn jacobian_on_saturated_node_is_activation() {
        let mut net = Mlp::new(1, vec![ActivationKind::Tanh]).unwrap();
        net.set_params(&[1.0, 0.0, 3.0, 0.0]).unwrap();
        let rows = [row(vec![20.0], 1.0), row(vec![20.0], 2.0)];
        let jr = jacobian(&net, &rows, &mut fl()).unwrap();
        let w_out_idx = 2;
        assert_eq!(jr.j[(w_out_idx, 0)], 1.0);
        assert_eq!(jr.j[(w_out_idx, 1)], 1.0);
        assert_eq!(jr.e[0], 2.0);
        assert_eq!(jr.e[1], 1.0);
    }

    fn random_net_and_rows(seed: u64, d: usize, h: usize, n: usize) -> (Mlp, Vec<Row>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden: Vec<ActivationKind> = (0..h)
            .map(|_| ACTIVATION_KINDS[rng.gen_range(0..ACTIVATION_KINDS.len())])
            .collect();
        let net = Mlp::random(d, hidden, 0.8, &mut rng).unwrap();
        let rows = (0..n)
            .map(|_| {
                row(
                    (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                    rng.gen_range(-1.5..1.5),
                )
            })
            .collect();
        (net, rows)
    }

    fn finite_difference_grad(net: &Mlp, rows: &[Row]) -> Vec<f64> {
        let w = net.params();
        let mut g = vec![0.0; w.len()];
        let mut scratch = net.clone();
        for i in 0..w.len() {
            let h = 1e-6 * (1.0 + w[i].abs());
            let mut wp = w.clone();
            wp[i] += h;
            scratch.set_params(&wp).unwrap();
            let fp = loss(&scratch, rows, &mut fl()).unwrap();
            wp[i] = w[i] - h;
            scratch.set_params(&wp).unwrap();
            let fm = loss(&scratch, rows, &mut fl()).unwrap();
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn max_rel_dev(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs())))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (net, rows) = random_net_and_rows(42, 2, 4, 10);
        let gr = backward_gradient(&net, &rows, &mut fl()).unwrap();
        let fd = finite_difference_grad(&net, &rows);
        assert!(
            max_rel_dev(&gr.g, &fd) < 1e-6,
            "max rel dev {}",
            max_rel_dev(&gr.g, &fd)
        );
    }

    #[test]
    fn gradient_matches_finite_differences_zero_net_zero_targets() {
        let net = Mlp::new(3, vec![ActivationKind::Logistic, ActivationKind::Tanh]).unwrap();
        let rows: Vec<Row> = (0..5)
            .map(|i| row(vec![i as f64, -0.5 * i as f64, 1.0], 0.0))
            .collect();
        let gr = backward_gradient(&net, &rows, &mut fl()).unwrap();
        let fd = finite_difference_grad(&net, &rows);
        assert!(max_rel_dev(&gr.g, &fd) < 1e-6);
    }

    #[test]
    fn jacobian_columns_match_residual_finite_differences() {
        let (net, rows) = random_net_and_rows(9, 3, 3, 6);
        let jr = jacobian(&net, &rows, &mut fl()).unwrap();
        let w = net.params();
        let mut scratch = net.clone();
        for (col, r) in rows.iter().enumerate() {
            for i in 0..w.len() {
                let h = 1e-6 * (1.0 + w[i].abs());
                let mut wp = w.clone();
                wp[i] += h;
                scratch.set_params(&wp).unwrap();
                let ep = scratch.predict(&r.inputs).unwrap() - r.target;
                wp[i] = w[i] - h;
                scratch.set_params(&wp).unwrap();
                let em = scratch.predict(&r.inputs).unwrap() - r.target;
                let fd = (ep - em) / (2.0 * h);
                let dev = (jr.j[(i, col)] - fd).abs() / (1.0 + fd.abs());
                assert!(dev < 1e-6, "col {col} param {i}: dev {dev}");
            }
        }
    }

    // The gradient of sum(e^2) is 2*J*e; this ties the two backprop routes
    // together (see the acceptance suite for the quantitative identity).
    #[test]
    fn jacobian_product_reproduces_gradient() {
        let (net, rows) = random_net_and_rows(3, 2, 5, 8);
        let gr = backward_gradient(&net, &rows, &mut fl()).unwrap();
        let jr = jacobian(&net, &rows, &mut fl()).unwrap();
        let je = &jr.j * &jr.e;
        let gnorm = gr.g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dev =
            gr.g.iter()
                .zip(je.iter())
                .map(|(g, je)| (2.0 * je - g).abs())
                .fold(0.0, f64::max);
        assert!(dev <= 1e-10 * (1.0 + gnorm), "dev {dev}");
    }

    #[test]
    fn zero_residual_fit_gives_zero_product() {
        let mut net = Mlp::new(1, vec![ActivationKind::Tanh]).unwrap();
        net.set_params(&[1.0, 0.0, 2.0, 0.5]).unwrap();
        let t = net.predict(&[0.7]).unwrap();
        let rows = [row(vec![0.7], t)];
        let jr = jacobian(&net, &rows, &mut fl()).unwrap();
        let je = &jr.j * &jr.e;
        assert!(je.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn loss_equals_residual_norm_from_jacobian() {
        let (net, rows) = random_net_and_rows(5, 2, 3, 7);
        let psi = loss(&net, &rows, &mut fl()).unwrap();
        let jr = jacobian(&net, &rows, &mut fl()).unwrap();
        let sum: f64 = jr.e.iter().map(|e| e * e).sum();
        assert_eq!(psi, sum);
    }

    #[test]
    fn paired_labels_evaluate_identically() {
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            assert_eq!(
                ActivationKind::Tanh.eval(x),
                ActivationKind::TanhSigmoid.eval(x)
            );
            assert_eq!(
                ActivationKind::Logistic.eval(x),
                ActivationKind::LogSigmoid.eval(x)
            );
        }
    }

    #[test]
    fn arch_string_round_trip() {
        let hidden = parse_arch("8T,2T*,1L*").unwrap();
        assert_eq!(hidden.len(), 11);
        assert_eq!(format_arch(&hidden), "8T,2T*,1L*");
        assert_eq!(parse_arch("24T*").unwrap().len(), 24);
        assert!(parse_arch("24Q").is_err());
        assert!(parse_arch("").is_err());
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::random(3, vec![ActivationKind::Tanh; 5], 0.3, &mut rng).unwrap();
        let w = net.params();
        assert_eq!(w.len(), net.param_count());
        let mut copy = Mlp::new(3, net.hidden().to_vec()).unwrap();
        copy.set_params(&w).unwrap();
        assert_eq!(copy, net);
    }

    #[test]
    fn set_params_rejects_non_finite() {
        let mut net = Mlp::new(1, vec![ActivationKind::Tanh]).unwrap();
        let err = net.set_params(&[1.0, f64::NAN, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
    }

    #[test]
    fn net_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Mlp::random(4, parse_arch("2T,1S,1L*").unwrap(), 0.3, &mut rng).unwrap();
        let text = write_net_text(&net);
        let back = parse_net_text(&text).unwrap();
        assert_eq!(back, net);
        assert!(parse_net_text("arch x y\n").is_err());
    }

    #[test]
    fn forward_counts_flops() {
        let net = Mlp::new(2, vec![ActivationKind::Tanh; 3]).unwrap();
        let mut ledger = fl();
        net.forward(&[1.0, 2.0], &mut ledger).unwrap();
        assert!(ledger.total() > 0);
    }
}
