//! The four local-search trainers: backpropagation with momentum, scaled
//! conjugate gradient, BFGS quasi-Newton with line search, and
//! Levenberg-Marquardt.
//!
//! Each trainer exists in two layers. A generic engine (`minimize_*`)
//! drives any [`Objective`], which is what the quadratic oracle tests
//! exercise; a thin wrapper (`train_*`) binds the engine to an [`Mlp`] and
//! a dataset slice and produces a [`TrainReport`] with per-epoch
//! diagnostics and the flop ledger for the run.

mod bp;
mod line_search;
mod lm;
mod qna;
mod scg;

pub use bp::minimize_bp;
pub use line_search::{line_search, LineSearchParams};
pub use lm::{lm_step, minimize_lm};
pub use qna::{bfgs_update, minimize_qna, QnaParams};
pub use scg::minimize_scg;

use nalgebra::{DMatrix, DVector};

use crate::data::Row;
use crate::error::{Error, Result};
use crate::flops::FlopLedger;
use crate::net::{self, Mlp};

/// Objective function seen by the generic engines.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64], fl: &mut FlopLedger) -> Result<f64>;
    fn value_grad(&self, w: &[f64], fl: &mut FlopLedger) -> Result<(f64, Vec<f64>)>;
}

/// Sum-of-squares objective that can expose residuals and their Jacobian.
pub trait ResidualObjective: Objective {
    fn residual_count(&self) -> usize;
    /// Returns `(J, e)` with `J` of shape `dim x residual_count`,
    /// column j holding the gradient of residual j.
    fn jacobian(&self, w: &[f64], fl: &mut FlopLedger) -> Result<(DMatrix<f64>, DVector<f64>)>;
}

/// Sum-squared-error objective of a network over a dataset slice.
pub struct NetObjective<'a> {
    template: Mlp,
    rows: &'a [Row],
}

impl<'a> NetObjective<'a> {
    pub fn new(net: &Mlp, rows: &'a [Row]) -> Self {
        Self {
            template: net.clone(),
            rows,
        }
    }

    fn instantiate(&self, w: &[f64]) -> Result<Mlp> {
        let mut net = self.template.clone();
        net.set_params(w)?;
        Ok(net)
    }
}

impl Objective for NetObjective<'_> {
    fn dim(&self) -> usize {
        self.template.param_count()
    }

    fn value(&self, w: &[f64], fl: &mut FlopLedger) -> Result<f64> {
        let net = self.instantiate(w)?;
        net::loss(&net, self.rows, fl)
    }

    fn value_grad(&self, w: &[f64], fl: &mut FlopLedger) -> Result<(f64, Vec<f64>)> {
        let net = self.instantiate(w)?;
        let gr = net::backward_gradient(&net, self.rows, fl)?;
        Ok((gr.psi, gr.g))
    }
}

impl ResidualObjective for NetObjective<'_> {
    fn residual_count(&self) -> usize {
        self.rows.len()
    }

    fn jacobian(&self, w: &[f64], fl: &mut FlopLedger) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let net = self.instantiate(w)?;
        let jr = net::jacobian(&net, self.rows, fl)?;
        Ok((jr.j, jr.e))
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Ran the configured number of epochs.
    Completed,
    /// Gradient vanished early.
    Converged,
    /// Damping exceeded its ceiling with no accepted step.
    DampingExceeded,
    /// No descent step could be found and the inverse-Hessian estimate was
    /// already reset.
    LineSearchFailed,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::Converged => "converged",
            Termination::DampingExceeded => "damping-exceeded",
            Termination::LineSearchFailed => "line-search-failed",
        }
    }
}

/// Final state of a generic minimization run.
#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub w: Vec<f64>,
    pub psi: f64,
    pub epochs_run: usize,
    pub termination: Termination,
    pub flops: u64,
}

/// One per-epoch diagnostic entry.
#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub psi: f64,
    pub rmse: f64,
    /// Optional auxiliary metric (test-set RMSE when a monitor is given).
    pub monitor: Option<f64>,
    /// Cumulative flops at the end of this epoch.
    pub flops: u64,
}

/// Result of training a network: per-epoch history, the trained network,
/// the run's flop count, and the termination reason.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub net: Mlp,
    pub flops: u64,
    pub epochs_run: usize,
    pub termination: Termination,
}

impl TrainReport {
    pub fn final_train_rmse(&self) -> Option<f64> {
        self.history.last().map(|r| r.rmse)
    }
}

/// Backpropagation-with-momentum parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(
                "momentum must lie in [0, 1) for the update to stay a decaying sum".into(),
            ));
        }
        Ok(())
    }
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.15,
            momentum: 0.15,
            epochs: 2500,
        }
    }
}

/// Scaled conjugate gradient parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgConfig {
    /// Displacement scale for the finite-difference curvature estimate.
    pub sigma: f64,
    /// Initial Levenberg-style scaling of the model Hessian.
    pub lambda0: f64,
    pub epochs: usize,
}

impl ScgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig("sigma must be positive".into()));
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for ScgConfig {
    fn default() -> Self {
        Self {
            sigma: 5e-5,
            lambda0: 5e-7,
            epochs: 2500,
        }
    }
}

/// Quasi-Newton parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnaConfig {
    /// Initial trial step of each line search.
    pub step_init: f64,
    /// Cap on any accepted line-search step.
    pub step_limit: f64,
    /// Sufficient-decrease constant of the line search.
    pub perf_scale: f64,
    /// Smallest fractional change between successive trial steps.
    pub step_scale: f64,
    pub epochs: usize,
}

impl QnaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("step_init", self.step_init),
            ("step_limit", self.step_limit),
            ("perf_scale", self.perf_scale),
            ("step_scale", self.step_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.step_scale >= 1.0 {
            return Err(Error::InvalidConfig("step_scale must be below 1".into()));
        }
        Ok(())
    }
}

impl Default for QnaConfig {
    fn default() -> Self {
        Self {
            step_init: 0.3,
            step_limit: 0.35,
            perf_scale: 0.002,
            step_scale: 0.25,
            epochs: 2500,
        }
    }
}

/// Levenberg-Marquardt parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    /// Initial damping added to the Gauss-Newton normal matrix.
    pub mu0: f64,
    pub mu_inc: f64,
    pub mu_dec: f64,
    pub mu_max: f64,
    pub epochs: usize,
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(Error::InvalidConfig(
                "initial damping must be positive".into(),
            ));
        }
        if self.mu_inc <= 1.0 || self.mu_dec <= 1.0 {
            return Err(Error::InvalidConfig(
                "damping factors must be above 1".into(),
            ));
        }
        if self.mu_max < self.mu0 {
            return Err(Error::InvalidConfig("mu_max must be >= mu0".into()));
        }
        Ok(())
    }
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            mu0: 0.01,
            mu_inc: 10.0,
            mu_dec: 10.0,
            mu_max: 1e10,
            epochs: 2500,
        }
    }
}

/// Which trainer an individual or experiment cell uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Bp,
    Scg,
    Qna,
    Lm,
}

pub const ALGORITHMS: [Algorithm; 4] =
    [Algorithm::Bp, Algorithm::Scg, Algorithm::Qna, Algorithm::Lm];

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Bp => "BP",
            Algorithm::Scg => "SCG",
            Algorithm::Qna => "QNA",
            Algorithm::Lm => "LM",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bp" => Ok(Algorithm::Bp),
            "scg" => Ok(Algorithm::Scg),
            "qna" => Ok(Algorithm::Qna),
            "lm" => Ok(Algorithm::Lm),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm '{s}'"))),
        }
    }
}

/// Per-algorithm parameter record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainerConfig {
    Bp(BpConfig),
    Scg(ScgConfig),
    Qna(QnaConfig),
    Lm(LmConfig),
}

impl TrainerConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainerConfig::Bp(_) => Algorithm::Bp,
            TrainerConfig::Scg(_) => Algorithm::Scg,
            TrainerConfig::Qna(_) => Algorithm::Qna,
            TrainerConfig::Lm(_) => Algorithm::Lm,
        }
    }

    pub fn epochs(&self) -> usize {
        match self {
            TrainerConfig::Bp(c) => c.epochs,
            TrainerConfig::Scg(c) => c.epochs,
            TrainerConfig::Qna(c) => c.epochs,
            TrainerConfig::Lm(c) => c.epochs,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        match &mut self {
            TrainerConfig::Bp(c) => c.epochs = epochs,
            TrainerConfig::Scg(c) => c.epochs = epochs,
            TrainerConfig::Qna(c) => c.epochs = epochs,
            TrainerConfig::Lm(c) => c.epochs = epochs,
        }
        self
    }

    pub fn default_for(algorithm: Algorithm, epochs: usize) -> Self {
        match algorithm {
            Algorithm::Bp => TrainerConfig::Bp(BpConfig {
                epochs,
                ..Default::default()
            }),
            Algorithm::Scg => TrainerConfig::Scg(ScgConfig {
                epochs,
                ..Default::default()
            }),
            Algorithm::Qna => TrainerConfig::Qna(QnaConfig {
                epochs,
                ..Default::default()
            }),
            Algorithm::Lm => TrainerConfig::Lm(LmConfig {
                epochs,
                ..Default::default()
            }),
        }
    }
}

/// Optional per-epoch metric computed on the current network.
pub type Monitor<'a> = dyn Fn(&Mlp) -> f64 + Sync + 'a;

/// Records per-epoch history for the network-level wrappers.
struct Recorder<'a> {
    scratch: Mlp,
    n: f64,
    monitor: Option<&'a Monitor<'a>>,
    history: Vec<EpochRecord>,
}

impl<'a> Recorder<'a> {
    fn new(net: &Mlp, n: usize, monitor: Option<&'a Monitor<'a>>) -> Self {
        Self {
            scratch: net.clone(),
            n: n as f64,
            monitor,
            history: Vec::new(),
        }
    }

    fn record(&mut self, w: &[f64], psi: f64, flops: u64) {
        let monitor = self.monitor.map(|m| {
            self.scratch
                .set_params(w)
                .expect("engine yields finite parameters");
            m(&self.scratch)
        });
        self.history.push(EpochRecord {
            psi,
            rmse: (psi / self.n).sqrt(),
            monitor,
            flops,
        });
    }
}

fn finish(net: &Mlp, outcome: MinimizeOutcome, history: Vec<EpochRecord>) -> Result<TrainReport> {
    let mut trained = net.clone();
    trained.set_params(&outcome.w)?;
    Ok(TrainReport {
        history,
        net: trained,
        flops: outcome.flops,
        epochs_run: outcome.epochs_run,
        termination: outcome.termination,
    })
}

/// Full-batch backpropagation with momentum.
///
/// The learning rate is applied to the per-row mean gradient, so the
/// stable range of rates does not depend on the number of training rows.
pub fn train_bp(
    net: &Mlp,
    data: &[Row],
    cfg: &BpConfig,
    monitor: Option<&Monitor>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let obj = NetObjective::new(net, data);
    let mut rec = Recorder::new(net, data.len(), monitor);
    let alpha = cfg.learning_rate / data.len() as f64;
    let outcome = minimize_bp(
        &obj,
        &net.params(),
        alpha,
        cfg.momentum,
        cfg.epochs,
        |_, w, psi, fl| rec.record(w, psi, fl),
    )?;
    finish(net, outcome, rec.history)
}

/// Moller's scaled conjugate gradient.
pub fn train_scg(
    net: &Mlp,
    data: &[Row],
    cfg: &ScgConfig,
    monitor: Option<&Monitor>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let obj = NetObjective::new(net, data);
    let mut rec = Recorder::new(net, data.len(), monitor);
    let outcome = minimize_scg(
        &obj,
        &net.params(),
        cfg.sigma,
        cfg.lambda0,
        cfg.epochs,
        |_, w, psi, fl| rec.record(w, psi, fl),
    )?;
    finish(net, outcome, rec.history)
}

/// BFGS quasi-Newton with a bracketing/interpolation line search.
pub fn train_qna(
    net: &Mlp,
    data: &[Row],
    cfg: &QnaConfig,
    monitor: Option<&Monitor>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let obj = NetObjective::new(net, data);
    let mut rec = Recorder::new(net, data.len(), monitor);
    let params = QnaParams {
        step_init: cfg.step_init,
        step_limit: cfg.step_limit,
        perf_scale: cfg.perf_scale,
        step_scale: cfg.step_scale,
    };
    let outcome = minimize_qna(&obj, &net.params(), &params, cfg.epochs, |_, w, psi, fl| {
        rec.record(w, psi, fl)
    })?;
    finish(net, outcome, rec.history)
}

/// Levenberg-Marquardt: damped Gauss-Newton with accept/reject adaptation
/// of the damping scalar.
pub fn train_lm(
    net: &Mlp,
    data: &[Row],
    cfg: &LmConfig,
    monitor: Option<&Monitor>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let obj = NetObjective::new(net, data);
    let mut rec = Recorder::new(net, data.len(), monitor);
    let outcome = minimize_lm(
        &obj,
        &net.params(),
        cfg.mu0,
        cfg.mu_inc,
        cfg.mu_dec,
        cfg.mu_max,
        cfg.epochs,
        |_, w, psi, fl| rec.record(w, psi, fl),
    )?;
    finish(net, outcome, rec.history)
}

/// Dispatch on the tagged parameter record.
pub fn train(
    net: &Mlp,
    data: &[Row],
    cfg: &TrainerConfig,
    monitor: Option<&Monitor>,
) -> Result<TrainReport> {
    match cfg {
        TrainerConfig::Bp(c) => train_bp(net, data, c, monitor),
        TrainerConfig::Scg(c) => train_scg(net, data, c, monitor),
        TrainerConfig::Qna(c) => train_qna(net, data, c, monitor),
        TrainerConfig::Lm(c) => train_lm(net, data, c, monitor),
    }
}
