//! Evolutionary meta-learning for feedforward neural networks.
//!
//! The crate combines two search layers. Locally, four gradient-based
//! trainers (backpropagation with momentum, scaled conjugate gradient,
//! BFGS quasi-Newton, Levenberg-Marquardt) fit a one-hidden-layer network
//! to a supervised time-series window. Globally, a mutation-only
//! evolutionary loop searches over connection weights, architectures
//! (hidden-node count and per-node activation functions), and the
//! trainers' own parameters, reading each candidate's fitness as the RMSE
//! reached after a bout of local search.
//!
//! Three chaotic time-series benchmarks are built in (Mackey-Glass,
//! Box-Jenkins gas furnace, wastewater flow), and the `bench` module
//! reproduces both experiment protocols: conventional architecture sweeps
//! and the full evolutionary runs, with per-run floating-point-operation
//! accounting.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod evolve;
pub mod flops;
pub mod net;
pub mod trainers;

pub use data::{Dataset, Row, Series};
pub use error::{Error, Result};
pub use flops::FlopLedger;
pub use net::{ActivationKind, Mlp};
pub use trainers::{Algorithm, TrainReport, TrainerConfig};
