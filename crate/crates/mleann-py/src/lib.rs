//! Python bindings exposing the network, datasets, trainers, and the
//! evolutionary search.

// The generated glue trips clippy's conversion lint on every fallible
// #[pymethods] signature.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mleann::data;
use mleann::evolve::{self, EvolutionConfig, FitnessSplit};
use mleann::flops::FlopLedger;
use mleann::net;
use mleann::trainers::{self, Algorithm, TrainerConfig};

fn to_py_err(err: mleann::Error) -> PyErr {
    use mleann::Error::*;
    match err {
        Io { .. } => PyIOError::new_err(err.to_string()),
        InvalidConfig(_)
        | UnknownDataset(_)
        | Parse { .. }
        | DimensionMismatch { .. }
        | EmptyData
        | SeriesTooShort { .. } => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn parse_algorithm(name: &str) -> PyResult<Algorithm> {
    name.parse().map_err(to_py_err)
}

/// One-hidden-layer feedforward network with a linear output node.
#[pyclass(name = "Mlp")]
#[derive(Clone)]
struct PyMlp {
    inner: net::Mlp,
}

#[pymethods]
impl PyMlp {
    /// Build a network from an architecture string such as "8T,2T*,1L*".
    /// With a seed, weights are drawn uniformly from [-0.3, 0.3];
    /// otherwise they start at zero.
    #[new]
    #[pyo3(signature = (input_dim, arch, seed=None))]
    fn new(input_dim: usize, arch: &str, seed: Option<u64>) -> PyResult<Self> {
        let hidden = net::parse_arch(arch).map_err(to_py_err)?;
        let inner = match seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                net::Mlp::random(input_dim, hidden, 0.3, &mut rng).map_err(to_py_err)?
            }
            None => net::Mlp::new(input_dim, hidden).map_err(to_py_err)?,
        };
        Ok(Self { inner })
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn arch(&self) -> String {
        self.inner.arch_string()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&x).map_err(to_py_err)
    }

    fn params(&self) -> Vec<f64> {
        self.inner.params()
    }

    fn set_params(&mut self, w: Vec<f64>) -> PyResult<()> {
        self.inner.set_params(&w).map_err(to_py_err)
    }

    /// RMSE over a dataset split: "train", "test", or "all".
    fn rmse(&self, dataset: &PyDataset, split: &str) -> PyResult<f64> {
        let rows = dataset.rows_for(split)?;
        let mut fl = FlopLedger::new();
        net::rmse(&self.inner, rows, &mut fl).map_err(to_py_err)
    }

    /// Plain-text form with an architecture header line.
    fn to_text(&self) -> String {
        net::write_net_text(&self.inner)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: net::parse_net_text(text).map_err(to_py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Mlp(input_dim={}, arch='{}', params={})",
            self.inner.input_dim(),
            self.inner.arch_string(),
            self.inner.param_count()
        )
    }
}

/// Supervised time-series window with a contiguous train/test split.
#[pyclass(name = "Dataset")]
#[derive(Clone)]
struct PyDataset {
    inner: data::Dataset,
}

impl PyDataset {
    fn rows_for(&self, split: &str) -> PyResult<&[data::Row]> {
        match split {
            "train" => Ok(self.inner.train()),
            "test" => Ok(self.inner.test()),
            "all" => Ok(&self.inner.rows),
            other => Err(PyValueError::new_err(format!(
                "unknown split '{other}' (train, test, or all)"
            ))),
        }
    }
}

#[pymethods]
impl PyDataset {
    /// Mackey-Glass series embedded with lags (18, 12, 6, 0) and lead 6.
    #[staticmethod]
    fn mackey_glass() -> PyResult<Self> {
        let series =
            data::mackey_glass_generate(&data::MackeyGlassSpec::default()).map_err(to_py_err)?;
        Ok(Self {
            inner: data::embed_mackey(&series).map_err(to_py_err)?,
        })
    }

    /// Synthetic hourly wastewater flow, windowed with its 12h/24h means.
    #[staticmethod]
    #[pyo3(signature = (seed=475))]
    fn wastewater(seed: u64) -> PyResult<Self> {
        let series = data::synthetic_wastewater(seed);
        Ok(Self {
            inner: data::embed_wastewater(&series).map_err(to_py_err)?,
        })
    }

    /// Box-Jenkins gas furnace recording from a two-column text file.
    #[staticmethod]
    fn gas_furnace(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: data::load_gas_furnace(path).map_err(to_py_err)?,
        })
    }

    /// Load the CSV layout written by `to_csv` (header t,in1..inK,target).
    #[staticmethod]
    #[pyo3(signature = (path, train_count=None))]
    fn from_csv(path: &str, train_count: Option<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: data::load_dataset_csv(path, train_count).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim
    }

    #[getter]
    fn train_count(&self) -> usize {
        self.inner.train_count
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    /// Row `i` as (time, inputs, target).
    fn row(&self, i: usize) -> PyResult<(f64, Vec<f64>, f64)> {
        let row = self
            .inner
            .rows
            .get(i)
            .ok_or_else(|| PyValueError::new_err(format!("row {i} out of range")))?;
        Ok((row.time, row.inputs.clone(), row.target))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name='{}', rows={}, input_dim={}, train_count={})",
            self.inner.name,
            self.inner.rows.len(),
            self.inner.input_dim,
            self.inner.train_count
        )
    }
}

/// Per-epoch history and the trained network from one training run.
#[pyclass(name = "TrainReport")]
struct PyTrainReport {
    #[pyo3(get)]
    epochs_run: usize,
    #[pyo3(get)]
    flops: u64,
    #[pyo3(get)]
    termination: String,
    #[pyo3(get)]
    final_train_rmse: f64,
    #[pyo3(get)]
    final_test_rmse: f64,
    history: Vec<(usize, f64, f64)>,
    net: net::Mlp,
}

#[pymethods]
impl PyTrainReport {
    /// List of (epoch, train_rmse, test_rmse) tuples.
    #[getter]
    fn history(&self) -> Vec<(usize, f64, f64)> {
        self.history.clone()
    }

    #[getter]
    fn net(&self) -> PyMlp {
        PyMlp {
            inner: self.net.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainReport(epochs_run={}, final_test_rmse={:.6}, flops={}, termination='{}')",
            self.epochs_run, self.final_test_rmse, self.flops, self.termination
        )
    }
}

/// Generate the Mackey-Glass series (RK4 on the delay equation, unit-time
/// sampling).
#[pyfunction]
#[pyo3(signature = (n_points=1000))]
fn mackey_glass(n_points: usize) -> PyResult<Vec<f64>> {
    let spec = data::MackeyGlassSpec {
        n_points,
        ..Default::default()
    };
    Ok(data::mackey_glass_generate(&spec)
        .map_err(to_py_err)?
        .values)
}

/// Train `net` on the dataset's train split with one of "bp", "scg",
/// "qna", "lm"; per-epoch test RMSE is tracked alongside.
#[pyfunction]
#[pyo3(signature = (net, dataset, algo="lm", epochs=100))]
fn train(net: &PyMlp, dataset: &PyDataset, algo: &str, epochs: usize) -> PyResult<PyTrainReport> {
    let algorithm = parse_algorithm(algo)?;
    let cfg = TrainerConfig::default_for(algorithm, epochs);
    let (train_rows, test_rows) = dataset.inner.split();
    let monitor = move |m: &net::Mlp| {
        let mut fl = FlopLedger::new();
        net::rmse(m, test_rows, &mut fl).unwrap_or(f64::NAN)
    };
    let report =
        trainers::train(&net.inner, train_rows, &cfg, Some(&monitor)).map_err(to_py_err)?;

    let mut fl = FlopLedger::new();
    let final_train = net::rmse(&report.net, train_rows, &mut fl).map_err(to_py_err)?;
    let final_test = net::rmse(&report.net, test_rows, &mut fl).map_err(to_py_err)?;
    Ok(PyTrainReport {
        epochs_run: report.epochs_run,
        flops: report.flops,
        termination: report.termination.label().to_string(),
        final_train_rmse: final_train,
        final_test_rmse: final_test,
        history: report
            .history
            .iter()
            .enumerate()
            .map(|(i, r)| (i + 1, r.rmse, r.monitor.unwrap_or(f64::NAN)))
            .collect(),
        net: report.net,
    })
}

/// Run the evolutionary search. Returns a dict keyed by algorithm label
/// with the best network, its fitness, and the per-generation trace.
#[pyfunction]
#[pyo3(signature = (
    dataset,
    algorithms=vec!["bp".into(), "scg".into(), "qna".into(), "lm".into()],
    population=40,
    generations=40,
    epochs_per_eval=500,
    seed=0,
    serial=false,
    restrict_arch=false,
    fitness_split="test",
))]
#[allow(clippy::too_many_arguments)]
fn run_evolution<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    algorithms: Vec<String>,
    population: usize,
    generations: usize,
    epochs_per_eval: usize,
    seed: u64,
    serial: bool,
    restrict_arch: bool,
    fitness_split: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let algos: Vec<Algorithm> = algorithms
        .iter()
        .map(|a| parse_algorithm(a))
        .collect::<PyResult<_>>()?;
    let cfg = EvolutionConfig {
        population,
        generations,
        epochs_per_eval,
        hidden_bounds: if restrict_arch {
            EvolutionConfig::RESTRICTED_BOUNDS
        } else {
            EvolutionConfig::default().hidden_bounds
        },
        seed,
        serial,
        fitness_split: fitness_split.parse::<FitnessSplit>().map_err(to_py_err)?,
        ..Default::default()
    };
    let results = evolve::run_mleann(&cfg, &dataset.inner, &algos).map_err(to_py_err)?;

    let out = PyDict::new_bound(py);
    for sr in results {
        let entry = PyDict::new_bound(py);
        entry.set_item("best_rmse", sr.best.fitness.unwrap_or(f64::INFINITY))?;
        entry.set_item("best_arch", sr.best.arch_string(&cfg))?;
        let trace = PyList::empty_bound(py);
        for stat in &sr.trace {
            trace.append((stat.generation, stat.best_rmse, stat.mean_rmse))?;
        }
        entry.set_item("trace", trace)?;
        if let Some(net) = sr.best.trained {
            entry.set_item("net", PyMlp { inner: net }.into_py(py))?;
        }
        out.set_item(sr.algorithm.label(), entry)?;
    }
    Ok(out)
}

#[pymodule]
fn mleann_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMlp>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTrainReport>()?;
    m.add_function(wrap_pyfunction!(mackey_glass, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_evolution, m)?)?;
    Ok(())
}
