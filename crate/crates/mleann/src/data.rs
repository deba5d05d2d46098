//! Time-series generation, supervised windowing, and train/test splits.
//!
//! Three benchmark series are supported:
//!
//! * Mackey-Glass: generated from the delay differential equation
//!   `dx/dt = 0.2 x(t-tau) / (1 + x(t-tau)^10) - 0.1 x(t)` by fourth-order
//!   Runge-Kutta, sampled at unit time spacing.
//! * Gas furnace: loaded from a two-column text file of (methane feed,
//!   CO2 concentration) observations.
//! * Wastewater flow: loaded from a one-column text file of hourly flow
//!   readings, or synthesized as a seeded noisy periodic signal when the
//!   original recording is not available.
//!
//! Supervised rows are built with the lag structure fixed per series and
//! split into a contiguous train prefix and test suffix (no shuffling —
//! these are forecasting tasks).

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A scalar time series sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct Series {
    pub values: Vec<f64>,
    /// Sampling interval in abstract time units.
    pub dt: f64,
    pub name: String,
}

impl Series {
    pub fn new(name: impl Into<String>, dt: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyData);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "series value",
                index: i,
            });
        }
        Ok(Self {
            values,
            dt,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One supervised example: input window, scalar target, and the raw
/// timestamp the window is anchored at (used to audit the temporal split).
#[derive(Debug, Clone)]
pub struct Row {
    pub time: f64,
    pub inputs: Vec<f64>,
    pub target: f64,
}

/// Supervised dataset with a contiguous train/test split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub rows: Vec<Row>,
    pub input_dim: usize,
    pub train_count: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        rows: Vec<Row>,
        input_dim: usize,
        train_count: usize,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        if train_count == 0 || train_count >= rows.len() {
            return Err(Error::InvalidConfig(format!(
                "train_count {} must lie strictly inside (0, {})",
                train_count,
                rows.len()
            )));
        }
        for row in &rows {
            if row.inputs.len() != input_dim {
                return Err(Error::DimensionMismatch {
                    what: "dataset row",
                    expected: input_dim,
                    actual: row.inputs.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            rows,
            input_dim,
            train_count,
        })
    }

    /// Contiguous prefix/suffix split; rows keep series order.
    pub fn split(&self) -> (&[Row], &[Row]) {
        self.rows.split_at(self.train_count)
    }

    pub fn train(&self) -> &[Row] {
        &self.rows[..self.train_count]
    }

    pub fn test(&self) -> &[Row] {
        &self.rows[self.train_count..]
    }

    /// CSV rendering with header `t,in1..inK,target`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push('t');
        for k in 1..=self.input_dim {
            let _ = write!(out, ",in{k}");
        }
        out.push_str(",target\n");
        for row in &self.rows {
            let _ = write!(out, "{}", fmt_float(row.time));
            for v in &row.inputs {
                let _ = write!(out, ",{}", fmt_float(*v));
            }
            let _ = writeln!(out, ",{}", fmt_float(row.target));
        }
        out
    }
}

/// Floats in emitted CSV carry six significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.5e}")
}

/// CSV rendering of a raw series with header `t,value`.
pub fn series_to_csv(series: &Series) -> String {
    let mut out = String::from("t,value\n");
    for (i, v) in series.values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", fmt_float(i as f64 * series.dt), fmt_float(*v));
    }
    out
}

/// Load a supervised dataset from the CSV layout written by
/// [`Dataset::to_csv`]. `train_count` defaults to half the rows.
pub fn load_dataset_csv(path: impl AsRef<Path>, train_count: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::EmptyData)?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "t" || *cols.last().unwrap() != "target" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header 't,in1..inK,target'".into(),
        });
    }
    let input_dim = cols.len() - 2;
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad number in '{line}'"),
            })?;
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        rows.push(Row {
            time: fields[0],
            inputs: fields[1..1 + input_dim].to_vec(),
            target: fields[cols.len() - 1],
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let n = rows.len();
    Dataset::new(name, rows, input_dim, train_count.unwrap_or(n / 2))
}

/// Min-max scale inputs and target onto [0, 1], with ranges computed on
/// the training rows only. Degenerate (constant) columns pass through.
pub fn normalize_min_max(ds: &Dataset) -> Dataset {
    let dim = ds.input_dim;
    let mut lo = vec![f64::INFINITY; dim + 1];
    let mut hi = vec![f64::NEG_INFINITY; dim + 1];
    for row in ds.train() {
        for (k, v) in row.inputs.iter().enumerate() {
            lo[k] = lo[k].min(*v);
            hi[k] = hi[k].max(*v);
        }
        lo[dim] = lo[dim].min(row.target);
        hi[dim] = hi[dim].max(row.target);
    }
    let scale = |k: usize, v: f64| {
        if hi[k] > lo[k] {
            (v - lo[k]) / (hi[k] - lo[k])
        } else {
            v
        }
    };
    let rows = ds
        .rows
        .iter()
        .map(|row| Row {
            time: row.time,
            inputs: row
                .inputs
                .iter()
                .enumerate()
                .map(|(k, v)| scale(k, *v))
                .collect(),
            target: scale(dim, row.target),
        })
        .collect();
    Dataset {
        name: format!("{}-normalized", ds.name),
        rows,
        input_dim: dim,
        train_count: ds.train_count,
    }
}

/// Parameters of the Mackey-Glass generator.
#[derive(Debug, Clone, Copy)]
pub struct MackeyGlassSpec {
    pub tau: f64,
    pub dt: f64,
    pub x0: f64,
    pub n_points: usize,
    pub a: f64,
    pub b: f64,
    pub exponent: i32,
}

impl Default for MackeyGlassSpec {
    fn default() -> Self {
        Self {
            tau: 17.0,
            dt: 0.1,
            x0: 1.2,
            n_points: 1000,
            a: 0.2,
            b: 0.1,
            exponent: 10,
        }
    }
}

impl MackeyGlassSpec {
    /// Delay expressed in integration steps; must land exactly on the grid.
    fn lag_steps(&self) -> Result<usize> {
        let steps = self.tau / self.dt;
        if (steps - steps.round()).abs() > 1e-9 || steps <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "delay {} is not an integer multiple of dt {}",
                self.tau, self.dt
            )));
        }
        Ok(steps.round() as usize)
    }
}

/// Integrate the Mackey-Glass delay equation with classic RK4.
///
/// The delayed state is held constant over each step (read from the stored
/// grid at the step start, zero for negative time) and samples are emitted
/// at unit-time spacing, i.e. every `1/dt`-th grid point.
pub fn mackey_glass_generate(spec: &MackeyGlassSpec) -> Result<Series> {
    let lag = spec.lag_steps()?;
    let per_unit = (1.0 / spec.dt).round() as usize;
    let total_steps = (spec.n_points - 1) * per_unit;

    let mut grid = Vec::with_capacity(total_steps + 1);
    grid.push(spec.x0);

    let a = spec.a;
    let b = spec.b;
    let expo = spec.exponent;
    let h = spec.dt;

    for i in 0..total_steps {
        let delayed = if i >= lag { grid[i - lag] } else { 0.0 };
        let forcing = a * delayed / (1.0 + delayed.powi(expo));
        let deriv = |x: f64| forcing - b * x;

        let x = grid[i];
        let k1 = deriv(x);
        let k2 = deriv(x + 0.5 * h * k1);
        let k3 = deriv(x + 0.5 * h * k2);
        let k4 = deriv(x + h * k3);
        grid.push(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }

    let values: Vec<f64> = grid.iter().step_by(per_unit).copied().collect();
    debug_assert_eq!(values.len(), spec.n_points);
    Series::new("mackey-glass", 1.0, values)
}

/// Mackey-Glass supervised window: inputs (x(t-18), x(t-12), x(t-6), x(t)),
/// target x(t+6), first 500 rows train.
pub const MACKEY_LAGS: [usize; 4] = [18, 12, 6, 0];
pub const MACKEY_LEAD: usize = 6;
pub const MACKEY_TRAIN: usize = 500;

pub fn embed_mackey(series: &Series) -> Result<Dataset> {
    let max_lag = *MACKEY_LAGS.iter().max().unwrap();
    let required = max_lag + MACKEY_LEAD + 2;
    if series.len() < required {
        return Err(Error::SeriesTooShort {
            required,
            actual: series.len(),
        });
    }

    let mut rows = Vec::new();
    for t in max_lag..(series.len() - MACKEY_LEAD) {
        let inputs = MACKEY_LAGS
            .iter()
            .map(|lag| series.values[t - lag])
            .collect();
        rows.push(Row {
            time: t as f64,
            inputs,
            target: series.values[t + MACKEY_LEAD],
        });
    }
    Dataset::new("mackey-glass", rows, MACKEY_LAGS.len(), MACKEY_TRAIN)
}

/// Canonical row budget for the gas furnace data: the series is treated as
/// 292 (input, output) pairs with a 50/50 split.
pub const GAS_FURNACE_ROWS: usize = 292;

/// Load the Box-Jenkins gas furnace recording: two whitespace- or
/// comma-separated columns (methane feed u, CO2 concentration y) per line,
/// `#` comments ignored. Rows pair (u(t), y(t)) with target y(t+1).
pub fn load_gas_furnace(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected 2 columns (u, y), got {}", fields.len()),
            });
        }
        let u: f64 = fields[0].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            message: format!("bad number '{}'", fields[0]),
        })?;
        let y: f64 = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            message: format!("bad number '{}'", fields[1]),
        })?;
        raw.push((u, y));
    }
    if raw.len() < 2 {
        return Err(Error::SeriesTooShort {
            required: 2,
            actual: raw.len(),
        });
    }
    if !(290..=296).contains(&raw.len()) {
        log::warn!(
            "gas furnace file has {} observations, outside the typical 290..=296; proceeding",
            raw.len()
        );
    }

    let mut rows = Vec::new();
    for t in 0..raw.len() - 1 {
        if rows.len() == GAS_FURNACE_ROWS {
            break;
        }
        rows.push(Row {
            time: t as f64,
            inputs: vec![raw[t].0, raw[t].1],
            target: raw[t + 1].1,
        });
    }
    let train = rows.len() / 2;
    Dataset::new("gas-furnace", rows, 2, train)
}

/// Trailing moving average: output index k holds the mean of the `window`
/// samples ending at input index `k + window - 1`. Only past samples enter
/// each mean, so the transform never leaks future values.
pub fn moving_average(series: &Series, window: usize) -> Result<Series> {
    if window == 0 {
        return Err(Error::InvalidConfig("window must be >= 1".into()));
    }
    if window > series.len() {
        return Err(Error::SeriesTooShort {
            required: window,
            actual: series.len(),
        });
    }
    let inv = 1.0 / window as f64;
    let mut out = Vec::with_capacity(series.len() - window + 1);
    let mut sum: f64 = series.values[..window].iter().sum();
    out.push(sum * inv);
    for t in window..series.len() {
        sum += series.values[t] - series.values[t - window];
        out.push(sum * inv);
    }
    Series::new(format!("{}-ma{}", series.name, window), series.dt, out)
}

pub const WASTEWATER_TRAIN: usize = 240;
const WASTEWATER_MA_SHORT: usize = 12;
const WASTEWATER_MA_LONG: usize = 24;

/// Build wastewater supervised rows from an hourly flow series: inputs
/// (f(t), f(t-1), 12h mean a(t), 24h mean b(t)), target f(t+1). Rows start
/// at the first t where the 24-hour mean is defined.
pub fn embed_wastewater(series: &Series) -> Result<Dataset> {
    let start = WASTEWATER_MA_LONG - 1;
    let required = start + 3;
    if series.len() < required {
        return Err(Error::SeriesTooShort {
            required,
            actual: series.len(),
        });
    }
    let short = moving_average(series, WASTEWATER_MA_SHORT)?;
    let long = moving_average(series, WASTEWATER_MA_LONG)?;

    let mut rows = Vec::new();
    for t in start..(series.len() - 1) {
        rows.push(Row {
            time: t as f64,
            inputs: vec![
                series.values[t],
                series.values[t - 1],
                short.values[t - (WASTEWATER_MA_SHORT - 1)],
                long.values[t - (WASTEWATER_MA_LONG - 1)],
            ],
            target: series.values[t + 1],
        });
    }
    Dataset::new(series.name.clone(), rows, 4, WASTEWATER_TRAIN)
}

/// Load hourly wastewater flow from a one-value-per-line text file
/// (`#` comments ignored) and window it.
pub fn load_wastewater(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            message: format!("bad number '{line}'"),
        })?;
        values.push(v);
    }
    let series = Series::new("wastewater", 1.0, values)?;
    embed_wastewater(&series)
}

/// Seeded stand-in for the original wastewater recording: a positive,
/// noisy flow with 24h and 12h periodic components, 475 hourly samples.
/// Results computed on it are labeled synthetic.
pub fn synthetic_wastewater(seed: u64) -> Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 475;
    let mut values = Vec::with_capacity(n);
    let two_pi = std::f64::consts::TAU;
    for t in 0..n {
        let t = t as f64;
        let daily = 0.35 * (two_pi * t / 24.0).sin();
        let half_daily = 0.15 * (two_pi * t / 12.0 + 0.9).sin();
        let drift = 0.05 * (two_pi * t / 160.0).cos();
        let noise = 0.04 * (rng.gen::<f64>() - 0.5);
        values.push(1.0 + daily + half_daily + drift + noise);
    }
    Series::new("wastewater-synthetic", 1.0, values).expect("synthetic series is finite")
}
