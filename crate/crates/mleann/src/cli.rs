//! Command-line interface: data generation, single training runs,
//! evolution, and full benchmark reproduction.
//!
//! Every subcommand is seeded and, with `--serial`, bit-reproducible.
//! Option precedence is flags over config file over built-in defaults;
//! the config file is flat `key = value` text mirroring the flag names.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{self, ExperimentSpec, Protocol};
use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::evolve::{EvolutionConfig, FitnessSplit};
use crate::flops::FlopLedger;
use crate::net::{self, ActivationKind, Mlp};
use crate::trainers::{self, Algorithm, TrainerConfig, ALGORITHMS};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MLEANN_OUT_DIR";
/// Environment variable naming the gas furnace recording.
pub const GAS_FURNACE_ENV: &str = "MLEANN_GAS_FURNACE_FILE";
/// Fallback path probed for the gas furnace recording.
pub const GAS_FURNACE_DEFAULT: &str = "data/gas-furnace.dat";
/// Seed of the bundled synthetic wastewater series; fixed so every run
/// sees the same stand-in data regardless of `--seed`.
const SYNTHETIC_WASTEWATER_SEED: u64 = 475;

#[derive(Debug, Parser)]
#[command(
    name = "mleann",
    version,
    about = "Evolutionary meta-learning for feedforward neural networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or ingest a time series; write it and its supervised
    /// window as CSV.
    GenData(GenDataArgs),
    /// Train one network with one algorithm; write a per-epoch report and
    /// the final network.
    Train(TrainArgs),
    /// Run the evolutionary search and write result and trace CSVs.
    Evolve(EvolveArgs),
    /// Reproduce the benchmark protocols across datasets.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Base random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single-threaded deterministic execution.
    #[arg(long)]
    pub serial: bool,
    /// Output directory (default: $MLEANN_OUT_DIR or ./mleann-out).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Flat key=value config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Path to the gas furnace recording (two columns: u, y).
    #[arg(long)]
    pub gas_furnace_file: Option<PathBuf>,
    /// Path to an hourly wastewater flow file (one value per line).
    #[arg(long)]
    pub wastewater_file: Option<PathBuf>,
    /// Min-max scale inputs and target from the train split.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Series id: mackey-glass, wastewater, or gas-furnace.
    pub series: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset id (mackey-glass, gas-furnace, wastewater) or a dataset
    /// CSV path.
    #[arg(long)]
    pub data: String,
    /// Trainer: bp, scg, qna, or lm.
    #[arg(long)]
    pub algo: Option<Algorithm>,
    /// Hidden layer, e.g. "24T*" or "8T,2T*,1L*".
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Train-row count when --data is a CSV path.
    #[arg(long)]
    pub train_count: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Dataset id or dataset CSV path.
    #[arg(long)]
    pub data: String,
    /// Comma-separated algorithm streams (default: all four).
    #[arg(long)]
    pub algos: Option<String>,
    /// Population size.
    #[arg(long)]
    pub pop: Option<usize>,
    /// Generation count.
    #[arg(long)]
    pub gens: Option<usize>,
    /// Local-search epochs per fitness evaluation.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Restrict architectures to at most 4 hidden neurons.
    #[arg(long)]
    pub restrict_arch: bool,
    /// Smallest hidden-node count.
    #[arg(long)]
    pub hidden_min: Option<usize>,
    /// Largest hidden-node count.
    #[arg(long)]
    pub hidden_max: Option<usize>,
    /// Rows fitness is read from: test or validation.
    #[arg(long)]
    pub fitness_split: Option<FitnessSplit>,
    /// Write refined weights back into genomes.
    #[arg(long)]
    pub lamarckian: bool,
    /// Train-row count when --data is a CSV path.
    #[arg(long)]
    pub train_count: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// conventional or mleann.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Dataset id or "all".
    #[arg(long)]
    pub data: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Replicates per conventional cell.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Report the best replicate instead of the worst.
    #[arg(long)]
    pub report_best: bool,
    /// Activation used for the conventional hidden-layer sweep.
    #[arg(long)]
    pub activation: Option<String>,
    /// Comma-separated algorithms (default: all four).
    #[arg(long)]
    pub algos: Option<String>,
    /// Evolution population (mleann protocol).
    #[arg(long)]
    pub pop: Option<usize>,
    /// Evolution generations (mleann protocol).
    #[arg(long)]
    pub gens: Option<usize>,
    /// Restrict architectures to at most 4 hidden neurons.
    #[arg(long)]
    pub restrict_arch: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl clap::builder::ValueParserFactory for Algorithm {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| Algorithm::from_str(s).map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for FitnessSplit {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| {
            FitnessSplit::from_str(s).map_err(|e| e.to_string())
        })
    }
}

/// Parsed config file plus the allowlist of keys it may contain.
struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: format!("expected 'key = value', got '{line}'"),
                })?;
                let key = key.trim().to_string();
                if !allowed.contains(&key.as_str()) {
                    return Err(Error::InvalidConfig(format!(
                        "unknown config key '{key}' (allowed: {})",
                        allowed.join(", ")
                    )));
                }
                values.insert(key, value.trim().to_string());
            }
        }
        Ok(Self { values })
    }

    fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|_| {
                Error::InvalidConfig(format!("config key '{key}' has bad value '{raw}'"))
            }),
            None => Ok(default),
        }
    }
}

fn out_dir(common: &CommonArgs) -> PathBuf {
    common
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mleann-out"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Locate the gas furnace recording: explicit flag, environment variable,
/// then the conventional relative path.
pub fn gas_furnace_path(flag: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = flag {
        return Some(p.to_path_buf());
    }
    if let Some(p) = std::env::var_os(GAS_FURNACE_ENV) {
        return Some(PathBuf::from(p));
    }
    let fallback = PathBuf::from(GAS_FURNACE_DEFAULT);
    fallback.exists().then_some(fallback)
}

fn load_dataset(id: &str, common: &CommonArgs, train_count: Option<usize>) -> Result<Dataset> {
    let ds = match id {
        "mackey-glass" => {
            let series = data::mackey_glass_generate(&data::MackeyGlassSpec::default())?;
            data::embed_mackey(&series)?
        }
        "gas-furnace" => {
            let path = gas_furnace_path(common.gas_furnace_file.as_deref()).ok_or_else(|| {
                Error::io(
                    GAS_FURNACE_DEFAULT,
                    std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!(
                            "gas furnace file not found; pass --gas-furnace-file or set {GAS_FURNACE_ENV}"
                        ),
                    ),
                )
            })?;
            data::load_gas_furnace(path)?
        }
        "wastewater" => match &common.wastewater_file {
            Some(path) => data::load_wastewater(path)?,
            None => data::embed_wastewater(&data::synthetic_wastewater(SYNTHETIC_WASTEWATER_SEED))?,
        },
        path if Path::new(path).extension().is_some() || Path::new(path).exists() => {
            data::load_dataset_csv(path, train_count)?
        }
        _ => return Err(Error::UnknownDataset(id.to_string())),
    };
    Ok(if common.normalize {
        data::normalize_min_max(&ds)
    } else {
        ds
    })
}

fn parse_algorithms(raw: Option<&str>) -> Result<Vec<Algorithm>> {
    match raw {
        None => Ok(ALGORITHMS.to_vec()),
        Some(s) => s
            .split(',')
            .map(|t| Algorithm::from_str(t.trim()))
            .collect(),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Train(args) => cmd_train(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

const GEN_DATA_KEYS: &[&str] = &["seed", "out-dir"];

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let settings = Settings::load(args.common.config.as_deref(), GEN_DATA_KEYS)?;
    let seed = settings.get("seed", args.common.seed, 0)?;
    let dir = out_dir(&args.common);
    ensure_dir(&dir)?;

    let (series, ds) = match args.series.as_str() {
        "mackey-glass" => {
            let series = data::mackey_glass_generate(&data::MackeyGlassSpec::default())?;
            let ds = data::embed_mackey(&series)?;
            (Some(series), ds)
        }
        "wastewater" => {
            let series = match &args.common.wastewater_file {
                Some(path) => {
                    let ds = data::load_wastewater(path)?;
                    return emit_dataset_files(&dir, None, &ds);
                }
                None => data::synthetic_wastewater(seed),
            };
            let ds = data::embed_wastewater(&series)?;
            (Some(series), ds)
        }
        "gas-furnace" => {
            let ds = load_dataset("gas-furnace", &args.common, None)?;
            (None, ds)
        }
        other => return Err(Error::UnknownDataset(other.to_string())),
    };
    emit_dataset_files(&dir, series.as_ref(), &ds)
}

fn emit_dataset_files(dir: &Path, series: Option<&data::Series>, ds: &Dataset) -> Result<()> {
    if let Some(series) = series {
        let path = dir.join(format!("{}-series.csv", series.name));
        write_file(&path, &data::series_to_csv(series))?;
        println!("wrote {} ({} samples)", path.display(), series.len());
    }
    let path = dir.join(format!("{}-dataset.csv", ds.name));
    write_file(&path, &ds.to_csv())?;
    println!(
        "wrote {} ({} rows, {} train)",
        path.display(),
        ds.rows.len(),
        ds.train_count
    );
    Ok(())
}

const TRAIN_KEYS: &[&str] = &["seed", "out-dir", "algo", "arch", "epochs", "train-count"];

fn cmd_train(args: TrainArgs) -> Result<()> {
    let settings = Settings::load(args.common.config.as_deref(), TRAIN_KEYS)?;
    let seed = settings.get("seed", args.common.seed, 0)?;
    let algo: Algorithm = settings.get("algo", args.algo, Algorithm::Lm)?;
    let arch_text: String = settings.get("arch", args.arch.clone(), "24T*".to_string())?;
    let epochs = settings.get("epochs", args.epochs, 2500)?;
    let train_count = args.train_count;
    let dir = out_dir(&args.common);
    ensure_dir(&dir)?;

    let ds = load_dataset(&args.data, &args.common, train_count)?;
    let hidden = net::parse_arch(&arch_text)?;
    let (train_rows, test_rows) = ds.split();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net0 = Mlp::random(ds.input_dim, hidden, 0.3, &mut rng)?;
    let cfg = TrainerConfig::default_for(algo, epochs);

    let mut fl = FlopLedger::new();
    let initial_train = net::rmse(&net0, train_rows, &mut fl)?;
    let initial_test = net::rmse(&net0, test_rows, &mut fl)?;

    let started = Instant::now();
    let monitor = move |m: &Mlp| {
        let mut fl = FlopLedger::new();
        net::rmse(m, test_rows, &mut fl).unwrap_or(f64::NAN)
    };
    let report = trainers::train(&net0, train_rows, &cfg, Some(&monitor))?;
    let wall = started.elapsed().as_secs_f64();

    let mut csv = String::from("epoch,train_rmse,test_rmse,flops\n");
    csv.push_str(&format!(
        "0,{},{},0\n",
        data::fmt_float(initial_train),
        data::fmt_float(initial_test)
    ));
    for (i, rec) in report.history.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            data::fmt_float(rec.rmse),
            data::fmt_float(rec.monitor.unwrap_or(f64::NAN)),
            rec.flops
        ));
    }
    let report_path = dir.join("train-report.csv");
    write_file(&report_path, &csv)?;
    let net_path = dir.join("net.txt");
    write_file(&net_path, &net::write_net_text(&report.net))?;

    let mut fl = FlopLedger::new();
    let final_test = net::rmse(&report.net, test_rows, &mut fl)?;
    println!(
        "{} on {} ({}): {} epochs, train RMSE {:.6}, test RMSE {:.6}, {} flops, {:.2}s ({})",
        algo,
        ds.name,
        net::format_arch(report.net.hidden()),
        report.epochs_run,
        report.final_train_rmse().unwrap_or(initial_train),
        final_test,
        report.flops,
        wall,
        report.termination.label()
    );
    println!("wrote {}", report_path.display());
    println!("wrote {}", net_path.display());
    Ok(())
}

const EVOLVE_KEYS: &[&str] = &[
    "seed",
    "out-dir",
    "algos",
    "pop",
    "gens",
    "epochs",
    "hidden-min",
    "hidden-max",
    "fitness-split",
    "train-count",
];

#[allow(clippy::too_many_arguments)]
fn evolution_config_from(
    settings: &Settings,
    pop: Option<usize>,
    gens: Option<usize>,
    epochs: Option<usize>,
    hidden_min: Option<usize>,
    hidden_max: Option<usize>,
    restrict_arch: bool,
    fitness_split: Option<FitnessSplit>,
    lamarckian: bool,
    seed: u64,
    serial: bool,
) -> Result<EvolutionConfig> {
    let defaults = EvolutionConfig::default();
    let bounds = if restrict_arch {
        EvolutionConfig::RESTRICTED_BOUNDS
    } else {
        (
            settings.get("hidden-min", hidden_min, defaults.hidden_bounds.0)?,
            settings.get("hidden-max", hidden_max, defaults.hidden_bounds.1)?,
        )
    };
    let cfg = EvolutionConfig {
        population: settings.get("pop", pop, defaults.population)?,
        generations: settings.get("gens", gens, defaults.generations)?,
        epochs_per_eval: settings.get("epochs", epochs, defaults.epochs_per_eval)?,
        hidden_bounds: bounds,
        seed,
        serial,
        write_back: lamarckian,
        fitness_split: settings.get("fitness-split", fitness_split, FitnessSplit::Test)?,
        ..defaults
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_evolve(args: EvolveArgs) -> Result<()> {
    let settings = Settings::load(args.common.config.as_deref(), EVOLVE_KEYS)?;
    let seed = settings.get("seed", args.common.seed, 0)?;
    let algos_text: Option<String> = match &args.algos {
        Some(s) => Some(s.clone()),
        None => settings.values.get("algos").cloned(),
    };
    let algorithms = parse_algorithms(algos_text.as_deref())?;
    let dir = out_dir(&args.common);

    let ds = load_dataset(&args.data, &args.common, args.train_count)?;
    let config = evolution_config_from(
        &settings,
        args.pop,
        args.gens,
        args.epochs,
        args.hidden_min,
        args.hidden_max,
        args.restrict_arch,
        args.fitness_split,
        args.lamarckian,
        seed,
        args.common.serial,
    )?;

    let spec = ExperimentSpec {
        dataset: ds.name.clone(),
        protocol: Protocol::Mleann { config },
        algorithms,
        seed,
        serial: args.common.serial,
    };
    let started = Instant::now();
    let output = bench::run_mleann_experiment(&spec, &ds)?;
    let wall = started.elapsed().as_secs_f64();
    let files = bench::emit_results(&output, &dir)?;

    for row in &output.rows {
        println!(
            "{} stream best: {} -> test RMSE {:.6}",
            row.algorithm, row.architecture, row.test_rmse
        );
    }
    println!("total wall time {wall:.2}s");
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

const BENCH_KEYS: &[&str] = &[
    "seed",
    "out-dir",
    "algos",
    "pop",
    "gens",
    "epochs",
    "protocol",
    "replicates",
    "activation",
];

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let settings = Settings::load(args.common.config.as_deref(), BENCH_KEYS)?;
    let seed = settings.get("seed", args.common.seed, 0)?;
    let protocol: String = settings.get(
        "protocol",
        args.protocol.clone(),
        "conventional".to_string(),
    )?;
    let algos_text: Option<String> = match &args.algos {
        Some(s) => Some(s.clone()),
        None => settings.values.get("algos").cloned(),
    };
    let algorithms = parse_algorithms(algos_text.as_deref())?;
    let dir = out_dir(&args.common);

    let dataset_ids: Vec<&str> = if args.data == "all" {
        vec!["mackey-glass", "gas-furnace", "wastewater"]
    } else {
        vec![args.data.as_str()]
    };

    let mut datasets = Vec::new();
    for id in dataset_ids {
        match load_dataset(id, &args.common, None) {
            Ok(ds) => datasets.push(ds),
            Err(e) if args.data == "all" && id == "gas-furnace" => {
                log::warn!("skipping gas-furnace: {e}");
                eprintln!("skipping gas-furnace: {e}");
            }
            Err(e) => return Err(e),
        }
    }

    let mut combined = bench::BenchOutput::default();
    let started = Instant::now();
    for ds in &datasets {
        let spec = match protocol.as_str() {
            "conventional" => {
                let kind_text: String =
                    settings.get("activation", args.activation.clone(), "T*".to_string())?;
                let kind = ActivationKind::from_label(&kind_text).ok_or_else(|| {
                    Error::InvalidConfig(format!("unknown activation label '{kind_text}'"))
                })?;
                ExperimentSpec {
                    dataset: ds.name.clone(),
                    protocol: Protocol::Conventional {
                        architectures: bench::standard_architectures(kind),
                        epochs: settings.get("epochs", args.epochs, 2500)?,
                        replicates: settings.get("replicates", args.replicates, 3)?,
                        report_worst: !args.report_best,
                    },
                    algorithms: algorithms.clone(),
                    seed,
                    serial: args.common.serial,
                }
            }
            "mleann" => {
                let config = evolution_config_from(
                    &settings,
                    args.pop,
                    args.gens,
                    args.epochs,
                    None,
                    None,
                    args.restrict_arch,
                    None,
                    false,
                    seed,
                    args.common.serial,
                )?;
                ExperimentSpec {
                    dataset: ds.name.clone(),
                    protocol: Protocol::Mleann { config },
                    algorithms: algorithms.clone(),
                    seed,
                    serial: args.common.serial,
                }
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown protocol '{other}' (conventional or mleann)"
                )))
            }
        };
        let output = match &spec.protocol {
            Protocol::Conventional { .. } => bench::run_conventional(&spec, ds)?,
            Protocol::Mleann { .. } => bench::run_mleann_experiment(&spec, ds)?,
        };
        combined.rows.extend(output.rows);
        combined.raw_rows.extend(output.raw_rows);
        combined.traces.extend(output.traces);
    }
    let wall = started.elapsed().as_secs_f64();

    let files = bench::emit_results(&combined, &dir)?;
    println!(
        "{} rows across {} dataset(s), total wall time {:.2}s",
        combined.rows.len(),
        datasets.len(),
        wall
    );
    for row in &combined.rows {
        println!(
            "{:12} {:4} {:12} train {:.6} test {:.6} ({} flops)",
            row.dataset,
            row.algorithm.label(),
            row.architecture,
            row.train_rmse,
            row.test_rmse,
            row.flops
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

/// Process exit code for an error: 2 usage, 3 data, 4 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::UnknownDataset(_) => 2,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::SeriesTooShort { .. }
        | Error::EmptyData
        | Error::DimensionMismatch { .. } => 3,
        Error::NonFinite { .. }
        | Error::NonFiniteLoss { .. }
        | Error::Numeric(_)
        | Error::NotDescent { .. }
        | Error::LineSearchFailed { .. }
        | Error::SolveFailed => 4,
    }
}
