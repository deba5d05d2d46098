//! Experiment runner: conventional architecture sweeps and full
//! evolutionary runs, with per-run flop accounting and CSV emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{fmt_float, Dataset};
use crate::error::{Error, Result};
use crate::evolve::{self, EvolutionConfig, StreamResult};
use crate::flops::FlopLedger;
use crate::net::{self, format_arch, ActivationKind, Mlp};
use crate::trainers::{self, Algorithm, TrainerConfig};

/// Which protocol an experiment runs.
#[derive(Debug, Clone)]
pub enum Protocol {
    /// Fixed architectures, each trained by each algorithm for a fixed
    /// number of epochs, several replicates from different seeds.
    Conventional {
        architectures: Vec<Vec<ActivationKind>>,
        epochs: usize,
        replicates: usize,
        /// Report the worst replicate's test error (the conservative
        /// convention used for all conventional tables).
        report_worst: bool,
    },
    /// Evolutionary runs, one stream per algorithm.
    Mleann { config: EvolutionConfig },
}

/// A full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub dataset: String,
    pub protocol: Protocol,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub serial: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms requested".into()));
        }
        match &self.protocol {
            Protocol::Conventional {
                architectures,
                replicates,
                ..
            } => {
                if architectures.is_empty() {
                    return Err(Error::InvalidConfig(
                        "conventional protocol needs an explicit architecture list".into(),
                    ));
                }
                if *replicates == 0 {
                    return Err(Error::InvalidConfig("replicates must be >= 1".into()));
                }
            }
            Protocol::Mleann { config } => config.validate()?,
        }
        Ok(())
    }
}

/// One reported experiment cell.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub architecture: String,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub flops: u64,
    pub wall_time_s: f64,
    /// Replicate index for raw rows; `None` on aggregated rows.
    pub replicate: Option<usize>,
    pub seed: u64,
    /// Set when the trainer aborted; the row is kept for audit.
    pub aborted: bool,
}

/// Everything a benchmark run produces.
#[derive(Debug, Clone, Default)]
pub struct BenchOutput {
    /// Aggregated rows (worst replicate when `report_worst`).
    pub rows: Vec<ResultRow>,
    /// Every replicate, always logged alongside the summary.
    pub raw_rows: Vec<ResultRow>,
    /// Evolution traces, empty for conventional runs.
    pub traces: Vec<(String, StreamResult)>,
}

fn replicate_seed(base: u64, algorithm: Algorithm, arch_idx: usize, replicate: usize) -> u64 {
    let mut x = base
        ^ (algorithm as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (arch_idx as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (replicate as u64 + 1).wrapping_mul(0x94D0_49BB_1331_11EB);
    // SplitMix finalizer.
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn run_one_cell(
    ds: &Dataset,
    arch: &[ActivationKind],
    algorithm: Algorithm,
    epochs: usize,
    seed: u64,
    replicate: usize,
) -> ResultRow {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch_name = format_arch(arch);
    let (train, test) = ds.split();

    let outcome = Mlp::random(ds.input_dim, arch.to_vec(), 0.3, &mut rng).and_then(|net| {
        let cfg = TrainerConfig::default_for(algorithm, epochs);
        trainers::train(&net, train, &cfg, None)
    });

    match outcome {
        Ok(report) => {
            let mut fl = FlopLedger::new();
            let train_rmse = net::rmse(&report.net, train, &mut fl).unwrap_or(f64::NAN);
            let test_rmse = net::rmse(&report.net, test, &mut fl).unwrap_or(f64::NAN);
            ResultRow {
                dataset: ds.name.clone(),
                algorithm,
                architecture: arch_name,
                train_rmse,
                test_rmse,
                flops: report.flops,
                wall_time_s: started.elapsed().as_secs_f64(),
                replicate: Some(replicate),
                seed,
                aborted: false,
            }
        }
        Err(_) => ResultRow {
            dataset: ds.name.clone(),
            algorithm,
            architecture: arch_name,
            train_rmse: f64::NAN,
            test_rmse: f64::NAN,
            flops: 0,
            wall_time_s: started.elapsed().as_secs_f64(),
            replicate: Some(replicate),
            seed,
            aborted: true,
        },
    }
}

/// Conventional sweep: every (architecture, algorithm) pair trained
/// `replicates` times from distinct seeds. Aborted replicates are flagged
/// and skipped in aggregation; the run continues.
pub fn run_conventional(spec: &ExperimentSpec, ds: &Dataset) -> Result<BenchOutput> {
    spec.validate()?;
    let Protocol::Conventional {
        architectures,
        epochs,
        replicates,
        report_worst,
    } = &spec.protocol
    else {
        return Err(Error::InvalidConfig(
            "run_conventional needs the conventional protocol".into(),
        ));
    };

    let mut cells: Vec<(usize, usize, Algorithm)> = Vec::new();
    for (ai, _) in architectures.iter().enumerate() {
        for &algo in &spec.algorithms {
            for rep in 0..*replicates {
                cells.push((ai, rep, algo));
            }
        }
    }

    let run = |&(ai, rep, algo): &(usize, usize, Algorithm)| {
        let seed = replicate_seed(spec.seed, algo, ai, rep);
        run_one_cell(ds, &architectures[ai], algo, *epochs, seed, rep)
    };
    let raw_rows: Vec<ResultRow> = if spec.serial {
        cells.iter().map(run).collect()
    } else {
        cells.par_iter().map(run).collect()
    };

    let mut rows = Vec::new();
    for arch in architectures {
        for &algo in &spec.algorithms {
            let arch_name = format_arch(arch);
            let group: Vec<&ResultRow> = raw_rows
                .iter()
                .filter(|r| r.algorithm == algo && r.architecture == arch_name && !r.aborted)
                .collect();
            let Some(pick) = (if *report_worst {
                group
                    .iter()
                    .max_by(|a, b| a.test_rmse.total_cmp(&b.test_rmse))
            } else {
                group
                    .iter()
                    .min_by(|a, b| a.test_rmse.total_cmp(&b.test_rmse))
            }) else {
                // Every replicate aborted; keep a flagged placeholder row.
                let mut row = raw_rows
                    .iter()
                    .find(|r| r.algorithm == algo && r.architecture == arch_name)
                    .cloned()
                    .expect("at least one replicate per cell");
                row.replicate = None;
                rows.push(row);
                continue;
            };
            let mut row = (*pick).clone();
            row.replicate = None;
            rows.push(row);
        }
    }

    Ok(BenchOutput {
        rows,
        raw_rows,
        traces: Vec::new(),
    })
}

/// Evolutionary runs: one stream per algorithm, reporting each stream's
/// final best individual evaluated on the train/test split.
pub fn run_mleann_experiment(spec: &ExperimentSpec, ds: &Dataset) -> Result<BenchOutput> {
    spec.validate()?;
    let Protocol::Mleann { config } = &spec.protocol else {
        return Err(Error::InvalidConfig(
            "run_mleann_experiment needs the mleann protocol".into(),
        ));
    };
    let mut config = config.clone();
    config.seed = spec.seed;
    config.serial = spec.serial;

    let started = Instant::now();
    let streams = evolve::run_mleann(&config, ds, &spec.algorithms)?;
    let wall = started.elapsed().as_secs_f64();

    let (train, test) = ds.split();
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for sr in streams {
        let (train_rmse, test_rmse) = match &sr.best.trained {
            Some(net) => {
                let mut fl = FlopLedger::new();
                (
                    net::rmse(net, train, &mut fl).unwrap_or(f64::NAN),
                    net::rmse(net, test, &mut fl).unwrap_or(f64::NAN),
                )
            }
            None => (f64::NAN, f64::NAN),
        };
        rows.push(ResultRow {
            dataset: ds.name.clone(),
            algorithm: sr.algorithm,
            architecture: sr.best.arch_string(&config),
            train_rmse,
            test_rmse,
            flops: sr.flops,
            wall_time_s: wall,
            replicate: None,
            seed: spec.seed,
            aborted: sr.best.trained.is_none(),
        });
        traces.push((ds.name.clone(), sr));
    }
    Ok(BenchOutput {
        rows,
        raw_rows: Vec::new(),
        traces,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

// Wall times stay out of the emitted files so identical seeded runs
// produce byte-identical output; they are reported in run summaries only.
fn result_csv(rows: &[ResultRow], with_replicate: bool) -> String {
    let mut out = String::from("dataset,algorithm,architecture,train_rmse,test_rmse,flops");
    if with_replicate {
        out.push_str(",replicate,seed,aborted");
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},\"{}\",{},{},{}",
            r.dataset,
            r.algorithm,
            r.architecture,
            fmt_float(r.train_rmse),
            fmt_float(r.test_rmse),
            r.flops,
        ));
        if with_replicate {
            out.push_str(&format!(
                ",{},{},{}",
                r.replicate.map_or(String::new(), |x| x.to_string()),
                r.seed,
                r.aborted
            ));
        }
        out.push('\n');
    }
    out
}

fn traces_csv(traces: &[(String, StreamResult)]) -> String {
    // Stream labels carry the dataset qualifier only when several
    // datasets share one file, keeping the single-run schema compact.
    let multi = traces.windows(2).any(|pair| pair[0].0 != pair[1].0);
    let mut out = String::from("stream,generation,best_rmse,mean_rmse,best_arch\n");
    for (dataset, sr) in traces {
        let stream = if multi {
            format!("{}/{}", dataset, sr.algorithm)
        } else {
            sr.algorithm.label().to_string()
        };
        for stat in &sr.trace {
            out.push_str(&format!(
                "{},{},{},{},\"{}\"\n",
                stream,
                stat.generation,
                fmt_float(stat.best_rmse),
                fmt_float(stat.mean_rmse),
                stat.best_arch
            ));
        }
    }
    out
}

fn flops_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("dataset,algorithm,architecture,flops\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},\"{}\",{}\n",
            r.dataset, r.algorithm, r.architecture, r.flops
        ));
    }
    out
}

/// Write `results.csv`, `raw_results.csv`, `traces.csv`, and `flops.csv`
/// under `out_dir`. Output is deterministic given the inputs.
pub fn emit_results(output: &BenchOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let results = out_dir.join("results.csv");
    write_file(&results, &result_csv(&output.rows, false))?;
    written.push(results);

    let raw = out_dir.join("raw_results.csv");
    write_file(&raw, &result_csv(&output.raw_rows, true))?;
    written.push(raw);

    let traces = out_dir.join("traces.csv");
    write_file(&traces, &traces_csv(&output.traces))?;
    written.push(traces);

    let flops = out_dir.join("flops.csv");
    write_file(&flops, &flops_csv(&output.rows))?;
    written.push(flops);

    Ok(written)
}

/// The hidden-layer sweep used by the conventional protocol.
pub fn standard_architectures(kind: ActivationKind) -> Vec<Vec<ActivationKind>> {
    [14, 16, 18, 20, 24]
        .into_iter()
        .map(|n| vec![kind; n])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{embed_mackey, mackey_glass_generate, MackeyGlassSpec};

    fn small_dataset() -> Dataset {
        let series = mackey_glass_generate(&MackeyGlassSpec::default()).unwrap();
        let ds = embed_mackey(&series).unwrap();
        // Shrink for speed: 60 rows, half train.
        Dataset::new("mackey-small", ds.rows[..60].to_vec(), 4, 30).unwrap()
    }

    fn conventional_spec() -> ExperimentSpec {
        ExperimentSpec {
            dataset: "mackey-small".into(),
            protocol: Protocol::Conventional {
                architectures: vec![vec![ActivationKind::Tanh; 3], vec![ActivationKind::Tanh; 5]],
                epochs: 3,
                replicates: 2,
                report_worst: true,
            },
            algorithms: vec![Algorithm::Bp, Algorithm::Lm],
            seed: 11,
            serial: true,
        }
    }

    #[test]
    fn conventional_produces_expected_grid() {
        let ds = small_dataset();
        let out = run_conventional(&conventional_spec(), &ds).unwrap();
        assert_eq!(out.rows.len(), 2 * 2);
        assert_eq!(out.raw_rows.len(), 2 * 2 * 2);
        for row in &out.rows {
            assert!(row.flops > 0);
            assert!(row.test_rmse.is_finite());
        }
    }

    #[test]
    fn report_worst_picks_max_over_replicates() {
        let ds = small_dataset();
        let out = run_conventional(&conventional_spec(), &ds).unwrap();
        for row in &out.rows {
            let worst = out
                .raw_rows
                .iter()
                .filter(|r| {
                    r.algorithm == row.algorithm && r.architecture == row.architecture && !r.aborted
                })
                .map(|r| r.test_rmse)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(row.test_rmse, worst);
        }
    }

    #[test]
    fn replicates_are_reproducible_from_logged_seed() {
        let ds = small_dataset();
        let out = run_conventional(&conventional_spec(), &ds).unwrap();
        let raw = &out.raw_rows[0];
        let again = run_one_cell(
            &ds,
            &net::parse_arch(&raw.architecture).unwrap(),
            raw.algorithm,
            3,
            raw.seed,
            raw.replicate.unwrap(),
        );
        assert_eq!(again.test_rmse.to_bits(), raw.test_rmse.to_bits());
        assert_eq!(again.flops, raw.flops);
    }

    #[test]
    fn mleann_restricted_bounds_cap_hidden_count() {
        let ds = small_dataset();
        let spec = ExperimentSpec {
            dataset: ds.name.clone(),
            protocol: Protocol::Mleann {
                config: EvolutionConfig {
                    population: 4,
                    generations: 1,
                    epochs_per_eval: 0,
                    hidden_bounds: EvolutionConfig::RESTRICTED_BOUNDS,
                    elitism: 0.2,
                    ..Default::default()
                },
            },
            algorithms: vec![Algorithm::Scg],
            seed: 5,
            serial: true,
        };
        let out = run_mleann_experiment(&spec, &ds).unwrap();
        for row in &out.rows {
            let hidden = net::parse_arch(&row.architecture).unwrap();
            assert!(hidden.len() <= 4, "architecture {}", row.architecture);
        }
        for (_, sr) in &out.traces {
            assert_eq!(sr.trace.len(), 2);
        }
    }

    #[test]
    fn emitted_files_are_deterministic() {
        let ds = small_dataset();
        let out = run_conventional(&conventional_spec(), &ds).unwrap();
        let dir1 = std::env::temp_dir().join(format!("mleann-bench-a-{}", std::process::id()));
        let dir2 = std::env::temp_dir().join(format!("mleann-bench-b-{}", std::process::id()));
        emit_results(&out, &dir1).unwrap();
        let out2 = run_conventional(&conventional_spec(), &ds).unwrap();
        emit_results(&out2, &dir2).unwrap();
        for name in ["results.csv", "raw_results.csv", "traces.csv", "flops.csv"] {
            let a = std::fs::read(dir1.join(name)).unwrap();
            let b = std::fs::read(dir2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
        std::fs::remove_dir_all(&dir1).ok();
        std::fs::remove_dir_all(&dir2).ok();
    }

    #[test]
    fn empty_rows_emit_header_only() {
        let out = BenchOutput::default();
        let dir = std::env::temp_dir().join(format!("mleann-bench-e-{}", std::process::id()));
        emit_results(&out, &dir).unwrap();
        let text = std::fs::read_to_string(dir.join("results.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
        std::fs::remove_dir_all(&dir).ok();
    }
}
