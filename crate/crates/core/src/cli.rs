//! Command-line front end: block-structured run configurations, trace CSVs,
//! and diagnostic reports.
//!
//! The grammar mirrors familiar sampler CLIs:
//!
//! ```text
//! <model> [dim=N] sample [num_samples=N] [num_warmup=N] [chains=N] [threads=N]
//!         [adapt delta=X] [adapt metric=unit|diagonal] [adapt metric_diag=v1,v2,...]
//!         [data file=PATH] [random seed=N] [output dir=PATH] [strict]
//! ```
//!
//! Bare words open blocks (`sample`, `adapt`, `data`, `random`, `output`);
//! `key=value` tokens belong to the open block. Unknown keys are rejected.

use crate::diagnose::build_report;
use crate::error::Error;
use crate::model::{make_model, EightSchoolsData, ModelSpec, TargetModel};
use crate::phase::EuclideanMetric;
use crate::sample::{run_chains, ChainTrace, MetricMode, SamplerConfig};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Exit codes used by the binary.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const ADAPTATION_ABORT: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const UNRELIABLE: i32 = 4;
}

/// Error carrying the exit code the binary should return.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: i32,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: exit_code::USAGE,
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: exit_code::IO,
        }
    }
}

pub const USAGE: &str = "usage: microhmc <model> [dim=N] sample [num_samples=N] [num_warmup=N] \
[chains=N] [threads=N] [adapt delta=X] [adapt metric=unit|diagonal] \
[adapt metric_diag=v1,v2,...] [data file=PATH] [random seed=N] [output dir=PATH] [strict]
models: gaussian_iid, cauchy_iid, eight_schools_centered, eight_schools_noncentered";

/// A fully parsed run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_name: String,
    pub dim: usize,
    pub data_file: Option<PathBuf>,
    pub sampler: SamplerConfig,
    /// Fixed diagonal metric, bypassing adaptation.
    pub metric_diag: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub write_report: bool,
    pub strict: bool,
    pub threads: Option<usize>,
}

const MODELS: [&str; 4] = [
    "gaussian_iid",
    "cauchy_iid",
    "eight_schools_centered",
    "eight_schools_noncentered",
];

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Model,
    Sample,
    Adapt,
    Data,
    Random,
    Output,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse::<T>()
        .map_err(|_| CliError::usage(format!("malformed value in `{key}={value}`")))
}

/// Parses argv (without the program name) into a [`RunConfig`].
pub fn parse_args<I>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator,
    I::Item: Into<String>,
{
    let tokens: Vec<String> = argv.into_iter().map(Into::into).collect();
    if tokens.is_empty() {
        return Err(CliError::usage("missing model name"));
    }
    let model_name = tokens[0].clone();
    if !MODELS.contains(&model_name.as_str()) {
        return Err(CliError::usage(format!("unknown model `{model_name}`")));
    }

    let mut cfg = RunConfig {
        model_name,
        dim: 100,
        data_file: None,
        sampler: SamplerConfig {
            num_samples: 10_000,
            num_warmup: 1000,
            chains: 4,
            target_accept: 0.8,
            seed: 12345,
            ..SamplerConfig::default()
        },
        metric_diag: None,
        output_dir: PathBuf::from("."),
        write_report: true,
        strict: false,
        threads: None,
    };

    let mut block = Block::Model;
    let mut saw_sample = false;
    for token in &tokens[1..] {
        match token.as_str() {
            "sample" => {
                block = Block::Sample;
                saw_sample = true;
                continue;
            }
            "adapt" => {
                block = Block::Adapt;
                continue;
            }
            "data" => {
                block = Block::Data;
                continue;
            }
            "random" => {
                block = Block::Random;
                continue;
            }
            "output" => {
                block = Block::Output;
                continue;
            }
            "strict" => {
                cfg.strict = true;
                continue;
            }
            _ => {}
        }

        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("malformed token `{token}`")))?;

        match (block, key) {
            (Block::Model, "dim") | (Block::Sample, "dim") => {
                cfg.dim = parse_value(key, value)?;
                if cfg.dim == 0 {
                    return Err(CliError::usage("dim must be at least 1"));
                }
            }
            (Block::Sample, "num_samples") => {
                cfg.sampler.num_samples = parse_value(key, value)?;
                if cfg.sampler.num_samples == 0 {
                    return Err(CliError::usage("num_samples must be at least 1"));
                }
            }
            (Block::Sample, "num_warmup") => {
                cfg.sampler.num_warmup = parse_value(key, value)?;
            }
            (Block::Sample, "chains") => {
                cfg.sampler.chains = parse_value(key, value)?;
                if cfg.sampler.chains == 0 {
                    return Err(CliError::usage("chains must be at least 1"));
                }
            }
            (Block::Sample, "threads") => {
                let t: usize = parse_value(key, value)?;
                if t == 0 {
                    return Err(CliError::usage("threads must be at least 1"));
                }
                cfg.threads = Some(t);
            }
            (Block::Adapt, "delta") => {
                let d: f64 = parse_value(key, value)?;
                if !(d > 0.0 && d < 1.0) {
                    return Err(CliError::usage(format!(
                        "adapt delta={d} out of range: must lie in (0, 1)"
                    )));
                }
                cfg.sampler.target_accept = d;
            }
            (Block::Adapt, "metric") => match value {
                "unit" => cfg.sampler.metric_mode = MetricMode::Unit,
                "diagonal" => cfg.sampler.metric_mode = MetricMode::DiagonalAdapt,
                _ => {
                    return Err(CliError::usage(format!(
                        "adapt metric={value}: expected `unit` or `diagonal`"
                    )))
                }
            },
            (Block::Adapt, "metric_diag") => {
                let diag: Vec<f64> = value
                    .split(',')
                    .map(|v| parse_value::<f64>(key, v.trim()))
                    .collect::<Result<_, _>>()?;
                if EuclideanMetric::diagonal(diag.clone()).is_err() {
                    return Err(CliError::usage(
                        "adapt metric_diag entries must be positive and finite",
                    ));
                }
                cfg.metric_diag = Some(diag);
            }
            (Block::Data, "file") => cfg.data_file = Some(PathBuf::from(value)),
            (Block::Random, "seed") => cfg.sampler.seed = parse_value(key, value)?,
            (Block::Output, "dir") => cfg.output_dir = PathBuf::from(value),
            (Block::Output, "report") => {
                cfg.write_report = match value {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    _ => {
                        return Err(CliError::usage(format!(
                            "output report={value}: expected 0 or 1"
                        )))
                    }
                };
            }
            _ => {
                return Err(CliError::usage(format!("unknown key `{key}` in `{token}`")));
            }
        }
    }

    if !saw_sample {
        return Err(CliError::usage("missing `sample` block"));
    }
    if cfg.model_name.starts_with("eight_schools") && cfg.data_file.is_none() {
        return Err(CliError::usage(format!(
            "model `{}` requires `data file=PATH`",
            cfg.model_name
        )));
    }
    Ok(cfg)
}

fn build_target(cfg: &RunConfig) -> Result<TargetModel, CliError> {
    let spec = match cfg.model_name.as_str() {
        "gaussian_iid" => ModelSpec::GaussianIid { dim: cfg.dim },
        "cauchy_iid" => ModelSpec::CauchyIid { dim: cfg.dim },
        name => {
            let path = cfg.data_file.as_ref().expect("checked in parse_args");
            if !path.exists() {
                return Err(CliError::usage(format!(
                    "data file not found: {}",
                    path.display()
                )));
            }
            let data = EightSchoolsData::from_file(path)
                .map_err(|e| CliError::usage(e.to_string()))?;
            if name == "eight_schools_centered" {
                ModelSpec::EightSchoolsCentered { data }
            } else {
                ModelSpec::EightSchoolsNonCentered { data }
            }
        }
    };
    make_model(spec).map_err(|e| CliError::usage(e.to_string()))
}

/// Formats a float with 17 significant digits so the CSV round-trips exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes one chain's trace as CSV: a header row, then one row per draw.
pub fn emit_trace_csv(trace: &ChainTrace, path: &Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let mut header = String::from(
        "iteration,energy__,delta_energy__,resample_delta_k__,divergent__,treedepth__,stepsize__,accept_stat__,n_leapfrog__",
    );
    for name in &trace.parameter_names {
        header.push(',');
        header.push_str(name);
    }
    writeln!(w, "{header}")?;
    for (i, (draw, info)) in trace.draws.iter().zip(trace.infos.iter()).enumerate() {
        let mut row = String::new();
        write!(
            row,
            "{},{},{},{},{},{},{},{},{}",
            i + 1,
            fmt_f64(info.energy),
            fmt_f64(info.delta_energy),
            fmt_f64(info.resample_delta_k),
            info.divergent as u8,
            info.tree_depth,
            fmt_f64(info.step_size),
            fmt_f64(info.accept_stat),
            info.n_leapfrog
        )
        .expect("writing to String cannot fail");
        for v in draw {
            row.push(',');
            row.push_str(&fmt_f64(*v));
        }
        writeln!(w, "{row}")?;
    }
    w.flush()
}

fn run_sampler(model: &TargetModel, cfg: &RunConfig) -> Result<Vec<ChainTrace>, CliError> {
    let threads = std::env::var("MICROHMC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .or(cfg.threads)
        .unwrap_or(cfg.sampler.chains);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::io(format!("cannot build worker pool: {e}")))?;

    let mut sampler_cfg = cfg.sampler.clone();
    if cfg.metric_diag.is_some() {
        // A fixed metric disables metric adaptation; step size still adapts.
        sampler_cfg.metric_mode = MetricMode::Unit;
    }
    let result = match &cfg.metric_diag {
        None => pool.install(|| run_chains(model, &sampler_cfg)),
        Some(diag) => {
            if diag.len() != model.dim() {
                return Err(CliError::usage(format!(
                    "metric_diag has {} entries but model dimension is {}",
                    diag.len(),
                    model.dim()
                )));
            }
            pool.install(|| crate::sample::run_chains_with_metric(model, &sampler_cfg, diag))
        }
    };
    result.map_err(|e| match e {
        Error::StepSizeCollapsed { .. } => CliError {
            message: e.to_string(),
            code: exit_code::ADAPTATION_ABORT,
        },
        other => CliError::usage(other.to_string()),
    })
}

/// Executes a parsed run: samples, writes one CSV per chain plus the report
/// and histogram tables, and returns the process exit code.
pub fn run_command(cfg: &RunConfig) -> Result<(), CliError> {
    let model = build_target(cfg)?;
    let traces = run_sampler(&model, cfg)?;

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    for trace in &traces {
        let path = cfg
            .output_dir
            .join(format!("{}_chain{}.csv", model.name(), trace.chain_id));
        emit_trace_csv(trace, &path)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    }

    if cfg.write_report {
        let report = build_report(&traces, &model, &cfg.sampler)
            .map_err(|e| CliError::io(e.to_string()))?;
        let write = |name: &str, contents: &str| -> Result<(), CliError> {
            let path = cfg.output_dir.join(name);
            std::fs::write(&path, contents)
                .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
        };
        write("report.txt", &report.render())?;
        write("energy_hist.tsv", &report.energy_hist_tsv())?;
        write("delta_energy_hist.tsv", &report.delta_energy_hist_tsv())?;
        if cfg.strict && report.unreliable {
            return Err(CliError {
                message: format!(
                    "report flagged UNRELIABLE: divergence rate {:.6} exceeds 0.001",
                    report.divergence_rate
                ),
                code: exit_code::UNRELIABLE,
            });
        }
    }
    Ok(())
}

/// Entry point used by the binary: parse, run, map errors to exit codes.
pub fn main_with_args<I>(argv: I) -> i32
where
    I: IntoIterator,
    I::Item: Into<String>,
{
    let cfg = match parse_args(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}", e.message);
            eprintln!("{USAGE}");
            return e.code;
        }
    };
    match run_command(&cfg) {
        Ok(()) => exit_code::OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
