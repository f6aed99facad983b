//! Subcommands of the `obcov` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use obcov_core::estimators::{
    apply_mask, estimate_adap, estimate_adap_entrywise, estimate_dith, estimate_stream,
    estimation_error,
};
use obcov_core::quantize::{bit_cost, decode_stream, encode_stream};
use obcov_core::{ErrorNorm, GaussianModel, SymMatrix};
use serde_json::{json, Value};

use crate::config::{check_out_dir, Config, EstimatorChoice, GridTarget};
use crate::error::CliError;
use crate::experiments::{
    grid_search_c1, grid_search_lambda, run_figure1, run_figure2, run_figure3, run_rate_study,
    Trial,
};
use crate::matrix_io::{append_error_footer, matrix_to_csv, read_matrix_csv};
use crate::sigma::build_sigma;
use crate::table::ResultTable;

/// Trial count used by `--quick`.
pub const QUICK_TRIALS: usize = 20;

#[derive(Debug, Parser)]
#[command(
    name = "obcov",
    version,
    about = "One-bit dithered covariance estimation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config, or a JSON sidecar from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Main output file; the JSON sidecar is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Short run with 20 trials.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Samples per run, not counting the warm-up sample.
    #[arg(short, long, global = true)]
    pub n: Option<usize>,
    /// Dimension.
    #[arg(short, long, global = true)]
    pub p: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw Gaussian samples, quantize them and write a `.obcv` stream.
    Acquire,
    /// Estimate a covariance matrix from a `.obcv` stream.
    Estimate {
        /// Stream file (overrides `input` in the config).
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// Symmetric mask CSV with entries in [0, 1].
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Ground-truth CSV; adds an error footer to the output.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Rerun one of the three simulation figures.
    Reproduce {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        figure: u8,
        /// Comma-separated dimension sweep.
        #[arg(long, value_delimiter = ',')]
        p_values: Option<Vec<usize>>,
    },
    /// Adaptive and sample-covariance error against n.
    RateStudy,
    /// Grid search over lambda or C1.
    GridSearch {
        #[arg(long, value_enum)]
        target: Option<TargetArg>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum KindArg {
    Auto,
    Dith,
    Adap,
    AdapEntrywise,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TargetArg {
    Lambda,
    C1,
    C1Entrywise,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Acquire => "acquire",
            Command::Estimate { .. } => "estimate",
            Command::Reproduce { .. } => "reproduce",
            Command::RateStudy => "rate-study",
            Command::GridSearch { .. } => "grid-search",
        }
    }

    fn default_out(&self) -> PathBuf {
        match self {
            Command::Acquire => "samples.obcv".into(),
            Command::Estimate { .. } => "estimate.csv".into(),
            Command::Reproduce { figure, .. } => format!("figure{figure}.csv").into(),
            Command::RateStudy => "rate_study.csv".into(),
            Command::GridSearch { .. } => "grid_search.csv".into(),
        }
    }
}

/// Defaults, then the config file, then command-line flags.
pub fn resolve(cli: &Cli) -> Result<Config, CliError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.quick {
        cfg.trials = QUICK_TRIALS;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(p) = c.p {
        cfg.p = p;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    match &cli.command {
        Command::Estimate {
            input,
            kind,
            mask,
            truth,
        } => {
            if input.is_some() {
                cfg.input = input.clone();
            }
            if let Some(k) = kind {
                cfg.estimator = match k {
                    KindArg::Auto => EstimatorChoice::Auto,
                    KindArg::Dith => EstimatorChoice::Dith,
                    KindArg::Adap => EstimatorChoice::Adap,
                    KindArg::AdapEntrywise => EstimatorChoice::AdapEntrywise,
                };
            }
            if mask.is_some() {
                cfg.mask = mask.clone();
            }
            if truth.is_some() {
                cfg.truth = truth.clone();
            }
            if cfg.input.is_none() {
                return Err(CliError::Config("estimate needs an input stream".into()));
            }
        }
        Command::Reproduce {
            p_values: Some(ps), ..
        } => cfg.p_values = ps.clone(),
        Command::GridSearch { target: Some(t) } => {
            cfg.grid_target = match t {
                TargetArg::Lambda => GridTarget::Lambda,
                TargetArg::C1 => GridTarget::C1,
                TargetArg::C1Entrywise => GridTarget::C1Entrywise,
            }
        }
        _ => {}
    }
    if let Some(out) = &c.out {
        cfg.out = Some(out.clone());
    }
    if cfg.out.is_none() {
        cfg.out = Some(cli.command.default_out());
    }
    let experiment = !matches!(cli.command, Command::Acquire | Command::Estimate { .. });
    cfg.validate(experiment)?;
    cfg.check_paths()?;
    let out = cfg.out.as_deref().expect("resolved above");
    if sidecar_path(out) == out {
        return Err(CliError::Config(
            "output must not be a .json file; that name is taken by the sidecar".into(),
        ));
    }
    Ok(cfg)
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// Runs the parsed command, returning the lines to print on success.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = resolve(cli)?;
    match cfg.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(|| dispatch(&cli.command, &cfg)),
        None => dispatch(&cli.command, &cfg),
    }
}

fn dispatch(command: &Command, cfg: &Config) -> Result<Vec<String>, CliError> {
    let out = cfg.out.clone().expect("resolved config has an output path");
    let mut doc = json!({ "command": command.name(), "config": cfg });
    let lines = match command {
        Command::Acquire => cmd_acquire(cfg, &out, &mut doc)?,
        Command::Estimate { .. } => cmd_estimate(cfg, &out, &mut doc)?,
        Command::Reproduce { figure, .. } => cmd_reproduce(*figure, cfg, &out, &mut doc)?,
        Command::RateStudy => cmd_rate_study(cfg, &out, &mut doc)?,
        Command::GridSearch { .. } => cmd_grid_search(cfg, &out, &mut doc)?,
    };
    let sidecar = sidecar_path(&out);
    let text = serde_json::to_string_pretty(&doc).expect("sidecar serializes") + "\n";
    write(&sidecar, text.as_bytes())?;
    Ok(lines)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    check_out_dir(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn cmd_acquire(cfg: &Config, out: &Path, doc: &mut Value) -> Result<Vec<String>, CliError> {
    let sigma = build_sigma(&cfg.sigma, cfg.p)?;
    let model = GaussianModel::new(sigma)?;
    let trial = Trial::draw(&model, cfg.n, cfg.seed, 0, 0, cfg.log_offset);
    let stream = trial.quantize(&cfg.policy_estimator())?;
    write(out, &encode_stream(&stream))?;
    let (quantized, full) = bit_cost(cfg.policy, cfg.p as u64, cfg.n as u64);
    doc["bit_cost"] = json!({ "quantized": quantized, "full_precision": full });
    Ok(vec![
        format!(
            "wrote {} samples (p = {}, policy {}) to {}",
            stream.len(),
            cfg.p,
            cfg.policy.name(),
            out.display()
        ),
        format!("bits: {quantized} quantized vs {full} full precision"),
    ])
}

fn cmd_estimate(cfg: &Config, out: &Path, doc: &mut Value) -> Result<Vec<String>, CliError> {
    let input = cfg.input.as_deref().expect("checked during resolution");
    let bytes = fs::read(input).map_err(|e| CliError::io(input, e))?;
    let mask = cfg.mask.as_deref().map(read_matrix_csv).transpose()?;
    let truth = cfg
        .truth
        .as_deref()
        .map(|p| read_matrix_csv(p).and_then(|m| Ok(SymMatrix::new(m)?)))
        .transpose()?;
    let stream = decode_stream(&bytes)?;
    let mut est = match cfg.estimator {
        EstimatorChoice::Auto => estimate_stream(&stream)?,
        EstimatorChoice::Dith => estimate_dith(&stream)?,
        EstimatorChoice::Adap => estimate_adap(&stream)?,
        EstimatorChoice::AdapEntrywise => estimate_adap_entrywise(&stream)?,
    };
    if let Some(mask) = &mask {
        est = apply_mask(&est, mask)?;
    }
    let mut csv = matrix_to_csv(est.as_matrix());
    let mut lines = vec![format!(
        "estimated {0}x{0} matrix from {1} samples",
        stream.dim(),
        stream.len()
    )];
    if let Some(truth) = &truth {
        let op = estimation_error(&est, truth, ErrorNorm::Op)?;
        let fro = estimation_error(&est, truth, ErrorNorm::Fro)?;
        let max = estimation_error(&est, truth, ErrorNorm::Max)?;
        append_error_footer(&mut csv, op, fro, max);
        doc["errors"] = json!({ "op": op, "fro": fro, "max": max });
        lines.push(format!("error: op {op:.6}, fro {fro:.6}, max {max:.6}"));
    }
    write(out, csv.as_bytes())?;
    Ok(lines)
}

fn write_table(table: &ResultTable, out: &Path, doc: &mut Value) -> Result<Vec<String>, CliError> {
    write(out, table.to_csv().as_bytes())?;
    doc["rows"] = serde_json::to_value(&table.rows).expect("rows serialize");
    doc["notes"] = serde_json::to_value(&table.notes).expect("notes serialize");
    let mut lines = vec![format!(
        "wrote {} rows to {}",
        table.rows.len(),
        out.display()
    )];
    lines.extend(table.notes.iter().map(|(k, v)| format!("{k} = {v}")));
    Ok(lines)
}

fn cmd_reproduce(
    figure: u8,
    cfg: &Config,
    out: &Path,
    doc: &mut Value,
) -> Result<Vec<String>, CliError> {
    doc["figure"] = json!(figure);
    let table = match figure {
        1 => {
            let spec = cfg.spec(false);
            let sigmas = spec
                .p_values
                .iter()
                .map(|&p| build_sigma(&spec.sigma, p))
                .collect::<Result<Vec<_>, _>>()?;
            doc["experiment"] = json!(spec);
            let lookup = |p: usize| {
                let i = spec
                    .p_values
                    .iter()
                    .position(|&q| q == p)
                    .expect("p from spec");
                sigmas[i].clone()
            };
            run_figure1(&spec, lookup)?
        }
        2 => {
            let spec = cfg.spec(true);
            let sigma = build_sigma(&spec.sigma, cfg.p)?;
            doc["experiment"] = json!(spec);
            run_figure2(&spec, &sigma)?
        }
        _ => {
            let spec = cfg.spec(false);
            doc["experiment"] = json!(spec);
            run_figure3(&spec)?
        }
    };
    write_table(&table, out, doc)
}

fn cmd_rate_study(cfg: &Config, out: &Path, doc: &mut Value) -> Result<Vec<String>, CliError> {
    let spec = cfg.spec(true);
    let sigma = build_sigma(&spec.sigma, cfg.p)?;
    doc["experiment"] = json!(spec);
    let study = run_rate_study(&spec, &sigma)?;
    write_table(&study.table, out, doc)
}

fn cmd_grid_search(cfg: &Config, out: &Path, doc: &mut Value) -> Result<Vec<String>, CliError> {
    let spec = cfg.spec(true);
    let sigma = build_sigma(&spec.sigma, cfg.p)?;
    doc["experiment"] = json!(spec);
    let (search, label) = match cfg.grid_target {
        GridTarget::Lambda => {
            let grid = spec.lambda_grid.values(&sigma);
            (
                grid_search_lambda(&sigma, spec.n, &grid, spec.trials, spec.seed)?,
                "dith",
            )
        }
        GridTarget::C1 => {
            let grid = spec.c1_grid.values();
            (
                grid_search_c1(&sigma, spec.n, &grid, spec.trials, spec.seed, false)?,
                "adap",
            )
        }
        GridTarget::C1Entrywise => {
            let grid = spec.c1_grid.values();
            (
                grid_search_c1(&sigma, spec.n, &grid, spec.trials, spec.seed, true)?,
                "adap-entrywise",
            )
        }
    };
    write_table(&search.to_table(label), out, doc)
}
