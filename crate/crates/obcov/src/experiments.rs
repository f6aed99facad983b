//! Monte Carlo harness for the simulation study: estimator comparisons over
//! a dimension sweep, the fixed-`lambda` U-curve, the global vs entry-wise
//! comparison on a badly scaled covariance, grid searches and rate studies.
//!
//! Every trial draws `X_0, ..., X_n` once from its own random stream and
//! feeds those same vectors to every estimator (common random numbers).
//! `X_0` only warms up the dither state; estimators see `X_1, ..., X_n`.
//! Dithers come from per-estimator sub-streams, so adding an estimator never
//! perturbs the raw samples, and each fixed-`lambda` run reuses one dither
//! stream so the grid is compared on identical uniform draws.
//!
//! Trials run in parallel on the ambient rayon pool and are reduced in trial
//! order, so results do not depend on the number of worker threads.

use std::collections::BTreeMap;

use obcov_core::estimators::{estimate_stream, estimation_error, sample_cov};
use obcov_core::linalg::{max_norm, op_norm, SymMatrix};
use obcov_core::quantize::{build_max_dither, build_oracle_dither};
use obcov_core::sampling::gaussian_vector;
use obcov_core::{
    DitherPolicy, DitherState, ErrorNorm, EstimatorKind, GaussianModel, RngStream, SampleStream,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sigma::{compound_symmetry, scaled_compound, SigmaSpec};
use crate::stats::{log_log_slope, Summary};
use crate::table::{ResultRow, ResultTable};

pub type Result<T> = obcov_core::Result<T>;

/// Sub-stream roles inside one trial.
pub mod role {
    pub const RAW: u64 = 0;
    pub const FIXED: u64 = 1;
    pub const GLOBAL: u64 = 2;
    pub const ENTRYWISE: u64 = 3;
    pub const ORACLE: u64 = 4;
    pub const MAX: u64 = 5;
}

/// Stream id for `(cell, trial, role)`; a cell is one point of a sweep.
pub fn stream_id(cell: u64, trial: u64, role: u64) -> u64 {
    debug_assert!(trial < 1 << 32 && role < 256);
    (cell << 40) | (trial << 8) | role
}

/// `lambda` grid on `(0, max]`. Unset bounds default to `max = 4 ||Sigma||_inf`
/// and `min = max / points`, i.e. equally spaced points excluding zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            points: 50,
            min: None,
            max: None,
        }
    }
}

impl LambdaGrid {
    pub fn values(&self, sigma: &SymMatrix) -> Vec<f64> {
        let max = self.max.unwrap_or(4.0 * max_norm(sigma.as_matrix()));
        let min = self.min.unwrap_or(max / self.points.max(1) as f64);
        linspace(min, max, self.points)
    }
}

/// Closed grid `min..=max` with `points` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for ParamGrid {
    /// `C1` grid: step 0.025 on `(0, 1]`.
    fn default() -> Self {
        ParamGrid {
            min: 0.025,
            max: 1.0,
            points: 40,
        }
    }
}

impl ParamGrid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.points)
    }
}

fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![max],
        _ => {
            let step = (max - min) / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        max
                    } else {
                        min + step * i as f64
                    }
                })
                .collect()
        }
    }
}

/// Everything needed to rerun one experiment bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sigma: SigmaSpec,
    pub p_values: Vec<usize>,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub lambda_grid: LambdaGrid,
    pub c1: f64,
    pub c1_entrywise: f64,
    pub c1_grid: ParamGrid,
    pub n_values: Vec<usize>,
    pub norm: ErrorNorm,
    pub log_offset: bool,
}

/// Global `C1` used throughout the simulation study.
pub const DEFAULT_C1: f64 = 0.20;
/// Entry-wise `C1`, picked by [`grid_search_c1`] on the `p = 5` compound
/// covariance (see README).
pub const DEFAULT_C1_ENTRYWISE: f64 = 0.75;

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            sigma: SigmaSpec::Compound,
            p_values: vec![5, 10, 15, 20, 25, 30],
            n: 200,
            trials: 100,
            seed: 2024,
            lambda_grid: LambdaGrid::default(),
            c1: DEFAULT_C1,
            c1_entrywise: DEFAULT_C1_ENTRYWISE,
            c1_grid: ParamGrid::default(),
            n_values: vec![250, 1000, 4000, 16000],
            norm: ErrorNorm::Op,
            log_offset: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.trials == 0 {
            return Err("trials must be >= 1".into());
        }
        if self.p_values.is_empty() || self.p_values.contains(&0) {
            return Err("p_values must be nonempty and positive".into());
        }
        if self.n == 0 {
            return Err("n must be >= 1".into());
        }
        if self.lambda_grid.points == 0 {
            return Err("lambda_grid.points must be >= 1".into());
        }
        if let (Some(lo), Some(hi)) = (self.lambda_grid.min, self.lambda_grid.max) {
            if !(hi >= lo && lo > 0.0) {
                return Err("lambda_grid needs max >= min > 0".into());
            }
        }
        if !(self.c1 > 0.0 && self.c1_entrywise > 0.0) {
            return Err("c1 and c1_entrywise must be positive".into());
        }
        if self.c1_grid.points == 0
            || !(self.c1_grid.min > 0.0 && self.c1_grid.max >= self.c1_grid.min)
        {
            return Err("c1_grid needs points >= 1 and max >= min > 0".into());
        }
        if self.n_values.contains(&0) {
            return Err("n_values must be positive".into());
        }
        Ok(())
    }
}

/// Inputs shared by all estimators of one trial.
pub struct Trial<'a> {
    pub sigma: &'a SymMatrix,
    /// `X_0, ..., X_n`.
    pub raw: Vec<Vec<f64>>,
    pub seed: u64,
    pub cell: u64,
    pub index: u64,
    pub log_offset: bool,
}

impl<'a> Trial<'a> {
    pub fn draw(
        model: &'a GaussianModel,
        n: usize,
        seed: u64,
        cell: u64,
        index: u64,
        log_offset: bool,
    ) -> Self {
        let mut rng = RngStream::new(seed, stream_id(cell, index, role::RAW));
        let raw = (0..=n).map(|_| gaussian_vector(model, &mut rng)).collect();
        Trial {
            sigma: model.sigma(),
            raw,
            seed,
            cell,
            index,
            log_offset,
        }
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.raw[1..]
    }

    /// FNV-1a digest of the raw sample bits.
    pub fn raw_digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in &self.raw {
            for v in x {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    fn rng(&self, role: u64) -> RngStream {
        RngStream::new(self.seed, stream_id(self.cell, self.index, role))
    }

    /// Quantizes `X_1..X_n` under the policy `kind` consumes.
    pub fn quantize(&self, kind: &EstimatorKind) -> Result<SampleStream> {
        let p = self.sigma.dim();
        let n = self.samples().len();
        let (state, role) = match *kind {
            EstimatorKind::SampleCov => {
                return Err(obcov_core::Error::InvalidParameter(
                    "sample covariance does not quantize",
                ))
            }
            EstimatorKind::Dith(lambda) => (
                DitherState::new(p, DitherPolicy::Fixed(lambda))?,
                role::FIXED,
            ),
            EstimatorKind::Adap(c1) => (
                DitherState::new(p, DitherPolicy::GlobalAdaptive(c1))?,
                role::GLOBAL,
            ),
            EstimatorKind::AdapEntrywise(c1) => (
                DitherState::new(p, DitherPolicy::EntrywiseAdaptive(c1))?,
                role::ENTRYWISE,
            ),
            EstimatorKind::OracleEntrywise(c1) => {
                (build_oracle_dither(self.sigma, n as u64, c1)?, role::ORACLE)
            }
            EstimatorKind::MaxEntrywise => (build_max_dither(self.samples())?, role::MAX),
        };
        let mut state = state.with_log_offset(self.log_offset);
        let mut rng = self.rng(role);
        let mut stream = SampleStream::new(p, state.policy(), state.header_param())?;
        state.update(&self.raw[0])?;
        for x in self.samples() {
            stream.push(state.acquire(x, &mut rng)?)?;
        }
        Ok(stream)
    }

    pub fn estimate(&self, kind: &EstimatorKind) -> Result<SymMatrix> {
        match kind {
            EstimatorKind::SampleCov => sample_cov(self.samples()),
            _ => estimate_stream(&self.quantize(kind)?),
        }
    }

    pub fn error(&self, kind: &EstimatorKind, norm: ErrorNorm) -> Result<f64> {
        estimation_error(&self.estimate(kind)?, self.sigma, norm)
    }
}

/// Per-trial record: the raw-sample digest and one error per estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub raw_digest: u64,
    pub errors: Vec<f64>,
}

/// Runs `trials` trials of every estimator in `kinds` on `sigma`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    sigma: &SymMatrix,
    n: usize,
    trials: usize,
    seed: u64,
    cell: u64,
    kinds: &[EstimatorKind],
    norm: ErrorNorm,
    log_offset: bool,
) -> Result<Vec<TrialOutcome>> {
    let model = GaussianModel::new(sigma.clone())?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial = Trial::draw(&model, n, seed, cell, t, log_offset);
            let errors = kinds
                .iter()
                .map(|k| trial.error(k, norm))
                .collect::<Result<Vec<f64>>>()?;
            Ok(TrialOutcome {
                raw_digest: trial.raw_digest(),
                errors,
            })
        })
        .collect()
}

/// Mean and standard error per estimator.
pub fn summarize(outcomes: &[TrialOutcome], estimators: usize) -> Vec<Summary> {
    (0..estimators)
        .map(|e| {
            let column: Vec<f64> = outcomes.iter().map(|o| o.errors[e]).collect();
            Summary::of(&column)
        })
        .collect()
}

fn summaries(
    sigma: &SymMatrix,
    spec: &ExperimentSpec,
    n: usize,
    cell: u64,
    kinds: &[EstimatorKind],
) -> Result<Vec<Summary>> {
    let outcomes = monte_carlo(
        sigma,
        n,
        spec.trials,
        spec.seed,
        cell,
        kinds,
        spec.norm,
        spec.log_offset,
    )?;
    Ok(summarize(&outcomes, kinds.len()))
}

fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn row(sweep: f64, estimator: impl Into<String>, s: Summary) -> ResultRow {
    ResultRow {
        sweep,
        estimator: estimator.into(),
        mean_error: s.mean,
        std_error: s.std_error,
        trials: s.count,
    }
}

/// Sample covariance vs grid-optimal fixed `lambda` vs global adaptive, per `p`.
///
/// The fixed-`lambda` row reports the grid point with the smallest mean error;
/// the chosen `lambda` is stored in the notes as `best_lambda_p{p}`.
pub fn run_figure1(
    spec: &ExperimentSpec,
    sigma_for: impl Fn(usize) -> SymMatrix,
) -> Result<ResultTable> {
    let mut table = ResultTable::default();
    for (cell, &p) in spec.p_values.iter().enumerate() {
        let sigma = sigma_for(p);
        let grid = spec.lambda_grid.values(&sigma);
        let mut kinds = vec![EstimatorKind::SampleCov, EstimatorKind::Adap(spec.c1)];
        kinds.extend(grid.iter().map(|&l| EstimatorKind::Dith(l)));
        let s = summaries(&sigma, spec, spec.n, cell as u64, &kinds)?;
        let best = argmin(s[2..].iter().map(|s| s.mean));
        let pf = p as f64;
        table.rows.push(row(pf, "sample-cov", s[0]));
        table.rows.push(row(pf, "dith", s[2 + best]));
        table.rows.push(row(pf, "adap", s[1]));
        table.notes.insert(format!("best_lambda_p{p}"), grid[best]);
    }
    table.sort();
    Ok(table)
}

/// Fixed-`lambda` error across the grid at one `p`, relative to `||Sigma||`,
/// with the adaptive and sample-covariance errors repeated at every grid
/// point as reference lines.
pub fn run_figure2(spec: &ExperimentSpec, sigma: &SymMatrix) -> Result<ResultTable> {
    let grid = spec.lambda_grid.values(sigma);
    let mut kinds = vec![EstimatorKind::SampleCov, EstimatorKind::Adap(spec.c1)];
    kinds.extend(grid.iter().map(|&l| EstimatorKind::Dith(l)));
    let norm = op_norm(sigma.as_matrix())?;
    let s: Vec<Summary> = summaries(sigma, spec, spec.n, 0, &kinds)?
        .into_iter()
        .map(|s| Summary {
            mean: s.mean / norm,
            std_error: s.std_error / norm,
            count: s.count,
        })
        .collect();
    let mut table = ResultTable::default();
    for (i, &lambda) in grid.iter().enumerate() {
        table.rows.push(row(lambda, "dith", s[2 + i]));
        table.rows.push(row(lambda, "adap", s[1]));
        table.rows.push(row(lambda, "sample-cov", s[0]));
    }
    let best = argmin(s[2..].iter().map(|s| s.mean));
    table.notes.insert("best_lambda".into(), grid[best]);
    table.notes.insert("sigma_op_norm".into(), norm);
    table.sort();
    Ok(table)
}

/// Global vs entry-wise adaptive (and sample covariance) on the compound
/// covariance `Sigma_1` and its rescaled version `Sigma_2 = D Sigma_1 D`.
/// Estimator labels are prefixed with `sigma1/` or `sigma2/`.
pub fn run_figure3(spec: &ExperimentSpec) -> Result<ResultTable> {
    let kinds = [
        EstimatorKind::Adap(spec.c1),
        EstimatorKind::AdapEntrywise(spec.c1_entrywise),
        EstimatorKind::SampleCov,
    ];
    type Build = fn(usize) -> SymMatrix;
    let variants: [(&str, Build); 2] = [("sigma1", compound_symmetry), ("sigma2", scaled_compound)];
    let mut table = ResultTable::default();
    for (v, (label, build)) in variants.iter().enumerate() {
        for (pi, &p) in spec.p_values.iter().enumerate() {
            let sigma = build(p);
            let cell = (v * 1000 + pi) as u64;
            let s = summaries(&sigma, spec, spec.n, cell, &kinds)?;
            for (kind, summary) in kinds.iter().zip(s) {
                table
                    .rows
                    .push(row(p as f64, format!("{label}/{}", kind.label()), summary));
            }
        }
    }
    table.sort();
    Ok(table)
}

/// Result of a one-dimensional grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best: f64,
    pub grid: Vec<f64>,
    pub curve: Vec<Summary>,
}

impl GridSearch {
    pub fn to_table(&self, estimator: &str) -> ResultTable {
        let mut table = ResultTable::default();
        for (&g, &s) in self.grid.iter().zip(&self.curve) {
            table.rows.push(row(g, estimator, s));
        }
        table.notes.insert("best".into(), self.best);
        table.sort();
        table
    }
}

fn grid_search(
    sigma: &SymMatrix,
    n: usize,
    grid: &[f64],
    trials: usize,
    seed: u64,
    make: impl Fn(f64) -> EstimatorKind,
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(obcov_core::Error::EmptyInput);
    }
    let kinds: Vec<EstimatorKind> = grid.iter().map(|&g| make(g)).collect();
    let outcomes = monte_carlo(sigma, n, trials, seed, 0, &kinds, ErrorNorm::Op, false)?;
    let curve = summarize(&outcomes, kinds.len());
    let best = grid[argmin(curve.iter().map(|s| s.mean))];
    Ok(GridSearch {
        best,
        grid: grid.to_vec(),
        curve,
    })
}

/// Fixed-`lambda` operator error over `grid`, common random numbers across
/// grid points; `best` is the grid minimizer of the mean error.
pub fn grid_search_lambda(
    sigma: &SymMatrix,
    n: usize,
    grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<GridSearch> {
    grid_search(sigma, n, grid, trials, seed, EstimatorKind::Dith)
}

/// Adaptive `C1` minimizing the mean operator error, either for the global
/// policy or (with `entrywise`) for the entry-wise one.
pub fn grid_search_c1(
    sigma: &SymMatrix,
    n: usize,
    grid: &[f64],
    trials: usize,
    seed: u64,
    entrywise: bool,
) -> Result<GridSearch> {
    if entrywise {
        grid_search(sigma, n, grid, trials, seed, EstimatorKind::AdapEntrywise)
    } else {
        grid_search(sigma, n, grid, trials, seed, EstimatorKind::Adap)
    }
}

/// Error against `n` for the adaptive estimator and the sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub table: ResultTable,
    pub slope_adap: f64,
    pub slope_sample_cov: f64,
}

pub fn run_rate_study(spec: &ExperimentSpec, sigma: &SymMatrix) -> Result<RateStudy> {
    let kinds = [EstimatorKind::Adap(spec.c1), EstimatorKind::SampleCov];
    let mut table = ResultTable::default();
    let mut adap = Vec::new();
    let mut cov = Vec::new();
    for (cell, &n) in spec.n_values.iter().enumerate() {
        let s = summaries(sigma, spec, n, cell as u64, &kinds)?;
        table.rows.push(row(n as f64, "adap", s[0]));
        table.rows.push(row(n as f64, "sample-cov", s[1]));
        adap.push(s[0].mean);
        cov.push(s[1].mean);
    }
    let ns: Vec<f64> = spec.n_values.iter().map(|&n| n as f64).collect();
    let slope_adap = log_log_slope(&ns, &adap);
    let slope_sample_cov = log_log_slope(&ns, &cov);
    table.notes.insert("slope_adap".into(), slope_adap);
    table
        .notes
        .insert("slope_sample_cov".into(), slope_sample_cov);
    table.sort();
    Ok(RateStudy {
        table,
        slope_adap,
        slope_sample_cov,
    })
}

/// Notes type shared by all tables.
pub type Notes = BTreeMap<String, f64>;
