//! Run configuration: a TOML document (or the `config` object of a JSON
//! sidecar) with every field optional and unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use obcov_core::{ErrorNorm, EstimatorKind, PolicyTag};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::experiments::{ExperimentSpec, LambdaGrid, ParamGrid};
use crate::sigma::SigmaSpec;

/// Which estimator `estimate` applies to a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    /// Whatever the stream's policy calls for.
    #[default]
    Auto,
    Dith,
    Adap,
    AdapEntrywise,
}

/// Parameter swept by `grid-search`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridTarget {
    #[default]
    Lambda,
    C1,
    C1Entrywise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub sigma: SigmaSpec,
    /// Dimension for `acquire`, `rate-study`, `grid-search` and figure 2.
    pub p: usize,
    /// Dimension sweep for figures 1 and 3.
    pub p_values: Vec<usize>,
    pub n: usize,
    pub trials: usize,
    pub policy: PolicyTag,
    /// Dither level of the fixed policy.
    pub lambda: f64,
    pub c1: f64,
    pub c1_entrywise: f64,
    /// Use `log(k + 1)` instead of `log(k)` in the adaptive scales.
    pub log_offset: bool,
    pub lambda_grid: LambdaGrid,
    pub c1_grid: ParamGrid,
    pub n_values: Vec<usize>,
    pub norm: ErrorNorm,
    pub grid_target: GridTarget,
    pub estimator: EstimatorChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads; left out of the sidecar since results do not depend on it.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        let spec = ExperimentSpec::default();
        Config {
            seed: spec.seed,
            sigma: spec.sigma,
            p: 5,
            p_values: spec.p_values,
            n: spec.n,
            trials: spec.trials,
            policy: PolicyTag::GlobalAdaptive,
            lambda: 1.0,
            c1: spec.c1,
            c1_entrywise: spec.c1_entrywise,
            log_offset: spec.log_offset,
            lambda_grid: spec.lambda_grid,
            c1_grid: spec.c1_grid,
            n_values: spec.n_values,
            norm: spec.norm,
            grid_target: GridTarget::default(),
            estimator: EstimatorChoice::default(),
            input: None,
            mask: None,
            truth: None,
            out: None,
            threads: None,
        }
    }
}

#[derive(Deserialize)]
struct Sidecar {
    config: Config,
}

impl Config {
    /// Parses TOML, or a JSON sidecar written by an earlier run.
    pub fn parse(text: &str, is_json: bool) -> Result<Config, CliError> {
        if is_json {
            let value: serde_json::Value =
                serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
            let result = if value.get("config").is_some() {
                serde_json::from_value::<Sidecar>(value).map(|s| s.config)
            } else {
                serde_json::from_value::<Config>(value)
            };
            result.map_err(|e| CliError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        Config::parse(&text, is_json)
    }

    /// Experiment parameters with `p` as the single sweep point when
    /// `single_p` is set.
    pub fn spec(&self, single_p: bool) -> ExperimentSpec {
        ExperimentSpec {
            sigma: self.sigma.clone(),
            p_values: if single_p {
                vec![self.p]
            } else {
                self.p_values.clone()
            },
            n: self.n,
            trials: self.trials,
            seed: self.seed,
            lambda_grid: self.lambda_grid.clone(),
            c1: self.c1,
            c1_entrywise: self.c1_entrywise,
            c1_grid: self.c1_grid.clone(),
            n_values: self.n_values.clone(),
            norm: self.norm,
            log_offset: self.log_offset,
        }
    }

    /// Estimator that quantizes under `self.policy`.
    pub fn policy_estimator(&self) -> EstimatorKind {
        match self.policy {
            PolicyTag::Fixed => EstimatorKind::Dith(self.lambda),
            PolicyTag::GlobalAdaptive => EstimatorKind::Adap(self.c1),
            PolicyTag::EntrywiseAdaptive => EstimatorKind::AdapEntrywise(self.c1_entrywise),
            PolicyTag::OracleEntrywise => EstimatorKind::OracleEntrywise(self.c1_entrywise),
            PolicyTag::MaxEntrywise => EstimatorKind::MaxEntrywise,
        }
    }

    /// Checks parameter ranges. Simulation commands also need the
    /// experiment fields to be usable (`n >= 1`, nonempty sweeps, grids).
    pub fn validate(&self, experiment: bool) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.p == 0 {
            return bad("p must be >= 1");
        }
        if u32::try_from(self.n).is_err() {
            return bad("n does not fit the stream format");
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if matches!(
            self.policy,
            PolicyTag::MaxEntrywise | PolicyTag::OracleEntrywise
        ) && self.n < 2
        {
            return bad("oracle and max policies need n >= 2");
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1");
        }
        if experiment {
            self.spec(false).validate().map_err(CliError::Config)?;
        }
        Ok(())
    }

    /// Confirms that inputs exist and outputs have an existing parent
    /// directory, so a run never fails on I/O after computing.
    pub fn check_paths(&self) -> Result<(), CliError> {
        for path in [&self.input, &self.mask, &self.truth].into_iter().flatten() {
            if !path.is_file() {
                return Err(CliError::Io(format!("{}: no such file", path.display())));
            }
        }
        if let SigmaSpec::Custom { path } = &self.sigma {
            if !path.is_file() {
                return Err(CliError::Io(format!("{}: no such file", path.display())));
            }
        }
        if let Some(out) = &self.out {
            check_out_dir(out)?;
        }
        Ok(())
    }
}

pub fn check_out_dir(out: &Path) -> Result<(), CliError> {
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(CliError::Io(format!(
            "{}: output directory does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}
