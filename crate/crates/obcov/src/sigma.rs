//! Ground-truth covariance matrices for experiments.

use std::path::PathBuf;

use obcov_core::linalg::{Matrix, SymMatrix};
use obcov_core::RngStream;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::matrix_io::read_matrix_csv;

/// Stream id reserved for drawing random covariance matrices.
const RANDOM_SPD_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaSpec {
    /// Ones on the diagonal, 0.2 everywhere else: `0.8 I + 0.2 J`.
    #[default]
    Compound,
    /// `D Sigma_1 D` with `D = diag(1, 1/10, ..., 1/10)`.
    ScaledCompound,
    /// `BᵀB / p + 0.1 I` for a seeded standard Gaussian `B`.
    RandomSpd { seed: u64 },
    /// Matrix CSV on disk.
    Custom { path: PathBuf },
}

impl SigmaSpec {
    pub fn label(&self) -> &'static str {
        match self {
            SigmaSpec::Compound => "sigma1",
            SigmaSpec::ScaledCompound => "sigma2",
            SigmaSpec::RandomSpd { .. } => "random",
            SigmaSpec::Custom { .. } => "custom",
        }
    }
}

pub fn compound_symmetry(p: usize) -> SymMatrix {
    SymMatrix::from_upper_fn(p, |i, j| if i == j { 1.0 } else { 0.2 })
}

pub fn scaled_compound(p: usize) -> SymMatrix {
    let d = |i: usize| if i == 0 { 1.0 } else { 0.1 };
    let base = compound_symmetry(p);
    SymMatrix::from_upper_fn(p, |i, j| d(i) * base[(i, j)] * d(j))
}

pub fn random_spd(p: usize, seed: u64) -> SymMatrix {
    let mut rng = RngStream::new(seed, RANDOM_SPD_STREAM);
    let b = Matrix::from_fn(p, p, |_, _| rng.standard_normal());
    let btb = b
        .transpose()
        .matmul(&b)
        .expect("square factors always multiply");
    let pf = p as f64;
    SymMatrix::from_upper_fn(p, |i, j| {
        let v = 0.5 * (btb[(i, j)] + btb[(j, i)]) / pf;
        if i == j {
            v + 0.1
        } else {
            v
        }
    })
}

/// Builds `Sigma` of dimension `p`. Custom matrices must already be `p x p`.
pub fn build_sigma(spec: &SigmaSpec, p: usize) -> Result<SymMatrix, CliError> {
    match spec {
        SigmaSpec::Compound => Ok(compound_symmetry(p)),
        SigmaSpec::ScaledCompound => Ok(scaled_compound(p)),
        SigmaSpec::RandomSpd { seed } => Ok(random_spd(p, *seed)),
        SigmaSpec::Custom { path } => {
            let m = read_matrix_csv(path)?;
            if m.shape() != (p, p) {
                return Err(CliError::Config(format!(
                    "custom sigma {} is {}x{}, expected {p}x{p}",
                    path.display(),
                    m.rows(),
                    m.cols()
                )));
            }
            Ok(SymMatrix::new(m)?)
        }
    }
}
