//! Covariance estimators over raw or quantized samples.
//!
//! All quantized estimators share one accumulation path: for each sample
//! `k` (in ascending order) the outer product of the scale-weighted sign
//! vectors is added into a `p x p` buffer, the sum is divided by `n` and the
//! result is symmetrized as `0.5 * (a_ij + a_ji)`. Because multiplying by a
//! sign is exact, a constant global scale `lambda` and a constant diagonal
//! scale `lambda * I` produce the same bits as the fixed-`lambda` estimator.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{fro_norm, hadamard, max_norm, op_norm, Matrix, SymMatrix};
use crate::quantize::{PolicyTag, SampleStream, Scale};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    /// `(1/n) sum X_k X_kᵀ` on unquantized samples.
    SampleCov,
    /// Fixed dither level `lambda`.
    Dith(f64),
    /// Global adaptive dithering with constant `C1`.
    Adap(f64),
    /// Entry-wise adaptive dithering with constant `C1`.
    AdapEntrywise(f64),
    /// Oracle entry-wise scales `C1 sqrt(log(n) Sigma_ii)`.
    OracleEntrywise(f64),
    /// Offline per-coordinate maxima.
    MaxEntrywise,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::SampleCov => "sample-cov",
            EstimatorKind::Dith(_) => "dith",
            EstimatorKind::Adap(_) => "adap",
            EstimatorKind::AdapEntrywise(_) => "adap-entrywise",
            EstimatorKind::OracleEntrywise(_) => "oracle-entrywise",
            EstimatorKind::MaxEntrywise => "max-entrywise",
        }
    }

    /// Stream policy this estimator consumes, if it consumes one.
    pub fn policy(&self) -> Option<PolicyTag> {
        match self {
            EstimatorKind::SampleCov => None,
            EstimatorKind::Dith(_) => Some(PolicyTag::Fixed),
            EstimatorKind::Adap(_) => Some(PolicyTag::GlobalAdaptive),
            EstimatorKind::AdapEntrywise(_) => Some(PolicyTag::EntrywiseAdaptive),
            EstimatorKind::OracleEntrywise(_) => Some(PolicyTag::OracleEntrywise),
            EstimatorKind::MaxEntrywise => Some(PolicyTag::MaxEntrywise),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EstimatorKind::Dith(l) if !(l.is_finite() && l > 0.0) => {
                Err(Error::InvalidParameter("lambda must be positive"))
            }
            EstimatorKind::Adap(c)
            | EstimatorKind::AdapEntrywise(c)
            | EstimatorKind::OracleEntrywise(c)
                if !(c.is_finite() && c > 0.0) =>
            {
                Err(Error::InvalidParameter("C1 must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Norm used to score `estimate - truth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ErrorNorm {
    #[default]
    Op,
    Fro,
    Max,
}

impl ErrorNorm {
    pub fn name(self) -> &'static str {
        match self {
            ErrorNorm::Op => "op",
            ErrorNorm::Fro => "fro",
            ErrorNorm::Max => "max",
        }
    }
}

/// `(1/n) sum X_k X_kᵀ`, without mean subtraction.
pub fn sample_cov(xs: &[Vec<f64>]) -> Result<SymMatrix> {
    let p = xs.first().ok_or(Error::EmptyInput)?.len();
    let mut acc = vec![0.0; p * p];
    for x in xs {
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: x.len(),
            });
        }
        for i in 0..p {
            let xi = x[i];
            let row = &mut acc[i * p..(i + 1) * p];
            for (a, xj) in row.iter_mut().zip(x) {
                *a += xi * xj;
            }
        }
    }
    finish(p, xs.len(), acc)
}

fn finish(p: usize, n: usize, mut acc: Vec<f64>) -> Result<SymMatrix> {
    let inv = n as f64;
    for a in acc.iter_mut() {
        *a /= inv;
    }
    let m = Matrix::from_row_major(p, p, acc)?;
    SymMatrix::symmetrize(&m)
}

fn expect_policy(stream: &SampleStream, allowed: &[PolicyTag], name: &'static str) -> Result<()> {
    if allowed.contains(&stream.policy()) {
        Ok(())
    } else {
        Err(Error::PolicyMismatch {
            expected: name,
            found: stream.policy().name(),
        })
    }
}

/// Where the per-sample weight comes from.
enum Weights {
    /// Header `lambda` for every sample.
    Constant(f64),
    /// The scalar scale recorded with each sample.
    PerSampleGlobal,
    /// The per-coordinate scale vector recorded with each sample.
    PerSampleEntrywise,
}

fn accumulate(stream: &SampleStream, weights: Weights) -> Result<SymMatrix> {
    if stream.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = stream.dim();
    let mut acc = vec![0.0; p * p];
    let mut u = vec![0.0; p];
    let mut v = vec![0.0; p];
    for (index, sample) in stream.samples().iter().enumerate() {
        match (&weights, &sample.scale) {
            (Weights::Constant(lambda), _) => fill_global(&mut u, &mut v, sample, lambda * lambda),
            (Weights::PerSampleGlobal, Scale::Global(s)) => {
                fill_global(&mut u, &mut v, sample, s * s)
            }
            (Weights::PerSampleEntrywise, Scale::Entrywise(scale)) => {
                for i in 0..p {
                    let w = scale[i];
                    u[i] = if sample.y.is_positive(i) { w } else { -w };
                    v[i] = if sample.y_bar.is_positive(i) { w } else { -w };
                }
            }
            _ => return Err(Error::MissingScale { index }),
        }
        for i in 0..p {
            let ui = u[i];
            let row = &mut acc[i * p..(i + 1) * p];
            for (a, vj) in row.iter_mut().zip(&v) {
                *a += ui * vj;
            }
        }
    }
    finish(p, stream.len(), acc)
}

#[inline]
fn fill_global(u: &mut [f64], v: &mut [f64], sample: &crate::quantize::QuantizedSample, w: f64) {
    for i in 0..u.len() {
        u[i] = if sample.y.is_positive(i) { w } else { -w };
        v[i] = if sample.y_bar.is_positive(i) {
            1.0
        } else {
            -1.0
        };
    }
}

/// Fixed-`lambda` estimator: `lambda^2/n sum y_k y_barᵀ`, symmetrized.
pub fn estimate_dith(stream: &SampleStream) -> Result<SymMatrix> {
    expect_policy(stream, &[PolicyTag::Fixed], "fixed")?;
    accumulate(stream, Weights::Constant(stream.header_param()))
}

/// Global adaptive estimator: each sample is weighted by the square of the
/// scale recorded when it was quantized.
pub fn estimate_adap(stream: &SampleStream) -> Result<SymMatrix> {
    expect_policy(stream, &[PolicyTag::GlobalAdaptive], "global-adaptive")?;
    accumulate(stream, Weights::PerSampleGlobal)
}

/// Entry-wise estimator: `(1/n) sum (Lambda_k y_k)(Lambda_k y_bar_k)ᵀ`,
/// symmetrized. Accepts the adaptive, oracle and max entry-wise policies.
pub fn estimate_adap_entrywise(stream: &SampleStream) -> Result<SymMatrix> {
    expect_policy(
        stream,
        &[
            PolicyTag::EntrywiseAdaptive,
            PolicyTag::OracleEntrywise,
            PolicyTag::MaxEntrywise,
        ],
        "entry-wise",
    )?;
    accumulate(stream, Weights::PerSampleEntrywise)
}

/// Dispatches on the stream's own policy.
pub fn estimate_stream(stream: &SampleStream) -> Result<SymMatrix> {
    match stream.policy() {
        PolicyTag::Fixed => estimate_dith(stream),
        PolicyTag::GlobalAdaptive => estimate_adap(stream),
        _ => estimate_adap_entrywise(stream),
    }
}

/// `mask ⊙ est`, with `mask` checked to be symmetric with entries in `[0, 1]`.
pub fn apply_mask(est: &SymMatrix, mask: &Matrix) -> Result<SymMatrix> {
    let (r, c) = mask.shape();
    if (r, c) != (est.dim(), est.dim()) {
        return Err(Error::ShapeMismatch {
            expected: (est.dim(), est.dim()),
            found: (r, c),
        });
    }
    for i in 0..r {
        for j in 0..c {
            let value = mask[(i, j)];
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::MaskRange {
                    row: i,
                    col: j,
                    value,
                });
            }
            if j > i && value != mask[(j, i)] {
                return Err(Error::MaskAsymmetric { row: i, col: j });
            }
        }
    }
    SymMatrix::new(hadamard(mask, est.as_matrix())?)
}

/// `||est - truth||` in the chosen norm.
pub fn estimation_error(est: &SymMatrix, truth: &SymMatrix, norm: ErrorNorm) -> Result<f64> {
    let diff = est.as_matrix().sub(truth.as_matrix())?;
    match norm {
        ErrorNorm::Op => op_norm(&diff),
        ErrorNorm::Fro => Ok(fro_norm(&diff)),
        ErrorNorm::Max => Ok(max_norm(&diff)),
    }
}
