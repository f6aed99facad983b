use alloc::vec;
use alloc::vec::Vec;

use super::{sign_quantize, PolicyTag, QuantizedSample, Scale};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::sampling::{uniform_dither, RngStream};

/// Dither policy and its parameter, before any sample has been seen.
#[derive(Debug, Clone, PartialEq)]
pub enum DitherPolicy {
    /// Uniform dither on `[-lambda, lambda]` for every sample.
    Fixed(f64),
    /// `lambda_k^2 = C1 log(k) * (running mean of ||X_j||_inf)^2`.
    GlobalAdaptive(f64),
    /// `Lambda_k = C1 sqrt(log k) * (running RMS of each coordinate)`.
    EntrywiseAdaptive(f64),
    /// Precomputed per-coordinate scales (oracle or offline maxima).
    OracleEntrywise(Vec<f64>),
    MaxEntrywise(Vec<f64>),
}

/// Running state of a dither policy.
///
/// `k` counts the samples folded in so far. The sample quantized next is
/// sample number `k` (1-based once the warm-up sample `X_0` has been
/// absorbed), and its scale depends on samples `0..k` only.
#[derive(Debug, Clone, PartialEq)]
pub struct DitherState {
    tag: PolicyTag,
    p: usize,
    k: u64,
    lambda_running: f64,
    mean_sq_running: Vec<f64>,
    c1: f64,
    fixed_scale: Scale,
    log_offset: bool,
}

impl DitherState {
    pub fn new(p: usize, policy: DitherPolicy) -> Result<Self> {
        let mut state = DitherState {
            tag: PolicyTag::Fixed,
            p,
            k: 0,
            lambda_running: 0.0,
            mean_sq_running: Vec::new(),
            c1: 0.0,
            fixed_scale: Scale::Global(0.0),
            log_offset: false,
        };
        let valid = |s: f64| s.is_finite() && s >= 0.0;
        state.tag = match &policy {
            DitherPolicy::Fixed(_) => PolicyTag::Fixed,
            DitherPolicy::GlobalAdaptive(_) => PolicyTag::GlobalAdaptive,
            DitherPolicy::EntrywiseAdaptive(_) => PolicyTag::EntrywiseAdaptive,
            DitherPolicy::OracleEntrywise(_) => PolicyTag::OracleEntrywise,
            DitherPolicy::MaxEntrywise(_) => PolicyTag::MaxEntrywise,
        };
        match policy {
            DitherPolicy::Fixed(lambda) => {
                if !(lambda.is_finite() && lambda > 0.0) {
                    return Err(Error::InvalidParameter("fixed lambda must be positive"));
                }
                state.fixed_scale = Scale::Global(lambda);
            }
            DitherPolicy::GlobalAdaptive(c1) | DitherPolicy::EntrywiseAdaptive(c1) => {
                if !(c1.is_finite() && c1 > 0.0) {
                    return Err(Error::InvalidParameter("C1 must be positive"));
                }
                state.c1 = c1;
                if state.tag == PolicyTag::EntrywiseAdaptive {
                    state.mean_sq_running = vec![0.0; p];
                }
            }
            DitherPolicy::OracleEntrywise(scale) | DitherPolicy::MaxEntrywise(scale) => {
                if scale.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: scale.len(),
                    });
                }
                if !scale.iter().all(|&s| valid(s)) {
                    return Err(Error::InvalidParameter("scales must be finite and >= 0"));
                }
                state.fixed_scale = Scale::Entrywise(scale);
            }
        }
        Ok(state)
    }

    /// Use `log(k + 1)` instead of `log(k)` so the first sample is dithered.
    pub fn with_log_offset(mut self, on: bool) -> Self {
        self.log_offset = on;
        self
    }

    pub fn policy(&self) -> PolicyTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn samples_seen(&self) -> u64 {
        self.k
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Running mean of `||X_j||_inf` (global adaptive policy).
    pub fn lambda_running(&self) -> f64 {
        self.lambda_running
    }

    /// Running mean of `X_{j,i}^2` per coordinate (entry-wise adaptive policy).
    pub fn mean_sq_running(&self) -> &[f64] {
        &self.mean_sq_running
    }

    pub fn fixed_scale(&self) -> &Scale {
        &self.fixed_scale
    }

    /// Value stored in a stream header for this policy.
    pub fn header_param(&self) -> f64 {
        match self.tag {
            PolicyTag::Fixed => self.fixed_scale.at(0),
            _ => self.c1,
        }
    }

    fn log_k(&self) -> f64 {
        let k = if self.log_offset { self.k + 1 } else { self.k };
        libm::log(k as f64)
    }

    pub fn current_scale(&self) -> Result<Scale> {
        match self.tag {
            PolicyTag::Fixed | PolicyTag::OracleEntrywise | PolicyTag::MaxEntrywise => {
                Ok(self.fixed_scale.clone())
            }
            PolicyTag::GlobalAdaptive => {
                if self.k == 0 {
                    return Err(Error::InvalidState("adaptive dither needs k >= 1"));
                }
                let s = libm::sqrt(self.c1 * self.log_k()) * self.lambda_running;
                Ok(Scale::Global(s))
            }
            PolicyTag::EntrywiseAdaptive => {
                if self.k == 0 {
                    return Err(Error::InvalidState("adaptive dither needs k >= 1"));
                }
                let factor = self.c1 * libm::sqrt(self.log_k());
                Ok(Scale::Entrywise(
                    self.mean_sq_running
                        .iter()
                        .map(|&m| factor * libm::sqrt(m))
                        .collect(),
                ))
            }
        }
    }

    /// Folds `x` into the running statistics and advances `k`.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: x.len(),
            });
        }
        let prev = self.k as f64;
        let next = prev + 1.0;
        match self.tag {
            PolicyTag::GlobalAdaptive => {
                let sup = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                self.lambda_running = (prev * self.lambda_running + sup) / next;
            }
            PolicyTag::EntrywiseAdaptive => {
                for (m, v) in self.mean_sq_running.iter_mut().zip(x) {
                    *m = (prev * *m + v * v) / next;
                }
            }
            PolicyTag::Fixed | PolicyTag::OracleEntrywise | PolicyTag::MaxEntrywise => {}
        }
        self.k += 1;
        Ok(())
    }

    /// Quantizes `x` as the next sample, then folds it into the state.
    ///
    /// The scale is read before `x` is touched and both dithers are drawn at
    /// that scale, so the recorded scale never depends on `x` itself.
    pub fn acquire(&mut self, x: &[f64], rng: &mut RngStream) -> Result<QuantizedSample> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: x.len(),
            });
        }
        let scale = self.current_scale()?;
        let tau = uniform_dither(self.p, &scale, rng);
        let tau_bar = uniform_dither(self.p, &scale, rng);
        let y = sign_quantize(x, &tau)?;
        let y_bar = sign_quantize(x, &tau_bar)?;
        self.update(x)?;
        Ok(QuantizedSample { y, y_bar, scale })
    }
}

pub fn current_scale(state: &DitherState) -> Result<Scale> {
    state.current_scale()
}

pub fn update_state(state: &mut DitherState, x: &[f64]) -> Result<()> {
    state.update(x)
}

pub fn acquire_sample(
    x: &[f64],
    state: &mut DitherState,
    rng: &mut RngStream,
) -> Result<QuantizedSample> {
    state.acquire(x, rng)
}

/// Oracle entry-wise scales `c1 * sqrt(log(n) * Sigma_ii)`.
pub fn build_oracle_dither(sigma: &SymMatrix, n: u64, c1: f64) -> Result<DitherState> {
    let log_n = libm::log(n as f64);
    let diag = sigma.diagonal();
    if diag.iter().any(|&d| d < 0.0) {
        return Err(Error::InvalidParameter("negative variance"));
    }
    let scale = diag
        .iter()
        .map(|&d| c1 * libm::sqrt(log_n.max(0.0) * d))
        .collect();
    let mut state = DitherState::new(sigma.dim(), DitherPolicy::OracleEntrywise(scale))?;
    state.c1 = c1;
    Ok(state)
}

/// Per-coordinate `max_k |X_k,i|` over the whole batch.
///
/// Unlike the other policies this is not predictable: every sample must be
/// observed and stored before any of them can be quantized.
pub fn build_max_dither(raw_samples: &[Vec<f64>]) -> Result<DitherState> {
    let first = raw_samples.first().ok_or(Error::EmptyInput)?;
    let p = first.len();
    let mut max = vec![0.0_f64; p];
    for x in raw_samples {
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: x.len(),
            });
        }
        for (m, v) in max.iter_mut().zip(x) {
            *m = m.max(v.abs());
        }
    }
    DitherState::new(p, DitherPolicy::MaxEntrywise(max))
}
