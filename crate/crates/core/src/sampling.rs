//! Seedable random streams and the samplers used by experiments and tests.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::Result;
use crate::linalg::{cholesky, Matrix, SymMatrix};
use crate::quantize::Scale;

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped to the cipher's 64-bit stream
/// selector, so every id yields an independent sequence and trial `t` of a
/// sweep can run on any thread with the same output.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random mantissa bits.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform on `[-1, 1)`.
    #[inline]
    pub fn uniform_symmetric(&mut self) -> f64 {
        2.0 * self.uniform01() - 1.0
    }

    /// Standard normal via Box–Muller; the second variate of each pair is
    /// cached for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // (0, 1] so the logarithm stays finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * INV_2_53;
        let u2 = self.uniform01();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * PI * u2;
        self.spare_normal = Some(r * libm::sin(angle));
        r * libm::cos(angle)
    }
}

/// Centered Gaussian with covariance `sigma`, Cholesky factor cached.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    sigma: SymMatrix,
    chol: Matrix,
}

impl GaussianModel {
    pub fn new(sigma: SymMatrix) -> Result<Self> {
        let chol = cholesky(&sigma)?;
        Ok(GaussianModel { sigma, chol })
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn chol(&self) -> &Matrix {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }
}

/// One draw `L z` with `z` standard normal.
pub fn gaussian_vector(model: &GaussianModel, rng: &mut RngStream) -> Vec<f64> {
    let p = model.dim();
    let z: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
    let l = &model.chol;
    (0..p)
        .map(|i| (0..=i).map(|k| l[(i, k)] * z[k]).sum())
        .collect()
}

/// Coordinates uniform on `[-scale_i, scale_i]`; a zero scale gives exactly 0.
///
/// One uniform variate is consumed per coordinate regardless of scale, so
/// streams stay aligned across dither levels (common random numbers).
pub fn uniform_dither(p: usize, scale: &Scale, rng: &mut RngStream) -> Vec<f64> {
    (0..p)
        .map(|i| {
            let u = rng.uniform_symmetric();
            let s = scale.at(i);
            if s == 0.0 {
                0.0
            } else {
                s * u
            }
        })
        .collect()
}

/// i.i.d. coordinates uniform on `[-bound, bound]`.
pub fn bounded_test_vector(p: usize, bound: f64, rng: &mut RngStream) -> Vec<f64> {
    (0..p).map(|_| bound * rng.uniform_symmetric()).collect()
}
