//! Memoryless one-bit quantization with dithering.
//!
//! A sample `x` becomes the sign pair `(sign(x + tau), sign(x + tau_bar))`
//! where the two dithers are independent and uniform at the scale dictated by
//! a [`DitherState`]. Signs follow the convention `sign(0) = +1`.

mod codec;
mod dither;

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use codec::{decode_stream, encode_stream, FORMAT_VERSION, MAGIC};
pub use dither::{
    acquire_sample, build_max_dither, build_oracle_dither, current_scale, update_state,
    DitherPolicy, DitherState,
};

/// Dither scale in effect for one sample: a single `lambda` shared by all
/// coordinates, or one scale per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Scale {
    Global(f64),
    Entrywise(Vec<f64>),
}

impl Scale {
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        match self {
            Scale::Global(s) => *s,
            Scale::Entrywise(v) => v[i],
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, Scale::Global(_))
    }

    fn is_valid(&self) -> bool {
        let ok = |s: &f64| s.is_finite() && *s >= 0.0;
        match self {
            Scale::Global(s) => ok(s),
            Scale::Entrywise(v) => v.iter().all(ok),
        }
    }
}

/// Packed signs, bit `i` set means `+1`. Bits are LSB-first within each byte
/// and padding bits past `p` are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignVector {
    p: usize,
    bits: Vec<u8>,
}

impl SignVector {
    pub fn from_signs(positive: impl IntoIterator<Item = bool>) -> Self {
        let mut bits = Vec::new();
        let mut p = 0;
        for (i, pos) in positive.into_iter().enumerate() {
            if i % 8 == 0 {
                bits.push(0u8);
            }
            if pos {
                bits[i / 8] |= 1 << (i % 8);
            }
            p = i + 1;
        }
        SignVector { p, bits }
    }

    /// Rebuilds from packed bytes, rejecting wrong lengths and dirty padding.
    pub fn from_bytes(p: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != packed_len(p) {
            return Err(Error::InvalidStream("sign vector length"));
        }
        if !p.is_multiple_of(8) {
            let last = bytes[bytes.len() - 1];
            if last >> (p % 8) != 0 {
                return Err(Error::InvalidStream("nonzero padding bits"));
            }
        }
        Ok(SignVector {
            p,
            bits: bytes.to_vec(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    #[inline]
    pub fn is_positive(&self, i: usize) -> bool {
        self.bits[i / 8] >> (i % 8) & 1 == 1
    }

    /// `+1.0` / `-1.0` per coordinate.
    pub fn to_signs(&self) -> Vec<f64> {
        (0..self.p)
            .map(|i| if self.is_positive(i) { 1.0 } else { -1.0 })
            .collect()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }
}

pub(crate) fn packed_len(p: usize) -> usize {
    p.div_ceil(8)
}

/// `sign(x + dither)` entry-wise with `sign(0) = +1`.
pub fn sign_quantize(x: &[f64], dither: &[f64]) -> Result<SignVector> {
    if x.len() != dither.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: dither.len(),
        });
    }
    Ok(SignVector::from_signs(
        x.iter().zip(dither).map(|(a, t)| a + t >= 0.0),
    ))
}

/// Two-bit representation of one sample plus the scale both dithers used.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSample {
    pub y: SignVector,
    pub y_bar: SignVector,
    pub scale: Scale,
}

/// Policy identifiers; the discriminant is the on-disk tag byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[repr(u8)]
pub enum PolicyTag {
    Fixed = 0,
    GlobalAdaptive = 1,
    EntrywiseAdaptive = 2,
    OracleEntrywise = 3,
    MaxEntrywise = 4,
}

impl PolicyTag {
    pub const ALL: [PolicyTag; 5] = [
        PolicyTag::Fixed,
        PolicyTag::GlobalAdaptive,
        PolicyTag::EntrywiseAdaptive,
        PolicyTag::OracleEntrywise,
        PolicyTag::MaxEntrywise,
    ];

    pub fn from_u8(tag: u8) -> Option<Self> {
        PolicyTag::ALL.get(tag as usize).copied()
    }

    /// Whether samples carry one scale for all coordinates.
    pub fn is_global(self) -> bool {
        matches!(self, PolicyTag::Fixed | PolicyTag::GlobalAdaptive)
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyTag::Fixed => "fixed",
            PolicyTag::GlobalAdaptive => "global-adaptive",
            PolicyTag::EntrywiseAdaptive => "entrywise-adaptive",
            PolicyTag::OracleEntrywise => "oracle-entrywise",
            PolicyTag::MaxEntrywise => "max-entrywise",
        }
    }
}

impl core::fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered quantized samples sharing one dimension and policy.
///
/// `header_param` is the fixed `lambda` for [`PolicyTag::Fixed`], the
/// constant `C1` for the adaptive and oracle policies, and `0` for
/// [`PolicyTag::MaxEntrywise`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    p: usize,
    policy: PolicyTag,
    header_param: f64,
    samples: Vec<QuantizedSample>,
}

impl SampleStream {
    pub fn new(p: usize, policy: PolicyTag, header_param: f64) -> Result<Self> {
        if u32::try_from(p).is_err() {
            return Err(Error::InvalidParameter("dimension exceeds u32"));
        }
        if !header_param.is_finite() {
            return Err(Error::InvalidParameter("header parameter must be finite"));
        }
        Ok(SampleStream {
            p,
            policy,
            header_param,
            samples: Vec::new(),
        })
    }

    pub fn push(&mut self, sample: QuantizedSample) -> Result<()> {
        let index = self.samples.len();
        if sample.y.len() != self.p || sample.y_bar.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: sample.y.len().min(sample.y_bar.len()),
            });
        }
        let kind_ok = match &sample.scale {
            Scale::Global(_) => self.policy.is_global(),
            Scale::Entrywise(v) => !self.policy.is_global() && v.len() == self.p,
        };
        if !kind_ok || !sample.scale.is_valid() {
            return Err(Error::MissingScale { index });
        }
        if u32::try_from(index + 1).is_err() {
            return Err(Error::InvalidParameter("sample count exceeds u32"));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn policy(&self) -> PolicyTag {
        self.policy
    }

    pub fn header_param(&self) -> f64 {
        self.header_param
    }

    pub fn samples(&self) -> &[QuantizedSample] {
        &self.samples
    }
}

/// Storage in bits of `n` quantized samples versus `n` samples at 32 bits per
/// entry. Global policies pay `2p` sign bits plus one 32-bit scale per sample;
/// entry-wise policies pay `2p` bits per sample plus a single `32p`-bit scale
/// vector.
pub fn bit_cost(policy: PolicyTag, p: u64, n: u64) -> (u64, u64) {
    let full = 32 * p * n;
    let quantized = if policy.is_global() {
        (2 * p + 32) * n
    } else {
        32 * p + 2 * p * n
    };
    (quantized, full)
}

/// Zero-filled buffer helper for codec tests.
#[cfg(test)]
pub(crate) fn zero_signs(p: usize) -> SignVector {
    SignVector {
        p,
        bits: alloc::vec![0; packed_len(p)],
    }
}
