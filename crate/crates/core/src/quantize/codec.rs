//! `.obcv` byte format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header   magic "OBCV" | version u16 | policy u8 | scale kind u8
//!          | p u32 | n u32 | header param f64
//! sample   y bits [ceil(p/8)] | y_bar bits [ceil(p/8)]
//!          | scale: f64 (kind 0) or p x f64 (kind 1)
//! ```

use alloc::vec::Vec;

use super::{packed_len, PolicyTag, QuantizedSample, SampleStream, Scale, SignVector};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"OBCV";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 4 + 4 + 8;
const SCALE_GLOBAL: u8 = 0;
const SCALE_ENTRYWISE: u8 = 1;

pub fn encode_stream(stream: &SampleStream) -> Vec<u8> {
    let p = stream.dim();
    let per_scale = if stream.policy().is_global() {
        8
    } else {
        8 * p
    };
    let mut out = Vec::with_capacity(HEADER_LEN + stream.len() * (2 * packed_len(p) + per_scale));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(stream.policy() as u8);
    out.push(if stream.policy().is_global() {
        SCALE_GLOBAL
    } else {
        SCALE_ENTRYWISE
    });
    // SampleStream guarantees both fit in u32.
    out.extend_from_slice(&(p as u32).to_le_bytes());
    out.extend_from_slice(&(stream.len() as u32).to_le_bytes());
    out.extend_from_slice(&stream.header_param().to_le_bytes());
    for sample in stream.samples() {
        out.extend_from_slice(sample.y.as_bytes());
        out.extend_from_slice(sample.y_bar.as_bytes());
        match &sample.scale {
            Scale::Global(s) => out.extend_from_slice(&s.to_le_bytes()),
            Scale::Entrywise(v) => {
                for s in v {
                    out.extend_from_slice(&s.to_le_bytes());
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.buf.len())
            .ok_or(Error::TruncatedStream(self.buf.len()))?;
        let bytes = &self.buf[self.pos..end];
        self.pos = end;
        Ok(bytes)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
}

pub fn decode_stream(bytes: &[u8]) -> Result<SampleStream> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.array::<4>()? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let policy = PolicyTag::from_u8(r.u8()?).ok_or(Error::InvalidStream("unknown policy tag"))?;
    let kind = r.u8()?;
    let expected_kind = if policy.is_global() {
        SCALE_GLOBAL
    } else {
        SCALE_ENTRYWISE
    };
    if kind != expected_kind {
        return Err(Error::InvalidStream("scale kind does not match policy"));
    }
    let p = r.u32()? as usize;
    let n = r.u32()? as usize;
    let header_param = r.f64()?;
    let mut stream = SampleStream::new(p, policy, header_param)
        .map_err(|_| Error::InvalidStream("bad header parameter"))?;

    let sign_len = packed_len(p);
    for index in 0..n {
        let y = SignVector::from_bytes(p, r.take(sign_len)?)?;
        let y_bar = SignVector::from_bytes(p, r.take(sign_len)?)?;
        let scale = if policy.is_global() {
            Scale::Global(r.f64()?)
        } else {
            let len = p
                .checked_mul(8)
                .ok_or(Error::TruncatedStream(bytes.len()))?;
            let raw = r.take(len)?;
            Scale::Entrywise(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            )
        };
        stream
            .push(QuantizedSample { y, y_bar, scale })
            .map_err(|e| match e {
                Error::MissingScale { .. } => Error::InvalidStream("invalid scale payload"),
                other => other,
            })?;
        debug_assert_eq!(stream.len(), index + 1);
    }
    if r.pos != bytes.len() {
        return Err(Error::InvalidStream("trailing bytes"));
    }
    Ok(stream)
}
