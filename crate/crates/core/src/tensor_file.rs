//! Little-endian binary tensor files.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "SRGT"
//! 4       4           version (u32, currently 1)
//! 8       1           dtype code (0 = f32)
//! 9       1           ndim
//! 10      4 * ndim    dims (u32 each)
//! ...     4 * prod    payload, row-major f32
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::FormatError;

pub const MAGIC: &[u8; 4] = b"SRGT";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "dims do not match payload");
        Self { dims, data }
    }

    pub fn header_len(&self) -> usize {
        10 + 4 * self.dims.len()
    }
}

pub fn encode_tensor(t: &RawTensor) -> Vec<u8> {
    assert!(t.dims.len() <= u8::MAX as usize, "too many dims");
    let mut out = Vec::with_capacity(t.header_len() + 4 * t.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(t.dims.len() as u8);
    for &d in &t.dims {
        out.extend_from_slice(&u32::try_from(d).expect("dim fits in u32").to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n - available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_tensor(bytes: &[u8]) -> Result<RawTensor, FormatError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(FormatError::BadMagic { offset: 0 });
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(FormatError::BadVersion { offset: 4, version });
    }
    let code = cur.take(1)?[0];
    if code != DTYPE_F32 {
        return Err(FormatError::BadDtype { offset: 8, code });
    }
    let ndim = cur.take(1)?[0] as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(cur.u32()? as usize);
    }
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let Some(count) = count.filter(|c| c.checked_mul(4).is_some()) else {
        return Err(FormatError::BadDims {
            offset: 10,
            message: format!("element count overflows for dims {dims:?}"),
        });
    };
    let payload = cur.take(count * 4)?;
    if cur.pos != bytes.len() {
        return Err(FormatError::TrailingBytes {
            offset: cur.pos,
            extra: bytes.len() - cur.pos,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(RawTensor { dims, data })
}

pub fn write_tensor(path: &Path, t: &RawTensor) -> Result<(), FormatError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_tensor(t))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<RawTensor, FormatError> {
    decode_tensor(&fs::read(path)?)
}
