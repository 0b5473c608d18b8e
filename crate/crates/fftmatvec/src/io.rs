//! Binary block-vector files.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "FMV1"
//!      4     8  space extent        (u64 LE)
//!     12     8  time extent         (u64 LE)
//!     20     8  layout    0 = SOTI, 1 = TOSI
//!     28     8  precision 0 = f64,  1 = f32
//!     36     8  domain    0 = time, 1 = frequency
//!     44     -  elements, LE; complex values as (re, im) pairs
//! ```
//!
//! The payload must be exactly `space * time` elements long.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, FormatError, Result};
use crate::layout::{BlockVector, Domain, Layout};
use crate::precision::{Buffer, Precision};

pub const MAGIC: &[u8; 4] = b"FMV1";
pub const HEADER_LEN: usize = 44;

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// The file image of `v`.
pub fn encode_vector(v: &BlockVector) -> Vec<u8> {
    let data = v.data();
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * data.elem_bytes());
    out.extend_from_slice(MAGIC);
    put_u64(&mut out, v.space_extent() as u64);
    put_u64(&mut out, v.time_extent() as u64);
    put_u64(&mut out, v.layout().code());
    put_u64(&mut out, precision_code(v.precision()));
    put_u64(&mut out, v.domain().code());
    match data {
        Buffer::F64(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Buffer::F32(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Buffer::C64(d) => d.iter().for_each(|z| {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }),
        Buffer::C32(d) => d.iter().for_each(|z| {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }),
    }
    out
}

fn precision_code(p: Precision) -> u64 {
    match p {
        Precision::Double => 0,
        Precision::Single => 1,
    }
}

fn header_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte field"))
}

/// Parses a file image produced by [`encode_vector`].
pub fn decode_vector(bytes: &[u8]) -> Result<BlockVector, FormatError> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::TruncatedHeader(bytes.len()));
    }
    let space = header_u64(bytes, 4);
    let time = header_u64(bytes, 12);
    let code = |field, value: u64, max: u64| {
        if value > max {
            Err(FormatError::CodeOutOfRange { field, value })
        } else {
            Ok(value)
        }
    };
    let layout = Layout::from_code(code("layout", header_u64(bytes, 20), 1)?).expect("checked code");
    let precision = match code("precision", header_u64(bytes, 28), 1)? {
        0 => Precision::Double,
        _ => Precision::Single,
    };
    let domain = Domain::from_code(code("domain", header_u64(bytes, 36), 1)?).expect("checked code");

    let scalars = if domain == Domain::Frequency { 2 } else { 1 };
    let elem = (precision.real_bytes() * scalars) as u128;
    let expected = (space as u128).saturating_mul(time as u128).saturating_mul(elem);
    let payload = &bytes[HEADER_LEN..];
    if expected != payload.len() as u128 {
        return Err(FormatError::PayloadSize { expected, actual: payload.len() });
    }
    let (space, time) = (space as usize, time as usize);

    let data = match (precision, domain) {
        (Precision::Double, Domain::Time) => {
            Buffer::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        }
        (Precision::Single, Domain::Time) => {
            Buffer::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        }
        (Precision::Double, Domain::Frequency) => Buffer::C64(
            payload
                .chunks_exact(16)
                .map(|c| Complex::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
                .collect(),
        ),
        (Precision::Single, Domain::Frequency) => Buffer::C32(
            payload
                .chunks_exact(8)
                .map(|c| Complex::new(f32::from_le_bytes(c[..4].try_into().unwrap()), f32::from_le_bytes(c[4..].try_into().unwrap())))
                .collect(),
        ),
    };
    Ok(BlockVector::new(data, space, time, layout).expect("payload length checked against header"))
}

pub fn write_vector<W: Write>(mut w: W, v: &BlockVector) -> Result<()> {
    w.write_all(&encode_vector(v))?;
    w.flush()?;
    Ok(())
}

pub fn read_vector<R: Read>(mut r: R) -> Result<BlockVector> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    Ok(decode_vector(&bytes)?)
}

pub fn save_vector(path: impl AsRef<Path>, v: &BlockVector) -> Result<()> {
    fs::write(path.as_ref(), encode_vector(v))?;
    Ok(())
}

/// Errors name the file and the first problem found in it.
pub fn load_vector(path: impl AsRef<Path>) -> Result<BlockVector> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_vector(&bytes).map_err(|kind| Error::VectorFile { path: path.to_path_buf(), kind })
}
