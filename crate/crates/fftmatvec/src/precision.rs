//! Precision selection for the five matvec phases, and the casts between them.
//!
//! A [`PrecisionConfig`] is written as five characters over `{d, s}`, one per
//! phase in pipeline order: pad/broadcast, FFT, SBGEMV, IFFT, unpad/reduce.
//! That string is the wire format of the CLI `-prec` flag and of every report
//! row.

use std::fmt;
use std::str::FromStr;

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ConfigParseError, Error, Result};
use crate::scalar::{cast_complex, Real};

/// Compute precision of a single phase.
///
/// Ordered so that `Double < Single`, which makes the derived ordering of
/// configs agree with the lexicographic order of their rendered strings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Precision {
    Double,
    Single,
}

impl Precision {
    pub const fn code(self) -> char {
        match self {
            Precision::Double => 'd',
            Precision::Single => 's',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'd' => Some(Precision::Double),
            's' => Some(Precision::Single),
            _ => None,
        }
    }

    /// Bytes per real scalar.
    pub const fn real_bytes(self) -> usize {
        match self {
            Precision::Double => 8,
            Precision::Single => 4,
        }
    }

    /// The narrower of two precisions.
    pub fn lowest(self, other: Precision) -> Precision {
        if self == Precision::Single || other == Precision::Single {
            Precision::Single
        } else {
            Precision::Double
        }
    }

    /// Value of `x` after a round trip through this precision.
    #[inline(always)]
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::Double => x,
            Precision::Single => x as f32 as f64,
        }
    }
}

/// The five phases of a matvec, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    /// Broadcast (partitioned adjoint) and zero-pad the input.
    Pad,
    Fft,
    /// Reorder, strided batched GEMV, reorder back.
    Sbgemv,
    Ifft,
    /// Truncate padding and reduce (partitioned forward).
    Unpad,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Pad, Phase::Fft, Phase::Sbgemv, Phase::Ifft, Phase::Unpad];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            Phase::Pad => "pad",
            Phase::Fft => "fft",
            Phase::Sbgemv => "sbgemv",
            Phase::Ifft => "ifft",
            Phase::Unpad => "unpad",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-phase compute precisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrecisionConfig {
    phases: [Precision; 5],
}

impl PrecisionConfig {
    pub const ALL_DOUBLE: PrecisionConfig = PrecisionConfig { phases: [Precision::Double; 5] };
    pub const ALL_SINGLE: PrecisionConfig = PrecisionConfig { phases: [Precision::Single; 5] };

    pub const fn new(phases: [Precision; 5]) -> Self {
        PrecisionConfig { phases }
    }

    pub fn get(&self, phase: Phase) -> Precision {
        self.phases[phase.index()]
    }

    pub fn phases(&self) -> [Precision; 5] {
        self.phases
    }

    pub fn is_all_double(&self) -> bool {
        *self == Self::ALL_DOUBLE
    }

    /// Number of precision changes along `Double -> p1 -> ... -> p5 -> Double`.
    ///
    /// This is the number of casts a serial matvec performs under this config.
    pub fn transitions(&self) -> usize {
        let mut chain = Vec::with_capacity(7);
        chain.push(Precision::Double);
        chain.extend_from_slice(&self.phases);
        chain.push(Precision::Double);
        chain.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        Self::ALL_DOUBLE
    }
}

impl fmt::Display for PrecisionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.phases {
            write!(f, "{}", p.code())?;
        }
        Ok(())
    }
}

impl FromStr for PrecisionConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason| Error::ParseConfig { input: s.to_owned(), reason };
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 5 {
            return Err(fail(ConfigParseError::Length(chars.len())));
        }
        let mut phases = [Precision::Double; 5];
        for (i, &c) in chars.iter().enumerate() {
            phases[i] = Precision::from_code(c)
                .ok_or_else(|| fail(ConfigParseError::Char { position: i + 1, found: c }))?;
        }
        Ok(PrecisionConfig { phases })
    }
}

impl Serialize for PrecisionConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PrecisionConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a five-character `{d,s}` config string.
pub fn parse_precision_config(s: &str) -> Result<PrecisionConfig> {
    s.parse()
}

/// All 32 configs, lexicographically ordered by rendered string.
pub fn enumerate_configs() -> Vec<PrecisionConfig> {
    (0u32..32)
        .map(|bits| {
            let mut phases = [Precision::Double; 5];
            for (i, p) in phases.iter_mut().enumerate() {
                if bits & (1 << (4 - i)) != 0 {
                    *p = Precision::Single;
                }
            }
            PrecisionConfig { phases }
        })
        .collect()
}

/// A flat numeric buffer tagged with its element type.
///
/// Complex elements are interleaved `(re, im)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub enum Buffer {
    F64(Vec<f64>),
    F32(Vec<f32>),
    C64(Vec<Complex64>),
    C32(Vec<Complex32>),
}

impl Buffer {
    pub fn len(&self) -> usize {
        match self {
            Buffer::F64(v) => v.len(),
            Buffer::F32(v) => v.len(),
            Buffer::C64(v) => v.len(),
            Buffer::C32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn precision(&self) -> Precision {
        match self {
            Buffer::F64(_) | Buffer::C64(_) => Precision::Double,
            Buffer::F32(_) | Buffer::C32(_) => Precision::Single,
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Buffer::C64(_) | Buffer::C32(_))
    }

    pub fn elem_bytes(&self) -> usize {
        let scalars = if self.is_complex() { 2 } else { 1 };
        scalars * self.precision().real_bytes()
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match self {
            Buffer::F64(v) => Some(v),
            _ => None,
        }
    }

    /// Converts to `to`, keeping real/complex kind. See [`cast_buffer`].
    pub fn cast(&self, to: Precision) -> Buffer {
        match (self, to) {
            (Buffer::F64(v), Precision::Double) => Buffer::F64(v.clone()),
            (Buffer::F32(v), Precision::Single) => Buffer::F32(v.clone()),
            (Buffer::C64(v), Precision::Double) => Buffer::C64(v.clone()),
            (Buffer::C32(v), Precision::Single) => Buffer::C32(v.clone()),
            (Buffer::F64(v), Precision::Single) => Buffer::F32(cast_slice(v)),
            (Buffer::F32(v), Precision::Double) => Buffer::F64(cast_slice(v)),
            (Buffer::C64(v), Precision::Single) => Buffer::C32(cast_complex_slice(v)),
            (Buffer::C32(v), Precision::Double) => Buffer::C64(cast_complex_slice(v)),
        }
    }
}

/// Casts `src` from `from` to `to`.
///
/// Narrowing rounds to nearest-even, widening is exact, and a same-precision
/// cast returns a bitwise copy.
pub fn cast_buffer(src: &Buffer, from: Precision, to: Precision) -> Result<Buffer> {
    if src.precision() != from {
        return Err(Error::PrecisionMismatch {
            what: "cast_buffer source",
            expected: from,
            actual: src.precision(),
        });
    }
    Ok(src.cast(to))
}

pub fn cast_slice<T: Real, U: Real>(src: &[T]) -> Vec<U> {
    src.iter().map(|&x| x.cast()).collect()
}

pub fn cast_complex_slice<T: Real, U: Real>(
    src: &[num_complex::Complex<T>],
) -> Vec<num_complex::Complex<U>> {
    src.iter().map(|&z| cast_complex(z)).collect()
}
