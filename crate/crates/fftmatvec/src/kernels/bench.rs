//! Benchmark problem rows in `rocblas-bench` style.
//!
//! One problem per line, as comma-separated `key: value` pairs. A leading
//! `- ` and surrounding braces are accepted so YAML flow-map rows paste in
//! unchanged:
//!
//! ```text
//! - {M: 128, N: 4096, lda: 128, stride_a: 524288, stride_x: 4096, stride_y: 128, transA: T, batch_count: 100, cold_iters: 2, iters: 10, rocblas_function: rocblas_sgemv_strided_batched}
//! ```
//!
//! The datatype comes from `dtype: s|d|c|z` or from the letter in
//! `rocblas_function`. Keys not listed in [`BenchConfig`] are ignored.

use std::fmt;
use std::str::FromStr;

use super::GemvMode;
use crate::error::{Error, Result};
use crate::precision::Precision;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchDtype {
    /// Real single.
    S,
    /// Real double.
    D,
    /// Complex single.
    C,
    /// Complex double.
    Z,
}

impl BenchDtype {
    pub fn from_code(c: char) -> Option<Self> {
        match c.to_ascii_lowercase() {
            's' => Some(BenchDtype::S),
            'd' => Some(BenchDtype::D),
            'c' => Some(BenchDtype::C),
            'z' => Some(BenchDtype::Z),
            _ => None,
        }
    }

    pub fn code(self) -> char {
        match self {
            BenchDtype::S => 's',
            BenchDtype::D => 'd',
            BenchDtype::C => 'c',
            BenchDtype::Z => 'z',
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, BenchDtype::C | BenchDtype::Z)
    }

    pub fn precision(self) -> Precision {
        match self {
            BenchDtype::S | BenchDtype::C => Precision::Single,
            BenchDtype::D | BenchDtype::Z => Precision::Double,
        }
    }

    pub fn elem_bytes(self) -> usize {
        self.precision().real_bytes() * if self.is_complex() { 2 } else { 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub m: usize,
    pub n: usize,
    pub lda: usize,
    pub stride_a: usize,
    pub stride_x: usize,
    pub stride_y: usize,
    pub trans: GemvMode,
    pub batch_count: usize,
    pub cold_iters: usize,
    pub iters: usize,
    pub dtype: BenchDtype,
}

impl BenchConfig {
    /// Packed strides following the bench convention
    /// `lda = stride_y = M`, `stride_x = N`, `stride_a = M * N`.
    pub fn packed(m: usize, n: usize, batch_count: usize, trans: GemvMode, dtype: BenchDtype) -> Self {
        BenchConfig {
            m,
            n,
            lda: m,
            stride_a: m * n,
            stride_x: n,
            stride_y: m,
            trans,
            batch_count,
            cold_iters: 2,
            iters: 10,
            dtype,
        }
    }

    /// Parses every non-blank, non-comment (`#`) line.
    pub fn parse_rows(text: &str) -> Result<Vec<BenchConfig>> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect()
    }
}

impl FromStr for BenchConfig {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidInput(format!("bench row {line:?}: {msg}"));
        let body = line.trim().trim_start_matches('-').trim();
        let body = body.strip_prefix('{').unwrap_or(body);
        let body = body.strip_suffix('}').unwrap_or(body);

        let mut m = None;
        let mut n = None;
        let mut lda = None;
        let mut stride_a = None;
        let mut stride_x = None;
        let mut stride_y = None;
        let mut trans = None;
        let mut batch_count = None;
        let mut cold_iters = None;
        let mut iters = None;
        let mut dtype = None;

        for field in body.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            let (key, value) = field
                .split_once(':')
                .ok_or_else(|| bad(format!("field {field:?} is not key: value")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = || value.parse::<usize>().map_err(|_| bad(format!("{key}: {value:?} is not an integer")));
            match key {
                "M" => m = Some(num()?),
                "N" => n = Some(num()?),
                "lda" => lda = Some(num()?),
                "stride_a" => stride_a = Some(num()?),
                "stride_x" => stride_x = Some(num()?),
                "stride_y" => stride_y = Some(num()?),
                "batch_count" => batch_count = Some(num()?),
                "cold_iters" => cold_iters = Some(num()?),
                "iters" => iters = Some(num()?),
                "transA" => {
                    let c = value.chars().next().ok_or_else(|| bad("empty transA".into()))?;
                    trans = Some(GemvMode::from_code(c).ok_or_else(|| bad(format!("transA {value:?}")))?);
                }
                "dtype" => {
                    let c = value.chars().next().ok_or_else(|| bad("empty dtype".into()))?;
                    dtype = Some(BenchDtype::from_code(c).ok_or_else(|| bad(format!("dtype {value:?}")))?);
                }
                "rocblas_function" => {
                    let letter = value
                        .strip_prefix("rocblas_")
                        .and_then(|f| f.strip_suffix("gemv_strided_batched"))
                        .and_then(|p| p.chars().next())
                        .ok_or_else(|| bad(format!("unsupported function {value:?}")))?;
                    dtype = Some(BenchDtype::from_code(letter).ok_or_else(|| bad(format!("function {value:?}")))?);
                }
                _ => {}
            }
        }

        let m = m.ok_or_else(|| bad("missing M".into()))?;
        let n = n.ok_or_else(|| bad("missing N".into()))?;
        let trans = trans.unwrap_or(GemvMode::Trans);
        let dtype = dtype.ok_or_else(|| bad("missing dtype or rocblas_function".into()))?;
        Ok(BenchConfig {
            m,
            n,
            lda: lda.unwrap_or(m),
            stride_a: stride_a.unwrap_or(m * n),
            stride_x: stride_x.unwrap_or(n),
            stride_y: stride_y.unwrap_or(m),
            trans,
            batch_count: batch_count.unwrap_or(1),
            cold_iters: cold_iters.unwrap_or(2),
            iters: iters.unwrap_or(10),
            dtype,
        })
    }
}

impl fmt::Display for BenchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "M: {}, N: {}, lda: {}, stride_a: {}, stride_x: {}, stride_y: {}, transA: {}, batch_count: {}, cold_iters: {}, iters: {}, dtype: {}",
            self.m,
            self.n,
            self.lda,
            self.stride_a,
            self.stride_x,
            self.stride_y,
            self.trans.code(),
            self.batch_count,
            self.cold_iters,
            self.iters,
            self.dtype.code()
        )
    }
}
