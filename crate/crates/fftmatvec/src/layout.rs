//! Problem dimensions and block vectors with explicit memory layout.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{Buffer, Precision};

/// Sizes of the block-Toeplitz operator: `n_t x n_t` blocks of `n_d x n_m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemDims {
    /// Spatial parameters per time step.
    pub n_m: usize,
    /// Sensors per time step.
    pub n_d: usize,
    /// Time steps.
    pub n_t: usize,
}

impl ProblemDims {
    pub fn new(n_m: usize, n_d: usize, n_t: usize) -> Result<Self> {
        if n_m == 0 || n_d == 0 || n_t == 0 {
            return Err(Error::InvalidDims(format!(
                "n_m={n_m}, n_d={n_d}, n_t={n_t}; all must be at least 1"
            )));
        }
        Ok(ProblemDims { n_m, n_d, n_t })
    }

    /// Length of the circulant embedding.
    pub fn fft_len(&self) -> usize {
        2 * self.n_t
    }

    /// Frequency bins kept by the real-to-complex transform.
    pub fn n_bins(&self) -> usize {
        self.n_t + 1
    }

    pub fn param_len(&self) -> usize {
        self.n_m * self.n_t
    }

    pub fn data_len(&self) -> usize {
        self.n_d * self.n_t
    }
}

/// Memory order of a (space x time) block vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    /// Space outer, time inner: `(s, t)` lives at `s * T + t`.
    Soti,
    /// Time outer, space inner: `(t, s)` lives at `t * S + s`.
    Tosi,
}

impl Layout {
    pub const fn code(self) -> u64 {
        match self {
            Layout::Soti => 0,
            Layout::Tosi => 1,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(Layout::Soti),
            1 => Some(Layout::Tosi),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    /// Real samples.
    Time,
    /// Complex half-spectrum bins.
    Frequency,
}

impl Domain {
    pub const fn code(self) -> u64 {
        match self {
            Domain::Time => 0,
            Domain::Frequency => 1,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(Domain::Time),
            1 => Some(Domain::Frequency),
            _ => None,
        }
    }
}

/// A parameter (`m`) or data (`d`) vector made of per-time-step blocks.
///
/// Time-domain vectors hold real elements and frequency-domain vectors hold
/// complex ones; precision is carried by the buffer variant.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    data: Buffer,
    space: usize,
    time: usize,
    layout: Layout,
}

impl BlockVector {
    pub fn new(data: Buffer, space: usize, time: usize, layout: Layout) -> Result<Self> {
        if data.len() != space * time {
            return Err(Error::DimensionMismatch {
                what: "block vector buffer length",
                expected: space * time,
                actual: data.len(),
            });
        }
        Ok(BlockVector { data, space, time, layout })
    }

    /// A real, double-precision, SOTI vector.
    pub fn from_f64(data: Vec<f64>, space: usize, time: usize) -> Result<Self> {
        Self::new(Buffer::F64(data), space, time, Layout::Soti)
    }

    pub fn zeros(space: usize, time: usize) -> Self {
        BlockVector {
            data: Buffer::F64(vec![0.0; space * time]),
            space,
            time,
            layout: Layout::Soti,
        }
    }

    pub fn data(&self) -> &Buffer {
        &self.data
    }

    pub fn into_data(self) -> Buffer {
        self.data
    }

    pub fn space_extent(&self) -> usize {
        self.space
    }

    pub fn time_extent(&self) -> usize {
        self.time
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn precision(&self) -> Precision {
        self.data.precision()
    }

    pub fn domain(&self) -> Domain {
        if self.data.is_complex() {
            Domain::Frequency
        } else {
            Domain::Time
        }
    }

    /// The elements as `f64`, if this is a real double-precision vector.
    pub fn as_f64(&self) -> Option<&[f64]> {
        self.data.as_f64()
    }

    /// Flat offset of element `(s, t)` under this vector's layout.
    pub fn offset(&self, s: usize, t: usize) -> usize {
        match self.layout {
            Layout::Soti => s * self.time + t,
            Layout::Tosi => t * self.space + s,
        }
    }
}

/// Returns `v` stored in `target` layout. Values are moved, never altered.
pub fn reorder(v: &BlockVector, target: Layout) -> BlockVector {
    if v.layout == target {
        return v.clone();
    }
    // Source is (outer x inner); the reordered buffer is (inner x outer).
    let (rows, cols) = match v.layout {
        Layout::Soti => (v.space, v.time),
        Layout::Tosi => (v.time, v.space),
    };
    let data = match &v.data {
        Buffer::F64(src) => Buffer::F64(transpose(src, rows, cols)),
        Buffer::F32(src) => Buffer::F32(transpose(src, rows, cols)),
        Buffer::C64(src) => Buffer::C64(transpose(src, rows, cols)),
        Buffer::C32(src) => Buffer::C32(transpose(src, rows, cols)),
    };
    BlockVector { data, space: v.space, time: v.time, layout: target }
}

pub(crate) fn transpose<T: Copy + Send + Sync + Default>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut dst = vec![T::default(); rows * cols];
    transpose_map(src, rows, cols, &mut dst, |x| x);
    dst
}

const TILE: usize = 32;

/// Writes the transpose of the row-major `rows x cols` matrix `src` into
/// `dst` (`cols x rows`), applying `f` to each element in the same pass.
pub(crate) fn transpose_map<T, U, F>(src: &[T], rows: usize, cols: usize, dst: &mut [U], f: F)
where
    T: Copy + Sync,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return;
    }
    // Each task owns TILE destination rows, i.e. TILE source columns.
    dst.par_chunks_mut(TILE * rows).enumerate().for_each(|(blk, out)| {
        let c0 = blk * TILE;
        let nc = out.len() / rows;
        for r0 in (0..rows).step_by(TILE) {
            let r1 = (r0 + TILE).min(rows);
            for dc in 0..nc {
                let c = c0 + dc;
                let out_row = &mut out[dc * rows..(dc + 1) * rows];
                for r in r0..r1 {
                    out_row[r] = f(src[r * cols + c]);
                }
            }
        }
    });
}

/// Complex counterpart of [`transpose_map`] with a per-component map.
pub(crate) fn transpose_map_complex<T, U, F>(
    src: &[Complex<T>],
    rows: usize,
    cols: usize,
    dst: &mut [Complex<U>],
    f: F,
) where
    T: Copy + Sync,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    transpose_map(src, rows, cols, dst, |z| Complex::new(f(z.re), f(z.im)));
}
