//! Strided batched GEMV (SBGEMV).
//!
//! Each batch entry `k` computes `y_k = op(A_k) x_k` with `alpha = 1` and
//! `beta = 0`. Matrices are column-major with leading dimension `lda`, and
//! consecutive matrices, input vectors, and output vectors sit `stride_a`,
//! `stride_x`, and `stride_y` elements apart, as in BLAS `xgemv_strided_batched`.
//!
//! Two implementations are provided. [`gemv_batched_naive`] is the reference
//! triple loop. [`gemv_batched_tiled`] handles the transpose modes for short,
//! wide matrices (`rows << cols`), where the straightforward kernel hands each
//! worker a single short dot product. It tiles the columns of each matrix so
//! that one task produces a contiguous chunk of the output vector, and walks
//! rows in chunks so the slice of `x` being reused stays in cache.
//! [`select_kernel`] picks between them.

mod bench;
mod naive;
mod tiled;

pub use bench::{BenchConfig, BenchDtype};
pub use naive::gemv_batched_naive;
pub use tiled::gemv_batched_tiled;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::Precision;
use crate::scalar::Element;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GemvMode {
    NoTrans,
    Trans,
    ConjTrans,
}

impl GemvMode {
    pub fn is_transpose(self) -> bool {
        !matches!(self, GemvMode::NoTrans)
    }

    /// BLAS `transA` letter.
    pub fn code(self) -> char {
        match self {
            GemvMode::NoTrans => 'N',
            GemvMode::Trans => 'T',
            GemvMode::ConjTrans => 'H',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'N' => Some(GemvMode::NoTrans),
            'T' => Some(GemvMode::Trans),
            'H' | 'C' => Some(GemvMode::ConjTrans),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElemKind {
    Real,
    Complex,
}

/// Geometry of a strided batch of column-major matrices and their vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchShape {
    pub rows: usize,
    pub cols: usize,
    pub batch: usize,
    pub lda: usize,
    pub stride_a: usize,
    pub stride_x: usize,
    pub stride_y: usize,
}

impl BatchShape {
    /// Densely packed matrices and vectors for the given mode.
    pub fn packed(rows: usize, cols: usize, batch: usize, mode: GemvMode) -> Self {
        let (x_len, y_len) = Self::vector_lens(rows, cols, mode);
        BatchShape {
            rows,
            cols,
            batch,
            lda: rows,
            stride_a: rows * cols,
            stride_x: x_len,
            stride_y: y_len,
        }
    }

    fn vector_lens(rows: usize, cols: usize, mode: GemvMode) -> (usize, usize) {
        if mode.is_transpose() {
            (rows, cols)
        } else {
            (cols, rows)
        }
    }

    /// `(len(x_k), len(y_k))` under `mode`.
    pub fn lens(&self, mode: GemvMode) -> (usize, usize) {
        Self::vector_lens(self.rows, self.cols, mode)
    }

    pub(crate) fn validate(&self, mode: GemvMode, a_len: usize, x_len: usize, y_len: usize) -> Result<()> {
        let shape_err = |msg: String| Err(Error::Shape(msg));
        if self.batch == 0 {
            return Ok(());
        }
        if self.lda < self.rows.max(1) {
            return shape_err(format!("lda {} < rows {}", self.lda, self.rows));
        }
        if self.batch > 1 && self.stride_a < self.lda * self.cols {
            return shape_err(format!(
                "stride_a {} overlaps matrices of lda*cols = {}",
                self.stride_a,
                self.lda * self.cols
            ));
        }
        let (xn, yn) = self.lens(mode);
        if self.batch > 1 && self.stride_x < xn {
            return shape_err(format!("stride_x {} < vector length {xn}", self.stride_x));
        }
        if self.batch > 1 && self.stride_y < yn {
            return shape_err(format!("stride_y {} < vector length {yn}", self.stride_y));
        }
        let last = self.batch - 1;
        let need_a = if self.cols == 0 {
            0
        } else {
            last * self.stride_a + self.lda * (self.cols - 1) + self.rows
        };
        if a_len < need_a {
            return shape_err(format!("matrix buffer holds {a_len} elements, need {need_a}"));
        }
        let need_x = last * self.stride_x + xn;
        if x_len < need_x {
            return shape_err(format!("x buffer holds {x_len} elements, need {need_x}"));
        }
        let need_y = last * self.stride_y + yn;
        if y_len < need_y {
            return shape_err(format!("y buffer holds {y_len} elements, need {need_y}"));
        }
        Ok(())
    }
}

/// A strided batch of column-major matrices.
#[derive(Clone, Copy, Debug)]
pub struct MatrixBatch<'a, T> {
    pub data: &'a [T],
    pub shape: BatchShape,
}

impl<'a, T: Element> MatrixBatch<'a, T> {
    pub fn new(data: &'a [T], shape: BatchShape) -> Self {
        MatrixBatch { data, shape }
    }

    pub fn elem(&self) -> ElemKind {
        if T::IS_COMPLEX {
            ElemKind::Complex
        } else {
            ElemKind::Real
        }
    }

    pub fn precision(&self) -> Precision {
        T::precision()
    }
}

/// Tiled-kernel blocking and the dispatch thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingParams {
    /// Output elements (matrix columns) per task.
    pub col_tile: usize,
    /// Rows accumulated per partial dot product.
    pub row_chunk: usize,
    /// The tiled kernel is used when `rows < dispatch_ratio * cols`...
    pub dispatch_ratio: f64,
    /// ...and `rows <= max_rows`.
    pub max_rows: usize,
}

impl Default for TilingParams {
    fn default() -> Self {
        TilingParams {
            col_tile: 256,
            row_chunk: 64,
            dispatch_ratio: 1.0,
            max_rows: 1024,
        }
    }
}

impl TilingParams {
    pub fn validate(&self) -> Result<()> {
        if self.col_tile == 0 || self.row_chunk == 0 {
            return Err(Error::Shape(format!(
                "col_tile ({}) and row_chunk ({}) must be at least 1",
                self.col_tile, self.row_chunk
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelChoice {
    Naive,
    Tiled,
}

/// Host-side dispatch between the two kernels.
pub fn select_kernel(rows: usize, cols: usize, mode: GemvMode, params: &TilingParams) -> KernelChoice {
    let short_wide = (rows as f64) < params.dispatch_ratio * cols as f64;
    if mode.is_transpose() && short_wide && rows <= params.max_rows {
        KernelChoice::Tiled
    } else {
        KernelChoice::Naive
    }
}

/// Runs whichever kernel [`select_kernel`] picks for `a`'s shape.
pub fn gemv_batched<T: Element>(
    mode: GemvMode,
    a: &MatrixBatch<'_, T>,
    x: &[T],
    y: &mut [T],
    params: &TilingParams,
) -> Result<KernelChoice> {
    let choice = select_kernel(a.shape.rows, a.shape.cols, mode, params);
    match choice {
        KernelChoice::Naive => gemv_batched_naive(mode, a, x, y)?,
        KernelChoice::Tiled => gemv_batched_tiled(mode, a, x, y, params)?,
    }
    Ok(choice)
}

/// Achieved memory bandwidth in GB/s, counting one read of every matrix
/// element and one touch of every `x` and `y` element.
pub fn effective_bandwidth(rows: usize, cols: usize, batch: usize, elem_bytes: usize, seconds: f64) -> Result<f64> {
    if !(seconds > 0.0) {
        return Err(Error::NonPositiveTime(seconds));
    }
    let elems = (rows * cols + rows + cols) as f64;
    Ok(batch as f64 * elems * elem_bytes as f64 / seconds / 1e9)
}
