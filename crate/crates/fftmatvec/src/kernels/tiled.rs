use rayon::prelude::*;

use super::{GemvMode, MatrixBatch, TilingParams};
use crate::error::{Error, Result};
use crate::scalar::Element;

/// Transpose / conjugate-transpose SBGEMV tuned for `rows << cols`.
///
/// Each task owns `col_tile` consecutive outputs of one batch entry. Rows are
/// consumed in chunks of `row_chunk`; for every chunk the task forms a partial
/// dot product per column (unit-stride over the column and over `x`) and adds
/// it to that column's running sum. Four columns share each pass over the
/// `x` chunk.
///
/// Per-column arithmetic does not depend on the tile a column lands in, so
/// results are independent of `col_tile` and of thread scheduling. With
/// `row_chunk >= rows` the result is bitwise equal to the naive kernel.
pub fn gemv_batched_tiled<T: Element>(
    mode: GemvMode,
    a: &MatrixBatch<'_, T>,
    x: &[T],
    y: &mut [T],
    params: &TilingParams,
) -> Result<()> {
    if !mode.is_transpose() {
        return Err(Error::Shape("tiled kernel handles Trans/ConjTrans only; use the naive kernel".into()));
    }
    params.validate()?;
    let s = a.shape;
    s.validate(mode, a.data.len(), x.len(), y.len())?;
    if s.batch == 0 {
        return Ok(());
    }
    let (x_len, y_len) = s.lens(mode);
    let y_step = if s.batch == 1 { y_len.max(1) } else { s.stride_y };
    let conj = mode == GemvMode::ConjTrans;

    y.par_chunks_mut(y_step).take(s.batch).enumerate().for_each(|(k, yk)| {
        let ak = &a.data[k * s.stride_a..];
        let xk = &x[k * s.stride_x..k * s.stride_x + x_len];
        yk[..y_len]
            .par_chunks_mut(params.col_tile)
            .enumerate()
            .for_each(|(tile, out)| {
                let j0 = tile * params.col_tile;
                if conj {
                    column_tile::<T, true>(ak, s.lda, s.rows, xk, j0, out, params.row_chunk);
                } else {
                    column_tile::<T, false>(ak, s.lda, s.rows, xk, j0, out, params.row_chunk);
                }
            });
    });
    Ok(())
}

#[inline(always)]
fn op<T: Element, const CONJ: bool>(a: T) -> T {
    if CONJ {
        a.conj()
    } else {
        a
    }
}

fn column_tile<T: Element, const CONJ: bool>(
    a: &[T],
    lda: usize,
    rows: usize,
    x: &[T],
    j0: usize,
    out: &mut [T],
    row_chunk: usize,
) {
    out.fill(T::zero());
    let col = |j: usize, r0: usize, r1: usize| &a[(j0 + j) * lda + r0..(j0 + j) * lda + r1];
    let mut r0 = 0;
    while r0 < rows {
        let r1 = (r0 + row_chunk).min(rows);
        let xs = &x[r0..r1];
        let mut j = 0;
        while j + 4 <= out.len() {
            let (c0, c1, c2, c3) = (col(j, r0, r1), col(j + 1, r0, r1), col(j + 2, r0, r1), col(j + 3, r0, r1));
            let (mut p0, mut p1, mut p2, mut p3) = (T::zero(), T::zero(), T::zero(), T::zero());
            for i in 0..xs.len() {
                let xi = xs[i];
                p0 += op::<T, CONJ>(c0[i]) * xi;
                p1 += op::<T, CONJ>(c1[i]) * xi;
                p2 += op::<T, CONJ>(c2[i]) * xi;
                p3 += op::<T, CONJ>(c3[i]) * xi;
            }
            out[j] += p0;
            out[j + 1] += p1;
            out[j + 2] += p2;
            out[j + 3] += p3;
            j += 4;
        }
        while j < out.len() {
            let c = col(j, r0, r1);
            let mut p = T::zero();
            for (&aij, &xi) in c.iter().zip(xs) {
                p += op::<T, CONJ>(aij) * xi;
            }
            out[j] += p;
            j += 1;
        }
        r0 = r1;
    }
}
