use rayon::prelude::*;

use super::{GemvMode, MatrixBatch};
use crate::error::Result;
use crate::scalar::Element;

/// Reference SBGEMV: one straightforward loop nest per batch entry.
///
/// Every output element is accumulated in operand precision, starting from
/// zero and adding terms in ascending index order.
pub fn gemv_batched_naive<T: Element>(mode: GemvMode, a: &MatrixBatch<'_, T>, x: &[T], y: &mut [T]) -> Result<()> {
    let s = a.shape;
    s.validate(mode, a.data.len(), x.len(), y.len())?;
    if s.batch == 0 {
        return Ok(());
    }
    let (x_len, y_len) = s.lens(mode);
    // A batch of one may pass strides of zero; chunking needs a positive step.
    let y_step = if s.batch == 1 { y_len.max(1) } else { s.stride_y };

    y.par_chunks_mut(y_step).take(s.batch).enumerate().for_each(|(k, yk)| {
        let ak = &a.data[k * s.stride_a..];
        let xk = &x[k * s.stride_x..k * s.stride_x + x_len];
        let yk = &mut yk[..y_len];
        match mode {
            GemvMode::NoTrans => {
                yk.fill(T::zero());
                for (j, &xj) in xk.iter().enumerate() {
                    let col = &ak[j * s.lda..j * s.lda + s.rows];
                    for (yi, &aij) in yk.iter_mut().zip(col) {
                        *yi += aij * xj;
                    }
                }
            }
            GemvMode::Trans | GemvMode::ConjTrans => {
                let conj = mode == GemvMode::ConjTrans;
                for (j, yj) in yk.iter_mut().enumerate() {
                    let col = &ak[j * s.lda..j * s.lda + s.rows];
                    let mut acc = T::zero();
                    for (&aij, &xi) in col.iter().zip(xk) {
                        let aij = if conj { aij.conj() } else { aij };
                        acc += aij * xi;
                    }
                    *yj = acc;
                }
            }
        }
    });
    Ok(())
}
