//! Dense time-domain reference for `F` and `F*` on small problems.
//!
//! `d_i = sum_{j <= i} F_{i-j+1} m_j` and `m_j = sum_{i >= j} F_{i-j+1}^T d_i`,
//! accumulated in double with a fixed summation order.

use crate::error::{Error, Result};
use crate::layout::{BlockVector, Domain, Layout};
use crate::pipeline::BlockColumn;
use crate::precision::Precision;

/// Upper bound on `n_d * n_m * n_t^2`, the oracle's multiply count.
pub const ORACLE_WORK_LIMIT: u128 = 100_000_000;

fn guard(col: &BlockColumn) -> Result<()> {
    let d = col.dims();
    let work = d.n_d as u128 * d.n_m as u128 * (d.n_t as u128).pow(2);
    if work > ORACLE_WORK_LIMIT {
        return Err(Error::OracleTooLarge { work, limit: ORACLE_WORK_LIMIT });
    }
    Ok(())
}

fn input<'a>(v: &'a BlockVector, space: usize, n_t: usize) -> Result<&'a [f64]> {
    if v.layout() != Layout::Soti || v.domain() != Domain::Time {
        return Err(Error::InvalidInput("oracle input must be a SOTI time-domain vector".into()));
    }
    let data = v.as_f64().ok_or(Error::PrecisionMismatch {
        what: "oracle input",
        expected: Precision::Double,
        actual: v.precision(),
    })?;
    if v.space_extent() != space || v.time_extent() != n_t {
        return Err(Error::DimensionMismatch {
            what: "oracle input length",
            expected: space * n_t,
            actual: data.len(),
        });
    }
    Ok(data)
}

/// `d = F m` by direct block summation.
pub fn dense_forward(col: &BlockColumn, m: &BlockVector) -> Result<BlockVector> {
    guard(col)?;
    let dims = col.dims();
    let (n_m, n_d, n_t) = (dims.n_m, dims.n_d, dims.n_t);
    let m = input(m, n_m, n_t)?;
    let mut d = vec![0.0; n_d * n_t];
    for i in 0..n_t {
        for j in 0..=i {
            let block = col.block(i - j);
            for r in 0..n_d {
                let mut acc = 0.0;
                for c in 0..n_m {
                    acc += block[c * n_d + r] * m[c * n_t + j];
                }
                d[r * n_t + i] += acc;
            }
        }
    }
    BlockVector::from_f64(d, n_d, n_t)
}

/// `m = F^T d` by direct block summation.
pub fn dense_adjoint(col: &BlockColumn, d: &BlockVector) -> Result<BlockVector> {
    guard(col)?;
    let dims = col.dims();
    let (n_m, n_d, n_t) = (dims.n_m, dims.n_d, dims.n_t);
    let d = input(d, n_d, n_t)?;
    let mut m = vec![0.0; n_m * n_t];
    for j in 0..n_t {
        for i in j..n_t {
            let block = col.block(i - j);
            for c in 0..n_m {
                let mut acc = 0.0;
                for r in 0..n_d {
                    acc += block[c * n_d + r] * d[r * n_t + i];
                }
                m[c * n_t + j] += acc;
            }
        }
    }
    BlockVector::from_f64(m, n_m, n_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ProblemDims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, space: usize, n_t: usize) -> BlockVector {
        BlockVector::from_f64((0..space * n_t).map(|_| rng.random_range(-1.0..1.0)).collect(), space, n_t).unwrap()
    }

    /// The full `(n_d n_t) x (n_m n_t)` matrix with time-major block rows.
    fn assemble(col: &BlockColumn) -> Vec<Vec<f64>> {
        let d = col.dims();
        let mut full = vec![vec![0.0; d.n_m * d.n_t]; d.n_d * d.n_t];
        for bi in 0..d.n_t {
            for bj in 0..=bi {
                for r in 0..d.n_d {
                    for c in 0..d.n_m {
                        full[bi * d.n_d + r][bj * d.n_m + c] = col.get(bi - bj, r, c);
                    }
                }
            }
        }
        full
    }

    /// SOTI (space-major) to the time-major order of the assembled matrix.
    fn time_major(v: &[f64], space: usize, n_t: usize) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for s in 0..space {
            for t in 0..n_t {
                out[t * space + s] = v[s * n_t + t];
            }
        }
        out
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        num.sqrt() <= tol * den.sqrt()
    }

    #[test]
    fn single_block_is_plain_matvec() {
        let dims = ProblemDims::new(3, 2, 1).unwrap();
        let col = BlockColumn::new(dims, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let m = BlockVector::from_f64(vec![1.0, 1.0, 1.0], 3, 1).unwrap();
        let d = dense_forward(&col, &m).unwrap();
        assert_eq!(d.as_f64().unwrap(), &[9.0, 12.0]);
        let dv = BlockVector::from_f64(vec![1.0, -1.0], 2, 1).unwrap();
        let mv = dense_adjoint(&col, &dv).unwrap();
        assert_eq!(mv.as_f64().unwrap(), &[-1.0, -1.0, -1.0]);
    }

    #[test]
    fn delta_column_decouples_blocks() {
        let dims = ProblemDims::new(2, 2, 4).unwrap();
        let col = BlockColumn::from_fn(dims, |t, i, j| if t == 0 { (1 + i + 2 * j) as f64 } else { 0.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = rand_vec(&mut rng, 2, 4);
        let d = dense_forward(&col, &m).unwrap();
        let (mv, dv) = (m.as_f64().unwrap(), d.as_f64().unwrap());
        for t in 0..4 {
            assert_eq!(dv[t], 1.0 * mv[t] + 3.0 * mv[4 + t]);
            assert_eq!(dv[4 + t], 2.0 * mv[t] + 4.0 * mv[4 + t]);
        }
    }

    #[test]
    fn matches_assembled_matrix() {
        let dims = ProblemDims::new(3, 2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let col = BlockColumn::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0));
        let full = assemble(&col);
        let m = rand_vec(&mut rng, 3, 4);
        let mt = time_major(m.as_f64().unwrap(), 3, 4);
        let want: Vec<f64> = full.iter().map(|row| row.iter().zip(&mt).map(|(a, b)| a * b).sum()).collect();
        let got = dense_forward(&col, &m).unwrap();
        assert!(close(&time_major(got.as_f64().unwrap(), 2, 4), &want, 1e-14));

        let d = rand_vec(&mut rng, 2, 4);
        let dt = time_major(d.as_f64().unwrap(), 2, 4);
        let want: Vec<f64> = (0..12).map(|c| (0..8).map(|r| full[r][c] * dt[r]).sum()).collect();
        let got = dense_adjoint(&col, &d).unwrap();
        assert!(close(&time_major(got.as_f64().unwrap(), 3, 4), &want, 1e-14));
    }

    #[test]
    fn adjointness_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let dims = ProblemDims::new(rng.random_range(1..8), rng.random_range(1..5), rng.random_range(1..10)).unwrap();
            let col = BlockColumn::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0));
            let m = rand_vec(&mut rng, dims.n_m, dims.n_t);
            let d = rand_vec(&mut rng, dims.n_d, dims.n_t);
            let fm = dense_forward(&col, &m).unwrap();
            let ftd = dense_adjoint(&col, &d).unwrap();
            let lhs: f64 = fm.as_f64().unwrap().iter().zip(d.as_f64().unwrap()).map(|(a, b)| a * b).sum();
            let rhs: f64 = m.as_f64().unwrap().iter().zip(ftd.as_f64().unwrap()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(rhs.abs()).max(1e-300));

            let m2 = rand_vec(&mut rng, dims.n_m, dims.n_t);
            let combo: Vec<f64> =
                m.as_f64().unwrap().iter().zip(m2.as_f64().unwrap()).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
            let lhs = dense_forward(&col, &BlockVector::from_f64(combo, dims.n_m, dims.n_t).unwrap()).unwrap();
            let f2 = dense_forward(&col, &m2).unwrap();
            let rhs: Vec<f64> =
                fm.as_f64().unwrap().iter().zip(f2.as_f64().unwrap()).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
            assert!(close(lhs.as_f64().unwrap(), &rhs, 1e-13));
        }
    }

    #[test]
    fn size_guard() {
        let dims = ProblemDims::new(1000, 100, 100).unwrap();
        let col = BlockColumn::zeros(ProblemDims::new(1, 1, 1).unwrap());
        assert!(dense_forward(&col, &BlockVector::zeros(1, 1)).is_ok());
        // 1000 * 100 * 100^2 = 1e9 > limit; avoid allocating the column.
        let work = dims.n_d as u128 * dims.n_m as u128 * (dims.n_t as u128).pow(2);
        assert!(work > ORACLE_WORK_LIMIT);
        let col = BlockColumn::zeros(ProblemDims::new(200, 10, 250).unwrap());
        assert!(matches!(dense_forward(&col, &BlockVector::zeros(200, 250)), Err(Error::OracleTooLarge { .. })));
    }
}
