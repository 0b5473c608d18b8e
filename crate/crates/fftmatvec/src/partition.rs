//! In-process simulation of a `1 x p` column-partitioned operator.
//!
//! Worker `w` owns the parameter columns `ranges[w]` of every block. The
//! forward matvec is then a sum of per-worker partial data vectors (a
//! reduce), and the adjoint needs the whole data vector on every worker (a
//! broadcast) but no reduction, because each worker produces a disjoint
//! slice of `m`.
//!
//! The reduce runs in the unpad precision and the broadcast payload in the
//! pad precision of the config, so a single five-character config also
//! selects communication precision.

use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{BlockVector, ProblemDims};
use crate::pipeline::{BlockColumn, Matvec, MatvecKind, MatvecStats, PhaseTimings, RealBuf, RealSlice, SpectralOperator};
use crate::precision::{Phase, Precision, PrecisionConfig};
use crate::scalar::Real;

/// `p` workers with balanced contiguous column ranges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid1xP {
    p: usize,
    ranges: Vec<Range<usize>>,
}

impl Grid1xP {
    /// The first `n_m % p` workers get one extra column.
    pub fn new(p: usize, n_m: usize) -> Result<Self> {
        if p == 0 || p > n_m {
            return Err(Error::TooManyWorkers { workers: p, n_m });
        }
        let (base, extra) = (n_m / p, n_m % p);
        let mut start = 0;
        let ranges = (0..p)
            .map(|w| {
                let len = base + usize::from(w < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        Ok(Grid1xP { p, ranges })
    }

    pub fn workers(&self) -> usize {
        self.p
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn n_m(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommOp {
    Reduce,
    Broadcast,
}

/// The one collective of a partitioned matvec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommSpec {
    pub op: CommOp,
    pub precision: Precision,
    /// Elements per message: the length of the data vector, `n_d * n_t`.
    pub buffer_len: usize,
}

impl CommSpec {
    pub fn for_matvec(kind: MatvecKind, dims: ProblemDims, cfg: PrecisionConfig) -> Self {
        match kind {
            MatvecKind::Forward => CommSpec {
                op: CommOp::Reduce,
                precision: cfg.get(Phase::Unpad),
                buffer_len: dims.data_len(),
            },
            MatvecKind::Adjoint => CommSpec {
                op: CommOp::Broadcast,
                precision: cfg.get(Phase::Pad),
                buffer_len: dims.data_len(),
            },
        }
    }

    pub fn bytes(&self) -> usize {
        self.buffer_len * self.precision.real_bytes()
    }
}

/// Column slices of `col`, one per worker.
pub fn shard_operator(col: &BlockColumn, grid: &Grid1xP) -> Result<Vec<BlockColumn>> {
    let dims = col.dims();
    if grid.n_m() != dims.n_m {
        return Err(Error::DimensionMismatch {
            what: "grid parameter columns",
            expected: dims.n_m,
            actual: grid.n_m(),
        });
    }
    grid.ranges
        .iter()
        .map(|r| {
            let sub = ProblemDims::new(r.len(), dims.n_d, dims.n_t)?;
            let mut data = Vec::with_capacity(sub.n_d * sub.n_m * sub.n_t);
            for t in 0..dims.n_t {
                // Column-major blocks: a column range is one contiguous run.
                data.extend_from_slice(&col.block(t)[r.start * dims.n_d..r.end * dims.n_d]);
            }
            BlockColumn::new(sub, data)
        })
        .collect()
}

/// Elementwise sum of `buffers` over a fixed left-balanced binary tree.
///
/// Inputs are cast to `precision` first and every partial sum is held in
/// `precision`; the root is widened to double. With `n` leaves the left
/// subtree takes `ceil(n / 2)`, so four leaves sum as `(a + b) + (c + d)`.
pub fn tree_reduce(buffers: &[Vec<f64>], precision: Precision) -> Result<Vec<f64>> {
    let leaves: Vec<RealBuf> = buffers
        .iter()
        .map(|b| match precision {
            Precision::Double => RealBuf::F64(b.clone()),
            Precision::Single => RealBuf::F32(b.iter().map(|&x| x as f32).collect()),
        })
        .collect();
    reduce_bufs(&leaves, precision)
}

/// Reduces buffers already in working precision; mixed inputs are cast.
pub(crate) fn reduce_bufs(leaves: &[RealBuf], precision: Precision) -> Result<Vec<f64>> {
    let Some(first) = leaves.first() else {
        return Err(Error::InvalidInput("tree_reduce needs at least one buffer".into()));
    };
    let len = first.as_slice().len();
    for b in leaves {
        if b.as_slice().len() != len {
            return Err(Error::DimensionMismatch {
                what: "tree_reduce buffer length",
                expected: len,
                actual: b.as_slice().len(),
            });
        }
    }
    Ok(match precision {
        Precision::Double => {
            let typed: Vec<Vec<f64>> = leaves.iter().map(|b| b.as_slice().to_vec_of()).collect();
            tree_sum(&typed)
        }
        Precision::Single => {
            let typed: Vec<Vec<f32>> = leaves.iter().map(|b| b.as_slice().to_vec_of()).collect();
            tree_sum(&typed).iter().map(|&x| x as f64).collect()
        }
    })
}

fn tree_sum<T: Real>(leaves: &[Vec<T>]) -> Vec<T> {
    if leaves.len() == 1 {
        return leaves[0].clone();
    }
    let mid = leaves.len().div_ceil(2);
    let (left, right) = rayon::join(|| tree_sum(&leaves[..mid]), || tree_sum(&leaves[mid..]));
    let mut out = left;
    out.par_iter_mut().zip(right.par_iter()).for_each(|(a, &b)| *a = *a + b);
    out
}

impl RealSlice<'_> {
    fn len(&self) -> usize {
        match self {
            RealSlice::F64(v) => v.len(),
            RealSlice::F32(v) => v.len(),
        }
    }

    fn to_vec_of<T: Real>(&self) -> Vec<T> {
        match self {
            RealSlice::F64(v) => v.iter().map(|&x| x.cast()).collect(),
            RealSlice::F32(v) => v.iter().map(|&x| x.cast()).collect(),
        }
    }
}

/// A column-partitioned operator whose workers run in one process.
pub struct PartitionedOperator {
    dims: ProblemDims,
    grid: Grid1xP,
    workers: Vec<SpectralOperator>,
}

impl PartitionedOperator {
    /// Shards `col` and sets up one spectral operator per worker.
    ///
    /// Workers pick their GEMV kernel from the full problem shape so every
    /// grid size runs the same kernel as the serial operator.
    pub fn new(col: &BlockColumn, grid: Grid1xP) -> Result<Self> {
        let dims = col.dims();
        let shards = shard_operator(col, &grid)?;
        let workers = shards
            .iter()
            .map(|s| Ok(SpectralOperator::new(s)?.with_dispatch_cols(dims.n_m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PartitionedOperator { dims, grid, workers })
    }

    pub fn grid(&self) -> &Grid1xP {
        &self.grid
    }

    pub fn workers(&self) -> &[SpectralOperator] {
        &self.workers
    }

    pub fn forward_matvec(&self, m: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)> {
        self.apply(MatvecKind::Forward, m, cfg)
    }

    pub fn adjoint_matvec(&self, d: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)> {
        self.apply(MatvecKind::Adjoint, d, cfg)
    }

    fn check<'v>(&self, v: &'v BlockVector, space: usize) -> Result<&'v [f64]> {
        let data = v.as_f64().ok_or(Error::PrecisionMismatch {
            what: "partitioned matvec input",
            expected: Precision::Double,
            actual: v.precision(),
        })?;
        if v.layout() != crate::layout::Layout::Soti {
            return Err(Error::InvalidInput("matvec input must be in SOTI layout".into()));
        }
        if v.space_extent() != space || v.time_extent() != self.dims.n_t {
            return Err(Error::DimensionMismatch {
                what: "partitioned matvec input length",
                expected: space * self.dims.n_t,
                actual: data.len(),
            });
        }
        Ok(data)
    }

    fn forward(&self, m: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)> {
        let start = Instant::now();
        let n_t = self.dims.n_t;
        let m = self.check(m, self.dims.n_m)?;
        let reduce_prec = cfg.get(Phase::Unpad);
        let partials = self
            .workers
            .par_iter()
            .zip(self.grid.ranges.par_iter())
            .map(|(w, r)| {
                let shard = RealSlice::F64(&m[r.start * n_t..r.end * n_t]);
                w.run_phases(MatvecKind::Forward, shard, cfg, reduce_prec)
            })
            .collect::<Result<Vec<_>>>()?;

        let t0 = Instant::now();
        let leaves: Vec<RealBuf> = partials.iter().map(|(b, _)| b.clone()).collect();
        let d = reduce_bufs(&leaves, reduce_prec)?;
        let reduce_s = t0.elapsed().as_secs_f64();

        let mut stats = merge_stats(partials.iter().map(|(_, s)| s));
        // The root widening is the only cast outside the workers.
        stats.casts += usize::from(reduce_prec != Precision::Double);
        stats.timings.phases[Phase::Unpad.index()] += reduce_s;
        stats.timings.total = start.elapsed().as_secs_f64();
        Ok((BlockVector::from_f64(d, self.dims.n_d, n_t)?, stats))
    }

    fn adjoint(&self, d: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)> {
        let start = Instant::now();
        let n_t = self.dims.n_t;
        let d = self.check(d, self.dims.n_d)?;
        let bcast_prec = cfg.get(Phase::Pad);

        let t0 = Instant::now();
        let payload = match bcast_prec {
            Precision::Double => RealBuf::F64(d.to_vec()),
            Precision::Single => RealBuf::F32(d.iter().map(|&x| x as f32).collect()),
        };
        let bcast_s = t0.elapsed().as_secs_f64();

        let shards = self
            .workers
            .par_iter()
            .map(|w| w.run_phases(MatvecKind::Adjoint, payload.as_slice(), cfg, Precision::Double))
            .collect::<Result<Vec<_>>>()?;

        let mut m = Vec::with_capacity(self.dims.param_len());
        for (buf, _) in &shards {
            // SOTI keeps each worker's parameter rows contiguous.
            let RealBuf::F64(part) = buf else { unreachable!("worker output requested in double") };
            m.extend_from_slice(part);
        }
        let mut stats = merge_stats(shards.iter().map(|(_, s)| s));
        stats.casts += usize::from(bcast_prec != Precision::Double);
        stats.timings.phases[Phase::Pad.index()] += bcast_s;
        stats.timings.total = start.elapsed().as_secs_f64();
        Ok((BlockVector::from_f64(m, self.dims.n_m, n_t)?, stats))
    }
}

/// Critical-path timings (per-phase maximum over workers) and worker 0's
/// cast count and kernel, which every worker shares.
fn merge_stats<'a>(mut it: impl Iterator<Item = &'a MatvecStats>) -> MatvecStats {
    let first = *it.next().expect("grid has at least one worker");
    let mut timings = first.timings;
    for s in it {
        for (a, b) in timings.phases.iter_mut().zip(s.timings.phases) {
            *a = a.max(b);
        }
    }
    MatvecStats { timings: PhaseTimings { total: 0.0, ..timings }, ..first }
}

impl Matvec for PartitionedOperator {
    fn dims(&self) -> ProblemDims {
        self.dims
    }

    fn apply(&self, kind: MatvecKind, input: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)> {
        if input.data().is_complex() {
            return Err(Error::InvalidInput("matvec input must be a time-domain vector".into()));
        }
        match kind {
            MatvecKind::Forward => self.forward(input, cfg),
            MatvecKind::Adjoint => self.adjoint(input, cfg),
        }
    }
}

/// Reassembles worker shards into the full column, for checking.
pub fn unshard(shards: &[BlockColumn]) -> Result<BlockColumn> {
    let first = shards.first().ok_or_else(|| Error::InvalidInput("no shards".into()))?.dims();
    let n_m = shards.iter().map(|s| s.dims().n_m).sum();
    let dims = ProblemDims::new(n_m, first.n_d, first.n_t)?;
    let mut data = Vec::with_capacity(dims.n_d * n_m * dims.n_t);
    for t in 0..dims.n_t {
        for s in shards {
            data.extend_from_slice(s.block(t));
        }
    }
    BlockColumn::new(dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::setup_operator;
    use crate::preclab::{non_representable_fill, relative_error};

    fn problem(n_m: usize, n_d: usize, n_t: usize, seed: u64) -> (BlockColumn, BlockVector, BlockVector) {
        let dims = ProblemDims::new(n_m, n_d, n_t).unwrap();
        let col = BlockColumn::new(dims, non_representable_fill(n_t * n_d * n_m, seed)).unwrap();
        let m = BlockVector::from_f64(non_representable_fill(n_m * n_t, seed + 1), n_m, n_t).unwrap();
        let d = BlockVector::from_f64(non_representable_fill(n_d * n_t, seed + 2), n_d, n_t).unwrap();
        (col, m, d)
    }

    fn bits(v: &BlockVector) -> Vec<u64> {
        v.as_f64().unwrap().iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn grid_ranges() {
        assert_eq!(Grid1xP::new(1, 7).unwrap().ranges(), &[0..7]);
        assert_eq!(Grid1xP::new(2, 4).unwrap().ranges(), &[0..2, 2..4]);
        assert_eq!(Grid1xP::new(3, 5).unwrap().ranges(), &[0..2, 2..4, 4..5]);
        assert!(matches!(Grid1xP::new(6, 5), Err(Error::TooManyWorkers { .. })));
        assert!(Grid1xP::new(0, 5).is_err());
        for n in 1..40 {
            for p in 1..=n {
                let g = Grid1xP::new(p, n).unwrap();
                let sizes: Vec<usize> = g.ranges().iter().map(|r| r.len()).collect();
                assert_eq!(sizes.iter().sum::<usize>(), n);
                assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                assert!(g.ranges().windows(2).all(|w| w[0].end == w[1].start));
            }
        }
    }

    #[test]
    fn shards_reassemble_bitwise() {
        let (col, _, _) = problem(7, 3, 5, 1);
        for p in 1..=7 {
            let shards = shard_operator(&col, &Grid1xP::new(p, 7).unwrap()).unwrap();
            assert_eq!(shards.len(), p);
            let back = unshard(&shards).unwrap();
            assert!(back.data().iter().zip(col.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert!(shard_operator(&col, &Grid1xP::new(2, 6).unwrap()).is_err());
    }

    #[test]
    fn tree_reduce_examples() {
        let four: Vec<Vec<f64>> = (1..=4).map(|k| vec![k as f64; 3]).collect();
        assert_eq!(tree_reduce(&four, Precision::Double).unwrap(), vec![10.0; 3]);
        let one = vec![vec![0.1, 0.2]];
        assert_eq!(tree_reduce(&one, Precision::Double).unwrap(), one[0]);
        assert_eq!(tree_reduce(&one, Precision::Single).unwrap(), vec![0.1f32 as f64, 0.2f32 as f64]);
        assert!(tree_reduce(&[vec![1.0], vec![1.0, 2.0]], Precision::Double).is_err());
        assert!(tree_reduce(&[], Precision::Double).is_err());
    }

    #[test]
    fn tree_shape_is_left_balanced() {
        // 1 + 2^-53 rounds away but 2^-53 + 2^-53 survives, so the grouping
        // of three leaves is visible in the result.
        let e = 2f64.powi(-53);
        let got = tree_reduce(&[vec![1.0], vec![e], vec![e]], Precision::Double).unwrap();
        assert_eq!(got[0], (1.0 + e) + e);
        let got = tree_reduce(&[vec![e], vec![e], vec![1.0]], Precision::Double).unwrap();
        assert_eq!(got[0], (e + e) + 1.0);
    }

    #[test]
    fn tree_reduce_against_sequential_sum() {
        let bufs: Vec<Vec<f64>> = (0..8).map(|k| non_representable_fill(500, 100 + k)).collect();
        let seq: Vec<f64> = (0..500).map(|i| bufs.iter().map(|b| b[i]).sum()).collect();
        let dbl = tree_reduce(&bufs, Precision::Double).unwrap();
        assert!(relative_error(&dbl, &seq).unwrap() <= 1e-13);
        let sgl = tree_reduce(&bufs, Precision::Single).unwrap();
        let e = relative_error(&sgl, &dbl).unwrap();
        assert!(e > 0.0 && e <= 1e-4);
        assert_eq!(tree_reduce(&bufs, Precision::Double).unwrap(), dbl);
    }

    #[test]
    fn single_worker_is_bitwise_serial() {
        let (col, m, d) = problem(9, 3, 8, 5);
        let serial = setup_operator(&col).unwrap();
        let part = PartitionedOperator::new(&col, Grid1xP::new(1, 9).unwrap()).unwrap();
        for cfg in crate::precision::enumerate_configs() {
            let (a, _) = serial.forward_matvec(&m, cfg).unwrap();
            let (b, _) = part.forward_matvec(&m, cfg).unwrap();
            assert_eq!(bits(&a), bits(&b), "forward {cfg}");
            let (a, _) = serial.adjoint_matvec(&d, cfg).unwrap();
            let (b, _) = part.adjoint_matvec(&d, cfg).unwrap();
            assert_eq!(bits(&a), bits(&b), "adjoint {cfg}");
        }
    }

    #[test]
    fn partitioned_matches_serial_in_double() {
        let (col, m, d) = problem(16, 3, 8, 7);
        let serial = setup_operator(&col).unwrap();
        let cfg = PrecisionConfig::ALL_DOUBLE;
        let (fs, _) = serial.forward_matvec(&m, cfg).unwrap();
        let (as_, _) = serial.adjoint_matvec(&d, cfg).unwrap();
        for p in [2, 4, 8, 16] {
            let part = PartitionedOperator::new(&col, Grid1xP::new(p, 16).unwrap()).unwrap();
            let (fp, _) = part.forward_matvec(&m, cfg).unwrap();
            let (ap, _) = part.adjoint_matvec(&d, cfg).unwrap();
            assert!(relative_error(fp.as_f64().unwrap(), fs.as_f64().unwrap()).unwrap() <= 1e-12);
            assert!(relative_error(ap.as_f64().unwrap(), as_.as_f64().unwrap()).unwrap() <= 1e-12);
            // Same worker outputs, same tree: bitwise repeatable.
            assert_eq!(bits(&fp), bits(&part.forward_matvec(&m, cfg).unwrap().0));
        }
    }

    #[test]
    fn broadcast_loss_is_worker_count_independent() {
        let (col, _, d) = problem(16, 3, 8, 11);
        let cfg: PrecisionConfig = "sdddd".parse().unwrap();
        let serial = setup_operator(&col).unwrap();
        let (base, _) = serial.adjoint_matvec(&d, PrecisionConfig::ALL_DOUBLE).unwrap();
        let (one, _) = serial.adjoint_matvec(&d, cfg).unwrap();
        let e1 = relative_error(one.as_f64().unwrap(), base.as_f64().unwrap()).unwrap();
        let part = PartitionedOperator::new(&col, Grid1xP::new(4, 16).unwrap()).unwrap();
        let (four, _) = part.adjoint_matvec(&d, cfg).unwrap();
        let (four_base, _) = part.adjoint_matvec(&d, PrecisionConfig::ALL_DOUBLE).unwrap();
        let e4 = relative_error(four.as_f64().unwrap(), four_base.as_f64().unwrap()).unwrap();
        assert!(e1 > 0.0);
        // Adjoint shards never mix, so each worker reproduces its slice of
        // the serial result exactly.
        assert_eq!(bits(&four), bits(&one));
        assert_eq!(e1, e4);
    }

    #[test]
    fn single_reduce_error_is_small() {
        let (col, m, _) = problem(32, 4, 16, 13);
        let part = PartitionedOperator::new(&col, Grid1xP::new(8, 32).unwrap()).unwrap();
        let (base, _) = part.forward_matvec(&m, PrecisionConfig::ALL_DOUBLE).unwrap();
        let (got, stats) = part.forward_matvec(&m, "dddds".parse().unwrap()).unwrap();
        let e = relative_error(got.as_f64().unwrap(), base.as_f64().unwrap()).unwrap();
        assert!(e > 0.0 && e <= 1e-4, "{e}");
        assert!(stats.casts >= 1);
    }

    #[test]
    fn comm_spec() {
        let dims = ProblemDims::new(8, 3, 5).unwrap();
        let cfg: PrecisionConfig = "sddds".parse().unwrap();
        let r = CommSpec::for_matvec(MatvecKind::Forward, dims, cfg);
        assert_eq!((r.op, r.precision, r.buffer_len, r.bytes()), (CommOp::Reduce, Precision::Single, 15, 60));
        let cfg: PrecisionConfig = "ddddd".parse().unwrap();
        let b = CommSpec::for_matvec(MatvecKind::Adjoint, dims, cfg);
        assert_eq!((b.op, b.bytes()), (CommOp::Broadcast, 120));
    }
}
