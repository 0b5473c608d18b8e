//! Forward (`F`) and adjoint (`F*`) matvecs with per-phase precision.
//!
//! `F` is block lower-triangular Toeplitz, so it is fully described by its
//! first block column `F_1, ..., F_{n_t}` (each `n_d x n_m`). Zero-padding
//! that column to length `2 n_t` gives a block circulant matrix, which the DFT
//! block-diagonalizes into `n_t + 1` complex `n_d x n_m` matrices (one per
//! frequency bin of the real transform). A matvec then runs five phases:
//!
//! 1. zero-pad the input series from `n_t` to `2 n_t`;
//! 2. batched real FFT of the padded series;
//! 3. reorder to bin-major, batched GEMV per bin (`NoTrans` for `F`,
//!    `ConjTrans` for `F*`), reorder back to series-major;
//! 4. batched inverse real FFT;
//! 5. drop the padding, keeping the first `n_t` samples.
//!
//! The working precision starts in double, follows the [`PrecisionConfig`],
//! and ends in double. Every change of precision is fused into the memory
//! pass that sits next to it (pad, reorder, unpad), and those passes read in
//! one phase's precision and write in the next, so a value is never held
//! wider than the narrower of the two adjacent phases.

use std::sync::OnceLock;
use std::time::Instant;

use num_complex::{Complex, Complex32, Complex64};
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    gemv_batched_naive, gemv_batched_tiled, select_kernel, BatchShape, GemvMode, KernelChoice, MatrixBatch,
    TilingParams,
};
use crate::layout::{transpose_map_complex, BlockVector, Domain, Layout, ProblemDims};
use crate::precision::{cast_complex_slice, Phase, Precision, PrecisionConfig};
use crate::scalar::Real;
use crate::spectral::{forward_real_batched_into, inverse_real_batched_into, Direction, FftPlan, FftReal};

/// The first block column of `F`, in double precision.
///
/// Block `t` (0-based, representing `F_{t+1,1}`) is stored column-major at
/// `data[t * n_d * n_m..]`, so entry `(i, j)` of block `t` sits at
/// `t * n_d * n_m + j * n_d + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockColumn {
    dims: ProblemDims,
    data: Vec<f64>,
}

impl BlockColumn {
    pub fn new(dims: ProblemDims, data: Vec<f64>) -> Result<Self> {
        let expected = dims.n_t * dims.n_d * dims.n_m;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "block column length",
                expected,
                actual: data.len(),
            });
        }
        Ok(BlockColumn { dims, data })
    }

    pub fn zeros(dims: ProblemDims) -> Self {
        BlockColumn { dims, data: vec![0.0; dims.n_t * dims.n_d * dims.n_m] }
    }

    pub fn from_fn(dims: ProblemDims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.n_t * dims.n_d * dims.n_m);
        for t in 0..dims.n_t {
            for j in 0..dims.n_m {
                for i in 0..dims.n_d {
                    data.push(f(t, i, j));
                }
            }
        }
        BlockColumn { dims, data }
    }

    pub fn dims(&self) -> ProblemDims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Block `t` as a column-major `n_d x n_m` slice.
    pub fn block(&self, t: usize) -> &[f64] {
        let len = self.dims.n_d * self.dims.n_m;
        &self.data[t * len..(t + 1) * len]
    }

    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.block(t)[j * self.dims.n_d + i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatvecKind {
    Forward,
    Adjoint,
}

impl MatvecKind {
    pub fn name(self) -> &'static str {
        match self {
            MatvecKind::Forward => "forward",
            MatvecKind::Adjoint => "adjoint",
        }
    }
}

/// Wall-clock seconds per phase. Phase 3 includes both reorders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub phases: [f64; 5],
    pub total: f64,
}

impl PhaseTimings {
    pub fn get(&self, phase: Phase) -> f64 {
        self.phases[phase.index()]
    }

    pub fn phase_sum(&self) -> f64 {
        self.phases.iter().sum()
    }

    pub fn largest_phase(&self) -> Phase {
        let mut best = Phase::Pad;
        for p in Phase::ALL {
            if self.get(p) > self.get(best) {
                best = p;
            }
        }
        best
    }
}

/// What one matvec did besides produce its output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatvecStats {
    pub timings: PhaseTimings,
    /// Precision conversions performed on the working vector.
    pub casts: usize,
    pub kernel: KernelChoice,
}

/// Anything that can apply `F` and `F*` to double-precision block vectors.
pub trait Matvec {
    fn dims(&self) -> ProblemDims;

    fn apply(&self, kind: MatvecKind, input: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)>;
}

#[derive(Clone, Debug)]
struct Plans {
    fwd64: FftPlan,
    fwd32: FftPlan,
    inv64: FftPlan,
    inv32: FftPlan,
}

impl Plans {
    fn new(len: usize) -> Result<Self> {
        Ok(Plans {
            fwd64: FftPlan::new(len, 1, Precision::Double, Direction::Forward)?,
            fwd32: FftPlan::new(len, 1, Precision::Single, Direction::Forward)?,
            inv64: FftPlan::new(len, 1, Precision::Double, Direction::Inverse)?,
            inv32: FftPlan::new(len, 1, Precision::Single, Direction::Inverse)?,
        })
    }

    fn get(&self, p: Precision, d: Direction, batch: usize) -> FftPlan {
        let plan = match (p, d) {
            (Precision::Double, Direction::Forward) => &self.fwd64,
            (Precision::Single, Direction::Forward) => &self.fwd32,
            (Precision::Double, Direction::Inverse) => &self.inv64,
            (Precision::Single, Direction::Inverse) => &self.inv32,
        };
        plan.with_batch(batch)
    }
}

/// `F` in the frequency domain: `n_t + 1` complex `n_d x n_m` matrices.
///
/// Bin `k` is stored column-major at `bins[k * n_d * n_m..]`. The double
/// copy is authoritative; a single-precision copy is made on first use.
#[derive(Debug)]
pub struct SpectralOperator {
    dims: ProblemDims,
    bins: Vec<Complex64>,
    single: OnceLock<Vec<Complex32>>,
    plans: Plans,
    tiling: TilingParams,
    dispatch_cols: usize,
}

/// Number of series transformed together during setup.
const SETUP_CHUNK: usize = 1024;

/// Builds the spectral operator from the first block column, in double.
pub fn setup_operator(col: &BlockColumn) -> Result<SpectralOperator> {
    SpectralOperator::new(col)
}

impl SpectralOperator {
    pub fn new(col: &BlockColumn) -> Result<Self> {
        let dims = col.dims;
        let series = dims.n_d * dims.n_m;
        let (len, n_bins) = (dims.fft_len(), dims.n_bins());
        let plans = Plans::new(len)?;
        let mut bins = vec![Complex64::zero(); n_bins * series];

        for s0 in (0..series).step_by(SETUP_CHUNK) {
            let ch = SETUP_CHUNK.min(series - s0);
            let mut padded = vec![0.0f64; ch * len];
            for t in 0..dims.n_t {
                let row = &col.data[t * series + s0..t * series + s0 + ch];
                for (s, &v) in row.iter().enumerate() {
                    padded[s * len + t] = v;
                }
            }
            let mut spec = vec![Complex64::zero(); ch * n_bins];
            forward_real_batched_into(&plans.get(Precision::Double, Direction::Forward, ch), &padded, &mut spec)?;
            bins.par_chunks_mut(series).enumerate().for_each(|(k, row)| {
                for s in 0..ch {
                    row[s0 + s] = spec[s * n_bins + k];
                }
            });
        }

        Ok(SpectralOperator {
            dims,
            bins,
            single: OnceLock::new(),
            plans,
            tiling: TilingParams::default(),
            dispatch_cols: dims.n_m,
        })
    }

    pub fn with_tiling(mut self, tiling: TilingParams) -> Self {
        self.tiling = tiling;
        self
    }

    /// Column count used by kernel dispatch. Shards of a partitioned
    /// operator dispatch as the full operator would.
    pub(crate) fn with_dispatch_cols(mut self, cols: usize) -> Self {
        self.dispatch_cols = cols;
        self
    }

    pub fn dims(&self) -> ProblemDims {
        self.dims
    }

    pub fn tiling(&self) -> &TilingParams {
        &self.tiling
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Frequency bin `k` as a column-major `n_d x n_m` slice.
    pub fn bin(&self, k: usize) -> &[Complex64] {
        let len = self.dims.n_d * self.dims.n_m;
        &self.bins[k * len..(k + 1) * len]
    }

    /// The single-precision copy of the bins, creating it on first call.
    pub fn materialize_single(&self) -> &[Complex32] {
        self.single.get_or_init(|| cast_complex_slice(&self.bins))
    }

    pub fn single_cached(&self) -> Option<&[Complex32]> {
        self.single.get().map(Vec::as_slice)
    }

    /// Kernel the SBGEMV phase uses for `kind`.
    pub fn kernel_for(&self, kind: MatvecKind) -> KernelChoice {
        select_kernel(self.dims.n_d, self.dispatch_cols, gemv_mode(kind), &self.tiling)
    }

    pub fn forward_matvec(&self, m: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)> {
        self.apply(MatvecKind::Forward, m, cfg)
    }

    pub fn adjoint_matvec(&self, d: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)> {
        self.apply(MatvecKind::Adjoint, d, cfg)
    }

    fn io_extents(&self, kind: MatvecKind) -> (usize, usize) {
        match kind {
            MatvecKind::Forward => (self.dims.n_m, self.dims.n_d),
            MatvecKind::Adjoint => (self.dims.n_d, self.dims.n_m),
        }
    }

    fn check_input(&self, kind: MatvecKind, v: &BlockVector) -> Result<()> {
        let (n_in, _) = self.io_extents(kind);
        if v.domain() != Domain::Time {
            return Err(Error::InvalidInput("matvec input must be a time-domain vector".into()));
        }
        if v.layout() != Layout::Soti {
            return Err(Error::InvalidInput("matvec input must be in SOTI layout".into()));
        }
        if v.precision() != Precision::Double {
            return Err(Error::PrecisionMismatch {
                what: "matvec input",
                expected: Precision::Double,
                actual: v.precision(),
            });
        }
        if v.space_extent() != n_in {
            return Err(Error::DimensionMismatch {
                what: "matvec input space extent",
                expected: n_in,
                actual: v.space_extent(),
            });
        }
        if v.time_extent() != self.dims.n_t {
            return Err(Error::DimensionMismatch {
                what: "matvec input time extent",
                expected: self.dims.n_t,
                actual: v.time_extent(),
            });
        }
        Ok(())
    }

    /// Runs all five phases on `input` (`n_in` series of `n_t` samples,
    /// series-major) and returns the unpadded output in `out_prec`.
    ///
    /// Phase 5 rounds through `cfg`'s unpad precision before writing
    /// `out_prec`, so a partitioned worker can hand its partial result to a
    /// reduction in that precision and a serial run can widen straight to
    /// double in the same pass.
    pub(crate) fn run_phases(
        &self,
        kind: MatvecKind,
        input: RealSlice<'_>,
        cfg: PrecisionConfig,
        out_prec: Precision,
    ) -> Result<(RealBuf, MatvecStats)> {
        let (n_in, n_out) = self.io_extents(kind);
        let dims = self.dims;
        let (n_t, len, n_bins) = (dims.n_t, dims.fft_len(), dims.n_bins());
        let p = cfg.phases();
        let mut timings = PhaseTimings::default();
        let mut casts = 0;
        let start = Instant::now();

        // 1. Zero-pad, landing directly in the FFT's precision.
        let t0 = Instant::now();
        casts += usize::from(input.precision() != p[0]) + usize::from(p[0] != p[1]);
        let padded = input.pad(n_in, n_t, len, p[0], p[1]);
        timings.phases[0] = t0.elapsed().as_secs_f64();

        // 2. Batched FFT.
        let t0 = Instant::now();
        let plan = self.plans.get(p[1], Direction::Forward, n_in);
        let spec = padded.forward(&plan, n_bins)?;
        drop(padded);
        timings.phases[1] = t0.elapsed().as_secs_f64();

        // 3. Reorder to bin-major, SBGEMV per bin, reorder back.
        let t0 = Instant::now();
        casts += usize::from(p[1] != p[2]);
        let bin_major = spec.transpose_to(n_in, n_bins, p[2]);
        drop(spec);
        let kernel = self.kernel_for(kind);
        let products = self.sbgemv(kind, &bin_major, kernel)?;
        drop(bin_major);
        casts += usize::from(p[2] != p[3]);
        let series_major = products.transpose_to(n_bins, n_out, p[3]);
        drop(products);
        timings.phases[2] = t0.elapsed().as_secs_f64();

        // 4. Batched inverse FFT.
        let t0 = Instant::now();
        let plan = self.plans.get(p[3], Direction::Inverse, n_out);
        let series = series_major.inverse(&plan, len)?;
        drop(series_major);
        timings.phases[3] = t0.elapsed().as_secs_f64();

        // 5. Truncate to the first n_t samples.
        let t0 = Instant::now();
        casts += usize::from(p[3] != p[4]) + usize::from(p[4] != out_prec);
        let out = series.unpad(n_out, len, n_t, p[4], out_prec);
        drop(series);
        timings.phases[4] = t0.elapsed().as_secs_f64();

        timings.total = start.elapsed().as_secs_f64();
        Ok((out, MatvecStats { timings, casts, kernel }))
    }

    fn sbgemv(&self, kind: MatvecKind, x: &ComplexBuf, kernel: KernelChoice) -> Result<ComplexBuf> {
        match x {
            ComplexBuf::C64(x) => Ok(ComplexBuf::C64(self.sbgemv_typed(kind, &self.bins, x, kernel)?)),
            ComplexBuf::C32(x) => {
                Ok(ComplexBuf::C32(self.sbgemv_typed(kind, self.materialize_single(), x, kernel)?))
            }
        }
    }

    fn sbgemv_typed<T: Real>(
        &self,
        kind: MatvecKind,
        a: &[Complex<T>],
        x: &[Complex<T>],
        kernel: KernelChoice,
    ) -> Result<Vec<Complex<T>>> {
        let mode = gemv_mode(kind);
        let shape = BatchShape::packed(self.dims.n_d, self.dims.n_m, self.dims.n_bins(), mode);
        let (_, y_len) = shape.lens(mode);
        let mut y = vec![Complex::zero(); y_len * shape.batch];
        let batch = MatrixBatch::new(a, shape);
        match kernel {
            KernelChoice::Naive => gemv_batched_naive(mode, &batch, x, &mut y)?,
            KernelChoice::Tiled => gemv_batched_tiled(mode, &batch, x, &mut y, &self.tiling)?,
        }
        Ok(y)
    }
}

impl Matvec for SpectralOperator {
    fn dims(&self) -> ProblemDims {
        self.dims
    }

    fn apply(&self, kind: MatvecKind, input: &BlockVector, cfg: PrecisionConfig) -> Result<(BlockVector, MatvecStats)> {
        self.check_input(kind, input)?;
        let data = input.as_f64().expect("checked double time-domain input");
        let (out, stats) = self.run_phases(kind, RealSlice::F64(data), cfg, Precision::Double)?;
        let (_, n_out) = self.io_extents(kind);
        let RealBuf::F64(out) = out else { unreachable!("serial output is double") };
        Ok((BlockVector::from_f64(out, n_out, self.dims.n_t)?, stats))
    }
}

pub(crate) fn gemv_mode(kind: MatvecKind) -> GemvMode {
    match kind {
        MatvecKind::Forward => GemvMode::NoTrans,
        MatvecKind::Adjoint => GemvMode::ConjTrans,
    }
}

/// Borrowed real working vector.
#[derive(Clone, Copy, Debug)]
pub(crate) enum RealSlice<'a> {
    F64(&'a [f64]),
    F32(&'a [f32]),
}

/// Owned real working vector.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum RealBuf {
    F64(Vec<f64>),
    F32(Vec<f32>),
}

#[derive(Clone, Debug)]
enum ComplexBuf {
    C64(Vec<Complex64>),
    C32(Vec<Complex32>),
}

impl RealSlice<'_> {
    pub(crate) fn precision(&self) -> Precision {
        match self {
            RealSlice::F64(_) => Precision::Double,
            RealSlice::F32(_) => Precision::Single,
        }
    }

    fn pad(&self, n: usize, n_t: usize, len: usize, via: Precision, out: Precision) -> RealBuf {
        match (*self, out) {
            (RealSlice::F64(s), Precision::Double) => RealBuf::F64(pad_cast(s, n, n_t, len, via)),
            (RealSlice::F64(s), Precision::Single) => RealBuf::F32(pad_cast(s, n, n_t, len, via)),
            (RealSlice::F32(s), Precision::Double) => RealBuf::F64(pad_cast(s, n, n_t, len, via)),
            (RealSlice::F32(s), Precision::Single) => RealBuf::F32(pad_cast(s, n, n_t, len, via)),
        }
    }
}

impl RealBuf {
    pub(crate) fn as_slice(&self) -> RealSlice<'_> {
        match self {
            RealBuf::F64(v) => RealSlice::F64(v),
            RealBuf::F32(v) => RealSlice::F32(v),
        }
    }

    fn forward(&self, plan: &FftPlan, n_bins: usize) -> Result<ComplexBuf> {
        Ok(match self {
            RealBuf::F64(v) => ComplexBuf::C64(fft_typed(plan, v, n_bins)?),
            RealBuf::F32(v) => ComplexBuf::C32(fft_typed(plan, v, n_bins)?),
        })
    }

    fn unpad(&self, n: usize, len: usize, n_t: usize, via: Precision, out: Precision) -> RealBuf {
        match (self, out) {
            (RealBuf::F64(s), Precision::Double) => RealBuf::F64(unpad_cast(s, n, len, n_t, via)),
            (RealBuf::F64(s), Precision::Single) => RealBuf::F32(unpad_cast(s, n, len, n_t, via)),
            (RealBuf::F32(s), Precision::Double) => RealBuf::F64(unpad_cast(s, n, len, n_t, via)),
            (RealBuf::F32(s), Precision::Single) => RealBuf::F32(unpad_cast(s, n, len, n_t, via)),
        }
    }
}

impl ComplexBuf {
    /// Transposes a row-major `rows x cols` matrix, casting to `to`.
    fn transpose_to(&self, rows: usize, cols: usize, to: Precision) -> ComplexBuf {
        match (self, to) {
            (ComplexBuf::C64(s), Precision::Double) => ComplexBuf::C64(transpose_cast(s, rows, cols)),
            (ComplexBuf::C64(s), Precision::Single) => ComplexBuf::C32(transpose_cast(s, rows, cols)),
            (ComplexBuf::C32(s), Precision::Double) => ComplexBuf::C64(transpose_cast(s, rows, cols)),
            (ComplexBuf::C32(s), Precision::Single) => ComplexBuf::C32(transpose_cast(s, rows, cols)),
        }
    }

    fn inverse(&self, plan: &FftPlan, len: usize) -> Result<RealBuf> {
        Ok(match self {
            ComplexBuf::C64(v) => RealBuf::F64(ifft_typed(plan, v, len)?),
            ComplexBuf::C32(v) => RealBuf::F32(ifft_typed(plan, v, len)?),
        })
    }
}

fn pad_cast<T: Real, U: Real>(src: &[T], n: usize, n_t: usize, len: usize, via: Precision) -> Vec<U> {
    let mut out = vec![U::zero(); n * len];
    out.par_chunks_mut(len).zip(src.par_chunks(n_t)).for_each(|(dst, s)| {
        for (d, &x) in dst[..n_t].iter_mut().zip(s) {
            *d = U::from_double(via.round(x.to_double()));
        }
    });
    out
}

fn unpad_cast<T: Real, U: Real>(src: &[T], n: usize, len: usize, n_t: usize, via: Precision) -> Vec<U> {
    let mut out = vec![U::zero(); n * n_t];
    out.par_chunks_mut(n_t).zip(src.par_chunks(len)).for_each(|(dst, s)| {
        for (d, &x) in dst.iter_mut().zip(&s[..n_t]) {
            *d = U::from_double(via.round(x.to_double()));
        }
    });
    out
}

fn transpose_cast<T: Real, U: Real>(src: &[Complex<T>], rows: usize, cols: usize) -> Vec<Complex<U>> {
    let mut dst = vec![Complex::<U>::zero(); rows * cols];
    transpose_map_complex(src, rows, cols, &mut dst, |x: T| x.cast::<U>());
    dst
}

fn fft_typed<T: FftReal>(plan: &FftPlan, src: &[T], n_bins: usize) -> Result<Vec<Complex<T>>> {
    let mut out = vec![Complex::zero(); plan.batch() * n_bins];
    forward_real_batched_into(plan, src, &mut out)?;
    Ok(out)
}

fn ifft_typed<T: FftReal>(plan: &FftPlan, src: &[Complex<T>], len: usize) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); plan.batch() * len];
    inverse_real_batched_into(plan, src, &mut out)?;
    Ok(out)
}
