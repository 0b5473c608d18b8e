//! The `sbgemv_bench` driver: time naive and tiled strided batched GEMV on
//! benchmark rows and report achieved bandwidth.

use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use fftmatvec::kernels::{
    effective_bandwidth, gemv_batched_naive, gemv_batched_tiled, BatchShape, BenchConfig, BenchDtype,
    KernelChoice, MatrixBatch, TilingParams,
};
use fftmatvec::preclab::uniform_fill;
use fftmatvec::scalar::Element;
use fftmatvec::Error;
use fftmatvec::Result;
use num_complex::Complex;

use crate::{clap_exit, normalize_args, EXIT_FAILURE};

pub const LONG_FLAGS: &[&str] = &["raw", "tile", "chunk", "seed"];

pub const CSV_HEADER: &str = "M,N,batch,transA,dtype,kernel,seconds,gb_s";

#[derive(Parser, Debug, Clone)]
#[command(name = "sbgemv_bench", about = "Bandwidth of naive vs tiled strided batched GEMV")]
pub struct BenchArgs {
    /// File of benchmark rows, one `key: value, ...` problem per line. `-` reads stdin.
    pub rows: PathBuf,
    /// Machine-readable CSV output.
    #[arg(long = "raw")]
    pub raw: bool,
    /// Tiled kernel columns per task.
    #[arg(long = "tile", default_value_t = TilingParams::default().col_tile)]
    pub tile: usize,
    /// Tiled kernel rows per partial sum.
    #[arg(long = "chunk", default_value_t = TilingParams::default().row_chunk)]
    pub chunk: usize,
    #[arg(long = "seed", default_value_t = 1)]
    pub seed: u64,
}

/// One timed kernel on one row.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub kernel: KernelChoice,
    /// Mean seconds per batched call.
    pub seconds: f64,
    pub gb_s: f64,
}

/// Raises strides that would make consecutive batch entries overlap.
///
/// Returns the adjusted row and whether anything changed. Published rows
/// sometimes record `stride_y = M` for transpose problems whose output has
/// `N` elements; the kernels require disjoint outputs.
pub fn clamp_strides(c: &BenchConfig) -> (BenchConfig, bool) {
    let mut out = c.clone();
    let (x_len, y_len) = if c.trans.is_transpose() { (c.m, c.n) } else { (c.n, c.m) };
    out.lda = out.lda.max(c.m.max(1));
    out.stride_a = out.stride_a.max(out.lda * c.n);
    out.stride_x = out.stride_x.max(x_len);
    out.stride_y = out.stride_y.max(y_len);
    let changed = out != *c;
    (out, changed)
}

fn shape(c: &BenchConfig) -> BatchShape {
    BatchShape {
        rows: c.m,
        cols: c.n,
        batch: c.batch_count,
        lda: c.lda,
        stride_a: c.stride_a,
        stride_x: c.stride_x,
        stride_y: c.stride_y,
    }
}

fn time_kernel<T: Element>(
    c: &BenchConfig,
    kernel: KernelChoice,
    params: &TilingParams,
    a: &[T],
    x: &[T],
    y: &mut [T],
) -> Result<f64> {
    let batch = MatrixBatch::new(a, shape(c));
    let call = |y: &mut [T]| match kernel {
        KernelChoice::Naive => gemv_batched_naive(c.trans, &batch, x, y),
        KernelChoice::Tiled => gemv_batched_tiled(c.trans, &batch, x, y, params),
    };
    for _ in 0..c.cold_iters {
        call(y)?;
    }
    let iters = c.iters.max(1);
    let start = Instant::now();
    for _ in 0..iters {
        call(y)?;
    }
    Ok(start.elapsed().as_secs_f64() / iters as f64)
}

fn run_typed<T: Element>(
    c: &BenchConfig,
    params: &TilingParams,
    seed: u64,
    make: impl Fn(f64, f64) -> T,
) -> Result<Vec<BenchResult>> {
    let s = shape(c);
    let (x_len, y_len) = s.lens(c.trans);
    let last = c.batch_count.saturating_sub(1);
    let a_len = last * c.stride_a + c.lda * c.n;
    let x_total = last * c.stride_x + x_len;
    let y_total = last * c.stride_y + y_len;
    let pairs = |n: usize, stream: u64| -> Vec<T> {
        let v = uniform_fill(2 * n, seed.wrapping_add(stream));
        v.chunks_exact(2).map(|p| make(p[0], p[1])).collect()
    };
    let a = pairs(a_len, 0);
    let x = pairs(x_total, 1);
    let mut y = vec![T::zero(); y_total];

    let mut kernels = vec![KernelChoice::Naive];
    if c.trans.is_transpose() {
        kernels.push(KernelChoice::Tiled);
    }
    kernels
        .into_iter()
        .map(|kernel| {
            let seconds = time_kernel(c, kernel, params, &a, &x, &mut y)?;
            let gb_s = effective_bandwidth(c.m, c.n, c.batch_count, c.dtype.elem_bytes(), seconds.max(f64::MIN_POSITIVE))?;
            Ok(BenchResult { config: c.clone(), kernel, seconds, gb_s })
        })
        .collect()
}

/// Times every applicable kernel on one (already clamped) row.
pub fn bench_row(c: &BenchConfig, params: &TilingParams, seed: u64) -> Result<Vec<BenchResult>> {
    match c.dtype {
        BenchDtype::S => run_typed(c, params, seed, |re, _| re as f32),
        BenchDtype::D => run_typed(c, params, seed, |re, _| re),
        BenchDtype::C => run_typed(c, params, seed, |re, im| Complex::new(re as f32, im as f32)),
        BenchDtype::Z => run_typed(c, params, seed, Complex::new),
    }
}

fn kernel_name(k: KernelChoice) -> &'static str {
    match k {
        KernelChoice::Naive => "naive",
        KernelChoice::Tiled => "tiled",
    }
}

pub fn results_csv(results: &[BenchResult]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in results {
        let c = &r.config;
        out += &format!(
            "{},{},{},{},{},{},{:e},{}\n",
            c.m,
            c.n,
            c.batch_count,
            c.trans.code(),
            c.dtype.code(),
            kernel_name(r.kernel),
            r.seconds,
            r.gb_s
        );
    }
    out
}

pub fn main_with<I, S>(argv: I, input: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args = match BenchArgs::try_parse_from(normalize_args(argv, LONG_FLAGS)) {
        Ok(a) => a,
        Err(e) => return clap_exit(e, out, err),
    };
    match run(&args, input, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn run(args: &BenchArgs, input: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let params = TilingParams { col_tile: args.tile, row_chunk: args.chunk, ..TilingParams::default() };
    params.validate()?;
    let text = if args.rows.as_os_str() == "-" {
        let mut s = String::new();
        input.read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(&args.rows)?
    };
    let rows = BenchConfig::parse_rows(&text)?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("no benchmark rows".into()));
    }
    let mut results = Vec::new();
    for row in &rows {
        let (row, changed) = clamp_strides(row);
        if changed {
            writeln!(err, "note: strides raised to avoid overlap: {row}")?;
        }
        results.extend(bench_row(&row, &params, args.seed)?);
    }
    if args.raw {
        out.write_all(results_csv(&results).as_bytes())?;
    } else {
        writeln!(out, "{:>6} {:>6} {:>6} {:>2} {:>2} {:>6} {:>12} {:>10}", "M", "N", "batch", "op", "dt", "kernel", "time (s)", "GB/s")?;
        for r in &results {
            let c = &r.config;
            writeln!(
                out,
                "{:>6} {:>6} {:>6} {:>2} {:>2} {:>6} {:>12.4e} {:>10.3}",
                c.m,
                c.n,
                c.batch_count,
                c.trans.code(),
                c.dtype.code(),
                kernel_name(r.kernel),
                r.seconds,
                r.gb_s
            )?;
        }
    }
    Ok(())
}
