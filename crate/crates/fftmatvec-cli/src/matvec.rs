//! The `fft_matvec` driver: build a synthetic operator, time both matvecs
//! or sweep all precision configs, and report.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use fftmatvec::io::save_vector;
use fftmatvec::partition::{Grid1xP, PartitionedOperator};
use fftmatvec::preclab::{non_representable_fill, time_config, uniform_fill, PhaseStats, SweepReport};
use fftmatvec::report::{phase_rows, phase_table, sweep_table, write_phase_csv, write_sweep_csv, PhaseRow};
use fftmatvec::{setup_operator, BlockColumn, BlockVector, Error, Matvec, MatvecKind, PrecisionConfig, ProblemDims};

use crate::{clap_exit, normalize_args, EXIT_FAILURE, EXIT_USAGE};

pub const DEFAULT_SEED: u64 = 20_240_601;

pub const LONG_FLAGS: &[&str] = &["nm", "nd", "Nt", "prec", "rand", "raw", "reps", "warmup", "tol", "sweep", "seed"];

#[derive(Parser, Debug, Clone)]
#[command(name = "fft_matvec", about = "Time FFT-based block-Toeplitz matvecs under mixed precision")]
pub struct RunArgs {
    /// Parameter dimension per time step.
    #[arg(long = "nm", default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_m: u64,
    /// Data dimension per time step.
    #[arg(long = "nd", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_d: u64,
    /// Number of time steps.
    #[arg(long = "Nt", default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_t: u64,
    /// Five-character phase precision config, e.g. dssdd. Default ddddd.
    #[arg(long = "prec", value_parser = parse_config)]
    pub prec: Option<PrecisionConfig>,
    /// Fill with doubles that are not representable in single precision.
    #[arg(long = "rand")]
    pub rand: bool,
    /// Machine-readable CSV output.
    #[arg(long = "raw")]
    pub raw: bool,
    /// Directory to save output vectors to.
    #[arg(short = 's', value_name = "DIR")]
    pub save_dir: Option<PathBuf>,
    /// Number of simulated workers in a 1 x p grid.
    #[arg(short = 'p', default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Timed repetitions per matvec.
    #[arg(long = "reps", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// Untimed runs before timing.
    #[arg(long = "warmup", default_value_t = 2)]
    pub warmup: u64,
    /// Relative error tolerance for choosing a config in a sweep.
    #[arg(long = "tol", default_value_t = 1e-7, value_parser = parse_tol)]
    pub tol: f64,
    /// Sweep all 32 configs and choose the fastest within tolerance.
    #[arg(long = "sweep")]
    pub sweep: bool,
    /// Seed for the synthetic operator and input vectors.
    #[arg(long = "seed", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

fn parse_config(s: &str) -> Result<PrecisionConfig, String> {
    s.parse::<PrecisionConfig>().map_err(|e| e.to_string())
}

fn parse_tol(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t >= 0.0 && t.is_finite() => Ok(t),
        Ok(t) => Err(format!("tolerance must be finite and non-negative, got {t}")),
        Err(e) => Err(e.to_string()),
    }
}

impl RunArgs {
    pub fn parse_from_argv<I, S>(argv: I) -> Result<Self, clap::Error>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RunArgs::try_parse_from(normalize_args(argv, LONG_FLAGS))
    }

    pub fn dims(&self) -> Result<ProblemDims, Error> {
        ProblemDims::new(self.n_m as usize, self.n_d as usize, self.n_t as usize)
    }

    fn fill(&self, count: usize, stream: u64) -> Vec<f64> {
        let seed = self.seed.wrapping_add(stream);
        if self.rand {
            non_representable_fill(count, seed)
        } else {
            uniform_fill(count, seed)
        }
    }

    /// The synthetic block column and the forward and adjoint inputs.
    pub fn problem(&self) -> Result<(BlockColumn, BlockVector, BlockVector), Error> {
        let dims = self.dims()?;
        let col = BlockColumn::new(dims, self.fill(dims.n_t * dims.n_d * dims.n_m, 0))?;
        let m = BlockVector::from_f64(self.fill(dims.param_len(), 1), dims.n_m, dims.n_t)?;
        let d = BlockVector::from_f64(self.fill(dims.data_len(), 2), dims.n_d, dims.n_t)?;
        Ok((col, m, d))
    }
}

/// Parses `argv` (program name first), runs, and returns the exit status.
pub fn main_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args = match RunArgs::parse_from_argv(argv) {
        Ok(a) => a,
        Err(e) => return clap_exit(e, out, err),
    };
    if args.workers > args.n_m {
        let _ = writeln!(err, "error: -p {} exceeds -nm {}: every worker needs a column", args.workers, args.n_m);
        return EXIT_USAGE;
    }
    match run(&args, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn operator(args: &RunArgs, col: &BlockColumn) -> Result<Box<dyn Matvec>, Error> {
    if args.workers == 1 {
        Ok(Box::new(setup_operator(col)?))
    } else {
        let grid = Grid1xP::new(args.workers as usize, col.dims().n_m)?;
        Ok(Box::new(PartitionedOperator::new(col, grid)?))
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Error> {
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Runs the timing or sweep experiment described by `args`.
pub fn run(args: &RunArgs, out: &mut dyn Write) -> Result<(), Error> {
    let (col, m, d) = args.problem()?;
    let op = operator(args, &col)?;
    if let Some(dir) = &args.save_dir {
        fs::create_dir_all(dir)?;
    }
    let inputs = [(MatvecKind::Forward, &m), (MatvecKind::Adjoint, &d)];
    let (reps, warmup) = (args.reps as usize, args.warmup as usize);
    let dims = col.dims();
    let header = format!(
        "# nm={} nd={} Nt={} p={} reps={} warmup={} seed={} fill={}",
        dims.n_m,
        dims.n_d,
        dims.n_t,
        args.workers,
        reps,
        warmup,
        args.seed,
        if args.rand { "nonrepresentable" } else { "uniform" }
    );

    if !args.sweep {
        let cfg = args.prec.unwrap_or(PrecisionConfig::ALL_DOUBLE);
        let mut rows: Vec<PhaseRow> = Vec::new();
        for (kind, input) in inputs {
            let (output, runs) = time_config(op.as_ref(), input, kind, cfg, reps, warmup)?;
            rows.extend(phase_rows(kind, &PhaseStats::from_runs(&runs)));
            if let Some(dir) = &args.save_dir {
                save(dir, &format!("{}_{cfg}.fmv", kind.name()), &output)?;
            }
        }
        if args.raw {
            write_out(out, &write_phase_csv(&rows)?)?;
        } else {
            write_out(out, &format!("{}\n# prec={cfg}\n\n", &header[2..]))?;
            write_out(out, &phase_table(&rows))?;
        }
        return Ok(());
    }

    if args.raw {
        write_out(out, &format!("{header} tol={:e}\n", args.tol))?;
    } else {
        write_out(out, &format!("{} tol={:e}\n", &header[2..], args.tol))?;
    }
    for (kind, input) in inputs {
        let report = SweepReport::run(op.as_ref(), input, kind, reps, warmup, args.tol)?;
        if args.raw {
            write_out(out, &format!("# matvec={} chosen={}\n", kind.name(), report.chosen))?;
            write_out(out, &write_sweep_csv(&report.rows)?)?;
        } else {
            let chosen = report.chosen_row();
            write_out(
                out,
                &format!(
                    "\n{} matvec: chosen {} (rel_error {:.3e}, {:.2}x vs ddddd)\n",
                    kind.name(),
                    report.chosen,
                    chosen.rel_error,
                    report.speedup()
                ),
            )?;
            write_out(out, &sweep_table(&report.rows, Some(report.chosen)))?;
        }
        if let Some(dir) = &args.save_dir {
            let mut configs = vec![PrecisionConfig::ALL_DOUBLE];
            if report.chosen != PrecisionConfig::ALL_DOUBLE {
                configs.push(report.chosen);
            }
            for cfg in configs {
                let (output, _) = op.apply(kind, input, cfg)?;
                save(dir, &format!("{}_{cfg}.fmv", kind.name()), &output)?;
            }
        }
    }
    Ok(())
}

fn save(dir: &Path, name: &str, v: &BlockVector) -> Result<(), Error> {
    save_vector(dir.join(name), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let a = RunArgs::parse_from_argv(["fft_matvec"]).unwrap();
        assert_eq!((a.n_m, a.n_d, a.n_t, a.reps, a.warmup, a.workers), (5000, 100, 1000, 100, 2, 1));
        assert_eq!(a.tol, 1e-7);
        assert_eq!(a.seed, DEFAULT_SEED);
        assert!(a.prec.is_none() && !a.rand && !a.raw && !a.sweep && a.save_dir.is_none());
    }

    #[test]
    fn single_dash_flags() {
        let a = RunArgs::parse_from_argv([
            "fft_matvec", "-nm", "50", "-nd", "5", "-Nt", "16", "-prec", "dssdd", "-rand", "-raw", "-s", "/tmp/x", "-p", "2",
            "-reps", "3", "-warmup", "0", "-tol", "1e-5", "-sweep", "-seed", "7",
        ])
        .unwrap();
        assert_eq!((a.n_m, a.n_d, a.n_t, a.workers, a.reps, a.warmup, a.seed), (50, 5, 16, 2, 3, 0, 7));
        assert_eq!(a.prec.unwrap().to_string(), "dssdd");
        assert!(a.rand && a.raw && a.sweep);
        assert_eq!(a.tol, 1e-5);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        for argv in [
            vec!["fft_matvec", "-prec", "xyzzy"],
            vec!["fft_matvec", "-nm", "0"],
            vec!["fft_matvec", "-tol", "-1"],
            vec!["fft_matvec", "-reps", "0"],
            vec!["fft_matvec", "-bogus"],
        ] {
            let (mut out, mut err) = (Vec::new(), Vec::new());
            assert_eq!(main_with(argv.clone(), &mut out, &mut err), EXIT_USAGE, "{argv:?}");
        }
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["fft_matvec", "-nm", "2", "-p", "3"], &mut out, &mut err), EXIT_USAGE);
    }
}
