//! Mixed-precision experiments: test data, error metric, the 32-config
//! sweep, and Pareto-front selection of the fastest config under a tolerance.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{BlockVector, ProblemDims};
use crate::pipeline::{Matvec, MatvecKind, PhaseTimings};
use crate::precision::{enumerate_configs, PrecisionConfig};

/// Significand bits that `f32` drops from an `f64`.
const DROPPED_BITS: u64 = (1 << 29) - 1;
const SIGN_BIT: u64 = 1 << 63;
/// Biased exponent of `[0.5, 1)`.
const HALF_EXPONENT: u64 = 1022 << 52;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Doubles that no `f32` can represent.
///
/// Each value has a random sign, a magnitude drawn uniformly from the
/// doubles in `[0.5, 1)`, and the low 29 significand bits forced to one, so
/// narrowing to `f32` always rounds. The generator is ChaCha8 seeded through
/// `seed_from_u64(seed)`; one `u64` draw is consumed per value (bit 63 is the
/// sign, the low 52 bits the significand).
pub fn non_representable_fill(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let r: u64 = rng.random();
            let significand = (r & ((1 << 52) - 1)) | DROPPED_BITS;
            f64::from_bits((r & SIGN_BIT) | HALF_EXPONENT | significand)
        })
        .collect()
}

/// Seeded doubles uniform in `[-1, 1)`.
pub fn uniform_fill(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..count).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `||x - reference||_2 / ||reference||_2`, accumulated in double.
pub fn relative_error(x: &[f64], reference: &[f64]) -> Result<f64> {
    if x.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            what: "relative_error operand",
            expected: reference.len(),
            actual: x.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&a, &b) in x.iter().zip(reference) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok((num / den).sqrt())
}

/// One row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub config: PrecisionConfig,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub rel_error: f64,
}

/// Mean and extremes of a set of timings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return TimingStats::default();
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Summation rounding can push the mean a hair outside [min, max].
        TimingStats { mean_s: mean.clamp(min, max), min_s: min, max_s: max }
    }
}

/// Per-phase and total timing statistics over repeated runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub phases: [TimingStats; 5],
    pub total: TimingStats,
}

impl PhaseStats {
    pub fn from_runs(runs: &[PhaseTimings]) -> Self {
        let mut phases = [TimingStats::default(); 5];
        for (i, p) in phases.iter_mut().enumerate() {
            let v: Vec<f64> = runs.iter().map(|r| r.phases[i]).collect();
            *p = TimingStats::from_samples(&v);
        }
        let totals: Vec<f64> = runs.iter().map(|r| r.total).collect();
        PhaseStats { phases, total: TimingStats::from_samples(&totals) }
    }
}

/// Output of one config plus its timings, with `warmup` untimed runs first.
pub fn time_config<O: Matvec + ?Sized>(
    op: &O,
    input: &BlockVector,
    kind: MatvecKind,
    cfg: PrecisionConfig,
    repetitions: usize,
    warmup: usize,
) -> Result<(BlockVector, Vec<PhaseTimings>)> {
    if repetitions == 0 {
        return Err(Error::InvalidInput("repetitions must be at least 1".into()));
    }
    for _ in 0..warmup {
        op.apply(kind, input, cfg)?;
    }
    let mut runs = Vec::with_capacity(repetitions);
    let mut output = None;
    for _ in 0..repetitions {
        let (out, stats) = op.apply(kind, input, cfg)?;
        runs.push(stats.timings);
        output = Some(out);
    }
    Ok((output.expect("at least one repetition"), runs))
}

/// Runs all 32 configs on `input`, in [`enumerate_configs`] order.
///
/// `"ddddd"` runs first and its output is the reference for every row's
/// `rel_error`. Configs run one after another so timings do not overlap.
pub fn sweep_configs<O: Matvec + ?Sized>(
    op: &O,
    input: &BlockVector,
    kind: MatvecKind,
    repetitions: usize,
    warmup: usize,
) -> Result<Vec<ConfigResult>> {
    let configs = enumerate_configs();
    debug_assert!(configs[0].is_all_double());
    let mut baseline: Option<Vec<f64>> = None;
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let (out, runs) = time_config(op, input, kind, cfg, repetitions, warmup)?;
        let out = out.as_f64().expect("matvec output is double").to_vec();
        let reference = baseline.get_or_insert_with(|| out.clone());
        let rel_error = if cfg.is_all_double() {
            0.0
        } else {
            match relative_error(&out, reference) {
                Ok(e) => e,
                // All-zero baseline: any nonzero output is an unbounded error.
                Err(Error::ZeroNormReference) => {
                    if out.iter().all(|&v| v == 0.0) {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                }
                Err(e) => return Err(e),
            }
        };
        let totals: Vec<f64> = runs.iter().map(|r| r.total).collect();
        let t = TimingStats::from_samples(&totals);
        rows.push(ConfigResult { config: cfg, mean_s: t.mean_s, min_s: t.min_s, max_s: t.max_s, rel_error });
    }
    Ok(rows)
}

/// `r` dominates `q`: no worse on both axes, strictly better on one.
pub fn dominates(r: &ConfigResult, q: &ConfigResult) -> bool {
    r.mean_s <= q.mean_s && r.rel_error <= q.rel_error && (r.mean_s < q.mean_s || r.rel_error < q.rel_error)
}

/// Results not dominated in `(mean_s, rel_error)`, in input order.
///
/// Sort-and-sweep, `O(n log n)`. Identical points do not dominate each other,
/// so duplicates on the front are all kept.
pub fn pareto_front(results: &[ConfigResult]) -> Vec<ConfigResult> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&results[a], &results[b]);
        ra.mean_s.total_cmp(&rb.mean_s).then(ra.rel_error.total_cmp(&rb.rel_error))
    });

    let mut keep = vec![false; results.len()];
    // Lowest error among strictly faster groups.
    let mut best_faster = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let mean = results[order[i]].mean_s;
        let mut j = i;
        while j < order.len() && results[order[j]].mean_s == mean {
            j += 1;
        }
        // Sorted by error within the group, so the first is the group minimum.
        let group_min = results[order[i]].rel_error;
        if group_min < best_faster {
            for &idx in &order[i..j] {
                if results[idx].rel_error == group_min {
                    keep[idx] = true;
                }
            }
        }
        best_faster = best_faster.min(group_min);
        i = j;
    }
    results.iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r.clone()).collect()
}

fn selection_order(a: &ConfigResult, b: &ConfigResult) -> Ordering {
    a.mean_s
        .total_cmp(&b.mean_s)
        .then(a.rel_error.total_cmp(&b.rel_error))
        .then_with(|| a.config.to_string().cmp(&b.config.to_string()))
}

/// Fastest config whose error is at most `tolerance`.
///
/// Ties on time go to the lower error, then to the lexicographically smaller
/// config string. The comparison is inclusive: an error exactly equal to
/// the tolerance qualifies.
pub fn optimal_config(results: &[ConfigResult], tolerance: f64) -> Result<PrecisionConfig> {
    results
        .iter()
        .filter(|r| r.rel_error <= tolerance)
        .min_by(|a, b| selection_order(a, b))
        .map(|r| r.config)
        .ok_or(Error::NoFeasibleConfig(tolerance))
}

/// A complete sweep for one matvec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dims: ProblemDims,
    pub kind: MatvecKind,
    pub repetitions: usize,
    pub warmup: usize,
    pub tolerance: f64,
    pub rows: Vec<ConfigResult>,
    pub chosen: PrecisionConfig,
}

impl SweepReport {
    pub fn run<O: Matvec + ?Sized>(
        op: &O,
        input: &BlockVector,
        kind: MatvecKind,
        repetitions: usize,
        warmup: usize,
        tolerance: f64,
    ) -> Result<Self> {
        let rows = sweep_configs(op, input, kind, repetitions, warmup)?;
        let chosen = optimal_config(&rows, tolerance)?;
        Ok(SweepReport { dims: op.dims(), kind, repetitions, warmup, tolerance, rows, chosen })
    }

    pub fn baseline(&self) -> &ConfigResult {
        self.row(PrecisionConfig::ALL_DOUBLE).expect("sweep includes the baseline")
    }

    pub fn row(&self, cfg: PrecisionConfig) -> Option<&ConfigResult> {
        self.rows.iter().find(|r| r.config == cfg)
    }

    pub fn chosen_row(&self) -> &ConfigResult {
        self.row(self.chosen).expect("chosen config comes from the rows")
    }

    /// Baseline mean time over the chosen config's mean time.
    pub fn speedup(&self) -> f64 {
        self.baseline().mean_s / self.chosen_row().mean_s
    }

    pub fn front(&self) -> Vec<ConfigResult> {
        pareto_front(&self.rows)
    }

    /// `config,mean_s,min_s,max_s,rel_error`, one row per config.
    pub fn to_csv(&self) -> Result<String> {
        crate::report::write_sweep_csv(&self.rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ProblemDims;
    use crate::pipeline::{setup_operator, BlockColumn};
    use proptest::prelude::*;

    fn row(cfg: &str, mean: f64, err: f64) -> ConfigResult {
        ConfigResult { config: cfg.parse().unwrap(), mean_s: mean, min_s: mean, max_s: mean, rel_error: err }
    }

    fn brute_front(rs: &[ConfigResult]) -> Vec<ConfigResult> {
        rs.iter().filter(|q| !rs.iter().any(|r| dominates(r, q))).cloned().collect()
    }

    fn brute_optimal(rs: &[ConfigResult], tol: f64) -> Option<PrecisionConfig> {
        let mut best: Option<&ConfigResult> = None;
        for r in rs.iter().filter(|r| r.rel_error <= tol) {
            best = match best {
                None => Some(r),
                Some(b) => {
                    let better = r.mean_s < b.mean_s
                        || (r.mean_s == b.mean_s && r.rel_error < b.rel_error)
                        || (r.mean_s == b.mean_s
                            && r.rel_error == b.rel_error
                            && r.config.to_string() < b.config.to_string());
                    Some(if better { r } else { b })
                }
            };
        }
        best.map(|r| r.config)
    }

    #[test]
    fn fill_is_never_representable_in_f32() {
        let xs = non_representable_fill(1_000_000, 42);
        assert!(xs.iter().all(|&x| (x as f32) as f64 != x));
        assert!(xs.iter().all(|&x| (0.5..1.0).contains(&x.abs())));
        assert!(xs.iter().any(|&x| x < 0.0) && xs.iter().any(|&x| x > 0.0));
    }

    #[test]
    fn fill_is_deterministic() {
        let a = non_representable_fill(1000, 9);
        let b = non_representable_fill(1000, 9);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, non_representable_fill(1000, 10));
    }

    #[test]
    fn roundtrip_delta_of_three_quarters() {
        // 0.75 + (2^29 - 1) * 2^-53: the dropped bits sit one double-ulp
        // below the next f32, so narrowing rounds up by exactly 2^-53.
        let x = f64::from_bits(0.75f64.to_bits() | DROPPED_BITS);
        let delta = ((x as f32) as f64 - x).abs();
        assert!(delta > 0.0 && delta <= 2f64.powi(-24));
        assert_eq!(delta, 2f64.powi(-53));
    }

    #[test]
    fn relative_error_examples() {
        let r = [3.0, 4.0];
        assert_eq!(relative_error(&r, &r).unwrap(), 0.0);
        assert_eq!(relative_error(&[6.0, 8.0], &r).unwrap(), 1.0);
        let reference = [0.6, 0.8];
        let eps = 1e-9;
        let e = relative_error(&[0.6 + eps, 0.8], &reference).unwrap();
        assert!((e - eps).abs() < 1e-15);
        assert!(matches!(relative_error(&[1.0], &[0.0]), Err(Error::ZeroNormReference)));
        assert!(relative_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn front_examples() {
        let one = vec![row("ddddd", 1.0, 0.0)];
        assert_eq!(pareto_front(&one), one);
        let two = vec![row("ddddd", 1.0, 1e-9), row("sssss", 2.0, 1e-8)];
        assert_eq!(pareto_front(&two), vec![two[0].clone()]);
        let dup = vec![row("ddddd", 1.0, 1e-9), row("dddds", 1.0, 1e-9), row("sssss", 0.5, 1e-3)];
        assert_eq!(pareto_front(&dup).len(), 3);
    }

    #[test]
    fn optimal_examples() {
        let rows = vec![row("ddddd", 1.0, 0.0), row("dssdd", 0.6, 3e-8), row("sssss", 0.4, 1e-6)];
        assert_eq!(optimal_config(&rows, 1e-7).unwrap().to_string(), "dssdd");
        assert_eq!(optimal_config(&rows, f64::MIN_POSITIVE).unwrap().to_string(), "ddddd");
        assert_eq!(optimal_config(&rows, 1e-6).unwrap().to_string(), "sssss");
        // Inclusive boundary.
        assert_eq!(optimal_config(&rows, 3e-8).unwrap().to_string(), "dssdd");
        let tie = vec![row("sdddd", 0.5, 1e-8), row("dsddd", 0.5, 1e-8), row("ddsdd", 0.5, 2e-8)];
        assert_eq!(optimal_config(&tie, 1.0).unwrap().to_string(), "dsddd");
        assert!(optimal_config(&rows[1..], 1e-9).is_err());
    }

    fn arb_rows() -> impl Strategy<Value = Vec<ConfigResult>> {
        // Coarse grids force plenty of ties.
        prop::collection::vec((0usize..32, 0u32..12, 0u32..12), 1..40).prop_map(|v| {
            let cfgs = enumerate_configs();
            v.into_iter()
                .map(|(c, t, e)| ConfigResult {
                    config: cfgs[c],
                    mean_s: 0.1 * t as f64,
                    min_s: 0.1 * t as f64,
                    max_s: 0.1 * t as f64,
                    rel_error: if e == 0 { 0.0 } else { 10f64.powi(-(e as i32)) },
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn front_matches_pairwise_oracle(rows in arb_rows()) {
            prop_assert_eq!(pareto_front(&rows), brute_front(&rows));
        }

        #[test]
        fn optimal_is_constrained_argmin_and_on_front(rows in arb_rows(), e in 0u32..12) {
            let tol = 10f64.powi(-(e as i32));
            let got = optimal_config(&rows, tol).ok();
            prop_assert_eq!(got, brute_optimal(&rows, tol));
            if let Some(cfg) = got {
                let front = pareto_front(&rows);
                let chosen = rows.iter().filter(|r| r.rel_error <= tol).min_by(|a, b| selection_order(a, b)).unwrap();
                prop_assert!(front.iter().any(|r| r == chosen));
                prop_assert_eq!(chosen.config, cfg);
            }
        }

        #[test]
        fn optimal_time_is_monotone_in_tolerance(rows in arb_rows(), e1 in 0u32..12, e2 in 0u32..12) {
            let (lo, hi) = if e1 >= e2 { (e1, e2) } else { (e2, e1) };
            let (t1, t2) = (10f64.powi(-(lo as i32)), 10f64.powi(-(hi as i32)));
            let mean = |tol| optimal_config(&rows, tol).ok().map(|c| {
                rows.iter().filter(|r| r.config == c && r.rel_error <= tol).map(|r| r.mean_s).fold(f64::INFINITY, f64::min)
            });
            if let (Some(a), Some(b)) = (mean(t1), mean(t2)) {
                prop_assert!(a >= b);
            }
        }
    }

    #[test]
    fn sweep_on_small_problem() {
        let dims = ProblemDims::new(12, 3, 8).unwrap();
        let col = BlockColumn::new(dims, non_representable_fill(8 * 3 * 12, 1)).unwrap();
        let op = setup_operator(&col).unwrap();
        let m = BlockVector::from_f64(non_representable_fill(12 * 8, 2), 12, 8).unwrap();
        let rows = sweep_configs(&op, &m, MatvecKind::Forward, 2, 1).unwrap();
        assert_eq!(rows.len(), 32);
        assert_eq!(rows.iter().map(|r| r.config).collect::<Vec<_>>(), enumerate_configs());
        assert_eq!(rows[0].rel_error, 0.0);
        for r in &rows {
            assert!(r.min_s <= r.mean_s && r.mean_s <= r.max_s);
            if !r.config.is_all_double() {
                assert!(r.rel_error > 0.0, "{}", r.config);
            }
        }
        let again = sweep_configs(&op, &m, MatvecKind::Forward, 1, 0).unwrap();
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!(a.rel_error.to_bits(), b.rel_error.to_bits());
        }
        let report = SweepReport::run(&op, &m, MatvecKind::Forward, 1, 0, 1e-5).unwrap();
        assert!(report.rows.iter().any(|r| r.config == report.chosen));
        assert_eq!(SweepReport::from_json(&report.to_json().unwrap()).unwrap(), report);
    }

    #[test]
    fn timing_stats_bracket_mean() {
        let t = TimingStats::from_samples(&[0.1, 0.1, 0.1]);
        assert!(t.min_s <= t.mean_s && t.mean_s <= t.max_s);
        let t = TimingStats::from_samples(&[3.0, 1.0, 2.0]);
        assert_eq!((t.mean_s, t.min_s, t.max_s), (2.0, 1.0, 3.0));
    }
}
