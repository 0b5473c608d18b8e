//! Batched real-to-complex FFTs.
//!
//! Forward transforms are unnormalized and return the `length / 2 + 1`
//! non-redundant bins. Inverse transforms include the `1 / length` factor,
//! so `inverse(forward(x)) == x`. The imaginary parts of the DC and Nyquist
//! bins are ignored by the inverse, as with any complex-to-real transform.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::precision::Precision;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone)]
enum Engine {
    Forward32(Arc<dyn RealToComplex<f32>>),
    Forward64(Arc<dyn RealToComplex<f64>>),
    Inverse32(Arc<dyn ComplexToReal<f32>>),
    Inverse64(Arc<dyn ComplexToReal<f64>>),
}

/// A planned batch of same-length real transforms.
#[derive(Clone)]
pub struct FftPlan {
    length: usize,
    batch: usize,
    precision: Precision,
    direction: Direction,
    engine: Engine,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan")
            .field("length", &self.length)
            .field("batch", &self.batch)
            .field("precision", &self.precision)
            .field("direction", &self.direction)
            .finish()
    }
}

impl FftPlan {
    pub fn new(length: usize, batch: usize, precision: Precision, direction: Direction) -> Result<Self> {
        if length < 2 || length % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "FFT length must be even and at least 2, got {length}"
            )));
        }
        let engine = match (precision, direction) {
            (Precision::Single, Direction::Forward) => {
                Engine::Forward32(RealFftPlanner::<f32>::new().plan_fft_forward(length))
            }
            (Precision::Double, Direction::Forward) => {
                Engine::Forward64(RealFftPlanner::<f64>::new().plan_fft_forward(length))
            }
            (Precision::Single, Direction::Inverse) => {
                Engine::Inverse32(RealFftPlanner::<f32>::new().plan_fft_inverse(length))
            }
            (Precision::Double, Direction::Inverse) => {
                Engine::Inverse64(RealFftPlanner::<f64>::new().plan_fft_inverse(length))
            }
        };
        Ok(FftPlan { length, batch, precision, direction, engine })
    }

    /// Same transform, different batch count. Shares the planned kernels.
    pub fn with_batch(&self, batch: usize) -> Self {
        FftPlan { batch, ..self.clone() }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn n_bins(&self) -> usize {
        self.length / 2 + 1
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }
}

/// The real types with a planned transform engine.
pub trait FftReal: Real {
    #[doc(hidden)]
    fn r2c(plan: &FftPlan) -> Option<&Arc<dyn RealToComplex<Self>>>;
    #[doc(hidden)]
    fn c2r(plan: &FftPlan) -> Option<&Arc<dyn ComplexToReal<Self>>>;
}

impl FftReal for f32 {
    fn r2c(plan: &FftPlan) -> Option<&Arc<dyn RealToComplex<f32>>> {
        match &plan.engine {
            Engine::Forward32(p) => Some(p),
            _ => None,
        }
    }

    fn c2r(plan: &FftPlan) -> Option<&Arc<dyn ComplexToReal<f32>>> {
        match &plan.engine {
            Engine::Inverse32(p) => Some(p),
            _ => None,
        }
    }
}

impl FftReal for f64 {
    fn r2c(plan: &FftPlan) -> Option<&Arc<dyn RealToComplex<f64>>> {
        match &plan.engine {
            Engine::Forward64(p) => Some(p),
            _ => None,
        }
    }

    fn c2r(plan: &FftPlan) -> Option<&Arc<dyn ComplexToReal<f64>>> {
        match &plan.engine {
            Engine::Inverse64(p) => Some(p),
            _ => None,
        }
    }
}

fn check_plan<T: Real>(plan: &FftPlan, want: Direction) -> Result<()> {
    if plan.direction != want {
        return Err(Error::InvalidInput(format!(
            "{:?} plan used for a {want:?} transform",
            plan.direction
        )));
    }
    if plan.precision != T::PRECISION {
        return Err(Error::PrecisionMismatch {
            what: "FFT operand",
            expected: plan.precision,
            actual: T::PRECISION,
        });
    }
    Ok(())
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { what, expected, actual });
    }
    Ok(())
}

/// Transforms `plan.batch()` contiguous real series of `plan.length()` into
/// `plan.n_bins()` bins each.
pub fn forward_real_batched_into<T: FftReal>(
    plan: &FftPlan,
    series: &[T],
    bins: &mut [Complex<T>],
) -> Result<()> {
    check_plan::<T>(plan, Direction::Forward)?;
    check_len("FFT input length", plan.batch * plan.length, series.len())?;
    check_len("FFT output length", plan.batch * plan.n_bins(), bins.len())?;
    let fft = T::r2c(plan).expect("engine matches checked precision and direction");
    bins.par_chunks_mut(plan.n_bins())
        .zip(series.par_chunks(plan.length))
        .for_each_init(
            || (fft.make_input_vec(), fft.make_scratch_vec()),
            |(buf, scratch), (out, inp)| {
                buf.copy_from_slice(inp);
                fft.process_with_scratch(buf, out, scratch)
                    .expect("buffer sizes come from the plan");
            },
        );
    Ok(())
}

pub fn forward_real_batched<T: FftReal>(plan: &FftPlan, series: &[T]) -> Result<Vec<Complex<T>>> {
    let mut bins = vec![Complex::zero(); plan.batch * plan.n_bins()];
    forward_real_batched_into(plan, series, &mut bins)?;
    Ok(bins)
}

/// Inverse of [`forward_real_batched_into`], normalized by `1 / length`.
pub fn inverse_real_batched_into<T: FftReal>(
    plan: &FftPlan,
    bins: &[Complex<T>],
    series: &mut [T],
) -> Result<()> {
    check_plan::<T>(plan, Direction::Inverse)?;
    check_len("IFFT input length", plan.batch * plan.n_bins(), bins.len())?;
    check_len("IFFT output length", plan.batch * plan.length, series.len())?;
    let ifft = T::c2r(plan).expect("engine matches checked precision and direction");
    let scale = T::one() / T::from_double(plan.length as f64);
    let last = plan.n_bins() - 1;
    series
        .par_chunks_mut(plan.length)
        .zip(bins.par_chunks(plan.n_bins()))
        .for_each_init(
            || (ifft.make_input_vec(), ifft.make_scratch_vec()),
            |(buf, scratch), (out, inp)| {
                buf.copy_from_slice(inp);
                buf[0].im = T::zero();
                buf[last].im = T::zero();
                ifft.process_with_scratch(buf, out, scratch)
                    .expect("buffer sizes come from the plan");
                for x in out.iter_mut() {
                    *x = *x * scale;
                }
            },
        );
    Ok(())
}

pub fn inverse_real_batched<T: FftReal>(plan: &FftPlan, bins: &[Complex<T>]) -> Result<Vec<T>> {
    let mut series = vec![T::zero(); plan.batch * plan.length];
    inverse_real_batched_into(plan, bins, &mut series)?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let ang = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                        Complex64::new(v * ang.cos(), v * ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn dc_only_spectrum() {
        let plan = FftPlan::new(8, 1, Precision::Double, Direction::Forward).unwrap();
        let bins = forward_real_batched(&plan, &[1.0f64; 8]).unwrap();
        assert_eq!(bins.len(), 5);
        assert!((bins[0] - Complex64::new(8.0, 0.0)).norm() < 1e-14);
        for b in &bins[1..] {
            assert!(b.norm() < 1e-14);
        }
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let plan = FftPlan::new(8, 1, Precision::Double, Direction::Forward).unwrap();
        let mut x = [0.0f64; 8];
        x[0] = 1.0;
        for b in forward_real_batched(&plan, &x).unwrap() {
            assert!((b - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let plan = FftPlan::new(16, 1, Precision::Double, Direction::Forward).unwrap();
        let fast = forward_real_batched(&plan, &x).unwrap();
        let slow = naive_dft(&x);
        let num: f64 = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = slow.iter().map(|b| b.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-12);
    }

    #[test]
    fn inverse_of_dc_is_ones() {
        let plan = FftPlan::new(8, 1, Precision::Double, Direction::Inverse).unwrap();
        let mut bins = vec![Complex64::zero(); 5];
        bins[0] = Complex64::new(8.0, 0.0);
        let x = inverse_real_batched(&plan, &bins).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn batched_roundtrip_length_400() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = 7;
        let x: Vec<f64> = (0..400 * batch).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fwd = FftPlan::new(400, batch, Precision::Double, Direction::Forward).unwrap();
        let inv = FftPlan::new(400, batch, Precision::Double, Direction::Inverse).unwrap();
        let y = inverse_real_batched(&inv, &forward_real_batched(&fwd, &x).unwrap()).unwrap();
        let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = x.iter().map(|a| a * a).sum();
        assert!((num / den).sqrt() < 1e-12);

        let xs: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let ys = inverse_real_batched(
            &inv_single(400, batch),
            &forward_real_batched(&fwd_single(400, batch), &xs).unwrap(),
        )
        .unwrap();
        let num: f64 = xs.iter().zip(&ys).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
        let den: f64 = xs.iter().map(|&a| (a as f64).powi(2)).sum();
        assert!((num / den).sqrt() < 1e-5);
    }

    fn fwd_single(n: usize, b: usize) -> FftPlan {
        FftPlan::new(n, b, Precision::Single, Direction::Forward).unwrap()
    }

    fn inv_single(n: usize, b: usize) -> FftPlan {
        FftPlan::new(n, b, Precision::Single, Direction::Inverse).unwrap()
    }

    #[test]
    fn rejects_mismatches() {
        assert!(FftPlan::new(7, 1, Precision::Double, Direction::Forward).is_err());
        assert!(FftPlan::new(0, 1, Precision::Double, Direction::Forward).is_err());
        let plan = FftPlan::new(8, 2, Precision::Double, Direction::Forward).unwrap();
        assert!(forward_real_batched(&plan, &[0.0f64; 8]).is_err());
        assert!(forward_real_batched(&plan, &[0.0f32; 16]).is_err());
        assert!(inverse_real_batched(&plan, &[Complex64::zero(); 10]).is_err());
        let p = plan.with_batch(1);
        assert_eq!(p.batch(), 1);
        assert!(forward_real_batched(&p, &[0.0f64; 8]).is_ok());
    }
}
