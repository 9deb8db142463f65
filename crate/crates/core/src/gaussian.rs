//! Exact simulation of fractional Gaussian noise and fractional Brownian
//! motion.
//!
//! The sampler embeds the Toeplitz covariance of `length` unit-step fGn
//! values into a circulant matrix of size `2N` (`N` the next power of two),
//! diagonalizes it with one FFT and colours complex white noise with the
//! square-root eigenvalues (Davies–Harte / Wood–Chan). When the embedding
//! has materially negative eigenvalues the sampler falls back to a dense
//! Cholesky factor of the covariance matrix.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_hurst, Error, Result};
use crate::rng;

/// Largest length for which the dense fallback is attempted.
pub const DENSE_FALLBACK_LIMIT: usize = 1024;

/// Relative size below which negative circulant eigenvalues are treated as
/// round-off and clamped to zero.
const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgnSpec {
  pub hurst: f64,
  pub length: usize,
  /// Time step of one increment; consumers scale unit-variance values by
  /// `step^hurst`.
  pub step: f64,
}

impl FgnSpec {
  pub fn new(hurst: f64, length: usize, step: f64) -> Result<Self> {
    check_hurst(hurst)?;
    if length < 2 {
      return Err(Error::domain("length", format!("fGn length {length} must be at least 2")));
    }
    if !(step > 0.0 && step.is_finite()) {
      return Err(Error::domain("step", format!("time step {step} must be positive")));
    }
    Ok(Self { hurst, length, step })
  }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath {
  pub values: Vec<f64>,
  pub spec: FgnSpec,
  pub seed: u64,
}

/// Autocovariance of unit-step fGn at `lag`.
pub fn fgn_autocovariance(lag: u64, hurst: f64) -> f64 {
  if lag == 0 {
    return 1.0;
  }
  let k = lag as f64;
  let two_h = 2.0 * hurst;
  0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h))
}

#[derive(Clone)]
enum Method {
  Circulant {
    sqrt_eigenvalues: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
  },
  Dense {
    /// Row-major lower triangular Cholesky factor.
    lower: Vec<f64>,
  },
}

/// Reusable fGn generator; precomputes the covariance square root once so
/// that replications only pay for the random draws and one transform.
#[derive(Clone)]
pub struct FgnSampler {
  spec: FgnSpec,
  method: Method,
}

impl std::fmt::Debug for FgnSampler {
  fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    f.debug_struct("FgnSampler")
      .field("spec", &self.spec)
      .field("circulant", &self.is_circulant())
      .finish()
  }
}

impl FgnSampler {
  pub fn new(spec: FgnSpec) -> Result<Self> {
    match circulant_method(&spec) {
      Ok(method) => Ok(Self { spec, method }),
      Err(reason) => {
        if spec.length > DENSE_FALLBACK_LIMIT {
          return Err(Error::EmbeddingFailure {
            hurst: spec.hurst,
            length: spec.length,
            reason: format!("{reason}; dense fallback limited to length {DENSE_FALLBACK_LIMIT}"),
          });
        }
        Self::dense(spec)
      }
    }
  }

  /// Builds the sampler from a dense Cholesky factor regardless of whether
  /// the circulant embedding would succeed.
  pub fn dense(spec: FgnSpec) -> Result<Self> {
    let lower = cholesky_toeplitz(&spec).map_err(|reason| Error::EmbeddingFailure {
      hurst: spec.hurst,
      length: spec.length,
      reason,
    })?;
    Ok(Self {
      spec,
      method: Method::Dense { lower },
    })
  }

  pub fn spec(&self) -> &FgnSpec {
    &self.spec
  }

  pub fn is_circulant(&self) -> bool {
    matches!(self.method, Method::Circulant { .. })
  }

  pub fn sample(&self, seed: u64) -> GaussianPath {
    let mut rng = rng::stream(seed);
    let mut values = vec![0.0; self.spec.length];
    self.fill(&mut rng, &mut values);
    GaussianPath {
      values,
      spec: self.spec,
      seed,
    }
  }

  /// Writes `spec.length` unit-variance fGn values into `out`.
  pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
    assert_eq!(out.len(), self.spec.length, "output buffer length mismatch");
    match &self.method {
      Method::Circulant {
        sqrt_eigenvalues,
        fft,
      } => {
        let mut buffer: Vec<Complex<f64>> = sqrt_eigenvalues
          .iter()
          .map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(s * re, s * im)
          })
          .collect();
        fft.process(&mut buffer);
        for (o, c) in out.iter_mut().zip(buffer.iter()) {
          *o = c.re;
        }
      }
      Method::Dense { lower } => {
        let n = self.spec.length;
        let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate() {
          let row = &lower[i * n..i * n + i + 1];
          *o = row.iter().zip(&white).map(|(l, w)| l * w).sum();
        }
      }
    }
  }
}

fn circulant_method(spec: &FgnSpec) -> std::result::Result<Method, String> {
  let half = spec.length.next_power_of_two();
  let size = 2 * half;
  let mut row: Vec<Complex<f64>> = Vec::with_capacity(size);
  for k in 0..=half {
    row.push(Complex::new(fgn_autocovariance(k as u64, spec.hurst), 0.0));
  }
  for k in (1..half).rev() {
    row.push(Complex::new(fgn_autocovariance(k as u64, spec.hurst), 0.0));
  }
  let mut planner = FftPlanner::<f64>::new();
  let fft = planner.plan_fft_forward(size);
  fft.process(&mut row);

  let largest = row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
  let mut sqrt_eigenvalues = Vec::with_capacity(size);
  for (k, c) in row.iter().enumerate() {
    let lambda = c.re;
    if lambda < -EIGEN_TOLERANCE * largest {
      return Err(format!("circulant eigenvalue {k} is negative ({lambda:e})"));
    }
    sqrt_eigenvalues.push((lambda.max(0.0) / size as f64).sqrt());
  }
  Ok(Method::Circulant {
    sqrt_eigenvalues,
    fft,
  })
}

fn cholesky_toeplitz(spec: &FgnSpec) -> std::result::Result<Vec<f64>, String> {
  let n = spec.length;
  let acf: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k as u64, spec.hurst)).collect();
  let mut lower = vec![0.0; n * n];
  for i in 0..n {
    for j in 0..=i {
      let dot: f64 = (0..j).map(|p| lower[i * n + p] * lower[j * n + p]).sum();
      let entry = acf[i - j] - dot;
      if i == j {
        if entry <= 0.0 {
          return Err(format!("covariance matrix not positive definite at row {i}"));
        }
        lower[i * n + i] = entry.sqrt();
      } else {
        lower[i * n + j] = entry / lower[j * n + j];
      }
    }
  }
  Ok(lower)
}

pub fn sample_fgn(spec: FgnSpec, seed: u64) -> Result<GaussianPath> {
  Ok(FgnSampler::new(spec)?.sample(seed))
}

/// Fractional Brownian motion on a uniform grid of `n` steps over
/// `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct FbmSampler {
  fgn: FgnSampler,
  scale: f64,
}

impl FbmSampler {
  pub fn new(hurst: f64, horizon: f64, n: usize) -> Result<Self> {
    if !(horizon > 0.0 && horizon.is_finite()) {
      return Err(Error::domain("T", format!("horizon {horizon} must be positive")));
    }
    if n < 2 {
      return Err(Error::domain("n", format!("grid steps {n} must be at least 2")));
    }
    let step = horizon / n as f64;
    let fgn = FgnSampler::new(FgnSpec::new(hurst, n, step)?)?;
    Ok(Self {
      fgn,
      scale: step.powf(hurst),
    })
  }

  pub fn steps(&self) -> usize {
    self.fgn.spec().length
  }

  /// Path of length `n + 1` starting at exactly zero.
  pub fn sample(&self, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed);
    self.sample_with(&mut rng)
  }

  pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
    let n = self.steps();
    let mut increments = vec![0.0; n];
    self.fgn.fill(rng, &mut increments);
    let mut path = Vec::with_capacity(n + 1);
    path.push(0.0);
    let mut level = 0.0;
    for dz in increments {
      level += self.scale * dz;
      path.push(level);
    }
    path
  }
}

pub fn sample_fbm(hurst: f64, horizon: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
  Ok(FbmSampler::new(hurst, horizon, n)?.sample(seed))
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn autocovariance_closed_form_values() {
    assert_eq!(fgn_autocovariance(0, 0.85), 1.0);
    assert!(fgn_autocovariance(1, 0.5 + 1e-12) < 1e-9);
    let expected = 0.5 * (2f64.powf(1.7) - 2.0);
    assert!((fgn_autocovariance(1, 0.85) - expected).abs() < 1e-15);
    assert!((fgn_autocovariance(1, 0.85) - 0.624505).abs() < 1e-6);
  }

  #[test]
  fn autocovariance_matches_increment_covariance_of_fbm() {
    // Cov(B_{k+1}-B_k, B_1-B_0) from the fBm covariance function.
    let cov = |t: f64, s: f64, h: f64| 0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h));
    for &h in &[0.6, 0.75, 0.85, 0.95] {
      for lag in 0..20u64 {
        let k = lag as f64;
        let brute = cov(k + 1.0, 1.0, h) - cov(k, 1.0, h) - cov(k + 1.0, 0.0, h) + cov(k, 0.0, h);
        assert!((fgn_autocovariance(lag, h) - brute).abs() < 1e-12, "h={h} lag={lag}");
      }
    }
  }

  #[test]
  fn spec_rejects_invalid_inputs() {
    assert!(FgnSpec::new(0.5, 10, 1.0).is_err());
    assert!(FgnSpec::new(1.0, 10, 1.0).is_err());
    assert!(FgnSpec::new(0.7, 1, 1.0).is_err());
    assert!(FgnSpec::new(0.7, 10, 0.0).is_err());
  }

  #[test]
  fn circulant_embedding_is_used_for_long_memory_noise() {
    for &h in &[0.51, 0.7, 0.95, 0.99] {
      let sampler = FgnSampler::new(FgnSpec::new(h, 1000, 1.0).unwrap()).unwrap();
      assert!(sampler.is_circulant(), "h={h}");
    }
  }

  #[test]
  fn dense_factor_reproduces_covariance() {
    let spec = FgnSpec::new(0.8, 12, 1.0).unwrap();
    let lower = cholesky_toeplitz(&spec).unwrap();
    let n = spec.length;
    for i in 0..n {
      for j in 0..n {
        let s: f64 = (0..n).map(|p| lower[i * n + p] * lower[j * n + p]).sum();
        let want = fgn_autocovariance((i as i64 - j as i64).unsigned_abs(), 0.8);
        assert!((s - want).abs() < 1e-12);
      }
    }
  }

  #[test]
  fn same_seed_same_values() {
    let spec = FgnSpec::new(0.7, 300, 0.1).unwrap();
    let a = sample_fgn(spec, 9).unwrap();
    let b = sample_fgn(spec, 9).unwrap();
    let c = sample_fgn(spec, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values, c.values);
    assert!(a.values.iter().all(|v| v.is_finite()));
  }

  #[test]
  fn fbm_starts_at_zero() {
    let path = sample_fbm(0.7, 2.0, 64, 3).unwrap();
    assert_eq!(path.len(), 65);
    assert_eq!(path[0], 0.0);
  }
}
