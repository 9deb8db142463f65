//! Hermite processes of order `q` and their second-order oracles.
//!
//! Order one is fractional Brownian motion and is sampled exactly. For
//! `q >= 2` the path is the normalized partial-sum process of `H_q` applied
//! to long-memory fGn with Hurst index `H0 = 1 + (H - 1) / q`; this
//! converges in distribution to the Hermite process (non-central limit
//! theorem). The normalizer is computed for the finite resolution `m`, so
//! `Var(Z_T) = T^{2H}` holds exactly for the discrete construction.

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{check_hurst, Error, Result};
use crate::gaussian::{fgn_autocovariance, FbmSampler, FgnSampler, FgnSpec};
use crate::rng;

/// Internal fGn steps per output grid step used when no resolution is given.
pub const DEFAULT_RESOLUTION_FACTOR: usize = 8;

fn check_order(q: u32) -> Result<()> {
  if q >= 1 {
    Ok(())
  } else {
    Err(Error::domain("q", "Hermite order must be at least 1"))
  }
}

/// Hurst index of the underlying Gaussian layer.
pub fn h_zero(q: u32, hurst: f64) -> Result<f64> {
  check_order(q)?;
  check_hurst(hurst)?;
  Ok(1.0 + (hurst - 1.0) / q as f64)
}

pub fn ln_factorial(q: u32) -> f64 {
  ln_gamma(q as f64 + 1.0)
}

/// Euler Beta function through log-gamma.
pub fn beta_fn(a: f64, b: f64) -> f64 {
  (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// `c(q, H)` normalizing the multiple Wiener integral so that
/// `E[Z_1^2] = 1`.
pub fn scaling_constant(q: u32, hurst: f64) -> Result<f64> {
  let h0 = h_zero(q, hurst)?;
  let ln_beta = ln_gamma(h0 - 0.5) + ln_gamma(2.0 - 2.0 * h0) - ln_gamma(1.5 - h0);
  let ln_c2 = (hurst * (2.0 * hurst - 1.0)).ln() - ln_factorial(q) - q as f64 * ln_beta;
  Ok((0.5 * ln_c2).exp())
}

/// Probabilists' Hermite polynomial `H_q(x)`.
pub fn hermite_polynomial(q: u32, x: f64) -> f64 {
  match q {
    0 => 1.0,
    1 => x,
    2 => x * x - 1.0,
    _ => {
      let (mut prev, mut cur) = (1.0, x);
      for k in 1..q {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
      }
      cur
    }
  }
}

/// `E[Z_t Z_s] = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn covariance_oracle(t: f64, s: f64, hurst: f64) -> f64 {
  let two_h = 2.0 * hurst;
  0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

/// `sum_{i,j=1..m} r(i-j)^q` by lag counting, O(m).
pub fn lag_power_sum(m: usize, h0: f64, q: u32) -> f64 {
  let mut total = m as f64;
  for lag in 1..m {
    total += 2.0 * (m - lag) as f64 * fgn_autocovariance(lag as u64, h0).powi(q as i32);
  }
  total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteSpec {
  pub order: u32,
  pub hurst: f64,
  pub horizon: f64,
  /// Number of grid steps; paths carry `steps + 1` values.
  pub steps: usize,
  /// Number of fGn variables behind one path (ignored for `order == 1`).
  pub resolution: usize,
}

impl HermiteSpec {
  pub fn new(order: u32, hurst: f64, horizon: f64, steps: usize, resolution: usize) -> Result<Self> {
    check_order(order)?;
    check_hurst(hurst)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
      return Err(Error::domain("T", format!("horizon {horizon} must be positive")));
    }
    if steps < 2 {
      return Err(Error::domain("n", format!("grid steps {steps} must be at least 2")));
    }
    if resolution < steps {
      return Err(Error::Resolution(format!(
        "internal resolution m={resolution} is below the grid size n={steps}"
      )));
    }
    Ok(Self {
      order,
      hurst,
      horizon,
      steps,
      resolution,
    })
  }

  pub fn with_default_resolution(order: u32, hurst: f64, horizon: f64, steps: usize) -> Result<Self> {
    Self::new(order, hurst, horizon, steps, DEFAULT_RESOLUTION_FACTOR * steps)
  }

  pub fn h_zero(&self) -> f64 {
    1.0 + (self.hurst - 1.0) / self.order as f64
  }

  pub fn times(&self) -> Vec<f64> {
    uniform_grid(self.horizon, self.steps)
  }
}

pub(crate) fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
  (0..=steps).map(|j| horizon * j as f64 / steps as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitePath {
  pub times: Vec<f64>,
  pub values: Vec<f64>,
  pub spec: HermiteSpec,
  pub seed: u64,
}

#[derive(Debug, Clone)]
enum Generator {
  Fbm(FbmSampler),
  Rank {
    fgn: FgnSampler,
    normalizer: f64,
    /// Number of fGn terms summed up to each grid point.
    cuts: Vec<usize>,
  },
}

#[derive(Debug, Clone)]
pub struct HermiteSampler {
  spec: HermiteSpec,
  times: Vec<f64>,
  generator: Generator,
}

impl HermiteSampler {
  pub fn new(spec: HermiteSpec) -> Result<Self> {
    let generator = if spec.order == 1 {
      Generator::Fbm(FbmSampler::new(spec.hurst, spec.horizon, spec.steps)?)
    } else {
      let m = spec.resolution;
      let h0 = spec.h_zero();
      let fgn = FgnSampler::new(FgnSpec::new(h0, m, spec.horizon / m as f64)?)?;
      let variance = (ln_factorial(spec.order).exp()) * lag_power_sum(m, h0, spec.order);
      let normalizer = spec.horizon.powf(spec.hurst) / variance.sqrt();
      let cuts = (0..=spec.steps).map(|j| m * j / spec.steps).collect();
      Generator::Rank {
        fgn,
        normalizer,
        cuts,
      }
    };
    Ok(Self {
      times: spec.times(),
      spec,
      generator,
    })
  }

  pub fn spec(&self) -> &HermiteSpec {
    &self.spec
  }

  pub fn times(&self) -> &[f64] {
    &self.times
  }

  /// Normalizer `b` of the rank construction (`None` for fBm).
  pub fn normalizer(&self) -> Option<f64> {
    match &self.generator {
      Generator::Fbm(_) => None,
      Generator::Rank { normalizer, .. } => Some(*normalizer),
    }
  }

  pub fn sample(&self, seed: u64) -> HermitePath {
    let mut rng = rng::stream(seed);
    HermitePath {
      times: self.times.clone(),
      values: self.sample_values(&mut rng),
      spec: self.spec,
      seed,
    }
  }

  pub fn sample_values<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
    match &self.generator {
      Generator::Fbm(fbm) => fbm.sample_with(rng),
      Generator::Rank {
        fgn,
        normalizer,
        cuts,
      } => {
        let mut noise = vec![0.0; fgn.spec().length];
        fgn.fill(rng, &mut noise);
        let q = self.spec.order;
        let mut values = Vec::with_capacity(cuts.len());
        values.push(0.0);
        let mut partial = 0.0;
        for window in cuts.windows(2) {
          partial += noise[window[0]..window[1]]
            .iter()
            .map(|&x| hermite_polynomial(q, x))
            .sum::<f64>();
          values.push(normalizer * partial);
        }
        values
      }
    }
  }
}

pub fn sample_hermite(spec: HermiteSpec, seed: u64) -> Result<HermitePath> {
  Ok(HermiteSampler::new(spec)?.sample(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxMomentConfig {
  pub order: u32,
  pub hurst: f64,
  pub power: f64,
  pub horizon_1: f64,
  pub horizon_2: f64,
  pub reps: usize,
  pub steps: usize,
  pub bootstrap: usize,
  pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxMomentReport {
  pub moment_1: f64,
  pub moment_2: f64,
  pub ratio: f64,
  pub theoretical: f64,
  pub ci_low: f64,
  pub ci_high: f64,
}

impl MaxMomentReport {
  pub fn within_ci(&self) -> bool {
    self.ci_low <= self.theoretical && self.theoretical <= self.ci_high
  }
}

/// Monte Carlo check of `E[(sup_{s<=T} |Z_s|)^p] = K T^{pH}` at two
/// horizons, with a percentile-bootstrap 95% interval for the ratio.
///
/// Streams are keyed by the horizon value, so equal horizons reuse the same
/// paths and give a ratio of exactly one.
pub fn max_moment_scaling_check(cfg: &MaxMomentConfig) -> Result<MaxMomentReport> {
  if !(cfg.power >= 1.0) {
    return Err(Error::domain("p", "moment order must be at least 1"));
  }
  if !(cfg.horizon_1 > 0.0 && cfg.horizon_2 > 0.0) {
    return Err(Error::domain("T", "horizons must be positive"));
  }
  if cfg.reps < 100 {
    return Err(Error::domain("reps", "at least 100 replications are required"));
  }
  let sup_powers = |horizon: f64| -> Result<Vec<f64>> {
    let sampler = HermiteSampler::new(HermiteSpec::with_default_resolution(
      cfg.order, cfg.hurst, horizon, cfg.steps,
    )?)?;
    Ok(
      (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
          let mut rng = rng::stream(rng::derive_seed(cfg.seed, &[horizon.to_bits(), rep]));
          let path = sampler.sample_values(&mut rng);
          path.iter().fold(0.0f64, |m, z| m.max(z.abs())).powf(cfg.power)
        })
        .collect(),
    )
  };
  let first = sup_powers(cfg.horizon_1)?;
  let second = if cfg.horizon_2 == cfg.horizon_1 {
    first.clone()
  } else {
    sup_powers(cfg.horizon_2)?
  };
  let moment_1 = crate::stats::mean(&first);
  let moment_2 = crate::stats::mean(&second);

  let mut rng = rng::stream(rng::derive_seed(cfg.seed, &[u64::MAX]));
  let mut ratios: Vec<f64> = (0..cfg.bootstrap.max(1))
    .map(|_| {
      let m1 = resample_mean(&first, &mut rng);
      let m2 = resample_mean(&second, &mut rng);
      m2 / m1
    })
    .collect();
  ratios.sort_by(f64::total_cmp);
  Ok(MaxMomentReport {
    moment_1,
    moment_2,
    ratio: moment_2 / moment_1,
    theoretical: (cfg.horizon_2 / cfg.horizon_1).powf(cfg.power * cfg.hurst),
    ci_low: crate::stats::quantile_sorted(&ratios, 0.025),
    ci_high: crate::stats::quantile_sorted(&ratios, 0.975),
  })
}

fn resample_mean<R: Rng + ?Sized>(data: &[f64], rng: &mut R) -> f64 {
  let n = data.len();
  (0..n).map(|_| data[rng.random_range(0..n)]).sum::<f64>() / n as f64
}
