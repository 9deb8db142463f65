//! Kernel-type estimators of `theta(t) x_t` and `theta(t)` from a
//! discretely observed path, plus the truncated estimator built on the
//! event that the path stays away from zero.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::sde::SdePath;
use crate::trend::Trend;

pub const DEFAULT_POINTS: usize = 21;

fn check_eps(eps: f64) -> Result<()> {
  if !(eps > 0.0 && eps <= 1.0) {
    return Err(Error::domain("eps", format!("noise scale {eps} must lie in (0, 1]")));
  }
  Ok(())
}

/// `phi = eps^{1/(k - H + 2)}`.
pub fn bandwidth_main(eps: f64, k: usize, hurst: f64) -> Result<f64> {
  check_eps(eps)?;
  crate::error::check_hurst(hurst)?;
  Ok(eps.powf(1.0 / (k as f64 - hurst + 2.0)))
}

/// `phi = eps^{1/(rho - H)}`.
pub fn bandwidth_alt(eps: f64, rho: f64, hurst: f64) -> Result<f64> {
  check_eps(eps)?;
  crate::error::check_hurst(hurst)?;
  if rho <= hurst {
    return Err(Error::domain("rho", format!("smoothness {rho} must exceed H = {hurst}")));
  }
  Ok(eps.powf(1.0 / (rho - hurst)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
  Main { k: usize },
  Alt { rho: f64 },
  Fixed,
}

/// How the kernel enters the Stieltjes sum on each grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightRule {
  /// Exact average of `G((tau - t)/phi)` over the cell.
  #[default]
  CellAverage,
  /// `G` at the cell midpoint.
  Midpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
  pub kernel: Kernel,
  pub bandwidth: f64,
  pub window: (f64, f64),
  pub horizon: f64,
  pub eps: f64,
  pub rule: BandwidthRule,
  pub weights: WeightRule,
  pub points: usize,
}

impl EstimatorConfig {
  pub fn new(
    kernel: Kernel,
    bandwidth: f64,
    window: (f64, f64),
    horizon: f64,
    eps: f64,
    rule: BandwidthRule,
  ) -> Result<Self> {
    let (a, b) = window;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
      return Err(Error::domain("bandwidth", format!("{bandwidth} must be positive")));
    }
    if !(0.0 < a && a <= b && b < horizon) {
      return Err(Error::domain(
        "window",
        format!("[{a}, {b}] must lie strictly inside (0, {horizon})"),
      ));
    }
    let cfg = Self {
      kernel,
      bandwidth,
      window,
      horizon,
      eps,
      rule,
      weights: WeightRule::default(),
      points: DEFAULT_POINTS,
    };
    let (lo, hi) = cfg.reach(a);
    let (_, hi_b) = cfg.reach(b);
    let slack = 1e-12 * horizon;
    if lo < -slack || hi_b > horizon + slack {
      return Err(Error::WindowTruncation {
        lo,
        hi: hi.max(hi_b),
        horizon,
      });
    }
    Ok(cfg)
  }

  pub fn with_weights(mut self, weights: WeightRule) -> Self {
    self.weights = weights;
    self
  }

  pub fn with_points(mut self, points: usize) -> Result<Self> {
    if points == 0 {
      return Err(Error::domain("points", "evaluation grid needs at least one point"));
    }
    self.points = points;
    Ok(self)
  }

  /// Interval of `tau` values the kernel sees when estimating at `t`.
  pub fn reach(&self, t: f64) -> (f64, f64) {
    let (lo, hi) = self.kernel.support();
    (t + lo * self.bandwidth, t + hi * self.bandwidth)
  }

  pub fn eval_times(&self) -> Vec<f64> {
    let (a, b) = self.window;
    if self.points == 1 {
      return vec![a];
    }
    (0..self.points)
      .map(|i| a + (b - a) * i as f64 / (self.points - 1) as f64)
      .collect()
  }

  /// Nonzero weights `(j, w_j)` such that the estimate at `t` is
  /// `(1/phi) Σ w_j (X_{j+1} - X_j)` on a uniform grid.
  pub fn weights_at(&self, times: &[f64], t: f64) -> Result<Vec<(usize, f64)>> {
    let n = times.len() - 1;
    let horizon = times[n];
    let step = horizon / n as f64;
    let (lo, hi) = self.reach(t);
    let slack = 1e-12 * horizon;
    if lo < -slack || hi > horizon + slack {
      return Err(Error::WindowTruncation { lo, hi, horizon });
    }
    let first = ((lo / step).floor().max(0.0) as usize).min(n - 1);
    let last = ((hi / step).ceil() as usize).clamp(first + 1, n);
    let phi = self.bandwidth;
    Ok(
      (first..last)
        .map(|j| {
          let w = match self.weights {
            WeightRule::CellAverage => {
              let u0 = (times[j] - t) / phi;
              let u1 = (times[j + 1] - t) / phi;
              self.kernel.integral(u0, u1) / (u1 - u0)
            }
            WeightRule::Midpoint => self.kernel.eval((0.5 * (times[j] + times[j + 1]) - t) / phi),
          };
          (j, w)
        })
        .filter(|&(_, w)| w != 0.0)
        .collect(),
    )
  }
}

/// `(1/phi) Σ_j G((tau_j - t)/phi) ΔX_j` for arbitrary samples on a uniform grid.
pub fn smooth_increments(times: &[f64], values: &[f64], cfg: &EstimatorConfig, t: f64) -> Result<f64> {
  if times.len() != values.len() || times.len() < 2 {
    return Err(Error::GridMismatch(format!(
      "{} times for {} values",
      times.len(),
      values.len()
    )));
  }
  let total: f64 = cfg
    .weights_at(times, t)?
    .into_iter()
    .map(|(j, w)| w * (values[j + 1] - values[j]))
    .sum();
  Ok(total / cfg.bandwidth)
}

/// Kernel estimate of `theta(t) x_t`.
pub fn kernel_estimate_product(path: &SdePath, cfg: &EstimatorConfig, t: f64) -> Result<f64> {
  smooth_increments(&path.times, &path.observed, cfg, t)
}

/// Linear interpolation of the observed path.
pub fn observed_at(path: &SdePath, t: f64) -> f64 {
  let n = path.times.len() - 1;
  let pos = (t / path.times[n] * n as f64).clamp(0.0, n as f64);
  let j = (pos.floor() as usize).min(n - 1);
  let frac = pos - j as f64;
  path.observed[j] * (1.0 - frac) + path.observed[j + 1] * frac
}

/// `½ |x0| e^{-L T}`.
pub fn default_division_floor(x0: f64, bound: f64, horizon: f64) -> f64 {
  0.5 * x0.abs() * (-bound * horizon).exp()
}

/// Product estimate divided by `X_t`, or `None` when `|X_t|` is below `floor`.
pub fn kernel_estimate_theta(path: &SdePath, cfg: &EstimatorConfig, t: f64, floor: f64) -> Result<Option<f64>> {
  let product = kernel_estimate_product(path, cfg, t)?;
  let x = observed_at(path, t);
  Ok((x.abs() >= floor).then(|| product / x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
  pub times: Vec<f64>,
  pub product: Vec<f64>,
  /// `NaN` where the division guard triggered.
  pub theta: Vec<f64>,
  pub valid: Vec<bool>,
}

pub fn estimate_series(path: &SdePath, cfg: &EstimatorConfig, floor: f64) -> Result<EstimateSeries> {
  let times = cfg.eval_times();
  let mut series = EstimateSeries {
    times: times.clone(),
    product: Vec::with_capacity(times.len()),
    theta: Vec::with_capacity(times.len()),
    valid: Vec::with_capacity(times.len()),
  };
  for &t in &times {
    let product = kernel_estimate_product(path, cfg, t)?;
    let x = observed_at(path, t);
    let valid = x.abs() >= floor;
    series.product.push(product);
    series.theta.push(if valid { product / x } else { f64::NAN });
    series.valid.push(valid);
  }
  Ok(series)
}

/// `J^{(k+1)}(t) / (k+1)! · ∫ G(u) u^{k+1} du` for `J = theta x`.
pub fn bias_center_term(trend: &Trend, x0: f64, t: f64, k: usize, kernel: &Kernel) -> Result<f64> {
  let derivative = trend.product_derivative(x0, t, k + 1)?;
  let factorial: f64 = (1..=k + 1).map(|i| i as f64).product();
  Ok(derivative / factorial * kernel.moment(k + 1))
}

/// Indicator path `I(A_{t_j})` with
/// `A_t = {X_s >= ½ x0 e^{-L s} for every s <= t}`.
pub fn event_indicator(path: &SdePath, bound: f64) -> Vec<bool> {
  let x0 = path.config.x0;
  let mut alive = true;
  path
    .times
    .iter()
    .zip(&path.observed)
    .map(|(&t, &x)| {
      alive = alive && x >= 0.5 * x0 * (-bound * t).exp();
      alive
    })
    .collect()
}

/// Which increments `dY` feed the truncated estimator.
#[derive(Debug, Clone, Copy)]
pub enum AltVariant<'a> {
  /// `dY = I(A) dX / X`, computable from the observations alone.
  Observable,
  /// `dY = theta I(A) dt + eps 2 x0^{-1} e^{LT} I(A) dZ`, which needs the
  /// true trend and the driving noise.
  Literal(&'a Trend),
}

/// Increments of `Y` on the grid.
pub fn alternate_increments(path: &SdePath, bound: f64, variant: AltVariant<'_>) -> Vec<f64> {
  let indicator = event_indicator(path, bound);
  let n = path.times.len() - 1;
  let cfg = &path.config;
  let noise_factor = 2.0 / cfg.x0 * (bound * cfg.horizon).exp();
  (0..n)
    .map(|j| {
      if !indicator[j] {
        return 0.0;
      }
      match variant {
        AltVariant::Observable => (path.observed[j + 1] - path.observed[j]) / path.observed[j],
        AltVariant::Literal(trend) => {
          let dt = path.times[j + 1] - path.times[j];
          trend.value(path.times[j]) * dt + cfg.eps * noise_factor * (path.noise[j + 1] - path.noise[j])
        }
      }
    })
    .collect()
}

/// Truncated estimates of `theta(t)` at each of `times`.
pub fn alternate_series(
  path: &SdePath,
  cfg: &EstimatorConfig,
  times: &[f64],
  bound: f64,
  variant: AltVariant<'_>,
) -> Result<Vec<f64>> {
  let n = path.times.len() - 1;
  if !event_indicator(path, bound)[n] {
    return Ok(vec![0.0; times.len()]);
  }
  let dy = alternate_increments(path, bound, variant);
  times
    .iter()
    .map(|&t| {
      let total: f64 = cfg
        .weights_at(&path.times, t)?
        .into_iter()
        .map(|(j, w)| w * dy[j])
        .sum();
      Ok(total / cfg.bandwidth)
    })
    .collect()
}

pub fn alternate_estimate(
  path: &SdePath,
  cfg: &EstimatorConfig,
  t: f64,
  bound: f64,
  variant: AltVariant<'_>,
) -> Result<f64> {
  Ok(alternate_series(path, cfg, &[t], bound, variant)?[0])
}
