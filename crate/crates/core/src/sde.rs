//! Observation process `dX = theta(t) X dt + eps dZ`, its deterministic
//! limit, and pathwise/mean-square checks of the Gronwall bounds.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite::{HermitePath, HermiteSampler, HermiteSpec, DEFAULT_RESOLUTION_FACTOR};
use crate::rng;
use crate::stats;
use crate::trend::Trend;

pub const MIN_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
  pub horizon: f64,
  pub steps: usize,
  pub eps: f64,
  pub x0: f64,
  pub order: u32,
  pub hurst: f64,
  pub resolution: usize,
}

impl PathConfig {
  pub fn new(order: u32, hurst: f64, horizon: f64, steps: usize, eps: f64, x0: f64) -> Result<Self> {
    let cfg = Self {
      horizon,
      steps,
      eps,
      x0,
      order,
      hurst,
      resolution: DEFAULT_RESOLUTION_FACTOR * steps,
    };
    cfg.validate()?;
    Ok(cfg)
  }

  pub fn with_resolution(mut self, resolution: usize) -> Result<Self> {
    self.resolution = resolution;
    self.validate()?;
    Ok(self)
  }

  pub fn with_eps(mut self, eps: f64) -> Result<Self> {
    self.eps = eps;
    self.validate()?;
    Ok(self)
  }

  pub fn validate(&self) -> Result<()> {
    if self.steps < MIN_STEPS {
      return Err(Error::domain("n", format!("grid steps {} must be at least {MIN_STEPS}", self.steps)));
    }
    if !(0.0..=1.0).contains(&self.eps) {
      return Err(Error::domain("eps", format!("noise scale {} must lie in [0, 1]", self.eps)));
    }
    if self.x0 == 0.0 || !self.x0.is_finite() {
      return Err(Error::domain("x0", "initial value must be finite and nonzero"));
    }
    self.hermite_spec().map(|_| ())
  }

  pub fn hermite_spec(&self) -> Result<HermiteSpec> {
    HermiteSpec::new(self.order, self.hurst, self.horizon, self.steps, self.resolution)
  }

  pub fn step(&self) -> f64 {
    self.horizon / self.steps as f64
  }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdePath {
  pub times: Vec<f64>,
  /// Observed process `X`.
  pub observed: Vec<f64>,
  /// Deterministic limit `x`.
  pub limit: Vec<f64>,
  /// Driving Hermite path `Z`.
  pub noise: Vec<f64>,
  pub config: PathConfig,
  pub seed: u64,
}

/// Cumulative `∫_0^{t_j} theta` by composite Simpson on each grid cell.
pub fn cumulative_integral(trend: &Trend, times: &[f64]) -> Vec<f64> {
  let mut out = Vec::with_capacity(times.len());
  let mut acc = 0.0;
  out.push(0.0);
  for w in times.windows(2) {
    let (a, b) = (w[0], w[1]);
    acc += (b - a) / 6.0 * (trend.value(a) + 4.0 * trend.value(0.5 * (a + b)) + trend.value(b));
    out.push(acc);
  }
  out
}

/// Solution of `dx/dt = theta(t) x` on the grid.
pub fn solve_ode(trend: &Trend, x0: f64, times: &[f64]) -> Vec<f64> {
  cumulative_integral(trend, times)
    .into_iter()
    .map(|big_theta| x0 * big_theta.exp())
    .collect()
}

fn check_grid(config: &PathConfig, noise: &HermitePath) -> Result<()> {
  if noise.values.len() != config.steps + 1 || noise.spec.horizon != config.horizon {
    return Err(Error::GridMismatch(format!(
      "noise path has {} points on [0, {}], expected {} on [0, {}]",
      noise.values.len(),
      noise.spec.horizon,
      config.steps + 1,
      config.horizon
    )));
  }
  Ok(())
}

/// Variation of constants:
/// `X_t = e^{Θ(t)} (x0 + eps Σ_{j} e^{-Θ(t_j)} ΔZ_j)`.
///
/// The Stieltjes sum is evaluated in Abel form
/// `w_{J-1} Z_J - Σ_{j=1}^{J-1} (w_j - w_{j-1}) Z_j`, which is identical to
/// the left-point sum but reproduces `Z_J` exactly when `theta = 0`.
pub fn simulate_sde(trend: &Trend, config: &PathConfig, noise: &HermitePath) -> Result<SdePath> {
  check_grid(config, noise)?;
  let big_theta = cumulative_integral(trend, &noise.times);
  Ok(variation_of_constants(config, noise, &big_theta))
}

fn variation_of_constants(config: &PathConfig, noise: &HermitePath, big_theta: &[f64]) -> SdePath {
  let z = &noise.values;
  let growth: Vec<f64> = big_theta.iter().map(|v| v.exp()).collect();
  let weights: Vec<f64> = big_theta.iter().map(|v| (-v).exp()).collect();
  let mut observed = Vec::with_capacity(z.len());
  observed.push(config.x0);
  let mut correction = 0.0;
  for j in 1..z.len() {
    if j >= 2 {
      correction += (weights[j - 1] - weights[j - 2]) * z[j - 1];
    }
    let stieltjes = weights[j - 1] * z[j] - correction;
    observed.push(growth[j] * (config.x0 + config.eps * stieltjes));
  }
  let limit = growth.iter().map(|g| config.x0 * g).collect();
  SdePath {
    times: noise.times.clone(),
    observed,
    limit,
    noise: z.clone(),
    config: *config,
    seed: noise.seed,
  }
}

/// Explicit Euler scheme `X_{j+1} = X_j (1 + theta(t_j) Δ) + eps ΔZ_j`.
pub fn simulate_sde_euler(trend: &Trend, config: &PathConfig, noise: &HermitePath) -> Result<Vec<f64>> {
  check_grid(config, noise)?;
  let z = &noise.values;
  let t = &noise.times;
  let mut x = Vec::with_capacity(z.len());
  x.push(config.x0);
  for j in 0..z.len() - 1 {
    let dt = t[j + 1] - t[j];
    let next = x[j] * (1.0 + trend.value(t[j]) * dt) + config.eps * (z[j + 1] - z[j]);
    x.push(next);
  }
  Ok(x)
}

/// Reusable path generator for replicated experiments.
#[derive(Debug, Clone)]
pub struct SdeSimulator {
  trend: Trend,
  config: PathConfig,
  sampler: HermiteSampler,
  big_theta: Vec<f64>,
}

impl SdeSimulator {
  pub fn new(trend: Trend, config: PathConfig) -> Result<Self> {
    config.validate()?;
    let sampler = HermiteSampler::new(config.hermite_spec()?)?;
    let big_theta = cumulative_integral(&trend, sampler.times());
    Ok(Self {
      trend,
      config,
      sampler,
      big_theta,
    })
  }

  pub fn trend(&self) -> &Trend {
    &self.trend
  }

  pub fn config(&self) -> &PathConfig {
    &self.config
  }

  pub fn sampler(&self) -> &HermiteSampler {
    &self.sampler
  }

  pub fn sample(&self, seed: u64) -> SdePath {
    let noise = self.sampler.sample(seed);
    variation_of_constants(&self.config, &noise, &self.big_theta)
  }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallReport {
  /// `max_t |X_t - x_t| / bound_t` over points with a positive bound.
  pub max_ratio: f64,
  pub worst_t: f64,
}

/// Checks `|X_t - x_t| <= eps e^{L t} sup_{s<=t} |Z_s|` at every grid point.
pub fn gronwall_check(path: &SdePath, bound: f64) -> Result<GronwallReport> {
  let eps = path.config.eps;
  let mut running_sup = 0.0f64;
  let mut report = GronwallReport {
    max_ratio: 0.0,
    worst_t: 0.0,
  };
  for j in 0..path.times.len() {
    let t = path.times[j];
    running_sup = running_sup.max(path.noise[j].abs());
    let deviation = (path.observed[j] - path.limit[j]).abs();
    let limit = eps * (bound * t).exp() * running_sup;
    let slack = 10.0 * f64::EPSILON * path.observed[j].abs().max(path.limit[j].abs());
    if deviation > limit + slack {
      return Err(Error::Violation {
        t,
        deviation,
        bound: limit,
      });
    }
    if limit > 0.0 && deviation / limit > report.max_ratio {
      report = GronwallReport {
        max_ratio: deviation / limit,
        worst_t: t,
      };
    }
  }
  Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanSquareReport {
  pub config: PathConfig,
  /// Monte Carlo `sup_t E (X_t - x_t)^2`.
  pub sup_mse: f64,
  pub argmax_t: f64,
  /// Relative standard error of the estimate at the maximizing time.
  pub relative_error: f64,
  /// `e^{2LT} eps^2 T^{2H}`.
  pub bound: f64,
}

impl MeanSquareReport {
  pub fn passes(&self) -> bool {
    self.sup_mse <= self.bound * (1.0 + 3.0 * self.relative_error)
  }
}

/// Monte Carlo check of `sup_t E (X_t - x_t)^2 <= e^{2LT} eps^2 T^{2H}` for
/// each configuration.
pub fn mean_square_bound_check(
  trend: &Trend,
  configs: &[PathConfig],
  reps: usize,
  seed: u64,
) -> Result<Vec<MeanSquareReport>> {
  if reps < 500 {
    return Err(Error::domain("reps", "mean-square check needs at least 500 replications"));
  }
  configs
    .iter()
    .map(|config| {
      let sim = SdeSimulator::new(trend.clone(), *config)?;
      let squares: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
          let path = sim.sample(rng::derive_seed(seed, &[rep]));
          path
            .observed
            .iter()
            .zip(&path.limit)
            .map(|(x, y)| (x - y) * (x - y))
            .collect()
        })
        .collect();
      let points = config.steps + 1;
      let mut best = (0.0, 0.0, 0.0);
      let mut column = vec![0.0; reps];
      for j in 0..points {
        for (slot, row) in column.iter_mut().zip(&squares) {
          *slot = row[j];
        }
        let m = stats::mean(&column);
        if m > best.0 || j == 0 {
          let rel = if m > 0.0 { stats::std_error(&column) / m } else { 0.0 };
          best = (m, j as f64 * config.step(), rel);
        }
      }
      let bound_l = trend.bound(config.horizon);
      Ok(MeanSquareReport {
        config: *config,
        sup_mse: best.0,
        argmax_t: best.1,
        relative_error: best.2,
        bound: (2.0 * bound_l * config.horizon).exp() * config.eps * config.eps * config.horizon.powf(2.0 * config.hurst),
      })
    })
    .collect()
}

/// Writes the path CSV: `# key=value` header lines followed by `t,Z,x,X`.
pub fn write_path_csv<W: Write>(out: &mut W, path: &SdePath, header: &[(String, String)]) -> std::io::Result<()> {
  for (k, v) in header {
    writeln!(out, "# {k}={v}")?;
  }
  writeln!(out, "t,Z,x,X")?;
  for j in 0..path.times.len() {
    writeln!(
      out,
      "{},{},{},{}",
      path.times[j], path.noise[j], path.limit[j], path.observed[j]
    )?;
  }
  Ok(())
}

/// Columns and header of a path CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
  pub header: BTreeMap<String, String>,
  pub times: Vec<f64>,
  pub noise: Vec<f64>,
  pub limit: Vec<f64>,
  pub observed: Vec<f64>,
}

pub fn read_path_csv<R: BufRead>(input: R) -> Result<PathTable> {
  let mut table = PathTable {
    header: BTreeMap::new(),
    times: Vec::new(),
    noise: Vec::new(),
    limit: Vec::new(),
    observed: Vec::new(),
  };
  let mut seen_columns = false;
  for (idx, line) in input.lines().enumerate() {
    let line = line.map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
    let line = line.trim();
    if line.is_empty() {
      continue;
    }
    if let Some(rest) = line.strip_prefix('#') {
      if let Some((k, v)) = rest.trim().split_once('=') {
        table.header.insert(k.trim().to_string(), v.trim().to_string());
      }
      continue;
    }
    if !seen_columns {
      if line.replace(' ', "") != "t,Z,x,X" {
        return Err(Error::Parse(format!("line {}: expected column header `t,Z,x,X`", idx + 1)));
      }
      seen_columns = true;
      continue;
    }
    let values = line
      .split(',')
      .map(|v| v.trim().parse::<f64>())
      .collect::<std::result::Result<Vec<f64>, _>>()
      .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
    if values.len() != 4 {
      return Err(Error::Parse(format!("line {}: expected 4 columns", idx + 1)));
    }
    table.times.push(values[0]);
    table.noise.push(values[1]);
    table.limit.push(values[2]);
    table.observed.push(values[3]);
  }
  if !seen_columns {
    return Err(Error::Parse("missing column header `t,Z,x,X`".into()));
  }
  Ok(table)
}
