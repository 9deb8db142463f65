//! Replicated experiments: consistency sweeps, rate regressions and
//! moment checks of the normalized error.
//!
//! Replication `r` of rung `i` on panel trend `p` draws its path from the
//! stream `derive_seed(seed, [i, p, r])`. Replications run on a rayon pool,
//! are collected in index order and reduced by pairwise summation, so the
//! output does not depend on the number of workers.

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{ExperimentConfig, ExperimentKind, RuleSpec};
use crate::error::{Error, Result};
use crate::estimator::{self, AltVariant, BandwidthRule, EstimatorConfig};
use crate::kernel::{make_order_k_kernel, Kernel};
use crate::rng;
use crate::sde::{PathConfig, SdeSimulator};
use crate::stats;
use crate::trend::Trend;

/// `min(2, 2(k+1)/(k+2-H))`, the decay exponent of the sup-MSE.
pub fn theoretical_rate_main(k: usize, hurst: f64) -> Result<f64> {
  crate::error::check_hurst(hurst)?;
  let k = k as f64;
  Ok(f64::min(2.0, 2.0 * (k + 1.0) / (k + 2.0 - hurst)))
}

/// `min(4, 2 rho/(rho-H))` for the truncated estimator.
pub fn theoretical_rate_alt(rho: f64, hurst: f64) -> Result<f64> {
  crate::error::check_hurst(hurst)?;
  if rho <= hurst {
    return Err(Error::domain("rho", format!("smoothness {rho} must exceed H = {hurst}")));
  }
  Ok(f64::min(4.0, 2.0 * rho / (rho - hurst)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
  pub eps: f64,
  pub statistic: String,
  pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
  pub name: String,
  pub detail: String,
  /// `None` for quantities that are reported without a verdict.
  pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
  pub name: String,
  pub eps: Vec<f64>,
  pub sup_mse: Vec<f64>,
  pub log_eps: Vec<f64>,
  pub log_mse: Vec<f64>,
  pub slope: f64,
  pub intercept: f64,
  pub residual_norm: f64,
  pub theoretical: f64,
}

impl RateFit {
  pub fn new(name: impl Into<String>, eps: &[f64], sup_mse: &[f64], theoretical: f64) -> Result<Self> {
    if let Some(bad) = sup_mse.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
      return Err(Error::FitDegenerate(format!("sup-MSE {bad} cannot be log-transformed")));
    }
    if eps.len() < 2 || eps.windows(2).any(|w| w[1] >= w[0]) {
      return Err(Error::FitDegenerate("eps abscissae must be strictly decreasing".into()));
    }
    let log_eps: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let log_mse: Vec<f64> = sup_mse.iter().map(|m| m.ln()).collect();
    let fit = stats::ols(&log_eps, &log_mse);
    if !fit.slope.is_finite() {
      return Err(Error::FitDegenerate("fitted slope is not finite".into()));
    }
    Ok(Self {
      name: name.into(),
      eps: eps.to_vec(),
      sup_mse: sup_mse.to_vec(),
      log_eps,
      log_mse,
      slope: fit.slope,
      intercept: fit.intercept,
      residual_norm: fit.residual_norm,
      theoretical,
    })
  }

  pub fn within(&self, tolerance: f64) -> bool {
    (self.slope - self.theoretical).abs() <= tolerance
  }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
  pub config: ExperimentConfig,
  pub rows: Vec<ResultRow>,
  pub checks: Vec<Check>,
  pub fits: Vec<RateFit>,
}

impl ExperimentResult {
  fn new(config: &ExperimentConfig) -> Self {
    Self {
      config: config.clone(),
      rows: Vec::new(),
      checks: Vec::new(),
      fits: Vec::new(),
    }
  }

  pub fn label(&self) -> &str {
    &self.config.label
  }

  pub fn passed(&self) -> bool {
    self.checks.iter().all(|c| c.pass != Some(false))
  }

  fn row(&mut self, eps: f64, statistic: impl Into<String>, value: f64) {
    self.rows.push(ResultRow {
      eps,
      statistic: statistic.into(),
      value,
    });
  }

  fn check(&mut self, name: impl Into<String>, detail: String, pass: Option<bool>) {
    self.checks.push(Check {
      name: name.into(),
      detail,
      pass,
    });
  }
}

pub fn build_pool(workers: usize) -> Result<ThreadPool> {
  rayon::ThreadPoolBuilder::new()
    .num_threads(workers.max(1))
    .build()
    .map_err(|e| Error::domain("workers", e.to_string()))
}

/// Kernel of order `k` rescaled to the configured support width.
pub fn experiment_kernel(cfg: &ExperimentConfig) -> Result<Kernel> {
  make_order_k_kernel(cfg.k)?.rescaled(cfg.kernel_width)
}

fn rule_exponent(cfg: &ExperimentConfig) -> Result<f64> {
  match cfg.rule {
    RuleSpec::Main => Ok(1.0 / (cfg.k as f64 - cfg.hurst + 2.0)),
    RuleSpec::Alt => {
      if cfg.rho() <= cfg.hurst {
        return Err(Error::domain("rho", "smoothness must exceed H"));
      }
      Ok(1.0 / (cfg.rho() - cfg.hurst))
    }
    RuleSpec::Power(e) => Ok(e),
  }
}

pub fn bandwidth_for(cfg: &ExperimentConfig, eps: f64) -> Result<f64> {
  match cfg.rule {
    RuleSpec::Main => estimator::bandwidth_main(eps, cfg.k, cfg.hurst),
    RuleSpec::Alt => estimator::bandwidth_alt(eps, cfg.rho(), cfg.hurst),
    RuleSpec::Power(e) => Ok(eps.powf(e)),
  }
}

pub fn estimator_for(cfg: &ExperimentConfig, kernel: &Kernel, eps: f64) -> Result<EstimatorConfig> {
  let rule = match cfg.rule {
    RuleSpec::Main => BandwidthRule::Main { k: cfg.k },
    RuleSpec::Alt => BandwidthRule::Alt { rho: cfg.rho() },
    RuleSpec::Power(_) => BandwidthRule::Fixed,
  };
  EstimatorConfig::new(
    kernel.clone(),
    bandwidth_for(cfg, eps)?,
    cfg.window,
    cfg.horizon,
    eps,
    rule,
  )?
  .with_points(cfg.points)
}

fn path_config(cfg: &ExperimentConfig, eps: f64) -> Result<PathConfig> {
  PathConfig::new(cfg.q, cfg.hurst, cfg.horizon, cfg.steps, eps, cfg.x0)?
    .with_resolution(cfg.resolution_factor * cfg.steps)
}

/// Checks `phi -> 0` and `eps^2 phi^{2H-2} -> 0` along the ladder, both as
/// exponents of `eps` and as strictly decreasing sequences.
pub fn check_side_condition(cfg: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
  let e = rule_exponent(cfg)?;
  let noise_exponent = 2.0 + e * (2.0 * cfg.hurst - 2.0);
  if e <= 0.0 || noise_exponent <= 0.0 {
    return Err(Error::ConditionViolated(format!(
      "bandwidth exponent {e} gives phi ~ eps^{e} and eps^2 phi^(2H-2) ~ eps^{noise_exponent}; both exponents must be positive"
    )));
  }
  let seq: Vec<(f64, f64)> = cfg
    .eps
    .iter()
    .map(|&eps| {
      let phi = bandwidth_for(cfg, eps)?;
      Ok((phi, eps * eps * phi.powf(2.0 * cfg.hurst - 2.0)))
    })
    .collect::<Result<_>>()?;
  if seq.windows(2).any(|w| w[1].0 >= w[0].0 || w[1].1 >= w[0].1) {
    return Err(Error::ConditionViolated(
      "phi and eps^2 phi^(2H-2) must decrease along the eps ladder".into(),
    ));
  }
  Ok(seq)
}

fn replicate<T, F>(pool: &ThreadPool, reps: usize, f: F) -> Result<Vec<T>>
where
  T: Send,
  F: Fn(u64) -> Result<T> + Sync + Send,
{
  pool.install(|| (0..reps as u64).into_par_iter().map(&f).collect())
}

/// Column means of a `reps x points` table, then the maximum over points.
fn sup_of_means(table: &[Vec<f64>], times: &[f64]) -> (f64, f64) {
  let mut best = (f64::NEG_INFINITY, f64::NAN);
  let mut column = vec![0.0; table.len()];
  for (i, &t) in times.iter().enumerate() {
    for (slot, row) in column.iter_mut().zip(table) {
      *slot = row[i];
    }
    let m = stats::mean(&column);
    if m > best.0 {
      best = (m, t);
    }
  }
  best
}

fn product_truth(trend: &Trend, x0: f64, t: f64) -> f64 {
  trend.value(t) * trend.deterministic_solution(x0, t)
}

/// Monte Carlo `sup_{t, theta in panel} E |theta_hat_t X_t - theta(t) x_t|^2`
/// at one rung.
fn sup_mse_main(cfg: &ExperimentConfig, pool: &ThreadPool, kernel: &Kernel, rung: usize, eps: f64) -> Result<(f64, f64)> {
  let est = estimator_for(cfg, kernel, eps)?;
  let times = est.eval_times();
  let mut best = (f64::NEG_INFINITY, f64::NAN);
  for (p, trend) in cfg.trends.iter().enumerate() {
    let sim = SdeSimulator::new(trend.clone(), path_config(cfg, eps)?)?;
    let truth: Vec<f64> = times.iter().map(|&t| product_truth(trend, cfg.x0, t)).collect();
    let table = replicate(pool, cfg.reps, |r| {
      let path = sim.sample(rng::derive_seed(cfg.seed, &[rung as u64, p as u64, r]));
      times
        .iter()
        .zip(&truth)
        .map(|(&t, j)| Ok((estimator::kernel_estimate_product(&path, &est, t)? - j).powi(2)))
        .collect::<Result<Vec<f64>>>()
    })?;
    let sup = sup_of_means(&table, &times);
    if sup.0 > best.0 {
      best = sup;
    }
  }
  Ok(best)
}

pub fn run_consistency(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<ExperimentResult> {
  let side = check_side_condition(cfg)?;
  let kernel = experiment_kernel(cfg)?;
  let mut result = ExperimentResult::new(cfg);
  let mut sups = Vec::with_capacity(cfg.eps.len());
  for (rung, &eps) in cfg.eps.iter().enumerate() {
    let (sup, at) = sup_mse_main(cfg, pool, &kernel, rung, eps)?;
    result.row(eps, "bandwidth", side[rung].0);
    result.row(eps, "noise_scale", side[rung].1);
    result.row(eps, "sup_mse", sup);
    result.row(eps, "argmax_t", at);
    sups.push(sup);
  }
  let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
  let list: Vec<String> = sups.iter().map(|s| format!("{s:.6e}")).collect();
  result.check("monotone", format!("sup_mse=[{}], pass={decreasing}", list.join(", ")), Some(decreasing));
  let (first, last) = (sups[0], sups[sups.len() - 1]);
  let quartered = last < first / 4.0;
  result.check(
    "final-below-quarter",
    format!("final={last:.6e}, first/4={:.6e}, pass={quartered}", first / 4.0),
    Some(quartered),
  );
  if cfg.ceiling.is_finite() {
    let below = last < cfg.ceiling;
    result.check(
      "ceiling",
      format!("final={last:.6e}, ceiling={}, pass={below}", cfg.ceiling),
      Some(below),
    );
  }
  Ok(result)
}

fn slope_check(result: &mut ExperimentResult, fit: &RateFit, tolerance: f64, verdict: bool) {
  let pass = fit.within(tolerance);
  let shown = if verdict { pass.to_string() } else { "n/a".into() };
  result.check(
    format!("slope-{}", fit.name),
    format!(
      "slope={:.4}, theory={:.4}, tol={}, pass={shown}",
      fit.slope, fit.theoretical, tolerance
    ),
    verdict.then_some(pass),
  );
}

pub fn run_rate(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<ExperimentResult> {
  let kernel = experiment_kernel(cfg)?;
  let theory = theoretical_rate_main(cfg.k, cfg.hurst)?;
  let mut result = ExperimentResult::new(cfg);
  let mut sups = Vec::with_capacity(cfg.eps.len());
  for (rung, &eps) in cfg.eps.iter().enumerate() {
    let (sup, at) = sup_mse_main(cfg, pool, &kernel, rung, eps)?;
    result.row(eps, "bandwidth", bandwidth_for(cfg, eps)?);
    result.row(eps, "sup_mse", sup);
    result.row(eps, "argmax_t", at);
    sups.push(sup);
  }
  let fit = RateFit::new("main", &cfg.eps, &sups, theory)?;
  slope_check(&mut result, &fit, cfg.slope_tol, true);
  result.fits.push(fit);
  Ok(result)
}

pub fn run_rate_alt(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<ExperimentResult> {
  let kernel = experiment_kernel(cfg)?;
  let theory = theoretical_rate_alt(cfg.rho(), cfg.hurst)?;
  let mut result = ExperimentResult::new(cfg);
  let mut literal_sups = Vec::with_capacity(cfg.eps.len());
  let mut observable_sups = Vec::with_capacity(cfg.eps.len());
  for (rung, &eps) in cfg.eps.iter().enumerate() {
    let est = estimator_for(cfg, &kernel, eps)?;
    let times = est.eval_times();
    let mut best = [(f64::NEG_INFINITY, f64::NAN); 2];
    let mut events = Vec::new();
    for (p, trend) in cfg.trends.iter().enumerate() {
      let bound = trend.bound(cfg.horizon);
      let sim = SdeSimulator::new(trend.clone(), path_config(cfg, eps)?)?;
      let truth: Vec<f64> = times.iter().map(|&t| trend.value(t)).collect();
      let rows = replicate(pool, cfg.reps, |r| {
        let path = sim.sample(rng::derive_seed(cfg.seed, &[rung as u64, p as u64, r]));
        let squared = |v: Vec<f64>| -> Vec<f64> { v.iter().zip(&truth).map(|(e, t)| (e - t).powi(2)).collect() };
        let literal = estimator::alternate_series(&path, &est, &times, bound, AltVariant::Literal(trend))?;
        let observable = estimator::alternate_series(&path, &est, &times, bound, AltVariant::Observable)?;
        let alive = *estimator::event_indicator(&path, bound).last().expect("non-empty path");
        Ok((squared(literal), squared(observable), alive))
      })?;
      let (literal, rest): (Vec<Vec<f64>>, Vec<(Vec<f64>, bool)>) = rows.into_iter().map(|(a, b, c)| (a, (b, c))).unzip();
      let (observable, alive): (Vec<Vec<f64>>, Vec<bool>) = rest.into_iter().unzip();
      for (slot, table) in best.iter_mut().zip([&literal, &observable]) {
        let sup = sup_of_means(table, &times);
        if sup.0 > slot.0 {
          *slot = sup;
        }
      }
      events.extend(alive.into_iter().map(|a| f64::from(u8::from(a))));
    }
    result.row(eps, "bandwidth", est.bandwidth);
    result.row(eps, "sup_mse_literal", best[0].0);
    result.row(eps, "sup_mse_observable", best[1].0);
    result.row(eps, "event_rate", stats::mean(&events));
    literal_sups.push(best[0].0);
    observable_sups.push(best[1].0);
  }
  let literal = RateFit::new("literal", &cfg.eps, &literal_sups, theory)?;
  let observable = RateFit::new("observable", &cfg.eps, &observable_sups, theory)?;
  slope_check(&mut result, &literal, cfg.slope_tol, true);
  slope_check(&mut result, &observable, cfg.slope_tol, false);
  result.fits.push(literal);
  result.fits.push(observable);
  Ok(result)
}

/// Summary of normalized errors at one rung and trend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
  pub mean: f64,
  pub std_error: f64,
  pub variance: f64,
  pub variance_std_error: f64,
  pub sigma2: f64,
}

/// Normalized errors `eps^{-(k+1)/(k-H+2)} (theta_hat_t X_t - J(t)) - B(t)`
/// where `B` is the bias centering term.
pub fn normalized_errors(
  cfg: &ExperimentConfig,
  pool: &ThreadPool,
  kernel: &Kernel,
  trend: &Trend,
  eps: f64,
  tags: [u64; 2],
) -> Result<Vec<f64>> {
  let est = estimator_for(cfg, kernel, eps)?;
  let t = cfg.clt_t;
  let scale = eps.powf(-((cfg.k + 1) as f64) / (cfg.k as f64 - cfg.hurst + 2.0));
  let centre = estimator::bias_center_term(trend, cfg.x0, t, cfg.k, kernel)?;
  let truth = product_truth(trend, cfg.x0, t);
  let sim = SdeSimulator::new(trend.clone(), path_config(cfg, eps)?)?;
  replicate(pool, cfg.reps, |r| {
    let path = sim.sample(rng::derive_seed(cfg.seed, &[tags[0], tags[1], r]));
    Ok(scale * (estimator::kernel_estimate_product(&path, &est, t)? - truth) - centre)
  })
}

pub fn run_clt(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<ExperimentResult> {
  let kernel = experiment_kernel(cfg)?;
  let sigma2 = kernel.sigma2_h(cfg.hurst)?;
  let mut result = ExperimentResult::new(cfg);
  for (rung, &eps) in cfg.eps.iter().enumerate() {
    for (p, trend) in cfg.trends.iter().enumerate() {
      let errors = normalized_errors(cfg, pool, &kernel, trend, eps, [rung as u64, p as u64])?;
      let m = MomentSummary {
        mean: stats::mean(&errors),
        std_error: stats::std_error(&errors),
        variance: stats::variance(&errors),
        variance_std_error: stats::variance_std_error(&errors),
        sigma2,
      };
      let suffix = if cfg.trends.len() > 1 { format!("[{p}]") } else { String::new() };
      result.row(eps, format!("bandwidth{suffix}"), bandwidth_for(cfg, eps)?);
      result.row(eps, format!("mean{suffix}"), m.mean);
      result.row(eps, format!("std_error{suffix}"), m.std_error);
      result.row(eps, format!("variance{suffix}"), m.variance);
      result.row(eps, format!("variance_std_error{suffix}"), m.variance_std_error);
      result.row(eps, format!("sigma2{suffix}"), m.sigma2);
      let mean_ok = m.mean.abs() <= 3.0 * m.std_error;
      result.check(
        format!("mean{suffix}@eps={eps}"),
        format!("mean={:.5}, 3se={:.5}, pass={mean_ok}", m.mean, 3.0 * m.std_error),
        Some(mean_ok),
      );
      let ratio = m.variance / sigma2;
      let var_ok = (ratio - 1.0).abs() <= cfg.clt_var_tol;
      result.check(
        format!("variance{suffix}@eps={eps}"),
        format!(
          "variance={:.5}, sigma2={:.5}, ratio={ratio:.4}, tol={}, pass={var_ok}",
          m.variance, sigma2, cfg.clt_var_tol
        ),
        Some(var_ok),
      );
    }
  }
  Ok(result)
}

pub fn run_experiment(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<ExperimentResult> {
  cfg.validate()?;
  match cfg.kind {
    ExperimentKind::Consistency => run_consistency(cfg, pool),
    ExperimentKind::RateMain => run_rate(cfg, pool),
    ExperimentKind::Clt => run_clt(cfg, pool),
    ExperimentKind::RateAlt => run_rate_alt(cfg, pool),
  }
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn theoretical_rates() {
    assert!((theoretical_rate_main(1, 0.7).unwrap() - 4.0 / 2.3).abs() < 1e-15);
    assert!((theoretical_rate_main(3, 0.7).unwrap() - 8.0 / 4.3).abs() < 1e-15);
    assert!((theoretical_rate_alt(2.0, 0.7).unwrap() - 4.0 / 1.3).abs() < 1e-15);
    assert_eq!(theoretical_rate_alt(1.2, 0.6).unwrap(), 4.0);
    assert!((theoretical_rate_alt(1e9, 0.7).unwrap() - 2.0).abs() < 1e-8);
    assert!(theoretical_rate_alt(0.6, 0.7).is_err());
    assert!(theoretical_rate_main(1, 1.0).is_err());
  }

  #[test]
  fn side_condition_rejects_wide_bandwidths() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Consistency, vec![0.2, 0.1]);
    assert!(check_side_condition(&cfg).is_ok());
    cfg.rule = RuleSpec::Power(4.0);
    assert!(matches!(check_side_condition(&cfg), Err(Error::ConditionViolated(_))));
    cfg.rule = RuleSpec::Power(-0.1);
    assert!(matches!(check_side_condition(&cfg), Err(Error::ConditionViolated(_))));
  }

  #[test]
  fn degenerate_fit() {
    assert!(matches!(
      RateFit::new("x", &[0.1, 0.05], &[1.0, 0.0], 1.0),
      Err(Error::FitDegenerate(_))
    ));
    let fit = RateFit::new("x", &[0.1, 0.05, 0.025], &[1e-2, 2.5e-3, 6.25e-4], 2.0).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-12);
  }
}
