use std::f64::consts::TAU;

use hermite_trend::estimator::{
  alternate_estimate, bandwidth_alt, bandwidth_main, kernel_estimate_product, kernel_estimate_theta, AltVariant,
  BandwidthRule, EstimatorConfig, WeightRule,
};
use hermite_trend::kernel::{make_order_k_kernel, Kernel};
use hermite_trend::rng::derive_seed;
use hermite_trend::sde::{PathConfig, SdePath, SdeSimulator};
use hermite_trend::stats;
use hermite_trend::trend::Trend;

fn sine() -> Trend {
  Trend::Sine {
    offset: 0.0,
    amplitude: 0.5,
    omega: TAU,
  }
}

fn fixed(kernel: Kernel, phi: f64) -> EstimatorConfig {
  EstimatorConfig::new(kernel, phi, (0.3, 0.7), 1.0, 0.0, BandwidthRule::Fixed).unwrap()
}

fn noiseless(trend: &Trend, n: usize) -> SdePath {
  let cfg = PathConfig::new(1, 0.7, 1.0, n, 0.0, 1.0).unwrap();
  SdeSimulator::new(trend.clone(), cfg).unwrap().sample(0)
}

fn log_slope(x: &[f64], y: &[f64]) -> f64 {
  let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
  let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
  stats::ols(&lx, &ly).slope
}

#[test]
fn noiseless_error_decays_with_kernel_order() {
  let trend = sine();
  let path = noiseless(&trend, 1 << 14);
  let t = 0.45;
  let truth = trend.value(t) * trend.deterministic_solution(1.0, t);
  // Symmetric kernels of even order also kill moment k+1, so only odd
  // orders have bias exactly of order phi^{k+1}.
  for k in [1usize, 3] {
    let kernel = make_order_k_kernel(k).unwrap().rescaled(1.0).unwrap();
    let phis: Vec<f64> = (3..=7).map(|e| 2f64.powi(-e)).collect();
    let errors: Vec<f64> = phis
      .iter()
      .map(|&phi| (kernel_estimate_product(&path, &fixed(kernel.clone(), phi), t).unwrap() - truth).abs())
      .collect();
    let slope = log_slope(&phis, &errors);
    assert!((slope - (k + 1) as f64).abs() <= 0.3, "k={k}: slope {slope}, errors {errors:?}");
  }
}

#[test]
fn noiseless_constant_trend_recovers_product_and_theta() {
  let c = 0.8;
  let path = noiseless(&Trend::Const(c), 1 << 12);
  let cfg = fixed(make_order_k_kernel(1).unwrap(), 0.1);
  for &t in &[0.3, 0.5, 0.7] {
    let product = kernel_estimate_product(&path, &cfg, t).unwrap();
    assert!((product - c * (c * t).exp()).abs() < 2e-3);
    let theta = kernel_estimate_theta(&path, &cfg, t, 0.5).unwrap().unwrap();
    assert!((theta - c).abs() < 2e-3);
  }
}

/// Keeps every `factor`-th grid point of a path.
fn thin(path: &SdePath, factor: usize) -> SdePath {
  let pick = |v: &[f64]| v.iter().step_by(factor).copied().collect::<Vec<f64>>();
  let config = PathConfig::new(
    path.config.order,
    path.config.hurst,
    path.config.horizon,
    path.config.steps / factor,
    path.config.eps,
    path.config.x0,
  )
  .unwrap();
  SdePath {
    times: pick(&path.times),
    observed: pick(&path.observed),
    limit: pick(&path.limit),
    noise: pick(&path.noise),
    config,
    seed: path.seed,
  }
}

#[test]
fn grid_refinement_is_stable() {
  let eps = 0.05;
  let cfg = PathConfig::new(1, 0.7, 1.0, 8192, eps, 1.0).unwrap();
  let sim = SdeSimulator::new(sine(), cfg).unwrap();
  let phi = bandwidth_main(eps, 1, 0.7).unwrap();
  let kernel = make_order_k_kernel(1).unwrap().rescaled(1.0).unwrap();
  for weights in [WeightRule::CellAverage, WeightRule::Midpoint] {
    let est = EstimatorConfig::new(kernel.clone(), phi, (0.25, 0.75), 1.0, eps, BandwidthRule::Main { k: 1 })
      .unwrap()
      .with_weights(weights);
    for seed in 0..5 {
      let fine = sim.sample(seed);
      let coarse = thin(&fine, 2);
      for &t in &[0.3, 0.5, 0.7] {
        let a = kernel_estimate_product(&fine, &est, t).unwrap();
        let b = kernel_estimate_product(&coarse, &est, t).unwrap();
        assert!((a - b).abs() < 1e-3, "{weights:?} seed {seed} t {t}: {a} vs {b}");
      }
    }
  }
}

#[test]
fn theta_mse_at_midpoint_is_small() {
  let eps = 0.01;
  let cfg = PathConfig::new(1, 0.7, 1.0, 4096, eps, 1.0).unwrap();
  let trend = sine();
  let sim = SdeSimulator::new(trend.clone(), cfg).unwrap();
  let kernel = make_order_k_kernel(1).unwrap().rescaled(1.0).unwrap();
  let est = EstimatorConfig::new(
    kernel,
    bandwidth_main(eps, 1, 0.7).unwrap(),
    (0.25, 0.75),
    1.0,
    eps,
    BandwidthRule::Main { k: 1 },
  )
  .unwrap();
  let floor = 0.5 * (-trend.bound(1.0)).exp();
  let errors: Vec<f64> = (0..500)
    .map(|r| {
      let path = sim.sample(derive_seed(17, &[r]));
      let theta = kernel_estimate_theta(&path, &est, 0.5, floor).unwrap().expect("path stays above the floor");
      (theta - trend.value(0.5)).powi(2)
    })
    .collect();
  let mse = stats::mean(&errors);
  assert!(mse < 1e-2, "mse {mse}");
}

#[test]
fn truncated_variants_agree_in_mean() {
  let eps = 0.02;
  let trend = sine();
  let bound = trend.bound(1.0);
  let cfg = PathConfig::new(1, 0.7, 1.0, 4096, eps, 1.0).unwrap();
  let sim = SdeSimulator::new(trend.clone(), cfg).unwrap();
  let kernel = make_order_k_kernel(1).unwrap().rescaled(1.0).unwrap();
  let est = EstimatorConfig::new(
    kernel,
    bandwidth_alt(eps, 2.0, 0.7).unwrap(),
    (0.25, 0.75),
    1.0,
    eps,
    BandwidthRule::Alt { rho: 2.0 },
  )
  .unwrap();
  let (mut literal, mut observable) = (Vec::new(), Vec::new());
  for r in 0..500 {
    let path = sim.sample(derive_seed(23, &[r]));
    literal.push(alternate_estimate(&path, &est, 0.4, bound, AltVariant::Literal(&trend)).unwrap());
    observable.push(alternate_estimate(&path, &est, 0.4, bound, AltVariant::Observable).unwrap());
  }
  let gap = stats::mean(&literal) - stats::mean(&observable);
  let se = (stats::std_error(&literal).powi(2) + stats::std_error(&observable).powi(2)).sqrt();
  assert!(gap.abs() <= 2.0 * se, "gap {gap}, se {se}");
}

#[test]
fn pure_bias_sweep_tracks_bandwidth_exponent() {
  // With eps = 0 the error is pure smoothing bias, O(phi^{k+1}), so the
  // squared error against the nominal ladder decays like eps^{2(k+1)/(k-H+2)}.
  let trend = sine();
  let path = noiseless(&trend, 1 << 13);
  let kernel = make_order_k_kernel(1).unwrap().rescaled(1.0).unwrap();
  let ladder: Vec<f64> = (3..=8).map(|e| 2f64.powi(-e)).collect();
  let sup_sq: Vec<f64> = ladder
    .iter()
    .map(|&eps| {
      let est = EstimatorConfig::new(
        kernel.clone(),
        bandwidth_main(eps, 1, 0.7).unwrap(),
        (0.25, 0.75),
        1.0,
        0.0,
        BandwidthRule::Main { k: 1 },
      )
      .unwrap();
      est
        .eval_times()
        .iter()
        .map(|&t| {
          let truth = trend.value(t) * trend.deterministic_solution(1.0, t);
          (kernel_estimate_product(&path, &est, t).unwrap() - truth).powi(2)
        })
        .fold(0.0, f64::max)
    })
    .collect();
  let slope = log_slope(&ladder, &sup_sq);
  assert!((slope - 4.0 / 2.3).abs() < 0.15, "slope {slope}");
}
