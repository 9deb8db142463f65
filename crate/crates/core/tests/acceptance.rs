//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 8`.

use std::f64::consts::TAU;
use std::time::Instant;

use num::{BigRational, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use hermite_trend::config::{ExperimentConfig, ExperimentKind};
use hermite_trend::harness::{build_pool, run_experiment, ExperimentResult};
use hermite_trend::hermite::{max_moment_scaling_check, HermiteSampler, HermiteSpec, MaxMomentConfig};
use hermite_trend::kernel::{make_order_k_kernel, Kernel, MAX_ORDER};
use hermite_trend::report::write_report;
use hermite_trend::rng::derive_seed;
use hermite_trend::sde::{gronwall_check, mean_square_bound_check, PathConfig, SdeSimulator};
use hermite_trend::stats;
use hermite_trend::trend::Trend;

const MASTER_SEED: u64 = 20_240_517;

const FIDELITY_REPS: usize = 5000;
const FIDELITY_SE: f64 = 4.0;
const FIDELITY_BUDGET_S: f64 = 120.0;
const NORMALIZATION_REL: f64 = 0.05;
const NORMALIZER_ABS: f64 = 1e-12;
const MAX_MOMENT_REPS: usize = 3000;
const KERNEL_EXACT: f64 = 1e-12;
const BOX_SIGMA2: f64 = 1e-8;
const CLOSED_VS_QUADRATURE: f64 = 1e-6;
const GRONWALL_PATHS: usize = 1000;
const MEAN_SQUARE_REPS: usize = 1000;
const CONSISTENCY_BUDGET_S: f64 = 300.0;
const RATE_BUDGET_S: f64 = 900.0;
const RATE_MAIN_TOL: f64 = 0.35;
const RATE_ALT_TOL: f64 = 0.5;
const CLT_TOL_Q1: f64 = 0.25;
const CLT_TOL_Q2: f64 = 0.35;

struct Verdict {
  pass: bool,
  detail: String,
}

fn sine() -> Trend {
  Trend::Sine {
    offset: 0.0,
    amplitude: 0.5,
    omega: TAU,
  }
}

fn verdict(parts: Vec<(bool, String)>) -> Verdict {
  Verdict {
    pass: parts.iter().all(|(p, _)| *p),
    detail: parts
      .into_iter()
      .map(|(p, d)| format!("{}{d}", if p { "" } else { "!" }))
      .collect::<Vec<_>>()
      .join("; "),
  }
}

fn process_fidelity() -> Verdict {
  let mut parts = Vec::new();
  for (c, &(q, h)) in [(1u32, 0.7), (2, 0.7), (2, 0.85)].iter().enumerate() {
    let start = Instant::now();
    let sampler = HermiteSampler::new(HermiteSpec::with_default_resolution(q, h, 1.0, 1024).unwrap()).unwrap();
    let values: Vec<[f64; 3]> = (0..FIDELITY_REPS as u64)
      .into_par_iter()
      .map(|r| {
        let z = sampler.sample(derive_seed(MASTER_SEED, &[1, c as u64, r])).values;
        [z[256], z[512], z[1024]]
      })
      .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    for (i, t) in [0.25f64, 0.5, 1.0].into_iter().enumerate() {
      let column: Vec<f64> = values.iter().map(|v| v[i]).collect();
      let z = (stats::variance(&column) - t.powf(2.0 * h)).abs() / stats::variance_std_error(&column);
      worst = worst.max(z);
    }
    parts.push((
      worst <= FIDELITY_SE && elapsed < FIDELITY_BUDGET_S,
      format!("q={q} H={h}: max |Var-t^2H|/se={worst:.2} in {elapsed:.1}s"),
    ));
  }
  verdict(parts)
}

fn brute_force_normalizer(q: u32, hurst: f64, m: usize) -> f64 {
  let h0 = 1.0 + (hurst - 1.0) / q as f64;
  let r = |k: f64| 0.5 * ((k + 1.0).abs().powf(2.0 * h0) - 2.0 * k.abs().powf(2.0 * h0) + (k - 1.0).abs().powf(2.0 * h0));
  let sum: f64 = (0..m)
    .flat_map(|i| (0..m).map(move |j| i as f64 - j as f64))
    .map(|d| r(d).powi(q as i32))
    .sum();
  let factorial: f64 = (1..=q).map(f64::from).product();
  1.0 / (factorial * sum).sqrt()
}

fn normalization() -> Verdict {
  let mut parts = Vec::new();
  for (c, &(q, h)) in [(1u32, 0.7), (2, 0.7), (2, 0.85)].iter().enumerate() {
    let sampler = HermiteSampler::new(HermiteSpec::with_default_resolution(q, h, 1.0, 512).unwrap()).unwrap();
    let squares: Vec<f64> = (0..FIDELITY_REPS as u64)
      .into_par_iter()
      .map(|r| sampler.sample(derive_seed(MASTER_SEED, &[2, c as u64, r])).values[512].powi(2))
      .collect();
    let m = stats::mean(&squares);
    parts.push(((m - 1.0).abs() <= NORMALIZATION_REL, format!("q={q} H={h}: E[Z_1^2]={m:.4}")));
  }
  for &(q, h) in &[(2u32, 0.7), (3, 0.8)] {
    let got = HermiteSampler::new(HermiteSpec::new(q, h, 1.0, 2, 4).unwrap())
      .unwrap()
      .normalizer()
      .unwrap();
    let gap = (got - brute_force_normalizer(q, h, 4)).abs();
    parts.push((gap <= NORMALIZER_ABS, format!("m=4 q={q} normalizer gap={gap:.1e}")));
  }
  verdict(parts)
}

fn maximal_moment() -> Verdict {
  let parts = [(1u32, 0.7), (2, 0.6)]
    .iter()
    .map(|&(q, h)| {
      let report = max_moment_scaling_check(&MaxMomentConfig {
        order: q,
        hurst: h,
        power: 2.0,
        horizon_1: 1.0,
        horizon_2: 4.0,
        reps: MAX_MOMENT_REPS,
        steps: 512,
        bootstrap: 2000,
        seed: derive_seed(MASTER_SEED, &[3, q as u64]),
      })
      .unwrap();
      (
        report.within_ci(),
        format!(
          "q={q} H={h}: ratio={:.4} theory={:.4} CI=[{:.4}, {:.4}]",
          report.ratio, report.theoretical, report.ci_low, report.ci_high
        ),
      )
    })
    .collect();
  verdict(parts)
}

fn exact_moment(kernel: &Kernel, j: usize) -> BigRational {
  let pow = |x: &BigRational, e: usize| (0..e).fold(BigRational::one(), |acc, _| acc * x);
  let mut total = BigRational::zero();
  for piece in kernel.pieces() {
    let lo = BigRational::from_float(piece.lo).unwrap();
    let hi = BigRational::from_float(piece.hi).unwrap();
    for (i, &c) in piece.coeffs.iter().enumerate() {
      let e = i + j + 1;
      let c = BigRational::from_float(c).unwrap();
      total += c * (pow(&hi, e) - pow(&lo, e)) / BigRational::from_integer((e as i64).into());
    }
  }
  total
}

fn kernel_exactness() -> Verdict {
  let parts = [0usize, 1, 3]
    .iter()
    .map(|&k| {
      let kernel = make_order_k_kernel(k).unwrap();
      let worst = (0..=k)
        .map(|j| {
          let target = if j == 0 { BigRational::one() } else { BigRational::zero() };
          (exact_moment(&kernel, j) - target).abs().to_f64().unwrap()
        })
        .fold(0.0, f64::max);
      (worst <= KERNEL_EXACT, format!("k={k}: max |m_j - delta_0j|={worst:.1e}"))
    })
    .collect();
  verdict(parts)
}

fn sigma2() -> Verdict {
  let unit_box = Kernel::box_kernel(-0.5, 0.5).unwrap();
  let hs = [0.55, 0.7, 0.9];
  let box_gap = hs
    .iter()
    .map(|&h| (unit_box.sigma2_h(h).unwrap() - 1.0).abs())
    .fold(0.0, f64::max);
  let mut quad_gap: f64 = 0.0;
  for k in 0..=MAX_ORDER {
    let kernel = make_order_k_kernel(k).unwrap();
    for &h in &hs {
      let closed = kernel.sigma2_h(h).unwrap();
      let quad = kernel.sigma2_h_quadrature(h).unwrap();
      quad_gap = quad_gap.max((closed - quad).abs() / closed.abs().max(1.0));
    }
  }
  verdict(vec![
    (box_gap <= BOX_SIGMA2, format!("unit box |sigma2-1|={box_gap:.1e}")),
    (
      quad_gap <= CLOSED_VS_QUADRATURE,
      format!("closed vs quadrature, k=0..{MAX_ORDER}: max gap={quad_gap:.1e}"),
    ),
  ])
}

fn gronwall() -> Verdict {
  let trend = sine();
  let bound = trend.bound(1.0);
  let cfg = PathConfig::new(2, 0.7, 1.0, 1024, 0.05, 1.0).unwrap();
  let sim = SdeSimulator::new(trend.clone(), cfg).unwrap();
  let held = (0..GRONWALL_PATHS as u64)
    .into_par_iter()
    .filter(|&r| gronwall_check(&sim.sample(derive_seed(MASTER_SEED, &[6, r])), bound).is_ok())
    .count();
  let configs = [
    cfg,
    PathConfig::new(2, 0.7, 1.0, 1024, 0.1, 1.0).unwrap(),
    PathConfig::new(1, 0.7, 1.0, 1024, 0.05, 1.0).unwrap(),
  ];
  let reports = mean_square_bound_check(&trend, &configs, MEAN_SQUARE_REPS, derive_seed(MASTER_SEED, &[6, 1 << 32])).unwrap();
  let mut parts = vec![(held == GRONWALL_PATHS, format!("sup form held on {held}/{GRONWALL_PATHS} paths"))];
  for r in reports {
    parts.push((
      r.passes(),
      format!(
        "q={} eps={}: sup E(X-x)^2={:.3e} <= bound {:.3e} (rel se {:.3})",
        r.config.order, r.config.eps, r.sup_mse, r.bound, r.relative_error
      ),
    ));
  }
  verdict(parts)
}

fn run_timed(cfg: &ExperimentConfig) -> (ExperimentResult, f64) {
  let pool = build_pool(std::thread::available_parallelism().map_or(1, |n| n.get())).unwrap();
  let start = Instant::now();
  let result = run_experiment(cfg, &pool).unwrap();
  (result, start.elapsed().as_secs_f64())
}

fn checks_line(result: &ExperimentResult) -> String {
  result
    .checks
    .iter()
    .map(|c| format!("{}: {}", c.name, c.detail))
    .collect::<Vec<_>>()
    .join(", ")
}

fn consistency() -> Verdict {
  let parts = [1u32, 2]
    .iter()
    .map(|&q| {
      let mut cfg = ExperimentConfig::new(ExperimentKind::Consistency, vec![0.2, 0.1, 0.05, 0.025]);
      cfg.q = q;
      cfg.hurst = 0.7;
      cfg.k = 1;
      cfg.reps = 500;
      cfg.steps = 4096;
      cfg.seed = derive_seed(MASTER_SEED, &[7, q as u64]);
      let (result, secs) = run_timed(&cfg);
      (
        result.passed() && secs < CONSISTENCY_BUDGET_S,
        format!("q={q} [{}] in {secs:.1}s", checks_line(&result)),
      )
    })
    .collect();
  verdict(parts)
}

fn ladder(from: i32, to: i32) -> Vec<f64> {
  (from..=to).map(|e| 2f64.powi(-e)).collect()
}

fn rate_main() -> Verdict {
  let parts = [1u32, 2]
    .iter()
    .map(|&q| {
      let mut cfg = ExperimentConfig::new(ExperimentKind::RateMain, ladder(3, 8));
      cfg.q = q;
      cfg.hurst = 0.7;
      cfg.k = 1;
      cfg.reps = 500;
      cfg.steps = 4096;
      cfg.slope_tol = RATE_MAIN_TOL;
      cfg.seed = derive_seed(MASTER_SEED, &[8, q as u64]);
      let (result, secs) = run_timed(&cfg);
      (
        result.passed() && secs < RATE_BUDGET_S,
        format!("q={q} {} in {secs:.1}s", checks_line(&result)),
      )
    })
    .collect();
  verdict(parts)
}

fn clt() -> Verdict {
  let parts = [(1u32, CLT_TOL_Q1), (2, CLT_TOL_Q2)]
    .iter()
    .map(|&(q, tol)| {
      let mut cfg = ExperimentConfig::new(ExperimentKind::Clt, vec![0.01]);
      cfg.q = q;
      cfg.hurst = 0.7;
      cfg.k = 0;
      cfg.trends = vec![Trend::Const(0.5)];
      cfg.reps = 2000;
      cfg.steps = 4096;
      cfg.clt_t = 0.5;
      cfg.clt_var_tol = tol;
      cfg.seed = derive_seed(MASTER_SEED, &[9, q as u64]);
      let (result, _) = run_timed(&cfg);
      (result.passed(), format!("q={q} [{}]", checks_line(&result)))
    })
    .collect();
  verdict(parts)
}

fn rate_alt() -> Verdict {
  let mut cfg = ExperimentConfig::new(ExperimentKind::RateAlt, ladder(3, 8));
  cfg.q = 1;
  cfg.hurst = 0.7;
  cfg.k = 1;
  cfg.gamma = 1.0;
  cfg.trends = vec![Trend::Weierstrass {
    amplitude: 0.5,
    k: 1,
    gamma: 1.0,
    terms: 6,
  }];
  cfg.reps = 500;
  cfg.steps = 4096;
  cfg.slope_tol = RATE_ALT_TOL;
  cfg.seed = derive_seed(MASTER_SEED, &[10]);
  let (result, _) = run_timed(&cfg);
  Verdict {
    pass: result.passed(),
    detail: checks_line(&result),
  }
}

fn determinism() -> Verdict {
  let mut consistency = ExperimentConfig::new(ExperimentKind::Consistency, vec![0.2, 0.1, 0.05]);
  consistency.reps = 200;
  consistency.steps = 1024;
  consistency.q = 2;
  let mut alt = ExperimentConfig::new(ExperimentKind::RateAlt, ladder(3, 6));
  alt.reps = 100;
  alt.steps = 512;
  let mut clt = ExperimentConfig::new(ExperimentKind::Clt, vec![0.02]);
  clt.k = 0;
  clt.reps = 200;
  clt.steps = 512;
  let configs = [consistency, alt, clt];
  let snapshots: Vec<Vec<(String, Vec<u8>)>> = [1usize, 2, 5]
    .iter()
    .map(|&workers| {
      let pool = build_pool(workers).unwrap();
      let results: Vec<_> = configs.iter().map(|c| run_experiment(c, &pool).unwrap()).collect();
      let dir = tempfile::tempdir().unwrap();
      write_report(&results, dir.path()).unwrap();
      let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
          let e = e.unwrap();
          (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
      files.sort();
      files
    })
    .collect();
  let identical = snapshots.windows(2).all(|w| w[0] == w[1]);
  verdict(vec![(
    identical,
    format!("{} report files byte-identical across 1, 2 and 5 workers", snapshots[0].len()),
  )])
}

fn main() {
  let criteria: [(u32, &str, fn() -> Verdict); 11] = [
    (1, "process fidelity", process_fidelity),
    (2, "normalization", normalization),
    (3, "maximal-moment scaling", maximal_moment),
    (4, "kernel exactness", kernel_exactness),
    (5, "limiting variance", sigma2),
    (6, "Gronwall bounds", gronwall),
    (7, "consistency", consistency),
    (8, "rate, main estimator", rate_main),
    (9, "normalized-error moments", clt),
    (10, "rate, truncated estimator", rate_alt),
    (11, "determinism", determinism),
  ];
  let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
  let mut failed = Vec::new();
  for (id, name, run) in criteria {
    if !selected.is_empty() && !selected.contains(&id) {
      continue;
    }
    let start = Instant::now();
    let v = run();
    println!(
      "criterion {id:>2} {:<4} {name} ({:.1}s): {}",
      if v.pass { "PASS" } else { "FAIL" },
      start.elapsed().as_secs_f64(),
      v.detail
    );
    if !v.pass {
      failed.push(id);
    }
  }
  if failed.is_empty() {
    println!("acceptance: all criteria passed");
  } else {
    println!("acceptance: failed criteria {failed:?}");
    std::process::exit(1);
  }
}
