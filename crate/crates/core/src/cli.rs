//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed assertion, 2 usage or configuration
//! error, 3 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;
use crate::error::Error;
use crate::estimator::{self, BandwidthRule, EstimatorConfig, WeightRule};
use crate::harness;
use crate::kernel::make_order_k_kernel;
use crate::report;
use crate::sde::{self, PathConfig, SdePath};
use crate::trend::Trend;

const TREND_HELP: &str = "Trend grammar:
  const:<c>                      theta(t) = c
  sin:<a>,<b>,<omega>            theta(t) = a + b sin(omega t)
  poly:<c0>,<c1>,...             theta(t) = c0 + c1 t + ...
  weier:<amp>,<k>,<gamma>,<J>    theta(t) = amp sum_{j<J} 2^{-j(k+gamma)} cos(2 pi 2^j t + k pi/2)";

#[derive(Debug, Parser)]
#[command(name = "hermite-trend", version, about = "Simulate Hermite-driven small-noise paths and estimate their linear multiplier", after_help = TREND_HELP)]
struct Cli {
  #[command(subcommand)]
  command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
  /// Simulate one path and write the `t,Z,x,X` table.
  #[command(after_help = TREND_HELP)]
  Simulate(SimulateArgs),
  /// Kernel estimates on an evaluation window of a simulated path.
  Estimate(EstimateArgs),
  /// Moments and limiting variances of an order-k kernel.
  Kernel(KernelArgs),
  /// Run a Monte Carlo experiment from a config file.
  Experiment(ExperimentArgs),
  /// Print a report summary and exit with its verdict.
  Report(ReportArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
  /// Hermite order (1 = fractional Brownian motion, 2 = Rosenblatt).
  #[arg(long, default_value_t = 1)]
  q: u32,
  /// Self-similarity index in (0.5, 1).
  #[arg(long = "H", default_value_t = 0.7)]
  hurst: f64,
  /// Horizon.
  #[arg(long = "T", default_value_t = 1.0)]
  horizon: f64,
  /// Number of grid steps.
  #[arg(long, default_value_t = 1024)]
  n: usize,
  /// Noise scale in [0, 1].
  #[arg(long, default_value_t = 0.05)]
  eps: f64,
  #[arg(long, default_value_t = 1.0)]
  x0: f64,
  #[arg(long, default_value = "sin:0,0.5,6.283185307179586")]
  trend: String,
  #[arg(long, default_value_t = 0)]
  seed: u64,
  /// Fine resolution of the underlying Gaussian noise (default 8n).
  #[arg(long)]
  m: Option<usize>,
  /// Output file (stdout when absent).
  #[arg(long)]
  out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Weights {
  Cell,
  Midpoint,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct EstimateArgs {
  /// Path table written by `simulate`.
  #[arg(long)]
  input: PathBuf,
  /// Kernel order.
  #[arg(long, default_value_t = 1)]
  order: usize,
  /// Kernel support width.
  #[arg(long, default_value_t = 1.0)]
  width: f64,
  /// Bandwidth (default eps^{1/(k-H+2)}).
  #[arg(long)]
  bandwidth: Option<f64>,
  #[arg(long, default_value_t = 0.25)]
  a: f64,
  #[arg(long, default_value_t = 0.75)]
  b: f64,
  #[arg(long, default_value_t = estimator::DEFAULT_POINTS)]
  points: usize,
  /// Bound L on |theta| for the division floor (default: from the table's trend).
  #[arg(long = "L")]
  bound: Option<f64>,
  /// Division floor for theta_hat = product / X (default ½|x0|e^{-LT}).
  #[arg(long)]
  floor: Option<f64>,
  #[arg(long, value_enum, default_value = "cell")]
  weights: Weights,
  #[arg(long)]
  out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KernelArgs {
  #[arg(long, default_value_t = 1)]
  order: usize,
  /// Comma-separated self-similarity indices.
  #[arg(long = "H", value_delimiter = ',', default_values_t = [0.7])]
  hurst: Vec<f64>,
  /// Support width; the unit width makes the box kernel's variance exactly 1.
  #[arg(long, default_value_t = 1.0)]
  width: f64,
  /// Also print the piecewise-polynomial representation.
  #[arg(long)]
  show: bool,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
  #[arg(long)]
  config: PathBuf,
  #[arg(long, default_value_t = default_workers())]
  workers: usize,
  /// Report directory.
  #[arg(long, default_value = "report")]
  out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
  #[arg(long)]
  dir: PathBuf,
}

fn default_workers() -> usize {
  std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum Failure {
  Usage(String),
  Assertion(String),
  Runtime(String),
}

impl Failure {
  fn code(&self) -> i32 {
    match self {
      Failure::Assertion(_) => 1,
      Failure::Usage(_) => 2,
      Failure::Runtime(_) => 3,
    }
  }

  fn message(&self) -> &str {
    match self {
      Failure::Usage(m) | Failure::Assertion(m) | Failure::Runtime(m) => m,
    }
  }
}

fn usage(e: Error) -> Failure {
  match e {
    Error::Domain { param, message } => Failure::Usage(format!("--{param}: {message}")),
    other => Failure::Usage(other.to_string()),
  }
}

fn runtime(e: Error) -> Failure {
  Failure::Runtime(e.to_string())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
  I: IntoIterator<Item = T>,
  T: Into<OsString> + Clone,
{
  let cli = match Cli::try_parse_from(args) {
    Ok(cli) => cli,
    Err(e) => {
      let _ = e.print();
      return e.exit_code();
    }
  };
  let outcome = match cli.command {
    Command::Simulate(a) => simulate(a),
    Command::Estimate(a) => estimate(a),
    Command::Kernel(a) => kernel(a),
    Command::Experiment(a) => experiment(a),
    Command::Report(a) => report_cmd(a),
  };
  match outcome {
    Ok(()) => 0,
    Err(f) => {
      eprintln!("error: {}", f.message());
      f.code()
    }
  }
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), Failure> {
  match out {
    Some(path) => fs::write(path, body).map_err(|e| runtime(Error::io(path, e))),
    None => io::stdout()
      .write_all(body.as_bytes())
      .map_err(|e| Failure::Runtime(e.to_string())),
  }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
  let trend: Trend = a.trend.parse().map_err(|e: Error| Failure::Usage(format!("--trend: {e}")))?;
  let mut cfg = PathConfig::new(a.q, a.hurst, a.horizon, a.n, a.eps, a.x0).map_err(usage)?;
  if let Some(m) = a.m {
    cfg = cfg.with_resolution(m).map_err(|e| Failure::Usage(format!("--m: {e}")))?;
  }
  let sim = sde::SdeSimulator::new(trend.clone(), cfg).map_err(runtime)?;
  let path = sim.sample(a.seed);
  let header = [
    ("q", cfg.order.to_string()),
    ("H", cfg.hurst.to_string()),
    ("T", cfg.horizon.to_string()),
    ("n", cfg.steps.to_string()),
    ("m", cfg.resolution.to_string()),
    ("eps", cfg.eps.to_string()),
    ("x0", cfg.x0.to_string()),
    ("trend", trend.to_string()),
    ("seed", a.seed.to_string()),
  ]
  .map(|(k, v)| (k.to_string(), v));
  let mut buf = Vec::new();
  sde::write_path_csv(&mut buf, &path, &header).map_err(|e| Failure::Runtime(e.to_string()))?;
  emit(a.out.as_deref(), &String::from_utf8(buf).expect("ascii output"))
}

fn header_value<T: std::str::FromStr>(table: &sde::PathTable, key: &str) -> Result<T, Failure> {
  table
    .header
    .get(key)
    .ok_or_else(|| Failure::Usage(format!("--input: path table has no `{key}` header")))?
    .parse()
    .map_err(|_| Failure::Usage(format!("--input: invalid `{key}` header")))
}

fn estimate(a: EstimateArgs) -> Result<(), Failure> {
  let file = fs::File::open(&a.input).map_err(|e| usage(Error::io(&a.input, e)))?;
  let table = sde::read_path_csv(BufReader::new(file)).map_err(|e| Failure::Usage(format!("--input: {e}")))?;
  let hurst: f64 = header_value(&table, "H")?;
  let eps: f64 = header_value(&table, "eps")?;
  let q: u32 = header_value(&table, "q")?;
  let x0: f64 = header_value(&table, "x0")?;
  let horizon = *table.times.last().ok_or_else(|| Failure::Usage("--input: empty path table".into()))?;
  let steps = table.times.len() - 1;
  let config = PathConfig::new(q, hurst, horizon, steps, eps, x0).map_err(usage)?;
  let trend = table.header.get("trend").and_then(|t| t.parse::<Trend>().ok());
  let bound = a.bound.or(trend.as_ref().map(|t| t.bound(horizon))).unwrap_or(0.0);
  let floor = a.floor.unwrap_or(estimator::default_division_floor(x0, bound, horizon));
  let bandwidth = match a.bandwidth {
    Some(b) => b,
    None => estimator::bandwidth_main(eps, a.order, hurst)
      .map_err(|e| Failure::Usage(format!("--bandwidth: no default for this path ({e})")))?,
  };
  let kernel = make_order_k_kernel(a.order)
    .and_then(|k| k.rescaled(a.width))
    .map_err(|e| Failure::Usage(format!("--order/--width: {e}")))?;
  let rule = if a.bandwidth.is_some() {
    BandwidthRule::Fixed
  } else {
    BandwidthRule::Main { k: a.order }
  };
  let weights = match a.weights {
    Weights::Cell => WeightRule::CellAverage,
    Weights::Midpoint => WeightRule::Midpoint,
  };
  let cfg = EstimatorConfig::new(kernel, bandwidth, (a.a, a.b), horizon, eps, rule)
    .and_then(|c| c.with_points(a.points))
    .map_err(usage)?
    .with_weights(weights);
  let path = SdePath {
    times: table.times,
    observed: table.observed,
    limit: table.limit,
    noise: table.noise,
    config,
    seed: table.header.get("seed").and_then(|s| s.parse().ok()).unwrap_or(0),
  };
  let series = estimator::estimate_series(&path, &cfg, floor).map_err(runtime)?;
  let mut body = format!("# input={}\n", a.input.display());
  for (k, v) in &table.header {
    body.push_str(&format!("# path.{k}={v}\n"));
  }
  body.push_str(&format!(
    "# order={}\n# width={}\n# bandwidth={bandwidth}\n# a={}\n# b={}\n# points={}\n# L={bound}\n# floor={floor}\n# weights={:?}\n",
    a.order, a.width, a.a, a.b, a.points, a.weights
  ));
  body.push_str("t,product_estimate,theta_hat,valid\n");
  for i in 0..series.times.len() {
    body.push_str(&format!(
      "{},{},{},{}\n",
      series.times[i], series.product[i], series.theta[i], series.valid[i]
    ));
  }
  emit(a.out.as_deref(), &body)
}

fn kernel(a: KernelArgs) -> Result<(), Failure> {
  let kernel = make_order_k_kernel(a.order)
    .map_err(|e| Failure::Usage(format!("--order: {e}")))?
    .rescaled(a.width)
    .map_err(usage)?;
  for &h in &a.hurst {
    crate::error::check_hurst(h).map_err(usage)?;
  }
  let hs: Vec<String> = a.hurst.iter().map(|h| h.to_string()).collect();
  let (lo, hi) = kernel.support();
  let mut body = format!(
    "# order={} width={} support={lo},{hi} H={}\n",
    a.order,
    a.width,
    hs.join(",")
  );
  if a.show {
    body.push_str(&kernel.to_string());
    if !body.ends_with('\n') {
      body.push('\n');
    }
  }
  body.push_str("j,moment\n");
  for j in 0..=a.order + 1 {
    body.push_str(&format!("{j},{}\n", kernel.moment(j)));
  }
  body.push_str("H,sigma2,sigma2_quadrature\n");
  for &h in &a.hurst {
    let closed = kernel.sigma2_h(h).map_err(runtime)?;
    let quad = kernel.sigma2_h_quadrature(h).map_err(runtime)?;
    body.push_str(&format!("{h},{closed},{quad}\n"));
  }
  emit(None, &body)
}

fn experiment(a: ExperimentArgs) -> Result<(), Failure> {
  let text = fs::read_to_string(&a.config).map_err(|e| usage(Error::io(&a.config, e)))?;
  let cfg = ExperimentConfig::parse(&text).map_err(usage)?;
  let pool = harness::build_pool(a.workers).map_err(usage)?;
  let result = match harness::run_experiment(&cfg, &pool) {
    Ok(r) => r,
    Err(e @ Error::ConditionViolated(_)) => return Err(usage(e)),
    Err(e) => return Err(runtime(e)),
  };
  let results = [result];
  report::write_report(&results, &a.out).map_err(runtime)?;
  print!("{}", report::summary_text(&results));
  if results[0].passed() {
    Ok(())
  } else {
    let failed: Vec<&str> = results[0]
      .checks
      .iter()
      .filter(|c| c.pass == Some(false))
      .map(|c| c.name.as_str())
      .collect();
    Err(Failure::Assertion(format!("failed checks: {}", failed.join(", "))))
  }
}

fn report_cmd(a: ReportArgs) -> Result<(), Failure> {
  let path = a.dir.join("summary.txt");
  let text = fs::read_to_string(&path).map_err(|e| runtime(Error::io(&path, e)))?;
  print!("{text}");
  match text.lines().last() {
    Some("overall: FAIL") => Err(Failure::Assertion("report contains failed checks".into())),
    _ => Ok(()),
  }
}
