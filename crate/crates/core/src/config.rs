//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # rate sweep for the Epanechnikov kernel
//! kind = rate-main
//! trends = sin:0,0.5,6.283185307179586
//! q = 1
//! H = 0.7
//! k = 1
//! eps = 0.125, 0.0625, 0.03125, 0.015625
//! reps = 500
//! ```
//!
//! Unknown keys, duplicates and malformed lines are rejected with their
//! line number. Every key has a default except `kind` and `eps`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::trend::Trend;

pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
  Consistency,
  RateMain,
  Clt,
  RateAlt,
}

impl ExperimentKind {
  pub fn name(&self) -> &'static str {
    match self {
      ExperimentKind::Consistency => "consistency",
      ExperimentKind::RateMain => "rate-main",
      ExperimentKind::Clt => "clt",
      ExperimentKind::RateAlt => "rate-alt",
    }
  }

  fn min_rungs(&self) -> usize {
    match self {
      ExperimentKind::Consistency => 2,
      ExperimentKind::RateMain | ExperimentKind::RateAlt => 4,
      ExperimentKind::Clt => 1,
    }
  }
}

impl FromStr for ExperimentKind {
  type Err = String;

  fn from_str(s: &str) -> std::result::Result<Self, String> {
    match s {
      "consistency" => Ok(ExperimentKind::Consistency),
      "rate-main" => Ok(ExperimentKind::RateMain),
      "clt" => Ok(ExperimentKind::Clt),
      "rate-alt" => Ok(ExperimentKind::RateAlt),
      other => Err(format!("unknown experiment kind `{other}` (consistency, rate-main, clt, rate-alt)")),
    }
  }
}

/// How the bandwidth follows `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleSpec {
  /// `eps^{1/(k - H + 2)}`.
  Main,
  /// `eps^{1/(rho - H)}` with `rho = k + gamma`.
  Alt,
  /// `eps^{exponent}`.
  Power(f64),
}

impl fmt::Display for RuleSpec {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match self {
      RuleSpec::Main => write!(f, "main"),
      RuleSpec::Alt => write!(f, "alt"),
      RuleSpec::Power(e) => write!(f, "power:{e}"),
    }
  }
}

impl FromStr for RuleSpec {
  type Err = String;

  fn from_str(s: &str) -> std::result::Result<Self, String> {
    match s {
      "main" => Ok(RuleSpec::Main),
      "alt" => Ok(RuleSpec::Alt),
      _ => {
        let e = s
          .strip_prefix("power:")
          .and_then(|v| v.parse::<f64>().ok())
          .ok_or_else(|| format!("unknown bandwidth rule `{s}` (main, alt, power:<exponent>)"))?;
        Ok(RuleSpec::Power(e))
      }
    }
  }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
  pub label: String,
  pub kind: ExperimentKind,
  pub trends: Vec<Trend>,
  pub q: u32,
  pub hurst: f64,
  pub k: usize,
  pub gamma: f64,
  pub rule: RuleSpec,
  pub eps: Vec<f64>,
  pub reps: usize,
  pub steps: usize,
  pub resolution_factor: usize,
  pub horizon: f64,
  pub x0: f64,
  pub window: (f64, f64),
  pub points: usize,
  pub seed: u64,
  pub kernel_width: f64,
  pub slope_tol: f64,
  pub ceiling: f64,
  pub clt_t: f64,
  pub clt_var_tol: f64,
}

impl ExperimentConfig {
  /// Defaults for everything but the ladder.
  pub fn new(kind: ExperimentKind, eps: Vec<f64>) -> Self {
    Self {
      label: kind.name().to_string(),
      kind,
      trends: vec![Trend::Sine {
        offset: 0.0,
        amplitude: 0.5,
        omega: std::f64::consts::TAU,
      }],
      q: 1,
      hurst: 0.7,
      k: 1,
      gamma: 1.0,
      rule: if kind == ExperimentKind::RateAlt {
        RuleSpec::Alt
      } else {
        RuleSpec::Main
      },
      eps,
      reps: 500,
      steps: 4096,
      resolution_factor: crate::hermite::DEFAULT_RESOLUTION_FACTOR,
      horizon: 1.0,
      x0: 1.0,
      window: (0.25, 0.75),
      points: crate::estimator::DEFAULT_POINTS,
      seed: 1,
      kernel_width: 1.0,
      slope_tol: if kind == ExperimentKind::RateAlt { 0.5 } else { 0.35 },
      ceiling: f64::INFINITY,
      clt_t: 0.5,
      clt_var_tol: 0.25,
    }
  }

  /// Smoothness index `rho = k + gamma` of the trend class.
  pub fn rho(&self) -> f64 {
    self.k as f64 + self.gamma
  }

  pub fn validate(&self) -> Result<()> {
    let cfg_err = |message: String| Error::Config { line: 0, message };
    if self.eps.len() < self.kind.min_rungs() {
      return Err(cfg_err(format!(
        "{} needs at least {} eps rungs, got {}",
        self.kind.name(),
        self.kind.min_rungs(),
        self.eps.len()
      )));
    }
    if self.eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
      return Err(cfg_err("eps rungs must lie in (0, 1]".into()));
    }
    if self.eps.windows(2).any(|w| w[1] >= w[0]) {
      return Err(cfg_err("eps ladder must be strictly decreasing".into()));
    }
    if self.reps < MIN_REPS {
      return Err(cfg_err(format!("reps must be at least {MIN_REPS}")));
    }
    let (a, b) = self.window;
    if !(0.0 < a && a <= b && b < self.horizon) {
      return Err(cfg_err(format!("window [{a}, {b}] must lie inside (0, {})", self.horizon)));
    }
    if self.trends.is_empty() {
      return Err(cfg_err("trend panel is empty".into()));
    }
    if !(self.gamma > 0.0 && self.gamma <= 1.0) {
      return Err(cfg_err("gamma must lie in (0, 1]".into()));
    }
    if !(self.kernel_width > 0.0) || !(self.slope_tol > 0.0) || !(self.clt_var_tol > 0.0) {
      return Err(cfg_err("kernel_width, slope_tol and clt_var_tol must be positive".into()));
    }
    if self.kind == ExperimentKind::Clt && !(a <= self.clt_t && self.clt_t <= b) {
      return Err(cfg_err(format!("clt_t {} must lie in the window", self.clt_t)));
    }
    if self.points == 0 {
      return Err(cfg_err("points must be positive".into()));
    }
    crate::error::check_hurst(self.hurst)?;
    crate::hermite::HermiteSpec::new(self.q, self.hurst, self.horizon, self.steps, self.resolution_factor * self.steps)?;
    Ok(())
  }

  pub fn parse(text: &str) -> Result<Self> {
    let mut kind = None;
    let mut eps = None;
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
      let line_no = idx + 1;
      let line = raw.split('#').next().unwrap_or("").trim();
      if line.is_empty() {
        continue;
      }
      let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
        line: line_no,
        message: format!("expected `key = value`, found `{line}`"),
      })?;
      let (key, value) = (key.trim().to_string(), value.trim().to_string());
      if entries.iter().any(|(_, k, _)| *k == key) {
        return Err(Error::Config {
          line: line_no,
          message: format!("duplicate key `{key}`"),
        });
      }
      match key.as_str() {
        "kind" => kind = Some(value.parse::<ExperimentKind>().map_err(|m| Error::Config { line: line_no, message: m })?),
        "eps" => eps = Some(parse_list(&value).map_err(|m| Error::Config { line: line_no, message: m })?),
        _ => {}
      }
      entries.push((line_no, key, value));
    }
    let kind = kind.ok_or(Error::Config {
      line: 0,
      message: "missing required key `kind`".into(),
    })?;
    let eps = eps.ok_or(Error::Config {
      line: 0,
      message: "missing required key `eps`".into(),
    })?;
    let mut cfg = Self::new(kind, eps);
    for (line, key, value) in entries {
      cfg.set(&key, &value).map_err(|message| Error::Config { line, message })?;
    }
    cfg.validate()?;
    Ok(cfg)
  }

  fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
    fn num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
      value.parse().map_err(|_| format!("invalid value `{value}` for `{key}`"))
    }
    match key {
      "kind" | "eps" => {}
      "label" => {
        if value.is_empty() || !value.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
          return Err(format!("label `{value}` must be non-empty [A-Za-z0-9_-]"));
        }
        self.label = value.to_string();
      }
      "trends" | "trend" => {
        self.trends = value
          .split(';')
          .map(|t| t.trim().parse::<Trend>().map_err(|e| e.to_string()))
          .collect::<std::result::Result<_, _>>()?;
      }
      "q" => self.q = num(key, value)?,
      "H" => self.hurst = num(key, value)?,
      "k" => self.k = num(key, value)?,
      "gamma" => self.gamma = num(key, value)?,
      "rule" => self.rule = value.parse()?,
      "reps" => self.reps = num(key, value)?,
      "n" => self.steps = num(key, value)?,
      "resolution_factor" => self.resolution_factor = num(key, value)?,
      "T" => self.horizon = num(key, value)?,
      "x0" => self.x0 = num(key, value)?,
      "a" => self.window.0 = num(key, value)?,
      "b" => self.window.1 = num(key, value)?,
      "points" => self.points = num(key, value)?,
      "seed" => self.seed = num(key, value)?,
      "kernel_width" => self.kernel_width = num(key, value)?,
      "slope_tol" => self.slope_tol = num(key, value)?,
      "ceiling" => self.ceiling = num(key, value)?,
      "clt_t" => self.clt_t = num(key, value)?,
      "clt_var_tol" => self.clt_var_tol = num(key, value)?,
      other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
  }

  /// Resolved configuration, one `key = value` per line, parseable by
  /// [`ExperimentConfig::parse`].
  pub fn to_text(&self) -> String {
    let trends: Vec<String> = self.trends.iter().map(|t| t.to_string()).collect();
    let eps: Vec<String> = self.eps.iter().map(|e| e.to_string()).collect();
    let pairs: Vec<(&str, String)> = vec![
      ("label", self.label.clone()),
      ("kind", self.kind.name().to_string()),
      ("trends", trends.join(";")),
      ("q", self.q.to_string()),
      ("H", self.hurst.to_string()),
      ("k", self.k.to_string()),
      ("gamma", self.gamma.to_string()),
      ("rule", self.rule.to_string()),
      ("eps", eps.join(", ")),
      ("reps", self.reps.to_string()),
      ("n", self.steps.to_string()),
      ("resolution_factor", self.resolution_factor.to_string()),
      ("T", self.horizon.to_string()),
      ("x0", self.x0.to_string()),
      ("a", self.window.0.to_string()),
      ("b", self.window.1.to_string()),
      ("points", self.points.to_string()),
      ("seed", self.seed.to_string()),
      ("kernel_width", self.kernel_width.to_string()),
      ("slope_tol", self.slope_tol.to_string()),
      ("ceiling", self.ceiling.to_string()),
      ("clt_t", self.clt_t.to_string()),
      ("clt_var_tol", self.clt_var_tol.to_string()),
    ];
    pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
  }
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, String> {
  value
    .split(',')
    .map(|v| {
      let v = v.trim();
      let parsed = match v.strip_prefix("2^") {
        Some(exp) => exp.parse::<i32>().ok().map(|e| 2f64.powi(e)),
        None => v.parse::<f64>().ok(),
      };
      parsed.ok_or_else(|| format!("invalid eps value `{v}`"))
    })
    .collect()
}

#[cfg(test)]
mod tests {
  use super::*;

  const SAMPLE: &str = "\
# comment line
kind = rate-main
eps = 2^-3, 2^-4, 0.03125, 2^-6   # trailing comment
reps = 200
H = 0.75
trends = const:0.5; sin:0,0.5,6.283185307179586
";

  #[test]
  fn parses_and_echoes() {
    let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
    assert_eq!(cfg.kind, ExperimentKind::RateMain);
    assert_eq!(cfg.eps, vec![0.125, 0.0625, 0.03125, 0.015625]);
    assert_eq!(cfg.reps, 200);
    assert_eq!(cfg.trends.len(), 2);
    assert_eq!(cfg.slope_tol, 0.35);
    let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
    assert_eq!(again, cfg);
  }

  #[test]
  fn errors_carry_line_numbers() {
    let bad = "kind = clt\neps = 0.01\nthis line is wrong\n";
    assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config { line: 3, .. })));
    let unknown = "kind = clt\neps = 0.01\nfoo = 1\n";
    assert!(matches!(ExperimentConfig::parse(unknown), Err(Error::Config { line: 3, .. })));
    let dup = "kind = clt\neps = 0.01\nreps = 200\nreps = 300\n";
    assert!(matches!(ExperimentConfig::parse(dup), Err(Error::Config { line: 4, .. })));
  }

  #[test]
  fn ladder_and_reps_invariants() {
    assert!(ExperimentConfig::parse("kind = consistency\neps = 0.2\n").is_err());
    assert!(ExperimentConfig::parse("kind = consistency\neps = 0.1, 0.2\n").is_err());
    assert!(ExperimentConfig::parse("kind = consistency\neps = 0.2, 0.1\nreps = 50\n").is_err());
    assert!(ExperimentConfig::parse("kind = consistency\neps = 0.2, 0.1\n").is_ok());
  }
}
