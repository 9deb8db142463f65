//! Report files for a batch of experiments.
//!
//! * `results.csv` with columns `experiment,eps,statistic,value`
//! * `summary.txt` with the echoed configuration and one verdict per check
//! * `<label>_<fit>_rate.csv` with `eps,sup_mse,log_eps,log_mse`
//! * `<label>_<fit>_lines.csv` with the fitted and theoretical log-log lines

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{ExperimentResult, RateFit};

pub fn results_csv(results: &[ExperimentResult]) -> String {
  let mut out = String::from("experiment,eps,statistic,value\n");
  for r in results {
    for row in &r.rows {
      let _ = writeln!(out, "{},{},{},{}", r.label(), row.eps, row.statistic, row.value);
    }
  }
  out
}

pub fn summary_text(results: &[ExperimentResult]) -> String {
  if results.is_empty() {
    return "no experiments\n".into();
  }
  let mut out = String::new();
  for r in results {
    let _ = writeln!(out, "experiment {} ({})", r.label(), r.config.kind.name());
    for line in r.config.to_text().lines() {
      let _ = writeln!(out, "  {line}");
    }
    for check in &r.checks {
      let verdict = match check.pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "INFO",
      };
      let _ = writeln!(out, "  [{verdict}] {}: {}", check.name, check.detail);
    }
    let _ = writeln!(out, "  result: {}", if r.passed() { "PASS" } else { "FAIL" });
  }
  let all = results.iter().all(ExperimentResult::passed);
  let _ = writeln!(out, "overall: {}", if all { "PASS" } else { "FAIL" });
  out
}

pub fn rate_csv(fit: &RateFit) -> String {
  let mut out = String::from("eps,sup_mse,log_eps,log_mse\n");
  for i in 0..fit.eps.len() {
    let _ = writeln!(out, "{},{},{},{}", fit.eps[i], fit.sup_mse[i], fit.log_eps[i], fit.log_mse[i]);
  }
  out
}

/// Fitted line and a line of theoretical slope through the data centroid.
pub fn lines_csv(fit: &RateFit) -> String {
  let n = fit.log_eps.len() as f64;
  let cx = fit.log_eps.iter().sum::<f64>() / n;
  let cy = fit.log_mse.iter().sum::<f64>() / n;
  let mut out = format!("# slope={} theory={}\nlog_eps,log_mse,fitted,theory\n", fit.slope, fit.theoretical);
  for (x, y) in fit.log_eps.iter().zip(&fit.log_mse) {
    let fitted = fit.intercept + fit.slope * x;
    let theory = cy + fit.theoretical * (x - cx);
    let _ = writeln!(out, "{x},{y},{fitted},{theory}");
  }
  out
}

/// Writes every report file under `dir` (created if missing) and returns
/// the written paths.
pub fn write_report(results: &[ExperimentResult], dir: &Path) -> Result<Vec<PathBuf>> {
  fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
  let mut files = vec![
    (dir.join("results.csv"), results_csv(results)),
    (dir.join("summary.txt"), summary_text(results)),
  ];
  for r in results {
    for fit in &r.fits {
      let stem = format!("{}_{}", r.label(), fit.name);
      files.push((dir.join(format!("{stem}_rate.csv")), rate_csv(fit)));
      files.push((dir.join(format!("{stem}_lines.csv")), lines_csv(fit)));
    }
  }
  for (path, body) in &files {
    fs::write(path, body).map_err(|e| Error::io(path, e))?;
  }
  Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn empty_report() {
    assert_eq!(results_csv(&[]), "experiment,eps,statistic,value\n");
    assert_eq!(summary_text(&[]), "no experiments\n");
  }

  #[test]
  fn rate_files_have_expected_columns() {
    let fit = RateFit::new("main", &[0.1, 0.05], &[0.01, 0.003], 1.7).unwrap();
    assert!(rate_csv(&fit).starts_with("eps,sup_mse,log_eps,log_mse\n0.1,0.01,"));
    assert_eq!(lines_csv(&fit).lines().count(), 4);
  }
}
