//! Small order-stable reductions used by the Monte Carlo harness.

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, never on how the caller produced them.
pub fn pairwise_sum(values: &[f64]) -> f64 {
  const BLOCK: usize = 32;
  if values.len() <= BLOCK {
    values.iter().sum()
  } else {
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
  }
}

pub fn mean(values: &[f64]) -> f64 {
  if values.is_empty() {
    return f64::NAN;
  }
  pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
  if values.len() < 2 {
    return f64::NAN;
  }
  let m = mean(values);
  let squares: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
  pairwise_sum(&squares) / (values.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn std_error(values: &[f64]) -> f64 {
  (variance(values) / values.len() as f64).sqrt()
}

/// Standard error of the unbiased sample variance, from the fourth central
/// moment.
pub fn variance_std_error(values: &[f64]) -> f64 {
  let n = values.len() as f64;
  let m = mean(values);
  let fourth: Vec<f64> = values.iter().map(|v| (v - m).powi(4)).collect();
  let mu4 = pairwise_sum(&fourth) / n;
  let s2 = variance(values);
  ((mu4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
  if sorted.is_empty() {
    return f64::NAN;
  }
  let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
  let lo = pos.floor() as usize;
  let hi = pos.ceil() as usize;
  let frac = pos - lo as f64;
  sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
  pub slope: f64,
  pub intercept: f64,
  pub residual_norm: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn ols(x: &[f64], y: &[f64]) -> LineFit {
  assert_eq!(x.len(), y.len());
  let mx = mean(x);
  let my = mean(y);
  let sxy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
  let sxx: Vec<f64> = x.iter().map(|a| (a - mx) * (a - mx)).collect();
  let slope = pairwise_sum(&sxy) / pairwise_sum(&sxx);
  let intercept = my - slope * mx;
  let residual_norm = x
    .iter()
    .zip(y)
    .map(|(a, b)| (b - intercept - slope * a).powi(2))
    .sum::<f64>()
    .sqrt();
  LineFit {
    slope,
    intercept,
    residual_norm,
  }
}
