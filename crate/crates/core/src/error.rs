use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
  /// An argument lies outside the domain of the operation.
  #[error("{param}: {message}")]
  Domain { param: &'static str, message: String },

  /// Neither circulant embedding nor the dense factorization produced a
  /// valid square root of the covariance matrix.
  #[error("fractional Gaussian noise embedding failed (hurst={hurst}, length={length}): {reason}")]
  EmbeddingFailure {
    hurst: f64,
    length: usize,
    reason: String,
  },

  #[error("resolution error: {0}")]
  Resolution(String),

  #[error("grid mismatch: {0}")]
  GridMismatch(String),

  #[error("kernel window [{lo}, {hi}] overflows the observation interval [0, {horizon}]")]
  WindowTruncation { lo: f64, hi: f64, horizon: f64 },

  #[error("derivative of order {order} is unavailable for trend `{trend}`")]
  UnavailableDerivative { order: usize, trend: String },

  #[error("Gronwall bound violated at t={t}: |X-x|={deviation} > bound={bound}")]
  Violation { t: f64, deviation: f64, bound: f64 },

  #[error("side condition violated: {0}")]
  ConditionViolated(String),

  #[error("rate fit degenerate: {0}")]
  FitDegenerate(String),

  /// `line` is 0 for errors that concern the configuration as a whole.
  #[error("{}", if *line == 0 { format!("config: {message}") } else { format!("config line {line}: {message}") })]
  Config { line: usize, message: String },

  #[error("parse error: {0}")]
  Parse(String),

  #[error("{path}: {source}")]
  Io {
    path: PathBuf,
    #[source]
    source: std::io::Error,
  },
}

impl Error {
  pub(crate) fn domain(param: &'static str, message: impl Into<String>) -> Self {
    Error::Domain {
      param,
      message: message.into(),
    }
  }

  pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
    Error::Io {
      path: path.into(),
      source,
    }
  }
}

pub(crate) fn check_hurst(hurst: f64) -> Result<()> {
  if hurst > 0.5 && hurst < 1.0 {
    Ok(())
  } else {
    Err(Error::domain(
      "H",
      format!("hurst parameter {hurst} must lie in (0.5, 1)"),
    ))
  }
}
