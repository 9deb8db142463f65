//! Library of linear multipliers `theta(t)` with analytic derivatives,
//! antiderivatives and certified bounds.
//!
//! Trends are addressed by a small text grammar:
//!
//! | spec                              | theta(t)                                              |
//! |-----------------------------------|-------------------------------------------------------|
//! | `const:<c>`                       | `c`                                                   |
//! | `sin:<a>,<b>,<omega>`             | `a + b sin(omega t)`                                  |
//! | `poly:<c0>,<c1>,...`              | `c0 + c1 t + ...`                                     |
//! | `weier:<amp>,<k>,<gamma>,<terms>` | `amp Σ_{j<terms} 2^{-j(k+gamma)} cos(2π 2^j t + kπ/2)` |
//!
//! The Weierstrass-type sum has a `k`-th derivative that is Hölder of order
//! `gamma` uniformly in the number of terms, so it stands in for the class
//! `Θ_ρ` with `ρ = k + gamma`.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothnessClass {
  /// Bounded only.
  Bounded,
  /// Analytic: derivatives of every order are available.
  Smooth,
  /// `k` derivatives, the last one Hölder of order `gamma`.
  Holder {
    k: u32,
    gamma: f64,
    holder_constant: f64,
  },
}

impl SmoothnessClass {
  /// Exponent `rho = k + gamma` of the class, `None` for analytic trends.
  pub fn rho(&self) -> Option<f64> {
    match self {
      SmoothnessClass::Holder { k, gamma, .. } => Some(*k as f64 + gamma),
      _ => None,
    }
  }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trend {
  Const(f64),
  Sine { offset: f64, amplitude: f64, omega: f64 },
  Poly(Vec<f64>),
  Weierstrass { amplitude: f64, k: u32, gamma: f64, terms: u32 },
}

impl Trend {
  pub fn value(&self, t: f64) -> f64 {
    self.derivative(0, t).expect("order 0 always available")
  }

  /// `theta^{(order)}(t)`, or `None` where the class does not provide it.
  pub fn derivative(&self, order: usize, t: f64) -> Option<f64> {
    match self {
      Trend::Const(c) => Some(if order == 0 { *c } else { 0.0 }),
      Trend::Sine {
        offset,
        amplitude,
        omega,
      } => {
        let wave = amplitude * omega.powi(order as i32) * (omega * t + order as f64 * FRAC_PI_2).sin();
        Some(if order == 0 { offset + wave } else { wave })
      }
      Trend::Poly(coeffs) => Some(
        coeffs
          .iter()
          .enumerate()
          .skip(order)
          .map(|(i, c)| {
            let falling = (0..order).fold(1.0, |acc, r| acc * (i - r) as f64);
            c * falling * t.powi((i - order) as i32)
          })
          .sum(),
      ),
      Trend::Weierstrass {
        amplitude,
        k,
        gamma,
        terms,
      } => {
        let available = *k as usize + usize::from(*gamma >= 1.0);
        if order > available {
          return None;
        }
        let rho = *k as f64 + gamma;
        let phase = *k as f64 * FRAC_PI_2 + order as f64 * FRAC_PI_2;
        Some(
          (0..*terms)
            .map(|j| {
              let freq = TAU * 2f64.powi(j as i32);
              2f64.powf(-(j as f64) * rho) * freq.powi(order as i32) * (freq * t + phase).cos()
            })
            .sum::<f64>()
            * amplitude,
        )
      }
    }
  }

  /// `∫_0^t theta(s) ds` in closed form.
  pub fn integral(&self, t: f64) -> f64 {
    match self {
      Trend::Const(c) => c * t,
      Trend::Sine {
        offset,
        amplitude,
        omega,
      } => {
        if *omega == 0.0 {
          offset * t
        } else {
          offset * t + amplitude * (1.0 - (omega * t).cos()) / omega
        }
      }
      Trend::Poly(coeffs) => coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * t.powi(i as i32 + 1) / (i + 1) as f64)
        .sum(),
      Trend::Weierstrass {
        amplitude,
        k,
        gamma,
        terms,
      } => {
        let rho = *k as f64 + gamma;
        let phase = *k as f64 * FRAC_PI_2;
        (0..*terms)
          .map(|j| {
            let freq = TAU * 2f64.powi(j as i32);
            2f64.powf(-(j as f64) * rho) * ((freq * t + phase).sin() - phase.sin()) / freq
          })
          .sum::<f64>()
          * amplitude
      }
    }
  }

  /// Certified bound `L >= sup_{0<=t<=horizon} |theta(t)|`.
  pub fn bound(&self, horizon: f64) -> f64 {
    match self {
      Trend::Const(c) => c.abs(),
      Trend::Sine {
        offset, amplitude, ..
      } => offset.abs() + amplitude.abs(),
      Trend::Poly(coeffs) => coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c.abs() * horizon.abs().powi(i as i32))
        .sum(),
      Trend::Weierstrass {
        amplitude,
        k,
        gamma,
        terms,
      } => {
        let rho = *k as f64 + gamma;
        amplitude.abs() * (0..*terms).map(|j| 2f64.powf(-(j as f64) * rho)).sum::<f64>()
      }
    }
  }

  pub fn class(&self) -> SmoothnessClass {
    match self {
      Trend::Weierstrass {
        amplitude,
        k,
        gamma,
        terms,
      } => SmoothnessClass::Holder {
        k: *k,
        gamma: *gamma,
        holder_constant: amplitude.abs()
          * TAU.powi(*k as i32)
          * *terms as f64
          * 2f64.powf(1.0 - gamma)
          * TAU.powf(*gamma),
      },
      _ => SmoothnessClass::Smooth,
    }
  }

  /// `x_t = x0 exp(∫_0^t theta)`.
  pub fn deterministic_solution(&self, x0: f64, t: f64) -> f64 {
    x0 * self.integral(t).exp()
  }

  /// Derivatives `x^{(0..=order)}(t)` of the deterministic solution, using
  /// `x' = theta x` and the Leibniz rule.
  pub fn solution_derivatives(&self, x0: f64, t: f64, order: usize) -> Result<Vec<f64>> {
    let theta = self.derivatives_up_to(order.saturating_sub(1), t)?;
    let mut x = Vec::with_capacity(order + 1);
    x.push(self.deterministic_solution(x0, t));
    for n in 1..=order {
      // x^{(n)} = sum_{i=0}^{n-1} C(n-1, i) theta^{(i)} x^{(n-1-i)}
      let value = (0..n).map(|i| binomial(n - 1, i) * theta[i] * x[n - 1 - i]).sum();
      x.push(value);
    }
    Ok(x)
  }

  /// `J^{(order)}(t)` for `J = theta x`.
  pub fn product_derivative(&self, x0: f64, t: f64, order: usize) -> Result<f64> {
    let theta = self.derivatives_up_to(order, t)?;
    let x = self.solution_derivatives(x0, t, order)?;
    Ok((0..=order).map(|i| binomial(order, i) * theta[i] * x[order - i]).sum())
  }

  fn derivatives_up_to(&self, order: usize, t: f64) -> Result<Vec<f64>> {
    (0..=order)
      .map(|n| {
        self.derivative(n, t).ok_or_else(|| Error::UnavailableDerivative {
          order: n,
          trend: self.to_string(),
        })
      })
      .collect()
  }
}

fn binomial(n: usize, k: usize) -> f64 {
  (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl fmt::Display for Trend {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match self {
      Trend::Const(c) => write!(f, "const:{c}"),
      Trend::Sine {
        offset,
        amplitude,
        omega,
      } => write!(f, "sin:{offset},{amplitude},{omega}"),
      Trend::Poly(coeffs) => {
        let list: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "poly:{}", list.join(","))
      }
      Trend::Weierstrass {
        amplitude,
        k,
        gamma,
        terms,
      } => write!(f, "weier:{amplitude},{k},{gamma},{terms}"),
    }
  }
}

impl FromStr for Trend {
  type Err = Error;

  fn from_str(s: &str) -> Result<Self> {
    let bad = |msg: &str| Error::Parse(format!("trend `{s}`: {msg}"));
    let (kind, args) = s.trim().split_once(':').ok_or_else(|| bad("expected <kind>:<params>"))?;
    let values = args
      .split(',')
      .map(|v| v.trim().parse::<f64>().map_err(|_| bad(&format!("invalid number `{v}`"))))
      .collect::<Result<Vec<f64>>>()?;
    if values.iter().any(|v| !v.is_finite()) {
      return Err(bad("parameters must be finite"));
    }
    let trend = match (kind.trim(), values.as_slice()) {
      ("const", [c]) => Trend::Const(*c),
      ("sin", [a, b, w]) => Trend::Sine {
        offset: *a,
        amplitude: *b,
        omega: *w,
      },
      ("poly", coeffs) if !coeffs.is_empty() => Trend::Poly(coeffs.to_vec()),
      ("weier", [amp, k, gamma, terms]) => {
        if k.fract() != 0.0 || *k < 0.0 || terms.fract() != 0.0 || *terms < 1.0 {
          return Err(bad("k must be a non-negative integer and terms a positive integer"));
        }
        if !(*gamma > 0.0 && *gamma <= 1.0) {
          return Err(bad("gamma must lie in (0, 1]"));
        }
        Trend::Weierstrass {
          amplitude: *amp,
          k: *k as u32,
          gamma: *gamma,
          terms: *terms as u32,
        }
      }
      ("const" | "sin" | "weier", _) => return Err(bad("wrong number of parameters")),
      _ => return Err(bad("unknown trend kind (const, sin, poly, weier)")),
    };
    Ok(trend)
  }
}

#[cfg(test)]
mod tests {
  use super::*;

  fn library() -> Vec<Trend> {
    vec![
      Trend::Const(0.7),
      Trend::Sine {
        offset: 0.2,
        amplitude: 0.5,
        omega: TAU,
      },
      Trend::Poly(vec![0.1, -0.4, 0.3, 0.2]),
      Trend::Weierstrass {
        amplitude: 0.3,
        k: 1,
        gamma: 0.5,
        terms: 6,
      },
    ]
  }

  #[test]
  fn grammar_roundtrip() {
    for trend in library() {
      let parsed: Trend = trend.to_string().parse().unwrap();
      assert_eq!(parsed, trend);
    }
    assert!("sin:1,2".parse::<Trend>().is_err());
    assert!("cosh:1".parse::<Trend>().is_err());
    assert!("weier:1,0.5,0.5,3".parse::<Trend>().is_err());
  }

  #[test]
  fn bound_dominates_on_dense_grid() {
    for trend in library() {
      let l = trend.bound(1.0);
      for i in 0..=10_000 {
        let t = i as f64 / 10_000.0;
        assert!(trend.value(t).abs() <= l + 1e-12, "{trend} at {t}");
      }
    }
  }

  #[test]
  fn derivatives_match_central_differences() {
    let h = 1e-4;
    for trend in library() {
      for order in 0..3usize {
        let Some(_) = trend.derivative(order + 1, 0.3) else { continue };
        for &t in &[0.1, 0.37, 0.8] {
          let fd = (trend.derivative(order, t + h).unwrap() - trend.derivative(order, t - h).unwrap()) / (2.0 * h);
          let exact = trend.derivative(order + 1, t).unwrap();
          assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()) * 10f64.powi(order as i32), "{trend} d{order} t={t}");
        }
      }
    }
  }

  #[test]
  fn integral_matches_derivative() {
    let h = 1e-5;
    for trend in library() {
      for &t in &[0.2, 0.5, 0.9] {
        let fd = (trend.integral(t + h) - trend.integral(t - h)) / (2.0 * h);
        assert!((fd - trend.value(t)).abs() < 1e-8, "{trend}");
      }
      assert_eq!(trend.integral(0.0), 0.0);
    }
  }

  #[test]
  fn holder_trend_limits_available_derivatives() {
    let rough = Trend::Weierstrass {
      amplitude: 1.0,
      k: 1,
      gamma: 0.5,
      terms: 4,
    };
    assert!(rough.derivative(1, 0.2).is_some());
    assert!(rough.derivative(2, 0.2).is_none());
    assert_eq!(rough.class().rho(), Some(1.5));
    assert!(matches!(
      rough.product_derivative(1.0, 0.5, 2),
      Err(Error::UnavailableDerivative { order: 2, .. })
    ));
  }

  #[test]
  fn product_derivative_for_constant_trend() {
    // J(t) = c x0 e^{ct} so J^{(n)} = c^{n+1} x0 e^{ct}.
    let c: f64 = 0.8;
    let trend = Trend::Const(c);
    for n in 0..5usize {
      let want = c.powi(n as i32 + 1) * 2.0 * (c * 0.3).exp();
      assert!((trend.product_derivative(2.0, 0.3, n).unwrap() - want).abs() < 1e-13);
    }
  }
}
