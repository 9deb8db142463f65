//! Compactly supported piecewise-polynomial kernels of a declared order,
//! their exact moments and autocorrelation, and the variance functional
//!
//! ```text
//! sigma^2_H = H (2H - 1) ∫∫ G(u) G(v) |u - v|^{2H-2} du dv
//!           = 2 H (2H - 1) ∫_0^{B-A} psi(w) w^{2H-2} dw,
//! psi(w)    = ∫ G(u) G(u + w) du.
//! ```
//!
//! Because `psi` is piecewise polynomial in `w`, the singular integral has an
//! elementary closed form; an adaptive quadrature route is kept as an
//! independent cross-check.

use std::fmt;
use std::str::FromStr;

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::quadrature;

/// Highest kernel order the constructor accepts.
pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
  pub lo: f64,
  pub hi: f64,
  /// Monomial coefficients in `u`, lowest degree first.
  pub coeffs: Vec<f64>,
}

impl Piece {
  fn eval(&self, u: f64) -> f64 {
    poly_eval(&self.coeffs, u)
  }

  /// `∫_{lo}^{hi} u^j p(u) du` restricted to `[a, b] ∩ [lo, hi]`.
  fn integral_against_monomial(&self, j: usize, a: f64, b: f64) -> f64 {
    let lo = a.max(self.lo);
    let hi = b.min(self.hi);
    if hi <= lo {
      return 0.0;
    }
    self
      .coeffs
      .iter()
      .enumerate()
      .map(|(i, c)| {
        let p = (i + j + 1) as i32;
        c * (hi.powi(p) - lo.powi(p)) / p as f64
      })
      .sum()
  }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
  lo: f64,
  hi: f64,
  pieces: Vec<Piece>,
  order: usize,
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
  coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
  let mut out = vec![0.0; a.len() + b.len() - 1];
  for (i, x) in a.iter().enumerate() {
    for (j, y) in b.iter().enumerate() {
      out[i + j] += x * y;
    }
  }
  out
}

fn binomial(n: usize, k: usize) -> f64 {
  (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients of `p(u + shift)` as a polynomial in `u`.
fn poly_shift(p: &[f64], shift: f64) -> Vec<f64> {
  let mut out = vec![0.0; p.len()];
  for (i, c) in p.iter().enumerate() {
    for (beta, slot) in out.iter_mut().enumerate().take(i + 1) {
      *slot += c * binomial(i, beta) * shift.powi((i - beta) as i32);
    }
  }
  out
}

fn exact_binomial(n: usize, k: usize) -> BigRational {
  (0..k).fold(BigRational::one(), |acc, i| {
    acc * BigRational::new(BigInt::from(n - i), BigInt::from(i + 1))
  })
}

/// `(base - w)^power` when `neg`, else `base^power`, expanded in powers of `w`.
fn exact_linear_power(base: &BigRational, neg: bool, power: usize) -> Vec<BigRational> {
  let mut base_pow = vec![BigRational::one()];
  for _ in 0..power {
    let next = base_pow.last().unwrap() * base;
    base_pow.push(next);
  }
  if !neg {
    let mut out = vec![BigRational::zero(); power + 1];
    out[0] = base_pow[power].clone();
    return out;
  }
  (0..=power)
    .map(|j| {
      let term = exact_binomial(power, j) * &base_pow[power - j];
      if j % 2 == 1 {
        -term
      } else {
        term
      }
    })
    .collect()
}

impl Kernel {
  /// Builds a kernel from explicit pieces. Pieces must be ordered,
  /// non-overlapping and lie inside the support `[lo, hi]`, which must
  /// straddle zero.
  pub fn new(lo: f64, hi: f64, order: usize, pieces: Vec<Piece>) -> Result<Self> {
    if !(lo < 0.0 && 0.0 < hi && lo.is_finite() && hi.is_finite()) {
      return Err(Error::domain("support", format!("support [{lo}, {hi}] must satisfy A < 0 < B")));
    }
    if pieces.is_empty() {
      return Err(Error::domain("pieces", "a kernel needs at least one piece"));
    }
    let mut cursor = lo;
    for piece in &pieces {
      if !(piece.lo >= cursor && piece.lo < piece.hi && piece.hi <= hi) {
        return Err(Error::domain(
          "pieces",
          format!("piece [{}, {}] is out of order or outside the support", piece.lo, piece.hi),
        ));
      }
      if piece.coeffs.is_empty() || piece.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("pieces", "piece coefficients must be finite and non-empty"));
      }
      cursor = piece.hi;
    }
    Ok(Self {
      lo,
      hi,
      pieces,
      order,
    })
  }

  /// Constant kernel `1 / (hi - lo)` on `[lo, hi]` (order 0).
  pub fn box_kernel(lo: f64, hi: f64) -> Result<Self> {
    let height = 1.0 / (hi - lo);
    Self::new(
      lo,
      hi,
      0,
      vec![Piece {
        lo,
        hi,
        coeffs: vec![height],
      }],
    )
  }

  pub fn support(&self) -> (f64, f64) {
    (self.lo, self.hi)
  }

  pub fn width(&self) -> f64 {
    self.hi - self.lo
  }

  pub fn order(&self) -> usize {
    self.order
  }

  pub fn pieces(&self) -> &[Piece] {
    &self.pieces
  }

  /// `G_s(u) = G(u / s) / s` with `s` chosen so the support has the given
  /// width. Moment `j` scales by `s^j`, so the order is preserved.
  pub fn rescaled(&self, width: f64) -> Result<Self> {
    if !(width > 0.0 && width.is_finite()) {
      return Err(Error::domain("width", format!("kernel width {width} must be positive")));
    }
    let s = width / self.width();
    let pieces = self
      .pieces
      .iter()
      .map(|p| Piece {
        lo: p.lo * s,
        hi: p.hi * s,
        coeffs: p
          .coeffs
          .iter()
          .enumerate()
          .map(|(i, c)| c / s.powi(i as i32 + 1))
          .collect(),
      })
      .collect();
    Self::new(self.lo * s, self.hi * s, self.order, pieces)
  }

  pub fn eval(&self, u: f64) -> f64 {
    if u < self.lo || u > self.hi {
      return 0.0;
    }
    self
      .pieces
      .iter()
      .find(|p| u >= p.lo && u <= p.hi)
      .map_or(0.0, |p| p.eval(u))
  }

  /// `∫_a^b G(u) du`.
  pub fn integral(&self, a: f64, b: f64) -> f64 {
    self.pieces.iter().map(|p| p.integral_against_monomial(0, a, b)).sum()
  }

  /// Exact `∫ u^j G(u) du`.
  pub fn moment(&self, j: usize) -> f64 {
    self
      .pieces
      .iter()
      .map(|p| p.integral_against_monomial(j, p.lo, p.hi))
      .sum()
  }

  /// Upper bound on `sup |G|`.
  pub fn sup_bound(&self) -> f64 {
    self
      .pieces
      .iter()
      .map(|p| {
        let r = p.lo.abs().max(p.hi.abs());
        p.coeffs.iter().enumerate().map(|(i, c)| c.abs() * r.powi(i as i32)).sum::<f64>()
      })
      .fold(0.0, f64::max)
  }

  /// `psi(w) = ∫ G(u) G(u + w) du`, evaluated exactly at one lag.
  pub fn autocorrelation(&self, w: f64) -> f64 {
    if w.abs() >= self.width() {
      return 0.0;
    }
    let mut total = 0.0;
    for p in &self.pieces {
      for q in &self.pieces {
        let lo = p.lo.max(q.lo - w);
        let hi = p.hi.min(q.hi - w);
        if hi <= lo {
          continue;
        }
        let product = poly_mul(&p.coeffs, &poly_shift(&q.coeffs, w));
        total += product
          .iter()
          .enumerate()
          .map(|(i, c)| c * (hi.powi(i as i32 + 1) - lo.powi(i as i32 + 1)) / (i + 1) as f64)
          .sum::<f64>();
      }
    }
    total
  }

  /// `psi` on `[0, B - A]` as a list of `(w_lo, w_hi, polynomial in w)`.
  pub fn autocorrelation_pieces(&self) -> Vec<(f64, f64, Vec<f64>)> {
    self
      .exact_autocorrelation_pieces()
      .into_iter()
      .map(|(lo, hi, poly)| (lo, hi, poly.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()))
      .collect()
  }

  /// Autocorrelation polynomials with exact rational coefficients. The
  /// monomial coefficients of high-order kernels are large and alternate in
  /// sign, so floating-point accumulation loses most significant digits.
  fn exact_autocorrelation_pieces(&self) -> Vec<(f64, f64, Vec<BigRational>)> {
    let span = self.width();
    let mut cuts = vec![0.0, span];
    for p in &self.pieces {
      for q in &self.pieces {
        for a in [p.lo, p.hi] {
          for b in [q.lo, q.hi] {
            let d = b - a;
            if d > 0.0 && d < span {
              cuts.push(d);
            }
          }
        }
      }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * span);

    let exact = |x: f64| BigRational::from_float(x).expect("finite kernel data");
    let pieces: Vec<(BigRational, BigRational, Vec<BigRational>)> = self
      .pieces
      .iter()
      .map(|p| (exact(p.lo), exact(p.hi), p.coeffs.iter().map(|&c| exact(c)).collect()))
      .collect();

    let mut out = Vec::new();
    for window in cuts.windows(2) {
      let (w_lo, w_hi) = (window[0], window[1]);
      let w_mid = 0.5 * (w_lo + w_hi);
      let mut poly: Vec<BigRational> = Vec::new();
      for (p, pe) in self.pieces.iter().zip(&pieces) {
        for (q, qe) in self.pieces.iter().zip(&pieces) {
          // Limits of the u-integral as affine functions base + slope * w.
          let (lo_base, lo_slope, lo_neg) = if p.lo >= q.lo - w_mid { (p.lo, 0.0, false) } else { (q.lo, -1.0, true) };
          let (hi_base, hi_slope, hi_neg) = if p.hi <= q.hi - w_mid { (p.hi, 0.0, false) } else { (q.hi, -1.0, true) };
          if hi_base + hi_slope * w_mid <= lo_base + lo_slope * w_mid {
            continue;
          }
          let lo_base = if lo_neg { &qe.0 } else { &pe.0 };
          let hi_base = if hi_neg { &qe.1 } else { &pe.1 };
          // p(u) q(u + w) = sum_{alpha, beta} c[alpha][beta] u^alpha w^beta.
          for (i, pc) in pe.2.iter().enumerate() {
            for (l, qc) in qe.2.iter().enumerate() {
              for beta in 0..=l {
                let alpha = i + l - beta;
                let c = pc * qc * exact_binomial(l, beta) / BigRational::from_integer(BigInt::from(alpha + 1));
                let upper = exact_linear_power(hi_base, hi_neg, alpha + 1);
                let lower = exact_linear_power(lo_base, lo_neg, alpha + 1);
                if poly.len() < beta + upper.len() {
                  poly.resize(beta + upper.len(), BigRational::zero());
                }
                for (j, (u, v)) in upper.iter().zip(&lower).enumerate() {
                  poly[beta + j] += &c * (u - v);
                }
              }
            }
          }
        }
      }
      out.push((w_lo, w_hi, poly));
    }
    out
  }

  /// Closed-form `sigma^2_H`.
  pub fn sigma2_h(&self, hurst: f64) -> Result<f64> {
    check_variance_hurst(hurst)?;
    let e = 2.0 * hurst - 1.0;
    let e_exact = BigRational::from_float(e).expect("finite exponent");
    // Each endpoint contributes w^e * sum_n c_n w^n / (n + e); the sum is
    // formed exactly and only the irrational factor w^e is rounded.
    let endpoint = |w: f64, poly: &[BigRational]| -> f64 {
      if w == 0.0 {
        return 0.0;
      }
      let w_exact = BigRational::from_float(w).expect("finite breakpoint");
      let mut power = BigRational::one();
      let mut sum = BigRational::zero();
      for (n, c) in poly.iter().enumerate() {
        sum += c * &power / (BigRational::from_integer(BigInt::from(n)) + &e_exact);
        power *= &w_exact;
      }
      sum.to_f64().unwrap_or(f64::NAN) * w.powf(e)
    };
    let total: f64 = self
      .exact_autocorrelation_pieces()
      .iter()
      .map(|(w_lo, w_hi, poly)| endpoint(*w_hi, poly) - endpoint(*w_lo, poly))
      .sum();
    Ok(2.0 * hurst * e * total)
  }

  /// `sigma^2_H` by adaptive quadrature of `psi(w) w^{2H-2}` after the
  /// substitution `s = w^{2H-1}`, which removes the singularity at `w = 0`.
  pub fn sigma2_h_quadrature(&self, hurst: f64) -> Result<f64> {
    check_variance_hurst(hurst)?;
    let e = 2.0 * hurst - 1.0;
    let span = self.width();
    let breakpoints: Vec<f64> = self
      .autocorrelation_pieces()
      .iter()
      .map(|(lo, _, _)| lo.powf(e))
      .collect();
    let result = quadrature::integrate(
      |s: f64| self.autocorrelation(s.powf(1.0 / e)),
      0.0,
      span.powf(e),
      &breakpoints,
      1e-11,
      4000,
    );
    Ok(2.0 * hurst * result.value)
  }
}

fn check_variance_hurst(hurst: f64) -> Result<()> {
  if hurst > 0.5 && hurst < 1.0 {
    Ok(())
  } else {
    Err(Error::domain(
      "H",
      format!("sigma^2_H requires H in (0.5, 1), got {hurst}"),
    ))
  }
}

/// Finite-value guard for the Wiener integrability condition
/// `∫∫ |G(u) G(v)| |u - v|^{2H-2} du dv < ∞`, bounded by
/// `sup|G|^2 * 2 (B-A)^{2H} / ((2H-1) 2H)`.
pub fn wiener_integrability_check(kernel: &Kernel, hurst: f64) -> bool {
  if !(hurst > 0.5 && hurst < 1.0) {
    return false;
  }
  let sup = kernel.sup_bound();
  let span = kernel.width();
  let bound = sup * sup * 2.0 * span.powf(2.0 * hurst) / ((2.0 * hurst - 1.0) * 2.0 * hurst);
  bound.is_finite()
}

fn rational(n: i64, d: i64) -> BigRational {
  BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Legendre polynomials `P_0..=P_k` as exact monomial coefficient vectors.
fn legendre_basis(k: usize) -> Vec<Vec<BigRational>> {
  let mut basis: Vec<Vec<BigRational>> = vec![vec![BigRational::one()]];
  if k >= 1 {
    basis.push(vec![BigRational::zero(), BigRational::one()]);
  }
  for i in 1..k {
    // (i + 1) P_{i+1} = (2i + 1) u P_i - i P_{i-1}
    let mut next = vec![BigRational::zero(); i + 2];
    for (d, c) in basis[i].iter().enumerate() {
      next[d + 1] += c * rational(2 * i as i64 + 1, i as i64 + 1);
    }
    for (d, c) in basis[i - 1].iter().enumerate() {
      next[d] -= c * rational(i as i64, i as i64 + 1);
    }
    basis.push(next);
  }
  basis
}

/// `∫_{-1}^{1} u^p du`.
fn monomial_integral(p: usize) -> BigRational {
  if p % 2 == 1 {
    BigRational::zero()
  } else {
    rational(2, p as i64 + 1)
  }
}

/// Order-`k` kernel on `[-1, 1]`.
///
/// `k = 0` is the box `1/2`. For `k >= 1` the kernel is
/// `(1 - u^2) * sum_i c_i P_i(u)` over Legendre polynomials `P_0..P_k`,
/// with `c` solving the `k + 1` moment constraints `∫ u^j G = δ_{0j}` in
/// exact rational arithmetic. `k = 1` gives the Epanechnikov kernel.
pub fn make_order_k_kernel(k: usize) -> Result<Kernel> {
  if k > MAX_ORDER {
    return Err(Error::Resolution(format!(
      "kernel order {k} exceeds the conditioning limit {MAX_ORDER}"
    )));
  }
  if k == 0 {
    return Kernel::box_kernel(-1.0, 1.0);
  }
  let weight = [BigRational::one(), BigRational::zero(), -BigRational::one()];
  let basis: Vec<Vec<BigRational>> = legendre_basis(k)
    .into_iter()
    .map(|p| {
      let mut out = vec![BigRational::zero(); p.len() + 2];
      for (i, a) in p.iter().enumerate() {
        for (j, b) in weight.iter().enumerate() {
          out[i + j] += a * b;
        }
      }
      out
    })
    .collect();

  let size = k + 1;
  // Augmented system: row j holds ∫ u^j b_i(u) du for each basis function.
  let mut system: Vec<Vec<BigRational>> = (0..size)
    .map(|j| {
      let mut row: Vec<BigRational> = basis
        .iter()
        .map(|b| {
          b.iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (p, c)| acc + c * monomial_integral(p + j))
        })
        .collect();
      row.push(if j == 0 { BigRational::one() } else { BigRational::zero() });
      row
    })
    .collect();

  for col in 0..size {
    let pivot = (col..size)
      .find(|&r| !system[r][col].is_zero())
      .ok_or_else(|| Error::Resolution(format!("singular moment system at order {k}")))?;
    system.swap(col, pivot);
    let lead = system[col][col].clone();
    for entry in system[col].iter_mut() {
      *entry /= lead.clone();
    }
    for r in 0..size {
      if r != col && !system[r][col].is_zero() {
        let factor = system[r][col].clone();
        let pivot_row = system[col].clone();
        for (entry, p) in system[r].iter_mut().zip(pivot_row.iter()) {
          *entry -= factor.clone() * p;
        }
      }
    }
  }

  let mut monomial = vec![BigRational::zero(); k + 3];
  for (i, b) in basis.iter().enumerate() {
    let c = &system[i][size];
    for (d, coeff) in b.iter().enumerate() {
      monomial[d] += c * coeff;
    }
  }
  while monomial.len() > 1 && monomial.last().is_some_and(|c| c.is_zero()) {
    monomial.pop();
  }
  let coeffs = monomial
    .iter()
    .map(|c| c.to_f64().ok_or_else(|| Error::Resolution("coefficient overflow".into())))
    .collect::<Result<Vec<f64>>>()?;
  Kernel::new(
    -1.0,
    1.0,
    k,
    vec![Piece {
      lo: -1.0,
      hi: 1.0,
      coeffs,
    }],
  )
}

impl fmt::Display for Kernel {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    writeln!(f, "kernel order={} support={},{}", self.order, self.lo, self.hi)?;
    for p in &self.pieces {
      write!(f, "piece {} {}", p.lo, p.hi)?;
      for c in &p.coeffs {
        write!(f, " {c}")?;
      }
      writeln!(f)?;
    }
    Ok(())
  }
}

impl FromStr for Kernel {
  type Err = Error;

  fn from_str(s: &str) -> Result<Self> {
    let num = |tok: &str| -> Result<f64> {
      tok
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("invalid number `{tok}` in kernel description")))
    };
    let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
      .next()
      .ok_or_else(|| Error::Parse("empty kernel description".into()))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("kernel") {
      return Err(Error::Parse("kernel description must start with `kernel`".into()));
    }
    let (mut order, mut support) = (None, None);
    for tok in tokens {
      match tok.split_once('=') {
        Some(("order", v)) => {
          order = Some(v.parse::<usize>().map_err(|_| Error::Parse(format!("invalid order `{v}`")))?)
        }
        Some(("support", v)) => {
          let (a, b) = v
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("invalid support `{v}`")))?;
          support = Some((num(a)?, num(b)?));
        }
        _ => return Err(Error::Parse(format!("unknown kernel header field `{tok}`"))),
      }
    }
    let order = order.ok_or_else(|| Error::Parse("missing order".into()))?;
    let (lo, hi) = support.ok_or_else(|| Error::Parse("missing support".into()))?;
    let mut pieces = Vec::new();
    for line in lines {
      let mut tokens = line.split_whitespace();
      if tokens.next() != Some("piece") {
        return Err(Error::Parse(format!("expected `piece`, got `{line}`")));
      }
      let values = tokens.map(num).collect::<Result<Vec<f64>>>()?;
      if values.len() < 3 {
        return Err(Error::Parse(format!("piece needs bounds and coefficients: `{line}`")));
      }
      pieces.push(Piece {
        lo: values[0],
        hi: values[1],
        coeffs: values[2..].to_vec(),
      });
    }
    Kernel::new(lo, hi, order, pieces)
  }
}
