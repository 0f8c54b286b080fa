//! Rigorous moment bounds for the slab crossing time under exponential
//! weights, evaluated numerically.
//!
//! With `s_n = 2(d-1) n^{(d-2)/(d-1)}` (a lower bound on the perimeter of any
//! `n`-vertex cluster in `H_0`) and `A = 1 - 1/(2d)`, the first and second
//! moments at rate 1 satisfy
//!
//! ```text
//! E s  <= 1/(1 + s_1) + Σ_{n>=2} A^{n-1} / s_n
//! E s² <= 2 Σ_{n>=1} A^{n-1} / (n + s_n) · Σ_{k<=n} 1/(k + s_k)
//! ```
//!
//! and rate `a` rescales them by `1/a` and `1/a²`. Series are summed to a
//! truncation `N` with compensated summation; the remainders are bounded by
//! geometric majorants, so every reported value is a genuine upper bound.

use serde::{Deserialize, Serialize};

use crate::error::{FppError, Result};
use crate::quad::{integrate, integrate_to_infinity, Tolerance};
use crate::stats::KahanSum;

/// Relative size below which a series term ends the summation early; the
/// remainder is then covered by the tail majorant.
const NEGLIGIBLE_TERM: f64 = 1e-30;

/// Relative tolerance of the integral decomposition.
pub const INTEGRAL_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
struct Geometry {
    d: f64,
    /// (d-2)/(d-1)
    beta: f64,
    /// 2(d-1)
    scale: f64,
    ln_a: f64,
}

impl Geometry {
    fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(FppError::domain(format!("dimension must be at least 2, got {d}")));
        }
        let df = d as f64;
        Ok(Geometry {
            d: df,
            beta: (df - 2.0) / (df - 1.0),
            scale: 2.0 * (df - 1.0),
            ln_a: (-1.0 / (2.0 * df)).ln_1p(),
        })
    }

    #[inline]
    fn s(&self, x: f64) -> f64 {
        self.scale * (self.beta * x.ln()).exp()
    }

    #[inline]
    fn a_pow(&self, e: f64) -> f64 {
        (e * self.ln_a).exp()
    }

    fn one_minus_a(&self) -> f64 {
        1.0 / (2.0 * self.d)
    }
}

/// `s_i = 2(d-1) i^{(d-2)/(d-1)}`.
pub fn perimeter_lower_bound(d: usize, i: usize) -> Result<f64> {
    if i < 1 {
        return Err(FppError::domain("cluster size must be at least 1"));
    }
    Ok(Geometry::new(d)?.s(i as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoMin {
    pub value: f64,
    /// Minimizing `k`; the largest one when several tie.
    pub k: usize,
}

/// Edge-isoperimetric lower bound for `i` vertices inside a box of side
/// `ell` in Z^{d-1}: `min_{1<=k<=d-1} 2k i^{1-1/k} ell^{(d-1)/k - 1}`.
pub fn iso_min(d: usize, i: usize, ell: usize) -> Result<IsoMin> {
    if d < 2 || i < 1 || ell < 1 {
        return Err(FppError::domain("iso_min needs d >= 2, i >= 1, ell >= 1"));
    }
    let (fi, fl) = (i as f64, ell as f64);
    // i <= ell^{d-1} / 2, compared in logs to avoid overflow.
    if fi.ln() > (d as f64 - 1.0) * fl.ln() - std::f64::consts::LN_2 + 1e-12 {
        return Err(FppError::domain(format!(
            "i = {i} exceeds half the volume of the box of side {ell} in dimension {}",
            d - 1
        )));
    }
    let m = (d - 1) as f64;
    let mut best = IsoMin { value: f64::INFINITY, k: 0 };
    for k in 1..d {
        let kf = k as f64;
        let v = 2.0 * kf * ((1.0 - 1.0 / kf) * fi.ln() + (m / kf - 1.0) * fl.ln()).exp();
        if v <= best.value * (1.0 + 1e-12) {
            best = IsoMin { value: v.min(best.value), k };
        }
    }
    Ok(best)
}

fn check_series_args(a: f64, truncation: usize) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(FppError::domain(format!("rate must be positive, got {a}")));
    }
    if truncation < 2 {
        return Err(FppError::domain("truncation must be at least 2"));
    }
    Ok(())
}

/// `(ub1, tail)`: upper bound on `E s̃` at rate `a` (tail included) and the
/// part of it contributed by the remainder majorant
/// `A^N / (s_{N+1} (1 - A))`.
pub fn first_moment_ub(d: usize, a: f64, truncation: usize) -> Result<(f64, f64)> {
    check_series_args(a, truncation)?;
    let g = Geometry::new(d)?;
    let mut sum = KahanSum::new();
    sum += 1.0 / (1.0 + g.s(1.0));
    let mut last = truncation;
    for n in 2..=truncation {
        let term = g.a_pow((n - 1) as f64) / g.s(n as f64);
        sum += term;
        if term < NEGLIGIBLE_TERM * sum.value() {
            last = n;
            break;
        }
    }
    let tail = g.a_pow(last as f64) / (g.s((last + 1) as f64) * g.one_minus_a());
    Ok(((sum.value() + tail) / a, tail / a))
}

/// `(ub2, tail)`: upper bound on `E s̃²` at rate `a`.
///
/// For `n > N`, `A^{n-1}/(n + s_n) <= A^{n-1}/s_{N+1}` and
/// `P_n <= P_N + (n - N)/s_{N+1}`, which sums to
/// `2 A^N / s_{N+1} · (P_N / (1 - A) + 1 / (s_{N+1} (1 - A)²))`.
pub fn second_moment_ub(d: usize, a: f64, truncation: usize) -> Result<(f64, f64)> {
    check_series_args(a, truncation)?;
    let g = Geometry::new(d)?;
    let mut prefix = KahanSum::new();
    let mut sum = KahanSum::new();
    let mut last = truncation;
    for n in 1..=truncation {
        let nf = n as f64;
        let inv = 1.0 / (nf + g.s(nf));
        prefix += inv;
        let term = g.a_pow(nf - 1.0) * inv * prefix.value();
        sum += term;
        if n > 1 && term < NEGLIGIBLE_TERM * sum.value() {
            last = n;
            break;
        }
    }
    let s_next = g.s((last + 1) as f64);
    let q = g.one_minus_a();
    let tail = 2.0 * g.a_pow(last as f64) / s_next * (prefix.value() / q + 1.0 / (s_next * q * q));
    let a2 = a * a;
    Ok(((2.0 * sum.value() + tail) / a2, tail / a2))
}

/// `log d / (2 a d)`.
pub fn asymptote(d: f64, a: f64) -> f64 {
    d.ln() / (2.0 * a * d)
}

/// `ceil(40 d)`: `A^n` has decayed by `e^{-20}` at `n = 40 d`.
pub fn default_truncation(d: usize) -> usize {
    40 * d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d: usize,
    pub a: f64,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub ub1: f64,
    #[serde(rename = "ub1Tail")]
    pub ub1_tail: f64,
    pub ub2: f64,
    #[serde(rename = "ub2Tail")]
    pub ub2_tail: f64,
    /// `(2ad / log d) ub1`
    pub ratio1: f64,
    /// `(2ad / log d)² ub2`
    pub ratio2: f64,
    pub asymptote: f64,
}

pub fn bound_report(d: usize, a: f64, truncation: usize) -> Result<BoundReport> {
    let (ub1, ub1_tail) = first_moment_ub(d, a, truncation)?;
    let (ub2, ub2_tail) = second_moment_ub(d, a, truncation)?;
    let asym = asymptote(d as f64, a);
    Ok(BoundReport {
        d,
        a,
        truncation,
        ub1,
        ub1_tail,
        ub2,
        ub2_tail,
        ratio1: ub1 / asym,
        ratio2: ub2 / (asym * asym),
        asymptote: asym,
    })
}

/// `1/(2d-1) + 1/(2(d-1)) ∫_1^∞ A^{x-1} x^{-(d-2)/(d-1)} dx`, the integral
/// majorant of the rate-1 first-moment series.
pub fn first_moment_integral_bound(d: usize) -> Result<f64> {
    let g = Geometry::new(d)?;
    let integral = integrate_to_infinity(
        |x| g.a_pow(x - 1.0) * (-g.beta * x.ln()).exp(),
        1.0,
        2.0 * g.d,
        Tolerance::rel(INTEGRAL_TOLERANCE),
    )?;
    Ok(1.0 / (2.0 * g.d - 1.0) + integral.value / g.scale)
}

/// The three pieces of `2 ∫_2^∞ (1/s_x) ∫_{x-1}^∞ A^{y-1}/s_y dy dx`, split
/// at `x = 2d + 1` and `y = 2d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralParts {
    /// `2 ∫_2^{2d+1} (1/s_x) ∫_{x-1}^{2d} A^{y-1}/s_y dy dx`
    pub i: f64,
    /// `2 ∫_2^{2d+1} (1/s_x) dx · ∫_{2d}^∞ A^{y-1}/s_y dy`
    pub ii: f64,
    /// `2 ∫_{2d+1}^∞ (1/s_x) ∫_{x-1}^∞ A^{y-1}/s_y dy dx`
    pub iii: f64,
}

pub fn integral_decomposition(d: usize) -> Result<IntegralParts> {
    if d < 3 {
        return Err(FppError::domain("integral decomposition needs d >= 3"));
    }
    let g = Geometry::new(d)?;
    let two_d = 2.0 * g.d;
    let decay = 2.0 * g.d;
    let inner_tol = Tolerance::rel(INTEGRAL_TOLERANCE * 1e-2);
    let outer_tol = Tolerance::rel(INTEGRAL_TOLERANCE);
    let f = |y: f64| g.a_pow(y - 1.0) / g.s(y);

    // Errors inside an integrand are parked here and surfaced afterwards.
    let mut inner_err: Option<FppError> = None;

    let i = integrate(
        |x| match integrate(f, x - 1.0, two_d, inner_tol) {
            Ok(e) => e.value / g.s(x),
            Err(e) => {
                inner_err.get_or_insert(e);
                0.0
            }
        },
        2.0,
        two_d + 1.0,
        outer_tol,
    )?;
    if let Some(e) = inner_err.take() {
        return Err(e);
    }

    let tail_2d = integrate_to_infinity(f, two_d, decay, inner_tol)?;
    let inv_s = integrate(|x| 1.0 / g.s(x), 2.0, two_d + 1.0, inner_tol)?;

    let iii = integrate_to_infinity(
        |x| match integrate_to_infinity(f, x - 1.0, decay, inner_tol) {
            Ok(e) => e.value / g.s(x),
            Err(e) => {
                inner_err.get_or_insert(e);
                0.0
            }
        },
        two_d + 1.0,
        decay,
        outer_tol,
    )?;
    if let Some(e) = inner_err.take() {
        return Err(e);
    }

    Ok(IntegralParts { i: 2.0 * i.value, ii: 2.0 * inv_s.value * tail_2d.value, iii: 2.0 * iii.value })
}
