//! Special functions backing the power-series evaluations.
//!
//! Everything here works on `f64`. Factorial-type products that would
//! overflow (`k!` with `k` in the hundreds, `(m)_k`, `Γ²(n+1)`) are handled
//! through [`log_gamma`] and [`pochhammer_log`] so callers can assemble
//! coefficients in log-magnitude form and exponentiate once per term.

use crate::error::{Error, Result};

/// Truncation control for adaptively summed series.
///
/// A series stops once the magnitude of the latest term has stayed below
/// `rel_tol * |partial sum|` for three consecutive terms, or after
/// `max_terms` terms, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesAccuracy {
    max_terms: usize,
    rel_tol: f64,
}

impl SeriesAccuracy {
    /// Consecutive small terms required before a series is declared converged.
    pub const STREAK: usize = 3;

    pub fn new(max_terms: usize, rel_tol: f64) -> Result<Self> {
        if max_terms < 1 {
            return Err(Error::InvalidParameter {
                name: "max_terms",
                value: max_terms as f64,
                requirement: "max_terms >= 1",
            });
        }
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::InvalidParameter {
                name: "rel_tol",
                value: rel_tol,
                requirement: "0 < rel_tol < 1",
            });
        }
        Ok(Self { max_terms, rel_tol })
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub(crate) fn stopper(&self) -> Stopper {
        Stopper {
            rel_tol: self.rel_tol,
            streak: 0,
        }
    }
}

impl Default for SeriesAccuracy {
    fn default() -> Self {
        Self {
            max_terms: 100_000,
            rel_tol: 1e-16,
        }
    }
}

/// Tracks the consecutive-small-terms stopping rule.
#[derive(Debug, Clone)]
pub(crate) struct Stopper {
    rel_tol: f64,
    streak: usize,
}

impl Stopper {
    /// Feed the newest term and the partial sum that already includes it.
    pub(crate) fn done(&mut self, term: f64, sum: f64) -> bool {
        if term.abs() < self.rel_tol * sum.abs() {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.streak >= SeriesAccuracy::STREAK
    }
}

/// Neumaier-compensated accumulator, used for every alternating series.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Unevaluated sum `hi + lo` carrying about 106 bits, for sums whose terms
/// cancel far beyond what `f64` can absorb.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub(crate) fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn quick_two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        Self { hi: s, lo: b - (s - a) }
    }

    fn two_prod(a: f64, b: f64) -> Self {
        let p = a * b;
        Self {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    pub(crate) fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let t = Self::two_sum(self.lo, o.lo);
        let u = Self::quick_two_sum(s.hi, s.lo + t.hi);
        Self::quick_two_sum(u.hi, u.lo + t.lo)
    }

    pub(crate) fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub(crate) fn mul(self, o: Self) -> Self {
        let p = Self::two_prod(self.hi, o.hi);
        Self::quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }

    pub(crate) fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Self::from_f64(q1)).neg());
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul(Self::from_f64(q2)).neg());
        let q3 = r.hi / o.hi;
        Self::quick_two_sum(q1, q2).add(Self::from_f64(q3))
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// A real number stored as sign and natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub negative: bool,
    pub ln_abs: f64,
}

impl SignedLog {
    pub fn positive(ln_abs: f64) -> Self {
        Self {
            negative: false,
            ln_abs,
        }
    }

    pub fn value(&self) -> f64 {
        let v = self.ln_abs.exp();
        if self.negative {
            -v
        } else {
            v
        }
    }
}

/// Sum of signed log-magnitude terms, compensated.
///
/// Returns `(sum, largest |term|)`. Both are `+inf` style overflow is
/// reported as an error.
pub fn sum_signed_logs<I>(terms: I, context: &'static str) -> Result<(f64, f64)>
where
    I: IntoIterator<Item = SignedLog>,
    I::IntoIter: Clone,
{
    let iter = terms.into_iter();
    let peak = iter.clone().map(|t| t.ln_abs).fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok((0.0, 0.0));
    }
    let mut acc = CompensatedSum::new();
    for t in iter {
        let v = (t.ln_abs - peak).exp();
        acc.add(if t.negative { -v } else { v });
    }
    let scale = peak.exp();
    let total = acc.value() * scale;
    if !scale.is_finite() || !total.is_finite() {
        return Err(Error::Overflow { context });
    }
    Ok((total, scale))
}

/// `ln Γ(x)` without argument checks. `x` must be positive.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Natural logarithm of the Gamma function.
pub fn log_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain {
            function: "log_gamma",
            value: x,
            requirement: "x > 0",
        });
    }
    Ok(ln_gamma(x))
}

/// `ln (a)_k` where `(a)_k = Γ(a+k)/Γ(a)` is the rising factorial.
pub fn pochhammer_log(a: f64, k: u32) -> Result<f64> {
    if a.is_nan() || a <= 0.0 {
        return Err(Error::Domain {
            function: "pochhammer_log",
            value: a,
            requirement: "a > 0",
        });
    }
    Ok(ln_pochhammer(a, k))
}

pub(crate) fn ln_pochhammer(a: f64, k: u32) -> f64 {
    match k {
        0 => 0.0,
        // direct product is both faster and tighter for short runs
        1..=16 => (0..k).map(|j| (a + f64::from(j)).ln()).sum(),
        _ => ln_gamma(a + f64::from(k)) - ln_gamma(a),
    }
}

/// `ln n!`
pub(crate) fn ln_factorial(n: usize) -> f64 {
    // n! is exact in f64 up to 18!
    if n <= 18 {
        (2..=n).map(|k| k as f64).product::<f64>().ln()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Table of `ln n!` for `n = 0..=len-1`.
pub(crate) fn ln_factorial_table(len: usize) -> Vec<f64> {
    (0..len).map(ln_factorial).collect()
}

/// Modified Bessel function of the first kind, order zero, by its ascending
/// series `Σ (x/2)^{2k} / (k!)²`.
pub fn bessel_i0(x: f64) -> Result<f64> {
    bessel_i0_with(x, &SeriesAccuracy::default())
}

pub fn bessel_i0_with(x: f64, acc: &SeriesAccuracy) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain {
            function: "bessel_i0",
            value: x,
            requirement: "x >= 0",
        });
    }
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut stop = acc.stopper();
    for k in 1..acc.max_terms() {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Overflow { context: "bessel_i0" });
        }
        if stop.done(term, sum) {
            break;
        }
    }
    Ok(sum)
}

/// `ln I₀(x)`, valid for arbitrarily large `x`.
///
/// Uses the ascending series up to `x = 30` and the large-argument expansion
/// `e^x / √(2πx) · Σ ((2k-1)!!)² / (k! (8x)^k)` above it.
pub fn ln_bessel_i0(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain {
            function: "ln_bessel_i0",
            value: x,
            requirement: "x >= 0",
        });
    }
    Ok(ln_i0(x))
}

pub(crate) fn ln_i0(x: f64) -> f64 {
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        return sum.ln();
    }
    let inv8x = 1.0 / (8.0 * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        term *= odd * odd * inv8x / k as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

/// Confluent hypergeometric function `₁F₁(m; 1; x)` by its ascending series
/// `Σ (m)_k x^k / (k!)²`.
pub fn hyp1f1_integer_b1(m: f64, x: f64) -> Result<f64> {
    hyp1f1_integer_b1_with(m, x, &SeriesAccuracy::default())
}

pub fn hyp1f1_integer_b1_with(m: f64, x: f64, acc: &SeriesAccuracy) -> Result<f64> {
    check_hyp_args(m, x)?;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut stop = acc.stopper();
    for k in 0..acc.max_terms().saturating_sub(1) {
        let kf = k as f64;
        term *= (m + kf) * x / ((kf + 1.0) * (kf + 1.0));
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Overflow {
                context: "hyp1f1_integer_b1",
            });
        }
        if stop.done(term, sum) {
            break;
        }
    }
    Ok(sum)
}

/// `ln ₁F₁(m; 1; x)` with a rescaled accumulator, so it never overflows.
pub fn ln_hyp1f1_b1(m: f64, x: f64) -> Result<f64> {
    check_hyp_args(m, x)?;
    Ok(ln_hyp1f1(m, x))
}

pub(crate) fn ln_hyp1f1(m: f64, x: f64) -> f64 {
    const RESCALE: f64 = 1e250;
    let ln_rescale = RESCALE.ln();
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut offset = 0.0;
    let mut k = 0.0;
    let mut streak = 0;
    loop {
        term *= (m + k) * x / ((k + 1.0) * (k + 1.0));
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            offset += ln_rescale;
        }
        if term < 1e-17 * sum {
            streak += 1;
            if streak >= SeriesAccuracy::STREAK {
                break;
            }
        } else {
            streak = 0;
        }
        k += 1.0;
    }
    sum.ln() + offset
}

fn check_hyp_args(m: f64, x: f64) -> Result<()> {
    if m.is_nan() || m < 0.5 {
        return Err(Error::Domain {
            function: "hyp1f1_integer_b1",
            value: m,
            requirement: "m >= 0.5",
        });
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain {
            function: "hyp1f1_integer_b1",
            value: x,
            requirement: "x >= 0",
        });
    }
    Ok(())
}

/// Regularized lower incomplete gamma function `P(s, x) = γ(s, x) / Γ(s)`.
pub fn lower_incomplete_gamma_regularized(s: f64, x: f64) -> Result<f64> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::Domain {
            function: "lower_incomplete_gamma_regularized",
            value: s,
            requirement: "s > 0",
        });
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain {
            function: "lower_incomplete_gamma_regularized",
            value: x,
            requirement: "x >= 0",
        });
    }
    Ok(reg_lower_gamma(s, x))
}

pub(crate) fn reg_lower_gamma(s: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    statrs::function::gamma::gamma_lr(s, x)
}
