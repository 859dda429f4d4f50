//! Bivariate Rician shadowed envelopes.
//!
//! The pair is generated as
//!
//! ```text
//! H_k = σ√(1-ρ) X_k + σ√ρ X_0 + Z,   k ∈ {1, 2}
//! ```
//!
//! with `X_0, X_1, X_2` unit-power circularly symmetric complex Gaussians and
//! a common Nakagami-m line-of-sight amplitude `Z` with `E{|Z|²} = Ω_N = Kσ²`.
//! `R_k = |H_k|` are the envelopes.
//!
//! Conditioned on the shared term `σ√ρ X_0 + Z` the two envelopes are
//! independent Rician variables, which gives the integral form of the joint
//! PDF ([`joint_pdf_quadrature`]). Expanding both `I₀` factors and `₁F₁` in
//! power series and integrating term by term gives the closed form
//!
//! ```text
//! f(r1, r2) ≈ Σ_{k ≤ K1} Σ_{i ≤ k} Σ_{n ≤ i} α(k,i,n) r1^{2n+1} r2^{2(i-n)+1} e^{-(r1²+r2²)/(σ²(1-ρ))}
//! ```
//!
//! and, after expanding the remaining exponential to order `K2`, the marginal
//! CDFs ([`BivariateSeries::marginal_cdf`]).

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{require, Error, Result};
use crate::quadrature::{integrate_pieces, Tolerance};
use crate::special::{ln_factorial_table, ln_hyp1f1, ln_i0, ln_pochhammer, reg_lower_gamma, CompensatedSum};
use crate::Uav;

/// Parameters `(σ, ρ, m, K)` of the correlated Rician shadowed pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateShadowedParams {
    sigma: f64,
    rho: f64,
    m: f64,
    k_factor: f64,
}

impl BivariateShadowedParams {
    /// `k_factor` is linear. The full correlation range `0 ≤ ρ ≤ 1` is
    /// accepted here; series evaluation later rejects the endpoints.
    pub fn new(sigma: f64, rho: f64, m: f64, k_factor: f64) -> Result<Self> {
        require(sigma > 0.0 && sigma.is_finite(), "sigma", sigma, "sigma > 0")?;
        require((0.0..=1.0).contains(&rho), "rho", rho, "0 <= rho <= 1")?;
        require(m >= 0.5 && m.is_finite(), "m", m, "m >= 0.5")?;
        require(k_factor >= 0.0 && k_factor.is_finite(), "k_factor", k_factor, "K >= 0")?;
        Ok(Self {
            sigma,
            rho,
            m,
            k_factor,
        })
    }

    pub fn with_k_db(sigma: f64, rho: f64, m: f64, k_db: f64) -> Result<Self> {
        Self::new(sigma, rho, m, crate::db_to_linear(k_db))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn k_factor(&self) -> f64 {
        self.k_factor
    }

    /// Line-of-sight power `Ω_N = K σ²`.
    pub fn omega_n(&self) -> f64 {
        self.k_factor * self.sigma * self.sigma
    }

    /// `E{|H_k|²} = σ²(1 + K)`.
    pub fn mean_power(&self) -> f64 {
        self.sigma * self.sigma * (1.0 + self.k_factor)
    }

    pub fn with_m(self, m: f64) -> Result<Self> {
        Self::new(self.sigma, self.rho, m, self.k_factor)
    }

    pub fn with_rho(self, rho: f64) -> Result<Self> {
        Self::new(self.sigma, rho, self.m, self.k_factor)
    }

    pub(crate) fn constants(&self) -> Result<SeriesConstants> {
        if self.rho <= 0.0 || self.rho >= 1.0 {
            return Err(Error::DegenerateCorrelation { rho: self.rho });
        }
        let (sigma, rho, m, k) = (self.sigma, self.rho, self.m, self.k_factor);
        let s2 = sigma * sigma;
        let scatter = s2 * (1.0 - rho);
        let decay = (1.0 + rho) / (s2 * rho * (1.0 - rho));
        let los = k / (s2 * rho * (rho * m + k));
        let ln_prefactor =
            8f64.ln() + m * (m * rho / (m * rho + k)).ln() - 6.0 * sigma.ln() - rho.ln() - 2.0 * (1.0 - rho).ln();
        Ok(SeriesConstants {
            m,
            scatter,
            ln_scatter: scatter.ln(),
            decay,
            ln_decay: decay.ln(),
            los,
            ln_los: los.ln(),
            ln_prefactor,
        })
    }
}

/// Scalars shared by every series coefficient.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SeriesConstants {
    pub m: f64,
    /// `σ²(1-ρ)`
    pub scatter: f64,
    pub ln_scatter: f64,
    /// `(1+ρ) / (σ²ρ(1-ρ))`
    pub decay: f64,
    pub ln_decay: f64,
    /// `K / (σ²ρ(ρm+K))`
    pub los: f64,
    pub ln_los: f64,
    /// `ln[8 (mρ/(mρ+K))^m / (σ⁶ρ(1-ρ)²)]`
    pub ln_prefactor: f64,
}

impl SeriesConstants {
    /// `ln[(m)_j b^j / (j!)²]`, the `₁F₁` series coefficient; `-∞` when `K = 0`.
    fn ln_hyp_coeff(&self, j: usize, ln_fact: &[f64]) -> f64 {
        if j == 0 {
            return 0.0;
        }
        if self.los == 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_pochhammer(self.m, j as u32) + j as f64 * self.ln_los - 2.0 * ln_fact[j]
    }

    /// `ln[k! / (2 c^{k+1})]`, the Gaussian moment from the final `x` integral.
    fn ln_moment(&self, k: usize, ln_fact: &[f64]) -> f64 {
        ln_fact[k] - std::f64::consts::LN_2 - (k as f64 + 1.0) * self.ln_decay
    }
}

/// Truncation orders of the power series: `ktr1` for the joint series and
/// `ktr2` for the exponential expansion inside the marginal CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruncationOrders {
    pub ktr1: usize,
    pub ktr2: usize,
}

impl TruncationOrders {
    pub fn new(ktr1: usize, ktr2: usize) -> Self {
        Self { ktr1, ktr2 }
    }
}

impl Default for TruncationOrders {
    fn default() -> Self {
        Self { ktr1: 30, ktr2: 10 }
    }
}

#[inline]
fn tri3(k: usize, i: usize, n: usize) -> usize {
    k * (k + 1) * (k + 2) / 6 + i * (i + 1) / 2 + n
}

#[inline]
fn tri2(i: usize, n: usize) -> usize {
    i * (i + 1) / 2 + n
}

fn ln_alpha_raw(c: &SeriesConstants, ln_fact: &[f64], k: usize, i: usize, n: usize) -> f64 {
    let j = k - i;
    c.ln_prefactor + c.ln_hyp_coeff(j, ln_fact)
        - 2.0 * ln_fact[n]
        - 2.0 * ln_fact[i - n]
        - 2.0 * i as f64 * c.ln_scatter
        + c.ln_moment(k, ln_fact)
}

fn check_indices(k: usize, i: usize, n: usize) -> Result<()> {
    require(i <= k, "i", i as f64, "0 <= i <= k")?;
    require(n <= i, "n", n as f64, "0 <= n <= i")
}

/// Series coefficient `α(k, i, n)` of the closed-form joint PDF.
pub fn alpha_coeff(params: &BivariateShadowedParams, k: usize, i: usize, n: usize) -> Result<f64> {
    check_indices(k, i, n)?;
    let c = params.constants()?;
    let ln_fact = ln_factorial_table(k + 1);
    let v = ln_alpha_raw(&c, &ln_fact, k, i, n).exp();
    if v.is_infinite() {
        return Err(Error::Overflow { context: "alpha_coeff" });
    }
    Ok(v)
}

/// `ln α(k,i,n)` for all `k ≤ ktr1`, stored as a flat triangular table.
#[derive(Debug, Clone)]
pub struct AlphaTable {
    ktr1: usize,
    ln_alpha: Vec<f64>,
}

impl AlphaTable {
    pub fn new(params: &BivariateShadowedParams, ktr1: usize) -> Result<Self> {
        let c = params.constants()?;
        let ln_fact = ln_factorial_table(ktr1 + 2);
        let mut ln_alpha = Vec::with_capacity(tri3(ktr1 + 1, 0, 0));
        for k in 0..=ktr1 {
            for i in 0..=k {
                for n in 0..=i {
                    ln_alpha.push(ln_alpha_raw(&c, &ln_fact, k, i, n));
                }
            }
        }
        Ok(Self { ktr1, ln_alpha })
    }

    pub fn ktr1(&self) -> usize {
        self.ktr1
    }

    pub fn ln_alpha(&self, k: usize, i: usize, n: usize) -> f64 {
        debug_assert!(k <= self.ktr1 && i <= k && n <= i);
        self.ln_alpha[tri3(k, i, n)]
    }

    pub fn alpha(&self, k: usize, i: usize, n: usize) -> f64 {
        self.ln_alpha(k, i, n).exp()
    }
}

/// Diagnostics for a truncated alternating series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEvaluation {
    /// Result clamped to its admissible range.
    pub value: f64,
    /// Unclamped truncated sum.
    pub raw: f64,
    /// Largest magnitude among the partial sums of fixed expansion order.
    pub largest_term: f64,
    /// Magnitude of the highest-order contribution that was kept.
    pub last_term: f64,
}

impl SeriesEvaluation {
    /// Largest allowed ratio of the biggest expansion term to the result.
    pub const MAX_TERM_RATIO: f64 = 10.0;
    /// Largest allowed ratio of the last kept term to the result.
    pub const LAST_TERM_REL_TOL: f64 = 1e-3;

    /// Whether the argument is inside the region where the truncated
    /// alternating expansion can be trusted.
    pub fn within_validity(&self) -> bool {
        let scale = self.raw.abs();
        if self.largest_term == 0.0 {
            return true;
        }
        self.largest_term <= Self::MAX_TERM_RATIO * scale && self.last_term <= Self::LAST_TERM_REL_TOL * scale
    }

    pub(crate) fn from_partials(partials: &[f64], lo: f64, hi: f64) -> Self {
        let raw = partials.iter().copied().collect::<CompensatedSum>().value();
        let largest_term = partials.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        let last_term = partials.last().map_or(0.0, |t| t.abs());
        Self {
            value: raw.clamp(lo, hi),
            raw,
            largest_term,
            last_term,
        }
    }
}

/// Closed-form series for one parameter set and truncation, with the
/// coefficient tables built once and reused across arguments.
#[derive(Debug, Clone)]
pub struct BivariateSeries {
    params: BivariateShadowedParams,
    trunc: TruncationOrders,
    consts: SeriesConstants,
    table: AlphaTable,
    /// `ln Σ_k α(k, i, n)` indexed by `tri2(i, n)`.
    k_sums: Vec<f64>,
    ln_fact: Vec<f64>,
}

impl BivariateSeries {
    pub fn new(params: &BivariateShadowedParams, trunc: TruncationOrders) -> Result<Self> {
        let consts = params.constants()?;
        let table = AlphaTable::new(params, trunc.ktr1)?;
        let ktr1 = trunc.ktr1;
        let mut k_sums = vec![f64::NEG_INFINITY; tri2(ktr1 + 1, 0)];
        for i in 0..=ktr1 {
            for n in 0..=i {
                let mut acc = LogAccumulator::new();
                for k in i..=ktr1 {
                    acc.add(table.ln_alpha(k, i, n));
                }
                k_sums[tri2(i, n)] = acc.ln();
            }
        }
        let ln_fact = ln_factorial_table(ktr1 + trunc.ktr2 + 2);
        Ok(Self {
            params: *params,
            trunc,
            consts,
            table,
            k_sums,
            ln_fact,
        })
    }

    pub fn params(&self) -> &BivariateShadowedParams {
        &self.params
    }

    pub fn truncation(&self) -> TruncationOrders {
        self.trunc
    }

    pub fn alpha_table(&self) -> &AlphaTable {
        &self.table
    }

    /// `σ²(1-ρ)`
    pub fn scatter(&self) -> f64 {
        self.consts.scatter
    }

    /// Truncated closed-form joint PDF `f(r1, r2)`.
    pub fn joint_pdf(&self, r1: f64, r2: f64) -> Result<f64> {
        check_envelope(r1, "r1")?;
        check_envelope(r2, "r2")?;
        if r1 == 0.0 || r2 == 0.0 {
            return Ok(0.0);
        }
        let (l1, l2) = (r1.ln(), r2.ln());
        let gauss = -(r1 * r1 + r2 * r2) / self.consts.scatter;
        let mut acc = LogAccumulator::new();
        for k in 0..=self.trunc.ktr1 {
            for i in 0..=k {
                for n in 0..=i {
                    let ln_term =
                        self.table.ln_alpha(k, i, n) + (2 * n + 1) as f64 * l1 + (2 * (i - n) + 1) as f64 * l2;
                    acc.add(ln_term);
                }
            }
        }
        let v = (acc.ln() + gauss).exp();
        if v.is_infinite() {
            return Err(Error::Overflow {
                context: "joint_pdf_closed",
            });
        }
        Ok(v.max(0.0))
    }

    /// Exponents `(l, q)` of `G(j, l, q, γ)` for the series entry `(i, n)`.
    #[inline]
    fn g_indices(which: Uav, i: usize, n: usize) -> (usize, usize) {
        match which {
            Uav::Uav1 => (n, i - n),
            Uav::Uav2 => (i - n, n),
        }
    }

    /// Signed partial sums of the CDF series grouped by expansion order `j`,
    /// each term multiplied by `exp(ln_weight(l, j))`.
    pub(crate) fn j_partials<W>(&self, which: Uav, gamma: f64, ln_weight: W) -> Result<Vec<f64>>
    where
        W: Fn(usize, usize) -> f64,
    {
        let ktr1 = self.trunc.ktr1;
        let mut partials = Vec::with_capacity(self.trunc.ktr2 + 1);
        if gamma == 0.0 {
            partials.resize(self.trunc.ktr2 + 1, 0.0);
            return Ok(partials);
        }
        let ln_gamma = gamma.ln();
        let ls = self.consts.ln_scatter;
        for j in 0..=self.trunc.ktr2 {
            let mut acc = LogAccumulator::new();
            for i in 0..=ktr1 {
                for n in 0..=i {
                    let (l, q) = Self::g_indices(which, i, n);
                    let ln_g = ln_g_term(&self.ln_fact, ls, j, l, q, ln_gamma);
                    acc.add(self.k_sums[tri2(i, n)] + ln_g + ln_weight(l, j));
                }
            }
            let magnitude = acc.value();
            if magnitude.is_infinite() {
                return Err(Error::Overflow {
                    context: "marginal_cdf",
                });
            }
            partials.push(if j % 2 == 1 { -magnitude } else { magnitude });
        }
        Ok(partials)
    }

    /// Marginal CDF `F_{R_i}(γ)` from the truncated quadruple series.
    pub fn marginal_cdf(&self, which: Uav, gamma: f64) -> Result<SeriesEvaluation> {
        check_envelope(gamma, "gamma")?;
        let partials = self.j_partials(which, gamma, |_, _| 0.0)?;
        Ok(SeriesEvaluation::from_partials(&partials, 0.0, 1.0))
    }

    /// Marginal CDF with the inner `r` integral evaluated exactly through the
    /// regularized incomplete gamma function instead of the `ktr2` expansion.
    pub fn marginal_cdf_gamma_form(&self, which: Uav, gamma: f64) -> Result<f64> {
        check_envelope(gamma, "gamma")?;
        if gamma == 0.0 {
            return Ok(0.0);
        }
        let s = self.consts.scatter;
        let ls = self.consts.ln_scatter;
        let x = gamma * gamma / s;
        let ln_fact = &self.ln_fact;
        let mut acc = CompensatedSum::new();
        for i in 0..=self.trunc.ktr1 {
            for n in 0..=i {
                let (l, q) = Self::g_indices(which, i, n);
                // ∫_0^γ r^{2l+1} e^{-r²/s} dr · ∫_0^∞ r^{2q+1} e^{-r²/s} dr
                let ln_c = self.k_sums[tri2(i, n)] + ln_fact[l] + ln_fact[q] + (l + q + 2) as f64 * ls - 4f64.ln();
                acc.add(ln_c.exp() * reg_lower_gamma(l as f64 + 1.0, x));
            }
        }
        let v = acc.value();
        if !v.is_finite() {
            return Err(Error::Overflow {
                context: "marginal_cdf_gamma_form",
            });
        }
        Ok(v.clamp(0.0, 1.0))
    }

    /// Total probability captured by the truncated series, `F_{R_1}(∞)`.
    pub fn captured_mass(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for i in 0..=self.trunc.ktr1 {
            for n in 0..=i {
                let (l, q) = (n, i - n);
                let ln_c = self.k_sums[tri2(i, n)]
                    + self.ln_fact[l]
                    + self.ln_fact[q]
                    + (l + q + 2) as f64 * self.consts.ln_scatter
                    - 4f64.ln();
                acc.add(ln_c.exp());
            }
        }
        acc.value()
    }
}

fn check_envelope(x: f64, name: &'static str) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain {
            function: name,
            value: x,
            requirement: "value >= 0",
        });
    }
    Ok(())
}

/// `ln |G(j, l, q, γ)|` given `ln γ` and `ln σ²(1-ρ)`.
#[inline]
fn ln_g_term(ln_fact: &[f64], ln_scatter: f64, j: usize, l: usize, q: usize, ln_gamma: f64) -> f64 {
    let e = (l + j + 1) as f64;
    2.0 * e * ln_gamma + ln_fact[q] - ln_fact[j] - (j as f64 - q as f64 - 1.0) * ln_scatter - (4.0 * e).ln()
}

/// `G(j, l, q, γ) = (-1)^j γ^{2(l+j+1)} q! / (j! [σ²(1-ρ)]^{j-q-1} 4(l+j+1))`.
pub fn g_term(params: &BivariateShadowedParams, j: usize, l: usize, q: usize, gamma: f64) -> Result<f64> {
    check_envelope(gamma, "gamma")?;
    let c = params.constants()?;
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let ln_fact = ln_factorial_table(j.max(q) + 1);
    let v = ln_g_term(&ln_fact, c.ln_scatter, j, l, q, gamma.ln()).exp();
    if v.is_infinite() {
        return Err(Error::Overflow { context: "g_term" });
    }
    Ok(if j % 2 == 1 { -v } else { v })
}

/// Closed-form joint PDF truncated at `trunc.ktr1`.
///
/// Builds the coefficient table on every call; use [`BivariateSeries`] when
/// evaluating many points.
pub fn joint_pdf_closed(params: &BivariateShadowedParams, trunc: TruncationOrders, r1: f64, r2: f64) -> Result<f64> {
    BivariateSeries::new(params, trunc)?.joint_pdf(r1, r2)
}

pub fn marginal_cdf(
    params: &BivariateShadowedParams,
    trunc: TruncationOrders,
    which: Uav,
    gamma: f64,
) -> Result<SeriesEvaluation> {
    BivariateSeries::new(params, trunc)?.marginal_cdf(which, gamma)
}

pub fn marginal_cdf_gamma_form(
    params: &BivariateShadowedParams,
    trunc: TruncationOrders,
    which: Uav,
    gamma: f64,
) -> Result<f64> {
    BivariateSeries::new(params, trunc)?.marginal_cdf_gamma_form(which, gamma)
}

/// Streaming log-sum-exp over positive terms given by their logarithms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogAccumulator {
    max: f64,
    sum: f64,
}

impl LogAccumulator {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, ln_term: f64) {
        if ln_term == f64::NEG_INFINITY {
            return;
        }
        if ln_term > self.max {
            self.sum = self.sum * (self.max - ln_term).exp() + 1.0;
            self.max = ln_term;
        } else {
            self.sum += (ln_term - self.max).exp();
        }
    }

    pub(crate) fn max(&self) -> f64 {
        self.max
    }

    pub(crate) fn ln(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.ln().exp()
    }
}

/// Fast evaluator of the same closed-form joint series, reorganised as
///
/// ```text
/// f = C r1 r2 e^{-(r1²+r2²)/s} Σ_{n1,n2} u1^{n1} u2^{n2} / (n1!² n2!²) · E_{n1+n2}
/// ```
///
/// with `u = r²/s²` and the point-independent `E_i = Σ_j B_j k!/(2c^{k+1})`,
/// `k = i + j`, tabulated once. Terms far below the running maximum are
/// pruned, so the per-point cost tracks the number of significant terms
/// rather than `ktr1³`.
///
/// [`JointPdfEvaluator::truncated`] keeps exactly the terms with
/// `k ≤ ktr1`; [`JointPdfEvaluator::adaptive`] sums until convergence.
#[derive(Debug, Clone)]
pub struct JointPdfEvaluator {
    consts: SeriesConstants,
    ln_e: Vec<f64>,
    ln_fact: Vec<f64>,
    /// Largest total order `n1 + n2` reachable.
    limit: usize,
}

/// Index of the maximum of a concave sequence on `0..=hi`.
fn concave_argmax(hi: usize, f: impl Fn(usize) -> f64) -> (usize, f64) {
    let (mut lo, mut up) = (0, hi);
    while up - lo > 2 {
        let a = lo + (up - lo) / 3;
        let b = up - (up - lo) / 3;
        if f(a) < f(b) {
            lo = a + 1;
        } else {
            up = b;
        }
    }
    (lo..=up)
        .map(|n| (n, f(n)))
        .fold((lo, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Pruning threshold in nats (`e^-45 ≈ 3e-20`).
const PRUNE: f64 = 45.0;

impl JointPdfEvaluator {
    /// Index cap for adaptive evaluation.
    pub const ADAPTIVE_LIMIT: usize = 6000;

    pub fn truncated(params: &BivariateShadowedParams, ktr1: usize) -> Result<Self> {
        Self::build(params, ktr1, Some(ktr1))
    }

    pub fn adaptive(params: &BivariateShadowedParams) -> Result<Self> {
        Self::build(params, Self::ADAPTIVE_LIMIT, None)
    }

    fn build(params: &BivariateShadowedParams, limit: usize, cap: Option<usize>) -> Result<Self> {
        let consts = params.constants()?;
        let j_room = 40_000;
        let ln_fact = ln_factorial_table(limit + j_room + 2);
        let mut ln_e = Vec::with_capacity(limit + 1);
        for i in 0..=limit {
            let j_max = cap.map_or(j_room, |c| c - i);
            let mut acc = LogAccumulator::new();
            let mut prev = f64::NEG_INFINITY;
            for j in 0..=j_max {
                let t = consts.ln_hyp_coeff(j, &ln_fact) + consts.ln_moment(i + j, &ln_fact);
                acc.add(t);
                if t == f64::NEG_INFINITY || (t < prev && t < acc.max() - PRUNE) {
                    break;
                }
                prev = t;
            }
            ln_e.push(acc.ln());
        }
        Ok(Self {
            consts,
            ln_e,
            ln_fact,
            limit,
        })
    }

    #[inline]
    fn ln_term(&self, lu1: f64, lu2: f64, n1: usize, n2: usize) -> f64 {
        n1 as f64 * lu1 - 2.0 * self.ln_fact[n1] + n2 as f64 * lu2 - 2.0 * self.ln_fact[n2] + self.ln_e[n1 + n2]
    }

    /// Peak of the concave row `n2 ↦ ln_term(n1, n2)` by ternary search.
    fn row_peak(&self, lu1: f64, lu2: f64, n1: usize) -> (usize, f64) {
        concave_argmax(self.limit - n1, |n2| self.ln_term(lu1, lu2, n1, n2))
    }

    /// Peak of a row by hill-climbing from a neighbouring row's peak.
    fn row_peak_from(&self, lu1: f64, lu2: f64, n1: usize, start: usize) -> (usize, f64) {
        let hi = self.limit - n1;
        let mut n = start.min(hi);
        let mut v = self.ln_term(lu1, lu2, n1, n);
        while n < hi {
            let u = self.ln_term(lu1, lu2, n1, n + 1);
            if u <= v {
                break;
            }
            n += 1;
            v = u;
        }
        while n > 0 {
            let u = self.ln_term(lu1, lu2, n1, n - 1);
            if u <= v {
                break;
            }
            n -= 1;
            v = u;
        }
        (n, v)
    }

    /// Adds the significant terms of row `n1` around its peak.
    fn add_row(&self, acc: &mut LogAccumulator, lu1: f64, lu2: f64, n1: usize, peak: usize, floor: f64) {
        for n2 in (0..=peak).rev() {
            let t = self.ln_term(lu1, lu2, n1, n2);
            if t < floor {
                break;
            }
            acc.add(t);
        }
        for n2 in peak + 1..=self.limit - n1 {
            let t = self.ln_term(lu1, lu2, n1, n2);
            if t < floor {
                break;
            }
            acc.add(t);
        }
    }

    /// The log-terms are jointly concave in `(n1, n2)`, so the sum is taken
    /// outward from the single peak until terms fall [`PRUNE`] nats below it.
    pub fn pdf(&self, r1: f64, r2: f64) -> Result<f64> {
        check_envelope(r1, "r1")?;
        check_envelope(r2, "r2")?;
        if r1 == 0.0 || r2 == 0.0 {
            return Ok(0.0);
        }
        let ls = self.consts.ln_scatter;
        let lu1 = 2.0 * (r1.ln() - ls);
        let lu2 = 2.0 * (r2.ln() - ls);
        let (n1_peak, peak) = concave_argmax(self.limit, |n1| self.row_peak(lu1, lu2, n1).1);
        let floor = peak - PRUNE;
        let mut acc = LogAccumulator::new();
        let (mut col, _) = self.row_peak(lu1, lu2, n1_peak);
        let first = col;
        self.add_row(&mut acc, lu1, lu2, n1_peak, col, floor);
        for n1 in n1_peak + 1..=self.limit {
            let (c, v) = self.row_peak_from(lu1, lu2, n1, col);
            if v < floor {
                break;
            }
            self.add_row(&mut acc, lu1, lu2, n1, c, floor);
            col = c;
        }
        col = first;
        for n1 in (0..n1_peak).rev() {
            let (c, v) = self.row_peak_from(lu1, lu2, n1, col);
            if v < floor {
                break;
            }
            self.add_row(&mut acc, lu1, lu2, n1, c, floor);
            col = c;
        }
        let ln_v = self.consts.ln_prefactor + r1.ln() + r2.ln() - (r1 * r1 + r2 * r2) / self.consts.scatter + acc.ln();
        let v = ln_v.exp();
        if v.is_infinite() {
            return Err(Error::Overflow {
                context: "joint_pdf_closed",
            });
        }
        Ok(v)
    }
}

/// Reference joint PDF from the single-integral representation, evaluated
/// by adaptive Gauss–Kronrod quadrature in the mixing variable `x`
/// (the amplitude of the shared component `σ√ρ X_0 + Z`).
pub fn joint_pdf_quadrature(params: &BivariateShadowedParams, r1: f64, r2: f64) -> Result<f64> {
    check_envelope(r1, "r1")?;
    check_envelope(r2, "r2")?;
    let c = params.constants()?;
    if r1 == 0.0 || r2 == 0.0 {
        return Ok(0.0);
    }
    let a1 = 2.0 * r1 / c.scatter;
    let a2 = 2.0 * r2 / c.scatter;
    let m = c.m;
    let outer = c.ln_prefactor + r1.ln() + r2.ln() - (r1 * r1 + r2 * r2) / c.scatter;
    let ln_integrand = |x: f64| -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let hyp = if c.los == 0.0 { 0.0 } else { ln_hyp1f1(m, c.los * x * x) };
        outer + x.ln() - c.decay * x * x + ln_i0(a1 * x) + ln_i0(a2 * x) + hyp
    };
    // For large x the integrand behaves like exp(-(c-b)x² + (a1+a2)x).
    let curvature = c.decay - c.los;
    let width = 1.0 / (2.0 * curvature).sqrt();
    let peak_guess = ((a1 + a2) / (2.0 * curvature)).max(width);
    let peak_ln = ln_integrand(peak_guess);
    let mut hi = peak_guess + 12.0 * width;
    while ln_integrand(hi) > peak_ln - 60.0 {
        hi += 4.0 * width;
    }
    let mut f = |x: f64| ln_integrand(x).exp();
    let tol = Tolerance::absolute(1e-12).with_rel(1e-12);
    let r = integrate_pieces(&mut f, &[0.0, peak_guess, hi], tol)?;
    Ok(r.value.max(0.0))
}

/// Draws envelope pairs `(|H_1|, |H_2|)`.
#[derive(Debug, Clone)]
pub struct PairSampler {
    scatter_own: f64,
    scatter_shared: f64,
    los_power: Option<Gamma<f64>>,
}

impl PairSampler {
    pub fn new(params: &BivariateShadowedParams) -> Self {
        let sigma = params.sigma;
        // X_k are unit-power complex Gaussians: each real dimension has variance 1/2.
        let per_dim = std::f64::consts::FRAC_1_SQRT_2;
        let los_power = if params.k_factor > 0.0 {
            Some(Gamma::new(params.m, params.omega_n() / params.m).expect("validated shape and scale"))
        } else {
            None
        };
        Self {
            scatter_own: sigma * (1.0 - params.rho).sqrt() * per_dim,
            scatter_shared: sigma * params.rho.sqrt() * per_dim,
            los_power,
        }
    }

    /// Draw `|Z|²` from its Gamma law.
    pub fn draw_los_power<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.los_power.as_ref().map_or(0.0, |g| g.sample(rng))
    }

    /// Assemble a pair from six standard normals `[X0re, X0im, X1re, X1im,
    /// X2re, X2im]` and the line-of-sight amplitude `|Z|`.
    pub fn from_variates(&self, normals: &[f64; 6], los_amplitude: f64) -> (f64, f64) {
        let common_re = self.scatter_shared * normals[0] + los_amplitude;
        let common_im = self.scatter_shared * normals[1];
        let h1 = (common_re + self.scatter_own * normals[2]).hypot(common_im + self.scatter_own * normals[3]);
        let h2 = (common_re + self.scatter_own * normals[4]).hypot(common_im + self.scatter_own * normals[5]);
        (h1, h2)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let mut normals = [0.0; 6];
        for v in normals.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let z = self.draw_los_power(rng).sqrt();
        self.from_variates(&normals, z)
    }
}

/// Draw one envelope pair. Endpoint correlations `ρ ∈ {0, 1}` are allowed.
pub fn sample_pair<R: Rng + ?Sized>(params: &BivariateShadowedParams, rng: &mut R) -> (f64, f64) {
    PairSampler::new(params).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn baseline_params() -> BivariateShadowedParams {
        BivariateShadowedParams::new(1.0, 0.5, 10.0, 10.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(BivariateShadowedParams::new(0.0, 0.5, 1.0, 1.0).is_err());
        assert!(BivariateShadowedParams::new(1.0, 1.2, 1.0, 1.0).is_err());
        assert!(BivariateShadowedParams::new(1.0, 0.5, 0.4, 1.0).is_err());
        assert!(BivariateShadowedParams::new(1.0, 0.5, 1.0, -1.0).is_err());
        // endpoints are constructible but not evaluable
        let p = BivariateShadowedParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            alpha_coeff(&p, 0, 0, 0),
            Err(Error::DegenerateCorrelation { .. })
        ));
        let p0 = BivariateShadowedParams::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            joint_pdf_quadrature(&p0, 1.0, 1.0),
            Err(Error::DegenerateCorrelation { .. })
        ));
        let k = BivariateShadowedParams::with_k_db(1.0, 0.5, 10.0, 10.0).unwrap();
        assert!((k.k_factor() - 10.0).abs() < 1e-12);
        assert!((k.omega_n() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_leading_coefficient() {
        // 8 (1/3)^1 / (1 * 0.5 * 0.25) * 0! / (2 * 6^1) = 16/9
        let p = BivariateShadowedParams::new(1.0, 0.5, 1.0, 1.0).unwrap();
        let a = alpha_coeff(&p, 0, 0, 0).unwrap();
        assert!((a - 16.0 / 9.0).abs() < 1e-14, "{a}");
    }

    #[test]
    fn alpha_is_symmetric_in_n() {
        let p = baseline_params();
        let a = alpha_coeff(&p, 1, 1, 0).unwrap();
        let b = alpha_coeff(&p, 1, 1, 1).unwrap();
        assert!(a > 0.0);
        assert!(((a - b) / a).abs() < 1e-14);
        let t = AlphaTable::new(&p, 12).unwrap();
        for k in 0..=12 {
            for i in 0..=k {
                for n in 0..=i {
                    let (a, b) = (t.ln_alpha(k, i, n), t.ln_alpha(k, i, i - n));
                    assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn alpha_rejects_bad_indices() {
        let p = baseline_params();
        assert!(alpha_coeff(&p, 1, 2, 0).is_err());
        assert!(alpha_coeff(&p, 2, 1, 2).is_err());
    }

    #[test]
    fn alpha_hand_evaluated_second_order() {
        // k=1, i=0, n=0 picks up the 1F1 term: (m)_1 b / (1!)^2 * 1!/(2c^2)
        let p = BivariateShadowedParams::new(1.0, 0.5, 2.0, 3.0).unwrap();
        let (s2, rho, m, k): (f64, f64, f64, f64) = (1.0, 0.5, 2.0, 3.0);
        let b = k / (s2 * rho * (rho * m + k));
        let c = (1.0 + rho) / (s2 * rho * (1.0 - rho));
        let pre = 8.0 * (m * rho / (m * rho + k)).powf(m) / (rho * (1.0f64 - rho).powi(2));
        let want = pre * m * b / (2.0 * c * c);
        let got = alpha_coeff(&p, 1, 0, 0).unwrap();
        assert!(((got - want) / want).abs() < 1e-13);
    }

    #[test]
    fn k_zero_drops_los_terms() {
        let p = BivariateShadowedParams::new(1.0, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(alpha_coeff(&p, 2, 0, 0).unwrap(), 0.0);
        assert!(alpha_coeff(&p, 2, 2, 1).unwrap() > 0.0);
    }

    #[test]
    fn pdf_vanishes_on_axes() {
        let p = baseline_params();
        let s = BivariateSeries::new(&p, TruncationOrders::default()).unwrap();
        assert_eq!(s.joint_pdf(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(s.joint_pdf(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(joint_pdf_quadrature(&p, 0.0, 2.0).unwrap(), 0.0);
        assert!(s.joint_pdf(-1.0, 1.0).is_err());
    }

    #[test]
    fn pdf_matches_quadrature_small_config() {
        let p = BivariateShadowedParams::new(1.0, 0.5, 1.0, 1.0).unwrap();
        let closed = joint_pdf_closed(&p, TruncationOrders::new(60, 10), 0.8, 0.8).unwrap();
        let quad = joint_pdf_quadrature(&p, 0.8, 0.8).unwrap();
        assert!((closed - quad).abs() < 1e-6, "{closed} vs {quad}");
        // independent double-precision evaluation of the integral form
        assert!((quad - 0.448_633_013_877_997_7).abs() < 1e-9);
    }

    #[test]
    fn evaluator_matches_literal_triple_sum() {
        let p = baseline_params();
        let series = BivariateSeries::new(&p, TruncationOrders::new(40, 10)).unwrap();
        let fast = JointPdfEvaluator::truncated(&p, 40).unwrap();
        for &(r1, r2) in &[(0.3, 0.4), (1.5, 2.0), (3.0, 3.0), (2.5, 0.7)] {
            let a = series.joint_pdf(r1, r2).unwrap();
            let b = fast.pdf(r1, r2).unwrap();
            assert!(
                (a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-300,
                "({r1},{r2}): {a} vs {b}"
            );
        }
    }

    #[test]
    fn peak_window_matches_exhaustive_sum() {
        for &(m, k, rho) in &[(10.0, 10.0, 0.5), (0.5, 10.0, 0.8), (1.0, 1.0, 0.2), (5.0, 0.1, 0.9)] {
            let p = BivariateShadowedParams::new(1.0, rho, m, k).unwrap();
            let ev = JointPdfEvaluator::truncated(&p, 200).unwrap();
            for &(r1, r2) in &[(0.01f64, 0.02f64), (0.5, 3.0), (2.0, 2.2), (6.0, 1.0), (7.0, 7.5)] {
                let ls = ev.consts.ln_scatter;
                let (lu1, lu2) = (2.0 * (r1.ln() - ls), 2.0 * (r2.ln() - ls));
                let mut acc = LogAccumulator::new();
                for n1 in 0..=ev.limit {
                    for n2 in 0..=ev.limit - n1 {
                        acc.add(ev.ln_term(lu1, lu2, n1, n2));
                    }
                }
                let ln_front = ev.consts.ln_prefactor + r1.ln() + r2.ln() - (r1 * r1 + r2 * r2) / ev.consts.scatter;
                let want = (ln_front + acc.ln()).exp();
                let got = ev.pdf(r1, r2).unwrap();
                assert!(
                    (got - want).abs() <= 1e-13 * want + 1e-300,
                    "m={m} K={k} rho={rho} ({r1},{r2}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn adaptive_evaluator_matches_quadrature() {
        for &(m, k, rho) in &[(10.0, 10.0, 0.5), (0.5, 10.0, 0.8), (1.0, 1.0, 0.2)] {
            let p = BivariateShadowedParams::new(1.0, rho, m, k).unwrap();
            let ev = JointPdfEvaluator::adaptive(&p).unwrap();
            for &(r1, r2) in &[(0.5, 0.5), (2.0, 3.5), (4.0, 4.0), (1.0, 5.0)] {
                let a = ev.pdf(r1, r2).unwrap();
                let q = joint_pdf_quadrature(&p, r1, r2).unwrap();
                assert!(
                    (a - q).abs() < 1e-10 + 1e-9 * q,
                    "m={m} K={k} rho={rho} ({r1},{r2}): {a} vs {q}"
                );
            }
        }
    }

    #[test]
    fn g_term_examples() {
        let p = BivariateShadowedParams::new(1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(g_term(&p, 0, 0, 0, 0.0).unwrap(), 0.0);
        assert!((g_term(&p, 0, 0, 0, 1.0).unwrap() - 0.125).abs() < 1e-15);
        assert!((g_term(&p, 1, 0, 0, 1.0).unwrap() + 0.125).abs() < 1e-15);
        // j - q - 1 = 1: [σ²(1-ρ)] moves to the denominator
        let v = g_term(&p, 2, 1, 0, 0.5).unwrap();
        let want = 0.5f64.powi(8) / (2.0 * 0.5 * 4.0 * 4.0);
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn cdf_at_zero_and_symmetry() {
        let p = baseline_params();
        let s = BivariateSeries::new(&p, TruncationOrders::default()).unwrap();
        assert_eq!(s.marginal_cdf(Uav::Uav1, 0.0).unwrap().value, 0.0);
        assert_eq!(s.marginal_cdf_gamma_form(Uav::Uav2, 0.0).unwrap(), 0.0);
        for g in [0.1, 0.3, 0.7] {
            let a = s.marginal_cdf(Uav::Uav1, g).unwrap().raw;
            let b = s.marginal_cdf(Uav::Uav2, g).unwrap().raw;
            assert!(((a - b) / a).abs() < 1e-13);
        }
    }

    #[test]
    fn cdf_forms_agree_inside_validity() {
        let p = baseline_params();
        let s = BivariateSeries::new(&p, TruncationOrders::default()).unwrap();
        let e = s.marginal_cdf(Uav::Uav1, 0.3).unwrap();
        assert!(e.within_validity());
        let g = s.marginal_cdf_gamma_form(Uav::Uav1, 0.3).unwrap();
        assert!((e.value - g).abs() < 1e-6);
    }

    #[test]
    fn validity_flag_trips_for_large_gamma() {
        let p = baseline_params();
        let s = BivariateSeries::new(&p, TruncationOrders::default()).unwrap();
        let e = s.marginal_cdf(Uav::Uav1, 2.0).unwrap();
        assert!(!e.within_validity());
        assert!(e.value <= 1.0 && e.value >= 0.0);
    }

    #[test]
    fn gamma_form_tends_to_one_with_enough_terms() {
        let p = BivariateShadowedParams::new(1.0, 0.5, 2.0, 1.0).unwrap();
        let s = BivariateSeries::new(&p, TruncationOrders::new(150, 10)).unwrap();
        let big = 10.0 * p.sigma() * (1.0 + p.k_factor()).sqrt();
        let v = s.marginal_cdf_gamma_form(Uav::Uav1, big).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        assert!((s.captured_mass() - v).abs() < 1e-9);
    }

    #[test]
    fn sampler_fully_correlated_pair_is_identical() {
        let p = BivariateShadowedParams::new(1.0, 1.0, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (a, b) = sample_pair(&p, &mut rng);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sampler_second_moment() {
        let p = baseline_params();
        let sampler = PairSampler::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let (a, b) = sampler.sample(&mut rng);
            acc[0] += a * a;
            acc[1] += b * b;
        }
        for v in acc {
            let mean = v / n as f64;
            assert!((mean - 11.0).abs() < 0.15, "{mean}");
        }
    }
}
