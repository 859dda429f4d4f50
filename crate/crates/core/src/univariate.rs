//! Univariate Rician shadowed power model of a single OMA link.
//!
//! The channel is `h = σ_u X + Z` with unit-power complex Gaussian `X` and
//! Nakagami-m line-of-sight amplitude `Z`. The power split is fixed so that
//! `E{|h|²} = 1`: `σ_u² = 1/(1+K)` and `Ω = E{|Z|²} = K/(1+K)`. The received
//! SNR is `X_i = P |h|²`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::bivariate::SeriesEvaluation;
use crate::error::{require, Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::special::{ln_factorial_table, ln_hyp1f1, ln_pochhammer, DoubleDouble};

/// `(K, m)` of a unit-mean Rician shadowed power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateShadowedParams {
    k_factor: f64,
    m_shape: f64,
}

impl UnivariateShadowedParams {
    pub fn new(k_factor: f64, m_shape: f64) -> Result<Self> {
        require(k_factor >= 0.0 && k_factor.is_finite(), "k_factor", k_factor, "K >= 0")?;
        require(m_shape >= 0.5 && m_shape.is_finite(), "m_shape", m_shape, "m >= 0.5")?;
        Ok(Self { k_factor, m_shape })
    }

    pub fn with_k_db(k_db: f64, m_shape: f64) -> Result<Self> {
        Self::new(crate::db_to_linear(k_db), m_shape)
    }

    pub fn k_factor(&self) -> f64 {
        self.k_factor
    }

    pub fn m_shape(&self) -> f64 {
        self.m_shape
    }

    /// Scattered power `σ_u² = 1/(1+K)`.
    pub fn scatter_power(&self) -> f64 {
        1.0 / (1.0 + self.k_factor)
    }

    /// Line-of-sight power `Ω = K/(1+K)`.
    pub fn los_power(&self) -> f64 {
        self.k_factor / (1.0 + self.k_factor)
    }

    /// Density of `|h|²` at `x`, from its `₁F₁` representation.
    pub fn power_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let (k, m) = (self.k_factor, self.m_shape);
        let arg = k * (1.0 + k) / (m + k) * x;
        let hyp = if k == 0.0 { 0.0 } else { ln_hyp1f1(m, arg) };
        (m * (m / (m + k)).ln() + (1.0 + k).ln() - (1.0 + k) * x + hyp).exp()
    }

    /// `Pr(|h|² < x)` by adaptive quadrature of [`Self::power_pdf`].
    pub fn power_cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let tol = Tolerance::absolute(1e-14).with_rel(1e-12);
        let r = integrate(|t| self.power_pdf(t), 0.0, x, tol)?;
        Ok(r.value.clamp(0.0, 1.0))
    }
}

fn ln_alpha_bar_abs(params: &UnivariateShadowedParams, ln_fact: &[f64], ln_scaled: f64, k: usize, i: usize) -> f64 {
    let (kf, m) = (params.k_factor, params.m_shape);
    let los = if i == 0 {
        0.0
    } else if kf == 0.0 {
        return f64::NEG_INFINITY;
    } else {
        i as f64 * (kf / (kf + m)).ln()
    };
    m * (m / (kf + m)).ln() + ln_pochhammer(m, i as u32) - 2.0 * ln_fact[i] + los + (k + 1) as f64 * ln_scaled
        - ln_fact[k - i]
        - ((k + 1) as f64).ln()
}

/// `Σ_i (-1)^{k-i} k! (m)_i qⁱ / (i!² (k-i)!)`, i.e. `(-1)^k ₂F₁(-k, m; 1; q)`.
///
/// Terms are built from exact ratios and summed in double-double, since they
/// exceed the result by many orders of magnitude once `k` grows.
fn alternating_inner_sum(m: f64, q: DoubleDouble, k: usize) -> f64 {
    let mut term = DoubleDouble::from_f64(1.0);
    let mut acc = DoubleDouble::default();
    for i in 0..=k {
        acc = acc.add(if (k - i) % 2 == 1 { term.neg() } else { term });
        if i < k {
            let num = DoubleDouble::from_f64(m)
                .add(DoubleDouble::from_f64(i as f64))
                .mul(DoubleDouble::from_f64((k - i) as f64))
                .mul(q);
            let den = ((i + 1) * (i + 1)) as f64;
            term = num.mul(term).div(DoubleDouble::from_f64(den));
        }
    }
    acc.to_f64()
}

/// Signed coefficient `ᾱ(k, i, P, γ)` of the OMA CDF series.
pub fn alpha_bar_coeff(params: &UnivariateShadowedParams, p_g: f64, gamma: f64, k: usize, i: usize) -> Result<f64> {
    require(p_g > 0.0, "p_g", p_g, "P > 0")?;
    require(gamma >= 0.0, "gamma", gamma, "gamma >= 0")?;
    require(i <= k, "i", i as f64, "0 <= i <= k")?;
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let ln_fact = ln_factorial_table(k + 1);
    let ln_scaled = ((1.0 + params.k_factor) * gamma / p_g).ln();
    let v = ln_alpha_bar_abs(params, &ln_fact, ln_scaled, k, i).exp();
    if v.is_infinite() {
        return Err(Error::Overflow {
            context: "alpha_bar_coeff",
        });
    }
    Ok(if (k - i) % 2 == 1 { -v } else { v })
}

/// The ᾱ series with its factorial table built once.
#[derive(Debug, Clone)]
pub struct UnivariateSeries {
    params: UnivariateShadowedParams,
    trunc_k: usize,
    ln_fact: Vec<f64>,
}

impl UnivariateSeries {
    pub fn new(params: &UnivariateShadowedParams, trunc_k: usize) -> Self {
        Self {
            params: *params,
            trunc_k,
            ln_fact: ln_factorial_table(trunc_k + 2),
        }
    }

    pub fn params(&self) -> &UnivariateShadowedParams {
        &self.params
    }

    pub fn trunc_k(&self) -> usize {
        self.trunc_k
    }

    /// `Σ_i ᾱ(k, i, P, γ)` for each `k`, each scaled by `exp(ln_weight(k))`.
    pub(crate) fn k_partials<W>(&self, p_g: f64, gamma: f64, ln_weight: W) -> Result<Vec<f64>>
    where
        W: Fn(usize) -> f64,
    {
        require(p_g > 0.0, "p_g", p_g, "P > 0")?;
        require(gamma >= 0.0, "gamma", gamma, "gamma >= 0")?;
        if gamma == 0.0 {
            return Ok(vec![0.0; self.trunc_k + 1]);
        }
        let (kf, m) = (self.params.k_factor, self.params.m_shape);
        let ln_scaled = ((1.0 + kf) * gamma / p_g).ln();
        let ln_front = m * (m / (kf + m)).ln();
        // q = K / (K + m) in extended precision: the inner sum is sensitive
        // to it in proportion to its cancellation.
        let km = DoubleDouble::from_f64(kf).add(DoubleDouble::from_f64(m));
        let q = DoubleDouble::from_f64(kf).div(km);
        let mut out = Vec::with_capacity(self.trunc_k + 1);
        for k in 0..=self.trunc_k {
            let inner = alternating_inner_sum(m, q, k);
            let ln_outer =
                ln_front + (k + 1) as f64 * ln_scaled - self.ln_fact[k] - ((k + 1) as f64).ln() + ln_weight(k);
            let t = if inner == 0.0 { 0.0 } else { inner * ln_outer.exp() };
            if !t.is_finite() {
                return Err(Error::Overflow {
                    context: "univariate_cdf",
                });
            }
            out.push(t);
        }
        Ok(out)
    }

    /// `Pr(P|h|² < γ)` from the truncated double series.
    pub fn cdf(&self, p_g: f64, gamma: f64) -> Result<SeriesEvaluation> {
        let partials = self.k_partials(p_g, gamma, |_| 0.0)?;
        Ok(SeriesEvaluation::from_partials(&partials, 0.0, 1.0))
    }
}

pub fn univariate_cdf(
    params: &UnivariateShadowedParams,
    trunc_k: usize,
    p_g: f64,
    gamma: f64,
) -> Result<SeriesEvaluation> {
    UnivariateSeries::new(params, trunc_k).cdf(p_g, gamma)
}

/// Draws `|h|²` for one link.
#[derive(Debug, Clone)]
pub struct PowerSampler {
    scatter_per_dim: f64,
    los_power: Option<Gamma<f64>>,
}

impl PowerSampler {
    pub fn new(params: &UnivariateShadowedParams) -> Self {
        let los_power = if params.k_factor > 0.0 {
            let shape = params.m_shape;
            Some(Gamma::new(shape, params.los_power() / shape).expect("validated shape and scale"))
        } else {
            None
        };
        Self {
            scatter_per_dim: (0.5 * params.scatter_power()).sqrt(),
            los_power,
        }
    }

    pub fn draw_los_power<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.los_power.as_ref().map_or(0.0, |g| g.sample(rng))
    }

    /// `|h|²` from two standard normals and the LOS amplitude.
    pub fn from_variates(&self, re: f64, im: f64, los_amplitude: f64) -> f64 {
        let a = self.scatter_per_dim * re + los_amplitude;
        let b = self.scatter_per_dim * im;
        a * a + b * b
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let z = self.draw_los_power(rng).sqrt();
        self.from_variates(re, im, z)
    }
}

/// One draw of the received SNR `P |h|²`.
pub fn sample_univariate_power<R: Rng + ?Sized>(params: &UnivariateShadowedParams, p_g: f64, rng: &mut R) -> f64 {
    p_g * PowerSampler::new(params).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_bar_examples() {
        let p = UnivariateShadowedParams::new(1.0, 1.0).unwrap();
        assert_eq!(alpha_bar_coeff(&p, 1.0, 0.0, 0, 0).unwrap(), 0.0);
        assert!((alpha_bar_coeff(&p, 1.0, 1.0, 0, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(alpha_bar_coeff(&p, 1.0, 1.0, 1, 0).unwrap() < 0.0);
        assert!(alpha_bar_coeff(&p, 1.0, 1.0, 1, 1).unwrap() > 0.0);
        assert!(alpha_bar_coeff(&p, 0.0, 1.0, 0, 0).is_err());
    }

    #[test]
    fn cdf_series_matches_density_integral() {
        let p = UnivariateShadowedParams::new(10.0, 10.0).unwrap();
        let e = univariate_cdf(&p, 30, 10.0, 0.1).unwrap();
        assert!(e.within_validity());
        assert!((e.value - 1.320_849_5e-4).abs() < 1e-10, "{}", e.value);
        let q = p.power_cdf(0.01).unwrap();
        assert!((e.value - q).abs() < 1e-12);
        assert_eq!(univariate_cdf(&p, 30, 10.0, 0.0).unwrap().value, 0.0);
        let lo = univariate_cdf(&p, 30, 10.0, 0.05).unwrap().value;
        assert!(lo <= e.value);
    }

    #[test]
    fn rayleigh_limit() {
        let p = UnivariateShadowedParams::new(0.0, 3.0).unwrap();
        for x in [0.1f64, 0.5, 1.0] {
            let want = 1.0 - (-x).exp();
            assert!((p.power_cdf(x).unwrap() - want).abs() < 1e-12);
            let e = univariate_cdf(&p, 40, 1.0, x).unwrap();
            assert!((e.value - want).abs() < 1e-12);
        }
    }

    #[test]
    fn density_is_normalised() {
        for &(k, m) in &[(10.0, 10.0), (1.0, 0.5), (3.0, 2.0)] {
            let p = UnivariateShadowedParams::new(k, m).unwrap();
            assert!((p.power_cdf(60.0).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sampler_unit_mean() {
        let p = UnivariateShadowedParams::new(10.0, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| sample_univariate_power(&p, 10.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 10.0).abs() < 0.1, "{mean}");
    }
}
