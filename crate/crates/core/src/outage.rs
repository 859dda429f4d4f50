//! Outage probabilities of the two downlink UAVs.
//!
//! NOMA: UAV-1 decodes with imperfect SIC (residual strength `β`), UAV-2
//! treats UAV-1's signal as noise. Both events reduce to `R_i < γ_i* d_i`
//! and are averaged over the BPP distance through `Ḡ`. OMA uses the
//! univariate model and the event `P|h|² < γ^OMA d²`.

use crate::bivariate::{BivariateSeries, BivariateShadowedParams, SeriesEvaluation, TruncationOrders};
use crate::error::{require, Error, Result};
use crate::geometry::{distance_pdf, ln_g_bar_table, GeometryParams};
use crate::quadrature::{integrate, Tolerance};
use crate::univariate::{UnivariateSeries, UnivariateShadowedParams};
use crate::Uav;

/// Power split, SIC residual, rate and normalized transmit SNRs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    a_gs1: f64,
    beta: f64,
    r_oma: f64,
    p_g: [f64; 2],
}

impl LinkConfig {
    /// `p_g1`, `p_g2` are linear.
    pub fn new(a_gs1: f64, beta: f64, r_oma: f64, p_g1: f64, p_g2: f64) -> Result<Self> {
        require(a_gs1 > 0.0 && a_gs1 < 1.0, "a_gs1", a_gs1, "0 < a_gs1 < 1")?;
        require((0.0..=1.0).contains(&beta), "beta", beta, "0 <= beta <= 1")?;
        require(r_oma > 0.0 && r_oma.is_finite(), "r_oma", r_oma, "r_oma > 0")?;
        require(p_g1 > 0.0 && p_g1.is_finite(), "p_g1", p_g1, "P > 0")?;
        require(p_g2 > 0.0 && p_g2.is_finite(), "p_g2", p_g2, "P > 0")?;
        Ok(Self {
            a_gs1,
            beta,
            r_oma,
            p_g: [p_g1, p_g2],
        })
    }

    pub fn from_db(a_gs1: f64, beta: f64, r_oma: f64, p_g1_db: f64, p_g2_db: f64) -> Result<Self> {
        Self::new(
            a_gs1,
            beta,
            r_oma,
            crate::db_to_linear(p_g1_db),
            crate::db_to_linear(p_g2_db),
        )
    }

    /// Same config with `P_{g,1} = P_{g,2} = P̄`.
    pub fn with_p_bar_db(self, p_bar_db: f64) -> Result<Self> {
        let p = crate::db_to_linear(p_bar_db);
        Self::new(self.a_gs1, self.beta, self.r_oma, p, p)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.a_gs1, beta, self.r_oma, self.p_g[0], self.p_g[1])
    }

    pub fn with_a_gs1(self, a_gs1: f64) -> Result<Self> {
        Self::new(a_gs1, self.beta, self.r_oma, self.p_g[0], self.p_g[1])
    }

    pub fn a_gs1(&self) -> f64 {
        self.a_gs1
    }

    pub fn a_gs2(&self) -> f64 {
        1.0 - self.a_gs1
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn r_oma(&self) -> f64 {
        self.r_oma
    }

    pub fn r_noma(&self) -> f64 {
        0.5 * self.r_oma
    }

    pub fn p_g(&self, uav: Uav) -> f64 {
        self.p_g[uav.index()]
    }
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            a_gs1: 0.5,
            beta: 0.01,
            r_oma: 0.1,
            p_g: [10.0, 10.0],
        }
    }
}

/// Where an outage value came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Bivariate(TruncationOrders),
    Univariate { trunc_k: usize },
    MonteCarlo { samples: u64, ci_half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageResult {
    pub uav: Uav,
    /// In `[0, 1]`.
    pub probability: f64,
    pub provenance: Provenance,
    /// Unclamped series value (equals `probability` for simulation).
    pub raw: f64,
    /// False when the alternating series was evaluated outside the region
    /// where its truncation is reliable.
    pub within_validity: bool,
    /// Decoding is infeasible for every channel state.
    pub certain_outage: bool,
}

impl OutageResult {
    pub fn method(&self) -> OutageMethod {
        match self.provenance {
            Provenance::MonteCarlo { .. } => OutageMethod::MonteCarlo,
            _ => OutageMethod::Analytic,
        }
    }

    pub fn ci_half_width(&self) -> Option<f64> {
        match self.provenance {
            Provenance::MonteCarlo { ci_half_width, .. } => Some(ci_half_width),
            _ => None,
        }
    }

    fn certain(uav: Uav, provenance: Provenance) -> Self {
        Self {
            uav,
            probability: 1.0,
            provenance,
            raw: 1.0,
            within_validity: true,
            certain_outage: true,
        }
    }
}

/// `γ^NOMA = 2^{R_OMA/2} - 1`.
pub fn noma_rate_threshold(cfg: &LinkConfig) -> f64 {
    cfg.r_noma().exp2() - 1.0
}

/// `γ^OMA = 2^{R_OMA} - 1`.
pub fn oma_threshold(cfg: &LinkConfig) -> f64 {
    cfg.r_oma.exp2() - 1.0
}

/// Normalized envelope threshold `γ_i*` so that the NOMA outage event is
/// `R_i < γ_i* d_i`.
pub fn noma_threshold_star(cfg: &LinkConfig, uav: Uav) -> Result<f64> {
    let g = noma_rate_threshold(cfg);
    let (a1, a2) = (cfg.a_gs1, cfg.a_gs2());
    let denominator = match uav {
        Uav::Uav1 => a1 - a2 * cfg.beta * g,
        Uav::Uav2 => a2 - a1 * g,
    };
    if denominator <= 0.0 {
        return Err(Error::CertainOutage { uav, denominator });
    }
    Ok((g / (cfg.p_g(uav) * denominator)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomaThresholds {
    pub gamma_noma: f64,
    pub gamma1_star: f64,
    pub gamma2_star: f64,
}

pub fn noma_thresholds(cfg: &LinkConfig) -> Result<NomaThresholds> {
    Ok(NomaThresholds {
        gamma_noma: noma_rate_threshold(cfg),
        gamma1_star: noma_threshold_star(cfg, Uav::Uav1)?,
        gamma2_star: noma_threshold_star(cfg, Uav::Uav2)?,
    })
}

/// NOMA outage from a prebuilt coefficient series.
pub fn noma_outage_with_series(
    series: &BivariateSeries,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    uav: Uav,
) -> Result<OutageResult> {
    let trunc = series.truncation();
    let provenance = Provenance::Bivariate(trunc);
    let gamma_star = match noma_threshold_star(cfg, uav) {
        Ok(g) => g,
        Err(Error::CertainOutage { .. }) => return Ok(OutageResult::certain(uav, provenance)),
        Err(e) => return Err(e),
    };
    let ln_gbar = ln_g_bar_table(geo, uav, trunc.ktr1 + trunc.ktr2 + 1)?;
    let partials = series.j_partials(uav, gamma_star, |l, j| ln_gbar[l + j])?;
    let eval = SeriesEvaluation::from_partials(&partials, 0.0, 1.0);
    let worst = series.marginal_cdf(uav, gamma_star * geo.w_max(uav))?;
    Ok(OutageResult {
        uav,
        probability: eval.value,
        provenance,
        raw: eval.raw,
        within_validity: worst.within_validity(),
        certain_outage: false,
    })
}

pub fn noma_outage_analytic(
    params: &BivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    trunc: TruncationOrders,
    uav: Uav,
) -> Result<OutageResult> {
    let series = BivariateSeries::new(params, trunc)?;
    noma_outage_with_series(&series, geo, cfg, uav)
}

/// `∫ F_{R_i}(γ_i* w) f_d(w) dw` with the unclamped series CDF at the same
/// truncation; agrees with [`noma_outage_with_series`] term by term.
pub fn noma_outage_distance_quadrature(
    series: &BivariateSeries,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    uav: Uav,
) -> Result<f64> {
    let gamma_star = noma_threshold_star(cfg, uav)?;
    let mut failure = None;
    let f = |w: f64| match series.marginal_cdf(uav, gamma_star * w) {
        Ok(e) => e.raw * distance_pdf(geo, uav, w),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let r = integrate(
        f,
        geo.w_min(uav),
        geo.w_max(uav),
        Tolerance::absolute(1e-13).with_rel(1e-11),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// NOMA outage with the exact marginal law of `R_i` (no series truncation),
/// averaged over distance by quadrature.
///
/// Each envelope on its own is Rician shadowed with mean power `σ²(1+K)`,
/// independent of `ρ`, so this is a one-dimensional reference.
pub fn noma_outage_reference(
    params: &BivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    uav: Uav,
) -> Result<f64> {
    let gamma_star = match noma_threshold_star(cfg, uav) {
        Ok(g) => g,
        Err(Error::CertainOutage { .. }) => return Ok(1.0),
        Err(e) => return Err(e),
    };
    let unit = UnivariateShadowedParams::new(params.k_factor(), params.m())?;
    let mean = params.mean_power();
    distance_average(geo, uav, |w| {
        let r = gamma_star * w;
        unit.power_cdf(r * r / mean)
    })
}

/// OMA outage from a prebuilt ᾱ series: `Σ_k Σ_i ᾱ(k,i,P,γ^OMA) Ḡ(λ_i, k)`.
pub fn oma_outage_with_series(
    series: &UnivariateSeries,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    uav: Uav,
) -> Result<OutageResult> {
    let gamma = oma_threshold(cfg);
    let p = cfg.p_g(uav);
    let ln_gbar = ln_g_bar_table(geo, uav, series.trunc_k() + 1)?;
    let partials = series.k_partials(p, gamma, |k| ln_gbar[k])?;
    let eval = SeriesEvaluation::from_partials(&partials, 0.0, 1.0);
    let w = geo.w_max(uav);
    let worst = series.cdf(p, gamma * w * w)?;
    Ok(OutageResult {
        uav,
        probability: eval.value,
        provenance: Provenance::Univariate {
            trunc_k: series.trunc_k(),
        },
        raw: eval.raw,
        within_validity: worst.within_validity(),
        certain_outage: false,
    })
}

pub fn oma_outage_analytic(
    uparams: &UnivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    trunc_k: usize,
    uav: Uav,
) -> Result<OutageResult> {
    oma_outage_with_series(&UnivariateSeries::new(uparams, trunc_k), geo, cfg, uav)
}

/// `∫ F_X(γ^OMA w²) f_d(w) dw` with the unclamped ᾱ series CDF.
pub fn oma_outage_distance_quadrature(
    series: &UnivariateSeries,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    uav: Uav,
) -> Result<f64> {
    let gamma = oma_threshold(cfg);
    let p = cfg.p_g(uav);
    distance_average(geo, uav, |w| series.cdf(p, gamma * w * w).map(|e| e.raw))
}

/// OMA outage with the exact power CDF, averaged over distance.
pub fn oma_outage_reference(
    uparams: &UnivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    uav: Uav,
) -> Result<f64> {
    let gamma = oma_threshold(cfg);
    let p = cfg.p_g(uav);
    distance_average(geo, uav, |w| uparams.power_cdf(gamma * w * w / p))
}

fn distance_average<F>(geo: &GeometryParams, uav: Uav, mut conditional: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut failure = None;
    let f = |w: f64| match conditional(w) {
        Ok(v) => v * distance_pdf(geo, uav, w),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let r = integrate(
        f,
        geo.w_min(uav),
        geo.w_max(uav),
        Tolerance::absolute(1e-13).with_rel(1e-11),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}
