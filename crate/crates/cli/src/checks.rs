//! Oracle and invariant checks shared by `validate` and the acceptance suite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use uavnoma_core::bivariate::joint_pdf_quadrature;
use uavnoma_core::geometry::{distance_cdf, sample_distance};
use uavnoma_core::montecarlo::{noma_sinr, NomaDrawer};
use uavnoma_core::outage::{
    noma_outage_distance_quadrature, noma_outage_with_series, noma_rate_threshold, noma_threshold_star,
    oma_outage_distance_quadrature, oma_outage_with_series,
};
use uavnoma_core::quadrature::{integrate_pieces, Tolerance};
use uavnoma_core::univariate::UnivariateSeries;
use uavnoma_core::{
    BivariateSeries, BivariateShadowedParams, GeometryParams, JointPdfEvaluator, LinkConfig, Result, TruncationOrders,
    Uav, UnivariateShadowedParams,
};

/// Analytic outage values below this are not compared with simulation.
pub const AGREEMENT_FLOOR: f64 = 1e-3;
/// Relative analytic/simulation tolerance.
pub const AGREEMENT_REL_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn from_result<E: std::fmt::Display>(name: &str, r: std::result::Result<(bool, String), E>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Analytic and simulated outage agree, or the point is below the floor.
pub fn agrees(analytic: f64, mc: f64, ci_half_width: f64) -> bool {
    if analytic.max(mc) <= AGREEMENT_FLOOR {
        return true;
    }
    (analytic - mc).abs() <= (AGREEMENT_REL_TOL * analytic).max(ci_half_width)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfGridPoint {
    pub r1: f64,
    pub r2: f64,
    pub closed: f64,
    pub quadrature: f64,
}

impl PdfGridPoint {
    pub fn abs_diff(&self) -> f64 {
        (self.closed - self.quadrature).abs()
    }
}

/// Closed-form (literal truncated triple sum) and integral-form joint PDF on
/// an `n × n` grid over `[0, r_max]²`, row-major in `r1`.
pub fn pdf_grid(params: &BivariateShadowedParams, ktr1: usize, n: usize, r_max: f64) -> Result<Vec<PdfGridPoint>> {
    let series = BivariateSeries::new(params, TruncationOrders::new(ktr1, 0))?;
    let axis: Vec<f64> = (0..n).map(|i| r_max * i as f64 / (n.max(2) - 1) as f64).collect();
    let cells: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
    cells
        .par_iter()
        .map(|&(r1, r2)| {
            Ok(PdfGridPoint {
                r1,
                r2,
                closed: series.joint_pdf(r1, r2)?,
                quadrature: joint_pdf_quadrature(params, r1, r2)?,
            })
        })
        .collect()
}

/// Marginal tail mass left outside the normalization domain, per axis.
pub const NORMALIZATION_TAIL: f64 = 1e-8;

/// Envelope levels where the exact marginal law of either envelope reaches
/// fixed probabilities, ending where the tail drops to [`NORMALIZATION_TAIL`].
fn marginal_breakpoints(params: &BivariateShadowedParams) -> Result<Vec<f64>> {
    let unit = UnivariateShadowedParams::new(params.k_factor(), params.m())?;
    let mean = params.mean_power();
    let probs = [
        0.01,
        0.1,
        0.3,
        0.5,
        0.7,
        0.9,
        0.99,
        0.999,
        0.9999,
        1.0 - NORMALIZATION_TAIL,
    ];
    let mut points = vec![0.0];
    let mut hi = 1.0;
    for p in probs {
        while unit.power_cdf(hi)? < p {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        let mut up = hi;
        for _ in 0..60 {
            let mid = 0.5 * (lo + up);
            if unit.power_cdf(mid)? < p {
                lo = mid;
            } else {
                up = mid;
            }
        }
        points.push((up * mean).sqrt());
    }
    Ok(points)
}

/// Nested quadrature of the adaptively truncated closed-form PDF.
///
/// The domain ends where each marginal tail is [`NORMALIZATION_TAIL`], so at
/// most twice that mass is left out; breakpoints sit on marginal quantiles.
pub fn normalization_mass(params: &BivariateShadowedParams) -> Result<f64> {
    let ev = JointPdfEvaluator::adaptive(params)?;
    let pieces = marginal_breakpoints(params)?;
    let mut err = None;
    let mut outer = |r1: f64| {
        let mut inner = |r2: f64| match ev.pdf(r1, r2) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        match integrate_pieces(&mut inner, &pieces, Tolerance::absolute(1e-9)) {
            Ok(r) => r.value,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let total = integrate_pieces(&mut outer, &pieces, Tolerance::absolute(1e-8))?.value;
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// The `(m, K, ρ)` normalization grid, `K` linear.
pub fn normalization_grid() -> Vec<(f64, f64, f64)> {
    let mut v = Vec::new();
    for m in [0.5, 1.0, 5.0, 10.0] {
        for k in [1.0, 10.0] {
            for rho in [0.2, 0.5, 0.8] {
                v.push((m, k, rho));
            }
        }
    }
    v
}

/// `Pr(R_i ≤ γ)` by 2-D quadrature of the integral-form joint PDF.
pub fn marginal_cdf_quadrature(params: &BivariateShadowedParams, which: Uav, gamma: f64) -> Result<f64> {
    let scale = params.mean_power().sqrt();
    let pieces = [
        0.0,
        0.5 * scale,
        scale,
        1.5 * scale,
        2.0 * scale,
        3.0 * scale,
        8.0 * scale,
    ];
    let mut err = None;
    let mut outer = |r: f64| {
        let mut inner = |other: f64| {
            let v = match which {
                Uav::Uav1 => joint_pdf_quadrature(params, r, other),
                Uav::Uav2 => joint_pdf_quadrature(params, other, r),
            };
            v.unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        };
        match integrate_pieces(&mut inner, &pieces, Tolerance::absolute(1e-12).with_rel(1e-10)) {
            Ok(r) => r.value,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let v = integrate_pieces(&mut outer, &[0.0, gamma], Tolerance::absolute(1e-11).with_rel(1e-9))?.value;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfComparison {
    pub gamma: f64,
    pub series: f64,
    pub gamma_form: f64,
    pub quadrature: f64,
}

pub fn cdf_comparison(
    params: &BivariateShadowedParams,
    trunc: TruncationOrders,
    gammas: &[f64],
) -> Result<Vec<CdfComparison>> {
    let s = BivariateSeries::new(params, trunc)?;
    gammas
        .par_iter()
        .map(|&g| {
            Ok(CdfComparison {
                gamma: g,
                series: s.marginal_cdf(Uav::Uav1, g)?.value,
                gamma_form: s.marginal_cdf_gamma_form(Uav::Uav1, g)?,
                quadrature: marginal_cdf_quadrature(params, Uav::Uav1, g)?,
            })
        })
        .collect()
}

/// Largest gap between the outage series and distance quadrature of the
/// conditional series CDF, over both UAVs and the given powers: `(noma, oma)`.
pub fn distance_average_gaps(
    params: &BivariateShadowedParams,
    uparams: &UnivariateShadowedParams,
    geo: &GeometryParams,
    base: &LinkConfig,
    trunc: TruncationOrders,
    trunc_oma: usize,
    p_bar_db: &[f64],
) -> Result<(f64, f64)> {
    let series = BivariateSeries::new(params, trunc)?;
    let useries = UnivariateSeries::new(uparams, trunc_oma);
    let mut gaps = (0.0f64, 0.0f64);
    for &p in p_bar_db {
        let cfg = base.with_p_bar_db(p)?;
        for uav in Uav::BOTH {
            let a = noma_outage_with_series(&series, geo, &cfg, uav)?;
            if !a.certain_outage {
                let q = noma_outage_distance_quadrature(&series, geo, &cfg, uav)?;
                gaps.0 = gaps.0.max((a.raw - q).abs());
            }
            let a = oma_outage_with_series(&useries, geo, &cfg, uav)?;
            let q = oma_outage_distance_quadrature(&useries, geo, &cfg, uav)?;
            gaps.1 = gaps.1.max((a.raw - q).abs());
        }
    }
    Ok(gaps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerReport {
    /// Relative error of the empirical `E{|H_k|²}`, worst over `k`.
    pub moment_rel_err: f64,
    /// Kolmogorov–Smirnov distance of the distance sampler, worst over UAVs.
    pub distance_ks: f64,
    /// Draws where the SINR event and the envelope event disagree.
    pub event_mismatches: u64,
    pub draws: u64,
}

pub fn sampler_report(
    params: &BivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    draws: u64,
    seed: u64,
) -> Result<SamplerReport> {
    let drawer = NomaDrawer::new(params, geo);
    let gamma = noma_rate_threshold(cfg);
    let stars = [
        noma_threshold_star(cfg, Uav::Uav1)?,
        noma_threshold_star(cfg, Uav::Uav2)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut power = [0.0f64; 2];
    let mut mismatches = 0;
    for _ in 0..draws {
        let s = drawer.draw(&mut rng);
        for uav in Uav::BOTH {
            let i = uav.index();
            power[i] += s.r[i] * s.r[i];
            let by_sinr = noma_sinr(cfg, uav, s.r[i], s.d[i]) < gamma;
            let by_envelope = s.r[i] < stars[i] * s.d[i];
            mismatches += u64::from(by_sinr != by_envelope);
        }
    }
    let mean = params.mean_power();
    let moment_rel_err = power
        .iter()
        .map(|p| (p / draws as f64 - mean).abs() / mean)
        .fold(0.0, f64::max);
    let mut distance_ks = 0.0f64;
    for uav in Uav::BOTH {
        let mut ws: Vec<f64> = (0..draws).map(|_| sample_distance(geo, uav, &mut rng)).collect();
        ws.sort_by(f64::total_cmp);
        let n = ws.len() as f64;
        for (i, &w) in ws.iter().enumerate() {
            let f = distance_cdf(geo, uav, w);
            distance_ks = distance_ks
                .max((f - i as f64 / n).abs())
                .max((f - (i + 1) as f64 / n).abs());
        }
    }
    Ok(SamplerReport {
        moment_rel_err,
        distance_ks,
        event_mismatches: mismatches,
        draws,
    })
}
