//! Bivariate Rician shadowed fading and downlink NOMA outage analysis for a
//! ground station serving two UAVs placed by a binomial point process.
//!
//! The crate is split along the analysis pipeline:
//!
//! - [`special`]: log-Gamma, Pochhammer, `I₀`, `₁F₁(m;1;x)`, incomplete gamma.
//! - [`bivariate`]: the correlated envelope pair: power-series joint PDF and
//!   marginal CDFs, the integral-form reference PDF, and a physical sampler.
//! - [`univariate`]: the per-link power model used by the OMA baseline.
//! - [`geometry`]: link-distance law of the BPP deployment and its moments.
//! - [`outage`]: closed-form NOMA and OMA outage probabilities.
//! - [`montecarlo`]: a seeded, thread-count independent simulator of the
//!   same system used to validate the closed forms.

pub mod bivariate;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod outage;
pub mod quadrature;
pub mod special;
pub mod univariate;

use std::fmt;

pub use bivariate::{BivariateSeries, BivariateShadowedParams, JointPdfEvaluator, TruncationOrders};
pub use error::{Error, Result};
pub use geometry::GeometryParams;
pub use montecarlo::SimPlan;
pub use outage::{LinkConfig, OutageResult};
pub use special::SeriesAccuracy;
pub use univariate::UnivariateShadowedParams;

/// One of the two downlink UAVs. `Uav1` is the near user (SIC receiver),
/// `Uav2` the far user (interference-ignorant receiver).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Uav {
    Uav1,
    Uav2,
}

impl Uav {
    pub const BOTH: [Uav; 2] = [Uav::Uav1, Uav::Uav2];

    pub fn index(self) -> usize {
        match self {
            Uav::Uav1 => 0,
            Uav::Uav2 => 1,
        }
    }
}

impl fmt::Display for Uav {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Uav::Uav1 => f.write_str("UAV-1"),
            Uav::Uav2 => f.write_str("UAV-2"),
        }
    }
}

/// Convert a decibel value to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
