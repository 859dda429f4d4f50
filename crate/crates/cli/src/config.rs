//! TOML run configuration.
//!
//! Every physical quantity carries its unit in the field name (`_db`, `_km`,
//! `_bps_hz`). Missing sections and fields fall back to the baseline scenario.

use serde::{Deserialize, Serialize};

use uavnoma_core::{
    BivariateShadowedParams, Error as CoreError, GeometryParams, LinkConfig, SimPlan, TruncationOrders,
    UnivariateShadowedParams,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(#[from] CoreError),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid sweep: {0}")]
    Sweep(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub sigma: f64,
    pub rho: f64,
    /// Shaping parameter of the correlated NOMA channel.
    pub m: f64,
    pub k_db: f64,
    /// Shaping parameter of the OMA links.
    pub m_oma: f64,
    pub k_oma_db: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            rho: 0.5,
            m: 10.0,
            k_db: 10.0,
            m_oma: 10.0,
            k_oma_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub r_a_km: f64,
    pub d_alt_km: f64,
    pub lambda1_km: f64,
    pub lambda2_km: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            r_a_km: 4.0,
            d_alt_km: 0.2,
            lambda1_km: 2.0,
            lambda2_km: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub a_gs1: f64,
    pub beta: f64,
    pub r_oma_bps_hz: f64,
    pub p_g1_db: f64,
    pub p_g2_db: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            a_gs1: 0.5,
            beta: 0.01,
            r_oma_bps_hz: 0.1,
            p_g1_db: 10.0,
            p_g2_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSection {
    pub ktr1: usize,
    pub ktr2: usize,
    /// Order of the OMA double series.
    pub ktr_oma: usize,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self {
            ktr1: 30,
            ktr2: 10,
            ktr_oma: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// 0 disables simulation.
    pub samples: u64,
    pub seed: u64,
    pub batch_size: u64,
    pub antithetic: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        let plan = SimPlan::default();
        Self {
            samples: plan.samples(),
            seed: plan.seed(),
            batch_size: plan.batch_size(),
            antithetic: plan.antithetic(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PBarDb,
    MBar,
    Beta,
    AGs1,
    Rho,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::PBarDb => "p_bar_db",
            SweepVariable::MBar => "m_bar",
            SweepVariable::Beta => "beta",
            SweepVariable::AGs1 => "a_gs1",
            SweepVariable::Rho => "rho",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Explicit sweep values; overrides `start`, `stop` and `points`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            variable: SweepVariable::PBarDb,
            start: 0.0,
            stop: 40.0,
            points: 9,
            values: None,
        }
    }
}

impl SweepSection {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        if let Some(v) = &self.values {
            if v.len() < 2 {
                return Err(ConfigError::Sweep("need at least 2 values".into()));
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ConfigError::Sweep("values must be strictly increasing".into()));
            }
            return Ok(v.clone());
        }
        if self.points < 2 {
            return Err(ConfigError::Sweep(format!(
                "points = {} but at least 2 are needed",
                self.points
            )));
        }
        if self.start >= self.stop || self.start.is_nan() || self.stop.is_nan() {
            return Err(ConfigError::Sweep(format!(
                "start {} must be below stop {}",
                self.start, self.stop
            )));
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdfCompareSection {
    pub ktr1: usize,
    pub grid_points: usize,
    pub r_max: f64,
    pub tolerance: f64,
}

impl Default for PdfCompareSection {
    fn default() -> Self {
        Self {
            ktr1: 150,
            grid_points: 30,
            r_max: 3.0,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelSection,
    pub geometry: GeometrySection,
    pub link: LinkSection,
    pub truncation: TruncationSection,
    pub sim: SimSection,
    pub sweep: SweepSection,
    pub pdf_compare: PdfCompareSection,
}

/// Validated model objects built from a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub channel: BivariateShadowedParams,
    pub oma_channel: UnivariateShadowedParams,
    pub geometry: GeometryParams,
    pub link: LinkConfig,
    pub trunc: TruncationOrders,
    pub trunc_oma: usize,
    /// `None` when simulation is disabled.
    pub plan: Option<SimPlan>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Fails for values TOML cannot hold, such as seeds above `i64::MAX`.
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Check every invariant and convert dB quantities once.
    pub fn model(&self) -> Result<Model, ConfigError> {
        let c = &self.channel;
        let channel = BivariateShadowedParams::with_k_db(c.sigma, c.rho, c.m, c.k_db)?;
        if c.rho <= 0.0 || c.rho >= 1.0 {
            return Err(CoreError::DegenerateCorrelation { rho: c.rho }.into());
        }
        let oma_channel = UnivariateShadowedParams::with_k_db(c.k_oma_db, c.m_oma)?;
        let g = &self.geometry;
        let geometry = GeometryParams::new(g.r_a_km, g.d_alt_km, g.lambda1_km, g.lambda2_km)?;
        let l = &self.link;
        let link = LinkConfig::from_db(l.a_gs1, l.beta, l.r_oma_bps_hz, l.p_g1_db, l.p_g2_db)?;
        let t = &self.truncation;
        let plan = match self.sim.samples {
            0 => None,
            n => Some(SimPlan::new(
                n,
                self.sim.seed,
                self.sim.batch_size.min(n),
                self.sim.antithetic,
            )?),
        };
        self.sweep.values()?;
        Ok(Model {
            channel,
            oma_channel,
            geometry,
            link,
            trunc: TruncationOrders::new(t.ktr1, t.ktr2),
            trunc_oma: t.ktr_oma,
            plan,
        })
    }

    /// Copy with the sweep variable set to `value`.
    pub fn at_sweep_value(&self, value: f64) -> RunConfig {
        let mut c = self.clone();
        match self.sweep.variable {
            SweepVariable::PBarDb => {
                c.link.p_g1_db = value;
                c.link.p_g2_db = value;
            }
            SweepVariable::MBar => {
                c.channel.m = value;
                c.channel.m_oma = value;
            }
            SweepVariable::Beta => c.link.beta = value,
            SweepVariable::AGs1 => c.link.a_gs1 = value,
            SweepVariable::Rho => c.channel.rho = value,
        }
        c
    }
}
