use crate::Uav;

/// Errors raised by the series, quadrature and outage routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{function}: argument {value} is outside the domain ({requirement})")]
    Domain {
        function: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("invalid parameter `{name}` = {value}: {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("degenerate correlation rho = {rho}: closed-form evaluation requires 0 < rho < 1")]
    DegenerateCorrelation { rho: f64 },

    #[error("{context}: result exceeds the representable range")]
    Overflow { context: &'static str },

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {abs_error:e}")]
    QuadratureNotConverged { estimate: f64, abs_error: f64 },

    #[error("certain outage at {uav}: decoding denominator {denominator} is not positive")]
    CertainOutage { uav: Uav, denominator: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(ok: bool, name: &'static str, value: f64, requirement: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            requirement,
        })
    }
}
