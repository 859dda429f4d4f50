//! Link distances of the BPP deployment.
//!
//! Each UAV flies at altitude `D_alt` above a point uniform on a disc of
//! radius `r_a`, shifted by its minimum ground distance `λ`. The link
//! distance `w` has density `2w/r_a²` on `[w_min, w_max]` with
//! `w_min² = D_alt² + λ²` and `w_max² = w_min² + r_a²`. All lengths in km.

use rand::Rng;

use crate::error::{require, Error, Result};
use crate::Uav;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams {
    r_a_km: f64,
    d_alt_km: f64,
    lambda_km: [f64; 2],
}

impl GeometryParams {
    pub fn new(r_a_km: f64, d_alt_km: f64, lambda1_km: f64, lambda2_km: f64) -> Result<Self> {
        require(r_a_km > 0.0 && r_a_km.is_finite(), "r_a_km", r_a_km, "r_a > 0")?;
        require(
            d_alt_km > 0.0 && d_alt_km.is_finite(),
            "d_alt_km",
            d_alt_km,
            "D_alt > 0",
        )?;
        for (name, l) in [("lambda1_km", lambda1_km), ("lambda2_km", lambda2_km)] {
            require(l > 0.0 && l < r_a_km, name, l, "0 < lambda < r_a")?;
        }
        require(lambda1_km < lambda2_km, "lambda1_km", lambda1_km, "lambda1 < lambda2")?;
        Ok(Self {
            r_a_km,
            d_alt_km,
            lambda_km: [lambda1_km, lambda2_km],
        })
    }

    pub fn r_a(&self) -> f64 {
        self.r_a_km
    }

    pub fn d_alt(&self) -> f64 {
        self.d_alt_km
    }

    pub fn lambda(&self, uav: Uav) -> f64 {
        self.lambda_km[uav.index()]
    }

    fn w_min_sq(&self, uav: Uav) -> f64 {
        let l = self.lambda(uav);
        self.d_alt_km * self.d_alt_km + l * l
    }

    pub fn w_min(&self, uav: Uav) -> f64 {
        self.w_min_sq(uav).sqrt()
    }

    pub fn w_max(&self, uav: Uav) -> f64 {
        (self.w_min_sq(uav) + self.r_a_km * self.r_a_km).sqrt()
    }
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            r_a_km: 4.0,
            d_alt_km: 0.2,
            lambda_km: [2.0, 3.0],
        }
    }
}

pub fn distance_pdf(geo: &GeometryParams, uav: Uav, w: f64) -> f64 {
    if w < geo.w_min(uav) || w > geo.w_max(uav) {
        return 0.0;
    }
    2.0 * w / (geo.r_a_km * geo.r_a_km)
}

pub fn distance_cdf(geo: &GeometryParams, uav: Uav, w: f64) -> f64 {
    let r2 = geo.r_a_km * geo.r_a_km;
    ((w * w - geo.w_min_sq(uav)) / r2).clamp(0.0, 1.0)
}

/// Inverse CDF: maps `u ∈ [0, 1]` to a link distance.
pub fn distance_from_uniform(geo: &GeometryParams, uav: Uav, u: f64) -> f64 {
    (geo.w_min_sq(uav) + u * geo.r_a_km * geo.r_a_km).sqrt()
}

pub fn sample_distance<R: Rng + ?Sized>(geo: &GeometryParams, uav: Uav, rng: &mut R) -> f64 {
    distance_from_uniform(geo, uav, rng.gen::<f64>())
}

/// `ln Ḡ(λ, k)` with `Ḡ(λ,k) = ((D²+λ²+r_a²)^{k+2} - (D²+λ²)^{k+2}) / (r_a²(k+2))`.
pub fn ln_g_bar(geo: &GeometryParams, lambda: f64, k: usize) -> Result<f64> {
    require(
        lambda > 0.0 && lambda < geo.r_a_km,
        "lambda",
        lambda,
        "0 < lambda < r_a",
    )?;
    let lo = geo.d_alt_km * geo.d_alt_km + lambda * lambda;
    let r2 = geo.r_a_km * geo.r_a_km;
    let hi = lo + r2;
    let p = (k + 2) as f64;
    let ratio = (p * (lo / hi).ln()).exp();
    Ok(p * hi.ln() + (-ratio).ln_1p() - (r2 * p).ln())
}

/// `Ḡ(λ, k) = E{d^{2(k+1)}}` for a UAV with minimum ground distance `λ`.
pub fn g_bar(geo: &GeometryParams, lambda: f64, k: usize) -> Result<f64> {
    let v = ln_g_bar(geo, lambda, k)?.exp();
    if v.is_infinite() {
        return Err(Error::Overflow { context: "g_bar" });
    }
    Ok(v)
}

/// `ln Ḡ(λ_uav, k)` for `k = 0..len`.
pub(crate) fn ln_g_bar_table(geo: &GeometryParams, uav: Uav, len: usize) -> Result<Vec<f64>> {
    (0..len).map(|k| ln_g_bar(geo, geo.lambda(uav), k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    #[test]
    fn validation() {
        assert!(GeometryParams::new(4.0, 0.2, 3.0, 2.0).is_err());
        assert!(GeometryParams::new(4.0, 0.2, 2.0, 4.0).is_err());
        assert!(GeometryParams::new(4.0, 0.0, 2.0, 3.0).is_err());
        assert_eq!(
            GeometryParams::new(4.0, 0.2, 2.0, 3.0).unwrap(),
            GeometryParams::default()
        );
    }

    #[test]
    fn pdf_examples() {
        let g = GeometryParams::default();
        assert!((distance_pdf(&g, Uav::Uav1, 2.5) - 0.3125).abs() < 1e-15);
        assert_eq!(distance_pdf(&g, Uav::Uav1, 2.0), 0.0);
        let (a, b) = (g.w_min(Uav::Uav2), g.w_max(Uav::Uav2));
        let r = integrate(|w| distance_pdf(&g, Uav::Uav2, w), a, b, Tolerance::absolute(1e-14)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(distance_from_uniform(&g, Uav::Uav1, 0.0), g.w_min(Uav::Uav1));
        assert!((distance_from_uniform(&g, Uav::Uav1, 1.0) - g.w_max(Uav::Uav1)).abs() < 1e-15);
    }

    #[test]
    fn g_bar_examples() {
        let g = GeometryParams::default();
        assert!((g_bar(&g, 2.0, 0).unwrap() - 12.04).abs() < 1e-12);
        for k in 0..10 {
            assert!(g_bar(&g, 2.0, k + 1).unwrap() > g_bar(&g, 2.0, k).unwrap());
        }
        assert!(g_bar(&g, 5.0, 0).is_err());
    }

    #[test]
    fn g_bar_is_distance_moment() {
        let g = GeometryParams::default();
        for uav in Uav::BOTH {
            for k in 0..=10 {
                let (a, b) = (g.w_min(uav), g.w_max(uav));
                let f = |w: f64| w.powi(2 * (k as i32 + 1)) * distance_pdf(&g, uav, w);
                let q = integrate(f, a, b, Tolerance::absolute(0.0).with_rel(1e-13))
                    .unwrap()
                    .value;
                let want = g_bar(&g, g.lambda(uav), k).unwrap();
                assert!(((q - want) / want).abs() < 1e-9, "k={k}: {q} vs {want}");
            }
        }
    }
}
