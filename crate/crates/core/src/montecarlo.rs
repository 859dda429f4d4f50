//! Seeded Monte Carlo simulation of the downlink.
//!
//! Samples are split into fixed batches. Batch `b` draws from a ChaCha8
//! generator seeded with the plan seed on stream `b`, and only integer outage
//! counts are reduced, so results do not depend on the rayon thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bivariate::{BivariateShadowedParams, PairSampler};
use crate::error::{require, Result};
use crate::geometry::{distance_from_uniform, GeometryParams};
use crate::outage::{noma_rate_threshold, oma_threshold, LinkConfig, OutageResult, Provenance};
use crate::univariate::{PowerSampler, UnivariateShadowedParams};
use crate::Uav;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimPlan {
    samples: u64,
    seed: u64,
    batch_size: u64,
    antithetic: bool,
}

impl SimPlan {
    pub fn new(samples: u64, seed: u64, batch_size: u64, antithetic: bool) -> Result<Self> {
        require(samples >= 1, "samples", samples as f64, "samples >= 1")?;
        require(batch_size >= 1, "batch_size", batch_size as f64, "batch_size >= 1")?;
        require(
            batch_size <= samples,
            "batch_size",
            batch_size as f64,
            "batch_size <= samples",
        )?;
        Ok(Self {
            samples,
            seed,
            batch_size,
            antithetic,
        })
    }

    /// Plan with the default batch size, capped at `samples`.
    pub fn with_samples(samples: u64, seed: u64) -> Result<Self> {
        Self::new(samples, seed, Self::DEFAULT_BATCH.min(samples.max(1)), false)
    }

    pub const DEFAULT_BATCH: u64 = 1 << 16;

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn batch_size(&self) -> u64 {
        self.batch_size
    }

    pub fn antithetic(&self) -> bool {
        self.antithetic
    }

    fn batches(&self) -> u64 {
        self.samples.div_ceil(self.batch_size)
    }

    fn batch_len(&self, b: u64) -> u64 {
        self.batch_size.min(self.samples - b * self.batch_size)
    }

    fn rng(&self, b: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(b);
        rng
    }

    /// Sum per-batch count vectors in parallel.
    fn run<const N: usize, F>(&self, batch: F) -> [u64; N]
    where
        F: Fn(&mut ChaCha8Rng, u64) -> [u64; N] + Sync,
    {
        (0..self.batches())
            .into_par_iter()
            .map(|b| batch(&mut self.rng(b), self.batch_len(b)))
            .reduce(
                || [0; N],
                |mut a, c| {
                    for (x, y) in a.iter_mut().zip(c) {
                        *x += y;
                    }
                    a
                },
            )
    }
}

impl Default for SimPlan {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0x5EED_2024,
            batch_size: Self::DEFAULT_BATCH,
            antithetic: false,
        }
    }
}

/// Wilson score interval for `count` successes in `n` trials; returns the
/// half-width.
pub fn wilson_half_width(count: u64, n: u64) -> f64 {
    let n = n as f64;
    let p = count as f64 / n;
    let z2 = Z95 * Z95;
    Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

fn mc_result(uav: Uav, count: u64, n: u64) -> OutageResult {
    let p = count as f64 / n as f64;
    OutageResult {
        uav,
        probability: p,
        provenance: Provenance::MonteCarlo {
            samples: n,
            ci_half_width: wilson_half_width(count, n),
        },
        raw: p,
        within_validity: true,
        certain_outage: false,
    }
}

/// Decoding SINR of the given UAV for envelope `r` at distance `d`.
///
/// UAV-1 decodes after imperfect SIC, `a1 G / (β a2 G + 1)`; UAV-2 treats
/// UAV-1's signal as noise, `a2 G / (a1 G + 1)`, with `G = P r² / d²`.
pub fn noma_sinr(cfg: &LinkConfig, uav: Uav, r: f64, d: f64) -> f64 {
    let g = cfg.p_g(uav) * r * r / (d * d);
    let (a1, a2) = (cfg.a_gs1(), cfg.a_gs2());
    match uav {
        Uav::Uav1 => a1 * g / (cfg.beta() * a2 * g + 1.0),
        Uav::Uav2 => a2 * g / (a1 * g + 1.0),
    }
}

/// One NOMA channel realization: envelopes and link distances of both UAVs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomaDraw {
    pub r: [f64; 2],
    pub d: [f64; 2],
}

/// Draws joint NOMA realizations, optionally in antithetic pairs.
#[derive(Debug, Clone)]
pub struct NomaDrawer {
    pair: PairSampler,
    geo: GeometryParams,
}

impl NomaDrawer {
    pub fn new(params: &BivariateShadowedParams, geo: &GeometryParams) -> Self {
        Self {
            pair: PairSampler::new(params),
            geo: *geo,
        }
    }

    fn assemble(&self, normals: &[f64; 6], z: f64, u: [f64; 2]) -> NomaDraw {
        let (r1, r2) = self.pair.from_variates(normals, z);
        NomaDraw {
            r: [r1, r2],
            d: [
                distance_from_uniform(&self.geo, Uav::Uav1, u[0]),
                distance_from_uniform(&self.geo, Uav::Uav2, u[1]),
            ],
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> NomaDraw {
        self.draw_pair(rng).0
    }

    /// A draw and its antithetic mirror (negated normals, reflected uniforms,
    /// shared line-of-sight power).
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (NomaDraw, NomaDraw) {
        let mut normals = [0.0; 6];
        for v in normals.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let z = self.pair.draw_los_power(rng).sqrt();
        let u = [rng.gen::<f64>(), rng.gen::<f64>()];
        let a = self.assemble(&normals, z, u);
        let mirrored = normals.map(|x| -x);
        let b = self.assemble(&mirrored, z, [1.0 - u[0], 1.0 - u[1]]);
        (a, b)
    }
}

/// Visit `n` realizations produced by `pair`, using the mirror when antithetic.
fn for_each_sample<T, R, P, V>(rng: &mut R, n: u64, antithetic: bool, mut pair: P, mut visit: V)
where
    R: Rng,
    P: FnMut(&mut R) -> (T, T),
    V: FnMut(&T),
{
    let mut left = n;
    while left > 0 {
        let (a, b) = pair(rng);
        visit(&a);
        left -= 1;
        if antithetic && left > 0 {
            visit(&b);
            left -= 1;
        }
    }
}

/// Simulated NOMA outage of both UAVs from the same channel draws.
pub fn mc_noma_outage_both(
    params: &BivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    plan: &SimPlan,
) -> [OutageResult; 2] {
    let drawer = NomaDrawer::new(params, geo);
    let gamma = noma_rate_threshold(cfg);
    let counts = plan.run::<2, _>(|rng, n| {
        let mut c = [0u64; 2];
        for_each_sample(
            rng,
            n,
            plan.antithetic,
            |rng| drawer.draw_pair(rng),
            |s: &NomaDraw| {
                for uav in Uav::BOTH {
                    let i = uav.index();
                    if noma_sinr(cfg, uav, s.r[i], s.d[i]) < gamma {
                        c[i] += 1;
                    }
                }
            },
        );
        c
    });
    Uav::BOTH.map(|u| mc_result(u, counts[u.index()], plan.samples))
}

pub fn mc_noma_outage(
    params: &BivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    plan: &SimPlan,
    uav: Uav,
) -> OutageResult {
    mc_noma_outage_both(params, geo, cfg, plan)[uav.index()]
}

/// Simulated OMA outage of both UAVs over independent links.
pub fn mc_oma_outage_both(
    uparams: &UnivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    plan: &SimPlan,
) -> [OutageResult; 2] {
    let sampler = PowerSampler::new(uparams);
    let gamma = oma_threshold(cfg);
    let counts = plan.run::<2, _>(|rng, n| {
        let mut c = [0u64; 2];
        for uav in Uav::BOTH {
            let p = cfg.p_g(uav);
            let draw = |rng: &mut ChaCha8Rng| {
                let (re, im): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                let z = sampler.draw_los_power(rng).sqrt();
                let u = rng.gen::<f64>();
                let d = |u| distance_from_uniform(geo, uav, u);
                (
                    (p * sampler.from_variates(re, im, z), d(u)),
                    (p * sampler.from_variates(-re, -im, z), d(1.0 - u)),
                )
            };
            for_each_sample(rng, n, plan.antithetic, draw, |&(x, d): &(f64, f64)| {
                if x < gamma * d * d {
                    c[uav.index()] += 1;
                }
            });
        }
        c
    });
    Uav::BOTH.map(|u| mc_result(u, counts[u.index()], plan.samples))
}

pub fn mc_oma_outage(
    uparams: &UnivariateShadowedParams,
    geo: &GeometryParams,
    cfg: &LinkConfig,
    plan: &SimPlan,
    uav: Uav,
) -> OutageResult {
    mc_oma_outage_both(uparams, geo, cfg, plan)[uav.index()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outage::noma_threshold_star;

    #[test]
    fn plan_validation() {
        assert!(SimPlan::new(0, 1, 1, false).is_err());
        assert!(SimPlan::new(10, 1, 11, false).is_err());
        let p = SimPlan::new(10, 1, 3, false).unwrap();
        assert_eq!(p.batches(), 4);
        assert_eq!(p.batch_len(3), 1);
    }

    #[test]
    fn wilson_width_is_sane() {
        let h = wilson_half_width(500, 1000);
        assert!((h - 0.0309).abs() < 1e-3);
        assert!(wilson_half_width(0, 1000) > 0.0);
    }

    #[test]
    fn sinr_and_envelope_events_agree() {
        let params = BivariateShadowedParams::with_k_db(1.0, 0.5, 10.0, 10.0).unwrap();
        let geo = GeometryParams::default();
        let cfg = LinkConfig::default().with_p_bar_db(0.0).unwrap();
        let gamma = noma_rate_threshold(&cfg);
        let stars = Uav::BOTH.map(|u| noma_threshold_star(&cfg, u).unwrap());
        let drawer = NomaDrawer::new(&params, &geo);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            let s = drawer.draw(&mut rng);
            for uav in Uav::BOTH {
                let i = uav.index();
                let by_sinr = noma_sinr(&cfg, uav, s.r[i], s.d[i]) < gamma;
                let by_envelope = s.r[i] < stars[i] * s.d[i];
                assert_eq!(by_sinr, by_envelope);
            }
        }
    }

    #[test]
    fn huge_threshold_is_certain_outage() {
        let params = BivariateShadowedParams::with_k_db(1.0, 0.5, 10.0, 10.0).unwrap();
        let cfg = LinkConfig::new(0.5, 0.01, 40.0, 10.0, 10.0).unwrap();
        let plan = SimPlan::new(1000, 1, 100, false).unwrap();
        let r = mc_noma_outage_both(&params, &GeometryParams::default(), &cfg, &plan);
        assert_eq!(r[0].probability, 1.0);
        assert_eq!(r[1].probability, 1.0);
    }

    #[test]
    fn antithetic_counts_every_sample() {
        let u = UnivariateShadowedParams::with_k_db(10.0, 10.0).unwrap();
        let cfg = LinkConfig::default().with_p_bar_db(0.0).unwrap();
        let plan = SimPlan::new(20_001, 9, 5000, true).unwrap();
        let r = mc_oma_outage(&u, &GeometryParams::default(), &cfg, &plan, Uav::Uav1);
        assert!((r.probability - 0.4375).abs() < 0.02, "{}", r.probability);
    }
}
