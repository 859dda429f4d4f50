//! The `pdf-compare`, `outage-sweep` and `validate` subcommands.

use std::path::Path;

use rayon::prelude::*;

use uavnoma_core::montecarlo::{mc_noma_outage_both, mc_oma_outage_both};
use uavnoma_core::outage::{noma_outage_with_series, oma_outage_with_series, OutageResult};
use uavnoma_core::univariate::UnivariateSeries;
use uavnoma_core::{BivariateSeries, BivariateShadowedParams, Error as CoreError, SimPlan, Uav};

use crate::checks::{self, agrees, CheckOutcome};
use crate::config::{ConfigError, RunConfig};
use crate::csv::{format_opt, format_value, Table};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub passed: bool,
    /// Human-readable summary lines.
    pub messages: Vec<String>,
    pub csv: Option<String>,
}

pub fn write_output(csv: &str, output: Option<&Path>) -> Result<(), CommandError> {
    match output {
        Some(path) => std::fs::write(path, csv).map_err(|source| CommandError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub const PDF_COLUMNS: [&str; 5] = ["r1", "r2", "pdf_closed", "pdf_quadrature", "abs_diff"];

/// Closed-form versus integral-form joint PDF on the configured grid.
pub fn cmd_pdf_compare(cfg: &RunConfig) -> Result<CommandOutcome, CommandError> {
    let model = cfg.model()?;
    let pc = &cfg.pdf_compare;
    let grid = checks::pdf_grid(&model.channel, pc.ktr1, pc.grid_points, pc.r_max)?;
    let mut table = Table::new(&PDF_COLUMNS);
    let mut max_diff = 0.0f64;
    for p in &grid {
        max_diff = max_diff.max(p.abs_diff());
        table.push(vec![
            format_value(p.r1),
            format_value(p.r2),
            format_value(p.closed),
            format_value(p.quadrature),
            format_value(p.abs_diff()),
        ]);
    }
    let passed = max_diff < pc.tolerance;
    Ok(CommandOutcome {
        passed,
        messages: vec![format!(
            "{} grid points, ktr1 = {}, max |closed - quadrature| = {max_diff:.3e} (tolerance {:e})",
            grid.len(),
            pc.ktr1,
            pc.tolerance
        )],
        csv: Some(table.render()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Noma,
    Oma,
    Both,
}

impl Scheme {
    fn includes_noma(self) -> bool {
        matches!(self, Scheme::Noma | Scheme::Both)
    }

    fn includes_oma(self) -> bool {
        matches!(self, Scheme::Oma | Scheme::Both)
    }
}

pub const SWEEP_COLUMNS: [&str; 11] = [
    "sweep_variable",
    "sweep_value",
    "scheme",
    "uav",
    "analytic",
    "analytic_raw",
    "series_valid",
    "certain_outage",
    "mc",
    "mc_ci95",
    "agree",
];

/// One analytic/simulated pair of a sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub scheme: &'static str,
    pub uav: Uav,
    pub analytic: OutageResult,
    pub mc: Option<OutageResult>,
}

impl SweepRow {
    pub fn agrees(&self) -> bool {
        match self.mc {
            Some(mc) => agrees(
                self.analytic.probability,
                mc.probability,
                mc.ci_half_width().unwrap_or(0.0),
            ),
            None => true,
        }
    }
}

fn sweep_point(cfg: &RunConfig, value: f64, scheme: Scheme) -> Result<Vec<SweepRow>, CommandError> {
    let model = cfg.at_sweep_value(value).model()?;
    let mut rows = Vec::with_capacity(4);
    if scheme.includes_noma() {
        let series = BivariateSeries::new(&model.channel, model.trunc)?;
        let mc = model
            .plan
            .map(|plan| mc_noma_outage_both(&model.channel, &model.geometry, &model.link, &plan));
        for uav in Uav::BOTH {
            rows.push(SweepRow {
                value,
                scheme: "noma",
                uav,
                analytic: noma_outage_with_series(&series, &model.geometry, &model.link, uav)?,
                mc: mc.map(|m| m[uav.index()]),
            });
        }
    }
    if scheme.includes_oma() {
        let series = UnivariateSeries::new(&model.oma_channel, model.trunc_oma);
        let mc = model
            .plan
            .map(|plan| mc_oma_outage_both(&model.oma_channel, &model.geometry, &model.link, &plan));
        for uav in Uav::BOTH {
            rows.push(SweepRow {
                value,
                scheme: "oma",
                uav,
                analytic: oma_outage_with_series(&series, &model.geometry, &model.link, uav)?,
                mc: mc.map(|m| m[uav.index()]),
            });
        }
    }
    Ok(rows)
}

/// All rows of a sweep, in sweep order.
pub fn sweep_rows(cfg: &RunConfig, scheme: Scheme) -> Result<Vec<SweepRow>, CommandError> {
    cfg.model()?;
    let values = cfg.sweep.values()?;
    let per_point: Result<Vec<Vec<SweepRow>>, CommandError> =
        values.par_iter().map(|&v| sweep_point(cfg, v, scheme)).collect();
    Ok(per_point?.into_iter().flatten().collect())
}

pub fn sweep_table(cfg: &RunConfig, rows: &[SweepRow]) -> Table {
    let mut table = Table::new(&SWEEP_COLUMNS);
    for r in rows {
        table.push(vec![
            cfg.sweep.variable.name().to_string(),
            format_value(r.value),
            r.scheme.to_string(),
            (r.uav.index() + 1).to_string(),
            format_value(r.analytic.probability),
            format_value(r.analytic.raw),
            r.analytic.within_validity.to_string(),
            r.analytic.certain_outage.to_string(),
            format_opt(r.mc.map(|m| m.probability)),
            format_opt(r.mc.and_then(|m| m.ci_half_width())),
            r.mc.map(|_| r.agrees().to_string()).unwrap_or_default(),
        ]);
    }
    table
}

/// Outage of both UAVs along the configured sweep, with simulation when
/// `sim.samples > 0`.
pub fn cmd_outage_sweep(cfg: &RunConfig, scheme: Scheme) -> Result<CommandOutcome, CommandError> {
    let rows = sweep_rows(cfg, scheme)?;
    let table = sweep_table(cfg, &rows);
    let mut messages = Vec::new();
    let name = cfg.sweep.variable.name();
    for r in rows.iter().filter(|r| !r.agrees()) {
        let mc = r.mc.expect("only simulated rows can disagree");
        messages.push(format!(
            "disagreement at {name} = {}: {} {} analytic {:.4e} vs simulated {:.4e} (ci {:.2e})",
            r.value,
            r.scheme,
            r.uav,
            r.analytic.probability,
            mc.probability,
            mc.ci_half_width().unwrap_or(0.0)
        ));
    }
    let passed = messages.is_empty();
    for scheme in ["noma", "oma"] {
        for uav in Uav::BOTH {
            let curve: Vec<f64> = rows
                .iter()
                .filter(|r| r.scheme == scheme && r.uav == uav)
                .map(|r| r.analytic.probability)
                .collect();
            if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
                messages.push(format!(
                    "{scheme} {uav}: outage {first:.4e} -> {last:.4e} (decay ratio {:.3e})",
                    first / last
                ));
            }
        }
    }
    if rows.iter().any(|r| !r.analytic.within_validity) {
        messages.push("note: some analytic points lie outside the series validity region".into());
    }
    Ok(CommandOutcome {
        passed,
        messages,
        csv: Some(table.render()),
    })
}

/// Reduced-scale run of every oracle and invariant check.
pub fn validation_checks(cfg: &RunConfig) -> Result<Vec<CheckOutcome>, CommandError> {
    let model = cfg.model()?;
    let samples = 100_000;
    let plan = SimPlan::with_samples(samples, cfg.sim.seed)?;
    let mut out = Vec::new();

    let pc = &cfg.pdf_compare;
    out.push(CheckOutcome::from_result(
        "joint pdf: closed form vs integral form",
        checks::pdf_grid(&model.channel, pc.ktr1, 10, pc.r_max).map(|g| {
            let d = g.iter().map(|p| p.abs_diff()).fold(0.0, f64::max);
            (
                d < pc.tolerance,
                format!("max diff {d:.2e} on 10x10 grid, ktr1 = {}", pc.ktr1),
            )
        }),
    ));

    let sets = [(0.5, 10.0, 0.8), (1.0, 1.0, 0.5), (10.0, 10.0, 0.2)];
    let masses: Vec<_> = sets
        .par_iter()
        .map(|&(m, k, rho)| {
            let p = BivariateShadowedParams::new(1.0, rho, m, k)?;
            checks::normalization_mass(&p)
        })
        .collect();
    out.push(CheckOutcome::from_result(
        "joint pdf: normalization",
        masses.into_iter().collect::<Result<Vec<_>, _>>().map(|v| {
            let worst = v.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
            (
                worst < 1e-3,
                format!("worst |mass - 1| = {worst:.2e} over {} sets", v.len()),
            )
        }),
    ));

    out.push(CheckOutcome::from_result(
        "marginal cdf: series vs gamma form vs quadrature",
        checks::cdf_comparison(&model.channel, model.trunc, &[0.1, 0.3, 0.5]).map(|v| {
            let forms = v.iter().map(|c| (c.series - c.gamma_form).abs()).fold(0.0, f64::max);
            let quad = v.iter().map(|c| (c.series - c.quadrature).abs()).fold(0.0, f64::max);
            (
                forms < 1e-6 && quad < 1e-4,
                format!("forms {forms:.2e}, quadrature {quad:.2e}"),
            )
        }),
    ));

    out.push(CheckOutcome::from_result(
        "outage: distance-average consistency",
        checks::distance_average_gaps(
            &model.channel,
            &model.oma_channel,
            &model.geometry,
            &model.link,
            model.trunc,
            model.trunc_oma,
            &[0.0, 10.0, 20.0],
        )
        .map(|(n, o)| (n < 1e-6 && o < 1e-6, format!("noma {n:.2e}, oma {o:.2e}"))),
    ));

    out.push(CheckOutcome::from_result(
        "samplers: moments, distance law, event equivalence",
        checks::sampler_report(&model.channel, &model.geometry, &model.link, samples, cfg.sim.seed).map(|r| {
            (
                r.moment_rel_err < 0.02 && r.distance_ks < 1e-2 && r.event_mismatches == 0,
                format!(
                    "moment err {:.2e}, KS {:.2e}, {} mismatches in {} draws",
                    r.moment_rel_err, r.distance_ks, r.event_mismatches, r.draws
                ),
            )
        }),
    ));

    let sim_cfg = {
        let mut c = cfg.clone();
        c.sim.samples = plan.samples();
        c.sim.batch_size = plan.batch_size();
        c.sweep.values = Some(vec![
            cfg.link.p_g1_db.min(cfg.link.p_g2_db),
            40.0f64.max(cfg.link.p_g1_db + 1.0),
        ]);
        c.sweep.variable = crate::config::SweepVariable::PBarDb;
        c
    };
    out.push(CheckOutcome::from_result(
        "outage: analytic vs simulation",
        sweep_rows(&sim_cfg, Scheme::Both).map(|rows| {
            let bad = rows.iter().filter(|r| !r.agrees()).count();
            (
                bad == 0,
                format!("{bad} of {} points disagree at {samples} samples", rows.len()),
            )
        }),
    ));

    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(|pool| pool.install(|| mc_noma_outage_both(&model.channel, &model.geometry, &model.link, &plan)))
    };
    out.push(CheckOutcome::from_result(
        "simulation: thread-count determinism",
        run(1)
            .and_then(|a| run(4).map(|b| a == b))
            .map(|same| (same, format!("1 vs 4 threads identical: {same}"))),
    ));

    Ok(out)
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<CommandOutcome, CommandError> {
    let checks = validation_checks(cfg)?;
    let passed = checks.iter().all(|c| c.passed);
    Ok(CommandOutcome {
        passed,
        messages: checks.iter().map(CheckOutcome::line).collect(),
        csv: None,
    })
}
