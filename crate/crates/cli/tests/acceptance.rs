//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs with `harness = false` so the criteria print in order.

use std::process::ExitCode;
use std::time::Instant;

use uavnoma_cli::checks::{self, CheckOutcome};
use uavnoma_cli::commands::{sweep_rows, SweepRow};
use uavnoma_cli::config::SweepVariable;
use uavnoma_cli::{cmd_outage_sweep, RunConfig, Scheme};
use uavnoma_core::{BivariateShadowedParams, Uav};

const PDF_GRID_TOL: f64 = 1e-4;
const PDF_GRID_KTR1: usize = 150;
const PDF_GRID_POINTS: usize = 30;
const PDF_GRID_RMAX: f64 = 3.0;
const NORMALIZATION_TOL: f64 = 1e-3;
const CDF_FORMS_TOL: f64 = 1e-6;
const CDF_QUADRATURE_TOL: f64 = 1e-4;
const DISTANCE_AVERAGE_TOL: f64 = 1e-6;
const MOMENT_REL_TOL: f64 = 0.01;
const DISTANCE_KS_TOL: f64 = 3e-3;
const DESK_SAMPLES: u64 = 1_000_000;
const THREAD_COUNTS: [usize; 3] = [1, 4, 8];

fn baseline() -> RunConfig {
    let mut c = RunConfig::default();
    c.sim.samples = DESK_SAMPLES;
    c
}

fn pdf_grid_equivalence() -> CheckOutcome {
    let params = baseline().model().expect("baseline is valid").channel;
    CheckOutcome::from_result(
        "1 joint pdf closed form vs integral form",
        checks::pdf_grid(&params, PDF_GRID_KTR1, PDF_GRID_POINTS, PDF_GRID_RMAX).map(|g| {
            let d = g.iter().map(|p| p.abs_diff()).fold(0.0, f64::max);
            (
                d < PDF_GRID_TOL,
                format!("max diff {d:.2e} over {} points (tol {PDF_GRID_TOL:e})", g.len()),
            )
        }),
    )
}

fn normalization() -> CheckOutcome {
    let grid = checks::normalization_grid();
    let mut worst = (0.0f64, (0.0, 0.0, 0.0));
    for &(m, k, rho) in &grid {
        let mass = BivariateShadowedParams::new(1.0, rho, m, k).and_then(|p| checks::normalization_mass(&p));
        match mass {
            Ok(v) if (v - 1.0).abs() >= worst.0 => worst = ((v - 1.0).abs(), (m, k, rho)),
            Ok(_) => {}
            Err(e) => {
                return CheckOutcome::new(
                    "2 joint pdf normalization",
                    false,
                    format!("(m, K, rho) = ({m}, {k}, {rho}): {e}"),
                )
            }
        }
    }
    CheckOutcome::new(
        "2 joint pdf normalization",
        worst.0 < NORMALIZATION_TOL,
        format!(
            "worst |mass - 1| = {:.2e} at (m, K, rho) = {:?} over {} sets (tol {NORMALIZATION_TOL:e})",
            worst.0,
            worst.1,
            grid.len()
        ),
    )
}

fn cdf_equivalence() -> CheckOutcome {
    let model = baseline().model().expect("baseline is valid");
    let gammas: Vec<f64> = (1..=10).map(|i| 0.05 * i as f64).collect();
    CheckOutcome::from_result(
        "3 marginal cdf series vs gamma form vs quadrature",
        checks::cdf_comparison(&model.channel, model.trunc, &gammas).map(|v| {
            let forms = v.iter().map(|c| (c.series - c.gamma_form).abs()).fold(0.0, f64::max);
            let quad = v
                .iter()
                .map(|c| (c.series - c.quadrature).abs().max((c.gamma_form - c.quadrature).abs()))
                .fold(0.0, f64::max);
            (
                forms < CDF_FORMS_TOL && quad < CDF_QUADRATURE_TOL,
                format!(
                    "forms {forms:.2e} (tol {CDF_FORMS_TOL:e}), quadrature {quad:.2e} (tol {CDF_QUADRATURE_TOL:e})"
                ),
            )
        }),
    )
}

fn find<'a>(rows: &'a [SweepRow], value: f64, scheme: &str, uav: Uav) -> &'a SweepRow {
    rows.iter()
        .find(|r| r.value == value && r.scheme == scheme && r.uav == uav)
        .expect("sweep covers every point")
}

fn disagreements(rows: &[SweepRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| r.mc.is_none() || !r.agrees())
        .map(|r| format!("{} {} at {}", r.scheme, r.uav, r.value))
        .collect()
}

fn power_sweep() -> CheckOutcome {
    let mut cfg = baseline();
    cfg.sweep.variable = SweepVariable::PBarDb;
    cfg.sweep.values = Some((0..=8).map(|i| 5.0 * i as f64).collect());
    let rows = match sweep_rows(&cfg, Scheme::Both) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::new("4 outage vs transmit power", false, format!("error: {e}")),
    };
    let mut problems = disagreements(&rows);
    for &v in cfg.sweep.values.as_ref().expect("values set") {
        let p = |s: &str, u: Uav| find(&rows, v, s, u).analytic.probability;
        for u in Uav::BOTH {
            if p("noma", u) >= p("oma", u) {
                problems.push(format!("NOMA >= OMA for {u} at {v} dB"));
            }
        }
        for s in ["noma", "oma"] {
            if p(s, Uav::Uav1) >= p(s, Uav::Uav2) {
                problems.push(format!("UAV-1 >= UAV-2 for {s} at {v} dB"));
            }
        }
    }
    CheckOutcome::new(
        "4 outage vs transmit power",
        problems.is_empty(),
        if problems.is_empty() {
            format!("{} points agree at {DESK_SAMPLES} samples, orderings hold", rows.len())
        } else {
            problems.join("; ")
        },
    )
}

fn shadowing_sweep() -> CheckOutcome {
    let mut cfg = baseline();
    cfg.link.p_g1_db = 10.0;
    cfg.link.p_g2_db = 10.0;
    cfg.sweep.variable = SweepVariable::MBar;
    let values = vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
    cfg.sweep.values = Some(values.clone());
    let rows = match sweep_rows(&cfg, Scheme::Both) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::new("5 outage vs shadowing", false, format!("error: {e}")),
    };
    let mut problems = disagreements(&rows);
    for s in ["noma", "oma"] {
        for u in Uav::BOTH {
            for w in values.windows(2) {
                let (a, b) = (find(&rows, w[0], s, u), find(&rows, w[1], s, u));
                if b.analytic.probability > a.analytic.probability {
                    problems.push(format!("{s} {u} increases from m = {} to {}", w[0], w[1]));
                }
            }
        }
    }
    for &v in &values {
        for u in Uav::BOTH {
            if find(&rows, v, "noma", u).analytic.probability >= find(&rows, v, "oma", u).analytic.probability {
                problems.push(format!("NOMA >= OMA for {u} at m = {v}"));
            }
        }
    }
    CheckOutcome::new(
        "5 outage vs shadowing",
        problems.is_empty(),
        if problems.is_empty() {
            format!("{} points agree, curves nonincreasing, NOMA below OMA", rows.len())
        } else {
            problems.join("; ")
        },
    )
}

fn distance_average() -> CheckOutcome {
    let model = baseline().model().expect("baseline is valid");
    let powers: Vec<f64> = (0..=8).map(|i| 5.0 * i as f64).collect();
    CheckOutcome::from_result(
        "6 outage series vs distance-average quadrature",
        checks::distance_average_gaps(
            &model.channel,
            &model.oma_channel,
            &model.geometry,
            &model.link,
            model.trunc,
            model.trunc_oma,
            &powers,
        )
        .map(|(n, o)| {
            (
                n < DISTANCE_AVERAGE_TOL && o < DISTANCE_AVERAGE_TOL,
                format!("noma {n:.2e}, oma {o:.2e} (tol {DISTANCE_AVERAGE_TOL:e})"),
            )
        }),
    )
}

fn samplers() -> CheckOutcome {
    let cfg = baseline();
    let model = cfg.model().expect("baseline is valid");
    CheckOutcome::from_result(
        "7 sampler moments, distance law, event equivalence",
        checks::sampler_report(&model.channel, &model.geometry, &model.link, DESK_SAMPLES, cfg.sim.seed).map(|r| {
            (
                r.moment_rel_err < MOMENT_REL_TOL && r.distance_ks < DISTANCE_KS_TOL && r.event_mismatches == 0,
                format!(
                    "moment err {:.2e} (tol {MOMENT_REL_TOL}), KS {:.2e} (tol {DISTANCE_KS_TOL:e}), {} mismatches in {} draws",
                    r.moment_rel_err, r.distance_ks, r.event_mismatches, r.draws
                ),
            )
        }),
    )
}

fn determinism() -> CheckOutcome {
    let cfg = baseline();
    let mut outputs = Vec::new();
    for threads in THREAD_COUNTS {
        let csv = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())
            .and_then(|pool| {
                pool.install(|| cmd_outage_sweep(&cfg, Scheme::Both))
                    .map_err(|e| e.to_string())
            })
            .map(|o| o.csv.unwrap_or_default());
        match csv {
            Ok(c) => outputs.push(c),
            Err(e) => return CheckOutcome::new("8 sweep csv thread determinism", false, format!("error: {e}")),
        }
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    CheckOutcome::new(
        "8 sweep csv thread determinism",
        same,
        format!(
            "{} bytes, identical across {THREAD_COUNTS:?} threads: {same}",
            outputs[0].len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [fn() -> CheckOutcome; 8] = [
        pdf_grid_equivalence,
        normalization,
        cdf_equivalence,
        power_sweep,
        shadowing_sweep,
        distance_average,
        samplers,
        determinism,
    ];
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = c();
        println!("{} [{:.1} s]", outcome.line(), start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
