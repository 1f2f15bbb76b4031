//! The three subcommands. Each writes its files under the scenario's output
//! directory and returns whether every asserted check held.

use std::fs;

use anyhow::{Context, Result};
use qrel_core::checks::CheckKind;
use qrel_core::{
    dilate, mix_hk, mix_times, product_law, run_trajectory, transform_uncertainty, Kinematics, QrelError,
    TrajectoryConfig, UncertaintyPair,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, Scenario};
use crate::report::{self, CheckRecord, CriterionRecord, Num};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

/// Configuration errors keep their identity so that `main` maps them to
/// exit code 2.
fn lift(e: QrelError) -> anyhow::Error {
    match e {
        QrelError::Configuration { .. } => ConfigError::from(e).into(),
        other => other.into(),
    }
}

#[derive(Serialize)]
struct GridInfo {
    dim: usize,
    n: usize,
    length: Num,
    hbar: Num,
    mass: Num,
}

impl GridInfo {
    fn of(s: &Scenario) -> Self {
        Self { dim: s.grid.dim(), n: s.grid.n(), length: Num(s.grid.length()), hbar: Num(s.hbar), mass: Num(s.mass) }
    }
}

#[derive(Serialize)]
struct SuiteRecord {
    name: &'static str,
    pass: bool,
    criteria: Vec<CriterionRecord>,
    checks: Vec<CheckRecord>,
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    convention: &'static str,
    grid: GridInfo,
    pass: bool,
    asserted: usize,
    failed: usize,
    informational: usize,
    suites: Vec<SuiteRecord>,
}

pub fn verify(s: &Scenario) -> Result<Status> {
    let settings = s.settings();
    let mut suites = Vec::new();
    let (mut asserted, mut failed, mut informational) = (0, 0, 0);
    for suite in &s.suites {
        let (outcomes, extra) = suite.run(&settings).map_err(lift)?;
        for o in &outcomes {
            println!("{o}");
            for c in o.checks.iter().filter(|c| !c.pass) {
                println!("    {c}");
            }
        }
        for c in extra.iter().filter(|c| !c.pass) {
            println!("    {c}");
        }
        let all = outcomes.iter().flat_map(|o| o.checks.iter()).chain(extra.iter());
        for c in all.clone() {
            match c.kind {
                CheckKind::Asserted => asserted += 1,
                CheckKind::Informational => informational += 1,
            }
            if c.is_failure() {
                failed += 1;
            }
        }
        let pass = all.clone().all(|c| !c.is_failure());
        println!("suite {}: {}", suite.name(), if pass { "pass" } else { "FAIL" });
        suites.push(SuiteRecord {
            name: suite.name(),
            pass,
            criteria: outcomes.iter().map(CriterionRecord::from).collect(),
            checks: extra.iter().map(CheckRecord::from).collect(),
        });
    }
    let pass = failed == 0;
    let rep = VerifyReport {
        command: "verify",
        convention: s.convention.name(),
        grid: GridInfo::of(s),
        pass,
        asserted,
        failed,
        informational,
        suites,
    };
    let path = s.output.join("report.json");
    report::write_json(&path, &rep)?;
    println!(
        "verify: {} ({asserted} asserted checks, {failed} failed, {informational} informational); report at {}",
        if pass { "pass" } else { "FAIL" },
        path.display()
    );
    Ok(if pass { Status::Pass } else { Status::Fail })
}

#[derive(Serialize)]
struct EvolveSummary {
    command: &'static str,
    flow: &'static str,
    step: Num,
    steps: usize,
    record_every: usize,
    grid: GridInfo,
    records: usize,
    completed: bool,
    last_valid_record: usize,
    last_valid_step: usize,
    failure: Option<String>,
    tau_clamped_samples: usize,
    initial: RecordValues,
    last: RecordValues,
}

#[derive(Serialize)]
struct RecordValues {
    time: Num,
    h_q: Num,
    k_q: Num,
    s_gen: Num,
    delta_x2: Num,
    delta_p2_q: Num,
    norm: Num,
}

impl From<&qrel_core::TrajectoryRecord<f64>> for RecordValues {
    fn from(r: &qrel_core::TrajectoryRecord<f64>) -> Self {
        Self {
            time: Num(r.time),
            h_q: Num(r.h_q),
            k_q: Num(r.k_q),
            s_gen: Num(r.s_gen),
            delta_x2: Num(r.delta_x2),
            delta_p2_q: Num(r.delta_p2_q),
            norm: Num(r.norm),
        }
    }
}

pub fn evolve(s: &Scenario) -> Result<Status> {
    let state = s.state()?;
    let cfg = TrajectoryConfig { flow: s.flow, step: s.step, steps: s.steps, record_every: s.record_every };
    let traj = run_trajectory(&state, cfg).map_err(lift)?;
    let csv = s.output.join("trajectory.csv");
    report::write_trajectory(&csv, &traj.records)?;
    let last_index = traj.records.len() - 1;
    let last = &traj.records[last_index];
    let summary = EvolveSummary {
        command: "evolve",
        flow: s.flow.name(),
        step: Num(s.step),
        steps: s.steps,
        record_every: s.record_every,
        grid: GridInfo::of(s),
        records: traj.records.len(),
        completed: traj.failure.is_none(),
        last_valid_record: last_index,
        last_valid_step: last.step,
        failure: traj.failure.as_ref().map(|e| e.to_string()),
        tau_clamped_samples: traj.diagnostics.clamp_count,
        initial: (&traj.records[0]).into(),
        last: last.into(),
    };
    report::write_json(&s.output.join("summary.json"), &summary)?;
    match &traj.failure {
        None => {
            println!("evolve: {} records of the {} written to {}", traj.records.len(), s.flow.name(), csv.display());
            Ok(Status::Pass)
        }
        Some(e) => {
            eprintln!(
                "evolve: integrator guard tripped: {e}; last valid record index {last_index} (step {})",
                last.step
            );
            Ok(Status::Fail)
        }
    }
}

pub const TRANSFORM_HEADER: [&str; 20] = [
    "alpha",
    "dx2",
    "dp2",
    "product",
    "h_q",
    "k_q",
    "dx2_pred",
    "dp2_pred",
    "product_pred",
    "h_q_pred",
    "k_q_pred",
    "t_mixed",
    "tau_mixed",
    "res_dx2",
    "res_dp2",
    "res_product",
    "res_h_q",
    "res_k_q",
    "res_interval",
    "max_residual",
];

/// Residual tolerance reported alongside the sweep.
pub const TRANSFORM_TOLERANCE: f64 = 1e-9;

#[derive(Serialize)]
struct TransformSummary {
    command: &'static str,
    convention: &'static str,
    grid: GridInfo,
    alphas: usize,
    max_residual: Num,
    worst_alpha: Num,
    tolerance: Num,
    within_tolerance: bool,
}

pub fn transform(s: &Scenario) -> Result<Status> {
    let state = s.state()?;
    let u0 = UncertaintyPair::of(&state, s.convention).map_err(lift)?;
    let k0 = Kinematics::of(&state);
    let (h0, q0) = (k0.h_q(), k0.k_q());
    let rows = s
        .alphas
        .par_iter()
        .map(|&a| -> Result<Vec<f64>> {
            let d = dilate(&state, a);
            let u = UncertaintyPair::of(&d, s.convention).map_err(lift)?;
            let k = Kinematics::of(&d);
            let pred = transform_uncertainty(u0, a, s.hbar).map_err(lift)?;
            let prod_pred = product_law(u0.product(), a, s.hbar);
            let (h_pred, k_pred) = mix_hk(h0, q0, a);
            let (t, tau) = mix_times(1.0, 0.0, a);
            let res = [
                (u.dx2 - pred.dx2).abs(),
                (u.dp2 - pred.dp2).abs(),
                (u.product() - prod_pred).abs(),
                (k.h_q() - h_pred).abs(),
                (k.k_q() - k_pred).abs(),
                (t * t - tau * tau - 1.0).abs(),
            ];
            let worst = res.iter().fold(0.0f64, |m, &r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) });
            let mut row = vec![a, u.dx2, u.dp2, u.product(), k.h_q(), k.k_q()];
            row.extend([pred.dx2, pred.dp2, prod_pred, h_pred, k_pred, t, tau]);
            row.extend(res);
            row.push(worst);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let table = s.output.join("transform.csv");
    report::write_table(&table, &TRANSFORM_HEADER, &rows)?;
    let (worst_alpha, max_residual) = rows
        .iter()
        .map(|r| (r[0], r[r.len() - 1]))
        .fold((rows[0][0], 0.0f64), |(wa, wm), (a, m)| if m > wm || m.is_nan() { (a, m) } else { (wa, wm) });
    let within = max_residual <= TRANSFORM_TOLERANCE;
    let summary = TransformSummary {
        command: "transform",
        convention: s.convention.name(),
        grid: GridInfo::of(s),
        alphas: rows.len(),
        max_residual: Num(max_residual),
        worst_alpha: Num(worst_alpha),
        tolerance: Num(TRANSFORM_TOLERANCE),
        within_tolerance: within,
    };
    report::write_json(&s.output.join("summary.json"), &summary)?;
    println!(
        "transform: {} alphas, max residual {} at alpha = {} ({} {:e}); table at {}",
        rows.len(),
        report::sci(max_residual),
        worst_alpha,
        if within { "within" } else { "exceeds" },
        TRANSFORM_TOLERANCE,
        table.display()
    );
    Ok(Status::Pass)
}

/// Creates the output directory.
pub fn prepare(s: &Scenario) -> Result<()> {
    fs::create_dir_all(&s.output).with_context(|| format!("creating output directory {}", s.output.display()))
}
