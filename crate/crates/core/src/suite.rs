//! Verification suites over a fixed battery of states.
//!
//! Each numbered criterion returns a list of [`Check`]s together with its
//! wall-clock budget. The battery is the 18 Gaussians with
//! `sigma2 in {0.5, 1, 2}`, `b in {-1, 0, 1}`, `p0 in {0, 2}`, plus a
//! symmetric two-packet state for the Cramer-Rao bound.
//!
//! The suites run in `f64`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bracket::{generator_check, DerivativeTable, OracleTable};
use crate::checks::{all_pass, Check, CheckKind};
use crate::dynamics::{
    evolve_t, gaussian_moments, holomorphy_check, nonunitarity_probe, run_trajectory,
    uncertainty_rates, FlowKind, TauStepper, TrajectoryConfig,
};
use crate::error::{QrelError, Result};
use crate::functionals::{Component, Convention, FunctionalTag, Kinematics, UncertaintyPair};
use crate::gaussian_ode::{free_spreading, GaussianOde, GaussianOdeState};
use crate::grid::{Field, Grid};
use crate::group::{dilate, mix_hk, product_law, transform_uncertainty};
use crate::oracle::{compare_derivatives, COMPARISON_DENSITY};
use crate::state::{make_gaussian, to_wave, GaussianParams, HydroState};

/// Dual-time window of every battery tau-run.
///
/// Rounding noise grows like `exp(k^2 tau / 2)` under the tau-flow. On the
/// reference grid the widest-spectrum members of the battery
/// (`sigma2 = 2`, `|b| = 1`) stay clean to about `tau = 0.09` at
/// `dtau = 1e-3`; the window keeps a factor of two in hand.
pub const TAU_WINDOW: f64 = 0.05;
pub const TAU_STEP: f64 = 1e-3;

/// Grid and units shared by a suite run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub grid: Grid<f64>,
    pub hbar: f64,
    pub mass: f64,
    pub convention: Convention,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            grid: Grid::new(1, 512, 40.0).expect("reference grid"),
            hbar: 1.0,
            mass: 1.0,
            convention: Convention::Consistent,
        }
    }
}

impl Settings {
    fn gaussian(&self, params: GaussianParams<f64>) -> Result<HydroState<f64>> {
        make_gaussian(params, &self.grid, self.hbar, self.mass)
    }

    /// Checks whose truth rests on the consistent `delta_x2 = 1/(4 I)` are
    /// informational under the literal convention.
    fn convention_kind(&self) -> CheckKind {
        match self.convention {
            Convention::Consistent => CheckKind::Asserted,
            Convention::PaperLiteral => CheckKind::Informational,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatteryState {
    pub label: String,
    pub params: GaussianParams<f64>,
    pub state: HydroState<f64>,
}

pub fn battery(settings: &Settings) -> Result<Vec<BatteryState>> {
    let mut out = Vec::with_capacity(18);
    for sigma2 in [0.5, 1.0, 2.0] {
        for b in [-1.0, 0.0, 1.0] {
            for p0 in [0.0, 2.0] {
                let params = GaussianParams { sigma2, b, p0, ..Default::default() };
                out.push(BatteryState {
                    label: format!("sigma2={sigma2},b={b},p0={p0}"),
                    params,
                    state: settings.gaussian(params)?,
                });
            }
        }
    }
    Ok(out)
}

/// `rho = N(-a, sigma2)/2 + N(a, sigma2)/2` with zero action; its position
/// variance is `sigma2 + a^2`.
pub fn bimodal(settings: &Settings, a: f64, sigma2: f64) -> Result<HydroState<f64>> {
    let g = &settings.grid;
    let norm = (2.0 * std::f64::consts::PI * sigma2).powf(-(g.dim() as f64) / 2.0);
    let rho = Field::from_fn(g, |x| {
        let rest: f64 = x[1..].iter().map(|v| v * v).sum();
        let lobe = |c: f64| (-((x[0] - c).powi(2) + rest) / (2.0 * sigma2)).exp();
        0.5 * norm * (lobe(-a) + lobe(a))
    });
    HydroState::new(rho, Field::from_fn(g, |_| 0.0), settings.hbar, settings.mass)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates so that a poisoned sweep cannot pass
    values.into_iter().fold(0.0, |m: f64, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

/// Outcome of one numbered criterion.
#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub runtime: Duration,
    pub budget: Duration,
}

impl CriterionOutcome {
    pub fn pass(&self) -> bool {
        all_pass(&self.checks) && self.runtime <= self.budget
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.is_failure())
    }
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let asserted = self.checks.iter().filter(|c| c.kind == CheckKind::Asserted).count();
        let failed = self.failures().count();
        write!(
            f,
            "criterion {:>2} {}: {} ({}/{} checks, {:.2} s of {} s)",
            self.id,
            if self.pass() { "PASS" } else { "FAIL" },
            self.title,
            asserted - failed,
            asserted,
            self.runtime.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

pub const CRITERIA: usize = 13;

const TITLES: [&str; CRITERIA] = [
    "group fixed point",
    "group law",
    "dilatation consistency",
    "bracket identities",
    "generator check",
    "Lorentz mixing",
    "t-flow",
    "tau-flow vs Gaussian ODE",
    "Lyapunov functional",
    "continuity under the tau-flow",
    "uncertainty rates",
    "classical limit",
    "Cramer-Rao bound",
];

const BUDGETS: [u64; CRITERIA] = [1, 1, 30, 300, 10, 30, 10, 60, 60, 60, 30, 10, 5];

/// Runs criterion `id` (1-based). An error inside the criterion becomes a
/// single failed check naming it.
pub fn criterion(id: usize, settings: &Settings) -> Result<CriterionOutcome> {
    if !(1..=CRITERIA).contains(&id) {
        return Err(QrelError::config("criterion", format!("expected 1..={CRITERIA}, got {id}")));
    }
    let start = Instant::now();
    let run = match id {
        1 => group_fixed_point(settings),
        2 => group_law(settings),
        3 => dilatation_consistency(settings),
        4 => bracket_identities(settings),
        5 => generator(settings),
        6 => lorentz_mixing(settings),
        7 => t_flow(settings),
        8 => tau_flow_oracle(settings),
        9 => lyapunov(settings),
        10 => continuity(settings),
        11 => rates(settings),
        12 => classical_limit(settings),
        _ => cramer_rao(settings),
    };
    let checks = run.unwrap_or_else(|e| vec![Check::failed(format!("criterion aborted: {e}"), "error")]);
    Ok(CriterionOutcome {
        id,
        title: TITLES[id - 1],
        checks,
        runtime: start.elapsed(),
        budget: Duration::from_secs(BUDGETS[id - 1]),
    })
}

pub fn group_fixed_point(s: &Settings) -> Result<Vec<Check>> {
    let q = s.hbar * s.hbar / 4.0;
    let worst = max_of(linspace(-3.0, 3.0, 50).into_iter().map(|a| (product_law(q, a, s.hbar) - q).abs()));
    Ok(vec![Check::residual("product_law(hbar^2/4, alpha) - hbar^2/4, 50 alphas", worst, 1e-14, "fixed point")])
}

pub fn group_law(s: &Settings) -> Result<Vec<Check>> {
    let u = UncertaintyPair::new(1.5, 0.9)?;
    let rel = |a: UncertaintyPair<f64>, b: UncertaintyPair<f64>| {
        ((a.dx2 - b.dx2).abs() / b.dx2.abs()).max((a.dp2 - b.dp2).abs() / b.dp2.abs())
    };
    let grid = linspace(-3.0, 3.0, 20);
    let mut compose = 0.0f64;
    let mut inverse = 0.0f64;
    for &a in &grid {
        let ta = transform_uncertainty(u, a, s.hbar)?;
        inverse = inverse.max(rel(transform_uncertainty(ta, -a, s.hbar)?, u));
        for &b in &grid {
            let chained = transform_uncertainty(transform_uncertainty(u, b, s.hbar)?, a, s.hbar)?;
            compose = compose.max(rel(chained, transform_uncertainty(u, a + b, s.hbar)?));
        }
    }
    let identity = rel(transform_uncertainty(u, 0.0, s.hbar)?, u);
    Ok(vec![
        Check::residual("T_a(T_b(u)) vs T_(a+b)(u), 20x20 lattice, relative", compose, 1e-12, "group law"),
        Check::residual("T_-a(T_a(u)) vs u, relative", inverse, 1e-12, "group law"),
        Check::residual("T_0(u) vs u, relative", identity, 0.0, "group law"),
    ])
}

pub fn dilatation_consistency(s: &Settings) -> Result<Vec<Check>> {
    let states = battery(s)?;
    let alphas = linspace(-3.0, 3.0, 25);
    let conv = s.convention;
    let per_state: Vec<[f64; 3]> = states
        .par_iter()
        .map(|b| -> Result<[f64; 3]> {
            let u0 = UncertaintyPair::of(&b.state, conv)?;
            let mut worst = [0.0f64; 3];
            for &a in &alphas {
                let u = UncertaintyPair::of(&dilate(&b.state, a), conv)?;
                let pred = transform_uncertainty(u0, a, s.hbar)?;
                worst[0] = worst[0].max((u.dx2 - pred.dx2).abs());
                worst[1] = worst[1].max((u.dp2 - pred.dp2).abs());
                worst[2] = worst[2].max((u.product() - product_law(u0.product(), a, s.hbar)).abs());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let col = |j: usize| max_of(per_state.iter().map(|w| w[j]));
    let tag = conv.name();
    let kind = s.convention_kind();
    let mut checks = vec![
        Check::residual(format!("delta_x2 of dilated states vs T_alpha ({tag}, 18 states x 25 alphas)"), col(0), 1e-9, "group law"),
        Check::residual(format!("delta_p2_q of dilated states vs T_alpha ({tag})"), col(1), 1e-9, "group law").with_kind(kind),
        Check::residual(format!("restored product law under dilatation ({tag})"), col(2), 1e-9, "group law").with_kind(kind),
    ];
    // the literal factor-2 in delta_x2, reproduced on the minimal Gaussian
    let minimal = s.gaussian(GaussianParams::minimal(1.0))?;
    let k = Kinematics::of(&minimal);
    let ratio = k.delta_x2(Convention::PaperLiteral)? / k.delta_x2(Convention::Consistent)?;
    checks.push(
        Check::within("paper-literal / consistent delta_x2 on the minimal Gaussian", 2.0, ratio, 1e-12, "Gaussian algebra")
            .informational(),
    );
    let literal = UncertaintyPair::of(&minimal, Convention::PaperLiteral)?;
    checks.push(
        Check::within(
            "paper-literal delta_x2 * delta_p2_q on the minimal Gaussian vs hbar^2/4",
            s.hbar * s.hbar / 4.0,
            literal.product(),
            1e-9,
            "Gaussian algebra",
        )
        .informational(),
    );
    Ok(checks)
}

pub fn bracket_identities(s: &Settings) -> Result<Vec<Check>> {
    use FunctionalTag::{HQ, KQ, S};
    let states = battery(s)?;
    let per_state: Vec<Vec<Check>> = states
        .par_iter()
        .map(|b| -> Result<Vec<Check>> {
            let st = &b.state;
            let k = Kinematics::of(st);
            let (h, kq) = (k.h_q(), k.k_q());
            let table = DerivativeTable::of(st)?;
            let mut antisym = 0.0f64;
            for a in FunctionalTag::ALL {
                for c in FunctionalTag::ALL {
                    antisym = antisym.max((table.bracket(a, c).value + table.bracket(c, a).value).abs());
                }
            }
            let oracle = OracleTable::of(st)?;
            let mut worst = [0.0f64; 2];
            for (j, comp) in [Component::Rho, Component::S].into_iter().enumerate() {
                for tag in FunctionalTag::ALL {
                    let closed = Field::new(st.grid().clone(), table.get(tag, comp).to_vec())?;
                    let cmp = compare_derivatives(&closed, &oracle.sweep(comp).field(tag), st, comp, COMPARISON_DENSITY);
                    // max(1e-8, 1e-6 scale): analytically zero fields compare in absolute terms
                    worst[j] = worst[j].max(cmp.max_abs_error / cmp.scale.max(1e-2));
                }
            }
            let l = &b.label;
            Ok(vec![
                Check::within(format!("{{S,H_q}} = K_q [{l}]"), kq, table.bracket(S, HQ).value, 1e-8f64.max(1e-6 * kq.abs()), "closed form"),
                Check::within(format!("{{S,K_q}} = H_q [{l}]"), h, table.bracket(S, KQ).value, 1e-8f64.max(1e-6 * h.abs()), "closed form"),
                Check::residual(format!("antisymmetry over all functional pairs [{l}]"), antisym, 1e-12, "bracket definition"),
                Check::residual(format!("d/drho closed form vs oracle, relative (absolute below 1e-8), rho > 1e-10 [{l}]"), worst[0], 1e-6, "finite-difference oracle"),
                Check::residual(format!("d/ds closed form vs oracle, relative (absolute below 1e-8), rho > 1e-10 [{l}]"), worst[1], 1e-6, "finite-difference oracle"),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(per_state.into_iter().flatten().collect())
}

pub fn generator(s: &Settings) -> Result<Vec<Check>> {
    let states = battery(s)?;
    let dalpha = 1e-4;
    let mut worst = 0.0f64;
    let mut bracket = 0.0f64;
    for b in &states {
        let r = generator_check(&b.state, dalpha)?;
        worst = worst.max(r.relative_residual());
        bracket = bracket.max(r.relative_bracket_error());
    }
    let mut checks = vec![
        Check::residual("d(delta_p2_q)/dalpha by centred difference vs closed form, relative, dalpha = 1e-4", worst, 1e-6, "closed form"),
        Check::residual("{delta_p2_q, S} vs closed form, relative", bracket, 1e-6, "closed form"),
    ];
    for params in [GaussianParams::minimal(1.0), GaussianParams { b: 1.0, ..GaussianParams::minimal(1.0) }] {
        let st = s.gaussian(params)?;
        let coarse = generator_check(&st, dalpha)?.residual;
        let fine = generator_check(&st, dalpha / 2.0)?.residual;
        checks.push(Check::within(
            format!("residual shrinkage under dalpha halving [sigma2={},b={}]", params.sigma2, params.b),
            4.0,
            coarse / fine,
            0.4,
            "second-order difference",
        ));
    }
    Ok(checks)
}

pub fn lorentz_mixing(s: &Settings) -> Result<Vec<Check>> {
    let states = battery(s)?;
    let alphas = linspace(-3.0, 3.0, 25);
    let per_state: Vec<[f64; 2]> = states
        .par_iter()
        .map(|b| {
            let k0 = Kinematics::of(&b.state);
            let (h0, q0) = (k0.h_q(), k0.k_q());
            let mut worst = [0.0f64; 2];
            for &a in &alphas {
                let k = Kinematics::of(&dilate(&b.state, a));
                let (h, q) = (k.h_q(), k.k_q());
                let (hp, qp) = mix_hk(h0, q0, a);
                worst[0] = worst[0].max((h - hp).abs()).max((q - qp).abs());
                worst[1] = worst[1].max(((h * h - q * q) - (h0 * h0 - q0 * q0)).abs());
            }
            worst
        })
        .collect();
    Ok(vec![
        Check::residual("(h_q, k_q) of dilated states vs mix_hk, 18 states x 25 alphas", max_of(per_state.iter().map(|w| w[0])), 1e-10, "Lorentz mixing"),
        Check::residual("h_q^2 - k_q^2 invariance", max_of(per_state.iter().map(|w| w[1])), 1e-10, "Lorentz mixing"),
    ])
}

pub fn t_flow(s: &Settings) -> Result<Vec<Check>> {
    let st = s.gaussian(GaussianParams::minimal(1.0))?;
    let w0 = to_wave(&st);
    let dp0 = Kinematics::of_wave(&w0).delta_p2_q();
    let (mut norm, mut dp, mut spread) = (0.0f64, 0.0f64, 0.0f64);
    let mut w = w0;
    let dt = 0.25;
    for step in 1..=16 {
        w = evolve_t(&w, dt);
        let t = dt * step as f64;
        let k = Kinematics::of_wave(&w);
        norm = norm.max((w.norm() - 1.0).abs());
        dp = dp.max((k.delta_p2_q() - dp0).abs());
        spread = spread.max((k.sigma_x2() - free_spreading(1.0, t, s.hbar, s.mass)).abs());
    }
    Ok(vec![
        Check::residual("norm drift, t in [0, 4]", norm, 1e-14, "unitarity"),
        Check::residual("delta_p2_q drift", dp, 1e-12, "conservation"),
        Check::residual("sigma_x2(t) vs sigma0^2 + (hbar t / 2 m sigma0)^2", spread, 1e-8, "closed form"),
    ])
}

/// Terminal `|sigma2 - ode| + |b - ode|` of a tau-run from `params`.
fn tau_terminal_error(s: &Settings, params: GaussianParams<f64>, tau: f64, dtau: f64) -> Result<(f64, f64, f64)> {
    let st = s.gaussian(params)?;
    let mut w = to_wave(&st);
    let mut stepper = TauStepper::new(st.grid());
    let steps = (tau / dtau).round() as usize;
    for step in 0..steps {
        stepper.check(&w, step)?;
        w = stepper.step(&w, dtau);
    }
    stepper.check(&w, steps)?;
    let ode = GaussianOde::new(FlowKind::Tau, s.hbar, s.mass, st.grid().dim());
    let y = ode.integrate(GaussianOdeState::from(params), tau, 1e-12)?;
    let m = gaussian_moments(&w);
    Ok(((m.sigma2 - y.sigma2).abs(), (m.b - y.b).abs(), (w.norm() - 1.0).abs()))
}

pub fn tau_flow_oracle(s: &Settings) -> Result<Vec<Check>> {
    let p = GaussianParams::minimal(1.0);
    let (es, eb, norm) = tau_terminal_error(s, p, 0.5, 1e-3)?;
    let (fs, fb, _) = tau_terminal_error(s, p, 0.5, 5e-4)?;
    Ok(vec![
        Check::residual("|sigma2 - ODE| at tau = 0.5, dtau = 1e-3", es, 1e-6, "ODE oracle"),
        Check::residual("|b - ODE| at tau = 0.5, dtau = 1e-3", eb, 1e-6, "ODE oracle"),
        Check::within("terminal error ratio under dtau halving", 4.0, (es + eb) / (fs + fb), 0.4, "second-order splitting"),
        Check::residual("norm drift", norm, 1e-10, "conservation"),
    ])
}

/// Records of one battery tau-run.
struct TauRun {
    label: String,
    records: Vec<crate::dynamics::TrajectoryRecord<f64>>,
    failure: Option<QrelError>,
    p_drift: f64,
}

fn battery_tau_runs(s: &Settings) -> Result<Vec<TauRun>> {
    let states = battery(s)?;
    let steps = (TAU_WINDOW / TAU_STEP).round() as usize;
    states
        .par_iter()
        .map(|b| {
            let cfg = TrajectoryConfig { flow: FlowKind::Tau, step: TAU_STEP, steps, record_every: 1 };
            let tr = run_trajectory(&b.state, cfg)?;
            let p0 = Kinematics::of(&b.state).p_translation();
            let p_drift = (Kinematics::of_wave(&tr.final_wave).p_translation() - p0).abs();
            Ok(TauRun { label: b.label.clone(), records: tr.records, failure: tr.failure, p_drift })
        })
        .collect()
}

fn guard_check(run: &TauRun) -> Option<Check> {
    run.failure.as_ref().map(|e| Check::failed(format!("tau-run stopped early [{}]: {e}", run.label), "integrator guard"))
}

pub fn lyapunov(s: &Settings) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for run in battery_tau_runs(s)? {
        checks.extend(guard_check(&run));
        let r = &run.records;
        let min_step = r.windows(2).map(|w| w[1].s_gen - w[0].s_gen).fold(f64::INFINITY, f64::min);
        let rate = max_of(r.windows(3).map(|w| {
            let rate = (w[2].s_gen - w[0].s_gen) / (w[2].time - w[0].time);
            (rate - w[1].h_q).abs() / w[1].h_q.abs()
        }));
        let min_h = r.iter().map(|x| x.h_q).fold(f64::INFINITY, f64::min);
        let l = &run.label;
        checks.push(Check::at_least(format!("smallest s_gen increment [{l}]"), 0.0, min_step, "Lyapunov property"));
        checks.push(Check::residual(format!("d(s_gen)/dtau vs h_q, relative [{l}]"), rate, 1e-5, "Lyapunov property"));
        checks.push(Check::at_least(format!("smallest h_q [{l}]"), 0.0, min_h, "Lyapunov property"));
    }
    Ok(checks)
}

pub fn continuity(s: &Settings) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for run in battery_tau_runs(s)? {
        checks.extend(guard_check(&run));
        let worst = max_of(run.records.iter().map(|r| r.continuity_residual));
        checks.push(Check::residual(format!("continuity residual, dtau = 1e-3 [{}]", run.label), worst, 1e-5, "continuity equation"));
    }
    Ok(checks)
}

/// Conservation along the battery tau-runs: `k_q`, norm, `P_translation`.
pub fn tau_invariants(s: &Settings) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for run in battery_tau_runs(s)? {
        checks.extend(guard_check(&run));
        let r = &run.records;
        let k0 = r[0].k_q;
        let l = &run.label;
        checks.push(Check::residual(format!("k_q drift [{l}]"), max_of(r.iter().map(|x| (x.k_q - k0).abs())), 1e-6, "conservation"));
        checks.push(Check::residual(format!("norm drift [{l}]"), max_of(r.iter().map(|x| (x.norm - 1.0).abs())), 1e-10, "conservation"));
        checks.push(Check::residual(format!("P_translation drift [{l}]"), run.p_drift, 1e-8, "conservation"));
    }
    Ok(checks)
}

pub fn rates(s: &Settings) -> Result<Vec<Check>> {
    let chirped = to_wave(&s.gaussian(GaussianParams { b: 1.0, ..GaussianParams::minimal(1.0) })?);
    let r = uncertainty_rates(&chirped, FlowKind::Tau)?;
    let mut checks = vec![
        Check::within("(d_tau dx2)(d_tau dp2) [sigma2=1,b=1]", -2.0, r.product(), 1e-4, "Gaussian algebra"),
        Check::within("d_tau delta_x2 [sigma2=1,b=1]", 2.0, r.d_dx2, 1e-5, "Gaussian algebra"),
        Check::within("d_tau delta_p2_q [sigma2=1,b=1]", -1.0, r.d_dp2, 1e-5, "Gaussian algebra"),
    ];
    let states = battery(s)?;
    let measured: Vec<(String, f64, f64, f64)> = states
        .par_iter()
        .map(|b| -> Result<_> {
            let w = to_wave(&b.state);
            let tau = uncertainty_rates(&w, FlowKind::Tau)?;
            let t = uncertainty_rates(&w, FlowKind::T)?;
            Ok((b.label.clone(), b.params.b, tau.product(), t.d_dx2))
        })
        .collect::<Result<_>>()?;
    for (label, b, product, d_t) in measured {
        let c = Check::at_most(format!("(d_tau dx2)(d_tau dp2) <= 0 [{label}]"), 0.0, product, "sign claim");
        // b = 0 is the equality case of a strict claim; reported only
        checks.push(if b == 0.0 { c.informational() } else { c });
        checks.push(Check::at_least(format!("d_t delta_x2 >= 0 [{label}]"), 0.0, d_t, "sign claim").informational());
    }
    let contracting = to_wave(&s.gaussian(GaussianParams { b: -0.5, ..GaussianParams::minimal(1.0) })?);
    let d = uncertainty_rates(&contracting, FlowKind::T)?.d_dx2;
    checks.push(Check::at_least("d_t delta_x2 >= 0 on a contracting packet [sigma2=1,b=-0.5]", 0.0, d, "sign claim").informational());
    Ok(checks)
}

pub fn classical_limit(s: &Settings) -> Result<Vec<Check>> {
    let base = s.gaussian(GaussianParams { b: 1.0, ..GaussianParams::minimal(1.0) })?;
    let hbars = [1.0, 0.5, 0.25, 0.125];
    let mut h_gap = Vec::new();
    let mut k_gap = Vec::new();
    for &hb in &hbars {
        let k = Kinematics::of(&base.with_hbar(hb * s.hbar)?);
        h_gap.push((k.h_q() - k.h_cl()).abs());
        k_gap.push((k.k_q() - k.h_cl()).abs());
    }
    let slope = |ys: &[f64]| {
        let xs: Vec<f64> = hbars.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    };
    Ok(vec![
        Check::within("log-log slope of |h_q - h_cl| in hbar", 2.0, slope(&h_gap), 0.01, "classical limit"),
        Check::within("log-log slope of |k_q - h_cl| in hbar", 2.0, slope(&k_gap), 0.01, "classical limit"),
    ])
}

pub fn cramer_rao(s: &Settings) -> Result<Vec<Check>> {
    let conv = s.convention;
    let kind = s.convention_kind();
    let mut checks = Vec::new();
    for b in battery(s)? {
        let k = Kinematics::of(&b.state);
        checks.push(
            Check::within(format!("sigma_x2 = delta_x2 on a Gaussian [{}]", b.label), k.sigma_x2(), k.delta_x2(conv)?, 1e-9, "Cramer-Rao equality")
                .with_kind(kind),
        );
    }
    let two = bimodal(s, 3.0, 1.0)?;
    let k = Kinematics::of(&two);
    checks.push(Check::within("sigma_x2 of the bimodal state", 10.0, k.sigma_x2(), 1e-8, "closed form"));
    checks.push(
        Check::at_least("sigma_x2 - delta_x2 on the bimodal state", 0.0, k.sigma_x2() - k.delta_x2(conv)?, "Cramer-Rao bound").with_kind(kind),
    );
    Ok(checks)
}

/// Holomorphy of `H_q + i K_q` in `t + i tau` and the nonunitarity probe.
pub fn cross_flow(s: &Settings) -> Result<Vec<Check>> {
    let states = battery(s)?;
    let reports: Vec<(String, f64)> = states
        .par_iter()
        .map(|b| Ok((b.label.clone(), holomorphy_check(&to_wave(&b.state))?.sum())))
        .collect::<Result<_>>()?;
    let mut checks: Vec<Check> = reports
        .into_iter()
        .map(|(l, sum)| Check::residual(format!("d_t k_q + d_tau h_q [{l}]"), sum.abs(), 1e-6, "holomorphy"))
        .collect();
    let chirped = to_wave(&s.gaussian(GaussianParams { b: 1.0, ..GaussianParams::minimal(1.0) })?);
    let r = holomorphy_check(&chirped)?;
    checks.push(Check::within("d_t k_q = b / 2 sigma2 [sigma2=1,b=1]", 0.5, r.dk_dt, 1e-5, "Gaussian algebra"));
    let a = to_wave(&s.gaussian(GaussianParams::minimal(1.0))?);
    let b = to_wave(&s.gaussian(GaussianParams { x0: 1.0, ..GaussianParams::minimal(1.0) })?);
    let t = nonunitarity_probe(&a, &b, FlowKind::T, 1e-3, 100)?;
    let tau = nonunitarity_probe(&a, &b, FlowKind::Tau, 1e-3, 100)?;
    checks.push(Check::residual("overlap change under the t-flow", t.overlap_change(), 1e-12, "unitarity"));
    checks.push(Check::at_least("overlap change under the tau-flow", 0.0, tau.overlap_change(), "nonunitarity probe").informational());
    Ok(checks)
}

/// Named groups of checks selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Group,
    Functionals,
    Brackets,
    Dynamics,
    ClassicalLimit,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Group, Suite::Functionals, Suite::Brackets, Suite::Dynamics, Suite::ClassicalLimit];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Group => "group",
            Suite::Functionals => "functionals",
            Suite::Brackets => "brackets",
            Suite::Dynamics => "dynamics",
            Suite::ClassicalLimit => "classical-limit",
        }
    }

    /// Numbered criteria covered by the suite.
    pub fn criteria(self) -> &'static [usize] {
        match self {
            Suite::Group => &[1, 2, 3, 6],
            Suite::Functionals => &[13],
            Suite::Brackets => &[4, 5],
            Suite::Dynamics => &[7, 8, 9, 10, 11],
            Suite::ClassicalLimit => &[12],
        }
    }

    /// Criterion outcomes plus the suite's checks outside the numbered
    /// criteria.
    pub fn run(self, settings: &Settings) -> Result<(Vec<CriterionOutcome>, Vec<Check>)> {
        let outcomes = self.criteria().iter().map(|&id| criterion(id, settings)).collect::<Result<_>>()?;
        let extra = match self {
            Suite::Group => mixing_and_times(settings),
            Suite::Dynamics => {
                let mut v = tau_invariants(settings)?;
                v.extend(cross_flow(settings)?);
                v
            }
            _ => Vec::new(),
        };
        Ok((outcomes, extra))
    }
}

fn mixing_and_times(s: &Settings) -> Vec<Check> {
    let _ = s;
    let (t, tau) = crate::group::mix_times(1.0, 0.0, 2f64.ln());
    vec![
        Check::within("mix_times(1, 0, ln 2).t", 1.25, t, 1e-12, "closed form"),
        Check::within("mix_times(1, 0, ln 2).tau", 0.75, tau, 1e-12, "closed form"),
    ]
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = QrelError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| QrelError::config("suite", format!("unknown suite `{s}`; expected one of group, functionals, brackets, dynamics, classical-limit")))
    }
}
