//! Evolution in the two times.
//!
//! The t-flow is the free Schrodinger equation, applied exactly in Fourier
//! space. The tau-flow
//! `i hbar d_tau psi = -(hbar^2/2m) lap psi + W psi`,
//! `W = (hbar^2/m) lap|psi| / |psi|`,
//! is advanced by Strang splitting: half a kinetic step, a pointwise phase
//! rotation by the real potential `W`, half a kinetic step. `W` depends on
//! `|psi|` only, so the rotation is exact for the frozen modulus and the
//! norm is conserved by construction.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{QrelError, Result};
use crate::functionals::{Convention, FunctionalTag, Kinematics};
use crate::grid::{Field, Grid, RealField};
use crate::scalar::Real;
use crate::state::{from_wave, HydroState, PhaseExtraction, WaveField, RHO_FLOOR};

/// Bound on `|W|` in units of `hbar = m = 1`.
pub const W_MAX: f64 = 1e6;
/// The tau-flow refuses to shrink the per-axis variance below this many
/// squared grid spacings.
pub const RESOLUTION_FACTOR: f64 = 25.0;
/// Relative density that counts as occupied for node detection.
const NODE_SUPPORT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowKind {
    /// Ordinary time, generated by `H_q`.
    T,
    /// Dual time, generated by `K_q`.
    Tau,
}

impl FlowKind {
    pub fn name(self) -> &'static str {
        match self {
            FlowKind::T => "t-flow",
            FlowKind::Tau => "tau-flow",
        }
    }

    pub fn generator(self) -> FunctionalTag {
        match self {
            FlowKind::T => FunctionalTag::HQ,
            FlowKind::Tau => FunctionalTag::KQ,
        }
    }

    /// Sign of the quantum potential term in `ds/dtheta`.
    fn quantum_sign<T: Real>(self) -> T {
        match self {
            FlowKind::T => T::one(),
            FlowKind::Tau => -T::one(),
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FlowKind {
    type Err = QrelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" | "t-flow" => Ok(FlowKind::T),
            "tau" | "tau-flow" => Ok(FlowKind::Tau),
            other => Err(QrelError::config("flow", format!("expected `t-flow` or `tau-flow`, got `{other}`"))),
        }
    }
}

/// Multiplies every Fourier mode by `exp(-i hbar k^2 dt / 2m)`.
fn kinetic<T: Real>(grid: &Grid<T>, k2: &[T], psi: &[Complex<T>], dt: T, hbar: T, mass: T) -> Vec<Complex<T>> {
    let mut spec = grid.spectrum(psi);
    let rate = -hbar * dt / (T::cst(2.0) * mass);
    for (v, &k) in spec.iter_mut().zip(k2) {
        *v = *v * Complex::from_polar(T::one(), rate * k);
    }
    grid.synthesize(spec)
}

/// Exact free evolution over `dt`.
pub fn evolve_t<T: Real>(w: &WaveField<T>, dt: T) -> WaveField<T> {
    if dt == T::zero() {
        return w.clone();
    }
    let grid = w.grid();
    let psi = kinetic(grid, &grid.wavenumbers_sq(), w.psi().values(), dt, w.hbar(), w.mass());
    WaveField::from_parts(Field::new(grid.clone(), psi).expect("same grid"), w.hbar(), w.mass())
}

/// Counters of the tau-flow integrator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TauDiagnostics {
    pub steps: usize,
    /// Samples at which `|W|` was clamped to `W_MAX`, summed over steps.
    pub clamp_count: usize,
    pub max_abs_w: f64,
}

/// The tau-flow potential `W` and the number of clamped samples.
pub fn tau_potential<T: Real>(w: &WaveField<T>) -> (Vec<T>, usize) {
    let grid = w.grid();
    let amp: Vec<T> = w.psi().values().iter().map(|p| p.norm()).collect();
    let lap = grid.laplacian_real(&amp);
    let floor = T::cst(RHO_FLOOR).sqrt();
    let scale = w.hbar() * w.hbar() / w.mass();
    let limit = T::cst(W_MAX);
    let mut clamped = 0;
    let pot = lap
        .iter()
        .zip(&amp)
        .map(|(&l, &a)| {
            let v = scale * l / a.max(floor);
            if v.abs() > limit {
                clamped += 1;
                limit.copysign(v)
            } else {
                v
            }
        })
        .collect();
    (pot, clamped)
}

/// Stateful tau-flow stepper; caches the wavenumber table.
#[derive(Clone, Debug)]
pub struct TauStepper<T: Real> {
    k2: Vec<T>,
    grid: Grid<T>,
    filter: SpectralFilter<T>,
    /// `k_q` and `h_q` at the first check.
    reference: Option<(T, T)>,
    pub diagnostics: TauDiagnostics,
}

/// Treatment of high Fourier modes during tau steps.
///
/// Perturbations at wavenumber `k` grow like `exp(hbar k^2 tau / 2m)` under
/// the tau-flow: `sqrt(rho) exp(s/hbar)` obeys a backward heat equation.
/// Rounding noise therefore has to be removed where the state itself has no
/// spectral content, or it swamps the packet within a few hundredths of a
/// time unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralFilter<T> {
    None,
    /// Zero every mode with `|k| > cutoff`.
    Cutoff(T),
    /// Zero every mode whose amplitude is below this fraction of the largest.
    Relative(T),
}

/// The tau-flow stops once `k_q` has drifted by more than this fraction of
/// the initial `h_q`. The flow conserves its own generator, so the drift
/// measures lost accuracy, which sets in abruptly once amplified noise
/// reaches the packet.
pub const GENERATOR_DRIFT: f64 = 1e-5;

/// Default relative level of [`SpectralFilter::Relative`].
pub const FILTER_LEVEL: f64 = 1e-12;

impl<T: Real> Default for SpectralFilter<T> {
    fn default() -> Self {
        SpectralFilter::Relative(T::cst(FILTER_LEVEL))
    }
}

impl<T: Real> TauStepper<T> {
    pub fn new(grid: &Grid<T>) -> Self {
        Self {
            k2: grid.wavenumbers_sq(),
            grid: grid.clone(),
            filter: SpectralFilter::default(),
            reference: None,
            diagnostics: TauDiagnostics::default(),
        }
    }

    pub fn with_filter(mut self, filter: SpectralFilter<T>) -> Self {
        self.filter = filter;
        self
    }

    fn kinetic(&self, psi: &[Complex<T>], dt: T, hbar: T, mass: T) -> Vec<Complex<T>> {
        let mut spec = self.grid.spectrum(psi);
        let rate = -hbar * dt / (T::cst(2.0) * mass);
        let zero = Complex::new(T::zero(), T::zero());
        match self.filter {
            SpectralFilter::None => {}
            SpectralFilter::Cutoff(c) => {
                for (v, &k) in spec.iter_mut().zip(&self.k2) {
                    if k > c * c {
                        *v = zero;
                    }
                }
            }
            SpectralFilter::Relative(level) => {
                let peak = spec.iter().fold(T::zero(), |m, v| m.max(v.norm()));
                for v in spec.iter_mut() {
                    if v.norm() < level * peak {
                        *v = zero;
                    }
                }
            }
        }
        for (v, &k) in spec.iter_mut().zip(&self.k2) {
            *v = *v * Complex::from_polar(T::one(), rate * k);
        }
        self.grid.synthesize(spec)
    }

    /// One Strang step without guards. `dtau` may be negative.
    pub fn step(&mut self, w: &WaveField<T>, dtau: T) -> WaveField<T> {
        let (hbar, mass) = (w.hbar(), w.mass());
        let half = dtau / T::cst(2.0);
        let psi = self.kinetic(w.psi().values(), half, hbar, mass);
        let mid = WaveField::from_parts(Field::new(self.grid.clone(), psi).expect("same grid"), hbar, mass);
        let (pot, clamped) = tau_potential(&mid);
        let max_w = pot.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let psi: Vec<Complex<T>> = mid
            .psi()
            .values()
            .iter()
            .zip(&pot)
            .map(|(p, &v)| *p * Complex::from_polar(T::one(), -v * dtau / hbar))
            .collect();
        let psi = self.kinetic(&psi, half, hbar, mass);
        self.diagnostics.steps += 1;
        self.diagnostics.clamp_count += clamped;
        self.diagnostics.max_abs_w = self.diagnostics.max_abs_w.max(max_w.as_f64());
        WaveField::from_parts(Field::new(self.grid.clone(), psi).expect("same grid"), hbar, mass)
    }

    /// Resolution, node and generator-drift guards; `step` is the number of
    /// completed steps. The first call fixes the reference generator.
    pub fn check(&mut self, w: &WaveField<T>, step: usize) -> Result<()> {
        let h = self.grid.spacing();
        let var = axis_variance(w);
        let limit = T::cst(RESOLUTION_FACTOR) * h * h;
        if !(var > limit) {
            return Err(QrelError::StepSize {
                step,
                reason: format!(
                    "per-axis variance {var:e} fell below {RESOLUTION_FACTOR} spacing^2 = {limit:e}; the grid no longer resolves the packet"
                ),
            });
        }
        if let Some(at) = interior_node(w) {
            return Err(QrelError::Degenerate(format!(
                "wave function developed a node at sample {at} after step {step}"
            )));
        }
        let k = Kinematics::of_wave(w);
        let kq = k.k_q();
        let (k0, h0) = *self.reference.get_or_insert((kq, k.h_q()));
        let drift = (kq - k0).abs() / h0;
        if !(drift <= T::cst(GENERATOR_DRIFT)) {
            return Err(QrelError::StepSize {
                step,
                reason: format!(
                    "k_q drifted by {drift:e} of h_q; amplified high-wavenumber noise has reached the packet"
                ),
            });
        }
        Ok(())
    }
}

/// Tau-flow over `steps` steps of `dtau`, with the resolution and node
/// guards checked before every step.
pub fn evolve_tau<T: Real>(w: &WaveField<T>, dtau: T, steps: usize) -> Result<WaveField<T>> {
    evolve_tau_with(w, dtau, steps).map(|(w, _)| w)
}

/// As [`evolve_tau`], also returning the integrator counters.
pub fn evolve_tau_with<T: Real>(w: &WaveField<T>, dtau: T, steps: usize) -> Result<(WaveField<T>, TauDiagnostics)> {
    let mut stepper = TauStepper::new(w.grid());
    let mut cur = w.clone();
    if dtau == T::zero() {
        return Ok((cur, stepper.diagnostics));
    }
    for step in 0..steps {
        stepper.check(&cur, step)?;
        cur = stepper.step(&cur, dtau);
    }
    stepper.check(&cur, steps)?;
    Ok((cur, stepper.diagnostics))
}

/// Variance of `|psi|^2` per axis, `sigma_x2 / dim`.
pub fn axis_variance<T: Real>(w: &WaveField<T>) -> T {
    let grid = w.grid();
    let rho: Vec<T> = w.psi().values().iter().map(|p| p.norm_sqr()).collect();
    let mut total = T::zero();
    for axis in 0..grid.dim() {
        let x = grid.coordinates(axis);
        let mean = grid.integrate_with(|i| rho[i] * x[i]);
        total += grid.integrate_with(|i| rho[i] * (x[i] - mean).powi(2));
    }
    total / T::from_count(grid.dim())
}

/// First sample where the density drops below the floor between two
/// occupied samples of the same grid line.
pub fn interior_node<T: Real>(w: &WaveField<T>) -> Option<usize> {
    let grid = w.grid();
    let rho: Vec<T> = w.psi().values().iter().map(|p| p.norm_sqr()).collect();
    let max = rho.iter().copied().fold(T::zero(), T::max);
    let occupied = max * T::cst(NODE_SUPPORT);
    let floor = T::cst(RHO_FLOOR);
    for axis in 0..grid.dim() {
        for start in 0..grid.len() {
            if grid.axis_index(start, axis) != 0 {
                continue;
            }
            let line: Vec<usize> = grid.line_through(start, axis).collect();
            let first = line.iter().position(|&i| rho[i] > occupied);
            let last = line.iter().rposition(|&i| rho[i] > occupied);
            if let (Some(a), Some(b)) = (first, last) {
                if let Some(&i) = line[a..=b].iter().find(|&&i| rho[i] < floor) {
                    return Some(i);
                }
            }
        }
    }
    None
}

/// Advances by `dtheta` along `flow` with a single step: exact for the
/// t-flow, one Strang step for the tau-flow.
pub fn flow_step<T: Real>(w: &WaveField<T>, flow: FlowKind, dtheta: T) -> WaveField<T> {
    match flow {
        FlowKind::T => evolve_t(w, dtheta),
        FlowKind::Tau => TauStepper::new(w.grid()).step(w, dtheta),
    }
}

/// `(d rho/d theta, d s/d theta)` of the hydrodynamic form of `flow`.
pub fn hydro_rhs<T: Real>(state: &HydroState<T>, flow: FlowKind) -> Result<(RealField<T>, RealField<T>)> {
    let k = Kinematics::of(state);
    k.require_support()?;
    let m = state.mass();
    let two = T::cst(2.0);
    let quantum = flow.quantum_sign::<T>() * state.hbar() * state.hbar() / (two * m);
    let drho: Vec<T> = k.flux_divergence().into_iter().map(|d| -d / m).collect();
    let ds: Vec<T> = k
        .phase_gradient_sqr()
        .into_iter()
        .zip(k.quantum_ratio())
        .map(|(g, q)| -g / (two * m) + quantum * q)
        .collect();
    let grid = state.grid().clone();
    Ok((Field::new(grid.clone(), drho)?, Field::new(grid, ds)?))
}

/// `hbar Im(psi* grad psi)`, the probability current times the mass.
fn wave_flux<T: Real>(w: &WaveField<T>) -> Vec<Vec<T>> {
    let psi = w.psi().values();
    w.grid()
        .gradient_complex(psi)
        .into_iter()
        .map(|d| psi.iter().zip(&d).map(|(p, g)| w.hbar() * (p.conj() * g).im).collect())
        .collect()
}

/// Max norm of `(rho1 - rho0)/dtheta + div(rho grad s / m)` between two
/// adjacent states, with the divergence averaged over both ends, divided by
/// `max rho`. The same continuity equation holds along both flows.
pub fn continuity_residual<T: Real>(prev: &WaveField<T>, next: &WaveField<T>, dtheta: T) -> Result<T> {
    if prev.grid() != next.grid() {
        return Err(QrelError::Structural("continuity residual needs states on one grid".into()));
    }
    let grid = prev.grid();
    let div0 = grid.divergence_real(&wave_flux(prev));
    let div1 = grid.divergence_real(&wave_flux(next));
    let m = prev.mass();
    let two = T::cst(2.0);
    let rho0: Vec<T> = prev.psi().values().iter().map(|p| p.norm_sqr()).collect();
    let rho1: Vec<T> = next.psi().values().iter().map(|p| p.norm_sqr()).collect();
    let max_rho = rho0.iter().chain(&rho1).copied().fold(T::zero(), T::max);
    let worst = (0..grid.len())
        .map(|i| ((rho1[i] - rho0[i]) / dtheta + (div0[i] + div1[i]) / (two * m)).abs())
        .fold(T::zero(), T::max);
    Ok(worst / max_rho)
}

/// Rates of the Fisher dispersion and of `delta_p2_q` along a flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncertaintyRates<T> {
    pub d_dx2: T,
    pub d_dp2: T,
}

impl<T: Real> UncertaintyRates<T> {
    pub fn product(&self) -> T {
        self.d_dx2 * self.d_dp2
    }
}

/// Default step of the centred rate estimates.
pub const RATE_STEP: f64 = 1e-2;

/// Centred difference over single steps of `+-delta` and `+-delta/2`,
/// Richardson-combined. Both flow maps are time-symmetric, so the error
/// series is even and the combination is fourth order.
fn flow_rate<T: Real, const K: usize>(
    w: &WaveField<T>,
    flow: FlowKind,
    delta: T,
    measure: impl Fn(&WaveField<T>) -> Result<[T; K]>,
) -> Result<[T; K]> {
    let centred = |h: T| -> Result<[T; K]> {
        let plus = measure(&flow_step(w, flow, h))?;
        let minus = measure(&flow_step(w, flow, -h))?;
        Ok(std::array::from_fn(|i| (plus[i] - minus[i]) / (T::cst(2.0) * h)))
    };
    let coarse = centred(delta)?;
    let fine = centred(delta / T::cst(2.0))?;
    Ok(std::array::from_fn(|i| (T::cst(4.0) * fine[i] - coarse[i]) / T::cst(3.0)))
}

/// `(d delta_x2, d delta_p2_q) / d theta` along `flow` (consistent `dx2`).
pub fn uncertainty_rates<T: Real>(w: &WaveField<T>, flow: FlowKind) -> Result<UncertaintyRates<T>> {
    let [d_dx2, d_dp2] = flow_rate(w, flow, T::cst(RATE_STEP), |v| {
        let k = Kinematics::of_wave(v);
        Ok([k.delta_x2(Convention::Consistent)?, k.delta_p2_q()])
    })?;
    Ok(UncertaintyRates { d_dx2, d_dp2 })
}

/// Cauchy-Riemann check for `H_q + i K_q` as a function of `t + i tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolomorphyReport<T> {
    pub dk_dt: T,
    pub dh_dtau: T,
    pub dh_dt: T,
    pub dk_dtau: T,
}

impl<T: Real> HolomorphyReport<T> {
    /// `dK/dt + dH/dtau`, zero for a holomorphic `H + iK`.
    pub fn sum(&self) -> T {
        self.dk_dt + self.dh_dtau
    }
}

pub fn holomorphy_check<T: Real>(w: &WaveField<T>) -> Result<HolomorphyReport<T>> {
    let hk = |v: &WaveField<T>| -> Result<[T; 2]> {
        let k = Kinematics::of_wave(v);
        Ok([k.h_q(), k.k_q()])
    };
    let delta = T::cst(RATE_STEP);
    let [dh_dt, dk_dt] = flow_rate(w, FlowKind::T, delta, hk)?;
    let [dh_dtau, dk_dtau] = flow_rate(w, FlowKind::Tau, delta, hk)?;
    Ok(HolomorphyReport { dk_dt, dh_dtau, dh_dt, dk_dtau })
}

/// Overlap of two states before and after the same evolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonunitarityReport<T> {
    pub overlap_before: T,
    pub overlap_after: T,
    pub norm_first: T,
    pub norm_second: T,
}

impl<T: Real> NonunitarityReport<T> {
    pub fn overlap_change(&self) -> T {
        (self.overlap_after - self.overlap_before).abs()
    }
}

/// Evolves two states along `flow` and compares `|<psi1|psi2>|`.
pub fn nonunitarity_probe<T: Real>(
    a: &WaveField<T>,
    b: &WaveField<T>,
    flow: FlowKind,
    dtheta: T,
    steps: usize,
) -> Result<NonunitarityReport<T>> {
    let overlap_before = a.inner_product(b)?.norm();
    let run = |w: &WaveField<T>| -> Result<WaveField<T>> {
        match flow {
            FlowKind::T => Ok(evolve_t(w, dtheta * T::from_count(steps))),
            FlowKind::Tau => evolve_tau(w, dtheta, steps),
        }
    };
    let (a1, b1) = (run(a)?, run(b)?);
    Ok(NonunitarityReport {
        overlap_before,
        overlap_after: a1.inner_product(&b1)?.norm(),
        norm_first: a1.norm(),
        norm_second: b1.norm(),
    })
}

/// Gaussian parameters read off a wave by moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianMoments<T> {
    /// Per-axis variance.
    pub sigma2: T,
    /// Chirp `b` from `integral (x - <x>) . rho grad s = b sigma_x2`.
    pub b: T,
    pub mean: T,
    pub p0: T,
}

pub fn gaussian_moments<T: Real>(w: &WaveField<T>) -> GaussianMoments<T> {
    let k = Kinematics::of_wave(w);
    let grid = w.grid();
    let mean = k.mean_position();
    let sigma_x2 = k.sigma_x2();
    let mut cov = T::zero();
    for axis in 0..grid.dim() {
        let x = grid.coordinates(axis);
        let j = &k.flux()[axis];
        cov += grid.integrate_with(|i| (x[i] - mean[axis]) * j[i]);
    }
    GaussianMoments {
        sigma2: sigma_x2 / T::from_count(grid.dim()),
        b: cov / sigma_x2,
        mean: mean[0],
        p0: k.p_translation(),
    }
}

/// One row of a trajectory table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub step: usize,
    pub time: T,
    pub h_q: T,
    pub k_q: T,
    pub s_gen: T,
    pub delta_x2: T,
    pub delta_p2_q: T,
    pub norm: T,
    /// Residual of the step that produced this record; 0 for the first.
    pub continuity_residual: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryConfig<T> {
    pub flow: FlowKind,
    pub step: T,
    pub steps: usize,
    /// Record every this many steps; the final step is always recorded.
    pub record_every: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub records: Vec<TrajectoryRecord<T>>,
    pub final_wave: WaveField<T>,
    pub diagnostics: TauDiagnostics,
    /// Guard failure that stopped the run early.
    pub failure: Option<QrelError>,
}

/// Tracks `arg psi` at the box centre continuously so that the action read
/// off at each record sits on the same branch as the initial one.
struct PhaseTrack<T> {
    centre: usize,
    phase: T,
}

impl<T: Real> PhaseTrack<T> {
    fn advance(&mut self, w: &WaveField<T>) {
        let raw = w.psi().values()[self.centre].arg();
        let two_pi = T::cst(2.0) * T::PI();
        let turns = ((self.phase - raw) / two_pi).round();
        self.phase = raw + turns * two_pi;
    }

    fn action(&self, w: &WaveField<T>) -> Result<HydroState<T>> {
        let hs = from_wave(w, PhaseExtraction::Floored)?;
        let shift = w.hbar() * self.phase - hs.s().values()[self.centre];
        Ok(hs.shift_action(shift))
    }
}

fn record<T: Real>(
    step: usize,
    time: T,
    w: &WaveField<T>,
    track: &PhaseTrack<T>,
    residual: T,
) -> Result<TrajectoryRecord<T>> {
    let hs = track.action(w)?;
    let k = Kinematics::of(&hs);
    Ok(TrajectoryRecord {
        step,
        time,
        h_q: k.h_q(),
        k_q: k.k_q(),
        s_gen: k.s_gen()?,
        delta_x2: k.delta_x2(Convention::Consistent)?,
        delta_p2_q: k.delta_p2_q(),
        norm: w.norm(),
        continuity_residual: residual,
    })
}

/// Integrates `state` along a flow, recording observables.
pub fn run_trajectory<T: Real>(state: &HydroState<T>, cfg: TrajectoryConfig<T>) -> Result<Trajectory<T>> {
    if cfg.record_every == 0 {
        return Err(QrelError::config("record_every", "must be at least 1"));
    }
    if !(cfg.step > T::zero()) && cfg.steps > 0 {
        return Err(QrelError::config("step", format!("must be positive, got {}", cfg.step)));
    }
    let w0 = crate::state::to_wave(state);
    let centre = state.grid().center_index();
    let mut track = PhaseTrack { centre, phase: state.s().values()[centre] / state.hbar() };
    let mut records = vec![record(0, T::zero(), &w0, &track, T::zero())?];
    let mut stepper = TauStepper::new(state.grid());
    let k2 = state.grid().wavenumbers_sq();
    let mut cur = w0;
    let mut failure = None;
    for step in 1..=cfg.steps {
        let next = match cfg.flow {
            FlowKind::T => {
                let psi = kinetic(cur.grid(), &k2, cur.psi().values(), cfg.step, cur.hbar(), cur.mass());
                WaveField::from_parts(Field::new(cur.grid().clone(), psi)?, cur.hbar(), cur.mass())
            }
            FlowKind::Tau => {
                if let Err(e) = stepper.check(&cur, step - 1) {
                    failure = Some(e);
                    break;
                }
                stepper.step(&cur, cfg.step)
            }
        };
        track.advance(&next);
        if step % cfg.record_every == 0 || step == cfg.steps {
            let residual = continuity_residual(&cur, &next, cfg.step)?;
            let time = cfg.step * T::from_count(step);
            match record(step, time, &next, &track, residual) {
                Ok(r) => records.push(r),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        cur = next;
    }
    if failure.is_none() && cfg.flow == FlowKind::Tau {
        failure = stepper.check(&cur, cfg.steps).err();
    }
    Ok(Trajectory { records, final_wave: cur, diagnostics: stepper.diagnostics, failure })
}
