//! Scalar functionals of `(rho, s)` and their closed-form variational
//! derivatives.
//!
//! Everything is built from a [`Kinematics`] snapshot: amplitude `sqrt(rho)`,
//! its gradient and Laplacian, and the flux `rho grad s`. The flux is obtained
//! from an auxiliary wave `sqrt(rho) exp(i s / lambda)` rather than by
//! differentiating `s`, which is generally not periodic (quadratic phases).
//! `lambda` starts at `hbar` and is doubled until the action increments per
//! cell stay below a quarter turn wherever the density is not negligible, so
//! strongly dilated states remain resolved.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{QrelError, Result};
use crate::grid::{Field, Grid, RealField};
use crate::scalar::Real;
use crate::state::{HydroState, WaveField, RHO_FLOOR};

/// Relative density below which phase resolution is not enforced.
const PHASE_REGION: f64 = 1e-32;
/// Minimum number of samples above the floor for derivative rules.
const MIN_SUPPORT: usize = 8;

/// Normalisation of the Fisher dispersion `dx2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Convention {
    /// `dx2 = 1 / (4 I)` with `I = integral |grad sqrt(rho)|^2`; equals the
    /// variance on Gaussians and makes the dilatation law for `dp2` exact.
    #[default]
    Consistent,
    /// `dx2 = 1 / (2 I)`, read literally from the Fisher-dispersion formula.
    PaperLiteral,
}

impl Convention {
    fn factor<T: Real>(self) -> T {
        match self {
            Convention::Consistent => T::cst(4.0),
            Convention::PaperLiteral => T::cst(2.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Convention::Consistent => "consistent",
            Convention::PaperLiteral => "paper-literal",
        }
    }
}

impl FromStr for Convention {
    type Err = QrelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(Convention::Consistent),
            "paper-literal" => Ok(Convention::PaperLiteral),
            other => Err(QrelError::config(
                "convention",
                format!("expected `consistent` or `paper-literal`, got `{other}`"),
            )),
        }
    }
}

/// Which field a variational derivative is taken against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Rho,
    S,
}

/// The functionals with known evaluation and derivative rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FunctionalTag {
    HCl,
    HQ,
    KQ,
    S,
    Fisher,
    DeltaX2,
    DeltaP2Cl,
    DeltaP2Q,
    SigmaX2,
    PTranslation,
}

impl FunctionalTag {
    pub const ALL: [FunctionalTag; 10] = [
        FunctionalTag::HCl,
        FunctionalTag::HQ,
        FunctionalTag::KQ,
        FunctionalTag::S,
        FunctionalTag::Fisher,
        FunctionalTag::DeltaX2,
        FunctionalTag::DeltaP2Cl,
        FunctionalTag::DeltaP2Q,
        FunctionalTag::SigmaX2,
        FunctionalTag::PTranslation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionalTag::HCl => "H_cl",
            FunctionalTag::HQ => "H_q",
            FunctionalTag::KQ => "K_q",
            FunctionalTag::S => "S",
            FunctionalTag::Fisher => "Fisher",
            FunctionalTag::DeltaX2 => "DeltaX2",
            FunctionalTag::DeltaP2Cl => "DeltaP2_cl",
            FunctionalTag::DeltaP2Q => "DeltaP2_q",
            FunctionalTag::SigmaX2 => "SigmaX2",
            FunctionalTag::PTranslation => "P_translation",
        }
    }

    /// Value on `state` (consistent convention for `DeltaX2`).
    pub fn evaluate<T: Real>(self, state: &HydroState<T>) -> Result<T> {
        Kinematics::of(state).evaluate(self)
    }
}

impl fmt::Display for FunctionalTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionalTag {
    type Err = QrelError;

    fn from_str(s: &str) -> Result<Self> {
        FunctionalTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| QrelError::config("functional", format!("unknown functional `{s}`")))
    }
}

/// Position and momentum uncertainties `(dx2, dp2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncertaintyPair<T> {
    pub dx2: T,
    pub dp2: T,
}

impl<T: Real> UncertaintyPair<T> {
    pub fn new(dx2: T, dp2: T) -> Result<Self> {
        if !(dx2 > T::zero()) {
            return Err(QrelError::Domain(format!("dx2 must be positive, got {dx2}")));
        }
        if !(dp2 >= T::zero()) {
            return Err(QrelError::Domain(format!("dp2 must be non-negative, got {dp2}")));
        }
        Ok(Self { dx2, dp2 })
    }

    /// `(delta_x2, delta_p2_q)` of a state.
    pub fn of(state: &HydroState<T>, convention: Convention) -> Result<Self> {
        let k = Kinematics::of(state);
        Ok(Self {
            dx2: k.delta_x2(convention)?,
            dp2: k.delta_p2_q(),
        })
    }

    pub fn product(&self) -> T {
        self.dx2 * self.dp2
    }
}

/// Derived fields shared by every functional.
#[derive(Clone, Debug)]
pub struct Kinematics<T: Real> {
    grid: Grid<T>,
    hbar: T,
    mass: T,
    lambda: T,
    rho: Vec<T>,
    amplitude: Vec<T>,
    grad_amplitude: Vec<Vec<T>>,
    lap_amplitude: Vec<T>,
    /// `rho grad s`, per axis.
    flux: Vec<Vec<T>>,
    s: Option<Vec<T>>,
}

fn phase_scale<T: Real>(state: &HydroState<T>) -> T {
    let grid = state.grid();
    let rho = state.rho().values();
    let s = state.s().values();
    let max_rho = rho.iter().copied().fold(T::zero(), T::max);
    let cut = max_rho * T::cst(PHASE_REGION);
    let mut max_step = T::zero();
    for i in 0..grid.len() {
        if rho[i] <= cut {
            continue;
        }
        for axis in 0..grid.dim() {
            let j = grid.axis_index(i, axis);
            if j + 1 == grid.n() {
                continue;
            }
            let next = i + grid.stride(axis);
            if rho[next] > cut {
                max_step = max_step.max((s[next] - s[i]).abs());
            }
        }
    }
    let budget = T::FRAC_PI_2();
    let mut lambda = state.hbar();
    while max_step / lambda > budget && lambda.is_finite() {
        lambda = lambda * T::cst(2.0);
    }
    lambda
}

impl<T: Real> Kinematics<T> {
    /// Snapshot of a hydrodynamic state.
    pub fn of(state: &HydroState<T>) -> Self {
        let lambda = phase_scale(state);
        let phi: Vec<Complex<T>> = state
            .rho()
            .values()
            .iter()
            .zip(state.s().values())
            .map(|(&r, &s)| Complex::from_polar(r.sqrt(), s / lambda))
            .collect();
        Self::build(
            state.grid(),
            state.hbar(),
            state.mass(),
            state.rho().values().to_vec(),
            &phi,
            lambda,
            Some(state.s().values().to_vec()),
        )
    }

    /// Snapshot of a wave function. No action field is attached, so `S` is
    /// unavailable.
    pub fn of_wave(w: &WaveField<T>) -> Self {
        let psi = w.psi().values();
        let rho = psi.iter().map(|p| p.norm_sqr()).collect();
        Self::build(w.grid(), w.hbar(), w.mass(), rho, psi, w.hbar(), None)
    }

    fn build(
        grid: &Grid<T>,
        hbar: T,
        mass: T,
        rho: Vec<T>,
        phi: &[Complex<T>],
        lambda: T,
        s: Option<Vec<T>>,
    ) -> Self {
        let amplitude: Vec<T> = phi.iter().map(|p| p.norm()).collect();
        let grad_amplitude = grid.gradient_real(&amplitude);
        let lap_amplitude = grid.laplacian_real(&amplitude);
        let flux = grid
            .gradient_complex(phi)
            .into_iter()
            .map(|dphi| {
                phi.iter()
                    .zip(&dphi)
                    .map(|(p, d)| lambda * (p.conj() * d).im)
                    .collect()
            })
            .collect();
        Self {
            grid: grid.clone(),
            hbar,
            mass,
            lambda,
            rho,
            amplitude,
            grad_amplitude,
            lap_amplitude,
            flux,
            s,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    /// Action unit of the auxiliary wave used for the flux.
    pub fn phase_scale(&self) -> T {
        self.lambda
    }

    pub fn amplitude(&self) -> &[T] {
        &self.amplitude
    }

    /// `rho grad s`, per axis.
    pub fn flux(&self) -> &[Vec<T>] {
        &self.flux
    }

    fn floored_rho(&self, i: usize) -> T {
        self.rho[i].max(T::cst(RHO_FLOOR))
    }

    /// `grad s` along `axis`, regularised where the density vanishes.
    pub fn phase_gradient(&self, axis: usize) -> Vec<T> {
        (0..self.grid.len())
            .map(|i| self.flux[axis][i] / self.floored_rho(i))
            .collect()
    }

    /// `|grad s|^2`.
    pub fn phase_gradient_sqr(&self) -> Vec<T> {
        (0..self.grid.len())
            .map(|i| {
                let r = self.floored_rho(i);
                self.flux.iter().map(|f| (f[i] / r).powi(2)).sum()
            })
            .collect()
    }

    /// `rho |grad s|^2`.
    pub fn kinetic_density(&self) -> Vec<T> {
        (0..self.grid.len())
            .map(|i| {
                let r = self.floored_rho(i);
                self.flux.iter().map(|f| f[i] * f[i]).sum::<T>() / r
            })
            .collect()
    }

    /// `lap sqrt(rho) / sqrt(rho)`, regularised at the density floor.
    pub fn quantum_ratio(&self) -> Vec<T> {
        let floor = T::cst(RHO_FLOOR).sqrt();
        self.lap_amplitude
            .iter()
            .zip(&self.amplitude)
            .map(|(l, a)| *l / a.max(floor))
            .collect()
    }

    /// `div(rho grad s)`.
    pub fn flux_divergence(&self) -> Vec<T> {
        self.grid.divergence_real(&self.flux)
    }

    /// `I = integral |grad sqrt(rho)|^2`.
    pub fn fisher_integral(&self) -> T {
        self.grid.integrate_with(|i| {
            self.grad_amplitude.iter().map(|g| g[i] * g[i]).sum()
        })
    }

    /// `F = 2 I`.
    pub fn fisher_information(&self) -> T {
        T::cst(2.0) * self.fisher_integral()
    }

    pub fn delta_x2(&self, convention: Convention) -> Result<T> {
        let i = self.fisher_integral();
        if !(i > T::zero()) {
            return Err(QrelError::Degenerate("Fisher integral vanishes".into()));
        }
        Ok(T::one() / (convention.factor::<T>() * i))
    }

    /// Mean position, per axis.
    pub fn mean_position(&self) -> Vec<T> {
        (0..self.grid.dim())
            .map(|axis| {
                let x = self.grid.coordinates(axis);
                self.grid.integrate_with(|i| self.rho[i] * x[i])
            })
            .collect()
    }

    /// `integral rho |x - <x>|^2`.
    pub fn sigma_x2(&self) -> T {
        let mean = self.mean_position();
        (0..self.grid.dim())
            .map(|axis| {
                let x = self.grid.coordinates(axis);
                self.grid.integrate_with(|i| self.rho[i] * (x[i] - mean[axis]).powi(2))
            })
            .sum()
    }

    pub fn delta_p2_cl(&self) -> T {
        self.grid.integrate(&self.kinetic_density())
    }

    pub fn delta_p2_q(&self) -> T {
        self.delta_p2_cl() + self.hbar * self.hbar * self.fisher_integral()
    }

    fn quantum_term(&self) -> T {
        self.hbar * self.hbar / (T::cst(2.0) * self.mass) * self.fisher_integral()
    }

    pub fn h_cl(&self) -> T {
        self.delta_p2_cl() / (T::cst(2.0) * self.mass)
    }

    pub fn h_q(&self) -> T {
        self.h_cl() + self.quantum_term()
    }

    pub fn k_q(&self) -> T {
        self.h_cl() - self.quantum_term()
    }

    /// `integral rho s`; needs an attached action field.
    pub fn s_gen(&self) -> Result<T> {
        let s = self.action()?;
        Ok(self.grid.integrate_with(|i| self.rho[i] * s[i]))
    }

    /// `integral rho d_0 s`, the momentum along the first axis.
    pub fn p_translation(&self) -> T {
        self.grid.integrate(&self.flux[0])
    }

    fn action(&self) -> Result<&[T]> {
        self.s.as_deref().ok_or_else(|| {
            QrelError::Structural("functional S needs the action field; convert the wave first".into())
        })
    }

    pub fn evaluate(&self, tag: FunctionalTag) -> Result<T> {
        Ok(match tag {
            FunctionalTag::HCl => self.h_cl(),
            FunctionalTag::HQ => self.h_q(),
            FunctionalTag::KQ => self.k_q(),
            FunctionalTag::S => self.s_gen()?,
            FunctionalTag::Fisher => self.fisher_information(),
            FunctionalTag::DeltaX2 => self.delta_x2(Convention::Consistent)?,
            FunctionalTag::DeltaP2Cl => self.delta_p2_cl(),
            FunctionalTag::DeltaP2Q => self.delta_p2_q(),
            FunctionalTag::SigmaX2 => self.sigma_x2(),
            FunctionalTag::PTranslation => self.p_translation(),
        })
    }

    /// Every scalar at once.
    pub fn observables(&self) -> Result<Observables<T>> {
        Ok(Observables {
            h_cl: self.h_cl(),
            h_q: self.h_q(),
            k_q: self.k_q(),
            s_gen: self.s.as_ref().map(|_| self.s_gen()).transpose()?,
            fisher: self.fisher_information(),
            delta_x2: self.delta_x2(Convention::Consistent)?,
            delta_p2_cl: self.delta_p2_cl(),
            delta_p2_q: self.delta_p2_q(),
            sigma_x2: self.sigma_x2(),
            p_translation: self.p_translation(),
        })
    }

    /// Closed-form `dA/drho` or `dA/ds` as raw samples.
    /// Fails unless enough samples carry density for derivative rules.
    pub fn require_support(&self) -> Result<()> {
        let support = self.rho.iter().filter(|&&r| r > T::cst(RHO_FLOOR)).count();
        if support < MIN_SUPPORT {
            return Err(QrelError::Degenerate(format!(
                "only {support} samples carry density above the floor"
            )));
        }
        Ok(())
    }

    pub fn derivative(&self, tag: FunctionalTag, component: Component) -> Result<Vec<T>> {
        self.require_support()?;
        let n = self.grid.len();
        let two = T::cst(2.0);
        let hbar2 = self.hbar * self.hbar;
        let m = self.mass;
        let scale = |v: Vec<T>, a: T| v.into_iter().map(|x| x * a).collect::<Vec<T>>();
        let combine = |a: Vec<T>, ca: T, b: Vec<T>, cb: T| {
            a.into_iter().zip(b).map(|(x, y)| ca * x + cb * y).collect::<Vec<T>>()
        };
        use FunctionalTag::*;
        Ok(match (tag, component) {
            (HCl, Component::Rho) => scale(self.phase_gradient_sqr(), T::one() / (two * m)),
            (HQ, Component::Rho) => combine(
                self.phase_gradient_sqr(),
                T::one() / (two * m),
                self.quantum_ratio(),
                -hbar2 / (two * m),
            ),
            (KQ, Component::Rho) => combine(
                self.phase_gradient_sqr(),
                T::one() / (two * m),
                self.quantum_ratio(),
                hbar2 / (two * m),
            ),
            (HCl | HQ | KQ, Component::S) => scale(self.flux_divergence(), -T::one() / m),
            (FunctionalTag::S, Component::Rho) => self.action()?.to_vec(),
            (FunctionalTag::S, Component::S) => self.rho.clone(),
            (Fisher, Component::Rho) => scale(self.quantum_ratio(), -two),
            (DeltaX2, Component::Rho) => {
                let i = self.fisher_integral();
                scale(self.quantum_ratio(), T::one() / (T::cst(4.0) * i * i))
            }
            (DeltaP2Cl, Component::Rho) => self.phase_gradient_sqr(),
            (DeltaP2Q, Component::Rho) => combine(self.phase_gradient_sqr(), T::one(), self.quantum_ratio(), -hbar2),
            (DeltaP2Cl | DeltaP2Q, Component::S) => scale(self.flux_divergence(), -two),
            (SigmaX2, Component::Rho) => {
                let mean = self.mean_position();
                let mut out = vec![T::zero(); n];
                for (axis, xm) in mean.iter().enumerate() {
                    let x = self.grid.coordinates(axis);
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o += xi * xi - two * *xm * xi;
                    }
                }
                out
            }
            (PTranslation, Component::Rho) => self.phase_gradient(0),
            (PTranslation, Component::S) => scale(self.grid.derivative_real(&self.rho, 0), -T::one()),
            (Fisher | DeltaX2 | SigmaX2, Component::S) => vec![T::zero(); n],
        })
    }
}

/// All scalar functionals of one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables<T> {
    pub h_cl: T,
    pub h_q: T,
    pub k_q: T,
    pub s_gen: Option<T>,
    pub fisher: T,
    pub delta_x2: T,
    pub delta_p2_cl: T,
    pub delta_p2_q: T,
    pub sigma_x2: T,
    pub p_translation: T,
}

pub fn fisher_information<T: Real>(state: &HydroState<T>) -> T {
    Kinematics::of(state).fisher_information()
}

pub fn delta_x2<T: Real>(state: &HydroState<T>, convention: Convention) -> Result<T> {
    Kinematics::of(state).delta_x2(convention)
}

pub fn sigma_x2<T: Real>(state: &HydroState<T>) -> T {
    Kinematics::of(state).sigma_x2()
}

pub fn delta_p2_cl<T: Real>(state: &HydroState<T>) -> T {
    Kinematics::of(state).delta_p2_cl()
}

pub fn delta_p2_q<T: Real>(state: &HydroState<T>) -> T {
    Kinematics::of(state).delta_p2_q()
}

pub fn h_cl<T: Real>(state: &HydroState<T>) -> T {
    Kinematics::of(state).h_cl()
}

pub fn h_q<T: Real>(state: &HydroState<T>) -> T {
    Kinematics::of(state).h_q()
}

pub fn k_q<T: Real>(state: &HydroState<T>) -> T {
    Kinematics::of(state).k_q()
}

pub fn s_gen<T: Real>(state: &HydroState<T>) -> T {
    Kinematics::of(state).s_gen().expect("hydro states carry an action")
}

pub fn observables<T: Real>(state: &HydroState<T>) -> Observables<T> {
    Kinematics::of(state)
        .observables()
        .expect("Gaussian-like states have a positive Fisher integral")
}

/// Closed-form variational derivative as a field on the state's grid.
pub fn variational_derivative<T: Real>(
    tag: FunctionalTag,
    state: &HydroState<T>,
    component: Component,
) -> Result<RealField<T>> {
    let values = Kinematics::of(state).derivative(tag, component)?;
    Field::new(state.grid().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_gaussian, GaussianParams};

    fn grid() -> Grid<f64> {
        Grid::new(1, 512, 48.0).unwrap()
    }

    fn gaussian(sigma2: f64, b: f64, p0: f64, c: f64) -> HydroState<f64> {
        let p = GaussianParams { sigma2, b, c, p0, x0: 0.0 };
        make_gaussian(p, &grid(), 1.0, 1.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn fisher_of_gaussians() {
        assert!(close(fisher_information(&gaussian(1.0, 0.0, 0.0, 0.0)), 0.5, 1e-10));
        assert!(close(fisher_information(&gaussian(4.0, 0.0, 0.0, 0.0)), 0.125, 1e-10));
    }

    #[test]
    fn fisher_ignores_action() {
        let a = fisher_information(&gaussian(1.0, 0.0, 0.0, 0.0));
        let b = fisher_information(&gaussian(1.0, 3.0, 0.0, 0.0));
        assert!(close(a, b, 1e-14));
    }

    #[test]
    fn dispersion_conventions() {
        let st = gaussian(1.0, 0.0, 0.0, 0.0);
        assert!(close(delta_x2(&st, Convention::Consistent).unwrap(), 1.0, 1e-10));
        assert!(close(delta_x2(&st, Convention::PaperLiteral).unwrap(), 2.0, 1e-10));
    }

    #[test]
    fn dispersion_of_uniform_density_matches_spectral_sum() {
        // A density constant on the box has no gradient: the Fisher integral is
        // an exact zero and the dispersion is degenerate. A single extra cosine
        // mode gives a brute-force spectral oracle instead.
        let g = grid();
        let flat = Field::from_fn(&g, |_| 1.0 / 48.0);
        let st = HydroState::new(flat, Field::from_fn(&g, |_| 0.0), 1.0, 1.0).unwrap();
        assert!(matches!(delta_x2(&st, Convention::Consistent), Err(QrelError::Degenerate(_))));

        let k = 2.0 * std::f64::consts::PI / 48.0;
        let eps = 0.2;
        let amp = Field::from_fn(&g, |x| (1.0 + eps * (k * x[0]).cos()) / (48.0f64 * (1.0 + eps * eps / 2.0)).sqrt());
        let rho = amp.map(|a| a * a);
        let st = HydroState::new(rho, Field::from_fn(&g, |_| 0.0), 1.0, 1.0).unwrap();
        // I = sum over modes of |k a_k|^2 L for amplitude a(x) = sum a_k e^{ikx}.
        let a1 = eps / 2.0 / (48.0f64 * (1.0 + eps * eps / 2.0)).sqrt();
        let oracle = 2.0 * (k * a1).powi(2) * 48.0;
        assert!(close(1.0 / (4.0 * oracle), delta_x2(&st, Convention::Consistent).unwrap(), 1e-10));
    }

    #[test]
    fn variance_cases() {
        assert!(close(sigma_x2(&gaussian(1.0, 0.0, 0.0, 0.0)), 1.0, 1e-10));
        let shifted = make_gaussian(
            GaussianParams { x0: 3.0, ..GaussianParams::minimal(1.0) },
            &grid(),
            1.0,
            1.0,
        )
        .unwrap();
        assert!(close(sigma_x2(&shifted), 1.0, 1e-10));
    }

    #[test]
    fn classical_momentum_spread() {
        assert!(delta_p2_cl(&gaussian(1.0, 0.0, 0.0, 0.0)).abs() < 1e-20);
        assert!(close(delta_p2_cl(&gaussian(1.0, 0.0, 2.0, 0.0)), 4.0, 1e-10));
        assert!(close(delta_p2_cl(&gaussian(1.0, 1.0, 0.0, 0.0)), 1.0, 1e-10));
    }

    #[test]
    fn quantum_momentum_spread() {
        assert!(close(delta_p2_q(&gaussian(1.0, 0.0, 0.0, 0.0)), 0.25, 1e-10));
        assert!(close(delta_p2_q(&gaussian(1.0, 0.0, 2.0, 0.0)), 4.25, 1e-10));
        let st = gaussian(1.0, 0.0, 0.0, 0.0);
        let prod = delta_x2(&st, Convention::Consistent).unwrap() * delta_p2_q(&st);
        assert!(close(prod, 0.25, 1e-10));
    }

    #[test]
    fn hamiltonians_and_generator() {
        let o = observables(&gaussian(1.0, 0.0, 0.0, 0.0));
        assert!(close(o.h_q, 0.125, 1e-10));
        assert!(close(o.k_q, -0.125, 1e-10));
        assert!(close(o.h_cl, 0.0, 1e-10));
        assert!(close(o.s_gen.unwrap(), 0.0, 1e-10));

        let o = observables(&gaussian(1.0, 1.0, 0.0, 0.0));
        assert!(close(o.h_q, 0.625, 1e-10));
        assert!(close(o.k_q, 0.375, 1e-10));
        assert!(close(o.s_gen.unwrap(), 0.5, 1e-10));
        assert!(close(o.h_q, o.delta_p2_q / 2.0, 1e-14));
    }

    #[test]
    fn generator_derivative_in_s_is_density() {
        let st = gaussian(0.5, 1.0, 2.0, 0.3);
        let d = variational_derivative(FunctionalTag::S, &st, Component::S).unwrap();
        assert_eq!(d.values(), st.rho().values());
    }

    #[test]
    fn hq_s_derivative_vanishes_without_phase() {
        let d = variational_derivative(FunctionalTag::HQ, &gaussian(1.0, 0.0, 0.0, 0.0), Component::S).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn hq_rho_derivative_is_quantum_potential() {
        let st = gaussian(1.0, 0.0, 0.0, 0.0);
        let d = variational_derivative(FunctionalTag::HQ, &st, Component::Rho).unwrap();
        let x = st.grid().coordinates(0);
        for i in 0..x.len() {
            if st.rho().values()[i] > 1e-12 {
                let expected = -0.5 * (x[i] * x[i] / 4.0 - 0.5);
                assert!(close(d.values()[i], expected, 1e-8), "x = {}", x[i]);
            }
        }
    }

    #[test]
    fn quantum_gap_is_non_negative() {
        for st in [gaussian(0.5, -1.0, 2.0, 0.0), gaussian(2.0, 1.0, 0.0, 1.0)] {
            let k = Kinematics::of(&st);
            let gap = k.h_q() - k.k_q();
            assert!(gap >= 0.0);
            assert!(close(gap, k.fisher_integral(), 1e-14));
        }
    }

    #[test]
    fn wave_and_hydro_snapshots_agree() {
        let st = gaussian(1.0, 1.0, 2.0, 0.0);
        let a = Kinematics::of(&st);
        let b = Kinematics::of_wave(&crate::state::to_wave(&st));
        assert!(close(a.h_q(), b.h_q(), 1e-12));
        assert!(close(a.k_q(), b.k_q(), 1e-12));
        assert!(close(a.p_translation(), b.p_translation(), 1e-12));
        assert!(b.s_gen().is_err());
    }

    #[test]
    fn tags_round_trip_through_names() {
        for tag in FunctionalTag::ALL {
            assert_eq!(tag.name().parse::<FunctionalTag>().unwrap(), tag);
        }
        assert!("H".parse::<FunctionalTag>().is_err());
        assert_eq!("paper-literal".parse::<Convention>().unwrap(), Convention::PaperLiteral);
    }

    #[test]
    fn classical_limit_scales_as_hbar_squared() {
        let st = gaussian(1.0, 1.0, 0.0, 0.0);
        let gaps: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
            .iter()
            .map(|&h| {
                let k = Kinematics::of(&st.with_hbar(h).unwrap());
                (k.h_q() - k.h_cl()).abs()
            })
            .collect();
        for w in gaps.windows(2) {
            let slope = (w[0] / w[1]).ln() / 2f64.ln();
            assert!(close(slope, 2.0, 1e-10));
        }
    }
}
