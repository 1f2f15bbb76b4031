//! Finite-difference functional derivatives.
//!
//! Each grid sample is bumped up and down, the functional evaluation rules are
//! re-run on both copies, and the centred quotient
//! `[A(+) - A(-)] / (2 eps_i h^d)` is formed. The two copies are carried
//! together as secant triples `(plus, minus, plus - minus)` so that the
//! difference is assembled from exact local differences instead of by
//! subtracting two nearly equal totals. Nothing here uses the closed-form
//! derivative rules.
//!
//! Density bumps are relative (`eps_i = eps rho_i`), which keeps both copies
//! positive and the truncation error uniform across the tails. Action bumps
//! are `eps lambda`, a phase kick of `eps` radians on the auxiliary wave.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{QrelError, Result};
use crate::functionals::{Component, FunctionalTag, Kinematics};
use crate::grid::{Field, Grid, RealField};
use crate::scalar::Real;
use crate::state::{HydroState, RHO_FLOOR};

/// Samples with less density than this are not bumped; the oracle reports 0.
pub const ORACLE_DENSITY_CUT: f64 = 1e-27;
/// Density above which oracle fields are trusted and compared. Deeper in the
/// tails the amplitude is so small that spectral roundoff dominates both the
/// oracle and the closed forms.
pub const COMPARISON_DENSITY: f64 = 1e-10;
/// First bump size tried by [`oracle_sweep_tuned`].
pub const EPS_START: f64 = 1e-5;
const EPS_MIN: f64 = 1e-9;

/// `(plus, minus, plus - minus)` for one value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Secant<V> {
    pub plus: V,
    pub minus: V,
    pub diff: V,
}

impl<T: Real> Secant<T> {
    pub fn constant(v: T) -> Self {
        Self { plus: v, minus: v, diff: T::zero() }
    }

    fn mid(&self) -> T {
        (self.plus + self.minus) / T::cst(2.0)
    }

    pub fn add(self, o: Self) -> Self {
        Self { plus: self.plus + o.plus, minus: self.minus + o.minus, diff: self.diff + o.diff }
    }

    pub fn sub(self, o: Self) -> Self {
        Self { plus: self.plus - o.plus, minus: self.minus - o.minus, diff: self.diff - o.diff }
    }

    pub fn scale(self, c: T) -> Self {
        Self { plus: self.plus * c, minus: self.minus * c, diff: self.diff * c }
    }

    /// `x+ y+ - x- y- = dx mid(y) + mid(x) dy`.
    pub fn mul(self, o: Self) -> Self {
        Self {
            plus: self.plus * o.plus,
            minus: self.minus * o.minus,
            diff: self.diff * o.mid() + self.mid() * o.diff,
        }
    }

    pub fn recip(self) -> Self {
        Self {
            plus: self.plus.recip(),
            minus: self.minus.recip(),
            diff: -self.diff / (self.plus * self.minus),
        }
    }

    pub fn sqrt(self) -> Self {
        let (p, m) = (self.plus.sqrt(), self.minus.sqrt());
        let denom = p + m;
        Self {
            plus: p,
            minus: m,
            diff: if denom > T::zero() { self.diff / denom } else { T::zero() },
        }
    }

    /// `max(x, floor)`, exact while both copies sit on the same side.
    fn floored(self, floor: T) -> Self {
        let (p, m) = (self.plus.max(floor), self.minus.max(floor));
        let diff = if self.plus > floor && self.minus > floor {
            self.diff
        } else {
            p - m
        };
        Self { plus: p, minus: m, diff }
    }
}

/// Secant triple of sample vectors.
#[derive(Clone, Debug)]
struct SecantVec<V> {
    plus: Vec<V>,
    minus: Vec<V>,
    diff: Vec<V>,
}

type RealSec<T> = SecantVec<T>;
type CplxSec<T> = SecantVec<Complex<T>>;

impl<V: Copy> SecantVec<V> {
    fn at(&self, i: usize) -> Secant<V> {
        Secant { plus: self.plus[i], minus: self.minus[i], diff: self.diff[i] }
    }

    fn map<W>(&self, f: impl Fn(&[V]) -> Vec<W>) -> SecantVec<W> {
        SecantVec { plus: f(&self.plus), minus: f(&self.minus), diff: f(&self.diff) }
    }
}

impl<T: Real> RealSec<T> {
    fn from_fn(len: usize, f: impl Fn(usize) -> Secant<T>) -> Self {
        let mut out = Self { plus: vec![T::zero(); len], minus: vec![T::zero(); len], diff: vec![T::zero(); len] };
        for i in 0..len {
            let v = f(i);
            out.plus[i] = v.plus;
            out.minus[i] = v.minus;
            out.diff[i] = v.diff;
        }
        out
    }

    fn integrate(&self, grid: &Grid<T>) -> Secant<T> {
        Secant {
            plus: grid.integrate(&self.plus),
            minus: grid.integrate(&self.minus),
            diff: grid.integrate(&self.diff),
        }
    }
}

fn cmid<T: Real>(p: Complex<T>, m: Complex<T>) -> Complex<T> {
    (p + m) * T::cst(0.5)
}

/// Secant triples of every tagged functional for one perturbation.
#[derive(Clone, Copy, Debug)]
pub struct SecantFunctionals<T> {
    pub h_cl: Secant<T>,
    pub h_q: Secant<T>,
    pub k_q: Secant<T>,
    pub s_gen: Secant<T>,
    pub fisher: Secant<T>,
    pub delta_x2: Secant<T>,
    pub delta_p2_cl: Secant<T>,
    pub delta_p2_q: Secant<T>,
    pub sigma_x2: Secant<T>,
    pub p_translation: Secant<T>,
}

impl<T: Real> SecantFunctionals<T> {
    pub fn get(&self, tag: FunctionalTag) -> Secant<T> {
        match tag {
            FunctionalTag::HCl => self.h_cl,
            FunctionalTag::HQ => self.h_q,
            FunctionalTag::KQ => self.k_q,
            FunctionalTag::S => self.s_gen,
            FunctionalTag::Fisher => self.fisher,
            FunctionalTag::DeltaX2 => self.delta_x2,
            FunctionalTag::DeltaP2Cl => self.delta_p2_cl,
            FunctionalTag::DeltaP2Q => self.delta_p2_q,
            FunctionalTag::SigmaX2 => self.sigma_x2,
            FunctionalTag::PTranslation => self.p_translation,
        }
    }
}

/// Evaluation context shared by all bumps of one state.
struct Evaluator<'a, T: Real> {
    state: &'a HydroState<T>,
    lambda: T,
    coords: Vec<Vec<T>>,
}

impl<'a, T: Real> Evaluator<'a, T> {
    fn new(state: &'a HydroState<T>) -> Self {
        let grid = state.grid();
        Self {
            state,
            lambda: Kinematics::of(state).phase_scale(),
            coords: (0..grid.dim()).map(|a| grid.coordinates(a)).collect(),
        }
    }

    /// Runs the evaluation rules on the pair of states that differ from the
    /// base state by `+-bump` at sample `i`.
    fn evaluate(&self, i: usize, component: Component, bump: T) -> SecantFunctionals<T> {
        let st = self.state;
        let grid = st.grid();
        let n = grid.len();
        let zero = T::zero();
        let two = T::cst(2.0);
        let (hbar, mass, lambda) = (st.hbar(), st.mass(), self.lambda);
        let rho0 = st.rho().values();
        let s0 = st.s().values();

        let rho = RealSec::from_fn(n, |j| {
            if j == i && component == Component::Rho {
                Secant { plus: rho0[j] + bump, minus: rho0[j] - bump, diff: two * bump }
            } else {
                Secant::constant(rho0[j])
            }
        });
        let s = RealSec::from_fn(n, |j| {
            if j == i && component == Component::S {
                Secant { plus: s0[j] + bump, minus: s0[j] - bump, diff: two * bump }
            } else {
                Secant::constant(s0[j])
            }
        });

        let amp = RealSec::from_fn(n, |j| rho.at(j).sqrt());

        // phi = amp exp(i s / lambda)
        let mut phi = CplxSec { plus: Vec::with_capacity(n), minus: Vec::with_capacity(n), diff: Vec::with_capacity(n) };
        for j in 0..n {
            let a = amp.at(j);
            let (tp, tm) = (s.plus[j] / lambda, s.minus[j] / lambda);
            let (ep, em) = (Complex::from_polar(T::one(), tp), Complex::from_polar(T::one(), tm));
            let half = (tp - tm) / two;
            let de = Complex::new(zero, two * half.sin()) * Complex::from_polar(T::one(), (tp + tm) / two);
            phi.plus.push(ep * a.plus);
            phi.minus.push(em * a.minus);
            phi.diff.push(cmid(ep, em) * a.diff + de * a.mid());
        }

        let grad_amp: Vec<RealSec<T>> = (0..grid.dim())
            .map(|axis| amp.map(|v| grid.derivative_real(v, axis)))
            .collect();
        let grad_phi: Vec<CplxSec<T>> = (0..grid.dim())
            .map(|axis| phi.map(|v| grid.derivative_complex(v, axis)))
            .collect();

        // J = lambda Im(conj(phi) grad phi)
        let flux: Vec<RealSec<T>> = grad_phi
            .iter()
            .map(|g| {
                RealSec::from_fn(n, |j| {
                    let (pp, pm, pd) = (phi.plus[j].conj(), phi.minus[j].conj(), phi.diff[j].conj());
                    let (gp, gm, gd) = (g.plus[j], g.minus[j], g.diff[j]);
                    Secant {
                        plus: lambda * (pp * gp).im,
                        minus: lambda * (pm * gm).im,
                        diff: lambda * (pd * cmid(gp, gm) + cmid(pp, pm) * gd).im,
                    }
                })
            })
            .collect();

        let floor = T::cst(RHO_FLOOR);
        let kinetic = RealSec::from_fn(n, |j| {
            let mut j2 = Secant::constant(zero);
            for f in &flux {
                j2 = j2.add(f.at(j).mul(f.at(j)));
            }
            j2.mul(rho.at(j).floored(floor).recip())
        });
        let grad_sq = RealSec::from_fn(n, |j| {
            let mut acc = Secant::constant(zero);
            for g in &grad_amp {
                acc = acc.add(g.at(j).mul(g.at(j)));
            }
            acc
        });

        let fisher_integral = grad_sq.integrate(grid);
        let delta_p2_cl = kinetic.integrate(grid);
        let s_gen = RealSec::from_fn(n, |j| rho.at(j).mul(s.at(j))).integrate(grid);
        let p_translation = flux[0].integrate(grid);

        let mut sigma_x2 = Secant::constant(zero);
        for x in &self.coords {
            let mean = RealSec::from_fn(n, |j| rho.at(j).scale(x[j])).integrate(grid);
            let spread = RealSec::from_fn(n, |j| {
                let u = Secant::constant(x[j]).sub(mean);
                rho.at(j).mul(u.mul(u))
            });
            sigma_x2 = sigma_x2.add(spread.integrate(grid));
        }

        let inv_2m = T::one() / (two * mass);
        let h_cl = delta_p2_cl.scale(inv_2m);
        let quantum = fisher_integral.scale(hbar * hbar * inv_2m);
        SecantFunctionals {
            h_cl,
            h_q: h_cl.add(quantum),
            k_q: h_cl.sub(quantum),
            s_gen,
            fisher: fisher_integral.scale(two),
            delta_x2: fisher_integral.scale(T::cst(4.0)).recip(),
            delta_p2_cl,
            delta_p2_q: delta_p2_cl.add(fisher_integral.scale(hbar * hbar)),
            sigma_x2,
            p_translation,
        }
    }

    fn bump(&self, i: usize, component: Component, eps: T) -> T {
        match component {
            Component::Rho => eps * self.state.rho().values()[i],
            Component::S => eps * self.lambda,
        }
    }

    fn active(&self, i: usize) -> bool {
        self.state.rho().values()[i] > T::cst(ORACLE_DENSITY_CUT)
    }

    /// Quotients for every tag at every active sample, in sample order.
    fn sweep(&self, component: Component, eps: T) -> Vec<Option<[T; 10]>> {
        let cell = self.state.grid().cell_volume();
        (0..self.state.grid().len())
            .into_par_iter()
            .map(|i| {
                if !self.active(i) {
                    return None;
                }
                let bump = self.bump(i, component, eps);
                let f = self.evaluate(i, component, bump);
                let denom = T::cst(2.0) * bump * cell;
                Some(FunctionalTag::ALL.map(|tag| f.get(tag).diff / denom))
            })
            .collect()
    }
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(QrelError::OraclePrecision(format!(
            "bump size {eps} would not keep the density positive; use 0 < eps < 1"
        )));
    }
    Ok(())
}

/// Oracle derivatives of all tags for one component.
#[derive(Clone, Debug)]
pub struct OracleSweep<T: Real> {
    grid: Grid<T>,
    component: Component,
    epsilon: T,
    estimated_error: [T; 10],
    values: Vec<Option<[T; 10]>>,
}

impl<T: Real> OracleSweep<T> {
    pub fn component(&self) -> Component {
        self.component
    }

    /// Bump size of the returned quotients.
    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Change of the field (max norm) between the last two bump sizes.
    pub fn estimated_error(&self, tag: FunctionalTag) -> T {
        self.estimated_error[tag_index(tag)]
    }

    /// Which samples were bumped.
    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_some).collect()
    }

    pub fn field(&self, tag: FunctionalTag) -> RealField<T> {
        let k = tag_index(tag);
        let values = self.values.iter().map(|v| v.map_or(T::zero(), |v| v[k])).collect();
        Field::new(self.grid.clone(), values).expect("sweep covers the grid")
    }
}

fn tag_index(tag: FunctionalTag) -> usize {
    FunctionalTag::ALL.iter().position(|&t| t == tag).expect("tag listed in ALL")
}

fn max_change<T: Real>(
    a: &[Option<[T; 10]>],
    b: &[Option<[T; 10]>],
    rho: &[T],
) -> ([T; 10], [T; 10]) {
    let mut change = [T::zero(); 10];
    let mut scale = [T::zero(); 10];
    let cut = T::cst(COMPARISON_DENSITY);
    for ((x, y), &r) in a.iter().zip(b).zip(rho) {
        if r <= cut {
            continue;
        }
        if let (Some(x), Some(y)) = (x, y) {
            for k in 0..10 {
                change[k] = change[k].max((x[k] - y[k]).abs());
                scale[k] = scale[k].max(y[k].abs());
            }
        }
    }
    (change, scale)
}

/// Oracle sweep at a fixed bump size.
pub fn oracle_sweep<T: Real>(state: &HydroState<T>, component: Component, eps: T) -> Result<OracleSweep<T>> {
    check_eps(eps)?;
    let ev = Evaluator::new(state);
    Ok(OracleSweep {
        grid: state.grid().clone(),
        component,
        epsilon: eps,
        estimated_error: [T::nan(); 10],
        values: ev.sweep(component, eps),
    })
}

/// Oracle sweep with the bump size reduced tenfold from `1e-5` until every
/// tag's field changes by less than `1e-9` of its size (or absolutely) where
/// `rho > COMPARISON_DENSITY`.
pub fn oracle_sweep_tuned<T: Real>(state: &HydroState<T>, component: Component) -> Result<OracleSweep<T>> {
    let ev = Evaluator::new(state);
    let mut eps = T::cst(EPS_START);
    let mut prev = ev.sweep(component, eps);
    let stable = T::cst(1e-9);
    while eps > T::cst(EPS_MIN) {
        eps = eps / T::cst(10.0);
        let next = ev.sweep(component, eps);
        let (change, scale) = max_change(&prev, &next, state.rho().values());
        let settled = change
            .iter()
            .zip(&scale)
            .all(|(&c, &s)| c <= stable * s.max(T::one()));
        if settled {
            return Ok(OracleSweep {
                grid: state.grid().clone(),
                component,
                epsilon: eps,
                estimated_error: change,
                values: next,
            });
        }
        prev = next;
    }
    Err(QrelError::OraclePrecision(format!(
        "finite-difference derivative did not settle down to eps = {eps:e}"
    )))
}

/// Centred finite-difference `dA/d(component)` with bump size `epsilon`.
/// Samples below the oracle density cut are reported as 0.
pub fn fd_functional_derivative<T: Real>(
    tag: FunctionalTag,
    state: &HydroState<T>,
    component: Component,
    epsilon: T,
) -> Result<RealField<T>> {
    Ok(oracle_sweep(state, component, epsilon)?.field(tag))
}

/// Agreement of a closed-form and an oracle derivative on a masked region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeComparison<T> {
    pub max_abs_error: T,
    /// Larger of the two fields' max norms on the region.
    pub scale: T,
}

impl<T: Real> DerivativeComparison<T> {
    pub fn relative_error(&self) -> T {
        if self.scale > T::zero() {
            self.max_abs_error / self.scale
        } else {
            self.max_abs_error
        }
    }

    /// `max_abs_error <= max(abs_tol, rel_tol * scale)`.
    pub fn passes(&self, abs_tol: T, rel_tol: T) -> bool {
        self.max_abs_error <= abs_tol.max(rel_tol * self.scale)
    }
}

/// Subtracts the density-weighted mean, the gauge of `d/drho` on normalised
/// densities.
pub fn remove_weighted_mean<T: Real>(field: &[T], rho: &[T], grid: &Grid<T>) -> Vec<T> {
    let mass = grid.integrate(rho);
    let mean = grid.integrate_with(|i| rho[i] * field[i]) / mass;
    field.iter().map(|&v| v - mean).collect()
}

/// Compares two derivative fields where `rho > density_cut`. Density
/// derivatives are compared modulo an additive constant.
pub fn compare_derivatives<T: Real>(
    closed: &RealField<T>,
    oracle: &RealField<T>,
    state: &HydroState<T>,
    component: Component,
    density_cut: T,
) -> DerivativeComparison<T> {
    let rho = state.rho().values();
    let grid = state.grid();
    let (a, b) = match component {
        Component::Rho => (
            remove_weighted_mean(closed.values(), rho, grid),
            remove_weighted_mean(oracle.values(), rho, grid),
        ),
        Component::S => (closed.values().to_vec(), oracle.values().to_vec()),
    };
    let mut max_abs_error = T::zero();
    let mut scale = T::zero();
    for i in 0..rho.len() {
        if rho[i] > density_cut {
            max_abs_error = max_abs_error.max((a[i] - b[i]).abs());
            scale = scale.max(a[i].abs()).max(b[i].abs());
        }
    }
    DerivativeComparison { max_abs_error, scale }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::variational_derivative;
    use crate::state::{make_gaussian, GaussianParams};

    fn gaussian(sigma2: f64, b: f64, p0: f64) -> HydroState<f64> {
        let g = Grid::new(1, 256, 40.0).unwrap();
        make_gaussian(GaussianParams { sigma2, b, p0, ..Default::default() }, &g, 1.0, 1.0).unwrap()
    }

    #[test]
    fn secant_rules_are_exact_on_separated_values() {
        let x = Secant { plus: 4.0, minus: 1.0, diff: 3.0 };
        let y = Secant { plus: 2.0, minus: 5.0, diff: -3.0 };
        assert_eq!(x.mul(y).diff, 8.0 - 5.0);
        assert_eq!(x.sqrt().diff, 1.0);
        assert_eq!(x.recip().diff, 0.25 - 1.0);
    }

    #[test]
    fn secant_difference_survives_cancellation() {
        let base = 1.0e8_f64;
        let x = Secant { plus: base + 1e-7, minus: base - 1e-7, diff: 2e-7 };
        let sq = x.mul(x);
        assert!((sq.diff - 4.0 * base * 1e-7).abs() < 1e-9 * sq.diff);
    }

    #[test]
    fn generator_s_derivative_is_density() {
        let st = gaussian(1.0, 1.0, 2.0);
        let fd = fd_functional_derivative(FunctionalTag::S, &st, Component::S, 1e-6).unwrap();
        for (i, (&a, &b)) in fd.values().iter().zip(st.rho().values()).enumerate() {
            if b > ORACLE_DENSITY_CUT {
                assert!((a - b).abs() < 1e-8, "sample {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn classical_energy_is_flat_without_phase() {
        let st = gaussian(1.0, 0.0, 0.0);
        let fd = fd_functional_derivative(FunctionalTag::HCl, &st, Component::Rho, 1e-5).unwrap();
        assert!(fd.values().iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn quantum_potential_up_to_constant() {
        let st = gaussian(1.0, 0.0, 0.0);
        let fd = oracle_sweep_tuned(&st, Component::Rho).unwrap().field(FunctionalTag::HQ);
        let x = st.grid().coordinates(0);
        let expected: Vec<f64> = x.iter().map(|x| -0.5 * (x * x / 4.0 - 0.5)).collect();
        let expected = Field::new(st.grid().clone(), expected).unwrap();
        let cmp = compare_derivatives(&expected, &fd, &st, Component::Rho, 1e-10);
        assert!(cmp.passes(1e-8, 1e-6), "{cmp:?}");
    }

    #[test]
    fn oracle_matches_closed_forms() {
        for st in [gaussian(1.0, 1.0, 0.0), gaussian(0.5, -1.0, 2.0)] {
            for component in [Component::Rho, Component::S] {
                let sweep = oracle_sweep_tuned(&st, component).unwrap();
                for tag in FunctionalTag::ALL {
                    let closed = variational_derivative(tag, &st, component).unwrap();
                    let cmp = compare_derivatives(&closed, &sweep.field(tag), &st, component, 1e-10);
                    assert!(cmp.passes(1e-8, 1e-6), "{tag} {component:?}: {cmp:?}");
                }
            }
        }
    }

    #[test]
    fn rejects_bumps_that_flip_the_density() {
        let st = gaussian(1.0, 0.0, 0.0);
        assert!(matches!(
            fd_functional_derivative(FunctionalTag::HQ, &st, Component::Rho, 1.5),
            Err(QrelError::OraclePrecision(_))
        ));
    }
}
