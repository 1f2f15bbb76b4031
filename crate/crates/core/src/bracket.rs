//! Functional Poisson bracket
//! `{A, B} = integral (dA/drho dB/ds - dB/drho dA/ds)`.
//!
//! Orientation: a functional evolves as `dA/dtheta = {A, G}` under the flow
//! generated by `G`. With this sign `{A, S}` equals the dilatation derivative
//! `d/dalpha A(dilate(state, alpha))` at `alpha = 0` for the momentum-type
//! functionals, which gives `{S, H_q} = K_q` and `{S, K_q} = H_q`.

use crate::error::Result;
use crate::functionals::{Component, FunctionalTag, Kinematics};
use crate::grid::Grid;
use crate::group::dilate;
use crate::oracle::{oracle_sweep_tuned, OracleSweep};
use crate::scalar::{compensated_sum, Real};
use crate::state::HydroState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BracketMethod {
    ClosedForm,
    FiniteDifferenceOracle,
}

impl BracketMethod {
    pub fn name(self) -> &'static str {
        match self {
            BracketMethod::ClosedForm => "closed-form",
            BracketMethod::FiniteDifferenceOracle => "finite-difference-oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BracketResult<T> {
    pub value: T,
    pub method: BracketMethod,
    pub estimated_error: T,
}

/// Quadrature of `a_rho b_s - b_rho a_s`, with a roundoff estimate.
pub fn bracket_of_fields<T: Real>(
    grid: &Grid<T>,
    a_rho: &[T],
    a_s: &[T],
    b_rho: &[T],
    b_s: &[T],
) -> (T, T) {
    let cell = grid.cell_volume();
    let terms: Vec<T> = (0..grid.len())
        .map(|i| a_rho[i] * b_s[i] - b_rho[i] * a_s[i])
        .collect();
    let magnitude = compensated_sum((0..grid.len()).map(|i| {
        (a_rho[i] * b_s[i]).abs() + (b_rho[i] * a_s[i]).abs()
    }));
    let value = cell * compensated_sum(terms.iter().copied());
    let error = T::cst(16.0) * T::epsilon() * cell * magnitude;
    (value, error)
}

/// Closed-form derivative fields of every tag on one state.
#[derive(Clone, Debug)]
pub struct DerivativeTable<T: Real> {
    grid: Grid<T>,
    rho: Vec<Vec<T>>,
    s: Vec<Vec<T>>,
}

fn slot(tag: FunctionalTag) -> usize {
    FunctionalTag::ALL.iter().position(|&t| t == tag).expect("tag listed in ALL")
}

impl<T: Real> DerivativeTable<T> {
    pub fn of(state: &HydroState<T>) -> Result<Self> {
        let k = Kinematics::of(state);
        let mut rho = Vec::with_capacity(10);
        let mut s = Vec::with_capacity(10);
        for tag in FunctionalTag::ALL {
            rho.push(k.derivative(tag, Component::Rho)?);
            s.push(k.derivative(tag, Component::S)?);
        }
        Ok(Self { grid: state.grid().clone(), rho, s })
    }

    pub fn get(&self, tag: FunctionalTag, component: Component) -> &[T] {
        match component {
            Component::Rho => &self.rho[slot(tag)],
            Component::S => &self.s[slot(tag)],
        }
    }

    pub fn bracket(&self, a: FunctionalTag, b: FunctionalTag) -> BracketResult<T> {
        let (value, estimated_error) = bracket_of_fields(
            &self.grid,
            self.get(a, Component::Rho),
            self.get(a, Component::S),
            self.get(b, Component::Rho),
            self.get(b, Component::S),
        );
        BracketResult { value, method: BracketMethod::ClosedForm, estimated_error }
    }
}

/// Oracle derivative fields of every tag on one state.
#[derive(Clone, Debug)]
pub struct OracleTable<T: Real> {
    grid: Grid<T>,
    rho: OracleSweep<T>,
    s: OracleSweep<T>,
}

impl<T: Real> OracleTable<T> {
    pub fn of(state: &HydroState<T>) -> Result<Self> {
        Ok(Self {
            grid: state.grid().clone(),
            rho: oracle_sweep_tuned(state, Component::Rho)?,
            s: oracle_sweep_tuned(state, Component::S)?,
        })
    }

    pub fn sweep(&self, component: Component) -> &OracleSweep<T> {
        match component {
            Component::Rho => &self.rho,
            Component::S => &self.s,
        }
    }

    pub fn bracket(&self, a: FunctionalTag, b: FunctionalTag) -> BracketResult<T> {
        let (ar, as_) = (self.rho.field(a), self.s.field(a));
        let (br, bs) = (self.rho.field(b), self.s.field(b));
        let (value, roundoff) =
            bracket_of_fields(&self.grid, ar.values(), as_.values(), br.values(), bs.values());
        // The settling change of each field bounds its error; propagate it
        // through the quadrature with the partner field's L1 norm.
        let l1 = |f: &[T]| self.grid.integrate_with(|i| f[i].abs());
        let propagated = self.rho.estimated_error(a) * l1(bs.values())
            + self.s.estimated_error(b) * l1(ar.values())
            + self.rho.estimated_error(b) * l1(as_.values())
            + self.s.estimated_error(a) * l1(br.values());
        BracketResult {
            value,
            method: BracketMethod::FiniteDifferenceOracle,
            estimated_error: roundoff + propagated,
        }
    }
}

/// `{a, b}` from the closed-form derivative rules.
pub fn poisson_bracket<T: Real>(
    a: FunctionalTag,
    b: FunctionalTag,
    state: &HydroState<T>,
) -> Result<BracketResult<T>> {
    let k = Kinematics::of(state);
    let (value, estimated_error) = bracket_of_fields(
        state.grid(),
        &k.derivative(a, Component::Rho)?,
        &k.derivative(a, Component::S)?,
        &k.derivative(b, Component::Rho)?,
        &k.derivative(b, Component::S)?,
    );
    Ok(BracketResult { value, method: BracketMethod::ClosedForm, estimated_error })
}

/// `{a, b}` from finite-difference derivative fields.
pub fn poisson_bracket_oracle<T: Real>(
    a: FunctionalTag,
    b: FunctionalTag,
    state: &HydroState<T>,
) -> Result<BracketResult<T>> {
    Ok(OracleTable::of(state)?.bracket(a, b))
}

/// Comparison of the dilatation derivative of `delta_p2_q` with the bracket
/// `{DeltaP2_q, S}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorReport<T> {
    pub dalpha: T,
    /// `[dp2(dilate(+dalpha)) - dp2(dilate(-dalpha))] / (2 dalpha)`.
    pub finite_difference: T,
    /// Quadrature of the closed-form derivative fields.
    pub bracket: T,
    /// `-dp2 + hbar^2 / (2 dx2)` with the consistent `dx2`.
    pub closed_form: T,
    pub residual: T,
    /// `delta_p2_q`, the sum of the magnitudes of the two terms of the closed
    /// form; they cancel exactly when `k_q = 0`.
    pub scale: T,
}

impl<T: Real> GeneratorReport<T> {
    pub fn relative_residual(&self) -> T {
        self.residual / self.scale.max(T::epsilon())
    }

    pub fn relative_bracket_error(&self) -> T {
        (self.bracket - self.closed_form).abs() / self.scale.max(T::epsilon())
    }
}

pub fn generator_check<T: Real>(state: &HydroState<T>, dalpha: T) -> Result<GeneratorReport<T>> {
    let dp2 = |alpha: T| Kinematics::of(&dilate(state, alpha)).delta_p2_q();
    let finite_difference = (dp2(dalpha) - dp2(-dalpha)) / (T::cst(2.0) * dalpha);
    let k = Kinematics::of(state);
    let hbar = state.hbar();
    let dx2 = k.delta_x2(crate::functionals::Convention::Consistent)?;
    let closed_form = -k.delta_p2_q() + hbar * hbar / (T::cst(2.0) * dx2);
    let bracket = poisson_bracket(FunctionalTag::DeltaP2Q, FunctionalTag::S, state)?.value;
    Ok(GeneratorReport {
        dalpha,
        finite_difference,
        bracket,
        closed_form,
        residual: (finite_difference - closed_form).abs(),
        scale: k.delta_p2_q(),
    })
}

/// Hamiltonian flow of `S` for a parameter `alpha`:
/// `rho -> e^alpha rho`, `s -> e^-alpha s`. Canonical but not norm-preserving;
/// it agrees with the dilatation only on functionals of matching homogeneity.
fn action_flow<T: Real>(state: &HydroState<T>, alpha: T) -> HydroState<T> {
    let up = alpha.exp();
    let down = (-alpha).exp();
    HydroState::from_parts(
        state.rho().map(|r| r * up),
        state.s().map(|v| v * down),
        state.hbar(),
        state.mass(),
    )
}

/// Jacobi identity on `{S, H_q, K_q}`.
///
/// With `{S, H_q} = K_q` and `{S, K_q} = H_q` the cyclic sum reduces to
/// `{S, {H_q, K_q}}`, which is minus the derivative of the scalar
/// `{H_q, K_q}` along the flow generated by `S`. The derivative is taken by
/// centred differences in the flow parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobiReport<T> {
    pub h_k: T,
    /// `{K_q, {S, H_q}} = {K_q, K_q}`.
    pub k_term: T,
    /// `{H_q, {K_q, S}} = -{H_q, H_q}`.
    pub h_term: T,
    /// `{S, {H_q, K_q}}`.
    pub s_term: T,
    pub cyclic_sum: T,
}

pub fn jacobi_check<T: Real>(state: &HydroState<T>, dalpha: T) -> Result<JacobiReport<T>> {
    use FunctionalTag::{HQ, KQ};
    let hk = |alpha: T| -> Result<T> { Ok(poisson_bracket(HQ, KQ, &action_flow(state, alpha))?.value) };
    let h_k = hk(T::zero())?;
    let s_term = -(hk(dalpha)? - hk(-dalpha)?) / (T::cst(2.0) * dalpha);
    let table = DerivativeTable::of(state)?;
    let k_term = table.bracket(KQ, KQ).value;
    let h_term = -table.bracket(HQ, HQ).value;
    Ok(JacobiReport { h_k, k_term, h_term, s_term, cyclic_sum: s_term + k_term + h_term })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_gaussian, GaussianParams};
    use FunctionalTag::*;

    fn gaussian(sigma2: f64, b: f64, p0: f64) -> HydroState<f64> {
        let g = Grid::new(1, 512, 40.0).unwrap();
        make_gaussian(GaussianParams { sigma2, b, p0, ..Default::default() }, &g, 1.0, 1.0).unwrap()
    }

    #[test]
    fn self_bracket_vanishes() {
        let st = gaussian(1.0, 1.0, 2.0);
        assert!(poisson_bracket(HQ, HQ, &st).unwrap().value.abs() < 1e-14);
    }

    #[test]
    fn s_generates_the_mixing() {
        let st = gaussian(1.0, 1.0, 0.0);
        let v = poisson_bracket(S, HQ, &st).unwrap().value;
        assert!((v - 0.375).abs() < 1e-8);
        let min = gaussian(1.0, 0.0, 0.0);
        let v = poisson_bracket(S, KQ, &min).unwrap().value;
        assert!((v - 0.125).abs() < 1e-8);
    }

    #[test]
    fn antisymmetric_on_every_pair() {
        let st = gaussian(0.5, -1.0, 2.0);
        let t = DerivativeTable::of(&st).unwrap();
        for a in FunctionalTag::ALL {
            for b in FunctionalTag::ALL {
                assert_eq!(t.bracket(a, b).value, -t.bracket(b, a).value);
            }
        }
    }

    #[test]
    fn translation_commutes_with_energy() {
        let st = gaussian(2.0, 1.0, 2.0);
        assert!(poisson_bracket(PTranslation, HQ, &st).unwrap().value.abs() < 1e-8);
    }

    #[test]
    fn oracle_bracket_agrees() {
        let st = gaussian(1.0, 1.0, 2.0);
        let oracle = OracleTable::of(&st).unwrap();
        let closed = DerivativeTable::of(&st).unwrap();
        for (a, b) in [(S, HQ), (S, KQ), (PTranslation, HQ), (DeltaP2Q, S)] {
            let x = closed.bracket(a, b).value;
            let y = oracle.bracket(a, b).value;
            assert!((x - y).abs() <= 1e-8f64.max(1e-6 * x.abs()), "{a},{b}: {x} vs {y}");
        }
    }

    #[test]
    fn generator_minimal_gaussian() {
        let st = gaussian(1.0, 0.0, 0.0);
        let r = generator_check(&st, 1e-4).unwrap();
        assert!((r.closed_form - 0.25).abs() < 1e-10);
        assert!((r.bracket - 0.25).abs() < 1e-10);
        assert!(r.relative_residual() < 1e-6);
    }

    #[test]
    fn generator_converges_at_second_order() {
        let st = gaussian(0.5, 1.0, 2.0);
        let a = generator_check(&st, 2e-2).unwrap().residual;
        let b = generator_check(&st, 1e-2).unwrap().residual;
        assert!((a / b - 4.0).abs() < 0.4, "ratio {}", a / b);
    }

    #[test]
    fn jacobi_cyclic_sum_vanishes() {
        let st = gaussian(1.0, 1.0, 2.0);
        let r = jacobi_check(&st, 1e-3).unwrap();
        assert!(r.cyclic_sum.abs() < 1e-6 * r.h_k.abs().max(1.0), "{r:?}");
    }

    #[test]
    fn bilinear_in_scaled_functionals() {
        let st = gaussian(1.0, -1.0, 2.0);
        let t = DerivativeTable::of(&st).unwrap();
        // DeltaP2_q = 2 m H_q and Fisher = 2 I are fixed multiples.
        let x = t.bracket(DeltaP2Q, S).value;
        let y = 2.0 * t.bracket(HQ, S).value;
        assert!((x - y).abs() < 1e-12);
        // H_q + K_q = 2 H_cl
        let lhs = t.bracket(S, HQ).value + t.bracket(S, KQ).value;
        let rhs = 2.0 * t.bracket(S, HCl).value;
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
