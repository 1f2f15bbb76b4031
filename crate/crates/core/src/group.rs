//! The one-parameter dilatation group: arithmetic laws on uncertainty pairs,
//! its exact action on states, and the hyperbolic mixing of `(h_q, k_q)` and
//! of the two times.

use std::ops::{Add, Neg};

use crate::error::{QrelError, Result};
use crate::functionals::UncertaintyPair;
use crate::grid::Field;
use crate::scalar::Real;
use crate::state::HydroState;

/// Group element `T_alpha`; composition adds parameters.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct GroupParam<T> {
    pub alpha: T,
}

impl<T: Real> GroupParam<T> {
    pub fn new(alpha: T) -> Self {
        Self { alpha }
    }

    pub fn identity() -> Self {
        Self { alpha: T::zero() }
    }

    pub fn compose(self, other: Self) -> Self {
        Self { alpha: self.alpha + other.alpha }
    }

    pub fn inverse(self) -> Self {
        Self { alpha: -self.alpha }
    }
}

impl<T: Real> Add for GroupParam<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.compose(rhs)
    }
}

impl<T: Real> Neg for GroupParam<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.inverse()
    }
}

/// `dx2' = e^-a dx2`, `dp2' = e^-a dp2 + (hbar^2/4)(e^a - e^-a)/dx2`.
pub fn transform_uncertainty<T: Real>(
    u: UncertaintyPair<T>,
    alpha: T,
    hbar: T,
) -> Result<UncertaintyPair<T>> {
    if !(u.dx2 > T::zero()) {
        return Err(QrelError::Domain(format!("dx2 must be positive, got {}", u.dx2)));
    }
    let down = (-alpha).exp();
    let up = alpha.exp();
    let quarter = hbar * hbar / T::cst(4.0);
    Ok(UncertaintyPair {
        dx2: down * u.dx2,
        dp2: down * u.dp2 + quarter * (up - down) / u.dx2,
    })
}

/// Image of the product `dx2 dp2` under `T_alpha`.
pub fn product_law<T: Real>(prod: T, alpha: T, hbar: T) -> T {
    if alpha == T::zero() {
        return prod;
    }
    let quarter = hbar * hbar / T::cst(4.0);
    let shrink = (T::cst(-2.0) * alpha).exp();
    // (prod - hbar^2/4) e^-2a + hbar^2/4 keeps the fixed point exact.
    (prod - quarter) * shrink + quarter
}

/// Space dilatation acting on a state by relabelling the grid: lengths scale
/// by `e^{-alpha/2}`, densities by `e^{d alpha/2}`, actions by `e^{-alpha}`.
pub fn dilate<T: Real>(state: &HydroState<T>, alpha: T) -> HydroState<T> {
    if alpha == T::zero() {
        return state.clone();
    }
    let d = T::from_count(state.grid().dim());
    let grid = state.grid().rescaled((-alpha / T::cst(2.0)).exp());
    let rho_scale = (d * alpha / T::cst(2.0)).exp();
    let s_scale = (-alpha).exp();
    let rho = state.rho().values().iter().map(|&r| r * rho_scale).collect();
    let s = state.s().values().iter().map(|&v| v * s_scale).collect();
    HydroState::from_parts(
        Field::new(grid.clone(), rho).expect("same sample count"),
        Field::new(grid, s).expect("same sample count"),
        state.hbar(),
        state.mass(),
    )
}

/// `h' = cosh(a) h - sinh(a) k`, `k' = -sinh(a) h + cosh(a) k`.
pub fn mix_hk<T: Real>(h: T, k: T, alpha: T) -> (T, T) {
    let (c, s) = (alpha.cosh(), alpha.sinh());
    (c * h - s * k, -s * h + c * k)
}

/// `t' = cosh(a) t + sinh(a) tau`, `tau' = sinh(a) t + cosh(a) tau`.
pub fn mix_times<T: Real>(t: T, tau: T, alpha: T) -> (T, T) {
    let (c, s) = (alpha.cosh(), alpha.sinh());
    (c * t + s * tau, s * t + c * tau)
}
