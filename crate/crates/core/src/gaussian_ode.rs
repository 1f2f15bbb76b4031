//! Closed ODEs for the Gaussian family under either flow, integrated with an
//! adaptive Dormand-Prince 5(4) pair.
//!
//! With `rho ~ N(x0, sigma2)` per axis and `s = b r^2/2 + p0 r_0 + c`,
//! substituting into continuity and the Hamilton-Jacobi equation with the
//! quantum potential `-(hbar^2/2m) lap sqrt(rho)/sqrt(rho)` (t-flow) or its
//! sign flip (tau-flow) closes on
//!
//! ```text
//! sigma2' = 2 b sigma2 / m
//! b'      = (-b^2 +- hbar^2 / (4 sigma2^2)) / m
//! c'      = p0^2 / 2m -+ d hbar^2 / (4 m sigma2)
//! x0'     = p0 / m,   p0' = 0
//! ```
//!
//! with the upper sign for the t-flow.

use crate::dynamics::FlowKind;
use crate::error::{QrelError, Result};
use crate::scalar::Real;
use crate::state::GaussianParams;

/// Parameters of a Gaussian packet along a flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianOdeState<T> {
    pub sigma2: T,
    pub b: T,
    pub c: T,
    pub p0: T,
    pub x0: T,
}

impl<T: Real> From<GaussianParams<T>> for GaussianOdeState<T> {
    fn from(p: GaussianParams<T>) -> Self {
        Self { sigma2: p.sigma2, b: p.b, c: p.c, p0: p.p0, x0: p.x0 }
    }
}

impl<T: Real> From<GaussianOdeState<T>> for GaussianParams<T> {
    fn from(p: GaussianOdeState<T>) -> Self {
        Self { sigma2: p.sigma2, b: p.b, c: p.c, p0: p.p0, x0: p.x0 }
    }
}

/// Physical constants of the ODE right-hand side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianOde<T> {
    pub flow: FlowKind,
    pub hbar: T,
    pub mass: T,
    pub dim: usize,
}

const N: usize = 5;

impl<T: Real> GaussianOde<T> {
    pub fn new(flow: FlowKind, hbar: T, mass: T, dim: usize) -> Self {
        Self { flow, hbar, mass, dim }
    }

    fn sign(&self) -> T {
        match self.flow {
            FlowKind::T => T::one(),
            FlowKind::Tau => -T::one(),
        }
    }

    fn rhs(&self, y: &[T; N]) -> [T; N] {
        let [sigma2, b, _c, p0, _x0] = *y;
        let m = self.mass;
        let h2 = self.hbar * self.hbar;
        let four = T::cst(4.0);
        let d = T::from_count(self.dim);
        [
            T::cst(2.0) * b * sigma2 / m,
            (-b * b + self.sign() * h2 / (four * sigma2 * sigma2)) / m,
            p0 * p0 / (T::cst(2.0) * m) - self.sign() * d * h2 / (four * m * sigma2),
            T::zero(),
            p0 / m,
        ]
    }

    /// Time derivative at `y`.
    pub fn derivative(&self, y: GaussianOdeState<T>) -> GaussianOdeState<T> {
        unpack(self.rhs(&pack(y)))
    }

    /// Integrates from `y0` over `duration` (either sign) to tolerance `tol`.
    pub fn integrate(&self, y0: GaussianOdeState<T>, duration: T, tol: T) -> Result<GaussianOdeState<T>> {
        let mut out = Vec::new();
        self.integrate_to(y0, &[duration], tol, &mut out)?;
        Ok(out[0])
    }

    /// Integrates through the increasing (or decreasing) sample times `times`
    /// measured from `y0`, pushing the state at each.
    pub fn integrate_to(
        &self,
        y0: GaussianOdeState<T>,
        times: &[T],
        tol: T,
        out: &mut Vec<GaussianOdeState<T>>,
    ) -> Result<()> {
        let mut y = pack(y0);
        let mut t = T::zero();
        let mut h = T::cst(1e-3);
        for &target in times {
            let dir = if target >= t { T::one() } else { -T::one() };
            let mut steps = 0usize;
            while (target - t) * dir > T::zero() {
                steps += 1;
                if steps > 10_000_000 {
                    return Err(QrelError::StepSize {
                        step: steps,
                        reason: "Gaussian ODE needs too many steps".into(),
                    });
                }
                let remaining = (target - t).abs();
                let step = h.min(remaining) * dir;
                let (next, err) = self.dopri_step(&y, step);
                let norm = ((0..N)
                    .map(|i| {
                        let sc = tol * (T::one() + next[i].abs().max(y[i].abs()));
                        (err[i] / sc).powi(2)
                    })
                    .sum::<T>()
                    / T::from_count(N))
                .sqrt();
                if norm <= T::one() || step.abs() <= T::cst(1e-14) {
                    t = t + step;
                    if (target - t).abs() <= T::epsilon() * target.abs().max(T::one()) {
                        t = target;
                    }
                    y = next;
                    if !(y[0] > T::zero()) {
                        return Err(QrelError::Degenerate(format!(
                            "Gaussian width collapsed at theta = {t}"
                        )));
                    }
                }
                let factor = if norm > T::zero() {
                    (T::cst(0.9) * norm.powf(T::cst(-0.2))).min(T::cst(5.0)).max(T::cst(0.2))
                } else {
                    T::cst(5.0)
                };
                h = (step.abs() * factor).max(T::cst(1e-14));
            }
            out.push(unpack(y));
        }
        Ok(())
    }

    /// One Dormand-Prince step; returns the fifth-order solution and the
    /// embedded error estimate.
    fn dopri_step(&self, y: &[T; N], h: T) -> ([T; N], [T; N]) {
        let c = |x: f64| T::cst(x);
        let a21 = c(1.0 / 5.0);
        let (a31, a32) = (c(3.0 / 40.0), c(9.0 / 40.0));
        let (a41, a42, a43) = (c(44.0 / 45.0), c(-56.0 / 15.0), c(32.0 / 9.0));
        let (a51, a52, a53, a54) = (
            c(19372.0 / 6561.0),
            c(-25360.0 / 2187.0),
            c(64448.0 / 6561.0),
            c(-212.0 / 729.0),
        );
        let (a61, a62, a63, a64, a65) = (
            c(9017.0 / 3168.0),
            c(-355.0 / 33.0),
            c(46732.0 / 5247.0),
            c(49.0 / 176.0),
            c(-5103.0 / 18656.0),
        );
        let b = [
            c(35.0 / 384.0),
            T::zero(),
            c(500.0 / 1113.0),
            c(125.0 / 192.0),
            c(-2187.0 / 6784.0),
            c(11.0 / 84.0),
            T::zero(),
        ];
        let bs = [
            c(5179.0 / 57600.0),
            T::zero(),
            c(7571.0 / 16695.0),
            c(393.0 / 640.0),
            c(-92097.0 / 339200.0),
            c(187.0 / 2100.0),
            c(1.0 / 40.0),
        ];
        let comb = |terms: &[(T, &[T; N])]| -> [T; N] {
            let mut out = *y;
            for (w, k) in terms {
                for i in 0..N {
                    out[i] += h * *w * k[i];
                }
            }
            out
        };
        let k1 = self.rhs(y);
        let k2 = self.rhs(&comb(&[(a21, &k1)]));
        let k3 = self.rhs(&comb(&[(a31, &k1), (a32, &k2)]));
        let k4 = self.rhs(&comb(&[(a41, &k1), (a42, &k2), (a43, &k3)]));
        let k5 = self.rhs(&comb(&[(a51, &k1), (a52, &k2), (a53, &k3), (a54, &k4)]));
        let k6 = self.rhs(&comb(&[(a61, &k1), (a62, &k2), (a63, &k3), (a64, &k4), (a65, &k5)]));
        let y5 = comb(&[(b[0], &k1), (b[2], &k3), (b[3], &k4), (b[4], &k5), (b[5], &k6)]);
        let k7 = self.rhs(&y5);
        let ks = [k1, k2, k3, k4, k5, k6, k7];
        let mut err = [T::zero(); N];
        for (j, k) in ks.iter().enumerate() {
            let w = b[j] - bs[j];
            for i in 0..N {
                err[i] += h * w * k[i];
            }
        }
        (y5, err)
    }
}

fn pack<T: Real>(y: GaussianOdeState<T>) -> [T; N] {
    [y.sigma2, y.b, y.c, y.p0, y.x0]
}

fn unpack<T: Real>(y: [T; N]) -> GaussianOdeState<T> {
    GaussianOdeState { sigma2: y[0], b: y[1], c: y[2], p0: y[3], x0: y[4] }
}

/// Width of a freely spreading packet, `sigma0^2 + (hbar t / 2 m sigma0)^2`
/// for an initially flat phase.
pub fn free_spreading<T: Real>(sigma0_sq: T, t: T, hbar: T, mass: T) -> T {
    sigma0_sq + (hbar * t / (T::cst(2.0) * mass)).powi(2) / sigma0_sq
}
