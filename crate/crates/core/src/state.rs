//! The canonical field pair `(rho, s)`, its wave-function form
//! `psi = sqrt(rho) exp(i s / hbar)`, and the Gaussian test family.

use num_complex::Complex;

use crate::error::{QrelError, Result};
use crate::grid::{ComplexField, Field, Grid, RealField};
use crate::scalar::Real;

/// Density regulariser used in every division by `rho` or `|psi|`.
pub const RHO_FLOOR: f64 = 1e-30;

/// Largest allowed amplitude `|psi|` on the box boundary.
pub const TAIL_AMPLITUDE: f64 = 1e-12;

fn normalization_tolerance<T: Real>() -> T {
    T::cst(1e-10).max(T::epsilon() * T::cst(1e3))
}

fn check_units<T: Real>(hbar: T, mass: T) -> Result<()> {
    if !(hbar > T::zero()) || !hbar.is_finite() {
        return Err(QrelError::config("hbar", format!("must be positive, got {hbar}")));
    }
    if !(mass > T::zero()) || !mass.is_finite() {
        return Err(QrelError::config("mass", format!("must be positive, got {mass}")));
    }
    Ok(())
}

/// Density `rho` and action `s` of an ensemble, with the constants that set
/// the dynamics.
#[derive(Clone, Debug)]
pub struct HydroState<T: Real> {
    rho: RealField<T>,
    s: RealField<T>,
    hbar: T,
    mass: T,
}

impl<T: Real> HydroState<T> {
    /// Validates positivity, normalisation and grid binding.
    pub fn new(rho: RealField<T>, s: RealField<T>, hbar: T, mass: T) -> Result<Self> {
        check_units(hbar, mass)?;
        if rho.grid() != s.grid() {
            return Err(QrelError::Structural("rho and s bound to different grids".into()));
        }
        if let Some(bad) = rho.values().iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(QrelError::Degenerate(format!("density sample {bad} is negative or not finite")));
        }
        if s.values().iter().any(|v| !v.is_finite()) {
            return Err(QrelError::Degenerate("action field contains non-finite samples".into()));
        }
        let norm = rho.quadrature();
        if (norm - T::one()).abs() > normalization_tolerance::<T>() {
            return Err(QrelError::Degenerate(format!("density integrates to {norm}, expected 1")));
        }
        Ok(Self { rho, s, hbar, mass })
    }

    /// Skips validation; for transformations that preserve the invariants.
    pub(crate) fn from_parts(rho: RealField<T>, s: RealField<T>, hbar: T, mass: T) -> Self {
        Self { rho, s, hbar, mass }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.rho.grid()
    }

    pub fn rho(&self) -> &RealField<T> {
        &self.rho
    }

    pub fn s(&self) -> &RealField<T> {
        &self.s
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    /// Same fields with a different `hbar`.
    pub fn with_hbar(&self, hbar: T) -> Result<Self> {
        check_units(hbar, self.mass)?;
        Ok(Self {
            hbar,
            ..self.clone()
        })
    }

    /// Adds a constant to the action.
    pub fn shift_action(&self, shift: T) -> Self {
        Self {
            s: self.s.map(|v| v + shift),
            ..self.clone()
        }
    }
}

/// Complex wave function on a grid.
#[derive(Clone, Debug)]
pub struct WaveField<T: Real> {
    psi: ComplexField<T>,
    hbar: T,
    mass: T,
}

impl<T: Real> WaveField<T> {
    pub fn new(psi: ComplexField<T>, hbar: T, mass: T) -> Result<Self> {
        check_units(hbar, mass)?;
        if psi.values().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(QrelError::Degenerate("wave function contains non-finite samples".into()));
        }
        let norm = psi.norm_sqr();
        if (norm - T::one()).abs() > normalization_tolerance::<T>() {
            return Err(QrelError::Degenerate(format!("wave function has norm {norm}, expected 1")));
        }
        Ok(Self { psi, hbar, mass })
    }

    pub(crate) fn from_parts(psi: ComplexField<T>, hbar: T, mass: T) -> Self {
        Self { psi, hbar, mass }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.psi.grid()
    }

    pub fn psi(&self) -> &ComplexField<T> {
        &self.psi
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    /// Integral of `|psi|^2`.
    pub fn norm(&self) -> T {
        self.psi.norm_sqr()
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &WaveField<T>) -> Result<Complex<T>> {
        let prod = self.psi.zip_with(&other.psi, |a, b| a.conj() * b)?;
        let grid = self.grid();
        let re = grid.integrate_with(|i| prod.values()[i].re);
        let im = grid.integrate_with(|i| prod.values()[i].im);
        Ok(Complex::new(re, im))
    }

    /// Multiplies by the global phase `exp(i theta)`.
    pub fn with_global_phase(&self, theta: T) -> Self {
        let factor = Complex::from_polar(T::one(), theta);
        Self {
            psi: self.psi.map(|v| v * factor),
            ..self.clone()
        }
    }
}

/// Parameters of the Gaussian family
/// `rho ~ N(x0, sigma2)`, `s = b|x - x0|^2/2 + p0 (x - x0)_0 + c`.
///
/// `x0` and `p0` act along the first axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianParams<T> {
    pub sigma2: T,
    pub b: T,
    pub c: T,
    pub p0: T,
    pub x0: T,
}

impl<T: Real> Default for GaussianParams<T> {
    fn default() -> Self {
        Self {
            sigma2: T::one(),
            b: T::zero(),
            c: T::zero(),
            p0: T::zero(),
            x0: T::zero(),
        }
    }
}

impl<T: Real> GaussianParams<T> {
    pub fn minimal(sigma2: T) -> Self {
        Self {
            sigma2,
            ..Self::default()
        }
    }
}

/// Samples a normalised Gaussian packet on `grid`.
pub fn make_gaussian<T: Real>(
    params: GaussianParams<T>,
    grid: &Grid<T>,
    hbar: T,
    mass: T,
) -> Result<HydroState<T>> {
    check_units(hbar, mass)?;
    let GaussianParams { sigma2, b, c, p0, x0 } = params;
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(QrelError::config("sigma2", format!("must be positive, got {sigma2}")));
    }
    let half = grid.length() / T::cst(2.0);
    let dim = grid.dim();
    let norm = (T::cst(2.0) * T::PI() * sigma2).powf(-T::from_count(dim) / T::cst(2.0));
    let edge = half - x0.abs();
    let tail = norm.sqrt() * (-(edge * edge) / (T::cst(4.0) * sigma2)).exp();
    if !(edge > T::zero()) || tail >= T::cst(TAIL_AMPLITUDE) {
        return Err(QrelError::config(
            "sigma2",
            format!(
                "packet with sigma2 = {sigma2} centred at {x0} leaves |psi| = {tail:e} on the boundary of a box with L = {}",
                grid.length()
            ),
        ));
    }
    let offset = |x: &[T]| -> (T, T) {
        let d0 = x[0] - x0;
        let r2 = x[1..].iter().fold(d0 * d0, |acc, &v| acc + v * v);
        (d0, r2)
    };
    let rho = Field::from_fn(grid, |x| {
        let (_, r2) = offset(x);
        norm * (-r2 / (T::cst(2.0) * sigma2)).exp()
    });
    let s = Field::from_fn(grid, |x| {
        let (d0, r2) = offset(x);
        b * r2 / T::cst(2.0) + p0 * d0 + c
    });
    Ok(HydroState::from_parts(rho, s, hbar, mass))
}

/// `psi = sqrt(rho) exp(i s / hbar)` pointwise.
pub fn to_wave<T: Real>(state: &HydroState<T>) -> WaveField<T> {
    let hbar = state.hbar();
    let psi = state
        .rho()
        .zip_with(state.s(), |r, s| Complex::from_polar(r.sqrt(), s / hbar))
        .expect("state fields share a grid");
    WaveField::from_parts(psi, hbar, state.mass())
}

/// How strictly `from_wave` treats low-density regions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhaseExtraction {
    /// Reject any wave function whose density drops below `1e-15` of its
    /// maximum anywhere on the grid.
    Strict,
    /// Extract the phase gradient only where `rho > RHO_FLOOR`; elsewhere the
    /// action is carried forward unchanged.
    #[default]
    Floored,
}

/// Phase gradient `hbar Im(psi* grad psi) / |psi|^2`, zero where the density
/// is below the floor.
pub fn phase_gradient<T: Real>(w: &WaveField<T>) -> Vec<Vec<T>> {
    let grid = w.grid();
    let psi = w.psi().values();
    let floor = T::cst(RHO_FLOOR);
    grid.gradient_complex(psi)
        .into_iter()
        .map(|dpsi| {
            psi.iter()
                .zip(&dpsi)
                .map(|(p, d)| {
                    let rho = p.norm_sqr();
                    if rho > floor {
                        w.hbar() * (p.conj() * d).im / rho
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// Inverse polar decomposition.
///
/// The action is rebuilt by unwrapping `hbar arg psi` outward from the box
/// centre: each step picks the branch closest to the value predicted by
/// trapezoidal integration of the phase gradient. Axis 0 is swept through the
/// centre first, then each further axis from the already-determined
/// hyperplane. `s(centre) = hbar arg psi(centre)`.
pub fn from_wave<T: Real>(w: &WaveField<T>, mode: PhaseExtraction) -> Result<HydroState<T>> {
    let grid = w.grid();
    let psi = w.psi().values();
    let rho: Vec<T> = psi.iter().map(|p| p.norm_sqr()).collect();
    if mode == PhaseExtraction::Strict {
        let max = rho.iter().copied().fold(T::zero(), T::max);
        let min = rho.iter().copied().fold(T::infinity(), T::min);
        if min < T::cst(1e-15) * max {
            return Err(QrelError::Degenerate(format!(
                "wave function has a node: min |psi|^2 = {min:e} against max {max:e}"
            )));
        }
    }
    let grad = phase_gradient(w);
    let hbar = w.hbar();
    let floor = T::cst(RHO_FLOOR);
    let two_pi_hbar = T::cst(2.0) * T::PI() * hbar;
    let h = grid.spacing();
    let half = T::cst(0.5);

    let mut s = vec![T::zero(); grid.len()];
    let centre = grid.center_index();
    s[centre] = hbar * psi[centre].arg();

    let mid = grid.n() / 2;
    for axis in 0..grid.dim() {
        for seed in 0..grid.len() {
            let on_seed_plane = (axis..grid.dim()).all(|b| grid.axis_index(seed, b) == mid);
            if !on_seed_plane {
                continue;
            }
            let line: Vec<usize> = grid.line_through(seed, axis).collect();
            let mut step = |from: usize, to: usize, sign: T| {
                let predicted = s[from] + sign * h * half * (grad[axis][from] + grad[axis][to]);
                s[to] = if rho[to] > floor {
                    let base = hbar * psi[to].arg();
                    let turns = ((predicted - base) / two_pi_hbar).round();
                    base + turns * two_pi_hbar
                } else {
                    predicted
                };
            };
            for j in mid..grid.n() - 1 {
                step(line[j], line[j + 1], T::one());
            }
            for j in (1..=mid).rev() {
                step(line[j], line[j - 1], -T::one());
            }
        }
    }

    let rho = Field::new(grid.clone(), rho)?;
    let s = Field::new(grid.clone(), s)?;
    Ok(HydroState::from_parts(rho, s, hbar, w.mass()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid<f64> {
        Grid::new(1, 512, 40.0).unwrap()
    }

    fn max_abs(a: impl IntoIterator<Item = f64>) -> f64 {
        a.into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    #[test]
    fn gaussian_is_normalised() {
        let st = make_gaussian(GaussianParams::minimal(1.0), &grid(), 1.0, 1.0).unwrap();
        assert!((st.rho().quadrature() - 1.0).abs() < 1e-12);
        assert!(HydroState::new(st.rho().clone(), st.s().clone(), 1.0, 1.0).is_ok());
    }

    #[test]
    fn gaussian_variance_and_mean_momentum() {
        let g = grid();
        let st = make_gaussian(GaussianParams::minimal(1.0), &g, 1.0, 1.0).unwrap();
        let x = g.coordinates(0);
        let var = g.integrate_with(|i| st.rho().values()[i] * x[i] * x[i]);
        assert!((var - 1.0).abs() < 1e-10);

        let p = GaussianParams { p0: 2.0, ..GaussianParams::minimal(1.0) };
        let st = make_gaussian(p, &g, 1.0, 1.0).unwrap();
        let w = to_wave(&st);
        let grad = phase_gradient(&w);
        let mean = g.integrate_with(|i| st.rho().values()[i] * grad[0][i]);
        assert!((mean - 2.0).abs() < 1e-10);
    }

    #[test]
    fn wide_packet_is_rejected_with_context() {
        let err = make_gaussian(GaussianParams::minimal(9.0), &grid(), 1.0, 1.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sigma2 = 9") && msg.contains("L = 40"), "{msg}");
    }

    #[test]
    fn real_wave_for_zero_action() {
        let st = make_gaussian(GaussianParams::minimal(1.0), &grid(), 1.0, 1.0).unwrap();
        let w = to_wave(&st);
        for (p, r) in w.psi().values().iter().zip(st.rho().values()) {
            assert_eq!(p.im, 0.0);
            assert_eq!(p.re, r.sqrt());
        }
    }

    #[test]
    fn modulus_identity_and_norm() {
        let p = GaussianParams { b: 1.0, p0: 0.5, c: 0.2, ..GaussianParams::minimal(1.0) };
        let st = make_gaussian(p, &grid(), 1.0, 1.0).unwrap();
        let w = to_wave(&st);
        let diff = w.psi().values().iter().zip(st.rho().values()).map(|(p, r)| p.norm_sqr() - r);
        assert!(max_abs(diff) < 1e-14);
        assert!((w.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_recovers_action_up_to_constant() {
        let g = grid();
        let p = GaussianParams { b: 3.0, p0: 1.5, c: 7.0, ..GaussianParams::minimal(1.0) };
        let st = make_gaussian(p, &g, 1.0, 1.0).unwrap();
        let back = from_wave(&to_wave(&st), PhaseExtraction::Floored).unwrap();
        let rho_err = back.rho().values().iter().zip(st.rho().values()).map(|(a, b)| a - b);
        assert!(max_abs(rho_err) < 1e-14);
        let centre = g.center_index();
        let shift = st.s().values()[centre] - back.s().values()[centre];
        let err = (0..g.len())
            .filter(|&i| st.rho().values()[i] > RHO_FLOOR)
            .map(|i| back.s().values()[i] + shift - st.s().values()[i]);
        assert!(max_abs(err) < 1e-8);
    }

    #[test]
    fn real_positive_wave_has_zero_action() {
        let st = make_gaussian(GaussianParams::minimal(1.0), &grid(), 1.0, 1.0).unwrap();
        let back = from_wave(&to_wave(&st), PhaseExtraction::Floored).unwrap();
        let resolved = (0..st.grid().len()).filter(|&i| st.rho().values()[i] > RHO_FLOOR);
        assert!(resolved.map(|i| back.s().values()[i]).all(|v| v == 0.0));
    }

    #[test]
    fn quadratic_phase_gradient() {
        let g = grid();
        let p = GaussianParams { b: 1.0, ..GaussianParams::minimal(1.0) };
        let st = make_gaussian(p, &g, 1.0, 1.0).unwrap();
        let grad = phase_gradient(&to_wave(&st));
        let x = g.coordinates(0);
        let err = (0..g.len())
            .filter(|&i| st.rho().values()[i] > 1e-12)
            .map(|i| grad[0][i] - x[i]);
        assert!(max_abs(err) < 1e-8);
    }

    #[test]
    fn strict_mode_rejects_localised_tails() {
        let st = make_gaussian(GaussianParams::minimal(1.0), &grid(), 1.0, 1.0).unwrap();
        assert!(matches!(
            from_wave(&to_wave(&st), PhaseExtraction::Strict),
            Err(QrelError::Degenerate(_))
        ));
    }

    #[test]
    fn strict_mode_accepts_nodeless_wave() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let k = 2.0 * std::f64::consts::PI / 10.0;
        let psi = Field::from_fn(&g, |x| {
            let amp = ((1.0 + 0.5 * (k * x[0]).cos()) / 10.0).sqrt();
            Complex::from_polar(amp, 3.0 * k * x[0])
        });
        let w = WaveField::new(psi, 1.0, 1.0).unwrap();
        let st = from_wave(&w, PhaseExtraction::Strict).unwrap();
        let x = g.coordinates(0);
        let centre = g.center_index();
        let err = (0..g.len()).map(|i| st.s().values()[i] - st.s().values()[centre] - 3.0 * k * x[i]);
        assert!(max_abs(err) < 1e-10);
    }

    #[test]
    fn global_phase_shifts_action_by_constant() {
        let g = grid();
        let p = GaussianParams { b: 0.5, ..GaussianParams::minimal(1.0) };
        let st = make_gaussian(p, &g, 1.0, 1.0).unwrap();
        let w = to_wave(&st);
        let a = from_wave(&w, PhaseExtraction::Floored).unwrap();
        let b = from_wave(&w.with_global_phase(0.3), PhaseExtraction::Floored).unwrap();
        let err = (0..g.len())
            .filter(|&i| st.rho().values()[i] > RHO_FLOOR)
            .map(|i| b.s().values()[i] - a.s().values()[i] - 0.3);
        assert!(max_abs(err) < 1e-10);
    }

    #[test]
    fn two_dimensional_round_trip() {
        let g = Grid::<f64>::new(2, 64, 24.0).unwrap();
        let p = GaussianParams { b: 0.3, p0: 0.5, ..GaussianParams::minimal(1.0) };
        let st = make_gaussian(p, &g, 1.0, 1.0).unwrap();
        assert!((st.rho().quadrature() - 1.0).abs() < 1e-12);
        let back = from_wave(&to_wave(&st), PhaseExtraction::Floored).unwrap();
        let centre = g.center_index();
        let shift = st.s().values()[centre] - back.s().values()[centre];
        let err = (0..g.len())
            .filter(|&i| st.rho().values()[i] > 1e-20)
            .map(|i| back.s().values()[i] + shift - st.s().values()[i]);
        assert!(max_abs(err) < 1e-8);
    }
}
