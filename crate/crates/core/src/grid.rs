//! Periodic uniform grids, spectral differentiation and rectangle-rule
//! quadrature.
//!
//! Samples are stored row-major: the last axis is contiguous. A grid of side
//! `length` with `n` points per axis has spacing `length / n` and its
//! coordinates run over `[-length/2, length/2)`, so the box is centred on the
//! origin and index `n/2` sits at zero.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{QrelError, Result};
use crate::scalar::{compensated_sum, Real};

const MIN_POINTS: usize = 16;
const MAX_DIM: usize = 3;

struct Transforms<T> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Periodic box of side `length` with `n` points along each of `dim` axes.
///
/// Cloning is cheap: transform plans are shared and depend on `n` only, so a
/// rescaled grid reuses them.
#[derive(Clone)]
pub struct Grid<T: Real> {
    dim: usize,
    n: usize,
    length: T,
    spacing: T,
    transforms: Arc<Transforms<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl<T: Real> Grid<T> {
    pub fn new(dim: usize, n: usize, length: T) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(QrelError::config("dim", format!("must be 1, 2 or 3, got {dim}")));
        }
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(QrelError::config(
                "n",
                format!("must be a power of two >= {MIN_POINTS}, got {n}"),
            ));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(QrelError::config("length", format!("must be positive and finite, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let transforms = Transforms {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        Ok(Self {
            dim,
            n,
            length,
            spacing: length / T::from_count(n),
            transforms: Arc::new(transforms),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Total number of samples, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one sample, `spacing^dim`.
    pub fn cell_volume(&self) -> T {
        self.spacing.powi(self.dim as i32)
    }

    /// Same grid with every length multiplied by `factor`.
    pub fn rescaled(&self, factor: T) -> Self {
        let length = self.length * factor;
        Self {
            dim: self.dim,
            n: self.n,
            length,
            spacing: length / T::from_count(self.n),
            transforms: Arc::clone(&self.transforms),
        }
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Index along `axis` of the sample at `flat`.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.stride(axis)) % self.n
    }

    /// Coordinate of grid index `j` along any axis.
    pub fn coordinate(&self, j: usize) -> T {
        T::from_count(j) * self.spacing - self.length / T::cst(2.0)
    }

    /// Coordinate along `axis` of every sample.
    pub fn coordinates(&self, axis: usize) -> Vec<T> {
        (0..self.len())
            .map(|flat| self.coordinate(self.axis_index(flat, axis)))
            .collect()
    }

    /// Flat index of the box centre (the origin).
    pub fn center_index(&self) -> usize {
        (0..self.dim).map(|axis| (self.n / 2) * self.stride(axis)).sum()
    }

    /// Flat indices of the line through `flat` along `axis`, in order.
    pub fn line_through(&self, flat: usize, axis: usize) -> impl Iterator<Item = usize> {
        let stride = self.stride(axis);
        let base = flat - self.axis_index(flat, axis) * stride;
        (0..self.n).map(move |j| base + j * stride)
    }

    /// Signed integer wavenumber of FFT bin `j`; the Nyquist bin is `+n/2`.
    fn mode(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    fn fundamental(&self) -> T {
        T::cst(2.0) * T::PI() / self.length
    }

    /// Angular wavenumbers of the FFT bins along one axis.
    pub fn wavenumbers(&self) -> Vec<T> {
        let k0 = self.fundamental();
        (0..self.n).map(|j| k0 * T::cst(self.mode(j) as f64)).collect()
    }

    /// In-place unnormalised multi-dimensional transform.
    fn transform(&self, data: &mut [Complex<T>], inverse: bool) {
        debug_assert_eq!(data.len(), self.len());
        let fft = if inverse {
            &self.transforms.inverse
        } else {
            &self.transforms.forward
        };
        for axis in 0..self.dim {
            let stride = self.stride(axis);
            if stride == 1 {
                fft.process(data);
                continue;
            }
            // Gather every line along `axis` into a contiguous batch.
            let lines = self.len() / self.n;
            let mut batch = vec![Complex::new(T::zero(), T::zero()); self.len()];
            let mut starts = Vec::with_capacity(lines);
            for flat in 0..self.len() {
                if self.axis_index(flat, axis) == 0 {
                    starts.push(flat);
                }
            }
            for (line, &start) in starts.iter().enumerate() {
                for j in 0..self.n {
                    batch[line * self.n + j] = data[start + j * stride];
                }
            }
            fft.process(&mut batch);
            for (line, &start) in starts.iter().enumerate() {
                for j in 0..self.n {
                    data[start + j * stride] = batch[line * self.n + j];
                }
            }
        }
    }

    /// Forward transform of complex samples.
    pub fn spectrum(&self, values: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut data = values.to_vec();
        self.transform(&mut data, false);
        data
    }

    /// Forward transform of real samples.
    pub fn spectrum_real(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut data: Vec<_> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut data, false);
        data
    }

    /// Normalised inverse transform.
    pub fn synthesize(&self, mut spectrum: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.transform(&mut spectrum, true);
        let scale = T::one() / T::from_count(self.len());
        for v in spectrum.iter_mut() {
            *v = *v * scale;
        }
        spectrum
    }

    /// Multiplies a spectrum by `i k_axis`. The Nyquist bin is dropped so that
    /// real fields stay real.
    fn apply_derivative(&self, spectrum: &mut [Complex<T>], axis: usize) {
        let k0 = self.fundamental();
        let nyquist = self.n / 2;
        for (flat, v) in spectrum.iter_mut().enumerate() {
            let j = self.axis_index(flat, axis);
            if j == nyquist {
                *v = Complex::new(T::zero(), T::zero());
            } else {
                let k = k0 * T::cst(self.mode(j) as f64);
                *v = Complex::new(-v.im * k, v.re * k);
            }
        }
    }

    /// Multiplies a spectrum by `-|k|^2`.
    fn apply_laplacian(&self, spectrum: &mut [Complex<T>]) {
        let k0 = self.fundamental();
        for (flat, v) in spectrum.iter_mut().enumerate() {
            let mut k2 = T::zero();
            for axis in 0..self.dim {
                let k = k0 * T::cst(self.mode(self.axis_index(flat, axis)) as f64);
                k2 += k * k;
            }
            *v = *v * (-k2);
        }
    }

    pub fn derivative_complex(&self, values: &[Complex<T>], axis: usize) -> Vec<Complex<T>> {
        let mut spec = self.spectrum(values);
        self.apply_derivative(&mut spec, axis);
        self.synthesize(spec)
    }

    pub fn gradient_complex(&self, values: &[Complex<T>]) -> Vec<Vec<Complex<T>>> {
        let spec = self.spectrum(values);
        (0..self.dim)
            .map(|axis| {
                let mut s = spec.clone();
                self.apply_derivative(&mut s, axis);
                self.synthesize(s)
            })
            .collect()
    }

    pub fn laplacian_complex(&self, values: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut spec = self.spectrum(values);
        self.apply_laplacian(&mut spec);
        self.synthesize(spec)
    }

    pub fn derivative_real(&self, values: &[T], axis: usize) -> Vec<T> {
        let mut spec = self.spectrum_real(values);
        self.apply_derivative(&mut spec, axis);
        self.synthesize(spec).into_iter().map(|c| c.re).collect()
    }

    pub fn gradient_real(&self, values: &[T]) -> Vec<Vec<T>> {
        let spec = self.spectrum_real(values);
        (0..self.dim)
            .map(|axis| {
                let mut s = spec.clone();
                self.apply_derivative(&mut s, axis);
                self.synthesize(s).into_iter().map(|c| c.re).collect()
            })
            .collect()
    }

    pub fn laplacian_real(&self, values: &[T]) -> Vec<T> {
        let mut spec = self.spectrum_real(values);
        self.apply_laplacian(&mut spec);
        self.synthesize(spec).into_iter().map(|c| c.re).collect()
    }

    /// Divergence of a vector field given per axis.
    pub fn divergence_real(&self, components: &[Vec<T>]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for (axis, comp) in components.iter().enumerate() {
            for (o, d) in out.iter_mut().zip(self.derivative_real(comp, axis)) {
                *o += d;
            }
        }
        out
    }

    /// Rectangle-rule integral of raw samples.
    pub fn integrate(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.len());
        self.cell_volume() * compensated_sum(values.iter().copied())
    }

    /// Rectangle-rule integral of `f(i)` over every sample index.
    pub fn integrate_with(&self, f: impl Fn(usize) -> T) -> T {
        self.cell_volume() * compensated_sum((0..self.len()).map(f))
    }

    /// `|k|^2` of every FFT bin, in flat spectral order.
    pub fn wavenumbers_sq(&self) -> Vec<T> {
        let k0 = self.fundamental();
        (0..self.len())
            .map(|flat| {
                (0..self.dim)
                    .map(|axis| {
                        let k = k0 * T::cst(self.mode(self.axis_index(flat, axis)) as f64);
                        k * k
                    })
                    .sum()
            })
            .collect()
    }
}

/// Samples bound to a grid.
#[derive(Clone, Debug)]
pub struct Field<T: Real, V> {
    grid: Grid<T>,
    values: Vec<V>,
}

pub type RealField<T> = Field<T, T>;
pub type ComplexField<T> = Field<T, Complex<T>>;

impl<T: Real, V: Copy> Field<T, V> {
    pub fn new(grid: Grid<T>, values: Vec<V>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(QrelError::Structural(format!(
                "field has {} samples but its grid has {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field by evaluating `f` at the coordinates of every sample.
    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut(&[T]) -> V) -> Self {
        let mut coords = [T::zero(); MAX_DIM];
        let values = (0..grid.len())
            .map(|flat| {
                for (axis, c) in coords.iter_mut().enumerate().take(grid.dim()) {
                    *c = grid.coordinate(grid.axis_index(flat, axis));
                }
                f(&coords[..grid.dim()])
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn into_values(self) -> Vec<V> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<W: Copy>(&self, f: impl Fn(V) -> W) -> Field<T, W> {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<U: Copy, W: Copy>(
        &self,
        other: &Field<T, U>,
        f: impl Fn(V, U) -> W,
    ) -> Result<Field<T, W>> {
        if self.grid != other.grid {
            return Err(QrelError::Structural(format!(
                "fields bound to different grids: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl<T: Real> RealField<T> {
    /// `spacing^dim` times the sample sum.
    pub fn quadrature(&self) -> T {
        self.grid.integrate(&self.values)
    }

    /// Spectral partial derivatives, one field per axis.
    pub fn gradient(&self) -> Vec<RealField<T>> {
        self.grid
            .gradient_real(&self.values)
            .into_iter()
            .map(|values| Field {
                grid: self.grid.clone(),
                values,
            })
            .collect()
    }

    pub fn laplacian(&self) -> RealField<T> {
        Field {
            grid: self.grid.clone(),
            values: self.grid.laplacian_real(&self.values),
        }
    }
}

impl<T: Real> ComplexField<T> {
    /// Integral of `|values|^2`.
    pub fn norm_sqr(&self) -> T {
        self.grid
            .integrate_with(|i| self.values[i].norm_sqr())
    }

    pub fn gradient(&self) -> Vec<ComplexField<T>> {
        self.grid
            .gradient_complex(&self.values)
            .into_iter()
            .map(|values| Field {
                grid: self.grid.clone(),
                values,
            })
            .collect()
    }

    pub fn laplacian(&self) -> ComplexField<T> {
        Field {
            grid: self.grid.clone(),
            values: self.grid.laplacian_complex(&self.values),
        }
    }
}

/// Integral of the pointwise product of two real fields.
pub fn quadrature_product<T: Real>(a: &RealField<T>, b: &RealField<T>) -> Result<T> {
    Ok(a.zip_with(b, |x, y| x * y)?.quadrature())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize, length: f64) -> Grid<f64> {
        Grid::new(1, n, length).unwrap()
    }

    fn gaussian_density(grid: &Grid<f64>, sigma2: f64) -> RealField<f64> {
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            (-r2 / (2.0 * sigma2)).exp() / (2.0 * PI * sigma2).powf(grid.dim() as f64 / 2.0)
        })
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(
            Grid::<f64>::new(1, 500, 40.0),
            Err(QrelError::Configuration { ref field, .. }) if field == "n"
        ));
        assert!(Grid::<f64>::new(1, 8, 40.0).is_err());
        assert!(Grid::<f64>::new(4, 16, 40.0).is_err());
        assert!(Grid::<f64>::new(1, 16, -1.0).is_err());
    }

    #[test]
    fn spacing_times_n_is_length() {
        let g = grid1(512, 40.0);
        assert_eq!(g.spacing() * 512.0, g.length());
        let r = g.rescaled((-0.7f64).exp());
        assert_eq!(r.spacing() * 512.0, r.length());
        assert_eq!(g.coordinate(g.center_index()), 0.0);
    }

    #[test]
    fn gaussian_normalisation_and_moment() {
        let g = grid1(512, 40.0);
        let rho = gaussian_density(&g, 1.0);
        assert!((rho.quadrature() - 1.0).abs() < 1e-12);
        let x = g.coordinates(0);
        let m2 = g.integrate_with(|i| rho.values()[i] * x[i] * x[i]);
        assert!((m2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_integrates_to_length() {
        let g = grid1(64, 40.0);
        let f = Field::from_fn(&g, |_| 1.0 / 40.0);
        assert_eq!(f.quadrature(), 1.0);
    }

    #[test]
    fn derivative_of_single_mode() {
        let g = grid1(128, 40.0);
        let k = 2.0 * PI / 40.0;
        let f = Field::from_fn(&g, |x| (k * x[0]).sin());
        let df = &f.gradient()[0];
        let expected: Vec<f64> = g.coordinates(0).iter().map(|x| k * (k * x).cos()).collect();
        assert!(max_abs_diff(df.values(), &expected) < 1e-12);
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = grid1(64, 10.0);
        let f = Field::from_fn(&g, |_| 3.5);
        assert!(f.gradient()[0].values().iter().all(|v| v.abs() < 1e-13));
        assert!(f.laplacian().values().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn laplacian_of_plane_wave() {
        let g = grid1(128, 40.0);
        let k = 2.0 * PI / 40.0;
        let f: ComplexField<f64> = Field::from_fn(&g, |x| Complex::from_polar(1.0, k * x[0]));
        let lap = f.laplacian();
        let err = lap
            .values()
            .iter()
            .zip(f.values())
            .map(|(l, v)| (l + v * (k * k)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn sqrt_gaussian_gradient_integral() {
        let g = grid1(512, 40.0);
        let amp = gaussian_density(&g, 1.0).map(f64::sqrt);
        let grad = &amp.gradient()[0];
        let i = grad.map(|v| v * v).quadrature();
        assert!((i - 0.25).abs() < 1e-10);
    }

    #[test]
    fn laplacian_integrates_to_zero() {
        let g = grid1(256, 40.0);
        let f = Field::from_fn(&g, |x| (-(x[0] - 1.0).powi(2)).exp() + 0.3 * (2.0 * PI * x[0] / 40.0).cos());
        assert!(f.laplacian().quadrature().abs() < 1e-12);
    }

    #[test]
    fn gradient_twice_is_laplacian_2d() {
        let g = Grid::<f64>::new(2, 64, 20.0).unwrap();
        let f = Field::from_fn(&g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 3.0).exp());
        let grad = f.gradient();
        let mut twice = vec![0.0; g.len()];
        for (axis, comp) in grad.iter().enumerate() {
            for (t, d) in twice.iter_mut().zip(g.derivative_real(comp.values(), axis)) {
                *t += d;
            }
        }
        assert!(max_abs_diff(&twice, f.laplacian().values()) < 1e-12);
    }

    #[test]
    fn integration_by_parts_on_torus() {
        let g = grid1(256, 40.0);
        let f = Field::from_fn(&g, |x| (-(x[0] * x[0]) / 4.0).exp() * x[0].cos());
        let h = Field::from_fn(&g, |x| (-(x[0] - 2.0).powi(2) / 2.0).exp());
        let lhs = quadrature_product(&f.gradient()[0], &h).unwrap();
        let rhs = -quadrature_product(&f, &h.gradient()[0]).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn mismatched_grids_are_structural_errors() {
        let a = Field::from_fn(&grid1(64, 10.0), |_| 1.0);
        let b = Field::from_fn(&grid1(64, 12.0), |_| 1.0);
        assert!(matches!(quadrature_product(&a, &b), Err(QrelError::Structural(_))));
        assert!(Field::new(grid1(64, 10.0), vec![0.0; 63]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid::<f32>::new(1, 256, 40.0).unwrap();
        let f = Field::from_fn(&g, |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f32::consts::PI).sqrt());
        assert!((f.quadrature() - 1.0).abs() < 1e-5);
    }
}
