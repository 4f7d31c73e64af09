//! Sine pseudospectral machinery on `(0, 1)` with homogeneous Dirichlet ends.
//!
//! A [`SineGrid`] with `M` modes samples the interior points `x_j = j/(M+1)`.
//! The type-I discrete sine transform maps samples to coefficients
//! `a_n ≈ 2∫ f(x) sin(nπx) dx`, and the inverse is the same transform without
//! the `2/(M+1)` factor. In this basis `−∂²` is diagonal, so Sobolev-type norms
//! are exact weighted mode sums.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform interior grid and its fast sine transform.
#[derive(Clone)]
pub struct SineGrid {
    modes: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SineGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineGrid").field("modes", &self.modes).finish()
    }
}

impl PartialEq for SineGrid {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes
    }
}

impl SineGrid {
    pub const MIN_MODES: usize = 8;

    pub fn new(modes: usize) -> Result<Self> {
        if modes < Self::MIN_MODES {
            return Err(Error::Domain(format!(
                "sine grid needs at least {} modes, got {modes}",
                Self::MIN_MODES
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (modes + 1));
        Ok(Self { modes, fft })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Grid spacing `1/(M+1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.modes + 1) as f64
    }

    /// Interior points `x_j = j/(M+1)`, `j = 1..M`.
    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..=self.modes).map(|j| j as f64 * h).collect()
    }

    /// Unnormalized DST-I: `S_n = Σ_j v_j sin(π j n/(M+1))`.
    fn dst(&self, values: &[Complex64]) -> Vec<Complex64> {
        let m = self.modes;
        assert_eq!(values.len(), m, "sample count does not match grid");
        let len = 2 * (m + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (j, v) in values.iter().enumerate() {
            buf[j + 1] = *v;
            buf[len - 1 - j] = -*v;
        }
        self.fft.process(&mut buf);
        // FFT of the odd extension equals −2i S_n.
        let half_i = Complex64::new(0.0, 0.5);
        buf[1..=m].iter().map(|x| half_i * x).collect()
    }

    /// Point samples to sine coefficients `a_n`.
    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let scale = 2.0 * self.spacing();
        self.dst(values).into_iter().map(|x| x * scale).collect()
    }

    /// Sine coefficients back to point samples.
    pub fn inverse(&self, coefficients: &[Complex64]) -> Vec<Complex64> {
        self.dst(coefficients)
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<f64> {
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&c).into_iter().map(|z| z.re).collect()
    }

    pub fn inverse_real(&self, coefficients: &[f64]) -> Vec<f64> {
        let c: Vec<Complex64> = coefficients.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inverse(&c).into_iter().map(|z| z.re).collect()
    }

    /// Eigenvalue `(nπ)²` of `−∂²` for mode `n ≥ 1`.
    pub fn wavenumber_sq(n: usize) -> f64 {
        let k = n as f64 * PI;
        k * k
    }
}

/// Which representation a [`StateField`] currently stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Point,
    Coefficient,
}

/// Complex grid function on `(0, 1)` with implicit zero boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    grid: SineGrid,
    values: Vec<Complex64>,
    repr: Representation,
}

impl StateField {
    pub fn from_points(grid: SineGrid, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.modes());
        Self { grid, values, repr: Representation::Point }
    }

    pub fn from_coefficients(grid: SineGrid, coefficients: Vec<Complex64>) -> Self {
        assert_eq!(coefficients.len(), grid.modes());
        Self { grid, values: coefficients, repr: Representation::Coefficient }
    }

    pub fn from_real_points(grid: SineGrid, values: &[f64]) -> Self {
        let v = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_points(grid, v)
    }

    /// Samples `f` at the grid points.
    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: SineGrid, f: F) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self::from_points(grid, values)
    }

    pub fn zeros(grid: SineGrid) -> Self {
        let m = grid.modes();
        Self::from_points(grid, vec![Complex64::new(0.0, 0.0); m])
    }

    pub fn grid(&self) -> &SineGrid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    /// Raw storage in the current representation.
    pub fn raw(&self) -> &[Complex64] {
        &self.values
    }

    pub fn points(&self) -> Vec<Complex64> {
        match self.repr {
            Representation::Point => self.values.clone(),
            Representation::Coefficient => self.grid.inverse(&self.values),
        }
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        match self.repr {
            Representation::Coefficient => self.values.clone(),
            Representation::Point => self.grid.forward(&self.values),
        }
    }

    pub fn into_points(self) -> Self {
        let values = self.points();
        Self { grid: self.grid, values, repr: Representation::Point }
    }

    pub fn into_coefficients(self) -> Self {
        let values = self.coefficients();
        Self { grid: self.grid, values, repr: Representation::Coefficient }
    }

    /// `‖f‖_{L²}` from the grid quadrature `h Σ |f_j|²`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.spacing();
        (h * self.points().iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `∫ f conj(g)` from the grid quadrature.
    pub fn inner(&self, other: &StateField) -> Complex64 {
        let h = self.grid.spacing();
        let a = self.points();
        let b = other.points();
        a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum::<Complex64>() * h
    }

    /// Value of the sine series at an arbitrary `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> Complex64 {
        let coeffs = self.coefficients();
        eval_sine_series(&coeffs, x)
    }

    pub fn map_points<F: Fn(f64, Complex64) -> Complex64>(&self, f: F) -> Self {
        let xs = self.grid.points();
        let values = xs.iter().zip(self.points()).map(|(&x, v)| f(x, v)).collect();
        Self::from_points(self.grid.clone(), values)
    }

    pub fn sub(&self, other: &StateField) -> Self {
        let a = self.points();
        let b = other.points();
        Self::from_points(self.grid.clone(), a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }

    pub fn add(&self, other: &StateField) -> Self {
        let a = self.points();
        let b = other.points();
        Self::from_points(self.grid.clone(), a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_points(self.grid.clone(), self.points().iter().map(|x| x * factor).collect())
    }
}

/// `Σ a_n sin(nπx)`.
pub fn eval_sine_series(coefficients: &[Complex64], x: f64) -> Complex64 {
    // Chebyshev-style recurrence for sin(nθ).
    let theta = PI * x;
    let two_cos = 2.0 * theta.cos();
    let mut s_prev = 0.0_f64;
    let mut s_cur = theta.sin();
    let mut total = Complex64::new(0.0, 0.0);
    for a in coefficients {
        total += a * s_cur;
        let s_next = two_cos * s_cur - s_prev;
        s_prev = s_cur;
        s_cur = s_next;
    }
    total
}

/// Sine transform of the field (alias of [`StateField::coefficients`]).
pub fn sine_forward(f: &StateField) -> Vec<Complex64> {
    f.coefficients()
}

/// Discrete `H^s_{(0)}` norm `(½ Σ |(nπ)^s a_n|²)^{1/2}`.
pub fn h_norm(f: &StateField, s: f64) -> f64 {
    coefficient_h_norm(&f.coefficients(), s)
}

/// [`h_norm`] evaluated directly on sine coefficients.
pub fn coefficient_h_norm(coefficients: &[Complex64], s: f64) -> f64 {
    let total: f64 = coefficients
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let w = ((i + 1) as f64 * PI).powf(s);
            (w * a.norm()).powi(2)
        })
        .sum();
    (0.5 * total).sqrt()
}

/// `−∂² f`, applied by scaling coefficient `n` with `(nπ)²`.
pub fn laplacian_apply(f: &StateField) -> StateField {
    let coeffs = f
        .coefficients()
        .into_iter()
        .enumerate()
        .map(|(i, a)| a * SineGrid::wavenumber_sq(i + 1))
        .collect();
    StateField::from_coefficients(f.grid().clone(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(SineGrid::new(4).is_err());
    }

    #[test]
    fn single_mode_transform() {
        let grid = SineGrid::new(64).unwrap();
        let f = StateField::from_fn(grid, |x| c((PI * x).sin()));
        let a = sine_forward(&f);
        assert!((a[0].re - 1.0).abs() < 1e-13);
        assert!(a[1..].iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let grid = SineGrid::new(32).unwrap();
        let a = sine_forward(&StateField::zeros(grid));
        assert!(a.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn h_norm_single_mode_scaling() {
        let grid = SineGrid::new(64).unwrap();
        let f1 = StateField::from_fn(grid.clone(), |x| c((PI * x).sin()));
        let f2 = StateField::from_fn(grid, |x| c((2.0 * PI * x).sin()));
        let r = 1.0 / 2f64.sqrt();
        assert!((h_norm(&f1, 0.0) - r).abs() < 1e-13);
        assert!((h_norm(&f1, 3.0) - PI.powi(3) * r).abs() < 1e-10);
        assert!((h_norm(&f2, 1.0) - 2.0 * PI * r).abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_eigenfunctions() {
        let grid = SineGrid::new(64).unwrap();
        for n in [1usize, 3] {
            let f = StateField::from_fn(grid.clone(), |x| c((n as f64 * PI * x).sin()));
            let lf = laplacian_apply(&f).points();
            let lambda = (n as f64 * PI).powi(2);
            for (v, u) in lf.iter().zip(f.points()) {
                assert!((v - u * lambda).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn laplacian_matches_fourth_order_differences() {
        // Smooth field whose odd extension is smooth: finite sum of modes with decaying weights.
        let g = |x: f64| (PI * x).sin() + 0.3 * (2.0 * PI * x).sin() - 0.1 * (5.0 * PI * x).sin();
        let mut prev_err = f64::INFINITY;
        for &m in &[63usize, 127, 255] {
            let grid = SineGrid::new(m).unwrap();
            let h = grid.spacing();
            let f = StateField::from_fn(grid.clone(), |x| c(g(x)));
            let spectral = laplacian_apply(&f).points();
            let xs = grid.points();
            let mut err: f64 = 0.0;
            for (j, &x) in xs.iter().enumerate().skip(2).take(m - 4) {
                let fd = -(-g(x + 2.0 * h) + 16.0 * g(x + h) - 30.0 * g(x) + 16.0 * g(x - h)
                    - g(x - 2.0 * h))
                    / (12.0 * h * h);
                err = err.max((fd - spectral[j].re).abs());
            }
            assert!(err < prev_err / 10.0, "m={m} err={err} prev={prev_err}");
            prev_err = err;
        }
        assert!(prev_err < 1e-3);
    }

    #[test]
    fn sine_series_evaluation_matches_samples() {
        let grid = SineGrid::new(40).unwrap();
        let f = StateField::from_fn(grid.clone(), |x| Complex64::new(x * (1.0 - x), x.sin() * (1.0 - x)));
        for (x, v) in grid.points().iter().zip(f.points()) {
            assert!((f.eval(*x) - v).norm() < 1e-12);
        }
        assert!(f.eval(0.0).norm() < 1e-14 && f.eval(1.0).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(seed in proptest::collection::vec(-1.0f64..1.0, 2 * 48)) {
            let grid = SineGrid::new(48).unwrap();
            let values: Vec<Complex64> =
                seed.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            let f = StateField::from_points(grid.clone(), values.clone());
            let a = f.coefficients();
            let back = grid.inverse(&a);
            for (x, y) in back.iter().zip(&values) {
                prop_assert!((x - y).norm() < 1e-12);
            }
            let quad = f.l2_norm().powi(2);
            let modal = 0.5 * a.iter().map(|z| z.norm_sqr()).sum::<f64>();
            prop_assert!((quad - modal).abs() < 1e-10);
            prop_assert!((h_norm(&f, 0.0) - f.l2_norm()).abs() < 1e-10);
        }
    }
}
