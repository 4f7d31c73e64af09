//! Finite moment problems on `(0, T)`.
//!
//! Given frequencies `β_1 < … < β_N` and targets `d₀ ∈ ℝ`, `d_n ∈ ℂ`, find a
//! real `ν` with
//!
//! ```text
//! ∫ν = 0,  ∫(T−t)ν = 0,  ∫(T−t)²/2·ν = d₀,  ∫ν e^{−iβ_n t} = d_n.
//! ```
//!
//! Each solver returns `ν = ρ Σ λ_k c_k` where `c_k` runs over the `2N + 3`
//! real constraint functions and `ρ` is a fixed window, which minimizes
//! `∫ν²/ρ`. The Gram matrix `∫ρ c_k c_l` is formed exactly from
//! [`TrigPoly`] integrals, so the constraints hold for the continuous `ν` and
//! not only for a quadrature of it.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, matvec, singular_values, sym_eigvals, Matrix};
use crate::quadrature::trapezoid;
use crate::registry::Registry;
use crate::trigpoly::TrigPoly;

/// Tikhonov floor relative to the Gram trace.
pub const TIKHONOV: f64 = 1e-12;
/// Gram condition numbers above this are refused.
pub const MAX_CONDITION: f64 = 1e14;
const REFINEMENT_STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentProblem {
    pub t_final: f64,
    pub betas: Vec<f64>,
    pub d0: f64,
    pub d: Vec<Complex64>,
    /// Number of uniform time samples including both ends.
    pub n_t: usize,
}

impl MomentProblem {
    pub fn new(t_final: f64, betas: Vec<f64>, d0: f64, d: Vec<Complex64>, n_t: usize) -> Result<Self> {
        let mp = Self { t_final, betas, d0, d, n_t };
        mp.validate()?;
        Ok(mp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::Domain(format!("T must be positive, got {}", self.t_final)));
        }
        if self.d.len() != self.betas.len() {
            return Err(Error::Contract(format!(
                "{} targets for {} frequencies",
                self.d.len(),
                self.betas.len()
            )));
        }
        if self.betas.iter().any(|&b| !(b > 0.0)) || self.betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract("frequencies must be positive and strictly ascending".into()));
        }
        let gaps: Vec<f64> = self.betas.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(i) = gaps.windows(2).position(|g| g[1] <= g[0]) {
            return Err(Error::Contract(format!(
                "frequency gaps must increase; gap after beta_{} = {} does not",
                i + 2,
                self.betas[i + 1]
            )));
        }
        let need = (20 * self.betas.len()).max(2);
        if self.n_t < need {
            return Err(Error::Contract(format!("n_t = {} is below 20 N = {need}", self.n_t)));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.t_final / (self.n_t - 1) as f64;
        (0..self.n_t).map(|j| j as f64 * h).collect()
    }

    /// Right-hand sides of the real constraints, in [`constraint_functions`] order.
    pub fn rhs(&self) -> Vec<f64> {
        let mut r = vec![0.0, 0.0, self.d0];
        for z in &self.d {
            r.push(z.re);
            r.push(-z.im);
        }
        r
    }

    pub fn target_norm(&self) -> f64 {
        (self.d0 * self.d0 + self.d.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// `1, T−t, (T−t)²/2, cos β₁t, sin β₁t, …`.
pub fn constraint_functions(t_final: f64, betas: &[f64]) -> Vec<TrigPoly> {
    let mut out = vec![
        TrigPoly::constant(1.0),
        TrigPoly::polynomial(&[t_final, -1.0]),
        TrigPoly::polynomial(&[0.5 * t_final * t_final, -t_final, 0.5]),
    ];
    for &b in betas {
        out.push(TrigPoly::cos(b));
        out.push(TrigPoly::sin(b));
    }
    out
}

/// Residuals `∫ν c_k − r_k` of all real constraints, using `integrate` for the
/// integrals so callers can supply an independent rule.
pub fn moment_residuals<F>(mp: &MomentProblem, integrate: F) -> Vec<f64>
where
    F: Fn(&dyn Fn(f64) -> f64) -> f64,
{
    let t = mp.t_final;
    let rhs = mp.rhs();
    let mut out = Vec::with_capacity(rhs.len());
    out.push(integrate(&|_| 1.0) - rhs[0]);
    out.push(integrate(&|s| t - s) - rhs[1]);
    out.push(integrate(&|s| 0.5 * (t - s) * (t - s)) - rhs[2]);
    for (i, &b) in mp.betas.iter().enumerate() {
        out.push(integrate(&|s| (b * s).cos()) - rhs[3 + 2 * i]);
        out.push(integrate(&|s| (b * s).sin()) - rhs[4 + 2 * i]);
    }
    out
}

/// Window `ρ` multiplying the least-norm combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Flat,
    /// `sin²(πt/T)`: the solution and its antiderivative's derivative vanish at both ends.
    SinSquared,
}

impl Window {
    pub fn poly(self, t_final: f64) -> TrigPoly {
        match self {
            Window::Flat => TrigPoly::constant(1.0),
            Window::SinSquared => TrigPoly::constant(0.5).axpy(-0.5, &TrigPoly::cos(2.0 * PI / t_final)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSolution {
    pub problem: MomentProblem,
    pub solver: String,
    /// Exact `ν`.
    pub nu: TrigPoly,
    pub lambda: Vec<f64>,
    pub times: Vec<f64>,
    pub samples: Vec<f64>,
    /// Tikhonov shift actually applied.
    pub epsilon: f64,
    pub condition: f64,
    /// Largest singular value of the discrete solution map `(d₀, d) ↦ ν`.
    pub lambda_norm: f64,
}

impl MomentSolution {
    /// Discrete `‖ν‖_{L²}` by the trapezoid rule on the sample grid.
    pub fn discrete_norm(&self) -> f64 {
        let h = self.problem.t_final / (self.problem.n_t - 1) as f64;
        let sq: Vec<f64> = self.samples.iter().map(|x| x * x).collect();
        trapezoid(&sq, h).sqrt()
    }
}

pub trait MomentSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, mp: &MomentProblem) -> Result<MomentSolution>;
}

/// Least-norm solver in the `ρ`-weighted norm.
pub struct GramSolver {
    pub name: &'static str,
    pub window: Window,
}

impl GramSolver {
    fn gram(&self, basis: &[TrigPoly], rho: &TrigPoly, t_final: f64) -> Matrix<f64> {
        let k = basis.len();
        let weighted: Vec<TrigPoly> = basis.iter().map(|c| c.mul(rho)).collect();
        let mut g = Matrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = weighted[i].mul(&basis[j]).integral(0.0, t_final);
                g.write(i, j, v);
                g.write(j, i, v);
            }
        }
        g
    }
}

fn ill_posed_message(betas: &[f64], condition: f64) -> String {
    let closest = betas
        .windows(2)
        .enumerate()
        .min_by(|a, b| (a.1[1] - a.1[0]).total_cmp(&(b.1[1] - b.1[0])));
    match closest {
        Some((i, w)) => format!(
            "Gram condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}; closest frequencies beta_{} = {} and beta_{} = {}",
            i + 1,
            w[0],
            i + 2,
            w[1]
        ),
        None => format!("Gram condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}"),
    }
}

impl MomentSolver for GramSolver {
    fn name(&self) -> &'static str {
        self.name
    }

    fn solve(&self, mp: &MomentProblem) -> Result<MomentSolution> {
        mp.validate()?;
        let t_final = mp.t_final;
        let basis = constraint_functions(t_final, &mp.betas);
        let rho = self.window.poly(t_final);
        let g = self.gram(&basis, &rho, t_final);
        let k = basis.len();

        let eig = sym_eigvals(&g);
        let condition = eig[k - 1] / eig[0].max(f64::MIN_POSITIVE);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllPosed(ill_posed_message(&mp.betas, condition)));
        }
        let trace: f64 = (0..k).map(|i| g.read(i, i)).sum();
        let epsilon = TIKHONOV * trace;
        let shifted = Matrix::from_fn(k, k, |i, j| g.read(i, j) + if i == j { epsilon } else { 0.0 });
        let solve = |r: &[f64]| -> Vec<f64> {
            let mut x = lu_solve(&shifted, r);
            for _ in 0..REFINEMENT_STEPS {
                let gx = matvec(&g, &x);
                let res: Vec<f64> = r.iter().zip(&gx).map(|(a, b)| a - b).collect();
                let dx = lu_solve(&shifted, &res);
                x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            }
            x
        };

        let lambda = solve(&mp.rhs());
        let weighted: Vec<TrigPoly> = basis.iter().map(|c| c.mul(&rho)).collect();
        let nu = combine(&weighted, &lambda);
        let times = mp.times();
        let samples = nu.sample(&times);

        // Discrete solution map restricted to the data (d₀, Re d, Im d).
        let h = t_final / (mp.n_t - 1) as f64;
        let sqrt_w: Vec<f64> = (0..mp.n_t)
            .map(|j| if j == 0 || j + 1 == mp.n_t { (0.5 * h).sqrt() } else { h.sqrt() })
            .collect();
        let basis_samples: Vec<Vec<f64>> = weighted.iter().map(|c| c.sample(&times)).collect();
        let data = k - 2;
        let mut map = Matrix::<f64>::zeros(mp.n_t, data);
        for col in 0..data {
            let mut e = vec![0.0; k];
            e[col + 2] = 1.0;
            let l = solve(&e);
            for j in 0..mp.n_t {
                let v: f64 = (0..k).map(|i| l[i] * basis_samples[i][j]).sum();
                map.write(j, col, sqrt_w[j] * v);
            }
        }
        let lambda_norm = singular_values(&map).first().copied().unwrap_or(0.0);

        Ok(MomentSolution {
            problem: mp.clone(),
            solver: self.name.to_string(),
            nu,
            lambda,
            times,
            samples,
            epsilon,
            condition,
            lambda_norm,
        })
    }
}

fn combine(basis: &[TrigPoly], coeffs: &[f64]) -> TrigPoly {
    basis.iter().zip(coeffs).fold(TrigPoly::zero(), |acc, (c, &l)| acc.axpy(l, c))
}

/// Built-in moment solvers: `least-norm` and `windowed`.
pub fn moment_solvers() -> Registry<dyn MomentSolver> {
    let mut r: Registry<dyn MomentSolver> = Registry::new("moment solver");
    r.register("least-norm", Arc::new(GramSolver { name: "least-norm", window: Window::Flat }));
    r.register("windowed", Arc::new(GramSolver { name: "windowed", window: Window::SinSquared }));
    r
}

/// Tolerance for the antiderivative preconditions and postconditions.
pub const ANTIDERIVATIVE_TOL: f64 = 1e-8;

/// `U(t) = ∫₀ᵗ ν`, requiring `∫ν = 0` (so `U(T) = 0`) and `∫(T−t)ν = 0`
/// (so `∫U = 0`).
pub fn antiderivative_u(nu: &TrigPoly, t_final: f64) -> Result<TrigPoly> {
    let scale = 1.0 + nu.mul(nu).integral(0.0, t_final).sqrt();
    let mass = nu.integral(0.0, t_final);
    let first = nu.mul(&TrigPoly::polynomial(&[t_final, -1.0])).integral(0.0, t_final);
    if mass.abs() > ANTIDERIVATIVE_TOL * scale || first.abs() > ANTIDERIVATIVE_TOL * scale {
        return Err(Error::Contract(format!(
            "antiderivative needs zero mass and first moment; got {mass:.3e} and {first:.3e}"
        )));
    }
    let u = nu.antiderivative();
    let end = u.eval(t_final);
    let mean = u.integral(0.0, t_final);
    if end.abs() > ANTIDERIVATIVE_TOL * scale || mean.abs() > ANTIDERIVATIVE_TOL * scale {
        return Err(Error::Contract(format!("antiderivative residuals {end:.3e}, {mean:.3e}")));
    }
    Ok(u)
}
