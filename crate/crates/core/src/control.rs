//! Controls, linearized synthesis and propagation, and the Newton loop on the
//! nonlinear end-point map.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;

use crate::discretization::{coefficient_h_norm, h_norm, SineGrid, StateField};
use crate::error::{Error, Result};
use crate::evolve::{NonlinearPropagator, PropagateOptions};
use crate::groundstate::GroundState;
use crate::io::fmt;
use crate::linalg::{expm, matvec, Matrix};
use crate::linop::{assemble_block, Flavor};
use crate::moments::{antiderivative_u, MomentProblem, MomentSolution, MomentSolver};
use crate::quadrature::GaussLegendre;
use crate::registry::Registry;
use crate::shooting::{certify, GenericityCertificate};
use crate::spectral::{analyze, project, SpectralData};
use crate::trigpoly::TrigPoly;
use crate::Regime;

/// Tolerance of the `u(0) = u(T) = ∫u = 0` constraints.
pub const ADMISSIBLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Analytic { u: TrigPoly, du: TrigPoly },
    /// Sine coefficients of `u` on `(0, T)`; the samples include both ends.
    Sampled { samples: Vec<f64>, coeffs: Vec<f64> },
}

/// Control `u` on `[0, T]` with its derivative and running integral.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    t_final: f64,
    n_t: usize,
    shape: Shape,
}

impl ControlSignal {
    pub fn zero(t_final: f64, n_t: usize) -> Self {
        Self::from_poly(t_final, TrigPoly::zero(), n_t)
    }

    pub fn from_poly(t_final: f64, u: TrigPoly, n_t: usize) -> Self {
        let du = u.derivative();
        Self { t_final, n_t: n_t.max(2), shape: Shape::Analytic { u, du } }
    }

    /// Uniform samples including `t = 0` and `t = T`. Evaluation between samples
    /// uses the sine series of the interior values.
    pub fn from_samples(t_final: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 10 {
            return Err(Error::Contract("a sampled control needs at least 10 samples".into()));
        }
        if !(t_final > 0.0) {
            return Err(Error::Domain(format!("T must be positive, got {t_final}")));
        }
        let grid = SineGrid::new(samples.len() - 2)?;
        let coeffs = grid.forward_real(&samples[1..samples.len() - 1]);
        Ok(Self { t_final, n_t: samples.len(), shape: Shape::Sampled { samples, coeffs } })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn poly(&self) -> Option<&TrigPoly> {
        match &self.shape {
            Shape::Analytic { u, .. } => Some(u),
            Shape::Sampled { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.shape {
            Shape::Analytic { u, .. } => u.is_zero(),
            Shape::Sampled { samples, .. } => samples.iter().all(|&v| v == 0.0),
        }
    }

    /// `Σ a_k f(kπ)`.
    fn series<F: Fn(f64) -> f64>(coeffs: &[f64], f: F) -> f64 {
        coeffs.iter().enumerate().map(|(i, &a)| a * f((i + 1) as f64 * PI)).sum()
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Analytic { u, .. } => u.eval(t),
            Shape::Sampled { coeffs, .. } => {
                let s = t / self.t_final;
                Self::series(coeffs, |k| (k * s).sin())
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Analytic { du, .. } => du.eval(t),
            Shape::Sampled { coeffs, .. } => {
                let s = t / self.t_final;
                Self::series(coeffs, |k| k / self.t_final * (k * s).cos())
            }
        }
    }

    /// `∫₀ᵗ u`.
    pub fn integral(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Analytic { u, .. } => u.integral(0.0, t),
            Shape::Sampled { coeffs, .. } => {
                let s = t / self.t_final;
                Self::series(coeffs, |k| self.t_final / k * (1.0 - (k * s).cos()))
            }
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.t_final / (self.n_t - 1) as f64;
        (0..self.n_t).map(|j| j as f64 * h).collect()
    }

    pub fn samples(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Sampled { samples, .. } => samples.clone(),
            Shape::Analytic { u, .. } => u.sample(&self.times()),
        }
    }

    /// `(u(0), u(T), ∫u)`.
    pub fn constraint_residuals(&self) -> (f64, f64, f64) {
        (self.value(0.0), self.value(self.t_final), self.integral(self.t_final))
    }

    pub fn check_admissible(&self) -> Result<()> {
        let (a, b, m) = self.constraint_residuals();
        if a.abs().max(b.abs()).max(m.abs()) > ADMISSIBLE_TOL {
            return Err(Error::Contract(format!(
                "control violates u(0) = u(T) = ∫u = 0: {a:.3e}, {b:.3e}, {m:.3e}"
            )));
        }
        Ok(())
    }

    /// `w(t) = ±exp(∫₀ᵗ u)`.
    pub fn w(&self, regime: Regime, t: f64) -> f64 {
        regime.sign() * self.integral(t).exp()
    }

    /// `v(t) = (u̇ − u²)/4`.
    pub fn v(&self, t: f64) -> f64 {
        let u = self.value(t);
        0.25 * (self.derivative(t) - u * u)
    }

    /// `L²(0, T)` norm from the trapezoid rule on the sample grid.
    pub fn l2_norm(&self) -> f64 {
        let h = self.t_final / (self.n_t - 1) as f64;
        let sq: Vec<f64> = self.samples().iter().map(|x| x * x).collect();
        crate::quadrature::trapezoid(&sq, h).sqrt()
    }

    pub fn add(&self, c: f64, other: &ControlSignal) -> Result<ControlSignal> {
        match (&self.shape, &other.shape) {
            (Shape::Analytic { u: a, .. }, Shape::Analytic { u: b, .. }) => Ok(Self::from_poly(self.t_final, a.axpy(c, b), self.n_t)),
            _ => {
                if self.n_t != other.n_t {
                    return Err(Error::Contract("sampled controls on different grids".into()));
                }
                let s: Vec<f64> = self.samples().iter().zip(other.samples()).map(|(a, b)| a + c * b).collect();
                Self::from_samples(self.t_final, s)
            }
        }
    }
}

/// Tolerance on `⟨Z₁, φ⟩` for a target of the linearized problem.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

/// Upper limit on the number of controlled modes.
pub const MAX_CONTROLLED: usize = 24;

/// Everything the synthesis needs at one `μ`: ground state, spectral data,
/// forcing profile and (optionally) a genericity certificate.
#[derive(Debug, Clone)]
pub struct ControlContext {
    pub regime: Regime,
    pub mu: f64,
    pub gs: GroundState,
    pub sd: SpectralData,
    /// Orthonormal sine coefficients of `(xφ)'`.
    pub forcing: Vec<f64>,
    pub n_ctrl: usize,
    certificate: Option<GenericityCertificate>,
}

impl ControlContext {
    /// Runs the spectral analysis with `spectral_modes` sine modes. `n_ctrl`
    /// defaults to `min(N_keep, 24)`.
    pub fn new(regime: Regime, mu: f64, spectral_modes: usize, n_ctrl: Option<usize>) -> Result<Self> {
        let (gs, sd) = analyze(regime, mu, spectral_modes)?;
        if gs.is_trivial() {
            return Err(Error::Domain("control synthesis needs μ strictly inside the admissible range".into()));
        }
        let keep = sd.entries.len();
        let n_ctrl = n_ctrl.unwrap_or(keep.min(MAX_CONTROLLED));
        if n_ctrl == 0 || n_ctrl > keep {
            return Err(Error::Contract(format!("n_ctrl = {n_ctrl} must lie in 1..={keep}")));
        }
        let forcing = project(|x| gs.value(x) + x * gs.derivative(x), sd.modes);
        Ok(Self { regime, mu, gs, sd, forcing, n_ctrl, certificate: None })
    }

    /// Attaches a certificate after checking that it covers this problem.
    pub fn attach_certificate(&mut self, cert: GenericityCertificate) -> Result<()> {
        if cert.regime != self.regime || (cert.mu - self.mu).abs() > 1e-12 * self.mu.abs().max(1.0) {
            return Err(Error::Refused("certificate was issued for a different ground state".into()));
        }
        if !cert.is_certified() {
            return Err(Error::Refused(format!("certificate status is {}", cert.status)));
        }
        if cert.n_max < self.n_ctrl {
            return Err(Error::Refused(format!(
                "certificate covers n ≤ {} but {} modes are controlled",
                cert.n_max, self.n_ctrl
            )));
        }
        self.certificate = Some(cert);
        Ok(())
    }

    /// Certifies `n ≤ n_ctrl` and attaches the result.
    pub fn certify(&mut self) -> Result<&GenericityCertificate> {
        let cert = certify(self.regime, self.mu, self.n_ctrl)?;
        self.attach_certificate(cert)?;
        Ok(self.certificate.as_ref().expect("attached"))
    }

    pub fn certificate(&self) -> Option<&GenericityCertificate> {
        self.certificate.as_ref()
    }

    fn require_certificate(&self) -> Result<()> {
        if self.certificate.is_none() {
            return Err(Error::Refused("a genericity certificate for this μ is required".into()));
        }
        Ok(())
    }

    /// `e^{±iμt}`.
    pub fn phase(&self, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.regime.sign() * self.mu * t)
    }

    /// `φ e^{±iμT}` on `grid`.
    pub fn reference(&self, grid: &SineGrid, t_final: f64) -> StateField {
        self.gs.field(grid).scale(self.phase(t_final))
    }

    /// Orthonormal coefficients of `(Re, Im)` of `f e^{∓iμT}`, truncated or
    /// padded to the spectral size.
    pub fn z_from_field(&self, f: &StateField, t_final: f64) -> (Vec<f64>, Vec<f64>) {
        let rot = self.phase(t_final).conj() / SQRT_2;
        let a = f.coefficients();
        let m = self.sd.modes;
        let mut z1 = vec![0.0; m];
        let mut z2 = vec![0.0; m];
        for (k, c) in a.iter().take(m).enumerate() {
            let r = c * rot;
            z1[k] = r.re;
            z2[k] = r.im;
        }
        (z1, z2)
    }

    /// Inverse of [`ControlContext::z_from_field`] on `grid`.
    pub fn field_from_z(&self, z1: &[f64], z2: &[f64], grid: &SineGrid, t_final: f64) -> StateField {
        let rot = self.phase(t_final) * SQRT_2;
        let mut a = vec![Complex64::new(0.0, 0.0); grid.modes()];
        for k in 0..grid.modes().min(z1.len()) {
            a[k] = Complex64::new(z1[k], z2[k]) * rot;
        }
        StateField::from_coefficients(grid.clone(), a)
    }

    /// `⟨Z₁, φ⟩`, the defect of the orthogonality condition.
    pub fn orthogonality_defect(&self, z1: &[f64]) -> f64 {
        z1.iter().zip(&self.sd.phi).map(|(a, b)| a * b).sum()
    }

    /// Removes the `Φ₀⁻` component, which the control cannot reach.
    pub fn project_admissible(&self, z1: &mut [f64]) {
        let c = self.orthogonality_defect(z1) / self.sd.null_pairing();
        for (a, d) in z1.iter_mut().zip(&self.sd.dmu_phi) {
            *a -= c * d;
        }
    }

    /// Moment targets for a real two-component `Z` in orthonormal coefficients.
    pub fn coefficients_from_z(&self, z1: &[f64], z2: &[f64], t_final: f64) -> Result<TargetCoefficients> {
        let scale = 1.0 + norm2(z1).hypot(norm2(z2)) * norm2(&self.sd.phi);
        let defect = self.orthogonality_defect(z1);
        if defect.abs() > ORTHOGONALITY_TOL * scale {
            return Err(Error::Contract(format!("target violates the orthogonality condition: ⟨Z₁, φ⟩ = {defect:.3e}")));
        }
        let pair0: f64 = z2.iter().zip(&self.sd.dmu_phi).map(|(a, b)| a * b).sum();
        let g0 = self.sd.gamma0_minus;
        let mut d = Vec::with_capacity(self.n_ctrl);
        for n in 1..=self.n_ctrl {
            let e = self.sd.mode(n);
            if e.gamma == 0.0 {
                return Err(Error::Refused(format!("Γ_{n} vanishes")));
            }
            let c = self.sd.pair_plus(z1, z2, n);
            d.push(Complex64::new(0.0, e.beta) * c * Complex64::from_polar(1.0, -e.beta * t_final) / e.gamma);
        }
        // ċ₀⁺ = ±c₀⁻: the Jordan coupling carries the regime sign.
        let d0 = self.regime.sign() * pair0 / g0;
        Ok(TargetCoefficients { d0, d, orthogonality_defect: defect })
    }

    /// Frequencies of the controlled modes.
    pub fn betas(&self) -> Vec<f64> {
        self.sd.betas()[..self.n_ctrl].to_vec()
    }

    /// The part of `Z` the synthesis prescribes: modes `n ≤ n_ctrl` and `Φ₀⁺`.
    pub fn controlled_part(&self, z1: &[f64], z2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.sd.null_pairing();
        let c: Vec<Complex64> = (1..=self.sd.entries.len())
            .map(|n| if n <= self.n_ctrl { self.sd.pair_plus(z1, z2, n) } else { Complex64::new(0.0, 0.0) })
            .collect();
        let c0p = z2.iter().zip(&self.sd.dmu_phi).map(|(a, b)| a * b).sum::<f64>() / p;
        self.sd.resum(&c, c0p, 0.0)
    }

    /// `‖Z − Σ_{n ≤ n_ctrl} 2Re(c_nΦ_n) − c₀⁺Φ₀⁺ − c₀⁻Φ₀⁻‖` in the `H^s` norm of
    /// `Z₁ + iZ₂`: what the synthesis leaves untouched.
    pub fn tail_norm(&self, z1: &[f64], z2: &[f64], s: f64) -> f64 {
        let p = self.sd.null_pairing();
        let c: Vec<Complex64> = (1..=self.n_ctrl).map(|n| self.sd.pair_plus(z1, z2, n)).collect();
        let c0p = z2.iter().zip(&self.sd.dmu_phi).map(|(a, b)| a * b).sum::<f64>() / p;
        let c0m = self.orthogonality_defect(z1) / p;
        let (r1, r2) = self.sd.resum(&c, c0p, c0m);
        let coeffs: Vec<Complex64> =
            z1.iter().zip(z2).zip(r1.iter().zip(&r2)).map(|((a, b), (x, y))| Complex64::new(a - x, b - y) * SQRT_2).collect();
        coefficient_h_norm(&coeffs, s)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetCoefficients {
    pub d0: f64,
    pub d: Vec<Complex64>,
    pub orthogonality_defect: f64,
}

/// `(d₀, d_n)` for a linearized target `Ψ_f` (a perturbation, not a full state).
pub fn target_coefficients(ctx: &ControlContext, psi_f: &StateField, t_final: f64) -> Result<TargetCoefficients> {
    ctx.require_certificate()?;
    let (z1, z2) = ctx.z_from_field(psi_f, t_final);
    ctx.coefficients_from_z(&z1, &z2, t_final)
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub control: ControlSignal,
    pub moments: MomentSolution,
    pub coefficients: TargetCoefficients,
}

/// Moment solution for `Z` and its antiderivative as a control.
pub fn synthesize_from_z(
    ctx: &ControlContext,
    z1: &[f64],
    z2: &[f64],
    t_final: f64,
    n_t: usize,
    solver: &dyn MomentSolver,
) -> Result<Synthesis> {
    ctx.require_certificate()?;
    let coefficients = ctx.coefficients_from_z(z1, z2, t_final)?;
    let mp = MomentProblem::new(t_final, ctx.betas(), coefficients.d0, coefficients.d.clone(), n_t)?;
    let moments = solver.solve(&mp)?;
    let u = antiderivative_u(&moments.nu, t_final)?;
    let control = ControlSignal::from_poly(t_final, u, n_t);
    control.check_admissible()?;
    Ok(Synthesis { control, moments, coefficients })
}

/// Linearized right inverse applied to `Ψ_f`.
pub fn synthesize_linear_control(
    ctx: &ControlContext,
    psi_f: &StateField,
    t_final: f64,
    n_t: usize,
    solver: &dyn MomentSolver,
) -> Result<Synthesis> {
    let (z1, z2) = ctx.z_from_field(psi_f, t_final);
    synthesize_from_z(ctx, &z1, &z2, t_final, n_t, solver)
}

/// `∫₀ᵀ U(t) f(t) dt` for a smooth weight, exact when `U` is analytic.
fn weighted_integral(u: &ControlSignal, weight: &TrigPoly) -> f64 {
    let t = u.t_final();
    match u.poly() {
        Some(p) => p.mul(weight).integral(0.0, t),
        None => GaussLegendre::new(16).integrate(|s| u.value(s) * weight.eval(s), 0.0, t, 4 * u.n_t()),
    }
}

/// Maps `U` to `Z(T)` of `∂ₜZ = 𝓛Z + U(t)((xφ)', 0)`, `Z(0) = 0`, in orthonormal coefficients.
pub trait LinearPropagator: Send + Sync {
    fn name(&self) -> &'static str;
    fn propagate(&self, ctx: &ControlContext, u: &ControlSignal) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Duhamel formula in the biorthogonal basis followed by resummation.
pub struct ModalPropagator;

impl ModalPropagator {
    /// `(c_n(T), c₀⁺(T), c₀⁻(T))` for all retained modes.
    pub fn coefficients(ctx: &ControlContext, u: &ControlSignal) -> (Vec<Complex64>, f64, f64) {
        let t = u.t_final();
        let p = ctx.sd.null_pairing();
        let g0 = ctx.sd.gamma0_minus;
        let c0m = g0 / p * weighted_integral(u, &TrigPoly::constant(1.0));
        let c0p = ctx.regime.sign() * g0 / p * weighted_integral(u, &TrigPoly::polynomial(&[t, -1.0]));
        let c = ctx
            .sd
            .entries
            .iter()
            .map(|e| {
                let ic = weighted_integral(u, &TrigPoly::cos(e.beta));
                let is = weighted_integral(u, &TrigPoly::sin(e.beta));
                Complex64::from_polar(1.0, e.beta * t) * e.gamma * Complex64::new(ic, -is)
            })
            .collect();
        (c, c0p, c0m)
    }
}

impl LinearPropagator for ModalPropagator {
    fn name(&self) -> &'static str {
        "modal"
    }

    fn propagate(&self, ctx: &ControlContext, u: &ControlSignal) -> Result<(Vec<f64>, Vec<f64>)> {
        let (c, c0p, c0m) = Self::coefficients(ctx, u);
        Ok(ctx.sd.resum(&c, c0p, c0m))
    }
}

/// Exponential integrator on the full `2M`-dimensional system:
/// `Z_{k+1} = e^{𝓛h} Z_k + ∫₀ʰ U(t_k + s) e^{𝓛(h−s)} F ds`, the integral by a
/// Gauss–Legendre rule with the vectors `e^{𝓛(h−s_j)} F` precomputed.
pub struct DirectPropagator {
    pub dt: f64,
    pub nodes: usize,
}

impl LinearPropagator for DirectPropagator {
    fn name(&self) -> &'static str {
        "direct"
    }

    fn propagate(&self, ctx: &ControlContext, u: &ControlSignal) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = u.t_final();
        let steps = ((t / self.dt).round() as usize).max(1);
        let h = t / steps as f64;
        let m = ctx.sd.modes;
        let n = 2 * m;
        let op = assemble_block(&ctx.gs, Flavor::L, m);
        let scaled = |tau: f64| Matrix::from_fn(n, n, |i, j| op.matrix.read(i, j) * tau);
        let mut f = vec![0.0; n];
        f[..m].copy_from_slice(&ctx.forcing[..m]);
        let e_full = expm(&scaled(h));
        let gl = GaussLegendre::new(self.nodes);
        let (offsets, weights) = gl.composite(0.0, h, 1);
        let kicks: Vec<Vec<f64>> = offsets.iter().map(|&s| matvec(&expm(&scaled(h - s)), &f)).collect();
        let mut z = vec![0.0; n];
        for k in 0..steps {
            let t0 = k as f64 * h;
            let mut next = matvec(&e_full, &z);
            for ((s, w), kick) in offsets.iter().zip(&weights).zip(&kicks) {
                let a = w * u.value(t0 + s);
                next.iter_mut().zip(kick).for_each(|(x, b)| *x += a * b);
            }
            z = next;
        }
        Ok((z[..m].to_vec(), z[m..].to_vec()))
    }
}

/// Built-in linear propagators: `modal` and `direct` (time step `1e−3`, 5 nodes).
pub fn linear_propagators() -> Registry<dyn LinearPropagator> {
    let mut r: Registry<dyn LinearPropagator> = Registry::new("linear propagator");
    r.register("modal", Arc::new(ModalPropagator));
    r.register("direct", Arc::new(DirectPropagator { dt: 1e-3, nodes: 5 }));
    r
}

/// `Z(T)` for `U` with the named propagator.
pub fn propagate_linearized(ctx: &ControlContext, u: &ControlSignal, propagator: &dyn LinearPropagator) -> Result<(Vec<f64>, Vec<f64>)> {
    propagator.propagate(ctx, u)
}

/// Full final state for the Newton loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub psi_f: StateField,
    pub mu: f64,
    pub t_final: f64,
}

/// Relative tolerance of the norm constraint `‖ψ_f‖ = ‖φ‖`.
pub const SPHERE_TOL: f64 = 1e-8;

impl TargetState {
    /// `φe^{±iμT} + Ψ`, rescaled onto the sphere `‖ψ_f‖ = ‖φ‖`.
    pub fn on_sphere(ctx: &ControlContext, perturbation: &StateField, t_final: f64) -> Self {
        let grid = perturbation.grid();
        let reference = ctx.reference(grid, t_final);
        let raw = reference.add(perturbation);
        let scale = reference.l2_norm() / raw.l2_norm();
        Self { psi_f: raw.scale(Complex64::new(scale, 0.0)), mu: ctx.mu, t_final }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub step: f64,
    pub residual: f64,
    pub control_norm: f64,
    /// Residual left outside the controlled modes.
    pub tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringStatus {
    Converged,
    Diverged,
    MaxIterations,
}

impl std::fmt::Display for SteeringStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SteeringStatus::Converged => "converged",
            SteeringStatus::Diverged => "diverged",
            SteeringStatus::MaxIterations => "max-iterations",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SteeringReport {
    pub status: SteeringStatus,
    pub control: ControlSignal,
    pub log: Vec<IterRecord>,
    pub final_state: StateField,
}

impl SteeringReport {
    pub fn log_text(&self) -> String {
        let mut out = String::from("# iter step residual control_norm tail\n");
        for r in &self.log {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                r.iter,
                fmt(r.step),
                fmt(r.residual),
                fmt(r.control_norm),
                fmt(r.tail)
            ));
        }
        out.push_str(&format!("# status = {}\n", self.status));
        out
    }
}

#[derive(Clone)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Sobolev index of the residual norm.
    pub norm_index: f64,
    /// Radius around the reference in the residual norm; defaults to `1e−2·‖φ‖`.
    pub delta_desk: Option<f64>,
    pub n_t: usize,
    pub propagate: PropagateOptions,
    pub solver: Arc<dyn MomentSolver>,
    pub propagator: Arc<dyn NonlinearPropagator>,
}

impl NewtonOptions {
    pub fn new(solver: Arc<dyn MomentSolver>, propagator: Arc<dyn NonlinearPropagator>) -> Self {
        Self {
            tol: 1e-5,
            max_iter: 8,
            norm_index: 3.0,
            delta_desk: None,
            n_t: 1001,
            propagate: PropagateOptions { dt: 5e-4, ..Default::default() },
            solver,
            propagator,
        }
    }
}

const STEPS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// Damped Newton iteration `u ← u + λ R(ψ_f − Θ(u))` with `R` the linearized
/// right inverse around `u = 0` and `λ ∈ {1, ½, ¼, ⅛}` chosen by residual decrease.
pub fn newton_steer(ctx: &ControlContext, target: &TargetState, opts: &NewtonOptions) -> Result<SteeringReport> {
    ctx.require_certificate()?;
    let t_final = target.t_final;
    if (target.mu - ctx.mu).abs() > 1e-12 * ctx.mu.abs().max(1.0) {
        return Err(Error::Contract("target and context have different μ".into()));
    }
    let grid = target.psi_f.grid().clone();
    let phi = ctx.gs.field(&grid);
    let reference = ctx.reference(&grid, t_final);
    let s = opts.norm_index;
    let delta = opts.delta_desk.unwrap_or(1e-2 * h_norm(&phi, s));
    let distance = h_norm(&target.psi_f.sub(&reference), s);
    if distance > delta {
        return Err(Error::Domain(format!("target lies {distance:.3e} from the reference, beyond δ = {delta:.3e}")));
    }
    let sphere = (target.psi_f.l2_norm() - phi.l2_norm()).abs();
    if sphere > SPHERE_TOL * phi.l2_norm() {
        return Err(Error::Contract(format!("target is off the sphere ‖ψ_f‖ = ‖φ‖ by {sphere:.3e}")));
    }

    let mut prop = opts.propagate.clone();
    prop.snapshots = vec![t_final];
    let theta = |u: &ControlSignal| -> Result<StateField> {
        let res = opts.propagator.propagate(&phi, u, ctx.regime, &prop)?;
        res.snapshots.last().cloned().ok_or_else(|| Error::Contract("propagator returned no snapshot".into()))
    };
    let measure = |state: &StateField| -> (StateField, f64, f64) {
        let r = target.psi_f.sub(state);
        let (z1, z2) = ctx.z_from_field(&r, t_final);
        let tail = ctx.tail_norm(&z1, &z2, s);
        let norm = h_norm(&r, s);
        (r, norm, tail)
    };

    let mut u = ControlSignal::zero(t_final, opts.n_t);
    let mut state = theta(&u)?;
    let (mut r, mut res, tail) = measure(&state);
    let mut log = vec![IterRecord { iter: 0, step: 0.0, residual: res, control_norm: 0.0, tail }];
    let mut status = SteeringStatus::MaxIterations;
    if res <= opts.tol {
        status = SteeringStatus::Converged;
    }
    let mut iter = 0;
    while status == SteeringStatus::MaxIterations && iter < opts.max_iter {
        iter += 1;
        let (mut z1, z2) = ctx.z_from_field(&r, t_final);
        ctx.project_admissible(&mut z1);
        let du = synthesize_from_z(ctx, &z1, &z2, t_final, opts.n_t, opts.solver.as_ref())?.control;
        let mut accepted = None;
        for &lambda in &STEPS {
            let trial = u.add(lambda, &du)?;
            let st = theta(&trial)?;
            let (rt, nt, tt) = measure(&st);
            if nt < res {
                accepted = Some((lambda, trial, st, rt, nt, tt));
                break;
            }
        }
        match accepted {
            Some((lambda, trial, st, rt, nt, tt)) => {
                u = trial;
                state = st;
                r = rt;
                res = nt;
                log.push(IterRecord { iter, step: lambda, residual: res, control_norm: u.l2_norm(), tail: tt });
                if res <= opts.tol {
                    status = SteeringStatus::Converged;
                }
            }
            None => status = SteeringStatus::Diverged,
        }
    }
    Ok(SteeringReport { status, control: u, log, final_state: state })
}
