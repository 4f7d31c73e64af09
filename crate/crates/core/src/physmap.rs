//! Physical box trajectories.
//!
//! The nondimensional time `t = g(τ)` solves `g' = (ħ/2m)·e^{−2∫₀^g u}` and the
//! wall follows `L(τ) = exp(∫₀^{g(τ)} u)`; `τ*` is the physical time at which
//! `g` reaches `T`. The control is extended by zero beyond `T`.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::evolve::EvolutionResult;
use crate::groundstate::{kappa_from_mu, GroundState};
use crate::io::{fmt, manifest_text, write_table, write_text};

/// Local error tolerance of the adaptive integrator.
pub const RK_TOL: f64 = 1e-12;
/// Tolerance on `g(τ*) − T`.
pub const EVENT_TOL: f64 = 1e-10;
/// Relative tolerance of the κ–μ consistency check.
pub const KAPPA_TOL: f64 = 1e-6;

// Dormand–Prince 5(4) tableau (the equation is autonomous, so the nodes are not needed).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One Dormand–Prince step of the autonomous scalar ODE `y' = f(y)`:
/// fifth-order value and error estimate.
fn dp_step<F: Fn(f64) -> f64>(f: &F, y: f64, h: f64) -> (f64, f64) {
    let mut k = [0.0; 7];
    for i in 0..7 {
        let yi = y + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
        k[i] = f(yi);
    }
    let y5 = y + h * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
    let y4 = y + h * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
    (y5, (y5 - y4).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthTrajectory {
    pub hbar: f64,
    pub m: f64,
    pub t_final: f64,
    pub tau_star: f64,
    /// Uniform grid on `[0, τ*]`.
    pub tau: Vec<f64>,
    pub g: Vec<f64>,
    pub length: Vec<f64>,
}

impl LengthTrajectory {
    /// `τ` with `g(τ) = t`, by inverse interpolation on the stored grid.
    pub fn tau_of_t(&self, t: f64) -> f64 {
        let j = self.g.partition_point(|&g| g < t).clamp(1, self.g.len() - 1);
        let (g0, g1) = (self.g[j - 1], self.g[j]);
        let (a, b) = (self.tau[j - 1], self.tau[j]);
        a + (b - a) * (t - g0) / (g1 - g0)
    }

    /// `L` at the physical time where `g = t`, from the closed form `L = e^{∫₀ᵗ u}`.
    pub fn length_at_t(u: &ControlSignal, t: f64) -> f64 {
        u.integral(t.min(u.t_final())).exp()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> =
            (0..self.tau.len()).map(|j| vec![self.tau[j], self.g[j], self.length[j]]).collect();
        write_table(path, &["tau", "g", "L"], &rows)
    }
}

fn check_constants(hbar: f64, m: f64) -> Result<()> {
    if !(hbar > 0.0) || !(m > 0.0) {
        return Err(Error::Domain(format!("ħ and m must be positive, got {hbar}, {m}")));
    }
    Ok(())
}

/// Integrates the `g` equation with Dormand–Prince steps until `g = T` and
/// samples `g` and `L` on `n_tau` uniform points of `[0, τ*]`.
pub fn control_to_length(u: &ControlSignal, hbar: f64, m: f64, n_tau: usize) -> Result<LengthTrajectory> {
    check_constants(hbar, m)?;
    if n_tau < 2 {
        return Err(Error::Contract("need at least two τ samples".into()));
    }
    let t_final = u.t_final();
    let c = hbar / (2.0 * m);
    let rhs = |g: f64| c * (-2.0 * u.integral(g.clamp(0.0, t_final))).exp();

    // Accepted steps (τ, g); the last one crosses T.
    let mut nodes = vec![(0.0, 0.0)];
    let (mut tau, mut g) = (0.0, 0.0);
    let mut h = 1e-3 * t_final / c;
    while g < t_final {
        let (g_new, err) = dp_step(&rhs, g, h);
        if err <= RK_TOL * (1.0 + g.abs()) {
            tau += h;
            g = g_new;
            nodes.push((tau, g));
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (RK_TOL / err).powf(0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }

    // g from the nearest accepted node with one exact-length step.
    let g_at = |t: f64| -> f64 {
        let j = nodes.partition_point(|&(s, _)| s <= t).max(1) - 1;
        let (s, gs) = nodes[j];
        if t == s {
            gs
        } else {
            dp_step(&rhs, gs, t - s).0
        }
    };

    // Secant on g(τ) − T between the last two nodes.
    let n = nodes.len();
    let (mut a, mut b) = (nodes[n - 2].0, nodes[n - 1].0);
    let (mut fa, mut fb) = (nodes[n - 2].1 - t_final, nodes[n - 1].1 - t_final);
    let mut tau_star = b;
    for _ in 0..60 {
        if fb.abs() <= EVENT_TOL || fb == fa {
            break;
        }
        let next = b - fb * (b - a) / (fb - fa);
        a = b;
        fa = fb;
        b = next;
        fb = g_at(b) - t_final;
        tau_star = b;
    }
    if fb.abs() > EVENT_TOL {
        return Err(Error::NoConvergence(format!("event location left g(τ*) − T = {fb:.3e}")));
    }

    let step = tau_star / (n_tau - 1) as f64;
    let taus: Vec<f64> = (0..n_tau).map(|j| if j + 1 == n_tau { tau_star } else { j as f64 * step }).collect();
    let gs: Vec<f64> = taus.iter().map(|&t| g_at(t)).collect();
    let length: Vec<f64> = gs.iter().map(|&t| LengthTrajectory::length_at_t(u, t)).collect();
    Ok(LengthTrajectory { hbar, m, t_final, tau_star, tau: taus, g: gs, length })
}

/// Sixth-order finite-difference derivative on a uniform grid (one-sided
/// seven-point stencils near the ends).
fn derivative6(y: &[f64], h: f64) -> Vec<f64> {
    const CENTRAL: [f64; 7] = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let n = y.len();
    (0..n)
        .map(|i| {
            if i >= 3 && i + 3 < n {
                (0..7).map(|k| CENTRAL[k] * y[i + k - 3]).sum::<f64>() / h
            } else {
                let start = if i < 3 { 0 } else { n - 7 };
                let nodes: Vec<f64> = (0..7).map(|k| (start + k) as f64).collect();
                let w = lagrange_derivative_weights(&nodes, i as f64);
                (0..7).map(|k| w[k] * y[start + k]).sum::<f64>() / h
            }
        })
        .collect()
}

/// Weights of `p'(x)` for the interpolant through `nodes`.
fn lagrange_derivative_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let denom: f64 = (0..n).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product();
            let mut total = 0.0;
            for i in (0..n).filter(|&i| i != j) {
                total += (0..n).filter(|&k| k != j && k != i).map(|k| x - nodes[k]).product::<f64>();
            }
            total / denom
        })
        .collect()
}

/// Value at `x` of the degree-5 interpolant through the six nodes around it.
fn interpolate6(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let j = xs.partition_point(|&v| v < x);
    let start = j.saturating_sub(3).min(n.saturating_sub(6));
    let idx = start..(start + 6).min(n);
    let mut total = 0.0;
    for i in idx.clone() {
        let mut w = 1.0;
        for k in idx.clone() {
            if k != i {
                w *= (x - xs[k]) / (xs[i] - xs[k]);
            }
        }
        total += w * ys[i];
    }
    total
}

/// `u(g(τ)) = (2m/ħ)·L̇(τ)L(τ)`, resampled on `n_t` uniform points of `[0, T]`.
pub fn length_to_control(lt: &LengthTrajectory, n_t: usize) -> Result<ControlSignal> {
    check_constants(lt.hbar, lt.m)?;
    if lt.tau.len() < 7 {
        return Err(Error::Contract("length trajectory needs at least seven samples".into()));
    }
    let h = lt.tau[1] - lt.tau[0];
    let dl = derivative6(&lt.length, h);
    let scale = 2.0 * lt.m / lt.hbar;
    let u_tau: Vec<f64> = dl.iter().zip(&lt.length).map(|(d, l)| scale * d * l).collect();
    let dt = lt.t_final / (n_t - 1) as f64;
    let mut samples: Vec<f64> = (0..n_t).map(|j| interpolate6(&lt.g, &u_tau, j as f64 * dt)).collect();
    // The wall is at rest at both ends by construction.
    samples[0] = 0.0;
    samples[n_t - 1] = 0.0;
    ControlSignal::from_samples(lt.t_final, samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSnapshot {
    pub tau: f64,
    pub t: f64,
    pub length: f64,
    pub z: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl PhysicalSnapshot {
    /// `∫₀^L |Φ|² dz` by the trapezoid rule with zero ends.
    pub fn norm_sq(&self) -> f64 {
        let dz = self.length / (self.z.len() + 1) as f64;
        dz * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }
}

/// `Φ(τ, z) = ħ/(√(2κm)·L(τ))·ψ(g(τ), z/L(τ))` at every snapshot of `res`.
pub fn physical_wavefunction(
    res: &EvolutionResult,
    u: &ControlSignal,
    lt: &LengthTrajectory,
    gs: &GroundState,
    kappa: f64,
) -> Result<Vec<PhysicalSnapshot>> {
    let expected = kappa_from_mu(gs, lt.hbar, lt.m)?;
    if (expected - kappa).abs() > KAPPA_TOL * expected {
        return Err(Error::Contract(format!(
            "κ = {kappa} is inconsistent with μ = {} (expected {expected})",
            gs.mu
        )));
    }
    let amp = lt.hbar / (2.0 * kappa * lt.m).sqrt();
    Ok(res
        .snapshots
        .par_iter()
        .zip(res.times.par_iter())
        .map(|(psi, &t)| {
            let length = LengthTrajectory::length_at_t(u, t);
            let xs = psi.grid().points();
            let pts = psi.points();
            PhysicalSnapshot {
                tau: lt.tau_of_t(t),
                t,
                length,
                z: xs.iter().map(|x| x * length).collect(),
                values: pts.iter().map(|v| v * (amp / length)).collect(),
            }
        })
        .collect())
}

/// `length.dat`, one `phys_XXXX.dat` per snapshot (`z Re Im |Φ|²` with wall
/// zeros) and `manifest.txt`.
pub fn write_physical(dir: &Path, lt: &LengthTrajectory, snaps: &[PhysicalSnapshot], kappa: f64) -> Result<()> {
    lt.write(&dir.join("length.dat"))?;
    let mut names = Vec::new();
    for (k, s) in snaps.iter().enumerate() {
        let name = format!("phys_{k:04}.dat");
        let mut rows = vec![vec![0.0, 0.0, 0.0, 0.0]];
        rows.extend(s.z.iter().zip(&s.values).map(|(z, v)| vec![*z, v.re, v.im, v.norm_sqr()]));
        rows.push(vec![s.length, 0.0, 0.0, 0.0]);
        write_table(&dir.join(&name), &["z", "re_Phi", "im_Phi", "abs2_Phi"], &rows)?;
        names.push(name);
    }
    let join = |f: &dyn Fn(&PhysicalSnapshot) -> f64| snaps.iter().map(|s| fmt(f(s))).collect::<Vec<_>>().join(" ");
    let text = manifest_text(&[
        ("hbar", fmt(lt.hbar)),
        ("m", fmt(lt.m)),
        ("kappa", fmt(kappa)),
        ("T", fmt(lt.t_final)),
        ("tau_star", fmt(lt.tau_star)),
        ("L_start", fmt(lt.length[0])),
        ("L_end", fmt(*lt.length.last().expect("nonempty"))),
        ("tau", join(&|s| s.tau)),
        ("L", join(&|s| s.length)),
        ("files", names.join(" ")),
    ]);
    write_text(&dir.join("manifest.txt"), &text)
}
