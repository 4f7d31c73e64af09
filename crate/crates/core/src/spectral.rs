//! Biorthogonal eigenbasis of the linearized operator.
//!
//! The real matrix `𝓜` has eigenvalues `±β_n` plus a two-dimensional Jordan
//! block at zero. For an eigenvector `V⁺ = (u, v)` of `β`, the swapped vector
//! `(v, u)` belongs to `−β`, and since `𝓜ᵀ = S𝓜S` with `S = diag(1, −1)`, the
//! left eigenvector is `W⁺ = (u, −v)` up to scale. No transpose solve is needed.
//!
//! Mapped back through `J⁻¹` this gives, for the eigenvalue `iβ_n` of `𝓛`,
//! `Φ_n⁺ = ((u + v)/2, i(u − v)/2)` and `Ψ_n⁺ = ((w + z)/2, i(w − z)/2)` with
//! `W⁺ = (w, z)`. Normalising `‖V⁺‖ = √2` and `⟨V⁺, W⁺⟩ = 2` makes
//! `⟨Φ_m⁺, Ψ_n⁺⟩ = δ_mn` and `V⁺ ≈ 2 sin((n + n*)πx) e⁺` for large `n`.
//!
//! All vectors are stored as coefficients in the orthonormal basis
//! `e_k = √2 sin(kπx)`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groundstate::{build_ground_state, trivial_ground_state, GroundState};
use crate::linalg::{eig_real, eigvals_real};
use crate::linop::{assemble_block, BlockOperator, Flavor};
use crate::quadrature::GaussLegendre;
use crate::Regime;

/// Minimum number of retained modes for the offset estimate.
pub const MIN_MODES_FOR_OFFSET: usize = 16;

/// Relative gap below which neighbouring eigenvalues are treated as unresolved.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Samples of the ground state used when assembling operators.
pub const GROUND_SAMPLES: usize = 1025;

/// One retained eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub n: usize,
    pub beta: f64,
    /// `|Im λ|` reported by the nonsymmetric eigensolver.
    pub imag_residue: f64,
    pub reliable: bool,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    /// `Γ_n⁺` by quadrature against `(xφ)'`.
    pub gamma: f64,
    /// `Γ_n⁺` from the boundary formula `φ'(1) g'(1) / β`.
    pub gamma_boundary: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub regime: Regime,
    pub mu: f64,
    pub modes: usize,
    pub entries: Vec<Mode>,
    pub n_star: Option<i64>,
    /// `max_n |β_n − (n + n*)²π²|` over retained modes.
    pub offset_bound: f64,
    pub gamma0_minus: f64,
    /// φ and ∂_μφ in the orthonormal basis (the null-space generators).
    pub phi: Vec<f64>,
    pub dmu_phi: Vec<f64>,
    pub dphi1: f64,
}

/// Real form of a complex eigenvector of a real eigenvalue.
fn realify(v: &[Complex64]) -> Vec<f64> {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    v.iter().map(|x| (x * phase).re).collect()
}

/// Orthonormal sine coefficients `∫ f e_k`, `k = 1..m`.
pub fn project<F: Fn(f64) -> f64 + Sync>(f: F, m: usize) -> Vec<f64> {
    let gl = GaussLegendre::new(16);
    let panels = (m / 2).max(32);
    let (xs, ws) = gl.composite(0.0, 1.0, panels);
    let fx: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    (1..=m)
        .map(|k| {
            let kp = k as f64 * PI;
            xs.iter()
                .zip(&ws)
                .zip(&fx)
                .map(|((x, w), v)| w * v * SQRT_2 * (kp * x).sin())
                .sum()
        })
        .collect()
}

/// Sorted positive eigenvalues of `𝓜` with the Jordan pair at zero removed.
pub fn positive_betas(op: &BlockOperator) -> Vec<f64> {
    let vals = eigvals_real(&op.matrix);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].norm().total_cmp(&vals[b].norm()));
    let mut betas: Vec<f64> = order[2..].iter().map(|&i| vals[i].re).filter(|&b| b > 0.0).collect();
    betas.sort_by(f64::total_cmp);
    betas
}

/// Eigendecomposition of an `𝓜` operator, keeping `n_keep ≤ M/4` modes.
pub fn decompose(op: &BlockOperator, n_keep: usize) -> Result<SpectralData> {
    if op.flavor != Flavor::M {
        return Err(Error::Contract("decompose expects the real 𝓜 form".into()));
    }
    let m = op.modes;
    if n_keep == 0 || n_keep > m / 4 {
        return Err(Error::Contract(format!(
            "n_keep = {n_keep} must lie in 1..={} for {m} modes",
            m / 4
        )));
    }
    let (vals, vecs) = eig_real(&op.matrix);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].norm().total_cmp(&vals[b].norm()));
    let mut pos: Vec<usize> = order[2..].iter().copied().filter(|&i| vals[i].re > 0.0).collect();
    pos.sort_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re));
    if pos.len() < n_keep {
        return Err(Error::Contract(format!(
            "only {} positive eigenvalues found, {n_keep} requested",
            pos.len()
        )));
    }
    let beta_top = vals[pos[n_keep - 1]].re;
    let mut entries = Vec::with_capacity(n_keep);
    for (idx, &i) in pos.iter().take(n_keep).enumerate() {
        let beta = vals[i].re;
        let mut full = realify(&vecs[i]);
        let norm = full.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut full {
            *x *= SQRT_2 / norm;
        }
        let (mut u, mut v) = (full[..m].to_vec(), full[m..].to_vec());
        let lead = u.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        if lead < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let pairing: f64 =
            u.iter().map(|x| x * x).sum::<f64>() - v.iter().map(|x| x * x).sum::<f64>();
        let scale = 2.0 / pairing;
        let w: Vec<f64> = u.iter().map(|x| x * scale).collect();
        let z: Vec<f64> = v.iter().map(|x| -x * scale).collect();

        let gap = |j: usize| (vals[j].re - beta).abs() / beta;
        let mut reliable = vals[i].im.abs() <= 1e-8 * beta_top;
        if idx > 0 && gap(pos[idx - 1]) < DEGENERACY_GAP {
            reliable = false;
        }
        if idx + 1 < pos.len() && gap(pos[idx + 1]) < DEGENERACY_GAP {
            reliable = false;
        }
        entries.push(Mode {
            n: idx + 1,
            beta,
            imag_residue: vals[i].im.abs(),
            reliable,
            u,
            v,
            w,
            z,
            gamma: 0.0,
            gamma_boundary: 0.0,
        });
    }
    let betas: Vec<f64> = entries.iter().map(|e| e.beta).collect();
    let (n_star, offset_bound) = match estimate_n_star(&betas) {
        Ok((ns, c)) => (Some(ns), c),
        Err(_) => (None, f64::NAN),
    };
    Ok(SpectralData {
        regime: op.regime,
        mu: op.mu,
        modes: m,
        entries,
        n_star,
        offset_bound,
        gamma0_minus: 0.0,
        phi: Vec::new(),
        dmu_phi: Vec::new(),
        dphi1: 0.0,
    })
}

/// `n* = round(√β_n/π − n)` over the last quartile of `betas`, with the fitted
/// bound `C = max_n |β_n − (n + n*)²π²|`.
pub fn estimate_n_star(betas: &[f64]) -> Result<(i64, f64)> {
    let n = betas.len();
    if n < MIN_MODES_FOR_OFFSET {
        return Err(Error::Contract(format!(
            "offset estimate needs at least {MIN_MODES_FOR_OFFSET} modes, got {n}"
        )));
    }
    let start = n - n / 4;
    let estimates: Vec<i64> = (start..n)
        .map(|i| (betas[i].sqrt() / PI - (i + 1) as f64).round() as i64)
        .collect();
    let first = estimates[0];
    if estimates.iter().any(|&e| e != first) {
        return Err(Error::NoConvergence(format!(
            "offset estimate not constant over the last quartile: {estimates:?}"
        )));
    }
    let bound = betas
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let k = (i as i64 + 1 + first) as f64 * PI;
            (b - k * k).abs()
        })
        .fold(0.0, f64::max);
    Ok((first, bound))
}

/// Fills in `Γ_n⁺` (both formulas), `Γ₀⁻` and the null-space generators.
pub fn gamma_coefficients(mut sd: SpectralData, gs: &GroundState) -> SpectralData {
    let m = sd.modes;
    let forcing = project(|x| gs.value(x) + x * gs.derivative(x), m);
    sd.phi = project(|x| gs.value(x), m);
    sd.dmu_phi = project(|x| gs.dmu_value(x), m);
    sd.gamma0_minus = 0.5 * GaussLegendre::new(12).integrate(|x| gs.value(x).powi(2), 0.0, 1.0, 64);
    sd.dphi1 = gs.dphi1;
    for e in &mut sd.entries {
        e.gamma = forcing
            .iter()
            .zip(e.w.iter().zip(&e.z))
            .map(|(f, (w, z))| f * 0.5 * (w + z))
            .sum();
        let dg1: f64 = e
            .w
            .iter()
            .zip(&e.z)
            .enumerate()
            .map(|(i, (w, z))| {
                let k = (i + 1) as f64;
                let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
                0.5 * (z - w) * SQRT_2 * k * PI * sign
            })
            .sum();
        e.gamma_boundary = gs.dphi1 * dg1 / e.beta;
    }
    sd
}

/// Builds the ground state, assembles `𝓜` with `modes` sine modes, and
/// decomposes it keeping `modes/4` modes with all coefficients filled in.
pub fn analyze(regime: Regime, mu: f64, modes: usize) -> Result<(GroundState, SpectralData)> {
    let gs = ground_state_or_trivial(regime, mu)?;
    let op = assemble_block(&gs, Flavor::M, modes);
    let sd = decompose(&op, modes / 4)?;
    Ok((gs.clone(), gamma_coefficients(sd, &gs)))
}

/// The closed-form ground state, or the `φ = 0` state when `μ` sits at `∓π²`.
pub fn ground_state_or_trivial(regime: Regime, mu: f64) -> Result<GroundState> {
    if (mu - regime.mu_min()).abs() <= 1e-14 * regime.mu_min().abs() {
        Ok(trivial_ground_state(regime, GROUND_SAMPLES))
    } else {
        build_ground_state(regime, mu, GROUND_SAMPLES)
    }
}

impl SpectralData {
    pub fn betas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.beta).collect()
    }

    pub fn mode(&self, n: usize) -> &Mode {
        &self.entries[n - 1]
    }

    /// `Φ_n⁺` as (first, second) component coefficient vectors.
    pub fn phi_plus(&self, n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let e = self.mode(n);
        let a = e.u.iter().zip(&e.v).map(|(u, v)| Complex64::new(0.5 * (u + v), 0.0)).collect();
        let b = e.u.iter().zip(&e.v).map(|(u, v)| Complex64::new(0.0, 0.5 * (u - v))).collect();
        (a, b)
    }

    /// `Ψ_n⁺` as (first, second) component coefficient vectors.
    pub fn psi_plus(&self, n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let e = self.mode(n);
        let a = e.w.iter().zip(&e.z).map(|(w, z)| Complex64::new(0.5 * (w + z), 0.0)).collect();
        let b = e.w.iter().zip(&e.z).map(|(w, z)| Complex64::new(0.0, 0.5 * (w - z))).collect();
        (a, b)
    }

    /// `⟨Z, Ψ_n⁺⟩` for a real two-component field given by its coefficients.
    pub fn pair_plus(&self, z1: &[f64], z2: &[f64], n: usize) -> Complex64 {
        let e = self.mode(n);
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..self.modes.min(z1.len()) {
            re += z1[k] * 0.5 * (e.w[k] + e.z[k]);
            im -= z2[k] * 0.5 * (e.w[k] - e.z[k]);
        }
        Complex64::new(re, im)
    }

    /// `⟨φ, ∂_μφ⟩`, the pairing of the null-space generators.
    pub fn null_pairing(&self) -> f64 {
        self.phi.iter().zip(&self.dmu_phi).map(|(a, b)| a * b).sum()
    }

    /// Real field `Σ_{n ≤ count} 2 Re(c_n Φ_n⁺) + c₀⁺ Φ₀⁺ + c₀⁻ Φ₀⁻`.
    pub fn resum(&self, c: &[Complex64], c0_plus: f64, c0_minus: f64) -> (Vec<f64>, Vec<f64>) {
        let m = self.modes;
        let mut z1 = vec![0.0; m];
        let mut z2 = vec![0.0; m];
        for (n, cn) in c.iter().enumerate() {
            let e = &self.entries[n];
            for k in 0..m {
                z1[k] += cn.re * (e.u[k] + e.v[k]);
                z2[k] -= cn.im * (e.u[k] - e.v[k]);
            }
        }
        for k in 0..m.min(self.phi.len()) {
            z2[k] += c0_plus * self.phi[k];
            z1[k] += c0_minus * self.dmu_phi[k];
        }
        (z1, z2)
    }

    /// `(−1)^{n+n*+1} φ'(1) / (πn)`.
    pub fn gamma_tail_law(&self, n: usize) -> Option<f64> {
        let ns = self.n_star?;
        let sign = if (n as i64 + ns + 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        Some(sign * self.dphi1 / (PI * n as f64))
    }

    /// Structured text report, one record per retained mode.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# spectrum");
        let _ = writeln!(out, "regime = {}", self.regime);
        let _ = writeln!(out, "mu = {:.16e}", self.mu);
        let _ = writeln!(out, "modes = {}", self.modes);
        match self.n_star {
            Some(ns) => {
                let _ = writeln!(out, "n_star = {ns}");
                let _ = writeln!(out, "offset_bound = {:.16e}", self.offset_bound);
            }
            None => {
                let _ = writeln!(out, "n_star = unresolved");
            }
        }
        let _ = writeln!(out, "gamma0_minus = {:.16e}", self.gamma0_minus);
        let _ = writeln!(out, "# n beta gamma_re gamma_im asymptotic_deviation endpoint_value reliable");
        for e in &self.entries {
            let dev = match self.n_star {
                Some(ns) => {
                    let k = (e.n as i64 + ns) as f64 * PI;
                    e.beta - k * k
                }
                None => f64::NAN,
            };
            let endpoint = (((e.n + 1) * (e.n + 1)) as f64 - 1.0) * PI * PI;
            let _ = writeln!(
                out,
                "{} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {}",
                e.n, e.beta, e.gamma, 0.0, dev, endpoint, e.reliable
            );
        }
        out
    }
}

/// One continued eigenvalue curve `F_n(μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCurve {
    pub n: usize,
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    /// Set on the sample where an ambiguous match survived all refinements.
    pub crossing: Vec<bool>,
}

/// Maximum number of μ-step bisections when matching is ambiguous.
pub const MAX_REFINEMENTS: usize = 10;

fn betas_at(regime: Regime, mu: f64, modes: usize, count: usize) -> Result<Vec<f64>> {
    let gs = ground_state_or_trivial(regime, mu)?;
    let mut b = positive_betas(&assemble_block(&gs, Flavor::M, modes));
    b.truncate(count);
    Ok(b)
}

/// Continues the first `n_max` eigenvalue curves from `mu_start` to `mu_end`.
///
/// Matching uses nearest candidates after linear extrapolation of each curve.
/// When two candidates fall within half the extrapolation tolerance the μ step
/// is bisected, up to [`MAX_REFINEMENTS`] times, before a crossing is flagged.
pub fn track_curves(
    regime: Regime,
    mu_start: f64,
    mu_end: f64,
    steps: usize,
    n_max: usize,
    modes: usize,
) -> Result<Vec<EigenCurve>> {
    let lo = regime.mu_min();
    if mu_start < lo || mu_end < lo {
        return Err(Error::Domain(format!("curve range must lie above {lo}")));
    }
    if n_max == 0 || n_max > modes / 4 {
        return Err(Error::Contract(format!("n_max must lie in 1..={}", modes / 4)));
    }
    let steps = steps.max(1);
    let count = (n_max + 4).min(modes / 2);
    let grid: Vec<f64> = (0..=steps)
        .map(|i| mu_start + (mu_end - mu_start) * i as f64 / steps as f64)
        .collect();
    let samples: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&mu| betas_at(regime, mu, modes, count))
        .collect::<Result<Vec<_>>>()?;

    let mut curves: Vec<EigenCurve> = (0..n_max)
        .map(|i| EigenCurve { n: i + 1, mu: vec![grid[0]], beta: vec![samples[0][i]], crossing: vec![false] })
        .collect();
    for i in 1..grid.len() {
        let target = grid[i];
        loop {
            let here = *curves[0].mu.last().unwrap();
            // Halve the step until the match is unambiguous or refinements run out.
            let mut step_to = target;
            let mut vals = samples[i].clone();
            let mut refinements = 0;
            loop {
                match match_candidates(&curves, step_to, &vals) {
                    Some(assign) => {
                        push(&mut curves, step_to, &vals, &assign, false);
                        break;
                    }
                    None if refinements < MAX_REFINEMENTS => {
                        refinements += 1;
                        step_to = 0.5 * (here + step_to);
                        vals = betas_at(regime, step_to, modes, count)?;
                    }
                    None => {
                        let assign = nearest(&curves, step_to, &vals);
                        push(&mut curves, step_to, &vals, &assign, true);
                        break;
                    }
                }
            }
            if step_to == target {
                break;
            }
        }
    }
    Ok(curves)
}

fn predictions(curves: &[EigenCurve], mu: f64) -> Vec<(f64, f64)> {
    curves
        .iter()
        .map(|c| {
            let last = c.beta.len() - 1;
            let dmu = mu - c.mu[last];
            let velocity = if last > 0 && c.mu[last] != c.mu[last - 1] {
                (c.beta[last] - c.beta[last - 1]) / (c.mu[last] - c.mu[last - 1])
            } else {
                0.0
            };
            let tol = (velocity * dmu).abs().max(1e-6 * c.beta[last].abs());
            (c.beta[last] + velocity * dmu, tol)
        })
        .collect()
}

fn nearest(curves: &[EigenCurve], mu: f64, candidates: &[f64]) -> Vec<usize> {
    predictions(curves, mu)
        .iter()
        .map(|&(p, _)| {
            (0..candidates.len())
                .min_by(|&a, &b| (candidates[a] - p).abs().total_cmp(&(candidates[b] - p).abs()))
                .unwrap()
        })
        .collect()
}

/// Nearest-candidate assignment, or `None` when it is ambiguous.
fn match_candidates(curves: &[EigenCurve], mu: f64, candidates: &[f64]) -> Option<Vec<usize>> {
    let assign = nearest(curves, mu, candidates);
    for &(p, tol) in &predictions(curves, mu) {
        let close = candidates.iter().filter(|&&b| (b - p).abs() < 0.5 * tol).count();
        if close > 1 {
            return None;
        }
    }
    let mut taken = assign.clone();
    taken.sort_unstable();
    taken.dedup();
    (taken.len() == assign.len()).then_some(assign)
}

fn push(curves: &mut [EigenCurve], mu: f64, candidates: &[f64], assign: &[usize], crossing: bool) {
    for (c, &j) in curves.iter_mut().zip(assign) {
        c.mu.push(mu);
        c.beta.push(candidates[j]);
        c.crossing.push(crossing);
    }
}
