//! Genericity certificates from the initial-value problem
//! `f'' ± (φ² − μ) f = β g`, `g'' ± (3φ² − μ) g = β f` on `[0, 1]`.
//!
//! Column 1 starts from `f'(0) = 1` and column 2 from `g'(0) = 1`, all other
//! data zero. The endpoint matrix `A(β) = [[f₁(1), f₂(1)], [g₁(1), g₂(1)]]` is
//! singular exactly at the eigenvalues `β_n`, and `f₁(1) ≠ 0` there certifies
//! that `β_n` is simple with a nonzero control coefficient.
//!
//! Both columns grow like `e^{√β}` and become nearly parallel, so `det A` is
//! integrated directly through the six 2×2 minors of the solution pair (the
//! compound-matrix method) instead of by subtracting large products.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groundstate::GroundProfile;
use crate::spectral::{ground_state_or_trivial, positive_betas};
use crate::linop::{assemble_block, Flavor};
use crate::Regime;

/// A zero of `G_n` is not asserted unless `|G_n|` exceeds this many error estimates.
pub const MARGIN_FACTOR: f64 = 10.0;

/// Relative agreement required between matrix and shooting eigenvalues.
pub const EIGEN_CONSISTENCY: f64 = 1e-6;

/// Largest RK4 step.
pub const MAX_STEP: f64 = 1e-4;

/// Width to which sign-change brackets in μ are refined.
pub const BRACKET_WIDTH: f64 = 1e-6;

/// Default sine modes for the eigenvalues fed into certificates and scans.
pub const DEFAULT_MODES: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    First,
    Second,
}

/// Endpoint data of one shooting run with a Richardson error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    /// `(f(1), g(1), f'(1), g'(1))`.
    pub values: [f64; 4],
    /// `|y_h − y_{h/2}| / 15` per component.
    pub error: [f64; 4],
}

/// Both columns and the determinant at one `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingMatrix {
    pub beta: f64,
    /// `[[f₁, f₂], [g₁, g₂]]` at `x = 1`.
    pub a: [[f64; 2]; 2],
    pub det: f64,
    pub det_error: f64,
    pub g_error: f64,
}

impl ShootingMatrix {
    /// Largest singular value of the 2×2 endpoint matrix.
    pub fn sigma_max(&self) -> f64 {
        let [[p, q], [r, s]] = self.a;
        let fro2 = p * p + q * q + r * r + s * s;
        let det = self.det;
        let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
        (0.5 * (fro2 + disc)).sqrt()
    }

    /// Smallest singular value, `|det| / σ_max`, free of cancellation.
    pub fn sigma_min(&self) -> f64 {
        let smax = self.sigma_max();
        if smax == 0.0 {
            0.0
        } else {
            self.det.abs() / smax
        }
    }

    /// `G = f₁(1)`.
    pub fn g(&self) -> f64 {
        self.a[0][0]
    }
}

/// Integrator for one ground state; `φ²` is taken from the closed form.
pub struct Shooter {
    profile: GroundProfile,
    sign: f64,
    mu: f64,
}

impl Shooter {
    pub fn new(profile: GroundProfile) -> Self {
        Self { sign: profile.regime().sign(), mu: profile.mu(), profile }
    }

    pub fn for_mu(regime: Regime, mu: f64) -> Result<Self> {
        let gs = ground_state_or_trivial(regime, mu)?;
        Ok(Self::new(*gs.profile()))
    }

    pub fn profile(&self) -> &GroundProfile {
        &self.profile
    }

    /// Step count for `β`: `h ≤ min(1e−4, 0.1/√β)`.
    pub fn steps_for(beta: f64) -> usize {
        let h = MAX_STEP.min(0.1 / beta.abs().sqrt().max(1e-300));
        (1.0 / h).ceil() as usize
    }

    /// `(a(x), b(x)) = (s(μ − φ²), s(μ − 3φ²))` at `2n + 1` nodes spaced `1/(2n)`.
    fn coefficients(&self, n: usize) -> Vec<(f64, f64)> {
        let h = 0.5 / n as f64;
        (0..=2 * n)
            .map(|i| {
                let p2 = self.profile.value(i as f64 * h).powi(2);
                (self.sign * (self.mu - p2), self.sign * (self.mu - 3.0 * p2))
            })
            .collect()
    }

    fn rk4<const D: usize>(
        coeffs: &[(f64, f64)],
        stride: usize,
        steps: usize,
        y0: [f64; D],
        rhs: impl Fn((f64, f64), &[f64; D]) -> [f64; D],
    ) -> [f64; D] {
        let h = 1.0 / steps as f64;
        let mut y = y0;
        let axpy = |y: &[f64; D], k: &[f64; D], c: f64| {
            let mut out = *y;
            for i in 0..D {
                out[i] += c * k[i];
            }
            out
        };
        for step in 0..steps {
            let base = 2 * step * stride;
            let c0 = coeffs[base];
            let c1 = coeffs[base + stride];
            let c2 = coeffs[base + 2 * stride];
            let k1 = rhs(c0, &y);
            let k2 = rhs(c1, &axpy(&y, &k1, 0.5 * h));
            let k3 = rhs(c1, &axpy(&y, &k2, 0.5 * h));
            let k4 = rhs(c2, &axpy(&y, &k3, h));
            for i in 0..D {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    fn column_rhs(beta: f64) -> impl Fn((f64, f64), &[f64; 4]) -> [f64; 4] {
        move |(a, b), y| [y[2], y[3], a * y[0] + beta * y[1], beta * y[0] + b * y[1]]
    }

    /// Derivatives of the minors `m01, m02, m03, m12, m13, m23`.
    fn minor_rhs(beta: f64) -> impl Fn((f64, f64), &[f64; 6]) -> [f64; 6] {
        move |(a, b), m| {
            let [m01, m02, m03, m12, m13, m23] = *m;
            [
                m03 - m12,
                beta * m01,
                m23 + b * m01,
                -m23 - a * m01,
                -beta * m01,
                a * m03 + beta * m13 - beta * m02 - b * m12,
            ]
        }
    }

    fn initial(col: Column) -> [f64; 4] {
        match col {
            Column::First => [0.0, 0.0, 1.0, 0.0],
            Column::Second => [0.0, 0.0, 0.0, 1.0],
        }
    }

    /// Integrates one column with `steps` and `2·steps` RK4 steps.
    pub fn integrate_with(&self, beta: f64, col: Column, steps: usize) -> Endpoint {
        let coeffs = self.coefficients(2 * steps);
        let coarse = Self::rk4(&coeffs, 2, steps, Self::initial(col), Self::column_rhs(beta));
        let fine = Self::rk4(&coeffs, 1, 2 * steps, Self::initial(col), Self::column_rhs(beta));
        let mut error = [0.0; 4];
        for i in 0..4 {
            error[i] = (coarse[i] - fine[i]).abs() / 15.0;
        }
        Endpoint { values: fine, error }
    }

    /// Integrates one column at the default step size.
    pub fn integrate_fg(&self, beta: f64, col: Column) -> Endpoint {
        self.integrate_with(beta, col, Self::steps_for(beta))
    }

    /// Endpoint matrix and determinant at `β`, each with Richardson estimates.
    pub fn matrix(&self, beta: f64) -> ShootingMatrix {
        let steps = Self::steps_for(beta);
        let coeffs = self.coefficients(2 * steps);
        let run = |stride: usize, n: usize| {
            let c1 = Self::rk4(&coeffs, stride, n, Self::initial(Column::First), Self::column_rhs(beta));
            let c2 = Self::rk4(&coeffs, stride, n, Self::initial(Column::Second), Self::column_rhs(beta));
            let m = Self::rk4(&coeffs, stride, n, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0], Self::minor_rhs(beta));
            (c1, c2, m[0])
        };
        let (c1c, _, det_c) = run(2, steps);
        let (c1, c2, det) = run(1, 2 * steps);
        ShootingMatrix {
            beta,
            a: [[c1[0], c2[0]], [c1[1], c2[1]]],
            det,
            det_error: (det - det_c).abs() / 15.0,
            g_error: (c1[0] - c1c[0]).abs() / 15.0,
        }
    }

    pub fn det(&self, beta: f64) -> f64 {
        self.matrix(beta).det
    }

    /// Locates the zero of `det A(β)` nearest to `guess` by expanding a
    /// symmetric search window until the sign changes, then bisecting.
    pub fn refine_eigenvalue(&self, guess: f64, max_rel_window: f64) -> Option<f64> {
        let d0 = self.det(guess);
        if d0 == 0.0 {
            return Some(guess);
        }
        let mut delta = 1e-9;
        while delta <= max_rel_window {
            let lo = guess * (1.0 - delta);
            let hi = guess * (1.0 + delta);
            let dl = self.det(lo);
            let dh = self.det(hi);
            let bracket = if dl.signum() != d0.signum() {
                Some((lo, guess, dl))
            } else if dh.signum() != d0.signum() {
                Some((guess, hi, d0))
            } else {
                None
            };
            if let Some((mut a, mut b, mut da)) = bracket {
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b || (b - a) <= 1e-15 * mid {
                        break;
                    }
                    let dm = self.det(mid);
                    if dm.signum() == da.signum() {
                        a = mid;
                        da = dm;
                    } else {
                        b = mid;
                    }
                }
                return Some(0.5 * (a + b));
            }
            delta *= 4.0;
        }
        None
    }
}

/// Matrix eigenvalues `β_1..β_count` at `μ`.
pub fn matrix_betas(regime: Regime, mu: f64, count: usize, modes: usize) -> Result<Vec<f64>> {
    let gs = ground_state_or_trivial(regime, mu)?;
    let mut b = positive_betas(&assemble_block(&gs, Flavor::M, modes));
    if b.len() < count {
        return Err(Error::Contract(format!("only {} eigenvalues available", b.len())));
    }
    b.truncate(count);
    Ok(b)
}

/// `G_n(μ) = f₁(1)` at the `n`-th eigenvalue, refined by shooting.
pub fn g_n(regime: Regime, mu: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("mode index starts at 1".into()));
    }
    let betas = matrix_betas(regime, mu, n, DEFAULT_MODES.max(4 * n))?;
    let shooter = Shooter::for_mu(regime, mu)?;
    let beta = shooter.refine_eigenvalue(betas[n - 1], 1e-3).ok_or_else(|| {
        Error::NoConvergence(format!("no determinant sign change near beta_{n} = {}", betas[n - 1]))
    })?;
    Ok(shooter.matrix(beta).g())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertStatus {
    Certified,
    Failed(usize),
    Unresolved(usize),
}

impl std::fmt::Display for CertStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CertStatus::Certified => write!(f, "certified"),
            CertStatus::Failed(n) => write!(f, "failed({n})"),
            CertStatus::Unresolved(n) => write!(f, "unresolved({n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertRow {
    pub n: usize,
    pub beta_matrix: f64,
    pub beta_shooting: f64,
    pub g: f64,
    /// Error scale: Richardson estimate plus the effect of the eigenvalue uncertainty.
    pub scale: f64,
    pub margin: f64,
    /// `σ_min / σ_max` of `A` at the matrix eigenvalue.
    pub singular_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericityCertificate {
    pub regime: Regime,
    pub mu: f64,
    pub n_max: usize,
    pub rows: Vec<CertRow>,
    pub min_margin: f64,
    pub status: CertStatus,
    /// Set when the checked range is empty.
    pub degenerate: bool,
}

/// Test hook: multiplies `G_n` by `(μ − mu)` for one mode, planting a simple zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignFlip {
    pub n: usize,
    pub mu: f64,
}

impl SignFlip {
    pub fn factor(hook: Option<SignFlip>, n: usize, mu: f64) -> f64 {
        match hook {
            Some(h) if h.n == n => mu - h.mu,
            _ => 1.0,
        }
    }
}

fn certify_row(shooter: &Shooter, n: usize, beta_matrix: f64, factor: f64) -> (CertRow, Option<CertStatus>) {
    let unresolved = |beta_shooting: f64| CertRow {
        n,
        beta_matrix,
        beta_shooting,
        g: f64::NAN,
        scale: f64::NAN,
        margin: 0.0,
        singular_ratio: f64::NAN,
    };
    let Some(beta) = shooter.refine_eigenvalue(beta_matrix, 1e-4) else {
        return (unresolved(f64::NAN), Some(CertStatus::Unresolved(n)));
    };
    if (beta - beta_matrix).abs() > EIGEN_CONSISTENCY * beta {
        return (unresolved(beta), Some(CertStatus::Unresolved(n)));
    }
    let at = shooter.matrix(beta);
    let at_matrix = shooter.matrix(beta_matrix);
    // Sensitivity of G to the residual eigenvalue uncertainty.
    let db = (beta - beta_matrix).abs().max(1e-12 * beta);
    let dg = (shooter.matrix(beta + db).g() - at.g()).abs();
    let scale = at.g_error + dg;
    let g = at.g() * factor;
    let margin = if scale > 0.0 { g.abs() / scale } else { f64::INFINITY };
    let row = CertRow {
        n,
        beta_matrix,
        beta_shooting: beta,
        g,
        scale,
        margin,
        singular_ratio: at_matrix.sigma_min() / at_matrix.sigma_max(),
    };
    let status = (margin <= MARGIN_FACTOR).then_some(CertStatus::Failed(n));
    (row, status)
}

/// Certifies `G_n(μ) ≠ 0` for `n = 1..n_max`.
pub fn certify(regime: Regime, mu: f64, n_max: usize) -> Result<GenericityCertificate> {
    certify_with_modes(regime, mu, n_max, DEFAULT_MODES.max(4 * n_max))
}

pub fn certify_with_modes(
    regime: Regime,
    mu: f64,
    n_max: usize,
    modes: usize,
) -> Result<GenericityCertificate> {
    certify_hooked(regime, mu, n_max, modes, None)
}

pub fn certify_hooked(
    regime: Regime,
    mu: f64,
    n_max: usize,
    modes: usize,
    hook: Option<SignFlip>,
) -> Result<GenericityCertificate> {
    if n_max == 0 {
        ground_state_or_trivial(regime, mu)?;
        return Ok(GenericityCertificate {
            regime,
            mu,
            n_max,
            rows: Vec::new(),
            min_margin: f64::INFINITY,
            status: CertStatus::Certified,
            degenerate: true,
        });
    }
    let betas = matrix_betas(regime, mu, n_max, modes)?;
    let shooter = Shooter::for_mu(regime, mu)?;
    let results: Vec<(CertRow, Option<CertStatus>)> = betas
        .par_iter()
        .enumerate()
        .map(|(i, &b)| certify_row(&shooter, i + 1, b, SignFlip::factor(hook, i + 1, mu)))
        .collect();
    let status = results
        .iter()
        .find_map(|(_, s)| s.clone())
        .unwrap_or(CertStatus::Certified);
    let rows: Vec<CertRow> = results.into_iter().map(|(r, _)| r).collect();
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(GenericityCertificate { regime, mu, n_max, rows, min_margin, status, degenerate: false })
}

impl GenericityCertificate {
    pub fn is_certified(&self) -> bool {
        self.status == CertStatus::Certified
    }

    /// Structured text: header, one row per mode, status line.
    pub fn document(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# genericity certificate");
        let _ = writeln!(out, "regime = {}", self.regime);
        let _ = writeln!(out, "mu = {:.16e}", self.mu);
        let _ = writeln!(out, "n_checked = 1..{}", self.n_max);
        let _ = writeln!(out, "margin_factor = {:.16e}", MARGIN_FACTOR);
        let _ = writeln!(out, "min_margin = {:.16e}", self.min_margin);
        let _ = writeln!(out, "degenerate = {}", self.degenerate);
        let _ = writeln!(out, "# n beta_matrix beta_shooting G_n error_scale margin singular_ratio");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                r.n, r.beta_matrix, r.beta_shooting, r.g, r.scale, r.margin, r.singular_ratio
            );
        }
        let _ = writeln!(out, "status = {}", self.status);
        out
    }
}

/// A μ interval on which `G_n` changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Sign-change brackets of an arbitrary `g(n, μ)` over `mu_grid`, each refined
/// by bisection to [`BRACKET_WIDTH`]. This is the engine behind [`scan`] and
/// accepts synthetic functions for testing.
pub fn scan_with<G>(mu_grid: &[f64], n_range: std::ops::RangeInclusive<usize>, g: G) -> Result<Vec<Bracket>>
where
    G: Fn(usize, f64) -> Result<f64> + Sync,
{
    if mu_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("mu grid must be strictly ascending".into()));
    }
    let ns: Vec<usize> = n_range.collect();
    let per_n: Vec<Vec<Bracket>> = ns
        .par_iter()
        .map(|&n| {
            let values: Vec<f64> = mu_grid.iter().map(|&mu| g(n, mu)).collect::<Result<_>>()?;
            let mut out = Vec::new();
            for i in 0..mu_grid.len().saturating_sub(1) {
                if values[i].signum() == values[i + 1].signum() {
                    continue;
                }
                let (mut lo, mut hi, mut glo) = (mu_grid[i], mu_grid[i + 1], values[i]);
                while hi - lo > BRACKET_WIDTH {
                    let mid = 0.5 * (lo + hi);
                    let gm = g(n, mid)?;
                    if gm.signum() == glo.signum() {
                        lo = mid;
                        glo = gm;
                    } else {
                        hi = mid;
                    }
                }
                out.push(Bracket { n, lo, hi });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

/// Sign changes of `G_n(μ)` over an ascending μ grid.
pub fn scan(regime: Regime, mu_grid: &[f64], n_range: std::ops::RangeInclusive<usize>) -> Result<Vec<Bracket>> {
    scan_hooked(regime, mu_grid, n_range, None)
}

pub fn scan_hooked(
    regime: Regime,
    mu_grid: &[f64],
    n_range: std::ops::RangeInclusive<usize>,
    hook: Option<SignFlip>,
) -> Result<Vec<Bracket>> {
    let lo = regime.mu_min();
    if mu_grid.iter().any(|&m| m < lo) {
        return Err(Error::Domain(format!("scan grid must lie above {lo}")));
    }
    scan_with(mu_grid, n_range, |n, mu| Ok(g_n(regime, mu, n)? * SignFlip::factor(hook, n, mu)))
}

/// Closed-form `G_n` at the bifurcation point `μ = ∓π²`, where `φ = 0`,
/// `β_n = ((n+1)² − 1)π²` and `f₁(1) = sinh(√(n² + 2n − 1) π) / (2π √(n² + 2n − 1))`.
/// The same value holds in both regimes.
pub fn endpoint_g(n: usize) -> f64 {
    let r = ((n * n + 2 * n) as f64 - 1.0).sqrt();
    (r * std::f64::consts::PI).sinh() / (2.0 * std::f64::consts::PI * r)
}
