//! Positive ground states of the stationary cubic problem on `(0, 1)`.
//!
//! In the focusing regime `φ'' + φ³ = μφ` with `μ > −π²`, and
//! `φ = 2√2 kK cn(2K(x − ½), k)` with `μ = 4(2k² − 1)K²`.
//! In the defocusing regime `φ'' − φ³ = −μφ` with `μ > π²`, and
//! `φ = 2√2 kK sn(2Kx, k)` with `μ = 4(k² + 1)K²`.

use num_complex::Complex64;

use crate::discretization::{SineGrid, StateField};
use crate::elliptic::{complete_e, complete_k, jacobi, EllipticModulus, K_MODULUS_GUARD};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::Regime;

const BISECTION_ITERS: usize = 200;
const MASS_PANELS: usize = 64;
const MASS_NODES: usize = 10;

/// Right side of the modulus equation, `μ(k)`.
pub fn mu_of_modulus(regime: Regime, k: f64) -> Result<f64> {
    let kk = complete_k(k)?;
    Ok(match regime {
        Regime::Focusing => 4.0 * (2.0 * k * k - 1.0) * kk * kk,
        Regime::Defocusing => 4.0 * (k * k + 1.0) * kk * kk,
    })
}

/// Largest chemical potential reachable below the modulus guard.
pub fn mu_max(regime: Regime) -> f64 {
    mu_of_modulus(regime, K_MODULUS_GUARD).expect("guard modulus is admissible")
}

/// Solves the modulus equation for `k` by bisection on `[0, 1 − 1e−12]`.
pub fn modulus_from_mu(regime: Regime, mu: f64) -> Result<EllipticModulus> {
    let lo_mu = regime.mu_min();
    if mu.is_nan() || mu <= lo_mu {
        return Err(Error::Domain(format!(
            "{regime} ground states need mu > {lo_mu}, got {mu}"
        )));
    }
    let hi_mu = mu_max(regime);
    if mu > hi_mu {
        return Err(Error::Domain(format!(
            "mu = {mu} needs an elliptic modulus beyond the guard (max mu {hi_mu})"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, K_MODULUS_GUARD);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mu_of_modulus(regime, mid)? < mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    EllipticModulus::new(0.5 * (lo + hi))
}

/// Closed-form ground-state profile, callable at any `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundProfile {
    regime: Regime,
    mu: f64,
    modulus: EllipticModulus,
    quarter: f64,
    amplitude: f64,
}

impl GroundProfile {
    pub fn new(regime: Regime, mu: f64) -> Result<Self> {
        let modulus = modulus_from_mu(regime, mu)?;
        let k = modulus.k();
        let quarter = complete_k(k)?;
        Ok(Self {
            regime,
            mu,
            modulus,
            quarter,
            amplitude: 2.0 * std::f64::consts::SQRT_2 * k * quarter,
        })
    }

    /// The vanishing profile at the bottom of the admissible range.
    pub fn trivial(regime: Regime) -> Self {
        Self {
            regime,
            mu: regime.mu_min(),
            modulus: EllipticModulus::new(0.0).unwrap(),
            quarter: std::f64::consts::FRAC_PI_2,
            amplitude: 0.0,
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn modulus(&self) -> EllipticModulus {
        self.modulus
    }

    /// Complete integral `K(k)` of the profile's modulus.
    pub fn quarter_period(&self) -> f64 {
        self.quarter
    }

    /// Maximum of the profile, `2√2 kK`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn argument(&self, x: f64) -> f64 {
        match self.regime {
            Regime::Focusing => 2.0 * self.quarter * (x - 0.5),
            Regime::Defocusing => 2.0 * self.quarter * x,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let j = jacobi(self.argument(x), self.modulus);
        match self.regime {
            Regime::Focusing => self.amplitude * j.cn,
            Regime::Defocusing => self.amplitude * j.sn,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let j = jacobi(self.argument(x), self.modulus);
        let scale = 2.0 * self.quarter * self.amplitude;
        match self.regime {
            Regime::Focusing => -scale * j.sn * j.dn,
            Regime::Defocusing => scale * j.cn * j.dn,
        }
    }

    /// `φ'(0)` from the closed form: `2KA k'` (focusing) or `2KA` (defocusing).
    pub fn slope_left(&self) -> f64 {
        let base = 2.0 * self.quarter * self.amplitude;
        match self.regime {
            Regime::Focusing => base * self.modulus.complement(),
            Regime::Defocusing => base,
        }
    }

    /// `φ'(1) = −φ'(0)`.
    pub fn slope_right(&self) -> f64 {
        -self.slope_left()
    }

    /// `∫ φ²` from the elliptic identities: `8K(E − k'²K)` or `8K(K − E)`.
    pub fn elliptic_mass(&self) -> f64 {
        let k = self.modulus.k();
        let kk = self.quarter;
        let ee = complete_e(k).expect("modulus already validated");
        match self.regime {
            Regime::Focusing => 8.0 * kk * (ee - (1.0 - k * k) * kk),
            Regime::Defocusing => 8.0 * kk * (kk - ee),
        }
    }

    /// `∫ φ²` by composite Gauss–Legendre quadrature of the closed form.
    pub fn quadrature_mass(&self) -> f64 {
        GaussLegendre::new(MASS_NODES).integrate(|x| self.value(x).powi(2), 0.0, 1.0, MASS_PANELS)
    }
}

/// Sampled ground state together with its μ-derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub regime: Regime,
    pub mu: f64,
    pub k: EllipticModulus,
    /// Uniform nodes `x_i = i/(n−1)` including both ends.
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi0: f64,
    pub dphi1: f64,
    pub dmu_phi: Vec<f64>,
    profile: GroundProfile,
    dmu: Option<(GroundProfile, GroundProfile, f64)>,
}

/// Minimal sample count accepted by [`build_ground_state`].
pub const MIN_POINTS: usize = 64;

/// Samples the closed-form ground state at `n_points` uniform nodes.
///
/// `∂_μφ` is the central difference of the closed form with step
/// `1e−5·max(1, |μ|)`, shrunk when `μ` sits closer than that to the range infimum.
pub fn build_ground_state(regime: Regime, mu: f64, n_points: usize) -> Result<GroundState> {
    if n_points < MIN_POINTS {
        return Err(Error::Domain(format!(
            "ground state needs at least {MIN_POINTS} samples, got {n_points}"
        )));
    }
    let profile = GroundProfile::new(regime, mu)?;
    let mut h = 1e-5 * mu.abs().max(1.0);
    let gap = mu - regime.mu_min();
    if h >= gap {
        h = 0.5 * gap;
    }
    let lo = GroundProfile::new(regime, mu - h)?;
    let hi = GroundProfile::new(regime, mu + h)?;
    Ok(assemble(profile, Some((lo, hi, h)), n_points))
}

/// The `φ = 0` state at `μ = ∓π²`, where the nonlinear branch bifurcates.
///
/// `∂_μφ` is singular there and is stored as zero.
pub fn trivial_ground_state(regime: Regime, n_points: usize) -> GroundState {
    assemble(GroundProfile::trivial(regime), None, n_points.max(MIN_POINTS))
}

fn assemble(
    profile: GroundProfile,
    dmu: Option<(GroundProfile, GroundProfile, f64)>,
    n_points: usize,
) -> GroundState {
    let last = (n_points - 1) as f64;
    let x: Vec<f64> = (0..n_points).map(|i| i as f64 / last).collect();
    let mut phi: Vec<f64> = x.iter().map(|&xi| profile.value(xi)).collect();
    phi[0] = 0.0;
    phi[n_points - 1] = 0.0;
    let mut gs = GroundState {
        regime: profile.regime,
        mu: profile.mu,
        k: profile.modulus,
        dphi0: profile.slope_left(),
        dphi1: profile.slope_right(),
        dmu_phi: Vec::new(),
        x,
        phi,
        profile,
        dmu,
    };
    let mut d: Vec<f64> = gs.x.iter().map(|&xi| gs.dmu_value(xi)).collect();
    d[0] = 0.0;
    d[n_points - 1] = 0.0;
    gs.dmu_phi = d;
    gs
}

impl GroundState {
    pub fn profile(&self) -> &GroundProfile {
        &self.profile
    }

    /// True for the `φ = 0` endpoint state.
    pub fn is_trivial(&self) -> bool {
        self.profile.amplitude == 0.0
    }

    pub fn value(&self, x: f64) -> f64 {
        self.profile.value(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.profile.derivative(x)
    }

    /// `∂_μφ(x)` from the closed form.
    pub fn dmu_value(&self, x: f64) -> f64 {
        match &self.dmu {
            Some((lo, hi, h)) => (hi.value(x) - lo.value(x)) / (2.0 * h),
            None => 0.0,
        }
    }

    /// φ sampled on a sine grid.
    pub fn field(&self, grid: &SineGrid) -> StateField {
        StateField::from_fn(grid.clone(), |x| Complex64::new(self.value(x), 0.0))
    }

    /// ∂_μφ sampled on a sine grid.
    pub fn dmu_field(&self, grid: &SineGrid) -> StateField {
        StateField::from_fn(grid.clone(), |x| Complex64::new(self.dmu_value(x), 0.0))
    }
}

/// `(∫φ², 2⟨∂_μφ, φ⟩)`; the second entry is `d/dμ ∫φ²`.
pub fn mass_and_convexity(gs: &GroundState) -> (f64, f64) {
    let gl = GaussLegendre::new(MASS_NODES);
    let mass = gs.profile.quadrature_mass();
    let slope = 2.0 * gl.integrate(|x| gs.dmu_value(x) * gs.value(x), 0.0, 1.0, MASS_PANELS);
    (mass, slope)
}

/// `κ = ħ² ∫φ² / (2m)`.
pub fn kappa_from_mu(gs: &GroundState, hbar: f64, m: f64) -> Result<f64> {
    check_constants(hbar, m)?;
    Ok(hbar * hbar * gs.profile.quadrature_mass() / (2.0 * m))
}

/// Inverts [`kappa_from_mu`] by bisection over μ.
pub fn mu_from_kappa(regime: Regime, kappa: f64, hbar: f64, m: f64) -> Result<f64> {
    check_constants(hbar, m)?;
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let target_mass = 2.0 * m * kappa / (hbar * hbar);
    let mut lo = regime.mu_min();
    let mut hi = mu_max(regime);
    if GroundProfile::new(regime, hi)?.quadrature_mass() < target_mass {
        return Err(Error::Domain(format!(
            "kappa = {kappa} exceeds the largest mass reachable below the modulus guard"
        )));
    }
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if GroundProfile::new(regime, mid)?.quadrature_mass() < target_mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_constants(hbar: f64, m: f64) -> Result<()> {
    if !(hbar > 0.0 && m > 0.0) {
        return Err(Error::Domain(format!(
            "physical constants must be positive (hbar = {hbar}, m = {m})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// `max |φ'' ± φ³ ∓ μφ|` over the sample nodes, with `φ''` from an
    /// eighth-order central stencil of step `h` applied to the closed form.
    fn residual(gs: &GroundState, h: f64) -> f64 {
        const W: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
        let s = gs.regime.sign();
        let f = |x: f64| gs.value(x);
        let mut worst: f64 = 0.0;
        for &x in &gs.x {
            let mut d2 = W[0] * f(x);
            for (j, w) in W.iter().enumerate().skip(1) {
                let off = j as f64 * h;
                d2 += w * (f(x + off) + f(x - off));
            }
            d2 /= h * h;
            let p = f(x);
            worst = worst.max((d2 + s * p.powi(3) - s * gs.mu * p).abs());
        }
        worst
    }

    #[test]
    fn modulus_equation_endpoints() {
        assert!(modulus_from_mu(Regime::Focusing, -PI * PI).is_err());
        assert!(modulus_from_mu(Regime::Defocusing, 0.5 * PI * PI).is_err());
        let k = modulus_from_mu(Regime::Focusing, -PI * PI + 1e-10).unwrap().k();
        assert!(k < 1e-4, "{k}");
        let k = modulus_from_mu(Regime::Defocusing, PI * PI + 1e-10).unwrap().k();
        assert!(k < 1e-4, "{k}");
    }

    #[test]
    fn modulus_reproduces_mu_and_matches_fine_bisection() {
        let k = modulus_from_mu(Regime::Focusing, 100.0).unwrap().k();
        let back = mu_of_modulus(Regime::Focusing, k).unwrap();
        assert!((back - 100.0).abs() / 100.0 < 1e-10);

        // Scan then bisect to locate the root independently.
        let g = |k: f64| mu_of_modulus(Regime::Focusing, k).unwrap() - 100.0;
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 1..10_000 {
            let kk = i as f64 / 10_000.0;
            if g(kk) > 0.0 {
                a = kk - 1e-4;
                b = kk;
                break;
            }
        }
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if g(m) > 0.0 {
                b = m
            } else {
                a = m
            }
        }
        assert!((k - 0.5 * (a + b)).abs() < 1e-12);
    }

    #[test]
    fn focusing_profile_is_symmetric_and_vanishes_at_ends() {
        let gs = build_ground_state(Regime::Focusing, 10.0, 257).unwrap();
        let n = gs.phi.len();
        for i in 0..n {
            assert!((gs.phi[i] - gs.phi[n - 1 - i]).abs() < 1e-12);
        }
        assert_eq!(gs.phi[0], 0.0);
        assert_eq!(gs.phi[n - 1], 0.0);
        assert!(gs.phi[1..n - 1].iter().all(|&p| p > 0.0));
        assert!(gs.value(0.0).abs() < 1e-13 && gs.value(1.0).abs() < 1e-13);
        let gs = build_ground_state(Regime::Defocusing, 30.0, 129).unwrap();
        assert!(gs.value(0.0).abs() < 1e-13 && gs.value(1.0).abs() < 1e-12);
        assert!(gs.phi[1..128].iter().all(|&p| p > 0.0));
    }

    #[test]
    fn boundary_value_residual() {
        for (regime, mu) in [
            (Regime::Focusing, -5.0),
            (Regime::Focusing, 50.0),
            (Regime::Defocusing, 12.0),
            (Regime::Defocusing, 60.0),
        ] {
            let gs = build_ground_state(regime, mu, 1025).unwrap();
            let r = residual(&gs, 1.0 / 256.0);
            assert!(r < 1e-8, "{regime} mu={mu}: {r}");
        }
    }

    #[test]
    fn fourth_order_residual_converges_at_fourth_order() {
        let gs = build_ground_state(Regime::Focusing, 10.0, 65).unwrap();
        let r4 = |h: f64| {
            let f = |x: f64| gs.value(x);
            gs.x.iter()
                .map(|&x| {
                    let d2 = (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h)
                        - f(x - 2.0 * h))
                        / (12.0 * h * h);
                    (d2 + f(x).powi(3) - gs.mu * f(x)).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = r4(1.0 / 32.0) / r4(1.0 / 64.0);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn endpoint_slopes_match_finite_differences() {
        for (regime, mu) in [(Regime::Focusing, 3.0), (Regime::Defocusing, 25.0)] {
            let gs = build_ground_state(regime, mu, 64).unwrap();
            let h = 1e-5;
            let fd0 = (gs.value(h) - gs.value(-h)) / (2.0 * h);
            let fd1 = (gs.value(1.0 + h) - gs.value(1.0 - h)) / (2.0 * h);
            assert!((fd0 - gs.dphi0).abs() < 1e-6 * gs.dphi0.abs());
            assert!((fd1 - gs.dphi1).abs() < 1e-6 * gs.dphi1.abs());
            assert!(gs.dphi1 != 0.0);
        }
    }

    #[test]
    fn masses_agree_with_elliptic_identities() {
        for mu in [-5.0, 0.0, 10.0, 50.0] {
            let p = GroundProfile::new(Regime::Focusing, mu).unwrap();
            let rel = (p.quadrature_mass() - p.elliptic_mass()).abs() / p.quadrature_mass();
            assert!(rel < 1e-8, "mu={mu}: {rel}");
        }
        for mu in [12.0, 20.0, 60.0] {
            let p = GroundProfile::new(Regime::Defocusing, mu).unwrap();
            let rel = (p.quadrature_mass() - p.elliptic_mass()).abs() / p.quadrature_mass();
            assert!(rel < 1e-8, "mu={mu}: {rel}");
        }
    }

    #[test]
    fn convexity_slope_positive() {
        for mu in [-5.0, 0.0, 10.0, 50.0] {
            let gs = build_ground_state(Regime::Focusing, mu, 128).unwrap();
            let (mass, slope) = mass_and_convexity(&gs);
            assert!(mass > 0.0 && slope > 0.0, "mu={mu}");
            // slope is d(mass)/dμ
            let h = 1e-4;
            let up = GroundProfile::new(Regime::Focusing, mu + h).unwrap().quadrature_mass();
            let dn = GroundProfile::new(Regime::Focusing, mu - h).unwrap().quadrature_mass();
            assert!(((up - dn) / (2.0 * h) - slope).abs() < 1e-6 * slope);
        }
    }

    #[test]
    fn amplitude_vanishes_at_bifurcation() {
        for regime in [Regime::Focusing, Regime::Defocusing] {
            let mut prev = f64::INFINITY;
            for j in 1..=4 {
                let mu = regime.mu_min() + 10f64.powi(-j);
                let gs = build_ground_state(regime, mu, 65).unwrap();
                let sup = gs.phi.iter().cloned().fold(0.0, f64::max);
                assert!(sup < prev);
                prev = sup;
            }
            assert!(prev < 0.05);
        }
    }

    #[test]
    fn kappa_relation_and_inversion() {
        let gs = build_ground_state(Regime::Focusing, 10.0, 64).unwrap();
        let (mass, _) = mass_and_convexity(&gs);
        let kappa = kappa_from_mu(&gs, 1.0, 1.0).unwrap();
        assert!((kappa - 0.5 * mass).abs() < 1e-15);
        assert!(kappa_from_mu(&gs, 0.0, 1.0).is_err());
        let mu = mu_from_kappa(Regime::Focusing, kappa, 1.0, 1.0).unwrap();
        let back = kappa_from_mu(&build_ground_state(Regime::Focusing, mu, 64).unwrap(), 1.0, 1.0)
            .unwrap();
        assert!((back - kappa).abs() < 1e-9);
        assert!((mu - 10.0).abs() < 1e-7);
    }

    #[test]
    fn kappa_increases_with_mu() {
        let mut prev = 0.0;
        for i in 0..30 {
            let mu = -9.0 + 3.0 * i as f64;
            let gs = build_ground_state(Regime::Focusing, mu, 64).unwrap();
            let kappa = kappa_from_mu(&gs, 1.0, 1.0).unwrap();
            assert!(kappa > prev);
            prev = kappa;
        }
    }
}
