//! Complete elliptic integrals and Jacobi elliptic functions.
//!
//! All routines use the modulus convention `k` (not the parameter `m = k²`).
//! `K` and `E` come from the arithmetic–geometric mean; `sn`, `cn`, `dn` from
//! the descending Landen (AGM) scale.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Largest modulus accepted by [`complete_k`]; above it `K` is treated as divergent.
pub const K_MODULUS_GUARD: f64 = 1.0 - 1e-12;

const AGM_MAX_ITER: usize = 64;

/// Elliptic modulus `k ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EllipticModulus(f64);

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) || k.is_nan() {
            return Err(Error::Domain(format!("elliptic modulus {k} outside [0, 1)")));
        }
        Ok(Self(k))
    }

    pub fn k(self) -> f64 {
        self.0
    }

    /// Complementary modulus `√(1 − k²)`.
    pub fn complement(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }
}

/// Values of the three Jacobi functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobi {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

/// Runs the AGM of `(1, k')` and returns `(a_N, Σ 2^{n-1} c_n²)`.
fn agm_with_c_sum(k: f64) -> (f64, f64) {
    let mut a = 1.0_f64;
    let mut b = ((1.0 - k) * (1.0 + k)).sqrt();
    let mut c = k;
    let mut weight = 0.5;
    let mut sum = weight * c * c;
    for _ in 0..AGM_MAX_ITER {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let a_next = 0.5 * (a + b);
        c = 0.5 * (a - b);
        b = (a * b).sqrt();
        a = a_next;
        weight *= 2.0;
        sum += weight * c * c;
    }
    (a, sum)
}

/// Complete elliptic integral of the first kind, `K(k) = ∫₀^{π/2} dθ / √(1 − k² sin²θ)`.
///
/// Errors for `k` outside `[0, 1)` and above [`K_MODULUS_GUARD`].
pub fn complete_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) || k.is_nan() {
        return Err(Error::Domain(format!("K(k) requires 0 <= k < 1, got {k}")));
    }
    if k > K_MODULUS_GUARD {
        return Err(Error::Domain(format!(
            "K(k) diverges as k -> 1; modulus {k} exceeds guard {K_MODULUS_GUARD}"
        )));
    }
    if k == 0.0 {
        return Ok(FRAC_PI_2);
    }
    let (a, _) = agm_with_c_sum(k);
    Ok(PI / (2.0 * a))
}

/// Complete elliptic integral of the second kind, `E(k) = ∫₀^{π/2} √(1 − k² sin²θ) dθ`.
pub fn complete_e(k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) || k.is_nan() {
        return Err(Error::Domain(format!("E(k) requires 0 <= k <= 1, got {k}")));
    }
    if k == 1.0 {
        return Ok(1.0);
    }
    if k == 0.0 {
        return Ok(FRAC_PI_2);
    }
    if k > K_MODULUS_GUARD {
        // E is continuous at k = 1 with a k'² log k' correction.
        let kp2 = (1.0 - k) * (1.0 + k);
        return Ok(1.0 + 0.5 * kp2 * ((4.0 / kp2.sqrt()).ln() - 0.5));
    }
    let (a, sum) = agm_with_c_sum(k);
    Ok(PI / (2.0 * a) * (1.0 - sum))
}

/// Analytic derivative `dK/dk = (E − (1 − k²)K) / (k (1 − k²))`.
pub fn complete_k_derivative(k: f64) -> Result<f64> {
    if k == 0.0 {
        return Ok(0.0);
    }
    let kk = complete_k(k)?;
    let ee = complete_e(k)?;
    let kp2 = (1.0 - k) * (1.0 + k);
    Ok((ee - kp2 * kk) / (k * kp2))
}

/// Analytic derivative `dE/dk = (E − K) / k`.
pub fn complete_e_derivative(k: f64) -> Result<f64> {
    if k == 0.0 {
        return Ok(0.0);
    }
    Ok((complete_e(k)? - complete_k(k)?) / k)
}

/// Jacobi elliptic functions `(sn, cn, dn)` at real argument `x`.
///
/// The argument is reduced to `[-K/2, K/2]` with the half- and quarter-period
/// shift formulas before the Landen descent, so `cn` keeps full relative
/// accuracy near its zeros.
pub fn jacobi(x: f64, modulus: EllipticModulus) -> Jacobi {
    let k = modulus.k();
    if k == 0.0 {
        let (s, c) = x.sin_cos();
        return Jacobi { sn: s, cn: c, dn: 1.0 };
    }
    let scale = LandenScale::new(k);
    let quarter = scale.quarter_period();
    let kp = modulus.complement();

    // Reduce to [-K, K] using sn(u+2K) = -sn(u), cn(u+2K) = -cn(u).
    let period = 4.0 * quarter;
    let mut u = x - period * (x / period).round();
    let mut flip = 1.0;
    if u > quarter {
        u -= 2.0 * quarter;
        flip = -1.0;
    } else if u < -quarter {
        u += 2.0 * quarter;
        flip = -1.0;
    }

    let j = if u.abs() <= 0.5 * quarter {
        scale.eval(u, k)
    } else {
        // sn(t ± K) = ±cd t, cn(t ± K) = ∓k' sd t, dn(t ± K) = k' nd t.
        let side = u.signum();
        let t = u - side * quarter;
        let inner = scale.eval(t, k);
        Jacobi {
            sn: side * inner.cn / inner.dn,
            cn: -side * kp * inner.sn / inner.dn,
            dn: kp / inner.dn,
        }
    };
    Jacobi { sn: flip * j.sn, cn: flip * j.cn, dn: j.dn }
}

/// Descending Landen scale `a_n, c_n` for one modulus.
struct LandenScale {
    a: [f64; AGM_MAX_ITER + 1],
    c: [f64; AGM_MAX_ITER + 1],
    depth: usize,
}

impl LandenScale {
    fn new(k: f64) -> Self {
        let mut a = [0.0_f64; AGM_MAX_ITER + 1];
        let mut c = [0.0_f64; AGM_MAX_ITER + 1];
        a[0] = 1.0;
        c[0] = k;
        let mut b = ((1.0 - k) * (1.0 + k)).sqrt();
        let mut n = 0;
        while n < AGM_MAX_ITER && c[n].abs() > f64::EPSILON * a[n] {
            let an = a[n];
            a[n + 1] = 0.5 * (an + b);
            c[n + 1] = 0.5 * (an - b);
            b = (an * b).sqrt();
            n += 1;
        }
        Self { a, c, depth: n }
    }

    fn quarter_period(&self) -> f64 {
        PI / (2.0 * self.a[self.depth])
    }

    fn eval(&self, x: f64, k: f64) -> Jacobi {
        let n = self.depth;
        let mut phi = (1u64 << n) as f64 * self.a[n] * x;
        for j in (1..=n).rev() {
            let ratio = (self.c[j] / self.a[j] * phi.sin()).clamp(-1.0, 1.0);
            phi = 0.5 * (phi + ratio.asin());
        }
        let (sn, cn) = phi.sin_cos();
        let dn = (1.0 - k * k * sn * sn).max(0.0).sqrt();
        Jacobi { sn, cn, dn }
    }
}
