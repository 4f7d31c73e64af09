//! Real functions `Σ tᵖ (a cos ωt + b sin ωt)` with exact products, derivatives
//! and antiderivatives. Moment solutions and synthesized controls live in this
//! class, so their integrals never need a quadrature rule.

use std::collections::BTreeMap;

use num_complex::Complex64;

/// Frequencies closer than this are merged; below it a frequency counts as zero.
const FREQ_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub power: u32,
    /// Nonnegative angular frequency.
    pub omega: f64,
    pub cos: f64,
    pub sin: f64,
}

impl Term {
    fn normalized(mut self) -> Self {
        if self.omega < 0.0 {
            self.omega = -self.omega;
            self.sin = -self.sin;
        }
        if self.omega < FREQ_EPS {
            self.omega = 0.0;
            self.sin = 0.0;
        }
        self
    }

    fn eval(&self, t: f64) -> f64 {
        let (s, c) = (self.omega * t).sin_cos();
        t.powi(self.power as i32) * (self.cos * c + self.sin * s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPoly {
    terms: Vec<Term>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = Term>) -> Self {
        let mut p = Self { terms: terms.into_iter().map(Term::normalized).collect() };
        p.simplify();
        p
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([Term { power: 0, omega: 0.0, cos: c, sin: 0.0 }])
    }

    /// `Σ coeffs[p] tᵖ`.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        Self::from_terms(
            coeffs.iter().enumerate().map(|(p, &c)| Term { power: p as u32, omega: 0.0, cos: c, sin: 0.0 }),
        )
    }

    pub fn cos(omega: f64) -> Self {
        Self::from_terms([Term { power: 0, omega, cos: 1.0, sin: 0.0 }])
    }

    pub fn sin(omega: f64) -> Self {
        Self::from_terms([Term { power: 0, omega, cos: 0.0, sin: 1.0 }])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges terms with equal power and frequency and drops exact zeros.
    /// Terms are kept in a fixed order so sums are reproducible.
    pub fn simplify(&mut self) {
        let mut map: BTreeMap<(u32, u64), (f64, f64)> = BTreeMap::new();
        for t in &self.terms {
            let e = map.entry((t.power, t.omega.to_bits())).or_insert((0.0, 0.0));
            e.0 += t.cos;
            e.1 += t.sin;
        }
        self.terms = map
            .into_iter()
            .filter(|(_, (c, s))| *c != 0.0 || *s != 0.0)
            .map(|((power, w), (cos, sin))| Term { power, omega: f64::from_bits(w), cos, sin })
            .collect();
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        Self::from_terms(self.terms.iter().chain(&other.terms).copied())
    }

    pub fn scale(&self, c: f64) -> TrigPoly {
        Self::from_terms(self.terms.iter().map(|t| Term { cos: c * t.cos, sin: c * t.sin, ..*t }))
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &TrigPoly) -> TrigPoly {
        self.add(&other.scale(c))
    }

    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = Vec::with_capacity(2 * self.terms.len() * other.terms.len());
        for x in &self.terms {
            for y in &other.terms {
                let power = x.power + y.power;
                // (a cos α + b sin α)(c cos β + d sin β) split into α ± β.
                let (a, b, c, d) = (x.cos, x.sin, y.cos, y.sin);
                out.push(Term { power, omega: x.omega + y.omega, cos: 0.5 * (a * c - b * d), sin: 0.5 * (a * d + b * c) });
                out.push(Term { power, omega: x.omega - y.omega, cos: 0.5 * (a * c + b * d), sin: 0.5 * (b * c - a * d) });
            }
        }
        Self::from_terms(out)
    }

    /// `f(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }

    pub fn derivative(&self) -> TrigPoly {
        let mut out = Vec::new();
        for t in &self.terms {
            if t.power > 0 {
                let p = t.power as f64;
                out.push(Term { power: t.power - 1, omega: t.omega, cos: p * t.cos, sin: p * t.sin });
            }
            if t.omega != 0.0 {
                out.push(Term { power: t.power, omega: t.omega, cos: t.omega * t.sin, sin: -t.omega * t.cos });
            }
        }
        Self::from_terms(out)
    }

    /// `F(t) = ∫₀ᵗ f`, exact.
    pub fn antiderivative(&self) -> TrigPoly {
        let mut out = Vec::new();
        for t in &self.terms {
            if t.omega == 0.0 {
                let p = t.power + 1;
                out.push(Term { power: p, omega: 0.0, cos: t.cos / p as f64, sin: 0.0 });
                continue;
            }
            // ∫₀ˣ tᵖ e^{iωt} dt = e^{iωx} Σ_k (−1)^k p!/(p−k)! x^{p−k}/(iω)^{k+1} − (−1)^p p!/(iω)^{p+1};
            // the real function is Re[(a − ib)·that].
            let z = Complex64::new(t.cos, -t.sin);
            let iw = Complex64::new(0.0, t.omega);
            let p = t.power;
            let mut falling = 1.0;
            let mut inv = 1.0 / iw;
            for k in 0..=p {
                let c = z * inv * (falling * if k % 2 == 0 { 1.0 } else { -1.0 });
                // Re[c e^{iωx}] = Re c cos − Im c sin.
                out.push(Term { power: p - k, omega: t.omega, cos: c.re, sin: -c.im });
                falling *= (p - k) as f64;
                inv /= iw;
            }
            let fact: f64 = (1..=p).map(f64::from).product();
            let c0 = -z * fact * if p % 2 == 0 { 1.0 } else { -1.0 } / iw.powu(p + 1);
            out.push(Term { power: 0, omega: 0.0, cos: c0.re, sin: 0.0 });
        }
        Self::from_terms(out)
    }

    /// `∫_a^b f`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.terms.iter().map(|t| term_integral(t, b) - term_integral(t, a)).sum()
    }

    pub fn sample(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }
}

/// `∫₀ˣ tᵖ e^{iωt} dt`, by series for small `|ωx|` and by upward recursion otherwise.
pub fn power_exp_integral(p: u32, omega: f64, x: f64) -> Complex64 {
    let iw = Complex64::new(0.0, omega);
    if (omega * x).abs() < 1.0 + p as f64 {
        let mut total = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(x.powi(p as i32 + 1), 0.0);
        for k in 0..60u32 {
            let contrib = term / (p + k + 1) as f64;
            total += contrib;
            if contrib.norm() <= 1e-18 * total.norm() {
                break;
            }
            term = term * iw * x / (k + 1) as f64;
        }
        total
    } else {
        let e = (iw * x).exp();
        let mut acc = (e - 1.0) / iw;
        for q in 1..=p {
            acc = (e * x.powi(q as i32) - acc * q as f64) / iw;
        }
        acc
    }
}

fn term_integral(t: &Term, x: f64) -> f64 {
    let i = power_exp_integral(t.power, t.omega, x);
    t.cos * i.re + t.sin * i.im
}
