//! Numerical toolkit for bilinear control of a one-dimensional condensate in a
//! box of variable length.
//!
//! The pipeline runs bottom-up:
//!
//! * [`elliptic`] and [`groundstate`]: closed-form nonlinear ground states.
//! * [`discretization`]: sine-basis transforms and discrete Sobolev norms.
//! * [`linop`] and [`spectral`]: the linearized operator, its biorthogonal
//!   eigenbasis and the control coefficients of every mode.
//! * [`shooting`]: genericity certificates from an initial-value formulation.
//! * [`moments`] and [`control`]: least-norm moment solutions, the linearized
//!   right inverse and the Newton loop on the nonlinear end-point map.
//! * [`evolve`]: propagation of the nonlinear equation through a gauge
//!   transform, plus an independent Crank–Nicolson discretization.
//! * [`physmap`]: translation to and from physical box-length trajectories.
//!
//! Interchangeable algorithms (propagators, moment solvers, target families)
//! sit behind traits and are looked up by name through [`registry`].

pub mod control;
pub mod discretization;
pub mod elliptic;
pub mod error;
pub mod evolve;
pub mod groundstate;
pub mod io;
pub mod linalg;
pub mod linop;
pub mod moments;
pub mod physmap;
pub mod quadrature;
pub mod registry;
pub mod shooting;
pub mod spectral;
pub mod targets;
pub mod trigpoly;

pub use error::{Error, Result};
pub use num_complex::Complex64;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Sign of the cubic interaction.
///
/// Formulas are written with an upper sign for [`Regime::Focusing`] and a
/// lower sign for [`Regime::Defocusing`]; [`Regime::sign`] returns that sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Focusing,
    Defocusing,
}

impl Regime {
    /// `+1` for focusing, `-1` for defocusing.
    pub fn sign(self) -> f64 {
        match self {
            Regime::Focusing => 1.0,
            Regime::Defocusing => -1.0,
        }
    }

    /// Infimum of the admissible chemical potentials, `∓π²`.
    pub fn mu_min(self) -> f64 {
        -self.sign() * PI * PI
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Focusing => "focusing",
            Regime::Defocusing => "defocusing",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "focusing" | "attractive" => Ok(Regime::Focusing),
            "defocusing" | "defocussing" | "repulsive" => Ok(Regime::Defocusing),
            other => Err(Error::Parse(format!("unknown regime `{other}`"))),
        }
    }
}
