//! Declarative run configuration read from a TOML document.

use std::path::{Path, PathBuf};

use gpbox::groundstate::mu_from_kappa;
use gpbox::{Complex64, Error, Regime, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub regime: Option<String>,
    pub mu: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub m: f64,
    #[serde(rename = "T", default = "one")]
    pub t_final: f64,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub physical: PhysicalConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Sine modes of the state grid.
    #[serde(rename = "M")]
    pub modes: usize,
    pub n_t: usize,
    pub spectral_modes: usize,
    pub dt: f64,
    /// Sample points of the ground-state export.
    pub ground_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { modes: 256, n_t: 1001, spectral_modes: 96, dt: 5e-4, ground_points: 1025 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub newton: f64,
    pub max_iter: usize,
    pub delta_desk: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { newton: 1e-5, max_iter: 8, delta_desk: None }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Write the endpoint (`φ = 0`) spectrum instead of the one at `mu`.
    #[serde(default)]
    pub endpoint: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub mu_start: Option<f64>,
    pub mu_end: Option<f64>,
    pub points: usize,
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { mu_start: None, mu_end: None, points: 41, n_min: 1, n_max: 6 }
    }
}

/// Plants a sign change of `G_n` at `mu` (testing the failure paths).
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignFlipConfig {
    pub n: usize,
    pub mu: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub n_max: usize,
    pub modes: Option<usize>,
    pub sign_flip: Option<SignFlipConfig>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { n_max: 12, modes: None, sign_flip: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub n_ctrl: Option<usize>,
    pub solver: String,
    pub linear_propagator: String,
    pub propagator: String,
    /// Control file for `simulate` and `physical`.
    pub file: Option<PathBuf>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            n_ctrl: None,
            solver: "windowed".into(),
            linear_propagator: "modal".into(),
            propagator: "etdrk4".into(),
            file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub family: String,
    pub amplitude: f64,
    pub modes: usize,
    /// `[[re, im], …]` for modes 1, 2, ….
    pub coefficients: Option<Vec<[f64; 2]>>,
    pub mu_offset: f64,
    pub file: Option<PathBuf>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self { family: "modal".into(), amplitude: 1e-3, modes: 6, coefficients: None, mu_offset: 1e-4, file: None }
    }
}

impl TargetConfig {
    pub fn coefficient_list(&self) -> Option<Vec<Complex64>> {
        self.coefficients.as_ref().map(|c| c.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub propagator: String,
    pub snapshots: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { propagator: "split-step".into(), snapshots: 11 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConfig {
    pub n_tau: usize,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self { n_tau: 2001 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_some() == self.kappa.is_some() {
            return Err(Error::Contract("exactly one of `mu` and `kappa` must be given".into()));
        }
        let g = &self.grid;
        if g.modes == 0 || g.n_t == 0 || g.spectral_modes == 0 || g.ground_points == 0 || self.physical.n_tau == 0 {
            return Err(Error::Contract("all grid sizes must be positive".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::Contract(format!("T must be positive, got {}", self.t_final)));
        }
        if !(g.dt > 0.0) {
            return Err(Error::Contract(format!("dt must be positive, got {}", g.dt)));
        }
        if !(self.hbar > 0.0) || !(self.m > 0.0) {
            return Err(Error::Contract("hbar and m must be positive".into()));
        }
        self.regime()?;
        Ok(())
    }

    pub fn regime(&self) -> Result<Regime> {
        self.regime.as_deref().unwrap_or("focusing").parse()
    }

    /// `μ`, inverting `κ` when that is what was given.
    pub fn mu(&self) -> Result<f64> {
        match (self.mu, self.kappa) {
            (Some(mu), None) => Ok(mu),
            (None, Some(kappa)) => mu_from_kappa(self.regime()?, kappa, self.hbar, self.m),
            _ => Err(Error::Contract("exactly one of `mu` and `kappa` must be given".into())),
        }
    }
}
