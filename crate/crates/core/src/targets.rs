//! Target perturbations `Ψ_f` around `φ e^{±iμT}`.
//!
//! A family turns a [`TargetSpec`] into a perturbation field on a grid. The
//! linear synthesis uses it directly; the Newton loop puts `reference + Ψ_f`
//! back on the sphere through [`crate::control::TargetState::on_sphere`].

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::ControlContext;
use crate::discretization::{h_norm, SineGrid, StateField};
use crate::error::{Error, Result};
use crate::groundstate::build_ground_state;
use crate::io::read_table;
use crate::registry::Registry;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    /// `‖Ψ_f‖_{H³} / ‖φ‖_{H³}`; ignored by the file family.
    pub amplitude: f64,
    /// Highest sine mode of a random modal target.
    pub modes: usize,
    pub seed: u64,
    /// Explicit sine coefficients for the modal family, mode 1 first.
    pub coefficients: Option<Vec<Complex64>>,
    /// `μ′ − μ` for the nearby-ground-state family.
    pub mu_offset: f64,
    pub file: Option<PathBuf>,
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self { amplitude: 1e-3, modes: 6, seed: 0, coefficients: None, mu_offset: 1e-4, file: None }
    }
}

pub trait TargetFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, ctx: &ControlContext, grid: &SineGrid, t_final: f64, spec: &TargetSpec) -> Result<StateField>;
}

fn rescale(ctx: &ControlContext, grid: &SineGrid, field: StateField, amplitude: f64) -> StateField {
    let norm = h_norm(&field, 3.0);
    if norm == 0.0 || amplitude == 0.0 {
        return StateField::zeros(grid.clone());
    }
    let phi = ctx.gs.field(grid);
    field.scale(Complex64::new(amplitude * h_norm(&phi, 3.0) / norm, 0.0))
}

/// Sine modes `1..=modes` with seeded uniform coefficients in the unit square,
/// or the given coefficients, scaled to the requested relative `H³` size.
pub struct ModalTarget;

impl TargetFamily for ModalTarget {
    fn name(&self) -> &'static str {
        "modal"
    }

    fn build(&self, ctx: &ControlContext, grid: &SineGrid, _t_final: f64, spec: &TargetSpec) -> Result<StateField> {
        let coeffs = match &spec.coefficients {
            Some(c) => c.clone(),
            None => {
                if spec.modes == 0 {
                    return Err(Error::Contract("modal target needs at least one mode".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                (0..spec.modes)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            }
        };
        if coeffs.len() > grid.modes() {
            return Err(Error::Contract(format!("{} coefficients exceed {} grid modes", coeffs.len(), grid.modes())));
        }
        let mut a = vec![Complex64::new(0.0, 0.0); grid.modes()];
        a[..coeffs.len()].copy_from_slice(&coeffs);
        Ok(rescale(ctx, grid, StateField::from_coefficients(grid.clone(), a), spec.amplitude))
    }
}

/// Free evolution of the ground state at `μ + mu_offset`, minus the reference.
pub struct NearbyGroundState;

impl TargetFamily for NearbyGroundState {
    fn name(&self) -> &'static str {
        "nearby-ground-state"
    }

    fn build(&self, ctx: &ControlContext, grid: &SineGrid, t_final: f64, spec: &TargetSpec) -> Result<StateField> {
        let mu = ctx.mu + spec.mu_offset;
        let gs = build_ground_state(ctx.regime, mu, 257)?;
        let phase = Complex64::from_polar(1.0, ctx.regime.sign() * mu * t_final);
        Ok(gs.field(grid).scale(phase).sub(&ctx.reference(grid, t_final)))
    }
}

/// Rows `n re im` of plain sine coefficients, used as given.
pub struct CoefficientsFile;

impl TargetFamily for CoefficientsFile {
    fn name(&self) -> &'static str {
        "coefficients-file"
    }

    fn build(&self, _ctx: &ControlContext, grid: &SineGrid, _t_final: f64, spec: &TargetSpec) -> Result<StateField> {
        let path = spec.file.as_ref().ok_or_else(|| Error::Contract("coefficients-file target needs a file".into()))?;
        let mut a = vec![Complex64::new(0.0, 0.0); grid.modes()];
        for row in read_table(path)? {
            if row.len() != 3 || row[0] < 1.0 || row[0].fract() != 0.0 {
                return Err(Error::Parse(format!("{}: expected rows `n re im` with n ≥ 1", path.display())));
            }
            let n = row[0] as usize;
            if n > grid.modes() {
                return Err(Error::Contract(format!("mode {n} exceeds {} grid modes", grid.modes())));
            }
            a[n - 1] = Complex64::new(row[1], row[2]);
        }
        Ok(StateField::from_coefficients(grid.clone(), a))
    }
}

pub fn target_families() -> Registry<dyn TargetFamily> {
    let mut r: Registry<dyn TargetFamily> = Registry::new("target family");
    r.register("modal", Arc::new(ModalTarget));
    r.register("nearby-ground-state", Arc::new(NearbyGroundState));
    r.register("coefficients-file", Arc::new(CoefficientsFile));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Regime;
    use std::f64::consts::PI;

    fn ctx() -> ControlContext {
        ControlContext::new(Regime::Focusing, -PI * PI + 0.5, 64, Some(4)).unwrap()
    }

    #[test]
    fn modal_target_has_requested_size_and_support() {
        let ctx = ctx();
        let grid = SineGrid::new(64).unwrap();
        let spec = TargetSpec { seed: 7, ..Default::default() };
        let f = ModalTarget.build(&ctx, &grid, 1.0, &spec).unwrap();
        let rel = h_norm(&f, 3.0) / h_norm(&ctx.gs.field(&grid), 3.0);
        assert!((rel - 1e-3).abs() < 1e-15);
        assert!(f.coefficients()[6..].iter().all(|c| c.norm() < 1e-15));
        assert_eq!(f, ModalTarget.build(&ctx, &grid, 1.0, &spec).unwrap());
        let zero = ModalTarget.build(&ctx, &grid, 1.0, &TargetSpec { amplitude: 0.0, ..spec }).unwrap();
        assert_eq!(zero.l2_norm(), 0.0);
    }

    #[test]
    fn coefficient_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.dat");
        std::fs::write(&path, "# n re im\n2 0.5 -0.25\n").unwrap();
        let grid = SineGrid::new(16).unwrap();
        let spec = TargetSpec { file: Some(path), ..Default::default() };
        let f = target_families().get("coefficients-file").unwrap().build(&ctx(), &grid, 1.0, &spec).unwrap();
        let c = f.coefficients();
        assert!((c[1] - Complex64::new(0.5, -0.25)).norm() < 1e-14);
        assert!(c[0].norm() < 1e-14);
    }

    #[test]
    fn unknown_family_lists_choices() {
        let err = target_families().get("bogus").err().unwrap();
        assert!(err.to_string().contains("nearby-ground-state"));
    }
}
