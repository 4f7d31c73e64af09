use std::path::{Path, PathBuf};

use gpbox::control::{
    linear_propagators, newton_steer, synthesize_from_z, ControlContext, ControlSignal, NewtonOptions,
    SteeringStatus, TargetState,
};
use gpbox::discretization::{SineGrid, StateField};
use gpbox::evolve::{nonlinear_propagators, write_trajectory, PropagateOptions};
use gpbox::groundstate::{build_ground_state, kappa_from_mu, mass_and_convexity};
use gpbox::io::{ensure_dir, fmt, manifest_text, read_table, write_table, write_text};
use gpbox::moments::moment_solvers;
use gpbox::physmap::{control_to_length, physical_wavefunction, write_physical};
use gpbox::shooting::{certify_hooked, scan_hooked, GenericityCertificate, SignFlip, DEFAULT_MODES};
use gpbox::spectral::analyze;
use gpbox::targets::{target_families, TargetSpec};
use gpbox::Error;
use thiserror::Error;

use crate::config::RunConfig;
use crate::Command;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("steering {status}: residual {residual:.3e} after {iterations} iterations")]
    Steering { status: SteeringStatus, residual: f64, iterations: usize },
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Certification(_) => 3,
            Failure::Steering { .. } => 4,
            Failure::Core(e) => match e {
                Error::Domain(_)
                | Error::Contract(_)
                | Error::Parse(_)
                | Error::IllPosed(_)
                | Error::UnknownStrategy { .. } => 2,
                Error::Refused(_) => 3,
                Error::NoConvergence(_) | Error::Io(_) => 1,
            },
        }
    }
}

type Outcome = Result<(), Failure>;

pub fn run(cmd: Command, cfg: &RunConfig) -> Outcome {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    ensure_dir(&out)?;
    match cmd {
        Command::Ground => ground(cfg, &out),
        Command::Spectrum => spectrum(cfg, &out),
        Command::Scan => scan(cfg, &out),
        Command::Certify => certify(cfg, &out),
        Command::Synth => synth(cfg, &out),
        Command::Simulate => simulate(cfg, &out),
        Command::Steer => steer(cfg, &out),
        Command::Physical => physical(cfg, &out),
    }
}

fn hook(cfg: &RunConfig) -> Option<SignFlip> {
    cfg.certify.sign_flip.map(|h| SignFlip { n: h.n, mu: h.mu })
}

fn ground(cfg: &RunConfig, out: &Path) -> Outcome {
    let regime = cfg.regime()?;
    let mu = cfg.mu()?;
    let gs = build_ground_state(regime, mu, cfg.grid.ground_points.max(gpbox::groundstate::MIN_POINTS))?;
    let (mass, slope) = mass_and_convexity(&gs);
    let kappa = kappa_from_mu(&gs, cfg.hbar, cfg.m)?;
    let rows: Vec<Vec<f64>> = gs
        .x
        .iter()
        .zip(&gs.phi)
        .zip(&gs.dmu_phi)
        .map(|((&x, &p), &d)| vec![x, p, gs.derivative(x), d])
        .collect();
    write_table(&out.join("ground.dat"), &["x", "phi", "dphi", "dmu_phi"], &rows)?;
    let text = manifest_text(&[
        ("regime", regime.to_string()),
        ("mu", fmt(mu)),
        ("k", fmt(gs.k.k())),
        ("mass", fmt(mass)),
        ("slope", fmt(slope)),
        ("kappa", fmt(kappa)),
        ("hbar", fmt(cfg.hbar)),
        ("m", fmt(cfg.m)),
        ("dphi0", fmt(gs.dphi0)),
        ("dphi1", fmt(gs.dphi1)),
    ]);
    write_text(&out.join("ground.txt"), &text)?;
    Ok(())
}

fn spectrum(cfg: &RunConfig, out: &Path) -> Outcome {
    let regime = cfg.regime()?;
    let mu = if cfg.spectrum.endpoint { regime.mu_min() } else { cfg.mu()? };
    let (_, sd) = analyze(regime, mu, cfg.grid.spectral_modes)?;
    write_text(&out.join("spectrum.txt"), &sd.report())?;
    Ok(())
}

fn scan(cfg: &RunConfig, out: &Path) -> Outcome {
    let regime = cfg.regime()?;
    let s = &cfg.scan;
    let start = s.mu_start.unwrap_or(regime.mu_min() + 0.5);
    let end = s.mu_end.unwrap_or(regime.mu_min() + 20.0);
    if s.points < 2 || !(end > start) || s.n_min == 0 || s.n_max < s.n_min {
        return Err(Failure::Input("scan needs points ≥ 2, mu_end > mu_start and 1 ≤ n_min ≤ n_max".into()));
    }
    let grid: Vec<f64> =
        (0..s.points).map(|i| start + (end - start) * i as f64 / (s.points - 1) as f64).collect();
    let brackets = scan_hooked(regime, &grid, s.n_min..=s.n_max, hook(cfg))?;
    let rows: Vec<Vec<f64>> = brackets.iter().map(|b| vec![b.n as f64, b.lo, b.hi]).collect();
    write_table(&out.join("brackets.dat"), &["n", "mu_lo", "mu_hi"], &rows)?;
    Ok(())
}

fn certificate(cfg: &RunConfig, mu: f64, n_max: usize, out: &Path) -> Result<GenericityCertificate, Failure> {
    let regime = cfg.regime()?;
    let modes = cfg.certify.modes.unwrap_or(DEFAULT_MODES.max(4 * n_max));
    let cert = certify_hooked(regime, mu, n_max, modes, hook(cfg))?;
    write_text(&out.join("certificate.txt"), &cert.document())?;
    if !cert.is_certified() {
        return Err(Failure::Certification(format!("status {} at mu = {mu}", cert.status)));
    }
    Ok(cert)
}

fn certify(cfg: &RunConfig, out: &Path) -> Outcome {
    certificate(cfg, cfg.mu()?, cfg.certify.n_max, out).map(|_| ())
}

fn context(cfg: &RunConfig, out: &Path) -> Result<ControlContext, Failure> {
    let mut ctx = ControlContext::new(cfg.regime()?, cfg.mu()?, cfg.grid.spectral_modes, cfg.control.n_ctrl)?;
    let cert = certificate(cfg, ctx.mu, ctx.n_ctrl.max(cfg.certify.n_max), out)?;
    ctx.attach_certificate(cert)?;
    Ok(ctx)
}

fn target(cfg: &RunConfig, ctx: &ControlContext, grid: &SineGrid) -> Result<StateField, Failure> {
    let t = &cfg.target;
    let spec = TargetSpec {
        amplitude: t.amplitude,
        modes: t.modes,
        seed: cfg.seed,
        coefficients: t.coefficient_list(),
        mu_offset: t.mu_offset,
        file: t.file.clone(),
    };
    Ok(target_families().get(&t.family)?.build(ctx, grid, cfg.t_final, &spec)?)
}

fn write_control(path: &Path, u: &ControlSignal) -> Outcome {
    let rows: Vec<Vec<f64>> = u.times().into_iter().zip(u.samples()).map(|(t, v)| vec![t, v]).collect();
    write_table(path, &["t", "u"], &rows)?;
    Ok(())
}

fn read_control(path: &Path) -> Result<ControlSignal, Failure> {
    let rows = read_table(path)?;
    if rows.iter().any(|r| r.len() != 2) || rows.len() < 10 {
        return Err(Failure::Input(format!("{}: expected at least 10 rows `t u`", path.display())));
    }
    let t_final = rows[rows.len() - 1][0];
    let h = t_final / (rows.len() - 1) as f64;
    if rows.iter().enumerate().any(|(j, r)| (r[0] - j as f64 * h).abs() > 1e-9 * t_final.max(1.0)) {
        return Err(Failure::Input(format!("{}: times must be uniform from 0", path.display())));
    }
    Ok(ControlSignal::from_samples(t_final, rows.into_iter().map(|r| r[1]).collect())?)
}

fn write_state(path: &Path, f: &StateField) -> Outcome {
    let rows: Vec<Vec<f64>> =
        f.grid().points().iter().zip(f.points()).map(|(&x, z)| vec![x, z.re, z.im]).collect();
    write_table(path, &["x", "re", "im"], &rows)?;
    Ok(())
}

fn synth(cfg: &RunConfig, out: &Path) -> Outcome {
    let ctx = context(cfg, out)?;
    let grid = SineGrid::new(cfg.grid.modes)?;
    let t = cfg.t_final;
    let pert = target(cfg, &ctx, &grid)?;
    let (mut z1, z2) = ctx.z_from_field(&pert, t);
    ctx.project_admissible(&mut z1);
    let solver = moment_solvers().get(&cfg.control.solver)?;
    let s = synthesize_from_z(&ctx, &z1, &z2, t, cfg.grid.n_t, solver.as_ref())?;
    write_control(&out.join("control.dat"), &s.control)?;

    let lin = linear_propagators().get(&cfg.control.linear_propagator)?;
    let (r1, r2) = lin.propagate(&ctx, &s.control)?;
    let (w1, w2) = ctx.controlled_part(&z1, &z2);
    let (g1, g2) = ctx.controlled_part(&r1, &r2);
    let norm = |a: &[f64], b: &[f64]| a.iter().chain(b).map(|x| x * x).sum::<f64>().sqrt();
    let diff1: Vec<f64> = g1.iter().zip(&w1).map(|(a, b)| a - b).collect();
    let diff2: Vec<f64> = g2.iter().zip(&w2).map(|(a, b)| a - b).collect();
    let target_norm = norm(&w1, &w2);
    let rel = if target_norm > 0.0 { norm(&diff1, &diff2) / target_norm } else { norm(&diff1, &diff2) };
    let (u0, ut, mean) = s.control.constraint_residuals();
    let text = manifest_text(&[
        ("regime", ctx.regime.to_string()),
        ("mu", fmt(ctx.mu)),
        ("T", fmt(t)),
        ("n_ctrl", ctx.n_ctrl.to_string()),
        ("solver", s.moments.solver.clone()),
        ("tikhonov", fmt(s.moments.epsilon)),
        ("condition", fmt(s.moments.condition)),
        ("solution_map_norm", fmt(s.moments.lambda_norm)),
        ("d0", fmt(s.coefficients.d0)),
        ("linear_propagator", lin.name().to_string()),
        ("linear_relative_error", fmt(rel)),
        ("u_start", fmt(u0)),
        ("u_end", fmt(ut)),
        ("u_mean", fmt(mean)),
        ("u_l2", fmt(s.control.l2_norm())),
    ]);
    write_text(&out.join("synth.txt"), &text)?;
    Ok(())
}

fn snapshot_times(t_final: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count).map(|k| t_final * k as f64 / (count - 1) as f64).collect()
}

fn simulate(cfg: &RunConfig, out: &Path) -> Outcome {
    let regime = cfg.regime()?;
    let mu = cfg.mu()?;
    let u = match &cfg.control.file {
        Some(path) => read_control(path)?,
        None => ControlSignal::zero(cfg.t_final, cfg.grid.n_t),
    };
    let gs = build_ground_state(regime, mu, 257)?;
    let grid = SineGrid::new(cfg.grid.modes)?;
    let opts = PropagateOptions {
        dt: cfg.grid.dt,
        snapshots: snapshot_times(u.t_final(), cfg.simulate.snapshots),
        ..Default::default()
    };
    let prop = nonlinear_propagators().get(&cfg.simulate.propagator)?;
    let res = prop.propagate(&gs.field(&grid), &u, regime, &opts)?;
    write_trajectory(&out.join("trajectory"), &res, regime, mu)?;
    let rows: Vec<Vec<f64>> = (0..res.norm_times.len())
        .map(|k| vec![res.norm_times[k], res.xi_norms[k], res.psi_norms[k]])
        .collect();
    write_table(&out.join("norms.dat"), &["t", "xi_norm", "psi_norm"], &rows)?;
    Ok(())
}

fn steer(cfg: &RunConfig, out: &Path) -> Outcome {
    let ctx = context(cfg, out)?;
    let grid = SineGrid::new(cfg.grid.modes)?;
    let t = cfg.t_final;
    let pert = target(cfg, &ctx, &grid)?;
    let target = TargetState::on_sphere(&ctx, &pert, t);
    write_state(&out.join("target.dat"), &target.psi_f)?;
    let mut opts = NewtonOptions::new(
        moment_solvers().get(&cfg.control.solver)?,
        nonlinear_propagators().get(&cfg.control.propagator)?,
    );
    opts.tol = cfg.tolerances.newton;
    opts.max_iter = cfg.tolerances.max_iter;
    opts.delta_desk = cfg.tolerances.delta_desk;
    opts.n_t = cfg.grid.n_t;
    opts.propagate.dt = cfg.grid.dt;
    let rep = newton_steer(&ctx, &target, &opts)?;
    write_text(&out.join("steer_log.txt"), &rep.log_text())?;
    write_control(&out.join("control.dat"), &rep.control)?;
    write_state(&out.join("final_state.dat"), &rep.final_state)?;
    let last = rep.log.last().expect("log starts with iteration 0");
    if rep.status != SteeringStatus::Converged {
        return Err(Failure::Steering { status: rep.status, residual: last.residual, iterations: last.iter });
    }
    Ok(())
}

fn physical(cfg: &RunConfig, out: &Path) -> Outcome {
    let path = cfg
        .control
        .file
        .as_ref()
        .ok_or_else(|| Failure::Input("physical needs `control.file`".into()))?;
    let u = read_control(path)?;
    let regime = cfg.regime()?;
    let mu = cfg.mu()?;
    let gs = build_ground_state(regime, mu, 257)?;
    let kappa = match cfg.kappa {
        Some(k) => k,
        None => kappa_from_mu(&gs, cfg.hbar, cfg.m)?,
    };
    let lt = control_to_length(&u, cfg.hbar, cfg.m, cfg.physical.n_tau)?;
    let grid = SineGrid::new(cfg.grid.modes)?;
    let opts = PropagateOptions {
        dt: cfg.grid.dt,
        snapshots: snapshot_times(u.t_final(), cfg.simulate.snapshots),
        ..Default::default()
    };
    let res = nonlinear_propagators().get(&cfg.simulate.propagator)?.propagate(&gs.field(&grid), &u, regime, &opts)?;
    let snaps = physical_wavefunction(&res, &u, &lt, &gs, kappa)?;
    write_physical(&out.join("physical"), &lt, &snaps, kappa)?;
    Ok(())
}
