//! Configuration-driven experiment runner.
//!
//! A scenario is loaded from a TOML file, validated into a [`Plan`], run,
//! and written out as CSV files plus a manifest that records every
//! resolved parameter — re-running from the manifest reproduces the run
//! byte for byte.

pub mod config;
pub mod output;

pub use config::{
    apply_override, load_config, parse_config_str, resolve, Plan, Resolved, ScenarioConfig,
    ScenarioKind,
};
pub use output::{
    read_manifest, write_manifest, Manifest, RunSection, DIAGNOSTICS_FILE, LOOPS_FILE,
    MANIFEST_FILE, SPECTRUM_FILE, SUMMARY_FILE, TRAJECTORY_FILE, VERIFY_FILE,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fields::InitialCondition;
use crate::hysteresis::{self, HysteresisLoop};
use crate::integrator::{integrate, IntegratorOptions, Trajectory};
use crate::model::{ControlSpec, Drive, Equilibrium, PhysicalParams};
use crate::spectral::{assemble_linear_operator, compare_spectrum, LinearState};
use crate::verification::run_verification;

use output::{
    write_loops_csv, write_spectrum_csv, write_summary_csv, write_verify_csv, DiagnosticsCsv,
    TrajectoryCsv,
};

/// Exit code for configuration and validation failures.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code for numerical failures (blow-up, off-sphere states).
pub const EXIT_NUMERICAL: i32 = 2;

/// Classify an error for the process exit code.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NumericalBlowUp { .. }
        | Error::OffSphere { .. }
        | Error::DegenerateMagnetization => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

/// What a finished (or truncated) run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub kind: ScenarioKind,
    /// Files written, relative to the output directory (manifest excluded).
    pub outputs: Vec<String>,
    /// False when a numerical failure truncated the run.
    pub completed: bool,
    pub blow_up: Option<String>,
    pub wall_time_seconds: f64,
    /// Verify runs: did every check pass.
    pub verify_passed: Option<bool>,
    /// Human-readable table to print (verify runs).
    pub report: Option<String>,
}

impl RunSummary {
    fn new(kind: ScenarioKind) -> RunSummary {
        RunSummary {
            kind,
            outputs: Vec::new(),
            completed: true,
            blow_up: None,
            wall_time_seconds: 0.0,
            verify_passed: None,
            report: None,
        }
    }
}

fn manifest_for(resolved: &Resolved, summary: &RunSummary) -> Manifest {
    Manifest {
        run: RunSection {
            kind: resolved.kind.as_str().to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: summary.wall_time_seconds,
            completed: summary.completed,
            blow_up: summary.blow_up.clone(),
            outputs: summary.outputs.clone(),
        },
        config: resolved.manifest_config.clone(),
    }
}

/// Run a validated scenario, writing its outputs and manifest to `out_dir`.
///
/// A blow-up inside a trajectory run truncates it: partial outputs are
/// kept, the manifest is flagged, and the summary reports `completed =
/// false`. A blow-up inside a hysteresis sweep aborts the sweep; the
/// flagged manifest is still written and the error is returned.
pub fn run_scenario(resolved: &Resolved, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    match execute(resolved, out_dir) {
        Ok(mut summary) => {
            summary.wall_time_seconds = start.elapsed().as_secs_f64();
            write_manifest(&out_dir.join(MANIFEST_FILE), &manifest_for(resolved, &summary))?;
            Ok(summary)
        }
        Err(e) => {
            if exit_code_for(&e) == EXIT_NUMERICAL {
                let mut summary = RunSummary::new(resolved.kind);
                summary.completed = false;
                summary.blow_up = Some(e.to_string());
                summary.wall_time_seconds = start.elapsed().as_secs_f64();
                write_manifest(&out_dir.join(MANIFEST_FILE), &manifest_for(resolved, &summary))?;
            }
            Err(e)
        }
    }
}

fn phase_opts(
    dt: f64,
    t_final: f64,
    renormalize: Option<bool>,
    record_stride: Option<usize>,
    allow_large_dt: bool,
) -> Result<IntegratorOptions> {
    let mut opts = IntegratorOptions::new(dt, t_final)?;
    if let Some(r) = renormalize {
        opts = opts.with_renormalize(r);
    }
    if let Some(s) = record_stride {
        opts = opts.with_record_stride(s)?;
    }
    Ok(opts.with_allow_large_dt(allow_large_dt))
}

fn blow_up_text(traj: &Trajectory) -> Option<String> {
    traj.blow_up()
        .map(|b| format!("numerical blow-up at node {} near t = {}", b.node, b.t))
}

fn write_single_run(kind: ScenarioKind, out_dir: &Path, traj: &Trajectory) -> Result<RunSummary> {
    let mut trajectory = TrajectoryCsv::new();
    trajectory.append(traj, 0.0, false);
    trajectory.write(&out_dir.join(TRAJECTORY_FILE))?;
    let mut diagnostics = DiagnosticsCsv::new();
    diagnostics.append(traj, 0.0, false);
    diagnostics.write(&out_dir.join(DIAGNOSTICS_FILE))?;
    let mut summary = RunSummary::new(kind);
    summary.outputs = vec![TRAJECTORY_FILE.to_string(), DIAGNOSTICS_FILE.to_string()];
    summary.completed = traj.is_complete();
    summary.blow_up = blow_up_text(traj);
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn run_sequence(
    params: &PhysicalParams,
    mesh: &crate::discretization::Mesh,
    initial: &InitialCondition,
    dt: f64,
    settle_time: f64,
    phase_time: f64,
    gain: f64,
    drive: Option<Drive>,
    targets: &[Equilibrium],
    renormalize: Option<bool>,
    record_stride: Option<usize>,
    allow_large_dt: bool,
    out_dir: &Path,
) -> Result<RunSummary> {
    let mut trajectory = TrajectoryCsv::new();
    let mut diagnostics = DiagnosticsCsv::new();
    let mut field = initial.build(mesh.clone())?;
    let mut t_offset = 0.0;
    let mut first_phase = true;
    let mut blow_up = None;

    if settle_time > 0.0 {
        let opts = phase_opts(dt, settle_time, renormalize, record_stride, allow_large_dt)?;
        let traj = integrate(&field, params, None, &opts)?;
        trajectory.append(&traj, t_offset, false);
        diagnostics.append(&traj, t_offset, false);
        first_phase = false;
        blow_up = blow_up_text(&traj);
        if blow_up.is_none() {
            t_offset += traj.times().last().copied().unwrap_or(0.0);
            field = traj.final_state();
        }
    }

    if blow_up.is_none() {
        for target in targets {
            let spec = ControlSpec::new(gain, *target, drive)?;
            let opts = phase_opts(dt, phase_time, renormalize, record_stride, allow_large_dt)?;
            let traj = integrate(&field, params, Some(&spec), &opts)?;
            trajectory.append(&traj, t_offset, !first_phase);
            diagnostics.append(&traj, t_offset, !first_phase);
            first_phase = false;
            blow_up = blow_up_text(&traj);
            if blow_up.is_some() {
                break;
            }
            t_offset += traj.times().last().copied().unwrap_or(0.0);
            field = traj.final_state();
            log::info!(
                "phase toward ({}, {}, {}) done at t = {t_offset}",
                target.vector().x,
                target.vector().y,
                target.vector().z
            );
        }
    }

    trajectory.write(&out_dir.join(TRAJECTORY_FILE))?;
    diagnostics.write(&out_dir.join(DIAGNOSTICS_FILE))?;
    let mut summary = RunSummary::new(ScenarioKind::SteerSequence);
    summary.outputs = vec![TRAJECTORY_FILE.to_string(), DIAGNOSTICS_FILE.to_string()];
    summary.completed = blow_up.is_none();
    summary.blow_up = blow_up;
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn run_hysteresis_plan(
    params: &PhysicalParams,
    mesh: &crate::discretization::Mesh,
    initial: &InitialCondition,
    template: &hysteresis::HysteresisConfig,
    omegas: &[f64],
    spec: &ControlSpec,
    linear: bool,
    dt: Option<f64>,
    allow_large_dt: bool,
    out_dir: &Path,
) -> Result<RunSummary> {
    let field = initial.build(mesh.clone())?;
    let loops: Vec<HysteresisLoop> = if linear {
        let base = match initial {
            InitialCondition::Uniform(v) => Equilibrium::new(*v)?,
            _ => unreachable!("linear sweeps are validated to start uniform"),
        };
        let z0 = LinearState::new(field, base);
        hysteresis::run_sweep(omegas, |omega| {
            let config = template.at_omega(omega)?;
            match dt {
                Some(dt) => hysteresis::run_hysteresis_linear_with_dt(
                    &config, &z0, params, spec, dt, allow_large_dt,
                ),
                None => hysteresis::run_hysteresis_linear(&config, &z0, params, spec),
            }
        })?
    } else {
        hysteresis::run_sweep(omegas, |omega| {
            let config = template.at_omega(omega)?;
            match dt {
                Some(dt) => hysteresis::run_hysteresis_with_dt(
                    &config, &field, params, spec, dt, allow_large_dt,
                ),
                None => hysteresis::run_hysteresis(&config, &field, params, spec),
            }
        })?
    };
    for lp in &loops {
        log::info!("omega = {}: loop area {}", lp.omega(), lp.area());
    }
    write_loops_csv(&out_dir.join(LOOPS_FILE), &loops)?;
    let verdict = if loops.len() >= 2 {
        Some(hysteresis::persistence_test(&loops)?)
    } else {
        None
    };
    if let Some(v) = &verdict {
        log::info!(
            "persistence ratio {} against threshold {}: {}",
            v.ratio,
            v.threshold,
            if v.persistent { "persistent" } else { "not persistent" }
        );
    }
    write_summary_csv(&out_dir.join(SUMMARY_FILE), &loops, verdict.as_ref())?;
    let mut summary = RunSummary::new(ScenarioKind::HysteresisSweep);
    summary.outputs = vec![LOOPS_FILE.to_string(), SUMMARY_FILE.to_string()];
    Ok(summary)
}

fn execute(resolved: &Resolved, out_dir: &Path) -> Result<RunSummary> {
    let params = &resolved.params;
    match &resolved.plan {
        Plan::Simulate { mesh, initial, opts } => {
            let field = initial.build(mesh.clone())?;
            let traj = integrate(&field, params, None, opts)?;
            write_single_run(resolved.kind, out_dir, &traj)
        }
        Plan::Steer { mesh, initial, opts, control } => {
            let field = initial.build(mesh.clone())?;
            let traj = integrate(&field, params, Some(control), opts)?;
            write_single_run(resolved.kind, out_dir, &traj)
        }
        Plan::SteerSequence {
            mesh,
            initial,
            dt,
            settle_time,
            phase_time,
            gain,
            drive,
            targets,
            renormalize,
            record_stride,
            allow_large_dt,
        } => run_sequence(
            params,
            mesh,
            initial,
            *dt,
            *settle_time,
            *phase_time,
            *gain,
            *drive,
            targets,
            *renormalize,
            *record_stride,
            *allow_large_dt,
            out_dir,
        ),
        Plan::Hysteresis {
            mesh,
            initial,
            template,
            omegas,
            spec,
            linear,
            dt,
            allow_large_dt,
        } => run_hysteresis_plan(
            params,
            mesh,
            initial,
            template,
            omegas,
            spec,
            *linear,
            *dt,
            *allow_large_dt,
            out_dir,
        ),
        Plan::Spectrum { mesh, n_max, base } => {
            let op = assemble_linear_operator(*base, params, mesh);
            let cmp = compare_spectrum(&op, *n_max);
            log::info!(
                "spectrum: {} zero-cluster entries, {} analytic entries, {} surplus",
                cmp.zero_cluster.len(),
                cmp.matches.len(),
                cmp.surplus.len()
            );
            write_spectrum_csv(&out_dir.join(SPECTRUM_FILE), &cmp)?;
            let mut summary = RunSummary::new(resolved.kind);
            summary.outputs = vec![SPECTRUM_FILE.to_string()];
            Ok(summary)
        }
        Plan::Verify { opts } => {
            let report = run_verification(params, opts)?;
            write_verify_csv(&out_dir.join(VERIFY_FILE), &report)?;
            let mut summary = RunSummary::new(resolved.kind);
            summary.outputs = vec![VERIFY_FILE.to_string()];
            summary.verify_passed = Some(report.all_passed());
            summary.report = Some(report.to_string());
            Ok(summary)
        }
    }
}

/// Re-run the configuration embedded in a manifest.
///
/// Outputs go to `out_dir` when given, otherwise to the directory named in
/// the embedded config (or `out`).
pub fn replay_manifest(
    manifest_path: &Path,
    out_dir: Option<&Path>,
) -> Result<(Resolved, RunSummary)> {
    let manifest = read_manifest(manifest_path)?;
    let resolved = resolve(&manifest.config, false)?;
    let dir: PathBuf = match out_dir {
        Some(d) => d.to_path_buf(),
        None => manifest
            .config
            .output_directory()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out")),
    };
    let summary = run_scenario(&resolved, &dir)?;
    Ok((resolved, summary))
}
