//! Fixed-step explicit time integration of the semidiscrete system.
//!
//! The classic four-stage Runge-Kutta scheme advances the nodal values;
//! optional per-step projection to the unit sphere keeps uncontrolled runs
//! on the constraint manifold. Controlled trajectories are deliberately
//! left unprojected by default: the feedback term moves the state off the
//! sphere during transients, and projecting would alter those dynamics.

use crate::diagnostics::{decay_rate_fit, DiagnosticSample};
use crate::discretization::{rhs_into, Discretization, FieldScratch, MagnetizationField, Mesh};
use crate::error::{Error, Result};
use crate::model::{ControlSpec, PhysicalParams, Vec3};

/// Upper bound on recorded samples when no explicit stride is given.
pub const MAX_RECORDED_SAMPLES: usize = 10_000;

/// Time-stepping options.
///
/// `renormalize` left unset resolves to the policy default: projection on
/// for uncontrolled runs, off under control. An explicit setting that goes
/// against the policy is honored with a logged warning.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    dt: f64,
    t_final: f64,
    renormalize: Option<bool>,
    record_stride: Option<usize>,
    allow_large_dt: bool,
}

impl IntegratorOptions {
    pub fn new(dt: f64, t_final: f64) -> Result<IntegratorOptions> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dt must be finite and > 0, got {dt}"
            )));
        }
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "t_final must be finite and > 0, got {t_final}"
            )));
        }
        if dt > t_final {
            return Err(Error::InvalidParameter(format!(
                "dt = {dt} exceeds t_final = {t_final}"
            )));
        }
        Ok(IntegratorOptions {
            dt,
            t_final,
            renormalize: None,
            record_stride: None,
            allow_large_dt: false,
        })
    }

    pub fn with_renormalize(mut self, renormalize: bool) -> IntegratorOptions {
        self.renormalize = Some(renormalize);
        self
    }

    pub fn with_record_stride(mut self, stride: usize) -> Result<IntegratorOptions> {
        if stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        self.record_stride = Some(stride);
        Ok(self)
    }

    pub fn with_allow_large_dt(mut self, allow: bool) -> IntegratorOptions {
        self.allow_large_dt = allow;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn renormalize(&self) -> Option<bool> {
        self.renormalize
    }

    pub fn record_stride(&self) -> Option<usize> {
        self.record_stride
    }

    pub fn allow_large_dt(&self) -> bool {
        self.allow_large_dt
    }
}

/// Largest dt the stability heuristic admits for a mesh: `0.25 h^2 / max(nu, 0.01)`.
///
/// This is a guardrail against grossly unstable settings, not a sufficient
/// condition; the oscillatory part of the spectrum can demand a smaller step
/// than the heuristic admits.
pub fn dt_stability_limit(mesh: &Mesh, params: &PhysicalParams) -> f64 {
    0.25 * mesh.h() * mesh.h() / params.nu().max(0.01)
}

/// Point at which an integration stopped making sense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    pub t: f64,
    pub node: usize,
}

/// Recorded samples of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    mesh: Mesh,
    times: Vec<f64>,
    states: Vec<Vec<Vec3>>,
    diagnostics: Vec<DiagnosticSample>,
    blow_up: Option<BlowUp>,
}

impl Trajectory {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn states(&self) -> &[Vec<Vec3>] {
        &self.states
    }

    pub fn state_values(&self, sample: usize) -> &[Vec3] {
        &self.states[sample]
    }

    pub fn diagnostics(&self) -> &[DiagnosticSample] {
        &self.diagnostics
    }

    pub fn blow_up(&self) -> Option<&BlowUp> {
        self.blow_up.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.blow_up.is_none()
    }

    pub fn final_state(&self) -> MagnetizationField {
        MagnetizationField::from_values(
            self.mesh.clone(),
            self.states.last().expect("trajectory has samples").clone(),
        )
        .expect("recorded states are valid fields")
    }

    pub fn h1_squared_series(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.h1_dist * d.h1_dist).collect()
    }

    pub fn lyapunov_series(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.lyapunov).collect()
    }

    /// Decay rate of the squared H1 distance over the trailing window.
    pub fn decay_rate(&self, window_fraction: f64) -> Result<f64> {
        decay_rate_fit(&self.times, &self.h1_squared_series(), window_fraction)
    }
}

/// Stage buffers for in-place Runge-Kutta stepping.
pub(crate) struct StageBuffers {
    k1: Vec<Vec3>,
    k2: Vec<Vec3>,
    k3: Vec<Vec3>,
    k4: Vec<Vec3>,
    tmp: Vec<Vec3>,
}

impl StageBuffers {
    pub(crate) fn new(n: usize) -> StageBuffers {
        StageBuffers {
            k1: vec![Vec3::ZERO; n],
            k2: vec![Vec3::ZERO; n],
            k3: vec![Vec3::ZERO; n],
            k4: vec![Vec3::ZERO; n],
            tmp: vec![Vec3::ZERO; n],
        }
    }
}

/// One four-stage Runge-Kutta step, updating `y` in place.
pub(crate) fn rk4_step_in_place<F>(
    y: &mut [Vec3],
    t: f64,
    dt: f64,
    rhs: &mut F,
    b: &mut StageBuffers,
) -> Result<()>
where
    F: FnMut(f64, &[Vec3], &mut [Vec3]) -> Result<()>,
{
    let n = y.len();
    let half = 0.5 * dt;
    rhs(t, y, &mut b.k1)?;
    for i in 0..n {
        b.tmp[i] = y[i] + half * b.k1[i];
    }
    rhs(t + half, &b.tmp, &mut b.k2)?;
    for i in 0..n {
        b.tmp[i] = y[i] + half * b.k2[i];
    }
    rhs(t + half, &b.tmp, &mut b.k3)?;
    for i in 0..n {
        b.tmp[i] = y[i] + dt * b.k3[i];
    }
    rhs(t + dt, &b.tmp, &mut b.k4)?;
    let sixth = dt / 6.0;
    for i in 0..n {
        y[i] += sixth * (b.k1[i] + 2.0 * b.k2[i] + 2.0 * b.k3[i] + b.k4[i]);
    }
    Ok(())
}

/// One explicit Runge-Kutta step of an arbitrary nodal right-hand side.
///
/// `rhs_fn(t, values, out)` fills `out` with the time derivative. The
/// returned state is not projected; renormalization is the integration
/// loop's policy decision, not the stepper's.
pub fn step_rk4<F>(
    state: &MagnetizationField,
    t: f64,
    dt: f64,
    mut rhs_fn: F,
) -> Result<MagnetizationField>
where
    F: FnMut(f64, &[Vec3], &mut [Vec3]) -> Result<()>,
{
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "dt must be finite and > 0, got {dt}"
        )));
    }
    let mut y = state.values().to_vec();
    let mut buffers = StageBuffers::new(y.len());
    rk4_step_in_place(&mut y, t, dt, &mut rhs_fn, &mut buffers)?;
    if let Some(node) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowUp { node, t: t + dt });
    }
    MagnetizationField::from_values(state.mesh().clone(), y)
}

pub(crate) struct DriverConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub stride: usize,
    pub renormalize: bool,
    pub target: Option<Vec3>,
}

/// Number of whole steps and the exactly matching step size covering
/// `t_final` with steps no larger than `dt`.
pub(crate) fn step_count(dt: f64, t_final: f64) -> (usize, f64) {
    let raw = t_final / dt;
    // Tolerate rounding when t_final is an exact multiple of dt.
    let n = if (raw - raw.round()).abs() < 1e-9 {
        raw.round() as usize
    } else {
        raw.ceil() as usize
    };
    let n = n.max(1);
    (n, t_final / n as f64)
}

pub(crate) fn auto_stride(n_steps: usize) -> usize {
    n_steps.div_ceil(MAX_RECORDED_SAMPLES - 2).max(1)
}

/// Shared fixed-step driver. On numerical blow-up the trajectory recorded so
/// far is returned with the blow-up flag set rather than as a hard error.
pub(crate) fn run_fixed_step<F>(
    mesh: &Mesh,
    initial: Vec<Vec3>,
    cfg: &DriverConfig,
    mut rhs: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[Vec3], &mut [Vec3]) -> Result<()>,
{
    let n_nodes = mesh.n_nodes();
    assert_eq!(initial.len(), n_nodes);
    let mut y = initial;
    let mut buffers = StageBuffers::new(n_nodes);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut diagnostics = Vec::new();
    let mut blow_up = None;

    let record = |t: f64, y: &[Vec3], times: &mut Vec<f64>, states: &mut Vec<Vec<Vec3>>,
                  diagnostics: &mut Vec<DiagnosticSample>| {
        times.push(t);
        states.push(y.to_vec());
        diagnostics.push(DiagnosticSample::compute(mesh, y, cfg.target, t));
    };
    record(0.0, &y, &mut times, &mut states, &mut diagnostics);

    'steps: for step in 1..=cfg.n_steps {
        let t = (step - 1) as f64 * cfg.dt;
        match rk4_step_in_place(&mut y, t, cfg.dt, &mut rhs, &mut buffers) {
            Ok(()) => {}
            Err(Error::NumericalBlowUp { node, t }) => {
                blow_up = Some(BlowUp { t, node });
                break 'steps;
            }
            Err(e) => return Err(e),
        }
        let t_now = step as f64 * cfg.dt;
        for (node, v) in y.iter_mut().enumerate() {
            if !v.is_finite() {
                blow_up = Some(BlowUp { t: t_now, node });
                break 'steps;
            }
            if cfg.renormalize {
                // The squared norm overflows around ‖v‖ ≈ 1e154, far before
                // any component does, so this catches runaway states the
                // componentwise check above cannot; a zero norm has no
                // direction to project onto.
                let norm = v.norm();
                if !norm.is_finite() || norm == 0.0 {
                    blow_up = Some(BlowUp { t: t_now, node });
                    break 'steps;
                }
                *v = *v * (1.0 / norm);
            }
        }
        if step % cfg.stride == 0 || step == cfg.n_steps {
            record(t_now, &y, &mut times, &mut states, &mut diagnostics);
        }
    }

    Ok(Trajectory {
        mesh: mesh.clone(),
        times,
        states,
        diagnostics,
        blow_up,
    })
}

pub(crate) fn check_dt_against_mesh(
    mesh: &Mesh,
    params: &PhysicalParams,
    opts: &IntegratorOptions,
) -> Result<()> {
    let limit = dt_stability_limit(mesh, params);
    if opts.dt > limit && !opts.allow_large_dt {
        return Err(Error::DtTooLarge { dt: opts.dt, limit });
    }
    Ok(())
}

pub(crate) fn resolve_renormalize(opts: &IntegratorOptions, controlled: bool) -> bool {
    let default = !controlled;
    match opts.renormalize {
        None => default,
        Some(choice) => {
            if choice && controlled {
                log::warn!(
                    "renormalization under active control alters the controlled dynamics"
                );
            } else if !choice && !controlled {
                log::warn!("running without renormalization; nodal norms will drift");
            }
            choice
        }
    }
}

/// Integrate the full dynamics from `initial` to `opts.t_final`.
///
/// The step size must satisfy the stability heuristic for the mesh (see
/// [`dt_stability_limit`]) unless `allow_large_dt` is set. Blow-ups return
/// the truncated trajectory with the flag set; hard input errors return Err.
pub fn integrate(
    initial: &MagnetizationField,
    params: &PhysicalParams,
    spec: Option<&ControlSpec>,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    check_dt_against_mesh(initial.mesh(), params, opts)?;
    let disc = Discretization::new(initial.mesh().clone());
    let (n_steps, dt) = step_count(opts.dt, opts.t_final);
    let cfg = DriverConfig {
        dt,
        n_steps,
        stride: opts.record_stride.unwrap_or_else(|| auto_stride(n_steps)),
        renormalize: resolve_renormalize(opts, spec.is_some()),
        target: spec.map(|s| s.target().vector()),
    };
    let mut scratch = FieldScratch::new(initial.mesh().n_nodes());
    let rhs = |t: f64, y: &[Vec3], out: &mut [Vec3]| {
        rhs_into(&disc, params, spec, t, y, out, &mut scratch)
    };
    run_fixed_step(initial.mesh(), initial.values().to_vec(), &cfg, rhs)
}
