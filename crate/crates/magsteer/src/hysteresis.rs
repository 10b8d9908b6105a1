//! Periodic-forcing experiments: input-output loop extraction, loop-area
//! quantification, and the low-frequency persistence test.
//!
//! A sinusoidal drive on one component plays the input; the output is the
//! same component observed at a fixed point of the domain. Sweeping the
//! forcing frequency downward and watching whether the enclosed loop area
//! survives distinguishes genuine hysteresis from mere phase lag, which
//! collapses as the forcing becomes quasistatic.

use crate::discretization::{
    check_finite, rhs_into, Discretization, FieldScratch, MagnetizationField, Mesh,
};
use crate::error::{Error, Result};
use crate::integrator::{dt_stability_limit, rk4_step_in_place, StageBuffers};
use crate::model::{Component, ControlSpec, Drive, PhysicalParams, Vec3};
use crate::spectral::{assemble_linear_operator, LinearState};

/// Minimum samples recorded over the final forcing period.
pub const MIN_SAMPLES_PER_PERIOD: usize = 64;

/// Target samples per period when the step budget allows.
const TARGET_SAMPLES_PER_PERIOD: usize = 256;

/// Area ratio `area(omega_min) / area(omega_max)` at or above which the
/// looping is declared persistent.
pub const PERSISTENCE_THRESHOLD: f64 = 0.1;

/// Protocol for one periodic-forcing run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisConfig {
    omega: f64,
    amplitude: f64,
    component: Component,
    observation_point: f64,
    n_periods: usize,
    controlled: bool,
}

impl HysteresisConfig {
    /// Validate a forcing protocol.
    ///
    /// `amplitude = 0` is admitted and produces a degenerate loop of zero
    /// area; `n_periods` must leave at least two transient periods before
    /// the one the loop is built from.
    pub fn new(
        omega: f64,
        amplitude: f64,
        component: Component,
        observation_point: f64,
        n_periods: usize,
        controlled: bool,
    ) -> Result<HysteresisConfig> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "forcing frequency must be finite and > 0, got {omega}"
            )));
        }
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "forcing amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        if !observation_point.is_finite() || observation_point < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "observation point must be finite and >= 0, got {observation_point}"
            )));
        }
        if n_periods < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least 3 forcing periods to discard the transient, got {n_periods}"
            )));
        }
        Ok(HysteresisConfig {
            omega,
            amplitude,
            component,
            observation_point,
            n_periods,
            controlled,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn component(&self) -> Component {
        self.component
    }

    pub fn observation_point(&self) -> f64 {
        self.observation_point
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn controlled(&self) -> bool {
        self.controlled
    }

    /// Same protocol at a different forcing frequency.
    pub fn at_omega(&self, omega: f64) -> Result<HysteresisConfig> {
        HysteresisConfig::new(
            omega,
            self.amplitude,
            self.component,
            self.observation_point,
            self.n_periods,
            self.controlled,
        )
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

/// Input-output curve over the final forcing period.
#[derive(Debug, Clone)]
pub struct HysteresisLoop {
    omega: f64,
    samples: Vec<(f64, f64)>,
    area: f64,
}

impl HysteresisLoop {
    /// Build a loop from recorded `(input, output)` samples.
    pub fn from_samples(omega: f64, samples: Vec<(f64, f64)>) -> Result<HysteresisLoop> {
        let area = loop_area(&samples)?;
        Ok(HysteresisLoop { omega, samples, area })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Euclidean gap between the first and last samples.
    pub fn closure_gap(&self) -> f64 {
        let (x0, y0) = self.samples[0];
        let (x1, y1) = *self.samples.last().expect("loops have samples");
        ((x0 - x1).powi(2) + (y0 - y1).powi(2)).sqrt()
    }
}

/// Absolute shoelace area of the closed polygon through `samples`.
///
/// The polygon is treated as cyclic, so the caller need not repeat the
/// first point; coordinates are centered first to keep the signed sum
/// well conditioned when the loop is small and far from the origin.
pub fn loop_area(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::DegenerateLoop(samples.len()));
    }
    let n = samples.len() as f64;
    let cx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let cy = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let mut twice_area = 0.0;
    for i in 0..samples.len() {
        let (x0, y0) = samples[i];
        let (x1, y1) = samples[(i + 1) % samples.len()];
        twice_area += (x0 - cx) * (y1 - cy) - (x1 - cx) * (y0 - cy);
    }
    Ok(0.5 * twice_area.abs())
}

struct StepPlan {
    dt: f64,
    steps_per_period: usize,
    total_steps: usize,
    sample_stride: usize,
}

/// Steps covering `n_periods` whole periods, each period divided evenly.
///
/// The automatic step honors the fourth-order scheme's oscillatory
/// stability bound `|lambda| dt <= 2.8` at the top discrete frequency
/// `12 / h^2` of the mass-weighted pencil; the published mesh heuristic
/// alone would admit steps the precession pairs reject.
fn plan_steps(
    config: &HysteresisConfig,
    mesh: &Mesh,
    params: &PhysicalParams,
    dt_override: Option<f64>,
    allow_large_dt: bool,
) -> Result<StepPlan> {
    let period = config.period();
    let dt_request = match dt_override {
        Some(dt) => {
            if !dt.is_finite() || dt <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "dt must be finite and > 0, got {dt}"
                )));
            }
            let limit = dt_stability_limit(mesh, params);
            if dt > limit && !allow_large_dt {
                return Err(Error::DtTooLarge { dt, limit });
            }
            dt
        }
        None => {
            let h = mesh.h();
            0.75 * 2.8 * h * h / (12.0 * (1.0 + params.nu().powi(2)).sqrt())
        }
    };
    let floor = match dt_override {
        Some(_) => MIN_SAMPLES_PER_PERIOD,
        None => TARGET_SAMPLES_PER_PERIOD,
    };
    let steps_per_period = ((period / dt_request).ceil() as usize).max(floor);
    let sample_stride = (steps_per_period / TARGET_SAMPLES_PER_PERIOD).max(1);
    Ok(StepPlan {
        dt: period / steps_per_period as f64,
        steps_per_period,
        total_steps: config.n_periods * steps_per_period,
        sample_stride,
    })
}

/// Linear-spline evaluation of one component at a fixed point, precomputed
/// as node pair plus weights.
struct Probe {
    left: usize,
    right: usize,
    w_left: f64,
    w_right: f64,
    component: Component,
}

impl Probe {
    fn new(mesh: &Mesh, x: f64, component: Component) -> Result<Probe> {
        if x > mesh.length() * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "observation point {x} outside the domain [0, {}]",
                mesh.length()
            )));
        }
        let x = x.clamp(0.0, mesh.length());
        let element = ((x / mesh.h()) as usize).min(mesh.n_elements() - 1);
        let frac = (x - mesh.node(element)) / mesh.h();
        Ok(Probe {
            left: element,
            right: element + 1,
            w_left: 1.0 - frac,
            w_right: frac,
            component,
        })
    }

    fn read(&self, values: &[Vec3]) -> f64 {
        self.w_left * values[self.left].component(self.component)
            + self.w_right * values[self.right].component(self.component)
    }
}

/// Effective closed-loop control for a forcing run: the drive always, the
/// feedback term only when the protocol says so.
fn effective_spec(config: &HysteresisConfig, spec: &ControlSpec) -> Result<ControlSpec> {
    let drive = Drive::new(config.amplitude, config.omega, config.component)?;
    let gain = if config.controlled { spec.gain() } else { 0.0 };
    ControlSpec::new(gain, spec.target(), Some(drive))
}

fn run_loop_core<F>(
    mesh: &Mesh,
    initial: &[Vec3],
    config: &HysteresisConfig,
    plan: &StepPlan,
    drive: &Drive,
    mut rhs: F,
) -> Result<HysteresisLoop>
where
    F: FnMut(f64, &[Vec3], &mut [Vec3]) -> Result<()>,
{
    let probe = Probe::new(mesh, config.observation_point, config.component)?;
    let mut y = initial.to_vec();
    let mut buffers = StageBuffers::new(y.len());
    let final_start = (config.n_periods - 1) * plan.steps_per_period;
    let mut samples =
        Vec::with_capacity(plan.steps_per_period / plan.sample_stride + 2);
    for step in 0..plan.total_steps {
        let t = step as f64 * plan.dt;
        if step >= final_start && (step - final_start) % plan.sample_stride == 0 {
            samples.push((drive.value(t), probe.read(&y)));
        }
        rk4_step_in_place(&mut y, t, plan.dt, &mut rhs, &mut buffers)?;
    }
    let t_end = plan.total_steps as f64 * plan.dt;
    if let Some(node) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowUp { node, t: t_end });
    }
    samples.push((drive.value(t_end), probe.read(&y)));
    HysteresisLoop::from_samples(config.omega, samples)
}

/// Run the forcing protocol on the full dynamics and extract the loop.
///
/// The feedback gain and target are taken from `spec` when the protocol is
/// controlled; the drive is built from the protocol itself. States are not
/// projected to the sphere: the affine drive legitimately moves the
/// magnitude, and that excursion is the observed output. Blow-ups surface
/// as errors.
pub fn run_hysteresis(
    config: &HysteresisConfig,
    m0: &MagnetizationField,
    params: &PhysicalParams,
    spec: &ControlSpec,
) -> Result<HysteresisLoop> {
    run_hysteresis_inner(config, m0, params, spec, None, false)
}

/// [`run_hysteresis`] with an explicit step size, checked against the mesh
/// heuristic unless `allow_large_dt`.
pub fn run_hysteresis_with_dt(
    config: &HysteresisConfig,
    m0: &MagnetizationField,
    params: &PhysicalParams,
    spec: &ControlSpec,
    dt: f64,
    allow_large_dt: bool,
) -> Result<HysteresisLoop> {
    run_hysteresis_inner(config, m0, params, spec, Some(dt), allow_large_dt)
}

fn run_hysteresis_inner(
    config: &HysteresisConfig,
    m0: &MagnetizationField,
    params: &PhysicalParams,
    spec: &ControlSpec,
    dt_override: Option<f64>,
    allow_large_dt: bool,
) -> Result<HysteresisLoop> {
    let plan = plan_steps(config, m0.mesh(), params, dt_override, allow_large_dt)?;
    let effective = effective_spec(config, spec)?;
    let drive = effective.drive().expect("forcing runs always carry a drive");
    let disc = Discretization::new(m0.mesh().clone());
    let mut scratch = FieldScratch::new(m0.mesh().n_nodes());
    let rhs = |t: f64, y: &[Vec3], out: &mut [Vec3]| {
        rhs_into(&disc, params, Some(&effective), t, y, out, &mut scratch)
    };
    run_loop_core(m0.mesh(), m0.values(), config, &plan, &drive, rhs)
}

/// Run the forcing protocol on the linear dynamics about `z0`'s base.
pub fn run_hysteresis_linear(
    config: &HysteresisConfig,
    z0: &LinearState,
    params: &PhysicalParams,
    spec: &ControlSpec,
) -> Result<HysteresisLoop> {
    run_hysteresis_linear_inner(config, z0, params, spec, None, false)
}

/// [`run_hysteresis_linear`] with an explicit step size.
pub fn run_hysteresis_linear_with_dt(
    config: &HysteresisConfig,
    z0: &LinearState,
    params: &PhysicalParams,
    spec: &ControlSpec,
    dt: f64,
    allow_large_dt: bool,
) -> Result<HysteresisLoop> {
    run_hysteresis_linear_inner(config, z0, params, spec, Some(dt), allow_large_dt)
}

fn run_hysteresis_linear_inner(
    config: &HysteresisConfig,
    z0: &LinearState,
    params: &PhysicalParams,
    spec: &ControlSpec,
    dt_override: Option<f64>,
    allow_large_dt: bool,
) -> Result<HysteresisLoop> {
    let mesh = z0.field().mesh();
    let plan = plan_steps(config, mesh, params, dt_override, allow_large_dt)?;
    let effective = effective_spec(config, spec)?;
    let drive = effective.drive().expect("forcing runs always carry a drive");
    let op = assemble_linear_operator(z0.base(), params, mesh);
    let mut scratch = FieldScratch::new(mesh.n_nodes());
    let rhs = |t: f64, y: &[Vec3], out: &mut [Vec3]| {
        op.apply(y, out, &mut scratch);
        for (o, z) in out.iter_mut().zip(y) {
            *o += effective.control_input(*z, t);
        }
        check_finite(out, t)
    };
    run_loop_core(mesh, z0.field().values(), config, &plan, &drive, rhs)
}

/// Run one loop per frequency, in parallel, merging results in the given
/// frequency order.
///
/// `omegas` must be finite, positive, and strictly decreasing; `runner`
/// maps one frequency to its loop and must be safe to call from several
/// threads at once (each call owns its own state).
pub fn run_sweep<F>(omegas: &[f64], runner: F) -> Result<Vec<HysteresisLoop>>
where
    F: Fn(f64) -> Result<HysteresisLoop> + Sync,
{
    if omegas.is_empty() {
        return Err(Error::InvalidParameter(
            "frequency sweep needs at least one frequency".into(),
        ));
    }
    for pair in omegas.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::InvalidParameter(format!(
                "sweep frequencies must be strictly decreasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if !omegas.iter().all(|w| w.is_finite() && *w > 0.0) {
        return Err(Error::InvalidParameter(
            "sweep frequencies must be finite and > 0".into(),
        ));
    }
    let mut results: Vec<Option<Result<HysteresisLoop>>> =
        omegas.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        for (slot, &omega) in results.iter_mut().zip(omegas) {
            let runner = &runner;
            scope.spawn(move || {
                *slot = Some(runner(omega));
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every sweep thread writes its slot"))
        .collect()
}

/// One row of the persistence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceRow {
    pub omega: f64,
    pub area: f64,
}

/// Outcome of the low-frequency persistence test.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceVerdict {
    /// Area per frequency, in the order supplied (decreasing frequency).
    pub rows: Vec<PersistenceRow>,
    /// `area(omega_min) / area(omega_max)`.
    pub ratio: f64,
    pub threshold: f64,
    pub persistent: bool,
}

/// Decide whether looping persists as the forcing frequency approaches
/// zero: the verdict is persistent when the lowest-frequency area is at
/// least `threshold` times the highest-frequency area.
pub fn persistence_test_with_threshold(
    loops: &[HysteresisLoop],
    threshold: f64,
) -> Result<PersistenceVerdict> {
    if loops.len() < 2 {
        return Err(Error::InvalidParameter(
            "persistence test needs loops for at least two frequencies".into(),
        ));
    }
    for pair in loops.windows(2) {
        if !(pair[1].omega < pair[0].omega) {
            return Err(Error::InvalidParameter(format!(
                "persistence test expects strictly decreasing frequencies, got {} then {}",
                pair[0].omega, pair[1].omega
            )));
        }
    }
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "persistence threshold must be finite and > 0, got {threshold}"
        )));
    }
    let first = loops.first().unwrap().area;
    let last = loops.last().unwrap().area;
    Ok(PersistenceVerdict {
        rows: loops
            .iter()
            .map(|l| PersistenceRow { omega: l.omega, area: l.area })
            .collect(),
        ratio: last / first,
        threshold,
        persistent: last >= threshold * first,
    })
}

/// [`persistence_test_with_threshold`] at the default threshold.
pub fn persistence_test(loops: &[HysteresisLoop]) -> Result<PersistenceVerdict> {
    persistence_test_with_threshold(loops, PERSISTENCE_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Equilibrium;
    use std::f64::consts::PI;

    fn params() -> PhysicalParams {
        PhysicalParams::new(0.02, 1.0).unwrap()
    }

    fn mesh(n: usize) -> Mesh {
        Mesh::new(n, 1.0).unwrap()
    }

    fn e1() -> Equilibrium {
        Equilibrium::new(Vec3::new(1.0, 0.0, 0.0)).unwrap()
    }

    fn config(omega: f64, controlled: bool) -> HysteresisConfig {
        HysteresisConfig::new(omega, 1e-3, Component::M1, 0.6, 3, controlled).unwrap()
    }

    fn runner_spec(gain: f64) -> ControlSpec {
        ControlSpec::new(gain, e1(), None).unwrap()
    }

    #[test]
    fn config_rejects_bad_inputs() {
        assert!(HysteresisConfig::new(0.0, 1e-3, Component::M1, 0.6, 3, false).is_err());
        assert!(HysteresisConfig::new(1.0, -1.0, Component::M1, 0.6, 3, false).is_err());
        assert!(HysteresisConfig::new(1.0, 1e-3, Component::M1, -0.1, 3, false).is_err());
        assert!(HysteresisConfig::new(1.0, 1e-3, Component::M1, 0.6, 2, false).is_err());
        assert!(HysteresisConfig::new(1.0, 0.0, Component::M1, 0.6, 3, false).is_ok());
    }

    #[test]
    fn area_of_canonical_polygons() {
        let square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        assert_eq!(loop_area(&square).unwrap(), 1.0);
        let collinear = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        assert_eq!(loop_area(&collinear).unwrap(), 0.0);
        let circle: Vec<(f64, f64)> = (0..360)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / 360.0;
                (phi.cos(), phi.sin())
            })
            .collect();
        let area = loop_area(&circle).unwrap();
        assert!((area - PI).abs() / PI < 1e-3, "{area}");
    }

    #[test]
    fn too_few_samples_is_a_degenerate_loop() {
        let err = loop_area(&[(0.0, 0.0), (1.0, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("degenerate loop"), "{err}");
    }

    #[test]
    fn area_is_invariant_under_reversal_and_rotation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<(f64, f64)> = (0..97)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / 97.0;
                let r = 1.0 + 0.3 * rng.gen_range(-1.0..1.0);
                (r * phi.cos() + 5.0, r * phi.sin() - 2.0)
            })
            .collect();
        let base = loop_area(&samples).unwrap();
        let reversed: Vec<(f64, f64)> = samples.iter().rev().copied().collect();
        assert!((loop_area(&reversed).unwrap() - base).abs() <= 1e-12);
        for shift in [1, 13, 96] {
            let mut rotated = samples.clone();
            rotated.rotate_left(shift);
            assert!((loop_area(&rotated).unwrap() - base).abs() <= 1e-12);
        }
    }

    #[test]
    fn uncontrolled_uniform_loop_matches_the_analytic_ellipse() {
        // From a uniform state the drive excites no spatial structure, so
        // the forced component follows du/dt = A cos(wt) exactly and the
        // loop is an ellipse of area pi A^2 / omega.
        let m0 = MagnetizationField::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let p = params();
        let spec = runner_spec(0.0);
        for omega in [1.0, 0.1] {
            let cfg = config(omega, false);
            let looped = run_hysteresis(&cfg, &m0, &p, &spec).unwrap();
            let expected = PI * 1e-6 / omega;
            let rel = (looped.area() - expected).abs() / expected;
            assert!(rel < 2e-3, "omega {omega}: area {} vs {expected}", looped.area());
            assert!(looped.samples().len() >= MIN_SAMPLES_PER_PERIOD);
            assert!(looped.closure_gap() < 1e-6);
        }
    }

    #[test]
    fn controlled_uniform_loop_matches_the_lag_ellipse() {
        // With feedback k the forced component settles on the steady
        // response of du/dt = k(1 - u) + A cos(wt); only the quadrature
        // part encloses area, giving pi A^2 omega / (k^2 + omega^2).
        let m0 = MagnetizationField::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let p = params();
        let spec = runner_spec(0.5);
        let cfg = HysteresisConfig::new(1.0, 1e-3, Component::M1, 0.6, 4, true).unwrap();
        let looped = run_hysteresis(&cfg, &m0, &p, &spec).unwrap();
        let expected = PI * 1e-6 * 1.0 / (0.25 + 1.0);
        let rel = (looped.area() - expected).abs() / expected;
        assert!(rel < 2e-3, "area {} vs {expected}", looped.area());
    }

    #[test]
    fn zero_amplitude_gives_zero_area() {
        let m0 = MagnetizationField::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let cfg = HysteresisConfig::new(1.0, 0.0, Component::M1, 0.6, 3, false).unwrap();
        let looped = run_hysteresis(&cfg, &m0, &params(), &runner_spec(0.0)).unwrap();
        assert_eq!(looped.area(), 0.0);
    }

    #[test]
    fn linear_uniform_loop_matches_the_nonlinear_one() {
        // A uniform state keeps both systems on the same scalar equation,
        // so the loops agree to rounding.
        let cfg = config(1.0, false);
        let p = params();
        let spec = runner_spec(0.0);
        let m0 = MagnetizationField::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let z0 = LinearState::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0), e1()).unwrap();
        let full = run_hysteresis(&cfg, &m0, &p, &spec).unwrap();
        let lin = run_hysteresis_linear(&cfg, &z0, &p, &spec).unwrap();
        assert!((full.area() - lin.area()).abs() <= 1e-12 * full.area().max(1.0));
        assert!((full.area() - PI * 1e-6).abs() / (PI * 1e-6) < 2e-3);
    }

    #[test]
    fn mesh_refinement_leaves_the_uniform_loop_area_unchanged() {
        let cfg = config(1.0, false);
        let p = params();
        let spec = runner_spec(0.0);
        let coarse =
            MagnetizationField::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let fine =
            MagnetizationField::uniform(mesh(12), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let a5 = run_hysteresis(&cfg, &coarse, &p, &spec).unwrap().area();
        let a12 = run_hysteresis(&cfg, &fine, &p, &spec).unwrap().area();
        // The dynamics agree exactly; the small residual is polygon
        // sampling resolution, which differs with the automatic step.
        let rel = (a5 - a12).abs() / a5;
        assert!(rel < 1e-3, "5 vs 12 elements: {a5} vs {a12}");
    }

    #[test]
    fn explicit_dt_is_gated_by_the_mesh_heuristic() {
        let m0 = MagnetizationField::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let cfg = config(1.0, false);
        let err = run_hysteresis_with_dt(&cfg, &m0, &params(), &runner_spec(0.0), 1.0, false)
            .unwrap_err();
        assert!(matches!(err, Error::DtTooLarge { .. }));
        // The uniform dynamics are a scalar quadrature, so even the large
        // step integrates cleanly once explicitly allowed.
        let looped =
            run_hysteresis_with_dt(&cfg, &m0, &params(), &runner_spec(0.0), 0.09, true)
                .unwrap();
        assert!(looped.samples().len() >= MIN_SAMPLES_PER_PERIOD);
    }

    #[test]
    fn observation_point_outside_the_domain_is_rejected() {
        let m0 = MagnetizationField::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let cfg = HysteresisConfig::new(1.0, 1e-3, Component::M1, 1.5, 3, false).unwrap();
        let err = run_hysteresis(&cfg, &m0, &params(), &runner_spec(0.0)).unwrap_err();
        assert!(err.to_string().contains("observation point"), "{err}");
    }

    #[test]
    fn sweep_runs_in_parallel_and_merges_deterministically() {
        let p = params();
        let spec = runner_spec(0.0);
        let m0 = MagnetizationField::uniform(mesh(5), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let base = config(1.0, false);
        let omegas = [1.0, 0.5, 0.2];
        let swept = run_sweep(&omegas, |omega| {
            run_hysteresis(&base.at_omega(omega).unwrap(), &m0, &p, &spec)
        })
        .unwrap();
        assert_eq!(swept.len(), 3);
        for (looped, &omega) in swept.iter().zip(&omegas) {
            let serial =
                run_hysteresis(&base.at_omega(omega).unwrap(), &m0, &p, &spec).unwrap();
            assert_eq!(looped.omega(), omega);
            assert_eq!(looped.area(), serial.area());
            assert_eq!(looped.samples(), serial.samples());
        }
    }

    #[test]
    fn sweep_rejects_unsorted_frequencies() {
        let err = run_sweep(&[0.1, 1.0], |_| unreachable!()).unwrap_err();
        assert!(err.to_string().contains("strictly decreasing"), "{err}");
        assert!(run_sweep(&[], |_: f64| unreachable!()).is_err());
    }

    fn synthetic_loop(omega: f64, area: f64) -> HysteresisLoop {
        let side = area.sqrt();
        HysteresisLoop::from_samples(
            omega,
            vec![(0.0, 0.0), (side, 0.0), (side, side), (0.0, side)],
        )
        .unwrap()
    }

    #[test]
    fn persistence_verdicts_follow_the_area_ratio() {
        let persistent = [
            synthetic_loop(1.0, 0.002),
            synthetic_loop(0.1, 0.0019),
            synthetic_loop(0.01, 0.0019),
            synthetic_loop(0.001, 0.0018),
        ];
        let verdict = persistence_test(&persistent).unwrap();
        assert!(verdict.persistent);
        assert!((verdict.ratio - 0.9).abs() < 1e-9);
        assert_eq!(verdict.rows.len(), 4);
        assert_eq!(verdict.rows[0].omega, 1.0);

        let fading = [
            synthetic_loop(1.0, 0.002),
            synthetic_loop(0.1, 0.0005),
            synthetic_loop(0.01, 0.0001),
            synthetic_loop(0.001, 0.00001),
        ];
        let verdict = persistence_test(&fading).unwrap();
        assert!(!verdict.persistent);
        assert!(verdict.ratio < 0.1);
    }

    #[test]
    fn persistence_preconditions() {
        let single = [synthetic_loop(1.0, 0.1)];
        assert!(persistence_test(&single).is_err());
        let unsorted = [synthetic_loop(0.1, 0.1), synthetic_loop(1.0, 0.1)];
        assert!(persistence_test(&unsorted).is_err());
    }
}
