//! Configuration files for the scenario runner.
//!
//! Configs are TOML with one section per concern. Loading is strict:
//! unknown keys are errors, every numeric field is pushed through the
//! owning module's constructor at load time, and validation messages name
//! the offending field. `--override key=value` edits the parsed tree
//! before deserialization, so overridden runs are checked just as hard.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discretization::Mesh;
use crate::error::{Error, Result};
use crate::fields::InitialCondition;
use crate::hysteresis::HysteresisConfig;
use crate::integrator::IntegratorOptions;
use crate::model::{Component, ControlSpec, Drive, Equilibrium, PhysicalParams, Vec3};
use crate::verification::VerifyOptions;

/// What a scenario does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Uncontrolled evolution from an initial state.
    Simulate,
    /// Feedback-controlled evolution toward one target.
    Steer,
    /// Uncontrolled settling followed by a chain of steering phases.
    SteerSequence,
    /// Input-output loops over a decreasing frequency sweep.
    HysteresisSweep,
    /// Analytic-vs-discrete eigenvalue comparison.
    Spectrum,
    /// Lemma property sweeps and consistency checks.
    Verify,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Simulate => "simulate",
            ScenarioKind::Steer => "steer",
            ScenarioKind::SteerSequence => "steer_sequence",
            ScenarioKind::HysteresisSweep => "hysteresis_sweep",
            ScenarioKind::Spectrum => "spectrum",
            ScenarioKind::Verify => "verify",
        }
    }

    /// CLI subcommand that runs this kind. `steer` covers both single-target
    /// steering and target sequences.
    pub fn subcommand(self) -> &'static str {
        match self {
            ScenarioKind::Simulate => "simulate",
            ScenarioKind::Steer | ScenarioKind::SteerSequence => "steer",
            ScenarioKind::HysteresisSweep => "hysteresis",
            ScenarioKind::Spectrum => "spectrum",
            ScenarioKind::Verify => "verify",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `[physics]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub nu: f64,
    pub length: f64,
}

/// `[mesh]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub n_elements: usize,
}

/// `[integrator]` section. Which keys are required depends on the kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub renormalize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_large_dt: Option<bool>,
}

/// `[initial]` section; `preset` uses the compact string form
/// (`uniform:x,y,z`, `sine_cosine`, `cosine_mode:n,c`, `phase_wrap`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub preset: String,
}

/// `[control.drive]` subsection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub amplitude: f64,
    pub omega: f64,
    pub component: u8,
}

/// `[control]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub gain: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
}

/// `[sequence]` section for `steer_sequence`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    pub settle_time: f64,
    pub phase_time: f64,
    pub targets: Vec<[f64; 3]>,
}

/// `[hysteresis]` section for `hysteresis_sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HysteresisSection {
    /// Strictly decreasing forcing frequencies.
    pub omegas: Vec<f64>,
    pub amplitude: f64,
    pub component: u8,
    pub observation_point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_periods: Option<usize>,
    pub controlled: bool,
    /// Run the linearized dynamics about the uniform initial state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<bool>,
}

/// `[spectrum]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<[f64; 3]>,
}

/// `[verify]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fields: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `[output]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
}

/// One scenario configuration file, as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub physics: PhysicsSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hysteresis: Option<HysteresisSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

impl ScenarioConfig {
    /// Output directory named in the file, if any.
    pub fn output_directory(&self) -> Option<&str> {
        self.output.as_ref()?.directory.as_deref()
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    // Try the text as a TOML literal (number, bool, array, quoted string);
    // anything that does not parse is taken as a bare string so presets
    // like `initial.preset=uniform:0,1,0` need no quoting.
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("the document defines v"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply one `key=value` override to a parsed configuration tree. Dotted
/// keys descend into sections, creating them as needed.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{spec}` has an empty key segment")));
    }
    let value = parse_override_value(raw.trim());
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("key has at least one segment");
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override `{key}`: `{part}` is not a section"))
        })?;
    }
    cursor.insert(leaf.to_string(), value);
    Ok(())
}

/// Parse configuration text, applying overrides before schema validation.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    if overrides.is_empty() {
        return toml::from_str(text).map_err(|e| Error::Config(e.to_string()));
    }
    let mut table = text
        .parse::<toml::Table>()
        .map_err(|e| Error::Config(e.to_string()))?;
    for spec in overrides {
        apply_override(&mut table, spec)?;
    }
    let merged = toml::to_string(&table)
        .map_err(|e| Error::Config(format!("re-serializing overridden config: {e}")))?;
    toml::from_str(&merged).map_err(|e| Error::Config(e.to_string()))
}

/// Load and parse a configuration file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, overrides).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Fully validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub kind: ScenarioKind,
    pub params: PhysicalParams,
    pub plan: Plan,
    /// Non-fatal findings (e.g. a feedback gain below the proof's threshold).
    pub warnings: Vec<String>,
    /// Config to embed in the run manifest, with CLI flags folded in so a
    /// replay reproduces the run exactly.
    pub manifest_config: ScenarioConfig,
}

/// Validated per-kind run plan.
#[derive(Debug, Clone)]
pub enum Plan {
    Simulate {
        mesh: Mesh,
        initial: InitialCondition,
        opts: IntegratorOptions,
    },
    Steer {
        mesh: Mesh,
        initial: InitialCondition,
        opts: IntegratorOptions,
        control: ControlSpec,
    },
    SteerSequence {
        mesh: Mesh,
        initial: InitialCondition,
        dt: f64,
        settle_time: f64,
        phase_time: f64,
        gain: f64,
        drive: Option<Drive>,
        targets: Vec<Equilibrium>,
        renormalize: Option<bool>,
        record_stride: Option<usize>,
        allow_large_dt: bool,
    },
    Hysteresis {
        mesh: Mesh,
        initial: InitialCondition,
        template: HysteresisConfig,
        omegas: Vec<f64>,
        spec: ControlSpec,
        linear: bool,
        dt: Option<f64>,
        allow_large_dt: bool,
    },
    Spectrum {
        mesh: Mesh,
        n_max: usize,
        base: Equilibrium,
    },
    Verify {
        opts: VerifyOptions,
    },
}

fn cfg_err(field: &str, e: Error) -> Error {
    Error::Config(format!("{field}: {e}"))
}

fn require<'a, T>(section: &'a Option<T>, name: &str, kind: ScenarioKind) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| Error::Config(format!("[{name}] is required for kind={kind}")))
}

fn forbid<T>(section: &Option<T>, name: &str, kind: ScenarioKind) -> Result<()> {
    if section.is_some() {
        return Err(Error::Config(format!("[{name}] does not apply to kind={kind}")));
    }
    Ok(())
}

fn drive_from(section: &DriveSection, field: &str) -> Result<Drive> {
    let component = Component::from_one_based(section.component)
        .map_err(|e| cfg_err(&format!("{field}.component"), e))?;
    Drive::new(section.amplitude, section.omega, component).map_err(|e| cfg_err(field, e))
}

fn target_from(raw: [f64; 3], field: &str) -> Result<Equilibrium> {
    Equilibrium::new(Vec3::new(raw[0], raw[1], raw[2])).map_err(|e| cfg_err(field, e))
}

fn control_spec_from(section: &ControlSection) -> Result<ControlSpec> {
    let raw = section
        .target
        .ok_or_else(|| Error::Config("control.target is required".into()))?;
    let target = target_from(raw, "control.target")?;
    let drive = section
        .drive
        .as_ref()
        .map(|d| drive_from(d, "control.drive"))
        .transpose()?;
    ControlSpec::new(section.gain, target, drive).map_err(|e| cfg_err("control.gain", e))
}

fn integrator_opts(section: &IntegratorSection, allow_large_dt: bool) -> Result<IntegratorOptions> {
    let dt = section
        .dt
        .ok_or_else(|| Error::Config("integrator.dt is required".into()))?;
    let t_final = section
        .t_final
        .ok_or_else(|| Error::Config("integrator.t_final is required".into()))?;
    let mut opts = IntegratorOptions::new(dt, t_final).map_err(|e| cfg_err("integrator", e))?;
    if let Some(r) = section.renormalize {
        opts = opts.with_renormalize(r);
    }
    if let Some(s) = section.record_stride {
        opts = opts
            .with_record_stride(s)
            .map_err(|e| cfg_err("integrator.record_stride", e))?;
    }
    Ok(opts.with_allow_large_dt(allow_large_dt))
}

fn gain_warning(gain: f64, params: &PhysicalParams) -> Option<String> {
    let threshold = params.gain_threshold();
    (gain <= threshold)
        .then(|| format!("k ≤ 8νL⁴ = {threshold}; theorem bound not satisfied"))
}

/// Validate a parsed config into a run plan, pushing every numeric field
/// through the owning module's constructor.
pub fn resolve(config: &ScenarioConfig, cli_allow_large_dt: bool) -> Result<Resolved> {
    let kind = config.kind;
    let params = PhysicalParams::new(config.physics.nu, config.physics.length)
        .map_err(|e| cfg_err("physics", e))?;
    let allow_large_dt = cli_allow_large_dt
        || config
            .integrator
            .as_ref()
            .and_then(|s| s.allow_large_dt)
            .unwrap_or(false);
    let mut manifest_config = config.clone();
    if allow_large_dt {
        if let Some(section) = manifest_config.integrator.as_mut() {
            section.allow_large_dt = Some(true);
        }
    }
    let mut warnings = Vec::new();

    let mesh_for = |kind| -> Result<Mesh> {
        let section = require(&config.mesh, "mesh", kind)?;
        Mesh::new(section.n_elements, config.physics.length)
            .map_err(|e| cfg_err("mesh.n_elements", e))
    };
    let initial_for = |kind| -> Result<InitialCondition> {
        let section = require(&config.initial, "initial", kind)?;
        InitialCondition::parse(&section.preset).map_err(|e| cfg_err("initial.preset", e))
    };

    let plan = match kind {
        ScenarioKind::Simulate => {
            forbid(&config.control, "control", kind)?;
            forbid(&config.sequence, "sequence", kind)?;
            forbid(&config.hysteresis, "hysteresis", kind)?;
            forbid(&config.spectrum, "spectrum", kind)?;
            forbid(&config.verify, "verify", kind)?;
            let mesh = mesh_for(kind)?;
            let initial = initial_for(kind)?;
            let opts = integrator_opts(require(&config.integrator, "integrator", kind)?, allow_large_dt)?;
            Plan::Simulate { mesh, initial, opts }
        }
        ScenarioKind::Steer => {
            forbid(&config.sequence, "sequence", kind)?;
            forbid(&config.hysteresis, "hysteresis", kind)?;
            forbid(&config.spectrum, "spectrum", kind)?;
            forbid(&config.verify, "verify", kind)?;
            let mesh = mesh_for(kind)?;
            let initial = initial_for(kind)?;
            let opts = integrator_opts(require(&config.integrator, "integrator", kind)?, allow_large_dt)?;
            let control = control_spec_from(require(&config.control, "control", kind)?)?;
            warnings.extend(gain_warning(control.gain(), &params));
            Plan::Steer { mesh, initial, opts, control }
        }
        ScenarioKind::SteerSequence => {
            forbid(&config.hysteresis, "hysteresis", kind)?;
            forbid(&config.spectrum, "spectrum", kind)?;
            forbid(&config.verify, "verify", kind)?;
            let mesh = mesh_for(kind)?;
            let initial = initial_for(kind)?;
            let integ = require(&config.integrator, "integrator", kind)?;
            if integ.t_final.is_some() {
                return Err(Error::Config(
                    "integrator.t_final: steer_sequence takes durations from [sequence]".into(),
                ));
            }
            let dt = integ
                .dt
                .ok_or_else(|| Error::Config("integrator.dt is required".into()))?;
            let control = require(&config.control, "control", kind)?;
            if control.target.is_some() {
                return Err(Error::Config(
                    "control.target: steer_sequence takes targets from [sequence]".into(),
                ));
            }
            let drive = control
                .drive
                .as_ref()
                .map(|d| drive_from(d, "control.drive"))
                .transpose()?;
            let seq = require(&config.sequence, "sequence", kind)?;
            if seq.targets.is_empty() {
                return Err(Error::Config(
                    "sequence.targets: at least one target is required".into(),
                ));
            }
            let mut targets = Vec::with_capacity(seq.targets.len());
            for (i, raw) in seq.targets.iter().enumerate() {
                targets.push(target_from(*raw, &format!("sequence.targets[{i}]"))?);
            }
            // Probe constructors so every field fails at load time, not mid-run.
            ControlSpec::new(control.gain, targets[0], drive)
                .map_err(|e| cfg_err("control.gain", e))?;
            IntegratorOptions::new(dt, seq.phase_time)
                .map_err(|e| cfg_err("sequence.phase_time", e))?;
            if !seq.settle_time.is_finite() || seq.settle_time < 0.0 {
                return Err(Error::Config(format!(
                    "sequence.settle_time: must be finite and >= 0, got {}",
                    seq.settle_time
                )));
            }
            if seq.settle_time > 0.0 {
                IntegratorOptions::new(dt, seq.settle_time)
                    .map_err(|e| cfg_err("sequence.settle_time", e))?;
            }
            if let Some(stride) = integ.record_stride {
                if stride == 0 {
                    return Err(Error::Config(
                        "integrator.record_stride: must be >= 1".into(),
                    ));
                }
            }
            warnings.extend(gain_warning(control.gain, &params));
            Plan::SteerSequence {
                mesh,
                initial,
                dt,
                settle_time: seq.settle_time,
                phase_time: seq.phase_time,
                gain: control.gain,
                drive,
                targets,
                renormalize: integ.renormalize,
                record_stride: integ.record_stride,
                allow_large_dt,
            }
        }
        ScenarioKind::HysteresisSweep => {
            forbid(&config.sequence, "sequence", kind)?;
            forbid(&config.spectrum, "spectrum", kind)?;
            forbid(&config.verify, "verify", kind)?;
            let mesh = mesh_for(kind)?;
            let initial = initial_for(kind)?;
            let h = require(&config.hysteresis, "hysteresis", kind)?;
            if let Some(integ) = &config.integrator {
                if integ.t_final.is_some() || integ.renormalize.is_some()
                    || integ.record_stride.is_some()
                {
                    return Err(Error::Config(
                        "[integrator] for hysteresis_sweep admits only dt and allow_large_dt \
                         (duration is n_periods per frequency; loops never renormalize)"
                            .into(),
                    ));
                }
            }
            if h.omegas.is_empty() {
                return Err(Error::Config(
                    "hysteresis.omegas: at least one frequency is required".into(),
                ));
            }
            let component = Component::from_one_based(h.component)
                .map_err(|e| cfg_err("hysteresis.component", e))?;
            let n_periods = h.n_periods.unwrap_or(3);
            let template = HysteresisConfig::new(
                h.omegas[0],
                h.amplitude,
                component,
                h.observation_point,
                n_periods,
                h.controlled,
            )
            .map_err(|e| cfg_err("hysteresis", e))?;
            for (i, &omega) in h.omegas.iter().enumerate() {
                template
                    .at_omega(omega)
                    .map_err(|e| cfg_err(&format!("hysteresis.omegas[{i}]"), e))?;
            }
            for pair in h.omegas.windows(2) {
                if !(pair[1] < pair[0]) {
                    return Err(Error::Config(
                        "hysteresis.omegas: frequencies must be strictly decreasing".into(),
                    ));
                }
            }
            if h.observation_point > params.length() {
                return Err(Error::Config(format!(
                    "hysteresis.observation_point: must lie within [0, {}], got {}",
                    params.length(),
                    h.observation_point
                )));
            }
            let linear = h.linear.unwrap_or(false);
            if linear && !matches!(initial, InitialCondition::Uniform(_)) {
                return Err(Error::Config(
                    "hysteresis.linear = true requires a uniform initial state \
                     (it doubles as the linearization base)"
                        .into(),
                ));
            }
            let spec = match (&config.control, h.controlled) {
                (Some(c), _) => {
                    if c.drive.is_some() {
                        return Err(Error::Config(
                            "[control.drive] does not apply to hysteresis_sweep \
                             (forcing comes from [hysteresis])"
                                .into(),
                        ));
                    }
                    control_spec_from(c)?
                }
                (None, true) => {
                    return Err(Error::Config(
                        "[control] is required when hysteresis.controlled = true".into(),
                    ));
                }
                (None, false) => ControlSpec::new(
                    0.0,
                    Equilibrium::new(Vec3::new(1.0, 0.0, 0.0)).expect("unit vector"),
                    None,
                )
                .expect("inert placeholder spec"),
            };
            if h.controlled {
                warnings.extend(gain_warning(spec.gain(), &params));
            }
            let dt = config.integrator.as_ref().and_then(|s| s.dt);
            if let Some(dt) = dt {
                if !dt.is_finite() || dt <= 0.0 {
                    return Err(Error::Config(format!(
                        "integrator.dt: must be finite and > 0, got {dt}"
                    )));
                }
            }
            Plan::Hysteresis {
                mesh,
                initial,
                template,
                omegas: h.omegas.clone(),
                spec,
                linear,
                dt,
                allow_large_dt,
            }
        }
        ScenarioKind::Spectrum => {
            forbid(&config.integrator, "integrator", kind)?;
            forbid(&config.initial, "initial", kind)?;
            forbid(&config.control, "control", kind)?;
            forbid(&config.sequence, "sequence", kind)?;
            forbid(&config.hysteresis, "hysteresis", kind)?;
            forbid(&config.verify, "verify", kind)?;
            let mesh = mesh_for(kind)?;
            let section = config.spectrum.unwrap_or_default();
            let n_max = section.n_max.unwrap_or(5);
            if n_max == 0 {
                return Err(Error::Config("spectrum.n_max: must be at least 1".into()));
            }
            let base = target_from(section.base.unwrap_or([1.0, 0.0, 0.0]), "spectrum.base")?;
            Plan::Spectrum { mesh, n_max, base }
        }
        ScenarioKind::Verify => {
            forbid(&config.mesh, "mesh", kind)?;
            forbid(&config.integrator, "integrator", kind)?;
            forbid(&config.initial, "initial", kind)?;
            forbid(&config.control, "control", kind)?;
            forbid(&config.sequence, "sequence", kind)?;
            forbid(&config.hysteresis, "hysteresis", kind)?;
            forbid(&config.spectrum, "spectrum", kind)?;
            let section = config.verify.unwrap_or_default();
            let defaults = VerifyOptions::default();
            let opts = VerifyOptions {
                n_fields: section.n_fields.unwrap_or(defaults.n_fields),
                n_elements: section.n_elements.unwrap_or(defaults.n_elements),
                seed: section.seed.unwrap_or(defaults.seed),
            };
            if opts.n_fields == 0 {
                return Err(Error::Config("verify.n_fields: must be at least 1".into()));
            }
            Mesh::new(opts.n_elements, params.length())
                .map_err(|e| cfg_err("verify.n_elements", e))?;
            Plan::Verify { opts }
        }
    };

    Ok(Resolved {
        kind,
        params,
        plan,
        warnings,
        manifest_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_SIMULATE: &str = "\
kind = \"simulate\"

[physics]
nu = 0.02
length = 1.0

[mesh]
n_elements = 12

[integrator]
dt = 1e-3
t_final = 1.0

[initial]
preset = \"uniform:0,1,0\"
";

    const STEER: &str = "\
kind = \"steer\"

[physics]
nu = 0.02
length = 1.0

[mesh]
n_elements = 12

[integrator]
dt = 1e-3
t_final = 1.0

[initial]
preset = \"sine_cosine\"

[control]
gain = 0.5
target = [0.0, 0.0, 1.0]
";

    fn parse(text: &str) -> ScenarioConfig {
        parse_config_str(text, &[]).expect("config parses")
    }

    #[test]
    fn minimal_simulate_config_loads_and_resolves() {
        let config = parse(MINIMAL_SIMULATE);
        let resolved = resolve(&config, false).unwrap();
        assert_eq!(resolved.kind, ScenarioKind::Simulate);
        assert!(resolved.warnings.is_empty());
        match &resolved.plan {
            Plan::Simulate { mesh, initial, opts } => {
                assert_eq!(mesh.n_elements(), 12);
                assert_eq!(*initial, InitialCondition::Uniform(Vec3::new(0.0, 1.0, 0.0)));
                assert_eq!(opts.dt(), 1e-3);
            }
            other => panic!("wrong plan: {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL_SIMULATE.replace("nu = 0.02", "nu = 0.02\nmystery = 1");
        let err = parse_config_str(&text, &[]).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_config_str("kind = \"simulate\"\nphysics = {", &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn negative_dt_is_rejected_naming_the_field() {
        let text = MINIMAL_SIMULATE.replace("dt = 1e-3", "dt = -1e-3");
        let config = parse(&text);
        let err = resolve(&config, false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("integrator") && msg.contains("dt"), "{msg}");
    }

    #[test]
    fn sub_threshold_gain_warns_with_the_computed_bound() {
        let text = STEER.replace("gain = 0.5", "gain = 0.1");
        let resolved = resolve(&parse(&text), false).unwrap();
        assert_eq!(
            resolved.warnings,
            vec!["k ≤ 8νL⁴ = 0.16; theorem bound not satisfied".to_string()]
        );
        // The run is still permitted: resolution succeeded.
        assert!(matches!(resolved.plan, Plan::Steer { .. }));
        let above = resolve(&parse(STEER), false).unwrap();
        assert!(above.warnings.is_empty());
    }

    #[test]
    fn overrides_patch_nested_and_top_level_keys() {
        let overrides = vec![
            "physics.nu=0.05".to_string(),
            "integrator.dt=2e-3".to_string(),
            "initial.preset=sine_cosine".to_string(),
        ];
        let config = parse_config_str(MINIMAL_SIMULATE, &overrides).unwrap();
        assert_eq!(config.physics.nu, 0.05);
        assert_eq!(config.integrator.unwrap().dt, Some(2e-3));
        assert_eq!(config.initial.unwrap().preset, "sine_cosine");
    }

    #[test]
    fn overrides_parse_arrays_and_booleans() {
        let mut table = toml::Table::new();
        apply_override(&mut table, "hysteresis.omegas=[1.0, 0.5]").unwrap();
        apply_override(&mut table, "hysteresis.controlled=true").unwrap();
        let h = table["hysteresis"].as_table().unwrap();
        assert_eq!(h["omegas"].as_array().unwrap().len(), 2);
        assert_eq!(h["controlled"].as_bool(), Some(true));
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        let mut table = toml::Table::new();
        assert!(apply_override(&mut table, "no-equals-sign").is_err());
        assert!(apply_override(&mut table, "=5").is_err());
        assert!(apply_override(&mut table, "a..b=5").is_err());
        table.insert("physics".into(), toml::Value::Integer(3));
        assert!(apply_override(&mut table, "physics.nu=0.1").is_err());
    }

    #[test]
    fn overridden_configs_still_reject_unknown_keys() {
        let overrides = vec!["physics.mystery=1".to_string()];
        let err = parse_config_str(MINIMAL_SIMULATE, &overrides).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn steer_requires_control_and_simulate_forbids_it() {
        let text = STEER.replace("\n[control]\ngain = 0.5\ntarget = [0.0, 0.0, 1.0]\n", "");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("[control]"), "{err}");

        let text = MINIMAL_SIMULATE.to_string()
            + "\n[control]\ngain = 0.5\ntarget = [0.0, 0.0, 1.0]\n";
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("[control]"), "{err}");
    }

    #[test]
    fn non_unit_control_target_is_rejected() {
        let text = STEER.replace("target = [0.0, 0.0, 1.0]", "target = [0.0, 0.0, 2.0]");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("control.target"), "{err}");
    }

    fn sequence_text() -> String {
        "\
kind = \"steer_sequence\"

[physics]
nu = 0.02
length = 1.0

[mesh]
n_elements = 12

[integrator]
dt = 1e-3

[initial]
preset = \"sine_cosine\"

[control]
gain = 0.5

[sequence]
settle_time = 0.5
phase_time = 1.0
targets = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
"
        .to_string()
    }

    #[test]
    fn sequence_resolves_with_unit_targets() {
        let resolved = resolve(&parse(&sequence_text()), false).unwrap();
        match &resolved.plan {
            Plan::SteerSequence { targets, settle_time, phase_time, gain, .. } => {
                assert_eq!(targets.len(), 2);
                assert_eq!(*settle_time, 0.5);
                assert_eq!(*phase_time, 1.0);
                assert_eq!(*gain, 0.5);
            }
            other => panic!("wrong plan: {other:?}"),
        }
    }

    #[test]
    fn sequence_rejects_bad_targets_by_index() {
        let text = sequence_text().replace("[0.0, 0.0, 1.0]", "[0.0, 0.0, 3.0]");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("sequence.targets[1]"), "{err}");
    }

    #[test]
    fn sequence_rejects_control_target_and_t_final() {
        let text = sequence_text().replace("gain = 0.5", "gain = 0.5\ntarget = [1.0, 0.0, 0.0]");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("control.target"), "{err}");

        let text = sequence_text().replace("dt = 1e-3", "dt = 1e-3\nt_final = 5.0");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("integrator.t_final"), "{err}");
    }

    fn hysteresis_text() -> String {
        "\
kind = \"hysteresis_sweep\"

[physics]
nu = 0.02
length = 1.0

[mesh]
n_elements = 5

[initial]
preset = \"uniform:1,0,0\"

[hysteresis]
omegas = [1.0, 0.5]
amplitude = 1e-3
component = 1
observation_point = 0.6
controlled = false
"
        .to_string()
    }

    #[test]
    fn hysteresis_resolves_with_defaults() {
        let resolved = resolve(&parse(&hysteresis_text()), false).unwrap();
        match &resolved.plan {
            Plan::Hysteresis { template, omegas, spec, linear, dt, .. } => {
                assert_eq!(template.n_periods(), 3);
                assert_eq!(omegas, &[1.0, 0.5]);
                assert_eq!(spec.gain(), 0.0);
                assert!(!*linear);
                assert!(dt.is_none());
            }
            other => panic!("wrong plan: {other:?}"),
        }
    }

    #[test]
    fn controlled_sweep_requires_control_section() {
        let text = hysteresis_text().replace("controlled = false", "controlled = true");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("[control]"), "{err}");
    }

    #[test]
    fn hysteresis_rejects_unsorted_omegas_and_far_probes() {
        let text = hysteresis_text().replace("[1.0, 0.5]", "[0.5, 1.0]");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("strictly decreasing"), "{err}");

        let text = hysteresis_text().replace("observation_point = 0.6", "observation_point = 1.5");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("observation_point"), "{err}");
    }

    #[test]
    fn linear_sweep_requires_uniform_initial() {
        let text = hysteresis_text()
            .replace("controlled = false", "controlled = false\nlinear = true")
            .replace("uniform:1,0,0", "sine_cosine");
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("linear"), "{err}");
    }

    #[test]
    fn hysteresis_integrator_admits_only_dt() {
        let text = hysteresis_text() + "\n[integrator]\ndt = 1e-3\n";
        assert!(resolve(&parse(&text), false).is_ok());
        let text = hysteresis_text() + "\n[integrator]\ndt = 1e-3\nt_final = 5.0\n";
        let err = resolve(&parse(&text), false).unwrap_err();
        assert!(err.to_string().contains("admits only"), "{err}");
    }

    #[test]
    fn spectrum_and_verify_use_defaults() {
        let text = "\
kind = \"spectrum\"

[physics]
nu = 0.02
length = 1.0

[mesh]
n_elements = 32
";
        let resolved = resolve(&parse(text), false).unwrap();
        match &resolved.plan {
            Plan::Spectrum { n_max, base, .. } => {
                assert_eq!(*n_max, 5);
                assert_eq!(base.vector(), Vec3::new(1.0, 0.0, 0.0));
            }
            other => panic!("wrong plan: {other:?}"),
        }

        let text = "\
kind = \"verify\"

[physics]
nu = 0.02
length = 1.0
";
        let resolved = resolve(&parse(text), false).unwrap();
        match &resolved.plan {
            Plan::Verify { opts } => assert_eq!(*opts, VerifyOptions::default()),
            other => panic!("wrong plan: {other:?}"),
        }
    }

    #[test]
    fn verify_kind_forbids_mesh_section() {
        let text = "\
kind = \"verify\"

[physics]
nu = 0.02
length = 1.0

[mesh]
n_elements = 32
";
        let err = resolve(&parse(text), false).unwrap_err();
        assert!(err.to_string().contains("[mesh]"), "{err}");
    }

    #[test]
    fn cli_allow_large_dt_is_folded_into_the_manifest_config() {
        let resolved = resolve(&parse(MINIMAL_SIMULATE), true).unwrap();
        assert_eq!(
            resolved
                .manifest_config
                .integrator
                .as_ref()
                .unwrap()
                .allow_large_dt,
            Some(true)
        );
        match resolved.plan {
            Plan::Simulate { opts, .. } => assert!(opts.allow_large_dt()),
            other => panic!("wrong plan: {other:?}"),
        }
    }

    #[test]
    fn configs_round_trip_through_toml() {
        for text in [
            MINIMAL_SIMULATE.to_string(),
            STEER.to_string(),
            sequence_text(),
            hysteresis_text(),
        ] {
            let config = parse(&text);
            let serialized = toml::to_string(&config).unwrap();
            let reparsed: ScenarioConfig = toml::from_str(&serialized).unwrap();
            assert_eq!(config, reparsed);
        }
    }

    #[test]
    fn subcommands_cover_their_kinds() {
        assert_eq!(ScenarioKind::Simulate.subcommand(), "simulate");
        assert_eq!(ScenarioKind::Steer.subcommand(), "steer");
        assert_eq!(ScenarioKind::SteerSequence.subcommand(), "steer");
        assert_eq!(ScenarioKind::HysteresisSweep.subcommand(), "hysteresis");
        assert_eq!(ScenarioKind::Spectrum.subcommand(), "spectrum");
        assert_eq!(ScenarioKind::Verify.subcommand(), "verify");
    }
}
