//! Initial magnetization profiles.
//!
//! Every builder returns a field whose nodal values sit on the unit sphere
//! and whose continuum counterpart has zero spatial derivative at both
//! endpoints, so the profiles are compatible with the zero-flux boundary
//! conditions of the dynamics.

use crate::discretization::{MagnetizationField, Mesh};
use crate::error::{Error, Result};
use crate::model::{Component, Vec3};
use rand::Rng;
use std::f64::consts::PI;
use std::fmt;

/// How far a user-supplied uniform value may sit from the unit sphere before
/// it is rejected instead of being projected.
pub const UNIFORM_NORM_TOL: f64 = 1e-6;

/// Named initial-condition families, parsable from a compact string form.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Constant field `uniform:x,y,z` (must be within [`UNIFORM_NORM_TOL`]
    /// of unit length; the stored value is projected exactly).
    Uniform(Vec3),
    /// In-plane winding `(sin(2 pi x / L), cos(2 pi x / L), 0)`.
    SineCosine,
    /// Small cosine ripple of mode `n` carried by component `c`
    /// (`cosine_mode:n,c`): the field tilts away from an anchor axis by the
    /// angle `0.5 cos(n pi x / L)`.
    CosineMode { mode: usize, component: Component },
    /// In-plane phase ramp from (1, 0, 0) to (-1, 0, 0) with zero endpoint
    /// slope: `(cos g, sin g, 0)` with `g = pi s^2 (3 - 2 s)`, `s = x / L`.
    PhaseWrap,
}

impl InitialCondition {
    /// Parse the compact string form used by configuration files:
    /// `uniform:x,y,z`, `sine_cosine`, `cosine_mode:n,c`, `phase_wrap`.
    pub fn parse(s: &str) -> Result<InitialCondition> {
        let s = s.trim();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t.trim())),
            None => (s, None),
        };
        let bad = |msg: String| Err(Error::Config(msg));
        match (head, tail) {
            ("uniform", Some(t)) => {
                let parts: Vec<&str> = t.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return bad(format!(
                        "initial condition 'uniform' needs three components, got '{t}'"
                    ));
                }
                let mut c = [0.0f64; 3];
                for (slot, p) in c.iter_mut().zip(&parts) {
                    *slot = p.parse().map_err(|_| {
                        Error::Config(format!("invalid number '{p}' in initial condition"))
                    })?;
                }
                Ok(InitialCondition::Uniform(Vec3::new(c[0], c[1], c[2])))
            }
            ("uniform", None) => bad("initial condition 'uniform' needs ':x,y,z'".into()),
            ("sine_cosine", None) => Ok(InitialCondition::SineCosine),
            ("phase_wrap", None) => Ok(InitialCondition::PhaseWrap),
            ("cosine_mode", Some(t)) => {
                let (n_str, c_str) = t.split_once(',').ok_or_else(|| {
                    Error::Config(format!(
                        "initial condition 'cosine_mode' needs ':mode,component', got '{t}'"
                    ))
                })?;
                let mode: usize = n_str.trim().parse().map_err(|_| {
                    Error::Config(format!("invalid mode number '{}'", n_str.trim()))
                })?;
                let comp_index: u8 = c_str.trim().parse().map_err(|_| {
                    Error::Config(format!("invalid component '{}'", c_str.trim()))
                })?;
                let component = Component::from_one_based(comp_index)?;
                Ok(InitialCondition::CosineMode { mode, component })
            }
            ("cosine_mode", None) => {
                bad("initial condition 'cosine_mode' needs ':mode,component'".into())
            }
            _ => bad(format!(
                "unknown initial condition '{s}' (expected uniform:x,y,z, sine_cosine, \
                 cosine_mode:n,c, or phase_wrap)"
            )),
        }
    }

    /// Build the nodal field on the given mesh.
    pub fn build(&self, mesh: Mesh) -> Result<MagnetizationField> {
        match self {
            InitialCondition::Uniform(v) => {
                if !v.is_finite() || (v.norm() - 1.0).abs() > UNIFORM_NORM_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "uniform initial condition ({}, {}, {}) is not on the unit sphere",
                        v.x, v.y, v.z
                    )));
                }
                MagnetizationField::uniform(mesh, v.project_to_sphere()?)
            }
            InitialCondition::SineCosine => {
                let length = mesh.length();
                MagnetizationField::from_fn(mesh, |x| {
                    let a = 2.0 * PI * x / length;
                    Vec3::new(a.sin(), a.cos(), 0.0)
                })
            }
            InitialCondition::CosineMode { mode, component } => {
                let length = mesh.length();
                let n = *mode as f64;
                // Anchor axis: the cyclic successor of the rippled component.
                let anchor = match component {
                    Component::M1 => Component::M2,
                    Component::M2 => Component::M3,
                    Component::M3 => Component::M1,
                };
                let ripple = *component;
                MagnetizationField::from_fn(mesh, move |x| {
                    let phi = 0.5 * (n * PI * x / length).cos();
                    let mut v = Vec3::ZERO;
                    *v.component_mut(ripple) = phi.sin();
                    *v.component_mut(anchor) = phi.cos();
                    v
                })
            }
            InitialCondition::PhaseWrap => {
                let length = mesh.length();
                MagnetizationField::from_fn(mesh, |x| {
                    let s = x / length;
                    let g = PI * s * s * (3.0 - 2.0 * s);
                    Vec3::new(g.cos(), g.sin(), 0.0)
                })
            }
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Uniform(v) => write!(f, "uniform:{},{},{}", v.x, v.y, v.z),
            InitialCondition::SineCosine => write!(f, "sine_cosine"),
            InitialCondition::CosineMode { mode, component } => {
                write!(f, "cosine_mode:{},{}", mode, component.one_based())
            }
            InitialCondition::PhaseWrap => write!(f, "phase_wrap"),
        }
    }
}

/// Number of cosine modes in [`random_cosine_series`].
pub const RANDOM_FIELD_MODES: usize = 6;
/// Leading perturbation amplitude in [`random_cosine_series`].
pub const RANDOM_FIELD_AMPLITUDE: f64 = 0.3;

/// Draw a uniformly distributed unit vector.
pub fn random_unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n2 = v.norm_squared();
        if n2 > 0.01 && n2 <= 1.0 {
            return v * (1.0 / n2.sqrt());
        }
    }
}

/// Random smooth unit field: a random base direction plus a decaying cosine
/// series `sum_m (A / m^2) U(-1, 1) cos(m pi x / L)` per component, projected
/// to the sphere nodewise. The cosine basis keeps the endpoint slope zero.
pub fn random_cosine_series(mesh: Mesh, rng: &mut impl Rng) -> Result<MagnetizationField> {
    const AXES: [Component; 3] = [Component::M1, Component::M2, Component::M3];
    let base = random_unit_vector(rng);
    let mut coeffs = [[0.0f64; RANDOM_FIELD_MODES]; 3];
    for comp in &mut coeffs {
        for (m, c) in comp.iter_mut().enumerate() {
            let decay = ((m + 1) * (m + 1)) as f64;
            *c = RANDOM_FIELD_AMPLITUDE / decay * rng.gen_range(-1.0..1.0);
        }
    }
    let length = mesh.length();
    let mut field = MagnetizationField::from_fn(mesh, |x| {
        let mut v = base;
        for (axis, comp) in AXES.iter().zip(&coeffs) {
            let mut s = 0.0;
            for (m, c) in comp.iter().enumerate() {
                s += c * ((m + 1) as f64 * PI * x / length).cos();
            }
            *v.component_mut(*axis) += s;
        }
        v
    })?;
    field.project_to_sphere()?;
    Ok(field)
}
