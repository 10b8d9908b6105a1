//! Continuous model vocabulary: magnetization vectors, equilibria, physical
//! parameters, and the affine control law
//!
//!   u(t) = k (r - m) + a cos(w t) e_c
//!
//! where r is a constant unit target, k >= 0 the proportional gain, and the
//! cosine term an optional spatially uniform probing signal on one component.

use crate::error::{Error, Result};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Tolerance for accepting a vector as exactly unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// A point value of the magnetization (or of any 3-vector field).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Cross product `self x other`.
    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    /// Nested cross product `self x (self x other)`.
    pub fn double_cross(self, other: Vec3) -> Vec3 {
        self.cross(self.cross(other))
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rescale to unit norm; a zero vector cannot be normalized.
    pub fn project_to_sphere(self) -> Result<Vec3> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateMagnetization);
        }
        Ok(self * (1.0 / n))
    }

    pub fn component(self, c: Component) -> f64 {
        match c {
            Component::M1 => self.x,
            Component::M2 => self.y,
            Component::M3 => self.z,
        }
    }

    pub fn component_mut(&mut self, c: Component) -> &mut f64 {
        match c {
            Component::M1 => &mut self.x,
            Component::M2 => &mut self.y,
            Component::M3 => &mut self.z,
        }
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

/// One of the three magnetization components, numbered 1..=3 externally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    M1,
    M2,
    M3,
}

impl Component {
    pub fn from_one_based(i: u8) -> Result<Component> {
        match i {
            1 => Ok(Component::M1),
            2 => Ok(Component::M2),
            3 => Ok(Component::M3),
            _ => Err(Error::InvalidParameter(format!(
                "component index {i} out of range 1..=3"
            ))),
        }
    }

    pub fn one_based(self) -> u8 {
        match self {
            Component::M1 => 1,
            Component::M2 => 2,
            Component::M3 => 3,
        }
    }
}

/// A constant unit vector; the equilibria of the uncontrolled dynamics.
///
/// Construction rejects non-unit input rather than silently normalizing,
/// so every intent to normalize is explicit at the call site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    vector: Vec3,
}

impl Equilibrium {
    pub fn new(vector: Vec3) -> Result<Equilibrium> {
        if !vector.is_finite() {
            return Err(Error::InvalidParameter(
                "equilibrium vector must be finite".into(),
            ));
        }
        let dev = (vector.norm() - 1.0).abs();
        if dev > UNIT_NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "equilibrium vector must have unit norm (deviation {dev:.3e})"
            )));
        }
        Ok(Equilibrium { vector })
    }

    pub fn vector(self) -> Vec3 {
        self.vector
    }
}

/// Exchange damping coefficient and domain length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    nu: f64,
    length: f64,
}

impl PhysicalParams {
    pub fn new(nu: f64, length: f64) -> Result<PhysicalParams> {
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "damping nu must be finite and >= 0, got {nu}"
            )));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "domain length must be finite and > 0, got {length}"
            )));
        }
        Ok(PhysicalParams { nu, length })
    }

    pub fn nu(self) -> f64 {
        self.nu
    }

    pub fn length(self) -> f64 {
        self.length
    }

    /// Gain above which the proportional feedback law is provably globally
    /// asymptotically stabilizing: 8 nu L^4.
    pub fn gain_threshold(self) -> f64 {
        8.0 * self.nu * self.length.powi(4)
    }
}

/// Sinusoidal probing signal applied to one component, uniform in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub amplitude: f64,
    pub omega: f64,
    pub component: Component,
}

impl Drive {
    pub fn new(amplitude: f64, omega: f64, component: Component) -> Result<Drive> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "drive amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "drive frequency must be finite and > 0, got {omega}"
            )));
        }
        Ok(Drive { amplitude, omega, component })
    }

    /// Scalar signal value a cos(w t).
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t).cos()
    }

    /// Signal as a vector on the active component.
    pub fn vector(&self, t: f64) -> Vec3 {
        let mut v = Vec3::ZERO;
        *v.component_mut(self.component) = self.value(t);
        v
    }
}

/// Proportional feedback toward a target equilibrium, plus optional drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSpec {
    gain: f64,
    target: Equilibrium,
    drive: Option<Drive>,
}

impl ControlSpec {
    pub fn new(gain: f64, target: Equilibrium, drive: Option<Drive>) -> Result<ControlSpec> {
        if !gain.is_finite() || gain < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gain must be finite and >= 0, got {gain}"
            )));
        }
        Ok(ControlSpec { gain, target, drive })
    }

    pub fn gain(self) -> f64 {
        self.gain
    }

    pub fn target(self) -> Equilibrium {
        self.target
    }

    pub fn drive(self) -> Option<Drive> {
        self.drive
    }

    /// Control input k (r - m) + drive, evaluated at one point.
    ///
    /// The drive adds to the feedback term; at m = r with no drive the input
    /// is exactly zero.
    pub fn control_input(&self, m: Vec3, t: f64) -> Vec3 {
        let mut u = (self.target.vector() - m) * self.gain;
        if let Some(d) = self.drive {
            u += d.vector(t);
        }
        u
    }
}
