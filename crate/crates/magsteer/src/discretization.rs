//! Spatial discretization: uniform linear-spline elements on [0, L] with
//! natural (zero-flux) boundary conditions.
//!
//! The second spatial derivative of a nodal field m is the field w solving
//! `Mass * w = -Stiffness * m` componentwise, which is the Galerkin
//! counterpart of m_xx under the boundary conditions m_x(0) = m_x(L) = 0.
//! The dynamics right-hand side is collocated at the nodes:
//!
//!   m_t = m x w - nu m x (m x w) + u(t)
//!
//! together with its semilinear rewriting, valid on the unit sphere,
//!
//!   m_t = nu w + m x w + nu |m_x|^2 m.

use crate::error::{Error, Result};
use crate::model::{ControlSpec, PhysicalParams, Vec3};

/// Uniform element mesh on [0, L].
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n_elements: usize,
    length: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Mesh {
    pub fn new(n_elements: usize, length: f64) -> Result<Mesh> {
        if n_elements < 2 {
            return Err(Error::MeshTooCoarse { n_elements });
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mesh length must be finite and > 0, got {length}"
            )));
        }
        let n = n_elements as f64;
        // i/n evaluates to exactly 1.0 at i = n, so the last node is exactly L.
        let nodes = (0..=n_elements).map(|i| length * (i as f64 / n)).collect();
        Ok(Mesh { n_elements, length, h: length / n, nodes })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elements + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Trapezoid quadrature weight of node i (h/2 at the ends, h inside).
    pub fn quadrature_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_elements {
            self.h / 2.0
        } else {
            self.h
        }
    }
}

/// Symmetric tridiagonal matrix stored by bands.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn zeros(n: usize) -> TridiagonalMatrix {
        TridiagonalMatrix {
            sub: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            sup: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j + 1 == i {
            self.sub[j]
        } else if i + 1 == j {
            self.sup[i]
        } else {
            0.0
        }
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        assert_eq!(v.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.sub[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// Thomas elimination, overwriting `b` with the solution.
    ///
    /// No pivoting: only valid for diagonally dominant systems such as the
    /// mass matrix. `scratch` must have length n.
    pub fn solve_into(&self, b: &mut [f64], scratch: &mut [f64]) {
        let n = self.n();
        assert_eq!(b.len(), n);
        assert_eq!(scratch.len(), n);
        scratch[0] = self.sup.first().copied().unwrap_or(0.0) / self.diag[0];
        b[0] /= self.diag[0];
        for i in 1..n {
            let denom = self.diag[i] - self.sub[i - 1] * scratch[i - 1];
            scratch[i] = if i + 1 < n { self.sup[i] / denom } else { 0.0 };
            b[i] = (b[i] - self.sub[i - 1] * b[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            b[i] -= scratch[i] * b[i + 1];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let mut scratch = vec![0.0; self.n()];
        self.solve_into(&mut x, &mut scratch);
        x
    }
}

/// Consistent mass matrix: element blocks (h/6) [[2, 1], [1, 2]].
pub fn assemble_mass(mesh: &Mesh) -> TridiagonalMatrix {
    let mut m = TridiagonalMatrix::zeros(mesh.n_nodes());
    let h6 = mesh.h() / 6.0;
    for e in 0..mesh.n_elements() {
        m.diag[e] += 2.0 * h6;
        m.diag[e + 1] += 2.0 * h6;
        m.sup[e] += h6;
        m.sub[e] += h6;
    }
    m
}

/// Stiffness matrix: element blocks (1/h) [[1, -1], [-1, 1]].
pub fn assemble_stiffness(mesh: &Mesh) -> TridiagonalMatrix {
    let mut k = TridiagonalMatrix::zeros(mesh.n_nodes());
    let inv_h = 1.0 / mesh.h();
    for e in 0..mesh.n_elements() {
        k.diag[e] += inv_h;
        k.diag[e + 1] += inv_h;
        k.sup[e] -= inv_h;
        k.sub[e] -= inv_h;
    }
    k
}

/// Mesh with its assembled mass and stiffness matrices.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub mass: TridiagonalMatrix,
    pub stiffness: TridiagonalMatrix,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Discretization {
        let mass = assemble_mass(&mesh);
        let stiffness = assemble_stiffness(&mesh);
        Discretization { mesh, mass, stiffness }
    }
}

/// Nodal values of the magnetization on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationField {
    mesh: Mesh,
    values: Vec<Vec3>,
}

impl MagnetizationField {
    pub fn from_values(mesh: Mesh, values: Vec<Vec3>) -> Result<MagnetizationField> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::MeshMismatch { expected: mesh.n_nodes(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "field value at node {i} is not finite"
            )));
        }
        Ok(MagnetizationField { mesh, values })
    }

    pub fn from_fn(mesh: Mesh, f: impl Fn(f64) -> Vec3) -> Result<MagnetizationField> {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        MagnetizationField::from_values(mesh, values)
    }

    pub fn uniform(mesh: Mesh, v: Vec3) -> Result<MagnetizationField> {
        let n = mesh.n_nodes();
        MagnetizationField::from_values(mesh, vec![v; n])
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn node_value(&self, i: usize) -> Vec3 {
        self.values[i]
    }

    /// Replace every node by its projection onto the unit sphere.
    pub fn project_to_sphere(&mut self) -> Result<()> {
        for v in &mut self.values {
            *v = v.project_to_sphere()?;
        }
        Ok(())
    }

    /// Value of the linear-spline interpolant at position x (clamped to [0, L]).
    pub fn interpolate(&self, x: f64) -> Vec3 {
        let h = self.mesh.h();
        let n = self.mesh.n_elements();
        let clamped = x.clamp(0.0, self.mesh.length());
        let e = ((clamped / h) as usize).min(n - 1);
        let frac = (clamped - self.mesh.node(e)) / h;
        self.values[e] * (1.0 - frac) + self.values[e + 1] * frac
    }
}

/// Reusable buffers for right-hand-side evaluations.
#[derive(Debug, Clone)]
pub struct FieldScratch {
    comp: Vec<f64>,
    solve: Vec<f64>,
    aux: Vec<f64>,
    pub(crate) curvature: Vec<Vec3>,
    pub(crate) gradient: Vec<Vec3>,
}

impl FieldScratch {
    pub fn new(n_nodes: usize) -> FieldScratch {
        FieldScratch {
            comp: vec![0.0; n_nodes],
            solve: vec![0.0; n_nodes],
            aux: vec![0.0; n_nodes],
            curvature: vec![Vec3::ZERO; n_nodes],
            gradient: vec![Vec3::ZERO; n_nodes],
        }
    }
}

fn component_slice(values: &[Vec3], c: usize, out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(values) {
        *o = match c {
            0 => v.x,
            1 => v.y,
            _ => v.z,
        };
    }
}

/// Curvature w solving Mass * w = -Stiffness * m, written into scratch.
pub(crate) fn second_derivative_into(
    disc: &Discretization,
    values: &[Vec3],
    scratch: &mut FieldScratch,
) {
    let n = values.len();
    for c in 0..3 {
        component_slice(values, c, &mut scratch.comp);
        disc.stiffness.mul_vec_into(&scratch.comp, &mut scratch.solve);
        for s in &mut scratch.solve {
            *s = -*s;
        }
        disc.mass.solve_into(&mut scratch.solve, &mut scratch.aux);
        for i in 0..n {
            match c {
                0 => scratch.curvature[i].x = scratch.solve[i],
                1 => scratch.curvature[i].y = scratch.solve[i],
                _ => scratch.curvature[i].z = scratch.solve[i],
            }
        }
    }
}

/// Nodal spatial derivative: centered differences inside, one-sided at the ends.
pub(crate) fn nodal_gradient_into(mesh: &Mesh, values: &[Vec3], out: &mut [Vec3]) {
    let n = values.len();
    let h = mesh.h();
    out[0] = (values[1] - values[0]) * (1.0 / h);
    out[n - 1] = (values[n - 1] - values[n - 2]) * (1.0 / h);
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) * (1.0 / (2.0 * h));
    }
}

pub(crate) fn check_finite(out: &[Vec3], t: f64) -> Result<()> {
    if let Some(node) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowUp { node, t });
    }
    Ok(())
}

/// Full right-hand side at the nodes, written into `out`.
pub(crate) fn rhs_into(
    disc: &Discretization,
    params: &PhysicalParams,
    spec: Option<&ControlSpec>,
    t: f64,
    values: &[Vec3],
    out: &mut [Vec3],
    scratch: &mut FieldScratch,
) -> Result<()> {
    second_derivative_into(disc, values, scratch);
    let nu = params.nu();
    for i in 0..values.len() {
        let m = values[i];
        let w = scratch.curvature[i];
        let mut dm = m.cross(w) - nu * m.double_cross(w);
        if let Some(s) = spec {
            dm += s.control_input(m, t);
        }
        out[i] = dm;
    }
    check_finite(out, t)
}

/// Semilinear right-hand side at the nodes, written into `out`.
///
/// Requires the field to sit on the unit sphere; the penalty term
/// nu |m_x|^2 m substitutes for the norm constraint and the rewriting is
/// wrong off the sphere.
pub(crate) fn rhs_semilinear_into(
    disc: &Discretization,
    params: &PhysicalParams,
    spec: Option<&ControlSpec>,
    t: f64,
    values: &[Vec3],
    out: &mut [Vec3],
    scratch: &mut FieldScratch,
) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        let deviation = (v.norm() - 1.0).abs();
        if deviation > 1e-3 {
            return Err(Error::OffSphere { node: i, deviation });
        }
    }
    second_derivative_into(disc, values, scratch);
    nodal_gradient_into(&disc.mesh, values, &mut scratch.gradient);
    let nu = params.nu();
    for i in 0..values.len() {
        let m = values[i];
        let w = scratch.curvature[i];
        let grad_sq = scratch.gradient[i].norm_squared();
        let mut dm = nu * w + m.cross(w) + (nu * grad_sq) * m;
        if let Some(s) = spec {
            dm += s.control_input(m, t);
        }
        out[i] = dm;
    }
    check_finite(out, t)
}

fn check_same_mesh(field: &MagnetizationField, disc: &Discretization) -> Result<()> {
    if field.mesh() != &disc.mesh {
        return Err(Error::MeshMismatch {
            expected: disc.mesh.n_nodes(),
            found: field.mesh().n_nodes(),
        });
    }
    Ok(())
}

/// Discrete second derivative of a field (Galerkin, natural boundary conditions).
pub fn discrete_second_derivative(
    field: &MagnetizationField,
    disc: &Discretization,
) -> Result<MagnetizationField> {
    check_same_mesh(field, disc)?;
    let mut scratch = FieldScratch::new(field.values().len());
    second_derivative_into(disc, field.values(), &mut scratch);
    MagnetizationField::from_values(field.mesh().clone(), scratch.curvature)
}

/// Nodal spatial derivative of a field.
pub fn nodal_gradient(field: &MagnetizationField) -> Vec<Vec3> {
    let mut out = vec![Vec3::ZERO; field.values().len()];
    nodal_gradient_into(field.mesh(), field.values(), &mut out);
    out
}

/// Full right-hand side m x w - nu m x (m x w) + u(t) as a field.
pub fn rhs(
    field: &MagnetizationField,
    disc: &Discretization,
    params: &PhysicalParams,
    spec: Option<&ControlSpec>,
    t: f64,
) -> Result<MagnetizationField> {
    check_same_mesh(field, disc)?;
    let n = field.values().len();
    let mut scratch = FieldScratch::new(n);
    let mut out = vec![Vec3::ZERO; n];
    rhs_into(disc, params, spec, t, field.values(), &mut out, &mut scratch)?;
    MagnetizationField::from_values(field.mesh().clone(), out)
}

/// Semilinear right-hand side nu w + m x w + nu |m_x|^2 m (+ u(t)) as a field.
pub fn rhs_semilinear(
    field: &MagnetizationField,
    disc: &Discretization,
    params: &PhysicalParams,
    spec: Option<&ControlSpec>,
    t: f64,
) -> Result<MagnetizationField> {
    check_same_mesh(field, disc)?;
    let n = field.values().len();
    let mut scratch = FieldScratch::new(n);
    let mut out = vec![Vec3::ZERO; n];
    rhs_semilinear_into(disc, params, spec, t, field.values(), &mut out, &mut scratch)?;
    MagnetizationField::from_values(field.mesh().clone(), out)
}
