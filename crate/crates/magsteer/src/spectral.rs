//! Spectrum of the dynamics linearized about a constant equilibrium, and
//! time integration of the resulting linear closed loop.
//!
//! About a constant unit vector `a` the exchange dynamics reduce to
//! `z_t = nu z_xx + a x z_xx`, a constant-coefficient operator whose
//! Neumann spectrum is known in closed form: each spatial frequency
//! `kappa = j pi / L` contributes one damping eigenvalue `-kappa^2 nu`
//! and a precession pair `-kappa^2 nu +- i kappa^2`. The discrete
//! counterpart replaces the Laplacian frequencies by those of the
//! mass-weighted stiffness pencil and inherits the same three-way split.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::discretization::{
    check_finite, second_derivative_into, Discretization, FieldScratch, MagnetizationField, Mesh,
    TridiagonalMatrix,
};
use crate::error::Result;
use crate::integrator::{
    auto_stride, check_dt_against_mesh, run_fixed_step, step_count, DriverConfig,
    IntegratorOptions, Trajectory,
};
use crate::model::{ControlSpec, Equilibrium, PhysicalParams, Vec3};

/// Eigenvalue magnitude below which a discrete mode counts as part of the
/// kernel cluster.
pub const ZERO_TOLERANCE: f64 = 1e-10;

/// Relative distance below which a discrete eigenvalue is declared a match
/// for an analytic one.
pub const MATCH_TOLERANCE: f64 = 0.1;

/// Which branch of the analytic spectrum an eigenvalue belongs to.
///
/// Modes split by the parity of the spatial frequency multiplier
/// (odd `j = 1 + 2n`, even `j = 2n`) and by their action on the plane
/// perpendicular to the base vector: precession pairs rotate in that plane,
/// damping modes decay without rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyLabel {
    Zero,
    OddPrecessionPlus,
    OddPrecessionMinus,
    OddDamping,
    EvenPrecessionPlus,
    EvenPrecessionMinus,
    EvenDamping,
}

impl std::fmt::Display for FamilyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FamilyLabel::Zero => "zero",
            FamilyLabel::OddPrecessionPlus => "odd_precession_plus",
            FamilyLabel::OddPrecessionMinus => "odd_precession_minus",
            FamilyLabel::OddDamping => "odd_damping",
            FamilyLabel::EvenPrecessionPlus => "even_precession_plus",
            FamilyLabel::EvenPrecessionMinus => "even_precession_minus",
            FamilyLabel::EvenDamping => "even_damping",
        };
        f.write_str(s)
    }
}

/// One labeled member of the analytic spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenvalueFamily {
    pub label: FamilyLabel,
    /// Family counter n; the spatial frequency multiplier is `1 + 2n` for
    /// odd families and `2n` for even ones.
    pub index: usize,
    pub value: Complex64,
}

impl EigenvalueFamily {
    /// Spatial frequency multiplier j in `kappa = j pi / L`.
    pub fn mode_number(&self) -> usize {
        match self.label {
            FamilyLabel::Zero => 0,
            FamilyLabel::OddPrecessionPlus
            | FamilyLabel::OddPrecessionMinus
            | FamilyLabel::OddDamping => 1 + 2 * self.index,
            FamilyLabel::EvenPrecessionPlus
            | FamilyLabel::EvenPrecessionMinus
            | FamilyLabel::EvenDamping => 2 * self.index,
        }
    }
}

/// Closed-form spectrum up to family counter `n_max`.
///
/// Returns the single zero eigenvalue, the odd families for n = 0..=n_max,
/// and the even families for n = 1..=n_max. The even-family formulas at
/// n = 0 reproduce the zero eigenvalue already listed once, so that entry
/// is not repeated.
pub fn analytic_eigenvalues(params: &PhysicalParams, n_max: usize) -> Vec<EigenvalueFamily> {
    let nu = params.nu();
    let length = params.length();
    let mut out = Vec::with_capacity(2 + 6 * n_max + 3);
    out.push(EigenvalueFamily {
        label: FamilyLabel::Zero,
        index: 0,
        value: Complex64::new(0.0, 0.0),
    });
    let push_mode = |out: &mut Vec<EigenvalueFamily>,
                     index: usize,
                     j: usize,
                     damping: FamilyLabel,
                     plus: FamilyLabel,
                     minus: FamilyLabel| {
        let kappa = j as f64 * std::f64::consts::PI / length;
        let theta = kappa * kappa;
        out.push(EigenvalueFamily {
            label: plus,
            index,
            value: Complex64::new(-theta * nu, theta),
        });
        out.push(EigenvalueFamily {
            label: minus,
            index,
            value: Complex64::new(-theta * nu, -theta),
        });
        out.push(EigenvalueFamily {
            label: damping,
            index,
            value: Complex64::new(-theta * nu, 0.0),
        });
    };
    for n in 0..=n_max {
        push_mode(
            &mut out,
            n,
            1 + 2 * n,
            FamilyLabel::OddDamping,
            FamilyLabel::OddPrecessionPlus,
            FamilyLabel::OddPrecessionMinus,
        );
    }
    for n in 1..=n_max {
        push_mode(
            &mut out,
            n,
            2 * n,
            FamilyLabel::EvenDamping,
            FamilyLabel::EvenPrecessionPlus,
            FamilyLabel::EvenPrecessionMinus,
        );
    }
    out
}

/// Analytic entries sorted by eigenvalue magnitude, zero excluded.
pub fn analytic_nonzero_sorted(params: &PhysicalParams, n_max: usize) -> Vec<EigenvalueFamily> {
    let mut entries: Vec<EigenvalueFamily> = analytic_eigenvalues(params, n_max)
        .into_iter()
        .filter(|e| e.label != FamilyLabel::Zero)
        .collect();
    entries.sort_by(|a, b| {
        a.value
            .norm()
            .partial_cmp(&b.value.norm())
            .unwrap()
            .then(a.value.im.partial_cmp(&b.value.im).unwrap())
    });
    entries
}

/// Discretization of the linear operator about a constant equilibrium.
///
/// The stacked nodal system reads `z_dot = (C kron L_h) z` with coupling
/// matrix `C = nu I + [a]x` and `L_h` the mass-solved Neumann stiffness;
/// the mass and stiffness factors are kept for the generalized eigenproblem.
pub struct LinearOperator {
    mesh: Mesh,
    params: PhysicalParams,
    base: Equilibrium,
    coupling: [[f64; 3]; 3],
    disc: Discretization,
}

/// Build the discrete linear operator about `a` on `mesh`.
pub fn assemble_linear_operator(
    a: Equilibrium,
    params: &PhysicalParams,
    mesh: &Mesh,
) -> LinearOperator {
    let nu = params.nu();
    let v = a.vector();
    let coupling = [
        [nu, -v.z, v.y],
        [v.z, nu, -v.x],
        [-v.y, v.x, nu],
    ];
    LinearOperator {
        mesh: mesh.clone(),
        params: *params,
        base: a,
        coupling,
        disc: Discretization::new(mesh.clone()),
    }
}

impl LinearOperator {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn base(&self) -> Equilibrium {
        self.base
    }

    /// The 3x3 coupling matrix `nu I + [a]x`.
    pub fn coupling_matrix(&self) -> [[f64; 3]; 3] {
        self.coupling
    }

    /// Mass factor of the generalized eigenproblem (one scalar block).
    pub fn mass(&self) -> &TridiagonalMatrix {
        &self.disc.mass
    }

    /// Stiffness factor of the generalized eigenproblem (one scalar block).
    pub fn stiffness(&self) -> &TridiagonalMatrix {
        &self.disc.stiffness
    }

    /// Apply the operator to a stacked nodal field: `out = C * w(z)`.
    ///
    /// The curvature solve goes through the same mass-solved path as the
    /// nonlinear dynamics, so a spatially constant input maps to an exactly
    /// zero output.
    pub fn apply(&self, z: &[Vec3], out: &mut [Vec3], scratch: &mut FieldScratch) {
        second_derivative_into(&self.disc, z, scratch);
        for (o, w) in out.iter_mut().zip(&scratch.curvature) {
            *o = self.apply_coupling(*w);
        }
    }

    fn apply_coupling(&self, w: Vec3) -> Vec3 {
        let c = &self.coupling;
        Vec3::new(
            c[0][0] * w.x + c[0][1] * w.y + c[0][2] * w.z,
            c[1][0] * w.x + c[1][1] * w.y + c[1][2] * w.z,
            c[2][0] * w.x + c[2][1] * w.y + c[2][2] * w.z,
        )
    }

    /// Dense scalar block `L_h = -M^{-1} K`.
    pub fn dense_laplacian(&self) -> DMatrix<f64> {
        let n = self.mesh.n_nodes();
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.disc.stiffness.mul_vec(&e);
            let solved = self.disc.mass.solve(&col);
            for i in 0..n {
                out[(i, j)] = -solved[i];
            }
        }
        out
    }

    /// Dense stacked operator `C kron L_h` in component-major layout
    /// (rows/columns `p * n_nodes + node` for component p).
    pub fn dense_operator(&self) -> DMatrix<f64> {
        let n = self.mesh.n_nodes();
        let lap = self.dense_laplacian();
        let mut out = DMatrix::zeros(3 * n, 3 * n);
        for p in 0..3 {
            for q in 0..3 {
                let c = self.coupling[p][q];
                if c == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        out[(p * n + i, q * n + j)] = c * lap[(i, j)];
                    }
                }
            }
        }
        out
    }

    /// Frequencies of the scalar pencil `K v = theta M v`, ascending.
    ///
    /// Solved in mass-weighted form: with `M = L L^T`, the matrix
    /// `L^{-1} K L^{-T}` is symmetric and shares the pencil's spectrum.
    pub fn scalar_frequencies(&self) -> Vec<f64> {
        let n = self.mesh.n_nodes();
        let mut mass = DMatrix::zeros(n, n);
        let mut stiff = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                mass[(i, j)] = self.disc.mass.entry(i, j);
                stiff[(i, j)] = self.disc.stiffness.entry(i, j);
            }
        }
        let chol = Cholesky::new(mass).expect("mass matrix is positive definite");
        let l = chol.l();
        let x = l
            .solve_lower_triangular(&stiff)
            .expect("triangular factor is invertible");
        let b = l
            .solve_lower_triangular(&x.transpose())
            .expect("triangular factor is invertible")
            .transpose();
        let sym = 0.5 * (&b + b.transpose());
        let mut theta: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        theta.sort_by(|a, b| a.partial_cmp(b).unwrap());
        theta
    }

    /// All 3 n_nodes eigenvalues of the stacked operator, sorted by
    /// magnitude (imaginary part breaking ties).
    ///
    /// Each scalar frequency theta contributes the damping value
    /// `-nu theta` and the precession pair `-nu theta +- i theta`, the
    /// eigenvalues of `-theta C`.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let nu = self.params.nu();
        let mut out = Vec::with_capacity(3 * self.mesh.n_nodes());
        for &theta in &self.scalar_frequencies() {
            out.push(Complex64::new(-nu * theta, 0.0));
            out.push(Complex64::new(-nu * theta, theta));
            out.push(Complex64::new(-nu * theta, -theta));
        }
        sort_by_magnitude(&mut out);
        out
    }
}

fn sort_by_magnitude(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        a.norm()
            .partial_cmp(&b.norm())
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
            .then(a.re.partial_cmp(&b.re).unwrap())
    });
}

/// Pairing of one analytic eigenvalue with its nearest discrete partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumMatch {
    pub label: FamilyLabel,
    pub index: usize,
    pub analytic: Complex64,
    /// Nearest unclaimed discrete eigenvalue, if within tolerance.
    pub discrete: Option<Complex64>,
    pub relative_error: Option<f64>,
}

/// Analytic-vs-discrete comparison of the linear spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumComparison {
    /// Discrete eigenvalues with magnitude at most [`ZERO_TOLERANCE`].
    pub zero_cluster: Vec<Complex64>,
    /// One entry per nonzero analytic eigenvalue, ascending magnitude.
    pub matches: Vec<SpectrumMatch>,
    /// Discrete eigenvalues claimed by no analytic entry, ascending magnitude.
    pub surplus: Vec<Complex64>,
}

impl SpectrumComparison {
    /// Relative errors of the `count` smallest-magnitude matched entries.
    ///
    /// Returns None if any of those entries failed to match.
    pub fn smallest_matched_errors(&self, count: usize) -> Option<Vec<f64>> {
        self.matches
            .iter()
            .take(count)
            .map(|m| m.relative_error)
            .collect()
    }
}

/// Compare the discrete spectrum of `op` against the analytic families up
/// to counter `n_max`.
///
/// Matching is nearest-neighbor in the complex plane, each discrete value
/// claimable once, accepted when the relative distance is at most
/// [`MATCH_TOLERANCE`]. Distorted high modes therefore stay unmatched and
/// appear in the surplus list together with the discrete modes beyond the
/// analytic window.
pub fn compare_spectrum(op: &LinearOperator, n_max: usize) -> SpectrumComparison {
    let discrete = op.eigenvalues();
    let zero_cluster: Vec<Complex64> = discrete
        .iter()
        .copied()
        .filter(|v| v.norm() <= ZERO_TOLERANCE)
        .collect();
    let mut pool: Vec<Complex64> = discrete
        .iter()
        .copied()
        .filter(|v| v.norm() > ZERO_TOLERANCE)
        .collect();
    let mut matches = Vec::new();
    for entry in analytic_nonzero_sorted(&op.params, n_max) {
        let nearest = pool
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - entry.value)
                    .norm()
                    .partial_cmp(&(*b - entry.value).norm())
                    .unwrap()
            })
            .map(|(i, v)| (i, *v));
        let mut matched = SpectrumMatch {
            label: entry.label,
            index: entry.index,
            analytic: entry.value,
            discrete: None,
            relative_error: None,
        };
        if let Some((i, v)) = nearest {
            let rel = (v - entry.value).norm() / entry.value.norm();
            if rel <= MATCH_TOLERANCE {
                matched.discrete = Some(v);
                matched.relative_error = Some(rel);
                pool.swap_remove(i);
            }
        }
        matches.push(matched);
    }
    sort_by_magnitude(&mut pool);
    SpectrumComparison {
        zero_cluster,
        matches,
        surplus: pool,
    }
}

/// Stacked nodal state of the linear system: the field `z` and the constant
/// equilibrium the dynamics were linearized about.
#[derive(Debug, Clone)]
pub struct LinearState {
    field: MagnetizationField,
    base: Equilibrium,
}

impl LinearState {
    pub fn new(field: MagnetizationField, base: Equilibrium) -> LinearState {
        LinearState { field, base }
    }

    pub fn from_values(mesh: Mesh, values: Vec<Vec3>, base: Equilibrium) -> Result<LinearState> {
        Ok(LinearState {
            field: MagnetizationField::from_values(mesh, values)?,
            base,
        })
    }

    pub fn uniform(mesh: Mesh, v: Vec3, base: Equilibrium) -> Result<LinearState> {
        Ok(LinearState {
            field: MagnetizationField::uniform(mesh, v)?,
            base,
        })
    }

    pub fn field(&self) -> &MagnetizationField {
        &self.field
    }

    pub fn base(&self) -> Equilibrium {
        self.base
    }
}

/// Integrate the linear closed loop `z_dot = nu z_xx + a x z_xx + u(z, t)`.
///
/// Unlike the full dynamics the state carries no norm constraint, so
/// renormalization never applies; an explicit `renormalize = true` request
/// is ignored with a warning. Diagnostics measure distance to the control
/// target.
pub fn integrate_linear(
    z0: &LinearState,
    params: &PhysicalParams,
    spec: &ControlSpec,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    check_dt_against_mesh(z0.field.mesh(), params, opts)?;
    if opts.renormalize() == Some(true) {
        log::warn!("renormalization does not apply to the linear system; ignoring the request");
    }
    let op = assemble_linear_operator(z0.base, params, z0.field.mesh());
    let (n_steps, dt) = step_count(opts.dt(), opts.t_final());
    let cfg = DriverConfig {
        dt,
        n_steps,
        stride: opts.record_stride().unwrap_or_else(|| auto_stride(n_steps)),
        renormalize: false,
        target: Some(spec.target().vector()),
    };
    let mut scratch = FieldScratch::new(z0.field.mesh().n_nodes());
    let rhs = |t: f64, y: &[Vec3], out: &mut [Vec3]| {
        op.apply(y, out, &mut scratch);
        for (o, z) in out.iter_mut().zip(y) {
            *o += spec.control_input(*z, t);
        }
        check_finite(out, t)
    };
    run_fixed_step(z0.field.mesh(), z0.field.values().to_vec(), &cfg, rhs)
}
