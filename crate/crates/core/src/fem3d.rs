//! Three-dimensional plate-box finite elements.
//!
//! Trial fields are tensor products of bilinear functions in `(x1, x2)` and
//! cubic Hermite functions in `x3`. Every node carries, per displacement
//! component, its value and its `x3`-derivative, so `u_{alpha,33}` is square
//! integrable even with a single layer through the thickness.
//!
//! Two element formulations are offered. [`Formulation::Displacement`] takes
//! every strain from the displacement gradient. It locks twice on thin
//! plates: the transverse shear cannot vanish for bilinear in-plane fields,
//! and the thickness strain, being continuous between cells, cannot follow
//! the cell-wise Poisson contraction of the bending strains.
//! [`Formulation::Mixed`] cures both:
//!
//! - assumed transverse shear as in the mixed-interpolated bilinear plate
//!   element: `E13` is tied to its values on the cell midline `xi = 0` and
//!   `E23` to `eta = 0`;
//! - enhanced thickness strain: `E33` receives the two cell-internal modes
//!   `zeta xi` and `zeta eta` (`zeta` the thickness coordinate on
//!   `[-1, 1]`), which let the thickness strain follow the Poisson
//!   contraction of the bending strains; they are eliminated by static
//!   condensation.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{gauss_legendre, gauss_unit, Hermite};
use crate::error::{Error, Result};
use crate::material::{
    material_energy_form, min_eigenvalue, ElasticityTensor, EnergyForm, KappaEnergyParams,
};
use crate::mesh::Mesh3D;
use crate::sparse::{dot, norm, solve_spd, CsrMatrix, SolveStats, SolverOptions};

pub const DOFS_PER_NODE: usize = 6;
pub const ELEMENT_DOFS: usize = 48;

pub type ElementMatrix = SMatrix<f64, ELEMENT_DOFS, ELEMENT_DOFS>;
pub type ElementVector = SVector<f64, ELEMENT_DOFS>;
/// Maps element DOFs to `(E11, E22, E33, E23, E13, E12, u1,33, u2,33)`.
pub type StrainOperator = SMatrix<f64, 8, ELEMENT_DOFS>;

/// Global index of `(node, component, kind)`; kind 0 is the value, 1 the
/// `x3`-derivative.
#[inline]
pub fn dof(node: usize, comp: usize, kind: usize) -> usize {
    node * DOFS_PER_NODE + comp * 2 + kind
}

/// Reference corners of the bilinear factor, counter-clockwise.
pub const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Displacement,
    #[default]
    Mixed,
}

/// Axis-aligned cell: lower corner and edge lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub origin: [f64; 3],
    pub size: [f64; 3],
}

impl CellGeometry {
    pub fn of(mesh: &Mesh3D, cell: usize) -> Self {
        let c = &mesh.cells[cell];
        let a = mesh.nodes[c[0]];
        let b = mesh.nodes[c[6]];
        CellGeometry {
            origin: a,
            size: [b[0] - a[0], b[1] - a[1], b[2] - a[2]],
        }
    }

    pub fn point(&self, xi: f64, eta: f64, s: f64) -> [f64; 3] {
        [
            self.origin[0] + 0.5 * (xi + 1.0) * self.size[0],
            self.origin[1] + 0.5 * (eta + 1.0) * self.size[1],
            self.origin[2] + s * self.size[2],
        ]
    }

    /// `dx / (dxi deta ds)`.
    pub fn jacobian(&self) -> f64 {
        0.25 * self.size[0] * self.size[1] * self.size[2]
    }
}

fn bilinear(a: usize, xi: f64, eta: f64) -> f64 {
    let (xa, ya) = CORNERS[a];
    0.25 * (1.0 + xi * xa) * (1.0 + eta * ya)
}

/// Shape function values of the 48 element DOFs for the given component.
pub fn shape_values(geom: &CellGeometry, xi: f64, eta: f64, s: f64) -> [f64; 16] {
    let h = Hermite::eval(s, geom.size[2]);
    let mut out = [0.0; 16];
    for n in 0..8 {
        let (a, layer) = (n % 4, n / 4);
        let na = bilinear(a, xi, eta);
        for k in 0..2 {
            out[n * 2 + k] = na * h.value[2 * layer + k];
        }
    }
    out
}

/// Strain operator at a reference point.
pub fn strain_operator(
    geom: &CellGeometry,
    xi: f64,
    eta: f64,
    s: f64,
    formulation: Formulation,
) -> StrainOperator {
    let [hx, hy, hz] = geom.size;
    let h = Hermite::eval(s, hz);
    let mut b = StrainOperator::zeros();
    for n in 0..8 {
        let (a, layer) = (n % 4, n / 4);
        let (xa, ya) = CORNERS[a];
        let na = bilinear(a, xi, eta);
        let na_x = 0.25 * xa * (1.0 + eta * ya) * 2.0 / hx;
        let na_y = 0.25 * ya * (1.0 + xi * xa) * 2.0 / hy;
        let (na_13, na_23) = match formulation {
            Formulation::Displacement => (na, na),
            Formulation::Mixed => (bilinear(a, 0.0, eta), bilinear(a, xi, 0.0)),
        };
        for k in 0..2 {
            let hv = h.value[2 * layer + k];
            let hd = h.d1[2 * layer + k];
            let hdd = h.d2[2 * layer + k];
            let c0 = n * DOFS_PER_NODE + k;
            let (c1, c2) = (c0 + 2, c0 + 4);
            b[(0, c0)] = na_x * hv;
            b[(1, c1)] = na_y * hv;
            b[(2, c2)] = na * hd;
            b[(3, c1)] = 0.5 * na_23 * hd;
            b[(3, c2)] = 0.5 * na_y * hv;
            b[(4, c0)] = 0.5 * na_13 * hd;
            b[(4, c2)] = 0.5 * na_x * hv;
            b[(5, c0)] = 0.5 * na_y * hv;
            b[(5, c1)] = 0.5 * na_x * hv;
            b[(6, c0)] = na * hdd;
            b[(7, c1)] = na * hdd;
        }
    }
    b
}

/// In-plane and through-thickness Gauss rules of the element: 2x2 in the
/// plane, 4 points through the thickness.
pub struct ElementRule {
    pub inplane: (Vec<f64>, Vec<f64>),
    pub thickness: (Vec<f64>, Vec<f64>),
}

impl ElementRule {
    pub fn standard() -> Self {
        ElementRule {
            inplane: gauss_legendre(2),
            thickness: gauss_unit(4),
        }
    }

    /// `(xi, eta, s, weight)` including the cell Jacobian.
    pub fn points(&self, geom: &CellGeometry) -> Vec<(f64, f64, f64, f64)> {
        let jac = geom.jacobian();
        let (gx, gw) = &self.inplane;
        let (tx, tw) = &self.thickness;
        let mut pts = Vec::with_capacity(gx.len() * gx.len() * tx.len());
        for (i, &xi) in gx.iter().enumerate() {
            for (j, &eta) in gx.iter().enumerate() {
                for (k, &s) in tx.iter().enumerate() {
                    pts.push((xi, eta, s, gw[i] * gw[j] * tw[k] * jac));
                }
            }
        }
        pts
    }
}

/// Number of enhanced thickness-strain modes of the mixed element.
pub const ENHANCED_MODES: usize = 2;
type EnhancedOperator = SMatrix<f64, 8, ENHANCED_MODES>;
type CouplingMatrix = SMatrix<f64, ELEMENT_DOFS, ENHANCED_MODES>;
type EnhancedMatrix = SMatrix<f64, ENHANCED_MODES, ENHANCED_MODES>;

/// Enhanced `E33` modes at a reference point; `zeta = 2 s - 1`.
pub fn enhanced_modes(xi: f64, eta: f64, s: f64) -> [f64; ENHANCED_MODES] {
    let zeta = 2.0 * s - 1.0;
    [zeta * xi, zeta * eta]
}

fn enhanced_operator(xi: f64, eta: f64, s: f64) -> EnhancedOperator {
    let mut g = EnhancedOperator::zeros();
    for (j, m) in enhanced_modes(xi, eta, s).into_iter().enumerate() {
        g[(2, j)] = m;
    }
    g
}

/// Blocks of the element energy before condensation.
struct ElementBlocks {
    kuu: ElementMatrix,
    kua: CouplingMatrix,
    kaa: EnhancedMatrix,
}

fn element_blocks(geom: &CellGeometry, form: &EnergyForm, formulation: Formulation) -> ElementBlocks {
    let mut kuu = ElementMatrix::zeros();
    let mut kua = CouplingMatrix::zeros();
    let mut kaa = EnhancedMatrix::zeros();
    for (xi, eta, s, w) in ElementRule::standard().points(geom) {
        let b = strain_operator(geom, xi, eta, s, formulation);
        let mb = form * b;
        kuu.gemm_tr(w, &b, &mb, 1.0);
        if formulation == Formulation::Mixed {
            let g = enhanced_operator(xi, eta, s);
            let mg = form * g;
            kua.gemm_tr(w, &b, &mg, 1.0);
            kaa.gemm_tr(w, &g, &mg, 1.0);
        }
    }
    ElementBlocks { kuu, kua, kaa }
}

/// Solves `kaa x = rhs` for the enhanced parameters. `kaa` is positive
/// definite whenever the normal stiffness `M33` is positive.
fn enhanced_solve<const C: usize>(
    kaa: &EnhancedMatrix,
    rhs: &SMatrix<f64, ENHANCED_MODES, C>,
) -> SMatrix<f64, ENHANCED_MODES, C> {
    kaa.cholesky()
        .expect("enhanced block is positive definite for admissible energies")
        .solve(rhs)
}

/// Element matrix such that `1/2 U^T K_e U` is the element energy, the
/// enhanced parameters (mixed formulation) minimized out.
pub fn element_stiffness(geom: &CellGeometry, form: &EnergyForm, formulation: Formulation) -> ElementMatrix {
    let blocks = element_blocks(geom, form, formulation);
    let mut k = blocks.kuu;
    if formulation == Formulation::Mixed {
        let x = enhanced_solve(&blocks.kaa, &blocks.kua.transpose());
        k -= blocks.kua * x;
    }
    // exact symmetry
    for i in 0..ELEMENT_DOFS {
        for j in 0..i {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `f_e = ∫ N . b dx` for a body force `b(x)`.
pub fn element_load(geom: &CellGeometry, load: &(impl Fn([f64; 3]) -> [f64; 3] + ?Sized)) -> ElementVector {
    let mut f = ElementVector::zeros();
    for (xi, eta, s, w) in ElementRule::standard().points(geom) {
        let bx = load(geom.point(xi, eta, s));
        if bx == [0.0; 3] {
            continue;
        }
        let n = shape_values(geom, xi, eta, s);
        for node in 0..8 {
            for c in 0..3 {
                for k in 0..2 {
                    f[node * DOFS_PER_NODE + c * 2 + k] += w * n[node * 2 + k] * bx[c];
                }
            }
        }
    }
    f
}

/// Assembled quadratic functional `F(u) = 1/2 u.K u - f.u` with its clamped
/// DOFs.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
    /// `true` for unconstrained DOFs.
    pub free: Vec<bool>,
    pub mesh: Arc<Mesh3D>,
    pub params: KappaEnergyParams,
    pub formulation: Formulation,
    pub form: EnergyForm,
}

impl SparseSystem {
    pub fn dofs(&self) -> usize {
        self.load.len()
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }
}

/// Relative tolerance on the smallest eigenvalue of the energy form.
const FORM_PSD_TOL: f64 = 1e-12;

/// Assembles the functional on `mesh` for the (possibly modified) energy and
/// the body force `load`.
pub fn assemble(
    mesh: Arc<Mesh3D>,
    material: &ElasticityTensor,
    params: &KappaEnergyParams,
    load: &(dyn Fn([f64; 3]) -> [f64; 3] + Sync),
    formulation: Formulation,
) -> Result<SparseSystem> {
    material.validate()?;
    let form = material_energy_form(material, params)?;
    let scale = form.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lmin = min_eigenvalue(&form);
    if lmin < -FORM_PSD_TOL * scale {
        return Err(Error::IndefiniteEnergy {
            kappa: params.kappa,
            epsilon: params.epsilon,
            min_eigenvalue: lmin,
        });
    }

    let ndof = mesh.node_count() * DOFS_PER_NODE;
    let locals: Vec<(ElementMatrix, ElementVector)> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|c| {
            let geom = CellGeometry::of(&mesh, c);
            (
                element_stiffness(&geom, &form, formulation),
                element_load(&geom, load),
            )
        })
        .collect();

    let mut triplets = Vec::with_capacity(mesh.cells.len() * ELEMENT_DOFS * ELEMENT_DOFS);
    let mut f = vec![0.0; ndof];
    for (cell, (ke, fe)) in mesh.cells.iter().zip(&locals) {
        let map = element_dof_map(cell);
        for a in 0..ELEMENT_DOFS {
            f[map[a]] += fe[a];
            for b in 0..ELEMENT_DOFS {
                triplets.push((map[a], map[b], ke[(a, b)]));
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(ndof, triplets);
    let free = (0..ndof).map(|d| !mesh.is_clamped(d / DOFS_PER_NODE)).collect();
    Ok(SparseSystem {
        matrix,
        load: f,
        free,
        mesh,
        params: *params,
        formulation,
        form,
    })
}

pub fn element_dof_map(cell: &[usize; 8]) -> [usize; ELEMENT_DOFS] {
    let mut map = [0usize; ELEMENT_DOFS];
    for (n, &node) in cell.iter().enumerate() {
        for l in 0..DOFS_PER_NODE {
            map[n * DOFS_PER_NODE + l] = node * DOFS_PER_NODE + l;
        }
    }
    map
}

/// Displacement coefficients on a plate mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField3D {
    pub mesh: Arc<Mesh3D>,
    pub coeffs: Vec<f64>,
    /// Low-order part of the coefficients left by extended-precision
    /// refinement: the represented field is `coeffs + correction`. It is
    /// below the rounding unit of `coeffs` and only matters for residuals.
    /// Operations that build new fields reset it to zero.
    pub correction: Vec<f64>,
    /// Thickness parameter the field belongs to.
    pub epsilon: f64,
}

impl DisplacementField3D {
    pub fn zeros(mesh: Arc<Mesh3D>, epsilon: f64) -> Self {
        let n = mesh.node_count() * DOFS_PER_NODE;
        DisplacementField3D {
            mesh,
            coeffs: vec![0.0; n],
            correction: vec![0.0; n],
            epsilon,
        }
    }

    /// Samples `u` and `∂3 u` at the nodes; clamped nodes are left at zero.
    pub fn from_fn(mesh: Arc<Mesh3D>, epsilon: f64, f: impl Fn([f64; 3]) -> ([f64; 3], [f64; 3])) -> Self {
        let mut field = Self::zeros(mesh.clone(), epsilon);
        for (node, x) in mesh.nodes.iter().enumerate() {
            if mesh.is_clamped(node) {
                continue;
            }
            let (u, du) = f(*x);
            for c in 0..3 {
                field.coeffs[dof(node, c, 0)] = u[c];
                field.coeffs[dof(node, c, 1)] = du[c];
            }
        }
        field
    }

    pub fn value(&self, node: usize, comp: usize) -> f64 {
        self.coeffs[dof(node, comp, 0)]
    }

    pub fn slope(&self, node: usize, comp: usize) -> f64 {
        self.coeffs[dof(node, comp, 1)]
    }

    pub fn cell_dofs(&self, cell: usize) -> ElementVector {
        let map = element_dof_map(&self.mesh.cells[cell]);
        ElementVector::from_fn(|i, _| self.coeffs[map[i]])
    }

    /// `(E11, E22, E33, E23, E13, E12, u1,33, u2,33)` at a reference point
    /// of a cell, from the displacement alone. The enhanced part of `E33`
    /// of the mixed formulation is not included; see [`Self::enhanced_strain_at`].
    pub fn strain_at(&self, cell: usize, xi: f64, eta: f64, s: f64, formulation: Formulation) -> [f64; 8] {
        let geom = CellGeometry::of(&self.mesh, cell);
        let e = strain_operator(&geom, xi, eta, s, formulation) * self.cell_dofs(cell);
        let mut out = [0.0; 8];
        out.copy_from_slice(e.as_slice());
        out
    }

    /// Full mixed-formulation strain, including the condensed enhanced
    /// thickness modes recovered for the energy `form`.
    pub fn enhanced_strain_at(&self, cell: usize, xi: f64, eta: f64, s: f64, form: &EnergyForm) -> [f64; 8] {
        let geom = CellGeometry::of(&self.mesh, cell);
        let blocks = element_blocks(&geom, form, Formulation::Mixed);
        let u = self.cell_dofs(cell);
        let alpha = -enhanced_solve(&blocks.kaa, &(blocks.kua.transpose() * u));
        let mut out = self.strain_at(cell, xi, eta, s, Formulation::Mixed);
        out[2] += enhanced_modes(xi, eta, s)
            .iter()
            .zip(alpha.iter())
            .map(|(m, a)| m * a)
            .sum::<f64>();
        out
    }

    pub fn displacement_at(&self, cell: usize, xi: f64, eta: f64, s: f64) -> [f64; 3] {
        let geom = CellGeometry::of(&self.mesh, cell);
        let n = shape_values(&geom, xi, eta, s);
        let u = self.cell_dofs(cell);
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            for node in 0..8 {
                for k in 0..2 {
                    *o += n[node * 2 + k] * u[node * DOFS_PER_NODE + c * 2 + k];
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&v| v == 0.0)
    }

    /// Copy with the extended-precision correction dropped.
    pub fn rounded(&self) -> Self {
        let mut u = self.clone();
        u.correction.iter_mut().for_each(|v| *v = 0.0);
        u
    }

    /// Node-ordered CSV with header `x1,x2,x3,u1,u2,u3`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,x3,u1,u2,u3\n");
        for (n, x) in self.mesh.nodes.iter().enumerate() {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e}\n",
                x[0],
                x[1],
                x[2],
                self.value(n, 0),
                self.value(n, 1),
                self.value(n, 2)
            ));
        }
        s
    }
}

/// Unique constrained minimizer of the assembled functional.
pub fn solve(system: &SparseSystem, opts: &SolverOptions) -> Result<DisplacementField3D> {
    solve_with_stats(system, opts).map(|(u, _)| u)
}

pub fn solve_with_stats(
    system: &SparseSystem,
    opts: &SolverOptions,
) -> Result<(DisplacementField3D, SolveStats)> {
    let (reduced, map) = system.matrix.principal_submatrix(&system.free);
    let rhs: Vec<f64> = map.iter().map(|&i| system.load[i]).collect();
    if reduced.n == 0 {
        return Err(Error::Singular("every DOF is constrained".into()));
    }
    let sol = solve_spd(&reduced, &rhs, opts)?;
    let mut field = DisplacementField3D::zeros(system.mesh.clone(), system.params.epsilon);
    for (k, &i) in map.iter().enumerate() {
        field.coeffs[i] = sol.x[k];
        field.correction[i] = sol.correction[k];
    }
    Ok((field, sol.stats))
}

fn check_dims(system: &SparseSystem, field: &DisplacementField3D) {
    assert_eq!(
        system.dofs(),
        field.coeffs.len(),
        "field and system have different DOF counts"
    );
}

/// `‖(K u - f)_free‖ / max(‖f_free‖, tiny)`, with `K u` accumulated in
/// extended precision so that the value reflects the field rather than the
/// rounding of the product.
pub fn stationarity_residual(system: &SparseSystem, field: &DisplacementField3D) -> f64 {
    check_dims(system, field);
    let r = system
        .matrix
        .residual_extended(&system.load, &field.coeffs, &field.correction);
    let r: Vec<f64> = (0..system.dofs())
        .filter(|&i| system.free[i])
        .map(|i| r[i])
        .collect();
    let f: Vec<f64> = (0..system.dofs())
        .filter(|&i| system.free[i])
        .map(|i| system.load[i])
        .collect();
    norm(&r) / norm(&f).max(f64::MIN_POSITIVE)
}

/// `1/2 u.K u - f.u`.
pub fn total_energy(system: &SparseSystem, field: &DisplacementField3D) -> f64 {
    check_dims(system, field);
    0.5 * system.matrix.quadratic_form(&field.coeffs) - dot(&system.load, &field.coeffs)
}

/// Root mean square over the thickness, integrated over the cross-section:
/// `sqrt( ∫_ω (1/2t) ∫ (E13² + E23²) dx3 dx )`.
pub fn transverse_shear_norm(field: &DisplacementField3D, formulation: Formulation) -> f64 {
    let mesh = &field.mesh;
    let rule = ElementRule::standard();
    let total: f64 = (0..mesh.cells.len())
        .map(|c| {
            let geom = CellGeometry::of(mesh, c);
            rule.points(&geom)
                .into_iter()
                .map(|(xi, eta, s, w)| {
                    let e = field.strain_at(c, xi, eta, s, formulation);
                    w * (e[3] * e[3] + e[4] * e[4])
                })
                .sum::<f64>()
        })
        .sum();
    (total / (2.0 * mesh.half_thickness)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::ElasticityTensor;
    use crate::mesh::build_plate_mesh;

    fn params(kappa: f64, eps: f64) -> KappaEnergyParams {
        KappaEnergyParams::new(kappa, eps, 0.01).unwrap()
    }

    fn uniform(q: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
        move |_| [0.0, 0.0, q]
    }

    #[test]
    fn zero_load_gives_zero_minimizer() {
        let mesh = Arc::new(build_plate_mesh(10.0, 0.5, 3, 3, 1).unwrap());
        let mat = ElasticityTensor::isotropic(1.5, 1.0).unwrap();
        let sys = assemble(mesh, &mat, &params(0.0, 0.01), &uniform(0.0), Formulation::Mixed).unwrap();
        assert!(sys.load.iter().all(|&v| v == 0.0));
        let u = solve(&sys, &SolverOptions::default()).unwrap();
        assert!(u.is_zero());
        assert_eq!(total_energy(&sys, &u), 0.0);
    }

    #[test]
    fn rigid_translation_has_zero_energy() {
        let mesh = Arc::new(build_plate_mesh(10.0, 0.5, 2, 3, 2).unwrap());
        let mat = ElasticityTensor::isotropic(1.5, 1.0).unwrap();
        for formulation in [Formulation::Displacement, Formulation::Mixed] {
            let sys = assemble(
                mesh.clone(),
                &mat,
                &params(1.0, 0.003),
                &uniform(1.0),
                formulation,
            )
            .unwrap();
            for c in 0..3 {
                let mut t = vec![0.0; sys.dofs()];
                for n in 0..mesh.node_count() {
                    t[dof(n, c, 0)] = 1.0;
                }
                let e = sys.matrix.quadratic_form(&t);
                let scale: f64 = sys.matrix.diagonal().iter().map(|v| v.abs()).sum();
                assert!(e.abs() < 1e-13 * scale, "component {c}: {e} vs {scale}");
            }
        }
    }

    #[test]
    fn stiffness_is_exactly_symmetric() {
        let mesh = Arc::new(build_plate_mesh(4.0, 0.3, 3, 2, 2).unwrap());
        let mat = ElasticityTensor::isotropic(0.7, 1.2).unwrap();
        let sys = assemble(mesh, &mat, &params(0.5, 0.004), &uniform(1.0), Formulation::Mixed).unwrap();
        assert_eq!(sys.matrix.asymmetry(), 0.0);
    }

    #[test]
    fn anisotropic_material_with_kappa_rejected() {
        let mesh = Arc::new(build_plate_mesh(4.0, 0.3, 1, 1, 1).unwrap());
        let c = ElasticityTensor::isotropic(1.0, 1.0).unwrap().voigt();
        let mat = ElasticityTensor::general(c).unwrap();
        let r = assemble(
            mesh.clone(),
            &mat,
            &params(0.5, 0.004),
            &uniform(1.0),
            Formulation::Mixed,
        );
        assert!(matches!(r, Err(Error::InvalidMaterial(_))));
        assert!(assemble(mesh, &mat, &params(0.0, 0.004), &uniform(1.0), Formulation::Mixed).is_ok());
    }

    #[test]
    fn indefinite_modified_energy_rejected() {
        // large kappa at small thickness overwhelms the normal stiffness
        let mesh = Arc::new(build_plate_mesh(4.0, 0.3, 1, 1, 1).unwrap());
        let mat = ElasticityTensor::isotropic(1.5, 1.0).unwrap();
        let r = assemble(
            mesh,
            &mat,
            &params(10.0, 0.01 / 64.0),
            &uniform(1.0),
            Formulation::Mixed,
        );
        assert!(matches!(r, Err(Error::IndefiniteEnergy { .. })));
    }

    #[test]
    fn solve_is_linear_in_load() {
        let mesh = Arc::new(build_plate_mesh(10.0, 0.5, 4, 4, 1).unwrap());
        let mat = ElasticityTensor::isotropic(1.5, 1.0).unwrap();
        let p = params(0.0, 0.01);
        let s1 = assemble(mesh.clone(), &mat, &p, &uniform(1.0), Formulation::Mixed).unwrap();
        let s3 = assemble(mesh, &mat, &p, &uniform(3.0), Formulation::Mixed).unwrap();
        let u1 = solve(&s1, &SolverOptions::default()).unwrap();
        let u3 = solve(&s3, &SolverOptions::default()).unwrap();
        let scale = u1.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in u1.coeffs.iter().zip(&u3.coeffs) {
            assert!((3.0 * a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn residual_of_zero_field_is_one() {
        let mesh = Arc::new(build_plate_mesh(10.0, 0.5, 3, 3, 1).unwrap());
        let mat = ElasticityTensor::isotropic(1.5, 1.0).unwrap();
        let sys = assemble(
            mesh.clone(),
            &mat,
            &params(0.0, 0.01),
            &uniform(2.0),
            Formulation::Mixed,
        )
        .unwrap();
        let zero = DisplacementField3D::zeros(mesh, 0.01);
        assert_eq!(stationarity_residual(&sys, &zero), 1.0);
    }

    #[test]
    fn energy_at_minimizer_is_half_negative_work() {
        let mesh = Arc::new(build_plate_mesh(10.0, 0.5, 4, 4, 1).unwrap());
        let mat = ElasticityTensor::isotropic(1.5, 1.0).unwrap();
        let sys = assemble(mesh, &mat, &params(0.0, 0.01), &uniform(1e-3), Formulation::Mixed).unwrap();
        let u = solve(&sys, &SolverOptions::default()).unwrap();
        let e = total_energy(&sys, &u);
        let work = dot(&sys.load, &u.coeffs);
        assert!(e < 0.0);
        assert!((e + 0.5 * work).abs() < 1e-10 * e.abs());
        assert!(stationarity_residual(&sys, &u) < 1e-10);
    }

    #[test]
    fn shear_norm_of_pure_bending_field() {
        // u = (-x3 a x1, 0, a x1^2 / 2) is shear free and strain E11 = -a x3
        let mesh = Arc::new(build_plate_mesh(2.0, 0.25, 3, 3, 1).unwrap());
        let a = 0.1;
        let mut u = DisplacementField3D::zeros(mesh.clone(), 0.01);
        for (n, x) in mesh.nodes.iter().enumerate() {
            u.coeffs[dof(n, 0, 0)] = -a * x[0] * x[2];
            u.coeffs[dof(n, 0, 1)] = -a * x[0];
            u.coeffs[dof(n, 2, 0)] = 0.5 * a * x[0] * x[0];
        }
        // bilinear u3 cannot carry x1^2 exactly; the assumed strain still
        // sees zero shear on a uniform grid, the standard one does not
        assert!(transverse_shear_norm(&u, Formulation::Mixed) < 1e-14);
        assert!(transverse_shear_norm(&u, Formulation::Displacement) > 1e-3);
    }
}
