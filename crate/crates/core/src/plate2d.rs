//! Limit plate models on the cross-section: the clamped Kirchhoff–Love
//! plate, the Kirchhoff–Love reconstruction of a 3D field, and the
//! Reissner–Mindlin kinematic fit of a 3D field.
//!
//! The Kirchhoff–Love deflection uses the Bogner–Fox–Schmit rectangle: per
//! node `(w, w,1, w,2, w,12)`, tensor products of cubic Hermite functions.
//! The element is C¹, so the discrete space is a subspace of `H²_0`.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;

use crate::basis::{gauss_unit, Hermite};
use crate::error::{Error, Result};
use crate::fem3d::{dof, DisplacementField3D};
use crate::material::KLModuli;
use crate::mesh::{Mesh2D, Mesh3D};
use crate::sparse::{norm, solve_spd, CsrMatrix, SolverOptions};

pub const KL_DOFS_PER_NODE: usize = 4;
const EL: usize = 16;
type PlateMatrix = SMatrix<f64, EL, EL>;
type PlateVector = SVector<f64, EL>;

/// Corner offsets of the counter-clockwise cell numbering.
const CORNER_IJ: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Values and derivatives of the 16 element shape functions at a point.
struct PlateBasis {
    n: [f64; EL],
    dx: [f64; EL],
    dy: [f64; EL],
    dxx: [f64; EL],
    dyy: [f64; EL],
    dxy: [f64; EL],
}

/// `(s, t)` are unit coordinates in the cell, `(hx, hy)` its edge lengths.
fn plate_basis(s: f64, t: f64, hx: f64, hy: f64) -> PlateBasis {
    let bx = Hermite::eval(s, hx);
    let by = Hermite::eval(t, hy);
    let mut p = PlateBasis {
        n: [0.0; EL],
        dx: [0.0; EL],
        dy: [0.0; EL],
        dxx: [0.0; EL],
        dyy: [0.0; EL],
        dxy: [0.0; EL],
    };
    for (c, &(a, b)) in CORNER_IJ.iter().enumerate() {
        // (w, w,x, w,y, w,xy) <- (v v, d v, v d, d d)
        for (l, (kx, ky)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let ix = 2 * a + kx;
            let iy = 2 * b + ky;
            let i = c * KL_DOFS_PER_NODE + l;
            p.n[i] = bx.value[ix] * by.value[iy];
            p.dx[i] = bx.d1[ix] * by.value[iy];
            p.dy[i] = bx.value[ix] * by.d1[iy];
            p.dxx[i] = bx.d2[ix] * by.value[iy];
            p.dyy[i] = bx.value[ix] * by.d2[iy];
            p.dxy[i] = bx.d1[ix] * by.d1[iy];
        }
    }
    p
}

/// 4x4 Gauss rule on the unit square: `(s, t, weight)`.
fn cell_rule() -> Vec<(f64, f64, f64)> {
    let (x, w) = gauss_unit(4);
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            out.push((x[i], x[j], w[i] * w[j]));
        }
    }
    out
}

fn cell_dof_map(cell: &[usize; 4]) -> [usize; EL] {
    let mut m = [0; EL];
    for (c, &node) in cell.iter().enumerate() {
        for l in 0..KL_DOFS_PER_NODE {
            m[c * KL_DOFS_PER_NODE + l] = node * KL_DOFS_PER_NODE + l;
        }
    }
    m
}

/// `∫ Δu Δv` and the polarized Gaussian form
/// `∫ 1/2 (u,11 v,22 + u,22 v,11) - u,12 v,12` on one cell.
fn element_forms(hx: f64, hy: f64) -> (PlateMatrix, PlateMatrix) {
    let mut lap = PlateMatrix::zeros();
    let mut gauss = PlateMatrix::zeros();
    for (s, t, w) in cell_rule() {
        let p = plate_basis(s, t, hx, hy);
        let wt = w * hx * hy;
        for i in 0..EL {
            let li = p.dxx[i] + p.dyy[i];
            for j in 0..EL {
                let lj = p.dxx[j] + p.dyy[j];
                lap[(i, j)] += wt * li * lj;
                gauss[(i, j)] +=
                    wt * (0.5 * (p.dxx[i] * p.dyy[j] + p.dyy[i] * p.dxx[j]) - p.dxy[i] * p.dxy[j]);
            }
        }
    }
    (lap, gauss)
}

/// Discrete clamped deflection on the cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct KLState {
    pub mesh: Arc<Mesh2D>,
    /// `(w, w,1, w,2, w,12)` per node.
    pub dofs: Vec<f64>,
    pub moduli: Option<KLModuli>,
}

impl KLState {
    pub fn zeros(mesh: Arc<Mesh2D>) -> Self {
        let n = mesh.node_count() * KL_DOFS_PER_NODE;
        KLState {
            mesh,
            dofs: vec![0.0; n],
            moduli: None,
        }
    }

    /// Hermite interpolant of `f(x) = (w, w,1, w,2, w,12)`. Boundary DOFs are
    /// taken from `f` as given; pass a clamped function to obtain a member of
    /// the clamped space.
    pub fn from_function(mesh: Arc<Mesh2D>, f: impl Fn([f64; 2]) -> [f64; 4]) -> Self {
        let mut s = Self::zeros(mesh.clone());
        for (n, x) in mesh.nodes.iter().enumerate() {
            s.dofs[n * KL_DOFS_PER_NODE..(n + 1) * KL_DOFS_PER_NODE].copy_from_slice(&f(*x));
        }
        s
    }

    pub fn w(&self, node: usize) -> f64 {
        self.dofs[node * KL_DOFS_PER_NODE]
    }

    pub fn gradient(&self, node: usize) -> [f64; 2] {
        let b = node * KL_DOFS_PER_NODE;
        [self.dofs[b + 1], self.dofs[b + 2]]
    }

    fn cell_values(&self, cell: usize) -> PlateVector {
        let map = cell_dof_map(&self.mesh.cells[cell]);
        PlateVector::from_fn(|i, _| self.dofs[map[i]])
    }

    /// `(w, w,11, w,22, w,12)` at unit coordinates `(s, t)` of a cell.
    pub fn eval(&self, cell: usize, s: f64, t: f64) -> [f64; 4] {
        let (hx, hy) = (self.mesh.dx(), self.mesh.dy());
        let p = plate_basis(s, t, hx, hy);
        let u = self.cell_values(cell);
        let mut out = [0.0; 4];
        for i in 0..EL {
            out[0] += p.n[i] * u[i];
            out[1] += p.dxx[i] * u[i];
            out[2] += p.dyy[i] * u[i];
            out[3] += p.dxy[i] * u[i];
        }
        out
    }

    fn integrate(&self, f: impl Fn([f64; 4]) -> f64 + Sync) -> f64 {
        let area = self.mesh.dx() * self.mesh.dy();
        let rule = cell_rule();
        let per_cell: Vec<f64> = (0..self.mesh.cells.len())
            .into_par_iter()
            .map(|c| {
                rule.iter()
                    .map(|&(s, t, w)| w * area * f(self.eval(c, s, t)))
                    .sum()
            })
            .collect();
        per_cell.iter().sum()
    }

    /// `∫ (Δw)²`.
    pub fn laplacian_energy(&self) -> f64 {
        self.integrate(|d| (d[1] + d[2]) * (d[1] + d[2]))
    }

    /// Discrete `L²` norm of the nodal deflections (trapezoidal weights).
    pub fn nodal_l2(&self) -> f64 {
        let w = self.mesh.nodal_weights();
        (0..self.mesh.node_count())
            .map(|n| w[n] * self.w(n) * self.w(n))
            .sum::<f64>()
            .sqrt()
    }

    /// Value of the limit functional
    /// `∫ 1/2 (D̄ (Δw)² - d̄ (w,11 w,22 - w,12²)) - b̄ w`.
    pub fn energy(&self, bbar: &(dyn Fn([f64; 2]) -> f64 + Sync)) -> Option<f64> {
        let m = self.moduli?;
        let (d, dd) = (m.bending(), m.gaussian());
        let elastic =
            self.integrate(|v| 0.5 * (d * (v[1] + v[2]).powi(2) - dd * (v[1] * v[2] - v[3] * v[3])));
        let work = self.load_work(bbar);
        Some(elastic - work)
    }

    fn load_work(&self, bbar: &(dyn Fn([f64; 2]) -> f64 + Sync)) -> f64 {
        let (hx, hy) = (self.mesh.dx(), self.mesh.dy());
        let rule = cell_rule();
        (0..self.mesh.cells.len())
            .map(|c| {
                let o = self.mesh.nodes[self.mesh.cells[c][0]];
                rule.iter()
                    .map(|&(s, t, w)| {
                        let x = [o[0] + s * hx, o[1] + t * hy];
                        w * hx * hy * bbar(x) * self.eval(c, s, t)[0]
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// CSV with header `x1,x2,w,wx,wy,wxy`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,w,wx,wy,wxy\n");
        for (n, x) in self.mesh.nodes.iter().enumerate() {
            let d = &self.dofs[n * KL_DOFS_PER_NODE..(n + 1) * KL_DOFS_PER_NODE];
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e}\n",
                x[0], x[1], d[0], d[1], d[2], d[3]
            ));
        }
        s
    }
}

/// `∫ (w,11 w,22 - w,12²)` by 4x4 Gauss quadrature per cell.
pub fn gaussian_term(w: &KLState) -> f64 {
    w.integrate(|d| d[1] * d[2] - d[3] * d[3])
}

/// `b̄(x1, x2) = ∫ b3(x1, x2, x3) dx3` over `(-h, h)` with the 4-point rule
/// of the 3D element.
pub fn through_thickness_load(
    b3: impl Fn([f64; 3]) -> f64 + Sync,
    half_thickness: f64,
) -> impl Fn([f64; 2]) -> f64 + Sync {
    let (z, w) = gauss_unit(4);
    move |x: [f64; 2]| {
        z.iter()
            .zip(&w)
            .map(|(s, w)| {
                let x3 = -half_thickness + 2.0 * half_thickness * s;
                2.0 * half_thickness * w * b3([x[0], x[1], x3])
            })
            .sum()
    }
}

/// Assembled clamped plate system: stiffness `D̄ L - d̄ G`, load vector and
/// free-DOF mask.
pub struct PlateSystem {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
    pub free: Vec<bool>,
}

pub fn assemble_kl(mesh: &Mesh2D, moduli: &KLModuli, bbar: &(dyn Fn([f64; 2]) -> f64 + Sync)) -> PlateSystem {
    let (hx, hy) = (mesh.dx(), mesh.dy());
    let (lap, gauss) = element_forms(hx, hy);
    let ke = lap * moduli.bending() - gauss * moduli.gaussian();
    let rule = cell_rule();
    let loads: Vec<PlateVector> = mesh
        .cells
        .par_iter()
        .map(|cell| {
            let o = mesh.nodes[cell[0]];
            let mut f = PlateVector::zeros();
            for &(s, t, w) in &rule {
                let q = bbar([o[0] + s * hx, o[1] + t * hy]);
                if q == 0.0 {
                    continue;
                }
                let p = plate_basis(s, t, hx, hy);
                for i in 0..EL {
                    f[i] += w * hx * hy * q * p.n[i];
                }
            }
            f
        })
        .collect();

    let ndof = mesh.node_count() * KL_DOFS_PER_NODE;
    let mut triplets = Vec::with_capacity(mesh.cells.len() * EL * EL);
    let mut load = vec![0.0; ndof];
    for (cell, fe) in mesh.cells.iter().zip(&loads) {
        let map = cell_dof_map(cell);
        for a in 0..EL {
            load[map[a]] += fe[a];
            for b in 0..EL {
                triplets.push((map[a], map[b], ke[(a, b)]));
            }
        }
    }
    PlateSystem {
        matrix: CsrMatrix::from_triplets(ndof, triplets),
        load,
        free: (0..ndof)
            .map(|d| !mesh.is_clamped(d / KL_DOFS_PER_NODE))
            .collect(),
    }
}

/// Discrete minimizer of the clamped Kirchhoff–Love functional with
/// transverse force per unit area `bbar`.
pub fn solve_kl(
    mesh: Arc<Mesh2D>,
    moduli: &KLModuli,
    bbar: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Result<KLState> {
    let sys = assemble_kl(&mesh, moduli, bbar);
    let (reduced, map) = sys.matrix.principal_submatrix(&sys.free);
    if reduced.n == 0 {
        return Err(Error::Singular(
            "plate mesh has no interior nodes; refine to at least 2x2".into(),
        ));
    }
    let rhs: Vec<f64> = map.iter().map(|&i| sys.load[i]).collect();
    let mut state = KLState::zeros(mesh);
    state.moduli = Some(*moduli);
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(state);
    }
    let sol = solve_spd(&reduced, &rhs, &SolverOptions::default())?;
    for (k, &i) in map.iter().enumerate() {
        state.dofs[i] = sol.x[k];
    }
    Ok(state)
}

/// Relative residual of the discrete plate equations on the free DOFs.
pub fn kl_residual(sys: &PlateSystem, state: &KLState) -> f64 {
    let r = sys.matrix.mul_vec(&state.dofs);
    let (mut num, mut den) = (Vec::new(), Vec::new());
    for i in 0..r.len() {
        if sys.free[i] {
            num.push(r[i] - sys.load[i]);
            den.push(sys.load[i]);
        }
    }
    norm(&num) / norm(&den).max(f64::MIN_POSITIVE)
}

/// The Kirchhoff–Love displacement `w e3 - x3 ∇w` in the 3D DOF layout.
pub fn reconstruct_kl_3d(w: &KLState, mesh3d: Arc<Mesh3D>) -> Result<DisplacementField3D> {
    if !w.mesh.matches(&mesh3d) {
        return Err(Error::MeshMismatch(
            "plate and 3D meshes have different cross-sections".into(),
        ));
    }
    let epsilon = mesh3d.half_thickness / mesh3d.ell;
    let mut u = DisplacementField3D::zeros(mesh3d.clone(), epsilon);
    for p in 0..w.mesh.node_count() {
        let [g1, g2] = w.gradient(p);
        for k in 0..mesh3d.layers() {
            let n = mesh3d.fiber_node(p, k);
            if mesh3d.is_clamped(n) {
                continue;
            }
            let x3 = mesh3d.nodes[n][2];
            u.coeffs[dof(n, 0, 0)] = -x3 * g1;
            u.coeffs[dof(n, 0, 1)] = -g1;
            u.coeffs[dof(n, 1, 0)] = -x3 * g2;
            u.coeffs[dof(n, 1, 1)] = -g2;
            u.coeffs[dof(n, 2, 0)] = w.w(p);
        }
    }
    Ok(u)
}

/// Reissner–Mindlin kinematics `w e3 + v + x3 φ`, nodal on the cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct RMState {
    pub mesh: Arc<Mesh2D>,
    pub w: Vec<f64>,
    pub v: Vec<[f64; 2]>,
    pub phi: Vec<[f64; 2]>,
    /// Thickness-averaged misfit per node, `sqrt(1/2t ∫ |u - fit|² dx3)`.
    pub node_residual: Vec<f64>,
}

impl RMState {
    /// The Reissner–Mindlin displacement in the 3D DOF layout.
    pub fn to_field(&self, mesh3d: Arc<Mesh3D>) -> Result<DisplacementField3D> {
        if !self.mesh.matches(&mesh3d) {
            return Err(Error::MeshMismatch(
                "plate and 3D meshes have different cross-sections".into(),
            ));
        }
        let epsilon = mesh3d.half_thickness / mesh3d.ell;
        let mut u = DisplacementField3D::zeros(mesh3d.clone(), epsilon);
        for p in 0..self.mesh.node_count() {
            for k in 0..mesh3d.layers() {
                let n = mesh3d.fiber_node(p, k);
                if mesh3d.is_clamped(n) {
                    continue;
                }
                let x3 = mesh3d.nodes[n][2];
                for a in 0..2 {
                    u.coeffs[dof(n, a, 0)] = self.v[p][a] + x3 * self.phi[p][a];
                    u.coeffs[dof(n, a, 1)] = self.phi[p][a];
                }
                u.coeffs[dof(n, 2, 0)] = self.w[p];
            }
        }
        Ok(u)
    }

    /// Discrete director gap `‖φ + ∇w‖ / ‖∇w‖`.
    ///
    /// Both are sampled at edge midpoints: `φ` as the mean of its two end
    /// values along the edge direction and `∇w` as the difference quotient of
    /// the nodal deflections. This is the quantity the assumed transverse
    /// shear of the 3D element ties to zero, and it vanishes for every
    /// deflection that is quadratic along the grid lines.
    pub fn director_gap(&self) -> f64 {
        let m = &self.mesh;
        let (hx, hy) = (m.dx(), m.dy());
        let (mut gap, mut grad) = (0.0, 0.0);
        for j in 0..=m.ny {
            for i in 0..=m.nx {
                let a = m.node_index(i, j);
                if i < m.nx {
                    let b = m.node_index(i + 1, j);
                    let g = (self.w[b] - self.w[a]) / hx;
                    let f = 0.5 * (self.phi[a][0] + self.phi[b][0]);
                    gap += (f + g).powi(2);
                    grad += g * g;
                }
                if j < m.ny {
                    let b = m.node_index(i, j + 1);
                    let g = (self.w[b] - self.w[a]) / hy;
                    let f = 0.5 * (self.phi[a][1] + self.phi[b][1]);
                    gap += (f + g).powi(2);
                    grad += g * g;
                }
            }
        }
        if grad == 0.0 {
            return 0.0;
        }
        (gap / grad).sqrt()
    }

    /// CSV with header `x1,x2,w,v1,v2,phi1,phi2,residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,w,v1,v2,phi1,phi2,residual\n");
        for (n, x) in self.mesh.nodes.iter().enumerate() {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                x[0],
                x[1],
                self.w[n],
                self.v[n][0],
                self.v[n][1],
                self.phi[n][0],
                self.phi[n][1],
                self.node_residual[n]
            ));
        }
        s
    }
}

/// Hermite profile of component `c` along fiber `p`, layer segment `k`.
fn segment(field: &DisplacementField3D, p: usize, k: usize, c: usize) -> [f64; 4] {
    let m = &field.mesh;
    let (a, b) = (m.fiber_node(p, k), m.fiber_node(p, k + 1));
    [
        field.value(a, c),
        field.slope(a, c),
        field.value(b, c),
        field.slope(b, c),
    ]
}

/// Least-squares Reissner–Mindlin fit along every fiber and the relative
/// misfit `‖u - fit‖ / ‖u‖` (thickness integrals exact, in-plane trapezoid).
pub fn fit_rm(field: &DisplacementField3D) -> (RMState, f64) {
    let m = &field.mesh;
    let section = Arc::new(m.section());
    let np = section.node_count();
    let t = m.half_thickness;
    let dz = m.dz();
    // 4 points are exact for (cubic)x(linear) and (cubic)^2 needs 4 too
    let (gz, gw) = gauss_unit(4);
    let samples: Vec<(f64, f64, Hermite)> = gz
        .iter()
        .zip(&gw)
        .map(|(&s, &w)| (s, w * dz, Hermite::eval(s, dz)))
        .collect();
    let eval = |d: &[f64; 4], h: &Hermite| -> f64 { (0..4).map(|i| h.value[i] * d[i]).sum() };

    let mut state = RMState {
        mesh: section.clone(),
        w: vec![0.0; np],
        v: vec![[0.0; 2]; np],
        phi: vec![[0.0; 2]; np],
        node_residual: vec![0.0; np],
    };
    let weights = section.nodal_weights();
    let (mut misfit, mut total) = (0.0, 0.0);
    // ∫ x3² over (-t, t)
    let second_moment = 2.0 * t * t * t / 3.0;
    for p in 0..np {
        let mut mean = [0.0; 3];
        let mut first = [0.0; 2];
        for k in 0..m.nz {
            let z0 = m.nodes[m.fiber_node(p, k)][2];
            for c in 0..3 {
                let d = segment(field, p, k, c);
                for (s, w, h) in &samples {
                    let u = eval(&d, h);
                    mean[c] += w * u;
                    if c < 2 {
                        first[c] += w * (z0 + s * dz) * u;
                    }
                }
            }
        }
        for c in 0..3 {
            mean[c] /= 2.0 * t;
        }
        let v = [mean[0], mean[1]];
        let phi = [first[0] / second_moment, first[1] / second_moment];
        let mut node_misfit = 0.0;
        let mut node_total = 0.0;
        for k in 0..m.nz {
            let z0 = m.nodes[m.fiber_node(p, k)][2];
            for c in 0..3 {
                let d = segment(field, p, k, c);
                for (s, w, h) in &samples {
                    let u = eval(&d, h);
                    let fit = if c < 2 {
                        v[c] + (z0 + s * dz) * phi[c]
                    } else {
                        mean[2]
                    };
                    node_misfit += w * (u - fit).powi(2);
                    node_total += w * u * u;
                }
            }
        }
        state.w[p] = mean[2];
        state.v[p] = v;
        state.phi[p] = phi;
        state.node_residual[p] = (node_misfit / (2.0 * t)).sqrt();
        misfit += weights[p] * node_misfit;
        total += weights[p] * node_total;
    }
    let residual = if total == 0.0 {
        0.0
    } else {
        (misfit / total).sqrt()
    };
    (state, residual)
}
