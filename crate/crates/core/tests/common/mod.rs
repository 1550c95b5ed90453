//! Element-matrix oracle shared by the test targets: the stored energy is
//! polarized, `K_ij = ∫ W(v_i + v_j) - W(v_i) - W(v_j)`, with shape
//! functions written independently in physical coordinates and a Gauss rule
//! of higher order than the element's.

use nalgebra::{DMatrix, Matrix4, Vector4};
use platelab::basis::gauss_legendre;
use platelab::fem3d::{CellGeometry, Formulation, CORNERS};
use platelab::material::{energy_density_kappa, KappaEnergyParams, Strain};

/// Cubic on `[z0, z1]` with one unit Hermite datum, as monomial
/// coefficients in `z - z0`.
fn hermite_cubic(hz: f64, which: usize) -> [f64; 4] {
    // rows: p(0), p'(0), p(hz), p'(hz) for p = c0 + c1 z + c2 z^2 + c3 z^3
    #[rustfmt::skip]
    let m = Matrix4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        1.0, hz, hz * hz, hz * hz * hz,
        0.0, 1.0, 2.0 * hz, 3.0 * hz * hz,
    );
    let mut rhs = Vector4::zeros();
    rhs[which] = 1.0;
    let c = m.lu().solve(&rhs).unwrap();
    [c[0], c[1], c[2], c[3]]
}

fn poly(c: &[f64; 4], z: f64) -> (f64, f64, f64) {
    (
        c[0] + z * (c[1] + z * (c[2] + z * c[3])),
        c[1] + z * (2.0 * c[2] + 3.0 * z * c[3]),
        2.0 * c[2] + 6.0 * z * c[3],
    )
}

/// Generalized strains `(E, u1,33, u2,33)` of one element DOF (or, for
/// `dof >= 48`, one enhanced mode) at a physical point.
fn dof_strain(geom: &CellGeometry, dof: usize, x: [f64; 3], formulation: Formulation) -> (Strain, [f64; 2]) {
    let [x0, y0, z0] = geom.origin;
    let [hx, hy, hz] = geom.size;
    let xi = 2.0 * (x[0] - x0) / hx - 1.0;
    let eta = 2.0 * (x[1] - y0) / hy - 1.0;
    let zeta = 2.0 * (x[2] - z0) / hz - 1.0;
    if dof >= 48 {
        let m = if dof == 48 { zeta * xi } else { zeta * eta };
        return (Strain::from_components(0.0, 0.0, m, 0.0, 0.0, 0.0), [0.0; 2]);
    }
    let (node, comp, kind) = (dof / 6, (dof % 6) / 2, dof % 2);
    let (a, layer) = (node % 4, node / 4);
    let (ca, cb) = CORNERS[a];
    // linear Lagrange factors in physical coordinates
    let lx = |xx: f64| {
        if ca < 0.0 {
            (x0 + hx - xx) / hx
        } else {
            (xx - x0) / hx
        }
    };
    let ly = |yy: f64| {
        if cb < 0.0 {
            (y0 + hy - yy) / hy
        } else {
            (yy - y0) / hy
        }
    };
    let dlx = ca / hx;
    let dly = cb / hy;
    let (h, hd, hdd) = poly(&hermite_cubic(hz, 2 * layer + kind), x[2] - z0);
    let n = lx(x[0]) * ly(x[1]);
    let (nx, ny) = (dlx * ly(x[1]), lx(x[0]) * dly);
    let (n13, n23) = match formulation {
        Formulation::Displacement => (n, n),
        Formulation::Mixed => (lx(x0 + 0.5 * hx) * ly(x[1]), lx(x[0]) * ly(y0 + 0.5 * hy)),
    };
    // gradient rows: d/dx, d/dy, d/dz of the single nonzero component
    let (e, u33) = match comp {
        0 => (
            Strain::from_components(nx * h, 0.0, 0.0, 0.0, 0.5 * n13 * hd, 0.5 * ny * h),
            [n * hdd, 0.0],
        ),
        1 => (
            Strain::from_components(0.0, ny * h, 0.0, 0.5 * n23 * hd, 0.0, 0.5 * nx * h),
            [0.0, n * hdd],
        ),
        _ => (
            Strain::from_components(0.0, 0.0, n * hd, 0.5 * ny * h, 0.5 * nx * h, 0.0),
            [0.0, 0.0],
        ),
    };
    (e, u33)
}

fn add(a: &(Strain, [f64; 2]), b: &(Strain, [f64; 2])) -> (Strain, [f64; 2]) {
    let mut e = [0.0; 6];
    for i in 0..6 {
        e[i] = a.0 .0[i] + b.0 .0[i];
    }
    (Strain(e), [a.1[0] + b.1[0], a.1[1] + b.1[1]])
}

/// Element matrix by polarization of the stored energy,
/// `K_ij = ∫ W(v_i + v_j) - W(v_i) - W(v_j)`, with a 5x5x6 Gauss rule and
/// condensation of the enhanced modes.
pub fn oracle_stiffness(
    geom: &CellGeometry,
    lambda: f64,
    mu: f64,
    p: &KappaEnergyParams,
    f: Formulation,
) -> DMatrix<f64> {
    let n = if f == Formulation::Mixed { 50 } else { 48 };
    let (gx, gw) = gauss_legendre(5);
    let (gz, gzw) = gauss_legendre(6);
    let w = |v: &(Strain, [f64; 2])| energy_density_kappa(&v.0, v.1, p, lambda, mu);
    let mut k = DMatrix::zeros(n, n);
    let [x0, y0, z0] = geom.origin;
    let [hx, hy, hz] = geom.size;
    for (i, &a) in gx.iter().enumerate() {
        for (j, &b) in gx.iter().enumerate() {
            for (l, &c) in gz.iter().enumerate() {
                let x = [
                    x0 + 0.5 * (a + 1.0) * hx,
                    y0 + 0.5 * (b + 1.0) * hy,
                    z0 + 0.5 * (c + 1.0) * hz,
                ];
                let wt = gw[i] * gw[j] * gzw[l] * hx * hy * hz / 8.0;
                let v: Vec<_> = (0..n).map(|d| dof_strain(geom, d, x, f)).collect();
                let wv: Vec<f64> = v.iter().map(w).collect();
                for r in 0..n {
                    for s in 0..=r {
                        let val = wt * (w(&add(&v[r], &v[s])) - wv[r] - wv[s]);
                        k[(r, s)] += val;
                        if r != s {
                            k[(s, r)] += val;
                        }
                    }
                }
            }
        }
    }
    if n == 48 {
        return k;
    }
    let kuu = k.view((0, 0), (48, 48)).into_owned();
    let kua = k.view((0, 48), (48, 2)).into_owned();
    let kaa = k.view((48, 48), (2, 2)).into_owned();
    kuu - &kua * kaa.cholesky().unwrap().solve(&kua.transpose())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}
