//! Construction of the thickness sequence: the domain family, the scaling
//! map and its pullback, the fiber average, load sequences, the
//! premultiplication rescaling, and the component scaling of the limit.
//!
//! Thickness parameters are normalized by the real one: the family is
//! evaluated through `t = epsilon / epsilon_r`, so that every object at
//! `epsilon = epsilon_r` is the real one, bit for bit.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::hermite_integral;
use crate::error::{invalid, Error, Result};
use crate::fem3d::{dof, DisplacementField3D, DOFS_PER_NODE};
use crate::mesh::{build_plate_mesh, Mesh3D};

/// The real plate `(-ell_r, ell_r)^2 x (-h_r, h_r)` and the family of boxes
/// `omega_r x (epsilon/epsilon_r)(-h_r, h_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFamily {
    /// Half side of the cross-section.
    pub ell: f64,
    /// Half thickness of the real plate.
    pub h: f64,
}

/// One member of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateBox {
    pub ell: f64,
    pub half_thickness: f64,
}

impl DomainFamily {
    pub fn new(ell: f64, h: f64) -> Result<Self> {
        let f = DomainFamily { ell, h };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(invalid(
                "geometry.ell",
                format!("must be positive, got {}", self.ell),
            ));
        }
        if !(self.h > 0.0 && self.h <= self.ell) {
            return Err(invalid(
                "geometry.h",
                format!("must lie in (0, ell] = (0, {}], got {}", self.ell, self.h),
            ));
        }
        Ok(())
    }

    /// `epsilon_r = h_r / ell_r`.
    pub fn epsilon_r(&self) -> f64 {
        self.h / self.ell
    }

    /// `epsilon / epsilon_r`, after checking `0 < epsilon <= epsilon_r`.
    pub fn ratio(&self, epsilon: f64) -> Result<f64> {
        let er = self.epsilon_r();
        if !(epsilon > 0.0 && epsilon <= er) {
            return Err(invalid(
                "epsilon",
                format!("must lie in (0, epsilon_r] = (0, {er}], got {epsilon}"),
            ));
        }
        Ok(epsilon / er)
    }

    /// The real plate as a mesh.
    pub fn real_mesh(&self, nx: usize, ny: usize, nz: usize) -> Result<Mesh3D> {
        build_plate_mesh(self.ell, self.h, nx, ny, nz)
    }

    pub fn mesh_at(&self, epsilon: f64, nx: usize, ny: usize, nz: usize) -> Result<Mesh3D> {
        let b = domain_at(self, epsilon)?;
        build_plate_mesh(b.ell, b.half_thickness, nx, ny, nz)
    }
}

/// `Omega_epsilon`; returns the real plate exactly at `epsilon_r`.
pub fn domain_at(family: &DomainFamily, epsilon: f64) -> Result<PlateBox> {
    let t = family.ratio(epsilon)?;
    Ok(PlateBox {
        ell: family.ell,
        half_thickness: t * family.h,
    })
}

fn check_image(field_mesh: &Mesh3D, reference: &Mesh3D) -> Result<f64> {
    if !field_mesh.same_section(reference) || field_mesh.nz != reference.nz {
        return Err(Error::MeshMismatch(format!(
            "meshes are not images of each other under the scaling map \
             ({}x{}x{} on side {} vs {}x{}x{} on side {})",
            field_mesh.nx,
            field_mesh.ny,
            field_mesh.nz,
            field_mesh.ell,
            reference.nx,
            reference.ny,
            reference.nz,
            reference.ell
        )));
    }
    Ok(field_mesh.half_thickness / reference.half_thickness)
}

/// Multiplies every `x3`-derivative DOF by `factor`.
fn scale_slopes(field: &mut DisplacementField3D, factor: f64) {
    for n in 0..field.mesh.node_count() {
        for c in 0..3 {
            field.coeffs[dof(n, c, 1)] *= factor;
            field.correction[dof(n, c, 1)] *= factor;
        }
    }
}

/// `u o s`, where `s(y1, y2, y3) = (y1, y2, t y3)` maps the reference plate
/// onto the field's plate. Nodal values are carried over, `x3`-derivatives
/// pick up the factor `t`.
pub fn pullback(field: &DisplacementField3D, reference: Arc<Mesh3D>) -> Result<DisplacementField3D> {
    let t = check_image(&field.mesh, &reference)?;
    let mut out = field.clone();
    out.mesh = reference;
    scale_slopes(&mut out, t);
    Ok(out)
}

/// Inverse of [`pullback`]: transports a field on the reference plate onto
/// `target`.
pub fn pushforward(field: &DisplacementField3D, target: Arc<Mesh3D>) -> Result<DisplacementField3D> {
    let t = check_image(&target, &field.mesh)?;
    let mut out = field.clone();
    out.mesh = target;
    scale_slopes(&mut out, 1.0 / t);
    Ok(out)
}

/// `q(v)(x1, x2) = 1/(2t) ∫ v dx3` at every in-plane node, integrating the
/// Hermite profile exactly.
pub fn fiber_average(field: &DisplacementField3D) -> Vec<[f64; 3]> {
    let m = &field.mesh;
    let dz = m.dz();
    let thickness = 2.0 * m.half_thickness;
    (0..m.inplane_count())
        .map(|p| {
            let mut avg = [0.0; 3];
            for (c, a) in avg.iter_mut().enumerate() {
                let mut s = 0.0;
                for k in 0..m.nz {
                    let (i, j) = (m.fiber_node(p, k), m.fiber_node(p, k + 1));
                    s += hermite_integral(
                        dz,
                        field.value(i, c),
                        field.slope(i, c),
                        field.value(j, c),
                        field.slope(j, c),
                    );
                }
                *a = s / thickness;
            }
            avg
        })
        .collect()
}

/// In-plane shape of a load or test field on the cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LoadProfile {
    /// `1`.
    #[default]
    Uniform,
    /// `cos(pi x1 / 2 ell) cos(pi x2 / 2 ell)`, vanishing on the boundary.
    Cosine,
}

impl LoadProfile {
    pub fn eval(&self, x: [f64; 2], ell: f64) -> f64 {
        match self {
            LoadProfile::Uniform => 1.0,
            LoadProfile::Cosine => (FRAC_PI_2 * x[0] / ell).cos() * (FRAC_PI_2 * x[1] / ell).cos(),
        }
    }
}

fn default_exponents() -> [f64; 3] {
    [1.0, 1.0, 2.0]
}

/// Body force of the real plate, `b_r = (a1, a2, a3) g(x1, x2)`, together
/// with the exponents of the load sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    #[serde(default)]
    pub profile: LoadProfile,
    /// Transverse amplitude `a3` (force per volume).
    pub amplitude: f64,
    /// In-plane amplitudes `(a1, a2)`.
    #[serde(default)]
    pub inplane_amplitude: [f64; 2],
    /// `b_epsilon,i = (epsilon/epsilon_r)^{p_i} b_r,i`.
    #[serde(default = "default_exponents")]
    pub exponents: [f64; 3],
}

impl Default for LoadSpec {
    fn default() -> Self {
        LoadSpec {
            profile: LoadProfile::Uniform,
            amplitude: 1.0,
            inplane_amplitude: [0.0; 2],
            exponents: default_exponents(),
        }
    }
}

impl LoadSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.amplitude,
            self.inplane_amplitude[0],
            self.inplane_amplitude[1],
            self.exponents[0],
            self.exponents[1],
            self.exponents[2],
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("load", "amplitudes and exponents must be finite"));
        }
        Ok(())
    }

    pub fn amplitudes(&self) -> [f64; 3] {
        [
            self.inplane_amplitude[0],
            self.inplane_amplitude[1],
            self.amplitude,
        ]
    }
}

/// An evaluated body force `b(x) = factors (.) amplitudes g(x1, x2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyLoad {
    pub profile: LoadProfile,
    pub ell: f64,
    /// Per-component amplitude, sequence factors included.
    pub amplitude: [f64; 3],
}

impl BodyLoad {
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let g = self.profile.eval([x[0], x[1]], self.ell);
        [
            self.amplitude[0] * g,
            self.amplitude[1] * g,
            self.amplitude[2] * g,
        ]
    }

    /// Multiplies every component by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        BodyLoad {
            amplitude: self.amplitude.map(|a| a * s),
            ..*self
        }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == [0.0; 3]
    }
}

/// `b_epsilon` of the load sequence; `b_r` itself at `epsilon_r`.
pub fn load_sequence(spec: &LoadSpec, family: &DomainFamily, epsilon: f64) -> Result<BodyLoad> {
    let t = family.ratio(epsilon)?;
    let a = spec.amplitudes();
    let mut amplitude = [0.0; 3];
    for i in 0..3 {
        amplitude[i] = if t == 1.0 {
            a[i]
        } else {
            t.powf(spec.exponents[i]) * a[i]
        };
    }
    Ok(BodyLoad {
        profile: spec.profile,
        ell: family.ell,
        amplitude,
    })
}

/// `(u / epsilon^beta, b / epsilon^beta)`. Premultiplying the functional by
/// `epsilon^{-2 beta}` and substituting `u = epsilon^beta v` gives the
/// functional with load `b / epsilon^beta`, whose minimizer is `u /
/// epsilon^beta`.
pub fn beta_rescale(
    u: &DisplacementField3D,
    b: &BodyLoad,
    epsilon: f64,
    beta: f64,
) -> (DisplacementField3D, BodyLoad) {
    let s = epsilon.powf(-beta);
    let mut v = u.clone();
    v.coeffs.iter_mut().for_each(|c| *c *= s);
    v.correction.iter_mut().for_each(|c| *c *= s);
    (v, b.scaled(s))
}

/// A pulled-back field and its component-scaled version:
/// `u~_alpha = (u o s)_alpha / t`, `u~_3 = (u o s)_3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSolution {
    pub epsilon: f64,
    pub pullback: DisplacementField3D,
    pub scaled: DisplacementField3D,
}

/// Divides the in-plane components of a pulled-back field by
/// `epsilon / epsilon_r`.
pub fn scaled_components(pullback: &DisplacementField3D, epsilon: f64, epsilon_r: f64) -> ScaledSolution {
    let t = epsilon / epsilon_r;
    let mut scaled = pullback.clone();
    if t != 1.0 {
        for n in 0..scaled.mesh.node_count() {
            for c in 0..2 {
                for k in 0..2 {
                    let d = n * DOFS_PER_NODE + c * 2 + k;
                    scaled.coeffs[d] /= t;
                    scaled.correction[d] /= t;
                }
            }
        }
    }
    ScaledSolution {
        epsilon,
        pullback: pullback.clone(),
        scaled,
    }
}
