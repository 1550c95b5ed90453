//! Inertial working of manufactured acceleration families along the
//! thickness sequence, with the classical and the thickness-weighted
//! in-plane terms.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fem3d::{CellGeometry, ElementRule};
use crate::harness::MeshSpec;
use crate::mesh::Mesh3D;
use crate::scaling::{DomainFamily, LoadProfile};

fn default_rho() -> f64 {
    1.0
}

/// Mass density and the manufactured acceleration and test fields:
/// `u''_alpha = (epsilon/epsilon_r) a_alpha g_a(x1, x2)`, `u''_3 = a_3
/// g_a(x1, x2)`, `psi = c g_psi(x1, x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelerationProfile {
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// `(a1, a2, a3)`.
    pub acceleration: [f64; 3],
    #[serde(default)]
    pub acceleration_profile: LoadProfile,
    /// `(c1, c2, c3)`.
    pub test: [f64; 3],
    #[serde(default)]
    pub test_profile: LoadProfile,
}

impl Default for AccelerationProfile {
    /// A decelerating plate tested against a uniform field, so that the
    /// working is positive.
    fn default() -> Self {
        AccelerationProfile {
            rho: 1.0,
            acceleration: [-1.0, -1.0, -1.0],
            acceleration_profile: LoadProfile::Cosine,
            test: [1.0, 1.0, 1.0],
            test_profile: LoadProfile::Uniform,
        }
    }
}

impl AccelerationProfile {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .acceleration
            .iter()
            .chain(&self.test)
            .chain(std::iter::once(&self.rho));
        if all.clone().any(|v| !v.is_finite()) {
            return Err(invalid("inertia", "density and amplitudes must be finite"));
        }
        if self.rho < 0.0 {
            return Err(invalid("inertia.rho", format!("must be >= 0, got {}", self.rho)));
        }
        Ok(())
    }
}

/// A working split into its transverse and in-plane parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Working {
    pub transverse: f64,
    pub inplane: f64,
}

impl Working {
    pub fn total(&self) -> f64 {
        self.transverse + self.inplane
    }
}

/// Quadrature over the real plate, normalized by its thickness.
pub struct InertiaQuadrature {
    family: DomainFamily,
    mesh: Mesh3D,
}

impl InertiaQuadrature {
    pub fn new(family: DomainFamily, mesh: MeshSpec) -> Result<Self> {
        Ok(InertiaQuadrature {
            family,
            mesh: family.real_mesh(mesh.nx, mesh.ny, mesh.nz)?,
        })
    }

    /// `(1/2h) ∫ rho (w3 u''_3 psi_3 + wa (u''_alpha / t) psi_alpha) dx`,
    /// negated; `wa` multiplies the in-plane term.
    fn working(&self, p: &AccelerationProfile, epsilon: f64, weight: impl Fn(f64) -> f64) -> Result<Working> {
        p.validate()?;
        let t = self.family.ratio(epsilon)?;
        let rule = ElementRule::standard();
        let ell = self.family.ell;
        let (mut transverse, mut inplane) = (0.0, 0.0);
        for c in 0..self.mesh.cells.len() {
            let geom = CellGeometry::of(&self.mesh, c);
            for (xi, eta, s, w) in rule.points(&geom) {
                let x = geom.point(xi, eta, s);
                let ga = p.acceleration_profile.eval([x[0], x[1]], ell);
                let gp = p.test_profile.eval([x[0], x[1]], ell);
                let a3 = p.acceleration[2] * ga;
                transverse += w * p.rho * a3 * p.test[2] * gp;
                let mut ip = 0.0;
                for alpha in 0..2 {
                    // u''_alpha / t of the manufactured family
                    let scaled = p.acceleration[alpha] * ga;
                    ip += scaled * p.test[alpha] * gp;
                }
                inplane += w * p.rho * ip;
            }
        }
        let thickness = 2.0 * self.family.h;
        Ok(Working {
            transverse: -transverse / thickness,
            inplane: -weight(t) * inplane / thickness,
        })
    }

    /// `-∫ rho (u''_3 psi_3 + epsilon (u''_alpha/epsilon) psi_alpha)`: the
    /// in-plane part carries the factor `t = epsilon/epsilon_r`.
    pub fn classical(&self, p: &AccelerationProfile, epsilon: f64) -> Result<Working> {
        self.working(p, epsilon, |t| t)
    }

    /// `-∫ rho (u''_3 psi_3 + (epsilon_r/epsilon) u''_alpha psi_alpha)`: the
    /// weight cancels the factor `t` of the in-plane acceleration.
    pub fn modified(&self, p: &AccelerationProfile, epsilon: f64) -> Result<Working> {
        self.working(p, epsilon, |_| 1.0)
    }
}

/// Classical inertial working on the default quadrature mesh.
pub fn inertial_working_classical(
    family: DomainFamily,
    p: &AccelerationProfile,
    epsilon: f64,
) -> Result<Working> {
    InertiaQuadrature::new(family, MeshSpec::default())?.classical(p, epsilon)
}

/// Modified inertial working on the default quadrature mesh.
pub fn inertial_working_modified(
    family: DomainFamily,
    p: &AccelerationProfile,
    epsilon: f64,
) -> Result<Working> {
    InertiaQuadrature::new(family, MeshSpec::default())?.modified(p, epsilon)
}

/// `epsilon,classical_total,classical_inplane,modified_total,modified_inplane`.
pub fn inertia_table(
    family: DomainFamily,
    mesh: MeshSpec,
    p: &AccelerationProfile,
    ladder: &[f64],
) -> Result<String> {
    let q = InertiaQuadrature::new(family, mesh)?;
    let mut s = String::from("epsilon,classical_total,classical_inplane,modified_total,modified_inplane\n");
    for &eps in ladder {
        let c = q.classical(p, eps)?;
        let m = q.modified(p, eps)?;
        s.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            eps,
            c.total(),
            c.inplane,
            m.total(),
            m.inplane
        ));
    }
    Ok(s)
}
