//! Material models and stored-energy densities.
//!
//! Voigt ordering is fixed as `(11, 22, 33, 23, 13, 12)`. A 6x6 stiffness
//! given in Voigt form acts on *engineering* strains, i.e. the last three
//! entries of the strain vector are `2 E23, 2 E13, 2 E12`. [`Strain`] itself
//! always stores tensor components.

use nalgebra::{Matrix3, Matrix6, SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Hessian of an energy density with respect to
/// `(E11, E22, E33, E23, E13, E12, u1,33, u2,33)`.
pub type EnergyForm = SMatrix<f64, 8, 8>;

/// Symmetric small strain, stored as its six independent tensor components
/// in Voigt order `(11, 22, 33, 23, 13, 12)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Strain(pub [f64; 6]);

impl Strain {
    pub const ZERO: Strain = Strain([0.0; 6]);

    pub fn identity() -> Self {
        Strain([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    }

    pub fn from_components(e11: f64, e22: f64, e33: f64, e23: f64, e13: f64, e12: f64) -> Self {
        Strain([e11, e22, e33, e23, e13, e12])
    }

    /// Tensor component `E_ij` (0-based indices).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        const MAP: [[usize; 3]; 3] = [[0, 5, 4], [5, 1, 3], [4, 3, 2]];
        self.0[MAP[i][j]]
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.get(i, j))
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    /// `|E|^2 = E : E`.
    pub fn norm_squared(&self) -> f64 {
        let e = &self.0;
        e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + 2.0 * (e[3] * e[3] + e[4] * e[4] + e[5] * e[5])
    }

    /// Engineering Voigt vector `(E11, E22, E33, 2E23, 2E13, 2E12)`.
    pub fn engineering(&self) -> [f64; 6] {
        let e = &self.0;
        [e[0], e[1], e[2], 2.0 * e[3], 2.0 * e[4], 2.0 * e[5]]
    }
}

/// Symmetric part `(G + G^T) / 2` of a displacement gradient.
pub fn symmetric_gradient(g: &Matrix3<f64>) -> Strain {
    let s = |i: usize, j: usize| 0.5 * (g[(i, j)] + g[(j, i)]);
    Strain([s(0, 0), s(1, 1), s(2, 2), s(1, 2), s(0, 2), s(0, 1)])
}

/// Linear elasticity tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ElasticityTensor {
    /// Lamé moduli.
    Isotropic { lambda: f64, mu: f64 },
    /// Symmetric positive definite 6x6 stiffness in Voigt order, acting on
    /// engineering strains.
    General(Matrix6<f64>),
}

impl ElasticityTensor {
    pub fn isotropic(lambda: f64, mu: f64) -> Result<Self> {
        let c = ElasticityTensor::Isotropic { lambda, mu };
        c.validate()?;
        Ok(c)
    }

    pub fn general(c: Matrix6<f64>) -> Result<Self> {
        let c = ElasticityTensor::General(c);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ElasticityTensor::Isotropic { lambda, mu } => {
                if !(lambda.is_finite() && mu.is_finite()) {
                    return Err(Error::InvalidMaterial("Lamé moduli must be finite".into()));
                }
                if mu <= 0.0 {
                    return Err(Error::InvalidMaterial(format!("mu must be positive, got {mu}")));
                }
                if 3.0 * lambda + 2.0 * mu <= 0.0 {
                    return Err(Error::InvalidMaterial(format!(
                        "3 lambda + 2 mu must be positive, got {}",
                        3.0 * lambda + 2.0 * mu
                    )));
                }
                Ok(())
            }
            ElasticityTensor::General(ref c) => {
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidMaterial("stiffness entries must be finite".into()));
                }
                if *c != c.transpose() {
                    return Err(Error::InvalidMaterial("stiffness matrix is not symmetric".into()));
                }
                if c.cholesky().is_none() {
                    return Err(Error::InvalidMaterial(
                        "stiffness matrix is not positive definite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn lame(&self) -> Option<(f64, f64)> {
        match *self {
            ElasticityTensor::Isotropic { lambda, mu } => Some((lambda, mu)),
            ElasticityTensor::General(_) => None,
        }
    }

    /// Voigt stiffness (engineering convention).
    pub fn voigt(&self) -> Matrix6<f64> {
        match *self {
            ElasticityTensor::Isotropic { lambda, mu } => {
                let mut c = Matrix6::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        c[(i, j)] = lambda;
                    }
                    c[(i, i)] += 2.0 * mu;
                    c[(i + 3, i + 3)] = mu;
                }
                c
            }
            ElasticityTensor::General(c) => c,
        }
    }

    /// Hessian of `E -> W(E)` in tensor-strain coordinates, padded with zeros
    /// for the two `u_{alpha,33}` slots.
    pub fn energy_form(&self) -> EnergyForm {
        let c = self.voigt();
        let t = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        let mut m = EnergyForm::zeros();
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] = t[i] * c[(i, j)] * t[j];
            }
        }
        m
    }
}

/// Stored energy `W(E)`. Isotropic: `mu |E|^2 + lambda/2 (tr E)^2`;
/// general: `1/2 C[E].E`.
pub fn energy_density(e: &Strain, c: &ElasticityTensor) -> f64 {
    match *c {
        ElasticityTensor::Isotropic { lambda, mu } => {
            let tr = e.trace();
            mu * e.norm_squared() + 0.5 * lambda * tr * tr
        }
        ElasticityTensor::General(ref c) => {
            let v = e.engineering();
            let mut w = 0.0;
            for i in 0..6 {
                for j in 0..6 {
                    w += v[i] * c[(i, j)] * v[j];
                }
            }
            0.5 * w
        }
    }
}

/// Parameters of the thickness-dependent modified energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEnergyParams {
    pub kappa: f64,
    pub epsilon: f64,
    pub epsilon_r: f64,
}

impl KappaEnergyParams {
    pub fn new(kappa: f64, epsilon: f64, epsilon_r: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", format!("must be finite and >= 0, got {kappa}")));
        }
        if !(epsilon_r > 0.0 && epsilon_r.is_finite()) {
            return Err(invalid("epsilon_r", format!("must be positive, got {epsilon_r}")));
        }
        if !(epsilon > 0.0 && epsilon <= epsilon_r) {
            return Err(invalid(
                "epsilon",
                format!("must lie in (0, {epsilon_r}], got {epsilon}"),
            ));
        }
        Ok(KappaEnergyParams {
            kappa,
            epsilon,
            epsilon_r,
        })
    }

    /// The classical energy at the real thickness.
    pub fn classical(epsilon_r: f64) -> Self {
        KappaEnergyParams {
            kappa: 0.0,
            epsilon: epsilon_r,
            epsilon_r,
        }
    }

    /// `epsilon_r / epsilon`, at least 1.
    pub fn ratio(&self) -> f64 {
        self.epsilon_r / self.epsilon
    }

    // The coefficients below are written as `1 + kappa (r^k - 1)` rather than
    // `1 - kappa + kappa r^k`: the two agree algebraically, but only the
    // former is exactly 1 in floating point at `r = 1` for every kappa.

    /// Multiplier of the `E33^2` term.
    pub fn normal_factor(&self) -> f64 {
        let r = self.ratio();
        1.0 + self.kappa * (r * r - 1.0)
    }

    /// Multiplier of the `(E11 + E22) E33` coupling.
    pub fn coupling_factor(&self) -> f64 {
        1.0 + self.kappa * (self.ratio() - 1.0)
    }

    /// Weight of `(u1,33)^2 + (u2,33)^2`.
    pub fn penalty(&self) -> f64 {
        let d = self.ratio() - 1.0;
        self.kappa * d * d
    }
}

/// The modified isotropic energy density. `u33 = (u1,33, u2,33)`.
pub fn energy_density_kappa(e: &Strain, u33: [f64; 2], p: &KappaEnergyParams, lambda: f64, mu: f64) -> f64 {
    let [e11, e22, e33, e23, e13, e12] = e.0;
    let a = 0.5 * (2.0 * mu + lambda);
    let s = e11 + e22;
    a * s * s - 2.0 * mu * (e11 * e22 - e12 * e12)
        + a * p.normal_factor() * e33 * e33
        + lambda * p.coupling_factor() * s * e33
        + 2.0 * mu * (e13 * e13 + e23 * e23)
        + p.penalty() * (u33[0] * u33[0] + u33[1] * u33[1])
}

/// Hessian of [`energy_density_kappa`], so that `W = 1/2 v^T M v`.
pub fn kappa_energy_form(lambda: f64, mu: f64, p: &KappaEnergyParams) -> EnergyForm {
    let a = 0.5 * (2.0 * mu + lambda);
    let mut m = EnergyForm::zeros();
    m[(0, 0)] = 2.0 * a;
    m[(1, 1)] = 2.0 * a;
    m[(0, 1)] = 2.0 * a - 2.0 * mu;
    m[(1, 0)] = m[(0, 1)];
    m[(2, 2)] = 2.0 * a * p.normal_factor();
    let c = lambda * p.coupling_factor();
    m[(0, 2)] = c;
    m[(2, 0)] = c;
    m[(1, 2)] = c;
    m[(2, 1)] = c;
    m[(3, 3)] = 4.0 * mu;
    m[(4, 4)] = 4.0 * mu;
    m[(5, 5)] = 4.0 * mu;
    m[(6, 6)] = 2.0 * p.penalty();
    m[(7, 7)] = 2.0 * p.penalty();
    m
}

/// Energy form for a material under the given thickness parameters.
/// Anisotropic materials only admit the classical energy (`kappa = 0`).
pub fn material_energy_form(c: &ElasticityTensor, p: &KappaEnergyParams) -> Result<EnergyForm> {
    match (c, p.kappa) {
        (&ElasticityTensor::Isotropic { lambda, mu }, _) => Ok(kappa_energy_form(lambda, mu, p)),
        (ElasticityTensor::General(_), 0.0) => Ok(c.energy_form()),
        (ElasticityTensor::General(_), _) => Err(Error::InvalidMaterial(
            "the kappa-modified energy requires an isotropic material".into(),
        )),
    }
}

/// Smallest eigenvalue of a symmetric energy form.
pub fn min_eigenvalue(m: &EnergyForm) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

/// Bending moduli of the limit plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KLModuli {
    pub d_a: f64,
    pub dd_a: f64,
    pub h_r: f64,
}

impl KLModuli {
    pub fn new(d_a: f64, dd_a: f64, h_r: f64) -> Result<Self> {
        if !(d_a > 0.0 && dd_a > 0.0) {
            return Err(invalid("moduli", "D^a and d^a must be positive"));
        }
        if !(h_r > 0.0) {
            return Err(invalid("h_r", "half-thickness must be positive"));
        }
        Ok(KLModuli { d_a, dd_a, h_r })
    }

    /// `D^a h^3`, multiplies `(Delta w)^2`.
    pub fn bending(&self) -> f64 {
        self.d_a * self.h_r.powi(3)
    }

    /// `d^a h^3`, multiplies the Gaussian-curvature term.
    pub fn gaussian(&self) -> f64 {
        self.dd_a * self.h_r.powi(3)
    }
}

/// Plane-stress reduced plate moduli: with `lambda* = 2 lambda mu / (lambda + 2 mu)`,
/// `D^a = 2/3 (2 mu + lambda*)` and `d^a = 8/3 mu`.
pub fn kl_moduli_from_lame(lambda: f64, mu: f64, h_r: f64) -> Result<KLModuli> {
    ElasticityTensor::isotropic(lambda, mu)?;
    let lambda_star = 2.0 * lambda * mu / (lambda + 2.0 * mu);
    KLModuli::new(2.0 / 3.0 * (2.0 * mu + lambda_star), 8.0 / 3.0 * mu, h_r)
}
