//! Experiment configuration: a JSON document, every field but the geometry
//! optional. Unknown keys are rejected, and parse errors name the offending
//! key path.

use std::path::{Path, PathBuf};

use platelab::fem3d::Formulation;
use platelab::harness::{default_ladder, MeshSpec, SweepConfig, Thresholds};
use platelab::inertia::AccelerationProfile;
use platelab::material::{ElasticityTensor, KappaEnergyParams};
use platelab::scaling::{DomainFamily, LoadProfile, LoadSpec};
use platelab::sparse::SolverOptions;
use serde::{Deserialize, Serialize};

/// Lamé moduli.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lame {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for Lame {
    fn default() -> Self {
        Lame { lambda: 1.5, mu: 1.0 }
    }
}

/// Inertia experiment: the acceleration family and its own ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InertiaConfig {
    pub rho: f64,
    pub acceleration: [f64; 3],
    pub acceleration_profile: LoadProfile,
    pub test: [f64; 3],
    pub test_profile: LoadProfile,
    /// Absolute thickness parameters; defaults to three decades below
    /// `epsilon_r`.
    pub ladder: Option<Vec<f64>>,
}

impl Default for InertiaConfig {
    fn default() -> Self {
        let p = AccelerationProfile::default();
        InertiaConfig {
            rho: p.rho,
            acceleration: p.acceleration,
            acceleration_profile: p.acceleration_profile,
            test: p.test,
            test_profile: p.test_profile,
            ladder: None,
        }
    }
}

impl InertiaConfig {
    pub fn profile(&self) -> AccelerationProfile {
        AccelerationProfile {
            rho: self.rho,
            acceleration: self.acceleration,
            acceleration_profile: self.acceleration_profile,
            test: self.test,
            test_profile: self.test_profile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Half side `ell` and half thickness `h` of the real plate, in cm.
    pub geometry: DomainFamily,
    #[serde(default)]
    pub material: Lame,
    #[serde(default)]
    pub kappa: f64,
    /// Thickness parameter of `solve`; defaults to `epsilon_r`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Thickness ladder of `sweep`; defaults to `epsilon_r 2^{0..-4}`.
    #[serde(default)]
    pub ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub load: LoadSpec,
    /// Premultiplication exponent of `solve`.
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub inertia: InertiaConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("platelab-out")
}

/// A configuration problem, reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn fail(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| fail(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            fail(format!("config key `{path}`: {}", e.inner()))
        })
    }

    /// Fills the optional fields with their defaults, so that the echo is
    /// fully resolved.
    pub fn resolve(&mut self) {
        let er = self.geometry.epsilon_r();
        self.epsilon.get_or_insert(er);
        self.ladder.get_or_insert_with(|| default_ladder(er, 5));
        self.inertia
            .ladder
            .get_or_insert_with(|| (0..4).map(|k| er * 10f64.powi(-k)).collect());
    }

    /// Re-validates every module invariant that the config touches.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let msg = |e: platelab::Error| fail(e.to_string());
        self.sweep_config().map_err(msg)?.validate().map_err(msg)?;
        let er = self.geometry.epsilon_r();
        if let Some(eps) = self.epsilon {
            self.geometry.ratio(eps).map_err(msg)?;
            KappaEnergyParams::new(self.kappa, eps, er).map_err(msg)?;
        }
        if !self.beta.is_finite() {
            return Err(fail("invalid parameter `beta`: must be finite"));
        }
        self.inertia.profile().validate().map_err(msg)?;
        if let Some(l) = &self.inertia.ladder {
            if l.is_empty() {
                return Err(fail("invalid parameter `inertia.ladder`: must not be empty"));
            }
            for &e in l {
                self.geometry.ratio(e).map_err(msg)?;
            }
        }
        Ok(())
    }

    pub fn material(&self) -> platelab::Result<ElasticityTensor> {
        ElasticityTensor::isotropic(self.material.lambda, self.material.mu)
    }

    pub fn sweep_config(&self) -> platelab::Result<SweepConfig> {
        Ok(SweepConfig {
            family: self.geometry,
            material: self.material()?,
            kappa: self.kappa,
            ladder: self
                .ladder
                .clone()
                .unwrap_or_else(|| default_ladder(self.geometry.epsilon_r(), 5)),
            mesh: self.mesh,
            load: self.load,
            formulation: self.formulation,
            solver: self.solver,
            thresholds: self.thresholds,
        })
    }
}
