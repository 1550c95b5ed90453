//! The thickness sweep: solve the three-dimensional problem along a
//! decreasing ladder of thickness parameters, transport every solution to the
//! real plate, and measure how it approaches the limit kinematics.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fem3d::{
    assemble, solve_with_stats, stationarity_residual, total_energy, transverse_shear_norm, CellGeometry,
    DisplacementField3D, ElementRule, Formulation, SparseSystem,
};
use crate::material::{kl_moduli_from_lame, ElasticityTensor, KappaEnergyParams};
use crate::mesh::{build_section_mesh, Mesh3D};
use crate::plate2d::{fit_rm, solve_kl, through_thickness_load, KLState};
use crate::scaling::{
    domain_at, fiber_average, load_sequence, pullback, scaled_components, DomainFamily, LoadSpec,
};
use crate::sparse::SolverOptions;

/// Structured mesh resolution, fixed along the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            nx: 16,
            ny: 16,
            nz: 1,
        }
    }
}

/// Thresholds of the pass/fail flags of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Largest admissible final KL deflection error.
    pub e_kl_max: f64,
    /// Smallest admissible log-log rate of the shear norm.
    pub shear_rate_min: f64,
    /// Largest admissible director gap at the smallest thickness (`kappa = 0`).
    pub director_gap_max: f64,
    /// Largest admissible final RM fit residual.
    pub rm_res_max: f64,
    /// Smallest admissible ratio of the director gap to its `kappa = 0`
    /// value at the smallest thickness (`kappa > 0`).
    pub gap_ratio_min: f64,
    /// Largest admissible max/min ratio of the scaled norms along the ladder.
    pub bound_factor: f64,
    /// Largest admissible relative stationarity residual.
    pub residual_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            e_kl_max: 0.05,
            shear_rate_min: 0.9,
            director_gap_max: 0.05,
            rm_res_max: 0.05,
            gap_ratio_min: 3.0,
            bound_factor: 3.0,
            residual_max: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: DomainFamily,
    pub material: ElasticityTensor,
    pub kappa: f64,
    /// Absolute thickness parameters, strictly decreasing from `epsilon_r`.
    pub ladder: Vec<f64>,
    pub mesh: MeshSpec,
    pub load: LoadSpec,
    pub formulation: Formulation,
    pub solver: SolverOptions,
    pub thresholds: Thresholds,
}

/// `epsilon_r * 2^{-k}` for `k = 0..n`.
pub fn default_ladder(epsilon_r: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| epsilon_r * 0.5f64.powi(k as i32)).collect()
}

impl SweepConfig {
    /// The real plate of `family` with the default ladder and mesh.
    pub fn new(family: DomainFamily, material: ElasticityTensor, kappa: f64) -> Self {
        SweepConfig {
            family,
            material,
            kappa,
            ladder: default_ladder(family.epsilon_r(), 5),
            mesh: MeshSpec::default(),
            load: LoadSpec::default(),
            formulation: Formulation::default(),
            solver: SolverOptions::default(),
            thresholds: Thresholds::default(),
        }
    }

    /// Checks everything except the position of the first ladder entry,
    /// which is an item of the recipe checklist.
    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.material.validate()?;
        self.load.validate()?;
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(invalid(
                "kappa",
                format!("must be finite and >= 0, got {}", self.kappa),
            ));
        }
        if self.ladder.is_empty() {
            return Err(invalid("ladder", "must contain at least one thickness"));
        }
        let er = self.family.epsilon_r();
        for (k, &e) in self.ladder.iter().enumerate() {
            if !(e > 0.0 && e <= er) {
                return Err(invalid(
                    "ladder",
                    format!("entry {k} = {e} is outside (0, epsilon_r] = (0, {er}]"),
                ));
            }
            if k > 0 && e >= self.ladder[k - 1] {
                return Err(invalid("ladder", "must be strictly decreasing"));
            }
        }
        let m = self.mesh;
        if m.nx < 2 || m.ny < 2 || m.nz < 1 {
            return Err(invalid("mesh", "needs nx, ny >= 2 and nz >= 1"));
        }
        if !(self.solver.tol > 0.0 && self.solver.max_iter_factor > 0.0) {
            return Err(invalid("solver", "tol and max_iter_factor must be positive"));
        }
        Ok(())
    }

    fn params(&self, epsilon: f64) -> Result<KappaEnergyParams> {
        KappaEnergyParams::new(self.kappa, epsilon, self.family.epsilon_r())
    }

    fn mesh_at(&self, epsilon: f64) -> Result<Mesh3D> {
        self.family
            .mesh_at(epsilon, self.mesh.nx, self.mesh.ny, self.mesh.nz)
    }

    fn real_mesh(&self) -> Result<Mesh3D> {
        self.family.real_mesh(self.mesh.nx, self.mesh.ny, self.mesh.nz)
    }

    /// Assembles the problem at `epsilon`.
    pub fn assemble_at(&self, epsilon: f64) -> Result<SparseSystem> {
        let mesh = Arc::new(self.mesh_at(epsilon)?);
        let load = load_sequence(&self.load, &self.family, epsilon)?;
        assemble(
            mesh,
            &self.material,
            &self.params(epsilon)?,
            &move |x| load.eval(x),
            self.formulation,
        )
    }
}

/// Metrics of one ladder entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Stationary value of the functional divided by `epsilon / epsilon_r`.
    pub energy: f64,
    /// Relative nodal L2 error between the fiber-averaged transverse
    /// displacement and the KL deflection; absent for anisotropic material.
    pub e_kl: Option<f64>,
    pub shear: f64,
    pub rm_res: f64,
    pub director_gap: f64,
    pub inplane_norm: f64,
    pub transverse_norm: f64,
    pub residual: f64,
    /// Reason of a failed solve; the metrics are NaN then.
    pub failed: Option<String>,
}

impl SweepRow {
    fn failed(epsilon: f64, reason: String) -> Self {
        SweepRow {
            epsilon,
            energy: f64::NAN,
            e_kl: None,
            shear: f64::NAN,
            rm_res: f64::NAN,
            director_gap: f64::NAN,
            inplane_norm: f64::NAN,
            transverse_norm: f64::NAN,
            residual: f64::NAN,
            failed: Some(reason),
        }
    }

    pub fn ok(&self) -> bool {
        self.failed.is_none()
    }
}

/// Log-log rates of the metrics, absent when fewer than three points qualify.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Rates {
    pub e_kl: Option<f64>,
    pub shear: Option<f64>,
    pub rm_res: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckItem {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        CheckItem {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    /// Wall-clock seconds per ladder entry, then the total.
    pub timings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub rates: Rates,
    /// Director gap of the `kappa = 0` problem at the smallest thickness,
    /// computed for `kappa > 0` sweeps.
    pub reference_gap: Option<f64>,
    pub checks: Vec<CheckItem>,
    pub metadata: Metadata,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The report without its timings, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.metadata.timings.clear();
        r
    }

    /// `epsilon,energy,e_kl,shear,rm_res,rate_flags`. The flags hold one
    /// character per metric (e_kl, shear, rm_res): `D` if it decreased from
    /// the previous row, `N` if not, `-` on the first row or when undefined;
    /// a failed row has the flags `failed`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,energy,e_kl,shear,rm_res,rate_flags\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for (k, r) in self.rows.iter().enumerate() {
            let flags = if !r.ok() {
                "failed".to_string()
            } else {
                let prev = k.checked_sub(1).map(|j| &self.rows[j]).filter(|p| p.ok());
                let flag = |now: Option<f64>, before: Option<f64>| match (now, before) {
                    (Some(a), Some(b)) if a < b => 'D',
                    (Some(_), Some(_)) => 'N',
                    _ => '-',
                };
                [
                    flag(r.e_kl, prev.and_then(|p| p.e_kl)),
                    flag(Some(r.shear), prev.map(|p| p.shear)),
                    flag(Some(r.rm_res), prev.map(|p| p.rm_res)),
                ]
                .iter()
                .collect()
            };
            s.push_str(&format!(
                "{:.12e},{:.12e},{},{:.12e},{:.12e},{}\n",
                r.epsilon,
                r.energy,
                opt(r.e_kl),
                r.shear,
                r.rm_res,
                flags
            ));
        }
        s
    }
}

/// Least-squares slope of `log(metric)` against `log(epsilon)` over the
/// pairs with positive finite entries; absent for fewer than three.
pub fn estimate_rate(epsilon: &[f64], metric: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = epsilon
        .iter()
        .zip(metric)
        .filter(|(e, m)| **e > 0.0 && **m > 0.0 && e.is_finite() && m.is_finite())
        .map(|(e, m)| (e.ln(), m.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Root mean squares of the in-plane and transverse components over the
/// plate.
pub fn scaled_norms(field: &DisplacementField3D) -> (f64, f64) {
    let mesh = &field.mesh;
    let rule = ElementRule::standard();
    let (mut a, mut b, mut vol) = (0.0, 0.0, 0.0);
    for c in 0..mesh.cells.len() {
        let geom = CellGeometry::of(mesh, c);
        for (xi, eta, s, w) in rule.points(&geom) {
            let u = field.displacement_at(c, xi, eta, s);
            a += w * (u[0] * u[0] + u[1] * u[1]);
            b += w * u[2] * u[2];
            vol += w;
        }
    }
    ((a / vol).sqrt(), (b / vol).sqrt())
}

/// The KL deflection of the real plate under the real load, for isotropic
/// material.
pub fn kl_reference(config: &SweepConfig) -> Result<Option<KLState>> {
    let Some((lambda, mu)) = config.material.lame() else {
        return Ok(None);
    };
    let f = &config.family;
    let moduli = kl_moduli_from_lame(lambda, mu, f.h)?;
    let section = Arc::new(build_section_mesh(f.ell, config.mesh.nx, config.mesh.ny)?);
    let br = load_sequence(&config.load, f, f.epsilon_r())?;
    let bbar = through_thickness_load(move |x| br.eval(x)[2], f.h);
    solve_kl(section, &moduli, &bbar).map(Some)
}

fn relative_nodal_error(avg: &[[f64; 3]], w: &KLState) -> f64 {
    let weights = w.mesh.nodal_weights();
    let (mut num, mut den) = (0.0, 0.0);
    for (p, q) in avg.iter().enumerate() {
        let wa = w.w(p);
        num += weights[p] * (q[2] - wa).powi(2);
        den += weights[p] * wa * wa;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn solve_row(
    config: &SweepConfig,
    epsilon: f64,
    reference: &Arc<Mesh3D>,
    kl: Option<&KLState>,
) -> Result<SweepRow> {
    let system = config.assemble_at(epsilon)?;
    let (u, _) = solve_with_stats(&system, &config.solver)?;
    let residual = stationarity_residual(&system, &u);
    let t = epsilon / config.family.epsilon_r();
    let energy = total_energy(&system, &u) / t;
    let pulled = pullback(&u, reference.clone())?;
    let scaled = scaled_components(&pulled, epsilon, config.family.epsilon_r()).scaled;
    let e_kl = kl.map(|w| relative_nodal_error(&fiber_average(&scaled), w));
    let shear = transverse_shear_norm(&scaled, config.formulation);
    let (rm, rm_res) = fit_rm(&scaled);
    let (inplane_norm, transverse_norm) = scaled_norms(&scaled);
    Ok(SweepRow {
        epsilon,
        energy,
        e_kl,
        shear,
        rm_res,
        director_gap: rm.director_gap(),
        inplane_norm,
        transverse_norm,
        residual,
        failed: None,
    })
}

fn solve_ladder(config: &SweepConfig) -> Result<(Vec<SweepRow>, Vec<f64>)> {
    let reference = Arc::new(config.real_mesh()?);
    let kl = kl_reference(config)?;
    let timed: Vec<(SweepRow, f64)> = config
        .ladder
        .par_iter()
        .map(|&eps| {
            let start = Instant::now();
            let row = solve_row(config, eps, &reference, kl.as_ref())
                .unwrap_or_else(|e| SweepRow::failed(eps, e.to_string()));
            (row, start.elapsed().as_secs_f64())
        })
        .collect();
    Ok(timed.into_iter().unzip())
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

/// Items of the recipe checklist that do not need solves.
fn structural_checks(config: &SweepConfig) -> Vec<CheckItem> {
    let f = &config.family;
    let er = f.epsilon_r();
    let mut out = Vec::new();

    let tiny = er * 1e-12;
    let limit = domain_at(f, tiny);
    out.push(match limit {
        Ok(b) => CheckItem::new(
            "domain family shrinks to the cross-section",
            b.ell == f.ell && b.half_thickness <= 1e-11 * f.h,
            format!(
                "half thickness {:.3e} at epsilon = {:.3e}, side {}",
                b.half_thickness, tiny, b.ell
            ),
        ),
        Err(e) => CheckItem::new("domain family shrinks to the cross-section", false, e.to_string()),
    });

    let first = config.ladder.first().copied();
    let starts = first == Some(er);
    let same_domain = starts
        && match (config.mesh_at(er), config.real_mesh()) {
            (Ok(a), Ok(b)) => {
                a == b && domain_at(f, er).map(|d| (d.ell, d.half_thickness)).ok() == Some((f.ell, f.h))
            }
            _ => false,
        };
    out.push(CheckItem::new(
        "first domain is the real plate",
        same_domain,
        format!("ladder starts at {:?}, epsilon_r = {er}", first),
    ));

    let same_problem = starts && {
        let real = KappaEnergyParams::classical(er);
        let br = load_sequence(&config.load, f, er);
        let ours = config.assemble_at(er);
        match (br, ours, config.real_mesh()) {
            (Ok(br), Ok(ours), Ok(mesh)) => {
                match assemble(
                    Arc::new(mesh),
                    &config.material,
                    &real,
                    &move |x| br.eval(x),
                    config.formulation,
                ) {
                    Ok(theirs) => {
                        ours.matrix == theirs.matrix && ours.load == theirs.load && ours.free == theirs.free
                    }
                    Err(_) => false,
                }
            }
            _ => false,
        }
    };
    out.push(CheckItem::new(
        "first problem is the real problem",
        same_problem,
        format!(
            "system at epsilon_r with kappa = {} against kappa = 0 and the real load",
            config.kappa
        ),
    ));
    out
}

fn boundedness_check(config: &SweepConfig, rows: &[SweepRow]) -> CheckItem {
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.ok()).collect();
    let factor = config.thresholds.bound_factor;
    let spread = |v: Vec<f64>| -> f64 {
        let max = v.iter().cloned().fold(0.0, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else {
            max / min
        }
    };
    let a = spread(ok.iter().map(|r| r.inplane_norm).collect());
    let b = spread(ok.iter().map(|r| r.transverse_norm).collect());
    CheckItem::new(
        "scaled solutions stay bounded",
        ok.len() == rows.len() && a <= factor && b <= factor,
        format!("max/min of in-plane {a:.4}, transverse {b:.4}, admissible {factor}"),
    )
}

/// Programmatic check of the two-step recipe: the domain family and its
/// limit, the first domain and problem being the real ones, and the
/// boundedness of the scaled solutions along the ladder.
pub fn validate_recipe(config: &SweepConfig) -> Vec<CheckItem> {
    let mut out = structural_checks(config);
    out.push(match config.validate().and_then(|_| solve_ladder(config)) {
        Ok((rows, _)) => boundedness_check(config, &rows),
        Err(e) => CheckItem::new("scaled solutions stay bounded", false, e.to_string()),
    });
    out
}

fn limit_checks(
    config: &SweepConfig,
    rows: &[SweepRow],
    rates: &Rates,
    reference_gap: Option<f64>,
) -> Vec<CheckItem> {
    let th = &config.thresholds;
    let mut out = Vec::new();
    let last = rows.last().expect("ladder is non-empty");
    if config.kappa == 0.0 {
        match rows.iter().map(|r| r.e_kl).collect::<Option<Vec<f64>>>() {
            Some(e) => {
                out.push(CheckItem::new(
                    "KL deflection error strictly decreasing",
                    strictly_decreasing(&e),
                    fmt_list(&e),
                ));
                let fin = *e.last().unwrap();
                out.push(CheckItem::new(
                    "final KL deflection error small",
                    fin <= th.e_kl_max,
                    format!("{fin:.4e} against {}", th.e_kl_max),
                ));
            }
            None => out.push(CheckItem::new(
                "KL deflection error strictly decreasing",
                false,
                "the KL comparison needs isotropic material",
            )),
        }
        let s: Vec<f64> = rows.iter().map(|r| r.shear).collect();
        out.push(CheckItem::new(
            "shear strictly decreasing",
            strictly_decreasing(&s),
            fmt_list(&s),
        ));
        out.push(CheckItem::new(
            "shear rate",
            rates.shear.is_some_and(|r| r >= th.shear_rate_min),
            format!("{:?} against {}", rates.shear, th.shear_rate_min),
        ));
        out.push(CheckItem::new(
            "director matches the deflection gradient",
            last.director_gap <= th.director_gap_max,
            format!(
                "{:.4e} against {} at epsilon = {}",
                last.director_gap, th.director_gap_max, last.epsilon
            ),
        ));
    } else {
        let r: Vec<f64> = rows.iter().map(|r| r.rm_res).collect();
        out.push(CheckItem::new(
            "RM fit residual strictly decreasing",
            strictly_decreasing(&r),
            fmt_list(&r),
        ));
        out.push(CheckItem::new(
            "final RM fit residual small",
            last.rm_res <= th.rm_res_max,
            format!("{:.4e} against {}", last.rm_res, th.rm_res_max),
        ));
        let ratio = reference_gap.map(|g| last.director_gap / g);
        out.push(CheckItem::new(
            "director gap retained",
            ratio.is_some_and(|q| q >= th.gap_ratio_min),
            format!(
                "gap {:.4e} against {:?} for kappa = 0: ratio {:?}, required {}",
                last.director_gap, reference_gap, ratio, th.gap_ratio_min
            ),
        ));
    }
    out
}

/// Solves the ladder and assembles the report. Failed solves are recorded
/// in their row and fail the report; the remaining entries still run.
pub fn run_sweep(config: &SweepConfig) -> Result<ConvergenceReport> {
    let start = Instant::now();
    config.validate()?;
    let (rows, mut timings) = solve_ladder(config)?;

    let good: Vec<&SweepRow> = rows.iter().filter(|r| r.ok()).collect();
    let eps: Vec<f64> = good.iter().map(|r| r.epsilon).collect();
    let series = |f: &dyn Fn(&SweepRow) -> f64| -> Vec<f64> { good.iter().map(|r| f(r)).collect() };
    let rates = Rates {
        e_kl: estimate_rate(&eps, &series(&|r| r.e_kl.unwrap_or(f64::NAN))),
        shear: estimate_rate(&eps, &series(&|r| r.shear)),
        rm_res: estimate_rate(&eps, &series(&|r| r.rm_res)),
    };

    let reference_gap = if config.kappa > 0.0 && rows.len() >= 3 {
        let mut classical = config.clone();
        classical.kappa = 0.0;
        let reference = Arc::new(config.real_mesh()?);
        let eps = *config.ladder.last().unwrap();
        solve_row(&classical, eps, &reference, None)
            .ok()
            .map(|r| r.director_gap)
    } else {
        None
    };

    let mut checks = structural_checks(config);
    checks.push(boundedness_check(config, &rows));
    let failed: Vec<f64> = rows.iter().filter(|r| !r.ok()).map(|r| r.epsilon).collect();
    checks.push(CheckItem::new(
        "every ladder entry solved",
        failed.is_empty(),
        format!("failed at {failed:?}"),
    ));
    let worst = good.iter().map(|r| r.residual).fold(0.0, f64::max);
    checks.push(CheckItem::new(
        "stationarity",
        failed.is_empty() && worst <= config.thresholds.residual_max,
        format!("largest relative residual {worst:.3e}"),
    ));
    // limit statements are asymptotic; they are judged on ladders long
    // enough to define a rate
    if failed.is_empty() && rows.len() >= 3 {
        checks.extend(limit_checks(config, &rows, &rates, reference_gap));
    }

    timings.push(start.elapsed().as_secs_f64());
    Ok(ConvergenceReport {
        config: config.clone(),
        rows,
        rates,
        reference_gap,
        checks,
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timings,
        },
    })
}
