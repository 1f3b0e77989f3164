//! Scenario files and their execution.
//!
//! A scenario is a JSON object with a `kind` and kind-specific fields.
//! Execution is pure: it returns a report and named output documents, and
//! leaves writing them to the caller.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::contact::{
    cone_compatibility_error, cone_homogeneity_error, ContactError, SphereScenario,
};
use crate::dynamics::{
    decay_residual, dissipation_check, format_float, integrate, trajectory_csv, IntegratorSpec,
    Method, Trajectory,
};
use crate::einstein::{einstein_verdict_on, samples_csv, EinsteinError, Verdict};
use crate::equilibria::{rayleigh_family_distance, solve_re, verify_re_flow, EquilibriumRow};
use crate::lie::{
    check_reduction_hypotheses, cone_orbit_tangent_dim, isotropy_algebra, ker_mu, kernel_algebra,
    ray_isotropy_algebra, Covector, LieAlgebra, Subalgebra,
};
use crate::phase::{ConformalSystem, PhasePoint};
use crate::reduction::{
    pi_relatedness_error, reduced_form_pullback_error, RayConstraint, ReductionError,
    ReductionReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Simulate,
    Reduce,
    Equilibria,
    LieAnalyze,
    EinsteinCheck,
    ConeCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgebraSpec {
    Catalog(String),
    Inline(Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Radius of the start ball for equilibrium searches.
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_count() -> usize {
    100
}

fn default_radius() -> f64 {
    2.0
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            count: default_count(),
            seed: 0,
            radius: default_radius(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Constant,
    NonConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub system: Option<String>,
    #[serde(default)]
    pub sphere: Option<String>,
    #[serde(default)]
    pub algebra: Option<AlgebraSpec>,
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    #[serde(default)]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub integrator: Option<IntegratorSpec>,
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub samples: Option<usize>,
    pub expect: Option<Expectation>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("cannot parse scenario at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{module}: {message}")]
    Domain {
        module: &'static str,
        message: String,
    },
}

impl RunError {
    pub fn code(&self) -> &'static str {
        match self {
            RunError::Parse { .. } => "parse_error",
            RunError::Invalid(_) => "invalid_scenario",
            RunError::Domain { .. } => "domain_error",
        }
    }
}

macro_rules! domain_from {
    ($($ty:ty => $module:literal),* $(,)?) => {
        $(impl From<$ty> for RunError {
            fn from(e: $ty) -> Self {
                RunError::Domain { module: $module, message: e.to_string() }
            }
        })*
    };
}

domain_from!(
    crate::lie::LieError => "lie",
    crate::phase::PhaseError => "phase",
    crate::dynamics::DynamicsError => "dynamics",
    ReductionError => "reduction",
    crate::equilibria::EquilibriaError => "equilibria",
    ContactError => "contact",
    EinsteinError => "einstein",
);

/// Outcome of a scenario whose computation finished.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: Value,
    /// `(file name, contents)` pairs.
    pub files: Vec<(String, String)>,
    /// Set when the method answers "no": failed hypotheses or an unmet expectation.
    pub rejection: Option<String>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| RunError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let need = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(RunError::Invalid(format!(
                    "scenario {:?} of kind {} requires field {field:?}",
                    self.name,
                    kind_name(self.kind)
                )))
            }
        };
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(RunError::Invalid(
                "name must be a nonempty file stem".into(),
            ));
        }
        match self.kind {
            ScenarioKind::Simulate => {
                need(self.system.is_some(), "system")?;
                need(self.initial.is_some(), "initial")?;
                need(self.integrator.is_some(), "integrator")?;
            }
            ScenarioKind::Reduce | ScenarioKind::Equilibria => {
                need(self.system.is_some(), "system")?;
                need(self.mu.is_some(), "mu")?;
            }
            ScenarioKind::LieAnalyze => {
                need(self.algebra.is_some(), "algebra")?;
                need(self.mu.is_some(), "mu")?;
            }
            ScenarioKind::EinsteinCheck | ScenarioKind::ConeCheck => {
                need(self.sphere.is_some(), "sphere")?
            }
        }
        if let Some(i) = &self.integrator {
            i.validate()?;
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), RunError> {
        if o.seed.is_some() || o.samples.is_some() {
            let mut s = self.sampling.unwrap_or_default();
            if let Some(seed) = o.seed {
                s.seed = seed;
            }
            if let Some(n) = o.samples {
                s.count = n;
            }
            self.sampling = Some(s);
        }
        if o.dt.is_some() || o.t_final.is_some() {
            let mut i = self.integrator.unwrap_or(IntegratorSpec::rk4(1e-3, 1.0));
            if let Some(dt) = o.dt {
                i.dt = dt;
            }
            if let Some(t) = o.t_final {
                i.t_final = t;
            }
            self.integrator = Some(i);
        }
        if o.expect.is_some() {
            self.expect = o.expect;
        }
        self.validate()
    }

    fn sampling(&self) -> SamplingSpec {
        self.sampling.unwrap_or_default()
    }

    fn system(&self) -> Result<ConformalSystem, RunError> {
        Ok(ConformalSystem::from_catalog(
            self.system.as_deref().unwrap_or_default(),
        )?)
    }

    fn mu(&self) -> Covector {
        Covector::new(self.mu.clone().unwrap_or_default())
    }

    fn initial(&self) -> Option<PhasePoint> {
        self.initial
            .as_ref()
            .map(|s| PhasePoint::new(s.q.clone(), s.p.clone()))
    }
}

pub fn kind_name(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::Simulate => "simulate",
        ScenarioKind::Reduce => "reduce",
        ScenarioKind::Equilibria => "equilibria",
        ScenarioKind::LieAnalyze => "lie-analyze",
        ScenarioKind::EinsteinCheck => "einstein-check",
        ScenarioKind::ConeCheck => "cone-check",
    }
}

/// Built-in scenarios, keyed by name.
pub const BUILTIN: &[(&str, &str)] = &[
    (
        "rayleigh4-simulate",
        r#"{"name": "rayleigh4-simulate", "kind": "simulate", "system": "rayleigh4",
            "initial": {"q": [1, 0, 0, 1], "p": [0, 1, -1, 0]},
            "integrator": {"method": "rk4", "dt": 0.001, "t_final": 2}}"#,
    ),
    (
        "harmonic-split-simulate",
        r#"{"name": "harmonic-split-simulate", "kind": "simulate", "system": "harmonic:2:1",
            "initial": {"q": [1, 0.5], "p": [-0.3, 1]},
            "integrator": {"method": "conformal_split", "dt": 0.01, "t_final": 5}}"#,
    ),
    (
        "rayleigh4-reduce",
        r#"{"name": "rayleigh4-reduce", "kind": "reduce", "system": "rayleigh4", "mu": [0, 1],
            "initial": {"q": [0.6, 0.8, 0, 1], "p": [0.12, 0.16, -1, 0]},
            "integrator": {"method": "rk4", "dt": 0.001, "t_final": 1},
            "sampling": {"count": 100, "seed": 1}}"#,
    ),
    (
        "rayleigh4-equilibria",
        r#"{"name": "rayleigh4-equilibria", "kind": "equilibria", "system": "rayleigh4", "mu": [0, 1],
            "initial": {"q": [0, 0, 0, 1], "p": [0, 0, -1, 0]},
            "integrator": {"method": "rk4", "dt": 0.001, "t_final": 1},
            "sampling": {"count": 20, "seed": 1, "radius": 0.5}}"#,
    ),
    (
        "sl2-lie-analyze",
        r#"{"name": "sl2-lie-analyze", "kind": "lie-analyze", "algebra": "sl2", "mu": [0, 1, 0]}"#,
    ),
    (
        "so3-lie-analyze",
        r#"{"name": "so3-lie-analyze", "kind": "lie-analyze", "algebra": "so3", "mu": [0, 0, 1]}"#,
    ),
    (
        "s7-unweighted-einstein",
        r#"{"name": "s7-unweighted-einstein", "kind": "einstein-check", "sphere": "s7-unweighted",
            "mu": [1, 1], "sampling": {"count": 10000, "seed": 1}, "expect": "constant"}"#,
    ),
    (
        "s7-weighted-einstein",
        r#"{"name": "s7-weighted-einstein", "kind": "einstein-check", "sphere": "s7-weighted:1:2",
            "mu": [1, 1], "sampling": {"count": 10000, "seed": 1}, "expect": "non_constant"}"#,
    ),
    (
        "s3-cone-check",
        r#"{"name": "s3-cone-check", "kind": "cone-check", "sphere": "s3-cone",
            "sampling": {"count": 100, "seed": 1}}"#,
    ),
];

/// Model keys accepted in `system`, `algebra` and `sphere` fields.
pub const MODELS: &[(&str, &str)] = &[
    (
        "rayleigh4",
        "system: two planar oscillators, Rayleigh damping on the first",
    ),
    (
        "rayleigh4-reduced",
        "system: reduced model of rayleigh4 at mu = (0, 1)",
    ),
    (
        "harmonic:n:k",
        "system: n-dimensional oscillator with constant damping k",
    ),
    ("sl2", "algebra: sl(2,R) in the basis (h, e, f)"),
    ("so3", "algebra: so(3)"),
    ("abelian:d", "algebra: abelian of dimension d"),
    (
        "s7-unweighted",
        "sphere: S^7 with weights [[-1,1,0,0],[0,0,1,1]], mu = (1, 1)",
    ),
    (
        "s7-weighted:l0:l1",
        "sphere: S^7 with weights [[l0,0,0,0],[0,l1,0,0]], e.g. s7-weighted:1:2",
    ),
    (
        "s3-cone",
        "sphere: S^3 with the diagonal circle action, mu = 1",
    ),
];

pub fn builtin(name: &str) -> Option<Scenario> {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::parse(text).expect("built-in scenarios are valid"))
}

pub fn list_catalog() -> String {
    let mut out = String::from("scenarios:\n");
    for (name, _) in BUILTIN {
        let kind = builtin(name).map(|s| kind_name(s.kind)).unwrap_or_default();
        out.push_str(&format!("  {name}\t{kind}\n"));
    }
    out.push_str("models:\n");
    for (key, about) in MODELS {
        out.push_str(&format!("  {key}\t{about}\n"));
    }
    out
}

pub fn run_scenario(s: &Scenario, format: OutputFormat) -> Result<RunOutput, RunError> {
    s.validate()?;
    match s.kind {
        ScenarioKind::Simulate => run_simulate(s, format),
        ScenarioKind::Reduce => run_reduce(s),
        ScenarioKind::Equilibria => run_equilibria(s, format),
        ScenarioKind::LieAnalyze => run_lie_analyze(s),
        ScenarioKind::EinsteinCheck => run_einstein(s, format),
        ScenarioKind::ConeCheck => run_cone(s),
    }
}

fn data_file(s: &Scenario, format: OutputFormat, csv: String, json: Value) -> (String, String) {
    let body = match format {
        OutputFormat::Csv => csv,
        OutputFormat::Json => json.to_string() + "\n",
    };
    (format!("{}.{}", s.name, format.extension()), body)
}

fn trajectory_json(traj: &Trajectory) -> Value {
    json!({
        "t": traj.times,
        "q": traj.states.iter().map(|x| x.q.as_slice().to_vec()).collect::<Vec<_>>(),
        "p": traj.states.iter().map(|x| x.p.as_slice().to_vec()).collect::<Vec<_>>(),
        "f_integral": traj.f_integral,
    })
}

fn run_simulate(s: &Scenario, format: OutputFormat) -> Result<RunOutput, RunError> {
    let system = s.system()?;
    let x0 = s.initial().expect("validated");
    let spec = s.integrator.expect("validated");
    let traj = integrate(&system, &x0, &spec)?;
    let report = json!({
        "scenario": s.name,
        "kind": "simulate",
        "system": system.name(),
        "method": spec.method,
        "dt": spec.dt,
        "t_final": spec.t_final,
        "steps": traj.len() - 1,
        "decay_residual": decay_residual(&system, &traj),
        "dissipation_residual": dissipation_check(&system, &traj),
        "final_q": traj.last().q.as_slice(),
        "final_p": traj.last().p.as_slice(),
    });
    let file = data_file(
        s,
        format,
        trajectory_csv(&system, &traj),
        trajectory_json(&traj),
    );
    Ok(RunOutput {
        report,
        files: vec![file],
        rejection: None,
    })
}

fn run_reduce(s: &Scenario) -> Result<RunOutput, RunError> {
    let system = s.system()?;
    let mu = s.mu();
    let hypotheses = check_reduction_hypotheses(system.algebra(), &mu)?;
    if !hypotheses.all_hold() {
        return Ok(RunOutput {
            report: json!({"scenario": s.name, "kind": "reduce", "mu": mu.coords(), "hypotheses": hypotheses}),
            files: vec![],
            rejection: Some("reduction hypotheses fail".into()),
        });
    }
    let constraint = RayConstraint::new(system, mu.clone())?;
    let sampling = s.sampling();
    let pullback = reduced_form_pullback_error(&constraint, sampling.count, sampling.seed)?;
    let pi_related_error = match (s.initial(), s.integrator) {
        (Some(x0), Some(spec)) => match pi_relatedness_error(&constraint, &x0, &spec) {
            Ok(e) => Some(e),
            Err(ReductionError::Unsupported(_)) => None,
            Err(e) => return Err(e.into()),
        },
        _ => None,
    };
    let report = ReductionReport {
        scenario: s.name.clone(),
        mu: mu.coords().to_vec(),
        dims: constraint.dimension_report(),
        hypotheses,
        pullback_error: pullback.max_discrepancy,
        degeneracy_error: pullback.max_degeneracy,
        pi_related_error,
    };
    let mut report = serde_json::to_value(&report).expect("report serializes");
    report["kind"] = json!("reduce");
    report["samples"] = json!(sampling.count);
    Ok(RunOutput {
        report,
        files: vec![],
        rejection: None,
    })
}

fn run_equilibria(s: &Scenario, format: OutputFormat) -> Result<RunOutput, RunError> {
    let system = s.system()?;
    let mu = s.mu();
    let sampling = s.sampling();
    let spec = s.integrator.unwrap_or(IntegratorSpec::rk4(1e-3, 1.0));
    let n = system.dim();
    let d = system.algebra().dim();
    let center = s.initial().unwrap_or_else(|| PhasePoint::zeros(n));
    let is_rayleigh = system.name() == "rayleigh4";

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for i in 0..sampling.count {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed.wrapping_add(i as u64));
        let x_init = perturb(&center, sampling.radius, &mut rng);
        let xi_init = DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5));
        match solve_re(&system, &mu, &x_init, &xi_init) {
            Ok(re) => {
                let flow_error = verify_re_flow(&system, &re, spec.t_final, spec.dt)?;
                rows.push(EquilibriumRow {
                    x: re.x.stacked().iter().copied().collect(),
                    xi: re.xi.iter().copied().collect(),
                    residual: re.residual,
                    flow_error,
                });
            }
            Err(e) => failures.push(json!({"start": i, "error": e.to_string()})),
        }
    }
    let mut report = json!({
        "scenario": s.name,
        "kind": "equilibria",
        "system": system.name(),
        "mu": mu.coords(),
        "starts": sampling.count,
        "converged": rows.len(),
        "failures": failures,
        "max_residual": rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        "max_flow_error": rows.iter().map(|r| r.flow_error).fold(0.0, f64::max),
    });
    if is_rayleigh {
        let dist = rows
            .iter()
            .map(|r| {
                rayleigh_family_distance(&PhasePoint::from_stacked(&DVector::from_vec(r.x.clone())))
            })
            .fold(0.0, f64::max);
        report["max_family_distance"] = json!(dist);
    }
    let mut header: Vec<String> = (0..2 * n).map(|k| format!("x{k}")).collect();
    header.extend((0..d).map(|k| format!("xi{k}")));
    header.extend(["residual".into(), "flow_error".into()]);
    let mut csv = header.join(",") + "\n";
    for r in &rows {
        let cells: Vec<String> =
            r.x.iter()
                .chain(&r.xi)
                .chain([&r.residual, &r.flow_error])
                .map(|&v| format_float(v))
                .collect();
        csv.push_str(&(cells.join(",") + "\n"));
    }
    let file = data_file(s, format, csv, json!(rows));
    Ok(RunOutput {
        report,
        files: vec![file],
        rejection: None,
    })
}

fn perturb<R: Rng + ?Sized>(center: &PhasePoint, radius: f64, rng: &mut R) -> PhasePoint {
    let x = center.stacked();
    let dir =
        DVector::<f64>::from_fn(x.len(), |_, _| rng.sample(rand_distr::StandardNormal)).normalize();
    let r = radius * rng.random::<f64>().powf(1.0 / x.len() as f64);
    PhasePoint::from_stacked(&(x + dir * r))
}

fn basis_rows(sub: &Subalgebra) -> Vec<Vec<f64>> {
    sub.vectors()
        .iter()
        .map(|v| v.iter().copied().collect())
        .collect()
}

fn run_lie_analyze(s: &Scenario) -> Result<RunOutput, RunError> {
    let alg = match s.algebra.as_ref().expect("validated") {
        AlgebraSpec::Catalog(key) => LieAlgebra::from_catalog(key)?,
        AlgebraSpec::Inline(v) => LieAlgebra::from_json(v)?,
    };
    let mu = s.mu();
    let hyp = check_reduction_hypotheses(&alg, &mu)?;
    let report = json!({
        "scenario": s.name,
        "kind": "lie-analyze",
        "dim": alg.dim(),
        "mu": mu.coords(),
        "dim_isotropy": hyp.dim_isotropy,
        "dim_ker_mu": hyp.dim_ker_mu,
        "dim_kernel_alg": hyp.dim_kernel_alg,
        "dim_ray_isotropy": hyp.dim_ray_isotropy,
        "sum_condition_holds": hyp.sum_condition_holds,
        "kernel_is_ideal_in_isotropy": hyp.kernel_is_ideal_in_isotropy,
        "cone_orbit_tangent_dim": cone_orbit_tangent_dim(&alg, &mu)?,
        "isotropy_basis": basis_rows(&isotropy_algebra(&alg, &mu)?),
        "ker_mu_basis": basis_rows(&ker_mu(&alg, &mu)?),
        "kernel_basis": basis_rows(&kernel_algebra(&alg, &mu)?),
        "ray_isotropy_basis": basis_rows(&ray_isotropy_algebra(&alg, &mu)?),
    });
    Ok(RunOutput {
        report,
        files: vec![],
        rejection: (!hyp.all_hold()).then(|| "reduction hypotheses fail".to_string()),
    })
}

fn sphere_and_mu(s: &Scenario) -> Result<(SphereScenario, Covector), RunError> {
    let sc = SphereScenario::from_catalog(s.sphere.as_deref().expect("validated"))?;
    let mu =
        s.mu.clone()
            .map(Covector::new)
            .unwrap_or_else(|| sc.mu.clone());
    Ok((sc, mu))
}

fn run_einstein(s: &Scenario, format: OutputFormat) -> Result<RunOutput, RunError> {
    let (sc, mu) = sphere_and_mu(s)?;
    let sampling = s.sampling();
    let samples = sc
        .sphere
        .sample_ray_level(&mu, sampling.count, sampling.seed)?;
    let v = einstein_verdict_on(&sc.sphere, &mu, &samples)?;
    let report = json!({
        "scenario": s.name,
        "kind": "einstein-check",
        "sphere": sc.key,
        "mu": mu.coords(),
        "kernel_basis": v.kernel_basis,
        "samples": sampling.count,
        "seed": sampling.seed,
        "rejected": samples.rejected,
        "mean_norm": v.mean,
        "relative_std": v.relative_std,
        "relative_range": v.relative_range,
        "threshold": v.threshold,
        "verdict": v.verdict,
    });
    let rejection = s.expect.and_then(|e| {
        let want = match e {
            Expectation::Constant => Verdict::Constant,
            Expectation::NonConstant => Verdict::NonConstant,
        };
        (want != v.verdict)
            .then(|| format!("verdict {:?} differs from expectation {e:?}", v.verdict))
    });
    let rows: Vec<Value> = samples
        .points
        .iter()
        .zip(&v.norm_values)
        .map(|(z, n)| json!({"z": z.as_slice(), "norm": n}))
        .collect();
    let file = data_file(s, format, samples_csv(&samples, &v), json!(rows));
    Ok(RunOutput {
        report,
        files: vec![file],
        rejection,
    })
}

fn run_cone(s: &Scenario) -> Result<RunOutput, RunError> {
    let (sc, mu) = sphere_and_mu(s)?;
    let sampling = s.sampling();
    let hyp = check_reduction_hypotheses(&sc.sphere.algebra(), &mu)?;
    if !hyp.all_hold() {
        return Ok(RunOutput {
            report: json!({"scenario": s.name, "kind": "cone-check", "mu": mu.coords(), "hypotheses": hyp}),
            files: vec![],
            rejection: Some("reduction hypotheses fail".into()),
        });
    }
    let compat = cone_compatibility_error(&sc.sphere, &mu, sampling.count, sampling.seed)?;
    let homogeneity = cone_homogeneity_error(&sc.sphere, sampling.count, sampling.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut reeb = 0.0f64;
    let mut fiber = 0.0f64;
    for _ in 0..sampling.count.min(20) {
        let z = sc.sphere.random_point(&mut rng);
        reeb = reeb.max(sc.sphere.reeb_invariance_error(&z, 2.0 * PI));
        let j = sc.sphere.contact_momentum(&z).0;
        let h = sc.sphere.hopf_project(&z);
        fiber = fiber.max((sc.sphere.contact_momentum(&h).0 - j).amax());
    }
    let report = json!({
        "scenario": s.name,
        "kind": "cone-check",
        "sphere": sc.key,
        "mu": mu.coords(),
        "samples": sampling.count,
        "cone_compatibility_error": compat.max_discrepancy,
        "momentum_identity_error": compat.max_momentum_defect,
        "homogeneity_error": homogeneity,
        "reeb_invariance_error": reeb,
        "hopf_fiber_momentum_error": fiber,
    });
    Ok(RunOutput {
        report,
        files: vec![],
        rejection: None,
    })
}

/// Scenario text for an ad hoc `einstein-check` on a catalog sphere.
pub fn einstein_scenario(sphere: &str, mu: Option<Vec<f64>>) -> Scenario {
    Scenario {
        name: format!("einstein-{}", sphere.replace(':', "_")),
        kind: ScenarioKind::EinsteinCheck,
        system: None,
        sphere: Some(sphere.to_string()),
        algebra: None,
        mu,
        initial: None,
        integrator: None,
        sampling: Some(SamplingSpec {
            count: 10_000,
            seed: 1,
            radius: default_radius(),
        }),
        expect: None,
    }
}

/// Scenario for an ad hoc `equilibria` search on a catalog system.
pub fn equilibria_scenario(system: &str, mu: Vec<f64>) -> Scenario {
    Scenario {
        name: format!("equilibria-{}", system.replace(':', "_")),
        kind: ScenarioKind::Equilibria,
        system: Some(system.to_string()),
        sphere: None,
        algebra: None,
        mu: Some(mu),
        initial: None,
        integrator: Some(IntegratorSpec {
            method: Method::Rk4,
            dt: 1e-3,
            t_final: 1.0,
        }),
        sampling: Some(SamplingSpec {
            count: 20,
            seed: 1,
            radius: default_radius(),
        }),
        expect: None,
    }
}
