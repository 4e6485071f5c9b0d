//! Named verification experiments and their machine-readable reports.
//!
//! An [`ExperimentConfig`] names an experiment, a catalog entry and budgets;
//! [`run`] validates the hypotheses it can evaluate, refuses configurations
//! that violate them, and returns an [`ExperimentReport`] whose every number
//! carries a [`Provenance`].

mod experiments;
pub mod output;

pub use experiments::{
    chain, penalized, perturbed, radius, scalar, sharpness, ChainRecord, PenalizedChainRecord,
};

use crate::error::{invalid, Error, Result};
use crate::grassmann::SearchConfig;
use crate::immersions::{catalog, ParametricImmersion};
use crate::principles::Profile;
use crate::spaces::SpaceForm;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::PI;
use std::path::PathBuf;

/// Radius of the default geodesic-sphere entry when `R` is not given.
pub const DEFAULT_RADIUS: f64 = 2.0;

/// Current config and report schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// The min-max curvature estimate, extrinsic and intrinsic.
    Sharpness,
    /// Extrinsic radius bounds.
    Radius,
    /// Scalar curvature of hypersurfaces.
    Scalar,
    /// The inequality chain along a weak Hessian sequence.
    Chain,
    /// The penalized constructions for proper immersions.
    Penalized,
    /// Hessian comparison against a larger curvature bound.
    Perturbed,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Sharpness,
        Experiment::Radius,
        Experiment::Scalar,
        Experiment::Chain,
        Experiment::Penalized,
        Experiment::Perturbed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sharpness => "sharpness",
            Experiment::Radius => "radius",
            Experiment::Scalar => "scalar",
            Experiment::Chain => "chain",
            Experiment::Penalized => "penalized",
            Experiment::Perturbed => "perturbed",
        }
    }

    pub fn parse(s: &str) -> Result<Experiment> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| invalid(format!("unknown experiment `{s}`; known: {:?}", Experiment::ALL.map(Experiment::name))))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogRef {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative tolerance for sharpness equalities.
    pub relative: f64,
    /// Absolute tolerance for analytic identities and chain inequalities.
    pub analytic: f64,
    /// Relative singular-value cutoff for the algebraic codimension.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { relative: 1e-2, analytic: 1e-6, rank: crate::forms::DEFAULT_RANK_TOL }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    /// Directory receiving one CSV file per report table.
    pub csv: Option<PathBuf>,
    /// Directory receiving gnuplot data files.
    pub gnuplot: Option<PathBuf>,
    /// JSON-lines file receiving sequence records.
    pub jsonl: Option<PathBuf>,
}

/// Everything an experiment needs.
///
/// When `catalog` is absent the entry is
/// `geodesic_sphere_cylinder(b, m, R, l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: Experiment,
    pub catalog: Option<CatalogRef>,
    pub b: f64,
    /// Ball radius. For catalog entries it defaults to the extrinsic
    /// radius; without one it sizes the geodesic sphere.
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub m: usize,
    pub l: usize,
    /// Overrides the subspace-dimension threshold `p + l`.
    pub d_threshold: Option<usize>,
    /// Number of sample points.
    pub budget: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Runs entries that violate `p < m − l` instead of refusing them.
    pub override_codimension: bool,
    /// Search used to confirm and refine the best candidates.
    pub search: SearchConfig,
    /// Cheaper search applied at every sample of a scan.
    pub scan_search: SearchConfig,
    /// Scan candidates re-evaluated with `search`.
    pub confirm_top: usize,
    /// Compass-search rounds applied to the best sample.
    pub refine_rounds: usize,
    pub k_max: usize,
    /// Axial truncation radius for cylinder entries.
    pub truncation: f64,
    /// Growth profiles for the penalized experiment.
    pub growth: Vec<Profile>,
    /// Decay profile used for the sampled curvature hypothesis.
    pub decay: Profile,
    /// Curvature of the perturbed ambient.
    pub b_prime: f64,
    /// Radii sampled by the perturbed experiment.
    pub radii: Vec<f64>,
    /// Replaces the scanned curvature side of the radius experiment.
    pub synthetic_curvature: Option<f64>,
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: SCHEMA_VERSION,
            experiment: Experiment::Sharpness,
            catalog: None,
            b: 0.0,
            r: None,
            m: 3,
            l: 1,
            d_threshold: None,
            budget: 1000,
            seed: 0,
            tolerances: Tolerances::default(),
            override_codimension: false,
            search: SearchConfig { outer_starts: 6, inner_starts: 4, starts: 16, ..SearchConfig::default() },
            scan_search: SearchConfig {
                outer_starts: 2,
                inner_starts: 1,
                starts: 8,
                outer_min_step: 1e-3,
                max_iters: 30,
                tol: 1e-5,
                ..SearchConfig::default()
            },
            confirm_top: 5,
            refine_rounds: 20,
            k_max: 10,
            truncation: 3.0,
            growth: vec![Profile::constant(1.0), Profile::Power { c: 1.0, shift: 1.0, exponent: 1.0 }],
            decay: Profile::LogFamily { a: 1.0, j: 1 },
            b_prime: -1.0,
            radii: vec![0.25, 0.5, 1.0, 1.5, 2.0],
            synthetic_curvature: None,
            output: OutputPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig { experiment, ..ExperimentConfig::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.version != SCHEMA_VERSION {
            return Err(invalid(format!("unsupported config version {}; expected {SCHEMA_VERSION}", cfg.version)));
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
    }

    /// The catalog entry this config describes.
    pub fn immersion(&self) -> Result<ParametricImmersion> {
        match &self.catalog {
            Some(c) => catalog(&c.name, &c.params),
            None => {
                let r = self.r.unwrap_or(DEFAULT_RADIUS);
                catalog(
                    "geodesic_sphere_cylinder",
                    &serde_json::json!({"b": self.b, "m": self.m, "R": r, "l": self.l}),
                )
            }
        }
    }
}

/// Refuses radii outside `0 < R < min{inj_P(o), π/(2√b)}`.
pub fn validate_radius(b: f64, r: f64, p: &SpaceForm) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Hypothesis(format!("0 < R fails: R = {r}")));
    }
    let inj = p.injectivity_radius();
    if r >= inj {
        return Err(Error::Hypothesis(format!("R < inj_P(o) fails: R = {r}, inj_P(o) = {inj}")));
    }
    if b > 0.0 && r >= PI / (2.0 * b.sqrt()) {
        return Err(Error::Hypothesis(format!("R < π/(2√b) fails: R = {r}, π/(2√b) = {}", PI / (2.0 * b.sqrt()))));
    }
    Ok(())
}

/// Where a reported number comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Produced by the numerical pipeline under test.
    Computed,
    /// A right-hand side stated by a theorem.
    PaperBound,
    /// A closed-form value derived independently of the pipeline.
    DerivedOracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub provenance: Provenance,
}

impl Quantity {
    pub fn computed(value: f64) -> Self {
        Quantity { value, provenance: Provenance::Computed }
    }

    pub fn bound(value: f64) -> Self {
        Quantity { value, provenance: Provenance::PaperBound }
    }

    pub fn oracle(value: f64) -> Self {
        Quantity { value, provenance: Provenance::DerivedOracle }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `computed ≥ bound`.
    AtLeast,
    /// `computed ≤ bound`, reported with margin `bound − computed`.
    AtMost,
    /// `|computed − bound| ≤ tolerance`.
    Equal,
    /// `computed < bound` by more than the tolerance.
    StrictlyBelow,
    /// `computed > bound` by more than the tolerance.
    StrictlyAbove,
}

/// One comparison in a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub computed: Quantity,
    pub bound: Quantity,
    /// Signed so that nonnegative means satisfied; for [`Relation::Equal`]
    /// it is `computed − bound`.
    pub margin: Quantity,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl Check {
    pub fn new(name: impl Into<String>, relation: Relation, computed: Quantity, bound: Quantity, tolerance: f64) -> Self {
        let (c, b) = (computed.value, bound.value);
        let (margin, pass) = match relation {
            Relation::AtLeast => (c - b, c - b >= -tolerance),
            Relation::AtMost => (b - c, b - c >= -tolerance),
            Relation::Equal => (c - b, (c - b).abs() <= tolerance),
            Relation::StrictlyBelow => (b - c, b - c > tolerance),
            Relation::StrictlyAbove => (c - b, c - b > tolerance),
        };
        Check {
            name: name.into(),
            relation,
            computed,
            bound,
            margin: Quantity::computed(margin),
            tolerance,
            pass: pass && c.is_finite() && b.is_finite(),
            k: None,
        }
    }

    pub fn at_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisStatus {
    /// Checked exactly.
    Verified,
    /// Checked on samples only.
    Sampled,
    /// Holds trivially for this entry.
    Vacuous,
    /// Fails; the experiment ran only because of an override.
    Violated,
    /// Could not be evaluated.
    NotChecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub status: HypothesisStatus,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub provenance: Provenance,
}

/// Per-point traces: one row per sample or per `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[(&str, Provenance)]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|&(name, provenance)| Column { name: name.to_string(), provenance }).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub experiment: Experiment,
    pub entry: String,
    pub entry_parameters: Value,
    /// Seconds since the Unix epoch; omitted for reproducible output.
    pub generated_unix_s: Option<u64>,
    pub config: ExperimentConfig,
    pub hypotheses: Vec<Hypothesis>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    /// Which conclusion of a multi-branch statement applied.
    pub branch: Option<String>,
    /// Every check passed.
    pub passed: bool,
}

impl ExperimentReport {
    fn new(cfg: &ExperimentConfig, f: Option<&ParametricImmersion>) -> Self {
        ExperimentReport {
            version: SCHEMA_VERSION,
            experiment: cfg.experiment,
            entry: f.map(|f| f.name().to_string()).unwrap_or_default(),
            entry_parameters: f.map(|f| f.info().parameters.clone()).unwrap_or(Value::Null),
            generated_unix_s: None,
            config: cfg.clone(),
            hypotheses: Vec::new(),
            checks: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
            branch: None,
            passed: false,
        }
    }

    fn finish(mut self) -> Self {
        self.passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn checks_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn with_timestamp(mut self) -> Self {
        self.generated_unix_s =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).ok().map(|d| d.as_secs());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        Experiment::Sharpness => sharpness(cfg),
        Experiment::Radius => radius(cfg),
        Experiment::Scalar => scalar(cfg),
        Experiment::Chain => chain(cfg).map(|(r, _)| r),
        Experiment::Penalized => penalized(cfg).map(|(r, _)| r),
        Experiment::Perturbed => perturbed(cfg),
    }
}

/// Caps the global thread pool at `CURVBOUND_THREADS` when it is set.
/// Returns the cap that was applied.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(v) = std::env::var("CURVBOUND_THREADS") else {
        return Ok(None);
    };
    let n: usize = v.trim().parse().map_err(|_| invalid(format!("CURVBOUND_THREADS must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(invalid("CURVBOUND_THREADS must be positive"));
    }
    // A second call finds the pool already built; the first cap stays.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}
