//! The scenario interchange format and its runner.
//!
//! A scenario file (JSON, `version: 1`) declares a model — either one of
//! the named builders or an explicit space/grid/step-unitaries/initial
//! bundle — plus named projectors, named PDIs, history families, and a
//! query list. Complex numbers are `[re, im]` pairs; matrices are
//! row-major nested arrays.
//!
//! Everything is validated at load: a scenario that violates an invariant
//! never reaches query execution. Query execution never aborts the run;
//! failures become error entries in the report.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{
    CrossedBeamModel, DynamicsError, SternGerlachModel, TimeGrid, UnitarySchedule,
};
use crate::frameworks::{
    common_refinement, families_compatible, pdis_compatible, CompatibilityKind, FrameworkError,
};
use crate::hilbert::{
    HilbertError, HilbertSpace, Observable, Pdi, Projector, Subsystem, DEFAULT_CLUSTER_TOL,
};
use crate::histories::{EventPredicate, HistoryError, HistoryFamily, DEFAULT_CONSISTENCY_TOL};
use crate::linalg::{c64, ComplexMatrix, ComplexVector, LinalgError, Tolerance};
use crate::report::{
    CompatResult, ConditionalResult, ConsistencyResult, ProbEntry, ProbTable, QueryError,
    QueryResult, RefineResult, Report, ResultValue,
};

/// Any error produced by the engine modules, for uniform wrapping.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("I/O error reading `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported scenario version {0} (expected 1)")]
    Version(u32),
    #[error("missing required field `{0}` (no model builder declared)")]
    MissingField(&'static str),
    #[error("field `{0}` conflicts with the model builder declaration")]
    ConflictsWithBuilder(&'static str),
    #[error("unknown model builder `{0}` (known: stern_gerlach, crossed_beam)")]
    UnknownBuilder(String),
    #[error("unknown demo `{0}` (known: stern_gerlach, crossed_beam)")]
    UnknownDemo(String),
    #[error("builder `{builder}`: {message}")]
    BuilderArgs { builder: String, message: String },
    #[error("duplicate {kind} name `{name}`")]
    NameCollision { kind: &'static str, name: String },
    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
    #[error("name references are not allowed inside the projectors/pdis tables (`{0}`)")]
    NamedInTable(String),
    #[error("subsystem `{name}` declares dim {dim} but has {got} basis labels")]
    SubsystemDim {
        name: String,
        dim: usize,
        got: usize,
    },
    #[error("matrix rows have unequal lengths")]
    RaggedMatrix,
    #[error("bad event syntax `{0}` (expected label@tK)")]
    EventSyntax(String),
    #[error("duplicate projector label `{label}` in PDI of `{object}`")]
    DuplicatePdiLabel { object: String, label: String },
    #[error("query {index}: {message}")]
    Query { index: usize, message: String },
    #[error("compat query needs exactly one of `pdis` or `families`")]
    CompatArgs,
    #[error("invalid tolerance {0}")]
    BadTolerance(f64),
    #[error("initial state is not normalized: ‖ψ‖² = {0}")]
    InitialNotNormalized(f64),
    #[error("validation failed for {object}: {source}")]
    Validation {
        object: String,
        #[source]
        source: EngineError,
    },
}

impl ScenarioError {
    fn validation(object: impl Into<String>, source: impl Into<EngineError>) -> Self {
        ScenarioError::Validation {
            object: object.into(),
            source: source.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

pub type ComplexSpec = [f64; 2];
pub type VectorSpec = Vec<ComplexSpec>;
pub type MatrixSpec = Vec<Vec<ComplexSpec>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<MatrixSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub projectors: BTreeMap<String, ProjectorSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pdis: BTreeMap<String, PdiSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<FamilySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<QuerySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub builder: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ComplexSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<ComplexSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub subsystems: Vec<SubsystemSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub name: String,
    pub dim: usize,
    pub basis: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Amplitudes { amplitudes: VectorSpec },
    Product { product: BTreeMap<String, String> },
    Superposition { superposition: Vec<TermSpec> },
    Named { named: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub coeff: ComplexSpec,
    pub product: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectorSpec {
    Named {
        named: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Ket {
        ket: StateSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Matrix {
        matrix: MatrixSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Basis {
        basis: BasisSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub subsystem: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PdiSpec {
    Named {
        named: String,
    },
    Observable {
        observable: ObservableSpec,
    },
    List {
        projectors: Vec<ProjectorSpec>,
        #[serde(default)]
        complete: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub matrix: MatrixSpec,
    /// Restrict the observable to one subsystem; its spectral projectors
    /// are tensor-padded into the full space.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsystem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<ProjectorSpec>,
    pub events: Vec<FamilyEventSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEventSpec {
    pub time: usize,
    pub pdi: PdiSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QuerySpec {
    Probs {
        family: String,
        #[serde(default)]
        prune: bool,
    },
    Conditional {
        family: String,
        target: String,
        given: String,
    },
    Consistency {
        family: String,
    },
    Compat {
        #[serde(skip_serializing_if = "Option::is_none")]
        pdis: Option<[String; 2]>,
        #[serde(skip_serializing_if = "Option::is_none")]
        families: Option<[String; 2]>,
    },
    Refine {
        pdis: [String; 2],
    },
}

// ---------------------------------------------------------------------------
// Loaded scenario
// ---------------------------------------------------------------------------

/// A fully validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub tol: Tolerance,
    pub consistency_tol: f64,
    pub space: Arc<HilbertSpace>,
    pub schedule: Arc<UnitarySchedule>,
    pub initial: ComplexVector,
    pub projectors: BTreeMap<String, Projector>,
    pub pdis: BTreeMap<String, Pdi>,
    pub families: BTreeMap<String, HistoryFamily>,
    pub queries: Vec<Query>,
    pub digest: String,
}

/// A resolved query.
#[derive(Debug, Clone)]
pub enum Query {
    Probs {
        family: String,
        prune: bool,
    },
    Conditional {
        family: String,
        target: EventPredicate,
        given: EventPredicate,
    },
    Consistency {
        family: String,
    },
    CompatPdis {
        left: String,
        right: String,
    },
    CompatFamilies {
        left: String,
        right: String,
    },
    Refine {
        left: String,
        right: String,
    },
}

impl Query {
    /// Canonical textual echo of the query, used in reports.
    pub fn echo(&self) -> String {
        match self {
            Query::Probs { family, prune } => {
                if *prune {
                    format!("probs family={family} prune=true")
                } else {
                    format!("probs family={family}")
                }
            }
            Query::Conditional {
                family,
                target,
                given,
            } => format!(
                "conditional family={family} target={} given={}",
                predicate_text(target),
                predicate_text(given)
            ),
            Query::Consistency { family } => format!("consistency family={family}"),
            Query::CompatPdis { left, right } => format!("compat pdis={left},{right}"),
            Query::CompatFamilies { left, right } => {
                format!("compat families={left},{right}")
            }
            Query::Refine { left, right } => format!("refine pdis={left},{right}"),
        }
    }
}

fn predicate_text(p: &EventPredicate) -> String {
    p.constraints
        .iter()
        .map(|(t, l)| format!("{l}@t{t}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_predicate(text: &str) -> Result<EventPredicate, ScenarioError> {
    let mut constraints = Vec::new();
    for part in text.split(',') {
        let (label, time) = part
            .rsplit_once('@')
            .ok_or_else(|| ScenarioError::EventSyntax(part.to_string()))?;
        let time = time
            .strip_prefix('t')
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| ScenarioError::EventSyntax(part.to_string()))?;
        if label.is_empty() {
            return Err(ScenarioError::EventSyntax(part.to_string()));
        }
        constraints.push((time, label.to_string()));
    }
    Ok(EventPredicate { constraints })
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Bundled demo scenarios, embedded so the binary and foreign bindings
/// can run them without touching the filesystem.
pub mod demos {
    pub const STERN_GERLACH: &str = include_str!("../fixtures/stern_gerlach.json");
    pub const CROSSED_BEAM: &str = include_str!("../fixtures/crossed_beam.json");

    pub fn names() -> &'static [&'static str] {
        &["stern_gerlach", "crossed_beam"]
    }
}

/// Build a bundled demo scenario, optionally overriding the spin
/// amplitudes (accepted by `stern_gerlach` only).
pub fn demo_scenario(
    name: &str,
    alpha: Option<ComplexSpec>,
    beta: Option<ComplexSpec>,
) -> Result<Scenario, ScenarioError> {
    let text = match name {
        "stern_gerlach" => demos::STERN_GERLACH,
        "crossed_beam" => demos::CROSSED_BEAM,
        other => return Err(ScenarioError::UnknownDemo(other.to_string())),
    };
    let mut file: ScenarioFile = serde_json::from_str(text)?;
    if name != "stern_gerlach" && (alpha.is_some() || beta.is_some()) {
        return Err(ScenarioError::BuilderArgs {
            builder: name.to_string(),
            message: "takes no `alpha`/`beta`".into(),
        });
    }
    if let Some(model) = file.model.as_mut() {
        if alpha.is_some() {
            model.alpha = alpha;
        }
        if beta.is_some() {
            model.beta = beta;
        }
    }
    build(file)
}

pub fn load_path(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_str(&text)
}

pub fn load_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    build(file)
}

struct ModelParts {
    space: Arc<HilbertSpace>,
    schedule: Arc<UnitarySchedule>,
    initial: ComplexVector,
    states: BTreeMap<String, ComplexVector>,
    projectors: BTreeMap<String, Projector>,
    pdis: BTreeMap<String, Pdi>,
}

pub fn build(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    if file.version != 1 {
        return Err(ScenarioError::Version(file.version));
    }
    let tol_eps = file.tolerance.unwrap_or(1e-10);
    let tol = Tolerance::new(tol_eps).map_err(|_| ScenarioError::BadTolerance(tol_eps))?;
    let ctol = file
        .consistency_tolerance
        .unwrap_or(DEFAULT_CONSISTENCY_TOL);
    if !ctol.is_finite() || ctol < 0.0 {
        return Err(ScenarioError::BadTolerance(ctol));
    }

    let mut parts = resolve_model(&file, tol)?;

    // User-declared projectors extend the model-provided ones.
    for (name, spec) in &file.projectors {
        if matches!(spec, ProjectorSpec::Named { .. }) {
            return Err(ScenarioError::NamedInTable(name.clone()));
        }
        if parts.projectors.contains_key(name) {
            return Err(ScenarioError::NameCollision {
                kind: "projector",
                name: name.clone(),
            });
        }
        let p = resolve_projector(spec, &parts, tol, Some(name))?;
        parts.projectors.insert(name.clone(), p);
    }

    for (name, spec) in &file.pdis {
        if matches!(spec, PdiSpec::Named { .. }) {
            return Err(ScenarioError::NamedInTable(name.clone()));
        }
        if parts.pdis.contains_key(name) {
            return Err(ScenarioError::NameCollision {
                kind: "pdi",
                name: name.clone(),
            });
        }
        let pdi = resolve_pdi(spec, &parts, tol, name)?;
        parts.pdis.insert(name.clone(), pdi);
    }

    let mut families = BTreeMap::new();
    for spec in &file.families {
        if families.contains_key(&spec.label) {
            return Err(ScenarioError::NameCollision {
                kind: "family",
                name: spec.label.clone(),
            });
        }
        let initial_projector = match &spec.initial {
            Some(p) => resolve_projector(p, &parts, tol, None)?,
            None => Projector::from_ket(&parts.space, &parts.initial, "psi0", tol)
                .map_err(|e| ScenarioError::validation(format!("family `{}`", spec.label), e))?,
        };
        let mut events = Vec::with_capacity(spec.events.len());
        for ev in &spec.events {
            let pdi = resolve_pdi(
                &ev.pdi,
                &parts,
                tol,
                &format!("{}@t{}", spec.label, ev.time),
            )?;
            events.push((ev.time, pdi));
        }
        let family = HistoryFamily::new(
            spec.label.clone(),
            Arc::clone(&parts.schedule),
            initial_projector,
            parts.initial.clone(),
            events,
            tol,
        )
        .map_err(|e| ScenarioError::validation(format!("family `{}`", spec.label), e))?;
        families.insert(spec.label.clone(), family);
    }

    let mut queries = Vec::with_capacity(file.queries.len());
    for (index, spec) in file.queries.iter().enumerate() {
        let query = resolve_query(spec, &families, &parts.pdis)
            .map_err(|message| ScenarioError::Query { index, message })?;
        queries.push(query);
    }

    let canonical = serde_json::to_string(&file)?;
    let digest = hex_digest(canonical.as_bytes());

    Ok(Scenario {
        tol,
        consistency_tol: ctol,
        space: parts.space,
        schedule: parts.schedule,
        initial: parts.initial,
        projectors: parts.projectors,
        pdis: parts.pdis,
        families,
        queries,
        digest,
        file,
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve_model(file: &ScenarioFile, tol: Tolerance) -> Result<ModelParts, ScenarioError> {
    if let Some(model) = &file.model {
        for (name, present) in [
            ("space", file.space.is_some()),
            ("grid", file.grid.is_some()),
            ("steps", file.steps.is_some()),
            ("initial", file.initial.is_some()),
        ] {
            if present {
                return Err(ScenarioError::ConflictsWithBuilder(name));
            }
        }
        return match model.builder.as_str() {
            "stern_gerlach" => {
                let (alpha, beta) = match (model.alpha, model.beta) {
                    (Some(a), Some(b)) => (c64(a[0], a[1]), c64(b[0], b[1])),
                    _ => {
                        return Err(ScenarioError::BuilderArgs {
                            builder: model.builder.clone(),
                            message: "requires both `alpha` and `beta`".into(),
                        })
                    }
                };
                let sg = SternGerlachModel::build(alpha, beta, tol)
                    .map_err(|e| ScenarioError::validation("stern_gerlach model", e))?;
                let mut pdis = BTreeMap::new();
                for j in 1..=3 {
                    let track = Pdi::implicit(sg.projector(&format!("psi{j}")).unwrap(), tol)
                        .map_err(|e| ScenarioError::validation("stern_gerlach model", e))?;
                    pdis.insert(format!("track{j}"), track);
                }
                pdis.insert(
                    "position".into(),
                    sg.position_pdi(tol)
                        .map_err(|e| ScenarioError::validation("stern_gerlach model", e))?,
                );
                pdis.insert(
                    "spin".into(),
                    sg.spin_pdi(tol)
                        .map_err(|e| ScenarioError::validation("stern_gerlach model", e))?,
                );
                pdis.insert(
                    "detectors".into(),
                    sg.detector_pdi(tol)
                        .map_err(|e| ScenarioError::validation("stern_gerlach model", e))?,
                );
                Ok(ModelParts {
                    space: Arc::clone(sg.space()),
                    schedule: Arc::new(sg.schedule().clone()),
                    initial: sg.state(0).clone(),
                    states: sg.named_states(),
                    projectors: sg.projectors().clone(),
                    pdis,
                })
            }
            "crossed_beam" => {
                if model.alpha.is_some() || model.beta.is_some() {
                    return Err(ScenarioError::BuilderArgs {
                        builder: model.builder.clone(),
                        message: "takes no `alpha`/`beta`".into(),
                    });
                }
                let cb = CrossedBeamModel::build(tol)
                    .map_err(|e| ScenarioError::validation("crossed_beam model", e))?;
                let mut pdis = BTreeMap::new();
                pdis.insert(
                    "slits".into(),
                    cb.slit_pdi(tol)
                        .map_err(|e| ScenarioError::validation("crossed_beam model", e))?,
                );
                pdis.insert(
                    "detectors".into(),
                    cb.detector_pdi(tol)
                        .map_err(|e| ScenarioError::validation("crossed_beam model", e))?,
                );
                let mut states = BTreeMap::new();
                states.insert("psi0".to_string(), cb.initial_state().clone());
                Ok(ModelParts {
                    space: Arc::clone(cb.space()),
                    schedule: Arc::new(cb.schedule().clone()),
                    initial: cb.initial_state().clone(),
                    states,
                    projectors: cb.projectors().clone(),
                    pdis,
                })
            }
            other => Err(ScenarioError::UnknownBuilder(other.to_string())),
        };
    }

    // Explicit declaration.
    let space_spec = file
        .space
        .as_ref()
        .ok_or(ScenarioError::MissingField("space"))?;
    let grid = file
        .grid
        .as_ref()
        .ok_or(ScenarioError::MissingField("grid"))?;
    let steps = file
        .steps
        .as_ref()
        .ok_or(ScenarioError::MissingField("steps"))?;
    let initial_spec = file
        .initial
        .as_ref()
        .ok_or(ScenarioError::MissingField("initial"))?;

    let mut subsystems = Vec::with_capacity(space_spec.subsystems.len());
    for s in &space_spec.subsystems {
        if s.dim != s.basis.len() {
            return Err(ScenarioError::SubsystemDim {
                name: s.name.clone(),
                dim: s.dim,
                got: s.basis.len(),
            });
        }
        subsystems.push(
            Subsystem::new(s.name.clone(), s.basis.clone())
                .map_err(|e| ScenarioError::validation(format!("subsystem `{}`", s.name), e))?,
        );
    }
    let space = HilbertSpace::new(subsystems).map_err(|e| ScenarioError::validation("space", e))?;

    let grid = TimeGrid::new(grid.clone()).map_err(|e| ScenarioError::validation("grid", e))?;
    let matrices = steps
        .iter()
        .enumerate()
        .map(|(k, m)| {
            parse_matrix(m).map_err(|e| match e {
                ScenarioError::Validation { source, .. } => {
                    ScenarioError::validation(format!("step {k}"), source)
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let schedule = Arc::new(
        UnitarySchedule::new(Arc::clone(&space), grid, matrices, tol)
            .map_err(|e| ScenarioError::validation("schedule", e))?,
    );

    let states = BTreeMap::new();
    let initial = resolve_state(initial_spec, &space, &states)?;
    let norm_sqr = initial.norm_sqr();
    if (norm_sqr - 1.0).abs() > tol.eps {
        return Err(ScenarioError::InitialNotNormalized(norm_sqr));
    }

    Ok(ModelParts {
        space,
        schedule,
        initial,
        states,
        projectors: BTreeMap::new(),
        pdis: BTreeMap::new(),
    })
}

fn parse_matrix(spec: &MatrixSpec) -> Result<ComplexMatrix, ScenarioError> {
    let rows = spec.len();
    let cols = spec.first().map(Vec::len).unwrap_or(0);
    if spec.iter().any(|r| r.len() != cols) {
        return Err(ScenarioError::RaggedMatrix);
    }
    let data: Vec<Complex64> = spec.iter().flatten().map(|&[re, im]| c64(re, im)).collect();
    ComplexMatrix::new(rows, cols, data).map_err(|e| ScenarioError::validation("matrix", e))
}

fn matrix_spec(m: &ComplexMatrix) -> MatrixSpec {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

fn resolve_state(
    spec: &StateSpec,
    space: &Arc<HilbertSpace>,
    states: &BTreeMap<String, ComplexVector>,
) -> Result<ComplexVector, ScenarioError> {
    match spec {
        StateSpec::Amplitudes { amplitudes } => {
            let data: Vec<Complex64> = amplitudes.iter().map(|&[re, im]| c64(re, im)).collect();
            let v = ComplexVector::new(data)
                .map_err(|e| ScenarioError::validation("state amplitudes", e))?;
            if v.dim() != space.total_dim() {
                return Err(ScenarioError::validation(
                    "state amplitudes",
                    LinalgError::ShapeMismatch {
                        context: "state dimension",
                        left: v.dim().to_string(),
                        right: space.total_dim().to_string(),
                    },
                ));
            }
            Ok(v)
        }
        StateSpec::Product { product } => {
            let assignment: Vec<(&str, &str)> = product
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_str()))
                .collect();
            space
                .product_ket(&assignment)
                .map_err(|e| ScenarioError::validation("product state", e))
        }
        StateSpec::Superposition { superposition } => {
            let mut acc = ComplexVector::zeros(space.total_dim())
                .map_err(|e| ScenarioError::validation("superposition state", e))?;
            for term in superposition {
                let assignment: Vec<(&str, &str)> = term
                    .product
                    .iter()
                    .map(|(k, v)| (k.as_str(), v.as_str()))
                    .collect();
                let ket = space
                    .product_ket(&assignment)
                    .map_err(|e| ScenarioError::validation("superposition state", e))?;
                acc = acc
                    .add(&ket.scaled(c64(term.coeff[0], term.coeff[1])))
                    .map_err(|e| ScenarioError::validation("superposition state", e))?;
            }
            Ok(acc)
        }
        StateSpec::Named { named } => {
            states
                .get(named)
                .cloned()
                .ok_or_else(|| ScenarioError::UnknownName {
                    kind: "state",
                    name: named.clone(),
                })
        }
    }
}

fn resolve_projector(
    spec: &ProjectorSpec,
    parts: &ModelParts,
    tol: Tolerance,
    default_label: Option<&str>,
) -> Result<Projector, ScenarioError> {
    let relabel = |p: Projector, label: &Option<String>| match (label, default_label) {
        (Some(l), _) => p.with_label(l.clone()),
        (None, Some(d)) => p.with_label(d),
        (None, None) => p,
    };
    match spec {
        ProjectorSpec::Named { named, label } => {
            let p =
                parts
                    .projectors
                    .get(named)
                    .cloned()
                    .ok_or_else(|| ScenarioError::UnknownName {
                        kind: "projector",
                        name: named.clone(),
                    })?;
            Ok(match label {
                Some(l) => p.with_label(l.clone()),
                None => p,
            })
        }
        ProjectorSpec::Ket { ket, label } => {
            let state = resolve_state(ket, &parts.space, &parts.states)?;
            let p = Projector::from_ket(&parts.space, &state, "ket", tol)
                .map_err(|e| ScenarioError::validation("ket projector", e))?;
            Ok(relabel(p, label))
        }
        ProjectorSpec::Matrix { matrix, label } => {
            let m = parse_matrix(matrix)?;
            let name = label
                .clone()
                .or_else(|| default_label.map(str::to_string))
                .unwrap_or_else(|| "projector".into());
            Projector::new(&parts.space, m, name.clone(), tol)
                .map_err(|e| ScenarioError::validation(format!("projector `{name}`"), e))
        }
        ProjectorSpec::Basis { basis, label } => {
            let labels: Vec<&str> = basis.labels.iter().map(String::as_str).collect();
            let name = label
                .clone()
                .or_else(|| default_label.map(str::to_string))
                .unwrap_or_else(|| basis.labels.join("+"));
            parts
                .space
                .basis_projector(&basis.subsystem, &labels, name.clone(), tol)
                .map_err(|e| ScenarioError::validation(format!("projector `{name}`"), e))
        }
    }
}

fn resolve_pdi(
    spec: &PdiSpec,
    parts: &ModelParts,
    tol: Tolerance,
    object: &str,
) -> Result<Pdi, ScenarioError> {
    match spec {
        PdiSpec::Named { named } => {
            parts
                .pdis
                .get(named)
                .cloned()
                .ok_or_else(|| ScenarioError::UnknownName {
                    kind: "pdi",
                    name: named.clone(),
                })
        }
        PdiSpec::Observable { observable } => {
            let cluster = observable.cluster_tol.unwrap_or(DEFAULT_CLUSTER_TOL);
            let (_, pdi) = match &observable.subsystem {
                Some(sub_name) => {
                    let sub = parts
                        .space
                        .subsystem(sub_name)
                        .ok_or_else(|| ScenarioError::UnknownName {
                            kind: "subsystem",
                            name: sub_name.clone(),
                        })?
                        .clone();
                    let small_space = HilbertSpace::new(vec![sub])
                        .map_err(|e| ScenarioError::validation(object, e))?;
                    let m = parse_matrix(&observable.matrix)?;
                    let obs = Observable::new(&small_space, m, tol)
                        .map_err(|e| ScenarioError::validation(object, e))?;
                    let (values, small_pdi) = obs
                        .spectral_pdi(tol, cluster)
                        .map_err(|e| ScenarioError::validation(object, e))?;
                    let embedded = small_pdi
                        .projectors()
                        .iter()
                        .map(|p| p.embed(&parts.space, tol))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| ScenarioError::validation(object, e))?;
                    let pdi = Pdi::new(embedded, tol)
                        .map_err(|e| ScenarioError::validation(object, e))?;
                    (values, pdi)
                }
                None => {
                    let m = parse_matrix(&observable.matrix)?;
                    let obs = Observable::new(&parts.space, m, tol)
                        .map_err(|e| ScenarioError::validation(object, e))?;
                    obs.spectral_pdi(tol, cluster)
                        .map_err(|e| ScenarioError::validation(object, e))?
                }
            };
            Ok(pdi)
        }
        PdiSpec::List {
            projectors,
            complete,
        } => {
            let mut elements = Vec::with_capacity(projectors.len() + 1);
            for (i, pspec) in projectors.iter().enumerate() {
                let fallback = format!("p{i}");
                let p = match pspec {
                    ProjectorSpec::Named { .. } => resolve_projector(pspec, parts, tol, None)?,
                    _ => {
                        let has_label = matches!(
                            pspec,
                            ProjectorSpec::Ket { label: Some(_), .. }
                                | ProjectorSpec::Matrix { label: Some(_), .. }
                                | ProjectorSpec::Basis { label: Some(_), .. }
                        );
                        if has_label {
                            resolve_projector(pspec, parts, tol, None)?
                        } else {
                            resolve_projector(pspec, parts, tol, Some(&fallback))?
                        }
                    }
                };
                elements.push(p);
            }
            if *complete {
                let mut sum =
                    ComplexMatrix::zeros(parts.space.total_dim(), parts.space.total_dim())
                        .map_err(|e| ScenarioError::validation(object, e))?;
                for p in &elements {
                    sum = sum
                        .add(p.matrix())
                        .map_err(|e| ScenarioError::validation(object, e))?;
                }
                let id = ComplexMatrix::identity(parts.space.total_dim())
                    .map_err(|e| ScenarioError::validation(object, e))?;
                let rest = Projector::new(
                    &parts.space,
                    id.sub(&sum)
                        .map_err(|e| ScenarioError::validation(object, e))?,
                    "rest",
                    tol,
                )
                .map_err(|e| ScenarioError::validation(object, e))?;
                if !rest.is_zero() {
                    elements.push(rest);
                }
            }
            for (i, p) in elements.iter().enumerate() {
                if elements[..i].iter().any(|q| q.label() == p.label()) {
                    return Err(ScenarioError::DuplicatePdiLabel {
                        object: object.to_string(),
                        label: p.label().to_string(),
                    });
                }
            }
            Pdi::new(elements, tol).map_err(|e| ScenarioError::validation(object, e))
        }
    }
}

fn resolve_query(
    spec: &QuerySpec,
    families: &BTreeMap<String, HistoryFamily>,
    pdis: &BTreeMap<String, Pdi>,
) -> Result<Query, String> {
    let check_family = |name: &str| -> Result<(), String> {
        if families.contains_key(name) {
            Ok(())
        } else {
            Err(format!("unknown family `{name}`"))
        }
    };
    let check_pdi = |name: &str| -> Result<(), String> {
        if pdis.contains_key(name) {
            Ok(())
        } else {
            Err(format!("unknown pdi `{name}`"))
        }
    };
    match spec {
        QuerySpec::Probs { family, prune } => {
            check_family(family)?;
            Ok(Query::Probs {
                family: family.clone(),
                prune: *prune,
            })
        }
        QuerySpec::Conditional {
            family,
            target,
            given,
        } => {
            check_family(family)?;
            let fam = &families[family];
            let target = parse_predicate(target).map_err(|e| e.to_string())?;
            let given = parse_predicate(given).map_err(|e| e.to_string())?;
            for pred in [&target, &given] {
                for (t, label) in &pred.constraints {
                    let k = fam
                        .event_times()
                        .iter()
                        .position(|et| et == t)
                        .ok_or_else(|| format!("family `{family}` has no event at t{t}"))?;
                    if fam.pdis()[k].by_label(label).is_none() {
                        return Err(format!(
                            "family `{family}` has no projector `{label}` at t{t}"
                        ));
                    }
                }
            }
            Ok(Query::Conditional {
                family: family.clone(),
                target,
                given,
            })
        }
        QuerySpec::Consistency { family } => {
            check_family(family)?;
            Ok(Query::Consistency {
                family: family.clone(),
            })
        }
        QuerySpec::Compat {
            pdis: p,
            families: f,
        } => match (p, f) {
            (Some([a, b]), None) => {
                check_pdi(a)?;
                check_pdi(b)?;
                Ok(Query::CompatPdis {
                    left: a.clone(),
                    right: b.clone(),
                })
            }
            (None, Some([a, b])) => {
                check_family(a)?;
                check_family(b)?;
                Ok(Query::CompatFamilies {
                    left: a.clone(),
                    right: b.clone(),
                })
            }
            _ => Err(ScenarioError::CompatArgs.to_string()),
        },
        QuerySpec::Refine { pdis: [a, b] } => {
            check_pdi(a)?;
            check_pdi(b)?;
            Ok(Query::Refine {
                left: a.clone(),
                right: b.clone(),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's consistency tolerance when set.
    pub consistency_tol: Option<f64>,
}

pub fn run(scenario: &Scenario, options: &RunOptions) -> Report {
    let ctol = options.consistency_tol.unwrap_or(scenario.consistency_tol);
    let results = scenario
        .queries
        .iter()
        .map(|q| {
            let query = q.echo();
            match execute(scenario, q, ctol) {
                Ok(value) => QueryResult {
                    query,
                    result: Some(value),
                    error: None,
                },
                Err(e) => QueryResult {
                    query,
                    result: None,
                    error: Some(QueryError {
                        kind: classify(&e).to_string(),
                        message: e.to_string(),
                    }),
                },
            }
        })
        .collect();
    Report {
        version: 1,
        scenario_digest: scenario.digest.clone(),
        tolerance: scenario.tol.eps,
        consistency_tolerance: ctol,
        results,
    }
}

fn classify(e: &EngineError) -> &'static str {
    match e {
        EngineError::History(HistoryError::Inconsistent { .. }) => "inconsistent_family",
        EngineError::History(HistoryError::ZeroConditioningEvent { .. }) => "undefined_conditional",
        EngineError::Framework(FrameworkError::Incompatible { .. }) => "incompatible_frameworks",
        EngineError::Framework(FrameworkError::ScheduleMismatch) => "schedule_mismatch",
        _ => "evaluation",
    }
}

fn execute(scenario: &Scenario, query: &Query, ctol: f64) -> Result<ResultValue, EngineError> {
    match query {
        Query::Probs { family, prune } => {
            let fam = &scenario.families[family];
            let evaluated;
            let fam = if *prune {
                evaluated = fam.prune_zero(ctol)?;
                &evaluated
            } else {
                fam
            };
            let table = fam.assign_probabilities(ctol)?;
            Ok(ResultValue::Probs(ProbTable {
                family: family.clone(),
                pruned: fam.is_pruned(),
                dropped_mass: fam.dropped_mass(),
                total: table.total(),
                entries: table
                    .entries
                    .iter()
                    .map(|(history, probability)| ProbEntry {
                        history: history.clone(),
                        probability: *probability,
                    })
                    .collect(),
            }))
        }
        Query::Conditional {
            family,
            target,
            given,
        } => {
            let fam = &scenario.families[family];
            let p_given = fam.event_probability(given, ctol)?;
            if p_given <= ctol {
                return Err(HistoryError::ZeroConditioningEvent {
                    prob: p_given,
                    tol: ctol,
                }
                .into());
            }
            let mut joint = given.clone();
            joint.constraints.extend(target.constraints.iter().cloned());
            let p_joint = fam.event_probability(&joint, ctol)?;
            Ok(ResultValue::Conditional(ConditionalResult {
                family: family.clone(),
                target: predicate_text(target),
                given: predicate_text(given),
                probability: p_joint / p_given,
                given_probability: p_given,
            }))
        }
        Query::Consistency { family } => {
            let fam = &scenario.families[family];
            let report = fam.check_consistency(ctol)?;
            Ok(ResultValue::Consistency(ConsistencyResult {
                family: family.clone(),
                consistent: report.consistent,
                worst_off_diagonal: report.worst,
                offending: report.offending,
            }))
        }
        Query::CompatPdis { left, right } => {
            let report =
                pdis_compatible(&scenario.pdis[left], &scenario.pdis[right], scenario.tol)?;
            Ok(ResultValue::Compat(CompatResult {
                left: left.clone(),
                right: right.clone(),
                compatible: report.compatible,
                checked_by: "commutation".into(),
                worst: report.worst,
                offending: report.offending,
            }))
        }
        Query::CompatFamilies { left, right } => {
            let report = families_compatible(
                &scenario.families[left],
                &scenario.families[right],
                scenario.tol,
                ctol,
            )?;
            Ok(ResultValue::Compat(CompatResult {
                left: left.clone(),
                right: right.clone(),
                compatible: report.compatible,
                checked_by: match report.kind {
                    CompatibilityKind::Commutation => "commutation".into(),
                    CompatibilityKind::MergedConsistency => "merged_consistency".into(),
                },
                worst: report.worst,
                offending: report.offending,
            }))
        }
        Query::Refine { left, right } => {
            let refined =
                common_refinement(&scenario.pdis[left], &scenario.pdis[right], scenario.tol)?;
            Ok(ResultValue::Refine(RefineResult {
                left: left.clone(),
                right: right.clone(),
                labels: refined.labels().iter().map(|s| s.to_string()).collect(),
                ranks: refined.projectors().iter().map(Projector::rank).collect(),
            }))
        }
    }
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Rewrite a loaded scenario as a fully explicit file: named builders are
/// expanded, every unitary and projector serialized as a dense matrix.
pub fn to_explicit_file(scenario: &Scenario) -> ScenarioFile {
    let space = SpaceSpec {
        subsystems: scenario
            .space
            .subsystems()
            .iter()
            .map(|s| SubsystemSpec {
                name: s.name().to_string(),
                dim: s.dim(),
                basis: s.basis_labels().to_vec(),
            })
            .collect(),
    };
    let steps: Vec<MatrixSpec> = scenario.schedule.steps().iter().map(matrix_spec).collect();
    let initial = StateSpec::Amplitudes {
        amplitudes: scenario
            .initial
            .entries()
            .iter()
            .map(|z| [z.re, z.im])
            .collect(),
    };
    let pdis: BTreeMap<String, PdiSpec> = scenario
        .pdis
        .iter()
        .map(|(name, pdi)| {
            (
                name.clone(),
                PdiSpec::List {
                    projectors: pdi
                        .projectors()
                        .iter()
                        .map(|p| ProjectorSpec::Matrix {
                            matrix: matrix_spec(p.matrix()),
                            label: Some(p.label().to_string()),
                        })
                        .collect(),
                    complete: false,
                },
            )
        })
        .collect();
    let families: Vec<FamilySpec> = scenario
        .families
        .values()
        .map(|fam| FamilySpec {
            label: fam.label().to_string(),
            initial: Some(ProjectorSpec::Matrix {
                matrix: matrix_spec(fam.initial_projector().matrix()),
                label: Some(fam.initial_projector().label().to_string()),
            }),
            events: fam
                .event_times()
                .iter()
                .zip(fam.pdis())
                .map(|(t, pdi)| FamilyEventSpec {
                    time: *t,
                    pdi: PdiSpec::List {
                        projectors: pdi
                            .projectors()
                            .iter()
                            .map(|p| ProjectorSpec::Matrix {
                                matrix: matrix_spec(p.matrix()),
                                label: Some(p.label().to_string()),
                            })
                            .collect(),
                        complete: false,
                    },
                })
                .collect(),
        })
        .collect();
    let queries: Vec<QuerySpec> = scenario
        .queries
        .iter()
        .map(|q| match q {
            Query::Probs { family, prune } => QuerySpec::Probs {
                family: family.clone(),
                prune: *prune,
            },
            Query::Conditional {
                family,
                target,
                given,
            } => QuerySpec::Conditional {
                family: family.clone(),
                target: predicate_text(target),
                given: predicate_text(given),
            },
            Query::Consistency { family } => QuerySpec::Consistency {
                family: family.clone(),
            },
            Query::CompatPdis { left, right } => QuerySpec::Compat {
                pdis: Some([left.clone(), right.clone()]),
                families: None,
            },
            Query::CompatFamilies { left, right } => QuerySpec::Compat {
                pdis: None,
                families: Some([left.clone(), right.clone()]),
            },
            Query::Refine { left, right } => QuerySpec::Refine {
                pdis: [left.clone(), right.clone()],
            },
        })
        .collect();

    ScenarioFile {
        version: 1,
        tolerance: Some(scenario.tol.eps),
        consistency_tolerance: Some(scenario.consistency_tol),
        model: None,
        space: Some(space),
        grid: Some(scenario.schedule.grid().times().to_vec()),
        steps: Some(steps),
        initial: Some(initial),
        projectors: BTreeMap::new(),
        pdis,
        families,
        queries,
    }
}
