//! Scenario documents: the JSON schema and its validated runtime form.
//!
//! Complex numbers are always two-element `[re, im]` arrays; matrices are
//! arrays of rows.

use indexmap::IndexMap;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::metric::{solve_stationary_metric, MetricError, StationaryMetric};
use super::{HamiltonianSpec, Observable, Term};
use crate::evolution::{IntegratorConfig, Method};
use crate::matops::{CMatrix, CVector, NumericConfig};

pub type ComplexPair = [f64; 2];
pub type MatrixRows = Vec<Vec<ComplexPair>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub coeff: String,
    pub matrix: MatrixRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    Identity,
    Explicit,
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub mode: MetricMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableFile {
    Matrix(MatrixRows),
    Terms(Vec<TermFile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorFile {
    pub method: Method,
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hermitize_metric: Option<bool>,
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dim: usize,
    pub hamiltonian: Vec<TermFile>,
    pub metric: MetricFile,
    pub psi0: Vec<ComplexPair>,
    #[serde(default)]
    pub observables: IndexMap<String, ObservableFile>,
    pub t0: f64,
    pub t1: f64,
    pub integrator: IntegratorFile,
    /// Check names allowed to fail (e.g. for broken-phase systems).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected_failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("invalid scenario at {pointer}: {message}")]
    Invalid { pointer: String, message: String },
    #[error("stationary metric: {source}; hint: {hint}")]
    Metric { source: MetricError, hint: String },
}

impl ScenarioError {
    pub(crate) fn invalid(pointer: &str, message: impl Into<String>) -> Self {
        ScenarioError::Invalid { pointer: pointer.to_string(), message: message.into() }
    }

    pub fn pointer(&self) -> Option<&str> {
        match self {
            ScenarioError::Schema { pointer, .. } | ScenarioError::Invalid { pointer, .. } => Some(pointer),
            ScenarioError::Metric { .. } => Some("/metric"),
        }
    }
}

/// How `G(t₀)` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricInit {
    Identity,
    Explicit(CMatrix),
    /// Solve `G H_S(t₀) = H_S(t₀)† G` for the PD metric closest to `I`.
    StationarySolve,
}

/// A validated, runnable scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub hamiltonian: HamiltonianSpec,
    pub metric_init: MetricInit,
    /// Resolved `G(t₀)`.
    pub metric0: CMatrix,
    /// Solver metadata when `metric_init` is `StationarySolve`.
    pub stationary: Option<StationaryMetric>,
    pub psi0: CVector,
    pub observables: IndexMap<String, Observable>,
    pub t0: f64,
    pub t1: f64,
    pub integrator: IntegratorConfig,
    pub expected_failures: Vec<String>,
    pub numeric: NumericConfig,
}

fn to_pointer(path: &str) -> String {
    // serde_path_to_error renders `a.b[0].c`; JSON pointer wants `/a/b/0/c`.
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for seg in path.split('.') {
        let mut rest = seg;
        if let Some(idx) = rest.find('[') {
            if idx > 0 {
                out.push('/');
                out.push_str(&rest[..idx].replace('~', "~0").replace('/', "~1"));
            }
            rest = &rest[idx..];
            while let Some(stripped) = rest.strip_prefix('[') {
                let end = stripped.find(']').unwrap_or(stripped.len());
                out.push('/');
                out.push_str(&stripped[..end]);
                rest = stripped.get(end + 1..).unwrap_or("");
            }
        } else {
            out.push('/');
            out.push_str(&rest.replace('~', "~0").replace('/', "~1"));
        }
    }
    out
}

fn matrix_from_rows(rows: &MatrixRows, dim: usize, pointer: &str) -> Result<CMatrix, ScenarioError> {
    if rows.len() != dim {
        return Err(ScenarioError::invalid(pointer, format!("expected {dim} rows, got {}", rows.len())));
    }
    let mut data = Vec::with_capacity(dim * dim);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(ScenarioError::invalid(
                &format!("{pointer}/{r}"),
                format!("expected {dim} entries, got {}", row.len()),
            ));
        }
        data.extend(row.iter().map(|&[re, im]| Complex64::new(re, im)));
    }
    CMatrix::new(dim, data).map_err(|e| ScenarioError::invalid(pointer, e.to_string()))
}

fn rows_from_matrix(m: &CMatrix) -> MatrixRows {
    m.rows().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn terms_from_file(terms: &[TermFile], dim: usize, pointer: &str) -> Result<Vec<Term>, ScenarioError> {
    if terms.is_empty() {
        return Err(ScenarioError::invalid(pointer, "at least one term is required"));
    }
    terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let m = matrix_from_rows(&t.matrix, dim, &format!("{pointer}/{i}/matrix"))?;
            Term::new(&t.coeff, m).map_err(|e| ScenarioError::invalid(&format!("{pointer}/{i}/coeff"), e.to_string()))
        })
        .collect()
}

fn terms_to_file(terms: &[Term]) -> Vec<TermFile> {
    terms
        .iter()
        .map(|t| TermFile { coeff: t.source().to_string(), matrix: rows_from_matrix(t.matrix()) })
        .collect()
}

const BROKEN_PHASE_HINT: &str = "system in broken phase; supply explicit metric or use identity";
const EP_HINT: &str = "Hamiltonian at an exceptional point; supply explicit metric or use identity";

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_json_str(text: &str) -> Result<Scenario, ScenarioError> {
        Self::from_json_str_with(text, NumericConfig::default())
    }

    pub fn from_json_str_with(text: &str, numeric: NumericConfig) -> Result<Scenario, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Schema {
            pointer: to_pointer(&e.path().to_string()),
            message: e.inner().to_string(),
        })?;
        Self::from_file(&file, numeric)
    }

    pub fn from_file(file: &ScenarioFile, numeric: NumericConfig) -> Result<Scenario, ScenarioError> {
        let dim = file.dim;
        if dim == 0 {
            return Err(ScenarioError::invalid("/dim", "dimension must be >= 1"));
        }
        let hterms = terms_from_file(&file.hamiltonian, dim, "/hamiltonian")?;
        let hamiltonian =
            HamiltonianSpec::new(hterms).map_err(|e| ScenarioError::invalid("/hamiltonian", e.to_string()))?;

        if file.psi0.len() != dim {
            return Err(ScenarioError::invalid(
                "/psi0",
                format!("expected {dim} components, got {}", file.psi0.len()),
            ));
        }
        let psi0 = CVector::new(file.psi0.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
            .map_err(|e| ScenarioError::invalid("/psi0", e.to_string()))?;

        let mut observables = IndexMap::new();
        for (name, obs) in &file.observables {
            let pointer = format!("/observables/{}", name.replace('~', "~0").replace('/', "~1"));
            let o = match obs {
                ObservableFile::Matrix(rows) => Observable::constant(matrix_from_rows(rows, dim, &pointer)?),
                ObservableFile::Terms(terms) => {
                    Observable::from_terms(terms_from_file(terms, dim, &pointer)?).map_err(|e| match e {
                        ScenarioError::Invalid { message, .. } => ScenarioError::invalid(&pointer, message),
                        other => other,
                    })?
                }
            };
            observables.insert(name.clone(), o);
        }

        if !(file.t0.is_finite() && file.t1.is_finite()) {
            return Err(ScenarioError::invalid("/t1", "times must be finite"));
        }
        if !(file.t1 > file.t0) {
            return Err(ScenarioError::invalid("/t1", "t1 must exceed t0"));
        }

        let integrator = IntegratorConfig::from_file(&file.integrator)
            .map_err(|m| ScenarioError::invalid("/integrator", m))?;
        integrator
            .validate(file.t0, file.t1)
            .map_err(|m| ScenarioError::invalid("/integrator/step", m))?;

        let h0 = hamiltonian
            .assemble(file.t0)
            .map_err(|e| ScenarioError::invalid("/hamiltonian", e.to_string()))?;
        let (metric_init, metric0, stationary) = match file.metric.mode {
            MetricMode::Identity => (MetricInit::Identity, CMatrix::identity(dim), None),
            MetricMode::Explicit => {
                let rows = file
                    .metric
                    .matrix
                    .as_ref()
                    .ok_or_else(|| ScenarioError::invalid("/metric/matrix", "explicit metric requires a matrix"))?;
                let g = matrix_from_rows(rows, dim, "/metric/matrix")?;
                validate_metric(&g, &numeric)?;
                (MetricInit::Explicit(g.clone()), g, None)
            }
            MetricMode::Stationary => {
                let sol = solve_stationary_metric(&h0).map_err(|source| {
                    let hint = match source {
                        MetricError::Degenerate { .. } => EP_HINT,
                        _ => BROKEN_PHASE_HINT,
                    };
                    ScenarioError::Metric { source, hint: hint.to_string() }
                })?;
                if sol.non_unique() {
                    log::info!(
                        "stationary metric is not unique (solution space dimension {}); using the representative closest to identity",
                        sol.nullspace_dim
                    );
                }
                (MetricInit::StationarySolve, sol.metric.clone(), Some(sol))
            }
        };

        Ok(Scenario {
            hamiltonian,
            metric_init,
            metric0,
            stationary,
            psi0,
            observables,
            t0: file.t0,
            t1: file.t1,
            integrator,
            expected_failures: file.expected_failures.clone(),
            numeric,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn to_file(&self) -> ScenarioFile {
        let metric = match &self.metric_init {
            MetricInit::Identity => MetricFile { mode: MetricMode::Identity, matrix: None },
            MetricInit::Explicit(g) => MetricFile { mode: MetricMode::Explicit, matrix: Some(rows_from_matrix(g)) },
            MetricInit::StationarySolve => MetricFile { mode: MetricMode::Stationary, matrix: None },
        };
        let observables = self
            .observables
            .iter()
            .map(|(name, o)| {
                let f = if o.is_plain() {
                    ObservableFile::Matrix(rows_from_matrix(o.terms()[0].matrix()))
                } else {
                    ObservableFile::Terms(terms_to_file(o.terms()))
                };
                (name.clone(), f)
            })
            .collect();
        ScenarioFile {
            dim: self.dim(),
            hamiltonian: terms_to_file(self.hamiltonian.terms()),
            metric,
            psi0: self.psi0.as_slice().iter().map(|z| [z.re, z.im]).collect(),
            observables,
            t0: self.t0,
            t1: self.t1,
            integrator: self.integrator.to_file(),
            expected_failures: self.expected_failures.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    /// SHA-256 of the canonical (compact) JSON form.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(&self.to_file()).expect("scenario serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Re-validates after editing time window or integrator settings.
    pub fn with_overrides(
        mut self,
        t0: Option<f64>,
        t1: Option<f64>,
        step: Option<f64>,
    ) -> Result<Scenario, ScenarioError> {
        let retime = t0.is_some();
        if let Some(t0) = t0 {
            self.t0 = t0;
        }
        if let Some(t1) = t1 {
            self.t1 = t1;
        }
        if let Some(step) = step {
            self.integrator.step = step;
        }
        if retime {
            // The stationary metric depends on H(t₀).
            return Scenario::from_file(&self.to_file(), self.numeric);
        }
        if !(self.t1 > self.t0) {
            return Err(ScenarioError::invalid("/t1", "t1 must exceed t0"));
        }
        self.integrator
            .validate(self.t0, self.t1)
            .map_err(|m| ScenarioError::invalid("/integrator/step", m))?;
        Ok(self)
    }
}

fn validate_metric(g: &CMatrix, numeric: &NumericConfig) -> Result<(), ScenarioError> {
    let eig = g
        .hermitian_eigenvalues(&numeric.tol)
        .map_err(|e| ScenarioError::invalid("/metric/matrix", e.to_string()))?;
    if !(eig[0] > 0.0) {
        return Err(ScenarioError::invalid(
            "/metric/matrix",
            format!("metric must be positive-definite (min eigenvalue {:e})", eig[0]),
        ));
    }
    g.inverse(numeric)
        .map_err(|e| ScenarioError::invalid("/metric/matrix", format!("metric must be invertible: {e}")))?;
    Ok(())
}

impl IntegratorConfig {
    fn from_file(f: &IntegratorFile) -> Result<Self, String> {
        let mut cfg = IntegratorConfig::rk4(f.step);
        cfg.method = f.method;
        if let Some(m) = f.max_steps {
            if m == 0 {
                return Err("max_steps must be positive".into());
            }
            cfg.max_steps = m;
        }
        if let Some(r) = f.rtol {
            if !(r > 0.0) {
                return Err("rtol must be positive".into());
            }
            cfg.richardson_rtol = r;
        }
        cfg.hermitize_metric = f.hermitize_metric.unwrap_or(false);
        Ok(cfg)
    }

    fn to_file(&self) -> IntegratorFile {
        let defaults = IntegratorConfig::rk4(self.step);
        IntegratorFile {
            method: self.method,
            step: self.step,
            max_steps: (self.max_steps != defaults.max_steps).then_some(self.max_steps),
            rtol: (self.method == Method::Rk4Richardson || self.richardson_rtol != defaults.richardson_rtol)
                .then_some(self.richardson_rtol),
            hermitize_metric: self.hermitize_metric.then_some(true),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dim": 2,
        "hamiltonian": [{"coeff": "1", "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}],
        "metric": {"mode": "identity"},
        "psi0": [[1,0],[0,0]],
        "t0": 0, "t1": 1,
        "integrator": {"method": "rk4", "step": 0.01}
    }"#;

    #[test]
    fn minimal_file_loads() {
        let s = Scenario::from_json_str(MINIMAL).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.metric0, CMatrix::identity(2));
        assert!(s.observables.is_empty());
    }

    #[test]
    fn psi0_dimension_mismatch_names_field() {
        let text = MINIMAL.replace(r#""psi0": [[1,0],[0,0]]"#, r#""psi0": [[1,0]]"#);
        let err = Scenario::from_json_str(&text).unwrap_err();
        assert_eq!(err.pointer(), Some("/psi0"));
    }

    #[test]
    fn schema_errors_carry_json_pointer() {
        let text = MINIMAL.replace(r#""coeff": "1""#, r#""coeff": 1"#);
        let err = Scenario::from_json_str(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Schema { .. }));
        assert_eq!(err.pointer(), Some("/hamiltonian/0/coeff"));
        let text = MINIMAL.replace(r#""t0": 0"#, r#""t0": 0, "bogus": 1"#);
        assert!(matches!(Scenario::from_json_str(&text), Err(ScenarioError::Schema { .. })));
    }

    #[test]
    fn bad_coefficient_is_reported() {
        let text = MINIMAL.replace(r#""coeff": "1""#, r#""coeff": "foo(t)""#);
        let err = Scenario::from_json_str(&text).unwrap_err();
        assert_eq!(err.pointer(), Some("/hamiltonian/0/coeff"));
    }

    #[test]
    fn time_window_must_be_increasing() {
        let text = MINIMAL.replace(r#""t1": 1"#, r#""t1": -1"#);
        assert_eq!(Scenario::from_json_str(&text).unwrap_err().pointer(), Some("/t1"));
    }

    #[test]
    fn stationary_on_broken_phase_has_hint() {
        let text = MINIMAL
            .replace(r#"[[[0,0],[1,0]],[[1,0],[0,0]]]"#, r#"[[[0,1.5],[1,0]],[[1,0],[0,-1.5]]]"#)
            .replace(r#""mode": "identity""#, r#""mode": "stationary""#);
        let err = Scenario::from_json_str(&text).unwrap_err();
        assert!(err.to_string().contains("system in broken phase; supply explicit metric or use identity"));
    }

    #[test]
    fn explicit_metric_must_be_pd() {
        let text = MINIMAL.replace(
            r#"{"mode": "identity"}"#,
            r#"{"mode": "explicit", "matrix": [[[1,0],[0,0]],[[0,0],[-1,0]]]}"#,
        );
        let err = Scenario::from_json_str(&text).unwrap_err();
        assert_eq!(err.pointer(), Some("/metric/matrix"));
    }

    #[test]
    fn pointer_conversion() {
        assert_eq!(to_pointer("hamiltonian[0].matrix[1]"), "/hamiltonian/0/matrix/1");
        assert_eq!(to_pointer("."), "");
        assert_eq!(to_pointer("integrator.step"), "/integrator/step");
    }
}
