//! Scenario ingestion: time-dependent Hamiltonians built from profile
//! expressions, observables, initial metrics and initial states.

pub mod metric;
pub mod profile;
pub mod scenario;

use num_complex::Complex64;

use crate::matops::{CMatrix, MatError};
pub use metric::{solve_stationary_metric, MetricError, StationaryMetric};
pub use profile::{parse_profile, EvalError, Expr, ParseError};
pub use scenario::{MetricInit, Scenario, ScenarioError, ScenarioFile};

/// One `coefficient(t) · matrix` term.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    source: String,
    expr: Expr,
    matrix: CMatrix,
}

impl Term {
    pub fn new(coeff: &str, matrix: CMatrix) -> Result<Self, ParseError> {
        Ok(Self { source: coeff.to_string(), expr: parse_profile(coeff)?, matrix })
    }

    /// Coefficient text as written in the scenario.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// `Σ_k c_k(t) M_k` with all `M_k` of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSum {
    dim: usize,
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TermSumError {
    #[error("at least one term is required")]
    NoTerms,
    #[error("term {index} has dimension {got}, expected {expected}")]
    Dimension { index: usize, expected: usize, got: usize },
}

impl TermSum {
    pub fn new(terms: Vec<Term>) -> Result<Self, TermSumError> {
        let dim = terms.first().ok_or(TermSumError::NoTerms)?.matrix.dim();
        for (index, term) in terms.iter().enumerate() {
            if term.matrix.dim() != dim {
                return Err(TermSumError::Dimension { index, expected: dim, got: term.matrix.dim() });
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn depends_on_time(&self) -> bool {
        self.terms.iter().any(|t| t.expr.depends_on_time())
    }

    pub fn evaluate(&self, t: f64) -> Result<CMatrix, EvalError> {
        let mut out = CMatrix::zeros(self.dim);
        for term in &self.terms {
            let c = term.expr.eval(t)?;
            out.axpy(Complex64::new(c, 0.0), &term.matrix);
        }
        Ok(out)
    }

    /// `Σ_k c_k'(t) M_k` from symbolic derivatives of the coefficients.
    pub fn derivative(&self) -> Result<DerivativeSum, EvalError> {
        let terms = self
            .terms
            .iter()
            .map(|t| Ok((t.expr.derivative()?, t.matrix.clone())))
            .collect::<Result<_, EvalError>>()?;
        Ok(DerivativeSum { dim: self.dim, terms })
    }

    /// Concatenates two term lists of equal dimension.
    pub fn concat(&self, other: &TermSum) -> Result<TermSum, TermSumError> {
        TermSum::new(self.terms.iter().chain(&other.terms).cloned().collect())
    }
}

/// Time derivative of a [`TermSum`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSum {
    dim: usize,
    terms: Vec<(Expr, CMatrix)>,
}

impl DerivativeSum {
    pub fn evaluate(&self, t: f64) -> Result<CMatrix, EvalError> {
        let mut out = CMatrix::zeros(self.dim);
        for (expr, m) in &self.terms {
            out.axpy(Complex64::new(expr.eval(t)?, 0.0), m);
        }
        Ok(out)
    }
}

/// Schrödinger-picture Hamiltonian `H_S(t)`. Hermiticity is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    sum: TermSum,
}

impl HamiltonianSpec {
    pub fn new(terms: Vec<Term>) -> Result<Self, TermSumError> {
        Ok(Self { sum: TermSum::new(terms)? })
    }

    pub fn constant(h: CMatrix) -> Self {
        Self::new(vec![Term::new("1", h).expect("literal")]).expect("single term")
    }

    pub fn dim(&self) -> usize {
        self.sum.dim()
    }

    pub fn terms(&self) -> &[Term] {
        self.sum.terms()
    }

    pub fn sum(&self) -> &TermSum {
        &self.sum
    }

    /// `H_S(t) = Σ_k c_k(t) M_k`.
    pub fn assemble(&self, t: f64) -> Result<CMatrix, EvalError> {
        self.sum.evaluate(t)
    }

    /// True when every term matrix is Hermitian, so `H_S(t)` is Hermitian
    /// for all `t`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.sum.terms().iter().all(|t| t.matrix.hermitian_deviation() <= tol)
    }
}

/// An operator `O_S(t)`, either a constant matrix or a sum of profile-weighted
/// terms carrying explicit time dependence.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    sum: TermSum,
    derivative: DerivativeSum,
    plain: bool,
}

impl Observable {
    pub fn constant(m: CMatrix) -> Self {
        let sum = TermSum::new(vec![Term::new("1", m).expect("literal")]).expect("single term");
        let derivative = sum.derivative().expect("constant derivative");
        Self { sum, derivative, plain: true }
    }

    pub fn from_terms(terms: Vec<Term>) -> Result<Self, ScenarioError> {
        let sum = TermSum::new(terms).map_err(|e| ScenarioError::invalid("", e.to_string()))?;
        let derivative = sum
            .derivative()
            .map_err(|e| ScenarioError::invalid("", format!("coefficient not differentiable: {e}")))?;
        Ok(Self { sum, derivative, plain: false })
    }

    pub fn dim(&self) -> usize {
        self.sum.dim()
    }

    /// Whether this was given as a bare matrix rather than a term list.
    pub fn is_plain(&self) -> bool {
        self.plain
    }

    pub fn terms(&self) -> &[Term] {
        self.sum.terms()
    }

    pub fn at(&self, t: f64) -> Result<CMatrix, EvalError> {
        self.sum.evaluate(t)
    }

    /// `∂ₜO_S(t)`, differentiated symbolically.
    pub fn time_derivative(&self, t: f64) -> Result<CMatrix, EvalError> {
        self.derivative.evaluate(t)
    }

    pub fn depends_on_time(&self) -> bool {
        self.sum.depends_on_time()
    }
}

impl From<MatError> for ScenarioError {
    fn from(e: MatError) -> Self {
        ScenarioError::invalid("", e.to_string())
    }
}
