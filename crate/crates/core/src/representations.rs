//! Schrödinger (S), Heisenberg (H) and Heisenberg-like (HL) pictures.
//!
//! | picture | ket            | dual                 | operator          |
//! |---------|----------------|----------------------|-------------------|
//! | S       | `ψ(t)`         | `ψ(t)† G(t)`         | `O_S(t)`          |
//! | H       | `ψ(t₀)`        | `ψ(t₀)† G(t₀)`       | `U_L O_S U_R`     |
//! | HL      | `𝓔(t₀) ψ(t₀)`  | `(𝓔(t₀) ψ(t₀))†`     | `𝓔 O_S 𝓔⁻¹`       |
//!
//! `U_L` plays the role of `U⁻¹`. States and operators carry a
//! [`RepresentationTag`]; bilinear forms refuse mismatched tags instead of
//! transporting implicitly.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::evolution::{rhs_left_prop, EvolutionBundle};
use crate::matops::{CMatrix, CVector, MatError, NumericConfig, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum RepresentationTag {
    #[serde(rename = "S")]
    Schrodinger,
    #[serde(rename = "H")]
    Heisenberg,
    #[serde(rename = "HL")]
    HeisenbergLike,
    /// Conventional `U† O U` transport, kept only as a diagnostic; it is not
    /// a valid picture when `H ≠ H†`.
    #[serde(rename = "naive")]
    NaiveDagger,
}

impl fmt::Display for RepresentationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepresentationTag::Schrodinger => "S",
            RepresentationTag::Heisenberg => "H",
            RepresentationTag::HeisenbergLike => "HL",
            RepresentationTag::NaiveDagger => "naive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepError {
    #[error("representation mismatch: expected {expected}, got {got}")]
    TagMismatch { expected: RepresentationTag, got: RepresentationTag },
    #[error("time mismatch: operator at t = {operator}, node at t = {node}")]
    TimeMismatch { operator: f64, node: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("node index {index} out of range ({len} nodes)")]
    NodeOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Mat(#[from] MatError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedState {
    pub rep: RepresentationTag,
    pub ket: CVector,
    /// Bra components, read as a row covector.
    pub dual: CVector,
    /// Physical time; meaningful for S only.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedOperator {
    pub rep: RepresentationTag,
    pub matrix: CMatrix,
    pub time: f64,
}

impl TaggedOperator {
    pub fn schrodinger(matrix: CMatrix, time: f64) -> Self {
        Self { rep: RepresentationTag::Schrodinger, matrix, time }
    }

    fn require(&self, rep: RepresentationTag) -> Result<(), RepError> {
        if self.rep == rep {
            Ok(())
        } else {
            Err(RepError::TagMismatch { expected: rep, got: self.rep })
        }
    }
}

fn check_node(bundle: &EvolutionBundle, index: usize) -> Result<f64, RepError> {
    bundle
        .grid
        .get(index)
        .copied()
        .ok_or(RepError::NodeOutOfRange { index, len: bundle.len() })
}

fn check_time(op: &TaggedOperator, node: f64) -> Result<(), RepError> {
    if (op.time - node).abs() <= 1e-12 * node.abs().max(1.0) {
        Ok(())
    } else {
        Err(RepError::TimeMismatch { operator: op.time, node })
    }
}

fn check_dim(a: usize, b: usize) -> Result<(), RepError> {
    if a == b {
        Ok(())
    } else {
        Err(RepError::Dimension { left: a, right: b })
    }
}

/// `⟨O⟩ = ψ(t)† G(t) O ψ(t)` at grid node `index`.
pub fn expectation_s(bundle: &EvolutionBundle, index: usize, obs: &CMatrix) -> Result<Complex64, RepError> {
    check_node(bundle, index)?;
    check_dim(bundle.dim(), obs.dim())?;
    let psi = &bundle.psi[index];
    Ok(psi.conj().row_mul(&bundle.g[index]).pair(&obs.apply(psi)))
}

/// Schrödinger-picture state at node `index`.
pub fn schrodinger_state(bundle: &EvolutionBundle, index: usize) -> Result<TaggedState, RepError> {
    let time = check_node(bundle, index)?;
    let ket = bundle.psi[index].clone();
    let dual = ket.conj().row_mul(&bundle.g[index]);
    Ok(TaggedState { rep: RepresentationTag::Schrodinger, ket, dual, time })
}

/// `O_H(t) = U⁻¹ O_S(t) U` with `U⁻¹` realized as the integrated `U_L`.
pub fn to_heisenberg(obs: &TaggedOperator, bundle: &EvolutionBundle, index: usize) -> Result<TaggedOperator, RepError> {
    obs.require(RepresentationTag::Schrodinger)?;
    let t = check_node(bundle, index)?;
    check_time(obs, t)?;
    check_dim(bundle.dim(), obs.matrix.dim())?;
    let matrix = &(&bundle.u_l[index] * &obs.matrix) * &bundle.u_r[index];
    Ok(TaggedOperator { rep: RepresentationTag::Heisenberg, matrix, time: t })
}

/// `O_HL(t) = 𝓔(t) O_S(t) 𝓔⁻¹(t)`.
pub fn to_heisenberg_like(
    obs: &TaggedOperator,
    bundle: &EvolutionBundle,
    index: usize,
    cfg: &NumericConfig,
) -> Result<TaggedOperator, RepError> {
    obs.require(RepresentationTag::Schrodinger)?;
    let t = check_node(bundle, index)?;
    check_time(obs, t)?;
    check_dim(bundle.dim(), obs.matrix.dim())?;
    let e = &bundle.e[index];
    let e_inv = e.inverse(cfg)?;
    let matrix = &(e * &obs.matrix) * &e_inv;
    Ok(TaggedOperator { rep: RepresentationTag::HeisenbergLike, matrix, time: t })
}

/// Conventional `U_R† O_S U_R`; agrees with [`to_heisenberg`] only for
/// Hermitian Hamiltonians.
pub fn naive_dagger_transport(
    obs: &TaggedOperator,
    bundle: &EvolutionBundle,
    index: usize,
) -> Result<TaggedOperator, RepError> {
    obs.require(RepresentationTag::Schrodinger)?;
    let t = check_node(bundle, index)?;
    check_time(obs, t)?;
    check_dim(bundle.dim(), obs.matrix.dim())?;
    let u = &bundle.u_r[index];
    let matrix = &(&u.adjoint() * &obs.matrix) * u;
    Ok(TaggedOperator { rep: RepresentationTag::NaiveDagger, matrix, time: t })
}

/// Heisenberg state: `ket = ψ(t₀)`, `dual = ψ(t₀)† G(t₀)`.
pub fn heisenberg_state(bundle: &EvolutionBundle) -> TaggedState {
    let ket = bundle.psi[0].clone();
    let dual = ket.conj().row_mul(&bundle.g[0]);
    TaggedState { rep: RepresentationTag::Heisenberg, ket, dual, time: bundle.grid[0] }
}

/// Heisenberg-like state: `ket = 𝓔(t₀) ψ(t₀)`, `dual = ψ(t₀)† 𝓔(t₀)†`.
///
/// The dual is computed from `ψ†` and `𝓔†` rather than by conjugating the
/// ket; both routes produce identical floating-point values.
pub fn heisenberg_like_state(bundle: &EvolutionBundle) -> TaggedState {
    let psi0 = &bundle.psi[0];
    let e0 = &bundle.e[0];
    let ket = e0.apply(psi0);
    let dual = psi0.conj().row_mul(&e0.adjoint());
    TaggedState { rep: RepresentationTag::HeisenbergLike, ket, dual, time: bundle.grid[0] }
}

/// `dual · O · ket` for a state and operator in the same picture.
pub fn expectation(state: &TaggedState, obs: &TaggedOperator) -> Result<Complex64, RepError> {
    obs.require(state.rep)?;
    check_dim(state.ket.dim(), obs.matrix.dim())?;
    Ok(state.dual.pair(&obs.matrix.apply(&state.ket)))
}

pub fn expectation_h(state: &TaggedState, obs: &TaggedOperator) -> Result<Complex64, RepError> {
    obs.require(RepresentationTag::Heisenberg)?;
    expectation(state, obs)
}

pub fn expectation_hl(state: &TaggedState, obs: &TaggedOperator) -> Result<Complex64, RepError> {
    obs.require(RepresentationTag::HeisenbergLike)?;
    expectation(state, obs)
}

/// Right-hand side of the Heisenberg equation of motion,
/// `dO_H/dt = i[H_H, O_H] + (∂ₜO)_H`.
pub fn heisenberg_rhs(
    obs: &TaggedOperator,
    hamiltonian: &TaggedOperator,
    dt_obs: &TaggedOperator,
) -> Result<CMatrix, RepError> {
    for op in [obs, hamiltonian, dt_obs] {
        op.require(RepresentationTag::Heisenberg)?;
        check_time(op, obs.time)?;
    }
    let mut rhs = hamiltonian.matrix.commutator(&obs.matrix).scale(I);
    rhs.axpy(Complex64::new(1.0, 0.0), &dt_obs.matrix);
    Ok(rhs)
}

/// `H♭ = 𝓔 H_S 𝓔⁻¹ + i (∂ₜ𝓔) 𝓔⁻¹`.
pub fn hermitized_hamiltonian(
    h_s: &CMatrix,
    e: &CMatrix,
    de_dt: &CMatrix,
    cfg: &NumericConfig,
) -> Result<CMatrix, RepError> {
    check_dim(h_s.dim(), e.dim())?;
    check_dim(e.dim(), de_dt.dim())?;
    let e_inv = e.inverse(cfg)?;
    let mut out = &(e * h_s) * &e_inv;
    out.axpy(I, &(de_dt * &e_inv));
    Ok(out)
}

/// `H♭` at a node of the integrated bundle in the `H♭ = 0` gauge.
///
/// `∂ₜ𝓔` is taken as `𝓔(t₀)·∂ₜU_L` rather than from the vielbein's own
/// flow, so the residual also measures how closely the integrated `𝓔`
/// tracks `𝓔(t₀)U_L`.
pub fn hermitized_hamiltonian_at(
    bundle: &EvolutionBundle,
    index: usize,
    h_s: &CMatrix,
    cfg: &NumericConfig,
) -> Result<CMatrix, RepError> {
    check_node(bundle, index)?;
    check_dim(h_s.dim(), bundle.dim())?;
    let de_dt = &bundle.e[0] * &rhs_left_prop(h_s, &bundle.u_l[index]);
    hermitized_hamiltonian(h_s, &bundle.e[index], &de_dt, cfg)
}

fn commutator_residual(
    a: &TaggedOperator,
    b: &TaggedOperator,
    bundle: &EvolutionBundle,
    index: usize,
    transport: fn(&TaggedOperator, &EvolutionBundle, usize) -> Result<TaggedOperator, RepError>,
) -> Result<f64, RepError> {
    a.require(RepresentationTag::Schrodinger)?;
    b.require(RepresentationTag::Schrodinger)?;
    let ta = transport(a, bundle, index)?;
    let tb = transport(b, bundle, index)?;
    let ab = TaggedOperator::schrodinger(a.matrix.commutator(&b.matrix), a.time);
    let t_ab = transport(&ab, bundle, index)?;
    let lhs = ta.matrix.commutator(&tb.matrix);
    let scale = (ta.matrix.frobenius_norm() * tb.matrix.frobenius_norm()).max(1.0);
    Ok((&lhs - &t_ab.matrix).frobenius_norm() / scale)
}

/// `‖[A_H, B_H] − (U⁻¹[A_S, B_S]U)‖_F / max(1, ‖A_H‖‖B_H‖)`.
pub fn commutator_transport_check(
    a: &TaggedOperator,
    b: &TaggedOperator,
    bundle: &EvolutionBundle,
    index: usize,
) -> Result<f64, RepError> {
    commutator_residual(a, b, bundle, index, to_heisenberg)
}

/// Same residual with the conventional `U†·U` transport.
pub fn naive_commutator_residual(
    a: &TaggedOperator,
    b: &TaggedOperator,
    bundle: &EvolutionBundle,
    index: usize,
) -> Result<f64, RepError> {
    commutator_residual(a, b, bundle, index, naive_dagger_transport)
}
