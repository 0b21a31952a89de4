//! Dense complex matrix kernel.
//!
//! Every operator in the engine (Hamiltonians, metrics, propagators,
//! vielbeins, observables) is a [`CMatrix`]; kets and the component arrays
//! of dual states are [`CVector`]s. Matrices are small (desk scale), square
//! and stored row-major.
//!
//! Tolerances never appear as literals at call sites: they travel in a
//! [`Tolerance`] (or a [`NumericConfig`], which adds the condition-number cap
//! used by [`CMatrix::inverse`]).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Shorthand for the imaginary unit.
pub const I: Complex64 = Complex64::new(0.0, 1.0);

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix must have dimension >= 1")]
    Empty,
    #[error("expected {expected} entries, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is singular (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive-definite (leading minor {minor} has pivot {pivot:e})")]
    NotPositiveDefinite { minor: usize, pivot: f64 },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

/// Absolute and relative tolerance pair.
///
/// A residual `r` measured against a quantity of size `scale` is accepted
/// when `r <= atol + rtol * scale`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Tolerance {
    /// Panics if both components are zero or either is negative.
    pub fn new(atol: f64, rtol: f64) -> Self {
        assert!(atol >= 0.0 && rtol >= 0.0, "tolerances must be nonnegative");
        assert!(atol + rtol > 0.0, "atol + rtol must be positive");
        Self { atol, rtol }
    }

    pub fn bound(&self, scale: f64) -> f64 {
        self.atol + self.rtol * scale
    }

    pub fn accepts(&self, residual: f64, scale: f64) -> bool {
        residual <= self.bound(scale)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { atol: 1e-10, rtol: 1e-10 }
    }
}

/// Tolerance plus the condition-number cap applied when inverting.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NumericConfig {
    pub tol: Tolerance,
    pub cond_cap: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self { tol: Tolerance::default(), cond_cap: 1e12 }
    }
}

/// Dense square complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries, rejecting empty, ragged or
    /// non-finite input.
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self, MatError> {
        if dim == 0 {
            return Err(MatError::Empty);
        }
        if data.len() != dim * dim {
            return Err(MatError::BadLength { expected: dim * dim, got: data.len() });
        }
        if let Some(pos) = data.iter().position(|z| !z.is_finite()) {
            return Err(MatError::NonFinite { row: pos / dim, col: pos % dim });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, MatError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(MatError::BadLength { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Real-valued convenience constructor; panics on bad shape.
    pub fn from_real(dim: usize, entries: &[f64]) -> Self {
        Self::new(dim, entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .expect("from_real: bad shape")
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(dim > 0);
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| if r == c { ONE } else { ZERO })
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        Self::from_fn(entries.len(), |r, c| if r == c { entries[r] } else { ZERO })
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        Self::from_fn(entries.len(), |r, c| {
            if r == c {
                Complex64::new(entries[r], 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn checked_mul(&self, other: &CMatrix) -> Result<CMatrix, MatError> {
        if self.dim != other.dim {
            return Err(MatError::DimensionMismatch { left: self.dim, right: other.dim });
        }
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for r in 0..n {
            let row = &self.data[r * n..(r + 1) * n];
            let dst = &mut out[r * n..(r + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (d, &b) in dst.iter_mut().zip(brow) {
                    *d += a * b;
                }
            }
        }
        Ok(CMatrix { dim: n, data: out })
    }

    pub fn checked_add(&self, other: &CMatrix) -> Result<CMatrix, MatError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn checked_sub(&self, other: &CMatrix) -> Result<CMatrix, MatError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &CMatrix,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<CMatrix, MatError> {
        if self.dim != other.dim {
            return Err(MatError::DimensionMismatch { left: self.dim, right: other.dim });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(CMatrix { dim: self.dim, data })
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        CMatrix { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    /// `self += s * other`, in place.
    pub fn axpy(&mut self, s: Complex64, other: &CMatrix) {
        assert_eq!(self.dim, other.dim, "axpy: dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let n = self.dim;
        CMatrix::from_fn(n, |r, c| self.data[c * n + r].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|c| (0..n).map(|r| self.data[r * n + c].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &(self * other) - &(other * self)
    }

    /// `‖a − a†‖_F / max(1, ‖a‖_F)`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (self.data[r * n + c] - self.data[c * n + r].conj()).norm_sqr();
            }
        }
        acc.sqrt() / self.frobenius_norm().max(1.0)
    }

    /// `(a + a†) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        let n = self.dim;
        CMatrix::from_fn(n, |r, c| (self.data[r * n + c] + self.data[c * n + r].conj()) * 0.5)
    }

    fn ensure_hermitian(&self, tol: &Tolerance) -> Result<(), MatError> {
        let n = self.dim;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (self.data[r * n + c] - self.data[c * n + r].conj()).norm_sqr();
            }
        }
        let deviation = acc.sqrt();
        if tol.accepts(deviation, self.frobenius_norm()) {
            Ok(())
        } else {
            Err(MatError::NotHermitian { deviation })
        }
    }

    /// Inverse by LU decomposition with partial pivoting.
    ///
    /// Fails with [`MatError::Singular`] when a pivot vanishes or the 1-norm
    /// condition estimate `‖a‖₁‖a⁻¹‖₁` exceeds `cfg.cond_cap`.
    pub fn inverse(&self, cfg: &NumericConfig) -> Result<CMatrix, MatError> {
        let n = self.dim;
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|r| (r, lu[r * n + k].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmag == 0.0 || !pmag.is_finite() {
                return Err(MatError::Singular { condition: f64::INFINITY });
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for r in k + 1..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                for c in k + 1..n {
                    let v = lu[k * n + c];
                    lu[r * n + c] -= factor * v;
                }
            }
        }
        // Solve LU x = P e_j column by column.
        let mut inv = vec![ZERO; n * n];
        let mut col = vec![ZERO; n];
        for j in 0..n {
            for (i, x) in col.iter_mut().enumerate() {
                *x = if perm[i] == j { ONE } else { ZERO };
            }
            for i in 0..n {
                let mut s = col[i];
                for k in 0..i {
                    s -= lu[i * n + k] * col[k];
                }
                col[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = col[i];
                for k in i + 1..n {
                    s -= lu[i * n + k] * col[k];
                }
                col[i] = s / lu[i * n + i];
            }
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        let inv = CMatrix { dim: n, data: inv };
        let condition = self.one_norm() * inv.one_norm();
        if !condition.is_finite() || condition > cfg.cond_cap {
            return Err(MatError::Singular { condition });
        }
        Ok(inv)
    }

    /// Upper-triangular factor `E` with positive real diagonal such that
    /// `E†E = self`.
    pub fn cholesky_upper(&self, tol: &Tolerance) -> Result<CMatrix, MatError> {
        self.ensure_hermitian(tol)?;
        let n = self.dim;
        let g = |r: usize, c: usize| self.data[r * n + c];
        let mut e = vec![ZERO; n * n];
        for j in 0..n {
            // Row j of E: E[j][j] = sqrt(G[j][j] − Σ_k |E[k][j]|²).
            let mut d = g(j, j).re;
            for k in 0..j {
                d -= e[k * n + j].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(MatError::NotPositiveDefinite { minor: j + 1, pivot: d });
            }
            let djj = d.sqrt();
            e[j * n + j] = Complex64::new(djj, 0.0);
            for c in j + 1..n {
                let mut s = g(j, c);
                for k in 0..j {
                    s -= e[k * n + j].conj() * e[k * n + c];
                }
                e[j * n + c] = s / djj;
            }
        }
        Ok(CMatrix { dim: n, data: e })
    }

    /// All eigenvalues with algebraic multiplicity, sorted by real then
    /// imaginary part.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>, MatError> {
        let n = self.dim;
        if n == 1 {
            return Ok(vec![self.data[0]]);
        }
        let m = self.to_nalgebra();
        let schur = m
            .try_schur(f64::EPSILON, 100 * n.max(10))
            .ok_or(MatError::NoConvergence)?;
        let (_, t) = schur.unpack();
        let mut out = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            // Complex Schur form is triangular; a surviving subdiagonal entry
            // means an undeflated 2×2 block, solved directly.
            if i + 1 < n && t[(i + 1, i)].norm() > f64::EPSILON * (t[(i, i)].norm() + t[(i + 1, i + 1)].norm()) {
                let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
                let half_tr = (a + d) * 0.5;
                let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
                out.push(half_tr + disc);
                out.push(half_tr - disc);
                i += 2;
            } else {
                out.push(t[(i, i)]);
                i += 1;
            }
        }
        if out.iter().any(|z| !z.is_finite()) {
            return Err(MatError::NoConvergence);
        }
        sort_spectrum(&mut out);
        Ok(out)
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self, tol: &Tolerance) -> Result<Vec<f64>, MatError> {
        self.ensure_hermitian(tol)?;
        let m = self.hermitian_part().to_nalgebra();
        let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 1000 * self.dim)
            .ok_or(MatError::NoConvergence)?;
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eig_hermitian(&self, tol: &Tolerance) -> Result<f64, MatError> {
        Ok(self.hermitian_eigenvalues(tol)?[0])
    }

    /// Matrix exponential (scaling and squaring with Padé approximants).
    pub fn exp(&self) -> CMatrix {
        CMatrix::from_nalgebra(&self.to_nalgebra().exp())
    }

    /// Matrix-vector product `self · v`.
    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(self.dim, v.dim(), "apply: dimension mismatch");
        let n = self.dim;
        let data = (0..n)
            .map(|r| {
                self.data[r * n..(r + 1) * n]
                    .iter()
                    .zip(v.as_slice())
                    .fold(ZERO, |acc, (&a, &b)| acc + a * b)
            })
            .collect();
        CVector { data }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<Complex64>) -> CMatrix {
        let n = m.nrows();
        CMatrix::from_fn(n, |r, c| m[(r, c)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        assert!(r < self.dim && c < self.dim, "index out of range");
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        assert!(r < self.dim && c < self.dim, "index out of range");
        &mut self.data[r * self.dim + c]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{}) [", self.dim, self.dim)?;
        for row in self.rows() {
            write!(f, "  ")?;
            for z in row {
                write!(f, "{:>+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// Operator sugar for equal-dimension arithmetic; panics on mismatch. Use the
// `checked_*` methods where dimensions come from user input.
impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.checked_mul(rhs).expect("matrix product: dimension mismatch")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.checked_add(rhs).expect("matrix sum: dimension mismatch")
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.checked_sub(rhs).expect("matrix difference: dimension mismatch")
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

/// Dense complex vector: a ket, or the components of a dual (row) state.
#[derive(Clone, PartialEq, Debug)]
pub struct CVector {
    data: Vec<Complex64>,
}

impl CVector {
    pub fn new(data: Vec<Complex64>) -> Result<Self, MatError> {
        if data.is_empty() {
            return Err(MatError::Empty);
        }
        if let Some(pos) = data.iter().position(|z| !z.is_finite()) {
            return Err(MatError::NonFinite { row: pos, col: 0 });
        }
        Ok(Self { data })
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .expect("from_real: empty or non-finite")
    }

    pub fn zeros(dim: usize) -> Self {
        Self { data: vec![ZERO; dim] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> CVector {
        CVector { data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn axpy(&mut self, s: Complex64, other: &CVector) {
        assert_eq!(self.dim(), other.dim(), "axpy: dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &CVector) -> CVector {
        assert_eq!(self.dim(), other.dim(), "sub: dimension mismatch");
        CVector { data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect() }
    }

    /// Entrywise complex conjugate: the bra components of this ket.
    pub fn conj(&self) -> CVector {
        CVector { data: self.data.iter().map(|z| z.conj()).collect() }
    }

    /// Treats `self` as a row covector and returns `self · m`.
    pub fn row_mul(&self, m: &CMatrix) -> CVector {
        assert_eq!(self.dim(), m.dim(), "row_mul: dimension mismatch");
        let n = m.dim();
        let mut out = vec![ZERO; n];
        for (k, &a) in self.data.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += a * m[(k, c)];
            }
        }
        CVector { data: out }
    }

    /// Plain bilinear pairing `Σ self_i · other_i` (no conjugation).
    pub fn pair(&self, other: &CVector) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "pair: dimension mismatch");
        self.data.iter().zip(&other.data).fold(ZERO, |acc, (&a, &b)| acc + a * b)
    }
}

impl Index<usize> for CVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.data[i]
    }
}

fn lex_cmp(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Sorts a spectrum lexicographically by (real, imaginary).
pub fn sort_spectrum(values: &mut [Complex64]) {
    values.sort_by(lex_cmp);
}

/// Largest pairwise deviation between two spectra under the best matching.
///
/// Lexicographic sorting alone mismatches pairs whose real parts tie up to
/// rounding noise (e.g. `±i`), so for `n <= 8` every permutation is tried and
/// the bottleneck-optimal one is used; larger spectra fall back to sorted
/// pairwise comparison.
pub fn spectrum_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    if n <= 8 {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |perm| {
            let worst = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| (a[i] - b[j]).norm())
                .fold(0.0, f64::max);
            if worst < best {
                best = worst;
            }
        });
        best
    } else {
        let mut sa = a.to_vec();
        let mut sb = b.to_vec();
        sort_spectrum(&mut sa);
        sort_spectrum(&mut sb);
        sa.iter().zip(&sb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }
}

fn permute(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, visit);
        idx.swap(k, i);
    }
}

/// Pauli matrices.
pub mod pauli {
    use super::*;

    pub fn x() -> CMatrix {
        CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn y() -> CMatrix {
        CMatrix::new(2, vec![ZERO, -I, I, ZERO]).unwrap()
    }

    pub fn z() -> CMatrix {
        CMatrix::from_real(2, &[1.0, 0.0, 0.0, -1.0])
    }
}
