//! Stationary metric: Hermitian positive-definite `G` with `GH = H†G`.
//!
//! The map `G ↦ GH − H†G` is real-linear on Hermitian matrices. Hermitian
//! `G` is parametrized by `n²` reals (diagonal entries, and real/imaginary
//! parts of the upper triangle scaled by `1/√2` so the parameter norm equals
//! the Frobenius norm). Its nullspace comes from an SVD; when it has more than
//! one dimension the orthogonal projection of the identity onto it is taken,
//! which is the Frobenius-closest stationary metric to `I`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::matops::{CMatrix, MatError, Tolerance};

/// Singular values below this fraction of the largest span the nullspace.
const NULLSPACE_RTOL: f64 = 1e-10;
/// `λ_min / λ_max` at or below this is treated as a singular metric.
const DEGENERACY_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no positive-definite stationary metric exists (best candidate λmin/λmax = {ratio:e})")]
    NoPositiveDefiniteSolution { ratio: f64 },
    #[error("stationary metric is degenerate (λmin/λmax = {ratio:e}); Hamiltonian at or near an exceptional point")]
    Degenerate { ratio: f64 },
    #[error(transparent)]
    Mat(#[from] MatError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMetric {
    /// Normalized to `trace(G) = dim`.
    pub metric: CMatrix,
    /// Real dimension of the Hermitian solution space.
    pub nullspace_dim: usize,
    /// `‖GH − H†G‖_F` for the returned metric.
    pub residual: f64,
}

impl StationaryMetric {
    /// More than one independent stationary metric exists; the returned one
    /// is the representative closest to the identity.
    pub fn non_unique(&self) -> bool {
        self.nullspace_dim > 1
    }
}

fn hermitian_from_params(n: usize, p: &[f64]) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut g = CMatrix::zeros(n);
    let mut k = 0;
    for i in 0..n {
        g[(i, i)] = Complex64::new(p[k], 0.0);
        k += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex64::new(p[k] * s, p[k + 1] * s);
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
            k += 2;
        }
    }
    g
}

fn params_of_identity(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    p[..n].iter_mut().for_each(|x| *x = 1.0);
    p
}

/// Solves `GH − H†G = 0` for Hermitian positive-definite `G`.
pub fn solve_stationary_metric(h: &CMatrix) -> Result<StationaryMetric, MetricError> {
    let n = h.dim();
    let np = n * n;
    let hd = h.adjoint();
    let mut map = DMatrix::<f64>::zeros(2 * np, np);
    let mut basis = vec![0.0; np];
    for k in 0..np {
        basis[k] = 1.0;
        let g = hermitian_from_params(n, &basis);
        let image = &(&g * h) - &(&hd * &g);
        for (idx, z) in image.as_slice().iter().enumerate() {
            map[(2 * idx, k)] = z.re;
            map[(2 * idx + 1, k)] = z.im;
        }
        basis[k] = 0.0;
    }

    let svd = map.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    // Rows of V^T with small singular value span the nullspace. SVD only
    // returns min(rows, cols) = np values, so every row has one.
    let null: Vec<Vec<f64>> = (0..np)
        .filter(|&r| svd.singular_values[r] <= NULLSPACE_RTOL * sigma_max)
        .map(|r| v_t.row(r).iter().copied().collect())
        .collect();
    if null.is_empty() {
        return Err(MetricError::NoPositiveDefiniteSolution { ratio: f64::NEG_INFINITY });
    }

    let id = params_of_identity(n);
    let mut projection = vec![0.0; np];
    for v in &null {
        let c: f64 = v.iter().zip(&id).map(|(a, b)| a * b).sum();
        projection.iter_mut().zip(v).for_each(|(p, x)| *p += c * x);
    }

    let mut candidates = vec![projection];
    for v in &null {
        candidates.push(v.clone());
        candidates.push(v.iter().map(|x| -x).collect());
    }

    let tol = Tolerance::new(1e-12, 1e-12);
    let identity = CMatrix::identity(n);
    let mut best_ratio = f64::NEG_INFINITY;
    let mut chosen: Option<(f64, CMatrix)> = None;
    for (idx, p) in candidates.iter().enumerate() {
        let g = hermitian_from_params(n, p);
        let trace = g.trace().re;
        if !(trace.abs() > 0.0) {
            continue;
        }
        let g = g.scale_real(n as f64 / trace);
        let eig = g.hermitian_eigenvalues(&tol)?;
        let (lo, hi) = (eig[0], eig[n - 1]);
        let ratio = if hi > 0.0 { lo / hi } else { f64::NEG_INFINITY };
        best_ratio = best_ratio.max(ratio);
        if ratio > DEGENERACY_RATIO {
            if idx == 0 {
                chosen = Some((0.0, g));
                break;
            }
            let dist = (&g - &identity).frobenius_norm();
            if chosen.as_ref().map_or(true, |(d, _)| dist < *d) {
                chosen = Some((dist, g));
            }
        }
    }

    match chosen {
        Some((_, metric)) => {
            let residual = (&(&metric * h) - &(&hd * &metric)).frobenius_norm();
            Ok(StationaryMetric { metric, nullspace_dim: null.len(), residual })
        }
        None if best_ratio.abs() <= DEGENERACY_RATIO => Err(MetricError::Degenerate { ratio: best_ratio }),
        None => Err(MetricError::NoPositiveDefiniteSolution { ratio: best_ratio }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::{pauli, I};

    fn dimer(s: f64, gamma: f64) -> CMatrix {
        &pauli::x().scale_real(s) + &pauli::z().scale(I * gamma)
    }

    #[test]
    fn hermitian_hamiltonian_gives_identity() {
        let sol = solve_stationary_metric(&pauli::x()).unwrap();
        assert!((&sol.metric - &CMatrix::identity(2)).frobenius_norm() < 1e-12);
        assert!(sol.non_unique());
    }

    #[test]
    fn unbroken_dimer_matches_ansatz() {
        // Oracle: Hermitian ansatz [[a, b],[b̄, d]] reduces to a = d,
        // Im b = −γa/s, Re b free; Frobenius-closest to I has Re b = 0.
        for (s, gamma) in [(1.0, 0.5), (2.0, 0.3), (1.0, 0.9)] {
            let h = dimer(s, gamma);
            let sol = solve_stationary_metric(&h).unwrap();
            let want = CMatrix::new(
                2,
                vec![
                    Complex64::new(1.0, 0.0),
                    Complex64::new(0.0, -gamma / s),
                    Complex64::new(0.0, gamma / s),
                    Complex64::new(1.0, 0.0),
                ],
            )
            .unwrap();
            assert!((&sol.metric - &want).frobenius_norm() < 1e-10, "s={s} γ={gamma}");
            let bound = 1e-10 * sol.metric.frobenius_norm() * h.frobenius_norm();
            assert!(sol.residual <= bound);
            assert_eq!(sol.nullspace_dim, 2);
        }
    }

    #[test]
    fn broken_dimer_has_no_pd_metric() {
        // Every element a·G₁ + r·σx has eigenvalues a ± sqrt(r² + γ²a²):
        // indefinite for γ > 1.
        let err = solve_stationary_metric(&dimer(1.0, 1.5)).unwrap_err();
        assert!(matches!(err, MetricError::NoPositiveDefiniteSolution { .. }), "{err:?}");
    }

    #[test]
    fn exceptional_point_is_degenerate() {
        let err = solve_stationary_metric(&dimer(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, MetricError::Degenerate { .. }), "{err:?}");
    }

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let sol = solve_stationary_metric(&CMatrix::zeros(3)).unwrap();
        assert!((&sol.metric - &CMatrix::identity(3)).frobenius_norm() < 1e-12);
        assert_eq!(sol.nullspace_dim, 9);
    }
}
