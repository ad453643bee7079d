//! Dense complex linear-algebra kernels.
//!
//! Thin, deterministic wrappers over `nalgebra` decompositions with the
//! conventions the rest of the crate relies on: eigenvalues sorted in
//! descending order, Hermitian-ness checked against a relative tolerance,
//! and an SVD-based numerical rank with `sigma_max * max(rows, cols)` scaling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative tolerance used to decide whether a matrix is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default relative tolerance of [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Eigenvalues of a PSD input may dip this far below zero before rejection.
pub const PSD_CLAMP: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Eigendecomposition `A = V diag(values) V^H` with eigenvalues descending.
#[derive(Debug, Clone)]
pub struct HermitianEvd {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEvd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (c, &lambda) in self.values.iter().enumerate() {
            for r in 0..n {
                scaled[(r, c)] *= lambda;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Largest entrywise deviation `max |A - A^H|`.
pub fn hermitian_deviation(a: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0_f64;
    for r in 0..n {
        for c in r..n {
            dev = dev.max((a[(r, c)] - a[(c, r)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(a: &ComplexMatrix) -> bool {
    a.is_square() && hermitian_deviation(a) <= HERMITIAN_TOL * max_abs(a).max(f64::MIN_POSITIVE)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn check_hermitian(a: &ComplexMatrix) -> Result<(), NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let scale = max_abs(a);
    let deviation = hermitian_deviation(a);
    if deviation > HERMITIAN_TOL * scale {
        return Err(NumericsError::NotHermitian { deviation });
    }
    Ok(())
}

/// Hermitian eigendecomposition, eigenvalues sorted descending.
pub fn hermitian_evd(a: &ComplexMatrix) -> Result<HermitianEvd, NumericsError> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEvd {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEvd { values, vectors })
}

/// Singular values in descending order.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rel_tol * sigma_max * max(rows, cols)`.
pub fn numerical_rank(a: &ComplexMatrix, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let Some(&smax) = s.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    let thresh = rel_tol * smax * a.nrows().max(a.ncols()) as f64;
    s.iter().filter(|&&v| v > thresh).count()
}

/// Hermitian PSD square root; eigenvalues down to [`PSD_CLAMP`] are clamped to zero.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    let evd = hermitian_evd(a)?;
    let scale = evd.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if let Some(&min) = evd.values.last() {
        if min < PSD_CLAMP * scale {
            return Err(NumericsError::NotPsd { min_eigenvalue: min });
        }
    }
    let roots = HermitianEvd {
        values: evd.values.iter().map(|v| v.max(0.0).sqrt()).collect(),
        vectors: evd.vectors,
    };
    Ok(hermitian_part(&roots.reconstruct()))
}

/// Lower-triangular Cholesky factor `L` with `A = L L^H`.
pub fn cholesky(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    check_hermitian(a)?;
    hermitian_part(a)
        .cholesky()
        .map(|c| c.l())
        .ok_or(NumericsError::NotPositiveDefinite)
}

/// Unit vector maximizing `(v^H S v) / (v^H A v)` together with the maximal quotient.
///
/// Whitens with the Cholesky factor of `A` and takes the principal eigenvector
/// of `L^{-1} S L^{-H}`. The returned vector has its largest-magnitude entry
/// rotated onto the positive real axis so the phase is reproducible.
pub fn max_generalized_eigvec(
    s: &ComplexMatrix,
    a: &ComplexMatrix,
) -> Result<(ComplexVector, f64), NumericsError> {
    check_hermitian(s)?;
    if s.nrows() != a.nrows() {
        return Err(NumericsError::DimensionMismatch {
            expected: s.nrows(),
            actual: a.nrows(),
        });
    }
    let l = cholesky(a)?;
    let n = s.nrows();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&ComplexMatrix::identity(n, n))
        .ok_or(NumericsError::NotPositiveDefinite)?;
    let whitened = hermitian_part(&(&l_inv * s * l_inv.adjoint()));
    let evd = hermitian_evd(&whitened)?;
    let top = evd.vectors.column(0).into_owned();
    let v = l
        .adjoint()
        .solve_upper_triangular(&top)
        .ok_or(NumericsError::NotPositiveDefinite)?;
    let v = normalize_phase(&v.unscale(v.norm()));
    Ok((v, evd.values[0]))
}

/// Rotates `v` so its largest-magnitude entry is real and positive.
pub fn normalize_phase(v: &ComplexVector) -> ComplexVector {
    let Some((_, pivot)) = v
        .iter()
        .enumerate()
        .max_by(|(_, x), (_, y)| x.norm().total_cmp(&y.norm()))
    else {
        return v.clone();
    };
    if pivot.norm() == 0.0 {
        return v.clone();
    }
    let phase = pivot.conj() / pivot.norm();
    v.map(|z| z * phase)
}

/// Rayleigh quotient `(v^H S v) / (v^H A v)`.
pub fn rayleigh_quotient(s: &ComplexMatrix, a: &ComplexMatrix, v: &ComplexVector) -> f64 {
    quad_form(s, v) / quad_form(a, v)
}

/// `Re(v^H M v)`.
pub fn quad_form(m: &ComplexMatrix, v: &ComplexVector) -> f64 {
    v.dotc(&(m * v)).re
}

/// Outer product `h h^H`.
pub fn outer(h: &ComplexVector) -> ComplexMatrix {
    h * h.adjoint()
}

/// `Re Tr{A B}` for Hermitian `A`, `B`.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            acc += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    acc
}

pub fn trace_re(a: &ComplexMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        hermitian_part(&random_matrix(rng, n, n))
    }

    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        random_matrix(rng, n, n).qr().q()
    }

    #[test]
    fn evd_identity_and_diagonal() {
        let evd = hermitian_evd(&ComplexMatrix::identity(3, 3)).unwrap();
        for v in &evd.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(5.0, 0.0)]));
        let evd = hermitian_evd(&d).unwrap();
        assert!((evd.values[0] - 5.0).abs() < 1e-14);
        assert!((evd.values[1] - 2.0).abs() < 1e-14);
        // leading eigenvector is e_2 up to phase
        assert!((evd.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!(evd.vectors[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn evd_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 4);
            let evd = hermitian_evd(&a).unwrap();
            let lam_max = evd.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let resid = max_abs(&(evd.reconstruct() - &a));
            assert!(resid <= 1e-10 * (1.0 + lam_max));
            let gram = evd.vectors.adjoint() * &evd.vectors;
            assert!(max_abs(&(gram - ComplexMatrix::identity(4, 4))) < 1e-10);
            let trace = trace_re(&a);
            assert!((evd.values.iter().sum::<f64>() - trace).abs() < 1e-10);
            assert!(evd.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn evd_rejects_non_hermitian() {
        let mut a = ComplexMatrix::identity(2, 2);
        a[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(hermitian_evd(&a), Err(NumericsError::NotHermitian { .. })));
    }

    #[test]
    fn rank_examples() {
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(1e-14, 0.0)]));
        assert_eq!(numerical_rank(&d, DEFAULT_RANK_TOL), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 3, 6);
        assert_eq!(numerical_rank(&a, DEFAULT_RANK_TOL), 3);
        let mut b = random_matrix(&mut rng, 2, 4);
        for col in 0..4 {
            b[(1, col)] = b[(0, col)] * 2.0;
        }
        assert_eq!(numerical_rank(&b, DEFAULT_RANK_TOL), 1);
        assert_eq!(numerical_rank(&ComplexMatrix::zeros(3, 3), DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn rank_is_unitarily_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rank in 1..=3 {
            let a = random_matrix(&mut rng, 4, rank) * random_matrix(&mut rng, rank, 5);
            let u = random_unitary(&mut rng, 4);
            let v = random_unitary(&mut rng, 5);
            assert_eq!(numerical_rank(&a, DEFAULT_RANK_TOL), rank);
            assert_eq!(numerical_rank(&(&u * &a * &v), DEFAULT_RANK_TOL), rank);
        }
    }

    #[test]
    fn sqrt_examples() {
        let i = ComplexMatrix::identity(3, 3);
        assert!(max_abs(&(psd_sqrt(&i).unwrap() - &i)) < 1e-14);
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(4.0, 0.0), c(9.0, 0.0)]));
        let s = psd_sqrt(&d).unwrap();
        assert!((s[(0, 0)].re - 2.0).abs() < 1e-14 && (s[(1, 1)].re - 3.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = random_matrix(&mut rng, 4, 4);
            let a = &g * g.adjoint();
            let s = psd_sqrt(&a).unwrap();
            assert!(max_abs(&(&s * &s - &a)) <= 1e-9);
            assert!(max_abs(&(&s * &a - &a * &s)) <= 1e-9);
            assert!(is_hermitian(&s) || hermitian_deviation(&s) < 1e-14);
        }
        let neg = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-0.5, 0.0)]));
        assert!(matches!(psd_sqrt(&neg), Err(NumericsError::NotPsd { .. })));
    }

    #[test]
    fn generalized_eigvec_identity_reduces_to_evd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_matrix(&mut rng, 3, 3);
        let s = &g * g.adjoint();
        let (v, q) = max_generalized_eigvec(&s, &ComplexMatrix::identity(3, 3)).unwrap();
        let evd = hermitian_evd(&s).unwrap();
        assert!((q - evd.values[0]).abs() < 1e-10);
        let overlap = v.dotc(&evd.vectors.column(0).into_owned()).norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn generalized_eigvec_rank_one_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sv = random_matrix(&mut rng, 3, 1).column(0).into_owned();
        let g = random_matrix(&mut rng, 3, 3);
        let a = &g * g.adjoint() + ComplexMatrix::identity(3, 3);
        let (v, _) = max_generalized_eigvec(&outer(&sv), &a).unwrap();
        let expected = a.clone().lu().solve(&sv).unwrap();
        let expected = expected.unscale(expected.norm());
        assert!((v.dotc(&expected).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn generalized_eigvec_beats_random_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gs = random_matrix(&mut rng, 3, 3);
        let ga = random_matrix(&mut rng, 3, 3);
        let s = &gs * gs.adjoint();
        let a = &ga * ga.adjoint() + ComplexMatrix::identity(3, 3).scale(0.1);
        let (v, q) = max_generalized_eigvec(&s, &a).unwrap();
        assert!((rayleigh_quotient(&s, &a, &v) - q).abs() < 1e-9 * q.max(1.0));
        for _ in 0..10_000 {
            let u = random_matrix(&mut rng, 3, 1).column(0).into_owned();
            assert!(rayleigh_quotient(&s, &a, &u) <= q * (1.0 + 1e-12));
        }
    }

    #[test]
    fn generalized_eigvec_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let gs = random_matrix(&mut rng, 4, 4);
        let ga = random_matrix(&mut rng, 4, 4);
        let s = &gs * gs.adjoint();
        let a = &ga * ga.adjoint() + ComplexMatrix::identity(4, 4);
        let (v1, q1) = max_generalized_eigvec(&s, &a).unwrap();
        let (v2, q2) = max_generalized_eigvec(&s.scale(3.5), &a).unwrap();
        assert!((q2 - 3.5 * q1).abs() < 1e-9 * q2);
        let phase = v1.dotc(&v2);
        let aligned = v2.map(|z| z * phase.conj() / phase.norm());
        assert!((aligned - v1).norm() < 1e-8);
    }

    #[test]
    fn singular_a_is_rejected() {
        let s = ComplexMatrix::identity(2, 2);
        let a = ComplexMatrix::zeros(2, 2);
        assert_eq!(max_generalized_eigvec(&s, &a).unwrap_err(), NumericsError::NotPositiveDefinite);
    }
}
