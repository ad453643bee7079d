//! Hermitian-to-real-symmetric embedding.
//!
//! An `n x n` Hermitian `X = Re + i Im` maps to the `2n x 2n` real symmetric
//! `[[Re, -Im], [Im, Re]]`. Coefficient matrices are embedded the same way and
//! halved, so `Tr{A X}` equals the real inner product of the embedded pair.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Sense, SdpProblem};
use crate::numerics::ComplexMatrix;

#[derive(Debug, Clone)]
pub struct RealConstraint {
    pub terms: Vec<(usize, DMatrix<f64>)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Real symmetric counterpart of an [`SdpProblem`].
#[derive(Debug, Clone)]
pub struct RealSdp {
    pub block_dims: Vec<usize>,
    pub objective: Vec<DMatrix<f64>>,
    pub constraints: Vec<RealConstraint>,
}

/// `[[Re, -Im], [Im, Re]]`, no scaling.
pub fn embed_matrix(a: &ComplexMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = a[(r, c)];
            out[(r, c)] = z.re;
            out[(r + n, c + n)] = z.re;
            out[(r, c + n)] = -z.im;
            out[(r + n, c)] = z.im;
        }
    }
    out
}

/// Inverse of [`embed_matrix`], averaging the redundant blocks.
pub fn recover_hermitian(x: &DMatrix<f64>) -> ComplexMatrix {
    let n = x.nrows() / 2;
    let m = ComplexMatrix::from_fn(n, n, |r, c| {
        let re = 0.5 * (x[(r, c)] + x[(r + n, c + n)]);
        let im = 0.5 * (x[(r + n, c)] - x[(r, c + n)]);
        Complex64::new(re, im)
    });
    crate::numerics::hermitian_part(&m)
}

pub fn embed_hermitian_to_real(problem: &SdpProblem) -> RealSdp {
    let half = |a: &ComplexMatrix| embed_matrix(a) * 0.5;
    RealSdp {
        block_dims: problem.block_dims.iter().map(|n| 2 * n).collect(),
        objective: problem.objective.iter().map(half).collect(),
        constraints: problem
            .constraints
            .iter()
            .map(|c| RealConstraint {
                terms: c.terms.iter().map(|t| (t.block, half(&t.coeff))).collect(),
                sense: c.sense,
                rhs: c.rhs,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{outer, trace_product, ComplexVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.component_mul(b).sum()
    }

    #[test]
    fn scalar_block_embeds_as_diagonal_pair() {
        let mut p = SdpProblem::new(vec![1]);
        p.set_objective(0, ComplexMatrix::from_element(1, 1, Complex64::new(4.0, 0.0)));
        let real = embed_hermitian_to_real(&p);
        assert_eq!(real.block_dims, vec![2]);
        let c = &real.objective[0];
        assert_eq!((c[(0, 0)], c[(1, 1)], c[(0, 1)], c[(1, 0)]), (2.0, 2.0, 0.0, 0.0));
    }

    #[test]
    fn trace_values_are_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let h = ComplexVector::from_fn(4, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>()));
            let g = ComplexMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random::<f64>(), rng.random::<f64>() - 0.5));
            let w = &g * g.adjoint();
            let hh = outer(&h);
            let complex_value = trace_product(&hh, &w);
            let real_value = real_inner(&(embed_matrix(&hh) * 0.5), &embed_matrix(&w));
            assert!((complex_value - real_value).abs() <= 1e-12 * (1.0 + complex_value.abs()));
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let g = ComplexMatrix::from_fn(3, 3, |_, _| Complex64::new(rng.random::<f64>(), rng.random::<f64>()));
        let a = crate::numerics::hermitian_part(&g);
        let back = recover_hermitian(&embed_matrix(&a));
        assert!((back - a).iter().all(|z| z.norm() < 1e-15));
    }
}
