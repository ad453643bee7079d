use mcbf_core::numerics::{outer, ComplexMatrix, ComplexVector};
use mcbf_core::sdp::{solve_sdp, SdpProblem, SdpStatus, Sense};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn cn(rng: &mut ChaCha8Rng, n: usize) -> ComplexVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, im * s)
    })
}

/// Per-cell multicast subproblem: min Tr W with K SINR rows and (N-1)K caps.
fn subproblem(rng: &mut ChaCha8Rng, nt: usize, k: usize, others: usize, gamma: f64, cap: f64) -> SdpProblem {
    let mut p = SdpProblem::new(vec![nt]);
    p.set_objective(0, ComplexMatrix::identity(nt, nt));
    for _ in 0..k {
        let h = cn(rng, nt);
        p.add_constraint(vec![(0, outer(&h))], Sense::Ge, gamma * (others as f64 * cap + 1.0));
    }
    for _ in 0..others * k {
        let h = cn(rng, nt);
        p.add_constraint(vec![(0, outer(&h) * Complex64::new(0.3, 0.0))], Sense::Le, cap);
    }
    p
}

fn run_batch(seed: u64, nt: usize, k: usize, others: usize, gamma: f64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut solved, mut infeasible) = (0, 0);
    while solved < 50 && solved + infeasible < 500 {
        let p = subproblem(&mut rng, nt, k, others, gamma, 1.0);
        let sol = solve_sdp(&p).unwrap();
        match sol.status {
            SdpStatus::Optimal => {
                assert!(sol.kkt_residual <= 1e-7, "kkt {}", sol.kkt_residual);
                assert!(sol.dual_objective <= sol.objective + 1e-9 * (1.0 + sol.objective.abs()));
                solved += 1;
            }
            SdpStatus::PrimalInfeasible => infeasible += 1,
            SdpStatus::NumericalFailure => panic!("numerical failure after {} iterations", sol.iterations),
        }
    }
    (solved, infeasible)
}

#[test]
fn random_subproblems_meet_kkt_tolerance() {
    for (seed, nt, k, others, gamma) in [(77, 4, 4, 1, 2.0), (78, 4, 4, 2, 1.0), (79, 8, 2, 2, 3.0), (80, 4, 2, 1, 10.0), (81, 2, 4, 2, 0.5)] {
        let (solved, infeasible) = run_batch(seed, nt, k, others, gamma);
        assert_eq!(solved, 50, "{nt}/{k}/{others}/{gamma}: {infeasible} infeasible draws");
    }
}
