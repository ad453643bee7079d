//! Max-min SINR beamforming under per-base-station power caps, solved through
//! its inverse: the weighted peak power minimization (WPPM) problem and a
//! bisection on the common SINR target.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{complex_gaussian, derive_seed, min_sinr, BeamformerSet, ChannelSet};
use crate::numerics::{self, ComplexMatrix, ComplexVector, NumericsError};
use crate::qos::{SolveStatus, RANK_ONE_TOL};
use crate::sdp::{self, SdpError, SdpProblem, Sense};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 40;
/// Doublings of the initial upper bound tried before giving up.
pub const MAX_UPPER_DOUBLINGS: usize = 10;

#[derive(Debug, Error)]
pub enum MmsError {
    #[error("invalid power budget: {0}")]
    InvalidBudget(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("upper bound still feasible after {0} doublings")]
    Unbounded(usize),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Per-base-station power caps in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p: Vec<f64>,
}

impl PowerBudget {
    pub fn new(p: Vec<f64>) -> Result<Self, MmsError> {
        if p.is_empty() || p.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(MmsError::InvalidBudget(format!("caps must be positive and finite, got {p:?}")));
        }
        Ok(Self { p })
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self, MmsError> {
        Self::new(vec![p; n])
    }

    pub fn scaled(&self, c: f64) -> Result<Self, MmsError> {
        Self::new(self.p.iter().map(|v| v * c).collect())
    }
}

#[derive(Debug, Clone)]
pub struct WppmResult {
    /// `Q₁(γ, p)`; infinite when the target cannot be met at any power.
    pub x: f64,
    pub w: Vec<ComplexMatrix>,
    pub duals: Vec<f64>,
    pub status: SolveStatus,
}

fn check_budget(channels: &ChannelSet, budget: &PowerBudget) -> Result<(), MmsError> {
    if budget.p.len() != channels.n() {
        return Err(MmsError::InvalidBudget(format!(
            "expected {} caps, got {}",
            channels.n(),
            budget.p.len()
        )));
    }
    Ok(())
}

/// `min x` s.t. `Tr{H_{i,i,k} W_i} >= γ sum_{j != i} Tr{H_{j,i,k} W_j} + γ σ²`,
/// `Tr{W_i} / p_i <= x`. The scalar `x` is the last (1 x 1) block.
pub fn wppm_sdp(channels: &ChannelSet, gamma: f64, budget: &PowerBudget, sigma2: f64) -> Result<SdpProblem, MmsError> {
    check_budget(channels, budget)?;
    let (n, users, nt) = (channels.n(), channels.k(), channels.nt());
    let mut dims = vec![nt; n];
    dims.push(1);
    let mut p = SdpProblem::new(dims);
    let scalar = |v: f64| ComplexMatrix::from_element(1, 1, Complex64::new(v, 0.0));
    p.set_objective(n, scalar(1.0));
    for i in 0..n {
        for k in 0..users {
            let mut terms = vec![(i, channels.gram(i, i, k))];
            for j in (0..n).filter(|&j| j != i) {
                terms.push((j, channels.gram(j, i, k) * Complex64::new(-gamma, 0.0)));
            }
            p.add_constraint(terms, Sense::Ge, gamma * sigma2);
        }
    }
    for i in 0..n {
        p.add_constraint(
            vec![
                (i, ComplexMatrix::identity(nt, nt) * Complex64::new(1.0 / budget.p[i], 0.0)),
                (n, scalar(-1.0)),
            ],
            Sense::Le,
            0.0,
        );
    }
    Ok(p)
}

pub fn solve_wppm(channels: &ChannelSet, gamma: f64, budget: &PowerBudget, sigma2: f64) -> Result<WppmResult, MmsError> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(MmsError::InvalidArgument(format!("SINR target {gamma} must be nonnegative")));
    }
    let (n, nt) = (channels.n(), channels.nt());
    if gamma == 0.0 {
        check_budget(channels, budget)?;
        return Ok(WppmResult {
            x: 0.0,
            w: vec![ComplexMatrix::zeros(nt, nt); n],
            duals: Vec::new(),
            status: SolveStatus::Optimal,
        });
    }
    let problem = wppm_sdp(channels, gamma, budget, sigma2)?;
    let sol = sdp::solve_sdp(&problem)?;
    let status = SolveStatus::from(sol.status);
    let w: Vec<ComplexMatrix> = sol.blocks[..n].iter().map(numerics::hermitian_part).collect();
    let x = match status {
        SolveStatus::Optimal => (0..n).map(|i| numerics::trace_re(&w[i]) / budget.p[i]).fold(0.0, f64::max),
        _ => f64::INFINITY,
    };
    Ok(WppmResult {
        x,
        w,
        duals: sol.duals,
        status,
    })
}

#[derive(Debug, Clone)]
pub struct MmsOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub n_rand: usize,
    pub seed: u64,
    /// Stop after the bisection, without extracting beamformers.
    pub relaxed_only: bool,
}

impl Default for MmsOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            n_rand: crate::qos::DEFAULT_RANDOMIZATIONS,
            seed: 0,
            relaxed_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub gamma: f64,
    pub q: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct MmsRunResult {
    /// Lower end of the final bracket: a target the relaxation meets within budget.
    pub gamma_star: f64,
    pub gamma_upper: f64,
    /// Zero vectors where extraction failed.
    pub beamformers: BeamformerSet,
    pub extracted: bool,
    pub rank_one: bool,
    pub achieved_min_sinr: Option<f64>,
    pub bisection_trace: Vec<BisectionStep>,
    pub iterations: usize,
    /// Relaxed solution at `gamma_star`.
    pub relaxed_w: Vec<ComplexMatrix>,
}

/// `max_{i,k} p_i ||h_{i,i,k}||^2 / σ²`: the best SINR any user could see alone.
pub fn initial_upper(channels: &ChannelSet, budget: &PowerBudget, sigma2: f64) -> f64 {
    (0..channels.n())
        .flat_map(|i| (0..channels.k()).map(move |k| (i, k)))
        .map(|(i, k)| budget.p[i] * channels.h(i, i, k).norm_squared() / sigma2)
        .fold(0.0, f64::max)
}

/// Bisection on the common target with `Q₁(γ, p) <= 1` as the test, then extraction.
pub fn mms_bisection(
    channels: &ChannelSet,
    budget: &PowerBudget,
    sigma2: f64,
    options: &MmsOptions,
) -> Result<MmsRunResult, MmsError> {
    check_budget(channels, budget)?;
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(MmsError::InvalidArgument("tol must be positive and max_iter nonzero".into()));
    }
    let (n, nt) = (channels.n(), channels.nt());
    let mut trace = Vec::new();
    let mut lower = 0.0;
    let mut upper = initial_upper(channels, budget, sigma2);
    let mut at_lower = vec![ComplexMatrix::zeros(nt, nt); n];

    let mut doublings = 0;
    loop {
        let r = solve_wppm(channels, upper, budget, sigma2)?;
        trace.push(BisectionStep {
            gamma: upper,
            q: r.x,
            lower,
            upper,
        });
        if r.x > 1.0 {
            break;
        }
        if doublings == MAX_UPPER_DOUBLINGS {
            return Err(MmsError::Unbounded(doublings));
        }
        lower = upper;
        at_lower = r.w;
        upper *= 2.0;
        doublings += 1;
    }

    let mut iterations = 0;
    while iterations < options.max_iter && upper - lower > options.tol * lower.max(1.0) {
        let gamma = 0.5 * (lower + upper);
        let r = solve_wppm(channels, gamma, budget, sigma2)?;
        if r.x > 1.0 {
            upper = gamma;
        } else {
            lower = gamma;
            at_lower = r.w;
        }
        trace.push(BisectionStep {
            gamma,
            q: r.x,
            lower,
            upper,
        });
        iterations += 1;
    }

    let mut result = MmsRunResult {
        gamma_star: lower,
        gamma_upper: upper,
        beamformers: BeamformerSet::zeros(n, nt),
        extracted: false,
        rank_one: false,
        achieved_min_sinr: None,
        bisection_trace: trace,
        iterations,
        relaxed_w: at_lower,
    };
    if !options.relaxed_only && lower > 0.0 {
        extract_joint(channels, budget, sigma2, options, &mut result)?;
    }
    Ok(result)
}

/// Principal-eigenvector tuple when every block is rank one, otherwise the best
/// of `n_rand` randomized tuples, each beamformer scaled to its full budget.
fn extract_joint(
    channels: &ChannelSet,
    budget: &PowerBudget,
    sigma2: f64,
    options: &MmsOptions,
    result: &mut MmsRunResult,
) -> Result<(), MmsError> {
    let n = channels.n();
    let evds = result
        .relaxed_w
        .iter()
        .map(numerics::hermitian_evd)
        .collect::<Result<Vec<_>, _>>()?;
    if evds.iter().any(|e| e.values.first().is_none_or(|&l| l <= 0.0)) {
        return Ok(());
    }
    let rank_one = result
        .relaxed_w
        .iter()
        .all(|w| numerics::numerical_rank(w, RANK_ONE_TOL) == 1);
    let beams = if rank_one {
        evds.iter()
            .map(|e| e.vectors.column(0) * Complex64::new(e.values[0].sqrt(), 0.0))
            .collect()
    } else {
        let factors: Vec<ComplexMatrix> = evds
            .iter()
            .map(|e| {
                let d = e.values.len();
                ComplexMatrix::from_fn(d, d, |r, c| e.vectors[(r, c)] * e.values[c].max(0.0).sqrt())
            })
            .collect();
        // one stream per cell keeps the draws independent of the others
        let mut rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|i| ChaCha8Rng::seed_from_u64(derive_seed(options.seed, i as u64)))
            .collect();
        let mut best: Option<(Vec<ComplexVector>, f64)> = None;
        for _ in 0..options.n_rand {
            let tuple: Vec<ComplexVector> = factors
                .iter()
                .zip(rngs.iter_mut())
                .zip(&budget.p)
                .map(|((f, rng), &p)| {
                    let v = f * ComplexVector::from_fn(f.ncols(), |_, _| complex_gaussian(rng));
                    let sq = v.norm_squared();
                    if sq == 0.0 {
                        v
                    } else {
                        v * Complex64::new((p / sq).sqrt(), 0.0)
                    }
                })
                .collect();
            let value = min_sinr(channels, &BeamformerSet::new(tuple.clone()), sigma2);
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((tuple, value));
            }
        }
        match best {
            Some((t, _)) => t,
            None => return Ok(()),
        }
    };
    result.beamformers = BeamformerSet::new(beams);
    result.rank_one = rank_one;
    result.extracted = true;
    result.achieved_min_sinr = Some(min_sinr(channels, &result.beamformers, sigma2));
    Ok(())
}

/// `(|S₁(Q₁(γ₀, p) p) - γ₀| / γ₀, |Q₁(S₁(p), p) - 1|)`, infinite on infeasibility.
pub fn check_inversion(
    channels: &ChannelSet,
    budget: &PowerBudget,
    sigma2: f64,
    gamma0: f64,
    options: &MmsOptions,
) -> Result<(f64, f64), MmsError> {
    if !(gamma0 > 0.0) {
        return Err(MmsError::InvalidArgument("gamma0 must be positive".into()));
    }
    let relaxed = MmsOptions {
        relaxed_only: true,
        ..options.clone()
    };
    let q = solve_wppm(channels, gamma0, budget, sigma2)?;
    let forward = if q.x.is_finite() && q.x > 0.0 {
        let s = mms_bisection(channels, &budget.scaled(q.x)?, sigma2, &relaxed)?;
        (s.gamma_star - gamma0).abs() / gamma0
    } else {
        f64::INFINITY
    };
    let s = mms_bisection(channels, budget, sigma2, &relaxed)?;
    let backward = if s.gamma_star > 0.0 {
        let q = solve_wppm(channels, s.gamma_star, budget, sigma2)?;
        (q.x - 1.0).abs()
    } else {
        f64::INFINITY
    };
    Ok((forward, backward))
}
