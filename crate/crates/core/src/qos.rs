//! QoS problem pieces: the interference-temperature (IT) vector, the per-cell
//! relaxed subproblem, its subgradient, the centralized relaxation and
//! beamformer extraction.
//!
//! Cell and user indices are zero-based. `Γ_{i,j,k}` caps the interference
//! base station `i` leaks to user `k` of cell `j`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{complex_gaussian, ChannelSet};
use crate::numerics::{self, ComplexMatrix, ComplexVector};
use crate::sdp::{self, SdpError, SdpProblem, SdpStatus, Sense};

/// Relative rank threshold for deciding a relaxed solution is rank one.
pub const RANK_ONE_TOL: f64 = 1e-6;
/// Default number of Gaussian randomizations.
pub const DEFAULT_RANDOMIZATIONS: usize = 100;
/// Relative slack allowed between the SINR floor and the cap ceiling in
/// [`scaling_alpha`]; both are tight at a rank-one optimum.
pub const SCALING_TOL: f64 = 1e-8;
/// Caps are enforced as at least `CAP_FLOOR * σ²`. A zero cap forces `W`
/// into a null space, the relaxed problem loses its interior and its
/// multiplier is unbounded.
pub const CAP_FLOOR: f64 = 1e-9;

/// `max(Γ_{i,j,k}, CAP_FLOOR σ²)`.
pub fn effective_cap(cap: f64, sigma2: f64) -> f64 {
    cap.max(CAP_FLOOR * sigma2)
}

#[derive(Debug, Error)]
pub enum QosError {
    #[error("cell pair ({i}, {j}) has no IT entry")]
    SameCell { i: usize, j: usize },
    #[error("index ({i}, {j}, {k}) out of range for N = {n}, K = {users}")]
    OutOfRange {
        i: usize,
        j: usize,
        k: usize,
        n: usize,
        users: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("subproblem for cell {0} is not optimal")]
    NotOptimal(usize),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// Position of `Γ_{i,j,k}`: lexicographic in `i`, then `j` skipping `i`, then `k`.
pub fn it_index(i: usize, j: usize, k: usize, n: usize, users: usize) -> Result<usize, QosError> {
    if i >= n || j >= n || k >= users {
        return Err(QosError::OutOfRange { i, j, k, n, users });
    }
    if i == j {
        return Err(QosError::SameCell { i, j });
    }
    let jp = if j < i { j } else { j - 1 };
    Ok((i * (n - 1) + jp) * users + k)
}

/// The IT vector `(Γ_{1,2,1}, ..., Γ_{N,N-1,K})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItVector {
    pub n: usize,
    pub k: usize,
    pub values: Vec<f64>,
}

impl ItVector {
    pub fn filled(n: usize, k: usize, value: f64) -> Self {
        Self {
            n,
            k,
            values: vec![value; n * n.saturating_sub(1) * k],
        }
    }

    pub fn from_values(n: usize, k: usize, values: Vec<f64>) -> Result<Self, QosError> {
        let expected = n * n.saturating_sub(1) * k;
        if values.len() != expected {
            return Err(QosError::InvalidArgument(format!(
                "IT vector has length {}, expected {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(QosError::InvalidArgument("IT entries must be finite and nonnegative".into()));
        }
        Ok(Self { n, k, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> Result<usize, QosError> {
        it_index(i, j, k, self.n, self.k)
    }

    /// `Γ_{i,j,k}`; panics on `i == j` or out-of-range indices.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k).expect("valid IT index")]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(i, j, k).expect("valid IT index");
        self.values[idx] = value;
    }

    /// `sum_{j != i} Γ_{j,i,k}`: interference budget received by user `k` of cell `i`.
    pub fn received(&self, i: usize, k: usize) -> f64 {
        (0..self.n).filter(|&j| j != i).map(|j| self.get(j, i, k)).sum()
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// IT vector realized by relaxed covariances: `Γ_{i,j,k} = Tr{H_{i,j,k} W_i}`.
pub fn it_from_relaxed(channels: &ChannelSet, w: &[ComplexMatrix]) -> ItVector {
    let (n, users) = (channels.n(), channels.k());
    let mut it = ItVector::filled(n, users, 0.0);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            for k in 0..users {
                let v = (channels.gram(i, j, k) * &w[i]).trace().re;
                it.set(i, j, k, v.max(0.0));
            }
        }
    }
    it
}

/// Necessary condition on the common SINR target:
/// `min_k rank(H_k) / (N - rank(H_k))`, infinite when every `H_k` has full row rank.
pub fn feasibility_bound(channels: &ChannelSet) -> f64 {
    let n = channels.n();
    if n < 2 {
        return f64::INFINITY;
    }
    (0..channels.k())
        .map(|k| {
            let h = crate::channel::stack_hk(channels, k).expect("user index in range");
            let r = numerics::numerical_rank(&h, numerics::DEFAULT_RANK_TOL);
            if r >= n {
                f64::INFINITY
            } else {
                r as f64 / (n - r) as f64
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl From<SdpStatus> for SolveStatus {
    fn from(s: SdpStatus) -> Self {
        match s {
            SdpStatus::Optimal => Self::Optimal,
            SdpStatus::PrimalInfeasible => Self::Infeasible,
            SdpStatus::NumericalFailure => Self::NumericalFailure,
        }
    }
}

/// Solution of one cell's relaxed subproblem.
///
/// `sinr_duals[k]` is the multiplier of the SINR row of user `k` expressed
/// per unit of received IT (the solver multiplier times `γ_i`), and
/// `cap_duals[j][k]` that of the cap towards user `k` of cell `j` (zero for
/// `j == i`).
#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub cell: usize,
    pub w: ComplexMatrix,
    pub power: f64,
    pub sinr_duals: Vec<f64>,
    pub cap_duals: Vec<Vec<f64>>,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SubproblemResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

fn check_gamma(gamma: f64) -> Result<(), QosError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(QosError::InvalidArgument(format!("SINR target {gamma} must be positive")));
    }
    Ok(())
}

/// `min Tr{W}` s.t. `Tr{H_{i,i,k} W} >= γ (sum_{j != i} Γ_{j,i,k} + σ²)`,
/// `Tr{H_{i,j,k} W} <= Γ_{i,j,k}`, `W ⪰ 0`, with caps floored by [`effective_cap`].
pub fn subproblem_sdp(
    i: usize,
    channels: &ChannelSet,
    gamma: f64,
    it: &ItVector,
    sigma2: f64,
) -> Result<SdpProblem, QosError> {
    check_gamma(gamma)?;
    let (n, users, nt) = (channels.n(), channels.k(), channels.nt());
    if it.n != n || it.k != users {
        return Err(QosError::InvalidArgument("IT vector does not match the network".into()));
    }
    if i >= n {
        return Err(QosError::OutOfRange { i, j: i, k: 0, n, users });
    }
    let mut p = SdpProblem::new(vec![nt]);
    p.set_objective(0, ComplexMatrix::identity(nt, nt));
    for k in 0..users {
        p.add_constraint(
            vec![(0, channels.gram(i, i, k))],
            Sense::Ge,
            gamma * (it.received(i, k) + sigma2),
        );
    }
    for j in (0..n).filter(|&j| j != i) {
        for k in 0..users {
            p.add_constraint(
                vec![(0, channels.gram(i, j, k))],
                Sense::Le,
                effective_cap(it.get(i, j, k), sigma2),
            );
        }
    }
    Ok(p)
}

pub fn solve_subproblem(
    i: usize,
    channels: &ChannelSet,
    gamma: f64,
    it: &ItVector,
    sigma2: f64,
) -> Result<SubproblemResult, QosError> {
    let problem = subproblem_sdp(i, channels, gamma, it, sigma2)?;
    let sol = sdp::solve_sdp(&problem)?;
    let (n, users, nt) = (channels.n(), channels.k(), channels.nt());
    let status = SolveStatus::from(sol.status);
    let mut sinr_duals = vec![0.0; users];
    let mut cap_duals = vec![vec![0.0; users]; n];
    if status == SolveStatus::Optimal {
        for (k, d) in sinr_duals.iter_mut().enumerate() {
            *d = gamma * sol.duals[k].max(0.0);
        }
        let mut row = users;
        for j in (0..n).filter(|&j| j != i) {
            for k in 0..users {
                cap_duals[j][k] = sol.duals[row].max(0.0);
                row += 1;
            }
        }
    }
    let w = if status == SolveStatus::Optimal {
        numerics::hermitian_part(&sol.blocks[0])
    } else {
        ComplexMatrix::zeros(nt, nt)
    };
    Ok(SubproblemResult {
        cell: i,
        power: numerics::trace_re(&w),
        w,
        sinr_duals,
        cap_duals,
        status,
        iterations: sol.iterations,
    })
}

/// Cell `i`'s share of the subgradient of `sum_i P*_i(Γ)`.
///
/// `λ_{i,i,k}` lands on every `Γ_{j,i,k}` (`j != i`) and `-λ_{i,j,k}` on `Γ_{i,j,k}`.
pub fn subgradient_from_duals(result: &SubproblemResult, n: usize, users: usize) -> Result<Vec<f64>, QosError> {
    if !result.is_optimal() {
        return Err(QosError::NotOptimal(result.cell));
    }
    let i = result.cell;
    let mut g = vec![0.0; n * n.saturating_sub(1) * users];
    for j in (0..n).filter(|&j| j != i) {
        for k in 0..users {
            g[it_index(j, i, k, n, users)?] += result.sinr_duals[k];
            g[it_index(i, j, k, n, users)?] -= result.cap_duals[j][k];
        }
    }
    Ok(g)
}

/// Jointly relaxed problem over all cells.
#[derive(Debug, Clone)]
pub struct CentralizedResult {
    pub w: Vec<ComplexMatrix>,
    pub power: f64,
    pub status: SolveStatus,
}

/// `min sum_i Tr{W_i}` s.t. `Tr{H_{i,i,k} W_i} - γ_i sum_{j != i} Tr{H_{j,i,k} W_j} >= γ_i σ²`.
pub fn centralized_sdp(channels: &ChannelSet, gamma: &[f64], sigma2: f64) -> Result<SdpProblem, QosError> {
    let (n, users, nt) = (channels.n(), channels.k(), channels.nt());
    if gamma.len() != n {
        return Err(QosError::InvalidArgument(format!("expected {n} SINR targets, got {}", gamma.len())));
    }
    for &g in gamma {
        check_gamma(g)?;
    }
    let mut p = SdpProblem::new(vec![nt; n]);
    for i in 0..n {
        p.set_objective(i, ComplexMatrix::identity(nt, nt));
    }
    for i in 0..n {
        for k in 0..users {
            let mut terms = vec![(i, channels.gram(i, i, k))];
            for j in (0..n).filter(|&j| j != i) {
                terms.push((j, channels.gram(j, i, k) * num_complex::Complex64::new(-gamma[i], 0.0)));
            }
            p.add_constraint(terms, Sense::Ge, gamma[i] * sigma2);
        }
    }
    Ok(p)
}

pub fn solve_centralized_sdr(channels: &ChannelSet, gamma: &[f64], sigma2: f64) -> Result<CentralizedResult, QosError> {
    let problem = centralized_sdp(channels, gamma, sigma2)?;
    let sol = sdp::solve_sdp(&problem)?;
    let status = SolveStatus::from(sol.status);
    let w: Vec<ComplexMatrix> = sol.blocks.iter().map(numerics::hermitian_part).collect();
    let power = if status == SolveStatus::Optimal {
        w.iter().map(numerics::trace_re).sum()
    } else {
        f64::NAN
    };
    Ok(CentralizedResult { w, power, status })
}

/// Smallest `α` with `sqrt(α) w` meeting cell `i`'s SINR rows and caps, or
/// `None` when no scaling works.
pub fn scaling_alpha(
    w: &ComplexVector,
    i: usize,
    channels: &ChannelSet,
    gamma: f64,
    it: &ItVector,
    sigma2: f64,
) -> Result<Option<f64>, QosError> {
    if w.norm_squared() == 0.0 {
        return Err(QosError::InvalidArgument("zero candidate beamformer".into()));
    }
    let (n, users) = (channels.n(), channels.k());
    let mut lower = 0.0_f64;
    for k in 0..users {
        let g = channels.gain(i, i, k, w);
        if g == 0.0 {
            return Ok(None);
        }
        lower = lower.max(gamma * (it.received(i, k) + sigma2) / g);
    }
    let mut upper = f64::INFINITY;
    for j in (0..n).filter(|&j| j != i) {
        for k in 0..users {
            let g = channels.gain(i, j, k, w);
            if g > 0.0 {
                upper = upper.min(effective_cap(it.get(i, j, k), sigma2) / g);
            }
        }
    }
    Ok((lower <= upper * (1.0 + SCALING_TOL)).then_some(lower))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Extraction {
    Feasible { w: ComplexVector, power: f64, rank_one: bool },
    Failed,
}

impl Extraction {
    pub fn beamformer(&self) -> Option<&ComplexVector> {
        match self {
            Extraction::Feasible { w, .. } => Some(w),
            Extraction::Failed => None,
        }
    }
}

/// Rank-one vector or best scaled Gaussian randomization from a relaxed `W`.
///
/// In the rank-one case the principal eigenvector is rescaled with
/// [`scaling_alpha`] so that solver noise does not leave a row marginally
/// violated; if that rescaling is infeasible the randomization branch runs.
#[allow(clippy::too_many_arguments)]
pub fn extract_beamformer<R: Rng + ?Sized>(
    w_relaxed: &ComplexMatrix,
    i: usize,
    channels: &ChannelSet,
    gamma: f64,
    it: &ItVector,
    sigma2: f64,
    n_rand: usize,
    rng: &mut R,
) -> Result<Extraction, QosError> {
    if n_rand == 0 {
        return Err(QosError::InvalidArgument("need at least one randomization".into()));
    }
    let evd = numerics::hermitian_evd(w_relaxed)
        .map_err(|e| QosError::InvalidArgument(format!("relaxed solution: {e}")))?;
    let nt = w_relaxed.nrows();
    if evd.values.first().is_none_or(|&l| l <= 0.0) {
        return Ok(Extraction::Failed);
    }
    if numerics::numerical_rank(w_relaxed, RANK_ONE_TOL) == 1 {
        let u = evd.vectors.column(0).into_owned();
        if let Some(alpha) = scaling_alpha(&u, i, channels, gamma, it, sigma2)? {
            return Ok(Extraction::Feasible {
                w: u * num_complex::Complex64::new(alpha.sqrt(), 0.0),
                power: alpha,
                rank_one: true,
            });
        }
    }
    // U Σ^{1/2}
    let factor = ComplexMatrix::from_fn(nt, nt, |r, c| {
        evd.vectors[(r, c)] * evd.values[c].max(0.0).sqrt()
    });
    let mut best: Option<(ComplexVector, f64)> = None;
    for _ in 0..n_rand {
        let v = ComplexVector::from_fn(nt, |_, _| complex_gaussian(rng));
        let cand = &factor * v;
        if cand.norm_squared() == 0.0 {
            continue;
        }
        if let Some(alpha) = scaling_alpha(&cand, i, channels, gamma, it, sigma2)? {
            let power = alpha * cand.norm_squared();
            if best.as_ref().is_none_or(|(_, p)| power < *p) {
                best = Some((cand * num_complex::Complex64::new(alpha.sqrt(), 0.0), power));
            }
        }
    }
    Ok(match best {
        Some((w, power)) => Extraction::Feasible { w, power, rank_one: false },
        None => Extraction::Failed,
    })
}
