//! Comparison schemes: multicell block diagonalization (M-BD), layered SLNR
//! and open-loop STBC, plus the power allocation they reduce to once the
//! beam directions are fixed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{complex_gaussian, ChannelSet};
use crate::numerics::{self, ComplexMatrix, ComplexVector, NumericsError};
use crate::sdp::{self, SdpError, SdpProblem, Sense};

/// Any power above this marks the fixed point as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
pub const MAX_FIXED_POINT_ITER: usize = 10_000;
/// Relative change at which the fixed point is considered converged.
pub const FIXED_POINT_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("cell {cell}: no null space for block diagonalization (Nt = {nt}, interfering users = {others})")]
    NoNullSpace { cell: usize, nt: usize, others: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// How M-BD picks a direction inside the null space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MbdMethod {
    /// Single-cell multicast relaxation in the projected space plus randomization.
    #[default]
    Sdr,
    /// Principal eigenvector of the projected intracell covariance.
    Eigen,
}

/// Orthonormal basis of `{w : h^H_{i,j,k} w = 0, j != i}`.
pub fn null_space_basis(channels: &ChannelSet, i: usize) -> ComplexMatrix {
    let (n, users, nt) = (channels.n(), channels.k(), channels.nt());
    let rows: Vec<&ComplexVector> = (0..n)
        .filter(|&j| j != i)
        .flat_map(|j| (0..users).map(move |k| channels.h(i, j, k)))
        .collect();
    if rows.is_empty() {
        return ComplexMatrix::identity(nt, nt);
    }
    // pad to square so the SVD returns a full right basis
    let dim = nt.max(rows.len());
    let stacked = ComplexMatrix::from_fn(dim, nt, |r, c| if r < rows.len() { rows[r][c].conj() } else { Complex64::new(0.0, 0.0) });
    let rank = numerics::numerical_rank(&stacked, numerics::DEFAULT_RANK_TOL);
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let null: Vec<usize> = order[rank..].to_vec();
    ComplexMatrix::from_fn(nt, null.len(), |r, c| v_t[(null[c], r)].conj())
}

/// Unit-norm M-BD directions, one per cell.
pub fn mbd_directions<R: Rng + ?Sized>(
    channels: &ChannelSet,
    method: MbdMethod,
    n_rand: usize,
    rng: &mut R,
) -> Result<Vec<ComplexVector>, BaselineError> {
    let (n, users, nt) = (channels.n(), channels.k(), channels.nt());
    (0..n)
        .map(|i| {
            let basis = null_space_basis(channels, i);
            let d = basis.ncols();
            if d == 0 {
                return Err(BaselineError::NoNullSpace {
                    cell: i,
                    nt,
                    others: (n - 1) * users,
                });
            }
            // effective channels in null-space coordinates
            let g: Vec<ComplexVector> = (0..users).map(|k| basis.adjoint() * channels.h(i, i, k)).collect();
            let b = if d == 1 {
                ComplexVector::from_element(1, Complex64::new(1.0, 0.0))
            } else {
                match method {
                    MbdMethod::Eigen => {
                        let cov = g.iter().fold(ComplexMatrix::zeros(d, d), |acc, v| acc + numerics::outer(v));
                        numerics::hermitian_evd(&cov)?.vectors.column(0).into_owned()
                    }
                    MbdMethod::Sdr => multicast_direction(&g, n_rand, rng)?,
                }
            };
            let w = &basis * b;
            Ok(numerics::normalize_phase(&w.unscale(w.norm())))
        })
        .collect()
}

/// Unit vector approximately maximizing `min_k |g_k^H b|^2` via
/// `min Tr{X}` s.t. `g_k^H X g_k >= 1` and Gaussian randomization.
fn multicast_direction<R: Rng + ?Sized>(
    g: &[ComplexVector],
    n_rand: usize,
    rng: &mut R,
) -> Result<ComplexVector, BaselineError> {
    let d = g[0].len();
    let worst = |b: &ComplexVector| g.iter().map(|gk| gk.dotc(b).norm_sqr()).fold(f64::INFINITY, f64::min) / b.norm_squared();
    let mut p = SdpProblem::new(vec![d]);
    p.set_objective(0, ComplexMatrix::identity(d, d));
    let scale = g.iter().map(|v| v.norm_squared()).fold(0.0, f64::max);
    for gk in g {
        p.add_constraint(vec![(0, numerics::outer(gk))], Sense::Ge, scale);
    }
    let sol = sdp::solve_sdp(&p)?;
    let fallback = || -> Result<ComplexVector, BaselineError> {
        let cov = g.iter().fold(ComplexMatrix::zeros(d, d), |acc, v| acc + numerics::outer(v));
        Ok(numerics::hermitian_evd(&cov)?.vectors.column(0).into_owned())
    };
    if !sol.is_optimal() {
        return fallback();
    }
    let x = numerics::hermitian_part(&sol.blocks[0]);
    let evd = numerics::hermitian_evd(&x)?;
    let mut best = evd.vectors.column(0).into_owned();
    let mut best_val = worst(&best);
    if numerics::numerical_rank(&x, crate::qos::RANK_ONE_TOL) > 1 {
        let factor = ComplexMatrix::from_fn(d, d, |r, c| evd.vectors[(r, c)] * evd.values[c].max(0.0).sqrt());
        for _ in 0..n_rand {
            let cand = &factor * ComplexVector::from_fn(d, |_, _| complex_gaussian(rng));
            if cand.norm_squared() == 0.0 {
                continue;
            }
            let val = worst(&cand);
            if val > best_val {
                best_val = val;
                best = cand;
            }
        }
    }
    Ok(best)
}

/// Unit-norm L-SLNR directions: principal generalized eigenvector of
/// `(sum_l h_{i,i,l} h^H_{i,i,l}, sum_{j != i, l} h_{i,j,l} h^H_{i,j,l} + σ² I)`.
pub fn slnr_directions(channels: &ChannelSet, sigma2: f64) -> Result<Vec<ComplexVector>, BaselineError> {
    (0..channels.n())
        .map(|i| {
            let (s, a) = slnr_matrices(channels, i, sigma2);
            Ok(numerics::max_generalized_eigvec(&s, &a)?.0)
        })
        .collect()
}

/// Signal and leakage-plus-noise matrices of cell `i`.
pub fn slnr_matrices(channels: &ChannelSet, i: usize, sigma2: f64) -> (ComplexMatrix, ComplexMatrix) {
    let (n, users, nt) = (channels.n(), channels.k(), channels.nt());
    let mut s = ComplexMatrix::zeros(nt, nt);
    let mut a = ComplexMatrix::identity(nt, nt) * Complex64::new(sigma2, 0.0);
    for k in 0..users {
        s += channels.gram(i, i, k);
        for j in (0..n).filter(|&j| j != i) {
            a += channels.gram(i, j, k);
        }
    }
    (s, a)
}

/// Link gains `G[i][j][k]` of fixed transmit directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedDirectionGains {
    pub g: Vec<Vec<Vec<f64>>>,
    pub sigma2: f64,
}

impl FixedDirectionGains {
    /// `|h^H_{i,j,k} w_i|^2` for unit-norm directions `w_i`.
    pub fn from_directions(channels: &ChannelSet, dirs: &[ComplexVector], sigma2: f64) -> Self {
        let (n, users) = (channels.n(), channels.k());
        let g = (0..n)
            .map(|i| (0..n).map(|j| (0..users).map(|k| channels.gain(i, j, k, &dirs[i])).collect()).collect())
            .collect();
        Self { g, sigma2 }
    }

    /// Isotropic transmission: `||h_{i,j,k}||^2 / Nt` per unit of power.
    pub fn isotropic(channels: &ChannelSet, sigma2: f64) -> Self {
        let (n, users, nt) = (channels.n(), channels.k(), channels.nt() as f64);
        let g = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..users).map(|k| channels.h(i, j, k).norm_squared() / nt).collect())
                    .collect()
            })
            .collect();
        Self { g, sigma2 }
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn k(&self) -> usize {
        self.g.first().and_then(|gi| gi.first()).map_or(0, Vec::len)
    }

    /// SINR of every user for transmit powers `p`.
    pub fn sinr(&self, p: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, self.k(), |i, k| {
            let interference: f64 = (0..n).filter(|&j| j != i).map(|j| p[j] * self.g[j][i][k]).sum();
            p[i] * self.g[i][i][k] / (interference + self.sigma2)
        })
    }

    /// One step of `p_i <- max_k γ_i (sum_{j != i} p_j G[j][i][k] + σ²) / G[i][i][k]`.
    pub fn interference_map(&self, gamma: &[f64], p: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                (0..self.k())
                    .map(|k| {
                        let interference: f64 = (0..n).filter(|&j| j != i).map(|j| p[j] * self.g[j][i][k]).sum();
                        gamma[i] * (interference + self.sigma2) / self.g[i][i][k]
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// Minimal powers meeting every target, or `None` when the fixed point diverges.
pub fn qos_power_allocation(gains: &FixedDirectionGains, gamma: &[f64]) -> Result<Option<Vec<f64>>, BaselineError> {
    Ok(qos_power_trajectory(gains, gamma)?.map(|mut t| t.pop().expect("nonempty trajectory")))
}

/// Every iterate of the fixed point from `p = 0`.
pub fn qos_power_trajectory(gains: &FixedDirectionGains, gamma: &[f64]) -> Result<Option<Vec<Vec<f64>>>, BaselineError> {
    let n = gains.n();
    if gamma.len() != n {
        return Err(BaselineError::InvalidArgument(format!("expected {n} targets, got {}", gamma.len())));
    }
    if gamma.iter().any(|&g| !(g > 0.0)) {
        return Err(BaselineError::InvalidArgument("SINR targets must be positive".into()));
    }
    if gains.g.iter().enumerate().any(|(i, gi)| gi[i].iter().any(|&d| d <= 0.0)) {
        return Ok(None);
    }
    let mut p = vec![0.0; n];
    let mut traj = vec![p.clone()];
    for _ in 0..MAX_FIXED_POINT_ITER {
        let next = gains.interference_map(gamma, &p);
        if next.iter().any(|&v| v > DIVERGENCE_LIMIT || !v.is_finite()) {
            return Ok(None);
        }
        let change = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs() / a.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        p = next;
        traj.push(p.clone());
        if change <= FIXED_POINT_TOL {
            return Ok(Some(traj));
        }
    }
    Ok(None)
}

/// Fixed-direction max-min SINR under per-cell caps: bisection on the common
/// target with [`qos_power_allocation`] as the feasibility oracle.
pub fn mms_power_allocation(gains: &FixedDirectionGains, caps: &[f64]) -> Result<(f64, Vec<f64>), BaselineError> {
    let n = gains.n();
    if caps.len() != n || caps.iter().any(|&c| !(c > 0.0)) {
        return Err(BaselineError::InvalidArgument("caps must be positive, one per cell".into()));
    }
    // no cell can beat its interference-free full-power SINR
    let mut hi = (0..n)
        .flat_map(|i| (0..gains.k()).map(move |k| (i, k)))
        .map(|(i, k)| caps[i] * gains.g[i][i][k] / gains.sigma2)
        .fold(f64::INFINITY, f64::min);
    if !(hi > 0.0) {
        return Ok((0.0, vec![0.0; n]));
    }
    let fits = |gamma: f64| -> Result<Option<Vec<f64>>, BaselineError> {
        Ok(qos_power_allocation(gains, &vec![gamma; n])?
            .filter(|p| p.iter().zip(caps).all(|(pi, ci)| *pi <= ci * (1.0 + 1e-12))))
    };
    if let Some(p) = fits(hi)? {
        return Ok((hi, p));
    }
    let mut lo = 0.0;
    let mut best = vec![0.0; n];
    for _ in 0..200 {
        if hi - lo <= 1e-10 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match fits(mid)? {
            Some(p) => {
                lo = mid;
                best = p;
            }
            None => hi = mid,
        }
    }
    Ok((lo, best))
}

/// SINR of isotropic transmission with per-cell powers.
pub fn stbc_sinr(channels: &ChannelSet, powers: &[f64], sigma2: f64) -> DMatrix<f64> {
    FixedDirectionGains::isotropic(channels, sigma2).sinr(powers)
}

/// Beamformers `sqrt(p_i) w_i` from directions and powers.
pub fn scale_directions(dirs: &[ComplexVector], powers: &[f64]) -> Vec<ComplexVector> {
    dirs.iter()
        .zip(powers)
        .map(|(w, p)| w * Complex64::new(p.sqrt(), 0.0))
        .collect()
}
