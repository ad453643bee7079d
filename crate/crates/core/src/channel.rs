//! Network configuration, channel realizations and the SINR metric.
//!
//! Indices are zero-based in code: `h(i, j, k)` is the channel from base
//! station `i` to user `k` of cell `j`, stored as the column whose conjugate
//! transpose multiplies the beamformer.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, ComplexMatrix, ComplexVector};
use crate::serde_complex;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("correlation ratio {0} outside [0, 1)")]
    InvalidCorrelation(f64),
    #[error("user index {k} out of range (K = {users})")]
    UserOutOfRange { k: usize, users: usize },
    #[error("channel data does not match config: {0}")]
    Shape(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn default_sigma2() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "Nt")]
    pub nt: usize,
    pub epsilon: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub r_intra: f64,
    #[serde(default)]
    pub r_inter: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NetworkConfig {
    /// `N-K-Nt` network with epsilon 0.5, unit noise and no correlation.
    pub fn new(n: usize, k: usize, nt: usize) -> Self {
        Self {
            n,
            k,
            nt,
            epsilon: 0.5,
            sigma2: 1.0,
            r_intra: 0.0,
            r_inter: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.n == 0 || self.k == 0 || self.nt == 0 {
            return Err(ChannelError::InvalidConfig(format!(
                "N, K and Nt must be positive (got {}-{}-{})",
                self.n, self.k, self.nt
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ChannelError::InvalidConfig(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(ChannelError::InvalidConfig(format!("sigma2 {} must be positive", self.sigma2)));
        }
        for r in [self.r_intra, self.r_inter] {
            if !(0.0..1.0).contains(&r) {
                return Err(ChannelError::InvalidCorrelation(r));
            }
        }
        Ok(())
    }

    /// Length of the interference-temperature vector, `N(N-1)K`.
    pub fn it_len(&self) -> usize {
        self.n * self.n.saturating_sub(1) * self.k
    }

    /// Short `N-K-Nt` label.
    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.n, self.k, self.nt)
    }
}

/// Channels `h[i][j][k]` for every (source cell, destination cell, user).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub config: NetworkConfig,
    h: Vec<Vec<Vec<ComplexVector>>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    config: NetworkConfig,
    h: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

impl ChannelSet {
    /// Builds a set from nested `h[i][j][k]` vectors, checking every dimension.
    pub fn from_nested(config: NetworkConfig, h: Vec<Vec<Vec<ComplexVector>>>) -> Result<Self, ChannelError> {
        config.validate()?;
        let ok = h.len() == config.n
            && h.iter().all(|hi| {
                hi.len() == config.n
                    && hi
                        .iter()
                        .all(|hij| hij.len() == config.k && hij.iter().all(|v| v.len() == config.nt))
            });
        if !ok {
            return Err(ChannelError::Shape(format!("expected {} nested arrays", config.label())));
        }
        if h.iter().flatten().flatten().flat_map(|v| v.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(ChannelError::Shape("non-finite channel entry".into()));
        }
        Ok(Self { config, h })
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn nt(&self) -> usize {
        self.config.nt
    }

    pub fn sigma2(&self) -> f64 {
        self.config.sigma2
    }

    /// Channel from base station `i` to user `k` of cell `j`.
    pub fn h(&self, i: usize, j: usize, k: usize) -> &ComplexVector {
        &self.h[i][j][k]
    }

    pub fn h_mut(&mut self, i: usize, j: usize, k: usize) -> &mut ComplexVector {
        &mut self.h[i][j][k]
    }

    /// `h h^H` for the `(i, j, k)` link.
    pub fn gram(&self, i: usize, j: usize, k: usize) -> ComplexMatrix {
        numerics::outer(self.h(i, j, k))
    }

    /// `|h^H w|^2` for the `(i, j, k)` link.
    pub fn gain(&self, i: usize, j: usize, k: usize, w: &ComplexVector) -> f64 {
        self.h(i, j, k).dotc(w).norm_sqr()
    }

    pub fn to_json(&self) -> String {
        let file = ChannelFile {
            config: self.config.clone(),
            h: self
                .h
                .iter()
                .map(|hi| {
                    hi.iter()
                        .map(|hij| hij.iter().map(serde_complex::vector_to_pairs).collect())
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("channel set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ChannelError> {
        let file: ChannelFile = serde_json::from_str(text)?;
        let h = file
            .h
            .into_iter()
            .map(|hi| {
                hi.into_iter()
                    .map(|hij| hij.into_iter().map(serde_complex::vector_from_pairs).collect())
                    .collect()
            })
            .collect();
        Self::from_nested(file.config, h)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), ChannelError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, ChannelError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// One beamformer per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    #[serde(with = "serde_complex::vector_vec")]
    pub w: Vec<ComplexVector>,
}

impl BeamformerSet {
    pub fn new(w: Vec<ComplexVector>) -> Self {
        Self { w }
    }

    pub fn zeros(n: usize, nt: usize) -> Self {
        Self {
            w: vec![ComplexVector::zeros(nt); n],
        }
    }

    /// Per-cell transmit power `||w_i||^2`.
    pub fn powers(&self) -> Vec<f64> {
        self.w.iter().map(|w| w.norm_squared()).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.powers().iter().sum()
    }
}

/// Real symmetric Toeplitz matrix `[C]_{ij} = r^{|i-j|}`.
pub fn correlation_matrix(r: f64, n: usize) -> Result<ComplexMatrix, ChannelError> {
    if !(0.0..1.0).contains(&r) {
        return Err(ChannelError::InvalidCorrelation(r));
    }
    Ok(ComplexMatrix::from_fn(n, n, |a, b| {
        Complex64::new(r.powi(a.abs_diff(b) as i32), 0.0)
    }))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: `splitmix64(splitmix64(master) ^ t)`.
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(master) ^ trial)
}

/// Circularly symmetric unit-variance complex Gaussian.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Draws one realization.
///
/// For each source `i` the `N*K` rows `h^H_{i,j,k}` (row index `j*K + k`) are
/// drawn i.i.d. `CN(0, 1)` and mixed by `C(r_inter, N)^{1/2} (x) C(r_intra, K)^{1/2}`,
/// so users of one cell are correlated through `r_intra` and the `k`-th users
/// of different cells through `r_inter`. Rows with `j != i` are then scaled by
/// `epsilon`.
pub fn generate_channels(config: &NetworkConfig) -> Result<ChannelSet, ChannelError> {
    config.validate()?;
    let (n, k, nt) = (config.n, config.k, config.nt);
    let inter = numerics::psd_sqrt(&correlation_matrix(config.r_inter, n)?).expect("Toeplitz correlation is PSD");
    let intra = numerics::psd_sqrt(&correlation_matrix(config.r_intra, k)?).expect("Toeplitz correlation is PSD");
    let mix = inter.kronecker(&intra);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut h = Vec::with_capacity(n);
    for i in 0..n {
        // rows are h^H, so draw conj(h) and conjugate at the end
        let mut g = ComplexMatrix::zeros(n * k, nt);
        for r in 0..n * k {
            for a in 0..nt {
                g[(r, a)] = complex_gaussian(&mut rng);
            }
        }
        let rows = if config.r_inter == 0.0 && config.r_intra == 0.0 { g } else { &mix * g };
        let hi = (0..n)
            .map(|j| {
                let scale = if j == i { 1.0 } else { config.epsilon };
                (0..k)
                    .map(|kk| {
                        let row = rows.row(j * k + kk);
                        ComplexVector::from_iterator(nt, row.iter().map(|z| z.conj() * scale))
                    })
                    .collect()
            })
            .collect();
        h.push(hi);
    }
    ChannelSet::from_nested(config.clone(), h)
}

/// `SINR_{i,k} = |h^H_{i,i,k} w_i|^2 / (sum_{j != i} |h^H_{j,i,k} w_j|^2 + sigma2)`.
pub fn sinr(channels: &ChannelSet, beams: &BeamformerSet, sigma2: f64) -> DMatrix<f64> {
    let (n, k) = (channels.n(), channels.k());
    DMatrix::from_fn(n, k, |i, kk| {
        let signal = channels.gain(i, i, kk, &beams.w[i]);
        let interference: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| channels.gain(j, i, kk, &beams.w[j]))
            .sum();
        signal / (interference + sigma2)
    })
}

/// Smallest entry of [`sinr`].
pub fn min_sinr(channels: &ChannelSet, beams: &BeamformerSet, sigma2: f64) -> f64 {
    sinr(channels, beams, sigma2).min()
}

/// `N x (N*Nt)` matrix whose row `i` is `[h^H_{1,i,k} ... h^H_{N,i,k}]`.
pub fn stack_hk(channels: &ChannelSet, k: usize) -> Result<ComplexMatrix, ChannelError> {
    if k >= channels.k() {
        return Err(ChannelError::UserOutOfRange { k, users: channels.k() });
    }
    let (n, nt) = (channels.n(), channels.nt());
    Ok(ComplexMatrix::from_fn(n, n * nt, |i, c| channels.h(c / nt, i, k)[c % nt].conj()))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::numerical_rank;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn vec2(a: Complex64, b: Complex64) -> ComplexVector {
        ComplexVector::from_vec(vec![a, b])
    }

    /// Channels for an `N-1-2` network from a closure.
    fn manual(n: usize, f: impl Fn(usize, usize) -> ComplexVector) -> ChannelSet {
        let config = NetworkConfig::new(n, 1, 2);
        let h = (0..n).map(|i| (0..n).map(|j| vec![f(i, j)]).collect()).collect();
        ChannelSet::from_nested(config, h).unwrap()
    }

    #[test]
    fn correlation_matrix_examples() {
        let id = correlation_matrix(0.0, 3).unwrap();
        assert_eq!(id, ComplexMatrix::identity(3, 3));
        let m = correlation_matrix(0.5, 3).unwrap();
        let expected = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        for (a, row) in expected.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                assert_eq!(m[(a, b)], c(*v, 0.0));
            }
        }
        let evd = numerics::hermitian_evd(&correlation_matrix(0.9, 8).unwrap()).unwrap();
        assert!(*evd.values.last().unwrap() > 0.0);
        assert!(matches!(correlation_matrix(1.0, 2), Err(ChannelError::InvalidCorrelation(_))));
        assert!(correlation_matrix(-0.1, 2).is_err());
    }

    #[test]
    fn entry_moments() {
        let mut intra = 0.0;
        let mut inter = 0.0;
        let (mut n_intra, mut n_inter) = (0usize, 0usize);
        let base = NetworkConfig::new(2, 4, 8);
        let mut t = 0;
        while n_intra < 100_000 {
            let ch = generate_channels(&base.clone().with_seed(derive_seed(5, t))).unwrap();
            t += 1;
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..4 {
                        let e: f64 = ch.h(i, j, k).iter().map(|z| z.norm_sqr()).sum();
                        if i == j {
                            intra += e;
                            n_intra += 8;
                        } else {
                            inter += e;
                            n_inter += 8;
                        }
                    }
                }
            }
        }
        assert!((intra / n_intra as f64 - 1.0).abs() < 0.02);
        assert!((inter / n_inter as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn intracell_correlation_matches_ratio() {
        let mut config = NetworkConfig::new(1, 2, 4);
        config.r_intra = 0.7;
        let mut acc = 0.0;
        let mut count = 0;
        let mut t = 0;
        while count < 100_000 {
            config.seed = derive_seed(9, t);
            t += 1;
            let ch = generate_channels(&config).unwrap();
            for a in 0..4 {
                acc += (ch.h(0, 0, 0)[a] * ch.h(0, 0, 1)[a].conj()).re;
                count += 1;
            }
        }
        assert!((acc / count as f64 - 0.7).abs() < 0.03);
    }

    #[test]
    fn intercell_correlation_links_same_user_index() {
        let mut config = NetworkConfig::new(2, 1, 4);
        config.r_inter = 0.9;
        let mut acc = 0.0;
        let mut count = 0;
        for t in 0..5000 {
            config.seed = t;
            let ch = generate_channels(&config).unwrap();
            for a in 0..4 {
                // h_{0,0,0} (unit variance) and h_{0,1,0} (variance eps^2)
                acc += (ch.h(0, 0, 0)[a] * ch.h(0, 1, 0)[a].conj()).re;
                count += 1;
            }
        }
        assert!((acc / count as f64 - 0.9 * 0.5).abs() < 0.03);
    }

    #[test]
    fn generation_is_deterministic() {
        let config = NetworkConfig::new(3, 2, 4).with_seed(11);
        let a = generate_channels(&config).unwrap();
        let b = generate_channels(&config).unwrap();
        assert_eq!(a, b);
        let other = generate_channels(&config.clone().with_seed(12)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut config = NetworkConfig::new(2, 2, 3).with_seed(3);
        config.r_intra = 0.5;
        let ch = generate_channels(&config).unwrap();
        let back = ChannelSet::from_json(&ch.to_json()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for (x, y) in ch.h(i, j, k).iter().zip(back.h(i, j, k).iter()) {
                        assert_eq!(x.re.to_bits(), y.re.to_bits());
                        assert_eq!(x.im.to_bits(), y.im.to_bits());
                    }
                }
            }
        }
        assert_eq!(back.config, config);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ch.json");
        ch.write_json(&path).unwrap();
        assert_eq!(ChannelSet::read_json(&path).unwrap(), ch);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: NetworkConfig = serde_json::from_str(r#"{"N":2,"K":2,"Nt":4,"epsilon":0.5}"#).unwrap();
        assert_eq!(cfg.sigma2, 1.0);
        assert_eq!(cfg.seed, 0);
        let mut bad = cfg.clone();
        bad.epsilon = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.n = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sinr_examples() {
        let ch = manual(1, |_, _| vec2(c(2.0, 0.0), c(0.0, 0.0)));
        let beams = BeamformerSet::new(vec![vec2(c(1.0, 0.0), c(0.0, 0.0))]);
        assert_eq!(sinr(&ch, &beams, 1.0)[(0, 0)], 4.0);

        let ch = manual(2, |i, j| match (i, j) {
            (0, 0) => vec2(c(1.0, 0.0), c(0.0, 0.0)),
            (1, 0) => vec2(c(0.0, 0.0), c(1.0, 0.0)),
            _ => vec2(c(1.0, 0.0), c(1.0, 0.0)),
        });
        let beams = BeamformerSet::new(vec![vec2(c(1.0, 0.0), c(0.0, 0.0)), vec2(c(0.0, 0.0), c(1.0, 0.0))]);
        assert_eq!(sinr(&ch, &beams, 1.0)[(0, 0)], 0.5);

        let ch = manual(1, |_, _| vec2(c(1.0, 0.0), c(0.0, 0.0)));
        let beams = BeamformerSet::new(vec![vec2(c(0.0, 0.0), c(3.0, 1.0))]);
        assert_eq!(sinr(&ch, &beams, 1.0)[(0, 0)], 0.0);
    }

    #[test]
    fn sinr_phase_invariance_and_noise_bound() {
        let ch = generate_channels(&NetworkConfig::new(3, 2, 4).with_seed(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w: Vec<ComplexVector> = (0..3).map(|_| ComplexVector::from_fn(4, |_, _| complex_gaussian(&mut rng))).collect();
        let beams = BeamformerSet::new(w.clone());
        let base = sinr(&ch, &beams, 1.0);
        let mut rotated = w;
        rotated[1] *= Complex64::from_polar(1.0, 0.7);
        let turned = sinr(&ch, &BeamformerSet::new(rotated), 1.0);
        assert!((&base - &turned).amax() <= 1e-12 * base.amax());
        for i in 0..3 {
            for k in 0..2 {
                assert!(base[(i, k)] <= ch.gain(i, i, k, &beams.w[i]) / 1.0);
            }
        }
    }

    #[test]
    fn stack_hk_layout() {
        let ch = generate_channels(&NetworkConfig::new(1, 1, 3).with_seed(4)).unwrap();
        let s = stack_hk(&ch, 0).unwrap();
        assert_eq!(s.shape(), (1, 3));
        assert_eq!(s.row(0).transpose(), ch.h(0, 0, 0).map(|z| z.conj()));

        let ch = generate_channels(&NetworkConfig::new(2, 2, 2).with_seed(5)).unwrap();
        let s = stack_hk(&ch, 1).unwrap();
        assert_eq!(s.shape(), (2, 4));
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..2 {
                    assert_eq!(s[(i, j * 2 + a)], ch.h(j, i, 1)[a].conj());
                }
            }
        }
        assert!(matches!(stack_hk(&ch, 2), Err(ChannelError::UserOutOfRange { .. })));
    }

    #[test]
    fn duplicated_intercell_users_give_rank_one() {
        let mut ch = generate_channels(&NetworkConfig::new(2, 1, 2).with_seed(6)).unwrap();
        for src in 0..2 {
            let row = ch.h(src, 0, 0).clone();
            *ch.h_mut(src, 1, 0) = row;
        }
        assert_eq!(numerical_rank(&stack_hk(&ch, 0).unwrap(), numerics::DEFAULT_RANK_TOL), 1);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|t| derive_seed(42, t)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
    }
}
