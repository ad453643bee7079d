//! Decentralized QoS beamforming: per-cell agents exchange dual payloads over
//! a synchronous in-process bus and apply the same projected subgradient step
//! to their local copy of the IT vector.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{derive_seed, BeamformerSet, ChannelSet};
use crate::numerics::ComplexVector;
use crate::qos::{self, Extraction, ItVector, QosError, SolveStatus, SubproblemResult};

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_STOP_TOL: f64 = 1e-4;
/// Rounds spanned by the relative-change stopping test.
pub const STOP_WINDOW: usize = 5;
pub const DEFAULT_MAX_RECOVERIES: usize = 3;
/// Initial step `s` of the diminishing rule `s / sqrt(n)`.
pub const DEFAULT_STEP: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CoordinationError {
    #[error("zero subgradient passed to the master update")]
    ZeroSubgradient,
    #[error("subgradient length {got} does not match IT length {expected}")]
    Length { got: usize, expected: usize },
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("agents diverged at round {0}")]
    AgentMismatch(usize),
    #[error(transparent)]
    Qos(#[from] QosError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// `Γ' = max(Γ - μ g / ||g||, 0)`.
pub fn master_update(it: &ItVector, g: &[f64], mu: f64) -> Result<ItVector, CoordinationError> {
    if g.len() != it.len() {
        return Err(CoordinationError::Length {
            got: g.len(),
            expected: it.len(),
        });
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return Err(CoordinationError::ZeroSubgradient);
    }
    let values = it
        .values
        .iter()
        .zip(g)
        .map(|(v, gi)| (v - mu * gi / norm).max(0.0))
        .collect();
    Ok(ItVector {
        n: it.n,
        k: it.k,
        values,
    })
}

/// Diminishing step `s / sqrt(n)`, `n >= 1`.
pub fn step_size(n: usize, s: f64) -> f64 {
    s / (n.max(1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    /// `λ_{i,i,k}` for every `k`, then `λ_{i,j,k}` in IT order.
    Duals(Vec<f64>),
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub sender: usize,
    pub iteration: usize,
    pub payload: Payload,
}

impl AgentMessage {
    pub fn from_result(result: &SubproblemResult, iteration: usize, n: usize) -> Self {
        let payload = if result.is_optimal() {
            let mut p = result.sinr_duals.clone();
            for j in (0..n).filter(|&j| j != result.cell) {
                p.extend_from_slice(&result.cap_duals[j]);
            }
            Payload::Duals(p)
        } else {
            Payload::Infeasible
        };
        Self {
            sender: result.cell,
            iteration,
            payload,
        }
    }

    /// Scalars carried on the wire.
    pub fn scalars(&self) -> usize {
        match &self.payload {
            Payload::Duals(p) => p.len(),
            Payload::Infeasible => 0,
        }
    }

    /// Adds this sender's subgradient share into `g`.
    pub fn accumulate(&self, g: &mut [f64], n: usize, users: usize) -> Result<(), QosError> {
        let Payload::Duals(p) = &self.payload else {
            return Err(QosError::NotOptimal(self.sender));
        };
        let i = self.sender;
        let mut pos = users;
        for j in (0..n).filter(|&j| j != i) {
            for k in 0..users {
                g[qos::it_index(j, i, k, n, users)?] += p[k];
                g[qos::it_index(i, j, k, n, users)?] -= p[pos];
                pos += 1;
            }
        }
        Ok(())
    }

    /// Sender's relaxed power recovered from its multipliers by strong duality:
    /// `sum_k λ_{i,i,k} (sum_{j != i} Γ_{j,i,k} + σ²) - sum_{j,k} λ_{i,j,k} Γ_{i,j,k}`.
    pub fn implied_power(&self, it: &ItVector, sigma2: f64) -> Option<f64> {
        let Payload::Duals(p) = &self.payload else {
            return None;
        };
        let (i, n, users) = (self.sender, it.n, it.k);
        let mut total: f64 = (0..users).map(|k| p[k] * (it.received(i, k) + sigma2)).sum();
        let mut pos = users;
        for j in (0..n).filter(|&j| j != i) {
            for k in 0..users {
                total -= p[pos] * qos::effective_cap(it.get(i, j, k), sigma2);
                pos += 1;
            }
        }
        Some(total)
    }
}

/// Synchronous broadcast bus: everything published in a round reaches every agent.
#[derive(Debug, Default)]
pub struct MessageBus {
    pending: Vec<AgentMessage>,
    pub messages_sent: usize,
    pub scalars_sent: usize,
    shuffle: Option<ChaCha8Rng>,
}

impl MessageBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bus delivering each round in a random order.
    pub fn shuffled(seed: u64) -> Self {
        Self {
            shuffle: Some(ChaCha8Rng::seed_from_u64(seed)),
            ..Self::default()
        }
    }

    pub fn publish(&mut self, msg: AgentMessage) {
        self.pending.push(msg);
    }

    /// Round barrier: hands out the round's messages and counts them.
    pub fn deliver(&mut self) -> Vec<AgentMessage> {
        let mut out = std::mem::take(&mut self.pending);
        if let Some(rng) = self.shuffle.as_mut() {
            out.shuffle(rng);
        }
        self.messages_sent += out.len();
        self.scalars_sent += out.iter().map(AgentMessage::scalars).sum::<usize>();
        out
    }
}

/// One agent's view of the protocol.
///
/// Besides the current IT vector each agent remembers the round with the
/// smallest network power implied by the payloads; every agent computes the
/// same value, so they agree on it without extra messages.
#[derive(Debug, Clone)]
pub struct Agent {
    pub cell: usize,
    pub it: ItVector,
    pub sigma2: f64,
    pub best: Option<BestRound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestRound {
    pub round: usize,
    pub implied_power: f64,
    pub it: ItVector,
}

impl Agent {
    pub fn new(cell: usize, it: ItVector, sigma2: f64) -> Self {
        Self {
            cell,
            it,
            sigma2,
            best: None,
        }
    }

    /// Reduces a round's messages in sender order, records the round if it is
    /// the best so far and steps the local IT copy. Returns `||g||`.
    pub fn apply_round(&mut self, inbox: &[AgentMessage], round: usize, mu: f64) -> Result<f64, CoordinationError> {
        let (n, users) = (self.it.n, self.it.k);
        let mut sorted: Vec<&AgentMessage> = inbox.iter().collect();
        sorted.sort_by_key(|m| m.sender);
        let mut g = vec![0.0; self.it.len()];
        let mut implied = 0.0;
        for m in sorted {
            m.accumulate(&mut g, n, users)?;
            implied += m.implied_power(&self.it, self.sigma2).ok_or(QosError::NotOptimal(m.sender))?;
        }
        if self.best.as_ref().is_none_or(|b| implied < b.implied_power) {
            self.best = Some(BestRound {
                round,
                implied_power: implied,
                it: self.it.clone(),
            });
        }
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            self.it = master_update(&self.it, &g, mu)?;
        }
        Ok(norm)
    }

    /// Recovery after an infeasibility flag from `cell`: double that cell's caps.
    pub fn recover(&mut self, cell: usize) {
        for j in (0..self.it.n).filter(|&j| j != cell) {
            for k in 0..self.it.k {
                let v = self.it.get(cell, j, k);
                self.it.set(cell, j, k, 2.0 * v);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct QosOptions {
    /// Starting IT vector; all entries `initial_it` when `None`.
    pub gamma0: Option<ItVector>,
    pub initial_it: f64,
    pub step: f64,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub n_rand: usize,
    pub seed: u64,
    pub max_recoveries: usize,
    /// Deliver each round's messages in a seeded random order.
    pub shuffle_delivery: Option<u64>,
    /// Skip the final beamformer extraction.
    pub relaxed_only: bool,
}

impl Default for QosOptions {
    fn default() -> Self {
        Self {
            gamma0: None,
            initial_it: 1.0,
            step: DEFAULT_STEP,
            max_iter: DEFAULT_MAX_ITER,
            stop_tol: DEFAULT_STOP_TOL,
            n_rand: qos::DEFAULT_RANDOMIZATIONS,
            seed: 0,
            max_recoveries: DEFAULT_MAX_RECOVERIES,
            shuffle_delivery: None,
            relaxed_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub n: usize,
    pub power: f64,
    pub g_norm: f64,
    pub mu: f64,
    pub signaling_scalars: usize,
}

#[derive(Debug, Clone)]
pub struct QosRunResult {
    pub status: RunStatus,
    pub beamformers: BeamformerSet,
    pub extraction: Vec<Extraction>,
    /// `P(Γ)` at every round.
    pub relaxed_power_trajectory: Vec<f64>,
    /// `P(Γ)` at the best round, which is the one extracted from.
    pub relaxed_power: Option<f64>,
    pub best_iteration: usize,
    pub final_it: ItVector,
    pub rank_one_flags: Vec<bool>,
    pub extracted_total_power: Option<f64>,
    pub signaling_scalars_total: usize,
    pub iterations: usize,
    /// Infeasibility recoveries applied over the run.
    pub recoveries: usize,
    pub log: Vec<RoundRecord>,
}

impl QosRunResult {
    /// Smallest relaxed power seen over the run.
    pub fn best_relaxed_power(&self) -> Option<f64> {
        self.relaxed_power_trajectory.iter().copied().reduce(f64::min)
    }

    pub fn write_log(&self, path: impl AsRef<Path>) -> Result<(), CoordinationError> {
        write_jsonl(path, &self.log)
    }
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<(), CoordinationError> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn solve_round(
    channels: &ChannelSet,
    gamma: &[f64],
    agents: &[Agent],
    sigma2: f64,
) -> Result<Vec<SubproblemResult>, QosError> {
    agents
        .par_iter()
        .map(|a| qos::solve_subproblem(a.cell, channels, gamma[a.cell], &a.it, sigma2))
        .collect()
}

/// True once the last [`STOP_WINDOW`] powers spread by at most `tol` relative.
/// An oscillating trajectory keeps a wide spread, so it never stops on a
/// coincidental pair of equal values.
pub fn window_converged(trajectory: &[f64], tol: f64) -> bool {
    if trajectory.len() < STOP_WINDOW {
        return false;
    }
    let tail = &trajectory[trajectory.len() - STOP_WINDOW..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo <= tol * lo.abs()
}

/// Runs the decentralized protocol and extracts one beamformer per cell.
pub fn run_decentralized_qos(
    channels: &ChannelSet,
    gamma: &[f64],
    sigma2: f64,
    options: &QosOptions,
) -> Result<QosRunResult, CoordinationError> {
    let (n, users) = (channels.n(), channels.k());
    if gamma.len() != n {
        return Err(CoordinationError::InvalidOption(format!(
            "expected {n} SINR targets, got {}",
            gamma.len()
        )));
    }
    if gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(CoordinationError::InvalidOption("SINR targets must be positive".into()));
    }
    if !(options.step > 0.0) || options.max_iter == 0 {
        return Err(CoordinationError::InvalidOption("step must be positive and max_iter nonzero".into()));
    }
    let start = match &options.gamma0 {
        Some(it) if it.n != n || it.k != users => {
            return Err(CoordinationError::InvalidOption("initial IT vector does not match the network".into()))
        }
        Some(it) => it.clone(),
        None => ItVector::filled(n, users, options.initial_it),
    };
    let mut agents: Vec<Agent> = (0..n).map(|cell| Agent::new(cell, start.clone(), sigma2)).collect();
    let mut bus = match options.shuffle_delivery {
        Some(seed) => MessageBus::shuffled(seed),
        None => MessageBus::new(),
    };

    let mut trajectory = Vec::new();
    let mut log = Vec::new();
    let mut recoveries = 0;
    let mut status = RunStatus::MaxIterations;
    let mut best: Option<(usize, f64, Vec<SubproblemResult>)> = None;

    'rounds: for round in 1..=options.max_iter {
        let mut attempts = 0;
        let results = loop {
            let results = solve_round(channels, gamma, &agents, sigma2)?;
            let failed: Vec<&SubproblemResult> = results.iter().filter(|r| !r.is_optimal()).collect();
            if failed.is_empty() {
                break results;
            }
            if failed.iter().any(|r| r.status == SolveStatus::NumericalFailure) && attempts >= options.max_recoveries {
                status = RunStatus::NumericalFailure;
                break 'rounds;
            }
            if attempts >= options.max_recoveries {
                status = RunStatus::Infeasible;
                break 'rounds;
            }
            // infeasibility flags go out and every agent applies the same fix
            let flagged: Vec<usize> = failed.iter().map(|r| r.cell).collect();
            for agent in &mut agents {
                for &cell in &flagged {
                    agent.recover(cell);
                }
            }
            attempts += 1;
            recoveries += 1;
        };

        let power: f64 = results.iter().map(|r| r.power).sum();
        trajectory.push(power);
        for r in &results {
            bus.publish(AgentMessage::from_result(r, round, n));
        }
        let inbox = bus.deliver();
        let mu = step_size(round, options.step);
        let mut norms = Vec::with_capacity(n);
        for agent in &mut agents {
            norms.push(agent.apply_round(&inbox, round, mu)?);
        }
        let bits = |a: &Agent| a.it.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if agents.iter().any(|a| bits(a) != bits(&agents[0]) || a.best != agents[0].best) {
            return Err(CoordinationError::AgentMismatch(round));
        }
        log.push(RoundRecord {
            n: round,
            power,
            g_norm: norms[0],
            mu,
            signaling_scalars: bus.scalars_sent,
        });
        if agents[0].best.as_ref().is_some_and(|b| b.round == round) {
            best = Some((round, power, results));
        }

        if norms[0] <= 1e-12 {
            status = RunStatus::Converged;
            break;
        }
        if window_converged(&trajectory, options.stop_tol) {
            status = RunStatus::Converged;
            break;
        }
    }

    let iterations = trajectory.len();
    let (best_iteration, relaxed_power, results) = match best {
        Some((round, power, results)) => (round, Some(power), results),
        None => (0, None, Vec::new()),
    };
    let final_it = match &agents[0].best {
        Some(b) => b.it.clone(),
        None => agents[0].it.clone(),
    };
    let nt = channels.nt();
    let mut extraction = vec![Extraction::Failed; n];
    if matches!(status, RunStatus::Converged | RunStatus::MaxIterations) && !options.relaxed_only {
        extraction = results
            .par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, r.cell as u64));
                qos::extract_beamformer(&r.w, r.cell, channels, gamma[r.cell], &final_it, sigma2, options.n_rand, &mut rng)
            })
            .collect::<Result<_, _>>()?;
    }
    let rank_one_flags = extraction
        .iter()
        .map(|e| matches!(e, Extraction::Feasible { rank_one: true, .. }))
        .collect();
    let beamformers = BeamformerSet::new(
        extraction
            .iter()
            .map(|e| e.beamformer().cloned().unwrap_or_else(|| ComplexVector::zeros(nt)))
            .collect(),
    );
    let extracted_total_power = (!options.relaxed_only && extraction.iter().all(|e| e.beamformer().is_some()))
        .then(|| {
            extraction
                .iter()
                .map(|e| match e {
                    Extraction::Feasible { power, .. } => *power,
                    Extraction::Failed => 0.0,
                })
                .sum()
        });

    Ok(QosRunResult {
        status,
        beamformers,
        extraction,
        relaxed_power_trajectory: trajectory,
        relaxed_power,
        best_iteration,
        final_it,
        rank_one_flags,
        extracted_total_power,
        signaling_scalars_total: bus.scalars_sent,
        iterations,
        recoveries,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{db_to_linear, generate_channels, min_sinr, NetworkConfig};

    fn it(values: Vec<f64>) -> ItVector {
        let n = if values.len() == 2 { 2 } else { 3 };
        let k = values.len() / (n * (n - 1));
        ItVector::from_values(n, k, values).unwrap()
    }

    #[test]
    fn master_update_examples() {
        let start = ItVector { n: 2, k: 2, values: vec![1.0, 0.2, 0.0, 3.0] };
        let out = master_update(&start, &[3.0, 0.0, 0.0, 4.0], 0.5).unwrap();
        let expected = [0.7, 0.2, 0.0, 2.6];
        for (a, b) in out.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let out = master_update(&it(vec![0.1, 1.0]), &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(out.values, vec![0.0, 1.0]);
        let start = it(vec![0.4, 0.9]);
        assert_eq!(master_update(&start, &[1.0, -2.0], 0.0).unwrap(), start);
        assert!(matches!(master_update(&start, &[0.0, 0.0], 1.0), Err(CoordinationError::ZeroSubgradient)));
        assert!(master_update(&start, &[1.0], 1.0).is_err());
    }

    #[test]
    fn window_needs_a_flat_tail() {
        assert!(!window_converged(&[1.0, 1.0, 1.0, 1.0], 1e-4));
        assert!(window_converged(&[3.0, 1.0, 1.0, 1.00005, 1.0, 1.0], 1e-4));
        // equal endpoints but oscillating inside
        assert!(!window_converged(&[1.0, 1.1, 1.0, 1.1, 1.0], 1e-4));
    }

    #[test]
    fn step_size_examples() {
        assert_eq!(step_size(1, 1.0), 1.0);
        assert_eq!(step_size(4, 1.0), 0.5);
        assert!((step_size(100, 2.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn payload_round_trips_subgradient() {
        let ch = generate_channels(&NetworkConfig::new(3, 2, 4).with_seed(3)).unwrap();
        let start = ItVector::filled(3, 2, 0.7);
        for i in 0..3 {
            let r = qos::solve_subproblem(i, &ch, 1.5, &start, 1.0).unwrap();
            let msg = AgentMessage::from_result(&r, 1, 3);
            assert_eq!(msg.scalars(), 3 * 2);
            let mut g = vec![0.0; start.len()];
            msg.accumulate(&mut g, 3, 2).unwrap();
            assert_eq!(g, qos::subgradient_from_duals(&r, 3, 2).unwrap());
        }
    }

    #[test]
    fn converges_to_centralized_bound() {
        let ch = generate_channels(&NetworkConfig::new(2, 2, 4).with_seed(2024)).unwrap();
        let gamma = vec![db_to_linear(6.0); 2];
        let central = qos::solve_centralized_sdr(&ch, &gamma, 1.0).unwrap();
        let run = run_decentralized_qos(&ch, &gamma, 1.0, &QosOptions::default()).unwrap();
        assert!(matches!(run.status, RunStatus::Converged | RunStatus::MaxIterations));
        let fin = run.relaxed_power.unwrap();
        assert!(fin >= central.power - 1e-6);
        assert!((fin - central.power) / central.power <= 5e-3, "{fin} vs {}", central.power);
        assert_eq!(run.relaxed_power_trajectory.len(), run.iterations);
        assert_eq!(run.signaling_scalars_total, run.iterations * 4 * 2);
        let best = run.best_relaxed_power().unwrap();
        assert!((fin - best).abs() <= DEFAULT_STOP_TOL * fin);
        assert_eq!(run.relaxed_power_trajectory[run.best_iteration - 1], fin);
        if let Some(p) = run.extracted_total_power {
            assert!(p >= fin - 1e-6);
            let sinr = min_sinr(&ch, &run.beamformers, 1.0);
            assert!(sinr >= gamma[0] * (1.0 - 1e-6), "{sinr}");
        }
    }

    #[test]
    fn signaling_counts_every_round() {
        let ch = generate_channels(&NetworkConfig::new(3, 2, 6).with_seed(7)).unwrap();
        let options = QosOptions {
            max_iter: 50,
            stop_tol: 0.0,
            relaxed_only: true,
            ..QosOptions::default()
        };
        let run = run_decentralized_qos(&ch, &[2.0; 3], 1.0, &options).unwrap();
        assert_eq!(run.iterations, 50);
        assert_eq!(run.signaling_scalars_total, 900);
        assert_eq!(run.log.len(), 50);
        assert_eq!(run.log.last().unwrap().signaling_scalars, 900);
    }

    #[test]
    fn single_cell_stops_after_one_round() {
        let ch = generate_channels(&NetworkConfig::new(1, 2, 3).with_seed(4)).unwrap();
        let run = run_decentralized_qos(&ch, &[2.0], 1.0, &QosOptions::default()).unwrap();
        assert_eq!(run.status, RunStatus::Converged);
        assert_eq!(run.iterations, 1);
        // the lone agent still broadcasts its K multipliers once
        assert_eq!(run.signaling_scalars_total, 2);
        let single = qos::solve_subproblem(0, &ch, 2.0, &ItVector::filled(1, 2, 0.0), 1.0).unwrap();
        assert!((run.relaxed_power.unwrap() - single.power).abs() < 1e-9);
    }

    #[test]
    fn shuffled_delivery_is_bit_identical() {
        let ch = generate_channels(&NetworkConfig::new(3, 1, 3).with_seed(9)).unwrap();
        let base = QosOptions {
            max_iter: 15,
            relaxed_only: true,
            ..QosOptions::default()
        };
        let a = run_decentralized_qos(&ch, &[1.5; 3], 1.0, &base).unwrap();
        let shuffled = QosOptions {
            shuffle_delivery: Some(99),
            ..base
        };
        let b = run_decentralized_qos(&ch, &[1.5; 3], 1.0, &shuffled).unwrap();
        assert_eq!(a.final_it, b.final_it);
        let bits = |r: &QosRunResult| r.relaxed_power_trajectory.iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn infeasible_round_recovers_by_doubling_caps() {
        let ch = generate_channels(&NetworkConfig::new(2, 1, 2).with_seed(12)).unwrap();
        let options = QosOptions {
            initial_it: 1e-4,
            max_iter: 20,
            relaxed_only: true,
            ..QosOptions::default()
        };
        let mut agent = Agent::new(0, ItVector::filled(2, 1, 0.25), 1.0);
        agent.recover(0);
        assert_eq!(agent.it.get(0, 1, 0), 0.5);
        assert_eq!(agent.it.get(1, 0, 0), 0.25);
        let run = run_decentralized_qos(&ch, &[3.0; 2], 1.0, &options).unwrap();
        assert!(matches!(run.status, RunStatus::Infeasible | RunStatus::Converged | RunStatus::MaxIterations));
        if run.status != RunStatus::Infeasible {
            assert!(run.recoveries == 0 || run.final_it.values.iter().any(|&v| v > 1e-4));
        }
    }

    #[test]
    fn persistent_infeasibility_is_reported() {
        // every user sees the same channel from every base station, so no
        // target above the necessary bound 1 can be met
        let mut ch = generate_channels(&NetworkConfig::new(2, 1, 2).with_seed(13)).unwrap();
        for src in 0..2 {
            let row = ch.h(src, 0, 0).clone();
            *ch.h_mut(src, 1, 0) = row;
        }
        let options = QosOptions {
            max_iter: 300,
            ..QosOptions::default()
        };
        let run = run_decentralized_qos(&ch, &[1.5; 2], 1.0, &options).unwrap();
        assert!(run.extracted_total_power.is_none() || run.status == RunStatus::Infeasible);
        assert!(run.status != RunStatus::Converged || run.extracted_total_power.is_none());
    }

    #[test]
    fn jsonl_log_has_one_line_per_round() {
        let ch = generate_channels(&NetworkConfig::new(2, 1, 2).with_seed(5)).unwrap();
        let options = QosOptions {
            max_iter: 8,
            stop_tol: 0.0,
            relaxed_only: true,
            ..QosOptions::default()
        };
        let run = run_decentralized_qos(&ch, &[1.0; 2], 1.0, &options).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        run.write_log(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<RoundRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows.len(), run.iterations);
        assert_eq!(rows[0].n, 1);
        assert_eq!(rows[0].mu, DEFAULT_STEP);
    }
}
