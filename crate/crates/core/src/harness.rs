//! Monte Carlo experiment runner: per-trial channel draws, every requested
//! algorithm at every sweep point, and CSV/JSON summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, FixedDirectionGains, MbdMethod};
use crate::channel::{self, derive_seed, generate_channels, linear_to_db, ChannelSet, NetworkConfig};
use crate::coordination::{self, QosOptions, RunStatus};
use crate::mms::{self, MmsOptions, PowerBudget};
use crate::numerics;
use crate::qos::{self, SolveStatus, RANK_ONE_TOL};

/// Placeholder for statistics over an empty subset.
pub const NOT_AVAILABLE: &str = "n/a";
pub const DEFAULT_TRIALS: usize = 200;
/// Target (dB) or budget (dB) held fixed while a correlation coefficient is swept.
pub const DEFAULT_FIXED_DB: f64 = 6.0;

// stream tags mixed into the per-trial seed
const TAG_PROPOSED: u64 = 1;
const TAG_MBD: u64 = 2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("no records to summarize")]
    EmptyRecords,
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureId {
    Convergence,
    QosGap,
    Feasibility,
    QosPower,
    MmsGap,
    MmsCompare,
    CorrFeasibility,
    CorrPower,
}

impl FigureId {
    /// Max-min SINR figures run under per-cell power budgets; the rest are QoS.
    pub fn is_mms(self) -> bool {
        matches!(self, FigureId::MmsGap | FigureId::MmsCompare)
    }

    pub fn default_parameter(self) -> SweepParameter {
        match self {
            FigureId::MmsGap | FigureId::MmsCompare => SweepParameter::PowerDb,
            FigureId::CorrFeasibility => SweepParameter::RInter,
            FigureId::CorrPower => SweepParameter::RIntra,
            _ => SweepParameter::GammaDb,
        }
    }

    fn keeps_trajectories(self) -> bool {
        matches!(self, FigureId::Convergence | FigureId::QosGap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Proposed,
    CentralizedBound,
    Mbd,
    Slnr,
    Stbc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Proposed,
        Algorithm::CentralizedBound,
        Algorithm::Mbd,
        Algorithm::Slnr,
        Algorithm::Stbc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Proposed => "proposed",
            Algorithm::CentralizedBound => "centralized_bound",
            Algorithm::Mbd => "mbd",
            Algorithm::Slnr => "slnr",
            Algorithm::Stbc => "stbc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    GammaDb,
    PowerDb,
    RInter,
    RIntra,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::GammaDb => "gamma_db",
            SweepParameter::PowerDb => "power_db",
            SweepParameter::RInter => "r_inter",
            SweepParameter::RIntra => "r_intra",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParameter::GammaDb => (0..=6).map(|v| 2.0 * v as f64).collect(),
            SweepParameter::PowerDb => (0..=4).map(|v| 5.0 * v as f64).collect(),
            SweepParameter::RInter | SweepParameter::RIntra => vec![0.0, 0.5, 0.7, 0.9],
        }
    }

    fn is_correlation(self) -> bool {
        matches!(self, SweepParameter::RInter | SweepParameter::RIntra)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_fixed_db() -> f64 {
    DEFAULT_FIXED_DB
}

fn default_max_iter() -> usize {
    coordination::DEFAULT_MAX_ITER
}

fn default_n_rand() -> usize {
    qos::DEFAULT_RANDOMIZATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub figure_id: FigureId,
    pub config: NetworkConfig,
    pub sweep: Sweep,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub master_seed: u64,
    /// SINR target or power budget in dB when the sweep is over a correlation coefficient.
    #[serde(default = "default_fixed_db")]
    pub fixed_db: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_n_rand")]
    pub n_rand: usize,
}

impl ExperimentSpec {
    /// Default grid and every algorithm.
    pub fn new(figure_id: FigureId, config: NetworkConfig) -> Self {
        let parameter = figure_id.default_parameter();
        Self {
            figure_id,
            config,
            sweep: Sweep {
                parameter,
                values: parameter.default_values(),
            },
            trials: DEFAULT_TRIALS,
            algorithms: default_algorithms(),
            master_seed: 0,
            fixed_db: DEFAULT_FIXED_DB,
            max_iter: coordination::DEFAULT_MAX_ITER,
            n_rand: qos::DEFAULT_RANDOMIZATIONS,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        self.config.validate()?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sweep.values.is_empty() {
            return bad("sweep must be nonempty".into());
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        let mut algs = self.algorithms.clone();
        algs.sort();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return bad("algorithms must be distinct".into());
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        let param = self.sweep.parameter;
        match (self.figure_id.is_mms(), param) {
            (true, SweepParameter::GammaDb) => return bad("max-min figures sweep power_db, not gamma_db".into()),
            (false, SweepParameter::PowerDb) => return bad("QoS figures sweep gamma_db, not power_db".into()),
            _ => {}
        }
        if param.is_correlation() && self.sweep.values.iter().any(|&r| !(0.0..1.0).contains(&r)) {
            return bad("correlation coefficients must lie in [0, 1)".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }

    /// Network at a sweep point for trial `t`.
    pub fn trial_config(&self, trial: usize, value: f64) -> NetworkConfig {
        let mut cfg = self.config.clone();
        cfg.seed = derive_seed(self.master_seed, trial as u64);
        match self.sweep.parameter {
            SweepParameter::RInter => cfg.r_inter = value,
            SweepParameter::RIntra => cfg.r_intra = value,
            _ => {}
        }
        cfg
    }

    /// SINR target (QoS) or per-cell budget (max-min) in dB at a sweep point.
    pub fn level_db(&self, value: f64) -> f64 {
        if self.sweep.parameter.is_correlation() {
            self.fixed_db
        } else {
            value
        }
    }
}

/// Outcome of one algorithm at one sweep point of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub trial: usize,
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub algorithm: Algorithm,
    pub feasible: bool,
    pub total_power: Option<f64>,
    pub min_sinr: Option<f64>,
    /// Relaxed objective: `P(Γ)` or the centralized optimum for QoS, `γ*` for max-min.
    pub relaxed_value: Option<f64>,
    pub iterations: usize,
    pub signaling_scalars: Option<usize>,
    pub rank_one: Vec<bool>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<f64>>,
}

impl ExperimentRecord {
    fn blank(trial: usize, sweep_index: usize, sweep_value: f64, algorithm: Algorithm) -> Self {
        Self {
            trial,
            sweep_index,
            sweep_value,
            algorithm,
            feasible: false,
            total_power: None,
            min_sinr: None,
            relaxed_value: None,
            iterations: 0,
            signaling_scalars: None,
            rank_one: Vec::new(),
            status: String::new(),
            trajectory: None,
        }
    }

    fn failed(mut self, status: impl Into<String>) -> Self {
        self.feasible = false;
        self.status = status.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub feasible: usize,
    pub feasibility_pct: f64,
    pub mean_power_db: Option<f64>,
    pub power_se_db: Option<f64>,
    pub mutual_trials: usize,
    pub mutual_power_db: Option<f64>,
    pub mean_min_sinr_db: Option<f64>,
    pub min_sinr_se_db: Option<f64>,
    pub mean_relaxed: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub mean_signaling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub figure_id: FigureId,
    pub sweep_parameter: SweepParameter,
    pub trials: usize,
    pub master_seed: u64,
    pub averaging: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
}

pub const AVERAGING_NOTE: &str = "powers and SINRs are averaged in linear units over the feasible trials and then \
converted to dB; mutual_power_db averages only trials feasible for every listed algorithm at that sweep point";

impl ExperimentOutput {
    pub fn metadata(&self) -> ExperimentMetadata {
        ExperimentMetadata {
            figure_id: self.spec.figure_id,
            sweep_parameter: self.spec.sweep.parameter,
            trials: self.spec.trials,
            master_seed: self.spec.master_seed,
            averaging: AVERAGING_NOTE.to_string(),
        }
    }

    pub fn summary_csv(&self) -> Result<String, HarnessError> {
        summary_csv(self.spec.sweep.parameter, &self.summary)
    }

    /// `summary.csv`, `records.json`, `metadata.json` and, for trajectory
    /// figures, `trajectories.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        fs::write(dir.join("records.json"), serde_json::to_string_pretty(&self.records)?)?;
        fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&self.metadata())?)?;
        if self.spec.figure_id.keeps_trajectories() {
            fs::write(dir.join("trajectories.csv"), trajectory_csv(&self.records))?;
        }
        Ok(())
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    spec.validate()?;
    // collect() on an indexed parallel iterator keeps trial order
    let per_trial: Vec<Vec<ExperimentRecord>> = (0..spec.trials).into_par_iter().map(|t| run_trial(spec, t)).collect();
    let records: Vec<ExperimentRecord> = per_trial.into_iter().flatten().collect();
    let summary = summarize(&records, &spec.algorithms)?;
    Ok(ExperimentOutput {
        spec: spec.clone(),
        records,
        summary,
    })
}

pub fn run_trial(spec: &ExperimentSpec, trial: usize) -> Vec<ExperimentRecord> {
    let mut out = Vec::with_capacity(spec.sweep.values.len() * spec.algorithms.len());
    let mut cached: Option<ChannelSet> = None;
    for (si, &value) in spec.sweep.values.iter().enumerate() {
        let cfg = spec.trial_config(trial, value);
        // channels only change with the correlation coefficients
        let channels = match &cached {
            Some(ch) if !spec.sweep.parameter.is_correlation() => Ok(ch.clone()),
            _ => generate_channels(&cfg),
        };
        let channels = match channels {
            Ok(ch) => ch,
            Err(e) => {
                for &alg in &spec.algorithms {
                    out.push(ExperimentRecord::blank(trial, si, value, alg).failed(format!("error: {e}")));
                }
                continue;
            }
        };
        for &alg in &spec.algorithms {
            let base = ExperimentRecord::blank(trial, si, value, alg);
            let seed = cfg.seed;
            let record = if spec.figure_id.is_mms() {
                run_mms_algorithm(spec, &channels, alg, spec.level_db(value), seed, base)
            } else {
                run_qos_algorithm(spec, &channels, alg, spec.level_db(value), seed, base)
            };
            out.push(record);
        }
        cached = Some(channels);
    }
    out
}

fn rank_one_flags(w: &[numerics::ComplexMatrix]) -> Vec<bool> {
    w.iter().map(|m| numerics::numerical_rank(m, RANK_ONE_TOL) == 1).collect()
}

fn fixed_gains(
    channels: &ChannelSet,
    alg: Algorithm,
    n_rand: usize,
    seed: u64,
) -> Result<FixedDirectionGains, baselines::BaselineError> {
    let sigma2 = channels.sigma2();
    Ok(match alg {
        Algorithm::Mbd => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_MBD));
            let dirs = baselines::mbd_directions(channels, MbdMethod::Sdr, n_rand, &mut rng)?;
            FixedDirectionGains::from_directions(channels, &dirs, sigma2)
        }
        Algorithm::Slnr => {
            let dirs = baselines::slnr_directions(channels, sigma2)?;
            FixedDirectionGains::from_directions(channels, &dirs, sigma2)
        }
        _ => FixedDirectionGains::isotropic(channels, sigma2),
    })
}

fn run_qos_algorithm(
    spec: &ExperimentSpec,
    channels: &ChannelSet,
    alg: Algorithm,
    gamma_db: f64,
    seed: u64,
    mut rec: ExperimentRecord,
) -> ExperimentRecord {
    let sigma2 = channels.sigma2();
    let gamma = vec![channel::db_to_linear(gamma_db); channels.n()];
    match alg {
        Algorithm::Proposed => {
            let options = QosOptions {
                max_iter: spec.max_iter,
                n_rand: spec.n_rand,
                seed: derive_seed(seed, TAG_PROPOSED),
                ..QosOptions::default()
            };
            let run = match coordination::run_decentralized_qos(channels, &gamma, sigma2, &options) {
                Ok(r) => r,
                Err(e) => return rec.failed(format!("error: {e}")),
            };
            let extracted = run.extraction.iter().all(|e| e.beamformer().is_some());
            let usable = matches!(run.status, RunStatus::Converged | RunStatus::MaxIterations);
            rec.iterations = run.iterations;
            rec.signaling_scalars = Some(run.signaling_scalars_total);
            rec.relaxed_value = run.relaxed_power;
            rec.rank_one = run.rank_one_flags.clone();
            if spec.figure_id.keeps_trajectories() {
                rec.trajectory = Some(run.relaxed_power_trajectory.clone());
            }
            rec.status = match (usable, extracted) {
                (false, _) => format!("{:?}", run.status).to_lowercase(),
                (true, false) => "extraction_failed".into(),
                (true, true) => format!("{:?}", run.status).to_lowercase(),
            };
            if usable && extracted {
                rec.feasible = true;
                rec.total_power = run.extracted_total_power;
                rec.min_sinr = Some(channel::min_sinr(channels, &run.beamformers, sigma2));
            }
            rec
        }
        Algorithm::CentralizedBound => match qos::solve_centralized_sdr(channels, &gamma, sigma2) {
            Ok(r) => {
                rec.iterations = 1;
                rec.status = format!("{:?}", r.status).to_lowercase();
                if r.status == SolveStatus::Optimal {
                    rec.feasible = true;
                    rec.total_power = Some(r.power);
                    rec.relaxed_value = Some(r.power);
                    rec.rank_one = rank_one_flags(&r.w);
                }
                rec
            }
            Err(e) => rec.failed(format!("error: {e}")),
        },
        Algorithm::Mbd | Algorithm::Slnr | Algorithm::Stbc => {
            let gains = match fixed_gains(channels, alg, spec.n_rand, seed) {
                Ok(g) => g,
                Err(baselines::BaselineError::NoNullSpace { .. }) => return rec.failed("no_null_space"),
                Err(e) => return rec.failed(format!("error: {e}")),
            };
            match baselines::qos_power_allocation(&gains, &gamma) {
                Ok(Some(p)) => {
                    let sinr = gains.sinr(&p);
                    rec.feasible = true;
                    rec.status = "optimal".into();
                    rec.total_power = Some(p.iter().sum());
                    rec.min_sinr = Some(sinr.iter().copied().fold(f64::INFINITY, f64::min));
                    rec
                }
                Ok(None) => rec.failed("infeasible"),
                Err(e) => rec.failed(format!("error: {e}")),
            }
        }
    }
}

fn run_mms_algorithm(
    spec: &ExperimentSpec,
    channels: &ChannelSet,
    alg: Algorithm,
    power_db: f64,
    seed: u64,
    mut rec: ExperimentRecord,
) -> ExperimentRecord {
    let sigma2 = channels.sigma2();
    let cap = channel::db_to_linear(power_db);
    let budget = match PowerBudget::uniform(channels.n(), cap) {
        Ok(b) => b,
        Err(e) => return rec.failed(format!("error: {e}")),
    };
    match alg {
        Algorithm::Proposed | Algorithm::CentralizedBound => {
            let options = MmsOptions {
                n_rand: spec.n_rand,
                seed: derive_seed(seed, TAG_PROPOSED),
                relaxed_only: alg == Algorithm::CentralizedBound,
                ..MmsOptions::default()
            };
            let run = match mms::mms_bisection(channels, &budget, sigma2, &options) {
                Ok(r) => r,
                Err(e) => return rec.failed(format!("error: {e}")),
            };
            rec.iterations = run.iterations;
            rec.relaxed_value = Some(run.gamma_star);
            rec.rank_one = rank_one_flags(&run.relaxed_w);
            if alg == Algorithm::CentralizedBound {
                rec.feasible = true;
                rec.status = "optimal".into();
                rec.min_sinr = Some(run.gamma_star);
                rec.total_power = Some(run.relaxed_w.iter().map(numerics::trace_re).sum());
            } else if run.extracted {
                rec.feasible = true;
                rec.status = if run.rank_one { "rank_one" } else { "randomized" }.into();
                rec.min_sinr = run.achieved_min_sinr;
                rec.total_power = Some(run.beamformers.total_power());
            } else {
                rec.status = "extraction_failed".into();
            }
            rec
        }
        Algorithm::Mbd | Algorithm::Slnr | Algorithm::Stbc => {
            let gains = match fixed_gains(channels, alg, spec.n_rand, seed) {
                Ok(g) => g,
                Err(baselines::BaselineError::NoNullSpace { .. }) => return rec.failed("no_null_space"),
                Err(e) => return rec.failed(format!("error: {e}")),
            };
            match baselines::mms_power_allocation(&gains, &budget.p) {
                Ok((t, p)) => {
                    rec.feasible = t > 0.0;
                    rec.status = "optimal".into();
                    rec.min_sinr = Some(t);
                    rec.total_power = Some(p.iter().sum());
                    rec
                }
                Err(e) => rec.failed(format!("error: {e}")),
            }
        }
    }
}

/// Sample mean and standard error.
fn mean_se(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some((mean, se))
}

/// Mean in dB of linear values, with the standard error carried through the
/// logarithm to first order.
fn mean_db(values: &[f64]) -> (Option<f64>, Option<f64>) {
    match mean_se(values) {
        Some((m, se)) if m > 0.0 => (Some(linear_to_db(m)), Some(10.0 / std::f64::consts::LN_10 * se / m)),
        _ => (None, None),
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    mean_se(&v).map(|(m, _)| m)
}

/// Per sweep point and algorithm statistics, in sweep then `algorithms` order.
/// Mutual-power averages use trials feasible for every algorithm in `algorithms`.
pub fn summarize(records: &[ExperimentRecord], algorithms: &[Algorithm]) -> Result<Vec<SummaryRow>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let mut points: Vec<(usize, f64)> = records.iter().map(|r| (r.sweep_index, r.sweep_value)).collect();
    points.sort_by_key(|p| p.0);
    points.dedup_by_key(|p| p.0);

    let mut rows = Vec::new();
    for &(si, value) in &points {
        let at_point: Vec<&ExperimentRecord> = records.iter().filter(|r| r.sweep_index == si).collect();
        let mut trials: Vec<usize> = at_point.iter().map(|r| r.trial).collect();
        trials.sort_unstable();
        trials.dedup();
        let mutual: Vec<usize> = trials
            .iter()
            .copied()
            .filter(|&t| {
                algorithms
                    .iter()
                    .all(|&a| at_point.iter().any(|r| r.trial == t && r.algorithm == a && r.feasible))
            })
            .collect();
        for &alg in algorithms {
            let mut recs: Vec<&ExperimentRecord> = at_point.iter().copied().filter(|r| r.algorithm == alg).collect();
            if recs.is_empty() {
                continue;
            }
            recs.sort_by_key(|r| r.trial);
            let feasible: Vec<&ExperimentRecord> = recs.iter().copied().filter(|r| r.feasible).collect();
            let powers: Vec<f64> = feasible.iter().filter_map(|r| r.total_power).collect();
            let sinrs: Vec<f64> = feasible.iter().filter_map(|r| r.min_sinr).collect();
            let mutual_powers: Vec<f64> = feasible
                .iter()
                .filter(|r| mutual.binary_search(&r.trial).is_ok())
                .filter_map(|r| r.total_power)
                .collect();
            let (mean_power_db, power_se_db) = mean_db(&powers);
            let (mean_min_sinr_db, min_sinr_se_db) = mean_db(&sinrs);
            rows.push(SummaryRow {
                sweep_value: value,
                algorithm: alg,
                trials: recs.len(),
                feasible: feasible.len(),
                feasibility_pct: 100.0 * feasible.len() as f64 / recs.len() as f64,
                mean_power_db,
                power_se_db,
                mutual_trials: mutual_powers.len(),
                mutual_power_db: mean_db(&mutual_powers).0,
                mean_min_sinr_db,
                min_sinr_se_db,
                mean_relaxed: mean_of(feasible.iter().filter_map(|r| r.relaxed_value)),
                mean_iterations: mean_of(feasible.iter().filter(|r| r.iterations > 0).map(|r| r.iterations as f64)),
                mean_signaling: mean_of(feasible.iter().filter_map(|r| r.signaling_scalars.map(|s| s as f64))),
            });
        }
    }
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        _ => NOT_AVAILABLE.to_string(),
    }
}

/// One row per sweep point per algorithm; missing statistics are `n/a`.
pub fn summary_csv(parameter: SweepParameter, rows: &[SummaryRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        parameter.name(),
        "algorithm",
        "trials",
        "feasible",
        "feasibility_pct",
        "mean_power_db",
        "power_se_db",
        "mutual_trials",
        "mutual_power_db",
        "mean_min_sinr_db",
        "min_sinr_se_db",
        "mean_relaxed",
        "mean_iterations",
        "mean_signaling",
    ])?;
    for r in rows {
        w.write_record([
            cell(Some(r.sweep_value)),
            r.algorithm.name().to_string(),
            r.trials.to_string(),
            r.feasible.to_string(),
            cell(Some(r.feasibility_pct)),
            cell(r.mean_power_db),
            cell(r.power_se_db),
            r.mutual_trials.to_string(),
            cell(r.mutual_power_db),
            cell(r.mean_min_sinr_db),
            cell(r.min_sinr_se_db),
            cell(r.mean_relaxed),
            cell(r.mean_iterations),
            cell(r.mean_signaling),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Mean relaxed power per iteration over the runs that kept a trajectory;
/// shorter runs contribute their last value.
pub fn trajectory_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from("sweep_value,iteration,runs,mean_power_db\n");
    let mut points: Vec<(usize, f64)> = records.iter().map(|r| (r.sweep_index, r.sweep_value)).collect();
    points.sort_by_key(|p| p.0);
    points.dedup_by_key(|p| p.0);
    for (si, value) in points {
        let trajs: Vec<&Vec<f64>> = records
            .iter()
            .filter(|r| r.sweep_index == si && r.feasible)
            .filter_map(|r| r.trajectory.as_ref())
            .filter(|t| !t.is_empty())
            .collect();
        let len = trajs.iter().map(|t| t.len()).max().unwrap_or(0);
        for n in 0..len {
            let vals: Vec<f64> = trajs.iter().map(|t| t[n.min(t.len() - 1)]).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let _ = writeln!(out, "{},{},{},{}", cell(Some(value)), n + 1, vals.len(), cell(Some(linear_to_db(m))));
        }
    }
    out
}

/// Mutual-feasible mean power gap `a - b` in dB at one sweep point.
pub fn mutual_power_gap_db(records: &[ExperimentRecord], sweep_index: usize, a: Algorithm, b: Algorithm) -> Option<f64> {
    let pick = |alg: Algorithm, t: usize| {
        records
            .iter()
            .find(|r| r.sweep_index == sweep_index && r.trial == t && r.algorithm == alg && r.feasible)
            .and_then(|r| r.total_power)
    };
    let mut trials: Vec<usize> = records.iter().filter(|r| r.sweep_index == sweep_index).map(|r| r.trial).collect();
    trials.sort_unstable();
    trials.dedup();
    let pairs: Vec<(f64, f64)> = trials.iter().filter_map(|&t| Some((pick(a, t)?, pick(b, t)?))).collect();
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let (sa, sb) = pairs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Some(linear_to_db(sa / n) - linear_to_db(sb / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: usize, alg: Algorithm, feasible: bool, power: Option<f64>) -> ExperimentRecord {
        let mut r = ExperimentRecord::blank(trial, 0, 10.0, alg);
        r.feasible = feasible;
        r.total_power = power;
        r.status = if feasible { "optimal" } else { "infeasible" }.into();
        r
    }

    #[test]
    fn single_record_db_conversion() {
        let rows = summarize(&[record(0, Algorithm::Mbd, true, Some(100.0))], &[Algorithm::Mbd]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].mean_power_db.unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(rows[0].power_se_db, Some(0.0));
    }

    #[test]
    fn half_feasible_is_fifty_percent() {
        let recs = [record(0, Algorithm::Mbd, true, Some(1.0)), record(1, Algorithm::Mbd, false, None)];
        let rows = summarize(&recs, &[Algorithm::Mbd]).unwrap();
        assert_eq!(rows[0].feasibility_pct, 50.0);
    }

    #[test]
    fn empty_subsets_print_not_available() {
        let recs = [record(0, Algorithm::Slnr, false, None)];
        let rows = summarize(&recs, &[Algorithm::Slnr]).unwrap();
        let csv = summary_csv(SweepParameter::GammaDb, &rows).unwrap();
        assert!(csv.contains(NOT_AVAILABLE));
        assert!(!csv.to_lowercase().contains("nan"));
        assert!(summarize(&[], &[Algorithm::Slnr]).is_err());
    }

    #[test]
    fn mutual_average_uses_common_trials() {
        let recs = [
            record(0, Algorithm::Proposed, true, Some(1.0)),
            record(0, Algorithm::Mbd, true, Some(2.0)),
            record(1, Algorithm::Proposed, true, Some(3.0)),
            record(1, Algorithm::Mbd, false, None),
        ];
        let rows = summarize(&recs, &[Algorithm::Proposed, Algorithm::Mbd]).unwrap();
        assert_eq!(rows[0].mutual_trials, 1);
        assert!((rows[0].mutual_power_db.unwrap() - 0.0).abs() < 1e-12);
        assert!((rows[0].mean_power_db.unwrap() - linear_to_db(2.0)).abs() < 1e-12);
        let gap = mutual_power_gap_db(&recs, 0, Algorithm::Mbd, Algorithm::Proposed).unwrap();
        assert!((gap - linear_to_db(2.0)).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(FigureId::QosPower, NetworkConfig::new(2, 2, 4));
        assert!(spec.validate().is_ok());
        spec.trials = 0;
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(FigureId::MmsCompare, NetworkConfig::new(2, 2, 4));
        spec.sweep.parameter = SweepParameter::GammaDb;
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(FigureId::Feasibility, NetworkConfig::new(2, 2, 4));
        spec.sweep.values.clear();
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(FigureId::CorrPower, NetworkConfig::new(2, 2, 4));
        spec.sweep.values = vec![1.0];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let text = r#"{"figure_id":"qos_power","config":{"N":2,"K":2,"Nt":4,"epsilon":0.5},
            "sweep":{"parameter":"gamma_db","values":[10]}}"#;
        let spec: ExperimentSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.trials, DEFAULT_TRIALS);
        assert_eq!(spec.algorithms.len(), 5);
        assert_eq!(spec.config.sigma2, 1.0);
    }

    #[test]
    fn small_experiment_covers_every_tuple_once() {
        let mut spec = ExperimentSpec::new(FigureId::QosPower, NetworkConfig::new(2, 2, 4));
        spec.trials = 2;
        spec.sweep.values = vec![0.0, 4.0];
        spec.max_iter = 20;
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.records.len(), 2 * 2 * 5);
        let mut keys: Vec<(usize, usize, Algorithm)> =
            out.records.iter().map(|r| (r.trial, r.sweep_index, r.algorithm)).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), out.records.len());
        for r in out.records.iter().filter(|r| r.algorithm == Algorithm::Proposed) {
            assert_eq!(r.signaling_scalars, Some(r.iterations * 2 * 2 * 2));
        }
        assert_eq!(out.summary.len(), 2 * 5);
    }

    #[test]
    fn correlation_sweeps_redraw_channels() {
        let spec = ExperimentSpec::new(FigureId::CorrFeasibility, NetworkConfig::new(2, 1, 2));
        let a = generate_channels(&spec.trial_config(3, 0.0)).unwrap();
        let b = generate_channels(&spec.trial_config(3, 0.9)).unwrap();
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(spec.level_db(0.9), DEFAULT_FIXED_DB);
    }
}
