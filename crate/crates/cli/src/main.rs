use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mcbf_core::baselines::{self, FixedDirectionGains, MbdMethod};
use mcbf_core::channel::{self, db_to_linear, derive_seed, linear_to_db, BeamformerSet, ChannelSet, NetworkConfig};
use mcbf_core::coordination::{self, QosOptions, RunStatus};
use mcbf_core::harness::{self, ExperimentSpec};
use mcbf_core::mms::{self, BisectionStep, MmsOptions, PowerBudget};
use mcbf_core::numerics;
use mcbf_core::qos::{self, Extraction, SolveStatus, RANK_ONE_TOL};

#[derive(Parser)]
#[command(name = "mcbf", version, about = "Coordinated multicell multicast beamforming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a channel realization from a network config.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimize total power subject to a common SINR target.
    Qos {
        #[arg(long)]
        channels: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        gamma_db: f64,
        #[arg(long, value_enum, default_value_t = Mode::Decentralized)]
        mode: Mode,
        /// Per-round JSONL log (decentralized mode).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = coordination::DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = coordination::DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximize the minimum SINR under per-base-station power caps.
    Mms {
        #[arg(long)]
        channels: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        power_db: f64,
        #[arg(long, default_value_t = mms::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixed-direction comparison schemes.
    #[command(group(ArgGroup::new("target").required(true).args(["gamma_db", "power_db"])))]
    Baseline {
        #[arg(long, value_enum)]
        alg: BaselineAlg,
        #[arg(long)]
        channels: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        gamma_db: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        power_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo experiment from a JSON spec.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Decentralized,
    Centralized,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BaselineAlg {
    Mbd,
    Slnr,
    Stbc,
}

/// How a solved instance maps to the process exit code.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Outcome {
    Success,
    Infeasible,
    NumericalFailure,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Infeasible => 2,
            Outcome::NumericalFailure => 3,
        }
    }
}

#[derive(Serialize)]
struct QosReport {
    mode: &'static str,
    status: String,
    gamma_db: f64,
    relaxed_power: Option<f64>,
    total_power: Option<f64>,
    total_power_db: Option<f64>,
    min_sinr_db: Option<f64>,
    rank_one: Vec<bool>,
    iterations: usize,
    signaling_scalars: Option<usize>,
    beamformers: Option<BeamformerSet>,
}

#[derive(Serialize)]
struct MmsReport {
    status: String,
    power_db: f64,
    gamma_star: f64,
    gamma_star_db: f64,
    gamma_upper: f64,
    achieved_min_sinr_db: Option<f64>,
    rank_one: bool,
    iterations: usize,
    bisection_trace: Vec<BisectionStep>,
    beamformers: Option<BeamformerSet>,
}

#[derive(Serialize)]
struct BaselineReport {
    algorithm: BaselineAlg,
    status: String,
    gamma_db: Option<f64>,
    power_db: Option<f64>,
    powers: Option<Vec<f64>>,
    total_power_db: Option<f64>,
    min_sinr_db: Option<f64>,
    beamformers: Option<BeamformerSet>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_channels(path: &Path) -> Result<ChannelSet> {
    ChannelSet::read_json(path).with_context(|| format!("reading channels from {}", path.display()))
}

fn db(x: f64) -> Option<f64> {
    (x > 0.0 && x.is_finite()).then(|| linear_to_db(x))
}

fn gen(config: &Path, out: &Path) -> Result<Outcome> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg: NetworkConfig = serde_json::from_str(&text).context("parsing network config")?;
    let ch = channel::generate_channels(&cfg)?;
    ch.write_json(out)?;
    Ok(Outcome::Success)
}

fn qos_decentralized(ch: &ChannelSet, gamma_db: f64, options: &QosOptions, log: Option<&Path>) -> Result<(QosReport, Outcome)> {
    let sigma2 = ch.sigma2();
    let gamma = vec![db_to_linear(gamma_db); ch.n()];
    let run = coordination::run_decentralized_qos(ch, &gamma, sigma2, options)?;
    if let Some(path) = log {
        run.write_log(path)?;
    }
    let extracted = run.extracted_total_power.is_some();
    let outcome = match run.status {
        RunStatus::Infeasible => Outcome::Infeasible,
        RunStatus::NumericalFailure => Outcome::NumericalFailure,
        _ if !extracted => Outcome::Infeasible,
        _ => Outcome::Success,
    };
    let report = QosReport {
        mode: "decentralized",
        status: if outcome == Outcome::Infeasible && run.status != RunStatus::Infeasible {
            "extraction_failed".into()
        } else {
            format!("{:?}", run.status).to_lowercase()
        },
        gamma_db,
        relaxed_power: run.relaxed_power,
        total_power: run.extracted_total_power,
        total_power_db: run.extracted_total_power.and_then(db),
        min_sinr_db: extracted.then(|| linear_to_db(channel::min_sinr(ch, &run.beamformers, sigma2))),
        rank_one: run.rank_one_flags.clone(),
        iterations: run.iterations,
        signaling_scalars: Some(run.signaling_scalars_total),
        beamformers: extracted.then(|| run.beamformers.clone()),
    };
    Ok((report, outcome))
}

fn qos_centralized(ch: &ChannelSet, gamma_db: f64, seed: u64) -> Result<(QosReport, Outcome)> {
    let sigma2 = ch.sigma2();
    let target = db_to_linear(gamma_db);
    let gamma = vec![target; ch.n()];
    let central = qos::solve_centralized_sdr(ch, &gamma, sigma2)?;
    let mut report = QosReport {
        mode: "centralized",
        status: format!("{:?}", central.status).to_lowercase(),
        gamma_db,
        relaxed_power: None,
        total_power: None,
        total_power_db: None,
        min_sinr_db: None,
        rank_one: Vec::new(),
        iterations: 1,
        signaling_scalars: None,
        beamformers: None,
    };
    match central.status {
        SolveStatus::Infeasible => return Ok((report, Outcome::Infeasible)),
        SolveStatus::NumericalFailure => return Ok((report, Outcome::NumericalFailure)),
        SolveStatus::Optimal => {}
    }
    report.relaxed_power = Some(central.power);
    report.rank_one = central.w.iter().map(|w| numerics::numerical_rank(w, RANK_ONE_TOL) == 1).collect();
    // the relaxed solution fixes consistent interference caps for per-cell extraction
    let it = qos::it_from_relaxed(ch, &central.w);
    let mut beams = Vec::with_capacity(ch.n());
    for (i, w) in central.w.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        match qos::extract_beamformer(w, i, ch, target, &it, sigma2, qos::DEFAULT_RANDOMIZATIONS, &mut rng)? {
            Extraction::Feasible { w, .. } => beams.push(w),
            Extraction::Failed => {
                report.status = "extraction_failed".into();
                return Ok((report, Outcome::Infeasible));
            }
        }
    }
    let beams = BeamformerSet::new(beams);
    report.total_power = Some(beams.total_power());
    report.total_power_db = db(beams.total_power());
    report.min_sinr_db = Some(linear_to_db(channel::min_sinr(ch, &beams, sigma2)));
    report.beamformers = Some(beams);
    Ok((report, Outcome::Success))
}

fn run_mms(ch: &ChannelSet, power_db: f64, options: &MmsOptions, out: &Path) -> Result<Outcome> {
    let budget = PowerBudget::uniform(ch.n(), db_to_linear(power_db))?;
    let run = mms::mms_bisection(ch, &budget, ch.sigma2(), options)?;
    let outcome = if run.extracted {
        Outcome::Success
    } else {
        Outcome::Infeasible
    };
    let report = MmsReport {
        status: if run.extracted { "ok" } else { "extraction_failed" }.into(),
        power_db,
        gamma_star: run.gamma_star,
        gamma_star_db: linear_to_db(run.gamma_star),
        gamma_upper: run.gamma_upper,
        achieved_min_sinr_db: run.achieved_min_sinr.and_then(db),
        rank_one: run.rank_one,
        iterations: run.iterations,
        bisection_trace: run.bisection_trace,
        beamformers: run.extracted.then_some(run.beamformers),
    };
    write_json(out, &report)?;
    Ok(outcome)
}

fn run_baseline(
    ch: &ChannelSet,
    alg: BaselineAlg,
    gamma_db: Option<f64>,
    power_db: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<Outcome> {
    let sigma2 = ch.sigma2();
    let mut report = BaselineReport {
        algorithm: alg,
        status: String::new(),
        gamma_db,
        power_db,
        powers: None,
        total_power_db: None,
        min_sinr_db: None,
        beamformers: None,
    };
    let dirs = match alg {
        BaselineAlg::Mbd => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match baselines::mbd_directions(ch, MbdMethod::Sdr, qos::DEFAULT_RANDOMIZATIONS, &mut rng) {
                Ok(d) => Some(d),
                Err(baselines::BaselineError::NoNullSpace { .. }) => {
                    report.status = "no_null_space".into();
                    write_json(out, &report)?;
                    return Ok(Outcome::Infeasible);
                }
                Err(e) => return Err(e.into()),
            }
        }
        BaselineAlg::Slnr => Some(baselines::slnr_directions(ch, sigma2)?),
        BaselineAlg::Stbc => None,
    };
    let gains = match &dirs {
        Some(d) => FixedDirectionGains::from_directions(ch, d, sigma2),
        None => FixedDirectionGains::isotropic(ch, sigma2),
    };
    let powers = match (gamma_db, power_db) {
        (Some(g), None) => baselines::qos_power_allocation(&gains, &vec![db_to_linear(g); ch.n()])?,
        (None, Some(p)) => Some(baselines::mms_power_allocation(&gains, &vec![db_to_linear(p); ch.n()])?.1),
        _ => bail!("exactly one of --gamma-db and --power-db is required"),
    };
    let outcome = match powers {
        Some(p) => {
            let worst = gains.sinr(&p).iter().copied().fold(f64::INFINITY, f64::min);
            report.status = "ok".into();
            report.total_power_db = db(p.iter().sum());
            report.min_sinr_db = db(worst);
            report.beamformers = dirs.map(|d| BeamformerSet::new(baselines::scale_directions(&d, &p)));
            report.powers = Some(p);
            Outcome::Success
        }
        None => {
            report.status = "infeasible".into();
            Outcome::Infeasible
        }
    };
    write_json(out, &report)?;
    Ok(outcome)
}

fn experiment(spec_path: &Path, out_dir: &Path, threads: Option<usize>) -> Result<Outcome> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: ExperimentSpec = serde_json::from_str(&text).context("parsing experiment spec")?;
    let output = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(|| harness::run_experiment(&spec))?,
        None => harness::run_experiment(&spec)?,
    };
    output.write(out_dir)?;
    Ok(Outcome::Success)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Gen { config, out } => gen(&config, &out),
        Command::Qos {
            channels,
            gamma_db,
            mode,
            log,
            max_iter,
            step,
            seed,
            out,
        } => {
            let ch = read_channels(&channels)?;
            let (report, outcome) = match mode {
                Mode::Decentralized => {
                    let options = QosOptions {
                        max_iter,
                        step,
                        seed,
                        ..QosOptions::default()
                    };
                    qos_decentralized(&ch, gamma_db, &options, log.as_deref())?
                }
                Mode::Centralized => qos_centralized(&ch, gamma_db, seed)?,
            };
            write_json(&out, &report)?;
            Ok(outcome)
        }
        Command::Mms {
            channels,
            power_db,
            tol,
            seed,
            out,
        } => {
            let ch = read_channels(&channels)?;
            let options = MmsOptions {
                tol,
                seed,
                ..MmsOptions::default()
            };
            run_mms(&ch, power_db, &options, &out)
        }
        Command::Baseline {
            alg,
            channels,
            gamma_db,
            power_db,
            seed,
            out,
        } => {
            let ch = read_channels(&channels)?;
            run_baseline(&ch, alg, gamma_db, power_db, seed, &out)
        }
        Command::Experiment { spec, out_dir, threads } => experiment(&spec, &out_dir, threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(outcome) => {
            if outcome != Outcome::Success {
                eprintln!("mcbf: {outcome:?}");
            }
            ExitCode::from(outcome.code())
        }
        Err(e) => {
            eprintln!("mcbf: {e:#}");
            ExitCode::from(1)
        }
    }
}
