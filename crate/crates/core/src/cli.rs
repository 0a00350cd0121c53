//! Command-line front end: `simulate`, `fit`, `train-baseline`, `eval`,
//! `dist`, `bench`, `rewards-check` and `pipeline`.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuator::{coeffs_from_json, coeffs_to_json, ActuatorCoeffs, ModelError};
use crate::config::{ConfigError, RunConfig};
use crate::control::{mode_contrast, ControlError, ModeContrast};
use crate::log::{parse_trajectory_csv, LogError, TrajectoryLog};
use crate::metrics::{
    bench_latency, quadrant_stats, table3_report, thresholded_metrics, AnalyticPredictor, LatencyStats, MetricsError,
    QuadrantStats, Table3, TorquePredictor,
};
use crate::nn::{
    dataset_from_log, read_weights, select_lr, train, write_weights, Arch, Baseline, LrTrial, NetParams, NnError,
    BASELINE_DIMS,
};
use crate::oracle::{synthesize_log, OracleError};
use crate::reward::{reward_breakdown, RewardBreakdown, RewardError, RobotState};
use crate::sysid::{fit_all, report_table, FitReport, SysidError};

/// Failure classes, mapped to exit codes 1 (usage or validation) and 2 (runtime).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<LogError> for CliError {
    fn from(e: LogError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SysidError> for CliError {
    fn from(e: SysidError) -> Self {
        match e {
            SysidError::InsufficientExcitation { .. } => CliError::Runtime(e.to_string()),
            SysidError::Contract(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Diverged { .. } | NnError::Io(_) => CliError::Runtime(e.to_string()),
            NnError::Contract(_) | NnError::Format(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Diverged { .. } | OracleError::Domain(_) => CliError::Runtime(e.to_string()),
            OracleError::Contract(_) | OracleError::Config(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Oracle(o) => o.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io(_) => CliError::Runtime(e.to_string()),
            MetricsError::Contract(_) => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hydrodyn", version, about = "Hydraulic actuator model: simulate, fit, compare, benchmark")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Directory every output file is written under.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize trajectory logs from the oracle (all scenarios, or one).
    Simulate {
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Fit per-joint coefficients to a log.
    Fit {
        #[arg(long)]
        log: PathBuf,
    },
    /// Train one baseline network on a log.
    TrainBaseline {
        #[arg(long)]
        arch: Arch,
        #[arg(long)]
        log: PathBuf,
        /// Pick the learning rate from the config grid instead of the frozen value.
        #[arg(long)]
        select_lr: bool,
    },
    /// Score models on logs and write the comparison table.
    Eval {
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long = "weights")]
        weights: Vec<PathBuf>,
        /// `NAME=PATH` or `PATH` (named after the file stem); repeatable.
        #[arg(long = "log", required = true)]
        logs: Vec<String>,
    },
    /// Opposite-direction share and histogram of (q_des − q, τ).
    Dist {
        #[arg(long)]
        log: PathBuf,
    },
    /// Time the twelve-joint predictor.
    Bench {
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Evaluate every reward term for a robot state JSON.
    RewardsCheck {
        #[arg(long)]
        state: PathBuf,
    },
    /// simulate → fit → train → eval → dist → bench → rewards with one config.
    Pipeline,
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HYDRODYN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("HYDRODYN_THREADS must be a positive integer, got {raw:?}")))?;
    // a pool built by an earlier call in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let cfg = load_config(&cli.common)?;
    let out = cli.common.out_dir.as_path();
    match cli.command {
        Command::Simulate { scenario } => cmd_simulate(&cfg, out, scenario.as_deref()),
        Command::Fit { log } => cmd_fit(&cfg, out, &parse_trajectory_csv(&log)?).map(|_| ()),
        Command::TrainBaseline { arch, log, select_lr } => {
            cmd_train(&cfg, out, arch, &parse_trajectory_csv(&log)?, select_lr).map(|_| ())
        }
        Command::Eval { coeffs, weights, logs } => cmd_eval(&cfg, out, coeffs.as_deref(), &weights, &logs),
        Command::Dist { log } => {
            let name = file_stem(&log)?;
            cmd_dist(&cfg, out, &name, &parse_trajectory_csv(&log)?).map(|_| ())
        }
        Command::Bench { coeffs, iters } => {
            let coeffs = coeffs_from_json(&read_text(&coeffs)?)?;
            cmd_bench(out, &coeffs, iters.unwrap_or(cfg.metrics.bench_iters), cfg.seed).map(|_| ())
        }
        Command::RewardsCheck { state } => {
            let state: RobotState = serde_json::from_str(&read_text(&state)?)
                .map_err(|e| CliError::Validation(format!("robot state JSON: {e}")))?;
            let b = cmd_rewards(&cfg, out, &state)?;
            println!("{}", to_json(&b));
            Ok(())
        }
        Command::Pipeline => run_pipeline(&cfg, out).map(|s| {
            eprintln!("pipeline finished in {:.1} s; artifacts in {}", s.wall_s, out.display());
        }),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_file(path: &Path) -> Result<File, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn file_stem(path: &Path) -> Result<String, CliError> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Validation(format!("cannot derive a name from {}", path.display())))
}

fn cmd_simulate(cfg: &RunConfig, out: &Path, only: Option<&str>) -> Result<(), CliError> {
    let scenarios: Vec<_> = match only {
        Some(name) => vec![cfg
            .scenario(name)
            .ok_or_else(|| CliError::Validation(format!("no scenario named {name:?} in the config")))?],
        None => cfg.scenarios().collect(),
    };
    for sc in scenarios {
        let log = synthesize_log(&cfg.setup, sc, cfg.seed)?;
        write_file(&out.join(format!("{}.csv", sc.name)), log.to_csv_string()?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub coeffs: Vec<ActuatorCoeffs>,
    pub reports: Vec<FitReport>,
}

fn cmd_fit(cfg: &RunConfig, out: &Path, log: &TrajectoryLog) -> Result<FitOutput, CliError> {
    let fits = fit_all(log, &cfg.radii(), &cfg.fit)?;
    write_file(&out.join("coeffs.json"), coeffs_to_json(&fits.iter().map(|f| f.0).collect::<Vec<_>>())? + "\n")?;
    write_file(&out.join("fit_report.txt"), report_table(&fits))?;
    let (coeffs, reports) = fits.into_iter().unzip();
    let output = FitOutput { coeffs, reports };
    write_file(&out.join("fit_report.json"), to_json(&output.reports))?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub arch: Arch,
    pub lr: f64,
    pub iterations: usize,
    pub param_count: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Present when the rate was picked from the grid.
    pub lr_trials: Option<Vec<LrTrial>>,
    pub losses: Vec<f64>,
}

fn cmd_train(
    cfg: &RunConfig,
    out: &Path,
    arch: Arch,
    log: &TrajectoryLog,
    pick_lr: bool,
) -> Result<(NetParams, TrainingSummary), CliError> {
    let data = dataset_from_log(log)?;
    let init = NetParams::init(arch, BASELINE_DIMS, cfg.seed);
    let mut tcfg = cfg.baselines.train_config(arch, cfg.seed);
    let lr_trials = if pick_lr {
        let (best, trials) = select_lr(&init, &data, &tcfg, &cfg.baselines.lr_grid)?;
        tcfg.lr = best;
        Some(trials)
    } else {
        None
    };
    let outcome = train(init, &data, &tcfg)?;
    let summary = TrainingSummary {
        arch,
        lr: tcfg.lr,
        iterations: tcfg.iterations,
        param_count: outcome.net.param_count(),
        initial_loss: outcome.losses[0],
        final_loss: *outcome.losses.last().expect("losses are never empty"),
        lr_trials,
        losses: outcome.losses,
    };
    write_weights(&outcome.net, std::io::BufWriter::new(create_file(&out.join(format!("{arch}.weights")))?))?;
    write_file(&out.join(format!("{arch}_training.json")), to_json(&summary))?;
    Ok((outcome.net, summary))
}

fn named_log(arg: &str) -> Result<(String, TrajectoryLog), CliError> {
    let (name, path) = match arg.split_once('=') {
        Some((n, p)) if !n.is_empty() => (n.to_string(), PathBuf::from(p)),
        _ => (file_stem(Path::new(arg))?, PathBuf::from(arg)),
    };
    Ok((name, parse_trajectory_csv(&path)?))
}

fn write_table(out: &Path, table: &Table3) -> Result<(), CliError> {
    write_file(&out.join("table3.txt"), table.to_text())?;
    write_file(&out.join("table3.csv"), table.to_csv())?;
    write_file(&out.join("table3.json"), to_json(table))
}

fn cmd_eval(
    cfg: &RunConfig,
    out: &Path,
    coeffs: Option<&Path>,
    weights: &[PathBuf],
    logs: &[String],
) -> Result<(), CliError> {
    let mut models: Vec<Box<dyn TorquePredictor>> = Vec::new();
    if let Some(path) = coeffs {
        models.push(Box::new(AnalyticPredictor { coeffs: coeffs_from_json(&read_text(path)?)? }));
    }
    for path in weights {
        let file = File::open(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let net = read_weights(BufReader::new(file))?;
        models.push(Box::new(Baseline { net, window: cfg.baselines.window }));
    }
    if models.is_empty() {
        return Err(CliError::Validation("eval needs --coeffs and/or --weights".into()));
    }
    let logs = logs.iter().map(|a| named_log(a)).collect::<Result<Vec<_>, _>>()?;
    let model_refs: Vec<&dyn TorquePredictor> = models.iter().map(|m| m.as_ref()).collect();
    let log_refs: Vec<(&str, &TrajectoryLog)> = logs.iter().map(|(n, l)| (n.as_str(), l)).collect();
    let table = table3_report(&model_refs, &log_refs, cfg.metrics.threshold);
    print!("{}", table.to_text());
    write_table(out, &table)
}

fn cmd_dist(cfg: &RunConfig, out: &Path, name: &str, log: &TrajectoryLog) -> Result<QuadrantStats, CliError> {
    let [bx, by] = cfg.metrics.hist_bins;
    let stats = quadrant_stats(log, bx, by)?;
    let mut csv = Vec::new();
    stats.histogram.write_csv(&mut csv)?;
    write_file(&out.join(format!("{name}_hist.csv")), csv)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        log: &'a str,
        opposite_fraction: f64,
        n_total: usize,
    }
    write_file(
        &out.join(format!("{name}_quadrant.json")),
        to_json(&Summary { log: name, opposite_fraction: stats.opposite_fraction, n_total: stats.n_total }),
    )?;
    Ok(stats)
}

fn cmd_bench(out: &Path, coeffs: &[ActuatorCoeffs], iters: usize, seed: u64) -> Result<LatencyStats, CliError> {
    let stats = bench_latency(coeffs, iters, seed)?;
    write_file(&out.join("latency.json"), to_json(&stats))?;
    Ok(stats)
}

fn cmd_rewards(cfg: &RunConfig, out: &Path, state: &RobotState) -> Result<RewardBreakdown, CliError> {
    let b = reward_breakdown(state, &cfg.reward)?;
    write_file(&out.join("rewards.json"), to_json(&b))?;
    Ok(b)
}

/// Pooled score of one model over several logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledScore {
    pub model: String,
    pub rmse: f64,
    /// RMS of the measured torques the model was scored against (N·m).
    pub torque_rms: f64,
}

fn pooled_score(model: &dyn TorquePredictor, logs: &[&TrajectoryLog]) -> Result<PooledScore, CliError> {
    let (mut pred, mut actual) = (Vec::new(), Vec::new());
    for log in logs {
        let (p, a) = model.predict_log(log).map_err(|e| CliError::Runtime(format!("{}: {e}", model.label())))?;
        pred.extend(p);
        actual.extend(a);
    }
    let m = thresholded_metrics(&pred, &actual, 0.0)?;
    let torque_rms = (actual.iter().map(|v| v * v).sum::<f64>() / actual.len() as f64).sqrt();
    Ok(PooledScore { model: model.label(), rmse: m.rmse_all, torque_rms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodRow {
    pub model: String,
    /// Pooled over the held-out logs.
    pub in_distribution_rmse: f64,
    pub ood_rmse: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub train_log: String,
    pub ood_log: String,
    pub train_opposite_fraction: f64,
    pub ood_opposite_fraction: f64,
    pub rows: Vec<OodRow>,
}

impl OodReport {
    pub fn row(&self, model: &str) -> Option<&OodRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub seed: u64,
    pub coeffs: Vec<ActuatorCoeffs>,
    pub fit_reports: Vec<FitReport>,
    pub training: Vec<TrainingSummary>,
    pub table: Table3,
    /// Analytic model pooled over the held-out logs.
    pub heldout: PooledScore,
    pub ood: OodReport,
    pub control: ModeContrast,
    pub opposite_fraction: Vec<(String, f64)>,
    pub rewards: RewardBreakdown,
    /// Timing-dependent; kept out of the deterministic artifacts.
    #[serde(skip)]
    pub latency: Option<LatencyStats>,
    #[serde(skip)]
    pub wall_s: f64,
}

/// Runs every stage with one config and writes all artifacts under `out`.
/// Everything except `latency.json` is byte-identical across runs with the same config.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<PipelineSummary, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let stage = |name: &str| eprintln!("[{:>6.1} s] {name}", start.elapsed().as_secs_f64());
    write_file(&out.join("config.json"), cfg.to_json() + "\n")?;

    stage("simulate");
    let logs = cfg
        .scenarios()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|sc| synthesize_log(&cfg.setup, sc, cfg.seed).map(|l| (sc.name.clone(), l)))
        .collect::<Result<Vec<_>, _>>()?;
    for (name, log) in &logs {
        write_file(&out.join("logs").join(format!("{name}.csv")), log.to_csv_string()?)?;
    }
    let find = |name: &str| &logs.iter().find(|(n, _)| n == name).expect("every scenario was synthesized").1;
    let train_log = find(&cfg.train.name);
    let ood_log = find(&cfg.ood.name);
    let eval_logs: Vec<(&str, &TrajectoryLog)> = cfg.eval.iter().map(|s| (s.name.as_str(), find(&s.name))).collect();

    stage("fit");
    let fit = cmd_fit(cfg, out, train_log)?;
    let analytic = AnalyticPredictor { coeffs: fit.coeffs.clone() };

    stage("train baselines");
    let trained = cfg
        .baselines
        .archs
        .par_iter()
        .map(|&arch| cmd_train(cfg, out, arch, train_log, false))
        .collect::<Result<Vec<_>, _>>()?;
    let (nets, training): (Vec<NetParams>, Vec<TrainingSummary>) = trained.into_iter().unzip();
    let baselines: Vec<Baseline> = nets.into_iter().map(|net| Baseline { net, window: cfg.baselines.window }).collect();

    stage("eval");
    let mut models: Vec<&dyn TorquePredictor> = vec![&analytic];
    models.extend(baselines.iter().map(|b| b as &dyn TorquePredictor));
    let table = table3_report(&models, &eval_logs, cfg.metrics.threshold);
    write_table(out, &table)?;
    let heldout_logs: Vec<&TrajectoryLog> = eval_logs.iter().map(|(_, l)| *l).collect();
    let heldout = pooled_score(&analytic, &heldout_logs)?;
    write_file(&out.join("heldout.json"), to_json(&heldout))?;

    stage("distribution");
    let mut opposite_fraction = Vec::new();
    for (name, log) in &logs {
        let stats = cmd_dist(cfg, &out.join("dist"), name, log)?;
        opposite_fraction.push((name.clone(), stats.opposite_fraction));
    }
    let fraction_of = |name: &str| opposite_fraction.iter().find(|(n, _)| n == name).map_or(f64::NAN, |(_, f)| *f);

    stage("out-of-distribution");
    let rows = models
        .par_iter()
        .map(|m| {
            let id = pooled_score(*m, &heldout_logs)?;
            let ood = pooled_score(*m, &[ood_log])?;
            Ok(OodRow { model: m.label(), in_distribution_rmse: id.rmse, ood_rmse: ood.rmse, ratio: ood.rmse / id.rmse })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let ood = OodReport {
        train_log: cfg.train.name.clone(),
        ood_log: cfg.ood.name.clone(),
        train_opposite_fraction: fraction_of(&cfg.train.name),
        ood_opposite_fraction: fraction_of(&cfg.ood.name),
        rows,
    };
    write_file(&out.join("ood.json"), to_json(&ood))?;

    stage("control modes");
    let control = mode_contrast(&cfg.torque_loop, &cfg.setup.position_loop, &cfg.control_sim())?;
    write_file(&out.join("control.json"), to_json(&control))?;

    stage("rewards");
    let rewards = cmd_rewards(cfg, out, &RobotState::default())?;

    stage("bench");
    let latency = cmd_bench(out, &fit.coeffs, cfg.metrics.bench_iters, cfg.seed)?;

    let summary = PipelineSummary {
        seed: cfg.seed,
        coeffs: fit.coeffs,
        fit_reports: fit.reports,
        training,
        table,
        heldout,
        ood,
        control,
        opposite_fraction,
        rewards,
        latency: Some(latency),
        wall_s: start.elapsed().as_secs_f64(),
    };
    write_file(&out.join("summary.json"), to_json(&summary))?;
    print!("{}", summary.table.to_text());
    Ok(summary)
}
