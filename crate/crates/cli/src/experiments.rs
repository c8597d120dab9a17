//! Experiment runners: plot-ready CSV series plus a JSON run manifest
//! sufficient to reproduce every output byte for byte.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use deploygame::dynamics::{
    dominance_iteration, logit_run, BetaSchedule, DominanceConfig, DynamicsError, InitialProfile,
    LogitConfig, ProbabilityMethod,
};
use deploygame::game::{
    deployability, extremal_equilibria, potential, robust_equilibrium, ActionProfile,
    DeploymentGame, GameError,
};
use deploygame::mechanism::{multi_round_tipping, MechanismError};
use deploygame::metrics::{deployability_report, MetricsError};
use deploygame::shapley::ShapleyError;

use crate::config::ConfigError;
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug)]
pub enum ExperimentError {
    Scenario(ScenarioError),
    Io(std::io::Error),
    Game(GameError),
    Metrics(MetricsError),
    Mechanism(MechanismError),
    Dynamics(DynamicsError),
    Config(ConfigError),
    Invalid(String),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Scenario(e) => write!(f, "{e}"),
            ExperimentError::Io(e) => write!(f, "io error: {e}"),
            ExperimentError::Game(e) => write!(f, "{e}"),
            ExperimentError::Metrics(e) => write!(f, "{e}"),
            ExperimentError::Mechanism(e) => write!(f, "{e}"),
            ExperimentError::Dynamics(e) => write!(f, "{e}"),
            ExperimentError::Config(e) => write!(f, "{e}"),
            ExperimentError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<ScenarioError> for ExperimentError {
    fn from(e: ScenarioError) -> Self {
        ExperimentError::Scenario(e)
    }
}
impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e)
    }
}
impl From<GameError> for ExperimentError {
    fn from(e: GameError) -> Self {
        ExperimentError::Game(e)
    }
}
impl From<MetricsError> for ExperimentError {
    fn from(e: MetricsError) -> Self {
        ExperimentError::Metrics(e)
    }
}
impl From<MechanismError> for ExperimentError {
    fn from(e: MechanismError) -> Self {
        ExperimentError::Mechanism(e)
    }
}
impl From<DynamicsError> for ExperimentError {
    fn from(e: DynamicsError) -> Self {
        ExperimentError::Dynamics(e)
    }
}
impl From<ConfigError> for ExperimentError {
    fn from(e: ConfigError) -> Self {
        ExperimentError::Config(e)
    }
}

impl ExperimentError {
    pub fn is_dataset_missing(&self) -> bool {
        match self {
            ExperimentError::Scenario(e) => e.is_dataset_missing(),
            ExperimentError::Config(ConfigError::DatasetMissing(_)) => true,
            _ => false,
        }
    }

    pub fn is_cap_exceeded(&self) -> bool {
        matches!(
            self,
            ExperimentError::Game(GameError::CapExceeded { .. })
                | ExperimentError::Game(GameError::Shapley(ShapleyError::CapExceeded { .. }))
                | ExperimentError::Mechanism(MechanismError::CapExceeded { .. })
                | ExperimentError::Dynamics(DynamicsError::CapExceeded { .. })
                | ExperimentError::Metrics(MetricsError::Game(GameError::CapExceeded { .. }))
        )
    }
}

/// Execution context shared by every experiment.
pub struct RunContext {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    /// Overrides the config's experiment seed.
    pub seed_override: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunContext {
    pub fn effective_seed(&self, scenario: &Scenario) -> u64 {
        self.seed_override
            .unwrap_or(scenario.config.experiment.seed)
    }

    fn pool(&self) -> rayon::ThreadPool {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(jobs) = self.jobs {
            builder = builder.num_threads(jobs.max(1));
        }
        builder.build().expect("thread pool builds")
    }
}

/// JSON run manifest written next to every experiment's outputs.
#[derive(serde::Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub crate_version: String,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    pub extra: serde_json::Value,
}

impl Manifest {
    fn new(command: &str, ctx: &RunContext, seed: u64) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(&ctx.config_path)?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        Ok(Manifest {
            command: command.to_string(),
            config_path: ctx.config_path.display().to_string(),
            config_sha256: format!("{digest:x}"),
            seed,
            jobs: ctx.jobs,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            notes: Vec::new(),
            extra: serde_json::Value::Null,
        })
    }

    fn write(&self, out_dir: &Path) -> Result<PathBuf, ExperimentError> {
        let path = out_dir.join("manifest.json");
        let mut file = fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut file, self)
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        writeln!(file)?;
        Ok(path)
    }
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), ExperimentError> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{header}")?;
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(())
}

/// Equilibrium summary of one game instance.
struct EquilibriumNumbers {
    smallest: usize,
    largest: usize,
    robust: usize,
    phi_ones: f64,
    profitable: bool,
    necessary: bool,
    heuristic: bool,
}

fn equilibrium_numbers(game: &DeploymentGame) -> Result<EquilibriumNumbers, ExperimentError> {
    let (smallest, largest) = extremal_equilibria(game)?;
    let robust = robust_equilibrium(game)?;
    let cert = deployability(game)?;
    Ok(EquilibriumNumbers {
        smallest: smallest.deployer_count(),
        largest: largest.deployer_count(),
        robust: robust.profile.deployer_count(),
        phi_ones: cert.phi_all_ones,
        profitable: cert.profitable,
        necessary: cert.necessary_condition,
        heuristic: robust.heuristic,
    })
}

const SWEEP_HEADER: &str = "smallest_deployers,largest_deployers,robust_deployers,phi_all_ones,phi_all_zero,profitable,necessary_condition,robust_heuristic";

fn sweep_row(nums: &EquilibriumNumbers) -> String {
    format!(
        "{},{},{},{},0,{},{},{}",
        nums.smallest,
        nums.largest,
        nums.robust,
        nums.phi_ones,
        nums.profitable,
        nums.necessary,
        nums.heuristic
    )
}

/// `report`: deployability analytics as JSON with fixed field names.
pub fn run_report(scenario: &Scenario, ctx: &RunContext) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&ctx.out_dir)?;
    let report = deployability_report(&scenario.game)?;
    let per_isp: Vec<serde_json::Value> = report
        .traffic_threshold
        .per_isp
        .iter()
        .map(|e| {
            serde_json::json!({
                "isp": e.node,
                "label": scenario.topology.label(e.node),
                "traffic_share": e.share,
                "satisfied": e.satisfied,
            })
        })
        .collect();
    let json = serde_json::json!({
        "gamma": report.gamma,
        "total_benefit": report.total_benefit,
        "immediate_benefit": report.immediate_benefit,
        "total_cost": report.total_cost,
        "deployment_price": report.deployment_price,
        "avg_critical_weighted": report.avg_critical_weighted,
        "necessary_condition": report.necessary_condition,
        "profitable": report.profitable,
        "traffic_threshold": report.traffic_threshold.threshold,
        "all_isps_below_threshold": report.traffic_threshold.all_satisfied,
        "per_isp": per_isp,
        "players": scenario.game.player_count(),
    });
    let path = ctx.out_dir.join("report.json");
    let mut file = fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut file, &json)
        .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    writeln!(file)?;
    let seed = ctx.effective_seed(scenario);
    let mut manifest = Manifest::new("report", ctx, seed)?;
    manifest.outputs.push("report.json".into());
    manifest.write(&ctx.out_dir)?;
    Ok(path)
}

/// `sweep-price`: equilibrium scale against the unit price.
pub fn run_price_sweep(scenario: &Scenario, ctx: &RunContext) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&ctx.out_dir)?;
    let grid = scenario
        .config
        .experiment
        .price_grid
        .as_ref()
        .ok_or_else(|| ExperimentError::Invalid("config lacks experiment.price_grid".into()))?
        .values()?;
    let pool = ctx.pool();
    let rows: Result<Vec<String>, ExperimentError> = pool.install(|| {
        grid.par_iter()
            .map(|&price| {
                let game = scenario.game_at_price(price);
                let nums = equilibrium_numbers(&game)?;
                Ok(format!("{price},{}", sweep_row(&nums)))
            })
            .collect()
    });
    let path = ctx.out_dir.join("price_sweep.csv");
    write_csv(&path, &format!("price,{SWEEP_HEADER}"), &rows?)?;
    let seed = ctx.effective_seed(scenario);
    let mut manifest = Manifest::new("sweep-price", ctx, seed)?;
    manifest.outputs.push("price_sweep.csv".into());
    manifest.write(&ctx.out_dir)?;
    Ok(path)
}

/// `sweep-alpha`: equilibrium scale against the unit price for each
/// incremental exponent.
pub fn run_alpha_sweep(scenario: &Scenario, ctx: &RunContext) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&ctx.out_dir)?;
    let prices = scenario
        .config
        .experiment
        .price_grid
        .as_ref()
        .ok_or_else(|| ExperimentError::Invalid("config lacks experiment.price_grid".into()))?
        .values()?;
    let alphas: Vec<f64> = scenario
        .config
        .experiment
        .alpha_grid
        .as_ref()
        .ok_or_else(|| ExperimentError::Invalid("config lacks experiment.alpha_grid".into()))?
        .iter()
        .map(|a| a.0)
        .collect();
    let points: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| prices.iter().map(move |&p| (a, p)))
        .collect();
    let pool = ctx.pool();
    let rows: Result<Vec<String>, ExperimentError> = pool.install(|| {
        points
            .par_iter()
            .map(|&(alpha, price)| {
                let game = scenario.game_at_alpha(price, alpha);
                let nums = equilibrium_numbers(&game)?;
                Ok(format!("{alpha},{price},{}", sweep_row(&nums)))
            })
            .collect()
    });
    let path = ctx.out_dir.join("alpha_sweep.csv");
    write_csv(&path, &format!("alpha,price,{SWEEP_HEADER}"), &rows?)?;
    let seed = ctx.effective_seed(scenario);
    let mut manifest = Manifest::new("sweep-alpha", ctx, seed)?;
    manifest.outputs.push("alpha_sweep.csv".into());
    manifest.write(&ctx.out_dir)?;
    Ok(path)
}

/// `sweep-flatten`: equilibrium scale against the unit price for each
/// maximum path length.
pub fn run_flatten_sweep(
    scenario: &Scenario,
    ctx: &RunContext,
) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&ctx.out_dir)?;
    let prices = scenario
        .config
        .experiment
        .price_grid
        .as_ref()
        .ok_or_else(|| ExperimentError::Invalid("config lacks experiment.price_grid".into()))?
        .values()?;
    let lens = scenario
        .config
        .experiment
        .flatten_grid
        .clone()
        .ok_or_else(|| ExperimentError::Invalid("config lacks experiment.flatten_grid".into()))?;
    let points: Vec<(usize, f64)> = lens
        .iter()
        .flat_map(|&m| prices.iter().map(move |&p| (m, p)))
        .collect();
    let pool = ctx.pool();
    let rows: Result<Vec<String>, ExperimentError> = pool.install(|| {
        points
            .par_iter()
            .map(|&(max_len, price)| {
                let game = scenario.game_flattened(max_len, price)?;
                let nums = equilibrium_numbers(&game)?;
                Ok(format!("{max_len},{price},{}", sweep_row(&nums)))
            })
            .collect()
    });
    let path = ctx.out_dir.join("flatten_sweep.csv");
    write_csv(&path, &format!("max_path_len,price,{SWEEP_HEADER}"), &rows?)?;
    let seed = ctx.effective_seed(scenario);
    let mut manifest = Manifest::new("sweep-flatten", ctx, seed)?;
    manifest.outputs.push("flatten_sweep.csv".into());
    manifest.write(&ctx.out_dir)?;
    Ok(path)
}

/// `logit`: averaged logit-response trajectories.
pub fn run_logit(scenario: &Scenario, ctx: &RunContext) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&ctx.out_dir)?;
    let exp = &scenario.config.experiment;
    let seed = ctx.effective_seed(scenario);
    let beta = match (exp.beta0, exp.beta) {
        (Some(beta0), _) => BetaSchedule::Harmonic { beta0 },
        (None, Some(beta)) => BetaSchedule::Fixed(beta),
        (None, None) => {
            return Err(ExperimentError::Invalid(
                "config needs experiment.beta0 or experiment.beta".into(),
            ))
        }
    };
    let replicas = exp.replicas;
    let horizon = exp.horizon;
    let game = &scenario.game;
    let pool = ctx.pool();
    let runs: Result<Vec<_>, ExperimentError> = pool.install(|| {
        (0..replicas)
            .into_par_iter()
            .map(|replica| {
                let config = LogitConfig {
                    beta: beta.clone(),
                    horizon,
                    init: InitialProfile::Bernoulli(exp.init_deploy_prob),
                    seed: seed.wrapping_add(replica as u64),
                    record_potential: true,
                };
                Ok(logit_run(game, &config)?)
            })
            .collect()
    });
    let runs = runs?;
    let mut rows = Vec::with_capacity(horizon + 1);
    for step in 0..=horizon {
        let mean_deployers: f64 = runs
            .iter()
            .map(|r| r.deployer_counts[step] as f64)
            .sum::<f64>()
            / replicas as f64;
        let mean_potential: f64 = runs
            .iter()
            .map(|r| r.potentials.as_ref().expect("recorded")[step])
            .sum::<f64>()
            / replicas as f64;
        rows.push(format!("{step},{mean_deployers},{mean_potential}"));
    }
    let path = ctx.out_dir.join("logit.csv");
    write_csv(&path, "step,mean_deployer_count,mean_potential", &rows)?;
    // One raw trajectory (the first replica) in the per-step layout.
    let first = &runs[0];
    let trajectory: Vec<String> = first
        .deployer_counts
        .iter()
        .zip(first.potentials.as_ref().expect("recorded"))
        .enumerate()
        .map(|(step, (&count, &phi))| format!("{step},{count},{phi}"))
        .collect();
    write_csv(
        &ctx.out_dir.join("trajectory.csv"),
        "step,deployer_count,potential",
        &trajectory,
    )?;
    let robust = robust_equilibrium(game)?;
    let mut manifest = Manifest::new("logit", ctx, seed)?;
    manifest.outputs.push("logit.csv".into());
    manifest.outputs.push("trajectory.csv".into());
    manifest.extra = serde_json::json!({
        "replicas": replicas,
        "horizon": horizon,
        "robust_deployers": robust.profile.deployer_count(),
        "robust_heuristic": robust.heuristic,
        "final_mean_deployers": runs
            .iter()
            .map(|r| r.final_profile.deployer_count() as f64)
            .sum::<f64>() / replicas as f64,
    });
    manifest.write(&ctx.out_dir)?;
    Ok(path)
}

/// `induction`: iterated-dominance threshold brackets per round.
pub fn run_induction(scenario: &Scenario, ctx: &RunContext) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&ctx.out_dir)?;
    let exp = &scenario.config.experiment;
    let seed = ctx.effective_seed(scenario);
    let symmetric = deploygame::dynamics::is_symmetric_game(&scenario.game);
    let method = if symmetric {
        ProbabilityMethod::Quadrature
    } else {
        ProbabilityMethod::MonteCarlo {
            samples: exp.induction_samples,
            seed,
        }
    };
    let config = DominanceConfig {
        noise_sigma: exp.noise_sigma,
        rounds: exp.induction_rounds,
        method,
        ..DominanceConfig::default()
    };
    let history = dominance_iteration(&scenario.game, &config)?;
    let players = scenario.game.players();
    let mut header = String::from("round");
    for &p in players {
        header.push_str(&format!(",theta_lower_{p}"));
    }
    for &p in players {
        header.push_str(&format!(",theta_upper_{p}"));
    }
    let rows: Vec<String> = history
        .iter()
        .map(|state| {
            let mut row = format!("{}", state.round);
            for &l in &state.lower {
                row.push_str(&format!(",{l}"));
            }
            for &u in &state.upper {
                row.push_str(&format!(",{u}"));
            }
            row
        })
        .collect();
    let path = ctx.out_dir.join("induction.csv");
    write_csv(&path, &header, &rows)?;
    let mut manifest = Manifest::new("induction", ctx, seed)?;
    manifest.outputs.push("induction.csv".into());
    manifest.extra = serde_json::json!({
        "symmetric_quadrature": symmetric,
        "noise_sigma": exp.noise_sigma,
        "rounds": exp.induction_rounds,
        "final_width": history.last().map(|s| s.width()),
    });
    manifest.write(&ctx.out_dir)?;
    Ok(path)
}

/// `mechanism`: multi-round tipping trace.
pub fn run_mechanism(scenario: &Scenario, ctx: &RunContext) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&ctx.out_dir)?;
    let seed = ctx.effective_seed(scenario);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = multi_round_tipping(&scenario.game, &mut rng)?;
    let mut rows = Vec::with_capacity(trace.rounds.len());
    for (i, round) in trace.rounds.iter().enumerate() {
        rows.push(format!(
            "{},{},{},{}",
            i + 1,
            round.tipped.len(),
            round.equilibrium.len(),
            round.rewards.total()
        ));
    }
    let path = ctx.out_dir.join("mechanism.csv");
    write_csv(
        &path,
        "round,selected_count,cumulative_deployers,total_reward",
        &rows,
    )?;
    let mut manifest = Manifest::new("mechanism", ctx, seed)?;
    manifest.outputs.push("mechanism.csv".into());
    manifest.extra = serde_json::json!({
        "terminated": trace.terminated,
        "rounds": trace.rounds.len(),
        "total_tipped": trace.total_tipped(),
        "final_deployers": trace.final_deployers().len(),
    });
    manifest.write(&ctx.out_dir)?;
    Ok(path)
}

/// Potential-based sanity number used by scale-invariance checks: the
/// potential of the all-ones profile.
pub fn phi_all_ones(game: &DeploymentGame) -> Result<f64, ExperimentError> {
    Ok(potential(
        game,
        &ActionProfile::all_ones(game.player_count()),
    )?)
}
