//! Equilibrium-selection dynamics.
//!
//! Two routes to the same selection: a logit response chain whose
//! stationary distribution is the Gibbs measure of the potential (so
//! vanishing noise concentrates on the robust equilibrium), and iterated
//! elimination of dominated strategies for ISPs holding noisy perceptions
//! of the architecture's benefit, which brackets rational play between a
//! rising "surely won't deploy" and a falling "surely will deploy"
//! threshold.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fmath;
use crate::game::{potential, potential_table, ActionProfile, DeploymentGame, GameError};
use crate::model::{DeploymentState, Money};
use crate::shapley::shapley_tilde_single;
use crate::MONEY_EPS;

/// State cap for exact stationary-distribution computation.
pub const STATIONARY_PLAYER_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    CapExceeded {
        size: usize,
        cap: usize,
    },
    /// A threshold bracket moved the wrong way beyond the sampling
    /// tolerance; raise the sample count.
    NonMonotonic {
        round: usize,
        delta: f64,
    },
    BadConfig(&'static str),
    Game(GameError),
}

impl From<GameError> for DynamicsError {
    fn from(e: GameError) -> Self {
        DynamicsError::Game(e)
    }
}

impl core::fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DynamicsError::CapExceeded { size, cap } => {
                write!(f, "{size} players exceed the cap of {cap}")
            }
            DynamicsError::NonMonotonic { round, delta } => write!(
                f,
                "threshold bracket reversed by {delta} in round {round}; increase samples"
            ),
            DynamicsError::BadConfig(msg) => write!(f, "bad configuration: {msg}"),
            DynamicsError::Game(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DynamicsError {}

/// Noise schedule for the logit chain.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaSchedule {
    /// One noise level for every ISP and step.
    Fixed(f64),
    /// Per-ISP fixed noise levels, aligned with the player order.
    PerPlayer(Vec<f64>),
    /// `β_t = β0 / t`, evaluated before step `t` (t starts at 1).
    Harmonic { beta0: f64 },
}

impl BetaSchedule {
    fn validate(&self, players: usize) -> Result<(), DynamicsError> {
        match self {
            BetaSchedule::Fixed(b) if *b > 0.0 => Ok(()),
            BetaSchedule::Harmonic { beta0 } if *beta0 > 0.0 => Ok(()),
            BetaSchedule::PerPlayer(bs) if bs.len() == players && bs.iter().all(|&b| b > 0.0) => {
                Ok(())
            }
            _ => Err(DynamicsError::BadConfig("beta must be positive")),
        }
    }

    fn beta(&self, player: usize, step: usize) -> f64 {
        match self {
            BetaSchedule::Fixed(b) => *b,
            BetaSchedule::PerPlayer(bs) => bs[player],
            BetaSchedule::Harmonic { beta0 } => beta0 / step as f64,
        }
    }
}

/// Starting profile of a logit run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Profile(ActionProfile),
    /// Every ISP independently deploys with this probability.
    Bernoulli(f64),
}

/// Configuration of a logit response run.
#[derive(Debug, Clone)]
pub struct LogitConfig {
    pub beta: BetaSchedule,
    /// Number of steps `T`.
    pub horizon: usize,
    pub init: InitialProfile,
    pub seed: u64,
    /// Record the potential after every step.
    pub record_potential: bool,
}

impl LogitConfig {
    pub fn new(beta: BetaSchedule, horizon: usize, init: InitialProfile, seed: u64) -> Self {
        LogitConfig {
            beta,
            horizon,
            init,
            seed,
            record_potential: false,
        }
    }
}

/// One logit response step: a uniformly chosen ISP resamples its action
/// with probability proportional to the exponentiated perceived utility.
/// Returns the index of the ISP that moved.
pub fn logit_step(
    game: &DeploymentGame,
    profile: &mut ActionProfile,
    state: &mut DeploymentState,
    beta_of: impl Fn(usize) -> f64,
    rng: &mut impl Rng,
) -> Result<usize, DynamicsError> {
    let n = game.player_count();
    let idx = rng.random_range(0..n);
    let node = game.players()[idx];
    let others = if profile.get(idx) {
        state.without(node)
    } else {
        state.clone()
    };
    let gain = game.deploy_gain(&others, idx)?;
    let p_deploy = fmath::logistic(gain / beta_of(idx));
    let deploy = rng.random::<f64>() < p_deploy;
    if deploy != profile.get(idx) {
        profile.set(idx, deploy);
        if deploy {
            state.insert(node);
        } else {
            state.remove(node);
        }
    }
    Ok(idx)
}

/// Trajectory summary of one logit run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    /// Deployer count after each step; entry 0 is the initial profile.
    pub deployer_counts: Vec<u32>,
    pub final_profile: ActionProfile,
    /// Visit count per profile mask (player count permitting).
    pub visits: Option<Vec<u64>>,
    /// Potential after each step, when requested.
    pub potentials: Option<Vec<Money>>,
}

impl TrajectorySummary {
    /// Empirical distribution over profiles, when visits were recorded.
    pub fn visit_frequencies(&self) -> Option<Vec<f64>> {
        let visits = self.visits.as_ref()?;
        let total: u64 = visits.iter().sum();
        if total == 0 {
            return None;
        }
        Some(visits.iter().map(|&v| v as f64 / total as f64).collect())
    }
}

/// Runs the logit chain for `config.horizon` steps. Identical
/// `(game, config)` pairs produce identical trajectories.
pub fn logit_run(
    game: &DeploymentGame,
    config: &LogitConfig,
) -> Result<TrajectorySummary, DynamicsError> {
    let n = game.player_count();
    if n == 0 {
        return Err(DynamicsError::BadConfig("game has no players"));
    }
    config.beta.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut profile = match &config.init {
        InitialProfile::Profile(p) => {
            if p.len() != n {
                return Err(DynamicsError::BadConfig("initial profile length mismatch"));
            }
            p.clone()
        }
        InitialProfile::Bernoulli(q) => {
            if !(0.0..=1.0).contains(q) {
                return Err(DynamicsError::BadConfig(
                    "Bernoulli probability outside [0,1]",
                ));
            }
            let mut p = ActionProfile::all_zero(n);
            for idx in 0..n {
                if rng.random::<f64>() < *q {
                    p.set(idx, true);
                }
            }
            p
        }
    };
    let mut state = game.state_of(&profile);
    let mut counts = Vec::with_capacity(config.horizon + 1);
    counts.push(profile.deployer_count() as u32);
    let track_visits = n <= STATIONARY_PLAYER_CAP;
    let mut visits = if track_visits {
        let mut v = alloc::vec![0u64; 1usize << n];
        v[profile.mask() as usize] += 1;
        Some(v)
    } else {
        None
    };
    let mut potentials = if config.record_potential {
        let mut v = Vec::with_capacity(config.horizon + 1);
        v.push(potential(game, &profile)?);
        Some(v)
    } else {
        None
    };
    for t in 1..=config.horizon {
        logit_step(
            game,
            &mut profile,
            &mut state,
            |idx| config.beta.beta(idx, t),
            &mut rng,
        )?;
        counts.push(profile.deployer_count() as u32);
        if let Some(v) = visits.as_mut() {
            v[profile.mask() as usize] += 1;
        }
        if let Some(v) = potentials.as_mut() {
            v.push(potential(game, &profile)?);
        }
    }
    Ok(TrajectorySummary {
        deployer_counts: counts,
        final_profile: profile,
        visits,
        potentials,
    })
}

/// Exact stationary analysis of the fixed-β logit chain: the closed-form
/// Gibbs distribution `exp(Φ/β)` (normalized) and, independently, the
/// principal left eigenvector of the explicit transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistributions {
    /// Gibbs measure of the potential.
    pub gibbs: Vec<f64>,
    /// Stationary vector of the transition matrix.
    pub eigen: Vec<f64>,
}

/// Computes both stationary distributions for at most
/// [`STATIONARY_PLAYER_CAP`] players.
pub fn logit_stationary_exact(
    game: &DeploymentGame,
    beta: f64,
) -> Result<StationaryDistributions, DynamicsError> {
    let n = game.player_count();
    if n > STATIONARY_PLAYER_CAP {
        return Err(DynamicsError::CapExceeded {
            size: n,
            cap: STATIONARY_PLAYER_CAP,
        });
    }
    if beta <= 0.0 {
        return Err(DynamicsError::BadConfig("beta must be positive"));
    }
    let phis = potential_table(game)?;
    let states = 1usize << n;
    // Gibbs closed form, normalized against overflow.
    let max_phi = phis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut gibbs: Vec<f64> = phis
        .iter()
        .map(|&phi| fmath::exp((phi - max_phi) / beta))
        .collect();
    let z: f64 = gibbs.iter().sum();
    gibbs.iter_mut().for_each(|g| *g /= z);
    // Transition matrix of the chain: pick an ISP uniformly, resample its
    // action by logit weights. Utility differences come off the potential.
    let mut transition = alloc::vec![0.0f64; states * states];
    for mask in 0..states {
        let mut stay = 0.0;
        for idx in 0..n {
            let up = mask | (1 << idx);
            let down = mask & !(1 << idx);
            let gain = phis[up] - phis[down];
            let p_deploy = fmath::logistic(gain / beta);
            let (to, p_move) = if mask >> idx & 1 == 1 {
                (down, 1.0 - p_deploy)
            } else {
                (up, p_deploy)
            };
            if to != mask {
                transition[mask * states + to] += p_move / n as f64;
                stay += (1.0 - p_move) / n as f64;
            } else {
                stay += 1.0 / n as f64;
            }
        }
        transition[mask * states + mask] += stay;
    }
    let eigen = stationary_of(&transition, states);
    Ok(StationaryDistributions { gibbs, eigen })
}

/// Stationary row vector of a row-stochastic matrix, by Gaussian
/// elimination on `π(P - I) = 0` with the normalization `Σπ = 1`.
fn stationary_of(transition: &[f64], states: usize) -> Vec<f64> {
    // Build (P^T - I) with the last equation replaced by normalization.
    let m = states;
    let mut a = alloc::vec![0.0f64; m * m];
    let mut b = alloc::vec![0.0f64; m];
    for row in 0..m.saturating_sub(1) {
        for col in 0..m {
            a[row * m + col] = transition[col * m + row] - if row == col { 1.0 } else { 0.0 };
        }
    }
    for col in 0..m {
        a[(m - 1) * m + col] = 1.0;
    }
    b[m - 1] = 1.0;
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let mut pivot = col;
        for row in col + 1..m {
            if fmath::abs(a[row * m + col]) > fmath::abs(a[pivot * m + col]) {
                pivot = row;
            }
        }
        if fmath::abs(a[pivot * m + col]) < 1e-14 {
            continue;
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * m + col];
        for row in 0..m {
            if row == col {
                continue;
            }
            let factor = a[row * m + col] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..m {
                a[row * m + k] -= factor * a[col * m + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut pi: Vec<f64> = (0..m)
        .map(|i| {
            let d = a[i * m + i];
            if fmath::abs(d) < 1e-14 {
                0.0
            } else {
                b[i] / d
            }
        })
        .collect();
    let total: f64 = pi.iter().sum();
    if total > 0.0 {
        pi.iter_mut().for_each(|p| *p /= total);
    }
    pi
}

/// Probability evaluation method for the dominance iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbabilityMethod {
    /// Deterministic 1-D quadrature over the own-noise variable; requires
    /// a symmetric game (equal costs, every flow critical for all
    /// players).
    Quadrature,
    /// Seeded Monte Carlo over noise samples.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Configuration of the iterated-dominance bracket computation.
#[derive(Debug, Clone)]
pub struct DominanceConfig {
    /// Standard deviation of each ISP's perception noise.
    pub noise_sigma: f64,
    pub rounds: usize,
    pub method: ProbabilityMethod,
    /// Finite stand-in for the initial "surely deploys above" threshold;
    /// full-path games have no dominant-deploy region, so the upper
    /// bracket starts at a large finite value and contracts from there.
    pub upper_init: f64,
}

impl Default for DominanceConfig {
    fn default() -> Self {
        DominanceConfig {
            noise_sigma: 0.3,
            rounds: 100,
            method: ProbabilityMethod::Quadrature,
            upper_init: 1e3,
        }
    }
}

/// Threshold brackets after one round of iterated dominance.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdState {
    /// Below `lower[i]`, ISP `i` surely does not deploy.
    pub lower: Vec<f64>,
    /// Above `upper[i]`, ISP `i` surely deploys.
    pub upper: Vec<f64>,
    pub round: usize,
}

impl ThresholdState {
    /// Largest bracket width across players.
    pub fn width(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| u - l)
            .fold(0.0, f64::max)
    }
}

/// History of threshold brackets, index 0 being the initialization.
pub type ThresholdHistory = Vec<ThresholdState>;

/// Whether every player shares the same role: equal costs and every flow
/// critical for the full player set (line games and their relatives).
pub fn is_symmetric_game(game: &DeploymentGame) -> bool {
    let n = game.player_count();
    if n == 0 {
        return false;
    }
    let c0 = game.cost_by_index(0);
    if (1..n).any(|i| (game.cost_by_index(i) - c0).abs() > MONEY_EPS) {
        return false;
    }
    game.flows().iter().all(|fl| {
        let crit = fl.primary().critical();
        crit.len() == n && game.players().iter().all(|p| crit.contains(p))
    })
}

/// Iterated elimination of dominated strategies for ISPs perceiving the
/// architecture's benefit scaled by `1 + θ_i`, each θ derived from a
/// common value observed under multiplicative Gaussian noise.
///
/// Round `t` raises each "surely won't deploy" threshold to the largest
/// signal at which the optimistic expected deploy gain (opponents deploy
/// whenever not surely out) is still non-positive, and lowers each
/// "surely deploys" threshold to the smallest signal at which the
/// pessimistic gain (opponents deploy only when surely in) is already
/// non-negative. Brackets are monotone across rounds up to the sampling
/// tolerance `3/√N`.
pub fn dominance_iteration(
    game: &DeploymentGame,
    config: &DominanceConfig,
) -> Result<ThresholdHistory, DynamicsError> {
    let n = game.player_count();
    if n == 0 {
        return Err(DynamicsError::BadConfig("game has no players"));
    }
    if config.noise_sigma <= 0.0 {
        return Err(DynamicsError::BadConfig("noise sigma must be positive"));
    }
    if matches!(config.method, ProbabilityMethod::Quadrature) && !is_symmetric_game(game) {
        return Err(DynamicsError::BadConfig(
            "quadrature requires a symmetric game; use Monte Carlo",
        ));
    }
    if n > 16 {
        return Err(DynamicsError::CapExceeded { size: n, cap: 16 });
    }
    // Shapley share of ṽ for each player joining each opponent set,
    // tabulated once: share_table[idx][mask over the other players].
    let share_table = {
        let mut table = Vec::with_capacity(n);
        for idx in 0..n {
            let node = game.players()[idx];
            let others: Vec<usize> = (0..n).filter(|&j| j != idx).collect();
            let mut per_mask = Vec::with_capacity(1usize << others.len());
            for mask in 0u64..(1u64 << others.len()) {
                let mut state = DeploymentState::empty(game.network().node_count());
                for (b, &j) in others.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        state.insert(game.players()[j]);
                    }
                }
                state.insert(node);
                per_mask.push(
                    shapley_tilde_single(game.flows(), &state, game.model(), node)
                        .map_err(GameError::from)?,
                );
            }
            table.push(per_mask);
        }
        table
    };
    // Initial lower thresholds: even with every opponent deploying, a
    // perceived share below the cost keeps an ISP out.
    let mut lower = Vec::with_capacity(n);
    for (idx, per_mask) in share_table.iter().enumerate() {
        let share = *per_mask.last().expect("table has the full-opponent mask");
        let cost = game.cost_by_index(idx);
        if share <= 0.0 {
            lower.push(f64::INFINITY);
        } else {
            lower.push(cost / share - 1.0);
        }
    }
    let upper = alloc::vec![config.upper_init; n];
    let mut history = alloc::vec![ThresholdState {
        lower,
        upper,
        round: 0,
    }];
    let tolerance = match &config.method {
        ProbabilityMethod::Quadrature => 1e-6,
        ProbabilityMethod::MonteCarlo { samples, .. } => 3.0 / fmath::sqrt(*samples as f64),
    };
    let mut rng = match &config.method {
        ProbabilityMethod::MonteCarlo { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        ProbabilityMethod::Quadrature => None,
    };
    for round in 1..=config.rounds {
        let prev = history.last().expect("history starts non-empty").clone();
        let mut next_lower = Vec::with_capacity(n);
        let mut next_upper = Vec::with_capacity(n);
        for idx in 0..n {
            let l = solve_threshold(game, config, idx, &prev.lower, &mut rng, &share_table)?;
            let u = solve_threshold(game, config, idx, &prev.upper, &mut rng, &share_table)?;
            // Enforce bracket monotonicity up to the sampling tolerance.
            if l < prev.lower[idx] - tolerance {
                return Err(DynamicsError::NonMonotonic {
                    round,
                    delta: prev.lower[idx] - l,
                });
            }
            if u > prev.upper[idx] + tolerance {
                return Err(DynamicsError::NonMonotonic {
                    round,
                    delta: u - prev.upper[idx],
                });
            }
            next_lower.push(l.max(prev.lower[idx]));
            next_upper.push(u.min(prev.upper[idx]));
        }
        history.push(ThresholdState {
            lower: next_lower,
            upper: next_upper,
            round,
        });
    }
    Ok(history)
}

/// Root of the expected perceived deploy gain in the own signal, given
/// opponents play cutoff strategies at `cutoffs`.
fn solve_threshold(
    game: &DeploymentGame,
    config: &DominanceConfig,
    idx: usize,
    cutoffs: &[f64],
    rng: &mut Option<ChaCha8Rng>,
    share_table: &[Vec<Money>],
) -> Result<f64, DynamicsError> {
    let cost = game.cost_by_index(idx);
    // For Monte Carlo, freeze one noise sample set per threshold update so
    // the bisection sees a deterministic function.
    let noise: Option<Vec<f64>> = match &config.method {
        ProbabilityMethod::MonteCarlo { samples, .. } => {
            let rng = rng.as_mut().expect("Monte Carlo method carries an rng");
            Some(
                (0..*samples)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * config.noise_sigma)
                    .collect(),
            )
        }
        ProbabilityMethod::Quadrature => None,
    };
    let gain = |theta: f64| -> f64 {
        let s = expected_share(
            game,
            config,
            idx,
            theta,
            cutoffs,
            noise.as_deref(),
            share_table,
        );
        (1.0 + theta) * s - cost
    };
    // The gain is increasing in θ; bracket the root and bisect.
    let mut lo = -1.0;
    let mut hi = 1.0;
    if gain(hi) <= 0.0 {
        let mut bracketed = false;
        for _ in 0..60 {
            hi = hi * 2.0 + 1.0;
            if gain(hi) > 0.0 {
                bracketed = true;
                break;
            }
        }
        if !bracketed {
            return Ok(f64::INFINITY);
        }
    }
    if gain(lo) > 0.0 {
        // Deploying profits even at zero perceived benefit.
        for _ in 0..60 {
            lo = lo * 2.0 - 1.0;
            if gain(lo) <= 0.0 {
                break;
            }
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if gain(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expected Shapley share of ṽ for player `idx` with signal `theta`, with
/// each opponent `j` deploying when its signal clears `cutoffs[j]`.
/// Signals share a common value: given own noise `e`, opponent `j`'s
/// signal is `(1+θ)(1+ε_j)/(1+e) - 1` with ε_j independent Gaussian.
fn expected_share(
    game: &DeploymentGame,
    config: &DominanceConfig,
    idx: usize,
    theta: f64,
    cutoffs: &[f64],
    noise: Option<&[f64]>,
    share_table: &[Vec<Money>],
) -> f64 {
    let n = game.player_count();
    let sigma = config.noise_sigma;
    let others: Vec<usize> = (0..n).filter(|&j| j != idx).collect();
    // Probability that opponent j's signal clears its cutoff, given own
    // noise e. The sign of (1+e) decides the inequality direction.
    let clear_prob = |j: usize, e: f64| -> f64 {
        let cutoff = cutoffs[j];
        if cutoff == f64::INFINITY {
            return 0.0;
        }
        if cutoff == f64::NEG_INFINITY {
            return 1.0;
        }
        if 1.0 + theta <= 0.0 {
            // A non-positive perceived scale never clears a real cutoff.
            return 0.0;
        }
        let t = (1.0 + cutoff) * (1.0 + e) / (1.0 + theta) - 1.0;
        if 1.0 + e >= 0.0 {
            1.0 - fmath::normal_cdf(t / sigma)
        } else {
            fmath::normal_cdf(t / sigma)
        }
    };
    // Conditional expected share given per-opponent deployment
    // probabilities (independent given own noise).
    let conditional = |probs: &[f64]| -> f64 {
        let mut total = 0.0;
        for mask in 0u64..(1u64 << others.len()) {
            let mut p = 1.0;
            for b in 0..others.len() {
                if mask >> b & 1 == 1 {
                    p *= probs[b];
                } else {
                    p *= 1.0 - probs[b];
                }
            }
            if p > 0.0 {
                total += p * share_table[idx][mask as usize];
            }
        }
        total
    };
    let mut probs = alloc::vec![0.0; others.len()];
    match (&config.method, noise) {
        (ProbabilityMethod::Quadrature, _) => {
            // Composite Simpson over the own-noise density.
            let half_width = 8.0 * sigma;
            let steps = 400usize;
            let h = 2.0 * half_width / steps as f64;
            let norm = 1.0 / (sigma * fmath::sqrt(2.0 * core::f64::consts::PI));
            let mut total = 0.0;
            for k in 0..=steps {
                let e = -half_width + k as f64 * h;
                let weight = if k == 0 || k == steps {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let density = norm * fmath::exp(-e * e / (2.0 * sigma * sigma));
                for (b, &j) in others.iter().enumerate() {
                    probs[b] = clear_prob(j, e);
                }
                total += weight * density * conditional(&probs);
            }
            total * h / 3.0
        }
        (ProbabilityMethod::MonteCarlo { .. }, Some(samples)) => {
            let mut total = 0.0;
            for &e in samples {
                for (b, &j) in others.iter().enumerate() {
                    probs[b] = clear_prob(j, e);
                }
                total += conditional(&probs);
            }
            total / samples.len() as f64
        }
        (ProbabilityMethod::MonteCarlo { .. }, None) => unreachable!("noise sampled upfront"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{game_with_uniform_cost, robust_equilibrium};
    use crate::model::{Flow, FlowSet, NodeId, RevenueModel, RoutePath};
    use alloc::vec;

    fn full(nodes: &[NodeId]) -> RoutePath {
        RoutePath::full_participation(nodes.to_vec()).unwrap()
    }

    /// Line game: `n` ISPs, one unit-value flow, cost `c` each.
    fn line_game(n: usize, price: f64, cost: f64) -> DeploymentGame {
        let path: Vec<NodeId> = (0..n as u32).collect();
        let flows = FlowSet::new(vec![Flow::new(1, 1.0, vec![full(&path)]).unwrap()]).unwrap();
        game_with_uniform_cost(flows, RevenueModel::all_or_nothing(price), cost).unwrap()
    }

    fn two_isp_game() -> DeploymentGame {
        line_game(2, 2.0, 0.6)
    }

    #[test]
    fn logit_step_near_zero_beta_plays_best_response() {
        // With beta -> 0 the strictly better action is kept with
        // probability ~1, so both strict equilibria are absorbing.
        let game = two_isp_game();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for start in [ActionProfile::all_ones(2), ActionProfile::all_zero(2)] {
            let mut profile = start.clone();
            let mut state = game.state_of(&profile);
            for _ in 0..100 {
                logit_step(&game, &mut profile, &mut state, |_| 1e-12, &mut rng).unwrap();
            }
            assert_eq!(profile, start);
        }
    }

    #[test]
    fn logit_step_indifferent_flips_half_the_time() {
        // Zero-value game with zero costs: every gain is 0, so the flip
        // probability is exactly 1/2.
        let game = line_game(2, 0.0, 0.0);
        let mut deploys = 0usize;
        let trials = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..trials {
            let mut profile = ActionProfile::all_zero(2);
            let mut state = game.state_of(&profile);
            logit_step(&game, &mut profile, &mut state, |_| 1.0, &mut rng).unwrap();
            if profile.deployer_count() == 1 {
                deploys += 1;
            }
        }
        let freq = deploys as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "flip frequency {freq}");
    }

    #[test]
    fn logit_step_frequencies_match_hand_logistic_values() {
        // 2-ISP game, β = 1, from the empty profile: the chosen ISP
        // deploys with probability 1/(1 + e^{0.6}), each ISP picked with
        // probability 1/2.
        let game = two_isp_game();
        let expect = 0.5 * (1.0 / (1.0 + libm::exp(0.6)));
        let trials = 60_000;
        let mut deployed = [0usize; 2];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..trials {
            let mut profile = ActionProfile::all_zero(2);
            let mut state = game.state_of(&profile);
            logit_step(&game, &mut profile, &mut state, |_| 1.0, &mut rng).unwrap();
            for idx in 0..2 {
                if profile.get(idx) {
                    deployed[idx] += 1;
                }
            }
        }
        for (idx, count) in deployed.iter().enumerate() {
            let freq = *count as f64 / trials as f64;
            assert!(
                (freq - expect).abs() < 0.01,
                "ISP {idx}: frequency {freq}, logistic value {expect}"
            );
        }
        // From (1,0) the picked deployer faces gain -0.6, the outsider
        // gain +0.4; empirical move frequencies match the logistic form.
        let stay_1 = 1.0 / (1.0 + libm::exp(-(-0.6f64)));
        let join = 1.0 / (1.0 + libm::exp(-0.4f64));
        let mut kept = 0usize;
        let mut joined = 0usize;
        for _ in 0..trials {
            let mut profile = ActionProfile::from_bits(vec![true, false]);
            let mut state = game.state_of(&profile);
            logit_step(&game, &mut profile, &mut state, |_| 1.0, &mut rng).unwrap();
            if profile.get(0) {
                kept += 1;
            }
            if profile.get(1) {
                joined += 1;
            }
        }
        let kept_freq = kept as f64 / trials as f64;
        let joined_freq = joined as f64 / trials as f64;
        assert!(
            (kept_freq - (0.5 + 0.5 * stay_1)).abs() < 0.01,
            "{kept_freq}"
        );
        assert!((joined_freq - 0.5 * join).abs() < 0.01, "{joined_freq}");
    }

    #[test]
    fn logit_transition_probabilities_match_logistic_form() {
        // 2-ISP game, β = 1: hand-computed logistic transition entries.
        let game = two_isp_game();
        let dist = logit_stationary_exact(&game, 1.0).unwrap();
        // Spot-check the transition structure through stationarity: the
        // eigenvector satisfies the Gibbs form within solver accuracy.
        for (g, e) in dist.gibbs.iter().zip(&dist.eigen) {
            assert!((g - e).abs() < 1e-9, "gibbs {g} eigen {e}");
        }
        // And the Gibbs weights are the exponentiated potentials:
        // Φ(11) = Δ(2)/2 - 2c = 1 - 1.2, Φ(10) = Φ(01) = -c.
        let phi_11 = -0.2;
        let z: f64 = [0.0, -0.6, -0.6, phi_11]
            .iter()
            .map(|&x: &f64| libm::exp(x))
            .sum();
        assert!((dist.gibbs[0] - 1.0 / z).abs() < 1e-9);
        assert!((dist.gibbs[3] - libm::exp(phi_11) / z).abs() < 1e-9);
    }

    #[test]
    fn uniform_potential_gives_uniform_distribution() {
        let game = line_game(3, 0.0, 0.0);
        let dist = logit_stationary_exact(&game, 0.7).unwrap();
        for &g in &dist.gibbs {
            assert!((g - 1.0 / 8.0).abs() < 1e-12);
        }
        for &e in &dist.eigen {
            assert!((e - 1.0 / 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gibbs_concentrates_as_beta_vanishes() {
        let game = line_game(3, 9.0, 0.5); // Φ(1) = 3 - 1.5 > 0 unique max
        let dist = logit_stationary_exact(&game, 0.01).unwrap();
        let argmax = dist
            .gibbs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 0b111);
        assert!(dist.gibbs[argmax] > 0.999);
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let game = two_isp_game();
        let config = LogitConfig::new(
            BetaSchedule::Fixed(0.5),
            500,
            InitialProfile::Bernoulli(0.5),
            42,
        );
        let a = logit_run(&game, &config).unwrap();
        let b = logit_run(&game, &config).unwrap();
        assert_eq!(a.deployer_counts, b.deployer_counts);
        assert_eq!(a.final_profile, b.final_profile);
    }

    #[test]
    fn zero_horizon_returns_initial_profile() {
        let game = two_isp_game();
        let init = ActionProfile::from_bits(vec![true, false]);
        let config = LogitConfig::new(
            BetaSchedule::Fixed(1.0),
            0,
            InitialProfile::Profile(init.clone()),
            1,
        );
        let out = logit_run(&game, &config).unwrap();
        assert_eq!(out.final_profile, init);
        assert_eq!(out.deployer_counts, vec![1]);
    }

    #[test]
    fn empirical_frequencies_approach_gibbs() {
        let game = two_isp_game();
        let beta = 1.0;
        let config = LogitConfig::new(
            BetaSchedule::Fixed(beta),
            200_000,
            InitialProfile::Profile(ActionProfile::all_zero(2)),
            9,
        );
        let run = logit_run(&game, &config).unwrap();
        let freq = run.visit_frequencies().unwrap();
        let exact = logit_stationary_exact(&game, beta).unwrap();
        let tv: f64 = freq
            .iter()
            .zip(&exact.gibbs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn annealed_runs_end_at_robust_equilibrium() {
        // Six ISPs, quadratic incremental benefits: a shallow coordination
        // dip, robust equilibrium all-ones.
        let path: Vec<NodeId> = (0..6).collect();
        let flows = FlowSet::new(vec![Flow::new(1, 1.0, vec![full(&path)]).unwrap()]).unwrap();
        let game =
            game_with_uniform_cost(flows, RevenueModel::new(12.0, 2.0, 0.0).unwrap(), 0.6).unwrap();
        let robust = robust_equilibrium(&game).unwrap();
        assert_eq!(robust.profile, ActionProfile::all_ones(6));
        let mut hits = 0;
        let runs = 50;
        for seed in 0..runs {
            let config = LogitConfig::new(
                BetaSchedule::Harmonic { beta0: 2.0 },
                4000,
                InitialProfile::Bernoulli(0.5),
                seed,
            );
            let out = logit_run(&game, &config).unwrap();
            if out.final_profile == robust.profile {
                hits += 1;
            }
        }
        assert!(hits * 100 >= runs * 95, "only {hits}/{runs} runs converged");
    }

    #[test]
    fn dominance_initialization_formula() {
        // v(C̃) = Σc: the initial lower threshold is exactly zero.
        let game = line_game(2, 1.0, 0.5);
        let config = DominanceConfig {
            rounds: 0,
            ..DominanceConfig::default()
        };
        let hist = dominance_iteration(&game, &config).unwrap();
        assert_eq!(hist.len(), 1);
        for &l in &hist[0].lower {
            assert!(l.abs() < 1e-12);
        }
    }

    #[test]
    fn dominance_first_round_worked_example() {
        // Three symmetric ISPs, total benefit 12, cost 3 each, noise 0.3:
        // the initial no-deploy bound sits at 9/12 of the true benefit,
        // and one induction round lifts it to about 1.1 times the true
        // benefit.
        let flows = FlowSet::new(vec![Flow::new(1, 1.0, vec![full(&[0, 1, 2])]).unwrap()]).unwrap();
        let game = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(12.0), 3.0).unwrap();
        let config = DominanceConfig {
            noise_sigma: 0.3,
            rounds: 1,
            ..DominanceConfig::default()
        };
        let hist = dominance_iteration(&game, &config).unwrap();
        assert!((hist[0].lower[0] - (-0.25)).abs() < 1e-12, "0.75 scale");
        let scale = 1.0 + hist[1].lower[0];
        assert!((scale - 1.1).abs() < 0.01, "round-1 scale {scale}");
    }

    #[test]
    fn dominance_brackets_monotone_and_converge() {
        for n in [2usize, 3] {
            let game = line_game(n, 1.0, 1.0 / n as f64);
            let config = DominanceConfig {
                rounds: 60,
                ..DominanceConfig::default()
            };
            let hist = dominance_iteration(&game, &config).unwrap();
            for w in hist.windows(2) {
                for i in 0..n {
                    assert!(w[1].lower[i] >= w[0].lower[i] - 1e-9);
                    assert!(w[1].upper[i] <= w[0].upper[i] + 1e-9);
                }
            }
            let last = hist.last().unwrap();
            assert!(
                last.width() < 0.05,
                "bracket width {} after 60 rounds (n={n})",
                last.width()
            );
            // Fixed point of the symmetric iteration: 1 + θ* = n.
            assert!(
                (last.lower[0] - (n as f64 - 1.0)).abs() < 0.05,
                "cutoff {} for n={n}",
                last.lower[0]
            );
        }
    }

    #[test]
    fn dominance_cutoff_increases_with_player_count() {
        let mut cutoffs = Vec::new();
        for n in [2usize, 4] {
            let game = line_game(n, 1.0, 1.0 / n as f64);
            let config = DominanceConfig {
                rounds: 80,
                ..DominanceConfig::default()
            };
            let hist = dominance_iteration(&game, &config).unwrap();
            cutoffs.push(hist.last().unwrap().lower[0]);
        }
        assert!(
            cutoffs[1] > cutoffs[0] + 0.5,
            "cutoffs {cutoffs:?} should increase with the player count"
        );
    }

    #[test]
    fn dominance_cutoff_sign_matches_robust_equilibrium() {
        // Cost below v/n^2: robust equilibrium is full deployment and the
        // converged cutoff sits below zero, so the true signal θ = 0
        // induces deployment. Cost above: cutoff positive, no deployment.
        for (cost, expect_deploy) in [(0.2, true), (0.5, false)] {
            let n = 2;
            let game = line_game(n, 1.0, cost);
            let robust = robust_equilibrium(&game).unwrap();
            assert_eq!(robust.profile == ActionProfile::all_ones(n), expect_deploy);
            let config = DominanceConfig {
                rounds: 80,
                noise_sigma: 0.1,
                ..DominanceConfig::default()
            };
            let hist = dominance_iteration(&game, &config).unwrap();
            let cutoff = hist.last().unwrap().lower[0];
            assert_eq!(cutoff < 0.0, expect_deploy, "cutoff {cutoff}");
        }
    }

    #[test]
    fn dominance_monte_carlo_agrees_with_quadrature() {
        let game = line_game(2, 1.0, 0.5);
        let quad = dominance_iteration(
            &game,
            &DominanceConfig {
                rounds: 5,
                ..DominanceConfig::default()
            },
        )
        .unwrap();
        let mc = dominance_iteration(
            &game,
            &DominanceConfig {
                rounds: 5,
                method: ProbabilityMethod::MonteCarlo {
                    samples: 60_000,
                    seed: 31,
                },
                ..DominanceConfig::default()
            },
        )
        .unwrap();
        for (q, m) in quad.iter().zip(&mc) {
            for i in 0..2 {
                assert!(
                    (q.lower[i] - m.lower[i]).abs() < 0.05,
                    "round {}: quad {} mc {}",
                    q.round,
                    q.lower[i],
                    m.lower[i]
                );
            }
        }
    }

    #[test]
    fn quadrature_rejects_asymmetric_games() {
        // Two flows give the players different roles.
        let flows = FlowSet::new(vec![
            Flow::new(1, 0.5, vec![full(&[0, 1])]).unwrap(),
            Flow::new(2, 0.5, vec![full(&[1, 2])]).unwrap(),
        ])
        .unwrap();
        let game = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(1.0), 0.3).unwrap();
        let config = DominanceConfig::default();
        assert!(matches!(
            dominance_iteration(&game, &config),
            Err(DynamicsError::BadConfig(_))
        ));
    }

    #[test]
    fn dominance_monte_carlo_on_asymmetric_game() {
        // Asymmetric roles (hub carries both flows): the Monte Carlo path
        // still produces monotone per-player brackets, and the hub, whose
        // share is larger, ends with the lower no-deploy cutoff.
        let flows = FlowSet::new(vec![
            Flow::new(1, 0.5, vec![full(&[0, 1])]).unwrap(),
            Flow::new(2, 0.5, vec![full(&[1, 2])]).unwrap(),
        ])
        .unwrap();
        let game = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(2.0), 0.4).unwrap();
        let config = DominanceConfig {
            noise_sigma: 0.3,
            rounds: 25,
            method: ProbabilityMethod::MonteCarlo {
                samples: 30_000,
                seed: 71,
            },
            ..DominanceConfig::default()
        };
        let hist = dominance_iteration(&game, &config).unwrap();
        let tol = 3.0 / (30_000f64).sqrt();
        for w in hist.windows(2) {
            for i in 0..3 {
                assert!(w[1].lower[i] >= w[0].lower[i] - tol);
                assert!(w[1].upper[i] <= w[0].upper[i] + tol);
            }
        }
        let last = hist.last().unwrap();
        // Hub is player index 1 (node 1): grand-coalition share 1.5 vs
        // 0.25 for the edges, so its cutoff sits strictly lower.
        assert!(
            last.lower[1] < last.lower[0] - 0.1,
            "hub cutoff {} vs edge cutoff {}",
            last.lower[1],
            last.lower[0]
        );
    }
}
