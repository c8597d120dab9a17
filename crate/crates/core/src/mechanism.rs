//! Coordination mechanism for stalled deployments.
//!
//! Each critical ISP submits a quote; the coordinator selects the largest
//! ISP set whose Shapley shares of ṽ cover every member's quote and pays
//! each selected ISP its share. Quoting the true launching cost is a
//! weakly dominant strategy, and with truthful quotes the selection equals
//! the largest equilibrium of the deployment game.
//!
//! For practicality the coordinator can instead tip the system over in
//! rounds: [`minimal_tipping_set`] greedily picks a small seed group
//! closing the cost gap, best response then relaxes to the next
//! equilibrium, and [`multi_round_tipping`] repeats this until the largest
//! equilibrium is reached.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::game::{best_response_from, extremal_equilibria, DeploymentGame, GameError};
use crate::model::{tilde_value, DeploymentState, Money, NodeId};
use crate::shapley::{hm_potential_table, shapley_tilde, Allocation, ShapleyError};
use crate::MONEY_EPS;

/// Player cap for exact selection by subset enumeration.
pub const SELECTION_ENUMERATION_CAP: usize = 20;

/// Quote multipliers spanned by the truthfulness verification harness.
pub const QUOTE_MULTIPLIERS: [f64; 9] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 4.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub enum MechanismError {
    /// Too many players for exact selection and quotes differ from costs,
    /// so the largest-equilibrium shortcut does not apply either.
    CapExceeded {
        size: usize,
        cap: usize,
    },
    /// The tipping step was asked to grow a set that is already the
    /// largest equilibrium.
    NoProgress,
    Game(GameError),
    Shapley(ShapleyError),
    UnknownPlayer(NodeId),
}

impl From<GameError> for MechanismError {
    fn from(e: GameError) -> Self {
        MechanismError::Game(e)
    }
}

impl From<ShapleyError> for MechanismError {
    fn from(e: ShapleyError) -> Self {
        MechanismError::Shapley(e)
    }
}

impl core::fmt::Display for MechanismError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MechanismError::CapExceeded { size, cap } => write!(
                f,
                "{size} players exceed the exact selection cap of {cap} and quotes differ from costs"
            ),
            MechanismError::NoProgress => {
                write!(f, "deployed set already equals the largest equilibrium")
            }
            MechanismError::Game(e) => write!(f, "{e}"),
            MechanismError::Shapley(e) => write!(f, "{e}"),
            MechanismError::UnknownPlayer(n) => write!(f, "ISP {n} is not a player"),
        }
    }
}

impl core::error::Error for MechanismError {}

/// Per-player quotes, aligned with the game's player order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteProfile {
    values: Vec<Money>,
}

impl QuoteProfile {
    pub fn from_values(values: Vec<Money>) -> Self {
        QuoteProfile { values }
    }

    /// Truthful profile: every ISP quotes its launching cost.
    pub fn from_costs(game: &DeploymentGame) -> Self {
        QuoteProfile {
            values: (0..game.player_count())
                .map(|i| game.cost_by_index(i))
                .collect(),
        }
    }

    pub fn from_map(
        game: &DeploymentGame,
        quotes: &BTreeMap<NodeId, Money>,
    ) -> Result<Self, MechanismError> {
        let mut values = Vec::with_capacity(game.player_count());
        for &p in game.players() {
            match quotes.get(&p) {
                Some(&q) => values.push(q),
                None => return Err(MechanismError::UnknownPlayer(p)),
            }
        }
        Ok(QuoteProfile { values })
    }

    pub fn get(&self, idx: usize) -> Money {
        self.values[idx]
    }

    pub fn set(&mut self, idx: usize, quote: Money) {
        self.values[idx] = quote;
    }

    pub fn with_quote(&self, idx: usize, quote: Money) -> Self {
        let mut q = self.clone();
        q.set(idx, quote);
        q
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn equals_costs(&self, game: &DeploymentGame) -> bool {
        (0..game.player_count())
            .all(|i| (self.values[i] - game.cost_by_index(i)).abs() <= MONEY_EPS)
    }
}

/// Precomputed ṽ and Hart–Mas-Colell potential over every player subset;
/// the workhorse behind exact selection and the truthfulness harness.
#[derive(Debug, Clone)]
pub struct SelectionContext {
    players: Vec<NodeId>,
    tilde: Vec<Money>,
    hm: Vec<Money>,
}

impl SelectionContext {
    pub fn new(game: &DeploymentGame) -> Result<Self, MechanismError> {
        let n = game.player_count();
        if n > SELECTION_ENUMERATION_CAP {
            return Err(MechanismError::CapExceeded {
                size: n,
                cap: SELECTION_ENUMERATION_CAP,
            });
        }
        let capacity = game.network().node_count();
        let flows = game.flows();
        let model = game.model();
        let value = |coal: &[NodeId]| {
            let st = DeploymentState::from_nodes(capacity, coal.iter().copied())
                .expect("players are in range");
            tilde_value(flows, &st, model)
        };
        let players = game.players().to_vec();
        let tilde = crate::shapley::value_table(&players, value);
        let hm = hm_potential_table(&players, value)?;
        Ok(SelectionContext { players, tilde, hm })
    }

    pub fn players(&self) -> &[NodeId] {
        &self.players
    }

    pub fn tilde(&self, mask: u64) -> Money {
        self.tilde[mask as usize]
    }

    /// Shapley share of ṽ for member `idx` within coalition `mask`.
    pub fn share(&self, mask: u64, idx: usize) -> Money {
        debug_assert!(mask >> idx & 1 == 1);
        self.hm[mask as usize] - self.hm[(mask & !(1 << idx)) as usize]
    }

    fn feasible(&self, mask: u64, quotes: &QuoteProfile) -> bool {
        for idx in 0..self.players.len() {
            if mask >> idx & 1 == 1 && self.share(mask, idx) < quotes.get(idx) - MONEY_EPS {
                return false;
            }
        }
        true
    }

    fn members(&self, mask: u64) -> Vec<NodeId> {
        self.players
            .iter()
            .enumerate()
            .filter(|(idx, _)| mask >> idx & 1 == 1)
            .map(|(_, &p)| p)
            .collect()
    }

    /// The coordinator's selection rule: the largest feasible set, ties
    /// broken by higher ṽ, then by lexicographically smallest member list.
    pub fn select_max_cardinality(&self, quotes: &QuoteProfile) -> u64 {
        let n = self.players.len();
        let mut best: u64 = 0;
        let mut best_size = 0usize;
        let mut best_tilde = 0.0;
        for mask in 0u64..(1u64 << n) {
            if !self.feasible(mask, quotes) {
                continue;
            }
            let size = mask.count_ones() as usize;
            let tv = self.tilde(mask);
            let better = size > best_size
                || (size == best_size && tv > best_tilde + MONEY_EPS)
                || (size == best_size
                    && (tv - best_tilde).abs() <= MONEY_EPS
                    && self.members(mask) < self.members(best));
            if better {
                best = mask;
                best_size = size;
                best_tilde = tv;
            }
        }
        best
    }

    /// Deliberately different objective (maximize ṽ instead of set size);
    /// not truthful in general. Kept as the negative control for the
    /// truthfulness harness.
    pub fn select_max_value(&self, quotes: &QuoteProfile) -> u64 {
        let n = self.players.len();
        let mut best: u64 = 0;
        let mut best_tilde = f64::NEG_INFINITY;
        for mask in 0u64..(1u64 << n) {
            if !self.feasible(mask, quotes) {
                continue;
            }
            let tv = self.tilde(mask);
            let better = tv > best_tilde + MONEY_EPS
                || ((tv - best_tilde).abs() <= MONEY_EPS
                    && self.members(mask) < self.members(best));
            if better {
                best = mask;
                best_tilde = tv;
            }
        }
        best
    }
}

/// Result of the coordinator's ISP selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub selected: Vec<NodeId>,
    /// Announced reward of each selected ISP (its Shapley share of ṽ).
    pub rewards: Allocation,
    /// False when the largest-equilibrium shortcut was used instead of
    /// exhaustive enumeration.
    pub exact: bool,
}

/// Selects the ISP set to deploy: the largest set in which every member's
/// Shapley share of ṽ covers its quote.
///
/// Exhaustive for at most [`SELECTION_ENUMERATION_CAP`] players; beyond
/// that quotes must equal costs, in which case the optimum is the largest
/// equilibrium of the deployment game.
pub fn select_isps(
    game: &DeploymentGame,
    quotes: &QuoteProfile,
) -> Result<Selection, MechanismError> {
    let n = game.player_count();
    if n <= SELECTION_ENUMERATION_CAP {
        let ctx = SelectionContext::new(game)?;
        let mask = ctx.select_max_cardinality(quotes);
        let selected = ctx.members(mask);
        let rewards = selected
            .iter()
            .map(|&p| {
                let idx = game.player_index(p).expect("selected node is a player");
                (p, ctx.share(mask, idx))
            })
            .collect();
        Ok(Selection {
            selected,
            rewards,
            exact: true,
        })
    } else if quotes.equals_costs(game) {
        let (_, largest) = extremal_equilibria(game)?;
        let selected = game.deployers(&largest);
        let state = game.state_of(&largest);
        let rewards = shapley_tilde(game.flows(), &state, game.model())?;
        Ok(Selection {
            selected,
            rewards,
            exact: false,
        })
    } else {
        Err(MechanismError::CapExceeded {
            size: n,
            cap: SELECTION_ENUMERATION_CAP,
        })
    }
}

/// Total amount by which members' costs exceed their Shapley shares:
/// `Σ_{i∈S} max(c_i - ϕ_i(S, ṽ), 0)`. Zero exactly when every member's
/// share covers its cost.
pub fn gap(game: &DeploymentGame, members: &[NodeId]) -> Result<Money, MechanismError> {
    if members.is_empty() {
        return Ok(0.0);
    }
    let state = DeploymentState::from_nodes(game.network().node_count(), members.iter().copied())
        .map_err(|_| MechanismError::UnknownPlayer(members[0]))?;
    let shares = shapley_tilde(game.flows(), &state, game.model())?;
    let mut total = 0.0;
    for &p in members {
        let idx = game
            .player_index(p)
            .ok_or(MechanismError::UnknownPlayer(p))?;
        let deficit = game.cost_by_index(idx) - shares.get(p);
        if deficit > 0.0 {
            total += deficit;
        }
    }
    Ok(total)
}

fn gap_is_zero(g: Money) -> bool {
    g <= MONEY_EPS
}

/// Greedy minimal tipping set: starting from a random non-deployer, add
/// the ISP minimizing the remaining cost gap until the gap closes (falling
/// back to the largest equilibrium's complement if everyone gets added),
/// then prune members whose removal keeps the gap closed, in ascending id
/// order. The result is disjoint from `deployed` and non-empty.
pub fn minimal_tipping_set(
    game: &DeploymentGame,
    deployed: &[NodeId],
    rng: &mut impl Rng,
) -> Result<Vec<NodeId>, MechanismError> {
    let (_, largest) = extremal_equilibria(game)?;
    let largest_nodes = game.deployers(&largest);
    let deployed_profile = game.profile_of(deployed.iter().copied())?;
    if deployed_profile == largest {
        return Err(MechanismError::NoProgress);
    }
    let candidates: Vec<NodeId> = game
        .players()
        .iter()
        .copied()
        .filter(|p| !deployed.contains(p))
        .collect();
    let mut tipped: Vec<NodeId> = Vec::new();
    tipped.push(candidates[rng.random_range(0..candidates.len())]);
    let mut union: Vec<NodeId> = deployed.to_vec();
    union.extend_from_slice(&tipped);
    while !gap_is_zero(gap(game, &union)?) {
        if union.len() == game.player_count() {
            tipped = largest_nodes
                .iter()
                .copied()
                .filter(|p| !deployed.contains(p))
                .collect();
            union = deployed.to_vec();
            union.extend_from_slice(&tipped);
            break;
        }
        let mut best: Option<(NodeId, Money)> = None;
        for &cand in &candidates {
            if tipped.contains(&cand) {
                continue;
            }
            let mut trial = union.clone();
            trial.push(cand);
            let g = gap(game, &trial)?;
            match best {
                Some((node, g_best)) if g_best < g || (g_best == g && node < cand) => {}
                _ => best = Some((cand, g)),
            }
        }
        let (chosen, _) = best.expect("candidates remain while union is not everyone");
        tipped.push(chosen);
        union.push(chosen);
    }
    // Prune redundant members in ascending id order until stable.
    tipped.sort_unstable();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..tipped.len() {
            if tipped.len() == 1 {
                break;
            }
            let mut reduced: Vec<NodeId> = deployed.to_vec();
            reduced.extend(
                tipped
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, &p)| p),
            );
            if gap_is_zero(gap(game, &reduced)?) {
                tipped.remove(i);
                changed = true;
                break;
            }
        }
    }
    Ok(tipped)
}

/// One round of the multi-round tipping process.
#[derive(Debug, Clone, PartialEq)]
pub struct TippingRound {
    /// ISPs the coordinator assigned to deploy this round.
    pub tipped: Vec<NodeId>,
    /// Deployed set after best response relaxes to the next equilibrium.
    pub equilibrium: Vec<NodeId>,
    /// Announced rewards for the assigned-plus-deployed set of this round.
    pub rewards: Allocation,
}

/// Trace of the multi-round tipping process.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TippingTrace {
    pub rounds: Vec<TippingRound>,
    /// True when the process reached the largest equilibrium.
    pub terminated: bool,
}

impl TippingTrace {
    pub fn total_tipped(&self) -> usize {
        self.rounds.iter().map(|r| r.tipped.len()).sum()
    }

    pub fn final_deployers(&self) -> &[NodeId] {
        self.rounds
            .last()
            .map(|r| r.equilibrium.as_slice())
            .unwrap_or(&[])
    }
}

/// Runs tipping rounds with truthful quotes until the largest equilibrium
/// is reached: each round selects a minimal tipping set, assigns it, and
/// lets best response relax to the next equilibrium.
pub fn multi_round_tipping(
    game: &DeploymentGame,
    rng: &mut impl Rng,
) -> Result<TippingTrace, MechanismError> {
    let (smallest, largest) = extremal_equilibria(game)?;
    let mut current = smallest;
    let mut trace = TippingTrace::default();
    if current == largest {
        trace.terminated = true;
        return Ok(trace);
    }
    for _ in 0..=game.player_count() {
        let deployed = game.deployers(&current);
        let tipped = minimal_tipping_set(game, &deployed, rng)?;
        let mut union_profile = current.clone();
        for &p in &tipped {
            let idx = game
                .player_index(p)
                .ok_or(MechanismError::UnknownPlayer(p))?;
            union_profile.set(idx, true);
        }
        let union_state = game.state_of(&union_profile);
        let rewards = shapley_tilde(game.flows(), &union_state, game.model())?;
        let next = best_response_from(game, &union_profile)?;
        trace.rounds.push(TippingRound {
            tipped,
            equilibrium: game.deployers(&next),
            rewards,
        });
        if next == current {
            // No growth: give up rather than loop (the precondition of a
            // supermodular game is violated).
            return Ok(trace);
        }
        current = next;
        if current == largest {
            trace.terminated = true;
            return Ok(trace);
        }
    }
    Ok(trace)
}

/// Options for the truthfulness verification harness.
#[derive(Debug, Clone)]
pub struct TruthfulnessOptions {
    /// Number of random opponent-quote profiles to draw.
    pub opponent_samples: usize,
    pub seed: u64,
    /// Multipliers applied to opponents' costs when sampling their quotes.
    pub multipliers: Vec<f64>,
}

impl Default for TruthfulnessOptions {
    fn default() -> Self {
        TruthfulnessOptions {
            opponent_samples: 20,
            seed: 0,
            multipliers: QUOTE_MULTIPLIERS.to_vec(),
        }
    }
}

/// Worst deviation found by the truthfulness harness.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthfulnessOutcome {
    /// True when no quote beat the truthful quote by more than `1e-9`.
    pub truthful: bool,
    /// Maximum utility gain over the truthful quote across the search.
    pub worst_deviation: Money,
    /// The quote and opponent profile achieving the worst deviation.
    pub witness: Option<(Money, Vec<Money>)>,
}

/// Grid of candidate quotes spanning the harness multipliers around a cost.
pub fn default_quote_grid(cost: Money) -> Vec<Money> {
    QUOTE_MULTIPLIERS.iter().map(|m| m * cost).collect()
}

/// Checks that quoting the launching cost weakly dominates every quote on
/// `grid` for player `node`, against sampled opponent quotes, under the
/// real selection rule.
pub fn truthfulness_check(
    game: &DeploymentGame,
    node: NodeId,
    grid: &[Money],
    opts: &TruthfulnessOptions,
) -> Result<TruthfulnessOutcome, MechanismError> {
    let ctx = SelectionContext::new(game)?;
    truthfulness_check_with_selector(game, node, grid, opts, &ctx, |ctx, quotes| {
        ctx.select_max_cardinality(quotes)
    })
}

/// [`truthfulness_check`] under an arbitrary selection rule; used to show
/// the harness catches non-truthful selectors (negative control).
pub fn truthfulness_check_with_selector(
    game: &DeploymentGame,
    node: NodeId,
    grid: &[Money],
    opts: &TruthfulnessOptions,
    ctx: &SelectionContext,
    mut selector: impl FnMut(&SelectionContext, &QuoteProfile) -> u64,
) -> Result<TruthfulnessOutcome, MechanismError> {
    let idx = game
        .player_index(node)
        .ok_or(MechanismError::UnknownPlayer(node))?;
    let cost = game.cost_by_index(idx);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    use rand::SeedableRng;
    let mut worst: Money = 0.0;
    let mut witness = None;
    let utility_of = |ctx: &SelectionContext, mask: u64| -> Money {
        if mask >> idx & 1 == 1 {
            ctx.share(mask, idx) - cost
        } else {
            0.0
        }
    };
    for sample in 0..=opts.opponent_samples {
        // Sample 0 is the all-truthful opponent profile.
        let mut quotes = QuoteProfile::from_costs(game);
        if sample > 0 {
            for j in 0..game.player_count() {
                if j != idx {
                    let m = opts.multipliers[rng.random_range(0..opts.multipliers.len())];
                    quotes.set(j, m * game.cost_by_index(j));
                }
            }
        }
        let truthful_mask = selector(ctx, &quotes);
        let truthful_utility = utility_of(ctx, truthful_mask);
        for &q in grid {
            let deviated = quotes.with_quote(idx, q);
            let mask = selector(ctx, &deviated);
            let gain = utility_of(ctx, mask) - truthful_utility;
            if gain > worst {
                worst = gain;
                witness = Some((
                    q,
                    (0..game.player_count()).map(|j| deviated.get(j)).collect(),
                ));
            }
        }
    }
    Ok(TruthfulnessOutcome {
        truthful: worst <= MONEY_EPS,
        worst_deviation: worst,
        witness,
    })
}
