//! The strategic deployment game.
//!
//! Players are the critical ISPs. Each one either deploys (paying its
//! launching cost and receiving its distributed revenue share) or stays
//! out (absorbing whatever revenue change the deployment of others causes
//! it). The game admits a potential function whose unilateral differences
//! equal utility differences; equilibria are its local maxima and the
//! *robust* equilibrium is its global maximizer.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::model::{
    coalition_value, critical_isps, isp_delta, DeploymentState, FlowSet, Money, Network, NodeId,
    RevenueModel,
};
use crate::shapley::{self, hm_potential_table, shapley_tilde_single, ShapleyError};

#[derive(Debug, Clone, PartialEq)]
pub enum GameError {
    /// A cost is missing or negative, or the player list is inconsistent.
    InvalidCosts(NodeId),
    /// Best-response iteration exceeded its safety bound; the instance is
    /// likely not supermodular.
    NonConvergence,
    /// Too many players for an exact computation.
    CapExceeded { size: usize, cap: usize },
    /// Underlying share computation failed.
    Shapley(ShapleyError),
    /// A closed form was invoked outside its preconditions.
    PreconditionViolated(&'static str),
    /// Named player is not part of the game.
    UnknownPlayer(NodeId),
}

impl From<ShapleyError> for GameError {
    fn from(e: ShapleyError) -> Self {
        GameError::Shapley(e)
    }
}

impl core::fmt::Display for GameError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GameError::InvalidCosts(n) => write!(f, "missing or negative cost for ISP {n}"),
            GameError::NonConvergence => {
                write!(f, "best-response iteration exceeded its safety bound")
            }
            GameError::CapExceeded { size, cap } => {
                write!(f, "{size} players exceed the exact cap of {cap}")
            }
            GameError::Shapley(e) => write!(f, "share computation failed: {e}"),
            GameError::PreconditionViolated(msg) => write!(f, "{msg}"),
            GameError::UnknownPlayer(n) => write!(f, "ISP {n} is not a player"),
        }
    }
}

impl core::error::Error for GameError {}

/// Binary action profile over the game's player order (1 = deploy).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionProfile {
    bits: Vec<bool>,
}

impl ActionProfile {
    pub fn all_zero(players: usize) -> Self {
        ActionProfile {
            bits: alloc::vec![false; players],
        }
    }

    pub fn all_ones(players: usize) -> Self {
        ActionProfile {
            bits: alloc::vec![true; players],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        ActionProfile { bits }
    }

    pub fn from_mask(players: usize, mask: u64) -> Self {
        ActionProfile {
            bits: (0..players).map(|b| mask >> b & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |m, (b, &v)| if v { m | 1 << b } else { m })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn set(&mut self, idx: usize, deploy: bool) {
        self.bits[idx] = deploy;
    }

    pub fn with_action(&self, idx: usize, deploy: bool) -> Self {
        let mut p = self.clone();
        p.set(idx, deploy);
        p
    }

    pub fn deployer_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Component-wise `self <= other`.
    pub fn le(&self, other: &ActionProfile) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// The architecture deployment game: network, flows, revenue model, the
/// critical ISPs as players, and per-player launching costs.
#[derive(Debug, Clone)]
pub struct DeploymentGame {
    network: Network,
    flows: FlowSet,
    model: RevenueModel,
    players: Vec<NodeId>,
    costs: Vec<Money>,
}

impl DeploymentGame {
    /// Builds the game; the player set is the union of primary-path
    /// critical ISPs and `costs` must provide a non-negative cost for each.
    pub fn new(
        network: Network,
        flows: FlowSet,
        model: RevenueModel,
        costs: &BTreeMap<NodeId, Money>,
    ) -> Result<Self, GameError> {
        let players: Vec<NodeId> = critical_isps(&flows).into_iter().collect();
        let mut cost_vec = Vec::with_capacity(players.len());
        for &p in &players {
            match costs.get(&p) {
                Some(&c) if c >= 0.0 && c.is_finite() => cost_vec.push(c),
                _ => return Err(GameError::InvalidCosts(p)),
            }
        }
        Ok(DeploymentGame {
            network,
            flows,
            model,
            players,
            costs: cost_vec,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn flows(&self) -> &FlowSet {
        &self.flows
    }

    pub fn model(&self) -> &RevenueModel {
        &self.model
    }

    /// Same game under a different revenue model (used by price sweeps).
    pub fn with_model(&self, model: RevenueModel) -> Self {
        let mut g = self.clone();
        g.model = model;
        g
    }

    /// Same game with different flows (used by flattening sweeps). The
    /// player set is recomputed; costs must cover it.
    pub fn with_flows(
        &self,
        flows: FlowSet,
        costs: &BTreeMap<NodeId, Money>,
    ) -> Result<Self, GameError> {
        DeploymentGame::new(self.network.clone(), flows, self.model, costs)
    }

    /// Replaces every launching cost, keeping the player set.
    pub fn with_costs(&self, costs: &BTreeMap<NodeId, Money>) -> Result<Self, GameError> {
        let mut g = self.clone();
        for (idx, &p) in self.players.iter().enumerate() {
            match costs.get(&p) {
                Some(&c) if c >= 0.0 && c.is_finite() => g.costs[idx] = c,
                _ => return Err(GameError::InvalidCosts(p)),
            }
        }
        Ok(g)
    }

    /// Ordered player list (ascending ISP id).
    pub fn players(&self) -> &[NodeId] {
        &self.players
    }

    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    pub fn player_index(&self, node: NodeId) -> Option<usize> {
        self.players.binary_search(&node).ok()
    }

    pub fn cost_by_index(&self, idx: usize) -> Money {
        self.costs[idx]
    }

    pub fn cost(&self, node: NodeId) -> Option<Money> {
        self.player_index(node).map(|i| self.costs[i])
    }

    pub fn total_cost(&self) -> Money {
        self.costs.iter().sum()
    }

    /// Deployment set corresponding to an action profile.
    pub fn state_of(&self, a: &ActionProfile) -> DeploymentState {
        let mut s = DeploymentState::empty(self.network.node_count());
        for (idx, &p) in self.players.iter().enumerate() {
            if a.get(idx) {
                s.insert(p);
            }
        }
        s
    }

    /// Action profile whose deployers are exactly `nodes` (players only).
    pub fn profile_of(
        &self,
        nodes: impl IntoIterator<Item = NodeId>,
    ) -> Result<ActionProfile, GameError> {
        let mut a = ActionProfile::all_zero(self.players.len());
        for n in nodes {
            let idx = self.player_index(n).ok_or(GameError::UnknownPlayer(n))?;
            a.set(idx, true);
        }
        Ok(a)
    }

    /// Deployer nodes of a profile.
    pub fn deployers(&self, a: &ActionProfile) -> Vec<NodeId> {
        self.players
            .iter()
            .enumerate()
            .filter(|(idx, _)| a.get(*idx))
            .map(|(_, &p)| p)
            .collect()
    }

    /// Utility difference between deploying and not deploying for player
    /// `idx`, with the other players fixed at `others`: the Shapley share
    /// of ṽ in the post-deployment coalition minus the launching cost.
    pub fn deploy_gain(&self, others: &DeploymentState, idx: usize) -> Result<Money, GameError> {
        let node = self.players[idx];
        let with = others.with(node);
        let share = shapley_tilde_single(&self.flows, &with, &self.model, node)?;
        Ok(share - self.costs[idx])
    }
}

/// Utility of player `node` under profile `a`: distributed revenue share
/// minus cost for deployers, revenue change from others' deployment for
/// everyone else.
pub fn utility(game: &DeploymentGame, a: &ActionProfile, node: NodeId) -> Result<Money, GameError> {
    let idx = game
        .player_index(node)
        .ok_or(GameError::UnknownPlayer(node))?;
    let s = game.state_of(a);
    if a.get(idx) {
        let share = shapley::distribution_mechanism(&game.flows, &s, &game.model)?.get(node);
        Ok(share - game.costs[idx])
    } else {
        let mut delta = 0.0;
        for (fidx, fl) in game.flows.iter().enumerate() {
            if fl.primary().contains(node) {
                delta += isp_delta(&game.flows, fidx, node, &s, &game.model);
            }
        }
        Ok(delta)
    }
}

/// Closed-form potential for fixed routing without losses: the summed
/// immediate benefits of each deployment rank minus total deployed cost.
pub fn potential_closed_form(game: &DeploymentGame, a: &ActionProfile) -> Result<Money, GameError> {
    if !game.flows.fixed_routing() || game.model.loss_scale != 0.0 {
        return Err(GameError::PreconditionViolated(
            "closed-form potential requires fixed routing and no revenue loss",
        ));
    }
    let s = game.state_of(a);
    let mut phi = 0.0;
    for fl in game.flows() {
        let critical = fl.primary().critical();
        let c = critical.len();
        if c == 0 {
            continue;
        }
        let n = critical.iter().filter(|&&x| s.contains(x)).count();
        for m in 1..=n {
            phi += game.model.benefit(m, c, fl.weight()) / m as f64;
        }
    }
    for (idx, &cost) in game.costs.iter().enumerate() {
        if a.get(idx) {
            phi -= cost;
        }
    }
    Ok(phi)
}

/// Immediate-benefit part `B(S)` of the closed-form potential.
pub fn immediate_benefit_closed_form(
    game: &DeploymentGame,
    a: &ActionProfile,
) -> Result<Money, GameError> {
    let mut phi = potential_closed_form(game, a)?;
    for (idx, &cost) in game.costs.iter().enumerate() {
        if a.get(idx) {
            phi += cost;
        }
    }
    Ok(phi)
}

/// General potential: utility differences telescoped along the fixed
/// player order from the all-zero profile. The result is independent of
/// the chosen order.
pub fn potential_general(game: &DeploymentGame, a: &ActionProfile) -> Result<Money, GameError> {
    potential_general_ordered(game, a, None)
}

/// [`potential_general`] along an explicit insertion order of player
/// indices (testing hook for order independence).
pub fn potential_general_ordered(
    game: &DeploymentGame,
    a: &ActionProfile,
    order: Option<&[usize]>,
) -> Result<Money, GameError> {
    let default_order: Vec<usize> = (0..game.player_count()).collect();
    let order = order.unwrap_or(&default_order);
    let mut s = DeploymentState::empty(game.network.node_count());
    let mut phi = 0.0;
    for &idx in order {
        if a.get(idx) {
            phi += game.deploy_gain(&s, idx)?;
            s.insert(game.players[idx]);
        }
    }
    Ok(phi)
}

/// Potential by the cheapest valid route.
pub fn potential(game: &DeploymentGame, a: &ActionProfile) -> Result<Money, GameError> {
    if game.flows.fixed_routing() && game.model.loss_scale == 0.0 {
        potential_closed_form(game, a)
    } else {
        potential_general(game, a)
    }
}

/// Potential of every profile, indexed by mask over the player order.
pub fn potential_table(game: &DeploymentGame) -> Result<Vec<Money>, GameError> {
    let n = game.player_count();
    if n > 25 {
        return Err(GameError::CapExceeded { size: n, cap: 25 });
    }
    if game.flows.fixed_routing() && game.model.loss_scale == 0.0 {
        let mut out = Vec::with_capacity(1usize << n);
        for mask in 0u64..(1u64 << n) {
            out.push(potential_closed_form(
                game,
                &ActionProfile::from_mask(n, mask),
            )?);
        }
        Ok(out)
    } else {
        let capacity = game.network.node_count();
        let flows = &game.flows;
        let model = &game.model;
        let hm = hm_potential_table(game.players(), |coal| {
            let st = DeploymentState::from_nodes(capacity, coal.iter().copied())
                .expect("players are in range");
            crate::model::tilde_value(flows, &st, model)
        })?;
        let mut out = Vec::with_capacity(1usize << n);
        for (mask, &p) in hm.iter().enumerate() {
            let mut cost = 0.0;
            for (idx, &c) in game.costs.iter().enumerate() {
                if mask >> idx & 1 == 1 {
                    cost += c;
                }
            }
            out.push(p - cost);
        }
        Ok(out)
    }
}

/// Whether `a` is a pure Nash equilibrium; `strict` demands every
/// unilateral deviation to be strictly worse.
pub fn is_equilibrium(
    game: &DeploymentGame,
    a: &ActionProfile,
    strict: bool,
) -> Result<bool, GameError> {
    let s = game.state_of(a);
    for idx in 0..game.player_count() {
        let node = game.players()[idx];
        let others = if a.get(idx) {
            s.without(node)
        } else {
            s.clone()
        };
        let gain = game.deploy_gain(&others, idx)?;
        let ok = if a.get(idx) {
            if strict {
                gain > 0.0
            } else {
                gain >= 0.0
            }
        } else if strict {
            gain < 0.0
        } else {
            gain <= 0.0
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Round-robin best-response iteration from `start` until no player can
/// strictly improve. Ties keep the current action, which makes the
/// dynamics monotone on supermodular instances.
pub fn best_response_from(
    game: &DeploymentGame,
    start: &ActionProfile,
) -> Result<ActionProfile, GameError> {
    let n = game.player_count();
    let mut a = start.clone();
    if n == 0 {
        return Ok(a);
    }
    let mut s = game.state_of(&a);
    // Safety net against non-supermodular cycling: |players| * 2^|players|
    // updates, capped so huge games still fail fast (real convergence
    // takes at most |players| + 1 passes).
    let bound: u64 = (n as u64)
        .saturating_mul(1u64.checked_shl(n.min(40) as u32).unwrap_or(u64::MAX))
        .min(10_000_000);
    let mut updates: u64 = 0;
    loop {
        let mut changed = false;
        for idx in 0..n {
            let node = game.players()[idx];
            let others = if a.get(idx) {
                s.without(node)
            } else {
                s.clone()
            };
            let gain = game.deploy_gain(&others, idx)?;
            let desired = if gain > 0.0 {
                true
            } else if gain < 0.0 {
                false
            } else {
                a.get(idx) // stay on ties
            };
            if desired != a.get(idx) {
                a.set(idx, desired);
                if desired {
                    s.insert(node);
                } else {
                    s.remove(node);
                }
                changed = true;
            }
            updates += 1;
            if updates >= bound {
                return Err(GameError::NonConvergence);
            }
        }
        if !changed {
            return Ok(a);
        }
    }
}

/// Smallest and largest equilibria via best response from the all-zero and
/// all-ones profiles.
pub fn extremal_equilibria(
    game: &DeploymentGame,
) -> Result<(ActionProfile, ActionProfile), GameError> {
    let n = game.player_count();
    let smallest = best_response_from(game, &ActionProfile::all_zero(n))?;
    let largest = best_response_from(game, &ActionProfile::all_ones(n))?;
    Ok((smallest, largest))
}

/// Outcome of robust-equilibrium selection.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustSelection {
    pub profile: ActionProfile,
    /// Set when the profile came from local search rather than exhaustive
    /// potential maximization.
    pub heuristic: bool,
    pub potential: Money,
}

/// Player cap for exhaustive robust-equilibrium enumeration.
pub const ROBUST_ENUMERATION_CAP: usize = 20;

/// The equilibrium that maximizes the potential function.
///
/// Up to [`ROBUST_ENUMERATION_CAP`] free players the maximizer is found by
/// enumerating all profiles between the extremal equilibria (the global
/// maximizer always lies there). Larger games fall back to
/// best-improvement local search from both extremal equilibria and flag
/// the result as heuristic. Ties prefer the profile dominating every other
/// maximizer when one exists, otherwise the lexicographically smallest.
pub fn robust_equilibrium(game: &DeploymentGame) -> Result<RobustSelection, GameError> {
    let n = game.player_count();
    let (smallest, largest) = extremal_equilibria(game)?;
    let free: Vec<usize> = (0..n)
        .filter(|&i| !smallest.get(i) && largest.get(i))
        .collect();
    if free.len() <= ROBUST_ENUMERATION_CAP {
        let mut best_value = f64::NEG_INFINITY;
        let mut maximizers_or: u64 = 0;
        let mut lex_smallest: Option<ActionProfile> = None;
        for sub in 0u64..(1u64 << free.len()) {
            let mut a = smallest.clone();
            for (b, &idx) in free.iter().enumerate() {
                if sub >> b & 1 == 1 {
                    a.set(idx, true);
                }
            }
            let phi = potential(game, &a)?;
            if phi > best_value {
                best_value = phi;
                maximizers_or = a.mask();
                lex_smallest = Some(a);
            } else if phi == best_value {
                maximizers_or |= a.mask();
                if let Some(champ) = &lex_smallest {
                    if a.bits() < champ.bits() {
                        lex_smallest = Some(a);
                    }
                }
            }
        }
        let lex = lex_smallest.expect("at least one profile enumerated");
        let or_profile = ActionProfile::from_mask(n, maximizers_or);
        let profile = if or_profile != lex && potential(game, &or_profile)? == best_value {
            or_profile
        } else {
            lex
        };
        Ok(RobustSelection {
            profile,
            heuristic: false,
            potential: best_value,
        })
    } else {
        let mut best: Option<(ActionProfile, Money)> = None;
        for start in [smallest, largest] {
            let (cand, phi) = local_search(game, start)?;
            match &best {
                Some((_, best_phi)) if *best_phi >= phi => {}
                _ => best = Some((cand, phi)),
            }
        }
        let (profile, phi) = best.expect("two starts evaluated");
        Ok(RobustSelection {
            profile,
            heuristic: true,
            potential: phi,
        })
    }
}

/// Best-improvement single-flip local search on the potential.
fn local_search(
    game: &DeploymentGame,
    start: ActionProfile,
) -> Result<(ActionProfile, Money), GameError> {
    let n = game.player_count();
    let mut current = start;
    let mut current_phi = potential(game, &current)?;
    loop {
        let mut best_move: Option<(usize, Money)> = None;
        let s = game.state_of(&current);
        for idx in 0..n {
            let node = game.players()[idx];
            let others = if current.get(idx) {
                s.without(node)
            } else {
                s.clone()
            };
            let gain = game.deploy_gain(&others, idx)?;
            // Flipping idx changes the potential by ±gain.
            let delta = if current.get(idx) { -gain } else { gain };
            if delta > 0.0 {
                match best_move {
                    Some((_, best_delta)) if best_delta >= delta => {}
                    _ => best_move = Some((idx, delta)),
                }
            }
        }
        match best_move {
            Some((idx, delta)) => {
                let flipped = !current.get(idx);
                current.set(idx, flipped);
                current_phi += delta;
            }
            None => return Ok((current, current_phi)),
        }
    }
}

/// Deployability verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deployability {
    Deployable,
    NotDeployable,
}

/// Certificate backing a deployability verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployabilityCertificate {
    pub verdict: Deployability,
    /// Total benefit at full critical deployment, `v(C̃)`.
    pub total_value: Money,
    /// Total immediate benefits `B(C̃) = Φ(1) + Σ c_i`.
    pub immediate_benefit: Money,
    pub total_cost: Money,
    pub phi_all_ones: Money,
    pub phi_all_zero: Money,
    /// Whether the total benefit covers the total cost.
    pub profitable: bool,
    /// Whether the immediate benefits cover the total cost, equivalently
    /// `Φ(1) >= Φ(0)`.
    pub necessary_condition: bool,
}

/// Evaluates whether full deployment is the robust outcome: the potential
/// at all-ones must reach the all-zero level.
pub fn deployability(game: &DeploymentGame) -> Result<DeployabilityCertificate, GameError> {
    let n = game.player_count();
    let ones = ActionProfile::all_ones(n);
    let phi_one = potential(game, &ones)?;
    let phi_zero = 0.0;
    let total_cost = game.total_cost();
    let state = game.state_of(&ones);
    let total_value = coalition_value(&game.flows, &state, &game.model);
    let immediate = phi_one + total_cost;
    let necessary = phi_one >= phi_zero;
    Ok(DeployabilityCertificate {
        verdict: if necessary {
            Deployability::Deployable
        } else {
            Deployability::NotDeployable
        },
        total_value,
        immediate_benefit: immediate,
        total_cost,
        phi_all_ones: phi_one,
        phi_all_zero: phi_zero,
        profitable: total_value >= total_cost,
        necessary_condition: necessary,
    })
}

/// All pure Nash equilibria by exhaustive scan (≤ 20 players).
pub fn enumerate_equilibria(
    game: &DeploymentGame,
    strict: bool,
) -> Result<Vec<ActionProfile>, GameError> {
    let n = game.player_count();
    if n > 20 {
        return Err(GameError::CapExceeded { size: n, cap: 20 });
    }
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << n) {
        let a = ActionProfile::from_mask(n, mask);
        if is_equilibrium(game, &a, strict)? {
            out.push(a);
        }
    }
    Ok(out)
}

/// Summary of the game's equilibrium structure.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub smallest: ActionProfile,
    pub largest: ActionProfile,
    pub robust: ActionProfile,
    pub robust_is_heuristic: bool,
    pub robust_potential: Money,
    /// Potential of every profile, for small games.
    pub potential_values: Option<BTreeMap<ActionProfile, Money>>,
    /// Every (weak) equilibrium, when enumeration ran.
    pub all_equilibria: Option<Vec<ActionProfile>>,
}

/// Builds an [`EquilibriumReport`]; `enumerate` additionally tabulates the
/// potential and all equilibria (≤ 20 players).
pub fn equilibrium_report(
    game: &DeploymentGame,
    enumerate: bool,
) -> Result<EquilibriumReport, GameError> {
    let (smallest, largest) = extremal_equilibria(game)?;
    let robust = robust_equilibrium(game)?;
    let n = game.player_count();
    let (potential_values, all_equilibria) = if enumerate && n <= 20 {
        let table = potential_table(game)?;
        let mut map = BTreeMap::new();
        for (mask, &phi) in table.iter().enumerate() {
            map.insert(ActionProfile::from_mask(n, mask as u64), phi);
        }
        let eqs = enumerate_equilibria(game, false)?;
        (Some(map), Some(eqs))
    } else {
        (None, None)
    };
    Ok(EquilibriumReport {
        smallest,
        largest,
        robust: robust.profile,
        robust_is_heuristic: robust.heuristic,
        robust_potential: robust.potential,
        potential_values,
        all_equilibria,
    })
}

/// Convenience constructor for tests and synthetic scenarios: a game whose
/// network is induced by the flows' paths, with uniform launching cost.
pub fn game_with_uniform_cost(
    flows: FlowSet,
    model: RevenueModel,
    cost: Money,
) -> Result<DeploymentGame, GameError> {
    let mut max_node = 0;
    for fl in &flows {
        for p in fl.paths() {
            for &n in p.nodes() {
                max_node = max_node.max(n);
            }
        }
    }
    let node_count = max_node + 1;
    let mut edges = BTreeSet::new();
    for fl in &flows {
        for p in fl.paths() {
            for w in p.nodes().windows(2) {
                edges.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
    }
    let network = Network::new(node_count, edges).expect("paths contain no self-loops");
    let costs: BTreeMap<NodeId, Money> = critical_isps(&flows)
        .into_iter()
        .map(|n| (n, cost))
        .collect();
    DeploymentGame::new(network, flows, model, &costs)
}
