//! Revenue-distribution computation.
//!
//! Deployers split the bargaining value ṽ of their coalition by Shapley
//! value; the net amount an ISP walks away with additionally includes its
//! counterfactual non-deployment losses ([`distribution_mechanism`]).
//!
//! Three computation routes are provided. [`shapley_exact`] evaluates the
//! subset-weight formula on an arbitrary value function and serves as the
//! oracle; it is exponential and capped. [`shapley_closed_form`] handles
//! fixed routing without old-architecture losses, where the gain of each
//! flow is split evenly over its deployed critical ISPs.
//! [`shapley_routing`] handles alternative routing paths (no incremental
//! mechanism, no losses) by inclusion-exclusion over per-path critical
//! sets.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::model::{
    self, coalition_value, critical_isps, deployed_critical_count, flow_delta, isp_delta,
    loss_value, tilde_value, DeploymentState, FlowSet, Money, NodeId, RevenueModel,
};

/// Default player cap for exact subset-sum computation.
pub const EXACT_PLAYER_CAP: usize = 15;

/// Per-flow cap on alternative paths in the inclusion-exclusion form.
pub const ROUTING_PATH_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapleyError {
    /// Instance too large for an exact method; callers must switch to a
    /// closed form. Exact computation is never silently approximated.
    CapExceeded { size: usize, cap: usize },
    /// A closed form was invoked outside the conditions that justify it.
    PreconditionViolated(&'static str),
}

impl core::fmt::Display for ShapleyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ShapleyError::CapExceeded { size, cap } => {
                write!(
                    f,
                    "instance size {size} exceeds exact-computation cap {cap}"
                )
            }
            ShapleyError::PreconditionViolated(msg) => {
                write!(f, "closed-form precondition violated: {msg}")
            }
        }
    }
}

impl core::error::Error for ShapleyError {}

/// Per-ISP monetary shares; missing nodes hold zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation {
    shares: BTreeMap<NodeId, Money>,
}

impl Allocation {
    pub fn new() -> Self {
        Allocation::default()
    }

    pub fn get(&self, node: NodeId) -> Money {
        self.shares.get(&node).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, node: NodeId, amount: Money) {
        self.shares.insert(node, amount);
    }

    pub fn add(&mut self, node: NodeId, amount: Money) {
        *self.shares.entry(node).or_insert(0.0) += amount;
    }

    pub fn total(&self) -> Money {
        self.shares.values().sum()
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Money)> + '_ {
        self.shares.iter().map(|(&n, &m)| (n, m))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.shares.keys().copied()
    }
}

impl FromIterator<(NodeId, Money)> for Allocation {
    fn from_iter<T: IntoIterator<Item = (NodeId, Money)>>(iter: T) -> Self {
        Allocation {
            shares: iter.into_iter().collect(),
        }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(n + 1);
    f.push(1.0);
    for i in 1..=n {
        f.push(f[i - 1] * i as f64);
    }
    f
}

/// Evaluates `value` on every subset of `players`, returned as a table
/// indexed by bitmask over the player order given.
pub fn value_table(players: &[NodeId], mut value: impl FnMut(&[NodeId]) -> Money) -> Vec<Money> {
    let n = players.len();
    let mut table = Vec::with_capacity(1 << n);
    let mut members = Vec::with_capacity(n);
    for mask in 0u32..(1u32 << n) {
        members.clear();
        for (b, &p) in players.iter().enumerate() {
            if mask >> b & 1 == 1 {
                members.push(p);
            }
        }
        table.push(value(&members));
    }
    table
}

/// Exact Shapley value of `value` restricted to `players`, by the
/// subset-weight formula. Errors with [`ShapleyError::CapExceeded`] above
/// [`EXACT_PLAYER_CAP`] players.
pub fn shapley_exact(
    players: &[NodeId],
    value: impl FnMut(&[NodeId]) -> Money,
) -> Result<Allocation, ShapleyError> {
    shapley_exact_with_cap(players, value, EXACT_PLAYER_CAP)
}

/// [`shapley_exact`] with an explicit player cap.
pub fn shapley_exact_with_cap(
    players: &[NodeId],
    value: impl FnMut(&[NodeId]) -> Money,
    cap: usize,
) -> Result<Allocation, ShapleyError> {
    let n = players.len();
    if n > cap {
        return Err(ShapleyError::CapExceeded { size: n, cap });
    }
    let table = value_table(players, value);
    let fact = factorials(n);
    let mut alloc = Allocation::new();
    for (b, &player) in players.iter().enumerate() {
        let bit = 1u32 << b;
        let mut phi = 0.0;
        for mask in 0u32..(1u32 << n) {
            if mask & bit != 0 {
                continue;
            }
            let t = mask.count_ones() as usize;
            let weight = fact[t] * fact[n - t - 1] / fact[n];
            phi += weight * (table[(mask | bit) as usize] - table[mask as usize]);
        }
        alloc.set(player, phi);
    }
    Ok(alloc)
}

/// Hart–Mas-Colell potential of `value` on every subset of `players`,
/// indexed by bitmask. The marginal `P(S) - P(S\{i})` is player `i`'s
/// Shapley value in `S`, which makes this the bulk engine for potential
/// tables over many coalitions at once.
pub fn hm_potential_table(
    players: &[NodeId],
    mut value: impl FnMut(&[NodeId]) -> Money,
) -> Result<Vec<Money>, ShapleyError> {
    let n = players.len();
    if n > 25 {
        return Err(ShapleyError::CapExceeded { size: n, cap: 25 });
    }
    let mut table = Vec::with_capacity(1usize << n);
    table.push(0.0);
    let mut members = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        members.clear();
        for (b, &p) in players.iter().enumerate() {
            if mask >> b & 1 == 1 {
                members.push(p);
            }
        }
        let v = value(&members);
        let mut sum = 0.0;
        let mut rest = mask;
        while rest != 0 {
            let bit = rest & rest.wrapping_neg();
            sum += table[(mask ^ bit) as usize];
            rest ^= bit;
        }
        let k = mask.count_ones() as f64;
        table.push((v + sum) / k);
    }
    Ok(table)
}

/// Closed-form Shapley shares of ṽ for fixed routing without
/// old-architecture losses: each flow's gain splits evenly over its
/// deployed critical ISPs.
pub fn shapley_closed_form(
    flows: &FlowSet,
    s: &DeploymentState,
    model: &RevenueModel,
) -> Result<Allocation, ShapleyError> {
    if !flows.fixed_routing() {
        return Err(ShapleyError::PreconditionViolated(
            "closed form requires a single routing path per flow",
        ));
    }
    if model.loss_scale != 0.0 {
        return Err(ShapleyError::PreconditionViolated(
            "closed form requires no old-architecture revenue loss",
        ));
    }
    let mut alloc = Allocation::new();
    for fl in flows {
        for &c in fl.primary().critical() {
            if s.contains(c) {
                alloc.add(c, 0.0);
            }
        }
    }
    for (idx, fl) in flows.iter().enumerate() {
        let n = deployed_critical_count(fl, s);
        if n == 0 {
            continue;
        }
        let delta = flow_delta(flows, idx, s, model);
        if delta == 0.0 {
            continue;
        }
        let per_member = delta / n as f64;
        for &c in fl.primary().critical() {
            if s.contains(c) {
                alloc.add(c, per_member);
            }
        }
    }
    Ok(alloc)
}

/// Shapley shares of ṽ under alternative routing paths, no incremental
/// mechanism and no old-architecture losses.
///
/// The gain part is computed by inclusion-exclusion over non-empty subsets
/// of each flow's path list: every subset's critical-set union, once fully
/// deployed, contributes the flow's full gain split evenly over the union,
/// with alternating sign. The loss part (baseline shares redistributed by
/// bypass) is added via [`shapley_exact`] when baseline shares are present.
pub fn shapley_routing(
    flows: &FlowSet,
    s: &DeploymentState,
    model: &RevenueModel,
) -> Result<Allocation, ShapleyError> {
    if model.loss_scale != 0.0 {
        return Err(ShapleyError::PreconditionViolated(
            "routing form requires no old-architecture revenue loss",
        ));
    }
    if model.incremental() {
        return Err(ShapleyError::PreconditionViolated(
            "routing form requires no incremental deployment mechanism",
        ));
    }
    for fl in flows {
        if fl.paths().len() > ROUTING_PATH_CAP {
            return Err(ShapleyError::CapExceeded {
                size: fl.paths().len(),
                cap: ROUTING_PATH_CAP,
            });
        }
    }
    let mut alloc = Allocation::new();
    let mut union_buf: Vec<NodeId> = Vec::new();
    for fl in flows {
        let full_gain = model.unit_price * fl.weight();
        let k = fl.paths().len();
        'subsets: for mask in 1u32..(1u32 << k) {
            union_buf.clear();
            for (b, path) in fl.paths().iter().enumerate() {
                if mask >> b & 1 == 1 {
                    for &c in path.critical() {
                        if !s.contains(c) {
                            continue 'subsets;
                        }
                        if !union_buf.contains(&c) {
                            union_buf.push(c);
                        }
                    }
                }
            }
            if union_buf.is_empty() {
                continue;
            }
            let sign = if mask.count_ones() % 2 == 1 {
                1.0
            } else {
                -1.0
            };
            let share = sign * full_gain / union_buf.len() as f64;
            for &c in &union_buf {
                alloc.add(c, share);
            }
        }
    }
    if flows.has_baseline_shares() && !flows.fixed_routing() {
        let members: Vec<NodeId> = s.nodes().collect();
        let capacity = s.capacity();
        let losses = shapley_exact(&members, |coal| {
            let st = DeploymentState::from_nodes(capacity, coal.iter().copied())
                .expect("coalition nodes are in range");
            loss_value(flows, &st, model)
        })?;
        for (node, share) in losses.iter() {
            alloc.add(node, share);
        }
    }
    Ok(alloc)
}

/// Net revenue gain distributed to each deployer: the Shapley share of ṽ
/// plus the deployer's counterfactual non-deployment revenue change.
/// Dispatches to the cheapest formula whose preconditions hold; the shares
/// sum to the coalition value `v(S)`.
pub fn distribution_mechanism(
    flows: &FlowSet,
    s: &DeploymentState,
    model: &RevenueModel,
) -> Result<Allocation, ShapleyError> {
    let mut alloc = shapley_tilde(flows, s, model)?;
    if model.loss_scale > 0.0 || !flows.fixed_routing() {
        for (idx, fl) in flows.iter().enumerate() {
            for &node in fl.primary().nodes() {
                if !s.contains(node) {
                    continue;
                }
                let counterfactual = s.without(node);
                let delta = isp_delta(flows, idx, node, &counterfactual, model);
                if delta != 0.0 {
                    alloc.add(node, delta);
                }
            }
        }
    }
    Ok(alloc)
}

/// Shapley share of ṽ for every deployer, by the cheapest valid route.
pub fn shapley_tilde(
    flows: &FlowSet,
    s: &DeploymentState,
    model: &RevenueModel,
) -> Result<Allocation, ShapleyError> {
    if flows.fixed_routing() && model.loss_scale == 0.0 {
        return shapley_closed_form(flows, s, model);
    }
    if model.loss_scale == 0.0 && !model.incremental() {
        return shapley_routing(flows, s, model);
    }
    let members: Vec<NodeId> = s.nodes().collect();
    let capacity = s.capacity();
    shapley_exact(&members, |coal| {
        let st = DeploymentState::from_nodes(capacity, coal.iter().copied())
            .expect("coalition nodes are in range");
        tilde_value(flows, &st, model)
    })
}

/// Shapley share of ṽ for a single deployer; `s` must contain `node`.
pub fn shapley_tilde_single(
    flows: &FlowSet,
    s: &DeploymentState,
    model: &RevenueModel,
    node: NodeId,
) -> Result<Money, ShapleyError> {
    if flows.fixed_routing() && model.loss_scale == 0.0 {
        let mut phi = 0.0;
        for (idx, fl) in flows.iter().enumerate() {
            if !fl.primary().critical().contains(&node) {
                continue;
            }
            let n = deployed_critical_count(fl, s);
            if n == 0 {
                continue;
            }
            let delta = flow_delta(flows, idx, s, model);
            if delta != 0.0 {
                phi += delta / n as f64;
            }
        }
        return Ok(phi);
    }
    Ok(shapley_tilde(flows, s, model)?.get(node))
}

/// True when `distribution_mechanism` has an exact route for this instance:
/// either a closed form applies or the coalition is within the exact cap.
pub fn distribution_supported(flows: &FlowSet, s: &DeploymentState, model: &RevenueModel) -> bool {
    (flows.fixed_routing() && model.loss_scale == 0.0)
        || (model.loss_scale == 0.0 && !model.incremental())
        || s.len() <= EXACT_PLAYER_CAP
}

/// Convenience: the coalition value the distributed shares must sum to.
pub fn distributed_total(flows: &FlowSet, s: &DeploymentState, model: &RevenueModel) -> Money {
    coalition_value(flows, s, model)
}

/// Shapley shares of ṽ over the full critical-ISP set.
pub fn grand_coalition_shares(
    flows: &FlowSet,
    capacity: u32,
    model: &RevenueModel,
) -> Result<Allocation, ShapleyError> {
    let grand: Vec<NodeId> = critical_isps(flows).into_iter().collect();
    let s = DeploymentState::from_nodes(capacity, grand.iter().copied())
        .map_err(|_| ShapleyError::PreconditionViolated("critical ISP out of range"))?;
    shapley_tilde(flows, &s, model)
}

/// Exact Shapley of the loss component alone (testing hook for the routing
/// decomposition).
pub fn shapley_loss_exact(
    flows: &FlowSet,
    s: &DeploymentState,
    model: &RevenueModel,
) -> Result<Allocation, ShapleyError> {
    let members: Vec<NodeId> = s.nodes().collect();
    let capacity = s.capacity();
    shapley_exact(&members, |coal| {
        let st = DeploymentState::from_nodes(capacity, coal.iter().copied())
            .expect("coalition nodes are in range");
        model::loss_value(flows, &st, model)
    })
}
