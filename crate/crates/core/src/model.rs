//! Network, flow and revenue model.
//!
//! An undirected ISP graph carries a set of weighted flows. Each flow has an
//! ordered list of routing paths (highest priority first) and, per path, the
//! set of *critical* ISPs whose joint deployment natively enables the new
//! architecture on that path. Deployment of a node set `S` determines which
//! path each flow takes, which flows use the new architecture, and how flow
//! and per-ISP revenues change. The coalition values [`coalition_value`] (v)
//! and [`tilde_value`] (ṽ) aggregate those changes and feed the revenue
//! distribution in [`crate::shapley`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::fmath;
use crate::MONEY_EPS;

/// Dense ISP identifier in `0..node_count`.
pub type NodeId = u32;

/// Monetary amount.
pub type Money = f64;

/// Validation errors for model construction.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    SelfLoop(NodeId),
    NodeOutOfRange { node: NodeId, node_count: u32 },
    EmptyPath,
    PathTooShort,
    PathNotSimple,
    PathNotConnected { from: NodeId, to: NodeId },
    CriticalOutsidePath(NodeId),
    EndpointMismatch,
    NoPaths,
    BadWeight(f64),
    WeightSum(f64),
    NegativeShare { node: NodeId, share: Money },
    ShareOffPath(NodeId),
    DuplicateFlowId(u32),
    BadParameter(String),
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::SelfLoop(n) => write!(f, "self-loop at node {n}"),
            ModelError::NodeOutOfRange { node, node_count } => {
                write!(f, "node {node} out of range (node count {node_count})")
            }
            ModelError::EmptyPath => write!(f, "empty routing path"),
            ModelError::PathTooShort => write!(f, "routing path needs at least two nodes"),
            ModelError::PathNotSimple => write!(f, "routing path repeats a node"),
            ModelError::PathNotConnected { from, to } => {
                write!(f, "consecutive path nodes {from},{to} are not an edge")
            }
            ModelError::CriticalOutsidePath(n) => {
                write!(f, "critical ISP {n} is not on its path")
            }
            ModelError::EndpointMismatch => {
                write!(f, "alternative paths must share source and destination")
            }
            ModelError::NoPaths => write!(f, "flow needs at least one path"),
            ModelError::BadWeight(w) => write!(f, "flow weight {w} outside (0, 1]"),
            ModelError::WeightSum(s) => write!(f, "flow weights sum to {s}, expected 1"),
            ModelError::NegativeShare { node, share } => {
                write!(f, "baseline share {share} of node {node} is negative")
            }
            ModelError::ShareOffPath(n) => {
                write!(f, "baseline share for node {n} not on the primary path")
            }
            ModelError::DuplicateFlowId(id) => write!(f, "duplicate flow id {id}"),
            ModelError::BadParameter(msg) => write!(f, "bad parameter: {msg}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Undirected ISP graph with dense node ids `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    node_count: u32,
    edges: BTreeSet<(NodeId, NodeId)>,
    adjacency: Vec<Vec<NodeId>>,
}

impl Network {
    /// Builds a network from undirected edges. Edges are normalized to
    /// `(min, max)` and deduplicated; self-loops and out-of-range endpoints
    /// are rejected.
    pub fn new(
        node_count: u32,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, ModelError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(ModelError::SelfLoop(a));
            }
            for n in [a, b] {
                if n >= node_count {
                    return Err(ModelError::NodeOutOfRange {
                        node: n,
                        node_count,
                    });
                }
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = alloc::vec![Vec::new(); node_count as usize];
        for &(a, b) in &set {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Network {
            node_count,
            edges: set,
            adjacency,
        })
    }

    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, n: NodeId) -> &[NodeId] {
        &self.adjacency[n as usize]
    }
}

/// One routing path together with its critical ISP set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutePath {
    nodes: Vec<NodeId>,
    critical: Vec<NodeId>, // sorted, deduplicated
}

impl RoutePath {
    /// Path whose critical set is an arbitrary subset of its nodes.
    pub fn with_critical(nodes: Vec<NodeId>, critical: Vec<NodeId>) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::EmptyPath);
        }
        if nodes.len() < 2 {
            return Err(ModelError::PathTooShort);
        }
        let node_set: BTreeSet<NodeId> = nodes.iter().copied().collect();
        if node_set.len() != nodes.len() {
            return Err(ModelError::PathNotSimple);
        }
        let mut critical: Vec<NodeId> = critical
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        critical.sort_unstable();
        for &c in &critical {
            if !node_set.contains(&c) {
                return Err(ModelError::CriticalOutsidePath(c));
            }
        }
        Ok(RoutePath { nodes, critical })
    }

    /// Path under full-path participation: every node on it is critical.
    pub fn full_participation(nodes: Vec<NodeId>) -> Result<Self, ModelError> {
        let critical = nodes.clone();
        Self::with_critical(nodes, critical)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Sorted critical ISP set of this path.
    pub fn critical(&self) -> &[NodeId] {
        &self.critical
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.nodes.contains(&n)
    }

    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().expect("path is non-empty")
    }

    fn critical_subset_of(&self, s: &DeploymentState) -> bool {
        self.critical.iter().all(|&c| s.contains(c))
    }

    fn deployed_critical_count(&self, s: &DeploymentState) -> usize {
        self.critical.iter().filter(|&&c| s.contains(c)).count()
    }
}

/// One traffic flow: a weight, the ordered alternative paths (element 0 is
/// the primary path), and baseline revenue shares on the primary path.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    id: u32,
    weight: f64,
    paths: Vec<RoutePath>,
    baseline_shares: BTreeMap<NodeId, Money>,
}

impl Flow {
    pub fn new(id: u32, weight: f64, paths: Vec<RoutePath>) -> Result<Self, ModelError> {
        if paths.is_empty() {
            return Err(ModelError::NoPaths);
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(ModelError::BadWeight(weight));
        }
        let src = paths[0].source();
        let dst = paths[0].destination();
        for p in &paths[1..] {
            if p.source() != src || p.destination() != dst {
                return Err(ModelError::EndpointMismatch);
            }
        }
        Ok(Flow {
            id,
            weight,
            paths,
            baseline_shares: BTreeMap::new(),
        })
    }

    /// Attaches baseline revenue shares `r_i`; only primary-path nodes may
    /// hold a share and shares must be non-negative.
    pub fn with_baseline_shares(
        mut self,
        shares: impl IntoIterator<Item = (NodeId, Money)>,
    ) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for (node, share) in shares {
            if share < 0.0 {
                return Err(ModelError::NegativeShare { node, share });
            }
            if !self.primary().contains(node) {
                return Err(ModelError::ShareOffPath(node));
            }
            map.insert(node, share);
        }
        self.baseline_shares = map;
        Ok(self)
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn paths(&self) -> &[RoutePath] {
        &self.paths
    }

    /// The primary (highest-priority) path.
    pub fn primary(&self) -> &RoutePath {
        &self.paths[0]
    }

    /// Baseline revenue share `r_i` of a node from this flow.
    pub fn baseline_share(&self, node: NodeId) -> Money {
        self.baseline_shares.get(&node).copied().unwrap_or(0.0)
    }

    pub fn baseline_shares(&self) -> impl Iterator<Item = (NodeId, Money)> + '_ {
        self.baseline_shares.iter().map(|(&n, &m)| (n, m))
    }

    pub fn has_baseline_shares(&self) -> bool {
        self.baseline_shares.values().any(|&r| r > 0.0)
    }
}

/// The full set of flows; weights must sum to 1 within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSet {
    flows: Vec<Flow>,
}

impl FlowSet {
    pub fn new(flows: Vec<Flow>) -> Result<Self, ModelError> {
        let mut ids = BTreeSet::new();
        for fl in &flows {
            if !ids.insert(fl.id) {
                return Err(ModelError::DuplicateFlowId(fl.id));
            }
        }
        let sum: f64 = flows.iter().map(|f| f.weight).sum();
        if fmath::abs(sum - 1.0) > MONEY_EPS {
            return Err(ModelError::WeightSum(sum));
        }
        Ok(FlowSet { flows })
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Flow> {
        self.flows.iter()
    }

    /// True when every flow has a single routing path.
    pub fn fixed_routing(&self) -> bool {
        self.flows.iter().all(|f| f.paths.len() == 1)
    }

    /// True when some flow carries a positive baseline share.
    pub fn has_baseline_shares(&self) -> bool {
        self.flows.iter().any(Flow::has_baseline_shares)
    }

    /// Checks that every path is a walk over edges of `network` and every
    /// node is in range.
    pub fn validate_against(&self, network: &Network) -> Result<(), ModelError> {
        for fl in &self.flows {
            for path in &fl.paths {
                for &n in path.nodes() {
                    if n >= network.node_count() {
                        return Err(ModelError::NodeOutOfRange {
                            node: n,
                            node_count: network.node_count(),
                        });
                    }
                }
                for w in path.nodes().windows(2) {
                    if !network.has_edge(w[0], w[1]) {
                        return Err(ModelError::PathNotConnected {
                            from: w[0],
                            to: w[1],
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a FlowSet {
    type Item = &'a Flow;
    type IntoIter = core::slice::Iter<'a, Flow>;
    fn into_iter(self) -> Self::IntoIter {
        self.flows.iter()
    }
}

/// Parametric revenue-change model.
///
/// A flow that can use the new architecture gains
/// `(n/|C|)^alpha * unit_price * weight` where `n` of its `|C|` critical
/// ISPs have deployed; `alpha = f64::INFINITY` means no incremental benefit
/// (full gain only at full critical deployment). Flows stuck on the old
/// architecture lose `loss_scale * path_len * weight * (new traffic share)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueModel {
    pub unit_price: f64,
    pub alpha: f64,
    pub loss_scale: f64,
}

impl RevenueModel {
    pub fn new(unit_price: f64, alpha: f64, loss_scale: f64) -> Result<Self, ModelError> {
        let m = RevenueModel {
            unit_price,
            alpha,
            loss_scale,
        };
        m.validate()?;
        Ok(m)
    }

    /// Full-gain-only model: unit price `p`, no incremental benefit, no
    /// old-architecture losses.
    pub fn all_or_nothing(unit_price: f64) -> Self {
        RevenueModel {
            unit_price,
            alpha: f64::INFINITY,
            loss_scale: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.unit_price >= 0.0 && self.unit_price.is_finite()) {
            return Err(ModelError::BadParameter(alloc::format!(
                "unit_price {} must be finite and >= 0",
                self.unit_price
            )));
        }
        if self.alpha.is_nan() || self.alpha < 1.0 {
            return Err(ModelError::BadParameter(alloc::format!(
                "alpha {} must be >= 1 (or infinite)",
                self.alpha
            )));
        }
        if !(self.loss_scale >= 0.0 && self.loss_scale.is_finite()) {
            return Err(ModelError::BadParameter(alloc::format!(
                "loss_scale {} must be finite and >= 0",
                self.loss_scale
            )));
        }
        Ok(())
    }

    /// True when the model grants partial benefits to partially served flows.
    pub fn incremental(&self) -> bool {
        self.alpha.is_finite()
    }

    /// Gain of a flow of weight `w` when `n` of `c` critical ISPs deployed.
    pub fn benefit(&self, n: usize, c: usize, weight: f64) -> Money {
        if c == 0 || n == 0 {
            return 0.0;
        }
        let ratio = n as f64 / c as f64;
        let factor = if self.alpha.is_infinite() {
            if n == c {
                1.0
            } else {
                0.0
            }
        } else {
            fmath::powf(ratio, self.alpha)
        };
        factor * self.unit_price * weight
    }
}

/// A set of deployed ISPs, `S ⊆ 0..capacity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeploymentState {
    member: Vec<bool>,
    len: usize,
}

impl DeploymentState {
    pub fn empty(capacity: u32) -> Self {
        DeploymentState {
            member: alloc::vec![false; capacity as usize],
            len: 0,
        }
    }

    pub fn from_nodes(
        capacity: u32,
        nodes: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, ModelError> {
        let mut s = Self::empty(capacity);
        for n in nodes {
            if n >= capacity {
                return Err(ModelError::NodeOutOfRange {
                    node: n,
                    node_count: capacity,
                });
            }
            s.insert(n);
        }
        Ok(s)
    }

    pub fn capacity(&self) -> u32 {
        self.member.len() as u32
    }

    /// Number of deployed ISPs.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.member.get(n as usize).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, n: NodeId) {
        if !self.member[n as usize] {
            self.member[n as usize] = true;
            self.len += 1;
        }
    }

    pub fn remove(&mut self, n: NodeId) {
        if self.member[n as usize] {
            self.member[n as usize] = false;
            self.len -= 1;
        }
    }

    pub fn with(&self, n: NodeId) -> Self {
        let mut s = self.clone();
        s.insert(n);
        s
    }

    pub fn without(&self, n: NodeId) -> Self {
        let mut s = self.clone();
        s.remove(n);
        s
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.member
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i as NodeId)
    }

    pub fn is_subset_of(&self, other: &DeploymentState) -> bool {
        self.nodes().all(|n| other.contains(n))
    }
}

/// Union of the primary-path critical sets over all flows: the players of
/// the deployment game.
pub fn critical_isps(flows: &FlowSet) -> BTreeSet<NodeId> {
    let mut set = BTreeSet::new();
    for fl in flows {
        set.extend(fl.primary().critical().iter().copied());
    }
    set
}

/// Index into `flow.paths()` of the path used under deployment `s`: the
/// highest-priority path whose critical set is fully deployed, or the
/// primary path when none is. With `s = ∅` the primary path is kept.
pub fn routed_path_index(flow: &Flow, s: &DeploymentState) -> usize {
    if s.is_empty() {
        return 0;
    }
    flow.paths()
        .iter()
        .position(|p| p.critical_subset_of(s))
        .unwrap_or(0)
}

/// The routing path used by `flow` under deployment `s`.
pub fn routed_path<'a>(flow: &'a Flow, s: &DeploymentState) -> &'a RoutePath {
    &flow.paths()[routed_path_index(flow, s)]
}

/// Whether `isp` is on the flow's primary path but off its current path.
pub fn bypassed(flow: &Flow, isp: NodeId, s: &DeploymentState) -> bool {
    flow.primary().contains(isp) && !routed_path(flow, s).contains(isp)
}

/// Number of deployed critical ISPs `n_f(S)` on the flow's current path.
pub fn deployed_critical_count(flow: &Flow, s: &DeploymentState) -> usize {
    routed_path(flow, s).deployed_critical_count(s)
}

/// Whether the flow is served by the new architecture under `s`, either
/// natively (all critical ISPs of its current path deployed) or through an
/// incremental mechanism (finite `alpha` and at least one deployed critical
/// ISP). No flow uses the new architecture when `s` is empty.
pub fn flow_uses_new(flow: &Flow, s: &DeploymentState, model: &RevenueModel) -> bool {
    if s.is_empty() {
        return false;
    }
    let path = routed_path(flow, s);
    if !path.critical().is_empty() && path.critical_subset_of(s) {
        return true;
    }
    model.incremental() && path.deployed_critical_count(s) >= 1
}

/// Combined weight of flows served by the new architecture under `s`.
pub fn new_traffic_share(flows: &FlowSet, s: &DeploymentState, model: &RevenueModel) -> f64 {
    flows
        .iter()
        .filter(|f| flow_uses_new(f, s, model))
        .map(|f| f.weight())
        .sum()
}

/// Flow-level revenue change `Δ_f(S)`.
///
/// Flows on the new architecture gain `(n_f(S)/|C|)^alpha * p * w_f` with
/// the critical set taken on the currently routed path. Flows left on the
/// old architecture lose in proportion to their path length, their weight
/// and the total weight of flows served by the new architecture.
pub fn flow_delta(
    flows: &FlowSet,
    flow_index: usize,
    s: &DeploymentState,
    model: &RevenueModel,
) -> Money {
    let flow = &flows.flows()[flow_index];
    if flow_uses_new(flow, s, model) {
        let path = routed_path(flow, s);
        model.benefit(
            path.deployed_critical_count(s),
            path.critical().len(),
            flow.weight(),
        )
    } else if model.loss_scale > 0.0 {
        let share = new_traffic_share(flows, s, model);
        -model.loss_scale * flow.primary().len() as f64 * flow.weight() * share
    } else {
        0.0
    }
}

/// Revenue change `δ_{i,f}(S)` of an ISP that did not deploy.
///
/// A bypassed ISP loses its whole baseline share; an ISP on the path of an
/// old-architecture flow loses per the loss model; everyone else is
/// unaffected. Callers evaluating a deployer's counterfactual pass `S\{i}`.
pub fn isp_delta(
    flows: &FlowSet,
    flow_index: usize,
    isp: NodeId,
    s: &DeploymentState,
    model: &RevenueModel,
) -> Money {
    let flow = &flows.flows()[flow_index];
    if bypassed(flow, isp, s) {
        return -flow.baseline_share(isp);
    }
    if model.loss_scale > 0.0 && flow.primary().contains(isp) && !flow_uses_new(flow, s, model) {
        let share = new_traffic_share(flows, s, model);
        return -model.loss_scale * flow.weight() * share;
    }
    0.0
}

/// Net revenue gain `v(S)` of the deploying coalition: all flow-level
/// changes minus the changes absorbed by non-deployers.
pub fn coalition_value(flows: &FlowSet, s: &DeploymentState, model: &RevenueModel) -> Money {
    if s.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (idx, flow) in flows.iter().enumerate() {
        total += flow_delta(flows, idx, s, model);
        for &n in flow.primary().nodes() {
            if !s.contains(n) {
                total -= isp_delta(flows, idx, n, s, model);
            }
        }
        // A routing change can bypass an ISP that sits on the primary path
        // only, so the loop above already covers every non-zero δ term.
    }
    total
}

/// Bargaining value `ṽ(S) = v(S) - Σ_{i∈S} Σ_f δ_{i,f}(S\{i})`: the
/// coalition value additionally charging each deployer its counterfactual
/// non-deployment loss.
pub fn tilde_value(flows: &FlowSet, s: &DeploymentState, model: &RevenueModel) -> Money {
    let mut total = coalition_value(flows, s, model);
    for i in s.nodes() {
        let without = s.without(i);
        for (idx, flow) in flows.iter().enumerate() {
            if flow.primary().contains(i) {
                total -= isp_delta(flows, idx, i, &without, model);
            }
        }
    }
    total
}

/// Gain component `v_g(S) = Σ_f Δ_f(S)`.
pub fn gain_value(flows: &FlowSet, s: &DeploymentState, model: &RevenueModel) -> Money {
    if s.is_empty() {
        return 0.0;
    }
    (0..flows.len())
        .map(|idx| flow_delta(flows, idx, s, model))
        .sum()
}

/// Loss component `v_l(S) = ṽ(S) - v_g(S)`: revenue redistributed away from
/// non-deployers plus the deployers' counterfactual losses.
pub fn loss_value(flows: &FlowSet, s: &DeploymentState, model: &RevenueModel) -> Money {
    tilde_value(flows, s, model) - gain_value(flows, s, model)
}
