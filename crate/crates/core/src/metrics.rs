//! Deployability analytics.
//!
//! The coordination ratio γ compares the total benefit of full deployment
//! with the total immediate benefits collected along the way; it is the
//! benefit-weighted harmonic mean of per-flow critical-ISP counts and the
//! threshold the benefit-cost ratio must clear for an architecture to be
//! deployable. Derived quantities: the deployment price (minimum unit
//! price making the architecture deployable), per-ISP traffic-share
//! thresholds under old-architecture revenue loss, the path-flattening
//! transform, and the device-level partial-deployment equivalence check.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::game::{deployability, DeploymentGame, GameError};
use crate::model::{Flow, FlowSet, ModelError, Money, NodeId, RoutePath};
use crate::MONEY_EPS;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// Total immediate benefit is not positive; γ is undefined.
    DegenerateBenefit(Money),
    /// Flattening bound below 2.
    InvalidM(usize),
    /// Device costs do not sum to the game's launching costs.
    CostMismatch {
        device_total: Money,
        cost_total: Money,
    },
    /// Device sets are inconsistent (overlap or dummy devices).
    InvalidDevices(&'static str),
    Game(GameError),
    Model(ModelError),
    NoCandidates,
}

impl From<GameError> for MetricsError {
    fn from(e: GameError) -> Self {
        MetricsError::Game(e)
    }
}

impl From<ModelError> for MetricsError {
    fn from(e: ModelError) -> Self {
        MetricsError::Model(e)
    }
}

impl core::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetricsError::DegenerateBenefit(b) => {
                write!(f, "total immediate benefit {b} is not positive")
            }
            MetricsError::InvalidM(m) => write!(f, "flatten bound {m} must be at least 2"),
            MetricsError::CostMismatch {
                device_total,
                cost_total,
            } => write!(
                f,
                "device costs {device_total} do not match launching costs {cost_total}"
            ),
            MetricsError::InvalidDevices(msg) => write!(f, "invalid device model: {msg}"),
            MetricsError::Game(e) => write!(f, "{e}"),
            MetricsError::Model(e) => write!(f, "{e}"),
            MetricsError::NoCandidates => write!(f, "no candidate architectures"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Coordination ratio `γ = v(C̃)/B(C̃)`: how many times the total cost the
/// total benefit must exceed for full deployment to be robust. Errors if
/// the immediate benefit is not positive.
pub fn gamma(game: &DeploymentGame) -> Result<f64, MetricsError> {
    let cert = deployability(game)?;
    if cert.immediate_benefit <= 0.0 {
        return Err(MetricsError::DegenerateBenefit(cert.immediate_benefit));
    }
    Ok(cert.total_value / cert.immediate_benefit)
}

/// Minimum unit price at which the architecture becomes deployable:
/// `p_d = γ Σc / Σw`. Defined for fixed routing without losses, where γ
/// does not depend on the unit price.
pub fn deployment_price(game: &DeploymentGame) -> Result<f64, MetricsError> {
    if !game.flows().fixed_routing() || game.model().loss_scale != 0.0 {
        return Err(MetricsError::Game(GameError::PreconditionViolated(
            "deployment price requires fixed routing and no revenue loss",
        )));
    }
    let g = gamma(game)?;
    let total_weight: f64 = game.flows().iter().map(Flow::weight).sum();
    Ok(g * game.total_cost() / total_weight)
}

/// Unit price charged for a partially deployed architecture, scaled by the
/// fraction of the full benefit it currently delivers.
pub fn partial_deployment_price(full_price: f64, delta_partial: Money, delta_full: Money) -> Money {
    if delta_full == 0.0 {
        0.0
    } else {
        full_price * delta_partial / delta_full
    }
}

/// Outcome of a deployment-price competition.
#[derive(Debug, Clone, PartialEq)]
pub struct Competition {
    /// Indices of the candidates achieving the minimum deployment price.
    pub winners: Vec<usize>,
    pub price: f64,
    pub prices: Vec<f64>,
}

/// Customers pick the cheapest functionality: the architecture(s) with the
/// lowest deployment price win; the rest are not deployed.
pub fn compare_architectures(games: &[DeploymentGame]) -> Result<Competition, MetricsError> {
    if games.is_empty() {
        return Err(MetricsError::NoCandidates);
    }
    let prices: Vec<f64> = games
        .iter()
        .map(deployment_price)
        .collect::<Result<_, _>>()?;
    let best = prices.iter().cloned().fold(f64::INFINITY, f64::min);
    let winners = prices
        .iter()
        .enumerate()
        .filter(|(_, &p)| (p - best).abs() <= MONEY_EPS * (1.0 + best.abs()))
        .map(|(i, _)| i)
        .collect();
    Ok(Competition {
        winners,
        price: best,
        prices,
    })
}

/// Per-ISP traffic-share check against the loss-model threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficShareEntry {
    pub node: NodeId,
    /// Combined weight of flows whose primary path crosses this ISP.
    pub share: f64,
    pub satisfied: bool,
}

/// Traffic-share threshold report: when every critical ISP's share stays
/// below the threshold, old-architecture revenue losses only help
/// deployability.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficThresholdReport {
    /// Weighted average critical-ISP count, weights `w_f |C(p_f)|`.
    pub avg_critical_weighted: f64,
    pub threshold: f64,
    pub per_isp: Vec<TrafficShareEntry>,
    pub all_satisfied: bool,
}

/// Computes the loss-model traffic threshold
/// `Σ_f w_f |C_f| / (|C_f| + N̄_c + 1)` and each critical ISP's share.
pub fn traffic_share_threshold(game: &DeploymentGame) -> TrafficThresholdReport {
    let flows = game.flows();
    let mut num = 0.0;
    let mut den = 0.0;
    for fl in flows {
        let c = fl.primary().critical().len() as f64;
        num += fl.weight() * c * c;
        den += fl.weight() * c;
    }
    let avg = if den > 0.0 { num / den } else { 0.0 };
    let threshold: f64 = flows
        .iter()
        .map(|fl| {
            let c = fl.primary().critical().len() as f64;
            if c > 0.0 {
                fl.weight() * c / (c + avg + 1.0)
            } else {
                0.0
            }
        })
        .sum();
    let mut per_isp = Vec::with_capacity(game.player_count());
    let mut all = true;
    for &node in game.players() {
        let share: f64 = flows
            .iter()
            .filter(|fl| fl.primary().contains(node))
            .map(Flow::weight)
            .sum();
        let satisfied = share <= threshold + MONEY_EPS;
        all &= satisfied;
        per_isp.push(TrafficShareEntry {
            node,
            share,
            satisfied,
        });
    }
    TrafficThresholdReport {
        avg_critical_weighted: avg,
        threshold,
        per_isp,
        all_satisfied: all,
    }
}

/// Shrinks every path longer than `max_len` to its source, the `max_len-2`
/// nodes nearest the destination, and the destination, emulating content
/// served from data centers near receivers. Critical sets are recomputed
/// under full-path participation; weights are unchanged; baseline shares
/// are restricted to surviving primary-path nodes.
pub fn flatten(flows: &FlowSet, max_len: usize) -> Result<FlowSet, MetricsError> {
    if max_len < 2 {
        return Err(MetricsError::InvalidM(max_len));
    }
    let mut out = Vec::with_capacity(flows.len());
    for fl in flows {
        let mut new_paths: Vec<RoutePath> = Vec::new();
        for path in fl.paths() {
            let nodes = path.nodes();
            let flattened: Vec<NodeId> = if nodes.len() <= max_len {
                nodes.to_vec()
            } else {
                let mut v = Vec::with_capacity(max_len);
                v.push(nodes[0]);
                v.extend_from_slice(&nodes[nodes.len() - (max_len - 1)..]);
                v
            };
            let candidate = RoutePath::full_participation(flattened)?;
            if !new_paths.contains(&candidate) {
                new_paths.push(candidate);
            }
        }
        let shares: Vec<(NodeId, Money)> = fl
            .baseline_shares()
            .filter(|(n, _)| new_paths[0].contains(*n))
            .collect();
        let flow = Flow::new(fl.id(), fl.weight(), new_paths)?.with_baseline_shares(shares)?;
        out.push(flow);
    }
    FlowSet::new(out).map_err(MetricsError::Model)
}

/// Device-level action model: each ISP owns a disjoint set of devices,
/// each flow requires a subset of them, and deployment costs are paid per
/// device.
#[derive(Debug, Clone, Default)]
pub struct DeviceModel {
    /// Per ISP: cost of each of its devices (device = `(isp, index)`).
    device_costs: BTreeMap<NodeId, Vec<Money>>,
    /// Per flow id and ISP: indices of the ISP's devices the flow needs.
    flow_devices: BTreeMap<(u32, NodeId), Vec<usize>>,
}

impl DeviceModel {
    pub fn new() -> Self {
        DeviceModel::default()
    }

    pub fn add_isp(&mut self, isp: NodeId, costs: Vec<Money>) {
        self.device_costs.insert(isp, costs);
    }

    pub fn require(&mut self, flow_id: u32, isp: NodeId, devices: Vec<usize>) {
        self.flow_devices.insert((flow_id, isp), devices);
    }

    pub fn device_cost_total(&self) -> Money {
        self.device_costs.values().flatten().sum()
    }

    pub fn isp_cost_total(&self, isp: NodeId) -> Money {
        self.device_costs
            .get(&isp)
            .map(|v| v.iter().sum())
            .unwrap_or(0.0)
    }

    /// Checks device-set invariants: device indices in range and no dummy
    /// devices (every device supports at least one flow).
    pub fn validate(&self) -> Result<(), MetricsError> {
        let mut used: BTreeMap<NodeId, BTreeSet<usize>> = BTreeMap::new();
        for (&(_, isp), devices) in &self.flow_devices {
            let Some(costs) = self.device_costs.get(&isp) else {
                return Err(MetricsError::InvalidDevices("flow references unknown ISP"));
            };
            for &d in devices {
                if d >= costs.len() {
                    return Err(MetricsError::InvalidDevices("device index out of range"));
                }
                used.entry(isp).or_default().insert(d);
            }
        }
        for (&isp, costs) in &self.device_costs {
            let used_count = used.get(&isp).map(BTreeSet::len).unwrap_or(0);
            if used_count != costs.len() {
                return Err(MetricsError::InvalidDevices(
                    "dummy device supports no flow",
                ));
            }
        }
        Ok(())
    }
}

/// Result of the partial-deployment equivalence check.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDeploymentCheck {
    /// Deployability verdict of the binary-action game.
    pub binary_deployable: bool,
    /// Deployability verdict of the device-level game (immediate benefits
    /// at full deployment vs. total device cost).
    pub device_deployable: bool,
    pub immediate_benefit: Money,
    pub device_cost_total: Money,
}

/// Evaluates deployability under the binary and the device-level action
/// models; when total costs match the verdicts coincide.
pub fn partial_deployment_equivalent(
    game: &DeploymentGame,
    devices: &DeviceModel,
) -> Result<PartialDeploymentCheck, MetricsError> {
    if !game.flows().fixed_routing() || game.model().loss_scale != 0.0 {
        return Err(MetricsError::Game(GameError::PreconditionViolated(
            "partial-deployment check requires fixed routing and no revenue loss",
        )));
    }
    devices.validate()?;
    let device_total = devices.device_cost_total();
    let cost_total = game.total_cost();
    if (device_total - cost_total).abs() > MONEY_EPS {
        return Err(MetricsError::CostMismatch {
            device_total,
            cost_total,
        });
    }
    for &p in game.players() {
        if !devices.device_costs.contains_key(&p) {
            return Err(MetricsError::InvalidDevices("player without devices"));
        }
    }
    let cert = deployability(game)?;
    // Device-level condition, computed from the flows directly: summed
    // immediate benefits at full critical deployment vs. device costs.
    let mut immediate = 0.0;
    for fl in game.flows() {
        let c = fl.primary().critical().len();
        for m in 1..=c {
            immediate += game.model().benefit(m, c, fl.weight()) / m as f64;
        }
    }
    let device_deployable = immediate >= device_total;
    Ok(PartialDeploymentCheck {
        binary_deployable: cert.necessary_condition,
        device_deployable,
        immediate_benefit: immediate,
        device_cost_total: device_total,
    })
}

/// Full deployability analytics bundle for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployabilityReport {
    pub gamma: f64,
    pub total_benefit: Money,
    pub immediate_benefit: Money,
    pub total_cost: Money,
    pub deployment_price: Option<f64>,
    pub avg_critical_weighted: f64,
    pub necessary_condition: bool,
    pub profitable: bool,
    pub traffic_threshold: TrafficThresholdReport,
}

/// Gathers γ, benefits, costs, deployment price and the traffic-share
/// threshold into one report.
pub fn deployability_report(game: &DeploymentGame) -> Result<DeployabilityReport, MetricsError> {
    let cert = deployability(game)?;
    let g = gamma(game)?;
    let price = deployment_price(game).ok();
    let threshold = traffic_share_threshold(game);
    Ok(DeployabilityReport {
        gamma: g,
        total_benefit: cert.total_value,
        immediate_benefit: cert.immediate_benefit,
        total_cost: cert.total_cost,
        deployment_price: price,
        avg_critical_weighted: threshold.avg_critical_weighted,
        necessary_condition: cert.necessary_condition,
        profitable: cert.profitable,
        traffic_threshold: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::game_with_uniform_cost;
    use crate::model::RevenueModel;
    use alloc::vec;
    use rand::{Rng, SeedableRng};

    fn full(nodes: &[NodeId]) -> RoutePath {
        RoutePath::full_participation(nodes.to_vec()).unwrap()
    }

    fn line_game(nodes: usize, price: f64, cost: Money) -> DeploymentGame {
        let path: Vec<NodeId> = (0..nodes as u32).collect();
        let flows = FlowSet::new(vec![Flow::new(1, 1.0, vec![full(&path)]).unwrap()]).unwrap();
        game_with_uniform_cost(flows, RevenueModel::all_or_nothing(price), cost).unwrap()
    }

    #[test]
    fn gamma_equals_critical_count_for_uniform_flows() {
        // Every flow has k critical ISPs: γ = k regardless of weights.
        let flows = FlowSet::new(vec![
            Flow::new(1, 0.3, vec![full(&[0, 1, 2])]).unwrap(),
            Flow::new(2, 0.7, vec![full(&[2, 3, 4])]).unwrap(),
        ])
        .unwrap();
        let game = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(5.0), 1.0).unwrap();
        assert!((gamma(&game).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_is_weighted_harmonic_mean() {
        // Mixed critical counts 2 and 4 with benefit weights Δ ∝ w.
        let flows = FlowSet::new(vec![
            Flow::new(1, 0.5, vec![full(&[0, 1])]).unwrap(),
            Flow::new(2, 0.5, vec![full(&[2, 3, 4, 5])]).unwrap(),
        ])
        .unwrap();
        let game = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(4.0), 1.0).unwrap();
        // Harmonic mean with equal benefit weights: 2/(1/2+1/4) = 8/3.
        assert!((gamma(&game).unwrap() - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_with_incremental_benefits() {
        // Single flow, 3 critical ISPs, α = 1: B telescopes to
        // Σ_m Δ̃(m)/m = Σ_m (p m / 3)/m = p, so γ = v/B = 1.
        let game = {
            let flows =
                FlowSet::new(vec![Flow::new(1, 1.0, vec![full(&[0, 1, 2])]).unwrap()]).unwrap();
            game_with_uniform_cost(flows, RevenueModel::new(6.0, 1.0, 0.0).unwrap(), 1.0).unwrap()
        };
        assert!((gamma(&game).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_incremental_never_exceeds_all_or_nothing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        for _ in 0..30 {
            let n: u32 = rng.random_range(3..7);
            let path: Vec<NodeId> = (0..n).collect();
            let w2 = rng.random_range(0.2..0.8);
            let flows = FlowSet::new(vec![
                Flow::new(1, 1.0 - w2, vec![full(&path)]).unwrap(),
                Flow::new(2, w2, vec![full(&[0, 1])]).unwrap(),
            ])
            .unwrap();
            let p = rng.random_range(1.0..5.0);
            let alpha = rng.random_range(1.0..4.0);
            let incremental = game_with_uniform_cost(
                flows.clone(),
                RevenueModel::new(p, alpha, 0.0).unwrap(),
                1.0,
            )
            .unwrap();
            let full_only =
                game_with_uniform_cost(flows, RevenueModel::all_or_nothing(p), 1.0).unwrap();
            assert!(gamma(&incremental).unwrap() <= gamma(&full_only).unwrap() + 1e-9);
        }
    }

    #[test]
    fn gamma_requires_positive_benefit() {
        let game = line_game(3, 0.0, 1.0);
        assert!(matches!(
            gamma(&game),
            Err(MetricsError::DegenerateBenefit(_))
        ));
    }

    #[test]
    fn gamma_at_least_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        for _ in 0..30 {
            let n: u32 = rng.random_range(2..7);
            let path: Vec<NodeId> = (0..n).collect();
            let flows = FlowSet::new(vec![Flow::new(1, 1.0, vec![full(&path)]).unwrap()]).unwrap();
            let alpha = *[1.0, 2.0, f64::INFINITY]
                .get(rng.random_range(0..3))
                .unwrap();
            let game = game_with_uniform_cost(
                flows,
                RevenueModel::new(rng.random_range(0.5..4.0), alpha, 0.0).unwrap(),
                0.5,
            )
            .unwrap();
            let g = gamma(&game).unwrap();
            assert!(g >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn deployment_price_cases() {
        // Three critical ISPs, total cost 9, unit volume: p_d = 27.
        let b = line_game(3, 1.0, 3.0);
        assert!((deployment_price(&b).unwrap() - 27.0).abs() < 1e-9);
        // One critical ISP, cost 9: p_d = 9.
        let flows = FlowSet::new(vec![Flow::new(
            1,
            1.0,
            vec![RoutePath::with_critical(vec![0, 1], vec![1]).unwrap()],
        )
        .unwrap()])
        .unwrap();
        let a = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(1.0), 9.0).unwrap();
        assert!((deployment_price(&a).unwrap() - 9.0).abs() < 1e-9);
        // γ = 1, Σc = 5, Σw = 1: p_d = 5.
        let flows = FlowSet::new(vec![Flow::new(
            1,
            1.0,
            vec![RoutePath::with_critical(vec![0, 1], vec![0]).unwrap()],
        )
        .unwrap()])
        .unwrap();
        let c = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(1.0), 5.0).unwrap();
        assert!((deployment_price(&c).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn deployability_flips_at_deployment_price() {
        let game = line_game(4, 1.0, 0.8);
        let pd = deployment_price(&game).unwrap();
        let eps = 0.01 * pd;
        let below = game.with_model(RevenueModel::all_or_nothing(pd - eps));
        let above = game.with_model(RevenueModel::all_or_nothing(pd + eps));
        assert!(!deployability(&below).unwrap().necessary_condition);
        assert!(deployability(&above).unwrap().necessary_condition);
    }

    #[test]
    fn architecture_competition() {
        let b = line_game(3, 1.0, 3.0); // p_d = 27
        let flows = FlowSet::new(vec![Flow::new(
            1,
            1.0,
            vec![RoutePath::with_critical(vec![0, 1], vec![1]).unwrap()],
        )
        .unwrap()])
        .unwrap();
        let a = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(1.0), 9.0).unwrap();
        let comp = compare_architectures(&[a.clone(), b]).unwrap();
        assert_eq!(comp.winners, vec![0]);
        assert!((comp.price - 9.0).abs() < 1e-9);
        // A single candidate wins by default.
        let solo = compare_architectures(&[a]).unwrap();
        assert_eq!(solo.winners, vec![0]);
    }

    #[test]
    fn coordination_degree_ratio_wins_competition() {
        // Same total cost, degree-4 vs degree-1 coordination: prices differ
        // by the γ ratio of 4.
        let four = line_game(4, 1.0, 1.0);
        let flows = FlowSet::new(vec![Flow::new(
            1,
            1.0,
            vec![RoutePath::with_critical(vec![0, 1], vec![1]).unwrap()],
        )
        .unwrap()])
        .unwrap();
        let one = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(1.0), 4.0).unwrap();
        let comp = compare_architectures(&[four, one]).unwrap();
        assert_eq!(comp.winners, vec![1]);
        assert!((comp.prices[0] / comp.prices[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn traffic_threshold_uniform_critical_count() {
        // All flows with |C| = N_c: threshold = N_c/(2N_c + 1) < 0.5.
        for n_c in [2usize, 3, 5] {
            let path_a: Vec<NodeId> = (0..n_c as u32).collect();
            let path_b: Vec<NodeId> = (n_c as u32..2 * n_c as u32).collect();
            let flows = FlowSet::new(vec![
                Flow::new(1, 0.5, vec![full(&path_a)]).unwrap(),
                Flow::new(2, 0.5, vec![full(&path_b)]).unwrap(),
            ])
            .unwrap();
            let game =
                game_with_uniform_cost(flows, RevenueModel::all_or_nothing(1.0), 0.1).unwrap();
            let report = traffic_share_threshold(&game);
            let expect = n_c as f64 / (2.0 * n_c as f64 + 1.0);
            assert!((report.threshold - expect).abs() < 1e-12);
            assert!(report.threshold < 0.5);
        }
    }

    #[test]
    fn traffic_threshold_single_isp_unsatisfied() {
        // One flow through one critical ISP: share 1 > threshold 1/3.
        let flows = FlowSet::new(vec![Flow::new(
            1,
            1.0,
            vec![RoutePath::with_critical(vec![0, 1], vec![0]).unwrap()],
        )
        .unwrap()])
        .unwrap();
        let game = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(1.0), 0.1).unwrap();
        let report = traffic_share_threshold(&game);
        assert!((report.threshold - 1.0 / 3.0).abs() < 1e-12);
        assert!(!report.per_isp[0].satisfied);
        assert!(!report.all_satisfied);
    }

    #[test]
    fn flatten_keeps_destination_side() {
        let flows = FlowSet::new(vec![
            Flow::new(1, 1.0, vec![full(&[1, 2, 3, 4, 5])]).unwrap()
        ])
        .unwrap();
        let flat = flatten(&flows, 3).unwrap();
        assert_eq!(flat.flows()[0].primary().nodes(), &[1, 4, 5]);
        // Short paths are unchanged.
        let same = flatten(&flows, 5).unwrap();
        assert_eq!(same.flows()[0].primary().nodes(), &[1, 2, 3, 4, 5]);
        // Bound 2 keeps only the endpoints.
        let ends = flatten(&flows, 2).unwrap();
        assert_eq!(ends.flows()[0].primary().nodes(), &[1, 5]);
        assert!(matches!(flatten(&flows, 1), Err(MetricsError::InvalidM(1))));
    }

    #[test]
    fn flatten_never_raises_gamma() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let mut flows = Vec::new();
            let count = rng.random_range(1..4usize);
            let mut weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let mut next_node = 0u32;
            for (id, &w) in weights.iter().enumerate() {
                let len = rng.random_range(2..7u32);
                let path: Vec<NodeId> = (next_node..next_node + len).collect();
                next_node += len;
                flows.push(Flow::new(id as u32, w, vec![full(&path)]).unwrap());
            }
            let flows = FlowSet::new(flows).unwrap();
            let model = RevenueModel::all_or_nothing(rng.random_range(1.0..4.0));
            let original = game_with_uniform_cost(flows.clone(), model, 0.1).unwrap();
            let m = rng.random_range(2..6usize);
            let flat_flows = flatten(&flows, m).unwrap();
            let flattened = game_with_uniform_cost(flat_flows, model, 0.1).unwrap();
            assert!(gamma(&flattened).unwrap() <= gamma(&original).unwrap() + 1e-9);
        }
    }

    #[test]
    fn partial_deployment_intro_example() {
        // Costs of 3 split into 3 devices of 1 each per ISP: still not
        // deployable, same as the binary game.
        let game = line_game(3, 12.0, 3.0);
        let mut devices = DeviceModel::new();
        for isp in 0..3u32 {
            devices.add_isp(isp, vec![1.0, 1.0, 1.0]);
            devices.require(1, isp, vec![0, 1, 2]);
        }
        let check = partial_deployment_equivalent(&game, &devices).unwrap();
        assert!(!check.binary_deployable);
        assert!(!check.device_deployable);
        assert_eq!(check.binary_deployable, check.device_deployable);
    }

    #[test]
    fn partial_deployment_cost_mismatch() {
        let game = line_game(3, 12.0, 3.0);
        let mut devices = DeviceModel::new();
        for isp in 0..3u32 {
            devices.add_isp(isp, vec![1.0]);
            devices.require(1, isp, vec![0]);
        }
        assert!(matches!(
            partial_deployment_equivalent(&game, &devices),
            Err(MetricsError::CostMismatch { .. })
        ));
    }

    #[test]
    fn partial_deployment_verdicts_match_on_random_splits() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(47);
        for _ in 0..100 {
            let n = rng.random_range(2..5usize);
            let price = rng.random_range(0.5..30.0);
            let cost = rng.random_range(0.1..3.0);
            let game = line_game(n, price, cost);
            let mut devices = DeviceModel::new();
            for isp in 0..n as u32 {
                let pieces = rng.random_range(1..4usize);
                let mut costs = Vec::new();
                let mut rest = cost;
                for k in 0..pieces {
                    if k + 1 == pieces {
                        costs.push(rest);
                    } else {
                        let part = rng.random_range(0.0..rest);
                        costs.push(part);
                        rest -= part;
                    }
                }
                let all: Vec<usize> = (0..costs.len()).collect();
                devices.add_isp(isp, costs);
                devices.require(1, isp, all);
            }
            let check = partial_deployment_equivalent(&game, &devices).unwrap();
            assert_eq!(check.binary_deployable, check.device_deployable);
        }
    }

    #[test]
    fn report_bundles_consistent_numbers() {
        let game = line_game(3, 12.0, 3.0);
        let report = deployability_report(&game).unwrap();
        assert!((report.gamma - 3.0).abs() < 1e-12);
        assert!((report.total_benefit - 12.0).abs() < 1e-12);
        assert!((report.immediate_benefit - 4.0).abs() < 1e-12);
        assert!((report.total_cost - 9.0).abs() < 1e-12);
        assert!(report.profitable);
        assert!(!report.necessary_condition);
        assert!((report.deployment_price.unwrap() - 27.0).abs() < 1e-9);
    }

    #[test]
    fn partial_price_scales_with_delivered_benefit() {
        assert_eq!(partial_deployment_price(10.0, 3.0, 12.0), 2.5);
        assert_eq!(partial_deployment_price(10.0, 12.0, 12.0), 10.0);
        assert_eq!(partial_deployment_price(10.0, 1.0, 0.0), 0.0);
    }
}
