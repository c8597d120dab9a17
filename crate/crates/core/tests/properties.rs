//! Property tests over randomized model instances.

use proptest::prelude::*;

use deploygame::game::game_with_uniform_cost;
use deploygame::metrics::flatten;
use deploygame::model::{
    coalition_value, routed_path, DeploymentState, Flow, FlowSet, NodeId, RevenueModel, RoutePath,
};
use deploygame::shapley::distribution_mechanism;

fn full(nodes: &[NodeId]) -> RoutePath {
    RoutePath::full_participation(nodes.to_vec()).unwrap()
}

/// Strategy: a set of disjoint simple paths turned into a normalized flow
/// set (up to 4 flows, path lengths 2..6).
fn flow_set_strategy() -> impl Strategy<Value = FlowSet> {
    (1usize..5, proptest::collection::vec(2u32..7, 1..5))
        .prop_flat_map(|(count, lens)| {
            let lens: Vec<u32> = lens.into_iter().take(count.max(1)).collect();
            let weights = proptest::collection::vec(0.05f64..1.0, lens.len()..=lens.len());
            (Just(lens), weights)
        })
        .prop_map(|(lens, weights)| {
            let total: f64 = weights.iter().sum();
            let mut next = 0u32;
            let mut flows = Vec::new();
            for (i, (&len, w)) in lens.iter().zip(&weights).enumerate() {
                let path: Vec<NodeId> = (next..next + len).collect();
                next += len;
                flows.push(Flow::new(i as u32, w / total, vec![full(&path)]).unwrap());
            }
            FlowSet::new(flows).unwrap()
        })
}

proptest! {
    /// Flattening caps path lengths, keeps endpoints and weights, and
    /// leaves short paths alone.
    #[test]
    fn flatten_respects_bounds(flows in flow_set_strategy(), max_len in 2usize..6) {
        let flat = flatten(&flows, max_len).unwrap();
        prop_assert_eq!(flat.len(), flows.len());
        for (before, after) in flows.iter().zip(flat.iter()) {
            prop_assert_eq!(before.weight(), after.weight());
            let b = before.primary();
            let a = after.primary();
            prop_assert!(a.len() <= max_len.max(b.len()));
            if b.len() <= max_len {
                prop_assert_eq!(b.nodes(), a.nodes());
            } else {
                prop_assert_eq!(a.len(), max_len);
            }
            prop_assert_eq!(b.source(), a.source());
            prop_assert_eq!(b.destination(), a.destination());
            // Full participation after flattening.
            prop_assert_eq!(a.critical().len(), a.len());
        }
    }

    /// The distributed shares always sum to the coalition value, and the
    /// currently routed path is always one of the flow's paths.
    #[test]
    fn shares_are_efficient(flows in flow_set_strategy(), mask in 0u64..4096, price in 0.5f64..8.0) {
        let model = RevenueModel::all_or_nothing(price);
        let capacity = flows
            .iter()
            .flat_map(|f| f.primary().nodes().iter().copied())
            .max()
            .unwrap_or(0)
            + 1;
        let s = DeploymentState::from_nodes(
            capacity,
            (0..capacity).filter(|&n| mask >> (n % 64) & 1 == 1),
        )
        .unwrap();
        for fl in &flows {
            let routed = routed_path(fl, &s);
            prop_assert!(fl.paths().iter().any(|p| p == routed));
        }
        let alloc = distribution_mechanism(&flows, &s, &model).unwrap();
        let v = coalition_value(&flows, &s, &model);
        prop_assert!((alloc.total() - v).abs() < 1e-9);
    }

    /// Extremal equilibria bracket the robust equilibrium component-wise.
    #[test]
    fn robust_lies_between_extremal(flows in flow_set_strategy(), price in 0.5f64..8.0, cost in 0.01f64..1.0) {
        let game = game_with_uniform_cost(flows, RevenueModel::all_or_nothing(price), cost).unwrap();
        if game.player_count() > 16 {
            return Ok(());
        }
        let (smallest, largest) = deploygame::game::extremal_equilibria(&game).unwrap();
        let robust = deploygame::game::robust_equilibrium(&game).unwrap();
        prop_assert!(smallest.le(&robust.profile));
        prop_assert!(robust.profile.le(&largest));
    }
}
