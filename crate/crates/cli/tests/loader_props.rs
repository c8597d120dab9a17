//! Property tests for the dataset loaders.

use proptest::prelude::*;

use deploygame_cli::dataio::{parse_topology, save_edge_list, TopologyFormat};

proptest! {
    /// Save-then-load yields an isomorphic network (identical under the
    /// label mapping), for arbitrary edge sets.
    #[test]
    fn edge_list_round_trip(raw_edges in proptest::collection::vec((0u32..40, 0u32..40), 1..60)) {
        let mut text = String::from("# generated\n");
        let mut any = false;
        for (a, b) in &raw_edges {
            if a != b {
                text.push_str(&format!("{a} {b}\n"));
                any = true;
            }
        }
        prop_assume!(any);
        let topo = parse_topology(&text, TopologyFormat::EdgeList).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        save_edge_list(&topo, &path).unwrap();
        let reloaded =
            parse_topology(&std::fs::read_to_string(&path).unwrap(), TopologyFormat::EdgeList)
                .unwrap();
        prop_assert_eq!(topo.network.node_count(), reloaded.network.node_count());
        prop_assert_eq!(topo.network.edge_count(), reloaded.network.edge_count());
        // Edges agree after translating through the label maps.
        let index_of = |labels: &[String], name: &str| {
            labels.iter().position(|l| l == name).unwrap() as u32
        };
        for (a, b) in topo.network.edges() {
            let la = topo.label(a);
            let lb = topo.label(b);
            let ra = index_of(&reloaded.labels, la);
            let rb = index_of(&reloaded.labels, lb);
            prop_assert!(reloaded.network.has_edge(ra, rb));
        }
    }

    /// CAIDA relationship annotations never affect adjacency.
    #[test]
    fn caida_relationship_is_ignored(rels in proptest::collection::vec(-1i32..2, 1..20)) {
        let mut text = String::new();
        for (i, rel) in rels.iter().enumerate() {
            text.push_str(&format!("{}|{}|{}\n", i, i + 1, rel));
        }
        let topo = parse_topology(&text, TopologyFormat::CaidaAsRel).unwrap();
        prop_assert_eq!(topo.network.edge_count(), rels.len());
    }
}
