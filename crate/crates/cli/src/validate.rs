//! Machine-readable scenario diagnostics behind `deploygame validate`.

use serde::Serialize;

use deploygame::model::{critical_isps, Flow, Network};
use deploygame::MONEY_EPS;

use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One diagnostic finding.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(code: &'static str, message: String) -> Self {
        Diagnostic {
            code,
            severity: Severity::Error,
            message,
        }
    }

    fn warning(code: &'static str, message: String) -> Self {
        Diagnostic {
            code,
            severity: Severity::Warning,
            message,
        }
    }
}

/// Flow weights must sum to one.
pub fn check_weight_sum(flows: &[Flow]) -> Option<Diagnostic> {
    let sum: f64 = flows.iter().map(Flow::weight).sum();
    if (sum - 1.0).abs() > MONEY_EPS {
        Some(Diagnostic::error(
            "WEIGHT_SUM",
            format!("flow weights sum to {sum}, expected 1"),
        ))
    } else {
        None
    }
}

/// Every path must walk existing edges.
pub fn check_path_edges(flows: &[Flow], network: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for fl in flows {
        for path in fl.paths() {
            for w in path.nodes().windows(2) {
                if !network.has_edge(w[0], w[1]) {
                    out.push(Diagnostic::error(
                        "PATH_EDGE",
                        format!(
                            "flow {}: consecutive nodes {},{} are not an edge",
                            fl.id(),
                            w[0],
                            w[1]
                        ),
                    ));
                }
            }
        }
    }
    out
}

/// Full diagnostics for a built scenario.
pub fn scenario_diagnostics(scenario: &Scenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let network = &scenario.topology.network;
    if network.edge_count() == 0 {
        out.push(Diagnostic::error(
            "EMPTY_GRAPH",
            "topology has no edges".into(),
        ));
    }
    if let Some(d) = check_weight_sum(scenario.flows.flows()) {
        out.push(d);
    }
    // Flattened flows legitimately shortcut network edges; check only the
    // unflattened ones.
    out.extend(check_path_edges(scenario.raw_flows.flows(), network));
    let critical = critical_isps(&scenario.flows);
    if critical.is_empty() {
        out.push(Diagnostic::warning(
            "NO_CRITICAL_ISPS",
            "no flow has critical ISPs; the deployment game is empty".into(),
        ));
    }
    for &p in scenario.game.players() {
        match scenario.game.cost(p) {
            Some(c) if c >= 0.0 => {}
            _ => out.push(Diagnostic::error(
                "COST_MISSING",
                format!("player {p} lacks a valid launching cost"),
            )),
        }
    }
    if scenario.game.model().validate().is_err() {
        out.push(Diagnostic::error(
            "BAD_MODEL",
            "revenue model parameters out of range".into(),
        ));
    }
    out
}

/// Builds the scenario and reports diagnostics; build failures become
/// diagnostics themselves.
pub fn validate_config(config_path: &std::path::Path) -> (Vec<Diagnostic>, Option<Scenario>) {
    match Scenario::load(config_path) {
        Ok(scenario) => (scenario_diagnostics(&scenario), Some(scenario)),
        Err(ScenarioError::Data(crate::dataio::DataError::Unreachable { source, dest })) => (
            vec![Diagnostic::error(
                "UNREACHABLE",
                format!("traffic pair ({source}, {dest}) has no route"),
            )],
            None,
        ),
        Err(e) => {
            let code = if e.is_dataset_missing() {
                "DATASET_MISSING"
            } else {
                "BUILD_FAILED"
            };
            (vec![Diagnostic::error(code, e.to_string())], None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use deploygame::model::{FlowSet, RoutePath};

    #[test]
    fn weight_sum_diagnostic_fires() {
        let path = RoutePath::full_participation(vec![0, 1]).unwrap();
        let flows = vec![
            Flow::new(1, 0.5, vec![path.clone()]).unwrap(),
            Flow::new(2, 0.4, vec![path]).unwrap(),
        ];
        let d = check_weight_sum(&flows).unwrap();
        assert_eq!(d.code, "WEIGHT_SUM");
        // A valid set passes.
        let ok = FlowSet::new(vec![Flow::new(
            1,
            1.0,
            vec![RoutePath::full_participation(vec![0, 1]).unwrap()],
        )
        .unwrap()])
        .unwrap();
        assert!(check_weight_sum(ok.flows()).is_none());
    }

    #[test]
    fn path_edge_diagnostic_fires() {
        let network = Network::new(3, [(0, 1)]).unwrap();
        let flows = vec![Flow::new(
            1,
            1.0,
            vec![RoutePath::full_participation(vec![0, 1, 2]).unwrap()],
        )
        .unwrap()];
        let ds = check_path_edges(&flows, &network);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].code, "PATH_EDGE");
    }

    #[test]
    fn unreachable_pair_is_reported() {
        // Two-component edge list with csv traffic across components.
        let dir = tempfile::tempdir().unwrap();
        let net_path = dir.path().join("net.txt");
        std::fs::write(&net_path, "0 1\n2 3\n").unwrap();
        let traffic_path = dir.path().join("traffic.csv");
        std::fs::write(&traffic_path, "src,dst,volume\n0,3,1.0\n").unwrap();
        let config_path = dir.path().join("scenario.toml");
        std::fs::write(
            &config_path,
            format!(
                r#"
[topology]
source = "edge-list"
path = "{}"

[traffic]
source = "csv"
path = "{}"

[revenue]
unit_price = 1.0

[costs]
unit_cost = 1.0
"#,
                net_path.display(),
                traffic_path.display()
            ),
        )
        .unwrap();
        let (diags, scenario) = validate_config(&config_path);
        assert!(scenario.is_none());
        assert_eq!(diags[0].code, "UNREACHABLE");
        assert!(diags[0].message.contains('0') && diags[0].message.contains('3'));
    }
}
