//! Turns a [`ScenarioConfig`](crate::config::ScenarioConfig) into a ready
//! deployment game: topology, traffic, flows, costs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use deploygame::game::{DeploymentGame, GameError};
use deploygame::metrics::{self, MetricsError};
use deploygame::model::{FlowSet, Money, NodeId, RevenueModel};

use crate::config::{
    ConfigError, CostRule, PathPolicyKind, ScenarioConfig, TopologySource, TrafficSource,
};
use crate::dataio::{
    self, build_flows, gravity_traffic, largest_component, DataError, GravityParams, PathPolicy,
    Topology, TopologyFormat, TrafficMatrix,
};

#[derive(Debug)]
pub enum ScenarioError {
    Config(ConfigError),
    Data(DataError),
    Game(GameError),
    Metrics(MetricsError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Config(e) => write!(f, "{e}"),
            ScenarioError::Data(e) => write!(f, "{e}"),
            ScenarioError::Game(e) => write!(f, "{e}"),
            ScenarioError::Metrics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<ConfigError> for ScenarioError {
    fn from(e: ConfigError) -> Self {
        ScenarioError::Config(e)
    }
}
impl From<DataError> for ScenarioError {
    fn from(e: DataError) -> Self {
        ScenarioError::Data(e)
    }
}
impl From<GameError> for ScenarioError {
    fn from(e: GameError) -> Self {
        ScenarioError::Game(e)
    }
}
impl From<MetricsError> for ScenarioError {
    fn from(e: MetricsError) -> Self {
        ScenarioError::Metrics(e)
    }
}

impl ScenarioError {
    /// True when the failure is a missing dataset file.
    pub fn is_dataset_missing(&self) -> bool {
        matches!(self, ScenarioError::Config(ConfigError::DatasetMissing(_)))
    }
}

/// A fully built scenario.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub topology: Topology,
    pub traffic: TrafficMatrix,
    /// Flows before any flattening.
    pub raw_flows: FlowSet,
    /// Flows the game runs on (flattened when configured).
    pub flows: FlowSet,
    pub game: DeploymentGame,
}

impl Scenario {
    /// Builds the scenario from a config file path.
    pub fn load(config_path: &Path) -> Result<Self, ScenarioError> {
        let config = ScenarioConfig::load(config_path)?;
        Self::build(config, config_path.parent())
    }

    /// Builds the scenario from an already-parsed config; `config_dir`
    /// anchors relative dataset paths.
    pub fn build(config: ScenarioConfig, config_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let mut topology = match config.topology.source {
            TopologySource::SyntheticResearch => dataio::synthetic_research_topology(),
            TopologySource::EdgeList | TopologySource::CaidaAsRel => {
                let raw = config
                    .topology
                    .path
                    .as_ref()
                    .expect("validated: file sources carry a path");
                let path = config.resolve_path(raw, config_dir)?;
                let format = match config.topology.source {
                    TopologySource::EdgeList => TopologyFormat::EdgeList,
                    _ => TopologyFormat::CaidaAsRel,
                };
                dataio::load_topology(&path, format)?
            }
        };
        if config.topology.largest_component {
            topology = largest_component(&topology);
        }
        let traffic = match config.traffic.source {
            TrafficSource::Gravity => {
                let params = GravityParams {
                    seed: config.traffic.seed,
                    mean: config.traffic.mean,
                    flow_fraction: config.traffic.flow_fraction,
                };
                gravity_traffic(&topology.network, &params)?
            }
            TrafficSource::Csv => {
                let raw = config
                    .traffic
                    .path
                    .as_ref()
                    .expect("validated: csv traffic carries a path");
                let path = config.resolve_path(raw, config_dir)?;
                dataio::load_traffic_csv(&path)?
            }
        };
        let policy = match config.paths.policy {
            PathPolicyKind::Shortest => PathPolicy::Shortest,
            PathPolicyKind::KShortest => PathPolicy::KShortest(config.paths.k),
        };
        let raw_flows = build_flows(&topology.network, &traffic, policy)?;
        let flows = match &config.flatten {
            Some(f) => metrics::flatten(&raw_flows, f.max_path_len)?,
            None => raw_flows.clone(),
        };
        let model = RevenueModel::new(
            config.revenue.unit_price,
            config.revenue.alpha.0,
            config.revenue.loss_scale,
        )
        .map_err(|e| ScenarioError::Data(DataError::Model(e)))?;
        let costs = costs_for(&config, &flows);
        let game = DeploymentGame::new(topology.network.clone(), flows.clone(), model, &costs)?;
        Ok(Scenario {
            config,
            topology,
            traffic,
            raw_flows,
            flows,
            game,
        })
    }

    /// The game under a different unit price, all else equal.
    pub fn game_at_price(&self, price: f64) -> DeploymentGame {
        let model = RevenueModel {
            unit_price: price,
            ..*self.game.model()
        };
        self.game.with_model(model)
    }

    /// The game under a different incremental exponent.
    pub fn game_at_alpha(&self, price: f64, alpha: f64) -> DeploymentGame {
        let model = RevenueModel {
            unit_price: price,
            alpha,
            ..*self.game.model()
        };
        self.game.with_model(model)
    }

    /// The game on flows flattened to `max_len`, with costs recomputed on
    /// the flattened paths.
    pub fn game_flattened(
        &self,
        max_len: usize,
        price: f64,
    ) -> Result<DeploymentGame, ScenarioError> {
        let flows = metrics::flatten(&self.raw_flows, max_len)?;
        let costs = costs_for(&self.config, &flows);
        let model = RevenueModel {
            unit_price: price,
            ..*self.game.model()
        };
        Ok(DeploymentGame::new(
            self.topology.network.clone(),
            flows,
            model,
            &costs,
        )?)
    }
}

fn costs_for(config: &ScenarioConfig, flows: &FlowSet) -> BTreeMap<NodeId, Money> {
    match config.costs.rule {
        CostRule::TrafficProportional => dataio::assign_costs(flows, config.costs.unit_cost),
        CostRule::Uniform => dataio::uniform_costs(flows, config.costs.unit_cost),
    }
}
