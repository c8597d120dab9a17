//! Dataset ingestion and synthesis.
//!
//! Loaders for plain edge lists and CAIDA AS-relationship files, a
//! largest-connected-component extractor, gravity-model traffic synthesis,
//! hop-count shortest-path flow construction (with an optional loop-free
//! k-shortest alternative-path policy), traffic-proportional launching
//! costs, and a small synthetic research-network generator for CI runs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deploygame::model::{Flow, FlowSet, ModelError, Money, Network, NodeId, RoutePath};

#[derive(Debug)]
pub enum DataError {
    Io(std::io::Error),
    /// Unparseable input line (1-based line number).
    Parse {
        line: usize,
        message: String,
    },
    EmptyGraph,
    Unreachable {
        source: NodeId,
        dest: NodeId,
    },
    Model(ModelError),
    BadParameter(String),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io(e) => write!(f, "io error: {e}"),
            DataError::Parse { line, message } => {
                write!(f, "parse error at line {line}: {message}")
            }
            DataError::EmptyGraph => write!(f, "topology has no edges"),
            DataError::Unreachable { source, dest } => {
                write!(f, "no path from {source} to {dest}")
            }
            DataError::Model(e) => write!(f, "model error: {e}"),
            DataError::BadParameter(msg) => write!(f, "bad parameter: {msg}"),
        }
    }
}

impl std::error::Error for DataError {}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e)
    }
}

impl From<ModelError> for DataError {
    fn from(e: ModelError) -> Self {
        DataError::Model(e)
    }
}

/// Supported topology file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyFormat {
    /// One `<id> <id>` pair per line; `#` starts a comment.
    EdgeList,
    /// CAIDA serial-1 AS relationships: `<asn>|<asn>|<rel>`, `#` headers.
    CaidaAsRel,
}

/// A loaded topology: the dense-id network plus the original node labels.
#[derive(Debug, Clone)]
pub struct Topology {
    pub network: Network,
    /// Original identifier of each dense node id.
    pub labels: Vec<String>,
}

impl Topology {
    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node as usize]
    }
}

/// Loads a topology file, remapping node identifiers to dense ids and
/// deduplicating undirected edges.
pub fn load_topology(path: &Path, format: TopologyFormat) -> Result<Topology, DataError> {
    let text = fs::read_to_string(path)?;
    parse_topology(&text, format)
}

/// [`load_topology`] on in-memory text.
pub fn parse_topology(text: &str, format: TopologyFormat) -> Result<Topology, DataError> {
    let mut ids: BTreeMap<String, NodeId> = BTreeMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = match format {
            TopologyFormat::EdgeList => {
                let mut parts = line.split_whitespace();
                match (parts.next(), parts.next()) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(DataError::Parse {
                            line: lineno + 1,
                            message: format!("expected two node ids, got {line:?}"),
                        })
                    }
                }
            }
            TopologyFormat::CaidaAsRel => {
                let mut parts = line.split('|');
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(a), Some(b), Some(_)) => (a, b),
                    _ => {
                        return Err(DataError::Parse {
                            line: lineno + 1,
                            message: format!("expected asn|asn|rel, got {line:?}"),
                        })
                    }
                }
            }
        };
        for n in [a, b] {
            if n.parse::<i64>().is_err() {
                return Err(DataError::Parse {
                    line: lineno + 1,
                    message: format!("node id {n:?} is not an integer"),
                });
            }
        }
        if a == b {
            return Err(DataError::Parse {
                line: lineno + 1,
                message: format!("self-loop at {a}"),
            });
        }
        let mut id_of = |name: &str| -> NodeId {
            if let Some(&id) = ids.get(name) {
                id
            } else {
                let id = labels.len() as NodeId;
                ids.insert(name.to_string(), id);
                labels.push(name.to_string());
                id
            }
        };
        let ia = id_of(a);
        let ib = id_of(b);
        edges.push((ia, ib));
    }
    if edges.is_empty() {
        return Err(DataError::EmptyGraph);
    }
    let network = Network::new(labels.len() as u32, edges)?;
    Ok(Topology { network, labels })
}

/// Serializes a network as an edge list using the topology's labels.
pub fn save_edge_list(topo: &Topology, path: &Path) -> Result<(), DataError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "# undirected edge list, one pair per line")?;
    for (a, b) in topo.network.edges() {
        writeln!(out, "{} {}", topo.label(a), topo.label(b))?;
    }
    Ok(())
}

/// Induced subgraph on the largest connected component, nodes reindexed
/// densely; ties go to the component with the smallest minimum node id.
pub fn largest_component(topo: &Topology) -> Topology {
    let n = topo.network.node_count() as usize;
    let mut component = vec![usize::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let comp = sizes.len();
        let mut queue = std::collections::VecDeque::new();
        component[start] = comp;
        queue.push_back(start as NodeId);
        let mut size = 0usize;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &u in topo.network.neighbors(v) {
                if component[u as usize] == usize::MAX {
                    component[u as usize] = comp;
                    queue.push_back(u);
                }
            }
        }
        sizes.push(size);
    }
    // Components are discovered in ascending minimum-node-id order, so the
    // first maximal one satisfies the tie-break.
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut remap: Vec<Option<NodeId>> = vec![None; n];
    let mut labels = Vec::new();
    for v in 0..n {
        if component[v] == best {
            remap[v] = Some(labels.len() as NodeId);
            labels.push(topo.labels[v].clone());
        }
    }
    let edges = topo
        .network
        .edges()
        .filter_map(|(a, b)| Some((remap[a as usize]?, remap[b as usize]?)));
    let network = Network::new(labels.len() as u32, edges).expect("filtered edges are valid");
    Topology { network, labels }
}

/// Sparse traffic matrix: positive-volume ordered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    entries: Vec<(NodeId, NodeId, f64)>,
}

impl TrafficMatrix {
    pub fn new(mut entries: Vec<(NodeId, NodeId, f64)>) -> Self {
        entries.retain(|&(i, j, v)| i != j && v > 0.0 && v.is_finite());
        entries.sort_by_key(|&(i, j, _)| (i, j));
        TrafficMatrix { entries }
    }

    pub fn entries(&self) -> &[(NodeId, NodeId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.entries.iter().map(|&(_, _, v)| v).sum()
    }
}

/// Loads a `src,dst,volume` CSV (header line optional, `#` comments).
pub fn load_traffic_csv(path: &Path) -> Result<TrafficMatrix, DataError> {
    let text = fs::read_to_string(path)?;
    parse_traffic_csv(&text)
}

/// [`load_traffic_csv`] on in-memory text. Node ids refer to dense ids of
/// the already-loaded topology.
pub fn parse_traffic_csv(text: &str) -> Result<TrafficMatrix, DataError> {
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.to_ascii_lowercase().starts_with("src") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(DataError::Parse {
                line: lineno + 1,
                message: format!("expected src,dst,volume, got {line:?}"),
            });
        }
        let src: NodeId = fields[0].parse().map_err(|_| DataError::Parse {
            line: lineno + 1,
            message: format!("bad source {:?}", fields[0]),
        })?;
        let dst: NodeId = fields[1].parse().map_err(|_| DataError::Parse {
            line: lineno + 1,
            message: format!("bad destination {:?}", fields[1]),
        })?;
        let volume: f64 = fields[2].parse().map_err(|_| DataError::Parse {
            line: lineno + 1,
            message: format!("bad volume {:?}", fields[2]),
        })?;
        if !volume.is_finite() || volume < 0.0 {
            return Err(DataError::Parse {
                line: lineno + 1,
                message: format!("volume {volume} must be finite and non-negative"),
            });
        }
        entries.push((src, dst, volume));
    }
    Ok(TrafficMatrix::new(entries))
}

pub fn save_traffic_csv(matrix: &TrafficMatrix, path: &Path) -> Result<(), DataError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "src,dst,volume")?;
    for &(i, j, v) in matrix.entries() {
        writeln!(out, "{i},{j},{v}")?;
    }
    Ok(())
}

/// Gravity-model parameters.
#[derive(Debug, Clone, Copy)]
pub struct GravityParams {
    pub seed: u64,
    /// Mean of the exponential repulsion/attraction factors.
    pub mean: f64,
    /// Fraction of ordered node pairs carrying positive demand.
    pub flow_fraction: f64,
}

/// Synthesizes a traffic matrix by the gravity method: per-node repulsion
/// and attraction factors are i.i.d. exponential, the volume of pair
/// `(i,j)` is their product, and `ceil(flow_fraction * I(I-1))` ordered
/// pairs are selected uniformly without replacement.
pub fn gravity_traffic(
    network: &Network,
    params: &GravityParams,
) -> Result<TrafficMatrix, DataError> {
    if !(params.flow_fraction > 0.0 && params.flow_fraction <= 1.0) {
        return Err(DataError::BadParameter(format!(
            "flow_fraction {} outside (0, 1]",
            params.flow_fraction
        )));
    }
    if !(params.mean > 0.0) {
        return Err(DataError::BadParameter(format!(
            "gravity mean {} must be positive",
            params.mean
        )));
    }
    let n = network.node_count() as u64;
    if n < 2 {
        return Err(DataError::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let out: Vec<f64> = (0..n)
        .map(|_| sample_exponential(&mut rng, params.mean))
        .collect();
    let inn: Vec<f64> = (0..n)
        .map(|_| sample_exponential(&mut rng, params.mean))
        .collect();
    let total_pairs = n * (n - 1);
    let want = ((params.flow_fraction * total_pairs as f64).ceil() as u64).clamp(1, total_pairs);
    // Sequential selection sampling: pair t is included with probability
    // (want - chosen)/(total - t), giving a uniform sample without
    // replacement in one pass and O(1) memory.
    let mut entries = Vec::with_capacity(want as usize);
    let mut chosen = 0u64;
    let mut t = 0u64;
    'outer: for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let remaining = total_pairs - t;
            let need = want - chosen;
            if need == 0 {
                break 'outer;
            }
            if rng.random::<f64>() * (remaining as f64) < need as f64 {
                entries.push((i as NodeId, j as NodeId, out[i as usize] * inn[j as usize]));
                chosen += 1;
            }
            t += 1;
        }
    }
    Ok(TrafficMatrix::new(entries))
}

fn sample_exponential(rng: &mut impl Rng, mean: f64) -> f64 {
    let u: f64 = rng.random();
    -mean * (1.0 - u).ln()
}

/// The per-node exponential factors alone (testing hook).
pub fn gravity_factors(node_count: usize, seed: u64, mean: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = (0..node_count)
        .map(|_| sample_exponential(&mut rng, mean))
        .collect();
    let inn = (0..node_count)
        .map(|_| sample_exponential(&mut rng, mean))
        .collect();
    (out, inn)
}

/// Routing-path construction policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathPolicy {
    /// Hop-count shortest path; ties resolved to the lexicographically
    /// smallest node sequence.
    Shortest,
    /// Up to `k` loop-free paths ordered by (length, lexicographic).
    KShortest(usize),
}

/// Builds the flow set for every positive-traffic pair: paths per the
/// policy, critical sets under full-path participation, weights normalized
/// to sum 1.
pub fn build_flows(
    network: &Network,
    traffic: &TrafficMatrix,
    policy: PathPolicy,
) -> Result<FlowSet, DataError> {
    let total = traffic.total_volume();
    if total <= 0.0 {
        return Err(DataError::BadParameter(
            "traffic matrix has no volume".into(),
        ));
    }
    let mut flows = Vec::with_capacity(traffic.len());
    // Group flows by destination so one reverse BFS serves every source.
    let mut by_dest: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
    for &(src, dst, vol) in traffic.entries() {
        by_dest.entry(dst).or_default().push((src, vol));
    }
    let mut id: u32 = 0;
    let mut flow_records: BTreeMap<(NodeId, NodeId), (u32, f64, Vec<Vec<NodeId>>)> =
        BTreeMap::new();
    for (&dst, sources) in &by_dest {
        let dist = bfs_distances(network, dst);
        for &(src, vol) in sources {
            if dist[src as usize] == u32::MAX {
                return Err(DataError::Unreachable {
                    source: src,
                    dest: dst,
                });
            }
            let primary = lex_shortest_path(network, src, dst, &dist);
            let paths = match policy {
                PathPolicy::Shortest => vec![primary],
                PathPolicy::KShortest(k) => k_shortest_paths(network, src, dst, k.max(1)),
            };
            flow_records.insert((src, dst), (id, vol, paths));
            id += 1;
        }
    }
    for ((_, _), (fid, vol, paths)) in flow_records {
        let routes: Result<Vec<RoutePath>, ModelError> = paths
            .into_iter()
            .map(RoutePath::full_participation)
            .collect();
        flows.push(Flow::new(fid, vol / total, routes?)?);
    }
    Ok(FlowSet::new(flows)?)
}

/// BFS hop distances to `target` (u32::MAX when unreachable).
pub fn bfs_distances(network: &Network, target: NodeId) -> Vec<u32> {
    let n = network.node_count() as usize;
    let mut dist = vec![u32::MAX; n];
    dist[target as usize] = 0;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(target);
    while let Some(v) = queue.pop_front() {
        let d = dist[v as usize];
        for &u in network.neighbors(v) {
            if dist[u as usize] == u32::MAX {
                dist[u as usize] = d + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Lexicographically smallest shortest path from `src` to `dst`, walking
/// the smallest-id neighbor that decreases the distance-to-destination.
fn lex_shortest_path(
    network: &Network,
    src: NodeId,
    dst: NodeId,
    dist_to_dst: &[u32],
) -> Vec<NodeId> {
    let mut path = vec![src];
    let mut cur = src;
    while cur != dst {
        let d = dist_to_dst[cur as usize];
        // Neighbors are sorted ascending, so the first on a shortest path
        // is the lexicographic choice.
        let next = network
            .neighbors(cur)
            .iter()
            .copied()
            .find(|&u| dist_to_dst[u as usize] + 1 == d)
            .expect("distance decreases along some neighbor");
        path.push(next);
        cur = next;
    }
    path
}

/// Loop-free k shortest paths by Yen's algorithm on hop counts, ordered by
/// (length, lexicographic node sequence).
pub fn k_shortest_paths(network: &Network, src: NodeId, dst: NodeId, k: usize) -> Vec<Vec<NodeId>> {
    let shortest = |banned_nodes: &[bool],
                    banned_edges: &std::collections::BTreeSet<(NodeId, NodeId)>,
                    from: NodeId|
     -> Option<Vec<NodeId>> {
        // BFS from dst respecting bans, then lexicographic walk from `from`.
        let n = network.node_count() as usize;
        let mut dist = vec![u32::MAX; n];
        if banned_nodes[dst as usize] {
            return None;
        }
        dist[dst as usize] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(dst);
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize];
            for &u in network.neighbors(v) {
                let e = (u.min(v), u.max(v));
                if banned_nodes[u as usize] || banned_edges.contains(&e) {
                    continue;
                }
                if dist[u as usize] == u32::MAX {
                    dist[u as usize] = d + 1;
                    queue.push_back(u);
                }
            }
        }
        if dist[from as usize] == u32::MAX {
            return None;
        }
        let mut path = vec![from];
        let mut cur = from;
        while cur != dst {
            let d = dist[cur as usize];
            let next = network.neighbors(cur).iter().copied().find(|&u| {
                let e = (u.min(cur), u.max(cur));
                !banned_nodes[u as usize] && !banned_edges.contains(&e) && dist[u as usize] + 1 == d
            })?;
            path.push(next);
            cur = next;
        }
        Some(path)
    };
    let n = network.node_count() as usize;
    let no_nodes = vec![false; n];
    let no_edges = std::collections::BTreeSet::new();
    let Some(first) = shortest(&no_nodes, &no_edges, src) else {
        return Vec::new();
    };
    let mut accepted: Vec<Vec<NodeId>> = vec![first];
    let mut candidates: std::collections::BTreeSet<(usize, Vec<NodeId>)> =
        std::collections::BTreeSet::new();
    while accepted.len() < k {
        let last = accepted.last().expect("accepted starts non-empty").clone();
        for spur_idx in 0..last.len() - 1 {
            let spur_node = last[spur_idx];
            let root = &last[..=spur_idx];
            let mut banned_edges = std::collections::BTreeSet::new();
            for path in &accepted {
                if path.len() > spur_idx + 1 && path[..=spur_idx] == *root {
                    let a = path[spur_idx];
                    let b = path[spur_idx + 1];
                    banned_edges.insert((a.min(b), a.max(b)));
                }
            }
            let mut banned_nodes = vec![false; n];
            for &v in &root[..spur_idx] {
                banned_nodes[v as usize] = true;
            }
            if let Some(spur) = shortest(&banned_nodes, &banned_edges, spur_node) {
                let mut cand = root[..spur_idx].to_vec();
                cand.extend(spur);
                if !accepted.contains(&cand) {
                    candidates.insert((cand.len(), cand));
                }
            }
        }
        let Some(best) = candidates.iter().next().cloned() else {
            break;
        };
        candidates.remove(&best);
        accepted.push(best.1);
    }
    accepted.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    accepted.dedup();
    accepted.truncate(k);
    accepted
}

/// Launching costs proportional to each node's primary-path traffic:
/// `c_i = unit_cost * Σ_{flows through i} w_f`.
pub fn assign_costs(flows: &FlowSet, unit_cost: f64) -> BTreeMap<NodeId, Money> {
    let mut costs = BTreeMap::new();
    for fl in flows {
        for &n in fl.primary().nodes() {
            *costs.entry(n).or_insert(0.0) += unit_cost * fl.weight();
        }
    }
    costs
}

/// Uniform launching costs for every node on a primary path.
pub fn uniform_costs(flows: &FlowSet, cost: f64) -> BTreeMap<NodeId, Money> {
    let mut costs = BTreeMap::new();
    for fl in flows {
        for &n in fl.primary().nodes() {
            costs.entry(n).or_insert(cost);
        }
    }
    costs
}

/// Synthetic 23-node research-network-like topology for CI: a national
/// ring with regional spurs and a few cross links, deterministic in the
/// seed only through the traffic matrix.
pub fn synthetic_research_topology() -> Topology {
    let ring: Vec<(NodeId, NodeId)> = (0..12).map(|i| (i, (i + 1) % 12)).collect();
    let spurs: Vec<(NodeId, NodeId)> = vec![
        (0, 12),
        (1, 13),
        (2, 14),
        (3, 15),
        (4, 16),
        (5, 17),
        (6, 18),
        (7, 19),
        (8, 20),
        (9, 21),
        (10, 22),
    ];
    let chords: Vec<(NodeId, NodeId)> = vec![(0, 6), (2, 8), (4, 10), (12, 14), (17, 19)];
    let edges = ring.into_iter().chain(spurs).chain(chords);
    let network = Network::new(23, edges).expect("static edge list is valid");
    let labels = (0..23).map(|i| format!("as{i}")).collect();
    Topology { network, labels }
}
