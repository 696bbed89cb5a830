//! Pipeline network description: nodes, pipes, compressors.
//!
//! The network is read from a JSON document with SI units throughout
//! (Pa, kg/s, m, m/s). After parsing, nodes and edges are sorted by id so
//! that variable layouts built on top of the network are reproducible.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::NetworkError;
use crate::stochastic::UncertaintySpec;

/// Relative mismatch allowed between a config-supplied resistance and the
/// value recomputed from the pipe geometry.
const RESISTANCE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Slack,
    Flow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    /// Fixed pressure (Pa) for slack nodes.
    pub slack_pressure: Option<f64>,
    pub pressure_min: f64,
    pub pressure_max: f64,
    /// Base withdrawal d_j (kg/s).
    pub demand: f64,
    /// Base injection s_j (kg/s).
    pub supply: f64,
    pub demand_price: f64,
    pub supply_price: f64,
    pub demand_optimized: bool,
    pub supply_optimized: bool,
    pub demand_max: f64,
    pub supply_max: f64,
    pub uncertainty: Option<UncertaintySpec>,
    /// Acceptable expected penalized violation of the minimum pressure.
    pub epsilon: Option<f64>,
}

impl Node {
    pub fn is_slack(&self) -> bool {
        self.kind == NodeKind::Slack
    }

    /// Squared-pressure bounds (Pa²).
    pub fn squared_pressure_bounds(&self) -> (f64, f64) {
        (self.pressure_min.powi(2), self.pressure_max.powi(2))
    }

    /// Whether this node's minimum pressure is enforced through the chance
    /// constraint rather than as a hard bound.
    pub fn is_chance_constrained(&self) -> bool {
        self.uncertainty.is_some() || self.epsilon.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
    pub diameter: f64,
    pub friction: f64,
    /// Cross-sectional area πD²/4 (m²).
    pub area: f64,
    /// Lumped resistance a²λL/(A²D), Pa² per (kg/s)².
    pub resistance: f64,
}

impl Pipe {
    pub fn new(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        length: f64,
        diameter: f64,
        friction: f64,
        wave_speed: f64,
    ) -> Self {
        let area = PI * diameter * diameter / 4.0;
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length,
            diameter,
            friction,
            area,
            resistance: pipe_resistance(length, diameter, friction, wave_speed),
        }
    }
}

/// κ = a²λL/(A²D) with A = πD²/4.
pub fn pipe_resistance(length: f64, diameter: f64, friction: f64, wave_speed: f64) -> f64 {
    let area = PI * diameter * diameter / 4.0;
    wave_speed * wave_speed * friction * length / (area * area * diameter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compressor {
    pub id: String,
    pub from: String,
    pub to: String,
    pub alpha_max: f64,
    pub eta: f64,
    pub m: f64,
}

/// Edge reference into either the pipe or the compressor list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRef {
    Pipe(usize),
    Compressor(usize),
}

/// Signed sparse incidence matrix stored column-wise: each column holds
/// exactly one `-1` (tail node) and one `+1` (head node).
#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    pub num_nodes: usize,
    /// `(from_node, to_node)` per edge; the column has -1 at `from`, +1 at `to`.
    pub columns: Vec<(usize, usize)>,
}

impl Incidence {
    pub fn num_edges(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, node: usize, edge: usize) -> i8 {
        let (from, to) = self.columns[edge];
        if node == from {
            -1
        } else if node == to {
            1
        } else {
            0
        }
    }

    /// Dense row-major copy, mostly for tests and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<i8>> {
        let mut dense = vec![vec![0i8; self.num_edges()]; self.num_nodes];
        for (k, &(from, to)) in self.columns.iter().enumerate() {
            dense[from][k] = -1;
            dense[to][k] = 1;
        }
        dense
    }

    /// `A φ`: net inflow per node.
    pub fn apply(&self, flows: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes];
        for (k, &(from, to)) in self.columns.iter().enumerate() {
            out[from] -= flows[k];
            out[to] += flows[k];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub wave_speed: f64,
    /// Optional penalty curvature carried with the case file.
    pub penalty_gamma: Option<f64>,
    pub nodes: Vec<Node>,
    pub pipes: Vec<Pipe>,
    pub compressors: Vec<Compressor>,
    node_index: BTreeMap<String, usize>,
}

impl Network {
    /// Builds and validates a network. Nodes, pipes and compressors are
    /// sorted by id.
    pub fn new(
        wave_speed: f64,
        mut nodes: Vec<Node>,
        mut pipes: Vec<Pipe>,
        mut compressors: Vec<Compressor>,
    ) -> Result<Self, NetworkError> {
        if !(wave_speed > 0.0 && wave_speed.is_finite()) {
            return Err(NetworkError::InvalidParameter {
                entity: "network".into(),
                message: format!("wave_speed must be positive, got {wave_speed}"),
            });
        }
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        pipes.sort_by(|a, b| a.id.cmp(&b.id));
        compressors.sort_by(|a, b| a.id.cmp(&b.id));

        let mut node_index = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if node_index.insert(node.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateId(node.id.clone()));
            }
        }
        let mut edge_ids = BTreeSet::new();
        for id in pipes
            .iter()
            .map(|p| &p.id)
            .chain(compressors.iter().map(|c| &c.id))
        {
            if !edge_ids.insert(id.clone()) {
                return Err(NetworkError::DuplicateId(id.clone()));
            }
        }

        let net = Self {
            wave_speed,
            penalty_gamma: None,
            nodes,
            pipes,
            compressors,
            node_index,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        for node in &self.nodes {
            validate_node(node)?;
        }
        for pipe in &self.pipes {
            self.endpoint(&pipe.id, &pipe.from)?;
            self.endpoint(&pipe.id, &pipe.to)?;
            for (name, v) in [
                ("length", pipe.length),
                ("diameter", pipe.diameter),
                ("friction", pipe.friction),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(NetworkError::InvalidParameter {
                        entity: pipe.id.clone(),
                        message: format!("{name} must be positive, got {v}"),
                    });
                }
            }
            if pipe.from == pipe.to {
                return Err(NetworkError::InvalidParameter {
                    entity: pipe.id.clone(),
                    message: "pipe connects a node to itself".into(),
                });
            }
        }
        for comp in &self.compressors {
            self.endpoint(&comp.id, &comp.from)?;
            self.endpoint(&comp.id, &comp.to)?;
            if !(comp.alpha_max >= 1.0 && comp.alpha_max.is_finite()) {
                return Err(NetworkError::InvalidParameter {
                    entity: comp.id.clone(),
                    message: format!("alpha_max must be >= 1, got {}", comp.alpha_max),
                });
            }
            if !(comp.eta >= 0.0 && comp.eta.is_finite()) {
                return Err(NetworkError::InvalidParameter {
                    entity: comp.id.clone(),
                    message: format!("eta must be >= 0, got {}", comp.eta),
                });
            }
            if !(comp.m > 0.0 && comp.m <= 1.0) {
                return Err(NetworkError::InvalidParameter {
                    entity: comp.id.clone(),
                    message: format!("exponent m must lie in (0, 1], got {}", comp.m),
                });
            }
            if comp.from == comp.to {
                return Err(NetworkError::InvalidParameter {
                    entity: comp.id.clone(),
                    message: "compressor connects a node to itself".into(),
                });
            }
        }
        let slack_count = self.nodes.iter().filter(|n| n.is_slack()).count();
        if slack_count == 0 {
            return Err(NetworkError::NoSlack);
        }
        if slack_count > 1 {
            return Err(NetworkError::MultipleSlack(
                self.nodes
                    .iter()
                    .filter(|n| n.is_slack())
                    .map(|n| n.id.clone())
                    .collect(),
            ));
        }
        if let Some(orphan) = self.unreachable_node() {
            return Err(NetworkError::Disconnected(orphan));
        }
        Ok(())
    }

    fn endpoint(&self, edge: &str, node: &str) -> Result<usize, NetworkError> {
        self.node_index
            .get(node)
            .copied()
            .ok_or_else(|| NetworkError::UnknownNode {
                edge: edge.to_string(),
                node: node.to_string(),
            })
    }

    fn unreachable_node(&self) -> Option<String> {
        if self.nodes.is_empty() {
            return None;
        }
        let inc = self.incidence();
        let mut adjacency = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &inc.columns {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.iter()
            .position(|s| !s)
            .map(|i| self.nodes[i].id.clone())
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut Node> {
        self.node_index(id).map(move |i| &mut self.nodes[i])
    }

    pub fn num_edges(&self) -> usize {
        self.pipes.len() + self.compressors.len()
    }

    /// Edge ordering used throughout: pipes first (sorted), then compressors.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRef> + '_ {
        (0..self.pipes.len())
            .map(EdgeRef::Pipe)
            .chain((0..self.compressors.len()).map(EdgeRef::Compressor))
    }

    pub fn edge_id(&self, e: EdgeRef) -> &str {
        match e {
            EdgeRef::Pipe(i) => &self.pipes[i].id,
            EdgeRef::Compressor(i) => &self.compressors[i].id,
        }
    }

    pub fn edge_ids(&self) -> Vec<String> {
        self.edges().map(|e| self.edge_id(e).to_string()).collect()
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges().position(|e| self.edge_id(e) == id)
    }

    pub fn slack_index(&self) -> usize {
        self.nodes
            .iter()
            .position(Node::is_slack)
            .expect("validated network has a slack node")
    }

    /// Signed node-edge incidence: column k has -1 at the node edge k
    /// leaves and +1 at the node it enters.
    pub fn incidence(&self) -> Incidence {
        let idx = |id: &str| self.node_index[id];
        let columns = self
            .pipes
            .iter()
            .map(|p| (idx(&p.from), idx(&p.to)))
            .chain(self.compressors.iter().map(|c| (idx(&c.from), idx(&c.to))))
            .collect();
        Incidence {
            num_nodes: self.nodes.len(),
            columns,
        }
    }

    /// Base withdrawal q_j = d_j − s_j (kg/s), ignoring uncertainty.
    pub fn base_withdrawals(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.demand - n.supply).collect()
    }

    /// Withdrawals with each uncertain node at its mean.
    pub fn mean_withdrawals(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|n| n.demand - n.supply + n.uncertainty.as_ref().map_or(0.0, |u| u.mean()))
            .collect()
    }

    /// Nodes carrying an uncertainty specification.
    pub fn uncertain_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].uncertainty.is_some())
            .collect()
    }

    /// Parses the JSON network document.
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let doc: NetworkDoc =
            serde_json::from_str(text).map_err(|e| NetworkError::Schema(e.to_string()))?;
        doc.into_network()
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkDoc::from(self)).expect("network serializes")
    }
}

fn validate_node(node: &Node) -> Result<(), NetworkError> {
    let bad = |message: String| NetworkError::InvalidParameter {
        entity: node.id.clone(),
        message,
    };
    if !(node.pressure_min >= 0.0 && node.pressure_min < node.pressure_max) {
        return Err(bad(format!(
            "pressure bounds must satisfy 0 <= min < max, got [{}, {}]",
            node.pressure_min, node.pressure_max
        )));
    }
    match node.kind {
        NodeKind::Slack => {
            let p = node
                .slack_pressure
                .ok_or_else(|| bad("slack node requires slack_pressure".into()))?;
            if p < node.pressure_min || p > node.pressure_max {
                return Err(bad(format!(
                    "slack pressure {p} outside [{}, {}]",
                    node.pressure_min, node.pressure_max
                )));
            }
            if node.demand_optimized || node.supply_optimized {
                return Err(bad("slack node cannot carry optimized flows".into()));
            }
            if node.uncertainty.is_some() {
                return Err(bad("slack node cannot carry uncertain withdrawal".into()));
            }
        }
        NodeKind::Flow => {
            if node.slack_pressure.is_some() {
                return Err(bad("flow node must not set slack_pressure".into()));
            }
        }
    }
    for (name, v) in [
        ("demand", node.demand),
        ("supply", node.supply),
        ("demand_max", node.demand_max),
        ("supply_max", node.supply_max),
    ] {
        if !(v >= 0.0) {
            return Err(bad(format!("{name} must be non-negative, got {v}")));
        }
    }
    if node.demand > 0.0 && node.supply > 0.0 {
        return Err(NetworkError::ConflictingFlows(node.id.clone()));
    }
    if node.demand_optimized && node.supply_optimized {
        return Err(NetworkError::ConflictingFlows(node.id.clone()));
    }
    if let Some(eps) = node.epsilon {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(bad(format!("epsilon must be non-negative, got {eps}")));
        }
    }
    if let Some(spec) = &node.uncertainty {
        spec.validate().map_err(|e| bad(e.to_string()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    wave_speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty_gamma: Option<f64>,
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    pipes: Vec<PipeDoc>,
    #[serde(default)]
    compressors: Vec<CompressorDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slack_pressure: Option<f64>,
    pressure_min: f64,
    pressure_max: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    demand: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    supply: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    demand_price: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    supply_price: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    demand_optimized: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    supply_optimized: bool,
    /// `null` or absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    demand_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    supply_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uncertainty: Option<UncertaintyDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UncertaintyDoc {
    dist: String,
    lo: f64,
    hi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipeDoc {
    id: String,
    from: String,
    to: String,
    length: f64,
    diameter: f64,
    friction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resistance: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompressorDoc {
    id: String,
    from: String,
    to: String,
    alpha_max: f64,
    eta: f64,
    m: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_false(v: &bool) -> bool {
    !*v
}

impl UncertaintyDoc {
    fn into_spec(self, node: &str) -> Result<UncertaintySpec, NetworkError> {
        match self.dist.as_str() {
            "uniform" => Ok(UncertaintySpec::Uniform {
                lo: self.lo,
                hi: self.hi,
            }),
            "truncated_normal" => Ok(UncertaintySpec::TruncatedNormal {
                mean: self.mean.unwrap_or(0.5 * (self.lo + self.hi)),
                std: self.std.ok_or_else(|| {
                    NetworkError::Schema(format!(
                        "node {node}: truncated_normal uncertainty requires std"
                    ))
                })?,
                lo: self.lo,
                hi: self.hi,
            }),
            other => Err(NetworkError::Schema(format!(
                "node {node}: unknown uncertainty distribution {other:?}"
            ))),
        }
    }
}

impl From<&UncertaintySpec> for UncertaintyDoc {
    fn from(spec: &UncertaintySpec) -> Self {
        match *spec {
            UncertaintySpec::Uniform { lo, hi } => Self {
                dist: "uniform".into(),
                lo,
                hi,
                mean: None,
                std: None,
            },
            UncertaintySpec::TruncatedNormal { mean, std, lo, hi } => Self {
                dist: "truncated_normal".into(),
                lo,
                hi,
                mean: Some(mean),
                std: Some(std),
            },
        }
    }
}

impl NetworkDoc {
    fn into_network(self) -> Result<Network, NetworkError> {
        let wave_speed = self.wave_speed;
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in self.nodes {
            let uncertainty = n.uncertainty.map(|u| u.into_spec(&n.id)).transpose()?;
            nodes.push(Node {
                kind: n.kind,
                slack_pressure: n.slack_pressure,
                pressure_min: n.pressure_min,
                pressure_max: n.pressure_max,
                demand: n.demand,
                supply: n.supply,
                demand_price: n.demand_price,
                supply_price: n.supply_price,
                demand_optimized: n.demand_optimized,
                supply_optimized: n.supply_optimized,
                demand_max: n.demand_max.unwrap_or(f64::INFINITY),
                supply_max: n.supply_max.unwrap_or(f64::INFINITY),
                uncertainty,
                epsilon: n.epsilon,
                id: n.id,
            });
        }
        let mut pipes = Vec::with_capacity(self.pipes.len());
        for p in self.pipes {
            let pipe = Pipe::new(
                p.id, p.from, p.to, p.length, p.diameter, p.friction, wave_speed,
            );
            if let Some(given) = p.resistance {
                let rel =
                    (given - pipe.resistance).abs() / pipe.resistance.abs().max(f64::MIN_POSITIVE);
                if !(rel <= RESISTANCE_REL_TOL) {
                    return Err(NetworkError::InconsistentResistance {
                        pipe: pipe.id,
                        given,
                        computed: pipe.resistance,
                    });
                }
            }
            pipes.push(pipe);
        }
        let compressors = self
            .compressors
            .into_iter()
            .map(|c| Compressor {
                id: c.id,
                from: c.from,
                to: c.to,
                alpha_max: c.alpha_max,
                eta: c.eta,
                m: c.m,
            })
            .collect();
        let mut net = Network::new(wave_speed, nodes, pipes, compressors)?;
        if let Some(g) = self.penalty_gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(NetworkError::InvalidParameter {
                    entity: "network".into(),
                    message: format!("penalty_gamma must be positive, got {g}"),
                });
            }
            net.penalty_gamma = Some(g);
        }
        Ok(net)
    }
}

impl From<&Network> for NetworkDoc {
    fn from(net: &Network) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            wave_speed: net.wave_speed,
            penalty_gamma: net.penalty_gamma,
            nodes: net
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    kind: n.kind,
                    slack_pressure: n.slack_pressure,
                    pressure_min: n.pressure_min,
                    pressure_max: n.pressure_max,
                    demand: n.demand,
                    supply: n.supply,
                    demand_price: n.demand_price,
                    supply_price: n.supply_price,
                    demand_optimized: n.demand_optimized,
                    supply_optimized: n.supply_optimized,
                    demand_max: finite(n.demand_max),
                    supply_max: finite(n.supply_max),
                    epsilon: n.epsilon,
                    uncertainty: n.uncertainty.as_ref().map(UncertaintyDoc::from),
                })
                .collect(),
            pipes: net
                .pipes
                .iter()
                .map(|p| PipeDoc {
                    id: p.id.clone(),
                    from: p.from.clone(),
                    to: p.to.clone(),
                    length: p.length,
                    diameter: p.diameter,
                    friction: p.friction,
                    resistance: Some(p.resistance),
                })
                .collect(),
            compressors: net
                .compressors
                .iter()
                .map(|c| CompressorDoc {
                    id: c.id.clone(),
                    from: c.from.clone(),
                    to: c.to.clone(),
                    alpha_max: c.alpha_max,
                    eta: c.eta,
                    m: c.m,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TWO_NODE: &str = r#"{
        "wave_speed": 377.0,
        "nodes": [
            {"id": "A", "kind": "slack", "slack_pressure": 5e6, "pressure_min": 3e6, "pressure_max": 7e6},
            {"id": "B", "kind": "flow", "pressure_min": 3e6, "pressure_max": 7e6, "demand": 100.0}
        ],
        "pipes": [{"id": "P", "from": "A", "to": "B", "length": 20000.0, "diameter": 0.9, "friction": 0.01}]
    }"#;

    #[test]
    fn parses_two_node_network() {
        let net = Network::from_json(TWO_NODE).unwrap();
        assert_eq!(net.nodes.len(), 2);
        assert_eq!(net.pipes.len(), 1);
        let p = &net.pipes[0];
        let area = PI * 0.81 / 4.0;
        let expected = 377.0f64.powi(2) * 0.01 * 20000.0 / (area * area * 0.9);
        assert!((p.resistance - expected).abs() / expected < 1e-14);
    }

    #[test]
    fn rejects_demand_and_supply_both_positive() {
        let text = TWO_NODE.replace(r#""demand": 100.0"#, r#""demand": 100.0, "supply": 5.0"#);
        assert!(matches!(
            Network::from_json(&text),
            Err(NetworkError::ConflictingFlows(id)) if id == "B"
        ));
    }

    #[test]
    fn rejects_missing_slack() {
        let text = TWO_NODE.replace(
            r#""kind": "slack", "slack_pressure": 5e6,"#,
            r#""kind": "flow","#,
        );
        assert!(matches!(
            Network::from_json(&text),
            Err(NetworkError::NoSlack)
        ));
    }

    #[test]
    fn rejects_disconnected_graph() {
        let text = TWO_NODE.replace(
            r#"{"id": "B", "kind": "flow","#,
            r#"{"id": "C", "kind": "flow", "pressure_min": 3e6, "pressure_max": 7e6},
               {"id": "B", "kind": "flow","#,
        );
        assert!(matches!(
            Network::from_json(&text),
            Err(NetworkError::Disconnected(id)) if id == "C"
        ));
    }

    #[test]
    fn rejects_unknown_endpoint() {
        let text = TWO_NODE.replace(r#""to": "B""#, r#""to": "Z""#);
        assert!(matches!(
            Network::from_json(&text),
            Err(NetworkError::UnknownNode { edge, node }) if edge == "P" && node == "Z"
        ));
    }

    #[test]
    fn rejects_inconsistent_resistance() {
        let text = TWO_NODE.replace(
            r#""friction": 0.01}"#,
            r#""friction": 0.01, "resistance": 1.0}"#,
        );
        assert!(matches!(
            Network::from_json(&text),
            Err(NetworkError::InconsistentResistance { .. })
        ));
    }

    #[test]
    fn rejects_schema_violation() {
        let text = TWO_NODE.replace(
            r#""wave_speed": 377.0,"#,
            r#""wave_speed": 377.0, "bogus": 1,"#,
        );
        assert!(matches!(
            Network::from_json(&text),
            Err(NetworkError::Schema(_))
        ));
    }

    #[test]
    fn incidence_single_pipe_column() {
        let net = Network::from_json(TWO_NODE).unwrap();
        let inc = net.incidence();
        assert_eq!(inc.to_dense(), vec![vec![-1], vec![1]]);
    }

    #[test]
    fn incidence_with_no_edges() {
        let node = Node {
            id: "S".into(),
            kind: NodeKind::Slack,
            slack_pressure: Some(5e6),
            pressure_min: 1e6,
            pressure_max: 6e6,
            demand: 0.0,
            supply: 0.0,
            demand_price: 0.0,
            supply_price: 0.0,
            demand_optimized: false,
            supply_optimized: false,
            demand_max: f64::INFINITY,
            supply_max: f64::INFINITY,
            uncertainty: None,
            epsilon: None,
        };
        let net = Network::new(377.0, vec![node], vec![], vec![]).unwrap();
        let inc = net.incidence();
        assert_eq!(inc.num_nodes, 1);
        assert_eq!(inc.num_edges(), 0);
    }
}
