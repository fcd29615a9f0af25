//! Static system model: layered topology, VNF/service catalog, VM parameters and
//! the request/job vocabulary every strategy shares.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident($inner:ty)) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// A datacenter in the layered topology.
    NodeId(u32)
);
id_type!(
    /// Index of a VNF in the [`Catalog`].
    VnfId(u32)
);
id_type!(
    /// Index of a service in the [`Catalog`].
    ServiceId(u32)
);
id_type!(RequestId(u64));
id_type!(VmId(u64));

/// One layer of the topology. Layer 0 holds the leaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub index: usize,
    pub node_ids: Vec<NodeId>,
    /// Forwarding latency from a leaf to this layer (ms).
    pub d: f64,
    /// Fixed cost of an active VM per second.
    pub kappa_f: f64,
    /// Cost per unit of allocated speed per second.
    pub kappa_p: f64,
}

/// How leaves reach the nodes of the upper layers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reachability {
    /// Every leaf reaches every node of every layer.
    #[default]
    Full,
    /// Every leaf reaches exactly one ancestor per layer, assigned by contiguous blocks.
    Tree,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    layers: Vec<LayerSpec>,
    reach: BTreeMap<NodeId, Vec<Vec<NodeId>>>,
    node_layer: BTreeMap<NodeId, usize>,
}

impl Topology {
    pub fn new(layers: Vec<LayerSpec>, mode: Reachability) -> Self {
        let mut reach = BTreeMap::new();
        let leaves: Vec<NodeId> = layers.first().map(|l| l.node_ids.clone()).unwrap_or_default();
        let n_leaves = leaves.len().max(1);
        for (k, leaf) in leaves.iter().enumerate() {
            let per_layer = layers
                .iter()
                .map(|layer| {
                    if layer.index == 0 {
                        return vec![*leaf];
                    }
                    let mut ids = match mode {
                        Reachability::Full => layer.node_ids.clone(),
                        Reachability::Tree => {
                            if layer.node_ids.is_empty() {
                                Vec::new()
                            } else {
                                vec![layer.node_ids[k * layer.node_ids.len() / n_leaves]]
                            }
                        }
                    };
                    ids.sort();
                    ids
                })
                .collect();
            reach.insert(*leaf, per_layer);
        }
        Self::with_reachability(layers, reach)
    }

    /// Builds a topology from an explicit leaf -> per-layer reachable-node map.
    pub fn with_reachability(layers: Vec<LayerSpec>, reach: BTreeMap<NodeId, Vec<Vec<NodeId>>>) -> Self {
        let mut node_layer = BTreeMap::new();
        for layer in &layers {
            for id in &layer.node_ids {
                node_layer.insert(*id, layer.index);
            }
        }
        Self { layers, reach, node_layer }
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &LayerSpec {
        &self.layers[index]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn leaves(&self) -> &[NodeId] {
        self.layers.first().map(|l| l.node_ids.as_slice()).unwrap_or(&[])
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.reach.contains_key(&node)
    }

    /// Nodes of `layer` reachable from `leaf`, ascending by id.
    pub fn reachable(&self, leaf: NodeId, layer: usize) -> &[NodeId] {
        self.reach
            .get(&leaf)
            .and_then(|v| v.get(layer))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn layer_of(&self, node: NodeId) -> Option<usize> {
        self.node_layer.get(&node).copied()
    }

    /// Largest node count over all layers.
    pub fn max_nodes_per_layer(&self) -> usize {
        self.layers.iter().map(|l| l.node_ids.len()).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        self.node_layer.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VnfSpec {
    pub vnf_id: String,
    /// Computing units needed per unit of traffic.
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceSpec {
    pub service_id: String,
    pub vnfs: Vec<VnfId>,
    /// End-to-end delay target (ms).
    pub target_delay: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Catalog {
    pub vnfs: Vec<VnfSpec>,
    pub services: Vec<ServiceSpec>,
}

impl Catalog {
    pub fn vnf(&self, id: VnfId) -> &VnfSpec {
        &self.vnfs[id.0 as usize]
    }

    pub fn theta(&self, id: VnfId) -> f64 {
        self.vnfs[id.0 as usize].theta
    }

    pub fn service(&self, id: ServiceId) -> &ServiceSpec {
        &self.services[id.0 as usize]
    }

    pub fn vnf_by_name(&self, name: &str) -> Option<VnfId> {
        self.vnfs.iter().position(|v| v.vnf_id == name).map(|i| VnfId(i as u32))
    }

    pub fn service_by_name(&self, name: &str) -> Option<ServiceId> {
        self.services
            .iter()
            .position(|s| s.service_id == name)
            .map(|i| ServiceId(i as u32))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Maximum VM speed (packets/ms).
    pub mu_bar: f64,
    /// Smallest per-request load any request may carry (packets/ms).
    pub lambda_min: f64,
}

/// A service-instance request.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Request {
    pub id: RequestId,
    pub service: ServiceId,
    /// Arrival time (s).
    pub arrival: f64,
    /// Lifetime (s); `None` means the request never leaves.
    pub duration: Option<f64>,
    /// Traffic load (packets/ms).
    pub load: f64,
    pub leaf: NodeId,
}

impl Request {
    pub fn departure(&self) -> Option<f64> {
        self.duration.map(|d| self.arrival + d)
    }
}

/// The unit of packing: run `vnf` for `request`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Job {
    pub request: RequestId,
    pub vnf: VnfId,
    /// Per-job processing-latency budget (ms).
    pub delay_budget: f64,
    pub load: f64,
}

/// Everything a strategy needs to know about the static system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub topology: Topology,
    pub catalog: Catalog,
    pub params: SystemParams,
}

impl SystemModel {
    pub fn validate(&self) -> Vec<Violation> {
        validate_scenario(&self.topology, &self.catalog, &self.params)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl Violation {
    fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Cost per second of one VM running at full speed on `layer`.
pub fn node_cost_full(layer: &LayerSpec, params: &SystemParams) -> f64 {
    layer.kappa_f + layer.kappa_p * params.mu_bar
}

/// Checks every structural invariant of the model. An empty result means the
/// scenario is usable.
pub fn validate_scenario(topology: &Topology, catalog: &Catalog, params: &SystemParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let layers = topology.layers();
    if layers.is_empty() {
        out.push(Violation::new("topology", "no layers"));
    }
    let mut seen = BTreeSet::new();
    for (pos, layer) in layers.iter().enumerate() {
        let loc = format!("topology.layers[{pos}]");
        if layer.index != pos {
            out.push(Violation::new(&loc, format!("layer index {} is not contiguous (expected {pos})", layer.index)));
        }
        if layer.node_ids.is_empty() {
            out.push(Violation::new(&loc, "layer has no nodes"));
        }
        for id in &layer.node_ids {
            if !seen.insert(*id) {
                out.push(Violation::new(&loc, format!("node id {id} appears more than once")));
            }
        }
        if !(layer.d >= 0.0) || !layer.d.is_finite() {
            out.push(Violation::new(&loc, "forwarding latency d must be finite and >= 0"));
        }
        if !(layer.kappa_f > 0.0) || !layer.kappa_f.is_finite() {
            out.push(Violation::new(&loc, "kappa_f must be positive"));
        }
        if !(layer.kappa_p >= 0.0) || !layer.kappa_p.is_finite() {
            out.push(Violation::new(&loc, "kappa_p must be >= 0"));
        }
        if pos > 0 {
            let below = &layers[pos - 1];
            if !(layer.d > below.d) {
                out.push(Violation::new(&loc, "latency not strictly increasing"));
            }
            if !(layer.kappa_f < below.kappa_f) {
                out.push(Violation::new(&loc, "kappa_f not strictly decreasing"));
            }
            if !(layer.kappa_p < below.kappa_p) {
                out.push(Violation::new(&loc, "kappa_p not strictly decreasing"));
            }
        }
    }
    for leaf in topology.leaves() {
        for layer in layers {
            let reachable = topology.reachable(*leaf, layer.index);
            if reachable.is_empty() {
                out.push(Violation::new(
                    "topology.reachability",
                    format!("leaf {leaf} reaches no node at layer {}", layer.index),
                ));
            }
            for node in reachable {
                if topology.layer_of(*node) != Some(layer.index) {
                    out.push(Violation::new(
                        "topology.reachability",
                        format!("leaf {leaf} lists node {node} under layer {} where it does not live", layer.index),
                    ));
                }
            }
        }
    }

    if !(params.lambda_min > 0.0) || !(params.mu_bar > params.lambda_min) || !params.mu_bar.is_finite() {
        out.push(Violation::new("params", "require mu_bar > lambda_min > 0"));
    }

    let mut names = BTreeSet::new();
    for (i, vnf) in catalog.vnfs.iter().enumerate() {
        let loc = format!("vnfs[{i}] ({})", vnf.vnf_id);
        if !names.insert(vnf.vnf_id.as_str()) {
            out.push(Violation::new(&loc, "duplicate vnf_id"));
        }
        if !(vnf.theta > 0.0) || !vnf.theta.is_finite() {
            out.push(Violation::new(&loc, "theta must be positive"));
        }
    }
    let mut names = BTreeSet::new();
    for (i, service) in catalog.services.iter().enumerate() {
        let loc = format!("services[{i}] ({})", service.service_id);
        if !names.insert(service.service_id.as_str()) {
            out.push(Violation::new(&loc, "duplicate service_id"));
        }
        if service.vnfs.is_empty() {
            out.push(Violation::new(&loc, "service chain is empty"));
        }
        let mut chain = BTreeSet::new();
        for v in &service.vnfs {
            if v.0 as usize >= catalog.vnfs.len() {
                out.push(Violation::new(&loc, format!("unknown vnf index {v}")));
            }
            if !chain.insert(*v) {
                out.push(Violation::new(&loc, format!("vnf index {v} repeated in chain")));
            }
        }
        if !(service.target_delay > 0.0) || !service.target_delay.is_finite() {
            out.push(Violation::new(&loc, "target_delay must be positive"));
        }
    }
    out
}
