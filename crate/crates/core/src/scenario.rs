//! Scenario documents: JSON, schema version 1 (see `docs/schema.md`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{ControllerConfig, DomainController, RecoveryPolicy};
use crate::ids::{DomainId, LinkKey, NodeId};
use crate::multidomain::{BorderLink, Directory, Network};
use crate::network::{default_modes, NetworkGraph, OxcView, RouterView, TransmissionMode, DEFAULT_GRID_SIZE};
use crate::traffic::TrafficConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

fn default_grid() -> u16 {
    DEFAULT_GRID_SIZE
}

fn default_k() -> usize {
    3
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

fn default_ports() -> u32 {
    16
}

fn default_port_rate() -> f64 {
    400.0
}

fn default_add_drop() -> u32 {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default = "default_grid")]
    pub grid_size: u16,
    #[serde(default = "default_k")]
    pub k_paths: usize,
    #[serde(default)]
    pub recovery: RecoveryPolicy,
    #[serde(default = "default_modes")]
    pub modes: Vec<TransmissionMode>,
    #[serde(default)]
    pub seed: u64,
    pub domains: Vec<DomainSpec>,
    #[serde(default)]
    pub border_links: Vec<BorderLinkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic: Option<TrafficConfig>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub id: DomainId,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    /// Index within the domain.
    pub id: u32,
    #[serde(default = "default_ports")]
    pub ports: u32,
    #[serde(default = "default_port_rate")]
    pub port_rate: f64,
    #[serde(default = "default_add_drop")]
    pub add_drop: u32,
}

impl NodeSpec {
    pub fn new(id: u32) -> Self {
        NodeSpec {
            id,
            ports: default_ports(),
            port_rate: default_port_rate(),
            add_drop: default_add_drop(),
        }
    }
}

/// Intra-domain fiber; endpoints are node indices within the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: u32,
    pub b: u32,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorderLinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    Arrival {
        at: f64,
        src: NodeId,
        dst: NodeId,
        rate: f64,
        /// Seconds until departure; absent means the intent never leaves.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        holding: Option<f64>,
    },
    LinkDown {
        at: f64,
        a: NodeId,
        b: NodeId,
    },
    LinkUp {
        at: f64,
        a: NodeId,
        b: NodeId,
    },
}

impl EventSpec {
    pub fn at(&self) -> f64 {
        match self {
            EventSpec::Arrival { at, .. } | EventSpec::LinkDown { at, .. } | EventSpec::LinkUp { at, .. } => *at,
        }
    }
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

impl Scenario {
    /// Canonical rendering; parsing it back yields an equal scenario.
    pub fn render(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every node of every domain, in identifier order.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .domains
            .iter()
            .flat_map(|d| d.nodes.iter().map(move |n| NodeId { domain: d.id, local: n.id }))
            .collect();
        out.sort();
        out
    }

    fn all_links(&self) -> BTreeSet<LinkKey> {
        let mut out = BTreeSet::new();
        for d in &self.domains {
            for l in &d.links {
                out.insert(LinkKey::new(
                    NodeId { domain: d.id, local: l.a },
                    NodeId { domain: d.id, local: l.b },
                ));
            }
        }
        for b in &self.border_links {
            out.insert(LinkKey::new(b.a, b.b));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.grid_size == 0 {
            return Err(invalid("grid_size must be at least 1"));
        }
        if self.k_paths == 0 {
            return Err(invalid("k_paths must be at least 1"));
        }
        if self.modes.is_empty() {
            return Err(invalid("mode table is empty"));
        }
        for m in &self.modes {
            if !m.is_valid() {
                return Err(invalid(format!("mode {m:?} has a non-positive field")));
            }
        }

        let mut owner: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (i, d) in self.domains.iter().enumerate() {
            for n in &d.nodes {
                let id = NodeId { domain: d.id, local: n.id };
                if let Some(prev) = owner.insert(id, i) {
                    return Err(invalid(if prev == i {
                        format!("node {id} declared twice")
                    } else {
                        format!("node {id} owned by more than one domain entry")
                    }));
                }
                if n.port_rate <= 0.0 || n.port_rate.is_nan() {
                    return Err(invalid(format!("node {id}: port_rate must be positive")));
                }
            }
            let mut seen = BTreeSet::new();
            for l in &d.links {
                let (a, b) = (NodeId { domain: d.id, local: l.a }, NodeId { domain: d.id, local: l.b });
                for n in [a, b] {
                    if !d.nodes.iter().any(|x| x.id == n.local) {
                        return Err(invalid(format!("link {a}-{b} references unknown node {n}")));
                    }
                }
                check_link(a, b, l.length)?;
                if !seen.insert(LinkKey::new(a, b)) {
                    return Err(invalid(format!("duplicate link {}", LinkKey::new(a, b))));
                }
            }
        }

        let mut seen = BTreeSet::new();
        for b in &self.border_links {
            for n in [b.a, b.b] {
                if !owner.contains_key(&n) {
                    return Err(invalid(format!("border link references unknown node {n}")));
                }
            }
            if b.a.domain == b.b.domain {
                return Err(invalid(format!(
                    "border link {} joins nodes of the same domain",
                    LinkKey::new(b.a, b.b)
                )));
            }
            check_link(b.a, b.b, b.length)?;
            if !seen.insert(LinkKey::new(b.a, b.b)) {
                return Err(invalid(format!("duplicate border link {}", LinkKey::new(b.a, b.b))));
            }
        }

        let links = self.all_links();
        for e in &self.events {
            let at = e.at();
            if !at.is_finite() || at < 0.0 {
                return Err(invalid(format!("event time {at} must be finite and non-negative")));
            }
            match e {
                EventSpec::Arrival {
                    src,
                    dst,
                    rate,
                    holding,
                    ..
                } => {
                    for n in [src, dst] {
                        if !owner.contains_key(n) {
                            return Err(invalid(format!("arrival references unknown node {n}")));
                        }
                    }
                    if src == dst {
                        return Err(invalid(format!("arrival from {src} to itself")));
                    }
                    if rate.is_nan() || *rate <= 0.0 {
                        return Err(invalid(format!("arrival rate {rate} must be positive")));
                    }
                    if let Some(h) = holding {
                        if !h.is_finite() || *h <= 0.0 {
                            return Err(invalid(format!("holding time {h} must be positive")));
                        }
                    }
                }
                EventSpec::LinkDown { a, b, .. } | EventSpec::LinkUp { a, b, .. } => {
                    if !links.contains(&LinkKey::new(*a, *b)) {
                        return Err(invalid(format!("event references unknown link {}", LinkKey::new(*a, *b))));
                    }
                }
            }
        }
        if let Some(t) = &self.traffic {
            t.validate(&self.nodes()).map_err(|e| invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            modes: self.modes.clone(),
            k_paths: self.k_paths,
            recovery: self.recovery,
        }
    }

    /// Instantiate one controller per domain. Border fibers are placed in
    /// the graph of the lower-numbered endpoint domain, with a stub for the
    /// foreign endpoint.
    pub fn build_network(&self) -> Result<Network, ScenarioError> {
        self.validate()?;
        let mut directory = Directory::new();
        for n in self.nodes() {
            directory.register_node(n);
        }
        for b in &self.border_links {
            directory.connect(b.a.domain, b.b.domain);
        }
        let directory = Arc::new(directory);
        let config = self.controller_config();

        let mut controllers = Vec::new();
        for d in &self.domains {
            let mut graph = NetworkGraph::new(self.grid_size);
            for n in &d.nodes {
                let id = NodeId { domain: d.id, local: n.id };
                graph
                    .add_node(RouterView::new(id, n.ports, n.port_rate), OxcView::new(id, n.add_drop))
                    .map_err(|e| invalid(e.to_string()))?;
            }
            for l in &d.links {
                graph
                    .add_fiber_link(
                        NodeId { domain: d.id, local: l.a },
                        NodeId { domain: d.id, local: l.b },
                        l.length,
                    )
                    .map_err(|e| invalid(e.to_string()))?;
            }
            let mut borders = Vec::new();
            for b in &self.border_links {
                let (local, remote) = if b.a.domain == d.id {
                    (b.a, b.b)
                } else if b.b.domain == d.id {
                    (b.b, b.a)
                } else {
                    continue;
                };
                let border = BorderLink {
                    local,
                    remote,
                    length: b.length,
                };
                if border.owner() == d.id {
                    if !graph.contains(remote) {
                        graph.add_stub(remote).map_err(|e| invalid(e.to_string()))?;
                    }
                    graph
                        .add_fiber_link(local, remote, b.length)
                        .map_err(|e| invalid(e.to_string()))?;
                }
                borders.push(border);
            }
            borders.sort_by_key(|b| (b.local, b.remote));
            controllers.push(DomainController::new(d.id, graph, directory.clone(), borders, config.clone()));
        }
        Ok(Network::new(directory, controllers))
    }
}

fn check_link(a: NodeId, b: NodeId, length: f64) -> Result<(), ScenarioError> {
    if a == b {
        return Err(invalid(format!("link joins node {a} to itself")));
    }
    if !length.is_finite() || length <= 0.0 {
        return Err(invalid(format!("link {a}-{b} has non-positive length {length}")));
    }
    Ok(())
}
