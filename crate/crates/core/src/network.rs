//! Two-layer IP-optical network state of a single domain.
//!
//! The electrical layer is a set of routers plus the virtual links created by
//! installed lightpaths. The optical layer is a set of OXCs joined by
//! bidirectional fiber links, each carrying a fixed grid of spectrum slots.
//! Foreign border nodes appear as stubs: they terminate border fibers but
//! carry no router or OXC state in this domain.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{IntentId, LinkKey, NodeId, SlotRange};
use crate::paths::{self, Path};

/// Default number of spectrum slots per fiber link.
pub const DEFAULT_GRID_SIZE: u16 = 80;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("node {0} already present")]
    DuplicateNode(NodeId),
    #[error("router and OXC views name different nodes ({router} vs {oxc})")]
    MismatchedViews { router: NodeId, oxc: NodeId },
    #[error("node {0} is not part of this graph")]
    MissingEndpoint(NodeId),
    #[error("fiber link {0} already present")]
    DuplicateLink(LinkKey),
    #[error("fiber length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("fiber link cannot join node {0} to itself")]
    SelfLoop(NodeId),
    #[error("no fiber link between {0} and {1}")]
    BrokenPath(NodeId, NodeId),
    #[error("unknown fiber link {0}")]
    UnknownLink(LinkKey),
    #[error("slot range {range} outside grid of {grid} slots")]
    SlotOutOfGrid { range: SlotRange, grid: u16 },
}

/// IP router attached to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterView {
    pub node: NodeId,
    pub port_count: u32,
    /// Gbps per port.
    pub port_rate: f64,
    pub ports_used: u32,
}

impl RouterView {
    pub fn new(node: NodeId, port_count: u32, port_rate: f64) -> Self {
        RouterView {
            node,
            port_count,
            port_rate,
            ports_used: 0,
        }
    }

    /// Ports needed to carry `rate` Gbps.
    pub fn ports_for(&self, rate: f64) -> u32 {
        (rate / self.port_rate).ceil().max(1.0) as u32
    }
}

/// Optical cross-connect attached to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OxcView {
    pub node: NodeId,
    /// Number of lightpaths that can be added or dropped here.
    pub add_drop_capacity: u32,
    pub add_drop_used: u32,
}

impl OxcView {
    pub fn new(node: NodeId, add_drop_capacity: u32) -> Self {
        OxcView {
            node,
            add_drop_capacity,
            add_drop_used: 0,
        }
    }
}

/// An operating point of a coherent pluggable transceiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionMode {
    /// Gbps.
    pub rate: f64,
    /// Kilometers.
    pub reach: f64,
    /// Contiguous spectrum slots occupied.
    pub slots: u16,
}

impl TransmissionMode {
    pub const fn new(rate: f64, reach: f64, slots: u16) -> Self {
        TransmissionMode { rate, reach, slots }
    }

    pub fn is_valid(&self) -> bool {
        self.rate > 0.0 && self.reach > 0.0 && self.slots > 0
    }
}

/// Default mode table, loosely modeled on OpenZR+ style pluggables.
pub fn default_modes() -> Vec<TransmissionMode> {
    vec![
        TransmissionMode::new(400.0, 600.0, 8),
        TransmissionMode::new(300.0, 1800.0, 8),
        TransmissionMode::new(200.0, 3000.0, 8),
        TransmissionMode::new(100.0, 5000.0, 4),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberLink {
    pub key: LinkKey,
    /// Kilometers.
    pub length: f64,
    /// Slot `i` (1-based) is stored at index `i - 1`; `Some(id)` when held.
    pub slots: Vec<Option<IntentId>>,
    pub operational: bool,
}

impl FiberLink {
    pub fn is_free(&self, slot: u16) -> bool {
        self.slots[usize::from(slot) - 1].is_none()
    }

    pub fn holder(&self, slot: u16) -> Option<IntentId> {
        self.slots[usize::from(slot) - 1]
    }

    pub fn used_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

/// Electrical-layer adjacency created by an installed lightpath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualLink {
    pub a: NodeId,
    pub b: NodeId,
    /// Gbps.
    pub capacity: f64,
    pub lightpath: IntentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub grid_size: u16,
    pub routers: BTreeMap<NodeId, RouterView>,
    pub oxcs: BTreeMap<NodeId, OxcView>,
    /// Foreign nodes terminating border fibers owned by this domain.
    pub stubs: BTreeSet<NodeId>,
    pub links: BTreeMap<LinkKey, FiberLink>,
    pub virtual_links: Vec<VirtualLink>,
}

impl Default for NetworkGraph {
    fn default() -> Self {
        NetworkGraph::new(DEFAULT_GRID_SIZE)
    }
}

impl NetworkGraph {
    pub fn new(grid_size: u16) -> Self {
        NetworkGraph {
            grid_size,
            routers: BTreeMap::new(),
            oxcs: BTreeMap::new(),
            stubs: BTreeSet::new(),
            links: BTreeMap::new(),
            virtual_links: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.routers.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.routers.contains_key(&n) || self.stubs.contains(&n)
    }

    pub fn is_stub(&self, n: NodeId) -> bool {
        self.stubs.contains(&n)
    }

    pub fn add_node(&mut self, router: RouterView, oxc: OxcView) -> Result<(), NetworkError> {
        if router.node != oxc.node {
            return Err(NetworkError::MismatchedViews {
                router: router.node,
                oxc: oxc.node,
            });
        }
        if self.contains(router.node) {
            return Err(NetworkError::DuplicateNode(router.node));
        }
        self.oxcs.insert(oxc.node, oxc);
        self.routers.insert(router.node, router);
        Ok(())
    }

    /// Register a foreign node so a border fiber can terminate on it.
    pub fn add_stub(&mut self, node: NodeId) -> Result<(), NetworkError> {
        if self.contains(node) {
            return Err(NetworkError::DuplicateNode(node));
        }
        self.stubs.insert(node);
        Ok(())
    }

    pub fn add_fiber_link(&mut self, a: NodeId, b: NodeId, length: f64) -> Result<(), NetworkError> {
        for n in [a, b] {
            if !self.contains(n) {
                return Err(NetworkError::MissingEndpoint(n));
            }
        }
        if a == b {
            return Err(NetworkError::SelfLoop(a));
        }
        // NaN fails this check too.
        if length.is_nan() || length <= 0.0 {
            return Err(NetworkError::NonPositiveLength(length));
        }
        let key = LinkKey::new(a, b);
        if self.links.contains_key(&key) {
            return Err(NetworkError::DuplicateLink(key));
        }
        self.links.insert(
            key,
            FiberLink {
                key,
                length,
                slots: vec![None; usize::from(self.grid_size)],
                operational: true,
            },
        );
        Ok(())
    }

    pub fn link(&self, a: NodeId, b: NodeId) -> Option<&FiberLink> {
        self.links.get(&LinkKey::new(a, b))
    }

    pub fn set_operational(&mut self, key: LinkKey, up: bool) -> Result<(), NetworkError> {
        let link = self.links.get_mut(&key).ok_or(NetworkError::UnknownLink(key))?;
        link.operational = up;
        Ok(())
    }

    /// Fiber links traversed by `path`, in order.
    pub fn path_links(&self, path: &[NodeId]) -> Result<Vec<LinkKey>, NetworkError> {
        path.windows(2)
            .map(|w| {
                self.link(w[0], w[1])
                    .map(|l| l.key)
                    .ok_or(NetworkError::BrokenPath(w[0], w[1]))
            })
            .collect()
    }

    /// Sum of fiber lengths along `path`; zero for a single node.
    pub fn path_length(&self, path: &[NodeId]) -> Result<f64, NetworkError> {
        let mut total = 0.0;
        for w in path.windows(2) {
            total += self
                .link(w[0], w[1])
                .ok_or(NetworkError::BrokenPath(w[0], w[1]))?
                .length;
        }
        Ok(total)
    }

    /// Up to `k` loop-free paths over operational links, sorted by length and
    /// then by node sequence.
    pub fn k_shortest_paths(&self, src: NodeId, dst: NodeId, k: usize) -> Vec<Path> {
        self.k_shortest_paths_with(src, dst, k, |_| true)
    }

    /// As [`k_shortest_paths`](Self::k_shortest_paths), additionally skipping
    /// links rejected by `allow`. Stub nodes are only entered as `dst`.
    pub fn k_shortest_paths_with<F>(&self, src: NodeId, dst: NodeId, k: usize, allow: F) -> Vec<Path>
    where
        F: Fn(&FiberLink) -> bool,
    {
        if src == dst || !self.contains(src) || !self.contains(dst) {
            return Vec::new();
        }
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
        for link in self.links.values().filter(|l| l.operational && allow(l)) {
            for (a, b) in [(link.key.lo(), link.key.hi()), (link.key.hi(), link.key.lo())] {
                if self.is_stub(b) && b != dst {
                    continue;
                }
                adjacency.entry(a).or_default().push((b, link.length));
            }
        }
        let adj = |n: NodeId| adjacency.get(&n).cloned().unwrap_or_default();
        paths::yen(&adj, src, dst, k)
    }

    /// Slots free on every link of `path`. A single-node path yields the
    /// whole grid.
    pub fn free_slot_blocks(&self, path: &[NodeId]) -> Result<BTreeSet<u16>, NetworkError> {
        let links = self.path_links(path)?;
        Ok((1..=self.grid_size)
            .filter(|&s| links.iter().all(|k| self.links[k].is_free(s)))
            .collect())
    }

    pub(crate) fn assign_slots(
        &mut self,
        key: LinkKey,
        range: SlotRange,
        holder: Option<IntentId>,
    ) -> Result<(), NetworkError> {
        let grid = self.grid_size;
        let link = self.links.get_mut(&key).ok_or(NetworkError::UnknownLink(key))?;
        if range.start == 0 || range.end > grid {
            return Err(NetworkError::SlotOutOfGrid { range, grid });
        }
        for s in range.iter() {
            link.slots[usize::from(s) - 1] = holder;
        }
        Ok(())
    }

    /// Occupied and total slot counts over all links.
    pub fn slot_utilization(&self) -> (usize, usize) {
        let used = self.links.values().map(FiberLink::used_slots).sum();
        let total = self.links.len() * usize::from(self.grid_size);
        (used, total)
    }
}
