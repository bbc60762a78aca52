//! Decentralized coordination between domain controllers.
//!
//! Domains only share the global node registry and the domain adjacency
//! derived from border links. Everything else travels as [`Message`]s:
//! an intent crossing a border is split into a local part and a delegated
//! part, the neighbor compiles the delegated part eagerly and reports its
//! aggregate state back, and the delegating side mirrors that state in a
//! remote placeholder intent.
//!
//! Border fibers live in the graph of the lower-numbered endpoint domain,
//! which is the only side that ever reserves spectrum on them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::compile::{BlockReason, Delegation, InstallOutcome};
use crate::domain::{ControllerError, DomainController, DomainSnapshot};
use crate::ids::{DomainId, IntentId, LinkKey, NodeId};
use crate::intent::{ConnectivityIntent, Intent, IntentState, RemoteIntent, RouterPortIntent};

/// A fiber between a local node and a node of a neighbor domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderLink {
    pub local: NodeId,
    pub remote: NodeId,
    /// Kilometers.
    pub length: f64,
}

impl BorderLink {
    pub fn key(&self) -> LinkKey {
        LinkKey::new(self.local, self.remote)
    }

    /// Domain administering the fiber's spectrum.
    pub fn owner(&self) -> DomainId {
        self.local.domain.min(self.remote.domain)
    }
}

/// Global knowledge shared by all controllers: who owns each node and which
/// domains neighbor each other.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Directory {
    owner: BTreeMap<NodeId, DomainId>,
    adjacency: BTreeMap<DomainId, BTreeSet<DomainId>>,
}

impl Directory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_node(&mut self, node: NodeId) {
        self.owner.insert(node, node.domain);
        self.adjacency.entry(node.domain).or_default();
    }

    pub fn connect(&mut self, a: DomainId, b: DomainId) {
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a);
    }

    pub fn owner_of(&self, node: NodeId) -> Option<DomainId> {
        self.owner.get(&node).copied()
    }

    pub fn neighbors(&self, d: DomainId) -> impl Iterator<Item = DomainId> + '_ {
        self.adjacency.get(&d).into_iter().flatten().copied()
    }

    /// Domain-level hop count, by breadth-first search.
    pub fn hops(&self, from: DomainId, to: DomainId) -> Option<u32> {
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([(from, 0u32)]);
        while let Some((d, h)) = queue.pop_front() {
            if d == to {
                return Some(h);
            }
            for n in self.neighbors(d) {
                if seen.insert(n) {
                    queue.push_back((n, h + 1));
                }
            }
        }
        None
    }

    /// Neighbor of `from` closest to `to`, lower identifier on ties.
    pub fn next_hop(&self, from: DomainId, to: DomainId) -> Option<DomainId> {
        self.neighbors(from)
            .filter_map(|n| self.hops(n, to).map(|h| (h, n)))
            .min()
            .map(|(_, n)| n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    /// Compile and hold `intent` on behalf of placeholder `parent`.
    Delegate {
        intent: ConnectivityIntent,
        parent: IntentId,
    },
    /// Aggregate state of delegated intent `remote_id`, addressed to the
    /// placeholder `parent` in the receiver's DAG.
    StateNotify {
        remote_id: IntentId,
        parent: IntentId,
        state: IntentState,
    },
    Install { remote_id: IntentId },
    Uninstall { remote_id: IntentId },
    /// Release and remove a delegated intent.
    Withdraw { remote_id: IntentId },
    Ack { remote_id: IntentId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub from: DomainId,
    pub to: DomainId,
    /// Per-sender sequence number.
    pub seq: u64,
    pub kind: MessageKind,
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{} #{} ", self.from, self.to, self.seq)?;
        match &self.kind {
            MessageKind::Delegate { intent, parent } => write!(
                f,
                "DELEGATE parent={parent} {}->{} rate={}",
                intent.src, intent.dst, intent.rate
            ),
            MessageKind::StateNotify {
                remote_id,
                parent,
                state,
            } => write!(f, "STATE_NOTIFY {remote_id} parent={parent} {state}"),
            MessageKind::Install { remote_id } => write!(f, "INSTALL {remote_id}"),
            MessageKind::Uninstall { remote_id } => write!(f, "UNINSTALL {remote_id}"),
            MessageKind::Withdraw { remote_id } => write!(f, "WITHDRAW {remote_id}"),
            MessageKind::Ack { remote_id } => write!(f, "ACK {remote_id}"),
        }
    }
}

impl DomainController {
    /// Split a connectivity intent at the border towards the next-hop
    /// domain: a local segment to the border node, the border crossing, and
    /// a placeholder for the part delegated to the neighbor.
    pub(crate) fn plan_crossdomain(
        &mut self,
        id: IntentId,
        conn: &ConnectivityIntent,
        delegations: &mut Vec<Delegation>,
    ) -> Result<Option<BlockReason>, ControllerError> {
        let Some(dst_domain) = self.directory.owner_of(conn.dst) else {
            return Ok(Some(BlockReason::NoPath));
        };
        let Some(next) = self.directory.next_hop(self.id, dst_domain) else {
            return Ok(Some(BlockReason::NoPath));
        };

        // Border link with the shortest local approach from src.
        let mut best: Option<(f64, BorderLink)> = None;
        for bl in self.border_links.iter().filter(|b| b.remote.domain == next) {
            let dist = if bl.local == conn.src {
                Some(0.0)
            } else {
                self.graph
                    .k_shortest_paths_with(conn.src, bl.local, 1, |l| {
                        !conn.excluded_links.contains(&l.key)
                    })
                    .first()
                    .map(|p| p.length)
            };
            if let Some(d) = dist {
                let better = match &best {
                    None => true,
                    Some((bd, b)) => d
                        .total_cmp(bd)
                        .then((bl.local, bl.remote).cmp(&(b.local, b.remote)))
                        .is_lt(),
                };
                if better {
                    best = Some((d, bl.clone()));
                }
            }
        }
        let Some((_, border)) = best else {
            return Ok(Some(BlockReason::NoPath));
        };

        if border.local != conn.src {
            let mut segment = ConnectivityIntent::new(conn.src, border.local, conn.rate);
            segment.excluded_links = conn.excluded_links.clone();
            let seg = self.dag.add_child(id, Intent::Connectivity(segment))?;
            let res = self.compile_connectivity(seg)?;
            if let Some(r) = res.reason {
                return Ok(Some(r));
            }
        }
        self.dag.add_child(
            id,
            Intent::RouterPort(RouterPortIntent {
                node: border.local,
                rate: conn.rate,
            }),
        )?;
        if self.graph.links.contains_key(&border.key()) {
            match self.border_lightpath(border.local, border.remote, conn.rate) {
                Ok(lp) => {
                    self.dag.add_child(id, Intent::Lightpath(lp))?;
                }
                Err(r) => return Ok(Some(r)),
            }
        }
        let placeholder = self.dag.add_child(
            id,
            Intent::Remote(RemoteIntent {
                neighbor: next,
                remote_id: None,
                mirrored_state: IntentState::Uncompiled,
            }),
        )?;
        let mut remote = ConnectivityIntent::new(border.remote, conn.dst, conn.rate);
        remote.ingress = Some(border.key());
        delegations.push(Delegation {
            neighbor: next,
            intent: remote,
            placeholder,
        });
        Ok(None)
    }

    /// Install the local part of an intent and ask neighbors to install
    /// their delegated parts. The intent reaches installed once every
    /// neighbor reports installed; incomplete installs are rolled back when
    /// the network becomes quiescent.
    pub fn install_crossdomain(&mut self, id: IntentId) -> Result<InstallOutcome, ControllerError> {
        self.expect_state(id, &[IntentState::Compiled], "compiled")?;
        match self.install_local(id)? {
            InstallOutcome::Installed => {}
            conflict => {
                self.compensate(id)?;
                return Ok(conflict);
            }
        }
        let mut any_remote = false;
        for leaf in self.dag.leaves(id) {
            let remote = self.dag.get(leaf).and_then(|n| n.payload.as_remote()).cloned();
            if let Some(RemoteIntent {
                neighbor,
                remote_id: Some(rid),
                mirrored_state: IntentState::Compiled,
            }) = remote
            {
                self.send(neighbor, MessageKind::Install { remote_id: rid });
                any_remote = true;
            }
        }
        if any_remote {
            self.mark_pending(id);
        }
        Ok(InstallOutcome::Installed)
    }
}

/// All domain controllers plus the in-memory transport between them.
#[derive(Debug, Clone)]
pub struct Network {
    domains: BTreeMap<DomainId, DomainController>,
    directory: Arc<Directory>,
    log: Vec<String>,
}

impl Network {
    pub fn new(directory: Arc<Directory>, controllers: Vec<DomainController>) -> Self {
        Network {
            domains: controllers.into_iter().map(|c| (c.id(), c)).collect(),
            directory,
            log: Vec::new(),
        }
    }

    pub fn directory(&self) -> &Directory {
        &self.directory
    }

    pub fn domain(&self, id: DomainId) -> Option<&DomainController> {
        self.domains.get(&id)
    }

    pub fn domain_mut(&mut self, id: DomainId) -> Option<&mut DomainController> {
        self.domains.get_mut(&id)
    }

    pub fn domains(&self) -> impl Iterator<Item = &DomainController> {
        self.domains.values()
    }

    pub fn controller_for(&mut self, node: NodeId) -> Result<&mut DomainController, ControllerError> {
        let d = self
            .directory
            .owner_of(node)
            .ok_or(ControllerError::UnknownDomain(node.domain))?;
        self.domains.get_mut(&d).ok_or(ControllerError::UnknownDomain(d))
    }

    /// Delivered messages, in delivery order, since the last call.
    pub fn take_log(&mut self) -> Vec<String> {
        std::mem::take(&mut self.log)
    }

    pub fn snapshot(&self) -> Vec<DomainSnapshot> {
        self.domains.values().map(DomainController::snapshot).collect()
    }

    /// Deliver messages until no domain has anything left to say, rolling
    /// back incomplete installs once traffic stops. Messages of one round
    /// are handled in ascending `(sender, seq)` order. Returns the number of
    /// messages delivered.
    pub fn deliver_messages(&mut self) -> Result<usize, ControllerError> {
        let mut delivered = 0;
        loop {
            for d in self.domains.values_mut() {
                d.flush_notifications();
            }
            let mut batch: Vec<_> = self
                .domains
                .values_mut()
                .flat_map(DomainController::take_outbox)
                .collect();
            if batch.is_empty() {
                let mut undone = false;
                for d in self.domains.values_mut() {
                    undone |= d.resolve_pending()?;
                }
                let quiet = !undone
                    && self.domains.values_mut().all(|d| {
                        d.flush_notifications();
                        !d.has_pending_messages()
                    });
                if quiet {
                    return Ok(delivered);
                }
                continue;
            }
            batch.sort_by_key(|m| (m.from, m.seq));
            for msg in batch {
                self.log.push(msg.to_string());
                let to = msg.to;
                self.domains
                    .get_mut(&to)
                    .ok_or(ControllerError::UnknownDomain(to))?
                    .handle_message(msg)?;
                delivered += 1;
            }
        }
    }

    /// Domain whose graph holds the fiber `key`.
    pub fn link_owner(&self, key: LinkKey) -> Option<DomainId> {
        self.domains
            .values()
            .find(|d| d.graph().links.contains_key(&key))
            .map(DomainController::id)
    }

    /// Take a fiber down and let its owner react. Messages are not
    /// delivered; call [`deliver_messages`](Self::deliver_messages).
    pub fn monitor_failure(&mut self, key: LinkKey) -> Result<Vec<IntentId>, ControllerError> {
        let owner = self.link_owner(key).ok_or(ControllerError::UnknownLink(key))?;
        debug!("link {key} down in domain {owner}");
        self.domains.get_mut(&owner).expect("owner exists").link_down(key)
    }

    pub fn monitor_repair(&mut self, key: LinkKey) -> Result<(), ControllerError> {
        let owner = self.link_owner(key).ok_or(ControllerError::UnknownLink(key))?;
        debug!("link {key} up in domain {owner}");
        self.domains.get_mut(&owner).expect("owner exists").link_up(key)
    }

    pub fn total_recovered(&self) -> u64 {
        self.domains.values().map(DomainController::recovered).sum()
    }

    pub fn ledgers_empty(&self) -> bool {
        self.domains.values().all(|d| d.ledger().is_empty())
    }

    /// Occupied and total slots across every domain.
    pub fn slot_usage(&self) -> (usize, usize) {
        self.domains
            .values()
            .map(|d| d.graph().slot_utilization())
            .fold((0, 0), |(u, t), (a, b)| (u + a, t + b))
    }

    /// Remote placeholders whose mirrored state disagrees with the actual
    /// state of the referenced intent. Meaningful at quiescence.
    pub fn mirror_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for d in self.domains.values() {
            for (id, node) in d.dag().iter() {
                let Some(r) = node.payload.as_remote() else {
                    continue;
                };
                let Some(rid) = r.remote_id else {
                    out.push(format!("domain {} placeholder {id} never answered", d.id()));
                    continue;
                };
                let actual = self
                    .domains
                    .get(&r.neighbor)
                    .and_then(|n| n.dag().state(rid).ok());
                if actual != Some(r.mirrored_state) {
                    out.push(format!(
                        "domain {} placeholder {id} mirrors {} but {rid} is {:?}",
                        d.id(),
                        r.mirrored_state,
                        actual
                    ));
                }
            }
        }
        out
    }

    /// Resource invariants: ledger and graph agree, no slot double booked,
    /// router ports within capacity, and every installed lightpath is
    /// contiguous, continuous on all its links and within reach.
    pub fn resource_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for d in self.domains.values() {
            if let Err(e) = d.ledger().consistent_with(d.graph()) {
                out.push(format!("domain {}: {e}", d.id()));
            }
            for (id, node) in d.dag().iter() {
                let Intent::Lightpath(lp) = &node.payload else {
                    continue;
                };
                if node.state != IntentState::Installed {
                    continue;
                }
                if lp.slots.width() != lp.mode.slots {
                    out.push(format!("{id}: slot range {} not of width {}", lp.slots, lp.mode.slots));
                }
                match d.graph().path_links(&lp.path) {
                    Ok(links) => {
                        for link in links {
                            for s in lp.slots.iter() {
                                if d.ledger().spectrum_holder(link, s) != Some(id) {
                                    out.push(format!("{id}: slot {s} on {link} not held"));
                                }
                            }
                        }
                    }
                    Err(e) => out.push(format!("{id}: {e}")),
                }
                match d.graph().path_length(&lp.path) {
                    Ok(len) if len <= lp.mode.reach => {}
                    Ok(len) => out.push(format!("{id}: length {len} beyond reach {}", lp.mode.reach)),
                    Err(e) => out.push(format!("{id}: {e}")),
                }
            }
            for key in d.graph().links.keys() {
                if key.lo().domain != d.id() && key.hi().domain != d.id() {
                    out.push(format!("domain {} holds foreign fiber {key}", d.id()));
                }
            }
        }
        out
    }
}
