//! Per-domain controller: owns the domain's graph, intent DAG and ledger and
//! reacts to messages from neighbor domains and to link events.
//!
//! A controller is a sequential actor. All mutation happens through
//! `&mut self`; neighbors are reached only through the outbox, which the
//! [`Network`](crate::multidomain::Network) drains.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::{debug, trace};
use serde::{Deserialize, Serialize};

use crate::compile::InstallOutcome;
use crate::dag::{IntentDag, IntentError, Origin};
use crate::ids::{DomainId, IntentId, LinkKey, NodeId};
use crate::intent::{ConnectivityIntent, Intent, IntentState};
use crate::ledger::{Reservation, ReservationLedger};
use crate::multidomain::{BorderLink, Directory, Message, MessageKind};
use crate::network::{NetworkError, NetworkGraph, TransmissionMode, VirtualLink};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("intent {id} is {state}, expected {expected}")]
    WrongState {
        id: IntentId,
        state: IntentState,
        expected: &'static str,
    },
    #[error("intent {id} starts at {src}, which domain {domain} does not own")]
    NotLocalSource {
        id: IntentId,
        src: NodeId,
        domain: DomainId,
    },
    #[error("intent {0} is not a connectivity intent")]
    NotConnectivity(IntentId),
    #[error("domain {domain} got a message from {from} about unknown intent {remote_id}")]
    UnknownRemoteId {
        domain: DomainId,
        from: DomainId,
        remote_id: IntentId,
    },
    #[error("message for domain {to} delivered to domain {domain}")]
    Misrouted { to: DomainId, domain: DomainId },
    #[error("unknown domain {0}")]
    UnknownDomain(DomainId),
    #[error("unknown fiber link {0}")]
    UnknownLink(LinkKey),
    #[error("fiber link {0} is already down")]
    AlreadyDown(LinkKey),
    #[error("fiber link {0} is already up")]
    AlreadyUp(LinkKey),
}

/// What monitoring does after a failure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryPolicy {
    None,
    #[default]
    AutoRecompile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub modes: Vec<TransmissionMode>,
    /// Candidate paths tried per compilation.
    pub k_paths: usize,
    pub recovery: RecoveryPolicy,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            modes: crate::network::default_modes(),
            k_paths: 3,
            recovery: RecoveryPolicy::AutoRecompile,
        }
    }
}

/// Serializable state of one domain, used for exports and saved runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSnapshot {
    pub id: DomainId,
    pub graph: NetworkGraph,
    pub dag: IntentDag,
    pub ledger: ReservationLedger,
    pub border_links: Vec<BorderLink>,
}

#[derive(Debug, Clone)]
pub struct DomainController {
    pub(crate) id: DomainId,
    pub(crate) graph: NetworkGraph,
    pub(crate) dag: IntentDag,
    pub(crate) ledger: ReservationLedger,
    pub(crate) directory: Arc<Directory>,
    pub(crate) border_links: Vec<BorderLink>,
    pub(crate) config: ControllerConfig,
    outbox: Vec<Message>,
    next_seq: u64,
    /// Last state reported upstream for each delegated root.
    notified: BTreeMap<IntentId, IntentState>,
    /// Roots whose install is awaiting neighbor confirmation.
    pending_installs: BTreeSet<IntentId>,
    acked: BTreeSet<IntentId>,
    recovered: u64,
}

impl DomainController {
    pub fn new(
        id: DomainId,
        graph: NetworkGraph,
        directory: Arc<Directory>,
        border_links: Vec<BorderLink>,
        config: ControllerConfig,
    ) -> Self {
        DomainController {
            id,
            graph,
            dag: IntentDag::new(id),
            ledger: ReservationLedger::new(),
            directory,
            border_links,
            config,
            outbox: Vec::new(),
            next_seq: 0,
            notified: BTreeMap::new(),
            pending_installs: BTreeSet::new(),
            acked: BTreeSet::new(),
            recovered: 0,
        }
    }

    pub fn id(&self) -> DomainId {
        self.id
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn dag(&self) -> &IntentDag {
        &self.dag
    }

    pub fn ledger(&self) -> &ReservationLedger {
        &self.ledger
    }

    pub fn border_links(&self) -> &[BorderLink] {
        &self.border_links
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    /// Failed intents brought back to installed by monitoring.
    pub fn recovered(&self) -> u64 {
        self.recovered
    }

    pub fn owns(&self, node: NodeId) -> bool {
        self.graph.routers.contains_key(&node)
    }

    pub fn snapshot(&self) -> DomainSnapshot {
        DomainSnapshot {
            id: self.id,
            graph: self.graph.clone(),
            dag: self.dag.clone(),
            ledger: self.ledger.clone(),
            border_links: self.border_links.clone(),
        }
    }

    /// Register a new top-level connectivity intent.
    pub fn submit(&mut self, intent: ConnectivityIntent) -> Result<IntentId, ControllerError> {
        Ok(self.dag.add_intent(Intent::Connectivity(intent))?)
    }

    pub fn has_pending_messages(&self) -> bool {
        !self.outbox.is_empty()
    }

    pub(crate) fn take_outbox(&mut self) -> Vec<Message> {
        std::mem::take(&mut self.outbox)
    }

    pub(crate) fn send(&mut self, to: DomainId, kind: MessageKind) {
        let msg = Message {
            from: self.id,
            to,
            seq: self.next_seq,
            kind,
        };
        self.next_seq += 1;
        trace!("queue {msg}");
        self.outbox.push(msg);
    }

    pub(crate) fn expect_state(
        &self,
        id: IntentId,
        allowed: &[IntentState],
        expected: &'static str,
    ) -> Result<IntentState, ControllerError> {
        let state = self.dag.state(id)?;
        if allowed.contains(&state) {
            Ok(state)
        } else {
            Err(ControllerError::WrongState { id, state, expected })
        }
    }

    /// Reservations needed by the local leaves under `id` whose state
    /// satisfies `want`.
    pub(crate) fn local_reservations(
        &self,
        id: IntentId,
        want: impl Fn(IntentState) -> bool,
    ) -> Result<Vec<(IntentId, Reservation)>, ControllerError> {
        let mut batch = Vec::new();
        for leaf in self.dag.leaves(id) {
            let node = self.dag.get(leaf).expect("leaf exists");
            if !want(node.state) {
                continue;
            }
            match &node.payload {
                Intent::Lightpath(lp) => {
                    for link in self.graph.path_links(&lp.path)? {
                        batch.push((leaf, Reservation::Spectrum { link, slots: lp.slots }));
                    }
                    for end in [lp.path[0], *lp.path.last().expect("nonempty path")] {
                        if self.graph.oxcs.contains_key(&end) {
                            batch.push((leaf, Reservation::AddDrop { node: end }));
                        }
                    }
                }
                Intent::RouterPort(p) => {
                    batch.push((leaf, Reservation::Ports { node: p.node, rate: p.rate }));
                }
                Intent::Connectivity(_) | Intent::Remote(_) => {}
            }
        }
        Ok(batch)
    }

    pub(crate) fn add_virtual_link(&mut self, lp_id: IntentId) {
        if let Some(Intent::Lightpath(lp)) = self.dag.get(lp_id).map(|n| &n.payload) {
            let (a, b) = (lp.path[0], *lp.path.last().expect("nonempty path"));
            if self.owns(a) && self.owns(b) {
                self.graph.virtual_links.push(VirtualLink {
                    a,
                    b,
                    capacity: lp.mode.rate,
                    lightpath: lp_id,
                });
            }
        }
    }

    /// Release the resources of every local leaf under `id` and move
    /// installed or failed leaves back to compiled. Failed connectivity
    /// leaves (no implementation left) fall back to uncompiled.
    pub(crate) fn release_local(&mut self, id: IntentId) -> Result<(), ControllerError> {
        for leaf in self.dag.leaves(id) {
            let (state, kind) = {
                let n = self.dag.get(leaf).expect("leaf exists");
                (n.state, n.payload.kind())
            };
            match kind {
                "lightpath" | "router-port" => {
                    self.ledger.release(&mut self.graph, leaf);
                    self.graph.virtual_links.retain(|v| v.lightpath != leaf);
                    match state {
                        IntentState::Installed | IntentState::Failed => {
                            self.dag.transition(leaf, IntentState::Compiled)?;
                        }
                        _ => {}
                    }
                }
                "connectivity" if state == IntentState::Failed => {
                    self.dag.force_state(leaf, IntentState::Uncompiled);
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Tell neighbors to drop every delegated part under `id`.
    fn withdraw_remotes(&mut self, id: IntentId) -> Result<(), ControllerError> {
        for leaf in self.dag.leaves(id) {
            let remote = self.dag.get(leaf).and_then(|n| n.payload.as_remote()).cloned();
            if let Some(r) = remote {
                if let Some(rid) = r.remote_id {
                    self.send(r.neighbor, MessageKind::Withdraw { remote_id: rid });
                    self.dag.set_mirror(leaf, rid, IntentState::Uncompiled)?;
                }
            }
        }
        Ok(())
    }

    fn forget(&mut self, removed: &[IntentId]) {
        for id in removed {
            self.notified.remove(id);
            self.pending_installs.remove(id);
            self.acked.remove(id);
        }
    }

    /// Tear down an intent for good: release its resources here, withdraw
    /// its delegated parts and remove it from the DAG.
    pub fn withdraw(&mut self, id: IntentId) -> Result<Vec<IntentId>, ControllerError> {
        self.dag.state(id)?;
        self.withdraw_remotes(id)?;
        self.release_local(id)?;
        let removed = self.dag.remove_intent(id)?;
        self.forget(&removed);
        Ok(removed)
    }

    /// Drop the implementation of an intent that could not be realized and
    /// return it to uncompiled.
    pub fn abandon(&mut self, id: IntentId) -> Result<(), ControllerError> {
        self.dag.state(id)?;
        self.withdraw_remotes(id)?;
        self.release_local(id)?;
        let removed = self.dag.prune_children(id);
        self.forget(&removed);
        self.pending_installs.remove(&id);
        self.dag.force_state(id, IntentState::Uncompiled);
        Ok(())
    }

    pub(crate) fn mark_pending(&mut self, id: IntentId) {
        self.pending_installs.insert(id);
    }

    fn delegated_root(&self, from: DomainId, remote_id: IntentId) -> Result<IntentId, ControllerError> {
        match self.dag.get(remote_id).and_then(|n| n.origin) {
            Some(o) if o.domain == from => Ok(remote_id),
            _ => Err(ControllerError::UnknownRemoteId {
                domain: self.id,
                from,
                remote_id,
            }),
        }
    }

    /// Apply one message from a neighbor.
    pub fn handle_message(&mut self, msg: Message) -> Result<(), ControllerError> {
        if msg.to != self.id {
            return Err(ControllerError::Misrouted {
                to: msg.to,
                domain: self.id,
            });
        }
        debug!("domain {} handles {msg}", self.id);
        match msg.kind {
            MessageKind::Delegate { intent, parent } => {
                let id = self.dag.add_delegated(
                    Intent::Connectivity(intent),
                    Origin {
                        domain: msg.from,
                        parent,
                    },
                )?;
                self.compile_connectivity(id)?;
            }
            MessageKind::StateNotify {
                remote_id,
                parent,
                state,
            } => {
                let remote = self.dag.get(parent).and_then(|n| n.payload.as_remote()).cloned();
                match remote {
                    Some(r)
                        if r.neighbor == msg.from
                            && r.remote_id.is_none_or(|known| known == remote_id) =>
                    {
                        if r.remote_id.is_none() {
                            self.send(msg.from, MessageKind::Ack { remote_id });
                        }
                        self.dag.set_mirror(parent, remote_id, state)?;
                    }
                    _ => {
                        return Err(ControllerError::UnknownRemoteId {
                            domain: self.id,
                            from: msg.from,
                            remote_id,
                        })
                    }
                }
            }
            MessageKind::Install { remote_id } => {
                let id = self.delegated_root(msg.from, remote_id)?;
                self.install_crossdomain(id)?;
            }
            MessageKind::Uninstall { remote_id } => {
                let id = self.delegated_root(msg.from, remote_id)?;
                if matches!(
                    self.dag.state(id)?,
                    IntentState::Installed | IntentState::Failed
                ) {
                    self.uninstall_intent(id)?;
                }
            }
            MessageKind::Withdraw { remote_id } => {
                let id = self.delegated_root(msg.from, remote_id)?;
                self.withdraw(id)?;
            }
            MessageKind::Ack { remote_id } => {
                self.delegated_root(msg.from, remote_id)?;
                self.acked.insert(remote_id);
            }
        }
        Ok(())
    }

    /// Queue a state notification for every delegated root whose state
    /// changed since it was last reported. Returns the number queued.
    pub(crate) fn flush_notifications(&mut self) -> usize {
        let mut updates = Vec::new();
        for (id, node) in self.dag.iter() {
            if let Some(origin) = node.origin {
                if self.notified.get(&id) != Some(&node.state) {
                    updates.push((id, origin, node.state));
                }
            }
        }
        for (id, origin, state) in &updates {
            self.notified.insert(*id, *state);
            self.send(
                origin.domain,
                MessageKind::StateNotify {
                    remote_id: *id,
                    parent: origin.parent,
                    state: *state,
                },
            );
        }
        updates.len()
    }

    /// Roll back installs that did not complete everywhere. Only meaningful
    /// once all domains are quiescent. Returns whether anything was undone.
    pub(crate) fn resolve_pending(&mut self) -> Result<bool, ControllerError> {
        let pending = std::mem::take(&mut self.pending_installs);
        let mut undone = false;
        for id in pending {
            if !self.dag.contains(id) || self.dag.state(id)? == IntentState::Installed {
                continue;
            }
            debug!("domain {} rolls back incomplete install of {id}", self.id);
            self.compensate(id)?;
            undone = true;
        }
        Ok(undone)
    }

    /// Undo the local part of an install and uninstall remote parts that
    /// did get installed.
    pub(crate) fn compensate(&mut self, id: IntentId) -> Result<(), ControllerError> {
        for leaf in self.dag.leaves(id) {
            let remote = self.dag.get(leaf).and_then(|n| n.payload.as_remote()).cloned();
            if let Some(r) = remote {
                if let (Some(rid), IntentState::Installed | IntentState::Failed) =
                    (r.remote_id, r.mirrored_state)
                {
                    self.send(r.neighbor, MessageKind::Uninstall { remote_id: rid });
                }
            }
        }
        self.release_local(id)
    }

    /// Monitoring reaction to a fiber cut. Returns the lightpaths that
    /// failed.
    pub fn link_down(&mut self, key: LinkKey) -> Result<Vec<IntentId>, ControllerError> {
        let link = self
            .graph
            .links
            .get(&key)
            .ok_or(ControllerError::UnknownLink(key))?;
        if !link.operational {
            return Err(ControllerError::AlreadyDown(key));
        }
        self.graph.set_operational(key, false)?;
        let affected: Vec<IntentId> = self
            .ledger
            .holders_on(key)
            .into_iter()
            .filter(|h| {
                self.dag.get(*h).is_some_and(|n| {
                    n.state == IntentState::Installed && n.payload.as_lightpath().is_some()
                })
            })
            .collect();
        for lp in &affected {
            self.dag.transition(*lp, IntentState::Failed)?;
        }
        debug!("domain {} link {key} down, {} lightpaths failed", self.id, affected.len());
        if self.config.recovery == RecoveryPolicy::AutoRecompile {
            for lp in &affected {
                if self.dag.state(*lp).ok() == Some(IntentState::Failed) {
                    self.recover_lightpath(*lp)?;
                }
            }
        }
        Ok(affected)
    }

    /// Monitoring reaction to a repaired fiber. Failed intents get one
    /// recompilation attempt under the auto-recompile policy.
    pub fn link_up(&mut self, key: LinkKey) -> Result<(), ControllerError> {
        let link = self
            .graph
            .links
            .get(&key)
            .ok_or(ControllerError::UnknownLink(key))?;
        if link.operational {
            return Err(ControllerError::AlreadyUp(key));
        }
        self.graph.set_operational(key, true)?;
        if self.config.recovery == RecoveryPolicy::AutoRecompile {
            let failed: Vec<IntentId> = self
                .dag
                .iter()
                .filter(|(_, n)| n.is_leaf() && n.state == IntentState::Failed)
                .map(|(k, _)| k)
                .collect();
            for id in failed {
                let still_failed = self
                    .dag
                    .get(id)
                    .is_some_and(|n| n.is_leaf() && n.state == IntentState::Failed);
                if !still_failed {
                    continue;
                }
                match self.dag.payload(id)? {
                    Intent::Lightpath(_) => {
                        self.recover_lightpath(id)?;
                    }
                    Intent::Connectivity(_) => {
                        self.recompile(id)?;
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Recover a failed lightpath: recompile its parent connectivity intent
    /// when that parent is fully local, otherwise re-fit the lightpath on
    /// its fixed (border) path.
    fn recover_lightpath(&mut self, lp: IntentId) -> Result<bool, ControllerError> {
        let parent = match self.dag.parents(lp)?.first() {
            Some(p) => *p,
            None => return Ok(false),
        };
        let has_remote = self
            .dag
            .descendants(parent)
            .iter()
            .any(|d| matches!(self.dag.get(*d).map(|n| &n.payload), Some(Intent::Remote(_))));
        if has_remote || self.dag.payload(parent)?.as_connectivity().is_none() {
            self.refit_lightpath(lp)
        } else {
            self.recompile(parent)
        }
    }

    /// Release and recompile a connectivity intent, then install it.
    pub(crate) fn recompile(&mut self, id: IntentId) -> Result<bool, ControllerError> {
        self.release_local(id)?;
        let removed = self.dag.prune_children(id);
        self.forget(&removed);
        self.dag.force_state(id, IntentState::Failed);
        let result = self.compile_connectivity(id)?;
        if !result.is_compiled() || self.dag.state(id)? != IntentState::Compiled {
            return Ok(false);
        }
        match self.install_intent(id)? {
            InstallOutcome::Installed => {
                self.recovered += 1;
                debug!("domain {} recovered {id}", self.id);
                Ok(true)
            }
            InstallOutcome::Conflict(_) => {
                let removed = self.dag.prune_children(id);
                self.forget(&removed);
                self.dag.force_state(id, IntentState::Failed);
                Ok(false)
            }
        }
    }

    /// Move a failed lightpath to the first free block on its own path.
    fn refit_lightpath(&mut self, lp_id: IntentId) -> Result<bool, ControllerError> {
        let lp = match self.dag.payload(lp_id)? {
            Intent::Lightpath(lp) => lp.clone(),
            _ => return Ok(false),
        };
        let links = self.graph.path_links(&lp.path)?;
        if links.iter().any(|k| !self.graph.links[k].operational) {
            return Ok(false);
        }
        let old = self.local_reservations(lp_id, |_| true)?;
        self.ledger.release(&mut self.graph, lp_id);
        self.graph.virtual_links.retain(|v| v.lightpath != lp_id);
        let fit = crate::compile::first_fit_spectrum(&self.graph, &lp.path, lp.mode.slots)?;
        let Some(slots) = fit else {
            self.ledger
                .reserve(&mut self.graph, &old)
                .expect("just released");
            return Ok(false);
        };
        self.dag.transition(lp_id, IntentState::Compiled)?;
        let mut moved = lp;
        moved.slots = slots;
        self.dag.replace_payload(lp_id, Intent::Lightpath(moved))?;
        match self.install_intent(lp_id)? {
            InstallOutcome::Installed => {
                self.recovered += 1;
                Ok(true)
            }
            InstallOutcome::Conflict(_) => Ok(false),
        }
    }
}
