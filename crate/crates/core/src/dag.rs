//! Intent DAG with hierarchical state aggregation.
//!
//! Leaves carry their own lifecycle state. Every node with children caches
//! the aggregate of its children, recomputed whenever a descendant changes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::ids::{DomainId, IntentId};
use crate::intent::{Intent, IntentState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntentError {
    #[error("invalid intent payload: {0}")]
    InvalidPayload(String),
    #[error("unknown intent {0}")]
    UnknownIntent(IntentId),
    #[error("unknown parent intent {0}")]
    UnknownParent(IntentId),
    #[error("linking {parent} -> {child} would create a cycle")]
    CycleDetected { parent: IntentId, child: IntentId },
    #[error("illegal transition {from} -> {to} for intent {id}")]
    IllegalTransition {
        id: IntentId,
        from: IntentState,
        to: IntentState,
    },
    #[error("intent {0} has children; its state is derived")]
    NotALeaf(IntentId),
    #[error("intent {0} mirrors a remote intent; its state is set by notifications")]
    MirrorOnly(IntentId),
    #[error("intent {id} is still {state}")]
    StillInstalled { id: IntentId, state: IntentState },
}

/// Where a delegated intent came from: the delegating domain and the remote
/// placeholder in that domain's DAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub domain: DomainId,
    pub parent: IntentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentNode {
    pub payload: Intent,
    pub state: IntentState,
    pub parents: BTreeSet<IntentId>,
    pub children: BTreeSet<IntentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
}

impl IntentNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDag {
    domain: DomainId,
    next_seq: u64,
    nodes: BTreeMap<IntentId, IntentNode>,
}

impl IntentDag {
    pub fn new(domain: DomainId) -> Self {
        IntentDag {
            domain,
            next_seq: 1,
            nodes: BTreeMap::new(),
        }
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: IntentId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn get(&self, id: IntentId) -> Option<&IntentNode> {
        self.nodes.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (IntentId, &IntentNode)> {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    /// Parent -> child pairs in identifier order.
    pub fn edges(&self) -> impl Iterator<Item = (IntentId, IntentId)> + '_ {
        self.nodes
            .iter()
            .flat_map(|(p, n)| n.children.iter().map(move |c| (*p, *c)))
    }

    fn node(&self, id: IntentId) -> Result<&IntentNode, IntentError> {
        self.nodes.get(&id).ok_or(IntentError::UnknownIntent(id))
    }

    fn node_mut(&mut self, id: IntentId) -> Result<&mut IntentNode, IntentError> {
        self.nodes.get_mut(&id).ok_or(IntentError::UnknownIntent(id))
    }

    pub fn payload(&self, id: IntentId) -> Result<&Intent, IntentError> {
        Ok(&self.node(id)?.payload)
    }

    /// Cached state: own state for leaves, aggregate for inner nodes.
    pub fn state(&self, id: IntentId) -> Result<IntentState, IntentError> {
        Ok(self.node(id)?.state)
    }

    pub fn children(&self, id: IntentId) -> Result<Vec<IntentId>, IntentError> {
        Ok(self.node(id)?.children.iter().copied().collect())
    }

    pub fn parents(&self, id: IntentId) -> Result<Vec<IntentId>, IntentError> {
        Ok(self.node(id)?.parents.iter().copied().collect())
    }

    pub fn roots(&self) -> impl Iterator<Item = IntentId> + '_ {
        self.nodes
            .iter()
            .filter(|(_, n)| n.parents.is_empty())
            .map(|(k, _)| *k)
    }

    fn insert(&mut self, payload: Intent, origin: Option<Origin>) -> Result<IntentId, IntentError> {
        payload
            .validate(self.domain)
            .map_err(IntentError::InvalidPayload)?;
        let id = IntentId {
            domain: self.domain,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        let state = match &payload {
            Intent::Remote(r) => r.mirrored_state,
            _ => IntentState::Uncompiled,
        };
        self.nodes.insert(
            id,
            IntentNode {
                payload,
                state,
                parents: BTreeSet::new(),
                children: BTreeSet::new(),
                origin,
            },
        );
        Ok(id)
    }

    /// Add a root intent in the uncompiled state.
    pub fn add_intent(&mut self, payload: Intent) -> Result<IntentId, IntentError> {
        self.insert(payload, None)
    }

    /// Add a root intent received from a neighbor domain.
    pub fn add_delegated(&mut self, payload: Intent, origin: Origin) -> Result<IntentId, IntentError> {
        self.insert(payload, Some(origin))
    }

    pub fn add_child(&mut self, parent: IntentId, payload: Intent) -> Result<IntentId, IntentError> {
        if !self.contains(parent) {
            return Err(IntentError::UnknownParent(parent));
        }
        let id = self.insert(payload, None)?;
        self.nodes.get_mut(&parent).unwrap().children.insert(id);
        self.nodes.get_mut(&id).unwrap().parents.insert(parent);
        self.refresh_from(id);
        Ok(id)
    }

    /// Add an edge between two existing intents.
    pub fn link_nodes(&mut self, parent: IntentId, child: IntentId) -> Result<(), IntentError> {
        if !self.contains(parent) {
            return Err(IntentError::UnknownParent(parent));
        }
        self.node(child)?;
        if parent == child || self.descendants(child).contains(&parent) {
            return Err(IntentError::CycleDetected { parent, child });
        }
        self.nodes.get_mut(&parent).unwrap().children.insert(child);
        self.nodes.get_mut(&child).unwrap().parents.insert(parent);
        self.refresh_from(child);
        Ok(())
    }

    /// Move a leaf along an allowed lifecycle edge and re-aggregate its
    /// ancestors.
    pub fn transition(&mut self, id: IntentId, to: IntentState) -> Result<IntentState, IntentError> {
        let node = self.node(id)?;
        if !node.is_leaf() {
            return Err(IntentError::NotALeaf(id));
        }
        if matches!(node.payload, Intent::Remote(_)) {
            return Err(IntentError::MirrorOnly(id));
        }
        let from = node.state;
        if !from.can_transition(to) {
            return Err(IntentError::IllegalTransition { id, from, to });
        }
        self.node_mut(id)?.state = to;
        self.refresh_from(id);
        Ok(to)
    }

    /// Update a remote placeholder from a neighbor's notification.
    pub fn set_mirror(
        &mut self,
        id: IntentId,
        remote_id: IntentId,
        state: IntentState,
    ) -> Result<(), IntentError> {
        let node = self.node_mut(id)?;
        match &mut node.payload {
            Intent::Remote(r) => {
                r.remote_id = Some(remote_id);
                r.mirrored_state = state;
            }
            _ => return Err(IntentError::UnknownIntent(id)),
        }
        node.state = state;
        self.refresh_from(id);
        Ok(())
    }

    /// Aggregate state computed from scratch: leaves report their own
    /// state; inner nodes are failed if any child is failed, otherwise the
    /// least advanced child state.
    pub fn aggregate_state(&self, id: IntentId) -> Result<IntentState, IntentError> {
        let node = self.node(id)?;
        if node.is_leaf() {
            return Ok(node.state);
        }
        let mut states = Vec::with_capacity(node.children.len());
        for c in &node.children {
            states.push(self.aggregate_state(*c)?);
        }
        Ok(IntentState::combine(states).expect("inner node has children"))
    }

    /// All descendants of `id` (excluding `id`) in identifier order.
    pub fn descendants(&self, id: IntentId) -> BTreeSet<IntentId> {
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<IntentId> = VecDeque::from([id]);
        while let Some(n) = queue.pop_front() {
            if let Some(node) = self.nodes.get(&n) {
                for c in &node.children {
                    if out.insert(*c) {
                        queue.push_back(*c);
                    }
                }
            }
        }
        out
    }

    /// Leaves reachable from `id`, or `id` itself when it is a leaf.
    pub fn leaves(&self, id: IntentId) -> Vec<IntentId> {
        let mut all = self.descendants(id);
        all.insert(id);
        all.into_iter()
            .filter(|n| self.nodes.get(n).is_some_and(IntentNode::is_leaf))
            .collect()
    }

    pub fn ancestors(&self, id: IntentId) -> BTreeSet<IntentId> {
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<IntentId> = VecDeque::from([id]);
        while let Some(n) = queue.pop_front() {
            if let Some(node) = self.nodes.get(&n) {
                for p in &node.parents {
                    if out.insert(*p) {
                        queue.push_back(*p);
                    }
                }
            }
        }
        out
    }

    /// The root reached by following first parents upward.
    pub fn root_of(&self, mut id: IntentId) -> IntentId {
        while let Some(p) = self.nodes.get(&id).and_then(|n| n.parents.first()) {
            id = *p;
        }
        id
    }

    /// Kahn topological order; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<IntentId>> {
        let mut indegree: BTreeMap<IntentId, usize> =
            self.nodes.iter().map(|(k, n)| (*k, n.parents.len())).collect();
        let mut ready: VecDeque<IntentId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(k, _)| *k)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_front() {
            order.push(n);
            for c in &self.nodes[&n].children {
                let d = indegree.get_mut(c)?;
                *d -= 1;
                if *d == 0 {
                    ready.push_back(*c);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Every edge endpoint exists and parent/child sets mirror each other.
    pub fn edges_consistent(&self) -> bool {
        self.nodes.iter().all(|(id, n)| {
            n.children
                .iter()
                .all(|c| self.nodes.get(c).is_some_and(|cn| cn.parents.contains(id)))
                && n.parents
                    .iter()
                    .all(|p| self.nodes.get(p).is_some_and(|pn| pn.children.contains(id)))
        })
    }

    /// Remove `id` together with descendants that have no other surviving
    /// parent. Only uncompiled or compiled intents may be removed.
    pub fn remove_intent(&mut self, id: IntentId) -> Result<Vec<IntentId>, IntentError> {
        let state = self.aggregate_state(id)?;
        if matches!(state, IntentState::Installed | IntentState::Failed) {
            return Err(IntentError::StillInstalled { id, state });
        }
        Ok(self.remove_exclusive(id, true))
    }

    /// Drop the exclusive descendants of `id`, keeping `id` as a leaf with
    /// its last aggregate state.
    pub(crate) fn prune_children(&mut self, id: IntentId) -> Vec<IntentId> {
        self.remove_exclusive(id, false)
    }

    fn remove_exclusive(&mut self, id: IntentId, include_self: bool) -> Vec<IntentId> {
        let mut doomed: BTreeSet<IntentId> = BTreeSet::from([id]);
        let mut queue: VecDeque<IntentId> = VecDeque::from([id]);
        while let Some(n) = queue.pop_front() {
            let children: Vec<IntentId> = self.nodes[&n].children.iter().copied().collect();
            for c in children {
                if doomed.contains(&c) {
                    continue;
                }
                if self.nodes[&c].parents.iter().all(|p| doomed.contains(p)) {
                    doomed.insert(c);
                    queue.push_back(c);
                }
            }
        }
        if !include_self {
            doomed.remove(&id);
        }
        let parents_of_root: Vec<IntentId> = self.nodes[&id].parents.iter().copied().collect();
        for d in &doomed {
            self.nodes.remove(d);
        }
        for node in self.nodes.values_mut() {
            node.children.retain(|c| !doomed.contains(c));
            node.parents.retain(|p| !doomed.contains(p));
        }
        if include_self {
            for p in parents_of_root {
                self.refresh_from(p);
            }
        } else {
            self.refresh_from(id);
        }
        doomed.into_iter().collect()
    }

    /// Overwrite a leaf's state without the lifecycle check.
    pub(crate) fn force_state(&mut self, id: IntentId, state: IntentState) {
        if let Some(n) = self.nodes.get_mut(&id) {
            debug_assert!(n.is_leaf());
            n.state = state;
        }
        self.refresh_from(id);
    }

    pub(crate) fn replace_payload(&mut self, id: IntentId, payload: Intent) -> Result<(), IntentError> {
        payload
            .validate(self.domain)
            .map_err(IntentError::InvalidPayload)?;
        self.node_mut(id)?.payload = payload;
        Ok(())
    }

    /// Recompute cached aggregates of `id` (if inner) and all its ancestors.
    fn refresh_from(&mut self, id: IntentId) {
        let mut todo = self.ancestors(id);
        todo.insert(id);
        // aggregate_state recurses from scratch, so visiting order is irrelevant.
        for n in todo {
            if self.nodes.get(&n).is_some_and(|node| !node.is_leaf()) {
                let s = self.aggregate_state(n).expect("node exists");
                self.nodes.get_mut(&n).unwrap().state = s;
            }
        }
    }
}
