//! Authoritative record of which intent holds which resources.
//!
//! Reservations are applied as all-or-nothing batches: a batch is first
//! validated against the current holdings and only then committed, both to
//! the ledger and to the derived views in [`NetworkGraph`]. A rejected batch
//! leaves everything untouched.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{IntentId, LinkKey, NodeId, SlotRange};
use crate::network::NetworkGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Reservation {
    Spectrum { link: LinkKey, slots: SlotRange },
    Ports { node: NodeId, rate: f64 },
    AddDrop { node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortHolding {
    pub intent: IntentId,
    pub rate: f64,
    pub ports: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Conflict {
    #[error("slot {slot} on {link} is held by {holder}")]
    SlotHeld {
        link: LinkKey,
        slot: u16,
        holder: IntentId,
    },
    #[error("router {node} needs {needed} ports but only {free} are free")]
    PortsExhausted { node: NodeId, needed: u32, free: u32 },
    #[error("OXC {node} has no add/drop capacity left")]
    AddDropExhausted { node: NodeId },
    #[error("resource {0} does not exist in this domain")]
    UnknownResource(String),
}

impl Conflict {
    pub fn is_spectrum(&self) -> bool {
        matches!(self, Conflict::SlotHeld { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReservationLedger {
    spectrum: BTreeMap<LinkKey, BTreeMap<u16, IntentId>>,
    ports: BTreeMap<NodeId, Vec<PortHolding>>,
    add_drop: BTreeMap<NodeId, Vec<IntentId>>,
}

impl ReservationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty() && self.ports.is_empty() && self.add_drop.is_empty()
    }

    pub fn spectrum_holder(&self, link: LinkKey, slot: u16) -> Option<IntentId> {
        self.spectrum.get(&link).and_then(|m| m.get(&slot)).copied()
    }

    /// Intents holding at least one slot on `link`.
    pub fn holders_on(&self, link: LinkKey) -> BTreeSet<IntentId> {
        self.spectrum
            .get(&link)
            .map(|m| m.values().copied().collect())
            .unwrap_or_default()
    }

    pub fn spectrum(&self) -> impl Iterator<Item = (LinkKey, u16, IntentId)> + '_ {
        self.spectrum
            .iter()
            .flat_map(|(l, m)| m.iter().map(move |(s, h)| (*l, *s, *h)))
    }

    pub fn port_holdings(&self, node: NodeId) -> &[PortHolding] {
        self.ports.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn holds_anything(&self, intent: IntentId) -> bool {
        self.spectrum.values().any(|m| m.values().any(|h| *h == intent))
            || self.ports.values().any(|v| v.iter().any(|p| p.intent == intent))
            || self.add_drop.values().any(|v| v.contains(&intent))
    }

    /// Validate a batch against current holdings without committing.
    pub fn check(
        &self,
        graph: &NetworkGraph,
        batch: &[(IntentId, Reservation)],
    ) -> Result<(), Conflict> {
        let mut slots_taken: BTreeMap<(LinkKey, u16), IntentId> = BTreeMap::new();
        let mut ports_wanted: BTreeMap<NodeId, u32> = BTreeMap::new();
        let mut add_drop_wanted: BTreeMap<NodeId, u32> = BTreeMap::new();

        for (holder, r) in batch {
            match r {
                Reservation::Spectrum { link, slots } => {
                    let fiber = graph
                        .links
                        .get(link)
                        .ok_or_else(|| Conflict::UnknownResource(link.to_string()))?;
                    if slots.start == 0 || slots.end > graph.grid_size || slots.end < slots.start {
                        return Err(Conflict::UnknownResource(format!("{link} slots {slots}")));
                    }
                    for s in slots.iter() {
                        let existing = self
                            .spectrum_holder(*link, s)
                            .or_else(|| fiber.holder(s))
                            .or_else(|| slots_taken.get(&(*link, s)).copied());
                        if let Some(h) = existing {
                            return Err(Conflict::SlotHeld {
                                link: *link,
                                slot: s,
                                holder: h,
                            });
                        }
                        slots_taken.insert((*link, s), *holder);
                    }
                }
                Reservation::Ports { node, rate } => {
                    let router = graph
                        .routers
                        .get(node)
                        .ok_or_else(|| Conflict::UnknownResource(format!("router {node}")))?;
                    let wanted = ports_wanted.entry(*node).or_insert(0);
                    *wanted += router.ports_for(*rate);
                    let free = router.port_count.saturating_sub(router.ports_used);
                    if *wanted > free {
                        return Err(Conflict::PortsExhausted {
                            node: *node,
                            needed: *wanted,
                            free,
                        });
                    }
                }
                Reservation::AddDrop { node } => {
                    let oxc = graph
                        .oxcs
                        .get(node)
                        .ok_or_else(|| Conflict::UnknownResource(format!("OXC {node}")))?;
                    let wanted = add_drop_wanted.entry(*node).or_insert(0);
                    *wanted += 1;
                    if *wanted > oxc.add_drop_capacity.saturating_sub(oxc.add_drop_used) {
                        return Err(Conflict::AddDropExhausted { node: *node });
                    }
                }
            }
        }
        Ok(())
    }

    /// Validate and commit a batch atomically.
    pub fn reserve(
        &mut self,
        graph: &mut NetworkGraph,
        batch: &[(IntentId, Reservation)],
    ) -> Result<(), Conflict> {
        self.check(graph, batch)?;
        for (holder, r) in batch {
            match r {
                Reservation::Spectrum { link, slots } => {
                    let m = self.spectrum.entry(*link).or_default();
                    for s in slots.iter() {
                        m.insert(s, *holder);
                    }
                    graph
                        .assign_slots(*link, *slots, Some(*holder))
                        .expect("validated above");
                }
                Reservation::Ports { node, rate } => {
                    let router = graph.routers.get_mut(node).expect("validated above");
                    let ports = router.ports_for(*rate);
                    router.ports_used += ports;
                    self.ports.entry(*node).or_default().push(PortHolding {
                        intent: *holder,
                        rate: *rate,
                        ports,
                    });
                }
                Reservation::AddDrop { node } => {
                    graph.oxcs.get_mut(node).expect("validated above").add_drop_used += 1;
                    self.add_drop.entry(*node).or_default().push(*holder);
                }
            }
        }
        Ok(())
    }

    /// Release everything held by `holder`. Returns the number of released
    /// items (slots, port holdings and add/drop units).
    pub fn release(&mut self, graph: &mut NetworkGraph, holder: IntentId) -> usize {
        let mut released = 0;
        for (link, m) in self.spectrum.iter_mut() {
            let before = m.len();
            m.retain(|_, h| *h != holder);
            released += before - m.len();
            if let Some(fiber) = graph.links.get_mut(link) {
                for s in fiber.slots.iter_mut() {
                    if *s == Some(holder) {
                        *s = None;
                    }
                }
            }
        }
        self.spectrum.retain(|_, m| !m.is_empty());

        for (node, v) in self.ports.iter_mut() {
            let (gone, keep): (Vec<PortHolding>, Vec<PortHolding>) =
                v.drain(..).partition(|p| p.intent == holder);
            *v = keep;
            released += gone.len();
            if let Some(r) = graph.routers.get_mut(node) {
                r.ports_used -= gone.iter().map(|p| p.ports).sum::<u32>();
            }
        }
        self.ports.retain(|_, v| !v.is_empty());

        for (node, v) in self.add_drop.iter_mut() {
            let before = v.len();
            v.retain(|h| *h != holder);
            let gone = before - v.len();
            released += gone;
            if let Some(o) = graph.oxcs.get_mut(node) {
                o.add_drop_used -= gone as u32;
            }
        }
        self.add_drop.retain(|_, v| !v.is_empty());
        released
    }

    /// Cross-check the ledger against the graph's derived views.
    pub fn consistent_with(&self, graph: &NetworkGraph) -> Result<(), String> {
        for (key, fiber) in &graph.links {
            for s in 1..=graph.grid_size {
                let ledger = self.spectrum_holder(*key, s);
                if ledger != fiber.holder(s) {
                    return Err(format!(
                        "slot {s} on {key}: ledger {ledger:?} vs grid {:?}",
                        fiber.holder(s)
                    ));
                }
            }
        }
        if self.spectrum.keys().any(|k| !graph.links.contains_key(k)) {
            return Err("ledger holds slots on a link missing from the graph".into());
        }
        for (node, r) in &graph.routers {
            let holdings = self.port_holdings(*node);
            let used: u32 = holdings.iter().map(|p| p.ports).sum();
            if used != r.ports_used {
                return Err(format!("router {node}: ledger {used} ports vs view {}", r.ports_used));
            }
            if r.ports_used > r.port_count {
                return Err(format!("router {node} over-subscribed"));
            }
            let rate: f64 = holdings.iter().map(|p| p.rate).sum();
            if rate > f64::from(r.port_count) * r.port_rate + 1e-9 {
                return Err(format!("router {node}: {rate} Gbps exceeds port capacity"));
            }
        }
        for (node, o) in &graph.oxcs {
            let used = self.add_drop.get(node).map_or(0, Vec::len) as u32;
            if used != o.add_drop_used || used > o.add_drop_capacity {
                return Err(format!("OXC {node}: add/drop accounting mismatch"));
            }
        }
        Ok(())
    }
}
