//! Intent payloads and the four-state lifecycle.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{DomainId, IntentId, LinkKey, NodeId, SlotRange};
use crate::network::TransmissionMode;

/// Lifecycle state of an intent.
///
/// For aggregation the states are ordered `uncompiled < compiled < installed`;
/// `failed` dominates everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntentState {
    Uncompiled,
    Compiled,
    Installed,
    Failed,
}

impl IntentState {
    pub const ALL: [IntentState; 4] = [
        IntentState::Uncompiled,
        IntentState::Compiled,
        IntentState::Installed,
        IntentState::Failed,
    ];

    /// Whether `self -> to` is an accepted lifecycle edge.
    pub fn can_transition(self, to: IntentState) -> bool {
        use IntentState::*;
        matches!(
            (self, to),
            (Uncompiled, Compiled)
                | (Compiled, Uncompiled)
                | (Compiled, Installed)
                | (Installed, Compiled)
                | (Installed, Failed)
                | (Failed, Compiled)
        )
    }

    fn progress(self) -> u8 {
        match self {
            IntentState::Uncompiled => 0,
            IntentState::Compiled => 1,
            IntentState::Installed => 2,
            IntentState::Failed => 3,
        }
    }

    /// Combine child states: failure dominates, otherwise the least advanced.
    pub fn combine(states: impl IntoIterator<Item = IntentState>) -> Option<IntentState> {
        let mut out: Option<IntentState> = None;
        for s in states {
            out = Some(match out {
                None => s,
                Some(IntentState::Failed) => IntentState::Failed,
                Some(_) if s == IntentState::Failed => IntentState::Failed,
                Some(cur) if s.progress() < cur.progress() => s,
                Some(cur) => cur,
            });
        }
        out
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntentState::Uncompiled => "uncompiled",
            IntentState::Compiled => "compiled",
            IntentState::Installed => "installed",
            IntentState::Failed => "failed",
        }
    }
}

impl fmt::Display for IntentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Connect `src` to `dst` at `rate` Gbps.
///
/// A delegated intent carries the border fiber it enters the domain on in
/// `ingress`; such an intent may terminate on its own ingress node, so
/// `src == dst` is accepted only when `ingress` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityIntent {
    pub src: NodeId,
    pub dst: NodeId,
    /// Gbps.
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_links: Vec<LinkKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingress: Option<LinkKey>,
}

impl ConnectivityIntent {
    pub fn new(src: NodeId, dst: NodeId, rate: f64) -> Self {
        ConnectivityIntent {
            src,
            dst,
            rate,
            excluded_links: Vec::new(),
            ingress: None,
        }
    }
}

/// Spectrum and transceiver allocation along a fiber path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightpathIntent {
    pub path: Vec<NodeId>,
    pub mode: TransmissionMode,
    pub slots: SlotRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterPortIntent {
    pub node: NodeId,
    /// Gbps.
    pub rate: f64,
}

/// Placeholder for an intent delegated to a neighbor domain.
///
/// `remote_id` is learned from the neighbor's first state notification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteIntent {
    pub neighbor: DomainId,
    pub remote_id: Option<IntentId>,
    pub mirrored_state: IntentState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intent {
    Connectivity(ConnectivityIntent),
    Lightpath(LightpathIntent),
    RouterPort(RouterPortIntent),
    Remote(RemoteIntent),
}

impl Intent {
    pub fn kind(&self) -> &'static str {
        match self {
            Intent::Connectivity(_) => "connectivity",
            Intent::Lightpath(_) => "lightpath",
            Intent::RouterPort(_) => "router-port",
            Intent::Remote(_) => "remote",
        }
    }

    /// Payload-local invariants. `owner` is the domain of the holding DAG.
    pub fn validate(&self, owner: DomainId) -> Result<(), String> {
        match self {
            Intent::Connectivity(c) => {
                if c.rate.is_nan() || c.rate <= 0.0 {
                    return Err(format!("rate must be positive, got {}", c.rate));
                }
                if c.src == c.dst && c.ingress.is_none() {
                    return Err(format!("source and destination are both {}", c.src));
                }
            }
            Intent::Lightpath(l) => {
                if !l.mode.is_valid() {
                    return Err("transmission mode fields must be positive".into());
                }
                if l.path.len() < 2 {
                    return Err("lightpath needs at least two nodes".into());
                }
                if l.slots.start == 0 || l.slots.end < l.slots.start {
                    return Err(format!("bad slot range {}", l.slots));
                }
                if l.slots.width() != l.mode.slots {
                    return Err(format!(
                        "slot range {} does not match mode width {}",
                        l.slots, l.mode.slots
                    ));
                }
            }
            Intent::RouterPort(p) => {
                if p.rate.is_nan() || p.rate <= 0.0 {
                    return Err(format!("rate must be positive, got {}", p.rate));
                }
            }
            Intent::Remote(r) => {
                if r.neighbor == owner {
                    return Err(format!("remote intent cannot point at own domain {owner}"));
                }
            }
        }
        Ok(())
    }

    pub fn as_connectivity(&self) -> Option<&ConnectivityIntent> {
        match self {
            Intent::Connectivity(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_lightpath(&self) -> Option<&LightpathIntent> {
        match self {
            Intent::Lightpath(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_remote(&self) -> Option<&RemoteIntent> {
        match self {
            Intent::Remote(r) => Some(r),
            _ => None,
        }
    }
}
