//! Intent-driven coordination of multi-domain IP-optical networks.
//!
//! Each domain keeps a two-layer network model ([`network`]), a DAG of
//! intents ([`dag`]) and a reservation ledger ([`ledger`]). Connectivity
//! intents are compiled into lightpath and router-port intents
//! ([`compile`]), delegated across domain borders ([`multidomain`]) and
//! exercised by a deterministic discrete-event simulator ([`sim`]).

pub mod compile;
pub mod dag;
pub mod domain;
pub mod export;
pub mod ids;
pub mod intent;
pub mod ledger;
pub mod multidomain;
pub mod network;
pub mod paths;
pub mod scenario;
pub mod sim;
pub mod traffic;

pub use ids::{DomainId, IntentId, LinkKey, NodeId, SlotRange};
pub use intent::{Intent, IntentState};
pub use network::{NetworkGraph, TransmissionMode};
