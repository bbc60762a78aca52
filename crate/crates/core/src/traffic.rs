//! Synthetic traffic: Poisson arrivals with exponential holding times.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64`, which produces the same stream on every platform.
//! Uniforms are taken from the top 53 bits of each 64-bit output and
//! exponentials use the inverse CDF, `-ln(1 - u) / rate`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::ids::NodeId;
use crate::intent::ConnectivityIntent;
use crate::sim::{Event, EventKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrafficError {
    #[error("invalid traffic config: {0}")]
    InvalidConfig(String),
}

fn default_rate() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    /// Number of arrivals.
    pub count: usize,
    /// Arrivals per second.
    pub arrival_rate: f64,
    /// Mean holding time in seconds.
    pub mean_holding: f64,
    /// Gbps requested by every arrival.
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// Weighted source/destination pairs; all ordered pairs of distinct
    /// nodes with weight 1 when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairWeight {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
}

impl TrafficConfig {
    pub fn validate(&self, nodes: &[NodeId]) -> Result<(), TrafficError> {
        let bad = |m: String| Err(TrafficError::InvalidConfig(m));
        if !self.arrival_rate.is_finite() || self.arrival_rate <= 0.0 {
            return bad(format!("arrival_rate {} must be positive", self.arrival_rate));
        }
        if !self.mean_holding.is_finite() || self.mean_holding <= 0.0 {
            return bad(format!("mean_holding {} must be positive", self.mean_holding));
        }
        if self.rate.is_nan() || self.rate <= 0.0 {
            return bad(format!("rate {} must be positive", self.rate));
        }
        for p in &self.pairs {
            for n in [p.src, p.dst] {
                if !nodes.contains(&n) {
                    return bad(format!("pair references unknown node {n}"));
                }
            }
            if p.src == p.dst {
                return bad(format!("pair {} -> {} is a self pair", p.src, p.dst));
            }
            if !p.weight.is_finite() || p.weight < 0.0 {
                return bad(format!("pair weight {} must be non-negative", p.weight));
            }
        }
        if self.count > 0 && self.pair_table(nodes).iter().map(|p| p.weight).sum::<f64>() <= 0.0 {
            return bad("no node pair with positive weight".into());
        }
        Ok(())
    }

    fn pair_table(&self, nodes: &[NodeId]) -> Vec<PairWeight> {
        if !self.pairs.is_empty() {
            return self.pairs.clone();
        }
        let mut sorted = nodes.to_vec();
        sorted.sort();
        sorted
            .iter()
            .flat_map(|&s| {
                sorted.iter().filter(move |&&d| d != s).map(move |&d| PairWeight {
                    src: s,
                    dst: d,
                    weight: 1.0,
                })
            })
            .collect()
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    -(1.0 - uniform(rng)).ln() / rate
}

/// `count` arrival events in time order, with sequence numbers `0..count`.
/// Each arrival draws, in order, its inter-arrival gap, its holding time and
/// its node pair.
pub fn generate_traffic(config: &TrafficConfig, nodes: &[NodeId], seed: u64) -> Result<Vec<Event>, TrafficError> {
    config.validate(nodes)?;
    let pairs = config.pair_table(nodes);
    let total: f64 = pairs.iter().map(|p| p.weight).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut now = 0.0;
    let mut events = Vec::with_capacity(config.count);
    for seq in 0..config.count {
        now += exponential(&mut rng, config.arrival_rate);
        let holding = exponential(&mut rng, 1.0 / config.mean_holding);
        let mut pick = uniform(&mut rng) * total;
        let mut chosen = pairs.last().expect("validated nonempty");
        for p in &pairs {
            if p.weight > 0.0 && pick < p.weight {
                chosen = p;
                break;
            }
            pick -= p.weight;
        }
        events.push(Event {
            time: now,
            seq: seq as u64,
            kind: EventKind::Arrival {
                intent: ConnectivityIntent::new(chosen.src, chosen.dst, config.rate),
                holding: Some(holding),
            },
        });
    }
    Ok(events)
}
