//! Discrete-event simulation driving a [`Network`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::compile::BlockReason;
use crate::domain::{ControllerError, DomainSnapshot};
use crate::ids::{IntentId, LinkKey};
use crate::intent::{ConnectivityIntent, IntentState};
use crate::multidomain::Network;
use crate::scenario::{EventSpec, Scenario, ScenarioError};
use crate::traffic::{generate_traffic, TrafficError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("at t={time}: {source}")]
    Controller {
        time: f64,
        #[source]
        source: ControllerError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Arrival {
        intent: ConnectivityIntent,
        holding: Option<f64>,
    },
    Departure(IntentId),
    LinkDown(LinkKey),
    LinkUp(LinkKey),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    /// Tie-breaker for equal times; lower runs first.
    pub seq: u64,
    pub kind: EventKind,
}

struct Queued(Event);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .total_cmp(&self.0.time)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub offered: u64,
    pub blocked: u64,
    pub installed_ok: u64,
    pub failures_recovered: u64,
    /// `(time, used slots / total slots)` after every event.
    pub slot_utilization_samples: Vec<(f64, f64)>,
}

impl Metrics {
    pub fn blocking_probability(&self) -> f64 {
        if self.offered == 0 {
            0.0
        } else {
            self.blocked as f64 / self.offered as f64
        }
    }

    /// Time-weighted mean of the utilization samples.
    pub fn mean_slot_utilization(&self) -> f64 {
        let s = &self.slot_utilization_samples;
        let (Some(first), Some(last)) = (s.first(), s.last()) else {
            return 0.0;
        };
        let span = last.0 - first.0;
        if span <= 0.0 {
            return last.1;
        }
        s.windows(2).map(|w| w[0].1 * (w[1].0 - w[0].0)).sum::<f64>() / span
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Installed,
    Blocked(BlockReason),
    /// A neighbor could not compile its part.
    BlockedRemote,
    /// Compiled but the reservation failed.
    BlockedConflict,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Installed => f.write_str("installed"),
            Outcome::Blocked(r) => write!(f, "blocked:{r}"),
            Outcome::BlockedRemote => f.write_str("blocked:remote"),
            Outcome::BlockedConflict => f.write_str("blocked:conflict"),
        }
    }
}

/// What happened to one arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRecord {
    pub intent: IntentId,
    pub outcome: Outcome,
    pub compile_time: f64,
    pub install_time: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub records: Vec<IntentRecord>,
    pub log: Vec<String>,
    pub snapshot: Vec<DomainSnapshot>,
}

pub struct Simulation {
    network: Network,
    queue: BinaryHeap<Queued>,
    next_seq: u64,
    now: f64,
    metrics: Metrics,
    records: Vec<IntentRecord>,
    log: Vec<String>,
}

impl Simulation {
    pub fn new(network: Network, events: Vec<Event>) -> Self {
        let next_seq = events.iter().map(|e| e.seq + 1).max().unwrap_or(0);
        Simulation {
            network,
            queue: events.into_iter().map(Queued).collect(),
            next_seq,
            now: 0.0,
            metrics: Metrics::default(),
            records: Vec::new(),
            log: Vec::new(),
        }
    }

    /// Explicit events first, in document order, then generated traffic.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, SimError> {
        let network = scenario.build_network()?;
        let mut events: Vec<Event> = scenario
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| Event {
                time: e.at(),
                seq: i as u64,
                kind: match e {
                    EventSpec::Arrival {
                        src, dst, rate, holding, ..
                    } => EventKind::Arrival {
                        intent: ConnectivityIntent::new(*src, *dst, *rate),
                        holding: *holding,
                    },
                    EventSpec::LinkDown { a, b, .. } => EventKind::LinkDown(LinkKey::new(*a, *b)),
                    EventSpec::LinkUp { a, b, .. } => EventKind::LinkUp(LinkKey::new(*a, *b)),
                },
            })
            .collect();
        if let Some(t) = &scenario.traffic {
            let offset = events.len() as u64;
            events.extend(
                generate_traffic(t, &scenario.nodes(), scenario.seed)?
                    .into_iter()
                    .map(|mut e| {
                        e.seq += offset;
                        e
                    }),
            );
        }
        Ok(Simulation::new(network, events))
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn records(&self) -> &[IntentRecord] {
        &self.records
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(Event { time, seq, kind }));
    }

    /// Process the next event, returning it, or `None` when the queue is
    /// empty.
    pub fn step(&mut self) -> Result<Option<Event>, SimError> {
        let Some(Queued(event)) = self.queue.pop() else {
            return Ok(None);
        };
        self.now = event.time;
        let time = event.time;
        let at = |source| SimError::Controller { time, source };
        let line = match &event.kind {
            EventKind::Arrival { intent, holding } => {
                let (id, outcome) = self.arrive(intent.clone()).map_err(at)?;
                if let (Outcome::Installed, Some(h)) = (outcome, holding) {
                    self.schedule(time + h, EventKind::Departure(id));
                }
                format!(
                    "ARRIVAL {}->{} rate={} => {id} {outcome}",
                    intent.src, intent.dst, intent.rate
                )
            }
            EventKind::Departure(id) => {
                let ctrl = self
                    .network
                    .domain_mut(id.domain)
                    .ok_or(ControllerError::UnknownDomain(id.domain))
                    .map_err(at)?;
                ctrl.withdraw(*id).map_err(at)?;
                self.network.deliver_messages().map_err(at)?;
                format!("DEPARTURE {id}")
            }
            EventKind::LinkDown(key) => {
                let failed = self.network.monitor_failure(*key).map_err(at)?;
                self.network.deliver_messages().map_err(at)?;
                format!("LINK_DOWN {key} failed={}", failed.len())
            }
            EventKind::LinkUp(key) => {
                self.network.monitor_repair(*key).map_err(at)?;
                self.network.deliver_messages().map_err(at)?;
                format!("LINK_UP {key}")
            }
        };
        debug!("t={time:.6} {line}");
        self.log.push(format!("{time:.6} {line}"));
        for m in self.network.take_log() {
            self.log.push(format!("  {m}"));
        }
        let (used, total) = self.network.slot_usage();
        let u = if total == 0 { 0.0 } else { used as f64 / total as f64 };
        self.metrics.slot_utilization_samples.push((time, u));
        self.metrics.failures_recovered = self.network.total_recovered();
        Ok(Some(event))
    }

    fn arrive(&mut self, intent: ConnectivityIntent) -> Result<(IntentId, Outcome), ControllerError> {
        self.metrics.offered += 1;
        let ctrl = self.network.controller_for(intent.src)?;
        let id = ctrl.submit(intent)?;
        let result = ctrl.compile_connectivity(id)?;
        let outcome = match result.reason {
            Some(reason) if !result.is_compiled() => Outcome::Blocked(reason),
            _ => {
                self.network.deliver_messages()?;
                let ctrl = self.network.domain_mut(id.domain).expect("source domain");
                match ctrl.dag().state(id)? {
                    IntentState::Compiled => {
                        ctrl.install_crossdomain(id)?;
                        self.network.deliver_messages()?;
                        let ctrl = self.network.domain_mut(id.domain).expect("source domain");
                        if ctrl.dag().state(id)? == IntentState::Installed {
                            Outcome::Installed
                        } else {
                            Outcome::BlockedConflict
                        }
                    }
                    _ => Outcome::BlockedRemote,
                }
            }
        };
        if outcome == Outcome::Installed {
            self.metrics.installed_ok += 1;
        } else {
            self.metrics.blocked += 1;
            let ctrl = self.network.domain_mut(id.domain).expect("source domain");
            ctrl.abandon(id)?;
            self.network.deliver_messages()?;
        }
        self.records.push(IntentRecord {
            intent: id,
            outcome,
            compile_time: self.now,
            install_time: (outcome == Outcome::Installed).then_some(self.now),
        });
        Ok((id, outcome))
    }

    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        while self.step()?.is_some() {}
        Ok(())
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            snapshot: self.network.snapshot(),
            metrics: self.metrics,
            records: self.records,
            log: self.log,
        }
    }
}

/// Run a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::from_scenario(scenario)?;
    sim.run_to_end()?;
    let out = sim.finish();
    info!(
        "offered={} blocked={} installed={} recovered={}",
        out.metrics.offered, out.metrics.blocked, out.metrics.installed_ok, out.metrics.failures_recovered
    );
    Ok(out)
}
