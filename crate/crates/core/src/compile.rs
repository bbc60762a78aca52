//! Intent compilation (routing, mode and spectrum assignment, router ports)
//! and transactional installation.

use std::fmt;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::domain::{ControllerError, DomainController};
use crate::ids::{IntentId, NodeId, SlotRange};
use crate::intent::{ConnectivityIntent, Intent, IntentState, LightpathIntent, RouterPortIntent};
use crate::ledger::{Conflict, Reservation};
use crate::network::{NetworkError, NetworkGraph, TransmissionMode};

/// Why a compilation could not produce an implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockReason {
    NoPath,
    NoMode,
    NoSpectrum,
    NoPort,
}

impl fmt::Display for BlockReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockReason::NoPath => "no-path",
            BlockReason::NoMode => "no-mode",
            BlockReason::NoSpectrum => "no-spectrum",
            BlockReason::NoPort => "no-port",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompileOutcome {
    Compiled,
    Blocked,
}

/// Result of compiling one connectivity intent.
///
/// For a cross-domain intent `Compiled` means the local part is compiled and
/// the remote part has been delegated; the intent's aggregate state stays
/// uncompiled until the neighbor reports back.
#[derive(Debug, Clone, PartialEq)]
pub struct CompilationResult {
    pub outcome: CompileOutcome,
    pub children: Vec<(IntentId, Intent)>,
    pub reason: Option<BlockReason>,
}

impl CompilationResult {
    fn blocked(reason: BlockReason) -> Self {
        CompilationResult {
            outcome: CompileOutcome::Blocked,
            children: Vec::new(),
            reason: Some(reason),
        }
    }

    pub fn is_compiled(&self) -> bool {
        self.outcome == CompileOutcome::Compiled
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstallOutcome {
    Installed,
    Conflict(Conflict),
}

/// Pick the feasible mode (rate and reach both sufficient) with the fewest
/// slots; ties go to the lower rate, then to the earlier table entry.
pub fn select_mode(modes: &[TransmissionMode], rate: f64, distance: f64) -> Option<TransmissionMode> {
    modes
        .iter()
        .enumerate()
        .filter(|(_, m)| m.rate >= rate && m.reach >= distance)
        .min_by(|(i, a), (j, b)| {
            a.slots
                .cmp(&b.slots)
                .then(a.rate.total_cmp(&b.rate))
                .then(i.cmp(j))
        })
        .map(|(_, m)| *m)
}

/// Lowest block of `width` contiguous slots free on every link of `path`.
pub fn first_fit_spectrum(
    graph: &NetworkGraph,
    path: &[NodeId],
    width: u16,
) -> Result<Option<SlotRange>, NetworkError> {
    let free = graph.free_slot_blocks(path)?;
    if width == 0 || width > graph.grid_size {
        return Ok(None);
    }
    Ok((1..=graph.grid_size - width + 1)
        .find(|&s| (s..s + width).all(|x| free.contains(&x)))
        .map(|s| SlotRange::with_width(s, width)))
}

/// A delegation queued by a successful compilation.
pub(crate) struct Delegation {
    pub neighbor: crate::ids::DomainId,
    pub intent: ConnectivityIntent,
    pub placeholder: IntentId,
}

impl DomainController {
    /// Compile a connectivity intent into router-port and lightpath
    /// children (plus a delegated part when the destination is foreign).
    ///
    /// The intent must be an uncompiled or failed leaf whose source this
    /// domain owns. When blocked, the intent keeps its previous state and
    /// gains no children.
    pub fn compile_connectivity(&mut self, id: IntentId) -> Result<CompilationResult, ControllerError> {
        let node = self.dag.get(id).ok_or(crate::dag::IntentError::UnknownIntent(id))?;
        let conn = node
            .payload
            .as_connectivity()
            .cloned()
            .ok_or(ControllerError::NotConnectivity(id))?;
        let prior = node.state;
        if !node.is_leaf() || !matches!(prior, IntentState::Uncompiled | IntentState::Failed) {
            return Err(ControllerError::WrongState {
                id,
                state: node.state,
                expected: "an uncompiled or failed leaf",
            });
        }
        if !self.owns(conn.src) {
            return Err(ControllerError::NotLocalSource {
                id,
                src: conn.src,
                domain: self.id,
            });
        }

        let mut delegations = Vec::new();
        let mut reason = self.plan(id, &conn, &mut delegations)?;
        if reason.is_none() {
            // Every leaf under `id` is new here; check them together.
            let batch = self.local_reservations(id, |s| {
                matches!(s, IntentState::Uncompiled | IntentState::Compiled)
            })?;
            if let Err(c) = self.ledger.check(&self.graph, &batch) {
                reason = Some(if c.is_spectrum() {
                    BlockReason::NoSpectrum
                } else {
                    BlockReason::NoPort
                });
            }
        }
        if let Some(r) = reason {
            debug!("domain {} blocks {id}: {r}", self.id);
            self.dag.prune_children(id);
            self.dag.force_state(id, prior);
            return Ok(CompilationResult::blocked(r));
        }

        for leaf in self.dag.leaves(id) {
            let n = self.dag.get(leaf).expect("leaf exists");
            if n.state == IntentState::Uncompiled && !matches!(n.payload, Intent::Remote(_)) {
                self.dag.transition(leaf, IntentState::Compiled)?;
            }
        }
        for d in delegations {
            self.send(
                d.neighbor,
                crate::multidomain::MessageKind::Delegate {
                    intent: d.intent,
                    parent: d.placeholder,
                },
            );
        }
        let children = self
            .dag
            .children(id)?
            .into_iter()
            .map(|c| (c, self.dag.payload(c).expect("child exists").clone()))
            .collect();
        Ok(CompilationResult {
            outcome: CompileOutcome::Compiled,
            children,
            reason: None,
        })
    }

    /// Add children for every part of `conn`. Returns the blocking reason,
    /// if any; children added before a block are pruned by the caller.
    fn plan(
        &mut self,
        id: IntentId,
        conn: &ConnectivityIntent,
        delegations: &mut Vec<Delegation>,
    ) -> Result<Option<BlockReason>, ControllerError> {
        if let Some(ingress) = conn.ingress {
            self.dag.add_child(
                id,
                Intent::RouterPort(RouterPortIntent {
                    node: conn.src,
                    rate: conn.rate,
                }),
            )?;
            // The lower-numbered domain holds the border fiber.
            if self.graph.links.contains_key(&ingress) {
                let upstream = ingress.other(conn.src).expect("ingress ends at src");
                match self.border_lightpath(upstream, conn.src, conn.rate) {
                    Ok(lp) => {
                        self.dag.add_child(id, Intent::Lightpath(lp))?;
                    }
                    Err(r) => return Ok(Some(r)),
                }
            }
        }
        if conn.src == conn.dst {
            return Ok(None);
        }
        if self.owns(conn.dst) {
            self.plan_intra(id, conn)
        } else {
            self.plan_crossdomain(id, conn, delegations)
        }
    }

    fn plan_intra(
        &mut self,
        id: IntentId,
        conn: &ConnectivityIntent,
    ) -> Result<Option<BlockReason>, ControllerError> {
        let paths = self.graph.k_shortest_paths_with(conn.src, conn.dst, self.config.k_paths, |l| {
            !conn.excluded_links.contains(&l.key)
        });
        if paths.is_empty() {
            return Ok(Some(BlockReason::NoPath));
        }
        let placeholder = id;
        let terminations = [
            (placeholder, Reservation::Ports { node: conn.src, rate: conn.rate }),
            (placeholder, Reservation::Ports { node: conn.dst, rate: conn.rate }),
            (placeholder, Reservation::AddDrop { node: conn.src }),
            (placeholder, Reservation::AddDrop { node: conn.dst }),
        ];
        if self.ledger.check(&self.graph, &terminations).is_err() {
            return Ok(Some(BlockReason::NoPort));
        }

        let mut first_reason = None;
        for path in &paths {
            let Some(mode) = select_mode(&self.config.modes, conn.rate, path.length) else {
                first_reason.get_or_insert(BlockReason::NoMode);
                continue;
            };
            let Some(slots) = first_fit_spectrum(&self.graph, &path.nodes, mode.slots)? else {
                first_reason.get_or_insert(BlockReason::NoSpectrum);
                continue;
            };
            for node in [conn.src, conn.dst] {
                self.dag.add_child(
                    id,
                    Intent::RouterPort(RouterPortIntent {
                        node,
                        rate: conn.rate,
                    }),
                )?;
            }
            self.dag.add_child(
                id,
                Intent::Lightpath(LightpathIntent {
                    path: path.nodes.clone(),
                    mode,
                    slots,
                }),
            )?;
            return Ok(None);
        }
        Ok(first_reason)
    }

    /// Lightpath over the single border fiber `from`-`to`.
    pub(crate) fn border_lightpath(
        &self,
        from: NodeId,
        to: NodeId,
        rate: f64,
    ) -> Result<LightpathIntent, BlockReason> {
        let link = self.graph.link(from, to).ok_or(BlockReason::NoPath)?;
        if !link.operational {
            return Err(BlockReason::NoPath);
        }
        let mode = select_mode(&self.config.modes, rate, link.length).ok_or(BlockReason::NoMode)?;
        let path = vec![from, to];
        let slots = first_fit_spectrum(&self.graph, &path, mode.slots)
            .expect("link exists")
            .ok_or(BlockReason::NoSpectrum)?;
        Ok(LightpathIntent { path, mode, slots })
    }

    /// Reserve the resources of every compiled local leaf under `id` in one
    /// transaction. On conflict nothing changes.
    pub fn install_intent(&mut self, id: IntentId) -> Result<InstallOutcome, ControllerError> {
        self.expect_state(id, &[IntentState::Compiled], "compiled")?;
        self.install_local(id)
    }

    pub(crate) fn install_local(&mut self, id: IntentId) -> Result<InstallOutcome, ControllerError> {
        let batch = self.local_reservations(id, |s| s == IntentState::Compiled)?;
        if let Err(c) = self.ledger.reserve(&mut self.graph, &batch) {
            debug!("domain {} install of {id} conflicts: {c}", self.id);
            return Ok(InstallOutcome::Conflict(c));
        }
        for leaf in self.dag.leaves(id) {
            let n = self.dag.get(leaf).expect("leaf exists");
            let local = matches!(n.payload, Intent::Lightpath(_) | Intent::RouterPort(_));
            if local && n.state == IntentState::Compiled {
                self.dag.transition(leaf, IntentState::Installed)?;
                self.add_virtual_link(leaf);
            }
        }
        Ok(InstallOutcome::Installed)
    }

    /// Release all resources of an installed or failed intent, returning its
    /// leaves to compiled. Installed delegated parts are asked to uninstall
    /// as well.
    pub fn uninstall_intent(&mut self, id: IntentId) -> Result<(), ControllerError> {
        self.expect_state(
            id,
            &[IntentState::Installed, IntentState::Failed],
            "installed or failed",
        )?;
        self.compensate(id)
    }
}
