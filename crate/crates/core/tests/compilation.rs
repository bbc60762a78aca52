mod common;

use common::{n, network, triangle};
use ibnsim::compile::{BlockReason, InstallOutcome};
use ibnsim::domain::ControllerError;
use ibnsim::intent::{ConnectivityIntent, Intent, IntentState};
use ibnsim::{DomainId, LinkKey, SlotRange, TransmissionMode};
use serde_json::json;

fn two_nodes(grid: u16) -> serde_json::Value {
    json!({
        "grid_size": grid,
        "domains": [{ "id": 1, "nodes": [ { "id": 1 }, { "id": 2 } ],
                      "links": [ { "a": 1, "b": 2, "length": 100 } ] }]
    })
}

#[test]
fn two_node_compile_children() {
    let mut net = network(two_nodes(80));
    let d = net.domain_mut(DomainId(1)).unwrap();
    let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    let res = d.compile_connectivity(id).unwrap();
    assert!(res.is_compiled());
    assert_eq!(res.reason, None);
    let payloads: Vec<&Intent> = res.children.iter().map(|(_, p)| p).collect();
    assert_eq!(payloads.len(), 3);
    assert!(matches!(payloads[0], Intent::RouterPort(p) if p.node == n(1, 1)));
    assert!(matches!(payloads[1], Intent::RouterPort(p) if p.node == n(1, 2)));
    let Intent::Lightpath(lp) = payloads[2] else { panic!("expected lightpath") };
    assert_eq!(lp.path, vec![n(1, 1), n(1, 2)]);
    assert_eq!(lp.mode, TransmissionMode::new(100.0, 5000.0, 4));
    assert_eq!(lp.slots, SlotRange::with_width(1, 4));
    assert_eq!(d.dag().state(id).unwrap(), IntentState::Compiled);
    for (c, _) in &res.children {
        assert_eq!(d.dag().state(*c).unwrap(), IntentState::Compiled);
    }
}

#[test]
fn down_link_blocks_with_no_path() {
    let mut net = network(two_nodes(80));
    net.monitor_failure(LinkKey::new(n(1, 1), n(1, 2))).unwrap();
    let d = net.domain_mut(DomainId(1)).unwrap();
    let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    let res = d.compile_connectivity(id).unwrap();
    assert!(!res.is_compiled());
    assert!(res.children.is_empty());
    assert_eq!(res.reason, Some(BlockReason::NoPath));
    assert_eq!(d.dag().state(id).unwrap(), IntentState::Uncompiled);
    assert!(d.dag().children(id).unwrap().is_empty());
}

#[test]
fn no_mode_for_unreachable_rate() {
    let mut net = network(two_nodes(80));
    let d = net.domain_mut(DomainId(1)).unwrap();
    let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 800.0)).unwrap();
    assert_eq!(d.compile_connectivity(id).unwrap().reason, Some(BlockReason::NoMode));
}

#[test]
fn saturated_short_path_moves_to_longer_path() {
    // Fill the direct 1-3 fiber with ten installed 8-slot lightpaths.
    let mut doc = triangle("none");
    doc["domains"][0]["links"] = json!([
        { "a": 1, "b": 2, "length": 200 },
        { "a": 2, "b": 3, "length": 200 },
        { "a": 1, "b": 3, "length": 100 }
    ]);
    doc["domains"][0]["nodes"] = json!([
        { "id": 1, "ports": 64, "add_drop": 64 }, { "id": 2 }, { "id": 3, "ports": 64, "add_drop": 64 }
    ]);
    let mut net = network(doc);
    let d = net.domain_mut(DomainId(1)).unwrap();
    for _ in 0..10 {
        let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 3), 400.0)).unwrap();
        assert!(d.compile_connectivity(id).unwrap().is_compiled());
        assert_eq!(d.install_intent(id).unwrap(), InstallOutcome::Installed);
    }
    assert_eq!(d.graph().link(n(1, 1), n(1, 3)).unwrap().used_slots(), 80);
    let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 3), 100.0)).unwrap();
    let res = d.compile_connectivity(id).unwrap();
    let lp = res.children.iter().find_map(|(_, p)| p.as_lightpath()).unwrap();
    assert_eq!(lp.path, vec![n(1, 1), n(1, 2), n(1, 3)]);
    assert_eq!(lp.slots, SlotRange::with_width(1, 4));
}

#[test]
fn install_marks_slots_and_adds_virtual_link() {
    let mut net = network(two_nodes(80));
    let d = net.domain_mut(DomainId(1)).unwrap();
    let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    d.compile_connectivity(id).unwrap();
    assert_eq!(d.install_intent(id).unwrap(), InstallOutcome::Installed);
    assert_eq!(d.dag().state(id).unwrap(), IntentState::Installed);
    let lp = d.dag().leaves(id).into_iter().find(|l| d.dag().payload(*l).unwrap().as_lightpath().is_some()).unwrap();
    let link = LinkKey::new(n(1, 1), n(1, 2));
    for s in 1..=4 {
        assert_eq!(d.ledger().spectrum_holder(link, s), Some(lp));
        assert_eq!(d.graph().links[&link].holder(s), Some(lp));
    }
    assert_eq!(d.ledger().spectrum_holder(link, 5), None);
    assert_eq!(d.graph().virtual_links.len(), 1);
    assert_eq!(d.graph().routers[&n(1, 1)].ports_used, 1);
}

#[test]
fn second_install_on_same_block_conflicts_atomically() {
    let mut net = network(two_nodes(8));
    let d = net.domain_mut(DomainId(1)).unwrap();
    let first = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    d.compile_connectivity(first).unwrap();
    d.install_intent(first).unwrap();

    let a = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    let b = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    let ra = d.compile_connectivity(a).unwrap();
    let rb = d.compile_connectivity(b).unwrap();
    let block = |r: &ibnsim::compile::CompilationResult| r.children.iter().find_map(|(_, p)| p.as_lightpath()).unwrap().slots;
    assert_eq!(block(&ra), SlotRange::with_width(5, 4));
    assert_eq!(block(&rb), SlotRange::with_width(5, 4));

    assert_eq!(d.install_intent(a).unwrap(), InstallOutcome::Installed);
    let ledger_before = d.ledger().clone();
    let graph_before = d.graph().clone();
    let out = d.install_intent(b).unwrap();
    assert!(matches!(out, InstallOutcome::Conflict(c) if c.is_spectrum()));
    assert_eq!(d.ledger(), &ledger_before);
    assert_eq!(d.graph(), &graph_before);
    assert_eq!(d.dag().state(b).unwrap(), IntentState::Compiled);
}

#[test]
fn install_uninstall_round_trip() {
    let mut net = network(two_nodes(80));
    let d = net.domain_mut(DomainId(1)).unwrap();
    let empty_ledger = d.ledger().clone();
    let empty_graph = d.graph().clone();
    let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    d.compile_connectivity(id).unwrap();
    d.install_intent(id).unwrap();
    let first = d.ledger().clone();
    d.uninstall_intent(id).unwrap();
    assert_eq!(d.ledger(), &empty_ledger);
    assert_eq!(d.graph(), &empty_graph);
    assert_eq!(d.dag().state(id).unwrap(), IntentState::Compiled);
    assert_eq!(d.install_intent(id).unwrap(), InstallOutcome::Installed);
    assert_eq!(d.ledger(), &first);
}

#[test]
fn wrong_state_errors() {
    let mut net = network(two_nodes(80));
    let d = net.domain_mut(DomainId(1)).unwrap();
    let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    assert!(matches!(d.uninstall_intent(id), Err(ControllerError::WrongState { .. })));
    assert!(matches!(d.install_intent(id), Err(ControllerError::WrongState { .. })));
    d.compile_connectivity(id).unwrap();
    assert!(matches!(d.compile_connectivity(id), Err(ControllerError::WrongState { .. })));
    let foreign = d.submit(ConnectivityIntent::new(n(2, 1), n(1, 2), 100.0));
    if let Ok(f) = foreign {
        assert!(matches!(d.compile_connectivity(f), Err(ControllerError::NotLocalSource { .. })));
    }
}

#[test]
fn uninstall_failed_intent_releases_everything() {
    let mut net = network(triangle("none"));
    let d = net.domain_mut(DomainId(1)).unwrap();
    let id = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 3), 100.0)).unwrap();
    d.compile_connectivity(id).unwrap();
    d.install_intent(id).unwrap();
    let failed = d.link_down(LinkKey::new(n(1, 1), n(1, 3))).unwrap();
    assert_eq!(failed.len(), 1);
    assert_eq!(d.dag().state(id).unwrap(), IntentState::Failed);
    // Reservations persist while the link is down.
    assert!(!d.ledger().is_empty());
    d.uninstall_intent(id).unwrap();
    assert!(d.ledger().is_empty());
    assert_eq!(d.dag().state(id).unwrap(), IntentState::Compiled);
    assert!(d.graph().virtual_links.is_empty());
}

#[test]
fn port_exhaustion_blocks_with_no_port() {
    let mut net = network(json!({
        "domains": [{ "id": 1, "nodes": [ { "id": 1, "ports": 1 }, { "id": 2 } ],
                      "links": [ { "a": 1, "b": 2, "length": 100 } ] }]
    }));
    let d = net.domain_mut(DomainId(1)).unwrap();
    let a = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    d.compile_connectivity(a).unwrap();
    d.install_intent(a).unwrap();
    let b = d.submit(ConnectivityIntent::new(n(1, 1), n(1, 2), 100.0)).unwrap();
    assert_eq!(d.compile_connectivity(b).unwrap().reason, Some(BlockReason::NoPort));
}
