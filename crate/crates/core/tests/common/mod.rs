#![allow(dead_code)]

use ibnsim::multidomain::Network;
use ibnsim::scenario::{parse_scenario, Scenario};
use ibnsim::NodeId;
use serde_json::{json, Value};

pub fn n(domain: u32, local: u32) -> NodeId {
    NodeId::new(domain, local)
}

pub fn scenario(doc: Value) -> Scenario {
    parse_scenario(&doc.to_string()).expect("test scenario is valid")
}

pub fn network(doc: Value) -> Network {
    scenario(doc).build_network().expect("network builds")
}

/// `domains` domains in a line, each a chain of `nodes` nodes 100 km apart;
/// domain i's last node meets domain i+1's first node over a 50 km border
/// fiber.
pub fn line(domains: u32, nodes: u32) -> Value {
    let ds: Vec<Value> = (1..=domains)
        .map(|d| {
            json!({
                "id": d,
                "nodes": (1..=nodes).map(|l| json!({ "id": l, "ports": 64, "add_drop": 64 })).collect::<Vec<_>>(),
                "links": (1..nodes).map(|l| json!({ "a": l, "b": l + 1, "length": 100 })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let borders: Vec<Value> = (1..domains)
        .map(|d| json!({ "a": format!("{d}.{nodes}"), "b": format!("{}.1", d + 1), "length": 50 }))
        .collect();
    json!({ "domains": ds, "border_links": borders })
}

pub fn triangle(recovery: &str) -> Value {
    json!({
        "recovery": recovery,
        "domains": [{
            "id": 1,
            "nodes": [ { "id": 1 }, { "id": 2 }, { "id": 3 } ],
            "links": [
                { "a": 1, "b": 2, "length": 200 },
                { "a": 2, "b": 3, "length": 200 },
                { "a": 1, "b": 3, "length": 300 }
            ]
        }]
    })
}
