use ibnsim::scenario::{parse_scenario, ScenarioError};
use proptest::prelude::*;
use serde_json::{json, Value};

fn doc_strategy() -> impl Strategy<Value = Value> {
    (
        1u32..4,
        2u32..5,
        prop::collection::vec((0u32..5, 0u32..5, 1u32..3000), 0..8),
        prop::option::of(4u16..120),
        prop::option::of(1usize..5),
        any::<bool>(),
        any::<u64>(),
        prop::collection::vec((0u8..3, 0u32..100), 0..6),
        prop::option::of((1usize..50, 1u32..10, 1u32..30)),
    )
        .prop_map(|(domains, nodes, links, grid, k, none, seed, events, traffic)| {
            let ds: Vec<Value> = (1..=domains)
                .map(|d| {
                    let mut seen = std::collections::BTreeSet::new();
                    let ls: Vec<Value> = links
                        .iter()
                        .map(|&(a, b, len)| (a % nodes + 1, b % nodes + 1, len))
                        .filter(|&(a, b, _)| a != b && seen.insert((a.min(b), a.max(b))))
                        .map(|(a, b, len)| json!({ "a": a, "b": b, "length": len as f64 / 7.0 }))
                        .collect();
                    json!({
                        "id": d,
                        "nodes": (1..=nodes).map(|l| json!({ "id": l, "ports": 4 + l, "port_rate": 100.0 * l as f64 })).collect::<Vec<_>>(),
                        "links": ls,
                    })
                })
                .collect();
            let borders: Vec<Value> = (1..domains)
                .map(|d| json!({ "a": format!("{d}.1"), "b": format!("{}.{nodes}", d + 1), "length": 12.5 }))
                .collect();
            let evs: Vec<Value> = events
                .iter()
                .map(|&(kind, t)| match kind {
                    0 => json!({ "kind": "arrival", "at": t as f64 / 3.0, "src": "1.1", "dst": "1.2", "rate": 100, "holding": 2.5 }),
                    1 if domains > 1 => json!({ "kind": "link_down", "at": t, "a": "1.1", "b": format!("2.{nodes}") }),
                    _ => json!({ "kind": "arrival", "at": t, "src": "1.2", "dst": "1.1", "rate": 40 }),
                })
                .collect();
            let mut doc = json!({ "domains": ds, "border_links": borders, "events": evs, "seed": seed });
            if let Some(g) = grid {
                doc["grid_size"] = json!(g);
            }
            if let Some(k) = k {
                doc["k_paths"] = json!(k);
            }
            if none {
                doc["recovery"] = json!("none");
            }
            if let Some((count, rate, hold)) = traffic {
                doc["traffic"] = json!({ "count": count, "arrival_rate": rate as f64 / 3.0, "mean_holding": hold });
            }
            doc
        })
}

proptest! {
    #[test]
    fn render_round_trip(doc in doc_strategy()) {
        let first = parse_scenario(&doc.to_string()).unwrap();
        let rendered = first.render();
        let second = parse_scenario(&rendered).unwrap();
        prop_assert_eq!(&second, &first);
        prop_assert_eq!(second.render(), rendered);
    }

    #[test]
    fn built_networks_partition_nodes(doc in doc_strategy()) {
        let s = parse_scenario(&doc.to_string()).unwrap();
        let net = s.build_network().unwrap();
        let mut owned = Vec::new();
        for d in net.domains() {
            for node in d.graph().routers.keys() {
                prop_assert_eq!(node.domain, d.id());
                owned.push(*node);
            }
        }
        owned.sort();
        prop_assert_eq!(owned, s.nodes());
    }
}

fn validation_message(doc: Value) -> String {
    match parse_scenario(&doc.to_string()) {
        Err(ScenarioError::Validation(m)) => m,
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn validation_names_the_invariant() {
    let base = || json!({ "domains": [ { "id": 1, "nodes": [ { "id": 1 }, { "id": 2 } ] } ] });

    let mut d = base();
    d["domains"][0]["links"] = json!([ { "a": 1, "b": 2, "length": 1 }, { "a": 2, "b": 1, "length": 4 } ]);
    assert!(validation_message(d).contains("duplicate link"));

    let mut d = base();
    d["domains"][0]["links"] = json!([ { "a": 1, "b": 2, "length": 0 } ]);
    assert!(validation_message(d).contains("non-positive length"));

    let mut d = base();
    d["events"] = json!([ { "kind": "arrival", "at": 0, "src": "1.1", "dst": "3.1", "rate": 10 } ]);
    assert!(validation_message(d).contains("unknown node 3.1"));

    let mut d = base();
    d["events"] = json!([ { "kind": "link_up", "at": 0, "a": "1.1", "b": "1.2" } ]);
    assert!(validation_message(d).contains("unknown link"));

    let mut d = base();
    d["border_links"] = json!([ { "a": "1.1", "b": "1.2", "length": 3 } ]);
    assert!(validation_message(d).contains("same domain"));

    let mut d = base();
    d["version"] = json!(2);
    assert!(validation_message(d).contains("schema version"));

    let mut d = base();
    d["modes"] = json!([ { "rate": 100, "reach": 0, "slots": 2 } ]);
    assert!(validation_message(d).contains("non-positive"));

    let mut d = base();
    d["traffic"] = json!({ "count": 3, "arrival_rate": -1, "mean_holding": 1 });
    assert!(validation_message(d).contains("arrival_rate"));
}

#[test]
fn shipped_scenarios_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        ibnsim::scenario::load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 3);
}
