//! Output formats: DAG as DOT, topology as JSON, metrics as CSV, and the
//! saved run state read back by the `export-*` commands.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dag::IntentDag;
use crate::domain::DomainSnapshot;
use crate::intent::{Intent, IntentState};
use crate::sim::{IntentRecord, Metrics, RunOutput};

pub const STATE_VERSION: u32 = 1;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz rendering of one DAG. Nodes and edges appear in identifier
/// order; labels read `kind / id / state`.
pub fn export_dag(dag: &IntentDag) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(&format!("domain {}", dag.domain()))).unwrap();
    out.push_str("  node [shape=box];\n");
    for (id, node) in dag.iter() {
        let label = format!("{} / {} / {}", node.payload.kind(), id, node.state);
        writeln!(out, "  {} [label={}];", quote(&id.to_string()), quote(&label)).unwrap();
    }
    for (parent, child) in dag.edges() {
        writeln!(out, "  {} -> {};", quote(&parent.to_string()), quote(&child.to_string())).unwrap();
    }
    out.push_str("}\n");
    out
}

/// All domains in one file, one subgraph cluster each.
pub fn export_dags(domains: &[DomainSnapshot]) -> String {
    let mut out = String::from("digraph \"intents\" {\n  node [shape=box];\n");
    for d in domains {
        writeln!(out, "  subgraph {} {{", quote(&format!("cluster_{}", d.id))).unwrap();
        writeln!(out, "    label={};", quote(&format!("domain {}", d.id))).unwrap();
        for (id, node) in d.dag.iter() {
            let label = format!("{} / {} / {}", node.payload.kind(), id, node.state);
            writeln!(out, "    {} [label={}];", quote(&id.to_string()), quote(&label)).unwrap();
        }
        for (parent, child) in d.dag.edges() {
            writeln!(out, "    {} -> {};", quote(&parent.to_string()), quote(&child.to_string())).unwrap();
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

/// Topology with per-slot occupancy and an overlay of installed
/// lightpaths. Border links are listed once, by the domain holding them.
pub fn export_topology(domains: &[DomainSnapshot]) -> Value {
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    let mut borders = Vec::new();
    let mut lightpaths = Vec::new();
    for d in domains {
        for (id, r) in &d.graph.routers {
            let oxc = d.graph.oxcs.get(id);
            nodes.push(json!({
                "id": id,
                "domain": d.id,
                "ports": r.port_count,
                "ports_used": r.ports_used,
                "port_rate": r.port_rate,
                "add_drop": oxc.map(|o| o.add_drop_capacity),
                "add_drop_used": oxc.map(|o| o.add_drop_used),
            }));
        }
        for (key, link) in &d.graph.links {
            let border = d.graph.stubs.contains(&key.lo()) || d.graph.stubs.contains(&key.hi());
            let entry = json!({
                "a": key.lo(),
                "b": key.hi(),
                "length": link.length,
                "operational": link.operational,
                "owner": d.id,
                "slots": link.slots,
            });
            if border {
                borders.push(entry);
            } else {
                links.push(entry);
            }
        }
        for (id, node) in d.dag.iter() {
            if let Intent::Lightpath(lp) = &node.payload {
                if matches!(node.state, IntentState::Installed | IntentState::Failed) {
                    lightpaths.push(json!({
                        "intent": id,
                        "domain": d.id,
                        "state": node.state,
                        "path": lp.path,
                        "slots": { "start": lp.slots.start, "end": lp.slots.end },
                        "mode": lp.mode,
                    }));
                }
            }
        }
    }
    json!({
        "nodes": nodes,
        "links": links,
        "border_links": borders,
        "lightpaths": lightpaths,
    })
}

/// Summary rows under `metric,value`, a blank line, then one row per
/// arrival under `intent_id,outcome,compile_time,install_time`.
pub fn metrics_csv(metrics: &Metrics, records: &[IntentRecord]) -> String {
    let mut out = String::from("metric,value\n");
    writeln!(out, "offered,{}", metrics.offered).unwrap();
    writeln!(out, "blocked,{}", metrics.blocked).unwrap();
    writeln!(out, "installed_ok,{}", metrics.installed_ok).unwrap();
    writeln!(out, "failures_recovered,{}", metrics.failures_recovered).unwrap();
    writeln!(out, "blocking_probability,{:.6}", metrics.blocking_probability()).unwrap();
    writeln!(out, "mean_slot_utilization,{:.6}", metrics.mean_slot_utilization()).unwrap();
    out.push('\n');
    out.push_str("intent_id,outcome,compile_time,install_time\n");
    for r in records {
        let install = r.install_time.map(|t| format!("{t:.6}")).unwrap_or_default();
        writeln!(out, "{},{},{:.6},{}", r.intent, r.outcome, r.compile_time, install).unwrap();
    }
    out
}

pub fn event_log(lines: &[String]) -> String {
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Everything needed to re-export a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedRun {
    pub version: u32,
    pub metrics: Metrics,
    pub records: Vec<IntentRecord>,
    pub domains: Vec<DomainSnapshot>,
}

impl SavedRun {
    pub fn from_output(out: &RunOutput) -> Self {
        SavedRun {
            version: STATE_VERSION,
            metrics: out.metrics.clone(),
            records: out.records.clone(),
            domains: out.snapshot.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{DomainId, NodeId};
    use crate::intent::{ConnectivityIntent, RouterPortIntent};

    #[test]
    fn dot_is_stable_and_labeled() {
        let mut dag = IntentDag::new(DomainId(1));
        let root = dag
            .add_intent(Intent::Connectivity(ConnectivityIntent::new(NodeId::new(1, 1), NodeId::new(1, 2), 100.0)))
            .unwrap();
        dag.add_child(root, Intent::RouterPort(RouterPortIntent { node: NodeId::new(1, 1), rate: 100.0 }))
            .unwrap();
        let dot = export_dag(&dag);
        assert_eq!(dot, export_dag(&dag.clone()));
        assert!(dot.starts_with("digraph \"domain 1\" {\n"));
        assert!(dot.contains("\"1:1\" [label=\"connectivity / 1:1 / uncompiled\"];"));
        assert!(dot.contains("\"1:1\" -> \"1:2\";"));
    }

    #[test]
    fn csv_layout() {
        let csv = metrics_csv(&Metrics::default(), &[]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "metric,value");
        assert_eq!(lines[1], "offered,0");
        assert_eq!(lines.last().copied(), Some("intent_id,outcome,compile_time,install_time"));
    }
}
