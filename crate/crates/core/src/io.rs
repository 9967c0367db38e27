//! File formats: networks, cluster graphs, traces and Graphviz export.
//!
//! Networks and graphs are JSON documents with a `version` field. Variables
//! are referred to by name so files stay readable and survive renumbering.
//! Traces are JSON lines, one [`TraceEvent`] per line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Cluster, ClusterGraph, ClusterId};
use crate::network::{BeliefNetwork, VarId, VarSet};
use crate::trace::TraceEvent;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableEntry {
    pub id: String,
    pub cardinality: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub version: u32,
    #[serde(default)]
    pub variables: Vec<VariableEntry>,
    #[serde(default)]
    pub arcs: Vec<(String, String)>,
}

impl NetworkFile {
    pub fn from_network(net: &BeliefNetwork) -> Self {
        Self {
            version: FORMAT_VERSION,
            variables: net
                .variables()
                .map(|v| VariableEntry { id: v.name.clone(), cardinality: v.cardinality })
                .collect(),
            arcs: net.arcs().into_iter().map(|(p, c)| (net.name(p).into(), net.name(c).into())).collect(),
        }
    }

    pub fn to_network(&self) -> Result<BeliefNetwork> {
        check_version(self.version)?;
        let mut net = BeliefNetwork::new();
        for (i, v) in self.variables.iter().enumerate() {
            net.add_variable(&v.id, v.cardinality).map_err(|e| e.at(format!("variables[{i}]")))?;
        }
        for (i, (p, c)) in self.arcs.iter().enumerate() {
            let (Some(pid), Some(cid)) = (net.lookup(p), net.lookup(c)) else {
                return Err(Error::DanglingArc { parent: p.clone(), child: c.clone() }.at(format!("arcs[{i}]")));
            };
            net.add_arc(pid, cid).map_err(|e| e.at(format!("arcs[{i}]")))?;
        }
        Ok(net)
    }
}

fn check_version(v: u32) -> Result<()> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("unsupported format version {v} (expected {FORMAT_VERSION})")).at("version"))
    }
}

/// Parses a network document. Blank input is the empty network.
pub fn parse_network(text: &str) -> Result<BeliefNetwork> {
    if text.trim().is_empty() {
        return Ok(BeliefNetwork::new());
    }
    let file: NetworkFile = serde_json::from_str(text)?;
    file.to_network()
}

pub fn serialize_network(net: &BeliefNetwork) -> String {
    let mut s = serde_json::to_string_pretty(&NetworkFile::from_network(net)).expect("plain data");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub id: u32,
    pub members: Vec<String>,
    #[serde(default)]
    pub family: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub a: u32,
    pub b: u32,
    pub separator: Vec<String>,
}

/// A cluster graph together with its network. `homes` maps each variable
/// to the cluster housing its family; when absent, each family goes to the
/// lowest-id cluster whose family annotation covers it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub version: u32,
    pub network: NetworkFile,
    pub clusters: Vec<ClusterEntry>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homes: Option<BTreeMap<String, u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_cluster: Option<u32>,
}

fn var_names(net: &BeliefNetwork, vars: &VarSet) -> Vec<String> {
    vars.iter().map(|&v| net.name(v).to_string()).collect()
}

fn lookup_all(net: &BeliefNetwork, names: &[String], field: &str) -> Result<VarSet> {
    names
        .iter()
        .map(|n| net.lookup(n).ok_or_else(|| Error::UnknownVariable(n.clone()).at(field)))
        .collect()
}

impl GraphFile {
    pub fn from_graph(g: &ClusterGraph) -> Self {
        let net = g.network();
        Self {
            version: FORMAT_VERSION,
            network: NetworkFile::from_network(net),
            clusters: g
                .clusters()
                .map(|c| ClusterEntry {
                    id: c.id.0,
                    members: var_names(net, &c.members),
                    family: var_names(net, &c.family_vars),
                })
                .collect(),
            edges: g
                .edges()
                .map(|(a, b, sep)| EdgeEntry { a: a.0, b: b.0, separator: var_names(net, sep) })
                .collect(),
            homes: Some(g.homes().iter().map(|(&v, &c)| (net.name(v).to_string(), c.0)).collect()),
            next_cluster: Some(g.next_cluster_id()),
        }
    }

    pub fn to_graph(&self) -> Result<ClusterGraph> {
        check_version(self.version)?;
        let net = self.network.to_network().map_err(|e| e.at("network"))?;
        let mut clusters = Vec::new();
        for (i, c) in self.clusters.iter().enumerate() {
            let field = format!("clusters[{i}]");
            clusters.push(Cluster {
                id: ClusterId(c.id),
                members: lookup_all(&net, &c.members, &field)?,
                family_vars: lookup_all(&net, &c.family, &field)?,
            });
        }
        let mut edges = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            let sep = lookup_all(&net, &e.separator, &format!("edges[{i}]"))?;
            edges.push((ClusterId(e.a), ClusterId(e.b), sep));
        }
        let homes = match &self.homes {
            Some(h) => h
                .iter()
                .map(|(n, &c)| {
                    let v = net.lookup(n).ok_or_else(|| Error::UnknownVariable(n.clone()).at("homes"))?;
                    Ok((v, ClusterId(c)))
                })
                .collect::<Result<BTreeMap<VarId, ClusterId>>>()?,
            None => {
                let mut sorted: Vec<&Cluster> = clusters.iter().collect();
                sorted.sort_by_key(|c| c.id);
                net.ids()
                    .filter_map(|v| {
                        let fam = net.family(v);
                        sorted.iter().find(|c| fam.is_subset(&c.family_vars)).map(|c| (v, c.id))
                    })
                    .collect()
            }
        };
        ClusterGraph::from_parts(net, clusters, edges, homes, self.next_cluster)
    }
}

pub fn parse_graph(text: &str) -> Result<ClusterGraph> {
    let file: GraphFile = serde_json::from_str(text)?;
    file.to_graph()
}

pub fn serialize_graph(g: &ClusterGraph) -> String {
    let mut s = serde_json::to_string_pretty(&GraphFile::from_graph(g)).expect("plain data");
    s.push('\n');
    s
}

fn sorted_names(net: &BeliefNetwork, vars: &VarSet) -> Vec<String> {
    let mut v = var_names(net, vars);
    v.sort();
    v
}

fn quote(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. Members are sorted by name; family variables are
/// suffixed with `*`.
pub fn export_dot(g: &ClusterGraph) -> String {
    let net = g.network();
    let mut out = String::from("graph clusters {\n  node [shape=box];\n");
    for c in g.clusters() {
        let label: Vec<String> = sorted_names(net, &c.members)
            .into_iter()
            .map(|n| {
                let fam = net.lookup(&n).is_some_and(|v| c.family_vars.contains(&v));
                if fam { format!("{n}*") } else { n }
            })
            .collect();
        let _ = writeln!(out, "  {} [label=\"{}: {}\"];", c.id, c.id, quote(&label.join(" ")));
    }
    for (a, b, sep) in g.edges() {
        let _ = writeln!(out, "  {a} -- {b} [label=\"{}\"];", quote(&sorted_names(net, sep).join(" ")));
    }
    out.push_str("}\n");
    out
}

pub fn write_trace(events: &[TraceEvent], mut w: impl Write) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trace_to_string(events: &[TraceEvent]) -> String {
    let mut buf = Vec::new();
    write_trace(events, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Reads a JSON-lines trace. Blank lines are skipped; errors report the
/// line of the file, not of the record.
pub fn read_trace(r: impl BufRead) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line)
            .map_err(|e| Error::Syntax { line: i + 1, column: e.column(), message: e.to_string() })?;
        events.push(ev);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_preset, PresetName};
    use crate::fixtures;
    use crate::graph::build_initial_cluster_graph;
    use crate::trace;

    #[test]
    fn chain_round_trips() {
        let net = fixtures::chain3();
        let text = serialize_network(&net);
        let back = parse_network(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.len(), 3);
        assert_eq!(back.arc_count(), 2);
    }

    #[test]
    fn empty_document_is_empty_network() {
        assert!(parse_network("").unwrap().is_empty());
        assert!(parse_network("  \n").unwrap().is_empty());
        assert!(parse_network(r#"{"version": 1}"#).unwrap().is_empty());
    }

    #[test]
    fn unknown_arc_endpoint_is_named() {
        let text = r#"{"version":1,"variables":[{"id":"A","cardinality":2}],"arcs":[["A","Z"]]}"#;
        let err = parse_network(text).unwrap_err().to_string();
        assert!(err.contains("arcs[0]") && err.contains("A -> Z"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let text = "{\n  \"version\": 1,\n  \"variables\": [\n    {\"id\": \"A\" \"cardinality\": 2}\n  ]\n}";
        match parse_network(text).unwrap_err() {
            Error::Syntax { line, column, .. } => {
                assert_eq!(line, 4);
                assert!(column > 10);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let cyclic = r#"{"version":1,"variables":[{"id":"A","cardinality":2},{"id":"B","cardinality":2}],
            "arcs":[["A","B"],["B","A"]]}"#;
        let err = parse_network(cyclic).unwrap_err().to_string();
        assert!(err.contains("arcs[1]") && err.contains("cycle"), "{err}");
        let dup = r#"{"version":1,"variables":[{"id":"A","cardinality":2},{"id":"A","cardinality":3}]}"#;
        assert!(parse_network(dup).unwrap_err().to_string().contains("variables[1]"));
        let zero = r#"{"version":1,"variables":[{"id":"A","cardinality":0}]}"#;
        assert!(parse_network(zero).is_err());
        assert!(parse_network(r#"{"version":2}"#).unwrap_err().to_string().contains("version"));
        assert!(parse_network(r#"{"version":1,"extra":0}"#).is_err());
    }

    #[test]
    fn graph_round_trips_after_a_run() {
        let mut g = build_initial_cluster_graph(&fixtures::diamond());
        run_preset(&mut g, &PresetName::D.preset(), 4).unwrap();
        let text = serialize_graph(&g);
        let mut back = parse_graph(&text).unwrap();
        let mut expect = g.clone();
        expect.clear_trace();
        back.clear_trace();
        assert_eq!(back, expect);
    }

    #[test]
    fn graph_homes_default_to_family_cover() {
        let text = r#"{"version":1,
            "network":{"version":1,"variables":[{"id":"A","cardinality":2},{"id":"B","cardinality":2}],"arcs":[["A","B"]]},
            "clusters":[{"id":0,"members":["A"],"family":["A"]},{"id":1,"members":["A","B"],"family":["A","B"]}],
            "edges":[{"a":0,"b":1,"separator":["A"]}]}"#;
        let g = parse_graph(text).unwrap();
        let b = g.network().lookup("B").unwrap();
        assert_eq!(g.home_of(b), Some(ClusterId(1)));
        assert_eq!(g, build_initial_cluster_graph(&fixtures::binary_net("AB", &[("A", "B")])));
    }

    #[test]
    fn dot_export() {
        let empty = ClusterGraph::empty(BeliefNetwork::new());
        assert_eq!(export_dot(&empty), "graph clusters {\n  node [shape=box];\n}\n");
        let g = build_initial_cluster_graph(&fixtures::chain3());
        let dot = export_dot(&g);
        assert_eq!(dot.matches("[label=").count(), 5);
        assert_eq!(dot.matches(" -- ").count(), 2);
        assert!(dot.contains("c1 [label=\"c1: A* B*\"]"));
        assert_eq!(dot, export_dot(&g.clone()));
    }

    #[test]
    fn trace_round_trips_and_replays() {
        let start = build_initial_cluster_graph(&fixtures::diamond());
        let mut g = start.clone();
        run_preset(&mut g, &PresetName::E.preset(), 0).unwrap();
        let text = trace_to_string(g.trace());
        assert_eq!(text.lines().count(), g.trace().len());
        let events = read_trace(text.as_bytes()).unwrap();
        assert_eq!(events, g.trace());
        assert_eq!(trace::replay(start, &events).unwrap(), g);
    }

    #[test]
    fn bad_trace_line_is_reported() {
        let err = read_trace("\n{\"seq\":0}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }), "{err:?}");
    }
}
