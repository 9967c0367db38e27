//! Newline-delimited JSON request/response protocol over one [`EditSession`].
//!
//! A request is an object with an `id` (echoed back), a `verb` and the verb's
//! fields:
//!
//! ```text
//! {"id":1,"verb":"load","fixture":"diamond"}
//! {"id":2,"verb":"applicable"}
//! {"id":3,"verb":"apply","op":{"kind":"slide","p":1,"q":0,"via":2}}
//! {"id":4,"verb":"undo"}
//! ```
//!
//! Every response carries `protocol`, `id` and `ok`, then either `result` or
//! `error`. Costs are decimal strings so clients without big integers read
//! them exactly. A failed request leaves the session untouched.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algorithms::{run_preset, PresetName};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::graph::{ClusterGraph, ClusterId};
use crate::incremental::{EditSession, RetractPolicy, RetractShape};
use crate::io::{ClusterEntry, EdgeEntry, GraphFile, NetworkFile};
use crate::network::{Cost, VarId, VarSet};
use crate::trace::{self, Operation, TraceEvent};
use crate::util::{self, Rng};
use crate::verify;

pub const PROTOCOL_VERSION: u32 = 1;

/// Undo replays from the latest snapshot; one is kept per this many events.
pub const SNAPSHOT_EVERY: usize = 64;

pub const VERBS: [&str; 11] =
    ["hello", "load", "state", "applicable", "apply", "run-preset", "edit", "restore", "undo", "cost", "check"];

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "verb", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Hello {},
    Load {
        network: Option<NetworkFile>,
        graph: Option<GraphFile>,
        fixture: Option<String>,
        preset: Option<PresetName>,
        seed: Option<u64>,
    },
    State {},
    Applicable {},
    Apply {
        op: Operation,
    },
    RunPreset {
        preset: PresetName,
        #[serde(default)]
        seed: u64,
    },
    Edit {
        edit: Edit,
    },
    Restore {},
    Undo {},
    Cost {},
    Check {},
}

/// Edits name variables rather than numbering them.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    AddVariable {
        name: String,
        cardinality: u32,
    },
    AddArc {
        parent: String,
        child: String,
    },
    DeleteArc {
        parent: String,
        child: String,
        #[serde(default)]
        policy: RetractPolicy,
    },
    RetractVariable {
        cluster: ClusterId,
        var: String,
        #[serde(default)]
        shape: RetractShape,
    },
    DeleteVariable {
        var: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub protocol: u32,
    pub id: Value,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Response {
    fn success(id: Value, result: Value) -> Self {
        Self { protocol: PROTOCOL_VERSION, id, ok: true, result: Some(result), error: None }
    }

    fn failure(id: Value, kind: &str, message: String) -> Self {
        Self {
            protocol: PROTOCOL_VERSION,
            id,
            ok: false,
            result: None,
            error: Some(ErrorBody { kind: kind.into(), message }),
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Field { source, .. } => error_kind(source),
        Error::Precondition(_) => "precondition",
        Error::Contract(_) => "contract",
        Error::Syntax { .. } => "syntax",
        Error::UnknownVariable(_) | Error::UnknownCluster(_) | Error::MissingEdge(..) | Error::MissingArc { .. } => {
            "not_found"
        }
        _ => "invalid",
    }
}

pub fn cost_string(c: Cost) -> String {
    c.to_string()
}

/// Cluster and edge changes between two graphs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDelta {
    pub added_clusters: Vec<ClusterEntry>,
    pub changed_clusters: Vec<ClusterEntry>,
    pub removed_clusters: Vec<ClusterId>,
    pub added_edges: Vec<EdgeEntry>,
    pub changed_edges: Vec<EdgeEntry>,
    pub removed_edges: Vec<(ClusterId, ClusterId)>,
    pub network_changed: bool,
}

impl GraphDelta {
    pub fn between(before: &ClusterGraph, after: &ClusterGraph) -> Self {
        let net = after.network();
        let names = |s: &VarSet| s.iter().map(|&v| net.name(v).to_string()).collect::<Vec<_>>();
        let entry = |id: ClusterId| {
            let c = after.cluster(id).expect("present");
            ClusterEntry { id: id.0, members: names(&c.members), family: names(&c.family_vars) }
        };
        let mut d = GraphDelta { network_changed: before.network() != after.network(), ..Default::default() };
        for c in after.clusters() {
            match before.cluster(c.id) {
                None => d.added_clusters.push(entry(c.id)),
                Some(old) if old != c => d.changed_clusters.push(entry(c.id)),
                _ => {}
            }
        }
        d.removed_clusters = before.cluster_ids().into_iter().filter(|&c| !after.contains_cluster(c)).collect();
        let old: BTreeMap<(ClusterId, ClusterId), &VarSet> = before.edges().map(|(a, b, s)| ((a, b), s)).collect();
        let new: BTreeMap<(ClusterId, ClusterId), &VarSet> = after.edges().map(|(a, b, s)| ((a, b), s)).collect();
        for (&(a, b), &sep) in &new {
            let e = EdgeEntry { a: a.0, b: b.0, separator: names(sep) };
            match old.get(&(a, b)) {
                None => d.added_edges.push(e),
                Some(&s) if s != sep => d.changed_edges.push(e),
                _ => {}
            }
        }
        d.removed_edges = old.keys().filter(|k| !new.contains_key(k)).copied().collect();
        d
    }

    /// Added or changed clusters and the endpoints of added or changed edges.
    pub fn touched(&self) -> impl Iterator<Item = ClusterId> + '_ {
        let clusters = self.added_clusters.iter().chain(&self.changed_clusters).map(|c| ClusterId(c.id));
        let ends = self.added_edges.iter().chain(&self.changed_edges).flat_map(|e| [ClusterId(e.a), ClusterId(e.b)]);
        clusters.chain(ends)
    }
}

/// A legal transformation with the cost change it would cause.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub op: Operation,
    pub cost_delta: String,
}

fn candidate_ops(g: &ClusterGraph) -> Vec<Operation> {
    let mut ops = Vec::new();
    let ids = g.cluster_ids();
    for (a, b, _) in g.edges() {
        ops.push(Operation::Merge { p: a, q: b });
        for (p, q) in [(a, b), (b, a)] {
            for via in g.neighbors(q).filter(|&v| v != p && !g.has_edge(v, p)) {
                ops.push(Operation::Slide { p, q, via });
            }
        }
        for &via in ids.iter().filter(|&&v| v != a && v != b && !g.has_edge(v, a) && !g.has_edge(v, b)) {
            ops.push(Operation::StealAnEdge { p: a, q: b, via });
        }
        for via in g.neighbors(a).filter(|&v| v != b && g.has_edge(v, b)) {
            ops.push(Operation::Drop { p: a, q: b, via });
        }
    }
    let all = g.cluster_ids();
    for var in g.network().ids() {
        ops.push(Operation::Eliminate { var, scope: all.clone() });
    }
    ops.push(Operation::DropSpurious { seeds: None });
    ops.push(Operation::NormalizeSeparators);
    ops
}

/// Every transformation that applies at `g` and changes it, with its exact
/// cost delta. Candidates are evaluated on forks, in parallel when enabled.
pub fn applicable(g: &ClusterGraph) -> Vec<Candidate> {
    let base = g.fork();
    let before = g.cost() as i128;
    util::par_map(&candidate_ops(g), |op| {
        let mut f = base.fork();
        trace::apply_operation(&mut f, op).ok()?;
        (f != base).then(|| Candidate { op: op.clone(), cost_delta: (f.cost() as i128 - before).to_string() })
    })
    .into_iter()
    .flatten()
    .collect()
}

#[derive(Clone, Debug)]
struct Mark {
    trace_len: usize,
    dirty: BTreeSet<ClusterId>,
    rng: Rng,
    preset: PresetName,
}

/// Protocol state: one edit session plus its undo history.
#[derive(Clone, Debug)]
pub struct Session {
    edit: EditSession,
    history: Vec<Mark>,
    snapshots: Vec<ClusterGraph>,
}

impl Default for Session {
    fn default() -> Self {
        Self::new(EditSession::empty(PresetName::IE, 0))
    }
}

impl Session {
    pub fn new(edit: EditSession) -> Self {
        let snapshots = vec![edit.graph().clone()];
        Self { edit, history: Vec::new(), snapshots }
    }

    pub fn graph(&self) -> &ClusterGraph {
        self.edit.graph()
    }

    /// Parses and answers one request line. Never fails: malformed input
    /// becomes an error response.
    pub fn handle_line(&mut self, line: &str) -> Response {
        let mut value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return Response::failure(Value::Null, "malformed", e.to_string()),
        };
        let Some(obj) = value.as_object_mut() else {
            return Response::failure(Value::Null, "malformed", "request must be a JSON object".into());
        };
        let id = obj.remove("id").unwrap_or(Value::Null);
        match serde_json::from_value::<Command>(value) {
            Ok(cmd) => self.handle(id, cmd),
            Err(e) => Response::failure(id, "malformed", e.to_string()),
        }
    }

    pub fn handle(&mut self, id: Value, cmd: Command) -> Response {
        match self.dispatch(cmd) {
            Ok(v) => Response::success(id, v),
            Err(e) => Response::failure(id, error_kind(&e), e.to_string()),
        }
    }

    fn dispatch(&mut self, cmd: Command) -> Result<Value> {
        match cmd {
            Command::Hello {} => Ok(json!({ "protocol": PROTOCOL_VERSION, "verbs": VERBS })),
            Command::Load { network, graph, fixture, preset, seed } => {
                let g = match (network, graph, fixture) {
                    (None, None, None) => ClusterGraph::empty(Default::default()),
                    (Some(n), None, None) => ClusterGraph::from_network(n.to_network()?),
                    (None, Some(g), None) => g.to_graph()?,
                    (None, None, Some(name)) => ClusterGraph::from_network(fixture_network(&name)?),
                    _ => return Err(Error::pre("load takes at most one of network, graph and fixture")),
                };
                *self = Session::new(EditSession::new(g, preset.unwrap_or(PresetName::IE), seed.unwrap_or(0)));
                Ok(self.state())
            }
            Command::State {} => Ok(self.state()),
            Command::Applicable {} => {
                let cands = applicable(self.graph());
                Ok(json!({ "cost": cost_string(self.graph().cost()), "candidates": cands }))
            }
            Command::Apply { op } => self.mutate(|s| {
                trace::apply_operation(s.graph_mut(), &op)?;
                Ok(Value::Null)
            }),
            Command::RunPreset { preset, seed } => self.mutate(|s| {
                let report = run_preset(s.graph_mut(), &preset.preset(), seed)?;
                Ok(json!({ "report": serde_json::to_value(report)? }))
            }),
            Command::Edit { edit } => self.mutate(|s| apply_edit(s, edit).map(|_| Value::Null)),
            Command::Restore {} => self.mutate(|s| Ok(json!({ "report": serde_json::to_value(s.restore()?)? }))),
            Command::Undo {} => self.undo(),
            Command::Cost {} => {
                let g = self.graph();
                Ok(json!({ "cost": cost_string(g.cost()), "clusters": g.cluster_count(), "edges": g.edge_count() }))
            }
            Command::Check {} => {
                let g = self.graph();
                Ok(json!({ "reports": [
                    verify::check_family_property(g),
                    verify::check_path_property(g),
                    verify::check_separator_subsets(g),
                    verify::check_junction_tree(g),
                    verify::check_chordal_embedding(g),
                ] }))
            }
        }
    }

    fn state(&self) -> Value {
        let g = self.graph();
        json!({
            "graph": GraphFile::from_graph(g),
            "cost": cost_string(g.cost()),
            "forest": g.is_forest(),
            "dirty": self.edit.dirty(),
            "trace_len": g.trace().len(),
            "preset": self.edit.preset().name,
            "undo_depth": self.history.len(),
        })
    }

    /// Runs `f` on a copy; the copy replaces the session only on success.
    /// The response lists the new trace events, the graph delta and the
    /// resulting cost.
    fn mutate(&mut self, f: impl FnOnce(&mut EditSession) -> Result<Value>) -> Result<Value> {
        let mut trial = self.edit.clone();
        let extra = f(&mut trial)?;
        let before = self.graph();
        let start = before.trace().len();
        let events: Vec<TraceEvent> = trial.graph().trace()[start..].to_vec();
        let delta = GraphDelta::between(before, trial.graph());
        let edits = events.iter().any(|e| e.op.transform_kind().is_none() && e.op != Operation::NormalizeSeparators);
        // a hand-applied transform can close a cycle; restore must see it
        if edits || !trial.graph().is_forest() {
            trial.mark_dirty(delta.touched().collect::<Vec<_>>());
        }
        let after = trial.graph().cost();
        let cost_delta = after as i128 - before.cost() as i128;
        let mut out = json!({
            "events": serde_json::to_value(&events)?,
            "delta": delta,
            "cost": cost_string(after),
            "cost_delta": cost_delta.to_string(),
        });
        if let Some(e) = events.last() {
            out["event"] = serde_json::to_value(e)?;
        }
        if let Value::Object(m) = extra {
            out.as_object_mut().expect("object").extend(m);
        }
        self.history.push(Mark {
            trace_len: start,
            dirty: self.edit.dirty().clone(),
            rng: self.edit.rng().clone(),
            preset: self.edit.preset().name,
        });
        self.edit = trial;
        let last = self.snapshots.last().map_or(0, |s| s.trace().len());
        if self.graph().trace().len() >= last + SNAPSHOT_EVERY {
            self.snapshots.push(self.graph().clone());
        }
        Ok(out)
    }

    fn undo(&mut self) -> Result<Value> {
        let mark = self.history.pop().ok_or_else(|| Error::pre("nothing to undo"))?;
        while self.snapshots.len() > 1 && self.snapshots.last().unwrap().trace().len() > mark.trace_len {
            self.snapshots.pop();
        }
        let base = self.snapshots.last().expect("initial snapshot").clone();
        let from = base.trace().len();
        let events = self.graph().trace()[from..mark.trace_len].to_vec();
        let graph = trace::replay(base, &events)?;
        let delta = GraphDelta::between(self.graph(), &graph);
        let mut edit = EditSession::new(graph, mark.preset, 0);
        *edit.rng_mut() = mark.rng;
        edit.replace_dirty(mark.dirty);
        self.edit = edit;
        Ok(json!({
            "delta": delta,
            "cost": cost_string(self.graph().cost()),
            "trace_len": self.graph().trace().len(),
            "undo_depth": self.history.len(),
        }))
    }
}

fn fixture_network(name: &str) -> Result<crate::network::BeliefNetwork> {
    match name.to_ascii_lowercase().as_str() {
        "chain3" => Ok(fixtures::chain3()),
        "poly4" => Ok(fixtures::poly4()),
        "diamond" => Ok(fixtures::diamond()),
        _ => Err(Error::InvalidSpec(format!("unknown fixture `{name}` (chain3, poly4, diamond)"))),
    }
}

fn var(s: &EditSession, name: &str) -> Result<VarId> {
    s.network().lookup(name).ok_or_else(|| Error::UnknownVariable(name.into()))
}

fn apply_edit(s: &mut EditSession, edit: Edit) -> Result<()> {
    match edit {
        Edit::AddVariable { name, cardinality } => s.add_variable(&name, cardinality).map(drop),
        Edit::AddArc { parent, child } => {
            let (p, c) = (var(s, &parent)?, var(s, &child)?);
            s.add_arc(p, c)
        }
        Edit::DeleteArc { parent, child, policy } => {
            let (p, c) = (var(s, &parent)?, var(s, &child)?);
            s.policy = policy;
            s.delete_arc(p, c)
        }
        Edit::RetractVariable { cluster, var: name, shape } => {
            let v = var(s, &name)?;
            s.shape = shape;
            s.retract_variable(cluster, v)
        }
        Edit::DeleteVariable { var: name } => {
            let v = var(s, &name)?;
            s.delete_variable(v)
        }
    }
}

/// Serves one session over a reader/writer pair until end of input.
pub fn serve(input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    let mut session = Session::default();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = session.handle_line(&line);
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

/// Accepts connections forever, one thread and one session per connection.
pub fn serve_listener(listener: TcpListener) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        std::thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(_) => return,
            };
            let _ = serve(reader, stream);
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn send(s: &mut Session, line: &str) -> Response {
        let r = s.handle_line(line);
        assert_eq!(r.protocol, PROTOCOL_VERSION);
        r
    }

    fn ok(s: &mut Session, line: &str) -> Value {
        let r = send(s, line);
        assert!(r.ok, "{line} -> {:?}", r.error);
        r.result.unwrap()
    }

    fn cost(s: &mut Session) -> String {
        ok(s, r#"{"verb":"cost"}"#)["cost"].as_str().unwrap().to_string()
    }

    #[test]
    fn hello_and_ids() {
        let mut s = Session::default();
        let r = send(&mut s, r#"{"id":"x","verb":"hello"}"#);
        assert_eq!(r.id, json!("x"));
        assert_eq!(r.result.unwrap()["protocol"], json!(PROTOCOL_VERSION));
    }

    #[test]
    fn malformed_requests_keep_the_session() {
        let mut s = Session::default();
        ok(&mut s, r#"{"verb":"load","fixture":"diamond"}"#);
        for bad in ["nope", "[1]", r#"{"id":3}"#, r#"{"id":4,"verb":"fly"}"#, r#"{"verb":"cost","x":1}"#] {
            let r = send(&mut s, bad);
            assert!(!r.ok);
            assert_eq!(r.error.unwrap().kind, "malformed");
        }
        assert_eq!(send(&mut s, r#"{"id":4,"verb":"fly"}"#).id, json!(4));
        assert_eq!(cost(&mut s), "18");
    }

    #[test]
    fn applicable_on_diamond() {
        let mut s = Session::default();
        ok(&mut s, r#"{"verb":"load","fixture":"diamond"}"#);
        let r = ok(&mut s, r#"{"verb":"applicable"}"#);
        let cands: Vec<Candidate> = serde_json::from_value(r["candidates"].clone()).unwrap();
        let kinds: BTreeSet<&str> = cands.iter().map(|c| c.op.name()).collect();
        // a 4-cycle has no triangle and no cluster away from both ends of an edge
        assert_eq!(kinds, BTreeSet::from(["merge", "slide", "eliminate"]));
        // every candidate's predicted delta matches applying it
        for c in &cands {
            let mut t = s.clone();
            let line = json!({"verb": "apply", "op": c.op}).to_string();
            let res = ok(&mut t, &line);
            assert_eq!(res["cost_delta"].as_str().unwrap(), c.cost_delta, "{:?}", c.op);
        }
    }

    #[test]
    fn restore_repairs_cycles_closed_by_hand() {
        let mut s = Session::default();
        let chain = r#"{"verb":"load","preset":"IE","network":{"version":1,
            "variables":[{"id":"A","cardinality":2},{"id":"B","cardinality":2},
                         {"id":"C","cardinality":2},{"id":"D","cardinality":2}],
            "arcs":[["A","B"],["B","C"],["C","D"]]}}"#;
        let state = ok(&mut s, &chain.replace('\n', " "));
        assert_eq!(state["forest"], true);
        assert!(s.edit.dirty().is_empty());
        // the path c0-c1-c2-c3 becomes a triangle c1-c2-c3 plus c0-c3
        ok(&mut s, r#"{"verb":"apply","op":{"kind":"steal_an_edge","p":0,"q":1,"via":3}}"#);
        assert!(!s.graph().is_forest());
        assert!(!s.edit.dirty().is_empty());
        ok(&mut s, r#"{"verb":"restore"}"#);
        assert!(verify::check_junction_tree(s.graph()).pass);
    }

    #[test]
    fn drops_and_steals_appear_when_legal() {
        let mut s = Session::default();
        ok(&mut s, r#"{"verb":"load","fixture":"diamond"}"#);
        ok(&mut s, r#"{"verb":"apply","op":{"kind":"slide","p":1,"q":0,"via":2}}"#);
        let r = ok(&mut s, r#"{"verb":"applicable"}"#);
        let cands: Vec<Candidate> = serde_json::from_value(r["candidates"].clone()).unwrap();
        assert!(cands.iter().any(|c| c.op == Operation::Drop { p: ClusterId(1), q: ClusterId(2), via: ClusterId(3) }));

        // a 5-cycle has clusters away from both ends of each edge
        let five = crate::fixtures::binary_net("ABCDE", &[("A", "B"), ("B", "C"), ("C", "D"), ("D", "E"), ("A", "E")]);
        let graph = GraphFile::from_graph(&ClusterGraph::from_network(five));
        ok(&mut s, &json!({"verb":"load","graph":graph}).to_string());
        let r = ok(&mut s, r#"{"verb":"applicable"}"#);
        let cands: Vec<Candidate> = serde_json::from_value(r["candidates"].clone()).unwrap();
        assert!(cands.iter().any(|c| c.op.name() == "steal_an_edge"));
    }

    #[test]
    fn slide_then_drop_gives_the_hub_tree() {
        let mut s = Session::default();
        ok(&mut s, r#"{"verb":"load","fixture":"diamond"}"#);
        let start = s.graph().clone();
        let r = ok(&mut s, r#"{"id":1,"verb":"apply","op":{"kind":"slide","p":1,"q":0,"via":2}}"#);
        assert_eq!(r["event"]["op"]["kind"], json!("slide"));
        assert_eq!(r["cost"], json!("18"));
        let after_slide = s.graph().clone();
        let r = ok(&mut s, r#"{"id":2,"verb":"apply","op":{"kind":"drop","p":1,"q":2,"via":3}}"#);
        assert_eq!(r["cost"], json!("26"));
        assert_eq!(r["cost_delta"], json!("8"));
        assert!(!r["delta"]["removed_edges"].as_array().unwrap().is_empty());
        assert!(s.graph().is_forest());
        ok(&mut s, r#"{"verb":"undo"}"#);
        assert_eq!(s.graph(), &after_slide);
        ok(&mut s, r#"{"verb":"undo"}"#);
        assert_eq!(s.graph(), &start);
        assert_eq!(cost(&mut s), "18");
        assert_eq!(send(&mut s, r#"{"verb":"undo"}"#).error.unwrap().kind, "precondition");
    }

    #[test]
    fn illegal_drop_is_a_precondition_error() {
        let mut s = Session::default();
        ok(&mut s, r#"{"verb":"load","fixture":"diamond"}"#);
        let before = s.graph().clone();
        let r = send(&mut s, r#"{"verb":"apply","op":{"kind":"drop","p":0,"q":1,"via":3}}"#);
        assert!(!r.ok);
        assert_eq!(r.error.unwrap().kind, "precondition");
        assert_eq!(s.graph(), &before);
    }

    #[test]
    fn edits_restore_and_undo() {
        let mut s = Session::default();
        ok(&mut s, r#"{"verb":"load","preset":"IE"}"#);
        for n in ["A", "B", "C", "D"] {
            ok(&mut s, &json!({"verb":"edit","edit":{"kind":"add_variable","name":n,"cardinality":2}}).to_string());
        }
        for (p, c) in [("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")] {
            ok(&mut s, &json!({"verb":"edit","edit":{"kind":"add_arc","parent":p,"child":c}}).to_string());
        }
        let st = ok(&mut s, r#"{"verb":"state"}"#);
        assert_eq!(st["forest"], json!(false));
        assert!(!st["dirty"].as_array().unwrap().is_empty());
        let r = ok(&mut s, r#"{"verb":"restore"}"#);
        assert_eq!(r["cost"], json!("16"));
        assert_eq!(r["report"]["invocations"], json!(1));
        let checks = ok(&mut s, r#"{"verb":"check"}"#);
        assert!(checks["reports"].as_array().unwrap().iter().all(|r| r["pass"] == json!(true)));
        ok(&mut s, r#"{"verb":"undo"}"#);
        let st = ok(&mut s, r#"{"verb":"state"}"#);
        assert_eq!(st["forest"], json!(false));
        // restoring again after undo reproduces the same tree
        let again = ok(&mut s, r#"{"verb":"restore"}"#);
        assert_eq!(again["events"], r["events"]);
        let bad = send(&mut s, r#"{"verb":"edit","edit":{"kind":"add_arc","parent":"D","child":"A"}}"#);
        assert_eq!(bad.error.unwrap().kind, "invalid");
        let bad = send(&mut s, r#"{"verb":"edit","edit":{"kind":"add_arc","parent":"Q","child":"A"}}"#);
        assert_eq!(bad.error.unwrap().kind, "not_found");
    }

    #[test]
    fn run_preset_streams_its_trace() {
        let mut s = Session::default();
        ok(&mut s, r#"{"verb":"load","fixture":"diamond"}"#);
        let r = ok(&mut s, r#"{"verb":"run-preset","preset":"E","seed":3}"#);
        assert_eq!(r["cost"], json!("16"));
        let events: Vec<TraceEvent> = serde_json::from_value(r["events"].clone()).unwrap();
        assert_eq!(events.len(), s.graph().trace().len());
        assert_eq!(r["report"]["cost"], json!(16));
    }

    #[test]
    fn undo_across_snapshots() {
        let mut s = Session::default();
        ok(&mut s, r#"{"verb":"load","preset":"IE"}"#);
        let mut states = vec![s.graph().clone()];
        for i in 0..150 {
            ok(&mut s, &json!({"verb":"edit","edit":{"kind":"add_variable","name":format!("V{i}"),"cardinality":2}}).to_string());
            states.push(s.graph().clone());
        }
        assert!(s.snapshots.len() >= 3);
        while let Some(expect) = states.pop() {
            assert_eq!(s.graph(), &expect);
            if states.is_empty() {
                break;
            }
            ok(&mut s, r#"{"verb":"undo"}"#);
        }
    }

    #[test]
    fn load_variants() {
        let mut s = Session::default();
        let net = serde_json::to_value(NetworkFile::from_network(&fixtures::chain3())).unwrap();
        let r = ok(&mut s, &json!({"verb":"load","network":net}).to_string());
        assert_eq!(r["cost"], json!("10"));
        let graph = serde_json::to_value(GraphFile::from_graph(s.graph())).unwrap();
        let r = ok(&mut s, &json!({"verb":"load","graph":graph}).to_string());
        assert_eq!(r["graph"]["clusters"].as_array().unwrap().len(), 3);
        assert!(!send(&mut s, r#"{"verb":"load","fixture":"nope"}"#).ok);
        assert!(!send(&mut s, &json!({"verb":"load","fixture":"diamond","network":net}).to_string()).ok);
    }

    #[test]
    fn serve_over_streams() {
        let input = "{\"id\":1,\"verb\":\"load\",\"fixture\":\"chain3\"}\n\n{\"id\":2,\"verb\":\"cost\"}\n";
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out).unwrap();
        let lines: Vec<Response> =
            String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].result.as_ref().unwrap()["cost"], json!("10"));
    }

    #[test]
    fn serve_over_tcp() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || serve_listener(listener));
        let conn = |fixture: &str| {
            let mut stream = std::net::TcpStream::connect(addr).unwrap();
            writeln!(stream, "{}", json!({"verb":"load","fixture":fixture})).unwrap();
            writeln!(stream, "{}", json!({"verb":"cost"})).unwrap();
            let mut lines = BufReader::new(stream).lines();
            lines.next().unwrap().unwrap();
            let r: Response = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
            r.result.unwrap()["cost"].as_str().unwrap().to_string()
        };
        assert_eq!(conn("diamond"), "18");
        assert_eq!(conn("chain3"), "10");
    }
}
