mod common;

use jtree::io::{serialize_graph, NetworkFile};
use jtree::session::{Response, Session};
use jtree::util::{derive_seed, rng, Rng as ChaCha};
use jtree::verify::{check_cluster_graph, check_junction_tree};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

const GARBAGE: [&str; 8] = [
    "",
    "not json",
    "[1,2,3]",
    r#"{"verb":"fly"}"#,
    r#"{"verb":"apply"}"#,
    r#"{"verb":"cost","extra":1}"#,
    r#"{"verb":"apply","op":{"kind":"merge","p":"x","q":1}}"#,
    r#"{"verb":"edit","edit":{"kind":"add_arc","parent":"nope","child":"X0"}}"#,
];

fn names(s: &Session) -> Vec<String> {
    s.graph().network().variables().map(|v| v.name.clone()).collect()
}

/// A request that may or may not be legal in the current state.
fn request(s: &mut Session, r: &mut ChaCha, k: usize) -> String {
    let vars = names(s);
    let var = || vars.choose(&mut rng(k as u64)).cloned().unwrap_or_else(|| "X0".into());
    let cluster = s.graph().cluster_ids().choose(r).map(|c| c.0).unwrap_or(0);
    let body = match r.random_range(0..14) {
        0 => return GARBAGE.choose(r).unwrap().to_string(),
        1 | 2 => {
            let cands = s.handle_line(r#"{"verb":"applicable"}"#);
            let list = cands.result.as_ref().map(|v| v["candidates"].as_array().cloned().unwrap_or_default());
            match list.unwrap_or_default().choose(r) {
                Some(c) => json!({"verb": "apply", "op": c["op"]}),
                None => json!({"verb": "cost"}),
            }
        }
        3 => json!({"verb": "apply", "op": {"kind": "merge", "p": cluster, "q": cluster + r.random_range(0..3)}}),
        4 => json!({"verb": "apply", "op": {"kind": "slide", "p": cluster, "q": r.random_range(0..20), "via": r.random_range(0..20)}}),
        5 => json!({"verb": "edit", "edit": {"kind": "add_variable", "name": format!("N{k}"), "cardinality": r.random_range(0..4)}}),
        6 | 7 => {
            let a = vars.choose(r).cloned().unwrap_or_default();
            let b = vars.choose(r).cloned().unwrap_or_default();
            json!({"verb": "edit", "edit": {"kind": "add_arc", "parent": a, "child": b}})
        }
        8 => {
            let arcs = s.graph().network().arcs();
            match arcs.choose(r) {
                Some(&(p, c)) => {
                    let net = s.graph().network();
                    json!({"verb": "edit", "edit": {"kind": "delete_arc", "parent": net.name(p), "child": net.name(c)}})
                }
                None => json!({"verb": "edit", "edit": {"kind": "delete_arc", "parent": "A", "child": "B"}}),
            }
        }
        9 => json!({"verb": "edit", "edit": {"kind": "delete_variable", "var": var()}}),
        10 => json!({"verb": "edit", "edit": {"kind": "retract_variable", "cluster": cluster, "var": var()}}),
        11 => json!({"verb": "restore"}),
        12 => json!({"verb": "undo"}),
        _ => {
            let verb = ["check", "state", "cost", "run-preset"].choose(r).unwrap();
            json!({"verb": verb, "preset": "E"})
        }
    };
    let mut body = body;
    body["id"] = json!(k);
    body.to_string()
}

fn load(s: &mut Session, n: usize, arcs: usize, seed: u64) {
    let net = common::network(n, arcs, 3, seed);
    let file = serde_json::to_value(NetworkFile::from_network(&net)).unwrap();
    let resp = s.handle_line(&json!({"verb": "load", "network": file, "seed": seed}).to_string());
    assert!(resp.ok, "{resp:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interleaved_requests_keep_the_graph_sound(n in 2usize..8, arcs in 0usize..12, seed in any::<u64>()) {
        let mut s = Session::default();
        load(&mut s, n, arcs, seed);
        let mut r = rng(derive_seed(seed, 1));
        let mut outcomes = [0usize; 2];
        for k in 0..60 {
            let line = request(&mut s, &mut r, k);
            let before = serialize_graph(s.graph());
            let resp: Response = s.handle_line(&line);
            outcomes[resp.ok as usize] += 1;
            let report = check_cluster_graph(s.graph());
            prop_assert!(report.pass, "{:?} after {}", report.witnesses, line);
            if resp.ok {
                let verb = serde_json::from_str::<Value>(&line).unwrap()["verb"].clone();
                if verb == "restore" {
                    prop_assert!(check_junction_tree(s.graph()).pass);
                }
            } else {
                let err = resp.error.as_ref().unwrap();
                prop_assert!(
                    ["malformed", "precondition", "contract", "syntax", "not_found", "invalid"].contains(&err.kind.as_str()),
                    "{:?}", err
                );
                prop_assert_eq!(serialize_graph(s.graph()), before, "failed request changed the graph: {}", line);
            }
        }
        prop_assert!(outcomes[0] > 0 && outcomes[1] > 0, "{:?}", outcomes);
    }

    #[test]
    fn undo_walks_back_through_every_success(n in 2usize..7, arcs in 0usize..10, seed in any::<u64>()) {
        let mut s = Session::default();
        load(&mut s, n, arcs, seed);
        let mut r = rng(derive_seed(seed, 2));
        let mut states = vec![serialize_graph(s.graph())];
        for k in 0..40 {
            let line = request(&mut s, &mut r, k);
            let verb = serde_json::from_str::<Value>(&line).ok().map(|v| v["verb"].clone());
            if verb == Some(json!("undo")) {
                continue;
            }
            let resp = s.handle_line(&line);
            let now = serialize_graph(s.graph());
            if resp.ok && now != *states.last().unwrap() {
                states.push(now);
            }
        }
        while states.len() > 1 {
            let resp = s.handle_line(r#"{"verb":"undo"}"#);
            prop_assert!(resp.ok, "{:?}", resp);
            let now = serialize_graph(s.graph());
            if now != *states.last().unwrap() {
                states.pop();
                prop_assert_eq!(&now, states.last().unwrap());
            }
        }
    }
}
