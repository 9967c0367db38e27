//! Hand-built networks and cluster graphs for tests, examples and the CLI.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{Cluster, ClusterGraph, ClusterId};
use crate::network::{BeliefNetwork, VarSet};

pub use crate::network::fixtures::{chain3, diamond, poly4};

/// Builds a cluster graph by hand. Member and family strings list variables
/// by single-character name (`"ABC"`). Cluster `i` gets id `i`; each family is
/// housed in the first cluster whose family annotation contains it.
pub fn sketch(
    net: &BeliefNetwork,
    clusters: &[(&str, &str)],
    edges: &[(u32, u32, &str)],
) -> Result<ClusterGraph> {
    let vars = |s: &str| -> Result<VarSet> {
        s.chars()
            .map(|ch| {
                let name = ch.to_string();
                net.lookup(&name).ok_or(Error::UnknownVariable(name))
            })
            .collect()
    };
    let mut built = Vec::new();
    for (i, (members, fam)) in clusters.iter().enumerate() {
        built.push(Cluster { id: ClusterId(i as u32), members: vars(members)?, family_vars: vars(fam)? });
    }
    let mut homes = BTreeMap::new();
    for v in net.ids() {
        let fam = net.family(v);
        if let Some(c) = built.iter().find(|c| fam.is_subset(&c.family_vars)) {
            homes.insert(v, c.id);
        }
    }
    let edges = edges
        .iter()
        .map(|&(a, b, s)| Ok((ClusterId(a), ClusterId(b), vars(s)?)))
        .collect::<Result<Vec<_>>>()?;
    ClusterGraph::from_parts(net.clone(), built, edges, homes, None)
}

/// Binary variables with the given single-character names and arcs.
pub fn binary_net(names: &str, arcs: &[(&str, &str)]) -> BeliefNetwork {
    let vars: Vec<(String, u32)> = names.chars().map(|c| (c.to_string(), 2)).collect();
    let vars: Vec<(&str, u32)> = vars.iter().map(|(n, c)| (n.as_str(), *c)).collect();
    BeliefNetwork::from_parts(&vars, arcs).expect("valid fixture network")
}

/// Renders a variable set as concatenated names, e.g. `"ABC"`.
pub fn names(g: &ClusterGraph, vars: &VarSet) -> String {
    vars.iter().map(|v| g.network().name(*v)).collect::<Vec<_>>().concat()
}

/// Variable set from single-character names.
pub fn var_set(g: &ClusterGraph, s: &str) -> VarSet {
    s.chars().map(|c| g.network().lookup(&c.to_string()).expect("known variable")).collect()
}
