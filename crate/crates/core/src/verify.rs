//! Property checkers and independent oracles.
//!
//! Nothing here calls into the transformation engine. The elimination
//! oracles work directly on a moralized adjacency bitmask so that they can
//! cross-check the engine's results.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClusterGraph, ClusterId};
use crate::network::{BeliefNetwork, Cost, VarId, VarSet};
use crate::transforms;
use crate::util::UnionFind;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub property: String,
    pub pass: bool,
    /// Offending variables, clusters or edges, one description each.
    pub witnesses: Vec<String>,
}

impl CheckReport {
    fn new(property: &str, witnesses: Vec<String>) -> Self {
        Self { property: property.into(), pass: witnesses.is_empty(), witnesses }
    }

    fn merge(property: &str, parts: impl IntoIterator<Item = CheckReport>) -> Self {
        let witnesses = parts
            .into_iter()
            .flat_map(|r| r.witnesses.into_iter().map(move |w| format!("{}: {w}", r.property)))
            .collect();
        Self::new(property, witnesses)
    }
}

fn var_list(g: &ClusterGraph, vars: &VarSet) -> String {
    let names: Vec<_> = vars.iter().map(|v| g.network().name(*v)).collect();
    format!("{{{}}}", names.join(","))
}

fn cluster_list(ids: &BTreeSet<ClusterId>) -> String {
    let names: Vec<_> = ids.iter().map(|c| c.to_string()).collect();
    format!("{{{}}}", names.join(","))
}

/// Every family sits, annotated, inside the cluster assigned to house it.
pub fn check_family_property(g: &ClusterGraph) -> CheckReport {
    let net = g.network();
    let mut witnesses = Vec::new();
    for v in net.ids() {
        let fam = net.family(v);
        match g.home_of(v).and_then(|c| g.cluster(c)) {
            None => witnesses.push(format!("family of {} is not housed", net.name(v))),
            Some(c) => {
                if !fam.is_subset(&c.members) {
                    let missing: VarSet = fam.difference(&c.members).copied().collect();
                    witnesses.push(format!(
                        "family of {} lacks {} in {}",
                        net.name(v),
                        var_list(g, &missing),
                        c.id
                    ));
                } else if !fam.is_subset(&c.family_vars) {
                    witnesses.push(format!("family of {} not annotated in {}", net.name(v), c.id));
                }
            }
        }
    }
    for c in g.clusters() {
        if !c.family_vars.is_subset(&c.members) {
            witnesses.push(format!("{} annotates variables it does not contain", c.id));
        }
    }
    CheckReport::new("family", witnesses)
}

/// For each variable, the clusters containing it are connected by edges
/// carrying it.
pub fn check_path_property(g: &ClusterGraph) -> CheckReport {
    let mut holders: BTreeMap<VarId, Vec<ClusterId>> = BTreeMap::new();
    for c in g.clusters() {
        for &v in &c.members {
            holders.entry(v).or_default().push(c.id);
        }
    }
    let mut witnesses = Vec::new();
    for (v, cs) in holders {
        let idx: BTreeMap<ClusterId, usize> = cs.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut uf = UnionFind::new(cs.len());
        for (a, b, sep) in g.edges() {
            if sep.contains(&v) {
                if let (Some(&ia), Some(&ib)) = (idx.get(&a), idx.get(&b)) {
                    uf.union(ia, ib);
                }
            }
        }
        let mut parts: BTreeMap<usize, BTreeSet<ClusterId>> = BTreeMap::new();
        for (i, &c) in cs.iter().enumerate() {
            parts.entry(uf.find(i)).or_default().insert(c);
        }
        if parts.len() > 1 {
            let mut sets: Vec<_> = parts.into_values().collect();
            sets.sort();
            let comps: Vec<_> = sets.iter().map(cluster_list).collect();
            witnesses.push(format!("{} split into {}", g.network().name(v), comps.join(" vs ")));
        }
    }
    CheckReport::new("path", witnesses)
}

/// The path property checked literally: every pair of clusters sharing a
/// variable is joined by some path of clusters and edges all holding it.
/// Quadratic; meant for cross-checking [`check_path_property`].
pub fn pairwise_path_property(g: &ClusterGraph) -> bool {
    let ids = g.cluster_ids();
    for (i, &p) in ids.iter().enumerate() {
        for &q in &ids[i + 1..] {
            for &x in g.members(p).intersection(g.members(q)) {
                let mut seen = BTreeSet::from([p]);
                let mut stack = vec![p];
                while let Some(c) = stack.pop() {
                    for n in g.neighbors(c) {
                        if g.members(n).contains(&x)
                            && g.separator(c, n).unwrap().contains(&x)
                            && seen.insert(n)
                        {
                            stack.push(n);
                        }
                    }
                }
                if !seen.contains(&q) {
                    return false;
                }
            }
        }
    }
    true
}

/// Every separator is nonempty and lies within both endpoints.
pub fn check_separator_subsets(g: &ClusterGraph) -> CheckReport {
    let mut witnesses = Vec::new();
    for (a, b, sep) in g.edges() {
        if sep.is_empty() {
            witnesses.push(format!("edge {a}-{b} carries nothing"));
        } else if !sep.is_subset(g.members(a)) || !sep.is_subset(g.members(b)) {
            witnesses.push(format!("edge {a}-{b} carries {} outside its endpoints", var_list(g, sep)));
        }
    }
    CheckReport::new("separators", witnesses)
}

fn forest_report(g: &ClusterGraph) -> CheckReport {
    let mut witnesses = Vec::new();
    for block in g.biconnected_components() {
        if block.is_multiply_connected() {
            witnesses.push(format!("cycle through {}", cluster_list(&block.clusters)));
        }
    }
    CheckReport::new("singly-connected", witnesses)
}

/// Family and path properties, a forest shape, and separators equal to the
/// full endpoint intersection. Separators are first widened to the
/// intersection; on a forest with the path property that is a no-op.
pub fn check_junction_tree(g: &ClusterGraph) -> CheckReport {
    check_junction_tree_with(g, true)
}

pub fn check_junction_tree_with(g: &ClusterGraph, normalize: bool) -> CheckReport {
    let normalized;
    let g = if normalize {
        let mut copy = g.fork();
        transforms::normalize_raw(&mut copy);
        normalized = copy;
        &normalized
    } else {
        g
    };
    let mut intersections = Vec::new();
    for (a, b, sep) in g.edges() {
        let inter: VarSet = g.members(a).intersection(g.members(b)).copied().collect();
        if *sep != inter {
            intersections.push(format!("edge {a}-{b} carries {} not {}", var_list(g, sep), var_list(g, &inter)));
        }
    }
    CheckReport::merge(
        "junction-tree",
        [
            check_family_property(g),
            check_path_property(g),
            check_separator_subsets(g),
            forest_report(g),
            CheckReport::new("intersections", intersections),
        ],
    )
}

/// All structural checks that must hold for any cluster graph.
pub fn check_cluster_graph(g: &ClusterGraph) -> CheckReport {
    CheckReport::merge(
        "cluster-graph",
        [check_family_property(g), check_path_property(g), check_separator_subsets(g)],
    )
}

/// Dense bitmask view of a network's variables.
struct Dense {
    ids: Vec<VarId>,
    index: BTreeMap<VarId, usize>,
    cards: Vec<Cost>,
}

impl Dense {
    fn new(net: &BeliefNetwork) -> Result<Self> {
        let ids: Vec<VarId> = net.ids().collect();
        if ids.len() > 128 {
            return Err(Error::pre("oracles support at most 128 variables"));
        }
        let index = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let cards = ids.iter().map(|&v| net.cardinality(v).unwrap() as Cost).collect();
        Ok(Self { ids, index, cards })
    }

    fn mask(&self, vars: &VarSet) -> u128 {
        vars.iter().fold(0, |m, v| m | 1 << self.index[v])
    }

    fn size(&self, mask: u128) -> Cost {
        (0..self.ids.len())
            .filter(|i| mask >> i & 1 == 1)
            .fold(1, |acc: Cost, i| acc.saturating_mul(self.cards[i]))
    }
}

fn moral_adjacency(net: &BeliefNetwork, dense: &Dense) -> Vec<u128> {
    let mut adj = vec![0u128; dense.ids.len()];
    for v in net.ids() {
        let fam = dense.mask(&net.family(v));
        for (i, row) in adj.iter_mut().enumerate() {
            if fam >> i & 1 == 1 {
                *row |= fam & !(1 << i);
            }
        }
    }
    adj
}

/// Classical node elimination on a moral graph: returns the cost of the
/// maximal elimination cliques.
fn elimination_cost(adj: &[u128], order: &[usize], dense: &Dense) -> Cost {
    let mut adj = adj.to_vec();
    let mut alive: u128 = if order.len() == 128 { u128::MAX } else { (1 << order.len()) - 1 };
    let mut cliques = Vec::with_capacity(order.len());
    for &x in order {
        let nbrs = adj[x] & alive;
        cliques.push(nbrs | 1 << x);
        let mut rest = nbrs;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            adj[i] |= nbrs & !(1 << i);
        }
        alive &= !(1 << x);
    }
    maximal_cost(&mut cliques, dense)
}

fn maximal_cost(cliques: &mut [u128], dense: &Dense) -> Cost {
    cliques.sort_unstable_by_key(|c| std::cmp::Reverse(c.count_ones()));
    let mut kept: Vec<u128> = Vec::new();
    for &c in cliques.iter() {
        if !kept.iter().any(|&k| c & k == c) {
            kept.push(c);
        }
    }
    kept.iter().fold(0, |acc: Cost, &c| acc.saturating_add(dense.size(c)))
}

/// Textbook cost of eliminating `order`: moralize, eliminate collecting
/// `{x} ∪ nbrs(x)`, discard subsumed cliques and sum their potentials.
pub fn reference_elimination_cost(net: &BeliefNetwork, order: &[VarId]) -> Result<Cost> {
    let dense = Dense::new(net)?;
    let mut seen = BTreeSet::new();
    let mut idx = Vec::with_capacity(order.len());
    for v in order {
        let &i = dense
            .index
            .get(v)
            .ok_or_else(|| Error::pre(format!("order names unknown variable {v}")))?;
        if !seen.insert(i) {
            return Err(Error::pre(format!("order repeats variable {}", net.name(*v))));
        }
        idx.push(i);
    }
    if idx.len() != dense.ids.len() {
        return Err(Error::pre("order is not a permutation of the network's variables"));
    }
    Ok(elimination_cost(&moral_adjacency(net, &dense), &idx, &dense))
}

/// Largest network [`brute_force_optimal_cost`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 9;

/// Minimum reference cost over every elimination order.
pub fn brute_force_optimal_cost(net: &BeliefNetwork) -> Result<Cost> {
    let dense = Dense::new(net)?;
    let n = dense.ids.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::pre(format!(
            "brute force is limited to {BRUTE_FORCE_LIMIT} variables, got {n}"
        )));
    }
    if n == 0 {
        return Ok(0);
    }
    let adj = moral_adjacency(net, &dense);
    // Heap's algorithm
    let mut order: Vec<usize> = (0..n).collect();
    let mut counters = vec![0usize; n];
    let mut best = elimination_cost(&adj, &order, &dense);
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            let j = if i % 2 == 0 { 0 } else { counters[i] };
            order.swap(j, i);
            best = best.min(elimination_cost(&adj, &order, &dense));
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}

/// Co-occurrence graph of a clustered junction tree is chordal, contains the
/// moral graph, and has every cluster as a maximal clique.
///
/// Requires a junction tree in which no cluster is a subset of a neighbour.
pub fn check_chordal_embedding(g: &ClusterGraph) -> CheckReport {
    const NAME: &str = "chordal-embedding";
    let jt = check_junction_tree(g);
    if !jt.pass {
        return CheckReport::new(NAME, vec![format!("precondition: not a junction tree ({:?})", jt.witnesses)]);
    }
    for (a, b, _) in g.edges() {
        if g.members(a).is_subset(g.members(b)) || g.members(b).is_subset(g.members(a)) {
            return CheckReport::new(
                NAME,
                vec![format!("precondition: redundant clusters {a}-{b} remain")],
            );
        }
    }
    let net = g.network();
    let dense = match Dense::new(net) {
        Ok(d) => d,
        Err(e) => return CheckReport::new(NAME, vec![e.to_string()]),
    };
    let n = dense.ids.len();
    let mut adj = vec![0u128; n];
    for c in g.clusters() {
        let m = dense.mask(&c.members);
        for (i, row) in adj.iter_mut().enumerate() {
            if m >> i & 1 == 1 {
                *row |= m & !(1 << i);
            }
        }
    }
    let mut witnesses = Vec::new();

    // maximum cardinality search; its reverse visit order is a perfect
    // elimination order exactly when the graph is chordal
    let mut weight = vec![0usize; n];
    let mut visited: u128 = 0;
    let mut visit = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n).filter(|i| visited >> i & 1 == 0).max_by_key(|&i| (weight[i], std::cmp::Reverse(i))).unwrap();
        visited |= 1 << v;
        visit.push(v);
        for (u, w) in weight.iter_mut().enumerate() {
            if adj[v] >> u & 1 == 1 && visited >> u & 1 == 0 {
                *w += 1;
            }
        }
    }
    let peo: Vec<usize> = visit.into_iter().rev().collect();
    let mut position = vec![0; n];
    for (i, &v) in peo.iter().enumerate() {
        position[v] = i;
    }
    for &v in &peo {
        let later: Vec<usize> = (0..n).filter(|&u| adj[v] >> u & 1 == 1 && position[u] > position[v]).collect();
        if let Some(&first) = later.iter().min_by_key(|&&u| position[u]) {
            for &u in &later {
                if u != first && adj[first] >> u & 1 == 0 {
                    witnesses.push(format!(
                        "not chordal: {} lacks neighbour {} of {}",
                        net.name(dense.ids[first]),
                        net.name(dense.ids[u]),
                        net.name(dense.ids[v])
                    ));
                }
            }
        }
    }
    let moral = moral_adjacency(net, &dense);
    for i in 0..n {
        if moral[i] & !adj[i] != 0 {
            witnesses.push(format!("moral edges of {} missing", net.name(dense.ids[i])));
        }
    }
    for c in g.clusters() {
        let m = dense.mask(&c.members);
        let common = (0..n).filter(|i| m >> i & 1 == 1).fold(u128::MAX, |acc, i| acc & adj[i]) & !m;
        if common != 0 {
            witnesses.push(format!("{} is not a maximal clique", c.id));
        }
    }
    CheckReport::new(NAME, witnesses)
}
