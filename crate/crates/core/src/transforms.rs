//! Cluster-graph transformations.
//!
//! Each public operation validates its preconditions before touching the
//! graph, preserves the family and path properties, and appends one trace
//! event. Slide, drop, collapse and merge finish with a spurious-variable
//! sweep seeded at the clusters they touched; steal-an-edge and eliminate
//! do not.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{ClusterGraph, ClusterId};
use crate::network::{VarId, VarSet};
use crate::trace::Operation;

fn distinct(ids: &[ClusterId]) -> bool {
    let set: BTreeSet<_> = ids.iter().collect();
    set.len() == ids.len()
}

fn require_edge(g: &ClusterGraph, p: ClusterId, q: ClusterId) -> Result<()> {
    g.require(p)?;
    g.require(q)?;
    if g.has_edge(p, q) {
        Ok(())
    } else {
        Err(Error::MissingEdge(p, q))
    }
}

/// Merges `p` and `q` into a fresh cluster and returns its id.
pub fn merge(g: &mut ClusterGraph, p: ClusterId, q: ClusterId) -> Result<ClusterId> {
    g.require(p)?;
    g.require(q)?;
    if p == q {
        return Err(Error::pre(format!("cannot merge {p} with itself")));
    }
    let mark = g.cost_mark();
    let m = merge_raw(g, &[p, q]);
    let mut seeds: BTreeSet<_> = g.neighbors(m).collect();
    seeds.insert(m);
    drop_spurious_raw(g, Some(&seeds));
    g.record(Operation::Merge { p, q }, mark);
    Ok(m)
}

/// Merges `p` into the adjacent cluster `q` when `members(p) ⊆ members(q)`.
/// Unlike [`merge`] no spurious variables are dropped, so the surviving
/// cluster keeps exactly the members of `q`.
pub fn absorb(g: &mut ClusterGraph, p: ClusterId, q: ClusterId) -> Result<ClusterId> {
    require_edge(g, p, q)?;
    if !g.members(p).is_subset(g.members(q)) {
        return Err(Error::pre(format!("{p} is not a subset of {q}")));
    }
    let mark = g.cost_mark();
    let m = merge_raw(g, &[p, q]);
    g.record(Operation::Absorb { p, q }, mark);
    Ok(m)
}

/// Union of members, families and edges; parallel edges merge by separator
/// union and edges among the merged clusters vanish.
pub(crate) fn merge_raw(g: &mut ClusterGraph, ids: &[ClusterId]) -> ClusterId {
    let mut members = VarSet::new();
    let mut family = VarSet::new();
    for &c in ids {
        let cl = g.cluster(c).expect("cluster exists");
        members.extend(cl.members.iter().copied());
        family.extend(cl.family_vars.iter().copied());
    }
    let m = g.new_cluster(members, family);
    let merged: BTreeSet<_> = ids.iter().copied().collect();
    for &c in ids {
        let nbrs: Vec<_> = g.neighbors(c).filter(|n| !merged.contains(n)).collect();
        for n in nbrs {
            let sep = g.separator(c, n).unwrap().clone();
            g.connect(m, n, &sep);
        }
    }
    rehome(g, &merged, m);
    for &c in ids {
        g.remove_cluster(c);
    }
    m
}

fn rehome(g: &mut ClusterGraph, from: &BTreeSet<ClusterId>, to: ClusterId) {
    let moved: Vec<VarId> =
        g.homes().iter().filter(|(_, c)| from.contains(c)).map(|(&v, _)| v).collect();
    for v in moved {
        g.set_home(v, to);
    }
}

/// Replaces edge `p–q` by `p–d` and `q–d`, each carrying the old separator,
/// and adds that separator to `d`. Existing edges to `d` absorb it.
fn reroute(g: &mut ClusterGraph, p: ClusterId, q: ClusterId, d: ClusterId) -> VarSet {
    let sep = g.disconnect(p, q).expect("edge exists");
    g.cluster_mut(d).members.extend(sep.iter().copied());
    g.connect(p, d, &sep);
    g.connect(q, d, &sep);
    sep
}

/// Reroutes edge `p–q` through a cluster adjacent to neither endpoint.
pub fn steal_an_edge(g: &mut ClusterGraph, p: ClusterId, q: ClusterId, via: ClusterId) -> Result<()> {
    require_edge(g, p, q)?;
    g.require(via)?;
    if via == p || via == q {
        return Err(Error::pre("via cluster must differ from both endpoints"));
    }
    if g.has_edge(p, via) || g.has_edge(q, via) {
        return Err(Error::pre(format!(
            "{via} is adjacent to {p} or {q}; use slide or drop"
        )));
    }
    let mark = g.cost_mark();
    reroute(g, p, q, via);
    g.record(Operation::StealAnEdge { p, q, via }, mark);
    Ok(())
}

/// Steal-an-edge where exactly one of `p–via`, `q–via` already exists.
pub fn slide(g: &mut ClusterGraph, p: ClusterId, q: ClusterId, via: ClusterId) -> Result<()> {
    require_edge(g, p, q)?;
    g.require(via)?;
    if via == p || via == q {
        return Err(Error::pre("via cluster must differ from both endpoints"));
    }
    if g.has_edge(p, via) == g.has_edge(q, via) {
        return Err(Error::pre(format!(
            "slide needs exactly one of {p}-{via}, {q}-{via} to exist"
        )));
    }
    let mark = g.cost_mark();
    slide_raw(g, p, q, via);
    g.record(Operation::Slide { p, q, via }, mark);
    Ok(())
}

pub(crate) fn slide_raw(g: &mut ClusterGraph, p: ClusterId, q: ClusterId, via: ClusterId) {
    reroute(g, p, q, via);
    drop_spurious_raw(g, Some(&BTreeSet::from([p, q, via])));
}

/// Deletes edge `p–q` of a triangle, widening the opposite cluster and its
/// two edges to carry the deleted separator. `via` names the opposite
/// cluster; it may be omitted only when the triangle is unique. Returns the
/// opposite cluster.
pub fn drop_edge(
    g: &mut ClusterGraph,
    p: ClusterId,
    q: ClusterId,
    via: Option<ClusterId>,
) -> Result<ClusterId> {
    require_edge(g, p, q)?;
    let common: Vec<ClusterId> = g.neighbors(p).filter(|&n| n != q && g.has_edge(n, q)).collect();
    let via = match via {
        Some(d) if common.contains(&d) => d,
        Some(d) => {
            return Err(Error::pre(format!("{p}-{q}-{d} is not a triangle")));
        }
        None => match common.as_slice() {
            [] => return Err(Error::pre(format!("edge {p}-{q} lies on no triangle"))),
            [d] => *d,
            _ => {
                return Err(Error::pre(format!(
                    "edge {p}-{q} lies on several triangles; name the opposite cluster"
                )))
            }
        },
    };
    let mark = g.cost_mark();
    drop_raw(g, p, q, via);
    g.record(Operation::Drop { p, q, via }, mark);
    Ok(via)
}

pub(crate) fn drop_raw(g: &mut ClusterGraph, p: ClusterId, q: ClusterId, via: ClusterId) {
    reroute(g, p, q, via);
    drop_spurious_raw(g, Some(&BTreeSet::from([p, q, via])));
}

/// Checks that `cycle` lists a simple cycle of the graph (length ≥ 3).
pub fn is_simple_cycle(g: &ClusterGraph, cycle: &[ClusterId]) -> bool {
    cycle.len() >= 3
        && distinct(cycle)
        && cycle.iter().all(|&c| g.contains_cluster(c))
        && (0..cycle.len()).all(|i| g.has_edge(cycle[i], cycle[(i + 1) % cycle.len()]))
}

/// Deletes `victim` from a simple cycle and spreads its separator over the
/// remaining clusters and edges of the cycle.
pub fn collapse(
    g: &mut ClusterGraph,
    cycle: &[ClusterId],
    victim: (ClusterId, ClusterId),
) -> Result<()> {
    if !is_simple_cycle(g, cycle) {
        return Err(Error::pre("not a simple cycle of the graph"));
    }
    let k = cycle.len();
    let on_cycle = (0..k).any(|i| {
        let (a, b) = (cycle[i], cycle[(i + 1) % k]);
        (a, b) == victim || (b, a) == victim
    });
    if !on_cycle {
        return Err(Error::pre(format!("{}-{} is not a cycle edge", victim.0, victim.1)));
    }
    let mark = g.cost_mark();
    let sep = g.disconnect(victim.0, victim.1).expect("edge exists");
    for &c in cycle {
        g.cluster_mut(c).members.extend(sep.iter().copied());
    }
    for i in 0..k {
        let (a, b) = (cycle[i], cycle[(i + 1) % k]);
        if let Some(s) = g.separator_mut(a, b) {
            s.extend(sep.iter().copied());
        }
    }
    let seeds: BTreeSet<_> = cycle.iter().copied().collect();
    drop_spurious_raw(g, Some(&seeds));
    g.record(Operation::Collapse { cycle: cycle.to_vec(), victim }, mark);
    Ok(())
}

/// Result of eliminating a variable from a scope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Elimination {
    pub elim: ClusterId,
    /// Absent when the elimination cluster holds only the variable itself.
    pub buffer: Option<ClusterId>,
}

/// Merges the scope clusters containing `var` into an elimination cluster
/// and splits off a buffer cluster holding everything but `var`.
///
/// In-scope edges of the merged clusters move to the buffer; edges leaving
/// the scope move to the elimination cluster, which ends up adjacent only to
/// the buffer within the scope.
pub fn eliminate(
    g: &mut ClusterGraph,
    var: VarId,
    scope: &BTreeSet<ClusterId>,
) -> Result<Elimination> {
    if !g.network().contains(var) {
        return Err(Error::UnknownVariable(var.to_string()));
    }
    for &c in scope {
        g.require(c)?;
    }
    let merged: BTreeSet<ClusterId> =
        scope.iter().copied().filter(|&c| g.members(c).contains(&var)).collect();
    if merged.is_empty() {
        return Err(Error::pre(format!(
            "variable `{}` occurs in no cluster of the scope",
            g.network().name(var)
        )));
    }
    let mark = g.cost_mark();
    let out = eliminate_raw(g, var, scope, &merged);
    g.record(Operation::Eliminate { var, scope: scope.iter().copied().collect() }, mark);
    Ok(out)
}

fn eliminate_raw(
    g: &mut ClusterGraph,
    var: VarId,
    scope: &BTreeSet<ClusterId>,
    merged: &BTreeSet<ClusterId>,
) -> Elimination {
    let mut members = VarSet::new();
    let mut family = VarSet::new();
    for &c in merged {
        let cl = g.cluster(c).unwrap();
        members.extend(cl.members.iter().copied());
        family.extend(cl.family_vars.iter().copied());
    }
    let mut rest = members.clone();
    rest.remove(&var);
    let elim = g.new_cluster(members, family);
    let buffer = (!rest.is_empty()).then(|| g.new_cluster(rest.clone(), VarSet::new()));
    for &c in merged {
        let nbrs: Vec<_> = g.neighbors(c).filter(|n| !merged.contains(n)).collect();
        for n in nbrs {
            let sep = g.separator(c, n).unwrap().clone();
            let target = if scope.contains(&n) { buffer.unwrap_or(elim) } else { elim };
            g.connect(target, n, &sep);
        }
    }
    if let Some(b) = buffer {
        g.connect(elim, b, &rest);
    }
    rehome(g, merged, elim);
    for &c in merged {
        g.remove_cluster(c);
    }
    Elimination { elim, buffer }
}

/// A variable is spurious in a cluster when no family housed there needs it
/// and at most one incident edge carries it.
pub fn is_spurious(g: &ClusterGraph, var: VarId, c: ClusterId) -> Result<bool> {
    let cl = g.cluster(c).ok_or(Error::UnknownCluster(c))?;
    if !cl.members.contains(&var) {
        return Err(Error::pre(format!(
            "variable `{}` is not a member of {c}",
            g.network().name(var)
        )));
    }
    Ok(spurious(g, var, c))
}

fn spurious(g: &ClusterGraph, var: VarId, c: ClusterId) -> bool {
    !g.cluster(c).unwrap().family_vars.contains(&var) && g.carrying_degree(c, var) <= 1
}

/// Removes spurious variables to a fixpoint, starting from `seeds` (or every
/// cluster) and following the edges that lose a variable. Emptied edges and
/// clusters are deleted. Returns the number of variable removals.
pub fn drop_spurious(g: &mut ClusterGraph, seeds: Option<&BTreeSet<ClusterId>>) -> usize {
    let mark = g.cost_mark();
    let n = drop_spurious_raw(g, seeds);
    g.record(
        Operation::DropSpurious { seeds: seeds.map(|s| s.iter().copied().collect()) },
        mark,
    );
    n
}

pub(crate) fn drop_spurious_raw(g: &mut ClusterGraph, seeds: Option<&BTreeSet<ClusterId>>) -> usize {
    let mut work: BTreeSet<ClusterId> = match seeds {
        Some(s) => s.iter().copied().filter(|&c| g.contains_cluster(c)).collect(),
        None => g.cluster_ids().into_iter().collect(),
    };
    let mut removed = 0;
    while let Some(c) = work.pop_first() {
        if !g.contains_cluster(c) {
            continue;
        }
        loop {
            let found = g.members(c).iter().copied().find(|&x| spurious(g, x, c));
            let Some(x) = found else { break };
            g.cluster_mut(c).members.remove(&x);
            removed += 1;
            let carrier = g.neighbors(c).find(|&n| g.separator(c, n).unwrap().contains(&x));
            if let Some(n) = carrier {
                g.strip_edge(c, n, x);
                work.insert(n);
            }
        }
        if g.members(c).is_empty() {
            g.remove_cluster(c);
        }
    }
    removed
}

/// Adds the moral-graph edge `x–y`: when no cluster holds both, the missing
/// variable joins a cluster holding the other and a new edge links it to a
/// cluster that already has it. Returns whether the graph changed.
///
/// Candidate clusters are ranked by adjacency to a partner (no new edge),
/// then by grown potential size, then by id.
pub fn add_fill_arc(g: &mut ClusterGraph, x: VarId, y: VarId) -> Result<bool> {
    for v in [x, y] {
        if !g.network().contains(v) {
            return Err(Error::UnknownVariable(v.to_string()));
        }
    }
    let mark = g.cost_mark();
    let changed = add_fill_arc_raw(g, x, y);
    g.record(Operation::AddFillArc { x, y }, mark);
    Ok(changed)
}

fn add_fill_arc_raw(g: &mut ClusterGraph, x: VarId, y: VarId) -> bool {
    if x == y || g.clusters().any(|c| c.members.contains(&x) && c.members.contains(&y)) {
        return false;
    }
    let holders = |v: VarId| g.clusters_with(v);
    let (hx, hy) = (holders(x), holders(y));
    // (rank, cluster to grow, variable it lacks, cluster to link it to)
    type Choice = ((bool, u128, ClusterId), ClusterId, VarId, Option<ClusterId>);
    let mut best: Option<Choice> = None;
    for (pool, missing, partners) in [(&hx, y, &hy), (&hy, x, &hx)] {
        for &p in pool {
            let adjacent = partners.iter().copied().find(|&r| g.has_edge(p, r));
            let partner = adjacent.or_else(|| partners.first().copied());
            let mut grown = g.members(p).clone();
            grown.insert(missing);
            let key = (adjacent.is_none(), g.size_of(&grown), p);
            if best.as_ref().is_none_or(|b| key < b.0) {
                best = Some((key, p, missing, partner));
            }
        }
    }
    let Some((_, p, missing, partner)) = best else { return false };
    g.cluster_mut(p).members.insert(missing);
    if let Some(r) = partner {
        g.connect(p, r, &VarSet::from([missing]));
    }
    true
}

/// Widens every separator to the full intersection of its endpoints.
pub fn normalize_separators(g: &mut ClusterGraph) {
    let mark = g.cost_mark();
    normalize_raw(g);
    g.record(Operation::NormalizeSeparators, mark);
}

pub(crate) fn normalize_raw(g: &mut ClusterGraph) {
    let keys: Vec<_> = g.edges().map(|(a, b, _)| (a, b)).collect();
    for (a, b) in keys {
        let inter: VarSet = g.members(a).intersection(g.members(b)).copied().collect();
        *g.separator_mut(a, b).unwrap() = inter;
    }
}
