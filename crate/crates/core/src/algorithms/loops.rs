//! Cycle finding and loop division.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::elimination::pick;
use super::postprocess;
use crate::error::{Error, Result};
use crate::graph::{ClusterGraph, ClusterId};
use crate::network::{Cost, VarId};
use crate::trace::TransformKind;
use crate::transforms;
use crate::util::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum CyclePolicy {
    Shortest,
    /// Lowest sum of cluster costs.
    Cheapest,
    /// `length + weight · log2(cluster cost sum)`.
    Weighted { weight: f64 },
}

impl Default for CyclePolicy {
    fn default() -> Self {
        CyclePolicy::Weighted { weight: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisionPolicy {
    /// Smallest growth of the via cluster's potential.
    #[default]
    MinClusterCostIncrease,
    /// Smallest change in total graph cost, spurious cleanup included.
    MinTotalCostIncrease,
    /// Fewest new edges at the via cluster.
    MinDegreeIncrease,
    ClusterCostThenDegree,
    TotalCostThenDegree,
}

/// One way to cut a cycle: reroute edge `p–q` through `via`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Division {
    pub p: ClusterId,
    pub q: ClusterId,
    pub via: ClusterId,
    pub kind: TransformKind,
    /// Positions of `p` and `via` on the cycle.
    pub at: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub cycle_policy: CyclePolicy,
    pub division_policy: DivisionPolicy,
    /// Eliminate variables private to one cycle cluster before dividing.
    pub free_variables: bool,
    /// Run beneficial slides on the scope after each divided cycle.
    pub slide_after_each: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            cycle_policy: CyclePolicy::default(),
            division_policy: DivisionPolicy::default(),
            free_variables: true,
            slide_after_each: false,
        }
    }
}

/// Simple cycles through `root` from a breadth-first search over the
/// scope: one per non-tree edge joining two different branches.
pub fn cycles_through(g: &ClusterGraph, scope: &BTreeSet<ClusterId>, root: ClusterId) -> Vec<Vec<ClusterId>> {
    let mut parent: BTreeMap<ClusterId, ClusterId> = BTreeMap::new();
    let mut branch: BTreeMap<ClusterId, ClusterId> = BTreeMap::new();
    let mut queue = VecDeque::from([root]);
    let mut seen = BTreeSet::from([root]);
    while let Some(c) = queue.pop_front() {
        for n in g.neighbors(c) {
            if scope.contains(&n) && seen.insert(n) {
                parent.insert(n, c);
                branch.insert(n, if c == root { n } else { branch[&c] });
                queue.push_back(n);
            }
        }
    }
    let up = |mut c: ClusterId| {
        let mut path = vec![c];
        while let Some(&p) = parent.get(&c) {
            path.push(p);
            c = p;
        }
        path
    };
    let mut cycles = Vec::new();
    for (u, v) in g.induced_edges(scope) {
        let (Some(bu), Some(bv)) = (branch.get(&u), branch.get(&v)) else { continue };
        if bu == bv || parent.get(&u) == Some(&v) || parent.get(&v) == Some(&u) {
            continue;
        }
        let mut cycle = up(u);
        cycle.reverse();
        let back = up(v);
        cycle.extend(&back[..back.len() - 1]);
        cycles.push(cycle);
    }
    cycles
}

fn cycle_cost(g: &ClusterGraph, cycle: &[ClusterId]) -> Cost {
    cycle.iter().fold(0, |acc: Cost, &c| acc.saturating_add(g.size_of(g.members(c))))
}

/// Picks a random cluster lying on some cycle of the scope and returns the
/// best cycle through it under `policy`.
pub fn find_cycle(
    g: &ClusterGraph,
    scope: &BTreeSet<ClusterId>,
    policy: CyclePolicy,
    rng: &mut Rng,
) -> Result<Vec<ClusterId>> {
    let pool: BTreeSet<ClusterId> = g
        .blocks_within(scope)
        .into_iter()
        .filter(|b| b.is_multiply_connected())
        .flat_map(|b| b.clusters)
        .collect();
    if pool.is_empty() {
        return Err(Error::pre("scope has no cycle"));
    }
    let pool: Vec<ClusterId> = pool.into_iter().collect();
    let root = pick(&pool, rng);
    find_cycle_from(g, scope, root, policy, rng)
}

/// Best cycle through `root` under `policy`.
pub fn find_cycle_from(
    g: &ClusterGraph,
    scope: &BTreeSet<ClusterId>,
    root: ClusterId,
    policy: CyclePolicy,
    rng: &mut Rng,
) -> Result<Vec<ClusterId>> {
    let cycles = cycles_through(g, scope, root);
    if cycles.is_empty() {
        return Err(Error::pre(format!("no cycle through {root}")));
    }
    let best: Vec<&Vec<ClusterId>> = match policy {
        CyclePolicy::Shortest => argmin(&cycles, |c| c.len()),
        CyclePolicy::Cheapest => argmin(&cycles, |c| cycle_cost(g, c)),
        CyclePolicy::Weighted { weight } => {
            let score = |c: &Vec<ClusterId>| c.len() as f64 + weight * (cycle_cost(g, c) as f64).log2();
            let min = cycles.iter().map(score).fold(f64::INFINITY, f64::min);
            cycles.iter().filter(|c| score(c) == min).collect()
        }
    };
    Ok(pick(&best, rng).clone())
}

fn argmin<T, K: Ord + Copy>(items: &[T], key: impl Fn(&T) -> K) -> Vec<&T> {
    let Some(min) = items.iter().map(&key).min() else { return Vec::new() };
    items.iter().filter(|x| key(x) == min).collect()
}

fn signed(c: Cost) -> i128 {
    i128::try_from(c).unwrap_or(i128::MAX)
}

fn total_cost_delta(g: &ClusterGraph, d: &Division) -> i128 {
    let mut f = g.fork();
    let before = f.cost();
    match d.kind {
        TransformKind::StealAnEdge => transforms::steal_an_edge(&mut f, d.p, d.q, d.via),
        TransformKind::Slide => transforms::slide(&mut f, d.p, d.q, d.via),
        _ => transforms::drop_edge(&mut f, d.p, d.q, Some(d.via)).map(drop),
    }
    .expect("candidate divisions are legal");
    signed(f.cost()) - signed(before)
}

fn score(g: &ClusterGraph, d: &Division, policy: DivisionPolicy) -> (i128, i128) {
    let cluster = || {
        let via = g.members(d.via);
        let mut grown = via.clone();
        grown.extend(g.separator(d.p, d.q).unwrap().iter().copied());
        signed(g.size_of(&grown)) - signed(g.size_of(via))
    };
    let degree = || (!g.has_edge(d.p, d.via)) as i128 + (!g.has_edge(d.q, d.via)) as i128;
    match policy {
        DivisionPolicy::MinClusterCostIncrease => (cluster(), 0),
        DivisionPolicy::MinTotalCostIncrease => (total_cost_delta(g, d), 0),
        DivisionPolicy::MinDegreeIncrease => (degree(), 0),
        DivisionPolicy::ClusterCostThenDegree => (cluster(), degree()),
        DivisionPolicy::TotalCostThenDegree => (total_cost_delta(g, d), degree()),
    }
}

/// Every legal reroute of a cycle edge through another cycle cluster.
pub fn division_candidates(g: &ClusterGraph, cycle: &[ClusterId]) -> Vec<Division> {
    let k = cycle.len();
    let mut out = Vec::new();
    for i in 0..k {
        let (p, q) = (cycle[i], cycle[(i + 1) % k]);
        for (j, &via) in cycle.iter().enumerate() {
            if j == i || j == (i + 1) % k {
                continue;
            }
            let kind = match (g.has_edge(p, via), g.has_edge(q, via)) {
                (false, false) => TransformKind::StealAnEdge,
                (true, true) => TransformKind::Drop,
                _ => TransformKind::Slide,
            };
            out.push(Division { p, q, via, kind, at: (i, j) });
        }
    }
    out
}

/// Best division of `cycle` under `policy`, ties drawn from `rng`.
pub fn choose_division(
    g: &ClusterGraph,
    cycle: &[ClusterId],
    policy: DivisionPolicy,
    rng: &mut Rng,
) -> Result<Division> {
    if !transforms::is_simple_cycle(g, cycle) {
        return Err(Error::pre("not a simple cycle of the graph"));
    }
    let cands = division_candidates(g, cycle);
    let scores: Vec<(i128, i128)> = cands.iter().map(|d| score(g, d, policy)).collect();
    let best = *scores.iter().min().unwrap();
    let tied: Vec<Division> = cands.iter().zip(&scores).filter(|(_, s)| **s == best).map(|(d, _)| *d).collect();
    Ok(pick(&tied, rng))
}

fn apply(g: &mut ClusterGraph, d: &Division) -> Result<()> {
    match d.kind {
        TransformKind::StealAnEdge => transforms::steal_an_edge(g, d.p, d.q, d.via),
        TransformKind::Slide => transforms::slide(g, d.p, d.q, d.via),
        _ => transforms::drop_edge(g, d.p, d.q, Some(d.via)).map(drop),
    }
}

/// Cyclic slice `cycle[from..=to]`.
fn arc(cycle: &[ClusterId], from: usize, to: usize) -> Vec<ClusterId> {
    let k = cycle.len();
    let mut out = vec![cycle[from]];
    let mut i = from;
    while i != to {
        i = (i + 1) % k;
        out.push(cycle[i]);
    }
    out
}

/// Splits a cycle with steal, slide or drop until only triangles remain,
/// then drops an edge of each. Returns the number of transformations.
pub fn divide_a_loop(
    g: &mut ClusterGraph,
    cycle: &[ClusterId],
    policy: DivisionPolicy,
    rng: &mut Rng,
) -> Result<usize> {
    if !transforms::is_simple_cycle(g, cycle) {
        return Err(Error::pre("not a simple cycle of the graph"));
    }
    let mut stack = vec![cycle.to_vec()];
    let mut applied = 0;
    while let Some(c) = stack.pop() {
        // spurious cleanup may have removed an edge of a pending subcycle
        if !transforms::is_simple_cycle(g, &c) {
            continue;
        }
        let d = choose_division(g, &c, policy, rng)?;
        apply(g, &d)?;
        applied += 1;
        let k = c.len();
        let (i, j) = d.at;
        for sub in [arc(&c, (i + 1) % k, j), arc(&c, j, i)] {
            if sub.len() >= 3 {
                stack.push(sub);
            }
        }
    }
    Ok(applied)
}

/// Outcome of [`free_variable_elimination`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreeElimination {
    pub eliminated: Vec<VarId>,
    /// Scope clusters replaced by their buffer.
    pub replaced: BTreeMap<ClusterId, ClusterId>,
    /// Final scope.
    pub scope: BTreeSet<ClusterId>,
}

/// Eliminates, to a fixpoint, every variable held by exactly one scope
/// cluster.
pub fn free_variable_elimination(g: &mut ClusterGraph, scope: &BTreeSet<ClusterId>) -> Result<FreeElimination> {
    let mut out = FreeElimination { scope: scope.clone(), ..Default::default() };
    loop {
        let mut count: BTreeMap<VarId, usize> = BTreeMap::new();
        for &c in &out.scope {
            for &v in g.members(c) {
                *count.entry(v).or_default() += 1;
            }
        }
        let Some(x) = count.iter().find(|(_, &n)| n == 1).map(|(&v, _)| v) else {
            return Ok(out);
        };
        let holder = *out.scope.iter().find(|&&c| g.members(c).contains(&x)).unwrap();
        let e = transforms::eliminate(g, x, &out.scope)?;
        out.scope.remove(&holder);
        out.eliminated.push(x);
        let origin = out.replaced.iter().find(|(_, &b)| b == holder).map(|(&o, _)| o).unwrap_or(holder);
        match e.buffer {
            Some(b) => {
                out.scope.insert(b);
                out.replaced.insert(origin, b);
            }
            None => {
                out.replaced.remove(&origin);
            }
        }
    }
}

/// Outcome of [`divide_loops`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoopStats {
    pub cycles: usize,
    pub transformations: usize,
    pub free_eliminations: usize,
    pub slide_reduction: Cost,
}

/// Finds and divides cycles until the scope is singly-connected.
pub fn divide_loops(
    g: &mut ClusterGraph,
    scope: &BTreeSet<ClusterId>,
    config: &LoopConfig,
    rng: &mut Rng,
) -> Result<LoopStats> {
    let start = g.next_cluster_id();
    let mut scope = scope.clone();
    let mut stats = LoopStats::default();
    let cap = 4 * (g.edge_count() + g.cluster_count()) + 16;
    loop {
        scope = g
            .cluster_ids()
            .into_iter()
            .filter(|c| scope.contains(c) || c.0 >= start)
            .collect();
        if g.is_forest_within(&scope) {
            return Ok(stats);
        }
        stats.cycles += 1;
        if stats.cycles > cap {
            return Err(Error::Contract("loop division did not converge".into()));
        }
        let mut cycle = find_cycle(g, &scope, config.cycle_policy, rng)?;
        if config.free_variables {
            let set: BTreeSet<ClusterId> = cycle.iter().copied().collect();
            let fe = free_variable_elimination(g, &set)?;
            stats.free_eliminations += fe.eliminated.len();
            for c in cycle.iter_mut() {
                if let Some(&b) = fe.replaced.get(c) {
                    *c = b;
                }
            }
        }
        stats.transformations += divide_a_loop(g, &cycle, config.division_policy, rng)?;
        if config.slide_after_each {
            let live: BTreeSet<ClusterId> =
                g.cluster_ids().into_iter().filter(|c| scope.contains(c) || c.0 >= start).collect();
            stats.slide_reduction += postprocess::slide_beneficially_within(g, Some(&live))?;
        }
    }
}
