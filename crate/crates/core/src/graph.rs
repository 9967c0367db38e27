//! Cluster graphs: clusters of variables joined by separator-labelled edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BeliefNetwork, Cost, VarId, VarSet};
use crate::trace::{Operation, TraceEvent};
use crate::util::UnionFind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Unordered cluster pair, stored smallest id first.
pub type EdgeKey = (ClusterId, ClusterId);

pub fn edge_key(a: ClusterId, b: ClusterId) -> EdgeKey {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    pub members: VarSet,
    /// Variables belonging to some family housed in this cluster.
    pub family_vars: VarSet,
}

/// Potential size of one cluster.
pub fn cluster_cost(cluster: &Cluster, net: &BeliefNetwork) -> Result<Cost> {
    net.potential_size(&cluster.members)
}

/// A biconnected component of a cluster graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub clusters: BTreeSet<ClusterId>,
    pub edges: Vec<EdgeKey>,
}

impl Block {
    /// A lone bridge edge needs no further work.
    pub fn is_trivial(&self) -> bool {
        self.edges.len() == 1
    }

    pub fn is_multiply_connected(&self) -> bool {
        self.edges.len() >= self.clusters.len()
    }
}

/// Mutable cluster graph over an owned belief network.
///
/// Cluster ids are never reused; merges and eliminations allocate fresh ids
/// so that trace events stay unambiguous.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterGraph {
    network: BeliefNetwork,
    clusters: BTreeMap<ClusterId, Cluster>,
    edges: BTreeMap<EdgeKey, VarSet>,
    adjacency: BTreeMap<ClusterId, BTreeSet<ClusterId>>,
    homes: BTreeMap<VarId, ClusterId>,
    next_cluster: u32,
    trace: Vec<TraceEvent>,
    recording: bool,
}

/// One cluster per variable holding its family, one edge per arc `X→Y`
/// carrying `{X}`.
pub fn build_initial_cluster_graph(net: &BeliefNetwork) -> ClusterGraph {
    ClusterGraph::from_network(net.clone())
}

impl ClusterGraph {
    pub fn empty(network: BeliefNetwork) -> Self {
        Self {
            network,
            clusters: BTreeMap::new(),
            edges: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            homes: BTreeMap::new(),
            next_cluster: 0,
            trace: Vec::new(),
            recording: true,
        }
    }

    pub fn from_network(network: BeliefNetwork) -> Self {
        let mut g = Self::empty(network);
        let ids: Vec<VarId> = g.network.ids().collect();
        for x in ids {
            let fam = g.network.family(x);
            let c = g.new_cluster(fam.clone(), fam);
            g.homes.insert(x, c);
        }
        for (x, y) in g.network.arcs() {
            let (cx, cy) = (g.homes[&x], g.homes[&y]);
            g.connect(cx, cy, &VarSet::from([x]));
        }
        g
    }

    /// Reassembles a graph from serialized parts. Only referential integrity
    /// is enforced; the family and path properties are left to the checkers.
    pub fn from_parts(
        network: BeliefNetwork,
        clusters: Vec<Cluster>,
        edges: Vec<(ClusterId, ClusterId, VarSet)>,
        homes: BTreeMap<VarId, ClusterId>,
        next_cluster: Option<u32>,
    ) -> Result<Self> {
        let mut g = Self::empty(network);
        for c in clusters {
            if g.clusters.contains_key(&c.id) {
                return Err(Error::pre(format!("duplicate cluster {}", c.id)));
            }
            if let Some(v) = c.members.iter().chain(&c.family_vars).find(|v| !g.network.contains(**v)) {
                return Err(Error::UnknownVariable(v.to_string()));
            }
            g.adjacency.insert(c.id, BTreeSet::new());
            g.next_cluster = g.next_cluster.max(c.id.0 + 1);
            g.clusters.insert(c.id, c);
        }
        for (a, b, sep) in edges {
            g.require(a)?;
            g.require(b)?;
            if a == b {
                return Err(Error::pre(format!("self-loop on {a}")));
            }
            if g.edges.contains_key(&edge_key(a, b)) {
                return Err(Error::pre(format!("duplicate edge {a}-{b}")));
            }
            g.edges.insert(edge_key(a, b), sep);
            g.adjacency.get_mut(&a).unwrap().insert(b);
            g.adjacency.get_mut(&b).unwrap().insert(a);
        }
        for (&v, &c) in &homes {
            if !g.network.contains(v) {
                return Err(Error::UnknownVariable(v.to_string()));
            }
            g.require(c)?;
        }
        g.homes = homes;
        if let Some(n) = next_cluster {
            g.next_cluster = g.next_cluster.max(n);
        }
        Ok(g)
    }

    // ----- queries -------------------------------------------------------

    pub fn network(&self) -> &BeliefNetwork {
        &self.network
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.get(&id)
    }

    pub fn contains_cluster(&self, id: ClusterId) -> bool {
        self.clusters.contains_key(&id)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &Cluster> + '_ {
        self.clusters.values()
    }

    pub fn cluster_ids(&self) -> Vec<ClusterId> {
        self.clusters.keys().copied().collect()
    }

    pub fn members(&self, id: ClusterId) -> &VarSet {
        &self.clusters[&id].members
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (ClusterId, ClusterId, &VarSet)> + '_ {
        self.edges.iter().map(|(&(a, b), s)| (a, b, s))
    }

    pub fn separator(&self, a: ClusterId, b: ClusterId) -> Option<&VarSet> {
        self.edges.get(&edge_key(a, b))
    }

    pub fn has_edge(&self, a: ClusterId, b: ClusterId) -> bool {
        self.edges.contains_key(&edge_key(a, b))
    }

    pub fn neighbors(&self, id: ClusterId) -> impl Iterator<Item = ClusterId> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn degree(&self, id: ClusterId) -> usize {
        self.adjacency.get(&id).map_or(0, BTreeSet::len)
    }

    /// Cluster housing the family of `var`.
    pub fn home_of(&self, var: VarId) -> Option<ClusterId> {
        self.homes.get(&var).copied()
    }

    pub fn homes(&self) -> &BTreeMap<VarId, ClusterId> {
        &self.homes
    }

    /// Variables whose family is housed in `c`.
    pub fn housed(&self, c: ClusterId) -> Vec<VarId> {
        self.homes.iter().filter(|(_, &h)| h == c).map(|(&v, _)| v).collect()
    }

    /// Clusters containing `var`, in id order.
    pub fn clusters_with(&self, var: VarId) -> Vec<ClusterId> {
        self.clusters.values().filter(|c| c.members.contains(&var)).map(|c| c.id).collect()
    }

    /// Number of edges incident to `c` whose separator carries `var`.
    pub fn carrying_degree(&self, c: ClusterId, var: VarId) -> usize {
        self.neighbors(c).filter(|&n| self.separator(c, n).unwrap().contains(&var)).count()
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn next_cluster_id(&self) -> u32 {
        self.next_cluster
    }

    pub fn cluster_cost(&self, id: ClusterId) -> Result<Cost> {
        let c = self.clusters.get(&id).ok_or(Error::UnknownCluster(id))?;
        cluster_cost(c, &self.network)
    }

    /// Sum of cluster potential sizes.
    pub fn cost(&self) -> Cost {
        self.clusters
            .values()
            .fold(0, |acc: Cost, c| acc.saturating_add(self.network.size_of(&c.members)))
    }

    pub(crate) fn size_of(&self, vars: &VarSet) -> Cost {
        self.network.size_of(vars)
    }

    pub fn edges_minus_clusters(&self) -> i64 {
        self.edges.len() as i64 - self.clusters.len() as i64
    }

    fn dense_index(&self) -> BTreeMap<ClusterId, usize> {
        self.clusters.keys().enumerate().map(|(i, &c)| (c, i)).collect()
    }

    pub fn component_count(&self) -> usize {
        let idx = self.dense_index();
        let mut uf = UnionFind::new(idx.len());
        let mut comps = idx.len();
        for &(a, b) in self.edges.keys() {
            if uf.union(idx[&a], idx[&b]) {
                comps -= 1;
            }
        }
        comps
    }

    /// Every connected component is a tree.
    pub fn is_forest(&self) -> bool {
        self.edges_minus_clusters() == -(self.component_count() as i64)
    }

    /// Whether the subgraph induced by `scope` is a forest.
    pub fn is_forest_within(&self, scope: &BTreeSet<ClusterId>) -> bool {
        let idx: BTreeMap<_, _> = scope.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut uf = UnionFind::new(idx.len());
        self.induced_edges(scope).all(|(a, b)| uf.union(idx[&a], idx[&b]))
    }

    /// Edges with both endpoints in `scope`.
    pub fn induced_edges<'a>(
        &'a self,
        scope: &'a BTreeSet<ClusterId>,
    ) -> impl Iterator<Item = EdgeKey> + 'a {
        self.edges.keys().copied().filter(|(a, b)| scope.contains(a) && scope.contains(b))
    }

    /// Biconnected components (blocks), each listing its clusters and edges.
    /// Isolated clusters belong to no block.
    pub fn biconnected_components(&self) -> Vec<Block> {
        self.blocks(None)
    }

    /// Blocks of the subgraph induced by `scope`.
    pub fn blocks_within(&self, scope: &BTreeSet<ClusterId>) -> Vec<Block> {
        self.blocks(Some(scope))
    }

    fn blocks(&self, scope: Option<&BTreeSet<ClusterId>>) -> Vec<Block> {
        let inside = |c: &ClusterId| scope.is_none_or(|s| s.contains(c));
        let nbrs = |c: ClusterId| -> Vec<ClusterId> { self.neighbors(c).filter(|n| inside(n)).collect() };
        let mut disc: BTreeMap<ClusterId, usize> = BTreeMap::new();
        let mut low: BTreeMap<ClusterId, usize> = BTreeMap::new();
        let mut blocks = Vec::new();
        let mut edge_stack: Vec<EdgeKey> = Vec::new();
        let mut time = 0;

        for &root in self.clusters.keys() {
            if disc.contains_key(&root) || !inside(&root) {
                continue;
            }
            disc.insert(root, time);
            low.insert(root, time);
            time += 1;
            // (vertex, parent, neighbours, next neighbour index)
            let mut stack: Vec<(ClusterId, Option<ClusterId>, Vec<ClusterId>, usize)> =
                vec![(root, None, nbrs(root), 0)];
            while let Some(frame) = stack.last_mut() {
                let (v, parent) = (frame.0, frame.1);
                if frame.3 < frame.2.len() {
                    let w = frame.2[frame.3];
                    frame.3 += 1;
                    match disc.get(&w) {
                        None => {
                            edge_stack.push(edge_key(v, w));
                            disc.insert(w, time);
                            low.insert(w, time);
                            time += 1;
                            stack.push((w, Some(v), nbrs(w), 0));
                        }
                        Some(&dw) if Some(w) != parent && dw < disc[&v] => {
                            edge_stack.push(edge_key(v, w));
                            let lv = low[&v].min(dw);
                            low.insert(v, lv);
                        }
                        _ => {}
                    }
                } else {
                    stack.pop();
                    if let Some(p) = parent {
                        let lp = low[&p].min(low[&v]);
                        low.insert(p, lp);
                        if low[&v] >= disc[&p] {
                            let target = edge_key(p, v);
                            let mut block = Block { clusters: BTreeSet::new(), edges: Vec::new() };
                            while let Some(e) = edge_stack.pop() {
                                block.clusters.insert(e.0);
                                block.clusters.insert(e.1);
                                block.edges.push(e);
                                if e == target {
                                    break;
                                }
                            }
                            block.edges.sort_unstable();
                            blocks.push(block);
                        }
                    }
                }
            }
        }
        blocks
    }

    // ----- crate-internal mutation ---------------------------------------

    pub(crate) fn require(&self, id: ClusterId) -> Result<()> {
        if self.clusters.contains_key(&id) {
            Ok(())
        } else {
            Err(Error::UnknownCluster(id))
        }
    }

    pub(crate) fn new_cluster(&mut self, members: VarSet, family_vars: VarSet) -> ClusterId {
        let id = ClusterId(self.next_cluster);
        self.next_cluster += 1;
        self.clusters.insert(id, Cluster { id, members, family_vars });
        self.adjacency.insert(id, BTreeSet::new());
        id
    }

    /// Removes a cluster with its incident edges. Homes pointing at it are
    /// left for the caller to reassign.
    pub(crate) fn remove_cluster(&mut self, id: ClusterId) -> Cluster {
        let nbrs = self.adjacency.remove(&id).unwrap_or_default();
        for n in nbrs {
            self.edges.remove(&edge_key(id, n));
            self.adjacency.get_mut(&n).unwrap().remove(&id);
        }
        self.clusters.remove(&id).expect("cluster exists")
    }

    /// Adds `sep` to the edge `a–b`, creating it if needed. An empty `sep`
    /// never creates an edge.
    pub(crate) fn connect(&mut self, a: ClusterId, b: ClusterId, sep: &VarSet) {
        debug_assert_ne!(a, b);
        if sep.is_empty() && !self.has_edge(a, b) {
            return;
        }
        self.edges.entry(edge_key(a, b)).or_default().extend(sep.iter().copied());
        self.adjacency.get_mut(&a).unwrap().insert(b);
        self.adjacency.get_mut(&b).unwrap().insert(a);
    }

    pub(crate) fn disconnect(&mut self, a: ClusterId, b: ClusterId) -> Option<VarSet> {
        let sep = self.edges.remove(&edge_key(a, b))?;
        self.adjacency.get_mut(&a).unwrap().remove(&b);
        self.adjacency.get_mut(&b).unwrap().remove(&a);
        Some(sep)
    }

    /// Removes `var` from the edge's separator, deleting the edge if it
    /// becomes empty. Returns true when the edge was deleted.
    pub(crate) fn strip_edge(&mut self, a: ClusterId, b: ClusterId, var: VarId) -> bool {
        let key = edge_key(a, b);
        let Some(sep) = self.edges.get_mut(&key) else { return false };
        sep.remove(&var);
        if sep.is_empty() {
            self.disconnect(a, b);
            true
        } else {
            false
        }
    }

    pub(crate) fn separator_mut(&mut self, a: ClusterId, b: ClusterId) -> Option<&mut VarSet> {
        self.edges.get_mut(&edge_key(a, b))
    }

    pub(crate) fn cluster_mut(&mut self, id: ClusterId) -> &mut Cluster {
        self.clusters.get_mut(&id).expect("cluster exists")
    }

    pub(crate) fn set_home(&mut self, var: VarId, c: ClusterId) {
        self.homes.insert(var, c);
    }

    pub(crate) fn unset_home(&mut self, var: VarId) -> Option<ClusterId> {
        self.homes.remove(&var)
    }

    pub(crate) fn network_mut(&mut self) -> &mut BeliefNetwork {
        &mut self.network
    }

    /// Recomputes the family annotation of `c` from the families housed there.
    pub(crate) fn refresh_family_vars(&mut self, c: ClusterId) {
        let fam: VarSet =
            self.housed(c).into_iter().flat_map(|v| self.network.family(v)).collect();
        self.cluster_mut(c).family_vars = fam;
    }

    /// A copy for what-if evaluation: no trace, no recording.
    pub fn fork(&self) -> Self {
        Self {
            network: self.network.clone(),
            clusters: self.clusters.clone(),
            edges: self.edges.clone(),
            adjacency: self.adjacency.clone(),
            homes: self.homes.clone(),
            next_cluster: self.next_cluster,
            trace: Vec::new(),
            recording: false,
        }
    }

    /// Cost snapshot taken before a traced mutation; free when not recording.
    pub(crate) fn cost_mark(&self) -> Cost {
        if self.recording {
            self.cost()
        } else {
            0
        }
    }

    pub(crate) fn record(&mut self, op: Operation, cost_before: Cost) {
        if !self.recording {
            return;
        }
        let after = self.cost();
        let cost_delta = to_signed(after) - to_signed(cost_before);
        let seq = self.trace.len() as u64;
        self.trace.push(TraceEvent { seq, op, cost_delta });
    }

    /// Drops the trace, e.g. before handing a graph to replay tests.
    pub fn clear_trace(&mut self) {
        self.trace.clear();
    }
}

fn to_signed(c: Cost) -> i128 {
    i128::try_from(c).unwrap_or(i128::MAX)
}
