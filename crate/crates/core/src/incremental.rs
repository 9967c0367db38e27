//! Edits to a maintained junction tree.
//!
//! The free functions mutate a [`ClusterGraph`] directly and record a trace
//! event each; [`EditSession`] adds dirty tracking and restoration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::algorithms::{self, AlgorithmPreset, PresetName, SubInvocationAudit};
use crate::error::{Error, Result};
use crate::graph::{ClusterGraph, ClusterId};
use crate::network::{BeliefNetwork, Cost, VarId, VarSet};
use crate::trace::Operation;
use crate::transforms;
use crate::util::{self, Rng};

/// What `delete_arc` does with a parent that is still carried through the
/// child's cluster.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetractPolicy {
    #[default]
    Retract,
    /// Leave the variable in place as a carrier.
    Defer,
}

/// How retraction reconnects the neighbours that held the variable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetractShape {
    /// Consecutive neighbours in id order.
    #[default]
    Chain,
    /// Every neighbour to the lowest-id one.
    Star,
}

/// Clusters created or modified by an edit.
pub type Touched = BTreeSet<ClusterId>;

fn known(g: &ClusterGraph, v: VarId) -> Result<()> {
    if g.network().contains(v) {
        Ok(())
    } else {
        Err(Error::UnknownVariable(v.to_string()))
    }
}

fn home(g: &ClusterGraph, v: VarId) -> Result<ClusterId> {
    g.home_of(v).ok_or_else(|| Error::Contract(format!("family of {} is not housed", g.network().name(v))))
}

/// Adds a variable with no arcs in a singleton cluster of its own.
pub fn add_variable(g: &mut ClusterGraph, name: &str, cardinality: u32) -> Result<ClusterId> {
    let mark = g.cost_mark();
    let v = g.network_mut().add_variable(name, cardinality)?;
    let fam = VarSet::from([v]);
    let c = g.new_cluster(fam.clone(), fam);
    g.set_home(v, c);
    g.record(Operation::AddVariable { name: name.into(), cardinality }, mark);
    Ok(c)
}

/// Adds `parent` to the child's family cluster and links that cluster to
/// the parent's family cluster with an edge carrying the parent.
pub fn add_arc(g: &mut ClusterGraph, parent: VarId, child: VarId) -> Result<Touched> {
    known(g, parent)?;
    known(g, child)?;
    let (p, q) = (home(g, child)?, home(g, parent)?);
    let mark = g.cost_mark();
    g.network_mut().add_arc(parent, child)?;
    let cluster = g.cluster_mut(p);
    cluster.members.insert(parent);
    cluster.family_vars.insert(parent);
    if p != q {
        g.connect(p, q, &VarSet::from([parent]));
    }
    g.record(Operation::AddArc { parent, child }, mark);
    Ok(BTreeSet::from([p, q]))
}

/// Removes `parent` from the child's family. A parent left spurious is
/// dropped; one still carried is retracted unless the policy defers.
pub fn delete_arc(g: &mut ClusterGraph, parent: VarId, child: VarId, policy: RetractPolicy) -> Result<Touched> {
    let mark = g.cost_mark();
    let touched = delete_arc_raw(g, parent, child, policy)?;
    g.record(Operation::DeleteArc { parent, child, policy }, mark);
    Ok(touched)
}

fn delete_arc_raw(g: &mut ClusterGraph, parent: VarId, child: VarId, policy: RetractPolicy) -> Result<Touched> {
    known(g, parent)?;
    known(g, child)?;
    let p = home(g, child)?;
    g.network_mut().remove_arc(parent, child)?;
    g.refresh_family_vars(p);
    let mut touched = BTreeSet::from([p]);
    let cl = g.cluster(p).unwrap();
    if cl.members.contains(&parent) && !cl.family_vars.contains(&parent) {
        if g.carrying_degree(p, parent) <= 1 {
            touched.extend(strip_spurious(g, p));
        } else if policy == RetractPolicy::Retract {
            touched.extend(retract_raw(g, p, parent, RetractShape::default()));
        }
    }
    Ok(touched)
}

fn strip_spurious(g: &mut ClusterGraph, c: ClusterId) -> Touched {
    let before: BTreeSet<ClusterId> = g.cluster_ids().into_iter().collect();
    let snapshot = g.fork();
    transforms::drop_spurious_raw(g, Some(&BTreeSet::from([c])));
    // every cluster whose members or edges changed
    before
        .into_iter()
        .filter(|&id| !g.contains_cluster(id) || g.members(id) != snapshot.members(id) || g.degree(id) != snapshot.degree(id))
        .collect()
}

/// Removes a carried variable from `p`, reconnecting the neighbours that
/// hold it, and repeats on every other cluster where it is only carried.
pub fn retract_variable(g: &mut ClusterGraph, p: ClusterId, var: VarId, shape: RetractShape) -> Result<Touched> {
    known(g, var)?;
    let cl = g.cluster(p).ok_or(Error::UnknownCluster(p))?;
    if !cl.members.contains(&var) {
        return Err(Error::pre(format!("{} is not a member of {p}", g.network().name(var))));
    }
    if cl.family_vars.contains(&var) {
        return Err(Error::pre(format!("{} belongs to a family housed in {p}", g.network().name(var))));
    }
    let mark = g.cost_mark();
    let touched = retract_raw(g, p, var, shape);
    g.record(Operation::RetractVariable { cluster: p, var, shape }, mark);
    Ok(touched)
}

fn retract_raw(g: &mut ClusterGraph, p: ClusterId, var: VarId, shape: RetractShape) -> Touched {
    let mut touched = Touched::new();
    let mut next = Some(p);
    while let Some(c) = next {
        retract_once(g, c, var, shape, &mut touched);
        next = g
            .clusters()
            .find(|cl| cl.members.contains(&var) && !cl.family_vars.contains(&var))
            .map(|cl| cl.id);
    }
    touched.retain(|&c| g.contains_cluster(c));
    touched
}

fn retract_once(g: &mut ClusterGraph, p: ClusterId, var: VarId, shape: RetractShape, touched: &mut Touched) {
    let holders: Vec<ClusterId> = g.neighbors(p).filter(|&n| g.separator(p, n).unwrap().contains(&var)).collect();
    let x = VarSet::from([var]);
    for (i, &n) in holders.iter().enumerate().skip(1) {
        let other = match shape {
            RetractShape::Chain => holders[i - 1],
            RetractShape::Star => holders[0],
        };
        g.connect(other, n, &x);
    }
    for &n in &holders {
        g.strip_edge(p, n, var);
    }
    g.cluster_mut(p).members.remove(&var);
    touched.insert(p);
    touched.extend(holders);
    if g.members(p).is_empty() {
        g.remove_cluster(p);
    }
}

/// Deletes every arc of `var`, then the variable with its family.
pub fn delete_variable(g: &mut ClusterGraph, var: VarId) -> Result<Touched> {
    known(g, var)?;
    let mark = g.cost_mark();
    let mut touched = Touched::new();
    let parents: Vec<VarId> = g.network().parents(var).iter().copied().collect();
    let children: Vec<VarId> = g.network().children(var).iter().copied().collect();
    for p in parents {
        touched.extend(delete_arc_raw(g, p, var, RetractPolicy::Retract)?);
    }
    for c in children {
        touched.extend(delete_arc_raw(g, var, c, RetractPolicy::Retract)?);
    }
    g.unset_home(var);
    for c in g.clusters_with(var) {
        let nbrs: Vec<ClusterId> = g.neighbors(c).collect();
        for n in nbrs {
            g.strip_edge(c, n, var);
        }
        let cl = g.cluster_mut(c);
        cl.members.remove(&var);
        cl.family_vars.remove(&var);
        touched.insert(c);
        if g.members(c).is_empty() {
            g.remove_cluster(c);
        }
    }
    g.network_mut().remove_variable(var)?;
    touched.retain(|&c| g.contains_cluster(c));
    g.record(Operation::DeleteVariable { var }, mark);
    Ok(touched)
}

/// The initial cluster graph of `net`, built one recorded edit at a time
/// from an empty graph, so its trace replays from nothing.
pub fn build_by_edits(net: &BeliefNetwork) -> Result<ClusterGraph> {
    let mut g = ClusterGraph::empty(BeliefNetwork::new());
    let mut ids = std::collections::BTreeMap::new();
    for v in net.variables() {
        add_variable(&mut g, &v.name, v.cardinality)?;
        ids.insert(v.id, g.network().lookup(&v.name).expect("just added"));
    }
    for (p, c) in net.arcs() {
        add_arc(&mut g, ids[&p], ids[&c])?;
    }
    Ok(g)
}

/// Outcome of [`EditSession::restore`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestoreReport {
    pub invocations: usize,
    pub audits: Vec<SubInvocationAudit>,
    pub merged: usize,
    pub slide_reduction: Cost,
    pub cost: Cost,
}

/// A junction tree under edit, with the clusters touched since the last
/// restore.
#[derive(Clone, Debug)]
pub struct EditSession {
    graph: ClusterGraph,
    dirty: BTreeSet<ClusterId>,
    preset: AlgorithmPreset,
    rng: Rng,
    pub policy: RetractPolicy,
    pub shape: RetractShape,
}

impl EditSession {
    /// Every cluster of a graph that is not yet a forest starts dirty.
    pub fn new(graph: ClusterGraph, preset: PresetName, seed: u64) -> Self {
        let dirty = if graph.is_forest() { BTreeSet::new() } else { graph.cluster_ids().into_iter().collect() };
        Self {
            graph,
            dirty,
            preset: preset.preset(),
            rng: util::rng(seed),
            policy: RetractPolicy::default(),
            shape: RetractShape::default(),
        }
    }

    /// A session over a network with no variables.
    pub fn empty(preset: PresetName, seed: u64) -> Self {
        Self::new(ClusterGraph::empty(BeliefNetwork::new()), preset, seed)
    }

    pub fn graph(&self) -> &ClusterGraph {
        &self.graph
    }

    pub fn into_graph(self) -> ClusterGraph {
        self.graph
    }

    pub fn network(&self) -> &BeliefNetwork {
        self.graph.network()
    }

    pub fn dirty(&self) -> &BTreeSet<ClusterId> {
        &self.dirty
    }

    pub fn preset(&self) -> &AlgorithmPreset {
        &self.preset
    }

    pub fn add_variable(&mut self, name: &str, cardinality: u32) -> Result<VarId> {
        let c = add_variable(&mut self.graph, name, cardinality)?;
        self.dirty.insert(c);
        Ok(self.graph.network().lookup(name).expect("just added"))
    }

    pub fn add_arc(&mut self, parent: VarId, child: VarId) -> Result<()> {
        self.dirty.extend(add_arc(&mut self.graph, parent, child)?);
        Ok(())
    }

    pub fn delete_arc(&mut self, parent: VarId, child: VarId) -> Result<()> {
        self.dirty.extend(delete_arc(&mut self.graph, parent, child, self.policy)?);
        Ok(())
    }

    pub fn retract_variable(&mut self, p: ClusterId, var: VarId) -> Result<()> {
        self.dirty.extend(retract_variable(&mut self.graph, p, var, self.shape)?);
        Ok(())
    }

    pub fn delete_variable(&mut self, var: VarId) -> Result<()> {
        self.dirty.extend(delete_variable(&mut self.graph, var)?);
        Ok(())
    }

    pub(crate) fn graph_mut(&mut self) -> &mut ClusterGraph {
        &mut self.graph
    }

    pub(crate) fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }

    pub(crate) fn rng(&self) -> &Rng {
        &self.rng
    }

    pub(crate) fn replace_dirty(&mut self, dirty: BTreeSet<ClusterId>) {
        self.dirty = dirty;
    }

    pub fn set_preset(&mut self, preset: PresetName) {
        self.preset = preset.preset();
    }

    /// Marks clusters as touched by an edit made outside the session.
    pub fn mark_dirty(&mut self, ids: impl IntoIterator<Item = ClusterId>) {
        self.dirty.extend(ids);
    }

    /// Rebuilds a junction tree on the multiply-connected blocks that meet
    /// the dirty set, runs the preset's postprocessing and clears the set.
    /// Does nothing when no edit happened since the last restore and the
    /// graph is already a forest.
    pub fn restore(&mut self) -> Result<RestoreReport> {
        if self.dirty.is_empty() && self.graph.is_forest() {
            return Ok(RestoreReport {
                invocations: 0,
                audits: Vec::new(),
                merged: 0,
                slide_reduction: 0,
                cost: self.graph.cost(),
            });
        }
        let start = self.graph.next_cluster_id();
        let dirty = self.dirty.clone();
        let unmarked = algorithms::driver::multiply_connected_blocks(&self.graph)
            .into_iter()
            .find(|b| !b.clusters.iter().any(|c| dirty.contains(c)));
        if let Some(b) = unmarked {
            return Err(Error::Contract(format!("cycle through {:?} meets no edited cluster", b.clusters)));
        }
        let (audits, merged, slide_reduction) =
            algorithms::apply_preset_where(&mut self.graph, &self.preset, &mut self.rng, |b| {
                b.clusters.iter().any(|c| dirty.contains(c) || c.0 >= start)
            })?;
        if !self.graph.is_forest() {
            return Err(Error::Contract("a cycle outside the edited region survived restoration".into()));
        }
        self.dirty.clear();
        Ok(RestoreReport {
            invocations: audits.len(),
            audits,
            merged,
            slide_reduction,
            cost: self.graph.cost(),
        })
    }
}
