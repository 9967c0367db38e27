//! Belief-network structure: variables, cardinalities and parent sets.
//!
//! Only the graph and the state counts matter here. Probability tables are
//! never represented.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable identifier of a variable within one network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

pub type VarSet = BTreeSet<VarId>;

/// Potential sizes. Products of cardinalities overflow `u64` quickly on
/// dense random networks, so costs are carried as `u128` and saturate.
pub type Cost = u128;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub cardinality: u32,
}

/// A directed acyclic graph of variables.
///
/// Every mutator keeps the network acyclic and free of duplicate or dangling
/// arcs, so a value of this type is always well formed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BeliefNetwork {
    variables: BTreeMap<VarId, Variable>,
    parents: BTreeMap<VarId, VarSet>,
    children: BTreeMap<VarId, VarSet>,
    names: BTreeMap<String, VarId>,
    next_id: u32,
}

impl BeliefNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a network from `(name, cardinality)` pairs and `(parent, child)`
    /// name pairs. Variables receive ids in the order given.
    pub fn from_parts<S: AsRef<str>>(variables: &[(S, u32)], arcs: &[(S, S)]) -> Result<Self> {
        let mut net = Self::new();
        for (name, card) in variables {
            net.add_variable(name.as_ref(), *card)?;
        }
        for (parent, child) in arcs {
            let (parent, child) = (parent.as_ref(), child.as_ref());
            let (Some(p), Some(c)) = (net.lookup(parent), net.lookup(child)) else {
                return Err(Error::DanglingArc { parent: parent.into(), child: child.into() });
            };
            net.add_arc(p, c)?;
        }
        Ok(net)
    }

    pub fn add_variable(&mut self, name: &str, cardinality: u32) -> Result<VarId> {
        if self.names.contains_key(name) {
            return Err(Error::DuplicateVariable(name.into()));
        }
        if cardinality == 0 {
            return Err(Error::ZeroCardinality(name.into()));
        }
        let id = VarId(self.next_id);
        self.next_id += 1;
        self.variables.insert(id, Variable { id, name: name.into(), cardinality });
        self.parents.insert(id, VarSet::new());
        self.children.insert(id, VarSet::new());
        self.names.insert(name.into(), id);
        Ok(id)
    }

    /// Removes a variable that no longer has any arcs.
    pub fn remove_variable(&mut self, id: VarId) -> Result<Variable> {
        self.require(id)?;
        if !self.parents[&id].is_empty() || !self.children[&id].is_empty() {
            return Err(Error::pre(format!("variable `{}` still has arcs", self.name(id))));
        }
        let var = self.variables.remove(&id).expect("checked");
        self.parents.remove(&id);
        self.children.remove(&id);
        self.names.remove(&var.name);
        Ok(var)
    }

    pub fn add_arc(&mut self, parent: VarId, child: VarId) -> Result<()> {
        self.require(parent)?;
        self.require(child)?;
        let names = || (self.name(parent).to_string(), self.name(child).to_string());
        if parent == child {
            return Err(Error::SelfLoop(self.name(parent).into()));
        }
        if self.parents[&child].contains(&parent) {
            let (parent, child) = names();
            return Err(Error::DuplicateArc { parent, child });
        }
        if self.reaches(child, parent) {
            let (parent, child) = names();
            return Err(Error::CyclicArc { parent, child });
        }
        self.parents.get_mut(&child).unwrap().insert(parent);
        self.children.get_mut(&parent).unwrap().insert(child);
        Ok(())
    }

    pub fn remove_arc(&mut self, parent: VarId, child: VarId) -> Result<()> {
        self.require(parent)?;
        self.require(child)?;
        if !self.parents.get_mut(&child).unwrap().remove(&parent) {
            return Err(Error::MissingArc {
                parent: self.name(parent).into(),
                child: self.name(child).into(),
            });
        }
        self.children.get_mut(&parent).unwrap().remove(&child);
        Ok(())
    }

    fn reaches(&self, from: VarId, to: VarId) -> bool {
        let mut stack = vec![from];
        let mut seen = VarSet::new();
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if seen.insert(v) {
                stack.extend(self.children[&v].iter().copied());
            }
        }
        false
    }

    fn require(&self, id: VarId) -> Result<()> {
        if self.variables.contains_key(&id) {
            Ok(())
        } else {
            Err(Error::UnknownVariable(id.to_string()))
        }
    }

    pub fn contains(&self, id: VarId) -> bool {
        self.variables.contains_key(&id)
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn variable(&self, id: VarId) -> Option<&Variable> {
        self.variables.get(&id)
    }

    /// Name of `id`, or its numeric form when the id is unknown.
    pub fn name(&self, id: VarId) -> &str {
        self.variables.get(&id).map(|v| v.name.as_str()).unwrap_or("?")
    }

    pub fn cardinality(&self, id: VarId) -> Option<u32> {
        self.variables.get(&id).map(|v| v.cardinality)
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> + '_ {
        self.variables.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn arc_count(&self) -> usize {
        self.parents.values().map(BTreeSet::len).sum()
    }

    /// Arcs sorted by `(parent, child)`.
    pub fn arcs(&self) -> Vec<(VarId, VarId)> {
        let mut arcs: Vec<_> = self
            .children
            .iter()
            .flat_map(|(&p, cs)| cs.iter().map(move |&c| (p, c)))
            .collect();
        arcs.sort_unstable();
        arcs
    }

    pub fn has_arc(&self, parent: VarId, child: VarId) -> bool {
        self.parents.get(&child).is_some_and(|ps| ps.contains(&parent))
    }

    pub fn parents(&self, id: VarId) -> &VarSet {
        &self.parents[&id]
    }

    pub fn children(&self, id: VarId) -> &VarSet {
        &self.children[&id]
    }

    /// `{x} ∪ pa(x)`.
    pub fn family(&self, id: VarId) -> VarSet {
        let mut fam = self.parents.get(&id).cloned().unwrap_or_default();
        fam.insert(id);
        fam
    }

    /// Product of cardinalities, saturating. Unknown ids are an error.
    pub fn potential_size<'a>(&self, vars: impl IntoIterator<Item = &'a VarId>) -> Result<Cost> {
        vars.into_iter().try_fold(1 as Cost, |acc, v| {
            let card = self.cardinality(*v).ok_or_else(|| Error::UnknownVariable(v.to_string()))?;
            Ok(acc.saturating_mul(card as Cost))
        })
    }

    /// Potential size for ids known to exist.
    pub(crate) fn size_of<'a>(&self, vars: impl IntoIterator<Item = &'a VarId>) -> Cost {
        vars.into_iter()
            .fold(1, |acc: Cost, v| acc.saturating_mul(self.variables[v].cardinality as Cost))
    }

    /// True when the underlying undirected graph has no cycle.
    pub fn is_polytree(&self) -> bool {
        let mut uf = crate::util::UnionFind::new(self.next_id as usize);
        self.arcs().into_iter().all(|(p, c)| uf.union(p.0 as usize, c.0 as usize))
    }

    /// Number of weakly connected components.
    pub fn component_count(&self) -> usize {
        let mut uf = crate::util::UnionFind::new(self.next_id as usize);
        for (p, c) in self.arcs() {
            uf.union(p.0 as usize, c.0 as usize);
        }
        let roots: BTreeSet<_> = self.ids().map(|v| uf.find(v.0 as usize)).collect();
        roots.len()
    }
}

/// Small networks used throughout the tests and documentation. All variables
/// are binary.
pub mod fixtures {
    use super::BeliefNetwork;

    /// A→B, B→C.
    pub fn chain3() -> BeliefNetwork {
        BeliefNetwork::from_parts(&[("A", 2), ("B", 2), ("C", 2)], &[("A", "B"), ("B", "C")])
            .unwrap()
    }

    /// A→C, B→C, C→D.
    pub fn poly4() -> BeliefNetwork {
        BeliefNetwork::from_parts(
            &[("A", 2), ("B", 2), ("C", 2), ("D", 2)],
            &[("A", "C"), ("B", "C"), ("C", "D")],
        )
        .unwrap()
    }

    /// A→B, A→C, B→D, C→D.
    pub fn diamond() -> BeliefNetwork {
        BeliefNetwork::from_parts(
            &[("A", 2), ("B", 2), ("C", 2), ("D", 2)],
            &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")],
        )
        .unwrap()
    }
}
