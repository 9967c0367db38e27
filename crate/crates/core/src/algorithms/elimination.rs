//! Node elimination expressed as cluster-graph transformations.

use std::collections::BTreeSet;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{ClusterGraph, ClusterId};
use crate::network::{Cost, VarId, VarSet};
use crate::transforms::{self, Elimination};
use crate::util::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StopRule {
    /// Stop once the residual scope induces a forest.
    #[default]
    UntilSinglyConnected,
    /// Eliminate every variable of the scope.
    Exhaustive,
}

/// Chooses the next variable to eliminate.
pub trait Selector {
    fn select(&mut self, g: &ClusterGraph, scope: &BTreeSet<ClusterId>, candidates: &[VarId]) -> Result<VarId>;
}

/// Potential size of the union of the scope clusters holding `x`.
pub fn elimination_weight(g: &ClusterGraph, scope: &BTreeSet<ClusterId>, x: VarId) -> Cost {
    let mut union = VarSet::new();
    for &c in scope {
        let m = g.members(c);
        if m.contains(&x) {
            union.extend(m.iter().copied());
        }
    }
    g.size_of(&union)
}

/// The candidate whose elimination cluster would be smallest; ties are
/// broken by a draw from `rng`.
pub fn min_weight_select(
    g: &ClusterGraph,
    scope: &BTreeSet<ClusterId>,
    candidates: &[VarId],
    rng: &mut Rng,
) -> Result<VarId> {
    match candidates {
        [] => Err(Error::pre("no candidate variables to eliminate")),
        [only] => Ok(*only),
        _ => {
            let weights: Vec<Cost> = candidates.iter().map(|&x| elimination_weight(g, scope, x)).collect();
            let best = *weights.iter().min().unwrap();
            let tied: Vec<VarId> =
                candidates.iter().zip(&weights).filter(|(_, &w)| w == best).map(|(&x, _)| x).collect();
            Ok(pick(&tied, rng))
        }
    }
}

pub(crate) fn pick<T: Copy>(items: &[T], rng: &mut Rng) -> T {
    if items.len() == 1 {
        items[0]
    } else {
        items[rng.random_range(0..items.len())]
    }
}

pub struct MinWeight<'a> {
    rng: &'a mut Rng,
}

impl<'a> MinWeight<'a> {
    pub fn new(rng: &'a mut Rng) -> Self {
        Self { rng }
    }
}

impl Selector for MinWeight<'_> {
    fn select(&mut self, g: &ClusterGraph, scope: &BTreeSet<ClusterId>, candidates: &[VarId]) -> Result<VarId> {
        min_weight_select(g, scope, candidates, self.rng)
    }
}

/// Follows a given order, skipping variables absent from the scope.
pub struct FixedOrder {
    order: Vec<VarId>,
    next: usize,
}

impl FixedOrder {
    pub fn new(order: Vec<VarId>) -> Self {
        Self { order, next: 0 }
    }
}

impl Selector for FixedOrder {
    fn select(&mut self, _: &ClusterGraph, _: &BTreeSet<ClusterId>, candidates: &[VarId]) -> Result<VarId> {
        while let Some(&x) = self.order.get(self.next) {
            self.next += 1;
            if candidates.binary_search(&x).is_ok() {
                return Ok(x);
            }
        }
        Err(Error::pre("elimination order exhausted before the scope"))
    }
}

/// Variables occurring in some scope cluster, sorted.
pub fn scope_variables(g: &ClusterGraph, scope: &BTreeSet<ClusterId>) -> Vec<VarId> {
    let vars: VarSet = scope.iter().flat_map(|&c| g.members(c).iter().copied()).collect();
    vars.into_iter().collect()
}

/// Eliminates variables from `scope` one at a time. Each elimination
/// cluster leaves the residual scope; its buffer stays in.
pub fn node_elimination(
    g: &mut ClusterGraph,
    scope: &BTreeSet<ClusterId>,
    select: &mut dyn Selector,
    stop: StopRule,
) -> Result<Vec<Elimination>> {
    let mut scope = scope.clone();
    let mut done = Vec::new();
    loop {
        let finished = match stop {
            StopRule::UntilSinglyConnected => g.is_forest_within(&scope),
            StopRule::Exhaustive => scope.is_empty(),
        };
        if finished {
            return Ok(done);
        }
        let candidates = scope_variables(g, &scope);
        let x = select.select(g, &scope, &candidates)?;
        let holders: Vec<ClusterId> = scope.iter().copied().filter(|&c| g.members(c).contains(&x)).collect();
        let out = transforms::eliminate(g, x, &scope)?;
        for c in holders {
            scope.remove(&c);
        }
        if let Some(b) = out.buffer {
            scope.insert(b);
        }
        done.push(out);
    }
}
