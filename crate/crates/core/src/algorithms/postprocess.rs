//! Redundant-cluster merging and beneficial slides.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClusterGraph, ClusterId};
use crate::network::Cost;
use crate::transforms;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    /// Merge a subset cluster only when its families are also covered.
    Pre,
    /// Merge any cluster into an adjacent superset. Needs a forest.
    Post,
}

fn redundant_pair(g: &ClusterGraph, mode: MergeMode) -> Option<(ClusterId, ClusterId)> {
    g.edges().find_map(|(a, b, _)| {
        [(a, b), (b, a)].into_iter().find(|&(p, q)| {
            let (cp, cq) = (g.cluster(p).unwrap(), g.cluster(q).unwrap());
            cp.members.is_subset(&cq.members)
                && (mode == MergeMode::Post || cp.family_vars.is_subset(&cq.family_vars))
        })
    })
}

/// Merges adjacent clusters whose members are contained in a neighbour,
/// to a fixpoint. Returns the number of merges.
pub fn merge_redundant_clusters(g: &mut ClusterGraph, mode: MergeMode) -> Result<usize> {
    if mode == MergeMode::Post && !g.is_forest() {
        return Err(Error::pre("post-mode merging needs a singly-connected graph"));
    }
    let mut merged = 0;
    while let Some((p, q)) = redundant_pair(g, mode) {
        transforms::absorb(g, p, q)?;
        merged += 1;
    }
    Ok(merged)
}

/// A slide of edge `p–q` over to `via`, a neighbour of `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlideMove {
    pub p: ClusterId,
    pub q: ClusterId,
    pub via: ClusterId,
}

fn bridges(g: &ClusterGraph, scope: Option<&BTreeSet<ClusterId>>) -> Vec<(ClusterId, ClusterId)> {
    g.biconnected_components()
        .into_iter()
        .filter(|b| b.is_trivial())
        .map(|b| b.edges[0])
        .filter(|(a, b)| scope.is_none_or(|s| s.contains(a) && s.contains(b)))
        .collect()
}

/// Slides that can shrink `q`: some variable of the separator is neither
/// in a family of `q` nor carried by any edge of `q` other than `p–q` and
/// `q–via`.
fn promising(g: &ClusterGraph, p: ClusterId, q: ClusterId, via: ClusterId) -> bool {
    let fam = &g.cluster(q).unwrap().family_vars;
    let sep_qv = g.separator(q, via).unwrap();
    g.separator(p, q)
        .unwrap()
        .iter()
        .any(|x| !fam.contains(x) && sep_qv.contains(x) && g.carrying_degree(q, *x) == 2)
}

/// Candidate slides on bridges, with their exact cost deltas.
pub fn beneficial_slides(g: &ClusterGraph, scope: Option<&BTreeSet<ClusterId>>) -> Vec<(SlideMove, i128)> {
    let mut out = Vec::new();
    for (a, b) in bridges(g, scope) {
        for (p, q) in [(a, b), (b, a)] {
            for via in g.neighbors(q) {
                if via == p || scope.is_some_and(|s| !s.contains(&via)) || !promising(g, p, q, via) {
                    continue;
                }
                let mut f = g.fork();
                transforms::slide(&mut f, p, q, via).expect("slide along a bridge is legal");
                let delta = f.cost() as i128 - g.cost() as i128;
                if delta < 0 {
                    out.push((SlideMove { p, q, via }, delta));
                }
            }
        }
    }
    out
}

/// Greedy hill-climb over slides on a forest: apply the slide with the most
/// negative cost delta until none improves. Returns the total reduction.
pub fn slide_beneficially(g: &mut ClusterGraph) -> Result<Cost> {
    if !g.is_forest() {
        return Err(Error::pre("beneficial slides need a singly-connected graph"));
    }
    slide_beneficially_within(g, None)
}

/// Beneficial slides restricted to bridges with all three clusters in
/// `scope`. Sliding a bridge never closes a cycle, so the rest of the
/// graph may be multiply-connected.
pub fn slide_beneficially_within(g: &mut ClusterGraph, scope: Option<&BTreeSet<ClusterId>>) -> Result<Cost> {
    let start = g.cost();
    let mut scope = scope.cloned();
    loop {
        let cands = beneficial_slides(g, scope.as_ref());
        let Some(&(mv, _)) = cands.iter().min_by_key(|(_, d)| *d) else { break };
        transforms::slide(g, mv.p, mv.q, mv.via)?;
        if let Some(s) = scope.as_mut() {
            s.retain(|&c| g.contains_cluster(c));
        }
    }
    Ok(start - g.cost())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, binary_net, names, sketch};
    use crate::graph::build_initial_cluster_graph;
    use crate::verify;

    #[test]
    fn diamond_elimination_output_merges_to_sixteen() {
        let net = fixtures::diamond();
        let mut g = sketch(&net, &[("ABC", "ABC"), ("BC", ""), ("BCD", "BCD")], &[(0, 1, "BC"), (1, 2, "BC")]).unwrap();
        assert_eq!(g.cost(), 20);
        assert_eq!(merge_redundant_clusters(&mut g, MergeMode::Post).unwrap(), 1);
        assert_eq!(g.cost(), 16);
        assert_eq!(g.cluster_count(), 2);
        let (_, _, sep) = g.edges().next().unwrap();
        assert_eq!(names(&g, sep), "BC");
        assert!(verify::check_junction_tree(&g).pass);
    }

    #[test]
    fn no_subset_pairs_means_no_merges() {
        let net = fixtures::diamond();
        let mut g = sketch(&net, &[("ABC", "ABC"), ("BCD", "BCD")], &[(0, 1, "BC")]).unwrap();
        assert_eq!(merge_redundant_clusters(&mut g, MergeMode::Post).unwrap(), 0);
        assert_eq!(merge_redundant_clusters(&mut g, MergeMode::Pre).unwrap(), 0);
    }

    #[test]
    fn pre_mode_respects_families() {
        // {A,B} ⊆ {A,B,C} but houses B's family while the bigger one does not
        let net = binary_net("ABC", &[("A", "B"), ("B", "C")]);
        let mut g = sketch(&net, &[("AB", "AB"), ("ABC", "BC")], &[(0, 1, "AB")]).unwrap();
        assert!(verify::check_cluster_graph(&g).pass);
        assert_eq!(merge_redundant_clusters(&mut g, MergeMode::Pre).unwrap(), 0);
        assert_eq!(merge_redundant_clusters(&mut g, MergeMode::Post).unwrap(), 1);
        assert_eq!(g.cost(), 8);
    }

    #[test]
    fn post_mode_needs_a_forest() {
        let mut g = build_initial_cluster_graph(&fixtures::diamond());
        assert!(merge_redundant_clusters(&mut g, MergeMode::Post).is_err());
        assert!(slide_beneficially(&mut g).is_err());
    }

    #[test]
    fn tree_without_beneficial_slides_is_unchanged() {
        let mut g = build_initial_cluster_graph(&fixtures::poly4());
        let before = g.clone();
        assert_eq!(slide_beneficially(&mut g).unwrap(), 0);
        assert_eq!(g, before);
    }

    /// `P` holds `X` only to pass it between `Q` and `D`; sliding the edge
    /// `Q–P` over to `D` makes `X` spurious in `P`.
    fn transit_tree() -> ClusterGraph {
        let net = binary_net("XPQDE", &[("X", "D"), ("P", "D")]);
        sketch(
            &net,
            &[("XQ", "XQ"), ("XPE", "PE"), ("XDP", "XDP")],
            &[(0, 1, "X"), (1, 2, "XP")],
        )
        .unwrap()
    }

    #[test]
    fn slide_drops_a_transit_variable() {
        let mut g = transit_tree();
        assert!(verify::check_junction_tree(&g).pass);
        let before = g.cost();
        let saved = slide_beneficially(&mut g).unwrap();
        assert_eq!(saved, 4);
        assert_eq!(g.cost(), before - saved);
        assert!(!g.members(ClusterId(1)).contains(&g.network().lookup("X").unwrap()));
        assert!(g.is_forest());
        assert!(verify::check_junction_tree(&g).pass);
        assert!(g.trace().iter().any(|e| e.op.name() == "slide"));
    }

    #[test]
    fn scoped_slides_ignore_outside_clusters() {
        let mut g = transit_tree();
        let scope = BTreeSet::from([ClusterId(0), ClusterId(1)]);
        assert_eq!(slide_beneficially_within(&mut g, Some(&scope)).unwrap(), 0);
    }
}
