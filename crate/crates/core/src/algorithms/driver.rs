//! The generic loop: pick a multiply-connected subgraph, hand it to a
//! subroutine, check the subroutine made progress, repeat.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Block, ClusterGraph, ClusterId};

/// Edge and cluster counts around one subroutine invocation.
///
/// `T` is every cluster outside the subgraph `S`. Afterwards `S` stands for
/// every cluster not in the surviving part of `T`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubInvocationAudit {
    pub n_t: i64,
    pub n_s: i64,
    pub e_t: i64,
    /// Edges between `T` and `S`.
    pub e_r: i64,
    pub e_s: i64,
    /// Edges between clusters of `S` that are not part of `S` itself.
    pub e_x: i64,
    pub k_s: i64,
    pub delta_s: i64,
    pub delta_r: i64,
    pub delta_x: i64,
    /// `1 + k_s − delta_r − delta_x`.
    pub metric_drop: i64,
    /// Measured drop in edges minus clusters over the whole graph.
    pub observed_drop: i64,
}

/// Subroutine invoked on one multiply-connected subgraph.
pub trait Subroutine {
    fn run(&mut self, g: &mut ClusterGraph, scope: &BTreeSet<ClusterId>) -> Result<()>;
}

impl<F> Subroutine for F
where
    F: FnMut(&mut ClusterGraph, &BTreeSet<ClusterId>) -> Result<()>,
{
    fn run(&mut self, g: &mut ClusterGraph, scope: &BTreeSet<ClusterId>) -> Result<()> {
        self(g, scope)
    }
}

/// Multiply-connected blocks, smallest first, ties by lowest cluster id.
pub fn multiply_connected_blocks(g: &ClusterGraph) -> Vec<Block> {
    let mut blocks: Vec<Block> =
        g.biconnected_components().into_iter().filter(Block::is_multiply_connected).collect();
    blocks.sort_by_key(|b| (b.clusters.len(), b.clusters.first().copied()));
    blocks
}

/// Repeatedly invokes `sub` on a multiply-connected block until the graph is
/// a forest. Only blocks accepted by `select` are worked on; the others are
/// left alone.
pub fn transform_to_tree_where(
    g: &mut ClusterGraph,
    sub: &mut dyn Subroutine,
    mut select: impl FnMut(&Block) -> bool,
) -> Result<Vec<SubInvocationAudit>> {
    let mut audits = Vec::new();
    loop {
        let Some(block) = multiply_connected_blocks(g).into_iter().find(|b| select(b)) else {
            return Ok(audits);
        };
        let s = block.clusters;
        let t: BTreeSet<ClusterId> = g.cluster_ids().into_iter().filter(|c| !s.contains(c)).collect();
        let before = counts(g, &t, &s);
        let metric_before = g.edges_minus_clusters();

        sub.run(g, &s)?;

        let t_after: BTreeSet<ClusterId> = t.iter().copied().filter(|&c| g.contains_cluster(c)).collect();
        let s_after: BTreeSet<ClusterId> =
            g.cluster_ids().into_iter().filter(|c| !t_after.contains(c)).collect();
        if !g.is_forest_within(&s_after) {
            return Err(Error::Contract(format!(
                "subroutine left a cycle among {}",
                list(&s_after)
            )));
        }
        let after = counts(g, &t_after, &s_after);
        let k_s = before.e_s - before.n_s;
        let delta_r = after.e_r - before.e_r;
        // S' is a forest, so its own edges are a spanning forest; anything
        // beyond |S'| − 1 counts as an extra edge
        let e_x_after = after.e_s - (after.n_s - 1);
        let delta_x = e_x_after - before.e_x;
        let audit = SubInvocationAudit {
            n_t: before.n_t,
            n_s: before.n_s,
            e_t: before.e_t,
            e_r: before.e_r,
            e_s: before.e_s,
            e_x: before.e_x,
            k_s,
            delta_s: after.n_s - before.n_s,
            delta_r,
            delta_x,
            metric_drop: 1 + k_s - delta_r - delta_x,
            observed_drop: metric_before - g.edges_minus_clusters(),
        };
        if audit.observed_drop < 1 {
            return Err(Error::Contract(format!(
                "edges minus clusters did not decrease on {}",
                list(&s)
            )));
        }
        audits.push(audit);
    }
}

/// [`transform_to_tree_where`] over every multiply-connected block.
pub fn transform_to_tree(g: &mut ClusterGraph, sub: &mut dyn Subroutine) -> Result<Vec<SubInvocationAudit>> {
    transform_to_tree_where(g, sub, |_| true)
}

struct Counts {
    n_t: i64,
    n_s: i64,
    e_t: i64,
    e_r: i64,
    e_s: i64,
    e_x: i64,
}

/// Blocks are induced subgraphs, so no edge between two `S` clusters lies
/// outside `S` and `e_x` starts at zero.
fn counts(g: &ClusterGraph, t: &BTreeSet<ClusterId>, s: &BTreeSet<ClusterId>) -> Counts {
    let mut c = Counts { n_t: t.len() as i64, n_s: s.len() as i64, e_t: 0, e_r: 0, e_s: 0, e_x: 0 };
    for (a, b, _) in g.edges() {
        match (s.contains(&a), s.contains(&b)) {
            (true, true) => c.e_s += 1,
            (false, false) => c.e_t += 1,
            _ => c.e_r += 1,
        }
    }
    c
}

fn list(ids: &BTreeSet<ClusterId>) -> String {
    ids.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::elimination::{node_elimination, MinWeight, StopRule};
    use crate::fixtures::{self, binary_net};
    use crate::graph::build_initial_cluster_graph;
    use crate::util;

    fn elimination_sub(seed: u64) -> impl FnMut(&mut ClusterGraph, &BTreeSet<ClusterId>) -> Result<()> {
        let mut rng = util::rng(seed);
        move |g, s| {
            node_elimination(g, s, &mut MinWeight::new(&mut rng), StopRule::UntilSinglyConnected)?;
            Ok(())
        }
    }

    #[test]
    fn tree_input_is_untouched() {
        let mut g = build_initial_cluster_graph(&fixtures::poly4());
        let before = g.clone();
        let audits = transform_to_tree(&mut g, &mut elimination_sub(1)).unwrap();
        assert!(audits.is_empty());
        assert_eq!(g, before);
    }

    #[test]
    fn diamond_audit() {
        let mut g = build_initial_cluster_graph(&fixtures::diamond());
        let audits = transform_to_tree(&mut g, &mut elimination_sub(3)).unwrap();
        assert_eq!(audits.len(), 1);
        let a = &audits[0];
        assert_eq!((a.n_t, a.n_s, a.e_s, a.e_r, a.k_s), (0, 4, 4, 0, 0));
        assert_eq!(a.metric_drop, 1);
        assert_eq!(a.observed_drop, 1);
        assert_eq!(g.edges_minus_clusters(), -1);
    }

    #[test]
    fn two_cycles_joined_by_bridge_take_two_invocations() {
        let net = binary_net("ABCDEFGH", &[
            ("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"),
            ("D", "E"),
            ("E", "F"), ("E", "G"), ("F", "H"), ("G", "H"),
        ]);
        let mut g = build_initial_cluster_graph(&net);
        let audits = transform_to_tree(&mut g, &mut elimination_sub(7)).unwrap();
        assert_eq!(audits.len(), 2);
        assert!(audits.iter().all(|a| a.metric_drop >= 1 && a.observed_drop >= 1));
        // the second invocation sees the first block's output in T
        assert!(audits[1].n_t > 0 && audits[1].e_r == 1);
        assert_eq!(g.edges_minus_clusters(), -1);
    }

    #[test]
    fn lazy_subroutine_is_a_contract_violation() {
        let mut g = build_initial_cluster_graph(&fixtures::diamond());
        let mut idle = |_: &mut ClusterGraph, _: &BTreeSet<ClusterId>| Ok(());
        let err = transform_to_tree(&mut g, &mut idle).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn block_order_is_smallest_first() {
        let net = binary_net("ABCDEFG", &[
            ("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"),
            ("D", "E"), ("E", "F"), ("D", "F"), ("F", "G"), ("E", "G"),
        ]);
        let g = build_initial_cluster_graph(&net);
        let sizes: Vec<usize> = multiply_connected_blocks(&g).iter().map(|b| b.clusters.len()).collect();
        let mut sorted = sizes.clone();
        sorted.sort();
        assert_eq!(sizes, sorted);
    }
}
