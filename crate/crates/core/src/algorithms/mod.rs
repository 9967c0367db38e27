//! Tree-building drivers, heuristics and the named presets.

pub mod driver;
pub mod elimination;
pub mod loops;
pub mod postprocess;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use driver::{transform_to_tree, transform_to_tree_where, SubInvocationAudit, Subroutine};
pub use elimination::{min_weight_select, node_elimination, FixedOrder, MinWeight, Selector, StopRule};
pub use loops::{
    choose_division, divide_a_loop, divide_loops, find_cycle, free_variable_elimination, CyclePolicy, DivisionPolicy,
    LoopConfig,
};
pub use postprocess::{merge_redundant_clusters, slide_beneficially, MergeMode};

use crate::error::{Error, Result};
use crate::graph::{Block, ClusterGraph, ClusterId};
use crate::network::Cost;
use crate::transforms;
use crate::util::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PresetName {
    E,
    D,
    D2,
    ID,
    IE,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [PresetName::E, PresetName::D, PresetName::D2, PresetName::ID, PresetName::IE];

    pub fn preset(self) -> AlgorithmPreset {
        AlgorithmPreset::named(self)
    }

    pub fn is_incremental(self) -> bool {
        matches!(self, PresetName::ID | PresetName::IE)
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetName::E => "E",
            PresetName::D => "D",
            PresetName::D2 => "D2",
            PresetName::ID => "ID",
            PresetName::IE => "IE",
        })
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown preset `{s}` (expected E, D, D2, ID or IE)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NodeElimination,
    DivideLoops,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreStep {
    FreeVariableElimination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostStep {
    SlideBeneficially,
    MergeRedundant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostScope {
    /// After every divided cycle, on that subgraph.
    PerCycle,
    /// Once, on the whole graph, after it is a tree.
    WholeGraph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmPreset {
    pub name: PresetName,
    pub method: Method,
    pub cycle_policy: CyclePolicy,
    pub transform_policy: DivisionPolicy,
    pub pre_steps: Vec<PreStep>,
    pub post_steps: Vec<PostStep>,
    pub post_scope: PostScope,
}

impl AlgorithmPreset {
    pub fn named(name: PresetName) -> Self {
        let elimination = Self {
            name,
            method: Method::NodeElimination,
            cycle_policy: CyclePolicy::default(),
            transform_policy: DivisionPolicy::default(),
            pre_steps: Vec::new(),
            post_steps: vec![PostStep::MergeRedundant],
            post_scope: PostScope::WholeGraph,
        };
        let loops = Self {
            method: Method::DivideLoops,
            pre_steps: vec![PreStep::FreeVariableElimination],
            post_steps: vec![PostStep::SlideBeneficially, PostStep::MergeRedundant],
            ..elimination.clone()
        };
        match name {
            PresetName::E | PresetName::IE => elimination,
            PresetName::D => loops,
            PresetName::D2 => Self { cycle_policy: CyclePolicy::Shortest, ..loops },
            PresetName::ID => Self {
                post_steps: vec![PostStep::SlideBeneficially],
                post_scope: PostScope::PerCycle,
                ..loops
            },
        }
    }

    fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            cycle_policy: self.cycle_policy,
            division_policy: self.transform_policy,
            free_variables: self.pre_steps.contains(&PreStep::FreeVariableElimination),
            slide_after_each: self.post_scope == PostScope::PerCycle
                && self.post_steps.contains(&PostStep::SlideBeneficially),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub preset: PresetName,
    pub seed: u64,
    pub initial_cost: Cost,
    pub cost: Cost,
    pub clusters: usize,
    pub edges: usize,
    pub trace_len: usize,
    pub audits: Vec<SubInvocationAudit>,
    pub merged: usize,
    pub slide_reduction: Cost,
}

/// Runs `preset` on the blocks accepted by `select`, then its whole-graph
/// postprocessing, then widens separators to full intersections.
pub fn apply_preset_where(
    g: &mut ClusterGraph,
    preset: &AlgorithmPreset,
    rng: &mut Rng,
    select: impl FnMut(&Block) -> bool,
) -> Result<(Vec<SubInvocationAudit>, usize, Cost)> {
    let config = preset.loop_config();
    let mut slide_reduction = 0;
    let audits = match preset.method {
        Method::NodeElimination => {
            let mut sub = |g: &mut ClusterGraph, s: &BTreeSet<ClusterId>| {
                node_elimination(g, s, &mut MinWeight::new(rng), StopRule::UntilSinglyConnected).map(drop)
            };
            transform_to_tree_where(g, &mut sub, select)?
        }
        Method::DivideLoops => {
            let mut sub = |g: &mut ClusterGraph, s: &BTreeSet<ClusterId>| {
                slide_reduction += divide_loops(g, s, &config, rng)?.slide_reduction;
                Ok(())
            };
            transform_to_tree_where(g, &mut sub, select)?
        }
    };
    let mut merged = 0;
    if preset.post_scope == PostScope::WholeGraph {
        for step in &preset.post_steps {
            match step {
                PostStep::SlideBeneficially => slide_reduction += slide_beneficially(g)?,
                PostStep::MergeRedundant => merged += merge_redundant_clusters(g, MergeMode::Post)?,
            }
        }
    }
    let narrow = g.edges().any(|(a, b, sep)| sep.len() != g.members(a).intersection(g.members(b)).count());
    if narrow {
        transforms::normalize_separators(g);
    }
    Ok((audits, merged, slide_reduction))
}

/// Turns `g` into a junction tree with `preset`, drawing every random
/// choice from `seed`.
pub fn run_preset(g: &mut ClusterGraph, preset: &AlgorithmPreset, seed: u64) -> Result<Report> {
    let initial_cost = g.cost();
    let start_len = g.trace().len();
    let mut rng = util::rng(seed);
    let (audits, merged, slide_reduction) = apply_preset_where(g, preset, &mut rng, |_| true)?;
    Ok(Report {
        preset: preset.name,
        seed,
        initial_cost,
        cost: g.cost(),
        clusters: g.cluster_count(),
        edges: g.edge_count(),
        trace_len: g.trace().len() - start_len,
        audits,
        merged,
        slide_reduction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::build_initial_cluster_graph;
    use crate::trace;
    use crate::verify;

    #[test]
    fn preset_names_round_trip() {
        for p in PresetName::ALL {
            assert_eq!(p.to_string().parse::<PresetName>().unwrap(), p);
            assert_eq!(p.preset().name, p);
        }
        assert!("X".parse::<PresetName>().is_err());
        assert_eq!("d2".parse::<PresetName>().unwrap(), PresetName::D2);
    }

    #[test]
    fn preset_shapes() {
        let d = PresetName::D.preset();
        let d2 = PresetName::D2.preset();
        assert_eq!(d2.cycle_policy, CyclePolicy::Shortest);
        assert_eq!(AlgorithmPreset { cycle_policy: d.cycle_policy, ..d2 }, AlgorithmPreset { name: PresetName::D2, ..d });
        let id = PresetName::ID.preset();
        assert!(!id.post_steps.contains(&PostStep::MergeRedundant));
        assert_eq!(id.post_scope, PostScope::PerCycle);
        assert_eq!(PresetName::E.preset().method, Method::NodeElimination);
    }

    #[test]
    fn preset_e_on_diamond_costs_sixteen() {
        for seed in 0..20 {
            let mut g = build_initial_cluster_graph(&fixtures::diamond());
            let r = run_preset(&mut g, &PresetName::E.preset(), seed).unwrap();
            assert_eq!(r.cost, 16, "seed {seed}");
            assert!(verify::check_junction_tree(&g).pass);
            assert!(verify::check_chordal_embedding(&g).pass);
        }
    }

    #[test]
    fn every_preset_yields_a_junction_tree_on_diamond() {
        for name in PresetName::ALL {
            for seed in 0..10 {
                let mut g = build_initial_cluster_graph(&fixtures::diamond());
                let r = run_preset(&mut g, &name.preset(), seed).unwrap();
                assert!(verify::check_junction_tree(&g).pass, "{name} {seed}");
                assert!(r.cost >= 16);
                assert_eq!(r.audits.len(), 1);
            }
        }
    }

    #[test]
    fn tree_input_only_sees_postprocessing() {
        let mut g = build_initial_cluster_graph(&fixtures::poly4());
        let r = run_preset(&mut g, &PresetName::D.preset(), 0).unwrap();
        assert!(r.audits.is_empty());
        assert!(g.trace().iter().all(|e| matches!(e.op.name(), "slide" | "absorb" | "normalize_separators")));
    }

    #[test]
    fn d_and_d2_coincide_on_a_unique_cycle() {
        let run = |name: PresetName| {
            let mut g = build_initial_cluster_graph(&fixtures::diamond());
            run_preset(&mut g, &name.preset(), 5).unwrap();
            g.trace().to_vec()
        };
        assert_eq!(run(PresetName::D), run(PresetName::D2));
    }

    #[test]
    fn runs_replay_from_their_trace() {
        for name in PresetName::ALL {
            let start = build_initial_cluster_graph(&fixtures::diamond());
            let mut g = start.clone();
            run_preset(&mut g, &name.preset(), 11).unwrap();
            let replayed = trace::replay(start, g.trace()).unwrap();
            assert_eq!(replayed, g);
        }
    }
}
