//! Random networks and the preset comparison harness.
//!
//! Runs are independent: each owns its graph and a seed derived from the
//! experiment seed and its index, so results do not depend on scheduling.
//! With the `parallel` feature runs are spread over a rayon pool; without it
//! [`Execution::Parallel`] quietly runs in order.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_preset, PresetName};
use crate::error::{Error, Result};
use crate::graph::{build_initial_cluster_graph, ClusterGraph};
use crate::incremental::EditSession;
use crate::io;
use crate::network::{BeliefNetwork, Cost, VarId};
use crate::util::{self, derive_seed};
use crate::verify;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub variables: usize,
    pub arcs: usize,
    pub card_min: u32,
    pub card_max: u32,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(variables: usize, arcs: usize, card_min: u32, card_max: u32, seed: u64) -> Self {
        Self { variables, arcs, card_min, card_max, seed }
    }

    /// `rand-<n>-<m>`, the naming used in result tables.
    pub fn label(&self) -> String {
        format!("rand-{}-{}", self.variables, self.arcs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.variables;
        let max = n * n.saturating_sub(1) / 2;
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.card_min < 2 {
            return bad(format!("card_min {} is below 2", self.card_min));
        }
        if self.card_min > self.card_max {
            return bad(format!("card_min {} exceeds card_max {}", self.card_min, self.card_max));
        }
        if self.arcs > max {
            return bad(format!("{} arcs do not fit on {n} variables (at most {max})", self.arcs));
        }
        if n > 0 && self.arcs < n - 1 {
            return bad(format!("{} arcs cannot connect {n} variables", self.arcs));
        }
        Ok(())
    }
}

/// A connected DAG with exactly the requested counts. Variables are laid
/// out in a random order; a random spanning tree respecting it guarantees
/// connectivity and the remaining arcs are drawn uniformly from the unused
/// forward pairs.
pub fn generate_random_network(spec: &NetworkSpec) -> Result<BeliefNetwork> {
    spec.validate()?;
    let mut rng = util::rng(spec.seed);
    let n = spec.variables;
    let mut net = BeliefNetwork::new();
    let ids: Vec<VarId> = (0..n)
        .map(|i| net.add_variable(&format!("X{i}"), rng.random_range(spec.card_min..=spec.card_max)))
        .collect::<Result<_>>()?;
    let mut order = ids.clone();
    order.shuffle(&mut rng);
    let mut chosen = BTreeSet::new();
    for j in 1..n {
        let i = rng.random_range(0..j);
        chosen.insert((i, j));
    }
    let rest: Vec<(usize, usize)> =
        (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).filter(|p| !chosen.contains(p)).collect();
    let extra = spec.arcs - chosen.len();
    chosen.extend(rest.choose_multiple(&mut rng, extra).copied());
    for (i, j) in chosen {
        net.add_arc(order[i], order[j])?;
    }
    Ok(net)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub algorithm: PresetName,
    pub network: String,
    pub costs: Vec<Cost>,
    pub min: Cost,
    /// Lower middle for an even number of runs.
    pub median: Cost,
    pub mean: f64,
    pub max: Cost,
}

impl ExperimentResult {
    pub fn from_costs(algorithm: PresetName, network: &str, costs: Vec<Cost>) -> Self {
        let mut sorted = costs.clone();
        sorted.sort_unstable();
        let n = sorted.len().max(1);
        let mean = sorted.iter().map(|&c| c as f64).sum::<f64>() / n as f64;
        Self {
            algorithm,
            network: network.to_string(),
            min: sorted.first().copied().unwrap_or(0),
            median: sorted.get((n - 1) / 2).copied().unwrap_or(0),
            max: sorted.last().copied().unwrap_or(0),
            mean,
            costs,
        }
    }

    pub fn spread(&self) -> Cost {
        self.max - self.min
    }
}

pub const MIN_RUNS: usize = 20;

/// A network spec with an optional display name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: NetworkSpec,
}

/// Contents of a benchmark spec file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub networks: Vec<NamedSpec>,
    #[serde(default = "all_presets")]
    pub presets: Vec<PresetName>,
    #[serde(default = "min_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn all_presets() -> Vec<PresetName> {
    PresetName::ALL.to_vec()
}

fn min_runs() -> usize {
    MIN_RUNS
}

impl BenchSpec {
    pub fn run(&self, exec: Execution) -> Result<Vec<ExperimentResult>> {
        let nets = self
            .networks
            .iter()
            .map(|n| Ok((n.name.clone().unwrap_or_else(|| n.spec.label()), generate_random_network(&n.spec)?)))
            .collect::<Result<Vec<_>>>()?;
        run_experiment(&nets, &self.presets, self.runs, self.seed, exec)
    }
}

/// Outcome of building a network one arc at a time.
#[derive(Clone, Debug)]
pub struct IncrementalRun {
    pub graph: ClusterGraph,
    pub cost: Cost,
    pub restores: usize,
    /// Arcs in the order they were added, by variable name.
    pub script: Vec<(String, String)>,
}

fn contract(msg: String, g: &ClusterGraph) -> Error {
    Error::Contract(format!("{msg}\ntrace:\n{}", io::trace_to_string(g.trace())))
}

/// Adds the arcs of `net` in random contiguous order: each arc shares a
/// variable with those already added whenever such an arc remains. A
/// variable enters the session with its first arc; isolated variables come
/// last. The tree is restored whenever an arc closes a cycle, and every
/// intermediate graph is checked.
pub fn incremental_build(net: &BeliefNetwork, preset: PresetName, seed: u64) -> Result<IncrementalRun> {
    if !preset.is_incremental() {
        return Err(Error::InvalidSpec(format!("preset {preset} is not incremental")));
    }
    let mut rng = util::rng(seed);
    let mut session = EditSession::empty(preset, derive_seed(seed, 1));
    let mut remaining = net.arcs();
    let mut built: BTreeSet<VarId> = BTreeSet::new();
    let mut script = Vec::new();
    let mut restores = 0;
    let fail = |what: &str, s: &EditSession, script: &[(String, String)]| {
        contract(format!("{what} after adding {script:?}"), s.graph())
    };
    let ensure = |s: &mut EditSession, v: VarId, built: &mut BTreeSet<VarId>| -> Result<VarId> {
        let name = net.name(v);
        if built.insert(v) {
            s.add_variable(name, net.cardinality(v).expect("known"))?;
        }
        Ok(s.network().lookup(name).expect("added"))
    };
    while !remaining.is_empty() {
        let touching: Vec<usize> = (0..remaining.len())
            .filter(|&i| built.contains(&remaining[i].0) || built.contains(&remaining[i].1))
            .collect();
        let i = if touching.is_empty() {
            rng.random_range(0..remaining.len())
        } else {
            *touching.choose(&mut rng).expect("nonempty")
        };
        let (p, c) = remaining.swap_remove(i);
        let (sp, sc) = (ensure(&mut session, p, &mut built)?, ensure(&mut session, c, &mut built)?);
        session.add_arc(sp, sc)?;
        script.push((net.name(p).to_string(), net.name(c).to_string()));
        if !verify::check_cluster_graph(session.graph()).pass {
            return Err(fail("family or path property lost", &session, &script));
        }
        if !session.graph().is_forest() {
            session.restore()?;
            restores += 1;
            if !verify::check_junction_tree(session.graph()).pass {
                return Err(fail("restore produced an invalid tree", &session, &script));
            }
        }
    }
    for v in net.ids() {
        ensure(&mut session, v, &mut built)?;
    }
    let graph = session.into_graph();
    if !verify::check_junction_tree(&graph).pass {
        return Err(contract("incremental build ended on an invalid tree".into(), &graph));
    }
    Ok(IncrementalRun { cost: graph.cost(), graph, restores, script })
}

/// One run of `preset` on `net`: whole presets on the initial cluster
/// graph, incremental ones arc by arc.
pub fn single_run(net: &BeliefNetwork, preset: PresetName, seed: u64) -> Result<Cost> {
    if preset.is_incremental() {
        return incremental_build(net, preset, seed).map(|r| r.cost);
    }
    let mut g = build_initial_cluster_graph(net);
    run_preset(&mut g, &preset.preset(), seed)?;
    let report = verify::check_junction_tree(&g);
    if !report.pass {
        return Err(contract(format!("{preset} seed {seed}: {:?}", report.witnesses), &g));
    }
    Ok(g.cost())
}

fn map_runs<T: Send>(n: usize, exec: Execution, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs every preset `runs` times on every network. Run `r` of network `k`
/// uses the same derived seed under every preset.
pub fn run_experiment(
    networks: &[(String, BeliefNetwork)],
    presets: &[PresetName],
    runs: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<ExperimentResult>> {
    if runs < MIN_RUNS {
        return Err(Error::InvalidSpec(format!("{runs} runs requested, at least {MIN_RUNS} needed")));
    }
    let jobs: Vec<(usize, PresetName)> =
        (0..networks.len()).flat_map(|k| presets.iter().map(move |&p| (k, p))).collect();
    let costs = map_runs(jobs.len() * runs, exec, |i| {
        let (k, preset) = jobs[i / runs];
        single_run(&networks[k].1, preset, derive_seed(derive_seed(seed, k as u64), (i % runs) as u64))
    })?;
    Ok(jobs
        .iter()
        .zip(costs.chunks(runs))
        .map(|(&(k, p), c)| ExperimentResult::from_costs(p, &networks[k].0, c.to_vec()))
        .collect())
}

/// `runs` arc-by-arc builds of one network.
pub fn run_incremental_experiment(
    name: &str,
    net: &BeliefNetwork,
    preset: PresetName,
    runs: usize,
    seed: u64,
    exec: Execution,
) -> Result<ExperimentResult> {
    if !preset.is_incremental() {
        return Err(Error::InvalidSpec(format!("preset {preset} is not incremental")));
    }
    let costs = map_runs(runs, exec, |r| incremental_build(net, preset, derive_seed(seed, r as u64)).map(|b| b.cost))?;
    Ok(ExperimentResult::from_costs(preset, name, costs))
}

/// Per-run rows followed by a summary block, both comma separated.
pub fn results_csv(results: &[ExperimentResult]) -> Result<String> {
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algorithm", "network", "run", "cost"]).map_err(csv_err)?;
    for r in results {
        for (i, c) in r.costs.iter().enumerate() {
            w.write_record([r.algorithm.to_string(), r.network.clone(), i.to_string(), c.to_string()])
                .map_err(csv_err)?;
        }
    }
    let mut out = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).expect("utf-8");
    out.push_str("\n# summary\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algorithm", "network", "runs", "min", "median", "mean", "max"]).map_err(csv_err)?;
    for r in results {
        w.write_record([
            r.algorithm.to_string(),
            r.network.clone(),
            r.costs.len().to_string(),
            r.min.to_string(),
            r.median.to_string(),
            format!("{:.1}", r.mean),
            r.max.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).expect("utf-8"));
    Ok(out)
}

/// Qualitative comparisons: incremental against whole-network presets and
/// the spread of loop division against elimination. Reported, never
/// asserted.
pub fn observations(results: &[ExperimentResult]) -> Vec<String> {
    let find = |net: &str, p: PresetName| results.iter().find(|r| r.network == net && r.algorithm == p);
    let nets: BTreeSet<&str> = results.iter().map(|r| r.network.as_str()).collect();
    let mut out = Vec::new();
    for net in nets {
        for (inc, whole) in [(PresetName::IE, PresetName::E), (PresetName::ID, PresetName::D)] {
            if let (Some(a), Some(b)) = (find(net, inc), find(net, whole)) {
                let verdict = match a.median.cmp(&b.median) {
                    std::cmp::Ordering::Greater => "incremental worse",
                    std::cmp::Ordering::Less => "incremental better",
                    std::cmp::Ordering::Equal => "same",
                };
                out.push(format!("{net}: {inc} median {} vs {whole} median {} ({verdict})", a.median, b.median));
            }
        }
        if let (Some(d), Some(e)) = (find(net, PresetName::D), find(net, PresetName::E)) {
            let verdict = if d.spread() > e.spread() { "D varies more" } else { "D does not vary more" };
            out.push(format!("{net}: spread D {} vs E {} ({verdict})", d.spread(), e.spread()));
        }
    }
    out
}

/// The results table followed by an observation block of `#` lines.
pub fn report(results: &[ExperimentResult]) -> Result<String> {
    let mut s = results_csv(results)?;
    s.push_str("\n# observations\n");
    for line in observations(results) {
        let _ = writeln!(s, "# {line}");
    }
    Ok(s)
}
