//! Stochastic Exo-SIR on a Barabási–Albert contact network.
//!
//! Nodes are updated synchronously once per tick. Endogenous infection only
//! travels along edges; exogenous infection comes from outside the graph.
//! Every repetition of an experiment owns a ChaCha8 stream derived from
//! `(base_seed, combination, repetition)`, so results do not depend on how
//! the work is scheduled across threads.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{series_peak, ModelParams, PeakStats};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid graph parameters: {0}")]
    InvalidGraph(String),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Params(#[from] crate::ode::OdeError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected simple graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactGraph {
    adjacency: Vec<Vec<usize>>,
}

impl ContactGraph {
    /// Builds a graph from an edge list, rejecting self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetworkError> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(NetworkError::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(NetworkError::InvalidGraph(format!("self-loop at {a}")));
            }
            if adjacency[a].contains(&b) {
                return Err(NetworkError::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    pub fn is_symmetric(&self) -> bool {
        self.adjacency
            .iter()
            .enumerate()
            .all(|(a, list)| list.iter().all(|&b| b != a && self.adjacency[b].binary_search(&a).is_ok()))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut visited = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    visited += 1;
                    stack.push(u);
                }
            }
        }
        visited == n
    }
}

/// Preferential-attachment growth: a complete seed graph on `m + 1` nodes,
/// then each new node links to `m` distinct existing nodes chosen with
/// probability proportional to their current degree.
pub fn generate_ba_graph_with<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<ContactGraph, NetworkError> {
    if m == 0 {
        return Err(NetworkError::InvalidGraph("m must be at least 1".into()));
    }
    if n <= m {
        return Err(NetworkError::InvalidGraph(format!("need n > m, got n = {n}, m = {m}")));
    }
    let mut edges = Vec::with_capacity(m * (m + 1) / 2 + (n - m - 1) * m);
    for a in 0..=m {
        for b in a + 1..=m {
            edges.push((a, b));
        }
    }
    // each node appears once per incident edge, so a uniform pick is
    // degree-proportional
    let mut endpoints: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut targets = Vec::with_capacity(m);
    for node in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let candidate = endpoints[rng.gen_range(0..endpoints.len())];
            if !targets.contains(&candidate) {
                targets.push(candidate);
            }
        }
        for &t in &targets {
            edges.push((t, node));
            endpoints.push(t);
            endpoints.push(node);
        }
    }
    ContactGraph::from_edges(n, &edges)
}

pub fn generate_ba_graph(n: usize, m: usize, seed: u64) -> Result<ContactGraph, NetworkError> {
    generate_ba_graph_with(n, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeStatus {
    Susceptible,
    InfectedEndo,
    InfectedExo,
    Recovered,
}

impl NodeStatus {
    pub fn is_infected(self) -> bool {
        matches!(self, NodeStatus::InfectedEndo | NodeStatus::InfectedExo)
    }

    /// Whether a node may move from `self` to `next` in one tick.
    pub fn can_become(self, next: NodeStatus) -> bool {
        use NodeStatus::*;
        self == next
            || matches!(
                (self, next),
                (Susceptible, InfectedEndo)
                    | (Susceptible, InfectedExo)
                    | (InfectedEndo, Recovered)
                    | (InfectedExo, Recovered)
            )
    }
}

/// How the exogenous source reaches the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExogenousChannel {
    /// Every susceptible node is independently infected from outside with
    /// probability `beta_x` per tick, before any endogenous draw.
    #[default]
    PerNode,
    /// A single outside source: with probability `beta_x` per tick it infects
    /// one uniformly chosen susceptible node, before any endogenous draw.
    SingleSource,
}

impl std::str::FromStr for ExogenousChannel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-node" => Ok(Self::PerNode),
            "single-source" => Ok(Self::SingleSource),
            other => Err(format!("unknown exogenous channel '{other}' (per-node | single-source)")),
        }
    }
}

/// Per-tick counts of each status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StatusCounts {
    pub susceptible: usize,
    pub infected_endo: usize,
    pub infected_exo: usize,
    pub recovered: usize,
}

impl StatusCounts {
    pub fn tally(statuses: &[NodeStatus]) -> Self {
        let mut c = Self::default();
        for s in statuses {
            match s {
                NodeStatus::Susceptible => c.susceptible += 1,
                NodeStatus::InfectedEndo => c.infected_endo += 1,
                NodeStatus::InfectedExo => c.infected_exo += 1,
                NodeStatus::Recovered => c.recovered += 1,
            }
        }
        c
    }

    pub fn infected(&self) -> usize {
        self.infected_endo + self.infected_exo
    }

    pub fn total(&self) -> usize {
        self.susceptible + self.infected() + self.recovered
    }
}

/// One synchronous update of every node.
///
/// Susceptible nodes first face the exogenous channel; a node that escapes it
/// and has `k` infected neighbours becomes endogenously infected with
/// probability `1 - (1 - beta_e)^k`. Nodes infected at the start of the tick
/// recover with probability `gamma`; nodes infected during the tick do not.
pub fn step<R: Rng + ?Sized>(
    graph: &ContactGraph,
    statuses: &[NodeStatus],
    params: &ModelParams,
    channel: ExogenousChannel,
    rng: &mut R,
) -> Vec<NodeStatus> {
    assert_eq!(graph.node_count(), statuses.len(), "one status per node");
    let mut next = statuses.to_vec();

    let mut imported = None;
    if channel == ExogenousChannel::SingleSource && rng.gen::<f64>() < params.beta_x {
        let susceptible: Vec<usize> = (0..statuses.len())
            .filter(|&v| statuses[v] == NodeStatus::Susceptible)
            .collect();
        imported = susceptible.choose(rng).copied();
    }

    for (node, &status) in statuses.iter().enumerate() {
        match status {
            NodeStatus::Susceptible => {
                if imported == Some(node) {
                    next[node] = NodeStatus::InfectedExo;
                    continue;
                }
                if channel == ExogenousChannel::PerNode && rng.gen::<f64>() < params.beta_x {
                    next[node] = NodeStatus::InfectedExo;
                    continue;
                }
                let k = graph
                    .neighbors(node)
                    .iter()
                    .filter(|&&u| statuses[u].is_infected())
                    .count();
                if k > 0 {
                    let p = 1.0 - (1.0 - params.beta_e).powi(k as i32);
                    if rng.gen::<f64>() < p {
                        next[node] = NodeStatus::InfectedEndo;
                    }
                }
            }
            NodeStatus::InfectedEndo | NodeStatus::InfectedExo => {
                if rng.gen::<f64>() < params.gamma {
                    next[node] = NodeStatus::Recovered;
                }
            }
            NodeStatus::Recovered => {}
        }
    }
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub counts: Vec<StatusCounts>,
    pub endo_series: Vec<usize>,
    pub exo_series: Vec<usize>,
    pub endo_peak: PeakStats,
    pub exo_peak: PeakStats,
}

fn count_peak(series: &[usize]) -> PeakStats {
    let values: Vec<f64> = series.iter().map(|&c| c as f64).collect();
    let (tick, value) = series_peak(&values).expect("series includes tick 0");
    PeakStats {
        peak_value: value,
        peak_tick: tick,
        peak_time: tick as f64,
    }
}

/// Runs the network epidemic from `initial` until no node is infected and no
/// further infection is possible, or until `max_ticks` ticks have elapsed.
pub fn simulate<R: Rng + ?Sized>(
    graph: &ContactGraph,
    initial: Vec<NodeStatus>,
    params: &ModelParams,
    channel: ExogenousChannel,
    max_ticks: usize,
    rng: &mut R,
) -> SimOutcome {
    let mut statuses = initial;
    let mut counts = vec![StatusCounts::tally(&statuses)];
    for _ in 0..max_ticks {
        let now = *counts.last().expect("non-empty");
        let exhausted = now.susceptible == 0 || params.beta_x == 0.0;
        if now.infected() == 0 && exhausted {
            break;
        }
        statuses = step(graph, &statuses, params, channel, rng);
        counts.push(StatusCounts::tally(&statuses));
    }
    let endo_series: Vec<usize> = counts.iter().map(|c| c.infected_endo).collect();
    let exo_series: Vec<usize> = counts.iter().map(|c| c.infected_exo).collect();
    SimOutcome {
        endo_peak: count_peak(&endo_series),
        exo_peak: count_peak(&exo_series),
        counts,
        endo_series,
        exo_series,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Levels tried for each of beta_x, beta_e and gamma.
    pub levels: Vec<f64>,
    pub reps: usize,
    pub n: usize,
    pub m: usize,
    pub max_ticks: usize,
    pub base_seed: u64,
    pub channel: ExogenousChannel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.1, 0.5, 0.9],
            reps: 50,
            n: 150,
            m: 1,
            max_ticks: 1000,
            base_seed: 2020,
            channel: ExogenousChannel::PerNode,
        }
    }
}

impl ExperimentConfig {
    /// Parameter triples in `(beta_x, beta_e, gamma)` lexicographic order of
    /// level index.
    pub fn combinations(&self) -> Vec<ModelParams> {
        let l = &self.levels;
        let mut out = Vec::with_capacity(l.len().pow(3));
        for &beta_x in l {
            for &beta_e in l {
                for &gamma in l {
                    out.push(ModelParams {
                        beta_x,
                        beta_e,
                        gamma,
                    });
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<(), NetworkError> {
        if self.levels.is_empty() {
            return Err(NetworkError::InvalidConfig("no parameter levels".into()));
        }
        if self.reps == 0 {
            return Err(NetworkError::InvalidConfig("reps must be at least 1".into()));
        }
        if self.max_ticks == 0 {
            return Err(NetworkError::InvalidConfig("max_ticks must be at least 1".into()));
        }
        if self.n <= self.m || self.m == 0 {
            return Err(NetworkError::InvalidGraph(format!(
                "need n > m >= 1, got n = {}, m = {}",
                self.n, self.m
            )));
        }
        for &v in &self.levels {
            if !(0.0..=1.0).contains(&v) {
                return Err(NetworkError::InvalidConfig(format!("level {v} is not a probability")));
            }
        }
        Ok(())
    }
}

/// The RNG owned by one repetition of one parameter combination.
pub fn repetition_rng(base_seed: u64, combination: usize, repetition: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((combination as u64) << 32) | repetition as u64);
    rng
}

/// Mean peak statistics of one parameter combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationSummary {
    pub beta_x: f64,
    pub beta_e: f64,
    pub gamma: f64,
    pub mean_endo_peak_value: f64,
    pub mean_endo_peak_tick: f64,
    pub mean_exo_peak_value: f64,
    pub mean_exo_peak_tick: f64,
    pub reps: usize,
}

/// Runs every combination of the level grid `reps` times on a freshly grown
/// graph each time and averages the endogenous and exogenous peaks.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<CombinationSummary>, NetworkError> {
    config.validate()?;
    let combos = config.combinations();
    let jobs: Vec<(usize, usize)> = (0..combos.len())
        .flat_map(|c| (0..config.reps).map(move |r| (c, r)))
        .collect();
    let peaks: Vec<(PeakStats, PeakStats)> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut rng = repetition_rng(config.base_seed, c, r);
            let graph = generate_ba_graph_with(config.n, config.m, &mut rng)?;
            let outcome = simulate(
                &graph,
                vec![NodeStatus::Susceptible; config.n],
                &combos[c],
                config.channel,
                config.max_ticks,
                &mut rng,
            );
            Ok((outcome.endo_peak, outcome.exo_peak))
        })
        .collect::<Result<_, NetworkError>>()?;

    let reps = config.reps as f64;
    Ok(combos
        .iter()
        .zip(peaks.chunks(config.reps))
        .map(|(p, chunk)| {
            let mean = |f: &dyn Fn(&(PeakStats, PeakStats)) -> f64| chunk.iter().map(f).sum::<f64>() / reps;
            CombinationSummary {
                beta_x: p.beta_x,
                beta_e: p.beta_e,
                gamma: p.gamma,
                mean_endo_peak_value: mean(&|x| x.0.peak_value),
                mean_endo_peak_tick: mean(&|x| x.0.peak_tick as f64),
                mean_exo_peak_value: mean(&|x| x.1.peak_value),
                mean_exo_peak_tick: mean(&|x| x.1.peak_tick as f64),
                reps: config.reps,
            }
        })
        .collect())
}

/// Per `(beta_e, gamma)` slice, whether the endogenous peak value is
/// non-decreasing and the peak tick non-increasing as beta_x grows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceTrend {
    pub beta_e: f64,
    pub gamma: f64,
    pub value_non_decreasing: bool,
    pub tick_non_increasing: bool,
}

pub fn beta_x_trends(summaries: &[CombinationSummary]) -> Vec<SliceTrend> {
    let mut slices: Vec<(f64, f64)> = Vec::new();
    for s in summaries {
        if !slices.contains(&(s.beta_e, s.gamma)) {
            slices.push((s.beta_e, s.gamma));
        }
    }
    slices
        .into_iter()
        .map(|(beta_e, gamma)| {
            let mut slice: Vec<&CombinationSummary> = summaries
                .iter()
                .filter(|s| s.beta_e == beta_e && s.gamma == gamma)
                .collect();
            slice.sort_by(|a, b| a.beta_x.total_cmp(&b.beta_x));
            SliceTrend {
                beta_e,
                gamma,
                value_non_decreasing: slice
                    .windows(2)
                    .all(|w| w[1].mean_endo_peak_value >= w[0].mean_endo_peak_value),
                tick_non_increasing: slice
                    .windows(2)
                    .all(|w| w[1].mean_endo_peak_tick <= w[0].mean_endo_peak_tick),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "beta_x",
    "beta_e",
    "gamma",
    "mean_endo_peak_value",
    "mean_endo_peak_tick",
    "mean_exo_peak_value",
    "mean_exo_peak_tick",
    "reps",
];

pub fn write_summary_csv<W: Write>(out: W, summaries: &[CombinationSummary]) -> Result<(), NetworkError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        w.write_record([
            s.beta_x.to_string(),
            s.beta_e.to_string(),
            s.gamma.to_string(),
            s.mean_endo_peak_value.to_string(),
            s.mean_endo_peak_tick.to_string(),
            s.mean_exo_peak_value.to_string(),
            s.mean_exo_peak_tick.to_string(),
            s.reps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
