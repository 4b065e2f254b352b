//! Primal-dual approximation of maximum multicommodity flow, and the
//! migration plan built on top of it.
//!
//! Dual lengths live on channels (the capacity resources); a directed link
//! is as long as its channel. Lengths are kept divided by `δ` so that they
//! start at 1 and the loop thresholds stay well inside `f64` range.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::request::MigrationRequest;
use crate::topology::{NetworkTopology, NodeId, Path, TopologyError};

/// Flow per path for one commodity, bytes/second.
pub type PathFlows = BTreeMap<Path, f64>;

/// Bandwidth below this many bytes/second counts as zero.
pub const ZERO_RATE: f64 = 1.0;

/// Relative slack allowed on a capacity constraint.
pub const CAPACITY_RTOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("epsilon must lie in (0, 0.5), got {0}")]
    InvalidEpsilon(f64),
    #[error("theta must be non-negative, got {0}")]
    InvalidTheta(f64),
    #[error("epsilon {epsilon} on {nodes} nodes pushes the initial length below f64 range")]
    DeltaUnderflow { epsilon: f64, nodes: usize },
    #[error("committed plan: {0}")]
    InfeasibleCommitment(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Start filter margin: a new migration starts only if `l > (1+θ)·r`.
    pub theta: f64,
}

impl SolverConfig {
    pub fn new(epsilon: f64, theta: f64) -> Result<Self, SolverError> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(SolverError::InvalidEpsilon(epsilon));
        }
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(SolverError::InvalidTheta(theta));
        }
        Ok(Self { epsilon, theta })
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            theta: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub delta: f64,
    /// `ceil(log_{1+ε}((1+ε)/δ))`.
    pub phase_bound: u32,
    /// Phases actually executed; later phases are skipped once the length
    /// threshold has reached 1.
    pub phases_run: u32,
    pub augmentations: u64,
    /// Divisor applied to the raw flow, `log_{1+ε}((1+ε)/δ)`.
    pub scale: f64,
    /// Extra factor (≥ 1) applied when rounding left a channel overfull.
    pub guard: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Path flows per commodity, in input order.
    pub flows: Vec<PathFlows>,
    pub throughput: f64,
    pub stats: PhaseStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    pub bandwidth: Vec<f64>,
    pub started: Vec<bool>,
    pub flows: Vec<PathFlows>,
    /// `W = Σ l_k`.
    pub throughput: f64,
    /// `F = Σ (l_k − X_k·r_k)`.
    pub net_rate: f64,
    pub stats: Option<PhaseStats>,
}

impl PlanSolution {
    pub fn empty(count: usize) -> Self {
        Self {
            bandwidth: vec![0.0; count],
            started: vec![false; count],
            flows: vec![PathFlows::new(); count],
            throughput: 0.0,
            net_rate: 0.0,
            stats: None,
        }
    }

    /// Recomputes `l`, `W` and `F` from the path flows and start flags.
    pub fn refresh(&mut self, requests: &[MigrationRequest]) {
        self.bandwidth = self.flows.iter().map(|f| f.values().sum()).collect();
        self.throughput = self.bandwidth.iter().sum();
        self.net_rate = self
            .bandwidth
            .iter()
            .zip(&self.started)
            .zip(requests)
            .map(|((l, s), r)| if *s { l - r.dirty_rate } else { *l })
            .sum();
    }
}

/// Migrations already running: per request, the path flows it holds, or
/// `None` if it has not started.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommittedPlan {
    pub flows: Vec<Option<PathFlows>>,
}

impl CommittedPlan {
    pub fn none(count: usize) -> Self {
        Self {
            flows: vec![None; count],
        }
    }

    pub fn from_solution(plan: &PlanSolution) -> Self {
        Self {
            flows: plan
                .flows
                .iter()
                .zip(&plan.started)
                .map(|(f, s)| s.then(|| f.clone()))
                .collect(),
        }
    }

    pub fn bandwidth(&self, k: usize) -> f64 {
        self.flows[k].as_ref().map_or(0.0, |f| f.values().sum())
    }
}

/// Per-channel load of a set of path flows.
pub fn channel_loads<'a>(
    topology: &NetworkTopology,
    flows: impl IntoIterator<Item = &'a PathFlows>,
) -> Vec<f64> {
    let mut load = vec![0.0; topology.channel_count()];
    for f in flows {
        for (p, x) in f {
            for l in p.links() {
                load[topology.link(*l).channel.0] += x;
            }
        }
    }
    load
}

/// Largest `load / capacity` over the channels (0 for an idle network).
pub fn max_load_ratio(loads: &[f64], capacities: &[f64]) -> f64 {
    loads
        .iter()
        .zip(capacities)
        .map(|(l, c)| {
            if *l <= 0.0 {
                0.0
            } else if *c <= 0.0 {
                f64::INFINITY
            } else {
                l / c
            }
        })
        .fold(0.0, f64::max)
}

fn delta_terms(epsilon: f64, nodes: usize) -> Result<(f64, f64, u32), SolverError> {
    // (1+ε)/δ = ((1+ε)N)^{1/ε}; everything is taken in logs first.
    let ln_ratio = ((1.0 + epsilon) * nodes as f64).ln() / epsilon;
    let inv_delta = (ln_ratio - (1.0 + epsilon).ln()).exp();
    let delta = 1.0 / inv_delta;
    if !inv_delta.is_finite() || delta == 0.0 {
        return Err(SolverError::DeltaUnderflow { epsilon, nodes });
    }
    let scale = ln_ratio / (1.0 + epsilon).ln();
    Ok((delta, scale, scale.ceil() as u32))
}

/// Maximum multicommodity flow between `pairs` on the full topology.
pub fn max_mcf(
    topology: &NetworkTopology,
    pairs: &[(NodeId, NodeId)],
    config: &SolverConfig,
) -> Result<FlowSolution, SolverError> {
    max_mcf_with_capacities(topology, &topology.channel_capacities(), pairs, config)
}

/// As [`max_mcf`], with channel capacities overridden. Channels with no
/// capacity are unusable.
pub fn max_mcf_with_capacities(
    topology: &NetworkTopology,
    capacities: &[f64],
    pairs: &[(NodeId, NodeId)],
    config: &SolverConfig,
) -> Result<FlowSolution, SolverError> {
    let config = SolverConfig::new(config.epsilon, config.theta)?;
    assert_eq!(capacities.len(), topology.channel_count());
    for &(s, d) in pairs {
        for n in [s, d] {
            if n.0 >= topology.node_count() {
                return Err(TopologyError::UnknownNode(format!("#{}", n.0)).into());
            }
        }
    }
    let eps = config.epsilon;
    let (delta, scale, phase_bound) = delta_terms(eps, topology.node_count())?;
    let inv_delta = 1.0 / delta;

    // scaled length per channel, u(e)/δ
    let mut length: Vec<f64> = capacities
        .iter()
        .map(|c| if *c > 0.0 { 1.0 } else { f64::INFINITY })
        .collect();
    let mut raw: Vec<PathFlows> = vec![PathFlows::new(); pairs.len()];
    let mut stats = PhaseStats {
        delta,
        phase_bound,
        phases_run: 0,
        augmentations: 0,
        scale,
        guard: 1.0,
    };
    let mut weights = vec![0.0; topology.link_count()];
    let sync_weights = |weights: &mut Vec<f64>, length: &[f64]| {
        for (i, l) in topology.links().iter().enumerate() {
            weights[i] = length[l.channel.0];
        }
    };
    sync_weights(&mut weights, &length);

    // reverse shortest-path trees per destination, valid for one version
    let mut version = 0u64;
    let mut trees: HashMap<NodeId, (u64, crate::topology::DistanceTree)> = HashMap::new();

    let mut threshold = 1.0f64;
    for _phase in 1..=phase_bound {
        threshold = (threshold * (1.0 + eps)).min(inv_delta);
        stats.phases_run += 1;
        for (j, &(src, dst)) in pairs.iter().enumerate() {
            if src == dst {
                continue;
            }
            loop {
                let fresh = matches!(trees.get(&dst), Some((v, _)) if *v == version);
                if !fresh {
                    trees.insert(dst, (version, topology.distances_to(&weights, dst)));
                }
                let tree = &trees[&dst].1;
                if tree.dist[src.0] >= threshold {
                    break;
                }
                let path = topology
                    .tight_path(&weights, tree, src, dst)
                    .expect("finite distance implies a path");
                let c = path
                    .links()
                    .iter()
                    .map(|l| capacities[topology.link(*l).channel.0])
                    .fold(f64::INFINITY, f64::min);
                for l in path.links() {
                    let ch = topology.link(*l).channel.0;
                    length[ch] *= 1.0 + eps * c / capacities[ch];
                }
                *raw[j].entry(path).or_insert(0.0) += c;
                stats.augmentations += 1;
                sync_weights(&mut weights, &length);
                version += 1;
            }
        }
        if threshold >= inv_delta {
            break;
        }
    }

    for f in &mut raw {
        for x in f.values_mut() {
            *x /= scale;
        }
    }
    let loads = channel_loads(topology, &raw);
    let ratio = max_load_ratio(&loads, capacities);
    if ratio > 1.0 {
        stats.guard = ratio;
        for f in &mut raw {
            for x in f.values_mut() {
                *x /= ratio;
            }
        }
    }
    let throughput = raw.iter().flat_map(|f| f.values()).sum();
    Ok(FlowSolution {
        flows: raw,
        throughput,
        stats,
    })
}

/// Plan from scratch: flows, bandwidths and start flags for every request.
pub fn solve(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
    config: &SolverConfig,
) -> Result<PlanSolution, SolverError> {
    solve_incremental(
        topology,
        requests,
        &CommittedPlan::none(requests.len()),
        config,
    )
}

/// Replan while honouring running migrations: none of them stops and none
/// loses bandwidth.
pub fn solve_incremental(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
    committed: &CommittedPlan,
    config: &SolverConfig,
) -> Result<PlanSolution, SolverError> {
    solve_incremental_with_capacities(
        topology,
        &topology.channel_capacities(),
        requests,
        committed,
        config,
    )
}

/// As [`solve_incremental`], with channel capacities overridden (for
/// example to hold back bandwidth used outside the plan).
pub fn solve_incremental_with_capacities(
    topology: &NetworkTopology,
    capacities: &[f64],
    requests: &[MigrationRequest],
    committed: &CommittedPlan,
    config: &SolverConfig,
) -> Result<PlanSolution, SolverError> {
    let config = SolverConfig::new(config.epsilon, config.theta)?;
    let residual = residual_capacities(topology, capacities, requests, committed)?;
    let pairs: Vec<_> = requests.iter().map(|r| (r.src, r.dst)).collect();
    let extra = max_mcf_with_capacities(topology, &residual, &pairs, &config)?;

    let mut plan = PlanSolution::empty(requests.len());
    plan.stats = Some(extra.stats);
    for (k, (req, added)) in requests.iter().zip(extra.flows).enumerate() {
        let added_total: f64 = added.values().sum();
        let mut flows = committed.flows[k].clone().unwrap_or_default();
        if added_total >= ZERO_RATE {
            for (p, x) in added {
                *flows.entry(p).or_insert(0.0) += x;
            }
        }
        let l: f64 = flows.values().sum();
        let started = if committed.flows[k].is_some() {
            true
        } else {
            l >= ZERO_RATE && l > (1.0 + config.theta) * req.dirty_rate
        };
        if started {
            plan.flows[k] = flows;
        }
        plan.started[k] = started;
    }
    plan.refresh(requests);
    Ok(plan)
}

/// Capacities left after the committed flows, with near-empty channels
/// closed.
fn residual_capacities(
    topology: &NetworkTopology,
    capacities: &[f64],
    requests: &[MigrationRequest],
    committed: &CommittedPlan,
) -> Result<Vec<f64>, SolverError> {
    let bad = |m: String| Err(SolverError::InfeasibleCommitment(m));
    if committed.flows.len() != requests.len() {
        return bad(format!(
            "{} entries for {} requests",
            committed.flows.len(),
            requests.len()
        ));
    }
    for (req, flows) in requests.iter().zip(&committed.flows) {
        for (p, x) in flows.iter().flatten() {
            if !(x.is_finite() && *x >= 0.0) {
                return bad(format!("`{}` has flow {x}", req.id));
            }
            if p.links().iter().any(|l| l.0 >= topology.link_count())
                || !topology.is_simple_path(p)
                || topology.path_endpoints(p) != Some((req.src, req.dst))
            {
                return bad(format!(
                    "`{}` holds a path that does not join its endpoints",
                    req.id
                ));
            }
        }
    }
    let loads = channel_loads(topology, committed.flows.iter().flatten());
    let mut residual = Vec::with_capacity(capacities.len());
    for (c, (&cap, &load)) in capacities.iter().zip(&loads).enumerate() {
        if load > cap * (1.0 + CAPACITY_RTOL) + f64::MIN_POSITIVE {
            let name = &topology
                .link(topology.channel(crate::topology::ChannelId(c)).links[0])
                .name;
            return bad(format!(
                "channel of `{name}` carries {load} over capacity {cap}"
            ));
        }
        let left = cap - load;
        residual.push(if left > cap * CAPACITY_RTOL {
            left
        } else {
            0.0
        });
    }
    Ok(residual)
}
