//! Planners the simulator can replan with.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{plan_grouping, plan_one_by_one, GroupingWeights, Schedule};
use crate::fpta::{
    channel_loads, solve_incremental_with_capacities, CommittedPlan, PathFlows, SolverConfig,
    CAPACITY_RTOL, ZERO_RATE,
};
use crate::maxflow::max_flow;
use crate::oracle::{solve_mip_exact_with, to_f64, OracleLimits};
use crate::request::MigrationRequest;
use crate::topology::{NetworkTopology, Path};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Fpta,
    Optimal,
    Grouping,
    OneByOne,
    Fixed,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] = [
        PlannerKind::Fpta,
        PlannerKind::Optimal,
        PlannerKind::Grouping,
        PlannerKind::OneByOne,
        PlannerKind::Fixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Fpta => "fpta",
            PlannerKind::Optimal => "optimal",
            PlannerKind::Grouping => "grouping",
            PlannerKind::OneByOne => "one-by-one",
            PlannerKind::Fixed => "fixed",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownPlanner(pub String);

impl fmt::Display for UnknownPlanner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = PlannerKind::ALL.iter().map(|p| p.name()).collect();
        write!(
            f,
            "unknown planner `{}` (valid: {})",
            self.0,
            names.join(", ")
        )
    }
}

impl std::error::Error for UnknownPlanner {}

impl FromStr for PlannerKind {
    type Err = UnknownPlanner;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPlanner(s.to_string()))
    }
}

/// What the planner sees at a replan.
pub struct ReplanContext<'a> {
    pub topology: &'a NetworkTopology,
    pub requests: &'a [MigrationRequest],
    /// Arrived and not yet started.
    pub waiting: &'a [bool],
    /// Flows of migrations still in pre-copy; these may only grow.
    pub migrating: &'a [Option<PathFlows>],
    /// Flows held by migrations in stop-and-copy; fixed until they finish.
    pub stopping: &'a [Option<PathFlows>],
}

impl ReplanContext<'_> {
    fn idle(&self) -> bool {
        self.migrating
            .iter()
            .chain(self.stopping)
            .all(Option::is_none)
    }

    /// Capacities left for pre-copy traffic.
    fn capacities_after_stopping(&self) -> Vec<f64> {
        let held = channel_loads(self.topology, self.stopping.iter().flatten());
        self.topology
            .channel_capacities()
            .iter()
            .zip(held)
            .map(|(c, h)| (c - h).max(0.0))
            .collect()
    }
}

/// Decides, at every event, the flows of every migration in pre-copy.
pub trait Planner {
    fn kind(&self) -> PlannerKind;

    /// Returns flows for every request: `Some` for migrations that should be
    /// in pre-copy after this replan (already running ones included).
    fn replan(&mut self, ctx: &ReplanContext<'_>) -> Result<Vec<Option<PathFlows>>, SimError>;
}

/// Restrict the request list to `keep`, returning the sub-list and the
/// original indices.
fn subset(
    requests: &[MigrationRequest],
    keep: impl Fn(usize) -> bool,
) -> (Vec<MigrationRequest>, Vec<usize>) {
    let idx: Vec<usize> = (0..requests.len()).filter(|&k| keep(k)).collect();
    (idx.iter().map(|&k| requests[k].clone()).collect(), idx)
}

pub struct FptaPlanner {
    pub config: SolverConfig,
}

impl Planner for FptaPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Fpta
    }

    fn replan(&mut self, ctx: &ReplanContext<'_>) -> Result<Vec<Option<PathFlows>>, SimError> {
        let (reqs, idx) = subset(ctx.requests, |k| {
            ctx.waiting[k] || ctx.migrating[k].is_some()
        });
        let mut out: Vec<Option<PathFlows>> = ctx.migrating.to_vec();
        if reqs.is_empty() {
            return Ok(out);
        }
        // a commitment may overshoot the after-stopping residual by float
        // dust measured against the full link; lift the residual to cover it
        let full = ctx.topology.channel_capacities();
        let running = channel_loads(ctx.topology, ctx.migrating.iter().flatten());
        let caps: Vec<f64> = ctx
            .capacities_after_stopping()
            .into_iter()
            .zip(running)
            .zip(full)
            .map(|((c, load), cap)| {
                if load > c && load <= c + cap * CAPACITY_RTOL {
                    load
                } else {
                    c
                }
            })
            .collect();
        let committed = CommittedPlan {
            flows: idx.iter().map(|&k| ctx.migrating[k].clone()).collect(),
        };
        let plan = solve_incremental_with_capacities(
            ctx.topology,
            &caps,
            &reqs,
            &committed,
            &self.config,
        )?;
        for (i, &k) in idx.iter().enumerate() {
            if plan.started[i] {
                out[k] = Some(plan.flows[i].clone());
            }
        }
        refill(ctx, &mut out, self.config.theta);
        Ok(out)
    }
}

/// Capacity the plan leaves unused, with near-empty channels closed.
pub(crate) fn leftover(ctx: &ReplanContext<'_>, plan: &[Option<PathFlows>]) -> Vec<f64> {
    let held = channel_loads(ctx.topology, ctx.stopping.iter().chain(plan).flatten());
    ctx.topology
        .channel_capacities()
        .iter()
        .zip(held)
        .map(|(c, h)| {
            if c - h > c * CAPACITY_RTOL {
                c - h
            } else {
                0.0
            }
        })
        .collect()
}

/// Starts, in request order, every still-waiting migration whose max flow
/// on the leftover capacity clears the start filter. The approximation
/// divides its flow down and the filter releases what it had routed for
/// rejected requests, so capacity a waiting migration could use may remain.
fn refill(ctx: &ReplanContext<'_>, out: &mut [Option<PathFlows>], theta: f64) {
    let mut caps = leftover(ctx, out);
    for (k, req) in ctx.requests.iter().enumerate() {
        if !ctx.waiting[k] || out[k].is_some() {
            continue;
        }
        let flow = max_flow(ctx.topology, &caps, req.src, req.dst);
        if flow.value <= ((1.0 + theta) * req.dirty_rate).max(ZERO_RATE) {
            continue;
        }
        let mut flows = PathFlows::new();
        for (p, x) in flow.paths {
            *flows.entry(p).or_insert(0.0) += x;
        }
        out[k] = Some(flows);
        caps = leftover(ctx, out);
    }
}

/// Exact MIP on the residual network, for small instances.
pub struct OptimalPlanner {
    pub theta: f64,
    pub limits: OracleLimits,
}

impl Planner for OptimalPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Optimal
    }

    fn replan(&mut self, ctx: &ReplanContext<'_>) -> Result<Vec<Option<PathFlows>>, SimError> {
        let (reqs, idx) = subset(ctx.requests, |k| {
            ctx.waiting[k] || ctx.migrating[k].is_some()
        });
        let mut out: Vec<Option<PathFlows>> = ctx.migrating.to_vec();
        if reqs.is_empty() {
            return Ok(out);
        }
        let held = channel_loads(
            ctx.topology,
            ctx.stopping.iter().chain(ctx.migrating).flatten(),
        );
        let caps: Vec<f64> = ctx
            .topology
            .channel_capacities()
            .iter()
            .zip(held)
            .map(|(c, h)| (c - h).max(0.0))
            .collect();
        let forced: Vec<bool> = idx.iter().map(|&k| ctx.migrating[k].is_some()).collect();
        let exact = solve_mip_exact_with(ctx.topology, &caps, &reqs, &forced, &self.limits)?;
        for (i, &k) in idx.iter().enumerate() {
            if !exact.started[i] {
                continue;
            }
            let mut flows = ctx.migrating[k].clone().unwrap_or_default();
            let extra: f64 = exact.flows[i].iter().map(|(_, x)| to_f64(x)).sum();
            if !forced[i] && extra <= (1.0 + self.theta) * reqs[i].dirty_rate {
                continue;
            }
            for (p, x) in &exact.flows[i] {
                *flows.entry(p.clone()).or_insert(0.0) += to_f64(x);
            }
            out[k] = Some(flows);
        }
        Ok(out)
    }
}

/// Request indices per batch, each optionally pinned to a path.
pub type FixedBatches = Vec<Vec<(usize, Option<Path>)>>;

/// Runs a precomputed sequence of batches; the next batch starts only once
/// the network is idle. Requests that arrive meanwhile are planned when the
/// queue runs dry.
pub struct BatchPlanner {
    kind: PlannerKind,
    weights: GroupingWeights,
    fixed: Option<FixedBatches>,
    queue: VecDeque<(Vec<usize>, Vec<PathFlows>)>,
}

impl BatchPlanner {
    pub fn grouping(weights: GroupingWeights) -> Self {
        Self::new(PlannerKind::Grouping, weights, None)
    }

    pub fn one_by_one() -> Self {
        Self::new(PlannerKind::OneByOne, GroupingWeights::default(), None)
    }

    /// Batches given by request index, optionally pinned to a path.
    pub fn fixed(batches: FixedBatches) -> Self {
        Self::new(
            PlannerKind::Fixed,
            GroupingWeights::default(),
            Some(batches),
        )
    }

    fn new(kind: PlannerKind, weights: GroupingWeights, fixed: Option<FixedBatches>) -> Self {
        Self {
            kind,
            weights,
            fixed,
            queue: VecDeque::new(),
        }
    }

    fn refill(&mut self, ctx: &ReplanContext<'_>) -> Result<(), SimError> {
        let (reqs, idx) = subset(ctx.requests, |k| ctx.waiting[k]);
        if reqs.is_empty() {
            return Ok(());
        }
        let schedule = match self.kind {
            PlannerKind::Grouping => plan_grouping(ctx.topology, &reqs, &self.weights)?,
            PlannerKind::OneByOne => plan_one_by_one(ctx.topology, &reqs)?,
            PlannerKind::Fixed => {
                // keep the listed entries that are waiting, in listed order
                let local: Vec<Vec<(usize, Option<Path>)>> = self
                    .fixed
                    .as_ref()
                    .expect("fixed planner has batches")
                    .iter()
                    .map(|b| {
                        b.iter()
                            .filter_map(|(k, p)| {
                                idx.iter().position(|i| i == k).map(|i| (i, p.clone()))
                            })
                            .collect::<Vec<_>>()
                    })
                    .filter(|b: &Vec<_>| !b.is_empty())
                    .collect();
                Schedule::from_designated(ctx.topology, &reqs, &local)?
            }
            _ => unreachable!("not a batch planner"),
        };
        for b in schedule.batches {
            let members = b.members.iter().map(|&i| idx[i]).collect();
            self.queue.push_back((members, b.flows));
        }
        Ok(())
    }
}

impl Planner for BatchPlanner {
    fn kind(&self) -> PlannerKind {
        self.kind
    }

    fn replan(&mut self, ctx: &ReplanContext<'_>) -> Result<Vec<Option<PathFlows>>, SimError> {
        let mut out: Vec<Option<PathFlows>> = ctx.migrating.to_vec();
        if !ctx.idle() {
            return Ok(out);
        }
        if self.queue.is_empty() {
            self.refill(ctx)?;
        }
        if let Some((members, flows)) = self.queue.pop_front() {
            for (k, f) in members.into_iter().zip(flows) {
                out[k] = Some(f);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in PlannerKind::ALL {
            assert_eq!(p.name().parse::<PlannerKind>().unwrap(), p);
        }
        let err = "greedy".parse::<PlannerKind>().unwrap_err().to_string();
        assert!(err.contains("one-by-one"), "{err}");
    }
}
