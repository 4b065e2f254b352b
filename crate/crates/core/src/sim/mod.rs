//! Event-driven replay of a set of migrations under a planner.
//!
//! Fluid model: a migration in pre-copy drains its memory at `l − r`; once
//! `m` bytes are drained it enters stop-and-copy, holding `l` for
//! `v_thd / l + t_r` seconds, then finishes. The planner is consulted after
//! every batch of simultaneous events.

mod planner;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::BaselineError;
use crate::fpta::{channel_loads, PathFlows, SolverError, CAPACITY_RTOL};
use crate::model::{downtime, ModelParams};
use crate::oracle::OracleError;
use crate::request::{validate_requests, MigrationRequest, RequestError};
use crate::topology::NetworkTopology;

pub use planner::{
    BatchPlanner, FixedBatches, FptaPlanner, OptimalPlanner, Planner, PlannerKind, ReplanContext,
    UnknownPlanner,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error("planner failed: {0}")]
    Solver(#[from] SolverError),
    #[error("planner failed: {0}")]
    Oracle(#[from] OracleError),
    #[error("planner failed: {0}")]
    Baseline(#[from] BaselineError),
    #[error("planner broke an invariant at t={time}s: {detail}")]
    Invariant { time: f64, detail: String },
    #[error("no progress possible at t={time}s; waiting: {waiting:?}")]
    Stalled { time: f64, waiting: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Arrival,
    Start,
    Rate,
    PrecopyEnd,
    Done,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Start => "start",
            EventKind::Rate => "rate",
            EventKind::PrecopyEnd => "precopy-end",
            EventKind::Done => "done",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub id: String,
    /// Bandwidth in effect after the event, bytes/second.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationOutcome {
    pub id: String,
    pub arrival: f64,
    pub start: f64,
    pub precopy_end: f64,
    pub done: f64,
    /// `done − start`.
    pub migration_time: f64,
    pub downtime: f64,
    /// Bandwidth held through stop-and-copy.
    pub final_bandwidth: f64,
}

/// One step of the net-rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveStep {
    pub t_start: f64,
    pub t_end: f64,
    pub net_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub planner: PlannerKind,
    pub makespan: f64,
    pub migrations: Vec<MigrationOutcome>,
    pub events: Vec<Event>,
    pub curve: Vec<CurveStep>,
    pub replans: usize,
    /// Wall-clock seconds spent inside the planner.
    #[serde(skip)]
    pub plan_compute_s: f64,
}

impl SimulationResult {
    /// `∫ net rate dt`, summed exactly over the steps.
    pub fn net_rate_integral(&self) -> f64 {
        net_rate_integral(&self.curve)
    }

    pub fn mean_downtime(&self) -> f64 {
        if self.migrations.is_empty() {
            return 0.0;
        }
        self.migrations.iter().map(|m| m.downtime).sum::<f64>() / self.migrations.len() as f64
    }

    pub fn max_downtime(&self) -> f64 {
        self.migrations
            .iter()
            .map(|m| m.downtime)
            .fold(0.0, f64::max)
    }
}

pub fn net_rate_integral(curve: &[CurveStep]) -> f64 {
    curve
        .iter()
        .map(|s| s.net_rate * (s.t_end - s.t_start))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    /// Not yet arrived, or waiting for the planner.
    Pending,
    Migrating {
        flows: PathFlows,
        drained: f64,
    },
    Stopping {
        flows: PathFlows,
        until: f64,
    },
    Done,
}

fn rate(flows: &PathFlows) -> f64 {
    flows.values().sum()
}

/// Two times closer than this are the same event.
fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Runs the migrations to completion.
pub fn run(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
    params: &ModelParams,
    planner: &mut dyn Planner,
) -> Result<SimulationResult, SimError> {
    validate_requests(requests)?;
    let n = requests.len();
    let mut state = vec![State::Pending; n];
    let mut arrived = vec![false; n];
    let mut outcome: Vec<Option<MigrationOutcome>> = vec![None; n];
    let mut start = vec![0.0; n];
    let mut precopy_end = vec![0.0; n];
    let mut events = Vec::new();
    let mut curve = Vec::new();
    let mut replans = 0;
    let mut compute = 0.0;
    let caps = topology.channel_capacities();
    let mut now = 0.0f64;

    loop {
        // completions first, then arrivals, each in request order
        for k in 0..n {
            if let State::Stopping { flows, until } = &state[k] {
                if same_time(*until, now) {
                    let l = rate(flows);
                    events.push(Event {
                        time: now,
                        kind: EventKind::Done,
                        id: requests[k].id.clone(),
                        bandwidth: 0.0,
                    });
                    outcome[k] = Some(MigrationOutcome {
                        id: requests[k].id.clone(),
                        arrival: requests[k].arrival,
                        start: start[k],
                        precopy_end: precopy_end[k],
                        done: now,
                        migration_time: now - start[k],
                        downtime: downtime(params.v_thd, l, params.t_r),
                        final_bandwidth: l,
                    });
                    state[k] = State::Done;
                }
            }
        }
        for k in 0..n {
            if let State::Migrating { flows, drained } = &state[k] {
                let req = &requests[k];
                let left = (req.memory - drained) / (rate(flows) - req.dirty_rate);
                if left <= 0.0 || same_time(now + left, now) {
                    let l = rate(flows);
                    precopy_end[k] = now;
                    events.push(Event {
                        time: now,
                        kind: EventKind::PrecopyEnd,
                        id: req.id.clone(),
                        bandwidth: l,
                    });
                    let until = now + downtime(params.v_thd, l, params.t_r);
                    state[k] = State::Stopping {
                        flows: flows.clone(),
                        until,
                    };
                }
            }
        }
        for k in 0..n {
            if !arrived[k] && same_time(requests[k].arrival, now)
                || !arrived[k] && requests[k].arrival < now
            {
                arrived[k] = true;
                events.push(Event {
                    time: now,
                    kind: EventKind::Arrival,
                    id: requests[k].id.clone(),
                    bandwidth: 0.0,
                });
            }
        }

        // replan
        let waiting: Vec<bool> = (0..n)
            .map(|k| arrived[k] && state[k] == State::Pending)
            .collect();
        let migrating: Vec<Option<PathFlows>> = state
            .iter()
            .map(|s| match s {
                State::Migrating { flows, .. } => Some(flows.clone()),
                _ => None,
            })
            .collect();
        let stopping: Vec<Option<PathFlows>> = state
            .iter()
            .map(|s| match s {
                State::Stopping { flows, .. } => Some(flows.clone()),
                _ => None,
            })
            .collect();
        if waiting.iter().any(|w| *w) || migrating.iter().any(Option::is_some) {
            let ctx = ReplanContext {
                topology,
                requests,
                waiting: &waiting,
                migrating: &migrating,
                stopping: &stopping,
            };
            let clock = std::time::Instant::now();
            let next = planner.replan(&ctx)?;
            compute += clock.elapsed().as_secs_f64();
            replans += 1;
            apply_plan(
                now,
                requests,
                &caps,
                topology,
                &mut state,
                &waiting,
                &stopping,
                next,
                &mut start,
                &mut events,
            )?;
        }

        // next event time
        let mut next_time = f64::INFINITY;
        for k in 0..n {
            let t = match &state[k] {
                State::Pending if !arrived[k] => requests[k].arrival,
                State::Migrating { flows, drained } => {
                    now + (requests[k].memory - drained) / (rate(flows) - requests[k].dirty_rate)
                }
                State::Stopping { until, .. } => *until,
                _ => continue,
            };
            next_time = next_time.min(t);
        }
        if !next_time.is_finite() {
            let waiting: Vec<String> = (0..n)
                .filter(|&k| state[k] == State::Pending)
                .map(|k| requests[k].id.clone())
                .collect();
            if waiting.is_empty() {
                break;
            }
            return Err(SimError::Stalled { time: now, waiting });
        }

        // advance the fluid
        let dt = next_time - now;
        let mut net = 0.0;
        for (k, s) in state.iter_mut().enumerate() {
            if let State::Migrating { flows, drained } = s {
                let r = rate(flows) - requests[k].dirty_rate;
                *drained += r * dt;
                net += r;
            }
        }
        if dt > 0.0 {
            curve.push(CurveStep {
                t_start: now,
                t_end: next_time,
                net_rate: net,
            });
        }
        now = next_time;
    }

    let migrations: Vec<MigrationOutcome> = outcome
        .into_iter()
        .map(|o| o.expect("every migration finished"))
        .collect();
    let makespan = migrations.iter().map(|m| m.done).fold(0.0, f64::max);
    Ok(SimulationResult {
        planner: planner.kind(),
        makespan,
        migrations,
        events,
        curve,
        replans,
        plan_compute_s: compute,
    })
}

/// Checks the planner output against the replan contract and applies it.
#[allow(clippy::too_many_arguments)]
fn apply_plan(
    now: f64,
    requests: &[MigrationRequest],
    caps: &[f64],
    topology: &NetworkTopology,
    state: &mut [State],
    waiting: &[bool],
    stopping: &[Option<PathFlows>],
    next: Vec<Option<PathFlows>>,
    start: &mut [f64],
    events: &mut Vec<Event>,
) -> Result<(), SimError> {
    let broken = |detail: String| Err(SimError::Invariant { time: now, detail });
    if next.len() != requests.len() {
        return broken(format!(
            "plan covers {} of {} requests",
            next.len(),
            requests.len()
        ));
    }
    for (k, plan) in next.iter().enumerate() {
        let req = &requests[k];
        match (&state[k], plan) {
            (State::Migrating { flows, .. }, Some(new)) => {
                let (old, l) = (rate(flows), rate(new));
                if l < old * (1.0 - 1e-12) {
                    return broken(format!("`{}` bandwidth fell from {old} to {l}", req.id));
                }
            }
            (State::Migrating { .. }, None) => return broken(format!("`{}` was stopped", req.id)),
            (_, Some(new)) if !waiting[k] => {
                return broken(format!(
                    "`{}` is not waiting but was given {} B/s",
                    req.id,
                    rate(new)
                ));
            }
            (_, Some(new)) if rate(new) <= req.dirty_rate => {
                return broken(format!(
                    "`{}` started at {} B/s, not above its dirty rate",
                    req.id,
                    rate(new)
                ));
            }
            _ => {}
        }
        if let Some(new) = plan {
            for p in new.keys() {
                if !topology.is_simple_path(p)
                    || topology.path_endpoints(p) != Some((req.src, req.dst))
                {
                    return broken(format!(
                        "`{}` routed on a path that does not join its endpoints",
                        req.id
                    ));
                }
            }
        }
    }
    let loads = channel_loads(topology, next.iter().chain(stopping).flatten());
    for (c, (l, cap)) in loads.iter().zip(caps).enumerate() {
        if *l > cap * (1.0 + CAPACITY_RTOL) {
            let name = &topology.link(topology.channels()[c].links[0]).name;
            return broken(format!("channel of `{name}` loaded to {l} over {cap}"));
        }
    }
    for (k, plan) in next.into_iter().enumerate() {
        let Some(new) = plan else { continue };
        let l = rate(&new);
        match &mut state[k] {
            State::Migrating { flows, .. } => {
                if l != rate(flows) {
                    events.push(Event {
                        time: now,
                        kind: EventKind::Rate,
                        id: requests[k].id.clone(),
                        bandwidth: l,
                    });
                }
                *flows = new;
            }
            s => {
                start[k] = now;
                events.push(Event {
                    time: now,
                    kind: EventKind::Start,
                    id: requests[k].id.clone(),
                    bandwidth: l,
                });
                *s = State::Migrating {
                    flows: new,
                    drained: 0.0,
                };
            }
        }
    }
    Ok(())
}
