//! Scenario documents: a topology, migrations, a planner and its settings.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::GroupingWeights;
use crate::fpta::{self, PlanSolution, SolverConfig, SolverError};
use crate::gen::{workload, workload_on, WorkloadSpec};
use crate::model::{ModelError, ModelParams};
use crate::oracle::OracleLimits;
use crate::request::{validate_requests, MigrationRequest, RequestError};
use crate::sim::{
    self, BatchPlanner, FptaPlanner, OptimalPlanner, Planner, PlannerKind, SimError,
    SimulationResult,
};
use crate::topology::{
    builtin_b4, builtin_fattree, builtin_two_switch, fattree_hosts, load_topology, FatTreeCaps,
    NetworkTopology, Path, TopologyDocument, TopologyError,
};
use crate::units::GB;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown builtin topology `{0}` (valid: builtin:two-switch, builtin:b4, builtin:fattree:<pods>[:<lo>-<hi>])")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error(transparent)]
    Config(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("background load on unknown link `{0}`")]
    UnknownLink(String),
    #[error("batches name unknown request `{0}`")]
    UnknownBatchEntry(String),
    #[error("batches list `{0}` more than once")]
    RepeatedBatchEntry(String),
    #[error("the fixed planner needs a `batches` list")]
    MissingBatches,
}

/// Built-in name, file path, or inline document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologyRef {
    Named(String),
    Inline(TopologyDocument),
}

/// Constant traffic occupying part of a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundLoad {
    pub link: String,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSpec {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub memory_bytes: f64,
    pub dirty_rate_bps: f64,
    #[serde(default)]
    pub arrival_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchEntry {
    pub id: String,
    /// Node names along the route; the fewest-hop path when absent.
    #[serde(default)]
    pub path: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub topology: TopologyRef,
    #[serde(default)]
    pub background: Vec<BackgroundLoad>,
    #[serde(default)]
    pub requests: Vec<RequestSpec>,
    /// Generated migrations, appended after `requests`.
    #[serde(default)]
    pub workload: Option<WorkloadSpec>,
    #[serde(default = "default_planner")]
    pub planner: PlannerKind,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub v_thd_bytes: Option<f64>,
    #[serde(default)]
    pub t_r_s: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Batches for the `fixed` planner, by request id.
    #[serde(default)]
    pub batches: Vec<Vec<BatchEntry>>,
    #[serde(default)]
    pub grouping_weights: Option<GroupingWeights>,
}

fn default_planner() -> PlannerKind {
    PlannerKind::Fpta
}

/// Settings that override the document.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
    pub planner: Option<PlannerKind>,
}

/// A scenario with everything resolved and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub requests: Vec<MigrationRequest>,
    pub planner: PlannerKind,
    pub config: SolverConfig,
    pub params: ModelParams,
    pub seed: u64,
    pub batches: Vec<Vec<(usize, Option<Path>)>>,
    pub weights: GroupingWeights,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves references; relative topology paths are taken from `base`.
    pub fn resolve(
        &self,
        base: Option<&FsPath>,
        overrides: &Overrides,
    ) -> Result<Scenario, ScenarioError> {
        let seed = overrides.seed.or(self.seed).unwrap_or(0);
        let defaults = SolverConfig::default();
        let config = SolverConfig::new(
            overrides
                .epsilon
                .or(self.epsilon)
                .unwrap_or(defaults.epsilon),
            overrides.theta.or(self.theta).unwrap_or(defaults.theta),
        )?;
        let model_defaults = ModelParams::default();
        let params = ModelParams::new(
            self.v_thd_bytes.unwrap_or(model_defaults.v_thd),
            self.t_r_s.unwrap_or(model_defaults.t_r),
        )?;

        let (base_topology, hosts) = resolve_topology(&self.topology, base, seed)?;
        let topology = apply_background(&base_topology, &self.background)?;

        let mut requests = self
            .requests
            .iter()
            .map(|r| {
                MigrationRequest::new(
                    &topology,
                    &r.id,
                    &r.src,
                    &r.dst,
                    r.memory_bytes,
                    r.dirty_rate_bps,
                )
                .map(|m| m.arriving_at(r.arrival_s))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(spec) = &self.workload {
            let generated = match &hosts {
                Some(h) => {
                    let ids = h
                        .iter()
                        .map(|n| topology.node(n))
                        .collect::<Result<Vec<_>, _>>()?;
                    workload_on(&ids, spec, seed)
                }
                None => workload(&topology, spec, seed),
            };
            requests.extend(generated);
        }
        validate_requests(&requests)?;

        let mut batches = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for batch in &self.batches {
            let mut out = Vec::new();
            for entry in batch {
                let k = requests
                    .iter()
                    .position(|r| r.id == entry.id)
                    .ok_or_else(|| ScenarioError::UnknownBatchEntry(entry.id.clone()))?;
                if !seen.insert(k) {
                    return Err(ScenarioError::RepeatedBatchEntry(entry.id.clone()));
                }
                let path = match &entry.path {
                    Some(names) => {
                        let names: Vec<&str> = names.iter().map(String::as_str).collect();
                        Some(topology.path_from_nodes(&names)?.ok_or_else(|| {
                            TopologyError::Parse(format!("no link along {}", names.join("->")))
                        })?)
                    }
                    None => None,
                };
                out.push((k, path));
            }
            batches.push(out);
        }
        let planner = overrides.planner.unwrap_or(self.planner);
        if planner == PlannerKind::Fixed && batches.is_empty() && !requests.is_empty() {
            return Err(ScenarioError::MissingBatches);
        }
        // requests missing from the batch list run last, one batch each
        if planner == PlannerKind::Fixed {
            for k in 0..requests.len() {
                if !seen.contains(&k) {
                    batches.push(vec![(k, None)]);
                }
            }
        }
        Ok(Scenario {
            topology,
            requests,
            planner,
            config,
            params,
            seed,
            batches,
            weights: self.grouping_weights.unwrap_or_default(),
        })
    }
}

/// Returns the topology and, for fat-trees, the host names usable as
/// workload endpoints.
fn resolve_topology(
    reference: &TopologyRef,
    base: Option<&FsPath>,
    seed: u64,
) -> Result<(NetworkTopology, Option<Vec<String>>), ScenarioError> {
    let name = match reference {
        TopologyRef::Inline(doc) => return Ok((doc.into_topology()?, None)),
        TopologyRef::Named(name) => name,
    };
    let Some(builtin) = name.strip_prefix("builtin:") else {
        let path = match base {
            Some(b) => b.join(name),
            None => PathBuf::from(name),
        };
        let text =
            std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source })?;
        return Ok((load_topology(&text)?, None));
    };
    let unknown = || ScenarioError::UnknownBuiltin(name.clone());
    let parts: Vec<&str> = builtin.split(':').collect();
    match parts.as_slice() {
        ["two-switch"] => Ok((builtin_two_switch(), None)),
        ["b4"] => Ok((builtin_b4(), None)),
        ["fattree", pods, rest @ ..] => {
            let pods: usize = pods.parse().map_err(|_| unknown())?;
            let caps = match rest {
                [] => FatTreeCaps::Fixed(GB),
                [range] => {
                    let (lo, hi) = range.split_once('-').ok_or_else(unknown)?;
                    let lo: f64 = lo.parse().map_err(|_| unknown())?;
                    let hi: f64 = hi.parse().map_err(|_| unknown())?;
                    FatTreeCaps::Uniform {
                        lo: lo * GB,
                        hi: hi * GB,
                        seed,
                    }
                }
                _ => return Err(unknown()),
            };
            let t = builtin_fattree(pods, caps)?;
            let hosts = fattree_hosts(&t);
            Ok((t, Some(hosts)))
        }
        _ => Err(unknown()),
    }
}

fn apply_background(
    topology: &NetworkTopology,
    loads: &[BackgroundLoad],
) -> Result<NetworkTopology, ScenarioError> {
    if loads.is_empty() {
        return Ok(topology.clone());
    }
    let mut caps = topology.channel_capacities();
    for bg in loads {
        let link = topology
            .link_by_name(&bg.link)
            .ok_or_else(|| ScenarioError::UnknownLink(bg.link.clone()))?;
        if !(bg.rate_bps.is_finite() && bg.rate_bps >= 0.0) {
            return Err(TopologyError::InvalidCapacity {
                link: bg.link.clone(),
                capacity: bg.rate_bps,
            }
            .into());
        }
        caps[topology.link(link).channel.0] -= bg.rate_bps;
    }
    Ok(topology.with_channel_capacities(&caps))
}

impl Scenario {
    pub fn make_planner(&self, kind: PlannerKind) -> Box<dyn Planner> {
        match kind {
            PlannerKind::Fpta => Box::new(FptaPlanner {
                config: self.config,
            }),
            PlannerKind::Optimal => Box::new(OptimalPlanner {
                theta: self.config.theta,
                limits: OracleLimits::default(),
            }),
            PlannerKind::Grouping => Box::new(BatchPlanner::grouping(self.weights)),
            PlannerKind::OneByOne => Box::new(BatchPlanner::one_by_one()),
            PlannerKind::Fixed => Box::new(BatchPlanner::fixed(self.batches.clone())),
        }
    }

    pub fn simulate(&self) -> Result<SimulationResult, SimError> {
        self.simulate_with(self.planner)
    }

    pub fn simulate_with(&self, kind: PlannerKind) -> Result<SimulationResult, SimError> {
        let mut planner = self.make_planner(kind);
        sim::run(
            &self.topology,
            &self.requests,
            &self.params,
            planner.as_mut(),
        )
    }

    /// One plan for every request at once, ignoring arrival times.
    pub fn plan(&self) -> Result<PlanSolution, SolverError> {
        fpta::solve(&self.topology, &self.requests, &self.config)
    }
}

/// One row of a planner comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub planner: PlannerKind,
    pub seed: u64,
    pub makespan_s: f64,
    pub mean_downtime_s: f64,
    pub max_downtime_s: f64,
    pub plan_compute_s: f64,
}

/// Simulates the scenario under each seed and planner, seeds outermost.
pub fn compare(
    spec: &ScenarioSpec,
    base: Option<&FsPath>,
    overrides: &Overrides,
    planners: &[PlannerKind],
    seeds: &[u64],
) -> Result<Vec<CompareRow>, CompareError> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let scenario = spec.resolve(
            base,
            &Overrides {
                seed: Some(seed),
                ..*overrides
            },
        )?;
        for &planner in planners {
            let r = scenario
                .simulate_with(planner)
                .map_err(|source| CompareError::Run {
                    planner,
                    seed,
                    source,
                })?;
            rows.push(CompareRow {
                planner,
                seed,
                makespan_s: r.makespan,
                mean_downtime_s: r.mean_downtime(),
                max_downtime_s: r.max_downtime(),
                plan_compute_s: r.plan_compute_s,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{planner} on seed {seed}: {source}")]
    Run {
        planner: PlannerKind,
        seed: u64,
        source: SimError,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SWITCH: &str = r#"{
        "topology": "builtin:two-switch",
        "requests": [
            {"id": "V1", "src": "H1", "dst": "H2", "memory_bytes": 5e8, "dirty_rate_bps": 0},
            {"id": "V2", "src": "H2", "dst": "H3", "memory_bytes": 5e8, "dirty_rate_bps": 0},
            {"id": "V4", "src": "H3", "dst": "H4", "memory_bytes": 5e8, "dirty_rate_bps": 0}
        ],
        "planner": "optimal",
        "v_thd_bytes": 1,
        "t_r_s": 0,
        "batches": [
            [{"id": "V1", "path": ["H1", "S1", "H2"]}, {"id": "V2", "path": ["H2", "S2", "H3"]}],
            [{"id": "V4"}]
        ]
    }"#;

    #[test]
    fn two_switch_document() {
        let spec = ScenarioSpec::from_json(TWO_SWITCH).unwrap();
        let s = spec.resolve(None, &Overrides::default()).unwrap();
        assert_eq!(s.requests.len(), 3);
        assert_eq!(s.planner, PlannerKind::Optimal);
        assert!((s.simulate().unwrap().makespan - 7.5).abs() < 1e-6);
        let fixed = spec
            .resolve(
                None,
                &Overrides {
                    planner: Some(PlannerKind::Fixed),
                    ..Default::default()
                },
            )
            .unwrap();
        assert!((fixed.simulate().unwrap().makespan - 10.0).abs() < 1e-6);
    }

    #[test]
    fn defaults_and_overrides() {
        let spec = ScenarioSpec::from_json(r#"{"topology": "builtin:b4"}"#).unwrap();
        let s = spec.resolve(None, &Overrides::default()).unwrap();
        assert_eq!(s.planner, PlannerKind::Fpta);
        assert_eq!(s.config, SolverConfig::default());
        assert_eq!(s.params, ModelParams::default());
        let o = Overrides {
            epsilon: Some(0.2),
            theta: Some(0.0),
            seed: Some(4),
            planner: None,
        };
        let s = spec.resolve(None, &o).unwrap();
        assert_eq!((s.config.epsilon, s.config.theta, s.seed), (0.2, 0.0, 4));
        assert!(matches!(
            spec.resolve(
                None,
                &Overrides {
                    epsilon: Some(0.9),
                    ..Default::default()
                }
            ),
            Err(ScenarioError::Config(SolverError::InvalidEpsilon(_)))
        ));
    }

    #[test]
    fn workload_and_seed() {
        let spec = ScenarioSpec::from_json(
            r#"{"topology": "builtin:b4", "workload": {"vms": 40, "total_memory_bytes": 203e9}}"#,
        )
        .unwrap();
        let a = spec
            .resolve(
                None,
                &Overrides {
                    seed: Some(1),
                    ..Default::default()
                },
            )
            .unwrap();
        let b = spec
            .resolve(
                None,
                &Overrides {
                    seed: Some(2),
                    ..Default::default()
                },
            )
            .unwrap();
        assert_eq!(a.requests.len(), 40);
        assert_ne!(a.requests, b.requests);
        let total: f64 = a.requests.iter().map(|r| r.memory).sum();
        assert!((total - 203e9).abs() < 1.0);
    }

    #[test]
    fn fattree_workload_uses_hosts() {
        let spec = ScenarioSpec::from_json(
            r#"{"topology": "builtin:fattree:4:1-10", "workload": {"vms": 10}}"#,
        )
        .unwrap();
        let s = spec.resolve(None, &Overrides::default()).unwrap();
        for r in &s.requests {
            assert!(s.topology.node_name(r.src).contains('h'));
            assert!(s.topology.node_name(r.dst).contains('h'));
        }
    }

    #[test]
    fn background_reduces_capacity() {
        let spec = ScenarioSpec::from_json(
            r#"{"topology": "builtin:two-switch", "background": [{"link": "H1-S1", "rate_bps": 4e7}]}"#,
        )
        .unwrap();
        let s = spec.resolve(None, &Overrides::default()).unwrap();
        let l = s.topology.link_by_name("H1-S1").unwrap();
        assert_eq!(s.topology.link_capacity(l), 6e7);
    }

    #[test]
    fn errors() {
        let bad = |text: &str| {
            ScenarioSpec::from_json(text).and_then(|s| s.resolve(None, &Overrides::default()))
        };
        assert!(matches!(bad("{"), Err(ScenarioError::Parse(_))));
        assert!(matches!(
            bad(r#"{"topology": "builtin:mesh"}"#),
            Err(ScenarioError::UnknownBuiltin(_))
        ));
        assert!(matches!(
            bad(r#"{"topology": "nowhere.json"}"#),
            Err(ScenarioError::Io { .. })
        ));
        assert!(matches!(
            bad(r#"{"topology": "builtin:b4", "colour": 1}"#),
            Err(ScenarioError::Parse(_))
        ));
        assert!(matches!(
            bad(
                r#"{"topology": "builtin:two-switch", "background": [{"link": "nope", "rate_bps": 1}]}"#
            ),
            Err(ScenarioError::UnknownLink(_))
        ));
        assert!(matches!(
            bad(
                r#"{"topology": "builtin:two-switch", "requests": [{"id": "a", "src": "H1", "dst": "H9", "memory_bytes": 1, "dirty_rate_bps": 0}]}"#
            ),
            Err(ScenarioError::Request(_))
        ));
        assert!(matches!(
            bad(r#"{"topology": "builtin:two-switch", "batches": [[{"id": "V9"}]]}"#),
            Err(ScenarioError::UnknownBatchEntry(_))
        ));
        assert!(matches!(
            bad(
                r#"{"topology": "builtin:two-switch", "planner": "fixed", "requests": [{"id": "a", "src": "H1", "dst": "H2", "memory_bytes": 1, "dirty_rate_bps": 0}]}"#
            ),
            Err(ScenarioError::MissingBatches)
        ));
    }

    #[test]
    fn compare_rows() {
        let spec = ScenarioSpec::from_json(TWO_SWITCH).unwrap();
        let planners = [
            PlannerKind::Fpta,
            PlannerKind::Grouping,
            PlannerKind::OneByOne,
        ];
        let rows = compare(&spec, None, &Overrides::default(), &planners, &[0]).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[1].makespan_s - 10.0).abs() < 1e-6);
        assert!((rows[2].makespan_s - 12.5).abs() < 1e-6);
        assert!(rows[0].makespan_s < rows[1].makespan_s);
        let again = compare(&spec, None, &Overrides::default(), &planners, &[0]).unwrap();
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!(
                (a.makespan_s, a.max_downtime_s),
                (b.makespan_s, b.max_downtime_s)
            );
        }
    }
}
