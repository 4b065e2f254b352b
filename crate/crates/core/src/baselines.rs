//! Comparison planners: strictly sequential migration, and conflict-free
//! groups run one after another.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fpta::{channel_loads, PathFlows, CAPACITY_RTOL};
use crate::maxflow::max_flow;
use crate::request::MigrationRequest;
use crate::topology::{NetworkTopology, Path};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("request `{0}` has no route between its endpoints")]
    Disconnected(String),
    #[error("request `{id}` gets {bandwidth} B/s, not above its dirty rate {dirty_rate} B/s")]
    NonConvergent {
        id: String,
        bandwidth: f64,
        dirty_rate: f64,
    },
    #[error("grouping weights must be non-negative and not both zero")]
    InvalidWeights,
    #[error("batch entry `{0}`: {1}")]
    InvalidBatch(String, String),
}

/// One batch: migrations that run together, with their flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    /// Request indices.
    pub members: Vec<usize>,
    pub flows: Vec<PathFlows>,
}

impl Batch {
    pub fn bandwidth(&self, i: usize) -> f64 {
        self.flows[i].values().sum()
    }
}

/// Batches executed strictly one after another.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub batches: Vec<Batch>,
}

impl Schedule {
    /// Batches from explicit member lists, each member on a given path or on
    /// its fewest-hop path. Members of a batch that share a channel split it
    /// evenly.
    pub fn from_designated(
        topology: &NetworkTopology,
        requests: &[MigrationRequest],
        batches: &[Vec<(usize, Option<Path>)>],
    ) -> Result<Self, BaselineError> {
        let mut out = Vec::new();
        for batch in batches {
            let mut members = Vec::new();
            let mut paths = Vec::new();
            for (k, path) in batch {
                let req = &requests[*k];
                let path = match path {
                    Some(p) => {
                        if !topology.is_simple_path(p)
                            || topology.path_endpoints(p) != Some((req.src, req.dst))
                        {
                            return Err(BaselineError::InvalidBatch(
                                req.id.clone(),
                                "path does not join the request's endpoints".into(),
                            ));
                        }
                        p.clone()
                    }
                    None => designated_path(topology, req)?,
                };
                members.push(*k);
                paths.push(path);
            }
            out.push(shared_batch(topology, requests, members, paths)?);
        }
        Ok(Self { batches: out })
    }

    /// Total time if every batch runs alone, each member taking
    /// `M / (l − r)`.
    pub fn fluid_makespan(&self, requests: &[MigrationRequest]) -> f64 {
        self.batches.iter().map(|b| batch_time(b, requests)).sum()
    }
}

/// Fewest-hop path with lexicographic tie-break.
pub fn designated_path(
    topology: &NetworkTopology,
    req: &MigrationRequest,
) -> Result<Path, BaselineError> {
    let unit = vec![1.0; topology.link_count()];
    topology
        .shortest_path(&unit, req.src, req.dst)
        .expect("unit weights are valid")
        .ok_or_else(|| BaselineError::Disconnected(req.id.clone()))
}

fn shared_batch(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
    members: Vec<usize>,
    paths: Vec<Path>,
) -> Result<Batch, BaselineError> {
    let mut users = vec![0usize; topology.channel_count()];
    for p in &paths {
        for l in p.links() {
            users[topology.link(*l).channel.0] += 1;
        }
    }
    let mut flows = Vec::new();
    for (k, p) in members.iter().zip(paths) {
        let share = p
            .links()
            .iter()
            .map(|l| {
                let ch = topology.link(*l).channel;
                topology.channel(ch).capacity / users[ch.0] as f64
            })
            .fold(f64::INFINITY, f64::min);
        check_convergent(&requests[*k], share)?;
        flows.push(PathFlows::from([(p, share)]));
    }
    let batch = Batch { members, flows };
    debug_assert!(channel_loads(topology, &batch.flows)
        .iter()
        .zip(topology.channel_capacities())
        .all(|(l, c)| *l <= c * (1.0 + CAPACITY_RTOL)));
    Ok(batch)
}

fn check_convergent(req: &MigrationRequest, bandwidth: f64) -> Result<(), BaselineError> {
    if bandwidth > req.dirty_rate {
        Ok(())
    } else {
        Err(BaselineError::NonConvergent {
            id: req.id.clone(),
            bandwidth,
            dirty_rate: req.dirty_rate,
        })
    }
}

fn batch_time(batch: &Batch, requests: &[MigrationRequest]) -> f64 {
    batch
        .members
        .iter()
        .enumerate()
        .map(|(i, &k)| requests[k].memory / (batch.bandwidth(i) - requests[k].dirty_rate))
        .fold(0.0, f64::max)
}

/// One migration at a time in request order, each with its full multipath
/// maximum flow.
pub fn plan_one_by_one(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
) -> Result<Schedule, BaselineError> {
    let caps = topology.channel_capacities();
    let mut batches = Vec::new();
    for (k, req) in requests.iter().enumerate() {
        let mf = max_flow(topology, &caps, req.src, req.dst);
        if mf.paths.is_empty() {
            return Err(BaselineError::Disconnected(req.id.clone()));
        }
        check_convergent(req, mf.value)?;
        batches.push(Batch {
            members: vec![k],
            flows: vec![mf.paths.into_iter().collect()],
        });
    }
    Ok(Schedule { batches })
}

/// Cost weights for ordering groups: `w_time·(group time in s) + w_count·(group size)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingWeights {
    pub w_time: f64,
    pub w_count: f64,
}

impl GroupingWeights {
    pub fn new(w_time: f64, w_count: f64) -> Result<Self, BaselineError> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(w_time) || !ok(w_count) || (w_time == 0.0 && w_count == 0.0) {
            return Err(BaselineError::InvalidWeights);
        }
        Ok(Self { w_time, w_count })
    }
}

impl Default for GroupingWeights {
    fn default() -> Self {
        Self {
            w_time: 1.0,
            w_count: 1.0,
        }
    }
}

/// Conflict-graph grouping. Each migration is pinned to its fewest-hop path;
/// two migrations conflict when those paths share a channel. A greedy
/// colouring (highest degree first, then request order) gives the groups,
/// which run in ascending cost order.
pub fn plan_grouping(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
    weights: &GroupingWeights,
) -> Result<Schedule, BaselineError> {
    let weights = GroupingWeights::new(weights.w_time, weights.w_count)?;
    let paths: Vec<Path> = requests
        .iter()
        .map(|r| designated_path(topology, r))
        .collect::<Result<_, _>>()?;
    let channels: Vec<Vec<usize>> = paths
        .iter()
        .map(|p| {
            let mut c: Vec<usize> = p
                .links()
                .iter()
                .map(|l| topology.link(*l).channel.0)
                .collect();
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect();
    let k = requests.len();
    let conflicts = |a: usize, b: usize| {
        channels[a]
            .iter()
            .any(|c| channels[b].binary_search(c).is_ok())
    };
    let adjacency: Vec<Vec<usize>> = (0..k)
        .map(|a| (0..k).filter(|&b| b != a && conflicts(a, b)).collect())
        .collect();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| adjacency[b].len().cmp(&adjacency[a].len()).then(a.cmp(&b)));
    let mut color = vec![usize::MAX; k];
    let mut colors = 0;
    for &v in &order {
        let used: Vec<usize> = adjacency[v].iter().map(|&u| color[u]).collect();
        let c = (0..)
            .find(|c| !used.contains(c))
            .expect("some colour is free");
        color[v] = c;
        colors = colors.max(c + 1);
    }

    let mut batches = Vec::new();
    for c in 0..colors {
        let members: Vec<usize> = (0..k).filter(|&v| color[v] == c).collect();
        let member_paths = members.iter().map(|&v| paths[v].clone()).collect();
        batches.push(shared_batch(topology, requests, members, member_paths)?);
    }
    let cost = |b: &Batch| {
        weights.w_time * batch_time(b, requests) + weights.w_count * b.members.len() as f64
    };
    // stable sort keeps colour order on equal cost
    batches.sort_by(|a, b| cost(a).total_cmp(&cost(b)));
    Ok(Schedule { batches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{builtin_two_switch, TopologyBuilder};
    use crate::units::MB;

    fn two_switch() -> (NetworkTopology, Vec<MigrationRequest>) {
        let t = builtin_two_switch();
        let reqs = vec![
            MigrationRequest::new(&t, "V1", "H1", "H2", 500.0 * MB, 0.0).unwrap(),
            MigrationRequest::new(&t, "V2", "H2", "H3", 500.0 * MB, 0.0).unwrap(),
            MigrationRequest::new(&t, "V4", "H3", "H4", 500.0 * MB, 0.0).unwrap(),
        ];
        (t, reqs)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn two_switch_one_by_one() {
        let (t, reqs) = two_switch();
        let s = plan_one_by_one(&t, &reqs).unwrap();
        let members: Vec<_> = s.batches.iter().map(|b| b.members.clone()).collect();
        assert_eq!(members, vec![vec![0], vec![1], vec![2]]);
        assert!(close(s.batches[1].bandwidth(0), 2e8));
        // 5 + 2.5 + 5
        assert!(close(s.fluid_makespan(&reqs), 12.5));
    }

    #[test]
    fn two_switch_grouping() {
        let (t, reqs) = two_switch();
        let s = plan_grouping(&t, &reqs, &GroupingWeights::default()).unwrap();
        let mut groups: Vec<_> = s.batches.iter().map(|b| b.members.clone()).collect();
        groups.sort();
        assert_eq!(groups, vec![vec![0, 2], vec![1]]);
        assert!(close(s.fluid_makespan(&reqs), 10.0));
        // V2 alone is cheaper (5 s + 1) than the pair (5 s + 2)
        assert_eq!(s.batches[0].members, vec![1]);
    }

    #[test]
    fn two_switch_forced_order() {
        let (t, reqs) = two_switch();
        let p1 = t.path_from_nodes(&["H1", "S1", "H2"]).unwrap();
        let p2 = t.path_from_nodes(&["H2", "S2", "H3"]).unwrap();
        let s = Schedule::from_designated(&t, &reqs, &[vec![(0, p1), (1, p2)], vec![(2, None)]])
            .unwrap();
        assert!(close(s.fluid_makespan(&reqs), 10.0));
    }

    #[test]
    fn forced_path_must_match_request() {
        let (t, reqs) = two_switch();
        let wrong = t.path_from_nodes(&["H3", "S2", "H4"]).unwrap();
        assert!(matches!(
            Schedule::from_designated(&t, &reqs, &[vec![(0, wrong)]]),
            Err(BaselineError::InvalidBatch(..))
        ));
    }

    #[test]
    fn shared_channel_in_forced_batch_is_split() {
        let (t, reqs) = two_switch();
        // V1 and V2 both on H2's link to S1
        let p1 = t.path_from_nodes(&["H1", "S1", "H2"]).unwrap();
        let p2 = t.path_from_nodes(&["H2", "S1", "H3"]).unwrap();
        let s = Schedule::from_designated(&t, &reqs, &[vec![(0, p1), (1, p2)]]).unwrap();
        assert!(close(s.batches[0].bandwidth(0), 5e7));
        assert!(close(s.batches[0].bandwidth(1), 5e7));
    }

    fn line(n: usize) -> NetworkTopology {
        let mut b = TopologyBuilder::new();
        for i in 0..n {
            b.node(format!("n{i}"));
        }
        for i in 0..n - 1 {
            b.link(
                format!("l{i}"),
                &format!("n{i}"),
                &format!("n{}", i + 1),
                1e8,
            );
        }
        b.build().unwrap()
    }

    #[test]
    fn disjoint_requests_form_one_group() {
        let t = line(5);
        let reqs: Vec<_> = (0..4)
            .map(|i| {
                MigrationRequest::new(
                    &t,
                    format!("v{i}"),
                    &format!("n{i}"),
                    &format!("n{}", i + 1),
                    1e9,
                    0.0,
                )
                .unwrap()
            })
            .collect();
        let s = plan_grouping(&t, &reqs, &GroupingWeights::default()).unwrap();
        assert_eq!(s.batches.len(), 1);
        assert_eq!(s.batches[0].members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn shared_link_degenerates_to_sequential() {
        let t = line(2);
        let reqs: Vec<_> = (0..3)
            .map(|i| MigrationRequest::new(&t, format!("v{i}"), "n0", "n1", 1e9, 0.0).unwrap())
            .collect();
        let s = plan_grouping(&t, &reqs, &GroupingWeights::default()).unwrap();
        assert_eq!(s.batches.len(), 3);
        assert!(s.batches.iter().all(|b| b.members.len() == 1));
        let o = plan_one_by_one(&t, &reqs).unwrap();
        assert!(close(s.fluid_makespan(&reqs), o.fluid_makespan(&reqs)));
    }

    #[test]
    fn errors() {
        let t = line(3);
        let back = MigrationRequest::new(&t, "v", "n2", "n0", 1e9, 0.0).unwrap();
        assert_eq!(
            plan_one_by_one(&t, std::slice::from_ref(&back)),
            Err(BaselineError::Disconnected("v".into()))
        );
        assert_eq!(
            plan_grouping(&t, &[back], &GroupingWeights::default()),
            Err(BaselineError::Disconnected("v".into()))
        );
        let hot = MigrationRequest::new(&t, "h", "n0", "n2", 1e9, 2e8).unwrap();
        assert!(matches!(
            plan_one_by_one(&t, &[hot]),
            Err(BaselineError::NonConvergent { .. })
        ));
        assert!(GroupingWeights::new(0.0, 0.0).is_err());
        assert!(GroupingWeights::new(-1.0, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn batches_are_feasible_and_cover_everything(
                edges in proptest::collection::vec((0usize..6, 0usize..6, 1u32..20), 6..16),
                pairs in proptest::collection::vec((0usize..6, 0usize..6), 1..8),
                wt in 0.0f64..3.0,
            ) {
                let mut b = TopologyBuilder::new();
                for i in 0..6 { b.node(format!("n{i}")); }
                for (i, (u, v, c)) in edges.iter().enumerate() {
                    if u != v {
                        b.bidirectional(format!("e{i}"), &format!("n{u}"), &format!("n{v}"), *c as f64 * 1e7, crate::topology::Duplex::Full);
                    }
                }
                let t = b.build().unwrap();
                let reqs: Vec<MigrationRequest> = pairs.iter().enumerate().filter(|(_, (s, d))| s != d).map(|(i, (s, d))| {
                    MigrationRequest { id: format!("v{i}"), src: crate::topology::NodeId(*s), dst: crate::topology::NodeId(*d), memory: 1e9, dirty_rate: 0.0, arrival: 0.0 }
                }).collect();
                let w = GroupingWeights::new(wt, 1.0).unwrap();
                for plan in [plan_grouping(&t, &reqs, &w), plan_one_by_one(&t, &reqs)] {
                    let Ok(s) = plan else { continue };
                    let mut seen: Vec<usize> = s.batches.iter().flat_map(|b| b.members.clone()).collect();
                    seen.sort_unstable();
                    prop_assert_eq!(seen, (0..reqs.len()).collect::<Vec<_>>());
                    for batch in &s.batches {
                        for (l, c) in channel_loads(&t, &batch.flows).iter().zip(t.channel_capacities()) {
                            prop_assert!(*l <= c * (1.0 + CAPACITY_RTOL));
                        }
                    }
                }
                // determinism
                prop_assert_eq!(plan_grouping(&t, &reqs, &w), plan_grouping(&t, &reqs, &w));
            }

            #[test]
            fn grouping_slices_stay_below_multipath_throughput(
                edges in proptest::collection::vec((0usize..6, 0usize..6, 1u32..20), 6..14),
                pairs in proptest::collection::vec((0usize..6, 0usize..6), 1..7),
            ) {
                let mut b = TopologyBuilder::new();
                for i in 0..6 { b.node(format!("n{i}")); }
                for (i, (u, v, c)) in edges.iter().enumerate() {
                    if u != v {
                        b.bidirectional(format!("e{i}"), &format!("n{u}"), &format!("n{v}"), *c as f64 * 1e7, crate::topology::Duplex::Full);
                    }
                }
                let t = b.build().unwrap();
                let reqs: Vec<MigrationRequest> = pairs.iter().enumerate().filter(|(_, (s, d))| s != d).map(|(i, (s, d))| {
                    MigrationRequest { id: format!("v{i}"), src: crate::topology::NodeId(*s), dst: crate::topology::NodeId(*d), memory: 1e9, dirty_rate: 0.0, arrival: 0.0 }
                }).collect();
                let Ok(s) = plan_grouping(&t, &reqs, &GroupingWeights::default()) else { return Ok(()) };
                let v = crate::oracle::to_f64(&crate::oracle::solve_lp_exact(&t, &reqs).unwrap().value);
                let eps = 0.05;
                let pairs: Vec<_> = reqs.iter().map(|r| (r.src, r.dst)).collect();
                let w = crate::fpta::max_mcf(&t, &pairs, &crate::fpta::SolverConfig::new(eps, 0.1).unwrap()).unwrap().throughput;
                for batch in &s.batches {
                    let slice: f64 = (0..batch.members.len()).map(|i| batch.bandwidth(i)).sum();
                    prop_assert!(slice <= v * (1.0 + 1e-9), "slice {} over V {}", slice, v);
                    prop_assert!(slice <= w / (1.0 - 2.0 * eps) * (1.0 + 1e-9), "slice {} over W {}", slice, w);
                }
            }
        }
    }
}
