//! Exact solvers for small instances: the path LP, the start-decision MIP,
//! and the bound report comparing them with the approximation.

mod simplex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fpta::{self, SolverConfig, SolverError};
use crate::request::MigrationRequest;
use crate::topology::{NetworkTopology, NodeId, Path, TopologyError};

pub use simplex::{maximize, LpOptimum};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("topology has {nodes} nodes; the exact oracle accepts at most {limit}")]
    TooManyNodes { nodes: usize, limit: usize },
    #[error("{count} requests; the exact oracle accepts at most {limit}")]
    TooManyRequests { count: usize, limit: usize },
    #[error("capacity {0} is not a finite non-negative number")]
    BadCapacity(f64),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Hard caps on instance size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLimits {
    pub max_nodes: usize,
    pub max_hops: usize,
    pub max_requests: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_nodes: 10,
            max_hops: 6,
            max_requests: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub value: BigRational,
    pub bandwidth: Vec<BigRational>,
    /// Non-zero path flows per request.
    pub flows: Vec<Vec<(Path, BigRational)>>,
    pub started: Vec<bool>,
}

impl ExactSolution {
    pub fn value_f64(&self) -> f64 {
        to_f64(&self.value)
    }

    pub fn started_count(&self) -> usize {
        self.started.iter().filter(|s| **s).count()
    }
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite float.
pub fn rational(x: f64) -> Result<BigRational, OracleError> {
    if !x.is_finite() {
        return Err(OracleError::BadCapacity(x));
    }
    Ok(BigRational::from_float(x).expect("finite"))
}

/// All simple paths of at most `max_hops` links, depth-first in the order
/// of [`NetworkTopology::out_links`].
pub fn enumerate_paths(
    topology: &NetworkTopology,
    src: NodeId,
    dst: NodeId,
    max_hops: usize,
) -> Result<Vec<Path>, OracleError> {
    check_nodes(topology, &OracleLimits::default())?;
    for n in [src, dst] {
        if n.0 >= topology.node_count() {
            return Err(TopologyError::UnknownNode(format!("#{}", n.0)).into());
        }
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; topology.node_count()];
    let mut stack = Vec::new();
    on_path[src.0] = true;
    dfs(
        topology,
        src,
        dst,
        max_hops,
        &mut on_path,
        &mut stack,
        &mut out,
    );
    Ok(out)
}

fn dfs(
    t: &NetworkTopology,
    at: NodeId,
    dst: NodeId,
    hops_left: usize,
    on_path: &mut [bool],
    stack: &mut Vec<crate::topology::LinkId>,
    out: &mut Vec<Path>,
) {
    if at == dst {
        out.push(Path::new(stack.clone()));
        return;
    }
    if hops_left == 0 {
        return;
    }
    for &l in t.out_links(at) {
        let next = t.link(l).dst;
        if on_path[next.0] {
            continue;
        }
        on_path[next.0] = true;
        stack.push(l);
        dfs(t, next, dst, hops_left - 1, on_path, stack, out);
        stack.pop();
        on_path[next.0] = false;
    }
}

fn check_nodes(topology: &NetworkTopology, limits: &OracleLimits) -> Result<(), OracleError> {
    if topology.node_count() > limits.max_nodes {
        return Err(OracleError::TooManyNodes {
            nodes: topology.node_count(),
            limit: limits.max_nodes,
        });
    }
    Ok(())
}

/// The path LP of one instance, solvable on any subset of its commodities.
struct PathLp<'a> {
    topology: &'a NetworkTopology,
    capacities: Vec<BigRational>,
    paths: Vec<Vec<Path>>,
}

impl<'a> PathLp<'a> {
    fn new(
        topology: &'a NetworkTopology,
        capacities: &[f64],
        requests: &[MigrationRequest],
        limits: &OracleLimits,
    ) -> Result<Self, OracleError> {
        check_nodes(topology, limits)?;
        if requests.len() > limits.max_requests {
            return Err(OracleError::TooManyRequests {
                count: requests.len(),
                limit: limits.max_requests,
            });
        }
        assert_eq!(capacities.len(), topology.channel_count());
        let capacities = capacities
            .iter()
            .map(|&c| {
                if c < 0.0 {
                    Err(OracleError::BadCapacity(c))
                } else {
                    rational(c)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let paths = requests
            .iter()
            .map(|r| enumerate_paths(topology, r.src, r.dst, limits.max_hops))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            topology,
            capacities,
            paths,
        })
    }

    /// Maximum total flow using only commodities in `members`.
    fn solve(&self, members: &[usize]) -> ExactSolution {
        let k_total = self.paths.len();
        let columns: Vec<(usize, &Path)> = members
            .iter()
            .flat_map(|&k| self.paths[k].iter().map(move |p| (k, p)))
            .collect();
        let m = self.capacities.len();
        let mut a = vec![vec![BigRational::zero(); columns.len()]; m];
        for (j, (_, p)) in columns.iter().enumerate() {
            for l in p.links() {
                a[self.topology.link(*l).channel.0][j] = BigRational::from_integer(BigInt::from(1));
            }
        }
        let c = vec![BigRational::from_integer(BigInt::from(1)); columns.len()];
        let opt =
            simplex::maximize(&c, &a, &self.capacities).expect("path LP is bounded by capacities");
        let mut flows = vec![Vec::new(); k_total];
        let mut bandwidth = vec![BigRational::zero(); k_total];
        for ((k, p), x) in columns.iter().zip(opt.x) {
            if !x.is_zero() {
                bandwidth[*k] += &x;
                flows[*k].push(((*p).clone(), x));
            }
        }
        let started = bandwidth.iter().map(|l| !l.is_zero()).collect();
        ExactSolution {
            value: opt.value,
            bandwidth,
            flows,
            started,
        }
    }
}

/// Subsets of `0..k` ordered by size, then lexicographically.
fn subsets_by_size(k: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (0u32..(1 << k))
        .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all
}

/// Exact optimum `V` of the path LP. Among optimal solutions the one with
/// the fewest non-zero bandwidths is returned, so `started_count()` is `N*`.
pub fn solve_lp_exact(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
) -> Result<ExactSolution, OracleError> {
    solve_lp_exact_with(
        topology,
        &topology.channel_capacities(),
        requests,
        &OracleLimits::default(),
    )
}

pub fn solve_lp_exact_with(
    topology: &NetworkTopology,
    capacities: &[f64],
    requests: &[MigrationRequest],
    limits: &OracleLimits,
) -> Result<ExactSolution, OracleError> {
    let lp = PathLp::new(topology, capacities, requests, limits)?;
    let all: Vec<usize> = (0..requests.len()).collect();
    let full = lp.solve(&all);
    for members in subsets_by_size(requests.len()) {
        let s = lp.solve(&members);
        if s.value == full.value {
            return Ok(s);
        }
    }
    unreachable!("the full set attains the optimum")
}

/// Exact optimum `U` of `Σ (l_k − X_k·r_k)` over all start vectors. Ties go
/// to fewer started migrations, then to the lexicographically smaller set.
pub fn solve_mip_exact(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
) -> Result<ExactSolution, OracleError> {
    solve_mip_exact_with(
        topology,
        &topology.channel_capacities(),
        requests,
        &vec![false; requests.len()],
        &OracleLimits::default(),
    )
}

/// As [`solve_mip_exact`], with capacities overridden and the migrations in
/// `forced` required to start.
pub fn solve_mip_exact_with(
    topology: &NetworkTopology,
    capacities: &[f64],
    requests: &[MigrationRequest],
    forced: &[bool],
    limits: &OracleLimits,
) -> Result<ExactSolution, OracleError> {
    assert_eq!(forced.len(), requests.len());
    let lp = PathLp::new(topology, capacities, requests, limits)?;
    let dirty: Vec<BigRational> = requests
        .iter()
        .map(|r| rational(r.dirty_rate))
        .collect::<Result<_, _>>()?;
    let mut best: Option<ExactSolution> = None;
    for members in subsets_by_size(requests.len()) {
        if (0..requests.len()).any(|k| forced[k] && !members.contains(&k)) {
            continue;
        }
        let mut s = lp.solve(&members);
        for &k in &members {
            s.value -= &dirty[k];
        }
        s.started = (0..requests.len()).map(|k| members.contains(&k)).collect();
        if best.as_ref().is_none_or(|b| s.value > b.value) {
            best = Some(s);
        }
    }
    Ok(best.expect("at least the forced set is enumerated"))
}

/// Applicability and outcome of one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail,
    NotApplicable,
}

impl Check {
    fn of(ok: bool) -> Self {
        if ok {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub f: f64,
    pub n_star: usize,
    pub l0: f64,
    pub r0: f64,
    pub eta: f64,
    /// `2η/(1−2η)`; infinite when `η ≥ 1/2`.
    pub sigma: f64,
    pub epsilon: f64,
    /// `W ≥ (1−2ε)V`.
    pub throughput_bound: Check,
    /// `V − N*·R0 ≥ (1−σ)U`.
    pub support_bound: Check,
    /// `F ≥ (1−2ε−σ)U`.
    pub net_rate_bound: Check,
    /// `U ≤ V` and `W ≤ V`.
    pub consistency: Check,
}

impl BoundReport {
    pub fn failed(&self) -> bool {
        [
            self.throughput_bound,
            self.support_bound,
            self.net_rate_bound,
            self.consistency,
        ]
        .contains(&Check::Fail)
    }
}

/// Relative slack for comparisons that involve float approximation output.
const FLOAT_RTOL: f64 = 1e-9;

/// Computes `U`, `V`, `N*` exactly and `W`, `F` with the approximation,
/// then checks the inequalities linking them. `L0` is the smallest channel
/// capacity, which on a star is the smallest host cap.
pub fn bound_report(
    topology: &NetworkTopology,
    requests: &[MigrationRequest],
    config: &SolverConfig,
) -> Result<BoundReport, OracleError> {
    let lp = solve_lp_exact(topology, requests)?;
    let mip = solve_mip_exact(topology, requests)?;
    let pairs: Vec<_> = requests.iter().map(|r| (r.src, r.dst)).collect();
    let flow = fpta::max_mcf(topology, &pairs, config)?;
    let plan = fpta::solve(topology, requests, config)?;

    let u = mip.value_f64();
    let v = lp.value_f64();
    let w = flow.throughput;
    let f = plan.net_rate;
    let n_star = lp.started_count();
    let l0 = topology
        .channel_capacities()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let r0 = requests.iter().map(|r| r.dirty_rate).fold(0.0, f64::max);
    let eta = r0 / l0;
    let eps = config.epsilon;
    let applicable = eta < 0.5;
    let sigma = if applicable {
        2.0 * eta / (1.0 - 2.0 * eta)
    } else {
        f64::INFINITY
    };
    let slack = FLOAT_RTOL * v.max(1.0);

    let throughput_bound = Check::of(w >= (1.0 - 2.0 * eps) * v - slack);
    let (support_bound, net_rate_bound) = if applicable {
        // Support-bound terms are all exact, so compare rationals.
        let r0_q = rational(r0)?;
        let eta_q = &r0_q / rational(l0)?;
        let one = BigRational::from_integer(BigInt::from(1));
        let two = BigRational::from_integer(BigInt::from(2));
        let sigma_q = &two * &eta_q / (&one - &two * &eta_q);
        let lhs = &lp.value - BigRational::from_integer(BigInt::from(n_star)) * &r0_q;
        let t1 = lhs >= (&one - &sigma_q) * &mip.value;
        let t2 = f >= (1.0 - 2.0 * eps - sigma) * u - slack;
        (Check::of(t1), Check::of(t2))
    } else {
        (Check::NotApplicable, Check::NotApplicable)
    };
    let consistency = Check::of(mip.value <= lp.value && w <= v + slack);
    Ok(BoundReport {
        u,
        v,
        w,
        f,
        n_star,
        l0,
        r0,
        eta,
        sigma,
        epsilon: eps,
        throughput_bound,
        support_bound,
        net_rate_bound,
        consistency,
    })
}
