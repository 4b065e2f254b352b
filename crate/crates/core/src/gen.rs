//! Seeded instance generators for experiments and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::request::MigrationRequest;
use crate::topology::{
    star_expand, HostCapacityModel, HostCaps, NetworkTopology, NodeId, TopologyBuilder,
};
use crate::units::{GB, MB};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random migrations between distinct nodes of a topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub vms: usize,
    #[serde(default = "default_memory_min")]
    pub memory_min_bytes: f64,
    #[serde(default = "default_memory_max")]
    pub memory_max_bytes: f64,
    #[serde(default = "default_dirty_rate")]
    pub dirty_rate_bps: f64,
    /// Rescale the drawn memory sizes to this total.
    #[serde(default)]
    pub total_memory_bytes: Option<f64>,
}

fn default_memory_min() -> f64 {
    1.0 * GB
}

fn default_memory_max() -> f64 {
    10.0 * GB
}

fn default_dirty_rate() -> f64 {
    100.0 * MB
}

impl WorkloadSpec {
    /// 1–10 GB of memory, 100 MBps dirty rate.
    pub fn new(vms: usize) -> Self {
        Self {
            vms,
            memory_min_bytes: default_memory_min(),
            memory_max_bytes: default_memory_max(),
            dirty_rate_bps: default_dirty_rate(),
            total_memory_bytes: None,
        }
    }
}

/// Draws `spec.vms` requests named `vm0..` over all nodes. Endpoints are
/// uniform over ordered pairs of distinct nodes; memory is uniform in the
/// given range.
pub fn workload(
    topology: &NetworkTopology,
    spec: &WorkloadSpec,
    seed: u64,
) -> Vec<MigrationRequest> {
    let nodes: Vec<NodeId> = topology.node_ids().collect();
    workload_on(&nodes, spec, seed)
}

/// As [`workload`], with endpoints restricted to `nodes`.
pub fn workload_on(nodes: &[NodeId], spec: &WorkloadSpec, seed: u64) -> Vec<MigrationRequest> {
    let mut rng = rng(seed);
    let n = nodes.len();
    assert!(n >= 2, "a workload needs two nodes");
    let mut reqs: Vec<MigrationRequest> = (0..spec.vms)
        .map(|i| {
            let src = rng.gen_range(0..n);
            let mut dst = rng.gen_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            let (src, dst) = (nodes[src], nodes[dst]);
            let memory = if spec.memory_max_bytes > spec.memory_min_bytes {
                rng.gen_range(spec.memory_min_bytes..spec.memory_max_bytes)
            } else {
                spec.memory_min_bytes
            };
            MigrationRequest {
                id: format!("vm{i}"),
                src,
                dst,
                memory,
                dirty_rate: spec.dirty_rate_bps,
                arrival: 0.0,
            }
        })
        .collect();
    if let Some(total) = spec.total_memory_bytes {
        let drawn: f64 = reqs.iter().map(|r| r.memory).sum();
        if drawn > 0.0 {
            for r in &mut reqs {
                r.memory *= total / drawn;
            }
        }
    }
    reqs
}

/// Random connected directed graph: a shuffled spanning ring plus extra
/// links, capacities in whole MBps.
pub fn random_graph(
    nodes: usize,
    extra_links: usize,
    cap_range_mbps: (u32, u32),
    seed: u64,
) -> NetworkTopology {
    let mut rng = rng(seed);
    let mut b = TopologyBuilder::new();
    let names: Vec<String> = (0..nodes).map(|i| format!("n{i:02}")).collect();
    for n in &names {
        b.node(n.clone());
    }
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(&mut rng);
    let cap = |rng: &mut ChaCha8Rng| rng.gen_range(cap_range_mbps.0..=cap_range_mbps.1) as f64 * MB;
    for i in 0..nodes {
        let (u, v) = (order[i], order[(i + 1) % nodes]);
        let c = cap(&mut rng);
        b.link(format!("ring{i}"), &names[u], &names[v], c);
    }
    for i in 0..extra_links {
        let u = rng.gen_range(0..nodes);
        let mut v = rng.gen_range(0..nodes - 1);
        if v >= u {
            v += 1;
        }
        let c = cap(&mut rng);
        b.link(format!("x{i}"), &names[u], &names[v], c);
    }
    b.build().expect("generated topology is valid")
}

/// Random pairs of distinct nodes with the given dirty rates.
pub fn random_requests(
    topology: &NetworkTopology,
    count: usize,
    dirty_rates: &[f64],
    seed: u64,
) -> Vec<MigrationRequest> {
    let mut rng = rng(seed);
    let n = topology.node_count();
    (0..count)
        .map(|i| {
            let src = rng.gen_range(0..n);
            let mut dst = rng.gen_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            MigrationRequest {
                id: format!("v{i}"),
                src: NodeId(src),
                dst: NodeId(dst),
                memory: rng.gen_range(1.0..10.0) * GB,
                dirty_rate: dirty_rates[i % dirty_rates.len().max(1)],
                arrival: 0.0,
            }
        })
        .collect()
}

/// A star with `hosts` hosts whose send and receive caps are drawn from
/// `cap_range_mbps`, plus `count` migrations with dirty rates drawn so
/// that `R0 / L0` stays below `eta_max`.
pub fn random_star(
    hosts: usize,
    count: usize,
    cap_range_mbps: (u32, u32),
    eta_max: f64,
    seed: u64,
) -> (NetworkTopology, Vec<MigrationRequest>) {
    let mut rng = rng(seed);
    let cap = |rng: &mut ChaCha8Rng| rng.gen_range(cap_range_mbps.0..=cap_range_mbps.1) as f64 * MB;
    let caps: Vec<HostCaps> = (0..hosts)
        .map(|i| HostCaps {
            name: format!("h{i}"),
            send_cap: cap(&mut rng),
            recv_cap: cap(&mut rng),
        })
        .collect();
    let model = HostCapacityModel::new(caps).expect("caps are positive");
    let l0 = model.min_cap();
    let t = star_expand(&model);
    let mut reqs = Vec::new();
    for i in 0..count {
        let s = rng.gen_range(0..hosts);
        let mut d = rng.gen_range(0..hosts - 1);
        if d >= s {
            d += 1;
        }
        // whole MBps keeps the exact arithmetic small
        let r = (rng.gen_range(0.0..eta_max) * l0 / MB).floor() * MB;
        reqs.push(MigrationRequest {
            id: format!("v{i}"),
            src: t.node(&format!("h{s}")).expect("host exists"),
            dst: t.node(&format!("h{d}")).expect("host exists"),
            memory: GB,
            dirty_rate: r,
            arrival: 0.0,
        });
    }
    (t, reqs)
}

/// A small star sized for the exact oracle: 3 to 8 hosts, 2 to 8
/// migrations, host caps of 50 to 500 MBps.
pub fn oracle_star(eta_max: f64, seed: u64) -> (NetworkTopology, Vec<MigrationRequest>) {
    let mut rng = rng(seed);
    let hosts = rng.gen_range(3..=8);
    let count = rng.gen_range(2..=8);
    random_star(hosts, count, (50, 500), eta_max, rng.gen())
}
