//! Single-commodity maximum flow (Dinic) with path decomposition.

use std::collections::VecDeque;

use crate::topology::{LinkId, NetworkTopology, NodeId, Path};

#[derive(Debug, Clone, PartialEq)]
pub struct MaxFlow {
    pub value: f64,
    /// Simple paths carrying the flow, in discovery order.
    pub paths: Vec<(Path, f64)>,
}

struct Arc {
    to: usize,
    cap: f64,
    /// Link carrying positive flow on this arc, and on its partner.
    fwd: Option<LinkId>,
}

/// Maximum `src → dst` flow with the given per-channel capacities.
///
/// A half-duplex channel is one undirected edge: its two directions share
/// the capacity, so only the net flow counts.
pub fn max_flow(
    topology: &NetworkTopology,
    capacities: &[f64],
    src: NodeId,
    dst: NodeId,
) -> MaxFlow {
    assert_eq!(capacities.len(), topology.channel_count());
    if src == dst {
        return MaxFlow {
            value: 0.0,
            paths: Vec::new(),
        };
    }
    let n = topology.node_count();
    let mut arcs: Vec<Arc> = Vec::new();
    let mut adj = vec![Vec::new(); n];
    let mut add = |arcs: &mut Vec<Arc>, u: usize, v: usize, cu: f64, cv: f64, lu, lv| {
        adj[u].push(arcs.len());
        arcs.push(Arc {
            to: v,
            cap: cu,
            fwd: lu,
        });
        adj[v].push(arcs.len());
        arcs.push(Arc {
            to: u,
            cap: cv,
            fwd: lv,
        });
    };
    let mut original = Vec::new();
    for (c, channel) in topology.channels().iter().enumerate() {
        let cap = capacities[c];
        if cap <= 0.0 {
            continue;
        }
        match channel.links.as_slice() {
            [a] => {
                let l = topology.link(*a);
                original.push((arcs.len(), cap, 0.0));
                add(&mut arcs, l.src.0, l.dst.0, cap, 0.0, Some(*a), None);
            }
            [a, b] => {
                let l = topology.link(*a);
                original.push((arcs.len(), cap, cap));
                add(&mut arcs, l.src.0, l.dst.0, cap, cap, Some(*a), Some(*b));
            }
            _ => unreachable!("channels carry one or two links"),
        }
    }
    let tol = capacities.iter().cloned().fold(0.0, f64::max) * 1e-12;

    let mut value = 0.0;
    loop {
        // BFS levels on the residual graph
        let mut level = vec![usize::MAX; n];
        level[src.0] = 0;
        let mut queue = VecDeque::from([src.0]);
        while let Some(u) = queue.pop_front() {
            for &a in &adj[u] {
                let v = arcs[a].to;
                if arcs[a].cap > tol && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if level[dst.0] == usize::MAX {
            break;
        }
        let mut next = vec![0usize; n];
        loop {
            let pushed = blocking_push(
                &mut arcs,
                &adj,
                &level,
                &mut next,
                src.0,
                dst.0,
                f64::INFINITY,
                tol,
            );
            if pushed <= tol {
                break;
            }
            value += pushed;
        }
    }

    // net flow per link
    let mut link_flow = vec![0.0; topology.link_count()];
    for &(a, cap_fwd, _) in &original {
        let net = cap_fwd - arcs[a].cap;
        if net > tol {
            link_flow[arcs[a].fwd.expect("forward arc has a link").0] = net;
        } else if net < -tol {
            let back = arcs[a + 1]
                .fwd
                .expect("negative net flow only on half-duplex");
            link_flow[back.0] = -net;
        }
    }
    let paths = decompose(topology, &mut link_flow, src, dst, tol);
    MaxFlow { value, paths }
}

#[allow(clippy::too_many_arguments)]
fn blocking_push(
    arcs: &mut [Arc],
    adj: &[Vec<usize>],
    level: &[usize],
    next: &mut [usize],
    u: usize,
    dst: usize,
    limit: f64,
    tol: f64,
) -> f64 {
    if u == dst {
        return limit;
    }
    while next[u] < adj[u].len() {
        let a = adj[u][next[u]];
        let v = arcs[a].to;
        if arcs[a].cap > tol && level[v] == level[u] + 1 {
            let got = blocking_push(arcs, adj, level, next, v, dst, limit.min(arcs[a].cap), tol);
            if got > tol {
                arcs[a].cap -= got;
                arcs[a ^ 1].cap += got;
                return got;
            }
        }
        next[u] += 1;
    }
    0.0
}

/// Peels fewest-hop paths off a link flow until the source runs dry; any
/// leftover circulation is dropped.
fn decompose(
    topology: &NetworkTopology,
    flow: &mut [f64],
    src: NodeId,
    dst: NodeId,
    tol: f64,
) -> Vec<(Path, f64)> {
    let n = topology.node_count();
    let mut paths = Vec::new();
    loop {
        let mut via: Vec<Option<LinkId>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[src.0] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &l in topology.out_links(u) {
                let v = topology.link(l).dst;
                if flow[l.0] > tol && !seen[v.0] {
                    seen[v.0] = true;
                    via[v.0] = Some(l);
                    queue.push_back(v);
                }
            }
        }
        if !seen[dst.0] {
            break;
        }
        let mut links = Vec::new();
        let mut at = dst;
        while at != src {
            let l = via[at.0].expect("reached nodes have a parent link");
            links.push(l);
            at = topology.link(l).src;
        }
        links.reverse();
        let amount = links
            .iter()
            .map(|l| flow[l.0])
            .fold(f64::INFINITY, f64::min);
        for l in &links {
            flow[l.0] -= amount;
        }
        paths.push((Path::new(links), amount));
    }
    paths
}
