use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{load_topology, Duplex, NetworkTopology, TopologyBuilder, TopologyError};

/// Google's B4 inter-datacenter WAN: 12 sites, 19 full-duplex links of 1 GBps
/// per direction. The adjacency is a reconstruction from the published
/// drawing; see `data/b4.json`.
pub fn builtin_b4() -> NetworkTopology {
    load_topology(include_str!("../../data/b4.json")).expect("bundled B4 document is valid")
}

/// Six-node example: hosts H1..H4 and switches S1, S2 joined by half-duplex
/// 100 MBps links.
pub fn builtin_two_switch() -> NetworkTopology {
    load_topology(include_str!("../../data/two-switch.json"))
        .expect("bundled example document is valid")
}

/// Capacity assignment for generated fat-trees, in bytes/second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FatTreeCaps {
    Fixed(f64),
    /// Uniform draw per physical link, reproducible from `seed`.
    Uniform {
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

/// Standard three-tier k-ary fat-tree with `pods` pods: `pods³/4` hosts,
/// `pods²` pod switches and `(pods/2)²` core switches, all links full duplex.
pub fn builtin_fattree(pods: usize, caps: FatTreeCaps) -> Result<NetworkTopology, TopologyError> {
    if pods < 2 || !pods.is_multiple_of(2) {
        return Err(TopologyError::InvalidPods(pods));
    }
    let mut draw: Box<dyn FnMut() -> f64> = match caps {
        FatTreeCaps::Fixed(c) => {
            if !(c.is_finite() && c > 0.0) {
                return Err(TopologyError::InvalidCapacityRange(c, c));
            }
            Box::new(move || c)
        }
        FatTreeCaps::Uniform { lo, hi, seed } => {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(TopologyError::InvalidCapacityRange(lo, hi));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Box::new(move || if lo == hi { lo } else { rng.gen_range(lo..=hi) })
        }
    };

    let half = pods / 2;
    let mut b = TopologyBuilder::new();
    for c in 0..half * half {
        b.node(format!("c{c}"));
    }
    for p in 0..pods {
        for i in 0..half {
            let agg = format!("p{p}a{i}");
            let edge = format!("p{p}e{i}");
            b.node(agg.clone());
            b.node(edge.clone());
            for h in 0..half {
                b.node(format!("{edge}h{h}"));
            }
        }
    }
    for p in 0..pods {
        for e in 0..half {
            let edge = format!("p{p}e{e}");
            for h in 0..half {
                let host = format!("{edge}h{h}");
                b.bidirectional(format!("{host}-{edge}"), &host, &edge, draw(), Duplex::Full);
            }
            for a in 0..half {
                let agg = format!("p{p}a{a}");
                b.bidirectional(format!("{edge}-{agg}"), &edge, &agg, draw(), Duplex::Full);
            }
        }
        for a in 0..half {
            let agg = format!("p{p}a{a}");
            for j in 0..half {
                let core = format!("c{}", a * half + j);
                b.bidirectional(format!("{agg}-{core}"), &agg, &core, draw(), Duplex::Full);
            }
        }
    }
    b.build()
}

/// Host node names of a generated fat-tree, in topology order.
pub fn fattree_hosts(topology: &NetworkTopology) -> Vec<String> {
    topology
        .node_ids()
        .map(|n| topology.node_name(n))
        .filter(|n| n.contains('h'))
        .map(str::to_string)
        .collect()
}
