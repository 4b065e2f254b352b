//! Capacitated network model.
//!
//! A topology is a set of named nodes joined by directed links. Each directed
//! link draws on a capacity *channel*: a full-duplex (or one-way) link owns its
//! channel, while the two directions of a half-duplex link share one. Capacity
//! constraints, dual lengths and conflicts are all expressed per channel.

mod builtin;
mod document;
mod path;
mod star;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin_b4, builtin_fattree, builtin_two_switch, fattree_hosts, FatTreeCaps};
pub use document::{load_topology, LinkDocument, TopologyDocument};
pub use path::Path;
pub use star::{star_expand, HostCapacityModel, HostCaps, STAR_CORE};

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("malformed topology document: {0}")]
    Parse(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate link id `{0}`")]
    DuplicateLink(String),
    #[error("link `{link}` references unknown node `{node}`")]
    DanglingEndpoint { link: String, node: String },
    #[error("link `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("link `{link}` has invalid capacity {capacity}")]
    InvalidCapacity { link: String, capacity: f64 },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("link weight for `{link}` must be positive, got {weight}")]
    InvalidWeight { link: String, weight: f64 },
    #[error("expected {expected} link weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("fat-tree pod count must be even and at least 2, got {0}")]
    InvalidPods(usize),
    #[error("invalid capacity range [{0}, {1}]")]
    InvalidCapacityRange(f64, f64),
    #[error("host capacity model: {0}")]
    InvalidHostModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId(pub usize);

/// How a link declared between two nodes turns into directed links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Duplex {
    /// Each direction has its own capacity.
    Full,
    /// Both directions draw on one shared capacity.
    Half,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub src: NodeId,
    pub dst: NodeId,
    pub channel: ChannelId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    /// Residual capacity in bytes/second.
    pub capacity: f64,
    /// Directed links drawing on this channel (one or two).
    pub links: Vec<LinkId>,
}

/// Immutable validated network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    nodes: Vec<String>,
    node_index: HashMap<String, NodeId>,
    links: Vec<Link>,
    channels: Vec<Channel>,
    /// Outgoing links per node, sorted by (dst, link id).
    out_links: Vec<Vec<LinkId>>,
    /// Incoming links per node, sorted by (src, link id).
    in_links: Vec<Vec<LinkId>>,
}

struct PendingLink {
    name: String,
    src: String,
    dst: String,
    capacity: f64,
    bidirectional: bool,
    duplex: Duplex,
}

/// Incremental constructor for [`NetworkTopology`].
///
/// Node indices are assigned in ascending identifier order when the topology
/// is built, so comparing `NodeId`s compares identifiers.
#[derive(Default)]
pub struct TopologyBuilder {
    nodes: Vec<String>,
    links: Vec<PendingLink>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, id: impl Into<String>) -> &mut Self {
        self.nodes.push(id.into());
        self
    }

    /// One-way link `src -> dst`.
    pub fn link(
        &mut self,
        id: impl Into<String>,
        src: &str,
        dst: &str,
        capacity: f64,
    ) -> &mut Self {
        self.links.push(PendingLink {
            name: id.into(),
            src: src.to_string(),
            dst: dst.to_string(),
            capacity,
            bidirectional: false,
            duplex: Duplex::Full,
        });
        self
    }

    /// Link usable in both directions. The reverse direction is named `<id>:rev`.
    pub fn bidirectional(
        &mut self,
        id: impl Into<String>,
        a: &str,
        b: &str,
        capacity: f64,
        duplex: Duplex,
    ) -> &mut Self {
        self.links.push(PendingLink {
            name: id.into(),
            src: a.to_string(),
            dst: b.to_string(),
            capacity,
            bidirectional: true,
            duplex,
        });
        self
    }

    pub fn build(&self) -> Result<NetworkTopology, TopologyError> {
        let mut sorted: Vec<String> = self.nodes.clone();
        sorted.sort();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(TopologyError::DuplicateNode(w[0].clone()));
            }
        }
        let node_index: HashMap<String, NodeId> = sorted
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NodeId(i)))
            .collect();

        let mut links = Vec::new();
        let mut channels: Vec<Channel> = Vec::new();
        let mut names = BTreeSet::new();
        for pending in &self.links {
            let lookup = |n: &str| {
                node_index
                    .get(n)
                    .copied()
                    .ok_or_else(|| TopologyError::DanglingEndpoint {
                        link: pending.name.clone(),
                        node: n.to_string(),
                    })
            };
            let src = lookup(&pending.src)?;
            let dst = lookup(&pending.dst)?;
            if src == dst {
                return Err(TopologyError::SelfLoop(pending.name.clone()));
            }
            if !pending.capacity.is_finite() || pending.capacity < 0.0 {
                return Err(TopologyError::InvalidCapacity {
                    link: pending.name.clone(),
                    capacity: pending.capacity,
                });
            }
            let reverse_name = format!("{}:rev", pending.name);
            for name in
                std::iter::once(&pending.name).chain(pending.bidirectional.then_some(&reverse_name))
            {
                if !names.insert(name.clone()) {
                    return Err(TopologyError::DuplicateLink(name.clone()));
                }
            }
            // Zero residual capacity means the link is unusable.
            if pending.capacity == 0.0 {
                continue;
            }
            let mut push = |name: String, src, dst, channel: Option<ChannelId>| {
                let id = LinkId(links.len());
                let channel = channel.unwrap_or_else(|| {
                    channels.push(Channel {
                        capacity: pending.capacity,
                        links: Vec::new(),
                    });
                    ChannelId(channels.len() - 1)
                });
                channels[channel.0].links.push(id);
                links.push(Link {
                    name,
                    src,
                    dst,
                    channel,
                });
                channel
            };
            let forward = push(pending.name.clone(), src, dst, None);
            if pending.bidirectional {
                let shared = (pending.duplex == Duplex::Half).then_some(forward);
                push(reverse_name, dst, src, shared);
            }
        }

        let mut out_links = vec![Vec::new(); sorted.len()];
        let mut in_links = vec![Vec::new(); sorted.len()];
        for (i, l) in links.iter().enumerate() {
            out_links[l.src.0].push(LinkId(i));
            in_links[l.dst.0].push(LinkId(i));
        }
        for adj in &mut out_links {
            adj.sort_by_key(|&l| (links[l.0].dst, l));
        }
        for adj in &mut in_links {
            adj.sort_by_key(|&l| (links[l.0].src, l));
        }

        Ok(NetworkTopology {
            nodes: sorted,
            node_index,
            links,
            channels,
            out_links,
            in_links,
        })
    }
}

impl NetworkTopology {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of directed links.
    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        &self.nodes[node.0]
    }

    pub fn node(&self, name: &str) -> Result<NodeId, TopologyError> {
        self.node_index
            .get(name)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn link_by_name(&self, name: &str) -> Option<LinkId> {
        self.links.iter().position(|l| l.name == name).map(LinkId)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, id: ChannelId) -> &Channel {
        &self.channels[id.0]
    }

    /// Capacity available to a directed link (its channel's capacity).
    pub fn link_capacity(&self, id: LinkId) -> f64 {
        self.channels[self.links[id.0].channel.0].capacity
    }

    pub fn channel_capacities(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.capacity).collect()
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node.0]
    }

    pub fn in_links(&self, node: NodeId) -> &[LinkId] {
        &self.in_links[node.0]
    }

    /// Copy of this topology with channel capacities replaced. Channels whose
    /// new capacity is not positive are dropped along with their links.
    pub fn with_channel_capacities(&self, capacities: &[f64]) -> NetworkTopology {
        assert_eq!(capacities.len(), self.channels.len());
        let mut builder = TopologyBuilder::new();
        for n in &self.nodes {
            builder.node(n.clone());
        }
        for (c, channel) in self.channels.iter().enumerate() {
            let cap = capacities[c].max(0.0);
            match channel.links.as_slice() {
                [one] => {
                    let l = &self.links[one.0];
                    builder.link(
                        l.name.clone(),
                        &self.nodes[l.src.0],
                        &self.nodes[l.dst.0],
                        cap,
                    );
                }
                [a, b] => {
                    let (fwd, _) = (&self.links[a.0], &self.links[b.0]);
                    builder.bidirectional(
                        fwd.name.clone(),
                        &self.nodes[fwd.src.0],
                        &self.nodes[fwd.dst.0],
                        cap,
                        Duplex::Half,
                    );
                }
                _ => unreachable!("channels carry one or two links"),
            }
        }
        builder.build().expect("rebuilt from a valid topology")
    }

    pub fn path_endpoints(&self, path: &Path) -> Option<(NodeId, NodeId)> {
        let first = path.links().first()?;
        let last = path.links().last()?;
        Some((self.links[first.0].src, self.links[last.0].dst))
    }

    /// Node sequence visited by a non-empty path.
    pub fn path_nodes(&self, path: &Path) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(path.len() + 1);
        if let Some(first) = path.links().first() {
            nodes.push(self.links[first.0].src);
        }
        nodes.extend(path.links().iter().map(|l| self.links[l.0].dst));
        nodes
    }

    /// Checks that consecutive links share endpoints and no node repeats.
    pub fn is_simple_path(&self, path: &Path) -> bool {
        for w in path.links().windows(2) {
            if self.links[w[0].0].dst != self.links[w[1].0].src {
                return false;
            }
        }
        let nodes = self.path_nodes(path);
        let distinct: BTreeSet<_> = nodes.iter().collect();
        distinct.len() == nodes.len()
    }

    /// Resolves a node-name sequence into a path, choosing the lowest-id link
    /// between consecutive nodes.
    pub fn path_from_nodes(&self, names: &[&str]) -> Result<Option<Path>, TopologyError> {
        let ids = names
            .iter()
            .map(|n| self.node(n))
            .collect::<Result<Vec<_>, _>>()?;
        let mut links = Vec::new();
        for w in ids.windows(2) {
            match self.out_links[w[0].0]
                .iter()
                .find(|l| self.links[l.0].dst == w[1])
            {
                Some(&l) => links.push(l),
                None => return Ok(None),
            }
        }
        Ok(Some(Path::new(links)))
    }

    pub fn path_display(&self, path: &Path) -> String {
        self.path_nodes(path)
            .iter()
            .map(|n| self.nodes[n.0].as_str())
            .collect::<Vec<_>>()
            .join("->")
    }

    /// Minimum-weight simple path from `src` to `dst`.
    ///
    /// `weights` holds one positive length per directed link; an infinite
    /// weight marks a link as unusable. Among equally short paths the one with
    /// the lexicographically smallest node sequence is returned (parallel links
    /// fall back to the lower link id). `src == dst` yields the empty path.
    pub fn shortest_path(
        &self,
        weights: &[f64],
        src: NodeId,
        dst: NodeId,
    ) -> Result<Option<Path>, TopologyError> {
        self.check_weights(weights)?;
        for n in [src, dst] {
            if n.0 >= self.nodes.len() {
                return Err(TopologyError::UnknownNode(format!("#{}", n.0)));
            }
        }
        let tree = self.distances_to(weights, dst);
        Ok(self.tight_path(weights, &tree, src, dst))
    }

    pub(crate) fn check_weights(&self, weights: &[f64]) -> Result<(), TopologyError> {
        if weights.len() != self.links.len() {
            return Err(TopologyError::WeightCount {
                expected: self.links.len(),
                got: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if w.is_nan() || w <= 0.0 {
                return Err(TopologyError::InvalidWeight {
                    link: self.links[i].name.clone(),
                    weight: w,
                });
            }
        }
        Ok(())
    }

    /// Distance from every node to `dst` (reverse Dijkstra), plus the link
    /// each node's distance was settled through.
    pub(crate) fn distances_to(&self, weights: &[f64], dst: NodeId) -> DistanceTree {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut via = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[dst.0] = 0.0;
        heap.push(Reverse((TotalF64(0.0), dst)));
        while let Some(Reverse((TotalF64(d), v))) = heap.pop() {
            if d > dist[v.0] {
                continue;
            }
            for &l in &self.in_links[v.0] {
                let w = weights[l.0];
                if !w.is_finite() {
                    continue;
                }
                let u = self.links[l.0].src;
                let nd = w + d;
                if nd < dist[u.0] {
                    dist[u.0] = nd;
                    via[u.0] = Some(l);
                    heap.push(Reverse((TotalF64(nd), u)));
                }
            }
        }
        DistanceTree { dist, via }
    }

    /// Walks tight links from `src`, always taking the smallest next node.
    pub(crate) fn tight_path(
        &self,
        weights: &[f64],
        tree: &DistanceTree,
        src: NodeId,
        dst: NodeId,
    ) -> Option<Path> {
        let dist = &tree.dist;
        if !dist[src.0].is_finite() {
            return None;
        }
        let mut visited = vec![false; self.nodes.len()];
        let mut links = Vec::new();
        let mut at = src;
        visited[src.0] = true;
        while at != dst {
            // dist[at] was produced as w + dist[next] for some tight link, so
            // exact equality finds it.
            let next = self.out_links[at.0].iter().copied().find(|&l| {
                let w = weights[l.0];
                let to = self.links[l.0].dst;
                !visited[to.0] && w.is_finite() && w + dist[to.0] == dist[at.0]
            });
            let Some(next) = next else {
                // Only reachable when huge weight ratios absorb small lengths.
                return Some(tree.tree_path(self, src, dst));
            };
            links.push(next);
            at = self.links[next.0].dst;
            visited[at.0] = true;
        }
        Some(Path::new(links))
    }
}

pub(crate) struct DistanceTree {
    pub(crate) dist: Vec<f64>,
    pub(crate) via: Vec<Option<LinkId>>,
}

impl DistanceTree {
    fn tree_path(&self, topology: &NetworkTopology, src: NodeId, dst: NodeId) -> Path {
        let mut links = Vec::new();
        let mut at = src;
        while at != dst {
            let l = self.via[at.0].expect("finite distance has a settling link");
            links.push(l);
            at = topology.links[l.0].dst;
        }
        Path::new(links)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TotalF64(pub f64);

impl Eq for TotalF64 {}

impl PartialOrd for TotalF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TotalF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_switch() -> NetworkTopology {
        builtin_two_switch()
    }

    fn unit(t: &NetworkTopology) -> Vec<f64> {
        vec![1.0; t.link_count()]
    }

    /// All simple paths by DFS, for checking optimality on small graphs.
    fn all_simple_paths(t: &NetworkTopology, src: NodeId, dst: NodeId) -> Vec<Path> {
        fn dfs(
            t: &NetworkTopology,
            at: NodeId,
            dst: NodeId,
            seen: &mut Vec<bool>,
            cur: &mut Vec<LinkId>,
            out: &mut Vec<Path>,
        ) {
            if at == dst {
                out.push(Path::new(cur.clone()));
                return;
            }
            for &l in t.out_links(at) {
                let next = t.link(l).dst;
                if !seen[next.0] {
                    seen[next.0] = true;
                    cur.push(l);
                    dfs(t, next, dst, seen, cur, out);
                    cur.pop();
                    seen[next.0] = false;
                }
            }
        }
        let mut seen = vec![false; t.node_count()];
        seen[src.0] = true;
        let mut out = Vec::new();
        dfs(t, src, dst, &mut seen, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn node_ids_follow_identifier_order() {
        let t = TopologyBuilder::new()
            .node("b")
            .node("a")
            .node("c")
            .build()
            .unwrap();
        assert_eq!(t.node("a").unwrap(), NodeId(0));
        assert_eq!(t.node("c").unwrap(), NodeId(2));
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            TopologyBuilder::new()
                .node("a")
                .node("a")
                .build()
                .unwrap_err(),
            TopologyError::DuplicateNode("a".into())
        );
        assert!(matches!(
            TopologyBuilder::new()
                .node("a")
                .link("x", "a", "b", 1.0)
                .build(),
            Err(TopologyError::DanglingEndpoint { .. })
        ));
        assert!(matches!(
            TopologyBuilder::new()
                .node("a")
                .link("x", "a", "a", 1.0)
                .build(),
            Err(TopologyError::SelfLoop(_))
        ));
        assert!(matches!(
            TopologyBuilder::new()
                .node("a")
                .node("b")
                .link("x", "a", "b", -1.0)
                .build(),
            Err(TopologyError::InvalidCapacity { .. })
        ));
        assert!(matches!(
            TopologyBuilder::new()
                .node("a")
                .node("b")
                .link("x", "a", "b", 1.0)
                .link("x", "b", "a", 1.0)
                .build(),
            Err(TopologyError::DuplicateLink(_))
        ));
    }

    #[test]
    fn zero_capacity_link_is_dropped() {
        let t = TopologyBuilder::new()
            .node("a")
            .node("b")
            .link("x", "a", "b", 0.0)
            .link("y", "b", "a", 5.0)
            .build()
            .unwrap();
        assert_eq!(t.link_count(), 1);
        assert_eq!(t.link(LinkId(0)).name, "y");
    }

    #[test]
    fn parallel_links_are_distinct() {
        let t = TopologyBuilder::new()
            .node("a")
            .node("b")
            .link("x", "a", "b", 1.0)
            .link("y", "a", "b", 2.0)
            .build()
            .unwrap();
        assert_eq!(t.link_count(), 2);
        assert_eq!(t.channel_count(), 2);
    }

    #[test]
    fn half_duplex_shares_a_channel() {
        let t = two_switch();
        assert_eq!(t.link_count(), 12);
        assert_eq!(t.channel_count(), 6);
        let fwd = t.link_by_name("H2-S1").unwrap();
        let rev = t.link_by_name("H2-S1:rev").unwrap();
        assert_eq!(t.link(fwd).channel, t.link(rev).channel);
    }

    #[test]
    fn two_switch_tie_break_picks_smaller_switch() {
        let t = two_switch();
        let (h2, h3) = (t.node("H2").unwrap(), t.node("H3").unwrap());
        let p = t.shortest_path(&unit(&t), h2, h3).unwrap().unwrap();
        assert_eq!(t.path_display(&p), "H2->S1->H3");
        // both 2-hop alternatives exist
        let all = all_simple_paths(&t, h2, h3);
        let two_hop: Vec<_> = all
            .iter()
            .filter(|p| p.len() == 2)
            .map(|p| t.path_display(p))
            .collect();
        assert_eq!(two_hop, vec!["H2->S1->H3", "H2->S2->H3"]);
    }

    #[test]
    fn same_endpoints_give_empty_path() {
        let t = two_switch();
        let h1 = t.node("H1").unwrap();
        let p = t.shortest_path(&unit(&t), h1, h1).unwrap().unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn disconnected_pair_has_no_path() {
        let t = TopologyBuilder::new()
            .node("a")
            .node("b")
            .node("c")
            .link("x", "a", "b", 1.0)
            .build()
            .unwrap();
        let (a, c) = (t.node("a").unwrap(), t.node("c").unwrap());
        assert_eq!(t.shortest_path(&unit(&t), a, c).unwrap(), None);
        // direction matters
        let b = t.node("b").unwrap();
        assert_eq!(t.shortest_path(&unit(&t), b, a).unwrap(), None);
    }

    #[test]
    fn infinite_weight_disables_link() {
        let t = two_switch();
        let mut w = unit(&t);
        w[t.link_by_name("H2-S1").unwrap().0] = f64::INFINITY;
        let (h2, h3) = (t.node("H2").unwrap(), t.node("H3").unwrap());
        let p = t.shortest_path(&w, h2, h3).unwrap().unwrap();
        assert_eq!(t.path_display(&p), "H2->S2->H3");
    }

    #[test]
    fn bad_weights_and_nodes_are_errors() {
        let t = two_switch();
        let mut w = unit(&t);
        w[0] = 0.0;
        assert!(matches!(
            t.shortest_path(&w, NodeId(0), NodeId(1)),
            Err(TopologyError::InvalidWeight { .. })
        ));
        assert!(matches!(
            t.shortest_path(&unit(&t), NodeId(0), NodeId(99)),
            Err(TopologyError::UnknownNode(_))
        ));
        assert!(matches!(t.node("H9"), Err(TopologyError::UnknownNode(_))));
    }

    #[test]
    fn path_from_nodes_roundtrip() {
        let t = two_switch();
        let p = t.path_from_nodes(&["H1", "S1", "H2"]).unwrap().unwrap();
        assert!(t.is_simple_path(&p));
        assert_eq!(t.path_display(&p), "H1->S1->H2");
        assert_eq!(t.path_from_nodes(&["H1", "H2"]).unwrap(), None);
    }

    #[test]
    fn residual_copy_drops_exhausted_channels() {
        let t = two_switch();
        let mut caps = t.channel_capacities();
        let ch = t.link(t.link_by_name("H1-S1").unwrap()).channel;
        caps[ch.0] = 0.0;
        let r = t.with_channel_capacities(&caps);
        assert_eq!(r.link_count(), 10);
        assert_eq!(r.node_count(), 6);
        assert!(r.link_by_name("H1-S1").is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = (NetworkTopology, Vec<f64>)> {
            (3usize..=8)
                .prop_flat_map(|n| {
                    let edges = proptest::collection::vec((0..n, 0..n, 1u32..20), 1..(n * 3));
                    (Just(n), edges)
                })
                .prop_map(|(n, edges)| {
                    let mut b = TopologyBuilder::new();
                    for i in 0..n {
                        b.node(format!("v{i}"));
                    }
                    let mut weights = Vec::new();
                    for (k, (a, c, w)) in edges.into_iter().enumerate() {
                        if a != c {
                            b.link(format!("e{k}"), &format!("v{a}"), &format!("v{c}"), 1.0);
                            weights.push(w as f64);
                        }
                    }
                    (b.build().unwrap(), weights)
                })
        }

        proptest! {
            #[test]
            fn shortest_path_is_minimal_and_deterministic((t, w) in arb_graph(), s in 0usize..8, d in 0usize..8) {
                let n = t.node_count();
                let (src, dst) = (NodeId(s % n), NodeId(d % n));
                let found = t.shortest_path(&w, src, dst).unwrap();
                let again = t.shortest_path(&w, src, dst).unwrap();
                prop_assert_eq!(&found, &again);
                let all = all_simple_paths(&t, src, dst);
                let cost = |p: &Path| p.links().iter().map(|l| w[l.0]).sum::<f64>();
                match found {
                    None => prop_assert!(all.is_empty()),
                    Some(p) => {
                        prop_assert!(t.is_simple_path(&p));
                        let best = all.iter().map(cost).fold(f64::INFINITY, f64::min);
                        prop_assert!(cost(&p) <= best + 1e-9);
                    }
                }
            }
        }
    }
}
