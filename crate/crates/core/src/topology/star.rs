use serde::{Deserialize, Serialize};

use super::{NetworkTopology, TopologyBuilder, TopologyError};

/// Name of the hub node added by [`star_expand`].
pub const STAR_CORE: &str = "~core";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostCaps {
    pub name: String,
    /// Maximum rate the host can send, bytes/second.
    pub send_cap: f64,
    /// Maximum rate the host can receive, bytes/second.
    pub recv_cap: f64,
}

/// Full-bisection network abstraction: only per-host send and receive limits
/// constrain traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostCapacityModel {
    hosts: Vec<HostCaps>,
}

impl HostCapacityModel {
    pub fn new(hosts: Vec<HostCaps>) -> Result<Self, TopologyError> {
        let mut names: Vec<&str> = hosts.iter().map(|h| h.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(TopologyError::DuplicateNode(w[0].to_string()));
        }
        for h in &hosts {
            if h.name == STAR_CORE {
                return Err(TopologyError::InvalidHostModel(format!(
                    "host name `{STAR_CORE}` is reserved"
                )));
            }
            for cap in [h.send_cap, h.recv_cap] {
                if !(cap.is_finite() && cap > 0.0) {
                    return Err(TopologyError::InvalidHostModel(format!(
                        "host `{}` has non-positive capacity {cap}",
                        h.name
                    )));
                }
            }
        }
        Ok(Self { hosts })
    }

    /// `count` hosts named `h0..` with identical caps.
    pub fn uniform(count: usize, send_cap: f64, recv_cap: f64) -> Result<Self, TopologyError> {
        Self::new(
            (0..count)
                .map(|i| HostCaps {
                    name: format!("h{i}"),
                    send_cap,
                    recv_cap,
                })
                .collect(),
        )
    }

    pub fn hosts(&self) -> &[HostCaps] {
        &self.hosts
    }

    /// Smallest send or receive cap over all hosts.
    pub fn min_cap(&self) -> f64 {
        self.hosts
            .iter()
            .flat_map(|h| [h.send_cap, h.recv_cap])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Expands the host model into a star through one uncongested core: link
/// `host -> core` carries the send cap, `core -> host` the receive cap. Every
/// host pair is then joined by exactly one two-hop path.
pub fn star_expand(model: &HostCapacityModel) -> NetworkTopology {
    let mut b = TopologyBuilder::new();
    b.node(STAR_CORE);
    for h in &model.hosts {
        b.node(h.name.clone());
    }
    for h in &model.hosts {
        b.link(format!("{}>core", h.name), &h.name, STAR_CORE, h.send_cap);
        b.link(format!("core>{}", h.name), STAR_CORE, &h.name, h.recv_cap);
    }
    b.build().expect("host model was validated")
}
