use serde::{Deserialize, Serialize};

use super::{Duplex, NetworkTopology, TopologyBuilder, TopologyError};
use crate::units::parse_rate;

/// On-disk topology description.
///
/// Each link carries its capacity either as a labelled string (`"capacity":
/// "100 MBps"`, `"8 Gbps"`) or as a bare number of bytes per second
/// (`"capacity_bps"`). Exactly one of the two must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    pub nodes: Vec<String>,
    pub links: Vec<LinkDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDocument {
    pub id: String,
    pub src: String,
    pub dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_bps: Option<f64>,
    #[serde(default)]
    pub bidirectional: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplex: Option<Duplex>,
}

impl LinkDocument {
    fn capacity(&self) -> Result<f64, TopologyError> {
        match (&self.capacity, self.capacity_bps) {
            (Some(label), None) => parse_rate(label)
                .map_err(|e| TopologyError::Parse(format!("link `{}`: {e}", self.id))),
            (None, Some(bps)) => Ok(bps),
            (Some(_), Some(_)) => Err(TopologyError::Parse(format!(
                "link `{}` sets both `capacity` and `capacity_bps`",
                self.id
            ))),
            (None, None) => Err(TopologyError::Parse(format!(
                "link `{}` has no capacity",
                self.id
            ))),
        }
    }
}

impl TopologyDocument {
    pub fn into_topology(&self) -> Result<NetworkTopology, TopologyError> {
        let mut builder = TopologyBuilder::new();
        for n in &self.nodes {
            builder.node(n.clone());
        }
        for l in &self.links {
            let capacity = l.capacity()?;
            if l.bidirectional {
                builder.bidirectional(
                    l.id.clone(),
                    &l.src,
                    &l.dst,
                    capacity,
                    l.duplex.unwrap_or(Duplex::Full),
                );
            } else {
                if l.duplex == Some(Duplex::Half) {
                    return Err(TopologyError::Parse(format!(
                        "link `{}`: half duplex requires `bidirectional`",
                        l.id
                    )));
                }
                builder.link(l.id.clone(), &l.src, &l.dst, capacity);
            }
        }
        builder.build()
    }
}

/// Parses and validates a JSON topology document.
pub fn load_topology(text: &str) -> Result<NetworkTopology, TopologyError> {
    let doc: TopologyDocument =
        serde_json::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
    doc.into_topology()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_document() {
        let t = load_topology(
            r#"{"nodes":["a","b"],"links":[{"id":"x","src":"a","dst":"b","capacity":"100 MBps"}]}"#,
        )
        .unwrap();
        assert_eq!(t.link_count(), 1);
        assert_eq!(t.link_capacity(super::super::LinkId(0)), 1.0e8);
    }

    #[test]
    fn numeric_capacity_is_bytes_per_second() {
        let t = load_topology(
            r#"{"nodes":["a","b"],"links":[{"id":"x","src":"a","dst":"b","capacity_bps":5e7}]}"#,
        )
        .unwrap();
        assert_eq!(t.channels()[0].capacity, 5e7);
    }

    #[test]
    fn two_switch_document_counts() {
        let t = load_topology(include_str!("../../data/two-switch.json")).unwrap();
        assert_eq!(t.node_count(), 6);
        assert_eq!(t.link_count(), 12);
        assert!(t
            .links()
            .iter()
            .all(|l| t.link_capacity(t.link_by_name(&l.name).unwrap()) == 1e8));
    }

    #[test]
    fn zero_capacity_link_is_absent() {
        let t = load_topology(
            r#"{"nodes":["a","b","c"],"links":[
                {"id":"x","src":"a","dst":"b","capacity":"0 MBps"},
                {"id":"y","src":"b","dst":"c","capacity":"1 MBps"}]}"#,
        )
        .unwrap();
        assert_eq!(t.link_count(), 1);
        assert!(t.link_by_name("x").is_none());
    }

    #[test]
    fn malformed_and_invalid_documents() {
        assert!(matches!(load_topology("{"), Err(TopologyError::Parse(_))));
        assert!(matches!(
            load_topology(r#"{"nodes":["a","b"],"links":[{"id":"x","src":"a","dst":"b"}]}"#),
            Err(TopologyError::Parse(_))
        ));
        assert!(matches!(
            load_topology(
                r#"{"nodes":["a","b"],"links":[{"id":"x","src":"a","dst":"b","capacity":"100"}]}"#
            ),
            Err(TopologyError::Parse(_))
        ));
        assert!(matches!(
            load_topology(r#"{"nodes":["a","a"],"links":[]}"#),
            Err(TopologyError::DuplicateNode(_))
        ));
        assert!(matches!(
            load_topology(
                r#"{"nodes":["a"],"links":[{"id":"x","src":"a","dst":"q","capacity_bps":1}]}"#
            ),
            Err(TopologyError::DanglingEndpoint { .. })
        ));
        assert!(matches!(
            load_topology(
                r#"{"nodes":["a","b"],"links":[{"id":"x","src":"a","dst":"b","capacity_bps":-3}]}"#
            ),
            Err(TopologyError::InvalidCapacity { .. })
        ));
    }
}
