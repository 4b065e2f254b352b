//! Migration requests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{NetworkTopology, NodeId, TopologyError};

#[derive(Debug, Error, PartialEq)]
pub enum RequestError {
    #[error("request `{id}`: {reason}")]
    Invalid { id: String, reason: String },
    #[error("duplicate request id `{0}`")]
    Duplicate(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// One VM to move: `(s_k, d_k, m_k, r_k)` plus an optional arrival time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationRequest {
    pub id: String,
    pub src: NodeId,
    pub dst: NodeId,
    /// Memory size, bytes.
    pub memory: f64,
    /// Page dirty rate, bytes/second.
    pub dirty_rate: f64,
    /// Seconds after the start of the run at which the request appears.
    pub arrival: f64,
}

impl MigrationRequest {
    /// Builds a request, resolving node names against `topology`.
    pub fn new(
        topology: &NetworkTopology,
        id: impl Into<String>,
        src: &str,
        dst: &str,
        memory: f64,
        dirty_rate: f64,
    ) -> Result<Self, RequestError> {
        let req = Self {
            id: id.into(),
            src: topology.node(src)?,
            dst: topology.node(dst)?,
            memory,
            dirty_rate,
            arrival: 0.0,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn arriving_at(mut self, arrival: f64) -> Self {
        self.arrival = arrival;
        self
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        let fail = |reason: String| {
            Err(RequestError::Invalid {
                id: self.id.clone(),
                reason,
            })
        };
        if self.src == self.dst {
            return fail("source and destination coincide".into());
        }
        if !(self.memory.is_finite() && self.memory > 0.0) {
            return fail(format!("memory must be positive, got {}", self.memory));
        }
        if !(self.dirty_rate.is_finite() && self.dirty_rate >= 0.0) {
            return fail(format!(
                "dirty rate must be non-negative, got {}",
                self.dirty_rate
            ));
        }
        if !(self.arrival.is_finite() && self.arrival >= 0.0) {
            return fail(format!(
                "arrival must be non-negative, got {}",
                self.arrival
            ));
        }
        Ok(())
    }
}

/// Rejects duplicate ids and invalid entries.
pub fn validate_requests(requests: &[MigrationRequest]) -> Result<(), RequestError> {
    let mut seen = std::collections::HashSet::new();
    for r in requests {
        r.validate()?;
        if !seen.insert(r.id.as_str()) {
            return Err(RequestError::Duplicate(r.id.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::builtin_two_switch;

    #[test]
    fn resolves_names() {
        let t = builtin_two_switch();
        let r = MigrationRequest::new(&t, "V1", "H1", "H2", 5e8, 0.0).unwrap();
        assert_eq!(t.node_name(r.src), "H1");
    }

    #[test]
    fn rejects_invalid() {
        let t = builtin_two_switch();
        assert!(MigrationRequest::new(&t, "V", "H1", "H1", 5e8, 0.0).is_err());
        assert!(MigrationRequest::new(&t, "V", "H1", "H9", 5e8, 0.0).is_err());
        assert!(MigrationRequest::new(&t, "V", "H1", "H2", 0.0, 0.0).is_err());
        assert!(MigrationRequest::new(&t, "V", "H1", "H2", 1.0, -2.0).is_err());
        let a = MigrationRequest::new(&t, "V", "H1", "H2", 1.0, 0.0).unwrap();
        assert!(a.clone().arriving_at(-1.0).validate().is_err());
        assert_eq!(
            validate_requests(&[a.clone(), a]).unwrap_err(),
            RequestError::Duplicate("V".into())
        );
    }
}
