use serde::{Deserialize, Serialize};

use super::LinkId;

/// Ordered sequence of directed links. The empty path joins a node to itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Path(Vec<LinkId>);

impl Path {
    pub fn new(links: Vec<LinkId>) -> Self {
        Path(links)
    }

    pub fn links(&self) -> &[LinkId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
