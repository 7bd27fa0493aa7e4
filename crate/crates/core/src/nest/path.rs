use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NestError;
use crate::world::AgentId;

/// Sequence of agent ids from the real-world root to a belief simulator.
///
/// Ordering is by length first, so sorted iteration is breadth-first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SimPath(Vec<AgentId>);

impl SimPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_ids(ids: Vec<AgentId>) -> Self {
        Self(ids)
    }

    pub fn ids(&self) -> &[AgentId] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<&AgentId> {
        self.0.last()
    }

    /// `self || i`
    pub fn child(&self, i: AgentId) -> Self {
        let mut ids = self.0.clone();
        ids.push(i);
        Self(ids)
    }

    pub fn parent(&self) -> Option<SimPath> {
        let (_, init) = self.0.split_last()?;
        Some(Self(init.to_vec()))
    }

    pub fn starts_with(&self, prefix: &SimPath) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl Ord for SimPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for SimPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SimPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("root")?;
        for id in &self.0 {
            write!(f, "/{id}")?;
        }
        Ok(())
    }
}

impl FromStr for SimPath {
    type Err = NestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.trim().split('/');
        if parts.next() != Some("root") {
            return Err(NestError::BadPath(s.to_string()));
        }
        parts
            .map(|p| AgentId::new(p).map_err(|_| NestError::BadPath(s.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl TryFrom<String> for SimPath {
    type Error = NestError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<SimPath> for String {
    fn from(p: SimPath) -> Self {
        p.to_string()
    }
}
