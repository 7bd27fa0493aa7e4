//! Event and chat records, and per-node timeline branches.
//!
//! A branch is a named copy of a node's whole situation (world, beliefs,
//! history). Switching saves the departing branch first, so no work is lost.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefState;
use crate::nest::{SimNode, SimPath};
use crate::world::{AgentId, BlockPos, Items, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimelineError {
    #[error("branch `{0}` already exists")]
    DuplicateBranchId(BranchId),
    #[error("no branch `{0}`")]
    NoSuchBranch(String),
    #[error("event time {event} does not match node tick {tick}")]
    TimeMismatch { event: u64, tick: u64 },
    #[error("invalid branch id `{0}`")]
    InvalidBranchId(String),
    #[error("invalid branch reference `{0}`: {1}")]
    InvalidRef(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BranchId(String);

impl BranchId {
    pub fn new(id: impl Into<String>) -> Result<Self, TimelineError> {
        let id = id.into();
        if id.is_empty() || id.contains([':', '@', '/']) || id.chars().any(char::is_whitespace) {
            return Err(TimelineError::InvalidBranchId(id));
        }
        Ok(Self(id))
    }

    pub fn main() -> Self {
        Self("main".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for BranchId {
    fn default() -> Self {
        Self::main()
    }
}

impl TryFrom<String> for BranchId {
    type Error = TimelineError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<BranchId> for String {
    fn from(id: BranchId) -> Self {
        id.0
    }
}

impl std::borrow::Borrow<str> for BranchId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Action names as they appear in event logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ActionName {
    MoveTo,
    BreakBlock,
    PlaceBlock,
    OpenChest,
    DepositItemIntoChest,
    TakeFromChest,
    Craft,
    Say,
    SetThought,
}

impl ActionName {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionName::MoveTo => "moveTo",
            ActionName::BreakBlock => "breakBlock",
            ActionName::PlaceBlock => "placeBlock",
            ActionName::OpenChest => "openChest",
            ActionName::DepositItemIntoChest => "depositItemIntoChest",
            ActionName::TakeFromChest => "takeFromChest",
            ActionName::Craft => "craft",
            ActionName::Say => "say",
            ActionName::SetThought => "setThought",
        }
    }
}

impl fmt::Display for ActionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferDirection {
    Deposit,
    Take,
}

/// Item movement between an agent and a container, carried by chest events
/// so that witnesses can update their beliefs without seeing the chest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemTransfer {
    pub container: BlockPos,
    pub block: String,
    pub items: Items,
    pub direction: TransferDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: u64,
    /// Position among the events sharing `time` in the originating log.
    pub seq: u32,
    pub action: ActionName,
    pub agent: AgentId,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<ItemTransfer>,
}

impl EventRecord {
    /// `time;action;agent_name;description`
    pub fn row(&self) -> String {
        format!(
            "{};{};{};{}",
            self.time, self.action, self.agent, self.description
        )
    }

    pub fn order_key(&self) -> (u64, u32) {
        (self.time, self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub tick: u64,
    pub seq: u32,
    pub speaker: AgentId,
    pub text: String,
}

impl ChatRecord {
    pub fn order_key(&self) -> (u64, u32) {
        (self.tick, self.seq)
    }
}

/// Append-only log of what happened in one node's timeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub events: Vec<EventRecord>,
    pub chats: Vec<ChatRecord>,
}

/// Everything a branch saves and restores.
#[derive(Debug, Clone, PartialEq)]
pub struct Situation {
    pub world: WorldState,
    pub beliefs: BTreeMap<AgentId, BeliefState>,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub saved: Situation,
}

/// `<sim-path>[:<branch>][@<owner>]`, e.g. `root/observer/sally:main@sally`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchRef {
    pub path: SimPath,
    pub branch: BranchId,
    /// Perspective owner; defaults to the last path element.
    pub owner: Option<AgentId>,
}

impl BranchRef {
    pub fn new(path: SimPath, branch: BranchId) -> Self {
        Self {
            path,
            branch,
            owner: None,
        }
    }

    pub fn owner(&self) -> Option<&AgentId> {
        self.owner.as_ref().or(self.path.last())
    }
}

impl FromStr for BranchRef {
    type Err = TimelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| TimelineError::InvalidRef(s.to_string(), why.to_string());
        let (rest, owner) = match s.split_once('@') {
            Some((rest, owner)) => (
                rest,
                Some(AgentId::new(owner).map_err(|e| bad(&e.to_string()))?),
            ),
            None => (s, None),
        };
        let (path, branch) = match rest.split_once(':') {
            Some((path, branch)) => (path, BranchId::new(branch)?),
            None => (rest, BranchId::main()),
        };
        let path: SimPath = path
            .parse()
            .map_err(|e: crate::nest::NestError| bad(&e.to_string()))?;
        Ok(Self {
            path,
            branch,
            owner,
        })
    }
}

impl fmt::Display for BranchRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.path, self.branch)?;
        if let Some(owner) = &self.owner {
            write!(f, "@{owner}")?;
        }
        Ok(())
    }
}

impl SimNode {
    /// Copies the current situation into a new branch; the active branch is unchanged.
    pub fn create_branch(&mut self, id: BranchId) -> Result<(), TimelineError> {
        if id == self.active_branch || self.branches.contains_key(&id) {
            return Err(TimelineError::DuplicateBranchId(id));
        }
        let saved = self.situation.clone();
        self.branches.insert(id.clone(), Branch { id, saved });
        Ok(())
    }

    /// Saves the current situation under the active branch, then restores
    /// `id`. The inbox and this tick's buffers are cleared. Returns the
    /// number of inbox messages discarded.
    pub fn switch_branch(&mut self, id: &str) -> Result<usize, TimelineError> {
        if id == self.active_branch.as_str() {
            return Ok(0);
        }
        let target = self
            .branches
            .remove(id)
            .ok_or_else(|| TimelineError::NoSuchBranch(id.to_string()))?;
        let departing = Branch {
            id: self.active_branch.clone(),
            saved: std::mem::replace(&mut self.situation, target.saved),
        };
        self.branches.insert(departing.id.clone(), departing);
        self.active_branch = target.id;
        let dropped = self.inbox.len();
        self.inbox.clear();
        self.pending_events.clear();
        self.pending_chats.clear();
        Ok(dropped)
    }

    /// Appends an event at the current tick, assigning its `seq`.
    pub fn log_event(&mut self, mut e: EventRecord) -> Result<EventRecord, TimelineError> {
        let tick = self.situation.world.tick;
        if e.time != tick {
            return Err(TimelineError::TimeMismatch {
                event: e.time,
                tick,
            });
        }
        e.seq = self
            .situation
            .history
            .events
            .iter()
            .filter(|x| x.time == tick)
            .count() as u32;
        self.situation.history.events.push(e.clone());
        self.pending_events.push(e.clone());
        Ok(e)
    }

    /// Appends a chat line at the current tick.
    pub fn log_chat(&mut self, speaker: AgentId, text: String) -> ChatRecord {
        let tick = self.situation.world.tick;
        let seq = self
            .situation
            .history
            .chats
            .iter()
            .filter(|c| c.tick == tick)
            .count() as u32;
        let chat = ChatRecord {
            tick,
            seq,
            speaker,
            text,
        };
        self.situation.history.chats.push(chat.clone());
        self.pending_chats.push(chat.clone());
        chat
    }

    /// The saved situation of a non-active branch, or the live one.
    pub fn situation_of(&self, branch: &str) -> Option<&Situation> {
        if branch == self.active_branch.as_str() {
            Some(&self.situation)
        } else {
            self.branches.get(branch).map(|b| &b.saved)
        }
    }

    pub fn branch_ids(&self) -> Vec<BranchId> {
        let mut ids: Vec<BranchId> = self.branches.keys().cloned().collect();
        ids.push(self.active_branch.clone());
        ids.sort();
        ids
    }
}
