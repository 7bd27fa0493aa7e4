//! The simulator tree and its per-node update loop.
//!
//! Every node holds a world and one belief per agent in it. A node in
//! control mode reads its own world each step; a node in follow mode waits
//! for a full snapshot from its parent and overwrites its world with it.
//! Either way, each agent then observes, updates its belief, and, if it has
//! a child simulator, sends that belief down as the child's next world.

mod concurrent;
mod path;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use concurrent::run_concurrent;
pub use path::SimPath;

use crate::actions::ActionConfig;
use crate::belief::{
    belief_to_state, init_belief, update_belief, BeliefError, BeliefFrame, BeliefState,
    PriorKnowledge,
};
use crate::perception::{observe, PerceptionConfig, PerceptionError};
use crate::timeline::{Branch, BranchId, ChatRecord, EventRecord, History, Situation};
use crate::world::{AgentId, Bounds, StateSnapshot, WorldError, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NestError {
    #[error("agent `{agent}` is not present at {path}")]
    UnknownAgent { path: SimPath, agent: String },
    #[error("{0} already exists")]
    ChildExists(SimPath),
    #[error("spawning {path} would exceed the maximum depth {max}")]
    DepthExceeded { path: SimPath, max: usize },
    #[error("{0} nests an agent inside its own belief simulator (self-nesting is disabled)")]
    SelfNesting(SimPath),
    #[error("no child simulator at {0}")]
    NoSuchChild(String),
    #[error("no simulator at {0}")]
    NoSuchNode(SimPath),
    #[error("invalid simulator path `{0}`")]
    BadPath(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Control,
    Follow,
}

/// Tree-wide settings shared by every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub max_depth: usize,
    pub self_nesting: bool,
    pub perception: PerceptionConfig,
    pub prior: PriorKnowledge,
    pub frame: BeliefFrame,
    pub actions: ActionConfig,
}

impl SimConfig {
    pub fn new(bounds: Bounds) -> Self {
        Self {
            max_depth: 4,
            self_nesting: false,
            perception: PerceptionConfig::default(),
            prior: PriorKnowledge::default(),
            frame: BeliefFrame::open(bounds),
            actions: ActionConfig::default(),
        }
    }
}

/// Full-state message from a parent to the child realizing one agent's
/// belief. Carries the believer's memories along with the world.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMessage {
    pub target: SimPath,
    pub snapshot: StateSnapshot,
    pub events: Vec<EventRecord>,
    pub chats: Vec<ChatRecord>,
}

impl BeliefMessage {
    pub fn from_belief(target: SimPath, b: &BeliefState, frame: &BeliefFrame) -> Self {
        Self {
            target,
            snapshot: belief_to_state(b, frame),
            events: b.event_memory.clone(),
            chats: b.chat_memory.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimNode {
    pub(crate) path: SimPath,
    pub(crate) mode: Mode,
    pub(crate) situation: Situation,
    pub(crate) active_branch: BranchId,
    pub(crate) branches: BTreeMap<BranchId, Branch>,
    pub(crate) children: BTreeSet<AgentId>,
    pub(crate) inbox: VecDeque<BeliefMessage>,
    pub(crate) pending_events: Vec<EventRecord>,
    pub(crate) pending_chats: Vec<ChatRecord>,
    pub(crate) resync: bool,
}

impl SimNode {
    pub fn new(path: SimPath, mode: Mode, world: WorldState, cfg: &SimConfig) -> Self {
        let beliefs = world
            .agents
            .iter()
            .map(|(id, body)| {
                (
                    id.clone(),
                    init_belief(id.clone(), &cfg.prior, body.clone()),
                )
            })
            .collect();
        Self {
            path,
            mode,
            situation: Situation {
                world,
                beliefs,
                history: History::default(),
            },
            active_branch: BranchId::main(),
            branches: BTreeMap::new(),
            children: BTreeSet::new(),
            inbox: VecDeque::new(),
            pending_events: Vec::new(),
            pending_chats: Vec::new(),
            resync: false,
        }
    }

    pub fn path(&self) -> &SimPath {
        &self.path
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn world(&self) -> &WorldState {
        &self.situation.world
    }

    pub fn tick(&self) -> u64 {
        self.situation.world.tick
    }

    pub fn beliefs(&self) -> &BTreeMap<AgentId, BeliefState> {
        &self.situation.beliefs
    }

    pub fn belief(&self, agent: &str) -> Option<&BeliefState> {
        self.situation.beliefs.get(agent)
    }

    pub(crate) fn belief_mut(&mut self, agent: &str) -> Option<&mut BeliefState> {
        self.situation.beliefs.get_mut(agent)
    }

    pub(crate) fn world_mut(&mut self) -> &mut WorldState {
        &mut self.situation.world
    }

    pub fn history(&self) -> &History {
        &self.situation.history
    }

    pub fn situation(&self) -> &Situation {
        &self.situation
    }

    pub fn active_branch(&self) -> &BranchId {
        &self.active_branch
    }

    pub fn children(&self) -> &BTreeSet<AgentId> {
        &self.children
    }

    pub fn inbox_len(&self) -> usize {
        self.inbox.len()
    }

    fn reinit_beliefs(&mut self, prior: &PriorKnowledge) {
        let world = &self.situation.world;
        self.situation.beliefs = world
            .agents
            .iter()
            .map(|(id, body)| (id.clone(), init_belief(id.clone(), prior, body.clone())))
            .collect();
    }

    fn sync_roster(&mut self, prior: &PriorKnowledge) {
        let world = &self.situation.world;
        let beliefs = &mut self.situation.beliefs;
        beliefs.retain(|id, _| world.agents.contains_key(id));
        for (id, body) in &world.agents {
            beliefs
                .entry(id.clone())
                .or_insert_with(|| init_belief(id.clone(), prior, body.clone()));
        }
    }
}

/// What one step did, for the scheduler to route and record.
#[derive(Debug, Default)]
pub struct StepOutcome {
    /// Tick of the snapshot applied from the inbox, if any.
    pub applied: Option<u64>,
    pub sent: Vec<BeliefMessage>,
}

/// One iteration of the per-node loop.
pub fn step_node(node: &mut SimNode, cfg: &SimConfig) -> Result<StepOutcome, NestError> {
    let mut events = std::mem::take(&mut node.pending_events);
    let mut chats = std::mem::take(&mut node.pending_chats);
    let mut outcome = StepOutcome::default();

    if node.mode == Mode::Follow {
        let Some(msg) = node.inbox.pop_front() else {
            return Ok(outcome);
        };
        node.situation.world.apply_state(&msg.snapshot)?;
        outcome.applied = Some(msg.snapshot.tick);
        // entries the believer learned since the last message are replayed
        let old = std::mem::take(&mut node.situation.history);
        events = msg
            .events
            .iter()
            .filter(|e| !old.events.contains(e))
            .cloned()
            .collect();
        chats = msg
            .chats
            .iter()
            .filter(|c| !old.chats.contains(c))
            .cloned()
            .collect();
        node.situation.history = History {
            events: msg.events,
            chats: msg.chats,
        };
        let regressed = node
            .situation
            .beliefs
            .values()
            .any(|b| b.tick > msg.snapshot.tick);
        if node.resync || regressed {
            node.reinit_beliefs(&cfg.prior);
            node.resync = false;
            events = node.situation.history.events.clone();
            chats = node.situation.history.chats.clone();
        } else {
            node.sync_roster(&cfg.prior);
        }
    }

    let ids: Vec<AgentId> = node.situation.world.agents.keys().cloned().collect();
    for id in ids {
        let o = observe(
            &node.situation.world,
            id.as_str(),
            &events,
            &chats,
            &cfg.perception,
        )?;
        let b = update_belief(&node.situation.beliefs[&id], &o)?;
        if node.children.contains(&id) {
            let target = node.path.child(id.clone());
            outcome
                .sent
                .push(BeliefMessage::from_belief(target, &b, &cfg.frame));
        }
        node.situation.beliefs.insert(id, b);
    }
    if node.mode == Mode::Control {
        node.situation.world.tick += 1;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Sent,
    Applied,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: u64,
    pub kind: TraceKind,
    pub from: SimPath,
    pub to: SimPath,
    /// Tick of the snapshot carried by the message.
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeStats {
    pub sent: u64,
    pub applied: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchedulerTrace {
    pub entries: Vec<TraceEntry>,
}

impl SchedulerTrace {
    fn record(&mut self, round: u64, kind: TraceKind, to: &SimPath, tick: u64) {
        self.entries.push(TraceEntry {
            round,
            kind,
            from: to.parent().unwrap_or_default(),
            to: to.clone(),
            tick,
        });
    }

    pub fn edges(&self) -> BTreeMap<(SimPath, SimPath), EdgeStats> {
        let mut out: BTreeMap<(SimPath, SimPath), EdgeStats> = BTreeMap::new();
        for e in &self.entries {
            let s = out.entry((e.from.clone(), e.to.clone())).or_default();
            match e.kind {
                TraceKind::Sent => s.sent += 1,
                TraceKind::Applied => s.applied += 1,
                TraceKind::Dropped => s.dropped += 1,
            }
        }
        out
    }
}

/// The whole simulator tree, owned in one place and addressed by path.
#[derive(Debug, Clone)]
pub struct SimTree {
    config: SimConfig,
    nodes: BTreeMap<SimPath, SimNode>,
    trace: SchedulerTrace,
    round: u64,
}

impl SimTree {
    /// A tree with only the real-world root, in control mode.
    pub fn new(world: WorldState, config: SimConfig) -> Self {
        let root = SimNode::new(SimPath::root(), Mode::Control, world, &config);
        Self {
            config,
            nodes: BTreeMap::from([(SimPath::root(), root)]),
            trace: SchedulerTrace::default(),
            round: 0,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn root(&self) -> &SimNode {
        &self.nodes[&SimPath::root()]
    }

    pub fn node(&self, path: &SimPath) -> Option<&SimNode> {
        self.nodes.get(path)
    }

    pub fn node_mut(&mut self, path: &SimPath) -> Option<&mut SimNode> {
        self.nodes.get_mut(path)
    }

    pub(crate) fn node_and_config(
        &mut self,
        path: &SimPath,
    ) -> Result<(&mut SimNode, &SimConfig), NestError> {
        let node = self
            .nodes
            .get_mut(path)
            .ok_or_else(|| NestError::NoSuchNode(path.clone()))?;
        Ok((node, &self.config))
    }

    /// Nodes in breadth-first path order.
    pub fn nodes(&self) -> impl Iterator<Item = &SimNode> {
        self.nodes.values()
    }

    pub fn paths(&self) -> Vec<SimPath> {
        self.nodes.keys().cloned().collect()
    }

    pub fn trace(&self) -> &SchedulerTrace {
        &self.trace
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    fn existing(&self, path: &SimPath) -> Result<&SimNode, NestError> {
        self.nodes
            .get(path)
            .ok_or_else(|| NestError::NoSuchNode(path.clone()))
    }

    /// Creates the follow-mode simulator for agent `i`'s belief at `parent`.
    /// The child starts from that belief and immediately replays the
    /// believer's memories.
    pub fn spawn_child(&mut self, parent: &SimPath, i: &str) -> Result<SimPath, NestError> {
        let node = self.existing(parent)?;
        let belief = node.belief(i).ok_or_else(|| NestError::UnknownAgent {
            path: parent.clone(),
            agent: i.to_string(),
        })?;
        let id = belief.owner.clone();
        let path = parent.child(id.clone());
        if node.children.contains(&id) || self.nodes.contains_key(&path) {
            return Err(NestError::ChildExists(path));
        }
        if path.depth() > self.config.max_depth {
            return Err(NestError::DepthExceeded {
                path,
                max: self.config.max_depth,
            });
        }
        if !self.config.self_nesting && parent.last() == Some(&id) {
            return Err(NestError::SelfNesting(path));
        }
        let msg = BeliefMessage::from_belief(path.clone(), belief, &self.config.frame);
        let world = msg.snapshot.clone().into_world();
        let mut child = SimNode::new(path.clone(), Mode::Follow, world, &self.config);
        self.trace
            .record(self.round, TraceKind::Sent, &path, msg.snapshot.tick);
        child.inbox.push_back(msg);
        // consume it right away so the child starts in step with its parent
        let outcome = step_node(&mut child, &self.config)?;
        if let Some(tick) = outcome.applied {
            self.trace
                .record(self.round, TraceKind::Applied, &path, tick);
        }
        self.nodes.insert(path.clone(), child);
        if let Some(p) = self.nodes.get_mut(parent) {
            p.children.insert(id);
        }
        Ok(path)
    }

    /// Destroys the child for `i` under `parent` and its whole subtree.
    pub fn remove_child(&mut self, parent: &SimPath, i: &str) -> Result<(), NestError> {
        let node = self.existing(parent)?;
        if !node.children.contains(i) {
            return Err(NestError::NoSuchChild(format!("{parent}/{i}")));
        }
        let gone = parent.child(AgentId::new(i)?);
        self.remove_node(&gone)
    }

    /// Removes a non-root node and its subtree; pending messages are dropped.
    pub fn remove_node(&mut self, path: &SimPath) -> Result<(), NestError> {
        let Some(parent) = path.parent() else {
            return Err(NestError::NoSuchChild(path.to_string()));
        };
        if !self.nodes.contains_key(path) {
            return Err(NestError::NoSuchChild(path.to_string()));
        }
        let doomed: Vec<SimPath> = self
            .nodes
            .keys()
            .filter(|p| p.starts_with(path))
            .cloned()
            .collect();
        for p in doomed {
            if let Some(node) = self.nodes.remove(&p) {
                for msg in &node.inbox {
                    self.trace
                        .record(self.round, TraceKind::Dropped, &p, msg.snapshot.tick);
                }
            }
        }
        if let (Some(p), Some(last)) = (self.nodes.get_mut(&parent), path.last()) {
            p.children.remove(last);
        }
        Ok(())
    }

    /// Switching to control discards the inbox; switching to follow makes
    /// the next message a full resynchronization.
    pub fn set_mode(&mut self, path: &SimPath, mode: Mode) -> Result<(), NestError> {
        let round = self.round;
        let node = self
            .nodes
            .get_mut(path)
            .ok_or_else(|| NestError::NoSuchNode(path.clone()))?;
        if node.mode == mode {
            return Ok(());
        }
        node.mode = mode;
        match mode {
            Mode::Control => {
                node.resync = false;
                for msg in node.inbox.drain(..) {
                    self.trace
                        .record(round, TraceKind::Dropped, path, msg.snapshot.tick);
                }
            }
            Mode::Follow => node.resync = true,
        }
        Ok(())
    }

    /// Branch switch at one node; any discarded inbox messages are traced.
    pub fn switch_branch(
        &mut self,
        path: &SimPath,
        branch: &str,
    ) -> Result<(), crate::timeline::TimelineError> {
        let round = self.round;
        let Some(node) = self.nodes.get_mut(path) else {
            return Err(crate::timeline::TimelineError::NoSuchBranch(format!(
                "{path}:{branch}"
            )));
        };
        let ticks: Vec<u64> = node.inbox.iter().map(|m| m.snapshot.tick).collect();
        node.switch_branch(branch)?;
        for t in ticks {
            self.trace.record(round, TraceKind::Dropped, path, t);
        }
        Ok(())
    }

    fn deliver(&mut self, sent: Vec<BeliefMessage>) {
        for msg in sent {
            let tick = msg.snapshot.tick;
            match self.nodes.get_mut(&msg.target) {
                Some(child) => {
                    self.trace
                        .record(self.round, TraceKind::Sent, &msg.target, tick);
                    if child.mode == Mode::Control {
                        self.trace
                            .record(self.round, TraceKind::Dropped, &msg.target, tick);
                    } else {
                        child.inbox.push_back(msg);
                    }
                }
                None => self
                    .trace
                    .record(self.round, TraceKind::Dropped, &msg.target, tick),
            }
        }
    }

    /// Steps one node and routes what it sends.
    pub fn step(&mut self, path: &SimPath) -> Result<(), NestError> {
        let round = self.round;
        let node = self
            .nodes
            .get_mut(path)
            .ok_or_else(|| NestError::NoSuchNode(path.clone()))?;
        let outcome = step_node(node, &self.config)?;
        if let Some(tick) = outcome.applied {
            self.trace.record(round, TraceKind::Applied, path, tick);
        }
        self.deliver(outcome.sent);
        Ok(())
    }

    /// `n` rounds; each steps every node once in breadth-first order, so a
    /// message sent in a round is consumed by its target in the same round.
    pub fn run_deterministic(&mut self, n: usize) -> Result<(), NestError> {
        for _ in 0..n {
            self.round += 1;
            for path in self.paths() {
                if self.nodes.contains_key(&path) {
                    self.step(&path)?;
                }
            }
        }
        Ok(())
    }

    fn digest(&self) -> Vec<(SimPath, Situation)> {
        self.nodes
            .iter()
            .map(|(p, n)| {
                let mut s = n.situation.clone();
                s.world.tick = 0;
                for b in s.beliefs.values_mut() {
                    b.tick = 0;
                }
                (p.clone(), s)
            })
            .collect()
    }

    /// Runs rounds until one changes nothing but clocks, at most `cap`
    /// rounds. Returns the number of rounds run.
    pub fn run_until_quiescent(&mut self, cap: usize) -> Result<usize, NestError> {
        for done in 1..=cap {
            let before = self.digest();
            self.run_deterministic(1)?;
            let pending = self.nodes.values().any(|n| !n.inbox.is_empty());
            if !pending && self.digest() == before {
                return Ok(done);
            }
        }
        Ok(cap)
    }

    pub fn quiescence_cap(&self) -> usize {
        (2 * self.config.max_depth).max(2)
    }

    pub(crate) fn take_nodes(&mut self) -> BTreeMap<SimPath, SimNode> {
        std::mem::take(&mut self.nodes)
    }

    pub(crate) fn restore_nodes(
        &mut self,
        nodes: BTreeMap<SimPath, SimNode>,
        rounds: u64,
        trace: Vec<TraceEntry>,
    ) {
        self.nodes = nodes;
        self.round += rounds;
        self.trace.entries.extend(trace);
    }
}
