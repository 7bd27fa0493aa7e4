//! Nested belief simulation for embodied agents.
//!
//! The real world is the root of a tree of voxel simulators. The child of a
//! node for agent `i` holds a world built from `i`'s belief in that node, so
//! the node at `root/observer/sally` is "what the observer believes Sally
//! believes". Beliefs flow down the tree as full snapshots; any node can be
//! detached into control mode to run hypothetical actions, and branches let
//! a node save and restore alternative timelines. Belief states render into
//! text prompts for planners.
//!
//! Module map:
//! - [`world`]: ground-truth voxel state and snapshots
//! - [`perception`]: line of sight and per-agent observation
//! - [`belief`]: belief update and materialization
//! - [`nest`]: the simulator tree and its scheduler
//! - [`timeline`]: event log and branches
//! - [`actions`]: action primitives
//! - [`promptgen`]: prompt templates and filters
//! - [`planner`]: scripted and external planners
//! - [`scenario`]: scenario files, runner and queries
//! - [`cli`]: the command-line front end

pub mod actions;
pub mod belief;
pub mod cli;
pub mod format;
pub mod nest;
pub mod perception;
pub mod planner;
pub mod promptgen;
pub mod scenario;
pub mod timeline;
pub mod world;

pub use actions::{Action, ActionKind};
pub use nest::{Mode, SimConfig, SimPath, SimTree};
pub use world::{AgentId, BlockPos, Items, WorldState};
