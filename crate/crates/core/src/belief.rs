//! Per-agent belief state, its update from observations, and its
//! materialization as a world for a deeper simulator.
//!
//! Beliefs are last-known values with two flags per element: whether it
//! was ever seen, and whether it is in sight right now. Anything outside
//! the current percept keeps its previous value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::format;
use crate::perception::Observation;
use crate::timeline::{ChatRecord, EventRecord, TransferDirection};
use crate::world::{
    normalize_items, AgentBody, AgentId, AgentPose, BlockPos, Bounds, Cell, Container, Items,
    Region, StateSnapshot, WorldState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("observation of `{got}` applied to the belief of `{expected}`")]
    ObserverMismatch { expected: AgentId, got: AgentId },
    #[error("observation tick {observation} precedes belief tick {belief}")]
    TimeRegression { belief: u64, observation: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VisibilityRecord {
    pub seen_before: bool,
    pub visible_now: bool,
}

impl VisibilityRecord {
    pub const IN_SIGHT: Self = Self {
        seen_before: true,
        visible_now: true,
    };
    pub const REMEMBERED: Self = Self {
        seen_before: true,
        visible_now: false,
    };
}

/// Static structure every agent knows from the start (floor, walls).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriorKnowledge {
    pub cells: BTreeMap<BlockPos, Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellBelief {
    pub cell: Cell,
    pub record: VisibilityRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerBelief {
    pub block: String,
    /// `None` is "no data".
    pub contents: Option<Items>,
    pub record: VisibilityRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentBelief {
    pub pose: AgentPose,
    pub held_item: Option<String>,
    /// `None` is "no data"; only witnessed transfers reveal anything.
    pub inventory: Option<Items>,
    pub record: VisibilityRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub owner: AgentId,
    pub tick: u64,
    pub cells: BTreeMap<BlockPos, CellBelief>,
    pub containers: BTreeMap<BlockPos, ContainerBelief>,
    pub agents: BTreeMap<AgentId, AgentBelief>,
    /// The owner's own body, always fully known.
    pub own: AgentBody,
    pub chat_memory: Vec<ChatRecord>,
    pub event_memory: Vec<EventRecord>,
    pub thought: Option<String>,
}

/// Geometry needed to turn a belief back into a world.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefFrame {
    pub bounds: Bounds,
    /// Never-observed positions inside these regions materialize as
    /// `unknown`; everywhere else they are air.
    pub occludable_interior: Vec<Region>,
}

impl BeliefFrame {
    pub fn open(bounds: Bounds) -> Self {
        Self {
            bounds,
            occludable_interior: Vec::new(),
        }
    }
}

pub fn init_belief(owner: AgentId, prior: &PriorKnowledge, self0: AgentBody) -> BeliefState {
    BeliefState {
        owner,
        tick: 0,
        cells: prior
            .cells
            .iter()
            .map(|(pos, cell)| {
                (
                    *pos,
                    CellBelief {
                        cell: cell.clone(),
                        record: VisibilityRecord::REMEMBERED,
                    },
                )
            })
            .collect(),
        containers: BTreeMap::new(),
        agents: BTreeMap::new(),
        own: self0,
        chat_memory: Vec::new(),
        event_memory: Vec::new(),
        thought: None,
    }
}

fn add_items(into: &mut Items, delta: &Items) {
    for (k, v) in delta {
        *into.entry(k.clone()).or_default() += v;
    }
}

fn sub_items(from: &mut Items, delta: &Items) {
    for (k, v) in delta {
        if let Some(n) = from.get_mut(k) {
            *n = n.saturating_sub(*v);
        }
    }
    normalize_items(from);
}

pub fn update_belief(b: &BeliefState, o: &Observation) -> Result<BeliefState, BeliefError> {
    if o.observer != b.owner {
        return Err(BeliefError::ObserverMismatch {
            expected: b.owner.clone(),
            got: o.observer.clone(),
        });
    }
    if o.tick < b.tick {
        return Err(BeliefError::TimeRegression {
            belief: b.tick,
            observation: o.tick,
        });
    }
    let mut n = b.clone();
    n.own = o.own_body.clone();
    for c in n.cells.values_mut() {
        c.record.visible_now = false;
    }
    for c in n.containers.values_mut() {
        c.record.visible_now = false;
    }
    for a in n.agents.values_mut() {
        a.record.visible_now = false;
    }

    for (pos, cell) in &o.visible_cells {
        n.cells.insert(
            *pos,
            CellBelief {
                cell: cell.clone(),
                record: VisibilityRecord::IN_SIGHT,
            },
        );
        if !matches!(cell, Cell::Container(_)) {
            n.containers.remove(pos);
        }
    }
    for (pos, contents) in &o.visible_containers {
        let block = o
            .visible_cells
            .get(pos)
            .and_then(|c| c.block_name())
            .unwrap_or("chest")
            .to_string();
        n.containers.insert(
            *pos,
            ContainerBelief {
                block,
                contents: contents.clone(),
                record: VisibilityRecord::IN_SIGHT,
            },
        );
    }
    for (id, seen) in &o.visible_agents {
        let inventory = n.agents.get(id).and_then(|a| a.inventory.clone());
        n.agents.insert(
            id.clone(),
            AgentBelief {
                pose: seen.pose,
                held_item: seen.held_item.clone(),
                inventory,
                record: VisibilityRecord::IN_SIGHT,
            },
        );
    }

    for chat in &o.heard_chats {
        if !n.chat_memory.contains(chat) {
            n.chat_memory.push(chat.clone());
        }
    }
    n.chat_memory.sort_by_key(ChatRecord::order_key);

    for event in &o.witnessed_events {
        if n.event_memory.contains(event) {
            continue;
        }
        n.event_memory.push(event.clone());
        let Some(effect) = &event.effect else {
            continue;
        };
        if !o.visible_containers.contains_key(&effect.container) {
            let entry = n
                .containers
                .entry(effect.container)
                .or_insert_with(|| ContainerBelief {
                    block: effect.block.clone(),
                    contents: None,
                    record: VisibilityRecord::default(),
                });
            if let Some(contents) = &mut entry.contents {
                match effect.direction {
                    TransferDirection::Deposit => add_items(contents, &effect.items),
                    TransferDirection::Take => sub_items(contents, &effect.items),
                }
            }
        }
        if event.agent != n.owner {
            if let Some(actor) = n.agents.get_mut(&event.agent) {
                match (effect.direction, &mut actor.inventory) {
                    (TransferDirection::Take, Some(inv)) => add_items(inv, &effect.items),
                    (TransferDirection::Take, inv @ None) => *inv = Some(effect.items.clone()),
                    (TransferDirection::Deposit, Some(inv)) => sub_items(inv, &effect.items),
                    (TransferDirection::Deposit, None) => {}
                }
            }
        }
    }
    n.event_memory.sort_by_key(EventRecord::order_key);
    n.tick = o.tick;
    Ok(n)
}

/// Builds the world a deeper simulator should hold for this belief.
///
/// Other agents appear only if they were ever seen; containers whose
/// contents are unknown come out with `contents: None`.
pub fn belief_to_state(b: &BeliefState, frame: &BeliefFrame) -> StateSnapshot {
    let mut w = WorldState::empty(frame.bounds);
    w.tick = b.tick;

    let mut occupied: Vec<BlockPos> = vec![b.own.pose.cell()];
    occupied.extend(
        b.agents
            .values()
            .filter(|a| a.record.seen_before)
            .map(|a| a.pose.cell()),
    );
    for region in &frame.occludable_interior {
        for pos in region.cells() {
            let known = b.cells.contains_key(&pos) || b.containers.contains_key(&pos);
            if !known && frame.bounds.contains(pos) && !occupied.contains(&pos) {
                w.cells.insert(pos, Cell::Unknown);
            }
        }
    }
    for (pos, c) in &b.cells {
        if frame.bounds.contains(*pos) {
            w.cells.insert(*pos, c.cell.clone());
        }
    }
    for (pos, c) in &b.containers {
        if frame.bounds.contains(*pos) {
            w.cells.insert(*pos, Cell::Container(c.block.clone()));
            w.containers.insert(
                *pos,
                Container {
                    pos: *pos,
                    contents: c.contents.clone(),
                },
            );
        }
    }
    let orphans: Vec<BlockPos> = w
        .cells
        .iter()
        .filter(|(pos, cell)| matches!(cell, Cell::Container(_)) && !w.containers.contains_key(pos))
        .map(|(pos, _)| *pos)
        .collect();
    for pos in orphans {
        w.containers.insert(
            pos,
            Container {
                pos,
                contents: None,
            },
        );
    }

    w.agents.insert(b.owner.clone(), b.own.clone());
    for (id, a) in &b.agents {
        if a.record.seen_before && *id != b.owner {
            w.agents.insert(
                id.clone(),
                AgentBody {
                    id: id.clone(),
                    pose: a.pose,
                    held_item: a.held_item.clone(),
                    inventory: a.inventory.clone(),
                },
            );
        }
    }
    StateSnapshot::new(w)
}

fn record_json(r: &VisibilityRecord) -> Value {
    json!({"seen_before": r.seen_before, "visible_now": r.visible_now})
}

fn items_json(items: &Option<Items>) -> Value {
    match items {
        Some(items) => json!(format::items(items)),
        None => json!("No data"),
    }
}

impl BeliefState {
    /// JSON export using the prompt vocabulary (`seen_before`,
    /// `visible_now`, `No data`, `Cannot be seen`).
    pub fn to_json(&self) -> Value {
        let mut cells = Map::new();
        for (pos, c) in &self.cells {
            let mut v = record_json(&c.record);
            v["kind"] = serde_json::to_value(&c.cell).unwrap_or(Value::Null);
            cells.insert(pos.to_string(), v);
        }
        let mut containers = Map::new();
        for (pos, c) in &self.containers {
            let mut v = record_json(&c.record);
            v["block"] = json!(c.block);
            v["contents"] = items_json(&c.contents);
            containers.insert(pos.to_string(), v);
        }
        let mut agents = Map::new();
        for (id, a) in &self.agents {
            let position = if a.record.visible_now {
                json!(format::point(a.pose.position))
            } else {
                json!("Cannot be seen")
            };
            let mut v = record_json(&a.record);
            v["position"] = position;
            v["last_position"] = json!(format::point(a.pose.position));
            v["helditem"] = json!(a.held_item);
            v["inventory"] = items_json(&a.inventory);
            agents.insert(id.to_string(), v);
        }
        json!({
            "owner": self.owner,
            "tick": self.tick,
            "self": {
                "position": format::point(self.own.pose.position),
                "helditem": self.own.held_item,
                "inventory": items_json(&self.own.inventory),
            },
            "thought": self.thought.clone().unwrap_or_else(|| "No thought".into()),
            "cells": cells,
            "containers": containers,
            "agents": agents,
            "chat_memory": self.chat_memory.iter()
                .map(|c| format!("{}; {}: {}", c.tick, c.speaker, c.text))
                .collect::<Vec<_>>(),
            "event_memory": self.event_memory.iter().map(EventRecord::row).collect::<Vec<_>>(),
        })
    }
}
