//! Per-agent observation: occlusion-aware line of sight, chat hearing and
//! event witnessing.
//!
//! Sight is omnidirectional up to a view radius. A ray is blocked by any
//! opaque cell whose open interior it passes through, other than the cells
//! holding the two endpoints. Rays that only graze an edge or corner of a
//! cell do not enter it, which keeps the relation symmetric.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::{ChatRecord, EventRecord};
use crate::world::{AgentBody, AgentId, AgentPose, BlockPos, Cell, Items, WorldState};

pub const EYE_HEIGHT: f64 = 1.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("position {0} lies outside the world bounds")]
    OutOfBounds(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub view_radius: f64,
    pub chat_radius: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            view_radius: 32.0,
            chat_radius: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeenAgent {
    pub pose: AgentPose,
    pub held_item: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub observer: AgentId,
    pub tick: u64,
    /// The observer's own body, always fully known.
    pub own_body: AgentBody,
    pub visible_cells: BTreeMap<BlockPos, Cell>,
    pub visible_containers: BTreeMap<BlockPos, Option<Items>>,
    pub visible_agents: BTreeMap<AgentId, SeenAgent>,
    pub heard_chats: Vec<ChatRecord>,
    pub witnessed_events: Vec<EventRecord>,
}

impl Observation {
    /// An observation that sees and hears nothing beyond the observer itself.
    pub fn blind(own_body: AgentBody, tick: u64) -> Self {
        Self {
            observer: own_body.id.clone(),
            tick,
            own_body,
            visible_cells: BTreeMap::new(),
            visible_containers: BTreeMap::new(),
            visible_agents: BTreeMap::new(),
            heard_chats: Vec::new(),
            witnessed_events: Vec::new(),
        }
    }
}

pub fn eye_position(pose: &AgentPose) -> [f64; 3] {
    let p = pose.position;
    [p[0], p[1] + EYE_HEIGHT, p[2]]
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Visits, in order, every cell whose open interior the segment passes
/// through. Endpoints are put in lexicographic order first, so both
/// directions visit the same cells. Stops early when `visit` returns false;
/// the return value says whether the walk completed.
pub fn traverse(from: [f64; 3], to: [f64; 3], mut visit: impl FnMut(BlockPos) -> bool) -> bool {
    let (a, b) = if to.partial_cmp(&from) == Some(std::cmp::Ordering::Less) {
        (to, from)
    } else {
        (from, to)
    };
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let mut cell = [0i64; 3];
    for k in 0..3 {
        // moving down from an integer coordinate starts in the cell below
        cell[k] = if d[k] < 0.0 {
            a[k].ceil() as i64 - 1
        } else {
            a[k].floor() as i64
        };
    }
    let crossing = |k: usize, c: i64| -> f64 {
        let boundary = if d[k] > 0.0 { c + 1 } else { c };
        (boundary as f64 - a[k]) / d[k]
    };
    let mut t = 0.0;
    loop {
        let mut next = f64::INFINITY;
        for k in 0..3 {
            if d[k] != 0.0 {
                next = next.min(crossing(k, cell[k]));
            }
        }
        if t < next.min(1.0) {
            let pos = BlockPos::new(cell[0] as i32, cell[1] as i32, cell[2] as i32);
            if !visit(pos) {
                return false;
            }
        }
        if next >= 1.0 {
            return true;
        }
        // every axis whose boundary falls at `next` steps together
        for k in 0..3 {
            if d[k] != 0.0 && crossing(k, cell[k]) == next {
                cell[k] += if d[k] > 0.0 { 1 } else { -1 };
            }
        }
        t = next;
    }
}

/// All cells the segment passes through, in traversal order.
pub fn crossed_cells(from: [f64; 3], to: [f64; 3]) -> Vec<BlockPos> {
    let mut out = Vec::new();
    traverse(from, to, |c| {
        out.push(c);
        true
    });
    out
}

/// Line of sight without the bounds check; cells outside the world are air.
pub fn clear_line(s: &WorldState, from: [f64; 3], to: [f64; 3], view_radius: f64) -> bool {
    if distance(from, to) > view_radius {
        return false;
    }
    let ends = [BlockPos::containing(from), BlockPos::containing(to)];
    traverse(from, to, |c| ends.contains(&c) || !s.is_opaque(c))
}

pub fn line_of_sight(
    s: &WorldState,
    from: [f64; 3],
    to: [f64; 3],
    cfg: &PerceptionConfig,
) -> Result<bool, PerceptionError> {
    for p in [from, to] {
        if !p.iter().all(|v| v.is_finite()) || !s.bounds.contains_point(p) {
            return Err(PerceptionError::OutOfBounds(crate::format::point(p)));
        }
    }
    Ok(clear_line(s, from, to, cfg.view_radius))
}

fn body<'a>(s: &'a WorldState, i: &str) -> Result<&'a AgentBody, PerceptionError> {
    s.agent(i)
        .ok_or_else(|| PerceptionError::UnknownAgent(i.to_string()))
}

/// Ids of every other agent whose occupied cell is in sight of `i`'s eye.
pub fn visible_agents(
    s: &WorldState,
    i: &str,
    cfg: &PerceptionConfig,
) -> Result<BTreeSet<AgentId>, PerceptionError> {
    let me = body(s, i)?;
    let eye = eye_position(&me.pose);
    Ok(s.agents
        .values()
        .filter(|other| other.id != me.id)
        .filter(|other| clear_line(s, eye, other.pose.cell().center(), cfg.view_radius))
        .map(|other| other.id.clone())
        .collect())
}

/// Computes agent `i`'s percept of `s` given this tick's pending events and chats.
///
/// An agent always witnesses its own actions and hears its own speech.
pub fn observe(
    s: &WorldState,
    i: &str,
    pending_events: &[EventRecord],
    pending_chats: &[ChatRecord],
    cfg: &PerceptionConfig,
) -> Result<Observation, PerceptionError> {
    let me = body(s, i)?;
    let eye = eye_position(&me.pose);
    let mut o = Observation::blind(me.clone(), s.tick);

    for (pos, cell) in &s.cells {
        if clear_line(s, eye, pos.center(), cfg.view_radius) {
            o.visible_cells.insert(*pos, cell.clone());
        }
    }
    for (pos, container) in &s.containers {
        if o.visible_cells.contains_key(pos) {
            o.visible_containers
                .insert(*pos, container.contents.clone());
        }
    }
    for id in visible_agents(s, i, cfg)? {
        let other = &s.agents[&id];
        o.visible_agents.insert(
            id,
            SeenAgent {
                pose: other.pose,
                held_item: other.held_item.clone(),
            },
        );
    }
    for chat in pending_chats {
        let heard = chat.speaker == me.id
            || s.agent(chat.speaker.as_str())
                .is_some_and(|sp| distance(sp.pose.position, me.pose.position) <= cfg.chat_radius);
        if heard {
            o.heard_chats.push(chat.clone());
        }
    }
    for event in pending_events {
        if event.agent == me.id || o.visible_agents.contains_key(&event.agent) {
            o.witnessed_events.push(event.clone());
        }
    }
    Ok(o)
}
