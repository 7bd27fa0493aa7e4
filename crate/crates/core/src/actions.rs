//! Action primitives executed by agents inside a control-mode simulator.
//!
//! Every action validates completely before touching the world, so a failed
//! action leaves the node exactly as it was. A successful one logs a single
//! event at the node's current tick.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format;
use crate::nest::{Mode, SimNode, SimPath, SimTree};
use crate::timeline::{ActionName, EventRecord, ItemTransfer, TimelineError, TransferDirection};
use crate::world::{AgentId, BlockPos, Cell, Items, WorldError, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("{0} is in follow mode; actions need control mode")]
    NotControlMode(SimPath),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("{pos} is {distance:.2} away, beyond the interaction range")]
    OutOfRange { pos: BlockPos, distance: f64 },
    #[error("insufficient items: {0}")]
    InsufficientItems(String),
    #[error("no recipe named `{0}`")]
    NoSuchRecipe(String),
    #[error("blocked: {0}")]
    Blocked(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no simulator at {0}")]
    NoSuchNode(SimPath),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Recipe {
    pub inputs: Items,
    pub outputs: Items,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionConfig {
    pub interaction_range: f64,
    pub recipes: BTreeMap<String, Recipe>,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self {
            interaction_range: 3.0,
            recipes: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "args",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum ActionKind {
    MoveTo {
        target: [f64; 3],
    },
    BreakBlock {
        pos: BlockPos,
    },
    /// `block` is a block name; `lever` places a lever, anything else an opaque block.
    PlaceBlock {
        pos: BlockPos,
        block: String,
    },
    OpenChest {
        pos: BlockPos,
    },
    DepositToChest {
        pos: BlockPos,
        items: Items,
    },
    TakeFromChest {
        pos: BlockPos,
        items: Items,
    },
    Craft {
        recipe: String,
    },
    Say {
        text: String,
    },
    SetThought {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub actor: AgentId,
    #[serde(flatten)]
    pub kind: ActionKind,
}

impl Action {
    pub fn new(actor: AgentId, kind: ActionKind) -> Self {
        Self { actor, kind }
    }

    /// Argument checks that need no world.
    pub fn validate(&self) -> Result<(), ActionError> {
        match &self.kind {
            ActionKind::MoveTo { target } if !target.iter().all(|v| v.is_finite()) => Err(
                ActionError::InvalidArgument("non-finite move target".into()),
            ),
            ActionKind::DepositToChest { items, .. } | ActionKind::TakeFromChest { items, .. }
                if items.is_empty() || items.values().any(|n| *n == 0) =>
            {
                Err(ActionError::InvalidArgument(
                    "item transfers need at least one item and counts >= 1".into(),
                ))
            }
            ActionKind::PlaceBlock { block, .. } if block.is_empty() => {
                Err(ActionError::InvalidArgument("empty block name".into()))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let args = match &self.kind {
            ActionKind::MoveTo { target } => format!("move_to {}", format::point(*target)),
            ActionKind::BreakBlock { pos } => format!("break_block {pos}"),
            ActionKind::PlaceBlock { pos, block } => format!("place_block {block} {pos}"),
            ActionKind::OpenChest { pos } => format!("open_chest {pos}"),
            ActionKind::DepositToChest { pos, items } => {
                format!("deposit_to_chest {pos} {}", format::items(items))
            }
            ActionKind::TakeFromChest { pos, items } => {
                format!("take_from_chest {pos} {}", format::items(items))
            }
            ActionKind::Craft { recipe } => format!("craft {recipe}"),
            ActionKind::Say { text } => format!("say {text:?}"),
            ActionKind::SetThought { text } => format!("set_thought {text:?}"),
        };
        write!(f, "{}: {args}", self.actor)
    }
}

/// Shortest path of horizontally adjacent passable cells at one height.
/// Neighbors are tried in the order x-1, x+1, z-1, z+1.
pub fn walkable_path(
    s: &WorldState,
    from: BlockPos,
    to: BlockPos,
) -> Result<Option<Vec<BlockPos>>, WorldError> {
    for p in [from, to] {
        if !s.bounds.contains(p) {
            return Err(WorldError::OutOfBounds {
                what: "path endpoint".into(),
                at: p.to_string(),
            });
        }
    }
    if from == to {
        return Ok(Some(vec![from]));
    }
    if from.y != to.y || !s.is_passable(to) {
        return Ok(None);
    }
    let mut came_from: BTreeMap<BlockPos, BlockPos> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    while let Some(cur) = queue.pop_front() {
        for next in [
            cur.offset(-1, 0, 0),
            cur.offset(1, 0, 0),
            cur.offset(0, 0, -1),
            cur.offset(0, 0, 1),
        ] {
            if next == from || came_from.contains_key(&next) || !s.is_passable(next) {
                continue;
            }
            came_from.insert(next, cur);
            if next == to {
                let mut path = vec![to];
                let mut at = to;
                while let Some(prev) = came_from.get(&at) {
                    path.push(*prev);
                    at = *prev;
                }
                path.reverse();
                return Ok(Some(path));
            }
            queue.push_back(next);
        }
    }
    Ok(None)
}

fn has_items(inv: &Items, need: &Items) -> bool {
    need.iter()
        .all(|(k, n)| inv.get(k).copied().unwrap_or(0) >= *n)
}

fn remove_items(inv: &mut Items, take: &Items) {
    for (k, n) in take {
        if let Some(have) = inv.get_mut(k) {
            *have -= n;
        }
    }
    inv.retain(|_, n| *n > 0);
}

fn add_items(inv: &mut Items, give: &Items) {
    for (k, n) in give {
        *inv.entry(k.clone()).or_default() += n;
    }
}

fn in_range(s: &WorldState, actor: &str, pos: BlockPos, range: f64) -> Result<(), ActionError> {
    let p = s.agents[actor].pose.position;
    let c = pos.center();
    let d = ((c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2) + (c[2] - p[2]).powi(2)).sqrt();
    if d > range {
        return Err(ActionError::OutOfRange { pos, distance: d });
    }
    Ok(())
}

fn known_inventory<'a>(s: &'a WorldState, actor: &str) -> Result<&'a Items, ActionError> {
    s.agents[actor]
        .inventory
        .as_ref()
        .ok_or_else(|| ActionError::InsufficientItems(format!("inventory of `{actor}` is unknown")))
}

fn container_contents(s: &WorldState, pos: BlockPos) -> Result<&Items, ActionError> {
    let c = s
        .containers
        .get(&pos)
        .ok_or_else(|| ActionError::Blocked(format!("no container at {pos}")))?;
    c.contents
        .as_ref()
        .ok_or_else(|| ActionError::InsufficientItems(format!("contents of {pos} are unknown")))
}

fn container_block(s: &WorldState, pos: BlockPos) -> String {
    s.cell(pos).block_name().unwrap_or("chest").to_string()
}

/// Runs one action in `node`, returning the logged event.
pub fn execute(
    node: &mut SimNode,
    cfg: &ActionConfig,
    a: &Action,
) -> Result<EventRecord, ActionError> {
    if node.mode() != Mode::Control {
        return Err(ActionError::NotControlMode(node.path().clone()));
    }
    let actor = a.actor.as_str();
    if node.world().agent(actor).is_none() {
        return Err(ActionError::UnknownAgent(actor.to_string()));
    }
    a.validate()?;
    let range = cfg.interaction_range;
    let s = node.world();
    let mut effect = None;

    let (name, description) = match &a.kind {
        ActionKind::MoveTo { target } => {
            if !s.bounds.contains_point(*target) {
                return Err(ActionError::Blocked(format!(
                    "{} is outside the world",
                    format::point(*target)
                )));
            }
            let from = s.agents[actor].pose.cell();
            let to = BlockPos::containing(*target);
            if walkable_path(s, from, to)?.is_none() {
                return Err(ActionError::Blocked(format!(
                    "no walkable path from {from} to {to}"
                )));
            }
            (
                ActionName::MoveTo,
                format!("position:{}", format::point(*target)),
            )
        }
        ActionKind::BreakBlock { pos } => {
            in_range(s, actor, *pos, range)?;
            match s.cell(*pos) {
                Cell::Opaque(_) | Cell::Lever => {}
                other => {
                    return Err(ActionError::Blocked(format!(
                        "cannot break {other:?} at {pos}"
                    )))
                }
            }
            known_inventory(s, actor)?;
            let block = s.cell(*pos).block_name().unwrap_or_default().to_string();
            (ActionName::BreakBlock, format!("block:{block} & pos:{pos}"))
        }
        ActionKind::PlaceBlock { pos, block } => {
            in_range(s, actor, *pos, range)?;
            if !s.bounds.contains(*pos) || !s.cell(*pos).is_air() {
                return Err(ActionError::Blocked(format!("{pos} is not free air")));
            }
            if s.agents.values().any(|b| b.pose.cell() == *pos) {
                return Err(ActionError::Blocked(format!("an agent occupies {pos}")));
            }
            let inv = known_inventory(s, actor)?;
            if !has_items(inv, &Items::from([(block.clone(), 1)])) {
                return Err(ActionError::InsufficientItems(format!(
                    "`{actor}` holds no {block}"
                )));
            }
            (ActionName::PlaceBlock, format!("block:{block} & pos:{pos}"))
        }
        ActionKind::OpenChest { pos } => {
            in_range(s, actor, *pos, range)?;
            if !s.containers.contains_key(pos) {
                return Err(ActionError::Blocked(format!("no container at {pos}")));
            }
            (
                ActionName::OpenChest,
                format!("{}:{pos}", container_block(s, *pos)),
            )
        }
        ActionKind::DepositToChest { pos, items } => {
            in_range(s, actor, *pos, range)?;
            container_contents(s, *pos)?;
            if !has_items(known_inventory(s, actor)?, items) {
                return Err(ActionError::InsufficientItems(format!(
                    "`{actor}` does not hold {}",
                    format::items(items)
                )));
            }
            let block = container_block(s, *pos);
            effect = Some(ItemTransfer {
                container: *pos,
                block: block.clone(),
                items: items.clone(),
                direction: TransferDirection::Deposit,
            });
            (
                ActionName::DepositItemIntoChest,
                format!("{block}:{pos} & items:{}", format::items(items)),
            )
        }
        ActionKind::TakeFromChest { pos, items } => {
            in_range(s, actor, *pos, range)?;
            if !has_items(container_contents(s, *pos)?, items) {
                return Err(ActionError::InsufficientItems(format!(
                    "{pos} does not contain {}",
                    format::items(items)
                )));
            }
            let block = container_block(s, *pos);
            effect = Some(ItemTransfer {
                container: *pos,
                block: block.clone(),
                items: items.clone(),
                direction: TransferDirection::Take,
            });
            (
                ActionName::TakeFromChest,
                format!("{block}:{pos} & items:{}", format::items(items)),
            )
        }
        ActionKind::Craft { recipe } => {
            let r = cfg
                .recipes
                .get(recipe)
                .ok_or_else(|| ActionError::NoSuchRecipe(recipe.clone()))?;
            if !has_items(known_inventory(s, actor)?, &r.inputs) {
                return Err(ActionError::InsufficientItems(format!(
                    "`{actor}` lacks inputs {}",
                    format::items(&r.inputs)
                )));
            }
            (
                ActionName::Craft,
                format!(
                    "recipe:{recipe} & inputs:{} & outputs:{}",
                    format::items(&r.inputs),
                    format::items(&r.outputs)
                ),
            )
        }
        ActionKind::Say { text } => (ActionName::Say, format!("message:{text}")),
        ActionKind::SetThought { text } => (ActionName::SetThought, format!("thought:{text}")),
    };

    // validated; now mutate
    let actor_id = a.actor.clone();
    let world = node.world_mut();
    match &a.kind {
        ActionKind::MoveTo { target } => {
            world.agents.get_mut(actor).expect("checked").pose.position = *target;
        }
        ActionKind::BreakBlock { pos } => {
            let block = world
                .cell(*pos)
                .block_name()
                .unwrap_or_default()
                .to_string();
            world.cells.insert(*pos, Cell::Air);
            let inv = world
                .agents
                .get_mut(actor)
                .and_then(|b| b.inventory.as_mut());
            add_items(inv.expect("checked"), &Items::from([(block, 1)]));
        }
        ActionKind::PlaceBlock { pos, block } => {
            let cell = if block == "lever" {
                Cell::Lever
            } else {
                Cell::Opaque(block.clone())
            };
            world.cells.insert(*pos, cell);
            let inv = world
                .agents
                .get_mut(actor)
                .and_then(|b| b.inventory.as_mut());
            remove_items(inv.expect("checked"), &Items::from([(block.clone(), 1)]));
        }
        ActionKind::DepositToChest { pos, items } => {
            let inv = world
                .agents
                .get_mut(actor)
                .and_then(|b| b.inventory.as_mut());
            remove_items(inv.expect("checked"), items);
            let contents = world
                .containers
                .get_mut(pos)
                .and_then(|c| c.contents.as_mut());
            add_items(contents.expect("checked"), items);
        }
        ActionKind::TakeFromChest { pos, items } => {
            let contents = world
                .containers
                .get_mut(pos)
                .and_then(|c| c.contents.as_mut());
            remove_items(contents.expect("checked"), items);
            // taking into an unknown inventory reveals what was taken
            let body = world.agents.get_mut(actor).expect("checked");
            add_items(body.inventory.get_or_insert_with(Items::new), items);
        }
        ActionKind::Craft { recipe } => {
            let r = &cfg.recipes[recipe];
            let inv = world
                .agents
                .get_mut(actor)
                .and_then(|b| b.inventory.as_mut())
                .expect("checked");
            remove_items(inv, &r.inputs);
            add_items(inv, &r.outputs);
        }
        ActionKind::Say { text } => {
            node.log_chat(actor_id.clone(), text.clone());
        }
        ActionKind::SetThought { text } => {
            if let Some(b) = node.belief_mut(actor) {
                b.thought = Some(text.clone());
            }
        }
        ActionKind::OpenChest { .. } => {}
    }
    let time = node.tick();
    Ok(node.log_event(EventRecord {
        time,
        seq: 0,
        action: name,
        agent: actor_id,
        description,
        effect,
    })?)
}

impl SimTree {
    /// Executes `action` in the node at `path`.
    pub fn execute(&mut self, path: &SimPath, action: &Action) -> Result<EventRecord, ActionError> {
        let (node, cfg) = self
            .node_and_config(path)
            .map_err(|_| ActionError::NoSuchNode(path.clone()))?;
        execute(node, &cfg.actions, action)
    }
}
