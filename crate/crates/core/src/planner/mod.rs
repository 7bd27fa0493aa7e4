//! Planners map a task (and optionally a rendered prompt) to a list of
//! actions for one agent in one node.
//!
//! The scripted planners read the node's state directly and are pure
//! functions of it. [`ExternalPlanner`] forwards the prompt to an HTTP
//! service and validates what comes back.

mod external;

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

pub use external::{parse_plan_response, ExternalPlanner};

use crate::actions::{walkable_path, Action, ActionKind};
use crate::nest::{SimPath, SimTree};
use crate::timeline::{BranchId, Situation};
use crate::world::{AgentId, BlockPos, Items, Region};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no known chests")]
    NoKnownChests,
    #[error("no information about `{0}`")]
    NoInformation(String),
    #[error("planner service unreachable: {0}")]
    ServiceUnreachable(String),
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("bad plan request: {0}")]
    BadRequest(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub path: SimPath,
    pub branch: BranchId,
    pub agent: AgentId,
    pub task: String,
    pub prompt: String,
}

impl PlanRequest {
    pub fn new(path: SimPath, agent: AgentId, task: &str) -> Self {
        Self {
            path,
            branch: BranchId::main(),
            agent,
            task: task.to_string(),
            prompt: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub actions: Vec<Action>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

pub trait Planner {
    fn plan(&self, tree: &SimTree, req: &PlanRequest) -> Result<Plan, PlanError>;
}

/// Resolves the request to the situation it plans in.
fn situation<'a>(tree: &'a SimTree, req: &PlanRequest) -> Result<&'a Situation, PlanError> {
    let node = tree
        .node(&req.path)
        .ok_or_else(|| PlanError::BadRequest(format!("no simulator at {}", req.path)))?;
    let s = node.situation_of(req.branch.as_str()).ok_or_else(|| {
        PlanError::BadRequest(format!("no branch `{}` at {}", req.branch, req.path))
    })?;
    if !s.world.agents.contains_key(&req.agent) {
        return Err(PlanError::BadRequest(format!(
            "agent `{}` is not in {}",
            req.agent, req.path
        )));
    }
    Ok(s)
}

static GET_ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(?:get|fetch|find|take)\s+(?:an?\s+|the\s+|some\s+)?(.+?)\s+(?:from|out of|in)\b",
    )
    .expect("valid regex")
});

/// The item a chest-seeking task asks for: "Get a diamond from a chest."
/// names `diamond`; a bare item name is taken as is.
pub fn task_item(task: &str) -> Option<String> {
    let raw = match GET_ITEM.captures(task) {
        Some(m) => m[1].to_string(),
        None => task.trim().trim_end_matches('.').to_string(),
    };
    let item = raw.trim().to_lowercase().replace(' ', "_");
    (!item.is_empty() && item.chars().all(|c| c.is_alphanumeric() || c == '_')).then_some(item)
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Opens the chest this node's world says holds the most of the item.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChestSeeker;

impl ChestSeeker {
    /// The chest the plan will open.
    pub fn target(&self, tree: &SimTree, req: &PlanRequest) -> Result<(BlockPos, bool), PlanError> {
        let s = situation(tree, req)?;
        let item = task_item(&req.task).ok_or_else(|| {
            PlanError::BadRequest(format!("no item named in task `{}`", req.task))
        })?;
        let mut best: Option<(BlockPos, u32)> = None;
        for (pos, c) in &s.world.containers {
            let n = c
                .contents
                .as_ref()
                .and_then(|items| items.get(&item))
                .copied()
                .unwrap_or(0);
            if n > 0 && best.is_none_or(|(_, m)| n > m) {
                best = Some((*pos, n));
            }
        }
        if let Some((pos, _)) = best {
            return Ok((pos, true));
        }
        // nothing believed to hold it: try the nearest chest ever seen
        let me = s.world.agents[&req.agent].pose.position;
        let belief = s.beliefs.get(&req.agent);
        let mut nearest: Option<(BlockPos, f64)> = None;
        for (pos, c) in belief.into_iter().flat_map(|b| b.containers.iter()) {
            if !c.record.seen_before {
                continue;
            }
            let d = distance(me, pos.center());
            if nearest.is_none_or(|(_, m)| d < m) {
                nearest = Some((*pos, d));
            }
        }
        nearest
            .map(|(pos, _)| (pos, false))
            .ok_or(PlanError::NoKnownChests)
    }
}

/// Where to stand to use the block at `pos`: the first passable side cell,
/// in x-1, x+1, z-1, z+1 order, that the agent can walk to.
fn standing_spot(s: &Situation, agent: &AgentId, pos: BlockPos) -> [f64; 3] {
    let body = &s.world.agents[agent];
    let from = body.pose.cell();
    for side in [
        pos.offset(-1, 0, 0),
        pos.offset(1, 0, 0),
        pos.offset(0, 0, -1),
        pos.offset(0, 0, 1),
    ] {
        if let Ok(Some(_)) = walkable_path(&s.world, from, side) {
            let c = side.center();
            return [c[0], f64::from(side.y), c[2]];
        }
    }
    body.pose.position
}

impl Planner for ChestSeeker {
    fn plan(&self, tree: &SimTree, req: &PlanRequest) -> Result<Plan, PlanError> {
        let (chest, believed) = self.target(tree, req)?;
        let s = situation(tree, req)?;
        let actor = req.agent.clone();
        let mut actions = vec![
            Action::new(
                actor.clone(),
                ActionKind::MoveTo {
                    target: standing_spot(s, &actor, chest),
                },
            ),
            Action::new(actor.clone(), ActionKind::OpenChest { pos: chest }),
        ];
        let rationale = if believed {
            let item = task_item(&req.task).unwrap_or_default();
            actions.push(Action::new(
                actor,
                ActionKind::TakeFromChest {
                    pos: chest,
                    items: Items::from([(item.clone(), 1)]),
                },
            ));
            format!("{chest} is believed to hold {item}")
        } else {
            format!("no chest is believed to hold the item; checking the nearest one, {chest}")
        };
        Ok(Plan {
            actions,
            rationale: Some(rationale),
        })
    }
}

/// Named places and how agents announce them.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    pub locations: BTreeMap<String, Region>,
    /// Each pattern names the place in a `loc` capture group.
    pub chat_patterns: Vec<Regex>,
    /// Descriptions used in tasks ("ice cream seller") to agent ids.
    pub agent_aliases: BTreeMap<String, AgentId>,
}

impl Gazetteer {
    /// Name of the region containing `p`, first in name order.
    pub fn region_of(&self, p: [f64; 3]) -> Option<&str> {
        self.locations
            .iter()
            .find(|(_, r)| r.contains_point(p))
            .map(|(name, _)| name.as_str())
    }

    /// The place named in `text`, if any pattern matches a known location.
    pub fn announced_place(&self, text: &str) -> Option<&str> {
        self.chat_patterns.iter().find_map(|re| {
            let loc = re.captures(text)?.name("loc")?.as_str();
            self.locations.get_key_value(loc).map(|(k, _)| k.as_str())
        })
    }
}

static GO_TO: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:go|walk|head)\s+to\s+(?:the\s+)?(.+?)\s*\.?\s*$").expect("valid regex")
});

/// Goes where the target agent last said it would be.
#[derive(Debug, Clone, Default)]
pub struct AnnouncementFollower {
    pub places: Gazetteer,
}

impl AnnouncementFollower {
    pub fn new(places: Gazetteer) -> Self {
        Self { places }
    }

    fn target_agent(&self, task: &str) -> Option<AgentId> {
        let name = GO_TO
            .captures(task)
            .map_or_else(|| task.trim().to_string(), |m| m[1].to_string());
        let key = name.to_lowercase();
        if let Some(id) = self.places.agent_aliases.get(&key) {
            return Some(id.clone());
        }
        AgentId::new(name).ok()
    }

    /// Destination and, when it came from an announcement, the place name.
    pub fn destination(
        &self,
        tree: &SimTree,
        req: &PlanRequest,
    ) -> Result<([f64; 3], Option<String>), PlanError> {
        let s = situation(tree, req)?;
        let target = self.target_agent(&req.task).ok_or_else(|| {
            PlanError::BadRequest(format!("no agent named in task `{}`", req.task))
        })?;
        let belief = s.beliefs.get(&req.agent);
        let chats = belief.map(|b| b.chat_memory.as_slice()).unwrap_or_default();
        for chat in chats.iter().rev().filter(|c| c.speaker == target) {
            if let Some(place) = self.places.announced_place(&chat.text) {
                let anchor = self.places.locations[place].anchor();
                return Ok((anchor, Some(place.to_string())));
            }
        }
        belief
            .and_then(|b| b.agents.get(&target))
            .map(|a| (a.pose.position, None))
            .ok_or_else(|| PlanError::NoInformation(target.to_string()))
    }
}

impl Planner for AnnouncementFollower {
    fn plan(&self, tree: &SimTree, req: &PlanRequest) -> Result<Plan, PlanError> {
        let (target, place) = self.destination(tree, req)?;
        let rationale = match place {
            Some(p) => format!("last announcement names {p}"),
            None => "no announcement heard; going to where they were last seen".into(),
        };
        Ok(Plan {
            actions: vec![Action::new(
                req.agent.clone(),
                ActionKind::MoveTo { target },
            )],
            rationale: Some(rationale),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nest::SimConfig;
    use crate::world::{create_world, AgentSpec, ContainerSpec, WorldSpec};

    fn id(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    fn chests_tree(contents: [Items; 2]) -> SimTree {
        let mut spec = WorldSpec::empty(Region::new(
            BlockPos::new(-5, 0, -5),
            BlockPos::new(5, 2, 5),
        ));
        for (x, items) in [-2, 2].into_iter().zip(contents) {
            spec.containers.push(ContainerSpec {
                pos: BlockPos::new(x, 0, 0),
                block: "chest".into(),
                contents: Some(items),
            });
        }
        spec.agents.push(AgentSpec {
            id: id("sally"),
            position: [0.5, 0.0, 2.5],
            yaw: 0.0,
            held_item: None,
            inventory: Some(Items::new()),
        });
        let w = create_world(&spec).unwrap();
        let mut t = SimTree::new(w.clone(), SimConfig::new(w.bounds));
        t.run_deterministic(1).unwrap();
        t
    }

    fn diamonds(n: u32) -> Items {
        Items::from([("diamond".into(), n)])
    }

    #[test]
    fn task_item_parsing() {
        assert_eq!(
            task_item("Get a diamond from a chest.").as_deref(),
            Some("diamond")
        );
        assert_eq!(task_item("diamond").as_deref(), Some("diamond"));
        assert_eq!(
            task_item("Get an iron ingot from the box").as_deref(),
            Some("iron_ingot")
        );
    }

    #[test]
    fn seeks_the_chest_holding_the_item() {
        let t = chests_tree([Items::new(), diamonds(1)]);
        let req = PlanRequest::new(SimPath::root(), id("sally"), "Get a diamond from a chest.");
        let plan = ChestSeeker.plan(&t, &req).unwrap();
        assert_eq!(plan.actions.len(), 3);
        assert_eq!(
            plan.actions[1].kind,
            ActionKind::OpenChest {
                pos: BlockPos::new(2, 0, 0)
            }
        );
        assert_eq!(
            plan.actions[2].kind,
            ActionKind::TakeFromChest {
                pos: BlockPos::new(2, 0, 0),
                items: diamonds(1)
            }
        );
    }

    #[test]
    fn ties_go_to_the_smaller_position() {
        let t = chests_tree([diamonds(1), diamonds(1)]);
        let req = PlanRequest::new(SimPath::root(), id("sally"), "diamond");
        assert_eq!(
            ChestSeeker.target(&t, &req).unwrap(),
            (BlockPos::new(-2, 0, 0), true)
        );
    }

    #[test]
    fn falls_back_to_the_nearest_seen_chest() {
        let t = chests_tree([Items::new(), Items::new()]);
        let req = PlanRequest::new(SimPath::root(), id("sally"), "diamond");
        let plan = ChestSeeker.plan(&t, &req).unwrap();
        assert_eq!(plan.actions.len(), 2);
        assert!(matches!(plan.actions[1].kind, ActionKind::OpenChest { .. }));

        let mut spec =
            WorldSpec::empty(Region::new(BlockPos::new(0, 0, 0), BlockPos::new(2, 2, 2)));
        spec.agents.push(AgentSpec {
            id: id("sally"),
            position: [0.5, 0.0, 0.5],
            yaw: 0.0,
            held_item: None,
            inventory: None,
        });
        let w = create_world(&spec).unwrap();
        let t = SimTree::new(w.clone(), SimConfig::new(w.bounds));
        assert_eq!(ChestSeeker.plan(&t, &req), Err(PlanError::NoKnownChests));
    }

    #[test]
    fn follower_without_announcements_uses_last_sighting() {
        let mut spec = WorldSpec::empty(Region::new(
            BlockPos::new(-5, 0, -5),
            BlockPos::new(5, 2, 5),
        ));
        for (name, x) in [("mary", 2.5), ("seller", 0.5)] {
            spec.agents.push(AgentSpec {
                id: id(name),
                position: [x, 0.0, 0.5],
                yaw: 0.0,
                held_item: None,
                inventory: None,
            });
        }
        let w = create_world(&spec).unwrap();
        let mut t = SimTree::new(w.clone(), SimConfig::new(w.bounds));
        let places = Gazetteer {
            locations: BTreeMap::from([(
                "A".to_string(),
                Region::new(BlockPos::new(-2, 0, -2), BlockPos::new(2, 0, 2)),
            )]),
            chat_patterns: vec![Regex::new(r"stay at (?P<loc>[A-Z])").unwrap()],
            agent_aliases: BTreeMap::from([("ice cream seller".to_string(), id("seller"))]),
        };
        let f = AnnouncementFollower::new(places);
        let req = PlanRequest::new(SimPath::root(), id("mary"), "Go to the ice cream seller.");
        assert_eq!(
            f.destination(&t, &req),
            Err(PlanError::NoInformation("seller".into()))
        );
        t.run_deterministic(1).unwrap();
        let (dest, place) = f.destination(&t, &req).unwrap();
        assert_eq!((dest, place), ([0.5, 0.0, 0.5], None));
        assert_eq!(f.places.region_of(dest), Some("A"));
    }
}
