//! Scenario files: a world, a simulator tree, a tick-stamped script and
//! assertions over the final state.
//!
//! A document may `include` another (path relative to itself). The two are
//! deep-merged: objects merge key by key, anything else in the including
//! document replaces the included value.

mod query;
mod runner;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::actions::{Action, Recipe};
use crate::belief::{BeliefFrame, PriorKnowledge};
use crate::nest::{Mode, SimConfig, SimPath};
use crate::perception::{eye_position, line_of_sight, PerceptionConfig};
use crate::planner::Gazetteer;
use crate::timeline::BranchId;
use crate::world::{
    create_world, AgentId, AgentPose, BlockPos, CellSpec, FillSpec, Region, WorldSpec, WorldState,
};

pub use query::{Query, QueryError};
pub use runner::{
    run_scenario, AssertionResult, EdgeRecord, RunOptions, RunReport, RunTrace, StepRecord,
};

const MAX_INCLUDE_DEPTH: usize = 8;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("schema error at `{path}`: {reason}")]
    Schema { path: String, reason: String },
    #[error("at tick {tick}, step {step}: {reason}")]
    Runtime {
        step: usize,
        tick: u64,
        reason: String,
    },
    #[error("setup failed: {0}")]
    Setup(String),
}

fn schema(path: impl Into<String>, reason: impl ToString) -> ScenarioError {
    ScenarioError::Schema {
        path: path.into(),
        reason: reason.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Document form

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorDoc {
    #[serde(default)]
    fills: Vec<FillSpec>,
    #[serde(default)]
    cells: Vec<CellSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeEntryDoc {
    sim: SimPath,
    #[serde(default = "follow")]
    mode: Mode,
}

fn follow() -> Mode {
    Mode::Follow
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Op {
    Act,
    SetMode,
    Spawn,
    Remove,
    CreateBranch,
    SwitchBranch,
    Run,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    tick: u64,
    #[serde(rename = "do")]
    op: Op,
    sim: Option<SimPath>,
    actor: Option<AgentId>,
    kind: Option<String>,
    args: Option<Value>,
    mode: Option<Mode>,
    branch: Option<BranchId>,
    rounds: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SightEnd {
    Agent(AgentId),
    Stand { stand: [f64; 3] },
    Cell { cell: BlockPos },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SightCheckDoc {
    from: SightEnd,
    to: SightEnd,
    expected: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssertionDoc {
    name: String,
    query: String,
    expected: Value,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: String,
    #[serde(default)]
    description: String,
    world: WorldSpec,
    #[serde(default)]
    prior: PriorDoc,
    view_radius: Option<f64>,
    chat_radius: Option<f64>,
    max_depth: Option<usize>,
    #[serde(default)]
    self_nesting: bool,
    interaction_range: Option<f64>,
    #[serde(default)]
    occludable_interior: Vec<Region>,
    #[serde(default)]
    recipes: BTreeMap<String, Recipe>,
    #[serde(default)]
    locations: BTreeMap<String, Region>,
    #[serde(default)]
    chat_patterns: Vec<String>,
    #[serde(default)]
    agent_aliases: BTreeMap<String, AgentId>,
    #[serde(default)]
    sight_checks: Vec<SightCheckDoc>,
    #[serde(default)]
    tree: Vec<TreeEntryDoc>,
    #[serde(default)]
    script: Vec<StepDoc>,
    #[serde(default)]
    assertions: Vec<AssertionDoc>,
}

// ---------------------------------------------------------------------------
// Validated form

#[derive(Debug, Clone, PartialEq)]
pub enum StepOp {
    Act(Action),
    SetMode(Mode),
    Spawn,
    Remove,
    CreateBranch(BranchId),
    SwitchBranch(BranchId),
    Run(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub tick: u64,
    pub sim: SimPath,
    pub op: StepOp,
}

impl ScriptStep {
    pub fn describe(&self) -> String {
        match &self.op {
            StepOp::Act(a) => a.to_string(),
            StepOp::SetMode(m) => format!("set_mode {m:?}").to_lowercase(),
            StepOp::Spawn => "spawn".into(),
            StepOp::Remove => "remove".into(),
            StepOp::CreateBranch(b) => format!("create_branch {b}"),
            StepOp::SwitchBranch(b) => format!("switch_branch {b}"),
            StepOp::Run(n) => format!("run {n}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Assertion {
    pub name: String,
    pub query_text: String,
    pub query: Query,
    pub expected: Value,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub world: WorldState,
    pub config: SimConfig,
    pub places: Gazetteer,
    pub tree: Vec<(SimPath, Mode)>,
    pub script: Vec<ScriptStep>,
    pub assertions: Vec<Assertion>,
}

/// Deep merge: objects merge recursively, `over` wins everywhere else.
pub fn merge(base: Value, over: Value) -> Value {
    match (base, over) {
        (Value::Object(mut b), Value::Object(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, o) => o,
    }
}

fn read_json(path: &Path) -> Result<Value, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text)
        .map_err(|e| schema(format!("{}:{}:{}", path.display(), e.line(), e.column()), e))
}

fn resolve_includes(path: &Path, seen: &mut Vec<PathBuf>) -> Result<Value, ScenarioError> {
    let canon = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    if seen.contains(&canon) {
        return Err(schema(
            "include",
            format!("include cycle through {}", path.display()),
        ));
    }
    if seen.len() >= MAX_INCLUDE_DEPTH {
        return Err(schema("include", "includes nested too deeply"));
    }
    seen.push(canon);
    let mut doc = read_json(path)?;
    let include = match doc.as_object_mut() {
        Some(obj) => obj.remove("include"),
        None => return Err(schema("", "a scenario must be a JSON object")),
    };
    let out = match include {
        None => doc,
        Some(Value::String(rel)) => {
            let base_path = path.parent().unwrap_or(Path::new(".")).join(rel);
            merge(resolve_includes(&base_path, seen)?, doc)
        }
        Some(_) => return Err(schema("include", "expected a relative path")),
    };
    seen.pop();
    Ok(out)
}

/// Reads, merges and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let value = resolve_includes(path.as_ref(), &mut Vec::new())?;
    scenario_from_value(value)
}

/// Validates an already merged document.
pub fn scenario_from_value(value: Value) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_path_to_error::deserialize(value)
        .map_err(|e| schema(e.path().to_string(), e.inner()))?;
    validate(doc)
}

fn positive(path: &str, v: Option<f64>, default: f64) -> Result<f64, ScenarioError> {
    let v = v.unwrap_or(default);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(schema(path, format!("must be a positive number, got {v}")))
    }
}

fn validate(doc: ScenarioDoc) -> Result<Scenario, ScenarioError> {
    let world = create_world(&doc.world).map_err(|e| schema("world", e))?;
    let agents: BTreeSet<&AgentId> = world.agents.keys().collect();

    let mut prior = PriorKnowledge::default();
    for (i, f) in doc.prior.fills.iter().enumerate() {
        for pos in Region::new(f.min, f.max).cells() {
            prior.cells.insert(pos, f.kind.clone());
        }
        if !world.bounds.contains_region(&Region::new(f.min, f.max)) {
            return Err(schema(
                format!("prior.fills[{i}]"),
                "outside the world bounds",
            ));
        }
    }
    for c in &doc.prior.cells {
        prior.cells.insert(c.pos, c.kind.clone());
    }
    for (pos, cell) in &prior.cells {
        if world.cell(*pos) != *cell {
            return Err(schema(
                "prior",
                format!(
                    "prior says {pos} is {cell:?} but the world has {:?}",
                    world.cell(*pos)
                ),
            ));
        }
    }

    let perception = PerceptionConfig {
        view_radius: positive(
            "view_radius",
            doc.view_radius,
            PerceptionConfig::default().view_radius,
        )?,
        chat_radius: positive(
            "chat_radius",
            doc.chat_radius,
            PerceptionConfig::default().chat_radius,
        )?,
    };
    let mut config = SimConfig::new(world.bounds);
    config.perception = perception;
    config.prior = prior;
    config.self_nesting = doc.self_nesting;
    if let Some(d) = doc.max_depth {
        config.max_depth = d;
    }
    config.actions.interaction_range = positive(
        "interaction_range",
        doc.interaction_range,
        config.actions.interaction_range,
    )?;
    config.actions.recipes = doc.recipes;
    for (i, r) in doc.occludable_interior.iter().enumerate() {
        if !world.bounds.contains_region(r) {
            return Err(schema(
                format!("occludable_interior[{i}]"),
                "outside the world bounds",
            ));
        }
    }
    config.frame = BeliefFrame {
        bounds: world.bounds,
        occludable_interior: doc.occludable_interior,
    };

    let mut places = Gazetteer {
        locations: doc.locations,
        ..Gazetteer::default()
    };
    for (i, p) in doc.chat_patterns.iter().enumerate() {
        let re = Regex::new(p).map_err(|e| schema(format!("chat_patterns[{i}]"), e))?;
        if !re.capture_names().flatten().any(|n| n == "loc") {
            return Err(schema(
                format!("chat_patterns[{i}]"),
                "needs a `loc` capture group",
            ));
        }
        places.chat_patterns.push(re);
    }
    for (alias, id) in doc.agent_aliases {
        if !agents.contains(&id) {
            return Err(schema(
                format!("agent_aliases.{alias}"),
                format!("unknown agent `{id}`"),
            ));
        }
        places.agent_aliases.insert(alias.to_lowercase(), id);
    }

    for (i, check) in doc.sight_checks.iter().enumerate() {
        let at = format!("sight_checks[{i}]");
        let end = |e: &SightEnd, eye: bool| -> Result<[f64; 3], ScenarioError> {
            Ok(match e {
                SightEnd::Agent(id) => {
                    let body = world
                        .agent(id.as_str())
                        .ok_or_else(|| schema(&at, format!("unknown agent `{id}`")))?;
                    if eye {
                        eye_position(&body.pose)
                    } else {
                        body.pose.cell().center()
                    }
                }
                SightEnd::Stand { stand } if eye => eye_position(&AgentPose::at(*stand)),
                SightEnd::Stand { stand } => BlockPos::containing(*stand).center(),
                SightEnd::Cell { cell } => cell.center(),
            })
        };
        let (from, to) = (end(&check.from, true)?, end(&check.to, false)?);
        let seen =
            line_of_sight(&world, from, to, &config.perception).map_err(|e| schema(&at, e))?;
        if seen != check.expected {
            return Err(schema(
                &at,
                format!(
                    "line of sight from {} to {} is {seen}, expected {}",
                    crate::format::point(from),
                    crate::format::point(to),
                    check.expected
                ),
            ));
        }
    }

    let check_path = |at: &str, p: &SimPath| -> Result<(), ScenarioError> {
        if let Some(bad) = p.ids().iter().find(|id| !agents.contains(id)) {
            return Err(schema(at, format!("unknown agent `{bad}` in {p}")));
        }
        if p.depth() > config.max_depth {
            return Err(schema(
                at,
                format!("{p} is deeper than max_depth {}", config.max_depth),
            ));
        }
        if !config.self_nesting && p.ids().windows(2).any(|w| w[0] == w[1]) {
            return Err(schema(at, format!("{p} nests an agent in itself")));
        }
        Ok(())
    };

    let mut known: BTreeSet<SimPath> = BTreeSet::from([SimPath::root()]);
    let mut tree = Vec::new();
    let mut entries: Vec<_> = doc.tree.into_iter().enumerate().collect();
    entries.sort_by(|a, b| a.1.sim.cmp(&b.1.sim));
    for (i, e) in &entries {
        let at = format!("tree[{i}]");
        if e.sim.is_root() {
            if e.mode != Mode::Control {
                return Err(schema(at, "the root is always in control mode"));
            }
            continue;
        }
        check_path(&at, &e.sim)?;
        let parent = e.sim.parent().expect("non-root path has a parent");
        if !known.contains(&parent) {
            return Err(schema(
                at,
                format!("parent {parent} of {} is not in the tree", e.sim),
            ));
        }
        if !known.insert(e.sim.clone()) {
            return Err(schema(at, format!("{} listed twice", e.sim)));
        }
        tree.push((e.sim.clone(), e.mode));
    }

    let mut script = Vec::new();
    let mut last_tick = 0;
    for (i, s) in doc.script.into_iter().enumerate() {
        let at = format!("script[{i}]");
        if s.tick < last_tick {
            return Err(schema(
                at,
                format!("tick {} comes after tick {last_tick}", s.tick),
            ));
        }
        last_tick = s.tick;
        let sim = s.sim.clone().unwrap_or_else(SimPath::root);
        let need = |field: &str, ok: bool| -> Result<(), ScenarioError> {
            if ok {
                Ok(())
            } else {
                Err(schema(
                    format!("{at}.{field}"),
                    format!("required for `{:?}`", s.op).to_lowercase(),
                ))
            }
        };
        let op = match s.op {
            Op::Act => {
                need("actor", s.actor.is_some())?;
                need("kind", s.kind.is_some())?;
                let mut raw = serde_json::Map::new();
                raw.insert("actor".into(), serde_json::json!(s.actor));
                raw.insert("kind".into(), serde_json::json!(s.kind));
                if let Some(args) = &s.args {
                    raw.insert("args".into(), args.clone());
                }
                let action: Action = serde_path_to_error::deserialize(Value::Object(raw))
                    .map_err(|e| schema(format!("{at}.{}", e.path()), e.inner()))?;
                action.validate().map_err(|e| schema(&at, e))?;
                if !agents.contains(&action.actor) {
                    return Err(schema(
                        format!("{at}.actor"),
                        format!("unknown agent `{}`", action.actor),
                    ));
                }
                StepOp::Act(action)
            }
            Op::SetMode => {
                need("mode", s.mode.is_some())?;
                StepOp::SetMode(s.mode.expect("checked"))
            }
            Op::Spawn => {
                need("sim", !sim.is_root())?;
                check_path(&format!("{at}.sim"), &sim)?;
                StepOp::Spawn
            }
            Op::Remove => {
                need("sim", !sim.is_root())?;
                StepOp::Remove
            }
            Op::CreateBranch => {
                need("branch", s.branch.is_some())?;
                StepOp::CreateBranch(s.branch.clone().expect("checked"))
            }
            Op::SwitchBranch => {
                need("branch", s.branch.is_some())?;
                StepOp::SwitchBranch(s.branch.clone().expect("checked"))
            }
            Op::Run => {
                need("rounds", s.rounds.is_some())?;
                StepOp::Run(s.rounds.expect("checked"))
            }
        };
        match &op {
            StepOp::Spawn => {
                let parent = sim.parent().expect("non-root");
                if !known.contains(&parent) {
                    return Err(schema(
                        format!("{at}.sim"),
                        format!("parent {parent} does not exist at this point"),
                    ));
                }
                known.insert(sim.clone());
            }
            StepOp::Remove => {
                if !known.contains(&sim) {
                    return Err(schema(
                        format!("{at}.sim"),
                        format!("{sim} does not exist at this point"),
                    ));
                }
                known.retain(|p| !p.starts_with(&sim));
            }
            _ => {
                if !known.contains(&sim) {
                    return Err(schema(
                        format!("{at}.sim"),
                        format!("{sim} does not exist at this point"),
                    ));
                }
            }
        }
        script.push(ScriptStep {
            tick: s.tick,
            sim,
            op,
        });
    }

    let mut assertions = Vec::new();
    for (i, a) in doc.assertions.into_iter().enumerate() {
        let query = a
            .query
            .parse()
            .map_err(|e: QueryError| schema(format!("assertions[{i}].query"), e))?;
        assertions.push(Assertion {
            name: a.name,
            query_text: a.query,
            query,
            expected: a.expected,
        });
    }

    Ok(Scenario {
        name: doc.name,
        description: doc.description,
        world,
        config,
        places,
        tree,
        script,
        assertions,
    })
}
