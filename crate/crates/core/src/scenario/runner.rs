//! Drives a scenario: builds the tree, plays the script, checks assertions.

use serde::Serialize;
use serde_json::Value;

use super::{Scenario, ScenarioError, StepOp};
use crate::nest::{run_concurrent, Mode, SimPath, SimTree};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Advance idle rounds with one thread per simulator.
    pub concurrent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionResult {
    pub name: String,
    pub query: String,
    pub expected: Value,
    pub actual: Value,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub index: usize,
    pub tick: u64,
    pub sim: SimPath,
    pub step: String,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeRecord {
    pub from: SimPath,
    pub to: SimPath,
    pub sent: u64,
    pub applied: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub rounds: u64,
    pub steps: Vec<StepRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub passed: bool,
    pub final_tick: u64,
    pub assertions: Vec<AssertionResult>,
    pub trace: RunTrace,
}

fn settle(tree: &mut SimTree) -> Result<(), ScenarioError> {
    let cap = tree.quiescence_cap();
    tree.run_until_quiescent(cap)
        .map(drop)
        .map_err(|e| ScenarioError::Setup(e.to_string()))
}

/// Builds the declared tree level by level, letting beliefs settle before
/// each deeper level is spawned.
fn build_tree(sc: &Scenario) -> Result<SimTree, ScenarioError> {
    let mut tree = SimTree::new(sc.world.clone(), sc.config.clone());
    settle(&mut tree)?;
    let deepest = sc.tree.iter().map(|(p, _)| p.depth()).max().unwrap_or(0);
    for depth in 1..=deepest {
        for (path, mode) in sc.tree.iter().filter(|(p, _)| p.depth() == depth) {
            let parent = path.parent().expect("non-root path");
            let agent = path.last().expect("non-root path");
            tree.spawn_child(&parent, agent.as_str())
                .map_err(|e| ScenarioError::Setup(format!("spawning {path}: {e}")))?;
            if *mode == Mode::Control {
                tree.set_mode(path, Mode::Control)
                    .map_err(|e| ScenarioError::Setup(e.to_string()))?;
            }
        }
        settle(&mut tree)?;
    }
    Ok(tree)
}

fn advance_to(tree: &mut SimTree, tick: u64, opts: RunOptions) -> Result<(), String> {
    let now = tree.root().tick();
    if now > tick {
        return Err(format!(
            "tick {tick} has already passed (the world is at {now})"
        ));
    }
    let rounds = (tick - now) as usize;
    let r = if opts.concurrent {
        run_concurrent(tree, rounds)
    } else {
        tree.run_deterministic(rounds)
    };
    r.map_err(|e| e.to_string())
}

/// Runs the scenario to completion. Returns the final tree alongside the
/// report so callers can inspect or render from it.
pub fn run_scenario(
    sc: &Scenario,
    opts: RunOptions,
) -> Result<(SimTree, RunReport), ScenarioError> {
    let mut tree = build_tree(sc)?;
    let mut steps = Vec::new();
    let mut i = 0;
    while i < sc.script.len() {
        let tick = sc.script[i].tick;
        let runtime = |step: usize, reason: String| ScenarioError::Runtime { step, tick, reason };
        advance_to(&mut tree, tick, opts).map_err(|r| runtime(i, r))?;
        // steps sharing a tick run back to back before the tree settles
        while i < sc.script.len() && sc.script[i].tick == tick {
            let step = &sc.script[i];
            let outcome = match &step.op {
                StepOp::Act(a) => tree
                    .execute(&step.sim, a)
                    .map(|e| e.row())
                    .map_err(|e| e.to_string()),
                StepOp::SetMode(m) => tree
                    .set_mode(&step.sim, *m)
                    .map(|_| "ok".into())
                    .map_err(|e| e.to_string()),
                StepOp::Spawn => {
                    let parent = step.sim.parent().expect("validated");
                    let agent = step.sim.last().expect("validated");
                    tree.spawn_child(&parent, agent.as_str())
                        .map(|p| format!("spawned {p}"))
                        .map_err(|e| e.to_string())
                }
                StepOp::Remove => tree
                    .remove_node(&step.sim)
                    .map(|_| "ok".into())
                    .map_err(|e| e.to_string()),
                StepOp::CreateBranch(b) => tree
                    .node_mut(&step.sim)
                    .ok_or_else(|| format!("no simulator at {}", step.sim))
                    .and_then(|n| n.create_branch(b.clone()).map_err(|e| e.to_string()))
                    .map(|_| "ok".into()),
                StepOp::SwitchBranch(b) => tree
                    .switch_branch(&step.sim, b.as_str())
                    .map(|_| "ok".into())
                    .map_err(|e| e.to_string()),
                StepOp::Run(n) => tree
                    .run_deterministic(*n)
                    .map(|_| "ok".into())
                    .map_err(|e| e.to_string()),
            }
            .map_err(|r| runtime(i, r))?;
            steps.push(StepRecord {
                index: i,
                tick,
                sim: step.sim.clone(),
                step: step.describe(),
                outcome,
            });
            i += 1;
        }
        let cap = tree.quiescence_cap();
        tree.run_until_quiescent(cap)
            .map_err(|e| runtime(i - 1, e.to_string()))?;
    }

    let assertions: Vec<AssertionResult> = sc
        .assertions
        .iter()
        .map(|a| {
            let (actual, error) = match a.query.eval(&tree, &sc.places) {
                Ok(v) => (v, None),
                Err(e) => (Value::Null, Some(e.to_string())),
            };
            AssertionResult {
                name: a.name.clone(),
                query: a.query_text.clone(),
                passed: error.is_none() && actual == a.expected,
                expected: a.expected.clone(),
                actual,
                error,
            }
        })
        .collect();

    let edges = tree
        .trace()
        .edges()
        .into_iter()
        .map(|((from, to), s)| EdgeRecord {
            from,
            to,
            sent: s.sent,
            applied: s.applied,
            dropped: s.dropped,
        })
        .collect();
    let report = RunReport {
        scenario: sc.name.clone(),
        passed: assertions.iter().all(|a| a.passed),
        final_tick: tree.root().tick(),
        assertions,
        trace: RunTrace {
            rounds: tree.rounds(),
            steps,
            edges,
        },
    };
    Ok((tree, report))
}
