//! Loading, running and replaying the bundled scenarios.

mod support;

use std::fs;

use nestsim::planner::{ChestSeeker, PlanRequest, Planner};
use nestsim::scenario::{load_scenario, run_scenario, RunOptions, ScenarioError, StepOp};
use nestsim::timeline::BranchId;
use nestsim::world::BlockPos;
use nestsim::{AgentId, Mode, SimPath};
use serde_json::json;

use support::{run_named, scenario_path, BUNDLED};

fn path(s: &str) -> SimPath {
    s.parse().unwrap()
}

#[test]
fn condition_1_setup() {
    let sc = load_scenario(scenario_path("sally_anne_c1")).unwrap();
    assert_eq!(sc.world.agents.len(), 3);
    assert_eq!(sc.world.containers.len(), 2);
    let tree: Vec<_> = sc.tree.iter().map(|(p, _)| p.to_string()).collect();
    assert_eq!(tree, ["root/observer", "root/observer/sally"]);
    assert!(sc.tree.iter().all(|(_, m)| *m == Mode::Follow));
}

#[test]
fn included_arrays_replace_the_base() {
    let sc = load_scenario(scenario_path("sally_anne_c3")).unwrap();
    assert_eq!(sc.tree.len(), 3);
    assert!(sc.tree.iter().any(|(p, _)| *p == path("root/sally")));
    // objects merge: the world comes from the base
    assert_eq!(sc.world.agents.len(), 3);
}

#[test]
fn bundled_scenarios_pass_their_assertions() {
    for name in BUNDLED {
        let (_, report) = run_named(name);
        assert!(report.passed, "{name}: {:#?}", report.assertions);
        assert!(!report.assertions.is_empty());
    }
}

#[test]
fn every_scripted_action_is_logged_once_at_its_tick() {
    for name in BUNDLED {
        let sc = load_scenario(scenario_path(name)).unwrap();
        let (tree, _) = run_scenario(&sc, RunOptions::default()).unwrap();
        let events = &tree.root().history().events;
        let acts: Vec<_> = sc
            .script
            .iter()
            .filter_map(|s| match &s.op {
                StepOp::Act(a) if s.sim.is_root() => Some((s.tick, a.actor.clone())),
                _ => None,
            })
            .collect();
        assert_eq!(events.len(), acts.len(), "{name}");
        for (tick, actor) in &acts {
            let n = events
                .iter()
                .filter(|e| e.time == *tick && e.agent == *actor)
                .count();
            let want = acts.iter().filter(|(t, a)| t == tick && a == actor).count();
            assert_eq!(n, want, "{name}: {actor} at {tick}");
        }
    }
}

#[test]
fn replays_are_identical_and_concurrent_mode_agrees() {
    for name in BUNDLED {
        let sc = load_scenario(scenario_path(name)).unwrap();
        let (t1, r1) = run_scenario(&sc, RunOptions::default()).unwrap();
        let (_, r2) = run_scenario(&sc, RunOptions::default()).unwrap();
        assert_eq!(r1, r2, "{name}");
        let (t3, r3) = run_scenario(&sc, RunOptions { concurrent: true }).unwrap();
        assert_eq!(r1, r3, "{name}: concurrent run diverged");
        for p in t1.paths() {
            assert_eq!(
                t1.node(&p).unwrap().situation(),
                t3.node(&p).unwrap().situation(),
                "{name} {p}"
            );
        }
    }
}

fn write_variant(dir: &std::path::Path, over: serde_json::Value) -> std::path::PathBuf {
    let mut doc = over;
    doc["include"] = json!(scenario_path("sally_anne_base").to_str().unwrap());
    let file = dir.join("variant.json");
    fs::write(&file, doc.to_string()).unwrap();
    file
}

#[test]
fn undeclared_agent_in_script_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_variant(
        dir.path(),
        json!({"script": [{"tick": 50, "do": "act", "actor": "charlie", "kind": "say", "args": {"text": "hi"}}]}),
    );
    match load_scenario(file) {
        Err(ScenarioError::Schema { path, reason }) => {
            assert_eq!(path, "script[0].actor");
            assert!(reason.contains("charlie"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_script_only_sets_up() {
    let sc = load_scenario(scenario_path("sally_anne_base")).unwrap();
    assert!(sc.script.is_empty());
    let (tree, report) = run_scenario(&sc, RunOptions::default()).unwrap();
    assert!(report.passed && report.trace.steps.is_empty());
    assert!(tree.root().history().events.is_empty());
    assert_eq!(tree.paths().len(), 3);
}

#[test]
fn runtime_errors_carry_script_position() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_variant(
        dir.path(),
        json!({"script": [
            {"tick": 20, "do": "act", "actor": "sally", "kind": "say", "args": {"text": "hi"}},
            {"tick": 30, "do": "act", "actor": "sally", "kind": "take_from_chest",
             "args": {"pos": [2, -51, -4], "items": {"diamond": 1}}}
        ]}),
    );
    let sc = load_scenario(file).unwrap();
    match run_scenario(&sc, RunOptions::default()) {
        Err(ScenarioError::Runtime { step, tick, .. }) => assert_eq!((step, tick), (1, 30)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn a_tick_in_the_past_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_variant(
        dir.path(),
        json!({"script": [{"tick": 0, "do": "run", "rounds": 1}]}),
    );
    let sc = load_scenario(file).unwrap();
    assert!(matches!(
        run_scenario(&sc, RunOptions::default()),
        Err(ScenarioError::Runtime {
            step: 0,
            tick: 0,
            ..
        })
    ));
}

/// Detach the observer's model of Sally, try her plan on a scratch branch,
/// then return to the untouched main timeline.
#[test]
fn hypothetical_plan_on_a_branch() {
    let (mut tree, _) = run_named("sally_anne_c1");
    let sally_sim = path("root/observer/sally");
    tree.set_mode(&sally_sim, Mode::Control).unwrap();
    let before = tree.node(&sally_sim).unwrap().situation().clone();

    let sally = AgentId::new("sally").unwrap();
    let plan = ChestSeeker
        .plan(
            &tree,
            &PlanRequest::new(
                sally_sim.clone(),
                sally.clone(),
                "Get a diamond from a chest.",
            ),
        )
        .unwrap();
    let node = tree.node_mut(&sally_sim).unwrap();
    node.create_branch(BranchId::new("try").unwrap()).unwrap();
    tree.switch_branch(&sally_sim, "try").unwrap();
    for a in &plan.actions {
        tree.execute(&sally_sim, a).unwrap();
        tree.run_deterministic(1).unwrap();
    }
    let tried = tree.node(&sally_sim).unwrap();
    assert_eq!(
        tried.world().agents[&sally]
            .inventory
            .as_ref()
            .and_then(|i| i.get("diamond")),
        Some(&1)
    );
    assert_eq!(
        tried.world().containers[&BlockPos::new(-2, -51, -4)].contents,
        Some(Default::default())
    );

    tree.switch_branch(&sally_sim, "main").unwrap();
    assert_eq!(tree.node(&sally_sim).unwrap().situation(), &before);
    // the real world never saw any of it
    assert_eq!(tree.root().history().events.len(), 5);
}
