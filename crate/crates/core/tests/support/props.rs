//! Randomized property suites. Each takes a case count and returns a
//! description of the first (shrunk) counterexample, so the same suite can
//! back a regular test and the acceptance report.

use std::collections::BTreeMap;

use nestsim::actions::Recipe;
use nestsim::belief::{belief_to_state, init_belief, update_belief, PriorKnowledge};
use nestsim::perception::{line_of_sight, observe, PerceptionConfig};
use nestsim::timeline::{BranchId, Situation};
use nestsim::world::{create_world, BlockPos, Cell, Items, WorldSpec, WorldState};
use nestsim::{Action, ActionKind, Mode, SimConfig, SimPath, SimTree};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use super::gen::{self, agent_id, ITEM_NAMES};
use super::oracle;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn world(spec: &WorldSpec) -> WorldState {
    create_world(spec).expect("generated worlds are valid")
}

// ---------------------------------------------------------------------------
// line of sight

pub fn line_of_sight_matches_oracle(cases: u32) -> Result<(), String> {
    let strategy = gen::world_spec().prop_flat_map(|spec| {
        let b = spec.bounds;
        (
            Just(spec),
            gen::lattice_point(b),
            gen::lattice_point(b),
            prop_oneof![Just(2.5), Just(4.0), Just(100.0)],
        )
    });
    check(cases, strategy, |(spec, from, to, radius)| {
        let w = world(&spec);
        let cfg = PerceptionConfig {
            view_radius: radius,
            chat_radius: 16.0,
        };
        let got =
            line_of_sight(&w, from, to, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(
            got,
            oracle::line_of_sight(&w, from, to, radius),
            "from {:?} to {:?}",
            from,
            to
        );
        prop_assert_eq!(got, line_of_sight(&w, to, from, &cfg).unwrap(), "symmetry");
        if got {
            // removing any occluder keeps a clear line clear
            for (pos, cell) in &w.cells {
                if cell.is_opaque() {
                    let mut w2 = w.clone();
                    w2.cells.insert(*pos, Cell::Air);
                    prop_assert!(
                        line_of_sight(&w2, from, to, &cfg).unwrap(),
                        "removing {} blocked the line",
                        pos
                    );
                }
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// belief update

#[derive(Debug, Clone)]
struct Change {
    toggles: Vec<(usize, bool)>,
    refills: Vec<Items>,
    moves: Vec<[f64; 3]>,
}

fn apply_change(spec: &WorldSpec, ch: &Change) -> WorldState {
    let mut w = world(spec);
    let agent_cells: Vec<BlockPos> = w.agents.values().map(|a| a.pose.cell()).collect();
    let cells: Vec<BlockPos> = spec.bounds.cells().collect();
    for (i, solid) in &ch.toggles {
        let pos = cells[i % cells.len()];
        if agent_cells.contains(&pos) || w.containers.contains_key(&pos) {
            continue;
        }
        w.cells.insert(
            pos,
            if *solid {
                Cell::Opaque("stone".into())
            } else {
                Cell::Air
            },
        );
    }
    for (c, items) in w.containers.values_mut().zip(&ch.refills) {
        c.contents = Some(items.clone());
    }
    // everyone but the observer (a0) may wander onto a free cell
    let ids: Vec<_> = w.agents.keys().skip(1).cloned().collect();
    for (id, target) in ids.iter().zip(&ch.moves) {
        let pos = BlockPos::containing(*target);
        if w.cell(pos).is_passable() && !w.containers.contains_key(&pos) {
            w.agents.get_mut(id).unwrap().pose.position = *target;
        }
    }
    w.tick = 1;
    w
}

pub fn belief_update_laws(cases: u32) -> Result<(), String> {
    let strategy = gen::world_spec().prop_flat_map(|spec| {
        let b = spec.bounds;
        let change = (
            vec((0..192usize, any::<bool>()), 0..12),
            vec(gen::items(), 0..=2),
            vec(gen::stand_point(b), 0..=2),
        )
            .prop_map(|(toggles, refills, moves)| Change {
                toggles,
                refills,
                moves,
            });
        (Just(spec), change)
    });
    check(cases, strategy, |(spec, change)| {
        let cfg = PerceptionConfig::default();
        let me = agent_id(0);
        let w1 = world(&spec);
        let w2 = apply_change(&spec, &change);
        let b0 = init_belief(
            me.clone(),
            &PriorKnowledge::default(),
            w1.agents[&me].clone(),
        );
        let o1 = observe(&w1, me.as_str(), &[], &[], &cfg).unwrap();
        let b1 = update_belief(&b0, &o1).unwrap();
        let o2 = observe(&w2, me.as_str(), &[], &[], &cfg).unwrap();
        let b2 = update_belief(&b1, &o2).unwrap();

        // idempotence
        prop_assert_eq!(&update_belief(&b2, &o2).unwrap(), &b2);

        for (pos, before) in &b1.cells {
            let after = b2.cells.get(pos);
            prop_assert!(after.is_some(), "belief about {} vanished", pos);
            let after = after.unwrap();
            prop_assert!(
                after.record.seen_before || !before.record.seen_before,
                "seen_before reset at {}",
                pos
            );
            if !o2.visible_cells.contains_key(pos) {
                prop_assert_eq!(&after.cell, &before.cell, "unobserved cell {} changed", pos);
                prop_assert_eq!(after.record.seen_before, before.record.seen_before);
                prop_assert!(!after.record.visible_now);
            }
        }
        for (pos, before) in &b1.containers {
            if !o2.visible_cells.contains_key(pos) {
                let after = b2.containers.get(pos);
                prop_assert!(after.is_some(), "unobserved container {} forgotten", pos);
                prop_assert_eq!(&after.unwrap().contents, &before.contents);
                prop_assert!(!after.unwrap().record.visible_now);
            }
        }
        for (id, before) in &b1.agents {
            if !o2.visible_agents.contains_key(id) {
                let after = &b2.agents[id];
                prop_assert_eq!(
                    after.pose,
                    before.pose,
                    "unseen agent {} moved in belief",
                    id
                );
                prop_assert_eq!(&after.held_item, &before.held_item);
                prop_assert!(!after.record.visible_now);
                prop_assert!(after.record.seen_before || !before.record.seen_before);
            }
        }
        // what is in sight is believed as it is
        for (pos, cell) in &o2.visible_cells {
            prop_assert_eq!(&b2.cells[pos].cell, cell);
            prop_assert_eq!(&w2.cell(*pos), cell);
            prop_assert!(b2.cells[pos].record.visible_now);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// propagation

fn move_actions(n_agents: usize, targets: &[(usize, [f64; 3])]) -> Vec<Action> {
    targets
        .iter()
        .map(|(k, t)| Action::new(agent_id(k % n_agents), ActionKind::MoveTo { target: *t }))
        .collect()
}

fn settle(t: &mut SimTree) {
    let cap = t.quiescence_cap();
    t.run_until_quiescent(cap).unwrap();
}

/// root/a0 and, when a0 has seen a1, root/a0/a1.
fn two_level_tree(w: WorldState) -> SimTree {
    let mut cfg = SimConfig::new(w.bounds);
    cfg.max_depth = 3;
    let mut t = SimTree::new(w, cfg);
    t.run_deterministic(1).unwrap();
    let child = t.spawn_child(&SimPath::root(), "a0").unwrap();
    settle(&mut t);
    let _ = t.spawn_child(&child, "a1");
    settle(&mut t);
    t
}

pub fn propagation_soundness(cases: u32) -> Result<(), String> {
    let strategy = gen::social_world_spec().prop_flat_map(|spec| {
        let b = spec.bounds;
        (Just(spec), vec((0..3usize, gen::stand_point(b)), 0..6))
    });
    check(cases, strategy, |(spec, moves)| {
        let w = world(&spec);
        let n = w.agents.len();
        let mut t = two_level_tree(w);
        for a in move_actions(n, &moves) {
            let _ = t.execute(&SimPath::root(), &a);
            settle(&mut t);
        }
        for node in t.nodes() {
            let Some(parent) = node.path().parent() else {
                continue;
            };
            prop_assert_eq!(node.mode(), Mode::Follow);
            let agent = node.path().last().unwrap();
            let belief = t.node(&parent).unwrap().belief(agent.as_str()).unwrap();
            let expected = belief_to_state(belief, &t.config().frame);
            prop_assert_eq!(
                node.world(),
                &*expected,
                "{} diverged from its parent's belief",
                node.path()
            );
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// control-mode isolation

fn random_action(
    n_agents: usize,
    k: usize,
    kind: u8,
    target: [f64; 3],
    item: usize,
    count: u32,
) -> Action {
    let actor = agent_id(k % n_agents);
    let pos = BlockPos::containing(target);
    let items = Items::from([(ITEM_NAMES[item % ITEM_NAMES.len()].to_string(), count)]);
    let kind = match kind % 8 {
        0 => ActionKind::MoveTo { target },
        1 => ActionKind::DepositToChest { pos, items },
        2 => ActionKind::TakeFromChest { pos, items },
        3 => ActionKind::BreakBlock { pos },
        4 => ActionKind::PlaceBlock {
            pos,
            block: ITEM_NAMES[item % ITEM_NAMES.len()].to_string(),
        },
        5 => ActionKind::Craft {
            recipe: "sticks".into(),
        },
        6 => ActionKind::Say {
            text: format!("hello {count}"),
        },
        _ => ActionKind::OpenChest { pos },
    };
    Action::new(actor, kind)
}

type ActionSeed = (usize, u8, [f64; 3], usize, u32);

fn action_seeds(b: nestsim::world::Region) -> impl Strategy<Value = Vec<ActionSeed>> {
    vec(
        (
            0..3usize,
            any::<u8>(),
            gen::stand_point(b),
            0..3usize,
            1..3u32,
        ),
        0..10,
    )
}

pub fn control_isolation(cases: u32) -> Result<(), String> {
    let strategy = gen::social_world_spec().prop_flat_map(|spec| {
        let b = spec.bounds;
        (Just(spec), action_seeds(b), 1..4usize)
    });
    check(cases, strategy, |(spec, seeds, rounds)| {
        let w = world(&spec);
        let n = w.agents.len();
        let mut t = two_level_tree(w);
        let detached: SimPath = "root/a0".parse().unwrap();
        t.set_mode(&detached, Mode::Control).unwrap();
        let mut twin = t.clone();
        for (k, kind, target, item, count) in seeds {
            let _ = t.execute(
                &SimPath::root(),
                &random_action(n, k, kind, target, item, count),
            );
            t.run_deterministic(rounds).unwrap();
            twin.run_deterministic(rounds).unwrap();
        }
        for p in t.paths().into_iter().filter(|p| p.starts_with(&detached)) {
            prop_assert_eq!(
                t.node(&p).unwrap().situation(),
                twin.node(&p).unwrap().situation(),
                "{} was affected by root actions",
                p
            );
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// branches

#[derive(Debug, Clone)]
enum BranchOp {
    Create(u8),
    Switch(u8),
    Act(ActionSeed),
    Step,
}

fn branch_name(k: u8) -> String {
    match k % 4 {
        0 => "main".into(),
        k => format!("b{k}"),
    }
}

pub fn branch_restore(cases: u32) -> Result<(), String> {
    let strategy = gen::world_spec().prop_flat_map(|spec| {
        let b = spec.bounds;
        let op = prop_oneof![
            any::<u8>().prop_map(BranchOp::Create),
            any::<u8>().prop_map(BranchOp::Switch),
            (
                0..3usize,
                any::<u8>(),
                gen::stand_point(b),
                0..3usize,
                1..3u32
            )
                .prop_map(BranchOp::Act),
            Just(BranchOp::Step),
        ];
        (Just(spec), vec(op, 1..16))
    });
    check(cases, strategy, |(spec, ops)| {
        let w = world(&spec);
        let n = w.agents.len();
        let root = SimPath::root();
        let mut cfg = SimConfig::new(w.bounds);
        cfg.actions.interaction_range = 100.0;
        let mut t = SimTree::new(w, cfg);
        let mut saved: BTreeMap<String, Situation> = BTreeMap::new();
        let mut active = "main".to_string();
        for op in ops {
            match op {
                BranchOp::Create(k) => {
                    let name = branch_name(k);
                    let r = t
                        .node_mut(&root)
                        .unwrap()
                        .create_branch(BranchId::new(name.clone()).unwrap());
                    let fresh = name != active && !saved.contains_key(&name);
                    prop_assert_eq!(r.is_ok(), fresh);
                    if fresh {
                        saved.insert(name, t.root().situation().clone());
                    }
                }
                BranchOp::Switch(k) => {
                    let name = branch_name(k);
                    let before = t.root().situation().clone();
                    let r = t.switch_branch(&root, &name);
                    if name == active {
                        prop_assert!(r.is_ok());
                        prop_assert_eq!(t.root().situation(), &before);
                    } else if let Some(target) = saved.remove(&name) {
                        prop_assert!(r.is_ok());
                        prop_assert_eq!(
                            t.root().situation(),
                            &target,
                            "switching to {} did not restore it",
                            name
                        );
                        saved.insert(std::mem::replace(&mut active, name), before);
                    } else {
                        prop_assert!(r.is_err());
                        prop_assert_eq!(t.root().situation(), &before);
                    }
                }
                BranchOp::Act((k, kind, target, item, count)) => {
                    let _ = t.execute(&root, &random_action(n, k, kind, target, item, count));
                }
                BranchOp::Step => t.run_deterministic(1).unwrap(),
            }
            prop_assert_eq!(t.root().active_branch().as_str(), active.as_str());
            for (name, s) in &saved {
                prop_assert_eq!(
                    t.root().situation_of(name),
                    Some(s),
                    "saved branch {} changed",
                    name
                );
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// item conservation

pub fn item_conservation(cases: u32) -> Result<(), String> {
    let strategy = gen::world_spec().prop_flat_map(|spec| {
        let b = spec.bounds;
        (Just(spec), action_seeds(b))
    });
    check(cases, strategy, |(spec, seeds)| {
        let w = world(&spec);
        let n = w.agents.len();
        let root = SimPath::root();
        let recipe = Recipe {
            inputs: Items::from([("stone".to_string(), 2)]),
            outputs: Items::from([("stick".to_string(), 4)]),
        };
        let mut cfg = SimConfig::new(w.bounds);
        cfg.actions.interaction_range = 100.0;
        cfg.actions.recipes.insert("sticks".into(), recipe.clone());
        let mut t = SimTree::new(w, cfg);
        for (k, kind, target, item, count) in seeds {
            let a = random_action(n, k, kind, target, item, count);
            let before = t.root().situation().clone();
            let mut expected = oracle::item_totals(&before.world);
            match t.execute(&root, &a) {
                Ok(_) => {
                    if let ActionKind::Craft { .. } = a.kind {
                        for (item, n) in &recipe.inputs {
                            *expected.entry(item.clone()).or_insert(0) -= i64::from(*n);
                        }
                        for (item, n) in &recipe.outputs {
                            *expected.entry(item.clone()).or_insert(0) += i64::from(*n);
                        }
                        expected.retain(|_, n| *n != 0);
                    }
                    prop_assert_eq!(
                        oracle::item_totals(t.root().world()),
                        expected,
                        "after {}",
                        a
                    );
                }
                // a rejected action changes nothing
                Err(_) => prop_assert_eq!(
                    t.root().situation(),
                    &before,
                    "rejected {} mutated the node",
                    a
                ),
            }
            t.run_deterministic(1).unwrap();
        }
        Ok(())
    })
}

pub type Suite = fn(u32) -> Result<(), String>;

/// Every suite, for the acceptance report.
pub const SUITES: [(&str, Suite); 6] = [
    (
        "line_of_sight matches the occluder oracle and is monotone",
        line_of_sight_matches_oracle,
    ),
    (
        "update_belief: unobserved invariance, idempotence, seen_before monotone",
        belief_update_laws,
    ),
    ("propagation soundness at fixpoint", propagation_soundness),
    ("control-mode isolation", control_isolation),
    ("branch restore exactness", branch_restore),
    ("item conservation", item_conservation),
];
