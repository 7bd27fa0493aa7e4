//! Detach Sally's simulator, try her plan on a scratch branch, then restore
//! the main timeline untouched.

use std::path::Path;

use nestsim::planner::{ChestSeeker, PlanRequest, Planner};
use nestsim::scenario::{load_scenario, run_scenario, RunOptions};
use nestsim::timeline::BranchId;
use nestsim::{AgentId, Mode, SimPath};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc =
        load_scenario(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/sally_anne_c1.json"))?;
    let (mut tree, _) = run_scenario(&sc, RunOptions::default())?;
    let sim: SimPath = "root/observer/sally".parse()?;
    let sally = AgentId::new("sally")?;
    tree.set_mode(&sim, Mode::Control)?;

    let plan = ChestSeeker.plan(
        &tree,
        &PlanRequest::new(sim.clone(), sally.clone(), "Get a diamond from a chest."),
    )?;
    tree.node_mut(&sim)
        .expect("sally's simulator")
        .create_branch(BranchId::new("try")?)?;
    tree.switch_branch(&sim, "try")?;
    for a in &plan.actions {
        let e = tree.execute(&sim, a)?;
        println!("try:  {}", e.row());
        tree.run_deterministic(1)?;
    }
    let inv = |t: &nestsim::SimTree| {
        format!(
            "{:?}",
            t.node(&sim).expect("node").world().agents[&sally].inventory
        )
    };
    println!("try:  sally holds {}", inv(&tree));

    tree.switch_branch(&sim, "main")?;
    println!("main: sally holds {}", inv(&tree));
    println!(
        "branches: {:?}",
        tree.node(&sim).expect("node").branch_ids()
    );
    Ok(())
}
