//! The three Sally-Anne conditions: where does each simulator think the
//! diamond is, and which chest would Sally open?

use std::path::Path;

use nestsim::planner::{ChestSeeker, PlanRequest};
use nestsim::scenario::{load_scenario, run_scenario, RunOptions};
use nestsim::{AgentId, BlockPos};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let sally = AgentId::new("sally")?;
    let left = BlockPos::new(-2, -51, -4);
    for name in ["sally_anne_c1", "sally_anne_c2", "sally_anne_c3"] {
        let sc = load_scenario(dir.join(format!("{name}.json")))?;
        let (tree, report) = run_scenario(&sc, RunOptions::default())?;
        println!(
            "{name}: {}",
            if report.passed {
                "all assertions pass"
            } else {
                "FAILED"
            }
        );
        for node in tree.nodes() {
            if !node.world().agents.contains_key(&sally) || node.path().is_root() {
                continue;
            }
            let req = PlanRequest::new(
                node.path().clone(),
                sally.clone(),
                "Get a diamond from a chest.",
            );
            let (target, believed) = ChestSeeker.target(&tree, &req)?;
            println!(
                "  {:<22} sally would open the {} chest{}",
                node.path().to_string(),
                if target == left { "left" } else { "right" },
                if believed { "" } else { " (guessing)" }
            );
        }
    }
    Ok(())
}
