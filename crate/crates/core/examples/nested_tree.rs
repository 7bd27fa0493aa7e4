//! Runs Sally-Anne and walks the simulator tree: each node's world is what
//! its owner believes.

use std::path::Path;

use nestsim::scenario::{load_scenario, run_scenario, RunOptions};
use nestsim::BlockPos;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc =
        load_scenario(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/sally_anne_c1.json"))?;
    let (tree, _) = run_scenario(&sc, RunOptions::default())?;
    let (left, right) = (BlockPos::new(-2, -51, -4), BlockPos::new(2, -51, -4));
    for node in tree.nodes() {
        let w = node.world();
        let show = |p: &BlockPos| match &w.containers[p].contents {
            Some(items) => format!("{items:?}"),
            None => "no data".into(),
        };
        println!(
            "{:<22} mode {:?}  agents {:?}  left {}  right {}",
            node.path().to_string(),
            node.mode(),
            w.agents.keys().map(|a| a.as_str()).collect::<Vec<_>>(),
            show(&left),
            show(&right)
        );
    }
    Ok(())
}
