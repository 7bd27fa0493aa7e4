//! A wall between two agents: who can see whom, and which cells a ray crosses.

use nestsim::perception::{
    crossed_cells, eye_position, line_of_sight, visible_agents, PerceptionConfig,
};
use nestsim::world::{create_world, AgentSpec, Cell, CellSpec, Region, WorldSpec};
use nestsim::{AgentId, BlockPos};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = WorldSpec::empty(Region::new(BlockPos::new(0, 0, 0), BlockPos::new(9, 2, 9)));
    for y in 0..3 {
        for z in 0..5 {
            spec.cells.push(CellSpec {
                pos: BlockPos::new(5, y, z),
                kind: Cell::Opaque("stone".into()),
            });
        }
    }
    for (id, x, z) in [("alice", 2.5, 2.5), ("bob", 8.5, 2.5), ("carol", 8.5, 8.5)] {
        spec.agents.push(AgentSpec {
            id: AgentId::new(id)?,
            position: [x, 0.0, z],
            yaw: 0.0,
            held_item: None,
            inventory: None,
        });
    }
    let world = create_world(&spec)?;
    let cfg = PerceptionConfig::default();

    for id in ["alice", "bob", "carol"] {
        let seen: Vec<String> = visible_agents(&world, id, &cfg)?
            .iter()
            .map(|a| a.to_string())
            .collect();
        println!("{id} sees {seen:?}");
    }

    let eye = eye_position(&world.agent("alice").expect("alice").pose);
    let target = BlockPos::new(8, 0, 2).center();
    println!(
        "\nray alice -> (8, 0, 2): clear = {}",
        line_of_sight(&world, eye, target, &cfg)?
    );
    for c in crossed_cells(eye, target) {
        println!(
            "  {c}  {}",
            if world.is_opaque(c) { "opaque" } else { "open" }
        );
    }
    Ok(())
}
