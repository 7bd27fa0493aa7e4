//! One agent's belief, updated from what it sees while another agent moves a
//! chest's contents behind its back.

use nestsim::belief::{init_belief, update_belief};
use nestsim::perception::{observe, PerceptionConfig};
use nestsim::world::{
    create_world, AgentSpec, Cell, CellSpec, ContainerSpec, Items, Region, WorldSpec,
};
use nestsim::{AgentId, BlockPos};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chest = BlockPos::new(2, 0, 2);
    let mut spec = WorldSpec::empty(Region::new(BlockPos::new(0, 0, 0), BlockPos::new(9, 2, 5)));
    spec.containers.push(ContainerSpec {
        pos: chest,
        block: "chest".into(),
        contents: Some(Items::from([("apple".into(), 3)])),
    });
    for z in 0..6 {
        for y in 0..3 {
            spec.cells.push(CellSpec {
                pos: BlockPos::new(5, y, z),
                kind: Cell::Opaque("stone".into()),
            });
        }
    }
    spec.agents.push(AgentSpec {
        id: AgentId::new("watcher")?,
        position: [3.5, 0.0, 4.5],
        yaw: 0.0,
        held_item: None,
        inventory: Some(Items::new()),
    });
    let mut world = create_world(&spec)?;
    let cfg = PerceptionConfig::default();
    let me = world.agent("watcher").expect("watcher").clone();
    let mut belief = init_belief(me.id.clone(), &Default::default(), me);

    let o = observe(&world, "watcher", &[], &[], &cfg)?;
    belief = update_belief(&belief, &o)?;
    println!(
        "tick 0: chest holds {:?}",
        belief.containers[&chest].contents
    );

    // the watcher walks behind the wall; someone empties the chest
    world.tick = 1;
    world
        .agents
        .get_mut(belief.owner.as_str())
        .expect("watcher")
        .pose
        .position = [7.5, 0.0, 2.5];
    world.containers.get_mut(&chest).expect("chest").contents = Some(Items::new());
    let o = observe(&world, "watcher", &[], &[], &cfg)?;
    belief = update_belief(&belief, &o)?;
    let c = &belief.containers[&chest];
    println!(
        "tick 1: chest believed to hold {:?} (visible now: {}, seen before: {})",
        c.contents, c.record.visible_now, c.record.seen_before
    );
    Ok(())
}
