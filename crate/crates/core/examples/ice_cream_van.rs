//! The ice cream van. Both children hear the seller will stay at A; each
//! later learns on their own that the van moved to B. John never saw Mary
//! get the news, so in John's model of Mary she still goes to A.

use std::path::Path;

use nestsim::planner::{AnnouncementFollower, PlanRequest};
use nestsim::scenario::{load_scenario, run_scenario, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc =
        load_scenario(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/ice_cream_van.json"))?;
    let (tree, report) = run_scenario(&sc, RunOptions::default())?;
    println!(
        "{}: {}",
        sc.name,
        if report.passed {
            "all assertions pass"
        } else {
            "FAILED"
        }
    );

    let follower = AnnouncementFollower::new(sc.places.clone());
    for node in tree.nodes() {
        let Some(owner) = node.path().last() else {
            continue;
        };
        println!("{} remembers:", node.path());
        for c in &node.history().chats {
            println!("  [{}] {}: {}", c.tick, c.speaker, c.text);
        }
        if owner.as_str() == "observer" {
            continue;
        }
        let req = PlanRequest::new(
            node.path().clone(),
            owner.clone(),
            "Go to the ice cream seller.",
        );
        let (point, place) = follower.destination(&tree, &req)?;
        println!(
            "  so {owner} heads to {} {point:?}",
            place.as_deref().unwrap_or("?")
        );
    }
    Ok(())
}
