//! Runs each bundled scenario twice, once with a thread per simulator, and
//! checks both schedules agree.

use std::path::Path;

use nestsim::scenario::{load_scenario, run_scenario, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in [
        "sally_anne_c1",
        "sally_anne_c2",
        "sally_anne_c3",
        "ice_cream_van",
    ] {
        let sc = load_scenario(dir.join(format!("{name}.json")))?;
        let (_, serial) = run_scenario(&sc, RunOptions { concurrent: false })?;
        let (_, threaded) = run_scenario(&sc, RunOptions { concurrent: true })?;
        let sent: u64 = threaded.trace.edges.iter().map(|e| e.sent).sum();
        println!(
            "{name:<14} rounds {:>4}  messages {sent:>4}  identical: {}",
            threaded.trace.rounds,
            serial == threaded
        );
    }
    Ok(())
}
