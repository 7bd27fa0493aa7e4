//! Renders a planner prompt from Sally's nested belief, with a custom filter.

use std::path::Path;

use nestsim::promptgen::{render, FilterRegistry, FilterView, PromptContext, RenderError};
use nestsim::scenario::{load_scenario, run_scenario, RunOptions};
use nestsim::timeline::BranchRef;

fn tick(v: &FilterView, _: &[String]) -> Result<String, RenderError> {
    Ok(v.belief.tick.to_string())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let sc = load_scenario(dir.join("scenarios/sally_anne_c1.json"))?;
    let (tree, _) = run_scenario(&sc, RunOptions::default())?;

    let mut registry = FilterRegistry::default();
    registry.register("tick", std::sync::Arc::new(tick))?;
    let text = std::fs::read_to_string(dir.join("templates/sally_prompt.txt"))?;
    let template = registry.compile(&format!(
        "Belief as of tick {{{{ branch | tick }}}}.\n\n{text}"
    ))?;

    let branch: BranchRef = "root/observer/sally:main@sally".parse()?;
    let mut ctx = PromptContext::for_branch(branch, "Get a diamond from a chest.");
    ctx.set_placeholder("LAST_CODE", "bot.openChest(left)");
    print!("{}", render(&template, &ctx, &tree, &registry)?);
    Ok(())
}
