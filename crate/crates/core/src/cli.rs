//! Command-line front end: `run`, `prompt`, `query` and `dump`.
//!
//! Exit codes: 0 when every assertion passes, 1 on an assertion failure,
//! 2 on usage or schema errors, 3 on runtime errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::format::json_line;
use crate::nest::{SimPath, SimTree};
use crate::planner::{ExternalPlanner, PlanRequest, Planner};
use crate::promptgen::{render, resolve_bindings, FilterRegistry, PromptContext, RenderError};
use crate::scenario::{
    load_scenario, run_scenario, Query, QueryError, RunOptions, RunReport, Scenario, ScenarioError,
};
use crate::timeline::{BranchId, BranchRef};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "nestsim",
    version,
    about = "Nested belief simulation for embodied agents"
)]
pub struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Endpoint of an external planning service.
    #[arg(long, global = true, value_name = "URL")]
    pub planner_url: Option<String>,
    /// Override the scenario's maximum nesting depth.
    #[arg(long, global = true, value_name = "N")]
    pub max_depth: Option<usize>,
    /// Accepted for compatibility; every run is deterministic.
    #[arg(long, global = true)]
    pub seedless: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and report its assertions.
    Run {
        scenario: PathBuf,
        /// Write per-node event logs and belief dumps into this directory.
        #[arg(long, value_name = "DIR")]
        trace: Option<PathBuf>,
        /// Advance idle rounds with one thread per simulator.
        #[arg(long)]
        concurrent: bool,
    },
    /// Run a scenario, then render a prompt template against one branch.
    Prompt {
        scenario: PathBuf,
        /// Branch reference, `path[:branch][@agent]`.
        #[arg(long, value_name = "REF")]
        sim: String,
        #[arg(long, value_name = "FILE")]
        template: PathBuf,
        #[arg(long)]
        task: Option<String>,
        /// Set a `$$NAME$$` placeholder.
        #[arg(long = "set", value_name = "NAME=VALUE")]
        set: Vec<String>,
    },
    /// Run a scenario and evaluate one query against the final state.
    Query {
        scenario: PathBuf,
        expression: String,
    },
    /// Run a scenario and print the state of its simulators as JSON.
    Dump {
        scenario: PathBuf,
        /// Only this simulator (default: all).
        #[arg(long, value_name = "PATH")]
        sim: Option<String>,
        #[arg(long, default_value = "main")]
        branch: String,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.to_string(),
    }
}

fn runtime(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.to_string(),
    }
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Io { .. } | ScenarioError::Schema { .. } => usage(e),
        ScenarioError::Runtime { .. } | ScenarioError::Setup(_) => runtime(e),
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<Scenario, Failure> {
    let mut sc = load_scenario(path).map_err(scenario_failure)?;
    if let Some(d) = cli.max_depth {
        if let Some((p, _)) = sc.tree.iter().find(|(p, _)| p.depth() > d) {
            return Err(usage(format!(
                "--max-depth {d} is shallower than {p} in the scenario tree"
            )));
        }
        sc.config.max_depth = d;
    }
    Ok(sc)
}

fn execute(sc: &Scenario, concurrent: bool) -> Result<(SimTree, RunReport), Failure> {
    run_scenario(sc, RunOptions { concurrent }).map_err(scenario_failure)
}

fn write(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(runtime)
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Run {
            scenario,
            trace,
            concurrent,
        } => {
            let sc = load(cli, scenario)?;
            let (tree, report) = execute(&sc, *concurrent)?;
            if let Some(dir) = trace {
                write_trace(dir, &tree, &report)
                    .map_err(|e| runtime(format!("writing trace: {e}")))?;
            }
            if cli.json {
                let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
                write(out, &format!("{text}\n"))?;
            } else {
                write(out, &human_report(&report))?;
            }
            Ok(if report.passed {
                EXIT_OK
            } else {
                EXIT_ASSERTION
            })
        }
        Command::Prompt {
            scenario,
            sim,
            template,
            task,
            set,
        } => {
            let branch: BranchRef = sim.parse().map_err(usage)?;
            let text = fs::read_to_string(template)
                .map_err(|e| usage(format!("cannot read {}: {e}", template.display())))?;
            let registry = FilterRegistry::default();
            let compiled = registry.compile(&text).map_err(usage)?;
            let task = match task {
                Some(t) => t.clone(),
                None => {
                    let _ = writeln!(
                        err,
                        "warning: no --task given; `{{{{ task }}}}` renders empty"
                    );
                    String::new()
                }
            };
            let mut ctx = PromptContext::for_branch(branch.clone(), &task);
            for kv in set {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| usage(format!("--set expects NAME=VALUE, got `{kv}`")))?;
                ctx.set_placeholder(k, v);
            }
            let sc = load(cli, scenario)?;
            let (tree, _) = execute(&sc, false)?;
            resolve_bindings(&ctx, &tree).map_err(usage)?;
            let prompt = render(&compiled, &ctx, &tree, &registry).map_err(|e| match e {
                RenderError::UnresolvedBranch { .. } | RenderError::UnknownFilter(_) => usage(e),
                other => runtime(other),
            })?;
            write(out, &prompt)?;
            if let Some(url) = &cli.planner_url {
                let agent = branch
                    .owner()
                    .cloned()
                    .ok_or_else(|| usage("the branch reference needs an owner"))?;
                let mut req = PlanRequest::new(branch.path.clone(), agent, &task);
                req.branch = branch.branch.clone();
                req.prompt = prompt;
                let plan = ExternalPlanner::new(url.as_str())
                    .plan(&tree, &req)
                    .map_err(runtime)?;
                let body = if cli.json {
                    serde_json::to_string_pretty(&plan).map_err(runtime)?
                } else {
                    plan.actions
                        .iter()
                        .map(|a| a.to_string())
                        .collect::<Vec<_>>()
                        .join("\n")
                };
                write(out, &format!("\n\nPlan:\n{body}\n"))?;
            }
            Ok(EXIT_OK)
        }
        Command::Query {
            scenario,
            expression,
        } => {
            let query: Query = expression.parse().map_err(|e: QueryError| usage(e))?;
            let sc = load(cli, scenario)?;
            let (tree, _) = execute(&sc, false)?;
            let value = query.eval(&tree, &sc.places).map_err(runtime)?;
            write(out, &format!("{}\n", json_line(&value)))?;
            Ok(EXIT_OK)
        }
        Command::Dump {
            scenario,
            sim,
            branch,
        } => {
            let only: Option<SimPath> =
                sim.as_deref().map(str::parse).transpose().map_err(usage)?;
            let branch = BranchId::new(branch.as_str()).map_err(usage)?;
            let sc = load(cli, scenario)?;
            let (tree, _) = execute(&sc, false)?;
            let mut nodes = Map::new();
            for path in tree.paths() {
                if only.as_ref().is_some_and(|p| *p != path) {
                    continue;
                }
                nodes.insert(path.to_string(), dump_node(&tree, &path, &branch)?);
            }
            if nodes.is_empty() {
                return Err(runtime(format!(
                    "no simulator at {}",
                    sim.as_deref().unwrap_or("?")
                )));
            }
            let text = serde_json::to_string_pretty(&Value::Object(nodes)).map_err(runtime)?;
            write(out, &format!("{text}\n"))?;
            Ok(EXIT_OK)
        }
    }
}

fn dump_node(tree: &SimTree, path: &SimPath, branch: &BranchId) -> Result<Value, Failure> {
    let node = tree
        .node(path)
        .ok_or_else(|| runtime(format!("no simulator at {path}")))?;
    let s = node
        .situation_of(branch.as_str())
        .ok_or_else(|| runtime(format!("no branch `{branch}` at {path}")))?;
    let beliefs: Map<String, Value> = s
        .beliefs
        .iter()
        .map(|(id, b)| (id.to_string(), b.to_json()))
        .collect();
    Ok(json!({
        "mode": node.mode(),
        "active_branch": node.active_branch(),
        "branches": node.branch_ids(),
        "world": s.world,
        "beliefs": beliefs,
        "events": s.history.events.iter().map(|e| e.row()).collect::<Vec<_>>(),
        "chats": s.history.chats,
    }))
}

fn human_report(r: &RunReport) -> String {
    let passed = r.assertions.iter().filter(|a| a.passed).count();
    let mut s = format!(
        "{} {}: {passed}/{} assertions, final tick {}\n",
        if r.passed { "PASS" } else { "FAIL" },
        r.scenario,
        r.assertions.len(),
        r.final_tick
    );
    for a in &r.assertions {
        if a.passed {
            s.push_str(&format!("  ok    {}\n", a.name));
        } else {
            s.push_str(&format!(
                "  FAIL  {}\n        query:    {}\n",
                a.name, a.query
            ));
            s.push_str(&format!("        expected: {}\n", json_line(&a.expected)));
            match &a.error {
                Some(e) => s.push_str(&format!("        error:    {e}\n")),
                None => s.push_str(&format!("        actual:   {}\n", json_line(&a.actual))),
            }
        }
    }
    s
}

fn file_stem(path: &SimPath) -> String {
    path.to_string().replace('/', ".")
}

fn write_trace(dir: &Path, tree: &SimTree, report: &RunReport) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let main = BranchId::main();
    for path in tree.paths() {
        let node = tree.node(&path).expect("listed path");
        let stem = file_stem(&path);
        let mut log = String::from("time;action;agent_name;description\n");
        for e in &node.history().events {
            log.push_str(&e.row());
            log.push('\n');
        }
        fs::write(dir.join(format!("{stem}.events.txt")), log)?;
        let dump = dump_node(tree, &path, node.active_branch())
            .or_else(|_| dump_node(tree, &path, &main))
            .map_err(|f| std::io::Error::other(f.message))?;
        fs::write(
            dir.join(format!("{stem}.state.json")),
            serde_json::to_string_pretty(&dump)? + "\n",
        )?;
    }
    fs::write(
        dir.join("trace.json"),
        serde_json::to_string_pretty(&report.trace)? + "\n",
    )
}
