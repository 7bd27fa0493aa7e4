//! The command-line front end, driven in-process.

mod support;

use std::fs;

use serde_json::{json, Value};

use support::{cli, crate_dir, scenario_path, serve_once};

fn scenario(name: &str) -> String {
    scenario_path(name).to_str().unwrap().to_string()
}

fn template() -> String {
    crate_dir()
        .join("templates/sally_prompt.txt")
        .to_str()
        .unwrap()
        .to_string()
}

const SALLY: &str = "root/observer/sally:main@sally";
const TASK: &str = "Get a diamond from a chest.";

#[test]
fn run_reports_and_exit_codes() {
    let (code, out, _) = cli(&["run", &scenario("sally_anne_c1")]);
    assert_eq!(code, 0);
    assert!(
        out.starts_with("PASS sally_anne_c1: 4/4 assertions"),
        "{out}"
    );

    let (code, _, err) = cli(&["run", "missing.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.json"));

    let (code, _, _) = cli(&["run"]);
    assert_eq!(code, 2);
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["run", "prompt", "query", "dump"] {
        assert!(out.contains(sub));
    }
}

#[test]
fn json_report_matches_the_published_schema() {
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(crate_dir().join("schemas/run_report.schema.json")).unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for name in support::BUNDLED {
        let (code, out, _) = cli(&["--json", "run", &scenario(name)]);
        assert_eq!(code, 0);
        let report: Value = serde_json::from_str(&out).unwrap();
        let errors: Vec<String> = validator
            .iter_errors(&report)
            .map(|e| e.to_string())
            .collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
        assert!(report["assertions"]
            .as_array()
            .unwrap()
            .iter()
            .all(|a| a["passed"] == true));
    }
}

#[test]
fn failing_assertion_exits_1_and_schema_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let wrong = dir.path().join("wrong.json");
    fs::write(
        &wrong,
        json!({
            "include": scenario("sally_anne_c1"),
            "name": "wrong",
            "assertions": [{"name": "left is empty", "query": "container_contents(root, main, (-2,-51,-4))",
                            "expected": {"diamond": 1}}]
        })
        .to_string(),
    )
    .unwrap();
    let (code, out, _) = cli(&["run", wrong.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(
        out.contains("FAIL  left is empty") && out.contains("actual:   {}"),
        "{out}"
    );

    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        json!({"include": scenario("sally_anne_base"), "view_radius": "far"}).to_string(),
    )
    .unwrap();
    let (code, _, err) = cli(&["run", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("view_radius"), "{err}");
}

#[test]
fn runtime_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    fs::write(
        &file,
        json!({
            "include": scenario("sally_anne_base"),
            "script": [{"tick": 20, "do": "act", "actor": "anne", "kind": "open_chest", "args": {"pos": [-2, -51, -4]}}]
        })
        .to_string(),
    )
    .unwrap();
    let (code, _, err) = cli(&["run", file.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("tick 20"), "{err}");
}

#[test]
fn max_depth_flag_is_checked_before_running() {
    let (code, _, err) = cli(&["--max-depth", "1", "run", &scenario("sally_anne_c1")]);
    assert_eq!(code, 2);
    assert!(err.contains("root/observer/sally"));
    let (code, _, _) = cli(&[
        "--max-depth",
        "2",
        "--seedless",
        "run",
        &scenario("sally_anne_c1"),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn prompt_reproduces_the_golden_file() {
    let golden =
        fs::read_to_string(crate_dir().join("tests/golden/sally_anne_c1_prompt.txt")).unwrap();
    let (code, out, err) = cli(&[
        "prompt",
        &scenario("sally_anne_c1"),
        "--sim",
        SALLY,
        "--template",
        &template(),
        "--task",
        TASK,
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, golden);
    assert!(err.is_empty());
}

#[test]
fn prompt_without_task_warns_and_renders_empty() {
    let (code, out, err) = cli(&[
        "prompt",
        &scenario("sally_anne_c1"),
        "--sim",
        SALLY,
        "--template",
        &template(),
    ]);
    assert_eq!(code, 0);
    assert!(out.ends_with("Task: \n"), "{out}");
    assert!(err.contains("warning"));
}

#[test]
fn prompt_placeholders_can_be_set() {
    let (code, out, _) = cli(&[
        "prompt",
        &scenario("sally_anne_c1"),
        "--sim",
        SALLY,
        "--template",
        &template(),
        "--task",
        TASK,
        "--set",
        "LAST_ERROR=chest is locked",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("Error from the last round:\nchest is locked\n"));
    assert!(out.contains("No code was executed"));
}

#[test]
fn prompt_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.txt");
    fs::write(&t, "Position:\n{{ branch | altitude }}\n").unwrap();
    let (code, _, err) = cli(&[
        "prompt",
        &scenario("sally_anne_c1"),
        "--sim",
        SALLY,
        "--template",
        t.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("altitude") && err.contains("line 2"), "{err}");

    let (code, _, err) = cli(&[
        "prompt",
        &scenario("sally_anne_c1"),
        "--sim",
        "root/observer/anne@anne",
        "--template",
        &template(),
        "--task",
        TASK,
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("root/observer/anne"), "{err}");
}

#[test]
fn prompt_can_consult_an_external_planner() {
    let (url, server) = serve_once(
        r#"{"actions": [{"kind": "open_chest", "args": {"pos": [-2, -51, -4]}}], "rationale": "left"}"#,
    );
    let (code, out, err) = cli(&[
        "--planner-url",
        &url,
        "prompt",
        &scenario("sally_anne_c1"),
        "--sim",
        SALLY,
        "--template",
        &template(),
        "--task",
        TASK,
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(
        out.ends_with("\n\nPlan:\nsally: open_chest (-2, -51, -4)\n"),
        "{out}"
    );
    let request: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
    assert_eq!(request["task"], TASK);
    assert!(request["prompt"]
        .as_str()
        .unwrap()
        .ends_with("Task: Get a diamond from a chest.\n"));
}

#[test]
fn query_prints_spaced_json() {
    let c1 = scenario("sally_anne_c1");
    let (code, out, _) = cli(&[
        "query",
        &c1,
        "container_contents(root/observer, main, (2,-51,-4))",
    ]);
    assert_eq!((code, out.as_str()), (0, "{\"diamond\": 1}\n"));

    let (code, out, _) = cli(&["query", &c1, "event_log(root, main)"]);
    assert_eq!(code, 0);
    assert!(out
        .contains("\"69;depositItemIntoChest;sally;chest:(-2, -51, -4) & items:{'diamond': 1}\""));

    let (code, _, _) = cli(&["query", &c1, "event_log(root/nobody, main)"]);
    assert_eq!(code, 3);
    let (code, _, err) = cli(&["query", &c1, "event_log(root"]);
    assert_eq!(code, 2);
    assert!(err.contains("parse error"));
}

#[test]
fn dump_shows_one_simulator() {
    let (code, out, _) = cli(&[
        "dump",
        &scenario("sally_anne_c1"),
        "--sim",
        "root/observer/sally",
    ]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let node = &v["root/observer/sally"];
    assert_eq!(v.as_object().unwrap().len(), 1);
    assert_eq!(node["mode"], "follow");
    assert_eq!(node["beliefs"]["sally"]["self"]["inventory"], "No data");
    assert_eq!(
        node["beliefs"]["anne"]["self"]["position"],
        "[0.5, -51, -0.5]"
    );
    let (code, _, _) = cli(&["dump", &scenario("sally_anne_c1"), "--sim", "root/anne"]);
    assert_eq!(code, 3);
}

#[test]
fn trace_directory_and_concurrent_mode() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = cli(&[
        "run",
        &scenario("sally_anne_c3"),
        "--concurrent",
        "--trace",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let log = fs::read_to_string(dir.path().join("root.observer.sally.events.txt")).unwrap();
    assert!(log.starts_with("time;action;agent_name;description\n69;depositItemIntoChest;sally;"));
    for stem in ["root", "root.observer", "root.sally"] {
        assert!(
            dir.path().join(format!("{stem}.state.json")).exists(),
            "{stem}"
        );
    }
    let trace: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["steps"].as_array().unwrap().len(), 6);
}

#[test]
fn identical_invocations_give_identical_stdout() {
    let args = ["dump", &scenario("ice_cream_van")];
    let a = cli(&args);
    let b = cli(&args);
    assert_eq!(a.0, 0);
    assert_eq!(a.1, b.1);
}
