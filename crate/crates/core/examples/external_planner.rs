//! Asks a planning service over HTTP for Sally's next actions. A stub
//! service on a local port stands in for a language model.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;

use nestsim::planner::{ExternalPlanner, PlanRequest, Planner};
use nestsim::scenario::{load_scenario, run_scenario, RunOptions};
use nestsim::AgentId;

const REPLY: &str = r#"{"actions": [{"kind": "move_to", "args": {"target": [-2.5, -51, -3.5]}},
 {"kind": "open_chest", "args": {"pos": [-2, -51, -4]}}], "rationale": "I left it in the left chest."}"#;

fn stub(listener: TcpListener) -> std::io::Result<()> {
    let (stream, _) = listener.accept()?;
    let mut reader = BufReader::new(stream);
    let mut len = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;
    eprintln!("service got {} bytes of prompt", body.len());
    write!(
        reader.into_inner(),
        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{REPLY}",
        REPLY.len()
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let url = format!("http://{}/plan", listener.local_addr()?);
    let server = std::thread::spawn(move || stub(listener));

    let sc =
        load_scenario(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/sally_anne_c1.json"))?;
    let (tree, _) = run_scenario(&sc, RunOptions::default())?;
    let mut req = PlanRequest::new(
        "root/observer/sally".parse()?,
        AgentId::new("sally")?,
        "Get a diamond from a chest.",
    );
    req.prompt = "(rendered prompt goes here)".into();
    let plan = ExternalPlanner::new(url).plan(&tree, &req)?;
    server.join().expect("stub thread")?;

    for a in &plan.actions {
        println!("{a}");
    }
    println!("because: {}", plan.rationale.unwrap_or_default());
    Ok(())
}
