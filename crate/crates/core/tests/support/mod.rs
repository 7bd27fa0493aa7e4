//! Shared helpers for the integration tests: generators, independent
//! oracles and the randomized property suites.
#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod props;

use std::path::PathBuf;

use nestsim::scenario::{load_scenario, run_scenario, RunOptions, RunReport};
use nestsim::SimTree;

pub const BUNDLED: [&str; 4] = [
    "sally_anne_c1",
    "sally_anne_c2",
    "sally_anne_c3",
    "ice_cream_van",
];

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn scenario_path(name: &str) -> PathBuf {
    crate_dir().join("scenarios").join(format!("{name}.json"))
}

pub fn run_named(name: &str) -> (SimTree, RunReport) {
    let sc = load_scenario(scenario_path(name)).expect("bundled scenario loads");
    run_scenario(&sc, RunOptions::default()).expect("bundled scenario runs")
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn cli<S: AsRef<str>>(args: &[S]) -> (i32, String, String) {
    let mut argv = vec!["nestsim".to_string()];
    argv.extend(args.iter().map(|a| a.as_ref().to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = nestsim::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// A one-shot HTTP server answering a single POST with `body`. Returns the
/// URL and a handle yielding the request body it received.
pub fn serve_once(body: &'static str) -> (String, std::thread::JoinHandle<String>) {
    use std::io::{BufRead, BufReader, Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/plan", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap();
                }
            }
        }
        let mut request = vec![0; len];
        reader.read_exact(&mut request).unwrap();
        let mut stream = reader.into_inner();
        write!(
            stream,
            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        String::from_utf8(request).unwrap()
    });
    (url, handle)
}
