//! Thread-per-node execution of the same per-node loop.
//!
//! Control nodes step a fixed number of times. Follow nodes block on their
//! channel and step once per delivered message; when a parent finishes it
//! drops its senders, which ends its children in turn.

use std::collections::BTreeMap;
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread;

use super::{
    step_node, BeliefMessage, Mode, NestError, SimConfig, SimNode, SimPath, SimTree, TraceEntry,
    TraceKind,
};

struct Worker {
    node: SimNode,
    rx: Receiver<BeliefMessage>,
    children: BTreeMap<SimPath, Sender<BeliefMessage>>,
}

fn entry(round: u64, kind: TraceKind, to: &SimPath, tick: u64) -> TraceEntry {
    TraceEntry {
        round,
        kind,
        from: to.parent().unwrap_or_default(),
        to: to.clone(),
        tick,
    }
}

fn work(
    mut w: Worker,
    steps: usize,
    base: u64,
    cfg: &SimConfig,
) -> (SimNode, Vec<TraceEntry>, Result<(), NestError>) {
    let mut trace = Vec::new();
    let mut round = base;
    let step =
        |node: &mut SimNode, round: u64, trace: &mut Vec<TraceEntry>| -> Result<(), NestError> {
            let out = step_node(node, cfg)?;
            if let Some(tick) = out.applied {
                trace.push(entry(round, TraceKind::Applied, &node.path, tick));
            }
            for msg in out.sent {
                trace.push(entry(
                    round,
                    TraceKind::Sent,
                    &msg.target,
                    msg.snapshot.tick,
                ));
                if let Some(tx) = w.children.get(&msg.target) {
                    // a finished child simply no longer listens
                    let _ = tx.send(msg);
                }
            }
            Ok(())
        };
    let result = match w.node.mode {
        Mode::Control => (|| {
            for _ in 0..steps {
                round += 1;
                while let Ok(msg) = w.rx.try_recv() {
                    trace.push(entry(
                        round,
                        TraceKind::Dropped,
                        &w.node.path,
                        msg.snapshot.tick,
                    ));
                }
                step(&mut w.node, round, &mut trace)?;
            }
            Ok(())
        })(),
        Mode::Follow => (|| {
            while !w.node.inbox.is_empty() {
                round += 1;
                step(&mut w.node, round, &mut trace)?;
            }
            while let Ok(msg) = w.rx.recv() {
                round += 1;
                w.node.inbox.push_back(msg);
                step(&mut w.node, round, &mut trace)?;
            }
            Ok(())
        })(),
    };
    (w.node, trace, result)
}

/// Runs every node on its own thread for `steps` control-mode steps.
///
/// Produces the same node states as `run_deterministic(steps)`; only the
/// order of trace entries may differ.
pub fn run_concurrent(tree: &mut SimTree, steps: usize) -> Result<(), NestError> {
    let nodes = tree.take_nodes();
    let base = tree.rounds();
    let mut senders = BTreeMap::new();
    let mut receivers = BTreeMap::new();
    for path in nodes.keys() {
        let (tx, rx) = mpsc::channel();
        senders.insert(path.clone(), tx);
        receivers.insert(path.clone(), rx);
    }
    let mut workers = Vec::new();
    for (path, node) in nodes {
        let children = senders
            .iter()
            .filter(|(p, _)| p.parent().as_ref() == Some(&path))
            .map(|(p, tx)| (p.clone(), tx.clone()))
            .collect();
        let rx = receivers.remove(&path).expect("one receiver per node");
        workers.push(Worker { node, rx, children });
    }
    // only the parent workers may hold senders, or nobody would finish
    drop(senders);

    let cfg = tree.config().clone();
    let results: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = workers
            .into_iter()
            .map(|w| {
                let cfg = &cfg;
                scope.spawn(move || work(w, steps, base, cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("node worker panicked"))
            .collect()
    });

    let mut nodes = BTreeMap::new();
    let mut trace = Vec::new();
    let mut first_err = None;
    for (node, t, r) in results {
        trace.extend(t);
        if let Err(e) = r {
            first_err.get_or_insert(e);
        }
        nodes.insert(node.path.clone(), node);
    }
    trace.sort_by(|a, b| (a.round, &a.to, a.kind).cmp(&(b.round, &b.to, b.kind)));
    tree.restore_nodes(nodes, steps as u64, trace);
    first_err.map_or(Ok(()), Err)
}
