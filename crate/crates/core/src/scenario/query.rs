//! Textual queries over a finished run, e.g.
//! `container_contents(root/observer, main, (2,-51,-4))`.
//!
//! Arguments are bare tokens, quoted strings, or integer `(x,y,z)` tuples.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::nest::{SimPath, SimTree};
use crate::planner::{AnnouncementFollower, ChestSeeker, Gazetteer, PlanRequest};
use crate::timeline::{BranchId, Situation};
use crate::world::{AgentId, BlockPos, Items};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("query parse error at {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("query failed: {0}")]
    Eval(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    ContainerContents {
        sim: SimPath,
        branch: BranchId,
        pos: Option<BlockPos>,
    },
    ChatMemory {
        sim: SimPath,
        branch: BranchId,
        agent: AgentId,
    },
    BeliefVisibility {
        sim: SimPath,
        branch: BranchId,
        agent: AgentId,
        pos: BlockPos,
    },
    PlannerTarget {
        sim: SimPath,
        branch: BranchId,
        agent: AgentId,
        planner: String,
        task: String,
    },
    EventLog {
        sim: SimPath,
        branch: BranchId,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Arg {
    Token(String),
    Text(String),
    Tuple(BlockPos),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Token(t) => f.write_str(t),
            Arg::Text(t) => write!(f, "{t:?}"),
            Arg::Tuple(p) => write!(f, "({},{},{})", p.x, p.y, p.z),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    i: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, reason: impl Into<String>) -> QueryError {
        QueryError::Parse {
            offset: self.i,
            reason: reason.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.i..].starts_with(char::is_whitespace) {
            self.i += self.src[self.i..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.i..].starts_with(c) {
            self.i += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), QueryError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn token(&mut self) -> String {
        self.skip_ws();
        let rest = &self.src[self.i..];
        let len = rest
            .find(|c: char| c.is_whitespace() || "(),\"'".contains(c))
            .unwrap_or(rest.len());
        self.i += len;
        rest[..len].to_string()
    }

    fn int(&mut self) -> Result<i32, QueryError> {
        let t = self.token();
        t.parse()
            .map_err(|_| self.err(format!("expected an integer, found `{t}`")))
    }

    fn arg(&mut self) -> Result<Arg, QueryError> {
        self.skip_ws();
        let rest = &self.src[self.i..];
        if let Some(q) = rest.chars().next().filter(|c| *c == '"' || *c == '\'') {
            let body = &rest[1..];
            let end = body
                .find(q)
                .ok_or_else(|| self.err("unterminated string"))?;
            self.i += end + 2;
            return Ok(Arg::Text(body[..end].to_string()));
        }
        if self.eat('(') {
            let x = self.int()?;
            self.expect(',')?;
            let y = self.int()?;
            self.expect(',')?;
            let z = self.int()?;
            self.expect(')')?;
            return Ok(Arg::Tuple(BlockPos::new(x, y, z)));
        }
        let t = self.token();
        if t.is_empty() {
            return Err(self.err("expected an argument"));
        }
        Ok(Arg::Token(t))
    }
}

fn text(a: &Arg) -> Option<&str> {
    match a {
        Arg::Token(t) | Arg::Text(t) => Some(t),
        Arg::Tuple(_) => None,
    }
}

impl FromStr for Query {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lx = Lexer { src: s, i: 0 };
        let name = lx.token();
        lx.expect('(')?;
        let mut args = Vec::new();
        if !lx.eat(')') {
            loop {
                args.push((lx.i, lx.arg()?));
                if lx.eat(')') {
                    break;
                }
                lx.expect(',')?;
            }
        }
        lx.skip_ws();
        if lx.i != s.len() {
            return Err(lx.err("trailing input after query"));
        }
        let at = |k: usize| args.get(k).map_or(s.len(), |(i, _)| *i);
        let bad = |k: usize, reason: String| QueryError::Parse {
            offset: at(k),
            reason,
        };
        let want = |n: &[usize]| -> Result<(), QueryError> {
            if n.contains(&args.len()) {
                Ok(())
            } else {
                Err(QueryError::Parse {
                    offset: s.len(),
                    reason: format!("`{name}` takes {n:?} arguments, got {}", args.len()),
                })
            }
        };
        let sim = |k: usize| -> Result<SimPath, QueryError> {
            text(&args[k].1)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(k, format!("expected a simulator path, found {}", args[k].1)))
        };
        let branch = |k: usize| -> Result<BranchId, QueryError> {
            text(&args[k].1)
                .and_then(|t| BranchId::new(t).ok())
                .ok_or_else(|| bad(k, format!("expected a branch id, found {}", args[k].1)))
        };
        let agent = |k: usize| -> Result<AgentId, QueryError> {
            text(&args[k].1)
                .and_then(|t| AgentId::new(t).ok())
                .ok_or_else(|| bad(k, format!("expected an agent id, found {}", args[k].1)))
        };
        let pos = |k: usize| -> Result<BlockPos, QueryError> {
            match &args[k].1 {
                Arg::Tuple(p) => Ok(*p),
                other => Err(bad(k, format!("expected an (x,y,z) tuple, found {other}"))),
            }
        };
        let word = |k: usize| -> Result<String, QueryError> {
            text(&args[k].1)
                .map(str::to_string)
                .ok_or_else(|| bad(k, "expected text".into()))
        };
        match name.as_str() {
            "container_contents" => {
                want(&[2, 3])?;
                Ok(Query::ContainerContents {
                    sim: sim(0)?,
                    branch: branch(1)?,
                    pos: if args.len() == 3 { Some(pos(2)?) } else { None },
                })
            }
            "chat_memory" => {
                want(&[3])?;
                Ok(Query::ChatMemory {
                    sim: sim(0)?,
                    branch: branch(1)?,
                    agent: agent(2)?,
                })
            }
            "belief_visibility" => {
                want(&[4])?;
                Ok(Query::BeliefVisibility {
                    sim: sim(0)?,
                    branch: branch(1)?,
                    agent: agent(2)?,
                    pos: pos(3)?,
                })
            }
            "planner_target" => {
                want(&[5])?;
                Ok(Query::PlannerTarget {
                    sim: sim(0)?,
                    branch: branch(1)?,
                    agent: agent(2)?,
                    planner: word(3)?,
                    task: word(4)?,
                })
            }
            "event_log" => {
                want(&[2])?;
                Ok(Query::EventLog {
                    sim: sim(0)?,
                    branch: branch(1)?,
                })
            }
            other => Err(QueryError::Parse {
                offset: 0,
                reason: format!("unknown query `{other}`"),
            }),
        }
    }
}

fn items_json(items: &Option<Items>) -> Value {
    match items {
        Some(items) => json!(items),
        None => Value::Null,
    }
}

fn situation<'a>(
    tree: &'a SimTree,
    sim: &SimPath,
    branch: &BranchId,
) -> Result<&'a Situation, QueryError> {
    tree.node(sim)
        .ok_or_else(|| QueryError::Eval(format!("no simulator at {sim}")))?
        .situation_of(branch.as_str())
        .ok_or_else(|| QueryError::Eval(format!("no branch `{branch}` at {sim}")))
}

fn pos_json(p: BlockPos) -> Value {
    json!([p.x, p.y, p.z])
}

impl Query {
    pub fn eval(&self, tree: &SimTree, places: &Gazetteer) -> Result<Value, QueryError> {
        match self {
            Query::ContainerContents { sim, branch, pos } => {
                let s = situation(tree, sim, branch)?;
                match pos {
                    Some(p) => s
                        .world
                        .containers
                        .get(p)
                        .map(|c| items_json(&c.contents))
                        .ok_or_else(|| QueryError::Eval(format!("no container at {p} in {sim}"))),
                    // every container holding something (or of unknown contents)
                    None => Ok(Value::Object(
                        s.world
                            .containers
                            .iter()
                            .filter(|(_, c)| c.contents.as_ref().is_none_or(|i| !i.is_empty()))
                            .map(|(p, c)| (p.to_string(), items_json(&c.contents)))
                            .collect::<Map<_, _>>(),
                    )),
                }
            }
            Query::ChatMemory { sim, branch, agent } => {
                let b = situation(tree, sim, branch)?
                    .beliefs
                    .get(agent)
                    .ok_or_else(|| QueryError::Eval(format!("no agent `{agent}` in {sim}")))?;
                Ok(Value::Array(
                    b.chat_memory
                        .iter()
                        .map(|c| json!({"tick": c.tick, "speaker": c.speaker, "text": c.text}))
                        .collect(),
                ))
            }
            Query::BeliefVisibility {
                sim,
                branch,
                agent,
                pos,
            } => {
                let b = situation(tree, sim, branch)?
                    .beliefs
                    .get(agent)
                    .ok_or_else(|| QueryError::Eval(format!("no agent `{agent}` in {sim}")))?;
                let r = b
                    .cells
                    .get(pos)
                    .map(|c| c.record)
                    .or_else(|| b.containers.get(pos).map(|c| c.record))
                    .unwrap_or_default();
                Ok(json!({"seen_before": r.seen_before, "visible_now": r.visible_now}))
            }
            Query::PlannerTarget {
                sim,
                branch,
                agent,
                planner,
                task,
            } => {
                let mut req = PlanRequest::new(sim.clone(), agent.clone(), task);
                req.branch = branch.clone();
                let fail = |e: crate::planner::PlanError| QueryError::Eval(e.to_string());
                match planner.as_str() {
                    "chest_seeker" => {
                        let (pos, _) = ChestSeeker.target(tree, &req).map_err(fail)?;
                        Ok(pos_json(pos))
                    }
                    "announcement_follower" => {
                        let f = AnnouncementFollower::new(places.clone());
                        let (dest, _) = f.destination(tree, &req).map_err(fail)?;
                        Ok(match places.region_of(dest) {
                            Some(name) => json!(name),
                            None => json!(dest),
                        })
                    }
                    other => Err(QueryError::Eval(format!("unknown planner `{other}`"))),
                }
            }
            Query::EventLog { sim, branch } => {
                let s = situation(tree, sim, branch)?;
                Ok(json!(s
                    .history
                    .events
                    .iter()
                    .map(|e| e.row())
                    .collect::<Vec<_>>()))
            }
        }
    }
}
