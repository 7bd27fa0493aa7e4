//! Built-in filters. Each renders one aspect of a belief state as text.

use serde_json::{json, Map, Value};

use super::{FilterView, RenderError};
use crate::format;
use crate::timeline::ActionName;
use crate::world::BlockPos;

/// Block types always listed by `blocks`, after the requested ones.
pub const DEFAULT_BLOCK_TYPES: [&str; 2] = ["chest", "lever"];

pub fn thought(v: &FilterView, _: &[String]) -> Result<String, RenderError> {
    Ok(v.belief
        .thought
        .clone()
        .unwrap_or_else(|| "No thought".into()))
}

pub fn chat_log(v: &FilterView, _: &[String]) -> Result<String, RenderError> {
    if v.belief.chat_memory.is_empty() {
        return Ok("No chats".into());
    }
    Ok(v.belief
        .chat_memory
        .iter()
        .map(|c| format!("{}; {}: {}", c.tick, c.speaker, c.text))
        .collect::<Vec<_>>()
        .join("\n"))
}

pub fn position(v: &FilterView, _: &[String]) -> Result<String, RenderError> {
    Ok(format::point(v.belief.own.pose.position))
}

pub fn chests(v: &FilterView, _: &[String]) -> Result<String, RenderError> {
    if v.belief.containers.is_empty() {
        return Ok("No data".into());
    }
    Ok(v.belief
        .containers
        .iter()
        .map(|(pos, c)| match &c.contents {
            Some(items) => format!("{pos}: {}", format::items(items)),
            None => format!("{pos}: No data"),
        })
        .collect::<Vec<_>>()
        .join("\n"))
}

pub fn inventory(v: &FilterView, _: &[String]) -> Result<String, RenderError> {
    Ok(match &v.belief.own.inventory {
        Some(items) => format::items(items),
        None => "No data".into(),
    })
}

fn pretty(value: &Value) -> String {
    serde_json::to_string_pretty(value).unwrap_or_default()
}

pub fn other_players(v: &FilterView, _: &[String]) -> Result<String, RenderError> {
    let mut players = Map::new();
    for (id, a) in &v.belief.agents {
        if *id == v.belief.owner {
            continue;
        }
        let position = if a.record.visible_now {
            json!(format::point(a.pose.position))
        } else {
            json!("Cannot be seen")
        };
        let inventory = match &a.inventory {
            Some(items) => json!(format::items(items)),
            None => json!("No data"),
        };
        players.insert(
            id.to_string(),
            json!({
                "position": position,
                "helditem": a.held_item,
                "inventory": inventory,
            }),
        );
    }
    Ok(pretty(&Value::Object(players)))
}

pub fn blocks(v: &FilterView, args: &[String]) -> Result<String, RenderError> {
    let mut types: Vec<&str> = Vec::new();
    for t in args.iter().map(String::as_str).chain(DEFAULT_BLOCK_TYPES) {
        if !types.contains(&t) {
            types.push(t);
        }
    }
    let b = v.belief;
    let mut out = Vec::new();
    for t in types {
        let mut seen: Vec<(BlockPos, _)> = b
            .cells
            .iter()
            .filter(|(_, c)| c.cell.block_name() == Some(t))
            .map(|(pos, c)| (*pos, c.record))
            .collect();
        for (pos, c) in &b.containers {
            if c.block == t && !b.cells.contains_key(pos) {
                seen.push((*pos, c.record));
            }
        }
        seen.sort_by_key(|(pos, _)| *pos);
        if seen.is_empty() {
            out.push(format!("{t} visibilities: Not observed"));
            continue;
        }
        let mut map = Map::new();
        for (pos, r) in seen {
            map.insert(
                pos.to_string(),
                json!({"Me": {"seen_before": r.seen_before, "visible_now": r.visible_now}}),
            );
        }
        out.push(format!("{t} visibilities:{}", pretty(&Value::Object(map))));
    }
    Ok(out.join("\n"))
}

/// Header plus one row per remembered event. Movement is left out; the
/// history is about what agents did to the world.
pub fn events_and_visibilities(v: &FilterView, _: &[String]) -> Result<String, RenderError> {
    let mut lines = vec!["time;action;agent_name;description".to_string()];
    lines.extend(
        v.belief
            .event_memory
            .iter()
            .filter(|e| e.action != ActionName::MoveTo)
            .map(|e| e.row()),
    );
    Ok(lines.join("\n"))
}
