//! Random worlds of at most 8x8x3 cells.

use std::collections::BTreeSet;

use nestsim::world::{
    AgentSpec, BlockPos, Cell, CellSpec, ContainerSpec, Items, Region, WorldSpec,
};
use nestsim::AgentId;
use proptest::collection::{btree_map, vec};
use proptest::prelude::*;
use proptest::sample::select;

pub const ITEM_NAMES: [&str; 3] = ["diamond", "stone", "stick"];

pub fn items() -> impl Strategy<Value = Items> {
    btree_map(
        select(&ITEM_NAMES[..]).prop_map(str::to_string),
        1..4u32,
        0..3,
    )
}

#[derive(Debug, Clone)]
pub struct Raw {
    pub dims: (i32, i32, i32),
    pub codes: Vec<u8>,
    pub agents: Vec<(i32, i32, i32, Items)>,
    pub chests: Vec<(i32, i32, i32, Items)>,
}

fn raw(agents: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Raw> {
    let triple = || (0..8i32, 0..3i32, 0..8i32);
    (
        (2..=8i32, 1..=3i32, 2..=8i32),
        vec(0u8..20, 192),
        vec((triple(), items()), agents),
        vec((triple(), items()), 0..=2),
    )
        .prop_map(|(dims, codes, agents, chests)| Raw {
            dims,
            codes,
            agents: agents
                .into_iter()
                .map(|((x, y, z), i)| (x, y, z, i))
                .collect(),
            chests: chests
                .into_iter()
                .map(|((x, y, z), i)| (x, y, z, i))
                .collect(),
        })
}

pub fn agent_id(k: usize) -> AgentId {
    AgentId::new(format!("a{k}")).unwrap()
}

/// Roughly a quarter of the cells are stone, one in twenty a lever; agents
/// stand on cleared cells, chests never share an agent's cell.
pub fn build(r: &Raw) -> WorldSpec {
    let (w, h, d) = r.dims;
    let bounds = Region::new(BlockPos::new(0, 0, 0), BlockPos::new(w - 1, h - 1, d - 1));
    let mut spec = WorldSpec::empty(bounds);
    let wrap = |x: i32, y: i32, z: i32| BlockPos::new(x % w, y % h, z % d);

    let mut occupied = BTreeSet::new();
    for (k, (x, y, z, inv)) in r.agents.iter().enumerate() {
        let p = wrap(*x, *y, *z);
        if !occupied.insert(p) {
            continue;
        }
        spec.agents.push(AgentSpec {
            id: agent_id(k),
            position: [f64::from(p.x) + 0.5, f64::from(p.y), f64::from(p.z) + 0.5],
            yaw: 0.0,
            held_item: None,
            inventory: Some(inv.clone()),
        });
    }
    let mut chests = BTreeSet::new();
    for (x, y, z, contents) in &r.chests {
        let p = wrap(*x, *y, *z);
        if occupied.contains(&p) || !chests.insert(p) {
            continue;
        }
        spec.containers.push(ContainerSpec {
            pos: p,
            block: "chest".into(),
            contents: Some(contents.clone()),
        });
    }
    for pos in bounds.cells() {
        if occupied.contains(&pos) || chests.contains(&pos) {
            continue;
        }
        let i = (pos.x * 24 + pos.y * 8 + pos.z) as usize;
        let kind = match r.codes[i] {
            0..=4 => Cell::Opaque("stone".into()),
            5 => Cell::Lever,
            _ => continue,
        };
        spec.cells.push(CellSpec { pos, kind });
    }
    spec
}

pub fn world_spec() -> impl Strategy<Value = WorldSpec> {
    raw(1..=3).prop_map(|r| build(&r))
}

/// A world with at least two agents.
pub fn social_world_spec() -> impl Strategy<Value = WorldSpec> {
    raw(2..=3)
        .prop_map(|r| build(&r))
        .prop_filter("needs two agents", |s| s.agents.len() >= 2)
}

/// A point inside the bounds on a quarter-cell lattice, so that segments
/// often pass exactly through faces, edges and corners.
pub fn lattice_point(bounds: Region) -> impl Strategy<Value = [f64; 3]> {
    let axis = |lo: i32, hi: i32| (lo * 4..(hi + 1) * 4).prop_map(|v| f64::from(v) / 4.0);
    (
        axis(bounds.min.x, bounds.max.x),
        axis(bounds.min.y, bounds.max.y),
        axis(bounds.min.z, bounds.max.z),
    )
        .prop_map(|(x, y, z)| [x, y, z])
}

/// A standing spot: the center of a cell's floor.
pub fn stand_point(bounds: Region) -> impl Strategy<Value = [f64; 3]> {
    (
        bounds.min.x..=bounds.max.x,
        bounds.min.y..=bounds.max.y,
        bounds.min.z..=bounds.max.z,
    )
        .prop_map(|(x, y, z)| [f64::from(x) + 0.5, f64::from(y), f64::from(z) + 0.5])
}
