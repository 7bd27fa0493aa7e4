//! Ground-truth voxel world.
//!
//! A [`WorldState`] is a sparse integer lattice of unit cells (absent entries
//! are air), a set of item containers sitting in container cells, and the
//! bodies of the agents living in it. Agent positions are continuous; the
//! containing cell is what matters for collision and visibility.
//!
//! [`WorldState::get_state`] and [`WorldState::apply_state`] are the two
//! halves of state transfer between simulators: the first freezes the world
//! into an immutable [`StateSnapshot`], the second overwrites a world with one.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Item name to count. Zero counts are never stored.
pub type Items = BTreeMap<String, u32>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("{what} at {at} lies outside the world bounds")]
    OutOfBounds { what: String, at: String },
    #[error("duplicate agent id `{0}`")]
    DuplicateAgentId(AgentId),
    #[error("container/cell mismatch at {0}")]
    ContainerCellMismatch(BlockPos),
    #[error("invalid agent id `{0}`: must be nonempty and contain no '/' or ':'")]
    InvalidAgentId(String),
    #[error("agent `{0}` stands in an impassable cell")]
    AgentInSolid(AgentId),
    #[error("invalid bounds: min {min} exceeds max {max}")]
    InvalidBounds { min: BlockPos, max: BlockPos },
    #[error("agent `{0}` has a non-finite pose")]
    BadPose(AgentId),
}

/// Integer cell coordinates. Serialized as `[x, y, z]`, displayed as `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct BlockPos {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl BlockPos {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    /// The cell containing a continuous point.
    pub fn containing(p: [f64; 3]) -> Self {
        Self::new(
            p[0].floor() as i32,
            p[1].floor() as i32,
            p[2].floor() as i32,
        )
    }

    pub fn center(self) -> [f64; 3] {
        [
            f64::from(self.x) + 0.5,
            f64::from(self.y) + 0.5,
            f64::from(self.z) + 0.5,
        ]
    }

    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }
}

impl From<[i32; 3]> for BlockPos {
    fn from(v: [i32; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<BlockPos> for [i32; 3] {
    fn from(p: BlockPos) -> Self {
        [p.x, p.y, p.z]
    }
}

impl fmt::Display for BlockPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Agent identifier. Nonempty, never contains `/` or `:` (both are reserved
/// by the simulator-path and branch-reference grammars).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Result<Self, WorldError> {
        let id = id.into();
        if id.is_empty() || id.contains('/') || id.contains(':') {
            return Err(WorldError::InvalidAgentId(id));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for AgentId {
    type Error = WorldError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl TryFrom<&str> for AgentId {
    type Error = WorldError;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<AgentId> for String {
    fn from(id: AgentId) -> Self {
        id.0
    }
}

impl Borrow<str> for AgentId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Inclusive axis-aligned box of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub min: BlockPos,
    pub max: BlockPos,
}

impl Region {
    pub fn new(min: BlockPos, max: BlockPos) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: BlockPos) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }

    /// True when the continuous point lies inside the union of the region's cells.
    pub fn contains_point(&self, p: [f64; 3]) -> bool {
        let lo = [self.min.x, self.min.y, self.min.z];
        let hi = [self.max.x, self.max.y, self.max.z];
        (0..3).all(|k| p[k] >= f64::from(lo[k]) && p[k] < f64::from(hi[k]) + 1.0)
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn cells(&self) -> impl Iterator<Item = BlockPos> + '_ {
        (self.min.x..=self.max.x).flat_map(move |x| {
            (self.min.y..=self.max.y)
                .flat_map(move |y| (self.min.z..=self.max.z).map(move |z| BlockPos::new(x, y, z)))
        })
    }

    /// Standing point at the horizontal center of the region's bottom layer.
    pub fn anchor(&self) -> [f64; 3] {
        [
            f64::from(self.min.x + self.max.x + 1) / 2.0,
            f64::from(self.min.y),
            f64::from(self.min.z + self.max.z + 1) / 2.0,
        ]
    }
}

/// World bounding box.
pub type Bounds = Region;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Air,
    /// Materialized ignorance inside a belief world: impassable, but it does
    /// not block sight.
    Unknown,
    Lever,
    Opaque(String),
    Container(String),
}

impl Cell {
    pub fn is_opaque(&self) -> bool {
        matches!(self, Cell::Opaque(_))
    }

    pub fn is_passable(&self) -> bool {
        matches!(self, Cell::Air | Cell::Lever)
    }

    pub fn is_air(&self) -> bool {
        matches!(self, Cell::Air)
    }

    pub fn block_name(&self) -> Option<&str> {
        match self {
            Cell::Air => Some("air"),
            Cell::Unknown => None,
            Cell::Lever => Some("lever"),
            Cell::Opaque(name) | Cell::Container(name) => Some(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub pos: BlockPos,
    /// `None` when the contents are unknown (only in belief worlds).
    pub contents: Option<Items>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    pub position: [f64; 3],
    /// Degrees in `[0, 360)`.
    #[serde(default)]
    pub yaw: f64,
}

impl AgentPose {
    pub fn at(position: [f64; 3]) -> Self {
        Self { position, yaw: 0.0 }
    }

    pub fn cell(&self) -> BlockPos {
        BlockPos::containing(self.position)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentBody {
    pub id: AgentId,
    pub pose: AgentPose,
    pub held_item: Option<String>,
    /// `None` means "no data": a belief world that cannot know this inventory.
    pub inventory: Option<Items>,
}

impl AgentBody {
    pub fn new(id: AgentId, position: [f64; 3]) -> Self {
        Self {
            id,
            pose: AgentPose::at(position),
            held_item: None,
            inventory: Some(Items::new()),
        }
    }
}

/// Complete simulator state: the `s` every node steps over.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub bounds: Bounds,
    pub cells: BTreeMap<BlockPos, Cell>,
    pub containers: BTreeMap<BlockPos, Container>,
    pub agents: BTreeMap<AgentId, AgentBody>,
    pub tick: u64,
}

/// Immutable, cheaply clonable copy of a [`WorldState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot(Arc<WorldState>);

impl StateSnapshot {
    pub fn new(world: WorldState) -> Self {
        Self(Arc::new(world))
    }

    pub fn into_world(self) -> WorldState {
        Arc::try_unwrap(self.0).unwrap_or_else(|shared| (*shared).clone())
    }
}

impl Deref for StateSnapshot {
    type Target = WorldState;

    fn deref(&self) -> &WorldState {
        &self.0
    }
}

impl WorldState {
    pub fn empty(bounds: Bounds) -> Self {
        Self {
            bounds,
            cells: BTreeMap::new(),
            containers: BTreeMap::new(),
            agents: BTreeMap::new(),
            tick: 0,
        }
    }

    pub fn cell(&self, pos: BlockPos) -> Cell {
        self.cells.get(&pos).cloned().unwrap_or(Cell::Air)
    }

    pub fn is_opaque(&self, pos: BlockPos) -> bool {
        self.cells.get(&pos).is_some_and(Cell::is_opaque)
    }

    pub fn is_passable(&self, pos: BlockPos) -> bool {
        self.bounds.contains(pos) && self.cells.get(&pos).is_none_or(Cell::is_passable)
    }

    pub fn agent(&self, id: &str) -> Option<&AgentBody> {
        self.agents.get(id)
    }

    /// Freezes the current state.
    pub fn get_state(&self) -> StateSnapshot {
        StateSnapshot::new(self.clone())
    }

    /// Overwrites this world with a snapshot. The snapshot's bounds must
    /// fit inside ours; our own bounds are kept.
    pub fn apply_state(&mut self, snapshot: &StateSnapshot) -> Result<(), WorldError> {
        if !self.bounds.contains_region(&snapshot.bounds) {
            return Err(WorldError::OutOfBounds {
                what: "snapshot bounds".into(),
                at: format!("{}..{}", snapshot.bounds.min, snapshot.bounds.max),
            });
        }
        self.cells = snapshot.cells.clone();
        self.containers = snapshot.containers.clone();
        self.agents = snapshot.agents.clone();
        self.tick = snapshot.tick;
        Ok(())
    }

    /// Checks every structural invariant of a world.
    pub fn check_invariants(&self) -> Result<(), WorldError> {
        let b = self.bounds;
        if b.min.x > b.max.x || b.min.y > b.max.y || b.min.z > b.max.z {
            return Err(WorldError::InvalidBounds {
                min: b.min,
                max: b.max,
            });
        }
        for (pos, cell) in &self.cells {
            if !b.contains(*pos) {
                return Err(out_of_bounds("cell", pos));
            }
            if matches!(cell, Cell::Container(_)) != self.containers.contains_key(pos) {
                return Err(WorldError::ContainerCellMismatch(*pos));
            }
        }
        for (pos, container) in &self.containers {
            if container.pos != *pos || !matches!(self.cells.get(pos), Some(Cell::Container(_))) {
                return Err(WorldError::ContainerCellMismatch(*pos));
            }
            let zero = container
                .contents
                .as_ref()
                .is_some_and(|c| c.values().any(|n| *n == 0));
            if zero {
                return Err(WorldError::ContainerCellMismatch(*pos));
            }
        }
        for (id, body) in &self.agents {
            if body.id != *id {
                return Err(WorldError::DuplicateAgentId(id.clone()));
            }
            if !body.pose.position.iter().all(|v| v.is_finite()) || !body.pose.yaw.is_finite() {
                return Err(WorldError::BadPose(id.clone()));
            }
            if !b.contains_point(body.pose.position) {
                return Err(out_of_bounds(&format!("agent `{id}`"), &body.pose.cell()));
            }
        }
        Ok(())
    }
}

fn out_of_bounds(what: &str, at: &BlockPos) -> WorldError {
    WorldError::OutOfBounds {
        what: what.to_string(),
        at: at.to_string(),
    }
}

/// Removes zero-count entries.
pub fn normalize_items(items: &mut Items) {
    items.retain(|_, n| *n > 0);
}

// ---------------------------------------------------------------------------
// JSON document form

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub pos: BlockPos,
    pub kind: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillSpec {
    pub min: BlockPos,
    pub max: BlockPos,
    pub kind: Cell,
}

fn default_container_block() -> String {
    "chest".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerSpec {
    pub pos: BlockPos,
    #[serde(default = "default_container_block")]
    pub block: String,
    #[serde(default)]
    pub contents: Option<Items>,
}

fn known_empty() -> Option<Items> {
    Some(Items::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: AgentId,
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub held_item: Option<String>,
    /// Missing means empty; explicit `null` means unknown.
    #[serde(default = "known_empty")]
    pub inventory: Option<Items>,
}

/// The JSON description a world is created from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fills: Vec<FillSpec>,
    #[serde(default)]
    pub cells: Vec<CellSpec>,
    #[serde(default)]
    pub containers: Vec<ContainerSpec>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
}

impl WorldSpec {
    pub fn empty(bounds: Bounds) -> Self {
        Self {
            bounds,
            fills: Vec::new(),
            cells: Vec::new(),
            containers: Vec::new(),
            agents: Vec::new(),
        }
    }
}

/// Builds a world at tick 0 from its JSON description.
///
/// Fills are applied first, then cells (later entries win), then containers.
/// A container entry creates its own container cell unless a cell entry at
/// the same position already says otherwise.
pub fn create_world(spec: &WorldSpec) -> Result<WorldState, WorldError> {
    let bounds = spec.bounds;
    let mut world = WorldState::empty(bounds);
    world.check_invariants()?;

    for fill in &spec.fills {
        let region = Region::new(fill.min, fill.max);
        if !bounds.contains_region(&region) {
            return Err(out_of_bounds("fill", &fill.min));
        }
        for pos in region.cells() {
            world.cells.insert(pos, fill.kind.clone());
        }
    }
    let mut explicit = BTreeMap::new();
    for c in &spec.cells {
        if !bounds.contains(c.pos) {
            return Err(out_of_bounds("cell", &c.pos));
        }
        world.cells.insert(c.pos, c.kind.clone());
        explicit.insert(c.pos, c.kind.clone());
    }
    for c in &spec.containers {
        if !bounds.contains(c.pos) {
            return Err(out_of_bounds("container", &c.pos));
        }
        match explicit.get(&c.pos) {
            Some(Cell::Container(_)) | None => {}
            Some(_) => return Err(WorldError::ContainerCellMismatch(c.pos)),
        }
        if world.containers.contains_key(&c.pos) {
            return Err(WorldError::ContainerCellMismatch(c.pos));
        }
        if !matches!(world.cells.get(&c.pos), Some(Cell::Container(_))) {
            world.cells.insert(c.pos, Cell::Container(c.block.clone()));
        }
        let mut contents = c.contents.clone().unwrap_or_default();
        normalize_items(&mut contents);
        world.containers.insert(
            c.pos,
            Container {
                pos: c.pos,
                contents: Some(contents),
            },
        );
    }
    for a in &spec.agents {
        if world.agents.contains_key(&a.id) {
            return Err(WorldError::DuplicateAgentId(a.id.clone()));
        }
        if !a.position.iter().all(|v| v.is_finite()) || !a.yaw.is_finite() {
            return Err(WorldError::BadPose(a.id.clone()));
        }
        if !bounds.contains_point(a.position) {
            return Err(out_of_bounds(
                &format!("agent `{}`", a.id),
                &BlockPos::containing(a.position),
            ));
        }
        if !world.is_passable(BlockPos::containing(a.position)) {
            return Err(WorldError::AgentInSolid(a.id.clone()));
        }
        let inventory = a.inventory.clone().map(|mut inv| {
            normalize_items(&mut inv);
            inv
        });
        world.agents.insert(
            a.id.clone(),
            AgentBody {
                id: a.id.clone(),
                pose: AgentPose {
                    position: a.position,
                    yaw: a.yaw.rem_euclid(360.0),
                },
                held_item: a.held_item.clone(),
                inventory,
            },
        );
    }
    world.check_invariants()?;
    Ok(world)
}

impl WorldState {
    /// Inverse of [`create_world`] (up to fills, which are expanded).
    pub fn to_spec(&self) -> WorldSpec {
        WorldSpec {
            bounds: self.bounds,
            fills: Vec::new(),
            cells: self
                .cells
                .iter()
                .map(|(pos, kind)| CellSpec {
                    pos: *pos,
                    kind: kind.clone(),
                })
                .collect(),
            containers: self
                .containers
                .values()
                .map(|c| ContainerSpec {
                    pos: c.pos,
                    block: self.cell(c.pos).block_name().unwrap_or("chest").to_string(),
                    contents: c.contents.clone(),
                })
                .collect(),
            agents: self
                .agents
                .values()
                .map(|b| AgentSpec {
                    id: b.id.clone(),
                    position: b.pose.position,
                    yaw: b.pose.yaw,
                    held_item: b.held_item.clone(),
                    inventory: b.inventory.clone(),
                })
                .collect(),
        }
    }
}

impl Serialize for WorldState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Dump<'a> {
            tick: u64,
            #[serde(flatten)]
            spec: &'a WorldSpec,
        }
        Dump {
            tick: self.tick,
            spec: &self.to_spec(),
        }
        .serialize(serializer)
    }
}
