//! Block geometry, container registry and the stacking rules of the grid.
//!
//! A block is a `rows × slots × tiers` grid of cells. Every occupied cell
//! above ground level must sit on another occupied cell, and a container can
//! only be lifted when nothing is stacked on it.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use thiserror::Error;

pub const DEFAULT_ROW_PITCH: f64 = 4.5;
pub const DEFAULT_SLOT_PITCH: f64 = 6.5;
pub const DEFAULT_TIER_PITCH: f64 = 2.6;
pub const DEFAULT_TABU_CAPACITY: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum YardError {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("coordinate {0} is outside the block")]
    OutOfBounds(Coordinate),
    #[error("unknown container {0}")]
    UnknownContainer(ContainerId),
    #[error("container {0} already exists")]
    DuplicateContainer(ContainerId),
    #[error("container {0} has no position")]
    NotPositioned(ContainerId),
    #[error("container {id} is buried under {above} container(s)")]
    Buried { id: ContainerId, above: usize },
    #[error("destination {0} is not supported from below")]
    UnsupportedDestination(Coordinate),
    #[error("destination {0} is already occupied")]
    OccupiedDestination(Coordinate),
    #[error("container {0} is already at its destination")]
    SameCell(ContainerId),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Unique identity of a container agent within a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContainerId(pub u32);

impl fmt::Display for ContainerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Container type label: the simplified `T1`..`T5` classes or one of the
/// nine IMDG classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContainerType {
    T1,
    T2,
    T3,
    T4,
    T5,
    Imdg(u8),
}

impl ContainerType {
    /// Number of distinct labels (`T1..T5` plus `IMDG1..IMDG9`).
    pub const COUNT: usize = 14;

    pub const SIMPLIFIED: [ContainerType; 5] = [
        ContainerType::T1,
        ContainerType::T2,
        ContainerType::T3,
        ContainerType::T4,
        ContainerType::T5,
    ];

    pub fn index(self) -> usize {
        match self {
            ContainerType::T1 => 0,
            ContainerType::T2 => 1,
            ContainerType::T3 => 2,
            ContainerType::T4 => 3,
            ContainerType::T5 => 4,
            ContainerType::Imdg(class) => 4 + class as usize,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0..=4 => Some(Self::SIMPLIFIED[index]),
            5..=13 => Some(ContainerType::Imdg((index - 4) as u8)),
            _ => None,
        }
    }
}

impl fmt::Display for ContainerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContainerType::Imdg(class) => write!(f, "IMDG{class}"),
            other => write!(f, "T{}", other.index() + 1),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown container type label `{0}`")]
pub struct UnknownTypeLabel(pub String);

impl FromStr for ContainerType {
    type Err = UnknownTypeLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnknownTypeLabel(s.to_string());
        if let Some(rest) = s.strip_prefix("IMDG") {
            let class: u8 = rest.parse().map_err(|_| err())?;
            if (1..=9).contains(&class) {
                return Ok(ContainerType::Imdg(class));
            }
            return Err(err());
        }
        match s {
            "T1" => Ok(ContainerType::T1),
            "T2" => Ok(ContainerType::T2),
            "T3" => Ok(ContainerType::T3),
            "T4" => Ok(ContainerType::T4),
            "T5" => Ok(ContainerType::T5),
            _ => Err(err()),
        }
    }
}

/// Grid position: `x` is the row, `y` the slot along the row, `z` the tier.
///
/// The derived ordering is lexicographic on `(x, y, z)`, which is the
/// enumeration order used everywhere cells are listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coordinate {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Coordinate {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    /// True when both cells differ by exactly one step on exactly one axis.
    pub fn is_von_neumann_adjacent(&self, other: &Coordinate) -> bool {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        let dz = self.z.abs_diff(other.z);
        dx + dy + dz == 1
    }

    pub fn same_column(&self, other: &Coordinate) -> bool {
        self.x == other.x && self.y == other.y
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Block extents and the metric spacing between adjacent cell centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YardDimensions {
    pub rows: usize,
    pub slots: usize,
    pub tiers: usize,
    pub row_pitch: f64,
    pub slot_pitch: f64,
    pub tier_pitch: f64,
}

impl YardDimensions {
    /// Dimensions with the default pitches (4.5 m, 6.5 m, 2.6 m).
    pub fn new(rows: usize, slots: usize, tiers: usize) -> Result<Self, YardError> {
        Self::with_pitch(
            rows,
            slots,
            tiers,
            [DEFAULT_ROW_PITCH, DEFAULT_SLOT_PITCH, DEFAULT_TIER_PITCH],
        )
    }

    pub fn with_pitch(rows: usize, slots: usize, tiers: usize, pitch: [f64; 3]) -> Result<Self, YardError> {
        if rows == 0 || slots == 0 || tiers == 0 {
            return Err(YardError::InvalidDimensions(format!(
                "counts must be at least 1, got {rows}x{slots}x{tiers}"
            )));
        }
        if pitch.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(YardError::InvalidDimensions(format!(
                "pitches must be positive, got {pitch:?}"
            )));
        }
        Ok(Self {
            rows,
            slots,
            tiers,
            row_pitch: pitch[0],
            slot_pitch: pitch[1],
            tier_pitch: pitch[2],
        })
    }

    pub fn capacity(&self) -> usize {
        self.rows * self.slots * self.tiers
    }

    pub fn columns(&self) -> usize {
        self.rows * self.slots
    }

    pub fn contains(&self, c: Coordinate) -> bool {
        c.x < self.rows && c.y < self.slots && c.z < self.tiers
    }

    pub fn check(&self, c: Coordinate) -> Result<(), YardError> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(YardError::OutOfBounds(c))
        }
    }

    /// Dense index; increasing index is lexicographic `(x, y, z)` order.
    pub(crate) fn cell_index(&self, c: Coordinate) -> usize {
        (c.x * self.slots + c.y) * self.tiers + c.z
    }

    pub(crate) fn column_index(&self, x: usize, y: usize) -> usize {
        x * self.slots + y
    }

    pub(crate) fn coordinate_of(&self, index: usize) -> Coordinate {
        let z = index % self.tiers;
        let column = index / self.tiers;
        Coordinate::new(column / self.slots, column % self.slots, z)
    }

    /// Iterates every cell in lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = Coordinate> + '_ {
        (0..self.capacity()).map(|i| self.coordinate_of(i))
    }
}

/// Center of a cell in meters, measured from the center of cell `(0, 0, 0)`.
pub fn cell_center(dims: &YardDimensions, c: Coordinate) -> Result<[f64; 3], YardError> {
    dims.check(c)?;
    Ok(center_unchecked(dims, c))
}

pub(crate) fn center_unchecked(dims: &YardDimensions, c: Coordinate) -> [f64; 3] {
    [
        c.x as f64 * dims.row_pitch,
        c.y as f64 * dims.slot_pitch,
        c.z as f64 * dims.tier_pitch,
    ]
}

/// Euclidean distance in meters between two cell centers.
pub fn distance(dims: &YardDimensions, a: Coordinate, b: Coordinate) -> Result<f64, YardError> {
    dims.check(a)?;
    dims.check(b)?;
    Ok(distance_unchecked(dims, a, b))
}

pub(crate) fn distance_unchecked(dims: &YardDimensions, a: Coordinate, b: Coordinate) -> f64 {
    let dx = a.x.abs_diff(b.x) as f64 * dims.row_pitch;
    let dy = a.y.abs_diff(b.y) as f64 * dims.slot_pitch;
    let dz = a.z.abs_diff(b.z) as f64 * dims.tier_pitch;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// One container agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainerRecord {
    pub id: ContainerId,
    pub ctype: ContainerType,
    pub position: Option<Coordinate>,
    /// Recently vacated cells, oldest first.
    pub tabu: VecDeque<Coordinate>,
}

/// Occupancy state of a block.
#[derive(Debug, Clone, PartialEq)]
pub struct YardConfiguration {
    dims: YardDimensions,
    /// Occupant of each cell, with its type for fast rule scans.
    cells: Vec<Option<(ContainerId, ContainerType)>>,
    heights: Vec<usize>,
    registry: BTreeMap<ContainerId, ContainerRecord>,
    tabu_capacity: usize,
}

impl YardConfiguration {
    pub fn new(dims: YardDimensions) -> Self {
        Self {
            dims,
            cells: vec![None; dims.capacity()],
            heights: vec![0; dims.columns()],
            registry: BTreeMap::new(),
            tabu_capacity: DEFAULT_TABU_CAPACITY,
        }
    }

    pub fn dims(&self) -> &YardDimensions {
        &self.dims
    }

    pub fn tabu_capacity(&self) -> usize {
        self.tabu_capacity
    }

    /// Changes the tabu memory length, dropping the oldest entries that no
    /// longer fit.
    pub fn set_tabu_capacity(&mut self, capacity: usize) {
        self.tabu_capacity = capacity;
        for record in self.registry.values_mut() {
            while record.tabu.len() > capacity {
                record.tabu.pop_front();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    /// Containers in ascending id order.
    pub fn containers(&self) -> impl Iterator<Item = &ContainerRecord> {
        self.registry.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = ContainerId> + '_ {
        self.registry.keys().copied()
    }

    pub fn get(&self, id: ContainerId) -> Result<&ContainerRecord, YardError> {
        self.registry.get(&id).ok_or(YardError::UnknownContainer(id))
    }

    pub fn position(&self, id: ContainerId) -> Result<Coordinate, YardError> {
        self.get(id)?.position.ok_or(YardError::NotPositioned(id))
    }

    pub fn occupant(&self, c: Coordinate) -> Option<ContainerId> {
        if self.dims.contains(c) {
            self.cells[self.dims.cell_index(c)].map(|(id, _)| id)
        } else {
            None
        }
    }

    /// Occupant of an in-bounds cell together with its type.
    pub(crate) fn occupant_unchecked(&self, c: Coordinate) -> Option<(ContainerId, ContainerType)> {
        self.cells[self.dims.cell_index(c)]
    }

    pub fn column_height(&self, x: usize, y: usize) -> usize {
        self.heights[self.dims.column_index(x, y)]
    }

    pub fn is_full(&self) -> bool {
        self.registry.len() >= self.dims.capacity()
    }

    /// Adds a new container at `at`, which must be empty and supported.
    pub fn place(&mut self, id: ContainerId, ctype: ContainerType, at: Coordinate) -> Result<(), YardError> {
        self.dims.check(at)?;
        if self.registry.contains_key(&id) {
            return Err(YardError::DuplicateContainer(id));
        }
        let index = self.dims.cell_index(at);
        if self.cells[index].is_some() {
            return Err(YardError::OccupiedDestination(at));
        }
        if self.column_height(at.x, at.y) != at.z {
            return Err(YardError::UnsupportedDestination(at));
        }
        self.cells[index] = Some((id, ctype));
        self.heights[self.dims.column_index(at.x, at.y)] += 1;
        self.registry.insert(
            id,
            ContainerRecord {
                id,
                ctype,
                position: Some(at),
                tabu: VecDeque::new(),
            },
        );
        Ok(())
    }

    /// Empty and supported cells, one per non-full column, in lexicographic
    /// order.
    pub fn placeable_cells(&self) -> Vec<Coordinate> {
        let mut out = Vec::new();
        for x in 0..self.dims.rows {
            for y in 0..self.dims.slots {
                let h = self.column_height(x, y);
                if h < self.dims.tiers {
                    out.push(Coordinate::new(x, y, h));
                }
            }
        }
        out
    }

    /// Cells `id` could be moved to once it and everything above it has been
    /// lifted: placeable cells outside its own column.
    pub fn destinations_for(&self, id: ContainerId) -> Result<Vec<Coordinate>, YardError> {
        let from = self.position(id)?;
        let mut cells = self.placeable_cells();
        cells.retain(|c| !c.same_column(&from));
        Ok(cells)
    }

    /// Ids stacked above `id`, highest first.
    pub fn containers_above(&self, id: ContainerId) -> Result<Vec<ContainerId>, YardError> {
        let at = self.position(id)?;
        let height = self.column_height(at.x, at.y);
        Ok((at.z + 1..height)
            .rev()
            .filter_map(|z| self.occupant(Coordinate::new(at.x, at.y, z)))
            .collect())
    }

    /// Moves a top-of-stack container to `to`, recording the vacated cell in
    /// its tabu memory.
    pub fn apply_move(&mut self, id: ContainerId, to: Coordinate) -> Result<(), YardError> {
        let from = self.position(id)?;
        self.dims.check(to)?;
        if from == to {
            return Err(YardError::SameCell(id));
        }
        let height = self.column_height(from.x, from.y);
        if height > from.z + 1 {
            return Err(YardError::Buried {
                id,
                above: height - from.z - 1,
            });
        }
        let to_index = self.dims.cell_index(to);
        if self.cells[to_index].is_some() {
            return Err(YardError::OccupiedDestination(to));
        }
        let support = if to.same_column(&from) {
            height - 1
        } else {
            self.column_height(to.x, to.y)
        };
        if to.z != support {
            return Err(YardError::UnsupportedDestination(to));
        }

        let from_index = self.dims.cell_index(from);
        let occupant = self.cells[from_index].take();
        self.heights[self.dims.column_index(from.x, from.y)] -= 1;
        self.cells[to_index] = occupant;
        self.heights[self.dims.column_index(to.x, to.y)] += 1;

        let capacity = self.tabu_capacity;
        let record = self.registry.get_mut(&id).expect("positioned container");
        record.position = Some(to);
        if capacity > 0 {
            record.tabu.retain(|c| *c != from);
            record.tabu.push_back(from);
            while record.tabu.len() > capacity {
                record.tabu.pop_front();
            }
        }
        Ok(())
    }

    /// Hash of the occupancy grid (which id sits where).
    pub fn occupancy_hash(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for slot in &self.cells {
            slot.map(|(id, _)| id).hash(&mut hasher);
        }
        hasher.finish()
    }

    /// Checks the bijection and gravity invariants from scratch.
    pub fn validate(&self) -> Result<(), YardError> {
        let mut seen = 0usize;
        for (index, slot) in self.cells.iter().enumerate() {
            let Some((id, ctype)) = slot else { continue };
            let c = self.dims.coordinate_of(index);
            let record = self
                .registry
                .get(id)
                .ok_or_else(|| YardError::Invariant(format!("cell {c} holds unknown id {id}")))?;
            if record.position != Some(c) || record.ctype != *ctype {
                return Err(YardError::Invariant(format!(
                    "cell {c} holds {id} but the container records {:?}",
                    record.position
                )));
            }
            if c.z > 0 && self.cells[index - 1].is_none() {
                return Err(YardError::Invariant(format!("container {id} floats at {c}")));
            }
            seen += 1;
        }
        let positioned = self.registry.values().filter(|r| r.position.is_some()).count();
        if seen != positioned {
            return Err(YardError::Invariant(format!(
                "{positioned} positioned containers but {seen} occupied cells"
            )));
        }
        for x in 0..self.dims.rows {
            for y in 0..self.dims.slots {
                let counted = (0..self.dims.tiers)
                    .filter(|&z| self.occupant(Coordinate::new(x, y, z)).is_some())
                    .count();
                if counted != self.column_height(x, y) {
                    return Err(YardError::Invariant(format!("column ({x}, {y}) height cache is stale")));
                }
            }
        }
        for record in self.registry.values() {
            if record.tabu.len() > self.tabu_capacity {
                return Err(YardError::Invariant(format!(
                    "container {} tabu exceeds capacity",
                    record.id
                )));
            }
        }
        Ok(())
    }

    /// Inserts a record without any gravity check; callers must `validate`.
    fn insert_raw(&mut self, record: ContainerRecord) -> Result<(), YardError> {
        let id = record.id;
        if self.registry.contains_key(&id) {
            return Err(YardError::DuplicateContainer(id));
        }
        if let Some(c) = record.position {
            self.dims.check(c)?;
            let index = self.dims.cell_index(c);
            if self.cells[index].is_some() {
                return Err(YardError::OccupiedDestination(c));
            }
            self.cells[index] = Some((id, record.ctype));
            self.heights[self.dims.column_index(c.x, c.y)] += 1;
        }
        self.registry.insert(id, record);
        Ok(())
    }
}

pub const SNAPSHOT_HEADER: &str = "# hazyard v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("snapshot violates yard invariants: {0}")]
    Invariant(#[from] YardError),
}

fn parse_err(line: usize, message: impl Into<String>) -> SnapshotError {
    SnapshotError::Parse {
        line,
        message: message.into(),
    }
}

/// Serializes positioned containers in ascending id order. Tabu memory is
/// runtime state and is not written.
pub fn save_snapshot(cfg: &YardConfiguration) -> String {
    let d = cfg.dims();
    let mut out = String::new();
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    out.push_str(&format!("dims {} {} {}\n", d.rows, d.slots, d.tiers));
    out.push_str(&format!("pitch {} {} {}\n", d.row_pitch, d.slot_pitch, d.tier_pitch));
    for record in cfg.containers() {
        if let Some(c) = record.position {
            out.push_str(&format!("c {} {} {} {} {}\n", record.id, record.ctype, c.x, c.y, c.z));
        }
    }
    out
}

/// Parses a snapshot. Lines that are not snapshot records (for example the
/// `m` lines of a trace file) are rejected; see [`crate::trace::parse_trace`] to parse
/// a mixed document.
pub fn load_snapshot(text: &str) -> Result<YardConfiguration, SnapshotError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    load_snapshot_lines(&lines)
}

pub(crate) fn load_snapshot_lines(lines: &[(usize, &str)]) -> Result<YardConfiguration, SnapshotError> {
    let mut iter = lines.iter();
    match iter.next() {
        Some((_, l)) if l.trim_end() == SNAPSHOT_HEADER => {}
        Some((n, _)) => return Err(parse_err(*n, format!("expected `{SNAPSHOT_HEADER}`"))),
        None => return Err(parse_err(1, "empty snapshot")),
    }

    let mut counts: Option<(usize, usize, usize)> = None;
    let mut pitch: Option<[f64; 3]> = None;
    let mut records: Vec<(usize, ContainerRecord)> = Vec::new();

    for &(n, raw) in iter {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "dims" => {
                let [r, s, t] = parse_fields::<usize, 3>(n, &fields[1..])?;
                counts = Some((r, s, t));
            }
            "pitch" => {
                pitch = Some(parse_fields::<f64, 3>(n, &fields[1..])?);
            }
            "c" => {
                if fields.len() != 6 {
                    return Err(parse_err(n, "expected `c <id> <type> <x> <y> <z>`"));
                }
                let id: u32 = fields[1]
                    .parse()
                    .map_err(|_| parse_err(n, format!("bad id `{}`", fields[1])))?;
                let ctype: ContainerType = fields[2]
                    .parse()
                    .map_err(|e: UnknownTypeLabel| parse_err(n, e.to_string()))?;
                let [x, y, z] = parse_fields::<usize, 3>(n, &fields[3..])?;
                records.push((
                    n,
                    ContainerRecord {
                        id: ContainerId(id),
                        ctype,
                        position: Some(Coordinate::new(x, y, z)),
                        tabu: VecDeque::new(),
                    },
                ));
            }
            other => return Err(parse_err(n, format!("unknown record `{other}`"))),
        }
    }

    let (rows, slots, tiers) = counts.ok_or_else(|| parse_err(lines.len(), "missing `dims` line"))?;
    let pitch = pitch.unwrap_or([DEFAULT_ROW_PITCH, DEFAULT_SLOT_PITCH, DEFAULT_TIER_PITCH]);
    let dims = YardDimensions::with_pitch(rows, slots, tiers, pitch)?;
    let mut cfg = YardConfiguration::new(dims);
    for (n, record) in records {
        cfg.insert_raw(record).map_err(|e| match e {
            YardError::OutOfBounds(_) => parse_err(n, e.to_string()),
            other => SnapshotError::Invariant(other),
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_fields<T: FromStr, const N: usize>(line: usize, fields: &[&str]) -> Result<[T; N], SnapshotError> {
    if fields.len() != N {
        return Err(parse_err(line, format!("expected {N} values, got {}", fields.len())));
    }
    let mut parsed = Vec::with_capacity(N);
    for f in fields {
        parsed.push(
            f.parse::<T>()
                .map_err(|_| parse_err(line, format!("cannot parse `{f}`")))?,
        );
    }
    match parsed.try_into() {
        Ok(arr) => Ok(arr),
        Err(_) => unreachable!("length checked above"),
    }
}
