//! Brute-force reference implementations.
//!
//! Nothing here calls into the rule engine or the strategies: rules are
//! applied straight from the matrix entries, distances are recomputed from
//! the pitches, and traces are replayed on a plain occupancy map.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::rules::{SeparationRule, SeparationRuleMatrix};
use crate::strategy::{MoveRecord, RunStatus};
use crate::trace::OutcomeClaim;
use crate::yard::{ContainerId, ContainerType, Coordinate, YardConfiguration, YardDimensions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("unknown container {0}")]
    UnknownContainer(ContainerId),
    #[error("container {0} has no position")]
    NotPositioned(ContainerId),
    #[error("type {0} is not declared in the rule matrix")]
    UnknownType(ContainerType),
    #[error("instance too large to enumerate: {cells} cells, {containers} containers (limits {max_cells}, {max_containers})")]
    TooLarge {
        cells: usize,
        containers: usize,
        max_cells: usize,
        max_containers: usize,
    },
}

fn meters(d: &YardDimensions, a: Coordinate, b: Coordinate) -> f64 {
    let dx = (a.x as f64 - b.x as f64) * d.row_pitch;
    let dy = (a.y as f64 - b.y as f64) * d.slot_pitch;
    let dz = (a.z as f64 - b.z as f64) * d.tier_pitch;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn face_adjacent(a: Coordinate, b: Coordinate) -> bool {
    let diff = |p: usize, q: usize| (p as i64 - q as i64).abs();
    diff(a.x, b.x) + diff(a.y, b.y) + diff(a.z, b.z) == 1
}

fn violates(
    m: &SeparationRuleMatrix,
    d: &YardDimensions,
    (ta, a): (ContainerType, Coordinate),
    (tb, b): (ContainerType, Coordinate),
) -> Result<bool, OracleError> {
    let rule = m
        .rule(ta, tb)
        .map_err(|_| OracleError::UnknownType(if m.contains(ta) { tb } else { ta }))?;
    Ok(match rule {
        SeparationRule::None => false,
        SeparationRule::Metric { min_distance } => meters(d, a, b) < min_distance,
        SeparationRule::Explosive { net_weight_kg } => meters(d, a, b) < 4.8 * net_weight_kg.cbrt(),
        SeparationRule::VonNeumann => face_adjacent(a, b),
    })
}

/// Violated rules of `id`, by a direct scan over every other container.
pub fn brute_fitness(cfg: &YardConfiguration, m: &SeparationRuleMatrix, id: ContainerId) -> Result<u32, OracleError> {
    let me = cfg
        .containers()
        .find(|r| r.id == id)
        .ok_or(OracleError::UnknownContainer(id))?;
    let at = me.position.ok_or(OracleError::NotPositioned(id))?;
    let d = cfg.dims();
    let mut count = 0;
    for other in cfg.containers() {
        if other.id == id {
            continue;
        }
        let Some(pos) = other.position else { continue };
        if violates(m, d, (me.ctype, at), (other.ctype, pos))? {
            count += 1;
        }
    }
    Ok(count)
}

/// `(worst, sum)` of brute-force fitness over all positioned containers.
pub fn brute_block_fitness(cfg: &YardConfiguration, m: &SeparationRuleMatrix) -> Result<(u32, u32), OracleError> {
    let mut worst = 0;
    let mut sum = 0;
    for r in cfg.containers() {
        if r.position.is_none() {
            continue;
        }
        let f = brute_fitness(cfg, m, r.id)?;
        worst = worst.max(f);
        sum += f;
    }
    Ok((worst, sum))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_cells: usize,
    pub max_containers: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            max_cells: 12,
            max_containers: 6,
        }
    }
}

impl EnumerationLimits {
    /// Explicit override for callers prepared to wait.
    pub fn unbounded() -> Self {
        Self {
            max_cells: usize::MAX,
            max_containers: usize::MAX,
        }
    }

    pub fn admits(&self, dims: &YardDimensions, containers: usize) -> bool {
        dims.capacity() <= self.max_cells && containers <= self.max_containers
    }
}

/// Whether any gravity-valid placement of `types` in an empty block of
/// `dims` violates no rule. Enumerates every placement, pruning on the first
/// violation.
pub fn exhaustive_safe_exists(
    dims: &YardDimensions,
    types: &[ContainerType],
    m: &SeparationRuleMatrix,
    limits: EnumerationLimits,
) -> Result<bool, OracleError> {
    if !limits.admits(dims, types.len()) {
        return Err(OracleError::TooLarge {
            cells: dims.capacity(),
            containers: types.len(),
            max_cells: limits.max_cells,
            max_containers: limits.max_containers,
        });
    }
    if types.len() > dims.capacity() {
        return Ok(false);
    }
    let mut kinds: BTreeMap<ContainerType, usize> = BTreeMap::new();
    for t in types {
        if !m.contains(*t) {
            return Err(OracleError::UnknownType(*t));
        }
        *kinds.entry(*t).or_default() += 1;
    }
    let kinds: Vec<(ContainerType, usize)> = kinds.into_iter().collect();
    let mut counts: Vec<usize> = kinds.iter().map(|(_, n)| *n).collect();
    let kinds: Vec<ContainerType> = kinds.into_iter().map(|(t, _)| t).collect();

    // Cells in lexicographic order: tiers vary fastest, so the cell below is
    // always decided before the one above.
    let mut cells = Vec::with_capacity(dims.capacity());
    for x in 0..dims.rows {
        for y in 0..dims.slots {
            for z in 0..dims.tiers {
                cells.push(Coordinate::new(x, y, z));
            }
        }
    }
    let mut occupied: HashMap<Coordinate, ContainerType> = HashMap::new();
    let mut search = Search {
        dims,
        m,
        kinds: &kinds,
        cells: &cells,
    };
    search.place(0, &mut counts, types.len(), &mut occupied)
}

struct Search<'a> {
    dims: &'a YardDimensions,
    m: &'a SeparationRuleMatrix,
    kinds: &'a [ContainerType],
    cells: &'a [Coordinate],
}

impl Search<'_> {
    fn place(
        &mut self,
        index: usize,
        counts: &mut [usize],
        remaining: usize,
        occupied: &mut HashMap<Coordinate, ContainerType>,
    ) -> Result<bool, OracleError> {
        if remaining == 0 {
            return Ok(true);
        }
        if index >= self.cells.len() || self.cells.len() - index < remaining {
            return Ok(false);
        }
        let c = self.cells[index];
        let supported = c.z == 0 || occupied.contains_key(&Coordinate::new(c.x, c.y, c.z - 1));
        if supported {
            for k in 0..self.kinds.len() {
                if counts[k] == 0 {
                    continue;
                }
                let t = self.kinds[k];
                let mut clash = false;
                for (&pos, &other) in occupied.iter() {
                    if violates(self.m, self.dims, (t, c), (other, pos))? {
                        clash = true;
                        break;
                    }
                }
                if clash {
                    continue;
                }
                counts[k] -= 1;
                occupied.insert(c, t);
                let found = self.place(index + 1, counts, remaining - 1, occupied)?;
                occupied.remove(&c);
                counts[k] += 1;
                if found {
                    return Ok(true);
                }
            }
        }
        self.place(index + 1, counts, remaining, occupied)
    }
}

/// Where in a trace a check failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Move { index: usize, seq: usize },
    Initial,
    Final,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Move { index, seq } => write!(f, "move #{} (seq {seq})", index + 1),
            Location::Initial => f.write_str("initial configuration"),
            Location::Final => f.write_str("final configuration"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub description: String,
    pub location: Location,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerificationReport {
    /// How many times each check ran.
    pub checked: BTreeMap<&'static str, usize>,
    pub failures: Vec<Failure>,
    /// Block fitness `(worst, sum)` of the replayed final configuration.
    pub final_block: Option<(u32, u32)>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn tick(&mut self, check: &'static str) {
        *self.checked.entry(check).or_default() += 1;
    }

    fn fail(&mut self, location: Location, description: impl Into<String>) {
        self.failures.push(Failure {
            description: description.into(),
            location,
        });
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "verification passed")?;
        } else {
            write!(f, "verification failed ({} failures)", self.failures.len())?;
        }
        for (check, n) in &self.checked {
            write!(f, "\n  {check}: {n} checked")?;
        }
        if let Some((w, s)) = self.final_block {
            write!(f, "\n  final block fitness: worst {w}, sum {s}")?;
        }
        for fail in &self.failures {
            write!(f, "\n  FAIL at {}: {}", fail.location, fail.description)?;
        }
        Ok(())
    }
}

/// Plain replay state: cell → id and id → (type, cell).
struct Replay {
    dims: YardDimensions,
    cells: HashMap<Coordinate, ContainerId>,
    items: BTreeMap<ContainerId, (ContainerType, Coordinate)>,
}

impl Replay {
    fn inside(&self, c: Coordinate) -> bool {
        c.x < self.dims.rows && c.y < self.dims.slots && c.z < self.dims.tiers
    }

    fn structure_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (c, id) in &self.cells {
            match self.items.get(id) {
                Some((_, pos)) if pos == c => {}
                _ => errs.push(format!("cell {c} and container {id} disagree")),
            }
            if c.z > 0 && !self.cells.contains_key(&Coordinate::new(c.x, c.y, c.z - 1)) {
                errs.push(format!("container {id} floats at {c}"));
            }
        }
        if self.cells.len() != self.items.len() {
            errs.push(format!(
                "{} containers but {} occupied cells",
                self.items.len(),
                self.cells.len()
            ));
        }
        errs
    }

    fn block(&self, m: &SeparationRuleMatrix) -> Result<(u32, u32), OracleError> {
        let mut worst = 0;
        let mut sum = 0;
        for (id, &(ta, a)) in &self.items {
            let mut f = 0;
            for (other, &(tb, b)) in &self.items {
                if other != id && violates(m, &self.dims, (ta, a), (tb, b))? {
                    f += 1;
                }
            }
            worst = worst.max(f);
            sum += f;
        }
        Ok((worst, sum))
    }
}

/// Replays `moves` from `initial`, checking every move and the invariants
/// after each step, then compares the final block fitness with `claim`.
pub fn verify_trace(
    initial: &YardConfiguration,
    moves: &[MoveRecord],
    claim: Option<&OutcomeClaim>,
    m: &SeparationRuleMatrix,
) -> VerificationReport {
    let mut report = VerificationReport::default();
    let mut replay = Replay {
        dims: *initial.dims(),
        cells: HashMap::new(),
        items: BTreeMap::new(),
    };
    for r in initial.containers() {
        if let Some(c) = r.position {
            replay.cells.insert(c, r.id);
            replay.items.insert(r.id, (r.ctype, c));
        }
    }
    report.tick("invariants");
    for e in replay.structure_errors() {
        report.fail(Location::Initial, e);
    }

    let mut complete = report.passed();
    for (index, mv) in moves.iter().enumerate() {
        if !complete {
            break;
        }
        let here = Location::Move { index, seq: mv.seq };

        report.tick("seq");
        if mv.seq != index + 1 {
            report.fail(here.clone(), format!("expected seq {}, found {}", index + 1, mv.seq));
        }

        report.tick("source");
        match replay.items.get(&mv.id) {
            Some(&(_, pos)) if pos == mv.from => {}
            Some(&(_, pos)) => {
                report.fail(here, format!("container {} is at {pos}, not {}", mv.id, mv.from));
                complete = false;
                continue;
            }
            None => {
                report.fail(here, format!("unknown container {}", mv.id));
                complete = false;
                continue;
            }
        }

        report.tick("unburied");
        let above = Coordinate::new(mv.from.x, mv.from.y, mv.from.z + 1);
        if let Some(other) = replay.cells.get(&above) {
            report.fail(here, format!("container {} is buried under {other}", mv.id));
            complete = false;
            continue;
        }

        report.tick("destination");
        let to = mv.to;
        let problem = if !replay.inside(to) {
            Some(format!("destination {to} is outside the block"))
        } else if to == mv.from {
            Some("destination equals source".to_string())
        } else if replay.cells.contains_key(&to) {
            Some(format!("destination {to} is occupied"))
        } else if to.z > 0 {
            let below = Coordinate::new(to.x, to.y, to.z - 1);
            (below == mv.from || !replay.cells.contains_key(&below)).then(|| format!("destination {to} floats"))
        } else {
            None
        };
        if let Some(p) = problem {
            report.fail(here, p);
            complete = false;
            continue;
        }

        replay.cells.remove(&mv.from);
        replay.cells.insert(to, mv.id);
        if let Some(item) = replay.items.get_mut(&mv.id) {
            item.1 = to;
        }
        report.tick("invariants");
        for e in replay.structure_errors() {
            report.fail(here.clone(), e);
            complete = false;
        }
    }

    if !complete {
        return report;
    }
    match replay.block(m) {
        Ok(block) => {
            report.final_block = Some(block);
            if let Some(c) = claim {
                report.tick("claim");
                if c.movements != moves.len() {
                    report.fail(
                        Location::Final,
                        format!("claimed {} movements, trace has {}", c.movements, moves.len()),
                    );
                }
                if (c.final_worst, c.final_sum) != block {
                    report.fail(
                        Location::Final,
                        format!(
                            "claimed fitness ({}, {}), replay gives ({}, {})",
                            c.final_worst, c.final_sum, block.0, block.1
                        ),
                    );
                }
                if (c.status == RunStatus::Safe) != (block.0 == 0) {
                    report.fail(
                        Location::Final,
                        format!("status {} disagrees with worst fitness {}", c.status, block.0),
                    );
                }
            }
        }
        Err(e) => report.fail(Location::Final, e.to_string()),
    }
    report
}

/// Result of cross-checking a run that stopped without reaching safety.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeuristicAudit {
    pub status: RunStatus,
    /// `Some(true)` when a safe placement exists, i.e. a confirmed
    /// heuristic failure; `None` when the instance is too large to enumerate.
    pub safe_exists: Option<bool>,
}

impl HeuristicAudit {
    pub fn confirmed_failure(&self) -> bool {
        self.safe_exists == Some(true)
    }
}

/// Audits an unsuccessful run by enumerating placements of the same
/// container multiset. Returns `None` for successful or budget-stopped runs.
pub fn audit_unsuccessful_run(
    initial: &YardConfiguration,
    status: RunStatus,
    m: &SeparationRuleMatrix,
    limits: EnumerationLimits,
) -> Result<Option<HeuristicAudit>, OracleError> {
    if !matches!(status, RunStatus::LocalMinimum | RunStatus::CycleAbort) {
        return Ok(None);
    }
    let types: Vec<ContainerType> = initial.containers().map(|r| r.ctype).collect();
    let safe_exists = if limits.admits(initial.dims(), types.len()) {
        Some(exhaustive_safe_exists(initial.dims(), &types, m, limits)?)
    } else {
        None
    };
    Ok(Some(HeuristicAudit { status, safe_exists }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::MoveCause;
    use ContainerType::*;

    fn dims(r: usize, s: usize, t: usize) -> YardDimensions {
        YardDimensions::new(r, s, t).unwrap()
    }

    #[test]
    fn brute_fitness_examples() {
        let m = SeparationRuleMatrix::standard();
        let mut cfg = YardConfiguration::new(dims(2, 2, 1));
        cfg.place(ContainerId(0), T4, Coordinate::new(0, 0, 0)).unwrap();
        assert_eq!(brute_fitness(&cfg, &m, ContainerId(0)).unwrap(), 0);
        cfg.place(ContainerId(1), T2, Coordinate::new(0, 1, 0)).unwrap();
        assert_eq!(brute_fitness(&cfg, &m, ContainerId(0)).unwrap(), 1);
        assert_eq!(brute_fitness(&cfg, &m, ContainerId(1)).unwrap(), 1);
        assert_eq!(
            brute_fitness(&cfg, &m, ContainerId(5)),
            Err(OracleError::UnknownContainer(ContainerId(5)))
        );
    }

    #[test]
    fn exhaustive_examples() {
        let m = SeparationRuleMatrix::standard();
        let lim = EnumerationLimits::default();
        assert!(!exhaustive_safe_exists(&dims(1, 2, 1), &[T1, T2], &m, lim).unwrap());
        assert!(exhaustive_safe_exists(&dims(1, 2, 1), &[T1, T5], &m, lim).unwrap());
        assert!(exhaustive_safe_exists(&dims(2, 2, 2), &[T1, T5, T5], &m, lim).unwrap());
        assert!(exhaustive_safe_exists(&dims(1, 2, 1), &[T2, T3], &m, lim).unwrap());
        // T4 between T2 and T3 in a row of three is always adjacent to one.
        assert!(!exhaustive_safe_exists(&dims(1, 3, 1), &[T2, T3, T4], &m, lim).unwrap());
        // gravity: a single column cannot separate T4 from T2
        assert!(!exhaustive_safe_exists(&dims(1, 1, 2), &[T2, T4], &m, lim).unwrap());
        assert!(!exhaustive_safe_exists(&dims(1, 1, 1), &[T5, T5], &m, lim).unwrap());
    }

    #[test]
    fn exhaustive_refuses_large_instances() {
        let m = SeparationRuleMatrix::standard();
        let err = exhaustive_safe_exists(&dims(4, 4, 1), &[T1], &m, EnumerationLimits::default());
        assert!(matches!(err, Err(OracleError::TooLarge { cells: 16, .. })));
        assert!(exhaustive_safe_exists(&dims(4, 4, 1), &[T1], &m, EnumerationLimits::unbounded()).unwrap());
    }

    fn stacked() -> YardConfiguration {
        let mut cfg = YardConfiguration::new(dims(1, 3, 2));
        cfg.place(ContainerId(0), T2, Coordinate::new(0, 0, 0)).unwrap();
        cfg.place(ContainerId(1), T5, Coordinate::new(0, 0, 1)).unwrap();
        cfg
    }

    fn mv(seq: usize, id: u32, from: (usize, usize, usize), to: (usize, usize, usize)) -> MoveRecord {
        MoveRecord {
            seq,
            id: ContainerId(id),
            from: Coordinate::new(from.0, from.1, from.2),
            to: Coordinate::new(to.0, to.1, to.2),
            cause: MoveCause::Selected,
        }
    }

    #[test]
    fn verify_accepts_legal_trace() {
        let m = SeparationRuleMatrix::standard();
        let moves = [mv(1, 1, (0, 0, 1), (0, 1, 0)), mv(2, 0, (0, 0, 0), (0, 2, 0))];
        let claim = OutcomeClaim {
            status: RunStatus::Safe,
            movements: 2,
            final_worst: 0,
            final_sum: 0,
        };
        let r = verify_trace(&stacked(), &moves, Some(&claim), &m);
        assert!(r.passed(), "{r}");
        assert_eq!(r.checked["destination"], 2);
        assert_eq!(r.final_block, Some((0, 0)));
    }

    #[test]
    fn verify_flags_floating_destination() {
        let m = SeparationRuleMatrix::standard();
        let moves = [mv(1, 1, (0, 0, 1), (0, 1, 1))];
        let r = verify_trace(&stacked(), &moves, None, &m);
        assert!(!r.passed());
        assert_eq!(r.failures[0].location, Location::Move { index: 0, seq: 1 });
        assert!(r.failures[0].description.contains("floats"));
    }

    #[test]
    fn verify_flags_buried_source_and_wrong_source() {
        let m = SeparationRuleMatrix::standard();
        let r = verify_trace(&stacked(), &[mv(1, 0, (0, 0, 0), (0, 1, 0))], None, &m);
        assert!(r.failures[0].description.contains("buried"));
        let r = verify_trace(&stacked(), &[mv(1, 1, (0, 2, 0), (0, 1, 0))], None, &m);
        assert!(r.failures[0].description.contains("not"));
    }

    #[test]
    fn verify_flags_duplicated_seq() {
        let m = SeparationRuleMatrix::standard();
        let moves = [mv(1, 1, (0, 0, 1), (0, 1, 0)), mv(1, 0, (0, 0, 0), (0, 2, 0))];
        let r = verify_trace(&stacked(), &moves, None, &m);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].location, Location::Move { index: 1, seq: 1 });
    }

    #[test]
    fn verify_flags_false_claims() {
        let m = SeparationRuleMatrix::standard();
        let moves = [mv(1, 1, (0, 0, 1), (0, 1, 0))];
        let claim = OutcomeClaim {
            status: RunStatus::Safe,
            movements: 3,
            final_worst: 0,
            final_sum: 0,
        };
        let r = verify_trace(&stacked(), &moves, Some(&claim), &m);
        assert!(r.failures.iter().any(|f| f.description.contains("movements")));
    }

    #[test]
    fn audit_only_covers_stalled_runs() {
        let m = SeparationRuleMatrix::standard();
        let lim = EnumerationLimits::default();
        assert_eq!(
            audit_unsuccessful_run(&stacked(), RunStatus::Safe, &m, lim).unwrap(),
            None
        );
        let a = audit_unsuccessful_run(&stacked(), RunStatus::LocalMinimum, &m, lim)
            .unwrap()
            .unwrap();
        assert!(a.confirmed_failure());
    }
}
