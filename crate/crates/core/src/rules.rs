//! Separation rules between container types and the fitness measures built
//! on them.
//!
//! Fitness counts violated rules, so lower is better and zero means the
//! container is safe where it stands. Scans are bounded to the box of cells
//! that can possibly interact with a container of a given type.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::yard::{
    distance_unchecked, ContainerId, ContainerType, Coordinate, YardConfiguration, YardDimensions, YardError,
};

/// Coefficient of the quantity-distance formula for explosives.
pub const EXPLOSIVE_COEFFICIENT: f64 = 4.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("explosive net weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("metric separation must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("type {0} is not declared in the rule matrix")]
    UnknownType(ContainerType),
    #[error("rules file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Yard(#[from] YardError),
}

/// Minimum separation between an explosive load of `q` kilograms (net) and
/// another container: `4.8 · q^(1/3)` meters.
pub fn explosive_separation(q: f64) -> Result<f64, RuleError> {
    if !(q.is_finite() && q > 0.0) {
        return Err(RuleError::NonPositiveWeight(q));
    }
    Ok(EXPLOSIVE_COEFFICIENT * q.cbrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SeparationRule {
    #[default]
    None,
    /// Centers must be at least `min_distance` meters apart.
    Metric { min_distance: f64 },
    /// The two containers must not be face-adjacent.
    VonNeumann,
    /// Metric rule whose distance follows from the explosive net weight.
    Explosive { net_weight_kg: f64 },
}

impl SeparationRule {
    pub fn metric(min_distance: f64) -> Result<Self, RuleError> {
        if !(min_distance.is_finite() && min_distance > 0.0) {
            return Err(RuleError::NonPositiveDistance(min_distance));
        }
        Ok(SeparationRule::Metric { min_distance })
    }

    pub fn explosive(net_weight_kg: f64) -> Result<Self, RuleError> {
        explosive_separation(net_weight_kg)?;
        Ok(SeparationRule::Explosive { net_weight_kg })
    }

    pub fn resolve(&self) -> ResolvedRule {
        match *self {
            SeparationRule::None => ResolvedRule::None,
            SeparationRule::Metric { min_distance } => ResolvedRule::Distance(min_distance),
            SeparationRule::VonNeumann => ResolvedRule::VonNeumann,
            SeparationRule::Explosive { net_weight_kg } => {
                ResolvedRule::Distance(explosive_separation(net_weight_kg).expect("validated on construction"))
            }
        }
    }
}

/// A rule reduced to what the geometry needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedRule {
    None,
    Distance(f64),
    VonNeumann,
}

const N: usize = ContainerType::COUNT;

/// Symmetric rule table over a declared set of container types.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationRuleMatrix {
    types: Vec<ContainerType>,
    declared: [bool; N],
    rules: [[SeparationRule; N]; N],
    resolved: [[ResolvedRule; N]; N],
    radius: [f64; N],
    has_vn: [bool; N],
}

impl SeparationRuleMatrix {
    /// Matrix over `types` with every pair unconstrained.
    pub fn new(types: impl IntoIterator<Item = ContainerType>) -> Self {
        let mut m = Self {
            types: Vec::new(),
            declared: [false; N],
            rules: [[SeparationRule::None; N]; N],
            resolved: [[ResolvedRule::None; N]; N],
            radius: [0.0; N],
            has_vn: [false; N],
        };
        for t in types {
            m.declare(t);
        }
        m
    }

    /// The five-type matrix used for the default experiments.
    ///
    /// | | T1 | T2 | T3 | T4 | T5 |
    /// |-|----|----|----|----|----|
    /// |T1| - | 20 m | 20 m | VN | - |
    /// |T2| 20 m | - | 6 m | VN | - |
    /// |T3| 20 m | 6 m | - | VN | - |
    /// |T4| VN | VN | VN | - | - |
    pub fn standard() -> Self {
        use ContainerType::*;
        let mut m = Self::new(ContainerType::SIMPLIFIED);
        let metric = |d| SeparationRule::metric(d).expect("positive");
        m.set_rule(T1, T2, metric(20.0)).unwrap();
        m.set_rule(T1, T3, metric(20.0)).unwrap();
        m.set_rule(T2, T3, metric(6.0)).unwrap();
        for t in [T1, T2, T3] {
            m.set_rule(t, T4, SeparationRule::VonNeumann).unwrap();
        }
        m
    }

    pub fn declare(&mut self, t: ContainerType) {
        if !self.declared[t.index()] {
            self.declared[t.index()] = true;
            self.types.push(t);
        }
    }

    pub fn types(&self) -> &[ContainerType] {
        &self.types
    }

    pub fn contains(&self, t: ContainerType) -> bool {
        self.declared[t.index()]
    }

    fn check(&self, t: ContainerType) -> Result<(), RuleError> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(RuleError::UnknownType(t))
        }
    }

    /// Sets the rule for both `(a, b)` and `(b, a)`.
    pub fn set_rule(&mut self, a: ContainerType, b: ContainerType, rule: SeparationRule) -> Result<(), RuleError> {
        self.check(a)?;
        self.check(b)?;
        let (i, j) = (a.index(), b.index());
        self.rules[i][j] = rule;
        self.rules[j][i] = rule;
        self.resolved[i][j] = rule.resolve();
        self.resolved[j][i] = rule.resolve();
        self.refresh_reach(i);
        self.refresh_reach(j);
        Ok(())
    }

    fn refresh_reach(&mut self, i: usize) {
        let mut radius = 0.0f64;
        let mut vn = false;
        for j in 0..N {
            match self.resolved[i][j] {
                ResolvedRule::Distance(d) => radius = radius.max(d),
                ResolvedRule::VonNeumann => vn = true,
                ResolvedRule::None => {}
            }
        }
        self.radius[i] = radius;
        self.has_vn[i] = vn;
    }

    pub fn rule(&self, a: ContainerType, b: ContainerType) -> Result<SeparationRule, RuleError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.rules[a.index()][b.index()])
    }

    pub(crate) fn resolved_unchecked(&self, a: ContainerType, b: ContainerType) -> ResolvedRule {
        self.resolved[a.index()][b.index()]
    }

    /// Largest metric separation involving `t`; zero when it has none.
    pub fn radius(&self, t: ContainerType) -> f64 {
        self.radius[t.index()]
    }

    pub fn has_von_neumann(&self, t: ContainerType) -> bool {
        self.has_vn[t.index()]
    }

    /// A neutral type has no rule against any other type.
    pub fn is_neutral(&self, t: ContainerType) -> bool {
        self.radius[t.index()] == 0.0 && !self.has_vn[t.index()]
    }

    /// Fails on the first container whose type the matrix does not declare.
    pub fn check_configuration(&self, cfg: &YardConfiguration) -> Result<(), RuleError> {
        cfg.containers().try_for_each(|r| self.check(r.ctype))
    }

    /// Parses the line-oriented rules format. Pairs without a `rule` line
    /// are unconstrained.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut m = Self::new([]);
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| RuleError::Parse { line: line_no, message };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let label = |s: &str| -> Result<ContainerType, RuleError> {
                s.parse().map_err(|e: crate::yard::UnknownTypeLabel| err(e.to_string()))
            };
            match fields.as_slice() {
                ["type", t] => m.declare(label(t)?),
                ["rule", a, b, rest @ ..] => {
                    let (a, b) = (label(a)?, label(b)?);
                    let number = |s: &str| -> Result<f64, RuleError> {
                        s.parse().map_err(|_| err(format!("cannot parse number `{s}`")))
                    };
                    let rule = match rest {
                        ["metric", d] => SeparationRule::metric(number(d)?),
                        ["explosive", q] => SeparationRule::explosive(number(q)?),
                        ["vn"] => Ok(SeparationRule::VonNeumann),
                        ["none"] => Ok(SeparationRule::None),
                        _ => return Err(err(format!("malformed rule `{line}`"))),
                    }
                    .map_err(|e| err(e.to_string()))?;
                    m.set_rule(a, b, rule).map_err(|e| err(e.to_string()))?;
                }
                _ => return Err(err(format!("unrecognised line `{line}`"))),
            }
        }
        Ok(m)
    }

    /// Renders the matrix in the rules file format.
    pub fn to_rules_text(&self) -> String {
        let mut out = String::new();
        for t in &self.types {
            out.push_str(&format!("type {t}\n"));
        }
        for (i, a) in self.types.iter().enumerate() {
            for b in &self.types[i..] {
                let line = match self.rules[a.index()][b.index()] {
                    SeparationRule::None => continue,
                    SeparationRule::Metric { min_distance } => format!("metric {min_distance}"),
                    SeparationRule::VonNeumann => "vn".to_string(),
                    SeparationRule::Explosive { net_weight_kg } => format!("explosive {net_weight_kg}"),
                };
                out.push_str(&format!("rule {a} {b} {line}\n"));
            }
        }
        out
    }
}

impl Default for SeparationRuleMatrix {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn resolved_distance(
    m: &SeparationRuleMatrix,
    a: ContainerType,
    b: ContainerType,
) -> Result<ResolvedRule, RuleError> {
    m.check(a)?;
    m.check(b)?;
    Ok(m.resolved_unchecked(a, b))
}

/// How fitness is scaled down by neighbourhood size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightingPolicy {
    /// Factor `1 / |neighbourhood|`, or 1 for an empty neighbourhood.
    #[default]
    InverseNeighbourhood,
    /// Factor 1.
    Uniform,
}

impl WeightingPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            WeightingPolicy::InverseNeighbourhood => "inverse_neighbourhood",
            WeightingPolicy::Uniform => "uniform",
        }
    }

    pub fn weigh(&self, fitness: u32, neighbourhood: usize) -> WeightedFitness {
        let divisor = match self {
            WeightingPolicy::InverseNeighbourhood => neighbourhood.max(1) as u32,
            WeightingPolicy::Uniform => 1,
        };
        WeightedFitness { fitness, divisor }
    }
}

impl fmt::Display for WeightingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inverse_neighbourhood" => Ok(WeightingPolicy::InverseNeighbourhood),
            "uniform" => Ok(WeightingPolicy::Uniform),
            other => Err(format!("unknown weighting policy `{other}`")),
        }
    }
}

/// Exact rational `fitness / divisor`, compared without rounding.
#[derive(Debug, Clone, Copy)]
pub struct WeightedFitness {
    pub fitness: u32,
    pub divisor: u32,
}

impl WeightedFitness {
    pub const ZERO: WeightedFitness = WeightedFitness { fitness: 0, divisor: 1 };

    pub fn value(&self) -> f64 {
        self.fitness as f64 / self.divisor as f64
    }

    pub fn is_zero(&self) -> bool {
        self.fitness == 0
    }
}

impl PartialEq for WeightedFitness {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for WeightedFitness {}

impl PartialOrd for WeightedFitness {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WeightedFitness {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.fitness as u64 * other.divisor as u64;
        let rhs = other.fitness as u64 * self.divisor as u64;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for WeightedFitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.fitness, self.divisor)
    }
}

/// Block-level well-being: worst container fitness and the sum over all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockFitness {
    pub worst: u32,
    pub sum: u32,
}

impl BlockFitness {
    pub fn is_safe(&self) -> bool {
        self.worst == 0
    }
}

/// Cell offset from a container, with its distance precomputed.
#[derive(Debug, Clone, Copy)]
struct Offset {
    distance: f64,
    in_radius: bool,
    von_neumann: bool,
}

/// A neighbouring column and the offsets reachable in it, indexed by the
/// absolute tier difference.
#[derive(Debug, Clone)]
struct ColumnReach {
    dx: isize,
    dy: isize,
    by_dz: Vec<Offset>,
}

/// Per-type lists of the columns that can interact with a container, for
/// one matrix and one block geometry. Built once per run so scans do no
/// square roots and never look above a stack.
pub(crate) struct Scorer<'a> {
    m: &'a SeparationRuleMatrix,
    dims: YardDimensions,
    reach: Vec<Vec<ColumnReach>>,
}

impl<'a> Scorer<'a> {
    pub(crate) fn new(m: &'a SeparationRuleMatrix, dims: &YardDimensions) -> Self {
        let reach = (0..N)
            .map(|i| {
                let t = ContainerType::from_index(i).expect("index in range");
                if m.declared[i] {
                    reach_columns(dims, m.radius(t), m.has_von_neumann(t))
                } else {
                    Vec::new()
                }
            })
            .collect();
        Self { m, dims: *dims, reach }
    }

    pub(crate) fn matrix(&self) -> &'a SeparationRuleMatrix {
        self.m
    }

    /// Whether the occupancy of cell `c` can affect the fitness or
    /// neighbourhood of a container of type `t` at `at`.
    pub(crate) fn touches(&self, t: ContainerType, at: Coordinate, c: Coordinate) -> bool {
        if at == c {
            return false;
        }
        let radius = self.m.radius(t);
        (radius > 0.0 && distance_unchecked(&self.dims, at, c) <= radius)
            || (self.m.has_von_neumann(t) && at.is_von_neumann_adjacent(&c))
    }

    /// Visits every occupied cell a container of type `t` at `at` can
    /// interact with, other than `at` itself and the container `skip`.
    fn for_each(
        &self,
        cfg: &YardConfiguration,
        t: ContainerType,
        at: Coordinate,
        skip: ContainerId,
        mut visit: impl FnMut(&Offset, ContainerId, ContainerType),
    ) {
        debug_assert_eq!(cfg.dims(), &self.dims);
        let d = &self.dims;
        for col in &self.reach[t.index()] {
            let (Some(x), Some(y)) = (at.x.checked_add_signed(col.dx), at.y.checked_add_signed(col.dy)) else {
                continue;
            };
            if x >= d.rows || y >= d.slots {
                continue;
            }
            let height = cfg.column_height(x, y);
            let span = col.by_dz.len() - 1;
            if height == 0 || at.z.saturating_sub(span) >= height {
                continue;
            }
            let own = col.dx == 0 && col.dy == 0;
            for z in at.z.saturating_sub(span)..=(at.z + span).min(height - 1) {
                if own && z == at.z {
                    continue;
                }
                if let Some((id, ot)) = cfg.occupant_unchecked(Coordinate::new(x, y, z)) {
                    if id != skip {
                        visit(&col.by_dz[z.abs_diff(at.z)], id, ot);
                    }
                }
            }
        }
    }

    fn violated(&self, t: ContainerType, ot: ContainerType, o: &Offset) -> bool {
        match self.m.resolved_unchecked(t, ot) {
            ResolvedRule::None => false,
            ResolvedRule::Distance(min) => o.distance < min,
            ResolvedRule::VonNeumann => o.von_neumann,
        }
    }

    /// Violated rules for a container of type `t` standing at `at`,
    /// ignoring the container `skip` (normally the one being evaluated).
    pub(crate) fn fitness(&self, cfg: &YardConfiguration, t: ContainerType, at: Coordinate, skip: ContainerId) -> u32 {
        let mut count = 0;
        self.for_each(cfg, t, at, skip, |o, _, ot| {
            if self.violated(t, ot, o) {
                count += 1;
            }
        });
        count
    }

    /// Containers within the type's rule radius, plus face-adjacent
    /// containers when the type has a Von Neumann rule. Ascending id order.
    pub(crate) fn neighbourhood(
        &self,
        cfg: &YardConfiguration,
        t: ContainerType,
        at: Coordinate,
        skip: ContainerId,
    ) -> Vec<ContainerId> {
        let mut out = Vec::new();
        self.for_each(cfg, t, at, skip, |o, id, _| {
            if o.in_radius || o.von_neumann {
                out.push(id);
            }
        });
        out.sort_unstable();
        out
    }

    pub(crate) fn weighted(
        &self,
        cfg: &YardConfiguration,
        policy: WeightingPolicy,
        t: ContainerType,
        at: Coordinate,
        id: ContainerId,
    ) -> WeightedFitness {
        let (mut fit, mut size) = (0, 0);
        self.for_each(cfg, t, at, id, |o, _, ot| {
            if o.in_radius || o.von_neumann {
                size += 1;
            }
            if self.violated(t, ot, o) {
                fit += 1;
            }
        });
        if fit == 0 {
            return WeightedFitness::ZERO;
        }
        policy.weigh(fit, size)
    }

    pub(crate) fn block(&self, cfg: &YardConfiguration) -> BlockFitness {
        let mut block = BlockFitness::default();
        for record in cfg.containers() {
            let Some(at) = record.position else { continue };
            let f = self.fitness(cfg, record.ctype, at, record.id);
            block.worst = block.worst.max(f);
            block.sum += f;
        }
        block
    }
}

/// Columns holding offsets within `radius`, plus the six face neighbours
/// when `vn` is set. Rules only bite closer than their distance, so nothing
/// outside can violate or belong to the neighbourhood.
fn reach_columns(dims: &YardDimensions, radius: f64, vn: bool) -> Vec<ColumnReach> {
    if radius == 0.0 && !vn {
        return Vec::new();
    }
    // One spare cell per axis guards against rounding in radius / pitch.
    let extent = |pitch: f64, count: usize| {
        ((radius / pitch).floor() as usize + 1)
            .max(usize::from(vn))
            .min(count - 1) as isize
    };
    let ex = extent(dims.row_pitch, dims.rows);
    let ey = extent(dims.slot_pitch, dims.slots);
    let ez = extent(dims.tier_pitch, dims.tiers) as usize;
    let origin = Coordinate::new(0, 0, 0);
    let mut out = Vec::new();
    for dx in -ex..=ex {
        for dy in -ey..=ey {
            let mut by_dz = Vec::new();
            for dz in 0..=ez {
                let c = Coordinate::new(dx.unsigned_abs(), dy.unsigned_abs(), dz);
                let distance = distance_unchecked(dims, origin, c);
                by_dz.push(Offset {
                    distance,
                    in_radius: radius > 0.0 && distance <= radius,
                    von_neumann: vn && origin.is_von_neumann_adjacent(&c),
                });
            }
            // Distance grows with the tier gap, so the reachable part of a
            // column is a prefix.
            while by_dz.last().is_some_and(|o| !(o.in_radius || o.von_neumann)) {
                by_dz.pop();
            }
            if !by_dz.is_empty() {
                out.push(ColumnReach { dx, dy, by_dz });
            }
        }
    }
    out
}

fn positioned(
    cfg: &YardConfiguration,
    m: &SeparationRuleMatrix,
    id: ContainerId,
) -> Result<(ContainerType, Coordinate), RuleError> {
    let record = cfg.get(id)?;
    m.check(record.ctype)?;
    let at = record.position.ok_or(YardError::NotPositioned(id))?;
    Ok((record.ctype, at))
}

pub fn neighbourhood(
    cfg: &YardConfiguration,
    m: &SeparationRuleMatrix,
    id: ContainerId,
) -> Result<Vec<ContainerId>, RuleError> {
    let (t, at) = positioned(cfg, m, id)?;
    Ok(Scorer::new(m, cfg.dims()).neighbourhood(cfg, t, at, id))
}

/// Number of separation rules `id` currently violates.
pub fn fitness(cfg: &YardConfiguration, m: &SeparationRuleMatrix, id: ContainerId) -> Result<u32, RuleError> {
    let (t, at) = positioned(cfg, m, id)?;
    m.check_configuration(cfg)?;
    Ok(Scorer::new(m, cfg.dims()).fitness(cfg, t, at, id))
}

pub fn weighted_fitness(
    cfg: &YardConfiguration,
    m: &SeparationRuleMatrix,
    policy: WeightingPolicy,
    id: ContainerId,
) -> Result<WeightedFitness, RuleError> {
    let (t, at) = positioned(cfg, m, id)?;
    m.check_configuration(cfg)?;
    Ok(Scorer::new(m, cfg.dims()).weighted(cfg, policy, t, at, id))
}

pub fn block_fitness(cfg: &YardConfiguration, m: &SeparationRuleMatrix) -> Result<BlockFitness, RuleError> {
    m.check_configuration(cfg)?;
    Ok(Scorer::new(m, cfg.dims()).block(cfg))
}

/// Fitness `id` would have at `to` with the rest of the block unchanged.
/// `to` may be the container's current cell.
pub fn hypothetical_fitness(
    cfg: &YardConfiguration,
    m: &SeparationRuleMatrix,
    id: ContainerId,
    to: Coordinate,
) -> Result<u32, RuleError> {
    let (t, at) = positioned(cfg, m, id)?;
    m.check_configuration(cfg)?;
    let dims = cfg.dims();
    dims.check(to)?;
    if to != at {
        if cfg.occupant(to).is_some() {
            return Err(YardError::OccupiedDestination(to).into());
        }
        if to.same_column(&at) || to.z != cfg.column_height(to.x, to.y) {
            return Err(YardError::UnsupportedDestination(to).into());
        }
    }
    Ok(Scorer::new(m, dims).fitness(cfg, t, to, id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yard::YardDimensions;
    use ContainerType::*;

    fn yard(r: usize, s: usize, t: usize, items: &[(u32, ContainerType, (usize, usize, usize))]) -> YardConfiguration {
        let mut cfg = YardConfiguration::new(YardDimensions::new(r, s, t).unwrap());
        let mut sorted = items.to_vec();
        sorted.sort_by_key(|(_, _, (_, _, z))| *z);
        for (id, ty, (x, y, z)) in sorted {
            cfg.place(ContainerId(id), ty, Coordinate::new(x, y, z)).unwrap();
        }
        cfg
    }

    #[test]
    fn explosive_formula() {
        assert_eq!(explosive_separation(1.0).unwrap(), 4.8);
        assert_eq!(explosive_separation(1000.0).unwrap(), 48.0);
        assert_eq!(explosive_separation(8000.0).unwrap(), 96.0);
        assert!(explosive_separation(0.0).is_err());
        assert!(explosive_separation(-3.0).is_err());
    }

    #[test]
    fn default_matrix_entries() {
        let m = SeparationRuleMatrix::standard();
        assert_eq!(resolved_distance(&m, T2, T1).unwrap(), ResolvedRule::Distance(20.0));
        assert_eq!(resolved_distance(&m, T2, T3).unwrap(), ResolvedRule::Distance(6.0));
        assert_eq!(resolved_distance(&m, T4, T1).unwrap(), ResolvedRule::VonNeumann);
        assert_eq!(resolved_distance(&m, T1, T1).unwrap(), ResolvedRule::None);
        assert!(matches!(
            resolved_distance(&m, Imdg(3), T1),
            Err(RuleError::UnknownType(Imdg(3)))
        ));
        for a in ContainerType::SIMPLIFIED {
            assert_eq!(m.rule(T5, a).unwrap(), SeparationRule::None);
            for b in ContainerType::SIMPLIFIED {
                assert_eq!(m.rule(a, b).unwrap(), m.rule(b, a).unwrap());
            }
        }
        assert!(m.is_neutral(T5));
        assert!(!m.is_neutral(T4));
        assert_eq!(m.radius(T1), 20.0);
        assert_eq!(m.radius(T4), 0.0);
    }

    #[test]
    fn explosive_rule_resolves_through_formula() {
        let mut m = SeparationRuleMatrix::new([Imdg(1), Imdg(3)]);
        m.set_rule(Imdg(1), Imdg(3), SeparationRule::explosive(1000.0).unwrap())
            .unwrap();
        assert_eq!(
            resolved_distance(&m, Imdg(3), Imdg(1)).unwrap(),
            ResolvedRule::Distance(48.0)
        );
        assert!(SeparationRule::explosive(0.0).is_err());
        assert!(SeparationRule::metric(-1.0).is_err());
    }

    #[test]
    fn rules_file_round_trip() {
        let m = SeparationRuleMatrix::standard();
        let text = m.to_rules_text();
        assert_eq!(SeparationRuleMatrix::parse(&text).unwrap(), m);

        let custom = "type IMDG1\ntype IMDG3\n# comment\nrule IMDG1 IMDG3 explosive 8000\n";
        let c = SeparationRuleMatrix::parse(custom).unwrap();
        assert_eq!(c.radius(Imdg(3)), 96.0);
        assert_eq!(c.rule(Imdg(1), Imdg(1)).unwrap(), SeparationRule::None);
    }

    #[test]
    fn rules_file_errors() {
        let e = SeparationRuleMatrix::parse("type T1\nrule T1 T2 metric 5\n").unwrap_err();
        assert!(matches!(e, RuleError::Parse { line: 2, .. }));
        let e = SeparationRuleMatrix::parse("type T1\ntype T2\nrule T1 T2 metric x\n").unwrap_err();
        assert!(matches!(e, RuleError::Parse { line: 3, .. }));
        let e = SeparationRuleMatrix::parse("type T1\nrule T1 T1 teleport\n").unwrap_err();
        assert!(matches!(e, RuleError::Parse { line: 2, .. }));
    }

    #[test]
    fn neighbourhood_examples() {
        let m = SeparationRuleMatrix::standard();
        let alone = yard(3, 3, 1, &[(0, T2, (0, 0, 0))]);
        assert!(neighbourhood(&alone, &m, ContainerId(0)).unwrap().is_empty());

        let pair = yard(3, 3, 1, &[(0, T2, (0, 0, 0)), (1, T5, (0, 1, 0))]);
        assert_eq!(neighbourhood(&pair, &m, ContainerId(0)).unwrap(), vec![ContainerId(1)]);
        // T5 has no rules, so its own neighbourhood is empty.
        assert!(neighbourhood(&pair, &m, ContainerId(1)).unwrap().is_empty());

        // 4 slots apart: 26 m > 20 m.
        let far = yard(1, 5, 1, &[(0, T1, (0, 0, 0)), (1, T2, (0, 4, 0))]);
        assert!(neighbourhood(&far, &m, ContainerId(0)).unwrap().is_empty());
        assert_eq!(fitness(&far, &m, ContainerId(0)).unwrap(), 0);
    }

    #[test]
    fn fitness_examples() {
        let m = SeparationRuleMatrix::standard();
        let cfg = yard(2, 2, 1, &[(0, T1, (0, 0, 0)), (1, T2, (0, 1, 0))]);
        assert_eq!(fitness(&cfg, &m, ContainerId(0)).unwrap(), 1);
        assert_eq!(fitness(&cfg, &m, ContainerId(1)).unwrap(), 1);

        let cfg = yard(2, 2, 1, &[(0, T2, (0, 0, 0)), (1, T3, (0, 1, 0))]);
        assert_eq!(fitness(&cfg, &m, ContainerId(0)).unwrap(), 0);
        assert_eq!(fitness(&cfg, &m, ContainerId(1)).unwrap(), 0);

        // rows are 4.5 m apart, below the 6 m rule
        let cfg = yard(2, 2, 1, &[(0, T2, (0, 0, 0)), (1, T3, (1, 0, 0))]);
        assert_eq!(fitness(&cfg, &m, ContainerId(0)).unwrap(), 1);

        // T5 stays at 0 whatever surrounds it
        let cfg = yard(1, 2, 2, &[(0, T5, (0, 0, 0)), (1, T1, (0, 0, 1)), (2, T4, (0, 1, 0))]);
        assert_eq!(fitness(&cfg, &m, ContainerId(0)).unwrap(), 0);
        // T4 under T1 and next to nothing dangerous besides it
        let cfg = yard(1, 2, 2, &[(0, T4, (0, 0, 0)), (1, T1, (0, 0, 1))]);
        assert_eq!(fitness(&cfg, &m, ContainerId(0)).unwrap(), 1);
    }

    #[test]
    fn fitness_rejects_types_missing_from_matrix() {
        let m = SeparationRuleMatrix::standard();
        let cfg = yard(1, 2, 1, &[(0, T1, (0, 0, 0)), (1, Imdg(2), (0, 1, 0))]);
        assert!(matches!(
            fitness(&cfg, &m, ContainerId(0)),
            Err(RuleError::UnknownType(_))
        ));
        assert!(matches!(fitness(&cfg, &m, ContainerId(7)), Err(RuleError::Yard(_))));
    }

    #[test]
    fn weighted_fitness_examples() {
        let m = SeparationRuleMatrix::standard();
        let p = WeightingPolicy::InverseNeighbourhood;
        // T4 at the centre with 4 VN neighbours, two of them dangerous.
        let cfg = yard(
            3,
            3,
            1,
            &[
                (0, T4, (1, 1, 0)),
                (1, T2, (0, 1, 0)),
                (2, T3, (2, 1, 0)),
                (3, T5, (1, 0, 0)),
                (4, T5, (1, 2, 0)),
            ],
        );
        let w = weighted_fitness(&cfg, &m, p, ContainerId(0)).unwrap();
        assert_eq!(w.fitness, 2);
        assert_eq!(w.divisor, 4);
        assert_eq!(w.value(), 0.5);
        assert_eq!(
            weighted_fitness(&cfg, &m, p, ContainerId(3)).unwrap(),
            WeightedFitness::ZERO
        );

        let pair = yard(1, 2, 1, &[(0, T4, (0, 0, 0)), (1, T1, (0, 1, 0))]);
        assert_eq!(weighted_fitness(&pair, &m, p, ContainerId(0)).unwrap().value(), 1.0);
        let uniform = weighted_fitness(&cfg, &m, WeightingPolicy::Uniform, ContainerId(0)).unwrap();
        assert_eq!(uniform.value(), 2.0);
    }

    #[test]
    fn weighted_fitness_ordering_is_exact() {
        let a = WeightedFitness { fitness: 1, divisor: 3 };
        let b = WeightedFitness { fitness: 2, divisor: 6 };
        let c = WeightedFitness { fitness: 2, divisor: 5 };
        assert_eq!(a, b);
        assert!(c > a);
        assert!(WeightedFitness::ZERO < a);
    }

    #[test]
    fn block_fitness_examples() {
        let m = SeparationRuleMatrix::standard();
        let empty = YardConfiguration::new(YardDimensions::new(3, 3, 2).unwrap());
        assert_eq!(block_fitness(&empty, &m).unwrap(), BlockFitness { worst: 0, sum: 0 });

        let pair = yard(2, 2, 1, &[(0, T1, (0, 0, 0)), (1, T2, (0, 1, 0))]);
        assert_eq!(block_fitness(&pair, &m).unwrap(), BlockFitness { worst: 1, sum: 2 });

        let neutral = yard(1, 2, 2, &[(0, T5, (0, 0, 0)), (1, T5, (0, 0, 1)), (2, T5, (0, 1, 0))]);
        assert!(block_fitness(&neutral, &m).unwrap().is_safe());
    }

    #[test]
    fn hypothetical_fitness_examples() {
        let m = SeparationRuleMatrix::standard();
        let cfg = yard(1, 8, 1, &[(0, T1, (0, 0, 0)), (1, T2, (0, 1, 0))]);
        // far end: 7 slots * 6.5 = 45.5 m from T1
        assert_eq!(
            hypothetical_fitness(&cfg, &m, ContainerId(1), Coordinate::new(0, 7, 0)).unwrap(),
            0
        );
        // 2 slots = 13 m, still inside 20 m
        assert_eq!(
            hypothetical_fitness(&cfg, &m, ContainerId(1), Coordinate::new(0, 2, 0)).unwrap(),
            1
        );
        // staying put equals current fitness
        assert_eq!(
            hypothetical_fitness(&cfg, &m, ContainerId(1), Coordinate::new(0, 1, 0)).unwrap(),
            fitness(&cfg, &m, ContainerId(1)).unwrap()
        );
        assert!(hypothetical_fitness(&cfg, &m, ContainerId(1), Coordinate::new(0, 0, 0)).is_err());
    }

    #[test]
    fn hypothetical_fitness_next_to_same_partner() {
        let m = SeparationRuleMatrix::standard();
        let cfg = yard(3, 3, 1, &[(0, T4, (1, 1, 0)), (1, T2, (1, 0, 0))]);
        assert_eq!(fitness(&cfg, &m, ContainerId(1)).unwrap(), 1);
        assert_eq!(
            hypothetical_fitness(&cfg, &m, ContainerId(1), Coordinate::new(0, 1, 0)).unwrap(),
            1
        );
        assert!(hypothetical_fitness(&cfg, &m, ContainerId(1), Coordinate::new(0, 1, 1)).is_err());
    }
}
