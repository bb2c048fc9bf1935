//! Relocation strategies and the move traces they produce.
//!
//! Both strategies mutate a configuration in place and return a
//! [`RunOutcome`] whose trace replays the run move by move from the initial
//! configuration.

mod cabs;
mod schelling;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use cabs::{
    cabs_candidates, cabs_elect, cabs_execute, run_cabs, Candidate, CandidateEval, Elected, Election, ExecuteReport,
};
pub use schelling::run_schelling;

use crate::rules::{RuleError, Scorer, SeparationRuleMatrix, WeightedFitness, WeightingPolicy};
use crate::yard::{ContainerId, Coordinate, YardConfiguration, YardError, DEFAULT_TABU_CAPACITY};

pub const DEFAULT_SCHELLING_BUDGET: usize = 10_000;
pub const DEFAULT_CABS_BUDGET: usize = 1_000;
pub const DEFAULT_CANDIDATE_SET_SIZE: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("invalid strategy parameters: {0}")]
    InvalidParams(String),
    #[error("no placeable cell left for container {0}")]
    ConfigurationFull(ContainerId),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Yard(#[from] YardError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Schelling,
    Cabs,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Schelling => "schelling",
            Strategy::Cabs => "cabs",
        }
    }

    pub fn default_budget(&self) -> usize {
        match self {
            Strategy::Schelling => DEFAULT_SCHELLING_BUDGET,
            Strategy::Cabs => DEFAULT_CABS_BUDGET,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "schelling" => Ok(Strategy::Schelling),
            "cabs" => Ok(Strategy::Cabs),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    pub strategy: Strategy,
    pub movement_budget: usize,
    pub candidate_set_size: usize,
    /// Length of each container's vacated-cell memory; 0 disables it.
    pub tabu_capacity: usize,
    pub seed: u64,
    pub weighting: WeightingPolicy,
}

impl StrategyParams {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            movement_budget: strategy.default_budget(),
            candidate_set_size: DEFAULT_CANDIDATE_SET_SIZE,
            tabu_capacity: DEFAULT_TABU_CAPACITY,
            seed,
            weighting: WeightingPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        if self.movement_budget == 0 {
            return Err(StrategyError::InvalidParams(
                "movement budget must be at least 1".into(),
            ));
        }
        if self.candidate_set_size == 0 {
            return Err(StrategyError::InvalidParams(
                "candidate set size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveCause {
    /// The agent chosen by the strategy.
    Selected,
    /// A container lifted off a selected agent.
    Unbury,
    /// A neutral container lifted off a selected agent, sent to the nearest cell.
    NeutralRelocate,
}

impl MoveCause {
    pub fn name(&self) -> &'static str {
        match self {
            MoveCause::Selected => "selected",
            MoveCause::Unbury => "unbury",
            MoveCause::NeutralRelocate => "neutral_relocate",
        }
    }
}

impl fmt::Display for MoveCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MoveCause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "selected" => Ok(MoveCause::Selected),
            "unbury" => Ok(MoveCause::Unbury),
            "neutral_relocate" => Ok(MoveCause::NeutralRelocate),
            other => Err(format!("unknown move cause `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MoveRecord {
    /// 1-based position in the trace.
    pub seq: usize,
    pub id: ContainerId,
    pub from: Coordinate,
    pub to: Coordinate,
    pub cause: MoveCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Safe,
    BudgetExhausted,
    LocalMinimum,
    CycleAbort,
}

impl RunStatus {
    pub const ALL: [RunStatus; 4] = [
        RunStatus::Safe,
        RunStatus::BudgetExhausted,
        RunStatus::LocalMinimum,
        RunStatus::CycleAbort,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Safe => "safe",
            RunStatus::BudgetExhausted => "budget_exhausted",
            RunStatus::LocalMinimum => "local_minimum",
            RunStatus::CycleAbort => "cycle_abort",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RunStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RunStatus::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown run status `{s}`"))
    }
}

/// One Schelling tick: the maximum weighted fitness and who held it.
#[derive(Debug, Clone, PartialEq)]
pub struct TickDiagnostic {
    pub tick: usize,
    pub max_weighted: WeightedFitness,
    pub selected: Vec<ContainerId>,
}

/// One CABS round: who was elected and what happened to its chosen place.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectionDiagnostic {
    pub round: usize,
    pub elected: ContainerId,
    pub utility: i64,
    pub neighbourhood_max: u32,
    pub chosen: Coordinate,
    pub final_place: Option<Coordinate>,
    /// The chosen place was taken by a container lifted off the elected one.
    pub stolen: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunDiagnostics {
    pub ticks: Vec<TickDiagnostic>,
    pub elections: Vec<ElectionDiagnostic>,
    /// Sequence numbers of moves made with every candidate cell tabu.
    pub aspiration_moves: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub movements: usize,
    pub final_worst: u32,
    pub final_sum: u32,
    pub trace: Vec<MoveRecord>,
    pub diagnostics: RunDiagnostics,
}

/// Runs whichever strategy `params` names.
pub fn run(
    cfg: &mut YardConfiguration,
    m: &SeparationRuleMatrix,
    params: &StrategyParams,
) -> Result<RunOutcome, StrategyError> {
    match params.strategy {
        Strategy::Schelling => run_schelling(cfg, m, params),
        Strategy::Cabs => run_cabs(cfg, m, params),
    }
}

/// Best destination found by the nearest-first place search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaceChoice {
    pub cell: Coordinate,
    pub fitness: u32,
    /// Every destination was tabu, so the memory was ignored.
    pub aspiration: bool,
}

/// Destinations for `id` sorted by distance from its current cell, ties in
/// lexicographic order.
pub(crate) fn destinations_by_distance(
    cfg: &YardConfiguration,
    id: ContainerId,
) -> Result<Vec<Coordinate>, StrategyError> {
    let from = cfg.position(id)?;
    let dims = *cfg.dims();
    let mut keyed: Vec<(f64, Coordinate)> = cfg
        .destinations_for(id)?
        .into_iter()
        .map(|c| (crate::yard::distance_unchecked(&dims, from, c), c))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, c)| c).collect())
}

/// Scans destinations nearest-first and keeps the one with the lowest
/// hypothetical fitness (first found on ties), stopping early at zero.
///
/// With `respect_tabu`, cells in the container's tabu memory are skipped
/// unless that would leave nothing to choose from. Returns `None` only when
/// the container has no destination at all.
pub fn search_place(
    cfg: &YardConfiguration,
    m: &SeparationRuleMatrix,
    id: ContainerId,
    respect_tabu: bool,
) -> Result<Option<PlaceChoice>, StrategyError> {
    m.check_configuration(cfg)?;
    search_place_with(&Scorer::new(m, cfg.dims()), cfg, id, respect_tabu)
}

pub(crate) fn search_place_with(
    scorer: &Scorer<'_>,
    cfg: &YardConfiguration,
    id: ContainerId,
    respect_tabu: bool,
) -> Result<Option<PlaceChoice>, StrategyError> {
    let record = cfg.get(id)?;
    let ctype = record.ctype;
    let mut cells = destinations_by_distance(cfg, id)?;
    let mut aspiration = false;
    if respect_tabu && !record.tabu.is_empty() {
        let allowed: Vec<Coordinate> = cells.iter().copied().filter(|c| !record.tabu.contains(c)).collect();
        if allowed.is_empty() {
            aspiration = !cells.is_empty();
        } else {
            cells = allowed;
        }
    }
    let mut best: Option<PlaceChoice> = None;
    for cell in cells {
        let fitness = scorer.fitness(cfg, ctype, cell, id);
        if best.is_none_or(|b| fitness < b.fitness) {
            best = Some(PlaceChoice {
                cell,
                fitness,
                aspiration,
            });
        }
        if fitness == 0 {
            break;
        }
    }
    Ok(best)
}

/// Applies moves to a configuration while recording them and enforcing the
/// movement budget.
pub(crate) struct MoveLog<'a> {
    pub cfg: &'a mut YardConfiguration,
    pub trace: Vec<MoveRecord>,
    pub budget: usize,
}

impl<'a> MoveLog<'a> {
    pub fn new(cfg: &'a mut YardConfiguration, budget: usize) -> Self {
        Self {
            cfg,
            trace: Vec::new(),
            budget,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    /// Returns `false` without moving when the budget is already spent.
    pub fn relocate(&mut self, id: ContainerId, to: Coordinate, cause: MoveCause) -> Result<bool, StrategyError> {
        if self.exhausted() {
            return Ok(false);
        }
        let from = self.cfg.position(id)?;
        self.cfg.apply_move(id, to)?;
        self.trace.push(MoveRecord {
            seq: self.trace.len() + 1,
            id,
            from,
            to,
            cause,
        });
        Ok(true)
    }

    pub fn next_seq(&self) -> usize {
        self.trace.len() + 1
    }
}

pub(crate) fn finish(
    log: MoveLog<'_>,
    m: &SeparationRuleMatrix,
    mut status: RunStatus,
    diagnostics: RunDiagnostics,
) -> RunOutcome {
    let block = Scorer::new(m, log.cfg.dims()).block(log.cfg);
    if block.is_safe() {
        status = RunStatus::Safe;
    } else if status == RunStatus::Safe {
        status = RunStatus::BudgetExhausted;
    }
    RunOutcome {
        status,
        movements: log.trace.len(),
        final_worst: block.worst,
        final_sum: block.sum,
        trace: log.trace,
        diagnostics,
    }
}
