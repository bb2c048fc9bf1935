//! Cognitive agent strategy: one container moves per round, chosen by
//! anticipated fitness gain.
//!
//! A round builds the candidate set from the worst weighted fitnesses, lets
//! each candidate search for its best place, keeps the candidates with the
//! highest utility (current fitness minus best reachable fitness), breaks
//! ties on the worst fitness seen in their neighbourhoods and finally at
//! random. The winner is unburied and moved.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    destinations_by_distance, finish, search_place_with, ElectionDiagnostic, MoveCause, MoveLog, PlaceChoice,
    RunDiagnostics, RunOutcome, RunStatus, StrategyError, StrategyParams,
};
use crate::rules::{Scorer, SeparationRuleMatrix, WeightedFitness};
use crate::yard::{ContainerId, Coordinate, YardConfiguration};

/// A configuration seen more often than this aborts the run.
const MAX_REPEATS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub id: ContainerId,
    pub weighted: WeightedFitness,
}

/// Agents with positive weighted fitness, worst first (ascending id on
/// ties), truncated to the candidate set size.
pub fn cabs_candidates(
    cfg: &YardConfiguration,
    m: &SeparationRuleMatrix,
    params: &StrategyParams,
) -> Result<Vec<Candidate>, StrategyError> {
    m.check_configuration(cfg)?;
    Ok(candidates_with(&Scorer::new(m, cfg.dims()), cfg, params))
}

fn candidates_with(scorer: &Scorer<'_>, cfg: &YardConfiguration, params: &StrategyParams) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = cfg
        .containers()
        .filter_map(|r| {
            let at = r.position?;
            let weighted = scorer.weighted(cfg, params.weighting, r.ctype, at, r.id);
            (!weighted.is_zero()).then_some(Candidate { id: r.id, weighted })
        })
        .collect();
    out.sort_by(|a, b| b.weighted.cmp(&a.weighted).then(a.id.cmp(&b.id)));
    out.truncate(params.candidate_set_size);
    out
}

/// A candidate together with its current fitness and place-search result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateEval {
    pub id: ContainerId,
    pub fitness: u32,
    pub place: Option<PlaceChoice>,
}

impl CandidateEval {
    pub fn evaluate(
        cfg: &YardConfiguration,
        m: &SeparationRuleMatrix,
        id: ContainerId,
        respect_tabu: bool,
    ) -> Result<Self, StrategyError> {
        m.check_configuration(cfg)?;
        Self::evaluate_with(&Scorer::new(m, cfg.dims()), cfg, id, respect_tabu)
    }

    fn evaluate_with(
        scorer: &Scorer<'_>,
        cfg: &YardConfiguration,
        id: ContainerId,
        respect_tabu: bool,
    ) -> Result<Self, StrategyError> {
        let record = cfg.get(id)?;
        let at = cfg.position(id)?;
        Ok(Self {
            id,
            fitness: scorer.fitness(cfg, record.ctype, at, id),
            place: search_place_with(scorer, cfg, id, respect_tabu)?,
        })
    }

    pub fn utility(&self) -> Option<i64> {
        self.place.map(|p| self.fitness as i64 - p.fitness as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Elected {
    pub id: ContainerId,
    pub place: PlaceChoice,
    pub utility: i64,
    pub neighbourhood_max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Election {
    Elected(Elected),
    /// No candidate can improve or hold its fitness.
    Stop,
}

/// Reduces the evaluated candidates to a single mover.
pub fn cabs_elect(
    candidates: &[CandidateEval],
    cfg: &YardConfiguration,
    m: &SeparationRuleMatrix,
    rng: &mut impl Rng,
) -> Result<Election, StrategyError> {
    elect_with(candidates, cfg, &Scorer::new(m, cfg.dims()), rng)
}

fn elect_with(
    candidates: &[CandidateEval],
    cfg: &YardConfiguration,
    scorer: &Scorer<'_>,
    rng: &mut impl Rng,
) -> Result<Election, StrategyError> {
    let Some(best_utility) = candidates.iter().filter_map(|c| c.utility()).max() else {
        return Ok(Election::Stop);
    };
    if best_utility < 0 {
        return Ok(Election::Stop);
    }
    let mut survivors: Vec<(CandidateEval, u32)> = Vec::new();
    for c in candidates.iter().filter(|c| c.utility() == Some(best_utility)) {
        let record = cfg.get(c.id)?;
        let at = cfg.position(c.id)?;
        let worst_neighbour = scorer
            .neighbourhood(cfg, record.ctype, at, c.id)
            .into_iter()
            .map(|n| {
                let r = cfg.get(n).expect("neighbour is registered");
                scorer.fitness(cfg, r.ctype, r.position.expect("neighbours are positioned"), n)
            })
            .max()
            .unwrap_or(0);
        survivors.push((*c, worst_neighbour));
    }
    let highest = survivors.iter().map(|(_, n)| *n).max().expect("non-empty");
    survivors.retain(|(_, n)| *n == highest);
    survivors.sort_by_key(|(c, _)| c.id);
    let pick = if survivors.len() > 1 {
        rng.random_range(0..survivors.len())
    } else {
        0
    };
    let (c, neighbourhood_max) = survivors[pick];
    Ok(Election::Elected(Elected {
        id: c.id,
        place: c.place.expect("utility implies a place"),
        utility: best_utility,
        neighbourhood_max,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExecuteReport {
    /// Where the elected container ended up, if it moved.
    pub final_place: Option<Coordinate>,
    pub stolen: bool,
    /// The movement budget ran out before the elected container moved.
    pub truncated: bool,
}

/// Unburies the elected container, highest first, then moves it. Dangerous
/// containers lifted off it take their best searched place, neutral ones the
/// nearest cell. If its chosen place was taken meanwhile, the elected
/// container searches again and takes the new best.
pub(crate) fn execute(
    log: &mut MoveLog<'_>,
    scorer: &Scorer<'_>,
    elected: &Elected,
    respect_tabu: bool,
    aspiration_moves: &mut Vec<usize>,
) -> Result<ExecuteReport, StrategyError> {
    let mut report = ExecuteReport::default();
    for above in log.cfg.containers_above(elected.id)? {
        let ctype = log.cfg.get(above)?.ctype;
        let (to, cause, aspiration) = if scorer.matrix().is_neutral(ctype) {
            let nearest = destinations_by_distance(log.cfg, above)?
                .into_iter()
                .next()
                .ok_or(StrategyError::ConfigurationFull(above))?;
            (nearest, MoveCause::NeutralRelocate, false)
        } else {
            let choice = search_place_with(scorer, log.cfg, above, respect_tabu)?
                .ok_or(StrategyError::ConfigurationFull(above))?;
            (choice.cell, MoveCause::Unbury, choice.aspiration)
        };
        let seq = log.next_seq();
        if !log.relocate(above, to, cause)? {
            report.truncated = true;
            return Ok(report);
        }
        if aspiration {
            aspiration_moves.push(seq);
        }
    }

    let mut target = elected.place.cell;
    let mut aspiration = elected.place.aspiration;
    if log.cfg.occupant(target).is_some() {
        report.stolen = true;
        let again = search_place_with(scorer, log.cfg, elected.id, respect_tabu)?
            .ok_or(StrategyError::ConfigurationFull(elected.id))?;
        target = again.cell;
        aspiration = again.aspiration;
    }
    let seq = log.next_seq();
    if !log.relocate(elected.id, target, MoveCause::Selected)? {
        report.truncated = true;
        return Ok(report);
    }
    if aspiration {
        aspiration_moves.push(seq);
    }
    report.final_place = Some(target);
    Ok(report)
}

/// Standalone form of the execution step: applies the moves to `cfg` and
/// returns them, numbered from 1.
pub fn cabs_execute(
    cfg: &mut YardConfiguration,
    m: &SeparationRuleMatrix,
    elected: &Elected,
    params: &StrategyParams,
) -> Result<(Vec<super::MoveRecord>, ExecuteReport), StrategyError> {
    m.check_configuration(cfg)?;
    let scorer = Scorer::new(m, cfg.dims());
    let mut log = MoveLog::new(cfg, params.movement_budget);
    let mut aspiration = Vec::new();
    let report = execute(&mut log, &scorer, elected, params.tabu_capacity > 0, &mut aspiration)?;
    Ok((log.trace, report))
}

pub fn run_cabs(
    cfg: &mut YardConfiguration,
    m: &SeparationRuleMatrix,
    params: &StrategyParams,
) -> Result<RunOutcome, StrategyError> {
    params.validate()?;
    m.check_configuration(cfg)?;
    cfg.set_tabu_capacity(params.tabu_capacity);
    let respect_tabu = params.tabu_capacity > 0;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let scorer = Scorer::new(m, cfg.dims());
    let mut diagnostics = RunDiagnostics::default();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    seen.insert(cfg.occupancy_hash(), 1);
    let mut log = MoveLog::new(cfg, params.movement_budget);
    let mut round = 0;

    let status = loop {
        let candidates = candidates_with(&scorer, log.cfg, params);
        if candidates.is_empty() {
            break RunStatus::Safe;
        }
        if log.exhausted() {
            break RunStatus::BudgetExhausted;
        }
        round += 1;
        let evals = candidates
            .iter()
            .map(|c| CandidateEval::evaluate_with(&scorer, log.cfg, c.id, respect_tabu))
            .collect::<Result<Vec<_>, _>>()?;
        let elected = match elect_with(&evals, log.cfg, &scorer, &mut rng)? {
            Election::Stop => break RunStatus::LocalMinimum,
            Election::Elected(e) => e,
        };
        let report = execute(
            &mut log,
            &scorer,
            &elected,
            respect_tabu,
            &mut diagnostics.aspiration_moves,
        )?;
        diagnostics.elections.push(ElectionDiagnostic {
            round,
            elected: elected.id,
            utility: elected.utility,
            neighbourhood_max: elected.neighbourhood_max,
            chosen: elected.place.cell,
            final_place: report.final_place,
            stolen: report.stolen,
        });
        if report.truncated {
            break RunStatus::BudgetExhausted;
        }
        let repeats = seen.entry(log.cfg.occupancy_hash()).or_insert(0);
        *repeats += 1;
        if *repeats > MAX_REPEATS {
            break RunStatus::CycleAbort;
        }
    };
    Ok(finish(log, m, status, diagnostics))
}
