use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    finish, MoveCause, MoveLog, RunDiagnostics, RunOutcome, RunStatus, StrategyError, StrategyParams, TickDiagnostic,
};
use crate::rules::{Scorer, SeparationRuleMatrix, WeightedFitness, WeightingPolicy};
use crate::yard::{ContainerId, ContainerType, Coordinate, YardConfiguration};

fn random_destination(
    cfg: &YardConfiguration,
    id: ContainerId,
    rng: &mut ChaCha8Rng,
) -> Result<Coordinate, StrategyError> {
    let cells = cfg.destinations_for(id)?;
    if cells.is_empty() {
        return Err(StrategyError::ConfigurationFull(id));
    }
    Ok(cells[rng.random_range(0..cells.len())])
}

/// Weighted fitness of every positioned agent in ascending id order,
/// refreshed only where a move can have changed it.
struct WeightCache {
    policy: WeightingPolicy,
    entries: Vec<(ContainerId, ContainerType, Coordinate, WeightedFitness)>,
}

impl WeightCache {
    fn new(scorer: &Scorer<'_>, cfg: &YardConfiguration, policy: WeightingPolicy) -> Self {
        let entries = cfg
            .containers()
            .filter_map(|r| {
                let at = r.position?;
                Some((r.id, r.ctype, at, scorer.weighted(cfg, policy, r.ctype, at, r.id)))
            })
            .collect();
        Self { policy, entries }
    }

    fn max(&self) -> WeightedFitness {
        self.entries.iter().map(|e| e.3).max().unwrap_or(WeightedFitness::ZERO)
    }

    fn holding(&self, w: WeightedFitness) -> Vec<ContainerId> {
        self.entries.iter().filter(|e| e.3 == w).map(|e| e.0).collect()
    }

    fn moved(
        &mut self,
        scorer: &Scorer<'_>,
        cfg: &YardConfiguration,
        mover: ContainerId,
        from: Coordinate,
        to: Coordinate,
    ) {
        for (id, t, at, w) in &mut self.entries {
            if *id == mover {
                *at = to;
            } else if !(scorer.touches(*t, *at, from) || scorer.touches(*t, *at, to)) {
                continue;
            }
            *w = scorer.weighted(cfg, self.policy, *t, *at, *id);
        }
    }
}

/// Reactive relocation: every tick, all agents sharing the block's maximum
/// weighted fitness move to random placeable cells, in ascending id order.
/// Containers stacked on a selected agent are moved first, highest first,
/// also to random cells.
pub fn run_schelling(
    cfg: &mut YardConfiguration,
    m: &SeparationRuleMatrix,
    params: &StrategyParams,
) -> Result<RunOutcome, StrategyError> {
    params.validate()?;
    m.check_configuration(cfg)?;
    cfg.set_tabu_capacity(params.tabu_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let scorer = Scorer::new(m, cfg.dims());
    let mut diagnostics = RunDiagnostics::default();
    let mut log = MoveLog::new(cfg, params.movement_budget);
    let mut tick = 0;

    let mut cache = WeightCache::new(&scorer, log.cfg, params.weighting);

    let status = 'ticks: loop {
        let max = cache.max();
        if max.is_zero() {
            break RunStatus::Safe;
        }
        if log.exhausted() {
            break RunStatus::BudgetExhausted;
        }
        tick += 1;
        let selected = cache.holding(max);
        diagnostics.ticks.push(TickDiagnostic {
            tick,
            max_weighted: max,
            selected: selected.clone(),
        });

        for id in selected {
            for above in log.cfg.containers_above(id)? {
                let to = random_destination(log.cfg, above, &mut rng)?;
                let from = log.cfg.position(above)?;
                if !log.relocate(above, to, MoveCause::Unbury)? {
                    break 'ticks RunStatus::BudgetExhausted;
                }
                cache.moved(&scorer, log.cfg, above, from, to);
            }
            let to = random_destination(log.cfg, id, &mut rng)?;
            let from = log.cfg.position(id)?;
            if !log.relocate(id, to, MoveCause::Selected)? {
                break 'ticks RunStatus::BudgetExhausted;
            }
            cache.moved(&scorer, log.cfg, id, from, to);
        }
    };
    Ok(finish(log, m, status, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::block_fitness;
    use crate::strategy::Strategy;
    use crate::yard::{ContainerType::*, YardDimensions};

    #[test]
    fn already_safe_input_needs_no_moves() {
        let m = SeparationRuleMatrix::standard();
        let mut cfg = YardConfiguration::new(YardDimensions::new(3, 3, 2).unwrap());
        cfg.place(ContainerId(0), T1, Coordinate::new(0, 0, 0)).unwrap();
        cfg.place(ContainerId(1), T5, Coordinate::new(0, 1, 0)).unwrap();
        let before = cfg.clone();
        let out = run_schelling(&mut cfg, &m, &StrategyParams::new(Strategy::Schelling, 3)).unwrap();
        assert_eq!(out.status, RunStatus::Safe);
        assert_eq!(out.movements, 0);
        assert_eq!(cfg, before);
    }

    #[test]
    fn adjacent_t1_t2_separate_on_open_yard() {
        let m = SeparationRuleMatrix::standard();
        for seed in 0..20 {
            let mut cfg = YardConfiguration::new(YardDimensions::new(10, 10, 1).unwrap());
            cfg.place(ContainerId(0), T1, Coordinate::new(4, 4, 0)).unwrap();
            cfg.place(ContainerId(1), T2, Coordinate::new(4, 5, 0)).unwrap();
            let out = run_schelling(&mut cfg, &m, &StrategyParams::new(Strategy::Schelling, seed)).unwrap();
            assert_eq!(out.status, RunStatus::Safe, "seed {seed}");
            assert!(out.movements >= 1);
            assert!(block_fitness(&cfg, &m).unwrap().is_safe());
        }
    }

    #[test]
    fn selected_agents_held_the_tick_maximum() {
        let m = SeparationRuleMatrix::standard();
        let mut cfg = YardConfiguration::new(YardDimensions::new(4, 4, 2).unwrap());
        let types = [T1, T2, T3, T4, T4, T2, T5, T3];
        for (i, t) in types.iter().enumerate() {
            cfg.place(ContainerId(i as u32), *t, Coordinate::new(i / 4, i % 4, 0))
                .unwrap();
        }
        let out = run_schelling(&mut cfg, &m, &StrategyParams::new(Strategy::Schelling, 11)).unwrap();
        let mut selected_seen = 0;
        for d in &out.diagnostics.ticks {
            assert!(!d.max_weighted.is_zero());
            assert!(!d.selected.is_empty());
        }
        let all_selected: Vec<ContainerId> = out.diagnostics.ticks.iter().flat_map(|d| d.selected.clone()).collect();
        for rec in out.trace.iter().filter(|r| r.cause == MoveCause::Selected) {
            assert_eq!(rec.id, all_selected[selected_seen]);
            selected_seen += 1;
        }
    }

    #[test]
    fn budget_stops_the_run() {
        let m = SeparationRuleMatrix::standard();
        // T1 and T2 can never be 20 m apart in a 1x3 yard.
        let mut cfg = YardConfiguration::new(YardDimensions::new(1, 3, 1).unwrap());
        cfg.place(ContainerId(0), T1, Coordinate::new(0, 0, 0)).unwrap();
        cfg.place(ContainerId(1), T2, Coordinate::new(0, 1, 0)).unwrap();
        let mut p = StrategyParams::new(Strategy::Schelling, 5);
        p.movement_budget = 17;
        let out = run_schelling(&mut cfg, &m, &p).unwrap();
        assert_eq!(out.status, RunStatus::BudgetExhausted);
        assert_eq!(out.movements, 17);
        assert_eq!(out.trace.len(), 17);
        assert_eq!(out.final_worst, 1);
    }

    #[test]
    fn full_yard_reports_no_room() {
        let m = SeparationRuleMatrix::standard();
        let mut cfg = YardConfiguration::new(YardDimensions::new(1, 2, 1).unwrap());
        cfg.place(ContainerId(0), T1, Coordinate::new(0, 0, 0)).unwrap();
        cfg.place(ContainerId(1), T2, Coordinate::new(0, 1, 0)).unwrap();
        let err = run_schelling(&mut cfg, &m, &StrategyParams::new(Strategy::Schelling, 0)).unwrap_err();
        assert_eq!(err, StrategyError::ConfigurationFull(ContainerId(0)));
    }
}
