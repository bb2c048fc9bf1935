#![allow(dead_code)]

use hazyard::yard::{ContainerId, ContainerType, Coordinate, YardConfiguration, YardDimensions};
use hazyard::SeparationRuleMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TYPES: [ContainerType; 5] = [
    ContainerType::T1,
    ContainerType::T2,
    ContainerType::T3,
    ContainerType::T4,
    ContainerType::T5,
];

/// Gravity-valid configuration with `n` containers of uniformly random type.
pub fn random_config(dims: YardDimensions, n: usize, seed: u64) -> YardConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = YardConfiguration::new(dims);
    for i in 0..n.min(dims.capacity()) {
        let cells = cfg.placeable_cells();
        let c = cells[rng.random_range(0..cells.len())];
        let t = TYPES[rng.random_range(0..TYPES.len())];
        cfg.place(ContainerId(i as u32), t, c).unwrap();
    }
    cfg
}

pub fn build(dims: (usize, usize, usize), items: &[(u32, ContainerType, (usize, usize, usize))]) -> YardConfiguration {
    let mut sorted = items.to_vec();
    sorted.sort_by_key(|(_, _, (x, y, z))| (*z, *x, *y));
    let mut cfg = YardConfiguration::new(YardDimensions::new(dims.0, dims.1, dims.2).unwrap());
    for (id, t, (x, y, z)) in sorted {
        cfg.place(ContainerId(id), t, Coordinate::new(x, y, z)).unwrap();
    }
    cfg
}

pub fn matrix() -> SeparationRuleMatrix {
    SeparationRuleMatrix::standard()
}

/// CABS stops immediately: every candidate's best move makes it worse and
/// the block is too short for the 20 m rule anyway.
pub fn stuck_without_solution() -> YardConfiguration {
    use ContainerType::*;
    build((1, 4, 1), &[(0, T2, (0, 1, 0)), (1, T4, (0, 3, 0)), (2, T1, (0, 0, 0))])
}

/// CABS reaches a local minimum although a safe arrangement exists.
pub fn stuck_with_solution() -> YardConfiguration {
    use ContainerType::*;
    build(
        (2, 5, 1),
        &[
            (0, T1, (0, 3, 0)),
            (1, T4, (0, 1, 0)),
            (2, T3, (0, 2, 0)),
            (3, T3, (1, 1, 0)),
            (4, T4, (0, 4, 0)),
        ],
    )
}
