//! Seeded instance generators for tests, acceptance runs and benchmarks.

use std::collections::BTreeSet;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::model::{Edge, IsingModel, Spin};
use crate::reduction::MisInstance;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Uniform points in `[0, side]²` at pairwise distance at least
/// `min_gap`, long-range couplings and fields uniform in `[−h_max, h_max]`.
pub fn random_planar_model(rng: &mut ChaCha8Rng, n: usize, side: f64, min_gap: f64, alpha: f64, c: f64, h_max: f64) -> IsingModel {
    let mut pos: Vec<[f64; 2]> = Vec::with_capacity(n);
    while pos.len() < n {
        let p = [rng.random_range(0.0..side), rng.random_range(0.0..side)];
        if pos.iter().all(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() >= min_gap) {
            pos.push(p);
        }
    }
    let fields: Vec<f64> = (0..n).map(|_| uniform(rng, h_max)).collect();
    IsingModel::long_range(alpha, c, &pos, &fields).expect("distinct finite positions")
}

/// Spins at `0, 1, …, n−1` on the x axis with fields uniform in `[−1, 1]`.
pub fn random_chain(rng: &mut ChaCha8Rng, n: usize, alpha: f64, c: f64) -> IsingModel {
    let pos: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, 0.0]).collect();
    let fields: Vec<f64> = (0..n).map(|_| uniform(rng, 1.0)).collect();
    IsingModel::long_range(alpha, c, &pos, &fields).expect("distinct finite positions")
}

/// Couplings on every pair with `|i − j| <= band`, all weights uniform in
/// `[−1, 1]`.
pub fn random_banded(rng: &mut ChaCha8Rng, n: usize, band: usize) -> IsingModel {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n.min(i + band + 1) {
            edges.push(Edge::new(i, j, uniform(rng, 1.0)));
        }
    }
    explicit(rng, n, edges)
}

/// Random recursive tree: vertex `i` hangs off a uniform earlier vertex.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> IsingModel {
    let edges = (1..n).map(|i| Edge::new(rng.random_range(0..i), i, uniform(rng, 1.0))).collect();
    explicit(rng, n, edges)
}

fn explicit(rng: &mut ChaCha8Rng, n: usize, edges: Vec<Edge>) -> IsingModel {
    let spins = (0..n).map(|_| Spin::unplaced(uniform(rng, 1.0))).collect();
    IsingModel::explicit(spins, edges).expect("edges are in range")
}

fn uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width == 0.0 { 0.0 } else { rng.random_range(-half_width..=half_width) }
}

/// Honeycomb site: cell `(i, j)`, sublattice `false` = A, `true` = B.
type Site = (i64, i64, bool);

fn site_position((i, j, b): Site) -> [f64; 2] {
    let (i, j) = (i as f64, j as f64);
    [SQRT3 * i + SQRT3 / 2.0 * j, 1.5 * j + if b { 1.0 } else { 0.0 }]
}

fn site_neighbours((i, j, b): Site) -> [Site; 3] {
    if b {
        [(i, j, false), (i - 1, j + 1, false), (i, j + 1, false)]
    } else {
        [(i, j, true), (i + 1, j - 1, true), (i, j - 1, true)]
    }
}

/// Connected subgraph of the unit honeycomb lattice grown one uniformly
/// chosen frontier site at a time. Planar, unit edges, degree at most 3.
pub fn random_honeycomb(rng: &mut ChaCha8Rng, n: usize) -> MisInstance {
    let mut chosen: Vec<Site> = Vec::with_capacity(n);
    let mut frontier: BTreeSet<Site> = BTreeSet::new();
    if n > 0 {
        frontier.insert((0, 0, false));
    }
    while chosen.len() < n {
        let pick = *frontier.iter().nth(rng.random_range(0..frontier.len())).expect("frontier is never empty");
        frontier.remove(&pick);
        chosen.push(pick);
        for nb in site_neighbours(pick) {
            if !chosen.contains(&nb) {
                frontier.insert(nb);
            }
        }
    }
    MisInstance::new(chosen.into_iter().map(site_position).collect()).expect("lattice sites are distinct")
}

pub fn path3() -> MisInstance {
    MisInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).expect("distinct")
}

/// Two adjacent centres with two leaves each, as a honeycomb fragment.
/// The leaves form the unique maximum independent set, yet one centre plus
/// the far leaves ties it in nearest-neighbour energy.
pub fn double_star() -> MisInstance {
    MisInstance::new(vec![
        [0.0, 0.0],
        [1.0, 0.0],
        [-0.5, SQRT3 / 2.0],
        [-0.5, -SQRT3 / 2.0],
        [1.5, SQRT3 / 2.0],
        [1.5, -SQRT3 / 2.0],
    ])
    .expect("distinct")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{maximum_independent_set_size, validate_mis_instance};
    use rand::SeedableRng;

    #[test]
    fn honeycomb_instances_are_valid_and_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=12 {
            let inst = random_honeycomb(&mut rng, n);
            assert_eq!(inst.len(), n);
            assert!(validate_mis_instance(&inst).is_ok());
            assert!(inst.edges().len() >= n - 1);
        }
    }

    #[test]
    fn double_star_shape() {
        let d = double_star();
        assert!(validate_mis_instance(&d).is_ok());
        assert_eq!(d.edges().len(), 5);
        assert_eq!((d.degree(0), d.degree(1)), (3, 3));
        assert_eq!(maximum_independent_set_size(&d), 4);
    }

    #[test]
    fn generators_are_seeded() {
        let a = random_planar_model(&mut ChaCha8Rng::seed_from_u64(1), 5, 4.0, 0.3, 2.0, -1.0, 1.0);
        let b = random_planar_model(&mut ChaCha8Rng::seed_from_u64(1), 5, 4.0, 0.3, 2.0, -1.0, 1.0);
        assert_eq!(a, b);
        assert!(a.min_distance().unwrap() >= 0.3);
        assert_eq!(random_tree(&mut ChaCha8Rng::seed_from_u64(2), 9).edges().unwrap().len(), 8);
        assert_eq!(random_banded(&mut ChaCha8Rng::seed_from_u64(2), 6, 2).edges().unwrap().len(), 9);
        assert!(random_chain(&mut ChaCha8Rng::seed_from_u64(3), 7, 2.0, -1.0).integer_positions().is_some());
    }
}
