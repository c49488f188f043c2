use effcond::eisenstein::{eisenstein_oracle, singular_part};
use effcond::lattice_sums::coulombic_table;
use effcond::{Axis, Component, EisensteinEvaluator};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const E11: Component = Component::new(Axis::X1, Axis::X1);
const E12: Component = Component::new(Axis::X1, Axis::X2);
const E21: Component = Component::new(Axis::X2, Axis::X1);

fn evaluator() -> EisensteinEvaluator {
    EisensteinEvaluator::new(coulombic_table(250).unwrap(), 8).unwrap()
}

/// Uniform points in the ball of the given radius, away from the origin.
fn points(seed: u64, count: usize, radius: f64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-radius..radius));
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r <= radius && r > 0.05 {
            out.push(p);
        }
    }
    out
}

#[test]
fn off_diagonal_kernels_are_symmetric() {
    let eval = evaluator();
    for x in points(1, 100, 0.45) {
        let a = eval.component(E12, x).unwrap();
        let b = eval.component(E21, x).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{x:?}");
    }
}

#[test]
fn truncated_kernels_match_the_direct_lattice_series() {
    let eval = evaluator();
    for x in points(2, 12, 0.35) {
        for c in [E11, E12] {
            let oracle = eisenstein_oracle(c, x, 100).unwrap();
            let truncated = eval.component(c, x).unwrap();
            assert!(
                (truncated - oracle).abs() <= 1e-2 * oracle.abs().max(1.0),
                "{c} at {x:?}: {truncated} vs {oracle}"
            );
        }
    }
}

#[test]
fn singular_part_dominates_near_the_origin() {
    let eval = evaluator();
    let x = [0.01, 0.004, -0.003];
    let ratio = eval.component(E11, x).unwrap() / singular_part(E11, x);
    assert!((ratio - 1.0).abs() < 1e-4);
}
