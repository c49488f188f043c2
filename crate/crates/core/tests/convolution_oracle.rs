use effcond::eisenstein::Component;
use effcond::geometry::{minimum_image, SphereConfiguration};
use effcond::lattice_sums::coulombic_table;
use effcond::structural_sums::{convolution_sum, required_convolutions};
use effcond::EisensteinEvaluator;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive(config: &SphereConfiguration, eval: &EisensteinEvaluator, ij: Component, pl: Component) -> f64 {
    let a = config.centers();
    let n = a.len();
    let mut total = 0.0;
    for k in 0..n {
        for m in 0..n {
            let left = eval.component_or_origin(ij, minimum_image(a[k], a[m]).0);
            for s in 0..n {
                total += left * eval.component_or_origin(pl, minimum_image(a[m], a[s]).0);
            }
        }
    }
    total / (n * n * n) as f64
}

#[test]
fn factorised_convolutions_equal_the_triple_loop() {
    let eval = EisensteinEvaluator::new(coulombic_table(40).unwrap(), 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let n = rng.random_range(1..=12);
        let centers = (0..n)
            .map(|_| std::array::from_fn(|_| rng.random::<f64>() - 0.5))
            .collect();
        let Ok(config) = SphereConfiguration::new(centers, 0.01) else {
            continue;
        };
        let pairs = required_convolutions();
        let (ij, pl) = pairs[rng.random_range(0..pairs.len())];
        let fast = convolution_sum(&config, &eval, ij, pl);
        let slow = naive(&config, &eval, ij, pl);
        assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "{fast} vs {slow}");
    }
}
