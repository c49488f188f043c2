use effcond::conductivity::{asymptotic, lambda11, AsymptoticFormula};
use effcond::eisenstein::FOUR_PI_OVER_THREE;
use effcond::geometry::radius_for;
use effcond::lattice_sums::coulombic_table;
use effcond::{Contrast, EisensteinEvaluator, SphereConfiguration, StructuralSums};

#[test]
fn single_sphere_cell_reduces_to_the_cubic_series() {
    let eval = EisensteinEvaluator::new(coulombic_table(60).unwrap(), 8).unwrap();
    let config = SphereConfiguration::new(vec![[0.0; 3]], radius_for(1, 0.3)).unwrap();
    let sums = StructuralSums::compute(&config, &eval);
    assert_eq!(sums.e11(), FOUR_PI_OVER_THREE);
    assert_eq!(sums.conv_labels(1, 1, 1, 1), FOUR_PI_OVER_THREE * FOUR_PI_OVER_THREE);
    assert_eq!(sums.conv_labels(1, 2, 1, 2), 0.0);
    assert_eq!(sums.conv_labels(1, 3, 1, 3), 0.0);
    let mut worst: f64 = 0.0;
    for f in [0.05, 0.1, 0.2] {
        let lambda = lambda11(&sums, f);
        let series = 1.0 + 3.0 * f + 3.0 * f * f + 3.0 * f.powi(3);
        assert!((lambda - series).abs() < 1e-12);
        let mg = asymptotic(AsymptoticFormula::ClausiusMossotti, f, Contrast::PerfectlyConducting).unwrap();
        // The omitted tail is 3 f^4 / (1 - f).
        worst = worst.max((lambda - mg).abs() / (3.0 * f.powi(4)));
    }
    assert!(worst <= 1.3, "{worst}");
}
