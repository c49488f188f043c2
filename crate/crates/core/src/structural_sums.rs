//! Structural sums of a configuration.
//!
//! ```text
//! e_pq       = N^-2 sum_{k,m}   E_pq(a_k - a_m)
//! e_{ij*pl}  = N^-3 sum_{k,m,s} E_ij(a_k - a_m) E_pl(a_m - a_s)
//! ```
//!
//! Differences are minimum-image reduced and diagonal terms use the origin
//! conventions of [`Component::origin_value`]. Convolutions factor through
//! per-sphere row sums, so every sum here costs `O(N^2)` kernel calls.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::eisenstein::{Axis, Component, EisensteinEvaluator};
use crate::geometry::{minimum_image, SphereConfiguration};
use crate::summation::CompensatedSum;

/// Row sums for every sphere `m` and all nine components.
///
/// `incoming[m][c] = sum_k E_c(a_k - a_m)` and `outgoing[m][c] = sum_s E_c(a_m - a_s)`.
#[derive(Debug, Clone)]
pub struct RowSums {
    pub incoming: Vec<[f64; 9]>,
    pub outgoing: Vec<[f64; 9]>,
}

impl RowSums {
    pub fn compute(config: &SphereConfiguration, eval: &EisensteinEvaluator) -> Self {
        let centers = config.centers();
        let rows: Vec<([f64; 9], [f64; 9])> = centers
            .par_iter()
            .map(|&am| {
                let mut inc = [CompensatedSum::new(); 9];
                let mut out = [CompensatedSum::new(); 9];
                for &at in centers {
                    let d = minimum_image(at, am);
                    let values = eval.all_components(d.0);
                    for (acc, v) in inc.iter_mut().zip(values) {
                        acc.add(v);
                    }
                    // The kernels are even, so E(a_m - a_t) = E(a_t - a_m) unless a
                    // component sits on the half-open boundary and wraps differently.
                    let back = if d.0.contains(&-0.5) {
                        eval.all_components(minimum_image(am, at).0)
                    } else {
                        values
                    };
                    for (acc, v) in out.iter_mut().zip(back) {
                        acc.add(v);
                    }
                }
                (inc.map(|a| a.value()), out.map(|a| a.value()))
            })
            .collect();
        let (incoming, outgoing) = rows.into_iter().unzip();
        Self { incoming, outgoing }
    }

    pub fn len(&self) -> usize {
        self.incoming.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incoming.is_empty()
    }

    /// `e_c`.
    pub fn pair_sum(&self, c: Component) -> f64 {
        let n = self.len() as f64;
        let mut acc = CompensatedSum::new();
        acc.extend(self.incoming.iter().map(|row| row[c.slot()]));
        acc.value() / (n * n)
    }

    /// `e_{ij*pl}`.
    pub fn convolution(&self, ij: Component, pl: Component) -> f64 {
        let n = self.len() as f64;
        let mut acc = CompensatedSum::new();
        acc.extend(
            self.incoming
                .iter()
                .zip(&self.outgoing)
                .map(|(l, r)| l[ij.slot()] * r[pl.slot()]),
        );
        acc.value() / (n * n * n)
    }
}

fn c(p: usize, q: usize) -> Component {
    Component::from_labels(p, q).expect("labels in 1..=3")
}

/// Convolution pairs consumed by the `lambda11`, `lambda12` and `lambda13` formulas.
pub fn required_convolutions() -> [(Component, Component); 9] {
    [
        (c(1, 1), c(1, 1)),
        (c(1, 2), c(1, 2)),
        (c(1, 3), c(1, 3)),
        (c(1, 2), c(1, 1)),
        (c(1, 2), c(2, 2)),
        (c(2, 3), c(1, 3)),
        (c(1, 3), c(1, 1)),
        (c(1, 3), c(3, 3)),
        (c(3, 2), c(1, 2)),
    ]
}

/// All structural sums consumed downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralSums {
    pub n: usize,
    /// `e_pq` for all nine components in row-major order.
    pub pair: [f64; 9],
    pub conv: BTreeMap<(Component, Component), f64>,
}

impl StructuralSums {
    pub fn compute(config: &SphereConfiguration, eval: &EisensteinEvaluator) -> Self {
        Self::from_rows(&RowSums::compute(config, eval))
    }

    pub fn from_rows(rows: &RowSums) -> Self {
        let pair = Component::all().map(|c| rows.pair_sum(c));
        let conv = required_convolutions()
            .into_iter()
            .map(|(a, b)| ((a, b), rows.convolution(a, b)))
            .collect();
        Self {
            n: rows.len(),
            pair,
            conv,
        }
    }

    pub fn pair(&self, c: Component) -> f64 {
        self.pair[c.slot()]
    }

    pub fn e11(&self) -> f64 {
        self.pair(c(1, 1))
    }

    pub fn e12(&self) -> f64 {
        self.pair(c(1, 2))
    }

    pub fn e13(&self) -> f64 {
        self.pair(c(1, 3))
    }

    pub fn e23(&self) -> f64 {
        self.pair(c(2, 3))
    }

    /// `e11` with the first two coordinates exchanged, equal to `e22`.
    pub fn e11_star(&self) -> f64 {
        self.pair(c(2, 2))
    }

    /// `e11` with the first and third coordinates exchanged, equal to `e33`.
    pub fn e11_dstar(&self) -> f64 {
        self.pair(c(3, 3))
    }

    /// A cached convolution by one-based labels, e.g. `conv_labels(1, 2, 1, 1)`.
    pub fn conv_labels(&self, i: usize, j: usize, p: usize, l: usize) -> f64 {
        *self
            .conv
            .get(&(c(i, j), c(p, l)))
            .unwrap_or_else(|| panic!("convolution {i}{j}*{p}{l} is not cached"))
    }

    /// `key=value` pairs in a stable order.
    pub fn key_values(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("n".to_string(), self.n as f64),
            ("e11".to_string(), self.e11()),
            ("e12".to_string(), self.e12()),
            ("e13".to_string(), self.e13()),
            ("e23".to_string(), self.e23()),
            ("e11_star".to_string(), self.e11_star()),
            ("e11_dstar".to_string(), self.e11_dstar()),
        ];
        for ((a, b), v) in &self.conv {
            out.push((format!("conv_{a}_{b}"), *v));
        }
        out
    }
}

/// `e_c` for a single component.
pub fn pair_sum(config: &SphereConfiguration, eval: &EisensteinEvaluator, c: Component) -> f64 {
    RowSums::compute(config, eval).pair_sum(c)
}

/// `(e11*, e11**)`: `e11` over the centers with axes 1,2 and then 1,3 exchanged.
pub fn starred_sums(config: &SphereConfiguration, eval: &EisensteinEvaluator) -> (f64, f64) {
    let e11 = Component::new(Axis::X1, Axis::X1);
    (
        pair_sum(&config.permute_axes([1, 0, 2]), eval, e11),
        pair_sum(&config.permute_axes([2, 1, 0]), eval, e11),
    )
}

/// `e_{ij*pl}` for any pair of components.
pub fn convolution_sum(config: &SphereConfiguration, eval: &EisensteinEvaluator, ij: Component, pl: Component) -> f64 {
    RowSums::compute(config, eval).convolution(ij, pl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eisenstein::FOUR_PI_OVER_THREE;
    use crate::geometry::generate_rsa;
    use crate::lattice_sums::coulombic_table;
    use proptest::prelude::*;

    fn evaluator() -> EisensteinEvaluator {
        EisensteinEvaluator::new(coulombic_table(40).unwrap(), 8).unwrap()
    }

    fn naive_convolution(
        config: &SphereConfiguration,
        eval: &EisensteinEvaluator,
        ij: Component,
        pl: Component,
    ) -> f64 {
        let a = config.centers();
        let n = a.len();
        let mut acc = CompensatedSum::new();
        for k in 0..n {
            for m in 0..n {
                let left = eval.component_or_origin(ij, minimum_image(a[k], a[m]).0);
                for s in 0..n {
                    acc.add(left * eval.component_or_origin(pl, minimum_image(a[m], a[s]).0));
                }
            }
        }
        acc.value() / (n as f64).powi(3)
    }

    #[test]
    fn single_sphere_degenerates_to_simple_cubic() {
        let config = SphereConfiguration::new(vec![[0.1, -0.2, 0.3]], 0.3).unwrap();
        let s = StructuralSums::compute(&config, &evaluator());
        assert_eq!(s.e11(), FOUR_PI_OVER_THREE);
        assert_eq!(s.e12(), 0.0);
        assert_eq!(s.e13(), 0.0);
        assert_eq!((s.e11_star(), s.e11_dstar()), (FOUR_PI_OVER_THREE, FOUR_PI_OVER_THREE));
        assert_eq!(s.conv_labels(1, 1, 1, 1), FOUR_PI_OVER_THREE * FOUR_PI_OVER_THREE);
        assert_eq!(s.conv_labels(1, 2, 1, 2), 0.0);
        assert_eq!(s.conv_labels(1, 3, 1, 3), 0.0);
    }

    #[test]
    fn starred_sums_match_permuted_components() {
        let config = generate_rsa(20, 0.2, 4).unwrap();
        let eval = evaluator();
        let s = StructuralSums::compute(&config, &eval);
        let (star, dstar) = starred_sums(&config, &eval);
        assert_eq!(star, s.e11_star());
        assert!((dstar - s.e11_dstar()).abs() < 1e-12);
    }

    #[test]
    fn swap_symmetric_configuration_has_equal_star() {
        let pts = [
            [0.1, 0.1, 0.0],
            [0.3, -0.2, 0.1],
            [-0.2, 0.3, 0.1],
            [-0.35, -0.35, -0.3],
        ];
        let config = SphereConfiguration::new(pts.to_vec(), 0.05).unwrap();
        let eval = evaluator();
        let s = StructuralSums::compute(&config, &eval);
        assert!((s.e11() - s.e11_star()).abs() < 1e-12);
    }

    #[test]
    fn mirror_in_first_axis_flips_e12() {
        let config = generate_rsa(15, 0.2, 9).unwrap();
        let eval = evaluator();
        let s = StructuralSums::compute(&config, &eval);
        let m = StructuralSums::compute(&config.transform_axes([0, 1, 2], [-1.0, 1.0, 1.0]), &eval);
        assert!((s.e12() + m.e12()).abs() < 1e-10);
        assert!((s.e11() - m.e11()).abs() < 1e-10);
    }

    #[test]
    fn factorised_convolution_matches_triple_loop() {
        let eval = evaluator();
        for seed in 0..5 {
            let config = generate_rsa(8, 0.2, seed).unwrap();
            let rows = RowSums::compute(&config, &eval);
            for ij in Component::all() {
                for pl in [c(1, 1), c(1, 2), c(2, 3)] {
                    let fast = rows.convolution(ij, pl);
                    let slow = naive_convolution(&config, &eval, ij, pl);
                    assert!(
                        (fast - slow).abs() <= 1e-12 * slow.abs().max(1e-3),
                        "{ij}*{pl}: {fast} {slow}"
                    );
                }
            }
        }
    }

    #[test]
    fn boundary_components_use_their_own_wrap() {
        let config = SphereConfiguration::new(vec![[0.25, 0.0, 0.0], [-0.25, 0.1, 0.0]], 0.05).unwrap();
        let eval = evaluator();
        let rows = RowSums::compute(&config, &eval);
        for ij in Component::all() {
            for pl in Component::all() {
                let slow = naive_convolution(&config, &eval, ij, pl);
                assert!((rows.convolution(ij, pl) - slow).abs() <= 1e-12 * slow.abs().max(1.0));
            }
        }
    }

    #[test]
    fn generic_entry_points_agree_with_the_bundle() {
        let config = generate_rsa(10, 0.2, 1).unwrap();
        let eval = evaluator();
        let s = StructuralSums::compute(&config, &eval);
        assert_eq!(pair_sum(&config, &eval, c(1, 3)), s.e13());
        assert_eq!(
            convolution_sum(&config, &eval, c(2, 3), c(1, 3)),
            s.conv_labels(2, 3, 1, 3)
        );
        assert_eq!(s.key_values().len(), 7 + required_convolutions().len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn translation_invariance(seed in 0u64..1000, shift in prop::array::uniform3(-0.5f64..0.5)) {
            let eval = evaluator();
            let config = generate_rsa(12, 0.2, seed).unwrap();
            let a = StructuralSums::compute(&config, &eval);
            let b = StructuralSums::compute(&config.translate(shift), &eval);
            for (x, y) in a.pair.iter().zip(&b.pair) {
                prop_assert!((x - y).abs() < 1e-10);
            }
            for (k, v) in &a.conv {
                prop_assert!((v - b.conv[k]).abs() < 1e-10);
            }
        }

        #[test]
        fn relabelling_invariance(seed in 0u64..1000, rot in 0usize..12) {
            let eval = evaluator();
            let config = generate_rsa(12, 0.2, seed).unwrap();
            let order: Vec<usize> = (0..12).map(|i| (i + rot) % 12).rev().collect();
            let a = StructuralSums::compute(&config, &eval);
            let b = StructuralSums::compute(&config.relabel(&order), &eval);
            for (x, y) in a.pair.iter().zip(&b.pair) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
            for (k, v) in &a.conv {
                prop_assert!((v - b.conv[k]).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }
}
