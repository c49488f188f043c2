//! Triply periodic kernels `E_pq` on the unit cubic lattice.
//!
//! Inside the cell each kernel is its singular part plus a harmonic
//! polynomial whose coefficients are Coulombic lattice sums:
//!
//! ```text
//! E11(x) = 4pi/3 + (2x1^2 - x2^2 - x3^2)/|x|^5 + 6 L4 P2 + 15 L6 P4 + 28 L8 P6 + 9 L10 P8
//! E12(x) = 3 x1 x2/|x|^5 - 12 L4 Q2 - 60 L6 Q4 - 56 L8 Q6 - 72 L10 Q8
//! ```
//!
//! Every other component reuses one of these two templates with the
//! coordinates permuted so that `p` lands on the first slot and `q` on the
//! second. [`eisenstein_oracle`] sums the defining lattice series directly,
//! with `R1` innermost, for validation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Point;
use crate::lattice_sums::LatticeSumTable;
use crate::summation::{tree_sum, CompensatedSum};

/// Value of `E11(0)` by convention; also the constant term of `E11`.
pub const FOUR_PI_OVER_THREE: f64 = 4.0 * PI / 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum EisensteinError {
    #[error("kernel evaluated at a lattice point")]
    SingularInput,
    #[error("point {0:?} is outside the open cell (-1/2, 1/2)^3")]
    OutsideCell(Point),
    #[error("truncation degree {0} is not one of 2, 4, 6, 8")]
    InvalidDegree(u32),
    #[error("oracle truncation {0} is below 10")]
    InvalidOrder(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X1 = 0,
    X2 = 1,
    X3 = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X1, Axis::X2, Axis::X3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// One-based label used in component names.
    pub fn label(self) -> usize {
        self.index() + 1
    }
}

/// A kernel component `E_pq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Component {
    pub p: Axis,
    pub q: Axis,
}

impl Component {
    pub const fn new(p: Axis, q: Axis) -> Self {
        Self { p, q }
    }

    /// Builds a component from one-based labels such as `(1, 2)`.
    pub fn from_labels(p: usize, q: usize) -> Option<Self> {
        Some(Self::new(
            Axis::from_index(p.checked_sub(1)?)?,
            Axis::from_index(q.checked_sub(1)?)?,
        ))
    }

    pub fn is_diagonal(self) -> bool {
        self.p == self.q
    }

    /// Coordinate order fed to the template: `p` first, `q` second.
    /// Diagonal components send the first axis they swap with to the middle.
    pub fn template_axes(self) -> [usize; 3] {
        let (p, q) = (self.p.index(), self.q.index());
        if p == q {
            match p {
                0 => [0, 1, 2],
                1 => [1, 0, 2],
                _ => [2, 1, 0],
            }
        } else {
            [p, q, 3 - p - q]
        }
    }

    /// Kernel value at the origin: `4pi/3` on the diagonal, zero elsewhere.
    pub fn origin_value(self) -> f64 {
        if self.is_diagonal() {
            FOUR_PI_OVER_THREE
        } else {
            0.0
        }
    }

    /// All nine components in row-major order.
    pub fn all() -> [Component; 9] {
        std::array::from_fn(|i| Component::new(Axis::ALL[i / 3], Axis::ALL[i % 3]))
    }

    /// Row-major position in [`Component::all`].
    pub fn slot(self) -> usize {
        3 * self.p.index() + self.q.index()
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.p.label(), self.q.label())
    }
}

/// Integer coefficient and exponents of one monomial `x1^a x2^b x3^c`.
pub type Term = (i64, [u32; 3]);

const E11_DEG2: &[Term] = &[(2, [2, 0, 0]), (-1, [0, 2, 0]), (-1, [0, 0, 2])];
const E11_DEG4: &[Term] = &[
    (2, [4, 0, 0]),
    (-6, [2, 2, 0]),
    (-6, [2, 0, 2]),
    (-1, [0, 4, 0]),
    (12, [0, 2, 2]),
    (-1, [0, 0, 4]),
];
const E11_DEG6: &[Term] = &[
    (2, [6, 0, 0]),
    (-15, [4, 2, 0]),
    (-15, [4, 0, 2]),
    (15, [2, 4, 0]),
    (15, [2, 0, 4]),
    (-1, [0, 6, 0]),
    (-1, [0, 0, 6]),
];
const E11_DEG8: &[Term] = &[
    (10, [8, 0, 0]),
    (-140, [6, 2, 0]),
    (-140, [6, 0, 2]),
    (70, [4, 4, 0]),
    (1680, [4, 2, 2]),
    (70, [4, 0, 4]),
    (28, [2, 6, 0]),
    (-840, [2, 4, 2]),
    (-840, [2, 2, 4]),
    (28, [2, 0, 6]),
    (-5, [0, 8, 0]),
    (112, [0, 6, 2]),
    (-140, [0, 4, 4]),
    (112, [0, 2, 6]),
    (-5, [0, 0, 8]),
];

const E12_DEG2: &[Term] = &[(1, [1, 1, 0])];
const E12_DEG4: &[Term] = &[(1, [3, 1, 0]), (1, [1, 3, 0]), (-6, [1, 1, 2])];
const E12_DEG6: &[Term] = &[(3, [5, 1, 0]), (-10, [3, 3, 0]), (3, [1, 5, 0])];
const E12_DEG8: &[Term] = &[
    (5, [7, 1, 0]),
    (-7, [5, 3, 0]),
    (-84, [5, 1, 2]),
    (-7, [3, 5, 0]),
    (140, [3, 3, 2]),
    (70, [3, 1, 4]),
    (5, [1, 7, 0]),
    (-84, [1, 5, 2]),
    (70, [1, 3, 4]),
    (-28, [1, 1, 6]),
];

/// Homogeneous polynomial blocks of the `E11` template, by degree.
pub fn e11_blocks() -> [(u32, &'static [Term]); 4] {
    [(2, E11_DEG2), (4, E11_DEG4), (6, E11_DEG6), (8, E11_DEG8)]
}

/// Homogeneous polynomial blocks of the `E12` template, by degree.
pub fn e12_blocks() -> [(u32, &'static [Term]); 4] {
    [(2, E12_DEG2), (4, E12_DEG4), (6, E12_DEG6), (8, E12_DEG8)]
}

/// Whether a homogeneous block is harmonic, checked on exact coefficients.
pub fn block_is_harmonic(terms: &[Term]) -> bool {
    let mut laplacian: BTreeMap<[u32; 3], i64> = BTreeMap::new();
    for (c, e) in terms {
        for axis in 0..3 {
            if e[axis] >= 2 {
                let mut lowered = *e;
                lowered[axis] -= 2;
                *laplacian.entry(lowered).or_default() += c * i64::from(e[axis] * (e[axis] - 1));
            }
        }
    }
    laplacian.values().all(|&v| v == 0)
}

/// Largest coefficient of `P(x1,x2,x3) + P(x2,x1,x3) + P(x3,x2,x1)`. The
/// three-fold cancellation identity of an `E11` block holds when it is 0.
pub fn three_fold_residual(terms: &[Term]) -> i64 {
    let mut total: BTreeMap<[u32; 3], i64> = BTreeMap::new();
    for (c, [a, b, d]) in terms {
        *total.entry([*a, *b, *d]).or_default() += c;
        *total.entry([*b, *a, *d]).or_default() += c;
        *total.entry([*d, *b, *a]).or_default() += c;
    }
    total.values().map(|v| v.abs()).max().unwrap_or(0)
}

const E11_PREFACTORS: [f64; 4] = [6.0, 15.0, 28.0, 9.0];
const E12_PREFACTORS: [f64; 4] = [-12.0, -60.0, -56.0, -72.0];

/// Powers `x_i^k` for `k <= 8` of the three coordinates.
#[derive(Debug, Clone, Copy)]
pub struct CoordinatePowers {
    pw: [[f64; 9]; 3],
    inv_norm5: f64,
}

impl CoordinatePowers {
    pub fn new(x: Point) -> Self {
        let mut pw = [[1.0; 9]; 3];
        for (axis, row) in pw.iter_mut().enumerate() {
            for k in 1..9 {
                row[k] = row[k - 1] * x[axis];
            }
        }
        let r2 = pw[0][2] + pw[1][2] + pw[2][2];
        Self {
            pw,
            inv_norm5: r2.sqrt().powi(5).recip(),
        }
    }
}

/// Truncated polynomial evaluator for the `E_pq` kernels.
#[derive(Debug, Clone)]
pub struct EisensteinEvaluator {
    table: LatticeSumTable,
    max_degree: u32,
    diagonal: Vec<(f64, [usize; 3])>,
    off_diagonal: Vec<(f64, [usize; 3])>,
}

fn flatten(
    blocks: [(u32, &'static [Term]); 4],
    prefactors: [f64; 4],
    lattice: [f64; 4],
    max_degree: u32,
) -> Vec<(f64, [usize; 3])> {
    let mut out = Vec::new();
    for (i, (degree, terms)) in blocks.iter().enumerate() {
        if *degree > max_degree {
            continue;
        }
        let scale = prefactors[i] * lattice[i];
        for (c, e) in terms.iter() {
            out.push((scale * *c as f64, e.map(|v| v as usize)));
        }
    }
    out
}

impl EisensteinEvaluator {
    /// Keeps the polynomial blocks of degree at most `max_degree`.
    pub fn new(table: LatticeSumTable, max_degree: u32) -> Result<Self, EisensteinError> {
        if !matches!(max_degree, 2 | 4 | 6 | 8) {
            return Err(EisensteinError::InvalidDegree(max_degree));
        }
        let lattice = table.values();
        Ok(Self {
            table,
            max_degree,
            diagonal: flatten(e11_blocks(), E11_PREFACTORS, lattice, max_degree),
            off_diagonal: flatten(e12_blocks(), E12_PREFACTORS, lattice, max_degree),
        })
    }

    pub fn table(&self) -> &LatticeSumTable {
        &self.table
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// `E_pq(x)` for `x != 0`.
    pub fn component(&self, c: Component, x: Point) -> Result<f64, EisensteinError> {
        if x == [0.0; 3] {
            return Err(EisensteinError::SingularInput);
        }
        Ok(self.component_with(c, &CoordinatePowers::new(x)))
    }

    /// `E_pq(x)`, or the origin convention when `x = 0`.
    pub fn component_or_origin(&self, c: Component, x: Point) -> f64 {
        if x == [0.0; 3] {
            c.origin_value()
        } else {
            self.component_with(c, &CoordinatePowers::new(x))
        }
    }

    /// Evaluates a component from precomputed coordinate powers of a non-zero point.
    pub fn component_with(&self, c: Component, powers: &CoordinatePowers) -> f64 {
        let [a, b, d] = c.template_axes();
        let pw = &powers.pw;
        let (singular, terms, constant) = if c.is_diagonal() {
            (
                (2.0 * pw[a][2] - pw[b][2] - pw[d][2]) * powers.inv_norm5,
                &self.diagonal,
                FOUR_PI_OVER_THREE,
            )
        } else {
            (3.0 * pw[a][1] * pw[b][1] * powers.inv_norm5, &self.off_diagonal, 0.0)
        };
        let mut poly = 0.0;
        for (coeff, e) in terms {
            poly += coeff * pw[a][e[0]] * pw[b][e[1]] * pw[d][e[2]];
        }
        constant + singular + poly
    }

    /// All nine components at once, in row-major order; origin conventions at `x = 0`.
    pub fn all_components(&self, x: Point) -> [f64; 9] {
        if x == [0.0; 3] {
            return Component::all().map(Component::origin_value);
        }
        let powers = CoordinatePowers::new(x);
        Component::all().map(|c| self.component_with(c, &powers))
    }

    pub fn e11(&self, x: Point) -> Result<f64, EisensteinError> {
        self.component(Component::new(Axis::X1, Axis::X1), x)
    }

    pub fn e12(&self, x: Point) -> Result<f64, EisensteinError> {
        self.component(Component::new(Axis::X1, Axis::X2), x)
    }

    pub fn e13(&self, x: Point) -> Result<f64, EisensteinError> {
        self.component(Component::new(Axis::X1, Axis::X3), x)
    }

    /// Polynomial part only (no constant, no singular term), for studies of the expansion.
    pub fn polynomial_part(&self, c: Component, x: Point) -> f64 {
        let [a, b, d] = c.template_axes();
        let powers = CoordinatePowers::new(x);
        let terms = if c.is_diagonal() {
            &self.diagonal
        } else {
            &self.off_diagonal
        };
        terms
            .iter()
            .map(|(coeff, e)| coeff * powers.pw[a][e[0]] * powers.pw[b][e[1]] * powers.pw[d][e[2]])
            .sum()
    }
}

/// Singular part of a kernel component at `x != 0`.
pub fn singular_part(c: Component, x: Point) -> f64 {
    let [a, b, d] = c.template_axes();
    let r5 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt().powi(5);
    if c.is_diagonal() {
        (2.0 * x[a] * x[a] - x[b] * x[b] - x[d] * x[d]) / r5
    } else {
        3.0 * x[a] * x[b] / r5
    }
}

/// Direct lattice summation of `E_pq` in the Eisenstein order.
///
/// The innermost sum runs along the template's first axis for
/// `|R1| <= m`, and the remainder of each line is added in closed form from
/// the antiderivative of the summand (midpoint rule). The outer sums run
/// over `|R2|, |R3| <= m`; a complete line integrates to zero, so the outer
/// truncation error decays quickly. The constant `4pi/3` of `E11` is not
/// added: it is what this summation order produces.
pub fn eisenstein_oracle(c: Component, x: Point, m: u32) -> Result<f64, EisensteinError> {
    if m < 10 {
        return Err(EisensteinError::InvalidOrder(m));
    }
    if x.iter().any(|v| v.is_nan() || v.abs() >= 0.5) {
        return Err(EisensteinError::OutsideCell(x));
    }
    if x == [0.0; 3] {
        return Err(EisensteinError::SingularInput);
    }
    let [a, b, d] = c.template_axes();
    let (t0, u0, v0) = (x[a], x[b], x[d]);
    let mi = m as i64;
    let diagonal = c.is_diagonal();
    let half = m as f64 + 0.5;

    let slabs: Vec<f64> = (-mi..=mi)
        .into_par_iter()
        .map(|r3| {
            let v = v0 - r3 as f64;
            let mut acc = CompensatedSum::new();
            for r2 in -mi..=mi {
                let u = u0 - r2 as f64;
                let rho2 = u * u + v * v;
                let mut line = CompensatedSum::new();
                for r1 in -mi..=mi {
                    let t = t0 - r1 as f64;
                    let s2 = t * t + rho2;
                    let inv5 = s2.sqrt().powi(5).recip();
                    line.add(if diagonal {
                        (2.0 * t * t - rho2) * inv5
                    } else {
                        3.0 * t * u * inv5
                    });
                }
                // Antiderivatives in t of the two summands.
                let prim = |t: f64| {
                    let inv3 = (t * t + rho2).sqrt().powi(3).recip();
                    if diagonal {
                        -t * inv3
                    } else {
                        -u * inv3
                    }
                };
                line.add(prim(t0 - half) - prim(t0 + half));
                acc.add(line.value());
            }
            acc.value()
        })
        .collect();
    Ok(tree_sum(&slabs))
}

pub fn eisenstein_oracle_e11(x: Point, m: u32) -> Result<f64, EisensteinError> {
    eisenstein_oracle(Component::new(Axis::X1, Axis::X1), x, m)
}

pub fn eisenstein_oracle_e12(x: Point, m: u32) -> Result<f64, EisensteinError> {
    eisenstein_oracle(Component::new(Axis::X1, Axis::X2), x, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    use proptest::prelude::*;

    use crate::lattice_sums::coulombic_table;

    fn table() -> LatticeSumTable {
        static T: OnceLock<LatticeSumTable> = OnceLock::new();
        *T.get_or_init(|| coulombic_table(250).unwrap())
    }

    fn evaluator() -> EisensteinEvaluator {
        EisensteinEvaluator::new(table(), 8).unwrap()
    }

    const E11: Component = Component::new(Axis::X1, Axis::X1);
    const E12: Component = Component::new(Axis::X1, Axis::X2);
    const E21: Component = Component::new(Axis::X2, Axis::X1);

    #[test]
    fn blocks_are_harmonic() {
        for (_, terms) in e11_blocks().iter().chain(e12_blocks().iter()) {
            assert!(block_is_harmonic(terms));
        }
        assert!(!block_is_harmonic(&[(1, [2, 0, 0])]));
    }

    #[test]
    fn three_fold_cancellation_coefficientwise() {
        for (degree, terms) in e11_blocks() {
            assert_eq!(three_fold_residual(terms), 0, "degree {degree}");
        }
        assert_eq!(three_fold_residual(&[(1, [2, 0, 0])]), 1);
    }

    #[test]
    fn rejects_bad_degree_and_origin() {
        assert_eq!(
            EisensteinEvaluator::new(table(), 5).unwrap_err(),
            EisensteinError::InvalidDegree(5)
        );
        assert_eq!(evaluator().e11([0.0; 3]), Err(EisensteinError::SingularInput));
        assert_eq!(evaluator().component_or_origin(E11, [0.0; 3]), FOUR_PI_OVER_THREE);
        assert_eq!(evaluator().component_or_origin(E12, [0.0; 3]), 0.0);
    }

    #[test]
    fn e12_vanishes_off_plane() {
        let e = evaluator();
        assert_eq!(e.e12([0.3, 0.0, -0.2]).unwrap(), 0.0);
        assert_eq!(e.e13([0.3, 0.1, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn sum_of_diagonal_components_is_singular_only() {
        let e = evaluator();
        let x = [0.21, -0.13, 0.07];
        let total: f64 = Axis::ALL
            .iter()
            .map(|&a| e.component(Component::new(a, a), x).unwrap())
            .sum();
        let singular: f64 = Axis::ALL.iter().map(|&a| singular_part(Component::new(a, a), x)).sum();
        assert!((total - 4.0 * PI - singular).abs() < 1e-10);
    }

    #[test]
    fn truncated_forms_match_oracle_at_reference_points() {
        let e = evaluator();
        let x = [0.3, 0.0, 0.0];
        let oracle = eisenstein_oracle_e11(x, 100).unwrap();
        assert!(((e.e11(x).unwrap() - oracle) / oracle).abs() < 1e-3);
        let y = [0.2, 0.2, 0.1];
        let oracle = eisenstein_oracle_e12(y, 100).unwrap();
        assert!(((e.e12(y).unwrap() - oracle) / oracle).abs() < 1e-3);
    }

    #[test]
    fn oracle_minus_singular_term_is_the_polynomial_part() {
        let e = evaluator();
        let x = [0.3, 0.0, 0.0];
        let rest = eisenstein_oracle_e11(x, 100).unwrap() - FOUR_PI_OVER_THREE - singular_part(E11, x);
        let poly = e.polynomial_part(E11, x);
        assert!((rest - poly).abs() < 1e-2 * poly.abs(), "{rest} {poly}");
    }

    #[test]
    fn oracle_self_converges() {
        for x in [[0.4, 0.0, 0.0], [0.1, -0.2, 0.3], [-0.25, 0.25, 0.1]] {
            let a = eisenstein_oracle_e11(x, 20).unwrap();
            let b = eisenstein_oracle_e11(x, 40).unwrap();
            assert!((a - b).abs() < 1e-3, "{x:?}: {a} {b}");
        }
    }

    #[test]
    fn oracle_respects_summand_symmetry() {
        let x = [0.12, -0.31, 0.2];
        let swapped = [x[1], x[0], x[2]];
        let a = eisenstein_oracle(E21, x, 30).unwrap();
        let b = eisenstein_oracle_e12(swapped, 30).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_preconditions() {
        assert_eq!(
            eisenstein_oracle_e11([0.1; 3], 5),
            Err(EisensteinError::InvalidOrder(5))
        );
        assert!(matches!(
            eisenstein_oracle_e11([0.5, 0.0, 0.0], 20),
            Err(EisensteinError::OutsideCell(_))
        ));
        assert_eq!(eisenstein_oracle_e11([0.0; 3], 20), Err(EisensteinError::SingularInput));
    }

    #[test]
    fn degree_truncation_improves_accuracy() {
        let x = [0.25, 0.15, -0.1];
        let oracle = eisenstein_oracle_e11(x, 60).unwrap();
        let err: Vec<f64> = [2, 4, 8]
            .iter()
            .map(|&d| (EisensteinEvaluator::new(table(), d).unwrap().e11(x).unwrap() - oracle).abs())
            .collect();
        assert!(err[0] > err[1] && err[1] > err[2], "{err:?}");
    }

    fn cell_point() -> impl Strategy<Value = Point> {
        prop::array::uniform3(-0.45f64..0.45).prop_filter("non-zero", |x| x.iter().any(|v| v.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn kernels_are_even(x in cell_point()) {
            let e = evaluator();
            let neg = x.map(|v| -v);
            for c in Component::all() {
                prop_assert_eq!(e.component(c, x).unwrap(), e.component(c, neg).unwrap());
            }
        }

        #[test]
        fn off_diagonal_is_symmetric_and_odd(x in cell_point()) {
            let e = evaluator();
            let a = e.component(E12, x).unwrap();
            let b = e.component(E21, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            let m1 = [-x[0], x[1], x[2]];
            let m2 = [x[0], -x[1], x[2]];
            prop_assert_eq!(e.e12(m1).unwrap(), -a);
            prop_assert_eq!(e.e12(m2).unwrap(), -a);
        }

        #[test]
        fn diagonal_templates_follow_axis_swaps(x in cell_point()) {
            let e = evaluator();
            let e22 = e.component(Component::new(Axis::X2, Axis::X2), x).unwrap();
            let e33 = e.component(Component::new(Axis::X3, Axis::X3), x).unwrap();
            prop_assert_eq!(e22, e.e11([x[1], x[0], x[2]]).unwrap());
            let swapped = e.e11([x[2], x[1], x[0]]).unwrap();
            prop_assert!((e33 - swapped).abs() <= 1e-12 * swapped.abs().max(1.0));
        }
    }
}
