//! Numeric evaluation of symbolic expressions on a finite cluster.
//!
//! Index labels range over sphere numbers. A sum enumerates every
//! assignment of its bound labels and skips tuples that violate one of its
//! exclusion pairs. Centers are points of ordinary space: no periodic
//! images are taken.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use effcond::SphereConfiguration;

use crate::error::{Result, SymbolicError};
use crate::expr::{Point, SymExpr};

/// Equal spheres in ordinary space.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub centers: Vec<[f64; 3]>,
    pub radius: f64,
}

impl Cluster {
    pub fn new(centers: Vec<[f64; 3]>, radius: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(SymbolicError::InvalidInput(
                "a cluster needs at least one sphere".into(),
            ));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(SymbolicError::InvalidInput(format!("invalid radius {radius}")));
        }
        if centers.iter().flatten().any(|c| !c.is_finite()) {
            return Err(SymbolicError::InvalidInput("non-finite center coordinate".into()));
        }
        Ok(Cluster { centers, radius })
    }

    /// The same spheres with another radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Cluster::new(self.centers.clone(), radius)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Smallest center-to-center distance, or infinity for one sphere.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, p) in self.centers.iter().enumerate() {
            for q in &self.centers[i + 1..] {
                best = best.min(distance(*p, *q));
            }
        }
        best
    }
}

impl From<&SphereConfiguration> for Cluster {
    /// Centers as stored in the unit cell, taken as points of ordinary space.
    fn from(config: &SphereConfiguration) -> Self {
        Cluster {
            centers: config.centers().to_vec(),
            radius: config.radius(),
        }
    }
}

pub(crate) fn distance(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// The inversion `s(x, a) = a + r^2 (x - a) / |x - a|^2`.
pub fn inversion(x: [f64; 3], center: [f64; 3], radius: f64) -> [f64; 3] {
    let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
    let scale = radius * radius / (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    [
        center[0] + scale * d[0],
        center[1] + scale * d[1],
        center[2] + scale * d[2],
    ]
}

/// Which sphere each free label denotes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexInterpretation {
    pub labels: BTreeMap<i64, usize>,
}

impl IndexInterpretation {
    /// Only the anchor label is free.
    pub fn anchor(label: i64, sphere: usize) -> Self {
        IndexInterpretation {
            labels: BTreeMap::from([(label, sphere)]),
        }
    }

    pub fn with(mut self, label: i64, sphere: usize) -> Self {
        self.labels.insert(label, sphere);
        self
    }
}

/// Evaluates `e` at the field point `x`. Symbols of the `c` and `z`
/// families are unbound.
pub fn numeric_eval(e: &SymExpr, cluster: &Cluster, x: [f64; 3], interpretation: &IndexInterpretation) -> Result<f64> {
    let mut ctx = Evaluator {
        cluster,
        constants: None,
        env: interpretation.labels.clone(),
    };
    ctx.eval(e, x)
}

/// Evaluates `e` with the boundary constants `c_i` supplied per sphere.
pub fn numeric_eval_with_constants(
    e: &SymExpr,
    cluster: &Cluster,
    x: [f64; 3],
    interpretation: &IndexInterpretation,
    constants: &[f64],
) -> Result<f64> {
    if constants.len() != cluster.len() {
        return Err(SymbolicError::InvalidInput(format!(
            "{} constants for {} spheres",
            constants.len(),
            cluster.len()
        )));
    }
    let mut ctx = Evaluator {
        cluster,
        constants: Some(constants),
        env: interpretation.labels.clone(),
    };
    ctx.eval(e, x)
}

struct Evaluator<'a> {
    cluster: &'a Cluster,
    constants: Option<&'a [f64]>,
    env: BTreeMap<i64, usize>,
}

impl Evaluator<'_> {
    fn sphere(&self, label: i64, what: &str) -> Result<usize> {
        self.env
            .get(&label)
            .copied()
            .ok_or_else(|| SymbolicError::UnboundSymbol(format!("{what}_{label}")))
    }

    fn point(&self, p: Point, x: [f64; 3]) -> Result<[f64; 3]> {
        match p {
            Point::X => Ok(x),
            Point::A(i) => Ok(self.cluster.centers[self.sphere(i, "a")?]),
        }
    }

    fn eval(&mut self, e: &SymExpr, x: [f64; 3]) -> Result<f64> {
        Ok(match e {
            SymExpr::Num(v) => v.to_f64().unwrap_or(f64::NAN),
            SymExpr::R0 => self.cluster.radius,
            SymExpr::Coord(p, axis) => self.point(*p, x)?[*axis],
            SymExpr::C(i) => match self.constants {
                Some(values) => values[self.sphere(*i, "c")?],
                None => return Err(SymbolicError::UnboundSymbol(format!("c_{i}"))),
            },
            SymExpr::Z(i) => return Err(SymbolicError::UnboundSymbol(format!("z_{i}"))),
            SymExpr::Index(i) => return Err(SymbolicError::UnboundSymbol(format!("index {i}"))),
            SymExpr::Func(name, _) => return Err(SymbolicError::UnboundSymbol(name.clone())),
            SymExpr::Norm(p, q) => distance(self.point(*p, x)?, self.point(*q, x)?),
            SymExpr::Dot(pts) => {
                let v: Vec<[f64; 3]> = pts.iter().map(|p| self.point(*p, x)).collect::<Result<_>>()?;
                (0..3).map(|i| (v[0][i] - v[1][i]) * (v[2][i] - v[3][i])).sum()
            }
            SymExpr::Add(v) => {
                let mut total = 0.0;
                for t in v {
                    total += self.eval(t, x)?;
                }
                total
            }
            SymExpr::Mul(v) => {
                let mut product = 1.0;
                for t in v {
                    product *= self.eval(t, x)?;
                }
                product
            }
            SymExpr::Pow(b, exponent) => {
                let base = self.eval(b, x)?;
                if exponent.is_integer() {
                    base.powi(exponent.to_integer().to_i32().unwrap_or(i32::MAX))
                } else {
                    base.powf(exponent.to_f64().unwrap_or(f64::NAN))
                }
            }
            SymExpr::Compose(b, center) => {
                let a = self.cluster.centers[self.sphere(*center, "a")?];
                let image = inversion(x, a, self.cluster.radius);
                self.eval(b, image)?
            }
            SymExpr::Sum(b, ix) => {
                for &(i, j) in &ix.exclusions {
                    for label in [i, j] {
                        if !ix.indices.contains(&label) && !self.env.contains_key(&label) {
                            return Err(SymbolicError::UnboundSymbol(format!("index {label}")));
                        }
                    }
                }
                let saved: Vec<(i64, Option<usize>)> =
                    ix.indices.iter().map(|&i| (i, self.env.get(&i).copied())).collect();
                let total = self.enumerate(b, ix, 0, x);
                for (label, previous) in saved {
                    match previous {
                        Some(v) => self.env.insert(label, v),
                        None => self.env.remove(&label),
                    };
                }
                total?
            }
        })
    }

    fn enumerate(&mut self, body: &SymExpr, ix: &crate::expr::SumIndices, depth: usize, x: [f64; 3]) -> Result<f64> {
        if depth == ix.indices.len() {
            return self.eval(body, x);
        }
        let label = ix.indices[depth];
        let assigned = &ix.indices[..=depth];
        let mut total = 0.0;
        for sphere in 0..self.cluster.len() {
            self.env.insert(label, sphere);
            let excluded = ix.exclusions.iter().any(|&(i, j)| {
                let involved = i == label || j == label;
                let other = if i == label { j } else { i };
                let other_known = !ix.indices.contains(&other) || assigned.contains(&other);
                involved && other_known && self.env.get(&other) == Some(&sphere)
            });
            if excluded {
                continue;
            }
            total += self.enumerate(body, ix, depth + 1, x)?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    #[test]
    fn ordered_pair_sum_of_distances() {
        let cluster = Cluster::new(vec![[0.0; 3], [0.7, 0.0, 0.0]], 0.1).unwrap();
        let e = sum(norm(Point::A(1), Point::A(2)), vec![1, 2], vec![]);
        let v = numeric_eval(&e, &cluster, [0.0; 3], &IndexInterpretation::default()).unwrap();
        assert!((v - 1.4).abs() < 1e-15);
        let excluded = sum(norm(Point::A(1), Point::A(2)), vec![1, 2], vec![(1, 2)]);
        let v = numeric_eval(&excluded, &cluster, [0.0; 3], &IndexInterpretation::default()).unwrap();
        assert!((v - 1.4).abs() < 1e-15);
    }

    #[test]
    fn exclusion_against_anchor() {
        let cluster = Cluster::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]], 0.1).unwrap();
        let e = sum(norm(Point::A(5), Point::A(4)), vec![4], vec![(4, 5)]);
        let v = numeric_eval(&e, &cluster, [0.0; 3], &IndexInterpretation::anchor(5, 0)).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_admissible_set_gives_zero() {
        let cluster = Cluster::new(vec![[0.0; 3]], 0.1).unwrap();
        let e = sum(num(1), vec![4], vec![(4, 5)]);
        let v = numeric_eval(&e, &cluster, [0.0; 3], &IndexInterpretation::anchor(5, 0)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn unbound_symbols_are_reported() {
        let cluster = Cluster::new(vec![[0.0; 3]], 0.1).unwrap();
        let interp = IndexInterpretation::anchor(1, 0);
        assert!(matches!(
            numeric_eval(&z(1), &cluster, [0.0; 3], &interp),
            Err(SymbolicError::UnboundSymbol(_))
        ));
        assert!(matches!(
            numeric_eval(&c(1), &cluster, [0.0; 3], &interp),
            Err(SymbolicError::UnboundSymbol(_))
        ));
        assert!(matches!(
            numeric_eval(&a(2, 0), &cluster, [0.0; 3], &interp),
            Err(SymbolicError::UnboundSymbol(_))
        ));
        let v = numeric_eval_with_constants(&c(1), &cluster, [0.0; 3], &interp, &[2.5]).unwrap();
        assert_eq!(v, 2.5);
    }

    #[test]
    fn composition_evaluates_at_the_image_point() {
        let cluster = Cluster::new(vec![[0.0; 3]], 0.5).unwrap();
        let e = compose(x(0), 1);
        let v = numeric_eval(&e, &cluster, [2.0, 0.0, 0.0], &IndexInterpretation::anchor(1, 0)).unwrap();
        assert!((v - 0.125).abs() < 1e-15);
    }
}
