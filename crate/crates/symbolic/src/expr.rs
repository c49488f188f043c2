//! Expression trees with indefinite symbolic sums.
//!
//! Indexed symbols carry a plain integer label. A label is bound when an
//! enclosing `Sum` lists it among its indices and free otherwise. Labels
//! may be negative, which happens routinely after reindexing.

use std::collections::BTreeSet;
use std::ops;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// A point-valued symbol: the field point `x` or a sphere center `a_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Point {
    X,
    A(i64),
}

impl Point {
    pub fn index(&self) -> Option<i64> {
        match self {
            Point::X => None,
            Point::A(i) => Some(*i),
        }
    }

    pub fn map_index(&self, f: &dyn Fn(i64) -> i64) -> Point {
        match self {
            Point::X => Point::X,
            Point::A(i) => Point::A(f(*i)),
        }
    }
}

/// Bound indices of a sum together with its exclusion pairs.
///
/// An exclusion `(i, j)` drops every index tuple in which labels `i` and
/// `j` take the same value. Either label may be free, as for the anchor
/// exclusion `m != k`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SumIndices {
    pub indices: Vec<i64>,
    pub exclusions: Vec<(i64, i64)>,
}

impl SumIndices {
    pub fn new(indices: Vec<i64>, exclusions: Vec<(i64, i64)>) -> Self {
        SumIndices { indices, exclusions }
    }

    /// Exclusions with each pair ordered, sorted and deduplicated.
    pub fn normalized_exclusions(&self) -> Vec<(i64, i64)> {
        normalize_exclusions(self.exclusions.iter().copied())
    }

    pub fn map_indices(&self, f: &dyn Fn(i64) -> i64) -> SumIndices {
        SumIndices {
            indices: self.indices.iter().map(|&i| f(i)).collect(),
            exclusions: self.exclusions.iter().map(|&(i, j)| (f(i), f(j))).collect(),
        }
    }
}

pub(crate) fn normalize_exclusions(pairs: impl Iterator<Item = (i64, i64)>) -> Vec<(i64, i64)> {
    let set: BTreeSet<(i64, i64)> = pairs.map(|(i, j)| (i.min(j), i.max(j))).collect();
    set.into_iter().collect()
}

/// A symbolic expression.
///
/// Coordinate axes are zero-based (`0` is the first axis).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymExpr {
    Num(BigRational),
    R0,
    /// Coordinate `axis` of a point symbol.
    Coord(Point, usize),
    /// Boundary constant `c_i`.
    C(i64),
    /// Shifted constant `z_i = a_ij - c_i`.
    Z(i64),
    /// A bare index symbol, used as an argument of opaque functions.
    Index(i64),
    /// Euclidean distance `|p - q|`.
    Norm(Point, Point),
    /// Inner product `(p0 - p1) . (p2 - p3)`.
    Dot([Point; 4]),
    Add(Vec<SymExpr>),
    Mul(Vec<SymExpr>),
    Pow(Box<SymExpr>, BigRational),
    Sum(Box<SymExpr>, SumIndices),
    /// The body evaluated at the inversion `s(x, a_center)` instead of `x`.
    Compose(Box<SymExpr>, i64),
    /// An opaque function, used to state the simplification rules.
    Func(String, Vec<SymExpr>),
}

pub fn rational(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn num(value: i64) -> SymExpr {
    SymExpr::Num(rational(value, 1))
}

pub fn frac(numer: i64, denom: i64) -> SymExpr {
    SymExpr::Num(rational(numer, denom))
}

pub fn r0() -> SymExpr {
    SymExpr::R0
}

pub fn x(axis: usize) -> SymExpr {
    SymExpr::Coord(Point::X, axis)
}

pub fn a(index: i64, axis: usize) -> SymExpr {
    SymExpr::Coord(Point::A(index), axis)
}

pub fn c(index: i64) -> SymExpr {
    SymExpr::C(index)
}

pub fn z(index: i64) -> SymExpr {
    SymExpr::Z(index)
}

pub fn idx(index: i64) -> SymExpr {
    SymExpr::Index(index)
}

pub fn norm(p: Point, q: Point) -> SymExpr {
    SymExpr::Norm(p, q)
}

pub fn dot(p0: Point, p1: Point, p2: Point, p3: Point) -> SymExpr {
    SymExpr::Dot([p0, p1, p2, p3])
}

pub fn pow(base: SymExpr, exponent: BigRational) -> SymExpr {
    SymExpr::Pow(Box::new(base), exponent)
}

pub fn powi(base: SymExpr, exponent: i64) -> SymExpr {
    pow(base, rational(exponent, 1))
}

pub fn sum(body: SymExpr, indices: Vec<i64>, exclusions: Vec<(i64, i64)>) -> SymExpr {
    SymExpr::Sum(Box::new(body), SumIndices::new(indices, exclusions))
}

pub fn compose(body: SymExpr, center: i64) -> SymExpr {
    SymExpr::Compose(Box::new(body), center)
}

pub fn func(name: &str, args: Vec<SymExpr>) -> SymExpr {
    SymExpr::Func(name.to_string(), args)
}

impl SymExpr {
    pub fn zero() -> SymExpr {
        SymExpr::Num(BigRational::zero())
    }

    pub fn one() -> SymExpr {
        SymExpr::Num(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SymExpr::Num(v) if v.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, SymExpr::Num(v) if v.is_one())
    }

    /// Immediate children, in order.
    pub fn children(&self) -> Vec<&SymExpr> {
        match self {
            SymExpr::Add(v) | SymExpr::Mul(v) | SymExpr::Func(_, v) => v.iter().collect(),
            SymExpr::Pow(b, _) | SymExpr::Sum(b, _) | SymExpr::Compose(b, _) => vec![b.as_ref()],
            _ => Vec::new(),
        }
    }

    /// True when the field point `x` occurs anywhere in the tree.
    pub fn contains_x(&self) -> bool {
        match self {
            SymExpr::Coord(p, _) => *p == Point::X,
            SymExpr::Norm(p, q) => *p == Point::X || *q == Point::X,
            SymExpr::Dot(pts) => pts.contains(&Point::X),
            _ => self.children().iter().any(|c| c.contains_x()),
        }
    }

    /// True when a `Sum` node occurs anywhere in the tree, this node included.
    pub fn contains_sum(&self) -> bool {
        matches!(self, SymExpr::Sum(..)) || self.children().iter().any(|c| c.contains_sum())
    }

    /// True when some `Sum` body contains another `Sum`.
    pub fn has_nested_sum(&self) -> bool {
        match self {
            SymExpr::Sum(body, _) => body.contains_sum(),
            _ => self.children().iter().any(|c| c.has_nested_sum()),
        }
    }

    /// True when a symbol of the `c` or `z` family occurs.
    pub fn contains_constants(&self) -> bool {
        match self {
            SymExpr::C(_) | SymExpr::Z(_) => true,
            _ => self.children().iter().any(|c| c.contains_constants()),
        }
    }

    /// Every index label that occurs, bound or free.
    pub fn all_indices(&self) -> BTreeSet<i64> {
        let mut out = BTreeSet::new();
        self.collect_all_indices(&mut out);
        out
    }

    fn collect_all_indices(&self, out: &mut BTreeSet<i64>) {
        match self {
            SymExpr::Coord(p, _) => out.extend(p.index()),
            SymExpr::C(i) | SymExpr::Z(i) | SymExpr::Index(i) => {
                out.insert(*i);
            }
            SymExpr::Norm(p, q) => out.extend(p.index().into_iter().chain(q.index())),
            SymExpr::Dot(pts) => out.extend(pts.iter().filter_map(|p| p.index())),
            SymExpr::Sum(b, ix) => {
                out.extend(ix.indices.iter().copied());
                for &(i, j) in &ix.exclusions {
                    out.insert(i);
                    out.insert(j);
                }
                b.collect_all_indices(out);
            }
            SymExpr::Compose(b, center) => {
                out.insert(*center);
                b.collect_all_indices(out);
            }
            _ => {
                for child in self.children() {
                    child.collect_all_indices(out);
                }
            }
        }
    }

    /// Index labels that occur outside the scope of any sum binding them.
    pub fn free_indices(&self) -> BTreeSet<i64> {
        match self {
            SymExpr::Sum(b, ix) => {
                let mut inner = b.free_indices();
                for &(i, j) in &ix.exclusions {
                    inner.insert(i);
                    inner.insert(j);
                }
                for i in &ix.indices {
                    inner.remove(i);
                }
                inner
            }
            SymExpr::Compose(b, center) => {
                let mut inner = b.free_indices();
                inner.insert(*center);
                inner
            }
            SymExpr::Add(_) | SymExpr::Mul(_) | SymExpr::Pow(..) | SymExpr::Func(..) => {
                let mut out = BTreeSet::new();
                for child in self.children() {
                    out.extend(child.free_indices());
                }
                out
            }
            _ => self.all_indices(),
        }
    }

    /// Relabels every index occurrence, bound or free, through `f`.
    pub fn map_indices(&self, f: &dyn Fn(i64) -> i64) -> SymExpr {
        match self {
            SymExpr::Coord(p, axis) => SymExpr::Coord(p.map_index(f), *axis),
            SymExpr::C(i) => SymExpr::C(f(*i)),
            SymExpr::Z(i) => SymExpr::Z(f(*i)),
            SymExpr::Index(i) => SymExpr::Index(f(*i)),
            SymExpr::Norm(p, q) => SymExpr::Norm(p.map_index(f), q.map_index(f)),
            SymExpr::Dot(pts) => SymExpr::Dot(pts.map(|p| p.map_index(f))),
            SymExpr::Add(v) => SymExpr::Add(v.iter().map(|e| e.map_indices(f)).collect()),
            SymExpr::Mul(v) => SymExpr::Mul(v.iter().map(|e| e.map_indices(f)).collect()),
            SymExpr::Func(n, v) => SymExpr::Func(n.clone(), v.iter().map(|e| e.map_indices(f)).collect()),
            SymExpr::Pow(b, e) => SymExpr::Pow(Box::new(b.map_indices(f)), e.clone()),
            SymExpr::Sum(b, ix) => SymExpr::Sum(Box::new(b.map_indices(f)), ix.map_indices(f)),
            SymExpr::Compose(b, center) => SymExpr::Compose(Box::new(b.map_indices(f)), f(*center)),
            SymExpr::Num(_) | SymExpr::R0 => self.clone(),
        }
    }

    /// Replaces free occurrences of label `from` by `to`, leaving any sum
    /// that rebinds `from` untouched.
    pub fn rename_free_index(&self, from: i64, to: i64) -> SymExpr {
        let swap = |i: i64| if i == from { to } else { i };
        match self {
            SymExpr::Sum(_, ix) if ix.indices.contains(&from) => self.clone(),
            SymExpr::Sum(b, ix) => SymExpr::Sum(
                Box::new(b.rename_free_index(from, to)),
                SumIndices {
                    indices: ix.indices.clone(),
                    exclusions: ix.exclusions.iter().map(|&(i, j)| (swap(i), swap(j))).collect(),
                },
            ),
            SymExpr::Add(v) => SymExpr::Add(v.iter().map(|e| e.rename_free_index(from, to)).collect()),
            SymExpr::Mul(v) => SymExpr::Mul(v.iter().map(|e| e.rename_free_index(from, to)).collect()),
            SymExpr::Func(n, v) => SymExpr::Func(n.clone(), v.iter().map(|e| e.rename_free_index(from, to)).collect()),
            SymExpr::Pow(b, e) => SymExpr::Pow(Box::new(b.rename_free_index(from, to)), e.clone()),
            SymExpr::Compose(b, center) => SymExpr::Compose(Box::new(b.rename_free_index(from, to)), swap(*center)),
            _ => self.map_indices(&swap),
        }
    }

    /// Replaces leaves for which `f` returns a value; other nodes are rebuilt
    /// unchanged. No simplification is applied.
    pub fn replace_leaves(&self, f: &dyn Fn(&SymExpr) -> Option<SymExpr>) -> SymExpr {
        if let Some(r) = f(self) {
            return r;
        }
        match self {
            SymExpr::Add(v) => SymExpr::Add(v.iter().map(|e| e.replace_leaves(f)).collect()),
            SymExpr::Mul(v) => SymExpr::Mul(v.iter().map(|e| e.replace_leaves(f)).collect()),
            SymExpr::Func(n, v) => SymExpr::Func(n.clone(), v.iter().map(|e| e.replace_leaves(f)).collect()),
            SymExpr::Pow(b, e) => SymExpr::Pow(Box::new(b.replace_leaves(f)), e.clone()),
            SymExpr::Sum(b, ix) => SymExpr::Sum(Box::new(b.replace_leaves(f)), ix.clone()),
            SymExpr::Compose(b, center) => SymExpr::Compose(Box::new(b.replace_leaves(f)), *center),
            _ => self.clone(),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// The top-level additive terms.
    pub fn terms(&self) -> Vec<&SymExpr> {
        match self {
            SymExpr::Add(v) => v.iter().collect(),
            e if e.is_zero() => Vec::new(),
            e => vec![e],
        }
    }
}

/// Renames the bound indices of every sum to fresh labels larger than any
/// label in `expr` or in `avoid`.
///
/// Rule 3 refuses to merge sums that share an index; renaming one operand
/// first is the explicit way to combine such sums.
pub fn freshen_bound_indices(expr: &SymExpr, avoid: &BTreeSet<i64>) -> SymExpr {
    let used = expr.all_indices();
    let mut next = used.iter().chain(avoid.iter()).copied().max().unwrap_or(0) + 1;
    freshen(expr, &mut next)
}

fn freshen(expr: &SymExpr, next: &mut i64) -> SymExpr {
    match expr {
        SymExpr::Sum(b, ix) => {
            let mut body = freshen(b, next);
            let mut indices = Vec::with_capacity(ix.indices.len());
            let mut exclusions = ix.exclusions.clone();
            for &old in &ix.indices {
                let new = *next;
                *next += 1;
                body = body.rename_free_index(old, new);
                for pair in exclusions.iter_mut() {
                    if pair.0 == old {
                        pair.0 = new;
                    }
                    if pair.1 == old {
                        pair.1 = new;
                    }
                }
                indices.push(new);
            }
            SymExpr::Sum(Box::new(body), SumIndices::new(indices, exclusions))
        }
        SymExpr::Add(v) => SymExpr::Add(v.iter().map(|e| freshen(e, next)).collect()),
        SymExpr::Mul(v) => SymExpr::Mul(v.iter().map(|e| freshen(e, next)).collect()),
        SymExpr::Func(n, v) => SymExpr::Func(n.clone(), v.iter().map(|e| freshen(e, next)).collect()),
        SymExpr::Pow(b, e) => SymExpr::Pow(Box::new(freshen(b, next)), e.clone()),
        SymExpr::Compose(b, center) => SymExpr::Compose(Box::new(freshen(b, next)), *center),
        _ => expr.clone(),
    }
}

impl ops::Add for SymExpr {
    type Output = SymExpr;
    fn add(self, rhs: SymExpr) -> SymExpr {
        SymExpr::Add(vec![self, rhs])
    }
}

impl ops::Sub for SymExpr {
    type Output = SymExpr;
    fn sub(self, rhs: SymExpr) -> SymExpr {
        SymExpr::Add(vec![self, SymExpr::Mul(vec![num(-1), rhs])])
    }
}

impl ops::Mul for SymExpr {
    type Output = SymExpr;
    fn mul(self, rhs: SymExpr) -> SymExpr {
        SymExpr::Mul(vec![self, rhs])
    }
}

impl ops::Neg for SymExpr {
    type Output = SymExpr;
    fn neg(self) -> SymExpr {
        SymExpr::Mul(vec![num(-1), self])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_and_bound_indices() {
        let e = sum(norm(Point::A(1), Point::A(2)) * c(3), vec![1], vec![(1, 3)]);
        assert_eq!(e.free_indices(), BTreeSet::from([2, 3]));
        assert_eq!(e.all_indices(), BTreeSet::from([1, 2, 3]));
    }

    #[test]
    fn rename_respects_rebinding() {
        let inner = sum(c(1), vec![1], vec![]);
        let e = c(1) * inner.clone();
        let renamed = e.rename_free_index(1, 7);
        assert_eq!(renamed, c(7) * inner);
    }

    #[test]
    fn freshen_gives_disjoint_labels() {
        let e = sum(c(0), vec![0], vec![(0, 5)]);
        let fresh = freshen_bound_indices(&e, &BTreeSet::new());
        match &fresh {
            SymExpr::Sum(b, ix) => {
                assert_eq!(ix.indices, vec![6]);
                assert_eq!(ix.exclusions, vec![(6, 5)]);
                assert_eq!(**b, c(6));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn map_indices_shifts_everything() {
        let e = sum(z(2) * a(3, 0), vec![2], vec![(2, 3)]);
        let shifted = e.map_indices(&|i| i - 4);
        assert_eq!(shifted, sum(z(-2) * a(-1, 0), vec![-2], vec![(-2, -1)]));
    }
}
