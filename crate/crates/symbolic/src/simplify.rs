//! Automatic simplification (Rules 1–4) and algebraic expansion (Rule 5).
//!
//! Simplification runs bottom-up. Each constructor below returns a node on
//! which no rule applies, so a single pass reaches the fixed point.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Result, SymbolicError};
use crate::expr::{freshen_bound_indices, normalize_exclusions, Point, SumIndices, SymExpr};

/// Applies Rules 1–4 together with constant folding and flattening until no
/// rule applies.
pub fn simplify(e: &SymExpr) -> Result<SymExpr> {
    match e {
        SymExpr::Num(_) | SymExpr::R0 | SymExpr::Coord(..) | SymExpr::C(_) | SymExpr::Z(_) | SymExpr::Index(_) => {
            Ok(e.clone())
        }
        SymExpr::Norm(p, q) => Ok(norm_node(*p, *q)),
        SymExpr::Dot(pts) => Ok(dot_node(*pts)),
        SymExpr::Add(v) => {
            let children = v.iter().map(simplify).collect::<Result<Vec<_>>>()?;
            Ok(make_add(children))
        }
        SymExpr::Mul(v) => {
            let children = v.iter().map(simplify).collect::<Result<Vec<_>>>()?;
            make_mul(children)
        }
        SymExpr::Pow(b, exp) => make_pow(simplify(b)?, exp.clone()),
        SymExpr::Sum(b, ix) => make_sum(simplify(b)?, ix.clone()),
        SymExpr::Compose(b, center) => make_compose(simplify(b)?, *center),
        SymExpr::Func(name, args) => Ok(SymExpr::Func(
            name.clone(),
            args.iter().map(simplify).collect::<Result<Vec<_>>>()?,
        )),
    }
}

/// `|p - q|` with the endpoints ordered; a zero vector gives 0.
pub(crate) fn norm_node(p: Point, q: Point) -> SymExpr {
    if p == q {
        SymExpr::zero()
    } else {
        SymExpr::Norm(p.min(q), p.max(q))
    }
}

/// Canonical orientation of an inner product of two point differences.
pub(crate) enum DotCanon {
    Zero,
    /// `sign * Dot(points)`.
    Dot(i32, [Point; 4]),
    /// `sign * |p - q|^2`.
    SquaredNorm(i32, Point, Point),
}

pub(crate) fn canon_dot(pts: [Point; 4]) -> DotCanon {
    let [mut p0, mut p1, mut p2, mut p3] = pts;
    if p0 == p1 || p2 == p3 {
        return DotCanon::Zero;
    }
    let mut sign = 1;
    if p0 > p1 {
        std::mem::swap(&mut p0, &mut p1);
        sign = -sign;
    }
    if p2 > p3 {
        std::mem::swap(&mut p2, &mut p3);
        sign = -sign;
    }
    if (p0, p1) == (p2, p3) {
        return DotCanon::SquaredNorm(sign, p0, p1);
    }
    if (p0, p1) > (p2, p3) {
        std::mem::swap(&mut p0, &mut p2);
        std::mem::swap(&mut p1, &mut p3);
    }
    DotCanon::Dot(sign, [p0, p1, p2, p3])
}

pub(crate) fn dot_node(pts: [Point; 4]) -> SymExpr {
    match canon_dot(pts) {
        DotCanon::Zero => SymExpr::zero(),
        DotCanon::Dot(1, p) => SymExpr::Dot(p),
        DotCanon::Dot(_, p) => SymExpr::Mul(vec![crate::expr::num(-1), SymExpr::Dot(p)]),
        DotCanon::SquaredNorm(sign, p, q) => {
            let square = SymExpr::Pow(Box::new(SymExpr::Norm(p, q)), crate::expr::rational(2, 1));
            if sign == 1 {
                square
            } else {
                SymExpr::Mul(vec![crate::expr::num(-1), square])
            }
        }
    }
}

/// Flattens nested sums of terms and folds numeric terms (placed last).
pub(crate) fn make_add(children: Vec<SymExpr>) -> SymExpr {
    let mut constant = BigRational::zero();
    let mut terms = Vec::new();
    let mut stack: Vec<SymExpr> = children.into_iter().rev().collect();
    while let Some(child) = stack.pop() {
        match child {
            SymExpr::Add(inner) => stack.extend(inner.into_iter().rev()),
            SymExpr::Num(v) => constant += v,
            other => terms.push(other),
        }
    }
    if !constant.is_zero() {
        terms.push(SymExpr::Num(constant));
    }
    match terms.len() {
        0 => SymExpr::zero(),
        1 => terms.pop().expect("one term"),
        _ => SymExpr::Add(terms),
    }
}

/// Flattens products, folds numeric factors (placed first) and applies
/// Rule 2: every factor is pulled into the sums present in the product,
/// whose index lists are concatenated.
pub(crate) fn make_mul(children: Vec<SymExpr>) -> Result<SymExpr> {
    let mut coefficient = BigRational::one();
    let mut factors = Vec::new();
    let mut sums: Vec<(SymExpr, SumIndices)> = Vec::new();
    let mut stack: Vec<SymExpr> = children.into_iter().rev().collect();
    while let Some(child) = stack.pop() {
        match child {
            SymExpr::Mul(inner) => stack.extend(inner.into_iter().rev()),
            SymExpr::Num(v) => coefficient *= v,
            SymExpr::Sum(body, ix) => sums.push((*body, ix)),
            other => factors.push(other),
        }
    }
    if coefficient.is_zero() {
        return Ok(SymExpr::zero());
    }
    if sums.is_empty() {
        if !coefficient.is_one() {
            factors.insert(0, SymExpr::Num(coefficient));
        }
        return Ok(match factors.len() {
            0 => SymExpr::one(),
            1 => factors.pop().expect("one factor"),
            _ => SymExpr::Mul(factors),
        });
    }

    // Rule 2 (and Rule 3 for the sums among themselves).
    let mut merged = SumIndices::default();
    let mut bound: BTreeSet<i64> = BTreeSet::new();
    for (_, ix) in &sums {
        for &i in &ix.indices {
            if !bound.insert(i) {
                return Err(SymbolicError::IndexCollision {
                    index: i,
                    context: "two sums in one product bind the same index".into(),
                });
            }
        }
        merged.indices.extend(ix.indices.iter().copied());
        merged.exclusions.extend(ix.exclusions.iter().copied());
    }
    // Factors that themselves contain sums stay outside: pulling them in
    // would nest one sum inside another.
    let (inside, outside): (Vec<SymExpr>, Vec<SymExpr>) = factors.into_iter().partition(|f| !f.contains_sum());
    let factors = inside;
    for factor in &factors {
        if let Some(&i) = factor.free_indices().intersection(&bound).next() {
            return Err(SymbolicError::IndexCollision {
                index: i,
                context: "a factor pulled into a sum would be captured by its index".into(),
            });
        }
    }
    for (k, (body, own)) in sums.iter().enumerate() {
        let others: BTreeSet<i64> = sums
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != k)
            .flat_map(|(_, (_, ix))| ix.indices.iter().copied())
            .collect();
        let mut free = body.free_indices();
        for i in &own.indices {
            free.remove(i);
        }
        if let Some(&i) = free.intersection(&others).next() {
            return Err(SymbolicError::IndexCollision {
                index: i,
                context: "a sum body would be captured by another sum's index".into(),
            });
        }
    }
    let mut body_factors = vec![SymExpr::Num(coefficient)];
    body_factors.extend(factors);
    body_factors.extend(sums.into_iter().map(|(b, _)| b));
    let pulled = make_sum(make_mul(body_factors)?, merged)?;
    if outside.is_empty() {
        return Ok(pulled);
    }
    let mut product = outside;
    match pulled {
        SymExpr::Mul(inner) => product.extend(inner),
        other => product.push(other),
    }
    Ok(SymExpr::Mul(product))
}

/// Builds a sum node, applying Rule 4 (zero body), Rule 1 (body is a sum
/// of terms) and Rule 3 (body is itself a sum).
pub(crate) fn make_sum(body: SymExpr, ix: SumIndices) -> Result<SymExpr> {
    if ix.indices.is_empty() && ix.exclusions.is_empty() {
        return Ok(body);
    }
    match body {
        b if b.is_zero() => Ok(SymExpr::zero()),
        SymExpr::Add(terms) => {
            let parts = terms
                .into_iter()
                .map(|t| make_sum(t, ix.clone()))
                .collect::<Result<Vec<_>>>()?;
            Ok(make_add(parts))
        }
        SymExpr::Sum(inner, inner_ix) => {
            if let Some(&i) = ix.indices.iter().find(|i| inner_ix.indices.contains(i)) {
                return Err(SymbolicError::IndexCollision {
                    index: i,
                    context: "nested sums bind the same index".into(),
                });
            }
            let mut indices = ix.indices.clone();
            indices.extend(inner_ix.indices.iter().copied());
            let exclusions = normalize_exclusions(ix.exclusions.iter().chain(&inner_ix.exclusions).copied());
            make_sum(*inner, SumIndices::new(indices, exclusions))
        }
        other if other.contains_sum() => {
            // A sum below the top of the body: distribute so that it
            // surfaces as a term and Rules 1 and 3 can apply.
            let terms = expand_terms(&other)?;
            if terms.len() == 1 && !matches!(terms[0], SymExpr::Sum(..)) && terms[0] == other {
                return Err(SymbolicError::InvalidInput(format!(
                    "the sum inside {other} cannot be brought to the top of the body"
                )));
            }
            let parts = terms
                .into_iter()
                .map(|t| make_sum(t, ix.clone()))
                .collect::<Result<Vec<_>>>()?;
            Ok(make_add(parts))
        }
        other => Ok(SymExpr::Sum(
            Box::new(other),
            SumIndices::new(ix.indices.clone(), ix.normalized_exclusions()),
        )),
    }
}

fn is_integer(r: &BigRational) -> bool {
    r.is_integer()
}

/// Builds a power node. Integer powers of products are distributed, powers
/// of powers fold when that is valid, and positive integer powers of
/// expressions containing sums are expanded with fresh indices per copy.
pub(crate) fn make_pow(base: SymExpr, exponent: BigRational) -> Result<SymExpr> {
    if exponent.is_zero() {
        return Ok(SymExpr::one());
    }
    if exponent.is_one() {
        return Ok(base);
    }
    match base {
        SymExpr::Num(v) if is_integer(&exponent) => {
            let n = exponent
                .to_integer()
                .to_i32()
                .ok_or_else(|| SymbolicError::InvalidInput("exponent too large".into()))?;
            if v.is_zero() && n < 0 {
                return Err(SymbolicError::InvalidInput("zero raised to a negative power".into()));
            }
            Ok(SymExpr::Num(num_traits::pow::Pow::pow(&v, n)))
        }
        SymExpr::Pow(inner, e1)
            if matches!(*inner, SymExpr::Norm(..)) || (is_integer(&exponent) && is_integer(&e1)) =>
        {
            make_pow(*inner, e1 * exponent)
        }
        SymExpr::Mul(factors) if is_integer(&exponent) => {
            let powered = factors
                .into_iter()
                .map(|f| make_pow(f, exponent.clone()))
                .collect::<Result<Vec<_>>>()?;
            make_mul(powered)
        }
        b if b.contains_sum() => {
            let n = if is_integer(&exponent) && exponent.is_positive() {
                exponent.to_integer().to_usize()
            } else {
                None
            };
            let n = n.ok_or_else(|| {
                SymbolicError::InvalidInput("an indefinite sum can only be raised to a positive integer power".into())
            })?;
            let mut copies = vec![b.clone()];
            let mut avoid = b.all_indices();
            for _ in 1..n {
                let fresh = freshen_bound_indices(&b, &avoid);
                avoid.extend(fresh.all_indices());
                copies.push(fresh);
            }
            make_mul(copies)
        }
        b => Ok(SymExpr::Pow(Box::new(b), exponent)),
    }
}

/// Builds a composition node. Composition distributes over sums of terms
/// and over indefinite sums, and disappears on `x`-free bodies.
pub(crate) fn make_compose(inner: SymExpr, center: i64) -> Result<SymExpr> {
    if !inner.contains_x() {
        return Ok(inner);
    }
    match inner {
        SymExpr::Add(terms) => {
            let parts = terms
                .into_iter()
                .map(|t| make_compose(t, center))
                .collect::<Result<Vec<_>>>()?;
            Ok(make_add(parts))
        }
        SymExpr::Sum(body, ix) => {
            if ix.indices.contains(&center) {
                return Err(SymbolicError::IndexCollision {
                    index: center,
                    context: "composition center is bound by the sum it enters".into(),
                });
            }
            make_sum(make_compose(*body, center)?, ix)
        }
        other => Ok(SymExpr::Compose(Box::new(other), center)),
    }
}

/// Rule 5: distributes products over sums of terms everywhere, including
/// inside sum bodies and composition bodies, then simplifies.
pub fn expand(e: &SymExpr) -> Result<SymExpr> {
    let simplified = simplify(e)?;
    let terms = expand_terms(&simplified)?;
    simplify(&make_add(terms))
}

fn expand_terms(e: &SymExpr) -> Result<Vec<SymExpr>> {
    match e {
        SymExpr::Add(v) => {
            let mut out = Vec::new();
            for child in v {
                out.extend(expand_terms(child)?);
            }
            Ok(out)
        }
        SymExpr::Mul(v) => {
            let mut acc = vec![SymExpr::one()];
            for factor in v {
                let factor_terms = expand_terms(factor)?;
                let mut next = Vec::with_capacity(acc.len() * factor_terms.len());
                for left in &acc {
                    for right in &factor_terms {
                        let product = make_mul(vec![left.clone(), right.clone()])?;
                        next.extend(split_terms(product));
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
        SymExpr::Pow(b, exp) => {
            let base_terms = expand_terms(b)?;
            let small_power =
                exp.is_integer() && exp.is_positive() && exp.to_integer().to_u32().is_some_and(|n| n <= 64);
            if base_terms.len() > 1 && small_power {
                let n = exp.to_integer().to_u32().expect("checked above");
                let repeated = SymExpr::Mul(vec![make_add(base_terms); n as usize]);
                expand_terms(&repeated)
            } else {
                Ok(vec![make_pow(make_add(base_terms), exp.clone())?])
            }
        }
        SymExpr::Sum(b, ix) => {
            let mut out = Vec::new();
            for t in expand_terms(b)? {
                out.extend(split_terms(make_sum(t, ix.clone())?));
            }
            Ok(out)
        }
        SymExpr::Compose(b, center) => {
            let mut out = Vec::new();
            for t in expand_terms(b)? {
                out.extend(split_terms(make_compose(t, *center)?));
            }
            Ok(out)
        }
        SymExpr::Func(name, args) => Ok(vec![SymExpr::Func(
            name.clone(),
            args.iter().map(expand).collect::<Result<Vec<_>>>()?,
        )]),
        other => Ok(vec![other.clone()]),
    }
}

fn split_terms(e: SymExpr) -> Vec<SymExpr> {
    match e {
        SymExpr::Add(v) => v,
        z if z.is_zero() => Vec::new(),
        other => vec![other],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    fn f(i: i64) -> SymExpr {
        func("f", vec![idx(i)])
    }

    fn g(i: i64) -> SymExpr {
        func("g", vec![idx(i)])
    }

    #[test]
    fn rule_one_splits_sum_over_terms() {
        let e = sum(f(1) + g(1), vec![1], vec![]);
        let expected = SymExpr::Add(vec![sum(f(1), vec![1], vec![]), sum(g(1), vec![1], vec![])]);
        assert_eq!(simplify(&e).unwrap(), expected);
    }

    #[test]
    fn rule_two_pulls_factor_inside() {
        let e = f(1) * sum(g(2), vec![2], vec![]);
        let expected = sum(SymExpr::Mul(vec![f(1), g(2)]), vec![2], vec![]);
        assert_eq!(simplify(&e).unwrap(), expected);
    }

    #[test]
    fn rule_three_flattens_nested_sums() {
        let body = func("f", vec![idx(1), idx(2)]);
        let e = sum(sum(body.clone(), vec![2], vec![]), vec![1], vec![]);
        assert_eq!(simplify(&e).unwrap(), sum(body, vec![1, 2], vec![]));
    }

    #[test]
    fn rule_three_rejects_shared_index() {
        let e = sum(sum(f(1), vec![1], vec![]), vec![1], vec![]);
        assert!(matches!(
            simplify(&e),
            Err(SymbolicError::IndexCollision { index: 1, .. })
        ));
    }

    #[test]
    fn rule_two_rejects_capture() {
        let e = f(2) * sum(g(2), vec![2], vec![]);
        assert!(matches!(simplify(&e), Err(SymbolicError::IndexCollision { .. })));
    }

    #[test]
    fn renaming_resolves_collision() {
        let inner = sum(f(1), vec![1], vec![]);
        let renamed = freshen_bound_indices(&inner, &BTreeSet::from([1]));
        let e = sum(renamed, vec![1], vec![]);
        let s = simplify(&e).unwrap();
        assert!(!s.has_nested_sum());
    }

    #[test]
    fn rule_four_erases_zero_sum() {
        assert_eq!(simplify(&sum(num(0), vec![1], vec![])).unwrap(), SymExpr::zero());
        let cancelling = sum(f(1) - f(1) * num(1) + num(0) * g(1), vec![1], vec![]);
        let s = expand(&cancelling).unwrap();
        // Expansion does not collect like terms; the sum of the two
        // opposite terms remains, but nothing nests.
        assert!(!s.has_nested_sum());
    }

    #[test]
    fn numbers_fold() {
        let e = num(2) * (num(3) + num(4)) * r0();
        assert_eq!(simplify(&e).unwrap(), SymExpr::Mul(vec![num(14), r0()]));
    }

    #[test]
    fn norms_and_dots_are_oriented() {
        assert_eq!(
            simplify(&norm(Point::A(2), Point::X)).unwrap(),
            norm(Point::X, Point::A(2))
        );
        assert_eq!(simplify(&norm(Point::A(2), Point::A(2))).unwrap(), SymExpr::zero());
        let flipped = dot(Point::A(1), Point::X, Point::A(1), Point::A(2));
        assert_eq!(
            simplify(&flipped).unwrap(),
            SymExpr::Mul(vec![num(-1), dot(Point::X, Point::A(1), Point::A(1), Point::A(2))])
        );
        let square = dot(Point::A(1), Point::X, Point::X, Point::A(1));
        assert_eq!(
            simplify(&square).unwrap(),
            SymExpr::Mul(vec![num(-1), powi(norm(Point::X, Point::A(1)), 2)])
        );
    }

    #[test]
    fn expand_distributes_inside_sum_bodies() {
        let e = sum((f(1) + g(1)) * (r0() + num(1)), vec![1], vec![]);
        let s = expand(&e).unwrap();
        assert_eq!(s.terms().len(), 4);
        for t in s.terms() {
            assert!(matches!(t, SymExpr::Sum(..)));
        }
    }

    #[test]
    fn compose_distributes_and_drops_on_constants() {
        let e = compose(c(1) + x(0) + sum(x(0) * c(2), vec![2], vec![]), 5);
        let s = simplify(&e).unwrap();
        let terms = s.terms();
        assert_eq!(terms.len(), 3);
        assert_eq!(*terms[0], c(1));
        assert_eq!(*terms[1], compose(x(0), 5));
        assert!(matches!(terms[2], SymExpr::Sum(..)));
    }

    #[test]
    fn power_of_sum_uses_fresh_indices() {
        let e = powi(sum(f(1), vec![1], vec![]), 2);
        let s = simplify(&e).unwrap();
        match s {
            SymExpr::Sum(_, ix) => assert_eq!(ix.indices.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
