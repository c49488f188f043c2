//! Expanded normal form: a map from sum metadata to polynomials over atoms
//! and powers of r0 with exact rational coefficients.
//!
//! Series expansion (Rule 6), substitution of the field point, constant
//! substitution and differentiation all act on this form. Converting back
//! to a tree yields one sum per monomial, which is what Rule 1 produces on
//! an expanded body.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Result, SymbolicError};
use crate::expr::{normalize_exclusions, rational, Point, SumIndices, SymExpr};
use crate::simplify::{canon_dot, DotCanon};

/// Indivisible factors of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Coord(Point, usize),
    C(i64),
    Z(i64),
    /// `|p - q|` with `p < q`.
    Norm(Point, Point),
    /// `(p0 - p1) . (p2 - p3)` in the orientation chosen by `canon_dot`.
    Dot([Point; 4]),
}

impl Atom {
    fn indices(&self) -> Vec<i64> {
        match self {
            Atom::Coord(p, _) => p.index().into_iter().collect(),
            Atom::C(i) | Atom::Z(i) => vec![*i],
            Atom::Norm(p, q) => p.index().into_iter().chain(q.index()).collect(),
            Atom::Dot(pts) => pts.iter().filter_map(|p| p.index()).collect(),
        }
    }

    fn contains_x(&self) -> bool {
        match self {
            Atom::Coord(p, _) => *p == Point::X,
            Atom::Norm(p, q) => *p == Point::X || *q == Point::X,
            Atom::Dot(pts) => pts.contains(&Point::X),
            Atom::C(_) | Atom::Z(_) => false,
        }
    }

    pub fn to_expr(&self) -> SymExpr {
        match self {
            Atom::Coord(p, axis) => SymExpr::Coord(*p, *axis),
            Atom::C(i) => SymExpr::C(*i),
            Atom::Z(i) => SymExpr::Z(*i),
            Atom::Norm(p, q) => SymExpr::Norm(*p, *q),
            Atom::Dot(pts) => SymExpr::Dot(*pts),
        }
    }
}

/// A power product of atoms and r0. Coefficients live in [`Poly`].
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub r0: i32,
    pub atoms: BTreeMap<Atom, i32>,
}

impl Monomial {
    fn unit() -> Self {
        Monomial::default()
    }

    fn r0_power(n: i32) -> Self {
        Monomial {
            r0: n,
            atoms: BTreeMap::new(),
        }
    }

    fn atom(atom: Atom, exponent: i32) -> Self {
        let mut atoms = BTreeMap::new();
        if exponent != 0 {
            atoms.insert(atom, exponent);
        }
        Monomial { r0: 0, atoms }
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut atoms = self.atoms.clone();
        for (atom, e) in &other.atoms {
            let entry = atoms.entry(atom.clone()).or_insert(0);
            *entry += e;
            if *entry == 0 {
                atoms.remove(atom);
            }
        }
        Monomial {
            r0: self.r0 + other.r0,
            atoms,
        }
    }

    fn indices(&self) -> BTreeSet<i64> {
        self.atoms.keys().flat_map(|a| a.indices()).collect()
    }

    fn contains_x(&self) -> bool {
        self.atoms.keys().any(|a| a.contains_x())
    }
}

/// A polynomial over atoms and r0.
pub type Poly = BTreeMap<Monomial, BigRational>;

fn poly_constant(value: BigRational) -> Poly {
    let mut p = Poly::new();
    if !value.is_zero() {
        p.insert(Monomial::unit(), value);
    }
    p
}

fn poly_monomial(m: Monomial, coefficient: BigRational) -> Poly {
    let mut p = Poly::new();
    if !coefficient.is_zero() {
        p.insert(m, coefficient);
    }
    p
}

fn poly_add_term(p: &mut Poly, m: Monomial, coefficient: BigRational) {
    if coefficient.is_zero() {
        return;
    }
    let entry = p.entry(m.clone()).or_insert_with(BigRational::zero);
    *entry += coefficient;
    if entry.is_zero() {
        p.remove(&m);
    }
}

fn poly_add(p: &mut Poly, q: &Poly) {
    for (m, v) in q {
        poly_add_term(p, m.clone(), v.clone());
    }
}

fn poly_scale(p: &Poly, factor: &BigRational) -> Poly {
    if factor.is_zero() {
        return Poly::new();
    }
    p.iter().map(|(m, v)| (m.clone(), v * factor)).collect()
}

fn poly_mul(p: &Poly, q: &Poly, order: Option<i32>) -> Poly {
    let mut out = Poly::new();
    for (mp, vp) in p {
        for (mq, vq) in q {
            if let Some(limit) = order {
                if mp.r0 + mq.r0 > limit {
                    continue;
                }
            }
            poly_add_term(&mut out, mp.mul(mq), vp * vq);
        }
    }
    out
}

fn poly_pow(p: &Poly, n: u32, order: Option<i32>) -> Poly {
    let mut out = poly_constant(BigRational::one());
    for _ in 0..n {
        out = poly_mul(&out, p, order);
    }
    out
}

fn poly_truncate(p: &mut Poly, order: Option<i32>) {
    if let Some(limit) = order {
        p.retain(|m, _| m.r0 <= limit);
    }
}

fn min_r0_degree(p: &Poly) -> Option<i32> {
    p.keys().map(|m| m.r0).min()
}

/// Generalised binomial coefficient `binom(top, n)` for rational `top`.
fn binomial(top: &BigRational, n: u32) -> BigRational {
    let mut out = BigRational::one();
    for i in 0..n {
        let i = BigRational::from_integer(BigInt::from(i));
        out = out * (top - &i) / (&i + BigRational::one());
    }
    out
}

/// Sorted bound indices and normalised exclusions of one sum.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SumKey {
    pub indices: Vec<i64>,
    pub exclusions: Vec<(i64, i64)>,
}

impl SumKey {
    fn from_indices(ix: &SumIndices) -> SumKey {
        let mut indices = ix.indices.clone();
        indices.sort_unstable();
        SumKey {
            indices,
            exclusions: ix.normalized_exclusions(),
        }
    }

    fn is_empty(&self) -> bool {
        self.indices.is_empty() && self.exclusions.is_empty()
    }

    /// Union of two keys; the bound index sets must be disjoint.
    fn merge(&self, other: &SumKey) -> Result<SumKey> {
        if let Some(&i) = self.indices.iter().find(|i| other.indices.contains(i)) {
            return Err(SymbolicError::IndexCollision {
                index: i,
                context: "merging sums that bind the same index".into(),
            });
        }
        let mut indices: Vec<i64> = self.indices.iter().chain(&other.indices).copied().collect();
        indices.sort_unstable();
        Ok(SumKey {
            indices,
            exclusions: normalize_exclusions(self.exclusions.iter().chain(&other.exclusions).copied()),
        })
    }

    fn to_indices(&self) -> SumIndices {
        SumIndices::new(self.indices.clone(), self.exclusions.clone())
    }

    fn exclusion_indices(&self) -> BTreeSet<i64> {
        self.exclusions.iter().flat_map(|&(i, j)| [i, j]).collect()
    }
}

/// Expanded normal form of an expression.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NormalForm {
    pub terms: BTreeMap<SumKey, Poly>,
}

impl NormalForm {
    pub fn zero() -> Self {
        NormalForm::default()
    }

    fn from_poly(key: SumKey, poly: Poly) -> Self {
        let mut nf = NormalForm::zero();
        if !poly.is_empty() {
            nf.terms.insert(key, poly);
        }
        nf
    }

    fn constant(value: BigRational) -> Self {
        NormalForm::from_poly(SumKey::default(), poly_constant(value))
    }

    fn atom(atom: Atom) -> Self {
        NormalForm::from_poly(
            SumKey::default(),
            poly_monomial(Monomial::atom(atom, 1), BigRational::one()),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|p| p.is_empty())
    }

    /// Number of monomials across all sums.
    pub fn len(&self) -> usize {
        self.terms.values().map(|p| p.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn add_poly(&mut self, key: SumKey, poly: &Poly) {
        let entry = self.terms.entry(key.clone()).or_default();
        poly_add(entry, poly);
        if entry.is_empty() {
            self.terms.remove(&key);
        }
    }

    fn add_term(&mut self, key: SumKey, m: Monomial, coefficient: BigRational) {
        let entry = self.terms.entry(key.clone()).or_default();
        poly_add_term(entry, m, coefficient);
        if entry.is_empty() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&mut self, other: &NormalForm) {
        for (k, p) in &other.terms {
            self.add_poly(k.clone(), p);
        }
    }

    pub fn scale(&self, factor: &BigRational) -> NormalForm {
        let mut out = NormalForm::zero();
        for (k, p) in &self.terms {
            out.add_poly(k.clone(), &poly_scale(p, factor));
        }
        out
    }

    /// Product of two normal forms. Neither operand may capture an index of
    /// the other (Rule 2).
    pub fn mul(&self, other: &NormalForm, order: Option<i32>) -> Result<NormalForm> {
        let mut out = NormalForm::zero();
        for (k1, p1) in &self.terms {
            for (k2, p2) in &other.terms {
                check_capture(k1, p2, k2)?;
                check_capture(k2, p1, k1)?;
                let key = k1.merge(k2)?;
                out.add_poly(key, &poly_mul(p1, p2, order));
            }
        }
        Ok(out)
    }

    fn pow(&self, n: u32, order: Option<i32>) -> Result<NormalForm> {
        let mut out = NormalForm::constant(BigRational::one());
        for _ in 0..n {
            out = out.mul(self, order)?;
        }
        Ok(out)
    }

    /// Drops every monomial of r0-degree above `order`.
    pub fn truncate(&self, order: i32) -> NormalForm {
        let mut out = self.clone();
        for p in out.terms.values_mut() {
            poly_truncate(p, Some(order));
        }
        out.terms.retain(|_, p| !p.is_empty());
        out
    }

    /// The r0-degrees that occur.
    pub fn r0_degrees(&self) -> BTreeSet<i32> {
        self.terms.values().flat_map(|p| p.keys().map(|m| m.r0)).collect()
    }

    pub fn contains_atom(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        self.terms.values().any(|p| p.keys().any(|m| m.atoms.keys().any(pred)))
    }

    pub fn contains_x(&self) -> bool {
        self.terms.values().any(|p| p.keys().any(|m| m.contains_x()))
    }

    /// Relabels every index through `f` and restores canonical atom order.
    pub fn map_indices(&self, f: &dyn Fn(i64) -> i64) -> Result<NormalForm> {
        let mut out = NormalForm::zero();
        for (k, p) in &self.terms {
            let key = SumKey::from_indices(&k.to_indices().map_indices(f));
            for (m, v) in p {
                if let Some((mm, sign)) = relabel_monomial(m, f)? {
                    out.add_term(key.clone(), mm, v * BigRational::from_integer(sign.into()));
                }
            }
        }
        Ok(out)
    }

    /// Replaces every atom for which `f` yields a normal form by that form.
    ///
    /// Free indices of the replacement may refer to indices bound by the
    /// surrounding sum; its own bound indices must not clash with anything
    /// in the surrounding term.
    pub fn substitute_atoms(&self, f: &dyn Fn(&Atom) -> Option<NormalForm>, order: Option<i32>) -> Result<NormalForm> {
        let mut out = NormalForm::zero();
        for (key, poly) in &self.terms {
            for (m, v) in poly {
                let mut kept = Monomial {
                    r0: m.r0,
                    atoms: BTreeMap::new(),
                };
                let mut replaced = Vec::new();
                for (atom, &e) in &m.atoms {
                    match f(atom) {
                        Some(rep) => {
                            if e < 0 {
                                return Err(SymbolicError::InvalidInput(format!(
                                    "cannot substitute into a negative power of {atom:?}"
                                )));
                            }
                            replaced.push((rep, e as u32));
                        }
                        None => {
                            kept.atoms.insert(atom.clone(), e);
                        }
                    }
                }
                let mut acc = NormalForm::from_poly(key.clone(), poly_monomial(kept, v.clone()));
                for (rep, e) in replaced {
                    let powered = rep.pow(e, order)?;
                    acc = acc.mul_in_context(&powered, order)?;
                }
                out.add(&acc);
            }
        }
        Ok(out)
    }

    /// Product where `self` is the surrounding context and `inserted` may
    /// refer to indices the context binds.
    fn mul_in_context(&self, inserted: &NormalForm, order: Option<i32>) -> Result<NormalForm> {
        let mut out = NormalForm::zero();
        for (k1, p1) in &self.terms {
            let mut context: BTreeSet<i64> = k1.indices.iter().copied().collect();
            context.extend(k1.exclusion_indices());
            for m in p1.keys() {
                context.extend(m.indices());
            }
            for (k2, p2) in &inserted.terms {
                if let Some(&i) = k2.indices.iter().find(|i| context.contains(i)) {
                    return Err(SymbolicError::IndexCollision {
                        index: i,
                        context: "substituted expression binds an index already in use".into(),
                    });
                }
                let key = k1.merge(k2)?;
                out.add_poly(key, &poly_mul(p1, p2, order));
            }
        }
        Ok(out)
    }

    /// Substitutes the field point `x` by the sphere center `a_index`.
    pub fn substitute_point(&self, index: i64) -> Result<NormalForm> {
        let target = Point::A(index);
        let mut out = NormalForm::zero();
        let map = |p: Point| if p == Point::X { target } else { p };
        for (k, p) in &self.terms {
            for (m, v) in p {
                if let Some((mm, sign)) = map_monomial_points(m, &map)? {
                    out.add_term(k.clone(), mm, v * BigRational::from_integer(sign.into()));
                }
            }
        }
        Ok(out)
    }

    /// Partial derivative with respect to the coordinate `axis` of `x`.
    pub fn derivative(&self, axis: usize) -> Result<NormalForm> {
        let mut out = NormalForm::zero();
        for (k, p) in &self.terms {
            for (m, v) in p {
                for (atom, &e) in &m.atoms {
                    if !atom.contains_x() {
                        continue;
                    }
                    let mut rest = m.clone();
                    rest.atoms.remove(atom);
                    let d = atom_derivative(atom, e, axis)?;
                    let rest_nf = NormalForm::from_poly(k.clone(), poly_monomial(rest, v.clone()));
                    out.add(&rest_nf.mul_in_context(&d, None)?);
                }
            }
        }
        Ok(out)
    }

    /// Relabels the bound indices of every monomial canonically and merges
    /// equal monomials.
    ///
    /// Bound indices are ordered by their distance from the free indices in
    /// the exclusion graph and receive the labels `top - 1, top - 2, ...`
    /// (skipping free labels), where `top` is the largest free label or 0.
    /// Ties are broken by trying every order and keeping the smallest
    /// resulting term.
    pub fn canonical(&self) -> Result<NormalForm> {
        let mut out = NormalForm::zero();
        for (k, p) in &self.terms {
            for (m, v) in p {
                let (key, mono, sign) = canonical_term(k, m)?;
                out.add_term(key, mono, v * BigRational::from_integer(sign.into()));
            }
        }
        Ok(out)
    }

    /// Splits off the part that contains atom `target` to the first power
    /// in an unsummed constant monomial, as needed to solve a linear
    /// equation for `target`. Returns the coefficient of `target` and the
    /// remainder.
    pub fn split_linear(&self, target: &Atom) -> std::result::Result<(BigRational, NormalForm), String> {
        let mut coefficient = BigRational::zero();
        let mut rest = NormalForm::zero();
        for (k, p) in &self.terms {
            for (m, v) in p {
                match m.atoms.get(target) {
                    None => rest.add_term(k.clone(), m.clone(), v.clone()),
                    Some(1) if m.atoms.len() == 1 && m.r0 == 0 && k.is_empty() => {
                        coefficient += v;
                    }
                    Some(_) => return Err(format!("the unknown occurs in a non-constant or non-linear term {m:?}")),
                }
            }
        }
        Ok((coefficient, rest))
    }

    /// Converts back to a simplified tree with a deterministic term order:
    /// r0-degree first, then sum metadata, then the monomial.
    pub fn to_expr(&self) -> SymExpr {
        let mut entries: Vec<(&Monomial, &SumKey, &BigRational)> = self
            .terms
            .iter()
            .flat_map(|(k, p)| p.iter().map(move |(m, v)| (m, k, v)))
            .collect();
        entries.sort_by(|a, b| (a.0.r0, a.1, a.0).cmp(&(b.0.r0, b.1, b.0)));
        let terms: Vec<SymExpr> = entries
            .into_iter()
            .map(|(m, k, v)| {
                let body = monomial_expr(m, v);
                if k.is_empty() {
                    body
                } else {
                    SymExpr::Sum(Box::new(body), k.to_indices())
                }
            })
            .collect();
        match terms.len() {
            0 => SymExpr::zero(),
            1 => terms.into_iter().next().expect("one term"),
            _ => SymExpr::Add(terms),
        }
    }
}

impl NormalForm {
    /// Like [`NormalForm::to_expr`], but two monomials that differ only in
    /// one coordinate along `axis` and have opposite coefficients print as a
    /// single term with the difference factor `(p_axis - q_axis)`. The
    /// field point comes first in a difference, otherwise the larger label.
    pub fn to_grouped_expr(&self, axis: usize) -> SymExpr {
        let mut entries: Vec<(Monomial, &SumKey, SymExpr)> = Vec::new();
        for (key, poly) in &self.terms {
            let mut groups: BTreeMap<Monomial, Vec<(Point, BigRational)>> = BTreeMap::new();
            for (m, v) in poly {
                let coords: Vec<Point> = m
                    .atoms
                    .iter()
                    .filter_map(|(atom, &e)| match atom {
                        Atom::Coord(p, a) if *a == axis && e == 1 => Some(*p),
                        _ => None,
                    })
                    .collect();
                if coords.len() == 1 {
                    let mut rest = m.clone();
                    rest.atoms.remove(&Atom::Coord(coords[0], axis));
                    groups.entry(rest).or_default().push((coords[0], v.clone()));
                } else {
                    entries.push((m.clone(), key, monomial_expr(m, v)));
                }
            }
            for (rest, mut members) in groups {
                // Leading point of a difference: x, then larger labels.
                members.sort_by_key(|p| difference_rank(p.0));
                let mut used = vec![false; members.len()];
                for i in 0..members.len() {
                    if used[i] {
                        continue;
                    }
                    used[i] = true;
                    let (lead, ref coefficient) = members[i];
                    let partner = (i + 1..members.len()).find(|&j| !used[j] && members[j].1 == -coefficient.clone());
                    let factor = match partner {
                        Some(j) => {
                            used[j] = true;
                            SymExpr::Add(vec![
                                SymExpr::Coord(lead, axis),
                                SymExpr::Mul(vec![
                                    SymExpr::Num(-BigRational::one()),
                                    SymExpr::Coord(members[j].0, axis),
                                ]),
                            ])
                        }
                        None => SymExpr::Coord(lead, axis),
                    };
                    let mut sort_key = rest.clone();
                    sort_key.atoms.insert(Atom::Coord(lead, axis), 1);
                    entries.push((sort_key, key, attach_factor(monomial_expr(&rest, coefficient), factor)));
                }
            }
        }
        entries.sort_by(|a, b| (a.0.r0, a.1, &a.0).cmp(&(b.0.r0, b.1, &b.0)));
        let terms: Vec<SymExpr> = entries
            .into_iter()
            .flat_map(|(_, k, body)| match body {
                SymExpr::Add(parts) if k.is_empty() => parts,
                body if k.is_empty() => vec![body],
                body => vec![SymExpr::Sum(Box::new(body), k.to_indices())],
            })
            .collect();
        match terms.len() {
            0 => SymExpr::zero(),
            1 => terms.into_iter().next().expect("one term"),
            _ => SymExpr::Add(terms),
        }
    }
}

fn difference_rank(p: Point) -> (u8, std::cmp::Reverse<i64>) {
    match p {
        Point::X => (0, std::cmp::Reverse(0)),
        Point::A(i) => (1, std::cmp::Reverse(i)),
    }
}

/// Inserts `factor` after the numeric coefficient and the power of r0.
fn attach_factor(product: SymExpr, factor: SymExpr) -> SymExpr {
    let mut factors = match product {
        SymExpr::Mul(v) => v,
        one if one.is_one() => Vec::new(),
        other => vec![other],
    };
    let position = factors
        .iter()
        .take_while(|f| {
            matches!(f, SymExpr::Num(_) | SymExpr::R0) || matches!(f, SymExpr::Pow(b, _) if **b == SymExpr::R0)
        })
        .count();
    factors.insert(position, factor);
    if factors.len() == 1 {
        factors.pop().expect("one factor")
    } else {
        SymExpr::Mul(factors)
    }
}

fn monomial_expr(m: &Monomial, coefficient: &BigRational) -> SymExpr {
    let mut factors = Vec::new();
    if !coefficient.is_one() {
        factors.push(SymExpr::Num(coefficient.clone()));
    }
    if m.r0 != 0 {
        factors.push(power_expr(SymExpr::R0, m.r0));
    }
    for (atom, &e) in &m.atoms {
        factors.push(power_expr(atom.to_expr(), e));
    }
    match factors.len() {
        0 => SymExpr::one(),
        1 => factors.pop().expect("one factor"),
        _ => SymExpr::Mul(factors),
    }
}

fn power_expr(base: SymExpr, exponent: i32) -> SymExpr {
    if exponent == 1 {
        base
    } else {
        SymExpr::Pow(Box::new(base), rational(exponent as i64, 1))
    }
}

fn check_capture(binding: &SumKey, poly: &Poly, own: &SumKey) -> Result<()> {
    if binding.indices.is_empty() {
        return Ok(());
    }
    for m in poly.keys() {
        for i in m.indices() {
            if binding.indices.contains(&i) && !own.indices.contains(&i) {
                return Err(SymbolicError::IndexCollision {
                    index: i,
                    context: "a factor would be captured by a sum index".into(),
                });
            }
        }
    }
    Ok(())
}

/// Canonical atom for `|p - q|`; `None` for a zero vector.
fn canon_norm(p: Point, q: Point) -> Option<Atom> {
    if p == q {
        None
    } else {
        Some(Atom::Norm(p.min(q), p.max(q)))
    }
}

/// Rebuilds a monomial after mapping its points. Returns `None` when the
/// monomial vanishes and the sign picked up by reorienting inner products.
fn map_monomial_points(m: &Monomial, map: &dyn Fn(Point) -> Point) -> Result<Option<(Monomial, i32)>> {
    let mut out = Monomial::r0_power(m.r0);
    let mut sign = 1;
    for (atom, &e) in &m.atoms {
        let (factor, factor_sign) = match atom {
            Atom::Coord(p, axis) => (Monomial::atom(Atom::Coord(map(*p), *axis), e), 1),
            Atom::C(_) | Atom::Z(_) => (Monomial::atom(atom.clone(), e), 1),
            Atom::Norm(p, q) => match canon_norm(map(*p), map(*q)) {
                Some(n) => (Monomial::atom(n, e), 1),
                None if e > 0 => return Ok(None),
                None => {
                    return Err(SymbolicError::InvalidInput(
                        "substitution makes a negative power of a zero distance".into(),
                    ))
                }
            },
            Atom::Dot(pts) => match canon_dot(pts.map(map)) {
                DotCanon::Zero if e > 0 => return Ok(None),
                DotCanon::Zero => {
                    return Err(SymbolicError::InvalidInput(
                        "substitution makes a negative power of a zero inner product".into(),
                    ))
                }
                DotCanon::Dot(s, p) => (Monomial::atom(Atom::Dot(p), e), if e % 2 == 0 { 1 } else { s }),
                DotCanon::SquaredNorm(s, p, q) => {
                    (Monomial::atom(Atom::Norm(p, q), 2 * e), if e % 2 == 0 { 1 } else { s })
                }
            },
        };
        out = out.mul(&factor);
        sign *= factor_sign;
    }
    Ok(Some((out, sign)))
}

fn relabel_monomial(m: &Monomial, f: &dyn Fn(i64) -> i64) -> Result<Option<(Monomial, i32)>> {
    let mut pre = Monomial::r0_power(m.r0);
    // C and Z carry indices outside of points; map them first.
    let mut rest = Monomial::r0_power(0);
    for (atom, &e) in &m.atoms {
        match atom {
            Atom::C(i) => pre = pre.mul(&Monomial::atom(Atom::C(f(*i)), e)),
            Atom::Z(i) => pre = pre.mul(&Monomial::atom(Atom::Z(f(*i)), e)),
            other => {
                rest.atoms.insert(other.clone(), e);
            }
        }
    }
    let mapped = map_monomial_points(&rest, &|p| p.map_index(f))?;
    Ok(mapped.map(|(mm, s)| (pre.mul(&mm), s)))
}

fn canonical_term(key: &SumKey, m: &Monomial) -> Result<(SumKey, Monomial, i32)> {
    let bound: BTreeSet<i64> = key.indices.iter().copied().collect();
    let mut free: BTreeSet<i64> = m.indices();
    free.extend(key.exclusion_indices());
    for i in &bound {
        free.remove(i);
    }
    if bound.is_empty() {
        let (mm, s) = relabel_monomial(m, &|i| i)?.expect("identity relabel keeps the monomial");
        return Ok((key.clone(), mm, s));
    }

    // Distances from the free labels through exclusion edges.
    let mut depth: BTreeMap<i64, usize> = BTreeMap::new();
    let mut queue: VecDeque<i64> = free.iter().copied().collect();
    for &i in &free {
        depth.insert(i, 0);
    }
    while let Some(i) = queue.pop_front() {
        let d = depth[&i];
        for &(p, q) in &key.exclusions {
            let other = if p == i {
                q
            } else if q == i {
                p
            } else {
                continue;
            };
            if let Entry::Vacant(slot) = depth.entry(other) {
                slot.insert(d + 1);
                queue.push_back(other);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
    for &i in &bound {
        groups
            .entry(depth.get(&i).copied().unwrap_or(usize::MAX))
            .or_default()
            .push(i);
    }

    let top = free.iter().next_back().copied().unwrap_or(0);
    let mut targets = Vec::with_capacity(bound.len());
    let mut label = top - 1;
    while targets.len() < bound.len() {
        if !free.contains(&label) {
            targets.push(label);
        }
        label -= 1;
    }

    let group_list: Vec<Vec<i64>> = groups.into_values().collect();
    let mut best: Option<(SumKey, Monomial, i32)> = None;
    let mut assignment: Vec<i64> = Vec::with_capacity(bound.len());
    let mut candidates = Vec::new();
    enumerate_orders(&group_list, 0, &mut assignment, &mut candidates);
    for order in candidates {
        let map: BTreeMap<i64, i64> = order.iter().copied().zip(targets.iter().copied()).collect();
        let f = |i: i64| map.get(&i).copied().unwrap_or(i);
        let new_key = SumKey::from_indices(&key.to_indices().map_indices(&f));
        let (mm, s) = relabel_monomial(m, &f)?.expect("bijective relabel keeps the monomial");
        let better = match &best {
            None => true,
            Some((bk, bm, _)) => (&new_key, &mm) < (bk, bm),
        };
        if better {
            best = Some((new_key, mm, s));
        }
    }
    Ok(best.expect("at least one ordering"))
}

fn enumerate_orders(groups: &[Vec<i64>], level: usize, current: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    if level == groups.len() {
        out.push(current.clone());
        return;
    }
    let mut group = groups[level].clone();
    permute(&mut group, 0, &mut |perm| {
        let len = current.len();
        current.extend_from_slice(perm);
        enumerate_orders(groups, level + 1, current, out);
        current.truncate(len);
    });
}

fn permute(items: &mut [i64], start: usize, visit: &mut dyn FnMut(&[i64])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

fn coord_poly(p: Point, axis: usize) -> Poly {
    poly_monomial(Monomial::atom(Atom::Coord(p, axis), 1), BigRational::one())
}

fn coord_difference(p: Point, q: Point, axis: usize) -> Poly {
    let mut out = coord_poly(p, axis);
    poly_add(&mut out, &poly_scale(&coord_poly(q, axis), &-BigRational::one()));
    out
}

fn atom_derivative(atom: &Atom, exponent: i32, axis: usize) -> Result<NormalForm> {
    let e = BigRational::from_integer(exponent.into());
    let (power_rest, inner): (Monomial, Poly) = match atom {
        Atom::Coord(Point::X, i) => {
            let d = if *i == axis {
                BigRational::one()
            } else {
                BigRational::zero()
            };
            (Monomial::atom(atom.clone(), exponent - 1), poly_constant(d))
        }
        Atom::Norm(p, q) => {
            // d|p - q|^e / dx = e |p - q|^(e-2) (x - other)_axis, whichever
            // endpoint is x.
            let other = if *p == Point::X { *q } else { *p };
            (
                Monomial::atom(atom.clone(), exponent - 2),
                coord_difference(Point::X, other, axis),
            )
        }
        Atom::Dot([p0, p1, p2, p3]) => {
            let weight = |p: &Point| if *p == Point::X { 1 } else { 0 };
            let first = weight(p0) - weight(p1);
            let second = weight(p2) - weight(p3);
            let mut out = Poly::new();
            if first != 0 {
                let term = coord_difference(*p2, *p3, axis);
                poly_add(&mut out, &poly_scale(&term, &BigRational::from_integer(first.into())));
            }
            if second != 0 {
                let term = coord_difference(*p0, *p1, axis);
                poly_add(&mut out, &poly_scale(&term, &BigRational::from_integer(second.into())));
            }
            (Monomial::atom(atom.clone(), exponent - 1), out)
        }
        _ => (Monomial::unit(), Poly::new()),
    };
    let scaled = poly_scale(&inner, &e);
    let mut out = NormalForm::zero();
    out.add_poly(
        SumKey::default(),
        &poly_mul(&poly_monomial(power_rest, BigRational::one()), &scaled, None),
    );
    Ok(out)
}

/// Converts a simplified tree into normal form, expanding powers and
/// compositions as series in r0 truncated at `order` when one is given.
pub fn to_normal_form(e: &SymExpr, order: Option<i32>) -> Result<NormalForm> {
    let nf = match e {
        SymExpr::Num(v) => NormalForm::constant(v.clone()),
        SymExpr::R0 => NormalForm::from_poly(
            SumKey::default(),
            poly_monomial(Monomial::r0_power(1), BigRational::one()),
        ),
        SymExpr::Coord(p, axis) => NormalForm::atom(Atom::Coord(*p, *axis)),
        SymExpr::C(i) => NormalForm::atom(Atom::C(*i)),
        SymExpr::Z(i) => NormalForm::atom(Atom::Z(*i)),
        SymExpr::Index(i) => {
            return Err(SymbolicError::SeriesFailure(format!(
                "bare index symbol {i} has no algebraic value"
            )))
        }
        SymExpr::Norm(p, q) => match canon_norm(*p, *q) {
            Some(atom) => NormalForm::atom(atom),
            None => NormalForm::zero(),
        },
        SymExpr::Dot(pts) => match canon_dot(*pts) {
            DotCanon::Zero => NormalForm::zero(),
            DotCanon::Dot(s, p) => NormalForm::atom(Atom::Dot(p)).scale(&BigRational::from_integer(s.into())),
            DotCanon::SquaredNorm(s, p, q) => NormalForm::from_poly(
                SumKey::default(),
                poly_monomial(Monomial::atom(Atom::Norm(p, q), 2), BigRational::from_integer(s.into())),
            ),
        },
        SymExpr::Add(v) => {
            let mut out = NormalForm::zero();
            for child in v {
                out.add(&to_normal_form(child, order)?);
            }
            out
        }
        SymExpr::Mul(v) => {
            let mut out = NormalForm::constant(BigRational::one());
            for child in v {
                out = out.mul(&to_normal_form(child, order)?, order)?;
            }
            out
        }
        SymExpr::Pow(b, exponent) => power_series(&to_normal_form(b, order)?, exponent, order)?,
        SymExpr::Sum(b, ix) => {
            let inner = to_normal_form(b, order)?;
            let key = SumKey::from_indices(ix);
            let mut out = NormalForm::zero();
            for (k, p) in &inner.terms {
                out.add_poly(key.merge(k)?, p);
            }
            out
        }
        SymExpr::Compose(b, center) => {
            let limit = order.ok_or_else(|| {
                SymbolicError::SeriesFailure("composition with the inversion needs a truncation order".into())
            })?;
            let inner = to_normal_form(b, order)?;
            compose_with_inversion(&inner, *center, limit)?
        }
        SymExpr::Func(name, _) => {
            return Err(SymbolicError::SeriesFailure(format!(
                "opaque function {name} has no series in r0"
            )))
        }
    };
    if let Some(limit) = order {
        check_analytic(&nf)?;
        Ok(nf.truncate(limit))
    } else {
        Ok(nf)
    }
}

fn check_analytic(nf: &NormalForm) -> Result<()> {
    for p in nf.terms.values() {
        if let Some(m) = p.keys().find(|m| m.r0 < 0) {
            return Err(SymbolicError::SeriesFailure(format!(
                "negative power r0^{} is not analytic at r0 = 0",
                m.r0
            )));
        }
    }
    Ok(())
}

/// `base^exponent` as a series in r0. Non-integer or negative exponents
/// need an unsummed base whose lowest r0-degree part is a single monomial.
fn power_series(base: &NormalForm, exponent: &BigRational, order: Option<i32>) -> Result<NormalForm> {
    if exponent.is_integer() && !exponent.is_negative() {
        let n = exponent
            .to_integer()
            .to_u32()
            .ok_or_else(|| SymbolicError::SeriesFailure("exponent too large".into()))?;
        return base.pow(n, order);
    }
    if base.is_zero() {
        return Err(SymbolicError::SeriesFailure("negative power of zero".into()));
    }
    if base.terms.len() != 1 || !base.terms.contains_key(&SumKey::default()) {
        return Err(SymbolicError::SeriesFailure(
            "negative or fractional power of an indefinite sum".into(),
        ));
    }
    let poly = &base.terms[&SumKey::default()];
    let lowest = min_r0_degree(poly).expect("non-empty polynomial");
    let leading: Vec<(&Monomial, &BigRational)> = poly.iter().filter(|(m, _)| m.r0 == lowest).collect();
    if leading.len() != 1 {
        return Err(SymbolicError::SeriesFailure(
            "the lowest-order part of a powered base is not a single monomial".into(),
        ));
    }
    let (lead_mono, lead_coef) = (leading[0].0.clone(), leading[0].1.clone());

    // lead^exponent
    let scaled_degree = BigRational::from_integer(lead_mono.r0.into()) * exponent;
    if !scaled_degree.is_integer() {
        return Err(SymbolicError::SeriesFailure("fractional power of r0".into()));
    }
    let mut lead_power = Monomial::r0_power(scaled_degree.to_integer().to_i32().unwrap_or(i32::MAX));
    for (atom, &e) in &lead_mono.atoms {
        let scaled = BigRational::from_integer(e.into()) * exponent;
        if !scaled.is_integer() {
            return Err(SymbolicError::SeriesFailure(format!("fractional power of {atom:?}")));
        }
        let scaled = scaled.to_integer().to_i32().unwrap_or(i32::MAX);
        if scaled < 0 && !matches!(atom, Atom::Norm(..)) {
            return Err(SymbolicError::SeriesFailure(format!(
                "negative power of {atom:?} may vanish"
            )));
        }
        lead_power.atoms.insert(atom.clone(), scaled);
    }
    let coef_power = if exponent.is_integer() {
        let n = exponent.to_integer().to_i32().unwrap_or(i32::MIN);
        num_traits::pow::Pow::pow(&lead_coef, n)
    } else if lead_coef.is_one() {
        BigRational::one()
    } else {
        return Err(SymbolicError::SeriesFailure(
            "fractional power of a rational coefficient".into(),
        ));
    };

    // t = rest / lead, all of positive r0-degree.
    let mut lead_inverse = Monomial::r0_power(-lead_mono.r0);
    for (atom, &e) in &lead_mono.atoms {
        lead_inverse.atoms.insert(atom.clone(), -e);
    }
    let inv_coef = BigRational::one() / &lead_coef;
    let mut t = Poly::new();
    for (m, v) in poly.iter().filter(|(m, _)| m.r0 != lowest) {
        poly_add_term(&mut t, m.mul(&lead_inverse), v * &inv_coef);
    }

    let mut series = poly_constant(BigRational::one());
    if !t.is_empty() {
        let limit = order
            .ok_or_else(|| SymbolicError::SeriesFailure("a non-polynomial power needs a truncation order".into()))?;
        let max_terms = (limit - lead_power.r0).max(0) as u32;
        let mut t_power = poly_constant(BigRational::one());
        let relative_order = Some(limit - lead_power.r0);
        for n in 1..=max_terms {
            t_power = poly_mul(&t_power, &t, relative_order);
            if t_power.is_empty() {
                break;
            }
            poly_add(&mut series, &poly_scale(&t_power, &binomial(exponent, n)));
        }
    }
    let lead_poly = poly_monomial(lead_power, coef_power);
    Ok(NormalForm::from_poly(
        SumKey::default(),
        poly_mul(&lead_poly, &series, order),
    ))
}

/// A difference vector `coefficient * (p - q)` used while substituting the
/// inversion into inner products.
type VectorTerm = (Poly, Point, Point);

/// Composes a normal form with the inversion `s(x, a_center)` and expands
/// the result as a series in r0 truncated at `order`.
///
/// With `eps = r0^2`, `N = |x - a_c|` and `s = a_c + eps (x - a_c) / N^2`:
/// coordinates become `a_c + eps N^-2 (x - a_c)`, `|s - a_c|` becomes
/// `eps / N`, and `|s - p|^e` for another point `p` becomes
/// `D^e (1 + t)^(e/2)` with `D = |a_c - p|` and
/// `t = (2 eps N^-2 (x - a_c).(a_c - p) + eps^2 N^-2) / D^2`.
pub fn compose_with_inversion(nf: &NormalForm, center: i64, order: i32) -> Result<NormalForm> {
    let mut out = NormalForm::zero();
    for (key, poly) in &nf.terms {
        if key.indices.contains(&center) {
            return Err(SymbolicError::IndexCollision {
                index: center,
                context: "composition center is bound inside the composed body".into(),
            });
        }
        let mut acc = Poly::new();
        for (m, v) in poly {
            let mut product = poly_monomial(Monomial::r0_power(m.r0), v.clone());
            for (atom, &e) in &m.atoms {
                if product.is_empty() {
                    break;
                }
                let factor = substitute_inversion(atom, e, center, order)?;
                product = poly_mul(&product, &factor, Some(order));
            }
            poly_add(&mut acc, &product);
        }
        check_analytic(&NormalForm::from_poly(key.clone(), acc.clone()))?;
        out.add_poly(key.clone(), &acc);
    }
    Ok(out)
}

fn substitute_inversion(atom: &Atom, exponent: i32, center: i64, order: i32) -> Result<Poly> {
    let ac = Point::A(center);
    let one = BigRational::one();
    let eps_n2 = {
        let mut m = Monomial::r0_power(2);
        m.atoms.insert(Atom::Norm(Point::X, ac), -2);
        m
    };
    match atom {
        Atom::C(_) | Atom::Z(_) => Ok(poly_monomial(Monomial::atom(atom.clone(), exponent), one)),
        Atom::Coord(p, axis) => {
            if *p != Point::X {
                return Ok(poly_monomial(Monomial::atom(atom.clone(), exponent), one));
            }
            if exponent < 0 {
                return Err(SymbolicError::SeriesFailure(
                    "negative power of a coordinate under composition".into(),
                ));
            }
            let mut base = coord_poly(ac, *axis);
            let shift = poly_mul(
                &poly_monomial(eps_n2.clone(), one.clone()),
                &coord_difference(Point::X, ac, *axis),
                None,
            );
            poly_add(&mut base, &shift);
            Ok(poly_pow(&base, exponent as u32, Some(order)))
        }
        Atom::Norm(p, q) => {
            let other = if *p == Point::X {
                *q
            } else if *q == Point::X {
                *p
            } else {
                return Ok(poly_monomial(Monomial::atom(atom.clone(), exponent), one));
            };
            if other == ac {
                if exponent < 0 {
                    return Err(SymbolicError::SeriesFailure(
                        "negative power of |x - a_c| under inversion about a_c gives r0^-n".into(),
                    ));
                }
                let mut m = Monomial::r0_power(2 * exponent);
                m.atoms.insert(Atom::Norm(Point::X, ac), -exponent);
                return Ok(poly_monomial(m, one));
            }
            let d_atom = canon_norm(ac, other).expect("distinct points");
            let dot_poly = match canon_dot([Point::X, ac, ac, other]) {
                DotCanon::Dot(s, pts) => {
                    poly_monomial(Monomial::atom(Atom::Dot(pts), 1), BigRational::from_integer(s.into()))
                }
                _ => unreachable!("x - a_c and a_c - p are distinct nonzero differences"),
            };
            let mut scale = eps_n2.clone();
            scale.atoms.insert(d_atom.clone(), -2);
            let mut t = poly_mul(
                &poly_monomial(scale.clone(), BigRational::from_integer(2.into())),
                &dot_poly,
                None,
            );
            let mut second = scale;
            second.r0 += 2;
            poly_add_term(&mut t, second, one.clone());

            let half_e = rational(exponent as i64, 2);
            let mut series = poly_constant(one.clone());
            let mut t_power = poly_constant(one.clone());
            for n in 1..=((order / 2).max(0) as u32) {
                t_power = poly_mul(&t_power, &t, Some(order));
                if t_power.is_empty() {
                    break;
                }
                poly_add(&mut series, &poly_scale(&t_power, &binomial(&half_e, n)));
            }
            let lead = poly_monomial(Monomial::atom(d_atom, exponent), one);
            Ok(poly_mul(&lead, &series, Some(order)))
        }
        Atom::Dot(pts) => {
            if !pts.contains(&Point::X) {
                return Ok(poly_monomial(Monomial::atom(atom.clone(), exponent), one));
            }
            if exponent < 0 {
                return Err(SymbolicError::SeriesFailure(
                    "negative power of an inner product under composition".into(),
                ));
            }
            let left = substitute_difference(pts[0], pts[1], ac, &eps_n2);
            let right = substitute_difference(pts[2], pts[3], ac, &eps_n2);
            let mut base = Poly::new();
            for (cl, p0, p1) in &left {
                for (cr, p2, p3) in &right {
                    let pair = match canon_dot([*p0, *p1, *p2, *p3]) {
                        DotCanon::Zero => continue,
                        DotCanon::Dot(s, p) => {
                            poly_monomial(Monomial::atom(Atom::Dot(p), 1), BigRational::from_integer(s.into()))
                        }
                        DotCanon::SquaredNorm(s, p, q) => {
                            poly_monomial(Monomial::atom(Atom::Norm(p, q), 2), BigRational::from_integer(s.into()))
                        }
                    };
                    let coefficient = poly_mul(cl, cr, Some(order));
                    poly_add(&mut base, &poly_mul(&coefficient, &pair, Some(order)));
                }
            }
            Ok(poly_pow(&base, exponent as u32, Some(order)))
        }
    }
}

/// `s - q` (or `p - s`) written as a combination of point differences.
fn substitute_difference(p: Point, q: Point, ac: Point, eps_n2: &Monomial) -> Vec<VectorTerm> {
    let one = || poly_constant(BigRational::one());
    let minus_one = || poly_constant(-BigRational::one());
    let image = |other: Point, sign: bool| -> Vec<VectorTerm> {
        // x - other  ->  (a_c - other) + eps N^-2 (x - a_c)
        let mut out = Vec::new();
        let s = if sign { one() } else { minus_one() };
        if ac != other {
            out.push((s.clone(), ac, other));
        }
        out.push((
            poly_mul(&s, &poly_monomial(eps_n2.clone(), BigRational::one()), None),
            Point::X,
            ac,
        ));
        out
    };
    match (p == Point::X, q == Point::X) {
        (true, true) => Vec::new(),
        (true, false) => image(q, true),
        (false, true) => image(p, false),
        (false, false) => vec![(one(), p, q)],
    }
}
