//! Text and s-expression rendering of expressions.
//!
//! With an anchor label, the anchor prints as `k` and bound labels
//! `anchor - 1, anchor - 2, ...` print as `m, l, s, t, w, v`. Other labels
//! print as numbers.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::expr::{Point, SymExpr};

const CHAIN_NAMES: [&str; 6] = ["m", "l", "s", "t", "w", "v"];

/// Output syntax.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Sexpr,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "sexpr" => Ok(Format::Sexpr),
            other => Err(format!("unknown format {other:?} (expected text or sexpr)")),
        }
    }
}

/// Naming of index labels.
#[derive(Clone, Copy, Debug)]
pub struct Naming {
    pub anchor: Option<i64>,
}

impl Naming {
    pub fn label(&self, i: i64) -> String {
        if let Some(k) = self.anchor {
            if i == k {
                return "k".into();
            }
            let depth = k - i;
            if depth >= 1 && (depth as usize) <= CHAIN_NAMES.len() {
                return CHAIN_NAMES[depth as usize - 1].into();
            }
        }
        i.to_string()
    }

    fn point(&self, p: Point) -> String {
        match p {
            Point::X => "x".into(),
            Point::A(i) => format!("a_{}", self.label(i)),
        }
    }
}

fn axis_label(axis: usize) -> usize {
    axis + 1
}

/// Renders `e` in the chosen syntax.
pub fn render(e: &SymExpr, format: Format, naming: Naming) -> String {
    match format {
        Format::Text => text(e, naming, 0),
        Format::Sexpr => sexpr(e, naming),
    }
}

fn rational_text(v: &BigRational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

// Precedence levels: 0 sum of terms, 1 product, 2 power base.
fn text(e: &SymExpr, n: Naming, level: u8) -> String {
    let wrap = |s: String, needed: u8| if level > needed { format!("({s})") } else { s };
    match e {
        SymExpr::Num(v) => {
            let s = rational_text(v);
            if v.is_negative() || !v.is_integer() {
                wrap(s, 0)
            } else {
                s
            }
        }
        SymExpr::R0 => "r0".into(),
        SymExpr::Coord(Point::X, axis) => format!("x_{}", axis_label(*axis)),
        SymExpr::Coord(Point::A(i), axis) => format!("a_{}{}", n.label(*i), axis_label(*axis)),
        SymExpr::C(i) => format!("c_{}", n.label(*i)),
        SymExpr::Z(i) => format!("z_{}", n.label(*i)),
        SymExpr::Index(i) => format!("a_{}", n.label(*i)),
        SymExpr::Norm(p, q) => format!("|{} - {}|", n.point(*p), n.point(*q)),
        SymExpr::Dot(pts) => format!(
            "({} - {}).({} - {})",
            n.point(pts[0]),
            n.point(pts[1]),
            n.point(pts[2]),
            n.point(pts[3])
        ),
        SymExpr::Add(v) => {
            let mut out = String::new();
            for (i, t) in v.iter().enumerate() {
                let (negative, magnitude) = split_sign(t);
                let body = text(&magnitude, n, 1);
                match (i, negative) {
                    (0, false) => out.push_str(&body),
                    (0, true) => out.push_str(&format!("-{body}")),
                    (_, false) => out.push_str(&format!(" + {body}")),
                    (_, true) => out.push_str(&format!(" - {body}")),
                }
            }
            wrap(out, 0)
        }
        SymExpr::Mul(v) => {
            let (negative, magnitude) = split_sign(e);
            if negative {
                return wrap(format!("-{}", text(&magnitude, n, 1)), 0);
            }
            let mut parts = Vec::new();
            flatten_product(v, n, &mut parts);
            wrap(parts.join(" * "), 1)
        }
        SymExpr::Pow(b, exponent) => {
            let exp = rational_text(exponent);
            let exp = if exponent.is_integer() && !exponent.is_negative() {
                exp
            } else {
                format!("({exp})")
            };
            format!("{}^{}", text(b, n, 3), exp)
        }
        SymExpr::Sum(b, ix) => {
            let mut conditions: Vec<String> = ix.indices.iter().map(|&i| n.label(i)).collect::<Vec<_>>();
            let exclusions: Vec<String> = ix
                .exclusions
                .iter()
                .map(|&(i, j)| {
                    // Print the bound label on the left.
                    let (left, right) = if ix.indices.contains(&i) && (!ix.indices.contains(&j) || i < j) {
                        (i, j)
                    } else {
                        (j, i)
                    };
                    format!("{} != {}", n.label(left), n.label(right))
                })
                .collect();
            if !exclusions.is_empty() {
                conditions = exclusions;
            }
            format!("sum[{}]({})", conditions.join(", "), text(b, n, 0))
        }
        SymExpr::Compose(b, center) => format!("({})@s_{}", text(b, n, 0), n.label(*center)),
        SymExpr::Func(name, args) => {
            let parts: Vec<String> = args.iter().map(|a| text(a, n, 0)).collect();
            format!("{name}({})", parts.join(", "))
        }
    }
}

/// Renders the factors of a product, descending into nested products
/// whose sign is not negative.
fn flatten_product(factors: &[SymExpr], n: Naming, parts: &mut Vec<String>) {
    for f in factors {
        match f {
            SymExpr::Mul(inner) if !split_sign(f).0 => flatten_product(inner, n, parts),
            _ => parts.push(text(f, n, 2)),
        }
    }
}

/// Splits a leading negative numeric factor off a term.
fn split_sign(e: &SymExpr) -> (bool, SymExpr) {
    match e {
        SymExpr::Num(v) if v.is_negative() => (true, SymExpr::Num(-v.clone())),
        SymExpr::Mul(v) => match v.first() {
            Some(SymExpr::Num(c)) if c.is_negative() => {
                let mut rest = v.clone();
                let magnitude = -c.clone();
                if magnitude.is_one() {
                    rest.remove(0);
                } else {
                    rest[0] = SymExpr::Num(magnitude);
                }
                let body = if rest.len() == 1 {
                    rest.pop().expect("one factor")
                } else {
                    SymExpr::Mul(rest)
                };
                (true, body)
            }
            _ => (false, e.clone()),
        },
        SymExpr::Sum(b, ix) => {
            let (negative, body) = split_sign(b);
            (negative, SymExpr::Sum(Box::new(body), ix.clone()))
        }
        _ => (false, e.clone()),
    }
}

fn sexpr(e: &SymExpr, n: Naming) -> String {
    let list = |head: &str, items: Vec<String>| format!("({head} {})", items.join(" "));
    match e {
        SymExpr::Num(v) => rational_text(v),
        SymExpr::R0 => "r0".into(),
        SymExpr::Coord(p, axis) => format!("(coord {} {})", n.point(*p), axis_label(*axis)),
        SymExpr::C(i) => format!("(c {})", n.label(*i)),
        SymExpr::Z(i) => format!("(z {})", n.label(*i)),
        SymExpr::Index(i) => format!("(index {})", n.label(*i)),
        SymExpr::Norm(p, q) => format!("(norm {} {})", n.point(*p), n.point(*q)),
        SymExpr::Dot(pts) => list("dot", pts.iter().map(|p| n.point(*p)).collect()),
        SymExpr::Add(v) => list("+", v.iter().map(|t| sexpr(t, n)).collect()),
        SymExpr::Mul(v) => list("*", v.iter().map(|t| sexpr(t, n)).collect()),
        SymExpr::Pow(b, exponent) => format!("(^ {} {})", sexpr(b, n), rational_text(exponent)),
        SymExpr::Sum(b, ix) => format!(
            "(sum {} ({}) ({}))",
            sexpr(b, n),
            ix.indices.iter().map(|&i| n.label(i)).collect::<Vec<_>>().join(" "),
            ix.exclusions
                .iter()
                .map(|&(i, j)| format!("({} {})", n.label(i), n.label(j)))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        SymExpr::Compose(b, center) => format!("(compose {} {})", sexpr(b, n), n.label(*center)),
        SymExpr::Func(name, args) => list(name, args.iter().map(|a| sexpr(a, n)).collect()),
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self, Format::Text, Naming { anchor: None }))
    }
}
