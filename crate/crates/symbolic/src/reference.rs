//! Closed-form approximations of the potential near a sphere, transcribed
//! term by term, for comparison with the output of procedure u(q).
//!
//! Labels follow the procedure's convention: the anchor sphere `k` is
//! labelled `anchor`, the first summation index `m` is `anchor - 1` and the
//! second `l` is `anchor - 2`, with exclusions `m != k` and `l != m`.

use crate::expr::{a, dot, num, powi, r0, sum, x, Point, SymExpr};

fn distance(p: Point, q: Point, power: i64) -> SymExpr {
    powi(crate::expr::norm(p, q), power)
}

/// `c_k = a_kj - r0^3 sum_{m != k} (a_kj - a_mj) / |a_k - a_m|^3`.
pub fn constant_third_order(anchor: i64, axis: usize) -> SymExpr {
    let (k, m) = (anchor, anchor - 1);
    a(k, axis)
        - sum(
            powi(r0(), 3) * (a(k, axis) - a(m, axis)) * distance(Point::A(k), Point::A(m), -3),
            vec![m],
            vec![(m, k)],
        )
}

/// The terms of `u_k(x)` through `r0^3` once the constants are eliminated.
pub fn potential_third_order(anchor: i64, axis: usize) -> SymExpr {
    let (k, m) = (anchor, anchor - 1);
    let (ak, am) = (Point::A(k), Point::A(m));
    x(axis) - a(k, axis)
        + sum(
            powi(r0(), 3) * (a(k, axis) - a(m, axis)) * distance(ak, am, -3),
            vec![m],
            vec![(m, k)],
        )
        - sum(
            powi(r0(), 3) * (x(axis) - a(m, axis)) * distance(Point::X, am, -3),
            vec![m],
            vec![(m, k)],
        )
}

/// The terms of `u_k(x)` through `r0^6` once the constants are eliminated.
pub fn potential_sixth_order(anchor: i64, axis: usize) -> SymExpr {
    let (k, m, l) = (anchor, anchor - 1, anchor - 2);
    let (ak, am, al) = (Point::A(k), Point::A(m), Point::A(l));
    let chain = |body: SymExpr| sum(body, vec![m, l], vec![(m, k), (l, m)]);
    let r6 = || powi(r0(), 6);
    potential_third_order(anchor, axis)
        - chain(r6() * (a(k, axis) - a(m, axis)) * distance(ak, am, -3) * distance(am, al, -3))
        + chain(r6() * (x(axis) - a(m, axis)) * distance(Point::X, am, -3) * distance(am, al, -3))
        - chain(
            num(3)
                * r6()
                * (a(m, axis) - a(l, axis))
                * dot(Point::X, am, am, al)
                * distance(Point::X, am, -3)
                * distance(am, al, -5),
        )
        + chain(
            num(3)
                * r6()
                * (a(m, axis) - a(l, axis))
                * dot(ak, am, am, al)
                * distance(ak, am, -3)
                * distance(am, al, -5),
        )
}

/// `du_k/dx_j (a_k)` through `r0^6` for the field along axis `j`, coded
/// directly from the closed-form gradient. The sums run over `m != k` and
/// `s != m`.
pub fn gradient_sixth_order(centers: &[[f64; 3]], radius: f64, k: usize, axis: usize) -> f64 {
    let others: Vec<usize> = (0..3).filter(|&i| i != axis).collect();
    let diff = |p: usize, q: usize| -> [f64; 3] {
        let (u, v) = (centers[p], centers[q]);
        [u[0] - v[0], u[1] - v[1], u[2] - v[2]]
    };
    let norm = |d: [f64; 3]| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let anisotropy = |d: [f64; 3]| 2.0 * d[axis] * d[axis] - d[others[0]] * d[others[0]] - d[others[1]] * d[others[1]];
    let n = centers.len();
    let r3 = radius.powi(3);
    let r6 = radius.powi(6);
    let mut value = 1.0;
    for m in (0..n).filter(|&m| m != k) {
        let d = diff(k, m);
        let dn = norm(d);
        value += r3 * anisotropy(d) / dn.powi(5);
        for s in (0..n).filter(|&s| s != m) {
            let e = diff(m, s);
            let en = norm(e);
            let denominator = dn.powi(5) * en.powi(5);
            value += r6 * anisotropy(d) * anisotropy(e) / denominator;
            for &o in &others {
                value += 9.0 * r6 * d[axis] * e[axis] * d[o] * e[o] / denominator;
            }
        }
    }
    value
}
