//! The generalized functional system and its successive approximations.

use crate::error::Result;
use crate::expr::{c, compose, num, powi, r0, sum, x, Point, SymExpr};
use crate::simplify::expand;

/// Label that stands for the summation center inside [`FunctionalSystem::kernel`].
pub const KERNEL_CENTER: i64 = 0;

/// The pieces of `u_k = s c_k + f(x) + sum_{m != k} g(x, a_m) (u_m o s)(x, a_m)`.
///
/// The substitution map is always the sphere inversion
/// `s(x, a) = a + r0^2 (x - a) / |x - a|^2`, which is what composition
/// nodes denote.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSystem {
    /// Coefficient `s` of the constant `c_k`.
    pub constant_sign: i64,
    /// Driving term `f(x)`.
    pub driving: SymExpr,
    /// Kernel `g(x, a_m)`, written with `a_m = a_{KERNEL_CENTER}`.
    pub kernel: SymExpr,
    /// Zero-based axis `j` of the applied field; it fixes `z_k = a_kj - c_k`.
    pub axis: usize,
}

impl FunctionalSystem {
    /// The conductivity system: `u_k = -sum r0/|x - a_m| u_m(x*_m) + x_j - c_k`.
    pub fn conductivity(axis: usize) -> Self {
        FunctionalSystem {
            constant_sign: -1,
            driving: x(axis),
            kernel: num(-1) * r0() * powi(crate::expr::norm(Point::X, Point::A(KERNEL_CENTER)), -1),
            axis,
        }
    }

    /// The same kernel and driving term with the constant entering as `+c_k`,
    /// the sign convention of the general form.
    pub fn general_form(axis: usize) -> Self {
        FunctionalSystem {
            constant_sign: 1,
            ..FunctionalSystem::conductivity(axis)
        }
    }

    /// The kernel with its center relabelled to `center`.
    pub fn kernel_at(&self, center: i64) -> SymExpr {
        self.kernel
            .map_indices(&|i| if i == KERNEL_CENTER { center } else { i })
    }

    fn constant(&self, index: i64) -> SymExpr {
        num(self.constant_sign) * c(index)
    }
}

/// The q-th successive approximation with the anchor labelled `q`.
///
/// `u_0 = s c_0 + f(x)` and
/// `u_q = s c_q + f(x) + sum(expand(g(x, a_{q-1}) (u_{q-1} o s)(x, a_{q-1})), [q-1])`
/// where the sum excludes `q - 1 = q`. Compositions are kept symbolic;
/// [`crate::series_truncate`] resolves them.
pub fn successive_approximation(system: &FunctionalSystem, q: u32) -> Result<SymExpr> {
    let mut current = expand(&(system.constant(0) + system.driving.clone()))?;
    for level in 1..=i64::from(q) {
        let previous = level - 1;
        let summand = expand(&(system.kernel_at(previous) * compose(current, previous)))?;
        let next =
            system.constant(level) + system.driving.clone() + sum(summand, vec![previous], vec![(previous, level)]);
        current = expand(&next)?;
    }
    Ok(current)
}
