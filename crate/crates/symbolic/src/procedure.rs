//! Procedure u(q): the truncated series solution with the boundary
//! constants eliminated.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Result, SymbolicError};
use crate::expr::{Point, SymExpr};
use crate::normal_form::{to_normal_form, Atom, NormalForm};
use crate::simplify::simplify;
use crate::system::{successive_approximation, FunctionalSystem};

/// Largest truncation order the procedure supports.
pub const MAX_ORDER: u32 = 6;

/// Result of procedure u(q). The anchor sphere carries the label `anchor`
/// (equal to `q`); bound indices are labelled `anchor - 1, anchor - 2, ...`
/// along each exclusion chain.
#[derive(Clone, Debug)]
pub struct ProcedureOutput {
    pub order: u32,
    pub anchor: i64,
    /// `u_k(x)` to `O(r0^(q+1))` with every constant eliminated.
    pub solution: SymExpr,
    /// `c_k` to `O(r0^(q+1))`.
    pub constant: SymExpr,
    pub solution_form: NormalForm,
    pub constant_form: NormalForm,
}

/// Shifts every index label by `m - q`, so that `a_q` becomes `a_m` and
/// `a_m`, `z_m` become `a_{2m-q}`, `z_{2m-q}`. Negative labels are fine.
pub fn reindex(e: &SymExpr, q: i64, m: i64) -> SymExpr {
    e.map_indices(&|i| i + m - q)
}

fn reindex_form(nf: &NormalForm, q: i64, m: i64) -> Result<NormalForm> {
    nf.map_indices(&|i| i + m - q)
}

fn coordinate_minus(index: i64, axis: usize, subtrahend: &NormalForm) -> Result<NormalForm> {
    let mut out = to_normal_form(&SymExpr::Coord(Point::A(index), axis), None)?;
    out.add(&subtrahend.scale(&-BigRational::one()));
    Ok(out)
}

/// Procedure u(q) for the conductivity system with the field along `axis`.
pub fn procedure_u(q: u32, axis: usize) -> Result<ProcedureOutput> {
    procedure_u_for(&FunctionalSystem::conductivity(axis), q)
}

/// Procedure u(q) for an arbitrary system.
///
/// 1. Build `u_q(x)` and truncate it at order `q`.
/// 2. Evaluate at `x = a_q`, substitute `c_m -> a_mj - z_m` and solve the
///    linear condition `u_q(a_q) = 0` for `z_q`.
/// 3. While the solution still contains `z` symbols, replace each `z_m` by
///    the solution reindexed to anchor `m`, and truncate.
/// 4. Substitute `c_m -> a_mj - reindex(z_q, q, m)` into `u_q(x)` and
///    truncate.
pub fn procedure_u_for(system: &FunctionalSystem, q: u32) -> Result<ProcedureOutput> {
    if q == 0 || q > MAX_ORDER {
        return Err(SymbolicError::InvalidInput(format!(
            "procedure u(q) supports 1 <= q <= {MAX_ORDER}, got {q}"
        )));
    }
    let order = q as i32;
    let anchor = i64::from(q);
    let axis = system.axis;

    let raw = simplify(&successive_approximation(system, q)?)?;
    let expr = to_normal_form(&raw, Some(order))?.canonical()?;

    let at_anchor = expr.substitute_point(anchor)?;
    let z_for_c = |atom: &Atom| -> Option<NormalForm> {
        match atom {
            Atom::C(m) => {
                let z = to_normal_form(&SymExpr::Z(*m), None).ok()?;
                coordinate_minus(*m, axis, &z).ok()
            }
            _ => None,
        }
    };
    let zexpr = at_anchor.substitute_atoms(&z_for_c, Some(order))?.canonical()?;

    let target = Atom::Z(anchor);
    let (coefficient, rest) = zexpr
        .split_linear(&target)
        .map_err(|reason| SymbolicError::NonSolvable { index: anchor, reason })?;
    if coefficient.is_zero() {
        return Err(SymbolicError::NonSolvable {
            index: anchor,
            reason: "the unknown does not occur".into(),
        });
    }
    let mut z_solution = rest.scale(&(-BigRational::one() / coefficient)).canonical()?;

    let mut rounds = 0;
    while z_solution.contains_atom(&|a| matches!(a, Atom::Z(_))) {
        rounds += 1;
        if rounds > MAX_ORDER as usize + 1 {
            return Err(SymbolicError::NonSolvable {
                index: anchor,
                reason: "constant elimination does not terminate".into(),
            });
        }
        let previous = z_solution.clone();
        let replace = |atom: &Atom| -> Option<NormalForm> {
            match atom {
                Atom::Z(m) if *m != anchor => reindex_form(&previous, anchor, *m).ok(),
                _ => None,
            }
        };
        z_solution = previous
            .substitute_atoms(&replace, Some(order))?
            .truncate(order)
            .canonical()?;
    }

    let replace_c = |atom: &Atom| -> Option<NormalForm> {
        match atom {
            Atom::C(m) => {
                let z = reindex_form(&z_solution, anchor, *m).ok()?;
                coordinate_minus(*m, axis, &z).ok()
            }
            _ => None,
        }
    };
    let solution_form = expr
        .substitute_atoms(&replace_c, Some(order))?
        .truncate(order)
        .canonical()?;
    if solution_form.contains_atom(&|a| matches!(a, Atom::C(_) | Atom::Z(_))) {
        return Err(SymbolicError::NonSolvable {
            index: anchor,
            reason: "constants remain after substitution".into(),
        });
    }
    let constant_form = coordinate_minus(anchor, axis, &z_solution)?.canonical()?;

    Ok(ProcedureOutput {
        order: q,
        anchor,
        solution: simplify(&solution_form.to_expr())?,
        constant: simplify(&constant_form.to_expr())?,
        solution_form,
        constant_form,
    })
}

/// Canonical normal form of any expression free of compositions, for
/// structural comparison with procedure output.
pub fn canonical_form(e: &SymExpr) -> Result<NormalForm> {
    to_normal_form(&simplify(e)?, None)?.canonical()
}
