//! Rule 6: power-series truncation of sum bodies in r0.

use crate::error::{Result, SymbolicError};
use crate::expr::SymExpr;
use crate::normal_form::to_normal_form;
use crate::simplify::simplify;

/// Replaces every sum body by its power series in r0 about 0, dropping
/// terms of degree above `order`, and returns the simplified result in
/// canonical term order.
///
/// Compositions with the inversion are resolved here, since only their
/// series is representable.
pub fn series_truncate(e: &SymExpr, order: u32) -> Result<SymExpr> {
    let limit = i32::try_from(order).map_err(|_| SymbolicError::InvalidInput(format!("order {order} is too large")))?;
    let nf = to_normal_form(&simplify(e)?, Some(limit))?.canonical()?;
    simplify(&nf.to_expr())
}
