//! Numeric checks of procedure u(q) against the fixed-point oracle.
//!
//! The order-q truncated successive approximation `u_q` keeps the boundary
//! constants as symbols. With the oracle's constants substituted, its gap
//! to the oracle potential on the sphere surfaces shrinks by about
//! `2^(q+1)` when the radius is halved.
//!
//! The constants-eliminated output of procedure u(q) is compared the same
//! way, together with its constants. Its observed order is the first
//! degree above `q` at which the series has a nonzero term.

use crate::error::{Result, SymbolicError};
use crate::eval::{numeric_eval, numeric_eval_with_constants, Cluster, IndexInterpretation};
use crate::expr::{Point, SymExpr};
use crate::normal_form::Atom;
use crate::oracle::{fixed_point_oracle, OracleSolution};
use crate::procedure::ProcedureOutput;
use crate::series::series_truncate;
use crate::system::{successive_approximation, FunctionalSystem};

/// Oracle stopping tolerance used by the checks.
pub const ORACLE_TOLERANCE: f64 = 1e-15;

/// Surface directions: the six axis directions and the eight cube diagonals.
fn sample_directions() -> Vec<[f64; 3]> {
    let mut dirs = Vec::new();
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut d = [0.0; 3];
            d[axis] = sign;
            dirs.push(d);
        }
    }
    let c = 1.0 / 3f64.sqrt();
    for sx in [-c, c] {
        for sy in [-c, c] {
            for sz in [-c, c] {
                dirs.push([sx, sy, sz]);
            }
        }
    }
    dirs
}

/// Largest gap between the constants-eliminated output and the oracle:
/// the boundary constants and the potential on every sphere surface.
pub fn truncation_residual(output: &ProcedureOutput, oracle: &OracleSolution) -> Result<f64> {
    let cluster = &oracle.cluster;
    let mut residual: f64 = 0.0;
    for k in 0..cluster.len() {
        let interp = IndexInterpretation::anchor(output.anchor, k);
        let constant = numeric_eval(&output.constant, cluster, cluster.centers[k], &interp)?;
        residual = residual.max((constant - oracle.constants[k]).abs());
        for x in surface_points(cluster, k) {
            let symbolic = numeric_eval(&output.solution, cluster, x, &interp)?;
            residual = residual.max((symbolic - oracle.potential(k, x)).abs());
        }
    }
    Ok(residual)
}

/// Largest gap on the sphere surfaces between the truncated successive
/// approximation `u_q` and the oracle, with the oracle's boundary constants
/// substituted for the symbols `c_i`. `anchor` is the free label of `u_q`.
pub fn series_residual(series: &SymExpr, anchor: i64, oracle: &OracleSolution) -> Result<f64> {
    let cluster = &oracle.cluster;
    let mut residual: f64 = 0.0;
    for k in 0..cluster.len() {
        let interp = IndexInterpretation::anchor(anchor, k);
        for x in surface_points(cluster, k) {
            let symbolic = numeric_eval_with_constants(series, cluster, x, &interp, &oracle.constants)?;
            residual = residual.max((symbolic - oracle.potential(k, x)).abs());
        }
    }
    Ok(residual)
}

fn surface_points(cluster: &Cluster, k: usize) -> Vec<[f64; 3]> {
    let (center, r0) = (cluster.centers[k], cluster.radius);
    sample_directions()
        .into_iter()
        .map(|d| [center[0] + r0 * d[0], center[1] + r0 * d[1], center[2] + r0 * d[2]])
        .collect()
}

/// Residuals at a radius and at half of it, with the observed order.
#[derive(Clone, Copy, Debug)]
pub struct OrderEstimate {
    pub radius: f64,
    pub residual: f64,
    pub residual_half: f64,
    /// `log2(residual / residual_half)`.
    pub slope: f64,
}

fn estimate(
    centers: &[[f64; 3]],
    radius: f64,
    axis: usize,
    residual_of: &dyn Fn(&OracleSolution) -> Result<f64>,
) -> Result<OrderEstimate> {
    let coarse = Cluster::new(centers.to_vec(), radius)?;
    let fine = coarse.with_radius(radius / 2.0)?;
    let residual = residual_of(&fixed_point_oracle(&coarse, axis, ORACLE_TOLERANCE)?)?;
    let residual_half = residual_of(&fixed_point_oracle(&fine, axis, ORACLE_TOLERANCE)?)?;
    Ok(OrderEstimate {
        radius,
        residual,
        residual_half,
        slope: (residual / residual_half).log2(),
    })
}

/// Observed order of the order-`q` truncated successive approximation.
/// The expected value is `q + 1`.
pub fn series_order_estimate(q: u32, axis: usize, centers: &[[f64; 3]], radius: f64) -> Result<OrderEstimate> {
    let series = series_truncate(&successive_approximation(&FunctionalSystem::conductivity(axis), q)?, q)?;
    estimate(centers, radius, axis, &|oracle| {
        series_residual(&series, i64::from(q), oracle)
    })
}

/// Observed order of the constants-eliminated output. It exceeds
/// `q + 1` whenever the series has no terms of the next few degrees.
pub fn order_estimate(output: &ProcedureOutput, centers: &[[f64; 3]], radius: f64) -> Result<OrderEstimate> {
    let axis = axis_of(output)?;
    estimate(centers, radius, axis, &|oracle| truncation_residual(output, oracle))
}

/// The field axis, read from the leading `x_j` term of the solution.
fn axis_of(output: &ProcedureOutput) -> Result<usize> {
    (0..3)
        .find(|&axis| {
            output
                .solution_form
                .contains_atom(&|atom| *atom == Atom::Coord(Point::X, axis))
        })
        .ok_or_else(|| SymbolicError::InvalidInput("solution has no x coordinate".into()))
}

/// `du_k/dx_axis (a_k)` from the symbolic derivative of the solution.
pub fn symbolic_gradient(output: &ProcedureOutput, cluster: &Cluster, k: usize, axis: usize) -> Result<f64> {
    let derivative = output
        .solution_form
        .derivative(axis)?
        .substitute_point(output.anchor)?
        .canonical()?;
    let interp = IndexInterpretation::anchor(output.anchor, k);
    numeric_eval(&derivative.to_expr(), cluster, cluster.centers[k], &interp)
}

/// The same derivative by central differences of the evaluated solution.
pub fn finite_difference_gradient(
    output: &ProcedureOutput,
    cluster: &Cluster,
    k: usize,
    axis: usize,
    step: f64,
) -> Result<f64> {
    let interp = IndexInterpretation::anchor(output.anchor, k);
    let mut plus = cluster.centers[k];
    let mut minus = cluster.centers[k];
    plus[axis] += step;
    minus[axis] -= step;
    let up = numeric_eval(&output.solution, cluster, plus, &interp)?;
    let down = numeric_eval(&output.solution, cluster, minus, &interp)?;
    Ok((up - down) / (2.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedure::procedure_u;

    #[test]
    fn samples_are_unit_vectors() {
        for d in sample_directions() {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_sphere_residual_vanishes() {
        let out = procedure_u(3, 1).unwrap();
        assert_eq!(axis_of(&out).unwrap(), 1);
        let cluster = Cluster::new(vec![[0.3, 0.1, -0.2]], 0.05).unwrap();
        let oracle = fixed_point_oracle(&cluster, 1, ORACLE_TOLERANCE).unwrap();
        assert!(truncation_residual(&out, &oracle).unwrap() < 1e-15);
    }
}
