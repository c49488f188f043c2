//! Symbolic series solution of the functional equations for a cluster of
//! equal spheres.
//!
//! Expressions are trees with indefinite sums whose index ranges are never
//! fixed. Simplification keeps sums flat, expansion and series truncation
//! bring bodies to a canonical polynomial form in r0, and procedure u(q)
//! eliminates the boundary constants to give the potential near each
//! sphere to a chosen order. Numeric evaluation and an independent
//! fixed-point solver check the symbolic output.

pub mod error;
pub mod eval;
pub mod expr;
pub mod normal_form;
pub mod oracle;
pub mod procedure;
pub mod reference;
pub mod render;
pub mod series;
pub mod simplify;
pub mod system;
pub mod verify;

pub use error::{Result, SymbolicError};
pub use eval::{numeric_eval, numeric_eval_with_constants, Cluster, IndexInterpretation};
pub use expr::{Point, SumIndices, SymExpr};
pub use normal_form::NormalForm;
pub use oracle::{fixed_point_oracle, fixed_point_oracle_with, OracleOptions, OracleSolution};
pub use procedure::{procedure_u, procedure_u_for, reindex, ProcedureOutput};
pub use render::{render, Format, Naming};
pub use series::series_truncate;
pub use simplify::{expand, simplify};
pub use system::{successive_approximation, FunctionalSystem};
pub use verify::{order_estimate, series_order_estimate, series_residual, truncation_residual, OrderEstimate};
