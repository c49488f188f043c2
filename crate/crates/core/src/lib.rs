//! Effective conductivity of triply periodic suspensions of equal,
//! highly conducting spheres.
//!
//! The crate covers the numeric side of the pipeline: periodic sphere
//! configurations and RSA packings, cubic lattice sums, the periodic
//! kernels `E_pq`, structural and convolution sums over a configuration,
//! and the assembled conductivity tensor with its anisotropy metric.

pub mod conductivity;
pub mod eisenstein;
pub mod geometry;
pub mod lattice_sums;
pub mod structural_sums;
pub mod summation;

pub use conductivity::{AsymptoticFormula, ConductivityReport, Contrast};
pub use eisenstein::{Axis, Component, EisensteinEvaluator};
pub use geometry::{PeriodicDisplacement, SphereConfiguration};
pub use lattice_sums::LatticeSumTable;
pub use structural_sums::StructuralSums;
