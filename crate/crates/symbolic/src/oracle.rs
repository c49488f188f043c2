//! Independent numeric solution of the functional equations
//! `u_k(x) = -sum_{m != k} r0/|x - a_m| u_m(x*_m) + x_j - c_k`
//! with the side conditions `u_k(a_k) = 0`.
//!
//! Each `u_m` is represented near its center by a harmonic polynomial of
//! degree at most 2, `u_m(a_m + y) = g_m . y + y^T Q_m y` with `Q_m`
//! traceless. One Jacobi sweep evaluates the right-hand side on every
//! sphere surface and projects it back onto that representation with a
//! Gauss–Legendre product rule: the mean gives `c_k`, the first moment
//! gives the gradient and the traceless second moment gives `Q_k`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Result, SymbolicError};
use crate::eval::{inversion, Cluster};

/// Largest cluster the oracle accepts.
pub const MAX_SPHERES: usize = 10;
/// Largest accepted ratio of radius to the smallest center distance.
pub const MAX_RADIUS_RATIO: f64 = 0.1;

/// Iteration controls.
#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Stop once no coefficient changes by more than this between sweeps.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Gauss–Legendre nodes in the polar cosine.
    pub polar_nodes: usize,
    /// Equispaced nodes in the azimuth.
    pub azimuth_nodes: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tolerance: 1e-15,
            max_sweeps: 500,
            polar_nodes: 12,
            azimuth_nodes: 24,
        }
    }
}

/// Converged local representation of every `u_k`.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub cluster: Cluster,
    pub axis: usize,
    pub constants: Vec<f64>,
    pub gradients: Vec<[f64; 3]>,
    pub quadratics: Vec<[[f64; 3]; 3]>,
    pub sweeps: usize,
    pub residual: f64,
}

impl OracleSolution {
    /// The degree-2 representation of `u_m` at `a_m + y`.
    fn local(&self, m: usize, point: [f64; 3]) -> f64 {
        local_value(&self.gradients[m], &self.quadratics[m], self.cluster.centers[m], point)
    }

    /// `u_k(x)` from the right-hand side of the functional equation, which
    /// is accurate anywhere in the closed ball around `a_k`.
    pub fn potential(&self, k: usize, x: [f64; 3]) -> f64 {
        right_hand_side(&self.cluster, self.axis, k, x, &|m, y| self.local(m, y)) - self.constants[k]
    }
}

fn local_value(g: &[f64; 3], q: &[[f64; 3]; 3], center: [f64; 3], point: [f64; 3]) -> f64 {
    let y = [point[0] - center[0], point[1] - center[1], point[2] - center[2]];
    let mut value = g[0] * y[0] + g[1] * y[1] + g[2] * y[2];
    for i in 0..3 {
        for j in 0..3 {
            value += q[i][j] * y[i] * y[j];
        }
    }
    value
}

fn right_hand_side(
    cluster: &Cluster,
    axis: usize,
    k: usize,
    x: [f64; 3],
    local: &dyn Fn(usize, [f64; 3]) -> f64,
) -> f64 {
    let r0 = cluster.radius;
    let mut value = x[axis];
    for (m, &center) in cluster.centers.iter().enumerate() {
        if m == k {
            continue;
        }
        let d = crate::eval::distance(x, center);
        value -= r0 / d * local(m, inversion(x, center, r0));
    }
    value
}

/// A unit-sphere product rule: directions with weights summing to 1.
struct SphereRule {
    nodes: Vec<([f64; 3], f64)>,
}

impl SphereRule {
    fn new(polar: usize, azimuth: usize) -> Result<Self> {
        let polar = NonZeroUsize::new(polar)
            .ok_or_else(|| SymbolicError::InvalidInput("polar node count must be positive".into()))?;
        if azimuth == 0 {
            return Err(SymbolicError::InvalidInput(
                "azimuth node count must be positive".into(),
            ));
        }
        let rule = GaussLegendre::new(polar);
        let mut nodes = Vec::with_capacity(polar.get() * azimuth);
        for &(t, w) in rule.as_node_weight_pairs() {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for p in 0..azimuth {
                let phi = 2.0 * std::f64::consts::PI * (p as f64 + 0.5) / azimuth as f64;
                nodes.push(([s * phi.cos(), s * phi.sin(), t], w / (2.0 * azimuth as f64)));
            }
        }
        Ok(SphereRule { nodes })
    }
}

/// Solves the functional equations for `cluster` with the field along `axis`.
pub fn fixed_point_oracle(cluster: &Cluster, axis: usize, tolerance: f64) -> Result<OracleSolution> {
    fixed_point_oracle_with(
        cluster,
        axis,
        OracleOptions {
            tolerance,
            ..OracleOptions::default()
        },
    )
}

pub fn fixed_point_oracle_with(cluster: &Cluster, axis: usize, options: OracleOptions) -> Result<OracleSolution> {
    let n = cluster.len();
    if n > MAX_SPHERES {
        return Err(SymbolicError::InvalidInput(format!(
            "the oracle accepts at most {MAX_SPHERES} spheres, got {n}"
        )));
    }
    if axis > 2 {
        return Err(SymbolicError::InvalidInput(format!("axis {axis} out of range")));
    }
    let r0 = cluster.radius;
    if n > 1 && r0 > MAX_RADIUS_RATIO * cluster.min_distance() {
        return Err(SymbolicError::InvalidInput(format!(
            "radius {r0} exceeds {MAX_RADIUS_RATIO} times the smallest distance {}",
            cluster.min_distance()
        )));
    }
    let rule = SphereRule::new(options.polar_nodes, options.azimuth_nodes)?;

    let mut unit = [0.0; 3];
    unit[axis] = 1.0;
    let mut constants: Vec<f64> = cluster.centers.iter().map(|c| c[axis]).collect();
    let mut gradients = vec![unit; n];
    let mut quadratics = vec![[[0.0; 3]; 3]; n];
    let mut residual = f64::INFINITY;

    for sweep in 1..=options.max_sweeps {
        let local = |m: usize, y: [f64; 3]| local_value(&gradients[m], &quadratics[m], cluster.centers[m], y);
        let mut new_constants = vec![0.0; n];
        let mut new_gradients = vec![[0.0; 3]; n];
        let mut new_quadratics = vec![[[0.0; 3]; 3]; n];
        for k in 0..n {
            let center = cluster.centers[k];
            let (mut mean, mut first, mut second) = (0.0, [0.0; 3], [[0.0; 3]; 3]);
            for &(dir, w) in &rule.nodes {
                let x = [
                    center[0] + r0 * dir[0],
                    center[1] + r0 * dir[1],
                    center[2] + r0 * dir[2],
                ];
                let h = right_hand_side(cluster, axis, k, x, &local);
                mean += w * h;
                for i in 0..3 {
                    first[i] += w * h * dir[i];
                    for j in 0..3 {
                        let delta = if i == j { 1.0 / 3.0 } else { 0.0 };
                        second[i][j] += w * h * (dir[i] * dir[j] - delta);
                    }
                }
            }
            new_constants[k] = mean;
            for i in 0..3 {
                new_gradients[k][i] = 3.0 / r0 * first[i];
                for j in 0..3 {
                    new_quadratics[k][i][j] = 15.0 / (2.0 * r0 * r0) * second[i][j];
                }
            }
        }
        let mut change: f64 = 0.0;
        for k in 0..n {
            change = change.max((new_constants[k] - constants[k]).abs());
            for i in 0..3 {
                change = change.max((new_gradients[k][i] - gradients[k][i]).abs());
                for j in 0..3 {
                    change = change.max(r0 * (new_quadratics[k][i][j] - quadratics[k][i][j]).abs());
                }
            }
        }
        constants = new_constants;
        gradients = new_gradients;
        quadratics = new_quadratics;
        residual = change;
        if change <= options.tolerance {
            return Ok(OracleSolution {
                cluster: cluster.clone(),
                axis,
                constants,
                gradients,
                quadratics,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(SymbolicError::NoConvergence {
        sweeps: options.max_sweeps,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sphere_is_exact() {
        let cluster = Cluster::new(vec![[0.2, -0.1, 0.4]], 0.05).unwrap();
        let sol = fixed_point_oracle(&cluster, 0, 1e-15).unwrap();
        assert!((sol.constants[0] - 0.2).abs() < 1e-15);
        assert!((sol.gradients[0][0] - 1.0).abs() < 1e-14);
        assert!(sol.gradients[0][1].abs() < 1e-14 && sol.gradients[0][2].abs() < 1e-14);
    }

    #[test]
    fn rule_integrates_low_harmonics() {
        let rule = SphereRule::new(12, 24).unwrap();
        let total: f64 = rule.nodes.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let second: f64 = rule.nodes.iter().map(|(d, w)| w * d[0] * d[0]).sum();
        assert!((second - 1.0 / 3.0).abs() < 1e-14);
        let fourth: f64 = rule.nodes.iter().map(|(d, w)| w * d[0] * d[0] * d[1] * d[1]).sum();
        assert!((fourth - 1.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_large_radius_and_large_clusters() {
        let close = Cluster::new(vec![[0.0; 3], [0.5, 0.0, 0.0]], 0.06).unwrap();
        assert!(matches!(
            fixed_point_oracle(&close, 0, 1e-14),
            Err(SymbolicError::InvalidInput(_))
        ));
        let many = Cluster::new((0..11).map(|i| [i as f64, 0.0, 0.0]).collect(), 0.01).unwrap();
        assert!(fixed_point_oracle(&many, 0, 1e-14).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let cluster = Cluster::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], 0.1).unwrap();
        let options = OracleOptions {
            tolerance: 0.0,
            max_sweeps: 2,
            ..OracleOptions::default()
        };
        assert!(matches!(
            fixed_point_oracle_with(&cluster, 0, options),
            Err(SymbolicError::NoConvergence { sweeps: 2, .. })
        ));
    }

    #[test]
    fn two_spheres_along_the_field_match_the_leading_correction() {
        // c_k = a_kj - r0^3 sum (a_kj - a_mj)/|a_k - a_m|^3 + O(r0^4).
        let mut ratios = Vec::new();
        for &r0 in &[0.04, 0.02, 0.01] {
            let cluster = Cluster::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], r0).unwrap();
            let sol = fixed_point_oracle(&cluster, 0, 1e-15).unwrap();
            let leading = [0.0 + r0.powi(3), 1.0 - r0.powi(3)];
            let err = (0..2)
                .map(|k| (sol.constants[k] - leading[k]).abs())
                .fold(0.0, f64::max);
            ratios.push(err / r0.powi(4));
        }
        for r in &ratios {
            assert!(*r < 2.0, "{ratios:?}");
        }
    }
}
