//! Oracle comparison of the symbolic series on a random cluster.

use effcond::conductivity::fmt;
use effcond_symbolic::verify::symbolic_gradient;
use effcond_symbolic::{
    fixed_point_oracle, order_estimate, procedure_u, series_order_estimate, Cluster, OrderEstimate,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

/// Largest cluster the oracle accepts.
pub const MAX_SPHERES: usize = 10;
/// Centers are drawn in `[-CLUSTER_HALF_WIDTH, CLUSTER_HALF_WIDTH]^3`.
pub const CLUSTER_HALF_WIDTH: f64 = 1.0;
/// Smallest distance between two drawn centers.
pub const MIN_SEPARATION: f64 = 0.8;
/// Largest accepted ratio of radius to smallest center distance.
pub const MAX_RADIUS_RATIO: f64 = 0.1;
/// Truncation orders whose convergence rate is checked.
pub const CHECKED_ORDERS: [u32; 2] = [3, 6];

const MAX_DRAWS_PER_CENTER: usize = 100_000;

/// Draws `n` centers with sequential rejection, so that every pair is at
/// least `MIN_SEPARATION` apart.
pub fn random_centers(n: usize, seed: u64) -> Result<Vec<[f64; 3]>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(n);
    let w = CLUSTER_HALF_WIDTH;
    for _ in 0..n {
        let placed = (0..MAX_DRAWS_PER_CENTER).find_map(|_| {
            let p = [
                rng.random_range(-w..w),
                rng.random_range(-w..w),
                rng.random_range(-w..w),
            ];
            let clear = centers.iter().all(|c| {
                let d2: f64 = (0..3).map(|i| (p[i] - c[i]).powi(2)).sum();
                d2 >= MIN_SEPARATION * MIN_SEPARATION
            });
            clear.then_some(p)
        });
        centers.push(placed.ok_or_else(|| CliError::Computation("could not place cluster centers".into()))?);
    }
    Ok(centers)
}

/// Checks the cluster size and the radius against the oracle's limits.
pub fn validated_cluster(n: usize, radius: f64, seed: u64) -> Result<Cluster, CliError> {
    if n == 0 || n > MAX_SPHERES {
        return Err(CliError::Validation(format!(
            "sphere count {n} outside 1..={MAX_SPHERES}"
        )));
    }
    if radius.is_nan() || radius <= 0.0 {
        return Err(CliError::Validation(format!("radius {radius} must be positive")));
    }
    let cluster = Cluster::new(random_centers(n, seed)?, radius)?;
    if n > 1 && radius > MAX_RADIUS_RATIO * cluster.min_distance() {
        return Err(CliError::Validation(format!(
            "radius {radius} exceeds {MAX_RADIUS_RATIO} times the smallest center distance {}",
            cluster.min_distance()
        )));
    }
    Ok(cluster)
}

fn estimate_pairs(prefix: &str, est: &OrderEstimate) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}_residual"), fmt(est.residual)),
        (format!("{prefix}_residual_half"), fmt(est.residual_half)),
        (format!("{prefix}_slope"), fmt(est.slope)),
    ]
}

/// Largest gap between the oracle gradient and the sixth-order symbolic
/// gradient over all spheres.
pub fn gradient_gap(cluster: &Cluster, axis: usize) -> Result<f64, CliError> {
    let out = procedure_u(6, axis)?;
    let oracle = fixed_point_oracle(cluster, axis, effcond_symbolic::verify::ORACLE_TOLERANCE)?;
    let mut gap: f64 = 0.0;
    for k in 0..cluster.len() {
        gap = gap.max((oracle.gradients[k][axis] - symbolic_gradient(&out, cluster, k, axis)?).abs());
    }
    Ok(gap)
}

/// Residual-order estimates at `radius` and `radius / 2`.
///
/// `series_q*` compares the truncated successive approximation, with the
/// oracle's boundary constants, to the oracle potential; its expected
/// slope is `q + 1`. `eliminated_q*` compares the constants-eliminated
/// output. The gradient gap compares derivatives at the centers.
pub fn report(cluster: &Cluster, axis: usize) -> Result<Vec<(String, String)>, CliError> {
    let mut out = vec![
        ("n".to_string(), cluster.len().to_string()),
        ("r0".to_string(), fmt(cluster.radius)),
        ("axis".to_string(), (axis + 1).to_string()),
    ];
    if cluster.len() > 1 {
        out.push(("min_distance".into(), fmt(cluster.min_distance())));
    }
    for q in CHECKED_ORDERS {
        let series = series_order_estimate(q, axis, &cluster.centers, cluster.radius)?;
        out.push((format!("series_q{q}_expected_slope"), (q + 1).to_string()));
        out.extend(estimate_pairs(&format!("series_q{q}"), &series));
        let eliminated = order_estimate(&procedure_u(q, axis)?, &cluster.centers, cluster.radius)?;
        out.extend(estimate_pairs(&format!("eliminated_q{q}"), &eliminated));
    }
    let gap = gradient_gap(cluster, axis)?;
    let gap_half = gradient_gap(&cluster.with_radius(cluster.radius / 2.0)?, axis)?;
    out.push(("gradient_gap".into(), fmt(gap)));
    out.push(("gradient_gap_half".into(), fmt(gap_half)));
    out.push(("gradient_slope".into(), fmt((gap / gap_half).log2())));
    Ok(out)
}
