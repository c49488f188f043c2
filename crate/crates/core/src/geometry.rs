//! Periodic sphere configurations in the unit cube `[-1/2, 1/2)^3`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type Point = [f64; 3];

/// Highest concentration accepted by the RSA generator.
pub const RSA_MAX_CONCENTRATION: f64 = 0.38;

/// Default cap on placement attempts per sphere.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid configuration: {0}")]
    Invariant(String),
    #[error("invalid RSA parameters: {0}")]
    InvalidParameters(String),
    #[error("could not place sphere {index} after {attempts} attempts")]
    PackingFailure { index: usize, attempts: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Reduces a coordinate difference into `[-1/2, 1/2)`.
#[inline]
pub fn wrap(v: f64) -> f64 {
    let mut w = v - (v + 0.5).floor();
    // `v + 0.5` can round up to the next integer for `v` just below 1/2.
    if w < -0.5 {
        w += 1.0;
    } else if w >= 0.5 {
        w -= 1.0;
    }
    w
}

/// Minimum-image difference between two centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicDisplacement(pub Point);

impl PeriodicDisplacement {
    pub fn components(&self) -> Point {
        self.0
    }

    pub fn norm_squared(&self) -> f64 {
        let [a, b, c] = self.0;
        a * a + b * b + c * c
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }
}

/// `a - b` reduced so that every component lies in `[-1/2, 1/2)`.
#[inline]
pub fn minimum_image(a: Point, b: Point) -> PeriodicDisplacement {
    PeriodicDisplacement([wrap(a[0] - b[0]), wrap(a[1] - b[1]), wrap(a[2] - b[2])])
}

/// Radius of `n` equal spheres filling the fraction `f` of the unit cell.
pub fn radius_for(n: usize, f: f64) -> f64 {
    (3.0 * f / (4.0 * std::f64::consts::PI * n as f64)).cbrt()
}

/// Equal spheres with centers in the periodic unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereConfiguration {
    centers: Vec<Point>,
    radius: f64,
}

impl SphereConfiguration {
    /// Validates and wraps a list of centers.
    ///
    /// Fails if a coordinate lies outside `[-1/2, 1/2)`, if two balls
    /// overlap in the periodic metric, if a ball overlaps its own image, or
    /// if the concentration falls outside `(0, 1)`.
    pub fn new(centers: Vec<Point>, radius: f64) -> Result<Self, GeometryError> {
        if centers.is_empty() {
            return Err(GeometryError::Invariant("no spheres".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::Invariant(format!("radius {radius} is not positive")));
        }
        if 2.0 * radius > 1.0 {
            return Err(GeometryError::Invariant(format!(
                "radius {radius} exceeds half the cell, spheres overlap their images"
            )));
        }
        for (k, c) in centers.iter().enumerate() {
            if c.iter().any(|v| !(v.is_finite() && (-0.5..0.5).contains(v))) {
                return Err(GeometryError::Invariant(format!(
                    "center {k} = {c:?} lies outside [-1/2, 1/2)^3"
                )));
            }
        }
        let config = Self { centers, radius };
        let f = config.concentration();
        if !(f > 0.0 && f < 1.0) {
            return Err(GeometryError::Invariant(format!("concentration {f} outside (0, 1)")));
        }
        if let Some((k, m, d)) = config.closest_overlap() {
            return Err(GeometryError::Invariant(format!(
                "spheres {k} and {m} overlap: distance {d} < {}",
                2.0 * radius
            )));
        }
        Ok(config)
    }

    fn closest_overlap(&self) -> Option<(usize, usize, f64)> {
        let limit = 4.0 * self.radius * self.radius;
        for (k, a) in self.centers.iter().enumerate() {
            for (m, b) in self.centers.iter().enumerate().skip(k + 1) {
                let d2 = minimum_image(*a, *b).norm_squared();
                if d2 < limit {
                    return Some((k, m, d2.sqrt()));
                }
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Volume fraction `N (4/3) pi r0^3`.
    pub fn concentration(&self) -> f64 {
        self.len() as f64 * 4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }

    /// Same spheres with coordinate axes reordered: new axis `i` reads old axis `perm[i]`.
    pub fn permute_axes(&self, perm: [usize; 3]) -> Self {
        let centers = self
            .centers
            .iter()
            .map(|c| [c[perm[0]], c[perm[1]], c[perm[2]]])
            .collect();
        Self {
            centers,
            radius: self.radius,
        }
    }

    /// Applies a signed axis permutation: new axis `i` reads `sign[i] * old[perm[i]]`.
    pub fn transform_axes(&self, perm: [usize; 3], sign: [f64; 3]) -> Self {
        let centers = self
            .centers
            .iter()
            .map(|c| std::array::from_fn(|i| wrap(sign[i] * c[perm[i]])))
            .collect();
        Self {
            centers,
            radius: self.radius,
        }
    }

    /// Rigid periodic translation.
    pub fn translate(&self, shift: Point) -> Self {
        let centers = self
            .centers
            .iter()
            .map(|c| std::array::from_fn(|i| wrap(c[i] + shift[i])))
            .collect();
        Self {
            centers,
            radius: self.radius,
        }
    }

    /// Reorders the centers: new center `i` is old center `order[i]`.
    pub fn relabel(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.len(), "relabelling must be a permutation");
        let centers = order.iter().map(|&i| self.centers[i]).collect();
        Self {
            centers,
            radius: self.radius,
        }
    }
}

/// The 24 proper rotations of the cube as signed axis permutations:
/// new axis `i` reads `sign[i] * old[perm[i]]`.
pub fn cube_rotations() -> Vec<([usize; 3], [f64; 3])> {
    const PERMS: [([usize; 3], f64); 6] = [
        ([0, 1, 2], 1.0),
        ([1, 2, 0], 1.0),
        ([2, 0, 1], 1.0),
        ([1, 0, 2], -1.0),
        ([0, 2, 1], -1.0),
        ([2, 1, 0], -1.0),
    ];
    let mut out = Vec::with_capacity(24);
    for (perm, parity) in PERMS {
        for mask in 0..8u32 {
            let sign: [f64; 3] = std::array::from_fn(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
            if parity * sign[0] * sign[1] * sign[2] > 0.0 {
                out.push((perm, sign));
            }
        }
    }
    out
}

/// Images of `point` under the 24 cube rotations, as a configuration of
/// spheres of the given radius. A generic point gives a macroscopically
/// isotropic arrangement.
pub fn cube_rotation_orbit(point: Point, radius: f64) -> Result<SphereConfiguration, GeometryError> {
    let centers = cube_rotations()
        .into_iter()
        .map(|(perm, sign)| std::array::from_fn(|i| wrap(sign[i] * point[perm[i]])))
        .collect();
    SphereConfiguration::new(centers, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsaOptions {
    pub max_attempts_per_sphere: u64,
}

impl Default for RsaOptions {
    fn default() -> Self {
        Self {
            max_attempts_per_sphere: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// An RSA packing together with the number of candidates drawn.
#[derive(Debug, Clone)]
pub struct RsaPacking {
    pub configuration: SphereConfiguration,
    pub attempts: u64,
}

/// Uniform grid of buckets used to find close neighbours during RSA.
struct CellGrid {
    cells_per_side: usize,
    buckets: Vec<Vec<usize>>,
}

impl CellGrid {
    fn new(min_width: f64) -> Self {
        let cells_per_side = ((1.0 / min_width).floor() as usize).max(1);
        Self {
            cells_per_side,
            buckets: vec![Vec::new(); cells_per_side.pow(3)],
        }
    }

    fn coord(&self, v: f64) -> usize {
        (((v + 0.5) * self.cells_per_side as f64) as usize).min(self.cells_per_side - 1)
    }

    fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.cells_per_side + c[1]) * self.cells_per_side + c[2]
    }

    fn insert(&mut self, p: Point, id: usize) {
        let c = [self.coord(p[0]), self.coord(p[1]), self.coord(p[2])];
        let idx = self.index(c);
        self.buckets[idx].push(id);
    }

    /// Calls `visit` for every stored id in the 27 cells around `p`.
    /// Below three cells per side every id is visited once.
    fn any_near(&self, p: Point, mut visit: impl FnMut(usize) -> bool) -> bool {
        let g = self.cells_per_side;
        if g < 3 {
            return self.buckets.iter().flatten().any(|&id| visit(id));
        }
        let c = [self.coord(p[0]), self.coord(p[1]), self.coord(p[2])];
        for dx in [g - 1, 0, 1] {
            for dy in [g - 1, 0, 1] {
                for dz in [g - 1, 0, 1] {
                    let cell = [(c[0] + dx) % g, (c[1] + dy) % g, (c[2] + dz) % g];
                    if self.buckets[self.index(cell)].iter().any(|&id| visit(id)) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Random sequential adsorption of `n` spheres at concentration `f`.
pub fn generate_rsa(n: usize, f: f64, seed: u64) -> Result<SphereConfiguration, GeometryError> {
    generate_rsa_with(n, f, seed, &RsaOptions::default()).map(|p| p.configuration)
}

/// [`generate_rsa`] with explicit options, also reporting the attempt count.
pub fn generate_rsa_with(n: usize, f: f64, seed: u64, options: &RsaOptions) -> Result<RsaPacking, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidParameters("N must be at least 1".into()));
    }
    if !(f > 0.0 && f <= RSA_MAX_CONCENTRATION) {
        return Err(GeometryError::InvalidParameters(format!(
            "concentration {f} outside (0, {RSA_MAX_CONCENTRATION}]"
        )));
    }
    let radius = radius_for(n, f);
    let min_d2 = 4.0 * radius * radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = CellGrid::new(2.0 * radius);
    let mut centers: Vec<Point> = Vec::with_capacity(n);
    let mut attempts = 0u64;

    for index in 0..n {
        let mut placed = false;
        for _ in 0..options.max_attempts_per_sphere {
            attempts += 1;
            let p: Point = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
            let blocked = grid.any_near(p, |id| minimum_image(p, centers[id]).norm_squared() < min_d2);
            if !blocked {
                grid.insert(p, centers.len());
                centers.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(GeometryError::PackingFailure {
                index,
                attempts: options.max_attempts_per_sphere,
            });
        }
    }
    let configuration = SphereConfiguration::new(centers, radius)?;
    Ok(RsaPacking {
        configuration,
        attempts,
    })
}

/// Serialises a configuration in the packing text format.
///
/// `comments` are written first, each prefixed with `# `.
pub fn format_packing(config: &SphereConfiguration, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{} {:.16e}", config.len(), config.radius());
    for c in config.centers() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", c[0], c[1], c[2]);
    }
    out
}

/// Parses the packing text format.
pub fn parse_packing(text: &str) -> Result<SphereConfiguration, GeometryError> {
    let mut header: Option<(usize, f64)> = None;
    let mut centers = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |message: String| GeometryError::Parse { line: line_no, message };
        match header {
            None => {
                if fields.len() != 2 {
                    return Err(parse_err(format!("expected `N r0`, found {} fields", fields.len())));
                }
                let n: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(format!("invalid sphere count `{}`", fields[0])))?;
                let r0: f64 = fields[1]
                    .parse()
                    .map_err(|_| parse_err(format!("invalid radius `{}`", fields[1])))?;
                header = Some((n, r0));
            }
            Some((n, _)) => {
                if centers.len() == n {
                    return Err(parse_err(format!("more than {n} center lines")));
                }
                if fields.len() != 3 {
                    return Err(parse_err(format!("expected 3 coordinates, found {}", fields.len())));
                }
                let mut p = [0.0; 3];
                for (slot, field) in p.iter_mut().zip(&fields) {
                    *slot = field
                        .parse()
                        .map_err(|_| parse_err(format!("invalid coordinate `{field}`")))?;
                }
                centers.push(p);
            }
        }
    }
    let (n, r0) = header.ok_or(GeometryError::Parse {
        line: last_line.max(1),
        message: "missing header".into(),
    })?;
    if centers.len() != n {
        return Err(GeometryError::Parse {
            line: last_line.max(1),
            message: format!("header announces {n} centers, found {}", centers.len()),
        });
    }
    SphereConfiguration::new(centers, r0)
}

pub fn read_packing(path: &Path) -> Result<SphereConfiguration, GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_packing(&text)
}

pub fn write_packing(config: &SphereConfiguration, path: &Path, comments: &[String]) -> Result<(), GeometryError> {
    std::fs::write(path, format_packing(config, comments)).map_err(|e| GeometryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
