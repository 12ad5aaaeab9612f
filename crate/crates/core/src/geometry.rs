//! Geometric primitives: normalization, distances, nearest neighbors, and
//! the projection that enforces the Hausdorff boundary.
//!
//! All operations are pure functions; distances compare squared norms and
//! break ties by lowest index so results are deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 3D point in unit-sphere-normalized model units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Self = Self { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance_squared(self, other: Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(self, other: Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl std::ops::Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// An ordered set of 3D points with an optional class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub label: Option<usize>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(Self { points, label: None })
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        let mut sum = Point3::ORIGIN;
        for p in &self.points {
            sum = sum + *p;
        }
        sum * (1.0 / self.points.len() as f64)
    }

    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.norm())
            .fold(0.0, f64::max)
    }

    /// True when the cloud is centered at the origin with max norm 1, both
    /// within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.centroid().norm() <= tol && (self.max_norm() - 1.0).abs() <= tol
    }
}

/// The adversarial added points, with the index of each point's nearest
/// original neighbor as found at the last projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSet {
    pub points: Vec<Point3>,
    pub nn_index: Vec<usize>,
}

impl DeltaSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Translates the centroid to the origin and scales so the farthest point
/// has norm 1. Relative geometry is preserved (uniform scale + translation).
///
/// A cloud whose points all coincide has zero scale and is rejected as
/// degenerate.
pub fn normalize_unit_sphere(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if cloud.points.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("normalize_unit_sphere input"));
    }
    let centroid = cloud.centroid();
    let centered: Vec<Point3> = cloud.points.iter().map(|&p| p - centroid).collect();
    let max_norm = centered.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let extent = cloud
        .points
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs(), p.z.abs()])
        .fold(1.0, f64::max);
    if max_norm <= 1e-12 * extent {
        return Err(Error::DegenerateCloud(format!(
            "all {} points coincide; cannot scale to the unit sphere",
            cloud.len()
        )));
    }
    let inv = 1.0 / max_norm;
    Ok(PointCloud {
        points: centered.into_iter().map(|p| p * inv).collect(),
        label: cloud.label,
    })
}

/// Index and Euclidean distance of the point in `cloud` closest to `q`.
/// Equidistant candidates resolve to the lowest index.
pub fn nearest_neighbor(q: Point3, cloud: &PointCloud) -> Result<(usize, f64)> {
    nearest_neighbor_in(q, &cloud.points)
}

/// Nearest neighbor over a raw point slice; see [`nearest_neighbor`].
pub fn nearest_neighbor_in(q: Point3, points: &[Point3]) -> Result<(usize, f64)> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut best_idx = 0;
    let mut best_d2 = q.distance_squared(points[0]);
    for (i, &p) in points.iter().enumerate().skip(1) {
        let d2 = q.distance_squared(p);
        if d2 < best_d2 {
            best_d2 = d2;
            best_idx = i;
        }
    }
    Ok((best_idx, best_d2.sqrt()))
}

/// Distance from `q` to its nearest neighbor in `cloud`.
pub fn one_sided_distance(q: Point3, cloud: &PointCloud) -> Result<f64> {
    Ok(nearest_neighbor(q, cloud)?.1)
}

/// Symmetric Hausdorff distance: the max over both directed
/// farthest-nearest-neighbor distances.
///
/// For an augmented cloud `X ∪ δ` vs `X`, the `X → X ∪ δ` direction is zero
/// because every original point coincides with itself, so the value reduces
/// to the farthest added point's distance to `X`.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let d2 = directed_max_min_d2(&a.points, &b.points).max(directed_max_min_d2(&b.points, &a.points));
    Ok(d2.sqrt())
}

fn directed_max_min_d2(from: &[Point3], to: &[Point3]) -> f64 {
    let mut worst = 0.0f64;
    for &p in from {
        let mut best = f64::INFINITY;
        for &q in to {
            let d2 = p.distance_squared(q);
            if d2 < best {
                best = d2;
            }
        }
        if best > worst {
            worst = best;
        }
    }
    worst
}

/// Pulls `p` back onto the `eps` boundary around its nearest neighbor in
/// `cloud` when it violates the constraint; returns `p` unchanged otherwise.
///
/// The projected point lies on the ray from the nearest neighbor through
/// `p`, at distance `eps` from that neighbor, so the offset direction is
/// preserved.
pub fn project_to_boundary(p: Point3, cloud: &PointCloud, eps: f64) -> Result<Point3> {
    let (q, _) = project_with_neighbor(p, cloud, eps)?;
    Ok(q)
}

/// [`project_to_boundary`] that also reports the nearest-neighbor index used.
pub fn project_with_neighbor(p: Point3, cloud: &PointCloud, eps: f64) -> Result<(Point3, usize)> {
    if eps <= 0.0 {
        return Err(Error::InvalidConfig(format!("projection boundary eps must be > 0, got {eps}")));
    }
    let (idx, dist) = nearest_neighbor(p, cloud)?;
    if dist <= eps {
        return Ok((p, idx));
    }
    let nn = cloud.points[idx];
    let scale = eps / dist;
    Ok((nn + (p - nn) * scale, idx))
}

/// Uniform spatial grid over a fixed point set, accelerating
/// nearest-neighbor queries while reproducing the brute-force scan exactly,
/// including lowest-index tie-breaking.
#[derive(Debug, Clone)]
pub struct GridIndex {
    points: Vec<Point3>,
    cells: std::collections::HashMap<(i32, i32, i32), Vec<usize>>,
    cell_size: f64,
    origin: Point3,
}

impl GridIndex {
    /// Builds the index; cell size is derived from the bounding box so that
    /// cells hold a handful of points on average.
    pub fn build(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for &p in points {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        let diag = (hi - lo).norm();
        let cells_per_axis = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell_size = if diag > 0.0 { diag / cells_per_axis } else { 1.0 };
        let mut cells: std::collections::HashMap<(i32, i32, i32), Vec<usize>> =
            std::collections::HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            cells.entry(Self::cell_of(p, lo, cell_size)).or_default().push(i);
        }
        Ok(Self { points: points.to_vec(), cells, cell_size, origin: lo })
    }

    fn cell_of(p: Point3, origin: Point3, cell_size: f64) -> (i32, i32, i32) {
        let c = (p - origin) * (1.0 / cell_size);
        (c.x.floor() as i32, c.y.floor() as i32, c.z.floor() as i32)
    }

    /// Nearest neighbor of `q`; identical result to the brute-force scan.
    pub fn nearest(&self, q: Point3) -> (usize, f64) {
        let (cx, cy, cz) = Self::cell_of(q, self.origin, self.cell_size);
        // Once this ring is scanned, every occupied cell has been visited.
        let last_ring = self
            .cells
            .keys()
            .map(|&(x, y, z)| (x - cx).abs().max((y - cy).abs()).max((z - cz).abs()))
            .max()
            .expect("non-empty index");
        let mut best: Option<(f64, usize)> = None;
        let mut ring = 0i32;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        if let Some(members) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &i in members {
                                let d2 = q.distance_squared(self.points[i]);
                                match best {
                                    None => best = Some((d2, i)),
                                    Some((bd2, bi)) => {
                                        if d2 < bd2 || (d2 == bd2 && i < bi) {
                                            best = Some((d2, i));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            // Unexplored rings start at Chebyshev distance ring+1; any point
            // there is at least ring * cell_size away. `<=` keeps scanning
            // through exact ties so lowest-index resolution stays exact.
            if let Some((bd2, _)) = best {
                let gap = ring as f64 * self.cell_size;
                if gap * gap > bd2 {
                    break;
                }
            }
            if ring >= last_ring {
                break;
            }
            ring += 1;
        }
        let (d2, i) = best.expect("all occupied cells visited");
        (i, d2.sqrt())
    }
}
