//! Planar cross-section geometry.
//!
//! Pegs and holes are described by their planar cross-sections: convex
//! polygons (counter-clockwise, centred on their area centroid) or circles.
//! Everything downstream — wall contact, the success predicate, the gap
//! metrics — reduces to the containment and penetration queries in
//! [`queries`] evaluated on these sections.
//!
//! Units are millimetres. All values are immutable after construction and
//! every operation is a pure function, so sections can be shared freely
//! across worker threads.

mod catalogue;
mod queries;
mod sampling;

pub use catalogue::{Catalogue, CatalogueError};
pub use queries::{contains, overlap_depth, penetration, Penetration, PlacedSection};
pub use sampling::bottom_face_contact_samples;

use thiserror::Error;

/// Tolerance for boundary predicates: points within `EPS` of a boundary
/// count as on it. Keeps `contains` a closed predicate (boundary points
/// are contained) without tripping over floating-point residue.
pub const EPS: f64 = 1e-9;

/// Errors from section construction and gap queries.
#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not convex at vertex index {0}")]
    NotConvex(usize),
    #[error("polygon area is not positive")]
    DegenerateArea,
    #[error("circle radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("peg area {peg} mm^2 must be smaller than hole area {hole} mm^2")]
    NonPositiveClearance { peg: f64, hole: f64 },
}

/// A 2D vector / point in millimetres.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product `self × o`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector, or `None` for a (near-)zero vector.
    pub fn unit(self) -> Option<Vec2> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(Vec2::new(self.x / n, self.y / n))
        }
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = yaw % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// Planar rigid placement: translation plus rotation about the vertical axis.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    /// Radians, normalized to `(-pi, pi]`.
    pub yaw: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        PlanarPose {
            x,
            y,
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn identity() -> Self {
        PlanarPose::new(0.0, 0.0, 0.0)
    }

    pub fn translation(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Map a local-frame point to the world frame.
    pub fn apply(self, p: Vec2) -> Vec2 {
        let (s, c) = self.yaw.sin_cos();
        Vec2::new(c * p.x - s * p.y + self.x, s * p.x + c * p.y + self.y)
    }
}

/// The planar shape of a peg or hole. Polygons are counter-clockwise and
/// convex; every section is recentred so its area centroid sits at the
/// local origin.
///
/// The serde representation round-trips already-validated sections (for
/// resolved experiment configs); construct new sections through
/// [`CrossSection::convex_polygon`] / [`CrossSection::circle`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum CrossSection {
    ConvexPolygon { vertices: Vec<Vec2> },
    Circle { radius: f64 },
}

impl CrossSection {
    /// Build a convex polygon section. Vertices may arrive in either
    /// winding; they are reordered counter-clockwise, checked for
    /// convexity, and recentred on the area centroid.
    pub fn convex_polygon(mut vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        // Drop consecutive duplicates (including wrap-around).
        vertices.dedup_by(|a, b| a.dist(*b) < EPS);
        if vertices.len() > 1 && vertices[0].dist(*vertices.last().unwrap()) < EPS {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        let signed = signed_area(&vertices);
        if signed.abs() < EPS {
            return Err(GeometryError::DegenerateArea);
        }
        if signed < 0.0 {
            vertices.reverse();
        }
        // Convexity: every turn must be a left turn (collinear allowed).
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) < -EPS {
                return Err(GeometryError::NotConvex((i + 1) % n));
            }
        }
        let centroid = polygon_centroid(&vertices);
        for v in &mut vertices {
            *v = *v - centroid;
        }
        Ok(CrossSection::ConvexPolygon { vertices })
    }

    pub fn circle(radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::NonPositiveRadius(radius));
        }
        Ok(CrossSection::Circle { radius })
    }

    /// Enclosed area in mm^2.
    pub fn area(&self) -> f64 {
        match self {
            CrossSection::ConvexPolygon { vertices } => signed_area(vertices),
            CrossSection::Circle { radius } => std::f64::consts::PI * radius * radius,
        }
    }

    /// Boundary length in mm.
    pub fn perimeter(&self) -> f64 {
        match self {
            CrossSection::ConvexPolygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| vertices[i].dist(vertices[(i + 1) % n])).sum()
            }
            CrossSection::Circle { radius } => 2.0 * std::f64::consts::PI * radius,
        }
    }

    /// Radius of the smallest origin-centred circle covering the section.
    pub fn circumradius(&self) -> f64 {
        match self {
            CrossSection::ConvexPolygon { vertices } => {
                vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
            CrossSection::Circle { radius } => *radius,
        }
    }

    /// Uniform scaling about the centroid.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        assert!(factor > 0.0, "scale factor must be positive");
        match self {
            CrossSection::ConvexPolygon { vertices } => {
                CrossSection::convex_polygon(vertices.iter().map(|v| *v * factor).collect())
            }
            CrossSection::Circle { radius } => CrossSection::circle(radius * factor),
        }
    }

    /// Uniformly grow the section outward by `clearance` mm (Minkowski sum
    /// with a disc). Circles stay exact; polygon corners become arcs
    /// approximated with `segments_per_corner` chords. The result is
    /// recentred like every constructed section, which for asymmetric
    /// outlines shifts the fit slightly off-concentric (sub-millimetre at
    /// catalogue scale).
    pub fn dilate(&self, clearance: f64, segments_per_corner: usize) -> Result<Self, GeometryError> {
        assert!(clearance > 0.0, "clearance must be positive");
        match self {
            CrossSection::Circle { radius } => CrossSection::circle(radius + clearance),
            CrossSection::ConvexPolygon { vertices } => {
                let n = vertices.len();
                let mut out = Vec::with_capacity(n * (segments_per_corner + 2));
                for i in 0..n {
                    let prev = vertices[(i + n - 1) % n];
                    let v = vertices[i];
                    let next = vertices[(i + 1) % n];
                    // Outward edge normals on either side of this vertex.
                    let n_in = (v - prev).unit().expect("degenerate edge").perp() * -1.0;
                    let n_out = (next - v).unit().expect("degenerate edge").perp() * -1.0;
                    let a0 = n_in.y.atan2(n_in.x);
                    let mut a1 = n_out.y.atan2(n_out.x);
                    while a1 < a0 {
                        a1 += 2.0 * std::f64::consts::PI;
                    }
                    for k in 0..=segments_per_corner {
                        let t = a0 + (a1 - a0) * (k as f64) / (segments_per_corner as f64);
                        out.push(v + Vec2::new(t.cos(), t.sin()) * clearance);
                    }
                }
                CrossSection::convex_polygon(out)
            }
        }
    }
}

fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
}

fn polygon_centroid(vertices: &[Vec2]) -> Vec2 {
    let n = vertices.len();
    let a = signed_area(vertices);
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        let w = p.cross(q);
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Vec2::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// Convenience free function mirroring [`CrossSection::area`].
pub fn area(shape: &CrossSection) -> f64 {
    shape.area()
}

/// Fraction of the hole left uncovered by the peg:
/// `(area(hole) - area(peg)) / area(hole)`. Smaller means a tighter fit.
pub fn gap_proportion(peg: &CrossSection, hole: &CrossSection) -> Result<f64, GeometryError> {
    let ap = peg.area();
    let ah = hole.area();
    if ap >= ah {
        return Err(GeometryError::NonPositiveClearance { peg: ap, hole: ah });
    }
    Ok((ah - ap) / ah)
}

/// Uniform clearance that dilates `peg` into a hole with the requested
/// gap proportion. Uses the exact Minkowski area `A + P c + pi c^2` of a
/// convex section grown by `c`, so `gap_proportion(peg, peg.dilate(c, _))`
/// lands on `target` up to the corner-arc approximation.
pub fn clearance_for_proportion(peg: &CrossSection, target: f64) -> f64 {
    assert!(
        target > 0.0 && target < 1.0,
        "gap proportion must lie in (0, 1), got {target}"
    );
    let a = peg.area();
    let p = peg.perimeter();
    let rhs = a * target / (1.0 - target);
    let pi = std::f64::consts::PI;
    (-p + (p * p + 4.0 * pi * rhs).sqrt()) / (2.0 * pi)
}
