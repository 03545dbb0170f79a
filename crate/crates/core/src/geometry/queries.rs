//! Containment and penetration queries on placed cross-sections.
//!
//! A [`PlacedSection`] is a section fixed in the world frame with its
//! half-plane form (for polygons) precomputed, so per-step queries in the
//! contact loop stay cheap. The free functions [`contains`],
//! [`overlap_depth`] and [`penetration`] wrap it for one-shot use.
//!
//! All queries are exact for the supported shape pairs: polygon/polygon
//! checks reduce to vertex-in-half-plane tests, circle cases use support
//! and closest-point arguments. `contains` follows the closed convention —
//! boundary points count as inside.

use super::{CrossSection, PlanarPose, Vec2, EPS};

/// Half-plane `n . x <= c` with unit outward normal.
#[derive(Clone, Copy, Debug)]
struct HalfPlane {
    n: Vec2,
    c: f64,
}

#[derive(Clone, Debug)]
enum Placed {
    Polygon { verts: Vec<Vec2>, planes: Vec<HalfPlane> },
    Circle { center: Vec2, radius: f64 },
}

/// A cross-section placed at a world pose, ready for repeated queries.
#[derive(Clone, Debug)]
pub struct PlacedSection {
    placed: Placed,
}

/// How far, and in which direction, a peg sticks out of a hole.
#[derive(Clone, Copy, Debug)]
pub struct Penetration {
    /// Maximum distance by which any peg point exits the hole boundary, mm.
    pub depth: f64,
    /// Unit direction that pushes the peg back toward the hole interior.
    pub push: Vec2,
    /// The peg point that exits farthest, world frame.
    pub witness: Vec2,
}

impl PlacedSection {
    pub fn new(section: &CrossSection, pose: PlanarPose) -> Self {
        let placed = match section {
            CrossSection::Circle { radius } => Placed::Circle {
                center: pose.translation(),
                radius: *radius,
            },
            CrossSection::ConvexPolygon { vertices } => {
                let verts: Vec<Vec2> = vertices.iter().map(|v| pose.apply(*v)).collect();
                let n = verts.len();
                let planes = (0..n)
                    .map(|i| {
                        let a = verts[i];
                        let b = verts[(i + 1) % n];
                        // CCW winding: outward normal is the right-hand perp.
                        let normal = (b - a).unit().expect("degenerate edge").perp() * -1.0;
                        HalfPlane {
                            n: normal,
                            c: normal.dot(a),
                        }
                    })
                    .collect();
                Placed::Polygon { verts, planes }
            }
        };
        PlacedSection { placed }
    }

    /// Closed point membership (boundary points are inside).
    pub fn contains_point(&self, p: Vec2) -> bool {
        match &self.placed {
            Placed::Circle { center, radius } => p.dist(*center) <= radius + EPS,
            Placed::Polygon { planes, .. } => {
                planes.iter().all(|hp| hp.n.dot(p) <= hp.c + EPS)
            }
        }
    }

    /// Distance from `p` to this section: 0 inside, else distance to the
    /// boundary.
    pub fn exit_distance(&self, p: Vec2) -> f64 {
        self.exit_with_closest(p).0
    }

    /// Exit distance together with the closest boundary point (which is
    /// `p` itself when inside).
    pub fn exit_with_closest(&self, p: Vec2) -> (f64, Vec2) {
        match &self.placed {
            Placed::Circle { center, radius } => {
                let d = p.dist(*center);
                if d <= *radius {
                    (0.0, p)
                } else {
                    let dir = (p - *center).unit().expect("p != center here");
                    (d - radius, *center + dir * *radius)
                }
            }
            Placed::Polygon { verts, planes } => {
                if planes.iter().all(|hp| hp.n.dot(p) <= hp.c) {
                    return (0.0, p);
                }
                let n = verts.len();
                let mut best = (f64::INFINITY, Vec2::ZERO);
                for i in 0..n {
                    let q = closest_on_segment(p, verts[i], verts[(i + 1) % n]);
                    let d = p.dist(q);
                    if d < best.0 {
                        best = (d, q);
                    }
                }
                best
            }
        }
    }

    /// Whether `peg` lies entirely inside `self` (closed containment).
    pub fn contains_section(&self, peg: &PlacedSection) -> bool {
        match (&self.placed, &peg.placed) {
            (Placed::Circle { center: ch, radius: rh }, Placed::Circle { center: cp, radius: rp }) => {
                cp.dist(*ch) + rp <= rh + EPS
            }
            (Placed::Circle { center: ch, radius: rh }, Placed::Polygon { verts, .. }) => {
                verts.iter().all(|v| v.dist(*ch) <= rh + EPS)
            }
            (Placed::Polygon { planes, .. }, Placed::Circle { center: cp, radius: rp }) => {
                planes.iter().all(|hp| hp.n.dot(*cp) + rp <= hp.c + EPS)
            }
            (Placed::Polygon { planes, .. }, Placed::Polygon { verts, .. }) => verts
                .iter()
                .all(|v| planes.iter().all(|hp| hp.n.dot(*v) <= hp.c + EPS)),
        }
    }

    /// Deepest exit of `peg` out of `self`: the maximum over the peg of the
    /// distance to this section, with the maximizing peg point. The
    /// distance-to-a-convex-set function is convex, so for a polygon peg
    /// the maximum sits on a vertex; for a circle peg it sits on one of a
    /// small set of support directions (edge normals and away-from-vertex
    /// directions).
    pub fn max_exit(&self, peg: &PlacedSection) -> (f64, Vec2) {
        match &peg.placed {
            Placed::Polygon { verts, .. } => {
                let mut best = (0.0, verts[0]);
                for &v in verts {
                    let d = self.exit_distance(v);
                    if d > best.0 {
                        best = (d, v);
                    }
                }
                best
            }
            Placed::Circle { center, radius } => match &self.placed {
                Placed::Circle { center: ch, radius: rh } => {
                    let gap = center.dist(*ch) + radius - rh;
                    if gap <= 0.0 {
                        (0.0, *center)
                    } else {
                        let dir = (*center - *ch)
                            .unit()
                            .unwrap_or(Vec2::new(1.0, 0.0));
                        (gap, *center + dir * *radius)
                    }
                }
                Placed::Polygon { verts, planes } => {
                    let mut best = (0.0, *center);
                    let mut consider = |p: Vec2, hole: &PlacedSection| {
                        let d = hole.exit_distance(p);
                        if d > best.0 {
                            best = (d, p);
                        }
                    };
                    let hole = self.clone();
                    for hp in planes {
                        consider(*center + hp.n * *radius, &hole);
                    }
                    for &v in verts {
                        if let Some(dir) = (*center - v).unit() {
                            consider(*center + dir * *radius, &hole);
                        }
                    }
                    best
                }
            },
        }
    }
}

fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
    a + ab * t
}

/// True iff every point of `peg` placed at `peg_pose` lies inside `hole`
/// placed at `hole_pose` (closed containment).
pub fn contains(
    hole: &CrossSection,
    hole_pose: PlanarPose,
    peg: &CrossSection,
    peg_pose: PlanarPose,
) -> bool {
    PlacedSection::new(hole, hole_pose).contains_section(&PlacedSection::new(peg, peg_pose))
}

/// 0 when contained, otherwise the maximum distance by which any peg point
/// exits the hole boundary.
pub fn overlap_depth(
    hole: &CrossSection,
    hole_pose: PlanarPose,
    peg: &CrossSection,
    peg_pose: PlanarPose,
) -> f64 {
    PlacedSection::new(hole, hole_pose)
        .max_exit(&PlacedSection::new(peg, peg_pose))
        .0
}

/// Full penetration report, or `None` when the peg is contained.
pub fn penetration(
    hole: &PlacedSection,
    peg: &PlacedSection,
) -> Option<Penetration> {
    let (depth, witness) = hole.max_exit(peg);
    if depth <= 0.0 {
        return None;
    }
    let (_, closest) = hole.exit_with_closest(witness);
    let push = (closest - witness).unit()?;
    Some(Penetration { depth, push, witness })
}
