//! Deterministic sample points on a peg's bottom face.
//!
//! The contact model evaluates distributed normal forces at a fixed set of
//! points spread over the bottom face. Points are laid out boundary-first:
//! the outline itself, then concentric inward rings of the scaled outline.
//! The minimal sample (`n` = vertex count) is exactly the polygon's
//! vertices.

use super::{CrossSection, PlanarPose, Vec2};

/// Deterministic, uniformly-spread sample of the peg bottom face in the
/// world frame. Boundary points come first. Panics if `n < 3`.
///
/// For regular outlines (and circles) the sample centroid coincides with
/// the section centroid; for irregular polygons it is biased toward the
/// vertex mean by a fraction of a millimetre.
pub fn bottom_face_contact_samples(
    peg: &CrossSection,
    peg_pose: PlanarPose,
    n: usize,
) -> Vec<Vec2> {
    assert!(n >= 3, "need at least 3 contact samples, got {n}");
    local_samples(peg, n)
        .into_iter()
        .map(|p| peg_pose.apply(p))
        .collect()
}

/// Local-frame samples; the world-frame entry point applies the pose.
/// Exposed to the crate so the environment can cache the local set per
/// episode and transform per step.
pub(crate) fn local_samples(peg: &CrossSection, n: usize) -> Vec<Vec2> {
    match peg {
        CrossSection::ConvexPolygon { vertices } => polygon_samples(vertices, n),
        CrossSection::Circle { radius } => circle_samples(*radius, n),
    }
}

fn polygon_samples(vertices: &[Vec2], n: usize) -> Vec<Vec2> {
    let v = vertices.len();
    if n < v {
        return vertices[..n].to_vec();
    }
    let rings = ring_count(n, v);
    // Ring k sits at scale 1 - k/rings; point budget proportional to scale,
    // rounded to a multiple of the vertex count so each ring keeps the
    // outline's rotational symmetry. The leftover (< v points) goes to the
    // centre, where it cannot bias the sample centroid.
    let budgets = ring_budgets(n, v, rings);
    let mut out = Vec::with_capacity(n);
    for (k, &count) in budgets.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let scale = 1.0 - (k as f64) / (rings as f64);
        let per_edge = count / v;
        for i in 0..v {
            let a = vertices[i] * scale;
            let b = vertices[(i + 1) % v] * scale;
            for j in 0..per_edge {
                let t = (j as f64) / (per_edge as f64);
                out.push(a + (b - a) * t);
            }
        }
    }
    let leftover = n - out.len();
    append_center_cluster(&mut out, leftover, inradius(vertices) / (4.0 * rings as f64));
    out
}

fn circle_samples(radius: f64, n: usize) -> Vec<Vec2> {
    let rings = ring_count(n, 3);
    let weights: Vec<f64> = (0..rings).map(|k| 1.0 - (k as f64) / (rings as f64)).collect();
    let counts = largest_remainder(n, &weights);
    let mut out = Vec::with_capacity(n);
    let mut at_center = 0usize;
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        if count == 1 {
            // A lone point on a ring would bias the centroid; bank it.
            at_center += 1;
            continue;
        }
        let r = radius * (1.0 - (k as f64) / (rings as f64));
        for j in 0..count {
            let a = 2.0 * std::f64::consts::PI * (j as f64) / (count as f64);
            out.push(Vec2::new(r * a.cos(), r * a.sin()));
        }
    }
    append_center_cluster(&mut out, at_center, radius / (8.0 * rings as f64));
    out
}

fn ring_count(n: usize, v: usize) -> usize {
    (((n as f64) / (v as f64)).sqrt().ceil() as usize).max(1)
}

/// Per-ring budgets, multiples of `v`, summing to at most `n`.
fn ring_budgets(n: usize, v: usize, rings: usize) -> Vec<usize> {
    let weights: Vec<f64> = (0..rings).map(|k| 1.0 - (k as f64) / (rings as f64)).collect();
    let raw = largest_remainder(n, &weights);
    raw.into_iter().map(|c| (c / v) * v).collect()
}

/// Integer allocation of `n` by weight with exact sum (largest remainder).
fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let shares: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut rem: Vec<(usize, f64)> = shares
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s - s.floor()))
        .collect();
    rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let assigned: usize = counts.iter().sum();
    for &(i, _) in rem.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Leftover points land at the centre (one point) or equally spaced on a
/// small ring (two or more), both of which have a zero centroid.
fn append_center_cluster(out: &mut Vec<Vec2>, count: usize, ring_radius: f64) {
    match count {
        0 => {}
        1 => out.push(Vec2::ZERO),
        _ => {
            for j in 0..count {
                let a = 2.0 * std::f64::consts::PI * (j as f64) / (count as f64);
                out.push(Vec2::new(ring_radius * a.cos(), ring_radius * a.sin()));
            }
        }
    }
}

/// Distance from the (interior) origin to the nearest edge.
fn inradius(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let normal = (b - a).unit().expect("degenerate edge").perp() * -1.0;
            normal.dot(a)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Catalogue;

    #[test]
    fn minimal_sample_is_the_vertices() {
        let t = Catalogue::equilateral_triangle(30.0);
        let CrossSection::ConvexPolygon { vertices } = &t else { panic!() };
        let s = bottom_face_contact_samples(&t, PlanarPose::identity(), 3);
        assert_eq!(s.len(), 3);
        for (a, b) in s.iter().zip(vertices) {
            assert!(a.dist(*b) < 1e-12);
        }
    }

    #[test]
    fn identity_pose_matches_local_frame() {
        let t = Catalogue::equilateral_triangle(30.0);
        let local = local_samples(&t, 40);
        let world = bottom_face_contact_samples(&t, PlanarPose::identity(), 40);
        assert_eq!(local.len(), world.len());
        for (a, b) in local.iter().zip(&world) {
            assert!(a.dist(*b) < 1e-12);
        }
    }

    #[test]
    fn exact_count_and_inside() {
        let t = Catalogue::equilateral_triangle(30.0);
        let c = CrossSection::circle(11.0).unwrap();
        for shape in [&t, &c] {
            for n in [3usize, 7, 32, 100, 257] {
                let s = bottom_face_contact_samples(shape, PlanarPose::identity(), n);
                assert_eq!(s.len(), n, "n={n}");
                let placed = crate::geometry::PlacedSection::new(shape, PlanarPose::identity());
                for p in &s {
                    assert!(placed.exit_distance(*p) < 1e-9, "sample left the face");
                }
            }
        }
    }

    #[test]
    fn sample_centroid_tracks_the_pose() {
        // Derived check: the centroid of the generated set lands on the
        // pose translation for the canonical symmetric shapes.
        let pose = PlanarPose::new(4.2, -7.5, 0.9);
        for shape in [
            Catalogue::equilateral_triangle(30.0),
            CrossSection::circle(11.0).unwrap(),
        ] {
            for n in [100usize, 128, 333] {
                let s = bottom_face_contact_samples(&shape, pose, n);
                let mut cx = 0.0;
                let mut cy = 0.0;
                for p in &s {
                    cx += p.x;
                    cy += p.y;
                }
                let c = Vec2::new(cx / n as f64, cy / n as f64);
                assert!(
                    c.dist(pose.translation()) < 0.01,
                    "n={n} centroid off by {}",
                    c.dist(pose.translation())
                );
            }
        }
    }
}
