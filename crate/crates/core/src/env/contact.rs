//! Quasi-static contact model.
//!
//! Contact forces are computed from instantaneous penetration geometry
//! with a linear penalty: a point pressed a depth `d` into a support
//! surface feels `k_n * d` of reaction, split evenly over the bottom-face
//! sample points. Three contributions make up the wrench:
//!
//! - distributed normal forces on supported bottom-face samples (solid
//!   plate outside the hole opening, or the hole floor), which also
//!   produce the bending torques about the EEF axis;
//! - Coulomb friction opposing the lateral velocity, proportional to the
//!   total normal force;
//! - a side-wall reaction when the peg sits below the surface and its
//!   cross-section sticks out of the hole's, directed along the minimal
//!   push-back direction, with the corresponding torque about the
//!   vertical axis.
//!
//! The sensor reports the reaction on the EEF: pressing down reads a
//! positive `F_z`. Sensor noise is only added to in-contact readings, so
//! a free-floating peg reads exact zero.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{penetration, PlacedSection, Vec2};

use super::types::Wrench;

/// Everything the wrench computation needs besides state.
pub(crate) struct ContactContext<'a> {
    /// World-frame hole cross-section.
    pub hole: &'a PlacedSection,
    /// Plate surface height, mm.
    pub surface_z: f64,
    /// Hole cavity depth, mm.
    pub hole_depth: f64,
    /// Contact stiffness, N/mm.
    pub k_n: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Sensor noise, fraction of full scale per component.
    pub sigma_ft: f64,
    pub full_scale: [f64; 6],
    /// Wall forces only engage while the peg still mostly sits in the
    /// cavity; beyond this overlap the peg is treated as resting on the
    /// plate instead. mm.
    pub wall_engagement: f64,
}

pub(crate) struct ContactInputs<'a> {
    /// World-frame bottom-face sample points.
    pub samples: &'a [Vec2],
    /// World-frame peg cross-section.
    pub peg: &'a PlacedSection,
    /// EEF planar position, mm (torque reference point).
    pub p_ee: Vec2,
    /// Peg bottom height, mm.
    pub z: f64,
    /// Lateral displacement applied this step, mm.
    pub lateral_velocity: Vec2,
}

/// Compute the F/T reading for the given configuration. Draws noise from
/// `rng` only when some raw component is nonzero.
pub(crate) fn compute_wrench(
    ctx: &ContactContext,
    inp: &ContactInputs,
    rng: &mut ChaCha8Rng,
) -> Wrench {
    let mut force = [0.0; 3];
    let mut torque = [0.0; 3];

    if inp.z < ctx.surface_z {
        let pen = penetration(ctx.hole, inp.peg);
        // Once the cross-section essentially sits in the cavity, bottom
        // support can only come from the hole floor; the overhanging
        // sliver presses the wall laterally, not the plate top.
        let in_cavity = pen.as_ref().map_or(true, |p| p.depth <= ctx.wall_engagement);

        let n = inp.samples.len() as f64;
        let floor_z = ctx.surface_z - ctx.hole_depth;
        let plate_depth = ctx.surface_z - inp.z;
        let floor_depth = floor_z - inp.z;
        for &p in inp.samples {
            let over_opening = ctx.hole.contains_point(p);
            let depth = if over_opening {
                floor_depth
            } else if in_cavity {
                continue;
            } else {
                plate_depth
            };
            if depth <= 0.0 {
                continue;
            }
            let f = ctx.k_n * depth / n;
            force[2] += f;
            let r = p - inp.p_ee;
            torque[0] += r.y * f;
            torque[1] -= r.x * f;
        }

        // Friction from dragging while pressed.
        if force[2] > 0.0 {
            if let Some(dir) = inp.lateral_velocity.unit() {
                force[0] -= ctx.mu * force[2] * dir.x;
                force[1] -= ctx.mu * force[2] * dir.y;
            }
        }

        // Side-wall reaction while in the cavity.
        if let Some(pen) = pen {
            if pen.depth <= ctx.wall_engagement {
                let f_wall = ctx.k_n * pen.depth;
                force[0] += f_wall * pen.push.x;
                force[1] += f_wall * pen.push.y;
                let r = pen.witness - inp.p_ee;
                torque[2] += r.x * f_wall * pen.push.y - r.y * f_wall * pen.push.x;
            }
        }
    }

    let in_contact = force.iter().chain(torque.iter()).any(|v| *v != 0.0);
    if in_contact && ctx.sigma_ft > 0.0 {
        for (i, slot) in force.iter_mut().chain(torque.iter_mut()).enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *slot += z * ctx.sigma_ft * ctx.full_scale[i];
        }
    }

    Wrench::from_raw(force, torque, ctx.full_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bottom_face_contact_samples, Catalogue, CrossSection, PlanarPose};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn ctx(hole: &PlacedSection) -> ContactContext<'_> {
        ContactContext {
            hole,
            surface_z: 0.0,
            hole_depth: 20.0,
            k_n: 10.0,
            mu: 0.3,
            sigma_ft: 0.0,
            full_scale: [20.0, 20.0, 40.0, 500.0, 500.0, 500.0],
            wall_engagement: 4.0,
        }
    }

    fn placed(s: &CrossSection, x: f64, y: f64, yaw: f64) -> PlacedSection {
        PlacedSection::new(s, PlanarPose::new(x, y, yaw))
    }

    #[test]
    fn free_space_reads_zero() {
        let peg = Catalogue::equilateral_triangle(30.0);
        let hole_section = peg.dilate(4.0, 64).unwrap();
        let hole = placed(&hole_section, 0.0, 0.0, 0.0);
        let peg_placed = placed(&peg, 0.0, 0.0, 0.0);
        let samples = bottom_face_contact_samples(&peg, PlanarPose::identity(), 32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Noise enabled, but no contact: must be exactly zero.
        let mut c = ctx(&hole);
        c.sigma_ft = 0.01;
        let w = compute_wrench(
            &c,
            &ContactInputs {
                samples: &samples,
                peg: &peg_placed,
                p_ee: Vec2::ZERO,
                z: 0.5,
                lateral_velocity: Vec2::new(1.0, 0.0),
            },
            &mut rng,
        );
        assert_eq!(w, Wrench::ZERO);
    }

    #[test]
    fn full_face_press_matches_penalty_arithmetic() {
        // Peg far from the hole, pressed 0.2 mm into the plate: the total
        // normal force is k_n * d regardless of the sample count.
        let peg = Catalogue::equilateral_triangle(30.0);
        let hole_section = peg.dilate(4.0, 64).unwrap();
        let hole = placed(&hole_section, 100.0, 100.0, 0.0);
        let pose = PlanarPose::identity();
        let peg_placed = placed(&peg, 0.0, 0.0, 0.0);
        let samples = bottom_face_contact_samples(&peg, pose, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = compute_wrench(
            &ctx(&hole),
            &ContactInputs {
                samples: &samples,
                peg: &peg_placed,
                p_ee: Vec2::ZERO,
                z: -0.2,
                lateral_velocity: Vec2::ZERO,
            },
            &mut rng,
        );
        assert_relative_eq!(w.force[2], 2.0, epsilon = 1e-12);
        // Symmetric press: bending torques cancel.
        assert!(w.torque[0].abs() < 1e-9);
        assert!(w.torque[1].abs() < 1e-9);
        assert_relative_eq!(w.normalized[2], 2.0 / 40.0, epsilon = 1e-12);
    }

    #[test]
    fn edge_contact_produces_partial_force_and_torque() {
        // Hole to the +x side so roughly half the peg hangs over the
        // opening: supported force drops and a bending torque appears,
        // tipping toward the unsupported (+x) side.
        let peg = CrossSection::circle(10.0).unwrap();
        let hole_section = CrossSection::circle(14.0).unwrap();
        let hole = placed(&hole_section, 10.0, 0.0, 0.0);
        let peg_placed = placed(&peg, 0.0, 0.0, 0.0);
        let samples = bottom_face_contact_samples(&peg, PlanarPose::identity(), 200);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = compute_wrench(
            &ctx(&hole),
            &ContactInputs {
                samples: &samples,
                peg: &peg_placed,
                p_ee: Vec2::ZERO,
                z: -0.2,
                lateral_velocity: Vec2::ZERO,
            },
            &mut rng,
        );
        assert!(w.force[2] > 0.1 && w.force[2] < 1.9, "partial support");
        // Supported samples sit at x < some cut: torque_y = -sum(r_x f) > 0.
        assert!(w.torque[1] > 0.0, "tau_y = {}", w.torque[1]);
        assert!(w.torque[0].abs() < 1e-9);
    }

    #[test]
    fn friction_opposes_motion() {
        let peg = Catalogue::equilateral_triangle(30.0);
        let hole_section = peg.dilate(4.0, 64).unwrap();
        let hole = placed(&hole_section, 100.0, 100.0, 0.0);
        let peg_placed = placed(&peg, 0.0, 0.0, 0.0);
        let samples = bottom_face_contact_samples(&peg, PlanarPose::identity(), 32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = compute_wrench(
            &ctx(&hole),
            &ContactInputs {
                samples: &samples,
                peg: &peg_placed,
                p_ee: Vec2::ZERO,
                z: -1.0,
                lateral_velocity: Vec2::new(2.0, 0.0),
            },
            &mut rng,
        );
        assert_relative_eq!(w.force[2], 10.0, epsilon = 1e-12);
        assert_relative_eq!(w.force[0], -0.3 * 10.0, epsilon = 1e-12);
        assert_relative_eq!(w.force[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn wall_reaction_pushes_back_inside() {
        // Circle peg inside a circular hole, shifted +x so it presses the
        // wall by 1 mm while below the surface.
        let peg = CrossSection::circle(10.0).unwrap();
        let hole_section = CrossSection::circle(12.0).unwrap();
        let hole = placed(&hole_section, 0.0, 0.0, 0.0);
        let peg_placed = placed(&peg, 3.0, 0.0, 0.0);
        let samples = bottom_face_contact_samples(&peg, PlanarPose::new(3.0, 0.0, 0.0), 32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = compute_wrench(
            &ctx(&hole),
            &ContactInputs {
                samples: &samples,
                peg: &peg_placed,
                p_ee: Vec2::new(3.0, 0.0),
                z: -5.0,
                lateral_velocity: Vec2::ZERO,
            },
            &mut rng,
        );
        // Overlap = 3 + 10 - 12 = 1 mm; wall pushes toward -x with k_n * 1.
        assert_relative_eq!(w.force[0], -10.0, epsilon = 1e-9);
        // Pressing the hole floor? No: floor is 20 deep. No vertical force.
        assert_relative_eq!(w.force[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_applies_only_in_contact_and_is_seed_deterministic() {
        let peg = Catalogue::equilateral_triangle(30.0);
        let hole_section = peg.dilate(4.0, 64).unwrap();
        let hole = placed(&hole_section, 100.0, 100.0, 0.0);
        let peg_placed = placed(&peg, 0.0, 0.0, 0.0);
        let samples = bottom_face_contact_samples(&peg, PlanarPose::identity(), 32);
        let mut c = ctx(&hole);
        c.sigma_ft = 0.01;
        let inputs = ContactInputs {
            samples: &samples,
            peg: &peg_placed,
            p_ee: Vec2::ZERO,
            z: -0.5,
            lateral_velocity: Vec2::ZERO,
        };
        let mut rng1 = ChaCha8Rng::seed_from_u64(9);
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        let w1 = compute_wrench(&c, &inputs, &mut rng1);
        let w2 = compute_wrench(&c, &inputs, &mut rng2);
        assert_eq!(w1, w2);
        assert!((w1.force[2] - 5.0).abs() < 2.0, "noisy but near k_n * d");
        assert!(w1.force[2] != 5.0, "noise must perturb the reading");
    }
}
