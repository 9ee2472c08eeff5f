//! Primitive-shape collision checking between the arm's link geometry and
//! the static measurement scene.
//!
//! Links are sphere-swept segments (capsules) attached to the forward
//! kinematics frames; obstacles are spheres, capsules, and axis-aligned
//! boxes. Pair counts are tiny, so every query is a plain loop over all
//! pairs with no broad phase.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{joint_frames, DhTable, JointConfig};
use crate::se3::{add, dot, norm, scale, sub, Pose};

#[derive(Debug, Error, PartialEq)]
pub enum CollisionError {
    #[error("configuration is in collision; clearance is undefined")]
    InCollision,
}

/// Collision primitive. Dimensions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Capsule {
        start: [f64; 3],
        end: [f64; 3],
        radius: f64,
    },
    /// Axis-aligned box given by min/max corners.
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
}

fn clamp_point_to_box(p: [f64; 3], min: [f64; 3], max: [f64; 3]) -> [f64; 3] {
    [
        p[0].clamp(min[0], max[0]),
        p[1].clamp(min[1], max[1]),
        p[2].clamp(min[2], max[2]),
    ]
}

/// Distance from a point to a box surface: positive outside, negative
/// depth inside.
fn point_box_distance(p: [f64; 3], min: [f64; 3], max: [f64; 3]) -> f64 {
    let c = clamp_point_to_box(p, min, max);
    let d = norm(sub(p, c));
    if d > 0.0 {
        return d;
    }
    // Inside: depth to the nearest face.
    let mut depth = f64::INFINITY;
    for i in 0..3 {
        depth = depth.min(p[i] - min[i]).min(max[i] - p[i]);
    }
    -depth
}

/// Closest distance between two segments (standard clamped quadratic).
fn segment_segment_distance(p1: [f64; 3], q1: [f64; 3], p2: [f64; 3], q2: [f64; 3]) -> f64 {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(d1, d1);
    let e = dot(d2, d2);
    let f = dot(d2, r);
    let (s, t);
    if a <= 1e-18 && e <= 1e-18 {
        return norm(r);
    }
    if a <= 1e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e <= 1e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s_ = if denom > 1e-18 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t_raw = (b * s_ + f) / e;
            let t_ = t_raw.clamp(0.0, 1.0);
            if t_ != t_raw {
                s_ = ((t_ * b - c) / a).clamp(0.0, 1.0);
            }
            s = s_;
            t = t_;
        }
    }
    let c1 = add(p1, scale(d1, s));
    let c2 = add(p2, scale(d2, t));
    norm(sub(c1, c2))
}

fn point_segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = sub(b, a);
    let denom = dot(ab, ab);
    let t = if denom <= 1e-18 {
        0.0
    } else {
        (dot(sub(p, a), ab) / denom).clamp(0.0, 1.0)
    };
    norm(sub(p, add(a, scale(ab, t))))
}

/// Distance from a segment to a box: the point-to-box distance is convex
/// piecewise-smooth along the segment, so a ternary search pins the
/// minimizer.
fn segment_box_distance(a: [f64; 3], b: [f64; 3], min: [f64; 3], max: [f64; 3]) -> f64 {
    let f = |t: f64| {
        let p = add(a, scale(sub(b, a), t));
        point_box_distance(p, min, max)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
}

/// Signed separation between two shapes: positive clearance, zero at
/// touch. For overlapping sphere/capsule pairs the magnitude is the
/// penetration depth; box penetrations are reported negative but only
/// approximate the depth.
pub fn pair_distance(a: &Shape, b: &Shape) -> f64 {
    use Shape::*;
    match (a, b) {
        (
            Sphere {
                center: c1,
                radius: r1,
            },
            Sphere {
                center: c2,
                radius: r2,
            },
        ) => norm(sub(*c1, *c2)) - r1 - r2,
        (
            Sphere { center, radius },
            Capsule {
                start,
                end,
                radius: rc,
            },
        )
        | (
            Capsule {
                start,
                end,
                radius: rc,
            },
            Sphere { center, radius },
        ) => point_segment_distance(*center, *start, *end) - radius - rc,
        (
            Capsule {
                start: s1,
                end: e1,
                radius: r1,
            },
            Capsule {
                start: s2,
                end: e2,
                radius: r2,
            },
        ) => segment_segment_distance(*s1, *e1, *s2, *e2) - r1 - r2,
        (Sphere { center, radius }, Box { min, max })
        | (Box { min, max }, Sphere { center, radius }) => {
            point_box_distance(*center, *min, *max) - radius
        }
        (
            Capsule {
                start,
                end,
                radius,
            },
            Box { min, max },
        )
        | (
            Box { min, max },
            Capsule {
                start,
                end,
                radius,
            },
        ) => segment_box_distance(*start, *end, *min, *max) - radius,
        (Box { min: n1, max: x1 }, Box { min: n2, max: x2 }) => {
            // Per-axis gap; negative max-overlap when intersecting.
            let mut gap: f64 = f64::NEG_INFINITY;
            for i in 0..3 {
                gap = gap.max((n2[i] - x1[i]).max(n1[i] - x2[i]));
            }
            gap
        }
    }
}

/// Capsule radii for the eight body segments: seven joint-to-joint links
/// plus the probe body (horn and mixer) carried by the bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkGeometry {
    pub link_radii: [f64; 7],
    pub bracket_radius: f64,
    /// The probe-body capsule spans this fraction range of the
    /// flange-to-tip line: the slim printed mount near the flange and the
    /// aperture plane at the tip stay uncovered.
    pub bracket_start: f64,
    pub bracket_reach: f64,
    /// The first link starts this high above the base origin so the
    /// pedestal mount is not treated as part of the moving chain.
    pub base_clearance: f64,
}

impl Default for LinkGeometry {
    fn default() -> Self {
        Self {
            link_radii: [0.09, 0.09, 0.075, 0.075, 0.045, 0.045, 0.04],
            bracket_radius: 0.025,
            bracket_start: 0.3,
            bracket_reach: 0.9,
            base_clearance: 0.12,
        }
    }
}

/// Static measurement scene: obstacle list, the arm's own geometry, and
/// the optional riser under the device fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub obstacles: Vec<Shape>,
    pub link_geometry: LinkGeometry,
    /// Probe tip in the flange frame; the bracket capsule points at it.
    pub probe_tip_flange: [f64; 3],
    pub riser_height: f64,
}

impl Scene {
    /// Empty scene with default link geometry; the arm can only hit itself.
    pub fn empty() -> Self {
        Self {
            obstacles: Vec::new(),
            link_geometry: LinkGeometry::default(),
            probe_tip_flange: [0.0, 0.0, 0.08],
            riser_height: 0.0,
        }
    }

    /// Default bench, direct placement: a 1.2 x 0.8 m table slab in front
    /// of the arm, the device board flat on the table at the scan centre,
    /// and the fixture/clamp hardware parked beside the scan hemisphere.
    /// Artifact defaults, configurable.
    pub fn default_bench(probe_tip_flange: [f64; 3]) -> Self {
        Self {
            obstacles: vec![
                Shape::Box {
                    min: [0.15, -0.4, -0.05],
                    max: [1.35, 0.4, 0.0],
                },
                Shape::Box {
                    min: [0.40, 0.28, 0.0],
                    max: [0.50, 0.38, 0.05],
                },
            ],
            link_geometry: LinkGeometry::default(),
            probe_tip_flange,
            riser_height: 0.0,
        }
    }

    /// Elevates the device under test: inserts a cylindrical pedestal
    /// post below the device position. The caller raises the
    /// sphere-centre calibration by the same amount.
    pub fn with_riser(mut self, height: f64, dut_xy: [f64; 2]) -> Self {
        if height > 0.0 {
            let radius: f64 = 0.02;
            self.obstacles.push(Shape::Capsule {
                start: [dut_xy[0], dut_xy[1], 0.0],
                end: [dut_xy[0], dut_xy[1], (height - radius).max(0.0)],
                radius,
            });
            self.riser_height = height;
        }
        self
    }

    /// Body capsules posed by forward kinematics.
    pub fn body_capsules(&self, dh: &DhTable, q: &JointConfig) -> Vec<Shape> {
        let frames = joint_frames(dh, q);
        let g = &self.link_geometry;
        let mut caps = Vec::with_capacity(8);
        for i in 0..7 {
            let mut start = frames[i].translation;
            if i == 0 {
                start[2] += g.base_clearance;
            }
            caps.push(Shape::Capsule {
                start,
                end: frames[i + 1].translation,
                radius: g.link_radii[i],
            });
        }
        let flange = frames[7];
        caps.push(Shape::Capsule {
            start: flange.apply_point(scale(self.probe_tip_flange, g.bracket_start)),
            end: flange.apply_point(scale(self.probe_tip_flange, g.bracket_reach)),
            radius: g.bracket_radius,
        });
        caps
    }

    fn pair_iter(&self, dh: &DhTable, q: &JointConfig) -> impl Iterator<Item = f64> + '_ {
        let caps = self.body_capsules(dh, q);
        let mut dists = Vec::new();
        for cap in &caps {
            for obs in &self.obstacles {
                dists.push(pair_distance(cap, obs));
            }
        }
        // Self-collision over the degeneracy-reduced chain: coincident DH
        // origins produce zero-length segments, so chain positions count
        // only real segments. Body pairs closer than three positions share
        // sculpted hardware and are excluded, the same exclusions a
        // planning-scene collision matrix would carry. The bracket is
        // checked against every body segment except the wrist it mounts on.
        let body: Vec<usize> = (0..7).filter(|&i| capsule_length(&caps[i]) > 1e-6).collect();
        for (pi, &i) in body.iter().enumerate() {
            for (pj, &j) in body.iter().enumerate().skip(pi + 3) {
                let _ = pj;
                dists.push(pair_distance(&caps[i], &caps[j]));
            }
        }
        if let Some((&last, rest)) = body.split_last() {
            let _ = last;
            for &i in rest {
                dists.push(pair_distance(&caps[i], &caps[7]));
            }
        }
        dists.into_iter()
    }
}

fn capsule_length(s: &Shape) -> f64 {
    match s {
        Shape::Capsule { start, end, .. } => norm(sub(*end, *start)),
        _ => f64::INFINITY,
    }
}

/// True when any posed link capsule touches an obstacle or a non-adjacent
/// link.
pub fn collides(dh: &DhTable, q: &JointConfig, scene: &Scene) -> bool {
    scene.pair_iter(dh, q).any(|d| d <= 0.0)
}

/// Minimum pairwise separation of a collision-free configuration.
pub fn min_clearance(dh: &DhTable, q: &JointConfig, scene: &Scene) -> Result<f64, CollisionError> {
    let min = scene
        .pair_iter(dh, q)
        .fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(CollisionError::InCollision);
    }
    Ok(min)
}

/// Flange pose helper used when constructing scenes around a probe.
pub fn flange_pose(dh: &DhTable, q: &JointConfig) -> Pose {
    joint_frames(dh, q)[7]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{default_home, DhTable, JointLimits};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_pair_distances() {
        let a = Shape::Sphere {
            center: [0.0; 3],
            radius: 0.1,
        };
        let b = Shape::Sphere {
            center: [0.5, 0.0, 0.0],
            radius: 0.1,
        };
        assert!((pair_distance(&a, &b) - 0.3).abs() < 1e-15);
        let c = Shape::Sphere {
            center: [0.0; 3],
            radius: 0.1,
        };
        assert!((pair_distance(&a, &c) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn pair_distance_is_symmetric() {
        let shapes = [
            Shape::Sphere {
                center: [0.1, 0.2, 0.3],
                radius: 0.05,
            },
            Shape::Capsule {
                start: [0.0, 0.0, 0.0],
                end: [0.4, 0.1, 0.0],
                radius: 0.03,
            },
            Shape::Box {
                min: [-0.2, -0.2, -0.2],
                max: [0.2, 0.3, 0.1],
            },
        ];
        for a in &shapes {
            for b in &shapes {
                assert_eq!(pair_distance(a, b), pair_distance(b, a));
            }
        }
    }

    #[test]
    fn capsule_box_matches_dense_sampling_oracle() {
        let cap = Shape::Capsule {
            start: [0.3, -0.25, 0.4],
            end: [-0.1, 0.35, 0.05],
            radius: 0.02,
        };
        let (min, max) = ([-0.3, -0.1, -0.3], [0.05, 0.15, 0.02]);
        let boxed = Shape::Box { min, max };
        let got = pair_distance(&cap, &boxed);

        // Brute-force oracle: dense sampling of the segment.
        let (a, b) = ([0.3, -0.25, 0.4], [-0.1f64, 0.35, 0.05]);
        let mut best = f64::INFINITY;
        for k in 0..=100_000 {
            let t = k as f64 / 100_000.0;
            let p = add(a, scale(sub(b, a), t));
            best = best.min(point_box_distance(p, min, max));
        }
        let expect = best - 0.02;
        assert!((got - expect).abs() < 1e-4, "{got} vs oracle {expect}");
    }

    #[test]
    fn home_posture_is_clear_in_default_bench() {
        let dh = DhTable::default_seven_dof();
        let scene = Scene::default_bench([0.0, 0.0, 0.08]);
        let q = default_home();
        assert!(!collides(&dh, &q, &scene));
        let c = min_clearance(&dh, &q, &scene).unwrap();
        assert!(c > 0.0, "home clearance {c}");
    }

    #[test]
    fn flange_below_table_collides() {
        let dh = DhTable::default_seven_dof();
        let scene = Scene::default_bench([0.0, 0.0, 0.08]);
        // Drive the wrist into the slab region by bending the elbow hard
        // over the table.
        let mut found = None;
        let limits = JointLimits::default_seven_dof();
        let seeds = crate::kinematics::ik_seed_set_wide(&default_home(), &default_home(), &limits);
        let target = crate::se3::Pose::new(
            crate::se3::Rotation::rot_y(std::f64::consts::PI),
            [0.5, 0.0, -0.05],
        );
        let sols = crate::kinematics::ik_solve(
            &dh,
            &target,
            &seeds,
            &limits,
            &crate::kinematics::IkParams::default(),
        );
        for q in sols {
            found = Some(collides(&dh, &q, &scene));
            break;
        }
        assert_eq!(found, Some(true));
    }

    #[test]
    fn empty_scene_home_is_free() {
        let dh = DhTable::default_seven_dof();
        let scene = Scene::empty();
        assert!(!collides(&dh, &default_home(), &scene));
    }

    #[test]
    fn single_pair_clearance_matches_analytic() {
        let dh = DhTable::default_seven_dof();
        let mut scene = Scene::empty();
        // Close enough that the sphere pair governs the minimum.
        let center = [0.38, 0.0, 0.50];
        scene.obstacles.push(Shape::Sphere {
            center,
            radius: 0.02,
        });
        let q = default_home();
        let clearance = min_clearance(&dh, &q, &scene).unwrap();
        let best = scene
            .body_capsules(&dh, &q)
            .iter()
            .map(|c| {
                pair_distance(
                    c,
                    &Shape::Sphere {
                        center,
                        radius: 0.02,
                    },
                )
            })
            .fold(f64::INFINITY, f64::min);
        assert!((clearance - best).abs() < 1e-6, "{clearance} vs {best}");
    }

    #[test]
    fn clearance_decreases_approaching_obstacle() {
        let dh = DhTable::default_seven_dof();
        let mut scene = Scene::empty();
        scene.obstacles.push(Shape::Sphere {
            center: [0.6, 0.0, 0.6],
            radius: 0.05,
        });
        // Swing the base joint toward the obstacle; clearance of sampled
        // configurations along the ray must be non-increasing.
        let mut last = f64::INFINITY;
        for k in 0..=10 {
            let mut q = default_home();
            q.0[1] += 0.04 * k as f64;
            let c = min_clearance(&dh, &q, &scene).unwrap();
            assert!(c <= last + 1e-9, "clearance rose from {last} to {c}");
            last = c;
        }
    }

    #[test]
    fn riser_changes_low_elevation_clearance() {
        let dh = DhTable::default_seven_dof();
        let base = Scene::default_bench([0.0, 0.0, 0.08]);
        let raised = Scene::default_bench([0.0, 0.0, 0.08]).with_riser(0.1, [0.45, 0.0]);
        // Pose the probe low over the device position; the pedestal must
        // change the governing clearance.
        let limits = JointLimits::default_seven_dof();
        let target = crate::se3::Pose::new(
            crate::se3::Rotation::rot_y(std::f64::consts::PI),
            [0.45, 0.0, 0.25],
        );
        let seeds = crate::kinematics::ik_seed_set_wide(&default_home(), &default_home(), &limits);
        let sols = crate::kinematics::ik_solve(
            &dh,
            &target,
            &seeds,
            &limits,
            &crate::kinematics::IkParams::default(),
        );
        let q = sols
            .iter()
            .find(|q| !collides(&dh, q, &base) && !collides(&dh, q, &raised))
            .expect("low pose reachable in both scenes");
        let c0 = min_clearance(&dh, q, &base).unwrap();
        let c1 = min_clearance(&dh, q, &raised).unwrap();
        assert!((c0 - c1).abs() > 1e-6, "riser left clearance unchanged");
    }

    #[test]
    fn boolean_and_scalar_paths_agree() {
        let dh = DhTable::default_seven_dof();
        let scene = Scene::default_bench([0.0, 0.0, 0.08]);
        let limits = JointLimits::default_seven_dof();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10_000 {
            let mut q = [0.0; 7];
            for i in 0..7 {
                q[i] = rng.gen_range(limits.lower[i]..limits.upper[i]);
            }
            let q = JointConfig(q);
            let hit = collides(&dh, &q, &scene);
            let min = scene.pair_iter(&dh, &q).fold(f64::INFINITY, f64::min);
            assert_eq!(hit, min <= 0.0);
        }
    }

    #[test]
    fn adding_obstacle_never_frees_a_collision() {
        let dh = DhTable::default_seven_dof();
        let scene = Scene::default_bench([0.0, 0.0, 0.08]);
        let mut bigger = scene.clone();
        bigger.obstacles.push(Shape::Sphere {
            center: [0.0, 0.6, 0.4],
            radius: 0.2,
        });
        let limits = JointLimits::default_seven_dof();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..2000 {
            let mut q = [0.0; 7];
            for i in 0..7 {
                q[i] = rng.gen_range(limits.lower[i]..limits.upper[i]);
            }
            let q = JointConfig(q);
            if collides(&dh, &q, &scene) {
                assert!(collides(&dh, &q, &bigger));
            }
        }
    }
}
