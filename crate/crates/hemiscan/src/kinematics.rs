//! Seven-revolute-joint serial arm model: forward kinematics over a DH
//! table, the geometric Jacobian, a smallest-singular-value conditioning
//! measure, and damped-least-squares inverse kinematics.
//!
//! The shipped default table follows the published kinematics of a common
//! 7-DoF collaborative arm (modified DH convention, flange offset folded
//! into the last row); any 7-DoF arm can be substituted through the
//! configuration file.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::se3::{Pose, Rotation};

/// Joint-space point for the 7-axis chain, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig(pub [f64; 7]);

impl JointConfig {
    pub const ZERO: Self = Self([0.0; 7]);

    pub fn l2_distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Sum of absolute per-joint increments, the path-length measure.
    pub fn l1_distance(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn lerp(&self, other: &JointConfig, t: f64) -> JointConfig {
        let mut q = [0.0; 7];
        for i in 0..7 {
            q[i] = self.0[i] + (other.0[i] - self.0[i]) * t;
        }
        JointConfig(q)
    }
}

/// One DH row. `theta_offset` is added to the commanded joint angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DhConvention {
    /// Craig: `RotX(alpha_{i-1}) TransX(a_{i-1}) RotZ(theta_i) TransZ(d_i)`,
    /// joint axis is the z axis of frame i.
    #[default]
    Modified,
    /// Denavit-Hartenberg classic: `RotZ(theta) TransZ(d) TransX(a) RotX(alpha)`,
    /// joint axis is the z axis of frame i-1.
    Classic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhTable {
    pub rows: [DhRow; 7],
    pub convention: DhConvention,
}

impl DhTable {
    /// Default 7-DoF table (modified DH, meters/radians). The 0.107 m
    /// flange offset is folded into the last row's `d`.
    pub fn default_seven_dof() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let r = |a: f64, d: f64, alpha: f64| DhRow {
            a,
            d,
            alpha,
            theta_offset: 0.0,
        };
        Self {
            rows: [
                r(0.0, 0.333, 0.0),
                r(0.0, 0.0, -FRAC_PI_2),
                r(0.0, 0.316, FRAC_PI_2),
                r(0.0825, 0.0, FRAC_PI_2),
                r(-0.0825, 0.384, -FRAC_PI_2),
                r(0.0, 0.0, FRAC_PI_2),
                r(0.088, 0.107, FRAC_PI_2),
            ],
            convention: DhConvention::Modified,
        }
    }

    fn joint_transform(&self, row: &DhRow, q: f64) -> Pose {
        let theta = q + row.theta_offset;
        match self.convention {
            DhConvention::Modified => {
                let (st, ct) = theta.sin_cos();
                let (sa, ca) = row.alpha.sin_cos();
                Pose::new(
                    Rotation::from_matrix_unchecked([
                        [ct, -st, 0.0],
                        [st * ca, ct * ca, -sa],
                        [st * sa, ct * sa, ca],
                    ]),
                    [row.a, -row.d * sa, row.d * ca],
                )
            }
            DhConvention::Classic => {
                let (st, ct) = theta.sin_cos();
                let (sa, ca) = row.alpha.sin_cos();
                Pose::new(
                    Rotation::from_matrix_unchecked([
                        [ct, -st * ca, st * sa],
                        [st, ct * ca, -ct * sa],
                        [0.0, sa, ca],
                    ]),
                    [row.a * ct, row.a * st, row.d],
                )
            }
        }
    }
}

/// Per-joint position bounds plus the quasi-static velocity scaling used
/// for execution-time accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    pub lower: [f64; 7],
    pub upper: [f64; 7],
    pub velocity_scale: f64,
}

impl JointLimits {
    pub fn default_seven_dof() -> Self {
        Self {
            lower: [-2.8973, -1.7628, -2.8973, -3.0718, -2.8973, -0.0175, -2.8973],
            upper: [2.8973, 1.7628, 2.8973, -0.0698, 2.8973, 3.7525, 2.8973],
            velocity_scale: 0.05,
        }
    }

    pub fn contains(&self, q: &JointConfig) -> bool {
        q.0.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    pub fn clamp(&self, q: &JointConfig) -> JointConfig {
        let mut out = [0.0; 7];
        for i in 0..7 {
            out[i] = q.0[i].clamp(self.lower[i], self.upper[i]);
        }
        JointConfig(out)
    }
}

/// Default home posture: elbow-down ready pose, well away from limits
/// and singularities. An artifact default, configurable per campaign.
pub fn default_home() -> JointConfig {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    JointConfig([0.0, -FRAC_PI_4, 0.0, -3.0 * PI / 4.0, 0.0, FRAC_PI_2, FRAC_PI_4])
}

/// Poses of every joint frame in base coordinates: `frames[0]` is the
/// base, `frames[i]` the frame after joint i. `frames[7]` is the flange.
pub fn joint_frames(dh: &DhTable, q: &JointConfig) -> [Pose; 8] {
    let mut frames = [Pose::IDENTITY; 8];
    let mut acc = Pose::IDENTITY;
    for i in 0..7 {
        acc = acc.compose(&dh.joint_transform(&dh.rows[i], q.0[i]));
        frames[i + 1] = acc;
    }
    frames
}

/// Flange pose for a joint configuration.
pub fn forward_kinematics(dh: &DhTable, q: &JointConfig) -> Pose {
    joint_frames(dh, q)[7]
}

pub type Jacobian = SMatrix<f64, 6, 7>;

/// Geometric Jacobian at the flange, base coordinates: rows 0-2 map joint
/// rates to linear velocity, rows 3-5 to angular velocity.
pub fn jacobian(dh: &DhTable, q: &JointConfig) -> Jacobian {
    let frames = joint_frames(dh, q);
    let p_ee = frames[7].translation;
    let mut j = Jacobian::zeros();
    for i in 0..7 {
        // Axis frame: post-transform for modified DH, pre-transform for classic.
        let f = match dh.convention {
            DhConvention::Modified => &frames[i + 1],
            DhConvention::Classic => &frames[i],
        };
        let m = f.rotation.matrix();
        let z = [m[0][2], m[1][2], m[2][2]];
        let arm = crate::se3::sub(p_ee, f.translation);
        let v = crate::se3::cross(z, arm);
        for k in 0..3 {
            j[(k, i)] = v[k];
            j[(k + 3, i)] = z[k];
        }
    }
    j
}

/// Smallest singular value of a 6x7 Jacobian; near zero means the
/// configuration sits close to a kinematic singularity.
pub fn sigma_min(j: &Jacobian) -> f64 {
    j.svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Damped-least-squares iteration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct IkParams {
    pub max_iters: usize,
    /// Baseline damping, increased adaptively when the residual grows.
    pub lambda: f64,
    /// Acceptance bounds on the converged solution.
    pub tol_pos: f64,
    pub tol_rot: f64,
    /// Per-iteration cap on any single joint increment, radians.
    pub max_step: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            max_iters: 200,
            lambda: 1e-2,
            tol_pos: 1e-4,
            tol_rot: 1e-3,
            max_step: 0.5,
        }
    }
}

/// Rotation vector (axis * angle) of a rotation matrix.
fn rotation_vector(r: &Rotation) -> [f64; 3] {
    let m = r.matrix();
    let trace = m[0][0] + m[1][1] + m[2][2];
    let c = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = c.acos();
    let skew = [m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]];
    if angle < 1e-7 {
        return crate::se3::scale(skew, 0.5);
    }
    if angle > std::f64::consts::PI - 1e-5 {
        // Near pi the skew part vanishes; recover the axis from the
        // diagonal and fix signs from the off-diagonal sums.
        let xx = ((m[0][0] + 1.0) / 2.0).max(0.0).sqrt();
        let yy = ((m[1][1] + 1.0) / 2.0).max(0.0).sqrt();
        let zz = ((m[2][2] + 1.0) / 2.0).max(0.0).sqrt();
        let mut axis = [xx, yy, zz];
        // Pick the dominant component positive, sign the rest from products.
        if xx >= yy && xx >= zz {
            axis[1] = (m[0][1] + m[1][0]) / (4.0 * xx).max(1e-12) * 2.0;
            axis[2] = (m[0][2] + m[2][0]) / (4.0 * xx).max(1e-12) * 2.0;
            axis[0] = xx;
        } else if yy >= zz {
            axis[0] = (m[0][1] + m[1][0]) / (4.0 * yy).max(1e-12) * 2.0;
            axis[2] = (m[1][2] + m[2][1]) / (4.0 * yy).max(1e-12) * 2.0;
            axis[1] = yy;
        } else {
            axis[0] = (m[0][2] + m[2][0]) / (4.0 * zz).max(1e-12) * 2.0;
            axis[1] = (m[1][2] + m[2][1]) / (4.0 * zz).max(1e-12) * 2.0;
            axis[2] = zz;
        }
        let axis = crate::se3::normalize(axis);
        return crate::se3::scale(axis, angle);
    }
    crate::se3::scale(skew, angle / (2.0 * angle.sin()))
}

fn task_error(current: &Pose, target: &Pose) -> SVector<f64, 6> {
    let p = crate::se3::sub(target.translation, current.translation);
    let r_err = target.rotation * current.rotation.transpose();
    let w = rotation_vector(&r_err);
    SVector::<f64, 6>::from_column_slice(&[p[0], p[1], p[2], w[0], w[1], w[2]])
}

fn solve_damped(jjt: &SMatrix<f64, 6, 6>, rhs: &SVector<f64, 6>) -> SVector<f64, 6> {
    jjt.cholesky()
        .map(|ch| ch.solve(rhs))
        .unwrap_or_else(|| jjt.lu().solve(rhs).unwrap_or_else(SVector::zeros))
}

/// Damped task step plus a null-space pull toward mid-range joints; the
/// secondary term keeps iterates off the limit walls without disturbing
/// the task error to first order.
fn dls_step(
    j: &Jacobian,
    e: &SVector<f64, 6>,
    lambda: f64,
    q: &JointConfig,
    limits: &JointLimits,
) -> SVector<f64, 7> {
    let jjt = j * j.transpose() + SMatrix::<f64, 6, 6>::identity() * (lambda * lambda);
    let task = j.transpose() * solve_damped(&jjt, e);
    // Fade the bias out as the task converges so solutions that sit
    // against a limit remain reachable.
    let gain = 0.08 * (e.norm() * 10.0).min(1.0);
    let mut z = SVector::<f64, 7>::zeros();
    for i in 0..7 {
        let mid = 0.5 * (limits.lower[i] + limits.upper[i]);
        z[i] = gain * (mid - q.0[i]);
    }
    let null = z - j.transpose() * solve_damped(&jjt, &(j * z));
    task + null
}

fn solve_from_seed(
    dh: &DhTable,
    target: &Pose,
    seed: &JointConfig,
    limits: &JointLimits,
    params: &IkParams,
) -> Option<JointConfig> {
    let mut q = limits.clamp(seed);
    let mut lambda = params.lambda;
    let mut pose = forward_kinematics(dh, &q);
    let mut err = task_error(&pose, target);
    let mut res = err.norm();
    for _ in 0..params.max_iters {
        if res < 1e-10 {
            break;
        }
        let j = jacobian(dh, &q);
        let dq = dls_step(&j, &err, lambda, &q, limits);
        let cap = dq.amax();
        let mut scale = if cap > params.max_step {
            params.max_step / cap
        } else {
            1.0
        };
        let mut improved = false;
        for _ in 0..4 {
            let mut trial = q;
            for i in 0..7 {
                trial.0[i] += dq[i] * scale;
            }
            let trial = limits.clamp(&trial);
            let trial_pose = forward_kinematics(dh, &trial);
            let trial_err = task_error(&trial_pose, target);
            let trial_res = trial_err.norm();
            if trial_res < res {
                q = trial;
                pose = trial_pose;
                err = trial_err;
                res = trial_res;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if improved {
            lambda = (lambda / 2.0).max(params.lambda / 10.0);
        } else {
            lambda *= 4.0;
            if lambda > 1e3 {
                break;
            }
        }
    }
    let pos_err = crate::se3::norm(crate::se3::sub(pose.translation, target.translation));
    let rot_err = pose.rotation.angle_to(&target.rotation);
    if pos_err <= params.tol_pos && rot_err <= params.tol_rot && limits.contains(&q) {
        Some(q)
    } else {
        None
    }
}

/// Damped-least-squares IK over a seed set. Returns every distinct
/// converged configuration within limits, in seed order; an empty vector
/// signals an unreachable target.
pub fn ik_solve(
    dh: &DhTable,
    target: &Pose,
    seeds: &[JointConfig],
    limits: &JointLimits,
    params: &IkParams,
) -> Vec<JointConfig> {
    let mut out: Vec<JointConfig> = Vec::new();
    for seed in seeds {
        if let Some(q) = solve_from_seed(dh, target, seed, limits, params) {
            let dup = out.iter().any(|p| p.l2_distance(&q) < 1e-4);
            if !dup {
                out.push(q);
            }
        }
    }
    out
}

/// Standard seed set: the start posture, the home posture, and structured
/// perturbations of home on the shoulder/elbow/wrist joints.
pub fn ik_seed_set(home: &JointConfig, q_start: &JointConfig) -> Vec<JointConfig> {
    let mut seeds = vec![*q_start, *home];
    let delta = 0.6;
    let patterns: [[f64; 7]; 14] = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0],
        [1.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        [-1.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        [1.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [-1.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, -1.0, -1.0, 0.0, -1.0, 0.0, 0.0],
    ];
    for p in patterns {
        let mut q = home.0;
        for i in 0..7 {
            q[i] += delta * p[i];
        }
        seeds.push(JointConfig(q));
    }
    seeds
}

/// All IK candidates for a target from the default wide seed set; the
/// convenience entry point for one-off solves outside a planning chain.
pub fn ik_candidates_default(
    dh: &DhTable,
    limits: &JointLimits,
    target: &Pose,
) -> Vec<JointConfig> {
    let home = default_home();
    let seeds = ik_seed_set_wide(&home, &home, limits);
    ik_solve(dh, target, &seeds, limits, &IkParams::default())
}

/// Seed set extended with a fixed batch of pseudo-random positions inside
/// the limit box, for workspace-boundary targets the structured set
/// misses. The batch is drawn from a constant stream, so the set is the
/// same on every call.
pub fn ik_seed_set_wide(
    home: &JointConfig,
    q_start: &JointConfig,
    limits: &JointLimits,
) -> Vec<JointConfig> {
    use rand::{Rng, SeedableRng};
    let mut seeds = ik_seed_set(home, q_start);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    for _ in 0..24 {
        let mut q = [0.0; 7];
        for i in 0..7 {
            q[i] = rng.gen_range(limits.lower[i]..limits.upper[i]);
        }
        seeds.push(JointConfig(q));
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn panda() -> (DhTable, JointLimits) {
        (DhTable::default_seven_dof(), JointLimits::default_seven_dof())
    }

    fn random_config(rng: &mut ChaCha8Rng, limits: &JointLimits) -> JointConfig {
        let mut q = [0.0; 7];
        for i in 0..7 {
            q[i] = rng.gen_range(limits.lower[i]..limits.upper[i]);
        }
        JointConfig(q)
    }

    #[test]
    fn single_joint_reduction_is_pure_z_rotation() {
        for convention in [DhConvention::Modified, DhConvention::Classic] {
            let zero = DhRow {
                a: 0.0,
                d: 0.0,
                alpha: 0.0,
                theta_offset: 0.0,
            };
            let dh = DhTable {
                rows: [zero; 7],
                convention,
            };
            let q = JointConfig([0.7, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
            let pose = forward_kinematics(&dh, &q);
            let expected = Rotation::rot_z(0.7);
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (pose.rotation.matrix()[i][j] - expected.matrix()[i][j]).abs() < 1e-15
                    );
                }
            }
            assert_eq!(pose.translation, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn fk_home_matches_independent_chain_product() {
        // Frozen from an independent numpy DH-product oracle.
        let (dh, _) = panda();
        let pose = forward_kinematics(&dh, &default_home());
        let expected_t = [0.30689056659294117, 0.0, 0.59028205230283926];
        for i in 0..3 {
            assert!(
                (pose.translation[i] - expected_t[i]).abs() < 1e-12,
                "t[{i}] = {}",
                pose.translation[i]
            );
        }
        let m = pose.rotation.matrix();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected_r = [[s, -s, 0.0], [-s, -s, 0.0], [0.0, 0.0, -1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - expected_r[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fk_is_periodic_per_joint() {
        let (dh, limits) = panda();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_config(&mut rng, &limits);
        let base = forward_kinematics(&dh, &q);
        for i in 0..7 {
            let mut shifted = q;
            shifted.0[i] += std::f64::consts::TAU;
            let p = forward_kinematics(&dh, &shifted);
            assert!(p.rotation.angle_to(&base.rotation) < 1e-9);
            assert!(crate::se3::norm(crate::se3::sub(p.translation, base.translation)) < 1e-9);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (dh, limits) = panda();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 1e-6;
        for _ in 0..100 {
            let q = random_config(&mut rng, &limits);
            let j = jacobian(&dh, &q);
            let scale = j.amax().max(1e-9);
            for i in 0..7 {
                let mut qp = q;
                let mut qm = q;
                qp.0[i] += eps;
                qm.0[i] -= eps;
                let pp = forward_kinematics(&dh, &qp).translation;
                let pm = forward_kinematics(&dh, &qm).translation;
                for k in 0..3 {
                    let fd = (pp[k] - pm[k]) / (2.0 * eps);
                    let rel = (j[(k, i)] - fd).abs() / scale;
                    assert!(rel <= 1e-5, "joint {i} row {k}: {} vs {}", j[(k, i)], fd);
                }
            }
        }
    }

    #[test]
    fn jacobian_rotational_columns_are_unit_axes() {
        let (dh, limits) = panda();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let q = random_config(&mut rng, &limits);
            let j = jacobian(&dh, &q);
            for i in 0..7 {
                let n = (j[(3, i)].powi(2) + j[(4, i)].powi(2) + j[(5, i)].powi(2)).sqrt();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stretched_posture_is_singular() {
        let (dh, _) = panda();
        let s0 = sigma_min(&jacobian(&dh, &JointConfig::ZERO));
        let sh = sigma_min(&jacobian(&dh, &default_home()));
        // Frozen oracle: sigma_min(home) ~ 0.2244, sigma_min(q=0) ~ 1e-17.
        assert!((sh - 0.22437662477281162).abs() < 1e-9, "home sigma {sh}");
        assert!(s0 < sh / 1e6, "stretched sigma {s0} vs home {sh}");
    }

    #[test]
    fn sigma_min_known_spectra() {
        assert_eq!(sigma_min(&Jacobian::zeros()), 0.0);
        let mut j = Jacobian::zeros();
        for i in 0..6 {
            j[(i, i)] = 1.0;
        }
        assert!((sigma_min(&j) - 1.0).abs() < 1e-12);
    }

    /// Independent spectral oracle: smallest eigenvalue of J J^T via cyclic
    /// Jacobi sweeps on the 6x6 symmetric matrix.
    fn sigma_min_oracle(j: &Jacobian) -> f64 {
        let mut a = [[0.0f64; 6]; 6];
        for r in 0..6 {
            for c in 0..6 {
                let mut s = 0.0;
                for k in 0..7 {
                    s += j[(r, k)] * j[(c, k)];
                }
                a[r][c] = s;
            }
        }
        for _ in 0..60 {
            for p in 0..5 {
                for q in (p + 1)..6 {
                    if a[p][q].abs() < 1e-15 {
                        continue;
                    }
                    let theta = 0.5 * (2.0 * a[p][q]).atan2(a[p][p] - a[q][q]);
                    let (s, c) = theta.sin_cos();
                    for k in 0..6 {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp + s * akq;
                        a[k][q] = -s * akp + c * akq;
                    }
                    for k in 0..6 {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk + s * aqk;
                        a[q][k] = -s * apk + c * aqk;
                    }
                }
            }
        }
        let min_ev = (0..6).map(|i| a[i][i]).fold(f64::INFINITY, f64::min);
        min_ev.max(0.0).sqrt()
    }

    #[test]
    fn sigma_min_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut j = Jacobian::zeros();
            for r in 0..6 {
                for c in 0..7 {
                    j[(r, c)] = rng.gen_range(-1.0..1.0);
                }
            }
            let got = sigma_min(&j);
            let expect = sigma_min_oracle(&j);
            assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        }
    }

    #[test]
    fn sigma_min_invariant_under_task_frame_rotation() {
        let (dh, limits) = panda();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let q = random_config(&mut rng, &limits);
            let j = jacobian(&dh, &q);
            let rot = Rotation::rot_z(rng.gen_range(-3.0..3.0))
                * Rotation::rot_y(rng.gen_range(-3.0..3.0));
            let mut block = SMatrix::<f64, 6, 6>::zeros();
            let m = rot.matrix();
            for r in 0..3 {
                for c in 0..3 {
                    block[(r, c)] = m[r][c];
                    block[(r + 3, c + 3)] = m[r][c];
                }
            }
            let rotated = block * j;
            assert!((sigma_min(&rotated) - sigma_min(&j)).abs() < 1e-9);
        }
    }

    #[test]
    fn ik_round_trip_fixed_point() {
        let (dh, limits) = panda();
        let q0 = default_home();
        let target = forward_kinematics(&dh, &q0);
        let sols = ik_solve(&dh, &target, &[q0], &limits, &IkParams::default());
        assert_eq!(sols.len(), 1);
        assert!(sols[0].l2_distance(&q0) < 1e-9);
    }

    #[test]
    fn ik_unreachable_target_returns_empty() {
        let (dh, limits) = panda();
        let target = Pose::from_translation([10.0, 0.0, 0.0]);
        let seeds = ik_seed_set(&default_home(), &default_home());
        let sols = ik_solve(&dh, &target, &seeds, &limits, &IkParams::default());
        assert!(sols.is_empty());
    }

    #[test]
    fn ik_solves_random_reachable_corpus() {
        let (dh, limits) = panda();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = IkParams::default();
        let home = default_home();
        let seeds = ik_seed_set_wide(&home, &home, &limits);
        let total = 300;
        let mut solved = 0;
        for _ in 0..total {
            let q = random_config(&mut rng, &limits);
            let target = forward_kinematics(&dh, &q);
            let sols = ik_solve(&dh, &target, &seeds, &limits, &params);
            if !sols.is_empty() {
                solved += 1;
                for s in &sols {
                    let fk = forward_kinematics(&dh, s);
                    assert!(
                        crate::se3::norm(crate::se3::sub(fk.translation, target.translation))
                            <= params.tol_pos
                    );
                    assert!(fk.rotation.angle_to(&target.rotation) <= params.tol_rot);
                    assert!(limits.contains(s));
                }
            }
        }
        // The full 1000-target bar lives in the acceptance suite.
        assert!(
            solved * 100 >= total * 99,
            "solved {solved}/{total} random targets"
        );
    }

    #[test]
    fn rotation_vector_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..500 {
            let r = Rotation::rot_z(rng.gen_range(-3.1..3.1))
                * Rotation::rot_y(rng.gen_range(-3.1..3.1))
                * Rotation::rot_x(rng.gen_range(-3.1..3.1));
            let w = rotation_vector(&r);
            let angle = crate::se3::norm(w);
            assert!((angle - r.angle_to(&Rotation::IDENTITY)).abs() < 1e-7);
        }
    }
}
