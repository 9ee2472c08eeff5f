//! Collision-aware motion planning for the scan pipeline.
//!
//! For each commanded probe pose the planner solves IK from a spread of
//! seeds, drops candidates outside joint limits, near singularities, or
//! in collision, picks the goal closest to the current posture, and runs
//! a bidirectional RRT in joint space with shortcut smoothing. A failed
//! planning attempt triggers one deterministic recovery: retreat to the
//! home posture and replan from there.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::collision::{collides, min_clearance, Scene};
use crate::kinematics::{
    forward_kinematics, ik_seed_set_wide, ik_solve, jacobian, sigma_min, DhTable, IkParams,
    JointConfig, JointLimits,
};
use crate::se3::Pose;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("goal selection over an empty candidate set")]
    EmptyCandidates,
}

/// Joint-space path. Consecutive waypoints stay within the planner step
/// bound; the length is the sum of absolute joint increments.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<JointConfig>,
    pub joint_path_length: f64,
}

impl Trajectory {
    fn from_waypoints(waypoints: Vec<JointConfig>) -> Self {
        let joint_path_length = waypoints
            .windows(2)
            .map(|w| w[0].l1_distance(&w[1]))
            .sum();
        Self {
            waypoints,
            joint_path_length,
        }
    }

    pub fn last(&self) -> &JointConfig {
        self.waypoints.last().expect("trajectory is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Success,
    FailureNoIk,
    FailureAllFiltered,
    FailurePlanning,
}

impl PlanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanStatus::Success => "success",
            PlanStatus::FailureNoIk => "failure_no_ik",
            PlanStatus::FailureAllFiltered => "failure_all_filtered",
            PlanStatus::FailurePlanning => "failure_planning",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub status: PlanStatus,
    pub trajectory: Option<Trajectory>,
    pub used_recovery: bool,
    pub planning_time_s: f64,
    /// Where the arm ends up: the goal on success, home when recovery
    /// moved it there before a failed replan, otherwise the start.
    pub end_config: JointConfig,
}

/// How to pick among the admissible IK candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoalSelection {
    /// Minimum joint-space distance to the start (the pseudocode rule).
    #[default]
    ClosestToStart,
    /// Maximum clearance from the collision boundary (the prose rule;
    /// the two sources disagree, so both are available).
    MaxClearance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    RrtConnect,
    /// Straight-line joint interpolation baseline; cannot detour.
    JointInterpolation,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::RrtConnect => "rrt_connect",
            PlannerKind::JointInterpolation => "joint_interpolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanParams {
    pub rrt_step_rad: f64,
    pub validation_step_rad: f64,
    pub max_nodes: usize,
    pub shortcut_iters: usize,
    pub sigma_min_threshold: f64,
    pub goal_selection: GoalSelection,
    pub ik: IkParams,
    /// Nominal joint speed used only for simulated execution-time
    /// accounting, rad/s, scaled by the limits' velocity fraction.
    pub nominal_joint_speed: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            rrt_step_rad: 0.1,
            validation_step_rad: 0.02,
            max_nodes: 5000,
            shortcut_iters: 100,
            sigma_min_threshold: 1e-3,
            goal_selection: GoalSelection::default(),
            ik: IkParams::default(),
            nominal_joint_speed: 2.0,
        }
    }
}

/// Candidate minimizing joint-space distance to the start; ties break to
/// the lexicographically lowest joint vector.
pub fn select_goal(
    candidates: &[JointConfig],
    q_start: &JointConfig,
) -> Result<JointConfig, PlanError> {
    let mut best: Option<(f64, JointConfig)> = None;
    for c in candidates {
        let d = c.l2_distance(q_start);
        let better = match &best {
            None => true,
            Some((bd, bq)) => {
                d < *bd - 1e-12
                    || ((d - *bd).abs() <= 1e-12
                        && c.0
                            .iter()
                            .zip(bq.0.iter())
                            .find(|(a, b)| a != b)
                            .map(|(a, b)| a < b)
                            .unwrap_or(false))
            }
        };
        if better {
            best = Some((d, *c));
        }
    }
    best.map(|(_, q)| q).ok_or(PlanError::EmptyCandidates)
}

/// The joint-space straight segment between two configurations is valid
/// when every interpolated configuration at the validation resolution is
/// collision-free and within limits.
fn segment_valid(
    dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    a: &JointConfig,
    b: &JointConfig,
    step: f64,
) -> bool {
    let dist = a.l2_distance(b);
    let n = (dist / step).ceil() as usize;
    for k in 0..=n {
        let t = if n == 0 { 1.0 } else { k as f64 / n as f64 };
        let q = a.lerp(b, t);
        if !limits.contains(&q) || collides(dh, &q, scene) {
            return false;
        }
    }
    true
}

struct Tree {
    nodes: Vec<JointConfig>,
    parents: Vec<usize>,
}

impl Tree {
    fn new(root: JointConfig) -> Self {
        Self {
            nodes: vec![root],
            parents: vec![usize::MAX],
        }
    }

    fn nearest(&self, q: &JointConfig) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.l2_distance(q);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn path_to_root(&self, mut idx: usize) -> Vec<JointConfig> {
        let mut path = Vec::new();
        while idx != usize::MAX {
            path.push(self.nodes[idx]);
            idx = self.parents[idx];
        }
        path
    }
}

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

fn extend_tree(
    tree: &mut Tree,
    target: &JointConfig,
    dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    params: &PlanParams,
) -> Extend {
    let near_idx = tree.nearest(target);
    let near = tree.nodes[near_idx];
    let dist = near.l2_distance(target);
    let (q_new, reached) = if dist <= params.rrt_step_rad {
        (*target, true)
    } else {
        (near.lerp(target, params.rrt_step_rad / dist), false)
    };
    if !segment_valid(dh, limits, scene, &near, &q_new, params.validation_step_rad) {
        return Extend::Trapped;
    }
    tree.nodes.push(q_new);
    tree.parents.push(near_idx);
    let idx = tree.nodes.len() - 1;
    if reached {
        Extend::Reached(idx)
    } else {
        Extend::Advanced(idx)
    }
}

fn connect_tree(
    tree: &mut Tree,
    target: &JointConfig,
    dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    params: &PlanParams,
    budget: &mut usize,
) -> Option<usize> {
    loop {
        if *budget == 0 {
            return None;
        }
        *budget -= 1;
        match extend_tree(tree, target, dh, limits, scene, params) {
            Extend::Trapped => return None,
            Extend::Advanced(_) => continue,
            Extend::Reached(i) => return Some(i),
        }
    }
}

fn shortcut(
    path: Vec<JointConfig>,
    dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    params: &PlanParams,
    rng: &mut ChaCha8Rng,
) -> Vec<JointConfig> {
    let mut path = path;
    for _ in 0..params.shortcut_iters {
        if path.len() < 3 {
            break;
        }
        let i = rng.gen_range(0..path.len() - 2);
        let j = rng.gen_range(i + 2..path.len());
        if segment_valid(dh, limits, scene, &path[i], &path[j], params.validation_step_rad) {
            path.drain(i + 1..j);
        }
    }
    path
}

/// Re-subdivides a path so consecutive waypoints obey the step bound.
fn densify(path: Vec<JointConfig>, step: f64) -> Vec<JointConfig> {
    let mut out = Vec::with_capacity(path.len());
    for w in path.windows(2) {
        let n = (w[0].l2_distance(&w[1]) / step).ceil().max(1.0) as usize;
        for k in 0..n {
            out.push(w[0].lerp(&w[1], k as f64 / n as f64));
        }
    }
    if let Some(last) = path.last() {
        out.push(*last);
    }
    out
}

/// Bidirectional RRT between two valid configurations. Deterministic for
/// a fixed seed. Tries the straight segment first, then grows trees from
/// both ends until they connect or the node budget runs out; the raw path
/// is shortcut-smoothed and re-subdivided at the step bound.
pub fn rrt_connect(
    dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    q_start: &JointConfig,
    q_goal: &JointConfig,
    seed: u64,
    params: &PlanParams,
) -> Option<Trajectory> {
    if q_start.l2_distance(q_goal) < 1e-12 {
        return Some(Trajectory::from_waypoints(vec![*q_start]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if segment_valid(dh, limits, scene, q_start, q_goal, params.validation_step_rad) {
        let path = densify(vec![*q_start, *q_goal], params.rrt_step_rad);
        return Some(Trajectory::from_waypoints(path));
    }

    let mut tree_a = Tree::new(*q_start);
    let mut tree_b = Tree::new(*q_goal);
    let mut a_is_start = true;
    let mut budget = params.max_nodes;

    while budget > 0 {
        budget -= 1;
        let mut q_rand = [0.0; 7];
        for i in 0..7 {
            q_rand[i] = rng.gen_range(limits.lower[i]..limits.upper[i]);
        }
        let q_rand = JointConfig(q_rand);
        let new_idx = match extend_tree(&mut tree_a, &q_rand, dh, limits, scene, params) {
            Extend::Trapped => {
                std::mem::swap(&mut tree_a, &mut tree_b);
                a_is_start = !a_is_start;
                continue;
            }
            Extend::Advanced(i) | Extend::Reached(i) => i,
        };
        let q_new = tree_a.nodes[new_idx];
        if let Some(b_idx) = connect_tree(&mut tree_b, &q_new, dh, limits, scene, params, &mut budget)
        {
            let mut part_a = tree_a.path_to_root(new_idx);
            part_a.reverse();
            let part_b = tree_b.path_to_root(b_idx);
            let raw: Vec<JointConfig> = if a_is_start {
                part_a.into_iter().chain(part_b).collect()
            } else {
                let mut p = part_b;
                p.reverse();
                p.extend(part_a.into_iter().rev());
                p
            };
            let smooth = shortcut(raw, dh, limits, scene, params, &mut rng);
            let path = densify(smooth, params.rrt_step_rad);
            return Some(Trajectory::from_waypoints(path));
        }
        std::mem::swap(&mut tree_a, &mut tree_b);
        a_is_start = !a_is_start;
    }
    None
}

fn plan_segment(
    kind: PlannerKind,
    dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    q_start: &JointConfig,
    q_goal: &JointConfig,
    seed: u64,
    params: &PlanParams,
) -> Option<Trajectory> {
    match kind {
        PlannerKind::RrtConnect => rrt_connect(dh, limits, scene, q_start, q_goal, seed, params),
        PlannerKind::JointInterpolation => {
            if q_start.l2_distance(q_goal) < 1e-12 {
                return Some(Trajectory::from_waypoints(vec![*q_start]));
            }
            if segment_valid(dh, limits, scene, q_start, q_goal, params.validation_step_rad) {
                let path = densify(vec![*q_start, *q_goal], params.rrt_step_rad);
                Some(Trajectory::from_waypoints(path))
            } else {
                None
            }
        }
    }
}

/// Full planning decision for one commanded pose: IK, joint-limit and
/// singularity and collision filtering, goal selection, planning, and a
/// single fallback through home on planner failure.
#[allow(clippy::too_many_arguments)]
pub fn plan_to_pose(
    kind: PlannerKind,
    dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    t_final: &Pose,
    q_start: &JointConfig,
    q_home: &JointConfig,
    seed: u64,
    params: &PlanParams,
) -> PlanOutcome {
    let t0 = Instant::now();
    let done = |status, trajectory: Option<Trajectory>, used_recovery, end| PlanOutcome {
        status,
        trajectory,
        used_recovery,
        planning_time_s: t0.elapsed().as_secs_f64(),
        end_config: end,
    };

    let seeds = ik_seed_set_wide(q_home, q_start, limits);
    let candidates = ik_solve(dh, t_final, &seeds, limits, &params.ik);
    if candidates.is_empty() {
        return done(PlanStatus::FailureNoIk, None, false, *q_start);
    }
    let admissible: Vec<JointConfig> = candidates
        .into_iter()
        .filter(|q| sigma_min(&jacobian(dh, q)) > params.sigma_min_threshold)
        .filter(|q| !collides(dh, q, scene))
        .collect();
    if admissible.is_empty() {
        return done(PlanStatus::FailureAllFiltered, None, false, *q_start);
    }
    let q_goal = match params.goal_selection {
        GoalSelection::ClosestToStart => select_goal(&admissible, q_start).expect("non-empty"),
        GoalSelection::MaxClearance => admissible
            .iter()
            .copied()
            .max_by(|a, b| {
                let ca = min_clearance(dh, a, scene).unwrap_or(0.0);
                let cb = min_clearance(dh, b, scene).unwrap_or(0.0);
                ca.partial_cmp(&cb).unwrap()
            })
            .expect("non-empty"),
    };

    if let Some(traj) = plan_segment(kind, dh, limits, scene, q_start, &q_goal, seed, params) {
        let end = *traj.last();
        return done(PlanStatus::Success, Some(traj), false, end);
    }

    // Single recovery: retreat to home, then replan once from there.
    let Some(home_leg) =
        plan_segment(kind, dh, limits, scene, q_start, q_home, seed ^ 1, params)
    else {
        return done(PlanStatus::FailurePlanning, None, false, *q_start);
    };
    match plan_segment(kind, dh, limits, scene, q_home, &q_goal, seed ^ 2, params) {
        Some(second) => {
            let mut waypoints = home_leg.waypoints;
            waypoints.extend(second.waypoints.into_iter().skip(1));
            let traj = Trajectory::from_waypoints(waypoints);
            let end = *traj.last();
            done(PlanStatus::Success, Some(traj), true, end)
        }
        // The home move was executed before the failed replan.
        None => done(PlanStatus::FailurePlanning, None, true, *q_home),
    }
}

/// One benchmark row: the outcome of planning to one grid pose.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub planner: &'static str,
    pub pose_index: usize,
    pub status: &'static str,
    pub time_s: f64,
    pub path_length_rad: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlannerSummary {
    pub planner: &'static str,
    pub poses: usize,
    pub success_rate: f64,
    pub mean_planning_time_s: f64,
    pub mean_path_length_rad: f64,
    pub recoveries: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub summaries: Vec<PlannerSummary>,
}

/// Runs each planner over the grid poses in execution order, chaining the
/// start posture from the previous outcome exactly as a scan would.
#[allow(clippy::too_many_arguments)]
pub fn benchmark(
    grid: &[crate::grid::SphericalSample],
    t_base: &Pose,
    t_offset: &Pose,
    dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    q_home: &JointConfig,
    planners: &[PlannerKind],
    seed: u64,
    params: &PlanParams,
) -> BenchmarkReport {
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &kind in planners {
        let mut q_current = *q_home;
        let mut successes = 0usize;
        let mut recoveries = 0usize;
        let mut time_sum = 0.0;
        let mut length_sum = 0.0;
        for sample in grid {
            let t_final = crate::se3::final_pose(t_base, sample.coord, t_offset);
            let outcome = plan_to_pose(
                kind,
                dh,
                limits,
                scene,
                &t_final,
                &q_current,
                q_home,
                seed.wrapping_add(sample.index as u64),
                params,
            );
            let length = outcome
                .trajectory
                .as_ref()
                .map(|t| t.joint_path_length)
                .unwrap_or(0.0);
            rows.push(BenchmarkRow {
                planner: kind.as_str(),
                pose_index: sample.index,
                status: outcome.status.as_str(),
                time_s: outcome.planning_time_s,
                path_length_rad: length,
            });
            if outcome.status == PlanStatus::Success {
                successes += 1;
                length_sum += length;
            }
            if outcome.used_recovery {
                recoveries += 1;
            }
            time_sum += outcome.planning_time_s;
            q_current = outcome.end_config;
        }
        let n = grid.len().max(1);
        summaries.push(PlannerSummary {
            planner: kind.as_str(),
            poses: grid.len(),
            success_rate: successes as f64 / n as f64,
            mean_planning_time_s: time_sum / n as f64,
            mean_path_length_rad: if successes > 0 {
                length_sum / successes as f64
            } else {
                0.0
            },
            recoveries,
        });
    }
    BenchmarkReport { rows, summaries }
}
