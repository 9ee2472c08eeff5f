//! Campaign configuration: one TOML (or JSON) document that pins the
//! grid, scene, calibration chain, arm model, link model, planner
//! settings, and seeds for a scan campaign.
//!
//! Angles are degrees in files and radians in memory. Every section has
//! defaults describing the shipped bench: a 7-DoF arm in front of a
//! table slab with the device board flat on the table.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::collision::{min_clearance, LinkGeometry, Scene, Shape};
use crate::grid::GridSpec;
use crate::kinematics::{
    ik_candidates_default, DhConvention, DhRow, DhTable, JointConfig, JointLimits,
};
use crate::planner::{GoalSelection, PlanParams, PlannerKind};
use crate::rf::{GriddedPattern, LinkConfig, PatternModel, VerificationTarget};
use crate::se3::{euler_to_rotation, EulerZyx, Pose};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("pattern csv: {0}")]
    Pattern(#[from] crate::rf::RfError),
}

/// Rigid transform spec: intrinsic Z-Y-X Euler angles in degrees plus a
/// translation in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseSpec {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub translation_m: [f64; 3],
}

impl Default for PoseSpec {
    fn default() -> Self {
        Self {
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            roll_deg: 0.0,
            translation_m: [0.0; 3],
        }
    }
}

impl PoseSpec {
    pub fn to_pose(&self) -> Result<Pose, ConfigError> {
        let rotation = euler_to_rotation(EulerZyx::new(
            self.yaw_deg.to_radians(),
            self.pitch_deg.to_radians(),
            self.roll_deg.to_radians(),
        ))
        .map_err(|e| ConfigError::Invalid(format!("pose spec: {e}")))?;
        Ok(Pose::new(rotation, self.translation_m))
    }
}

/// Calibration chain: sphere-centre anchor, bracket offset, and the
/// probe boresight axis in the end-effector frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainCalibration {
    pub base: PoseSpec,
    pub offset: PoseSpec,
    pub boresight: [f64; 3],
}

impl Default for ChainCalibration {
    fn default() -> Self {
        Self {
            base: PoseSpec {
                translation_m: [0.45, 0.0, 0.012],
                ..PoseSpec::default()
            },
            offset: PoseSpec {
                yaw_deg: -100.0,
                translation_m: [0.02, 0.03, 0.15],
                ..PoseSpec::default()
            },
            boresight: crate::se3::DEFAULT_BORESIGHT,
        }
    }
}

/// One DH row with file-friendly units: lengths in meters, angles in
/// degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhRowSpec {
    pub a_m: f64,
    pub d_m: f64,
    pub alpha_deg: f64,
    #[serde(default)]
    pub theta_offset_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmConfig {
    pub convention: DhConvention,
    /// Empty list selects the built-in 7-DoF table.
    pub dh_rows: Vec<DhRowSpec>,
    pub limits_lower_deg: [f64; 7],
    pub limits_upper_deg: [f64; 7],
    pub velocity_scale: f64,
    /// Scan home posture, degrees.
    pub home_deg: [f64; 7],
}

/// Scan home for the default bench: probe parked 16 cm above the device
/// looking straight down, chosen for conditioning and clearance.
pub const DEFAULT_SCAN_HOME: [f64; 7] = [
    1.2574786003159972,
    0.9952175021988316,
    -1.0299287346486603,
    -2.311673064813316,
    -1.72274770548363,
    0.8147013679865635,
    -0.9153345787636707,
];

impl Default for ArmConfig {
    fn default() -> Self {
        let limits = JointLimits::default_seven_dof();
        Self {
            convention: DhConvention::Modified,
            dh_rows: Vec::new(),
            limits_lower_deg: limits.lower.map(f64::to_degrees),
            limits_upper_deg: limits.upper.map(f64::to_degrees),
            velocity_scale: 0.05,
            home_deg: DEFAULT_SCAN_HOME.map(f64::to_degrees),
        }
    }
}

impl ArmConfig {
    pub fn dh_table(&self) -> Result<DhTable, ConfigError> {
        if self.dh_rows.is_empty() {
            let mut table = DhTable::default_seven_dof();
            table.convention = DhConvention::Modified;
            return Ok(table);
        }
        if self.dh_rows.len() != 7 {
            return Err(ConfigError::Invalid(format!(
                "dh_rows must have exactly 7 rows (got {})",
                self.dh_rows.len()
            )));
        }
        let mut rows = [DhRow {
            a: 0.0,
            d: 0.0,
            alpha: 0.0,
            theta_offset: 0.0,
        }; 7];
        for (row, spec) in rows.iter_mut().zip(&self.dh_rows) {
            if ![spec.a_m, spec.d_m, spec.alpha_deg, spec.theta_offset_deg]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(ConfigError::Invalid("non-finite DH entry".into()));
            }
            *row = DhRow {
                a: spec.a_m,
                d: spec.d_m,
                alpha: spec.alpha_deg.to_radians(),
                theta_offset: spec.theta_offset_deg.to_radians(),
            };
        }
        Ok(DhTable {
            rows,
            convention: self.convention,
        })
    }

    pub fn joint_limits(&self) -> Result<JointLimits, ConfigError> {
        let lower = self.limits_lower_deg.map(f64::to_radians);
        let upper = self.limits_upper_deg.map(f64::to_radians);
        for i in 0..7 {
            if !(lower[i] < upper[i]) {
                return Err(ConfigError::Invalid(format!(
                    "joint {} limits empty: [{}, {}] deg",
                    i + 1,
                    self.limits_lower_deg[i],
                    self.limits_upper_deg[i]
                )));
            }
        }
        if !(self.velocity_scale > 0.0 && self.velocity_scale <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "velocity_scale must be in (0, 1] (got {})",
                self.velocity_scale
            )));
        }
        Ok(JointLimits {
            lower,
            upper,
            velocity_scale: self.velocity_scale,
        })
    }

    pub fn home(&self) -> JointConfig {
        JointConfig(self.home_deg.map(f64::to_radians))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Empty list selects the default bench obstacles.
    pub obstacles: Vec<Shape>,
    pub link_geometry: LinkGeometry,
    pub riser_height_m: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            obstacles: Vec::new(),
            link_geometry: LinkGeometry::default(),
            riser_height_m: 0.0,
        }
    }
}

/// Pattern model selection for the simulated transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PatternConfig {
    Analytic {
        peak_gain_dbi: f64,
        exponent_e: f64,
        exponent_h: f64,
    },
    /// CSV with header `phi_deg,theta_deg,gain_dbi` on a regular grid.
    GriddedCsv { path: String },
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig::Analytic {
            peak_gain_dbi: 5.0,
            exponent_e: 8.3,
            exponent_h: 8.3,
        }
    }
}

impl PatternConfig {
    pub fn build(&self, base_dir: &Path) -> Result<PatternModel, ConfigError> {
        match self {
            PatternConfig::Analytic {
                peak_gain_dbi,
                exponent_e,
                exponent_h,
            } => {
                if *exponent_e < 0.0 || *exponent_h < 0.0 {
                    return Err(ConfigError::Invalid(
                        "pattern exponents must be >= 0".into(),
                    ));
                }
                Ok(PatternModel::Analytic {
                    peak_gain_dbi: *peak_gain_dbi,
                    exponent_e: *exponent_e,
                    exponent_h: *exponent_h,
                })
            }
            PatternConfig::GriddedCsv { path } => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full).map_err(|source| ConfigError::Io {
                    path: full.display().to_string(),
                    source,
                })?;
                Ok(PatternModel::Gridded(GriddedPattern::from_csv(&text)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub goal_selection: GoalSelection,
    pub rrt_step_rad: f64,
    pub validation_step_rad: f64,
    pub max_nodes: usize,
    pub shortcut_iters: usize,
    pub sigma_min_threshold: f64,
    pub nominal_joint_speed_rad_s: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let p = PlanParams::default();
        Self {
            kind: PlannerKind::RrtConnect,
            goal_selection: p.goal_selection,
            rrt_step_rad: p.rrt_step_rad,
            validation_step_rad: p.validation_step_rad,
            max_nodes: p.max_nodes,
            shortcut_iters: p.shortcut_iters,
            sigma_min_threshold: p.sigma_min_threshold,
            nominal_joint_speed_rad_s: p.nominal_joint_speed,
        }
    }
}

impl PlannerConfig {
    pub fn plan_params(&self) -> PlanParams {
        PlanParams {
            rrt_step_rad: self.rrt_step_rad,
            validation_step_rad: self.validation_step_rad,
            max_nodes: self.max_nodes,
            shortcut_iters: self.shortcut_iters,
            sigma_min_threshold: self.sigma_min_threshold,
            goal_selection: self.goal_selection,
            ik: crate::kinematics::IkParams::default(),
            nominal_joint_speed: self.nominal_joint_speed_rad_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub dwell_s: f64,
    /// Validity bounds on extracted power, dBm.
    pub valid_floor_dbm: f64,
    pub valid_ceiling_dbm: f64,
    pub transport_retries: u32,
    pub retry_backoff_s: f64,
    pub min_coverage: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            dwell_s: 1.0,
            valid_floor_dbm: -85.0,
            valid_ceiling_dbm: 0.0,
            transport_retries: 3,
            retry_backoff_s: 1.0,
            min_coverage: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    pub planner: u64,
    pub noise: u64,
    pub environment: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            planner: 1,
            noise: 2,
            environment: 3,
        }
    }
}

impl SeedConfig {
    /// Derives all three streams from one master seed.
    pub fn from_master(master: u64) -> Self {
        Self {
            planner: master.wrapping_mul(3).wrapping_add(1),
            noise: master.wrapping_mul(3).wrapping_add(2),
            environment: master.wrapping_mul(3).wrapping_add(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstrumentConfig {
    pub host: String,
    pub port: u16,
    /// Trace bins rendered by the emulated analyzer.
    pub trace_bins: usize,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 5025,
            trace_bins: 1001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub grid: GridSpec,
    pub scene: SceneConfig,
    pub chain: ChainCalibration,
    pub arm: ArmConfig,
    pub link: LinkConfig,
    pub pattern: PatternConfig,
    pub planner: PlannerConfig,
    pub acquisition: AcquisitionConfig,
    pub verification: VerificationTarget,
    pub seeds: SeedConfig,
    pub instrument: InstrumentConfig,
}

/// Everything a run needs, resolved into runtime types.
#[derive(Debug, Clone)]
pub struct RuntimeSetup {
    pub grid_spec: GridSpec,
    pub dh: DhTable,
    pub limits: JointLimits,
    pub scene: Scene,
    pub t_base: Pose,
    pub t_offset: Pose,
    pub boresight: [f64; 3],
    pub home: JointConfig,
    pub pattern: PatternModel,
    pub link: LinkConfig,
    pub plan_params: PlanParams,
    pub planner_kind: PlannerKind,
    pub acquisition: AcquisitionConfig,
    pub verification: VerificationTarget,
    pub seeds: SeedConfig,
    pub instrument: InstrumentConfig,
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let is_json = path.extension().map(|e| e == "json").unwrap_or(false);
        let config: CampaignConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        };
        Ok(config)
    }

    /// Elevates the device: raises the sphere centre and inserts the
    /// pedestal into the scene, keeping the two consistent.
    pub fn apply_riser(&mut self, height_m: f64) {
        self.chain.base.translation_m[2] += height_m;
        self.scene.riser_height_m = height_m;
    }

    /// Stable digest of the parsed configuration; reordering keys in the
    /// file does not change it.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolve(&self, base_dir: &Path) -> Result<RuntimeSetup, ConfigError> {
        self.grid
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("grid: {e}")))?;
        let dh = self.arm.dh_table()?;
        let limits = self.arm.joint_limits()?;
        let t_base = self.chain.base.to_pose()?;
        let t_offset = self.chain.offset.to_pose()?;
        let boresight = self.chain.boresight;
        let norm = crate::se3::norm(boresight);
        if !(norm.is_finite() && norm > 1e-9) {
            return Err(ConfigError::Invalid("boresight must be non-zero".into()));
        }

        let probe_tip = t_offset.invert().translation;
        let mut scene = if self.scene.obstacles.is_empty() {
            Scene::default_bench(probe_tip)
        } else {
            Scene {
                obstacles: self.scene.obstacles.clone(),
                link_geometry: self.scene.link_geometry.clone(),
                probe_tip_flange: probe_tip,
                riser_height: 0.0,
            }
        };
        scene.link_geometry = self.scene.link_geometry.clone();
        if self.scene.riser_height_m > 0.0 {
            let dut_xy = [
                self.chain.base.translation_m[0],
                self.chain.base.translation_m[1],
            ];
            scene = scene.with_riser(self.scene.riser_height_m, dut_xy);
        }

        let home = self.arm.home();
        if !limits.contains(&home) {
            return Err(ConfigError::Invalid(
                "home posture violates joint limits".into(),
            ));
        }

        Ok(RuntimeSetup {
            grid_spec: self.grid.clone(),
            dh,
            limits,
            scene,
            t_base,
            t_offset,
            boresight,
            home,
            pattern: self.pattern.build(base_dir)?,
            link: self.link.clone(),
            plan_params: self.planner.plan_params(),
            planner_kind: self.planner.kind,
            acquisition: self.acquisition.clone(),
            verification: self.verification.clone(),
            seeds: self.seeds,
            instrument: self.instrument.clone(),
        })
    }
}

/// Picks a well-conditioned, collision-free parked posture above the
/// device by solving IK for the straight-down pose at the given radius.
/// Deterministic; used when a campaign changes the bench geometry enough
/// that the shipped home no longer applies.
pub fn derive_park_home(
    setup_dh: &DhTable,
    limits: &JointLimits,
    scene: &Scene,
    t_base: &Pose,
    t_offset: &Pose,
    park_radius_m: f64,
) -> Option<JointConfig> {
    let coord = crate::se3::SphericalCoord::new(0.0, 0.0, park_radius_m).ok()?;
    let t_park = crate::se3::final_pose(t_base, coord, t_offset);
    let candidates = ik_candidates_default(setup_dh, limits, &t_park);
    let mut best: Option<(f64, JointConfig)> = None;
    for q in candidates {
        if crate::collision::collides(setup_dh, &q, scene) {
            continue;
        }
        let sigma = crate::kinematics::sigma_min(&crate::kinematics::jacobian(setup_dh, &q));
        let clearance = min_clearance(setup_dh, &q, scene).unwrap_or(0.0);
        let score = sigma.min(clearance);
        if best.map(|(b, _)| score > b).unwrap_or(true) {
            best = Some((score, q));
        }
    }
    best.map(|(_, q)| q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves() {
        let config = CampaignConfig::default();
        let setup = config.resolve(Path::new(".")).unwrap();
        assert_eq!(setup.grid_spec, GridSpec::default());
        assert!(setup.limits.contains(&setup.home));
        assert!(!crate::collision::collides(
            &setup.dh,
            &setup.home,
            &setup.scene
        ));
    }

    #[test]
    fn hash_stable_under_key_reordering() {
        let a: CampaignConfig = toml::from_str(
            "[grid]\nradius_m = 0.08\nphi_step_deg = 20.0\n\n[acquisition]\ndwell_s = 2.0\n",
        )
        .unwrap();
        let b: CampaignConfig = toml::from_str(
            "[acquisition]\ndwell_s = 2.0\n\n[grid]\nphi_step_deg = 20.0\nradius_m = 0.08\n",
        )
        .unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let c: CampaignConfig = toml::from_str("[grid]\nradius_m = 0.09\n").unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn riser_adjusts_base_and_scene_together() {
        let mut config = CampaignConfig::default();
        let z0 = config.chain.base.translation_m[2];
        config.apply_riser(0.1);
        assert_eq!(config.chain.base.translation_m[2], z0 + 0.1);
        let setup = config.resolve(Path::new(".")).unwrap();
        assert_eq!(setup.scene.riser_height, 0.1);
        assert_eq!(
            setup.scene.obstacles.len(),
            Scene::default_bench([0.0; 3]).obstacles.len() + 1
        );
    }

    #[test]
    fn bad_limits_are_rejected() {
        let mut config = CampaignConfig::default();
        config.arm.limits_lower_deg[2] = 10.0;
        config.arm.limits_upper_deg[2] = -10.0;
        assert!(matches!(
            config.resolve(Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn arm_config_round_trips_degrees() {
        let mut config = ArmConfig::default();
        config.dh_rows = vec![
            DhRowSpec {
                a_m: 0.0,
                d_m: 0.333,
                alpha_deg: 0.0,
                theta_offset_deg: 0.0,
            };
            7
        ];
        config.dh_rows[1].alpha_deg = -90.0;
        let table = config.dh_table().unwrap();
        assert!((table.rows[1].alpha - (-std::f64::consts::FRAC_PI_2)).abs() < 1e-12);
    }
}
