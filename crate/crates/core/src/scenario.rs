//! Human-edited scenario files (TOML). One file fixes a whole run: tank,
//! trajectory, surface-vehicle behaviour, sonar, noise, sensor rates, filter
//! and solver settings. Angles are in degrees here and converted to radians
//! when the runtime configs are built.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::EkfConfig;
use crate::geometry::{EulerZYX, Pose3, Vec3};
use crate::sim::{AsvMode, NoiseSpec, SensorRates, TankSpec, TrajectorySpec};
use crate::solver::SolverConfig;
use crate::sonar::SonarConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountSection {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl Default for MountSection {
    fn default() -> Self {
        Self {
            x: 0.3,
            y: 0.0,
            z: -0.2,
            yaw_deg: 0.0,
            pitch_deg: 25.0,
            roll_deg: 0.0,
        }
    }
}

impl MountSection {
    pub fn pose(&self) -> Pose3 {
        Pose3::from_euler(
            EulerZYX::from_degrees(self.yaw_deg, self.pitch_deg, self.roll_deg),
            Vec3::new(self.x, self.y, self.z),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SonarSection {
    pub hfov_deg: f64,
    pub vmin_deg: f64,
    pub vmax_deg: f64,
    pub rmax: f64,
    pub img_w: usize,
    pub img_h: usize,
    pub mount: MountSection,
}

impl Default for SonarSection {
    fn default() -> Self {
        Self {
            hfov_deg: 130.0,
            vmin_deg: -20.0,
            vmax_deg: 20.0,
            rmax: 30.0,
            img_w: 512,
            img_h: 512,
            mount: MountSection::default(),
        }
    }
}

impl SonarSection {
    pub fn config(&self) -> SonarConfig {
        SonarConfig {
            hfov: self.hfov_deg.to_radians(),
            vmin: self.vmin_deg.to_radians(),
            vmax: self.vmax_deg.to_radians(),
            rmax: self.rmax,
            img_w: self.img_w,
            img_h: self.img_h,
            mount: self.mount.pose(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsvModeKind {
    Stationary,
    Hover,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsvSection {
    pub mode: AsvModeKind,
    /// Stationary position.
    pub x: f64,
    pub y: f64,
    /// Base-frame height above the world origin (both modes).
    pub z: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    /// Hover: desired offset from the ROV in world x/y.
    pub offset_x: f64,
    pub offset_y: f64,
    /// Hover: first-order lag time constant, s.
    pub lag: f64,
    pub rock_amplitude_deg: f64,
    pub rock_frequency_hz: f64,
}

impl Default for AsvSection {
    fn default() -> Self {
        Self {
            mode: AsvModeKind::Stationary,
            x: 4.0,
            y: 8.0,
            z: 0.0,
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            roll_deg: 0.0,
            offset_x: -5.0,
            offset_y: 0.0,
            lag: 1.0,
            rock_amplitude_deg: 0.0,
            rock_frequency_hz: 0.5,
        }
    }
}

impl AsvSection {
    pub fn mode(&self) -> AsvMode {
        match self.mode {
            AsvModeKind::Stationary => AsvMode::Stationary {
                pose: Pose3::from_euler(
                    EulerZYX::from_degrees(self.yaw_deg, self.pitch_deg, self.roll_deg),
                    Vec3::new(self.x, self.y, self.z),
                ),
            },
            AsvModeKind::Hover => AsvMode::Hover {
                offset: [self.offset_x, self.offset_y],
                z: self.z,
                yaw: self.yaw_deg.to_radians(),
                lag: self.lag,
                rock_amplitude: self.rock_amplitude_deg.to_radians(),
                rock_frequency: self.rock_frequency_hz,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub gyro_std: f64,
    pub accel_std: f64,
    pub slam_pos_std: f64,
    pub slam_yaw_std_deg: f64,
    pub azimuth_std_deg: f64,
    pub range_std: f64,
    pub pixel_std: f64,
    pub depth_std: f64,
    pub dropout: f64,
    pub outlier_rate: f64,
    pub outlier_pixel_std: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            gyro_std: 0.0,
            accel_std: 0.0,
            slam_pos_std: 0.0,
            slam_yaw_std_deg: 0.0,
            azimuth_std_deg: 0.0,
            range_std: 0.0,
            pixel_std: 2.0,
            depth_std: 0.005,
            dropout: 0.0,
            outlier_rate: 0.0,
            outlier_pixel_std: 20.0,
        }
    }
}

impl NoiseSection {
    /// All noise off.
    pub fn zero() -> Self {
        Self {
            pixel_std: 0.0,
            depth_std: 0.0,
            ..Self::default()
        }
    }

    pub fn spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            gyro_std: self.gyro_std,
            accel_std: self.accel_std,
            slam_pos_std: self.slam_pos_std,
            slam_yaw_std: self.slam_yaw_std_deg.to_radians(),
            azimuth_std: self.azimuth_std_deg.to_radians(),
            range_std: self.range_std,
            pixel_std: self.pixel_std,
            depth_std: self.depth_std,
            dropout: self.dropout,
            outlier_rate: self.outlier_rate,
            outlier_pixel_std: self.outlier_pixel_std,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tangency_rel: f64,
    pub consistency_tol: f64,
    pub azimuth_tol_deg: Option<f64>,
    pub aperture_margin_deg: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tangency_rel: d.tangency_rel,
            consistency_tol: d.consistency_tol,
            azimuth_tol_deg: None,
            aperture_margin_deg: 1.0,
        }
    }
}

impl SolverSection {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            tangency_rel: self.tangency_rel,
            consistency_tol: self.consistency_tol,
            azimuth_tol: self.azimuth_tol_deg.map(f64::to_radians),
            aperture_margin: self.aperture_margin_deg.to_radians(),
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Height of the detected reference point above the depth sensor, m.
    pub depth_lever_arm: f64,
    /// Truth association window, s.
    pub association_window: f64,
    /// Histogram bin count for error reports.
    pub histogram_bins: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            depth_lever_arm: 0.0,
            association_window: 0.05,
            histogram_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub tank: TankSpec,
    pub trajectory: TrajectorySpec,
    pub asv: AsvSection,
    pub sonar: SonarSection,
    pub noise: NoiseSection,
    pub rates: SensorRates,
    pub ekf: EkfConfig,
    pub solver: SolverSection,
    pub pipeline: PipelineSection,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable in TOML")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if !self.tank.is_valid() {
            return bad("tank dimensions must be positive");
        }
        if !self.sonar.config().is_valid() {
            return bad("sonar geometry out of range");
        }
        if !self.ekf.is_valid() {
            return bad("ekf parameters must be positive");
        }
        if !self.noise.spec(0).is_valid() {
            return bad("noise standard deviations must be >= 0 and rates in [0, 1]");
        }
        if !self.rates.is_valid() {
            return bad("sensor rates must be positive");
        }
        if !(self.trajectory.speed > 0.0
            && self.trajectory.dt > 0.0
            && self.trajectory.margin >= 0.0)
        {
            return bad("trajectory needs speed > 0, dt > 0, margin >= 0");
        }
        Ok(())
    }

    pub fn trajectory_spec(&self) -> TrajectorySpec {
        TrajectorySpec {
            seed: self.seed,
            ..self.trajectory.clone()
        }
    }

    /// Noise stream seed, decorrelated from the trajectory seed.
    pub fn noise_spec(&self) -> NoiseSpec {
        self.noise.spec(self.seed ^ 0x9e37_79b9_7f4a_7c15)
    }

    pub fn sonar_config(&self) -> SonarConfig {
        self.sonar.config()
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.config()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
