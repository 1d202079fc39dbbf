//! Tilt EKF over (roll, pitch) driven by gyro rates and corrected by the
//! gravity direction seen by the accelerometer. Yaw and horizontal position
//! come from 2D SLAM and are fused into the full surface-vehicle pose by
//! [`fuse_asv_pose`].
//!
//! Gyro biases are assumed removed upstream; the state has no bias terms.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, EulerZYX, Pose3, Vec3};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Pitch magnitude at which propagation is declared divergent.
pub const PITCH_LIMIT: f64 = FRAC_PI_2 - 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttitudeError {
    #[error("pitch {0} rad reached the tan() singularity")]
    NumericalDivergence(f64),
    #[error("accelerometer norm {norm} m/s² rejected (gravity {gravity} m/s²)")]
    MeasurementRejected { norm: f64, gravity: f64 },
    #[error("propagation step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    /// Body angular rate, rad/s.
    pub omega: Vec3,
    /// Specific force, m/s².
    pub accel: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlamPose2D {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfConfig {
    /// Gyro white-noise density, (rad/s)/√Hz.
    pub gyro_noise_density: f64,
    /// Accelerometer noise standard deviation per sample, m/s².
    pub accel_noise_std: f64,
    /// Initial variance on roll and pitch, rad².
    pub initial_cov: f64,
    pub gravity: f64,
    /// Reject accelerometer samples whose norm differs from g by more than this fraction of g.
    pub accel_gate: f64,
    /// `true` when a level, static accelerometer reads +g on body z.
    pub accel_z_up: bool,
    /// Longest single Euler step; longer gaps are split.
    pub max_dt: f64,
    /// Relinearisations per accelerometer update; 1 is the plain EKF update.
    pub update_iterations: usize,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            gyro_noise_density: 1e-3,
            accel_noise_std: 0.05,
            initial_cov: 0.1,
            gravity: STANDARD_GRAVITY,
            accel_gate: 0.3,
            accel_z_up: true,
            max_dt: 0.1,
            update_iterations: 5,
        }
    }
}

impl EkfConfig {
    pub fn is_valid(&self) -> bool {
        [
            self.gyro_noise_density,
            self.accel_noise_std,
            self.initial_cov,
            self.gravity,
            self.accel_gate,
            self.max_dt,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
            && self.update_iterations >= 1
    }
}

/// Roll/pitch estimate with its 2×2 covariance (order: roll, pitch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeState {
    pub roll: f64,
    pub pitch: f64,
    pub cov: Matrix2<f64>,
}

impl AttitudeState {
    pub fn new(roll: f64, pitch: f64, variance: f64) -> Self {
        Self {
            roll,
            pitch,
            cov: Matrix2::identity() * variance,
        }
    }

    /// Level attitude with the configured initial covariance.
    pub fn level(cfg: &EkfConfig) -> Self {
        Self::new(0.0, 0.0, cfg.initial_cov)
    }

    /// Roll and pitch from a single static accelerometer reading.
    pub fn from_accel(accel: &Vec3, cfg: &EkfConfig) -> Self {
        let a = if cfg.accel_z_up { *accel } else { -accel };
        let roll = a.y.atan2(a.z);
        let pitch = (-a.x).atan2(a.y.hypot(a.z));
        Self::new(roll, pitch, cfg.initial_cov)
    }

    fn angles(&self) -> Vector2<f64> {
        Vector2::new(self.roll, self.pitch)
    }
}

/// Euler-angle rates (φ̇, θ̇) for body rates ω at attitude (φ, θ).
pub fn euler_rates(roll: f64, pitch: f64, omega: &Vec3) -> Vector2<f64> {
    let (sr, cr) = roll.sin_cos();
    let tp = pitch.tan();
    Vector2::new(
        omega.x + omega.y * sr * tp + omega.z * cr * tp,
        omega.y * cr - omega.z * sr,
    )
}

/// Expected specific force for a static body at (φ, θ): Rx(φ)ᵀ·Ry(θ)ᵀ·[0, 0, g]ᵀ.
pub fn gravity_in_body(roll: f64, pitch: f64, g: f64) -> Vec3 {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vec3::new(-g * sp, g * sr * cp, g * cr * cp)
}

fn predict_step(s: &AttitudeState, omega: &Vec3, dt: f64, cfg: &EkfConfig) -> AttitudeState {
    let (sr, cr) = s.roll.sin_cos();
    let tp = s.pitch.tan();
    let sec2 = 1.0 + tp * tp;

    let rates = euler_rates(s.roll, s.pitch, omega);
    let x = s.angles() + rates * dt;

    // Jacobian of the continuous model w.r.t. (φ, θ)
    let a = Matrix2::new(
        (omega.y * cr - omega.z * sr) * tp,
        (omega.y * sr + omega.z * cr) * sec2,
        -omega.y * sr - omega.z * cr,
        0.0,
    );
    let f = Matrix2::identity() + a * dt;
    // Gyro noise enters through the same kinematic map.
    let g = Matrix2x3::new(1.0, sr * tp, cr * tp, 0.0, cr, -sr);
    let q = g * g.transpose() * (cfg.gyro_noise_density * cfg.gyro_noise_density);

    let cov = f * s.cov * f.transpose() + q * dt;
    AttitudeState {
        roll: wrap_angle(x.x),
        pitch: x.y,
        cov: symmetrize(&cov),
    }
}

/// Propagates the state through `dt` seconds of constant body rate `imu.omega`.
pub fn ekf_predict(
    s: &AttitudeState,
    imu: &ImuSample,
    dt: f64,
    cfg: &EkfConfig,
) -> Result<AttitudeState, AttitudeError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(AttitudeError::InvalidStep(dt));
    }
    let steps = (dt / cfg.max_dt).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut out = *s;
    for _ in 0..steps {
        if out.pitch.abs() >= PITCH_LIMIT {
            return Err(AttitudeError::NumericalDivergence(out.pitch));
        }
        out = predict_step(&out, &imu.omega, h, cfg);
    }
    if out.pitch.abs() >= PITCH_LIMIT || !out.pitch.is_finite() {
        return Err(AttitudeError::NumericalDivergence(out.pitch));
    }
    Ok(out)
}

/// Accelerometer correction of roll and pitch.
pub fn ekf_update(
    s: &AttitudeState,
    accel: &Vec3,
    cfg: &EkfConfig,
) -> Result<AttitudeState, AttitudeError> {
    let g = cfg.gravity;
    let norm = accel.norm();
    if !norm.is_finite() || norm < 0.5 * g || (norm - g).abs() > cfg.accel_gate * g {
        return Err(AttitudeError::MeasurementRejected { norm, gravity: g });
    }
    let z = if cfg.accel_z_up { *accel } else { -accel };

    let r = Matrix3::identity() * (cfg.accel_noise_std * cfg.accel_noise_std);
    let x0 = s.angles();
    let mut x = x0;
    let mut gain = Matrix2x3::zeros();
    let mut jac = Matrix3x2::zeros();
    for _ in 0..cfg.update_iterations.max(1) {
        jac = measurement_jacobian(x.x, x.y, g);
        let innov_cov = jac * s.cov * jac.transpose() + r;
        let Some(inv) = innov_cov.try_inverse() else {
            return Err(AttitudeError::MeasurementRejected { norm, gravity: g });
        };
        gain = s.cov * jac.transpose() * inv;
        let innov: Vector3<f64> = z - gravity_in_body(x.x, x.y, g) - jac * (x0 - x);
        let next = x0 + gain * innov;
        let step = (next - x).amax();
        x = next;
        if step < 1e-12 {
            break;
        }
    }

    // Joseph form keeps the covariance symmetric positive-definite.
    let ikh = Matrix2::identity() - gain * jac;
    let cov = ikh * s.cov * ikh.transpose() + gain * r * gain.transpose();
    Ok(AttitudeState {
        roll: wrap_angle(x.x),
        pitch: x.y,
        cov: symmetrize(&cov),
    })
}

fn measurement_jacobian(roll: f64, pitch: f64, g: f64) -> Matrix3x2<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Matrix3x2::new(
        0.0,
        -g * cp,
        g * cr * cp,
        -g * sr * sp,
        -g * sr * cp,
        -g * cr * sp,
    )
}

/// Full surface-vehicle pose from EKF tilt, SLAM yaw and position, and a fixed z.
pub fn fuse_asv_pose(s: &AttitudeState, slam: &SlamPose2D, asv_z: f64) -> Pose3 {
    Pose3::from_euler(
        EulerZYX::new(slam.yaw, s.pitch, s.roll),
        Vec3::new(slam.x, slam.y, asv_z),
    )
}

fn symmetrize(m: &Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Outcome of feeding one IMU sample to [`TiltEkf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImuOutcome {
    Initialized,
    Updated,
    /// Propagated but the accelerometer sample was gated out.
    Rejected,
}

/// Sequential single-vehicle filter: holds the state, the last rate sample
/// and its timestamp. Each sample propagates from the previous timestamp
/// using the previous rate, then applies the accelerometer correction.
#[derive(Debug, Clone)]
pub struct TiltEkf {
    cfg: EkfConfig,
    state: Option<AttitudeState>,
    last: Option<ImuSample>,
    rejected: usize,
}

impl TiltEkf {
    pub fn new(cfg: EkfConfig) -> Self {
        Self {
            cfg,
            state: None,
            last: None,
            rejected: 0,
        }
    }

    /// Starts from an explicit prior instead of the first accelerometer reading.
    pub fn with_prior(cfg: EkfConfig, prior: AttitudeState) -> Self {
        Self {
            cfg,
            state: Some(prior),
            last: None,
            rejected: 0,
        }
    }

    pub fn config(&self) -> &EkfConfig {
        &self.cfg
    }

    pub fn state(&self) -> Option<&AttitudeState> {
        self.state.as_ref()
    }

    pub fn rejected_count(&self) -> usize {
        self.rejected
    }

    pub fn process(&mut self, imu: &ImuSample) -> Result<ImuOutcome, AttitudeError> {
        let Some(mut state) = self.state else {
            self.state = Some(AttitudeState::from_accel(&imu.accel, &self.cfg));
            self.last = Some(*imu);
            return Ok(ImuOutcome::Initialized);
        };
        if let Some(prev) = self.last {
            let dt = imu.t - prev.t;
            if dt > 0.0 {
                state = ekf_predict(&state, &prev, dt, &self.cfg)?;
            }
        }
        self.last = Some(*imu);
        let outcome = match ekf_update(&state, &imu.accel, &self.cfg) {
            Ok(s) => {
                state = s;
                ImuOutcome::Updated
            }
            Err(AttitudeError::MeasurementRejected { .. }) => {
                self.rejected += 1;
                ImuOutcome::Rejected
            }
            Err(e) => return Err(e),
        };
        self.state = Some(state);
        Ok(outcome)
    }
}
