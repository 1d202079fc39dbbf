//! Deterministic scenario simulation: ROV trajectories inside a tank, the
//! surface vehicle's motion, and noisy sensor streams synthesized from
//! ground truth with a single seeded generator.

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::EkfConfig;
use crate::dataset::{
    Dataset, DatasetHeader, DepthRecord, DetectionRecord, ImuRecord, Record, RecordData, RovTruth,
    SlamRecord, DATASET_FORMAT, FORMAT_VERSION,
};
use crate::geometry::{wrap_angle, EulerZYX, Pose3, Vec3};
use crate::scenario::Scenario;
use crate::solver::sonar_pose_world;
use crate::sonar::{
    in_fov, pixel_to_polar, point_to_polar, polar_to_pixel, PixelDetection, PolarDetection,
    SonarConfig,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("trajectory does not fit the tank: {0}")]
    SpecInfeasible(String),
}

/// Tank extents; the world origin sits at a top corner, water surface at z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TankSpec {
    pub length: f64,
    pub width: f64,
    pub depth: f64,
}

impl Default for TankSpec {
    fn default() -> Self {
        Self {
            length: 28.0,
            width: 16.0,
            depth: 8.0,
        }
    }
}

impl TankSpec {
    pub fn is_valid(&self) -> bool {
        [self.length, self.width, self.depth]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0.0..=self.length).contains(&p.x)
            && (0.0..=self.width).contains(&p.y)
            && (-self.depth..=0.0).contains(&p.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Square,
    Lawnmower,
    Bouncing,
    Random,
    TwoFloor,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 5] = [
        TrajectoryKind::Square,
        TrajectoryKind::Lawnmower,
        TrajectoryKind::Bouncing,
        TrajectoryKind::Random,
        TrajectoryKind::TwoFloor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrajectoryKind::Square => "square",
            TrajectoryKind::Lawnmower => "lawnmower",
            TrajectoryKind::Bouncing => "bouncing",
            TrajectoryKind::Random => "random",
            TrajectoryKind::TwoFloor => "two_floor",
        }
    }
}

/// Horizontal box the pattern is drawn in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// m/s along the path.
    pub speed: f64,
    /// Ground-truth sample period, s.
    pub dt: f64,
    /// Defaults to one traversal of the pattern.
    pub duration: Option<f64>,
    /// Clearance kept from every tank wall, floor and surface, m.
    pub margin: f64,
    /// Main depth level (world z, negative).
    pub depth: f64,
    /// Second level for `two_floor`.
    pub depth2: f64,
    /// Depth oscillation amplitude (`bouncing`) or depth spread (`random`), m.
    pub amplitude: f64,
    /// Path length per depth oscillation for `bouncing`, m.
    pub wavelength: f64,
    pub lane_spacing: f64,
    pub bounces: usize,
    pub waypoints: usize,
    #[serde(skip)]
    pub seed: u64,
    /// Defaults to the tank footprint minus the margin.
    pub region: Option<Region>,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Square,
            speed: 0.5,
            dt: 0.01,
            duration: None,
            margin: 1.0,
            depth: -3.0,
            depth2: -4.5,
            amplitude: 0.75,
            wavelength: 8.0,
            lane_spacing: 2.0,
            bounces: 8,
            waypoints: 10,
            seed: 0,
            region: Some(Region {
                x_min: 9.0,
                x_max: 20.0,
                y_min: 3.0,
                y_max: 13.0,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RovSample {
    pub t: f64,
    pub pos: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthSample {
    pub t: f64,
    pub rov_pos: Vec3,
    pub asv_pose: Pose3,
}

fn infeasible<T>(msg: impl Into<String>) -> Result<T, SimError> {
    Err(SimError::SpecInfeasible(msg.into()))
}

fn lawnmower_xy(r: &Region, spacing: f64) -> Vec<(f64, f64)> {
    let lanes = ((r.y_max - r.y_min) / spacing).floor() as usize;
    let mut pts = Vec::with_capacity(2 * (lanes + 1));
    for k in 0..=lanes {
        let y = r.y_min + k as f64 * spacing;
        if k % 2 == 0 {
            pts.push((r.x_min, y));
            pts.push((r.x_max, y));
        } else {
            pts.push((r.x_max, y));
            pts.push((r.x_min, y));
        }
    }
    pts
}

fn billiard_xy(r: &Region, bounces: usize) -> Vec<(f64, f64)> {
    let (mut x, mut y) = (r.x_min, r.y_min + 0.3 * (r.y_max - r.y_min));
    let ang = 35f64.to_radians();
    let (mut dx, mut dy) = (ang.cos(), ang.sin());
    let mut pts = vec![(x, y)];
    for _ in 0..=bounces {
        let tx = if dx > 0.0 {
            (r.x_max - x) / dx
        } else {
            (r.x_min - x) / dx
        };
        let ty = if dy > 0.0 {
            (r.y_max - y) / dy
        } else {
            (r.y_min - y) / dy
        };
        let step = tx.min(ty);
        x = (x + dx * step).clamp(r.x_min, r.x_max);
        y = (y + dy * step).clamp(r.y_min, r.y_max);
        pts.push((x, y));
        if tx <= ty {
            dx = -dx;
        }
        if ty <= tx {
            dy = -dy;
        }
    }
    pts
}

/// Splits each segment so no piece exceeds `step`, keeping the endpoints.
fn densify(pts: &[(f64, f64)], step: f64) -> Vec<(f64, f64)> {
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            let f = i as f64 / n as f64;
            out.push((a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f));
        }
    }
    out
}

/// Builds the 3D polyline for a pattern and reports whether it is closed.
fn pattern_polyline(spec: &TrajectorySpec, r: &Region) -> (Vec<Vec3>, bool) {
    let at = |pts: &[(f64, f64)], z: f64| {
        pts.iter()
            .map(|&(x, y)| Vec3::new(x, y, z))
            .collect::<Vec<_>>()
    };
    match spec.kind {
        TrajectoryKind::Square => {
            let c = [
                (r.x_min, r.y_min),
                (r.x_max, r.y_min),
                (r.x_max, r.y_max),
                (r.x_min, r.y_max),
                (r.x_min, r.y_min),
            ];
            (at(&c, spec.depth), true)
        }
        TrajectoryKind::Lawnmower => (at(&lawnmower_xy(r, spec.lane_spacing), spec.depth), false),
        TrajectoryKind::TwoFloor => {
            let lanes = lawnmower_xy(r, spec.lane_spacing);
            let mut path = at(&lanes, spec.depth);
            let back: Vec<(f64, f64)> = lanes.iter().rev().copied().collect();
            path.extend(at(&back, spec.depth2));
            (path, false)
        }
        TrajectoryKind::Bouncing => {
            let flat = densify(&billiard_xy(r, spec.bounces), 0.05);
            let mut s = 0.0;
            let mut out = Vec::with_capacity(flat.len());
            for (i, &(x, y)) in flat.iter().enumerate() {
                if i > 0 {
                    let (px, py) = flat[i - 1];
                    s += (x - px).hypot(y - py);
                }
                let z = spec.depth
                    + spec.amplitude * (std::f64::consts::TAU * s / spec.wavelength).sin();
                out.push(Vec3::new(x, y, z));
            }
            (out, false)
        }
        TrajectoryKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let pts = (0..spec.waypoints.max(2))
                .map(|_| {
                    Vec3::new(
                        rng.random_range(r.x_min..=r.x_max),
                        rng.random_range(r.y_min..=r.y_max),
                        spec.depth + spec.amplitude * rng.random_range(-1.0..=1.0),
                    )
                })
                .collect();
            (pts, false)
        }
    }
}

fn check_feasible(spec: &TrajectorySpec, tank: &TankSpec) -> Result<Region, SimError> {
    if !(spec.speed > 0.0 && spec.dt > 0.0 && spec.margin >= 0.0) {
        return infeasible("speed and dt must be positive, margin non-negative");
    }
    let m = spec.margin;
    let r = spec.region.unwrap_or(Region {
        x_min: m,
        x_max: tank.length - m,
        y_min: m,
        y_max: tank.width - m,
    });
    if !(r.x_min < r.x_max && r.y_min < r.y_max) {
        return infeasible("empty region");
    }
    if r.x_min < m || r.y_min < m || r.x_max > tank.length - m || r.y_max > tank.width - m {
        return infeasible(format!("region {r:?} exceeds the tank minus {m} m margin"));
    }
    let (z_lo, z_hi) = (-tank.depth + m, -m);
    let levels: Vec<f64> = match spec.kind {
        TrajectoryKind::Square | TrajectoryKind::Lawnmower => vec![spec.depth],
        TrajectoryKind::TwoFloor => vec![spec.depth, spec.depth2],
        TrajectoryKind::Bouncing | TrajectoryKind::Random => {
            vec![
                spec.depth - spec.amplitude.abs(),
                spec.depth + spec.amplitude.abs(),
            ]
        }
    };
    if levels.iter().any(|z| !(*z >= z_lo && *z <= z_hi)) {
        return infeasible(format!("depths {levels:?} outside [{z_lo}, {z_hi}]"));
    }
    match spec.kind {
        TrajectoryKind::Lawnmower | TrajectoryKind::TwoFloor
            if spec.lane_spacing.is_nan() || spec.lane_spacing <= 0.0 =>
        {
            infeasible("lane_spacing must be positive")
        }
        TrajectoryKind::Bouncing if spec.wavelength.is_nan() || spec.wavelength <= 0.0 => {
            infeasible("wavelength must be positive")
        }
        _ => Ok(r),
    }
}

/// Position at arclength `s` along a polyline with cumulative lengths `cum`.
fn point_at(path: &[Vec3], cum: &[f64], s: f64) -> Vec3 {
    let i = cum.partition_point(|&c| c <= s).clamp(1, path.len() - 1);
    let seg = cum[i] - cum[i - 1];
    if seg <= 0.0 {
        return path[i];
    }
    let f = ((s - cum[i - 1]) / seg).clamp(0.0, 1.0);
    path[i - 1] + (path[i] - path[i - 1]) * f
}

/// ROV ground-truth track sampled every `dt` at constant path speed.
pub fn gen_trajectory(spec: &TrajectorySpec, tank: &TankSpec) -> Result<Vec<RovSample>, SimError> {
    let region = check_feasible(spec, tank)?;
    let (path, closed) = pattern_polyline(spec, &region);
    let mut cum = Vec::with_capacity(path.len());
    let mut total = 0.0;
    cum.push(0.0);
    for w in path.windows(2) {
        total += (w[1] - w[0]).norm();
        cum.push(total);
    }
    if total.is_nan() || total <= 0.0 {
        return infeasible("pattern has zero length");
    }

    let step = spec.speed * spec.dt;
    let n = match spec.duration {
        Some(d) if d > 0.0 => (d / spec.dt).round() as usize,
        Some(_) => return infeasible("duration must be positive"),
        None => (total / step).ceil() as usize,
    };
    let samples = (0..=n)
        .map(|k| {
            let mut s = k as f64 * step;
            if spec.duration.is_none() {
                s = s.min(total);
            } else if closed {
                s = s.rem_euclid(total);
            } else {
                // ping-pong on open paths
                let m = s.rem_euclid(2.0 * total);
                s = if m > total { 2.0 * total - m } else { m };
            }
            RovSample {
                t: k as f64 * spec.dt,
                pos: point_at(&path, &cum, s),
            }
        })
        .collect();
    Ok(samples)
}

/// Surface-vehicle behaviour while the ROV moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AsvMode {
    Stationary {
        pose: Pose3,
    },
    /// Follows the ROV's x/y plus `offset` through a first-order lag with
    /// time constant `lag`, with sinusoidal roll/pitch rocking.
    Hover {
        offset: [f64; 2],
        z: f64,
        yaw: f64,
        lag: f64,
        rock_amplitude: f64,
        rock_frequency: f64,
    },
}

pub fn asv_track(rov: &[RovSample], mode: &AsvMode) -> Vec<Pose3> {
    match *mode {
        AsvMode::Stationary { pose } => vec![pose; rov.len()],
        AsvMode::Hover {
            offset,
            z,
            yaw,
            lag,
            rock_amplitude,
            rock_frequency,
        } => {
            let mut out = Vec::with_capacity(rov.len());
            let mut xy = match rov.first() {
                Some(s) => [s.pos.x + offset[0], s.pos.y + offset[1]],
                None => return out,
            };
            let mut prev_t = rov[0].t;
            for s in rov {
                let target = [s.pos.x + offset[0], s.pos.y + offset[1]];
                let dt = s.t - prev_t;
                let alpha = if lag > 0.0 {
                    1.0 - (-dt / lag).exp()
                } else {
                    1.0
                };
                xy[0] += alpha * (target[0] - xy[0]);
                xy[1] += alpha * (target[1] - xy[1]);
                prev_t = s.t;

                let phase = std::f64::consts::TAU * rock_frequency * s.t;
                let roll = rock_amplitude * phase.sin();
                let pitch = 0.5 * rock_amplitude * phase.cos();
                out.push(Pose3::from_euler(
                    EulerZYX::new(yaw, pitch, roll),
                    Vec3::new(xy[0], xy[1], z),
                ));
            }
            out
        }
    }
}

pub fn ground_truth(rov: &[RovSample], asv: &[Pose3]) -> Vec<GroundTruthSample> {
    rov.iter()
        .zip(asv)
        .map(|(r, a)| GroundTruthSample {
            t: r.t,
            rov_pos: r.pos,
            asv_pose: *a,
        })
        .collect()
}

/// Sensor noise; angular quantities in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub gyro_std: f64,
    pub accel_std: f64,
    pub slam_pos_std: f64,
    pub slam_yaw_std: f64,
    pub azimuth_std: f64,
    pub range_std: f64,
    pub pixel_std: f64,
    pub depth_std: f64,
    pub dropout: f64,
    pub outlier_rate: f64,
    pub outlier_pixel_std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            gyro_std: 0.0,
            accel_std: 0.0,
            slam_pos_std: 0.0,
            slam_yaw_std: 0.0,
            azimuth_std: 0.0,
            range_std: 0.0,
            pixel_std: 0.0,
            depth_std: 0.0,
            dropout: 0.0,
            outlier_rate: 0.0,
            outlier_pixel_std: 0.0,
            seed,
        }
    }

    pub fn is_valid(&self) -> bool {
        let sigmas = [
            self.gyro_std,
            self.accel_std,
            self.slam_pos_std,
            self.slam_yaw_std,
            self.azimuth_std,
            self.range_std,
            self.pixel_std,
            self.depth_std,
            self.outlier_pixel_std,
        ];
        sigmas.iter().all(|s| s.is_finite() && *s >= 0.0)
            && (0.0..=1.0).contains(&self.dropout)
            && (0.0..=1.0).contains(&self.outlier_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorRates {
    pub imu_hz: f64,
    pub slam_hz: f64,
    pub depth_hz: f64,
    pub detection_hz: f64,
}

impl Default for SensorRates {
    fn default() -> Self {
        Self {
            imu_hz: 100.0,
            slam_hz: 10.0,
            depth_hz: 20.0,
            detection_hz: 10.0,
        }
    }
}

impl SensorRates {
    pub fn is_valid(&self) -> bool {
        [self.imu_hz, self.slam_hz, self.depth_hz, self.detection_hz]
            .iter()
            .all(|r| r.is_finite() && *r > 0.0)
    }

    /// Ground-truth samples between emissions at `hz` (at least 1).
    fn stride(hz: f64, dt: f64) -> usize {
        ((1.0 / (hz * dt)).round() as usize).max(1)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn body_rate(a: &Pose3, b: &Pose3, dt: f64) -> Vec3 {
    let rel = (a.rot.transpose() * b.rot).matrix().to_owned();
    Rotation3::from_matrix_unchecked(rel).scaled_axis() / dt
}

/// Turns ground truth into interleaved sensor records. Every random draw
/// happens in a fixed order regardless of visibility or noise level, so one
/// seed gives the same underlying normal variates for any σ.
pub fn synthesize_sensors(
    gt: &[GroundTruthSample],
    cfg: &SonarConfig,
    noise: &NoiseSpec,
    rates: &SensorRates,
    ekf: &EkfConfig,
) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut out = Vec::new();
    if gt.is_empty() {
        return out;
    }
    let dt = if gt.len() > 1 { gt[1].t - gt[0].t } else { 1.0 };
    let imu_stride = SensorRates::stride(rates.imu_hz, dt);
    let slam_stride = SensorRates::stride(rates.slam_hz, dt);
    let depth_stride = SensorRates::stride(rates.depth_hz, dt);
    let det_stride = SensorRates::stride(rates.detection_hz, dt);
    let accel_sign = if ekf.accel_z_up { 1.0 } else { -1.0 };
    let (w, h) = ((cfg.img_w - 1) as f64, (cfg.img_h - 1) as f64);

    for (k, s) in gt.iter().enumerate() {
        out.push(Record::new(
            s.t,
            RecordData::GtRov(RovTruth { p: s.rov_pos }),
        ));
        out.push(Record::new(s.t, RecordData::GtAsv(s.asv_pose)));

        if k % imu_stride == 0 {
            let omega = if k + imu_stride < gt.len() {
                let j = k + imu_stride;
                body_rate(&s.asv_pose, &gt[j].asv_pose, gt[j].t - s.t)
            } else if k >= imu_stride {
                let i = k - imu_stride;
                body_rate(&gt[i].asv_pose, &s.asv_pose, s.t - gt[i].t)
            } else {
                Vec3::zeros()
            };
            let g_body = s.asv_pose.rot.transpose() * Vec3::new(0.0, 0.0, ekf.gravity);
            let mut n6 = [0.0; 6];
            for v in n6.iter_mut() {
                *v = normal(&mut rng);
            }
            let omega = omega + Vec3::new(n6[0], n6[1], n6[2]) * noise.gyro_std;
            let accel = (g_body + Vec3::new(n6[3], n6[4], n6[5]) * noise.accel_std) * accel_sign;
            out.push(Record::new(
                s.t,
                RecordData::Imu(ImuRecord { omega, accel }),
            ));
        }

        if k % slam_stride == 0 {
            let (nx, ny, nyaw) = (normal(&mut rng), normal(&mut rng), normal(&mut rng));
            let yaw = s.asv_pose.rot.to_euler_zyx().map(|e| e.yaw).unwrap_or(0.0);
            out.push(Record::new(
                s.t,
                RecordData::Slam(SlamRecord {
                    x: s.asv_pose.trans.x + noise.slam_pos_std * nx,
                    y: s.asv_pose.trans.y + noise.slam_pos_std * ny,
                    yaw_rad: wrap_angle(yaw + noise.slam_yaw_std * nyaw),
                }),
            ));
        }

        if k % depth_stride == 0 {
            let n = normal(&mut rng);
            out.push(Record::new(
                s.t,
                RecordData::Depth(DepthRecord {
                    z_depth: s.rov_pos.z + noise.depth_std * n,
                }),
            ));
        }

        if k % det_stride == 0 {
            let drop_draw: f64 = rng.random();
            let outlier_draw: f64 = rng.random();
            let mut n = [0.0; 6];
            for v in n.iter_mut() {
                *v = normal(&mut rng);
            }
            let sonar = sonar_pose_world(&s.asv_pose, &cfg.mount);
            let q = sonar.inverse().transform_point(&s.rov_pos);
            if !in_fov(&q, cfg).is_inside() || drop_draw < noise.dropout {
                continue;
            }
            let (range_m, azimuth) = point_to_polar(&q);
            let Ok(px) = polar_to_pixel(&PolarDetection::new(range_m, azimuth), cfg) else {
                continue;
            };
            let mut u = px.u + noise.pixel_std * n[0];
            let mut v = px.v + noise.pixel_std * n[1];
            if outlier_draw < noise.outlier_rate {
                u += noise.outlier_pixel_std * n[2];
                v += noise.outlier_pixel_std * n[3];
            }
            let (u, v) = (u.clamp(0.0, w), v.clamp(0.0, h));
            let polar = if noise.pixel_std == 0.0 && outlier_draw >= noise.outlier_rate {
                PolarDetection::new(range_m, azimuth)
            } else {
                match pixel_to_polar(&PixelDetection::at(u, v), cfg) {
                    Ok(p) => p,
                    Err(_) => continue,
                }
            };
            let half = cfg.hfov / 2.0;
            let azimuth = (polar.azimuth + noise.azimuth_std * n[4]).clamp(-half, half);
            let range_m = (polar.range_m + noise.range_std * n[5]).clamp(0.0, cfg.rmax);
            out.push(Record::new(
                s.t,
                RecordData::Detection(DetectionRecord {
                    range_m,
                    azimuth_rad: azimuth,
                    u,
                    v,
                    confidence: 1.0,
                }),
            ));
        }
    }
    out
}

/// Full scenario → dataset.
pub fn simulate(scenario: &Scenario) -> Result<Dataset, SimError> {
    let rov = gen_trajectory(&scenario.trajectory_spec(), &scenario.tank)?;
    let asv = asv_track(&rov, &scenario.asv.mode());
    let gt = ground_truth(&rov, &asv);
    let records = synthesize_sensors(
        &gt,
        &scenario.sonar_config(),
        &scenario.noise_spec(),
        &scenario.rates,
        &scenario.ekf,
    );
    Ok(Dataset {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            version: FORMAT_VERSION,
            seed: scenario.seed,
            scenario: scenario.clone(),
        },
        records,
    })
}
