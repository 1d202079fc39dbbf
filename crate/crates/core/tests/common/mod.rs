#![allow(dead_code)]

use capsd::sonar::point_to_polar;
use capsd::{DepthSample, EulerZYX, PolarDetection, Pose3, SolverInput, SonarConfig, Vec3};
use rand::Rng;

pub fn deg(d: f64) -> f64 {
    d.to_radians()
}

pub fn random_pose<R: Rng>(rng: &mut R, max_tilt: f64, max_trans: f64) -> Pose3 {
    Pose3::from_euler(
        EulerZYX::new(
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.random_range(-max_tilt..max_tilt),
            rng.random_range(-max_tilt..max_tilt),
        ),
        Vec3::new(
            rng.random_range(-max_trans..max_trans),
            rng.random_range(-max_trans..max_trans),
            rng.random_range(-max_trans..max_trans),
        ),
    )
}

/// Forward-looking mount: pitched down, small yaw and roll, offset from the hull.
pub fn random_mount<R: Rng>(rng: &mut R) -> Pose3 {
    Pose3::from_euler(
        EulerZYX::new(
            rng.random_range(deg(-15.0)..deg(15.0)),
            rng.random_range(0.0..deg(40.0)),
            rng.random_range(deg(-5.0)..deg(5.0)),
        ),
        Vec3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.0),
        ),
    )
}

pub fn random_sonar<R: Rng>(rng: &mut R, mount: Pose3) -> SonarConfig {
    let half = rng.random_range(deg(5.0)..deg(25.0));
    SonarConfig {
        hfov: rng.random_range(deg(60.0)..deg(130.0)),
        vmin: -half,
        vmax: half,
        rmax: rng.random_range(5.0..40.0),
        img_w: 512,
        img_h: 512,
        mount,
    }
}

/// A point strictly inside the field of view, in the sonar frame.
pub fn random_fov_point<R: Rng>(rng: &mut R, cfg: &SonarConfig) -> Vec3 {
    let shrink = 0.98;
    let r = rng.random_range(0.05 * cfg.rmax..cfg.rmax * shrink);
    let az = rng.random_range(-0.5 * cfg.hfov * shrink..0.5 * cfg.hfov * shrink);
    let el = rng.random_range(cfg.vmin * shrink..cfg.vmax * shrink);
    Vec3::new(
        r * el.cos() * az.cos(),
        r * el.cos() * az.sin(),
        r * el.sin(),
    )
}

/// Exact measurements of a target: the solver input and the true position.
pub struct Closure {
    pub input: SolverInput,
    pub truth: Vec3,
}

pub fn random_closure<R: Rng>(rng: &mut R) -> Closure {
    let asv = random_pose(rng, deg(10.0), 20.0);
    let mount = random_mount(rng);
    let cfg = random_sonar(rng, mount);
    let q = random_fov_point(rng, &cfg);
    let truth = asv.transform_point(&mount.transform_point(&q));
    let (range_m, azimuth) = point_to_polar(&q);
    Closure {
        input: SolverInput {
            asv_pose: asv,
            mount,
            detection: PolarDetection::new(range_m, azimuth),
            depth: DepthSample {
                t: 0.0,
                z_depth: truth.z,
            },
            cfg,
        },
        truth,
    }
}

/// Extreme heights reached by the detection circle.
pub fn circle_z_extent(input: &SolverInput) -> (f64, f64) {
    let sonar = input.asv_pose.compose(&input.mount);
    let th = input.detection.azimuth;
    let n = sonar
        .transform_direction(&Vec3::new(th.sin(), -th.cos(), 0.0))
        .normalize();
    let reach = input.detection.range_m * (1.0 - n.z * n.z).max(0.0).sqrt();
    (sonar.trans.z - reach, sonar.trans.z + reach)
}
