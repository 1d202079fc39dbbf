//! Closed-form ROV position from one sonar detection and one depth reading.
//!
//! A detection at range R and azimuth θ constrains the target to the circle
//! where the range sphere about the sonar meets the vertical-aperture plane
//! of beam θ. The depth reading fixes world z, cutting that circle in at most
//! two points; the survivor must lie in the sonar's forward field of view.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Pose3, Vec3};
use crate::sonar::{in_fov_with_margin, FovVerdict, PolarDetection, SonarConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(
        "detection outside the sonar field of view (range {range_m} m, azimuth {azimuth} rad)"
    )]
    InvalidDetection { range_m: f64, azimuth: f64 },
    #[error("depth plane does not meet the detection circle")]
    NoIntersection,
    #[error("cutting-plane normal is nearly vertical")]
    DegeneratePlane,
    #[error("no intersection point lies in the sonar field of view")]
    NoValidCandidate { candidates: Vec<Vec3> },
    #[error("both intersection points lie in the sonar field of view")]
    AmbiguousSolution { candidates: Vec<Vec3> },
}

impl SolveError {
    /// Stable identifier used in reports and error-count tables.
    pub fn code(&self) -> &'static str {
        match self {
            SolveError::InvalidDetection { .. } => "InvalidDetection",
            SolveError::NoIntersection => "NoIntersection",
            SolveError::DegeneratePlane => "DegeneratePlane",
            SolveError::NoValidCandidate { .. } => "NoValidCandidate",
            SolveError::AmbiguousSolution { .. } => "AmbiguousSolution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSample {
    pub t: f64,
    /// World-frame z of the ROV reference point (negative underwater).
    pub z_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverInput {
    pub asv_pose: Pose3,
    pub mount: Pose3,
    pub detection: PolarDetection,
    pub depth: DepthSample,
    pub cfg: SonarConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub sphere: f64,
    pub plane: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub p: Vec3,
    pub t: f64,
    pub candidates: Vec<Vec3>,
    pub chosen_index: usize,
    pub residuals: Residuals,
}

/// Plane through the sonar containing one beam's vertical aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuttingPlane {
    pub normal: Vec3,
    pub anchor: Vec3,
}

impl CuttingPlane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(&(p - self.anchor))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative band (× R) treated as tangency or as a just-touching depth plane.
    pub tangency_rel: f64,
    /// Near-misses up to this many metres are clamped to tangency.
    pub consistency_tol: f64,
    /// Accepted azimuth mismatch of a candidate, rad; `None` uses one azimuth bin.
    pub azimuth_tol: Option<f64>,
    /// Vertical aperture widening applied to candidate checks, rad.
    pub aperture_margin: f64,
    /// Horizontal-normal magnitude below which the plane is degenerate.
    pub degenerate_eps: f64,
}

impl Default for SolverConfig {
    /// Tolerances for noisy measurements.
    fn default() -> Self {
        Self {
            tangency_rel: 1e-9,
            consistency_tol: 0.05,
            azimuth_tol: None,
            aperture_margin: 1f64.to_radians(),
            degenerate_eps: 1e-9,
        }
    }
}

impl SolverConfig {
    /// Tolerances for noise-free data.
    pub fn exact() -> Self {
        Self {
            tangency_rel: 1e-9,
            consistency_tol: 0.0,
            azimuth_tol: Some(1e-6),
            aperture_margin: 0.0,
            degenerate_eps: 1e-9,
        }
    }
}

/// Sonar pose in the world: vehicle pose composed with the sonar mount.
pub fn sonar_pose_world(asv_pose: &Pose3, mount: &Pose3) -> Pose3 {
    asv_pose.compose(mount)
}

/// Normal of beam θ's plane is the sonar-frame direction [sin θ, −cos θ, 0]
/// rotated into the world (rotation part only).
pub fn cutting_plane(sonar_pose_world: &Pose3, azimuth: f64) -> CuttingPlane {
    let local = Vec3::new(azimuth.sin(), -azimuth.cos(), 0.0);
    CuttingPlane {
        normal: sonar_pose_world.transform_direction(&local).normalize(),
        anchor: sonar_pose_world.trans,
    }
}

/// Points where the depth plane z = `z_depth` meets the circle cut from the
/// range sphere by `plane`. Returns one point at tangency, two otherwise.
pub fn depth_circle_candidates(
    plane: &CuttingPlane,
    range_m: f64,
    z_depth: f64,
    scfg: &SolverConfig,
) -> Result<Vec<Vec3>, SolveError> {
    let s = plane.anchor;
    let band = scfg.tangency_rel * range_m.max(f64::MIN_POSITIVE);
    let h = z_depth - s.z;
    if h.abs() > range_m + band + scfg.consistency_tol {
        return Err(SolveError::NoIntersection);
    }
    let rc2 = (range_m * range_m - h * h).max(0.0);
    let rc = rc2.sqrt();

    let (a, b, c) = (plane.normal.x, plane.normal.y, plane.normal.z);
    let ab2 = a * a + b * b;
    if ab2 < scfg.degenerate_eps * scfg.degenerate_eps {
        return Err(SolveError::DegeneratePlane);
    }
    let ab = ab2.sqrt();
    // In the depth slice the plane is the line a·dx + b·dy = −c·h.
    let d = (c * h).abs() / ab;
    let foot_scale = -c * h / ab2;
    let foot = Vec3::new(s.x + a * foot_scale, s.y + b * foot_scale, z_depth);

    if d > rc + band.max(scfg.consistency_tol) {
        return Err(SolveError::NoIntersection);
    }
    if d >= rc - band {
        return Ok(vec![foot]);
    }
    let half = (rc2 - d * d).sqrt();
    let dir = Vec3::new(-b / ab, a / ab, 0.0);
    Ok(vec![foot + dir * half, foot - dir * half])
}

/// Residuals of `p` against the sphere, cutting plane and depth plane.
pub fn residuals(p: &Vec3, plane: &CuttingPlane, range_m: f64, z_depth: f64) -> Residuals {
    Residuals {
        sphere: ((p - plane.anchor).norm() - range_m).abs(),
        plane: plane.signed_distance(p).abs(),
        depth: (p.z - z_depth).abs(),
    }
}

/// Why a raw intersection point was accepted or rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateCheck {
    pub fov: FovVerdict,
    pub azimuth_error: f64,
    pub accepted: bool,
}

pub fn check_candidate(
    p: &Vec3,
    world_to_sonar: &Pose3,
    detection: &PolarDetection,
    cfg: &SonarConfig,
    scfg: &SolverConfig,
) -> CandidateCheck {
    let q = world_to_sonar.transform_point(p);
    let fov = in_fov_with_margin(&q, cfg, scfg.aperture_margin);
    let azimuth_error = wrap_angle(q.y.atan2(q.x) - detection.azimuth).abs();
    let tol = scfg.azimuth_tol.unwrap_or_else(|| cfg.azimuth_bin());
    CandidateCheck {
        fov,
        azimuth_error,
        accepted: fov.is_inside() && azimuth_error <= tol,
    }
}

/// Solves with the noise-tolerant defaults of [`SolverConfig`].
pub fn solve_position(inp: &SolverInput) -> Result<PositionEstimate, SolveError> {
    solve_position_with(inp, &SolverConfig::default())
}

pub fn solve_position_with(
    inp: &SolverInput,
    scfg: &SolverConfig,
) -> Result<PositionEstimate, SolveError> {
    let det = &inp.detection;
    if !det.is_valid(&inp.cfg) || !det.range_m.is_finite() || !det.azimuth.is_finite() {
        return Err(SolveError::InvalidDetection {
            range_m: det.range_m,
            azimuth: det.azimuth,
        });
    }
    let sonar = sonar_pose_world(&inp.asv_pose, &inp.mount);
    let plane = cutting_plane(&sonar, det.azimuth);
    let z = inp.depth.z_depth;
    let candidates = depth_circle_candidates(&plane, det.range_m, z, scfg)?;

    let to_sonar = sonar.inverse();
    let accepted: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, p)| check_candidate(p, &to_sonar, det, &inp.cfg, scfg).accepted)
        .map(|(i, _)| i)
        .collect();

    match accepted.as_slice() {
        [] => Err(SolveError::NoValidCandidate { candidates }),
        [i] => {
            let p = candidates[*i];
            Ok(PositionEstimate {
                p,
                t: det.t,
                residuals: residuals(&p, &plane, det.range_m, z),
                chosen_index: *i,
                candidates,
            })
        }
        _ => Err(SolveError::AmbiguousSolution { candidates }),
    }
}

/// Test oracle: samples the sphere/plane circle with an explicit orthonormal
/// basis and returns every crossing of the depth plane, bisected to 1e-10.
/// Tangential touches are found by refining local extrema of the height.
pub fn brute_force_solve(inp: &SolverInput, n_samples: usize) -> Vec<Vec3> {
    let n_samples = n_samples.max(1000);
    // Chain point-by-point rather than through compose().
    let center = inp
        .asv_pose
        .transform_point(&inp.mount.transform_point(&Vec3::zeros()));
    let th = inp.detection.azimuth;
    let normal = inp
        .asv_pose
        .transform_direction(
            &inp.mount
                .transform_direction(&Vec3::new(th.sin(), -th.cos(), 0.0)),
        )
        .normalize();
    let seed_axis = [Vec3::x(), Vec3::y(), Vec3::z()]
        .into_iter()
        .min_by(|a, b| a.dot(&normal).abs().total_cmp(&b.dot(&normal).abs()))
        .unwrap();
    let e1 = (seed_axis - normal * seed_axis.dot(&normal)).normalize();
    let e2 = normal.cross(&e1);
    let r = inp.detection.range_m;
    let z_target = inp.depth.z_depth;

    let point = |t: f64| center + (e1 * t.cos() + e2 * t.sin()) * r;
    let f = |t: f64| point(t).z - z_target;

    let step = std::f64::consts::TAU / n_samples as f64;
    let ts: Vec<f64> = (0..=n_samples).map(|k| k as f64 * step).collect();
    let fs: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let mut crossings: Vec<f64> = Vec::new();

    let bisect = |mut lo: f64, mut hi: f64| {
        let flo = f(lo);
        for _ in 0..200 {
            if (hi - lo) * r.max(1.0) < 1e-13 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    for k in 0..n_samples {
        let (a, b) = (fs[k], fs[k + 1]);
        if a == 0.0 {
            crossings.push(ts[k]);
        } else if (a > 0.0) != (b > 0.0) && b != 0.0 {
            crossings.push(bisect(ts[k], ts[k + 1]));
        }
    }

    // Tangential touches: local minima of |f| refined by golden-section search.
    // A touch absorbs the rounding-level crossings on either side of it.
    let tol = 1e-9 * r.max(1.0);
    let mut touches: Vec<f64> = Vec::new();
    for k in 0..n_samples {
        let prev = fs[(k + n_samples - 1) % n_samples].abs();
        let next = fs[k + 1].abs();
        let here = fs[k].abs();
        if here <= prev && here <= next {
            let lo = ts[k] - step;
            let hi = ts[k] + step;
            let curvature = fs[(k + n_samples - 1) % n_samples] + fs[k + 1] - 2.0 * fs[k];
            let sign = if curvature >= 0.0 { 1.0 } else { -1.0 };
            let t_star = golden_min(|t| sign * f(t), lo, hi);
            if f(t_star).abs() <= tol {
                touches.push(t_star);
            }
        }
    }
    let near_touch = |t: f64| {
        touches.iter().any(|&c| {
            let d = (t - c).rem_euclid(std::f64::consts::TAU);
            d.min(std::f64::consts::TAU - d) < step
                && (point(t) - point(c)).norm() < (2.0 * tol * r).sqrt() * 2.0
        })
    };
    let roots: Vec<Vec3> = crossings
        .iter()
        .filter(|&&t| !near_touch(t))
        .chain(&touches)
        .map(|&t| point(t))
        .collect();

    let mut unique: Vec<Vec3> = Vec::new();
    for p in roots {
        if unique.iter().all(|q| (q - p).norm() > 1e-6) {
            unique.push(p);
        }
    }
    unique
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EulerZYX;
    use approx::assert_abs_diff_eq;

    fn wide_cfg(vmin_deg: f64) -> SonarConfig {
        SonarConfig {
            hfov: 130f64.to_radians(),
            vmin: vmin_deg.to_radians(),
            vmax: 45f64.to_radians(),
            rmax: 10.0,
            ..SonarConfig::default()
        }
    }

    fn input(asv: Pose3, range_m: f64, azimuth: f64, z: f64, cfg: SonarConfig) -> SolverInput {
        SolverInput {
            asv_pose: asv,
            mount: Pose3::identity(),
            detection: PolarDetection::new(range_m, azimuth),
            depth: DepthSample { t: 0.0, z_depth: z },
            cfg,
        }
    }

    #[test]
    fn sonar_pose_chain_cases() {
        assert_eq!(
            sonar_pose_world(&Pose3::identity(), &Pose3::identity()),
            Pose3::identity()
        );
        let asv = Pose3::from_translation(Vec3::new(1.0, 2.0, 0.0));
        let mount = Pose3::from_translation(Vec3::new(0.1, 0.0, -0.05));
        let s = sonar_pose_world(&asv, &mount);
        assert_abs_diff_eq!(s.trans, Vec3::new(1.1, 2.0, -0.05), epsilon = 1e-15);

        let asv = Pose3::from_euler(
            EulerZYX::from_degrees(90.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        );
        let mount = Pose3::from_translation(Vec3::new(0.5, 0.0, 0.0));
        let s = sonar_pose_world(&asv, &mount);
        assert_abs_diff_eq!(s.trans, Vec3::new(1.0, 0.5, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn cutting_plane_cases() {
        let p0 = cutting_plane(&Pose3::identity(), 0.0);
        assert_abs_diff_eq!(p0.normal, Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
        let p90 = cutting_plane(&Pose3::identity(), 90f64.to_radians());
        assert_abs_diff_eq!(p90.normal, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);

        let yawed = Pose3::from_euler(EulerZYX::from_degrees(30.0, 0.0, 0.0), Vec3::zeros());
        let th = 10f64.to_radians();
        let plane = cutting_plane(&yawed, th);
        let (s30, c30) = 30f64.to_radians().sin_cos();
        let (sx, sy) = (th.sin(), -th.cos());
        let expected = Vec3::new(c30 * sx - s30 * sy, s30 * sx + c30 * sy, 0.0);
        assert_abs_diff_eq!(plane.normal, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(plane.normal.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn boresight_on_surface_plane() {
        let inp = input(Pose3::identity(), 5.0, 0.0, 0.0, wide_cfg(-45.0));
        let est = solve_position_with(&inp, &SolverConfig::exact()).unwrap();
        assert_abs_diff_eq!(est.p, Vec3::new(5.0, 0.0, 0.0), epsilon = 1e-12);
        assert_eq!(est.candidates.len(), 2);
        let other = est.candidates[1 - est.chosen_index];
        assert_abs_diff_eq!(other, Vec3::new(-5.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn three_four_five() {
        let inp = input(Pose3::identity(), 5.0, 0.0, -3.0, wide_cfg(-45.0));
        let est = solve_position_with(&inp, &SolverConfig::exact()).unwrap();
        assert_abs_diff_eq!(est.p, Vec3::new(4.0, 0.0, -3.0), epsilon = 1e-12);
        assert_eq!(est.p.z, -3.0);
        assert!(est.residuals.sphere < 1e-12 && est.residuals.plane < 1e-12);
        assert_eq!(est.residuals.depth, 0.0);
    }

    #[test]
    fn unreachable_depth() {
        let inp = input(Pose3::identity(), 5.0, 0.0, -6.0, wide_cfg(-45.0));
        assert_eq!(
            solve_position_with(&inp, &SolverConfig::exact()).unwrap_err(),
            SolveError::NoIntersection
        );
        assert_eq!(
            solve_position(&inp).unwrap_err(),
            SolveError::NoIntersection
        );
    }

    #[test]
    fn narrow_aperture_rejects_both() {
        let inp = input(Pose3::identity(), 5.0, 0.0, -3.0, wide_cfg(-10.0));
        let err = solve_position_with(&inp, &SolverConfig::exact()).unwrap_err();
        match err {
            SolveError::NoValidCandidate { candidates } => assert_eq!(candidates.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rolled_sonar_is_degenerate() {
        // Roll 90°: beam-0 plane normal (0, −1, 0) becomes vertical.
        let asv = Pose3::from_euler(EulerZYX::from_degrees(0.0, 0.0, 90.0), Vec3::zeros());
        let inp = input(asv, 5.0, 0.0, -1.0, wide_cfg(-45.0));
        assert_eq!(
            solve_position_with(&inp, &SolverConfig::exact()).unwrap_err(),
            SolveError::DegeneratePlane
        );
    }

    #[test]
    fn wide_aperture_can_be_ambiguous() {
        // Sonar pitched straight down-ish so that both crossings sit in front.
        let cfg = SonarConfig {
            vmin: -89f64.to_radians(),
            vmax: 89f64.to_radians(),
            ..wide_cfg(-89.0)
        };
        let asv = Pose3::from_euler(EulerZYX::from_degrees(0.0, 60.0, 0.0), Vec3::zeros());
        let inp = input(asv, 5.0, 0.0, -4.9, cfg);
        let err = solve_position_with(&inp, &SolverConfig::exact()).unwrap_err();
        assert!(
            matches!(err, SolveError::AmbiguousSolution { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn invalid_detection_rejected() {
        let inp = input(Pose3::identity(), 11.0, 0.0, 0.0, wide_cfg(-45.0));
        assert!(matches!(
            solve_position(&inp),
            Err(SolveError::InvalidDetection { .. })
        ));
    }

    #[test]
    fn tangency_single_candidate() {
        // Sonar at origin pitched so the circle's lowest point sits exactly at the depth.
        let cfg = wide_cfg(-45.0);
        let inp = input(Pose3::identity(), 5.0, 0.0, -5.0, cfg);
        let cands = depth_circle_candidates(
            &cutting_plane(&Pose3::identity(), 0.0),
            5.0,
            -5.0,
            &SolverConfig::exact(),
        )
        .unwrap();
        assert_eq!(cands.len(), 1);
        assert_abs_diff_eq!(cands[0], Vec3::new(0.0, 0.0, -5.0), epsilon = 1e-12);
        // directly below the sonar: not in the forward region
        assert!(solve_position_with(&inp, &SolverConfig::exact()).is_err());
    }

    #[test]
    fn near_miss_clamped_only_with_tolerance() {
        let plane = cutting_plane(&Pose3::identity(), 0.0);
        assert_eq!(
            depth_circle_candidates(&plane, 5.0, -5.01, &SolverConfig::exact()).unwrap_err(),
            SolveError::NoIntersection
        );
        let c = depth_circle_candidates(&plane, 5.0, -5.01, &SolverConfig::default()).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn brute_force_simple_cases() {
        let inp = input(Pose3::identity(), 5.0, 0.0, 0.0, wide_cfg(-45.0));
        let mut roots = brute_force_solve(&inp, 10_000);
        roots.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(roots.len(), 2);
        assert_abs_diff_eq!(roots[0], Vec3::new(-5.0, 0.0, 0.0), epsilon = 1e-8);
        assert_abs_diff_eq!(roots[1], Vec3::new(5.0, 0.0, 0.0), epsilon = 1e-8);

        let inp = input(Pose3::identity(), 5.0, 0.0, -3.0, wide_cfg(-45.0));
        let mut roots = brute_force_solve(&inp, 10_000);
        roots.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(roots.len(), 2);
        assert_abs_diff_eq!(roots[0], Vec3::new(-4.0, 0.0, -3.0), epsilon = 1e-8);
        assert_abs_diff_eq!(roots[1], Vec3::new(4.0, 0.0, -3.0), epsilon = 1e-8);

        let miss = input(Pose3::identity(), 5.0, 0.0, -6.0, wide_cfg(-45.0));
        assert!(brute_force_solve(&miss, 10_000).is_empty());

        let touch = input(Pose3::identity(), 5.0, 0.0, -5.0, wide_cfg(-45.0));
        let roots = brute_force_solve(&touch, 10_000);
        assert_eq!(roots.len(), 1);
        assert_abs_diff_eq!(roots[0], Vec3::new(0.0, 0.0, -5.0), epsilon = 1e-6);
    }

    #[test]
    fn error_codes() {
        assert_eq!(SolveError::NoIntersection.code(), "NoIntersection");
        assert_eq!(
            SolveError::NoValidCandidate { candidates: vec![] }.code(),
            "NoValidCandidate"
        );
    }
}
