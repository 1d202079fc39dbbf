//! Forward-looking multi-beam sonar geometry.
//!
//! The image is a rectangular range/azimuth grid: column `u` spans the
//! horizontal field of view left to right (u = 0 at −hfov/2), row `v` spans
//! range from 0 (v = 0) to `rmax` (v = img_h − 1). Both maps are linear and
//! endpoint-inclusive. Azimuth is measured from sonar +x toward sonar +y.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SonarError {
    #[error("pixel ({u}, {v}) outside the {w}x{h} image")]
    OutOfImage { u: f64, v: f64, w: usize, h: usize },
    #[error(
        "polar detection (range {range_m} m, azimuth {azimuth} rad) outside the field of view"
    )]
    OutOfFov { range_m: f64, azimuth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SonarConfig {
    /// Horizontal field of view, rad.
    pub hfov: f64,
    /// Lower vertical aperture bound, rad.
    pub vmin: f64,
    /// Upper vertical aperture bound, rad.
    pub vmax: f64,
    /// Maximum range, m.
    pub rmax: f64,
    pub img_w: usize,
    pub img_h: usize,
    /// Sonar frame expressed in the vehicle base frame.
    pub mount: Pose3,
}

impl Default for SonarConfig {
    fn default() -> Self {
        Self {
            hfov: 130f64.to_radians(),
            vmin: -10f64.to_radians(),
            vmax: 10f64.to_radians(),
            rmax: 10.0,
            img_w: 512,
            img_h: 512,
            mount: Pose3::identity(),
        }
    }
}

impl SonarConfig {
    pub fn is_valid(&self) -> bool {
        self.hfov > 0.0
            && self.hfov < std::f64::consts::PI
            && self.vmin < self.vmax
            && self.rmax > 0.0
            && self.rmax.is_finite()
            && self.img_w >= 2
            && self.img_h >= 2
    }

    /// Azimuth width of one column step, rad.
    pub fn azimuth_bin(&self) -> f64 {
        self.hfov / (self.img_w - 1) as f64
    }

    /// Range depth of one row step, m.
    pub fn range_bin(&self) -> f64 {
        self.rmax / (self.img_h - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelDetection {
    pub u: f64,
    pub v: f64,
    pub box_w: f64,
    pub box_h: f64,
    pub confidence: f64,
    pub t: f64,
}

impl PixelDetection {
    pub fn at(u: f64, v: f64) -> Self {
        Self {
            u,
            v,
            box_w: 0.0,
            box_h: 0.0,
            confidence: 1.0,
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarDetection {
    pub range_m: f64,
    pub azimuth: f64,
    pub t: f64,
    pub confidence: f64,
}

impl PolarDetection {
    pub fn new(range_m: f64, azimuth: f64) -> Self {
        Self {
            range_m,
            azimuth,
            t: 0.0,
            confidence: 1.0,
        }
    }

    pub fn is_valid(&self, cfg: &SonarConfig) -> bool {
        self.range_m >= 0.0 && self.range_m <= cfg.rmax && self.azimuth.abs() <= cfg.hfov / 2.0
    }
}

pub fn pixel_to_polar(
    px: &PixelDetection,
    cfg: &SonarConfig,
) -> Result<PolarDetection, SonarError> {
    let (w, h) = ((cfg.img_w - 1) as f64, (cfg.img_h - 1) as f64);
    if !(px.u >= 0.0 && px.u <= w && px.v >= 0.0 && px.v <= h) {
        return Err(SonarError::OutOfImage {
            u: px.u,
            v: px.v,
            w: cfg.img_w,
            h: cfg.img_h,
        });
    }
    let half = cfg.hfov / 2.0;
    // clamp guards the last ulp at the endpoints
    let azimuth = (-half + px.u * cfg.hfov / w).clamp(-half, half);
    let range_m = (px.v * cfg.rmax / h).clamp(0.0, cfg.rmax);
    Ok(PolarDetection {
        range_m,
        azimuth,
        t: px.t,
        confidence: px.confidence,
    })
}

pub fn polar_to_pixel(
    pd: &PolarDetection,
    cfg: &SonarConfig,
) -> Result<PixelDetection, SonarError> {
    if !pd.is_valid(cfg) {
        return Err(SonarError::OutOfFov {
            range_m: pd.range_m,
            azimuth: pd.azimuth,
        });
    }
    let (w, h) = ((cfg.img_w - 1) as f64, (cfg.img_h - 1) as f64);
    let u = ((pd.azimuth + cfg.hfov / 2.0) * w / cfg.hfov).clamp(0.0, w);
    let v = (pd.range_m * h / cfg.rmax).clamp(0.0, h);
    Ok(PixelDetection {
        u,
        v,
        box_w: 0.0,
        box_h: 0.0,
        confidence: pd.confidence,
        t: pd.t,
    })
}

/// Result of a field-of-view test; every variant but `Inside` names the first failed condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FovVerdict {
    Inside,
    BehindSonar,
    OutsideAzimuth,
    OutsideAperture,
    BeyondRange,
}

impl FovVerdict {
    pub fn is_inside(self) -> bool {
        self == FovVerdict::Inside
    }
}

impl fmt::Display for FovVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FovVerdict::Inside => "inside",
            FovVerdict::BehindSonar => "behind sonar",
            FovVerdict::OutsideAzimuth => "outside azimuth",
            FovVerdict::OutsideAperture => "outside vertical aperture",
            FovVerdict::BeyondRange => "beyond max range",
        };
        f.write_str(s)
    }
}

/// Field-of-view membership of a point given in the sonar frame.
pub fn in_fov(p: &Vec3, cfg: &SonarConfig) -> FovVerdict {
    in_fov_with_margin(p, cfg, 0.0)
}

/// As [`in_fov`], with the vertical aperture widened by `aperture_margin` rad on both sides.
pub fn in_fov_with_margin(p: &Vec3, cfg: &SonarConfig, aperture_margin: f64) -> FovVerdict {
    if p.x.is_nan() || p.x <= 0.0 {
        return FovVerdict::BehindSonar;
    }
    if p.y.atan2(p.x).abs() > cfg.hfov / 2.0 {
        return FovVerdict::OutsideAzimuth;
    }
    let elevation = p.z.atan2(p.x.hypot(p.y));
    if elevation < cfg.vmin - aperture_margin || elevation > cfg.vmax + aperture_margin {
        return FovVerdict::OutsideAperture;
    }
    if p.norm() > cfg.rmax {
        return FovVerdict::BeyondRange;
    }
    FovVerdict::Inside
}

/// Range/azimuth of a sonar-frame point (no FOV check).
pub fn point_to_polar(p: &Vec3) -> (f64, f64) {
    (p.norm(), p.y.atan2(p.x))
}

/// Intensity image, row-major `img_h × img_w`, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SonarScan {
    pub grid: Vec<f32>,
    pub t: f64,
    pub config: SonarConfig,
}

impl SonarScan {
    pub fn empty(cfg: &SonarConfig, t: f64) -> Self {
        Self {
            grid: vec![0.0; cfg.img_w * cfg.img_h],
            t,
            config: *cfg,
        }
    }

    pub fn width(&self) -> usize {
        self.config.img_w
    }

    pub fn height(&self) -> usize {
        self.config.img_h
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.grid[v * self.config.img_w + u]
    }

    /// (u, v) of the brightest pixel; first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &x) in self.grid.iter().enumerate() {
            if x > self.grid[best] {
                best = i;
            }
        }
        (best % self.config.img_w, best / self.config.img_w)
    }

    /// Binary (P5) portable graymap, 8-bit, row 0 (zero range) first.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width(), self.height()).into_bytes();
        out.extend(
            self.grid
                .iter()
                .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }
}

/// Spherical target for synthetic rendering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanTarget {
    pub center: Vec3,
    pub radius: f64,
}

/// Parameters for [`render_scan`] beyond the sonar geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub intensity: f32,
    /// Standard deviation of additive Gaussian speckle; 0 disables noise.
    pub speckle_std: f32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            intensity: 1.0,
            speckle_std: 0.0,
        }
    }
}

/// Paints each in-FOV target as a Gaussian blob at its (range, azimuth) pixel.
pub fn render_scan<R: Rng + ?Sized>(
    sonar_pose_world: &Pose3,
    targets: &[ScanTarget],
    cfg: &SonarConfig,
    opts: &RenderOptions,
    t: f64,
    rng: &mut R,
) -> SonarScan {
    let mut scan = SonarScan::empty(cfg, t);
    let world_to_sonar = sonar_pose_world.inverse();
    let (w, h) = (cfg.img_w, cfg.img_h);

    for target in targets {
        let q = world_to_sonar.transform_point(&target.center);
        if !in_fov(&q, cfg).is_inside() {
            continue;
        }
        let (range_m, azimuth) = point_to_polar(&q);
        let Ok(px) = polar_to_pixel(&PolarDetection::new(range_m, azimuth), cfg) else {
            continue;
        };
        let sigma_v = (target.radius / cfg.range_bin()).max(0.5);
        let angular = (target.radius / range_m.max(target.radius)).atan();
        let sigma_u = (angular / cfg.azimuth_bin()).max(0.5);

        let u_lo = (px.u - 4.0 * sigma_u).floor().max(0.0) as usize;
        let u_hi = ((px.u + 4.0 * sigma_u).ceil() as usize).min(w - 1);
        let v_lo = (px.v - 4.0 * sigma_v).floor().max(0.0) as usize;
        let v_hi = ((px.v + 4.0 * sigma_v).ceil() as usize).min(h - 1);
        for v in v_lo..=v_hi {
            let dv = (v as f64 - px.v) / sigma_v;
            for u in u_lo..=u_hi {
                let du = (u as f64 - px.u) / sigma_u;
                let val = opts.intensity * (-0.5 * (du * du + dv * dv)).exp() as f32;
                let cell = &mut scan.grid[v * w + u];
                *cell = cell.max(val);
            }
        }
    }

    if opts.speckle_std > 0.0 {
        for cell in scan.grid.iter_mut() {
            let n: f32 = StandardNormal.sample(rng);
            *cell = (*cell + opts.speckle_std * n.abs()).clamp(0.0, 1.0);
        }
    }
    scan
}

/// Connected components (4-neighbourhood) above `threshold`, reduced to
/// intensity-weighted centroids. Sorted by descending peak intensity.
pub fn centroid_detect(scan: &SonarScan, threshold: f32) -> Vec<PixelDetection> {
    let (w, h) = (scan.width(), scan.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        if seen[start] || scan.grid[start] <= threshold {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut sum, mut su, mut sv, mut peak) = (0.0f64, 0.0f64, 0.0f64, 0.0f32);
        let (mut umin, mut umax, mut vmin, mut vmax) = (w, 0, h, 0);
        while let Some(i) = queue.pop_front() {
            let (u, v) = (i % w, i / w);
            let val = scan.grid[i];
            sum += val as f64;
            su += val as f64 * u as f64;
            sv += val as f64 * v as f64;
            peak = peak.max(val);
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
            let mut push = |j: usize| {
                if !seen[j] && scan.grid[j] > threshold {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if u > 0 {
                push(i - 1);
            }
            if u + 1 < w {
                push(i + 1);
            }
            if v > 0 {
                push(i - w);
            }
            if v + 1 < h {
                push(i + w);
            }
        }
        out.push(PixelDetection {
            u: su / sum,
            v: sv / sum,
            box_w: (umax - umin + 1) as f64,
            box_h: (vmax - vmin + 1) as f64,
            confidence: peak as f64,
            t: scan.t,
        });
    }

    out.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.v.total_cmp(&b.v))
            .then(a.u.total_cmp(&b.u))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg_101x201() -> SonarConfig {
        SonarConfig {
            hfov: 100f64.to_radians(),
            rmax: 10.0,
            img_w: 101,
            img_h: 201,
            ..SonarConfig::default()
        }
    }

    #[test]
    fn center_column_is_boresight() {
        let p = pixel_to_polar(&PixelDetection::at(50.0, 0.0), &cfg_101x201()).unwrap();
        assert_abs_diff_eq!(p.azimuth, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn range_endpoints() {
        let cfg = cfg_101x201();
        assert_eq!(
            pixel_to_polar(&PixelDetection::at(0.0, 0.0), &cfg)
                .unwrap()
                .range_m,
            0.0
        );
        assert_eq!(
            pixel_to_polar(&PixelDetection::at(0.0, 200.0), &cfg)
                .unwrap()
                .range_m,
            10.0
        );
    }

    #[test]
    fn quarter_column_half_range() {
        let cfg = cfg_101x201();
        let p = pixel_to_polar(&PixelDetection::at(75.0, 100.0), &cfg).unwrap();
        // −50° + 75·(100°/100) = +25°, 100·10/200 = 5 m
        assert_abs_diff_eq!(p.azimuth, 25f64.to_radians(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.range_m, 5.0, epsilon = 1e-12);
        let back = polar_to_pixel(&PolarDetection::new(5.0, 25f64.to_radians()), &cfg).unwrap();
        assert_abs_diff_eq!(back.u, 75.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back.v, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn origin_maps_to_center_top() {
        let cfg = cfg_101x201();
        let px = polar_to_pixel(&PolarDetection::new(0.0, 0.0), &cfg).unwrap();
        assert_abs_diff_eq!(px.u, 50.0, epsilon = 1e-12);
        assert_eq!(px.v, 0.0);
    }

    #[test]
    fn out_of_bounds_errors() {
        let cfg = cfg_101x201();
        assert!(matches!(
            pixel_to_polar(&PixelDetection::at(101.0, 0.0), &cfg),
            Err(SonarError::OutOfImage { .. })
        ));
        assert!(pixel_to_polar(&PixelDetection::at(-0.1, 0.0), &cfg).is_err());
        assert!(matches!(
            polar_to_pixel(&PolarDetection::new(11.0, 0.0), &cfg),
            Err(SonarError::OutOfFov { .. })
        ));
        assert!(polar_to_pixel(&PolarDetection::new(1.0, 1.0), &cfg).is_err());
    }

    fn fov_cfg(vmin_deg: f64) -> SonarConfig {
        SonarConfig {
            hfov: 130f64.to_radians(),
            vmin: vmin_deg.to_radians(),
            vmax: 10f64.to_radians(),
            rmax: 10.0,
            ..SonarConfig::default()
        }
    }

    #[test]
    fn fov_cases() {
        let cfg = fov_cfg(-10.0);
        assert_eq!(in_fov(&Vec3::new(5.0, 0.0, 0.0), &cfg), FovVerdict::Inside);
        assert_eq!(
            in_fov(&Vec3::new(-1.0, 0.0, 0.0), &cfg),
            FovVerdict::BehindSonar
        );
        assert_eq!(
            in_fov(&Vec3::new(1.0, 5.0, 0.0), &cfg),
            FovVerdict::OutsideAzimuth
        );
        assert_eq!(
            in_fov(&Vec3::new(11.0, 0.0, 0.0), &cfg),
            FovVerdict::BeyondRange
        );
        // atan2(−3, 4) = −36.87°
        let p = Vec3::new(4.0, 0.0, -3.0);
        assert_eq!(in_fov(&p, &cfg), FovVerdict::OutsideAperture);
        assert_eq!(in_fov(&p, &fov_cfg(-45.0)), FovVerdict::Inside);
        assert_eq!(
            in_fov_with_margin(&p, &fov_cfg(-36.0), 1f64.to_radians()),
            FovVerdict::Inside
        );
    }

    #[test]
    fn beam_direction_is_orthogonal_to_cutting_normal() {
        for deg in [-60.0f64, -10.0, 0.0, 25.0, 64.0] {
            let th = deg.to_radians();
            let beam = Vec3::new(th.cos(), th.sin(), 0.0);
            let normal = Vec3::new(th.sin(), -th.cos(), 0.0);
            assert_abs_diff_eq!(beam.dot(&normal), 0.0, epsilon = 1e-15);
            // positive azimuth leans toward +y
            let (_, az) = point_to_polar(&(beam * 3.0));
            assert_abs_diff_eq!(az, th, epsilon = 1e-12);
        }
    }

    fn render_cfg() -> SonarConfig {
        SonarConfig {
            hfov: 120f64.to_radians(),
            vmin: -20f64.to_radians(),
            vmax: 20f64.to_radians(),
            rmax: 10.0,
            img_w: 129,
            img_h: 201,
            mount: Pose3::identity(),
        }
    }

    #[test]
    fn empty_scene_renders_zero() {
        let cfg = render_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = render_scan(
            &Pose3::identity(),
            &[],
            &cfg,
            &RenderOptions::default(),
            0.0,
            &mut rng,
        );
        assert!(scan.grid.iter().all(|&x| x == 0.0));
        assert!(centroid_detect(&scan, 0.5).is_empty());
    }

    #[test]
    fn boresight_target_lands_mid_image() {
        let cfg = render_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = ScanTarget {
            center: Vec3::new(5.0, 0.0, 0.0),
            radius: 0.2,
        };
        let scan = render_scan(
            &Pose3::identity(),
            &[target],
            &cfg,
            &RenderOptions::default(),
            0.0,
            &mut rng,
        );
        let (u, v) = scan.argmax();
        assert!((u as f64 - 64.0).abs() <= 1.0);
        assert!((v as f64 - 100.0).abs() <= 1.0);

        let dets = centroid_detect(&scan, 0.5);
        assert_eq!(dets.len(), 1);
        assert!((dets[0].u - 64.0).abs() <= 1.0 && (dets[0].v - 100.0).abs() <= 1.0);
    }

    #[test]
    fn target_behind_is_invisible() {
        let cfg = render_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = ScanTarget {
            center: Vec3::new(-5.0, 0.0, 0.0),
            radius: 0.2,
        };
        let scan = render_scan(
            &Pose3::identity(),
            &[target],
            &cfg,
            &RenderOptions::default(),
            0.0,
            &mut rng,
        );
        assert_eq!(scan, SonarScan::empty(&cfg, 0.0));
    }

    #[test]
    fn two_targets_ordered_by_confidence() {
        let cfg = render_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = RenderOptions::default();
        let a = ScanTarget {
            center: Vec3::new(3.0, 1.0, 0.0),
            radius: 0.15,
        };
        let b = ScanTarget {
            center: Vec3::new(7.0, -2.0, 0.0),
            radius: 0.15,
        };
        let mut scan = render_scan(&Pose3::identity(), &[a], &cfg, &opts, 0.0, &mut rng);
        let dim = RenderOptions {
            intensity: 0.8,
            ..opts
        };
        let other = render_scan(&Pose3::identity(), &[b], &cfg, &dim, 0.0, &mut rng);
        for (x, y) in scan.grid.iter_mut().zip(other.grid.iter()) {
            *x = x.max(*y);
        }
        let dets = centroid_detect(&scan, 0.5);
        assert_eq!(dets.len(), 2);
        assert!(dets[0].confidence > dets[1].confidence);
        let expect_a = {
            let (r, az) = point_to_polar(&a.center);
            polar_to_pixel(&PolarDetection::new(r, az), &cfg).unwrap()
        };
        assert!((dets[0].u - expect_a.u).abs() <= 1.0 && (dets[0].v - expect_a.v).abs() <= 1.0);
    }

    #[test]
    fn speckle_is_seeded() {
        let cfg = render_cfg();
        let opts = RenderOptions {
            intensity: 1.0,
            speckle_std: 0.05,
        };
        let a = render_scan(
            &Pose3::identity(),
            &[],
            &cfg,
            &opts,
            0.0,
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        let b = render_scan(
            &Pose3::identity(),
            &[],
            &cfg,
            &opts,
            0.0,
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        assert_eq!(a, b);
        assert!(a.grid.iter().any(|&x| x > 0.0));
    }

    #[test]
    fn pgm_header_and_size() {
        let cfg = render_cfg();
        let scan = SonarScan::empty(&cfg, 0.0);
        let pgm = scan.to_pgm();
        let header = b"P5\n129 201\n255\n";
        assert!(pgm.starts_with(header));
        assert_eq!(pgm.len(), header.len() + 129 * 201);
    }
}
