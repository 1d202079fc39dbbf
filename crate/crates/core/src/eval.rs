//! Dataset replay through the filter and solver, truth association and
//! error metrics (per-axis RMSE, mean Euclidean distance, histograms).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{fuse_asv_pose, AttitudeError, EkfConfig, ImuSample, SlamPose2D, TiltEkf};
use crate::dataset::{
    Dataset, DatasetError, EstimateData, EstimateLine, EstimatesFile, RecordData, SolveFailure,
};
use crate::geometry::Vec3;
use crate::solver::{solve_position_with, DepthSample, SolveError, SolverConfig, SolverInput};
use crate::sonar::{PolarDetection, SonarConfig};

/// Error-count key for detections that arrive before pose or depth is known.
pub const MISSING_INPUT: &str = "MissingInput";
/// Error-count key for filter resets after pitch divergence.
pub const EKF_DIVERGENCE: &str = "EkfDivergence";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("EmptyOverlap: no estimate overlaps the ground truth ({dropped} dropped)")]
    EmptyOverlap { dropped: usize },
    #[error("EmptyInput: no pairs to evaluate")]
    EmptyInput,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub t: f64,
    pub estimate: Vec3,
    pub truth: Vec3,
}

impl Pair {
    pub fn error(&self) -> Vec3 {
        self.estimate - self.truth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub pairs: Vec<Pair>,
    pub dropped: usize,
}

/// Pairs each estimate with truth interpolated linearly at its timestamp.
/// Estimates outside the truth span by more than `window` are dropped.
pub fn associate(
    estimates: &[(f64, Vec3)],
    truth: &[(f64, Vec3)],
    window: f64,
) -> Result<Association, EvalError> {
    let mut pairs = Vec::with_capacity(estimates.len());
    let mut dropped = 0;
    let (Some(first), Some(last)) = (truth.first(), truth.last()) else {
        return Err(EvalError::EmptyOverlap {
            dropped: estimates.len(),
        });
    };
    for &(t, p) in estimates {
        let truth_at = if t < first.0 {
            (first.0 - t <= window).then_some(first.1)
        } else if t > last.0 {
            (t - last.0 <= window).then_some(last.1)
        } else {
            let i = truth.partition_point(|s| s.0 <= t);
            if i == 0 || i >= truth.len() {
                Some(truth[i.min(truth.len() - 1)].1)
            } else {
                let (a, b) = (truth[i - 1], truth[i]);
                if t == a.0 {
                    Some(a.1)
                } else {
                    let f = (t - a.0) / (b.0 - a.0);
                    Some(a.1 + (b.1 - a.1) * f)
                }
            }
        };
        match truth_at {
            Some(truth) => pairs.push(Pair {
                t,
                estimate: p,
                truth,
            }),
            None => dropped += 1,
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::EmptyOverlap { dropped });
    }
    Ok(Association { pairs, dropped })
}

/// Equal-width histogram over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let idx = if width > 0.0 {
                (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
            } else {
                0
            };
            counts[idx] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistograms {
    pub x: Histogram,
    pub y: Histogram,
    pub z: Histogram,
    pub euclidean: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub count: usize,
    /// Per-axis root-mean-square error, m.
    pub rmse: [f64; 3],
    /// Per-axis mean signed error, m.
    pub mean_error: [f64; 3],
    /// Mean Euclidean distance, m.
    pub med: f64,
    pub max_error: f64,
    pub histograms: ErrorHistograms,
    /// Estimates without truth coverage.
    pub dropped: usize,
    pub solver_errors: BTreeMap<String, usize>,
}

pub fn compute_metrics(pairs: &[Pair], bins: usize) -> Result<MetricsReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let errs: Vec<Vec3> = pairs.iter().map(Pair::error).collect();
    let norms: Vec<f64> = errs.iter().map(|e| e.norm()).collect();
    let mut sq = [0.0; 3];
    let mut sum = [0.0; 3];
    for e in &errs {
        for a in 0..3 {
            sq[a] += e[a] * e[a];
            sum[a] += e[a];
        }
    }
    let rmse = sq.map(|s| (s / n).sqrt());
    let mean_error = sum.map(|s| s / n);
    let med = norms.iter().sum::<f64>() / n;
    let max_error = norms.iter().copied().fold(0.0, f64::max);

    let axis_hist = |a: usize| {
        let vals: Vec<f64> = errs.iter().map(|e| e[a]).collect();
        let m = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m = if m > 0.0 { m } else { 1e-3 };
        Histogram::build(&vals, -m, m, bins)
    };
    let histograms = ErrorHistograms {
        x: axis_hist(0),
        y: axis_hist(1),
        z: axis_hist(2),
        euclidean: Histogram::build(
            &norms,
            0.0,
            if max_error > 0.0 { max_error } else { 1e-3 },
            bins,
        ),
    };
    Ok(MetricsReport {
        count: pairs.len(),
        rmse,
        mean_error,
        med,
        max_error,
        histograms,
        dropped: 0,
        solver_errors: BTreeMap::new(),
    })
}

impl MetricsReport {
    /// Plain-text summary at millimetre resolution.
    pub fn to_text(&self) -> String {
        let mm = |v: f64| format!("{:>10.1} mm", v * 1000.0);
        let mut s = String::new();
        let _ = writeln!(s, "pairs        {:>10}", self.count);
        let _ = writeln!(s, "x RMSE       {}", mm(self.rmse[0]));
        let _ = writeln!(s, "y RMSE       {}", mm(self.rmse[1]));
        let _ = writeln!(s, "z RMSE       {}", mm(self.rmse[2]));
        let _ = writeln!(s, "MED          {}", mm(self.med));
        let _ = writeln!(s, "max error    {}", mm(self.max_error));
        let _ = writeln!(s, "dropped      {:>10}", self.dropped);
        if self.solver_errors.is_empty() {
            let _ = writeln!(s, "solver errors       none");
        } else {
            for (code, n) in &self.solver_errors {
                let _ = writeln!(s, "solver error {code:<18} {n}");
            }
        }
        s
    }
}

/// Replay settings, normally taken from the dataset header's scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub ekf: EkfConfig,
    pub solver: SolverConfig,
    pub sonar: SonarConfig,
    /// Base-frame z of the surface vehicle.
    pub asv_z: f64,
    /// Added to every depth reading before solving.
    pub depth_lever_arm: f64,
    pub association_window: f64,
    pub histogram_bins: usize,
}

impl PipelineConfig {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let sc = &ds.header.scenario;
        Self {
            ekf: sc.ekf,
            solver: sc.solver_config(),
            sonar: sc.sonar_config(),
            asv_z: sc.asv.z,
            depth_lever_arm: sc.pipeline.depth_lever_arm,
            association_window: sc.pipeline.association_window,
            histogram_bins: sc.pipeline.histogram_bins,
        }
    }
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub estimates: EstimatesFile,
    pub error_counts: BTreeMap<String, usize>,
    /// `None` when the dataset carries no ground truth.
    pub metrics: Option<Result<MetricsReport, EvalError>>,
}

/// Replays with settings from the dataset header.
pub fn run_pipeline(ds: &Dataset) -> Result<PipelineOutput, EvalError> {
    run_pipeline_with(ds, &PipelineConfig::from_dataset(ds))
}

pub fn run_pipeline_with(ds: &Dataset, cfg: &PipelineConfig) -> Result<PipelineOutput, EvalError> {
    ds.validate()?;
    let mut ekf = TiltEkf::new(cfg.ekf);
    let mut slam: Option<SlamPose2D> = None;
    let mut depth: Option<DepthSample> = None;
    let mut lines = Vec::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut truth = Vec::new();

    for rec in &ds.records {
        match &rec.data {
            RecordData::Imu(imu) => {
                let sample = ImuSample {
                    t: rec.t,
                    omega: imu.omega,
                    accel: imu.accel,
                };
                if let Err(AttitudeError::NumericalDivergence(_)) = ekf.process(&sample) {
                    *counts.entry(EKF_DIVERGENCE.into()).or_default() += 1;
                    ekf = TiltEkf::new(cfg.ekf);
                }
            }
            RecordData::Slam(s) => {
                slam = Some(SlamPose2D {
                    t: rec.t,
                    x: s.x,
                    y: s.y,
                    yaw: s.yaw_rad,
                })
            }
            RecordData::Depth(d) => {
                depth = Some(DepthSample {
                    t: rec.t,
                    z_depth: d.z_depth + cfg.depth_lever_arm,
                })
            }
            RecordData::GtRov(g) => truth.push((rec.t, g.p)),
            RecordData::Detection(d) => {
                let (Some(att), Some(slam), Some(depth)) = (ekf.state(), slam, depth) else {
                    *counts.entry(MISSING_INPUT.into()).or_default() += 1;
                    lines.push(EstimateLine {
                        t: rec.t,
                        data: EstimateData::SolverError(SolveFailure {
                            code: MISSING_INPUT.into(),
                            candidates: vec![],
                        }),
                    });
                    continue;
                };
                let input = SolverInput {
                    asv_pose: fuse_asv_pose(att, &slam, cfg.asv_z),
                    mount: cfg.sonar.mount,
                    detection: PolarDetection {
                        range_m: d.range_m,
                        azimuth: d.azimuth_rad,
                        t: rec.t,
                        confidence: d.confidence,
                    },
                    depth,
                    cfg: cfg.sonar,
                };
                let data = match solve_position_with(&input, &cfg.solver) {
                    Ok(est) => EstimateData::Estimate(est),
                    Err(e) => {
                        let code = e.code().to_string();
                        *counts.entry(code.clone()).or_default() += 1;
                        let candidates = match e {
                            SolveError::NoValidCandidate { candidates }
                            | SolveError::AmbiguousSolution { candidates } => candidates,
                            _ => vec![],
                        };
                        EstimateData::SolverError(SolveFailure { code, candidates })
                    }
                };
                lines.push(EstimateLine { t: rec.t, data });
            }
            RecordData::GtAsv(_) | RecordData::Header(_) => {}
        }
    }

    let estimates = EstimatesFile { lines };
    let metrics = (!truth.is_empty()).then(|| {
        let mut r = evaluate_against(
            &estimates,
            &truth,
            cfg.association_window,
            cfg.histogram_bins,
        );
        if let Ok(m) = r.as_mut() {
            m.solver_errors = counts.clone();
        }
        r
    });
    Ok(PipelineOutput {
        estimates,
        error_counts: counts,
        metrics,
    })
}

/// Ground-truth ROV track from a dataset.
pub fn truth_track(ds: &Dataset) -> Vec<(f64, Vec3)> {
    ds.records
        .iter()
        .filter_map(|r| match &r.data {
            RecordData::GtRov(g) => Some((r.t, g.p)),
            _ => None,
        })
        .collect()
}

fn evaluate_against(
    estimates: &EstimatesFile,
    truth: &[(f64, Vec3)],
    window: f64,
    bins: usize,
) -> Result<MetricsReport, EvalError> {
    let est: Vec<(f64, Vec3)> = estimates.estimates().map(|e| (e.t, e.p)).collect();
    let assoc = associate(&est, truth, window)?;
    let mut report = compute_metrics(&assoc.pairs, bins)?;
    report.dropped = assoc.dropped;
    for f in estimates.failures() {
        *report.solver_errors.entry(f.code.clone()).or_default() += 1;
    }
    Ok(report)
}

/// Metrics of an estimates file against a dataset's ground truth.
pub fn evaluate(estimates: &EstimatesFile, ds: &Dataset) -> Result<MetricsReport, EvalError> {
    let cfg = PipelineConfig::from_dataset(ds);
    evaluate_against(
        estimates,
        &truth_track(ds),
        cfg.association_window,
        cfg.histogram_bins,
    )
}
