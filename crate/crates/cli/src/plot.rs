use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use capsd::eval::truth_track;
use capsd::{associate, compute_metrics, Dataset, EstimatesFile, PipelineConfig, Vec3};
use plotters::prelude::*;

const TRUTH: RGBColor = RGBColor(40, 40, 40);
const EST: RGBColor = RGBColor(214, 39, 40);

pub fn render_all(est: &EstimatesFile, ds: &Dataset, dir: &Path) -> Result<Vec<PathBuf>> {
    let truth = truth_track(ds);
    let points: Vec<(f64, Vec3)> = est.estimates().map(|e| (e.t, e.p)).collect();
    let cfg = PipelineConfig::from_dataset(ds);
    let assoc = associate(&points, &truth, cfg.association_window)?;
    let report = compute_metrics(&assoc.pairs, cfg.histogram_bins)?;

    let traj = dir.join("trajectory.svg");
    trajectory(&traj, &truth, &points).map_err(|e| anyhow!("{e}"))?;
    let axes = dir.join("axes.svg");
    per_axis(&axes, &truth, &points).map_err(|e| anyhow!("{e}"))?;
    let hist = dir.join("histogram.svg");
    histograms(&hist, &report).map_err(|e| anyhow!("{e}"))?;
    Ok(vec![traj, axes, hist])
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let pad = ((hi - lo) * 0.05).max(0.05);
    (lo - pad, hi + pad)
}

type DrawResult = std::result::Result<(), Box<dyn std::error::Error>>;

fn trajectory(path: &Path, truth: &[(f64, Vec3)], est: &[(f64, Vec3)]) -> DrawResult {
    let root = SVGBackend::new(path, (800, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let all = || truth.iter().chain(est);
    let (x0, x1) = bounds(all().map(|s| s.1.x));
    let (y0, y1) = bounds(all().map(|s| s.1.y));
    let mut chart = ChartBuilder::on(&root)
        .caption("top view", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart
        .configure_mesh()
        .x_desc("x [m]")
        .y_desc("y [m]")
        .draw()?;
    chart
        .draw_series(LineSeries::new(
            truth.iter().map(|s| (s.1.x, s.1.y)),
            &TRUTH,
        ))?
        .label("truth")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 20, y)], TRUTH));
    chart
        .draw_series(
            est.iter()
                .map(|s| Circle::new((s.1.x, s.1.y), 2, EST.filled())),
        )?
        .label("estimate")
        .legend(|(x, y)| Circle::new((x + 10, y), 3, EST.filled()));
    chart.configure_series_labels().border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}

fn per_axis(path: &Path, truth: &[(f64, Vec3)], est: &[(f64, Vec3)]) -> DrawResult {
    let root = SVGBackend::new(path, (900, 900)).into_drawing_area();
    root.fill(&WHITE)?;
    let (t0, t1) = bounds(truth.iter().chain(est).map(|s| s.0));
    for (axis, area) in root.split_evenly((3, 1)).iter().enumerate() {
        let name = ["x", "y", "z"][axis];
        let (v0, v1) = bounds(truth.iter().chain(est).map(|s| s.1[axis]));
        let mut chart = ChartBuilder::on(area)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(50)
            .build_cartesian_2d(t0..t1, v0..v1)?;
        chart
            .configure_mesh()
            .x_desc("t [s]")
            .y_desc(format!("{name} [m]"))
            .draw()?;
        chart.draw_series(LineSeries::new(
            truth.iter().map(|s| (s.0, s.1[axis])),
            &TRUTH,
        ))?;
        chart.draw_series(
            est.iter()
                .map(|s| Circle::new((s.0, s.1[axis]), 1, EST.filled())),
        )?;
    }
    root.present()?;
    Ok(())
}

fn histograms(path: &Path, report: &capsd::MetricsReport) -> DrawResult {
    let root = SVGBackend::new(path, (900, 700)).into_drawing_area();
    root.fill(&WHITE)?;
    let h = &report.histograms;
    let panels = [
        ("x error", &h.x),
        ("y error", &h.y),
        ("z error", &h.z),
        ("euclidean error", &h.euclidean),
    ];
    for ((name, hist), area) in panels.iter().zip(root.split_evenly((2, 2)).iter()) {
        let top = hist.counts.iter().copied().max().unwrap_or(1).max(1) as u32;
        let lo = hist.lo * 1000.0;
        let w = hist.bin_width() * 1000.0;
        let mut chart = ChartBuilder::on(area)
            .caption(*name, ("sans-serif", 16))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(lo..hist.hi * 1000.0, 0u32..top + top / 10 + 1)?;
        chart.configure_mesh().x_desc("mm").y_desc("count").draw()?;
        chart.draw_series(hist.counts.iter().enumerate().map(|(i, &c)| {
            let a = lo + i as f64 * w;
            Rectangle::new([(a, 0), (a + w, c as u32)], EST.mix(0.6).filled())
        }))?;
    }
    root.present()?;
    Ok(())
}
