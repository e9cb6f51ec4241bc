//! SVG charts of planner runs and flock histories.

use std::ops::Range;
use std::path::{Path, PathBuf};

use aviary_core::planner::PlannerReport;
use aviary_core::FlockSample;
use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::CliError;

const SIZE: (u32, u32) = (900, 540);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn err(e: impl std::fmt::Display) -> CliError {
    CliError::Plot(e.to_string())
}

/// Padded range over all finite values.
fn span(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    lo - pad..hi + pad
}

fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> Result<PathBuf, CliError> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let xs = span(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let ys = span(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(64)
        .build_cartesian_2d(xs, ys)
        .map_err(err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(err)?;
    for (k, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(
                points.iter().copied(),
                color.stroke_width(2),
            ))
            .map_err(err)?
            .label(name.as_str())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)?;
    Ok(path.to_path_buf())
}

/// Best fitness per generation of every week's search.
pub fn convergence(report: &PlannerReport, path: &Path) -> Result<PathBuf, CliError> {
    let series: Vec<_> = report
        .weeks
        .iter()
        .map(|w| {
            (
                w.week.to_string(),
                w.history
                    .iter()
                    .map(|g| (g.generation as f64, g.best))
                    .collect(),
            )
        })
        .collect();
    line_chart(
        path,
        "Best fitness per generation",
        "generation",
        "fitness",
        &series,
    )
}

/// Relative boundary error of each output at each week junction.
pub fn boundary(report: &PlannerReport, path: &Path) -> Result<PathBuf, CliError> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let top = report
        .boundary
        .iter()
        .flat_map(|b| b.relative_pct)
        .fold(0.5f64, f64::max)
        * 1.15;
    let mut chart = ChartBuilder::on(&root)
        .caption("Boundary error between weeks", ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(64)
        .build_cartesian_2d(0.5f64..6.0, 0.0..top)
        .map_err(err)?;
    chart
        .configure_mesh()
        .x_desc("week")
        .y_desc("relative error (%)")
        .x_labels(6)
        .draw()
        .map_err(err)?;
    for (k, name) in aviary_core::surrogate::OUTPUT_NAMES.iter().enumerate() {
        let color = PALETTE[k];
        let offset = (k as f64 - 1.0) * 0.22;
        chart
            .draw_series(report.boundary.iter().map(|b| {
                let x = b.week.index() as f64 + offset;
                Rectangle::new(
                    [(x - 0.1, 0.0), (x + 0.1, b.relative_pct[k])],
                    color.filled(),
                )
            }))
            .map_err(err)?
            .label(*name)
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 12, y + 5)], color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)?;
    Ok(path.to_path_buf())
}

/// Daily mean temperature of every flock.
pub fn climate_history(samples: &[FlockSample], path: &Path) -> Result<PathBuf, CliError> {
    let series: Vec<_> = samples
        .iter()
        .map(|s| {
            (
                format!("flock {}", s.flock_id),
                s.plans.iter().map(|p| (p.day as f64, p.t_avg)).collect(),
            )
        })
        .collect();
    line_chart(path, "Mean temperature set-point", "day", "°C", &series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub day: u32,
    pub mdw: f64,
    pub dfcpb: f64,
    pub nlbpa: f64,
    pub fcr: f64,
}

pub fn read_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Predicted feed conversion over the flock.
pub fn trajectory(rows: &[TrajectoryRow], path: &Path) -> Result<PathBuf, CliError> {
    let series = vec![(
        "FCR".to_string(),
        rows.iter().map(|r| (r.day as f64, r.fcr)).collect(),
    )];
    line_chart(path, "Predicted feed conversion", "day", "FCR", &series)
}
