//! Minimal SVG line plots for the trajectory log. No plotting dependency;
//! the figures are diagnostic.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rhc_core::sim::TrajectoryLog;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

const DRIVE_COLOR: &str = "#c62828";
const RESPONSE_COLOR: &str = "#1565c0";
const PANEL_W: usize = 860;
const PANEL_H: usize = 220;
const MARGIN_L: usize = 70;
const MARGIN_R: usize = 20;
const MARGIN_V: usize = 34;
const MAX_POINTS: usize = 2000;

fn downsample(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(stride).copied().collect();
    if let Some(&last) = points.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() || x_max <= x_min {
        x_min = 0.0;
        x_max = 1.0;
    }
    if !y_min.is_finite() || y_max <= y_min {
        let mid = if y_min.is_finite() { y_min } else { 0.0 };
        y_min = mid - 1.0;
        y_max = mid + 1.0;
    }
    (x_min, x_max, y_min, y_max)
}

fn write_panel<W: Write>(w: &mut W, panel: &Panel, top: usize) -> io::Result<()> {
    let (x_min, x_max, y_min, y_max) = bounds(&panel.series);
    let plot_w = (PANEL_W - MARGIN_L - MARGIN_R) as f64;
    let plot_h = (PANEL_H - 2 * MARGIN_V) as f64;
    let x_of = |x: f64| MARGIN_L as f64 + (x - x_min) / (x_max - x_min) * plot_w;
    let y_of = |y: f64| (top + PANEL_H - MARGIN_V) as f64 - (y - y_min) / (y_max - y_min) * plot_h;

    writeln!(
        w,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444" stroke-width="1"/>"##,
        MARGIN_L,
        top + MARGIN_V,
        PANEL_W - MARGIN_L - MARGIN_R,
        PANEL_H - 2 * MARGIN_V
    )?;
    writeln!(
        w,
        r##"<text x="{}" y="{}" font-size="13" font-family="sans-serif">{}</text>"##,
        MARGIN_L,
        top + MARGIN_V - 8,
        panel.title
    )?;
    // axis extents
    writeln!(
        w,
        r##"<text x="{}" y="{}" font-size="10" font-family="sans-serif" text-anchor="end">{:.3e}</text>"##,
        MARGIN_L - 4,
        top + MARGIN_V + 10,
        y_max
    )?;
    writeln!(
        w,
        r##"<text x="{}" y="{}" font-size="10" font-family="sans-serif" text-anchor="end">{:.3e}</text>"##,
        MARGIN_L - 4,
        top + PANEL_H - MARGIN_V,
        y_min
    )?;
    writeln!(
        w,
        r##"<text x="{}" y="{}" font-size="10" font-family="sans-serif">{:.1}</text>"##,
        MARGIN_L,
        top + PANEL_H - MARGIN_V + 14,
        x_min
    )?;
    writeln!(
        w,
        r##"<text x="{}" y="{}" font-size="10" font-family="sans-serif" text-anchor="end">{:.1}</text>"##,
        PANEL_W - MARGIN_R,
        top + PANEL_H - MARGIN_V + 14,
        x_max
    )?;

    for (i, s) in panel.series.iter().enumerate() {
        let pts = downsample(&s.points);
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", x_of(x), y_of(y)))
            .collect();
        writeln!(
            w,
            r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2"/>"##,
            path.join(" "),
            s.color
        )?;
        writeln!(
            w,
            r##"<text x="{}" y="{}" font-size="11" font-family="sans-serif" fill="{}">{}</text>"##,
            PANEL_W - MARGIN_R - 90 * (panel.series.len() - i),
            top + MARGIN_V - 8,
            s.color,
            s.label
        )?;
    }
    Ok(())
}

pub fn render(path: &Path, panels: &[Panel]) -> io::Result<()> {
    let height = PANEL_H * panels.len();
    let file = std::fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    writeln!(
        w,
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}">
<rect width="100%" height="100%" fill="white"/>"##
    )?;
    for (i, panel) in panels.iter().enumerate() {
        write_panel(&mut w, panel, i * PANEL_H)?;
    }
    writeln!(w, "</svg>")?;
    w.flush()
}

/// Derives the per-figure paths from a configured stem: `out.svg` becomes
/// `out_states.svg`, `out_controls.svg`, `out_estimates.svg`.
pub fn figure_paths(stem: &Path) -> [PathBuf; 3] {
    let base = stem.with_extension("");
    let name = |suffix: &str| {
        let mut s = base.as_os_str().to_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    [name("_states.svg"), name("_controls.svg"), name("_estimates.svg")]
}

/// Writes the three figure groups: state overlays, controls, estimates
/// against their true values.
pub fn write_figures(stem: &Path, log: &TrajectoryLog) -> io::Result<[PathBuf; 3]> {
    let t: Vec<f64> = log.rows.iter().map(|r| r.t).collect();
    let paths = figure_paths(stem);

    let state_panels: Vec<Panel> = (0..3)
        .map(|i| Panel {
            title: format!("state {} (drive vs response)", i + 1),
            series: vec![
                Series {
                    label: format!("x{}", i + 1),
                    color: DRIVE_COLOR,
                    points: t.iter().zip(log.rows.iter().map(|r| r.x[i])).map(|(&a, b)| (a, b)).collect(),
                },
                Series {
                    label: format!("y{}", i + 1),
                    color: RESPONSE_COLOR,
                    points: t.iter().zip(log.rows.iter().map(|r| r.y[i])).map(|(&a, b)| (a, b)).collect(),
                },
            ],
        })
        .collect();
    render(&paths[0], &state_panels)?;

    let control_panels: Vec<Panel> = (0..3)
        .map(|i| Panel {
            title: format!("control u{}", i + 1),
            series: vec![Series {
                label: format!("u{}", i + 1),
                color: RESPONSE_COLOR,
                points: t.iter().zip(log.rows.iter().map(|r| r.u[i])).map(|(&a, b)| (a, b)).collect(),
            }],
        })
        .collect();
    render(&paths[1], &control_panels)?;

    let p = log.rows.first().map_or(0, |r| r.theta_hat.len());
    let estimate_panels: Vec<Panel> = (0..p)
        .map(|i| Panel {
            title: format!("estimated parameter {} (true vs estimate)", i + 1),
            series: vec![
                Series {
                    label: "true".to_string(),
                    color: DRIVE_COLOR,
                    points: t
                        .iter()
                        .zip(log.rows.iter().map(|r| r.theta_true[i]))
                        .map(|(&a, b)| (a, b))
                        .collect(),
                },
                Series {
                    label: "estimate".to_string(),
                    color: RESPONSE_COLOR,
                    points: t
                        .iter()
                        .zip(log.rows.iter().map(|r| r.theta_hat[i]))
                        .map(|(&a, b)| (a, b))
                        .collect(),
                },
            ],
        })
        .collect();
    render(&paths[2], &estimate_panels)?;
    Ok(paths)
}
