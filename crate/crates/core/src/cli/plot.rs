//! Self-contained SVG plots.
//!
//! Data are drawn inside a group flipped to a y-up frame, so path
//! coordinates grow with the plotted value.

use std::fmt::Write;

use crate::convergence::{ConvergenceReport, RegionProbe};
use crate::error::{LabError, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
/// Stand-in for non-positive values on a log axis.
const LOG_FLOOR: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ErrorVsN,
    AbsDetVsLambda,
    RegionMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn inner() -> (f64, f64) {
    (W - LEFT - RIGHT, H - TOP - BOTTOM)
}

fn header(out: &mut String, title: &str, hash: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<metadata>config_hash={hash}</metadata>");
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + inner().0 / 2.0,
        TOP / 2.0 + 5.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, x_label: &str, y_label: &str, x_ticks: &[(f64, String)], y_ticks: &[(f64, String)]) {
    let (w, h) = inner();
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    for (px, label) in x_ticks {
        let x = LEFT + px;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + h,
            TOP + h + 5.0,
            TOP + h + 18.0,
            escape(label)
        );
    }
    for (py, label) in y_ticks {
        let y = TOP + h - py;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + w / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + h / 2.0,
        TOP + h / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    let x = W - RIGHT + 12.0;
    for (k, (name, colour)) in entries.iter().enumerate() {
        let y = TOP + 12.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<g class="legend"><rect x="{x}" y="{:.2}" width="12" height="12" fill="{colour}"/><text x="{}" y="{:.2}">{}</text></g>"#,
            y - 10.0,
            x + 18.0,
            y,
            escape(name)
        );
    }
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Line plot; with `log_y` the values are drawn as `log10`.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool, hash: &str) -> Result<String> {
    let series: Vec<&Series> = series.iter().filter(|s| !s.points.is_empty()).collect();
    if series.is_empty() {
        return Err(LabError::MissingSeries(title.to_string()));
    }
    let ty = |y: f64| if log_y { y.max(LOG_FLOOR).log10() } else { y };
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (mut y0, mut y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| ty(p.1))));
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    }
    let (w, h) = inner();
    let px = |x: f64| (x - x0) / (x1 - x0) * w;
    let py = |y: f64| (ty(y) - y0) / (y1 - y0) * h;

    let mut out = String::new();
    header(&mut out, title, hash);
    let x_ticks: Vec<(f64, String)> = (0..=4)
        .map(|k| {
            let x = x0 + (x1 - x0) * k as f64 / 4.0;
            (px(x), format!("{}", (x * 1000.0).round() / 1000.0))
        })
        .collect();
    let y_ticks: Vec<(f64, String)> = if log_y {
        let step = ((y1 - y0) / 8.0).ceil().max(1.0) as i64;
        (y0 as i64..=y1 as i64)
            .step_by(step as usize)
            .map(|e| ((e as f64 - y0) / (y1 - y0) * h, format!("1e{e}")))
            .collect()
    } else {
        (0..=4)
            .map(|k| {
                let y = y0 + (y1 - y0) * k as f64 / 4.0;
                ((y - y0) / (y1 - y0) * h, format!("{:.3}", y))
            })
            .collect()
    };
    axes(&mut out, x_label, y_label, &x_ticks, &y_ticks);
    let _ = writeln!(out, r#"<g transform="translate({LEFT} {}) scale(1 -1)">"#, TOP + h);
    for (k, s) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, px(x), py(y));
        }
        let _ = writeln!(
            out,
            r#"<path class="series" data-name="{}" d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            escape(&s.name)
        );
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#, px(x), py(y));
        }
    }
    let _ = writeln!(out, "</g>");
    let entries: Vec<(String, &str)> = series
        .iter()
        .enumerate()
        .map(|(k, s)| (s.name.clone(), PALETTE[k % PALETTE.len()]))
        .collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Per-n maxima over `λ` of the three sup errors, on a log axis.
pub fn error_plot(report: &ConvergenceReport, hash: &str) -> Result<String> {
    let per_n = report.max_over_lambda();
    let names = ["kernel", "row Carleman", "column Carleman"];
    let series: Vec<Series> = (0..3)
        .map(|k| Series {
            name: names[k].to_string(),
            points: per_n
                .iter()
                .filter_map(|(n, e)| e[k].map(|v| (*n as f64, v)))
                .collect(),
        })
        .collect();
    line_plot(&report.study, "n", "sup error", &series, true, hash)
}

/// `|D(λ)|` along a real scan line, on a log axis.
pub fn abs_det_plot(scan: &[(f64, f64)], hash: &str) -> Result<String> {
    let series = [Series {
        name: "|D(λ)|".into(),
        points: scan.to_vec(),
    }];
    line_plot("Fredholm determinant", "Re λ", "|D(λ)|", &series, true, hash)
}

/// Bounded/unbounded classification over the λ lattice.
pub fn region_plot(probe: &RegionProbe, hash: &str) -> Result<String> {
    if probe.points.is_empty() {
        return Err(LabError::MissingSeries("region points".into()));
    }
    let (nre, nim) = (
        probe.points.iter().filter(|p| p.lambda.im == probe.points[0].lambda.im).count(),
        probe.points.iter().filter(|p| p.lambda.re == probe.points[0].lambda.re).count(),
    );
    let (w, h) = inner();
    let cw = w / nre as f64;
    let ch = h / nim as f64;
    let (r0, r1) = probe.search_box.re;
    let (i0, i1) = probe.search_box.im;
    let mut out = String::new();
    header(&mut out, "region of boundedness", hash);
    let tick = |a: f64, b: f64, len: f64| -> Vec<(f64, String)> {
        (0..=4)
            .map(|k| {
                let v = a + (b - a) * k as f64 / 4.0;
                (len * k as f64 / 4.0, format!("{:.3}", v))
            })
            .collect()
    };
    axes(&mut out, "Re λ", "Im λ", &tick(r0, r1, w), &tick(i0, i1, h));
    let _ = writeln!(out, r#"<g transform="translate({LEFT} {}) scale(1 -1)">"#, TOP + h);
    const BOUNDED: &str = "#4c9f70";
    const UNBOUNDED: &str = "#d1495b";
    for (k, p) in probe.points.iter().enumerate() {
        let (i, j) = (k % nre, k / nre);
        let colour = if p.bounded { BOUNDED } else { UNBOUNDED };
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{colour}"/>"#,
            i as f64 * cw,
            j as f64 * ch,
            cw,
            ch
        );
    }
    let _ = writeln!(out, "</g>");
    let mut entries = Vec::new();
    if probe.points.iter().any(|p| p.bounded) {
        entries.push(("bounded".to_string(), BOUNDED));
    }
    if probe.points.iter().any(|p| !p.bounded) {
        entries.push(("unbounded".to_string(), UNBOUNDED));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}
