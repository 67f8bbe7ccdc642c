//! Static SVG plots. Output is plain text with fixed-precision numbers, so
//! identical inputs give byte-identical files.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::geostats::GeoPoint;
use crate::gp::CurvePoint;
use crate::transforms::PatternMatrix;

/// Categorical colours, cycled by zone index.
pub const ZONE_COLORS: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const LOW_RGB: [f64; 3] = [68.0, 1.0, 84.0];
const HIGH_RGB: [f64; 3] = [253.0, 231.0, 37.0];

pub fn zone_color(z: usize) -> &'static str {
    ZONE_COLORS[z % ZONE_COLORS.len()]
}

/// Linear blend between the low and high heatmap colours, `t` in [0, 1].
pub fn scale_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let c: Vec<u8> = LOW_RGB
        .iter()
        .zip(&HIGH_RGB)
        .map(|(a, b)| (a + (b - a) * t).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One cell per (row, column), rows drawn in `order`.
pub fn render_heatmap(patterns: &PatternMatrix, order: &[usize]) -> Result<String> {
    let n = patterns.n_rows();
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: order.len(),
        });
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParameter("order is not a permutation".into()));
        }
    }
    let t = patterns.n_cols();
    let cell_w = 8.0;
    let cell_h = if n > 0 { (600.0 / n as f64).clamp(0.5, 20.0) } else { 1.0 };
    let (ml, mt) = (10.0, 10.0);
    let mut out = String::new();
    header(&mut out, 2.0 * ml + cell_w * t as f64, 2.0 * mt + cell_h * n as f64);
    let (lo, hi) = patterns.min_max().unwrap_or((0.0, 0.0));
    let span = hi - lo;
    let _ = writeln!(out, r#"<g shape-rendering="crispEdges">"#);
    for (r, &i) in order.iter().enumerate() {
        for (c, v) in patterns.row(i).iter().enumerate() {
            let frac = if span > 0.0 { (v - lo) / span } else { 0.0 };
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{cell_w:.3}" height="{cell_h:.3}" fill="{}"/>"#,
                ml + c as f64 * cell_w,
                mt + r as f64 * cell_h,
                scale_color(frac)
            );
        }
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    width: f64,
    height: f64,
    margin: f64,
}

impl Frame {
    const WIDTH: f64 = 640.0;
    const HEIGHT: f64 = 480.0;
    const MARGIN: f64 = 50.0;

    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v
                .filter(|x| x.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Self {
            x: range(&mut xs.clone()),
            y: range(&mut ys.clone()),
            width: Self::WIDTH,
            height: Self::HEIGHT,
            margin: Self::MARGIN,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.margin + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 2.0 * self.margin)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - self.margin - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 2.0 * self.margin)
    }

    fn begin(&self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut out = String::new();
        header(&mut out, self.width, self.height);
        let (l, r) = (self.margin, self.width - self.margin);
        let (t, b) = (self.margin, self.height - self.margin);
        let _ = writeln!(
            out,
            r#"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            self.width / 2.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
            self.width / 2.0,
            self.height - 10.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {:.1})">{}</text>"#,
            self.height / 2.0,
            self.height / 2.0,
            escape(ylabel)
        );
        for (v, anchor_x) in [(self.x.0, l), (self.x.1, r)] {
            let _ = writeln!(
                out,
                r#"<text x="{anchor_x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{v:.4}</text>"#,
                b + 14.0
            );
        }
        for (v, anchor_y) in [(self.y.0, b), (self.y.1, t)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{anchor_y:.1}" text-anchor="end" font-size="10">{v:.4}</text>"#,
                l - 4.0
            );
        }
        out
    }

    fn polyline(&self, out: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, extra: &str) {
        let coords: Vec<String> = pts
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>"#,
            coords.join(" ")
        );
    }
}

fn legend(out: &mut String, names: &[String]) {
    for (z, name) in names.iter().enumerate() {
        let y = 60.0 + 16.0 * z as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            Frame::WIDTH - Frame::MARGIN - 90.0,
            y - 9.0,
            zone_color(z),
            Frame::WIDTH - Frame::MARGIN - 75.0,
            y,
            escape(name)
        );
    }
}

fn zone_names(k: usize) -> Vec<String> {
    (0..k).map(|z| format!("zone {z}")).collect()
}

/// Points at (lon, lat) on a plain equirectangular frame, coloured by zone.
pub fn render_scatter_map(points: &[GeoPoint], labels: &[usize], title: &str) -> Result<String> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: labels.len(),
        });
    }
    let frame = Frame::fit(points.iter().map(|p| p.lon), points.iter().map(|p| p.lat));
    let mut out = frame.begin(title, "longitude", "latitude");
    for (p, z) in points.iter().zip(labels) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
            frame.px(p.lon),
            frame.py(p.lat),
            zone_color(*z)
        );
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    legend(&mut out, &zone_names(k));
    out.push_str("</svg>\n");
    Ok(out)
}

/// A fitted line `y = slope * x + intercept` drawn over a zone's x range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedLine {
    pub zone: usize,
    pub slope: f64,
    pub intercept: f64,
}

pub fn render_regression_plot(
    x: &[f64],
    y: &[f64],
    labels: &[usize],
    lines: &[FittedLine],
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> Result<String> {
    if x.len() != y.len() || x.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len().min(labels.len()),
        });
    }
    let frame = Frame::fit(x.iter().copied(), y.iter().copied());
    let mut out = frame.begin(title, xlabel, ylabel);
    for ((xi, yi), z) in x.iter().zip(y).zip(labels) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.5"/>"#,
            frame.px(*xi),
            frame.py(*yi),
            zone_color(*z)
        );
    }
    for line in lines {
        let (lo, hi) = x
            .iter()
            .zip(labels)
            .filter(|(_, z)| **z == line.zone)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (v, _)| (a.min(*v), b.max(*v)));
        if lo.is_finite() {
            let at = |v: f64| (v, line.slope * v + line.intercept);
            frame.polyline(&mut out, [at(lo), at(hi)].into_iter(), zone_color(line.zone), "");
        }
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    legend(&mut out, &zone_names(k));
    out.push_str("</svg>\n");
    Ok(out)
}

/// Mean curve with a shaded `lo..hi` band per zone.
pub fn render_band_plot(curves: &[(usize, Vec<CurvePoint>)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let all = curves.iter().flat_map(|(_, c)| c.iter());
    let frame = Frame::fit(
        all.clone().map(|p| p.log_phi),
        all.flat_map(|p| [p.lo, p.hi]),
    );
    let mut out = frame.begin(title, xlabel, ylabel);
    for (zone, curve) in curves {
        if curve.is_empty() {
            continue;
        }
        let upper = curve.iter().map(|p| (p.log_phi, p.hi));
        let lower = curve.iter().rev().map(|p| (p.log_phi, p.lo));
        let coords: Vec<String> = upper
            .chain(lower)
            .map(|(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            coords.join(" "),
            zone_color(*zone)
        );
        frame.polyline(&mut out, curve.iter().map(|p| (p.log_phi, p.mean)), zone_color(*zone), "");
    }
    let k = curves.iter().map(|(z, _)| z + 1).max().unwrap_or(0);
    legend(&mut out, &zone_names(k));
    out.push_str("</svg>\n");
    out
}

/// Density curves on a shared grid; the last curve is drawn dashed when
/// `total_last` is set.
pub fn render_density_plot(grid: &[f64], curves: &[(String, Vec<f64>)], total_last: bool, title: &str, xlabel: &str) -> String {
    let frame = Frame::fit(
        grid.iter().copied(),
        curves.iter().flat_map(|(_, c)| c.iter().copied()).chain([0.0]),
    );
    let mut out = frame.begin(title, xlabel, "density");
    for (i, (_, c)) in curves.iter().enumerate() {
        let dashed = total_last && i + 1 == curves.len();
        let (color, extra) = if dashed {
            ("black", r#" stroke-dasharray="5,3""#)
        } else {
            (zone_color(i), "")
        };
        frame.polyline(&mut out, grid.iter().copied().zip(c.iter().copied()), color, extra);
    }
    let names: Vec<String> = curves.iter().map(|(n, _)| n.clone()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}
