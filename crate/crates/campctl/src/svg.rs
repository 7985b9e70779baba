//! Minimal static SVG plots: line/marker series plus horizontal and vertical
//! reference lines. Output depends only on the data, so it is byte-stable.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
/// Longer series are decimated by stride before drawing.
const MAX_POINTS: usize = 4000;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    Markers,
    LineMarkers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    pub color: &'static str,
}

#[derive(Debug, Clone)]
pub struct RefLine {
    pub label: String,
    pub at: f64,
    pub color: &'static str,
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub hlines: Vec<RefLine>,
    pub vlines: Vec<RefLine>,
    /// Free text embedded as `<metadata>`.
    pub metadata: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let k = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - d, hi + d);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn decimate(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if pts.len() <= MAX_POINTS {
        return pts.to_vec();
    }
    let stride = pts.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = pts.iter().step_by(stride).copied().collect();
    if out.last() != pts.last() {
        out.push(*pts.last().unwrap());
    }
    out
}

impl Plot {
    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let finite = |v: f64| v.is_finite();
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .chain(self.vlines.iter().map(|l| l.at))
            .filter(|v| finite(*v));
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.hlines.iter().map(|l| l.at))
            .filter(|v| finite(*v));
        let range = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        };
        let (x0, x1) = range(&mut xs.into_iter());
        let (y0, y1) = range(&mut ys.into_iter());
        (padded(x0, x1), padded(y0, y1))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        if !self.metadata.is_empty() {
            let _ = writeln!(s, "<metadata>{}</metadata>", escape(&self.metadata));
        }
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );

        // grid and ticks
        let xstep = nice_step(x1 - x0);
        let mut t = (x0 / xstep).ceil() * xstep;
        while t <= x1 {
            let x = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 18.0,
                tick_label(t)
            );
            t += xstep;
        }
        let ystep = nice_step(y1 - y0);
        let mut t = (y0 / ystep).ceil() * ystep;
        while t <= y1 {
            let y = sy(t);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                tick_label(t)
            );
            t += ystep;
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let mut legend: Vec<(&str, &str, bool)> = Vec::new();
        for l in &self.hlines {
            let y = sy(l.at);
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-dasharray="6 4"/>"#,
                LEFT + pw,
                l.color
            );
            legend.push((&l.label, l.color, true));
        }
        for l in &self.vlines {
            let x = sx(l.at);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="3 3"/>"#,
                TOP + ph,
                l.color
            );
            legend.push((&l.label, l.color, true));
        }
        for ser in &self.series {
            let pts: Vec<(f64, f64)> = decimate(&ser.points)
                .into_iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .collect();
            if matches!(ser.style, Style::Line | Style::LineMarkers) && pts.len() > 1 {
                let path: Vec<String> = pts
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    ser.color,
                    path.join(" ")
                );
            }
            if matches!(ser.style, Style::Markers | Style::LineMarkers) {
                for &(x, y) in &pts {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#,
                        sx(x),
                        sy(y),
                        ser.color
                    );
                }
            }
            legend.push((&ser.label, ser.color, false));
        }

        for (i, (label, color, dashed)) in legend.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = LEFT + pw + 12.0;
            let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
                x + 20.0,
                x + 26.0,
                y + 4.0,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
