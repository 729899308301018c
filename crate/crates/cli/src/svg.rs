//! The two shipped plots. Coordinates are printed with fixed precision so
//! the files are as reproducible as the JSON.

use std::f64::consts::PI;
use std::fmt::Write;

use geospace::geodesic_space::MobiusChartPoint;

use crate::report::{ChartEntry, ChartValue};

const SIZE: f64 = 480.0;

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, "<!-- geospace {} -->", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "<title>{title}</title>");
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    s
}

/// Disc chart of lines in the plane. Boundary points are drawn at both
/// glued positions.
pub fn g_r2(points: &[ChartEntry]) -> String {
    let scale = SIZE / 2.6;
    let c = SIZE / 2.0;
    let px = |x: f64| c + scale * x;
    let py = |y: f64| c - scale * y;
    let mut s = header("lines in the plane: disc chart");
    let _ = writeln!(
        s,
        r#"<circle cx="{c:.3}" cy="{c:.3}" r="{scale:.3}" fill="none" stroke="black" stroke-dasharray="6 4"/>"#
    );
    // the deleted pair (±1, 0)
    for x in [-1.0, 1.0] {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="5" fill="white" stroke="red"/>"#,
            px(x),
            py(0.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="8" y="18" font-size="12">antipodal boundary points are identified</text>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="8" y="34" font-size="12">open circles: the deleted pair (±1, 0)</text>"#
    );
    for e in points {
        let ChartValue::GR2(p) = &e.value else { continue };
        match *p {
            MobiusChartPoint::Interior { ubar, vbar } => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="steelblue"/>"#,
                    px(ubar),
                    py(vbar)
                );
            }
            MobiusChartPoint::Boundary { theta } => {
                let (a, b) = (theta.cos(), theta.sin());
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="orange" stroke-dasharray="2 3"/>"#,
                    px(a),
                    py(b),
                    px(-a),
                    py(-b)
                );
                for (x, y) in [(a, b), (-a, -b)] {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="orange"/>"#,
                        px(x),
                        py(y)
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter of tangent-bundle chart points: direction angle against the
/// signed offset (planar) or the offset length (higher dimensions).
pub fn ts(points: &[ChartEntry]) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|e| match &e.value {
            ChartValue::Ts(t) => {
                let d = &t.direction;
                let angle = if d.len() >= 2 { d[1].atan2(d[0]) } else { 0.0 };
                let y = if d.len() == 2 {
                    t.offset[1] * d[0] - t.offset[0] * d[1]
                } else {
                    t.offset.norm()
                };
                Some((angle, y))
            }
            ChartValue::GR2(_) => None,
        })
        .collect();
    let ymax = pts.iter().map(|p| p.1.abs()).fold(1.0, f64::max);
    let margin = 40.0;
    let w = SIZE - 2.0 * margin;
    let px = |a: f64| margin + w * (a + PI) / (2.0 * PI);
    let py = |y: f64| SIZE / 2.0 - (w / 2.0) * y / ymax;
    let mut s = header("geodesics: tangent-bundle chart");
    let _ = writeln!(
        s,
        r#"<line x1="{margin}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#,
        SIZE / 2.0,
        SIZE - margin,
        SIZE / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.3}" y1="{margin}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#,
        px(0.0),
        px(0.0),
        SIZE - margin
    );
    let _ = writeln!(
        s,
        r#"<text x="8" y="18" font-size="12">direction angle (−π..π) vs offset, |offset| ≤ {ymax:.3}</text>"#
    );
    for (a, y) in pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="2" fill="steelblue"/>"#,
            px(a),
            py(y)
        );
    }
    s.push_str("</svg>\n");
    s
}
