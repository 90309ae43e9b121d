//! Minimal SVG scatter plots. Presentation only; not covered by golden files.

use std::fmt::Write;

const SIZE: f64 = 480.0;
const PAD: f64 = 20.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// A point group drawn in one color.
pub struct Series<'a> {
    pub points: &'a [Vec<f64>],
    pub radius: f64,
    pub opacity: f64,
}

/// Scatter of the first two coordinates of every series; series `i` uses
/// palette color `color_of[i]`.
pub fn scatter(series: &[Series<'_>], color_of: &[usize]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.len() >= 2);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let map = |v: f64, lo: f64| PAD + (v - lo) / span * (SIZE - 2.0 * PAD);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (s, &c) in series.iter().zip(color_of) {
        let color = PALETTE[c % PALETTE.len()];
        for p in s.points.iter().filter(|p| p.len() >= 2) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{}" fill="{color}" fill-opacity="{}"/>"#,
                map(p[0], x0),
                SIZE - map(p[1], y0),
                s.radius,
                s.opacity
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_circle_per_point() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let svg = scatter(&[Series { points: &pts, radius: 2.0, opacity: 1.0 }], &[0]);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.starts_with("<svg"));
    }
}
