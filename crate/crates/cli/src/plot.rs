//! Standalone SVG line charts: one panel per channel, generated vs true.

use std::fmt::Write;

use eegdif_core::Matrix;

const PANEL_W: f64 = 720.0;
const PANEL_H: f64 = 160.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 36.0;

/// Every `stride`-th index so at most `max_points` points are drawn.
fn indices(n: usize, max_points: usize) -> Vec<usize> {
    let stride = n.div_ceil(max_points.max(2)).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    idx
}

fn polyline(out: &mut String, values: &[f64], idx: &[usize], x0: f64, y0: f64, lo: f64, hi: f64, n: usize, color: &str) {
    let span = (hi - lo).max(1e-12);
    let w = PANEL_W - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let denom = (n.max(2) - 1) as f64;
    let pts: Vec<String> = idx
        .iter()
        .map(|&j| {
            let x = x0 + MARGIN_L + w * j as f64 / denom;
            let y = y0 + MARGIN_T + h * (1.0 - (values[j] - lo) / span);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
}

/// Renders `pred` (and `truth`, when given) for the selected channel rows.
pub fn render(channels: &[String], pred: &Matrix<f64>, truth: Option<&Matrix<f64>>, rate: Option<f64>, max_points: usize) -> String {
    let rows = channels.len();
    let height = PANEL_H * rows as f64 + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<g transform="translate({},{})"><line x1="0" y1="0" x2="20" y2="0" stroke="#d62728" stroke-width="2"/><text x="25" y="4">generated</text><line x1="100" y1="0" x2="120" y2="0" stroke="#1f77b4" stroke-width="2"/><text x="125" y="4">true</text></g>"##,
        MARGIN_L,
        PANEL_H * rows as f64 + 15.0
    );
    let n = pred.cols();
    if n == 0 {
        s.push_str("</svg>\n");
        return s;
    }
    let idx = indices(n, max_points);
    let x_label = if rate.is_some() { "time (s)" } else { "time index" };
    for (r, name) in channels.iter().enumerate() {
        let y0 = PANEL_H * r as f64;
        let mut lo = pred.row(r).iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = pred.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if let Some(t) = truth {
            lo = t.row(r).iter().copied().fold(lo, f64::min);
            hi = t.row(r).iter().copied().fold(hi, f64::max);
        }
        let (x1, x2) = (MARGIN_L, PANEL_W - MARGIN_R);
        let (y1, y2) = (y0 + MARGIN_T, y0 + PANEL_H - MARGIN_B);
        let _ = writeln!(s, r#"<text x="{x1}" y="{}" font-weight="bold">{name}</text>"#, y0 + 16.0);
        let _ = writeln!(s, r##"<rect x="{x1}" y="{y1}" width="{}" height="{}" fill="none" stroke="#888"/>"##, x2 - x1, y2 - y1);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.1}</text>"#, x1 - 4.0, y1 + 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y2}" text-anchor="end">{lo:.1}</text>"#, x1 - 4.0);
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">µV</text>"#,
            (y1 + y2) / 2.0,
            (y1 + y2) / 2.0
        );
        let end = match rate {
            Some(hz) => format!("{:.2}", (n - 1) as f64 / hz),
            None => format!("{}", n - 1),
        };
        let _ = writeln!(s, r#"<text x="{x1}" y="{}">0</text>"#, y2 + 14.0);
        let _ = writeln!(s, r#"<text x="{x2}" y="{}" text-anchor="end">{end}</text>"#, y2 + 14.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, (x1 + x2) / 2.0, y2 + 26.0);
        if let Some(t) = truth {
            polyline(&mut s, t.row(r), &idx, 0.0, y0, lo, hi, n, "#1f77b4");
        }
        polyline(&mut s, pred.row(r), &idx, 0.0, y0, lo, hi, n, "#d62728");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsampling_keeps_endpoints() {
        let idx = indices(10_001, 100);
        assert!(idx.len() <= 102);
        assert_eq!(idx[0], 0);
        assert_eq!(*idx.last().unwrap(), 10_000);
        assert_eq!(indices(3, 100), vec![0, 1, 2]);
    }

    #[test]
    fn one_panel_per_channel() {
        let pred = Matrix::from_fn(2, 5, |c, j| (c + j) as f64);
        let svg = render(&["A".into(), "B".into()], &pred, Some(&pred), None, 100);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains(">A<") && svg.contains(">B<"));
    }
}
