//! Minimal SVG heatmaps of one mesh component over the torus grid.

use std::fmt::Write;

const CELL: f64 = 24.0;
const MARGIN: f64 = 48.0;
const BAR: f64 = 16.0;

// viridis samples
const STOPS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn colour(x: f64) -> String {
    let x = x.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |u: f64, v: f64| (u + (v - u) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of `values` (row-major, `n × n`, node `(i, j)` at `i·n + j`) with
/// `θ₁` on the horizontal axis and `θ₂` increasing upwards. Missing nodes are
/// drawn grey.
pub fn heatmap(title: &str, n: usize, values: &[Option<f64>]) -> String {
    assert_eq!(values.len(), n * n, "heatmap needs n*n values");
    let finite = values.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let side = n as f64 * CELL;
    let width = side + 2.0 * MARGIN + BAR + 64.0;
    let height = side + 2.0 * MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN + side / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    for i in 0..n {
        for j in 0..n {
            let x = MARGIN + i as f64 * CELL;
            let y = MARGIN + (n - 1 - j) as f64 * CELL;
            let fill = match values[i * n + j] {
                Some(v) if v.is_finite() => colour((v - lo) / span),
                _ => "#999999".to_string(),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"/>"#
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">theta1</text>"#,
        MARGIN + side / 2.0,
        MARGIN + side + 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">theta2</text>"#,
        MARGIN - 12.0,
        MARGIN + side / 2.0,
        MARGIN - 12.0,
        MARGIN + side / 2.0
    );

    let bx = MARGIN + side + 16.0;
    let steps = 32;
    let bh = side / steps as f64;
    for k in 0..steps {
        let y = MARGIN + side - (k + 1) as f64 * bh;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{y}" width="{BAR}" height="{bh}" fill="{}"/>"#,
            colour((k as f64 + 0.5) / steps as f64)
        );
    }
    if lo.is_finite() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{hi:.6}</text><text x="{}" y="{}">{lo:.6}</text>"#,
            bx + BAR + 4.0,
            MARGIN + 10.0,
            bx + BAR + 4.0,
            MARGIN + side
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_rect_per_node_plus_colour_bar() {
        let vals: Vec<Option<f64>> = (0..9).map(|k| Some(k as f64)).collect();
        let svg = heatmap("y1 <mesh>", 3, &vals);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 9 + 32);
        assert!(svg.contains("y1 &lt;mesh&gt;"));
    }

    #[test]
    fn colour_scale_ends() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
        assert_eq!(colour(7.0), "#fde725");
    }

    #[test]
    fn constant_and_missing_values() {
        let svg = heatmap("flat", 2, &[Some(1.0), None, Some(1.0), Some(1.0)]);
        assert!(svg.contains("#999999"));
    }
}
