//! Self-contained SVG scatter of a sweep: empirical Gamma on x, fraction of
//! Max's weight on y, one marker per policy point.

use std::fmt::Write;

use crate::table::SweepRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    y_max: f64,
}

impl Frame {
    fn x(&self, gamma: f64) -> f64 {
        LEFT + gamma.clamp(0.0, 1.0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, frac: f64) -> f64 {
        let h = HEIGHT - TOP - BOTTOM;
        TOP + h - (frac.clamp(0.0, self.y_max) / self.y_max) * h
    }
}

fn marker(out: &mut String, policy: &str, x: f64, y: f64) {
    match policy {
        "max" => {
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="red" stroke-width="2"/>"#);
        }
        "rand" => {
            let _ = writeln!(
                out,
                r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="blue" stroke-width="2"/>"#,
                x - 5.0,
                y - 5.0,
                x + 5.0,
                y + 5.0,
                x - 5.0,
                y + 5.0,
                x + 5.0,
                y - 5.0
            );
        }
        _ => {
            let _ = writeln!(
                out,
                r#"<path d="M{:.2},{y:.2}L{:.2},{y:.2}M{x:.2},{:.2}L{x:.2},{:.2}" stroke="green" stroke-width="2"/>"#,
                x - 6.0,
                x + 6.0,
                y - 6.0,
                y + 6.0
            );
        }
    }
}

/// Renders the sweep. Rows without a weight fraction (Max matched nothing)
/// are drawn at 0.
pub fn sweep_svg(rows: &[SweepRow], title: &str) -> String {
    let top = rows
        .iter()
        .filter_map(|r| r.weight_fraction_of_max)
        .fold(1.0f64, f64::max);
    let frame = Frame {
        y_max: (top * 10.0).ceil() / 10.0,
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );

    // Axes with ticks every 0.2 on x and 0.1 of the y range.
    let (x0, x1) = (frame.x(0.0), frame.x(1.0));
    let (y0, y1) = (frame.y(0.0), frame.y(frame.y_max));
    let _ = writeln!(out, r#"<path d="M{x0:.2},{y1:.2}L{x0:.2},{y0:.2}L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let g = i as f64 / 5.0;
        let x = frame.x(g);
        let _ = writeln!(out, r#"<path d="M{x:.2},{y0:.2}L{x:.2},{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{g:.1}</text>"#, y0 + 20.0);
    }
    for i in 0..=10 {
        let f = frame.y_max * i as f64 / 10.0;
        let y = frame.y(f);
        let _ = writeln!(out, r#"<path d="M{:.2},{y:.2}L{x0:.2},{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{f:.2}</text>"#, x0 - 8.0, y + 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Gamma (empirical)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">fraction of Max weight</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    for r in rows {
        let (x, y) = (frame.x(r.gamma_empirical), frame.y(r.weight_fraction_of_max.unwrap_or(0.0)));
        marker(&mut out, &r.policy, x, y);
        if let Some(g) = r.gamma_param {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="9" fill="green">{g}</text>"#,
                x + 6.0,
                y - 6.0
            );
        }
    }

    let mut seen: Vec<&str> = Vec::new();
    for r in rows {
        if !seen.contains(&r.policy.as_str()) {
            seen.push(&r.policy);
        }
    }
    let lx = x1 + 25.0;
    for (i, p) in seen.iter().enumerate() {
        let ly = TOP + 20.0 + 22.0 * i as f64;
        marker(&mut out, p, lx, ly);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 14.0, ly + 4.0, escape(p));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(policy: &str, gamma_param: Option<f64>, g: f64, f: f64) -> SweepRow {
        SweepRow {
            policy: policy.into(),
            gamma_param,
            total_weight: f,
            weight_fraction_of_max: Some(f),
            gamma_empirical: g,
            min_normalized: 0.0,
            max_normalized: 1.0,
            lp_bound: None,
        }
    }

    #[test]
    fn one_marker_per_row_and_legend() {
        let rows = vec![
            row("max", None, 0.0, 1.0),
            row("rand", None, 1.0, 0.7),
            row("adaptmatch", Some(0.5), 0.6, 0.9),
            row("adaptmatch", Some(1.0), 0.95, 0.8),
        ];
        let svg = sweep_svg(&rows, "a <city>");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt;city&gt;"));
        // 1 Max circle in the plot + 1 in the legend.
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches(r#"stroke="green""#).count(), 3);
        assert!(svg.contains(">adaptmatch</text>"));
    }
}
