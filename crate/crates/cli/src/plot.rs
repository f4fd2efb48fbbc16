//! Minimal built-in SVG line plots: axes, tick labels, one polyline per
//! series, and vertical three-standard-error bars. No external renderer.

use std::fmt::Write as _;

/// One plotted series: label plus (x, y, standard error) points. Points
/// with a non-finite y are skipped (they have no place on a linear axis).
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, Option<f64>)>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite: Vec<(usize, Vec<(f64, f64, Option<f64>)>)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pts: Vec<_> = s
                .points
                .iter()
                .copied()
                .filter(|(x, y, _)| x.is_finite() && y.is_finite())
                .collect();
            (i, pts)
        })
        .collect();

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (_, pts) in &finite {
        for &(x, y, se) in pts {
            xs.push(x);
            let bar = se.unwrap_or(0.0).abs() * 3.0;
            ys.push(y - bar);
            ys.push(y + bar);
        }
    }

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();

    if xs.is_empty() {
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">no finite data</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        )
        .unwrap();
        svg.push_str("</svg>\n");
        return svg;
    }

    let (x_min, x_max) = padded_bounds(&xs);
    let (y_min, y_max) = padded_bounds(&ys);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h;

    // Axes.
    writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        MARGIN_LEFT,
        MARGIN_TOP,
        MARGIN_LEFT,
        MARGIN_TOP + plot_h
    )
    .unwrap();

    // Ticks and grid.
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x_min + t * (x_max - x_min);
        let yv = y_min + t * (y_max - y_min);
        writeln!(
            svg,
            r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#,
            px(xv),
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 6.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            px(xv),
            MARGIN_TOP + plot_h + 20.0,
            tick_label(xv)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<line x1="{1}" y1="{0}" x2="{2}" y2="{0}" stroke="black"/>"#,
            py(yv),
            MARGIN_LEFT - 6.0,
            MARGIN_LEFT
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 10.0,
            py(yv) + 4.0,
            tick_label(yv)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    )
    .unwrap();

    // Series.
    for (idx, pts) in &finite {
        let color = PALETTE[idx % PALETTE.len()];
        if pts.len() > 1 {
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y, _)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            )
            .unwrap();
        }
        for &(x, y, se) in pts {
            if let Some(se) = se {
                let bar = 3.0 * se.abs();
                writeln!(
                    svg,
                    r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}"/>"#,
                    px(x),
                    py(y - bar),
                    py(y + bar)
                )
                .unwrap();
            }
            writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            )
            .unwrap();
        }
        let legend_y = MARGIN_TOP + 16.0 * *idx as f64;
        writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#,
            MARGIN_LEFT + plot_w + 12.0,
            legend_y
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            MARGIN_LEFT + plot_w + 27.0,
            legend_y + 9.0,
            escape(&series[*idx].label)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Expand degenerate ranges and add 5% breathing room.
fn padded_bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs();
    if (0.001..100_000.0).contains(&magnitude) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_axes_series_and_error_bars() {
        let series = vec![Series {
            label: "demo".into(),
            points: vec![(1.0, 0.1, Some(0.02)), (2.0, 0.3, Some(0.02)), (4.0, 0.4, None)],
        }];
        let svg = render_svg("title", "k", "objective", &series);
        assert!(svg.starts_with("<svg"), "document must open with an svg tag");
        assert!(svg.contains("polyline"), "line series missing");
        assert!(svg.contains("circle"), "point markers missing");
        assert!(svg.matches("<line").count() >= 3, "axes and error bars missing");
        assert!(svg.contains("demo"), "legend label missing");
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn skips_non_finite_points_without_panicking() {
        let series = vec![Series {
            label: "partial".into(),
            points: vec![(1.0, f64::NEG_INFINITY, None), (2.0, 1.0, None), (3.0, 2.0, None)],
        }];
        let svg = render_svg("t", "x", "y", &series);
        assert!(svg.contains("polyline"), "finite remainder still plots");
    }

    #[test]
    fn empty_input_yields_a_placeholder() {
        let svg = render_svg("t", "x", "y", &[]);
        assert!(svg.contains("no finite data"));
    }
}
