//! Minimal SVG line plots: polylines with axes, tick labels, and a legend.

use std::fmt::Write;

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Series<'a> {
    pub label: String,
    pub values: &'a [f64],
}

/// Render labeled series over a common time axis.
pub fn line_plot(times: &[f64], series: &[Series<'_>], x_label: &str, y_label: &str) -> String {
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_max = times.last().copied().unwrap_or(1.0).max(1e-12);
    let mut y_min = 0.0_f64;
    let mut y_max = f64::MIN;
    for s in series {
        for &v in s.values {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if !y_max.is_finite() || y_max <= y_min {
        y_max = y_min + 1.0;
    }
    y_max *= 1.05;

    let x_of = |t: f64| MARGIN_L + plot_w * t / x_max;
    let y_of = |v: f64| MARGIN_T + plot_h * (1.0 - (v - y_min) / (y_max - y_min));

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    // Axes.
    let x0 = MARGIN_L;
    let y0 = MARGIN_T + plot_h;
    let _ = write!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        MARGIN_L + plot_w
    );
    let _ = write!(
        svg,
        r#"<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>"#
    );

    // Ticks.
    for k in 0..=5 {
        let t = x_max * k as f64 / 5.0;
        let x = x_of(t);
        let _ = write!(
            svg,
            r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = write!(
            svg,
            r#"<text x="{x}" y="{}" text-anchor="middle">{t:.0}</text>"#,
            y0 + 20.0
        );
        let v = y_min + (y_max - y_min) * k as f64 / 5.0;
        let y = y_of(v);
        let _ = write!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = write!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );

    // Curves and legend.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut points = String::new();
        for (&t, &v) in times.iter().zip(s.values) {
            let _ = write!(points, "{:.2},{:.2} ", x_of(t), y_of(v));
        }
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.trim_end()
        );
        let ly = MARGIN_T + 18.0 * si as f64 + 10.0;
        let lx = MARGIN_L + plot_w + 12.0;
        let _ = write!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_basic_structure() {
        let times = [0.0, 1.0, 2.0];
        let a = [0.0, 0.5, 0.2];
        let b = [0.1, 0.1, 0.4];
        let svg = line_plot(
            &times,
            &[
                Series {
                    label: "E".into(),
                    values: &a,
                },
                Series {
                    label: "trace".into(),
                    values: &b,
                },
            ],
            "t (fs)",
            "value",
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("E</text>"));
        assert!(svg.contains("trace</text>"));
    }
}
