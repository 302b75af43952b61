//! Static SVG of speed, acceleration and angular-rate norms against time.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: &'a str,
    pub unit: &'a str,
    pub values: &'a [f64],
    /// Drawn as a dashed horizontal line.
    pub limit: f64,
}

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 180.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const GAP: f64 = 40.0;

/// Renders one panel per series sharing the time axis `t`.
pub fn profile_svg(t: &[f64], series: &[Series]) -> String {
    let height = MARGIN_TOP + series.len() as f64 * (PANEL_HEIGHT + GAP);
    let t_end = t.last().copied().unwrap_or(0.0).max(1e-9);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, s) in series.iter().enumerate() {
        let top = MARGIN_TOP + k as f64 * (PANEL_HEIGHT + GAP);
        let peak = s.values.iter().copied().fold(0.0, f64::max);
        let y_max = (peak.max(s.limit) * 1.1).max(1e-9);
        let x = |tv: f64| MARGIN_LEFT + tv / t_end * plot_w;
        let y = |v: f64| top + PANEL_HEIGHT * (1.0 - v / y_max);
        let _ = writeln!(
            out,
            r#"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="black"/>"#
        );
        for frac in [0.0, 0.5, 1.0] {
            let v = y_max * frac;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
                MARGIN_LEFT - 6.0,
                y(v) + 4.0,
                v
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">{} [{}]</text>"#,
            MARGIN_LEFT,
            top - 6.0,
            s.label,
            s.unit
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="red" stroke-dasharray="6,4"/>"#,
            x(0.0),
            y(s.limit),
            x(t_end),
            y(s.limit)
        );
        let mut pts = String::new();
        for (tv, v) in t.iter().zip(s.values) {
            let _ = write!(pts, "{:.2},{:.2} ", x(*tv), y(*v));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            pts.trim_end()
        );
    }
    let bottom = MARGIN_TOP + series.len() as f64 * (PANEL_HEIGHT + GAP) - GAP + 16.0;
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t [s] (0 to {:.3})</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        bottom,
        t_end
    );
    out.push_str("</svg>\n");
    out
}
