//! Barcode plots as standalone SVG. Bars are drawn in loss coordinates on a
//! shared linear axis; the essential bar runs off the right edge with an
//! arrowhead.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const LEFT: f64 = 40.0;
const RIGHT: f64 = 60.0;
const BAR_HEIGHT: f64 = 8.0;
const BAR_GAP: f64 = 6.0;
const PANEL_HEADER: f64 = 22.0;
const AXIS_HEIGHT: f64 = 44.0;
const MIN_LABEL_GAP: f64 = 44.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub birth: f64,
    /// `f64::INFINITY` for an essential class.
    pub death: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub bars: Vec<Bar>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Renders `panels` stacked top to bottom over one shared loss axis.
pub fn render(title: &str, panels: &[Panel]) -> String {
    let finite: Vec<f64> = panels
        .iter()
        .flat_map(|p| p.bars.iter())
        .flat_map(|b| [b.birth, b.death])
        .filter(|v| v.is_finite())
        .collect();
    let mut lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let plot_right = WIDTH - RIGHT;
    let x = |v: f64| LEFT + (v - lo) / (hi - lo) * (plot_right - LEFT);

    let body_height: f64 = panels
        .iter()
        .map(|p| PANEL_HEADER + p.bars.len() as f64 * (BAR_HEIGHT + BAR_GAP) + BAR_GAP)
        .sum();
    let height = 30.0 + body_height + AXIS_HEIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    svg.push_str(
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#b2182b"/></marker></defs>
"##,
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, escape(title));

    let mut y = 30.0;
    for panel in panels {
        let _ = writeln!(svg, r#"<text x="{LEFT}" y="{:.1}" fill="dimgray">{}</text>"#, y + 14.0, escape(&panel.title));
        y += PANEL_HEADER;
        let mut bars = panel.bars.clone();
        bars.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
        for bar in bars {
            let cy = y + BAR_HEIGHT / 2.0;
            let x0 = x(bar.birth);
            if bar.death.is_finite() {
                let w = (x(bar.death) - x0).max(1.0);
                let _ = writeln!(
                    svg,
                    r##"<rect class="bar" x="{x0:.2}" y="{y:.2}" width="{w:.2}" height="{BAR_HEIGHT}" fill="#2166ac"/>"##
                );
            } else {
                let _ = writeln!(
                    svg,
                    r##"<line class="bar essential" x1="{x0:.2}" y1="{cy:.2}" x2="{:.2}" y2="{cy:.2}" stroke="#b2182b" stroke-width="{BAR_HEIGHT}" marker-end="url(#arrow)"/>"##,
                    WIDTH - RIGHT / 2.0
                );
            }
            y += BAR_HEIGHT + BAR_GAP;
        }
        y += BAR_GAP;
    }

    let axis_y = y + 4.0;
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{axis_y:.2}" x2="{plot_right}" y2="{axis_y:.2}" stroke="black"/>"#);
    let mut ticks = finite;
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    let mut last_label = f64::NEG_INFINITY;
    for t in ticks {
        let tx = x(t);
        let _ = writeln!(
            svg,
            r#"<line class="tick" x1="{tx:.2}" y1="{axis_y:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/>"#,
            axis_y + 5.0
        );
        if tx - last_label >= MIN_LABEL_GAP {
            let _ = writeln!(
                svg,
                r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                axis_y + 18.0,
                tick_label(t)
            );
            last_label = tx;
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.2}" text-anchor="middle" fill="dimgray">loss</text>"#,
        (LEFT + plot_right) / 2.0,
        axis_y + 36.0
    );
    svg.push_str("</svg>\n");
    svg
}
