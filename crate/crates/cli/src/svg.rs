//! Minimal static SVG output: box plots and labelled scatter plots.
//!
//! Coordinates are printed with two decimals and nothing depends on time or
//! environment, so equal inputs give byte-identical files.

use std::fmt::Write as _;

use hdclass_core::stats::BoxStats;

const PALETTE: [&str; 8] = [
    "#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6c4f9c", "#00798c", "#8c564b", "#505050",
];

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;
const HEIGHT: f64 = 360.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from a data interval onto a pixel interval.
struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(values: impl IntoIterator<Item = f64>, from: f64, to: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
        Self {
            lo: lo - pad,
            hi: hi + pad,
            from,
            to,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=4).map(move |i| self.lo + (self.hi - self.lo) * i as f64 / 4.0)
    }
}

fn open(out: &mut String, width: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{HEIGHT:.0}" viewBox="0 0 {width:.0} {HEIGHT:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{width:.0}" height="{HEIGHT:.0}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn y_axis(out: &mut String, y: &Axis, width: f64, label: &str) {
    let bottom = HEIGHT - MARGIN_BOTTOM;
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{MARGIN_TOP:.2}" x2="{MARGIN_LEFT:.2}" y2="{bottom:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/>"#,
        width - MARGIN_RIGHT
    );
    for t in y.ticks() {
        let py = y.map(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"#,
            MARGIN_LEFT - 4.0,
            MARGIN_LEFT - 6.0,
            py + 4.0
        );
    }
    let mid = (MARGIN_TOP + bottom) / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="14" y="{mid:.2}" text-anchor="middle" transform="rotate(-90 14 {mid:.2})">{}</text>"#,
        escape(label)
    );
}

/// One box per entry, whiskers included; `reference` draws a dashed
/// horizontal line (zero for RLE plots).
pub fn box_plot(title: &str, y_label: &str, names: &[String], stats: &[BoxStats], reference: Option<f64>) -> String {
    let slot = 14.0;
    let width = (MARGIN_LEFT + MARGIN_RIGHT + slot * stats.len() as f64).max(420.0);
    let plot_w = width - MARGIN_LEFT - MARGIN_RIGHT;
    let step = plot_w / stats.len().max(1) as f64;
    let y = Axis::new(
        stats.iter().flat_map(|b| [b.whisker_low, b.whisker_high]).chain(reference),
        HEIGHT - MARGIN_BOTTOM,
        MARGIN_TOP,
    );
    let mut out = String::new();
    open(&mut out, width, title);
    y_axis(&mut out, &y, width, y_label);
    if let Some(r) = reference {
        let py = y.map(r);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#888888" stroke-dasharray="4 3"/>"##,
            width - MARGIN_RIGHT
        );
    }
    for (i, b) in stats.iter().enumerate() {
        let cx = MARGIN_LEFT + step * (i as f64 + 0.5);
        let half = (step * 0.35).min(5.0);
        let (q1, q3, med) = (y.map(b.q1), y.map(b.q3), y.map(b.median));
        let (lo, hi) = (y.map(b.whisker_low), y.map(b.whisker_high));
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{q3:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="black"/>"#,
            cx - half,
            2.0 * half,
            (q1 - q3).max(0.0),
            PALETTE[0]
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{med:.2}" x2="{:.2}" y2="{med:.2}" stroke="white" stroke-width="1.5"/>"#,
            cx - half,
            cx + half
        );
    }
    if names.len() == stats.len() && stats.len() <= 40 {
        for (i, n) in names.iter().enumerate() {
            let cx = MARGIN_LEFT + step * (i as f64 + 0.5);
            let ty = HEIGHT - MARGIN_BOTTOM + 12.0;
            let _ = writeln!(
                out,
                r#"<text x="{cx:.2}" y="{ty:.2}" text-anchor="end" font-size="8" transform="rotate(-60 {cx:.2} {ty:.2})">{}</text>"#,
                escape(n)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Points coloured by group with a legend.
pub fn scatter(
    title: &str,
    axis_labels: (&str, &str),
    points: &[(f64, f64)],
    groups: &[usize],
    group_names: &[String],
) -> String {
    let width = 480.0;
    let x = Axis::new(points.iter().map(|p| p.0), MARGIN_LEFT, width - MARGIN_RIGHT - 90.0);
    let y = Axis::new(points.iter().map(|p| p.1), HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let mut out = String::new();
    open(&mut out, width, title);
    y_axis(&mut out, &y, width - 90.0, axis_labels.1);
    let bottom = HEIGHT - MARGIN_BOTTOM;
    for t in x.ticks() {
        let px = x.map(t);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{t:.2}</text>"#,
            bottom + 4.0,
            bottom + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (MARGIN_LEFT + width - MARGIN_RIGHT - 90.0) / 2.0,
        HEIGHT - 10.0,
        escape(axis_labels.0)
    );
    for (i, &(px, py)) in points.iter().enumerate() {
        let g = groups.get(i).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}" fill-opacity="0.85"/>"#,
            x.map(px),
            y.map(py),
            PALETTE[g % PALETTE.len()]
        );
    }
    for (g, name) in group_names.iter().enumerate() {
        let ly = MARGIN_TOP + 16.0 * g as f64;
        let lx = width - 96.0;
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{ly:.2}" r="4" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 8.0,
            PALETTE[g % PALETTE.len()],
            lx + 16.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(m: f64) -> BoxStats {
        BoxStats::from_values([m - 1.0, m - 0.5, m, m + 0.5, m + 1.0]).unwrap()
    }

    #[test]
    fn box_plot_has_one_box_per_entry() {
        let s = box_plot("t", "y", &["a".into(), "b".into()], &[stats(0.0), stats(1.0)], Some(0.0));
        assert_eq!(s.matches("<rect x=").count(), 2);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s, box_plot("t", "y", &["a".into(), "b".into()], &[stats(0.0), stats(1.0)], Some(0.0)));
    }

    #[test]
    fn scatter_escapes_text_and_colours_groups() {
        let s = scatter("a<b", ("x", "y"), &[(0.0, 0.0), (1.0, 2.0)], &[0, 1], &["n&m".into(), "t".into()]);
        assert!(s.contains("a&lt;b") && s.contains("n&amp;m"));
        assert!(s.contains(PALETTE[0]) && s.contains(PALETTE[1]));
    }

    #[test]
    fn degenerate_ranges_stay_finite() {
        let s = scatter("c", ("x", "y"), &[(1.0, 1.0)], &[0], &["only".into()]);
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }
}
