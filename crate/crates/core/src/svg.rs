//! SVG scatter and box plots of comparison scores.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fileio;

const W: f64 = 480.0;
const H: f64 = 480.0;
const M: f64 = 50.0;

/// Counts of points relative to the threshold on both axes. A point is
/// "above" only when strictly greater than the threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuadrantCounts {
    pub top_right: usize,
    pub top_left: usize,
    pub bottom_left: usize,
    pub bottom_right: usize,
}

impl QuadrantCounts {
    pub fn total(&self) -> usize {
        self.top_right + self.top_left + self.bottom_left + self.bottom_right
    }
}

/// `(S1, S2)` points with the verification threshold drawn on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterReport {
    pub points: Vec<(f64, f64)>,
    pub tau: f64,
    pub quadrants: QuadrantCounts,
    pub title: String,
}

impl ScatterReport {
    pub fn new(points: Vec<(f64, f64)>, tau: f64, title: &str) -> Self {
        let mut q = QuadrantCounts::default();
        for &(x, y) in &points {
            match (x > tau, y > tau) {
                (true, true) => q.top_right += 1,
                (false, true) => q.top_left += 1,
                (false, false) => q.bottom_left += 1,
                (true, false) => q.bottom_right += 1,
            }
        }
        Self {
            points,
            tau,
            quadrants: q,
            title: title.to_string(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps `[lo, hi]` onto a pixel span, padding a degenerate range.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, from: f64, to: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
        lo -= pad;
        hi += pad;
        Self { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        W / 2.0,
        escape(title)
    );
}

fn axes_frame(out: &mut String, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        "<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
        W / 2.0,
        H - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn tick_labels(out: &mut String, axis: &Axis, horizontal: bool) {
    for i in 0..=4 {
        let v = axis.lo + (axis.hi - axis.lo) * i as f64 / 4.0;
        let p = axis.map(v);
        if horizontal {
            let _ = writeln!(out, "<text x=\"{p:.2}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{v:.3}</text>", H - M + 14.0);
        } else {
            let _ = writeln!(out, "<text x=\"{}\" y=\"{p:.2}\" text-anchor=\"end\" font-size=\"10\">{v:.3}</text>", M - 4.0);
        }
    }
}

/// Renders the scatter plot as SVG text.
pub fn scatter_svg(report: &ScatterReport) -> Result<String> {
    if report.points.is_empty() {
        return Err(Error::Contract("scatter plot needs at least one point".into()));
    }
    let xs = report.points.iter().map(|p| p.0).chain([report.tau]);
    let ys = report.points.iter().map(|p| p.1).chain([report.tau]);
    let ax = Axis::new(xs, M, W - M);
    let ay = Axis::new(ys, H - M, M);
    let mut out = String::new();
    header(&mut out, &report.title);
    axes_frame(&mut out, "score subject 1", "score subject 2");
    tick_labels(&mut out, &ax, true);
    tick_labels(&mut out, &ay, false);
    let (tx, ty) = (ax.map(report.tau), ay.map(report.tau));
    let _ = writeln!(
        out,
        "<line class=\"threshold\" x1=\"{tx:.2}\" y1=\"{M}\" x2=\"{tx:.2}\" y2=\"{}\" stroke=\"red\" stroke-dasharray=\"4 3\"/>",
        H - M
    );
    let _ = writeln!(
        out,
        "<line class=\"threshold\" x1=\"{M}\" y1=\"{ty:.2}\" x2=\"{}\" y2=\"{ty:.2}\" stroke=\"red\" stroke-dasharray=\"4 3\"/>",
        W - M
    );
    for &(x, y) in &report.points {
        let _ = writeln!(
            out,
            "<circle class=\"point\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.7\"/>",
            ax.map(x),
            ay.map(y)
        );
    }
    let q = &report.quadrants;
    let n = q.total();
    let legend = [
        ("top-right", q.top_right, W - M - 4.0, M + 14.0, "end"),
        ("top-left", q.top_left, M + 4.0, M + 14.0, "start"),
        ("bottom-left", q.bottom_left, M + 4.0, H - M - 6.0, "start"),
        ("bottom-right", q.bottom_right, W - M - 4.0, H - M - 6.0, "end"),
    ];
    for (name, count, x, y, anchor) in legend {
        let _ = writeln!(
            out,
            "<text class=\"legend\" data-quadrant=\"{name}\" x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-size=\"12\">{count}/{n}</text>"
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_scatter_svg(report: &ScatterReport, path: &Path) -> Result<()> {
    fileio::write_atomic(path, scatter_svg(report)?.as_bytes())
}

/// Five-number summary of one group with Tukey whiskers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub label: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Most extreme data values within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Linearly interpolated quantile of sorted data: position `p * (n - 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn box_stats(label: &str, values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::Contract(format!("box plot group `{label}` is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract(format!("box plot group `{label}` has non-finite values")));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s.iter().copied().filter(|v| (lo..=hi).contains(v)).collect();
    Ok(BoxStats {
        label: label.to_string(),
        q1,
        median,
        q3,
        whisker_low: inside[0],
        whisker_high: inside[inside.len() - 1],
        outliers: s.into_iter().filter(|v| !(lo..=hi).contains(v)).collect(),
    })
}

/// Renders one vertical box per group, left to right.
pub fn box_svg(groups: &[(String, Vec<f64>)], title: &str) -> Result<String> {
    if groups.is_empty() {
        return Err(Error::Contract("box plot needs at least one group".into()));
    }
    let stats = groups.iter().map(|(l, v)| box_stats(l, v)).collect::<Result<Vec<_>>>()?;
    let ay = Axis::new(groups.iter().flat_map(|(_, v)| v.iter().copied()), H - M, M);
    let mut out = String::new();
    header(&mut out, title);
    axes_frame(&mut out, "", "score");
    tick_labels(&mut out, &ay, false);
    let slot = (W - 2.0 * M) / stats.len() as f64;
    let half = (slot * 0.3).min(40.0);
    for (i, b) in stats.iter().enumerate() {
        let cx = M + slot * (i as f64 + 0.5);
        let (y1, ym, y3) = (ay.map(b.q1), ay.map(b.median), ay.map(b.q3));
        let (wl, wh) = (ay.map(b.whisker_low), ay.map(b.whisker_high));
        let _ = writeln!(out, "<g class=\"box\" data-label=\"{}\">", escape(&b.label));
        let _ = writeln!(out, "<line x1=\"{cx:.2}\" y1=\"{wh:.2}\" x2=\"{cx:.2}\" y2=\"{y3:.2}\" stroke=\"black\"/>");
        let _ = writeln!(out, "<line x1=\"{cx:.2}\" y1=\"{y1:.2}\" x2=\"{cx:.2}\" y2=\"{wl:.2}\" stroke=\"black\"/>");
        for w in [wl, wh] {
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{w:.2}\" x2=\"{:.2}\" y2=\"{w:.2}\" stroke=\"black\"/>",
                cx - half / 2.0,
                cx + half / 2.0
            );
        }
        let _ = writeln!(
            out,
            "<rect class=\"iqr\" x=\"{:.2}\" y=\"{y3:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"lightsteelblue\" stroke=\"black\"/>",
            cx - half,
            2.0 * half,
            y1 - y3
        );
        let _ = writeln!(
            out,
            "<line class=\"median\" x1=\"{:.2}\" y1=\"{ym:.2}\" x2=\"{:.2}\" y2=\"{ym:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
            cx - half,
            cx + half
        );
        for &o in &b.outliers {
            let _ = writeln!(out, "<circle class=\"outlier\" cx=\"{cx:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>", ay.map(o));
        }
        let _ = writeln!(
            out,
            "<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
            H - M + 28.0,
            escape(&b.label)
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_box_svg(groups: &[(String, Vec<f64>)], title: &str, path: &Path) -> Result<()> {
    fileio::write_atomic(path, box_svg(groups, title)?.as_bytes())
}
