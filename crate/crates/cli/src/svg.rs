//! Minimal self-contained SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#7f7f7f", "#2ca02c"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Data-to-pixel mapping of the plot area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Frame { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

struct Doc(String);

impl Doc {
    fn new(title: &str) -> Self {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        Doc(s)
    }

    fn axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(self.0, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
        for t in ticks(f.x.0, f.x.1) {
            let x = f.px(t);
            let _ = writeln!(self.0, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y1 + 5.0);
            let _ = writeln!(self.0, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 18.0, label(t));
        }
        for t in ticks(f.y.0, f.y.1) {
            let y = f.py(t);
            let _ = writeln!(self.0, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
            let _ = writeln!(self.0, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, label(t));
        }
        let _ = writeln!(self.0, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(xlabel));
        let _ = writeln!(
            self.0,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
    }

    fn legend(&mut self, names: &[&str]) {
        for (i, name) in names.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * i as f64;
            let x = W - RIGHT - 110.0;
            let _ = writeln!(self.0, r#"<circle cx="{x}" cy="{}" r="4" fill="{}"/>"#, y - 4.0, PALETTE[i % PALETTE.len()]);
            let _ = writeln!(self.0, r#"<text x="{}" y="{y}">{}</text>"#, x + 10.0, escape(name));
        }
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

/// Points `(x, y, group)`; `labels` annotates each point when given.
pub fn scatter(title: &str, points: &[(f64, f64, usize)], groups: &[&str], labels: Option<&[String]>) -> String {
    let f = Frame::new(
        padded(bounds(points.iter().map(|p| p.0))),
        padded(bounds(points.iter().map(|p| p.1))),
    );
    let mut doc = Doc::new(title);
    doc.axes(&f, "PC1", "PC2");
    for (i, &(x, y, g)) in points.iter().enumerate() {
        let (cx, cy) = (f.px(x), f.py(y));
        let _ = writeln!(doc.0, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}" fill-opacity="0.6"/>"#, PALETTE[g % PALETTE.len()]);
        if let Some(name) = labels.and_then(|l| l.get(i)) {
            let _ = writeln!(doc.0, r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#, cx + 5.0, cy - 5.0, escape(name));
        }
    }
    let present: Vec<&str> = groups
        .iter()
        .enumerate()
        .filter(|(i, _)| points.iter().any(|p| p.2 == *i))
        .map(|(_, g)| *g)
        .collect();
    if present.len() > 1 {
        doc.legend(groups);
    }
    doc.finish()
}

/// Bars of per-component variance fractions with the cumulative curve.
pub fn scree(title: &str, fractions: &[f64]) -> String {
    let n = fractions.len().max(1) as f64;
    let f = Frame::new((0.5, n + 0.5), (0.0, 1.0));
    let mut doc = Doc::new(title);
    doc.axes(&f, "component", "fraction of variance");
    let bar = (f.px(1.0) - f.px(0.0)) * 0.8;
    let mut cumulative = 0.0;
    let mut line = String::new();
    for (i, &v) in fractions.iter().enumerate() {
        let x = (i + 1) as f64;
        let _ = writeln!(
            doc.0,
            r#"<rect x="{:.2}" y="{:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
            f.px(x) - bar / 2.0,
            f.py(v),
            f.py(0.0) - f.py(v),
            PALETTE[0]
        );
        cumulative += v;
        let _ = write!(line, "{:.2},{:.2} ", f.px(x), f.py(cumulative));
    }
    let _ = writeln!(doc.0, r#"<polyline points="{}" fill="none" stroke="{}"/>"#, line.trim_end(), PALETTE[1]);
    doc.finish()
}

/// Histogram of `log10 λ` from natural-log scores, with ±∞ in end bins and
/// the λ = 1 reference line.
pub fn log_lambda_histogram(title: &str, log_lambda: &[f64]) -> String {
    const BINS: usize = 40;
    let values: Vec<f64> = log_lambda.iter().filter(|v| v.is_finite()).map(|v| v / std::f64::consts::LN_10).collect();
    let neg = log_lambda.iter().filter(|&&v| v == f64::NEG_INFINITY).count();
    let pos = log_lambda.iter().filter(|&&v| v == f64::INFINITY).count();
    let (lo, hi) = bounds(values.iter().copied().chain([0.0]));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    let width = (hi - lo) / BINS as f64;
    let mut counts = vec![0usize; BINS];
    for v in &values {
        counts[(((v - lo) / width) as usize).min(BINS - 1)] += 1;
    }
    // Infinite scores go in one extra bin on each side.
    let x_range = (lo - 2.0 * width, hi + 2.0 * width);
    let top = counts.iter().chain([&neg, &pos]).copied().max().unwrap_or(0).max(1) as f64;
    let f = Frame::new(x_range, (0.0, top * 1.05));
    let mut doc = Doc::new(title);
    doc.axes(&f, "log10 λ (end bins: λ = 0 and λ = ∞)", "files");
    let bar = |doc: &mut Doc, x0: f64, x1: f64, c: usize, color: &str| {
        if c > 0 {
            let _ = writeln!(
                doc.0,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                f.px(x0),
                f.py(c as f64),
                f.px(x1) - f.px(x0),
                f.py(0.0) - f.py(c as f64)
            );
        }
    };
    for (i, &c) in counts.iter().enumerate() {
        let x0 = lo + i as f64 * width;
        bar(&mut doc, x0, x0 + width, c, PALETTE[0]);
    }
    bar(&mut doc, lo - 2.0 * width, lo - width, neg, PALETTE[2]);
    bar(&mut doc, hi + width, hi + 2.0 * width, pos, PALETTE[1]);
    let x = f.px(0.0);
    let _ = writeln!(
        doc.0,
        r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="black" stroke-dasharray="4 3"/>"#,
        H - BOTTOM
    );
    let _ = writeln!(doc.0, r#"<text x="{:.2}" y="{}">λ = 1</text>"#, x + 4.0, TOP + 14.0);
    doc.finish()
}

/// ROC polyline over `(p_fa, p_d)` with the chance diagonal.
pub fn roc_plot(title: &str, points: &[(f64, f64)]) -> String {
    let f = Frame::new((0.0, 1.0), (0.0, 1.0));
    let mut doc = Doc::new(title);
    doc.axes(&f, "probability of false alarm", "probability of detection");
    let _ = writeln!(
        doc.0,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="4 3"/>"#,
        f.px(0.0),
        f.py(0.0),
        f.px(1.0),
        f.py(1.0),
        PALETTE[2]
    );
    let line: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
    let _ = writeln!(doc.0, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#, line.join(" "), PALETTE[0]);
    doc.finish()
}

fn diverging(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("rgb({},{},{})", r.round(), g.round(), b.round())
}

/// Square matrix in `[-1, 1]` drawn blue (−1) through white to red (+1).
pub fn heatmap(title: &str, names: &[String], matrix: &[Vec<f64>]) -> String {
    let n = names.len().max(1) as f64;
    let label_w = 150.0;
    let side = (W.min(H) - TOP - 20.0).min(H - TOP - label_w * 0.5);
    let cell = side / n;
    let (x0, y0) = (label_w, TOP);
    let mut doc = Doc::new(title);
    for (i, row) in matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let _ = writeln!(
                doc.0,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}"><title>{} / {}: {}</title></rect>"#,
                x0 + j as f64 * cell,
                y0 + i as f64 * cell,
                diverging(v),
                escape(&names[i]),
                escape(&names[j]),
                label(v)
            );
        }
    }
    let font = (cell * 0.8).clamp(4.0, 12.0);
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(
            doc.0,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="{font:.1}">{}</text>"#,
            x0 - 4.0,
            y0 + (i as f64 + 0.7) * cell,
            escape(name)
        );
    }
    for (k, v) in [(0.0, -1.0), (0.5, 0.0), (1.0, 1.0)] {
        let y = y0 + k * side;
        let x = x0 + side + 20.0;
        let _ = writeln!(doc.0, r#"<rect x="{x:.2}" y="{:.2}" width="14" height="14" fill="{}" stroke="black"/>"#, y - 7.0, diverging(v));
        let _ = writeln!(doc.0, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 18.0, y + 4.0, label(v));
    }
    doc.finish()
}
