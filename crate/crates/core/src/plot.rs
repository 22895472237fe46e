//! Minimal deterministic SVG charts: bars, lines, scatter, parallel
//! coordinates and heatmaps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Escapes text for element content and attribute values.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2}")
    } else {
        "0".into()
    }
}

fn label(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e4) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Linear map from a data range onto a pixel range; degenerate ranges are
/// widened so every point stays inside the plot.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(values: impl IntoIterator<Item = f64>, from: f64, to: f64) -> Self {
        let (mut lo, mut hi) = values
            .into_iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Scale { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
            w = WIDTH,
            h = HEIGHT
        );
        body.push('\n');
        let _ = writeln!(body, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            body,
            r#"<text class="title" x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            num(WIDTH / 2.0),
            escape(title)
        );
        Canvas { body }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" text-anchor="{anchor}">{}</text>"#,
            num(x),
            num(y),
            escape(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}"/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2)
        );
    }

    fn axes(&mut self, xs: Scale, ys: Scale, x_label: &str, y_label: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        self.line(x0, y0, x1, y0, "black");
        self.line(x0, y0, x0, y1, "black");
        for k in 0..=4 {
            let t = f64::from(k) / 4.0;
            let xv = xs.lo + t * (xs.hi - xs.lo);
            let yv = ys.lo + t * (ys.hi - ys.lo);
            let px = xs.map(xv);
            let py = ys.map(yv);
            self.line(px, y0, px, y0 + 4.0, "black");
            self.text(px, y0 + 16.0, "middle", &label(xv));
            self.line(x0 - 4.0, py, x0, py, "black");
            self.text(x0 - 6.0, py + 4.0, "end", &label(yv));
        }
        self.text((x0 + x1) / 2.0, HEIGHT - 15.0, "middle", x_label);
        let _ = writeln!(
            self.body,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            num((y0 + y1) / 2.0),
            num((y0 + y1) / 2.0),
            escape(y_label)
        );
    }

    fn legend(&mut self, names: &[&str]) {
        if names.len() < 2 {
            return;
        }
        for (k, name) in names.iter().enumerate() {
            let y = TOP + 14.0 * k as f64;
            let color = PALETTE[k % PALETTE.len()];
            let _ = writeln!(
                self.body,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#,
                num(WIDTH - RIGHT - 120.0),
                num(y - 9.0)
            );
            self.text(WIDTH - RIGHT - 106.0, y, "start", name);
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Horizontal bars, one per label, drawn in the given order from the top.
pub fn bar_chart(title: &str, value_label: &str, labels: &[String], values: &[f64]) -> String {
    let mut c = Canvas::new(title);
    let n = labels.len().min(values.len());
    let left = 150.0;
    let xs = Scale::new(values.iter().copied().chain([0.0]), left, WIDTH - RIGHT);
    let slot = (HEIGHT - TOP - BOTTOM) / n.max(1) as f64;
    let zero = xs.map(0.0);
    for i in 0..n {
        let v = values[i];
        let x = xs.map(v);
        let y = TOP + slot * i as f64;
        let color = if v >= 0.0 { PALETTE[0] } else { PALETTE[3] };
        let _ = writeln!(
            c.body,
            r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{color}"><title>{}: {}</title></rect>"#,
            num(x.min(zero)),
            num(y + slot * 0.1),
            num((x - zero).abs()),
            num(slot * 0.8),
            escape(&labels[i]),
            label(v)
        );
        c.text(left - 6.0, y + slot * 0.5 + 4.0, "end", &labels[i]);
    }
    let y0 = HEIGHT - BOTTOM;
    c.line(zero, TOP, zero, y0, "black");
    c.line(left, y0, WIDTH - RIGHT, y0, "black");
    for k in 0..=4 {
        let v = xs.lo + f64::from(k) / 4.0 * (xs.hi - xs.lo);
        c.text(xs.map(v), y0 + 16.0, "middle", &label(v));
    }
    c.text((left + WIDTH - RIGHT) / 2.0, HEIGHT - 15.0, "middle", value_label);
    c.finish()
}

/// A named line series.
pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut c = Canvas::new(title);
    let xs = Scale::new(series.iter().flat_map(|s| s.x.iter().copied()), LEFT, WIDTH - RIGHT);
    let ys = Scale::new(series.iter().flat_map(|s| s.y.iter().copied()), HEIGHT - BOTTOM, TOP);
    c.axes(xs, ys, x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(s.y)
            .map(|(&x, &y)| format!("{},{}", num(xs.map(x)), num(ys.map(y))))
            .collect();
        let _ = writeln!(
            c.body,
            r#"<polyline class="series" fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            PALETTE[k % PALETTE.len()],
            pts.join(" "),
            escape(s.name)
        );
    }
    c.legend(&series.iter().map(|s| s.name).collect::<Vec<_>>());
    c.finish()
}

/// Named point groups, e.g. train and test residuals.
pub fn scatter(title: &str, x_label: &str, y_label: &str, groups: &[(&str, &[(f64, f64)])]) -> String {
    let mut c = Canvas::new(title);
    let xs = Scale::new(groups.iter().flat_map(|g| g.1.iter().map(|p| p.0)), LEFT, WIDTH - RIGHT);
    let ys = Scale::new(
        groups.iter().flat_map(|g| g.1.iter().map(|p| p.1)).chain([0.0]),
        HEIGHT - BOTTOM,
        TOP,
    );
    c.axes(xs, ys, x_label, y_label);
    c.line(LEFT, ys.map(0.0), WIDTH - RIGHT, ys.map(0.0), "#999999");
    for (k, (_, points)) in groups.iter().enumerate() {
        for &(x, y) in points.iter() {
            let _ = writeln!(
                c.body,
                r#"<circle class="point" cx="{}" cy="{}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
                num(xs.map(x)),
                num(ys.map(y)),
                PALETTE[k % PALETTE.len()]
            );
        }
    }
    c.legend(&groups.iter().map(|g| g.0).collect::<Vec<_>>());
    c.finish()
}

/// One vertical axis per entry of `axes` (shared vertical scale) and one
/// polyline per row of `lines`.
pub fn parallel_coordinates(title: &str, axes: &[String], lines: &[Vec<f64>], y_label: &str) -> String {
    let mut c = Canvas::new(title);
    let ys = Scale::new(lines.iter().flatten().copied(), HEIGHT - BOTTOM, TOP);
    let n = axes.len().max(2);
    let step = (WIDTH - LEFT - RIGHT) / (n - 1) as f64;
    let ax = |j: usize| LEFT + step * j as f64;
    for (j, name) in axes.iter().enumerate() {
        c.line(ax(j), TOP, ax(j), HEIGHT - BOTTOM, "#888888");
        c.text(ax(j), HEIGHT - BOTTOM + 14.0 + 10.0 * (j % 2) as f64, "middle", name);
    }
    for k in 0..=4 {
        let v = ys.lo + f64::from(k) / 4.0 * (ys.hi - ys.lo);
        c.text(LEFT - 6.0, ys.map(v) + 4.0, "end", &label(v));
    }
    c.text(WIDTH / 2.0, HEIGHT - 8.0, "middle", y_label);
    for (k, line) in lines.iter().enumerate() {
        let pts: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(j, &v)| format!("{},{}", num(ax(j)), num(ys.map(v))))
            .collect();
        let _ = writeln!(
            c.body,
            r#"<polyline class="line" fill="none" stroke="{}" stroke-opacity="0.6" points="{}"/>"#,
            PALETTE[k % PALETTE.len()],
            pts.join(" ")
        );
    }
    c.finish()
}

/// Square matrix heatmap on a blue-white-red scale over [-1, 1].
pub fn heatmap(title: &str, names: &[String], values: &[Vec<f64>]) -> String {
    let mut c = Canvas::new(title);
    let n = names.len().max(1);
    let left = 110.0;
    let size = ((HEIGHT - TOP - BOTTOM).min(WIDTH - left - RIGHT)) / n as f64;
    for (i, row) in values.iter().enumerate() {
        c.text(left - 4.0, TOP + size * (i as f64 + 0.5) + 3.0, "end", &names[i]);
        for (j, &v) in row.iter().enumerate() {
            let t = if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
            let (r, g, b) = if t >= 0.0 {
                (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
            } else {
                (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
            };
            let _ = writeln!(
                c.body,
                r#"<rect class="cell" x="{}" y="{}" width="{}" height="{}" fill="rgb({},{},{})"><title>{} / {}: {}</title></rect>"#,
                num(left + size * j as f64),
                num(TOP + size * i as f64),
                num(size),
                num(size),
                r.round(),
                g.round(),
                b.round(),
                escape(&names[i]),
                escape(&names[j]),
                label(v)
            );
        }
    }
    c.finish()
}
