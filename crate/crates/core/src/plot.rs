//! Minimal deterministic SVG line, point and heat-map plots for quick
//! inspection of CLI results. CSV output stays authoritative.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Points,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Series {
            label: label.into(),
            points,
            style,
        }
    }
}

/// Values on a rectangular grid; `values[j * xs.len() + i]` belongs to `(xs[i], ys[j])`.
#[derive(Debug, Clone)]
pub struct Heatmap {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub heatmap: Option<Heatmap>,
}

fn finite(points: &[(f64, f64)]) -> impl Iterator<Item = (f64, f64)> + '_ {
    points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite())
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = 0.03 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - d, hi + d)
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut take = |x: f64, y: f64| {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        };
        for s in &self.series {
            finite(&s.points).for_each(|(x, y)| take(x, y));
        }
        if let Some(h) = &self.heatmap {
            for &x in &h.xs {
                for &y in &h.ys {
                    take(x, y);
                }
            }
        }
        (span(x0, x1), span(y0, y1))
    }

    /// Renders the plot. Output depends only on the data.
    pub fn to_svg(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

        if let Some(h) = &self.heatmap {
            let vmax = h.values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
            let (nx, ny) = (h.xs.len(), h.ys.len());
            if vmax > 0.0 && nx > 1 && ny > 1 {
                let cw = (sx(h.xs[1]) - sx(h.xs[0])).abs();
                let ch = (sy(h.ys[0]) - sy(h.ys[1])).abs();
                for j in 0..ny {
                    for i in 0..nx {
                        let v = h.values[j * nx + i] / vmax;
                        if !(v > 0.01) {
                            continue;
                        }
                        let shade = (255.0 * (1.0 - v)).round() as u8;
                        let _ = writeln!(
                            s,
                            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
                            sx(h.xs[i]) - cw / 2.0,
                            sy(h.ys[j]) - ch / 2.0,
                            cw,
                            ch
                        );
                    }
                }
            }
        }

        // axes box and ticks
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{b:.2}" x2="{px:.2}" y2="{b2:.2}" stroke="black"/><text x="{px:.2}" y="{t:.2}" text-anchor="middle">{}</text>"#,
                tick_label(xv),
                b = TOP + ph,
                b2 = TOP + ph + 5.0,
                t = TOP + ph + 18.0
            );
            let _ = writeln!(
                s,
                r#"<line x1="{l:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{t:.2}" y="{ty:.2}" text-anchor="end">{}</text>"#,
                tick_label(yv),
                l = LEFT - 5.0,
                t = LEFT - 8.0,
                ty = py + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, ser) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            match ser.style {
                Style::Line | Style::Dashed => {
                    let pts: Vec<String> = finite(&ser.points).map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    if pts.len() > 1 {
                        let dash = if ser.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                        let _ = writeln!(
                            s,
                            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                            pts.join(" ")
                        );
                    }
                }
                Style::Points => {
                    for (x, y) in finite(&ser.points) {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
                    }
                }
            }
            let ly = TOP + 12.0 + 16.0 * k as f64;
            let lx = LEFT + pw + 10.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 16.0,
                lx + 20.0,
                ly + 4.0,
                escape(&ser.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
