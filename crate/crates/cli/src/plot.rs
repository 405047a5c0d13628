//! Minimal SVG figures: histograms, line plots and heatmaps.

use std::fmt::Write as _;

use jjbarrier::stats::Histogram;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    svg: String,
}

impl Frame {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let mut f = Self {
            x: pad(x),
            y: pad(y),
            svg: String::new(),
        };
        let _ = writeln!(
            f.svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(f.svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            f.svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let _ = writeln!(
            f.svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            f.svg,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            escape(ylabel)
        );
        f.axes();
        f
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&mut self) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(
            self.svg,
            r#"<path d="M{x0} {y0} V{y1} H{x1}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (tx, ty) = (self.px(xv), self.py(yv));
            let _ = writeln!(
                self.svg,
                r#"<line x1="{tx:.1}" y1="{y1}" x2="{tx:.1}" y2="{}" stroke="black"/><text x="{tx:.1}" y="{}" text-anchor="middle">{}</text>"#,
                y1 + 4.0,
                y1 + 18.0,
                tick(xv)
            );
            let _ = writeln!(
                self.svg,
                r#"<line x1="{}" y1="{ty:.1}" x2="{x0}" y2="{ty:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                x0 - 6.0,
                ty + 4.0,
                tick(yv)
            );
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub fn histogram(title: &str, xlabel: &str, hist: &Histogram) -> String {
    let xmin = hist.edges[0];
    let xmax = *hist.edges.last().unwrap();
    let ymax = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut f = Frame::new(title, xlabel, "count", (xmin, xmax), (0.0, ymax));
    for (i, &c) in hist.counts.iter().enumerate() {
        let (a, b) = (f.px(hist.edges[i]), f.px(hist.edges[i + 1]));
        let top = f.py(c as f64);
        let _ = writeln!(
            f.svg,
            r##"<rect x="{a:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="#4c72b0" stroke="white"/>"##,
            (b - a).max(0.5),
            f.py(0.0) - top
        );
    }
    f.finish()
}

/// One polyline per series.
pub fn lines(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let pts = series
        .iter()
        .flat_map(|s| s.1.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut xr, mut yr) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for &(x, y) in pts {
        xr = (xr.0.min(x), xr.1.max(x));
        yr = (yr.0.min(y), yr.1.max(y));
    }
    if !xr.0.is_finite() {
        xr = (0.0, 1.0);
        yr = (0.0, 1.0);
    }
    let mut f = Frame::new(title, xlabel, ylabel, xr, yr);
    const COLOURS: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];
    for (i, (name, data)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let path: Vec<String> = data
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            f.svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            f.svg,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            LEFT + 10.0,
            TOP + 14.0 * (i + 1) as f64,
            escape(name)
        );
    }
    f.finish()
}

/// Cells `(x_index, y_index, value)` on an `nx × ny` lattice; NaN cells are grey.
pub fn heatmap(
    title: &str,
    xs: &[f64],
    ys: &[f64],
    xlabel: &str,
    ylabel: &str,
    cells: &[(usize, usize, f64)],
) -> String {
    let finite: Vec<f64> = cells.iter().map(|c| c.2).filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = |v: &[f64]| match v {
        [] => (0.0, 1.0),
        [a] => (a - 0.5, a + 0.5),
        _ => {
            let d = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
            (v[0] - d / 2.0, v[v.len() - 1] + d / 2.0)
        }
    };
    let (xr, yr) = (span(xs), span(ys));
    let mut f = Frame::new(title, xlabel, ylabel, xr, yr);
    let cw = (xr.1 - xr.0) / xs.len().max(1) as f64;
    let ch = (yr.1 - yr.0) / ys.len().max(1) as f64;
    for &(i, j, v) in cells {
        let colour = if v.is_finite() {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let r = (255.0 * t) as u8;
            let b = (255.0 * (1.0 - t)) as u8;
            format!("rgb({r},64,{b})")
        } else {
            "#bbbbbb".to_string()
        };
        let x0 = f.px(xr.0 + cw * i as f64);
        let x1 = f.px(xr.0 + cw * (i + 1) as f64);
        let y0 = f.py(yr.0 + ch * (j + 1) as f64);
        let y1 = f.py(yr.0 + ch * j as f64);
        let _ = writeln!(
            f.svg,
            r#"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="{colour}"/>"#,
            x1 - x0,
            y1 - y0
        );
    }
    if lo.is_finite() {
        let _ = writeln!(
            f.svg,
            r#"<text x="{}" y="{}" text-anchor="end">blue {} .. red {}</text>"#,
            W - RIGHT,
            TOP - 6.0,
            tick(lo),
            tick(hi)
        );
    }
    f.finish()
}
