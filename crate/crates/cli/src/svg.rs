//! Deterministic SVG figures: line charts, class scatter plots and
//! confusion heatmaps. Coordinates are printed with fixed precision so equal
//! inputs give byte-equal files.

use std::fmt::Write;

use kspace_core::{ConfusionMatrix, DiagnosticClass, NUM_CLASSES};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 52.0;

/// Colors of the four classes, in class-code order.
pub const CLASS_COLORS: [&str; NUM_CLASSES] = ["#d62728", "#9467bd", "#2ca02c", "#1f77b4"];

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        escape(title)
    );
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x0 > x1 {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            (x0, x1) = (x0 - 0.5, x1 + 0.5);
        }
        if y1 - y0 < 1e-12 {
            (y0, y1) = (y0 - 0.5, y1 + 0.5);
        }
        Frame { x0, x1, y0, y1 }
    }

    fn pad(mut self, fraction: f64) -> Self {
        let (dx, dy) = ((self.x1 - self.x0) * fraction, (self.y1 - self.y0) * fraction);
        self.x0 -= dx;
        self.x1 += dx;
        self.y0 -= dy;
        self.y1 += dy;
        self
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str, ticks: bool) {
        let (left, right) = (MARGIN_L, WIDTH - MARGIN_R);
        let (top, bottom) = (MARGIN_T, HEIGHT - MARGIN_B);
        let _ = writeln!(
            out,
            "<rect x=\"{left:.1}\" y=\"{top:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>",
            right - left,
            bottom - top
        );
        if ticks {
            for i in 0..=4 {
                let f = i as f64 / 4.0;
                let xv = self.x0 + f * (self.x1 - self.x0);
                let yv = self.y0 + f * (self.y1 - self.y0);
                let (x, y) = (self.px(xv), self.py(yv));
                let _ = writeln!(
                    out,
                    "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                    bottom + 16.0,
                    tick_label(xv)
                );
                let _ = writeln!(
                    out,
                    "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                    left - 6.0,
                    y + 4.0,
                    tick_label(yv)
                );
            }
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            (left + right) / 2.0,
            HEIGHT - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
            (top + bottom) / 2.0,
            (top + bottom) / 2.0,
            escape(y_label)
        );
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn legend_entry(out: &mut String, index: usize, color: &str, name: &str) {
    let x = WIDTH - MARGIN_R + 14.0;
    let y = MARGIN_T + 8.0 + 20.0 * index as f64;
    let _ = writeln!(
        out,
        "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\
         <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
        y - 10.0,
        x + 18.0,
        y,
        escape(name)
    );
}

/// Line chart of one or more series sharing axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::new(series.iter().flat_map(|s| s.points.iter().copied())).pad(0.05);
    let mut out = String::new();
    header(&mut out, title);
    frame.axes(&mut out, x_label, y_label, true);
    for (i, s) in series.iter().enumerate() {
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{dash}/>",
            path.join(" "),
            s.color
        );
        legend_entry(&mut out, i, s.color, s.name);
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter plot with one circle per point, colored by class, and a legend
/// listing all four classes.
pub fn class_scatter(title: &str, coords: &[(f64, f64)], labels: &[DiagnosticClass]) -> String {
    let frame = Frame::new(coords.iter().copied()).pad(0.05);
    let mut out = String::new();
    header(&mut out, title);
    frame.axes(&mut out, "UMAP 1", "UMAP 2", false);
    for (&(x, y), label) in coords.iter().zip(labels) {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.8\"/>",
            frame.px(x),
            frame.py(y),
            CLASS_COLORS[label.code()]
        );
    }
    for class in DiagnosticClass::ALL {
        legend_entry(&mut out, class.code(), CLASS_COLORS[class.code()], class.name());
    }
    out.push_str("</svg>\n");
    out
}

/// Confusion matrix heatmap, rows true class and columns predicted class.
pub fn confusion_heatmap(title: &str, cm: &ConfusionMatrix) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let cell = 64.0;
    let (x0, y0) = (170.0, MARGIN_T + 30.0);
    let max = cm.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    for (t, class) in DiagnosticClass::ALL.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            x0 - 8.0,
            y0 + cell * (t as f64 + 0.5) + 4.0,
            class.name()
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"start\" transform=\"rotate(-30 {:.1} {:.1})\">{}</text>",
            x0 + cell * (t as f64 + 0.3),
            y0 - 6.0,
            x0 + cell * (t as f64 + 0.3),
            y0 - 6.0,
            class.name()
        );
        for p in 0..NUM_CLASSES {
            let v = cm.counts[t][p];
            let shade = 255.0 - 200.0 * v as f64 / max;
            let (x, y) = (x0 + cell * p as f64, y0 + cell * t as f64);
            let _ = writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({:.0},{:.0},255)\" stroke=\"#888\"/>\
                 <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v}</text>",
                shade,
                shade,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">Predicted</text>\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">True</text>",
        x0 + 2.0 * cell,
        y0 + 4.0 * cell + 24.0,
        40.0,
        y0 - 20.0
    );
    out.push_str("</svg>\n");
    out
}
