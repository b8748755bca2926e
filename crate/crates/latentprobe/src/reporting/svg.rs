//! Hand-rolled SVG chart emitters.
//!
//! Text output only, with every number formatted through deterministic
//! fixed-precision helpers, so identical inputs give identical bytes.

use rand::Rng;

use super::GlossPoint;
use crate::seeding::task_rng;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#4878a8", "#e24a33", "#5ba85b", "#a86dc6", "#e0a33e", "#47b8b8", "#8a6d4a", "#d86a9f",
];

fn esc(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    format!("{v:.4}")
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        body.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
        ));
        body.push_str(&format!(
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            coord(WIDTH / 2.0),
            esc(title)
        ));
        Self { body }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Maps a value range to plot pixels, padding degenerate ranges.
struct Scale {
    lo: f64,
    hi: f64,
    pixel_lo: f64,
    pixel_hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, pixel_lo: f64, pixel_hi: f64) -> Self {
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
        Self {
            lo,
            hi,
            pixel_lo,
            pixel_hi,
        }
    }

    fn at(&self, v: f64) -> f64 {
        self.pixel_lo + (v - self.lo) / (self.hi - self.lo) * (self.pixel_hi - self.pixel_lo)
    }
}

fn draw_y_axis(canvas: &mut Canvas, scale: &Scale) {
    for i in 0..=4 {
        let v = scale.lo + (scale.hi - scale.lo) * i as f64 / 4.0;
        let y = scale.at(v);
        canvas.body.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            coord(MARGIN_LEFT),
            coord(y),
            coord(WIDTH - MARGIN_RIGHT),
            coord(y)
        ));
        canvas.body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
            coord(MARGIN_LEFT - 6.0),
            coord(y + 3.0),
            tick_label(v)
        ));
    }
}

/// Vertical bars over categorical labels, with a zero baseline so negative
/// values hang downward.
pub(super) fn bar_chart(title: &str, labels: &[String], values: &[f64], unit: &str) -> String {
    let mut canvas = Canvas::new(title);
    let lo = values.iter().copied().fold(0.0f64, f64::min);
    let hi = values.iter().copied().fold(0.0f64, f64::max);
    let y = Scale::new(lo, hi, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    draw_y_axis(&mut canvas, &y);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let slot = plot_w / values.len().max(1) as f64;
    let bar_w = slot * 0.7;
    let baseline = y.at(0.0);
    let label_step = values.len().div_ceil(32);
    for (i, (&value, label)) in values.iter().zip(labels).enumerate() {
        let x = MARGIN_LEFT + slot * i as f64 + (slot - bar_w) / 2.0;
        let top = y.at(value).min(baseline);
        let height = (y.at(value) - baseline).abs();
        canvas.body.push_str(&format!(
            "<rect class=\"bar\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\">\
             <title>{}: {} {}</title></rect>\n",
            coord(x),
            coord(top),
            coord(bar_w),
            coord(height),
            PALETTE[0],
            esc(label),
            tick_label(value),
            esc(unit)
        ));
        if i % label_step == 0 {
            canvas.body.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                coord(x + bar_w / 2.0),
                coord(HEIGHT - MARGIN_BOTTOM + 14.0),
                esc(label)
            ));
        }
    }
    canvas.body.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\"/>\n",
        coord(MARGIN_LEFT),
        coord(baseline),
        coord(WIDTH - MARGIN_RIGHT),
        coord(baseline)
    ));
    canvas.finish()
}

fn scatter_core(
    title: &str,
    points: &[(f64, f64, usize)],
    x_label: &str,
    y_label: &str,
) -> String {
    let mut canvas = Canvas::new(title);
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, _) in points {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if points.is_empty() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    let x_pad = (x_hi - x_lo).max(1e-9) * 0.05;
    let y_pad = (y_hi - y_lo).max(1e-9) * 0.05;
    let x = Scale::new(x_lo - x_pad, x_hi + x_pad, MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let y = Scale::new(y_lo - y_pad, y_hi + y_pad, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    draw_y_axis(&mut canvas, &y);

    for &(px, py, class) in points {
        canvas.body.push_str(&format!(
            "<circle class=\"pt\" cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            coord(x.at(px)),
            coord(y.at(py)),
            PALETTE[class % PALETTE.len()]
        ));
    }
    canvas.body.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        coord(WIDTH / 2.0),
        coord(HEIGHT - 10.0),
        esc(x_label)
    ));
    canvas.body.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        coord(HEIGHT / 2.0),
        coord(HEIGHT / 2.0),
        esc(y_label)
    ));
    canvas.finish()
}

/// Class-colored scatter plot.
pub(super) fn scatter(
    title: &str,
    points: &[(f64, f64, usize)],
    x_label: &str,
    y_label: &str,
) -> String {
    scatter_core(title, points, x_label, y_label)
}

/// Gloss-projection scatter: x is the axis projection, y the ordinal gloss
/// level plus a small vertical jitter for visibility. The jitter stream is
/// seeded from the section id, keeping emission a pure function of the
/// report.
pub(super) fn jittered_scatter(title: &str, points: &[GlossPoint], section_id: &str) -> String {
    let mut rng = task_rng(0, section_id, 0);
    let jittered: Vec<(f64, f64, usize)> = points
        .iter()
        .map(|p| {
            let jitter = (rng.gen::<f64>() - 0.5) * 0.7;
            (p.projection, p.gloss as f64 + jitter, p.gloss as usize)
        })
        .collect();
    scatter_core(title, &jittered, "axis projection", "gloss level")
}
