//! Static SVG renderings of the comparison figures: grouped bar charts of
//! the overall error measures and box plots of per-product mean mMAPE.
//! Pure string builders with fixed formatting, so identical inputs yield
//! byte-identical files.

use crate::eval::BoxPlotStats;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn svg_open(seed: u64, title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n",
            "<!-- master_seed={seed} -->\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{cx}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        cx = WIDTH / 2.0,
        seed = seed,
        title = xml_escape(title),
    )
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_max(values: impl Iterator<Item = f64>) -> f64 {
    let max = values.fold(0.0f64, f64::max);
    if max <= 0.0 {
        1.0
    } else {
        max * 1.1
    }
}

/// Vertical bar chart of one value per label.
pub fn bar_chart(seed: u64, title: &str, metric: &str, items: &[(String, f64)]) -> String {
    let mut svg = svg_open(seed, title);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_max = nice_max(items.iter().map(|(_, v)| *v));
    let n = items.len().max(1) as f64;
    let slot = plot_w / n;
    let bar_w = slot * 0.6;

    // Axes and y-grid.
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n<line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y1}\" stroke=\"black\"/>\n",
        x0 = MARGIN_LEFT,
        y0 = MARGIN_TOP,
        y1 = MARGIN_TOP + plot_h,
        x2 = WIDTH - MARGIN_RIGHT,
    ));
    for tick in 0..=4 {
        let frac = tick as f64 / 4.0;
        let y = MARGIN_TOP + plot_h * (1.0 - frac);
        svg.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y:.2}\" x2=\"{x1}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n<text x=\"{tx}\" y=\"{ty:.2}\" text-anchor=\"end\" font-size=\"11\">{v:.3}</text>\n",
            x0 = MARGIN_LEFT,
            x1 = WIDTH - MARGIN_RIGHT,
            tx = MARGIN_LEFT - 6.0,
            ty = y + 4.0,
            v = y_max * frac,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{cy:.2}\" font-size=\"12\" transform=\"rotate(-90 16 {cy:.2})\" text-anchor=\"middle\">{m}</text>\n",
        cy = MARGIN_TOP + plot_h / 2.0,
        m = xml_escape(metric),
    ));

    for (i, (label, value)) in items.iter().enumerate() {
        let x = MARGIN_LEFT + slot * i as f64 + (slot - bar_w) / 2.0;
        let h = (value / y_max) * plot_h;
        let y = MARGIN_TOP + plot_h - h;
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" fill=\"#4878a8\"/>\n<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\" font-size=\"12\">{label}</text>\n<text x=\"{lx:.2}\" y=\"{vy:.2}\" text-anchor=\"middle\" font-size=\"10\">{value:.4}</text>\n",
            lx = x + bar_w / 2.0,
            ly = MARGIN_TOP + plot_h + 18.0,
            vy = y - 4.0,
            label = xml_escape(label),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Side-by-side box plots, one per label.
pub fn box_plot(seed: u64, title: &str, items: &[(String, BoxPlotStats)]) -> String {
    let mut svg = svg_open(seed, title);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_max = nice_max(items.iter().map(|(_, s)| {
        s.whisker_high
            .max(s.outliers.iter().map(|o| o.1).fold(0.0, f64::max))
    }));
    let scale_y = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v / y_max).clamp(0.0, 1.0));
    let n = items.len().max(1) as f64;
    let slot = plot_w / n;
    let box_w = slot * 0.45;

    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n<line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y1}\" stroke=\"black\"/>\n",
        x0 = MARGIN_LEFT,
        y0 = MARGIN_TOP,
        y1 = MARGIN_TOP + plot_h,
        x2 = WIDTH - MARGIN_RIGHT,
    ));
    for tick in 0..=4 {
        let frac = tick as f64 / 4.0;
        let y = MARGIN_TOP + plot_h * (1.0 - frac);
        svg.push_str(&format!(
            "<text x=\"{tx}\" y=\"{ty:.2}\" text-anchor=\"end\" font-size=\"11\">{v:.3}</text>\n",
            tx = MARGIN_LEFT - 6.0,
            ty = y + 4.0,
            v = y_max * frac,
        ));
    }

    for (i, (label, s)) in items.iter().enumerate() {
        let cx = MARGIN_LEFT + slot * (i as f64 + 0.5);
        let x = cx - box_w / 2.0;
        let (yq1, ymed, yq3) = (scale_y(s.q1), scale_y(s.median), scale_y(s.q3));
        let (ylo, yhi) = (scale_y(s.whisker_low), scale_y(s.whisker_high));
        svg.push_str(&format!(
            concat!(
                "<line x1=\"{cx:.2}\" y1=\"{yhi:.2}\" x2=\"{cx:.2}\" y2=\"{yq3:.2}\" stroke=\"black\"/>\n",
                "<line x1=\"{cx:.2}\" y1=\"{yq1:.2}\" x2=\"{cx:.2}\" y2=\"{ylo:.2}\" stroke=\"black\"/>\n",
                "<line x1=\"{w0:.2}\" y1=\"{yhi:.2}\" x2=\"{w1:.2}\" y2=\"{yhi:.2}\" stroke=\"black\"/>\n",
                "<line x1=\"{w0:.2}\" y1=\"{ylo:.2}\" x2=\"{w1:.2}\" y2=\"{ylo:.2}\" stroke=\"black\"/>\n",
                "<rect x=\"{x:.2}\" y=\"{yq3:.2}\" width=\"{bw:.2}\" height=\"{bh:.2}\" fill=\"#a8c8e8\" stroke=\"black\"/>\n",
                "<line x1=\"{x:.2}\" y1=\"{ymed:.2}\" x2=\"{x1:.2}\" y2=\"{ymed:.2}\" stroke=\"black\" stroke-width=\"2\"/>\n",
                "<text x=\"{cx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\" font-size=\"12\">{label}</text>\n"
            ),
            cx = cx,
            x = x,
            x1 = x + box_w,
            w0 = cx - box_w / 4.0,
            w1 = cx + box_w / 4.0,
            bw = box_w,
            bh = (yq1 - yq3).max(0.5),
            yq1 = yq1,
            yq3 = yq3,
            ymed = ymed,
            ylo = ylo,
            yhi = yhi,
            ly = MARGIN_TOP + plot_h + 18.0,
            label = xml_escape(label),
        ));
        for (_, v) in &s.outliers {
            svg.push_str(&format!(
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n",
                cy = scale_y(*v),
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
