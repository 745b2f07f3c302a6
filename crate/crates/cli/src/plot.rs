//! Minimal SVG charts for the figure data files.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 60.0;

fn open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Vertical bars on a symmetric or positive axis.
pub fn bar_chart(title: &str, bars: &[(String, f64)], lo: f64, hi: f64) -> String {
    let mut s = open(title);
    let plot_h = H - 2.0 * PAD;
    let y = |v: f64| PAD + (hi - v) / (hi - lo) * plot_h;
    let step = (W - 2.0 * PAD) / bars.len().max(1) as f64;
    let _ = writeln!(
        s,
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        y(0.0_f64.clamp(lo, hi)),
        W - PAD
    );
    for (i, (name, v)) in bars.iter().enumerate() {
        let x = PAD + i as f64 * step + step * 0.1;
        let (top, bottom) = if *v >= 0.0 { (y(*v), y(0.0_f64.max(lo))) } else { (y(0.0), y(*v)) };
        let fill = if *v >= 0.0 { "#4878a8" } else { "#c8553d" };
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{top:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{fill}\"/>",
            step * 0.8,
            (bottom - top).max(0.0)
        );
        let lx = x + step * 0.4;
        let _ = writeln!(
            s,
            "<text x=\"{lx:.1}\" y=\"{:.1}\" transform=\"rotate(45 {lx:.1} {:.1})\">{}</text>",
            H - PAD + 12.0,
            H - PAD + 12.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One polyline per series over a shared x index.
pub fn line_chart(title: &str, series: &[(&str, &[f64])], lo: f64, hi: f64) -> String {
    let colors = ["#4878a8", "#c8553d", "#6a9f58", "#8e6bb0"];
    let mut s = open(title);
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let x = |i: usize| PAD + i as f64 / (n.max(2) - 1) as f64 * (W - 2.0 * PAD);
    let y = |v: f64| PAD + (hi - v) / (hi - lo) * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (k, (name, values)) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.1},{:.1}", x(i), y(*v)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            points.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            W - PAD + 5.0,
            PAD + 14.0 * k as f64,
            escape(name)
        );
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{hi}</text>", PAD - 4.0, PAD + 4.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{lo}</text>", PAD - 4.0, H - PAD + 4.0);
    s.push_str("</svg>\n");
    s
}

/// Square grid coloured from blue (−1) to red (+1).
pub fn heatmap(title: &str, names: &[String], values: &[Vec<f64>]) -> String {
    let mut s = open(title);
    let p = names.len().max(1) as f64;
    let cell = (H - 2.0 * PAD).min(W - 2.0 * PAD) / p;
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let t = v.clamp(-1.0, 1.0);
            let (r, g, b) = if t >= 0.0 {
                (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
            } else {
                (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
            };
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"rgb({:.0},{:.0},{:.0})\"><title>{} / {}: {v}</title></rect>",
                2.0 * PAD + j as f64 * cell,
                PAD + i as f64 * cell,
                r,
                g,
                b,
                escape(&names[i]),
                escape(&names[j])
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            2.0 * PAD - 4.0,
            PAD + (i as f64 + 0.7) * cell,
            escape(&names[i])
        );
    }
    s.push_str("</svg>\n");
    s
}
