//! Minimal SVG scatter plots of 2-D embeddings.

use std::fmt::Write;

use mbn::{DataMatrix, LabelVector};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const UNLABELED: &str = "#c0c0c0";

fn color(class: usize, classes: usize) -> String {
    if classes <= PALETTE.len() {
        PALETTE[class].to_string()
    } else {
        // evenly spaced hues once the fixed palette runs out
        format!("hsl({:.1},70%,45%)", 360.0 * class as f64 / classes as f64)
    }
}

/// Renders the first two columns of `z`, one color per class.
pub fn scatter_svg(z: &DataMatrix, labels: &LabelVector, size: usize) -> String {
    let margin = 10.0;
    let span = size as f64 - 2.0 * margin;
    let bounds = |j: usize| {
        let col = (0..z.n()).map(|i| z.get(i, j));
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (x0, xw) = bounds(0);
    let (y0, yh) = if z.d() > 1 { bounds(1) } else { (0.0, 1.0) };
    let (compact, ids) = labels.compact();
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for i in 0..z.n() {
        let px = margin + (z.get(i, 0) - x0) / xw * span;
        let y = if z.d() > 1 { z.get(i, 1) } else { 0.0 };
        let py = margin + (1.0 - (y - y0) / yh) * span;
        let fill = compact.get(i).map_or(UNLABELED.to_string(), |c| color(c as usize, ids.len()));
        writeln!(out, r#"<circle cx="{px:.3}" cy="{py:.3}" r="2" fill="{fill}"/>"#).unwrap();
    }
    out.push_str("</svg>\n");
    out
}
