//! Deterministic SVG scatter plots and dendrograms.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::{label_index, DataMatrix};
use crate::error::{Error, Result};
use crate::hierarchy::Dendrogram;

/// Twenty distinguishable colors, cycled when there are more labels.
pub const DEFAULT_PALETTE: [&str; 20] = [
    "#1f77b4", "#aec7e8", "#ff7f0e", "#ffbb78", "#2ca02c", "#98df8a", "#d62728", "#ff9896",
    "#9467bd", "#c5b0d5", "#8c564b", "#c49c94", "#e377c2", "#f7b6d2", "#7f7f7f", "#c7c7c7",
    "#bcbd22", "#dbdb8d", "#17becf", "#9edae5",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegendPlacement {
    Right,
    Hidden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub width: u32,
    pub height: u32,
    pub palette: Vec<String>,
    pub point_radius: f64,
    pub legend: LegendPlacement,
    pub margin: u32,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            width: 800,
            height: 600,
            palette: DEFAULT_PALETTE.iter().map(|c| c.to_string()).collect(),
            point_radius: 3.0,
            legend: LegendPlacement::Right,
            margin: 40,
        }
    }
}

impl PlotSpec {
    fn check(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(
                "plot width and height must be positive".into(),
            ));
        }
        if self.palette.is_empty() {
            return Err(Error::InvalidArgument("palette must not be empty".into()));
        }
        Ok(())
    }

    fn color(&self, i: usize) -> &str {
        &self.palette[i % self.palette.len()]
    }
}

const LEGEND_WIDTH: f64 = 160.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Data range padded by 5% on each side; a zero-width range becomes the
/// unit interval around its value.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 0.0 {
        return (lo - 0.5, lo + 0.5);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn open_svg(out: &mut String, spec: &PlotSpec) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = spec.width,
        h = spec.height
    );
    let _ = writeln!(
        out,
        r#"<rect width="{}" height="{}" fill="white"/>"#,
        spec.width, spec.height
    );
}

/// Scatter plot with one circle per point, colored by label.
pub fn render_scatter(
    points: &[[f64; 2]],
    labels: Option<&[String]>,
    spec: &PlotSpec,
) -> Result<String> {
    spec.check()?;
    if let Some(row) = points
        .iter()
        .position(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Error::NonFinite {
            row,
            col: usize::from(points[row][0].is_finite()),
        });
    }
    if let Some(l) = labels {
        if l.len() != points.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} points",
                l.len(),
                points.len()
            )));
        }
    }
    let (names, ids) = match labels {
        Some(l) => label_index(l),
        None => (Vec::new(), vec![0; points.len()]),
    };
    let show_legend = spec.legend == LegendPlacement::Right && !names.is_empty();

    let m = f64::from(spec.margin);
    let right = f64::from(spec.width) - m - if show_legend { LEGEND_WIDTH } else { 0.0 };
    let (left, top, bottom) = (m, m, f64::from(spec.height) - m);
    let right = right.max(left + 1.0);
    let bottom = bottom.max(top + 1.0);
    let (x0, x1) = padded_range(points.iter().map(|p| p[0]));
    let (y0, y1) = padded_range(points.iter().map(|p| p[1]));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);

    let mut out = String::new();
    open_svg(&mut out, spec);
    let _ = writeln!(
        out,
        r##"<rect class="frame" x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    for (v, x) in [(x0, left), (x1, right)] {
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.3}</text>"#,
            bottom + 14.0
        );
    }
    for (v, y) in [(y0, bottom), (y1, top)] {
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.2}" y="{y:.2}" text-anchor="end">{v:.3}</text>"#,
            left - 4.0
        );
    }
    out.push_str("<g class=\"points\">\n");
    for (p, &id) in points.iter().zip(&ids) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{}" fill="{}" fill-opacity="0.8"/>"#,
            sx(p[0]),
            sy(p[1]),
            spec.point_radius,
            spec.color(id)
        );
    }
    out.push_str("</g>\n");
    if show_legend {
        out.push_str("<g class=\"legend\">\n");
        let lx = right + 16.0;
        for (i, name) in names.iter().enumerate() {
            let y = top + 16.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<g class="legend-entry"><rect x="{lx:.2}" y="{y:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
                spec.color(i),
                lx + 14.0,
                y + 9.0,
                escape(name)
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Scatter plot of an `n × 2` embedding using its own labels.
pub fn render_embedding(embedding: &DataMatrix, spec: &PlotSpec) -> Result<String> {
    if embedding.cols() != 2 {
        return Err(Error::Shape(format!(
            "expected 2 columns, got {}",
            embedding.cols()
        )));
    }
    let points: Vec<[f64; 2]> = embedding.iter_rows().map(|r| [r[0], r[1]]).collect();
    render_scatter(&points, embedding.labels(), spec)
}

/// Rectangular dendrogram: leaves along the bottom in the tree's order,
/// merge height upward, one bracket path per merge.
pub fn render_dendrogram(tree: &Dendrogram, spec: &PlotSpec) -> Result<String> {
    spec.check()?;
    let n = tree.leaves().len();
    let order = tree.leaf_order();
    let m = f64::from(spec.margin);
    let label_band = 80.0;
    let (left, right) = (m + 30.0, (f64::from(spec.width) - m).max(m + 31.0));
    let (top, bottom) = (m, (f64::from(spec.height) - m - label_band).max(m + 1.0));
    let max_h = tree.merges().iter().map(|g| g.height).fold(0.0, f64::max);
    let max_h = if max_h > 0.0 { max_h } else { 1.0 };
    let sy = |h: f64| bottom - h / max_h * (bottom - top);

    // x of every node: leaves evenly spaced, internal nodes centered
    let mut xs = vec![0.0; n + tree.merges().len()];
    let step = if n > 1 {
        (right - left) / (n - 1) as f64
    } else {
        0.0
    };
    for (pos, &leaf) in order.iter().enumerate() {
        xs[leaf] = if n > 1 {
            left + step * pos as f64
        } else {
            (left + right) / 2.0
        };
    }
    for (i, g) in tree.merges().iter().enumerate() {
        xs[n + i] = (xs[g.left] + xs[g.right]) / 2.0;
    }

    let mut out = String::new();
    open_svg(&mut out, spec);
    let _ = writeln!(
        out,
        r##"<line class="axis" x1="{:.2}" y1="{top:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="#444"/>"##,
        left - 12.0,
        left - 12.0
    );
    for h in [0.0, max_h] {
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{h:.3}</text>"#,
            left - 16.0,
            sy(h) + 4.0
        );
    }
    out.push_str("<g class=\"brackets\" fill=\"none\" stroke=\"#222\">\n");
    for (i, g) in tree.merges().iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<path class="bracket" data-node="{}" data-height="{}" d="M{:.2},{:.2}V{:.2}H{:.2}V{:.2}"/>"#,
            n + i,
            g.height,
            xs[g.left],
            sy(tree.height(g.left)),
            sy(g.height),
            xs[g.right],
            sy(tree.height(g.right))
        );
    }
    out.push_str("</g>\n<g class=\"leaves\">\n");
    for &leaf in &order {
        let (x, y) = (xs[leaf], bottom + 8.0);
        let _ = writeln!(
            out,
            r#"<text class="leaf" x="{x:.2}" y="{y:.2}" transform="rotate(60 {x:.2} {y:.2})">{}</text>"#,
            escape(&tree.leaves()[leaf])
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}
