use std::fmt::Write as _;
use std::path::Path;

use crate::estimator::EopCurve;

use super::{write_text, DataError, Result};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub title: Option<String>,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            title: None,
            x_label: "Number of policies deployed online".into(),
            y_label: "Normalized performance".into(),
            width: 760.0,
            height: 480.0,
        }
    }
}

fn escape(s: &str) -> String {
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

/// Tick label with at most four significant digits and no trailing zeros.
fn tick_label(v: f64) -> String {
    let s = format!("{:.*}", decimals_for(v), v);
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn decimals_for(v: f64) -> usize {
    if v == 0.0 {
        return 0;
    }
    let magnitude = v.abs().log10().floor() as i32;
    (3 - magnitude).clamp(0, 6) as usize
}

struct Frame {
    left: f64,
    top: f64,
    plot_w: f64,
    plot_h: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.left + (v - self.x_min) / (self.x_max - self.x_min) * self.plot_w
    }

    fn y(&self, v: f64) -> f64 {
        self.top + (self.y_max - v) / (self.y_max - self.y_min) * self.plot_h
    }
}

/// Renders labeled curves as a standalone SVG document: one polyline per
/// curve over a translucent mean ± std band, a legend, and labeled axes.
/// Output bytes depend only on the inputs.
pub fn render_figure(curves: &[(String, EopCurve)], opts: &FigureOptions) -> Result<String> {
    if curves.is_empty() || curves.iter().any(|(_, c)| c.points.is_empty()) {
        return Err(DataError::NoCurves);
    }
    let x_max = curves
        .iter()
        .map(|(_, c)| c.max_budget())
        .max()
        .unwrap_or(1)
        .max(2) as f64;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, c) in curves {
        for p in &c.points {
            y_min = y_min.min(p.mean - p.std);
            y_max = y_max.max(p.mean + p.std);
        }
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    } else {
        let pad = 0.05 * (y_max - y_min);
        y_min -= pad;
        y_max += pad;
    }
    let (width, height) = (opts.width, opts.height);
    let legend_w = 180.0;
    let frame = Frame {
        left: 80.0,
        top: 40.0,
        plot_w: width - 80.0 - 20.0 - legend_w,
        plot_h: height - 40.0 - 60.0,
        x_min: 1.0,
        x_max,
        y_min,
        y_max,
    };
    let bottom = frame.top + frame.plot_h;
    let right = frame.left + frame.plot_w;

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(w, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#).unwrap();
    if let Some(title) = &opts.title {
        writeln!(
            w,
            r#"<text class="title" x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            frame.left + frame.plot_w / 2.0,
            escape(title)
        )
        .unwrap();
    }

    writeln!(w, r#"<g class="axes" stroke="black" stroke-width="1">"#).unwrap();
    writeln!(
        w,
        r#"<line x1="{:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}"/>"#,
        frame.left
    )
    .unwrap();
    writeln!(
        w,
        r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{bottom:.2}"/>"#,
        frame.left, frame.top
    )
    .unwrap();
    writeln!(w, "</g>").unwrap();

    writeln!(w, r#"<g class="ticks">"#).unwrap();
    let step = ((x_max - 1.0) / 10.0).ceil().max(1.0) as usize;
    for b in (1..=x_max as usize).step_by(step) {
        let x = frame.x(b as f64);
        writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            bottom + 5.0
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{b}</text>"#,
            bottom + 18.0
        )
        .unwrap();
    }
    for i in 0..=4 {
        let v = y_min + (y_max - y_min) * i as f64 / 4.0;
        let y = frame.y(v);
        writeln!(
            w,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
            frame.left - 5.0,
            frame.left
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            frame.left - 8.0,
            y + 4.0,
            tick_label(v)
        )
        .unwrap();
    }
    writeln!(w, "</g>").unwrap();

    writeln!(
        w,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        frame.left + frame.plot_w / 2.0,
        height - 16.0,
        escape(&opts.x_label)
    )
    .unwrap();
    let y_mid = frame.top + frame.plot_h / 2.0;
    writeln!(
        w,
        r#"<text class="y-label" x="20" y="{y_mid:.2}" text-anchor="middle" transform="rotate(-90 20 {y_mid:.2})">{}</text>"#,
        escape(&opts.y_label)
    )
    .unwrap();

    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", frame.x(p.budget as f64), frame.y(p.mean + p.std)));
        let lower = curve
            .points
            .iter()
            .rev()
            .map(|p| format!("{:.2},{:.2}", frame.x(p.budget as f64), frame.y(p.mean - p.std)));
        let band: Vec<String> = upper.chain(lower).collect();
        let line: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", frame.x(p.budget as f64), frame.y(p.mean)))
            .collect();
        writeln!(w, r#"<g class="series" data-label="{}">"#, escape(label)).unwrap();
        writeln!(
            w,
            r#"<polygon class="band" fill="{color}" fill-opacity="0.2" stroke="none" points="{}"/>"#,
            band.join(" ")
        )
        .unwrap();
        writeln!(
            w,
            r#"<polyline class="curve" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            line.join(" ")
        )
        .unwrap();
        writeln!(w, "</g>").unwrap();
    }

    writeln!(w, r#"<g class="legend">"#).unwrap();
    let legend_x = right + 20.0;
    for (i, (label, _)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = frame.top + 10.0 + 20.0 * i as f64;
        writeln!(
            w,
            r#"<rect x="{legend_x:.2}" y="{:.2}" width="14" height="10" fill="{color}"/>"#,
            y - 9.0
        )
        .unwrap();
        writeln!(
            w,
            r#"<text class="legend-entry" x="{:.2}" y="{y:.2}">{}</text>"#,
            legend_x + 20.0,
            escape(label)
        )
        .unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(w, "</svg>").unwrap();
    Ok(svg)
}

pub fn emit_figure(path: &Path, curves: &[(String, EopCurve)], opts: &FigureOptions) -> Result<()> {
    write_text(path, &render_figure(curves, opts)?)
}
