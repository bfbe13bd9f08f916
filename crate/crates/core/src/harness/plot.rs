//! Static SVG line chart of score traces, one polyline per seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::EpisodeTrace;
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Smallest "round" value (1, 2 or 5 times a power of ten) that is at least
/// `v`, and never below 10.
pub fn nice_ceiling(v: f64) -> f64 {
    if v <= 10.0 {
        return 10.0;
    }
    let magnitude = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * magnitude)
}

pub fn render_trace_plot(traces: &[&EpisodeTrace]) -> Result<String> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Invalid("nothing to plot".into()))?;
    if traces.iter().any(|t| t.algorithm != first.algorithm) {
        return Err(Error::Invalid("all plotted traces must share one algorithm".into()));
    }
    let episodes = traces.iter().map(|t| t.records.len()).max().unwrap_or(1).max(1);
    let y_max = nice_ceiling(traces.iter().map(|t| t.max_score()).max().unwrap_or(0) as f64);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |ep: usize| {
        let span = (episodes.max(2) - 1) as f64;
        MARGIN_LEFT + plot_w * (ep.saturating_sub(1)) as f64 / span
    };
    let sy = |score: f64| MARGIN_TOP + plot_h * (1.0 - score / y_max);

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-y-max="{y_max}">"#
    )
    .unwrap();
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{} score traces</text>"#,
        WIDTH / 2.0,
        first.algorithm.tag().to_uppercase()
    )
    .unwrap();

    // axes
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    writeln!(w, r#"<g stroke="black" stroke-width="1">"#).unwrap();
    writeln!(w, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#).unwrap();
    writeln!(w, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#).unwrap();
    writeln!(w, "</g>").unwrap();

    writeln!(w, r#"<g font-family="sans-serif" font-size="11" fill="black">"#).unwrap();
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let y = sy(v);
        writeln!(
            w,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            v
        )
        .unwrap();
        writeln!(
            w,
            r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#dddddd" stroke-width="0.5"/>"##
        )
        .unwrap();
    }
    for i in 0..=5 {
        let ep = 1 + (episodes - 1) * i / 5;
        writeln!(
            w,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{ep}</text>"#,
            sx(ep),
            y0 + 16.0
        )
        .unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">Episodes</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="18" y="{0}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {0})">Score</text>"#,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, t) in traces.iter().enumerate() {
        let points: Vec<String> = t
            .records
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.episode), sy(r.score as f64)))
            .collect();
        writeln!(
            w,
            r#"<polyline data-seed="{}" fill="none" stroke="{}" stroke-width="0.8" stroke-opacity="0.8" points="{}"/>"#,
            t.seed,
            PALETTE[i % PALETTE.len()],
            points.join(" ")
        )
        .unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    Ok(svg)
}

pub fn write_trace_plot(traces: &[&EpisodeTrace], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = render_trace_plot(traces)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
