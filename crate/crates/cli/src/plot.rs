//! Static SVG log-log plots of sweep errors against `R`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use homog_core::Method;

use crate::error::{CliError, Result};
use crate::record::{read_csv_file, SweepRecord};

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 240.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, r: f64) -> f64 {
        LEFT + (r.log10() - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, e: f64) -> f64 {
        TOP + (self.y1 - e.log10()) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Renders one polyline per (method, q) group; groups without a single
/// positive finite error are listed in the legend only. A dashed guide of
/// slope `−(q+1)` is drawn for each filter order present.
pub fn render_svg(records: &[SweepRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(CliError::Csv("no records to plot".into()));
    }
    let mut groups: BTreeMap<(Method, u32), Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let pts = groups.entry((r.method, r.q)).or_default();
        if r.r > 0.0 && r.err_fro.is_finite() && r.err_fro > 0.0 {
            pts.push((r.r, r.err_fro));
        }
    }
    for pts in groups.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let all: Vec<(f64, f64)> = groups.values().flatten().copied().collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(r, e) in &all {
        x0 = x0.min(r.log10());
        x1 = x1.max(r.log10());
        y0 = y0.min(e.log10());
        y1 = y1.max(e.log10());
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, -1.0, 0.0);
    }
    let pad = 0.05 * (x1 - x0).max(0.2);
    let axes = Axes { x0: x0 - pad, x1: x1 + pad, y0: y0.floor(), y1: y1.ceil().max(y0.floor() + 1.0) };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>"##);

    for k in axes.y0 as i32..=axes.y1 as i32 {
        let y = axes.py(10f64.powi(k));
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let mut ticks: Vec<f64> = all.iter().map(|p| p.0).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for r in ticks {
        let x = axes.px(r);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#eee"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{r}</text>"#, TOP + ph + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">R (sampling box size)</text>"#, LEFT + pw / 2.0, HEIGHT - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">Frobenius error</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let mut guided = Vec::new();
    for ((_, q), pts) in &groups {
        if *q == 0 || guided.contains(q) || pts.is_empty() {
            continue;
        }
        guided.push(*q);
        let (ra, ea) = pts[0];
        let slope = -(*q as f64 + 1.0);
        let rb = 10f64.powf(axes.x1);
        let eb = ea * (rb / ra).powf(slope);
        let _ = writeln!(
            s,
            r##"<line class="guide" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="6 4" clip-path="url(#plot)"/>"##,
            axes.px(ra),
            axes.py(ea),
            axes.px(rb),
            axes.py(eb)
        );
        let _ = writeln!(s, r##"<text x="{:.2}" y="{:.2}" fill="#888">guide slope -{}</text>"##, LEFT + 8.0, TOP + 16.0 * guided.len() as f64, q + 1);
    }

    for (i, ((method, q), pts)) in groups.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = escape(&format!("{method} q={q}"));
        if !pts.is_empty() {
            let coords: Vec<String> = pts.iter().map(|&(r, e)| format!("{:.2},{:.2}", axes.px(r), axes.py(e))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"><title>{label}</title></polyline>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (x, y) = c.split_once(',').unwrap();
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 24.0);
        let suffix = if pts.is_empty() { " (no data)" } else { "" };
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{label}{suffix}</text>"#, lx + 30.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(csv_path: &Path, svg_path: &Path) -> Result<()> {
    let records = read_csv_file(csv_path)?;
    let svg = render_svg(&records)?;
    std::fs::write(svg_path, svg)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", svg_path.display())))?;
    Ok(())
}
