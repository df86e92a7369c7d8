// SPDX-License-Identifier: Apache-2.0

//! Output artifacts: colored fragments, the report, an SVG rendering and
//! debug dumps. Every writer is deterministic for a given decomposition.

use std::fmt::Write as _;

use serde::Serialize;

use crate::geometry::{Coord, LayoutSpec, Rect};
use crate::metrics::{BinUniformity, StageTimings};
use crate::pipeline::Decomposition;
use crate::stitch::format_sequences;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct FragmentOut<'a> {
    feature_id: &'a str,
    fragment_index: usize,
    rects: &'a [Rect],
    color: u8,
}

#[derive(Serialize)]
struct ColoringDoc<'a> {
    format_version: u32,
    dis_m: Coord,
    fragments: Vec<FragmentOut<'a>>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// One entry per fragment: `{feature_id, fragment_index, rects, color}`.
pub fn coloring_json(spec: &LayoutSpec, d: &Decomposition) -> String {
    let fragments = d
        .graph
        .fragments
        .iter()
        .enumerate()
        .map(|(i, f)| FragmentOut {
            feature_id: &spec.features[f.feature].id,
            fragment_index: f.index,
            rects: &f.rects,
            color: d.coloring[d.graph.vertex_of(i)],
        })
        .collect();
    to_json(&ColoringDoc {
        format_version: FORMAT_VERSION,
        dis_m: d.dis_m,
        fragments,
    })
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    format_version: u32,
    features: usize,
    fragments: usize,
    conflict_edges: usize,
    stitch_candidates: usize,
    conflicts: u32,
    stitches: u32,
    cost: f64,
    du_sum: f64,
    du_per_bin: &'a [BinUniformity],
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_ms: Option<&'a StageTimings>,
}

/// Report with a stable field order. Timings are only included on request
/// since they differ from run to run.
pub fn report_json(d: &Decomposition, oracle_objective: Option<f64>, with_timings: bool) -> String {
    to_json(&ReportDoc {
        format_version: FORMAT_VERSION,
        features: d.layout_graph.vertex_count(),
        fragments: d.graph.fragments.len(),
        conflict_edges: d.graph.conflicts.values().map(|&m| m as usize).sum(),
        stitch_candidates: d.stitches.len(),
        conflicts: d.report.conflicts,
        stitches: d.report.stitches,
        cost: d.report.cost,
        du_sum: d.report.du_sum,
        du_per_bin: &d.report.du_per_bin,
        oracle_objective,
        runtime_ms: with_timings.then_some(&d.timings),
    })
}

/// `feature_id: labels` per straight piece (`feature_id#part` for pieces
/// after the first).
pub fn sequences_text(spec: &LayoutSpec, d: &Decomposition) -> String {
    format_sequences(&d.sequences, |i| spec.features[i].id.as_str())
}

pub const PALETTE: [&str; 3] = ["#4e79a7", "#f28e2b", "#59a14f"];

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
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

/// Midpoint between the closest points of two rectangles.
fn closest_midpoint(a: &Rect, b: &Rect) -> (f64, f64) {
    let axis = |a0: Coord, a1: Coord, b0: Coord, b1: Coord| -> f64 {
        if a1 < b0 {
            (a1 + b0) as f64 / 2.0
        } else if b1 < a0 {
            (b1 + a0) as f64 / 2.0
        } else {
            (a0.max(b0) + a1.min(b1)) as f64 / 2.0
        }
    };
    (axis(a.x0, a.x1, b.x0, b.x1), axis(a.y0, a.y1, b.y0, b.y1))
}

/// Colored fragments, a cut line per used stitch, a marker per conflict,
/// and a legend. The y axis points up as in layout coordinates.
pub fn render_svg(spec: &LayoutSpec, d: &Decomposition) -> String {
    let bbox = spec.bbox().unwrap_or(Rect::new(0, 0, 1, 1));
    let margin = (bbox.width().max(bbox.height()) / 20).max(d.dis_m / 2).max(1);
    let legend_h = 3 * margin;
    let (x0, y_top) = (bbox.x0 - margin, bbox.y1 + margin);
    let width = bbox.width() + 2 * margin;
    let height = bbox.height() + 2 * margin + legend_h;
    let tx = |x: f64| x - x0 as f64;
    let ty = |y: f64| y_top as f64 - y;
    let stroke = (margin as f64 / 20.0).max(0.5);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<g id="fragments">"#);
    for (i, f) in d.graph.fragments.iter().enumerate() {
        let color = d.coloring[d.graph.vertex_of(i)];
        let id = xml_escape(&spec.features[f.feature].id);
        for r in &f.rects {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" data-feature="{}" data-fragment="{}"/>"#,
                tx(r.x0 as f64),
                ty(r.y1 as f64),
                r.width(),
                r.height(),
                PALETTE[color as usize],
                id,
                f.index
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="stitches" stroke="black" stroke-width="{stroke}">"#);
    for &(u, v) in d.graph.stitches.keys() {
        if d.coloring[u] == d.coloring[v] {
            continue;
        }
        let fu = &d.graph.fragments[d.graph.vertices[u].representative()];
        let fv = &d.graph.fragments[d.graph.vertices[v].representative()];
        for a in &fu.rects {
            for b in &fv.rects {
                let (x0, x1) = (a.x0.max(b.x0), a.x1.min(b.x1));
                let (y0, y1) = (a.y0.max(b.y0), a.y1.min(b.y1));
                // the cut is where the two pieces touch along a segment
                if x0 <= x1 && y0 <= y1 && (x0 == x1) != (y0 == y1) {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                        tx(x0 as f64),
                        ty(y0 as f64),
                        tx(x1 as f64),
                        ty(y1 as f64)
                    );
                }
            }
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="conflicts" fill="none" stroke="red" stroke-width="{stroke}">"#);
    let radius = (d.dis_m as f64 / 4.0).max(1.0);
    for &(u, v) in d.graph.conflicts.keys() {
        if d.coloring[u] != d.coloring[v] {
            continue;
        }
        let fu = &d.graph.fragments[d.graph.vertices[u].representative()];
        let fv = &d.graph.fragments[d.graph.vertices[v].representative()];
        let (mut best, mut at) = (i128::MAX, (0.0, 0.0));
        for a in &fu.rects {
            for b in &fv.rects {
                let dist = a.distance_sq(b);
                if dist < best {
                    best = dist;
                    at = closest_midpoint(a, b);
                }
            }
        }
        let _ = writeln!(
            s,
            r#"<circle class="conflict" cx="{}" cy="{}" r="{radius}"/>"#,
            tx(at.0),
            ty(at.1)
        );
    }
    let _ = writeln!(s, "</g>");

    let base_y = (bbox.height() + 2 * margin) as f64 + 1.5 * margin as f64;
    let r = margin as f64 / 3.0;
    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="{}">"#, margin as f64 * 0.8);
    for (c, fill) in PALETTE.iter().enumerate() {
        let cx = margin as f64 * (1.0 + 4.0 * c as f64);
        let _ = writeln!(s, r#"<circle class="swatch" cx="{cx}" cy="{base_y}" r="{r}" fill="{fill}"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}">mask {c}</text>"#, cx + 1.5 * r, base_y + r);
    }
    let cx = margin as f64 * 13.0;
    let _ = writeln!(
        s,
        r#"<circle class="swatch" cx="{cx}" cy="{base_y}" r="{r}" fill="none" stroke="red" stroke-width="{stroke}"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">conflict ({})</text>"#,
        cx + 1.5 * r,
        base_y + r,
        d.report.conflicts
    );
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
