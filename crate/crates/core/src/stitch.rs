// SPDX-License-Identifier: Apache-2.0

//! Projection sequences and stitch candidate generation.
//!
//! A feature is first split into straight two-pin pieces (one per input
//! rectangle). Along each piece's long axis we count how many distinct
//! conflicting neighbor features project onto each stretch; the resulting
//! label string drives where stitches may go.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::StitchError;
use crate::geometry::{Coord, Feature, Rect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    /// Long axis of `r`; squares count as horizontal.
    pub fn of(r: &Rect) -> Axis {
        if r.width() >= r.height() {
            Axis::Horizontal
        } else {
            Axis::Vertical
        }
    }

    /// `(along_lo, along_hi, across_lo, across_hi)` of `r` for this axis.
    pub fn split(self, r: &Rect) -> (Coord, Coord, Coord, Coord) {
        match self {
            Axis::Horizontal => (r.x0, r.x1, r.y0, r.y1),
            Axis::Vertical => (r.y0, r.y1, r.x0, r.x1),
        }
    }

    /// Cuts `r` perpendicular to the axis at `pos`.
    pub fn cut(self, r: &Rect, pos: Coord) -> (Rect, Rect) {
        match self {
            Axis::Horizontal => (Rect::new(r.x0, r.y0, pos, r.y1), Rect::new(pos, r.y0, r.x1, r.y1)),
            Axis::Vertical => (Rect::new(r.x0, r.y0, r.x1, pos), Rect::new(r.x0, pos, r.x1, r.y1)),
        }
    }
}

/// A straight piece of a feature; `part` indexes the feature's rectangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TwoPin {
    pub feature: usize,
    pub part: usize,
    pub rect: Rect,
}

/// Splits a (possibly multi-pin) feature into straight two-pin pieces, one
/// per rectangle. Pieces stay tied together at their junctions: a stitch is
/// never placed where it would not separate the feature.
pub fn decompose_multipin(feature_index: usize, feature: &Feature) -> Vec<TwoPin> {
    feature
        .rects
        .iter()
        .enumerate()
        .map(|(part, &rect)| TwoPin {
            feature: feature_index,
            part,
            rect,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub start: Coord,
    pub end: Coord,
    pub label: u32,
}

impl Segment {
    pub fn len(&self) -> Coord {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn midpoint(&self) -> Coord {
        self.start + (self.end - self.start) / 2
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProjectionSequence {
    pub feature: usize,
    pub part: usize,
    pub axis: Axis,
    pub segments: Vec<Segment>,
}

impl ProjectionSequence {
    pub fn labels(&self) -> Vec<u32> {
        self.segments.iter().map(|s| s.label).collect()
    }
}

impl fmt::Display for ProjectionSequence {
    /// Labels as digits, e.g. `01212101010`; labels above 9 are bracketed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.segments {
            if s.label < 10 {
                write!(f, "{}", s.label)?;
            } else {
                write!(f, "({})", s.label)?;
            }
        }
        Ok(())
    }
}

/// Projection sequence of one straight piece.
///
/// `neighbors` lists the geometry of each conflicting neighbor feature. A
/// neighbor rectangle counts when its `dis_m`-expanded box overlaps the
/// piece; its shadow on the piece's axis is the expanded extent clipped to
/// the piece. Each neighbor feature adds at most one to any label.
pub fn compute_projection_sequence(
    piece: &TwoPin,
    neighbors: &[&[Rect]],
    dis_m: Coord,
) -> ProjectionSequence {
    let axis = Axis::of(&piece.rect);
    let (lo, hi, across_lo, across_hi) = axis.split(&piece.rect);
    // (position, +1/-1) boundary events, one merged interval set per neighbor
    let mut events: Vec<(Coord, i32)> = Vec::new();
    for rects in neighbors {
        let mut shadows: Vec<(Coord, Coord)> = rects
            .iter()
            .filter_map(|q| {
                let (q_lo, q_hi, q_alo, q_ahi) = axis.split(q);
                if q_alo - dis_m >= across_hi || q_ahi + dis_m <= across_lo {
                    return None;
                }
                let a = (q_lo - dis_m).max(lo);
                let b = (q_hi + dis_m).min(hi);
                (a < b).then_some((a, b))
            })
            .collect();
        shadows.sort_unstable();
        let mut merged: Vec<(Coord, Coord)> = Vec::new();
        for (a, b) in shadows {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        for (a, b) in merged {
            events.push((a, 1));
            events.push((b, -1));
        }
    }
    events.sort_unstable();

    let mut segments: Vec<Segment> = Vec::new();
    let mut push = |start: Coord, end: Coord, label: u32| {
        if end <= start {
            return;
        }
        match segments.last_mut() {
            Some(last) if last.label == label => last.end = end,
            _ => segments.push(Segment { start, end, label }),
        }
    };
    let mut cursor = lo;
    let mut depth: i32 = 0;
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0;
        push(cursor, pos, depth as u32);
        while i < events.len() && events[i].0 == pos {
            depth += events[i].1;
            i += 1;
        }
        cursor = pos;
    }
    push(cursor, hi, depth as u32);

    if segments.first().map_or(true, |s| s.label != 0) {
        segments.insert(0, Segment { start: lo, end: lo, label: 0 });
    }
    if segments.last().map_or(true, |s| s.label != 0) {
        segments.push(Segment { start: hi, end: hi, label: 0 });
    }
    ProjectionSequence {
        feature: piece.feature,
        part: piece.part,
        axis,
        segments,
    }
}

/// Multi-rectangle features have to go through [`decompose_multipin`] first.
pub fn projection_sequence_of_feature(
    feature_index: usize,
    feature: &Feature,
    neighbors: &[&[Rect]],
    dis_m: Coord,
) -> Result<ProjectionSequence, StitchError> {
    if feature.rects.len() != 1 {
        return Err(StitchError::MultiPin {
            feature: feature_index,
            rects: feature.rects.len(),
        });
    }
    let piece = TwoPin {
        feature: feature_index,
        part: 0,
        rect: feature.rects[0],
    };
    Ok(compute_projection_sequence(&piece, neighbors, dis_m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StitchKind {
    Dpl,
    Lost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StitchCandidate {
    pub feature: usize,
    pub part: usize,
    pub axis: Axis,
    pub position: Coord,
    /// Index of the segment the stitch sits in.
    pub segment: usize,
    pub kind: StitchKind,
}

const REDUNDANT_PATTERN: [u32; 5] = [0, 1, 0, 1, 0];

/// Segment indices whose candidate the redundant rule removes.
fn redundant_segments(labels: &[u32]) -> BTreeSet<usize> {
    let m = labels.len();
    let mut out = BTreeSet::new();
    if m >= 5 {
        if labels[..5] == REDUNDANT_PATTERN {
            out.insert(2);
        }
        if labels[m - 5..] == REDUNDANT_PATTERN {
            out.insert(m - 3);
        }
    }
    out
}

/// Candidates a DPL flow would emit: midpoints of interior zero segments.
pub fn dpl_candidates(ps: &ProjectionSequence) -> Vec<StitchCandidate> {
    let m = ps.segments.len();
    ps.segments
        .iter()
        .enumerate()
        .filter(|&(i, s)| i > 0 && i + 1 < m && s.label == 0 && s.len() >= 2)
        .map(|(i, s)| candidate(ps, i, s.midpoint(), StitchKind::Dpl))
        .collect()
}

/// Drops candidates made unnecessary by a `01010` prefix or suffix.
pub fn remove_redundant(ps: &ProjectionSequence, candidates: Vec<StitchCandidate>) -> Vec<StitchCandidate> {
    let drop = redundant_segments(&ps.labels());
    candidates
        .into_iter()
        .filter(|c| !(c.kind == StitchKind::Dpl && drop.contains(&c.segment)))
        .collect()
}

/// One lost stitch per sequence bunch (maximal run of at least three
/// non-zero segments) containing a local dip `x > y < z`. The deepest dip
/// wins, leftmost on ties.
pub fn lost_candidates(ps: &ProjectionSequence) -> Vec<StitchCandidate> {
    let labels = ps.labels();
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        if labels[i] == 0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < labels.len() && labels[i] != 0 {
            i += 1;
        }
        let end = i; // bunch is start..end
        if end - start < 3 {
            continue;
        }
        let dip = (start + 1..end - 1)
            .filter(|&j| labels[j - 1] > labels[j] && labels[j + 1] > labels[j])
            .filter(|&j| ps.segments[j].len() >= 2)
            .min_by_key(|&j| (labels[j], j));
        if let Some(j) = dip {
            out.push(candidate(ps, j, ps.segments[j].midpoint(), StitchKind::Lost));
        }
    }
    out
}

fn candidate(ps: &ProjectionSequence, segment: usize, position: Coord, kind: StitchKind) -> StitchCandidate {
    StitchCandidate {
        feature: ps.feature,
        part: ps.part,
        axis: ps.axis,
        position,
        segment,
        kind,
    }
}

/// Keeps at most `cap` candidates: lost stitches first, then DPL ones, each
/// group in position order. Output is sorted by `(part, position)`.
pub fn cap_candidates(mut candidates: Vec<StitchCandidate>, cap: usize) -> Vec<StitchCandidate> {
    candidates.sort_by_key(|c| (c.kind != StitchKind::Lost, c.part, c.position));
    candidates.truncate(cap);
    candidates.sort_by_key(|c| (c.part, c.position));
    candidates
}

/// All TPL stitch candidates of one sequence: DPL candidates minus the
/// redundant ones, plus lost stitches, capped at `max_per_feature`.
pub fn generate_stitch_candidates(ps: &ProjectionSequence, max_per_feature: usize) -> Vec<StitchCandidate> {
    let mut all = remove_redundant(ps, dpl_candidates(ps));
    all.extend(lost_candidates(ps));
    cap_candidates(all, max_per_feature)
}

/// Removes every candidate that sits on a cut-vertex feature.
pub fn forbid_cut_vertex_stitches(
    candidates: Vec<StitchCandidate>,
    cut_vertices: &BTreeSet<usize>,
) -> Vec<StitchCandidate> {
    candidates
        .into_iter()
        .filter(|c| !cut_vertices.contains(&c.feature))
        .collect()
}

/// Debug line `feature_id: 01212101010` for each sequence.
pub fn format_sequences<'a>(
    sequences: impl IntoIterator<Item = &'a ProjectionSequence>,
    feature_id: impl Fn(usize) -> &'a str,
) -> String {
    let mut out = String::new();
    for ps in sequences {
        out.push_str(feature_id(ps.feature));
        if ps.part > 0 {
            out.push_str(&format!("#{}", ps.part));
        }
        out.push_str(": ");
        out.push_str(&ps.to_string());
        out.push('\n');
    }
    out
}
