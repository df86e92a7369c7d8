// SPDX-License-Identifier: Apache-2.0

//! Layout geometry: rectangles, features, the layout file format, and the
//! sliding-bin density grid.
//!
//! All coordinates are integer nanometres. Areas are computed exactly in
//! 128-bit integers; only the normalized bin densities are floating point.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::LayoutError;

pub type Coord = i64;

/// Axis-aligned rectangle `[x0, x1) x [y0, y1)`.
///
/// Serialized as the array `[x0, y0, x1, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[Coord; 4]", into = "[Coord; 4]")]
pub struct Rect {
    pub x0: Coord,
    pub y0: Coord,
    pub x1: Coord,
    pub y1: Coord,
}

impl From<[Coord; 4]> for Rect {
    fn from([x0, y0, x1, y1]: [Coord; 4]) -> Self {
        Rect { x0, y0, x1, y1 }
    }
}

impl From<Rect> for [Coord; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub const fn new(x0: Coord, y0: Coord, x1: Coord, y1: Coord) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> Coord {
        self.x1 - self.x0
    }

    pub fn height(&self) -> Coord {
        self.y1 - self.y0
    }

    pub fn is_degenerate(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    pub fn area(&self) -> i128 {
        if self.is_degenerate() {
            0
        } else {
            self.width() as i128 * self.height() as i128
        }
    }

    /// Intersection with positive area, if any.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect::new(
            self.x0.max(other.x0),
            self.y0.max(other.y0),
            self.x1.min(other.x1),
            self.y1.min(other.y1),
        );
        (!r.is_degenerate()).then_some(r)
    }

    /// True when the two rectangles overlap or share an edge of positive length.
    pub fn connects(&self, other: &Rect) -> bool {
        let ix = self.x1.min(other.x1) - self.x0.max(other.x0);
        let iy = self.y1.min(other.y1) - self.y0.max(other.y0);
        ix >= 0 && iy >= 0 && (ix > 0 || iy > 0)
    }

    /// Squared Euclidean distance between the closed rectangles.
    pub fn distance_sq(&self, other: &Rect) -> i128 {
        let dx = (other.x0 - self.x1).max(self.x0 - other.x1).max(0) as i128;
        let dy = (other.y0 - self.y1).max(self.y0 - other.y1).max(0) as i128;
        dx * dx + dy * dy
    }

    pub fn expanded(&self, d: Coord) -> Rect {
        Rect::new(self.x0 - d, self.y0 - d, self.x1 + d, self.y1 + d)
    }

    pub fn union_bbox(&self, other: &Rect) -> Rect {
        Rect::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn center2(&self) -> (Coord, Coord) {
        (self.x0 + self.x1, self.y0 + self.y1)
    }
}

/// Bounding box of a set of rectangles.
pub fn bounding_box<'a>(rects: impl IntoIterator<Item = &'a Rect>) -> Option<Rect> {
    rects.into_iter().copied().reduce(|a, b| a.union_bbox(&b))
}

/// Exact area of the union of `rects` (coordinate-compressed sweep).
pub fn union_area(rects: &[Rect]) -> i128 {
    let rects: Vec<Rect> = rects.iter().copied().filter(|r| !r.is_degenerate()).collect();
    match rects.len() {
        0 => return 0,
        1 => return rects[0].area(),
        _ => {}
    }
    let mut xs: Vec<Coord> = rects.iter().flat_map(|r| [r.x0, r.x1]).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut total = 0i128;
    let mut spans: Vec<(Coord, Coord)> = Vec::with_capacity(rects.len());
    for w in xs.windows(2) {
        let (xa, xb) = (w[0], w[1]);
        spans.clear();
        spans.extend(
            rects
                .iter()
                .filter(|r| r.x0 <= xa && r.x1 >= xb)
                .map(|r| (r.y0, r.y1)),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_unstable();
        let mut covered = 0i128;
        let (mut lo, mut hi) = spans[0];
        for &(a, b) in &spans[1..] {
            if a > hi {
                covered += (hi - lo) as i128;
                lo = a;
                hi = b;
            } else {
                hi = hi.max(b);
            }
        }
        covered += (hi - lo) as i128;
        total += covered * (xb - xa) as i128;
    }
    total
}

/// Area of `rects` inside `clip`, counting overlaps once.
pub fn clipped_union_area(rects: &[Rect], clip: &Rect) -> i128 {
    let clipped: Vec<Rect> = rects.iter().filter_map(|r| r.intersection(clip)).collect();
    union_area(&clipped)
}

/// True when the rectangles form one edge-connected region.
pub fn is_connected(rects: &[Rect]) -> bool {
    if rects.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; rects.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..rects.len() {
            if !seen[j] && rects[i].connects(&rects[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feature {
    pub id: String,
    pub rects: Vec<Rect>,
}

impl Feature {
    pub fn new(id: impl Into<String>, rects: Vec<Rect>) -> Self {
        Feature {
            id: id.into(),
            rects,
        }
    }

    /// Area of the feature (`den_i`), overlapping rectangles counted once.
    pub fn area(&self) -> i128 {
        union_area(&self.rects)
    }

    pub fn bbox(&self) -> Option<Rect> {
        bounding_box(&self.rects)
    }

    /// Minimum squared distance between the two features.
    pub fn distance_sq(&self, other: &Feature) -> i128 {
        rects_distance_sq(&self.rects, &other.rects)
    }
}

pub fn rects_distance_sq(a: &[Rect], b: &[Rect]) -> i128 {
    a.iter()
        .flat_map(|ra| b.iter().map(move |rb| ra.distance_sq(rb)))
        .min()
        .unwrap_or(i128::MAX)
}

/// A layout: process parameters plus the features to decompose.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_min: Option<Coord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_min: Option<Coord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dis_m: Option<Coord>,
    pub features: Vec<Feature>,
}

impl LayoutSpec {
    pub fn new(w_min: Coord, s_min: Coord, features: Vec<Feature>) -> Self {
        LayoutSpec {
            units: "nm".to_string(),
            w_min: Some(w_min),
            s_min: Some(s_min),
            dis_m: None,
            features,
        }
    }

    pub fn with_dis_m(dis_m: Coord, features: Vec<Feature>) -> Self {
        LayoutSpec {
            units: "nm".to_string(),
            w_min: None,
            s_min: None,
            dis_m: Some(dis_m),
            features,
        }
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.units != "nm" {
            return Err(LayoutError::Units(self.units.clone()));
        }
        for (name, value) in [("w_min", self.w_min), ("s_min", self.s_min), ("dis_m", self.dis_m)] {
            if let Some(v) = value {
                if v <= 0 {
                    return Err(LayoutError::NonPositiveParameter { name, value: v });
                }
            }
        }
        if self.dis_m.is_none() && (self.w_min.is_none() || self.s_min.is_none()) {
            return Err(LayoutError::MissingProcessParameters);
        }
        let mut ids = HashSet::with_capacity(self.features.len());
        for (i, f) in self.features.iter().enumerate() {
            if f.id.is_empty() {
                return Err(LayoutError::EmptyId(i));
            }
            if !ids.insert(f.id.as_str()) {
                return Err(LayoutError::DuplicateId(f.id.clone()));
            }
            if f.rects.is_empty() {
                return Err(LayoutError::NoRects(f.id.clone()));
            }
            for (index, r) in f.rects.iter().enumerate() {
                if r.is_degenerate() {
                    return Err(LayoutError::DegenerateRect {
                        id: f.id.clone(),
                        index,
                        rect: (*r).into(),
                    });
                }
            }
            if !is_connected(&f.rects) {
                return Err(LayoutError::Disconnected(f.id.clone()));
            }
        }
        Ok(())
    }

    pub fn bbox(&self) -> Option<Rect> {
        bounding_box(self.features.iter().flat_map(|f| f.rects.iter()))
    }

    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.features.iter().position(|f| f.id == id)
    }
}

/// Parse and validate a layout document.
pub fn parse_layout(text: &str) -> Result<LayoutSpec, LayoutError> {
    let spec: LayoutSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

/// Canonical text form of a layout; `parse_layout` reads it back unchanged.
pub fn render_layout(spec: &LayoutSpec) -> String {
    let mut out = serde_json::to_string_pretty(spec).expect("layout serializes");
    out.push('\n');
    out
}

/// Minimum coloring distance: the explicit `dis_m`, else `2*w_min + 3*s_min`.
pub fn min_coloring_distance(spec: &LayoutSpec) -> Coord {
    match (spec.dis_m, spec.w_min, spec.s_min) {
        (Some(d), _, _) => d,
        (None, Some(w), Some(s)) => 2 * w + 3 * s,
        _ => panic!("layout lacks process parameters; validate() first"),
    }
}

/// Sparse per-bin density vector, sorted by bin index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityVector(Vec<(usize, f64)>);

impl DensityVector {
    pub fn new() -> Self {
        DensityVector(Vec::new())
    }

    /// Builds from arbitrary `(bin, value)` pairs, summing duplicates and dropping zeros.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (k, v) in pairs {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += v,
                _ => out.push((k, v)),
            }
        }
        out.retain(|p| p.1 != 0.0);
        DensityVector(out)
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, bin: usize) -> f64 {
        self.0
            .binary_search_by_key(&bin, |p| p.0)
            .map(|i| self.0[i].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|p| p.1).sum()
    }

    /// `sum_k self_k * other_k`.
    pub fn dot(&self, other: &DensityVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.0[i].1 * other.0[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn add(&self, other: &DensityVector) -> DensityVector {
        let mut pairs = self.0.clone();
        pairs.extend_from_slice(&other.0);
        DensityVector::from_pairs(pairs)
    }

    pub fn bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|p| p.0)
    }
}

/// One square density window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bin {
    pub index: usize,
    pub rect: Rect,
}

/// Overlapping square bins covering the layout, with per-feature densities.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub bin_side: Coord,
    pub stride: Coord,
    /// Origin of bin column 0 / row 0.
    pub origin: (Coord, Coord),
    pub columns: usize,
    pub rows: usize,
    pub bins: Vec<Bin>,
    /// `den_ki` per feature, normalized by bin area.
    pub feature_density: Vec<DensityVector>,
}

impl DensityGrid {
    pub fn bin_area(&self) -> f64 {
        (self.bin_side as f64) * (self.bin_side as f64)
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Inclusive column (or row) index range of windows overlapping `[lo, hi)`.
    fn window_range(&self, lo: Coord, hi: Coord, origin: Coord, count: usize) -> Option<(usize, usize)> {
        if count == 0 || hi <= lo {
            return None;
        }
        // window j covers [origin + j*stride, origin + j*stride + bin_side)
        let first = (lo - origin - self.bin_side).div_euclid(self.stride) + 1;
        let last = (hi - 1 - origin).div_euclid(self.stride);
        let first = first.max(0);
        let last = last.min(count as i64 - 1);
        (first <= last).then_some((first as usize, last as usize))
    }

    /// Bins whose window overlaps `r` (positive-area overlap).
    pub fn bins_overlapping(&self, r: &Rect) -> Vec<usize> {
        let Some((c0, c1)) = self.window_range(r.x0, r.x1, self.origin.0, self.columns) else {
            return Vec::new();
        };
        let Some((r0, r1)) = self.window_range(r.y0, r.y1, self.origin.1, self.rows) else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity((c1 - c0 + 1) * (r1 - r0 + 1));
        for row in r0..=r1 {
            for col in c0..=c1 {
                out.push(row * self.columns + col);
            }
        }
        out
    }
}

/// Lays out square bins of side `bin_factor * dis_m`, advancing by
/// `bin_side * (1 - overlap)`, and computes every feature's `den_ki`.
///
/// Windows are aligned to the lower-left corner of the layout bounding box
/// and every aligned window that overlaps the box is kept, so each interior
/// point is covered by the same number of bins.
pub fn build_density_grid(spec: &LayoutSpec, bin_factor: f64, overlap: f64) -> DensityGrid {
    assert!(bin_factor > 0.0, "bin_factor must be positive");
    assert!((0.0..1.0).contains(&overlap), "overlap must lie in [0, 1)");
    let dis_m = min_coloring_distance(spec);
    let bin_side = ((bin_factor * dis_m as f64).round() as Coord).max(1);
    let stride = ((bin_side as f64 * (1.0 - overlap)).round() as Coord).clamp(1, bin_side);
    let Some(bbox) = spec.bbox() else {
        return DensityGrid {
            bin_side,
            stride,
            origin: (0, 0),
            columns: 0,
            rows: 0,
            bins: Vec::new(),
            feature_density: vec![DensityVector::new(); spec.features.len()],
        };
    };
    let lead = (bin_side - 1) / stride; // windows starting before the box that still reach into it
    let origin = (bbox.x0 - lead * stride, bbox.y0 - lead * stride);
    let count = |lo: Coord, hi: Coord| -> usize {
        // windows j >= 0 with origin + j*stride < hi
        let span = hi - lo;
        ((span + stride - 1) / stride) as usize
    };
    let columns = count(origin.0, bbox.x1);
    let rows = count(origin.1, bbox.y1);
    let mut bins = Vec::with_capacity(columns * rows);
    for row in 0..rows {
        for col in 0..columns {
            let x0 = origin.0 + col as Coord * stride;
            let y0 = origin.1 + row as Coord * stride;
            bins.push(Bin {
                index: row * columns + col,
                rect: Rect::new(x0, y0, x0 + bin_side, y0 + bin_side),
            });
        }
    }
    let mut grid = DensityGrid {
        bin_side,
        stride,
        origin,
        columns,
        rows,
        bins,
        feature_density: Vec::new(),
    };
    grid.feature_density = spec
        .features
        .iter()
        .map(|f| fragment_bin_density(&f.rects, &grid))
        .collect();
    grid
}

/// Normalized area of a fragment (union of `rects`) inside every bin it touches.
pub fn fragment_bin_density(rects: &[Rect], grid: &DensityGrid) -> DensityVector {
    let Some(bbox) = bounding_box(rects) else {
        return DensityVector::new();
    };
    let area = grid.bin_area();
    let pairs = grid
        .bins_overlapping(&bbox)
        .into_iter()
        .filter_map(|k| {
            let covered = clipped_union_area(rects, &grid.bins[k].rect);
            (covered > 0).then(|| (k, covered as f64 / area))
        })
        .collect();
    DensityVector::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_rect_spec() -> LayoutSpec {
        LayoutSpec::new(24, 16, vec![Feature::new("a", vec![Rect::new(0, 0, 100, 40)])])
    }

    #[test]
    fn parses_single_feature() {
        let text = r#"{"units":"nm","w_min":24,"s_min":16,
            "features":[{"id":"a","rects":[[0,0,100,40]]}]}"#;
        let spec = parse_layout(text).unwrap();
        assert_eq!(spec.features.len(), 1);
        assert_eq!(spec.features[0].area(), 4000);
        assert_eq!(spec, one_rect_spec());
    }

    #[test]
    fn empty_feature_list_is_valid() {
        let spec = parse_layout(r#"{"units":"nm","dis_m":96,"features":[]}"#).unwrap();
        assert!(spec.features.is_empty());
        let grid = build_density_grid(&spec, 10.0, 0.5);
        assert!(grid.is_empty());
    }

    #[test]
    fn rejects_bad_documents() {
        let dup = r#"{"units":"nm","dis_m":96,"features":[
            {"id":"a","rects":[[0,0,10,10]]},{"id":"a","rects":[[50,0,60,10]]}]}"#;
        assert!(matches!(parse_layout(dup), Err(LayoutError::DuplicateId(id)) if id == "a"));

        let missing = r#"{"units":"nm","w_min":24,"features":[]}"#;
        assert!(matches!(parse_layout(missing), Err(LayoutError::MissingProcessParameters)));

        let zero = r#"{"units":"nm","w_min":0,"s_min":16,"features":[]}"#;
        assert!(matches!(
            parse_layout(zero),
            Err(LayoutError::NonPositiveParameter { name: "w_min", .. })
        ));

        let degenerate = r#"{"units":"nm","dis_m":96,"features":[{"id":"a","rects":[[0,0,0,10]]}]}"#;
        assert!(matches!(parse_layout(degenerate), Err(LayoutError::DegenerateRect { .. })));

        let unknown = r#"{"units":"nm","dis_m":96,"layers":[],"features":[]}"#;
        assert!(matches!(parse_layout(unknown), Err(LayoutError::Syntax { .. })));

        let split = r#"{"units":"nm","dis_m":96,"features":[
            {"id":"a","rects":[[0,0,10,10],[10,10,20,20]]}]}"#;
        assert!(matches!(parse_layout(split), Err(LayoutError::Disconnected(_))));

        match parse_layout("{\n  \"units\": \"nm\",\n  oops }") {
            Err(LayoutError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn coloring_distance() {
        assert_eq!(min_coloring_distance(&one_rect_spec()), 96);
        let mut spec = one_rect_spec();
        spec.dis_m = Some(100);
        assert_eq!(min_coloring_distance(&spec), 100);
    }

    #[test]
    fn union_area_counts_overlap_once() {
        let l = [Rect::new(0, 0, 100, 20), Rect::new(80, 0, 100, 100)];
        assert_eq!(union_area(&l), 2000 + 1600);
        let same = [Rect::new(0, 0, 10, 10), Rect::new(0, 0, 10, 10)];
        assert_eq!(union_area(&same), 100);
    }

    fn square_layout() -> LayoutSpec {
        // 960 x 960 bounding box, dis_m = 96
        LayoutSpec::with_dis_m(
            96,
            vec![
                Feature::new("lo", vec![Rect::new(0, 0, 100, 40)]),
                Feature::new("hi", vec![Rect::new(860, 920, 960, 960)]),
            ],
        )
    }

    #[test]
    fn grid_bin_counts() {
        let grid = build_density_grid(&square_layout(), 10.0, 0.0);
        assert_eq!(grid.bin_side, 960);
        assert_eq!(grid.len(), 1);

        let grid = build_density_grid(&square_layout(), 10.0, 0.5);
        assert_eq!(grid.stride, 480);
        assert_eq!((grid.columns, grid.rows), (3, 3));
        assert_eq!(grid.len(), 9);
    }

    #[test]
    fn feature_density_is_normalized_area() {
        let grid = build_density_grid(&square_layout(), 10.0, 0.0);
        assert_eq!(grid.feature_density[0].get(0), 4000.0 / 921600.0);
    }

    #[test]
    fn fragment_density_edge_cases() {
        let grid = build_density_grid(&square_layout(), 10.0, 0.0);
        let outside = fragment_bin_density(&[Rect::new(5000, 5000, 5010, 5010)], &grid);
        assert!(outside.is_empty());
        let whole = fragment_bin_density(&[grid.bins[0].rect], &grid);
        assert_eq!(whole.entries(), &[(0, 1.0)]);

        // straddles the overlapping windows at x = 480
        let grid = build_density_grid(&square_layout(), 10.0, 0.5);
        let straddle = [Rect::new(400, 600, 560, 640)];
        let v = fragment_bin_density(&straddle, &grid);
        let full = union_area(&straddle) as f64 / grid.bin_area();
        let positive: Vec<_> = v.entries().iter().filter(|p| p.1 > 0.0).collect();
        assert!(positive.len() >= 2);
        assert!(positive.iter().all(|p| p.1 <= full));
        assert!(positive.iter().any(|p| p.1 < full));
        // oracle: clip by hand against each window
        for &(k, val) in v.entries() {
            let b = grid.bins[k].rect;
            let w = (straddle[0].x1.min(b.x1) - straddle[0].x0.max(b.x0)).max(0);
            let h = (straddle[0].y1.min(b.y1) - straddle[0].y0.max(b.y0)).max(0);
            assert_eq!(val, (w * h) as f64 / grid.bin_area());
        }
    }

    #[test]
    fn half_stride_covers_every_point_four_times() {
        let spec = square_layout();
        let grid = build_density_grid(&spec, 10.0, 0.5);
        for &(x, y) in &[(0, 0), (479, 10), (480, 480), (959, 959), (300, 700)] {
            let covering = grid
                .bins
                .iter()
                .filter(|b| b.rect.x0 <= x && x < b.rect.x1 && b.rect.y0 <= y && y < b.rect.y1)
                .count();
            assert_eq!(covering, 4, "point ({x},{y})");
        }
    }
}
