// SPDX-License-Identifier: Apache-2.0

//! Decomposition graph over feature fragments, vertex clustering and the
//! fast color assignment trial.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::geometry::{fragment_bin_density, rects_distance_sq, Coord, DensityGrid, DensityVector, LayoutSpec, Rect};
use crate::layout_graph::LayoutGraph;
use crate::stitch::StitchCandidate;

/// Mask index, `0..3`.
pub type Color = u8;

pub const COLORS: usize = 3;

/// One color per decomposition-graph vertex.
pub type Coloring = Vec<Color>;

/// Identifies a fragment independently of any particular graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FragmentKey {
    pub feature: usize,
    pub index: usize,
}

/// Colors keyed by fragment; used to combine results from several graphs.
pub type FragmentColors = BTreeMap<FragmentKey, Color>;

#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    pub feature: usize,
    pub index: usize,
    pub rects: Vec<Rect>,
    pub density: DensityVector,
}

impl Fragment {
    pub fn key(&self) -> FragmentKey {
        FragmentKey {
            feature: self.feature,
            index: self.index,
        }
    }
}

/// A graph vertex: one fragment, or several after clustering.
#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    /// Member fragment ids, ascending; the first is the representative.
    pub members: Vec<usize>,
    pub density: DensityVector,
}

impl Vertex {
    pub fn representative(&self) -> usize {
        self.members[0]
    }
}

/// Edge multiplicities keyed by `(u, v)` with `u < v`.
pub type EdgeCounts = BTreeMap<(usize, usize), u32>;

fn ordered(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionGraph {
    pub fragments: Vec<Fragment>,
    pub vertices: Vec<Vertex>,
    /// Conflict edges between vertices. Clustering can raise multiplicities.
    pub conflicts: EdgeCounts,
    /// Stitch edges between vertices.
    pub stitches: EdgeCounts,
    /// Fragment id to the representative fragment of its vertex.
    pub cluster_map: Vec<usize>,
    vertex_of: Vec<usize>,
}

/// Per-vertex neighbor multiplicities.
pub type Adjacency = Vec<BTreeMap<usize, u32>>;

impl DecompositionGraph {
    /// Unclustered graph: one vertex per fragment. Edge endpoints are
    /// fragment ids; duplicates add up.
    pub fn from_fragments(
        fragments: Vec<Fragment>,
        conflicts: impl IntoIterator<Item = (usize, usize)>,
        stitches: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let n = fragments.len();
        let vertices = fragments
            .iter()
            .enumerate()
            .map(|(i, f)| Vertex {
                members: vec![i],
                density: f.density.clone(),
            })
            .collect();
        let mut c = EdgeCounts::new();
        for (u, v) in conflicts {
            assert!(u != v && u < n && v < n, "bad conflict edge ({u}, {v})");
            *c.entry(ordered(u, v)).or_default() += 1;
        }
        let mut s = EdgeCounts::new();
        for (u, v) in stitches {
            assert!(u != v && u < n && v < n, "bad stitch edge ({u}, {v})");
            *s.entry(ordered(u, v)).or_default() += 1;
        }
        DecompositionGraph {
            fragments,
            vertices,
            conflicts: c,
            stitches: s,
            cluster_map: (0..n).collect(),
            vertex_of: (0..n).collect(),
        }
    }

    /// Geometry-free graph for tests and synthetic studies: vertex `i` is
    /// fragment 0 of feature `i`.
    pub fn abstract_graph(
        densities: Vec<DensityVector>,
        conflicts: impl IntoIterator<Item = (usize, usize)>,
        stitches: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let fragments = densities
            .into_iter()
            .enumerate()
            .map(|(i, density)| Fragment {
                feature: i,
                index: 0,
                rects: Vec::new(),
                density,
            })
            .collect();
        Self::from_fragments(fragments, conflicts, stitches)
    }

    /// `n` vertices without density.
    pub fn plain(
        n: usize,
        conflicts: impl IntoIterator<Item = (usize, usize)>,
        stitches: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        Self::abstract_graph(vec![DensityVector::new(); n], conflicts, stitches)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_of(&self, fragment: usize) -> usize {
        self.vertex_of[fragment]
    }

    pub fn conflict_adjacency(&self) -> Adjacency {
        adjacency(self.vertices.len(), &self.conflicts)
    }

    pub fn stitch_adjacency(&self) -> Adjacency {
        adjacency(self.vertices.len(), &self.stitches)
    }

    pub fn is_clustered(&self) -> bool {
        self.vertices.len() != self.fragments.len()
    }

    /// Sub-graph on the fragments of `features` (unclustered graphs only).
    pub fn induced(&self, features: &BTreeSet<usize>) -> DecompositionGraph {
        assert!(!self.is_clustered(), "induce before clustering");
        let keep: Vec<usize> = (0..self.fragments.len())
            .filter(|&i| features.contains(&self.fragments[i].feature))
            .collect();
        let mut new_id = vec![usize::MAX; self.fragments.len()];
        for (k, &i) in keep.iter().enumerate() {
            new_id[i] = k;
        }
        let remap = |edges: &EdgeCounts| -> Vec<(usize, usize)> {
            edges
                .iter()
                .filter(|((u, v), _)| new_id[*u] != usize::MAX && new_id[*v] != usize::MAX)
                .flat_map(|(&(u, v), &m)| std::iter::repeat((new_id[u], new_id[v])).take(m as usize))
                .collect()
        };
        let fragments = keep.iter().map(|&i| self.fragments[i].clone()).collect();
        DecompositionGraph::from_fragments(fragments, remap(&self.conflicts), remap(&self.stitches))
    }

    /// Spreads a per-vertex coloring over member fragments.
    pub fn expand(&self, coloring: &[Color]) -> FragmentColors {
        self.vertices
            .iter()
            .zip(coloring)
            .flat_map(|(v, &c)| v.members.iter().map(move |&f| (self.fragments[f].key(), c)))
            .collect()
    }

    /// Per-vertex coloring read back from fragment colors; missing entries
    /// default to color 0.
    pub fn restrict(&self, colors: &FragmentColors) -> Coloring {
        self.vertices
            .iter()
            .map(|v| colors.get(&self.fragments[v.representative()].key()).copied().unwrap_or(0))
            .collect()
    }
}

fn adjacency(n: usize, edges: &EdgeCounts) -> Adjacency {
    let mut adj = vec![BTreeMap::new(); n];
    for (&(u, v), &m) in edges {
        adj[u].insert(v, m);
        adj[v].insert(u, m);
    }
    adj
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Result of cutting one feature at its stitch candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSplit {
    /// Geometry of each fragment, in fragment-index order.
    pub fragments: Vec<Vec<Rect>>,
    /// `(left fragment, right fragment)` per accepted candidate.
    pub stitches: Vec<(usize, usize)>,
    pub accepted: Vec<StitchCandidate>,
}

/// Pieces of `rects` after cutting at `cuts` (sorted), as
/// `(part, rect)`; plus for every cut the piece ids on either side.
fn cut_pieces(rects: &[Rect], cuts: &[StitchCandidate]) -> (Vec<(usize, Rect)>, Vec<(usize, usize)>) {
    let mut pieces = Vec::new();
    let mut sides = Vec::new();
    for (part, r) in rects.iter().enumerate() {
        let mut rest = *r;
        for c in cuts.iter().filter(|c| c.part == part) {
            let (lo, hi) = c.axis.cut(&rest, c.position);
            pieces.push((part, lo));
            sides.push((pieces.len() - 1, pieces.len()));
            rest = hi;
        }
        pieces.push((part, rest));
    }
    (pieces, sides)
}

fn piece_sets(pieces: &[(usize, Rect)]) -> DisjointSets {
    let mut ds = DisjointSets::new(pieces.len());
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            if pieces[i].0 != pieces[j].0 && pieces[i].1.connects(&pieces[j].1) {
                ds.union(i, j);
            }
        }
    }
    ds
}

fn cut_is_inside(rects: &[Rect], c: &StitchCandidate) -> bool {
    rects.get(c.part).is_some_and(|r| {
        let (lo, hi, _, _) = c.axis.split(r);
        lo < c.position && c.position < hi
    })
}

/// Cuts a feature at its candidates. A candidate is dropped when it lies
/// outside its piece or when both sides stay connected through another
/// rectangle of the same feature (a junction).
pub fn split_feature(rects: &[Rect], candidates: &[StitchCandidate]) -> FeatureSplit {
    let mut accepted: Vec<StitchCandidate> = candidates
        .iter()
        .filter(|c| cut_is_inside(rects, c))
        .filter(|c| {
            let (pieces, sides) = cut_pieces(rects, std::slice::from_ref(c));
            let mut ds = piece_sets(&pieces);
            let (l, r) = sides[0];
            ds.find(l) != ds.find(r)
        })
        .copied()
        .collect();
    accepted.sort_by_key(|c| (c.part, c.position));
    accepted.dedup_by_key(|c| (c.part, c.position));

    let (pieces, sides) = cut_pieces(rects, &accepted);
    let mut ds = piece_sets(&pieces);
    let mut fragment_of_root = BTreeMap::new();
    let mut fragment_of_piece = Vec::with_capacity(pieces.len());
    for i in 0..pieces.len() {
        let root = ds.find(i);
        let next = fragment_of_root.len();
        fragment_of_piece.push(*fragment_of_root.entry(root).or_insert(next));
    }
    let mut fragments = vec![Vec::new(); fragment_of_root.len()];
    for (i, (_, r)) in pieces.iter().enumerate() {
        fragments[fragment_of_piece[i]].push(*r);
    }
    let stitches = sides
        .iter()
        .map(|&(l, r)| (fragment_of_piece[l], fragment_of_piece[r]))
        .collect();
    FeatureSplit {
        fragments,
        stitches,
        accepted,
    }
}

/// Fragments every feature of `graph` at its candidates and links them with
/// conflict edges (fragments of different, adjacent features closer than
/// `dis_m`) and one stitch edge per accepted candidate.
///
/// Returns the graph and the accepted candidates.
pub fn build_decomposition_graph(
    spec: &LayoutSpec,
    graph: &LayoutGraph,
    candidates: &[StitchCandidate],
    grid: &DensityGrid,
    dis_m: Coord,
) -> (DecompositionGraph, Vec<StitchCandidate>) {
    let mut by_feature: BTreeMap<usize, Vec<StitchCandidate>> = BTreeMap::new();
    for c in candidates {
        by_feature.entry(c.feature).or_default().push(*c);
    }
    let mut fragments = Vec::new();
    let mut first_fragment = BTreeMap::new();
    let mut stitch_edges = Vec::new();
    let mut accepted = Vec::new();
    for f in graph.vertices() {
        let split = split_feature(&spec.features[f].rects, by_feature.get(&f).map_or(&[], Vec::as_slice));
        let base = fragments.len();
        first_fragment.insert(f, (base, split.fragments.len()));
        stitch_edges.extend(split.stitches.iter().map(|&(a, b)| (base + a, base + b)));
        accepted.extend(split.accepted);
        for (index, rects) in split.fragments.into_iter().enumerate() {
            let density = fragment_bin_density(&rects, grid);
            fragments.push(Fragment {
                feature: f,
                index,
                rects,
                density,
            });
        }
    }
    let limit = (dis_m as i128) * (dis_m as i128);
    let mut conflict_edges = Vec::new();
    for (fa, fb) in graph.edges() {
        let (a0, na) = first_fragment[&fa];
        let (b0, nb) = first_fragment[&fb];
        for a in a0..a0 + na {
            for b in b0..b0 + nb {
                if rects_distance_sq(&fragments[a].rects, &fragments[b].rects) < limit {
                    conflict_edges.push((a, b));
                }
            }
        }
    }
    (
        DecompositionGraph::from_fragments(fragments, conflict_edges, stitch_edges),
        accepted,
    )
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Merges vertices that are interchangeable for every coloring objective
/// without density: equal conflict neighborhoods (multiplicities up to a
/// common factor) and no stitch edge leaving the group. Such vertices can
/// always share a color at no extra cost, so the optimum is preserved.
/// Repeats until nothing changes.
pub fn cluster_vertices(g: &DecompositionGraph) -> DecompositionGraph {
    let mut g = g.clone();
    loop {
        let conf = g.conflict_adjacency();
        let stit = g.stitch_adjacency();
        let mut groups: BTreeMap<Vec<(usize, u32)>, Vec<usize>> = BTreeMap::new();
        for (v, nbrs) in conf.iter().enumerate() {
            let k = nbrs.values().copied().fold(0, gcd).max(1);
            let key = nbrs.iter().map(|(&u, &m)| (u, m / k)).collect();
            groups.entry(key).or_default().push(v);
        }
        let mut group_of = vec![usize::MAX; g.vertices.len()];
        for (gi, members) in groups.values().enumerate() {
            for &v in members {
                group_of[v] = gi;
            }
        }
        let mut ds = DisjointSets::new(g.vertices.len());
        let mut merged_any = false;
        for members in groups.values().filter(|m| m.len() > 1) {
            let eligible: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&v| stit[v].keys().all(|&u| group_of[u] == group_of[v]))
                .collect();
            for w in eligible.windows(2) {
                ds.union(w[0], w[1]);
                merged_any = true;
            }
        }
        if !merged_any {
            return g;
        }
        g = contract(&g, &mut ds);
    }
}

fn contract(g: &DecompositionGraph, ds: &mut DisjointSets) -> DecompositionGraph {
    let n = g.vertices.len();
    let mut new_id = vec![0; n];
    // vertex order follows the smallest member fragment
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| g.vertices[v].representative());
    let roots: Vec<usize> = (0..n).map(|v| ds.find(v)).collect();
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &v in &order {
        by_root.entry(roots[v]).or_default().push(v);
    }
    let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
    groups.sort_by_key(|vs| vs.iter().map(|&v| g.vertices[v].representative()).min());
    let mut vertices = Vec::with_capacity(groups.len());
    for (k, vs) in groups.iter().enumerate() {
        let mut members: Vec<usize> = vs.iter().flat_map(|&v| g.vertices[v].members.iter().copied()).collect();
        members.sort_unstable();
        let density = vs
            .iter()
            .fold(DensityVector::new(), |acc, &v| acc.add(&g.vertices[v].density));
        vertices.push(Vertex { members, density });
        for &v in vs {
            new_id[v] = k;
        }
    }
    let remap = |edges: &EdgeCounts| {
        let mut out = EdgeCounts::new();
        for (&(u, v), &m) in edges {
            let (a, b) = (new_id[u], new_id[v]);
            if a != b {
                *out.entry(ordered(a, b)).or_default() += m;
            }
        }
        out
    };
    let mut vertex_of = vec![0; g.fragments.len()];
    let mut cluster_map = vec![0; g.fragments.len()];
    for (k, v) in vertices.iter().enumerate() {
        for &f in &v.members {
            vertex_of[f] = k;
            cluster_map[f] = v.representative();
        }
    }
    DecompositionGraph {
        fragments: g.fragments.clone(),
        vertices,
        conflicts: remap(&g.conflicts),
        stitches: remap(&g.stitches),
        cluster_map,
        vertex_of,
    }
}

/// Peels vertices with conflict degree below 3 and stitch degree below 2
/// (smallest id first). If the whole graph peels away, vertices are colored
/// in reverse order with the lowest color that avoids every colored
/// conflict neighbor and agrees with the colored stitch neighbor.
///
/// Returns `None` when the peeling stalls or a popped vertex has no such
/// color; the result then is not guaranteed free of conflicts and stitches.
pub fn fast_color_trial(g: &DecompositionGraph) -> Option<Coloring> {
    let n = g.vertices.len();
    let conf = g.conflict_adjacency();
    let stit = g.stitch_adjacency();
    let mut conf_deg: Vec<usize> = conf.iter().map(BTreeMap::len).collect();
    let mut stit_deg: Vec<usize> = stit.iter().map(BTreeMap::len).collect();
    let mut removed = vec![false; n];
    let eligible = |c: usize, s: usize| c < 3 && s < 2;
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| eligible(conf_deg[v], stit_deg[v])).collect();
    let mut stack = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        removed[v] = true;
        stack.push(v);
        for &u in conf[v].keys() {
            if !removed[u] {
                conf_deg[u] -= 1;
                if eligible(conf_deg[u], stit_deg[u]) {
                    ready.insert(u);
                }
            }
        }
        for &u in stit[v].keys() {
            if !removed[u] {
                stit_deg[u] -= 1;
                if eligible(conf_deg[u], stit_deg[u]) {
                    ready.insert(u);
                }
            }
        }
    }
    if stack.len() < n {
        return None;
    }
    let mut color: Vec<Option<Color>> = vec![None; n];
    while let Some(v) = stack.pop() {
        let mut blocked = [false; COLORS];
        for &u in conf[v].keys() {
            if let Some(c) = color[u] {
                blocked[c as usize] = true;
            }
        }
        let required: Option<Color> = stit[v].keys().find_map(|&u| color[u]);
        let pick = match required {
            Some(c) if !blocked[c as usize] => Some(c),
            Some(_) => None,
            None => (0..COLORS as Color).find(|&c| !blocked[c as usize]),
        };
        color[v] = Some(pick?);
    }
    Some(color.into_iter().map(|c| c.expect("every vertex popped")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stitch::{Axis, StitchKind};

    fn k(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }

    fn cut(part: usize, axis: Axis, position: Coord) -> StitchCandidate {
        StitchCandidate {
            feature: 0,
            part,
            axis,
            position,
            segment: 0,
            kind: StitchKind::Dpl,
        }
    }

    #[test]
    fn straight_wire_split_in_two() {
        let rects = [Rect::new(0, 0, 100, 20)];
        let s = split_feature(&rects, &[cut(0, Axis::Horizontal, 40)]);
        assert_eq!(s.fragments, vec![vec![Rect::new(0, 0, 40, 20)], vec![Rect::new(40, 0, 100, 20)]]);
        assert_eq!(s.stitches, vec![(0, 1)]);
    }

    #[test]
    fn junction_cut_is_dropped() {
        // L shape; cutting the horizontal arm inside the corner keeps it connected
        let rects = [Rect::new(0, 0, 100, 20), Rect::new(80, 0, 100, 100)];
        let s = split_feature(&rects, &[cut(0, Axis::Horizontal, 90)]);
        assert!(s.accepted.is_empty());
        assert_eq!(s.fragments.len(), 1);
        let s = split_feature(&rects, &[cut(0, Axis::Horizontal, 40)]);
        assert_eq!(s.accepted.len(), 1);
        assert_eq!(s.fragments.len(), 2);
        assert_eq!(s.fragments[1], vec![Rect::new(40, 0, 100, 20), Rect::new(80, 0, 100, 100)]);
    }

    #[test]
    fn trial_on_path_and_k4() {
        let path = DecompositionGraph::plain(5, (1..5).map(|i| (i - 1, i)), []);
        let c = fast_color_trial(&path).unwrap();
        assert!(path.conflicts.keys().all(|&(u, v)| c[u] != c[v]));
        assert!(fast_color_trial(&DecompositionGraph::plain(4, k(4), [])).is_none());
    }

    #[test]
    fn trial_reports_stuck_pop() {
        // v0 has two conflict neighbors on distinct colors and a stitch to a
        // third vertex forced onto one of those colors.
        let g = DecompositionGraph::plain(4, [(0, 1), (0, 2), (1, 2), (2, 3)], [(0, 3)]);
        if let Some(c) = fast_color_trial(&g) {
            assert!(g.conflicts.keys().all(|&(u, v)| c[u] != c[v]));
            assert!(g.stitches.keys().all(|&(u, v)| c[u] == c[v]));
        }
    }

    #[test]
    fn clustering_examples() {
        let tri = DecompositionGraph::plain(3, k(3), []);
        assert_eq!(cluster_vertices(&tri).vertex_count(), 3);

        let two = DecompositionGraph::plain(2, [], []);
        let c = cluster_vertices(&two);
        assert_eq!(c.vertex_count(), 1);
        assert_eq!(c.cluster_map, vec![0, 0]);

        // a and d1 both see exactly {b, c}
        let g = DecompositionGraph::plain(4, [(0, 1), (0, 2), (3, 1), (3, 2), (1, 2)], []);
        let c = cluster_vertices(&g);
        assert_eq!(c.vertex_count(), 3);
        assert_eq!(c.vertex_of(0), c.vertex_of(3));
        assert_eq!(c.conflicts.values().copied().max(), Some(2));
        for &f in &c.cluster_map {
            assert_eq!(c.cluster_map[f], f);
        }
    }
}
