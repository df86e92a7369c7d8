// SPDX-License-Identifier: Apache-2.0

//! Feature-level conflict graph and the graph simplifications that run
//! before any coloring: independent components, low-degree peeling, cut
//! vertices and biconnected blocks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::geometry::{Coord, LayoutSpec};

/// Undirected simple graph over feature indices.
///
/// Vertex ids are positions in [`LayoutSpec::features`]; subgraphs keep the
/// global ids so results from different parts can be stitched together.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LayoutGraph {
    adjacency: BTreeMap<usize, BTreeSet<usize>>,
}

impl LayoutGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Graph with vertices `0..n` and the given edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = LayoutGraph::new();
        for v in 0..n {
            g.add_vertex(v);
        }
        for (u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn add_vertex(&mut self, v: usize) {
        self.adjacency.entry(v).or_default();
    }

    /// Adds an undirected edge; self-loops are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize) {
        if u == v {
            self.add_vertex(u);
            return;
        }
        self.adjacency.entry(u).or_default().insert(v);
        self.adjacency.entry(v).or_default().insert(u);
    }

    pub fn remove_vertex(&mut self, v: usize) -> Option<BTreeSet<usize>> {
        let nbrs = self.adjacency.remove(&v)?;
        for u in &nbrs {
            if let Some(s) = self.adjacency.get_mut(u) {
                s.remove(&v);
            }
        }
        Some(nbrs)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.adjacency.contains_key(&v)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.get(&u).is_some_and(|s| s.contains(&v))
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.get(&v).into_iter().flatten().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency.get(&v).map_or(0, BTreeSet::len)
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(&u, s)| s.range(u + 1..).map(move |&v| (u, v)))
    }

    /// Subgraph induced by `keep`; ids not in the graph are ignored.
    pub fn induced(&self, keep: &BTreeSet<usize>) -> LayoutGraph {
        let adjacency = self
            .adjacency
            .iter()
            .filter(|(v, _)| keep.contains(v))
            .map(|(&v, s)| (v, s.intersection(keep).copied().collect()))
            .collect();
        LayoutGraph { adjacency }
    }

    /// Edge-list dump: a header line with the vertex count, then one `u v`
    /// line per edge, using positions in the sorted vertex list.
    pub fn to_edge_list(&self) -> String {
        let pos: HashMap<usize, usize> = self.vertices().enumerate().map(|(i, v)| (v, i)).collect();
        let mut out = format!("{}\n", self.vertex_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{} {}", pos[&u], pos[&v]);
        }
        out
    }

    /// Reads the format written by [`LayoutGraph::to_edge_list`].
    pub fn from_edge_list(text: &str) -> Option<LayoutGraph> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines.next()?.parse().ok()?;
        let mut g = LayoutGraph::from_edges(n, []);
        for line in lines {
            let mut it = line.split_whitespace();
            let u: usize = it.next()?.parse().ok()?;
            let v: usize = it.next()?.parse().ok()?;
            if u >= n || v >= n || it.next().is_some() {
                return None;
            }
            g.add_edge(u, v);
        }
        Some(g)
    }
}

/// Conflict graph of a layout: an edge joins two features whose minimum
/// Euclidean distance is strictly below `dis_m`.
pub fn build_layout_graph(spec: &LayoutSpec, dis_m: Coord) -> LayoutGraph {
    let mut g = LayoutGraph::new();
    for i in 0..spec.features.len() {
        g.add_vertex(i);
    }
    if dis_m <= 0 {
        return g;
    }
    let cell = dis_m;
    let cell_of = |c: Coord| c.div_euclid(cell);
    // Bucket every rectangle into the hash cells its extent touches.
    let mut buckets: HashMap<(Coord, Coord), Vec<(usize, usize)>> = HashMap::new();
    for (fi, f) in spec.features.iter().enumerate() {
        for (ri, r) in f.rects.iter().enumerate() {
            for cx in cell_of(r.x0)..=cell_of(r.x1) {
                for cy in cell_of(r.y0)..=cell_of(r.y1) {
                    buckets.entry((cx, cy)).or_default().push((fi, ri));
                }
            }
        }
    }
    let limit = (dis_m as i128) * (dis_m as i128);
    for (fi, f) in spec.features.iter().enumerate() {
        for r in &f.rects {
            let q = r.expanded(dis_m);
            for cx in cell_of(q.x0)..=cell_of(q.x1) {
                for cy in cell_of(q.y0)..=cell_of(q.y1) {
                    let Some(list) = buckets.get(&(cx, cy)) else { continue };
                    for &(fj, rj) in list {
                        if fj <= fi || g.has_edge(fi, fj) {
                            continue;
                        }
                        let other = &spec.features[fj].rects[rj];
                        if r.distance_sq(other) < limit {
                            g.add_edge(fi, fj);
                        }
                    }
                }
            }
        }
    }
    g
}

/// Connected components as induced subgraphs, ordered by smallest vertex.
pub fn split_independent_components(g: &LayoutGraph) -> Vec<LayoutGraph> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in g.vertices() {
        if !seen.insert(start) {
            continue;
        }
        let mut members = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for u in g.neighbors(v) {
                if seen.insert(u) {
                    members.insert(u);
                    stack.push(u);
                }
            }
        }
        out.push(g.induced(&members));
    }
    out
}

/// A vertex peeled off during low-degree simplification together with its
/// neighbors at the moment of removal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Removed {
    pub vertex: usize,
    pub neighbors: Vec<usize>,
}

/// Removal order; pop from the back to recolor.
pub type RemovalStack = Vec<Removed>;

/// Repeatedly removes a vertex of degree at most two (smallest id first)
/// until none is left. Returns the remaining core and the removal stack.
pub fn simplify_low_degree(g: &LayoutGraph) -> (LayoutGraph, RemovalStack) {
    let mut core = g.clone();
    let mut ready: BTreeSet<usize> = core.vertices().filter(|&v| core.degree(v) <= 2).collect();
    let mut stack = Vec::new();
    while let Some(v) = ready.pop_first() {
        let nbrs = core.remove_vertex(v).expect("queued vertex is present");
        for &u in &nbrs {
            if core.degree(u) <= 2 {
                ready.insert(u);
            }
        }
        stack.push(Removed {
            vertex: v,
            neighbors: nbrs.into_iter().collect(),
        });
    }
    (core, stack)
}

struct DfsFrame {
    vertex: usize,
    parent: Option<usize>,
    next: usize,
}

/// Articulation points, by iterative depth-first low-link.
pub fn find_cut_vertices(g: &LayoutGraph) -> BTreeSet<usize> {
    let verts: Vec<usize> = g.vertices().collect();
    let index: HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let adj: Vec<Vec<usize>> = verts.iter().map(|&v| g.neighbors(v).map(|u| index[&u]).collect()).collect();
    let n = verts.len();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut cut = vec![false; n];
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        let mut root_children = 0;
        let mut stack = vec![DfsFrame { vertex: root, parent: None, next: 0 }];
        while let Some(top) = stack.last_mut() {
            let v = top.vertex;
            if top.next < adj[v].len() {
                let u = adj[v][top.next];
                top.next += 1;
                if disc[u] == usize::MAX {
                    disc[u] = time;
                    low[u] = time;
                    time += 1;
                    stack.push(DfsFrame { vertex: u, parent: Some(v), next: 0 });
                } else if Some(u) != top.parent {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                let parent = top.parent;
                stack.pop();
                if let Some(p) = parent {
                    low[p] = low[p].min(low[v]);
                    if p == root {
                        root_children += 1;
                    } else if low[v] >= disc[p] {
                        cut[p] = true;
                    }
                }
            }
        }
        if root_children >= 2 {
            cut[root] = true;
        }
    }
    (0..n).filter(|&i| cut[i]).map(|i| verts[i]).collect()
}

/// A biconnected block (or an isolated vertex).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub vertices: BTreeSet<usize>,
    pub edges: Vec<(usize, usize)>,
}

/// Two blocks sharing a cut vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockJoin {
    pub a: usize,
    pub b: usize,
    pub cut_vertex: usize,
}

/// Biconnected decomposition plus the tree (forest, for disconnected
/// inputs) recording which cut vertex joins which pair of blocks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockDecomposition {
    pub blocks: Vec<Block>,
    pub joins: Vec<BlockJoin>,
}

/// Splits `g` into biconnected blocks (Hopcroft–Tarjan edge stack).
///
/// Blocks are ordered by their smallest edge. Blocks that share a cut
/// vertex are joined as a star centred on the first of them, which keeps the
/// join structure a forest.
pub fn split_biconnected(g: &LayoutGraph) -> BlockDecomposition {
    let verts: Vec<usize> = g.vertices().collect();
    let index: HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let adj: Vec<Vec<usize>> = verts.iter().map(|&v| g.neighbors(v).map(|u| index[&u]).collect()).collect();
    let n = verts.len();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut time = 0;
    let mut edge_stack: Vec<(usize, usize)> = Vec::new();
    let mut raw: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut isolated = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        if adj[root].is_empty() {
            isolated.push(root);
            disc[root] = time;
            time += 1;
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        let mut stack = vec![DfsFrame { vertex: root, parent: None, next: 0 }];
        while let Some(top) = stack.last_mut() {
            let v = top.vertex;
            if top.next < adj[v].len() {
                let u = adj[v][top.next];
                top.next += 1;
                if disc[u] == usize::MAX {
                    edge_stack.push((v, u));
                    disc[u] = time;
                    low[u] = time;
                    time += 1;
                    stack.push(DfsFrame { vertex: u, parent: Some(v), next: 0 });
                } else if Some(u) != top.parent && disc[u] < disc[v] {
                    edge_stack.push((v, u));
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                let parent = top.parent;
                stack.pop();
                if let Some(p) = parent {
                    low[p] = low[p].min(low[v]);
                    if low[v] >= disc[p] {
                        let mut block = Vec::new();
                        while let Some(e) = edge_stack.pop() {
                            block.push(e);
                            if e == (p, v) {
                                break;
                            }
                        }
                        raw.push(block);
                    }
                }
            }
        }
    }

    let mut blocks: Vec<Block> = raw
        .into_iter()
        .map(|es| {
            let mut edges: Vec<(usize, usize)> = es
                .into_iter()
                .map(|(a, b)| {
                    let (a, b) = (verts[a], verts[b]);
                    (a.min(b), a.max(b))
                })
                .collect();
            edges.sort_unstable();
            edges.dedup();
            let vertices = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
            Block { vertices, edges }
        })
        .chain(isolated.into_iter().map(|i| Block {
            vertices: BTreeSet::from([verts[i]]),
            edges: Vec::new(),
        }))
        .collect();
    blocks.sort_by(|a, b| {
        let ka = a.edges.first().copied().unwrap_or((*a.vertices.first().unwrap(), usize::MAX));
        let kb = b.edges.first().copied().unwrap_or((*b.vertices.first().unwrap(), usize::MAX));
        ka.cmp(&kb)
    });

    let mut containing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (bi, b) in blocks.iter().enumerate() {
        for &v in &b.vertices {
            containing.entry(v).or_default().push(bi);
        }
    }
    let joins = containing
        .into_iter()
        .filter(|(_, bs)| bs.len() > 1)
        .flat_map(|(v, bs)| {
            let hub = bs[0];
            bs[1..]
                .iter()
                .map(move |&b| BlockJoin { a: hub, b, cut_vertex: v })
                .collect::<Vec<_>>()
        })
        .collect();
    BlockDecomposition { blocks, joins }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Feature, Rect};

    fn path(n: usize) -> LayoutGraph {
        LayoutGraph::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    fn complete(n: usize) -> LayoutGraph {
        LayoutGraph::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    #[test]
    fn distance_threshold_is_strict() {
        let squares = |gap: Coord| {
            LayoutSpec::with_dis_m(
                96,
                vec![
                    Feature::new("a", vec![Rect::new(0, 0, 40, 40)]),
                    Feature::new("b", vec![Rect::new(40 + gap, 0, 80 + gap, 40)]),
                ],
            )
        };
        assert_eq!(build_layout_graph(&squares(50), 96).edge_count(), 1);
        assert_eq!(build_layout_graph(&squares(96), 96).edge_count(), 0);
        assert_eq!(build_layout_graph(&squares(95), 96).edge_count(), 1);
    }

    #[test]
    fn diagonal_distance_uses_euclidean_metric() {
        // corner gaps (60, 80) and (60, 79): exactly 100 and just under
        let spec = LayoutSpec::with_dis_m(
            100,
            vec![
                Feature::new("a", vec![Rect::new(0, 0, 10, 10)]),
                Feature::new("b", vec![Rect::new(70, 90, 80, 100)]),
                Feature::new("c", vec![Rect::new(-69, -88, -60, -79)]),
            ],
        );
        let g = build_layout_graph(&spec, 100);
        assert!(!g.has_edge(0, 1));
        assert!(g.has_edge(0, 2));
    }

    #[test]
    fn components() {
        let g = LayoutGraph::from_edges(5, []);
        assert_eq!(split_independent_components(&g).len(), 5);
        let g = LayoutGraph::from_edges(4, [(0, 1), (1, 2), (0, 2)]);
        let parts = split_independent_components(&g);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].vertex_count(), 3);
        assert_eq!(parts[1].vertex_count(), 1);
    }

    #[test]
    fn low_degree_peeling() {
        let (core, stack) = simplify_low_degree(&path(10));
        assert!(core.is_empty());
        assert_eq!(stack.len(), 10);

        let (core, stack) = simplify_low_degree(&complete(4));
        assert_eq!(core, complete(4));
        assert!(stack.is_empty());
    }

    #[test]
    fn cut_vertices() {
        assert_eq!(find_cut_vertices(&path(3)), BTreeSet::from([1]));
        let c4 = LayoutGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(find_cut_vertices(&c4).is_empty());
        let bowtie = LayoutGraph::from_edges(5, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)]);
        assert_eq!(find_cut_vertices(&bowtie), BTreeSet::from([0]));
    }

    #[test]
    fn blocks_of_bowtie_and_cycle() {
        let bowtie = LayoutGraph::from_edges(5, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)]);
        let d = split_biconnected(&bowtie);
        assert_eq!(d.blocks.len(), 2);
        assert_eq!(d.joins, vec![BlockJoin { a: 0, b: 1, cut_vertex: 0 }]);

        let c5 = LayoutGraph::from_edges(5, (0..5).map(|i| (i, (i + 1) % 5)));
        let d = split_biconnected(&c5);
        assert_eq!(d.blocks.len(), 1);
        assert!(d.joins.is_empty());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = LayoutGraph::from_edges(4, [(0, 1), (2, 3), (1, 3)]);
        let text = g.to_edge_list();
        assert!(text.starts_with("4\n"));
        assert_eq!(LayoutGraph::from_edge_list(&text), Some(g));
    }
}
