// SPDX-License-Identifier: Apache-2.0

//! Rounding a relaxed solution to three masks: threshold-driven merging of
//! vertices, a mapping graph over the merged groups, and a three-way
//! max-cut on that graph (exhaustive for small graphs, FM passes otherwise).

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::{Color, Coloring, DecompositionGraph, COLORS};
use crate::geometry::DensityVector;
use crate::metrics::du_sum_of_parts;

/// Disjoint sets over vertices with an incompatibility relation between
/// sets.
#[derive(Clone, Debug)]
pub struct MergeState {
    parent: Vec<usize>,
    rank: Vec<u8>,
    incompatible: Vec<BTreeSet<usize>>,
    /// Separations requested for pairs already in one set.
    pub tensions: Vec<(usize, usize)>,
    /// Unions refused because the sets were incompatible.
    pub refused_unions: Vec<(usize, usize)>,
}

impl MergeState {
    pub fn new(n: usize) -> Self {
        MergeState {
            parent: (0..n).collect(),
            rank: vec![0; n],
            incompatible: vec![BTreeSet::new(); n],
            tensions: Vec::new(),
            refused_unions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Root lookup without path compression.
    pub fn root(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    pub fn are_incompatible(&mut self, i: usize, j: usize) -> bool {
        let (ri, rj) = (self.find(i), self.find(j));
        self.incompatible[ri].contains(&rj)
    }

    /// Joins the sets of `i` and `j` unless they are incompatible.
    /// Returns whether the two now share a set.
    pub fn union(&mut self, i: usize, j: usize) -> bool {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri == rj {
            return true;
        }
        if self.incompatible[ri].contains(&rj) {
            self.refused_unions.push((i, j));
            return false;
        }
        let (keep, gone) = match self.rank[ri].cmp(&self.rank[rj]) {
            std::cmp::Ordering::Less => (rj, ri),
            std::cmp::Ordering::Greater => (ri, rj),
            std::cmp::Ordering::Equal => {
                self.rank[ri] += 1;
                (ri, rj)
            }
        };
        self.parent[gone] = keep;
        let moved = std::mem::take(&mut self.incompatible[gone]);
        for other in moved {
            self.incompatible[other].remove(&gone);
            self.incompatible[other].insert(keep);
            self.incompatible[keep].insert(other);
        }
        true
    }

    /// Marks the sets of `i` and `j` incompatible unless they are already
    /// one set (then the request is recorded as a tension).
    pub fn separate(&mut self, i: usize, j: usize) -> bool {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri == rj {
            self.tensions.push((i, j));
            return false;
        }
        self.incompatible[ri].insert(rj);
        self.incompatible[rj].insert(ri);
        true
    }

    /// Sets as sorted member lists, ordered by smallest member.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..self.len() {
            by_root.entry(self.root(v)).or_default().push(v);
        }
        let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
        groups.sort_by_key(|g| g[0]);
        groups
    }
}

/// Sorts every off-diagonal entry of `x` in descending order (ties by
/// `(i, j)`) and applies union above `th_union`, separation below
/// `th_separate`.
pub fn threshold_merge(x: &DMatrix<f64>, th_union: f64, th_separate: f64) -> MergeState {
    let n = x.nrows();
    let mut triplets: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (0.5 * (x[(i, j)] + x[(j, i)]), i, j))
        .filter(|&(v, _, _)| v > th_union || v < th_separate)
        .collect();
    triplets.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut ms = MergeState::new(n);
    for (v, i, j) in triplets {
        if v > th_union {
            ms.union(i, j);
        } else {
            ms.separate(i, j);
        }
    }
    ms
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapNode {
    /// Decomposition-graph vertices in this group.
    pub members: Vec<usize>,
    pub density: DensityVector,
}

/// Graph over merged groups; an edge weight is the cost of giving both
/// endpoints the same mask, so a heavier cut is better.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MappingGraph {
    pub nodes: Vec<MapNode>,
    pub edges: BTreeMap<(usize, usize), f64>,
    pub incompatible: BTreeSet<(usize, usize)>,
}

impl MappingGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.edges.get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0)
    }

    /// Total weight of edges whose endpoints lie in different parts.
    pub fn cut_value(&self, parts: &[Color]) -> f64 {
        self.edges
            .iter()
            .filter(|(&(a, b), _)| parts[a] != parts[b])
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn violations(&self, parts: &[Color]) -> usize {
        self.incompatible.iter().filter(|&&(a, b)| parts[a] == parts[b]).count()
    }

    /// Sum of per-bin density uniformity when the parts become masks.
    pub fn density_uniformity(&self, parts: &[Color]) -> f64 {
        du_sum_of_parts(self.nodes.iter().zip(parts).map(|(n, &p)| (&n.density, p)))
    }

    /// Maps a node partition back to decomposition-graph vertices.
    pub fn coloring(&self, parts: &[Color], vertex_count: usize) -> Coloring {
        let mut out = vec![0; vertex_count];
        for (node, &p) in self.nodes.iter().zip(parts) {
            for &v in &node.members {
                out[v] = p;
            }
        }
        out
    }
}

/// One node per merged group. The weight between two groups adds, over
/// the decomposition-graph edges running between them, `1` per conflict,
/// `-alpha` per stitch, and `kappa * (1/2 - X_uv)` per joined vertex pair.
pub fn build_mapping_graph(
    ms: &MergeState,
    g: &DecompositionGraph,
    x: &DMatrix<f64>,
    alpha: f64,
    kappa: f64,
) -> MappingGraph {
    let groups = ms.groups();
    let mut node_of = vec![0; ms.len()];
    for (k, members) in groups.iter().enumerate() {
        for &v in members {
            node_of[v] = k;
        }
    }
    let nodes: Vec<MapNode> = groups
        .into_iter()
        .map(|members| {
            let density = members
                .iter()
                .fold(DensityVector::new(), |acc, &v| acc.add(&g.vertices[v].density));
            MapNode { members, density }
        })
        .collect();
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(u, v), &m) in &g.conflicts {
        *pairs.entry((u, v)).or_default() += m as f64;
    }
    for (&(u, v), &m) in &g.stitches {
        *pairs.entry((u, v)).or_default() -= alpha * m as f64;
    }
    for ((u, v), base) in pairs {
        let (a, b) = (node_of[u], node_of[v]);
        if a == b {
            continue;
        }
        let w = base + kappa * (0.5 - x[(u, v)]);
        *edges.entry((a.min(b), a.max(b))).or_default() += w;
    }
    let mut incompatible = BTreeSet::new();
    for (v, &a) in node_of.iter().enumerate() {
        for &other_root in &ms.incompatible[ms.root(v)] {
            let b = node_of[other_root];
            if a != b {
                incompatible.insert((a.min(b), a.max(b)));
            }
        }
    }
    MappingGraph {
        nodes,
        edges,
        incompatible,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Part (mask) per mapping-graph node.
    pub parts: Vec<Color>,
    pub cut: f64,
    /// Incompatible pairs left in one part.
    pub violations: usize,
}

impl Partition {
    fn of(gm: &MappingGraph, parts: Vec<Color>) -> Self {
        Partition {
            cut: gm.cut_value(&parts),
            violations: gm.violations(&parts),
            parts,
        }
    }
}

const CUT_EPS: f64 = 1e-9;

/// Exhaustive three-way partition with the first node fixed to part 0 and
/// canonical part numbering. Preference: fewest violated
/// incompatibilities, then largest cut, then (when `beta > 0`) smallest
/// density-uniformity sum, then lexicographic order.
pub fn backtrack_threeway(gm: &MappingGraph, beta: f64) -> Partition {
    let n = gm.node_count();
    if n == 0 {
        return Partition {
            parts: Vec::new(),
            cut: 0.0,
            violations: 0,
        };
    }
    struct Best {
        parts: Vec<Color>,
        violations: usize,
        cut: f64,
        du: f64,
    }
    let mut best: Option<Best> = None;
    let mut parts = vec![0 as Color; n];

    fn rec(
        gm: &MappingGraph,
        beta: f64,
        i: usize,
        used: Color,
        parts: &mut Vec<Color>,
        best: &mut Option<Best>,
    ) {
        let n = parts.len();
        if i == n {
            let violations = gm.violations(parts);
            let cut = gm.cut_value(parts);
            let du = if beta > 0.0 { gm.density_uniformity(parts) } else { 0.0 };
            let better = match best {
                None => true,
                Some(b) if violations != b.violations => violations < b.violations,
                Some(b) if (cut - b.cut).abs() > CUT_EPS => cut > b.cut,
                Some(b) => beta > 0.0 && du < b.du - CUT_EPS,
            };
            if better {
                *best = Some(Best {
                    parts: parts.clone(),
                    violations,
                    cut,
                    du,
                });
            }
            return;
        }
        let limit = (used + 1).min(COLORS as Color - 1);
        for p in 0..=limit {
            parts[i] = p;
            rec(gm, beta, i + 1, used.max(p), parts, best);
        }
    }

    parts[0] = 0;
    rec(gm, beta, 1, 0, &mut parts, &mut best);
    let b = best.expect("at least one partition");
    Partition {
        parts: b.parts,
        cut: b.cut,
        violations: b.violations,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FmOptions {
    pub max_passes: usize,
    /// Extra runs from random initial partitions.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FmOptions {
    fn default() -> Self {
        FmOptions {
            max_passes: 50,
            restarts: 4,
            seed: 0,
        }
    }
}

/// Incremental bookkeeping for move gains.
struct FmState<'a> {
    gm: &'a MappingGraph,
    beta: f64,
    adj: Vec<Vec<(usize, f64)>>,
    incompat: Vec<Vec<usize>>,
    parts: Vec<Color>,
    /// Same-part weight per node and part.
    link: Vec<[f64; COLORS]>,
    /// Incompatible neighbors per node and part.
    clash: Vec<[usize; COLORS]>,
    /// Per-bin per-part density.
    bins: BTreeMap<usize, [f64; COLORS]>,
}

impl<'a> FmState<'a> {
    fn new(gm: &'a MappingGraph, beta: f64, parts: Vec<Color>) -> Self {
        let n = gm.node_count();
        let mut adj = vec![Vec::new(); n];
        for (&(a, b), &w) in &gm.edges {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        let mut incompat = vec![Vec::new(); n];
        for &(a, b) in &gm.incompatible {
            incompat[a].push(b);
            incompat[b].push(a);
        }
        let mut st = FmState {
            gm,
            beta,
            adj,
            incompat,
            parts,
            link: vec![[0.0; COLORS]; n],
            clash: vec![[0; COLORS]; n],
            bins: BTreeMap::new(),
        };
        st.recompute();
        st
    }

    fn recompute(&mut self) {
        let n = self.parts.len();
        for v in 0..n {
            let mut link = [0.0; COLORS];
            for &(u, w) in &self.adj[v] {
                link[self.parts[u] as usize] += w;
            }
            self.link[v] = link;
            let mut clash = [0; COLORS];
            for &u in &self.incompat[v] {
                clash[self.parts[u] as usize] += 1;
            }
            self.clash[v] = clash;
        }
        self.bins.clear();
        if self.beta > 0.0 {
            for (v, node) in self.gm.nodes.iter().enumerate() {
                for &(k, d) in node.density.entries() {
                    self.bins.entry(k).or_insert([0.0; COLORS])[self.parts[v] as usize] += d;
                }
            }
        }
    }

    /// Increase of the pairwise-product balance surrogate when `v` moves to `q`.
    fn balance_gain(&self, v: usize, q: usize) -> f64 {
        if self.beta <= 0.0 {
            return 0.0;
        }
        let p = self.parts[v] as usize;
        self.gm.nodes[v]
            .density
            .entries()
            .iter()
            .map(|&(k, d)| {
                let b = &self.bins[&k];
                d * (b[p] - b[q]) - d * d
            })
            .sum()
    }

    fn gain(&self, v: usize, q: usize) -> f64 {
        let p = self.parts[v] as usize;
        self.link[v][p] - self.link[v][q] + self.beta * self.balance_gain(v, q)
    }

    fn apply(&mut self, v: usize, q: usize) {
        let p = self.parts[v] as usize;
        for i in 0..self.adj[v].len() {
            let (u, w) = self.adj[v][i];
            self.link[u][p] -= w;
            self.link[u][q] += w;
        }
        for i in 0..self.incompat[v].len() {
            let u = self.incompat[v][i];
            self.clash[u][p] -= 1;
            self.clash[u][q] += 1;
        }
        if self.beta > 0.0 {
            for &(k, d) in self.gm.nodes[v].density.entries() {
                let b = self.bins.get_mut(&k).expect("bin tracked");
                b[p] -= d;
                b[q] += d;
            }
        }
        self.parts[v] = q as Color;
    }

    /// Pairwise-product balance surrogate summed over bins.
    fn balance(&self) -> f64 {
        self.bins.values().map(|b| b[0] * b[1] + b[0] * b[2] + b[1] * b[2]).sum()
    }

    /// One FM pass; returns the accepted gain.
    fn pass(&mut self) -> f64 {
        let n = self.parts.len();
        let mut locked = vec![false; n];
        let mut moves: Vec<(usize, usize)> = Vec::new();
        let mut total = 0.0;
        let mut best_total = 0.0;
        let mut best_len = 0;
        loop {
            let mut choice: Option<(f64, usize, usize)> = None;
            for v in 0..n {
                if locked[v] {
                    continue;
                }
                for q in 0..COLORS {
                    if q == self.parts[v] as usize || self.clash[v][q] > 0 {
                        continue;
                    }
                    let g = self.gain(v, q);
                    if choice.map_or(true, |(bg, _, _)| g > bg + 1e-12) {
                        choice = Some((g, v, q));
                    }
                }
            }
            let Some((g, v, q)) = choice else { break };
            let from = self.parts[v] as usize;
            self.apply(v, q);
            locked[v] = true;
            moves.push((v, from));
            total += g;
            if total > best_total + 1e-12 {
                best_total = total;
                best_len = moves.len();
            }
        }
        while moves.len() > best_len {
            let (v, from) = moves.pop().expect("non-empty");
            self.apply(v, from);
        }
        best_total
    }
}

fn greedy_initial(gm: &MappingGraph, beta: f64) -> Vec<Color> {
    let n = gm.node_count();
    let mut strength = vec![0.0; n];
    for (&(a, b), &w) in &gm.edges {
        strength[a] += w.abs();
        strength[b] += w.abs();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| strength[b].total_cmp(&strength[a]).then(a.cmp(&b)));
    let mut placed = vec![false; n];
    let mut parts = vec![0 as Color; n];
    let mut bins: BTreeMap<usize, [f64; COLORS]> = BTreeMap::new();
    for v in order {
        let mut best: Option<((usize, f64), usize)> = None;
        for q in 0..COLORS {
            let clashes = gm
                .incompatible
                .iter()
                .filter(|&&(a, b)| (a == v && placed[b] && parts[b] as usize == q) || (b == v && placed[a] && parts[a] as usize == q))
                .count();
            let same: f64 = (0..n)
                .filter(|&u| placed[u] && parts[u] as usize == q)
                .map(|u| gm.weight(u, v))
                .sum();
            let bal: f64 = if beta > 0.0 {
                gm.nodes[v]
                    .density
                    .entries()
                    .iter()
                    .map(|&(k, d)| {
                        let b = bins.get(&k).copied().unwrap_or([0.0; COLORS]);
                        d * (b.iter().sum::<f64>() - b[q])
                    })
                    .sum()
            } else {
                0.0
            };
            let score = -same + beta * bal;
            let better = match best {
                None => true,
                Some(((bc, bs), _)) => clashes < bc || (clashes == bc && score > bs + 1e-12),
            };
            if better {
                best = Some(((clashes, score), q));
            }
        }
        let q = best.expect("three parts").1;
        parts[v] = q as Color;
        placed[v] = true;
        if beta > 0.0 {
            for &(k, d) in gm.nodes[v].density.entries() {
                bins.entry(k).or_insert([0.0; COLORS])[q] += d;
            }
        }
    }
    parts
}

/// FM-style three-way max-cut: a greedy start refined by passes that move
/// each node at most once (legal moves only, best gain first) and keep the
/// best prefix. The gain of a move is the cut increase plus `beta` times
/// the increase of `sum_k (d_k1 d_k2 + d_k1 d_k3 + d_k2 d_k3)`. Further
/// runs start from seeded random partitions; the best result wins.
pub fn fm_threeway(gm: &MappingGraph, beta: f64, opts: &FmOptions) -> Partition {
    let n = gm.node_count();
    if n == 0 {
        return Partition {
            parts: Vec::new(),
            cut: 0.0,
            violations: 0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(usize, f64, Vec<Color>)> = None;
    for run in 0..=opts.restarts {
        let start = if run == 0 {
            greedy_initial(gm, beta)
        } else {
            (0..n).map(|_| rng.gen_range(0..COLORS as Color)).collect()
        };
        let mut st = FmState::new(gm, beta, start);
        for _ in 0..opts.max_passes {
            if st.pass() <= 1e-12 {
                break;
            }
        }
        let violations = gm.violations(&st.parts);
        let score = gm.cut_value(&st.parts) + beta * st.balance();
        let better = match &best {
            None => true,
            Some((bv, bs, _)) => violations < *bv || (violations == *bv && score > bs + 1e-9),
        };
        if better {
            best = Some((violations, score, st.parts.clone()));
        }
    }
    Partition::of(gm, best.expect("one run").2)
}
