// SPDX-License-Identifier: Apache-2.0

//! Putting simplified-away pieces back: recoloring peeled vertices and
//! combining per-part colorings by color permutation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::decomp::{Color, DecompositionGraph, FragmentColors, FragmentKey, COLORS};
use crate::geometry::DensityVector;
use crate::layout_graph::{BlockJoin, RemovalStack};
use crate::metrics::density_uniformity;

/// Running per-bin, per-mask density of the fragments colored so far.
#[derive(Clone, Debug, Default)]
pub struct MaskDensity {
    bins: BTreeMap<usize, [f64; COLORS]>,
}

impl MaskDensity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bins(bins: BTreeMap<usize, [f64; COLORS]>) -> Self {
        MaskDensity { bins }
    }

    pub fn add(&mut self, den: &DensityVector, c: Color) {
        for &(k, d) in den.entries() {
            self.bins.entry(k).or_insert([0.0; COLORS])[c as usize] += d;
        }
    }

    /// `sum DU_k` over the bins `items` touch, after adding them.
    pub fn du_with<'a>(&self, items: impl IntoIterator<Item = (&'a DensityVector, Color)>) -> f64 {
        let mut touched: BTreeMap<usize, [f64; COLORS]> = BTreeMap::new();
        for (den, c) in items {
            for &(k, d) in den.entries() {
                let e = touched
                    .entry(k)
                    .or_insert_with(|| self.bins.get(&k).copied().unwrap_or([0.0; COLORS]));
                e[c as usize] += d;
            }
        }
        touched
            .values()
            .filter(|d| d.iter().sum::<f64>() > 0.0)
            .map(|&d| density_uniformity(d))
            .sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecoveryStats {
    pub recovered: usize,
    /// Vertices for which every color clashed with a colored neighbor.
    pub forced: Vec<usize>,
}

/// Pops the removal stack (last removed first) and colors each feature's
/// fragments. Colors of conflicting fragments of the snapshot neighbors are
/// forbidden; among the remaining colors the one with the smallest density
/// uniformity over the touched bins wins when `balance` is set, otherwise
/// the lowest index. If no color is legal (only possible when a neighbor
/// was split by a stitch) the color with the fewest conflicts is used and
/// the vertex is reported in [`RecoveryStats::forced`].
///
/// `g` must be the unclustered graph covering the stacked features.
pub fn recover_removed_vertices(
    stack: &RemovalStack,
    g: &DecompositionGraph,
    colors: &mut FragmentColors,
    balance: bool,
) -> RecoveryStats {
    let mut frags_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, f) in g.fragments.iter().enumerate() {
        frags_of.entry(f.feature).or_default().push(i);
    }
    let conf = g.conflict_adjacency();
    let mut density = MaskDensity::new();
    if balance {
        for f in &g.fragments {
            if let Some(&c) = colors.get(&f.key()) {
                density.add(&f.density, c);
            }
        }
    }
    let mut stats = RecoveryStats::default();
    for removed in stack.iter().rev() {
        let mine = frags_of.get(&removed.vertex).cloned().unwrap_or_default();
        let snapshot: BTreeSet<usize> = removed.neighbors.iter().copied().collect();
        let mut clashes = [0usize; COLORS];
        for &fi in &mine {
            for &nb in conf[g.vertex_of(fi)].keys() {
                let frag = &g.fragments[g.vertices[nb].representative()];
                if !snapshot.contains(&frag.feature) {
                    continue;
                }
                if let Some(&c) = colors.get(&frag.key()) {
                    clashes[c as usize] += 1;
                }
            }
        }
        let fewest = *clashes.iter().min().expect("three colors");
        if fewest > 0 {
            stats.forced.push(removed.vertex);
        }
        let candidates: Vec<Color> = (0..COLORS as Color).filter(|&c| clashes[c as usize] == fewest).collect();
        let pick = if balance && candidates.len() > 1 {
            let mut best = (f64::INFINITY, candidates[0]);
            for &c in &candidates {
                let du = density.du_with(mine.iter().map(|&fi| (&g.fragments[fi].density, c)));
                if du < best.0 - 1e-12 {
                    best = (du, c);
                }
            }
            best.1
        } else {
            candidates[0]
        };
        for &fi in &mine {
            colors.insert(g.fragments[fi].key(), pick);
            if balance {
                density.add(&g.fragments[fi].density, pick);
            }
        }
        stats.recovered += 1;
    }
    stats
}

/// The six permutations of three colors, identity first.
pub const PERMUTATIONS: [[Color; COLORS]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Combines part colorings. Parts linked by `joins` are visited breadth
/// first from the largest part of each tree; every child is relabeled by
/// the color permutation that agrees with the fragments already fixed
/// (the shared cut vertex) and, with `balance`, gives the smallest density
/// uniformity over its bins. Unlinked parts are only balanced.
pub fn merge_component_colorings(
    parts: &[FragmentColors],
    joins: &[BlockJoin],
    density_of: impl Fn(&FragmentKey) -> DensityVector,
    balance: bool,
) -> FragmentColors {
    let n = parts.len();
    let mut adj = vec![Vec::new(); n];
    for j in joins {
        adj[j.a].push(j.b);
        adj[j.b].push(j.a);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| parts[b].len().cmp(&parts[a].len()).then(a.cmp(&b)));
    let mut visited = vec![false; n];
    let mut fixed = FragmentColors::new();
    let mut density = MaskDensity::new();
    for root in order {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(p) = queue.pop_front() {
            place(&parts[p], &mut fixed, &mut density, &density_of, balance);
            for &q in &adj[p] {
                if !visited[q] {
                    visited[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    fixed
}

fn place(
    part: &FragmentColors,
    fixed: &mut FragmentColors,
    density: &mut MaskDensity,
    density_of: &impl Fn(&FragmentKey) -> DensityVector,
    balance: bool,
) {
    let dens: Vec<(FragmentKey, Color, DensityVector)> = if balance {
        part.iter().map(|(k, &c)| (*k, c, density_of(k))).collect()
    } else {
        part.iter().map(|(k, &c)| (*k, c, DensityVector::new())).collect()
    };
    let mut best: Option<(usize, f64, [Color; COLORS])> = None;
    for perm in PERMUTATIONS {
        let mismatches = part
            .iter()
            .filter(|(k, &c)| fixed.get(k).is_some_and(|&f| f != perm[c as usize]))
            .count();
        let du = if balance {
            density.du_with(
                dens.iter()
                    .filter(|(k, _, _)| !fixed.contains_key(k))
                    .map(|(_, c, d)| (d, perm[*c as usize])),
            )
        } else {
            0.0
        };
        let better = match best {
            None => true,
            Some((bm, bd, _)) => mismatches < bm || (mismatches == bm && du < bd - 1e-12),
        };
        if better {
            best = Some((mismatches, du, perm));
        }
    }
    let perm = best.expect("six permutations").2;
    for (k, c, d) in dens {
        if fixed.contains_key(&k) {
            continue;
        }
        let mapped = perm[c as usize];
        fixed.insert(k, mapped);
        if balance {
            density.add(&d, mapped);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout_graph::Removed;

    fn key(feature: usize) -> FragmentKey {
        FragmentKey { feature, index: 0 }
    }

    #[test]
    fn forced_single_color() {
        let g = DecompositionGraph::plain(3, [(0, 2), (1, 2)], []);
        let mut colors = FragmentColors::from([(key(0), 0), (key(1), 1)]);
        let stack = vec![Removed { vertex: 2, neighbors: vec![0, 1] }];
        let stats = recover_removed_vertices(&stack, &g, &mut colors, false);
        assert_eq!(colors[&key(2)], 2);
        assert!(stats.forced.is_empty());
    }

    #[test]
    fn balance_picks_lighter_mask() {
        // bin 0 holds (5, 1, 1) units on masks (0, 1, 2)
        let unit = |x: f64| DensityVector::from_pairs(vec![(0, x)]);
        let g = DecompositionGraph::abstract_graph(vec![unit(0.05), unit(0.01), unit(0.01), unit(0.01)], [], []);
        let mut colors = FragmentColors::from([(key(0), 0), (key(1), 1), (key(2), 2)]);
        let stack = vec![Removed { vertex: 3, neighbors: vec![] }];
        recover_removed_vertices(&stack, &g, &mut colors, true);
        assert_eq!(colors[&key(3)], 1);
    }

    #[test]
    fn empty_stack_is_identity() {
        let g = DecompositionGraph::plain(1, [], []);
        let mut colors = FragmentColors::from([(key(0), 2)]);
        recover_removed_vertices(&Vec::new(), &g, &mut colors, true);
        assert_eq!(colors, FragmentColors::from([(key(0), 2)]));
    }

    #[test]
    fn rotation_aligns_shared_vertex() {
        // triangles {0,1,2} and {0,3,4} share vertex 0
        let left = FragmentColors::from([(key(0), 0), (key(1), 1), (key(2), 2)]);
        let right = FragmentColors::from([(key(0), 1), (key(3), 0), (key(4), 2)]);
        let joins = [BlockJoin { a: 0, b: 1, cut_vertex: 0 }];
        let merged = merge_component_colorings(&[left, right], &joins, |_| DensityVector::new(), false);
        assert_eq!(merged[&key(0)], 0);
        assert_ne!(merged[&key(3)], merged[&key(4)]);
        assert_ne!(merged[&key(3)], 0);
        assert_ne!(merged[&key(4)], 0);
    }
}
