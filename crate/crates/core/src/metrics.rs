// SPDX-License-Identifier: Apache-2.0

//! Coloring evaluation (conflicts, stitches, density uniformity) and an
//! exhaustive optimum for small graphs.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::decomp::{Color, Coloring, DecompositionGraph, COLORS};
use crate::error::{EvalError, OracleError};
use crate::geometry::DensityVector;

/// Guards the uniformity ratio against empty masks.
pub const DU_EPSILON: f64 = 1e-6;

/// Weight of one stitch in the reported cost.
pub const STITCH_COST: f64 = 0.1;

/// Largest graph the exhaustive oracle accepts.
pub const ORACLE_LIMIT: usize = 15;

/// `(max_c d_c + eps) / (min_c d_c + eps)`.
pub fn density_uniformity(d: [f64; COLORS]) -> f64 {
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    (max + DU_EPSILON) / (min + DU_EPSILON)
}

/// `d1 d2 + d1 d3 + d2 d3`; for a fixed total it grows as the split evens out.
pub fn pairwise_product_sum(d: [f64; COLORS]) -> f64 {
    d[0] * d[1] + d[0] * d[2] + d[1] * d[2]
}

/// Unit vector of a mask: `(1, 0)`, `(-1/2, sqrt3/2)`, `(-1/2, -sqrt3/2)`.
pub fn mask_vector(c: Color) -> [f64; 2] {
    let h = 3f64.sqrt() / 2.0;
    match c {
        0 => [1.0, 0.0],
        1 => [-0.5, h],
        _ => [-0.5, -h],
    }
}

/// Per-bin, per-mask density sums.
pub fn mask_densities<'a>(items: impl IntoIterator<Item = (&'a DensityVector, Color)>) -> BTreeMap<usize, [f64; COLORS]> {
    let mut bins: BTreeMap<usize, [f64; COLORS]> = BTreeMap::new();
    for (den, c) in items {
        for &(k, d) in den.entries() {
            bins.entry(k).or_insert([0.0; COLORS])[c as usize] += d;
        }
    }
    bins
}

/// `sum_k DU_k` over bins with non-zero total density.
pub fn du_sum_of_parts<'a>(items: impl IntoIterator<Item = (&'a DensityVector, Color)>) -> f64 {
    mask_densities(items)
        .values()
        .filter(|d| d.iter().sum::<f64>() > 0.0)
        .map(|&d| density_uniformity(d))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinUniformity {
    pub bin: usize,
    pub du: f64,
}

/// Wall time per pipeline stage, in milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub parse_and_grid: f64,
    pub layout_graph: f64,
    pub stitch_candidates: f64,
    pub decomposition_graph: f64,
    pub coloring: f64,
    pub evaluation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub conflicts: u32,
    pub stitches: u32,
    /// `conflicts + 0.1 * stitches`.
    pub cost: f64,
    pub du_per_bin: Vec<BinUniformity>,
    pub du_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<StageTimings>,
}

impl DecompositionReport {
    pub fn empty() -> Self {
        DecompositionReport {
            conflicts: 0,
            stitches: 0,
            cost: 0.0,
            du_per_bin: Vec::new(),
            du_sum: 0.0,
            runtime_ms: None,
        }
    }
}

fn check_total(g: &DecompositionGraph, c: &[Color]) -> Result<(), EvalError> {
    if c.len() != g.vertex_count() {
        return Err(EvalError::Partial {
            expected: g.vertex_count(),
            got: c.len(),
        });
    }
    if let Some((vertex, &color)) = c.iter().enumerate().find(|(_, &x)| x as usize >= COLORS) {
        return Err(EvalError::InvalidColor { vertex, color });
    }
    Ok(())
}

/// Conflicts (equal colors across a conflict edge), stitches (different
/// colors across a stitch edge), cost, and per-bin density uniformity.
pub fn evaluate_coloring(g: &DecompositionGraph, c: &[Color]) -> Result<DecompositionReport, EvalError> {
    check_total(g, c)?;
    let conflicts = g
        .conflicts
        .iter()
        .filter(|(&(u, v), _)| c[u] == c[v])
        .map(|(_, &m)| m)
        .sum();
    let stitches = g
        .stitches
        .iter()
        .filter(|(&(u, v), _)| c[u] != c[v])
        .map(|(_, &m)| m)
        .sum();
    let du_per_bin: Vec<BinUniformity> = mask_densities(g.vertices.iter().zip(c).map(|(v, &col)| (&v.density, col)))
        .into_iter()
        .filter(|(_, d)| d.iter().sum::<f64>() > 0.0)
        .map(|(bin, d)| BinUniformity {
            bin,
            du: density_uniformity(d),
        })
        .collect();
    let du_sum = du_per_bin.iter().fold(0.0, |acc, b| acc + b.du);
    Ok(DecompositionReport {
        conflicts,
        stitches,
        cost: conflicts as f64 + STITCH_COST * stitches as f64,
        du_per_bin,
        du_sum,
        runtime_ms: None,
    })
}

/// `conflicts + alpha * stitches + beta * sum_k DU_k`.
pub fn objective(g: &DecompositionGraph, c: &[Color], alpha: f64, beta: f64) -> Result<f64, EvalError> {
    let r = evaluate_coloring(g, c)?;
    let mut value = r.conflicts as f64 + alpha * r.stitches as f64;
    if beta != 0.0 {
        value += beta * r.du_sum;
    }
    Ok(value)
}

/// Exact minimizer of [`objective`] by enumeration. Colorings are generated
/// in canonical form (each vertex uses at most one color beyond those seen
/// so far), so the first vertex is fixed to color 0; the lexicographically
/// smallest optimum is returned.
pub fn brute_force_optimal(g: &DecompositionGraph, alpha: f64, beta: f64) -> Result<(Coloring, f64), OracleError> {
    let n = g.vertex_count();
    if n > ORACLE_LIMIT {
        return Err(OracleError::TooLarge {
            vertices: n,
            limit: ORACLE_LIMIT,
        });
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    // edges to earlier vertices, so partial cost is exact for the prefix
    let mut back: Vec<Vec<(usize, f64, bool)>> = vec![Vec::new(); n];
    for (&(u, v), &m) in &g.conflicts {
        back[v.max(u)].push((u.min(v), m as f64, true));
    }
    for (&(u, v), &m) in &g.stitches {
        back[v.max(u)].push((u.min(v), alpha * m as f64, false));
    }
    let active_bins = mask_densities(g.vertices.iter().map(|v| (&v.density, 0)))
        .values()
        .filter(|d| d[0] > 0.0)
        .count();
    let du_floor = beta * active_bins as f64;

    struct Search<'a> {
        g: &'a DecompositionGraph,
        back: Vec<Vec<(usize, f64, bool)>>,
        alpha: f64,
        beta: f64,
        du_floor: f64,
        colors: Vec<Color>,
        best: Option<(Vec<Color>, f64)>,
    }

    impl Search<'_> {
        fn run(&mut self, i: usize, used: Color, partial: f64) {
            let bound = partial + self.du_floor;
            if let Some((_, b)) = &self.best {
                if bound >= b - 1e-12 {
                    return;
                }
            }
            let n = self.colors.len();
            if i == n {
                let value = if self.beta != 0.0 {
                    objective(self.g, &self.colors, self.alpha, self.beta).expect("total coloring")
                } else {
                    partial
                };
                if self.best.as_ref().map_or(true, |(_, b)| value < b - 1e-12) {
                    self.best = Some((self.colors.clone(), value));
                }
                return;
            }
            let limit = (used + 1).min(COLORS as Color - 1);
            for c in 0..=limit {
                self.colors[i] = c;
                let add: f64 = self.back[i]
                    .iter()
                    .filter(|&&(u, _, is_conflict)| (self.colors[u] == c) == is_conflict)
                    .map(|&(_, w, _)| w)
                    .sum();
                self.run(i + 1, used.max(c), partial + add);
            }
        }
    }

    let mut s = Search {
        g,
        back,
        alpha,
        beta,
        du_floor,
        colors: vec![0; n],
        best: None,
    };
    s.colors[0] = 0;
    s.run(1, 0, 0.0);
    Ok(s.best.expect("search visits at least one coloring"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }

    #[test]
    fn counts() {
        let g = DecompositionGraph::plain(2, [(0, 1)], []);
        assert_eq!(evaluate_coloring(&g, &[0, 0]).unwrap().conflicts, 1);
        let s = DecompositionGraph::plain(2, [], [(0, 1)]);
        let r = evaluate_coloring(&s, &[0, 1]).unwrap();
        assert_eq!((r.stitches, r.cost), (1, 0.1));
        assert!(matches!(evaluate_coloring(&s, &[0]), Err(EvalError::Partial { .. })));
        assert!(matches!(evaluate_coloring(&s, &[0, 3]), Err(EvalError::InvalidColor { vertex: 1, color: 3 })));
    }

    #[test]
    fn oracle_examples() {
        let (_, v) = brute_force_optimal(&DecompositionGraph::plain(4, k(4), []), 0.1, 0.0).unwrap();
        assert_eq!(v, 1.0);
        let (c, v) = brute_force_optimal(&DecompositionGraph::plain(3, k(3), []), 0.1, 0.0).unwrap();
        assert_eq!((c, v), (vec![0, 1, 2], 0.0));
        let (c, v) = brute_force_optimal(&DecompositionGraph::plain(2, [], [(0, 1)]), 0.1, 0.0).unwrap();
        assert_eq!((c, v), (vec![0, 0], 0.0));
        assert!(brute_force_optimal(&DecompositionGraph::plain(16, [], []), 0.1, 0.0).is_err());
    }

    #[test]
    fn oracle_with_density_balances() {
        let den = DensityVector::from_pairs(vec![(0, 0.2)]);
        let g = DecompositionGraph::abstract_graph(vec![den.clone(), den.clone(), den], [], []);
        let (c, _) = brute_force_optimal(&g, 0.1, 0.04).unwrap();
        assert_eq!(c, vec![0, 1, 2]);
    }

    #[test]
    fn uniformity_skips_empty_bins() {
        assert!((density_uniformity([0.1, 0.1, 0.1]) - 1.0).abs() < 1e-12);
        assert_eq!(du_sum_of_parts(std::iter::empty()), 0.0);
    }
}
