// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use trimask::decomp::{cluster_vertices, fast_color_trial, split_feature, Color};
use trimask::geometry::{build_density_grid, fragment_bin_density, union_area, DensityVector};
use trimask::layout_graph::{build_layout_graph, find_cut_vertices, simplify_low_degree, LayoutGraph};
use trimask::mapping::{backtrack_threeway, fm_threeway, threshold_merge, FmOptions, MapNode, MappingGraph, MergeState};
use trimask::metrics::{brute_force_optimal, evaluate_coloring, objective};
use trimask::recovery::merge_component_colorings;
use trimask::sdp::{assemble_cost_matrix, check_sdp_feasibility, solve_sdp, SdpSettings};
use trimask::stitch::{compute_projection_sequence, dpl_candidates, remove_redundant, Axis, ProjectionSequence, Segment, TwoPin};
use trimask::{parse_layout, render_layout, DecompositionGraph, Feature, FragmentKey, LayoutSpec, Rect};

fn arb_rect() -> impl Strategy<Value = Rect> {
    (-500i64..500, -500i64..500, 1i64..300, 1i64..300).prop_map(|(x, y, w, h)| Rect::new(x, y, x + w, y + h))
}

/// Features made of one rectangle each, ids `f0`, `f1`, ...
fn arb_layout(max: usize) -> impl Strategy<Value = LayoutSpec> {
    (prop::collection::vec(arb_rect(), 0..max), 20i64..150).prop_map(|(rects, dis_m)| {
        let features = rects
            .into_iter()
            .enumerate()
            .map(|(i, r)| Feature::new(format!("f{i}"), vec![r]))
            .collect();
        LayoutSpec::with_dis_m(dis_m, features)
    })
}

fn arb_graph(max_n: usize) -> impl Strategy<Value = DecompositionGraph> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let m = pairs.len();
        (
            prop::collection::vec(0u8..6, m),
            prop::collection::vec(prop::option::of((0usize..4, 0.001f64..0.05)), n),
        )
            .prop_map(move |(kinds, dens)| {
                let conflicts: Vec<_> = pairs.iter().zip(&kinds).filter(|(_, &k)| k < 2).map(|(p, _)| *p).collect();
                let stitches: Vec<_> = pairs.iter().zip(&kinds).filter(|(_, &k)| k == 2).map(|(p, _)| *p).collect();
                let densities = dens
                    .into_iter()
                    .map(|d| d.map_or_else(DensityVector::new, |(b, v)| DensityVector::from_pairs(vec![(b, v)])))
                    .collect();
                DecompositionGraph::abstract_graph(densities, conflicts, stitches)
            })
    })
}

fn arb_mapping_graph() -> impl Strategy<Value = MappingGraph> {
    (2usize..=7).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let m = pairs.len();
        (prop::collection::vec(-1.0f64..3.0, m), prop::collection::vec(0u8..8, m)).prop_map(move |(w, inc)| {
            let nodes = (0..n)
                .map(|i| MapNode {
                    members: vec![i],
                    density: DensityVector::new(),
                })
                .collect();
            let edges: BTreeMap<_, _> = pairs.iter().copied().zip(w).collect();
            // a few incompatible pairs, never more than a triangle can honor
            let incompatible: BTreeSet<_> = pairs
                .iter()
                .zip(inc)
                .filter(|&(&(a, b), k)| k == 0 && a < 3 && b < 3)
                .map(|(p, _)| *p)
                .collect();
            MappingGraph {
                nodes,
                edges,
                incompatible,
            }
        })
    })
}

fn labels_sequence(labels: &[u32]) -> ProjectionSequence {
    let segments = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| Segment {
            start: 100 * i as i64,
            end: 100 * (i as i64 + 1),
            label,
        })
        .collect();
    ProjectionSequence {
        feature: 0,
        part: 0,
        axis: Axis::Horizontal,
        segments,
    }
}

fn relabel(c: &[Color], perm: [Color; 3]) -> Vec<Color> {
    c.iter().map(|&x| perm[x as usize]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn layout_json_round_trips(spec in arb_layout(12)) {
        let back = parse_layout(&render_layout(&spec)).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn conflict_edges_grow_with_distance(spec in arb_layout(15), extra in 1i64..80) {
        let dis_m = spec.dis_m.unwrap();
        let near = build_layout_graph(&spec, dis_m);
        let far = build_layout_graph(&spec, dis_m + extra);
        for (u, v) in near.edges() {
            prop_assert!(far.has_edge(u, v));
        }
    }

    #[test]
    fn layout_graph_matches_pairwise_distances(spec in arb_layout(15)) {
        let dis_m = spec.dis_m.unwrap();
        let g = build_layout_graph(&spec, dis_m);
        let limit = (dis_m as i128).pow(2);
        for i in 0..spec.features.len() {
            for j in i + 1..spec.features.len() {
                let d = spec.features[i].rects[0].distance_sq(&spec.features[j].rects[0]);
                prop_assert_eq!(g.has_edge(i, j), d < limit);
            }
        }
    }

    #[test]
    fn stitch_split_conserves_area(len in 200i64..3000, width in 10i64..60, cuts in prop::collection::vec(1i64..100, 0..4)) {
        let rect = Rect::new(0, 0, len, width);
        let feature = Feature::new("a", vec![rect]);
        let mut positions: Vec<i64> = cuts.iter().map(|c| c * len / 100).filter(|&p| p > 0 && p < len).collect();
        positions.sort_unstable();
        positions.dedup();
        let candidates: Vec<_> = positions
            .iter()
            .map(|&position| trimask::stitch::StitchCandidate {
                feature: 0,
                part: 0,
                axis: Axis::Horizontal,
                position,
                segment: 0,
                kind: trimask::stitch::StitchKind::Dpl,
            })
            .collect();
        let split = split_feature(&feature.rects, &candidates);
        let total: i128 = split.fragments.iter().map(|f| union_area(f)).sum();
        prop_assert_eq!(total, rect.area());
        prop_assert_eq!(split.fragments.len(), positions.len() + 1);
    }

    #[test]
    fn redundant_removal_is_idempotent(labels in prop::collection::vec(0u32..3, 3..14)) {
        let mut labels = labels;
        labels.dedup();
        labels.insert(0, 0);
        if *labels.last().unwrap() != 0 {
            labels.push(0);
        }
        let ps = labels_sequence(&labels);
        let once = remove_redundant(&ps, dpl_candidates(&ps));
        let twice = remove_redundant(&ps, once.clone());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn each_neighbor_adds_at_most_one(n in 1usize..6, len in 300i64..2000) {
        let piece = TwoPin { feature: 0, part: 0, rect: Rect::new(0, 0, len, 20) };
        // n copies of the same neighbor feature, each split into two rects above and below
        let rects = [Rect::new(0, 60, len, 80), Rect::new(0, -60, len, -40)];
        let neighbors: Vec<&[Rect]> = (0..n).map(|_| &rects[..]).collect();
        let ps = compute_projection_sequence(&piece, &neighbors, 100);
        prop_assert!(ps.labels().iter().all(|&l| l as usize <= n));
    }

    #[test]
    fn density_grid_covers_every_point_equally(spec in arb_layout(8)) {
        prop_assume!(!spec.features.is_empty());
        let grid = build_density_grid(&spec, 10.0, 0.5);
        for f in &spec.features {
            let d = fragment_bin_density(&f.rects, &grid);
            let covered = d.total() * grid.bin_area() as f64;
            // every point sits in exactly four windows
            prop_assert!((covered - 4.0 * f.rects[0].area() as f64).abs() < 1e-6 * covered.max(1.0));
        }
    }

    #[test]
    fn evaluation_ignores_color_names(g in arb_graph(9), seed in any::<u64>()) {
        let n = g.vertex_count();
        let c: Vec<Color> = (0..n).map(|i| ((seed >> (2 * (i % 32))) % 3) as Color).collect();
        let base = evaluate_coloring(&g, &c).unwrap();
        for perm in [[1, 2, 0], [2, 1, 0], [0, 2, 1]] {
            let r = evaluate_coloring(&g, &relabel(&c, perm)).unwrap();
            prop_assert_eq!(r.conflicts, base.conflicts);
            prop_assert_eq!(r.stitches, base.stitches);
            prop_assert!((r.du_sum - base.du_sum).abs() < 1e-9);
        }
    }

    #[test]
    fn fast_trial_success_is_clean(g in arb_graph(12)) {
        if let Some(c) = fast_color_trial(&g) {
            let r = evaluate_coloring(&g, &c).unwrap();
            prop_assert_eq!((r.conflicts, r.stitches), (0, 0));
        }
    }

    #[test]
    fn clustering_preserves_the_optimum(g in arb_graph(8)) {
        let raw = g.clone();
        let clustered = cluster_vertices(&g);
        let (_, direct) = brute_force_optimal(&raw, 0.1, 0.0).unwrap();
        let (best, _) = brute_force_optimal(&clustered, 0.1, 0.0).unwrap();
        let lifted = raw.restrict(&clustered.expand(&best));
        let through = objective(&raw, &lifted, 0.1, 0.0).unwrap();
        prop_assert!((through - direct).abs() < 1e-9, "{} vs {}", through, direct);
    }

    #[test]
    fn oracle_beats_every_coloring(g in arb_graph(7), seed in any::<u64>()) {
        let n = g.vertex_count();
        let c: Vec<Color> = (0..n).map(|i| ((seed >> (2 * i)) % 3) as Color).collect();
        let (_, best) = brute_force_optimal(&g, 0.1, 0.04).unwrap();
        prop_assert!(best <= objective(&g, &c, 0.1, 0.04).unwrap() + 1e-12);
    }

    #[test]
    fn relaxation_is_feasible_and_a_lower_bound(g in arb_graph(7)) {
        let cost = assemble_cost_matrix(&g, 0.1, 0.0);
        let sol = solve_sdp(&cost, &SdpSettings::default());
        prop_assert!(check_sdp_feasibility(&sol.x, &cost.conflicts, 1e-6).passed);
        prop_assert!(sol.lower_bound <= sol.objective + 1e-9);
        let (best, _) = brute_force_optimal(&g, 0.1, 0.0).unwrap();
        let discrete = trimask::sdp::inner(&cost.entries, &trimask::sdp::coloring_matrix(&best));
        prop_assert!(sol.lower_bound <= discrete + 1e-6);
    }

    #[test]
    fn union_never_joins_incompatible(ops in prop::collection::vec((0usize..8, 0usize..8, any::<bool>()), 1..30)) {
        let mut ms = MergeState::new(8);
        let mut separated = Vec::new();
        for (a, b, join) in ops {
            if join {
                ms.union(a, b);
            } else if ms.separate(a, b) {
                separated.push((a, b));
            }
        }
        for (a, b) in separated {
            prop_assert_ne!(ms.find(a), ms.find(b));
        }
    }

    #[test]
    fn threshold_merge_respects_thresholds(vals in prop::collection::vec(-0.5f64..1.0, 6)) {
        let mut x = nalgebra::DMatrix::identity(4, 4);
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for (&(i, j), &v) in pairs.iter().zip(&vals) {
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
        let mut ms = threshold_merge(&x, 0.9, -0.4);
        for &(i, j) in &pairs {
            if x[(i, j)] < -0.4 && ms.find(i) != ms.find(j) {
                prop_assert!(ms.are_incompatible(i, j));
            }
        }
    }

    #[test]
    fn backtracking_matches_enumeration(gm in arb_mapping_graph()) {
        let n = gm.node_count();
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for code in 0..3usize.pow(n as u32) {
            let parts: Vec<Color> = (0..n).map(|i| (code / 3usize.pow(i as u32) % 3) as Color).collect();
            let key = (gm.violations(&parts), gm.cut_value(&parts));
            if key.0 < best.0 || (key.0 == best.0 && key.1 > best.1) {
                best = key;
            }
        }
        let p = backtrack_threeway(&gm, 0.0);
        prop_assert_eq!(p.violations, best.0);
        prop_assert!((p.cut - best.1).abs() < 1e-9);
    }

    #[test]
    fn fm_result_admits_no_improving_move(gm in arb_mapping_graph()) {
        let p = fm_threeway(&gm, 0.0, &FmOptions::default());
        prop_assert_eq!(p.violations, 0);
        let legal = |parts: &[Color]| gm.violations(parts) == 0;
        for v in 0..gm.node_count() {
            for to in 0..3 {
                let mut moved = p.parts.clone();
                moved[v] = to;
                if legal(&moved) {
                    prop_assert!(gm.cut_value(&moved) <= p.cut + 1e-9);
                }
            }
        }
    }

    #[test]
    fn merge_aligns_any_relabeling(perm_idx in 0usize..6, c in prop::collection::vec(0u8..3, 4)) {
        // a path 0-1-2 (block A) joined at vertex 2 to 2-3 (block B)
        let key = |f: usize| FragmentKey { feature: f, index: 0 };
        let perms = trimask::recovery::PERMUTATIONS;
        let a: trimask::decomp::FragmentColors = (0..3).map(|f| (key(f), c[f])).collect();
        let p = perms[perm_idx];
        let b: trimask::decomp::FragmentColors = [(key(2), p[c[2] as usize]), (key(3), p[c[3] as usize])].into();
        let joins = [trimask::layout_graph::BlockJoin { a: 0, b: 1, cut_vertex: 2 }];
        let merged = merge_component_colorings(&[a, b], &joins, |_| DensityVector::new(), false);
        // block B is relabeled so its shared vertex agrees, keeping B's own relation
        prop_assert_eq!(merged[&key(2)], c[2]);
        prop_assert_eq!(merged[&key(3)] == merged[&key(2)], c[3] == c[2]);
    }

    #[test]
    fn peeling_leaves_only_high_degree(edges in prop::collection::vec((0usize..10, 0usize..10), 0..30)) {
        let edges: Vec<_> = edges.into_iter().filter(|(a, b)| a != b).collect();
        let g = LayoutGraph::from_edges(10, edges);
        let (core, stack) = simplify_low_degree(&g);
        prop_assert_eq!(core.vertex_count() + stack.len(), 10);
        for v in core.vertices() {
            prop_assert!(core.degree(v) >= 3);
        }
        let cuts = find_cut_vertices(&g);
        for v in cuts {
            let mut h = g.clone();
            h.remove_vertex(v);
            let before = trimask::layout_graph::split_independent_components(&g).len();
            let after = trimask::layout_graph::split_independent_components(&h).len();
            prop_assert!(after > before);
        }
    }
}
