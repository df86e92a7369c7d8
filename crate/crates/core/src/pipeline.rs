// SPDX-License-Identifier: Apache-2.0

//! End-to-end decomposition.
//!
//! Stages: density grid, layout graph, independent components, low-degree
//! peeling, cut vertices, stitch candidates, decomposition graph, then per
//! biconnected block clustering, the fast trial and, when that fails, the
//! SDP relaxation with rounding. Blocks are merged by color permutation,
//! peeled vertices recovered, and components merged.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;

use crate::decomp::{
    build_decomposition_graph, cluster_vertices, fast_color_trial, Coloring, DecompositionGraph, FragmentColors,
    FragmentKey,
};
use crate::error::{ConfigError, PipelineError};
use crate::geometry::{build_density_grid, min_coloring_distance, Coord, DensityGrid, DensityVector, LayoutSpec, Rect};
use crate::layout_graph::{
    build_layout_graph, find_cut_vertices, simplify_low_degree, split_biconnected, split_independent_components,
    LayoutGraph, RemovalStack,
};
use crate::mapping::{backtrack_threeway, build_mapping_graph, fm_threeway, threshold_merge, FmOptions};
use crate::metrics::{evaluate_coloring, DecompositionReport, StageTimings};
use crate::recovery::{merge_component_colorings, recover_removed_vertices};
use crate::sdp::{assemble_cost_matrix, solve_sdp, CostMatrix, SdpSettings};
use crate::stitch::{
    cap_candidates, compute_projection_sequence, decompose_multipin, forbid_cut_vertex_stitches,
    generate_stitch_candidates, ProjectionSequence, StitchCandidate,
};

/// Tuning knobs; defaults match the command-line defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposeConfig {
    /// Stitch weight in the relaxation and the mapping graph.
    pub alpha: f64,
    /// Density-balance weight; 0 disables every density-aware choice.
    pub beta: f64,
    /// Bin side as a multiple of the minimum coloring distance.
    pub bin_factor: f64,
    /// Fraction of a bin shared with its neighbor.
    pub bin_overlap: f64,
    pub th_union: f64,
    pub th_separate: f64,
    /// Weight of the relaxed inner products in mapping-graph edges.
    pub kappa: f64,
    /// Mapping graphs up to this many nodes are partitioned exhaustively.
    pub backtrack_limit: usize,
    pub max_stitch_per_feature: usize,
    pub sdp: SdpSettings,
    pub seed: u64,
    pub fm_passes: usize,
    pub fm_restarts: usize,
    /// Worker threads for independent components.
    pub jobs: usize,
    /// Run the graph simplifications (components, peeling, blocks,
    /// clustering, fast trial). When off, one relaxation covers the whole
    /// decomposition graph; stitch candidates are the same either way.
    pub simplify: bool,
    /// Keep every cost matrix handed to the solver.
    pub keep_matrices: bool,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            alpha: 0.1,
            beta: 0.04,
            bin_factor: 10.0,
            bin_overlap: 0.5,
            th_union: 0.9,
            th_separate: -0.4,
            kappa: 1.0,
            backtrack_limit: 7,
            max_stitch_per_feature: 4,
            sdp: SdpSettings::default(),
            seed: 0,
            fm_passes: 50,
            fm_restarts: 4,
            jobs: 1,
            simplify: true,
            keep_matrices: false,
        }
    }
}

/// Exhaustive partitioning beyond this many nodes is not offered.
pub const MAX_BACKTRACK_LIMIT: usize = 12;

impl DecomposeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, name: &'static str, requirement: &'static str, value: f64| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    name,
                    requirement,
                    value,
                })
            }
        };
        check(self.alpha.is_finite() && self.alpha >= 0.0, "alpha", "finite and >= 0", self.alpha)?;
        check(self.beta.is_finite() && self.beta >= 0.0, "beta", "finite and >= 0", self.beta)?;
        check(self.bin_factor.is_finite() && self.bin_factor > 0.0, "bin-factor", "> 0", self.bin_factor)?;
        check((0.0..1.0).contains(&self.bin_overlap), "bin-overlap", "in [0, 1)", self.bin_overlap)?;
        check(self.th_union.is_finite() && self.th_union <= 1.0, "th-union", "<= 1", self.th_union)?;
        check(
            self.th_separate.is_finite() && self.th_separate >= -0.5 && self.th_separate < self.th_union,
            "th-separate",
            "in [-0.5, th-union)",
            self.th_separate,
        )?;
        check(self.kappa.is_finite() && self.kappa >= 0.0, "kappa", "finite and >= 0", self.kappa)?;
        check(
            self.backtrack_limit <= MAX_BACKTRACK_LIMIT,
            "backtrack-limit",
            "at most 12",
            self.backtrack_limit as f64,
        )?;
        check(self.sdp.tol > 0.0 && self.sdp.tol < 1.0, "sdp-tol", "in (0, 1)", self.sdp.tol)?;
        check(self.sdp.max_iter >= 1, "sdp-max-iter", ">= 1", self.sdp.max_iter as f64)?;
        check(self.jobs >= 1, "jobs", ">= 1", self.jobs as f64)?;
        Ok(())
    }

    fn balance(&self) -> bool {
        self.beta > 0.0
    }
}

/// Counters describing how the work was done.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineStats {
    pub components: usize,
    pub core_features: usize,
    pub removed_features: usize,
    pub blocks: usize,
    pub trial_successes: usize,
    pub sdp_solves: usize,
    pub sdp_unconverged: usize,
    pub sdp_iterations: usize,
    pub backtrack_runs: usize,
    pub fm_runs: usize,
    /// Separation requests that hit already-merged groups.
    pub tensions: usize,
    /// Recovered features that could not avoid a conflict.
    pub forced_recoveries: usize,
    pub largest_block_vertices: usize,
}

impl PipelineStats {
    fn absorb(&mut self, other: &PipelineStats) {
        self.blocks += other.blocks;
        self.trial_successes += other.trial_successes;
        self.sdp_solves += other.sdp_solves;
        self.sdp_unconverged += other.sdp_unconverged;
        self.sdp_iterations += other.sdp_iterations;
        self.backtrack_runs += other.backtrack_runs;
        self.fm_runs += other.fm_runs;
        self.tensions += other.tensions;
        self.forced_recoveries += other.forced_recoveries;
        self.largest_block_vertices = self.largest_block_vertices.max(other.largest_block_vertices);
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub dis_m: Coord,
    pub grid: DensityGrid,
    pub layout_graph: LayoutGraph,
    pub sequences: Vec<ProjectionSequence>,
    /// Stitch candidates that made it into the decomposition graph.
    pub stitches: Vec<StitchCandidate>,
    /// Full, unclustered decomposition graph (one vertex per fragment).
    pub graph: DecompositionGraph,
    pub coloring: Coloring,
    pub report: DecompositionReport,
    pub stats: PipelineStats,
    pub timings: StageTimings,
    pub matrices: Vec<CostMatrix>,
}

impl Decomposition {
    pub fn fragment_color(&self, key: &FragmentKey) -> Option<u8> {
        self.graph
            .fragments
            .iter()
            .position(|f| f.key() == *key)
            .map(|i| self.coloring[self.graph.vertex_of(i)])
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Simplification result for one independent component.
struct ComponentPlan {
    vertices: BTreeSet<usize>,
    core: LayoutGraph,
    stack: RemovalStack,
}

/// Stitch candidates for the core features of one component: cut-vertex
/// features get none, the others are cut into two-pin pieces whose
/// projection sequences are taken against their core neighbors.
fn plan_candidates(
    spec: &LayoutSpec,
    core: &LayoutGraph,
    dis_m: Coord,
    max_per_feature: usize,
) -> (Vec<ProjectionSequence>, Vec<StitchCandidate>) {
    let cuts = find_cut_vertices(core);
    let mut sequences = Vec::new();
    let mut candidates = Vec::new();
    for f in core.vertices() {
        let neighbor_rects: Vec<&[Rect]> = core.neighbors(f).map(|u| spec.features[u].rects.as_slice()).collect();
        let mut mine = Vec::new();
        for piece in decompose_multipin(f, &spec.features[f]) {
            let ps = compute_projection_sequence(&piece, &neighbor_rects, dis_m);
            mine.extend(generate_stitch_candidates(&ps, max_per_feature));
            sequences.push(ps);
        }
        candidates.extend(cap_candidates(mine, max_per_feature));
    }
    (sequences, forbid_cut_vertex_stitches(candidates, &cuts))
}

/// Colors one block (or the whole graph with simplifications off).
fn solve_block(
    g: &DecompositionGraph,
    config: &DecomposeConfig,
    shortcuts: bool,
    matrices: &mut Vec<CostMatrix>,
) -> (FragmentColors, PipelineStats) {
    let mut stats = PipelineStats {
        blocks: 1,
        largest_block_vertices: g.vertex_count(),
        ..Default::default()
    };
    if g.is_empty() {
        return (FragmentColors::new(), stats);
    }
    let clustered;
    let work = if shortcuts {
        clustered = cluster_vertices(g);
        if let Some(c) = fast_color_trial(&clustered) {
            stats.trial_successes += 1;
            return (clustered.expand(&c), stats);
        }
        &clustered
    } else {
        g
    };
    let cost = assemble_cost_matrix(work, config.alpha, config.beta);
    let sol = solve_sdp(&cost, &config.sdp);
    stats.sdp_solves += 1;
    stats.sdp_iterations += sol.iterations;
    if !sol.converged {
        stats.sdp_unconverged += 1;
    }
    let ms = threshold_merge(&sol.x, config.th_union, config.th_separate);
    stats.tensions += ms.tensions.len();
    let gm = build_mapping_graph(&ms, work, &sol.x, config.alpha, config.kappa);
    let partition = if gm.node_count() <= config.backtrack_limit {
        stats.backtrack_runs += 1;
        backtrack_threeway(&gm, config.beta)
    } else {
        stats.fm_runs += 1;
        let opts = FmOptions {
            max_passes: config.fm_passes,
            restarts: config.fm_restarts,
            seed: config.seed,
        };
        fm_threeway(&gm, config.beta, &opts)
    };
    if config.keep_matrices {
        matrices.push(cost);
    }
    let coloring = gm.coloring(&partition.parts, work.vertex_count());
    (work.expand(&coloring), stats)
}

fn density_lookup(g: &DecompositionGraph) -> impl Fn(&FragmentKey) -> DensityVector + '_ {
    let index: BTreeMap<FragmentKey, usize> = g.fragments.iter().enumerate().map(|(i, f)| (f.key(), i)).collect();
    move |k| index.get(k).map(|&i| g.fragments[i].density.clone()).unwrap_or_default()
}

fn solve_component(
    full: &DecompositionGraph,
    plan: &ComponentPlan,
    config: &DecomposeConfig,
) -> (FragmentColors, PipelineStats, Vec<CostMatrix>) {
    let comp = full.induced(&plan.vertices);
    let mut stats = PipelineStats::default();
    let mut matrices = Vec::new();
    let blocks = split_biconnected(&plan.core);
    let mut parts = Vec::with_capacity(blocks.blocks.len());
    for block in &blocks.blocks {
        let g = comp.induced(&block.vertices);
        let (colors, s) = solve_block(&g, config, true, &mut matrices);
        stats.absorb(&s);
        parts.push(colors);
    }
    let mut colors = merge_component_colorings(&parts, &blocks.joins, density_lookup(&comp), config.balance());
    let rec = recover_removed_vertices(&plan.stack, &comp, &mut colors, config.balance());
    stats.forced_recoveries += rec.forced.len();
    (colors, stats, matrices)
}

/// Runs the whole flow on a validated layout.
pub fn decompose(spec: &LayoutSpec, config: &DecomposeConfig) -> Result<Decomposition, PipelineError> {
    config.validate()?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let dis_m = min_coloring_distance(spec);
    let grid = build_density_grid(spec, config.bin_factor, config.bin_overlap);
    timings.parse_and_grid = ms_since(t);

    let t = Instant::now();
    let layout_graph = build_layout_graph(spec, dis_m);
    let components = split_independent_components(&layout_graph);
    let plans: Vec<ComponentPlan> = components
        .iter()
        .map(|c| {
            let (core, stack) = simplify_low_degree(c);
            ComponentPlan {
                vertices: c.vertices().collect(),
                core,
                stack,
            }
        })
        .collect();
    timings.layout_graph = ms_since(t);

    let t = Instant::now();
    let mut sequences = Vec::new();
    let mut candidates = Vec::new();
    for plan in &plans {
        let (s, c) = plan_candidates(spec, &plan.core, dis_m, config.max_stitch_per_feature);
        sequences.extend(s);
        candidates.extend(c);
    }
    timings.stitch_candidates = ms_since(t);

    let t = Instant::now();
    let (graph, stitches) = build_decomposition_graph(spec, &layout_graph, &candidates, &grid, dis_m);
    timings.decomposition_graph = ms_since(t);

    let t = Instant::now();
    let mut stats = PipelineStats {
        components: plans.len(),
        core_features: plans.iter().map(|p| p.core.vertex_count()).sum(),
        removed_features: plans.iter().map(|p| p.stack.len()).sum(),
        ..Default::default()
    };
    let mut matrices = Vec::new();
    let colors = if config.simplify {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| PipelineError::Internal(format!("thread pool: {e}")))?;
        let solved: Vec<(FragmentColors, PipelineStats, Vec<CostMatrix>)> =
            pool.install(|| plans.par_iter().map(|p| solve_component(&graph, p, config)).collect());
        let mut parts = Vec::with_capacity(solved.len());
        for (colors, s, m) in solved {
            stats.absorb(&s);
            matrices.extend(m);
            parts.push(colors);
        }
        merge_component_colorings(&parts, &[], density_lookup(&graph), config.balance())
    } else {
        let (colors, s) = solve_block(&graph, config, false, &mut matrices);
        stats.absorb(&s);
        colors
    };
    let coloring = graph.restrict(&colors);
    if colors.len() != graph.fragments.len() {
        return Err(PipelineError::Internal(format!(
            "{} of {} fragments colored",
            colors.len(),
            graph.fragments.len()
        )));
    }
    timings.coloring = ms_since(t);

    let t = Instant::now();
    let report = evaluate_coloring(&graph, &coloring)?;
    timings.evaluation = ms_since(t);

    Ok(Decomposition {
        dis_m,
        grid,
        layout_graph,
        sequences,
        stitches,
        graph,
        coloring,
        report,
        stats,
        timings,
        matrices,
    })
}
