// SPDX-License-Identifier: Apache-2.0

//! Named fixture layouts and seeded random instances for tests,
//! benchmarks and documentation.

use rand::Rng;

use crate::decomp::DecompositionGraph;
use crate::geometry::{Coord, DensityVector, Feature, LayoutSpec, Rect};

fn wire(id: &str, rects: &[[Coord; 4]]) -> Feature {
    Feature::new(id, rects.iter().map(|&r| Rect::from(r)).collect())
}

/// Ten features around a four-feature core where every pair conflicts.
/// Feature `a` needs a stitch in the dip between its neighbors `c` and
/// `d`; `d` carries a candidate in an unobstructed stretch of its top arm.
/// The best decomposition has no conflict and one stitch.
pub fn walkthrough_layout() -> LayoutSpec {
    LayoutSpec::with_dis_m(
        100,
        vec![
            wire("a", &[[100, 0, 1000, 20]]),
            wire("b", &[[0, -60, 1060, -40], [1040, -60, 1060, 80]]),
            wire(
                "c",
                &[
                    [700, 60, 1000, 80],
                    [700, 60, 720, 260],
                    [-290, 240, 720, 260],
                    [-290, 140, -270, 260],
                    [300, 140, 320, 260],
                ],
            ),
            wire("d", &[[-400, 60, 400, 80], [-400, -60, -380, 80], [-400, -60, -60, -40]]),
            wire("e", &[[100, -160, 400, -140]]),
            wire("f", &[[500, -160, 800, -140]]),
            wire("g", &[[900, -160, 1200, -140]]),
            wire("h", &[[1140, -60, 1160, 300]]),
            wire("i", &[[-290, 340, 720, 360]]),
            wire("j", &[[-520, -60, -480, 80]]),
        ],
    )
}

/// A 3300 nm wire `a` with five neighbors arranged so that its projection
/// sequence reads `01212101010` (300 nm per segment).
pub fn projection_demo_layout() -> LayoutSpec {
    LayoutSpec::with_dis_m(
        100,
        vec![
            wire("a", &[[0, 0, 3300, 20]]),
            wire("b", &[[400, 60, 800, 80]]),
            wire("c", &[[700, -60, 1400, -40]]),
            wire("d", &[[1300, 60, 1700, 80]]),
            wire("e", &[[2200, 60, 2300, 80]]),
            wire("f", &[[2800, -60, 2900, -40]]),
        ],
    )
}

/// Wire `a` reads `02120`: one neighbor above spans both peaks, two short
/// ones below create them.
pub fn lost_stitch_layout() -> LayoutSpec {
    LayoutSpec::with_dis_m(
        100,
        vec![
            wire("a", &[[0, 0, 1500, 20]]),
            wire("b", &[[400, 60, 1100, 80]]),
            wire("c", &[[400, -60, 500, -40]]),
            wire("d", &[[1000, -60, 1100, -40]]),
        ],
    )
}

/// Wire `a` reads `0101020`: the leading `01010` makes the first of its two
/// interior-zero candidates redundant.
pub fn redundant_prefix_layout() -> LayoutSpec {
    LayoutSpec::with_dis_m(
        100,
        vec![
            wire("a", &[[0, 0, 2100, 20]]),
            wire("b", &[[400, 60, 500, 80]]),
            wire("c", &[[1000, -60, 1100, -40]]),
            wire("d", &[[1600, 60, 1700, 80]]),
            wire("e", &[[1600, -60, 1700, -40]]),
        ],
    )
}

/// Parameters of [`track_layout`]: horizontal wires on evenly spaced
/// tracks, with an occasional vertical jog between neighboring tracks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackParams {
    pub dis_m: Coord,
    pub tracks: usize,
    pub pitch: Coord,
    pub width: Coord,
    pub span: Coord,
    pub min_len: Coord,
    pub max_len: Coord,
    pub min_gap: Coord,
    pub max_gap: Coord,
    /// Probability that a wire gets a vertical jog to the next track.
    pub jog: f64,
}

impl TrackParams {
    /// A handful of features in a small window; decomposition graphs stay
    /// within reach of the exhaustive oracle.
    pub fn small() -> Self {
        TrackParams {
            dis_m: 100,
            tracks: 4,
            pitch: 45,
            width: 20,
            span: 600,
            min_len: 100,
            max_len: 400,
            min_gap: 40,
            max_gap: 160,
            jog: 0.15,
        }
    }

    /// Dense routing over several density bins.
    pub fn dense() -> Self {
        TrackParams {
            dis_m: 100,
            tracks: 40,
            pitch: 60,
            width: 20,
            span: 2400,
            min_len: 100,
            max_len: 700,
            min_gap: 40,
            max_gap: 300,
            jog: 0.1,
        }
    }
}

/// Random track-based layout. Feature ids are `w0`, `w1`, ...
pub fn track_layout<R: Rng>(rng: &mut R, p: &TrackParams) -> LayoutSpec {
    let mut features = Vec::new();
    for t in 0..p.tracks {
        let y0 = t as Coord * p.pitch;
        let mut x = rng.gen_range(0..=p.max_gap);
        loop {
            let len = rng.gen_range(p.min_len..=p.max_len);
            if x + len > p.span {
                break;
            }
            let mut rects = vec![Rect::new(x, y0, x + len, y0 + p.width)];
            if t + 1 < p.tracks && rng.gen_bool(p.jog) {
                // jog up from the wire's right end; the next track keeps clear of it
                let jx = x + len - p.width;
                rects.push(Rect::new(jx, y0, x + len, y0 + p.pitch + p.width));
            }
            features.push(Feature::new(format!("w{}", features.len()), rects));
            x += len + rng.gen_range(p.min_gap..=p.max_gap);
        }
    }
    // drop wires that overlap a jog from the track below
    let mut kept: Vec<Feature> = Vec::new();
    for f in features {
        let clash = kept.iter().any(|k| {
            k.rects
                .iter()
                .any(|a| f.rects.iter().any(|b| a.intersection(b).is_some() || a.connects(b)))
        });
        if !clash {
            kept.push(f);
        }
    }
    for (i, f) in kept.iter_mut().enumerate() {
        f.id = format!("w{i}");
    }
    LayoutSpec::with_dis_m(p.dis_m, kept)
}

/// Erdős–Rényi conflict graph without stitches or density.
pub fn random_conflict_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> DecompositionGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    DecompositionGraph::plain(n, edges, [])
}

/// Random graph with conflict and stitch edges and random densities in up
/// to `bins` bins.
pub fn random_decomposition_graph<R: Rng>(
    rng: &mut R,
    n: usize,
    p_conflict: f64,
    p_stitch: f64,
    bins: usize,
) -> DecompositionGraph {
    let mut conflicts = Vec::new();
    let mut stitches = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p_conflict) {
                conflicts.push((i, j));
            } else if rng.gen_bool(p_stitch) {
                stitches.push((i, j));
            }
        }
    }
    let densities = (0..n)
        .map(|_| {
            if bins == 0 {
                return DensityVector::new();
            }
            let pairs = (0..rng.gen_range(1..=bins.min(3)))
                .map(|_| (rng.gen_range(0..bins), rng.gen_range(0.001..0.05)))
                .collect();
            DensityVector::from_pairs(pairs)
        })
        .collect();
    DecompositionGraph::abstract_graph(densities, conflicts, stitches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixtures_are_valid() {
        for spec in [
            walkthrough_layout(),
            projection_demo_layout(),
            lost_stitch_layout(),
            redundant_prefix_layout(),
        ] {
            spec.validate().unwrap();
        }
    }

    #[test]
    fn random_layouts_are_valid_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = track_layout(&mut a, &TrackParams::small());
            x.validate().unwrap();
            assert_eq!(x, track_layout(&mut b, &TrackParams::small()));
        }
    }
}
