// SPDX-License-Identifier: Apache-2.0

//! Density-balanced triple patterning layout decomposition.
//!
//! The crate splits the features of one layout layer across three masks.
//! It builds a conflict graph from the minimum coloring distance, simplifies
//! it, inserts stitch candidates, solves a semidefinite relaxation whose cost
//! also rewards balanced per-bin mask densities, and rounds the relaxed
//! solution back to a coloring.
//!
//! ```
//! use trimask::{decompose, parse_layout, DecomposeConfig};
//!
//! let layout = parse_layout(r#"{
//!     "units": "nm", "w_min": 20, "s_min": 20,
//!     "features": [
//!         {"id": "a", "rects": [[0, 0, 400, 20]]},
//!         {"id": "b", "rects": [[0, 60, 400, 80]]},
//!         {"id": "c", "rects": [[0, 120, 400, 140]]}
//!     ]
//! }"#).unwrap();
//! let result = decompose(&layout, &DecomposeConfig::default()).unwrap();
//! assert_eq!(result.report.conflicts, 0);
//! ```

pub mod decomp;
pub mod error;
pub mod geometry;
pub mod layout_graph;
pub mod mapping;
pub mod metrics;
pub mod output;
pub mod pipeline;
pub mod recovery;
pub mod sdp;
pub mod stitch;
pub mod synth;

pub use decomp::{Color, Coloring, DecompositionGraph, FragmentKey};
pub use error::{ConfigError, EvalError, LayoutError, OracleError, PipelineError, StitchError};
pub use geometry::{min_coloring_distance, parse_layout, render_layout, Feature, LayoutSpec, Rect};
pub use metrics::DecompositionReport;
pub use pipeline::{decompose, DecomposeConfig, Decomposition};
