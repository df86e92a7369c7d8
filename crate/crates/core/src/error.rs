// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Problems found while reading or validating a layout.
#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported units {0:?}, expected \"nm\"")]
    Units(String),
    #[error("missing process parameters: give dis_m, or both w_min and s_min")]
    MissingProcessParameters,
    #[error("process parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: i64 },
    #[error("feature id must be non-empty (feature #{0})")]
    EmptyId(usize),
    #[error("duplicate feature id {0:?}")]
    DuplicateId(String),
    #[error("feature {0:?} has no rectangles")]
    NoRects(String),
    #[error("feature {id:?} rectangle #{index} is degenerate: {rect:?}")]
    DegenerateRect {
        id: String,
        index: usize,
        rect: [i64; 4],
    },
    #[error("feature {0:?} is not a connected rectilinear region")]
    Disconnected(String),
}

impl From<serde_json::Error> for LayoutError {
    fn from(err: serde_json::Error) -> Self {
        LayoutError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum StitchError {
    #[error("feature #{feature} has {rects} rectangles; decompose multi-pin features first")]
    MultiPin { feature: usize, rects: usize },
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("graph has {vertices} vertices, exhaustive search is limited to {limit}")]
    TooLarge { vertices: usize, limit: usize },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("coloring covers {got} vertices, graph has {expected}")]
    Partial { expected: usize, got: usize },
    #[error("vertex {vertex} has invalid color {color}")]
    InvalidColor { vertex: usize, color: u8 },
}

/// Invalid pipeline configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{name} must be {requirement}, got {value}")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

/// Errors surfaced by the end-to-end decomposition.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}
