// SPDX-License-Identifier: Apache-2.0

//! `trimask`: decompose a layout onto three masks.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use trimask::error::PipelineError;
use trimask::metrics::{brute_force_optimal, objective, ORACLE_LIMIT};
use trimask::output::{coloring_json, render_svg, report_json, sequences_text};
use trimask::sdp::SdpSettings;
use trimask::{decompose, parse_layout, DecomposeConfig};

mod exit {
    pub const USAGE: u8 = 2;
    pub const READ: u8 = 3;
    pub const PARSE: u8 = 4;
    pub const CONFIG: u8 = 5;
    pub const WRITE: u8 = 6;
    pub const INTERNAL: u8 = 7;
}

#[derive(Parser, Debug)]
#[command(name = "trimask", version, about = "Triple patterning layout decomposition")]
struct Args {
    /// Layout file (JSON).
    input: PathBuf,

    /// Colored fragments; written to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Conflict/stitch/density report.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// SVG rendering of the colored layout.
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Add the exhaustive optimum to the report (graphs up to 15 fragments).
    #[arg(long)]
    oracle: bool,
    /// Add per-stage wall times to the report. Breaks byte-identical output.
    #[arg(long)]
    timings: bool,

    /// Stitch weight.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Density-balance weight; 0 turns balancing off.
    #[arg(long, default_value_t = 0.04)]
    beta: f64,
    /// Density bin side as a multiple of the coloring distance.
    #[arg(long, default_value_t = 10.0)]
    bin_factor: f64,
    /// Overlap between neighboring bins, in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    bin_overlap: f64,
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    th_union: f64,
    #[arg(long, default_value_t = -0.4, allow_negative_numbers = true)]
    th_separate: f64,
    /// Weight of the relaxed solution in the mapping graph.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Largest mapping graph solved exactly.
    #[arg(long, default_value_t = 7)]
    backtrack_limit: usize,
    /// Stitch candidates kept per feature.
    #[arg(long, default_value_t = 4)]
    max_stitch: usize,
    #[arg(long, default_value_t = 1e-6)]
    sdp_tol: f64,
    #[arg(long, default_value_t = 5000)]
    sdp_max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent components.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Skip graph simplification and cluster/trial shortcuts.
    #[arg(long)]
    no_simplify: bool,

    /// Write the layout graph as an edge list.
    #[arg(long, value_name = "PATH")]
    dump_graph: Option<PathBuf>,
    /// Write the projection sequence of every core feature.
    #[arg(long, value_name = "PATH")]
    dump_sequences: Option<PathBuf>,
    /// Write every SDP cost matrix as `matrix-<k>.txt` into this directory.
    #[arg(long, value_name = "DIR")]
    dump_matrices: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl Args {
    fn config(&self) -> DecomposeConfig {
        DecomposeConfig {
            alpha: self.alpha,
            beta: self.beta,
            bin_factor: self.bin_factor,
            bin_overlap: self.bin_overlap,
            th_union: self.th_union,
            th_separate: self.th_separate,
            kappa: self.kappa,
            backtrack_limit: self.backtrack_limit,
            max_stitch_per_feature: self.max_stitch,
            sdp: SdpSettings {
                tol: self.sdp_tol,
                max_iter: self.sdp_max_iter,
            },
            seed: self.seed,
            jobs: self.jobs,
            simplify: !self.no_simplify,
            keep_matrices: self.dump_matrices.is_some(),
            ..DecomposeConfig::default()
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(exit::WRITE, format!("cannot write {}: {e}", path.display())))
}

fn run(args: &Args) -> Result<(), Failure> {
    let config = args.config();
    config
        .validate()
        .map_err(|e| Failure::new(exit::CONFIG, e.to_string()))?;
    let text = fs::read_to_string(&args.input)
        .map_err(|e| Failure::new(exit::READ, format!("cannot read {}: {e}", args.input.display())))?;
    let spec = parse_layout(&text).map_err(|e| Failure::new(exit::PARSE, format!("{}: {e}", args.input.display())))?;
    let d = decompose(&spec, &config).map_err(|e| match e {
        PipelineError::Config(e) => Failure::new(exit::CONFIG, e.to_string()),
        e => Failure::new(exit::INTERNAL, e.to_string()),
    })?;

    let oracle = if args.oracle {
        if d.graph.vertex_count() <= ORACLE_LIMIT {
            let (best, _) = brute_force_optimal(&d.graph, config.alpha, config.beta)
                .map_err(|e| Failure::new(exit::INTERNAL, e.to_string()))?;
            let value = objective(&d.graph, &best, config.alpha, config.beta)
                .map_err(|e| Failure::new(exit::INTERNAL, e.to_string()))?;
            Some(value)
        } else {
            eprintln!(
                "trimask: --oracle skipped: {} fragments exceed the limit of {ORACLE_LIMIT}",
                d.graph.vertex_count()
            );
            None
        }
    } else {
        None
    };

    let coloring = coloring_json(&spec, &d);
    match &args.out {
        Some(path) => write_file(path, &coloring)?,
        None => io::stdout()
            .write_all(coloring.as_bytes())
            .map_err(|e| Failure::new(exit::WRITE, format!("stdout: {e}")))?,
    }
    if let Some(path) = &args.report {
        write_file(path, &report_json(&d, oracle, args.timings))?;
    }
    if let Some(path) = &args.svg {
        write_file(path, &render_svg(&spec, &d))?;
    }
    if let Some(path) = &args.dump_graph {
        write_file(path, &d.layout_graph.to_edge_list())?;
    }
    if let Some(path) = &args.dump_sequences {
        write_file(path, &sequences_text(&spec, &d))?;
    }
    if let Some(dir) = &args.dump_matrices {
        fs::create_dir_all(dir).map_err(|e| Failure::new(exit::WRITE, format!("cannot create {}: {e}", dir.display())))?;
        for (k, m) in d.matrices.iter().enumerate() {
            write_file(&dir.join(format!("matrix-{k}.txt")), &m.to_sparse_text())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("trimask: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
