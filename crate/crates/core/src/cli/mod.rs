//! Run configuration, experiment registry, CSV emission and the exit-code
//! contract behind the `gapcond` binary.

mod config;
mod experiments;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::harness::HarnessError;
use crate::mesh::{generate_mesh, write_mesh, MeshError};

pub use config::{parse_list, parse_phi, parse_shape, GeometryBlock, Numerics, OutputBlock, RawConfig, RunConfig};
pub use experiments::Registry;
pub use output::{sweep_csv, write_outputs, Cell, CsvTable, Line, Metadata, INCOMPLETE_MARKER, SWEEP_HEADER};

/// Environment variable overriding `numerics.node_budget`.
pub const BUDGET_ENV: &str = "GAPCOND_BUDGET";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("config error: {key}: {message}")]
    Config { key: String, message: String },
    #[error("numerical failure in {stage}: {message}")]
    Numerical { stage: String, message: String },
    #[error("i/o error on {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl RunError {
    /// 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Numerical { .. } | RunError::Io { .. } => 1,
        }
    }

    pub(crate) fn config(key: &str, message: impl ToString) -> Self {
        RunError::Config { key: key.to_string(), message: message.to_string() }
    }

    fn numerical(stage: &str, message: impl ToString) -> Self {
        RunError::Numerical { stage: stage.to_string(), message: message.to_string() }
    }

    /// Classifies a harness error; `key` names the input responsible for
    /// invalid-input errors.
    pub fn from_harness(e: HarnessError, key: &str) -> Self {
        match e {
            HarnessError::InvalidInput(m) => RunError::config(key, m),
            HarnessError::Geometry(g) => Self::from_geometry(g),
            HarnessError::Mesh(m) => Self::from_mesh(m),
            HarnessError::Solver(s) => RunError::numerical("solve", s),
            HarnessError::Functional(f) => RunError::numerical("flux", f),
            e @ HarnessError::InsufficientData { .. } => RunError::numerical("fit", e),
        }
    }

    pub fn from_geometry(g: GeometryError) -> Self {
        let key = match g {
            GeometryError::OverlapOrTouching { .. } | GeometryError::GapMismatch { .. } => "geometry.epsilon",
            GeometryError::InvalidBoundaryData(_) => "phi.data",
            _ => "geometry",
        };
        RunError::config(key, g)
    }

    pub fn from_mesh(m: MeshError) -> Self {
        match m {
            MeshError::Geometry(g) => Self::from_geometry(g),
            e @ MeshError::InvalidParams(_) => RunError::config("numerics", e),
            e => RunError::numerical("mesh", e),
        }
    }
}

/// Output of one experiment. A failure after some rows were produced is
/// carried here so that the partial tables are still written.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<CsvTable>,
    pub metadata: Metadata,
    pub failure: Option<RunError>,
}

/// A named experiment selectable from the configuration.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, cfg: &RunConfig) -> Result<Report, RunError>;
}

fn read_raw(path: &Path, overrides: &[String]) -> Result<RawConfig, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::config("config", format!("cannot read {}: {e}", path.display())))?;
    let mut raw = RawConfig::parse(&text)?;
    if let Ok(v) = std::env::var(BUDGET_ENV) {
        let budget: usize = v
            .trim()
            .parse()
            .map_err(|_| RunError::config(BUDGET_ENV, format!("expected a positive integer, got {v:?}")))?;
        raw.set(&format!("numerics.node_budget={budget}"))?;
    }
    for o in overrides {
        raw.set(o)?;
    }
    Ok(raw)
}

/// Reads a configuration file and applies the budget variable and
/// `section.key=value` overrides, in that order.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, RunError> {
    RunConfig::from_raw(&read_raw(path, overrides)?)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub overrides: Vec<String>,
    /// Worker threads; `Some(1)` runs sequentially.
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Runs the configured experiment and writes its CSV tables and metadata
/// sidecar. Partial output from a failed run ends with the incomplete
/// marker and the failure is returned after writing.
pub fn run(opts: &RunOptions, registry: &Registry) -> Result<Vec<PathBuf>, RunError> {
    let mut cfg = load_config(&opts.config, &opts.overrides)?;
    if let Some(dir) = &opts.out {
        cfg.output.dir = dir.clone();
    }
    let experiment = registry.get(&cfg.experiment).ok_or_else(|| {
        RunError::config("experiment", format!("unknown experiment {:?}; known: {}", cfg.experiment, registry.names().join(", ")))
    })?;
    let start = Instant::now();
    let mut report = match opts.jobs {
        Some(0) => return Err(RunError::config("jobs", "must be at least 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| RunError::config("jobs", e))?
            .install(|| experiment.run(&cfg))?,
        None => experiment.run(&cfg)?,
    };

    let mut meta = Metadata::default();
    meta.push("experiment", experiment.name());
    for (k, v) in cfg.entries() {
        meta.push(format!("config.{k}"), v);
    }
    meta.entries.append(&mut report.metadata.entries);
    if cfg.output.timings {
        meta.push("wall_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    }
    if let Some(f) = &report.failure {
        for t in &mut report.tables {
            t.incomplete = true;
        }
        meta.push("status", "incomplete");
        meta.push("failure", f);
    } else {
        meta.push("status", "complete");
    }
    let paths = write_outputs(&cfg.output.dir, &cfg.output.name, &report.tables, &meta)?;
    match report.failure {
        Some(f) => Err(f),
        None => Ok(paths),
    }
}

/// Meshes the configured geometry at `geometry.epsilon` with the base mesh
/// parameters and writes the mesh dump.
pub fn export_mesh(config: &Path, overrides: &[String], out: &Path) -> Result<(), RunError> {
    let mut raw = read_raw(config, overrides)?;
    if raw.get("experiment").is_none() {
        raw.set("experiment=solve")?;
    }
    let cfg = RunConfig::from_raw(&raw)?;
    let conf = cfg.family().at(cfg.geometry.epsilon).map_err(RunError::from_geometry)?;
    let mesh = Arc::new(generate_mesh(&conf, &cfg.mesh_params()).map_err(RunError::from_mesh)?);
    let file = fs::File::create(out).map_err(|e| RunError::Io { path: out.to_path_buf(), message: e.to_string() })?;
    write_mesh(&mesh, std::io::BufWriter::new(file))
        .map_err(|e| RunError::Io { path: out.to_path_buf(), message: e.to_string() })
}
