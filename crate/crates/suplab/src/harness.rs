//! The experiment engine: TOML configs, dataset ingestion (IDX images,
//! embedding containers), grid execution with per-point RNG streams,
//! bootstrap intervals, CSV result tables, deterministic SVG plots, and
//! binary checkpoints.

pub mod bootstrap;
pub mod checkpoint;
pub mod config;
pub mod csv;
pub mod embeddings;
pub mod idx;
pub mod runner;
pub mod svg;

pub use bootstrap::{bootstrap_ci, BOOTSTRAP_LEVEL, BOOTSTRAP_RESAMPLES};
pub use config::{ExperimentConfig, ExperimentKind};
pub use csv::{read_result_csv, write_csv, ResultRow};
pub use runner::{run_experiment, write_outputs, ExperimentResult, OutputFormat};
pub use svg::{emit_plot, PlotKind};
