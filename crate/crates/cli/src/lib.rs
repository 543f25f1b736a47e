//! Configuration, orchestration, and artifact emission for the
//! capacity-expansion mean-field game solver.

pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod preset;

pub use artifacts::{emit_artifacts, Manifest, ManifestEntry};
pub use config::{PayoffKind, QuadRuleKind, RunConfig};
pub use pipeline::{run_pipeline, OracleCheck, PipelineOutput};
pub use preset::{preset_config, run_reproduction_preset, PresetOutcome};
