//! Dataset ingestion and export, the worker noise statistic, and the
//! synthetic population generator.

mod ingest;
mod noise;
mod synth;

pub use ingest::{export_canonical, ingest, read_manifest, Manifest, FEEDBACK_FILE, MANIFEST_FILE};
pub use noise::{noise_stats, NoiseStats};
pub use synth::{population_cdf, synth_generate, write_truth, SynthConfig};
