#![allow(dead_code)]

pub mod ast_gen;
pub mod synth;

use std::path::PathBuf;

use ekg_core::ingest::{self, DerivationConfig};
use ekg_core::pipeline::{self, PipelineOptions, PipelineOutput};
use ekg_core::NodeRef;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_csv() -> PathBuf {
    fixture_dir().join("bpic17_sample.csv")
}

pub fn fixture_config() -> PathBuf {
    fixture_dir().join("bpic17_sample.json")
}

/// The full pipeline on the ten-row sample.
pub fn fixture_pipeline() -> PipelineOutput {
    let cfg = DerivationConfig::load(fixture_config()).unwrap();
    let table = ingest::load_event_table(fixture_csv(), &cfg.import_config().unwrap()).unwrap();
    pipeline::run_pipeline_on(&cfg, &table, &PipelineOptions::default(), &mut |_| {}).unwrap()
}

/// Event node of 1-based table row `n`.
pub fn row(n: u64) -> NodeRef {
    NodeRef(n - 1)
}
