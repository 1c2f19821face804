use crate::ingest::{self, DerivationConfig};
use crate::{aggregate, LabeledPropertyGraph, NodeRef};

pub(crate) const FIXTURE: &str = include_str!("../fixtures/bpic17_sample.csv");
pub(crate) const CONFIG: &str = include_str!("../fixtures/bpic17_sample.json");

/// The ten-row sample with every derivation step applied.
pub(crate) fn derived() -> LabeledPropertyGraph {
    let cfg = DerivationConfig::from_json(CONFIG).unwrap();
    let table =
        ingest::read_event_table(FIXTURE.as_bytes(), &cfg.import_config().unwrap()).unwrap();
    let mut g = LabeledPropertyGraph::new();
    ingest::import_events(&mut g, &table).unwrap();
    ingest::create_logs(&mut g, &cfg.default_log_id).unwrap();
    for r in &cfg.entities {
        ingest::derive_entities(&mut g, r).unwrap();
        ingest::correlate_events(&mut g, r).unwrap();
    }
    for r in &cfg.reifications {
        ingest::reify_relation(&mut g, r).unwrap();
        ingest::correlate_composite(&mut g, &r.composite_type, &r.type1).unwrap();
        ingest::correlate_composite(&mut g, &r.composite_type, &r.type2).unwrap();
    }
    for t in [
        "Application",
        "Workflow",
        "Offer",
        "Resource",
        "Case_AO",
        "Case",
    ] {
        ingest::derive_df(&mut g, t, true).unwrap();
    }
    for c in &cfg.classifiers {
        aggregate::derive_classes(&mut g, c).unwrap();
        aggregate::link_event_classes(&mut g, c).unwrap();
    }
    g
}

/// Event node of 1-based table row `n`.
pub(crate) fn row(n: u64) -> NodeRef {
    NodeRef(n - 1)
}
