//! Event table import and the derivation of logs, entities, correlation,
//! directly-follows edges and composite entities.

use thiserror::Error;

use crate::store::{GraphError, NodeRef, ValueKind};

mod config;
mod derive;
mod table;
mod timefmt;

pub use config::{
    DerivationConfig, EntityRule, FilterCondition, ImportConfig, JsonLiteral, ReificationRule,
};
pub use derive::{
    correlate_composite, correlate_events, create_logs, derive_df, derive_entities, graph_columns,
    import_events, reify_relation,
};
pub use table::{load_event_table, read_event_table, EventRecord, EventTable};
pub use timefmt::TimestampFormat;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing mandatory column {0}")]
    MissingColumn(String),
    #[error("row {row}: unparseable timestamp {value:?}")]
    UnparseableTimestamp { row: usize, value: String },
    #[error("row {row}: malformed CSV: {reason}")]
    MalformedCsv { row: usize, reason: String },
    #[error("row {row}: column {column} is not a valid {kind}")]
    BadCell {
        row: usize,
        column: String,
        kind: ValueKind,
    },
    #[error("graph already contains events")]
    NonEmptyGraph,
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("no entities of type {0}")]
    UnknownEntityType(String),
    #[error("event {0} has no timestamp")]
    MissingTimestamp(NodeRef),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
