pub mod aggregate;
pub mod export;
pub mod ingest;
pub mod model;
pub mod pattern;
pub mod pipeline;
pub mod query;
pub mod store;
pub mod validate;

#[cfg(test)]
mod testutil;

pub use store::{
    Comparator, Direction, GraphError, LabeledPropertyGraph, Node, NodeRef, Predicate, Properties,
    PropertyValue, RelRef, Relationship,
};
