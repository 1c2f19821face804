use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::value::IndexKey;
use super::{NodeRef, PropertyValue};

/// Declared index on `(label, key)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IndexSpec {
    pub label: String,
    pub key: String,
    pub unique: bool,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct PropertyIndex {
    pub(crate) unique: bool,
    entries: HashMap<IndexKey, BTreeSet<NodeRef>>,
    originals: HashMap<IndexKey, PropertyValue>,
}

impl PropertyIndex {
    pub(crate) fn new(unique: bool) -> Self {
        Self {
            unique,
            ..Self::default()
        }
    }

    pub(crate) fn insert(&mut self, value: &PropertyValue, node: NodeRef) {
        let key = IndexKey::from(value);
        self.originals
            .entry(key.clone())
            .or_insert_with(|| value.clone());
        self.entries.entry(key).or_default().insert(node);
    }

    pub(crate) fn contains(&self, value: &PropertyValue) -> bool {
        self.entries.contains_key(&IndexKey::from(value))
    }

    pub(crate) fn get(&self, key: &IndexKey) -> impl Iterator<Item = &NodeRef> + '_ {
        self.entries.get(key).into_iter().flatten()
    }

    /// Values held by more than one node, sorted for stable error messages.
    pub(crate) fn duplicate_values(&self) -> Vec<String> {
        let mut dups: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, nodes)| nodes.len() > 1)
            .map(|(k, _)| self.originals[k].to_plain_string())
            .collect();
        dups.sort();
        dups
    }
}
