use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::timefmt::TimestampFormat;
use super::IngestError;
use crate::aggregate::ClassifierRule;
use crate::store::{Comparator, Predicate, PropertyValue, ValueKind};

/// Declarative domain knowledge driving the import.
///
/// ```json
/// {
///   "timestampFormat": "dd.MM.yy HH:mm",
///   "defaultLogId": "BPIC17-sample",
///   "entities": [
///     { "entityType": "Offer", "idColumn": "oID",
///       "filter": [{ "property": "Origin", "value": "O" }] }
///   ],
///   "reifications": [
///     { "type1": "Application", "type2": "Offer",
///       "refToColumn": "Appl", "compositeType": "Case_AO" }
///   ],
///   "classifiers": [{ "classType": "Activity", "keyColumns": ["Activity"] }]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DerivationConfig {
    #[serde(default = "default_format")]
    pub timestamp_format: String,
    #[serde(default = "default_log_id")]
    pub default_log_id: String,
    #[serde(default)]
    pub column_type_hints: BTreeMap<String, ValueKind>,
    /// Derive `DF` only between events of the same log.
    #[serde(default = "yes")]
    pub df_within_log: bool,
    #[serde(default)]
    pub entities: Vec<EntityRule>,
    #[serde(default)]
    pub reifications: Vec<ReificationRule>,
    #[serde(default)]
    pub classifiers: Vec<ClassifierRule>,
}

fn default_format() -> String {
    "ISO8601".to_owned()
}

fn default_log_id() -> String {
    "log".to_owned()
}

fn yes() -> bool {
    true
}

impl Default for DerivationConfig {
    fn default() -> Self {
        Self {
            timestamp_format: default_format(),
            default_log_id: default_log_id(),
            column_type_hints: BTreeMap::new(),
            df_within_log: true,
            entities: Vec::new(),
            reifications: Vec::new(),
            classifiers: Vec::new(),
        }
    }
}

impl DerivationConfig {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| IngestError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        TimestampFormat::parse(&self.timestamp_format)?;
        for rule in &self.entities {
            rule.predicates()?;
            if rule.entity_type.is_empty() || rule.id_column.is_empty() {
                return Err(IngestError::InvalidConfig(
                    "entity rules need entityType and idColumn".into(),
                ));
            }
        }
        for rule in &self.reifications {
            if rule.type1 == rule.type2 {
                return Err(IngestError::InvalidConfig(format!(
                    "reification {} relates {} to itself",
                    rule.composite_type, rule.type1
                )));
            }
        }
        for rule in &self.classifiers {
            if rule.key_columns.is_empty() {
                return Err(IngestError::InvalidConfig(format!(
                    "classifier {} has no key columns",
                    rule.class_type
                )));
            }
        }
        Ok(())
    }

    pub fn import_config(&self) -> Result<ImportConfig, IngestError> {
        Ok(ImportConfig {
            timestamp_format: TimestampFormat::parse(&self.timestamp_format)?,
            default_log_id: self.default_log_id.clone(),
            column_type_hints: self.column_type_hints.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportConfig {
    pub timestamp_format: TimestampFormat,
    pub default_log_id: String,
    pub column_type_hints: BTreeMap<String, ValueKind>,
}

impl Default for ImportConfig {
    fn default() -> Self {
        Self {
            timestamp_format: TimestampFormat::Iso8601,
            default_log_id: default_log_id(),
            column_type_hints: BTreeMap::new(),
        }
    }
}

impl ImportConfig {
    pub fn with_format(pattern: &str) -> Result<Self, IngestError> {
        Ok(Self {
            timestamp_format: TimestampFormat::parse(pattern)?,
            ..Self::default()
        })
    }
}

/// Which events belong to entities of `entity_type`, and which column holds
/// their identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EntityRule {
    pub entity_type: String,
    pub id_column: String,
    #[serde(default)]
    pub filter: Vec<FilterCondition>,
}

impl EntityRule {
    pub fn new(entity_type: &str, id_column: &str) -> Self {
        Self {
            entity_type: entity_type.to_owned(),
            id_column: id_column.to_owned(),
            filter: Vec::new(),
        }
    }

    /// Adds an equality condition to the filter.
    pub fn when(mut self, property: &str, value: impl Into<PropertyValue>) -> Self {
        self.filter.push(FilterCondition {
            property: property.to_owned(),
            op: "=".to_owned(),
            value: JsonLiteral::from(value.into()),
        });
        self
    }

    pub fn predicates(&self) -> Result<Vec<Predicate>, IngestError> {
        self.filter.iter().map(FilterCondition::predicate).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FilterCondition {
    pub property: String,
    #[serde(default = "eq_op")]
    pub op: String,
    pub value: JsonLiteral,
}

fn eq_op() -> String {
    "=".to_owned()
}

impl FilterCondition {
    pub fn predicate(&self) -> Result<Predicate, IngestError> {
        let op = Comparator::from_symbol(&self.op)
            .ok_or_else(|| IngestError::InvalidConfig(format!("unknown operator {:?}", self.op)))?;
        Ok(Predicate::new(
            self.property.clone(),
            op,
            PropertyValue::from(self.value.clone()),
        ))
    }
}

/// A scalar as written in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonLiteral {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<JsonLiteral> for PropertyValue {
    fn from(v: JsonLiteral) -> Self {
        match v {
            JsonLiteral::Bool(b) => PropertyValue::Bool(b),
            JsonLiteral::Int(i) => PropertyValue::Int(i),
            JsonLiteral::Float(f) => PropertyValue::Float(f),
            JsonLiteral::Text(s) => PropertyValue::Text(s),
        }
    }
}

impl From<PropertyValue> for JsonLiteral {
    fn from(v: PropertyValue) -> Self {
        match v {
            PropertyValue::Bool(b) => JsonLiteral::Bool(b),
            PropertyValue::Int(i) => JsonLiteral::Int(i),
            PropertyValue::Float(f) => JsonLiteral::Float(f),
            other => JsonLiteral::Text(other.to_plain_string()),
        }
    }
}

/// Turns the relation between `type1` and `type2` entities into composite
/// entities of `composite_type`. A `type2` event whose `ref_to_column` holds
/// the ID of a `type1` entity relates the two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReificationRule {
    pub type1: String,
    pub type2: String,
    pub ref_to_column: String,
    pub composite_type: String,
    #[serde(default = "default_sentinels")]
    pub null_sentinels: Vec<String>,
}

fn default_sentinels() -> Vec<String> {
    vec!["Unknown".to_owned(), String::new()]
}

impl ReificationRule {
    pub fn new(type1: &str, type2: &str, ref_to_column: &str, composite_type: &str) -> Self {
        Self {
            type1: type1.to_owned(),
            type2: type2.to_owned(),
            ref_to_column: ref_to_column.to_owned(),
            composite_type: composite_type.to_owned(),
            null_sentinels: default_sentinels(),
        }
    }
}
