use std::cmp::Ordering;
use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::GraphError;

/// A property value stored on a node or relationship.
///
/// Values of different variants never compare; asking for an ordering across
/// variants is a [`GraphError::TypeMismatch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PropertyValue {
    Text(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    /// Milliseconds since the Unix epoch, UTC.
    Timestamp(i64),
    TextList(Vec<String>),
}

/// Discriminant of a [`PropertyValue`], used for type checks and hints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Text,
    Int,
    Float,
    Bool,
    Timestamp,
    TextList,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ValueKind::Text => "text",
            ValueKind::Int => "int",
            ValueKind::Float => "float",
            ValueKind::Bool => "bool",
            ValueKind::Timestamp => "timestamp",
            ValueKind::TextList => "textlist",
        };
        f.write_str(name)
    }
}

impl PropertyValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            PropertyValue::Text(_) => ValueKind::Text,
            PropertyValue::Int(_) => ValueKind::Int,
            PropertyValue::Float(_) => ValueKind::Float,
            PropertyValue::Bool(_) => ValueKind::Bool,
            PropertyValue::Timestamp(_) => ValueKind::Timestamp,
            PropertyValue::TextList(_) => ValueKind::TextList,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            PropertyValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_timestamp(&self) -> Option<i64> {
        match self {
            PropertyValue::Timestamp(v) => Some(*v),
            _ => None,
        }
    }

    /// Orders two values of the same variant.
    ///
    /// Floats use IEEE total ordering so the result is always defined.
    pub fn try_cmp(&self, other: &PropertyValue) -> Result<Ordering, GraphError> {
        use PropertyValue::*;
        match (self, other) {
            (Text(a), Text(b)) => Ok(a.cmp(b)),
            (Int(a), Int(b)) => Ok(a.cmp(b)),
            (Float(a), Float(b)) => Ok(a.total_cmp(b)),
            (Bool(a), Bool(b)) => Ok(a.cmp(b)),
            (Timestamp(a), Timestamp(b)) => Ok(a.cmp(b)),
            (TextList(a), TextList(b)) => Ok(a.cmp(b)),
            _ => Err(GraphError::TypeMismatch {
                left: self.kind(),
                right: other.kind(),
            }),
        }
    }

    /// Renders the value as plain text. Timestamps become ISO-8601 (UTC,
    /// millisecond precision) and lists are joined with `,`.
    pub fn to_plain_string(&self) -> String {
        match self {
            PropertyValue::Text(s) => s.clone(),
            PropertyValue::Int(v) => v.to_string(),
            PropertyValue::Float(v) => format!("{v:?}"),
            PropertyValue::Bool(v) => v.to_string(),
            PropertyValue::Timestamp(ms) => format_timestamp(*ms),
            PropertyValue::TextList(items) => items.join(","),
        }
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_plain_string())
    }
}

impl From<&str> for PropertyValue {
    fn from(s: &str) -> Self {
        PropertyValue::Text(s.to_owned())
    }
}

impl From<String> for PropertyValue {
    fn from(s: String) -> Self {
        PropertyValue::Text(s)
    }
}

impl From<i64> for PropertyValue {
    fn from(v: i64) -> Self {
        PropertyValue::Int(v)
    }
}

impl From<f64> for PropertyValue {
    fn from(v: f64) -> Self {
        PropertyValue::Float(v)
    }
}

impl From<bool> for PropertyValue {
    fn from(v: bool) -> Self {
        PropertyValue::Bool(v)
    }
}

/// Formats epoch milliseconds as `YYYY-MM-DDTHH:MM:SS.sssZ`.
pub fn format_timestamp(ms: i64) -> String {
    match DateTime::<Utc>::from_timestamp_millis(ms) {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
        None => ms.to_string(),
    }
}

/// Hashable projection of a value used as an index key. Floats are keyed by
/// their bit pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum IndexKey {
    Text(String),
    Int(i64),
    Float(u64),
    Bool(bool),
    Timestamp(i64),
    TextList(Vec<String>),
}

impl From<&PropertyValue> for IndexKey {
    fn from(v: &PropertyValue) -> Self {
        match v {
            PropertyValue::Text(s) => IndexKey::Text(s.clone()),
            PropertyValue::Int(i) => IndexKey::Int(*i),
            // -0.0 and 0.0 compare equal under `=`; keep them in one bucket
            PropertyValue::Float(f) if *f == 0.0 => IndexKey::Float(0),
            PropertyValue::Float(f) => IndexKey::Float(f.to_bits()),
            PropertyValue::Bool(b) => IndexKey::Bool(*b),
            PropertyValue::Timestamp(t) => IndexKey::Timestamp(*t),
            PropertyValue::TextList(l) => IndexKey::TextList(l.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_are_totally_ordered() {
        let a = PropertyValue::Timestamp(10);
        let b = PropertyValue::Timestamp(20);
        assert_eq!(a.try_cmp(&b).unwrap(), Ordering::Less);
        assert_eq!(b.try_cmp(&a).unwrap(), Ordering::Greater);
        assert_eq!(a.try_cmp(&a).unwrap(), Ordering::Equal);
    }

    #[test]
    fn cross_variant_comparison_is_an_error() {
        let err = PropertyValue::Int(1)
            .try_cmp(&PropertyValue::Text("1".into()))
            .unwrap_err();
        assert!(matches!(
            err,
            GraphError::TypeMismatch {
                left: ValueKind::Int,
                right: ValueKind::Text
            }
        ));
        assert!(PropertyValue::Timestamp(0)
            .try_cmp(&PropertyValue::Int(0))
            .is_err());
    }

    #[test]
    fn iso_rendering() {
        assert_eq!(format_timestamp(0), "1970-01-01T00:00:00.000Z");
        assert_eq!(
            PropertyValue::Timestamp(1_567_074_600_000).to_plain_string(),
            "2019-08-29T10:30:00.000Z"
        );
    }
}
