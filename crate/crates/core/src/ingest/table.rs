use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::model::{ACTIVITY, TIMESTAMP};
use crate::store::{Properties, PropertyValue, ValueKind};

use super::config::ImportConfig;
use super::timefmt::TimestampFormat;
use super::IngestError;

/// Parsed event table. Rows keep file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventTable {
    pub header: Vec<String>,
    pub rows: Vec<EventRecord>,
}

/// One event. `row` is the 1-based data row number; empty cells are absent
/// from `properties`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub row: usize,
    pub properties: Properties,
}

impl EventRecord {
    pub fn activity(&self) -> Option<&str> {
        self.properties
            .get(ACTIVITY)
            .and_then(PropertyValue::as_text)
    }

    pub fn timestamp(&self) -> i64 {
        self.properties
            .get(TIMESTAMP)
            .and_then(PropertyValue::as_timestamp)
            .expect("rows always carry a parsed timestamp")
    }

    pub fn get(&self, column: &str) -> Option<&PropertyValue> {
        self.properties.get(column)
    }
}

impl EventTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads an RFC-4180 CSV file with a header row.
pub fn load_event_table(
    path: impl AsRef<Path>,
    config: &ImportConfig,
) -> Result<EventTable, IngestError> {
    read_event_table(File::open(path)?, config)
}

pub fn read_event_table<R: Read>(
    reader: R,
    config: &ImportConfig,
) -> Result<EventTable, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = match csv.headers() {
        Ok(h) => h
            .iter()
            .map(|s| s.trim_start_matches('\u{feff}').to_owned())
            .collect(),
        Err(e) => {
            return Err(IngestError::MalformedCsv {
                row: 0,
                reason: e.to_string(),
            })
        }
    };
    for required in [ACTIVITY, TIMESTAMP] {
        if !header.iter().any(|h| h == required) {
            return Err(IngestError::MissingColumn(required.to_owned()));
        }
    }
    let kinds: Vec<ValueKind> = header
        .iter()
        .map(|h| {
            if h == TIMESTAMP {
                ValueKind::Timestamp
            } else {
                config
                    .column_type_hints
                    .get(h)
                    .copied()
                    .unwrap_or(ValueKind::Text)
            }
        })
        .collect();

    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| IngestError::MalformedCsv {
            row,
            reason: e.to_string(),
        })?;
        let mut properties = Properties::new();
        for ((column, kind), cell) in header.iter().zip(&kinds).zip(record.iter()) {
            if cell.is_empty() {
                continue;
            }
            let value = typed_cell(cell, *kind, &config.timestamp_format).ok_or_else(|| {
                if column == TIMESTAMP {
                    IngestError::UnparseableTimestamp {
                        row,
                        value: cell.to_owned(),
                    }
                } else {
                    IngestError::BadCell {
                        row,
                        column: column.clone(),
                        kind: *kind,
                    }
                }
            })?;
            properties.insert(column.clone(), value);
        }
        if !properties.contains_key(TIMESTAMP) {
            return Err(IngestError::UnparseableTimestamp {
                row,
                value: String::new(),
            });
        }
        rows.push(EventRecord { row, properties });
    }
    Ok(EventTable { header, rows })
}

fn typed_cell(cell: &str, kind: ValueKind, format: &TimestampFormat) -> Option<PropertyValue> {
    Some(match kind {
        ValueKind::Text => PropertyValue::Text(cell.to_owned()),
        ValueKind::Int => PropertyValue::Int(cell.trim().parse().ok()?),
        ValueKind::Float => PropertyValue::Float(cell.trim().parse().ok()?),
        ValueKind::Bool => match cell.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => PropertyValue::Bool(true),
            "false" | "0" | "no" => PropertyValue::Bool(false),
            _ => return None,
        },
        ValueKind::Timestamp => PropertyValue::Timestamp(format.parse_millis(cell)?),
        ValueKind::TextList => {
            PropertyValue::TextList(cell.split('|').map(str::to_owned).collect())
        }
    })
}
