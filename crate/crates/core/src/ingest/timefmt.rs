//! Timestamp formats for event tables.
//!
//! A format is either `ISO8601` (the default) or a date pattern. Patterns in
//! the familiar `dd.MM.yy HH:mm` letter style are translated to chrono
//! directives; a pattern containing `%` is taken as a chrono format as-is.
//! Values without a zone are read as UTC.

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimestampFormat {
    Iso8601,
    /// chrono `strftime` directives
    Pattern(String),
}

impl TimestampFormat {
    pub fn parse(spec: &str) -> Result<Self, IngestError> {
        let trimmed = spec.trim();
        if trimmed.is_empty()
            || trimmed.eq_ignore_ascii_case("iso8601")
            || trimmed.eq_ignore_ascii_case("iso-8601")
        {
            return Ok(TimestampFormat::Iso8601);
        }
        if trimmed.contains('%') {
            return Ok(TimestampFormat::Pattern(trimmed.to_owned()));
        }
        letter_pattern_to_chrono(trimmed).map(TimestampFormat::Pattern)
    }

    /// Epoch milliseconds for `text`, or `None` if it does not match.
    pub fn parse_millis(&self, text: &str) -> Option<i64> {
        let text = text.trim();
        match self {
            TimestampFormat::Iso8601 => parse_iso(text),
            TimestampFormat::Pattern(fmt) => parse_pattern(text, fmt),
        }
    }
}

fn parse_iso(text: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp_millis());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f%:z",
        "%Y-%m-%d %H:%M:%S%.f%:z",
        "%Y-%m-%dT%H:%M:%S%.f%z",
    ] {
        if let Ok(dt) = DateTime::parse_from_str(text, fmt) {
            return Some(dt.timestamp_millis());
        }
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

fn parse_pattern(text: &str, fmt: &str) -> Option<i64> {
    if fmt.contains("%z") || fmt.contains("%:z") || fmt.contains("%#z") {
        return DateTime::parse_from_str(text, fmt)
            .ok()
            .map(|dt| dt.timestamp_millis());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
        return Some(dt.and_utc().timestamp_millis());
    }
    NaiveDate::parse_from_str(text, fmt)
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

/// Translates `yyyy-MM-dd HH:mm:ss.SSS`-style patterns. Text inside single
/// quotes is literal; `''` is a quote.
fn letter_pattern_to_chrono(pattern: &str) -> Result<String, IngestError> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\'' {
            if chars.get(i + 1) == Some(&'\'') {
                out.push('\'');
                i += 2;
                continue;
            }
            i += 1;
            while i < chars.len() && chars[i] != '\'' {
                push_literal(&mut out, chars[i]);
                i += 1;
            }
            i += 1;
            continue;
        }
        if !c.is_ascii_alphabetic() {
            push_literal(&mut out, c);
            i += 1;
            continue;
        }
        let mut run = 1;
        while i + run < chars.len() && chars[i + run] == c {
            run += 1;
        }
        let directive = match (c, run) {
            ('y', 2) => "%y",
            ('y', _) => "%Y",
            ('M', 1 | 2) => "%m",
            ('M', 3) => "%b",
            ('M', _) => "%B",
            ('d', 1 | 2) => "%d",
            ('H', 1 | 2) => "%H",
            ('h', 1 | 2) => "%I",
            ('a', _) => "%p",
            ('m', 1 | 2) => "%M",
            ('s', 1 | 2) => "%S",
            ('S', 1..=3) => "%3f",
            ('S', 4..=6) => "%6f",
            ('S', _) => "%9f",
            ('X', 1) | ('Z', _) => "%z",
            ('X', _) | ('x', _) => "%:z",
            ('E', _) => "%a",
            _ => {
                return Err(IngestError::InvalidConfig(format!(
                    "unsupported pattern letter {c:?} in timestamp format {pattern:?}"
                )))
            }
        };
        out.push_str(directive);
        i += run;
    }
    Ok(out)
}

fn push_literal(out: &mut String, c: char) {
    if c == '%' {
        out.push_str("%%");
    } else {
        out.push(c);
    }
}
