//! Random event tables with a brute-force directly-follows oracle.

use std::collections::{BTreeMap, BTreeSet};

use ekg_core::aggregate::{self, ClassifierRule};
use ekg_core::ingest::{self, DerivationConfig};
use ekg_core::{LabeledPropertyGraph, NodeRef};
use proptest::prelude::*;
use proptest::sample::select;

pub const ACTIVITIES: [&str; 5] = ["a", "b", "c", "d", "e"];
const IDS: [&str; 4] = ["1", "2", "3", "4"];
const TIME_FORMAT: &str = "dd.MM.yy HH:mm";

#[derive(Debug, Clone)]
pub struct SynthRow {
    pub activity: &'static str,
    /// Minutes after 01.01.20 00:00.
    pub minute: u32,
    /// One optional id per entity type.
    pub ids: Vec<Option<&'static str>>,
    /// Id in the column `X`, not covered by the base configuration.
    pub extra: Option<&'static str>,
}

#[derive(Debug, Clone)]
pub struct SynthTable {
    pub types: usize,
    pub rows: Vec<SynthRow>,
}

pub fn entity_type(i: usize) -> String {
    format!("T{i}")
}

impl SynthTable {
    pub fn entity_types(&self) -> Vec<String> {
        (0..self.types).map(entity_type).collect()
    }

    /// Share of rows whose timestamp equals that of another row.
    pub fn tie_rate(&self) -> f64 {
        let mut per_minute: BTreeMap<u32, usize> = BTreeMap::new();
        for r in &self.rows {
            *per_minute.entry(r.minute).or_default() += 1;
        }
        let tied: usize = per_minute.values().filter(|c| **c > 1).sum();
        tied as f64 / self.rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("Activity,Timestamp");
        for i in 0..self.types {
            out.push_str(&format!(",E{i}"));
        }
        out.push_str(",X\n");
        for r in &self.rows {
            let (day, rest) = (1 + r.minute / 1440, r.minute % 1440);
            out.push_str(&format!(
                "{},{day:02}.01.20 {:02}:{:02}",
                r.activity,
                rest / 60,
                rest % 60
            ));
            for id in &r.ids {
                out.push(',');
                out.push_str(id.unwrap_or(""));
            }
            out.push(',');
            out.push_str(r.extra.unwrap_or(""));
            out.push('\n');
        }
        out
    }

    pub fn config_json(&self) -> String {
        let rules: Vec<String> = (0..self.types)
            .map(|i| format!(r#"{{"entityType": "T{i}", "idColumn": "E{i}"}}"#))
            .collect();
        format!(
            r#"{{"timestampFormat": "{TIME_FORMAT}", "defaultLogId": "synth", "entities": [{}],
"classifiers": [{{"classType": "Activity", "keyColumns": ["Activity"]}}]}}"#,
            rules.join(", ")
        )
    }

    pub fn config(&self) -> DerivationConfig {
        DerivationConfig::from_json(&self.config_json()).expect("generated config is valid")
    }

    /// Events, log, entities, correlation and `DF`, without classes.
    pub fn build(&self) -> LabeledPropertyGraph {
        let cfg = self.config();
        let table =
            ingest::read_event_table(self.to_csv().as_bytes(), &cfg.import_config().unwrap())
                .unwrap();
        let mut g = LabeledPropertyGraph::new();
        ingest::import_events(&mut g, &table).unwrap();
        ingest::create_logs(&mut g, &cfg.default_log_id).unwrap();
        for rule in &cfg.entities {
            ingest::derive_entities(&mut g, rule).unwrap();
            ingest::correlate_events(&mut g, rule).unwrap();
        }
        for rule in &cfg.entities {
            ingest::derive_df(&mut g, &rule.entity_type, true).unwrap();
        }
        g
    }

    /// [`Self::build`] plus `Activity` classes.
    pub fn build_classified(&self) -> LabeledPropertyGraph {
        let mut g = self.build();
        let rule = ClassifierRule::new("Activity", ["Activity"]);
        aggregate::derive_classes(&mut g, &rule).unwrap();
        aggregate::link_event_classes(&mut g, &rule).unwrap();
        g
    }

    /// Row indices per entity id of type `t`, in (timestamp, row) order.
    pub fn histories(&self, t: usize) -> BTreeMap<&'static str, Vec<usize>> {
        let mut out: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(id) = r.ids[t] {
                out.entry(id).or_default().push(i);
            }
        }
        for rows in out.values_mut() {
            rows.sort_by_key(|i| (self.rows[*i].minute, *i));
        }
        out
    }

    /// Adjacent pairs of every history of type `t`, sorted.
    pub fn oracle_df(&self, t: usize) -> Vec<(NodeRef, NodeRef)> {
        let mut pairs: Vec<(NodeRef, NodeRef)> = self
            .histories(t)
            .values()
            .flat_map(|rows| {
                rows.windows(2)
                    .map(|w| (NodeRef(w[0] as u64), NodeRef(w[1] as u64)))
            })
            .collect();
        pairs.sort();
        pairs
    }

    /// Every (entity id, earlier row, later row) of type `t` with the given
    /// activities, where "earlier" follows the history order.
    pub fn oracle_eventually(
        &self,
        t: usize,
        from: &str,
        to: &str,
    ) -> BTreeSet<(&'static str, usize, usize)> {
        let mut out = BTreeSet::new();
        for (id, rows) in self.histories(t) {
            for (i, a) in rows.iter().enumerate() {
                for b in &rows[i + 1..] {
                    if self.rows[*a].activity == from && self.rows[*b].activity == to {
                        out.insert((id, *a, *b));
                    }
                }
            }
        }
        out
    }
}

fn row(types: usize, minutes: u32) -> impl Strategy<Value = SynthRow> {
    (
        select(ACTIVITIES.to_vec()),
        0..minutes,
        prop::collection::vec(prop::option::weighted(0.6, select(IDS.to_vec())), types),
        prop::option::weighted(0.4, select(IDS.to_vec())),
    )
        .prop_map(|(activity, slot, ids, extra)| SynthRow {
            activity,
            minute: slot * 7,
            ids,
            extra,
        })
}

fn repair(mut t: SynthTable) -> SynthTable {
    for r in &mut t.rows {
        if r.ids.iter().all(Option::is_none) {
            r.ids[0] = Some("1");
        }
    }
    for i in 0..t.types {
        if t.rows.iter().all(|r| r.ids[i].is_none()) {
            let k = i % t.rows.len();
            t.rows[k].ids[i] = Some("1");
        }
    }
    let mut k = 0;
    while t.tie_rate() < 0.2 && 2 * k + 1 < t.rows.len() {
        t.rows[2 * k + 1].minute = t.rows[2 * k].minute;
        k += 1;
    }
    t
}

/// 5 to 50 events, 1 to 3 entity types, at least 20% tied timestamps.
/// Every row has an id and every type occurs.
pub fn table() -> impl Strategy<Value = SynthTable> {
    (5usize..=50, 1usize..=3)
        .prop_flat_map(|(n, types)| {
            let minutes = n as u32;
            (Just(types), prop::collection::vec(row(types, minutes), n))
        })
        .prop_map(|(types, rows)| repair(SynthTable { types, rows }))
}
