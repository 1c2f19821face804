mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::synth::{self, ACTIVITIES};
use ekg_core::aggregate::{self, AggregatedGraph};
use ekg_core::ingest::{self, EntityRule};
use ekg_core::model::{self, DF, DF_C, ENTITY_TYPE, ENTITY_UID, UID};
use ekg_core::pattern::{self, Cell};
use ekg_core::pipeline::{self, PipelineOptions};
use ekg_core::query::{self, DurationMode};
use ekg_core::store::props;
use ekg_core::validate::{self, Family};
use ekg_core::{LabeledPropertyGraph, NodeRef, PropertyValue, RelRef};
use proptest::prelude::*;
use proptest::sample::select;

fn uid(g: &LabeledPropertyGraph, n: NodeRef) -> String {
    g.node(n)
        .unwrap()
        .prop(UID)
        .map(PropertyValue::to_plain_string)
        .unwrap_or_default()
}

fn time(g: &LabeledPropertyGraph, e: NodeRef) -> (i64, NodeRef) {
    model::order_key(g.node(e).unwrap()).unwrap()
}

fn entities(g: &LabeledPropertyGraph, t: &str) -> Vec<NodeRef> {
    model::entities_of_type(g, t).map(|n| n.id).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rerunning_derivations_changes_nothing(t in synth::table()) {
        let mut g = t.build();
        let before = g.census();
        let cfg = t.config();
        prop_assert_eq!(ingest::create_logs(&mut g, &cfg.default_log_id).unwrap(), 0);
        for rule in &cfg.entities {
            prop_assert_eq!(ingest::derive_entities(&mut g, rule).unwrap(), 0);
            prop_assert_eq!(ingest::correlate_events(&mut g, rule).unwrap(), 0);
            prop_assert_eq!(ingest::derive_df(&mut g, &rule.entity_type, true).unwrap(), 0);
        }
        prop_assert_eq!(g.census(), before);
    }

    #[test]
    fn df_of_each_entity_is_a_chain_over_its_events(t in synth::table()) {
        let g = t.build();
        for ty in t.entity_types() {
            for n in entities(&g, &ty) {
                let id = uid(&g, n);
                let mut events = model::correlated_events(&g, n);
                events.sort_by_key(|e| time(&g, *e));
                let mut chain: Vec<(NodeRef, NodeRef)> = g
                    .relationships_of_type(DF)
                    .filter(|r| r.text(ENTITY_UID) == Some(id.as_str()))
                    .map(|r| (r.source, r.target))
                    .collect();
                chain.sort_by_key(|(a, _)| time(&g, *a));
                let want: Vec<(NodeRef, NodeRef)> = events.windows(2).map(|w| (w[0], w[1])).collect();
                prop_assert_eq!(chain, want);
            }
        }
    }

    #[test]
    fn every_df_edge_has_a_witness(t in synth::table()) {
        let g = t.build();
        for r in g.relationships_of_type(DF) {
            prop_assert!(time(&g, r.source) < time(&g, r.target));
            let ty = r.text(ENTITY_TYPE).unwrap();
            let witnessed = entities(&g, ty).into_iter().any(|n| {
                let evs = model::correlated_events(&g, n);
                evs.contains(&r.source)
                    && evs.contains(&r.target)
                    && !evs.iter().any(|e| time(&g, r.source) < time(&g, *e) && time(&g, *e) < time(&g, r.target))
            });
            prop_assert!(witnessed, "{} has no witness", r.id);
        }
    }

    #[test]
    fn ingested_tables_satisfy_the_typing_constraints(t in synth::table()) {
        let g = t.build_classified();
        let report = validate::validate(&g, &Family::ALL.into_iter().collect());
        prop_assert!(report.is_empty(), "{}", report.to_text());
    }

    #[test]
    fn eventually_follows_is_the_closure_of_df(
        t in synth::table(),
        from in select(ACTIVITIES.to_vec()),
        to in select(ACTIVITIES.to_vec()),
    ) {
        let g = t.build();
        for i in 0..t.types {
            let ty = synth::entity_type(i);
            let got: BTreeSet<(String, usize, usize)> = query::eventually_follows(&g, &ty, from, to)
                .unwrap()
                .into_iter()
                .map(|p| {
                    let first = p.events[0].0 as usize;
                    let last = p.events.last().unwrap().0 as usize;
                    (uid(&g, p.entity), first, last)
                })
                .collect();
            let want: BTreeSet<(String, usize, usize)> = t
                .oracle_eventually(i, from, to)
                .into_iter()
                .map(|(id, a, b)| (format!("{ty}{id}"), a, b))
                .collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn variant_length_is_event_count(t in synth::table()) {
        let g = t.build();
        for ty in t.entity_types() {
            for n in entities(&g, &ty) {
                let variant = query::variant_of(&g, &uid(&g, n), &ty).unwrap();
                prop_assert_eq!(variant.len(), model::correlated_events(&g, n).len());
            }
        }
    }

    #[test]
    fn durations_ignore_unrelated_entities(
        t in synth::table(),
        from in select(ACTIVITIES.to_vec()),
        to in select(ACTIVITIES.to_vec()),
    ) {
        let mut g = t.build();
        let before = query::duration_between(&g, "T0", from, to, DurationMode::All).unwrap();
        prop_assert!(before.iter().all(|d| d.elapsed_ms >= 0));
        let rule = EntityRule::new("Z", "X");
        if ingest::derive_entities(&mut g, &rule).unwrap() > 0 {
            ingest::correlate_events(&mut g, &rule).unwrap();
            ingest::derive_df(&mut g, "Z", true).unwrap();
        }
        let after = query::duration_between(&g, "T0", from, to, DurationMode::All).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn aggregation_is_idempotent_and_consistent(t in synth::table()) {
        let mut g = t.build_classified();
        let types = t.entity_types();
        let refs: Vec<&str> = types.iter().map(String::as_str).collect();
        let first = aggregate::entity_centric_dfg(&mut g, "Activity", &refs).unwrap();
        let edges = g.count_type(DF_C);
        let second = aggregate::entity_centric_dfg(&mut g, "Activity", &refs).unwrap();
        prop_assert_eq!(g.count_type(DF_C), edges);
        let strip = |a: &AggregatedGraph| -> Vec<(String, String, String, i64)> {
            a.edges.iter().map(|e| (e.source_id.clone(), e.target_id.clone(), e.entity_type.clone(), e.count)).collect()
        };
        prop_assert_eq!(strip(&first), strip(&second));
        let report = validate::validate(&g, &[Family::V5, Family::V6].into_iter().collect());
        prop_assert!(report.is_empty(), "{}", report.to_text());
    }

    #[test]
    fn pipeline_summary_matches_census(t in synth::table()) {
        let cfg = t.config();
        let table = ingest::read_event_table(t.to_csv().as_bytes(), &cfg.import_config().unwrap()).unwrap();
        let out = pipeline::run_pipeline_on(&cfg, &table, &PipelineOptions::default(), &mut |_| {}).unwrap();
        prop_assert_eq!(&out.summary.census, &out.graph.census());
        prop_assert_eq!(out.summary.violations, 0);
        for ty in t.entity_types() {
            let n = out.summary.df_by_entity_type.get(&ty).copied().unwrap_or(0);
            prop_assert_eq!(n, out.graph.relationships_of_type(DF).filter(|r| r.text(ENTITY_TYPE) == Some(ty.as_str())).count());
        }
    }
}

/// Up to 8 nodes with random `R` edges, self-loops and cycles included.
fn cyclic_graph() -> impl Strategy<Value = LabeledPropertyGraph> {
    (1usize..8)
        .prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n, 0i64..3), 0..14)))
        .prop_map(|(n, edges)| {
            let mut g = LabeledPropertyGraph::new();
            let nodes: Vec<NodeRef> = (0..n)
                .map(|i| {
                    g.add_node(["N"], props([("k", PropertyValue::Int(i as i64 % 3))]))
                        .unwrap()
                })
                .collect();
            for (a, b, w) in edges {
                g.add_relationship(
                    nodes[a],
                    nodes[b],
                    "R",
                    props([("w", PropertyValue::Int(w))]),
                )
                .unwrap();
            }
            g
        })
}

fn rels_of(cell: &Cell) -> Vec<RelRef> {
    match cell {
        Cell::Rel(r) => vec![*r],
        Cell::Path(rs) => rs.clone(),
        _ => Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn no_relationship_is_used_twice(g in cyclic_graph()) {
        let q = pattern::parse("MATCH (a)-[r:R]->(b) MATCH (b)-[p:R*1..3]->(c)-[s:R]->(d) RETURN r, p, s").unwrap();
        let table = pattern::evaluate(&g, &q).unwrap();
        for row in &table.rows {
            let used: Vec<RelRef> = row.iter().flat_map(rels_of).collect();
            let distinct: BTreeSet<RelRef> = used.iter().copied().collect();
            prop_assert_eq!(used.len(), distinct.len(), "{:?}", row);
        }
        let two = pattern::evaluate(&g, &pattern::parse("MATCH (a)-[r1:R]->(b)-[r2:R]->(c) RETURN r1, r2").unwrap()).unwrap();
        let brute: usize = g
            .relationships_of_type("R")
            .map(|r1| g.relationships_of_type("R").filter(|r2| r2.id != r1.id && r2.source == r1.target).count())
            .sum();
        prop_assert_eq!(two.len(), brute);
    }

    #[test]
    fn clause_order_does_not_change_results(g in cyclic_graph(), k in 0i64..3) {
        let first = format!(
            "MATCH (a:N)-[r:R]->(b:N) MATCH (b)-[s:R]->(c:N {{k: {k}}}) WHERE r.w <= s.w RETURN a, c, r"
        );
        let second = format!(
            "MATCH (b)-[s:R]->(c:N {{k: {k}}}) MATCH (a:N)-[r:R]->(b:N) WHERE r.w <= s.w RETURN a, c, r"
        );
        let x = pattern::evaluate(&g, &pattern::parse(&first).unwrap()).unwrap();
        let y = pattern::evaluate(&g, &pattern::parse(&second).unwrap()).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn var_length_matches_bounded_walks(g in cyclic_graph(), hops in 1u32..4) {
        let q = pattern::parse(&format!("MATCH (a)-[p:R*1..{hops}]->(b) RETURN p")).unwrap();
        let got: BTreeSet<Vec<RelRef>> = pattern::evaluate(&g, &q)
            .unwrap()
            .rows
            .iter()
            .map(|r| rels_of(&r[0]))
            .collect();
        let mut want = BTreeSet::new();
        let mut frontier: Vec<Vec<RelRef>> = g.relationships_of_type("R").map(|r| vec![r.id]).collect();
        for _ in 0..hops {
            let mut next = Vec::new();
            for path in frontier {
                let end = g.relationship(*path.last().unwrap()).unwrap().target;
                for r in g.out_rels(end, Some("R")) {
                    if !path.contains(&r.id) {
                        let mut longer = path.clone();
                        longer.push(r.id);
                        next.push(longer);
                    }
                }
                want.insert(path);
            }
            frontier = next;
        }
        prop_assert_eq!(got, want);
    }
}

#[test]
fn fixture_df_counts_match_summary() {
    let out = common::fixture_pipeline();
    let mut per_type: BTreeMap<String, usize> = BTreeMap::new();
    for r in out.graph.relationships_of_type(DF) {
        *per_type
            .entry(r.text(ENTITY_TYPE).unwrap().to_owned())
            .or_default() += 1;
    }
    assert_eq!(out.summary.df_by_entity_type, per_type);
    assert_eq!(out.summary.census, out.graph.census());
}

#[test]
fn fixture_row_seven_has_one_incoming_df_edge_per_entity() {
    let g = common::fixture_pipeline().graph;
    let mut incoming: Vec<(String, NodeRef)> = g
        .in_rels(common::row(7), Some(DF))
        .map(|r| (r.text(ENTITY_TYPE).unwrap().to_owned(), r.source))
        .collect();
    incoming.sort();
    let want: Vec<(String, NodeRef)> = [("Case", 6), ("Case_AO", 4), ("Offer", 4), ("Resource", 6)]
        .iter()
        .map(|(t, n)| (t.to_string(), common::row(*n)))
        .collect();
    assert_eq!(incoming, want);
}
