//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line.

mod common;

use std::cell::Cell as StdCell;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{fixture_config, fixture_csv, row, synth};
use ekg_core::aggregate::{self, AggregatedGraph};
use ekg_core::model::{self, DF, E_C, E_EN, L_E};
use ekg_core::pattern::{self, Cell, PatternError};
use ekg_core::pipeline::{self, PipelineOptions};
use ekg_core::query::{self, DurationMode};
use ekg_core::store::props;
use ekg_core::validate::{self, ElementRef, Family};
use ekg_core::{Comparator, LabeledPropertyGraph, NodeRef, Predicate, Properties, PropertyValue};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

macro_rules! ensure_eq {
    ($left:expr, $right:expr, $what:expr) => {{
        let (l, r) = (&$left, &$right);
        if l != r {
            return Err(format!("{}: got {:?}, expected {:?}", $what, l, r));
        }
    }};
}

fn v1_to_v4() -> BTreeSet<Family> {
    [Family::V1, Family::V2, Family::V3, Family::V4]
        .into_iter()
        .collect()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn golden_fixture() -> Check {
    let start = Instant::now();
    let out = pipeline::run_pipeline(
        &fixture_config(),
        &fixture_csv(),
        &PipelineOptions::default(),
        &mut |_| {},
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let g = &out.graph;
    ensure_eq!(g.count_label("Event"), 10, "Event nodes");
    ensure_eq!(g.count_label("Log"), 1, "Log nodes");
    ensure_eq!(g.count_label("Entity"), 14, "Entity nodes");
    let want_df: BTreeMap<String, usize> = [
        ("Application", 2),
        ("Workflow", 1),
        ("Offer", 3),
        ("Resource", 3),
        ("Case_AO", 9),
        ("Case", 9),
    ]
    .into_iter()
    .map(|(t, n)| (t.to_owned(), n))
    .collect();
    let mut got_df: BTreeMap<String, usize> = BTreeMap::new();
    for r in g.relationships_of_type(DF) {
        *got_df
            .entry(r.text(model::ENTITY_TYPE).unwrap_or("").to_owned())
            .or_default() += 1;
    }
    ensure_eq!(got_df, want_df, "DF edges per entity type");
    ensure_eq!(g.count_type(L_E), 10, "L_E edges");
    let want_en: BTreeMap<String, usize> = [
        ("Application", 3),
        ("Workflow", 2),
        ("Offer", 5),
        ("Resource", 10),
        ("Case", 10),
        ("Case_AO", 11),
    ]
    .into_iter()
    .map(|(t, n)| (t.to_owned(), n))
    .collect();
    let mut got_en: BTreeMap<String, usize> = BTreeMap::new();
    for r in g.relationships_of_type(E_EN) {
        let t = g
            .node(r.target)
            .ok()
            .and_then(|n| n.text(model::ENTITY_TYPE))
            .unwrap_or("");
        *got_en.entry(t.to_owned()).or_default() += 1;
    }
    ensure_eq!(got_en, want_en, "E_EN edges per entity type");
    let report = validate::validate(g, &v1_to_v4());
    ensure!(report.is_empty(), "V1-V4 violations:\n{}", report.to_text());
    ensure!(
        elapsed < Duration::from_secs(1),
        "pipeline took {elapsed:?}"
    );
    Ok(format!(
        "40 nodes, 98 relationships, 0 violations in {elapsed:?}"
    ))
}

fn counter_example() -> Check {
    let mut g = LabeledPropertyGraph::new();
    let log = g
        .add_node([model::LOG], props([(model::ID, "L")]))
        .map_err(|e| e.to_string())?;
    let event = |g: &mut LabeledPropertyGraph, activity: &str, ts: i64| {
        g.add_node(
            [model::EVENT],
            props([
                (model::ACTIVITY, PropertyValue::from(activity)),
                (model::TIMESTAMP, PropertyValue::Timestamp(ts)),
            ]),
        )
        .unwrap()
    };
    let e1 = event(&mut g, "a", 10);
    let e2 = event(&mut g, "b", 30);
    let e3 = event(&mut g, "c", 20);
    let entity = |g: &mut LabeledPropertyGraph, id: &str| {
        g.add_node(
            [model::ENTITY],
            props([
                (model::ENTITY_TYPE, "A"),
                (model::ID, id),
                (model::UID, &format!("A{id}") as &str),
            ]),
        )
        .unwrap()
    };
    let n1 = entity(&mut g, "1");
    let n2 = entity(&mut g, "2");
    for e in [e1, e2, e3] {
        g.add_relationship(log, e, L_E, Properties::new()).unwrap();
    }
    for (e, n) in [(e1, n1), (e2, n2), (e3, n2)] {
        g.add_relationship(e, n, E_EN, Properties::new()).unwrap();
    }
    let df = |g: &mut LabeledPropertyGraph, a: NodeRef, b: NodeRef| {
        g.add_relationship(a, b, DF, props([(model::ENTITY_TYPE, "A")]))
            .unwrap()
    };
    let across = df(&mut g, e1, e2);
    let backwards = df(&mut g, e2, e3);
    let looped = df(&mut g, e3, e3);
    let report = validate::validate(&g, &Family::ALL.into_iter().collect());
    ensure_eq!(report.len(), 3, "violation count");
    ensure!(
        report.violations.iter().all(|v| v.family == Family::V3),
        "non-V3 violation:\n{}",
        report.to_text()
    );
    let mut flagged: Vec<ElementRef> = report
        .violations
        .iter()
        .flat_map(|v| v.refs.first().copied())
        .collect();
    flagged.sort();
    let mut want: Vec<ElementRef> = vec![across.into(), backwards.into(), looped.into()];
    want.sort();
    ensure_eq!(flagged, want, "flagged edges");
    Ok("3 V3 violations (order, witness, self-loop)".into())
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let tables = StdCell::new(0usize);
    let min_tie = StdCell::new(1.0f64);
    let outcome = runner(128).run(&synth::table(), |t| {
        tables.set(tables.get() + 1);
        min_tie.set(min_tie.get().min(t.tie_rate()));
        let fail = |m: String| proptest::test_runner::TestCaseError::fail(m);
        if t.rows.len() > 50 || t.types > 3 || t.tie_rate() < 0.2 {
            return Err(fail(format!(
                "generator out of bounds: {} rows, {} types",
                t.rows.len(),
                t.types
            )));
        }
        let g = t.build();
        for i in 0..t.types {
            let got = query::directly_follows_pairs(&g, &synth::entity_type(i), None, None)
                .map_err(|e| fail(e.to_string()))?;
            if got != t.oracle_df(i) {
                return Err(fail(format!(
                    "T{i}: {got:?} vs {:?}\n{}",
                    t.oracle_df(i),
                    t.to_csv()
                )));
            }
        }
        if let Some(cycle) = validate::acyclicity_check(&g) {
            return Err(fail(format!("cycle {cycle:?}")));
        }
        let report = validate::validate(&g, &v1_to_v4());
        if !report.is_empty() {
            return Err(fail(report.to_text()));
        }
        Ok(())
    });
    let elapsed = start.elapsed();
    outcome.map_err(|e| e.to_string())?;
    ensure!(tables.get() >= 100, "only {} tables checked", tables.get());
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "{} tables, minimum tie rate {:.0}%, {elapsed:?}",
        tables.get(),
        min_tie.get() * 100.0
    ))
}

fn classified_df(g: &LabeledPropertyGraph, entity_type: &str) -> i64 {
    let has_class = |e: NodeRef| {
        g.out_rels(e, Some(E_C)).any(|r| {
            g.node(r.target)
                .is_ok_and(|c| c.text(model::TYPE) == Some("Activity"))
        })
    };
    g.relationships_of_type(DF)
        .filter(|r| r.text(model::ENTITY_TYPE) == Some(entity_type))
        .filter(|r| has_class(r.source) && has_class(r.target))
        .count() as i64
}

fn conserved(g: &mut LabeledPropertyGraph, types: &[String]) -> Result<(), String> {
    for t in types {
        aggregate::aggregate_df(g, "Activity", t).map_err(|e| e.to_string())?;
        let total = AggregatedGraph::from_graph(g, "Activity", &[t.as_str()]).total_count();
        let want = classified_df(g, t);
        ensure_eq!(total, want, format!("DF_C count sum for {t}"));
    }
    Ok(())
}

fn aggregation_conservation() -> Check {
    let mut g = common::fixture_pipeline().graph;
    let types: Vec<String> = [
        "Application",
        "Workflow",
        "Offer",
        "Resource",
        "Case_AO",
        "Case",
    ]
    .map(String::from)
    .to_vec();
    conserved(&mut g, &types)?;
    let tables = StdCell::new(0usize);
    runner(128)
        .run(&synth::table(), |t| {
            tables.set(tables.get() + 1);
            let mut g = t.build_classified();
            conserved(&mut g, &t.entity_types()).map_err(proptest::test_runner::TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    let net = aggregate::handover_network(&mut g, "Case").map_err(|e| e.to_string())?;
    let mut got: Vec<(String, String)> = net
        .edges
        .iter()
        .map(|e| (e.source_id.clone(), e.target_id.clone()))
        .collect();
    got.sort();
    let mut want: Vec<(String, String)> = [
        ("9", "10"),
        ("10", "42"),
        ("42", "11"),
        ("11", "11"),
        ("11", "12"),
        ("12", "12"),
        ("12", "44"),
        ("44", "16"),
        ("16", "44"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    want.sort();
    ensure_eq!(got, want, "handover edges");
    Ok(format!(
        "fixture and {} random tables conserve counts; 9 handover edges",
        tables.get()
    ))
}

fn rows(ns: &[u64]) -> Vec<NodeRef> {
    ns.iter().map(|n| row(*n)).collect()
}

fn e<T>(r: Result<T, query::QueryError>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn query_catalog() -> Check {
    let g = common::fixture_pipeline().graph;

    let q1 = e(query::events_of_entity(
        &g,
        "Case1",
        &[Predicate::new("Activity", Comparator::Eq, "Create Appl.")],
    ))?;
    ensure_eq!(
        q1.into_iter().collect::<Vec<_>>(),
        rows(&[1]),
        "Q1 Case1 Create Appl."
    );
    let q1b = e(query::events_of_entity(&g, "Offer1", &[]))?;
    ensure_eq!(
        q1b.into_iter().collect::<Vec<_>>(),
        rows(&[4, 7]),
        "Q1 Offer1"
    );

    let q2 = e(query::directly_follows_pairs(
        &g,
        "Offer",
        Some("Create Offer"),
        None,
    ))?;
    ensure_eq!(
        q2,
        vec![(row(4), row(7)), (row(5), row(6))],
        "Q2 Create Offer"
    );
    let q2b = e(query::directly_follows_pairs(
        &g,
        "Offer",
        Some("Send Offer"),
        Some("Offer Returned"),
    ))?;
    ensure_eq!(
        q2b,
        vec![(row(6), row(9))],
        "Q2 Send Offer -> Offer Returned"
    );
    let q2c = e(query::directly_follows_pairs(
        &g,
        "Application",
        Some("Appl. Complete"),
        None,
    ))?;
    ensure!(q2c.is_empty(), "Q2 Appl. Complete has successors {q2c:?}");

    let q3 = e(query::eventually_follows(
        &g,
        "Offer",
        "Create Offer",
        "Offer Returned",
    ))?;
    ensure_eq!(q3.len(), 1, "Q3 path count");
    ensure_eq!(q3[0].events, rows(&[5, 6, 9]), "Q3 path");
    let q3b = e(query::eventually_follows(
        &g,
        "Case_AO",
        "Create Appl.",
        "Appl. Complete",
    ))?;
    let mut lens: Vec<usize> = q3b.iter().map(|p| p.len()).collect();
    lens.sort();
    ensure_eq!(lens, vec![4, 5], "Q3 Case_AO path lengths");

    let q4 = e(query::variant_of(&g, "Offer2", "Offer"))?;
    ensure_eq!(
        q4,
        ["Create Offer", "Send Offer", "Offer Returned"],
        "Q4 Offer2"
    );
    let q4b = e(query::variant_of(&g, "Case1", "Case"))?;
    ensure_eq!(
        q4b,
        [
            "Create Appl.",
            "Appl. Ready",
            "Handle Leads",
            "Create Offer",
            "Create Offer",
            "Send Offer",
            "Send Offer",
            "Call Offers",
            "Offer Returned",
            "Appl. Complete"
        ],
        "Q4 Case1"
    );

    let q5 = e(query::duration_between(
        &g,
        "Offer",
        "Create Offer",
        "Offer Returned",
        DurationMode::Max,
    ))?;
    ensure_eq!(q5.len(), 1, "Q5 max result count");
    ensure_eq!(q5[0].entity_uid, "Offer2", "Q5 max entity");
    ensure_eq!(q5[0].elapsed_ms, 24 * 3_600_000, "Q5 max elapsed");
    let q5b = e(query::duration_between(
        &g,
        "Offer",
        "Create Offer",
        "Send Offer",
        DurationMode::All,
    ))?;
    let got: Vec<(&str, i64)> = q5b
        .iter()
        .map(|d| (d.entity_uid.as_str(), d.elapsed_ms))
        .collect();
    ensure_eq!(
        got,
        vec![
            ("Offer1", (4 * 60 + 46) * 60_000),
            ("Offer2", (4 * 60 + 11) * 60_000)
        ],
        "Q5 all"
    );

    let q6 = e(query::entities_with_df_pattern(
        &g,
        "Offer",
        "Create Offer",
        "Send Offer",
        "Case",
        2,
    ))?;
    ensure_eq!(q6, BTreeSet::from(["Case1".to_owned()]), "Q6 parents");
    let targets: BTreeSet<NodeRef> = e(query::df_pattern_occurrences(
        &g,
        "Offer",
        "Create Offer",
        "Send Offer",
    ))?
    .into_iter()
    .map(|o| o.to_event)
    .collect();
    let paths = e(query::paths_in_parent(
        &g,
        "Case1",
        "Create Appl.",
        &targets,
    ))?;
    ensure_eq!(paths.len(), 2, "Q6 path count");
    ensure!(
        paths
            .iter()
            .all(|p| p.events[0] == row(1) && targets.contains(p.events.last().unwrap())),
        "Q6 paths do not run from row 1 to the targets"
    );
    let none = e(query::entities_with_df_pattern(
        &g,
        "Offer",
        "Create Offer",
        "Send Offer",
        "Case",
        3,
    ))?;
    ensure!(none.is_empty(), "Q6 with min count 3 returned {none:?}");
    let p9 = e(query::paths_in_parent(
        &g,
        "Case1",
        "Create Appl.",
        &BTreeSet::from([row(9)]),
    ))?;
    ensure_eq!(
        p9.iter().map(|p| p.len()).collect::<Vec<_>>(),
        vec![8],
        "Q6 path to row 9"
    );
    Ok("Q1-Q6 values reproduced".into())
}

fn node_set(
    g: &LabeledPropertyGraph,
    text: &str,
    cols: &[&str],
) -> Result<BTreeSet<Vec<NodeRef>>, String> {
    let ast = pattern::parse(text).map_err(|e| e.to_string())?;
    let table = pattern::evaluate(g, &ast).map_err(|e| e.to_string())?;
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| {
            table
                .columns
                .iter()
                .position(|x| x == c)
                .ok_or(format!("missing column {c}"))
        })
        .collect::<Result<_, _>>()?;
    table
        .rows
        .iter()
        .map(|r| {
            idx.iter()
                .map(|i| match &r[*i] {
                    Cell::Node(n) => Ok(*n),
                    other => Err(format!("expected a node, got {other}")),
                })
                .collect()
        })
        .collect()
}

fn pattern_language() -> Check {
    let g = common::fixture_pipeline().graph;
    let q1 = node_set(
        &g,
        "MATCH (c:Entity {uID: 'Case1'}) <-[:E_EN]- (e:Event) WHERE e.Activity = 'Create Appl.' RETURN e",
        &["e"],
    )?;
    let want1: BTreeSet<Vec<NodeRef>> = query::events_of_entity(
        &g,
        "Case1",
        &[Predicate::new("Activity", Comparator::Eq, "Create Appl.")],
    )
    .map_err(|e| e.to_string())?
    .into_iter()
    .map(|n| vec![n])
    .collect();
    ensure_eq!(q1, want1, "Q1 pattern");

    let q2 = node_set(
        &g,
        "MATCH (e1:Event) -[:DF {EntityType: 'Offer'}]-> (e2:Event) WHERE e1.Activity = 'Create Offer' RETURN e1, e2",
        &["e1", "e2"],
    )?;
    let want2: BTreeSet<Vec<NodeRef>> =
        query::directly_follows_pairs(&g, "Offer", Some("Create Offer"), None)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|(a, b)| vec![a, b])
            .collect();
    ensure_eq!(q2, want2, "Q2 pattern");

    let q3 = node_set(
        &g,
        "MATCH (o:Entity {EntityType: 'Offer'}) <-[:E_EN]- (e1:Event) -[:DF*]-> (e2:Event)
         MATCH (e2) -[:E_EN]-> (o)
         WHERE e1.Activity = 'Create Offer' AND e2.Activity = 'Offer Returned'
         RETURN e1, e2",
        &["e1", "e2"],
    )?;
    let want3: BTreeSet<Vec<NodeRef>> =
        query::eventually_follows(&g, "Offer", "Create Offer", "Offer Returned")
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|p| vec![p.events[0], *p.events.last().unwrap()])
            .collect();
    ensure_eq!(q3, want3, "Q3 pattern");

    let cases = StdCell::new(0usize);
    runner(1000)
        .run(&common::ast_gen::query(), |ast| {
            cases.set(cases.get() + 1);
            let text = ast.to_string();
            let parsed = pattern::parse(&text)
                .map_err(|e| proptest::test_runner::TestCaseError::fail(format!("{e}: {text}")))?;
            if parsed != ast || pattern::parse(&parsed.to_string()).ok() != Some(parsed.clone()) {
                return Err(proptest::test_runner::TestCaseError::fail(format!(
                    "round trip changed {text}"
                )));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    ensure!(cases.get() >= 1000, "only {} round trips", cases.get());

    for bad in [
        "MATCH (e:Event RETURN e",
        "MATCH (e:Event) RETURN",
        "MATCH (a)-[:DF]-(b) RETURN a",
        "RETURN e",
        "MATCH (e:Event)\nWHERE e.Activity = RETURN e",
    ] {
        match pattern::parse(bad).map_err(PatternError::from) {
            Err(PatternError::Syntax(s)) => {
                ensure!(
                    s.line >= 1 && s.column >= 1 && !s.expected.is_empty(),
                    "no position for {bad:?}: {s}"
                );
            }
            other => return Err(format!("{bad:?} gave {other:?}")),
        }
    }
    let missing = pattern::parse("MATCH (e:Event RETURN e").unwrap_err();
    ensure!(
        (missing.line, missing.column) == (1, 16)
            && missing.expected.iter().any(|x| x.contains(')')),
        "unexpected position or expectation: {missing}"
    );
    Ok(format!(
        "Q1-Q3 set-equal, {} round trips, malformed inputs positioned",
        cases.get()
    ))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ekg"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "ekg {args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(out.stdout)
}

fn end_to_end(dir: &Path) -> Result<BTreeMap<&'static str, Vec<u8>>, String> {
    let (cfg, csv) = (fixture_config(), fixture_csv());
    run_cli(
        dir,
        &[
            "import",
            "--config",
            cfg.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--out",
            "graph.snap",
        ],
    )?;
    run_cli(
        dir,
        &[
            "export",
            "graph.snap",
            "--dot",
            "full.dot",
            "--scope",
            "full",
        ],
    )?;
    run_cli(
        dir,
        &[
            "export",
            "graph.snap",
            "--dot",
            "offer.dot",
            "--scope",
            "entityType=Offer",
        ],
    )?;
    run_cli(dir, &["export", "graph.snap", "--graphml", "full.graphml"])?;
    let mut out = BTreeMap::new();
    out.insert(
        "aggregate.csv",
        run_cli(
            dir,
            &[
                "aggregate",
                "graph.snap",
                "--class",
                "Activity",
                "--entities",
                "Offer,Application",
                "--format",
                "csv",
            ],
        )?,
    );
    out.insert(
        "query.csv",
        run_cli(
            dir,
            &[
                "query",
                "graph.snap",
                "--format",
                "csv",
                "-e",
                "MATCH (e1:Event) -[r:DF]-> (e2:Event) RETURN e1, r, e2, e1.Activity",
            ],
        )?,
    );
    out.insert(
        "durations.csv",
        run_cli(
            dir,
            &[
                "qf",
                "graph.snap",
                "--format",
                "csv",
                "duration",
                "--type",
                "Offer",
                "--from",
                "Create Offer",
                "--to",
                "Send Offer",
                "--mode",
                "all",
            ],
        )?,
    );
    for f in ["graph.snap", "full.dot", "offer.dot", "full.graphml"] {
        out.insert(f, std::fs::read(dir.join(f)).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn determinism() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = end_to_end(a.path())?;
    let second = end_to_end(b.path())?;
    for (name, bytes) in &first {
        ensure!(!bytes.is_empty(), "{name} is empty");
        ensure!(
            second.get(name) == Some(bytes),
            "{name} differs between runs"
        );
    }
    Ok(format!("{} artifacts byte-identical", first.len()))
}

/// Writes past the test harness capture so the line always shows.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 7] = [
        ("golden fixture", golden_fixture),
        ("validator counter-example", counter_example),
        (
            "directly-follows oracle on random tables",
            oracle_equivalence,
        ),
        ("aggregation conservation", aggregation_conservation),
        ("query catalog", query_catalog),
        ("pattern language", pattern_language),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => report(&format!("PASS criterion {}: {name}: {detail}", i + 1)),
            Err(why) => {
                report(&format!("FAIL criterion {}: {name}: {why}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
