use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use ekg_core::aggregate::{self, filter_by_count, AggregatedGraph};
use ekg_core::export::{self, ExportSelection, Scope};
use ekg_core::model::{self, DF_C, TYPE};
use ekg_core::pattern::{self, EvalOptions};
use ekg_core::pipeline::{run_pipeline, PipelineOptions};
use ekg_core::query::{self, DurationMode};
use ekg_core::validate::{validate_with, Family, ValidateOptions};
use ekg_core::{LabeledPropertyGraph, NodeRef, Predicate};

const USAGE: u8 = 1;
const INPUT: u8 = 2;
const VIOLATIONS: u8 = 3;
const INTERNAL: u8 = 4;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => INPUT,
            CliError::Internal(_) => INTERNAL,
        }
    }
}

type CliResult = Result<u8, CliError>;

/// Event knowledge graphs from multi-entity event tables.
#[derive(Debug, Parser)]
#[command(name = "ekg", version)]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a graph snapshot from an event table and a derivation config.
    Import(ImportArgs),
    /// Check the semantic constraints; exits with 3 when violations exist.
    Validate(ValidateArgs),
    /// Evaluate a pattern query.
    Query(QueryArgs),
    /// Run a named query primitive.
    Qf(QfArgs),
    /// Aggregate DF edges into class-level DF_C edges.
    Aggregate(AggregateArgs),
    /// Write DOT or GraphML.
    Export(ExportArgs),
    /// Node and relationship counts.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum TableFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct ImportArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "graph.snap")]
    out: PathBuf,
    /// On failure, save the graph built so far to OUT.
    #[arg(long)]
    keep_partial: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(default_value = "graph.snap")]
    graph: PathBuf,
    /// Comma-separated families, e.g. V1,V3.
    #[arg(long, value_delimiter = ',')]
    families: Vec<Family>,
    /// Report DF edges across logs as warnings instead of violations.
    #[arg(long)]
    allow_cross_log: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(default_value = "graph.snap")]
    graph: PathBuf,
    /// File holding the query text.
    #[arg(long, conflicts_with = "text")]
    file: Option<PathBuf>,
    /// Query text.
    #[arg(long, short = 'e')]
    text: Option<String>,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
    /// Print the plan instead of evaluating.
    #[arg(long)]
    explain: bool,
    /// Hop cap for variable-length relationships.
    #[arg(long, default_value_t = 1000)]
    max_hops: u32,
}

#[derive(Debug, Args)]
struct QfArgs {
    #[arg(default_value = "graph.snap")]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = TableFormat::Text, global = true)]
    format: TableFormat,
    #[command(subcommand)]
    primitive: Primitive,
}

#[derive(Debug, Subcommand)]
enum Primitive {
    /// Events of one entity, optionally of one activity.
    Events {
        #[arg(long)]
        entity: String,
        #[arg(long)]
        activity: Option<String>,
    },
    /// Directly-follows event pairs of an entity type.
    Df {
        #[arg(long = "type")]
        entity_type: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
    /// Paths from one activity to another along an entity's history.
    Ef {
        #[arg(long = "type")]
        entity_type: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Activity sequence of one entity.
    Variant {
        #[arg(long)]
        entity: String,
        #[arg(long = "type")]
        entity_type: String,
    },
    /// Elapsed time between two activities per entity.
    Duration {
        #[arg(long = "type")]
        entity_type: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value = "max")]
        mode: DurationMode,
    },
    /// Parents containing at least MIN_COUNT children with a DF pattern.
    Nested {
        #[arg(long)]
        child: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        parent: String,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        /// Also list, per parent, the path from this activity to each pattern target.
        #[arg(long)]
        paths_from: Option<String>,
    },
}

#[derive(Debug, Args)]
struct AggregateArgs {
    #[arg(default_value = "graph.snap")]
    graph: PathBuf,
    #[arg(long = "class")]
    class_type: String,
    #[arg(long, value_delimiter = ',', required = true)]
    entities: Vec<String>,
    #[arg(long, default_value_t = 1)]
    min_count: i64,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
    /// Write the aggregated graph back to the snapshot.
    #[arg(long)]
    save: bool,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(default_value = "graph.snap")]
    graph: PathBuf,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    graphml: Option<PathBuf>,
    /// full | entity=UID | entityType=T1,T2 | aggregated=CLASS:T1,T2[:MIN]
    #[arg(long, default_value = "full")]
    scope: String,
    /// Node labels to keep, e.g. Event,Entity.
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<String>>,
    /// Relationship types to keep, e.g. DF.
    #[arg(long, value_delimiter = ',')]
    rels: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(default_value = "graph.snap")]
    graph: PathBuf,
}

struct Ctx {
    quiet: bool,
}

impl Ctx {
    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("[ekg] {msg}");
        }
    }
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Internal(format!("writing output: {e}")))
}

fn load(path: &Path) -> Result<LabeledPropertyGraph, CliError> {
    LabeledPropertyGraph::load(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn save(graph: &LabeledPropertyGraph, path: &Path) -> Result<(), CliError> {
    graph
        .save(path)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn import(ctx: &Ctx, args: ImportArgs) -> CliResult {
    let options = PipelineOptions {
        keep_partial: args.keep_partial,
        ..Default::default()
    };
    let result = run_pipeline(&args.config, &args.csv, &options, &mut |stage| {
        ctx.progress(stage)
    });
    match result {
        Ok(out) => {
            save(&out.graph, &args.out)?;
            ctx.progress(&format!("wrote {}", args.out.display()));
            emit(&out.summary.to_text())?;
            Ok(0)
        }
        Err(e) => {
            if let Some(partial) = &e.partial {
                save(partial, &args.out)?;
                ctx.progress(&format!("partial graph written to {}", args.out.display()));
            }
            Err(CliError::input(e))
        }
    }
}

fn validate(ctx: &Ctx, args: ValidateArgs) -> CliResult {
    let graph = load(&args.graph)?;
    let mut options = ValidateOptions {
        allow_cross_log: args.allow_cross_log,
        ..Default::default()
    };
    if !args.families.is_empty() {
        options.families = args.families.into_iter().collect();
    }
    let report = validate_with(&graph, &options);
    emit(&match args.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Json => report.to_json_lines(),
    })?;
    ctx.progress(&format!(
        "{} violations, {} warnings",
        report.violations.len(),
        report.warnings.len()
    ));
    Ok(if report.is_empty() { 0 } else { VIOLATIONS })
}

fn query_text(args: &QueryArgs) -> Result<String, CliError> {
    match (&args.file, &args.text) {
        (Some(f), _) => {
            std::fs::read_to_string(f).map_err(|e| CliError::Input(format!("{}: {e}", f.display())))
        }
        (None, Some(t)) => Ok(t.clone()),
        (None, None) => Err(CliError::Input(
            "give the query with --file or --text".into(),
        )),
    }
}

fn run_query(args: QueryArgs) -> CliResult {
    let text = query_text(&args)?;
    let ast = pattern::parse(&text).map_err(CliError::input)?;
    let graph = load(&args.graph)?;
    if args.explain {
        emit(&pattern::explain(&ast, graph.index_specs()))?;
        return Ok(0);
    }
    let options = EvalOptions {
        max_hops: args.max_hops,
    };
    let table = pattern::evaluate_with(&graph, &ast, &options).map_err(CliError::input)?;
    emit(&match args.format {
        TableFormat::Text => table.to_text(),
        TableFormat::Csv => table.to_csv(),
    })?;
    Ok(0)
}

fn csv_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(header);
    for r in rows {
        let _ = w.write_record(r);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

fn event_label(graph: &LabeledPropertyGraph, e: NodeRef) -> String {
    model::activity(graph, e).unwrap_or_default().to_owned()
}

fn qf(args: QfArgs) -> CliResult {
    let graph = load(&args.graph)?;
    let format = args.format;
    let out = match args.primitive {
        Primitive::Events { entity, activity } => {
            let preds: Vec<Predicate> = activity
                .into_iter()
                .map(|a| Predicate::eq(model::ACTIVITY, a))
                .collect();
            let events =
                query::events_of_entity(&graph, &entity, &preds).map_err(CliError::input)?;
            let rows: Vec<Vec<String>> = events
                .iter()
                .map(|e| {
                    let ts = graph
                        .node(*e)
                        .ok()
                        .and_then(|n| n.prop(model::TIMESTAMP))
                        .map(|v| v.to_plain_string())
                        .unwrap_or_default();
                    vec![e.to_string(), event_label(&graph, *e), ts]
                })
                .collect();
            match format {
                TableFormat::Csv => csv_rows(&["event", "activity", "timestamp"], &rows),
                TableFormat::Text => rows.iter().map(|r| r.join("  ") + "\n").collect(),
            }
        }
        Primitive::Df {
            entity_type,
            from,
            to,
        } => {
            let pairs =
                query::directly_follows_pairs(&graph, &entity_type, from.as_deref(), to.as_deref())
                    .map_err(CliError::input)?;
            let rows: Vec<Vec<String>> = pairs
                .iter()
                .map(|(a, b)| {
                    vec![
                        a.to_string(),
                        b.to_string(),
                        event_label(&graph, *a),
                        event_label(&graph, *b),
                    ]
                })
                .collect();
            match format {
                TableFormat::Csv => csv_rows(
                    &["source", "target", "sourceActivity", "targetActivity"],
                    &rows,
                ),
                TableFormat::Text => rows
                    .iter()
                    .map(|r| format!("{} -> {}  {} -> {}\n", r[0], r[1], r[2], r[3]))
                    .collect(),
            }
        }
        Primitive::Ef {
            entity_type,
            from,
            to,
        } => {
            let paths = query::eventually_follows(&graph, &entity_type, &from, &to)
                .map_err(CliError::input)?;
            match format {
                TableFormat::Csv => query::paths_to_csv(&graph, &paths),
                TableFormat::Text => query::paths_to_text(&graph, &paths),
            }
        }
        Primitive::Variant {
            entity,
            entity_type,
        } => {
            let variant =
                query::variant_of(&graph, &entity, &entity_type).map_err(CliError::input)?;
            match format {
                TableFormat::Csv => csv_rows(
                    &["position", "activity"],
                    &variant
                        .iter()
                        .enumerate()
                        .map(|(i, a)| vec![(i + 1).to_string(), a.clone()])
                        .collect::<Vec<_>>(),
                ),
                TableFormat::Text => variant.join(" -> ") + "\n",
            }
        }
        Primitive::Duration {
            entity_type,
            from,
            to,
            mode,
        } => {
            let results = query::duration_between(&graph, &entity_type, &from, &to, mode)
                .map_err(CliError::input)?;
            match format {
                TableFormat::Csv => query::durations_to_csv(&results),
                TableFormat::Text => results
                    .iter()
                    .map(|r| format!("{}  {} -> {}  {}\n", r.entity_uid, r.start, r.end, r.iso()))
                    .collect(),
            }
        }
        Primitive::Nested {
            child,
            from,
            to,
            parent,
            min_count,
            paths_from,
        } => {
            let parents =
                query::entities_with_df_pattern(&graph, &child, &from, &to, &parent, min_count)
                    .map_err(CliError::input)?;
            let mut out = String::new();
            match &paths_from {
                None => {
                    let rows: Vec<Vec<String>> = parents.iter().map(|p| vec![p.clone()]).collect();
                    out = match format {
                        TableFormat::Csv => csv_rows(&["entity"], &rows),
                        TableFormat::Text => rows.iter().map(|r| r[0].clone() + "\n").collect(),
                    };
                }
                Some(start) => {
                    let targets: BTreeSet<NodeRef> =
                        query::df_pattern_occurrences(&graph, &child, &from, &to)
                            .map_err(CliError::input)?
                            .into_iter()
                            .map(|o| o.to_event)
                            .collect();
                    let mut all = Vec::new();
                    for p in &parents {
                        let mine: BTreeSet<NodeRef> = targets
                            .iter()
                            .copied()
                            .filter(|t| {
                                model::entity_by_uid(&graph, p)
                                    .is_some_and(|e| model::is_correlated(&graph, *t, e))
                            })
                            .collect();
                        all.extend(
                            query::paths_in_parent(&graph, p, start, &mine)
                                .map_err(CliError::input)?,
                        );
                    }
                    let _ = write!(
                        out,
                        "{}",
                        match format {
                            TableFormat::Csv => query::paths_to_csv(&graph, &all),
                            TableFormat::Text => query::paths_to_text(&graph, &all),
                        }
                    );
                }
            }
            out
        }
    };
    emit(&out)?;
    Ok(0)
}

fn run_aggregate(ctx: &Ctx, args: AggregateArgs) -> CliResult {
    if args.min_count < 1 {
        return Err(CliError::Input("--min-count must be at least 1".into()));
    }
    let mut graph = load(&args.graph)?;
    let types: Vec<&str> = args.entities.iter().map(String::as_str).collect();
    for t in &types {
        ctx.progress(&format!("aggregate_df({}, {t})", args.class_type));
        aggregate::aggregate_df(&mut graph, &args.class_type, t).map_err(CliError::input)?;
    }
    let agg = filter_by_count(
        &AggregatedGraph::from_graph(&graph, &args.class_type, &types),
        args.min_count,
    );
    emit(&match args.format {
        TableFormat::Text => agg.to_text(),
        TableFormat::Csv => agg.to_csv(),
    })?;
    if args.save {
        save(&graph, &args.graph)?;
        ctx.progress(&format!("wrote {}", args.graph.display()));
    }
    Ok(0)
}

/// Aggregated scopes read DF_C edges; compute them when the snapshot has none.
fn ensure_aggregated(
    ctx: &Ctx,
    graph: &mut LabeledPropertyGraph,
    scope: &Scope,
) -> Result<(), CliError> {
    let Scope::Aggregated {
        class_type,
        entity_types,
        ..
    } = scope
    else {
        return Ok(());
    };
    for t in entity_types {
        let present = graph.relationships_of_type(DF_C).any(|r| {
            r.text(model::ENTITY_TYPE) == Some(t.as_str())
                && graph
                    .node(r.source)
                    .is_ok_and(|n| n.text(TYPE) == Some(class_type.as_str()))
        });
        if !present && model::entities_of_type(graph, t).next().is_some() {
            ctx.progress(&format!("aggregate_df({class_type}, {t})"));
            aggregate::aggregate_df(graph, class_type, t).map_err(CliError::input)?;
        }
    }
    Ok(())
}

fn run_export(ctx: &Ctx, args: ExportArgs) -> CliResult {
    if args.dot.is_none() && args.graphml.is_none() {
        return Err(CliError::Input("give --dot and/or --graphml".into()));
    }
    let scope: Scope = args.scope.parse().map_err(CliError::input)?;
    let mut graph = load(&args.graph)?;
    ensure_aggregated(ctx, &mut graph, &scope)?;
    let selection = ExportSelection {
        scope,
        include_node_kinds: args.nodes.map(|v| v.into_iter().collect()),
        include_rel_types: args.rels.map(|v| v.into_iter().collect()),
    };
    let write = |path: &Path, text: Result<String, export::ExportError>| -> Result<(), CliError> {
        let text = text.map_err(CliError::input)?;
        std::fs::write(path, text)
            .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
        ctx.progress(&format!("wrote {}", path.display()));
        Ok(())
    };
    if let Some(p) = &args.dot {
        write(p, export::to_dot(&graph, &selection))?;
    }
    if let Some(p) = &args.graphml {
        write(p, export::to_graphml(&graph, &selection))?;
    }
    Ok(0)
}

fn stats(args: StatsArgs) -> CliResult {
    let graph = load(&args.graph)?;
    let census = graph.census();
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", census.nodes);
    for (l, n) in &census.nodes_by_label {
        let _ = writeln!(out, "  :{l} {n}");
    }
    let _ = writeln!(out, "relationships {}", census.relationships);
    for (t, n) in &census.rels_by_type {
        let _ = writeln!(out, "  :{t} {n}");
    }
    emit(&out)?;
    Ok(0)
}

fn dispatch(cli: Cli) -> CliResult {
    let ctx = Ctx { quiet: cli.quiet };
    match cli.command {
        Command::Import(a) => import(&ctx, a),
        Command::Validate(a) => validate(&ctx, a),
        Command::Query(a) => run_query(a),
        Command::Qf(a) => qf(a),
        Command::Aggregate(a) => run_aggregate(&ctx, a),
        Command::Export(a) => run_export(&ctx, a),
        Command::Stats(a) => stats(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
        Err(_) => ExitCode::from(INTERNAL),
    }
}
