//! The end-to-end conversion: table in, validated event graph out.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::aggregate::{self, AggregateError};
use crate::ingest::{self, DerivationConfig, EventTable, IngestError};
use crate::model::{self, DF, ENTITY_TYPE};
use crate::store::{Census, LabeledPropertyGraph};
use crate::validate::{validate_with, ValidateOptions, ViolationReport};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}

#[derive(Debug, Error)]
#[error("stage {stage} failed: {source}")]
pub struct PipelineError {
    pub stage: String,
    #[source]
    pub source: StageError,
    /// The graph as it was when the stage failed, if requested.
    pub partial: Option<Box<LabeledPropertyGraph>>,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub keep_partial: bool,
    pub validation: ValidateOptions,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageTiming {
    pub stage: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub census: Census,
    pub df_by_entity_type: BTreeMap<String, usize>,
    pub violations: usize,
    pub warnings: Vec<String>,
    pub stages: Vec<StageTiming>,
    pub wall_time: Duration,
}

impl PipelineSummary {
    fn collect(
        graph: &LabeledPropertyGraph,
        report: &ViolationReport,
        warnings: Vec<String>,
        stages: Vec<StageTiming>,
        wall_time: Duration,
    ) -> Self {
        let mut df_by_entity_type = BTreeMap::new();
        for rel in graph.relationships_of_type(DF) {
            let t = rel.text(ENTITY_TYPE).unwrap_or_default().to_owned();
            *df_by_entity_type.entry(t).or_default() += 1;
        }
        Self {
            census: graph.census(),
            df_by_entity_type,
            violations: report.violations.len(),
            warnings,
            stages,
            wall_time,
        }
    }

    /// Counts only; identical inputs give identical text.
    pub fn counts_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>10}", "nodes", self.census.nodes);
        for (label, n) in &self.census.nodes_by_label {
            let _ = writeln!(out, "  {:<22} {:>10}", format!(":{label}"), n);
        }
        let _ = writeln!(
            out,
            "{:<24} {:>10}",
            "relationships", self.census.relationships
        );
        for (ty, n) in &self.census.rels_by_type {
            let _ = writeln!(out, "  {:<22} {:>10}", format!(":{ty}"), n);
        }
        let _ = writeln!(out, "DF per entity type");
        for (ty, n) in &self.df_by_entity_type {
            let _ = writeln!(out, "  {:<22} {:>10}", ty, n);
        }
        let _ = writeln!(out, "{:<24} {:>10}", "violations", self.violations);
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = self.counts_text();
        let _ = writeln!(
            out,
            "{:<24} {:>10.3}s",
            "wall time",
            self.wall_time.as_secs_f64()
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub graph: LabeledPropertyGraph,
    pub report: ViolationReport,
    pub summary: PipelineSummary,
}

struct Runner<'p> {
    graph: LabeledPropertyGraph,
    stages: Vec<StageTiming>,
    warnings: Vec<String>,
    keep_partial: bool,
    progress: &'p mut dyn FnMut(&str),
}

impl Runner<'_> {
    fn stage<T, E: Into<StageError>>(
        &mut self,
        name: String,
        f: impl FnOnce(&mut LabeledPropertyGraph) -> Result<T, E>,
    ) -> Result<T, PipelineError> {
        (self.progress)(&name);
        let start = Instant::now();
        match f(&mut self.graph) {
            Ok(v) => {
                self.stages.push(StageTiming {
                    stage: name,
                    elapsed: start.elapsed(),
                });
                Ok(v)
            }
            Err(e) => Err(PipelineError {
                stage: name,
                source: e.into(),
                partial: self
                    .keep_partial
                    .then(|| Box::new(std::mem::take(&mut self.graph))),
            }),
        }
    }

    fn df(&mut self, entity_type: &str, within_log: bool) -> Result<(), PipelineError> {
        if model::entities_of_type(&self.graph, entity_type)
            .next()
            .is_none()
        {
            self.warnings
                .push(format!("no {entity_type} entities; no DF edges derived"));
            return Ok(());
        }
        self.stage(format!("derive_df({entity_type})"), |g| {
            ingest::derive_df(g, entity_type, within_log)
        })?;
        Ok(())
    }
}

/// Runs every stage on an already loaded table. `progress` receives each
/// stage name before it starts.
pub fn run_pipeline_on(
    config: &DerivationConfig,
    table: &EventTable,
    options: &PipelineOptions,
    progress: &mut dyn FnMut(&str),
) -> Result<PipelineOutput, PipelineError> {
    let start = Instant::now();
    let mut run = Runner {
        graph: LabeledPropertyGraph::new(),
        stages: Vec::new(),
        warnings: Vec::new(),
        keep_partial: options.keep_partial,
        progress,
    };
    run.stage("import_events".into(), |g| ingest::import_events(g, table))?;
    run.stage("create_logs".into(), |g| {
        ingest::create_logs(g, &config.default_log_id)
    })?;
    for rule in &config.entities {
        run.stage(format!("derive_entities({})", rule.entity_type), |g| {
            ingest::derive_entities(g, rule)
        })?;
        run.stage(format!("correlate_events({})", rule.entity_type), |g| {
            ingest::correlate_events(g, rule)
        })?;
    }
    for rule in &config.entities {
        run.df(&rule.entity_type, config.df_within_log)?;
    }
    for rule in &config.reifications {
        let comp = &rule.composite_type;
        let created = run.stage(format!("reify_relation({comp})"), |g| {
            ingest::reify_relation(g, rule)
        })?;
        if created == 0 && model::entities_of_type(&run.graph, comp).next().is_none() {
            run.warnings
                .push(format!("no {comp} entities; relation not reified"));
            continue;
        }
        for member in [&rule.type1, &rule.type2] {
            run.stage(format!("correlate_composite({comp}, {member})"), |g| {
                ingest::correlate_composite(g, comp, member)
            })?;
        }
        run.df(comp, config.df_within_log)?;
    }
    for rule in &config.classifiers {
        run.stage(format!("derive_classes({})", rule.class_type), |g| {
            aggregate::derive_classes(g, rule)
        })?;
        let linked = run.stage(format!("link_event_classes({})", rule.class_type), |g| {
            aggregate::link_event_classes(g, rule)
        })?;
        if linked.skipped > 0 {
            run.warnings.push(format!(
                "{} events lack a {} classifier value",
                linked.skipped, rule.class_type
            ));
        }
    }
    (run.progress)("validate");
    let t = Instant::now();
    let report = validate_with(&run.graph, &options.validation);
    run.stages.push(StageTiming {
        stage: "validate".into(),
        elapsed: t.elapsed(),
    });
    let summary = PipelineSummary::collect(
        &run.graph,
        &report,
        run.warnings,
        run.stages,
        start.elapsed(),
    );
    Ok(PipelineOutput {
        graph: run.graph,
        report,
        summary,
    })
}

/// Loads the configuration and table from disk, then runs every stage.
pub fn run_pipeline(
    config_path: &Path,
    csv_path: &Path,
    options: &PipelineOptions,
    progress: &mut dyn FnMut(&str),
) -> Result<PipelineOutput, PipelineError> {
    let fail = |stage: &str, e: IngestError| PipelineError {
        stage: stage.to_owned(),
        source: e.into(),
        partial: None,
    };
    progress("load_config");
    let config = DerivationConfig::load(config_path).map_err(|e| fail("load_config", e))?;
    progress("load_event_table");
    let import = config
        .import_config()
        .map_err(|e| fail("load_event_table", e))?;
    let table =
        ingest::load_event_table(csv_path, &import).map_err(|e| fail("load_event_table", e))?;
    run_pipeline_on(&config, &table, options, progress)
}
