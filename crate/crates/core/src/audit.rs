//! End-to-end audits: metrics, assumption checks, path classification and
//! the mapping of each metric onto the legal framework it informs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path as FsPath;

use serde::Serialize;
use serde_json::Value;

use crate::checks::{self, CheckReport, Status};
use crate::dataset::{ColumnKind, Dataset};
use crate::dsl::{parse_graph_spec, GraphSpec, SpecModel};
use crate::error::{Error, Result};
use crate::estimators::{
    bootstrap_ci, estimate, Backend, BootstrapOptions, ConfidenceInterval, EffectQuery, Metric,
    MetricRequest, PluginOptions, Source,
};
use crate::graph::{PathLabel, Role};
use crate::scm::PathSelection;

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const TOOL_NAME: &str = "causal-audit";

const NOTE_IMPACT: &str = "Disparate impact concerns a seemingly neutral policy that disproportionately harms a \
protected group. TV is purely observational and would exaggerate the effect by including non-causal paths; TE \
and ATE isolate the causal contribution of the sensitive attribute.";
const NOTE_TREATMENT: &str = "Disparate treatment follows the \"but-for causation\" standard: would the outcome \
change if only the sensitive attribute changed, all else held at its natural value? NDE measures exactly this \
direct contribution.";
const NOTE_NECESSITY: &str = "Business necessity: the respondent may rebut a disparate impact claim by showing \
that the effect flows through variables essential to the decision. Each causal path is listed with its PSE and \
mediator roles; explaining paths may be justified, proxy paths are not. No threshold for reclassifying an \
explaining variable as a proxy is applied: the judgment is left to the reader.";

/// Options for one audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub spec_path: Option<String>,
    pub data_path: Option<String>,
    pub sensitive: String,
    pub baseline: String,
    pub comparison: String,
    pub outcome: String,
    pub positive: String,
    pub metrics: Vec<Metric>,
    /// Path selection for PSE; the proxy paths (or all indirect paths) when `None`.
    pub selection: Option<PathSelection>,
    pub alpha: f64,
    /// Bootstrap replicates for plug-in intervals.
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub smoothing: Option<f64>,
    pub run_metrics: bool,
    pub run_checks: bool,
    /// Forces a backend; by default the spec's model is used when present.
    pub backend: Option<Backend>,
}

impl AuditConfig {
    pub fn new(
        sensitive: impl Into<String>,
        baseline: impl Into<String>,
        comparison: impl Into<String>,
        outcome: impl Into<String>,
        positive: impl Into<String>,
    ) -> Self {
        Self {
            spec_path: None,
            data_path: None,
            sensitive: sensitive.into(),
            baseline: baseline.into(),
            comparison: comparison.into(),
            outcome: outcome.into(),
            positive: positive.into(),
            metrics: Metric::ALL.to_vec(),
            selection: None,
            alpha: checks::DEFAULT_ALPHA,
            bootstrap: None,
            seed: 0,
            smoothing: None,
            run_metrics: true,
            run_checks: true,
            backend: None,
        }
    }

    pub fn query(&self) -> EffectQuery {
        EffectQuery::new(
            &self.sensitive,
            &self.baseline,
            &self.comparison,
            &self.outcome,
            &self.positive,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricStatus {
    Ok,
    /// Computed (or attempted) despite a positivity problem.
    Degraded,
    Unidentifiable,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricEntry {
    pub metric: Metric,
    pub tag: &'static str,
    pub status: MetricStatus,
    pub value: Option<f64>,
    pub backend: Option<Backend>,
    pub assumptions: Vec<String>,
    pub ci: Option<ConfidenceInterval>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEntry {
    pub path: String,
    pub label: PathLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub nodes: Vec<NodeSummary>,
    pub edges: Vec<(String, String)>,
    pub paths: Vec<PathEntry>,
    pub causal_paths: usize,
    pub backdoor_paths: usize,
    pub adjustment_set: Option<Vec<String>>,
    pub roles: BTreeMap<String, Role>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub name: String,
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEffect {
    pub path: String,
    pub label: PathLabel,
    /// Role of each mediator on the path, `neutral` when untagged.
    pub mediators: BTreeMap<String, Role>,
    pub status: MetricStatus,
    pub pse: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegalSection {
    pub framework: &'static str,
    pub metrics: BTreeMap<String, f64>,
    pub note: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessitySection {
    pub framework: &'static str,
    pub selection: String,
    pub pse: Option<f64>,
    pub paths: Vec<PathEffect>,
    pub note: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegalMapping {
    pub disparate_impact: Option<LegalSection>,
    pub disparate_treatment: Option<LegalSection>,
    pub business_necessity: Option<NecessitySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub spec: Option<String>,
    pub data: Option<String>,
    pub sensitive: String,
    pub a0: String,
    pub a1: String,
    pub outcome: String,
    pub positive: String,
    pub metrics: Vec<Metric>,
    pub pi: String,
    pub alpha: f64,
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub smoothing: Option<f64>,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub schema_version: &'static str,
    pub tool: ToolInfo,
    pub config: ConfigEcho,
    pub graph: GraphSummary,
    pub metrics: Vec<MetricEntry>,
    pub checks: Vec<CheckReport>,
    pub legal_mapping: LegalMapping,
    pub warnings: Vec<String>,
}

impl AuditReport {
    /// 2 when any requested metric is unidentifiable, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self
            .metrics
            .iter()
            .any(|m| m.status == MetricStatus::Unidentifiable)
        {
            2
        } else {
            0
        }
    }

    /// Pretty JSON with every object's keys sorted.
    pub fn to_json(&self) -> String {
        let value: Value = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        render_markdown(self)
    }
}

fn tag(metric: Metric) -> &'static str {
    match metric {
        Metric::Tv => "eq1",
        Metric::Te => "eq2",
        Metric::Ate => "eq3",
        Metric::Nde => "eq4",
        Metric::Nie => "eq5",
        Metric::Pse => "eq6",
    }
}

fn io_error(path: &str, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_string(),
        message: e.to_string(),
    }
}

/// Reads a spec file.
pub fn load_spec(path: &str) -> Result<GraphSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_graph_spec(&text).map_err(|e| match e {
        Error::Syntax { line, col, message } => Error::Syntax {
            line,
            col,
            message: format!("{path}: {message}"),
        },
        Error::Semantic { line, col, message } => Error::Semantic {
            line,
            col,
            message: format!("{path}: {message}"),
        },
        other => other,
    })
}

/// Reads a CSV whose header must name exactly the spec's observed nodes.
pub fn load_dataset(path: impl AsRef<FsPath>, spec: &GraphSpec) -> Result<Dataset> {
    let shown = path.as_ref().display().to_string();
    let file = File::open(path.as_ref()).map_err(|e| io_error(&shown, e))?;
    Dataset::read_csv(file, &spec.schema()?).map_err(|e| match e {
        Error::Io { message, .. } => Error::Io {
            path: shown,
            message,
        },
        other => other,
    })
}

/// Loads the files named in `config` and audits them.
pub fn run_audit(config: &AuditConfig) -> Result<AuditReport> {
    let spec_path = config
        .spec_path
        .as_deref()
        .ok_or_else(|| Error::Usage("--spec is required".into()))?;
    let spec = load_spec(spec_path)?;
    let data = match &config.data_path {
        Some(p) => Some(load_dataset(p, &spec)?),
        None => None,
    };
    audit(&spec, data.as_ref(), config)
}

/// Default path selection: the edges of every proxy path, or of every
/// indirect causal path when no mediator is tagged as a proxy.
pub fn default_selection(spec: &GraphSpec, a: &str, y: &str) -> Result<PathSelection> {
    let classified = spec.graph.classify_paths(a, y, &spec.roles)?;
    let proxy: Vec<_> = classified
        .iter()
        .filter(|c| c.label == PathLabel::IndirectProxy)
        .collect();
    let chosen: Vec<_> = if proxy.is_empty() {
        classified
            .iter()
            .filter(|c| {
                matches!(
                    c.label,
                    PathLabel::IndirectExplaining
                        | PathLabel::IndirectNeutral
                        | PathLabel::IndirectProxy
                )
            })
            .collect()
    } else {
        proxy
    };
    Ok(PathSelection::new(
        chosen.iter().flat_map(|c| c.path.edges()),
    ))
}

fn validate_query(spec: &GraphSpec, q: &EffectQuery) -> Result<()> {
    for node in [&q.sensitive, &q.outcome] {
        spec.graph.index_of(node)?;
    }
    if q.sensitive == q.outcome {
        return Err(Error::Usage(
            "sensitive attribute and outcome must differ".into(),
        ));
    }
    let check = |node: &str, value: &str| -> Result<()> {
        match &spec.kinds[node] {
            Some(ColumnKind::Categorical(d)) if !d.iter().any(|x| x == value) => {
                Err(Error::Domain {
                    node: node.to_string(),
                    value: value.to_string(),
                })
            }
            Some(ColumnKind::Numeric) => crate::scm::parse_level(node, value).map(|_| ()),
            _ => Ok(()),
        }
    };
    check(&q.sensitive, &q.baseline)?;
    check(&q.sensitive, &q.comparison)?;
    if !matches!(spec.kinds[&q.outcome], Some(ColumnKind::Numeric)) {
        check(&q.outcome, &q.positive)?;
    }
    Ok(())
}

/// Audits an already loaded spec and dataset.
pub fn audit(
    spec: &GraphSpec,
    data: Option<&Dataset>,
    config: &AuditConfig,
) -> Result<AuditReport> {
    let q = config.query();
    validate_query(spec, &q)?;
    let g = &spec.graph;
    let mut warnings = Vec::new();

    let plugin = |d| Source::Plugin {
        data: d,
        graph: g,
        options: PluginOptions {
            smoothing: config.smoothing,
        },
    };
    let source = match (config.backend, &spec.model, data) {
        (None | Some(Backend::Exact), Some(SpecModel::Discrete(m)), _) => Source::Exact(m),
        (None | Some(Backend::Linear), Some(SpecModel::Linear(m)), _) => Source::Linear(m),
        (None | Some(Backend::Plugin), _, Some(d)) => plugin(d),
        (Some(Backend::Plugin), _, None) | (None, None, None) if config.run_metrics => {
            return Err(Error::Usage("the plug-in backend needs a dataset".into()))
        }
        (Some(b @ (Backend::Exact | Backend::Linear)), _, _) => {
            return Err(Error::Usage(format!(
                "the {} backend needs a matching model in the spec",
                b.as_str()
            )))
        }
        (_, _, d) => plugin(d.unwrap_or(&EMPTY)),
    };
    let backend = match source {
        Source::Exact(_) => Backend::Exact,
        Source::Linear(_) => Backend::Linear,
        Source::Plugin { .. } => Backend::Plugin,
    };

    let selection = match &config.selection {
        Some(s) => {
            // Validates edges against the graph up front: a bad selection is an input error.
            let (a, y) = (g.index_of(&q.sensitive)?, g.index_of(&q.outcome)?);
            s.mask(g, a, y)?;
            s.clone()
        }
        None => default_selection(spec, &q.sensitive, &q.outcome)?,
    };

    // Graph summary.
    let (paths, causal, backdoor) = match g.classify_paths(&q.sensitive, &q.outcome, &spec.roles) {
        Ok(cp) => {
            let causal = cp
                .iter()
                .filter(|c| c.path.kind == crate::graph::PathKind::Causal)
                .count();
            let backdoor = cp.iter().filter(|c| c.label == PathLabel::Backdoor).count();
            (cp, causal, backdoor)
        }
        Err(Error::PathExplosion(n)) => {
            warnings.push(format!("path classification skipped: more than {n} paths"));
            (Vec::new(), 0, 0)
        }
        Err(e) => return Err(e),
    };
    let summary = GraphSummary {
        nodes: (0..g.len())
            .map(|v| NodeSummary {
                name: g.name(v).to_string(),
                observed: g.is_observed(v),
            })
            .collect(),
        edges: g
            .edges()
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        paths: paths
            .iter()
            .map(|c| PathEntry {
                path: c.path.to_string(),
                label: c.label,
            })
            .collect(),
        causal_paths: causal,
        backdoor_paths: backdoor,
        adjustment_set: g
            .minimal_adjustment_set(&q.sensitive, &q.outcome)?
            .map(|s| s.nodes),
        roles: spec.roles.clone(),
    };

    // Checks first, so metrics can be marked degraded.
    let mut check_reports = Vec::new();
    if config.run_checks {
        check_reports = run_checks(spec, data, &q, config.alpha, &summary)?;
    }
    let positivity_failed = check_reports
        .iter()
        .any(|c| c.assumption == "positivity" && c.status == Status::Fail);

    let mut metrics = Vec::new();
    let mut necessity_paths = Vec::new();
    if config.run_metrics {
        for &metric in &config.metrics {
            let request = match metric {
                Metric::Pse => MetricRequest::Pse(selection.clone()),
                m => MetricRequest::with_defaults(m, g, &q)?,
            };
            let entry = metric_entry(
                &source,
                data,
                &q,
                &request,
                config,
                backend,
                positivity_failed,
                &mut warnings,
            )?;
            metrics.push(entry);
        }
        if config.metrics.contains(&Metric::Pse) {
            for c in paths
                .iter()
                .filter(|c| c.path.kind == crate::graph::PathKind::Causal)
            {
                let sel = PathSelection::new(c.path.edges());
                let mediators = c.path.nodes[1..c.path.nodes.len() - 1]
                    .iter()
                    .map(|n| {
                        (
                            n.clone(),
                            spec.roles.get(n).copied().unwrap_or(Role::Neutral),
                        )
                    })
                    .collect();
                let (status, pse, message) = match estimate(&source, &q, &MetricRequest::Pse(sel)) {
                    Ok(e) => (MetricStatus::Ok, Some(e.value), None),
                    Err(e) => {
                        let status = classify_error(&e)?;
                        warnings.push(format!("PSE along {}: {e}", c.path));
                        (status, None, Some(e.to_string()))
                    }
                };
                necessity_paths.push(PathEffect {
                    path: c.path.to_string(),
                    label: c.label,
                    mediators,
                    status,
                    pse,
                    message,
                });
            }
        }
    }

    let computed = |m: Metric| metrics.iter().find(|e| e.metric == m).and_then(|e| e.value);
    let section = |framework, ms: &[Metric], note| {
        let values: BTreeMap<String, f64> = ms
            .iter()
            .filter_map(|&m| computed(m).map(|v| (m.as_str().to_string(), v)))
            .collect();
        (!values.is_empty()).then_some(LegalSection {
            framework,
            metrics: values,
            note,
        })
    };
    let legal_mapping = LegalMapping {
        disparate_impact: section(
            "Disparate Impact",
            &[Metric::Tv, Metric::Te, Metric::Ate],
            NOTE_IMPACT,
        ),
        disparate_treatment: section(
            "Disparate Treatment (but-for causation)",
            &[Metric::Nde],
            NOTE_TREATMENT,
        ),
        business_necessity: config
            .metrics
            .contains(&Metric::Pse)
            .then(|| NecessitySection {
                framework: "Business Necessity Analysis",
                selection: selection.to_cli_string(),
                pse: computed(Metric::Pse),
                paths: necessity_paths,
                note: NOTE_NECESSITY,
            }),
    };

    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo {
            name: TOOL_NAME,
            version: env!("CARGO_PKG_VERSION"),
        },
        config: ConfigEcho {
            spec: config.spec_path.clone(),
            data: config.data_path.clone(),
            sensitive: q.sensitive.clone(),
            a0: q.baseline.clone(),
            a1: q.comparison.clone(),
            outcome: q.outcome.clone(),
            positive: q.positive.clone(),
            metrics: if config.run_metrics {
                config.metrics.clone()
            } else {
                Vec::new()
            },
            pi: selection.to_cli_string(),
            alpha: config.alpha,
            bootstrap: config.bootstrap,
            seed: config.seed,
            smoothing: config.smoothing,
            backend,
        },
        graph: summary,
        metrics,
        checks: check_reports,
        legal_mapping,
        warnings,
    })
}

static EMPTY: std::sync::LazyLock<Dataset> =
    std::sync::LazyLock::new(|| Dataset::new(Vec::new()).expect("empty dataset is valid"));

/// Per-metric failures that become report entries; anything else is an input error.
fn classify_error(e: &Error) -> Result<MetricStatus> {
    match e {
        Error::NotIdentifiable(_) => Ok(MetricStatus::Unidentifiable),
        Error::Positivity(_)
        | Error::EmptyStratum(_)
        | Error::TooManyDegenerateReplicates { .. } => Ok(MetricStatus::Degraded),
        Error::UnsupportedModel(_) | Error::MixedType(_) | Error::BudgetExceeded { .. } => {
            Ok(MetricStatus::Unsupported)
        }
        other => Err(other.clone()),
    }
}

#[allow(clippy::too_many_arguments)]
fn metric_entry(
    source: &Source,
    data: Option<&Dataset>,
    q: &EffectQuery,
    request: &MetricRequest,
    config: &AuditConfig,
    backend: Backend,
    positivity_failed: bool,
    warnings: &mut Vec<String>,
) -> Result<MetricEntry> {
    let metric = request.metric();
    let result = match (source, config.bootstrap, data) {
        (Source::Plugin { graph, options, .. }, Some(b), Some(d)) => bootstrap_ci(
            d,
            graph,
            q,
            request,
            options,
            &BootstrapOptions {
                replicates: b,
                level: 0.95,
                seed: config.seed,
            },
        ),
        _ => estimate(source, q, request),
    };
    Ok(match result {
        Ok(est) => {
            let degraded = positivity_failed && backend == Backend::Plugin && metric != Metric::Tv;
            if degraded {
                warnings.push(format!(
                    "{}: positivity check failed; estimate rests on sparse strata",
                    metric.as_str()
                ));
            }
            MetricEntry {
                metric,
                tag: tag(metric),
                status: if degraded {
                    MetricStatus::Degraded
                } else {
                    MetricStatus::Ok
                },
                value: Some(est.value),
                backend: Some(est.backend),
                assumptions: est.assumptions,
                ci: est.ci,
                message: degraded.then(|| "positivity check failed".to_string()),
            }
        }
        Err(e) => {
            let status = classify_error(&e)?;
            warnings.push(format!("{}: {e}", metric.as_str()));
            MetricEntry {
                metric,
                tag: tag(metric),
                status,
                value: None,
                backend: Some(backend),
                assumptions: Vec::new(),
                ci: None,
                message: Some(e.to_string()),
            }
        }
    })
}

fn run_checks(
    spec: &GraphSpec,
    data: Option<&Dataset>,
    q: &EffectQuery,
    alpha: f64,
    summary: &GraphSummary,
) -> Result<Vec<CheckReport>> {
    let g = &spec.graph;
    let mut out = Vec::new();
    match data {
        None => {
            for name in ["positivity", "causal-markov", "faithfulness", "linearity"] {
                out.push(CheckReport::untestable(name, "no dataset supplied"));
            }
        }
        Some(d) => {
            let covariates: Vec<String> = match &summary.adjustment_set {
                Some(set) => set.clone(),
                None => g
                    .parent_names(&q.sensitive)?
                    .into_iter()
                    .filter(|p| d.has_column(p))
                    .map(str::to_string)
                    .collect(),
            };
            let cov: Vec<&str> = covariates.iter().map(String::as_str).collect();
            out.push(
                match checks::check_positivity(d, &q.sensitive, &cov, checks::DEFAULT_MIN_COUNT) {
                    Ok(r) => r,
                    Err(Error::MixedType(m)) => CheckReport::untestable("positivity", m),
                    Err(e) => return Err(e),
                },
            );
            out.push(checks::check_markov(d, g, alpha)?);
            out.push(checks::check_faithfulness(
                d,
                g,
                alpha,
                checks::DEFAULT_MIN_EFFECT,
            )?);
            out.push(match checks::check_linearity(d, g, alpha) {
                Ok(r) => r,
                Err(Error::NoNumericChild) => {
                    CheckReport::untestable("linearity", "no numeric child with parents")
                }
                Err(e) => return Err(e),
            });
        }
    }
    out.extend(checks::untestable_disclosures(
        g,
        Some((&q.sensitive, &q.outcome)),
    )?);
    Ok(out)
}

/// Shared value formatting for the markdown renderer.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

fn render_markdown(r: &AuditReport) -> String {
    let mut s = String::new();
    let c = &r.config;
    let _ = writeln!(s, "# Causal fairness audit\n");
    let _ = writeln!(
        s,
        "{} {} (report schema {})\n",
        r.tool.name, r.tool.version, r.schema_version
    );
    let _ = writeln!(s, "## Configuration\n");
    let _ = writeln!(s, "| setting | value |\n|---|---|");
    let rows: Vec<(&str, String)> = vec![
        ("spec", c.spec.clone().unwrap_or_else(|| "-".into())),
        ("data", c.data.clone().unwrap_or_else(|| "-".into())),
        (
            "sensitive",
            format!("{} (a0 = {}, a1 = {})", c.sensitive, c.a0, c.a1),
        ),
        ("outcome", format!("{} = {}", c.outcome, c.positive)),
        ("backend", c.backend.as_str().to_string()),
        (
            "pi",
            if c.pi.is_empty() {
                "(none)".into()
            } else {
                c.pi.clone()
            },
        ),
        ("alpha", c.alpha.to_string()),
        (
            "bootstrap",
            c.bootstrap
                .map(|b| b.to_string())
                .unwrap_or_else(|| "-".into()),
        ),
        ("seed", c.seed.to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "| {k} | {v} |");
    }

    let g = &r.graph;
    let _ = writeln!(s, "\n## Graph\n");
    let nodes: Vec<String> = g
        .nodes
        .iter()
        .map(|n| {
            if n.observed {
                n.name.clone()
            } else {
                format!("{} (unobserved)", n.name)
            }
        })
        .collect();
    let _ = writeln!(s, "Nodes: {}\n", nodes.join(", "));
    let edges: Vec<String> = g.edges.iter().map(|(a, b)| format!("{a} -> {b}")).collect();
    let _ = writeln!(
        s,
        "Edges: {}\n",
        if edges.is_empty() {
            "(none)".into()
        } else {
            edges.join(", ")
        }
    );
    let _ = writeln!(
        s,
        "Adjustment set: {}\n",
        match &g.adjustment_set {
            Some(set) => format!("{{{}}}", set.join(", ")),
            None => "none (not identifiable by adjustment)".into(),
        }
    );
    let _ = writeln!(
        s,
        "{} causal, {} backdoor paths.\n",
        g.causal_paths, g.backdoor_paths
    );
    if !g.paths.is_empty() {
        let _ = writeln!(s, "| path | label |\n|---|---|");
        for p in &g.paths {
            let _ = writeln!(s, "| {} | {} |", p.path, p.label.as_str());
        }
    }

    if !r.metrics.is_empty() {
        let _ = writeln!(s, "\n## Metrics\n");
        let _ = writeln!(
            s,
            "| metric | tag | value | 95% CI | status |\n|---|---|---|---|---|"
        );
        for m in &r.metrics {
            let value = m.value.map(fmt_value).unwrap_or_else(|| "-".into());
            let ci =
                m.ci.as_ref()
                    .map(|ci| format!("[{}, {}]", fmt_value(ci.lower), fmt_value(ci.upper)))
                    .unwrap_or_else(|| "-".into());
            let status = format!("{:?}", m.status).to_lowercase();
            let _ = writeln!(
                s,
                "| {} | {} | {value} | {ci} | {status} |",
                m.metric.as_str(),
                m.tag
            );
        }
        for m in r
            .metrics
            .iter()
            .filter(|m| !m.assumptions.is_empty() || m.message.is_some())
        {
            let mut parts = m.assumptions.clone();
            if let Some(msg) = &m.message {
                parts.push(msg.clone());
            }
            let _ = writeln!(s, "\n- **{}**: {}", m.metric.as_str(), parts.join("; "));
        }
    }

    let lm = &r.legal_mapping;
    if lm.disparate_impact.is_some()
        || lm.disparate_treatment.is_some()
        || lm.business_necessity.is_some()
    {
        let _ = writeln!(s, "\n## Legal mapping\n");
    }
    for sec in [&lm.disparate_impact, &lm.disparate_treatment]
        .into_iter()
        .flatten()
    {
        let _ = writeln!(s, "### {}\n", sec.framework);
        for (k, v) in &sec.metrics {
            let _ = writeln!(s, "- {k}: {}", fmt_value(*v));
        }
        let _ = writeln!(s, "\n{}\n", sec.note);
    }
    if let Some(b) = &lm.business_necessity {
        let _ = writeln!(s, "### {}\n", b.framework);
        let _ = writeln!(
            s,
            "Selected edges: {}; PSE = {}\n",
            if b.selection.is_empty() {
                "(none)"
            } else {
                &b.selection
            },
            b.pse.map(fmt_value).unwrap_or_else(|| "-".into())
        );
        if !b.paths.is_empty() {
            let _ = writeln!(
                s,
                "| path | label | mediator roles | PSE |\n|---|---|---|---|"
            );
            for p in &b.paths {
                let roles: Vec<String> = p
                    .mediators
                    .iter()
                    .map(|(n, r)| format!("{n}: {}", r.as_str()))
                    .collect();
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} |",
                    p.path,
                    p.label.as_str(),
                    if roles.is_empty() {
                        "-".into()
                    } else {
                        roles.join(", ")
                    },
                    p.pse
                        .map(fmt_value)
                        .unwrap_or_else(|| format!("{:?}", p.status).to_lowercase())
                );
            }
        }
        let _ = writeln!(s, "\n{}\n", b.note);
    }

    if !r.checks.is_empty() {
        let _ = writeln!(s, "## Assumption checks\n");
        let _ = writeln!(s, "| assumption | status | violations |\n|---|---|---|");
        for ch in &r.checks {
            let _ = writeln!(
                s,
                "| {} | {:?} | {} |",
                ch.assumption,
                ch.status,
                ch.violations.len()
            );
        }
        for ch in r
            .checks
            .iter()
            .filter(|c| !c.violations.is_empty() || !c.notes.is_empty())
        {
            let _ = writeln!(s, "\n### {}\n", ch.assumption);
            for v in &ch.violations {
                let p = v
                    .p_value
                    .map(|p| format!(" (p = {p:.3e})"))
                    .unwrap_or_default();
                let _ = writeln!(s, "- {}: {}{p}", v.subject, v.detail);
            }
            for n in &ch.notes {
                let _ = writeln!(s, "- note: {n}");
            }
        }
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "\n## Warnings\n");
        for w in &r.warnings {
            let _ = writeln!(s, "- {w}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::spec_from_discrete;
    use crate::estimators::MediationSpec;
    use crate::scenarios::{Scenario, ScenarioId};

    fn visa() -> (Scenario, GraphSpec) {
        let s = Scenario::new(ScenarioId::Visa);
        let spec = spec_from_discrete(&s.scm, &s.roles, BTreeMap::new());
        (s, spec)
    }

    #[test]
    fn visa_exact_report() {
        let (s, spec) = visa();
        let cfg = AuditConfig::new("Nationality", "0", "1", "Visa", "1");
        let r = audit(&spec, None, &cfg).unwrap();
        assert_eq!(r.metrics.len(), 6);
        assert_eq!(r.graph.causal_paths, 3);
        assert_eq!(r.graph.backdoor_paths, 1);
        assert_eq!(r.exit_code(), 0);
        let te = r
            .metrics
            .iter()
            .find(|m| m.metric == Metric::Te)
            .unwrap()
            .value
            .unwrap();
        assert!((te - s.truth.te).abs() < 1e-12);
        assert_eq!(r.config.pi, "FamilyStatus>Visa,Nationality>FamilyStatus");
        let md = r.to_markdown();
        for m in &r.metrics {
            assert!(md.contains(&fmt_value(m.value.unwrap())));
        }
        assert_eq!(
            r.legal_mapping
                .business_necessity
                .as_ref()
                .unwrap()
                .paths
                .len(),
            3
        );
    }

    #[test]
    fn hidden_confounder_exit_two() {
        let (s, _) = visa();
        let text = "node Age { domain: [0, 1], observed: false }\nnode Nationality { domain: [0, 1] }\n\
                    node SkillLevel { domain: [0, 1] }\nnode FamilyStatus { domain: [0, 1] }\nnode Visa { domain: [0, 1] }\n\
                    edge Age -> Nationality\nedge Age -> Visa\nedge Nationality -> SkillLevel\nedge SkillLevel -> Visa\n\
                    edge Nationality -> FamilyStatus\nedge FamilyStatus -> Visa\nedge Nationality -> Visa\n";
        let spec = parse_graph_spec(text).unwrap();
        let full = s.sample(5000, 1);
        let keep: Vec<crate::dataset::Column> = full
            .columns()
            .iter()
            .filter(|c| c.name != "Age")
            .cloned()
            .collect();
        let data = Dataset::new(keep).unwrap();
        let cfg = AuditConfig::new("Nationality", "0", "1", "Visa", "1");
        let r = audit(&spec, Some(&data), &cfg).unwrap();
        assert_eq!(r.exit_code(), 2);
        let te = r.metrics.iter().find(|m| m.metric == Metric::Te).unwrap();
        assert_eq!(te.status, MetricStatus::Unidentifiable);
        assert!(r
            .metrics
            .iter()
            .find(|m| m.metric == Metric::Tv)
            .unwrap()
            .value
            .is_some());
        assert!(r.warnings.iter().any(|w| w.starts_with("te:")));
        let ign = r
            .checks
            .iter()
            .find(|c| c.assumption == "ignorability")
            .unwrap();
        assert_eq!(ign.status, Status::Fail);
    }

    #[test]
    fn json_keys_sorted_and_deterministic() {
        let (_, spec) = visa();
        let cfg = AuditConfig::new("Nationality", "0", "1", "Visa", "1");
        let a = audit(&spec, None, &cfg).unwrap().to_json();
        let b = audit(&spec, None, &cfg).unwrap().to_json();
        assert_eq!(a, b);
        let v: Value = serde_json::from_str(&a).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn bad_inputs() {
        let (_, spec) = visa();
        let cfg = AuditConfig::new("Nationality", "0", "7", "Visa", "1");
        assert!(matches!(
            audit(&spec, None, &cfg),
            Err(Error::Domain { .. })
        ));
        let mut cfg = AuditConfig::new("Nationality", "0", "1", "Visa", "1");
        cfg.selection = Some(PathSelection::parse("Age>Visa").unwrap());
        assert!(matches!(
            audit(&spec, None, &cfg),
            Err(Error::InvalidPathSelection(_))
        ));
    }

    #[test]
    fn deterministic_covariate_degrades_plugin_metrics() {
        // A copies C exactly, so no stratum of C contains both values of A.
        let g =
            crate::graph::CausalGraph::new(["C", "A", "Y"], [("C", "A"), ("C", "Y"), ("A", "Y")])
                .unwrap();
        let spec = parse_graph_spec(&crate::dsl::export_spec(&GraphSpec {
            graph: g,
            model: None,
            roles: BTreeMap::new(),
            meta: BTreeMap::new(),
            kinds: ["A", "C", "Y"]
                .into_iter()
                .map(|n| {
                    (
                        n.to_string(),
                        Some(ColumnKind::Categorical(vec!["0".into(), "1".into()])),
                    )
                })
                .collect(),
        }))
        .unwrap();
        let c: Vec<&str> = (0..200)
            .map(|i| if i % 2 == 0 { "0" } else { "1" })
            .collect();
        let y: Vec<&str> = (0..200)
            .map(|i| if i % 3 == 0 { "1" } else { "0" })
            .collect();
        let data = Dataset::new(vec![
            crate::dataset::Column::from_labels("C", &["0", "1"], &c).unwrap(),
            crate::dataset::Column::from_labels("A", &["0", "1"], &c).unwrap(),
            crate::dataset::Column::from_labels("Y", &["0", "1"], &y).unwrap(),
        ])
        .unwrap();
        let r = audit(
            &spec,
            Some(&data),
            &AuditConfig::new("A", "0", "1", "Y", "1"),
        )
        .unwrap();
        let pos = r
            .checks
            .iter()
            .find(|c| c.assumption == "positivity")
            .unwrap();
        assert_eq!(pos.status, Status::Fail);
        for m in &r.metrics {
            let want = if m.metric == Metric::Tv {
                MetricStatus::Ok
            } else {
                MetricStatus::Degraded
            };
            assert_eq!(m.status, want, "{:?}", m.metric);
        }
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn mediation_spec_default_matches() {
        let (s, _) = visa();
        let m = MediationSpec::all(s.graph(), "Nationality", "Visa").unwrap();
        assert_eq!(m.mediators, vec!["FamilyStatus", "SkillLevel"]);
    }
}
