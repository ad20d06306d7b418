//! Fairness effect estimators.
//!
//! Every metric is a contrast between the comparison value `a1` and the
//! baseline value `a0` of the sensitive attribute, for the probability
//! (or, for linear models, the mean) of the outcome:
//!
//! | metric | quantity |
//! |--------|----------|
//! | TV  | `P(y | a1) - P(y | a0)` |
//! | TE  | `P(y_{a1}) - P(y_{a0})` |
//! | ATE | mean over units of the unit-level `y_{a1} - y_{a0}` |
//! | NDE | `P(y_{a1, Z_{a0}}) - P(y_{a0})` |
//! | NIE | `P(y_{a0, Z_{a1}}) - P(y_{a0})` |
//! | PSE | `P(y_{a1 on selected paths, a0 elsewhere}) - P(y_{a0})` |
//!
//! With these definitions `TE(a1, a0) = NDE(a1, a0) - NIE(a0, a1)`, where
//! the second term swaps the roles of the two values.
//!
//! Three backends share one entry point, [`estimate`]: exact evaluation of
//! a [`DiscreteScm`], closed forms for a [`LinearGaussianScm`], and plug-in
//! estimation from categorical data given a causal graph.

mod bootstrap;
mod plugin;

use serde::Serialize;

pub use bootstrap::{bootstrap_ci, BootstrapOptions, ConfidenceInterval};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::scm::{
    CounterfactualQuery, DiscreteScm, Intervention, LinearGaussianScm, PathSelection,
};
use plugin::{CountTable, Plan};

/// Which contrast of which outcome event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EffectQuery {
    pub sensitive: String,
    /// `a0`, the reference value.
    pub baseline: String,
    /// `a1`, the value whose effect is measured.
    pub comparison: String,
    pub outcome: String,
    /// Outcome value counted as favourable. Ignored by the linear backend.
    pub positive: String,
}

impl EffectQuery {
    pub fn new(
        sensitive: impl Into<String>,
        baseline: impl Into<String>,
        comparison: impl Into<String>,
        outcome: impl Into<String>,
        positive: impl Into<String>,
    ) -> Self {
        Self {
            sensitive: sensitive.into(),
            baseline: baseline.into(),
            comparison: comparison.into(),
            outcome: outcome.into(),
            positive: positive.into(),
        }
    }

    /// The same query with `a0` and `a1` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            baseline: self.comparison.clone(),
            comparison: self.baseline.clone(),
            ..self.clone()
        }
    }

    fn validate(&self, graph: &CausalGraph) -> Result<()> {
        graph.index_of(&self.sensitive)?;
        graph.index_of(&self.outcome)?;
        if self.sensitive == self.outcome {
            return Err(Error::InvalidQuery(
                "sensitive attribute and outcome coincide".into(),
            ));
        }
        if self.baseline == self.comparison {
            return Err(Error::InvalidQuery(format!(
                "a0 and a1 are both `{}`",
                self.baseline
            )));
        }
        Ok(())
    }
}

/// Mediators held at their natural values for NDE / NIE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediationSpec {
    pub mediators: Vec<String>,
}

impl MediationSpec {
    /// Every node on a directed path strictly between `a` and `y`.
    pub fn all(graph: &CausalGraph, a: &str, y: &str) -> Result<Self> {
        Ok(Self {
            mediators: graph.mediators(a, y)?,
        })
    }

    pub fn new(graph: &CausalGraph, a: &str, y: &str, mediators: &[&str]) -> Result<Self> {
        let allowed = graph.mediators(a, y)?;
        let mut out: Vec<String> = Vec::new();
        for &m in mediators {
            graph.index_of(m)?;
            if !allowed.iter().any(|x| x == m) {
                return Err(Error::InvalidQuery(format!(
                    "`{m}` is not a mediator between {a} and {y}"
                )));
            }
            if !out.iter().any(|x| x == m) {
                out.push(m.to_string());
            }
        }
        out.sort();
        Ok(Self { mediators: out })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tv,
    Te,
    Ate,
    Nde,
    Nie,
    Pse,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Tv => "tv",
            Metric::Te => "te",
            Metric::Ate => "ate",
            Metric::Nde => "nde",
            Metric::Nie => "nie",
            Metric::Pse => "pse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "tv" => Metric::Tv,
            "te" => Metric::Te,
            "ate" => Metric::Ate,
            "nde" => Metric::Nde,
            "nie" => Metric::Nie,
            "pse" => Metric::Pse,
            other => return Err(Error::Usage(format!("unknown metric `{other}`"))),
        })
    }

    pub const ALL: [Metric; 6] = [
        Metric::Tv,
        Metric::Te,
        Metric::Ate,
        Metric::Nde,
        Metric::Nie,
        Metric::Pse,
    ];
}

/// A metric together with its extra arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricRequest {
    Tv,
    Te,
    Ate,
    Nde(MediationSpec),
    Nie(MediationSpec),
    Pse(PathSelection),
}

impl MetricRequest {
    pub fn metric(&self) -> Metric {
        match self {
            MetricRequest::Tv => Metric::Tv,
            MetricRequest::Te => Metric::Te,
            MetricRequest::Ate => Metric::Ate,
            MetricRequest::Nde(_) => Metric::Nde,
            MetricRequest::Nie(_) => Metric::Nie,
            MetricRequest::Pse(_) => Metric::Pse,
        }
    }

    /// Default arguments: all mediators for NDE / NIE, every causal edge for PSE.
    pub fn with_defaults(metric: Metric, graph: &CausalGraph, q: &EffectQuery) -> Result<Self> {
        Ok(match metric {
            Metric::Tv => MetricRequest::Tv,
            Metric::Te => MetricRequest::Te,
            Metric::Ate => MetricRequest::Ate,
            Metric::Nde => MetricRequest::Nde(MediationSpec::all(graph, &q.sensitive, &q.outcome)?),
            Metric::Nie => MetricRequest::Nie(MediationSpec::all(graph, &q.sensitive, &q.outcome)?),
            Metric::Pse => {
                MetricRequest::Pse(PathSelection::all_causal(graph, &q.sensitive, &q.outcome)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Linear,
    Plugin,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Linear => "linear",
            Backend::Plugin => "plugin",
        }
    }
}

/// Plug-in estimation settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PluginOptions {
    /// Add-alpha smoothing of every conditional; `None` means raw frequencies
    /// and a positivity error on empty strata.
    pub smoothing: Option<f64>,
}

/// Where the estimate comes from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Exact(&'a DiscreteScm),
    Linear(&'a LinearGaussianScm),
    Plugin {
        data: &'a Dataset,
        graph: &'a CausalGraph,
        options: PluginOptions,
    },
}

impl<'a> Source<'a> {
    pub fn plugin(data: &'a Dataset, graph: &'a CausalGraph) -> Self {
        Source::Plugin {
            data,
            graph,
            options: PluginOptions::default(),
        }
    }

    pub fn graph(&self) -> &'a CausalGraph {
        match self {
            Source::Exact(m) => m.graph(),
            Source::Linear(m) => m.graph(),
            Source::Plugin { graph, .. } => graph,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub metric: Metric,
    pub value: f64,
    pub backend: Backend,
    pub assumptions: Vec<String>,
    pub ci: Option<ConfidenceInterval>,
}

/// Evaluates one metric.
pub fn estimate(
    source: &Source,
    q: &EffectQuery,
    request: &MetricRequest,
) -> Result<EffectEstimate> {
    q.validate(source.graph())?;
    let metric = request.metric();
    let (value, backend, assumptions) = match source {
        Source::Exact(m) => (
            exact(m, q, request)?,
            Backend::Exact,
            exact_assumptions(m, metric),
        ),
        Source::Linear(m) => (
            linear(m, q, request)?,
            Backend::Linear,
            linear_assumptions(metric),
        ),
        Source::Plugin {
            data,
            graph,
            options,
        } => {
            let plan = plan(graph, q, request)?;
            let table = CountTable::from_dataset(data, &plan.columns(q))?;
            let mut assumptions = plan.assumptions();
            if let Some(alpha) = options.smoothing {
                assumptions.push(format!("add-{alpha} smoothing of conditional frequencies"));
            }
            (
                plan.evaluate(&table, q, options)?,
                Backend::Plugin,
                assumptions,
            )
        }
    };
    Ok(EffectEstimate {
        metric,
        value,
        backend,
        assumptions,
        ci: None,
    })
}

pub fn total_variation(source: &Source, q: &EffectQuery) -> Result<EffectEstimate> {
    estimate(source, q, &MetricRequest::Tv)
}

pub fn total_effect(source: &Source, q: &EffectQuery) -> Result<EffectEstimate> {
    estimate(source, q, &MetricRequest::Te)
}

pub fn average_treatment_effect(source: &Source, q: &EffectQuery) -> Result<EffectEstimate> {
    estimate(source, q, &MetricRequest::Ate)
}

pub fn natural_direct_effect(
    source: &Source,
    q: &EffectQuery,
    m: &MediationSpec,
) -> Result<EffectEstimate> {
    estimate(source, q, &MetricRequest::Nde(m.clone()))
}

pub fn natural_indirect_effect(
    source: &Source,
    q: &EffectQuery,
    m: &MediationSpec,
) -> Result<EffectEstimate> {
    estimate(source, q, &MetricRequest::Nie(m.clone()))
}

pub fn path_specific_effect(
    source: &Source,
    q: &EffectQuery,
    selection: &PathSelection,
) -> Result<EffectEstimate> {
    estimate(source, q, &MetricRequest::Pse(selection.clone()))
}

pub(crate) fn plan(graph: &CausalGraph, q: &EffectQuery, request: &MetricRequest) -> Result<Plan> {
    match request {
        MetricRequest::Tv => Ok(Plan::total_variation()),
        MetricRequest::Te | MetricRequest::Ate => Plan::total_effect(graph, q),
        MetricRequest::Nde(m) => Plan::mediation(graph, q, m, false),
        MetricRequest::Nie(m) => Plan::mediation(graph, q, m, true),
        MetricRequest::Pse(sel) => Plan::edge_formula(graph, q, sel),
    }
}

fn exact_assumptions(m: &DiscreteScm, metric: Metric) -> Vec<String> {
    let mut out = vec!["fully specified model; exact enumeration".to_string()];
    if metric != Metric::Tv && m.is_structural() {
        out.push("independent exogenous variables".into());
    }
    out
}

fn linear_assumptions(metric: Metric) -> Vec<String> {
    let mut out = vec!["linear structural equations; effects are mean differences".to_string()];
    if metric == Metric::Tv {
        out.push("conditional mean from the joint second moments".into());
    }
    out
}

fn exact(m: &DiscreteScm, q: &EffectQuery, request: &MetricRequest) -> Result<f64> {
    let event = (q.outcome.as_str(), q.positive.as_str());
    let do_a = |v: &str| m.interventional_prob(&Intervention::single(&q.sensitive, v), event);
    match request {
        MetricRequest::Tv => {
            let joint = m.joint_distribution()?;
            let p = |v: &str| -> Result<f64> {
                joint
                    .conditional(&[event], &[(q.sensitive.as_str(), v)])?
                    .ok_or_else(|| Error::EmptyStratum(format!("{}={v}", q.sensitive)))
            };
            Ok(p(&q.comparison)? - p(&q.baseline)?)
        }
        MetricRequest::Te => Ok(do_a(&q.comparison)? - do_a(&q.baseline)?),
        MetricRequest::Ate if !m.is_structural() => Ok(do_a(&q.comparison)? - do_a(&q.baseline)?),
        MetricRequest::Ate => {
            // Average the unit-level contrast over the observational
            // distribution of fully observed units.
            let joint = m.joint_distribution()?;
            let names = joint.names();
            let mut sum = 0.0;
            for (vals, p) in joint.iter() {
                if p == 0.0 {
                    continue;
                }
                let row = names
                    .iter()
                    .zip(joint.domains())
                    .zip(&vals)
                    .map(|((n, d), &x)| (n.clone(), d[x].clone()))
                    .collect();
                let unit = |v: &str| -> Result<f64> {
                    let post = m.unit_counterfactual(
                        &row,
                        &Intervention::single(&q.sensitive, v),
                        &q.outcome,
                    )?;
                    Ok(post
                        .iter()
                        .find(|(val, _)| *val == q.positive)
                        .map(|(_, p)| *p)
                        .unwrap_or(0.0))
                };
                sum += p * (unit(&q.comparison)? - unit(&q.baseline)?);
            }
            Ok(sum)
        }
        MetricRequest::Nde(spec) | MetricRequest::Nie(spec) => {
            let indirect = matches!(request, MetricRequest::Nie(_));
            let (primary, reference) = if indirect {
                (&q.baseline, &q.comparison)
            } else {
                (&q.comparison, &q.baseline)
            };
            let nested = m.counterfactual_prob(&CounterfactualQuery {
                treatment: q.sensitive.clone(),
                primary: primary.clone(),
                reference: reference.clone(),
                held: spec.mediators.clone(),
                outcome: q.outcome.clone(),
                value: q.positive.clone(),
            })?;
            Ok(nested - do_a(&q.baseline)?)
        }
        MetricRequest::Pse(sel) => {
            let selected =
                m.path_specific_prob(sel, &q.sensitive, &q.comparison, &q.baseline, event)?;
            Ok(selected - do_a(&q.baseline)?)
        }
    }
}

fn linear(m: &LinearGaussianScm, q: &EffectQuery, request: &MetricRequest) -> Result<f64> {
    let g = m.graph();
    let do_a = |v: &str| m.expectation(&Intervention::single(&q.sensitive, v), &q.outcome);
    let (a1, a0) = (
        crate::scm::parse_level(&q.sensitive, &q.comparison)?,
        crate::scm::parse_level(&q.sensitive, &q.baseline)?,
    );
    match request {
        MetricRequest::Tv => {
            let a = g.index_of(&q.sensitive)?;
            if g.parents(a).is_empty() {
                // A root's value carries no information about other causes.
                return Ok(do_a(&q.comparison)? - do_a(&q.baseline)?);
            }
            if m.nodes()
                .iter()
                .any(|n| matches!(n.noise, crate::scm::Noise::Bernoulli { .. }))
            {
                return Err(Error::UnsupportedModel(
                    "conditional means given a non-root node need all-Gaussian noise".into(),
                ));
            }
            let y = g.index_of(&q.outcome)?;
            let (_, cov) = m.moments(&Intervention::new())?;
            if cov[a][a] <= 0.0 {
                return Err(Error::EmptyStratum(format!(
                    "{} has zero variance",
                    q.sensitive
                )));
            }
            Ok(cov[y][a] / cov[a][a] * (a1 - a0))
        }
        MetricRequest::Te | MetricRequest::Ate => Ok(do_a(&q.comparison)? - do_a(&q.baseline)?),
        MetricRequest::Nde(spec) | MetricRequest::Nie(spec) => {
            let indirect = matches!(request, MetricRequest::Nie(_));
            let (primary, reference) = if indirect {
                (&q.baseline, &q.comparison)
            } else {
                (&q.comparison, &q.baseline)
            };
            let nested = m.counterfactual_mean(&CounterfactualQuery {
                treatment: q.sensitive.clone(),
                primary: primary.clone(),
                reference: reference.clone(),
                held: spec.mediators.clone(),
                outcome: q.outcome.clone(),
                value: q.positive.clone(),
            })?;
            Ok(nested - do_a(&q.baseline)?)
        }
        MetricRequest::Pse(sel) => {
            Ok(m.path_specific_mean(sel, &q.sensitive, a1, a0, &q.outcome)? - do_a(&q.baseline)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::ScmBuilder;

    /// A -> Z -> Y, A -> Y, C -> A, C -> Y with additive threshold probabilities.
    fn model() -> DiscreteScm {
        let g = CausalGraph::new(
            ["A", "C", "Y", "Z"],
            [("C", "A"), ("C", "Y"), ("A", "Z"), ("A", "Y"), ("Z", "Y")],
        )
        .unwrap();
        ScmBuilder::new(g)
            .threshold("C", |_| 0.4)
            .threshold("A", |p| 0.3 + 0.4 * p[0] as f64)
            .threshold("Z", |p| 0.2 + 0.5 * p[0] as f64)
            .threshold("Y", |p| {
                0.1 + 0.2 * p[0] as f64 + 0.3 * p[1] as f64 + 0.3 * p[2] as f64
            })
            .build()
            .unwrap()
    }

    fn query() -> EffectQuery {
        EffectQuery::new("A", "0", "1", "Y", "1")
    }

    #[test]
    fn exact_values_follow_the_additive_structure() {
        let m = model();
        let s = Source::Exact(&m);
        let q = query();
        let te = total_effect(&s, &q).unwrap().value;
        assert!((te - (0.2 + 0.3 * 0.5)).abs() < 1e-12);
        let med = MediationSpec::all(m.graph(), "A", "Y").unwrap();
        let nde = natural_direct_effect(&s, &q, &med).unwrap().value;
        assert!((nde - 0.2).abs() < 1e-12);
        let nie_rev = natural_indirect_effect(&s, &q.swapped(), &med)
            .unwrap()
            .value;
        assert!((te - (nde - nie_rev)).abs() < 1e-12);
        let ate = average_treatment_effect(&s, &q).unwrap().value;
        assert!((ate - te).abs() < 1e-12);
    }

    #[test]
    fn pse_extremes() {
        let m = model();
        let s = Source::Exact(&m);
        let q = query();
        let none = path_specific_effect(&s, &q, &PathSelection::default())
            .unwrap()
            .value;
        assert_eq!(none, 0.0);
        let all = path_specific_effect(
            &s,
            &q,
            &PathSelection::all_causal(m.graph(), "A", "Y").unwrap(),
        )
        .unwrap();
        assert!((all.value - total_effect(&s, &q).unwrap().value).abs() < 1e-12);
        let direct = PathSelection::direct(m.graph(), "A", "Y").unwrap();
        let med = MediationSpec::all(m.graph(), "A", "Y").unwrap();
        assert!(
            (path_specific_effect(&s, &q, &direct).unwrap().value
                - natural_direct_effect(&s, &q, &med).unwrap().value)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn plugin_matches_exact_on_large_sample() {
        let m = model();
        let data = m.sample(200_000, 11);
        let q = query();
        let exact_src = Source::Exact(&m);
        let plug = Source::plugin(&data, m.graph());
        for metric in Metric::ALL {
            let req = MetricRequest::with_defaults(metric, m.graph(), &q).unwrap();
            let e = estimate(&exact_src, &q, &req).unwrap().value;
            let p = estimate(&plug, &q, &req).unwrap().value;
            assert!((e - p).abs() < 0.015, "{metric:?}: exact {e} plugin {p}");
        }
    }

    #[test]
    fn adjustment_reduces_to_tv_without_confounders() {
        let g = CausalGraph::new(["A", "Y"], [("A", "Y")]).unwrap();
        let m = ScmBuilder::new(g)
            .threshold("A", |_| 0.3)
            .threshold("Y", |p| 0.2 + 0.5 * p[0] as f64)
            .build()
            .unwrap();
        let data = m.sample(999, 3);
        let s = Source::plugin(&data, m.graph());
        let q = query();
        assert_eq!(
            total_variation(&s, &q).unwrap().value,
            total_effect(&s, &q).unwrap().value
        );
    }

    #[test]
    fn unobserved_confounding_is_reported() {
        let g = CausalGraph::builder()
            .node("A")
            .node("Y")
            .unobserved_node("U")
            .edge("U", "A")
            .edge("U", "Y")
            .edge("A", "Y")
            .build()
            .unwrap();
        let data = Dataset::new(vec![
            crate::dataset::Column::from_labels("A", &["0", "1"], &["0", "1"]).unwrap(),
            crate::dataset::Column::from_labels("Y", &["0", "1"], &["1", "0"]).unwrap(),
        ])
        .unwrap();
        let err = total_effect(&Source::plugin(&data, &g), &query()).unwrap_err();
        assert!(
            matches!(err, Error::NotIdentifiable(ref s) if s.contains('U')),
            "{err}"
        );
    }

    #[test]
    fn recanting_witness_blocks_plugin_pse() {
        // A -> M -> Y with A -> W -> M and W -> Y; selecting A->W->M->Y but
        // not A->W->Y makes W a recanting witness.
        let g = CausalGraph::new(
            ["A", "M", "W", "Y"],
            [("A", "W"), ("A", "M"), ("W", "M"), ("M", "Y"), ("W", "Y")],
        )
        .unwrap();
        let m = ScmBuilder::new(g)
            .threshold("A", |_| 0.5)
            .threshold("W", |p| 0.2 + 0.5 * p[0] as f64)
            .threshold("M", |p| 0.1 + 0.3 * p[0] as f64 + 0.3 * p[1] as f64)
            .threshold("Y", |p| 0.1 + 0.4 * p[0] as f64 + 0.3 * p[1] as f64)
            .build()
            .unwrap();
        let data = m.sample(1000, 1);
        let sel = PathSelection::new([("A", "W"), ("W", "M"), ("M", "Y")]);
        let err =
            path_specific_effect(&Source::plugin(&data, m.graph()), &query(), &sel).unwrap_err();
        assert!(
            matches!(err, Error::NotIdentifiable(ref s) if s.contains('W')),
            "{err}"
        );
        // Exact evaluation still works.
        assert!(path_specific_effect(&Source::Exact(&m), &query(), &sel).is_ok());
    }

    #[test]
    fn positivity_and_smoothing() {
        let g = CausalGraph::new(["A", "C", "Y"], [("C", "A"), ("C", "Y"), ("A", "Y")]).unwrap();
        // C=1 rows all have A=1.
        let rows = [
            ("0", "0", "0"),
            ("1", "0", "1"),
            ("1", "1", "1"),
            ("1", "1", "0"),
        ];
        let col = |i: usize, name: &str| {
            let labels: Vec<&str> = rows.iter().map(|r| [r.0, r.1, r.2][i]).collect();
            crate::dataset::Column::from_labels(name, &["0", "1"], &labels).unwrap()
        };
        let data = Dataset::new(vec![col(0, "A"), col(1, "C"), col(2, "Y")]).unwrap();
        let q = query();
        let err = total_effect(&Source::plugin(&data, &g), &q).unwrap_err();
        assert!(matches!(err, Error::Positivity(_)), "{err}");
        let smoothed = Source::Plugin {
            data: &data,
            graph: &g,
            options: PluginOptions {
                smoothing: Some(1.0),
            },
        };
        let est = total_effect(&smoothed, &q).unwrap();
        assert!(est.assumptions.iter().any(|a| a.contains("smoothing")));
    }

    #[test]
    fn query_validation() {
        let m = model();
        let s = Source::Exact(&m);
        assert!(matches!(
            total_effect(&s, &EffectQuery::new("A", "1", "1", "Y", "1")),
            Err(Error::InvalidQuery(_))
        ));
        assert!(matches!(
            total_effect(&s, &EffectQuery::new("A", "0", "2", "Y", "1")),
            Err(Error::Domain { .. })
        ));
    }
}
