//! Ready-made binary models for the standard fairness phenomena: a
//! confounded visa decision, a hiring pipeline with an explaining and a
//! proxy mediator, a district confounder with no causal effect, collider
//! selection on fame, a pure confounder and a two-mediator fixture.
//!
//! Every node is binary on `{"0", "1"}` with
//! `P(node = 1 | parents) = p_node + sum(strength * parent)`. Parameters
//! are named `p_<Node>` for base rates and `<Parent>-><Node>` for edge
//! strengths; all lie in `[0, 1]` and the implied probabilities must too.
//! The default magnitudes are this crate's choice, picked so that every
//! demonstrated effect is at least 0.1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EffectQuery, MediationSpec, Metric, MetricRequest, Source};
use crate::graph::{CausalGraph, Role};
use crate::scm::{DiscreteScm, PathSelection, ScmBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioId {
    Visa,
    Hiring,
    District,
    BanknoteCollider,
    LoveConfounder,
    PopularityMediation,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 6] = [
        ScenarioId::Visa,
        ScenarioId::Hiring,
        ScenarioId::District,
        ScenarioId::BanknoteCollider,
        ScenarioId::LoveConfounder,
        ScenarioId::PopularityMediation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Visa => "visa",
            ScenarioId::Hiring => "hiring",
            ScenarioId::District => "district",
            ScenarioId::BanknoteCollider => "banknote-collider",
            ScenarioId::LoveConfounder => "love-confounder",
            ScenarioId::PopularityMediation => "popularity-mediation",
        }
    }

    fn definition(self) -> Definition {
        match self {
            ScenarioId::Visa => Definition {
                nodes: &[
                    ("Age", 0.5, &[]),
                    ("Nationality", 0.3, &[("Age", 0.4)]),
                    ("SkillLevel", 0.25, &[("Nationality", 0.5)]),
                    ("FamilyStatus", 0.2, &[("Nationality", 0.5)]),
                    (
                        "Visa",
                        0.05,
                        &[
                            ("Age", 0.3),
                            ("Nationality", 0.2),
                            ("SkillLevel", 0.2),
                            ("FamilyStatus", 0.2),
                        ],
                    ),
                ],
                sensitive: "Nationality",
                outcome: "Visa",
                roles: &[
                    ("SkillLevel", Role::Explaining),
                    ("FamilyStatus", Role::Proxy),
                ],
                selection: Some(&[("Nationality", "FamilyStatus"), ("FamilyStatus", "Visa")]),
            },
            ScenarioId::Hiring => Definition {
                nodes: &[
                    ("Race", 0.5, &[]),
                    ("LastName", 0.1, &[("Race", 0.7)]),
                    ("Skill", 0.3, &[("Race", 0.3)]),
                    (
                        "Hired",
                        0.1,
                        &[("Race", 0.2), ("LastName", 0.3), ("Skill", 0.3)],
                    ),
                ],
                sensitive: "Race",
                outcome: "Hired",
                roles: &[("Skill", Role::Explaining), ("LastName", Role::Proxy)],
                selection: Some(&[("Race", "LastName"), ("LastName", "Hired")]),
            },
            ScenarioId::District => Definition {
                nodes: &[
                    ("District", 0.5, &[]),
                    ("Race", 0.3, &[("District", 0.5)]),
                    ("SchoolRating", 0.2, &[("District", 0.5)]),
                    ("PredictedAbility", 0.2, &[("SchoolRating", 0.6)]),
                ],
                sensitive: "Race",
                outcome: "PredictedAbility",
                roles: &[],
                selection: None,
            },
            ScenarioId::BanknoteCollider => Definition {
                nodes: &[
                    ("Gender", 0.5, &[]),
                    ("Talent", 0.5, &[]),
                    ("Fame", 0.05, &[("Gender", 0.35), ("Talent", 0.5)]),
                ],
                sensitive: "Gender",
                outcome: "Fame",
                roles: &[],
                selection: None,
            },
            ScenarioId::LoveConfounder => Definition {
                nodes: &[
                    ("Love", 0.5, &[]),
                    ("Behavior", 0.1, &[("Love", 0.6)]),
                    ("Glow", 0.1, &[("Love", 0.7)]),
                ],
                sensitive: "Behavior",
                outcome: "Glow",
                roles: &[],
                selection: None,
            },
            ScenarioId::PopularityMediation => Definition {
                nodes: &[
                    ("Happy", 0.5, &[]),
                    ("Smile", 0.2, &[("Happy", 0.5)]),
                    ("Helpful", 0.3, &[("Happy", 0.4)]),
                    (
                        "Popular",
                        0.1,
                        &[("Happy", 0.2), ("Smile", 0.3), ("Helpful", 0.3)],
                    ),
                ],
                sensitive: "Happy",
                outcome: "Popular",
                roles: &[],
                selection: Some(&[("Happy", "Smile"), ("Smile", "Popular")]),
            },
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ScenarioId::ALL.iter().map(|id| id.as_str()).collect();
                Error::Usage(format!(
                    "unknown scenario `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

type NodeDef = (&'static str, f64, &'static [(&'static str, f64)]);

struct Definition {
    nodes: &'static [NodeDef],
    sensitive: &'static str,
    outcome: &'static str,
    roles: &'static [(&'static str, Role)],
    /// Path selection of interest; all causal edges when `None`.
    selection: Option<&'static [(&'static str, &'static str)]>,
}

/// A scenario plus parameter overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub params: BTreeMap<String, f64>,
}

impl ScenarioSpec {
    /// All parameters at their defaults.
    pub fn new(id: ScenarioId) -> Self {
        Self {
            id,
            params: Self::defaults(id),
        }
    }

    pub fn defaults(id: ScenarioId) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for &(name, base, parents) in id.definition().nodes {
            out.insert(format!("p_{name}"), base);
            for &(p, w) in parents {
                out.insert(format!("{p}->{name}"), w);
            }
        }
        out
    }

    /// Overrides one parameter; the name must exist.
    pub fn with(mut self, name: &str, value: f64) -> Result<Self> {
        match self.params.get_mut(name) {
            Some(slot) => *slot = value,
            None => {
                return Err(Error::ParameterRange {
                    name: name.to_string(),
                    value,
                    reason: format!("`{}` has no such parameter", self.id),
                })
            }
        }
        Ok(self)
    }

    pub fn build(&self) -> Result<Scenario> {
        Scenario::from_spec(self)
    }
}

/// Exact values of every metric for the scenario's default query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundTruth {
    pub tv: f64,
    pub te: f64,
    pub ate: f64,
    pub nde: f64,
    /// `P(y_{a0, Z_{a1}}) - P(y_{a0})`.
    pub nie: f64,
    /// The same with `a0` and `a1` exchanged; `te = nde - nie_reverse`.
    pub nie_reverse: f64,
    /// For the scenario's own path selection.
    pub pse: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: ScenarioId,
    pub params: BTreeMap<String, f64>,
    pub scm: DiscreteScm,
    pub query: EffectQuery,
    pub roles: BTreeMap<String, Role>,
    pub selection: PathSelection,
    pub truth: GroundTruth,
}

impl Scenario {
    pub fn new(id: ScenarioId) -> Self {
        ScenarioSpec::new(id)
            .build()
            .expect("default parameters are valid")
    }

    pub fn all() -> Vec<Scenario> {
        ScenarioId::ALL.into_iter().map(Scenario::new).collect()
    }

    fn from_spec(spec: &ScenarioSpec) -> Result<Self> {
        let def = spec.id.definition();
        for (name, &value) in &spec.params {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ParameterRange {
                    name: name.clone(),
                    value,
                    reason: "must lie in [0, 1]".into(),
                });
            }
        }
        let nodes: Vec<&str> = def.nodes.iter().map(|n| n.0).collect();
        let edges: Vec<(&str, &str)> = def
            .nodes
            .iter()
            .flat_map(|&(c, _, ps)| ps.iter().map(move |&(p, _)| (p, c)))
            .collect();
        let graph = CausalGraph::new(nodes, edges)?;

        let mut builder = ScmBuilder::new(graph.clone());
        for &(name, _, parents) in def.nodes {
            let base = spec.params[&format!("p_{name}")];
            // Strength per canonical parent position.
            let strengths: Vec<f64> = graph
                .parent_names(name)?
                .iter()
                .map(|p| spec.params[&format!("{p}->{name}")])
                .collect();
            let max = base + strengths.iter().sum::<f64>();
            if max > 1.0 + 1e-12 {
                return Err(Error::ParameterRange {
                    name: format!("p_{name}"),
                    value: base,
                    reason: format!(
                        "P({name} = 1) reaches {max} when every parent is 1 (strengths of {} included)",
                        parents.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
                    ),
                });
            }
            builder = builder.threshold(name, move |pa| {
                (base
                    + pa.iter()
                        .zip(&strengths)
                        .map(|(&x, w)| x as f64 * w)
                        .sum::<f64>())
                .min(1.0)
            });
        }
        let scm = builder.build()?;
        let query = EffectQuery::new(def.sensitive, "0", "1", def.outcome, "1");
        let roles = def.roles.iter().map(|&(n, r)| (n.to_string(), r)).collect();
        let selection = match def.selection {
            Some(edges) => PathSelection::new(edges.iter().copied()),
            None => PathSelection::all_causal(&graph, def.sensitive, def.outcome)?,
        };
        let truth = ground_truth(&scm, &query, &selection)?;
        Ok(Self {
            id: spec.id,
            params: spec.params.clone(),
            scm,
            query,
            roles,
            selection,
            truth,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        self.scm.graph()
    }

    pub fn mediation(&self) -> MediationSpec {
        MediationSpec::all(self.graph(), &self.query.sensitive, &self.query.outcome)
            .expect("query nodes exist")
    }

    /// The default request for `metric` in this scenario (its own path
    /// selection for PSE).
    pub fn request(&self, metric: Metric) -> MetricRequest {
        match metric {
            Metric::Pse => MetricRequest::Pse(self.selection.clone()),
            Metric::Tv => MetricRequest::Tv,
            Metric::Te => MetricRequest::Te,
            Metric::Ate => MetricRequest::Ate,
            Metric::Nde => MetricRequest::Nde(self.mediation()),
            Metric::Nie => MetricRequest::Nie(self.mediation()),
        }
    }

    pub fn truth_of(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Tv => self.truth.tv,
            Metric::Te => self.truth.te,
            Metric::Ate => self.truth.ate,
            Metric::Nde => self.truth.nde,
            Metric::Nie => self.truth.nie,
            Metric::Pse => self.truth.pse,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        self.scm.sample(n, seed)
    }

    /// `n` rows drawn from the subpopulation with `node = value`, e.g. only
    /// the famous in the collider scenario. Deterministic in `seed`: rows
    /// are the first `n` matching rows of the unfiltered stream.
    pub fn sample_selected(&self, node: &str, value: &str, n: usize, seed: u64) -> Result<Dataset> {
        let p = self
            .scm
            .joint_distribution()?
            .probability(&[(node, value)])?;
        if p == 0.0 {
            return Err(Error::ImpossibleObservation);
        }
        let code = self.scm.value_index(node, value)? as u32;
        let mut draws = ((n as f64 / p) * 1.2) as usize + 64;
        loop {
            let data = self.scm.sample(draws, seed);
            let (col, _) = data.categorical(node)?;
            let keep: Vec<usize> = (0..data.n_rows())
                .filter(|&i| col[i] == code)
                .take(n)
                .collect();
            if keep.len() == n {
                return Ok(data.take_rows(&keep));
            }
            draws *= 2;
        }
    }
}

fn ground_truth(
    scm: &DiscreteScm,
    q: &EffectQuery,
    selection: &PathSelection,
) -> Result<GroundTruth> {
    let src = Source::Exact(scm);
    let g = scm.graph();
    let med = MediationSpec::all(g, &q.sensitive, &q.outcome)?;
    let value = |q: &EffectQuery, r: MetricRequest| estimate(&src, q, &r).map(|e| e.value);
    Ok(GroundTruth {
        tv: value(q, MetricRequest::Tv)?,
        te: value(q, MetricRequest::Te)?,
        ate: value(q, MetricRequest::Ate)?,
        nde: value(q, MetricRequest::Nde(med.clone()))?,
        nie: value(q, MetricRequest::Nie(med.clone()))?,
        nie_reverse: value(&q.swapped(), MetricRequest::Nie(med))?,
        pse: value(q, MetricRequest::Pse(selection.clone()))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visa_structure() {
        let s = Scenario::new(ScenarioId::Visa);
        let edges = s.graph().edges();
        assert_eq!(edges.len(), 7);
        for e in [
            ("Age", "Nationality"),
            ("Age", "Visa"),
            ("Nationality", "SkillLevel"),
            ("SkillLevel", "Visa"),
            ("Nationality", "FamilyStatus"),
            ("FamilyStatus", "Visa"),
            ("Nationality", "Visa"),
        ] {
            assert!(edges.contains(&e), "{e:?}");
        }
    }

    #[test]
    fn visa_no_direct_effect() {
        let s = ScenarioSpec::new(ScenarioId::Visa)
            .with("Nationality->Visa", 0.0)
            .unwrap()
            .build()
            .unwrap();
        assert!(s.truth.nde.abs() < 1e-12);
    }

    #[test]
    fn hiring_zeroed_proxy() {
        let s = ScenarioSpec::new(ScenarioId::Hiring)
            .with("LastName->Hired", 0.0)
            .unwrap()
            .build()
            .unwrap();
        assert!(s.truth.pse.abs() < 1e-12);
        assert!(Scenario::new(ScenarioId::Hiring).truth.pse > 0.1);
    }

    #[test]
    fn district_truth() {
        let s = Scenario::new(ScenarioId::District);
        assert!(s.truth.te.abs() < 1e-12);
        assert!(s.truth.tv > 0.1);
        let cut = ScenarioSpec::new(ScenarioId::District)
            .with("District->Race", 0.0)
            .unwrap()
            .build()
            .unwrap();
        assert!(cut.truth.tv.abs() < 1e-12);
    }

    #[test]
    fn love_and_popularity() {
        let love = Scenario::new(ScenarioId::LoveConfounder);
        assert_eq!(love.truth.te, 0.0);
        assert!(love.truth.tv > 0.1);
        let pop = Scenario::new(ScenarioId::PopularityMediation);
        assert!((pop.truth.te - (pop.truth.nde - pop.truth.nie_reverse)).abs() < 1e-12);
    }

    #[test]
    fn magnitudes_are_detectable() {
        for s in Scenario::all() {
            let t = s.truth;
            match s.id {
                ScenarioId::District | ScenarioId::LoveConfounder => {
                    assert!(t.tv >= 0.1, "{}", s.id)
                }
                _ => assert!(t.te >= 0.1, "{}", s.id),
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(
            ScenarioSpec::new(ScenarioId::Visa)
                .with("p_Age", 1.5)
                .unwrap()
                .build(),
            Err(Error::ParameterRange { .. })
        ));
        assert!(matches!(
            ScenarioSpec::new(ScenarioId::Visa)
                .with("p_Visa", 0.5)
                .unwrap()
                .build(),
            Err(Error::ParameterRange { .. })
        ));
        assert!(ScenarioSpec::new(ScenarioId::Visa)
            .with("nope", 0.5)
            .is_err());
        assert_eq!(
            "banknote-collider".parse::<ScenarioId>().unwrap(),
            ScenarioId::BanknoteCollider
        );
    }

    #[test]
    fn selected_sample_is_filtered_and_deterministic() {
        let s = Scenario::new(ScenarioId::BanknoteCollider);
        let a = s.sample_selected("Fame", "1", 500, 3).unwrap();
        let b = s.sample_selected("Fame", "1", 500, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_rows(), 500);
        assert!(a.categorical("Fame").unwrap().0.iter().all(|&c| c == 1));
    }
}
