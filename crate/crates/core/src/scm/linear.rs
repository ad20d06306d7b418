use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{CounterfactualQuery, Intervention, PathSelection, RowStreams};
use crate::dataset::{Column, Dataset};
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, Path};

const SAMPLE_STREAM: u64 = 2;
const WORLDS_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian {
        variance: f64,
    },
    /// Root-only binary node taking value 1 with probability `p`.
    Bernoulli {
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearNode {
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub noise: Noise,
}

impl LinearNode {
    pub fn gaussian(intercept: f64, coefficients: &[(&str, f64)], variance: f64) -> Self {
        Self {
            intercept,
            coefficients: coefficients
                .iter()
                .map(|(n, c)| (n.to_string(), *c))
                .collect(),
            noise: Noise::Gaussian { variance },
        }
    }

    pub fn bernoulli(p: f64) -> Self {
        Self {
            intercept: 0.0,
            coefficients: BTreeMap::new(),
            noise: Noise::Bernoulli { p },
        }
    }
}

/// `V := intercept + sum(coef * parent) + noise` for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianScm {
    graph: CausalGraph,
    nodes: Vec<LinearNode>,
    /// Coefficients aligned with `graph.parents(v)`.
    coef: Vec<Vec<f64>>,
}

/// Path-tracing decomposition of the effect of `a` on `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEffects {
    pub total: f64,
    pub direct: f64,
    pub paths: Vec<(Path, f64)>,
}

impl LinearEffects {
    /// Sum over directed paths of length two or more.
    pub fn indirect(&self) -> f64 {
        self.paths
            .iter()
            .filter(|(p, _)| p.nodes.len() > 2)
            .map(|(_, e)| e)
            .sum()
    }
}

impl LinearGaussianScm {
    pub fn new(graph: CausalGraph, mut nodes: BTreeMap<String, LinearNode>) -> Result<Self> {
        let mut ordered = Vec::with_capacity(graph.len());
        let mut coef = Vec::with_capacity(graph.len());
        for v in 0..graph.len() {
            let name = graph.name(v);
            let node = nodes
                .remove(name)
                .ok_or_else(|| Error::invalid_model(format!("no equation for node `{name}`")))?;
            let parents: Vec<&str> = graph.parents(v).iter().map(|&p| graph.name(p)).collect();
            if node.coefficients.len() != parents.len()
                || parents.iter().any(|p| !node.coefficients.contains_key(*p))
            {
                return Err(Error::invalid_model(format!(
                    "coefficients of `{name}` must name exactly its parents [{}]",
                    parents.join(", ")
                )));
            }
            if !node.intercept.is_finite() || node.coefficients.values().any(|c| !c.is_finite()) {
                return Err(Error::invalid_model(format!(
                    "`{name}` has a non-finite coefficient"
                )));
            }
            match node.noise {
                Noise::Gaussian { variance } if !(variance.is_finite() && variance >= 0.0) => {
                    return Err(Error::invalid_model(format!(
                        "`{name}` has invalid noise variance {variance}"
                    )));
                }
                Noise::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                    return Err(Error::invalid_model(format!(
                        "`{name}` has Bernoulli probability {p}"
                    )));
                }
                Noise::Bernoulli { .. } if !parents.is_empty() => {
                    return Err(Error::invalid_model(format!(
                        "Bernoulli node `{name}` must be a root"
                    )));
                }
                _ => {}
            }
            coef.push(parents.iter().map(|p| node.coefficients[*p]).collect());
            ordered.push(node);
        }
        if let Some(extra) = nodes.keys().next() {
            return Err(Error::UnknownNode(extra.clone()));
        }
        Ok(Self {
            graph,
            nodes: ordered,
            coef,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn nodes(&self) -> &[LinearNode] {
        &self.nodes
    }

    pub fn coefficient(&self, from: &str, to: &str) -> Result<Option<f64>> {
        let (u, v) = (self.graph.index_of(from)?, self.graph.index_of(to)?);
        Ok(self
            .graph
            .parents(v)
            .iter()
            .position(|&p| p == u)
            .map(|k| self.coef[v][k]))
    }

    fn resolve(&self, intervention: &Intervention) -> Result<Vec<Option<f64>>> {
        let mut fixed = vec![None; self.graph.len()];
        for (node, value) in &intervention.assignments {
            let v = self.graph.index_of(node)?;
            let x: f64 = value.parse().map_err(|_| Error::Domain {
                node: node.clone(),
                value: value.clone(),
            })?;
            fixed[v] = Some(x);
        }
        Ok(fixed)
    }

    fn noise_mean(&self, v: usize) -> f64 {
        match self.nodes[v].noise {
            Noise::Gaussian { .. } => 0.0,
            Noise::Bernoulli { p } => p,
        }
    }

    fn noise_variance(&self, v: usize) -> f64 {
        match self.nodes[v].noise {
            Noise::Gaussian { variance } => variance,
            Noise::Bernoulli { p } => p * (1.0 - p),
        }
    }

    fn means(&self, fixed: &[Option<f64>]) -> Vec<f64> {
        let mut mean = vec![0.0; self.graph.len()];
        for &v in self.graph.topological_indices() {
            mean[v] = fixed[v].unwrap_or_else(|| {
                self.nodes[v].intercept
                    + self.noise_mean(v)
                    + self
                        .graph
                        .parents(v)
                        .iter()
                        .zip(&self.coef[v])
                        .map(|(&p, c)| c * mean[p])
                        .sum::<f64>()
            });
        }
        mean
    }

    /// `E[node | do(...)]`.
    pub fn expectation(&self, intervention: &Intervention, node: &str) -> Result<f64> {
        let v = self.graph.index_of(node)?;
        Ok(self.means(&self.resolve(intervention)?)[v])
    }

    /// Means and covariance matrix (canonical node order) under `do(...)`.
    pub fn moments(&self, intervention: &Intervention) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let fixed = self.resolve(intervention)?;
        let n = self.graph.len();
        let mut cov = vec![vec![0.0; n]; n];
        let topo = self.graph.topological_indices();
        for (i, &v) in topo.iter().enumerate() {
            if fixed[v].is_some() {
                continue;
            }
            let parents = self.graph.parents(v);
            for &w in &topo[..i] {
                let c: f64 = parents
                    .iter()
                    .zip(&self.coef[v])
                    .map(|(&p, c)| c * cov[p][w])
                    .sum();
                cov[v][w] = c;
                cov[w][v] = c;
            }
            let mut var = self.noise_variance(v);
            for (&p, cp) in parents.iter().zip(&self.coef[v]) {
                for (&q, cq) in parents.iter().zip(&self.coef[v]) {
                    var += cp * cq * cov[p][q];
                }
            }
            cov[v][v] = var;
        }
        Ok((self.means(&fixed), cov))
    }

    /// Mean of the nested counterfactual: held nodes take their mean from
    /// the reference world. Exact by linearity of expectation.
    pub fn counterfactual_mean(&self, q: &CounterfactualQuery) -> Result<f64> {
        let a = self.graph.index_of(&q.treatment)?;
        let y = self.graph.index_of(&q.outcome)?;
        let (a1, a0) = (
            parse_level(&q.treatment, &q.primary)?,
            parse_level(&q.treatment, &q.reference)?,
        );
        let mut fixed = vec![None; self.graph.len()];
        fixed[a] = Some(a0);
        let reference = self.means(&fixed);
        fixed[a] = Some(a1);
        for z in &q.held {
            let zi = self.graph.index_of(z)?;
            fixed[zi] = Some(reference[zi]);
        }
        Ok(self.means(&fixed)[y])
    }

    /// Mean outcome when `primary` travels along the selected edges and
    /// `reference` along the rest.
    pub fn path_specific_mean(
        &self,
        selection: &PathSelection,
        treatment: &str,
        primary: f64,
        reference: f64,
        outcome: &str,
    ) -> Result<f64> {
        let g = &self.graph;
        let (a, y) = (g.index_of(treatment)?, g.index_of(outcome)?);
        let mask = selection.mask(g, a, y)?;
        let mut fixed = vec![None; g.len()];
        fixed[a] = Some(reference);
        let baseline = self.means(&fixed);
        let mut selected = vec![0.0; g.len()];
        for &v in g.topological_indices() {
            selected[v] = if v == a {
                primary
            } else {
                self.nodes[v].intercept
                    + self.noise_mean(v)
                    + g.parents(v)
                        .iter()
                        .zip(&self.coef[v])
                        .zip(&mask[v])
                        .map(|((&p, c), &on)| c * if on { selected[p] } else { baseline[p] })
                        .sum::<f64>()
            };
        }
        Ok(selected[y])
    }

    /// Path tracing: each directed path contributes the product of its edge
    /// coefficients.
    pub fn linear_path_effects(&self, a: &str, y: &str) -> Result<LinearEffects> {
        let paths = self.graph.causal_paths(a, y)?;
        let mut out = Vec::with_capacity(paths.len());
        let mut direct = 0.0;
        for path in paths {
            let mut effect = 1.0;
            for (from, to) in path.edges() {
                effect *= self.coefficient(&from, &to)?.expect("path edges exist");
            }
            if path.nodes.len() == 2 {
                direct = effect;
            }
            out.push((path, effect));
        }
        Ok(LinearEffects {
            total: out.iter().map(|(_, e)| e).sum(),
            direct,
            paths: out,
        })
    }

    fn draw_noise(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|node| match node.noise {
                Noise::Gaussian { variance } => {
                    let z: f64 = rng.sample(StandardNormal);
                    z * variance.sqrt()
                }
                Noise::Bernoulli { p } => f64::from(u8::from(rng.gen::<f64>() < p)),
            })
            .collect()
    }

    fn propagate(&self, noise: &[f64], fixed: &[Option<f64>], out: &mut [f64]) {
        for &v in self.graph.topological_indices() {
            out[v] = fixed[v].unwrap_or_else(|| {
                self.nodes[v].intercept
                    + noise[v]
                    + self
                        .graph
                        .parents(v)
                        .iter()
                        .zip(&self.coef[v])
                        .map(|(&p, c)| c * out[p])
                        .sum::<f64>()
            });
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        self.sample_with(&Intervention::new(), n, seed)
            .expect("empty intervention is valid")
    }

    /// Numeric dataset of `n` rows under `do(...)`.
    pub fn sample_with(&self, intervention: &Intervention, n: usize, seed: u64) -> Result<Dataset> {
        let fixed = self.resolve(intervention)?;
        let streams = RowStreams::new(seed, SAMPLE_STREAM);
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let noise = self.draw_noise(&mut streams.row(i as u64));
                let mut out = vec![0.0; self.graph.len()];
                self.propagate(&noise, &fixed, &mut out);
                out
            })
            .collect();
        Dataset::new(
            (0..self.graph.len())
                .map(|v| Column::numeric(self.graph.name(v), rows.iter().map(|r| r[v]).collect()))
                .collect(),
        )
    }

    /// Unit-level draws of the path-specific outcome: each row shares one
    /// noise vector between the baseline and the selected world.
    #[allow(clippy::too_many_arguments)]
    pub fn sample_path_specific(
        &self,
        selection: &PathSelection,
        treatment: &str,
        primary: f64,
        reference: f64,
        outcome: &str,
        n: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let g = &self.graph;
        let (a, y) = (g.index_of(treatment)?, g.index_of(outcome)?);
        let mask = selection.mask(g, a, y)?;
        let streams = RowStreams::new(seed, WORLDS_STREAM);
        let mut fixed = vec![None; g.len()];
        fixed[a] = Some(reference);
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let noise = self.draw_noise(&mut streams.row(i as u64));
                let mut baseline = vec![0.0; g.len()];
                self.propagate(&noise, &fixed, &mut baseline);
                let mut selected = vec![0.0; g.len()];
                for &v in g.topological_indices() {
                    selected[v] = if v == a {
                        primary
                    } else {
                        self.nodes[v].intercept
                            + noise[v]
                            + g.parents(v)
                                .iter()
                                .zip(&self.coef[v])
                                .zip(&mask[v])
                                .map(|((&p, c), &on)| {
                                    c * if on { selected[p] } else { baseline[p] }
                                })
                                .sum::<f64>()
                    };
                }
                selected[y]
            })
            .collect())
    }
}

pub(crate) fn parse_level(node: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| Error::Domain {
        node: node.to_string(),
        value: value.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mediated() -> LinearGaussianScm {
        let g = CausalGraph::new(["A", "Z", "Y"], [("A", "Z"), ("Z", "Y"), ("A", "Y")]).unwrap();
        LinearGaussianScm::new(
            g,
            BTreeMap::from([
                ("A".to_string(), LinearNode::bernoulli(0.5)),
                (
                    "Z".to_string(),
                    LinearNode::gaussian(0.0, &[("A", 0.5)], 1.0),
                ),
                (
                    "Y".to_string(),
                    LinearNode::gaussian(1.0, &[("A", 0.1), ("Z", 0.4)], 1.0),
                ),
            ]),
        )
        .unwrap()
    }

    #[test]
    fn single_edge_effect() {
        let g = CausalGraph::new(["A", "Y"], [("A", "Y")]).unwrap();
        let scm = LinearGaussianScm::new(
            g,
            BTreeMap::from([
                ("A".to_string(), LinearNode::gaussian(0.0, &[], 1.0)),
                (
                    "Y".to_string(),
                    LinearNode::gaussian(0.0, &[("A", 0.7)], 1.0),
                ),
            ]),
        )
        .unwrap();
        let fx = scm.linear_path_effects("A", "Y").unwrap();
        assert_eq!((fx.total, fx.direct), (0.7, 0.7));
    }

    #[test]
    fn path_tracing_arithmetic() {
        let fx = mediated().linear_path_effects("A", "Y").unwrap();
        assert!((fx.direct - 0.1).abs() < 1e-15);
        assert!((fx.indirect() - 0.2).abs() < 1e-15);
        assert!((fx.total - 0.3).abs() < 1e-15);
    }

    #[test]
    fn moments_of_chain() {
        let scm = mediated();
        let (mean, cov) = scm.moments(&Intervention::new()).unwrap();
        // canonical order: A, Y, Z
        assert!((mean[0] - 0.5).abs() < 1e-15);
        assert!((mean[2] - 0.25).abs() < 1e-15);
        assert!((cov[0][0] - 0.25).abs() < 1e-15);
        assert!((cov[2][2] - (0.25 * 0.25 + 1.0)).abs() < 1e-15);
        let (_, cov_do) = scm.moments(&Intervention::single("A", "1")).unwrap();
        assert_eq!(cov_do[0][0], 0.0);
    }

    #[test]
    fn rejects_wrong_coefficients() {
        let g = CausalGraph::new(["A", "Y"], [("A", "Y")]).unwrap();
        let err = LinearGaussianScm::new(
            g,
            BTreeMap::from([
                ("A".to_string(), LinearNode::gaussian(0.0, &[], 1.0)),
                ("Y".to_string(), LinearNode::gaussian(0.0, &[], 1.0)),
            ]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn nested_means_split_effects() {
        let scm = mediated();
        let q = CounterfactualQuery {
            treatment: "A".into(),
            primary: "1".into(),
            reference: "0".into(),
            held: vec!["Z".into()],
            outcome: "Y".into(),
            value: String::new(),
        };
        let base = scm
            .expectation(&Intervention::single("A", "0"), "Y")
            .unwrap();
        assert!((scm.counterfactual_mean(&q).unwrap() - base - 0.1).abs() < 1e-12);
    }
}
