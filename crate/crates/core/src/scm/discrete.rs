use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::{CounterfactualQuery, Intervention, JointDistribution, PathSelection, RowStreams};
use crate::dataset::{Column, Dataset};
use crate::error::{Error, Result};
use crate::graph::CausalGraph;

/// Maximum number of joint exogenous configurations (and joint table cells)
/// an exact query may enumerate.
pub const EXOGENOUS_BUDGET: u128 = 10_000_000;

const PROB_TOLERANCE: f64 = 1e-9;
const SAMPLE_STREAM: u64 = 1;

/// Finite-support exogenous variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Exogenous {
    pub name: String,
    pub support: Vec<String>,
    pub probs: Vec<f64>,
}

impl Exogenous {
    /// Uniform over `support`.
    pub fn uniform(name: impl Into<String>, support: &[&str]) -> Self {
        let p = 1.0 / support.len() as f64;
        Self {
            name: name.into(),
            support: support.iter().map(|s| s.to_string()).collect(),
            probs: vec![p; support.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    /// `table[config * support_len + u]` is the value index taken for parent
    /// configuration `config` (mixed radix over parents in canonical order,
    /// first parent most significant) and exogenous value `u`.
    Structural {
        exogenous: Exogenous,
        table: Vec<usize>,
    },
    /// `table[config]` is a distribution over the domain. Such a node supports
    /// observational and interventional queries only.
    Conditional { table: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNode {
    pub domain: Vec<String>,
    pub mechanism: Mechanism,
}

/// Finite-domain structural causal model with mutually independent
/// exogenous variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScm {
    graph: CausalGraph,
    nodes: Vec<DiscreteNode>,
    /// Conditional distribution of each node given each parent configuration.
    cond: Vec<Vec<Vec<f64>>>,
}

type StructuralFn = Box<dyn Fn(&[usize], usize) -> usize>;
type ThresholdFn = Box<dyn Fn(&[usize]) -> f64>;
type ConditionalFn = Box<dyn Fn(&[usize]) -> Vec<f64>>;

enum Pending {
    Ready(DiscreteNode),
    Structural {
        domain: Vec<String>,
        exogenous: Exogenous,
        f: StructuralFn,
    },
    Threshold {
        p: ThresholdFn,
    },
    Conditional {
        domain: Vec<String>,
        f: ConditionalFn,
    },
}

/// Builds a [`DiscreteScm`] from closures over parent value indices.
///
/// Closures receive the parent values in the graph's canonical parent order
/// (lexicographic by name).
pub struct ScmBuilder {
    graph: CausalGraph,
    pending: BTreeMap<String, Pending>,
}

impl ScmBuilder {
    pub fn new(graph: CausalGraph) -> Self {
        Self {
            graph,
            pending: BTreeMap::new(),
        }
    }

    pub fn node(mut self, name: &str, node: DiscreteNode) -> Self {
        self.pending.insert(name.to_string(), Pending::Ready(node));
        self
    }

    pub fn structural(
        mut self,
        name: &str,
        domain: &[&str],
        exogenous: Exogenous,
        f: impl Fn(&[usize], usize) -> usize + 'static,
    ) -> Self {
        self.pending.insert(
            name.to_string(),
            Pending::Structural {
                domain: to_strings(domain),
                exogenous,
                f: Box::new(f),
            },
        );
        self
    }

    /// Binary node on `{"0", "1"}` with `P(node = 1 | parents) = p(parents)`,
    /// realised as `node := 1[U <= p(parents)]` with one shared exogenous
    /// variable whose support cells are the intervals between the distinct
    /// thresholds.
    pub fn threshold(mut self, name: &str, p: impl Fn(&[usize]) -> f64 + 'static) -> Self {
        self.pending
            .insert(name.to_string(), Pending::Threshold { p: Box::new(p) });
        self
    }

    pub fn conditional(
        mut self,
        name: &str,
        domain: &[&str],
        f: impl Fn(&[usize]) -> Vec<f64> + 'static,
    ) -> Self {
        self.pending.insert(
            name.to_string(),
            Pending::Conditional {
                domain: to_strings(domain),
                f: Box::new(f),
            },
        );
        self
    }

    pub fn build(mut self) -> Result<DiscreteScm> {
        let g = &self.graph;
        let mut built: Vec<Option<DiscreteNode>> = vec![None; g.len()];
        for &v in g.topological_indices() {
            let name = g.name(v);
            let pending = self
                .pending
                .remove(name)
                .ok_or_else(|| Error::invalid_model(format!("no mechanism for node `{name}`")))?;
            let sizes: Vec<usize> = g
                .parents(v)
                .iter()
                .map(|&p| built[p].as_ref().expect("parents come first").domain.len())
                .collect();
            let configs = parent_configs(&sizes);
            let node = match pending {
                Pending::Ready(node) => node,
                Pending::Structural {
                    domain,
                    exogenous,
                    f,
                } => {
                    let k = exogenous.support.len();
                    let mut table = Vec::with_capacity(configs.len() * k);
                    for cfg in &configs {
                        for u in 0..k {
                            table.push(f(cfg, u));
                        }
                    }
                    DiscreteNode {
                        domain,
                        mechanism: Mechanism::Structural { exogenous, table },
                    }
                }
                Pending::Threshold { p } => threshold_node(name, &configs, p)?,
                Pending::Conditional { domain, f } => DiscreteNode {
                    domain,
                    mechanism: Mechanism::Conditional {
                        table: configs.iter().map(|c| f(c)).collect(),
                    },
                },
            };
            built[v] = Some(node);
        }
        if let Some(extra) = self.pending.keys().next() {
            return Err(Error::UnknownNode(extra.clone()));
        }
        DiscreteScm::new(
            self.graph,
            built.into_iter().map(|n| n.expect("all built")).collect(),
        )
    }
}

fn to_strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Every parent configuration in mixed-radix order.
fn parent_configs(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut i| {
            let mut cfg = vec![0; sizes.len()];
            for (slot, &s) in cfg.iter_mut().zip(sizes).rev() {
                *slot = i % s;
                i /= s;
            }
            cfg
        })
        .collect()
}

fn threshold_node(name: &str, configs: &[Vec<usize>], p: ThresholdFn) -> Result<DiscreteNode> {
    let ps: Vec<f64> = configs.iter().map(|c| p(c)).collect();
    if let Some(&bad) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid_model(format!(
            "probability {bad} for `{name}` is outside [0, 1]"
        )));
    }
    let mut cuts: Vec<f64> = ps
        .iter()
        .copied()
        .chain([1.0])
        .filter(|&t| t > 0.0)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut probs = Vec::with_capacity(cuts.len());
    let mut prev = 0.0;
    for &t in &cuts {
        probs.push(t - prev);
        prev = t;
    }
    let k = cuts.len();
    let mut table = Vec::with_capacity(configs.len() * k);
    for &pc in &ps {
        table.extend(cuts.iter().map(|&t| usize::from(t <= pc)));
    }
    Ok(DiscreteNode {
        domain: vec!["0".into(), "1".into()],
        mechanism: Mechanism::Structural {
            exogenous: Exogenous {
                name: format!("U_{name}"),
                support: (1..=k).map(|i| format!("u{i}")).collect(),
                probs,
            },
            table,
        },
    })
}

impl DiscreteScm {
    /// Validates a model; `nodes` is aligned with the graph's canonical order.
    pub fn new(graph: CausalGraph, nodes: Vec<DiscreteNode>) -> Result<Self> {
        if nodes.len() != graph.len() {
            return Err(Error::invalid_model(format!(
                "{} node definitions for {} graph nodes",
                nodes.len(),
                graph.len()
            )));
        }
        let mut budget: u128 = 1;
        for (v, node) in nodes.iter().enumerate() {
            let name = graph.name(v);
            if node.domain.is_empty() {
                return Err(Error::invalid_model(format!(
                    "`{name}` has an empty domain"
                )));
            }
            let mut sorted = node.domain.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != node.domain.len() {
                return Err(Error::invalid_model(format!(
                    "`{name}` has repeated domain values"
                )));
            }
            let configs: usize = graph
                .parents(v)
                .iter()
                .map(|&p| nodes[p].domain.len())
                .product();
            match &node.mechanism {
                Mechanism::Structural { exogenous, table } => {
                    let k = exogenous.support.len();
                    check_distribution(&exogenous.probs, k, &exogenous.name)?;
                    if table.len() != configs * k {
                        return Err(Error::invalid_model(format!(
                            "mechanism of `{name}` has {} entries, expected {}",
                            table.len(),
                            configs * k
                        )));
                    }
                    if let Some(&bad) = table.iter().find(|&&x| x >= node.domain.len()) {
                        return Err(Error::invalid_model(format!(
                            "mechanism of `{name}` yields value index {bad}"
                        )));
                    }
                    budget = budget.saturating_mul(k as u128);
                }
                Mechanism::Conditional { table } => {
                    if table.len() != configs {
                        return Err(Error::invalid_model(format!(
                            "table of `{name}` has {} rows",
                            table.len()
                        )));
                    }
                    for row in table {
                        check_distribution(row, node.domain.len(), name)?;
                    }
                }
            }
        }
        if budget > EXOGENOUS_BUDGET {
            return Err(Error::BudgetExceeded {
                count: budget,
                budget: EXOGENOUS_BUDGET,
            });
        }
        let cond = nodes
            .iter()
            .map(|node| match &node.mechanism {
                Mechanism::Conditional { table } => table.clone(),
                Mechanism::Structural { exogenous, table } => {
                    let k = exogenous.support.len();
                    table
                        .chunks(k)
                        .map(|row| {
                            let mut dist = vec![0.0; node.domain.len()];
                            for (u, &x) in row.iter().enumerate() {
                                dist[x] += exogenous.probs[u];
                            }
                            dist
                        })
                        .collect()
                }
            })
            .collect();
        Ok(Self { graph, nodes, cond })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn nodes(&self) -> &[DiscreteNode] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Result<&DiscreteNode> {
        Ok(&self.nodes[self.graph.index_of(name)?])
    }

    pub fn domain(&self, name: &str) -> Result<&[String]> {
        Ok(&self.node(name)?.domain)
    }

    /// Index of `value` in the domain of `node`.
    pub fn value_index(&self, node: &str, value: &str) -> Result<usize> {
        self.domain(node)?
            .iter()
            .position(|d| d == value)
            .ok_or_else(|| Error::Domain {
                node: node.to_string(),
                value: value.to_string(),
            })
    }

    /// Whether every node carries a structural function (needed for
    /// counterfactual queries).
    pub fn is_structural(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| matches!(n.mechanism, Mechanism::Structural { .. }))
    }

    /// `P(node = value | parents = config)` as induced by the mechanism.
    pub fn conditional_prob(&self, node: usize, parent_values: &[usize], value: usize) -> f64 {
        self.cond[node][self.config_of(node, parent_values)][value]
    }

    fn config_of(&self, v: usize, parent_values: &[usize]) -> usize {
        self.graph
            .parents(v)
            .iter()
            .zip(parent_values)
            .fold(0, |acc, (&p, &x)| acc * self.nodes[p].domain.len() + x)
    }

    /// Parent configuration index read from a full value vector.
    fn config_from(&self, v: usize, values: &[usize]) -> usize {
        self.graph
            .parents(v)
            .iter()
            .fold(0, |acc, &p| acc * self.nodes[p].domain.len() + values[p])
    }

    fn resolve_intervention(&self, intervention: &Intervention) -> Result<Vec<Option<usize>>> {
        let mut fixed = vec![None; self.graph.len()];
        for (node, value) in &intervention.assignments {
            let v = self.graph.index_of(node)?;
            fixed[v] = Some(self.value_index(node, value)?);
        }
        Ok(fixed)
    }

    fn require_structural(&self, what: &str) -> Result<()> {
        if let Some(v) = self
            .nodes
            .iter()
            .position(|n| matches!(n.mechanism, Mechanism::Conditional { .. }))
        {
            return Err(Error::UnsupportedModel(format!(
                "{what} needs structural functions, but `{}` is given only as a conditional table",
                self.graph.name(v)
            )));
        }
        Ok(())
    }

    fn support_len(&self, v: usize) -> usize {
        match &self.nodes[v].mechanism {
            Mechanism::Structural { exogenous, .. } => exogenous.support.len(),
            Mechanism::Conditional { .. } => 1,
        }
    }

    /// Number of joint exogenous configurations.
    pub fn exogenous_configurations(&self) -> u128 {
        (0..self.graph.len())
            .map(|v| self.support_len(v) as u128)
            .product()
    }

    /// Visits every joint exogenous configuration with its probability.
    /// Configurations are visited in mixed-radix order over the nodes'
    /// topological order; zero-probability configurations are skipped.
    pub(crate) fn for_each_exogenous(&self, mut visit: impl FnMut(&[usize], f64)) {
        let topo = self.graph.topological_indices();
        let n = topo.len();
        let probs: Vec<&[f64]> = (0..n)
            .map(|v| match &self.nodes[v].mechanism {
                Mechanism::Structural { exogenous, .. } => exogenous.probs.as_slice(),
                Mechanism::Conditional { .. } => &[1.0],
            })
            .collect();
        let mut u = vec![0usize; n];
        loop {
            let w: f64 = topo.iter().map(|&v| probs[v][u[v]]).product();
            if w > 0.0 {
                visit(&u, w);
            }
            // Advance the odometer, last topological node fastest.
            let mut pos = n;
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                let v = topo[pos];
                u[v] += 1;
                if u[v] < probs[v].len() {
                    break;
                }
                u[v] = 0;
            }
        }
    }

    /// Propagates mechanisms for one exogenous configuration. `fixed` holds
    /// intervened values.
    pub(crate) fn evaluate(&self, u: &[usize], fixed: &[Option<usize>], out: &mut [usize]) {
        for &v in self.graph.topological_indices() {
            out[v] = match fixed[v] {
                Some(x) => x,
                None => self.mechanism_value(v, self.config_from(v, out), u[v]),
            };
        }
    }

    fn mechanism_value(&self, v: usize, config: usize, u: usize) -> usize {
        match &self.nodes[v].mechanism {
            Mechanism::Structural { exogenous, table } => {
                table[config * exogenous.support.len() + u]
            }
            Mechanism::Conditional { .. } => unreachable!("checked by require_structural"),
        }
    }

    fn check_joint_budget(&self) -> Result<()> {
        let cells: u128 = self.nodes.iter().map(|n| n.domain.len() as u128).product();
        if cells > EXOGENOUS_BUDGET {
            return Err(Error::BudgetExceeded {
                count: cells,
                budget: EXOGENOUS_BUDGET,
            });
        }
        Ok(())
    }

    fn empty_joint(&self) -> JointDistribution {
        JointDistribution::zeros(
            self.graph.names().to_vec(),
            self.nodes.iter().map(|n| n.domain.clone()).collect(),
        )
    }

    pub fn joint_distribution(&self) -> Result<JointDistribution> {
        self.interventional_distribution(&Intervention::new())
    }

    /// Joint distribution of all endogenous variables under `do(...)`.
    pub fn interventional_distribution(
        &self,
        intervention: &Intervention,
    ) -> Result<JointDistribution> {
        self.check_joint_budget()?;
        let fixed = self.resolve_intervention(intervention)?;
        let mut joint = self.empty_joint();
        if self.is_structural() {
            let mut out = vec![0; self.graph.len()];
            self.for_each_exogenous(|u, w| {
                self.evaluate(u, &fixed, &mut out);
                joint.add(&out, w);
            });
        } else {
            self.for_each_assignment(&fixed, |vals, p| joint.add(vals, p));
        }
        Ok(joint)
    }

    /// Depth-first product of conditionals over endogenous assignments.
    fn for_each_assignment(&self, fixed: &[Option<usize>], mut visit: impl FnMut(&[usize], f64)) {
        fn recurse(
            scm: &DiscreteScm,
            fixed: &[Option<usize>],
            depth: usize,
            vals: &mut Vec<usize>,
            weight: f64,
            visit: &mut dyn FnMut(&[usize], f64),
        ) {
            let topo = scm.graph.topological_indices();
            if depth == topo.len() {
                visit(vals, weight);
                return;
            }
            let v = topo[depth];
            if let Some(x) = fixed[v] {
                vals[v] = x;
                recurse(scm, fixed, depth + 1, vals, weight, visit);
                return;
            }
            let dist = &scm.cond[v][scm.config_from(v, vals)];
            for (x, &p) in dist.iter().enumerate() {
                if p > 0.0 {
                    vals[v] = x;
                    recurse(scm, fixed, depth + 1, vals, weight * p, visit);
                }
            }
        }
        let mut vals = vec![0; self.graph.len()];
        recurse(self, fixed, 0, &mut vals, 1.0, &mut visit);
    }

    /// `P(event | do(...))`.
    pub fn interventional_prob(
        &self,
        intervention: &Intervention,
        event: (&str, &str),
    ) -> Result<f64> {
        if intervention.assignments.contains_key(event.0) {
            return Err(Error::InvalidQuery(format!(
                "event node `{}` is intervened on",
                event.0
            )));
        }
        let fixed = self.resolve_intervention(intervention)?;
        let y = self.graph.index_of(event.0)?;
        let yv = self.value_index(event.0, event.1)?;
        let mut total = 0.0;
        if self.is_structural() {
            let mut out = vec![0; self.graph.len()];
            self.for_each_exogenous(|u, w| {
                self.evaluate(u, &fixed, &mut out);
                if out[y] == yv {
                    total += w;
                }
            });
        } else {
            self.check_joint_budget()?;
            self.for_each_assignment(&fixed, |vals, p| {
                if vals[y] == yv {
                    total += p;
                }
            });
        }
        Ok(total)
    }

    /// Nested counterfactual probability: for every exogenous configuration
    /// the reference world (treatment at `reference`) supplies the natural
    /// values of the held nodes, and the outcome world sets the treatment to
    /// `primary` with the held nodes pinned to those values.
    pub fn counterfactual_prob(&self, q: &CounterfactualQuery) -> Result<f64> {
        self.require_structural("a nested counterfactual")?;
        let g = &self.graph;
        let a = g.index_of(&q.treatment)?;
        let y = g.index_of(&q.outcome)?;
        let (a1, a0) = (
            self.value_index(&q.treatment, &q.primary)?,
            self.value_index(&q.treatment, &q.reference)?,
        );
        let yv = self.value_index(&q.outcome, &q.value)?;
        let held = q
            .held
            .iter()
            .map(|z| g.index_of(z))
            .collect::<Result<Vec<_>>>()?;
        if let Some(&bad) = held.iter().find(|&&z| z == a || z == y) {
            return Err(Error::InvalidQuery(format!(
                "`{}` cannot be held at its natural value",
                g.name(bad)
            )));
        }

        let n = g.len();
        let mut reference_fixed = vec![None; n];
        reference_fixed[a] = Some(a0);
        let mut reference = vec![0; n];
        let mut outcome_fixed = vec![None; n];
        let mut outcome = vec![0; n];
        let mut total = 0.0;
        self.for_each_exogenous(|u, w| {
            self.evaluate(u, &reference_fixed, &mut reference);
            outcome_fixed[a] = Some(a1);
            for &z in &held {
                outcome_fixed[z] = Some(reference[z]);
            }
            self.evaluate(u, &outcome_fixed, &mut outcome);
            if outcome[y] == yv {
                total += w;
            }
        });
        Ok(total)
    }

    /// Probability of `outcome = value` when the treatment's comparison
    /// value `primary` travels only along the selected edges and the
    /// baseline `reference` along all others.
    pub fn path_specific_prob(
        &self,
        selection: &PathSelection,
        treatment: &str,
        primary: &str,
        reference: &str,
        event: (&str, &str),
    ) -> Result<f64> {
        self.require_structural("a path-specific query")?;
        let g = &self.graph;
        let (a, y) = (g.index_of(treatment)?, g.index_of(event.0)?);
        if a == y {
            return Err(Error::InvalidQuery("treatment and outcome coincide".into()));
        }
        let mask = selection.mask(g, a, y)?;
        let (a1, a0) = (
            self.value_index(treatment, primary)?,
            self.value_index(treatment, reference)?,
        );
        let yv = self.value_index(event.0, event.1)?;

        let n = g.len();
        let mut baseline_fixed = vec![None; n];
        baseline_fixed[a] = Some(a0);
        let mut baseline = vec![0; n];
        let mut selected = vec![0; n];
        let mut total = 0.0;
        self.for_each_exogenous(|u, w| {
            self.evaluate(u, &baseline_fixed, &mut baseline);
            for &v in g.topological_indices() {
                selected[v] = if v == a {
                    a1
                } else {
                    let config = g.parents(v).iter().zip(&mask[v]).fold(0, |acc, (&p, &on)| {
                        let x = if on { selected[p] } else { baseline[p] };
                        acc * self.nodes[p].domain.len() + x
                    });
                    self.mechanism_value(v, config, u[v])
                };
            }
            if selected[y] == yv {
                total += w;
            }
        });
        Ok(total)
    }

    /// Abduction, action, prediction for one fully observed unit: the
    /// exogenous distribution is conditioned on the observed row, the
    /// intervention applied and the outcome's posterior returned as
    /// `(value, probability)` pairs over its domain.
    pub fn unit_counterfactual(
        &self,
        observation: &BTreeMap<String, String>,
        intervention: &Intervention,
        outcome: &str,
    ) -> Result<Vec<(String, f64)>> {
        self.require_structural("a unit-level counterfactual")?;
        let g = &self.graph;
        let mut observed = vec![0; g.len()];
        for (v, slot) in observed.iter_mut().enumerate() {
            let name = g.name(v);
            let value = observation
                .get(name)
                .ok_or_else(|| Error::InvalidQuery(format!("observation lacks `{name}`")))?;
            *slot = self.value_index(name, value)?;
        }
        let fixed = self.resolve_intervention(intervention)?;
        let y = g.index_of(outcome)?;
        let none = vec![None; g.len()];
        let mut factual = vec![0; g.len()];
        let mut world = vec![0; g.len()];
        let mut posterior = vec![0.0; self.nodes[y].domain.len()];
        let mut evidence = 0.0;
        self.for_each_exogenous(|u, w| {
            self.evaluate(u, &none, &mut factual);
            if factual == observed {
                evidence += w;
                self.evaluate(u, &fixed, &mut world);
                posterior[world[y]] += w;
            }
        });
        if evidence == 0.0 {
            return Err(Error::ImpossibleObservation);
        }
        Ok(self.nodes[y]
            .domain
            .iter()
            .cloned()
            .zip(posterior.into_iter().map(|p| p / evidence))
            .collect())
    }

    /// `n` i.i.d. observational rows.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        self.sample_with(&Intervention::new(), n, seed)
            .expect("empty intervention is valid")
    }

    /// `n` i.i.d. rows from the model under `do(...)`. Row `i` depends only on
    /// `(seed, i)`.
    pub fn sample_with(&self, intervention: &Intervention, n: usize, seed: u64) -> Result<Dataset> {
        let fixed = self.resolve_intervention(intervention)?;
        let streams = RowStreams::new(seed, SAMPLE_STREAM);
        let rows: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = streams.row(i as u64);
                let mut vals = vec![0; self.graph.len()];
                for &v in self.graph.topological_indices() {
                    let config = self.config_from(v, &vals);
                    // Always consume the draw so intervened rows stay aligned.
                    let r: f64 = rng.gen();
                    vals[v] = match (fixed[v], &self.nodes[v].mechanism) {
                        (Some(x), _) => x,
                        (None, Mechanism::Structural { exogenous, .. }) => {
                            self.mechanism_value(v, config, inverse_cdf(&exogenous.probs, r))
                        }
                        (None, Mechanism::Conditional { table }) => inverse_cdf(&table[config], r),
                    };
                }
                vals
            })
            .collect();
        let columns = (0..self.graph.len())
            .map(|v| {
                Column::categorical(
                    self.graph.name(v),
                    self.nodes[v].domain.clone(),
                    rows.iter().map(|r| r[v] as u32).collect(),
                )
            })
            .collect();
        Dataset::new(columns)
    }
}

fn check_distribution(probs: &[f64], expected_len: usize, what: &str) -> Result<()> {
    if probs.len() != expected_len || expected_len == 0 {
        return Err(Error::invalid_model(format!(
            "`{what}` has {} probabilities for {expected_len} outcomes",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid_model(format!(
            "`{what}` has a negative or non-finite probability"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::invalid_model(format!(
            "probabilities of `{what}` sum to {sum}"
        )));
    }
    Ok(())
}

fn inverse_cdf(probs: &[f64], r: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    // Rounding can leave the cumulative sum just below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> DiscreteScm {
        let g = CausalGraph::new(["Y"], Vec::<(String, String)>::new()).unwrap();
        ScmBuilder::new(g)
            .structural(
                "Y",
                &["0", "1"],
                Exogenous::uniform("U_Y", &["0", "1"]),
                |_, u| u,
            )
            .build()
            .unwrap()
    }

    fn copy_chain() -> DiscreteScm {
        let g = CausalGraph::new(["A", "Y"], [("A", "Y")]).unwrap();
        ScmBuilder::new(g)
            .structural(
                "A",
                &["0", "1"],
                Exogenous::uniform("U_A", &["0", "1"]),
                |_, u| u,
            )
            .structural(
                "Y",
                &["0", "1"],
                Exogenous::uniform("U_Y", &["z"]),
                |pa, _| pa[0],
            )
            .build()
            .unwrap()
    }

    #[test]
    fn coin_joint() {
        let joint = coin().joint_distribution().unwrap();
        assert_eq!(joint.probs(), [0.5, 0.5]);
    }

    #[test]
    fn copy_chain_joint() {
        let joint = copy_chain().joint_distribution().unwrap();
        assert_eq!(joint.probability(&[("A", "1"), ("Y", "1")]).unwrap(), 0.5);
        assert_eq!(joint.probability(&[("A", "1"), ("Y", "0")]).unwrap(), 0.0);
    }

    #[test]
    fn do_equals_conditioning_without_confounding() {
        let g = CausalGraph::new(["A", "Y"], [("A", "Y")]).unwrap();
        let scm = ScmBuilder::new(g)
            .threshold("A", |_| 0.3)
            .threshold("Y", |pa| if pa[0] == 1 { 0.8 } else { 0.4 })
            .build()
            .unwrap();
        let p = scm
            .interventional_prob(&Intervention::single("A", "1"), ("Y", "1"))
            .unwrap();
        assert!((p - 0.8).abs() < 1e-15);
    }

    #[test]
    fn intervention_does_not_reach_non_descendants() {
        let g = CausalGraph::new(["A", "B", "S"], [("A", "S"), ("B", "S")]).unwrap();
        let scm = ScmBuilder::new(g)
            .threshold("A", |_| 0.3)
            .threshold("B", |_| 0.6)
            .threshold("S", |pa| 0.1 + 0.4 * pa[0] as f64 + 0.4 * pa[1] as f64)
            .build()
            .unwrap();
        for a in ["0", "1"] {
            let p = scm
                .interventional_prob(&Intervention::single("A", a), ("B", "1"))
                .unwrap();
            assert!((p - 0.6).abs() < 1e-15);
        }
    }

    #[test]
    fn event_on_intervened_node_is_rejected() {
        let scm = copy_chain();
        assert!(matches!(
            scm.interventional_prob(&Intervention::single("A", "1"), ("A", "1")),
            Err(Error::InvalidQuery(_))
        ));
        assert!(matches!(
            scm.interventional_prob(&Intervention::single("A", "7"), ("Y", "1")),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn unit_counterfactual_on_copy_chain() {
        let scm = copy_chain();
        let row = BTreeMap::from([
            ("A".to_string(), "0".to_string()),
            ("Y".to_string(), "0".to_string()),
        ]);
        let post = scm
            .unit_counterfactual(&row, &Intervention::single("A", "1"), "Y")
            .unwrap();
        assert_eq!(post, [("0".to_string(), 0.0), ("1".to_string(), 1.0)]);
        let same = scm
            .unit_counterfactual(&row, &Intervention::single("A", "0"), "Y")
            .unwrap();
        assert_eq!(same[0].1, 1.0);

        let impossible = BTreeMap::from([
            ("A".to_string(), "0".to_string()),
            ("Y".to_string(), "1".to_string()),
        ]);
        assert_eq!(
            scm.unit_counterfactual(&impossible, &Intervention::new(), "Y")
                .unwrap_err(),
            Error::ImpossibleObservation
        );
    }

    #[test]
    fn conditional_tables_block_counterfactuals() {
        let g = CausalGraph::new(["A", "Y"], [("A", "Y")]).unwrap();
        let scm = ScmBuilder::new(g)
            .conditional("A", &["0", "1"], |_| vec![0.5, 0.5])
            .conditional("Y", &["0", "1"], |pa| {
                if pa[0] == 1 {
                    vec![0.2, 0.8]
                } else {
                    vec![0.6, 0.4]
                }
            })
            .build()
            .unwrap();
        let p = scm
            .interventional_prob(&Intervention::single("A", "1"), ("Y", "1"))
            .unwrap();
        assert!((p - 0.8).abs() < 1e-15);
        let q = CounterfactualQuery {
            treatment: "A".into(),
            primary: "1".into(),
            reference: "0".into(),
            held: vec![],
            outcome: "Y".into(),
            value: "1".into(),
        };
        assert!(matches!(
            scm.counterfactual_prob(&q),
            Err(Error::UnsupportedModel(_))
        ));
        let joint = scm.joint_distribution().unwrap();
        assert!((joint.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let g = CausalGraph::new(["Y"], Vec::<(String, String)>::new()).unwrap();
        let bad = DiscreteNode {
            domain: vec!["0".into(), "1".into()],
            mechanism: Mechanism::Structural {
                exogenous: Exogenous {
                    name: "U_Y".into(),
                    support: vec!["a".into(), "b".into()],
                    probs: vec![0.5, 0.6],
                },
                table: vec![0, 1],
            },
        };
        assert!(matches!(
            DiscreteScm::new(g.clone(), vec![bad]),
            Err(Error::InvalidModel(_))
        ));

        let short = DiscreteNode {
            domain: vec!["0".into(), "1".into()],
            mechanism: Mechanism::Structural {
                exogenous: Exogenous::uniform("U_Y", &["a", "b"]),
                table: vec![0],
            },
        };
        assert!(matches!(
            DiscreteScm::new(g, vec![short]),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let names: Vec<String> = (0..8).map(|i| format!("V{i}")).collect();
        let g = CausalGraph::new(names.clone(), Vec::<(String, String)>::new()).unwrap();
        let support: Vec<String> = (0..8).map(|i| i.to_string()).collect();
        let support: Vec<&str> = support.iter().map(String::as_str).collect();
        let mut b = ScmBuilder::new(g);
        for name in &names {
            b = b.structural(
                name,
                &["0"],
                Exogenous::uniform(format!("U_{name}"), &support),
                |_, _| 0,
            );
        }
        assert!(matches!(b.build(), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn sampling_is_reproducible() {
        let scm = coin();
        let a = scm.sample(1000, 7);
        let b = scm.sample(1000, 7);
        assert_eq!(a, b);
        assert_ne!(a, scm.sample(1000, 8));
        let one = scm.sample(1, 3);
        assert_eq!(one.n_rows(), 1);
    }

    #[test]
    fn fair_coin_frequency() {
        let ds = coin().sample(100_000, 7);
        let (codes, _) = ds.categorical("Y").unwrap();
        let freq = codes.iter().filter(|&&c| c == 1).count() as f64 / 1e5;
        assert!((0.49..=0.51).contains(&freq), "{freq}");
    }

    #[test]
    fn threshold_node_reproduces_probabilities() {
        let g = CausalGraph::new(["A", "Y"], [("A", "Y")]).unwrap();
        let scm = ScmBuilder::new(g)
            .threshold("A", |_| 0.25)
            .threshold("Y", |pa| [0.0, 0.7][pa[0]])
            .build()
            .unwrap();
        assert!((scm.conditional_prob(1, &[1], 1) - 0.7).abs() < 1e-15);
        assert_eq!(scm.conditional_prob(1, &[0], 1), 0.0);
        assert!((scm.conditional_prob(0, &[], 1) - 0.25).abs() < 1e-15);
    }
}
