//! Plug-in estimation from categorical data: identification plans, count
//! tables and the adjustment / mediation / edge g-formulas evaluated on them.

use std::collections::BTreeSet;

use super::{EffectQuery, MediationSpec, PluginOptions};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::scm::{PathSelection, EXOGENOUS_BUDGET};

/// Dense contingency table over a fixed list of categorical columns.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CountTable {
    pub columns: Vec<String>,
    pub domains: Vec<Vec<String>>,
    pub counts: Vec<f64>,
}

impl CountTable {
    pub fn from_dataset(data: &Dataset, columns: &[String]) -> Result<Self> {
        let mut codes = Vec::with_capacity(columns.len());
        let mut domains = Vec::with_capacity(columns.len());
        for c in columns {
            let (col, dom) = data.categorical(c)?;
            codes.push(col);
            domains.push(dom.to_vec());
        }
        let cells: u128 = domains.iter().map(|d| d.len() as u128).product();
        if cells > EXOGENOUS_BUDGET {
            return Err(Error::BudgetExceeded {
                count: cells,
                budget: EXOGENOUS_BUDGET,
            });
        }
        let mut counts = vec![0.0; cells as usize];
        for row in 0..data.n_rows() {
            let idx = codes
                .iter()
                .zip(&domains)
                .fold(0, |acc, (col, d)| acc * d.len() + col[row] as usize);
            counts[idx] += 1.0;
        }
        Ok(Self {
            columns: columns.to_vec(),
            domains,
            counts,
        })
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn position(&self, column: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c == column)
            .expect("planned column present")
    }

    pub fn value(&self, column: &str, value: &str) -> Result<usize> {
        let j = self.position(column);
        self.domains[j]
            .iter()
            .position(|d| d == value)
            .ok_or_else(|| Error::Domain {
                node: column.to_string(),
                value: value.to_string(),
            })
    }

    /// Counts marginalised onto the listed column positions.
    pub fn marginal(&self, keep: &[usize]) -> Marginal {
        let sizes: Vec<usize> = keep.iter().map(|&j| self.domains[j].len()).collect();
        let mut counts = vec![0.0; sizes.iter().product()];
        let mut vals = vec![0usize; self.domains.len()];
        for (cell, &c) in self.counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut rest = cell;
            for (slot, d) in vals.iter_mut().zip(&self.domains).rev() {
                *slot = rest % d.len();
                rest /= d.len();
            }
            let idx = keep
                .iter()
                .zip(&sizes)
                .fold(0, |acc, (&j, &s)| acc * s + vals[j]);
            counts[idx] += c;
        }
        Marginal { sizes, counts }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Marginal {
    sizes: Vec<usize>,
    counts: Vec<f64>,
}

impl Marginal {
    pub fn get(&self, values: &[usize]) -> f64 {
        self.counts[values
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&v, &s)| acc * s + v)]
    }

    /// Sum over the last axis, i.e. counts of the leading columns.
    pub fn leading(&self, values: &[usize]) -> f64 {
        let last = *self.sizes.last().expect("non-empty marginal");
        (0..last)
            .map(|x| {
                let mut full = values.to_vec();
                full.push(x);
                self.get(&full)
            })
            .sum()
    }
}

/// `P(last = value | leading)` from a marginal whose last axis is the
/// target variable, with optional add-alpha smoothing. `None` when the
/// conditioning cell is empty and no smoothing is in effect.
fn conditional(
    m: &Marginal,
    leading: &[usize],
    value: usize,
    smoothing: Option<f64>,
) -> Option<f64> {
    let k = *m.sizes.last().expect("non-empty marginal") as f64;
    let denom = m.leading(leading);
    let mut full = leading.to_vec();
    full.push(value);
    let num = m.get(&full);
    match smoothing {
        Some(alpha) => Some((num + alpha) / (denom + alpha * k)),
        None if denom > 0.0 => Some(num / denom),
        None => None,
    }
}

/// Every assignment of variables with the given domain sizes, mixed radix.
fn assignments(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = sizes.iter().product();
    (0..total).map(move |mut i| {
        let mut v = vec![0; sizes.len()];
        for (slot, &s) in v.iter_mut().zip(sizes).rev() {
            *slot = i % s;
            i /= s;
        }
        v
    })
}

fn describe(names: &[String], values: &[usize], table: &CountTable) -> String {
    names
        .iter()
        .zip(values)
        .map(|(n, &v)| format!("{n}={}", table.domains[table.position(n)][v]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Identification result for one plug-in metric.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Plan {
    Tv,
    /// Backdoor adjustment over `adjust`.
    Adjustment {
        adjust: Vec<String>,
    },
    /// Mediation formula with mediators `mediators` and covariates `adjust`;
    /// `indirect` selects the NIE form.
    Mediation {
        mediators: Vec<String>,
        adjust: Vec<String>,
        indirect: bool,
    },
    /// Edge g-formula. `nodes` are the non-treatment variables summed over
    /// in topological order with, per node, its parents and whether the
    /// treatment enters it at the comparison value.
    EdgeFormula {
        nodes: Vec<EdgeFactor>,
        selection: PathSelection,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EdgeFactor {
    pub node: String,
    pub parents: Vec<String>,
    /// For each parent: true when it is the treatment carrying the comparison value.
    pub treatment_on: Vec<bool>,
    pub treatment_parent: Vec<bool>,
}

fn require_observed(graph: &CausalGraph, names: &[String], role: &str) -> Result<()> {
    let hidden: Vec<&str> = names
        .iter()
        .filter(|n| {
            graph
                .index_of(n)
                .map(|i| !graph.is_observed(i))
                .unwrap_or(false)
        })
        .map(String::as_str)
        .collect();
    if hidden.is_empty() {
        Ok(())
    } else {
        Err(Error::NotIdentifiable(format!(
            "{role} [{}] not observed",
            hidden.join(", ")
        )))
    }
}

impl Plan {
    pub fn total_variation() -> Self {
        Plan::Tv
    }

    pub fn total_effect(graph: &CausalGraph, q: &EffectQuery) -> Result<Self> {
        require_observed(
            graph,
            &[q.sensitive.clone(), q.outcome.clone()],
            "treatment/outcome",
        )?;
        match graph.minimal_adjustment_set(&q.sensitive, &q.outcome)? {
            Some(set) => Ok(Plan::Adjustment { adjust: set.nodes }),
            None => {
                let hidden: BTreeSet<String> = graph
                    .backdoor_paths(&q.sensitive, &q.outcome)?
                    .iter()
                    .flat_map(|p| p.nodes.iter().cloned())
                    .filter(|n| {
                        graph
                            .index_of(n)
                            .map(|i| !graph.is_observed(i))
                            .unwrap_or(false)
                    })
                    .collect();
                Err(Error::NotIdentifiable(format!(
                    "no observed set blocks the backdoor paths from {} to {} (unobserved: [{}])",
                    q.sensitive,
                    q.outcome,
                    hidden.into_iter().collect::<Vec<_>>().join(", ")
                )))
            }
        }
    }

    pub fn mediation(
        graph: &CausalGraph,
        q: &EffectQuery,
        m: &MediationSpec,
        indirect: bool,
    ) -> Result<Self> {
        let a = graph.index_of(&q.sensitive)?;
        let y = graph.index_of(&q.outcome)?;
        let mut core: BTreeSet<usize> = m
            .mediators
            .iter()
            .map(|z| graph.index_of(z))
            .collect::<Result<_>>()?;
        core.insert(a);
        core.insert(y);
        let desc = graph.descendants(a);
        let mut adjust = BTreeSet::new();
        for &v in &core {
            for &p in graph.parents(v) {
                if !core.contains(&p) {
                    adjust.insert(p);
                }
            }
        }
        if let Some(&bad) = adjust.iter().find(|&&w| desc[w]) {
            return Err(Error::NotIdentifiable(format!(
                "`{}` is affected by {} and confounds the mediators or outcome; include it as a mediator",
                graph.name(bad),
                q.sensitive
            )));
        }
        let adjust: Vec<String> = adjust
            .into_iter()
            .map(|i| graph.name(i).to_string())
            .collect();
        let mut involved: Vec<String> = m.mediators.clone();
        involved.extend([q.sensitive.clone(), q.outcome.clone()]);
        require_observed(graph, &involved, "mediation variables")?;
        require_observed(graph, &adjust, "covariates")?;
        Ok(Plan::Mediation {
            mediators: m.mediators.clone(),
            adjust,
            indirect,
        })
    }

    /// Edge g-formula for `P(y_{a1 | selection, a0 | rest})`. Fails on a
    /// recanting witness (a descendant of the treatment needed both in the
    /// selected and in the baseline world) and on unobserved variables.
    pub fn edge_formula(
        graph: &CausalGraph,
        q: &EffectQuery,
        selection: &PathSelection,
    ) -> Result<Self> {
        let a = graph.index_of(&q.sensitive)?;
        let y = graph.index_of(&q.outcome)?;
        let mask = selection.mask(graph, a, y)?;
        let desc = graph.descendants(a);
        // need[v] = (needed in selected world, needed in baseline world)
        let mut need = vec![(false, false); graph.len()];
        need[y].0 = true;
        for &v in graph.topological_indices().iter().rev() {
            if v == a {
                continue;
            }
            let (sel, base) = need[v];
            for (k, &p) in graph.parents(v).iter().enumerate() {
                if sel {
                    if mask[v][k] {
                        need[p].0 = true;
                    } else {
                        need[p].1 = true;
                    }
                }
                if base {
                    need[p].1 = true;
                }
            }
        }
        let witnesses: Vec<&str> = (0..graph.len())
            .filter(|&v| v != a && desc[v] && need[v].0 && need[v].1)
            .map(|v| graph.name(v))
            .collect();
        if !witnesses.is_empty() {
            return Err(Error::NotIdentifiable(format!(
                "recanting witness [{}]: it transmits both selected and unselected path segments",
                witnesses.join(", ")
            )));
        }
        let mut nodes = Vec::new();
        for &v in graph.topological_indices() {
            if v == a || !(need[v].0 || need[v].1) {
                continue;
            }
            let parents: Vec<usize> = graph.parents(v).to_vec();
            // Only a node living in the selected world can receive the
            // comparison value, and only through a selected edge.
            let in_selected = need[v].0 && desc[v];
            nodes.push(EdgeFactor {
                node: graph.name(v).to_string(),
                parents: parents.iter().map(|&p| graph.name(p).to_string()).collect(),
                treatment_on: parents
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| p == a && in_selected && mask[v][k])
                    .collect(),
                treatment_parent: parents.iter().map(|&p| p == a).collect(),
            });
        }
        let mut involved: Vec<String> = nodes.iter().map(|f| f.node.clone()).collect();
        involved.push(q.sensitive.clone());
        require_observed(
            graph,
            &involved,
            "variables on the selected paths or their causes",
        )?;
        Ok(Plan::EdgeFormula {
            nodes,
            selection: selection.clone(),
        })
    }

    /// Columns the evaluation reads.
    pub fn columns(&self, q: &EffectQuery) -> Vec<String> {
        let mut cols: BTreeSet<String> = [q.sensitive.clone(), q.outcome.clone()].into();
        match self {
            Plan::Tv => {}
            Plan::Adjustment { adjust } => cols.extend(adjust.iter().cloned()),
            Plan::Mediation {
                mediators, adjust, ..
            } => {
                cols.extend(mediators.iter().cloned());
                cols.extend(adjust.iter().cloned());
            }
            Plan::EdgeFormula { nodes, .. } => {
                for f in nodes {
                    cols.insert(f.node.clone());
                    cols.extend(f.parents.iter().cloned());
                }
            }
        }
        cols.into_iter().collect()
    }

    pub fn assumptions(&self) -> Vec<String> {
        match self {
            Plan::Tv => vec!["associational contrast; includes non-causal paths".into()],
            Plan::Adjustment { adjust } => vec![
                format!("backdoor adjustment on {{{}}}", adjust.join(", ")),
                "ignorability given the adjustment set".into(),
                "positivity".into(),
            ],
            Plan::Mediation { adjust, .. } => vec![
                format!(
                    "mediation formula with covariates {{{}}}",
                    adjust.join(", ")
                ),
                "Markovian model over observed variables (sequential ignorability)".into(),
                "positivity".into(),
            ],
            Plan::EdgeFormula { .. } => vec![
                "edge g-formula (no recanting witness)".into(),
                "Markovian model over observed variables".into(),
                "positivity".into(),
            ],
        }
    }

    pub fn evaluate(
        &self,
        table: &CountTable,
        q: &EffectQuery,
        opts: &PluginOptions,
    ) -> Result<f64> {
        let a1 = table.value(&q.sensitive, &q.comparison)?;
        let a0 = table.value(&q.sensitive, &q.baseline)?;
        let yv = table.value(&q.outcome, &q.positive)?;
        let alpha = opts.smoothing;
        match self {
            Plan::Tv => {
                let m = table.marginal(&[table.position(&q.sensitive), table.position(&q.outcome)]);
                let p = |a: usize, label: &str| {
                    conditional(&m, &[a], yv, None)
                        .ok_or_else(|| Error::EmptyStratum(format!("{}={label}", q.sensitive)))
                };
                Ok(p(a1, &q.comparison)? - p(a0, &q.baseline)?)
            }
            Plan::Adjustment { adjust } => {
                let arm1 = adjusted_mean(table, adjust, q, a1, yv, alpha)?;
                let arm0 = adjusted_mean(table, adjust, q, a0, yv, alpha)?;
                Ok(arm1 - arm0)
            }
            Plan::Mediation {
                mediators,
                adjust,
                indirect,
            } => mediation_formula(table, mediators, adjust, q, (a1, a0), yv, *indirect, alpha),
            Plan::EdgeFormula { nodes, .. } => {
                let selected = edge_g_formula(table, nodes, q, a1, a0, yv, alpha)?;
                // Baseline P(y_{a0}): the same formula with the comparison value nowhere.
                let baseline = edge_g_formula(table, nodes, q, a0, a0, yv, alpha)?;
                Ok(selected - baseline)
            }
        }
    }
}

/// `sum_w P(y | a, w) P(w)`.
fn adjusted_mean(
    table: &CountTable,
    adjust: &[String],
    q: &EffectQuery,
    a: usize,
    yv: usize,
    alpha: Option<f64>,
) -> Result<f64> {
    let mut cols: Vec<usize> = adjust.iter().map(|w| table.position(w)).collect();
    let wm = table.marginal(&cols);
    cols.push(table.position(&q.sensitive));
    cols.push(table.position(&q.outcome));
    let full = table.marginal(&cols);
    let n = table.total();
    let sizes: Vec<usize> = adjust
        .iter()
        .map(|w| table.domains[table.position(w)].len())
        .collect();
    let mut sum = 0.0;
    for w in assignments(&sizes) {
        let nw = if w.is_empty() { n } else { wm.get(&w) };
        if nw == 0.0 {
            continue;
        }
        let mut lead = w.clone();
        lead.push(a);
        let p = conditional(&full, &lead, yv, alpha).ok_or_else(|| {
            Error::Positivity(format!(
                "no rows with {}={} in stratum [{}]",
                q.sensitive,
                table.domains[table.position(&q.sensitive)][a],
                describe(adjust, &w, table)
            ))
        })?;
        sum += p * (nw / n);
    }
    Ok(sum)
}

#[allow(clippy::too_many_arguments)]
fn mediation_formula(
    table: &CountTable,
    mediators: &[String],
    adjust: &[String],
    q: &EffectQuery,
    (a1, a0): (usize, usize),
    yv: usize,
    indirect: bool,
    alpha: Option<f64>,
) -> Result<f64> {
    let w_cols: Vec<usize> = adjust.iter().map(|w| table.position(w)).collect();
    let z_cols: Vec<usize> = mediators.iter().map(|z| table.position(z)).collect();
    let a_col = table.position(&q.sensitive);
    let y_col = table.position(&q.outcome);
    let wm = table.marginal(&w_cols);
    // (w, a, z) for the mediator distribution, (w, a, z, y) for the outcome.
    let mut waz: Vec<usize> = w_cols.clone();
    waz.push(a_col);
    waz.extend(&z_cols);
    let zm = table.marginal(&waz);
    waz.push(y_col);
    let ym = table.marginal(&waz);

    let w_sizes: Vec<usize> = w_cols.iter().map(|&j| table.domains[j].len()).collect();
    let z_sizes: Vec<usize> = z_cols.iter().map(|&j| table.domains[j].len()).collect();
    let n = table.total();
    let k_z: f64 = z_sizes.iter().product::<usize>() as f64;

    let p_z = |w: &[usize], a: usize, z: &[usize]| -> Option<f64> {
        let mut lead = w.to_vec();
        lead.push(a);
        let mut cell = lead.clone();
        cell.extend_from_slice(z);
        let denom: f64 = assignments(&z_sizes)
            .map(|zz| {
                let mut c = lead.clone();
                c.extend(zz);
                zm.get(&c)
            })
            .sum();
        match alpha {
            Some(al) => Some((zm.get(&cell) + al) / (denom + al * k_z)),
            None if denom > 0.0 => Some(zm.get(&cell) / denom),
            None => None,
        }
    };
    let positivity = |w: &[usize], a: usize, z: &[usize]| {
        let mut names: Vec<String> = adjust.to_vec();
        names.extend(mediators.iter().cloned());
        let mut vals = w.to_vec();
        vals.extend_from_slice(z);
        Error::Positivity(format!(
            "no rows with {}={} in stratum [{}]",
            q.sensitive,
            table.domains[a_col][a],
            describe(&names, &vals, table)
        ))
    };

    let mut sum = 0.0;
    for w in assignments(&w_sizes) {
        let nw = if w.is_empty() { n } else { wm.get(&w) };
        if nw == 0.0 {
            continue;
        }
        let pw = nw / n;
        for z in assignments(&z_sizes) {
            let pz0 = p_z(&w, a0, &z).ok_or_else(|| positivity(&w, a0, &z))?;
            let py = |a: usize| -> Result<f64> {
                let mut lead = w.clone();
                lead.push(a);
                lead.extend(&z);
                conditional(&ym, &lead, yv, alpha).ok_or_else(|| positivity(&w, a, &z))
            };
            if indirect {
                let pz1 = p_z(&w, a1, &z).ok_or_else(|| positivity(&w, a1, &z))?;
                if pz1 == 0.0 && pz0 == 0.0 {
                    continue;
                }
                sum += py(a0)? * (pz1 - pz0) * pw;
            } else {
                if pz0 == 0.0 {
                    continue;
                }
                sum += (py(a1)? - py(a0)?) * pz0 * pw;
            }
        }
    }
    Ok(sum)
}

/// Sum over the planned variables of the product of their conditionals,
/// with the treatment entering at `a1` on selected edges and `a0` elsewhere.
fn edge_g_formula(
    table: &CountTable,
    factors: &[EdgeFactor],
    q: &EffectQuery,
    a1: usize,
    a0: usize,
    yv: usize,
    alpha: Option<f64>,
) -> Result<f64> {
    let marginals: Vec<Marginal> = factors
        .iter()
        .map(|f| {
            let mut cols: Vec<usize> = f.parents.iter().map(|p| table.position(p)).collect();
            cols.push(table.position(&f.node));
            table.marginal(&cols)
        })
        .collect();
    let sizes: Vec<usize> = factors
        .iter()
        .map(|f| table.domains[table.position(&f.node)].len())
        .collect();
    let pos: Vec<(String, usize)> = factors
        .iter()
        .enumerate()
        .map(|(i, f)| (f.node.clone(), i))
        .collect();
    let slot = |name: &str| pos.iter().find(|(n, _)| n == name).map(|(_, i)| *i);
    let parent_slots: Vec<Vec<Option<usize>>> = factors
        .iter()
        .map(|f| f.parents.iter().map(|p| slot(p)).collect())
        .collect();
    let y_slot = slot(&q.outcome).expect("outcome is always planned");

    struct Walk<'a> {
        factors: &'a [EdgeFactor],
        marginals: &'a [Marginal],
        parent_slots: &'a [Vec<Option<usize>>],
        sizes: &'a [usize],
        table: &'a CountTable,
        a1: usize,
        a0: usize,
        yv: usize,
        y_slot: usize,
        alpha: Option<f64>,
        treatment: &'a str,
    }

    fn walk(w: &Walk, depth: usize, vals: &mut Vec<usize>, weight: f64) -> Result<f64> {
        if depth == w.factors.len() {
            return Ok(if vals[w.y_slot] == w.yv { weight } else { 0.0 });
        }
        let f = &w.factors[depth];
        let lead: Vec<usize> = f
            .parents
            .iter()
            .enumerate()
            .map(|(k, _)| {
                if f.treatment_parent[k] {
                    if f.treatment_on[k] {
                        w.a1
                    } else {
                        w.a0
                    }
                } else {
                    vals[w.parent_slots[depth][k].expect("non-treatment parents are planned")]
                }
            })
            .collect();
        let mut sum = 0.0;
        for x in 0..w.sizes[depth] {
            let p = conditional(&w.marginals[depth], &lead, x, w.alpha).ok_or_else(|| {
                let parents: Vec<String> = f
                    .parents
                    .iter()
                    .zip(&lead)
                    .map(|(p, &v)| format!("{p}={}", w.table.domains[w.table.position(p)][v]))
                    .collect();
                Error::Positivity(format!(
                    "no rows for {} given [{}] (treatment `{}`)",
                    f.node,
                    parents.join(", "),
                    w.treatment
                ))
            })?;
            if p == 0.0 {
                continue;
            }
            vals[depth] = x;
            sum += walk(w, depth + 1, vals, weight * p)?;
        }
        Ok(sum)
    }

    let w = Walk {
        factors,
        marginals: &marginals,
        parent_slots: &parent_slots,
        sizes: &sizes,
        table,
        a1,
        a0,
        yv,
        y_slot,
        alpha,
        treatment: &q.sensitive,
    };
    let mut vals = vec![0; factors.len()];
    walk(&w, 0, &mut vals, 1.0)
}
