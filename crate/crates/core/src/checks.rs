//! Data-driven checks of the causal assumptions behind the estimators, plus
//! fixed disclosures for the ones data cannot test.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, IndependenceStatement};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_MIN_COUNT: usize = 5;
pub const DEFAULT_MIN_EFFECT: f64 = 0.02;
/// Strata smaller than this make a G-test result underpowered.
const MIN_STRATUM: usize = 5;
const MAX_LINEARITY_CELLS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFamily {
    GTest,
    FisherZ,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiTestResult {
    pub statement: IndependenceStatement,
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
    pub family: TestFamily,
    pub effective_n: usize,
    /// Some conditioning stratum had fewer than five rows; the p-value is
    /// reported but must not decide pass or fail.
    pub underpowered: bool,
    /// Size of the dependence: weighted total-variation distance between
    /// the joint and the product of marginals within strata (G-test), or
    /// the absolute partial correlation (Fisher-z).
    pub effect: f64,
}

impl CiTestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        !self.underpowered && self.p_value < alpha
    }
}

/// Conditional independence test of `x` and `y` given `z`: a G-test when
/// every column is categorical, Fisher's z on the partial correlation when
/// every column is numeric.
pub fn ci_test(data: &Dataset, x: &str, y: &str, z: &[&str]) -> Result<CiTestResult> {
    let names: Vec<&str> = [x, y].into_iter().chain(z.iter().copied()).collect();
    let mut numeric = Vec::new();
    for n in &names {
        numeric.push(data.column(n)?.is_numeric());
    }
    let statement = IndependenceStatement {
        x: x.to_string(),
        y: y.to_string(),
        given: z.iter().map(|s| s.to_string()).collect(),
    };
    if numeric.iter().all(|&b| !b) {
        g_test(data, statement, &names)
    } else if numeric.iter().all(|&b| b) {
        fisher_z(data, statement, &names)
    } else {
        Err(Error::MixedType(format!(
            "{} mixes categorical and numeric columns",
            names.join(", ")
        )))
    }
}

fn g_test(
    data: &Dataset,
    statement: IndependenceStatement,
    names: &[&str],
) -> Result<CiTestResult> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::InsufficientData("no rows".into()));
    }
    let cols: Vec<(&[u32], usize)> = names
        .iter()
        .map(|c| data.categorical(c).map(|(codes, dom)| (codes, dom.len())))
        .collect::<Result<_>>()?;
    let (kx, ky) = (cols[0].1, cols[1].1);
    let mut strata: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
    for row in 0..n {
        let key: Vec<u32> = cols[2..].iter().map(|(c, _)| c[row]).collect();
        let cell = strata.entry(key).or_insert_with(|| vec![0.0; kx * ky]);
        cell[cols[0].0[row] as usize * ky + cols[1].0[row] as usize] += 1.0;
    }
    let mut g = 0.0;
    let mut tv = 0.0;
    let mut underpowered = false;
    for counts in strata.values() {
        let m: f64 = counts.iter().sum();
        if (m as usize) < MIN_STRATUM {
            underpowered = true;
        }
        let rx: Vec<f64> = (0..kx)
            .map(|i| (0..ky).map(|j| counts[i * ky + j]).sum())
            .collect();
        let cy: Vec<f64> = (0..ky)
            .map(|j| (0..kx).map(|i| counts[i * ky + j]).sum())
            .collect();
        let mut dist = 0.0;
        for i in 0..kx {
            for j in 0..ky {
                let o = counts[i * ky + j];
                let e = rx[i] * cy[j] / m;
                if o > 0.0 {
                    g += 2.0 * o * (o / e).ln();
                }
                dist += (o - e).abs();
            }
        }
        // (|o - e| / m) summed and halved is the stratum TV distance; weight m / n.
        tv += 0.5 * dist / n as f64;
    }
    let df = ((kx - 1) * (ky - 1) * strata.len()) as f64;
    let p_value = if df == 0.0 {
        1.0
    } else {
        ChiSquared::new(df).expect("df > 0").sf(g.max(0.0))
    };
    Ok(CiTestResult {
        statement,
        statistic: g,
        p_value,
        df,
        family: TestFamily::GTest,
        effective_n: n,
        underpowered,
        effect: tv,
    })
}

fn fisher_z(
    data: &Dataset,
    statement: IndependenceStatement,
    names: &[&str],
) -> Result<CiTestResult> {
    let n = data.n_rows();
    let k = names.len();
    if n < k + 4 {
        return Err(Error::InsufficientData(format!(
            "{n} rows for a partial correlation given {} variables",
            k - 2
        )));
    }
    let cols: Vec<&[f64]> = names
        .iter()
        .map(|c| data.numeric(c))
        .collect::<Result<_>>()?;
    let means: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let cov = DMatrix::from_fn(k, k, |i, j| {
        cols[i]
            .iter()
            .zip(cols[j])
            .map(|(a, b)| (a - means[i]) * (b - means[j]))
            .sum::<f64>()
            / (n - 1) as f64
    });
    let precision = cov.try_inverse().ok_or_else(|| {
        Error::InsufficientData("singular covariance matrix (constant or collinear columns)".into())
    })?;
    let r = (-precision[(0, 1)] / (precision[(0, 0)] * precision[(1, 1)]).sqrt())
        .clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let scale = ((n - (k - 2) - 3) as f64).sqrt();
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * scale;
    let p_value = 2.0 * Normal::new(0.0, 1.0).expect("standard normal").sf(z.abs());
    Ok(CiTestResult {
        statement,
        statistic: z,
        p_value: p_value.min(1.0),
        df: 0.0,
        family: TestFamily::FisherZ,
        effective_n: n,
        underpowered: false,
        effect: r.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Untestable,
    Underpowered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Statement or stratum at fault.
    pub subject: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub assumption: String,
    pub status: Status,
    pub violations: Vec<Violation>,
    pub parameters: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(assumption: &str) -> Self {
        Self {
            assumption: assumption.to_string(),
            status: Status::Pass,
            violations: Vec::new(),
            parameters: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn param(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    /// Status from violations: fail if any, else pass unless nothing
    /// could be decided.
    fn settle(mut self, decided: usize, undecided: usize) -> Self {
        self.status = if !self.violations.is_empty() {
            Status::Fail
        } else if decided == 0 && undecided > 0 {
            Status::Underpowered
        } else {
            Status::Pass
        };
        self
    }

    pub fn untestable(assumption: &str, note: impl Into<String>) -> Self {
        let mut r = Self::new(assumption);
        r.status = Status::Untestable;
        r.notes.push(note.into());
        r
    }
}

/// Fails for every covariate stratum in which some value of `a` occurs
/// fewer than `min_count` times (zero counts reveal determinism).
pub fn check_positivity(
    data: &Dataset,
    a: &str,
    covariates: &[&str],
    min_count: usize,
) -> Result<CheckReport> {
    let (ac, adom) = data.categorical(a)?;
    let cols: Vec<(&[u32], &[String])> = covariates
        .iter()
        .map(|c| data.categorical(c))
        .collect::<Result<_>>()?;
    let mut report = CheckReport::new("positivity").param("min_count", min_count as f64);
    if covariates.is_empty() {
        report.notes.push("no covariates: holds vacuously".into());
        return Ok(report.settle(0, 0));
    }
    let mut strata: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
    for row in 0..data.n_rows() {
        let key = cols.iter().map(|(c, _)| c[row]).collect();
        strata.entry(key).or_insert_with(|| vec![0; adom.len()])[ac[row] as usize] += 1;
    }
    for (key, counts) in &strata {
        let low: Vec<String> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c < min_count)
            .map(|(v, c)| format!("{a}={} ({c} rows)", adom[v]))
            .collect();
        if !low.is_empty() {
            let subject = covariates
                .iter()
                .zip(key)
                .zip(&cols)
                .map(|((n, &k), (_, dom))| format!("{n}={}", dom[k as usize]))
                .collect::<Vec<_>>()
                .join(", ");
            let deterministic = counts.contains(&0);
            report.violations.push(Violation {
                subject,
                statistic: Some(*counts.iter().min().expect("non-empty domain") as f64),
                p_value: None,
                detail: format!(
                    "{}{}",
                    low.join("; "),
                    if deterministic {
                        "; deterministic relation"
                    } else {
                        ""
                    }
                ),
            });
        }
    }
    Ok(report.settle(strata.len(), 0))
}

fn graph_columns(data: &Dataset, g: &CausalGraph) -> Result<()> {
    let missing: Vec<&str> = g.observed_names().filter(|n| !data.has_column(n)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::ColumnGraphMismatch(format!(
            "observed nodes without a column: {}",
            missing.join(", ")
        )))
    }
}

fn observed(g: &CausalGraph, name: &str) -> bool {
    g.index_of(name).map(|i| g.is_observed(i)).unwrap_or(false)
}

/// Tests every local Markov statement of `g` with a Bonferroni-corrected
/// level `alpha / #tests`.
pub fn check_markov(data: &Dataset, g: &CausalGraph, alpha: f64) -> Result<CheckReport> {
    graph_columns(data, g)?;
    let mut report = CheckReport::new("causal-markov").param("alpha", alpha);
    let (testable, skipped): (Vec<_>, Vec<_>) =
        g.implied_independencies().into_iter().partition(|s| {
            observed(g, &s.x) && observed(g, &s.y) && s.given.iter().all(|z| observed(g, z))
        });
    for s in &skipped {
        report
            .notes
            .push(format!("skipped {s}: involves an unobserved node"));
    }
    let results: Vec<Result<CiTestResult>> = testable
        .par_iter()
        .map(|s| {
            let z: Vec<&str> = s.given.iter().map(String::as_str).collect();
            ci_test(data, &s.x, &s.y, &z)
        })
        .collect();
    let level = alpha / testable.len().max(1) as f64;
    report = report
        .param("bonferroni_level", level)
        .param("tests", testable.len() as f64);
    let (mut decided, mut undecided) = (0, 0);
    for (s, r) in testable.iter().zip(results) {
        match r {
            Ok(r) if r.underpowered => {
                undecided += 1;
                report.notes.push(format!(
                    "{s}: underpowered (stratum below {MIN_STRATUM} rows)"
                ));
            }
            Ok(r) => {
                decided += 1;
                if r.p_value < level {
                    report.violations.push(Violation {
                        subject: s.to_string(),
                        statistic: Some(r.statistic),
                        p_value: Some(r.p_value),
                        detail: format!("independence rejected (effect {:.4})", r.effect),
                    });
                }
            }
            Err(Error::MixedType(m)) | Err(Error::InsufficientData(m)) => {
                undecided += 1;
                report.notes.push(format!("{s}: untestable ({m})"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report.settle(decided, undecided))
}

/// For each observed pair and conditioning set drawn from `{}`, the
/// parents of one end and the parents of the other, a d-connected pair that
/// looks independent (`p > alpha` and effect below `min_effect`) violates
/// faithfulness.
pub fn check_faithfulness(
    data: &Dataset,
    g: &CausalGraph,
    alpha: f64,
    min_effect: f64,
) -> Result<CheckReport> {
    graph_columns(data, g)?;
    let mut report = CheckReport::new("faithfulness")
        .param("alpha", alpha)
        .param("min_effect", min_effect);
    let names: Vec<&str> = g.observed_names().collect();
    let mut cases: Vec<(String, String, Vec<String>)> = Vec::new();
    for (i, &x) in names.iter().enumerate() {
        for &y in &names[i + 1..] {
            let without = |v: &str, other: &str| -> Vec<String> {
                g.parent_names(v)
                    .expect("known node")
                    .into_iter()
                    .filter(|p| *p != other)
                    .map(str::to_string)
                    .collect()
            };
            let mut sets: BTreeSet<Vec<String>> = BTreeSet::new();
            sets.insert(Vec::new());
            sets.insert(without(x, y));
            sets.insert(without(y, x));
            for z in sets {
                if !z.iter().all(|v| observed(g, v)) {
                    continue;
                }
                let zr: Vec<&str> = z.iter().map(String::as_str).collect();
                if !g.d_separated(&[x], &[y], &zr)? {
                    cases.push((x.to_string(), y.to_string(), z));
                }
            }
        }
    }
    let results: Vec<Result<CiTestResult>> = cases
        .par_iter()
        .map(|(x, y, z)| {
            let zr: Vec<&str> = z.iter().map(String::as_str).collect();
            ci_test(data, x, y, &zr)
        })
        .collect();
    let (mut decided, mut undecided) = (0, 0);
    for ((x, y, z), r) in cases.iter().zip(results) {
        let label = format!("{x} ~ {y} | {{{}}}", z.join(", "));
        match r {
            Ok(r) if r.underpowered => {
                undecided += 1;
                report.notes.push(format!("{label}: underpowered"));
            }
            Ok(r) => {
                decided += 1;
                if r.p_value > alpha && r.effect < min_effect {
                    report.violations.push(Violation {
                        subject: format!("({x}, {y}) given {{{}}}", z.join(", ")),
                        statistic: Some(r.statistic),
                        p_value: Some(r.p_value),
                        detail: format!(
                            "d-connected but tests independent (effect {:.4}); paths may cancel",
                            r.effect
                        ),
                    });
                }
            }
            Err(Error::MixedType(m)) | Err(Error::InsufficientData(m)) => {
                undecided += 1;
                report.notes.push(format!("{label}: untestable ({m})"));
            }
            Err(e) => return Err(e),
        }
    }
    report = report.param("tests", cases.len() as f64);
    Ok(report.settle(decided, undecided))
}

/// Lack-of-fit F-test per numeric child: the linear regression on its
/// parents against the same regression plus one indicator per parent cell
/// (numeric parents cut into quintiles). Bonferroni over children.
pub fn check_linearity(data: &Dataset, g: &CausalGraph, alpha: f64) -> Result<CheckReport> {
    let children: Vec<usize> = (0..g.len())
        .filter(|&v| {
            let name = g.name(v);
            g.is_observed(v)
                && !g.parents(v).is_empty()
                && data.column(name).map(|c| c.is_numeric()).unwrap_or(false)
                && g.parents(v)
                    .iter()
                    .all(|&p| g.is_observed(p) && data.has_column(g.name(p)))
        })
        .collect();
    if children.is_empty() {
        return Err(Error::NoNumericChild);
    }
    let level = alpha / children.len() as f64;
    let mut report = CheckReport::new("linearity")
        .param("alpha", alpha)
        .param("bonferroni_level", level);
    let results: Vec<Result<Option<(f64, f64)>>> = children
        .par_iter()
        .map(|&v| lack_of_fit(data, g, v))
        .collect();
    let (mut decided, mut undecided) = (0, 0);
    for (&v, r) in children.iter().zip(results) {
        match r? {
            None => {
                undecided += 1;
                report.notes.push(format!(
                    "{}: too few rows or too many parent cells",
                    g.name(v)
                ));
            }
            Some((f, p)) => {
                decided += 1;
                if p < level {
                    report.violations.push(Violation {
                        subject: g.name(v).to_string(),
                        statistic: Some(f),
                        p_value: Some(p),
                        detail: "parent-cell means depart from the linear fit".into(),
                    });
                }
            }
        }
    }
    Ok(report.settle(decided, undecided))
}

fn quintile_bins(values: &[f64]) -> Vec<u32> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..5)
        .map(|k| sorted[(k * (sorted.len() - 1)) / 5])
        .collect();
    values
        .iter()
        .map(|v| cuts.iter().filter(|&&c| *v > c).count() as u32)
        .collect()
}

/// `(F, p)` or `None` when the test cannot be formed.
fn lack_of_fit(data: &Dataset, g: &CausalGraph, v: usize) -> Result<Option<(f64, f64)>> {
    let y = data.numeric(g.name(v))?;
    let n = y.len();
    let mut linear_cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut cell_keys: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &p in g.parents(v) {
        let col = data.column(g.name(p))?;
        if let Some(vals) = col.values() {
            linear_cols.push(vals.to_vec());
            for (key, b) in cell_keys.iter_mut().zip(quintile_bins(vals)) {
                key.push(b);
            }
        } else {
            let (codes, dom) = data.categorical(g.name(p))?;
            for level in 1..dom.len() as u32 {
                linear_cols.push(
                    codes
                        .iter()
                        .map(|&c| f64::from(u8::from(c == level)))
                        .collect(),
                );
            }
            for (key, &c) in cell_keys.iter_mut().zip(codes) {
                key.push(c);
            }
        }
    }
    let mut cell_ids: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut sorted_keys: Vec<&Vec<u32>> = cell_keys.iter().collect();
    sorted_keys.sort();
    sorted_keys.dedup();
    for (i, k) in sorted_keys.into_iter().enumerate() {
        cell_ids.insert(k.clone(), i);
    }
    let cells = cell_ids.len();
    if cells > MAX_LINEARITY_CELLS {
        return Ok(None);
    }
    let mut full_cols = linear_cols.clone();
    for c in 1..cells {
        full_cols.push(
            cell_keys
                .iter()
                .map(|k| f64::from(u8::from(cell_ids[k] == c)))
                .collect(),
        );
    }
    let (rss_lin, rank_lin) = least_squares(&linear_cols, y);
    let (rss_full, rank_full) = least_squares(&full_cols, y);
    let d1 = rank_full.saturating_sub(rank_lin);
    if d1 == 0 || n <= rank_full {
        return Ok(None);
    }
    let d2 = n - rank_full;
    if rss_full <= 0.0 {
        return Ok(Some((f64::INFINITY, 0.0)));
    }
    let f = ((rss_lin - rss_full).max(0.0) / d1 as f64) / (rss_full / d2 as f64);
    let p = FisherSnedecor::new(d1 as f64, d2 as f64)
        .expect("positive degrees of freedom")
        .sf(f);
    Ok(Some((f, p)))
}

/// Residual sum of squares and numerical rank of the design.
fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> (f64, usize) {
    let n = y.len();
    let k = cols.len();
    let x = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &yv;
    let svd = xtx.svd(true, true);
    let tol = svd.singular_values.max() * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = svd.solve(&xty, tol).expect("vectors requested");
    let resid = yv - x * beta;
    (resid.norm_squared(), rank)
}

/// Assumptions that no dataset can confirm, stated for the record. With a
/// query, ignorability fails when no observed set blocks the backdoor
/// paths; without one, when any unobserved node is a common cause of two
/// or more variables.
pub fn untestable_disclosures(
    g: &CausalGraph,
    query: Option<(&str, &str)>,
) -> Result<Vec<CheckReport>> {
    let sutva = CheckReport::untestable(
        "sutva",
        "Each individual's outcome depends only on their own sensitive attribute: no interaction between \
         individuals and a single well-defined version of each attribute value.",
    );
    let mut ignorability = CheckReport::untestable(
        "ignorability",
        "Potential outcomes are independent of the sensitive attribute given the observed adjustment variables.",
    );
    let hidden: Vec<String> = match query {
        Some((a, y)) => {
            if g.minimal_adjustment_set(a, y)?.is_some() {
                Vec::new()
            } else {
                let set: BTreeSet<String> = g
                    .backdoor_paths(a, y)?
                    .into_iter()
                    .flat_map(|p| p.nodes)
                    .filter(|n| !observed(g, n))
                    .collect();
                set.into_iter().collect()
            }
        }
        None => (0..g.len())
            .filter(|&v| !g.is_observed(v) && g.children(v).len() >= 2)
            .map(|v| g.name(v).to_string())
            .collect(),
    };
    for h in &hidden {
        ignorability.violations.push(Violation {
            subject: h.clone(),
            statistic: None,
            p_value: None,
            detail: "unobserved common cause on a backdoor path".into(),
        });
    }
    if !hidden.is_empty() {
        ignorability.status = Status::Fail;
    }
    let mut sufficiency = CheckReport::untestable(
        "causal-sufficiency",
        "No latent (hidden) confounders: every common cause of two modelled variables is in the graph.",
    );
    let unobserved: Vec<&str> = g.unobserved_names().collect();
    if !unobserved.is_empty() {
        sufficiency
            .notes
            .push(format!("declared unobserved: {}", unobserved.join(", ")));
    }
    Ok(vec![sutva, ignorability, sufficiency])
}
