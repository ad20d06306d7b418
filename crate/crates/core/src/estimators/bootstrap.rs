//! Nonparametric bootstrap for plug-in estimates.
//!
//! Rows are resampled by drawing a multinomial over the distinct-row count
//! table, which is equivalent to resampling rows with replacement but costs
//! one binomial draw per non-empty cell.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::plugin::CountTable;
use super::{plan, Backend, EffectEstimate, EffectQuery, MetricRequest, PluginOptions};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::scm::RowStreams;

const BOOTSTRAP_STREAM: u64 = 5;
/// Share of replicates allowed to fail before the interval is refused.
const MAX_DEGENERATE: f64 = 0.2;
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub replicates: usize,
    /// Replicates dropped because the resample hit an empty stratum.
    pub discarded: usize,
    pub seed: u64,
}

/// Point estimate plus percentile interval. The interval is widened when
/// necessary so that it always contains the point estimate.
pub fn bootstrap_ci(
    data: &Dataset,
    graph: &CausalGraph,
    q: &EffectQuery,
    request: &MetricRequest,
    options: &PluginOptions,
    boot: &BootstrapOptions,
) -> Result<EffectEstimate> {
    if boot.replicates < MIN_REPLICATES {
        return Err(Error::Usage(format!(
            "at least {MIN_REPLICATES} bootstrap replicates are required, got {}",
            boot.replicates
        )));
    }
    if !(boot.level > 0.0 && boot.level < 1.0) {
        return Err(Error::Usage(format!(
            "confidence level {} must lie in (0, 1)",
            boot.level
        )));
    }
    let mut point = super::estimate(
        &super::Source::Plugin {
            data,
            graph,
            options: *options,
        },
        q,
        request,
    )?;
    let plan = plan(graph, q, request)?;
    let table = CountTable::from_dataset(data, &plan.columns(q))?;
    let n = table.total().round() as u64;
    let streams = RowStreams::new(boot.seed, BOOTSTRAP_STREAM);

    let results: Vec<Option<f64>> = (0..boot.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.row(b as u64);
            let mut resampled = table.clone();
            let mut remaining = n;
            let mut mass = table.total();
            for (cell, &c) in resampled.counts.iter_mut().zip(&table.counts) {
                if c == 0.0 || remaining == 0 {
                    *cell = 0.0;
                    continue;
                }
                let p = (c / mass).clamp(0.0, 1.0);
                let k = Binomial::new(remaining, p)
                    .expect("valid binomial")
                    .sample(&mut rng);
                *cell = k as f64;
                remaining -= k;
                mass -= c;
            }
            match plan.evaluate(&resampled, q, options) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) | Err(Error::EmptyStratum(_)) | Err(Error::Positivity(_)) => None,
                Err(e) => panic!("bootstrap replicate failed unexpectedly: {e}"),
            }
        })
        .collect();

    let mut values: Vec<f64> = results.iter().flatten().copied().collect();
    let discarded = boot.replicates - values.len();
    if discarded as f64 > MAX_DEGENERATE * boot.replicates as f64 {
        return Err(Error::TooManyDegenerateReplicates {
            discarded,
            total: boot.replicates,
        });
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - boot.level) / 2.0;
    let lower = quantile(&values, tail).min(point.value);
    let upper = quantile(&values, 1.0 - tail).max(point.value);
    point.backend = Backend::Plugin;
    point.ci = Some(ConfidenceInterval {
        lower,
        upper,
        level: boot.level,
        replicates: boot.replicates,
        discarded,
        seed: boot.seed,
    });
    Ok(point)
}

/// Linear interpolation between order statistics of a sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::ScmBuilder;

    fn setup() -> (crate::scm::DiscreteScm, Dataset) {
        let g = CausalGraph::new(["A", "C", "Y"], [("C", "A"), ("C", "Y"), ("A", "Y")]).unwrap();
        let m = ScmBuilder::new(g)
            .threshold("C", |_| 0.5)
            .threshold("A", |p| 0.3 + 0.4 * p[0] as f64)
            .threshold("Y", |p| 0.1 + 0.3 * p[0] as f64 + 0.3 * p[1] as f64)
            .build()
            .unwrap();
        let data = m.sample(2000, 4);
        (m, data)
    }

    #[test]
    fn deterministic_and_contains_point() {
        let (m, data) = setup();
        let q = EffectQuery::new("A", "0", "1", "Y", "1");
        let boot = BootstrapOptions {
            replicates: 200,
            level: 0.9,
            seed: 9,
        };
        let a = bootstrap_ci(
            &data,
            m.graph(),
            &q,
            &MetricRequest::Te,
            &PluginOptions::default(),
            &boot,
        )
        .unwrap();
        let b = bootstrap_ci(
            &data,
            m.graph(),
            &q,
            &MetricRequest::Te,
            &PluginOptions::default(),
            &boot,
        )
        .unwrap();
        assert_eq!(a, b);
        let ci = a.ci.unwrap();
        assert!(ci.lower <= a.value && a.value <= ci.upper);
        assert!(ci.upper - ci.lower < 0.2);
    }

    #[test]
    fn too_few_replicates() {
        let (m, data) = setup();
        let q = EffectQuery::new("A", "0", "1", "Y", "1");
        let boot = BootstrapOptions {
            replicates: 10,
            ..Default::default()
        };
        assert!(matches!(
            bootstrap_ci(
                &data,
                m.graph(),
                &q,
                &MetricRequest::Tv,
                &PluginOptions::default(),
                &boot
            ),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.0);
        assert_eq!(quantile(&s, 0.125), 0.5);
        assert_eq!(quantile(&s, 1.0), 4.0);
    }
}
