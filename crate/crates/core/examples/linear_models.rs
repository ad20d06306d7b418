//! Linear structural models: path tracing, exact effects and simulation.

use std::collections::BTreeMap;

use causal_fairness::estimators::{estimate, EffectQuery, Metric, MetricRequest, Source};
use causal_fairness::graph::CausalGraph;
use causal_fairness::scm::{Intervention, LinearGaussianScm, LinearNode};

fn main() -> causal_fairness::Result<()> {
    let g = CausalGraph::new(
        ["C", "A", "M", "Y"],
        [("C", "A"), ("C", "Y"), ("A", "M"), ("M", "Y"), ("A", "Y")],
    )?;
    let nodes = BTreeMap::from([
        ("C".to_string(), LinearNode::gaussian(0.0, &[], 1.0)),
        (
            "A".to_string(),
            LinearNode::gaussian(0.5, &[("C", 0.8)], 1.0),
        ),
        (
            "M".to_string(),
            LinearNode::gaussian(0.0, &[("A", 1.5)], 0.5),
        ),
        (
            "Y".to_string(),
            LinearNode::gaussian(1.0, &[("C", -0.7), ("M", 0.4), ("A", 0.9)], 1.0),
        ),
    ]);
    let m = LinearGaussianScm::new(g, nodes)?;

    let fx = m.linear_path_effects("A", "Y")?;
    for (p, e) in &fx.paths {
        println!("{:<20} {e:.3}", p.to_string());
    }
    println!(
        "total {:.3}, direct {:.3}, indirect {:.3}",
        fx.total,
        fx.direct,
        fx.indirect()
    );

    let q = EffectQuery::new("A", "0", "1", "Y", "1");
    for metric in [Metric::Tv, Metric::Te, Metric::Nde, Metric::Nie] {
        let r = MetricRequest::with_defaults(metric, m.graph(), &q)?;
        println!(
            "{:<4} {:.4}",
            metric.as_str(),
            estimate(&Source::Linear(&m), &q, &r)?.value
        );
    }

    let n = 200_000;
    let mean = |a: &str, seed| -> causal_fairness::Result<f64> {
        let d = m.sample_with(&Intervention::single("A", a), n, seed)?;
        Ok(d.numeric("Y")?.iter().sum::<f64>() / n as f64)
    };
    println!("simulated TE {:.4}", mean("1", 9)? - mean("0", 10)?);
    Ok(())
}
