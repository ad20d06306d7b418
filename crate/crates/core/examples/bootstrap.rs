//! Plug-in estimates from data with percentile bootstrap intervals.

use causal_fairness::estimators::{bootstrap_ci, BootstrapOptions, Metric, PluginOptions};
use causal_fairness::scenarios::{Scenario, ScenarioId};

fn main() -> causal_fairness::Result<()> {
    let s = Scenario::new(ScenarioId::PopularityMediation);
    let data = s.sample(10_000, 11);
    let boot = BootstrapOptions {
        replicates: 500,
        level: 0.95,
        seed: 42,
    };
    for m in [
        Metric::Tv,
        Metric::Te,
        Metric::Nde,
        Metric::Nie,
        Metric::Pse,
    ] {
        let e = bootstrap_ci(
            &data,
            s.graph(),
            &s.query,
            &s.request(m),
            &PluginOptions::default(),
            &boot,
        )?;
        let ci = e.ci.expect("bootstrap attaches an interval");
        println!(
            "{:<4} estimate {:.4}  95% CI [{:.4}, {:.4}]  truth {:.4}",
            m.as_str(),
            e.value,
            ci.lower,
            ci.upper,
            s.truth_of(m)
        );
    }
    Ok(())
}
