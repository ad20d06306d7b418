//! A full audit of sampled hiring data, rendered as markdown.

use std::collections::BTreeMap;

use causal_fairness::audit::{audit, AuditConfig};
use causal_fairness::dsl::{parse_graph_spec, spec_from_discrete};
use causal_fairness::estimators::Backend;
use causal_fairness::scenarios::{Scenario, ScenarioId};

fn main() -> causal_fairness::Result<()> {
    let s = Scenario::new(ScenarioId::Hiring);
    // Keep the graph and roles but drop the model so estimates come from data.
    let spec = parse_graph_spec(&spec_from_discrete(&s.scm, &s.roles, BTreeMap::new()).to_text())?;
    let data = s.sample(20_000, 5);

    let mut cfg = AuditConfig::new("Race", "0", "1", "Hired", "1");
    cfg.backend = Some(Backend::Plugin);
    cfg.bootstrap = Some(200);
    cfg.seed = 1;
    let report = audit(&spec, Some(&data), &cfg)?;
    print!("{}", report.to_markdown());
    println!("exit code: {}", report.exit_code());
    Ok(())
}
