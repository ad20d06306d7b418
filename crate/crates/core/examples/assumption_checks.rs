//! Testable assumptions on sampled data, plus the ones that can only be
//! disclosed.

use causal_fairness::checks::{self, ci_test};
use causal_fairness::scenarios::{Scenario, ScenarioId};

fn main() -> causal_fairness::Result<()> {
    let s = Scenario::new(ScenarioId::Hiring);
    let data = s.sample(20_000, 3);
    let g = s.graph();

    let t = ci_test(&data, "LastName", "Skill", &["Race"])?;
    println!(
        "{}: G = {:.3}, df = {}, p = {:.4}",
        t.statement, t.statistic, t.df, t.p_value
    );
    let t = ci_test(&data, "LastName", "Skill", &[])?;
    println!(
        "{}: G = {:.3}, df = {}, p = {:.3e}",
        t.statement, t.statistic, t.df, t.p_value
    );

    let reports = [
        checks::check_positivity(&data, "Race", &[], checks::DEFAULT_MIN_COUNT)?,
        checks::check_markov(&data, g, checks::DEFAULT_ALPHA)?,
        checks::check_faithfulness(&data, g, checks::DEFAULT_ALPHA, checks::DEFAULT_MIN_EFFECT)?,
    ];
    for r in reports
        .iter()
        .chain(&checks::untestable_disclosures(g, Some(("Race", "Hired")))?)
    {
        println!("{:<20} {:?}", r.assumption, r.status);
        for v in &r.violations {
            println!("    {}: {}", v.subject, v.detail);
        }
    }
    Ok(())
}
