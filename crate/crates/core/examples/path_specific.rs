//! Path-specific effects: splitting the visa disparity by route.

use causal_fairness::estimators::{path_specific_effect, Source};
use causal_fairness::scenarios::{Scenario, ScenarioId};
use causal_fairness::scm::PathSelection;

fn main() -> causal_fairness::Result<()> {
    let s = Scenario::new(ScenarioId::Visa);
    let src = Source::Exact(&s.scm);
    let g = s.graph();

    for c in g.classify_paths("Nationality", "Visa", &s.roles)? {
        if c.path.kind != causal_fairness::graph::PathKind::Causal {
            continue;
        }
        let pse = path_specific_effect(&src, &s.query, &PathSelection::new(c.path.edges()))?;
        println!(
            "{:<40} {:<20} PSE = {:.4}",
            c.path.to_string(),
            c.label.as_str(),
            pse.value
        );
    }

    let all = PathSelection::all_causal(g, "Nationality", "Visa")?;
    let direct = PathSelection::direct(g, "Nationality", "Visa")?;
    let proxy = PathSelection::parse("Nationality>FamilyStatus,FamilyStatus>Visa")?;
    for (name, sel) in [
        ("all causal", all),
        ("direct", direct),
        ("proxy", proxy),
        ("empty", PathSelection::default()),
    ] {
        println!(
            "{name:<12} {:.6}",
            path_specific_effect(&src, &s.query, &sel)?.value
        );
    }
    println!("TE = {:.6}, NDE = {:.6}", s.truth.te, s.truth.nde);
    Ok(())
}
