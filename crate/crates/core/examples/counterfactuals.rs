//! Unit-level and nested counterfactuals on the visa scenario.

use std::collections::BTreeMap;

use causal_fairness::scenarios::{Scenario, ScenarioId};
use causal_fairness::scm::{CounterfactualQuery, Intervention};

fn main() -> causal_fairness::Result<()> {
    let s = Scenario::new(ScenarioId::Visa);

    // An applicant who was refused: what if their nationality had differed?
    let observed: BTreeMap<String, String> = [
        ("Age", "1"),
        ("Nationality", "1"),
        ("SkillLevel", "0"),
        ("FamilyStatus", "1"),
        ("Visa", "0"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let post =
        s.scm
            .unit_counterfactual(&observed, &Intervention::single("Nationality", "0"), "Visa")?;
    println!("abduction, action, prediction for the refused applicant:");
    for (v, p) in post {
        println!("  P(Visa_(Nationality=0) = {v} | evidence) = {p:.4}");
    }

    // Nationality set to 0 but mediators at their Nationality=1 values.
    let q = CounterfactualQuery {
        treatment: "Nationality".into(),
        primary: "0".into(),
        reference: "1".into(),
        held: vec!["SkillLevel".into(), "FamilyStatus".into()],
        outcome: "Visa".into(),
        value: "1".into(),
    };
    println!(
        "P(Visa_(0, Z_1) = 1) = {:.4}",
        s.scm.counterfactual_prob(&q)?
    );
    Ok(())
}
