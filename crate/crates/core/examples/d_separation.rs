//! d-separation, backdoor adjustment and the independencies a graph implies.
//!
//! Run with `cargo run --example d_separation`.

use causal_fairness::graph::CausalGraph;

fn main() -> causal_fairness::Result<()> {
    // Age confounds Nationality and Visa; two mediators carry the effect.
    let g = CausalGraph::new(
        ["Age", "Nationality", "SkillLevel", "FamilyStatus", "Visa"],
        [
            ("Age", "Nationality"),
            ("Age", "Visa"),
            ("Nationality", "SkillLevel"),
            ("Nationality", "FamilyStatus"),
            ("Nationality", "Visa"),
            ("SkillLevel", "Visa"),
            ("FamilyStatus", "Visa"),
        ],
    )?;

    println!("topological order: {:?}", g.topological_order());
    for (x, y, z) in [
        ("SkillLevel", "FamilyStatus", vec![]),
        ("SkillLevel", "FamilyStatus", vec!["Nationality"]),
        ("Age", "SkillLevel", vec!["Nationality"]),
        ("Age", "SkillLevel", vec!["Nationality", "Visa"]),
    ] {
        let sep = g.d_separated(&[x], &[y], &z)?;
        println!("{x} _||_ {y} | {z:?}: {sep}");
    }

    for p in g.backdoor_paths("Nationality", "Visa")? {
        println!("backdoor path: {p}");
    }
    if let Some(set) = g.minimal_adjustment_set("Nationality", "Visa")? {
        println!("minimal adjustment set: {:?}", set.nodes);
    }

    println!("local Markov independencies:");
    for s in g.implied_independencies() {
        println!("  {s}");
    }
    Ok(())
}
