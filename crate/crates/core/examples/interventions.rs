//! Observational versus interventional queries on a confounded model.
//!
//! Love causes both loving behavior and a glow; intervening on behavior does
//! nothing to the glow even though the two are strongly correlated.

use causal_fairness::scenarios::{Scenario, ScenarioId};
use causal_fairness::scm::Intervention;

fn main() -> causal_fairness::Result<()> {
    let s = Scenario::new(ScenarioId::LoveConfounder);
    let joint = s.scm.joint_distribution()?;

    for b in ["0", "1"] {
        let obs = joint
            .conditional(&[("Glow", "1")], &[("Behavior", b)])?
            .unwrap_or(f64::NAN);
        let int = s
            .scm
            .interventional_prob(&Intervention::single("Behavior", b), ("Glow", "1"))?;
        println!("P(Glow=1 | Behavior={b}) = {obs:.4}   P(Glow=1 | do(Behavior={b})) = {int:.4}");
    }
    println!("TV = {:.4}, TE = {:.4}", s.truth.tv, s.truth.te);

    // Interventional sampling agrees with the exact query.
    let data = s
        .scm
        .sample_with(&Intervention::single("Behavior", "1"), 20_000, 7)?;
    let (codes, domain) = data.categorical("Glow")?;
    let one = domain.iter().position(|v| v == "1").expect("binary domain") as u32;
    let rate = codes.iter().filter(|&&c| c == one).count() as f64 / codes.len() as f64;
    println!("sampled P(Glow=1 | do(Behavior=1)) = {rate:.4}");
    Ok(())
}
