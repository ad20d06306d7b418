//! TV, TE, ATE, NDE, NIE and PSE on every built-in scenario, computed exactly
//! from the structural model.

use causal_fairness::estimators::{estimate, Metric, Source};
use causal_fairness::scenarios::Scenario;

fn main() -> causal_fairness::Result<()> {
    println!(
        "{:<22} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "scenario", "tv", "te", "ate", "nde", "nie", "pse"
    );
    for s in Scenario::all() {
        let src = Source::Exact(&s.scm);
        let mut row = format!("{:<22}", s.id.as_str());
        for m in Metric::ALL {
            let e = estimate(&src, &s.query, &s.request(m))?;
            row += &format!(" {:>8.4}", e.value);
        }
        println!("{row}");
    }

    // TE = NDE - NIE(reverse transition).
    let s = Scenario::all().remove(0);
    let src = Source::Exact(&s.scm);
    let te = estimate(&src, &s.query, &s.request(Metric::Te))?.value;
    let nde = estimate(&src, &s.query, &s.request(Metric::Nde))?.value;
    let nie_rev = estimate(&src, &s.query.swapped(), &s.request(Metric::Nie))?.value;
    println!(
        "\n{}: TE = {te:.6}, NDE - NIE(reverse) = {:.6}",
        s.id,
        nde - nie_rev
    );
    Ok(())
}
