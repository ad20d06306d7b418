//! Sample every built-in scenario and print its ground-truth metrics.
//!
//! `cargo run --example generate -- [n] [seed]` writes `<scenario>.csv`
//! into the current directory.

use causal_fairness::scenarios::Scenario;

fn main() -> causal_fairness::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    for s in Scenario::all() {
        let path = format!("{}.csv", s.id);
        std::fs::write(&path, s.sample(n, seed).to_csv_string()).map_err(|e| {
            causal_fairness::Error::Io {
                path: path.clone(),
                message: e.to_string(),
            }
        })?;
        let t = &s.truth;
        println!(
            "{path:<26} tv {:.4}  te {:.4}  nde {:.4}  nie {:.4}  pse {:.4}",
            t.tv, t.te, t.nde, t.nie, t.pse
        );
    }
    Ok(())
}
