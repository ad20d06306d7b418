//! Writing a model in the graph specification language, parsing it and
//! exporting the canonical form.

use causal_fairness::dsl::{export_spec, parse_graph_spec, SpecModel};
use causal_fairness::estimators::{estimate, EffectQuery, Metric, MetricRequest, Source};

const SPEC: &str = r#"
meta title = "loan approval"

node Gender { domain: [f, m] }
node Income { domain: [low, high] }
node Loan   { domain: [no, yes] }

edge Gender -> Income
edge Gender -> Loan
edge Income -> Loan

role Income = explaining

exo U_G { support: [a, b], probs: [0.5, 0.5] }
exo U_I { support: [a, b, c], probs: [0.3, 0.3, 0.4] }
exo U_L { support: [a, b, c, d], probs: [0.25, 0.25, 0.25, 0.25] }

func Gender(U_G) { (a) -> f; (b) -> m; }
func Income(Gender, U_I) {
  (f, a) -> high;
  (m, a) -> high;
  (m, b) -> high;
  default -> low;
}
func Loan(Gender, Income, U_L) {
  (_, high, a) -> yes;
  (_, high, b) -> yes;
  (m, _, c) -> yes;
  default -> no;
}
"#;

fn main() -> causal_fairness::Result<()> {
    let spec = parse_graph_spec(SPEC)?;
    let Some(SpecModel::Discrete(m)) = &spec.model else {
        unreachable!("spec defines func tables")
    };
    let q = EffectQuery::new("Gender", "f", "m", "Loan", "yes");
    for metric in [Metric::Tv, Metric::Te, Metric::Nde, Metric::Nie] {
        let request = MetricRequest::with_defaults(metric, &spec.graph, &q)?;
        println!(
            "{:<4} {:.4}",
            metric.as_str(),
            estimate(&Source::Exact(m), &q, &request)?.value
        );
    }

    println!("\ncanonical export:\n{}", export_spec(&spec));

    match parse_graph_spec("node A { domain: [0, 1] }\nedge A => B\n") {
        Err(e) => println!("malformed input is rejected with a position: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
