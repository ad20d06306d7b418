//! Randomized invariants.

use causal_fairness::dataset::{Column, ColumnKind, Dataset};
use causal_fairness::dsl::{parse_graph_spec, spec_from_discrete};
use causal_fairness::estimators::{
    bootstrap_ci, estimate, BootstrapOptions, EffectQuery, Metric, MetricRequest, PluginOptions,
    Source,
};
use causal_fairness::graph::CausalGraph;
use causal_fairness::scm::{DiscreteScm, PathSelection, ScmBuilder};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Random DAG: edges only go from lower to higher position in a random
/// permutation, so names and topological order disagree.
fn dag(n: usize, seed: u64, density: f64) -> CausalGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let names: Vec<String> = (0..n).map(|i| format!("V{}", perm[i])).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
    }
    CausalGraph::new(names.clone(), edges).unwrap()
}

fn random_scm(g: CausalGraph, seed: u64) -> DiscreteScm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut b = ScmBuilder::new(g.clone());
    for name in g.names().to_vec() {
        let k = g.parent_names(&name).unwrap().len();
        let base: f64 = rng.gen_range(0.05..0.3);
        let s: Vec<f64> = (0..k)
            .map(|_| rng.gen_range(-0.6..0.6) / k.max(1) as f64)
            .collect();
        b = b.threshold(&name, move |p| {
            (base + s.iter().zip(p).map(|(c, &v)| c * v as f64).sum::<f64>()).clamp(0.0, 1.0)
        });
    }
    b.build().unwrap()
}

// Brute-force d-separation by enumerating simple paths.
fn descendants(g: &CausalGraph, v: usize) -> Vec<bool> {
    let mut out = vec![false; g.len()];
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if !out[u] {
            out[u] = true;
            stack.extend(g.children(u));
        }
    }
    out
}

fn all_paths(g: &CausalGraph, from: usize, to: usize) -> Vec<Vec<usize>> {
    fn rec(g: &CausalGraph, to: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        if last == to {
            out.push(path.clone());
            return;
        }
        let nbrs: Vec<usize> = g
            .children(last)
            .iter()
            .chain(g.parents(last))
            .copied()
            .collect();
        for n in nbrs {
            if !path.contains(&n) {
                path.push(n);
                rec(g, to, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(g, to, &mut vec![from], &mut out);
    out
}

fn blocked(g: &CausalGraph, path: &[usize], z: &[usize]) -> bool {
    (1..path.len() - 1).any(|i| {
        let (a, b, c) = (path[i - 1], path[i], path[i + 1]);
        let collider = g.has_edge(a, b) && g.has_edge(c, b);
        if collider {
            let d = descendants(g, b);
            !z.iter().any(|&w| d[w])
        } else {
            z.contains(&b)
        }
    })
}

fn oracle_dsep(g: &CausalGraph, x: usize, y: usize, z: &[usize]) -> bool {
    all_paths(g, x, y).iter().all(|p| blocked(g, p, z))
}

fn satisfies_backdoor(g: &CausalGraph, a: usize, y: usize, z: &[usize]) -> bool {
    let d = descendants(g, a);
    !z.iter().any(|&w| d[w])
        && all_paths(g, a, y)
            .iter()
            .filter(|p| g.has_edge(p[1], a))
            .all(|p| blocked(g, p, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_separation_matches_path_enumeration(n in 3usize..8, seed in any::<u64>(), density in 0.2f64..0.7, zmask in any::<u8>()) {
        let g = dag(n, seed, density);
        for x in 0..n {
            for y in x + 1..n {
                let z: Vec<usize> = (0..n).filter(|&v| v != x && v != y && zmask >> v & 1 == 1).collect();
                let zn: Vec<&str> = z.iter().map(|&v| g.name(v)).collect();
                let lib = g.d_separated(&[g.name(x)], &[g.name(y)], &zn).unwrap();
                prop_assert_eq!(lib, oracle_dsep(&g, x, y, &z), "{} {} {:?}", g.name(x), g.name(y), zn);
            }
        }
    }

    #[test]
    fn adjustment_set_is_valid_and_smallest(n in 3usize..7, seed in any::<u64>(), density in 0.2f64..0.7) {
        let g = dag(n, seed, density);
        let topo = g.topological_indices().to_vec();
        for i in 0..n {
            for j in i + 1..n {
                let (a, y) = (topo[i], topo[j]);
                let lib = g.minimal_adjustment_set(g.name(a), g.name(y)).unwrap();
                let cands: Vec<usize> = (0..n).filter(|&v| v != a && v != y).collect();
                let best = (0u32..1 << cands.len())
                    .filter_map(|m| {
                        let z: Vec<usize> =
                            cands.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, &v)| v).collect();
                        satisfies_backdoor(&g, a, y, &z).then_some(z.len())
                    })
                    .min();
                match lib {
                    Some(set) => {
                        let z: Vec<usize> = set.nodes.iter().map(|s| g.index_of(s).unwrap()).collect();
                        prop_assert!(satisfies_backdoor(&g, a, y, &z));
                        prop_assert_eq!(Some(z.len()), best);
                    }
                    None => prop_assert_eq!(best, None),
                }
            }
        }
    }

    #[test]
    fn topological_order_respects_edges(n in 2usize..9, seed in any::<u64>()) {
        let g = dag(n, seed, 0.4);
        let pos: Vec<usize> = {
            let mut p = vec![0; n];
            for (i, &v) in g.topological_indices().iter().enumerate() { p[v] = i; }
            p
        };
        for (u, v) in g.edge_indices() {
            prop_assert!(pos[u] < pos[v]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn effect_identities_on_random_models(n in 3usize..6, seed in any::<u64>()) {
        let g = dag(n, seed, 0.6);
        let topo = g.topological_indices().to_vec();
        let (a, y) = (g.name(topo[0]).to_string(), g.name(topo[n - 1]).to_string());
        let m = random_scm(g, seed);
        let q = EffectQuery::new(&a, "0", "1", &y, "1");
        let src = Source::Exact(&m);
        let get = |metric| estimate(&src, &q, &MetricRequest::with_defaults(metric, m.graph(), &q).unwrap()).unwrap().value;
        let te = get(Metric::Te);
        let nde = get(Metric::Nde);
        let nie_rev = estimate(&src, &q.swapped(), &MetricRequest::with_defaults(Metric::Nie, m.graph(), &q).unwrap()).unwrap().value;
        prop_assert!((te - (nde - nie_rev)).abs() < 1e-12);

        let pse = |sel: PathSelection| estimate(&src, &q, &MetricRequest::Pse(sel)).unwrap().value;
        prop_assert!((pse(PathSelection::all_causal(m.graph(), &a, &y).unwrap()) - te).abs() < 1e-12);
        prop_assert!((pse(PathSelection::direct(m.graph(), &a, &y).unwrap()) - nde).abs() < 1e-12);
        prop_assert_eq!(pse(PathSelection::default()), 0.0);
        prop_assert!((get(Metric::Ate) - te).abs() < 1e-12);
        for v in [te, nde, nie_rev] {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn spec_round_trip_preserves_the_joint(n in 2usize..6, seed in any::<u64>()) {
        let g = dag(n, seed, 0.5);
        let m = random_scm(g, seed);
        let spec = spec_from_discrete(&m, &BTreeMap::new(), BTreeMap::new());
        let text = spec.to_text();
        let back = parse_graph_spec(&text).unwrap();
        prop_assert_eq!(back.to_text(), text);
        let Some(causal_fairness::dsl::SpecModel::Discrete(m2)) = &back.model else { panic!("model lost") };
        let (j1, j2) = (m.joint_distribution().unwrap(), m2.joint_distribution().unwrap());
        prop_assert_eq!(j1.names(), j2.names());
        for (p, q) in j1.probs().iter().zip(j2.probs()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec((0u32..3, -1e6f64..1e6), 1..40)) {
        let labels: Vec<String> = rows.iter().map(|r| ["a", "b", "c"][r.0 as usize].to_string()).collect();
        let d = Dataset::new(vec![
            Column::from_labels("K", &["a", "b", "c"], &labels).unwrap(),
            Column::numeric("X", rows.iter().map(|r| r.1).collect()),
        ]).unwrap();
        let schema = vec![
            ("K".to_string(), ColumnKind::Categorical(vec!["a".into(), "b".into(), "c".into()])),
            ("X".to_string(), ColumnKind::Numeric),
        ];
        let back = Dataset::read_csv(d.to_csv_string().as_bytes(), &schema).unwrap();
        prop_assert_eq!(back, d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bootstrap_interval_contains_point_and_is_reproducible(seed in any::<u64>()) {
        let g = CausalGraph::new(["C", "A", "Y"], [("C", "A"), ("C", "Y"), ("A", "Y")]).unwrap();
        let m = random_scm(g, seed);
        let data = m.sample(1500, seed);
        let q = EffectQuery::new("A", "0", "1", "Y", "1");
        let boot = BootstrapOptions { replicates: 100, level: 0.9, seed };
        let run = || bootstrap_ci(&data, m.graph(), &q, &MetricRequest::Te, &PluginOptions { smoothing: Some(0.5) }, &boot);
        let (a, b) = (run().unwrap(), run().unwrap());
        prop_assert_eq!(&a, &b);
        let ci = a.ci.unwrap();
        prop_assert!(ci.lower <= a.value && a.value <= ci.upper);
    }
}
