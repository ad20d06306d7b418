//! Structural causal models with exact observational, interventional,
//! counterfactual and path-specific semantics.
//!
//! [`DiscreteScm`] holds finite-domain models with explicit structural
//! functions (or, for interventional use only, conditional probability
//! tables). [`LinearGaussianScm`] covers linear models with Gaussian noise,
//! where effects are mean differences computed by path tracing.

mod discrete;
mod joint;
mod linear;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use discrete::{DiscreteNode, DiscreteScm, Exogenous, Mechanism, ScmBuilder, EXOGENOUS_BUDGET};
pub use joint::JointDistribution;
pub(crate) use linear::parse_level;
pub use linear::{LinearEffects, LinearGaussianScm, LinearNode, Noise};

use crate::error::{Error, Result};
use crate::graph::CausalGraph;

/// Fixed assignments `do(X = x, ...)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Intervention {
    pub assignments: BTreeMap<String, String>,
}

impl Intervention {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, node: impl Into<String>, value: impl Into<String>) -> Self {
        self.assignments.insert(node.into(), value.into());
        self
    }

    pub fn single(node: impl Into<String>, value: impl Into<String>) -> Self {
        Self::new().set(node, value)
    }
}

/// Nested counterfactual `P(Y = y | do(A = primary, Z = Z_{A = reference}))`:
/// the outcome world sets the treatment to `primary` while each node in
/// `held` keeps the value it would naturally take with the treatment at
/// `reference`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterfactualQuery {
    pub treatment: String,
    pub primary: String,
    pub reference: String,
    pub held: Vec<String>,
    pub outcome: String,
    pub value: String,
}

/// The set of edges whose paths carry the comparison value of the treatment
/// in a path-specific query. Every other edge carries the baseline value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathSelection {
    pub edges: BTreeSet<(String, String)>,
}

impl PathSelection {
    pub fn new<I, S, T>(edges: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        Self {
            edges: edges
                .into_iter()
                .map(|(s, t)| (s.into(), t.into()))
                .collect(),
        }
    }

    /// All edges on directed paths from `a` to `y`.
    pub fn all_causal(graph: &CausalGraph, a: &str, y: &str) -> Result<Self> {
        Ok(Self::new(graph.causal_edges(a, y)?))
    }

    /// Just the edge `a -> y`, or nothing when absent.
    pub fn direct(graph: &CausalGraph, a: &str, y: &str) -> Result<Self> {
        let (ai, yi) = (graph.index_of(a)?, graph.index_of(y)?);
        Ok(if graph.has_edge(ai, yi) {
            Self::new([(a, y)])
        } else {
            Self::default()
        })
    }

    /// Parses `A>B,B>C`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (from, to) = item
                .split_once('>')
                .ok_or_else(|| Error::Usage(format!("edge `{item}` must look like From>To")))?;
            edges.insert((from.trim().to_string(), to.trim().to_string()));
        }
        Ok(Self { edges })
    }

    /// Per node, per parent position: whether that incoming edge is selected.
    /// Fails unless every edge exists and lies on a directed `a -> y` path.
    pub(crate) fn mask(&self, graph: &CausalGraph, a: usize, y: usize) -> Result<Vec<Vec<bool>>> {
        let mut mask: Vec<Vec<bool>> = (0..graph.len())
            .map(|v| vec![false; graph.parents(v).len()])
            .collect();
        for (from, to) in &self.edges {
            let (u, v) = (graph.index_of(from)?, graph.index_of(to)?);
            if !graph.has_edge(u, v) {
                return Err(Error::InvalidPathSelection(format!(
                    "{from} -> {to} is not an edge"
                )));
            }
            if !graph.edge_on_causal_path(a, y, u, v) {
                return Err(Error::InvalidPathSelection(format!(
                    "{from} -> {to} is not on a directed path from {} to {}",
                    graph.name(a),
                    graph.name(y)
                )));
            }
            let pos = graph
                .parents(v)
                .iter()
                .position(|&p| p == u)
                .expect("edge exists");
            mask[v][pos] = true;
        }
        Ok(mask)
    }

    pub fn to_cli_string(&self) -> String {
        self.edges
            .iter()
            .map(|(a, b)| format!("{a}>{b}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Independent per-row random streams derived from one seed, so rows can be
/// generated in any order (or in parallel) with identical results.
#[derive(Clone)]
pub(crate) struct RowStreams {
    base: ChaCha8Rng,
}

impl RowStreams {
    pub(crate) fn new(seed: u64, purpose: u64) -> Self {
        let key = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Self {
            base: ChaCha8Rng::seed_from_u64(key),
        }
    }

    pub(crate) fn row(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_selection() {
        let sel = PathSelection::parse("Nationality>FamilyStatus, FamilyStatus>Visa").unwrap();
        assert_eq!(sel.edges.len(), 2);
        assert_eq!(
            sel.to_cli_string(),
            "FamilyStatus>Visa,Nationality>FamilyStatus"
        );
        assert!(PathSelection::parse("A-B").is_err());
    }

    #[test]
    fn selection_must_be_causal() {
        let g = CausalGraph::new(["C", "A", "Y"], [("C", "A"), ("C", "Y"), ("A", "Y")]).unwrap();
        let (a, y) = (g.index_of("A").unwrap(), g.index_of("Y").unwrap());
        assert!(PathSelection::new([("A", "Y")]).mask(&g, a, y).is_ok());
        assert!(matches!(
            PathSelection::new([("C", "Y")]).mask(&g, a, y),
            Err(Error::InvalidPathSelection(_))
        ));
        assert!(matches!(
            PathSelection::new([("Y", "A")]).mask(&g, a, y),
            Err(Error::InvalidPathSelection(_))
        ));
    }

    #[test]
    fn row_streams_are_independent_of_order() {
        use rand::Rng;
        let s = RowStreams::new(7, 1);
        let a: Vec<u64> = (0..4).map(|i| s.row(i).gen()).collect();
        let b: Vec<u64> = (0..4).rev().map(|i| s.row(i).gen()).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
        assert_ne!(a[0], a[1]);
    }
}
