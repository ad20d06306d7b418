//! Causal DAGs over named variables and the structural queries built on
//! them: d-separation, path enumeration and classification, backdoor
//! adjustment sets and the local Markov independencies.
//!
//! Nodes are stored in lexicographic order of their names and every
//! iteration in this module follows that order, so results are
//! reproducible across runs and platforms.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of simple paths enumerated between two nodes.
pub const MAX_PATHS: usize = 10_000;

/// A validated causal DAG.
///
/// Two graphs compare equal when they have the same nodes (with the same
/// observed flags) and the same edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    names: Vec<String>,
    observed: Vec<bool>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

/// Incremental construction of a [`CausalGraph`].
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    nodes: Vec<(String, bool)>,
    edges: Vec<(String, String)>,
}

impl GraphBuilder {
    pub fn node(mut self, name: impl Into<String>) -> Self {
        self.nodes.push((name.into(), true));
        self
    }

    /// Adds a node that exists in the causal model but not in the data.
    pub fn unobserved_node(mut self, name: impl Into<String>) -> Self {
        self.nodes.push((name.into(), false));
        self
    }

    pub fn edge(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.edges.push((from.into(), to.into()));
        self
    }

    pub fn build(self) -> Result<CausalGraph> {
        CausalGraph::from_parts(self.nodes, self.edges)
    }
}

impl CausalGraph {
    /// Builds a graph where every node is observed.
    pub fn new<N, E, S, T>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator,
        N::Item: Into<String>,
        E: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        Self::from_parts(
            nodes.into_iter().map(|n| (n.into(), true)).collect(),
            edges
                .into_iter()
                .map(|(s, t)| (s.into(), t.into()))
                .collect(),
        )
    }

    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub(crate) fn from_parts(
        nodes: Vec<(String, bool)>,
        edges: Vec<(String, String)>,
    ) -> Result<Self> {
        let mut declared: BTreeMap<String, bool> = BTreeMap::new();
        for (name, observed) in nodes {
            if declared.insert(name.clone(), observed).is_some() {
                return Err(Error::DuplicateNode(name));
            }
        }
        let names: Vec<String> = declared.keys().cloned().collect();
        let observed: Vec<bool> = declared.values().copied().collect();
        let index = |name: &str| {
            names
                .binary_search_by(|n| n.as_str().cmp(name))
                .map_err(|_| Error::UnknownNode(name.to_string()))
        };

        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (from, to) in &edges {
            let (u, v) = (index(from)?, index(to)?);
            if u == v {
                return Err(Error::Cycle(vec![from.clone(), to.clone()]));
            }
            if !seen.insert((u, v)) {
                return Err(Error::DuplicateEdge(from.clone(), to.clone()));
            }
            parents[v].push(u);
            children[u].push(v);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        // Kahn's algorithm, always releasing the lexicographically smallest
        // ready node so the order is canonical.
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(Reverse(u)) = ready.pop() {
            topo.push(u);
            for &c in &children[u] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if topo.len() < n {
            let cycle = find_cycle(&children, &indegree);
            return Err(Error::Cycle(
                cycle.into_iter().map(|i| names[i].clone()).collect(),
            ));
        }

        Ok(Self {
            names,
            observed,
            parents,
            children,
            topo,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Node names in canonical (lexicographic) order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .map_err(|_| Error::UnknownNode(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_ok()
    }

    pub fn is_observed(&self, index: usize) -> bool {
        self.observed[index]
    }

    pub fn observed_names(&self) -> impl Iterator<Item = &str> {
        self.names
            .iter()
            .zip(&self.observed)
            .filter(|(_, o)| **o)
            .map(|(n, _)| n.as_str())
    }

    pub fn unobserved_names(&self) -> impl Iterator<Item = &str> {
        self.names
            .iter()
            .zip(&self.observed)
            .filter(|(_, o)| !**o)
            .map(|(n, _)| n.as_str())
    }

    pub fn parents(&self, index: usize) -> &[usize] {
        &self.parents[index]
    }

    pub fn children(&self, index: usize) -> &[usize] {
        &self.children[index]
    }

    pub fn parent_names(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index_of(name)?;
        Ok(self.parents[i].iter().map(|&p| self.name(p)).collect())
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.children[from].binary_search(&to).is_ok()
    }

    /// Topological order as node indices (lexicographically smallest first
    /// among ready nodes).
    pub fn topological_indices(&self) -> &[usize] {
        &self.topo
    }

    pub fn topological_order(&self) -> Vec<&str> {
        self.topo.iter().map(|&i| self.name(i)).collect()
    }

    /// All edges as `(cause, effect)` pairs, sorted.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for (u, ch) in self.children.iter().enumerate() {
            for &v in ch {
                out.push((self.name(u), self.name(v)));
            }
        }
        out
    }

    pub fn edge_indices(&self) -> Vec<(usize, usize)> {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(u, ch)| ch.iter().map(move |&v| (u, v)))
            .collect()
    }

    /// Strict descendants of `index` as a membership mask.
    pub fn descendants(&self, index: usize) -> Vec<bool> {
        reach(&self.children, index)
    }

    /// Strict ancestors of `index` as a membership mask.
    pub fn ancestors(&self, index: usize) -> Vec<bool> {
        reach(&self.parents, index)
    }

    /// Nodes lying strictly inside some directed path from `a` to `y`.
    pub fn mediators(&self, a: &str, y: &str) -> Result<Vec<String>> {
        let (ai, yi) = (self.index_of(a)?, self.index_of(y)?);
        let desc = self.descendants(ai);
        let anc = self.ancestors(yi);
        Ok((0..self.len())
            .filter(|&i| desc[i] && anc[i] && i != yi)
            .map(|i| self.names[i].clone())
            .collect())
    }

    /// Whether the edge `from -> to` lies on at least one directed path
    /// from `a` to `y`.
    pub fn edge_on_causal_path(&self, a: usize, y: usize, from: usize, to: usize) -> bool {
        if !self.has_edge(from, to) {
            return false;
        }
        let desc = self.descendants(a);
        let anc = self.ancestors(y);
        (from == a || desc[from]) && (to == y || anc[to])
    }

    /// Every edge that lies on a directed path from `a` to `y`.
    pub fn causal_edges(&self, a: &str, y: &str) -> Result<Vec<(String, String)>> {
        let (ai, yi) = (self.index_of(a)?, self.index_of(y)?);
        Ok(self
            .edge_indices()
            .into_iter()
            .filter(|&(u, v)| self.edge_on_causal_path(ai, yi, u, v))
            .map(|(u, v)| (self.names[u].clone(), self.names[v].clone()))
            .collect())
    }

    fn indices_of(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.index_of(n)).collect()
    }

    /// d-separation of the node sets `x` and `y` given `z`.
    pub fn d_separated(&self, x: &[&str], y: &[&str], z: &[&str]) -> Result<bool> {
        let (xs, ys, zs) = (
            self.indices_of(x)?,
            self.indices_of(y)?,
            self.indices_of(z)?,
        );
        let mut owner = vec![0u8; self.len()];
        for (tag, set) in [(1u8, &xs), (2, &ys), (4, &zs)] {
            for &i in set.iter() {
                if owner[i] != 0 && owner[i] != tag {
                    return Err(Error::Overlap(self.names[i].clone()));
                }
                owner[i] = tag;
            }
        }
        Ok(d_separated_in(&self.parents, &self.children, &xs, &ys, &zs))
    }

    /// Directed paths `a -> ... -> y`, sorted by node sequence.
    pub fn causal_paths(&self, a: &str, y: &str) -> Result<Vec<Path>> {
        Ok(self
            .simple_paths(a, y)?
            .into_iter()
            .filter(|p| p.kind == PathKind::Causal)
            .collect())
    }

    /// Paths whose first step enters `a` through one of its parents.
    pub fn backdoor_paths(&self, a: &str, y: &str) -> Result<Vec<Path>> {
        Ok(self
            .simple_paths(a, y)?
            .into_iter()
            .filter(|p| p.kind == PathKind::Backdoor)
            .collect())
    }

    /// All simple paths between `a` and `y` in the skeleton, each tagged with
    /// its kind and sorted by node sequence.
    pub fn simple_paths(&self, a: &str, y: &str) -> Result<Vec<Path>> {
        let (ai, yi) = (self.index_of(a)?, self.index_of(y)?);
        if ai == yi {
            return Err(Error::InvalidQuery(format!(
                "path endpoints coincide: `{a}`"
            )));
        }
        let mut raw: Vec<(Vec<usize>, Vec<bool>)> = Vec::new();
        let mut on_path = vec![false; self.len()];
        let mut nodes = vec![ai];
        let mut dirs = Vec::new();
        on_path[ai] = true;
        self.extend_paths(yi, &mut nodes, &mut dirs, &mut on_path, &mut raw)?;

        let mut paths: Vec<Path> = raw
            .into_iter()
            .map(|(nodes, forward)| {
                Path::new(
                    nodes.iter().map(|&i| self.names[i].clone()).collect(),
                    forward,
                )
            })
            .collect();
        paths.sort_by(|p, q| p.nodes.cmp(&q.nodes));
        Ok(paths)
    }

    fn extend_paths(
        &self,
        target: usize,
        nodes: &mut Vec<usize>,
        dirs: &mut Vec<bool>,
        on_path: &mut [bool],
        out: &mut Vec<(Vec<usize>, Vec<bool>)>,
    ) -> Result<()> {
        let last = *nodes.last().expect("path is never empty");
        if last == target {
            if out.len() >= MAX_PATHS {
                return Err(Error::PathExplosion(MAX_PATHS));
            }
            out.push((nodes.clone(), dirs.clone()));
            return Ok(());
        }
        let steps = self.children[last]
            .iter()
            .map(|&c| (c, true))
            .chain(self.parents[last].iter().map(|&p| (p, false)));
        for (next, forward) in steps {
            if on_path[next] {
                continue;
            }
            on_path[next] = true;
            nodes.push(next);
            dirs.push(forward);
            self.extend_paths(target, nodes, dirs, on_path, out)?;
            nodes.pop();
            dirs.pop();
            on_path[next] = false;
        }
        Ok(())
    }

    /// Smallest set of observed non-descendants of `a` satisfying the
    /// backdoor criterion for `(a, y)`; ties go to the lexicographically
    /// first set. `None` when no such set exists.
    pub fn minimal_adjustment_set(&self, a: &str, y: &str) -> Result<Option<AdjustmentSet>> {
        let (ai, yi) = (self.index_of(a)?, self.index_of(y)?);
        if ai == yi {
            return Err(Error::InvalidQuery(format!(
                "treatment and outcome coincide: `{a}`"
            )));
        }
        let desc = self.descendants(ai);
        let candidates: Vec<usize> = (0..self.len())
            .filter(|&i| i != ai && i != yi && self.observed[i] && !desc[i])
            .collect();

        // Remove the treatment's outgoing edges.
        let mut parents = self.parents.clone();
        let mut children = self.children.clone();
        for &c in &self.children[ai] {
            parents[c].retain(|&p| p != ai);
        }
        children[ai].clear();

        for size in 0..=candidates.len() {
            let mut found = None;
            for_each_combination(candidates.len(), size, |combo| {
                let set: Vec<usize> = combo.iter().map(|&k| candidates[k]).collect();
                if d_separated_in(&parents, &children, &[ai], &[yi], &set) {
                    found = Some(set);
                    true
                } else {
                    false
                }
            });
            if let Some(set) = found {
                return Ok(Some(AdjustmentSet {
                    nodes: set.into_iter().map(|i| self.names[i].clone()).collect(),
                    criterion: Criterion::Backdoor,
                }));
            }
        }
        Ok(None)
    }

    /// Local Markov statements: each node is independent of every
    /// non-descendant non-parent given its parents. Symmetric duplicates are
    /// dropped, keeping the first in canonical node order.
    pub fn implied_independencies(&self) -> Vec<IndependenceStatement> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in 0..self.len() {
            let desc = self.descendants(v);
            for (w, &is_desc) in desc.iter().enumerate() {
                if w == v || is_desc || self.parents[v].contains(&w) {
                    continue;
                }
                let key = (v.min(w), v.max(w), self.parents[v].clone());
                if seen.insert(key) {
                    out.push(IndependenceStatement {
                        x: self.names[v].clone(),
                        y: self.names[w].clone(),
                        given: self.parents[v]
                            .iter()
                            .map(|&p| self.names[p].clone())
                            .collect(),
                    });
                }
            }
        }
        out
    }

    /// Labels every simple path between `a` and `y`.
    pub fn classify_paths(
        &self,
        a: &str,
        y: &str,
        roles: &BTreeMap<String, Role>,
    ) -> Result<Vec<ClassifiedPath>> {
        for name in roles.keys() {
            self.index_of(name)?;
        }
        let paths = self.simple_paths(a, y)?;
        Ok(paths
            .into_iter()
            .map(|path| {
                let label = match path.kind {
                    PathKind::Backdoor => PathLabel::Backdoor,
                    PathKind::Other => PathLabel::Other,
                    PathKind::Causal if path.nodes.len() == 2 => PathLabel::Direct,
                    PathKind::Causal => {
                        let inner = &path.nodes[1..path.nodes.len() - 1];
                        let role = |n: &String| roles.get(n).copied().unwrap_or(Role::Neutral);
                        if inner.iter().any(|n| role(n) == Role::Proxy) {
                            PathLabel::IndirectProxy
                        } else if inner.iter().all(|n| role(n) == Role::Explaining) {
                            PathLabel::IndirectExplaining
                        } else {
                            PathLabel::IndirectNeutral
                        }
                    }
                };
                ClassifiedPath { path, label }
            })
            .collect())
    }
}

fn reach(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack: Vec<usize> = adj[start].clone();
    while let Some(u) = stack.pop() {
        if !seen[u] {
            seen[u] = true;
            stack.extend(adj[u].iter().copied());
        }
    }
    seen
}

/// Walks the nodes left over by Kahn's algorithm until one repeats.
fn find_cycle(children: &[Vec<usize>], indegree: &[usize]) -> Vec<usize> {
    let stuck: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
    let start = stuck
        .iter()
        .position(|&s| s)
        .expect("a cycle leaves stuck nodes");
    let mut order = vec![start];
    let mut pos = vec![usize::MAX; children.len()];
    pos[start] = 0;
    let mut u = start;
    loop {
        // Every stuck node has a stuck parent; walk parents, reverse at the end.
        u = children
            .iter()
            .enumerate()
            .find(|(p, ch)| stuck[*p] && ch.contains(&u))
            .map(|(p, _)| p)
            .expect("stuck node has a stuck parent");
        if pos[u] != usize::MAX {
            let mut cycle: Vec<usize> = order[pos[u]..].to_vec();
            cycle.reverse();
            cycle.push(cycle[0]);
            return cycle;
        }
        pos[u] = order.len();
        order.push(u);
    }
}

/// Reachability-based d-separation test on raw adjacency lists.
pub(crate) fn d_separated_in(
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
    xs: &[usize],
    ys: &[usize],
    zs: &[usize],
) -> bool {
    let n = parents.len();
    let mut in_z = vec![false; n];
    for &z in zs {
        in_z[z] = true;
    }
    // Z together with its ancestors: colliders in here are open.
    let mut anc_z = in_z.clone();
    let mut stack: Vec<usize> = zs.to_vec();
    while let Some(u) = stack.pop() {
        for &p in &parents[u] {
            if !anc_z[p] {
                anc_z[p] = true;
                stack.push(p);
            }
        }
    }
    let mut is_target = vec![false; n];
    for &y in ys {
        is_target[y] = true;
    }

    // State: (node, arrived travelling up from a child).
    let mut visited = vec![[false; 2]; n];
    let mut queue: VecDeque<(usize, bool)> = xs.iter().map(|&x| (x, true)).collect();
    while let Some((v, up)) = queue.pop_front() {
        if visited[v][up as usize] {
            continue;
        }
        visited[v][up as usize] = true;
        if !in_z[v] && is_target[v] {
            return false;
        }
        if up {
            if !in_z[v] {
                queue.extend(parents[v].iter().map(|&p| (p, true)));
                queue.extend(children[v].iter().map(|&c| (c, false)));
            }
        } else {
            if !in_z[v] {
                queue.extend(children[v].iter().map(|&c| (c, false)));
            }
            if anc_z[v] {
                queue.extend(parents[v].iter().map(|&p| (p, true)));
            }
        }
    }
    true
}

/// Calls `f` with each `k`-subset of `0..n` in lexicographic order until it
/// returns `true`.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        if f(&combo) {
            return;
        }
        let Some(i) = (0..k).rev().find(|&i| combo[i] != i + n - k) else {
            return;
        };
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Causal,
    Backdoor,
    Other,
}

/// A simple path in the graph skeleton. `forward[i]` tells whether the step
/// from `nodes[i]` to `nodes[i + 1]` follows the edge direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<String>,
    pub forward: Vec<bool>,
    pub kind: PathKind,
}

impl Path {
    fn new(nodes: Vec<String>, forward: Vec<bool>) -> Self {
        let kind = if forward.iter().all(|&f| f) {
            PathKind::Causal
        } else if forward.first() == Some(&false) {
            PathKind::Backdoor
        } else {
            PathKind::Other
        };
        Self {
            nodes,
            forward,
            kind,
        }
    }

    /// The path's edges as `(cause, effect)` pairs.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.nodes
            .windows(2)
            .zip(&self.forward)
            .map(|(w, &f)| {
                if f {
                    (w[0].clone(), w[1].clone())
                } else {
                    (w[1].clone(), w[0].clone())
                }
            })
            .collect()
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (node, &fwd) in self.nodes[1..].iter().zip(&self.forward) {
            write!(f, " {} {}", if fwd { "->" } else { "<-" }, node)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Backdoor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustmentSet {
    pub nodes: Vec<String>,
    pub criterion: Criterion,
}

/// `x` is independent of `y` given `given`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndependenceStatement {
    pub x: String,
    pub y: String,
    pub given: Vec<String>,
}

impl fmt::Display for IndependenceStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} _||_ {} | {{{}}}",
            self.x,
            self.y,
            self.given.join(", ")
        )
    }
}

/// Role of a mediator in a business-necessity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Explaining,
    Proxy,
    Neutral,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Explaining => "explaining",
            Role::Proxy => "proxy",
            Role::Neutral => "neutral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathLabel {
    Direct,
    IndirectExplaining,
    IndirectProxy,
    IndirectNeutral,
    Backdoor,
    Other,
}

impl PathLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PathLabel::Direct => "direct",
            PathLabel::IndirectExplaining => "indirect-explaining",
            PathLabel::IndirectProxy => "indirect-proxy",
            PathLabel::IndirectNeutral => "indirect-neutral",
            PathLabel::Backdoor => "backdoor",
            PathLabel::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedPath {
    pub path: Path,
    pub label: PathLabel,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn visa() -> CausalGraph {
        CausalGraph::new(
            ["Age", "Nationality", "Skill", "FamilyStatus", "Visa"],
            [
                ("Age", "Nationality"),
                ("Age", "Visa"),
                ("Nationality", "Skill"),
                ("Skill", "Visa"),
                ("Nationality", "FamilyStatus"),
                ("FamilyStatus", "Visa"),
                ("Nationality", "Visa"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_order() {
        let g = CausalGraph::new(["Y", "A"], [("A", "Y")]).unwrap();
        assert_eq!(g.topological_order(), vec!["A", "Y"]);
        assert_eq!(g.names(), ["A", "Y"]);
    }

    #[test]
    fn rejects_cycles_and_bad_edges() {
        let err = CausalGraph::new(["A", "B"], [("A", "B"), ("B", "A")]).unwrap_err();
        assert!(
            matches!(err, Error::Cycle(ref c) if c.len() == 3 && c[0] == c[2]),
            "{err:?}"
        );
        assert!(matches!(
            CausalGraph::new(["A"], [("A", "A")]),
            Err(Error::Cycle(_))
        ));
        assert_eq!(
            CausalGraph::new(["A"], [("A", "B")]).unwrap_err(),
            Error::UnknownNode("B".into())
        );
        assert_eq!(
            CausalGraph::new(["A", "B"], [("A", "B"), ("A", "B")]).unwrap_err(),
            Error::DuplicateEdge("A".into(), "B".into())
        );
    }

    #[test]
    fn cycle_is_named() {
        let err = CausalGraph::new(
            ["A", "B", "C", "D"],
            [("D", "A"), ("A", "B"), ("B", "C"), ("C", "A")],
        )
        .unwrap_err();
        let Error::Cycle(cycle) = err else { panic!() };
        let mut inner: Vec<_> = cycle[..cycle.len() - 1].to_vec();
        inner.sort();
        assert_eq!(inner, ["A", "B", "C"]);
    }

    #[test]
    fn d_separation_basics() {
        let fork = CausalGraph::new(["A", "B", "C"], [("C", "A"), ("C", "B")]).unwrap();
        assert!(fork.d_separated(&["A"], &["B"], &["C"]).unwrap());
        assert!(!fork.d_separated(&["A"], &["B"], &[]).unwrap());

        let collider = CausalGraph::new(["A", "B", "S"], [("A", "S"), ("B", "S")]).unwrap();
        assert!(collider.d_separated(&["A"], &["B"], &[]).unwrap());
        assert!(!collider.d_separated(&["A"], &["B"], &["S"]).unwrap());

        assert!(!visa()
            .d_separated(&["Nationality"], &["Visa"], &[])
            .unwrap());
    }

    #[test]
    fn descendant_of_collider_opens() {
        let g =
            CausalGraph::new(["A", "B", "S", "D"], [("A", "S"), ("B", "S"), ("S", "D")]).unwrap();
        assert!(!g.d_separated(&["A"], &["B"], &["D"]).unwrap());
    }

    #[test]
    fn d_separation_errors() {
        let g = visa();
        assert_eq!(
            g.d_separated(&["Age"], &["Age"], &[]).unwrap_err(),
            Error::Overlap("Age".into())
        );
        assert!(matches!(
            g.d_separated(&["Q"], &["Age"], &[]),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn visa_paths() {
        let g = visa();
        let causal: Vec<String> = g
            .causal_paths("Nationality", "Visa")
            .unwrap()
            .iter()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(
            causal,
            [
                "Nationality -> FamilyStatus -> Visa",
                "Nationality -> Skill -> Visa",
                "Nationality -> Visa",
            ]
        );
        let back = g.backdoor_paths("Nationality", "Visa").unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].to_string(), "Nationality <- Age -> Visa");
    }

    #[test]
    fn path_edge_cases() {
        let chain = CausalGraph::new(["A", "M", "Y"], [("A", "M"), ("M", "Y")]).unwrap();
        let p = chain.causal_paths("A", "Y").unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].nodes.len(), 3);
        assert!(chain.backdoor_paths("A", "Y").unwrap().is_empty());
        assert!(chain.causal_paths("Y", "A").unwrap().is_empty());

        let collider = CausalGraph::new(["A", "B", "S"], [("A", "S"), ("B", "S")]).unwrap();
        assert!(collider.backdoor_paths("A", "B").unwrap().is_empty());
        let all = collider.simple_paths("A", "B").unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].kind, PathKind::Other);
    }

    #[test]
    fn path_explosion_is_reported() {
        // Complete DAG on 10 nodes has far more than MAX_PATHS simple paths
        // between its endpoints.
        let names: Vec<String> = (0..10).map(|i| format!("N{i}")).collect();
        let mut edges = Vec::new();
        for i in 0..10 {
            for j in i + 1..10 {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
        let g = CausalGraph::new(names.clone(), edges).unwrap();
        assert_eq!(
            g.simple_paths("N0", "N9").unwrap_err(),
            Error::PathExplosion(MAX_PATHS)
        );
    }

    #[test]
    fn adjustment_sets() {
        let g = visa();
        let set = g
            .minimal_adjustment_set("Nationality", "Visa")
            .unwrap()
            .unwrap();
        assert_eq!(set.nodes, ["Age"]);

        let chain = CausalGraph::new(["A", "Y"], [("A", "Y")]).unwrap();
        assert!(chain
            .minimal_adjustment_set("A", "Y")
            .unwrap()
            .unwrap()
            .nodes
            .is_empty());

        let hidden = CausalGraph::builder()
            .node("A")
            .node("Y")
            .unobserved_node("U")
            .edge("U", "A")
            .edge("U", "Y")
            .edge("A", "Y")
            .build()
            .unwrap();
        assert_eq!(hidden.minimal_adjustment_set("A", "Y").unwrap(), None);
    }

    #[test]
    fn implied_independencies_examples() {
        let chain = CausalGraph::new(["A", "B", "C"], [("A", "B"), ("B", "C")]).unwrap();
        let stmts = chain.implied_independencies();
        assert_eq!(
            stmts,
            [IndependenceStatement {
                x: "C".into(),
                y: "A".into(),
                given: vec!["B".into()]
            }]
        );

        let complete =
            CausalGraph::new(["A", "B", "C"], [("A", "B"), ("B", "C"), ("A", "C")]).unwrap();
        assert!(complete.implied_independencies().is_empty());

        let collider = CausalGraph::new(["A", "B", "S"], [("A", "S"), ("B", "S")]).unwrap();
        assert_eq!(
            collider.implied_independencies(),
            [IndependenceStatement {
                x: "A".into(),
                y: "B".into(),
                given: vec![]
            }]
        );
    }

    #[test]
    fn hiring_classification() {
        let g = CausalGraph::new(
            ["Race", "Skill", "LastName", "Hired"],
            [
                ("Race", "Hired"),
                ("Race", "Skill"),
                ("Skill", "Hired"),
                ("Race", "LastName"),
                ("LastName", "Hired"),
            ],
        )
        .unwrap();
        let roles = BTreeMap::from([
            ("Skill".to_string(), Role::Explaining),
            ("LastName".to_string(), Role::Proxy),
        ]);
        let got: Vec<(String, PathLabel)> = g
            .classify_paths("Race", "Hired", &roles)
            .unwrap()
            .into_iter()
            .map(|c| (c.path.to_string(), c.label))
            .collect();
        assert_eq!(
            got,
            [
                ("Race -> Hired".to_string(), PathLabel::Direct),
                (
                    "Race -> LastName -> Hired".to_string(),
                    PathLabel::IndirectProxy
                ),
                (
                    "Race -> Skill -> Hired".to_string(),
                    PathLabel::IndirectExplaining
                ),
            ]
        );
        let untagged = g.classify_paths("Race", "Hired", &BTreeMap::new()).unwrap();
        assert_eq!(
            untagged
                .iter()
                .filter(|c| c.label == PathLabel::IndirectNeutral)
                .count(),
            2
        );

        let bad = BTreeMap::from([("Nope".to_string(), Role::Proxy)]);
        assert!(matches!(
            g.classify_paths("Race", "Hired", &bad),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn visa_classification_counts() {
        let labels: Vec<PathLabel> = visa()
            .classify_paths("Nationality", "Visa", &BTreeMap::new())
            .unwrap()
            .into_iter()
            .map(|c| c.label)
            .collect();
        let count = |l| labels.iter().filter(|&&x| x == l).count();
        assert_eq!(count(PathLabel::Direct), 1);
        assert_eq!(count(PathLabel::IndirectNeutral), 2);
        assert_eq!(count(PathLabel::Backdoor), 1);
        assert_eq!(labels.len(), 4);
    }

    #[test]
    fn mediators_and_causal_edges() {
        let g = visa();
        assert_eq!(
            g.mediators("Nationality", "Visa").unwrap(),
            ["FamilyStatus", "Skill"]
        );
        let edges = g.causal_edges("Nationality", "Visa").unwrap();
        assert_eq!(edges.len(), 5);
        assert!(!edges.contains(&("Age".to_string(), "Visa".to_string())));
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| {
            seen.push(c.to_vec());
            false
        });
        assert_eq!(seen, [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]);
    }
}
