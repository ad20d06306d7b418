use crate::error::{Error, Result};

/// Dense probability table over every endogenous variable of a model.
///
/// Cells are laid out in mixed radix with the first variable (canonical
/// order) most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    names: Vec<String>,
    domains: Vec<Vec<String>>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub(crate) fn zeros(names: Vec<String>, domains: Vec<Vec<String>>) -> Self {
        let size = domains.iter().map(Vec::len).product();
        Self {
            names,
            domains,
            probs: vec![0.0; size],
        }
    }

    pub(crate) fn cell_index(&self, values: &[usize]) -> usize {
        values
            .iter()
            .zip(&self.domains)
            .fold(0, |acc, (&v, d)| acc * d.len() + v)
    }

    pub(crate) fn add(&mut self, values: &[usize], p: f64) {
        let i = self.cell_index(values);
        self.probs[i] += p;
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Decodes a cell index into per-variable value indices.
    pub fn values_of(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.domains.len()];
        for (slot, d) in out.iter_mut().zip(&self.domains).rev() {
            *slot = cell % d.len();
            cell /= d.len();
        }
        out
    }

    /// `(values, probability)` for every cell.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (self.values_of(i), p))
    }

    fn resolve(&self, assignment: &[(&str, &str)]) -> Result<Vec<(usize, usize)>> {
        assignment
            .iter()
            .map(|(node, value)| {
                let v = self
                    .names
                    .iter()
                    .position(|n| n == node)
                    .ok_or_else(|| Error::UnknownNode(node.to_string()))?;
                let x = self.domains[v]
                    .iter()
                    .position(|d| d == value)
                    .ok_or_else(|| Error::Domain {
                        node: node.to_string(),
                        value: value.to_string(),
                    })?;
                Ok((v, x))
            })
            .collect()
    }

    /// Marginal probability of a partial assignment.
    pub fn probability(&self, assignment: &[(&str, &str)]) -> Result<f64> {
        let fixed = self.resolve(assignment)?;
        Ok(self
            .iter()
            .filter(|(vals, _)| fixed.iter().all(|&(v, x)| vals[v] == x))
            .map(|(_, p)| p)
            .sum())
    }

    /// `P(event | given)`; `None` when the conditioning event has probability zero.
    pub fn conditional(
        &self,
        event: &[(&str, &str)],
        given: &[(&str, &str)],
    ) -> Result<Option<f64>> {
        let denom = self.probability(given)?;
        if denom == 0.0 {
            return Ok(None);
        }
        let both: Vec<(&str, &str)> = event.iter().chain(given).copied().collect();
        Ok(Some(self.probability(&both)? / denom))
    }
}
