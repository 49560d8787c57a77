//! Index sets of series pairs.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// A series pair `(i, j)`, zero-based.
pub type Pair = (usize, usize);

/// An ordered list of distinct series pairs. The position of a pair is its
/// block index in lag panels and bootstrap vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    pairs: Vec<Pair>,
    p: usize,
}

impl IndexSet {
    /// Validates `pairs` against a panel with `p` series.
    pub fn new(pairs: Vec<Pair>, p: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidIndexSet("no pairs".into()));
        }
        let mut seen = HashSet::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            if i >= p || j >= p {
                return Err(Error::InvalidIndexSet(format!(
                    "pair ({}, {}) outside 1..={p}",
                    i + 1,
                    j + 1
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidIndexSet(format!(
                    "duplicate pair ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(Self { pairs, p })
    }

    /// All pairs `(i, j)` with `i > j`, ordered by `i` then `j`.
    pub fn off_diagonal(p: usize) -> Result<Self> {
        let pairs = (1..p).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
        Self::new(pairs, p)
    }

    /// The auto-spectrum pairs `(i, i)`.
    pub fn diagonal(p: usize) -> Result<Self> {
        Self::new((0..p).map(|i| (i, i)).collect(), p)
    }

    /// Pairs `(i, j)` with `i > j` inside one group of series.
    pub fn within(group: &[usize], p: usize) -> Result<Self> {
        let pairs = group
            .iter()
            .enumerate()
            .flat_map(|(a, &i)| group[..a].iter().map(move |&j| (i.max(j), i.min(j))))
            .collect();
        Self::new(pairs, p)
    }

    /// All pairs `(i, j)` with `i` in `left` and `j` in `right`.
    pub fn cross(left: &[usize], right: &[usize], p: usize) -> Result<Self> {
        let pairs = left
            .iter()
            .flat_map(|&i| right.iter().map(move |&j| (i, j)))
            .collect();
        Self::new(pairs, p)
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// Number of pairs `r`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Dimension of the panel the set was validated against.
    pub fn p(&self) -> usize {
        self.p
    }
}
