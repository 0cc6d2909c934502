//! Single-pass event discovery over term-frequency vectors.
//!
//! Each news without an event id is visited once, in dataset order. It joins
//! the most similar existing cluster when the cosine similarity reaches the
//! threshold, otherwise it founds a new cluster. Cluster order matters: the
//! same input order always yields the same assignment, a different order may
//! not.

use std::collections::BTreeMap;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::text::tokenize;

/// Similarities within this distance below `tau` still count as reaching it,
/// so that exact ties like 1/2 survive rounding in the dot product.
const SIMILARITY_SLACK: f64 = 1e-12;

pub const DEFAULT_TAU: f64 = 0.5;

/// Sparse vector keyed by token.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec(BTreeMap<String, f64>);

impl SparseVec {
    /// Raw term frequencies of a token list.
    pub fn term_frequencies<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut tf = BTreeMap::new();
        for token in tokens {
            *tf.entry(token.as_ref().to_string()).or_insert(0.0) += 1.0;
        }
        SparseVec(tf)
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        SparseVec(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.values().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .0
            .iter()
            .filter_map(|(k, v)| large.0.get(k).map(|w| v * w))
            .sum()
    }

    pub fn normalized(&self) -> Result<SparseVec> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(SparseVec(
            self.0.iter().map(|(k, v)| (k.clone(), v / norm)).collect(),
        ))
    }

    fn add_assign(&mut self, other: &SparseVec) {
        for (k, v) in &other.0 {
            *self.0.entry(k.clone()).or_insert(0.0) += v;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn cosine_similarity(a: &SparseVec, b: &SparseVec) -> Result<f64> {
    let (na, nb) = (a.norm_squared(), b.norm_squared());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((a.dot(b) / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct ClusterState {
    centroids: Vec<SparseVec>,
    sums: Vec<SparseVec>,
    member_counts: Vec<usize>,
    tau: f64,
}

impl ClusterState {
    pub fn new(tau: f64) -> Self {
        ClusterState {
            centroids: Vec::new(),
            sums: Vec::new(),
            member_counts: Vec::new(),
            tau,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn centroids(&self) -> &[SparseVec] {
        &self.centroids
    }

    pub fn member_counts(&self) -> &[usize] {
        &self.member_counts
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Places one unit vector and returns its cluster id.
    pub fn assign(&mut self, unit: &SparseVec) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (id, centroid) in self.centroids.iter().enumerate() {
            let sim = cosine_similarity(unit, centroid)?;
            // strict comparison keeps the lowest id among equals
            if best.is_none_or(|(_, s)| sim > s) {
                best = Some((id, sim));
            }
        }
        let chosen = match best {
            Some((id, sim)) if sim >= self.tau - SIMILARITY_SLACK => id,
            _ => {
                self.centroids.push(SparseVec::default());
                self.sums.push(SparseVec::default());
                self.member_counts.push(0);
                self.centroids.len() - 1
            }
        };
        self.sums[chosen].add_assign(unit);
        self.member_counts[chosen] += 1;
        self.centroids[chosen] = self.sums[chosen].normalized()?;
        Ok(chosen)
    }
}

/// Fills in missing event ids by single-pass clustering.
///
/// Items that already carry an event id keep it and are not clustered. New
/// cluster `c` receives event id `offset + c`, where `offset` is one past the
/// largest pre-existing id (0 if none), so fresh ids never collide.
pub fn assign_events(dataset: &Dataset, tau: f64) -> Result<(Dataset, ClusterState)> {
    let offset = dataset
        .items()
        .iter()
        .filter_map(|item| item.event_id)
        .max()
        .map_or(0, |m| m + 1);
    let mut state = ClusterState::new(tau);
    let mut items = dataset.items().to_vec();
    for item in items.iter_mut().filter(|item| item.event_id.is_none()) {
        let tokens = tokenize(&item.text);
        if tokens.is_empty() {
            return Err(Error::EmptyTokens(item.id.clone()));
        }
        let unit = SparseVec::term_frequencies(&tokens).normalized()?;
        let cluster = state.assign(&unit)?;
        item.event_id = Some(offset + cluster as u64);
    }
    Ok((Dataset::new(items)?, state))
}
