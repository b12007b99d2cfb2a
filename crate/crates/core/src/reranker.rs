//! Greedy re-ranking of a candidate set into a top-N list.
//!
//! At each step the remaining candidate maximizing
//! `(1 - lambda) * s(u, i) + lambda * div(i, RL)` is appended. Ties go to the
//! higher baseline score, then to the smaller item id.

use std::collections::HashSet;
use std::str::FromStr;

use thiserror::Error;

use crate::aspects::{AspectModel, ItemDistance};
use crate::factorizer::ScoredCandidates;

#[derive(Debug, Error, PartialEq)]
pub enum RerankError {
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("invalid re-ranking config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiversityKind {
    /// Baseline order, truncated.
    None,
    Mmr,
    /// xQuAD: intent-aware over item features.
    IntentAwareFeatures,
    /// SPAD: intent-aware over mined subprofiles.
    IntentAwareSubprofiles,
}

impl DiversityKind {
    pub fn algorithm_name(self) -> &'static str {
        match self {
            DiversityKind::None => "mf",
            DiversityKind::Mmr => "mmr",
            DiversityKind::IntentAwareFeatures => "xquad",
            DiversityKind::IntentAwareSubprofiles => "spad",
        }
    }
}

impl FromStr for DiversityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mf" | "none" | "baseline" => Ok(DiversityKind::None),
            "mmr" => Ok(DiversityKind::Mmr),
            "xquad" => Ok(DiversityKind::IntentAwareFeatures),
            "spad" => Ok(DiversityKind::IntentAwareSubprofiles),
            other => Err(format!("unknown algorithm {other:?} (expected mf, mmr, xquad or spad)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyConfig {
    pub lambda: f64,
    pub n: usize,
    pub kind: DiversityKind,
    /// Min-max scale `s(u, i)` over the candidate set before mixing.
    pub normalize_scores: bool,
}

impl GreedyConfig {
    pub fn new(kind: DiversityKind, lambda: f64, n: usize) -> Self {
        Self {
            lambda,
            n,
            kind,
            normalize_scores: false,
        }
    }

    pub fn validate(&self) -> Result<(), RerankError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(RerankError::InvalidConfig(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.n == 0 {
            return Err(RerankError::InvalidConfig("N must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    pub user: u32,
    items: Vec<u32>,
}

impl RankedList {
    /// Panics on duplicate items.
    pub fn new(user: u32, items: Vec<u32>) -> Self {
        let distinct: HashSet<u32> = items.iter().copied().collect();
        assert_eq!(distinct.len(), items.len(), "ranked list has duplicate items");
        Self { user, items }
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// 1-based position of `item`.
    pub fn rank(&self, item: u32) -> Option<usize> {
        self.items.iter().position(|&i| i == item).map(|p| p + 1)
    }

    /// The first `n` items.
    pub fn prefix(&self, n: usize) -> RankedList {
        RankedList {
            user: self.user,
            items: self.items[..n.min(self.items.len())].to_vec(),
        }
    }
}

pub fn objective(score: f64, diversity: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * score + lambda * diversity
}

/// MMR marginal diversity: the largest distance from `item` to a selected
/// item. An empty list scores 1.
pub fn mmr_div<D: ItemDistance + ?Sized>(item: u32, selected: &[u32], distance: &D) -> f64 {
    if selected.is_empty() {
        return 1.0;
    }
    selected
        .iter()
        .map(|&j| distance.distance(item, j))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Intent-aware marginal diversity, evaluated directly:
/// `sum_a p(a|u) p(i|u,a) prod_{j in RL} (1 - p(j|u,a))`.
pub fn ia_div(item: u32, selected: &[u32], aspects: &AspectModel) -> f64 {
    aspects
        .aspects()
        .iter()
        .map(|a| {
            let untouched = selected.iter().fold(1.0, |acc, &j| acc * (1.0 - a.prob(j)));
            a.weight * a.prob(item) * untouched
        })
        .sum()
}

/// Marginal diversity of a candidate given the items selected so far.
pub trait Diversity {
    fn gain(&self, item: u32) -> f64;
    /// Records that `item` was appended to the list.
    fn select(&mut self, item: u32);
}

pub struct NoDiversity;

impl Diversity for NoDiversity {
    fn gain(&self, _item: u32) -> f64 {
        0.0
    }

    fn select(&mut self, _item: u32) {}
}

pub struct MmrDiversity<'a, D: ?Sized> {
    distance: &'a D,
    selected: Vec<u32>,
}

impl<'a, D: ItemDistance + ?Sized> MmrDiversity<'a, D> {
    pub fn new(distance: &'a D) -> Self {
        Self {
            distance,
            selected: Vec::new(),
        }
    }
}

impl<D: ItemDistance + ?Sized> Diversity for MmrDiversity<'_, D> {
    fn gain(&self, item: u32) -> f64 {
        mmr_div(item, &self.selected, self.distance)
    }

    fn select(&mut self, item: u32) {
        self.selected.push(item);
    }
}

/// Intent-aware diversity with a running per-aspect product over the list,
/// so each gain costs O(|aspects|).
pub struct IntentAwareDiversity<'a> {
    aspects: &'a AspectModel,
    untouched: Vec<f64>,
}

impl<'a> IntentAwareDiversity<'a> {
    pub fn new(aspects: &'a AspectModel) -> Self {
        Self {
            aspects,
            untouched: vec![1.0; aspects.len()],
        }
    }
}

impl Diversity for IntentAwareDiversity<'_> {
    fn gain(&self, item: u32) -> f64 {
        self.aspects
            .aspects()
            .iter()
            .zip(&self.untouched)
            .map(|(a, rest)| a.weight * a.prob(item) * rest)
            .sum()
    }

    fn select(&mut self, item: u32) {
        for (a, rest) in self.aspects.aspects().iter().zip(self.untouched.iter_mut()) {
            *rest *= 1.0 - a.prob(item);
        }
    }
}

/// Scores as mixed into the objective, aligned with `rs.entries()`.
pub fn mixing_scores(rs: &ScoredCandidates, normalize: bool) -> Vec<f64> {
    let raw = rs.entries().iter().map(|e| e.1);
    if !normalize {
        return raw.collect();
    }
    let (lo, hi) = raw
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    let span = hi - lo;
    raw.map(|s| if span > 0.0 { (s - lo) / span } else { 1.0 }).collect()
}

/// Greedily builds the top-`config.n` list from `rs`.
pub fn greedy_rerank(
    rs: &ScoredCandidates,
    config: &GreedyConfig,
    diversity: &mut dyn Diversity,
) -> Result<RankedList, RerankError> {
    config.validate()?;
    if rs.is_empty() {
        return Err(RerankError::EmptyCandidates);
    }
    let take = config.n.min(rs.len());
    if config.kind == DiversityKind::None {
        return Ok(RankedList::new(rs.user, rs.items().take(take).collect()));
    }
    let scores = mixing_scores(rs, config.normalize_scores);
    let mut remaining: Vec<(u32, f64)> = rs.items().zip(scores).collect();
    let mut out = Vec::with_capacity(take);
    for _ in 0..take {
        let mut best = 0;
        let mut best_key = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (k, &(item, s)) in remaining.iter().enumerate() {
            let key = (objective(s, diversity.gain(item), config.lambda), s);
            let better = match key.0.total_cmp(&best_key.0).then(key.1.total_cmp(&best_key.1)) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Equal => item < remaining[best].0,
                std::cmp::Ordering::Less => false,
            };
            if k == 0 || better {
                best = k;
                best_key = key;
            }
        }
        let (item, _) = remaining.remove(best);
        diversity.select(item);
        out.push(item);
    }
    Ok(RankedList::new(rs.user, out))
}
