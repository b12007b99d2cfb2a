//! Per-list diversity and relevance metrics.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::aspects::{AspectModel, ItemDistance};
use crate::reranker::RankedList;

/// Redundancy penalty used for α-nDCG unless configured otherwise.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("list is empty")]
    EmptyList,
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
}

/// The six metrics reported per (algorithm, lambda, N).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Ild,
    AlphaNdcgFeatures,
    AlphaNdcgSubprofiles,
    Precision,
    Mrr,
    OneCall,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Ild,
        Metric::AlphaNdcgFeatures,
        Metric::AlphaNdcgSubprofiles,
        Metric::Precision,
        Metric::Mrr,
        Metric::OneCall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ild => "ild",
            Metric::AlphaNdcgFeatures => "alpha_ndcg_features",
            Metric::AlphaNdcgSubprofiles => "alpha_ndcg_subprofiles",
            Metric::Precision => "precision",
            Metric::Mrr => "mrr",
            Metric::OneCall => "one_call",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn is_diversity(self) -> bool {
        matches!(self, Metric::Ild | Metric::AlphaNdcgFeatures | Metric::AlphaNdcgSubprofiles)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Intra-list diversity: mean distance over unordered pairs. Singletons
/// score 0.
pub fn ild<D: ItemDistance + ?Sized>(list: &RankedList, distance: &D) -> Result<f64, MetricError> {
    let items = list.items();
    match items.len() {
        0 => Err(MetricError::EmptyList),
        1 => Ok(0.0),
        n => {
            let mut sum = 0.0;
            for a in 0..n {
                for b in a + 1..n {
                    sum += distance.distance(items[a], items[b]);
                }
            }
            Ok(sum / (n * (n - 1) / 2) as f64)
        }
    }
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Unnormalized α-DCG of `items`, where `covers(i, a)` is `rel(i|u,a)`.
fn alpha_dcg(items: &[u32], aspect_count: usize, alpha: f64, covers: &dyn Fn(u32, usize) -> bool) -> f64 {
    let mut novelty = vec![1.0; aspect_count];
    let mut total = 0.0;
    for (k, &i) in items.iter().enumerate() {
        let mut gain = 0.0;
        for (a, nov) in novelty.iter_mut().enumerate() {
            if covers(i, a) {
                gain += *nov;
                *nov *= 1.0 - alpha;
            }
        }
        total += discount(k + 1) * gain;
    }
    total
}

/// Greedy approximation of the ideal α-DCG over `pool`, `len` positions long.
fn greedy_ideal_dcg(
    pool: &BTreeSet<u32>,
    len: usize,
    aspect_count: usize,
    alpha: f64,
    covers: &dyn Fn(u32, usize) -> bool,
) -> f64 {
    let mut remaining: Vec<u32> = pool.iter().copied().collect();
    let mut novelty = vec![1.0; aspect_count];
    let mut total = 0.0;
    for rank in 1..=len {
        if remaining.is_empty() {
            break;
        }
        let gain_of = |i: u32, nov: &[f64]| -> f64 {
            nov.iter().enumerate().filter(|(a, _)| covers(i, *a)).map(|(_, n)| n).sum()
        };
        // Strictly-greater keeps the smallest id among ties.
        let (best, best_gain) = remaining
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, gain_of(i, &novelty)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let item = remaining.remove(best);
        for (a, nov) in novelty.iter_mut().enumerate() {
            if covers(item, a) {
                *nov *= 1.0 - alpha;
            }
        }
        total += discount(rank) * best_gain;
    }
    total
}

/// α-nDCG of `list` over the user's aspects.
///
/// `rel(i|u,a) = 1` iff `i` is relevant and has aspect `a`. The ideal is built
/// greedily from the relevant items to the list's length; since greedy need
/// not be optimal, the normalizer is the larger of that ideal and the list's
/// own α-DCG, keeping the score in `[0, 1]`. Users without aspects or
/// without relevant coverage score 0.
pub fn alpha_ndcg(
    list: &RankedList,
    aspects: &AspectModel,
    relevant: &BTreeSet<u32>,
    alpha: f64,
) -> Result<f64, MetricError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MetricError::InvalidAlpha(alpha));
    }
    let covers = |i: u32, a: usize| relevant.contains(&i) && aspects.aspects()[a].covers(i);
    let n = aspects.len();
    let dcg = alpha_dcg(list.items(), n, alpha, &covers);
    let ideal = greedy_ideal_dcg(relevant, list.len(), n, alpha, &covers).max(dcg);
    Ok(if ideal > 0.0 { dcg / ideal } else { 0.0 })
}

fn hits(list: &RankedList, relevant: &BTreeSet<u32>) -> usize {
    list.items().iter().filter(|i| relevant.contains(i)).count()
}

pub fn precision(list: &RankedList, relevant: &BTreeSet<u32>) -> f64 {
    if list.is_empty() {
        return 0.0;
    }
    hits(list, relevant) as f64 / list.len() as f64
}

/// Reciprocal rank of the first relevant item within the list.
pub fn mrr(list: &RankedList, relevant: &BTreeSet<u32>) -> f64 {
    list.items()
        .iter()
        .position(|i| relevant.contains(i))
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

pub fn one_call(list: &RankedList, relevant: &BTreeSet<u32>) -> u8 {
    u8::from(list.items().iter().any(|i| relevant.contains(i)))
}
