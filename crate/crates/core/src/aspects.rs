//! Item distances, item-item similarity, and per-user aspect models.
//!
//! Two aspect families feed both the intent-aware re-rankers and α-nDCG:
//!
//! * **features**: every item feature (genre) the user's liked train items
//!   carry; `p(a|u)` is proportional to how many liked items carry `a`.
//! * **subprofiles**: set-maximal groups of liked items mined from item
//!   neighbourhoods; `p(a|u)` is proportional to subprofile size.
//!
//! In both families `p(i|u,a)` is the candidate's (non-negative part of the)
//! baseline score, weighted by aspect affinity, normalized over the candidate
//! set. The estimators live behind [`AspectModel`] so alternatives can be
//! swapped without touching the re-rankers or metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::Arc;

use crate::corpus::{ItemFeatures, Rating};
use crate::factorizer::ScoredCandidates;
use crate::par::{self, Execution};

/// A distance in `[0, 1]` between two items.
pub trait ItemDistance {
    fn distance(&self, a: u32, b: u32) -> f64;
}

/// Binary feature vectors over the catalogue vocabulary; distance is one
/// minus their cosine.
#[derive(Clone, Debug, Default)]
pub struct DistanceModel {
    vocabulary: Vec<String>,
    item_features: HashMap<u32, Vec<usize>>,
    members: Vec<Arc<BTreeSet<u32>>>,
    titles: HashMap<u32, String>,
}

impl DistanceModel {
    pub fn new(catalogue: &[ItemFeatures]) -> Self {
        let vocabulary: Vec<String> = catalogue
            .iter()
            .flat_map(|it| it.features.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&str, usize> =
            vocabulary.iter().enumerate().map(|(k, f)| (f.as_str(), k)).collect();
        let mut members = vec![BTreeSet::new(); vocabulary.len()];
        let mut item_features = HashMap::new();
        let mut titles = HashMap::new();
        for it in catalogue {
            let mut fs: Vec<usize> = it.features.iter().map(|f| index[f.as_str()]).collect();
            fs.sort_unstable();
            for &f in &fs {
                members[f].insert(it.item);
            }
            item_features.insert(it.item, fs);
            titles.insert(it.item, it.title.clone());
        }
        Self {
            vocabulary,
            item_features,
            members: members.into_iter().map(Arc::new).collect(),
            titles,
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// Sorted vocabulary indices of the item's features; empty when unknown.
    pub fn features_of(&self, item: u32) -> &[usize] {
        self.item_features.get(&item).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Items carrying vocabulary feature `f`.
    pub fn members(&self, f: usize) -> &Arc<BTreeSet<u32>> {
        &self.members[f]
    }

    pub fn title(&self, item: u32) -> Option<&str> {
        self.titles.get(&item).map(String::as_str)
    }
}

impl ItemDistance for DistanceModel {
    /// Featureless or unknown items are maximally distant from everything
    /// except themselves.
    fn distance(&self, a: u32, b: u32) -> f64 {
        if a == b {
            return 0.0;
        }
        let (fa, fb) = (self.features_of(a), self.features_of(b));
        if fa.is_empty() || fb.is_empty() {
            return 1.0;
        }
        let shared = sorted_intersection_len(fa, fb);
        let cosine = shared as f64 / ((fa.len() * fb.len()) as f64).sqrt();
        (1.0 - cosine).clamp(0.0, 1.0)
    }
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Explicit symmetric distance table, mostly for synthetic instances.
#[derive(Clone, Debug)]
pub struct PairwiseDistances {
    index: HashMap<u32, usize>,
    values: Vec<f64>,
}

impl PairwiseDistances {
    /// `values` is row-major `ids.len() x ids.len()`; the diagonal is ignored.
    pub fn new(ids: &[u32], values: Vec<f64>) -> Self {
        assert_eq!(values.len(), ids.len() * ids.len(), "distance table shape");
        Self {
            index: ids.iter().enumerate().map(|(k, &i)| (i, k)).collect(),
            values,
        }
    }
}

impl ItemDistance for PairwiseDistances {
    fn distance(&self, a: u32, b: u32) -> f64 {
        if a == b {
            return 0.0;
        }
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&x), Some(&y)) => self.values[x * self.index.len() + y],
            _ => 1.0,
        }
    }
}

/// Symmetric item-item similarity with ranked neighbour lists.
pub trait ItemSimilarity {
    fn similarity(&self, a: u32, b: u32) -> f64;
    /// Up to `k` other items with positive similarity to `item`, by
    /// descending similarity then ascending id.
    fn nearest(&self, item: u32, k: usize) -> Vec<u32>;
}

/// Dense item-item cosine similarity over co-rating vectors.
#[derive(Clone, Debug)]
pub struct SimilarityMatrix {
    ids: Vec<u32>,
    index: HashMap<u32, usize>,
    values: Vec<f64>,
    /// Cached neighbour order, truncated to `neighbor_cap` per item.
    neighbors: Vec<Vec<u32>>,
    neighbor_cap: usize,
}

impl SimilarityMatrix {
    /// Cosine between items' rating vectors over users, from `train`.
    /// Neighbour lists are cached up to `neighbor_cap` entries per item.
    pub fn from_ratings(train: &[Rating], neighbor_cap: usize, exec: Execution) -> Self {
        let ids: Vec<u32> = train.iter().map(|r| r.item).collect::<BTreeSet<_>>().into_iter().collect();
        let index: HashMap<u32, usize> = ids.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut by_user: BTreeMap<u32, Vec<(usize, f64)>> = BTreeMap::new();
        for r in train {
            by_user.entry(r.user).or_default().push((index[&r.item], f64::from(r.value)));
        }
        let user_rows: Vec<Vec<(usize, f64)>> = by_user.into_values().collect();
        let mut item_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ids.len()];
        for (u, row) in user_rows.iter().enumerate() {
            for &(i, v) in row {
                item_cols[i].push((u, v));
            }
        }
        let norms: Vec<f64> = item_cols
            .iter()
            .map(|c| c.iter().map(|(_, v)| v * v).sum::<f64>().sqrt())
            .collect();
        let n = ids.len();
        let rows: Vec<usize> = (0..n).collect();
        // Each row accumulates over co-raters in ascending user order, so
        // values[i][j] and values[j][i] sum identical terms in identical order.
        let dense = par::map(exec, &rows, |&i| {
            let mut acc = vec![0.0; n];
            for &(u, vi) in &item_cols[i] {
                for &(j, vj) in &user_rows[u] {
                    acc[j] += vi * vj;
                }
            }
            for (j, a) in acc.iter_mut().enumerate() {
                let denom = norms[i] * norms[j];
                *a = if denom > 0.0 { *a / denom } else { 0.0 };
            }
            acc[i] = 1.0;
            acc
        });
        Self::assemble(ids, index, dense.concat(), neighbor_cap, exec)
    }

    /// From an explicit row-major table (assumed symmetric).
    pub fn from_dense(ids: &[u32], values: Vec<f64>, neighbor_cap: usize) -> Self {
        assert_eq!(values.len(), ids.len() * ids.len(), "similarity table shape");
        let index = ids.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        Self::assemble(ids.to_vec(), index, values, neighbor_cap, Execution::Sequential)
    }

    fn assemble(
        ids: Vec<u32>,
        index: HashMap<u32, usize>,
        values: Vec<f64>,
        neighbor_cap: usize,
        exec: Execution,
    ) -> Self {
        let mut m = Self {
            ids,
            index,
            values,
            neighbors: Vec::new(),
            neighbor_cap,
        };
        let rows: Vec<usize> = (0..m.ids.len()).collect();
        m.neighbors = par::map(exec, &rows, |&i| m.ranked_row(i, neighbor_cap));
        m
    }

    fn ranked_row(&self, i: usize, k: usize) -> Vec<u32> {
        let n = self.ids.len();
        let row = &self.values[i * n..(i + 1) * n];
        let mut cand: Vec<(u32, f64)> = (0..n)
            .filter(|&j| j != i && row[j] > 0.0)
            .map(|j| (self.ids[j], row[j]))
            .collect();
        cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        cand.truncate(k);
        cand.into_iter().map(|c| c.0).collect()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }
}

impl ItemSimilarity for SimilarityMatrix {
    fn similarity(&self, a: u32, b: u32) -> f64 {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&x), Some(&y)) => self.values[x * self.ids.len() + y],
            _ => 0.0,
        }
    }

    fn nearest(&self, item: u32, k: usize) -> Vec<u32> {
        let Some(&i) = self.index.get(&item) else {
            return Vec::new();
        };
        if k <= self.neighbor_cap {
            self.neighbors[i].iter().take(k).copied().collect()
        } else {
            self.ranked_row(i, k)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AspectLabel {
    Feature(String),
    Subprofile(Vec<u32>),
}

impl std::fmt::Display for AspectLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AspectLabel::Feature(s) => f.write_str(s),
            AspectLabel::Subprofile(items) => {
                let parts: Vec<String> = items.iter().map(u32::to_string).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

/// One aspect of a user's interests.
#[derive(Clone, Debug)]
pub struct Aspect {
    pub label: AspectLabel,
    /// `p(a|u)`.
    pub weight: f64,
    /// Items that "have" this aspect.
    members: Arc<BTreeSet<u32>>,
    /// `p(i|u,a)` for candidates; absent items have probability 0.
    probs: BTreeMap<u32, f64>,
}

impl Aspect {
    /// Probabilities for non-members are dropped.
    pub fn new(label: AspectLabel, weight: f64, members: Arc<BTreeSet<u32>>, probs: BTreeMap<u32, f64>) -> Self {
        let probs = probs
            .into_iter()
            .filter(|(i, p)| *p > 0.0 && members.contains(i))
            .collect();
        Self {
            label,
            weight,
            members,
            probs,
        }
    }

    pub fn covers(&self, item: u32) -> bool {
        self.members.contains(&item)
    }

    pub fn prob(&self, item: u32) -> f64 {
        self.probs.get(&item).copied().unwrap_or(0.0)
    }

    pub fn members(&self) -> &BTreeSet<u32> {
        &self.members
    }
}

/// A user's aspect distribution `p(a|u)` with per-aspect item probabilities.
#[derive(Clone, Debug)]
pub struct AspectModel {
    pub user: u32,
    aspects: Vec<Aspect>,
}

impl AspectModel {
    pub fn new(user: u32, aspects: Vec<Aspect>) -> Self {
        Self { user, aspects }
    }

    pub fn aspects(&self) -> &[Aspect] {
        &self.aspects
    }

    pub fn len(&self) -> usize {
        self.aspects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aspects.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.aspects.iter().map(|a| a.weight).sum()
    }
}

/// Non-negative part of the baseline score.
fn relevance_mass(score: f64) -> f64 {
    score.max(0.0)
}

/// Normalizes `affinity(i) * s(u,i)` over member candidates of one aspect.
fn candidate_probs(
    rs: &ScoredCandidates,
    members: &BTreeSet<u32>,
    affinity: impl Fn(u32) -> f64,
) -> BTreeMap<u32, f64> {
    let raw: Vec<(u32, f64)> = rs
        .entries()
        .iter()
        .filter(|(i, _)| members.contains(i))
        .map(|&(i, s)| (i, relevance_mass(s) * affinity(i).max(0.0)))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return BTreeMap::new();
    }
    raw.into_iter().map(|(i, w)| (i, w / total)).collect()
}

/// Feature aspects (xQuAD's family) for one user.
pub fn feature_aspects(
    user: u32,
    distance: &DistanceModel,
    liked: &BTreeSet<u32>,
    rs: &ScoredCandidates,
) -> AspectModel {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in liked {
        for &f in distance.features_of(i) {
            *counts.entry(f).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    let aspects = counts
        .into_iter()
        .map(|(f, c)| {
            let members = Arc::clone(distance.members(f));
            let probs = candidate_probs(rs, &members, |_| 1.0);
            Aspect::new(
                AspectLabel::Feature(distance.vocabulary()[f].clone()),
                c as f64 / total as f64,
                members,
                probs,
            )
        })
        .collect();
    AspectModel::new(user, aspects)
}

/// A coherent group of one user's liked items.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Subprofile {
    pub user: u32,
    pub members: BTreeSet<u32>,
}

/// Mines set-maximal subprofiles from a liked profile.
///
/// Each liked item seeds `{i}` plus the liked items among its `knn_k`
/// nearest neighbours; candidates contained in another candidate are
/// dropped. Output is sorted by member list.
pub fn mine_subprofiles<S: ItemSimilarity + ?Sized>(
    user: u32,
    liked: &BTreeSet<u32>,
    similarity: &S,
    knn_k: usize,
) -> Vec<Subprofile> {
    let mut candidates: Vec<BTreeSet<u32>> = liked
        .iter()
        .map(|&i| {
            let mut s: BTreeSet<u32> = similarity
                .nearest(i, knn_k)
                .into_iter()
                .filter(|j| liked.contains(j))
                .collect();
            s.insert(i);
            s
        })
        .collect();
    candidates.sort();
    candidates.dedup();
    // Larger sets first so a subset test only needs to look at kept sets.
    let mut by_size: Vec<&BTreeSet<u32>> = candidates.iter().collect();
    by_size.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let mut kept: Vec<&BTreeSet<u32>> = Vec::new();
    for c in by_size {
        if !kept.iter().any(|k| c.is_subset(k)) {
            kept.push(c);
        }
    }
    let mut out: Vec<Subprofile> = kept
        .into_iter()
        .map(|m| Subprofile {
            user,
            members: m.clone(),
        })
        .collect();
    out.sort();
    out
}

/// Subprofile aspects (SPAD's family) for one user.
///
/// An item has subprofile aspect `a` when it belongs to `a` or is among the
/// `knn_k` nearest neighbours of one of its members. For such candidates,
/// `p(i|u,a)` is proportional to `s(u,i)` times the maximum similarity
/// between `i` and a member of `a`.
pub fn subprofile_aspects<S: ItemSimilarity + ?Sized>(
    user: u32,
    subprofiles: &[Subprofile],
    rs: &ScoredCandidates,
    similarity: &S,
    knn_k: usize,
) -> AspectModel {
    let total: usize = subprofiles.iter().map(|s| s.members.len()).sum();
    let aspects = subprofiles
        .iter()
        .map(|sp| {
            let mut members = sp.members.clone();
            for &m in &sp.members {
                members.extend(similarity.nearest(m, knn_k));
            }
            let probs = candidate_probs(rs, &members, |i| {
                sp.members
                    .iter()
                    .map(|&m| similarity.similarity(i, m))
                    .fold(0.0, f64::max)
            });
            Aspect::new(
                AspectLabel::Subprofile(sp.members.iter().copied().collect()),
                sp.members.len() as f64 / total as f64,
                Arc::new(members),
                probs,
            )
        })
        .collect();
    AspectModel::new(user, aspects)
}

/// Both aspect families for one user, plus the mined subprofiles.
#[derive(Clone, Debug)]
pub struct UserAspects {
    pub features: AspectModel,
    pub subprofiles: AspectModel,
    pub mined: Vec<Subprofile>,
}

impl UserAspects {
    pub fn build<S: ItemSimilarity + ?Sized>(
        user: u32,
        liked: &BTreeSet<u32>,
        rs: &ScoredCandidates,
        distance: &DistanceModel,
        similarity: &S,
        knn_k: usize,
    ) -> Self {
        let mined = mine_subprofiles(user, liked, similarity, knn_k);
        Self {
            features: feature_aspects(user, distance, liked, rs),
            subprofiles: subprofile_aspects(user, &mined, rs, similarity, knn_k),
            mined,
        }
    }
}

/// Debug dump, one line per subprofile: `user_id: {i1, i2, ...}`.
pub fn write_subprofiles<W: Write>(mut w: W, subprofiles: &[Subprofile]) -> std::io::Result<()> {
    for sp in subprofiles {
        let items: Vec<String> = sp.members.iter().map(u32::to_string).collect();
        writeln!(w, "{}: {{{}}}", sp.user, items.join(", "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn item(id: u32, feats: &[&str]) -> ItemFeatures {
        ItemFeatures {
            item: id,
            title: format!("item {id}"),
            features: feats.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn candidates(user: u32, entries: &[(u32, f64)]) -> ScoredCandidates {
        ScoredCandidates::new(user, entries.to_vec())
    }

    /// Neighbour table given by hand; similarity 1 for listed pairs.
    struct Table(BTreeMap<u32, Vec<u32>>);

    impl ItemSimilarity for Table {
        fn similarity(&self, a: u32, b: u32) -> f64 {
            let listed = |x: u32, y: u32| self.0.get(&x).is_some_and(|v| v.contains(&y));
            if a == b || listed(a, b) || listed(b, a) {
                1.0
            } else {
                0.0
            }
        }
        fn nearest(&self, item: u32, k: usize) -> Vec<u32> {
            self.0.get(&item).map(|v| v.iter().take(k).copied().collect()).unwrap_or_default()
        }
    }

    #[test]
    fn distance_examples() {
        let d = DistanceModel::new(&[
            item(1, &["Action", "Comedy"]),
            item(2, &["Action"]),
            item(3, &["Action", "Comedy"]),
            item(4, &["Drama"]),
            item(5, &[]),
        ]);
        assert_eq!(d.distance(1, 3), 0.0);
        assert_eq!(d.distance(2, 4), 1.0);
        assert!((d.distance(1, 2) - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!((d.distance(1, 2) - 0.29289).abs() < 1e-5);
        assert_eq!(d.distance(5, 1), 1.0);
        assert_eq!(d.distance(5, 5), 0.0);
        assert_eq!(d.distance(99, 1), 1.0);
    }

    #[test]
    fn feature_weights_follow_liked_counts() {
        let d = DistanceModel::new(&[
            item(1, &["Action"]),
            item(2, &["Action"]),
            item(3, &["Action"]),
            item(4, &["Comedy"]),
            item(10, &["Action"]),
            item(11, &["Drama"]),
        ]);
        let rs = candidates(7, &[(10, 4.0), (11, 3.0)]);
        let m = feature_aspects(7, &d, &[1, 2, 3, 4].into(), &rs);
        let w: Vec<(String, f64)> = m.aspects().iter().map(|a| (a.label.to_string(), a.weight)).collect();
        assert_eq!(w, vec![("Action".to_string(), 0.75), ("Comedy".to_string(), 0.25)]);
        let action = &m.aspects()[0];
        assert_eq!(action.prob(10), 1.0);
        assert_eq!(action.prob(11), 0.0);
        assert_eq!(m.aspects()[1].prob(10), 0.0);
    }

    #[test]
    fn featureless_likes_give_no_aspects() {
        let d = DistanceModel::new(&[item(1, &[]), item(2, &["A"])]);
        let m = feature_aspects(1, &d, &[1].into(), &candidates(1, &[(2, 3.0)]));
        assert!(m.is_empty());
    }

    #[test]
    fn item_probs_normalize_over_candidates() {
        let d = DistanceModel::new(&[item(1, &["A"]), item(2, &["A"]), item(3, &["A"]), item(4, &["B"])]);
        let rs = candidates(1, &[(2, 3.0), (3, 1.0), (4, 5.0)]);
        let m = feature_aspects(1, &d, &[1].into(), &rs);
        assert_eq!(m.aspects()[0].prob(2), 0.75);
        assert_eq!(m.aspects()[0].prob(3), 0.25);
    }

    #[test]
    fn mining_hand_trace() {
        let (a, b, c) = (1, 2, 3);
        let sim = Table(BTreeMap::from([(a, vec![b, 50]), (b, vec![a]), (c, vec![60])]));
        let got = mine_subprofiles(9, &[a, b, c].into(), &sim, 10);
        let sets: Vec<BTreeSet<u32>> = got.into_iter().map(|s| s.members).collect();
        assert_eq!(sets, vec![BTreeSet::from([a, b]), BTreeSet::from([c])]);
    }

    #[test]
    fn mining_trivial_profiles() {
        let sim = Table(BTreeMap::new());
        let one = mine_subprofiles(1, &[4].into(), &sim, 10);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].members, BTreeSet::from([4]));
        assert!(mine_subprofiles(1, &BTreeSet::new(), &sim, 10).is_empty());
    }

    #[test]
    fn subprofile_weights_and_probs() {
        let sim = Table(BTreeMap::from([(1, vec![2, 10]), (2, vec![1]), (3, vec![1, 11])]));
        let sps = vec![
            Subprofile { user: 1, members: [1, 2, 3].into() },
            Subprofile { user: 1, members: [4].into() },
        ];
        let rs = candidates(1, &[(10, 2.0), (11, 2.0), (12, 5.0)]);
        let m = subprofile_aspects(1, &sps, &rs, &sim, 10);
        assert_eq!(m.aspects()[0].weight, 0.75);
        assert_eq!(m.aspects()[1].weight, 0.25);
        assert_eq!(m.aspects()[0].prob(10), 0.5);
        assert_eq!(m.aspects()[0].prob(11), 0.5);
        assert_eq!(m.aspects()[0].prob(12), 0.0);
        assert!(m.aspects()[1].members().len() == 1);
        assert_eq!(m.aspects()[1].prob(12), 0.0);

        let single = subprofile_aspects(1, &sps[..1], &rs, &sim, 10);
        assert_eq!(single.aspects()[0].weight, 1.0);
    }

    #[test]
    fn co_rating_cosine() {
        let r = |user, item, value| Rating { user, item, value, timestamp: 0 };
        // item 1: (u1=5, u2=3); item 2: (u1=5, u2=3); item 3: (u3=4)
        let train = vec![r(1, 1, 5), r(2, 1, 3), r(1, 2, 5), r(2, 2, 3), r(3, 3, 4), r(1, 4, 2), r(3, 4, 2)];
        let m = SimilarityMatrix::from_ratings(&train, 5, Execution::Sequential);
        assert!((m.similarity(1, 2) - 1.0).abs() < 1e-12);
        assert_eq!(m.similarity(1, 3), 0.0);
        // item 4 = (2, 0, 2); item 1 = (5, 3, 0): 10 / (sqrt(8) * sqrt(34))
        assert!((m.similarity(1, 4) - 10.0 / (8f64.sqrt() * 34f64.sqrt())).abs() < 1e-12);
        assert_eq!(m.nearest(1, 5), vec![2, 4]);
        assert_eq!(m.nearest(3, 5), vec![4]);
        let par = SimilarityMatrix::from_ratings(&train, 5, Execution::Parallel);
        assert_eq!(par.values, m.values);
    }

    #[test]
    fn subprofile_dump_format() {
        let mut buf = Vec::new();
        write_subprofiles(&mut buf, &[Subprofile { user: 3, members: [5, 1].into() }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3: {1, 5}\n");
    }

    fn arb_catalogue() -> impl Strategy<Value = Vec<ItemFeatures>> {
        proptest::collection::vec(proptest::collection::btree_set(0u8..6, 0..4), 2..12).prop_map(|fs| {
            fs.into_iter()
                .enumerate()
                .map(|(k, f)| ItemFeatures {
                    item: k as u32 + 1,
                    title: String::new(),
                    features: f.into_iter().map(|x| format!("f{x}")).collect(),
                })
                .collect()
        })
    }

    fn arb_ratings() -> impl Strategy<Value = Vec<Rating>> {
        proptest::collection::btree_map((1u32..10, 1u32..20), 1u8..=5, 5..80).prop_map(|m| {
            m.into_iter()
                .map(|((user, item), value)| Rating { user, item, value, timestamp: 0 })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn distance_is_a_symmetric_unit_interval(cat in arb_catalogue()) {
            let d = DistanceModel::new(&cat);
            for a in &cat {
                prop_assert_eq!(d.distance(a.item, a.item), 0.0);
                for b in &cat {
                    let x = d.distance(a.item, b.item);
                    prop_assert!((0.0..=1.0).contains(&x));
                    prop_assert_eq!(x, d.distance(b.item, a.item));
                }
            }
        }

        #[test]
        fn aspect_weights_sum_to_one(cat in arb_catalogue(), ratings in arb_ratings(), knn in 1usize..6) {
            let d = DistanceModel::new(&cat);
            let sim = SimilarityMatrix::from_ratings(&ratings, knn, Execution::Sequential);
            let rs = ScoredCandidates::new(1, cat.iter().map(|it| (it.item, 1.0 + f64::from(it.item % 4))).collect());
            for user in 1..10u32 {
                let liked: BTreeSet<u32> = ratings.iter().filter(|r| r.user == user && r.value >= 4).map(|r| r.item).collect();
                let f = feature_aspects(user, &d, &liked, &rs);
                let sps = mine_subprofiles(user, &liked, &sim, knn);
                let s = subprofile_aspects(user, &sps, &rs, &sim, knn);
                for m in [&f, &s] {
                    if !m.is_empty() {
                        prop_assert!((m.weight_sum() - 1.0).abs() <= 1e-9);
                    }
                    for a in m.aspects() {
                        let mass: f64 = rs.items().map(|i| a.prob(i)).sum();
                        prop_assert!(mass == 0.0 || (mass - 1.0).abs() < 1e-9);
                        for i in rs.items() {
                            let p = a.prob(i);
                            prop_assert!((0.0..=1.0).contains(&p));
                            if !a.covers(i) { prop_assert_eq!(p, 0.0); }
                        }
                    }
                }
            }
        }

        #[test]
        fn subprofiles_are_maximal_and_deterministic(ratings in arb_ratings(), knn in 1usize..6) {
            let sim = SimilarityMatrix::from_ratings(&ratings, knn, Execution::Sequential);
            for user in 1..10u32 {
                let liked: BTreeSet<u32> = ratings.iter().filter(|r| r.user == user && r.value >= 3).map(|r| r.item).collect();
                let sps = mine_subprofiles(user, &liked, &sim, knn);
                prop_assert_eq!(&sps, &mine_subprofiles(user, &liked, &sim, knn));
                for (x, a) in sps.iter().enumerate() {
                    prop_assert!(!a.members.is_empty());
                    prop_assert!(a.members.is_subset(&liked));
                    for (y, b) in sps.iter().enumerate() {
                        if x != y { prop_assert!(!a.members.is_subset(&b.members)); }
                    }
                }
                let covered: BTreeSet<u32> = sps.iter().flat_map(|s| s.members.iter().copied()).collect();
                prop_assert_eq!(covered, liked);
            }
        }

        #[test]
        fn similarity_is_symmetric(ratings in arb_ratings()) {
            let m = SimilarityMatrix::from_ratings(&ratings, 3, Execution::Sequential);
            for &a in m.ids() {
                for &b in m.ids() {
                    prop_assert_eq!(m.similarity(a, b), m.similarity(b, a));
                }
            }
        }
    }
}
