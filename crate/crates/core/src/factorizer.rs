//! Biased matrix factorization baseline and candidate generation.
//!
//! `s(u, i) = mu + b_u + b_i + <p_u, q_i>`, fit by plain sequential SGD on
//! squared error with L2 regularization. Everything is seeded: factor
//! initialization draws from N(0, 0.1) and the per-epoch visiting order is a
//! seeded shuffle, so a given corpus and config always yield the same model
//! bit for bit.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::corpus::Rating;

const CHECKPOINT_MAGIC: &str = "diverank-mf v1";
const INIT_STD: f64 = 0.1;

#[derive(Debug, Error)]
pub enum FactorizerError {
    #[error("invalid factorizer config: {0}")]
    InvalidConfig(String),
    #[error("no training ratings")]
    EmptyTrain,
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("candidate pool contains item {item} already rated by user {user} in train")]
    SeenItemInPool { user: u32, item: u32 },
    #[error("checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfConfig {
    pub dims: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            dims: 32,
            learning_rate: 0.01,
            regularization: 0.05,
            epochs: 30,
            seed: 42,
        }
    }
}

impl MfConfig {
    pub fn validate(&self) -> Result<(), FactorizerError> {
        if self.dims == 0 {
            return Err(FactorizerError::InvalidConfig("dims must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(FactorizerError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(FactorizerError::InvalidConfig(format!(
                "regularization must be non-negative, got {}",
                self.regularization
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfModel {
    dims: usize,
    global_mean: f64,
    users: Vec<u32>,
    items: Vec<u32>,
    user_index: HashMap<u32, usize>,
    item_index: HashMap<u32, usize>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    /// Row-major, `users.len() x dims`.
    user_factors: Vec<f64>,
    /// Row-major, `items.len() x dims`.
    item_factors: Vec<f64>,
}

/// Gradient of the per-rating regularized loss
/// `0.5 * e^2 + 0.5 * reg * (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingGradient {
    pub user_bias: f64,
    pub item_bias: f64,
    pub user_factor: Vec<f64>,
    pub item_factor: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn index_of(ids: &[u32]) -> HashMap<u32, usize> {
    ids.iter().enumerate().map(|(k, &id)| (id, k)).collect()
}

impl MfModel {
    /// Assembles a model from explicit parameters. Factor tables are row-major.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dims: usize,
        global_mean: f64,
        users: Vec<u32>,
        user_bias: Vec<f64>,
        user_factors: Vec<f64>,
        items: Vec<u32>,
        item_bias: Vec<f64>,
        item_factors: Vec<f64>,
    ) -> Result<Self, FactorizerError> {
        let bad = |what: &str| Err(FactorizerError::InvalidConfig(what.to_string()));
        if dims == 0 {
            return bad("dims must be at least 1");
        }
        if user_bias.len() != users.len() || user_factors.len() != users.len() * dims {
            return bad("user table dimensions disagree");
        }
        if item_bias.len() != items.len() || item_factors.len() != items.len() * dims {
            return bad("item table dimensions disagree");
        }
        let all_finite = std::iter::once(&global_mean)
            .chain(&user_bias)
            .chain(&item_bias)
            .chain(&user_factors)
            .chain(&item_factors)
            .all(|x| x.is_finite());
        if !all_finite {
            return bad("non-finite parameter");
        }
        let user_index = index_of(&users);
        let item_index = index_of(&items);
        if user_index.len() != users.len() || item_index.len() != items.len() {
            return bad("duplicate ids");
        }
        Ok(Self {
            dims,
            global_mean,
            users,
            items,
            user_index,
            item_index,
            user_bias,
            item_bias,
            user_factors,
            item_factors,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// Known item ids, ascending.
    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn users(&self) -> &[u32] {
        &self.users
    }

    pub fn user_factor(&self, user: u32) -> Option<&[f64]> {
        self.user_index
            .get(&user)
            .map(|&k| &self.user_factors[k * self.dims..(k + 1) * self.dims])
    }

    pub fn item_factor(&self, item: u32) -> Option<&[f64]> {
        self.item_index
            .get(&item)
            .map(|&k| &self.item_factors[k * self.dims..(k + 1) * self.dims])
    }

    /// `s(u, i)`. Unknown users or items contribute neither bias nor factors.
    pub fn score(&self, user: u32, item: u32) -> f64 {
        let u = self.user_index.get(&user).copied();
        let i = self.item_index.get(&item).copied();
        let mut s = self.global_mean;
        if let Some(u) = u {
            s += self.user_bias[u];
        }
        if let Some(i) = i {
            s += self.item_bias[i];
        }
        if let (Some(u), Some(i)) = (u, i) {
            let d = self.dims;
            s += dot(&self.user_factors[u * d..(u + 1) * d], &self.item_factors[i * d..(i + 1) * d]);
        }
        s
    }

    pub fn rmse(&self, ratings: &[Rating]) -> f64 {
        if ratings.is_empty() {
            return 0.0;
        }
        let sse: f64 = ratings
            .iter()
            .map(|r| {
                let e = f64::from(r.value) - self.score(r.user, r.item);
                e * e
            })
            .sum();
        (sse / ratings.len() as f64).sqrt()
    }

    /// Per-rating regularized loss (see [`RatingGradient`]). `None` if either
    /// id is unknown.
    pub fn rating_loss(&self, rating: &Rating, regularization: f64) -> Option<f64> {
        let u = *self.user_index.get(&rating.user)?;
        let i = *self.item_index.get(&rating.item)?;
        let d = self.dims;
        let pu = &self.user_factors[u * d..(u + 1) * d];
        let qi = &self.item_factors[i * d..(i + 1) * d];
        let e = f64::from(rating.value) - self.score(rating.user, rating.item);
        let norm = self.user_bias[u].powi(2) + self.item_bias[i].powi(2) + dot(pu, pu) + dot(qi, qi);
        Some(0.5 * e * e + 0.5 * regularization * norm)
    }

    pub fn rating_gradient(&self, rating: &Rating, regularization: f64) -> Option<RatingGradient> {
        let u = *self.user_index.get(&rating.user)?;
        let i = *self.item_index.get(&rating.item)?;
        let d = self.dims;
        let pu = &self.user_factors[u * d..(u + 1) * d];
        let qi = &self.item_factors[i * d..(i + 1) * d];
        let e = f64::from(rating.value) - self.score(rating.user, rating.item);
        Some(RatingGradient {
            user_bias: -e + regularization * self.user_bias[u],
            item_bias: -e + regularization * self.item_bias[i],
            user_factor: pu.iter().zip(qi).map(|(p, q)| -e * q + regularization * p).collect(),
            item_factor: qi.iter().zip(pu).map(|(q, p)| -e * p + regularization * q).collect(),
        })
    }

    /// One SGD update on a single rating; all parameters move from their
    /// pre-step values.
    fn sgd_step(&mut self, u: usize, i: usize, value: f64, lr: f64, reg: f64) {
        let d = self.dims;
        let (pu, qi) = (u * d, i * d);
        let pred = self.global_mean
            + self.user_bias[u]
            + self.item_bias[i]
            + dot(&self.user_factors[pu..pu + d], &self.item_factors[qi..qi + d]);
        let e = value - pred;
        self.user_bias[u] += lr * (e - reg * self.user_bias[u]);
        self.item_bias[i] += lr * (e - reg * self.item_bias[i]);
        for k in 0..d {
            let p = self.user_factors[pu + k];
            let q = self.item_factors[qi + k];
            self.user_factors[pu + k] += lr * (e * q - reg * p);
            self.item_factors[qi + k] += lr * (e * p - reg * q);
        }
    }

    /// The `k` highest-scoring pool items for `user`, sorted by
    /// `(-score, item_id)`. `seen` holds the user's train items, which must not
    /// appear in the pool.
    pub fn candidates(
        &self,
        user: u32,
        pool: &BTreeSet<u32>,
        k: usize,
        seen: &BTreeSet<u32>,
    ) -> Result<ScoredCandidates, FactorizerError> {
        if k == 0 {
            return Err(FactorizerError::InvalidConfig("candidate size must be positive".into()));
        }
        if pool.is_empty() {
            return Err(FactorizerError::EmptyPool);
        }
        if let Some(&item) = pool.iter().find(|i| seen.contains(i)) {
            return Err(FactorizerError::SeenItemInPool { user, item });
        }
        let mut entries: Vec<(u32, f64)> = pool.iter().map(|&i| (i, self.score(user, i))).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        entries.truncate(k);
        Ok(ScoredCandidates::from_sorted(user, entries))
    }

    /// Writes the plain-text checkpoint described in the README.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "dims {}", self.dims)?;
        writeln!(w, "global_mean {:?}", self.global_mean)?;
        let mut table = |name: &str, ids: &[u32], bias: &[f64], factors: &[f64]| -> std::io::Result<()> {
            writeln!(w, "{name} {}", ids.len())?;
            for (k, id) in ids.iter().enumerate() {
                write!(w, "{id} {:?}", bias[k])?;
                for x in &factors[k * self.dims..(k + 1) * self.dims] {
                    write!(w, " {x:?}")?;
                }
                writeln!(w)?;
            }
            Ok(())
        };
        table("users", &self.users, &self.user_bias, &self.user_factors)?;
        table("items", &self.items, &self.item_bias, &self.item_factors)?;
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self, FactorizerError> {
        let mut lines = r.lines().enumerate().map(|(n, l)| (n + 1, l));
        let mut next = |what: &str| -> Result<(usize, String), FactorizerError> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(FactorizerError::Checkpoint {
                    line: 0,
                    reason: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let err = |line: usize, reason: String| FactorizerError::Checkpoint { line, reason };
        let (n, magic) = next("header")?;
        if magic.trim() != CHECKPOINT_MAGIC {
            return Err(err(n, format!("bad header {magic:?}")));
        }
        let keyed = |(n, l): (usize, String), key: &str| -> Result<String, FactorizerError> {
            l.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| err(n, format!("expected `{key}`")))
        };
        let num = |n: usize, s: &str| -> Result<f64, FactorizerError> {
            s.parse::<f64>().map_err(|_| err(n, format!("bad number {s:?}")))
        };
        let count = |n: usize, s: &str| -> Result<usize, FactorizerError> {
            s.parse::<usize>().map_err(|_| err(n, format!("bad count {s:?}")))
        };
        let line = next("dims")?;
        let ln = line.0;
        let dims = count(ln, &keyed(line, "dims")?)?;
        let line = next("global_mean")?;
        let ln = line.0;
        let global_mean = num(ln, &keyed(line, "global_mean")?)?;

        let mut tables = Vec::new();
        for name in ["users", "items"] {
            let line = next(name)?;
            let ln = line.0;
            let rows = count(ln, &keyed(line, name)?)?;
            let (mut ids, mut bias, mut factors) = (Vec::new(), Vec::new(), Vec::new());
            for _ in 0..rows {
                let (n, l) = next("table row")?;
                let parts: Vec<&str> = l.split_ascii_whitespace().collect();
                if parts.len() != dims + 2 {
                    return Err(err(n, format!("expected {} columns, found {}", dims + 2, parts.len())));
                }
                ids.push(parts[0].parse::<u32>().map_err(|_| err(n, "bad id".into()))?);
                bias.push(num(n, parts[1])?);
                for p in &parts[2..] {
                    factors.push(num(n, p)?);
                }
            }
            tables.push((ids, bias, factors));
        }
        let (items, item_bias, item_factors) = tables.pop().unwrap();
        let (users, user_bias, user_factors) = tables.pop().unwrap();
        Self::from_parts(dims, global_mean, users, user_bias, user_factors, items, item_bias, item_factors)
    }
}

/// Fits the baseline on `train`.
pub fn train(train: &[Rating], config: &MfConfig) -> Result<MfModel, FactorizerError> {
    config.validate()?;
    if train.is_empty() {
        return Err(FactorizerError::EmptyTrain);
    }
    let users: Vec<u32> = train.iter().map(|r| r.user).collect::<BTreeSet<_>>().into_iter().collect();
    let items: Vec<u32> = train.iter().map(|r| r.item).collect::<BTreeSet<_>>().into_iter().collect();
    let d = config.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let user_factors: Vec<f64> = (0..users.len() * d).map(|_| normal.sample(&mut rng)).collect();
    let item_factors: Vec<f64> = (0..items.len() * d).map(|_| normal.sample(&mut rng)).collect();
    let global_mean = train.iter().map(|r| f64::from(r.value)).sum::<f64>() / train.len() as f64;
    let mut model = MfModel {
        dims: d,
        global_mean,
        user_index: index_of(&users),
        item_index: index_of(&items),
        user_bias: vec![0.0; users.len()],
        item_bias: vec![0.0; items.len()],
        users,
        items,
        user_factors,
        item_factors,
    };
    let indexed: Vec<(usize, usize, f64)> = train
        .iter()
        .map(|r| (model.user_index[&r.user], model.item_index[&r.item], f64::from(r.value)))
        .collect();
    let mut order: Vec<usize> = (0..indexed.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let (u, i, v) = indexed[k];
            model.sgd_step(u, i, v, config.learning_rate, config.regularization);
        }
    }
    Ok(model)
}

/// Candidate set `RS` for one user, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidates {
    pub user: u32,
    entries: Vec<(u32, f64)>,
}

impl ScoredCandidates {
    /// Sorts `entries` into canonical `(-score, item_id)` order.
    pub fn new(user: u32, mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        debug_assert!(entries.windows(2).all(|w| w[0].0 != w[1].0), "duplicate candidates");
        Self { user, entries }
    }

    fn from_sorted(user: u32, entries: Vec<(u32, f64)>) -> Self {
        Self { user, entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn items(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, item: u32) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == item).map(|e| e.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_model(pu: Vec<f64>, qi: Vec<f64>, mean: f64, bu: f64, bi: f64) -> MfModel {
        let d = pu.len();
        MfModel::from_parts(d, mean, vec![1], vec![bu], pu, vec![10], vec![bi], qi).unwrap()
    }

    fn toy_corpus() -> Vec<Rating> {
        // 50 ratings over 10 users x 12 items with a planted two-group structure.
        let mut out = Vec::new();
        let mut k = 0u64;
        for u in 1..=10u32 {
            for j in 0..5u32 {
                let item = 1 + (u * 3 + j * 5) % 12;
                let value = if (u % 2 == 0) == (item % 2 == 0) { 5 } else { 1 + (item % 3) as u8 };
                if out.iter().any(|r: &Rating| r.user == u && r.item == item) {
                    continue;
                }
                out.push(Rating { user: u, item, value, timestamp: k });
                k += 1;
            }
        }
        out
    }

    #[test]
    fn score_is_dot_product_plus_biases() {
        assert_eq!(toy_model(vec![1.0, 0.0], vec![2.0, 0.0], 0.0, 0.0, 0.0).score(1, 10), 2.0);
        assert_eq!(toy_model(vec![0.0, 0.0], vec![0.0, 0.0], 3.6, 0.0, 0.0).score(1, 10), 3.6);
    }

    #[test]
    fn unknown_item_falls_back_to_biases() {
        let m = toy_model(vec![1.0], vec![1.0], 3.5, 0.5, 0.7);
        assert_eq!(m.score(1, 999), 4.0);
        assert_eq!(m.score(999, 999), 3.5);
    }

    #[test]
    fn zero_dims_rejected() {
        let cfg = MfConfig { dims: 0, ..MfConfig::default() };
        assert!(matches!(train(&toy_corpus(), &cfg), Err(FactorizerError::InvalidConfig(_))));
        let cfg = MfConfig { learning_rate: 0.0, ..MfConfig::default() };
        assert!(matches!(train(&toy_corpus(), &cfg), Err(FactorizerError::InvalidConfig(_))));
        assert!(matches!(train(&[], &MfConfig::default()), Err(FactorizerError::EmptyTrain)));
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let cfg = MfConfig { dims: 4, epochs: 5, ..MfConfig::default() };
        let a = train(&toy_corpus(), &cfg).unwrap();
        let b = train(&toy_corpus(), &cfg).unwrap();
        assert_eq!(a, b);
        let bits = |m: &MfModel| m.user_factors.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    /// Independent RMSE: direct formula over explicit factor rows.
    fn oracle_rmse(m: &MfModel, ratings: &[Rating]) -> f64 {
        let mut sse = 0.0;
        for r in ratings {
            let p = m.user_factor(r.user).unwrap();
            let q = m.item_factor(r.item).unwrap();
            let ub = m.user_bias[m.users.iter().position(|&u| u == r.user).unwrap()];
            let ib = m.item_bias[m.items.iter().position(|&i| i == r.item).unwrap()];
            let mut pred = m.global_mean + ub + ib;
            for k in 0..m.dims {
                pred += p[k] * q[k];
            }
            sse += (f64::from(r.value) - pred).powi(2);
        }
        (sse / ratings.len() as f64).sqrt()
    }

    #[test]
    fn training_reduces_train_rmse() {
        let data = toy_corpus();
        assert_eq!(data.len(), 50);
        let base = MfConfig { dims: 4, ..MfConfig::default() };
        let untrained = train(&data, &MfConfig { epochs: 0, ..base.clone() }).unwrap();
        let trained = train(&data, &MfConfig { epochs: 30, ..base }).unwrap();
        let before = oracle_rmse(&untrained, &data);
        let after = oracle_rmse(&trained, &data);
        assert!(after < before, "rmse {before} -> {after}");
        assert!((trained.rmse(&data) - after).abs() < 1e-12);
    }

    #[test]
    fn candidates_top_k_descending() {
        let m = MfModel::from_parts(
            1,
            0.0,
            vec![1],
            vec![0.0],
            vec![1.0],
            vec![1, 2, 3, 4, 5],
            vec![0.0; 5],
            vec![0.3, 0.9, 0.1, 0.5, 0.7],
        )
        .unwrap();
        let pool: BTreeSet<u32> = (1..=5).collect();
        let c = m.candidates(1, &pool, 3, &BTreeSet::new()).unwrap();
        assert_eq!(c.items().collect::<Vec<_>>(), vec![2, 5, 4]);
        let small: BTreeSet<u32> = [1, 3].into();
        assert_eq!(m.candidates(1, &small, 100, &BTreeSet::new()).unwrap().len(), 2);
    }

    #[test]
    fn candidates_reject_seen_and_empty() {
        let m = toy_model(vec![1.0], vec![1.0], 0.0, 0.0, 0.0);
        let pool: BTreeSet<u32> = [10, 11].into();
        let seen: BTreeSet<u32> = [10].into();
        assert!(matches!(
            m.candidates(1, &pool, 5, &seen),
            Err(FactorizerError::SeenItemInPool { user: 1, item: 10 })
        ));
        assert!(matches!(m.candidates(1, &BTreeSet::new(), 5, &seen), Err(FactorizerError::EmptyPool)));
    }

    #[test]
    fn ties_break_by_item_id() {
        let m = MfModel::from_parts(1, 1.0, vec![1], vec![0.0], vec![0.0], vec![7, 3, 5], vec![0.0; 3], vec![0.0; 3])
            .unwrap();
        let pool: BTreeSet<u32> = [3, 5, 7].into();
        let c = m.candidates(1, &pool, 3, &BTreeSet::new()).unwrap();
        assert_eq!(c.items().collect::<Vec<_>>(), vec![3, 5, 7]);
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let cfg = MfConfig { dims: 3, epochs: 3, ..MfConfig::default() };
        let m = train(&toy_corpus(), &cfg).unwrap();
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf).unwrap();
        let back = MfModel::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(MfModel::read_checkpoint("nope\n".as_bytes()).is_err());
        let truncated = "diverank-mf v1\ndims 2\nglobal_mean 3.5\nusers 1\n1 0.0 0.1\n";
        assert!(MfModel::read_checkpoint(truncated.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn candidate_order_matches_naive_sort(scores in proptest::collection::vec(-3i32..3, 1..40), k in 1usize..50) {
            let items: Vec<u32> = (1..=scores.len() as u32).collect();
            let factors: Vec<f64> = scores.iter().map(|&s| f64::from(s) * 0.5).collect();
            let m = MfModel::from_parts(1, 0.0, vec![1], vec![0.0], vec![1.0], items.clone(), vec![0.0; items.len()], factors.clone()).unwrap();
            let pool: BTreeSet<u32> = items.iter().copied().collect();
            let got: Vec<u32> = m.candidates(1, &pool, k, &BTreeSet::new()).unwrap().items().collect();
            // Naive: stable sort by descending score over ascending ids.
            let mut naive: Vec<(u32, f64)> = items.iter().map(|&i| (i, factors[(i - 1) as usize])).collect();
            for a in 0..naive.len() {
                for b in 0..naive.len() - 1 - a {
                    if naive[b].1 < naive[b + 1].1 {
                        naive.swap(b, b + 1);
                    }
                }
            }
            let want: Vec<u32> = naive.into_iter().take(k).map(|e| e.0).collect();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn score_is_linear_in_item_factor(p in proptest::collection::vec(-2.0f64..2.0, 3), a in proptest::collection::vec(-2.0f64..2.0, 3), b in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let s = |q: &Vec<f64>| toy_model(p.clone(), q.clone(), 0.0, 0.0, 0.0).score(1, 10);
            prop_assert!((s(&sum) - (s(&a) + s(&b))).abs() < 1e-12);
        }

        #[test]
        fn sgd_step_follows_finite_difference_gradient(
            pu in proptest::collection::vec(-0.5f64..0.5, 3),
            qi in proptest::collection::vec(-0.5f64..0.5, 3),
            bu in -0.5f64..0.5, bi in -0.5f64..0.5, value in 1u8..=5, reg in 0.0f64..0.2,
        ) {
            let model = toy_model(pu, qi, 3.0, bu, bi);
            let rating = Rating { user: 1, item: 10, value, timestamp: 0 };
            let lr = 0.01;
            let mut stepped = model.clone();
            stepped.sgd_step(0, 0, f64::from(value), lr, reg);

            // Central differences over every parameter of the touched rows.
            let h = 1e-6;
            let fd = |perturb: &dyn Fn(&mut MfModel, f64)| {
                let mut plus = model.clone();
                perturb(&mut plus, h);
                let mut minus = model.clone();
                perturb(&mut minus, -h);
                (plus.rating_loss(&rating, reg).unwrap() - minus.rating_loss(&rating, reg).unwrap()) / (2.0 * h)
            };
            let close = |step: f64, grad: f64| {
                let implied = -step / lr;
                (implied - grad).abs() <= 1e-4 * grad.abs().max(1e-3)
            };
            prop_assert!(close(stepped.user_bias[0] - model.user_bias[0], fd(&|m, d| m.user_bias[0] += d)));
            prop_assert!(close(stepped.item_bias[0] - model.item_bias[0], fd(&|m, d| m.item_bias[0] += d)));
            for k in 0..3 {
                prop_assert!(close(stepped.user_factors[k] - model.user_factors[k], fd(&|m, d| m.user_factors[k] += d)));
                prop_assert!(close(stepped.item_factors[k] - model.item_factors[k], fd(&|m, d| m.item_factors[k] += d)));
            }
            let g = model.rating_gradient(&rating, reg).unwrap();
            prop_assert!(close(stepped.user_bias[0] - model.user_bias[0], g.user_bias));
        }
    }
}
