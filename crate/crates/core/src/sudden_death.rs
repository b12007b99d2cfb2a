//! Sudden Death: comparative scoring by earliest hit.
//!
//! For each user, every algorithm whose top-N list reaches a relevant item at
//! the earliest position achieved by any algorithm is awarded 1; everyone
//! else gets 0. `SD(a)` is the mean award over users. Positions `1..=N` are
//! all examined, including `N` itself.
//!
//! The score only means something relative to the roster it was computed
//! against, so [`SdReport`] always carries the roster.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::corpus::RelevanceJudgments;
use crate::par::{self, Execution};
use crate::reranker::RankedList;

#[derive(Debug, Error, PartialEq)]
pub enum SdError {
    #[error("position {position} outside 1..={n}")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("no users to score")]
    EmptyUserSet,
    #[error("algorithm roster is empty")]
    EmptyRoster,
    #[error("algorithm {0:?} appears twice in the roster")]
    DuplicateAlgorithm(String),
    #[error("user {user} has {found} lists, expected one per algorithm ({expected})")]
    MissingList { user: u32, expected: usize, found: usize },
    #[error("list for user {user}, algorithm {algorithm:?} has length {len} > N = {n}")]
    ListTooLong { user: u32, algorithm: String, len: usize, n: usize },
    #[error("unknown user {0}")]
    UnknownUser(u32),
    #[error("unknown algorithm index {0}")]
    UnknownAlgorithm(usize),
    #[error("N must be positive")]
    ZeroCutoff,
}

/// Top-N lists of every algorithm for every user, plus relevance judgments.
#[derive(Clone, Debug)]
pub struct RunSet {
    algorithms: Vec<String>,
    n: usize,
    /// Per user, one list per algorithm in roster order.
    lists: BTreeMap<u32, Vec<RankedList>>,
    judgments: RelevanceJudgments,
}

impl RunSet {
    pub fn new(
        algorithms: Vec<String>,
        n: usize,
        lists: BTreeMap<u32, Vec<RankedList>>,
        judgments: RelevanceJudgments,
    ) -> Result<Self, SdError> {
        if n == 0 {
            return Err(SdError::ZeroCutoff);
        }
        if algorithms.is_empty() {
            return Err(SdError::EmptyRoster);
        }
        let mut seen = HashSet::new();
        for a in &algorithms {
            if !seen.insert(a) {
                return Err(SdError::DuplicateAlgorithm(a.clone()));
            }
        }
        for (&user, per_alg) in &lists {
            if per_alg.len() != algorithms.len() {
                return Err(SdError::MissingList {
                    user,
                    expected: algorithms.len(),
                    found: per_alg.len(),
                });
            }
            for (list, alg) in per_alg.iter().zip(&algorithms) {
                if list.len() > n {
                    return Err(SdError::ListTooLong {
                        user,
                        algorithm: alg.clone(),
                        len: list.len(),
                        n,
                    });
                }
            }
        }
        Ok(Self {
            algorithms,
            n,
            lists,
            judgments,
        })
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn users(&self) -> impl Iterator<Item = u32> + '_ {
        self.lists.keys().copied()
    }

    pub fn judgments(&self) -> &RelevanceJudgments {
        &self.judgments
    }

    pub fn list(&self, user: u32, algorithm: usize) -> Result<&RankedList, SdError> {
        self.lists
            .get(&user)
            .ok_or(SdError::UnknownUser(user))?
            .get(algorithm)
            .ok_or(SdError::UnknownAlgorithm(algorithm))
    }

    /// Whether any of the first `position` items of the algorithm's list is
    /// relevant.
    pub fn hit(&self, position: usize, user: u32, algorithm: usize) -> Result<bool, SdError> {
        if position == 0 || position > self.n {
            return Err(SdError::PositionOutOfRange { position, n: self.n });
        }
        let list = self.list(user, algorithm)?;
        let rel = self.judgments.relevant(user);
        Ok(list.items().iter().take(position).any(|i| rel.contains(i)))
    }

    /// Per-algorithm awards for one user, in roster order.
    pub fn sd_user(&self, user: u32) -> Result<Vec<u8>, SdError> {
        let per_alg = self.lists.get(&user).ok_or(SdError::UnknownUser(user))?;
        let rel = self.judgments.relevant(user);
        let earliest: Vec<Option<usize>> = per_alg.iter().map(|l| earliest_hit(l, rel, self.n)).collect();
        Ok(awards_from_earliest(&earliest, self.n))
    }
}

/// 1-based position of the first relevant item within the top `n`.
pub fn earliest_hit(list: &RankedList, relevant: &BTreeSet<u32>, n: usize) -> Option<usize> {
    list.items()
        .iter()
        .take(n)
        .position(|i| relevant.contains(i))
        .map(|p| p + 1)
}

/// Scans positions 1..=n; at the first position where anyone hits, every
/// algorithm hitting there is awarded and the scan stops.
fn awards_from_earliest(earliest: &[Option<usize>], n: usize) -> Vec<u8> {
    let mut awards = vec![0u8; earliest.len()];
    for position in 1..=n {
        for (h, e) in awards.iter_mut().zip(earliest) {
            if e.is_some_and(|e| e <= position) {
                *h = 1;
            }
        }
        if awards.contains(&1) {
            break;
        }
    }
    awards
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdReport {
    pub roster: Vec<String>,
    pub n: usize,
    pub user_count: usize,
    /// Number of users awarded, per algorithm.
    pub wins: Vec<u64>,
    /// `wins / user_count`, per algorithm.
    pub scores: Vec<f64>,
    /// Per user, awards in roster order.
    pub awards: BTreeMap<u32, Vec<u8>>,
    /// Per user, the earliest hit position over all algorithms.
    pub earliest: BTreeMap<u32, Option<usize>>,
}

impl SdReport {
    pub fn score(&self, algorithm: &str) -> Option<f64> {
        self.roster.iter().position(|a| a == algorithm).map(|k| self.scores[k])
    }

    /// Roster joined with `|`.
    pub fn roster_label(&self) -> String {
        self.roster.join("|")
    }
}

/// Sudden Death scores for every algorithm in the run set.
pub fn sd_scores(runs: &RunSet, exec: Execution) -> Result<SdReport, SdError> {
    let users: Vec<u32> = runs.users().collect();
    if users.is_empty() {
        return Err(SdError::EmptyUserSet);
    }
    let per_user = par::map(exec, &users, |&u| {
        let rel = runs.judgments.relevant(u);
        let earliest: Vec<Option<usize>> =
            runs.lists[&u].iter().map(|l| earliest_hit(l, rel, runs.n)).collect();
        let first = earliest.iter().flatten().min().copied();
        (awards_from_earliest(&earliest, runs.n), first)
    });
    let mut wins = vec![0u64; runs.algorithms.len()];
    let mut awards = BTreeMap::new();
    let mut earliest = BTreeMap::new();
    for (&u, (aw, first)) in users.iter().zip(per_user) {
        for (w, &a) in wins.iter_mut().zip(&aw) {
            *w += u64::from(a);
        }
        awards.insert(u, aw);
        earliest.insert(u, first);
    }
    let user_count = users.len();
    Ok(SdReport {
        roster: runs.algorithms.clone(),
        n: runs.n,
        user_count,
        scores: wins.iter().map(|&w| w as f64 / user_count as f64).collect(),
        wins,
        awards,
        earliest,
    })
}

/// One line of an external run file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunRecord {
    pub algorithm: String,
    pub user: u32,
    pub rank: usize,
    pub item: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum RunRecordError {
    #[error("user {user}, algorithm {algorithm:?}: rank {rank} appears twice")]
    DuplicateRank { algorithm: String, user: u32, rank: usize },
    #[error("user {user}, algorithm {algorithm:?}: item {item} appears twice")]
    DuplicateItem { algorithm: String, user: u32, item: u32 },
    #[error("rank must be at least 1 (user {user}, algorithm {algorithm:?})")]
    ZeroRank { algorithm: String, user: u32 },
    #[error(transparent)]
    RunSet(#[from] SdError),
}

/// Assembles a run set from flat records.
///
/// The roster follows first appearance in `records`; the user set is every
/// user that appears. Lists are ordered by rank and cut to the top `n`; a
/// (user, algorithm) pair with no records gets an empty list.
pub fn runset_from_records(
    records: &[RunRecord],
    n: usize,
    judgments: RelevanceJudgments,
) -> Result<RunSet, RunRecordError> {
    let mut roster: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<(u32, usize), Vec<(usize, u32)>> = BTreeMap::new();
    for r in records {
        if r.rank == 0 {
            return Err(RunRecordError::ZeroRank {
                algorithm: r.algorithm.clone(),
                user: r.user,
            });
        }
        let a = match roster.iter().position(|x| *x == r.algorithm) {
            Some(a) => a,
            None => {
                roster.push(r.algorithm.clone());
                roster.len() - 1
            }
        };
        grouped.entry((r.user, a)).or_default().push((r.rank, r.item));
    }
    let users: BTreeSet<u32> = records.iter().map(|r| r.user).collect();
    let mut lists = BTreeMap::new();
    for u in users {
        let mut per_alg = Vec::with_capacity(roster.len());
        for (a, name) in roster.iter().enumerate() {
            let mut entries = grouped.remove(&(u, a)).unwrap_or_default();
            entries.sort_unstable();
            if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(RunRecordError::DuplicateRank {
                    algorithm: name.clone(),
                    user: u,
                    rank: w[0].0,
                });
            }
            let mut seen = HashSet::new();
            if let Some(&(_, item)) = entries.iter().find(|e| !seen.insert(e.1)) {
                return Err(RunRecordError::DuplicateItem {
                    algorithm: name.clone(),
                    user: u,
                    item,
                });
            }
            per_alg.push(RankedList::new(u, entries.into_iter().take(n).map(|e| e.1).collect()));
        }
        lists.insert(u, per_alg);
    }
    Ok(RunSet::new(roster, n, lists, judgments)?)
}
