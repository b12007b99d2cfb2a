//! Rating and item-feature files, train/test splitting, relevance judgments.
//!
//! Both input formats are the MovieLens 1M "::"-delimited layout:
//!
//! ```text
//! ratings:  user::item::rating::timestamp
//! items:    item::title::Feature1|Feature2|...
//! ```
//!
//! Titles are decoded as Latin-1 since the public distribution is not valid
//! UTF-8; every other field is ASCII.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default relevance / "liked" threshold on the 1-5 scale.
pub const DEFAULT_THRESHOLD: u8 = 4;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("rating corpus is empty")]
    EmptyCorpus,
    #[error("holdout fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("user {user} rated item {item} more than once")]
    DuplicateRating { user: u32, item: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: u8,
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemFeatures {
    pub item: u32,
    pub title: String,
    pub features: BTreeSet<String>,
}

fn malformed(line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

/// Splits on the literal two-byte delimiter `::`.
fn split_fields(line: &[u8]) -> Vec<&[u8]> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i + 1 < line.len() {
        if line[i] == b':' && line[i + 1] == b':' {
            out.push(&line[start..i]);
            i += 2;
            start = i;
        } else {
            i += 1;
        }
    }
    out.push(&line[start..]);
    out
}

fn parse_num<T: std::str::FromStr>(field: &[u8], line: usize, name: &str) -> Result<T, CorpusError> {
    std::str::from_utf8(field)
        .ok()
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            malformed(
                line,
                format!("{name} field {:?} is not numeric", String::from_utf8_lossy(field)),
            )
        })
}

fn parse_id(field: &[u8], line: usize, name: &str) -> Result<u32, CorpusError> {
    let id: u32 = parse_num(field, line, name)?;
    if id == 0 {
        return Err(malformed(line, format!("{name} id must be positive")));
    }
    Ok(id)
}

/// Iterates over non-blank lines as `(1-based line number, bytes)` with any
/// trailing `\r` removed.
fn for_each_line<R: BufRead>(
    mut source: R,
    mut f: impl FnMut(usize, &[u8]) -> Result<(), CorpusError>,
) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    let mut lineno = 0;
    loop {
        buf.clear();
        if source.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        lineno += 1;
        let mut line = buf.as_slice();
        while let Some((&last, rest)) = line.split_last() {
            if last == b'\n' || last == b'\r' {
                line = rest;
            } else {
                break;
            }
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        f(lineno, line)?;
    }
}

pub fn parse_ratings<R: BufRead>(source: R) -> Result<Vec<Rating>, CorpusError> {
    let mut out = Vec::new();
    for_each_line(source, |lineno, line| {
        let fields = split_fields(line);
        if fields.len() != 4 {
            return Err(malformed(lineno, format!("expected 4 fields, found {}", fields.len())));
        }
        let user = parse_id(fields[0], lineno, "user")?;
        let item = parse_id(fields[1], lineno, "item")?;
        let value: u8 = parse_num(fields[2], lineno, "rating")?;
        if !(1..=5).contains(&value) {
            return Err(malformed(lineno, format!("rating {value} outside 1..=5")));
        }
        let timestamp: u64 = parse_num(fields[3], lineno, "timestamp")?;
        out.push(Rating {
            user,
            item,
            value,
            timestamp,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_item_features<R: BufRead>(source: R) -> Result<Vec<ItemFeatures>, CorpusError> {
    let mut out = Vec::new();
    for_each_line(source, |lineno, line| {
        let fields = split_fields(line);
        if fields.len() < 3 {
            return Err(malformed(lineno, format!("expected 3 fields, found {}", fields.len())));
        }
        let item = parse_id(fields[0], lineno, "item")?;
        // Anything between the first and last delimiter belongs to the title.
        let title_bytes = &line[fields[0].len() + 2..line.len() - fields[fields.len() - 1].len() - 2];
        let title: String = title_bytes.iter().map(|&b| b as char).collect();
        let features = fields[fields.len() - 1]
            .split(|&b| b == b'|')
            .map(|f| f.iter().map(|&b| b as char).collect::<String>())
            .map(|f| f.trim().to_string())
            .filter(|f| !f.is_empty())
            .collect();
        out.push(ItemFeatures {
            item,
            title,
            features,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Canonical ratings writer; the inverse of [`parse_ratings`].
pub fn write_ratings<W: Write>(mut sink: W, ratings: &[Rating]) -> std::io::Result<()> {
    for r in ratings {
        writeln!(sink, "{}::{}::{}::{}", r.user, r.item, r.value, r.timestamp)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitCorpus {
    pub train: Vec<Rating>,
    pub test: Vec<Rating>,
    pub users: BTreeSet<u32>,
    pub items: BTreeSet<u32>,
}

impl SplitCorpus {
    /// Train ratings grouped by user.
    pub fn train_by_user(&self) -> BTreeMap<u32, Vec<Rating>> {
        group_by_user(&self.train)
    }

    pub fn test_by_user(&self) -> BTreeMap<u32, Vec<Rating>> {
        group_by_user(&self.test)
    }
}

fn group_by_user(ratings: &[Rating]) -> BTreeMap<u32, Vec<Rating>> {
    let mut out: BTreeMap<u32, Vec<Rating>> = BTreeMap::new();
    for r in ratings {
        out.entry(r.user).or_default().push(*r);
    }
    out
}

/// Per-user random holdout.
///
/// Each user's ratings are ordered by item id, shuffled with a ChaCha8 stream
/// seeded from `seed` (users visited in ascending id order), and the first
/// `floor(fraction * n)` go to test. Users with fewer than two ratings stay
/// entirely in train. The result does not depend on input order.
pub fn split(ratings: &[Rating], holdout_fraction: f64, seed: u64) -> Result<SplitCorpus, CorpusError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(holdout_fraction));
    }
    if ratings.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(ratings.len());
    let mut test = Vec::new();
    for (user, mut rs) in group_by_user(ratings) {
        rs.sort_by_key(|r| (r.item, r.timestamp, r.value));
        if let Some(w) = rs.windows(2).find(|w| w[0].item == w[1].item) {
            return Err(CorpusError::DuplicateRating {
                user,
                item: w[0].item,
            });
        }
        if rs.len() < 2 {
            train.extend(rs);
            continue;
        }
        rs.shuffle(&mut rng);
        let holdout = (holdout_fraction * rs.len() as f64).floor() as usize;
        let (held, kept) = rs.split_at(holdout);
        test.extend_from_slice(held);
        train.extend_from_slice(kept);
    }
    train.sort_by_key(|r| (r.user, r.item));
    test.sort_by_key(|r| (r.user, r.item));
    Ok(SplitCorpus {
        users: ratings.iter().map(|r| r.user).collect(),
        items: ratings.iter().map(|r| r.item).collect(),
        train,
        test,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelevanceJudgments {
    pub threshold: u8,
    relevant: BTreeMap<u32, BTreeSet<u32>>,
}

static NO_ITEMS: BTreeSet<u32> = BTreeSet::new();

impl RelevanceJudgments {
    /// Builds judgments from explicit `(user, item)` relevant pairs.
    pub fn from_pairs(threshold: u8, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut relevant: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for (u, i) in pairs {
            relevant.entry(u).or_default().insert(i);
        }
        Self {
            threshold,
            relevant,
        }
    }

    /// `rel_u`; empty for users without relevant test items.
    pub fn relevant(&self, user: u32) -> &BTreeSet<u32> {
        self.relevant.get(&user).unwrap_or(&NO_ITEMS)
    }

    /// Users with at least one relevant item, ascending.
    pub fn users(&self) -> impl Iterator<Item = u32> + '_ {
        self.relevant
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(&u, _)| u)
    }

    pub fn is_relevant(&self, user: u32, item: u32) -> bool {
        self.relevant(user).contains(&item)
    }
}

/// `rel_u = { i : (u, i, v) in test, v >= threshold }`.
pub fn judgments(corpus: &SplitCorpus, threshold: u8) -> RelevanceJudgments {
    RelevanceJudgments::from_pairs(
        threshold,
        corpus
            .test
            .iter()
            .filter(|r| r.value >= threshold)
            .map(|r| (r.user, r.item)),
    )
}
