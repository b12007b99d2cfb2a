//! Synthetic corpora shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use diverank::corpus::{write_ratings, ItemFeatures};
use diverank::harness::ExperimentConfig;
use diverank::Rating;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GENRES: [&str; 6] = ["Action", "Comedy", "Drama", "Horror", "Romance", "Sci-Fi"];

/// `users` users over `items` items. Each item carries one or two genres;
/// each user favours two genres and rates those items higher.
pub fn synthetic(users: u32, items: u32, per_user: usize, seed: u64) -> (Vec<Rating>, Vec<ItemFeatures>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalogue: Vec<ItemFeatures> = (1..=items)
        .map(|item| {
            let mut features = BTreeSet::new();
            features.insert(GENRES[rng.random_range(0..GENRES.len())].to_string());
            if rng.random_bool(0.4) {
                features.insert(GENRES[rng.random_range(0..GENRES.len())].to_string());
            }
            ItemFeatures {
                item,
                title: format!("Item {item} (1990)"),
                features,
            }
        })
        .collect();
    let mut ratings = Vec::new();
    let ids: Vec<u32> = (1..=items).collect();
    for user in 1..=users {
        let liked: Vec<&str> = GENRES.choose_multiple(&mut rng, 2).copied().collect();
        let mut pool = ids.clone();
        pool.shuffle(&mut rng);
        for (k, &item) in pool.iter().take(per_user).enumerate() {
            let fan = catalogue[(item - 1) as usize].features.iter().any(|f| liked.contains(&f.as_str()));
            let base: u8 = if fan { 4 } else { 2 };
            let value = (base + rng.random_range(0..2u8)).min(5);
            ratings.push(Rating {
                user,
                item,
                value,
                timestamp: 1_000_000 + k as u64,
            });
        }
    }
    (ratings, catalogue)
}

pub fn write_corpus(dir: &Path, ratings: &[Rating], catalogue: &[ItemFeatures]) -> (PathBuf, PathBuf) {
    let r = dir.join("ratings.dat");
    let i = dir.join("movies.dat");
    let mut buf = Vec::new();
    write_ratings(&mut buf, ratings).unwrap();
    std::fs::write(&r, buf).unwrap();
    let mut s = String::new();
    for it in catalogue {
        let genres: Vec<&str> = it.features.iter().map(String::as_str).collect();
        let _ = writeln!(s, "{}::{}::{}", it.item, it.title, genres.join("|"));
    }
    std::fs::write(&i, s).unwrap();
    (r, i)
}

/// Three lambdas x two cutoffs over the full roster.
pub fn toy_config(ratings: &Path, items: &Path, out: &Path) -> ExperimentConfig {
    let text = format!(
        "ratings = {}\nitems = {}\nout = {}\n\
         candidates = 20\nmf.dims = 8\nmf.epochs = 15\n\
         lambdas = 0.0, 0.5, 1.0\ncutoffs = 5, 10\ntradeoff_n = 10\n\
         knn_k = 5\n",
        ratings.display(),
        items.display(),
        out.display()
    );
    ExperimentConfig::parse(&text).unwrap()
}

/// Toy corpus written under `dir`, with the matching config.
pub fn toy(dir: &Path) -> ExperimentConfig {
    let (ratings, catalogue) = synthetic(20, 60, 30, 7);
    let (r, i) = write_corpus(dir, &ratings, &catalogue);
    toy_config(&r, &i, &dir.join("out"))
}
