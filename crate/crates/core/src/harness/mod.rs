//! End-to-end experiment pipeline.
//!
//! corpus -> factorizer -> aspects -> reranker -> metrics -> sudden death,
//! swept over a lambda grid and an N grid. Per-user work runs through
//! [`crate::par`]; results are gathered in user-id order, so outputs do not
//! depend on scheduling.

pub mod charts;
pub mod config;
pub mod output;
pub mod runs;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::aspects::{DistanceModel, SimilarityMatrix, UserAspects};
use crate::corpus::{self, CorpusError, Rating, RelevanceJudgments};
use crate::factorizer::{self, FactorizerError, MfModel};
use crate::metrics::{self, Metric, MetricError};
use crate::par;
use crate::reranker::{
    greedy_rerank, DiversityKind, GreedyConfig, IntentAwareDiversity, MmrDiversity, NoDiversity, RankedList,
    RerankError,
};
use crate::sudden_death::{sd_scores, RunSet, SdError, SdReport};

pub use charts::ChartError;
pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input stage: cannot read {path}: {source}")]
    Input { path: PathBuf, source: std::io::Error },
    #[error("corpus stage: {0}")]
    Corpus(#[from] CorpusError),
    #[error("factorizer stage: {0}")]
    Factorizer(#[from] FactorizerError),
    #[error("reranker stage (user {user}): {source}")]
    Rerank { user: u32, source: RerankError },
    #[error("metrics stage (user {user}): {source}")]
    Metric { user: u32, source: MetricError },
    #[error("sudden death stage: {0}")]
    SuddenDeath(#[from] SdError),
    #[error("no evaluable users: no test user has a relevant item and a non-empty candidate pool")]
    NoUsers,
    #[error("chart stage: {0}")]
    Chart(#[from] ChartError),
    #[error("output stage: cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    /// Process exit code: 1 for configuration problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// One averaged metric value.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub algorithm: String,
    pub lambda: f64,
    pub n: usize,
    pub metric: Metric,
    pub value: f64,
}

/// Sudden Death report for one (lambda, N) configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SdRow {
    pub lambda: f64,
    pub n: usize,
    pub report: SdReport,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub reports: Vec<SdRow>,
    /// Users evaluated, ascending.
    pub users: Vec<u32>,
    /// Per lambda: per user, per algorithm, the longest list built.
    pub lists: Vec<BTreeMap<u32, Vec<RankedList>>>,
    pub judgments: RelevanceJudgments,
}

impl ExperimentOutput {
    pub fn value(&self, algorithm: &str, lambda: f64, n: usize, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && (r.lambda - lambda).abs() < 1e-9 && r.n == n && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn sd(&self, lambda: f64, n: usize) -> Option<&SdReport> {
        self.reports
            .iter()
            .find(|r| (r.lambda - lambda).abs() < 1e-9 && r.n == n)
            .map(|r| &r.report)
    }
}

fn open(path: &Path) -> Result<BufReader<File>, HarnessError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| HarnessError::Input {
            path: path.to_path_buf(),
            source,
        })
}

/// Shared read-only state for the per-user stage.
struct Models<'a> {
    config: &'a ExperimentConfig,
    mf: MfModel,
    distance: DistanceModel,
    similarity: SimilarityMatrix,
    train_by_user: BTreeMap<u32, Vec<Rating>>,
    judgments: RelevanceJudgments,
}

/// Everything computed for one user.
struct UserOutcome {
    /// `[lambda][algorithm]`.
    lists: Vec<Vec<RankedList>>,
    /// `[lambda][algorithm][cutoff][metric]`.
    values: Vec<Vec<Vec<[f64; 6]>>>,
}

fn evaluate_user(m: &Models<'_>, user: u32) -> Result<Option<UserOutcome>, HarnessError> {
    let cfg = m.config;
    let train = m.train_by_user.get(&user).map(Vec::as_slice).unwrap_or(&[]);
    let seen: BTreeSet<u32> = train.iter().map(|r| r.item).collect();
    let pool: BTreeSet<u32> = m.mf.items().iter().copied().filter(|i| !seen.contains(i)).collect();
    if pool.is_empty() {
        return Ok(None);
    }
    let rs = m.mf.candidates(user, &pool, cfg.candidates, &seen)?;
    let liked: BTreeSet<u32> = train
        .iter()
        .filter(|r| r.value >= cfg.liked_threshold)
        .map(|r| r.item)
        .collect();
    let inputs = UserAspects::build(user, &liked, &rs, &m.distance, &m.similarity, cfg.knn_k);
    let relevant = m.judgments.relevant(user);
    let n_max = cfg.max_cutoff();
    let rerank_err = |source| HarnessError::Rerank { user, source };
    let metric_err = |source| HarnessError::Metric { user, source };

    let mut lists = Vec::with_capacity(cfg.lambdas.len());
    let mut values = Vec::with_capacity(cfg.lambdas.len());
    let mut baseline: Option<RankedList> = None;
    for &lambda in &cfg.lambdas {
        let mut per_alg = Vec::with_capacity(cfg.algorithms.len());
        let mut per_alg_values = Vec::with_capacity(cfg.algorithms.len());
        for &kind in &cfg.algorithms {
            let gcfg = GreedyConfig {
                lambda,
                n: n_max,
                kind,
                normalize_scores: cfg.normalize_scores,
            };
            let list = match kind {
                DiversityKind::None => match &baseline {
                    Some(l) => l.clone(),
                    None => {
                        let l = greedy_rerank(&rs, &gcfg, &mut NoDiversity).map_err(rerank_err)?;
                        baseline = Some(l.clone());
                        l
                    }
                },
                DiversityKind::Mmr => {
                    greedy_rerank(&rs, &gcfg, &mut MmrDiversity::new(&m.distance)).map_err(rerank_err)?
                }
                DiversityKind::IntentAwareFeatures => {
                    greedy_rerank(&rs, &gcfg, &mut IntentAwareDiversity::new(&inputs.features)).map_err(rerank_err)?
                }
                DiversityKind::IntentAwareSubprofiles => {
                    greedy_rerank(&rs, &gcfg, &mut IntentAwareDiversity::new(&inputs.subprofiles))
                        .map_err(rerank_err)?
                }
            };
            // Greedy selection never looks ahead, so each shorter list is a
            // prefix of the longest one.
            let mut per_cutoff = Vec::with_capacity(cfg.cutoffs.len());
            for &n in &cfg.cutoffs {
                let top = list.prefix(n);
                per_cutoff.push([
                    metrics::ild(&top, &m.distance).map_err(metric_err)?,
                    metrics::alpha_ndcg(&top, &inputs.features, relevant, cfg.alpha).map_err(metric_err)?,
                    metrics::alpha_ndcg(&top, &inputs.subprofiles, relevant, cfg.alpha).map_err(metric_err)?,
                    metrics::precision(&top, relevant),
                    metrics::mrr(&top, relevant),
                    f64::from(metrics::one_call(&top, relevant)),
                ]);
            }
            per_alg.push(list);
            per_alg_values.push(per_cutoff);
        }
        lists.push(per_alg);
        values.push(per_alg_values);
    }
    Ok(Some(UserOutcome { lists, values }))
}

/// Loads the corpus named in `config`, then runs [`run_on_corpus`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let ratings = corpus::parse_ratings(open(&config.ratings)?)?;
    let catalogue = corpus::parse_item_features(open(&config.items)?)?;
    run_on_corpus(config, &ratings, &catalogue)
}

/// Runs the full pipeline on in-memory data.
pub fn run_on_corpus(
    config: &ExperimentConfig,
    ratings: &[Rating],
    catalogue: &[corpus::ItemFeatures],
) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let exec = config.execution;
    let split = corpus::split(ratings, config.holdout_fraction, config.seed)?;
    let judgments = corpus::judgments(&split, config.relevance_threshold);
    let mf = factorizer::train(&split.train, &config.mf)?;
    let models = Models {
        config,
        distance: DistanceModel::new(catalogue),
        similarity: SimilarityMatrix::from_ratings(&split.train, config.knn_k, exec),
        train_by_user: split.train_by_user(),
        judgments,
        mf,
    };
    let candidates: Vec<u32> = models.judgments.users().collect();
    let outcomes = par::try_map(exec, &candidates, |&u| evaluate_user(&models, u))?;
    let mut users = Vec::new();
    let mut evaluated = Vec::new();
    for (u, o) in candidates.into_iter().zip(outcomes) {
        if let Some(o) = o {
            users.push(u);
            evaluated.push(o);
        }
    }
    if users.is_empty() {
        return Err(HarnessError::NoUsers);
    }

    // Means are summed in ascending user order.
    let count = users.len() as f64;
    let mut rows = Vec::new();
    for (a, kind) in config.algorithms.iter().enumerate() {
        for (l, &lambda) in config.lambdas.iter().enumerate() {
            for (c, &n) in config.cutoffs.iter().enumerate() {
                for (k, &metric) in Metric::ALL.iter().enumerate() {
                    let sum: f64 = evaluated.iter().map(|o| o.values[l][a][c][k]).sum();
                    rows.push(ResultRow {
                        algorithm: kind.algorithm_name().to_string(),
                        lambda,
                        n,
                        metric,
                        value: sum / count,
                    });
                }
            }
        }
    }

    let roster = config.roster();
    let mut lists_by_lambda = Vec::with_capacity(config.lambdas.len());
    let mut reports = Vec::new();
    for (l, &lambda) in config.lambdas.iter().enumerate() {
        let full: BTreeMap<u32, Vec<RankedList>> = users
            .iter()
            .zip(&evaluated)
            .map(|(&u, o)| (u, o.lists[l].clone()))
            .collect();
        for &n in &config.cutoffs {
            let cut = full
                .iter()
                .map(|(&u, ls)| (u, ls.iter().map(|x| x.prefix(n)).collect()))
                .collect();
            let runset = RunSet::new(roster.clone(), n, cut, models.judgments.clone())?;
            reports.push(SdRow {
                lambda,
                n,
                report: sd_scores(&runset, exec)?,
            });
        }
        lists_by_lambda.push(full);
    }
    Ok(ExperimentOutput {
        rows,
        reports,
        users,
        lists: lists_by_lambda,
        judgments: models.judgments,
    })
}

/// Runs the experiment and writes every output file under `config.out_dir`.
pub fn run_and_emit(config: &ExperimentConfig) -> Result<(ExperimentOutput, Vec<PathBuf>), HarnessError> {
    let out = run_experiment(config)?;
    let files = emit_all(config, &out)?;
    Ok((out, files))
}

pub fn emit_all(config: &ExperimentConfig, out: &ExperimentOutput) -> Result<Vec<PathBuf>, HarnessError> {
    let dir = &config.out_dir;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Output { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = output::emit_csv(&out.rows, &out.reports, dir).map_err(io_err(dir))?;
    files.extend(charts::emit_charts(&out.rows, &out.reports, &charts::ChartSettings::from_config(config), dir)?);
    let judgments_path = dir.join("judgments.csv");
    runs::write_judgments(&judgments_path, &out.judgments, &out.users).map_err(io_err(&judgments_path))?;
    files.push(judgments_path);
    let roster = config.roster();
    for (l, &lambda) in config.lambdas.iter().enumerate() {
        let path = dir.join(format!("runs_lambda_{lambda:.2}.csv"));
        runs::write_runs(&path, &roster, &out.lists[l]).map_err(io_err(&path))?;
        files.push(path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_config_from_data() {
        assert_eq!(HarnessError::Config(ConfigError::UnknownKey("x".into())).exit_code(), 1);
        assert_eq!(HarnessError::NoUsers.exit_code(), 2);
        let input = HarnessError::Input {
            path: "r.dat".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        assert_eq!(input.exit_code(), 2);
        assert!(input.to_string().starts_with("input stage"));
    }

    #[test]
    fn output_lookup_tolerates_float_noise() {
        let out = ExperimentOutput {
            rows: vec![ResultRow {
                algorithm: "mmr".into(),
                lambda: 0.30000000000000004,
                n: 10,
                metric: Metric::Ild,
                value: 0.5,
            }],
            reports: Vec::new(),
            users: Vec::new(),
            lists: Vec::new(),
            judgments: RelevanceJudgments::from_pairs(4, []),
        };
        assert_eq!(out.value("mmr", 0.3, 10, Metric::Ild), Some(0.5));
        assert_eq!(out.value("mmr", 0.3, 5, Metric::Ild), None);
        assert!(out.sd(0.3, 10).is_none());
    }

    #[test]
    fn corpus_without_relevant_test_items_has_no_users() {
        let ratings: Vec<Rating> = (1..=3u32)
            .flat_map(|u| {
                (1..=6u32).map(move |i| Rating {
                    user: u,
                    item: i,
                    value: 1,
                    timestamp: u64::from(i),
                })
            })
            .collect();
        let catalogue: Vec<corpus::ItemFeatures> = (1..=6)
            .map(|i| corpus::ItemFeatures {
                item: i,
                title: format!("t{i}"),
                features: ["Drama".to_string()].into(),
            })
            .collect();
        let cfg = ExperimentConfig::parse("mf.epochs = 2\ncandidates = 3\ncutoffs = 2\ntradeoff_n = 2\n").unwrap();
        assert!(matches!(run_on_corpus(&cfg, &ratings, &catalogue), Err(HarnessError::NoUsers)));
    }
}
