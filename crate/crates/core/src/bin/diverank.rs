use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use diverank::harness::output::sd_csv;
use diverank::harness::runs::{read_judgments, read_runs};
use diverank::harness::{self, ExperimentConfig, SdRow};
use diverank::sudden_death::{runset_from_records, sd_scores};
use diverank::Execution;

const CONFIG_ERROR: u8 = 1;
const DATA_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "diverank", version, about = "Diversity re-ranking experiments and Sudden Death scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write CSV tables and SVG charts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override any config key, e.g. `--set mf.epochs=10`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score externally produced runs with Sudden Death.
    ScoreRuns {
        /// CSV with header `algorithm,user,rank,item`.
        #[arg(long)]
        runs: PathBuf,
        /// CSV with header `user,item`, one relevant pair per line.
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        n: usize,
        /// Value written in the lambda column.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Directory for `sd.csv`; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, overrides: Vec<String>) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&config)
        .context("config stage")
        .map_err(fail(CONFIG_ERROR))?;
    for kv in &overrides {
        let (key, value) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))
            .map_err(fail(CONFIG_ERROR))?;
        cfg.set(key.trim(), value.trim()).map_err(|e| fail(CONFIG_ERROR)(e.into()))?;
    }
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if let Some(seed) = seed {
        cfg.set("seed", &seed.to_string()).map_err(|e| fail(CONFIG_ERROR)(e.into()))?;
    }
    cfg.validate().map_err(|e| fail(CONFIG_ERROR)(e.into()))?;
    let (out, files) = harness::run_and_emit(&cfg).map_err(|e| Failure {
        code: e.exit_code() as u8,
        error: e.into(),
    })?;
    eprintln!(
        "evaluated {} users; wrote {} files under {}",
        out.users.len(),
        files.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn score_runs(
    runs: PathBuf,
    judgments: PathBuf,
    n: usize,
    lambda: f64,
    out: Option<PathBuf>,
    sequential: bool,
) -> Result<(), Failure> {
    if n == 0 {
        return Err(fail(CONFIG_ERROR)(anyhow::anyhow!("--n must be at least 1")));
    }
    let data = |e: anyhow::Error| Failure { code: DATA_ERROR, error: e };
    let records = File::open(&runs)
        .map_err(anyhow::Error::from)
        .and_then(|f| read_runs(f).map_err(Into::into))
        .with_context(|| format!("input stage: {}", runs.display()))
        .map_err(data)?;
    let rel = File::open(&judgments)
        .map_err(anyhow::Error::from)
        .and_then(|f| read_judgments(f).map_err(Into::into))
        .with_context(|| format!("input stage: {}", judgments.display()))
        .map_err(data)?;
    let set = runset_from_records(&records, n, rel)
        .context("sudden death stage")
        .map_err(data)?;
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let report = sd_scores(&set, exec).context("sudden death stage").map_err(data)?;
    let text = sd_csv(&[SdRow { lambda, n, report }]);
    match out {
        Some(dir) => {
            let path = dir.join("sd.csv");
            std::fs::create_dir_all(&dir)
                .and_then(|()| std::fs::write(&path, text))
                .with_context(|| format!("output stage: {}", path.display()))
                .map_err(data)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            overrides,
        } => run(config, out, seed, overrides),
        Command::ScoreRuns {
            runs,
            judgments,
            n,
            lambda,
            out,
            sequential,
        } => score_runs(runs, judgments, n, lambda, out, sequential),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
