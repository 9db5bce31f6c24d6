// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use remark_core::content::GitContent;
use remark_core::features::{compute_features, FeatureSettings};
use remark_core::fixture::TICKET_PATTERN;
use remark_core::ingest::{extract, load_dataset, persist_dataset, Dataset};
use remark_core::mining::{read_archive, write_archive, Engine, MiningConfig};
use remark_core::remarks::{clean_dataset, parse_exclusion_list, trace_dataset, RemarkConfig};
use remark_core::rules::{baseline_random, break_even, cost, evaluate, parse_ruleset, write_labels};
use remark_core::szz::{summarize, szz_compare};
use remark_core::Error;
use serde_json::json;

use crate::api::{router, AppState};
use crate::session::SessionManager;

#[derive(Debug, Parser)]
#[command(name = "remark-miner", version, about = "Mine rules for change parts that need no review")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dataset from a git repository and a ticket state log.
    Extract {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        ticket_log: PathBuf,
        #[arg(long, default_value = TICKET_PATTERN)]
        ticket_pattern: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract review remarks and link them to their potential triggers.
    Trace {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Tickets to drop, one per line with an optional reason.
        #[arg(long)]
        exclude_tickets: Option<PathBuf>,
        /// Repository to read file contents from, if not the recorded one.
        #[arg(long)]
        repo: Option<PathBuf>,
    },
    /// Compare the trigger sets with a plain SZZ trace.
    SzzCompare {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "java")]
        ext: String,
        #[arg(long)]
        per_line: bool,
        #[arg(long)]
        repo: Option<PathBuf>,
    },
    /// Compute the feature vector of every record.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        ngram_order: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long)]
        repo: Option<PathBuf>,
    },
    /// Evaluate a ruleset file on a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        ruleset: PathBuf,
        #[arg(long, default_value = "java")]
        java_ext: String,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        cost_factors: Vec<f64>,
    },
    /// Objectives of skipping a random share of records.
    Baseline {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        share: f64,
        #[arg(long, default_value_t = 100)]
        seeds: usize,
    },
    /// Write per-record features and labels as CSV.
    ExportLabels {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the miner without interaction and write the archive.
    Mine {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        iterations: u64,
        #[arg(long)]
        out: PathBuf,
        /// JSON file with mining settings; --seed overrides its seed.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print an archive file as readable rulesets.
    ShowArchive {
        #[arg(long)]
        archive: PathBuf,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, env = "REMARK_MINER_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Base directory for relative dataset paths.
        #[arg(long, env = "REMARK_MINER_DATA_DIR")]
        data_dir: Option<PathBuf>,
        /// Dataset for sessions created without one.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| {
        CliError::Data(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json output"));
}

fn content_for(dataset: &Dataset, repo: Option<PathBuf>) -> Result<GitContent, CliError> {
    let repo = repo
        .or_else(|| dataset.repo_path.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("dataset records no repository; pass --repo".into()))?;
    Ok(GitContent::open(&repo)?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract {
            repo,
            ticket_log,
            ticket_pattern,
            out,
        } => {
            let ds = extract(&repo, &ticket_log, &ticket_pattern)?;
            persist_dataset(&ds, &out)?;
            print_json(&json!({
                "commits": ds.commits.len(),
                "tickets": ds.tickets.len(),
                "records": ds.record_count(),
            }));
        }
        Command::Trace {
            dataset,
            out,
            exclude_tickets,
            repo,
        } => {
            let mut ds = load_dataset(&dataset)?;
            if let Some(list) = exclude_tickets {
                let text = std::fs::read_to_string(&list).map_err(io_err(&list))?;
                ds = clean_dataset(ds, &parse_exclusion_list(&text));
            }
            let content = content_for(&ds, repo)?;
            let outcome = trace_dataset(&mut ds, &content, &RemarkConfig::default())?;
            for e in &outcome.errors {
                log::warn!("{e}");
            }
            persist_dataset(&ds, &out)?;
            print_json(&serde_json::to_value(&outcome.stats).expect("stats serialize"));
        }
        Command::SzzCompare {
            dataset,
            out,
            ext,
            per_line,
            repo,
        } => {
            let ds = load_dataset(&dataset)?;
            let content = content_for(&ds, repo)?;
            let comparisons = szz_compare(&ds, &content, per_line)?;
            let report = summarize(&comparisons, &ext);
            let body = json!({ "summary": report, "comparisons": comparisons });
            let file = File::create(&out).map_err(io_err(&out))?;
            serde_json::to_writer_pretty(BufWriter::new(file), &body).map_err(|e| CliError::Data(Error::Invalid(e.to_string())))?;
            print!("{}", report.to_table());
        }
        Command::Features {
            dataset,
            out,
            ngram_order,
            lambda,
            repo,
        } => {
            let mut ds = load_dataset(&dataset)?;
            let content = content_for(&ds, repo)?;
            let settings = FeatureSettings {
                ngram_order,
                lambda,
                ..FeatureSettings::default()
            };
            let stats = compute_features(&mut ds, &content, settings)?;
            persist_dataset(&ds, &out)?;
            print_json(&serde_json::to_value(&stats).expect("stats serialize"));
        }
        Command::Evaluate {
            dataset,
            ruleset,
            java_ext,
            cost_factors,
        } => {
            let text = std::fs::read_to_string(&ruleset).map_err(io_err(&ruleset))?;
            let rs = parse_ruleset(&text)?;
            let ds = load_dataset(&dataset)?;
            let ov = evaluate(&rs, &ds, &java_ext)?;
            let t = ds.tickets.len();
            let costs: Vec<_> = cost_factors
                .iter()
                .map(|&c| json!({ "c": c, "cost": cost(&ov, c, t) }))
                .collect();
            print_json(&json!({
                "objectives": ov,
                "break_even": break_even(&ov, t),
                "tickets": t,
                "costs": costs,
            }));
        }
        Command::Baseline { dataset, share, seeds } => {
            let ds = load_dataset(&dataset)?;
            let ov = baseline_random(&ds, share, seeds)?;
            print_json(&json!({ "share": share, "seeds": seeds, "objectives": ov }));
        }
        Command::ExportLabels { dataset, out } => {
            let ds = load_dataset(&dataset)?;
            let file = File::create(&out).map_err(io_err(&out))?;
            let rows = write_labels(&ds, BufWriter::new(file))?;
            print_json(&json!({ "rows": rows }));
        }
        Command::Mine {
            dataset,
            seed,
            iterations,
            out,
            config,
        } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
                    serde_json::from_str::<MiningConfig>(&text)
                        .map_err(|e| CliError::Data(Error::Invalid(format!("{}: {e}", p.display()))))?
                }
                None => MiningConfig::default(),
            };
            cfg.seed = seed;
            let ds = load_dataset(&dataset)?;
            let mut engine = Engine::new(ds, cfg)?;
            engine.run(iterations);
            let file = File::create(&out).map_err(io_err(&out))?;
            write_archive(&engine.snapshot(), seed, iterations, BufWriter::new(file))?;
            print_json(&json!({
                "iterations": iterations,
                "archive_size": engine.archive().len(),
                "generation": engine.archive().generation(),
            }));
        }
        Command::ShowArchive { archive } => {
            let file = File::open(&archive).map_err(io_err(&archive))?;
            let (header, snapshot) = read_archive(BufReader::new(file))?;
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(
                stdout,
                "seed {} iterations {} entries {}",
                header.seed,
                header.iterations,
                snapshot.entries.len()
            );
            for e in &snapshot.entries {
                let _ = writeln!(stdout, "\n{} {:?}\n{}", e.id, e.objectives.to_array(), e.ruleset.to_text());
            }
        }
        Command::Serve {
            port,
            host,
            data_dir,
            dataset,
        } => serve(SocketAddr::new(host, port), data_dir, dataset)?,
    }
    Ok(())
}

fn serve(addr: SocketAddr, data_dir: Option<PathBuf>, dataset: Option<PathBuf>) -> Result<(), CliError> {
    let state = Arc::new(AppState {
        manager: SessionManager::new(data_dir),
        default_dataset: dataset,
    });
    let runtime = tokio::runtime::Runtime::new().map_err(io_err(Path::new("tokio runtime")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(io_err(Path::new("listen socket")))?;
        log::info!("listening on {addr}");
        axum::serve(listener, router(state)).await.map_err(io_err(Path::new("listen socket")))
    })
}
