use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use telekit::api::{self, ApiConfig};
use telekit::objectives::eval_jsonl;
use telekit_core::pipeline::{run_pipeline, run_stage, PipelineConfig, ReviewStore, Stage, StageReport};
use telekit_core::Exec;

#[derive(Parser)]
#[command(name = "telekit", version, about = "Telecom corpus-to-benchmark toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Run data-parallel steps on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, gate and segment the raw corpus.
    Ingest(Common),
    /// Keep documents with enough telecom keyword density.
    Filter(Common),
    /// Remove exact and near-duplicate documents.
    Dedup(Common),
    /// Generate benchmark and instruction items.
    Forge(Common),
    /// Score model responses and write report tables.
    Score(Common),
    /// Write reviewed datasets and a manifest.
    Export {
        #[command(flatten)]
        common: Common,
        /// Include items still awaiting review.
        #[arg(long)]
        include_pending: bool,
        /// Kinds to export (repeatable); default is every kind present.
        #[arg(long = "kind")]
        kinds: Vec<String>,
    },
    /// Validate the config and run every stage in order.
    Run(Common),
    /// Training-objective evaluation.
    #[command(subcommand)]
    Objectives(ObjectivesCommand),
    /// Human review service.
    #[command(subcommand)]
    Review(ReviewCommand),
}

#[derive(Subcommand)]
enum ObjectivesCommand {
    /// Evaluate one JSON record per line; results go to one JSON line each.
    Eval {
        /// Optional pipeline configuration; only its `parallel` flag is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input records; `-` reads standard input.
        #[arg(long, default_value = "-")]
        input: String,
        /// Output file; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReviewCommand {
    /// Serve the review API and UI assets.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Listen address, overriding `review.bind`.
        #[arg(long)]
        bind: Option<SocketAddr>,
        /// UI asset directory, overriding `review.static_dir`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if common.sequential {
        cfg.parallel = false;
    }
    Ok(cfg)
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn stage(common: &Common, stage: Stage) -> Result<()> {
    let cfg = load(common)?;
    let report: StageReport = run_stage(&cfg, stage).with_context(|| format!("{stage} stage failed"))?;
    print_json(&report)
}

fn objectives_eval(config: Option<&Path>, input: &str, output: Option<&Path>) -> Result<()> {
    let exec = match config {
        Some(p) => PipelineConfig::load(p)?.exec(),
        None => Exec::default(),
    };
    let reader: Box<dyn io::BufRead> = if input == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(BufReader::new(
            File::open(input).with_context(|| format!("cannot open {input}"))?,
        ))
    };
    let summary = match output {
        Some(p) => eval_jsonl(reader, BufWriter::new(File::create(p)?), exec)?,
        None => eval_jsonl(reader, io::stdout().lock(), exec)?,
    };
    log::info!("evaluated {} record(s)", summary.records);
    if let Some(d) = summary.dpo {
        eprintln!(
            "dpo: {} pair(s), mean loss {:.6}, mean reward margin {:.6}",
            d.count, d.mean_loss, d.mean_reward_margin
        );
    }
    Ok(())
}

fn serve(common: &Common, bind: Option<SocketAddr>, static_dir: Option<PathBuf>) -> Result<()> {
    let cfg = load(common)?;
    let items = cfg.items_path();
    if !items.exists() {
        bail!("no forged items at {}; run `telekit forge` first", items.display());
    }
    let store = Arc::new(ReviewStore::open(&items, &cfg.journal_path())?);
    let addr: SocketAddr = match bind {
        Some(a) => a,
        None => cfg
            .review
            .bind
            .parse()
            .with_context(|| format!("invalid review.bind {:?}", cfg.review.bind))?,
    };
    let static_dir = static_dir.or(cfg.review.static_dir.clone());
    if let Some(d) = &static_dir {
        if !d.is_dir() {
            bail!("static directory {} does not exist", d.display());
        }
    }
    let app = api::router(
        store.clone(),
        ApiConfig {
            token: Some(cfg.review.token.clone()),
            static_dir,
            ..ApiConfig::default()
        },
    );
    let stats = store.stats();
    tokio::runtime::Runtime::new()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        log::info!(
            "review API on http://{} ({} pending of {} items; auth {})",
            listener.local_addr()?,
            stats.pending,
            stats.total,
            if cfg.review.token.is_empty() { "off" } else { "on" }
        );
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Ingest(c) => stage(&c, Stage::Ingest),
        Command::Filter(c) => stage(&c, Stage::Filter),
        Command::Dedup(c) => stage(&c, Stage::Dedup),
        Command::Forge(c) => stage(&c, Stage::Forge),
        Command::Score(c) => stage(&c, Stage::Score),
        Command::Export {
            common,
            include_pending,
            kinds,
        } => {
            let mut cfg = load(&common)?;
            cfg.export.include_pending |= include_pending;
            if !kinds.is_empty() {
                cfg.export.kinds = kinds;
            }
            print_json(&run_stage(&cfg, Stage::Export).context("export stage failed")?)
        }
        Command::Run(c) => {
            let cfg = load(&c)?;
            print_json(&run_pipeline(&cfg)?)
        }
        Command::Objectives(ObjectivesCommand::Eval { config, input, output }) => {
            objectives_eval(config.as_deref(), &input, output.as_deref())
        }
        Command::Review(ReviewCommand::Serve {
            common,
            bind,
            static_dir,
        }) => serve(&common, bind, static_dir),
    }
}
