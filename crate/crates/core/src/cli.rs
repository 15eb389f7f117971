//! The `prospect` command line: ingest -> build -> query -> report.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime/data error. Every run
//! logs its effective parameter set (including the seed) to stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::corpus::{load_multiwoz, load_sgd, read_normalized, write_normalized, Corpus};
use crate::embed::{EmbedderConfig, EmbedderKind, DEFAULT_BATCH_SIZE, DEFAULT_DIM, DEFAULT_SEED};
use crate::error::Error;
use crate::prospect::{query, write_hits, KeywordSet};
use crate::report::{
    export_model, import_model, render_table, turn_distribution, write_turn_histogram, TableFormat,
};
use crate::segment::{build_documents_with_stats, default_stopwords, SegmentMode, StopwordList};
use crate::topics::{fit, FitParams, DEFAULT_MERGE_THRESHOLD};

pub const ENV_SERVICE_URL: &str = "PROSPECT_EMBED_URL";

#[derive(Parser)]
#[command(
    name = "prospect",
    version,
    about = "Mine chit-chat sequences out of task-oriented dialogue corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an SGD- or MultiWOZ-shaped corpus and write normalized JSON-lines
    Ingest(IngestArgs),
    /// Fit a topic model over a normalized corpus and write the model artifact
    Build(BuildArgs),
    /// Retrieve the topics most similar to a set of keywords
    Query(QueryArgs),
    /// Render hits as a table and/or a turn-number histogram
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Sgd,
    Multiwoz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Utterances,
    FilteredClauses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum EmbedderArg {
    Lexical,
    Service,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableArg {
    Md,
    Csv,
}

#[derive(Args)]
struct IngestArgs {
    /// Source corpus shape
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Source file (or directory of SGD JSON files)
    #[arg(long)]
    input: PathBuf,
    /// Normalized JSON-lines output file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    /// Normalized corpus (JSON-lines)
    #[arg(long)]
    corpus: PathBuf,
    /// Document granularity fed to the topic model
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Embedding provider
    #[arg(long, value_enum)]
    embedder: Option<EmbedderArg>,
    /// Lexical embedder dimensionality
    #[arg(long)]
    dim: Option<usize>,
    /// Embedding service base URL (falls back to PROSPECT_EMBED_URL)
    #[arg(long)]
    service_url: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_components: Option<usize>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long)]
    merge_threshold: Option<f64>,
    /// Stopword list file (one lowercase word per line)
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Optional JSON config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model artifact output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Model artifact directory written by `build`
    #[arg(long)]
    model: PathBuf,
    /// Semicolon-separated keyword phrases (default: the built-in five)
    #[arg(long)]
    keywords: Option<String>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Optional JSON config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hits output file (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Hits file written by `query`
    #[arg(long)]
    hits: PathBuf,
    /// Table format printed to stdout
    #[arg(long, value_enum, default_value = "md")]
    table: TableArg,
    /// Also write a (turn,count) CSV histogram to this file
    #[arg(long)]
    turn_histogram: Option<PathBuf>,
}

/// Optional JSON config; every field can be overridden by a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mode: Option<ModeArg>,
    embedder: Option<EmbedderArg>,
    dim: Option<usize>,
    seed: Option<u64>,
    n_components: Option<usize>,
    min_cluster_size: Option<usize>,
    min_samples: Option<usize>,
    merge_threshold: Option<f64>,
    service_url: Option<String>,
    stopwords: Option<PathBuf>,
    keywords: Option<String>,
    top_k: Option<usize>,
}

enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

/// Entry point used by `main` and by tests. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Ingest(args) => run_ingest(args),
        Command::Build(args) => run_build(args),
        Command::Query(args) => run_query(args),
        Command::Report(args) => run_report(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            1
        }
        Err(CliError::Runtime(error)) => {
            eprintln!("error: {error}");
            let mut source = std::error::Error::source(&error);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            2
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let raw = crate::jsonutil::read_to_string(path)?;
    let value = crate::jsonutil::parse_value(path, &raw)?;
    Ok(crate::jsonutil::from_value(path, "", value)?)
}

fn run_ingest(args: IngestArgs) -> Result<(), CliError> {
    eprintln!(
        "prospect ingest: format={:?} input={} out={}",
        args.format,
        args.input.display(),
        args.out.display()
    );
    let corpus: Corpus = match args.format {
        FormatArg::Sgd => load_sgd(&args.input)?,
        FormatArg::Multiwoz => load_multiwoz(&args.input)?,
    };
    write_normalized(&corpus, &args.out)?;
    eprintln!(
        "prospect ingest: wrote {} dialogues / {} turns{}",
        corpus.dialogue_count(),
        corpus.turn_count(),
        corpus
            .metadata
            .get("multiwoz_shape")
            .map(|s| format!(" (detected shape: {s})"))
            .unwrap_or_default()
    );
    Ok(())
}

fn run_build(args: BuildArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;

    let mode = args.mode.or(config.mode).unwrap_or(ModeArg::Utterances);
    let embedder_kind = args
        .embedder
        .or(config.embedder)
        .unwrap_or(EmbedderArg::Lexical);
    let dim = args.dim.or(config.dim).unwrap_or(DEFAULT_DIM);
    let seed = args.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let params = FitParams {
        n_components: args.n_components.or(config.n_components).unwrap_or(5),
        min_cluster_size: args
            .min_cluster_size
            .or(config.min_cluster_size)
            .unwrap_or(10),
        min_samples: args.min_samples.or(config.min_samples).unwrap_or(5),
        merge_threshold: args
            .merge_threshold
            .or(config.merge_threshold)
            .unwrap_or(DEFAULT_MERGE_THRESHOLD),
        seed,
    };

    let embedder = match embedder_kind {
        EmbedderArg::Lexical => EmbedderConfig::lexical(dim, seed),
        EmbedderArg::Service => {
            let url = args
                .service_url
                .or(config.service_url)
                .or_else(|| std::env::var(ENV_SERVICE_URL).ok())
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "--embedder service requires --service-url or {ENV_SERVICE_URL}"
                    ))
                })?;
            let mut cfg = EmbedderConfig::service(url, DEFAULT_BATCH_SIZE);
            cfg.seed = seed;
            cfg
        }
    };

    eprintln!(
        "prospect build: corpus={} mode={mode:?} embedder={embedder_kind:?} dim={dim} seed={seed} \
         n_components={} min_cluster_size={} min_samples={} merge_threshold={} out={}",
        args.corpus.display(),
        params.n_components,
        params.min_cluster_size,
        params.min_samples,
        params.merge_threshold,
        args.out.display()
    );

    let stopword_path = args.stopwords.or(config.stopwords);
    let stopwords: StopwordList = match &stopword_path {
        Some(path) => StopwordList::from_file(path)?,
        None => default_stopwords().clone(),
    };

    let corpus = read_normalized(&args.corpus)?;
    let segment_mode = match mode {
        ModeArg::Utterances => SegmentMode::Utterances,
        ModeArg::FilteredClauses => SegmentMode::FilteredClauses,
    };
    let (documents, stats) =
        build_documents_with_stats(&corpus, segment_mode, &embedder, &stopwords)?;
    eprintln!(
        "prospect build: {} turns -> {} documents (single-clause: {}, fully task-related: {}, short clauses skipped: {})",
        stats.turns, stats.documents, stats.single_clause_turns, stats.fully_task_turns, stats.skipped_short_clauses
    );

    let model = fit(documents, &embedder, &params)?;
    export_model(&model, &args.out)?;
    eprintln!(
        "prospect build: {} topics over {} documents ({} noise), artifact at {}",
        model.num_topics(),
        model.documents.len(),
        model.assignment.noise_count(),
        args.out.display()
    );
    Ok(())
}

fn run_query(args: QueryArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let keywords = match args.keywords.or(config.keywords) {
        Some(raw) => KeywordSet::parse(&raw).map_err(|e| CliError::Usage(e.to_string()))?,
        None => KeywordSet::default(),
    };
    let top_k = args.top_k.or(config.top_k).unwrap_or(5);
    if top_k < 1 {
        return Err(CliError::Usage("--top-k must be >= 1".into()));
    }

    let model = import_model(&args.model)?;
    let mut embedder = model.embedder.clone();
    if embedder.kind == EmbedderKind::Service && embedder.service_url.is_none() {
        embedder.service_url = std::env::var(ENV_SERVICE_URL).ok();
        if embedder.service_url.is_none() {
            return Err(CliError::Usage(format!(
                "model was built with a service embedder; set {ENV_SERVICE_URL}"
            )));
        }
    }
    eprintln!(
        "prospect query: model={} keywords={:?} top_k={top_k} embedder={:?} seed={} out={}",
        args.model.display(),
        keywords.keywords(),
        embedder.kind,
        embedder.seed,
        args.out.display()
    );

    let hits = query(&model, &keywords, &embedder, top_k)?;
    write_hits(&hits, &args.out)?;
    eprintln!(
        "prospect query: wrote {} hits to {}",
        hits.len(),
        args.out.display()
    );
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), CliError> {
    eprintln!(
        "prospect report: hits={} table={:?} turn_histogram={}",
        args.hits.display(),
        args.table,
        args.turn_histogram
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "-".into())
    );
    let hits = crate::prospect::read_hits(&args.hits)?;
    let format = match args.table {
        TableArg::Md => TableFormat::Markdown,
        TableArg::Csv => TableFormat::Csv,
    };
    print!("{}", render_table(&hits, format));
    if let Some(path) = &args.turn_histogram {
        let distribution = turn_distribution(&hits);
        write_turn_histogram(&distribution, path)?;
        eprintln!("prospect report: histogram written to {}", path.display());
    }
    Ok(())
}
