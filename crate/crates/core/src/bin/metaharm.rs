//! `metaharm`: ingest standard schemas, train embedding models, crosswalk
//! source schemas, run the synthetic benchmark, and serve the review API.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or model error.

use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use metaharm::crosswalk::{
    crosswalk_schema, mapping_rows, train_classifier, write_mapping_csv, write_mapping_json, Mode,
    Strategy,
};
use metaharm::embedding::{load_model, save_model, train, Hyperparams};
use metaharm::error::Error;
use metaharm::eval::{run_benchmark, run_benchmark_on, BenchmarkConfig, PerturbationSpec};
use metaharm::ingest::{
    load_source_from_dataset_header, load_source_schema, load_standard_schema,
    refine_schema_with_report, to_canonical_json, Format,
};
use metaharm::model::{validate_schema, MetaField, MetaFields, StandardSchema, DEFAULT_THRESHOLD};
use metaharm::review::{read_decision_log, ReviewConfig, ReviewService};
use metaharm::textify::{dump_corpus, textify_schema};

#[derive(Parser)]
#[command(name = "metaharm", version, about = "Metadata crosswalk engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, validate and refine a standard schema; write canonical JSON.
    Ingest(IngestArgs),
    /// Train an embedding model on a standard schema.
    Train(TrainArgs),
    /// Crosswalk a source schema onto a standard schema.
    Match(MatchArgs),
    /// Run the synthetic benchmark and print an accuracy report.
    Eval(EvalArgs),
    /// Serve the steward review API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Standard schema, CSV or JSON.
    #[arg(long)]
    std: PathBuf,
    /// Canonical JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Input format; guessed from the extension by default.
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f32,
    #[arg(long, default_value_t = 0.0001)]
    min_lr: f32,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl HyperArgs {
    fn hyper(&self) -> Hyperparams {
        Hyperparams {
            dim: self.dim,
            epochs: self.epochs,
            learning_rate: self.lr,
            min_learning_rate: self.min_lr,
            negatives: self.negatives,
            min_count: self.min_count,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    std: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<Format>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Also write the textified corpus here, one sentence per line.
    #[arg(long)]
    dump_corpus: Option<PathBuf>,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, default_value = "levenshtein")]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u32,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Report below-threshold columns as unmatched.
    #[arg(long)]
    strict: bool,
    /// Extra metadata compared alongside the name, comma separated
    /// (verbose_name, business_terms, description, glossary_terms, dictionary_entry).
    #[arg(long, value_delimiter = ',')]
    meta_fields: Vec<MetaField>,
}

impl StrategyArgs {
    fn strategy(&self) -> Strategy {
        Strategy {
            mode: self.mode,
            threshold: self.threshold,
            k: self.k,
            use_meta_fields: self.meta_fields.iter().copied().collect::<MetaFields>(),
            strict: self.strict,
        }
    }
}

#[derive(Args)]
struct MatchArgs {
    /// Source schema, CSV or JSON.
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    std: PathBuf,
    /// Embedding model; required for the embedding and hybrid modes.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Mapping table output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; guessed from --out, CSV otherwise.
    #[arg(long)]
    out_format: Option<Format>,
    /// Treat --src as a dataset export whose header row is the column list.
    #[arg(long)]
    dataset_header: bool,
    /// Decision log whose records train the feedback classifier.
    #[arg(long)]
    decisions: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value_t = 1)]
    bench_seed: u64,
    /// Seed of the synthetic standard schema.
    #[arg(long, default_value_t = 1)]
    base_seed: u64,
    #[arg(long, default_value_t = 300)]
    base_entries: usize,
    /// Use this standard schema instead of a synthetic one.
    #[arg(long)]
    std: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    sources: usize,
    #[arg(long, default_value_t = 100)]
    columns: usize,
    #[arg(long, default_value_t = 0.3)]
    typo_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    abbreviation_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    reorder_rate: f64,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    std: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for the decision log and run journal; in-memory when absent.
    #[arg(long)]
    state_dir: Option<PathBuf>,
    #[arg(long)]
    auto_accept: bool,
    #[command(flatten)]
    strategy: StrategyArgs,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. }
            | Error::MissingNameColumn
            | Error::InvalidHyperparams(_)
            | Error::InvalidStrategy(_)
            | Error::InvalidPerturbation(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load_std(path: &Path, format: Option<Format>) -> Result<StandardSchema, Failure> {
    let format = format.unwrap_or_else(|| Format::from_path(path));
    Ok(load_standard_schema(path, format)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn cmd_ingest(args: IngestArgs) -> CmdResult {
    let raw = load_std(&args.std, args.format)?;
    let violations = validate_schema(&raw);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{}: {v}", args.std.display());
        }
        return Err(Failure::data(format!("{} violation(s)", violations.len())));
    }
    let (refined, report) = refine_schema_with_report(&raw);
    if !report.duplicates.is_empty() {
        eprintln!("{} duplicates removed", report.duplicates.len());
    }
    if !report.erroneous.is_empty() {
        eprintln!("{} entries with empty names removed", report.erroneous.len());
    }
    write_file(&args.out, to_canonical_json(&refined).as_bytes())?;
    println!("{} entries written to {}", refined.len(), args.out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let hyper = args.hyper.hyper();
    hyper.check()?;
    let schema = refine_schema_with_report(&load_std(&args.std, args.format)?).0;
    let corpus = textify_schema(&schema);
    if let Some(path) = &args.dump_corpus {
        write_file(path, dump_corpus(&corpus.sentences).as_bytes())?;
    }
    let model = train(&corpus, &hyper)?;
    save_model(&model, &args.out)?;
    let loss = model.loss_trace().last().copied().unwrap_or(f64::NAN);
    println!("final loss {loss:.6}");
    Ok(())
}

fn cmd_match(args: MatchArgs) -> CmdResult {
    let strategy = args.strategy.strategy();
    if strategy.mode.needs_model() && args.model.is_none() {
        return Err(Failure::usage(format!(
            "--mode {} requires --model",
            match strategy.mode {
                Mode::Embedding => "embedding",
                _ => "hybrid",
            }
        )));
    }
    let schema = refine_schema_with_report(&load_std(&args.std, None)?).0;
    let source = if args.dataset_header {
        load_source_from_dataset_header(&args.src)?
    } else {
        load_source_schema(&args.src, Format::from_path(&args.src))?
    };
    let model = args.model.as_deref().map(load_model).transpose()?;
    let clf = match &args.decisions {
        Some(path) => Some(train_classifier(&read_decision_log(path)?, &schema)?),
        None => None,
    };
    let results = crosswalk_schema(&source, &schema, model.as_ref(), clf.as_ref(), &strategy)?;
    let rows = mapping_rows(&results, &schema);

    let format = args.out_format.unwrap_or_else(|| {
        args.out
            .as_deref()
            .map_or(Format::Csv, Format::from_path)
    });
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_mapping_csv(&rows, &mut buf)?,
        Format::Json => write_mapping_json(&rows, &mut buf)?,
    }
    match &args.out {
        Some(path) => write_file(path, &buf)?,
        None => io::stdout()
            .write_all(&buf)
            .map_err(|e| Failure::data(e.to_string()))?,
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let config = BenchmarkConfig {
        base_entries: args.base_entries,
        base_seed: args.base_seed,
        n_sources: args.sources,
        columns_per_source: args.columns,
        perturbation: PerturbationSpec {
            typo_rate: args.typo_rate,
            abbreviation_rate: args.abbreviation_rate,
            reorder_rate: args.reorder_rate,
            seed: args.bench_seed,
            ..Default::default()
        },
        strategy: args.strategy.strategy(),
        hyper: args.hyper.hyper(),
    };
    config.perturbation.check()?;
    config.hyper.check()?;
    let run = match &args.std {
        Some(path) => run_benchmark_on(refine_schema_with_report(&load_std(path, None)?).0, &config)?,
        None => run_benchmark(&config)?,
    };
    print!("{}", run.report.render_table(&run.base));
    if let Some(path) = &args.json {
        let mut json = serde_json::to_string_pretty(&run.report).map_err(|e| Failure::data(e.to_string()))?;
        json.push('\n');
        write_file(path, json.as_bytes())?;
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> CmdResult {
    let schema = refine_schema_with_report(&load_std(&args.std, None)?).0;
    let model = args.model.as_deref().map(load_model).transpose()?;
    let strategy = args.strategy.strategy();
    strategy.check(model.as_ref())?;
    let service = ReviewService::open(
        schema,
        model,
        ReviewConfig {
            auto_accept: args.auto_accept,
            state_dir: args.state_dir,
            default_strategy: strategy,
        },
    )?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::data(e.to_string()))?;
    eprintln!("listening on {}", args.addr);
    runtime
        .block_on(metaharm::server::serve(args.addr, Arc::new(service)))
        .map_err(|e| Failure::usage(format!("{}: {e}", args.addr)))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Train(a) => cmd_train(a),
        Command::Match(a) => cmd_match(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
