use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spanshap_core::{ContextMode, ReferenceScores, Scorer};
use spanshap_pipeline::clarify::context_for;
use spanshap_pipeline::detect::{load_reference, render_table, write_outputs};
use spanshap_pipeline::{
    load_dataset, recompute, run_detection, AttributionRequest, DetectionOptions, Pipeline, RunOptions, Stage,
};

use crate::error::ServiceError;
use crate::render::{attribution_table, outcome_summary};
use crate::service::{self, AppState};
use crate::settings::{BackendKind, FileConfig, Overrides, Settings};

#[derive(Debug, Parser)]
#[command(name = "spanshap", version, about = "Attribute answer uncertainty to ambiguous input spans")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true, env = "SPANSHAP_CONFIG")]
    pub config: Option<PathBuf>,
    /// Run store directory.
    #[arg(long, global = true, env = "SPANSHAP_STORE")]
    pub store: Option<PathBuf>,
    #[arg(long, global = true, env = "SPANSHAP_BACKEND")]
    pub backend: Option<BackendKind>,
    /// Mock script; the `.json` extension may be omitted.
    #[arg(long, global = true, env = "SPANSHAP_SCRIPT")]
    pub script: Option<PathBuf>,
    #[arg(long, global = true, env = "SPANSHAP_MODEL")]
    pub model: Option<String>,
    #[arg(long, global = true, env = "SPANSHAP_BASE_URL")]
    pub base_url: Option<String>,
    /// Premises per span (m).
    #[arg(long, global = true, env = "SPANSHAP_PREMISES")]
    pub premises: Option<usize>,
    /// Answers per joint clarification.
    #[arg(long, global = true, env = "SPANSHAP_ANSWERS")]
    pub answers: Option<usize>,
    #[arg(long, global = true, env = "SPANSHAP_ANSWERER_TEMPERATURE")]
    pub answerer_temperature: Option<f64>,
    #[arg(long, global = true, env = "SPANSHAP_GENERATOR_TEMPERATURE")]
    pub generator_temperature: Option<f64>,
    #[arg(long, global = true, env = "SPANSHAP_MAX_WORKERS")]
    pub max_workers: Option<usize>,
    #[arg(long, global = true, env = "SPANSHAP_MAX_RETRIES")]
    pub max_retries: Option<usize>,
    #[arg(long, global = true, env = "SPANSHAP_MAX_SPANS")]
    pub max_spans: Option<usize>,
    /// `qa`, `nli`, or a directory of templates.
    #[arg(long, global = true, env = "SPANSHAP_PROMPT_SET")]
    pub prompt_set: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Output {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Mode {
    Baseline,
    #[default]
    Localized,
}

impl From<Mode> for ContextMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Baseline => ContextMode::Baseline,
            Mode::Localized => ContextMode::Localized,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attribute the uncertainty of one input to its spans.
    Attribute {
        /// Input text; use --file to read it from a file.
        #[arg(required_unless_present = "file", conflicts_with = "file")]
        input: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        /// Extra context shown to the localizer.
        #[arg(long)]
        context: Option<String>,
        #[arg(long, value_enum, default_value_t)]
        output: Output,
        #[arg(long, hide = true, value_parser = parse_stage)]
        stop_after: Option<Stage>,
    },
    /// Score a labeled dataset and report detection metrics.
    Detect {
        /// JSON-lines dataset.
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_scorer, default_value = "shaq-total,shaq-max,loo-total,loo-max,mi-total")]
        scorers: Vec<Scorer>,
        /// Keep only examples with at least this many spans.
        #[arg(long, default_value_t = 0)]
        min_spans: usize,
        /// Directory for metrics.json, metrics.txt and scores.jsonl.
        #[arg(long, default_value = "detection")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        output: Output,
    },
    /// Rewrite an input guided by its attributions and measure the effect.
    Clarify {
        input: String,
        #[arg(long, value_enum, default_value_t)]
        mode: Mode,
        /// Read revisions from stdin instead of asking the model.
        #[arg(long)]
        interactive: bool,
        /// Detection output directory whose scores situate this input.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, value_parser = parse_scorer, default_value = "shaq-total")]
        reference_scorer: Scorer,
        #[arg(long, value_enum, default_value_t)]
        output: Output,
    },
    /// Run the JSON service.
    Serve {
        #[arg(long, env = "SPANSHAP_BIND")]
        bind: Option<String>,
    },
    /// Recompute a stored run's report from its bottom table.
    Recompute { run_id: String },
    /// Print a stored run as one JSON archive.
    Export {
        run_id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Config,
}

/// Usage errors share the bad-request exit code.
const USAGE_EXIT: i32 = 64;

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

fn parse_scorer(s: &str) -> Result<Scorer, String> {
    s.parse().map_err(|e: spanshap_core::MetricsError| e.to_string())
}

impl GlobalArgs {
    fn settings(&self, bind: Option<String>) -> Result<Settings, ServiceError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let overrides = Overrides {
            store: self.store.clone(),
            backend: self.backend,
            script: self.script.clone(),
            model: self.model.clone(),
            base_url: self.base_url.clone(),
            premises_per_span: self.premises,
            answers_per_assignment: self.answers,
            answerer_temperature: self.answerer_temperature,
            generator_temperature: self.generator_temperature,
            max_workers: self.max_workers,
            max_retries: self.max_retries,
            max_spans: self.max_spans,
            prompt_set: self.prompt_set.clone(),
            bind,
        };
        Settings::resolve(file, overrides)
    }
}

fn pipeline(settings: &Settings) -> Result<Pipeline, ServiceError> {
    Ok(Pipeline::new(settings.build_backend()?, settings.open_store()?))
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, ServiceError> {
    serde_json::to_string_pretty(value).map_err(|e| ServiceError::internal(e.to_string()))
}

fn io_err(e: std::io::Error) -> ServiceError {
    ServiceError::internal(e.to_string())
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { USAGE_EXIT } else { 0 };
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            if let Some(stage) = e.stage {
                eprintln!("stage: {stage}");
            }
            e.code.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), ServiceError> {
    let g = &cli.global;
    match cli.command {
        Command::Attribute {
            input,
            file,
            context,
            output,
            stop_after,
        } => {
            let settings = g.settings(None)?;
            let input = match (input, file) {
                (Some(i), _) => i,
                (None, Some(path)) => std::fs::read_to_string(&path)
                    .map(|s| s.trim_end().to_string())
                    .map_err(|e| ServiceError::bad_request(format!("{}: {e}", path.display())))?,
                (None, None) => return Err(ServiceError::bad_request("no input given")),
            };
            let request = AttributionRequest {
                input,
                context,
                config: settings.pipeline.clone(),
            };
            let outcome = pipeline(&settings)?.run_with(&request, RunOptions { stop_after })?;
            match output {
                Output::Table => print!("{}", attribution_table(&outcome)),
                Output::Json => println!("{}", json(&outcome)?),
            }
        }
        Command::Detect {
            dataset,
            scorers,
            min_spans,
            out,
            output,
        } => {
            let settings = g.settings(None)?;
            let examples = load_dataset(&dataset)?;
            let p = pipeline(&settings)?;
            let options = DetectionOptions {
                config: settings.pipeline.clone(),
                scorers,
                min_spans,
            };
            let report = run_detection(&p, &examples, &options);
            write_outputs(&out, &report).map_err(io_err)?;
            match output {
                Output::Table => print!("{}", render_table(&report)),
                Output::Json => println!("{}", json(&report.rows)?),
            }
        }
        Command::Clarify {
            input,
            mode,
            interactive,
            reference,
            reference_scorer,
            output,
        } => {
            let settings = g.settings(None)?;
            let p = pipeline(&settings)?;
            let reference = match reference {
                Some(dir) => load_reference(&dir, reference_scorer)?,
                None => ReferenceScores::default(),
            };
            let request = AttributionRequest {
                input,
                context: None,
                config: settings.pipeline.clone(),
            };
            if interactive {
                return interactive_session(&p, &request, mode.into(), &reference);
            }
            let round = p.clarify(&request, mode.into(), &reference)?;
            match output {
                Output::Table => {
                    print!("{}", attribution_table(&round.before));
                    print!("{}", outcome_summary(&round.outcome));
                    print!("{}", attribution_table(&round.after));
                }
                Output::Json => println!("{}", json(&round)?),
            }
        }
        Command::Serve { bind } => {
            let settings = g.settings(bind)?;
            let state = AppState {
                pipeline: pipeline(&settings)?,
                config: settings.pipeline.clone(),
            };
            let runtime = tokio::runtime::Runtime::new().map_err(io_err)?;
            runtime.block_on(service::serve(state, &settings.bind)).map_err(io_err)?;
        }
        Command::Recompute { run_id } => {
            let settings = g.settings(None)?;
            let store = settings.open_store()?;
            let report = recompute(&store, &run_id)?;
            let stored: spanshap_core::AttributionReport = store.require_stage(&run_id, Stage::Report)?;
            println!("{}", json(&report)?);
            if report != stored {
                return Err(ServiceError::internal(format!(
                    "recomputed report differs from the stored report of run {run_id}"
                )));
            }
            eprintln!("matches the stored report");
        }
        Command::Export { run_id, out } => {
            let settings = g.settings(None)?;
            let archive = settings.open_store()?.export(&run_id)?;
            let text = json(&archive)? + "\n";
            match out {
                Some(path) => std::fs::write(&path, text).map_err(io_err)?,
                None => print!("{text}"),
            }
        }
        Command::Config => {
            let settings = g.settings(None)?;
            println!("{}", json(&settings)?);
        }
    }
    Ok(())
}

/// Reads one revision per line until end of input.
fn interactive_session(
    p: &Pipeline,
    request: &AttributionRequest,
    mode: ContextMode,
    reference: &ReferenceScores,
) -> Result<(), ServiceError> {
    let mut current = p.run(request)?;
    let initial = current.report.root_entropy;
    print!("{}", attribution_table(&current));
    let context = context_for(&current, reference, mode);
    print!("{}", context.query);
    if let Some(spans) = &context.spans {
        print!("{spans}");
    }
    let mut rounds = 0;
    let mut edits = 0;
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        eprint!("revision> ");
        let _ = std::io::stderr().flush();
        let line = match lines.next() {
            None => break,
            Some(line) => line.map_err(io_err)?,
        };
        let revised = line.trim();
        if revised.is_empty() {
            continue;
        }
        match p.revise(&current.run_id, revised) {
            Ok((outcome, after)) => {
                rounds += 1;
                edits += outcome.edit_distance;
                print!("{}", outcome_summary(&outcome));
                print!("{}", attribution_table(&after));
                current = after;
            }
            Err(e) => eprintln!("{}", ServiceError::from(e)),
        }
    }
    eprintln!();
    println!(
        "session: {rounds} rounds, delta H = {:.4} nats, edit distance = {edits} words",
        initial - current.report.root_entropy
    );
    Ok(())
}
