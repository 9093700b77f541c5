//! `qvid` — operator entry point for the video QA harness.

mod config;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use qvid_core::datasets::{self, SourceFormat};
use qvid_core::error::{Error, Result};
use qvid_core::eval::{self, ReportFormat};
use qvid_core::mock;
use qvid_core::pipeline::{self, Pipeline, ProgressSink};
use qvid_core::templates::{self, TemplateRegistry};

use config::{EndpointFlags, FileConfig, PipelineFlags};

#[derive(Parser)]
#[command(
    name = "qvid",
    version,
    about = "Zero-shot multiple-choice video QA via question-dependent frame captions",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a benchmark annotation file to normalized JSONL
    Ingest(IngestArgs),
    /// Run the captioning + reasoning pipeline over a dataset
    Run(RunArgs),
    /// Score a prediction file against a dataset
    Eval(EvalArgs),
    /// Run the template-ablation matrix
    Ablate(AblateArgs),
    /// Serve the deterministic mock inference server
    MockServe(MockServeArgs),
    /// Inspect the prompt-template catalog
    Templates(TemplatesArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Source benchmark: nextqa | star | how2qa | tvqa | intentqa
    #[arg(long)]
    format: String,
    /// Annotation file in the benchmark's published layout
    #[arg(long)]
    input: PathBuf,
    /// Directory the video media lives under
    #[arg(long)]
    media_root: Option<PathBuf>,
    /// Normalized JSONL destination
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Normalized dataset (JSONL)
    #[arg(long)]
    dataset: PathBuf,
    /// Directory dataset media paths resolve against
    #[arg(long)]
    media_root: PathBuf,
    /// Output directory (predictions, partial log, manifest)
    #[arg(long)]
    out: PathBuf,
    /// Config file (TOML); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue from this output directory's completed-record log
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    endpoints: EndpointFlags,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction file written by `qvid run`
    #[arg(long)]
    predictions: PathBuf,
    /// Normalized dataset with gold labels
    #[arg(long)]
    dataset: PathBuf,
    /// Check media existence against this root while loading
    #[arg(long)]
    media_root: Option<PathBuf>,
    /// plain | json
    #[arg(long, default_value = "plain")]
    format: String,
    /// Credit unparsed predictions with chance accuracy (1/m) instead of zero
    #[arg(long)]
    impute_unparsed: bool,
    /// Also write the rendered report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// Normalized dataset (JSONL)
    #[arg(long)]
    dataset: PathBuf,
    /// Directory dataset media paths resolve against
    #[arg(long)]
    media_root: PathBuf,
    /// Output directory (per-cell runs plus ablation.json)
    #[arg(long)]
    out: PathBuf,
    /// Captioning template ids (comma-separated)
    #[arg(long, value_delimiter = ',', required = true)]
    caption_templates: Vec<String>,
    /// QA template ids (comma-separated)
    #[arg(long, value_delimiter = ',', required = true)]
    qa_templates: Vec<String>,
    /// Config file (TOML); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// plain | json (stdout rendering)
    #[arg(long, default_value = "plain")]
    format: String,
    #[command(flatten)]
    endpoints: EndpointFlags,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct MockServeArgs {
    /// Port to bind on 127.0.0.1 (0 picks an ephemeral port)
    #[arg(long, default_value_t = 8750)]
    port: u16,
    /// Rig rule file: `<caption|generate|any> "pattern" => "response"`
    #[arg(long)]
    rig: Option<PathBuf>,
    /// Append every request to this JSONL log
    #[arg(long)]
    log: Option<PathBuf>,
    /// Fixed per-request delay in milliseconds
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

#[derive(Args)]
struct TemplatesArgs {
    #[command(subcommand)]
    action: TemplatesAction,
    /// Extra template catalog merged over the built-ins
    #[arg(long)]
    templates_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TemplatesAction {
    /// List template ids, kinds and descriptions
    List,
    /// Print one template body byte-exactly
    Show { id: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.class());
            if matches!(e, Error::Interrupted(_)) {
                ExitCode::from(130)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

async fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Run(args) => cmd_run(args).await,
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => cmd_ablate(args).await,
        Command::MockServe(args) => cmd_mock_serve(args).await,
        Command::Templates(args) => cmd_templates(args),
    }
}

fn build_registry(templates_file: Option<&PathBuf>) -> Result<Arc<TemplateRegistry>> {
    let mut registry = TemplateRegistry::with_builtins();
    if let Some(path) = templates_file {
        for template in templates::load_catalog_file(path)? {
            registry.register(template)?;
        }
    }
    Ok(Arc::new(registry))
}

fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

/// Ticker on stderr; failures always get their own line.
struct StderrProgress;

impl ProgressSink for StderrProgress {
    fn on_record(&self, done: usize, total: usize, record_id: &str, failed: bool) {
        let mut err = std::io::stderr().lock();
        if failed {
            let _ = writeln!(err, "\nrecord {record_id} failed");
        }
        let _ = write!(err, "\r{done}/{total} records");
        if done == total {
            let _ = writeln!(err);
        }
        let _ = err.flush();
    }
}

fn spawn_cancel_watch() -> Arc<AtomicBool> {
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = cancel.clone();
    tokio::spawn(async move {
        if tokio::signal::ctrl_c().await.is_ok() {
            eprintln!("\ninterrupt received; draining in-flight records");
            flag.store(true, Ordering::SeqCst);
        }
    });
    cancel
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let format: SourceFormat = args.format.parse()?;
    let outcome = datasets::adapt(format, &args.input, args.media_root.as_deref())?;
    datasets::save_normalized(&outcome.dataset, &args.out, args.media_root.as_deref())?;
    if !outcome.drops.is_empty() {
        let drop_path = drop_log_path(&args.out);
        let mut text = String::new();
        for drop in &outcome.drops {
            text.push_str(&serde_json::to_string(drop).expect("drop entry serializes"));
            text.push('\n');
        }
        std::fs::write(&drop_path, text)?;
        eprintln!(
            "dropped {} rows (see {})",
            outcome.drops.len(),
            drop_path.display()
        );
    }
    let counts = outcome.dataset.per_type_counts();
    println!(
        "wrote {} records to {}",
        outcome.dataset.len(),
        args.out.display()
    );
    for (qtype, n) in counts {
        println!("  {}: {n}", qtype.as_deref().unwrap_or("(untyped)"));
    }
    Ok(())
}

fn drop_log_path(out: &std::path::Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ingest".into());
    out.with_file_name(format!("{name}.drops.jsonl"))
}

async fn cmd_run(args: RunArgs) -> Result<()> {
    let file = load_file_config(args.config.as_ref())?;
    let (cfg, templates_file) =
        config::resolve_pipeline_config(&file, &args.endpoints, &args.pipeline)?;
    let registry = build_registry(templates_file.as_ref())?;
    let dataset = datasets::load_normalized(&args.dataset, Some(&args.media_root))?;
    let pipeline = Pipeline::new(cfg, registry)?;
    let cancel = spawn_cancel_watch();
    let outcome = pipeline
        .run_dataset(&dataset, &args.out, args.resume, &StderrProgress, &cancel)
        .await?;
    println!(
        "{} predictions -> {} ({} failed, {} unparsed)",
        outcome.predictions.len(),
        args.out.join(pipeline::PREDICTIONS_FILE).display(),
        outcome.manifest.n_failed,
        outcome.manifest.n_unparsed,
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let predictions = pipeline::load_predictions(&args.predictions)?;
    let dataset = datasets::load_normalized(&args.dataset, args.media_root.as_deref())?;
    let report = eval::score_with(&predictions, &dataset, args.impute_unparsed)?;
    let rendered = match format {
        ReportFormat::Plain => eval::render_report_plain(&report),
        ReportFormat::Json => eval::render_report_json(&report),
    };
    print!("{rendered}");
    if !rendered.ends_with('\n') {
        println!();
    }
    if let Some(out) = &args.out {
        std::fs::write(out, rendered)?;
    }
    Ok(())
}

async fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let file = load_file_config(args.config.as_ref())?;
    let (cfg, templates_file) =
        config::resolve_pipeline_config(&file, &args.endpoints, &args.pipeline)?;
    let registry = build_registry(templates_file.as_ref())?;
    let dataset = datasets::load_normalized(&args.dataset, Some(&args.media_root))?;
    let cancel = spawn_cancel_watch();
    let matrix = eval::ablate(
        &dataset,
        &args.caption_templates,
        &args.qa_templates,
        &cfg,
        registry,
        &args.out,
        &StderrProgress,
        &cancel,
    )
    .await?;
    let json = eval::render_matrix_json(&matrix);
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("ablation.json"), &json)?;
    match format {
        ReportFormat::Plain => print!("{}", eval::render_matrix_plain(&matrix)),
        ReportFormat::Json => println!("{json}"),
    }
    Ok(())
}

async fn cmd_mock_serve(args: MockServeArgs) -> Result<()> {
    let rig = match &args.rig {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
            mock::parse_rig_rules(&text)?
        }
        None => Vec::new(),
    };
    let handle = mock::serve(mock::ServeOptions {
        port: args.port,
        rig,
        fixed_delay_ms: args.delay_ms,
        log_path: args.log.clone(),
    })
    .await?;
    println!("mock server listening on {}", handle.base_url());
    std::io::stdout().flush()?;
    handle.wait().await;
    Ok(())
}

fn cmd_templates(args: TemplatesArgs) -> Result<()> {
    let registry = build_registry(args.templates_file.as_ref())?;
    match args.action {
        TemplatesAction::List => {
            for t in registry.iter() {
                println!("{}\t{}\t{}", t.template_id, t.kind.as_str(), t.description);
            }
        }
        TemplatesAction::Show { id } => {
            let t = registry.get(&id)?;
            print!("{}", t.body);
            if !t.body.ends_with('\n') {
                println!();
            }
        }
    }
    Ok(())
}
