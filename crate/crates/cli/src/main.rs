use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use annoproj::backend::{backend_registry, AuditLog, ReplayBackend, TranslationBackend, Translator};
use annoproj::codec::{codec_for_path, codec_registry};
use annoproj::corpus::{list_corpus_files, read_document, write_document};
use annoproj::eval::io::{read_jsonl, score_records, write_jsonl, ScoreRecord};
use annoproj::eval::{make_training_sequences, matcher_registry, SequenceMode, Task, TrainingPair};
use annoproj::pipeline::{project_corpus, ProjectionReport, Projector};
use annoproj::qa::Lexicon;
use annoproj::stats::{corpus_stats, embedding_registry, similarity_report, CorpusStats, QaTable, Table};
use annoproj_review::{ReviewService, ServiceConfig};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

mod config;
mod manifest;

use config::RunConfig;
use manifest::RunRecorder;

const ENV_HELP: &str = "\
Configuration is read from --config (JSON), then these environment variables,
then command-line flags:
  ANNOPROJ_TARGET_LANG, ANNOPROJ_SOURCE_LANG, ANNOPROJ_N_BEST, ANNOPROJ_BACKEND,
  ANNOPROJ_ENDPOINT, ANNOPROJ_MODEL, ANNOPROJ_WORDNET, ANNOPROJ_EMBEDDING_ENDPOINT,
  ANNOPROJ_JOBS, ANNOPROJ_AUDIT_DIR
The translation API key is read from ANNOPROJ_API_KEY (or the variable named by
backend.api_key_env) and is never stored in the config. HTTP(S)_PROXY is honored.
Defaults: n_best 4, exemplar_count 4, backend chat-completion (model gpt-4,
temperature 0.7, back-translation temperature 0), review bind 127.0.0.1:8080.

Exit codes: 0 success, 1 one or more items failed, 2 usage or configuration error.";

#[derive(Parser)]
#[command(name = "annoproj", version, about = "Cross-lingual projection of clinical span annotations", after_help = ENV_HELP)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for run manifests and backend audit logs.
    #[arg(long, global = true, value_name = "DIR", env = "ANNOPROJ_AUDIT_DIR", default_value = "annoproj-audit")]
    audit_dir: PathBuf,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert standoff files between XMI and JSON (file or directory).
    Convert(ConvertArgs),
    /// Project a source corpus into a target language.
    Project(ProjectArgs),
    /// Re-run tag QA on recorded candidates from earlier runs' audit logs.
    Qa(QaArgs),
    /// Corpus, QA, and similarity reports.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Build training pairs (JSONL) from a standoff corpus.
    MakeTraining(MakeTrainingArgs),
    /// Precision, recall, and F1 of predicted sequences against gold.
    Score(ScoreArgs),
    /// Human revision service.
    #[command(subcommand)]
    Review(ReviewCommand),
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long = "out", value_name = "PATH")]
    output: PathBuf,
    /// Output format when converting a directory.
    #[arg(long, value_name = "FORMAT")]
    to: Option<String>,
}

#[derive(Args, Clone)]
struct ProjectionFlags {
    #[arg(long, value_name = "LANG")]
    target_lang: Option<String>,
    #[arg(long, value_name = "LANG")]
    source_lang: Option<String>,
    /// Candidates requested per prompt [default: 4].
    #[arg(long, value_name = "N")]
    n_best: Option<usize>,
    /// Bound on documents processed in parallel [default: all cores].
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, value_name = "DIR")]
    wordnet: Option<PathBuf>,
    /// Exemplar set JSON [default: bundled English→Italian set].
    #[arg(long, value_name = "FILE")]
    exemplars: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    max_prompt_tokens: Option<usize>,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    #[arg(long = "out", value_name = "DIR")]
    output: PathBuf,
    /// Use the offline mock backend with this fixture.
    #[arg(long, value_name = "FIXTURE")]
    mock: Option<PathBuf>,
    #[command(flatten)]
    flags: ProjectionFlags,
}

#[derive(Args)]
struct QaArgs {
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    #[arg(long = "out", value_name = "DIR")]
    output: PathBuf,
    /// Backend audit log(s) holding the recorded candidates.
    #[arg(long, value_name = "AUDIT", required = true)]
    candidates: Vec<PathBuf>,
    /// Mock fixture answering requests missing from the logs.
    #[arg(long, value_name = "FIXTURE")]
    mock: Option<PathBuf>,
    /// Fail instead of calling the configured backend for unrecorded requests.
    #[arg(long)]
    offline: bool,
    #[command(flatten)]
    flags: ProjectionFlags,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Documents, tokens, annotations and relations per language.
    Corpus {
        #[arg(required = true, value_name = "DIR")]
        dirs: Vec<PathBuf>,
        /// Write corpus.txt, corpus.csv and corpus.json here.
        #[arg(long = "out", value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Mismatch and missing counts per category group from projection reports.
    Qa {
        #[arg(required = true, value_name = "REPORT")]
        reports: Vec<PathBuf>,
        #[arg(long = "out", value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Mean embedding cosine between source and back-translated texts.
    Similarity {
        /// JSONL with `source` and `backtranslation` fields.
        #[arg(long, value_name = "FILE")]
        pairs: PathBuf,
        #[arg(long, value_name = "URL")]
        endpoint: Option<String>,
        /// Use the mock provider with this text→vector JSON.
        #[arg(long, value_name = "FILE")]
        mock_vectors: Option<PathBuf>,
        #[arg(long = "out", value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Entity,
    Relation,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Entity => Task::Entity,
            TaskArg::Relation => Task::Relation,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sentence,
    Document,
}

#[derive(Args)]
struct MakeTrainingArgs {
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long, value_enum, default_value = "sentence")]
    mode: ModeArg,
    #[arg(long = "out", value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long, value_name = "FILE")]
    gold: PathBuf,
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Entity span matcher: exact or overlap.
    #[arg(long, default_value = "exact")]
    matcher: String,
    /// Write the score report as JSON.
    #[arg(long = "out", value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReviewCommand {
    /// Serve the review API (and UI assets) over HTTP.
    Serve {
        #[command(flatten)]
        corpus: ReviewCorpus,
        /// Listen address [default: 127.0.0.1:8080].
        #[arg(long, value_name = "ADDR")]
        bind: Option<SocketAddr>,
        /// Built review UI to serve at /.
        #[arg(long, value_name = "DIR")]
        static_dir: Option<PathBuf>,
    },
    /// Write the revised corpus and revision report without starting a server.
    Export {
        #[command(flatten)]
        corpus: ReviewCorpus,
        #[arg(long = "out", value_name = "DIR")]
        output: PathBuf,
    },
}

#[derive(Args)]
struct ReviewCorpus {
    /// Projected corpus under review.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Source-language corpus, matched by file name.
    #[arg(long, value_name = "DIR")]
    source: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    journal: PathBuf,
}

/// Error classes that map to exit codes.
enum Failure {
    /// Exit 2.
    Usage(anyhow::Error),
    /// Exit 1.
    Run(anyhow::Error),
}

impl<E: std::error::Error + Send + Sync + 'static> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

trait UsageContext<T> {
    fn usage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UsageContext<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

/// Exit status of a command that ran to completion.
type Status = Result<i32, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let status = load_config(&cli).and_then(|cfg| run(&cli, cfg));
    match status {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).usage()?,
        None => RunConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok()).usage()?;
    Ok(cfg)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Convert(_) => "convert",
        Command::Project(_) => "project",
        Command::Qa(_) => "qa",
        Command::Stats(_) => "stats",
        Command::MakeTraining(_) => "make-training",
        Command::Score(_) => "score",
        Command::Review(_) => "review",
    }
}

fn run(cli: &Cli, mut cfg: RunConfig) -> Status {
    apply_flags(&cli.command, &mut cfg);
    let mut rec = RunRecorder::start(command_name(&cli.command), &cfg);
    let status = match &cli.command {
        Command::Convert(a) => convert(a, &mut rec),
        Command::Project(a) => project(a, &cfg, &cli.audit_dir, &mut rec),
        Command::Qa(a) => qa(a, &cfg, &cli.audit_dir, &mut rec),
        Command::Stats(s) => stats(s, &cfg, &mut rec),
        Command::MakeTraining(a) => make_training(a, &mut rec),
        Command::Score(a) => score(a, &mut rec),
        Command::Review(r) => review(r, &cfg, &mut rec),
    };
    let code = match &status {
        Ok(c) => *c,
        Err(Failure::Usage(_)) => 2,
        Err(Failure::Run(_)) => 1,
    };
    match rec.finish(&cli.audit_dir, code) {
        Ok(path) => log::info!("run manifest: {}", path.display()),
        Err(e) => {
            eprintln!("error: writing run manifest: {e:#}");
            return status.and(Ok(1));
        }
    }
    status
}

/// Command-line flags take precedence over config and environment.
fn apply_flags(command: &Command, cfg: &mut RunConfig) {
    let (flags, mock) = match command {
        Command::Project(a) => (&a.flags, &a.mock),
        Command::Qa(a) => (&a.flags, &a.mock),
        Command::Stats(StatsCommand::Similarity {
            endpoint, mock_vectors, ..
        }) => {
            if let Some(e) = endpoint {
                cfg.embedding.kind = "http".into();
                cfg.embedding.endpoint = Some(e.clone());
            }
            if let Some(v) = mock_vectors {
                cfg.embedding.kind = "mock".into();
                cfg.embedding.mock_vectors = Some(v.clone());
            }
            return;
        }
        Command::Review(ReviewCommand::Serve { bind, static_dir, .. }) => {
            if let Some(b) = bind {
                cfg.review.bind = b.to_string();
            }
            if let Some(d) = static_dir {
                cfg.review.static_dir = Some(d.clone());
            }
            return;
        }
        _ => return,
    };
    let p = &mut cfg.projection;
    if let Some(v) = &flags.target_lang {
        p.target_language = v.clone();
    }
    if let Some(v) = &flags.source_lang {
        p.source_language = Some(v.clone());
    }
    if let Some(v) = flags.n_best {
        p.n_best = v;
    }
    if let Some(v) = &flags.exemplars {
        p.exemplars = Some(v.clone());
    }
    if let Some(v) = flags.max_prompt_tokens {
        p.max_prompt_tokens = Some(v);
    }
    if let Some(v) = flags.jobs {
        cfg.jobs = Some(v);
    }
    if let Some(v) = &flags.wordnet {
        cfg.wordnet = Some(v.clone());
    }
    if let Some(m) = mock {
        cfg.backend.kind = "mock".into();
        cfg.backend.mock_fixture = Some(m.clone());
    }
}

fn require_dir(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(anyhow!("{what} {} is not a directory", path.display())))
    }
}

fn convert(a: &ConvertArgs, rec: &mut RunRecorder) -> Status {
    let codecs = codec_registry();
    rec.input(&a.input).usage()?;
    rec.output(&a.output);
    if a.input.is_dir() {
        let to = a
            .to
            .as_deref()
            .ok_or_else(|| Failure::Usage(anyhow!("--to is required when converting a directory")))?;
        let codec = codecs.get(to).usage()?;
        let ext = codec.extensions()[0];
        let mut failed = 0;
        let files = list_corpus_files(&a.input, &codecs)?;
        for path in &files {
            let out = a.output.join(path.file_stem().unwrap_or_default()).with_extension(ext);
            if let Err(e) = read_document(path, &codecs).and_then(|d| write_document(&out, &d, &codecs)) {
                eprintln!("{e}");
                failed += 1;
            }
        }
        println!("converted {}/{} files", files.len() - failed, files.len());
        rec.summary(json!({"files": files.len(), "failed": failed}));
        return Ok(i32::from(failed > 0));
    }
    if codec_for_path(&codecs, &a.output).is_none() {
        return Err(Failure::Usage(anyhow!("no codec for output {}", a.output.display())));
    }
    let doc = read_document(&a.input, &codecs).usage()?;
    write_document(&a.output, &doc, &codecs)?;
    rec.summary(json!({"files": 1, "failed": 0}));
    Ok(0)
}

fn load_lexicon(cfg: &RunConfig) -> Result<Lexicon, Failure> {
    match &cfg.wordnet {
        Some(dir) => Lexicon::load_wordnet(dir).usage(),
        None => {
            log::warn!("no WordNet directory configured; back-translation checks use exact matches only");
            Ok(Lexicon::empty())
        }
    }
}

fn run_projection(
    input: &Path,
    output: &Path,
    cfg: &RunConfig,
    translator: &Translator,
    rec: &mut RunRecorder,
) -> Status {
    rec.phase("load");
    let lexicon = load_lexicon(cfg)?;
    let projector = Projector::new(&cfg.projection, translator, &lexicon).usage()?;
    let codecs = codec_registry();
    rec.phase("project");
    let report = project_corpus(input, output, &projector, &codecs, cfg.jobs)?;
    rec.phase("report");
    print!("{}", QaTable::from_reports(std::slice::from_ref(&report)).to_text());
    let t = &report.totals;
    println!(
        "{} documents, {} failed; {} annotations: {} ok, {} mismatch candidates, {} missing",
        t.documents,
        t.failed,
        t.source_annotations,
        t.ok,
        t.mismatches.total(),
        t.missing.total()
    );
    for d in report.documents.iter().filter(|d| d.error.is_some()) {
        eprintln!("{}: {}", d.file, d.error.as_deref().unwrap_or_default());
    }
    rec.summary(json!({
        "totals": report.totals,
        "backend_requests": translator.audit().request_count(),
    }));
    Ok(i32::from(report.has_failures()))
}

fn backend_audit(audit_dir: &Path, rec: &RunRecorder) -> Result<AuditLog, Failure> {
    let path = audit_dir.join(format!("{}.backend.jsonl", rec.stem()));
    AuditLog::to_file(&path)
        .with_context(|| format!("opening {}", path.display()))
        .usage()
}

fn project(a: &ProjectArgs, cfg: &RunConfig, audit_dir: &Path, rec: &mut RunRecorder) -> Status {
    require_dir(&a.input, "input")?;
    cfg.projection.check().usage()?;
    rec.input(&a.input).usage()?;
    if let Some(f) = &cfg.backend.mock_fixture {
        rec.input(f).usage()?;
    }
    rec.output(&a.output);
    let backend = backend_registry()
        .get(&cfg.backend.kind)
        .usage()?
        .create(&cfg.backend)
        .usage()?;
    let translator = Translator::new(backend, &cfg.backend, backend_audit(audit_dir, rec)?);
    run_projection(&a.input, &a.output, cfg, &translator, rec)
}

fn qa(a: &QaArgs, cfg: &RunConfig, audit_dir: &Path, rec: &mut RunRecorder) -> Status {
    require_dir(&a.input, "input")?;
    cfg.projection.check().usage()?;
    rec.input(&a.input).usage()?;
    for c in &a.candidates {
        rec.input(c).usage()?;
    }
    rec.output(&a.output);
    let mut replay = ReplayBackend::from_audit_logs(&a.candidates).usage()?;
    if replay.is_empty() {
        return Err(Failure::Usage(anyhow!("no recorded exchanges in the candidate logs")));
    }
    if !a.offline {
        let fallback: Option<Arc<dyn TranslationBackend>> = match backend_registry()
            .get(&cfg.backend.kind)
            .usage()?
            .create(&cfg.backend)
        {
            Ok(b) => Some(b),
            Err(e) => {
                log::info!("no fallback backend ({e}); unrecorded requests will fail");
                None
            }
        };
        if let Some(b) = fallback {
            replay = replay.with_fallback(b);
        }
    }
    let translator = Translator::new(Arc::new(replay), &cfg.backend, backend_audit(audit_dir, rec)?);
    run_projection(&a.input, &a.output, cfg, &translator, rec)
}

fn write_tables(dir: &Path, name: &str, table: &Table, json: &serde_json::Value, rec: &mut RunRecorder) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut pretty = serde_json::to_string_pretty(json)?;
    pretty.push('\n');
    for (ext, body) in [("txt", table.to_text()), ("csv", table.to_csv()), ("json", pretty)] {
        let path = dir.join(format!("{name}.{ext}"));
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        rec.output(&path);
    }
    Ok(())
}

#[derive(Deserialize)]
struct SimilarityPair {
    source: String,
    #[serde(alias = "back_translation", alias = "target")]
    backtranslation: String,
}

fn stats(s: &StatsCommand, cfg: &RunConfig, rec: &mut RunRecorder) -> Status {
    match s {
        StatsCommand::Corpus { dirs, output } => {
            let codecs = codec_registry();
            let mut all = CorpusStats::default();
            for dir in dirs {
                require_dir(dir, "corpus")?;
                rec.input(dir).usage()?;
                let part = corpus_stats(dir, &codecs)?;
                all = merge_stats(all, part);
            }
            let table = all.table();
            print!("{}", table.to_text());
            if let Some(out) = output {
                write_tables(out, "corpus", &table, &serde_json::to_value(&all).expect("stats serialize"), rec).map_err(Failure::Run)?;
            }
            rec.summary(serde_json::to_value(&all).expect("stats serialize"));
            Ok(0)
        }
        StatsCommand::Qa { reports, output } => {
            let mut loaded = Vec::new();
            for path in reports {
                rec.input(path).usage()?;
                let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display())).usage()?;
                let report: ProjectionReport = serde_json::from_slice(&bytes)
                    .with_context(|| format!("parsing {}", path.display()))
                    .usage()?;
                loaded.push(report);
            }
            let qa = QaTable::from_reports(&loaded);
            print!("{}", qa.to_text());
            if let Some(out) = output {
                write_tables(out, "qa", &qa.table(), &serde_json::to_value(&qa).expect("table serializes"), rec).map_err(Failure::Run)?;
            }
            Ok(0)
        }
        StatsCommand::Similarity { pairs, output, .. } => {
            rec.input(pairs).usage()?;
            let records: Vec<SimilarityPair> = read_jsonl(pairs).usage()?;
            let provider = embedding_registry()
                .get(&cfg.embedding.kind)
                .usage()?
                .create(&cfg.embedding)
                .usage()?;
            let pairs: Vec<(String, String)> = records.into_iter().map(|p| (p.source, p.backtranslation)).collect();
            let report = similarity_report(&pairs, provider.as_ref());
            match (report.available, report.mean) {
                (true, Some(m)) => println!("mean similarity over {} pairs: {m:.4}", report.pairs),
                (true, None) => println!("no pairs"),
                (false, _) => println!("similarity unavailable: {}", report.error.as_deref().unwrap_or("unknown error")),
            }
            if let Some(out) = output {
                let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
                json.push('\n');
                if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::write(out, json).with_context(|| format!("writing {}", out.display())).map_err(Failure::Run)?;
                rec.output(out);
            }
            rec.summary(json!({"pairs": report.pairs, "available": report.available, "mean": report.mean}));
            Ok(i32::from(!report.available))
        }
    }
}

fn merge_stats(a: CorpusStats, b: CorpusStats) -> CorpusStats {
    let mut rows: std::collections::BTreeMap<String, annoproj::stats::CorpusRow> = Default::default();
    for row in a.rows.into_iter().chain(b.rows) {
        match rows.get_mut(&row.language) {
            Some(existing) => existing.merge(&row),
            None => {
                rows.insert(row.language.clone(), row);
            }
        }
    }
    CorpusStats {
        rows: rows.into_values().collect(),
    }
}

fn make_training(a: &MakeTrainingArgs, rec: &mut RunRecorder) -> Status {
    require_dir(&a.input, "input")?;
    rec.input(&a.input).usage()?;
    let codecs = codec_registry();
    let mode = match a.mode {
        ModeArg::Sentence => SequenceMode::Sentence,
        ModeArg::Document => SequenceMode::Document,
    };
    let mut pairs: Vec<TrainingPair> = Vec::new();
    let mut failed = 0;
    let mut flagged = 0;
    for path in list_corpus_files(&a.input, &codecs)? {
        match read_document(&path, &codecs) {
            Ok(doc) => {
                flagged += doc
                    .annotations
                    .iter()
                    .filter(|x| x.status != annoproj::Status::Ok)
                    .count();
                pairs.extend(make_training_sequences(&doc, a.task.into(), mode));
            }
            Err(e) => {
                eprintln!("{e}");
                failed += 1;
            }
        }
    }
    if flagged > 0 {
        log::warn!("{flagged} annotations are not OK; MISSING rows are skipped and flagged spans used as is");
    }
    write_jsonl(&a.output, &pairs)?;
    rec.output(&a.output);
    println!("wrote {} pairs to {}", pairs.len(), a.output.display());
    rec.summary(json!({"pairs": pairs.len(), "failed_files": failed}));
    Ok(i32::from(failed > 0))
}

fn score(a: &ScoreArgs, rec: &mut RunRecorder) -> Status {
    rec.input(&a.gold).usage()?;
    rec.input(&a.pred).usage()?;
    let matcher = matcher_registry().get(&a.matcher).usage()?;
    let gold: Vec<ScoreRecord> = read_jsonl(&a.gold).usage()?;
    let pred: Vec<ScoreRecord> = read_jsonl(&a.pred).usage()?;
    let report = score_records(a.task.into(), &gold, &pred, matcher.as_ref()).usage()?;
    print!("{}", report.table().to_text());
    let p = &report.prf;
    println!("P={:.4} R={:.4} F1={:.4}", p.precision, p.recall, p.f1);
    if let Some(out) = &a.output {
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        std::fs::write(out, json).with_context(|| format!("writing {}", out.display())).map_err(Failure::Run)?;
        rec.output(out);
    }
    rec.summary(serde_json::to_value(&report).expect("report serializes"));
    Ok(0)
}

fn review(r: &ReviewCommand, cfg: &RunConfig, rec: &mut RunRecorder) -> Status {
    let (corpus, token) = match r {
        ReviewCommand::Serve { corpus, .. } => (corpus, std::env::var(&cfg.review.token_env).ok().filter(|t| !t.is_empty())),
        ReviewCommand::Export { corpus, .. } => (corpus, None),
    };
    require_dir(&corpus.corpus, "corpus")?;
    rec.input(&corpus.corpus).usage()?;
    let service_cfg = ServiceConfig {
        corpus: corpus.corpus.clone(),
        source: corpus.source.clone(),
        journal: corpus.journal.clone(),
        static_dir: cfg.review.static_dir.clone(),
        token,
    };
    match r {
        ReviewCommand::Serve { .. } => {
            let addr: SocketAddr = cfg
                .review
                .bind
                .parse()
                .with_context(|| format!("bind address `{}`", cfg.review.bind))
                .usage()?;
            rec.output(&corpus.journal);
            annoproj_review::serve_blocking(service_cfg, addr).usage()?;
            Ok(0)
        }
        ReviewCommand::Export { output, .. } => {
            if !service_cfg.journal.is_file() {
                return Err(Failure::Usage(anyhow!("journal {} does not exist", service_cfg.journal.display())));
            }
            let svc = ReviewService::open(&service_cfg).usage()?;
            let report = svc.export(output)?;
            rec.output(output);
            print!("{}", annoproj_review::stats::revision_table(&report.languages).to_text());
            rec.summary(serde_json::to_value(&report).expect("report serializes"));
            Ok(0)
        }
    }
}
