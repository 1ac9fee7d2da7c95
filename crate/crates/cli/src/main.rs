//! `qqeval` — score follow-up questions with a rubric-guided judge.
//!
//! Three commands:
//!
//! - `validate-rubric <rubric.json>` — structural validation of a rubric file.
//! - `evaluate` — ingest a dataset, sample question sets, score each script,
//!   and render reports (CSV, JSONL, radar SVGs) into `--out`.
//! - `validity` — run the built-in three-question validity test and report
//!   checks C1–C3.
//!
//! Every error class maps to a distinct exit code (see [`exit_code_for_class`]
//! and the README).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qqeval_core::analysis::SdDivisor;
use qqeval_core::assets;
use qqeval_core::datasets::{
    adapt_caus, adapt_square, load_caus, load_generic, load_square, DataError, QuestionSet,
    SquareCategory,
};
use qqeval_core::harness::{
    run_batch, run_validity, BatchConfig, HarnessError, ValidityFixture, ValidityStatus,
};
use qqeval_core::judge::{load_stub_rules, BackendKind, Judge, JudgeConfig, JudgeError, StubRule};
use qqeval_core::rubric::{load_rubric, ContextVariables, Rubric, RubricError};

/// Environment variable consulted for `--endpoint-url` when the flag is
/// absent.
const ENDPOINT_VAR: &str = "QQEVAL_ENDPOINT_URL";

#[derive(Parser)]
#[command(
    name = "qqeval",
    version,
    about = "Rubric-based judge for follow-up questions",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a rubric file: six criteria, five levels each, known placeholders only.
    ValidateRubric {
        /// Path to the rubric JSON document.
        rubric: PathBuf,
    },
    /// Score a dataset and render reports into --out.
    Evaluate(Box<EvaluateArgs>),
    /// Run the built-in validity test (checks C1-C3).
    Validity(ValidityArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    /// Scene descriptions with five sequential questions each.
    Caus,
    /// Headline questions in three categories.
    Square,
    /// Pre-normalized scripts with explicit context variables.
    Generic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum JudgeKind {
    /// Deterministic rule-matching backend; no network.
    Stub,
    /// Chat-completions HTTP backend (needs QQEVAL_API_KEY).
    Http,
}

impl From<JudgeKind> for BackendKind {
    fn from(kind: JudgeKind) -> BackendKind {
        match kind {
            JudgeKind::Stub => BackendKind::Stub,
            JudgeKind::Http => BackendKind::HttpLlm,
        }
    }
}

#[derive(Args)]
struct JudgeArgs {
    /// Scoring backend.
    #[arg(long, value_enum, default_value_t = JudgeKind::Stub)]
    judge: JudgeKind,

    /// Stub rule file (JSON array); defaults to built-in rules.
    #[arg(long)]
    stub_rules: Option<PathBuf>,

    /// Model name sent to the HTTP backend.
    #[arg(long, default_value = JudgeConfig::DEFAULT_MODEL)]
    model: String,

    /// Chat-completions endpoint URL (falls back to QQEVAL_ENDPOINT_URL).
    #[arg(long)]
    endpoint_url: Option<String>,

    /// Sampling temperature for the HTTP backend.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,

    /// Response token budget for the HTTP backend.
    #[arg(long, default_value_t = 1500)]
    max_tokens: u32,

    /// Per-call timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,

    /// Transport retries per call (attempts = retries + 1).
    #[arg(long, default_value_t = 2)]
    max_retries: u32,

    /// Judge calls per script; scores are a per-criterion majority when > 1.
    #[arg(long, default_value_t = 1)]
    trials: usize,
}

impl JudgeArgs {
    fn config(&self) -> JudgeConfig {
        let mut cfg = JudgeConfig::new(self.judge.into());
        cfg.model_name = self.model.clone();
        cfg.temperature = self.temperature;
        cfg.max_tokens = self.max_tokens;
        cfg.timeout_secs = self.timeout_secs;
        cfg.max_retries = self.max_retries;
        cfg.endpoint_url = self
            .endpoint_url
            .clone()
            .or_else(|| std::env::var(ENDPOINT_VAR).ok().filter(|v| !v.is_empty()));
        cfg
    }

    /// Build the judge, resolving stub rules from `--stub-rules` or the
    /// given built-in default.
    fn build(&self, default_rules: &str) -> Result<Judge, CliError> {
        let rules: Option<Vec<StubRule>> = if self.judge == JudgeKind::Stub {
            let source = match &self.stub_rules {
                Some(path) => fs::read_to_string(path).map_err(|err| CliError {
                    code: 6,
                    message: format!("failed to read stub rules `{}`: {err}", path.display()),
                })?,
                None => default_rules.to_owned(),
            };
            Some(load_stub_rules(&source)?)
        } else {
            None
        };
        Ok(Judge::new(self.config(), rules)?)
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Input corpus shape.
    #[arg(long, value_enum)]
    dataset: DatasetKind,

    /// Path to the input corpus (JSON).
    #[arg(long)]
    input: PathBuf,

    /// Rubric file; defaults to the built-in rubric.
    #[arg(long)]
    rubric: Option<PathBuf>,

    /// Answerer context variable (generic dataset only).
    #[arg(long)]
    answerer: Option<String>,

    /// Goal context variable (generic dataset only).
    #[arg(long)]
    goal: Option<String>,

    /// Question positions to sample, e.g. 1,3,5 (caus only).
    #[arg(long, value_delimiter = ',')]
    positions: Option<Vec<u8>>,

    /// Scenes sampled per position (caus only); defaults to every scene.
    #[arg(long)]
    per_position: Option<usize>,

    /// Records sampled per category (square only); defaults to the size of
    /// the smallest category.
    #[arg(long)]
    per_category: Option<usize>,

    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory for reports.
    #[arg(long)]
    out: PathBuf,

    /// Reuse compatible results from an existing records.jsonl in --out.
    #[arg(long)]
    resume: bool,

    /// Maximum in-flight judge calls.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,

    /// Standard-deviation divisor: n or n-1.
    #[arg(long, default_value = "n-1")]
    sd_divisor: SdDivisor,

    #[command(flatten)]
    judge: JudgeArgs,
}

#[derive(Args)]
struct ValidityArgs {
    /// Rubric file; defaults to the built-in rubric.
    #[arg(long)]
    rubric: Option<PathBuf>,

    /// Output directory for validity.json and records.jsonl (optional).
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    judge: JudgeArgs,
}

/// A fully formed CLI failure: exit code plus the message for stderr.
struct CliError {
    code: u8,
    message: String,
}

fn usage_error(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

/// Exit code for a judge error class. One code per class, documented in the
/// README.
fn exit_code_for_class(class: &str) -> u8 {
    match class {
        "invalid_input" => 4,
        "missing_credential" | "config" => 6,
        "transport" => 7,
        "format" | "incomplete_response" | "range" => 8,
        "stub_coverage" => 9,
        _ => 1,
    }
}

impl From<RubricError> for CliError {
    fn from(err: RubricError) -> CliError {
        CliError {
            code: 3,
            message: format!("rubric error: {err}"),
        }
    }
}

impl From<DataError> for CliError {
    fn from(err: DataError) -> CliError {
        let code = match &err {
            DataError::Sampling(_) => 5,
            _ => 4,
        };
        CliError {
            code,
            message: format!("ingestion error: {err}"),
        }
    }
}

impl From<JudgeError> for CliError {
    fn from(err: JudgeError) -> CliError {
        CliError {
            code: exit_code_for_class(err.class()),
            message: format!("judge error: {err}"),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> CliError {
        match err {
            HarnessError::Rubric(err) => err.into(),
            HarnessError::Data(err) => err.into(),
            HarnessError::Judge(err) => err.into(),
            HarnessError::Analysis(err) => CliError {
                code: 12,
                message: format!("report error: {err}"),
            },
            io @ HarnessError::Io { .. } => CliError {
                code: 12,
                message: format!("report error: {io}"),
            },
        }
    }
}

fn load_rubric_arg(path: &Option<PathBuf>) -> Result<Rubric, CliError> {
    let source = match path {
        Some(path) => fs::read_to_string(path).map_err(|err| CliError {
            code: 3,
            message: format!("rubric error: failed to read `{}`: {err}", path.display()),
        })?,
        None => assets::DEFAULT_RUBRIC_JSON.to_owned(),
    };
    Ok(load_rubric(&source)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ValidateRubric { rubric } => cmd_validate_rubric(&rubric),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Validity(args) => cmd_validity(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn cmd_validate_rubric(path: &Path) -> Result<ExitCode, CliError> {
    let source = fs::read_to_string(path).map_err(|err| CliError {
        code: 3,
        message: format!("rubric error: failed to read `{}`: {err}", path.display()),
    })?;
    let rubric = load_rubric(&source)?;
    println!(
        "rubric `{}` OK: {} criteria, 5 levels each",
        rubric.version(),
        rubric.criteria().len()
    );
    for criterion in rubric.criteria() {
        println!(
            "  {} ({})",
            criterion.id.display_name(),
            criterion.dimension
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// Resolve dataset-specific flags into question sets, enforcing that
/// protocol-fixed context variables are not overridden and that sampling
/// flags match the dataset shape.
fn build_sets(args: &EvaluateArgs) -> Result<Vec<QuestionSet>, CliError> {
    match args.dataset {
        DatasetKind::Caus => {
            if args.answerer.is_some() || args.goal.is_some() {
                return Err(usage_error(
                    "--answerer/--goal are fixed by the caus protocol; remove the flags",
                ));
            }
            if args.per_category.is_some() {
                return Err(usage_error("--per-category applies to --dataset square only"));
            }
            let records = load_caus(&args.input)?;
            let positions = args.positions.clone().unwrap_or_else(|| vec![1, 3, 5]);
            let per_position = args.per_position.unwrap_or(records.len());
            Ok(adapt_caus(&records, &positions, per_position, args.seed)?)
        }
        DatasetKind::Square => {
            if args.answerer.is_some() || args.goal.is_some() {
                return Err(usage_error(
                    "--answerer/--goal are fixed by the square protocol; remove the flags",
                ));
            }
            if args.positions.is_some() || args.per_position.is_some() {
                return Err(usage_error(
                    "--positions/--per-position apply to --dataset caus only",
                ));
            }
            let records = load_square(&args.input)?;
            let per_category = match args.per_category {
                Some(k) => k,
                None => SquareCategory::ALL
                    .iter()
                    .map(|cat| records.iter().filter(|r| r.category == *cat).count())
                    .min()
                    .unwrap_or(0),
            };
            Ok(adapt_square(&records, per_category, args.seed)?)
        }
        DatasetKind::Generic => {
            if args.positions.is_some() || args.per_position.is_some() || args.per_category.is_some()
            {
                return Err(usage_error(
                    "sampling flags do not apply to --dataset generic (every script is scored)",
                ));
            }
            let (Some(answerer), Some(goal)) = (&args.answerer, &args.goal) else {
                return Err(usage_error(
                    "--answerer and --goal are required for --dataset generic",
                ));
            };
            let context = ContextVariables::new(answerer, goal)
                .map_err(|err| usage_error(format!("invalid context variables: {err}")))?;
            let scripts = load_generic(&args.input)?;
            Ok(vec![QuestionSet {
                set_label: "all".to_owned(),
                scripts,
                context,
            }])
        }
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode, CliError> {
    let rubric = load_rubric_arg(&args.rubric)?;
    let sets = build_sets(args)?;
    let judge = args.judge.build(assets::STUB_RULES_DEFAULT_JSON)?;

    let invocation = serde_json::json!(std::env::args().collect::<Vec<_>>());
    let cfg = BatchConfig {
        out_dir: args.out.clone(),
        resume: args.resume,
        concurrency: args.concurrency,
        sd_divisor: args.sd_divisor,
        trials: args.judge.trials,
        invocation: Some(invocation),
    };
    let outcome = run_batch(&judge, &rubric, &sets, &cfg)?;

    for set in &sets {
        println!("set {}: {} scripts", set.set_label, set.scripts.len());
    }
    println!(
        "evaluated {} of {} scripts ({} reused, {} failed)",
        outcome.evaluated, outcome.total, outcome.reused, outcome.failed
    );
    if let Some(calls) = outcome.judge_calls {
        println!("judge calls: {calls}");
    }
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }

    if outcome.failed > 0 {
        eprintln!(
            "error: {} of {} scripts failed; see {}",
            outcome.failed,
            outcome.total,
            args.out.join("failures.jsonl").display()
        );
        Ok(ExitCode::from(10))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_validity(args: &ValidityArgs) -> Result<ExitCode, CliError> {
    let rubric = load_rubric_arg(&args.rubric)?;
    let judge = args.judge.build(assets::STUB_RULES_VALIDITY_JSON)?;
    let fixture = ValidityFixture::embedded();
    let verdict = run_validity(&judge, &rubric, &fixture, args.judge.trials);

    for check in &verdict.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{} {status} — {}", check.name, check.detail);
    }
    for failure in &verdict.failures {
        eprintln!(
            "pair {}/{} failed ({}): {}",
            failure.variant, failure.context_label, failure.class, failure.message
        );
    }
    let status_word = match verdict.status {
        ValidityStatus::Passed => "passed",
        ValidityStatus::Failed => "failed",
        ValidityStatus::Incomplete => "incomplete",
    };
    println!(
        "validity: {status_word} ({} of {} pairs evaluated)",
        verdict.pairs.len(),
        fixture.variants.len() * fixture.contexts.len()
    );

    if let Some(out) = &args.out {
        let write_error = |path: &Path, err: std::io::Error| CliError {
            code: 12,
            message: format!("report error: failed to write `{}`: {err}", path.display()),
        };
        fs::create_dir_all(out).map_err(|err| write_error(out, err))?;
        let verdict_path = out.join("validity.json");
        let rendered = serde_json::to_string_pretty(&verdict).map_err(|err| CliError {
            code: 12,
            message: format!("report error: {err}"),
        })?;
        fs::write(&verdict_path, rendered + "\n").map_err(|err| write_error(&verdict_path, err))?;
        let records_path = out.join("records.jsonl");
        let mut lines = String::new();
        for pair in &verdict.pairs {
            lines.push_str(&serde_json::to_string(&pair.card).map_err(|err| CliError {
                code: 12,
                message: format!("report error: {err}"),
            })?);
            lines.push('\n');
        }
        fs::write(&records_path, lines).map_err(|err| write_error(&records_path, err))?;
        println!("wrote {}", verdict_path.display());
        println!("wrote {}", records_path.display());
    }

    match verdict.status {
        ValidityStatus::Passed => Ok(ExitCode::SUCCESS),
        ValidityStatus::Failed => Ok(ExitCode::from(11)),
        // Incomplete: surface the first pair failure's class so transport
        // problems, parse problems, and coverage gaps stay distinguishable.
        ValidityStatus::Incomplete => {
            let code = verdict
                .failures
                .first()
                .map(|failure| exit_code_for_class(&failure.class))
                .unwrap_or(11);
            Ok(ExitCode::from(code))
        }
    }
}
