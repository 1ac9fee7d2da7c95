//! The batch runner: evaluate question sets with bounded concurrency,
//! resume interrupted runs, and render reports.
//!
//! Resumption is keyed on `(script_id, context hash, rubric version, prompt
//! version)`, all of which are recoverable from `records.jsonl` lines, so a
//! resumed run re-issues judge calls only for scripts whose evaluation
//! ingredients changed or whose results are missing. Failures never abort
//! the batch; they are collected into `failures.jsonl` and reflected in the
//! outcome counts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::analysis::{aggregate, radar_data, render_reports, SdDivisor};
use crate::assets;
use crate::datasets::QuestionSet;
use crate::harness::{evaluate_with_trials, HarnessError};
use crate::judge::{Judge, JudgeError, ScoreCard};
use crate::prompting::DialogueScript;
use crate::rubric::{ContextVariables, Rubric};

/// One unit of work: a script to score under a context.
pub type WorkUnit<'a> = (&'a DialogueScript, &'a ContextVariables);

/// Batch-run settings.
#[derive(Clone, Debug)]
pub struct BatchConfig {
    pub out_dir: PathBuf,
    /// Reuse compatible results from an existing `records.jsonl`.
    pub resume: bool,
    /// Maximum in-flight judge calls.
    pub concurrency: usize,
    pub sd_divisor: SdDivisor,
    /// Judge calls per script, combined by majority vote when > 1.
    pub trials: usize,
    /// Free-form invocation metadata echoed into `run_meta.json`.
    pub invocation: Option<serde_json::Value>,
}

impl BatchConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        BatchConfig {
            out_dir: out_dir.into(),
            resume: false,
            concurrency: 4,
            sd_divisor: SdDivisor::default(),
            trials: 1,
            invocation: None,
        }
    }
}

/// Counts and artifacts from one batch run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchOutcome {
    pub total: usize,
    /// Results reused from a previous run via `--resume`.
    pub reused: usize,
    /// Scripts freshly evaluated this run.
    pub evaluated: usize,
    pub failed: usize,
    /// Scoring calls the stub backend served this run (`None` for HTTP).
    pub judge_calls: Option<u64>,
    pub written: Vec<PathBuf>,
}

/// One failed script, as serialized into `failures.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FailureRecord {
    pub set_label: String,
    pub script_id: String,
    pub class: String,
    pub message: String,
    /// Raw judge response, retained when the failure was a parse failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

impl FailureRecord {
    fn new(set_label: &str, script_id: &str, error: JudgeError) -> Self {
        let class = error.class().to_owned();
        let message = error.to_string();
        let raw = match error {
            JudgeError::Parse(failure) => Some(failure.raw),
            _ => None,
        };
        FailureRecord {
            set_label: set_label.to_owned(),
            script_id: script_id.to_owned(),
            class,
            message,
            raw,
        }
    }
}

/// The cache key a completed evaluation is stored under.
///
/// The context is folded to the first 8 bytes of
/// `sha256(answerer 0x1F goal)` so keys stay short while still invalidating
/// when either variable changes.
pub fn resume_key(
    script_id: &str,
    ctx: &ContextVariables,
    rubric_version: &str,
    prompt_version: &str,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(ctx.answerer().as_bytes());
    hasher.update([0x1F]);
    hasher.update(ctx.goal().as_bytes());
    let digest = hasher.finalize();
    let mut ctx_hash = String::with_capacity(16);
    for byte in &digest[..8] {
        let _ = write!(ctx_hash, "{byte:02x}");
    }
    format!("{script_id}\u{1F}{ctx_hash}\u{1F}{rubric_version}\u{1F}{prompt_version}")
}

fn io_error(action: &'static str, path: &Path, err: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io {
        action,
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

/// Evaluate work units one after another on the current thread.
pub fn evaluate_scripts_sequential(
    judge: &Judge,
    rubric: &Rubric,
    work: &[WorkUnit<'_>],
    trials: usize,
) -> Vec<Result<ScoreCard, JudgeError>> {
    work.iter()
        .map(|(script, ctx)| evaluate_with_trials(judge, script, rubric, ctx, trials))
        .collect()
}

/// Evaluate work units on a dedicated pool of `threads` workers. Result
/// order matches input order.
#[cfg(feature = "parallel")]
pub fn evaluate_scripts_parallel(
    judge: &Judge,
    rubric: &Rubric,
    work: &[WorkUnit<'_>],
    trials: usize,
    threads: usize,
) -> Result<Vec<Result<ScoreCard, JudgeError>>, JudgeError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|err| JudgeError::Config(format!("failed to build worker pool: {err}")))?;
    Ok(pool.install(|| {
        work.par_iter()
            .map(|(script, ctx)| evaluate_with_trials(judge, script, rubric, ctx, trials))
            .collect()
    }))
}

fn evaluate_units(
    judge: &Judge,
    rubric: &Rubric,
    work: &[WorkUnit<'_>],
    cfg: &BatchConfig,
) -> Result<Vec<Result<ScoreCard, JudgeError>>, HarnessError> {
    if cfg.concurrency == 0 {
        return Err(HarnessError::Judge(JudgeError::Config(
            "concurrency must be positive".into(),
        )));
    }
    #[cfg(feature = "parallel")]
    if cfg.concurrency > 1 && work.len() > 1 {
        return evaluate_scripts_parallel(judge, rubric, work, cfg.trials, cfg.concurrency)
            .map_err(HarnessError::Judge);
    }
    Ok(evaluate_scripts_sequential(judge, rubric, work, cfg.trials))
}

fn load_resumable_cards(path: &Path) -> Result<HashMap<String, ScoreCard>, HarnessError> {
    let file = fs::File::open(path).map_err(|err| io_error("read", path, err))?;
    let mut by_key = HashMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|err| io_error("read", path, err))?;
        if line.trim().is_empty() {
            continue;
        }
        // Lines that no longer parse are treated as absent: their scripts
        // are simply re-evaluated.
        if let Ok(card) = serde_json::from_str::<ScoreCard>(&line) {
            let key = resume_key(
                &card.script_id,
                &card.judge_provenance.context,
                &card.judge_provenance.rubric_version,
                &card.judge_provenance.prompt_version,
            );
            by_key.insert(key, card);
        }
    }
    Ok(by_key)
}

fn timestamp_now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Evaluate every script of every set, render reports into `cfg.out_dir`,
/// and return the run's counts.
///
/// Partial failures do not abort the run: successfully scored scripts still
/// reach `records.jsonl` and the per-set statistics, while failures land in
/// `failures.jsonl`. Callers decide how to surface a non-zero `failed`
/// count.
pub fn run_batch(
    judge: &Judge,
    rubric: &Rubric,
    sets: &[QuestionSet],
    cfg: &BatchConfig,
) -> Result<BatchOutcome, HarnessError> {
    let started_at = timestamp_now();
    fs::create_dir_all(&cfg.out_dir).map_err(|err| io_error("create", &cfg.out_dir, err))?;

    let items: Vec<(usize, &DialogueScript, &ContextVariables)> = sets
        .iter()
        .enumerate()
        .flat_map(|(set_index, set)| {
            set.scripts
                .iter()
                .map(move |script| (set_index, script, &set.context))
        })
        .collect();
    let total = items.len();
    let mut results: Vec<Option<ScoreCard>> = vec![None; total];

    // Reuse prior results where the evaluation ingredients are unchanged.
    let mut reused = 0;
    let records_path = cfg.out_dir.join("records.jsonl");
    if cfg.resume && records_path.exists() {
        let mut by_key = load_resumable_cards(&records_path)?;
        for (index, (_, script, ctx)) in items.iter().enumerate() {
            let key = resume_key(&script.script_id, ctx, rubric.version(), assets::PROMPT_VERSION);
            if let Some(card) = by_key.remove(&key) {
                results[index] = Some(card);
                reused += 1;
            }
        }
    }

    let pending: Vec<usize> = (0..total).filter(|&i| results[i].is_none()).collect();
    let pending_units: Vec<WorkUnit<'_>> = pending
        .iter()
        .map(|&i| {
            let (_, script, ctx) = items[i];
            (script, ctx)
        })
        .collect();

    let outcomes = evaluate_units(judge, rubric, &pending_units, cfg)?;

    let mut failures: Vec<FailureRecord> = Vec::new();
    let mut evaluated = 0;
    for (&index, outcome) in pending.iter().zip(outcomes) {
        let (set_index, script, _) = items[index];
        match outcome {
            Ok(card) => {
                results[index] = Some(card);
                evaluated += 1;
            }
            Err(error) => failures.push(FailureRecord::new(
                &sets[set_index].set_label,
                &script.script_id,
                error,
            )),
        }
    }

    // Aggregate per set, skipping sets with no completed cards.
    let mut summaries = Vec::new();
    let mut radars = Vec::new();
    let mut all_cards = Vec::new();
    for (set_index, set) in sets.iter().enumerate() {
        let cards: Vec<ScoreCard> = items
            .iter()
            .enumerate()
            .filter(|(_, (si, ..))| *si == set_index)
            .filter_map(|(i, _)| results[i].clone())
            .collect();
        if cards.is_empty() {
            continue;
        }
        summaries.push(aggregate(&cards, &set.set_label, cfg.sd_divisor)?);
        radars.push(radar_data(&cards, &set.set_label)?);
        all_cards.extend(cards);
    }
    let mut written = render_reports(&summaries, &radars, &all_cards, &cfg.out_dir, cfg.sd_divisor)?;

    let failures_path = cfg.out_dir.join("failures.jsonl");
    if failures.is_empty() {
        // Drop a stale failures file from a previous partial run.
        if failures_path.exists() {
            fs::remove_file(&failures_path).map_err(|err| io_error("remove", &failures_path, err))?;
        }
    } else {
        let mut file =
            fs::File::create(&failures_path).map_err(|err| io_error("write", &failures_path, err))?;
        for failure in &failures {
            let line = serde_json::to_string(failure)
                .map_err(|err| io_error("write", &failures_path, err))?;
            writeln!(file, "{line}").map_err(|err| io_error("write", &failures_path, err))?;
        }
        written.push(failures_path);
    }

    let judge_calls = judge.stub_calls();
    let meta = serde_json::json!({
        "backend": judge.config().backend,
        "model_name": judge.config().model_name,
        "rubric_version": rubric.version(),
        "prompt_version": assets::PROMPT_VERSION,
        "sd_divisor": cfg.sd_divisor,
        "concurrency": cfg.concurrency,
        "trials": cfg.trials,
        "resume": cfg.resume,
        "sets": sets.iter().map(|set| serde_json::json!({
            "label": set.set_label,
            "scripts": set.scripts.len(),
        })).collect::<Vec<_>>(),
        "totals": {
            "total": total,
            "reused": reused,
            "evaluated": evaluated,
            "failed": failures.len(),
        },
        "judge_calls": judge_calls,
        "invocation": cfg.invocation,
        "started_at": started_at,
        "finished_at": timestamp_now(),
    });
    let meta_path = cfg.out_dir.join("run_meta.json");
    fs::write(&meta_path, format!("{:#}\n", meta))
        .map_err(|err| io_error("write", &meta_path, err))?;
    written.push(meta_path);

    Ok(BatchOutcome {
        total,
        reused,
        evaluated,
        failed: failures.len(),
        judge_calls,
        written,
    })
}
