//! Core engine for rubric-based evaluation of follow-up questions.
//!
//! The crate is organised around a small pipeline:
//!
//! 1. [`rubric`] — the six-criterion, five-level rubric with `${answerer}` /
//!    `${goal}` context variables.
//! 2. [`prompting`] — dialogue scripts and deterministic judge-prompt assembly.
//! 3. [`judge`] — scoring backends (deterministic stub, HTTP chat-completions)
//!    and strict response parsing into [`judge::ScoreCard`]s.
//! 4. [`datasets`] — normalized dataset adapters and seeded sampling.
//! 5. [`analysis`] — per-set aggregation and report rendering (CSV, JSONL,
//!    radar SVG).
//! 6. [`harness`] — the validity test and the resumable batch orchestrator.
//!
//! Everything on the stub path is deterministic: identical inputs (including
//! the sampling seed) produce byte-identical reports.

pub mod analysis;
pub mod assets;
pub mod datasets;
pub mod harness;
pub mod judge;
pub mod prompting;
pub mod rubric;

pub use analysis::{aggregate, radar_data, render_reports, AggregateSummary, SdDivisor};
pub use datasets::{adapt_caus, adapt_square, load_generic, QuestionSet};
pub use judge::{Judge, JudgeConfig, ScoreCard};
pub use prompting::{assemble_prompt, DialogueScript};
pub use rubric::{
    dimension_of, instantiate, load_rubric, ContextVariables, CriterionId, Dimension, Rubric,
};
