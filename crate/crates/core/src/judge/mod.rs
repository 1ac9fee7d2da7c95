//! Scoring backends and response parsing.
//!
//! A [`Judge`] wraps one backend — the deterministic [`stub`] or the
//! [`http`] chat-completions client — behind a single entry point,
//! [`Judge::evaluate_script`], which composes rubric instantiation, prompt
//! assembly, scoring, and strict parsing into a validated [`ScoreCard`].
//!
//! Retry semantics are deliberately split: transport retries live inside the
//! HTTP backend (configured by `max_retries`), while a parse failure after a
//! successful exchange triggers at most one re-send with a format reminder.
//! Parse errors never consume the transport retry budget.

pub mod http;
pub mod parse;
pub mod stub;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::prompting::{assemble_prompt, DialogueScript, JudgePrompt, ScriptError};
use crate::rubric::{instantiate, ContextError, ContextVariables, PerCriterion, Rubric};

pub use parse::{parse_response, ParseFailure, ParseFailureKind};
pub use stub::{load_stub_rules, StubJudge, StubMatcher, StubRule};

/// Which backend produces raw judge responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    HttpLlm,
}

/// Backend configuration.
///
/// Defaults mirror the judging setup the rubric was calibrated with:
/// temperature 0, a 1500-token completion budget, and the
/// `claude-3-5-sonnet-20240620` model identifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub backend: BackendKind,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub endpoint_url: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl JudgeConfig {
    pub const DEFAULT_MODEL: &'static str = "claude-3-5-sonnet-20240620";

    pub fn new(backend: BackendKind) -> Self {
        JudgeConfig {
            backend,
            model_name: Self::DEFAULT_MODEL.to_owned(),
            temperature: 0.0,
            max_tokens: 1500,
            endpoint_url: None,
            timeout_secs: 60,
            max_retries: 2,
        }
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(JudgeError::Config(format!(
                "temperature must be a finite number >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(JudgeError::Config("max_tokens must be positive".into()));
        }
        if self.timeout_secs == 0 {
            return Err(JudgeError::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }
}

/// Provenance recorded on every [`ScoreCard`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeProvenance {
    pub model_name: String,
    pub prompt_version: String,
    pub rubric_version: String,
    pub context: ContextVariables,
    /// RFC 3339 UTC timestamp of the evaluation.
    pub timestamp: String,
    /// Reproducibility caveats, e.g. a non-zero temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// A validated six-criterion score record for one script.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub script_id: String,
    /// Integer scores in `[1, 5]`, one per criterion.
    pub scores: PerCriterion<u8>,
    /// Non-empty rationale per criterion.
    pub rationales: PerCriterion<String>,
    pub judge_provenance: JudgeProvenance,
}

/// Everything a backend needs to score one prompt. The stub matches on
/// `script_id` / `goal`; the HTTP backend uses only the prompt.
#[derive(Clone, Copy, Debug)]
pub struct ScoreRequest<'a> {
    pub prompt: &'a JudgePrompt,
    pub script_id: &'a str,
    pub goal: &'a str,
}

/// Errors from configuring or running a judge backend.
#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("missing credential: set `{var}` for the http_llm backend")]
    MissingCredential { var: &'static str },
    #[error("no stub rule matches script `{script_id}`")]
    StubCoverage { script_id: String },
    #[error(transparent)]
    Parse(#[from] ParseFailure),
    #[error("judge configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Script(#[from] ScriptError),
}

impl JudgeError {
    /// Short machine-readable class, used in `failures.jsonl` and for exit
    /// codes.
    pub fn class(&self) -> &'static str {
        match self {
            JudgeError::Transport { .. } => "transport",
            JudgeError::MissingCredential { .. } => "missing_credential",
            JudgeError::StubCoverage { .. } => "stub_coverage",
            JudgeError::Parse(failure) => failure.kind.class(),
            JudgeError::Config(_) => "config",
            JudgeError::Context(_) | JudgeError::Script(_) => "invalid_input",
        }
    }
}

/// Reminder appended to the prompt on the single format-retry.
const FORMAT_REMINDER: &str = "REMINDER: Respond with exactly one JSON object matching the \
OUTPUT FORMAT section: one entry per criterion, each with an integer \"score\" from 1 to 5 \
and a non-empty \"rationale\" string. No prose, no code fences.";

#[derive(Debug)]
enum BackendImpl {
    Stub(StubJudge),
    Http(http::HttpJudge),
}

/// A configured judge, safe for concurrent use.
#[derive(Debug)]
pub struct Judge {
    cfg: JudgeConfig,
    backend: BackendImpl,
}

impl Judge {
    /// Build a judge. For the stub backend, `stub_rules` defaults to the
    /// embedded catch-all rule set when `None`; for the HTTP backend the
    /// credential is read from [`http::API_KEY_VAR`].
    pub fn new(cfg: JudgeConfig, stub_rules: Option<Vec<StubRule>>) -> Result<Judge, JudgeError> {
        cfg.validate()?;
        let backend = match cfg.backend {
            BackendKind::Stub => {
                let rules = match stub_rules {
                    Some(rules) => rules,
                    None => load_stub_rules(assets::STUB_RULES_DEFAULT_JSON)?,
                };
                BackendImpl::Stub(StubJudge::new(rules))
            }
            BackendKind::HttpLlm => BackendImpl::Http(http::HttpJudge::new(&cfg)?),
        };
        Ok(Judge { cfg, backend })
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.cfg
    }

    /// Number of scoring calls issued so far, when the backend counts them
    /// (the stub does; HTTP does not).
    pub fn stub_calls(&self) -> Option<u64> {
        match &self.backend {
            BackendImpl::Stub(stub) => Some(stub.calls()),
            BackendImpl::Http(_) => None,
        }
    }

    /// Obtain one raw response for the request.
    pub fn score(&self, req: &ScoreRequest<'_>) -> Result<String, JudgeError> {
        match &self.backend {
            BackendImpl::Stub(stub) => stub.score(req.script_id, req.goal),
            BackendImpl::Http(http) => http.score(req.prompt),
        }
    }

    fn provenance(&self, rubric: &Rubric, ctx: &ContextVariables) -> JudgeProvenance {
        let model_name = match self.cfg.backend {
            BackendKind::Stub => "stub".to_owned(),
            BackendKind::HttpLlm => self.cfg.model_name.clone(),
        };
        let warning = (self.cfg.temperature != 0.0).then(|| {
            format!(
                "temperature {} is non-zero; judge output may not be reproducible",
                self.cfg.temperature
            )
        });
        JudgeProvenance {
            model_name,
            prompt_version: assets::PROMPT_VERSION.to_owned(),
            rubric_version: rubric.version().to_owned(),
            context: ctx.clone(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            warning,
        }
    }

    /// Instantiate the rubric, assemble the prompt, score it, and parse the
    /// response. On a parse failure the prompt is re-sent once with a format
    /// reminder before the error is surfaced.
    pub fn evaluate_script(
        &self,
        script: &DialogueScript,
        rubric: &Rubric,
        ctx: &ContextVariables,
    ) -> Result<ScoreCard, JudgeError> {
        script.validate()?;
        let instantiated = instantiate(rubric, ctx);
        let prompt = assemble_prompt(script, &instantiated);
        let request = ScoreRequest {
            prompt: &prompt,
            script_id: &script.script_id,
            goal: ctx.goal(),
        };
        let raw = self.score(&request)?;
        let provenance = self.provenance(rubric, ctx);
        match parse_response(&raw, &script.script_id, provenance.clone()) {
            Ok(card) => Ok(card),
            Err(_first_failure) => {
                let reminder_prompt = JudgePrompt {
                    user_text: format!("{}\n\n{}", prompt.user_text, FORMAT_REMINDER),
                    ..prompt.clone()
                };
                let retry_request = ScoreRequest {
                    prompt: &reminder_prompt,
                    ..request
                };
                let raw = self.score(&retry_request)?;
                parse_response(&raw, &script.script_id, provenance).map_err(JudgeError::from)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::{ScriptContext, ScriptSource};

    fn rubric() -> Rubric {
        crate::rubric::load_rubric(assets::DEFAULT_RUBRIC_JSON).unwrap()
    }

    fn ctx() -> ContextVariables {
        ContextVariables::new(
            "scene member",
            "resolving uncertainty by acquiring useful information",
        )
        .unwrap()
    }

    fn script() -> DialogueScript {
        DialogueScript {
            script_id: "scene-001#p1".to_owned(),
            context: ScriptContext {
                scene_description: Some("A van is parked in the street.".to_owned()),
                ..ScriptContext::default()
            },
            fq: "Where did the driver go?".to_owned(),
            fa: None,
            final_answer: None,
            source: ScriptSource::Caus,
        }
    }

    fn stub_judge(scores: [u8; 6]) -> Judge {
        let rules = vec![StubRule {
            matcher: StubMatcher::default(),
            fixed_scores: PerCriterion::from_fn(|id| scores[id as usize]),
            note: None,
        }];
        Judge::new(JudgeConfig::new(BackendKind::Stub), Some(rules)).unwrap()
    }

    #[test]
    fn evaluate_script_composes_the_stub_path() {
        let judge = stub_judge([5, 4, 5, 3, 2, 1]);
        let card = judge.evaluate_script(&script(), &rubric(), &ctx()).unwrap();
        assert_eq!(card.script_id, "scene-001#p1");
        assert_eq!(*card.scores.get(crate::rubric::CriterionId::Cohesion), 5);
        assert_eq!(
            *card.scores.get(crate::rubric::CriterionId::Informativeness),
            1
        );
        assert_eq!(card.judge_provenance.model_name, "stub");
        assert_eq!(card.judge_provenance.prompt_version, "judge_v1");
        assert_eq!(card.judge_provenance.rubric_version, "table2-v1");
        assert!(card.judge_provenance.warning.is_none());
    }

    #[test]
    fn stub_path_is_deterministic_up_to_timestamp() {
        let judge = stub_judge([4, 4, 4, 4, 4, 4]);
        let a = judge.evaluate_script(&script(), &rubric(), &ctx()).unwrap();
        let b = judge.evaluate_script(&script(), &rubric(), &ctx()).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.rationales, b.rationales);
    }

    #[test]
    fn invalid_script_fails_before_any_backend_call() {
        let judge = stub_judge([4, 4, 4, 4, 4, 4]);
        let mut bad = script();
        bad.fq = String::new();
        let err = judge.evaluate_script(&bad, &rubric(), &ctx()).unwrap_err();
        assert!(matches!(err, JudgeError::Script(_)));
        assert_eq!(judge.stub_calls(), Some(0));
    }

    #[test]
    fn non_zero_temperature_records_a_warning() {
        let rules = load_stub_rules(assets::STUB_RULES_DEFAULT_JSON).unwrap();
        let mut cfg = JudgeConfig::new(BackendKind::Stub);
        cfg.temperature = 0.7;
        let judge = Judge::new(cfg, Some(rules)).unwrap();
        let card = judge.evaluate_script(&script(), &rubric(), &ctx()).unwrap();
        let warning = card.judge_provenance.warning.expect("warning present");
        assert!(warning.contains("0.7"));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = JudgeConfig::new(BackendKind::Stub);
        cfg.temperature = -1.0;
        assert!(matches!(cfg.validate(), Err(JudgeError::Config(_))));

        let mut cfg = JudgeConfig::new(BackendKind::Stub);
        cfg.max_tokens = 0;
        assert!(matches!(cfg.validate(), Err(JudgeError::Config(_))));
    }

    #[test]
    fn scorecard_round_trips_through_json() {
        let judge = stub_judge([1, 2, 3, 4, 5, 1]);
        let card = judge.evaluate_script(&script(), &rubric(), &ctx()).unwrap();
        let line = serde_json::to_string(&card).unwrap();
        let back: ScoreCard = serde_json::from_str(&line).unwrap();
        assert_eq!(card, back);
    }
}
