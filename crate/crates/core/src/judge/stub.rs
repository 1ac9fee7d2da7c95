//! The deterministic stub backend.
//!
//! A stub judge carries an ordered list of [`StubRule`]s. Scoring walks the
//! list and takes the first rule whose matcher accepts the script — matching
//! is plain substring containment on `script_id` and the context `goal`; an
//! empty matcher accepts everything. The rule's fixed scores are synthesized
//! into exactly the JSON shape a well-behaved LLM judge would return, so the
//! stub exercises the same parsing path as live runs.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::judge::JudgeError;
use crate::rubric::{CriterionId, PerCriterion};

/// Substring matchers for rule selection; `None` matches anything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubMatcher {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
}

impl StubMatcher {
    pub fn matches(&self, script_id: &str, goal: &str) -> bool {
        self.script_id
            .as_deref()
            .is_none_or(|pat| script_id.contains(pat))
            && self.goal.as_deref().is_none_or(|pat| goal.contains(pat))
    }
}

/// One stub rule: a matcher plus the complete score vector it produces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubRule {
    #[serde(default)]
    pub matcher: StubMatcher,
    pub fixed_scores: PerCriterion<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Parse and validate a stub-rules file (JSON array of [`StubRule`]).
pub fn load_stub_rules(source: &str) -> Result<Vec<StubRule>, JudgeError> {
    let rules: Vec<StubRule> = serde_json::from_str(source)
        .map_err(|err| JudgeError::Config(format!("invalid stub rules file: {err}")))?;
    for (index, rule) in rules.iter().enumerate() {
        for (id, &score) in rule.fixed_scores.iter() {
            if !(1..=5).contains(&score) {
                return Err(JudgeError::Config(format!(
                    "stub rule {index}: score {score} for `{}` outside [1,5]",
                    id.key()
                )));
            }
        }
    }
    Ok(rules)
}

/// Deterministic scoring backend; thread-safe.
#[derive(Debug)]
pub struct StubJudge {
    rules: Vec<StubRule>,
    calls: AtomicU64,
}

impl StubJudge {
    pub fn new(rules: Vec<StubRule>) -> Self {
        StubJudge {
            rules,
            calls: AtomicU64::new(0),
        }
    }

    /// How many scoring calls this judge has served.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Synthesize a raw response for the first matching rule.
    pub fn score(&self, script_id: &str, goal: &str) -> Result<String, JudgeError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let (index, rule) = self
            .rules
            .iter()
            .enumerate()
            .find(|(_, rule)| rule.matcher.matches(script_id, goal))
            .ok_or_else(|| JudgeError::StubCoverage {
                script_id: script_id.to_owned(),
            })?;

        let mut response = serde_json::Map::new();
        for id in CriterionId::ALL {
            let score = *rule.fixed_scores.get(id);
            let rationale = match &rule.note {
                Some(note) => format!("stub rule {index} ({note}): fixed score {score}"),
                None => format!("stub rule {index}: fixed score {score}"),
            };
            response.insert(
                id.key().to_owned(),
                serde_json::json!({ "score": score, "rationale": rationale }),
            );
        }
        Ok(serde_json::Value::Object(response).to_string())
    }
}
