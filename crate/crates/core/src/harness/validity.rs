//! The validity test: one legitimate follow-up question and two deliberately
//! invalid ones, each scored under an information-acquisition goal and a
//! social-interaction goal.
//!
//! The test's qualitative expectations are mechanized as three checks over
//! effectiveness means (clarity + coherence + informativeness, averaged):
//!
//! * **C1** — under the information goal, the legitimate FQ0 strictly beats
//!   FQ1 and FQ2.
//! * **C2** — the small-talk FQ2 strictly improves when judged under the
//!   social goal instead of the information goal.
//! * **C3** — the intent-missing FQ1 never scores above 3 on
//!   informativeness, under either goal.
//!
//! A pair that fails to evaluate marks the verdict *incomplete* — checks are
//! never silently passed on missing data.

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::harness::{effectiveness_mean, evaluate_with_trials, HarnessError};
use crate::judge::{Judge, JudgeError, ScoreCard};
use crate::prompting::{DialogueScript, ScriptContext, ScriptSource};
use crate::rubric::{ContextVariables, CriterionId, Rubric};

/// One follow-up-question variant under test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityVariant {
    pub label: String,
    pub fq: String,
}

/// One goal context the variants are judged under.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityContext {
    pub label: String,
    pub answerer: String,
    pub goal: String,
}

/// The validity-test fixture: a base script, three FQ variants, two goal
/// contexts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityFixture {
    pub context: ScriptContext,
    #[serde(default)]
    pub fa: Option<String>,
    #[serde(default)]
    pub final_answer: Option<String>,
    pub variants: Vec<ValidityVariant>,
    pub contexts: Vec<ValidityContext>,
}

impl ValidityFixture {
    /// The fixture shipped with the repository.
    pub fn embedded() -> ValidityFixture {
        let fixture: ValidityFixture = serde_json::from_str(assets::VALIDITY_FIXTURE_JSON)
            .expect("embedded validity fixture parses");
        fixture
            .validate()
            .expect("embedded validity fixture is valid");
        fixture
    }

    /// Load a fixture from a JSON document.
    pub fn from_json(source: &str) -> Result<ValidityFixture, HarnessError> {
        let fixture: ValidityFixture =
            serde_json::from_str(source).map_err(|err| HarnessError::Io {
                action: "parse",
                path: "validity fixture".to_owned(),
                message: err.to_string(),
            })?;
        fixture.validate()?;
        Ok(fixture)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let labels: Vec<&str> = self.variants.iter().map(|v| v.label.as_str()).collect();
        if labels != ["FQ0", "FQ1", "FQ2"] {
            return Err(HarnessError::Judge(JudgeError::Config(format!(
                "validity fixture must have exactly the variants FQ0, FQ1, FQ2 (found {labels:?})"
            ))));
        }
        if self.contexts.len() != 2 {
            return Err(HarnessError::Judge(JudgeError::Config(format!(
                "validity fixture must have exactly 2 contexts (found {})",
                self.contexts.len()
            ))));
        }
        for context in &self.contexts {
            ContextVariables::new(&context.answerer, &context.goal)
                .map_err(JudgeError::from)?;
        }
        if self.context.is_empty() {
            return Err(HarnessError::Judge(JudgeError::Config(
                "validity fixture base script has no context fields".into(),
            )));
        }
        Ok(())
    }

    fn script_for(&self, variant: &ValidityVariant) -> DialogueScript {
        DialogueScript {
            script_id: variant.label.clone(),
            context: self.context.clone(),
            fq: variant.fq.clone(),
            fa: self.fa.clone(),
            final_answer: self.final_answer.clone(),
            source: ScriptSource::Fixture,
        }
    }
}

/// A successfully scored (variant, context) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPair {
    pub variant: String,
    pub context_label: String,
    pub card: ScoreCard,
}

/// A (variant, context) pair that could not be scored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFailure {
    pub variant: String,
    pub context_label: String,
    pub class: String,
    pub message: String,
}

/// One named check with its outcome and a human-readable detail line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Overall outcome of a validity run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidityStatus {
    /// All pairs evaluated, all checks passed.
    Passed,
    /// All pairs evaluated, at least one check failed.
    Failed,
    /// At least one pair failed to evaluate; checks touching it are
    /// reported as not evaluated.
    Incomplete,
}

/// The full result of a validity run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub status: ValidityStatus,
    pub checks: Vec<ValidityCheck>,
    pub pairs: Vec<EvaluatedPair>,
    pub failures: Vec<PairFailure>,
}

impl ValidityVerdict {
    pub fn passed(&self) -> bool {
        self.status == ValidityStatus::Passed
    }
}

/// Evaluate all six (variant × context) pairs and compute checks C1–C3.
pub fn run_validity(
    judge: &Judge,
    rubric: &Rubric,
    fixture: &ValidityFixture,
    trials: usize,
) -> ValidityVerdict {
    let mut pairs = Vec::new();
    let mut failures = Vec::new();

    for context in &fixture.contexts {
        let ctx = match ContextVariables::new(&context.answerer, &context.goal) {
            Ok(ctx) => ctx,
            Err(err) => {
                for variant in &fixture.variants {
                    failures.push(PairFailure {
                        variant: variant.label.clone(),
                        context_label: context.label.clone(),
                        class: "invalid_input".to_owned(),
                        message: err.to_string(),
                    });
                }
                continue;
            }
        };
        for variant in &fixture.variants {
            let script = fixture.script_for(variant);
            match evaluate_with_trials(judge, &script, rubric, &ctx, trials) {
                Ok(card) => pairs.push(EvaluatedPair {
                    variant: variant.label.clone(),
                    context_label: context.label.clone(),
                    card,
                }),
                Err(err) => failures.push(PairFailure {
                    variant: variant.label.clone(),
                    context_label: context.label.clone(),
                    class: err.class().to_owned(),
                    message: err.to_string(),
                }),
            }
        }
    }

    let info_label = &fixture.contexts[0].label;
    let social_label = &fixture.contexts[1].label;
    let find = |variant: &str, context_label: &str| {
        pairs
            .iter()
            .find(|pair| pair.variant == variant && pair.context_label == context_label)
            .map(|pair| &pair.card)
    };

    let mut checks = Vec::new();

    // C1: under the information goal, FQ0's effectiveness mean strictly
    // exceeds FQ1's and FQ2's.
    checks.push(
        match (
            find("FQ0", info_label),
            find("FQ1", info_label),
            find("FQ2", info_label),
        ) {
            (Some(fq0), Some(fq1), Some(fq2)) => {
                let (e0, e1, e2) = (
                    effectiveness_mean(fq0),
                    effectiveness_mean(fq1),
                    effectiveness_mean(fq2),
                );
                ValidityCheck {
                    name: "C1".to_owned(),
                    passed: e0 > e1 && e0 > e2,
                    detail: format!(
                        "effectiveness means under the {info_label} goal: FQ0 {e0:.2}, FQ1 {e1:.2}, \
                         FQ2 {e2:.2} (expected FQ0 strictly greatest)"
                    ),
                }
            }
            _ => not_evaluated("C1", "missing scores under the information goal"),
        },
    );

    // C2: FQ2's effectiveness mean is strictly higher under the social goal
    // than under the information goal.
    checks.push(match (find("FQ2", social_label), find("FQ2", info_label)) {
        (Some(social), Some(info)) => {
            let (es, ei) = (effectiveness_mean(social), effectiveness_mean(info));
            ValidityCheck {
                name: "C2".to_owned(),
                passed: es > ei,
                detail: format!(
                    "FQ2 effectiveness mean: {social_label} {es:.2} vs {info_label} {ei:.2} \
                     (expected strictly greater under {social_label})"
                ),
            }
        }
        _ => not_evaluated("C2", "missing FQ2 scores in one of the goals"),
    });

    // C3: FQ1's informativeness stays at or below 3 under both goals.
    checks.push(match (find("FQ1", info_label), find("FQ1", social_label)) {
        (Some(info), Some(social)) => {
            let i_info = *info.scores.get(CriterionId::Informativeness);
            let i_social = *social.scores.get(CriterionId::Informativeness);
            ValidityCheck {
                name: "C3".to_owned(),
                passed: i_info <= 3 && i_social <= 3,
                detail: format!(
                    "FQ1 informativeness: {info_label} {i_info}, {social_label} {i_social} \
                     (expected both <= 3)"
                ),
            }
        }
        _ => not_evaluated("C3", "missing FQ1 scores in one of the goals"),
    });

    let status = if !failures.is_empty() {
        ValidityStatus::Incomplete
    } else if checks.iter().all(|check| check.passed) {
        ValidityStatus::Passed
    } else {
        ValidityStatus::Failed
    };

    ValidityVerdict {
        status,
        checks,
        pairs,
        failures,
    }
}

fn not_evaluated(name: &str, reason: &str) -> ValidityCheck {
    ValidityCheck {
        name: name.to_owned(),
        passed: false,
        detail: format!("not evaluated: {reason}"),
    }
}
