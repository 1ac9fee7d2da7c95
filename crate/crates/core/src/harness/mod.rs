//! Orchestration: the validity test and the resumable batch runner.

pub mod batch;
pub mod validity;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::datasets::DataError;
use crate::judge::{Judge, JudgeError, ScoreCard};
use crate::prompting::DialogueScript;
use crate::rubric::{ContextVariables, CriterionId, PerCriterion, Rubric, RubricError};

pub use batch::{run_batch, BatchConfig, BatchOutcome};
pub use validity::{run_validity, ValidityFixture, ValidityStatus, ValidityVerdict};

/// Errors from end-to-end orchestration.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Rubric(#[from] RubricError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("failed to {action} `{path}`: {message}")]
    Io {
        action: &'static str,
        path: String,
        message: String,
    },
}

/// Mean of the three effectiveness scores (clarity, coherence,
/// informativeness) of one card.
pub fn effectiveness_mean(card: &ScoreCard) -> f64 {
    let sum = f64::from(*card.scores.get(CriterionId::Clarity))
        + f64::from(*card.scores.get(CriterionId::Coherence))
        + f64::from(*card.scores.get(CriterionId::Informativeness));
    sum / 3.0
}

/// Per-criterion majority vote over several cards; ties favor the lower
/// score.
pub fn majority_scores(cards: &[ScoreCard]) -> PerCriterion<u8> {
    PerCriterion::from_fn(|id| {
        let mut counts = [0usize; 5];
        for card in cards {
            counts[usize::from(*card.scores.get(id)) - 1] += 1;
        }
        let mut best_score = 1u8;
        let mut best_count = counts[0];
        for (i, &count) in counts.iter().enumerate().skip(1) {
            if count > best_count {
                best_count = count;
                best_score = (i + 1) as u8;
            }
        }
        best_score
    })
}

/// Evaluate a script `trials` times and combine the results by per-criterion
/// majority vote (ties resolved toward the lower score). The rationale kept
/// for each criterion is the first trial's whose score equals the majority;
/// a provenance warning records the voting.
///
/// With `trials == 1` this is exactly [`Judge::evaluate_script`].
pub fn evaluate_with_trials(
    judge: &Judge,
    script: &DialogueScript,
    rubric: &Rubric,
    ctx: &ContextVariables,
    trials: usize,
) -> Result<ScoreCard, JudgeError> {
    if trials == 0 {
        return Err(JudgeError::Config("trials must be positive".into()));
    }
    if trials == 1 {
        return judge.evaluate_script(script, rubric, ctx);
    }
    let cards: Vec<ScoreCard> = (0..trials)
        .map(|_| judge.evaluate_script(script, rubric, ctx))
        .collect::<Result<_, _>>()?;
    let scores = majority_scores(&cards);
    let rationales = PerCriterion::from_fn(|id| {
        cards
            .iter()
            .find(|card| card.scores.get(id) == scores.get(id))
            .map(|card| card.rationales.get(id).clone())
            .unwrap_or_else(|| "no trial matched the majority score".to_owned())
    });
    let mut combined = cards.into_iter().next().expect("trials >= 1");
    combined.scores = scores;
    combined.rationales = rationales;
    let vote_note = format!(
        "scores are a per-criterion majority over {trials} trials (ties favor the lower score)"
    );
    combined.judge_provenance.warning = Some(match combined.judge_provenance.warning.take() {
        Some(existing) => format!("{existing}; {vote_note}"),
        None => vote_note,
    });
    Ok(combined)
}
