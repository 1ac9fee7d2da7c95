//! Aggregation of score cards into per-set statistics and radar data.
//!
//! Statistics are deliberately computed the obvious way — a two-pass mean /
//! standard deviation in input order — so results can be checked bit-for-bit
//! against an independently written oracle. Values are stored unrounded;
//! rounding happens only when reports are serialized (mean to 2 decimals, sd
//! to 3).

pub mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::ScoreCard;
use crate::rubric::{CriterionId, PerCriterion};

pub use report::render_reports;

/// Which divisor the standard deviation uses.
///
/// The sample convention (`n-1`) is the default; a zero-variance column is
/// identical under both, so published tables computed either way can be
/// matched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdDivisor {
    /// Population standard deviation (divide by `n`).
    #[serde(rename = "n")]
    N,
    /// Sample standard deviation (divide by `n-1`).
    #[default]
    #[serde(rename = "n-1")]
    NMinus1,
}

impl fmt::Display for SdDivisor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SdDivisor::N => "n",
            SdDivisor::NMinus1 => "n-1",
        })
    }
}

impl FromStr for SdDivisor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" => Ok(SdDivisor::N),
            "n-1" => Ok(SdDivisor::NMinus1),
            other => Err(format!("invalid sd divisor `{other}` (expected `n` or `n-1`)")),
        }
    }
}

/// Unrounded statistics for one criterion within one set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionStats {
    pub mean: f64,
    pub sd: f64,
    pub min: u8,
    pub max: u8,
}

/// Per-criterion statistics for one labeled set of score cards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub set_label: String,
    pub n: usize,
    pub per_criterion: PerCriterion<CriterionStats>,
}

/// One question's polygon in a radar chart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadarPolygon {
    pub script_id: String,
    pub values: [u8; 6],
}

/// Everything needed to draw one radar chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarData {
    pub set_label: String,
    /// Fixed axis order: Cohesion, Answerability, Respectfulness, Clarity,
    /// Coherence, Informativeness.
    pub axes: [CriterionId; 6],
    /// Per-question polygons, in input order.
    pub per_question: Vec<RadarPolygon>,
    /// Unrounded per-axis means.
    pub mean_polygon: [f64; 6],
}

// CriterionId participates in serialized analysis artifacts, so give it the
// same lowercase wire form as everywhere else.
impl Serialize for CriterionId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for CriterionId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let key = String::deserialize(deserializer)?;
        CriterionId::from_key(&key)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown criterion `{key}`")))
    }
}

/// Aggregation and report-writing errors.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot aggregate an empty set of score cards")]
    EmptySet,
    #[error("failed to write `{path}`: {message}")]
    Io { path: String, message: String },
}

/// Mean of one criterion across cards, summed in input order.
fn mean_of(cards: &[ScoreCard], id: CriterionId) -> f64 {
    let sum: f64 = cards
        .iter()
        .map(|card| f64::from(*card.scores.get(id)))
        .sum();
    sum / cards.len() as f64
}

/// Compute per-criterion mean, standard deviation, min, and max.
///
/// The mean is the arithmetic mean; the standard deviation is two-pass (sum
/// of squared deviations from the mean, in input order) under the requested
/// divisor. A single-card set has sd 0 by convention.
pub fn aggregate(
    cards: &[ScoreCard],
    set_label: &str,
    divisor: SdDivisor,
) -> Result<AggregateSummary, AnalysisError> {
    if cards.is_empty() {
        return Err(AnalysisError::EmptySet);
    }
    let n = cards.len();
    let per_criterion = PerCriterion::from_fn(|id| {
        let mean = mean_of(cards, id);
        let sd = if n == 1 {
            0.0
        } else {
            let sum_sq: f64 = cards
                .iter()
                .map(|card| {
                    let deviation = f64::from(*card.scores.get(id)) - mean;
                    deviation * deviation
                })
                .sum();
            let denominator = match divisor {
                SdDivisor::N => n as f64,
                SdDivisor::NMinus1 => (n - 1) as f64,
            };
            (sum_sq / denominator).sqrt()
        };
        let min = cards.iter().map(|card| *card.scores.get(id)).min().unwrap();
        let max = cards.iter().map(|card| *card.scores.get(id)).max().unwrap();
        CriterionStats { mean, sd, min, max }
    });
    Ok(AggregateSummary {
        set_label: set_label.to_owned(),
        n,
        per_criterion,
    })
}

/// Build radar-chart data: one polygon per card (input order) plus the mean
/// polygon, computed with the same summation as [`aggregate`] so the two
/// agree exactly.
pub fn radar_data(cards: &[ScoreCard], set_label: &str) -> Result<RadarData, AnalysisError> {
    if cards.is_empty() {
        return Err(AnalysisError::EmptySet);
    }
    let per_question = cards
        .iter()
        .map(|card| RadarPolygon {
            script_id: card.script_id.clone(),
            values: *card.scores.values(),
        })
        .collect();
    let mean_polygon = CriterionId::ALL.map(|id| mean_of(cards, id));
    Ok(RadarData {
        set_label: set_label.to_owned(),
        axes: CriterionId::ALL,
        per_question,
        mean_polygon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::JudgeProvenance;
    use crate::rubric::ContextVariables;

    fn card(script_id: &str, scores: [u8; 6]) -> ScoreCard {
        ScoreCard {
            script_id: script_id.to_owned(),
            scores: PerCriterion::from_fn(|id| scores[id as usize]),
            rationales: PerCriterion::from_fn(|_| "test rationale".to_owned()),
            judge_provenance: JudgeProvenance {
                model_name: "stub".to_owned(),
                prompt_version: "judge_v1".to_owned(),
                rubric_version: "table2-v1".to_owned(),
                context: ContextVariables::new("client", "testing").unwrap(),
                timestamp: "2025-01-01T00:00:00.000Z".to_owned(),
                warning: None,
            },
        }
    }

    #[test]
    fn mean_and_sample_sd_match_hand_computation() {
        let cards = vec![card("a", [3; 6]), card("b", [5; 6])];
        let summary = aggregate(&cards, "pair", SdDivisor::NMinus1).unwrap();
        let stats = summary.per_criterion.get(CriterionId::Cohesion);
        assert_eq!(stats.mean, 4.0);
        assert_eq!(stats.sd, 2.0f64.sqrt());
        assert_eq!((stats.min, stats.max), (3, 5));
    }

    #[test]
    fn population_divisor_is_selectable() {
        let cards = vec![card("a", [3; 6]), card("b", [5; 6])];
        let summary = aggregate(&cards, "pair", SdDivisor::N).unwrap();
        assert_eq!(summary.per_criterion.get(CriterionId::Clarity).sd, 1.0);
    }

    #[test]
    fn single_card_has_zero_sd_by_convention() {
        let cards = vec![card("only", [2, 3, 4, 5, 1, 2])];
        let summary = aggregate(&cards, "solo", SdDivisor::NMinus1).unwrap();
        for (_, stats) in summary.per_criterion.iter() {
            assert_eq!(stats.sd, 0.0);
        }
        assert_eq!(summary.per_criterion.get(CriterionId::Answerability).mean, 3.0);
    }

    #[test]
    fn zero_variance_set_has_exact_mean_and_zero_sd() {
        let cards: Vec<ScoreCard> = (0..50).map(|i| card(&format!("s{i}"), [4; 6])).collect();
        let summary = aggregate(&cards, "1st", SdDivisor::NMinus1).unwrap();
        let stats = summary.per_criterion.get(CriterionId::Cohesion);
        assert_eq!(stats.mean, 4.0);
        assert_eq!(stats.sd, 0.0);
        assert_eq!((stats.min, stats.max), (4, 4));
        assert_eq!(summary.n, 50);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            aggregate(&[], "none", SdDivisor::NMinus1),
            Err(AnalysisError::EmptySet)
        ));
        assert!(matches!(radar_data(&[], "none"), Err(AnalysisError::EmptySet)));
    }

    #[test]
    fn aggregate_bounds_hold() {
        let cards = vec![
            card("a", [1, 5, 2, 4, 3, 1]),
            card("b", [5, 1, 4, 2, 3, 5]),
            card("c", [3, 3, 3, 3, 3, 3]),
        ];
        let summary = aggregate(&cards, "mix", SdDivisor::NMinus1).unwrap();
        for (_, stats) in summary.per_criterion.iter() {
            assert!(stats.sd >= 0.0);
            assert!(f64::from(stats.min) <= stats.mean && stats.mean <= f64::from(stats.max));
            assert!((1.0..=5.0).contains(&stats.mean));
        }
    }

    #[test]
    fn permutation_changes_results_by_at_most_float_noise() {
        let cards: Vec<ScoreCard> = (0..9)
            .map(|i| card(&format!("s{i}"), [((i * 7 + 3) % 5 + 1) as u8; 6]))
            .collect();
        let forward = aggregate(&cards, "set", SdDivisor::NMinus1).unwrap();
        let mut reversed_cards = cards.clone();
        reversed_cards.reverse();
        let reversed = aggregate(&reversed_cards, "set", SdDivisor::NMinus1).unwrap();
        for id in CriterionId::ALL {
            let a = forward.per_criterion.get(id);
            let b = reversed.per_criterion.get(id);
            assert!((a.mean - b.mean).abs() < 1e-12);
            assert!((a.sd - b.sd).abs() < 1e-12);
            assert_eq!((a.min, a.max), (b.min, b.max));
        }
    }

    #[test]
    fn radar_mean_polygon_equals_aggregate_means_exactly() {
        let cards = vec![
            card("a", [4, 4, 5, 5, 5, 5]),
            card("b", [2, 3, 4, 5, 1, 2]),
            card("c", [1, 2, 3, 4, 5, 1]),
        ];
        let summary = aggregate(&cards, "set", SdDivisor::NMinus1).unwrap();
        let radar = radar_data(&cards, "set").unwrap();
        for (i, id) in CriterionId::ALL.into_iter().enumerate() {
            assert_eq!(radar.mean_polygon[i], summary.per_criterion.get(id).mean);
        }
        assert_eq!(radar.per_question.len(), 3);
        assert_eq!(radar.per_question[0].values, [4, 4, 5, 5, 5, 5]);
        assert_eq!(radar.axes, CriterionId::ALL);
    }

    #[test]
    fn single_card_radar_is_the_card_itself() {
        let cards = vec![card("solo", [4, 4, 5, 5, 5, 5])];
        let radar = radar_data(&cards, "solo").unwrap();
        assert_eq!(radar.per_question[0].values, [4, 4, 5, 5, 5, 5]);
        assert_eq!(radar.mean_polygon, [4.0, 4.0, 5.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn sd_divisor_parses_and_displays() {
        assert_eq!("n".parse::<SdDivisor>().unwrap(), SdDivisor::N);
        assert_eq!("n-1".parse::<SdDivisor>().unwrap(), SdDivisor::NMinus1);
        assert!("n-2".parse::<SdDivisor>().is_err());
        assert_eq!(SdDivisor::NMinus1.to_string(), "n-1");
    }
}
