//! Strict parsing of raw judge responses into [`ScoreCard`]s.
//!
//! Judges are instructed to return a bare JSON object, but in practice LLMs
//! wrap output in prose or code fences. Extraction therefore scans for the
//! first balanced `{…}` region that parses as a JSON object, then validates
//! it strictly: all six criteria present, every score an integer in `[1, 5]`,
//! every rationale a non-empty string. Failures carry the raw response for
//! audit and fall into three classes — `format`, `incomplete_response`, and
//! `range` — so callers can distinguish "no usable JSON" from "JSON with
//! holes" from "JSON with bad values".

use std::fmt;

use serde_json::Value;

use crate::judge::{JudgeProvenance, ScoreCard};
use crate::rubric::{CriterionId, PerCriterion};

/// Why a raw response could not become a [`ScoreCard`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseFailureKind {
    /// No balanced region of the response parsed as a JSON object.
    NoJsonObject,
    /// A criterion key is absent from the response object.
    MissingCriterion { criterion: &'static str },
    /// The criterion entry has no usable integer `score` slot.
    MissingScore { criterion: &'static str },
    /// The score is an integer outside `[1, 5]`.
    OutOfRange { criterion: &'static str, score: i64 },
    /// The score is not an integer (float, string, etc.).
    NonIntegerScore {
        criterion: &'static str,
        value: String,
    },
    /// The rationale is absent, not a string, or empty.
    MissingRationale { criterion: &'static str },
}

impl ParseFailureKind {
    /// Error class: `format`, `incomplete_response`, or `range`.
    pub fn class(&self) -> &'static str {
        match self {
            ParseFailureKind::NoJsonObject => "format",
            ParseFailureKind::MissingCriterion { .. }
            | ParseFailureKind::MissingScore { .. }
            | ParseFailureKind::MissingRationale { .. } => "incomplete_response",
            ParseFailureKind::OutOfRange { .. } | ParseFailureKind::NonIntegerScore { .. } => {
                "range"
            }
        }
    }
}

/// A parse failure, retaining the raw response text for audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub kind: ParseFailureKind,
    pub raw: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.kind.class())?;
        match &self.kind {
            ParseFailureKind::NoJsonObject => {
                write!(f, "no JSON object found in judge response")
            }
            ParseFailureKind::MissingCriterion { criterion } => {
                write!(f, "missing criterion `{criterion}`")
            }
            ParseFailureKind::MissingScore { criterion } => {
                write!(f, "missing `score` for criterion `{criterion}`")
            }
            ParseFailureKind::OutOfRange { criterion, score } => {
                write!(f, "score {score} for criterion `{criterion}` outside [1,5]")
            }
            ParseFailureKind::NonIntegerScore { criterion, value } => {
                write!(f, "non-integer score {value} for criterion `{criterion}`")
            }
            ParseFailureKind::MissingRationale { criterion } => {
                write!(f, "missing or empty `rationale` for criterion `{criterion}`")
            }
        }
    }
}

impl std::error::Error for ParseFailure {}

/// Yield each balanced `{…}` slice of `raw`, in order of starting position.
///
/// The scan is string-aware: braces inside JSON string literals (including
/// escaped quotes) do not affect the balance. Unbalanced opens yield nothing.
fn balanced_object_slices(raw: &str) -> impl Iterator<Item = &str> {
    let bytes = raw.as_bytes();
    let mut starts = Vec::new();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'{' {
            starts.push(i);
        }
    }
    starts.into_iter().filter_map(move |start| {
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (offset, &b) in bytes[start..].iter().enumerate() {
            if in_string {
                if escaped {
                    escaped = false;
                } else if b == b'\\' {
                    escaped = true;
                } else if b == b'"' {
                    in_string = false;
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(&raw[start..start + offset + 1]);
                    }
                }
                _ => {}
            }
        }
        None
    })
}

/// Extract the first JSON object embedded in `raw`, tolerating surrounding
/// prose and code fences.
fn extract_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    for slice in balanced_object_slices(raw) {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(slice) {
            return Some(map);
        }
    }
    None
}

/// Parse a raw judge response into a validated [`ScoreCard`].
pub fn parse_response(
    raw: &str,
    script_id: &str,
    provenance: JudgeProvenance,
) -> Result<ScoreCard, ParseFailure> {
    let fail = |kind| ParseFailure {
        kind,
        raw: raw.to_owned(),
    };

    let object = extract_object(raw).ok_or_else(|| fail(ParseFailureKind::NoJsonObject))?;

    let mut scores = [0u8; 6];
    let mut rationales: [Option<String>; 6] = Default::default();
    for id in CriterionId::ALL {
        let key = id.key();
        let entry = object
            .get(key)
            .ok_or_else(|| fail(ParseFailureKind::MissingCriterion { criterion: key }))?;
        // Unknown sibling keys (e.g. an "overall" comment) are tolerated;
        // only the six criterion entries are validated.
        let score_value = entry
            .get("score")
            .ok_or_else(|| fail(ParseFailureKind::MissingScore { criterion: key }))?;
        let score = match score_value {
            Value::Number(n) => n.as_i64().ok_or_else(|| {
                fail(ParseFailureKind::NonIntegerScore {
                    criterion: key,
                    value: n.to_string(),
                })
            })?,
            other => {
                return Err(fail(ParseFailureKind::NonIntegerScore {
                    criterion: key,
                    value: other.to_string(),
                }))
            }
        };
        if !(1..=5).contains(&score) {
            return Err(fail(ParseFailureKind::OutOfRange {
                criterion: key,
                score,
            }));
        }
        let rationale = entry
            .get("rationale")
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| fail(ParseFailureKind::MissingRationale { criterion: key }))?;
        scores[id as usize] = score as u8;
        rationales[id as usize] = Some(rationale.to_owned());
    }

    Ok(ScoreCard {
        script_id: script_id.to_owned(),
        scores: PerCriterion::from_fn(|id| scores[id as usize]),
        rationales: PerCriterion::from_fn(|id| {
            rationales[id as usize].clone().expect("filled above")
        }),
        judge_provenance: provenance,
    })
}
