//! Normalized dataset loaders and seeded sampling adapters.
//!
//! Adapters consume normalized JSON files (see the `fixtures/` directory for
//! examples of each shape) and produce [`QuestionSet`]s: groups of scripts
//! that share one fixed [`ContextVariables`]. Sampling is without
//! replacement, driven by a ChaCha8 generator seeded from the caller's seed,
//! so identical inputs and seed reproduce identical sets, order included.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::{DialogueScript, ScriptContext, ScriptError, ScriptSource};
use crate::rubric::ContextVariables;

/// Context fixed for every CAUS-derived script.
pub const CAUS_ANSWERER: &str = "scene member";
pub const CAUS_GOAL: &str = "resolving uncertainty by acquiring useful information";

/// Context fixed for every SQUARE-derived script.
pub const SQUARE_ANSWERER: &str = "Large Language Model";
pub const SQUARE_GOAL: &str = "harmless and helpful conversation";

/// One scene with uncertainty and its five sequential questions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausRecord {
    pub scene_id: String,
    pub scene_description: String,
    /// Exactly five questions; `questions[i]` was generated at position `i + 1`.
    pub questions: Vec<String>,
}

impl CausRecord {
    fn validate(&self) -> Result<(), DataError> {
        if self.questions.len() != 5 {
            return Err(DataError::Invalid {
                record_id: self.scene_id.clone(),
                reason: format!("expected 5 questions, found {}", self.questions.len()),
            });
        }
        if let Some(i) = self.questions.iter().position(|q| q.trim().is_empty()) {
            return Err(DataError::Invalid {
                record_id: self.scene_id.clone(),
                reason: format!("question {} is empty", i + 1),
            });
        }
        if self.scene_description.trim().is_empty() {
            return Err(DataError::Invalid {
                record_id: self.scene_id.clone(),
                reason: "scene_description is empty".to_owned(),
            });
        }
        Ok(())
    }
}

/// The three sensitive-question categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SquareCategory {
    Contentious,
    Ethical,
    Predictive,
}

impl SquareCategory {
    pub const ALL: [SquareCategory; 3] = [
        SquareCategory::Contentious,
        SquareCategory::Ethical,
        SquareCategory::Predictive,
    ];

    pub fn key(self) -> &'static str {
        match self {
            SquareCategory::Contentious => "contentious",
            SquareCategory::Ethical => "ethical",
            SquareCategory::Predictive => "predictive",
        }
    }
}

/// One sensitive question with its news-headline context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareRecord {
    pub record_id: String,
    pub category: SquareCategory,
    pub headline: String,
    pub question: String,
}

impl SquareRecord {
    fn validate(&self) -> Result<(), DataError> {
        if self.question.trim().is_empty() {
            return Err(DataError::Invalid {
                record_id: self.record_id.clone(),
                reason: "question is empty".to_owned(),
            });
        }
        Ok(())
    }
}

/// A labeled group of scripts sharing one context, e.g. all first-position
/// CAUS questions or all contentious SQUARE questions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionSet {
    pub set_label: String,
    pub scripts: Vec<DialogueScript>,
    pub context: ContextVariables,
}

/// Ingestion and sampling errors.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse `{path}` at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid record `{record_id}`: {reason}")]
    Invalid { record_id: String, reason: String },
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("sampling error: {0}")]
    Sampling(String),
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|err| DataError::Parse {
        path: path.display().to_string(),
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    })
}

/// Load a normalized CAUS file: a JSON array of
/// `{scene_id, scene_description, questions: [5 strings]}`.
pub fn load_caus(path: &Path) -> Result<Vec<CausRecord>, DataError> {
    let records: Vec<CausRecord> = read_json_file(path)?;
    for record in &records {
        record.validate()?;
    }
    Ok(records)
}

/// Load a normalized SQUARE file: a JSON array of
/// `{record_id, category, headline, question}`.
pub fn load_square(path: &Path) -> Result<Vec<SquareRecord>, DataError> {
    let records: Vec<SquareRecord> = read_json_file(path)?;
    for record in &records {
        record.validate()?;
    }
    Ok(records)
}

/// The on-disk shape of one generic script entry:
/// `{context: {...}, "follow-up": {FQ, FA?, final_answer?}, script_id?}`.
#[derive(Deserialize)]
struct GenericEntry {
    #[serde(default)]
    script_id: Option<String>,
    context: ScriptContext,
    #[serde(rename = "follow-up")]
    follow_up: GenericFollowUp,
}

#[derive(Deserialize)]
struct GenericFollowUp {
    #[serde(rename = "FQ")]
    fq: String,
    #[serde(rename = "FA", default)]
    fa: Option<String>,
    #[serde(default)]
    final_answer: Option<String>,
}

/// Load a generic dialogue-script file (a JSON array of follow-up-shaped
/// entries). Entries without a `script_id` are labeled `generic#<n>` by
/// 1-based position.
pub fn load_generic(path: &Path) -> Result<Vec<DialogueScript>, DataError> {
    let entries: Vec<GenericEntry> = read_json_file(path)?;
    let mut scripts = Vec::with_capacity(entries.len());
    for (i, entry) in entries.into_iter().enumerate() {
        let script = DialogueScript {
            script_id: entry
                .script_id
                .unwrap_or_else(|| format!("generic#{}", i + 1)),
            context: entry.context,
            fq: entry.follow_up.fq,
            fa: entry.follow_up.fa,
            final_answer: entry.follow_up.final_answer,
            source: ScriptSource::Generic,
        };
        script.validate()?;
        scripts.push(script);
    }
    Ok(scripts)
}

/// English ordinal for a 1-based generation position ("1st", "3rd", …).
pub fn position_label(position: u8) -> String {
    let suffix = match position {
        1 => "st",
        2 => "nd",
        3 => "rd",
        _ => "th",
    };
    format!("{position}{suffix}")
}

/// Sample `per_position` scenes per requested position and emit one
/// [`QuestionSet`] per position, context fixed to the CAUS protocol
/// (answerer "scene member", goal "resolving uncertainty by acquiring useful
/// information").
///
/// Positions are 1-based; the script for scene `S` at position `p` gets the
/// id `S#p{p}`. Sampling is without replacement within each position.
pub fn adapt_caus(
    records: &[CausRecord],
    positions: &[u8],
    per_position: usize,
    seed: u64,
) -> Result<Vec<QuestionSet>, DataError> {
    if positions.is_empty() {
        return Err(DataError::Sampling("no positions requested".to_owned()));
    }
    let mut sorted_positions = positions.to_vec();
    sorted_positions.sort_unstable();
    sorted_positions.dedup();
    if let Some(&bad) = sorted_positions.iter().find(|p| !(1..=5).contains(*p)) {
        return Err(DataError::Sampling(format!(
            "position {bad} outside the valid range 1..=5"
        )));
    }
    if per_position == 0 {
        return Err(DataError::Sampling("per_position must be positive".to_owned()));
    }
    if per_position > records.len() {
        return Err(DataError::Sampling(format!(
            "per_position {per_position} exceeds the {} available records",
            records.len()
        )));
    }
    for record in records {
        record.validate()?;
    }

    let context = ContextVariables::new(CAUS_ANSWERER, CAUS_GOAL)
        .expect("fixed CAUS context is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(sorted_positions.len());
    for &position in &sorted_positions {
        let indices = rand::seq::index::sample(&mut rng, records.len(), per_position);
        let scripts = indices
            .iter()
            .map(|idx| {
                let record = &records[idx];
                DialogueScript {
                    script_id: format!("{}#p{position}", record.scene_id),
                    context: ScriptContext {
                        scene_description: Some(record.scene_description.clone()),
                        ..ScriptContext::default()
                    },
                    fq: record.questions[usize::from(position) - 1].clone(),
                    fa: None,
                    final_answer: None,
                    source: ScriptSource::Caus,
                }
            })
            .collect();
        sets.push(QuestionSet {
            set_label: position_label(position),
            scripts,
            context: context.clone(),
        });
    }
    Ok(sets)
}

/// Sample `per_category` records per category and emit one [`QuestionSet`]
/// per category in fixed order (contentious, ethical, predictive), context
/// fixed to the SQUARE protocol (answerer "Large Language Model", goal
/// "harmless and helpful conversation").
pub fn adapt_square(
    records: &[SquareRecord],
    per_category: usize,
    seed: u64,
) -> Result<Vec<QuestionSet>, DataError> {
    if per_category == 0 {
        return Err(DataError::Sampling("per_category must be positive".to_owned()));
    }
    for record in records {
        record.validate()?;
    }

    let context = ContextVariables::new(SQUARE_ANSWERER, SQUARE_GOAL)
        .expect("fixed SQUARE context is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(SquareCategory::ALL.len());
    for category in SquareCategory::ALL {
        let pool: Vec<&SquareRecord> = records
            .iter()
            .filter(|record| record.category == category)
            .collect();
        if pool.len() < per_category {
            return Err(DataError::Sampling(format!(
                "category `{}` has {} records, need {per_category}",
                category.key(),
                pool.len()
            )));
        }
        let indices = rand::seq::index::sample(&mut rng, pool.len(), per_category);
        let scripts = indices
            .iter()
            .map(|idx| {
                let record = pool[idx];
                DialogueScript {
                    script_id: record.record_id.clone(),
                    context: ScriptContext {
                        headline: Some(record.headline.clone()),
                        ..ScriptContext::default()
                    },
                    fq: record.question.clone(),
                    fa: None,
                    final_answer: None,
                    source: ScriptSource::Square,
                }
            })
            .collect();
        sets.push(QuestionSet {
            set_label: category.key().to_owned(),
            scripts,
            context: context.clone(),
        });
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(name)
    }

    fn caus_records() -> Vec<CausRecord> {
        load_caus(&fixture("caus_small.json")).unwrap()
    }

    #[test]
    fn caus_fixture_loads_five_scenes() {
        let records = caus_records();
        assert_eq!(records.len(), 5);
        assert!(records.iter().all(|r| r.questions.len() == 5));
    }

    #[test]
    fn square_fixture_loads_nine_balanced_records() {
        let records = load_square(&fixture("square_small.json")).unwrap();
        assert_eq!(records.len(), 9);
        for category in SquareCategory::ALL {
            let count = records.iter().filter(|r| r.category == category).count();
            assert_eq!(count, 3, "{}", category.key());
        }
    }

    #[test]
    fn adapt_caus_emits_one_set_per_position_with_fixed_context() {
        let sets = adapt_caus(&caus_records(), &[1, 3, 5], 5, 42).unwrap();
        assert_eq!(sets.len(), 3);
        assert_eq!(
            sets.iter().map(|s| s.set_label.as_str()).collect::<Vec<_>>(),
            ["1st", "3rd", "5th"]
        );
        for set in &sets {
            assert_eq!(set.scripts.len(), 5);
            assert_eq!(set.context.answerer(), CAUS_ANSWERER);
            assert_eq!(set.context.goal(), CAUS_GOAL);
        }
        // Position picks the right question: scene-001 at position 1.
        let first = sets[0]
            .scripts
            .iter()
            .find(|s| s.script_id == "scene-001#p1")
            .unwrap();
        assert_eq!(first.fq, "Where did the driver of the van go?");
        assert_eq!(
            first.context.scene_description.as_deref().unwrap(),
            "A delivery van is parked in the middle of the street with its hazard lights on, \
             and the driver is nowhere to be seen."
        );
    }

    #[test]
    fn adapt_caus_degenerate_single_record() {
        let records = vec![caus_records()[0].clone()];
        let sets = adapt_caus(&records, &[1], 1, 0).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].scripts.len(), 1);
        assert_eq!(sets[0].scripts[0].fq, "Where did the driver of the van go?");
    }

    #[test]
    fn adapt_caus_is_seed_deterministic() {
        let records = caus_records();
        let a = adapt_caus(&records, &[1, 3, 5], 3, 7).unwrap();
        let b = adapt_caus(&records, &[1, 3, 5], 3, 7).unwrap();
        assert_eq!(a, b);
        let c = adapt_caus(&records, &[1, 3, 5], 3, 8).unwrap();
        assert_ne!(a, c, "a different seed should (here) shuffle the sample");
    }

    #[test]
    fn adapt_caus_samples_without_replacement() {
        let sets = adapt_caus(&caus_records(), &[2], 5, 13).unwrap();
        let mut ids: Vec<&str> = sets[0].scripts.iter().map(|s| s.script_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 5, "no duplicate scenes within a set");
    }

    #[test]
    fn adapt_caus_rejects_oversized_and_invalid_requests() {
        let records = caus_records();
        let err = adapt_caus(&records, &[1], 50, 0).unwrap_err();
        assert!(matches!(err, DataError::Sampling(_)));
        assert!(err.to_string().contains("per_position 50 exceeds"));

        let err = adapt_caus(&records, &[7], 1, 0).unwrap_err();
        assert!(err.to_string().contains("position 7"));
    }

    #[test]
    fn adapt_square_emits_three_sets_with_fixed_context() {
        let records = load_square(&fixture("square_small.json")).unwrap();
        let sets = adapt_square(&records, 3, 11).unwrap();
        assert_eq!(sets.len(), 3);
        assert_eq!(
            sets.iter().map(|s| s.set_label.as_str()).collect::<Vec<_>>(),
            ["contentious", "ethical", "predictive"]
        );
        for set in &sets {
            assert_eq!(set.scripts.len(), 3);
            assert_eq!(set.context.answerer(), SQUARE_ANSWERER);
            assert_eq!(set.context.goal(), SQUARE_GOAL);
            assert!(set.scripts.iter().all(|s| s.context.headline.is_some()));
        }
    }

    #[test]
    fn adapt_square_names_the_short_category() {
        let records: Vec<SquareRecord> = load_square(&fixture("square_small.json"))
            .unwrap()
            .into_iter()
            .filter(|r| r.category != SquareCategory::Predictive || r.record_id == "sq-p-01")
            .collect();
        let err = adapt_square(&records, 2, 0).unwrap_err();
        assert!(err.to_string().contains("`predictive`"), "got: {err}");
    }

    #[test]
    fn adapt_square_is_seed_deterministic() {
        let records = load_square(&fixture("square_small.json")).unwrap();
        assert_eq!(
            adapt_square(&records, 2, 5).unwrap(),
            adapt_square(&records, 2, 5).unwrap()
        );
    }

    #[test]
    fn load_generic_parses_the_figure_fixture() {
        let scripts = load_generic(&fixture("generic_figure1.json")).unwrap();
        assert_eq!(scripts.len(), 1);
        let script = &scripts[0];
        assert_eq!(script.script_id, "generic#1");
        assert_eq!(script.context.main_intent.as_deref(), Some("address_change"));
        assert_eq!(
            script.fq,
            "Yes, sir. Just to confirm, is it just the address that's changing while the \
             ownership stays the same?"
        );
        assert_eq!(script.fa.as_deref(), Some("Yes, that's correct"));
        assert_eq!(script.source, ScriptSource::Generic);
    }

    #[test]
    fn load_generic_accepts_an_empty_array() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.json");
        std::fs::write(&path, "[]").unwrap();
        assert!(load_generic(&path).unwrap().is_empty());
    }

    #[test]
    fn load_generic_missing_fq_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing_fq.json");
        std::fs::write(
            &path,
            r#"[{"context": {"headline": "x"}, "follow-up": {"FA": "sure"}}]"#,
        )
        .unwrap();
        let err = load_generic(&path).unwrap_err();
        assert!(err.to_string().contains("FQ"), "got: {err}");
    }

    #[test]
    fn load_errors_carry_the_path() {
        let err = load_caus(Path::new("/nonexistent/caus.json")).unwrap_err();
        assert!(matches!(err, DataError::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/caus.json"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{ not json").unwrap();
        let err = load_caus(&path).unwrap_err();
        assert!(matches!(err, DataError::Parse { .. }));
        assert!(err.to_string().contains("bad.json"));
    }

    #[test]
    fn malformed_caus_record_names_the_scene() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("caus4.json");
        std::fs::write(
            &path,
            r#"[{"scene_id": "scene-X", "scene_description": "d",
                "questions": ["a", "b", "c", "d"]}]"#,
        )
        .unwrap();
        let err = load_caus(&path).unwrap_err();
        assert_eq!(
            err.to_string(),
            "invalid record `scene-X`: expected 5 questions, found 4"
        );
    }

    #[test]
    fn position_labels_are_english_ordinals() {
        assert_eq!(position_label(1), "1st");
        assert_eq!(position_label(2), "2nd");
        assert_eq!(position_label(3), "3rd");
        assert_eq!(position_label(4), "4th");
        assert_eq!(position_label(5), "5th");
    }
}
