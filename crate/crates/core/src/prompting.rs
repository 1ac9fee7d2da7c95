//! Dialogue scripts and judge-prompt assembly.
//!
//! The prompt template ships as a versioned asset (`prompts/judge_v1.txt`)
//! with three named slots — `{{context}}`, `{{fq}}`, `{{rubric}}` — inside a
//! fixed section layout. Assembly is a pure function: identical inputs
//! produce byte-identical prompts, and slot values are inserted literally,
//! so nothing in a script can alter the surrounding template.

use std::fmt::Write as _;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::rubric::InstantiatedRubric;

/// Identifier of the response schema the prompt instructs the judge to emit;
/// the parser in [`crate::judge`] enforces the same schema.
pub const EXPECTED_SCHEMA_ID: &str = "scorecard_v1";

/// Where a script came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptSource {
    Caus,
    Square,
    Generic,
    Fixture,
}

/// The situational fields a script may carry; at least one must be present.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_intent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_request: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headline: Option<String>,
}

impl ScriptContext {
    /// Present fields as `(label, value)` pairs, in the fixed rendering order.
    pub fn fields(&self) -> Vec<(&'static str, &str)> {
        let mut fields = Vec::new();
        if let Some(v) = &self.main_intent {
            fields.push(("main_intent", v.as_str()));
        }
        if let Some(v) = &self.user_request {
            fields.push(("user_request", v.as_str()));
        }
        if let Some(v) = &self.scene_description {
            fields.push(("scene_description", v.as_str()));
        }
        if let Some(v) = &self.headline {
            fields.push(("headline", v.as_str()));
        }
        fields
    }

    pub fn is_empty(&self) -> bool {
        self.fields().is_empty()
    }
}

/// One dialogue script: the context in which a follow-up question was asked,
/// and the question itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueScript {
    pub script_id: String,
    pub context: ScriptContext,
    /// The follow-up question under evaluation.
    pub fq: String,
    /// The answer the follow-up question received, if recorded. Kept for
    /// provenance; not rendered into the judge prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fa: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    pub source: ScriptSource,
}

impl DialogueScript {
    pub fn validate(&self) -> Result<(), ScriptError> {
        if self.fq.trim().is_empty() {
            return Err(ScriptError::EmptyFq {
                script_id: self.script_id.clone(),
            });
        }
        if self.context.is_empty() {
            return Err(ScriptError::NoContext {
                script_id: self.script_id.clone(),
            });
        }
        Ok(())
    }
}

/// Structural problems with a [`DialogueScript`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("script `{script_id}`: field `FQ` must be present and non-empty")]
    EmptyFq { script_id: String },
    #[error("script `{script_id}`: at least one context field must be present")]
    NoContext { script_id: String },
}

/// A fully assembled judge prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePrompt {
    pub system_text: String,
    pub user_text: String,
    pub expected_schema_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Context,
    Fq,
    Rubric,
}

/// A parsed prompt template: a system block plus a user block with slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    system: String,
    user: Vec<Segment>,
}

/// Problems parsing a prompt template.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("prompt template: missing `{marker}` marker")]
    MissingMarker { marker: &'static str },
    #[error("prompt template: unknown slot `{{{{{name}}}}}`")]
    UnknownSlot { name: String },
    #[error("prompt template: unterminated slot `{{{{`")]
    UnterminatedSlot,
}

const SYSTEM_MARKER: &str = "<<<SYSTEM>>>\n";
const USER_MARKER: &str = "<<<USER>>>\n";

impl PromptTemplate {
    /// Parse a template of the form used by `prompts/judge_v1.txt`.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let rest = text
            .strip_prefix(SYSTEM_MARKER)
            .ok_or(TemplateError::MissingMarker {
                marker: "<<<SYSTEM>>>",
            })?;
        let (system, user_raw) =
            rest.split_once(USER_MARKER)
                .ok_or(TemplateError::MissingMarker {
                    marker: "<<<USER>>>",
                })?;

        let mut user = Vec::new();
        let mut remaining = user_raw;
        while let Some(start) = remaining.find("{{") {
            if start > 0 {
                user.push(Segment::Literal(remaining[..start].to_owned()));
            }
            let after = &remaining[start + 2..];
            let end = after.find("}}").ok_or(TemplateError::UnterminatedSlot)?;
            let name = &after[..end];
            user.push(match name {
                "context" => Segment::Context,
                "fq" => Segment::Fq,
                "rubric" => Segment::Rubric,
                other => {
                    return Err(TemplateError::UnknownSlot {
                        name: other.to_owned(),
                    })
                }
            });
            remaining = &after[end + 2..];
        }
        if !remaining.is_empty() {
            user.push(Segment::Literal(remaining.to_owned()));
        }

        Ok(PromptTemplate {
            system: system.trim_end_matches('\n').to_owned(),
            user,
        })
    }

    /// The embedded `judge_v1` template.
    pub fn judge_v1() -> &'static PromptTemplate {
        static TEMPLATE: LazyLock<PromptTemplate> = LazyLock::new(|| {
            PromptTemplate::parse(assets::JUDGE_PROMPT_TEMPLATE)
                .expect("embedded judge_v1 template is valid")
        });
        &TEMPLATE
    }

    fn fill(&self, context_block: &str, fq: &str, rubric_block: &str) -> (String, String) {
        let mut user_text = String::new();
        for segment in &self.user {
            match segment {
                Segment::Literal(text) => user_text.push_str(text),
                Segment::Context => user_text.push_str(context_block),
                Segment::Fq => user_text.push_str(fq),
                Segment::Rubric => user_text.push_str(rubric_block),
            }
        }
        (self.system.clone(), user_text)
    }
}

/// Render the context block: one `label: value` line per present field.
///
/// `fa` / `final_answer` are deliberately omitted — they postdate the
/// follow-up question, and in the validity test they belong to the original
/// question, not the variant under evaluation.
fn render_context_block(script: &DialogueScript) -> String {
    let mut block = String::new();
    for (label, value) in script.context.fields() {
        if !block.is_empty() {
            block.push('\n');
        }
        let _ = write!(block, "{label}: {value}");
    }
    block
}

/// Render the instantiated rubric: each criterion as a titled, numbered
/// five-level list.
fn render_rubric_block(rubric: &InstantiatedRubric) -> String {
    let mut block = String::new();
    for criterion in rubric.criteria() {
        if !block.is_empty() {
            block.push_str("\n\n");
        }
        let _ = write!(
            block,
            "#### {} ({})",
            criterion.id.display_name(),
            criterion.dimension
        );
        for (i, level) in criterion.levels.iter().enumerate() {
            let _ = write!(block, "\n{}. {}", i + 1, level);
        }
    }
    block
}

/// Assemble the judge prompt for one script under one instantiated rubric.
///
/// Deterministic: byte-identical output for identical inputs.
pub fn assemble_prompt(script: &DialogueScript, rubric: &InstantiatedRubric) -> JudgePrompt {
    let context_block = render_context_block(script);
    let rubric_block = render_rubric_block(rubric);
    let (system_text, user_text) =
        PromptTemplate::judge_v1().fill(&context_block, &script.fq, &rubric_block);
    JudgePrompt {
        system_text,
        user_text,
        expected_schema_id: EXPECTED_SCHEMA_ID.to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rubric::{instantiate, load_rubric, ContextVariables, CriterionId};

    fn figure1_script() -> DialogueScript {
        DialogueScript {
            script_id: "FQ0".to_owned(),
            context: ScriptContext {
                main_intent: Some("address_change".to_owned()),
                user_request: Some(
                    "I moved from a county to a city. Do I need to re-register my car?".to_owned(),
                ),
                ..ScriptContext::default()
            },
            fq: "Yes, sir. Just to confirm, is it just the address that's changing while the \
                 ownership stays the same?"
                .to_owned(),
            fa: Some("Yes, that's correct".to_owned()),
            final_answer: Some(
                "Yes, sir, in that case, you only need to report your change of residence."
                    .to_owned(),
            ),
            source: ScriptSource::Fixture,
        }
    }

    fn instantiated() -> InstantiatedRubric {
        let rubric = load_rubric(crate::assets::DEFAULT_RUBRIC_JSON).unwrap();
        let ctx = ContextVariables::new(
            "scene member",
            "resolving uncertainty by acquiring useful information",
        )
        .unwrap();
        instantiate(&rubric, &ctx)
    }

    #[test]
    fn prompt_contains_context_fq_and_all_criteria() {
        let prompt = assemble_prompt(&figure1_script(), &instantiated());
        assert!(prompt
            .system_text
            .starts_with("You are an AI assistant tasked with evaluating"));
        assert!(prompt.user_text.contains("I moved from a county to a city"));
        assert!(prompt.user_text.contains("is it just the address"));
        for id in CriterionId::ALL {
            assert!(
                prompt.user_text.contains(id.display_name()),
                "missing {id}"
            );
        }
        assert_eq!(prompt.expected_schema_id, EXPECTED_SCHEMA_ID);
    }

    #[test]
    fn prompt_is_deterministic() {
        let a = assemble_prompt(&figure1_script(), &instantiated());
        let b = assemble_prompt(&figure1_script(), &instantiated());
        assert_eq!(a, b);
    }

    #[test]
    fn every_level_description_appears_exactly_once() {
        let rubric = instantiated();
        let prompt = assemble_prompt(&figure1_script(), &rubric);
        for criterion in rubric.criteria() {
            for level in &criterion.levels {
                let count = prompt.user_text.matches(level.as_str()).count();
                assert_eq!(count, 1, "level {level:?} appears {count} times");
            }
        }
    }

    #[test]
    fn prompt_has_no_unresolved_placeholders() {
        let prompt = assemble_prompt(&figure1_script(), &instantiated());
        assert!(!prompt.user_text.contains("${"));
        assert!(!prompt.system_text.contains("${"));
    }

    #[test]
    fn absent_context_fields_are_omitted() {
        let script = DialogueScript {
            script_id: "sq-c-01".to_owned(),
            context: ScriptContext {
                headline: Some("City council votes on housing".to_owned()),
                ..ScriptContext::default()
            },
            fq: "Should residents get priority?".to_owned(),
            fa: None,
            final_answer: None,
            source: ScriptSource::Square,
        };
        let prompt = assemble_prompt(&script, &instantiated());
        assert!(prompt.user_text.contains("headline: City council votes on housing"));
        assert!(!prompt.user_text.contains("main_intent"));
        assert!(!prompt.user_text.contains("null"));
    }

    #[test]
    fn fa_and_final_answer_are_not_rendered() {
        let prompt = assemble_prompt(&figure1_script(), &instantiated());
        assert!(!prompt.user_text.contains("Yes, that's correct"));
        assert!(!prompt
            .user_text
            .contains("report your change of residence"));
    }

    #[test]
    fn slot_values_are_inserted_literally() {
        let mut script = figure1_script();
        script.fq = "Does {{rubric}} or ${goal} confuse the template?".to_owned();
        let prompt = assemble_prompt(&script, &instantiated());
        // The braces survive as literal text rather than being re-expanded.
        assert!(prompt
            .user_text
            .contains("Does {{rubric}} or ${goal} confuse the template?"));
    }

    #[test]
    fn script_validation_rejects_empty_fq_and_missing_context() {
        let mut script = figure1_script();
        script.fq = "  ".to_owned();
        assert!(matches!(
            script.validate(),
            Err(ScriptError::EmptyFq { .. })
        ));

        let mut script = figure1_script();
        script.context = ScriptContext::default();
        assert!(matches!(
            script.validate(),
            Err(ScriptError::NoContext { .. })
        ));
    }

    #[test]
    fn template_parse_rejects_unknown_slot_and_missing_markers() {
        let err =
            PromptTemplate::parse("<<<SYSTEM>>>\nhi\n<<<USER>>>\n{{mystery}}\n").unwrap_err();
        assert_eq!(err, TemplateError::UnknownSlot { name: "mystery".to_owned() });

        let err = PromptTemplate::parse("no markers at all").unwrap_err();
        assert!(matches!(err, TemplateError::MissingMarker { .. }));

        let err = PromptTemplate::parse("<<<SYSTEM>>>\nhi\n<<<USER>>>\n{{context").unwrap_err();
        assert_eq!(err, TemplateError::UnterminatedSlot);
    }

    #[test]
    fn slot_values_with_unterminated_braces_do_not_break_assembly() {
        let mut script = figure1_script();
        script.fq = "what about {{ unbalanced".to_owned();
        let prompt = assemble_prompt(&script, &instantiated());
        assert!(prompt.user_text.contains("what about {{ unbalanced"));
    }
}
