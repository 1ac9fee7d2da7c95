//! Golden-file tests freezing two fully rendered artifacts: a judge prompt
//! and a radar SVG. Any byte-level drift in prompt assembly or chart
//! rendering fails here first.
//!
//! To re-bless after an intentional change:
//! `QQEVAL_BLESS=1 cargo test -p qqeval-core --test golden`

use std::path::PathBuf;

use qqeval_core::analysis::report::render_radar_svg;
use qqeval_core::analysis::radar_data;
use qqeval_core::assets;
use qqeval_core::judge::{JudgeProvenance, ScoreCard};
use qqeval_core::prompting::{assemble_prompt, DialogueScript, ScriptContext, ScriptSource};
use qqeval_core::rubric::{instantiate, load_rubric, ContextVariables, PerCriterion};

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("QQEVAL_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|err| panic!("missing golden file {}: {err}", path.display()));
    assert_eq!(
        actual,
        expected,
        "{name} drifted from its golden copy; if intentional, re-bless with QQEVAL_BLESS=1"
    );
}

#[test]
fn judge_prompt_for_a_headline_script_is_frozen() {
    let script = DialogueScript {
        script_id: "golden-headline".into(),
        context: ScriptContext {
            main_intent: None,
            user_request: None,
            scene_description: None,
            headline: Some(
                "City council votes to expand the riverfront bike network".into(),
            ),
        },
        fq: "Do you think the expansion will actually reduce downtown traffic?".into(),
        fa: None,
        final_answer: None,
        source: ScriptSource::Square,
    };
    let rubric = load_rubric(assets::DEFAULT_RUBRIC_JSON).unwrap();
    let ctx = ContextVariables::new("Large Language Model", "harmless and helpful conversation")
        .unwrap();
    let prompt = assemble_prompt(&script, &instantiate(&rubric, &ctx));

    let rendered = format!("{}\n=====\n{}", prompt.system_text, prompt.user_text);
    check_golden("prompt_headline_only.txt", &rendered);
}

#[test]
fn radar_svg_for_three_cards_is_frozen() {
    let provenance = JudgeProvenance {
        model_name: "stub".into(),
        prompt_version: "judge_v1".into(),
        rubric_version: "table2-v1".into(),
        context: ContextVariables::new("client", "resolving uncertainty").unwrap(),
        timestamp: "2024-01-01T00:00:00.000Z".into(),
        warning: None,
    };
    let card = |id: &str, scores: [u8; 6]| ScoreCard {
        script_id: id.into(),
        scores: PerCriterion::from_fn(|c| scores[c as usize]),
        rationales: PerCriterion::from_fn(|_| "golden".into()),
        judge_provenance: provenance.clone(),
    };
    let cards = vec![
        card("g-1", [5, 4, 5, 4, 3, 2]),
        card("g-2", [3, 4, 5, 4, 2, 2]),
        card("g-3", [4, 5, 5, 5, 5, 5]),
    ];
    let radar = radar_data(&cards, "golden").unwrap();
    check_golden("radar_3card.svg", &render_radar_svg(&radar));
}
