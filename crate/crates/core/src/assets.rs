//! Assets compiled into the library so the binary works without access to
//! the repository checkout.

/// Version identifier for the embedded judge prompt template.
pub const PROMPT_VERSION: &str = "judge_v1";

/// The default rubric document (`rubrics/default_table2.json`).
pub const DEFAULT_RUBRIC_JSON: &str = include_str!("../../../rubrics/default_table2.json");

/// The judge prompt template (`prompts/judge_v1.txt`).
pub const JUDGE_PROMPT_TEMPLATE: &str = include_str!("../../../prompts/judge_v1.txt");

/// The validity-test fixture (`fixtures/validity_fixture.json`).
pub const VALIDITY_FIXTURE_JSON: &str = include_str!("../../../fixtures/validity_fixture.json");

/// Stub rules reproducing the validity test's expected qualitative pattern
/// (`fixtures/stub_rules_figure2.json`).
pub const STUB_RULES_VALIDITY_JSON: &str =
    include_str!("../../../fixtures/stub_rules_figure2.json");

/// Catch-all stub rules used when `--judge stub` is selected without an
/// explicit rules file (`fixtures/stub_rules_default.json`).
pub const STUB_RULES_DEFAULT_JSON: &str = include_str!("../../../fixtures/stub_rules_default.json");
