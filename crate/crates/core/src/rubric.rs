//! Rubric data model, validation, and context-variable instantiation.
//!
//! A rubric is six criteria, each with exactly five ordered level
//! descriptions (index `i` describes score `i + 1`). Level text may contain
//! the placeholders `${answerer}` and `${goal}`, which are substituted by
//! [`instantiate`] before the rubric is embedded in a judge prompt.
//! Placeholder syntax is exact: `${name}` with no whitespace tolerance, and
//! any name outside the known set is a hard validation error.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Index;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The two top-level quality dimensions a criterion can belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Appropriateness,
    Effectiveness,
}

impl Dimension {
    /// Lowercase identifier used in rubric documents.
    pub fn key(self) -> &'static str {
        match self {
            Dimension::Appropriateness => "appropriateness",
            Dimension::Effectiveness => "effectiveness",
        }
    }

    fn from_key(key: &str) -> Option<Self> {
        match key {
            "appropriateness" => Some(Dimension::Appropriateness),
            "effectiveness" => Some(Dimension::Effectiveness),
            _ => None,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Appropriateness => "Appropriateness",
            Dimension::Effectiveness => "Effectiveness",
        })
    }
}

/// The six evaluation criteria, in canonical order.
///
/// The discriminant doubles as the index into [`PerCriterion`], so the
/// declaration order here is the one canonical order used everywhere:
/// appropriateness criteria first, then effectiveness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriterionId {
    Cohesion = 0,
    Answerability = 1,
    Respectfulness = 2,
    Clarity = 3,
    Coherence = 4,
    Informativeness = 5,
}

impl CriterionId {
    /// All six criteria in canonical order.
    pub const ALL: [CriterionId; 6] = [
        CriterionId::Cohesion,
        CriterionId::Answerability,
        CriterionId::Respectfulness,
        CriterionId::Clarity,
        CriterionId::Coherence,
        CriterionId::Informativeness,
    ];

    /// Lowercase identifier used in rubric documents, judge responses, and
    /// stub-rule files.
    pub fn key(self) -> &'static str {
        match self {
            CriterionId::Cohesion => "cohesion",
            CriterionId::Answerability => "answerability",
            CriterionId::Respectfulness => "respectfulness",
            CriterionId::Clarity => "clarity",
            CriterionId::Coherence => "coherence",
            CriterionId::Informativeness => "informativeness",
        }
    }

    /// Capitalised name used in human-facing output (CSV rows, SVG labels).
    pub fn display_name(self) -> &'static str {
        match self {
            CriterionId::Cohesion => "Cohesion",
            CriterionId::Answerability => "Answerability",
            CriterionId::Respectfulness => "Respectfulness",
            CriterionId::Clarity => "Clarity",
            CriterionId::Coherence => "Coherence",
            CriterionId::Informativeness => "Informativeness",
        }
    }

    /// Parse a lowercase identifier.
    pub fn from_key(key: &str) -> Option<Self> {
        CriterionId::ALL.into_iter().find(|id| id.key() == key)
    }

    /// The fixed criterion → dimension mapping.
    pub fn dimension(self) -> Dimension {
        match self {
            CriterionId::Cohesion | CriterionId::Answerability | CriterionId::Respectfulness => {
                Dimension::Appropriateness
            }
            CriterionId::Clarity | CriterionId::Coherence | CriterionId::Informativeness => {
                Dimension::Effectiveness
            }
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// The fixed criterion → dimension mapping, as a free function.
pub fn dimension_of(id: CriterionId) -> Dimension {
    id.dimension()
}

/// A total mapping from [`CriterionId`] to `T`, stored densely in canonical
/// order.
///
/// Serialises as a JSON object keyed by the lowercase criterion identifiers;
/// deserialisation requires all six keys and rejects unknown or duplicate
/// ones, so a value of this type is complete by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PerCriterion<T> {
    values: [T; 6],
}

impl<T> PerCriterion<T> {
    /// Build a mapping by evaluating `f` once per criterion in canonical order.
    pub fn from_fn(mut f: impl FnMut(CriterionId) -> T) -> Self {
        PerCriterion {
            values: CriterionId::ALL.map(&mut f),
        }
    }

    /// Fallible variant of [`PerCriterion::from_fn`].
    pub fn try_from_fn<E>(mut f: impl FnMut(CriterionId) -> Result<T, E>) -> Result<Self, E> {
        let mut collected = Vec::with_capacity(6);
        for id in CriterionId::ALL {
            collected.push(f(id)?);
        }
        let values = collected
            .try_into()
            .unwrap_or_else(|_| unreachable!("exactly six criteria"));
        Ok(PerCriterion { values })
    }

    pub fn get(&self, id: CriterionId) -> &T {
        &self.values[id as usize]
    }

    /// Iterate entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (CriterionId, &T)> {
        CriterionId::ALL.iter().copied().zip(self.values.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(CriterionId, &T) -> U) -> PerCriterion<U> {
        PerCriterion {
            values: CriterionId::ALL.map(|id| f(id, self.get(id))),
        }
    }

    pub fn values(&self) -> &[T; 6] {
        &self.values
    }
}

impl<T> Index<CriterionId> for PerCriterion<T> {
    type Output = T;

    fn index(&self, id: CriterionId) -> &T {
        self.get(id)
    }
}

impl<T: Serialize> Serialize for PerCriterion<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(6))?;
        for (id, value) in self.iter() {
            map.serialize_entry(id.key(), value)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for PerCriterion<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> serde::de::Visitor<'de> for Visitor<T> {
            type Value = PerCriterion<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map with one entry per criterion")
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut access: A,
            ) -> Result<Self::Value, A::Error> {
                let mut slots: [Option<T>; 6] = [None, None, None, None, None, None];
                while let Some(key) = access.next_key::<String>()? {
                    let id = CriterionId::from_key(&key)
                        .ok_or_else(|| A::Error::custom(format!("unknown criterion `{key}`")))?;
                    if slots[id as usize].is_some() {
                        return Err(A::Error::custom(format!("duplicate criterion `{key}`")));
                    }
                    slots[id as usize] = Some(access.next_value()?);
                }
                for id in CriterionId::ALL {
                    if slots[id as usize].is_none() {
                        return Err(A::Error::custom(format!(
                            "missing criterion `{}`",
                            id.key()
                        )));
                    }
                }
                Ok(PerCriterion {
                    values: slots.map(|slot| slot.expect("checked above")),
                })
            }
        }

        deserializer.deserialize_map(Visitor(std::marker::PhantomData))
    }
}

/// The placeholder names the rubric format understands.
pub const KNOWN_PLACEHOLDERS: [&str; 2] = ["answerer", "goal"];

/// One rubric criterion: five ordered level descriptions plus bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Criterion {
    pub id: CriterionId,
    pub dimension: Dimension,
    /// `levels[i]` describes score `i + 1`.
    pub levels: [String; 5],
    /// Placeholder names (without `${}`) occurring in any level description.
    pub placeholders_used: BTreeSet<String>,
}

/// A validated rubric: exactly one criterion per [`CriterionId`], held in
/// canonical order regardless of document order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rubric {
    version: String,
    criteria: [Criterion; 6],
}

impl Rubric {
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Criteria in canonical order.
    pub fn criteria(&self) -> &[Criterion; 6] {
        &self.criteria
    }

    pub fn criterion(&self, id: CriterionId) -> &Criterion {
        &self.criteria[id as usize]
    }
}

/// Values for the `${answerer}` / `${goal}` placeholders.
///
/// Both fields are non-empty and must not themselves contain a `${` token,
/// so instantiation can never introduce new placeholders.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawContextVariables")]
pub struct ContextVariables {
    answerer: String,
    goal: String,
}

#[derive(Deserialize)]
struct RawContextVariables {
    answerer: String,
    goal: String,
}

impl TryFrom<RawContextVariables> for ContextVariables {
    type Error = ContextError;

    fn try_from(raw: RawContextVariables) -> Result<Self, ContextError> {
        ContextVariables::new(raw.answerer, raw.goal)
    }
}

impl ContextVariables {
    pub fn new(
        answerer: impl Into<String>,
        goal: impl Into<String>,
    ) -> Result<Self, ContextError> {
        let answerer = answerer.into();
        let goal = goal.into();
        for (field, value) in [("answerer", &answerer), ("goal", &goal)] {
            if value.trim().is_empty() {
                return Err(ContextError::Empty { field });
            }
            if value.contains("${") {
                return Err(ContextError::UnresolvedPlaceholder { field });
            }
        }
        Ok(ContextVariables { answerer, goal })
    }

    pub fn answerer(&self) -> &str {
        &self.answerer
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }
}

/// A rubric whose placeholders have been substituted with concrete context
/// values; no level description contains `${` anymore.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstantiatedRubric {
    criteria: [Criterion; 6],
    source_version: String,
    context: ContextVariables,
}

impl InstantiatedRubric {
    pub fn criteria(&self) -> &[Criterion; 6] {
        &self.criteria
    }

    pub fn criterion(&self, id: CriterionId) -> &Criterion {
        &self.criteria[id as usize]
    }

    pub fn source_version(&self) -> &str {
        &self.source_version
    }

    pub fn context(&self) -> &ContextVariables {
        &self.context
    }
}

/// Invalid [`ContextVariables`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("context variable `{field}` must be non-empty")]
    Empty { field: &'static str },
    #[error("context variable `{field}` contains an unresolved placeholder token `${{`")]
    UnresolvedPlaceholder { field: &'static str },
}

/// Errors from loading or validating a rubric document.
#[derive(Debug, Error)]
pub enum RubricError {
    #[error("rubric parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown criterion id `{id}`")]
    UnknownCriterionId { id: String },
    #[error("unknown dimension `{dimension}` for criterion {criterion}")]
    UnknownDimension {
        criterion: String,
        dimension: String,
    },
    #[error("{criterion}: expected 5 levels, found {found}")]
    LevelCount { criterion: String, found: usize },
    #[error("{criterion}: level {level} is empty")]
    EmptyLevel { criterion: String, level: usize },
    #[error("{criterion}: unknown placeholder `${{{name}}}` in level {level}")]
    UnknownPlaceholder {
        criterion: String,
        level: usize,
        name: String,
    },
    #[error("{criterion}: unterminated placeholder `${{` in level {level}")]
    UnterminatedPlaceholder { criterion: String, level: usize },
    #[error("{criterion}: declared dimension `{declared}` but the fixed mapping requires `{expected}`")]
    DimensionMismatch {
        criterion: String,
        declared: Dimension,
        expected: Dimension,
    },
    #[error("duplicate criterion `{criterion}`")]
    DuplicateCriterion { criterion: String },
    #[error("missing criterion `{criterion}`")]
    MissingCriterion { criterion: String },
}

#[derive(Deserialize, Serialize)]
struct RubricDoc {
    version: String,
    criteria: Vec<CriterionDoc>,
}

#[derive(Deserialize, Serialize)]
struct CriterionDoc {
    id: String,
    dimension: String,
    levels: Vec<String>,
}

/// Scan `text` for `${name}` placeholders, validating each against the known
/// set. Returns the names found (deduplicated).
fn scan_placeholders(
    text: &str,
    criterion: &str,
    level: usize,
) -> Result<BTreeSet<String>, RubricError> {
    let mut found = BTreeSet::new();
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else {
            return Err(RubricError::UnterminatedPlaceholder {
                criterion: criterion.to_owned(),
                level,
            });
        };
        let name = &after[..end];
        if !KNOWN_PLACEHOLDERS.contains(&name) {
            return Err(RubricError::UnknownPlaceholder {
                criterion: criterion.to_owned(),
                level,
                name: name.to_owned(),
            });
        }
        found.insert(name.to_owned());
        rest = &after[end + 1..];
    }
    Ok(found)
}

/// Parse and validate a rubric document (see the repository's
/// `rubrics/default_table2.json` for the format).
pub fn load_rubric(source: &str) -> Result<Rubric, RubricError> {
    let doc: RubricDoc = serde_json::from_str(source).map_err(|err| RubricError::Parse {
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    })?;

    let mut slots: [Option<Criterion>; 6] = [None, None, None, None, None, None];
    for entry in doc.criteria {
        let id = CriterionId::from_key(&entry.id).ok_or_else(|| {
            RubricError::UnknownCriterionId {
                id: entry.id.clone(),
            }
        })?;
        let name = id.display_name();
        if slots[id as usize].is_some() {
            return Err(RubricError::DuplicateCriterion {
                criterion: name.to_owned(),
            });
        }
        let declared = Dimension::from_key(&entry.dimension).ok_or_else(|| {
            RubricError::UnknownDimension {
                criterion: name.to_owned(),
                dimension: entry.dimension.clone(),
            }
        })?;
        if declared != id.dimension() {
            return Err(RubricError::DimensionMismatch {
                criterion: name.to_owned(),
                declared,
                expected: id.dimension(),
            });
        }
        if entry.levels.len() != 5 {
            return Err(RubricError::LevelCount {
                criterion: name.to_owned(),
                found: entry.levels.len(),
            });
        }
        let mut placeholders_used = BTreeSet::new();
        for (i, level) in entry.levels.iter().enumerate() {
            if level.trim().is_empty() {
                return Err(RubricError::EmptyLevel {
                    criterion: name.to_owned(),
                    level: i + 1,
                });
            }
            placeholders_used.extend(scan_placeholders(level, name, i + 1)?);
        }
        let levels: [String; 5] = entry
            .levels
            .try_into()
            .unwrap_or_else(|_| unreachable!("length checked above"));
        slots[id as usize] = Some(Criterion {
            id,
            dimension: declared,
            levels,
            placeholders_used,
        });
    }

    for id in CriterionId::ALL {
        if slots[id as usize].is_none() {
            return Err(RubricError::MissingCriterion {
                criterion: id.display_name().to_owned(),
            });
        }
    }

    Ok(Rubric {
        version: doc.version,
        criteria: slots.map(|slot| slot.expect("checked above")),
    })
}

impl Serialize for Rubric {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let doc = RubricDoc {
            version: self.version.clone(),
            criteria: self
                .criteria
                .iter()
                .map(|c| CriterionDoc {
                    id: c.id.key().to_owned(),
                    dimension: c.dimension.key().to_owned(),
                    levels: c.levels.to_vec(),
                })
                .collect(),
        };
        doc.serialize(serializer)
    }
}

/// Replace `${answerer}` / `${goal}` in `text` with the context values.
///
/// Assumes `text` has already passed placeholder validation, so every `${`
/// opens a known placeholder.
fn substitute(text: &str, ctx: &ContextVariables) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}').expect("validated placeholder");
        match &after[..end] {
            "answerer" => out.push_str(ctx.answerer()),
            "goal" => out.push_str(ctx.goal()),
            other => unreachable!("validated placeholder `{other}`"),
        }
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    out
}

/// Substitute the context variables into every level description.
///
/// Pure: identical inputs yield identical output, and text outside
/// placeholder sites is byte-identical to the source rubric.
pub fn instantiate(rubric: &Rubric, ctx: &ContextVariables) -> InstantiatedRubric {
    let criteria = rubric.criteria.clone().map(|criterion| Criterion {
        levels: criterion.levels.map(|level| substitute(&level, ctx)),
        placeholders_used: BTreeSet::new(),
        ..criterion
    });
    InstantiatedRubric {
        criteria,
        source_version: rubric.version.clone(),
        context: ctx.clone(),
    }
}
