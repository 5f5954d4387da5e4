//! Prompt construction: five labeled content sections (objective,
//! instruction, user role, context, query), optional few-shot examples, a
//! whitespace-proxy token estimate, and claims-only budget truncation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PatentRecord;
use crate::extraction::ExtractionField;

/// The five prompt content sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Objective,
    Instruction,
    User,
    Context,
    Query,
}

impl Section {
    pub const ALL: [Section; 5] = [
        Section::Objective,
        Section::Instruction,
        Section::User,
        Section::Context,
        Section::Query,
    ];

    /// Uppercase label line rendered before the section body.
    pub fn label(self) -> &'static str {
        match self {
            Self::Objective => "OBJECTIVE",
            Self::Instruction => "INSTRUCTION",
            Self::User => "USER",
            Self::Context => "CONTEXT",
            Self::Query => "QUERY",
        }
    }
}

/// One worked input/output demonstration for few-shot prompting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotExample {
    pub example_input: String,
    pub example_output: String,
}

/// The structured content of one prompt; [`render`] turns it into text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub objective: String,
    pub instruction: String,
    pub user_role: String,
    /// Background block; for extraction prompts this holds the labeled
    /// Title/Abstract/Claims blocks.
    pub context: String,
    pub query: String,
    /// Rendered immediately before the query section when non-empty.
    pub examples: Vec<ShotExample>,
    pub section_order: Vec<Section>,
}

impl PromptSpec {
    /// Checks the spec invariants: required sections non-empty and
    /// `section_order` a permutation of all five sections.
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("objective", &self.objective),
            ("instruction", &self.instruction),
            ("user_role", &self.user_role),
            ("query", &self.query),
        ] {
            if value.trim().is_empty() {
                return Err(format!("{name} section is empty"));
            }
        }
        if self.section_order.len() != 5
            || Section::ALL.iter().any(|s| !self.section_order.contains(s))
        {
            return Err("section_order must be a permutation of the five sections".into());
        }
        for example in &self.examples {
            if example.example_input.trim().is_empty() || example.example_output.trim().is_empty()
            {
                return Err("few-shot examples must have non-empty input and output".into());
            }
        }
        Ok(())
    }
}

/// A prompt rendered to text, with its token estimate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub token_estimate: usize,
    /// True iff budget enforcement removed any content.
    pub truncated: bool,
    /// True iff the objective and instruction declare different model roles.
    pub role_contradiction: bool,
}

/// One extraction question bound to its schema field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    #[serde(rename = "field_id")]
    pub field: ExtractionField,
    #[serde(rename = "question_text")]
    pub text: String,
}

/// Ordered, validated set of extraction questions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionSet {
    questions: Vec<Question>,
}

#[derive(Debug, Error)]
pub enum QuestionSetError {
    #[error("question file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("question file contains no questions")]
    Empty,
    #[error("duplicate question for field {0}")]
    DuplicateField(ExtractionField),
    #[error("question {index} has empty question_text")]
    EmptyQuestion { index: usize },
}

impl QuestionSet {
    /// The bundled default: one question per schema field, canonical order.
    pub fn default_set() -> Self {
        Self::from_json(include_str!("../data/questions.json"))
            .expect("bundled question file is valid")
    }

    /// Parses and validates a question file: JSON array of
    /// `{field_id, question_text}`. Questions are kept in canonical schema
    /// order regardless of file order.
    pub fn from_json(json: &str) -> Result<Self, QuestionSetError> {
        let mut questions: Vec<Question> = serde_json::from_str(json)?;
        if questions.is_empty() {
            return Err(QuestionSetError::Empty);
        }
        for (index, q) in questions.iter().enumerate() {
            if q.text.trim().is_empty() {
                return Err(QuestionSetError::EmptyQuestion { index });
            }
        }
        questions.sort_by_key(|q| q.field.index());
        for pair in questions.windows(2) {
            if pair[0].field == pair[1].field {
                return Err(QuestionSetError::DuplicateField(pair[0].field));
            }
        }
        Ok(Self { questions })
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

pub const DEFAULT_OBJECTIVE: &str =
    "Extract the key innovation details from the patent document supplied in the context.";
pub const DEFAULT_INSTRUCTION: &str = "Answer each question in the query as a numbered list, \
     keeping the question numbers. Start every answer with the question's label followed by a \
     colon. Use only the patent text provided in the context.";
pub const DEFAULT_USER_ROLE: &str =
    "You are a patent analyst supporting an automotive research and development team.";

/// Marker line appended to a truncated claims block.
pub const CLAIMS_TRUNCATION_MARKER: &str = "[CLAIMS TRUNCATED]";

const CLAIMS_BLOCK_LABEL: &str = "Claims:\n";

/// Builds the zero-shot extraction prompt spec for one patent: labeled
/// Title/Abstract/Claims context and a numbered question list.
pub fn build_extraction_spec(record: &PatentRecord, questions: &QuestionSet) -> PromptSpec {
    let context = format!(
        "Title: {}\nAbstract: {}\n{}{}",
        record.title, record.abstract_text, CLAIMS_BLOCK_LABEL, record.claims
    );
    let query = questions
        .questions()
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{}. {}: {}", i + 1, q.field.label(), q.text))
        .collect::<Vec<_>>()
        .join("\n");
    PromptSpec {
        objective: DEFAULT_OBJECTIVE.to_string(),
        instruction: DEFAULT_INSTRUCTION.to_string(),
        user_role: DEFAULT_USER_ROLE.to_string(),
        context,
        query,
        examples: Vec::new(),
        section_order: Section::ALL.to_vec(),
    }
}

/// Renders a spec to text: each section exactly once, preceded by its
/// uppercase label line, in `section_order`; examples (when present) render
/// immediately before the query. Pure and deterministic.
pub fn render(spec: &PromptSpec) -> RenderedPrompt {
    let mut blocks: Vec<String> = Vec::new();
    for section in &spec.section_order {
        if *section == Section::Query && !spec.examples.is_empty() {
            let shots = spec
                .examples
                .iter()
                .enumerate()
                .map(|(i, ex)| {
                    format!(
                        "Example {n} input:\n{}\nExample {n} output:\n{}",
                        ex.example_input,
                        ex.example_output,
                        n = i + 1
                    )
                })
                .collect::<Vec<_>>()
                .join("\n\n");
            blocks.push(format!("EXAMPLES:\n{shots}"));
        }
        let body = match section {
            Section::Objective => &spec.objective,
            Section::Instruction => &spec.instruction,
            Section::User => &spec.user_role,
            Section::Context => &spec.context,
            Section::Query => &spec.query,
        };
        blocks.push(format!("{}:\n{}", section.label(), body));
    }
    let text = blocks.join("\n\n") + "\n";

    let role_contradiction = detect_role_contradiction(&spec.objective, &spec.instruction);
    if role_contradiction {
        log::warn!("prompt objective and instruction declare different model roles");
    }
    RenderedPrompt {
        token_estimate: estimate_tokens(&text),
        text,
        truncated: false,
        role_contradiction,
    }
}

/// True when the objective and the instruction both contain a "you are ..."
/// role declaration and the declared roles differ.
fn detect_role_contradiction(objective: &str, instruction: &str) -> bool {
    match (role_claim(objective), role_claim(instruction)) {
        (Some(a), Some(b)) => a != b,
        _ => false,
    }
}

fn role_claim(text: &str) -> Option<String> {
    let lower = text.to_lowercase();
    let pos = lower.find("you are ")?;
    let tail = &lower[pos + "you are ".len()..];
    let end = tail.find(['.', '\n', ';']).unwrap_or(tail.len());
    let mut claim = tail[..end].trim();
    for article in ["a ", "an ", "the "] {
        if let Some(rest) = claim.strip_prefix(article) {
            claim = rest.trim_start();
            break;
        }
    }
    (!claim.is_empty()).then(|| claim.to_string())
}

/// Whitespace-token proxy count: maximal whitespace-delimited runs times 4/3,
/// rounded up. A documented stand-in for a model tokenizer, not one itself.
pub fn estimate_tokens(text: &str) -> usize {
    let words = text.split_whitespace().count();
    (words * 4).div_ceil(3)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BudgetError {
    #[error(
        "token budget {budget} cannot fit the prompt even with the claims block reduced to the \
         truncation marker (minimum {minimum})"
    )]
    BudgetTooSmall { budget: usize, minimum: usize },
}

/// Enforces a token budget: an under-budget prompt is returned unchanged;
/// otherwise only the claims block inside the context section is truncated
/// tail-first at whitespace-token granularity and terminated with
/// [`CLAIMS_TRUNCATION_MARKER`]. All other sections are byte-identical.
///
/// `prompt` must be the output of [`render`] on `spec`.
pub fn enforce_budget(
    prompt: &RenderedPrompt,
    spec: &PromptSpec,
    budget: usize,
) -> Result<RenderedPrompt, BudgetError> {
    if prompt.token_estimate <= budget {
        return Ok(prompt.clone());
    }

    // Largest word count whose 4/3 estimate still fits the budget.
    let max_words = budget * 3 / 4;

    let (prefix, claims) = match split_claims_block(&spec.context) {
        Some(parts) => parts,
        None => {
            // No claims block to sacrifice; the prompt cannot be reduced.
            return Err(BudgetError::BudgetTooSmall {
                budget,
                minimum: prompt.token_estimate,
            });
        }
    };

    let render_with_claims = |body: &str| {
        let mut reduced = spec.clone();
        reduced.context = format!("{prefix}{body}");
        render(&reduced)
    };

    let floor = render_with_claims(CLAIMS_TRUNCATION_MARKER);
    let floor_words = floor.text.split_whitespace().count();
    if floor_words > max_words {
        return Err(BudgetError::BudgetTooSmall {
            budget,
            minimum: estimate_tokens(&floor.text),
        });
    }

    let tokens: Vec<&str> = claims.split_whitespace().collect();
    let keep = (max_words - floor_words).min(tokens.len());
    let body = if keep == 0 {
        CLAIMS_TRUNCATION_MARKER.to_string()
    } else {
        format!("{}\n{}", tokens[..keep].join(" "), CLAIMS_TRUNCATION_MARKER)
    };
    let rendered = render_with_claims(&body);
    debug_assert!(rendered.token_estimate <= budget);
    Ok(RenderedPrompt {
        truncated: true,
        ..rendered
    })
}

/// Splits a context into (everything through the claims label, claims body).
fn split_claims_block(context: &str) -> Option<(&str, &str)> {
    if let Some(rest) = context.strip_prefix(CLAIMS_BLOCK_LABEL) {
        return Some((&context[..CLAIMS_BLOCK_LABEL.len()], rest));
    }
    let needle = format!("\n{CLAIMS_BLOCK_LABEL}");
    let pos = context.find(&needle)?;
    let split = pos + needle.len();
    Some((&context[..split], &context[split..]))
}
