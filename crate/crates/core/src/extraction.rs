//! The 12-field extraction schema and the parser that turns an untrusted
//! model reply into a validated [`ExtractionRecord`].
//!
//! The reply grammar is a numbered list ("1." or "1)") with optional markdown
//! decoration and an optional field label before a colon; replies without
//! numbers fall back to label matching. Missing fields degrade to warnings so
//! batch runs tolerate imperfect replies.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

use crate::textmatch::contains_word_bounded;

/// The twelve extraction categories, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionField {
    SystemClassification,
    SystemInAutomotive,
    MainFunction,
    ComponentsInvolved,
    FeaturesOfComponents,
    InputForSystem,
    OutputOfSystem,
    ProblemAndSolution,
    AdvantageOfSolution,
    TrizApproach,
    TrimmingOfComponent,
    AiSolution,
}

impl ExtractionField {
    pub const ALL: [ExtractionField; 12] = [
        ExtractionField::SystemClassification,
        ExtractionField::SystemInAutomotive,
        ExtractionField::MainFunction,
        ExtractionField::ComponentsInvolved,
        ExtractionField::FeaturesOfComponents,
        ExtractionField::InputForSystem,
        ExtractionField::OutputOfSystem,
        ExtractionField::ProblemAndSolution,
        ExtractionField::AdvantageOfSolution,
        ExtractionField::TrizApproach,
        ExtractionField::TrimmingOfComponent,
        ExtractionField::AiSolution,
    ];

    /// 1-based position in the canonical numbered list.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|f| *f == self).unwrap() + 1
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (1..=12).contains(&index).then(|| Self::ALL[index - 1])
    }

    /// Snake-case identifier used in files and configuration.
    pub fn id(self) -> &'static str {
        match self {
            Self::SystemClassification => "system_classification",
            Self::SystemInAutomotive => "system_in_automotive",
            Self::MainFunction => "main_function",
            Self::ComponentsInvolved => "components_involved",
            Self::FeaturesOfComponents => "features_of_components",
            Self::InputForSystem => "input_for_system",
            Self::OutputOfSystem => "output_of_system",
            Self::ProblemAndSolution => "problem_and_solution",
            Self::AdvantageOfSolution => "advantage_of_solution",
            Self::TrizApproach => "triz_approach",
            Self::TrimmingOfComponent => "trimming_of_component",
            Self::AiSolution => "ai_solution",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.id() == id)
    }

    /// Human-readable label, as printed in replies and reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::SystemClassification => "System Classification",
            Self::SystemInAutomotive => "System in Automotive",
            Self::MainFunction => "Main Function",
            Self::ComponentsInvolved => "Components Involved",
            Self::FeaturesOfComponents => "Features of Components",
            Self::InputForSystem => "Input for System",
            Self::OutputOfSystem => "Output of System",
            Self::ProblemAndSolution => "Problem & Solution",
            Self::AdvantageOfSolution => "Advantage of Solution",
            Self::TrizApproach => "TRIZ Approach",
            Self::TrimmingOfComponent => "Trimming of Component",
            Self::AiSolution => "AI Solution",
        }
    }
}

impl fmt::Display for ExtractionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Top-level system classification labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopLevelClass {
    Mechanical,
    Electrical,
    Thermal,
    Chemical,
    Software,
    Material,
    Other,
}

impl TopLevelClass {
    /// Labels matched against classification text; `Other` is the fallback.
    pub const MATCHABLE: [TopLevelClass; 6] = [
        TopLevelClass::Mechanical,
        TopLevelClass::Electrical,
        TopLevelClass::Thermal,
        TopLevelClass::Chemical,
        TopLevelClass::Software,
        TopLevelClass::Material,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::Mechanical => "mechanical",
            Self::Electrical => "electrical",
            Self::Thermal => "thermal",
            Self::Chemical => "chemical",
            Self::Software => "software",
            Self::Material => "material",
            Self::Other => "other",
        }
    }
}

impl fmt::Display for TopLevelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Prefix used for the per-missing-field warnings on a record.
pub const MISSING_WARNING_PREFIX: &str = "missing field: ";

/// The structured result for one patent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub patent_number: String,
    pub fields: BTreeMap<ExtractionField, String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Hash of the prompt that produced this record.
    pub source_hash: String,
}

impl ExtractionRecord {
    /// Builds a record from raw field values, trimming them, dropping empty
    /// ones, and appending one warning per absent field.
    pub fn new(
        patent_number: impl Into<String>,
        source_hash: impl Into<String>,
        raw_fields: BTreeMap<ExtractionField, String>,
        mut warnings: Vec<String>,
    ) -> Self {
        let mut fields = BTreeMap::new();
        for (field, value) in raw_fields {
            let value = value.trim();
            if value.is_empty() {
                continue;
            }
            if field == ExtractionField::ComponentsInvolved && split_component_list(value).is_empty()
            {
                continue;
            }
            fields.insert(field, value.to_string());
        }
        for field in ExtractionField::ALL {
            if !fields.contains_key(&field) {
                warnings.push(format!("{MISSING_WARNING_PREFIX}{field}"));
            }
        }
        Self {
            patent_number: patent_number.into(),
            fields,
            warnings,
            source_hash: source_hash.into(),
        }
    }

    pub fn field(&self, field: ExtractionField) -> Option<&str> {
        self.fields.get(&field).map(String::as_str)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("reply contains no numbered items and no recognizable field labels")]
    UnparseableReply,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("field not present on record: {0}")]
    MissingField(ExtractionField),
}

static ITEM_LINE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^[\s*_#>-]*(\d{1,2})\s*[.)]\s*(.*)$").unwrap());

/// Per-field "Label:" prefix matchers, tolerant of markdown emphasis and of
/// "&" written as "and".
static LABEL_PREFIX: Lazy<Vec<(ExtractionField, Regex)>> = Lazy::new(|| {
    ExtractionField::ALL
        .iter()
        .map(|&field| {
            let words: Vec<String> = field
                .label()
                .split_whitespace()
                .map(|w| {
                    if w == "&" {
                        "(?:&|and)".to_string()
                    } else {
                        regex::escape(w)
                    }
                })
                .collect();
            let pattern = format!(r"(?i)^[\s*_]*{}[\s*_]*:\s*", words.join(r"\s+"));
            (field, Regex::new(&pattern).unwrap())
        })
        .collect()
});

static LABEL_LINE: Lazy<Vec<(ExtractionField, Regex)>> = Lazy::new(|| {
    ExtractionField::ALL
        .iter()
        .map(|&field| {
            let words: Vec<String> = field
                .label()
                .split_whitespace()
                .map(|w| {
                    if w == "&" {
                        "(?:&|and)".to_string()
                    } else {
                        regex::escape(w)
                    }
                })
                .collect();
            let pattern = format!(r"(?i)^[\s*_#>-]*{}[\s*_]*:\s*(.*)$", words.join(r"\s+"));
            (field, Regex::new(&pattern).unwrap())
        })
        .collect()
});

/// Parses an arbitrary model reply into a record. Never panics on any input:
/// the result is a record or [`ParseError::UnparseableReply`].
pub fn parse_llm_output(
    reply: &str,
    patent_number: &str,
    source_hash: &str,
) -> Result<ExtractionRecord, ParseError> {
    let lines: Vec<&str> = reply.lines().map(|l| l.trim_end_matches('\r')).collect();

    let mut collected: Vec<(Option<ExtractionField>, Vec<String>)> = Vec::new();
    let mut seen: BTreeSet<ExtractionField> = BTreeSet::new();
    let mut warnings: Vec<String> = Vec::new();

    for line in &lines {
        if let Some(caps) = ITEM_LINE.captures(line) {
            if let Some(field) = caps[1].parse().ok().and_then(ExtractionField::from_index) {
                let rest = caps.get(2).map_or("", |m| m.as_str());
                let value = strip_label_prefix(rest, field);
                if seen.insert(field) {
                    collected.push((Some(field), vec![value.to_string()]));
                } else {
                    // Duplicate item number: first occurrence wins, the rest
                    // of this item is discarded.
                    warnings.push(format!(
                        "duplicate item {} ignored (first occurrence kept)",
                        field.index()
                    ));
                    collected.push((None, Vec::new()));
                }
                continue;
            }
        }
        if let Some((_, buf)) = collected.last_mut() {
            buf.push((*line).to_string());
        }
    }

    if seen.is_empty() {
        // No numbered items: fall back to label-prefixed lines.
        collected.clear();
        warnings.clear();
        for line in &lines {
            let mut matched = false;
            for (field, re) in LABEL_LINE.iter() {
                if let Some(caps) = re.captures(line) {
                    let value = caps.get(1).map_or("", |m| m.as_str());
                    if seen.insert(*field) {
                        collected.push((Some(*field), vec![value.to_string()]));
                    } else {
                        warnings.push(format!(
                            "duplicate label {:?} ignored (first occurrence kept)",
                            field.label()
                        ));
                        collected.push((None, Vec::new()));
                    }
                    matched = true;
                    break;
                }
            }
            if !matched {
                if let Some((_, buf)) = collected.last_mut() {
                    buf.push((*line).to_string());
                }
            }
        }
    }

    let mut raw_fields = BTreeMap::new();
    for (field, parts) in collected {
        if let Some(field) = field {
            raw_fields.insert(field, parts.join("\n"));
        }
    }
    let record = ExtractionRecord::new(patent_number, source_hash, raw_fields, warnings);
    if record.fields.is_empty() {
        return Err(ParseError::UnparseableReply);
    }
    Ok(record)
}

fn strip_label_prefix(text: &str, field: ExtractionField) -> &str {
    let re = &LABEL_PREFIX
        .iter()
        .find(|(f, _)| *f == field)
        .expect("all fields have a prefix matcher")
        .1;
    match re.find(text) {
        Some(m) => &text[m.end()..],
        None => text,
    }
}

/// Emits the canonical numbered list for a record; only present fields are
/// rendered, each under its canonical item number.
pub fn render_record(record: &ExtractionRecord) -> String {
    let mut out = String::new();
    for (field, value) in &record.fields {
        out.push_str(&format!("{}. {}: {}\n", field.index(), field.label(), value));
    }
    out
}

/// Returns every top-level label whose name occurs (word-bounded, case
/// insensitive) in the classification text; `{other}` when none match.
pub fn classify_top_level(record: &ExtractionRecord) -> Result<BTreeSet<TopLevelClass>, FieldError> {
    let text = record
        .field(ExtractionField::SystemClassification)
        .ok_or(FieldError::MissingField(ExtractionField::SystemClassification))?;
    let mut classes: BTreeSet<TopLevelClass> = TopLevelClass::MATCHABLE
        .iter()
        .copied()
        .filter(|class| contains_word_bounded(text, class.id()))
        .collect();
    if classes.is_empty() {
        classes.insert(TopLevelClass::Other);
    }
    Ok(classes)
}

/// Splits the components_involved field into individual component names.
pub fn split_components(record: &ExtractionRecord) -> Result<Vec<String>, FieldError> {
    let text = record
        .field(ExtractionField::ComponentsInvolved)
        .ok_or(FieldError::MissingField(ExtractionField::ComponentsInvolved))?;
    Ok(split_component_list(text))
}

/// Splits free text on top-level commas and the conjunction "and", ignoring
/// separators inside parentheses; a leading narrative preamble ending in
/// "are"/"is"/"include(s)" is dropped, leading articles and trailing
/// '.'/';' are trimmed from each item.
pub fn split_component_list(text: &str) -> Vec<String> {
    let mut segments: Vec<&str> = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                segments.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    segments.push(&text[start..]);

    let mut items = Vec::new();
    for (i, segment) in segments.iter().enumerate() {
        let segment = if i == 0 {
            strip_preamble(segment)
        } else {
            segment
        };
        for part in split_top_level_and(segment) {
            if let Some(item) = clean_item(part) {
                items.push(item);
            }
        }
    }
    items
}

/// Drops everything through the first word-bounded list-introducing verb.
fn strip_preamble(segment: &str) -> &str {
    let lower = segment.to_lowercase();
    let mut cut: Option<usize> = None;
    for verb in ["are", "is", "include", "includes"] {
        let mut from = 0;
        while let Some(pos) = lower[from..].find(verb) {
            let begin = from + pos;
            let end = begin + verb.len();
            let left_ok = begin == 0
                || !lower[..begin]
                    .chars()
                    .next_back()
                    .is_some_and(char::is_alphanumeric);
            let right_ok = end == lower.len()
                || !lower[end..].chars().next().is_some_and(char::is_alphanumeric);
            if left_ok && right_ok {
                cut = Some(cut.map_or(end, |c: usize| c.min(end)));
                break;
            }
            from = begin + 1;
        }
    }
    match cut {
        Some(end) => &segment[end..],
        None => segment,
    }
}

fn split_top_level_and(segment: &str) -> Vec<&str> {
    let lower = segment.to_lowercase();
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let bytes = lower.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b'a' if depth == 0 && lower[i..].starts_with("and") => {
                let end = i + 3;
                let left_ok = i == 0
                    || !lower[..i]
                        .chars()
                        .next_back()
                        .is_some_and(char::is_alphanumeric);
                let right_ok = end == lower.len()
                    || !lower[end..].chars().next().is_some_and(char::is_alphanumeric);
                if left_ok && right_ok {
                    parts.push(&segment[start..i]);
                    start = end;
                    i = end;
                    continue;
                }
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(&segment[start..]);
    parts
}

fn clean_item(raw: &str) -> Option<String> {
    let mut s = raw.trim();
    loop {
        let lower = s.to_lowercase();
        let stripped = ["a ", "an ", "the "]
            .iter()
            .find(|article| lower.starts_with(*article))
            .map(|article| s[article.len()..].trim_start());
        match stripped {
            Some(rest) => s = rest,
            None => break,
        }
    }
    let s = s.trim_end_matches(['.', ';']).trim();
    if s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record_with(field: ExtractionField, value: &str) -> ExtractionRecord {
        let mut fields = BTreeMap::new();
        fields.insert(field, value.to_string());
        ExtractionRecord::new("US1", "hash", fields, Vec::new())
    }

    #[test]
    fn numbered_items_map_to_fields() {
        let reply = "1. System Classification: mechanical system\n2. System in Automotive: fuel cell\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        assert_eq!(
            record.field(ExtractionField::SystemClassification),
            Some("mechanical system")
        );
        assert_eq!(
            record.field(ExtractionField::SystemInAutomotive),
            Some("fuel cell")
        );
        assert_eq!(record.fields.len(), 2);
    }

    #[test]
    fn markdown_decoration_is_tolerated() {
        let reply = "**3.** **Main Function:** detect a leak\n- 4) Components Involved: a pump and a valve\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        assert_eq!(record.field(ExtractionField::MainFunction), Some("detect a leak"));
        assert_eq!(
            record.field(ExtractionField::ComponentsInvolved),
            Some("a pump and a valve")
        );
    }

    #[test]
    fn continuation_lines_belong_to_previous_item() {
        let reply = "5. Features of Components: first line\nsecond line\n\n6. Input for System: hydrogen\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        assert_eq!(
            record.field(ExtractionField::FeaturesOfComponents),
            Some("first line\nsecond line")
        );
    }

    #[test]
    fn out_of_order_items_map_by_number() {
        let reply = "10. TRIZ Approach: Feedback\n1. System Classification: electrical\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        assert_eq!(record.field(ExtractionField::TrizApproach), Some("Feedback"));
        assert_eq!(
            record.field(ExtractionField::SystemClassification),
            Some("electrical")
        );
    }

    #[test]
    fn out_of_range_numbers_are_continuations() {
        let reply = "8. Problem & Solution: leaks happen\n13. not a field\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        assert_eq!(
            record.field(ExtractionField::ProblemAndSolution),
            Some("leaks happen\n13. not a field")
        );
    }

    #[test]
    fn label_fallback_without_numbers() {
        let reply = "System Classification: software\n\nTRIZ approach: Segmentation\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        assert_eq!(record.field(ExtractionField::SystemClassification), Some("software"));
        assert_eq!(record.field(ExtractionField::TrizApproach), Some("Segmentation"));
    }

    #[test]
    fn problem_and_solution_label_accepts_and_spelling() {
        let reply = "8. Problem and Solution: stated here\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        assert_eq!(record.field(ExtractionField::ProblemAndSolution), Some("stated here"));
    }

    #[test]
    fn empty_reply_is_unparseable() {
        assert_eq!(
            parse_llm_output("", "US1", "h").unwrap_err(),
            ParseError::UnparseableReply
        );
        assert_eq!(
            parse_llm_output("free-form prose with no labels", "US1", "h").unwrap_err(),
            ParseError::UnparseableReply
        );
    }

    #[test]
    fn missing_fields_are_warned_once_each() {
        let reply = "1. System Classification: mechanical\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        let missing: Vec<&String> = record
            .warnings
            .iter()
            .filter(|w| w.starts_with(MISSING_WARNING_PREFIX))
            .collect();
        assert_eq!(missing.len(), 11);
        assert!(missing.iter().any(|w| w.contains("triz_approach")));
        assert_eq!(record.fields.len() + missing.len(), 12);
    }

    #[test]
    fn duplicate_item_keeps_first() {
        let reply = "2. System in Automotive: first\n2. System in Automotive: second\n";
        let record = parse_llm_output(reply, "US1", "h").unwrap();
        assert_eq!(record.field(ExtractionField::SystemInAutomotive), Some("first"));
        assert!(record.warnings.iter().any(|w| w.contains("duplicate item 2")));
    }

    #[test]
    fn classify_finds_word_bounded_labels() {
        let record = record_with(
            ExtractionField::SystemClassification,
            "a mechanical system and an electrical system",
        );
        let classes = classify_top_level(&record).unwrap();
        assert_eq!(
            classes,
            BTreeSet::from([TopLevelClass::Mechanical, TopLevelClass::Electrical])
        );

        let record = record_with(ExtractionField::SystemClassification, "pure software method");
        assert_eq!(
            classify_top_level(&record).unwrap(),
            BTreeSet::from([TopLevelClass::Software])
        );

        let record = record_with(ExtractionField::SystemClassification, "quantum flux modulator");
        assert_eq!(
            classify_top_level(&record).unwrap(),
            BTreeSet::from([TopLevelClass::Other])
        );
    }

    #[test]
    fn classify_requires_the_field() {
        let record = record_with(ExtractionField::MainFunction, "anything");
        assert_eq!(
            classify_top_level(&record).unwrap_err(),
            FieldError::MissingField(ExtractionField::SystemClassification)
        );
    }

    #[test]
    fn split_component_list_handles_articles_and_parens() {
        assert_eq!(split_component_list("a sensor"), vec!["sensor"]);
        assert_eq!(split_component_list("a pump, and a valve"), vec!["pump", "valve"]);
        assert_eq!(
            split_component_list("a motor (geared and sealed), the housing"),
            vec!["motor (geared and sealed)", "housing"]
        );
        assert_eq!(split_component_list("a pump and a valve"), vec!["pump", "valve"]);
    }

    #[test]
    fn split_component_list_drops_list_preamble() {
        let text = "The components involved in this work are a fuel cell stack (including a cathode and an anode), a discharge resistor, a hydrogen supply source, a system controller, and a sensor.";
        assert_eq!(
            split_component_list(text),
            vec![
                "fuel cell stack (including a cathode and an anode)",
                "discharge resistor",
                "hydrogen supply source",
                "system controller",
                "sensor",
            ]
        );
    }

    #[test]
    fn render_round_trips_single_field() {
        let record = record_with(ExtractionField::MainFunction, "detect a hydrogen leak");
        let text = render_record(&record);
        assert_eq!(text, "3. Main Function: detect a hydrogen leak\n");
        let reparsed = parse_llm_output(&text, "US1", "hash").unwrap();
        assert_eq!(reparsed.fields, record.fields);
    }

    #[test]
    fn record_json_uses_snake_case_keys_in_canonical_order() {
        let mut fields = BTreeMap::new();
        fields.insert(ExtractionField::TrizApproach, "Feedback".to_string());
        fields.insert(ExtractionField::SystemClassification, "mechanical".to_string());
        let record = ExtractionRecord::new("US1", "h", fields, Vec::new());
        let json = serde_json::to_string(&record).unwrap();
        let class_pos = json.find("system_classification").unwrap();
        let triz_pos = json.find("triz_approach").unwrap();
        assert!(class_pos < triz_pos);
        assert!(json.contains("\"warnings\""));
        let back: ExtractionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, record);
    }
}
