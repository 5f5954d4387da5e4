//! Core library for `patland`, a patent landscaping pipeline.
//!
//! The pipeline turns a delimited export of patent records into a structured
//! innovation landscape: it ingests and validates the corpus, builds labeled
//! extraction prompts, submits them to a chat-completion endpoint (with retry,
//! caching, and an offline mock backend), parses the replies into a fixed
//! 12-field schema, normalizes the TRIZ principle, and aggregates everything
//! into landscape reports.
//!
//! Modules follow the pipeline stages:
//!
//! - [`corpus`]: CSV/JSONL ingestion, validation, deduplication.
//! - [`prompt`]: labeled prompt sections, zero-/few-shot assembly, token budget.
//! - [`client`]: chat-completion client with retry/backoff, cache, mock backend.
//! - [`extraction`]: the 12-field schema and the reply parser.
//! - [`triz`]: the 40 inventive principles catalog and fuzzy name matching.
//! - [`landscape`]: ecosystem-area assignment, aggregation, report emission.

pub mod client;
pub mod corpus;
pub mod extraction;
pub mod landscape;
pub mod prompt;
mod textmatch;
pub mod triz;

pub use client::{batch_complete, complete, hash_prompt, CacheStore, CompletionResult, ModelConfig};
pub use corpus::{parse_corpus, write_corpus, CorpusFormat, CorpusLoadReport, PatentRecord};
pub use extraction::{
    classify_top_level, parse_llm_output, render_record, split_components, ExtractionField,
    ExtractionRecord, TopLevelClass,
};
pub use landscape::{aggregate, assign_areas, EcosystemArea, LandscapeReport};
pub use prompt::{
    build_extraction_spec, enforce_budget, estimate_tokens, render, PromptSpec, QuestionSet,
    RenderedPrompt, ShotExample,
};
pub use triz::{load_catalog, match_principle, match_principle_in_text, TrizCatalog, TrizMatch};
