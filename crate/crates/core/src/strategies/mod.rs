//! Judging strategies: prompt rendering, gateway invocation, and verdict
//! parsing.
//!
//! Every strategy presents a paper pair in one of two orders, asks a model
//! which paper is more novel, and resolves the answer back to a concrete
//! paper id. Slot labels in prompts and responses ("Paper 1"/"Paper X" for
//! the first slot, "Paper 2"/"Paper Y" for the second) always refer to
//! presentation positions, never to the underlying papers; running both
//! orders and comparing neutralizes position bias.

mod judge;
mod parse;
mod prompts;

pub use judge::{
    judge_llm_discussion, judge_pointwise, judge_rag_novelty, judge_self_consistency,
    judge_single, DiscussionOutcome, DiscussionTurn, JudgeContext, RagOutcome,
    DISCUSSION_REVIEWER_ROLES, SELF_CONSISTENCY_PATHS, SELF_CONSISTENCY_TEMPERATURE,
};
pub use parse::{parse_score, parse_verdict};
pub use prompts::{
    render_discussion_prompt, render_pointwise_prompt, render_prompt, DiscussionStage, Exemplar,
    STRICT_RETRY_TEXT,
};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PairSample, PaperRecord};
use crate::gateway::GatewayError;
use crate::index::IndexError;

/// Errors from prompt rendering and strategy execution.
#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("pair {pair_key}: paper {paper_id} lacks required metadata field '{field_name}'")]
    MissingMetadata {
        pair_key: String,
        paper_id: String,
        field_name: &'static str,
    },
    #[error("two-shot judging requires exemplars")]
    MissingExemplars,
    #[error("template placeholder {{{0}}} has no value")]
    MissingPlaceholder(String),
    #[error("index covers field '{index_field}' but the pair is from '{pair_field}'")]
    IndexFieldMismatch {
        index_field: &'static str,
        pair_field: &'static str,
    },
}

/// The eight judging strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyId {
    ZeroShot,
    TwoShot,
    Cot,
    SelfReflection,
    SelfConsistency,
    Discussion,
    Pointwise,
    RagNovelty,
}

impl StrategyId {
    pub const ALL: [StrategyId; 8] = [
        StrategyId::ZeroShot,
        StrategyId::TwoShot,
        StrategyId::Cot,
        StrategyId::SelfReflection,
        StrategyId::SelfConsistency,
        StrategyId::Discussion,
        StrategyId::Pointwise,
        StrategyId::RagNovelty,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyId::ZeroShot => "zero_shot",
            StrategyId::TwoShot => "two_shot",
            StrategyId::Cot => "cot",
            StrategyId::SelfReflection => "self_reflection",
            StrategyId::SelfConsistency => "self_consistency",
            StrategyId::Discussion => "discussion",
            StrategyId::Pointwise => "pointwise",
            StrategyId::RagNovelty => "rag_novelty",
        }
    }

    pub fn parse(name: &str) -> Option<StrategyId> {
        StrategyId::ALL.iter().copied().find(|s| s.as_str() == name)
    }
}

impl std::fmt::Display for StrategyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which paper goes in the first presentation slot: `AscYear` presents the
/// older paper first, `DescYear` the newer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PresentationOrder {
    AscYear,
    DescYear,
}

impl PresentationOrder {
    pub const BOTH: [PresentationOrder; 2] = [PresentationOrder::AscYear, PresentationOrder::DescYear];

    /// Paper presented in the first slot (labeled "Paper 1" or "Paper X").
    pub fn slot1<'p>(&self, pair: &'p PairSample) -> &'p PaperRecord {
        match self {
            PresentationOrder::AscYear => &pair.paper_y,
            PresentationOrder::DescYear => &pair.paper_x,
        }
    }

    /// Paper presented in the second slot (labeled "Paper 2" or "Paper Y").
    pub fn slot2<'p>(&self, pair: &'p PairSample) -> &'p PaperRecord {
        match self {
            PresentationOrder::AscYear => &pair.paper_x,
            PresentationOrder::DescYear => &pair.paper_y,
        }
    }

    /// Resolves a slot winner to the paper occupying that slot.
    pub fn winning_paper<'p>(&self, pair: &'p PairSample, winner: SlotWinner) -> Option<&'p PaperRecord> {
        match winner {
            SlotWinner::X => Some(self.slot1(pair)),
            SlotWinner::Y => Some(self.slot2(pair)),
            SlotWinner::Unparsed => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PresentationOrder::AscYear => "asc_year",
            PresentationOrder::DescYear => "desc_year",
        }
    }

    pub fn parse(name: &str) -> Option<PresentationOrder> {
        match name {
            "asc_year" => Some(PresentationOrder::AscYear),
            "desc_year" => Some(PresentationOrder::DescYear),
            _ => None,
        }
    }
}

impl std::fmt::Display for PresentationOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The slot a response picked: X is the first presentation slot, Y the
/// second, regardless of whether the prompt labeled them "1"/"2" or "X"/"Y".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotWinner {
    X,
    Y,
    Unparsed,
}

/// A parsed judging outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub winner: SlotWinner,
    /// Id of the paper in the winning slot; `None` iff `winner` is Unparsed.
    pub winner_paper_id: Option<String>,
    /// Slot-1 paper's score, when the strategy produced one (1-10).
    pub score_x: Option<u8>,
    /// Slot-2 paper's score, when the strategy produced one (1-10).
    pub score_y: Option<u8>,
    pub raw_response: String,
    pub provider_calls: u32,
}

/// Decoding parameters attached to a rendered prompt.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

/// A fully rendered prompt: all placeholders substituted.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub params: DecodingParams,
    pub strategy_id: StrategyId,
    pub order: PresentationOrder,
}

/// Which optional metadata lines to include in prompts. An enabled option
/// requires the field to be present on both papers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetadataOptions {
    pub include_tldr: bool,
    pub include_authors: bool,
    pub include_affiliation: bool,
}

impl MetadataOptions {
    pub const NONE: MetadataOptions =
        MetadataOptions { include_tldr: false, include_authors: false, include_affiliation: false };

    pub fn any(&self) -> bool {
        self.include_tldr || self.include_authors || self.include_affiliation
    }
}

/// Retrieval aggregates feeding the retrieval-augmented prompt. The X/Y
/// sides follow the presentation slots; `None` aggregates mean that side's
/// retrieval came back empty (rendered as a sentinel and flagged on the
/// trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagContext {
    pub avg_cosine_x: Option<f64>,
    pub avg_date_x: Option<NaiveDate>,
    pub avg_cosine_y: Option<f64>,
    pub avg_date_y: Option<NaiveDate>,
    pub k_used: usize,
}

impl RagContext {
    /// True when either side's retrieval was empty.
    pub fn any_empty(&self) -> bool {
        self.avg_cosine_x.is_none() || self.avg_cosine_y.is_none()
    }
}
