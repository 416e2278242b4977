//! Prompt templates and rendering.
//!
//! Templates ship as versioned text assets under `assets/prompts/` with
//! `{snake_case}` placeholders. Rendering is total: every placeholder found
//! in a template must receive a value, so no placeholder token survives into
//! a rendered prompt.

use crate::corpus::{PairSample, PaperRecord};

use super::{
    DecodingParams, MetadataOptions, PresentationOrder, PromptBundle, RagContext, StrategyError,
    StrategyId,
};

const ZERO_SHOT_SYSTEM: &str = include_str!("../../assets/prompts/zero_shot_system.txt");
const ZERO_SHOT_USER: &str = include_str!("../../assets/prompts/zero_shot_user.txt");
const TWO_SHOT_EXAMPLE: &str = include_str!("../../assets/prompts/two_shot_example.txt");
const COT_SYSTEM: &str = include_str!("../../assets/prompts/cot_system.txt");
const SELF_CONSISTENCY_SYSTEM: &str =
    include_str!("../../assets/prompts/self_consistency_system.txt");
const SELF_REFLECTION_SYSTEM: &str =
    include_str!("../../assets/prompts/self_reflection_system.txt");
const SELF_REFLECTION_USER: &str = include_str!("../../assets/prompts/self_reflection_user.txt");
const DISCUSSION_SYSTEM: &str = include_str!("../../assets/prompts/discussion_system.txt");
const DISCUSSION_USER: &str = include_str!("../../assets/prompts/discussion_user.txt");
const DISCUSSION_ROUND2: &str = include_str!("../../assets/prompts/discussion_round2.txt");
const DISCUSSION_CHAIR: &str = include_str!("../../assets/prompts/discussion_chair.txt");
const RAG_SYSTEM: &str = include_str!("../../assets/prompts/rag_system.txt");
const RAG_USER: &str = include_str!("../../assets/prompts/rag_user.txt");
const POINTWISE_SYSTEM: &str = include_str!("../../assets/prompts/pointwise_system.txt");
const POINTWISE_USER: &str = include_str!("../../assets/prompts/pointwise_user.txt");

/// Follow-up sent when a response could not be parsed.
pub const STRICT_RETRY_TEXT: &str = include_str!("../../assets/prompts/strict_retry.txt");

/// Replaces every `{snake_case}` placeholder in `template` with its value.
/// A placeholder without a value is an error; values may be empty strings.
fn substitute(template: &str, values: &[(&str, &str)]) -> Result<String, StrategyError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end)
                if !after[..end].is_empty()
                    && after[..end]
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') =>
            {
                let name = &after[..end];
                let value = values
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| StrategyError::MissingPlaceholder(name.to_string()))?;
                out.push_str(value);
                rest = &after[end + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Builds the optional metadata lines for one paper, prefixed so they splice
/// directly after the abstract line. `label` is the slot label ("1", "X", or
/// empty for pointwise).
fn metadata_block(
    paper: &PaperRecord,
    label: &str,
    options: MetadataOptions,
    pair_key: &str,
) -> Result<String, StrategyError> {
    let mut block = String::new();
    let prefix = if label.is_empty() {
        "Paper".to_string()
    } else {
        format!("Paper {label}")
    };
    let missing = |field_name: &'static str| StrategyError::MissingMetadata {
        pair_key: pair_key.to_string(),
        paper_id: paper.id.clone(),
        field_name,
    };
    if options.include_tldr {
        let tldr = paper.tldr.as_deref().ok_or_else(|| missing("tldr"))?;
        block.push_str(&format!("\n{prefix} TLDR: {tldr}"));
    }
    if options.include_authors {
        let authors = paper.authors.as_deref().ok_or_else(|| missing("authors"))?;
        block.push_str(&format!("\n{prefix} Authors: {}", authors.join(", ")));
    }
    if options.include_affiliation {
        let affiliation = paper.affiliation.as_deref().ok_or_else(|| missing("affiliation"))?;
        block.push_str(&format!("\n{prefix} Affiliation: {affiliation}"));
    }
    Ok(block)
}

/// A worked example for the two-shot prompt: two papers in presentation
/// order plus the correct slot answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub slot1: PaperRecord,
    pub slot2: PaperRecord,
    /// 1 or 2: the slot holding the later-published (ground-truth) paper.
    pub answer_slot: u8,
}

impl Exemplar {
    pub fn from_pair(pair: &PairSample, order: PresentationOrder) -> Exemplar {
        let slot1 = order.slot1(pair).clone();
        let answer_slot = if slot1.id == pair.label { 1 } else { 2 };
        Exemplar { slot1, slot2: order.slot2(pair).clone(), answer_slot }
    }
}

fn render_exemplar(exemplar: &Exemplar, number: usize) -> Result<String, StrategyError> {
    substitute(
        TWO_SHOT_EXAMPLE,
        &[
            ("example_number", &number.to_string()),
            ("paper_1_title", &exemplar.slot1.title),
            ("paper_1_abstract", &exemplar.slot1.abstract_text),
            ("paper_2_title", &exemplar.slot2.title),
            ("paper_2_abstract", &exemplar.slot2.abstract_text),
            ("answer", &exemplar.answer_slot.to_string()),
        ],
    )
}

fn numbered_user_text(
    pair: &PairSample,
    order: PresentationOrder,
    metadata: MetadataOptions,
) -> Result<String, StrategyError> {
    let key = pair.key();
    let slot1 = order.slot1(pair);
    let slot2 = order.slot2(pair);
    substitute(
        ZERO_SHOT_USER,
        &[
            ("paper_1_title", slot1.title.as_str()),
            ("paper_1_abstract", slot1.abstract_text.as_str()),
            ("paper_1_metadata", &metadata_block(slot1, "1", metadata, &key)?),
            ("paper_2_title", slot2.title.as_str()),
            ("paper_2_abstract", slot2.abstract_text.as_str()),
            ("paper_2_metadata", &metadata_block(slot2, "2", metadata, &key)?),
        ],
    )
}

fn lettered_user_text(
    template: &str,
    pair: &PairSample,
    order: PresentationOrder,
    metadata: MetadataOptions,
    extra: &[(&str, &str)],
) -> Result<String, StrategyError> {
    let key = pair.key();
    let slot1 = order.slot1(pair);
    let slot2 = order.slot2(pair);
    let meta_x = metadata_block(slot1, "X", metadata, &key)?;
    let meta_y = metadata_block(slot2, "Y", metadata, &key)?;
    let mut values: Vec<(&str, &str)> = vec![
        ("paper_x_title", slot1.title.as_str()),
        ("paper_x_abstract", slot1.abstract_text.as_str()),
        ("paper_x_metadata", meta_x.as_str()),
        ("paper_y_title", slot2.title.as_str()),
        ("paper_y_abstract", slot2.abstract_text.as_str()),
        ("paper_y_metadata", meta_y.as_str()),
    ];
    values.extend_from_slice(extra);
    substitute(template, &values)
}

fn format_cosine(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "no retrieved context".to_string(),
    }
}

fn format_date(value: Option<chrono::NaiveDate>) -> String {
    match value {
        Some(d) => d.to_string(),
        None => "no retrieved context".to_string(),
    }
}

/// Renders the prompt for any strategy.
///
/// `rag_context` must be present exactly for the retrieval-augmented
/// strategy, `exemplars` exactly for two-shot. For the discussion strategy
/// this returns the first reviewer's round-1 prompt (the full protocol lives
/// in [`judge_llm_discussion`](super::judge_llm_discussion)); for pointwise
/// it returns the bundle scoring the slot-1 paper.
pub fn render_prompt(
    strategy_id: StrategyId,
    pair: &PairSample,
    order: PresentationOrder,
    metadata: MetadataOptions,
    rag_context: Option<&RagContext>,
    exemplars: Option<&[Exemplar]>,
) -> Result<PromptBundle, StrategyError> {
    assert_eq!(
        rag_context.is_some(),
        strategy_id == StrategyId::RagNovelty,
        "rag_context must be provided exactly for the retrieval-augmented strategy"
    );
    let bundle = |system: String, user: String, params: DecodingParams| PromptBundle {
        system_text: system,
        user_text: user,
        params,
        strategy_id,
        order,
    };
    match strategy_id {
        StrategyId::ZeroShot => Ok(bundle(
            ZERO_SHOT_SYSTEM.to_string(),
            numbered_user_text(pair, order, metadata)?,
            DecodingParams::default(),
        )),
        StrategyId::TwoShot => {
            let exemplars = exemplars.filter(|e| !e.is_empty()).ok_or(StrategyError::MissingExemplars)?;
            let mut user = String::new();
            for (i, exemplar) in exemplars.iter().enumerate() {
                user.push_str(&render_exemplar(exemplar, i + 1)?);
                user.push('\n');
            }
            user.push_str("Now evaluate the following pair.\n");
            user.push_str(&numbered_user_text(pair, order, metadata)?);
            Ok(bundle(ZERO_SHOT_SYSTEM.to_string(), user, DecodingParams::default()))
        }
        StrategyId::Cot => Ok(bundle(
            COT_SYSTEM.to_string(),
            numbered_user_text(pair, order, metadata)?,
            DecodingParams::default(),
        )),
        StrategyId::SelfReflection => Ok(bundle(
            SELF_REFLECTION_SYSTEM.to_string(),
            lettered_user_text(SELF_REFLECTION_USER, pair, order, metadata, &[])?,
            DecodingParams::default(),
        )),
        StrategyId::SelfConsistency => Ok(bundle(
            SELF_CONSISTENCY_SYSTEM.to_string(),
            numbered_user_text(pair, order, metadata)?,
            DecodingParams {
                temperature: Some(super::SELF_CONSISTENCY_TEMPERATURE),
                max_tokens: Some(200),
            },
        )),
        StrategyId::Discussion => render_discussion_prompt(
            super::DISCUSSION_REVIEWER_ROLES[0],
            pair,
            order,
            metadata,
            DiscussionStage::Round1,
        ),
        StrategyId::Pointwise => render_pointwise_prompt(order.slot1(pair), metadata, order, &pair.key()),
        StrategyId::RagNovelty => {
            let ctx = rag_context.expect("checked above");
            let user = lettered_user_text(
                RAG_USER,
                pair,
                order,
                metadata,
                &[
                    ("paper_x_avg_cosine_similarity", &format_cosine(ctx.avg_cosine_x)),
                    ("paper_x_avg_contextual_date", &format_date(ctx.avg_date_x)),
                    ("paper_y_avg_cosine_similarity", &format_cosine(ctx.avg_cosine_y)),
                    ("paper_y_avg_contextual_date", &format_date(ctx.avg_date_y)),
                ],
            )?;
            Ok(bundle(RAG_SYSTEM.to_string(), user, DecodingParams::default()))
        }
    }
}

/// Renders the single-paper scoring prompt.
pub fn render_pointwise_prompt(
    paper: &PaperRecord,
    metadata: MetadataOptions,
    order: PresentationOrder,
    pair_key: &str,
) -> Result<PromptBundle, StrategyError> {
    let user = substitute(
        POINTWISE_USER,
        &[
            ("paper_title", paper.title.as_str()),
            ("paper_abstract", paper.abstract_text.as_str()),
            ("paper_metadata", &metadata_block(paper, "", metadata, pair_key)?),
        ],
    )?;
    Ok(PromptBundle {
        system_text: POINTWISE_SYSTEM.to_string(),
        user_text: user,
        params: DecodingParams::default(),
        strategy_id: StrategyId::Pointwise,
        order,
    })
}

/// Position of a participant in the discussion protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscussionStage<'a> {
    /// A reviewer's independent first pass.
    Round1,
    /// A reviewer revising with the other reviewers' round-1 responses.
    Round2 { own_previous: &'a str, others: &'a [String] },
    /// The chair deciding from the reviewers' round-2 responses.
    Chair { others: &'a [String] },
}

/// Renders a discussion-protocol prompt for one role at one stage. Every
/// discussion call runs with a 200-token cap.
pub fn render_discussion_prompt(
    role: &str,
    pair: &PairSample,
    order: PresentationOrder,
    metadata: MetadataOptions,
    stage: DiscussionStage<'_>,
) -> Result<PromptBundle, StrategyError> {
    let system = substitute(
        DISCUSSION_SYSTEM,
        &[("role", role), ("category", pair.field.display_name())],
    )?;
    let mut user = lettered_user_text(DISCUSSION_USER, pair, order, metadata, &[])?;
    match stage {
        DiscussionStage::Round1 => {}
        DiscussionStage::Round2 { own_previous, others } => {
            user.push_str("\n\n");
            user.push_str(&substitute(
                DISCUSSION_ROUND2,
                &[("previous_response", own_previous), ("other_responses", &others.join("\n\n"))],
            )?);
        }
        DiscussionStage::Chair { others } => {
            user.push_str("\n\n");
            user.push_str(&substitute(
                DISCUSSION_CHAIR,
                &[("other_responses", &others.join("\n\n"))],
            )?);
        }
    }
    Ok(PromptBundle {
        system_text: system,
        user_text: user,
        params: DecodingParams { temperature: None, max_tokens: Some(200) },
        strategy_id: StrategyId::Discussion,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::sample_pair;
    use super::*;
    use chrono::NaiveDate;

    fn ctx() -> RagContext {
        RagContext {
            avg_cosine_x: Some(0.82341),
            avg_date_x: NaiveDate::from_ymd_opt(2021, 1, 1),
            avg_cosine_y: Some(0.7),
            avg_date_y: NaiveDate::from_ymd_opt(2015, 6, 1),
            k_used: 10,
        }
    }

    fn assert_no_placeholder_tokens(text: &str) {
        for needle in ["{paper_", "{role}", "{category}", "{answer}", "{example_number}"] {
            assert!(!text.contains(needle), "unreplaced placeholder in: {text}");
        }
    }

    #[test]
    fn substitution_is_total_or_errors() {
        assert_eq!(substitute("a {x} b {x}", &[("x", "1")]).unwrap(), "a 1 b 1");
        assert!(matches!(
            substitute("needs {missing_value}", &[]),
            Err(StrategyError::MissingPlaceholder(name)) if name == "missing_value"
        ));
        let untouched = substitute("math uses $\\{x : x > 0\\}$ and {X} stays", &[]).unwrap();
        assert_eq!(untouched, "math uses $\\{x : x > 0\\}$ and {X} stays");
    }

    #[test]
    fn zero_shot_asc_year_lists_the_older_paper_first() {
        let pair = sample_pair();
        let bundle = render_prompt(
            StrategyId::ZeroShot,
            &pair,
            PresentationOrder::AscYear,
            MetadataOptions::NONE,
            None,
            None,
        )
        .unwrap();
        assert!(bundle
            .user_text
            .contains(&format!("Paper 1 Title: {}", pair.paper_y.title)));
        assert!(bundle
            .user_text
            .contains(&format!("Paper 2 Title: {}", pair.paper_x.title)));
        assert!(bundle
            .system_text
            .contains("determine which of the two articles is more novel"));
        assert_no_placeholder_tokens(&bundle.user_text);
    }

    #[test]
    fn desc_year_swaps_the_slots() {
        let pair = sample_pair();
        let bundle = render_prompt(
            StrategyId::ZeroShot,
            &pair,
            PresentationOrder::DescYear,
            MetadataOptions::NONE,
            None,
            None,
        )
        .unwrap();
        assert!(bundle
            .user_text
            .contains(&format!("Paper 1 Title: {}", pair.paper_x.title)));
    }

    #[test]
    fn self_reflection_carries_its_anchor_sentences() {
        let pair = sample_pair();
        let bundle = render_prompt(
            StrategyId::SelfReflection,
            &pair,
            PresentationOrder::AscYear,
            MetadataOptions::NONE,
            None,
            None,
        )
        .unwrap();
        assert!(bundle.system_text.contains("Assign a score from 1-10"));
        assert!(bundle.system_text.contains("provide the identifier (X or Y)"));
        assert!(bundle.user_text.contains("Paper X Title:"));
        assert!(bundle.user_text.contains("Paper Y Title:"));
    }

    #[test]
    fn tldr_option_adds_one_line_per_paper() {
        let mut pair = sample_pair();
        pair.paper_x = pair.paper_x.with_tldr("Newer summary.");
        pair.paper_y = pair.paper_y.with_tldr("Older summary.");
        let options = MetadataOptions { include_tldr: true, ..MetadataOptions::NONE };
        let bundle = render_prompt(
            StrategyId::SelfReflection,
            &pair,
            PresentationOrder::AscYear,
            options,
            None,
            None,
        )
        .unwrap();
        assert_eq!(bundle.user_text.matches("Paper X TLDR: Older summary.").count(), 1);
        assert_eq!(bundle.user_text.matches("Paper Y TLDR: Newer summary.").count(), 1);
    }

    #[test]
    fn missing_required_metadata_names_pair_and_field() {
        let pair = sample_pair();
        let options = MetadataOptions { include_affiliation: true, ..MetadataOptions::NONE };
        let err = render_prompt(
            StrategyId::ZeroShot,
            &pair,
            PresentationOrder::AscYear,
            options,
            None,
            None,
        )
        .unwrap_err();
        match err {
            StrategyError::MissingMetadata { pair_key, paper_id, field_name } => {
                assert_eq!(pair_key, pair.key());
                assert_eq!(paper_id, pair.paper_y.id);
                assert_eq!(field_name, "affiliation");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn two_shot_renders_exactly_two_worked_examples() {
        let pair = sample_pair();
        let exemplars = vec![
            Exemplar::from_pair(&sample_pair(), PresentationOrder::AscYear),
            Exemplar::from_pair(&sample_pair(), PresentationOrder::DescYear),
        ];
        let bundle = render_prompt(
            StrategyId::TwoShot,
            &pair,
            PresentationOrder::AscYear,
            MetadataOptions::NONE,
            None,
            Some(&exemplars),
        )
        .unwrap();
        assert_eq!(bundle.user_text.matches("Example ").count(), 2);
        assert!(bundle.user_text.contains("Answer: 2"));
        assert!(bundle.user_text.contains("Answer: 1"));
        let query_pos = bundle.user_text.find("Now evaluate the following pair.").unwrap();
        let last_example = bundle.user_text.rfind("Example 2:").unwrap();
        assert!(last_example < query_pos);
        assert!(matches!(
            render_prompt(
                StrategyId::TwoShot,
                &pair,
                PresentationOrder::AscYear,
                MetadataOptions::NONE,
                None,
                None,
            ),
            Err(StrategyError::MissingExemplars)
        ));
    }

    #[test]
    fn exemplar_answer_names_the_later_paper_slot() {
        let pair = sample_pair();
        assert_eq!(Exemplar::from_pair(&pair, PresentationOrder::AscYear).answer_slot, 2);
        assert_eq!(Exemplar::from_pair(&pair, PresentationOrder::DescYear).answer_slot, 1);
    }

    #[test]
    fn self_consistency_params_and_token_instruction() {
        let pair = sample_pair();
        let bundle = render_prompt(
            StrategyId::SelfConsistency,
            &pair,
            PresentationOrder::AscYear,
            MetadataOptions::NONE,
            None,
            None,
        )
        .unwrap();
        assert_eq!(bundle.params.temperature, Some(0.7));
        assert_eq!(bundle.params.max_tokens, Some(200));
        assert!(bundle.system_text.contains("limit your response to 150 tokens"));
    }

    #[test]
    fn rag_prompt_carries_aggregates_and_instruction_verbatim() {
        let pair = sample_pair();
        let bundle = render_prompt(
            StrategyId::RagNovelty,
            &pair,
            PresentationOrder::DescYear,
            MetadataOptions::NONE,
            Some(&ctx()),
            None,
        )
        .unwrap();
        assert!(bundle.system_text.contains(
            "Average the published dates of the retrieved documents. Use this average date as \
             additional context for your evaluation. Consider that papers with an average date \
             that is later or more recent in time are generally more novel."
        ));
        assert!(bundle.user_text.contains("Paper X Average Cosine Similarity: 0.8234"));
        assert!(bundle.user_text.contains("Paper X Average Contextual Date: 2021-01-01"));
        assert!(bundle.user_text.contains("Paper Y Average Contextual Date: 2015-06-01"));
        assert_no_placeholder_tokens(&bundle.user_text);
    }

    #[test]
    fn empty_retrieval_renders_the_sentinel() {
        let pair = sample_pair();
        let empty = RagContext {
            avg_cosine_x: None,
            avg_date_x: None,
            avg_cosine_y: Some(0.5),
            avg_date_y: NaiveDate::from_ymd_opt(2018, 1, 1),
            k_used: 10,
        };
        let bundle = render_prompt(
            StrategyId::RagNovelty,
            &pair,
            PresentationOrder::AscYear,
            MetadataOptions::NONE,
            Some(&empty),
            None,
        )
        .unwrap();
        assert!(bundle
            .user_text
            .contains("Paper X Average Contextual Date: no retrieved context"));
        assert!(empty.any_empty());
    }

    #[test]
    fn discussion_prompts_cover_all_stages() {
        let pair = sample_pair();
        let r1 = render_discussion_prompt(
            "professor",
            &pair,
            PresentationOrder::AscYear,
            MetadataOptions::NONE,
            DiscussionStage::Round1,
        )
        .unwrap();
        assert!(r1
            .system_text
            .starts_with("You are a professor with expertise across all areas of Computer Science."));
        assert!(r1.system_text.contains("The more novel and impactful paper is"));
        assert_eq!(r1.params.max_tokens, Some(200));

        let others = vec!["I prefer Paper X.".to_string(), "Paper Y seems stronger.".to_string()];
        let r2 = render_discussion_prompt(
            "editor of a prestigious journal",
            &pair,
            PresentationOrder::AscYear,
            MetadataOptions::NONE,
            DiscussionStage::Round2 { own_previous: "My first take.", others: &others },
        )
        .unwrap();
        assert!(r2.user_text.contains("My first take."));
        assert!(r2.user_text.contains(
            "These are responses from other reviewers. Please revise your response if necessary."
        ));
        assert!(r2.user_text.contains("I prefer Paper X."));

        let chair = render_discussion_prompt(
            "chair of the conference",
            &pair,
            PresentationOrder::AscYear,
            MetadataOptions::NONE,
            DiscussionStage::Chair { others: &others },
        )
        .unwrap();
        assert!(chair.user_text.contains(
            "These are responses from other reviewers. Please determine which paper is more novel."
        ));
        assert!(chair.system_text.starts_with("You are a chair of the conference"));
    }

    #[test]
    fn pointwise_prompt_scores_one_paper() {
        let pair = sample_pair();
        let bundle = render_pointwise_prompt(
            &pair.paper_x,
            MetadataOptions::NONE,
            PresentationOrder::AscYear,
            &pair.key(),
        )
        .unwrap();
        assert!(bundle.system_text.contains("assign a novelty score from 1-10"));
        assert!(bundle.user_text.contains(&format!("Paper Title: {}", pair.paper_x.title)));
        assert!(!bundle.user_text.contains("Paper 2"));
    }
}
