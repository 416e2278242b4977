//! Strategy execution: renders prompts, drives the gateway, and applies
//! each strategy's protocol (retry, voting, discussion rounds, scoring).

use crate::corpus::{PairSample, PaperRecord};
use crate::gateway::{ChatMessage, ChatRequest, Gateway};
use crate::index::{embed_text, pair_cutoff, retrieve_topk, Embedder, Index};

use super::{
    parse_score, parse_verdict, render_discussion_prompt, render_pointwise_prompt, render_prompt,
    DiscussionStage, Exemplar, MetadataOptions, PresentationOrder, PromptBundle, RagContext,
    SlotWinner, StrategyError, StrategyId, Verdict,
};

/// Sampled reasoning paths per self-consistency trial.
pub const SELF_CONSISTENCY_PATHS: u32 = 10;
/// Sampling temperature for self-consistency paths.
pub const SELF_CONSISTENCY_TEMPERATURE: f64 = 0.7;
/// Extra tie-break paths drawn before declaring a self-consistency tie.
const SELF_CONSISTENCY_TIE_EXTRAS: u32 = 3;

/// The three discussion reviewers, in speaking order.
pub const DISCUSSION_REVIEWER_ROLES: [&str; 3] =
    ["professor", "PhD student", "editor of a prestigious journal"];
const DISCUSSION_CHAIR_ROLE: &str = "chair of the conference";

/// Shared judging inputs: the gateway to call, the model to address, and the
/// prompt options applied to every trial.
pub struct JudgeContext<'a> {
    pub gateway: &'a Gateway,
    pub model_id: String,
    pub metadata: MetadataOptions,
    pub exemplars: Option<Vec<Exemplar>>,
}

impl<'a> JudgeContext<'a> {
    pub fn new(gateway: &'a Gateway, model_id: impl Into<String>) -> Self {
        JudgeContext {
            gateway,
            model_id: model_id.into(),
            metadata: MetadataOptions::NONE,
            exemplars: None,
        }
    }

    pub fn with_metadata(mut self, metadata: MetadataOptions) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn with_exemplars(mut self, exemplars: Vec<Exemplar>) -> Self {
        self.exemplars = Some(exemplars);
        self
    }
}

fn request_for(ctx: &JudgeContext<'_>, bundle: &PromptBundle, tag: String) -> ChatRequest {
    let mut request = ChatRequest::new(
        ctx.model_id.clone(),
        vec![
            ChatMessage::system(bundle.system_text.clone()),
            ChatMessage::user(bundle.user_text.clone()),
        ],
    )
    .with_tag(tag);
    if let Some(temperature) = bundle.params.temperature {
        request = request.with_temperature(temperature);
    }
    if let Some(max_tokens) = bundle.params.max_tokens {
        request = request.with_max_tokens(max_tokens);
    }
    request
}

/// Builds the strict-format follow-up for an unparseable response: the
/// original exchange plus the model's reply and a one-token instruction.
fn strict_retry_request(
    ctx: &JudgeContext<'_>,
    bundle: &PromptBundle,
    previous_response: &str,
    tag: String,
) -> ChatRequest {
    let mut request = ChatRequest::new(
        ctx.model_id.clone(),
        vec![
            ChatMessage::system(bundle.system_text.clone()),
            ChatMessage::user(bundle.user_text.clone()),
            ChatMessage::assistant(previous_response),
            ChatMessage::user(super::STRICT_RETRY_TEXT),
        ],
    )
    .with_tag(tag);
    if let Some(temperature) = bundle.params.temperature {
        request = request.with_temperature(temperature);
    }
    if let Some(max_tokens) = bundle.params.max_tokens {
        request = request.with_max_tokens(max_tokens);
    }
    request
}

/// Runs one of the single-call strategies (zero-shot, two-shot,
/// chain-of-thought, self-reflection): one judging call, plus one
/// strict-format retry if the response does not parse.
pub fn judge_single(
    ctx: &JudgeContext<'_>,
    strategy_id: StrategyId,
    pair: &PairSample,
    order: PresentationOrder,
) -> Result<Verdict, StrategyError> {
    assert!(
        matches!(
            strategy_id,
            StrategyId::ZeroShot | StrategyId::TwoShot | StrategyId::Cot | StrategyId::SelfReflection
        ),
        "judge_single runs the single-call strategies; {strategy_id} has its own entry point"
    );
    let bundle = render_prompt(
        strategy_id,
        pair,
        order,
        ctx.metadata,
        None,
        ctx.exemplars.as_deref(),
    )?;
    let tag = format!("{strategy_id}/{}/{order}", pair.key());
    judge_with_strict_retry(ctx, &bundle, tag, pair, order)
}

/// One call, parse, and at most one strict-format retry. Shared by the
/// single-call strategies, the retrieval-augmented strategy, and the
/// discussion chair.
fn judge_with_strict_retry(
    ctx: &JudgeContext<'_>,
    bundle: &PromptBundle,
    tag: String,
    pair: &PairSample,
    order: PresentationOrder,
) -> Result<Verdict, StrategyError> {
    let response = ctx.gateway.chat(&request_for(ctx, bundle, tag.clone()))?;
    let mut verdict = parse_verdict(&response.text, order, pair);
    verdict.provider_calls = 1;
    if verdict.winner == SlotWinner::Unparsed {
        let retry = strict_retry_request(ctx, bundle, &response.text, format!("{tag}/retry"));
        let retry_response = ctx.gateway.chat(&retry)?;
        verdict = parse_verdict(&retry_response.text, order, pair);
        verdict.provider_calls = 2;
    }
    Ok(verdict)
}

/// Samples `n_paths` independent responses at the given temperature and
/// takes the majority vote over the parseable ones. A tie draws up to three
/// extra paths; a tie that survives them — or a run with no parseable vote —
/// is `Unparsed`.
pub fn judge_self_consistency(
    ctx: &JudgeContext<'_>,
    pair: &PairSample,
    order: PresentationOrder,
    n_paths: u32,
    temperature: f64,
) -> Result<Verdict, StrategyError> {
    assert!(n_paths >= 1, "self-consistency needs at least one path");
    let mut bundle = render_prompt(StrategyId::SelfConsistency, pair, order, ctx.metadata, None, None)?;
    bundle.params.temperature = Some(temperature);
    let tag = format!("self_consistency/{}/{order}", pair.key());

    let mut responses: Vec<String> = Vec::new();
    let mut votes_x = 0u32;
    let mut votes_y = 0u32;
    let sample = |index: u32, responses: &mut Vec<String>| -> Result<SlotWinner, StrategyError> {
        let request =
            request_for(ctx, &bundle, format!("{tag}/path-{index}")).with_sample_index(index);
        let response = ctx.gateway.chat(&request)?;
        let winner = parse_verdict(&response.text, order, pair).winner;
        responses.push(response.text);
        Ok(winner)
    };

    for index in 0..n_paths {
        match sample(index, &mut responses)? {
            SlotWinner::X => votes_x += 1,
            SlotWinner::Y => votes_y += 1,
            SlotWinner::Unparsed => {}
        }
    }
    let mut extras = 0;
    while votes_x == votes_y && votes_x > 0 && extras < SELF_CONSISTENCY_TIE_EXTRAS {
        match sample(n_paths + extras, &mut responses)? {
            SlotWinner::X => votes_x += 1,
            SlotWinner::Y => votes_y += 1,
            SlotWinner::Unparsed => {}
        }
        extras += 1;
    }

    let winner = match votes_x.cmp(&votes_y) {
        std::cmp::Ordering::Greater => SlotWinner::X,
        std::cmp::Ordering::Less => SlotWinner::Y,
        std::cmp::Ordering::Equal => SlotWinner::Unparsed,
    };
    Ok(Verdict {
        winner,
        winner_paper_id: order.winning_paper(pair, winner).map(|p| p.id.clone()),
        score_x: None,
        score_y: None,
        raw_response: responses.join("\n---\n"),
        provider_calls: responses.len() as u32,
    })
}

/// One turn of the discussion transcript.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DiscussionTurn {
    pub role: String,
    /// 1 and 2 are reviewer rounds; 3 is the chair's decision.
    pub round: u8,
    pub response: String,
}

/// A discussion verdict plus the seven-turn transcript that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscussionOutcome {
    pub verdict: Verdict,
    pub transcript: Vec<DiscussionTurn>,
}

/// Runs the three-reviewer discussion: independent round-1 takes, a round-2
/// revision pass where each reviewer sees the others' round-1 responses, and
/// a chair decision over the round-2 responses. Seven calls, plus at most
/// one strict-format retry for the chair.
pub fn judge_llm_discussion(
    ctx: &JudgeContext<'_>,
    pair: &PairSample,
    order: PresentationOrder,
) -> Result<DiscussionOutcome, StrategyError> {
    let tag = format!("discussion/{}/{order}", pair.key());
    let mut transcript = Vec::with_capacity(7);
    let mut calls = 0u32;

    let mut round1 = Vec::with_capacity(DISCUSSION_REVIEWER_ROLES.len());
    for role in DISCUSSION_REVIEWER_ROLES {
        let bundle =
            render_discussion_prompt(role, pair, order, ctx.metadata, DiscussionStage::Round1)?;
        let response = ctx
            .gateway
            .chat(&request_for(ctx, &bundle, format!("{tag}/round1/{role}")))?;
        calls += 1;
        round1.push(response.text.clone());
        transcript.push(DiscussionTurn { role: role.to_string(), round: 1, response: response.text });
    }

    let mut round2 = Vec::with_capacity(DISCUSSION_REVIEWER_ROLES.len());
    for (i, role) in DISCUSSION_REVIEWER_ROLES.iter().enumerate() {
        let others: Vec<String> = round1
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, text)| text.clone())
            .collect();
        let bundle = render_discussion_prompt(
            role,
            pair,
            order,
            ctx.metadata,
            DiscussionStage::Round2 { own_previous: &round1[i], others: &others },
        )?;
        let response = ctx
            .gateway
            .chat(&request_for(ctx, &bundle, format!("{tag}/round2/{role}")))?;
        calls += 1;
        round2.push(response.text.clone());
        transcript.push(DiscussionTurn { role: role.to_string(), round: 2, response: response.text });
    }

    let chair_bundle = render_discussion_prompt(
        DISCUSSION_CHAIR_ROLE,
        pair,
        order,
        ctx.metadata,
        DiscussionStage::Chair { others: &round2 },
    )?;
    let chair_response = ctx
        .gateway
        .chat(&request_for(ctx, &chair_bundle, format!("{tag}/chair")))?;
    calls += 1;
    let mut verdict = parse_verdict(&chair_response.text, order, pair);
    let mut chair_text = chair_response.text;
    if verdict.winner == SlotWinner::Unparsed {
        let retry =
            strict_retry_request(ctx, &chair_bundle, &chair_text, format!("{tag}/chair/retry"));
        let retry_response = ctx.gateway.chat(&retry)?;
        calls += 1;
        verdict = parse_verdict(&retry_response.text, order, pair);
        chair_text = retry_response.text;
    }
    transcript.push(DiscussionTurn {
        role: DISCUSSION_CHAIR_ROLE.to_string(),
        round: 3,
        response: chair_text,
    });
    verdict.provider_calls = calls;
    Ok(DiscussionOutcome { verdict, transcript })
}

/// Scores each paper independently (no shared context) and declares the
/// higher score the winner. Equal or unparseable scores yield `Unparsed`;
/// there is no retry, so this is always exactly two calls.
pub fn judge_pointwise(
    ctx: &JudgeContext<'_>,
    pair: &PairSample,
    order: PresentationOrder,
) -> Result<Verdict, StrategyError> {
    let key = pair.key();
    let tag = format!("pointwise/{key}/{order}");
    let score_one = |paper: &PaperRecord, slot: u8| -> Result<(Option<u8>, String), StrategyError> {
        let bundle = render_pointwise_prompt(paper, ctx.metadata, order, &key)?;
        let response = ctx
            .gateway
            .chat(&request_for(ctx, &bundle, format!("{tag}/slot{slot}")))?;
        Ok((parse_score(&response.text), response.text))
    };
    let (score_x, response_1) = score_one(order.slot1(pair), 1)?;
    let (score_y, response_2) = score_one(order.slot2(pair), 2)?;
    let winner = match (score_x, score_y) {
        (Some(a), Some(b)) if a > b => SlotWinner::X,
        (Some(a), Some(b)) if a < b => SlotWinner::Y,
        _ => SlotWinner::Unparsed,
    };
    Ok(Verdict {
        winner,
        winner_paper_id: order.winning_paper(pair, winner).map(|p| p.id.clone()),
        score_x,
        score_y,
        raw_response: format!("{response_1}\n---\n{response_2}"),
        provider_calls: 2,
    })
}

/// A retrieval-augmented verdict plus the aggregates that went into its
/// prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct RagOutcome {
    pub verdict: Verdict,
    pub context: RagContext,
}

/// The retrieval-augmented strategy: embeds both abstracts, retrieves the
/// top `k` index entries dated at or before the pair's shared cutoff,
/// renders the aggregates into the prompt, and makes one judging call (plus
/// the strict-format retry). An empty retrieval proceeds with sentinel text;
/// callers can flag it via [`RagContext::any_empty`].
pub fn judge_rag_novelty(
    ctx: &JudgeContext<'_>,
    pair: &PairSample,
    order: PresentationOrder,
    index: &Index,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<RagOutcome, StrategyError> {
    if index.manifest().field != pair.field {
        return Err(StrategyError::IndexFieldMismatch {
            index_field: index.manifest().field.as_str(),
            pair_field: pair.field.as_str(),
        });
    }
    let cutoff = pair_cutoff(&pair.paper_x, &pair.paper_y);
    let slot1 = order.slot1(pair);
    let slot2 = order.slot2(pair);
    let query_1 = embed_text(embedder, &slot1.abstract_text)?;
    let query_2 = embed_text(embedder, &slot2.abstract_text)?;
    let retrieval_1 = retrieve_topk(index, &query_1, k, cutoff)?;
    let retrieval_2 = retrieve_topk(index, &query_2, k, cutoff)?;
    let context = RagContext {
        avg_cosine_x: retrieval_1.avg_cosine,
        avg_date_x: retrieval_1.avg_date,
        avg_cosine_y: retrieval_2.avg_cosine,
        avg_date_y: retrieval_2.avg_date,
        k_used: k,
    };
    let bundle =
        render_prompt(StrategyId::RagNovelty, pair, order, ctx.metadata, Some(&context), None)?;
    let tag = format!("rag_novelty/{}/{order}", pair.key());
    let verdict = judge_with_strict_retry(ctx, &bundle, tag, pair, order)?;
    Ok(RagOutcome { verdict, context })
}
