//! Response parsing: slot markers and novelty scores.
//!
//! An unparseable response is a value ([`SlotWinner::Unparsed`]), never an
//! error, so judging can apply its retry and accounting policies uniformly.

use crate::corpus::PairSample;

use super::{PresentationOrder, SlotWinner, Verdict};

const CLOSING_PHRASE: &str = "the more novel and impactful paper is";

/// Resolves a raw response to a [`Verdict`], mapping the chosen slot to the
/// paper actually presented there under `order`.
///
/// Recognized markers, in precedence order:
/// 1. the last "The more novel and impactful paper is ..." sentence;
/// 2. the whole response (or its last non-empty line) as a bare token such
///    as `1`, `2.`, `X`, or `Paper Y`;
/// 3. a slot label ("Paper 1/2/X/Y") mentioned for exactly one side.
///
/// A response naming both sides at the deciding point, or neither side at
/// all, is `Unparsed`.
pub fn parse_verdict(raw: &str, order: PresentationOrder, pair: &PairSample) -> Verdict {
    let winner = parse_slot(raw);
    Verdict {
        winner,
        winner_paper_id: order.winning_paper(pair, winner).map(|p| p.id.clone()),
        score_x: None,
        score_y: None,
        raw_response: raw.to_string(),
        provider_calls: 0,
    }
}

fn parse_slot(raw: &str) -> SlotWinner {
    let lc = raw.to_lowercase();

    if let Some(pos) = lc.rfind(CLOSING_PHRASE) {
        let tail = &lc[pos + CLOSING_PHRASE.len()..];
        let sentence = &tail[..tail.find(['.', '\n']).unwrap_or(tail.len())];
        match scan_slots(sentence, true) {
            (true, false) => return SlotWinner::X,
            (false, true) => return SlotWinner::Y,
            (true, true) => return SlotWinner::Unparsed,
            (false, false) => {}
        }
    }

    if let Some(winner) = bare_token(&lc) {
        return winner;
    }
    if let Some(line) = lc.lines().rev().map(str::trim).find(|l| !l.is_empty()) {
        if let Some(winner) = bare_token(line) {
            return winner;
        }
    }

    match scan_slots(&lc, false) {
        (true, false) => SlotWinner::X,
        (false, true) => SlotWinner::Y,
        _ => SlotWinner::Unparsed,
    }
}

/// Which slots a lowercased text mentions. Always recognizes the two-word
/// labels ("paper 1", "paper x"); with `bare_tokens` it also counts
/// standalone `1`/`2`/`x`/`y` words, which is only safe inside an already
/// narrowed span like the closing sentence.
fn scan_slots(text_lc: &str, bare_tokens: bool) -> (bool, bool) {
    let mut slot1 = contains_label(text_lc, "paper 1") || contains_label(text_lc, "paper x");
    let mut slot2 = contains_label(text_lc, "paper 2") || contains_label(text_lc, "paper y");
    if bare_tokens {
        for token in text_lc.split(|c: char| !c.is_ascii_alphanumeric()) {
            match token {
                "1" | "x" => slot1 = true,
                "2" | "y" => slot2 = true,
                _ => {}
            }
        }
    }
    (slot1, slot2)
}

/// True when `label` occurs followed by a non-alphanumeric boundary, so
/// "paper 1" does not match inside "paper 10".
fn contains_label(text_lc: &str, label: &str) -> bool {
    let mut rest = text_lc;
    while let Some(pos) = rest.find(label) {
        let after = &rest[pos + label.len()..];
        if !after.chars().next().is_some_and(|c| c.is_ascii_alphanumeric()) {
            return true;
        }
        rest = &rest[pos + label.len()..];
    }
    false
}

fn bare_token(text_lc: &str) -> Option<SlotWinner> {
    let compact = text_lc.split_whitespace().collect::<Vec<_>>().join(" ");
    match compact.trim_end_matches('.') {
        "1" | "x" | "paper 1" | "paper x" => Some(SlotWinner::X),
        "2" | "y" | "paper 2" | "paper y" => Some(SlotWinner::Y),
        _ => None,
    }
}

/// Extracts a 1-10 novelty score from a scoring response.
///
/// Precedence: the whole trimmed response as an integer, then the last
/// `n/10` fraction, then the first in-range integer after the last "score",
/// then the first in-range integer anywhere.
pub fn parse_score(raw: &str) -> Option<u8> {
    if let Ok(n) = raw.trim().trim_end_matches('.').parse::<u8>() {
        if (1..=10).contains(&n) {
            return Some(n);
        }
    }
    let lc = raw.to_lowercase();
    if let Some(n) = last_fraction_of_ten(&lc) {
        return Some(n);
    }
    if let Some(pos) = lc.rfind("score") {
        if let Some(n) = first_int_in_range(&lc[pos + "score".len()..]) {
            return Some(n);
        }
    }
    first_int_in_range(&lc)
}

fn last_fraction_of_ten(text_lc: &str) -> Option<u8> {
    let bytes = text_lc.as_bytes();
    let mut best = None;
    for (pos, _) in text_lc.match_indices('/') {
        let numerator: String = text_lc[..pos]
            .chars()
            .rev()
            .skip_while(|c| *c == ' ')
            .take_while(char::is_ascii_digit)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        let mut after = pos + 1;
        while bytes.get(after) == Some(&b' ') {
            after += 1;
        }
        let denominator_ok = text_lc[after..].starts_with("10")
            && !bytes.get(after + 2).is_some_and(u8::is_ascii_digit);
        if denominator_ok {
            if let Ok(n) = numerator.parse::<u8>() {
                if (1..=10).contains(&n) {
                    best = Some(n);
                }
            }
        }
    }
    best
}

fn first_int_in_range(text_lc: &str) -> Option<u8> {
    text_lc
        .split(|c: char| !c.is_ascii_digit())
        .filter(|run| !run.is_empty())
        .filter_map(|run| run.parse::<u32>().ok())
        .find(|n| (1..=10).contains(n))
        .map(|n| n as u8)
}

#[cfg(test)]
mod tests {
    use super::super::tests::sample_pair;
    use super::*;

    fn winner_of(raw: &str, order: PresentationOrder) -> (SlotWinner, Option<String>) {
        let pair = sample_pair();
        let verdict = parse_verdict(raw, order, &pair);
        (verdict.winner, verdict.winner_paper_id)
    }

    #[test]
    fn bare_tokens_map_to_slots_under_both_orders() {
        let pair = sample_pair();
        for (raw, winner) in [
            ("1", SlotWinner::X),
            ("2", SlotWinner::Y),
            ("2.", SlotWinner::Y),
            ("X", SlotWinner::X),
            ("y.", SlotWinner::Y),
            ("Paper 1", SlotWinner::X),
            ("Paper Y.", SlotWinner::Y),
        ] {
            for order in PresentationOrder::BOTH {
                let (got, id) = winner_of(raw, order);
                assert_eq!(got, winner, "raw = {raw:?}, order = {order}");
                assert_eq!(
                    id.as_deref(),
                    Some(order.winning_paper(&pair, winner).unwrap().id.as_str())
                );
            }
        }
    }

    #[test]
    fn slot_two_under_asc_year_is_the_newer_paper() {
        let pair = sample_pair();
        let (winner, id) = winner_of("2", PresentationOrder::AscYear);
        assert_eq!(winner, SlotWinner::Y);
        assert_eq!(id.as_deref(), Some(pair.paper_x.id.as_str()));
    }

    #[test]
    fn closing_sentence_dominates_earlier_mentions() {
        let raw = "Paper X opens strong but Paper Y innovates more.\n\
                   The more novel and impactful paper is Paper Y.";
        assert_eq!(winner_of(raw, PresentationOrder::AscYear).0, SlotWinner::Y);

        let two_closings = "The more novel and impactful paper is Paper X. \
                            On reflection, the more novel and impactful paper is Paper Y.";
        assert_eq!(winner_of(two_closings, PresentationOrder::AscYear).0, SlotWinner::Y);
    }

    #[test]
    fn closing_sentence_accepts_bare_slot_tokens() {
        assert_eq!(
            winner_of("The more novel and impactful paper is 1.", PresentationOrder::AscYear).0,
            SlotWinner::X
        );
    }

    #[test]
    fn template_echo_with_both_sides_is_unparsed() {
        let raw = "The more novel and impactful paper is [Paper X or Paper Y].";
        assert_eq!(winner_of(raw, PresentationOrder::AscYear).0, SlotWinner::Unparsed);
    }

    #[test]
    fn ambiguous_or_empty_responses_are_unparsed() {
        for raw in ["Both papers are novel", "", "no decision", "Paper 1 and Paper 2 tie"] {
            let (winner, id) = winner_of(raw, PresentationOrder::DescYear);
            assert_eq!(winner, SlotWinner::Unparsed, "raw = {raw:?}");
            assert_eq!(id, None);
        }
    }

    #[test]
    fn final_line_token_wins_after_reasoning() {
        let raw = "Step 1: both address retrieval.\nStep 4: the second is bolder.\n2";
        assert_eq!(winner_of(raw, PresentationOrder::AscYear).0, SlotWinner::Y);
    }

    #[test]
    fn unique_slot_mention_resolves() {
        let raw = "After weighing the evidence, Paper 1 stands out as more innovative.";
        assert_eq!(winner_of(raw, PresentationOrder::AscYear).0, SlotWinner::X);
    }

    #[test]
    fn slot_labels_respect_word_boundaries() {
        assert_eq!(
            winner_of("We compared paper 10 variants.", PresentationOrder::AscYear).0,
            SlotWinner::Unparsed
        );
    }

    #[test]
    fn scores_parse_with_precedence() {
        assert_eq!(parse_score("7"), Some(7));
        assert_eq!(parse_score("10."), Some(10));
        assert_eq!(parse_score("8/10"), Some(8));
        assert_eq!(parse_score("I rate it 6 / 10 overall"), Some(6));
        assert_eq!(parse_score("Novelty score: 9"), Some(9));
        assert_eq!(parse_score("The paper scores 3 out of 10 for novelty."), Some(3));
        assert_eq!(parse_score("I give it a 4."), Some(4));
        assert_eq!(parse_score("first 2/10, revised 5/10"), Some(5));
    }

    #[test]
    fn out_of_range_or_absent_scores_are_none() {
        assert_eq!(parse_score("0"), None);
        assert_eq!(parse_score("99"), None);
        assert_eq!(parse_score("no numeric judgement"), None);
        assert_eq!(parse_score(""), None);
    }
}
