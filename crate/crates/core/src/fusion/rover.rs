//! ROVER-style voting. Hypotheses are merged one at a time, in input order,
//! into a word transition network by word-level edit alignment; each slot
//! then elects the candidate with the best mix of vote share and confidence.

use super::{Word, WordHypothesis};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoverParams {
    /// Weight of the vote share against the best supporting confidence.
    pub alpha: f64,
    /// Confidence credited to a NULL (omitted word) candidate.
    pub null_confidence: f64,
}

impl Default for RoverParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            null_confidence: 0.0,
        }
    }
}

/// One column of the network: the entry each merged system contributed.
type Slot = Vec<Option<Word>>;

#[derive(Clone, Copy)]
enum Step {
    Pair,
    SkipSlot,
    InsertWord,
}

fn slot_has(slot: &Slot, token: &str) -> bool {
    slot.iter().flatten().any(|w| w.token == token)
}

/// Merge `words` from system number `systems_so_far` into `slots`.
fn merge(slots: Vec<Slot>, words: &[Word], systems_so_far: usize) -> Vec<Slot> {
    let (n, m) = (slots.len(), words.len());
    let mut cost = vec![vec![0usize; m + 1]; n + 1];
    let mut step = vec![vec![Step::Pair; m + 1]; n + 1];
    for i in 1..=n {
        cost[i][0] = i;
        step[i][0] = Step::SkipSlot;
    }
    for j in 1..=m {
        cost[0][j] = j;
        step[0][j] = Step::InsertWord;
    }
    for i in 1..=n {
        for j in 1..=m {
            let pair = cost[i - 1][j - 1] + usize::from(!slot_has(&slots[i - 1], &words[j - 1].token));
            let skip = cost[i - 1][j] + 1;
            let insert = cost[i][j - 1] + 1;
            // preference on equal cost: pair, then skip, then insert
            let (c, s) = if pair <= skip && pair <= insert {
                (pair, Step::Pair)
            } else if skip <= insert {
                (skip, Step::SkipSlot)
            } else {
                (insert, Step::InsertWord)
            };
            cost[i][j] = c;
            step[i][j] = s;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let s = step[i][j];
        path.push(s);
        match s {
            Step::Pair => {
                i -= 1;
                j -= 1;
            }
            Step::SkipSlot => i -= 1,
            Step::InsertWord => j -= 1,
        }
    }
    path.reverse();

    let mut slots = slots.into_iter();
    let mut words = words.iter();
    let mut out = Vec::with_capacity(path.len());
    for s in path {
        match s {
            Step::Pair => {
                let mut slot = slots.next().expect("slot for pair");
                slot.push(words.next().cloned());
                out.push(slot);
            }
            Step::SkipSlot => {
                let mut slot = slots.next().expect("slot to skip");
                slot.push(None);
                out.push(slot);
            }
            Step::InsertWord => {
                let mut slot: Slot = vec![None; systems_so_far];
                slot.push(words.next().cloned());
                out.push(slot);
            }
        }
    }
    out
}

fn elect(slot: &Slot, params: &RoverParams) -> Option<Word> {
    let systems = slot.len() as f64;
    // candidates in order of their lowest-index supporter
    let mut candidates: Vec<Option<&str>> = Vec::new();
    for entry in slot {
        let key = entry.as_ref().map(|w| w.token.as_str());
        if !candidates.contains(&key) {
            candidates.push(key);
        }
    }
    let mut best: Option<(f64, Option<&str>)> = None;
    for cand in candidates {
        let supporters = slot.iter().filter(|e| e.as_ref().map(|w| w.token.as_str()) == cand);
        let (count, conf) = supporters.fold((0usize, f64::NEG_INFINITY), |(c, m), e| {
            let conf = e.as_ref().map_or(params.null_confidence, |w| w.confidence);
            (c + 1, m.max(conf))
        });
        let score = params.alpha * count as f64 / systems + (1.0 - params.alpha) * conf;
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, cand));
        }
    }
    let winner = best?.1?;
    let supporters: Vec<&Word> = slot.iter().flatten().filter(|w| w.token == winner).collect();
    let mut word = supporters[0].clone();
    word.confidence = supporters.iter().map(|w| w.confidence).fold(0.0, f64::max);
    Some(word)
}

/// Vote with `alpha` weighting vote share against confidence.
pub fn rover_combine(hyps: &[WordHypothesis], alpha: f64) -> Result<WordHypothesis> {
    rover_combine_with(hyps, &RoverParams { alpha, ..RoverParams::default() })
}

pub fn rover_combine_with(hyps: &[WordHypothesis], params: &RoverParams) -> Result<WordHypothesis> {
    if hyps.len() < 2 {
        return Err(Error::EmptyInput(format!("ROVER needs at least 2 hypotheses, got {}", hyps.len())));
    }
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(Error::Config(format!("alpha {} outside [0, 1]", params.alpha)));
    }
    let mut slots: Vec<Slot> = hyps[0].words.iter().map(|w| vec![Some(w.clone())]).collect();
    for (r, hyp) in hyps.iter().enumerate().skip(1) {
        slots = merge(slots, &hyp.words, r);
    }
    let mut words: Vec<Word> = Vec::new();
    for slot in &slots {
        if let Some(mut w) = elect(slot, params) {
            // winners may come from different systems; keep start times ordered
            if let Some(prev) = words.last() {
                if w.start_ms < prev.start_ms {
                    w.start_ms = prev.start_ms;
                    w.end_ms = w.end_ms.max(w.start_ms);
                }
            }
            words.push(w);
        }
    }
    Ok(WordHypothesis {
        system_id: "rover".into(),
        utterance_id: hyps[0].utterance_id.clone(),
        words,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(text: &str) -> WordHypothesis {
        let toks: Vec<&str> = text.split_whitespace().collect();
        WordHypothesis::from_tokens("s", &toks)
    }

    fn vote(texts: &[&str], alpha: f64) -> String {
        let hyps: Vec<_> = texts.iter().map(|t| h(t)).collect();
        rover_combine(&hyps, alpha).unwrap().text()
    }

    #[test]
    fn majority_per_slot() {
        assert_eq!(vote(&["a b c", "a b c", "a x c"], 1.0), "a b c");
    }

    #[test]
    fn tie_goes_to_first_system() {
        assert_eq!(vote(&["a b", "a c"], 1.0), "a b");
        assert_eq!(vote(&["a c", "a b"], 1.0), "a c");
    }

    #[test]
    fn null_loses_to_two_votes() {
        assert_eq!(vote(&["a b c", "a c", "a b c"], 1.0), "a b c");
    }

    #[test]
    fn null_can_win() {
        assert_eq!(vote(&["a b c", "a c", "a c"], 1.0), "a c");
        assert_eq!(vote(&["a", "a x", "a"], 1.0), "a");
    }

    #[test]
    fn empty_hypotheses_are_legal() {
        assert_eq!(vote(&["", "", ""], 1.0), "");
        assert_eq!(vote(&["", "a b", "a b"], 1.0), "a b");
    }

    #[test]
    fn needs_two_hypotheses() {
        assert!(rover_combine(&[h("a")], 1.0).is_err());
        assert!(rover_combine(&[h("a"), h("a")], 1.5).is_err());
    }

    #[test]
    fn confidence_breaks_vote_ties_when_alpha_below_one() {
        let mut a = h("a b");
        let mut b = h("a c");
        a.words[1].confidence = 0.2;
        b.words[1].confidence = 0.9;
        let out = rover_combine(&[a, b], 0.5).unwrap();
        assert_eq!(out.text(), "a c");
        assert_eq!(out.words[1].confidence, 0.9);
    }

    #[test]
    fn output_takes_times_from_lowest_supporter() {
        let mut a = h("x");
        a.words[0].start_ms = 100;
        a.words[0].end_ms = 200;
        let out = rover_combine(&[h("y"), a.clone(), a], 1.0).unwrap();
        assert_eq!(out.words[0].token, "x");
        assert_eq!((out.words[0].start_ms, out.words[0].end_ms), (100, 200));
    }
}
