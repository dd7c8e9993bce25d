//! Word error rate scoring and table aggregation.

mod report;

pub use report::{relative_reduction, render_report, round_to, row_average, ConditionGrid};

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Edit operation counts of a minimal alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditCounts {
    pub fn distance(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, o: Self) {
        self.substitutions += o.substitutions;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_words: usize,
    pub wer_percent: f64,
}

impl WerReport {
    pub fn from_counts(counts: EditCounts, ref_words: usize) -> Result<Self> {
        if ref_words == 0 {
            return Err(Error::EmptyInput("reference has no words; WER is undefined".into()));
        }
        Ok(Self {
            substitutions: counts.substitutions,
            deletions: counts.deletions,
            insertions: counts.insertions,
            ref_words,
            wer_percent: 100.0 * counts.distance() as f64 / ref_words as f64,
        })
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

const STACK_CELLS: usize = 256;

/// Minimal unit-cost alignment of `hyp` against `reference`. On the
/// backtrace a substitution is preferred over an insertion/deletion pair,
/// then deletions over insertions.
pub fn align<T: PartialEq>(reference: &[T], hyp: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let cells = (n + 1) * w;
    // short utterances are the common case; keep their table off the heap
    let mut stack = [0u32; STACK_CELLS];
    let mut heap;
    let d: &mut [u32] = if cells <= STACK_CELLS {
        &mut stack[..cells]
    } else {
        heap = vec![0u32; cells];
        &mut heap
    };
    for j in 0..=m {
        d[j] = j as u32;
    }
    for i in 1..=n {
        d[i * w] = i as u32;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + u32::from(reference[i - 1] != hyp[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }
    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if d[(i - 1) * w + j - 1] + u32::from(!same) == here {
                if !same {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    align(a, b).distance()
}

/// Whitespace tokenization with case folding.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// WER of `hyp` against a nonempty `reference`.
pub fn wer<S: AsRef<str>>(reference: &[S], hyp: &[S]) -> Result<WerReport> {
    let r: Vec<String> = reference.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let h: Vec<String> = hyp.iter().map(|t| t.as_ref().to_lowercase()).collect();
    WerReport::from_counts(align(&r, &h), r.len())
}

pub fn wer_text(reference: &str, hyp: &str) -> Result<WerReport> {
    let r = tokenize(reference);
    let h = tokenize(hyp);
    WerReport::from_counts(align(&r, &h), r.len())
}

/// `utterance_id transcript...` lines, in file order. Blank lines are skipped;
/// an id with no words is an empty transcript.
pub fn parse_transcripts(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut seen = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        if seen.insert(id.to_string(), ln).is_some() {
            return Err(Error::format("transcripts", format!("line {}: duplicate utterance '{id}'", ln + 1)));
        }
        out.push((id.to_string(), rest.trim().to_string()));
    }
    Ok(out)
}

pub fn load_transcripts(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_transcripts(&text)
}

/// Corpus-level WER: counts summed over reference utterances. A reference
/// with no hypothesis counts as fully deleted; a hypothesis for an unknown
/// utterance is an error.
pub fn score_transcripts(refs: &[(String, String)], hyps: &[(String, String)]) -> Result<WerReport> {
    let by_id: HashMap<&str, &str> = hyps.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    if let Some((id, _)) = hyps.iter().find(|(id, _)| !refs.iter().any(|(r, _)| r == id)) {
        return Err(Error::UnknownLabel(format!("hypothesis for utterance '{id}' has no reference")));
    }
    let mut counts = EditCounts::default();
    let mut ref_words = 0;
    for (id, text) in refs {
        let r = tokenize(text);
        let h = by_id.get(id.as_str()).map(|t| tokenize(t)).unwrap_or_else(|| {
            log::warn!("no hypothesis for utterance '{id}'; scoring as empty");
            Vec::new()
        });
        ref_words += r.len();
        counts += align(&r, &h);
    }
    WerReport::from_counts(counts, ref_words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain recursion over the three edit choices; exponential, for tiny inputs.
    fn recursive_distance(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = recursive_distance(ra, rb) + usize::from(x != y);
                let del = recursive_distance(ra, b) + 1;
                let ins = recursive_distance(a, rb) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    fn all_sequences(max_len: usize, alphabet: u8) -> Vec<Vec<u8>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &frontier {
                for t in 0..alphabet {
                    let mut s2: Vec<u8> = s.clone();
                    s2.push(t);
                    next.push(s2);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn spec_examples() {
        assert_eq!(wer_text("the cat sat", "the cat sat").unwrap().wer_percent, 0.0);
        let r = wer_text("a b c", "a x c").unwrap();
        assert_eq!((r.substitutions, r.deletions, r.insertions), (1, 0, 0));
        assert!((r.wer_percent - 33.333333).abs() < 1e-4);
        assert!(wer_text("", "a").is_err());
    }

    #[test]
    fn case_folded() {
        assert_eq!(wer_text("The CAT", "the cat").unwrap().errors(), 0);
        assert_eq!(wer(&["A"], &["a"]).unwrap().errors(), 0);
    }

    #[test]
    fn prefers_substitution_over_ins_del() {
        let c = align(&["a", "b"], &["a", "c"]);
        assert_eq!(c, EditCounts { substitutions: 1, deletions: 0, insertions: 0 });
    }

    #[test]
    fn insertions_can_exceed_100_percent() {
        let r = wer_text("a", "x y z").unwrap();
        assert_eq!(r.errors(), 3);
        assert_eq!(r.wer_percent, 300.0);
    }

    #[test]
    fn exhaustive_short_pairs_match_recursion() {
        let seqs = all_sequences(5, 3);
        for a in &seqs {
            for b in &seqs {
                let c = align(a, b);
                assert_eq!(c.distance(), recursive_distance(a, b), "{a:?} vs {b:?}");
                assert_eq!(c.deletions as isize - c.insertions as isize, a.len() as isize - b.len() as isize);
            }
        }
    }

    #[test]
    fn transcripts_parse_and_score() {
        let refs = parse_transcripts("u1 a b c\nu2 d e\n\nu3\n").unwrap();
        assert_eq!(refs[2], ("u3".into(), "".into()));
        let hyps = parse_transcripts("u1 a x c\nu2 d e f\n").unwrap();
        let r = score_transcripts(&refs, &hyps).unwrap();
        assert_eq!((r.substitutions, r.insertions, r.ref_words), (1, 1, 5));
        assert!((r.wer_percent - 40.0).abs() < 1e-12);
        assert!(parse_transcripts("u1 a\nu1 b\n").is_err());
        let stray = parse_transcripts("zz a\n").unwrap();
        assert!(score_transcripts(&refs, &stray).is_err());
    }

    fn tokens() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..3, 0..9)
    }

    proptest! {
        #[test]
        fn random_pairs_match_recursion(a in prop::collection::vec(0u8..3, 0..8), b in prop::collection::vec(0u8..3, 0..8)) {
            prop_assert_eq!(edit_distance(&a, &b), recursive_distance(&a, &b));
        }

        #[test]
        fn symmetric_with_swapped_ins_del(a in tokens(), b in tokens()) {
            let ab = align(&a, &b);
            let ba = align(&b, &a);
            prop_assert_eq!(ab.distance(), ba.distance());
            prop_assert_eq!(ab.deletions + ab.substitutions, ab.distance() - ab.insertions);
            prop_assert_eq!(ab.deletions as isize - ab.insertions as isize, ba.insertions as isize - ba.deletions as isize);
        }

        #[test]
        fn identity_is_zero(a in tokens()) {
            prop_assert_eq!(edit_distance(&a, &a), 0);
        }

        #[test]
        fn triangle_inequality(a in tokens(), b in tokens(), c in tokens()) {
            prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
        }
    }
}
