use super::ScoreMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_SILENCE_TOKEN: &str = "sil";

/// State index to output token, with one token treated as silence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    tokens: Vec<String>,
    silence: String,
}

impl LabelMap {
    pub fn new(tokens: Vec<String>, silence: impl Into<String>) -> Self {
        Self {
            tokens,
            silence: silence.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, state: usize) -> Option<&str> {
        self.tokens.get(state).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn silence(&self) -> &str {
        &self.silence
    }

    pub fn is_silence(&self, token: &str) -> bool {
        token == self.silence
    }

    /// First state emitting `token`.
    pub fn state_of(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Word {
    #[serde(rename = "w")]
    pub token: String,
    pub start_ms: i64,
    pub end_ms: i64,
    #[serde(rename = "conf")]
    pub confidence: f64,
}

impl Word {
    pub fn new(token: impl Into<String>, start_ms: i64, end_ms: i64, confidence: f64) -> Self {
        Self {
            token: token.into(),
            start_ms,
            end_ms,
            confidence,
        }
    }
}

/// Timed word sequence produced by one system.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WordHypothesis {
    #[serde(rename = "system")]
    pub system_id: String,
    /// Utterance the hypothesis belongs to, when known.
    #[serde(rename = "utt", default, skip_serializing_if = "Option::is_none")]
    pub utterance_id: Option<String>,
    pub words: Vec<Word>,
}

impl WordHypothesis {
    pub fn new(system_id: impl Into<String>, words: Vec<Word>) -> Result<Self> {
        let hyp = Self {
            system_id: system_id.into(),
            utterance_id: None,
            words,
        };
        hyp.validate()?;
        Ok(hyp)
    }

    /// Untimed hypothesis; each word gets a 10 ms slot and confidence 1.
    pub fn from_tokens(system_id: impl Into<String>, tokens: &[&str]) -> Self {
        let words = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Word::new(*t, 10 * i as i64, 10 * i as i64 + 10, 1.0))
            .collect();
        Self {
            system_id: system_id.into(),
            utterance_id: None,
            words,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.words.iter().enumerate() {
            if w.start_ms > w.end_ms {
                return Err(Error::format("hypothesis", format!("word {i} '{}' ends before it starts", w.token)));
            }
            if !(0.0..=1.0).contains(&w.confidence) {
                return Err(Error::format("hypothesis", format!("word {i} confidence {} outside [0, 1]", w.confidence)));
            }
        }
        if self.words.windows(2).any(|p| p[1].start_ms < p[0].start_ms) {
            return Err(Error::format("hypothesis", "words are not ordered by start time"));
        }
        Ok(())
    }

    pub fn tokens(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.token.as_str()).collect()
    }

    pub fn text(&self) -> String {
        self.tokens().join(" ")
    }
}

/// Frame-wise argmax decoding: ties go to the lowest state, runs of the same
/// token collapse into one word, and silence runs are dropped. A word's
/// confidence is the mean softmax probability of its winning states.
pub fn greedy_decode<T: Real>(scores: &ScoreMatrix<T>, labels: &LabelMap, hop_ms: f64) -> Result<WordHypothesis> {
    let states = scores.num_states();
    if labels.len() < states {
        return Err(Error::UnknownLabel(format!(
            "label map covers {} states, scores have {states}",
            labels.len()
        )));
    }
    let mut runs: Vec<(usize, usize, usize, f64)> = Vec::new(); // (state, first, last, prob sum)
    for n in 0..scores.num_frames() {
        let row = scores.scores.row(n);
        let mut best = 0;
        for s in 1..states {
            if row[s] > row[best] {
                best = s;
            }
        }
        let top = row[best];
        let norm = row.iter().fold(T::zero(), |a, &v| a + (v - top).exp());
        let prob = (T::one() / norm).as_f64();
        match runs.last_mut() {
            Some(run) if labels.token(run.0) == labels.token(best) => {
                run.2 = n;
                run.3 += prob;
            }
            _ => runs.push((best, n, n, prob)),
        }
    }
    let words = runs
        .into_iter()
        .filter(|r| !labels.is_silence(labels.token(r.0).unwrap_or_default()))
        .map(|(state, first, last, psum)| {
            let frames = (last - first + 1) as f64;
            Word::new(
                labels.token(state).unwrap_or_default(),
                (first as f64 * hop_ms).round() as i64,
                ((last + 1) as f64 * hop_ms).round() as i64,
                (psum / frames).clamp(0.0, 1.0),
            )
        })
        .collect();
    Ok(WordHypothesis {
        system_id: scores.system_id.clone(),
        utterance_id: None,
        words,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn labels() -> LabelMap {
        LabelMap::new(vec!["sil".into(), "a".into(), "b".into(), "c".into()], "sil")
    }

    fn one_hot(states: &[usize]) -> ScoreMatrix<f64> {
        let rows = states
            .iter()
            .map(|&s| (0..4).map(|k| if k == s { 0.0 } else { -5.0 }).collect())
            .collect();
        ScoreMatrix::new("sys", Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn collapses_repeats_and_drops_silence() {
        let h = greedy_decode(&one_hot(&[1, 1, 2, 2, 2, 0]), &labels(), 10.0).unwrap();
        assert_eq!(h.tokens(), vec!["a", "b"]);
        assert_eq!((h.words[0].start_ms, h.words[0].end_ms), (0, 20));
        assert_eq!((h.words[1].start_ms, h.words[1].end_ms), (20, 50));
    }

    #[test]
    fn all_silence_is_empty() {
        assert!(greedy_decode(&one_hot(&[0, 0, 0]), &labels(), 10.0).unwrap().words.is_empty());
    }

    #[test]
    fn single_frame_lasts_one_hop() {
        let h = greedy_decode(&one_hot(&[3]), &labels(), 10.0).unwrap();
        assert_eq!(h.tokens(), vec!["c"]);
        assert_eq!(h.words[0].end_ms - h.words[0].start_ms, 10);
    }

    #[test]
    fn empty_matrix_gives_empty_hypothesis() {
        let m = ScoreMatrix::<f64>::new("e", Matrix::zeros(0, 4)).unwrap();
        assert!(greedy_decode(&m, &labels(), 10.0).unwrap().words.is_empty());
    }

    #[test]
    fn ties_go_to_lowest_state_and_confidence_is_softmax() {
        let m = ScoreMatrix::new("t", Matrix::from_rows(vec![vec![-9.0, 1.0, 1.0, -9.0]]).unwrap()).unwrap();
        let h = greedy_decode(&m, &labels(), 10.0).unwrap();
        assert_eq!(h.tokens(), vec!["a"]);
        let expected = 1.0 / (2.0 + 2.0 * (-10.0f64).exp());
        assert!((h.words[0].confidence - expected).abs() < 1e-12);
    }

    #[test]
    fn silence_separates_repeated_words() {
        let h = greedy_decode(&one_hot(&[1, 0, 1]), &labels(), 10.0).unwrap();
        assert_eq!(h.tokens(), vec!["a", "a"]);
    }

    #[test]
    fn short_label_map_is_an_error() {
        let small = LabelMap::new(vec!["sil".into()], "sil");
        assert!(matches!(greedy_decode(&one_hot(&[1]), &small, 10.0), Err(Error::UnknownLabel(_))));
    }
}
