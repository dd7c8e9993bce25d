//! RSC1 score files, JSON-lines hypotheses and `state token` label maps.
//!
//! RSC1 layout: magic `RSC1`, frames and states as little-endian `u32`, then
//! frame-major little-endian `f32` log-scores.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use super::{LabelMap, ScoreMatrix, WordHypothesis};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

pub const RSC1_MAGIC: &[u8; 4] = b"RSC1";

pub fn write_rsc1<T: Real, W: Write>(mut w: W, scores: &ScoreMatrix<T>) -> std::io::Result<()> {
    let (frames, states) = scores.scores.shape();
    let mut buf = Vec::with_capacity(12 + 4 * frames * states);
    buf.extend_from_slice(RSC1_MAGIC);
    buf.extend_from_slice(&(frames as u32).to_le_bytes());
    buf.extend_from_slice(&(states as u32).to_le_bytes());
    for &v in scores.scores.as_slice() {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_rsc1<T: Real, R: Read>(mut r: R, system_id: &str) -> Result<ScoreMatrix<T>> {
    let bad = |d: String| Error::format("RSC1 file", d);
    let mut header = [0u8; 12];
    r.read_exact(&mut header).map_err(|e| bad(format!("short header: {e}")))?;
    if &header[..4] != RSC1_MAGIC {
        return Err(bad(format!("bad magic {:?}", &header[..4])));
    }
    let frames = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let states = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| bad(e.to_string()))?;
    if payload.len() != 4 * frames * states {
        return Err(bad(format!(
            "payload is {} bytes, expected {} for {frames}x{states}",
            payload.len(),
            4 * frames * states
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| T::lit(f64::from(f32::from_le_bytes(c.try_into().unwrap()))))
        .collect();
    ScoreMatrix::new(system_id, Matrix::from_vec(frames, states, data)?)
}

/// Save to `path`; the system id is not stored in the file.
pub fn save_rsc1<T: Real>(path: impl AsRef<Path>, scores: &ScoreMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rsc1(std::io::BufWriter::new(f), scores).map_err(|e| Error::io(path, e))
}

/// Load from `path`, naming the system after the file stem.
pub fn load_rsc1<T: Real>(path: impl AsRef<Path>) -> Result<ScoreMatrix<T>> {
    let path = path.as_ref();
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rsc1(std::io::BufReader::new(f), &id).map_err(|e| match e {
        Error::Format { what, detail } => Error::Format {
            what,
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    })
}

pub fn write_hypotheses<W: Write>(mut w: W, hyps: &[WordHypothesis]) -> Result<()> {
    for h in hyps {
        serde_json::to_writer(&mut w, h)?;
        w.write_all(b"\n").map_err(|e| Error::io("<hypotheses>", e))?;
    }
    Ok(())
}

pub fn read_hypotheses<R: BufRead>(r: R) -> Result<Vec<WordHypothesis>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<hypotheses>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let h: WordHypothesis = serde_json::from_str(&line)
            .map_err(|e| Error::format("hypothesis line", format!("line {}: {e}", i + 1)))?;
        h.validate()?;
        out.push(h);
    }
    Ok(out)
}

/// Parse `state_index token` lines. Indices must cover `0..n` exactly once.
pub fn parse_label_map(text: &str, silence: &str) -> Result<LabelMap> {
    let mut entries: Vec<Option<String>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(idx), Some(tok), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::format("label map", format!("line {}: expected 'state token'", ln + 1)));
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::format("label map", format!("line {}: bad state index '{idx}'", ln + 1)))?;
        if idx >= entries.len() {
            entries.resize(idx + 1, None);
        }
        if entries[idx].replace(tok.to_string()).is_some() {
            return Err(Error::format("label map", format!("state {idx} listed twice")));
        }
    }
    let tokens = entries
        .into_iter()
        .enumerate()
        .map(|(i, t)| t.ok_or_else(|| Error::format("label map", format!("state {i} missing"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelMap::new(tokens, silence))
}

pub fn format_label_map(labels: &LabelMap) -> String {
    labels
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{i} {t}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::Word;
    use proptest::prelude::*;

    #[test]
    fn rsc1_header_is_bit_exact() {
        let m = ScoreMatrix::new("x", Matrix::from_rows(vec![vec![1.0f32, -2.0, 0.5]]).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_rsc1(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"RSC1");
        assert_eq!(&buf[4..12], &[1, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&buf[16..20], &(-2.0f32).to_le_bytes());
        assert!(read_rsc1::<f32, _>(&buf[..buf.len() - 1], "x").is_err());
    }

    #[test]
    fn hypothesis_json_shape() {
        let h = WordHypothesis::new("mel", vec![Word::new("hi", 0, 30, 0.75)]).unwrap();
        let mut buf = Vec::new();
        write_hypotheses(&mut buf, &[h.clone()]).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(line, "{\"system\":\"mel\",\"words\":[{\"w\":\"hi\",\"start_ms\":0,\"end_ms\":30,\"conf\":0.75}]}\n");
        assert_eq!(read_hypotheses(buf.as_slice()).unwrap(), vec![h]);
    }

    #[test]
    fn invalid_hypotheses_are_rejected() {
        let bad = "{\"system\":\"s\",\"words\":[{\"w\":\"a\",\"start_ms\":5,\"end_ms\":1,\"conf\":0.5}]}\n";
        assert!(read_hypotheses(bad.as_bytes()).is_err());
        assert!(read_hypotheses("not json\n".as_bytes()).is_err());
    }

    #[test]
    fn label_map_parsing() {
        let l = parse_label_map("1 a\n0 sil\n\n2 b\n", "sil").unwrap();
        assert_eq!(l.tokens(), &["sil", "a", "b"]);
        assert_eq!(format_label_map(&l), "0 sil\n1 a\n2 b\n");
        assert!(parse_label_map("0 a\n2 b\n", "sil").is_err());
        assert!(parse_label_map("0 a\n0 b\n", "sil").is_err());
        assert!(parse_label_map("0 a b\n", "sil").is_err());
    }

    proptest! {
        #[test]
        fn rsc1_round_trip(frames in 0usize..10, states in 1usize..10, seed in -100.0f32..100.0) {
            let data: Vec<f32> = (0..frames * states).map(|i| seed - i as f32 * 0.25).collect();
            let m = ScoreMatrix::new("s", Matrix::from_vec(frames, states, data).unwrap()).unwrap();
            let mut buf = Vec::new();
            write_rsc1(&mut buf, &m).unwrap();
            prop_assert_eq!(read_rsc1::<f32, _>(buf.as_slice(), "s").unwrap(), m);
        }
    }
}
