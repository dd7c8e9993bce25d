//! RFE1 binary feature files and a CSV dump for inspection.
//!
//! Layout: magic `RFE1`, one kind byte, frame count and dim as little-endian
//! `u32`, then `frames * dim` little-endian `f32` values in frame-major order.

use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::signal::{FrameSpec, PIPELINE_SAMPLE_RATE_HZ};

pub const RFE1_MAGIC: &[u8; 4] = b"RFE1";

pub fn write_rfe1<T: Real, W: Write>(mut w: W, feats: &FeatureMatrix<T>) -> std::io::Result<()> {
    let (frames, dim) = feats.rows.shape();
    let mut buf = Vec::with_capacity(13 + 4 * frames * dim);
    buf.extend_from_slice(RFE1_MAGIC);
    buf.push(feats.kind.code());
    buf.extend_from_slice(&(frames as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for &v in feats.rows.as_slice() {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

/// Decode an RFE1 stream. Framing metadata is not stored in the file, so the
/// default frame spec and 16 kHz rate are attached.
pub fn read_rfe1<T: Real, R: Read>(mut r: R) -> Result<FeatureMatrix<T>> {
    let bad = |d: String| Error::format("RFE1 file", d);
    let mut header = [0u8; 13];
    r.read_exact(&mut header).map_err(|e| bad(format!("short header: {e}")))?;
    if &header[..4] != RFE1_MAGIC {
        return Err(bad(format!("bad magic {:?}", &header[..4])));
    }
    let kind = FeatureKind::from_code(header[4]).ok_or_else(|| bad(format!("unknown kind code {}", header[4])))?;
    let frames = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[9..13].try_into().unwrap()) as usize;
    if dim != kind.dim() {
        return Err(bad(format!("{kind} features have {} dims, header says {dim}", kind.dim())));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| bad(e.to_string()))?;
    if payload.len() != 4 * frames * dim {
        return Err(bad(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            4 * frames * dim
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| T::lit(f64::from(f32::from_le_bytes(c.try_into().unwrap()))))
        .collect();
    Ok(FeatureMatrix {
        rows: Matrix::from_vec(frames, dim, data)?,
        kind,
        frame_spec: FrameSpec::default(),
        sample_rate_hz: PIPELINE_SAMPLE_RATE_HZ,
    })
}

pub fn save_rfe1<T: Real>(path: impl AsRef<Path>, feats: &FeatureMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rfe1(std::io::BufWriter::new(f), feats).map_err(|e| Error::io(path, e))
}

pub fn load_rfe1<T: Real>(path: impl AsRef<Path>) -> Result<FeatureMatrix<T>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rfe1(std::io::BufReader::new(f))
}

/// One frame per line, comma separated.
pub fn write_csv<T: Real, W: Write>(mut w: W, feats: &FeatureMatrix<T>) -> std::io::Result<()> {
    for row in feats.rows.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feats(frames: usize, kind: FeatureKind, seed: f32) -> FeatureMatrix<f32> {
        let data = (0..frames * kind.dim()).map(|i| seed * i as f32 - 3.0).collect();
        FeatureMatrix::new(Matrix::from_vec(frames, kind.dim(), data).unwrap(), kind, FrameSpec::default(), 16_000)
    }

    #[test]
    fn header_layout_is_bit_exact() {
        let mut buf = Vec::new();
        write_rfe1(&mut buf, &feats(2, FeatureKind::Pncc, 0.5)).unwrap();
        assert_eq!(&buf[..4], b"RFE1");
        assert_eq!(buf[4], 4);
        assert_eq!(&buf[5..9], &[2, 0, 0, 0]);
        assert_eq!(&buf[9..13], &[13, 0, 0, 0]);
        assert_eq!(buf.len(), 13 + 2 * 13 * 4);
        assert_eq!(&buf[13..17], &(-3.0f32).to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut buf = Vec::new();
        write_rfe1(&mut buf, &feats(3, FeatureKind::Melfb, 1.0)).unwrap();
        let mut truncated = buf.clone();
        truncated.pop();
        assert!(read_rfe1::<f32, _>(truncated.as_slice()).is_err());
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_rfe1::<f32, _>(bad_magic.as_slice()).is_err());
        let mut bad_kind = buf;
        bad_kind[4] = 9;
        assert!(read_rfe1::<f32, _>(bad_kind.as_slice()).is_err());
    }

    #[test]
    fn csv_has_one_line_per_frame() {
        let mut out = Vec::new();
        write_csv(&mut out, &feats(3, FeatureKind::Rplp, 1.0)).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split(',').count() == 13));
    }

    proptest! {
        #[test]
        fn round_trip(frames in 0usize..20, code in 1u8..=4, seed in -10.0f32..10.0) {
            let kind = FeatureKind::from_code(code).unwrap();
            let f = feats(frames, kind, seed);
            let mut buf = Vec::new();
            write_rfe1(&mut buf, &f).unwrap();
            let back: FeatureMatrix<f32> = read_rfe1(buf.as_slice()).unwrap();
            prop_assert_eq!(back.kind, kind);
            prop_assert_eq!(back.rows, f.rows);
        }
    }
}
