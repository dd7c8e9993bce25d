//! Augmented training-set manifests: every utterance contributes one clean
//! row and `rirs_per_utterance` reverberant rows, each with a catalog RIR
//! chosen deterministically from `(seed, utterance index, copy index)`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use super::{augment, sample_room, stream_rng, synthesize_rir, SamplingProtocol};
use crate::error::{Error, Result};
use crate::signal::wav;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Clean,
    Reverb,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ManifestRow {
    pub utterance_id: String,
    pub source_path: String,
    pub output_path: String,
    pub condition: Condition,
    pub rt60_target_s: Option<f64>,
    pub achieved_rt60_s: Option<f64>,
    pub distance_m: Option<f64>,
    pub seed: u64,
    pub rir_index: Option<usize>,
}

/// Plan the augmented set. Target RT and distance come from the catalog
/// entry; `achieved_rt60_s` stays empty until [`execute_manifest`] runs.
pub fn build_augmented_manifest(
    utterances: &[Utterance],
    protocol: &SamplingProtocol,
    out_dir: &Path,
) -> Result<Vec<ManifestRow>> {
    protocol.validate()?;
    if utterances.is_empty() {
        return Err(Error::EmptyInput("utterance list is empty".into()));
    }
    let copies = protocol.rirs_per_utterance;
    let mut rows = Vec::with_capacity(utterances.len() * (copies + 1));
    for (u, utt) in utterances.iter().enumerate() {
        let source = utt.path.display().to_string();
        rows.push(ManifestRow {
            utterance_id: utt.id.clone(),
            source_path: source.clone(),
            output_path: out_dir.join(format!("{}.wav", utt.id)).display().to_string(),
            condition: Condition::Clean,
            rt60_target_s: None,
            achieved_rt60_s: None,
            distance_m: None,
            seed: protocol.seed,
            rir_index: None,
        });
        for k in 0..copies {
            let draw = (u * copies + k) as u64;
            let rir_index = stream_rng(protocol.seed, draw, "rir-pick").random_range(0..protocol.catalog_size);
            let room = sample_room(protocol, rir_index)?;
            rows.push(ManifestRow {
                utterance_id: utt.id.clone(),
                source_path: source.clone(),
                output_path: out_dir.join(format!("{}_rev{}.wav", utt.id, k + 1)).display().to_string(),
                condition: Condition::Reverb,
                rt60_target_s: Some(room.target_rt60_s),
                achieved_rt60_s: None,
                distance_m: Some(room.distance_m()),
                seed: protocol.seed,
                rir_index: Some(rir_index),
            });
        }
    }
    Ok(rows)
}

pub fn write_manifest<W: Write>(w: W, rows: &[ManifestRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush().map_err(|e| Error::io("<manifest>", e))?;
    Ok(())
}

pub fn read_manifest<R: Read>(r: R) -> Result<Vec<ManifestRow>> {
    let mut csv = csv::Reader::from_reader(r);
    csv.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecutionSummary {
    pub written: usize,
    /// `(output path, error)` for every row that could not be produced.
    pub failures: Vec<(String, String)>,
}

fn run_row(row: &ManifestRow, protocol: &SamplingProtocol) -> Result<Option<f64>> {
    let audio = wav::read_pcm16::<f64>(&row.source_path)?;
    let (out, achieved) = match (row.condition, row.rir_index) {
        (Condition::Clean, _) => (audio, None),
        (Condition::Reverb, Some(idx)) => {
            let rir = synthesize_rir::<f64>(&sample_room(protocol, idx)?)?;
            (augment(&audio, &rir)?, rir.meta.achieved_rt60_s)
        }
        (Condition::Reverb, None) => {
            return Err(Error::format("manifest row", "reverb row without rir_index"));
        }
    };
    if let Some(parent) = Path::new(&row.output_path).parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    wav::write_pcm16(&row.output_path, &out)?;
    Ok(achieved)
}

/// Produce every row's audio, filling in achieved RT60s. Failures are
/// collected per row and do not stop the batch. Rows are processed in
/// parallel on the current rayon pool; results are merged in row order.
pub fn execute_manifest(rows: &mut [ManifestRow], protocol: &SamplingProtocol) -> ExecutionSummary {
    let results: Vec<Result<Option<f64>>> = rows.par_iter().map(|row| run_row(row, protocol)).collect();
    let mut summary = ExecutionSummary::default();
    for (row, res) in rows.iter_mut().zip(results) {
        match res {
            Ok(achieved) => {
                row.achieved_rt60_s = achieved;
                summary.written += 1;
            }
            Err(e) => {
                log::warn!("{}: {e}", row.output_path);
                summary.failures.push((row.output_path.clone(), e.to_string()));
            }
        }
    }
    summary
}
