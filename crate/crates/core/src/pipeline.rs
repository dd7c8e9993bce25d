//! End-to-end runs: augment → extract → scores → fuse → decode → vote →
//! score → report.
//!
//! Acoustic-model scores are an ingestion boundary: they are read as RSC1
//! files from `paths.scores_dir/<system>/<utterance>.rsc`, or produced by the
//! deterministic synthetic generator for demos and tests.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{self, render_report, ConditionGrid, EditCounts, WerReport};
use crate::features::{self, io as feature_io, FeatureConfig, FeatureKind};
use crate::fusion::{
    self, cascade_combine_with, fuse_scores, greedy_decode, io as fusion_io, rover_combine_with, FusionWeights,
    LabelMap, RoverParams, ScoreMatrix, WordHypothesis,
};
use crate::matrix::Matrix;
use crate::reverb::manifest::{build_augmented_manifest, execute_manifest, write_manifest, Utterance};
use crate::reverb::{stream_rng, SamplingProtocol};
use crate::signal::{wav, FrameSpec, PIPELINE_SAMPLE_RATE_HZ};

/// Row labels for the combined systems in the report.
pub const FUSION_LABEL: &str = "fusion";
pub const ROVER_LABEL: &str = "rover";
pub const CASCADE_LABEL: &str = "cascade";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Systems to combine, one per feature kind; the first is the report baseline.
    pub features: Vec<FeatureKind>,
    /// Per-system fusion weights in `features` order; uniform when absent.
    pub weights: Option<Vec<f64>>,
    pub alpha: f64,
    pub null_confidence: f64,
    pub frame: FrameSpec,
    pub feature_config: FeatureConfig,
    pub protocol: SamplingProtocol,
    pub paths: PathsConfig,
    pub synthetic: SyntheticConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            features: vec![FeatureKind::Melfb, FeatureKind::Lnfb, FeatureKind::Pncc, FeatureKind::Rplp],
            weights: None,
            alpha: 1.0,
            null_confidence: 0.0,
            frame: FrameSpec::default(),
            feature_config: FeatureConfig::default(),
            protocol: SamplingProtocol::default(),
            paths: PathsConfig::default(),
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// `utterance_id path.wav` list; enables the augment and extract stages.
    pub inputs: Option<PathBuf>,
    /// Reference transcripts for external scores.
    pub references: Option<PathBuf>,
    pub scores_dir: Option<PathBuf>,
    pub label_map: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub enabled: bool,
    pub utterances: usize,
    pub words_per_utterance: (usize, usize),
    pub vocabulary: Vec<String>,
    /// Report columns; error rates grow with the column index.
    pub conditions: Vec<String>,
    pub frames_per_word: usize,
    pub gap_frames: usize,
    pub base_error: f64,
    pub error_step: f64,
    /// Extra relative error rate for each later system.
    pub system_spread: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            utterances: 3,
            words_per_utterance: (4, 8),
            vocabulary: ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "oh", "zero"]
                .map(String::from)
                .to_vec(),
            conditions: ["0.47", "0.84", "1.27", "1.77"].map(String::from).to_vec(),
            frames_per_word: 6,
            gap_frames: 3,
            base_error: 0.06,
            error_step: 0.05,
            system_spread: 0.15,
        }
    }
}

impl PipelineConfig {
    /// The bundled demo: synthetic scores, everything else default.
    pub fn demo(seed: u64) -> Self {
        Self {
            seed,
            synthetic: SyntheticConfig {
                enabled: true,
                ..SyntheticConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Config("at least one feature system is required".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.features.len() || w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "{} weights for {} systems",
                    w.len(),
                    self.features.len()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.null_confidence) {
            return Err(Error::Config("alpha and null_confidence must lie in [0, 1]".into()));
        }
        self.frame.validate()?;
        self.protocol.validate()?;
        let s = &self.synthetic;
        if s.enabled {
            let (lo, hi) = s.words_per_utterance;
            if s.utterances == 0 || lo == 0 || lo > hi || s.vocabulary.is_empty() || s.conditions.is_empty() {
                return Err(Error::Config("synthetic demo needs utterances, words, vocabulary and conditions".into()));
            }
            if s.frames_per_word == 0 || s.gap_frames == 0 {
                return Err(Error::Config("synthetic frame counts must be positive".into()));
            }
            if s.vocabulary.iter().any(|w| w == fusion::DEFAULT_SILENCE_TOKEN) {
                return Err(Error::Config("synthetic vocabulary may not contain the silence token".into()));
            }
        }
        Ok(())
    }

    fn fusion_weights(&self) -> Result<FusionWeights<f64>> {
        match &self.weights {
            Some(w) => Ok(FusionWeights::PerSystem(w.clone())),
            None => fusion::uniform_weights(self.features.len()),
        }
    }

    fn rover_params(&self) -> RoverParams {
        RoverParams {
            alpha: self.alpha,
            null_confidence: self.null_confidence,
        }
    }
}

/// Score matrices of every system for one utterance under one condition.
#[derive(Debug, Clone)]
pub struct ScoredUtterance {
    pub condition: String,
    pub utterance_id: String,
    pub reference: String,
    /// One matrix per configured system, in config order.
    pub systems: Vec<ScoreMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct ScoreSet {
    pub labels: LabelMap,
    pub utterances: Vec<ScoredUtterance>,
}

const HARD_SEGMENT_RATE: f64 = 0.2;
const HARD_FACTOR: f64 = 4.0;
const EASY_FACTOR: f64 = 0.5;

/// Deterministic stand-in for acoustic-model outputs. Each reference word
/// occupies `frames_per_word` frames between silence gaps; each system
/// substitutes, drops or inserts words at a rate that grows with the
/// condition index and the system index; some segments are hard for every
/// system and substitutions favour a shared confusion partner, so errors are
/// partly correlated across systems. Correct states score near
/// 0, competitors near -8; an erroneous segment lifts the wrong state to 0
/// and sinks the right one only to -2, so a minority error is outvoted by
/// fusion.
pub fn synthetic_scores(cfg: &PipelineConfig) -> Result<ScoreSet> {
    let s = &cfg.synthetic;
    let mut tokens = vec![fusion::DEFAULT_SILENCE_TOKEN.to_string()];
    tokens.extend(s.vocabulary.iter().cloned());
    let labels = LabelMap::new(tokens, fusion::DEFAULT_SILENCE_TOKEN);
    let vocab = s.vocabulary.len();
    let systems = cfg.features.len();

    let references: Vec<Vec<usize>> = (0..s.utterances)
        .map(|u| {
            let mut rng = stream_rng(cfg.seed, u as u64, "synth-ref");
            let n = rng.random_range(s.words_per_utterance.0..=s.words_per_utterance.1);
            (0..n).map(|_| 1 + rng.random_range(0..vocab)).collect()
        })
        .collect();

    let mut utterances = Vec::new();
    for (ci, condition) in s.conditions.iter().enumerate() {
        for (u, reference) in references.iter().enumerate() {
            let frames = reference.len() * s.frames_per_word + (reference.len() + 1) * s.gap_frames;
            // segments alternate gap, word, gap, ...; some are hard for every system
            let mut shared = stream_rng(cfg.seed, (ci * s.utterances + u) as u64, "synth-difficulty");
            let difficulty: Vec<f64> = (0..2 * reference.len() + 1)
                .map(|_| if shared.random_bool(HARD_SEGMENT_RATE) { HARD_FACTOR } else { EASY_FACTOR })
                .collect();
            let mut mats = Vec::with_capacity(systems);
            for (r, kind) in cfg.features.iter().enumerate() {
                let index = ((ci * s.utterances + u) * systems + r) as u64;
                let mut rng = stream_rng(cfg.seed, index, "synth-scores");
                let p = (s.base_error + s.error_step * ci as f64) * (1.0 + s.system_spread * r as f64);
                let mut data = Vec::with_capacity(frames * labels.len());
                let segments = std::iter::once(0).chain(reference.iter().flat_map(|&w| [w, 0]));
                for (seg, truth) in segments.enumerate() {
                    let is_word = truth != 0;
                    let len = if is_word { s.frames_per_word } else { s.gap_frames };
                    let rate = (p * difficulty[seg] * if is_word { 1.0 } else { 1.0 / 3.0 }).min(0.9);
                    let claimed = if !rng.random_bool(rate) {
                        truth
                    } else if is_word && rng.random_bool(0.3) {
                        0 // dropped word
                    } else if is_word && (vocab == 1 || rng.random_bool(0.5)) {
                        // the word's usual confusion partner, shared by all systems
                        truth % vocab + 1
                    } else {
                        // any other word (an insertion when `truth` is silence)
                        let k = 1 + rng.random_range(0..vocab - usize::from(is_word));
                        if is_word && k >= truth { k + 1 } else { k }
                    };
                    for _ in 0..len {
                        for state in 0..labels.len() {
                            let base = if state == claimed {
                                0.0
                            } else if state == truth {
                                -2.0
                            } else {
                                -8.0
                            };
                            data.push(base + rng.random_range(-0.5..0.5));
                        }
                    }
                }
                mats.push(ScoreMatrix::new(kind.name(), Matrix::from_vec(frames, labels.len(), data)?)?);
            }
            let text: Vec<&str> = reference.iter().map(|&w| labels.token(w).unwrap_or_default()).collect();
            utterances.push(ScoredUtterance {
                condition: condition.clone(),
                utterance_id: format!("utt{u:03}"),
                reference: text.join(" "),
                systems: mats,
            });
        }
    }
    Ok(ScoreSet { labels, utterances })
}

/// External scores: `scores_dir/<system>/<utt>.rsc` for every reference
/// utterance, scored as a single condition.
pub fn load_external_scores(cfg: &PipelineConfig) -> Result<ScoreSet> {
    let p = &cfg.paths;
    let (Some(dir), Some(refs_path), Some(labels_path)) = (&p.scores_dir, &p.references, &p.label_map) else {
        return Err(Error::ScoresUnavailable(
            "set paths.scores_dir, paths.references and paths.label_map, or enable the synthetic generator".into(),
        ));
    };
    let text = std::fs::read_to_string(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let labels = fusion_io::parse_label_map(&text, fusion::DEFAULT_SILENCE_TOKEN)?;
    let refs = eval::load_transcripts(refs_path)?;
    let utterances = refs
        .into_iter()
        .map(|(id, reference)| {
            let systems = cfg
                .features
                .iter()
                .map(|k| {
                    let path = dir.join(k.name()).join(format!("{id}.rsc"));
                    if !path.exists() {
                        return Err(Error::ScoresUnavailable(format!("missing {}", path.display())));
                    }
                    let mut m = fusion_io::load_rsc1::<f64>(&path)?;
                    m.system_id = k.name().to_string();
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ScoredUtterance {
                condition: "all".into(),
                utterance_id: id,
                reference,
                systems,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreSet { labels, utterances })
}

/// All hypotheses for one utterance, in report row order.
#[derive(Debug, Clone)]
pub struct CombinedUtterance {
    pub condition: String,
    pub utterance_id: String,
    pub reference: String,
    pub hypotheses: Vec<WordHypothesis>,
}

/// Decode every system, the fused scores, ROVER over the individual decodes
/// and the cascade.
pub fn combine_utterance(cfg: &PipelineConfig, labels: &LabelMap, utt: &ScoredUtterance) -> Result<CombinedUtterance> {
    let hop_ms = cfg.frame.hop_ms(PIPELINE_SAMPLE_RATE_HZ);
    let weights = cfg.fusion_weights()?;
    let params = cfg.rover_params();
    let mut hyps = utt
        .systems
        .iter()
        .map(|m| greedy_decode(m, labels, hop_ms))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("decode"))?;
    let fused = fuse_scores(&utt.systems, &weights).map_err(|e| e.in_stage("fuse"))?;
    let mut fused_hyp = greedy_decode(&fused, labels, hop_ms).map_err(|e| e.in_stage("decode"))?;
    fused_hyp.system_id = FUSION_LABEL.into();
    let mut rover = if hyps.len() >= 2 {
        rover_combine_with(&hyps, &params).map_err(|e| e.in_stage("rover"))?
    } else {
        hyps[0].clone()
    };
    rover.system_id = ROVER_LABEL.into();
    let cascade =
        cascade_combine_with(&utt.systems, &weights, labels, hop_ms, &params).map_err(|e| e.in_stage("cascade"))?;
    hyps.push(fused_hyp);
    hyps.push(rover);
    hyps.push(cascade);
    let utt_key = format!("{}/{}", utt.condition, utt.utterance_id);
    for h in &mut hyps {
        h.utterance_id = Some(utt_key.clone());
    }
    Ok(CombinedUtterance {
        condition: utt.condition.clone(),
        utterance_id: utt.utterance_id.clone(),
        reference: utt.reference.clone(),
        hypotheses: hyps,
    })
}

/// Corpus WER per (system, condition), rows in hypothesis order.
pub fn score_grid(combined: &[CombinedUtterance]) -> Result<ConditionGrid> {
    let mut grid = ConditionGrid::new();
    let Some(first) = combined.first() else {
        return Err(Error::EmptyInput("nothing to score".into()));
    };
    let systems: Vec<&str> = first.hypotheses.iter().map(|h| h.system_id.as_str()).collect();
    let mut conditions: Vec<&str> = Vec::new();
    for c in combined {
        if !conditions.contains(&c.condition.as_str()) {
            conditions.push(&c.condition);
        }
    }
    for (r, system) in systems.iter().enumerate() {
        for condition in &conditions {
            let mut counts = EditCounts::default();
            let mut ref_words = 0;
            for c in combined.iter().filter(|c| c.condition == *condition) {
                let reference = eval::tokenize(&c.reference);
                let hyp: Vec<String> = c.hypotheses[r].words.iter().map(|w| w.token.to_lowercase()).collect();
                ref_words += reference.len();
                counts += eval::align(&reference, &hyp);
            }
            let report = WerReport::from_counts(counts, ref_words)?;
            grid.insert(system, condition, report.wer_percent)?;
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: String,
    pub csv: String,
    pub grid: ConditionGrid,
    pub hypotheses: Vec<WordHypothesis>,
    /// Rows of the augmentation manifest, when audio inputs were given.
    pub manifest_rows: usize,
    pub feature_files: usize,
}

/// `utterance_id path` lines; relative paths resolve against the list's directory.
pub fn read_input_list(path: &Path) -> Result<Vec<Utterance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    eval::parse_transcripts(&text)?
        .into_iter()
        .map(|(id, p)| {
            if p.is_empty() {
                return Err(Error::format("input list", format!("utterance '{id}' has no path")));
            }
            Ok(Utterance {
                id,
                path: base.join(p),
            })
        })
        .collect()
}

fn augment_and_extract(cfg: &PipelineConfig, inputs: &Path, out_dir: &Path) -> Result<(usize, usize)> {
    let utts = read_input_list(inputs).map_err(|e| e.in_stage("augment"))?;
    let mut protocol = cfg.protocol.clone();
    protocol.seed = cfg.seed;
    let audio_dir = out_dir.join("augmented");
    let mut rows = build_augmented_manifest(&utts, &protocol, &audio_dir).map_err(|e| e.in_stage("augment"))?;
    let summary = execute_manifest(&mut rows, &protocol);
    if summary.written == 0 {
        let detail = summary.failures.first().map(|f| f.1.clone()).unwrap_or_default();
        return Err(Error::EmptyInput(format!("no augmented audio produced: {detail}")).in_stage("augment"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest_path = out_dir.join("manifest.csv");
    let f = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    write_manifest(f, &rows).map_err(|e| e.in_stage("augment"))?;

    let produced: Vec<&str> = rows
        .iter()
        .filter(|r| !summary.failures.iter().any(|(p, _)| p == &r.output_path))
        .map(|r| r.output_path.as_str())
        .collect();
    let jobs: Vec<(&str, FeatureKind)> = produced
        .iter()
        .flat_map(|p| cfg.features.iter().map(move |k| (*p, *k)))
        .collect();
    let written = jobs
        .par_iter()
        .map(|(wav_path, kind)| -> Result<()> {
            let audio = wav::read_pcm16::<f64>(wav_path)?;
            let feats = features::extract(*kind, &audio, &cfg.frame, &cfg.feature_config)?;
            let stem = Path::new(wav_path).file_stem().unwrap_or_default().to_string_lossy();
            let dir = out_dir.join("features").join(kind.name());
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            feature_io::save_rfe1(dir.join(format!("{stem}.rfe")), &feats)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("extract"))?;
    Ok((rows.len(), written.len()))
}

/// Run every configured stage. Work is spread over the current rayon pool;
/// outputs are assembled in input order, so they depend only on the config.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    log::info!("revfuse {} effective configuration:\n{}", crate::VERSION, cfg.to_toml());

    let (mut manifest_rows, mut feature_files) = (0, 0);
    if let Some(inputs) = &cfg.paths.inputs {
        let out_dir = cfg
            .paths
            .out_dir
            .as_deref()
            .ok_or_else(|| Error::Config("paths.out_dir is required with paths.inputs".into()).in_stage("augment"))?;
        (manifest_rows, feature_files) = augment_and_extract(cfg, inputs, out_dir)?;
        log::info!("augment: {manifest_rows} manifest rows; extract: {feature_files} feature files");
    }

    let scores = if cfg.synthetic.enabled {
        synthetic_scores(cfg)
    } else {
        load_external_scores(cfg)
    }
    .map_err(|e| e.in_stage("scores"))?;

    let combined = scores
        .utterances
        .par_iter()
        .map(|u| combine_utterance(cfg, &scores.labels, u))
        .collect::<Result<Vec<_>>>()?;

    let grid = score_grid(&combined).map_err(|e| e.in_stage("score"))?;
    let baseline = cfg.features[0].name();
    let report = render_report(&grid, baseline).map_err(|e| e.in_stage("report"))?;
    let csv = grid.to_csv(baseline).map_err(|e| e.in_stage("report"))?;
    let hypotheses: Vec<WordHypothesis> = combined.into_iter().flat_map(|c| c.hypotheses).collect();

    if let Some(out_dir) = &cfg.paths.out_dir {
        write_outputs(out_dir, &report, &csv, &hypotheses).map_err(|e| e.in_stage("report"))?;
    }
    Ok(PipelineOutcome {
        report,
        csv,
        grid,
        hypotheses,
        manifest_rows,
        feature_files,
    })
}

fn write_outputs(out_dir: &Path, report: &str, csv: &str, hyps: &[WordHypothesis]) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = out_dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write("report.txt", report.as_bytes())?;
    write("report.csv", csv.as_bytes())?;
    let mut buf = Vec::new();
    fusion_io::write_hypotheses(&mut buf, hyps)?;
    write("hypotheses.jsonl", &buf)
}
