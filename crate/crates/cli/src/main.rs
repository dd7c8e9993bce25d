use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use revfuse::eval::{self, render_report, ConditionGrid};
use revfuse::features::{self, io as feature_io, FeatureConfig, FeatureKind};
use revfuse::fusion::{self, io as fusion_io, FusionWeights, RoverParams, WordHypothesis};
use revfuse::pipeline::{self, PipelineConfig};
use revfuse::reverb::{self, manifest, SamplingProtocol};
use revfuse::signal::{wav, FrameSpec, PIPELINE_SAMPLE_RATE_HZ};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

/// Reverberant speech front ends and system combination.
#[derive(Parser, Debug)]
#[command(name = "revfuse", version, about)]
struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true, env = "REVFUSE_SEED")]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Output order never depends on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract features from 16 kHz mono PCM16 WAV files into RFE1 files.
    Extract(ExtractArgs),
    /// Synthesize catalog RIRs as 32-bit float WAV files.
    Rir(RirArgs),
    /// Build and/or execute an augmentation manifest.
    Augment(AugmentArgs),
    /// Combine RSC1 score files frame by frame.
    Fuse(FuseArgs),
    /// Greedy-decode RSC1 score files into JSON-lines hypotheses.
    Decode(DecodeArgs),
    /// Vote over hypotheses from several systems.
    Rover(RoverArgs),
    /// Word error rate of hypotheses against reference transcripts.
    Score(ScoreArgs),
    /// Render a WER grid CSV as a text table with averages and reductions.
    Report(ReportArgs),
    /// Run the configured end-to-end pipeline.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Melfb,
    Rplp,
    Lnfb,
    Pncc,
    All,
}

impl KindArg {
    fn kinds(self) -> Vec<FeatureKind> {
        match self {
            KindArg::Melfb => vec![FeatureKind::Melfb],
            KindArg::Rplp => vec![FeatureKind::Rplp],
            KindArg::Lnfb => vec![FeatureKind::Lnfb],
            KindArg::Pncc => vec![FeatureKind::Pncc],
            KindArg::All => FeatureKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeatureFormat {
    Rfe1,
    Csv,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long, value_enum, default_value = "melfb")]
    kind: KindArg,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "rfe1")]
    format: FeatureFormat,
    #[arg(long, default_value_t = 400)]
    window: usize,
    #[arg(long, default_value_t = 160)]
    hop: usize,
    #[arg(required = true, value_name = "WAV")]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct RirArgs {
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// First catalog index to synthesize.
    #[arg(long, default_value_t = 0)]
    start: usize,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Sampling protocol TOML; defaults apply to omitted keys.
    #[arg(long, value_name = "FILE")]
    protocol: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Manifest CSV. Executed if it exists; written first when --inputs is given.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    #[arg(long, value_name = "FILE")]
    protocol: Option<PathBuf>,
    /// `utterance_id path.wav` list to plan a new manifest from.
    #[arg(long, value_name = "LIST", requires = "out")]
    inputs: Option<PathBuf>,
    /// Directory for augmented audio (with --inputs).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Only write the manifest.
    #[arg(long)]
    plan_only: bool,
}

#[derive(Args, Debug)]
struct FuseArgs {
    /// `uniform` or comma-separated per-system weights.
    #[arg(long, default_value = "uniform")]
    weights: String,
    #[arg(long, value_name = "RSC")]
    out: PathBuf,
    #[arg(required = true, value_name = "RSC")]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// `state token` label map.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    #[arg(long, default_value = fusion::DEFAULT_SILENCE_TOKEN)]
    silence: String,
    #[arg(long, default_value_t = 10.0)]
    hop_ms: f64,
    /// Output JSONL (default: stdout).
    #[arg(long, value_name = "JSONL")]
    out: Option<PathBuf>,
    /// Utterance id to record in each hypothesis.
    #[arg(long)]
    utt: Option<String>,
    #[arg(required = true, value_name = "RSC")]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct RoverArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    null_confidence: f64,
    #[arg(long, value_name = "JSONL")]
    out: Option<PathBuf>,
    /// Hypothesis files; hypotheses sharing an utterance id are voted together,
    /// in file order.
    #[arg(required = true, value_name = "JSONL")]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Reference transcripts: `utterance_id words...`.
    #[arg(long = "ref", value_name = "FILE")]
    reference: PathBuf,
    /// Hypotheses: transcript text, or JSONL (scored per system).
    #[arg(long, value_name = "FILE")]
    hyp: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// CSV with header `system,<condition>...` and one WER row per system.
    #[arg(long, value_name = "CSV")]
    grid: PathBuf,
    #[arg(long)]
    baseline: Option<String>,
    /// Also write the table as CSV.
    #[arg(long, value_name = "CSV")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long, value_name = "TOML")]
    config: Option<PathBuf>,
    /// Use the synthetic score generator.
    #[arg(long)]
    demo: bool,
    /// Output directory (overrides paths.out_dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Bad invocation detected after argument parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let outcome = std::panic::catch_unwind(|| run(&cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else if e.downcast_ref::<revfuse::Error>().is_some() || e.downcast_ref::<std::io::Error>().is_some() {
        EXIT_DATA
    } else {
        EXIT_INTERNAL
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker threads")?;
    pool.install(|| match &cli.command {
        Command::Extract(a) => cmd_extract(a),
        Command::Rir(a) => cmd_rir(a, cli.seed),
        Command::Augment(a) => cmd_augment(a, cli.seed),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Rover(a) => cmd_rover(a),
        Command::Score(a) => cmd_score(a),
        Command::Report(a) => cmd_report(a),
        Command::Pipeline(a) => cmd_pipeline(a, cli.seed),
    })
}

fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let spec = FrameSpec::new(a.window, a.hop).map_err(|e| usage(e.to_string()))?;
    let kinds = a.kind.kinds();
    let cfg = FeatureConfig::default();
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let ext = match a.format {
        FeatureFormat::Rfe1 => "rfe",
        FeatureFormat::Csv => "csv",
    };
    let results: Vec<revfuse::Result<Vec<(FeatureKind, usize, usize, PathBuf)>>> = a
        .inputs
        .par_iter()
        .map(|input| {
            let audio = wav::read_pcm16::<f64>(input)?;
            let stem = input.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            kinds
                .iter()
                .map(|&kind| {
                    let feats = features::extract(kind, &audio, &spec, &cfg)?;
                    let name = if kinds.len() == 1 {
                        format!("{stem}.{ext}")
                    } else {
                        format!("{stem}.{}.{ext}", kind.name())
                    };
                    let path = a.out.join(name);
                    match a.format {
                        FeatureFormat::Rfe1 => feature_io::save_rfe1(&path, &feats)?,
                        FeatureFormat::Csv => {
                            let f = fs::File::create(&path).map_err(|e| revfuse::Error::Io {
                                path: path.clone(),
                                source: e,
                            })?;
                            feature_io::write_csv(BufWriter::new(f), &feats).map_err(|e| revfuse::Error::Io {
                                path: path.clone(),
                                source: e,
                            })?;
                        }
                    }
                    Ok((kind, feats.num_frames(), feats.dim(), path))
                })
                .collect()
        })
        .collect();

    let mut failed = 0;
    let mut last_err = None;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (input, res) in a.inputs.iter().zip(results) {
        match res {
            Ok(files) => {
                for (kind, frames, dim, path) in files {
                    writeln!(out, "{}\t{}\t{frames} frames\t{dim} dims\t{}", input.display(), kind, path.display())?;
                }
            }
            Err(e) => {
                log::error!("{}: {e}", input.display());
                failed += 1;
                last_err = Some(e);
            }
        }
    }
    if failed == a.inputs.len() {
        return Err(last_err.expect("at least one input").into());
    }
    if failed > 0 {
        log::warn!("{failed} of {} inputs failed", a.inputs.len());
    }
    Ok(())
}

fn load_protocol(path: Option<&Path>, seed: Option<u64>) -> Result<SamplingProtocol> {
    let mut protocol = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).map_err(|e| revfuse::Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SamplingProtocol::default(),
    };
    if let Some(s) = seed {
        protocol.seed = s;
    }
    protocol.validate()?;
    Ok(protocol)
}

fn cmd_rir(a: &RirArgs, seed: Option<u64>) -> Result<()> {
    let protocol = load_protocol(a.protocol.as_deref(), seed)?;
    if a.count == 0 || a.start + a.count > protocol.catalog_size {
        return Err(usage(format!(
            "indices {}..{} outside the {}-entry catalog",
            a.start,
            a.start + a.count,
            protocol.catalog_size
        )));
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let rows: Vec<revfuse::Result<String>> = (a.start..a.start + a.count)
        .into_par_iter()
        .map(|idx| {
            let room = reverb::sample_room(&protocol, idx)?;
            let rir = reverb::synthesize_rir::<f64>(&room)?;
            let name = format!("rir_{idx:05}.wav");
            wav::write_f32(a.out.join(&name), &rir.taps, rir.sample_rate_hz)?;
            let [lx, ly, lz] = room.dims_m;
            let achieved = rir.meta.achieved_rt60_s.map(|v| format!("{v:.4}")).unwrap_or_default();
            Ok(format!(
                "{idx},{name},{lx:.4},{ly:.4},{lz:.4},{:.4},{achieved},{:.4},{}",
                room.target_rt60_s,
                room.distance_m(),
                rir.meta.direct_delay_samples
            ))
        })
        .collect();
    let mut catalog = String::from(
        "rir_index,file,length_m,width_m,height_m,rt60_target_s,achieved_rt60_s,distance_m,direct_delay_samples\n",
    );
    for row in rows {
        catalog.push_str(&row?);
        catalog.push('\n');
    }
    let path = a.out.join("rirs.csv");
    fs::write(&path, catalog).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} RIRs to {} (seed {})", a.count, a.out.display(), protocol.seed);
    Ok(())
}

fn cmd_augment(a: &AugmentArgs, seed: Option<u64>) -> Result<()> {
    let protocol = load_protocol(a.protocol.as_deref(), seed)?;
    let mut rows = if let Some(list) = &a.inputs {
        let utts = pipeline::read_input_list(list)?;
        let out = a.out.as_deref().ok_or_else(|| usage("--inputs needs --out"))?;
        manifest::build_augmented_manifest(&utts, &protocol, out)?
    } else {
        let f = fs::File::open(&a.manifest).map_err(|e| revfuse::Error::Io {
            path: a.manifest.clone(),
            source: e,
        })?;
        manifest::read_manifest(BufReader::new(f))?
    };
    if !a.plan_only {
        let summary = manifest::execute_manifest(&mut rows, &protocol);
        for (path, err) in &summary.failures {
            log::error!("{path}: {err}");
        }
        println!("augmented {} of {} rows", summary.written, rows.len());
        if summary.written == 0 {
            bail!(revfuse::Error::EmptyInput("no rows could be produced".into()));
        }
    }
    if let Some(parent) = a.manifest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = fs::File::create(&a.manifest).map_err(|e| revfuse::Error::Io {
        path: a.manifest.clone(),
        source: e,
    })?;
    manifest::write_manifest(BufWriter::new(f), &rows)?;
    println!("manifest: {} ({} rows)", a.manifest.display(), rows.len());
    Ok(())
}

fn cmd_fuse(a: &FuseArgs) -> Result<()> {
    let weights = if a.weights == "uniform" {
        fusion::uniform_weights(a.inputs.len())?
    } else {
        let w = a
            .weights
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| usage(format!("--weights must be 'uniform' or numbers, got '{}'", a.weights)))?;
        if w.len() != a.inputs.len() {
            return Err(usage(format!("{} weights for {} score files", w.len(), a.inputs.len())));
        }
        FusionWeights::PerSystem(w)
    };
    let systems = a
        .inputs
        .iter()
        .map(|p| {
            let mut m = fusion_io::load_rsc1::<f64>(p)?;
            m.system_id = p.display().to_string();
            Ok(m)
        })
        .collect::<revfuse::Result<Vec<_>>>()?;
    let fused = fusion::fuse_scores(&systems, &weights)?;
    fusion_io::save_rsc1(&a.out, &fused)?;
    println!("fused {} systems: {} frames x {} states -> {}", systems.len(), fused.num_frames(), fused.num_states(), a.out.display());
    Ok(())
}

fn write_jsonl(out: Option<&Path>, hyps: &[WordHypothesis]) -> Result<()> {
    match out {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| revfuse::Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            let mut w = BufWriter::new(f);
            fusion_io::write_hypotheses(&mut w, hyps)?;
            w.flush()?;
        }
        None => fusion_io::write_hypotheses(std::io::stdout().lock(), hyps)?,
    }
    Ok(())
}

fn cmd_decode(a: &DecodeArgs) -> Result<()> {
    if !(a.hop_ms > 0.0) {
        return Err(usage("--hop-ms must be positive"));
    }
    let text = fs::read_to_string(&a.labels).map_err(|e| revfuse::Error::Io {
        path: a.labels.clone(),
        source: e,
    })?;
    let labels = fusion_io::parse_label_map(&text, &a.silence)?;
    let hyps = a
        .inputs
        .par_iter()
        .map(|p| {
            let scores = fusion_io::load_rsc1::<f64>(p)?;
            let mut h = fusion::greedy_decode(&scores, &labels, a.hop_ms)?;
            h.utterance_id = a.utt.clone();
            Ok(h)
        })
        .collect::<revfuse::Result<Vec<_>>>()?;
    write_jsonl(a.out.as_deref(), &hyps)
}

fn read_jsonl(path: &Path) -> revfuse::Result<Vec<WordHypothesis>> {
    let f = fs::File::open(path).map_err(|e| revfuse::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    fusion_io::read_hypotheses(BufReader::new(f))
}

/// Hypotheses grouped by utterance id, groups in first-seen order.
fn group_by_utterance(hyps: Vec<WordHypothesis>) -> Vec<(Option<String>, Vec<WordHypothesis>)> {
    let mut groups: Vec<(Option<String>, Vec<WordHypothesis>)> = Vec::new();
    for h in hyps {
        match groups.iter_mut().find(|(k, _)| *k == h.utterance_id) {
            Some((_, g)) => g.push(h),
            None => groups.push((h.utterance_id.clone(), vec![h])),
        }
    }
    groups
}

fn cmd_rover(a: &RoverArgs) -> Result<()> {
    let params = RoverParams {
        alpha: a.alpha,
        null_confidence: a.null_confidence,
    };
    if !(0.0..=1.0).contains(&a.alpha) || !(0.0..=1.0).contains(&a.null_confidence) {
        return Err(usage("--alpha and --null-confidence must lie in [0, 1]"));
    }
    let mut all = Vec::new();
    for p in &a.inputs {
        all.extend(read_jsonl(p)?);
    }
    let groups = group_by_utterance(all);
    let voted = groups
        .par_iter()
        .map(|(utt, hyps)| {
            let mut out = fusion::rover_combine_with(hyps, &params)?;
            out.utterance_id = utt.clone();
            Ok(out)
        })
        .collect::<revfuse::Result<Vec<_>>>()?;
    write_jsonl(a.out.as_deref(), &voted)
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let refs = eval::load_transcripts(&a.reference)?;
    let is_jsonl = a.hyp.extension().is_some_and(|e| e == "jsonl")
        || fs::read_to_string(&a.hyp).map(|t| t.trim_start().starts_with('{')).unwrap_or(false);
    let mut systems: Vec<(String, Vec<(String, String)>)> = Vec::new();
    if is_jsonl {
        for h in read_jsonl(&a.hyp)? {
            let utt = h
                .utterance_id
                .clone()
                .ok_or_else(|| revfuse::Error::Format {
                    what: "hypothesis",
                    detail: format!("system '{}' hypothesis has no \"utt\" field", h.system_id),
                })?;
            let entry = (utt, h.text());
            match systems.iter_mut().find(|(s, _)| *s == h.system_id) {
                Some((_, v)) => v.push(entry),
                None => systems.push((h.system_id.clone(), vec![entry])),
            }
        }
    } else {
        systems.push(("hyp".into(), eval::load_transcripts(&a.hyp)?));
    }
    if systems.is_empty() {
        bail!(revfuse::Error::EmptyInput(format!("{} has no hypotheses", a.hyp.display())));
    }
    for (system, hyps) in &systems {
        let r = eval::score_transcripts(&refs, hyps)?;
        println!(
            "{system}\tWER {:.2}%\tS={} D={} I={} N={}",
            r.wer_percent, r.substitutions, r.deletions, r.insertions, r.ref_words
        );
    }
    Ok(())
}

fn read_grid(path: &Path) -> Result<ConditionGrid> {
    let mut rdr = csv::Reader::from_path(path).map_err(revfuse::Error::from)?;
    let header = rdr.headers().map_err(revfuse::Error::from)?.clone();
    // a previously exported table carries derived columns; ignore them
    let keep: Vec<usize> = (1..header.len())
        .filter(|&i| !matches!(&header[i], "avg" | "rel_reduction_pct"))
        .collect();
    let mut grid = ConditionGrid::new();
    for rec in rdr.records() {
        let rec = rec.map_err(revfuse::Error::from)?;
        for &i in &keep {
            let v: f64 = rec[i].trim().parse().map_err(|_| revfuse::Error::Format {
                what: "WER grid",
                detail: format!("row '{}', column '{}': '{}' is not a number", &rec[0], &header[i], &rec[i]),
            })?;
            grid.insert(&rec[0], &header[i], v)?;
        }
    }
    Ok(grid)
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let grid = read_grid(&a.grid)?;
    let baseline = match &a.baseline {
        Some(b) => b.clone(),
        None => grid
            .row_labels()
            .next()
            .ok_or_else(|| revfuse::Error::EmptyInput(format!("{} has no rows", a.grid.display())))?
            .to_string(),
    };
    print!("{}", render_report(&grid, &baseline)?);
    if let Some(p) = &a.csv {
        fs::write(p, grid.to_csv(&baseline)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_pipeline(a: &PipelineArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None if a.demo => PipelineConfig::demo(0),
        None => return Err(usage("pipeline needs --config or --demo")),
    };
    if a.demo {
        cfg.synthetic.enabled = true;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(out) = &a.out {
        cfg.paths.out_dir = Some(out.clone());
    }
    let outcome = pipeline::run_pipeline(&cfg)?;
    if let Some(out) = &cfg.paths.out_dir {
        let log = format!("revfuse {}\nsamples per second: {}\n\n{}", revfuse::VERSION, PIPELINE_SAMPLE_RATE_HZ, cfg.to_toml());
        let p = out.join("run.log");
        fs::write(&p, log).with_context(|| format!("writing {}", p.display()))?;
    }
    print!("{}", outcome.report);
    Ok(())
}
