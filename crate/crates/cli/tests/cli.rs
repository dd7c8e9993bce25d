use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use revfuse::features::io::load_rfe1;
use revfuse::fusion::io::{load_rsc1, read_hypotheses, save_rsc1};
use revfuse::fusion::ScoreMatrix;
use revfuse::signal::{wav, AudioBuffer};
use revfuse::Matrix;

fn revfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revfuse"))
        .args(args)
        .env_remove("REVFUSE_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_tone(path: &Path, seconds: f64) {
    let n = (16_000.0 * seconds) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            0.3 * (2.0 * std::f64::consts::PI * 440.0 * t).sin() + 0.1 * (2.0 * std::f64::consts::PI * 1330.0 * t).sin()
        })
        .collect();
    wav::write_pcm16(path, &AudioBuffer::new(samples, 16_000).unwrap()).unwrap();
}

fn write_scores(path: &Path, rows: Vec<Vec<f64>>) {
    save_rsc1(path, &ScoreMatrix::new("s", Matrix::from_rows(rows).unwrap()).unwrap()).unwrap();
}

#[test]
fn help_and_version_succeed_bad_usage_exits_1() {
    assert_eq!(code(&revfuse(&["--help"])), 0);
    assert_eq!(code(&revfuse(&["--version"])), 0);
    assert_eq!(code(&revfuse(&["frobnicate"])), 1);
    assert_eq!(code(&revfuse(&["fuse", "--out", "x.rsc", "--bogus", "a"])), 1);
}

#[test]
fn extract_single_kind_and_all_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let wav_path = dir.path().join("tone.wav");
    write_tone(&wav_path, 0.5);

    let out = dir.path().join("mel");
    let o = revfuse(&["extract", "--kind", "melfb", "--out", p(&out), p(&wav_path)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let feats = load_rfe1::<f32>(out.join("tone.rfe")).unwrap();
    assert_eq!(feats.dim(), 40);

    let out = dir.path().join("all");
    let o = revfuse(&["extract", "--kind", "all", "--out", p(&out), "--jobs", "2", p(&wav_path)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let frames: Vec<usize> = ["melfb", "rplp", "lnfb", "pncc"]
        .iter()
        .map(|k| load_rfe1::<f32>(out.join(format!("tone.{k}.rfe"))).unwrap().num_frames())
        .collect();
    assert!(frames.iter().all(|&f| f == frames[0] && f > 0), "{frames:?}");
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn extract_fails_only_when_every_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.wav");
    write_tone(&good, 0.3);
    let missing = dir.path().join("missing.wav");
    let out = dir.path().join("feats");

    let o = revfuse(&["extract", "--out", p(&out), p(&missing), p(&good)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("good.rfe").exists());

    let o = revfuse(&["extract", "--out", p(&out), p(&missing)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fuse_weights_and_shape_errors() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.rsc");
    let b = dir.path().join("b.rsc");
    let odd = dir.path().join("odd.rsc");
    write_scores(&a, vec![vec![-1.0, -2.0], vec![-3.0, 0.5]]);
    write_scores(&b, vec![vec![-3.0, -4.0], vec![-1.0, 1.5]]);
    write_scores(&odd, vec![vec![-1.0, -2.0, -3.0]]);
    let out = dir.path().join("fused.rsc");

    let o = revfuse(&["fuse", "--out", p(&out), p(&a), p(&a)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(load_rsc1::<f64>(&out).unwrap().scores, load_rsc1::<f64>(&a).unwrap().scores);

    let o = revfuse(&["fuse", "--out", p(&out), p(&a), p(&b)]);
    assert_eq!(code(&o), 0);
    assert_eq!(load_rsc1::<f64>(&out).unwrap().scores.as_slice(), &[-2.0, -3.0, -2.0, 1.0]);

    let o = revfuse(&["fuse", "--weights", "1,0", "--out", p(&out), p(&a), p(&b)]);
    assert_eq!(code(&o), 0);
    assert_eq!(load_rsc1::<f64>(&out).unwrap().scores, load_rsc1::<f64>(&a).unwrap().scores);

    let o = revfuse(&["fuse", "--weights", "0.5", "--out", p(&out), p(&a), p(&b)]);
    assert_eq!(code(&o), 1);

    let o = revfuse(&["fuse", "--out", p(&out), p(&a), p(&odd)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("odd.rsc"), "{}", stderr(&o));
}

#[test]
fn decode_vote_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.txt");
    std::fs::write(&labels, "0 sil\n1 a\n2 b\n3 c\n").unwrap();
    let hot = |states: &[usize]| -> Vec<Vec<f64>> {
        states.iter().map(|&s| (0..4).map(|k| if k == s { 0.0 } else { -6.0 }).collect()).collect()
    };
    let files: Vec<PathBuf> = [
        ("s1", vec![0, 1, 1, 2, 2, 3, 0]),
        ("s2", vec![0, 1, 1, 2, 2, 3, 0]),
        ("s3", vec![0, 1, 1, 1, 0, 3, 0]),
    ]
    .into_iter()
    .map(|(name, states)| {
        let f = dir.path().join(format!("{name}.rsc"));
        write_scores(&f, hot(&states));
        f
    })
    .collect();

    let hyps = dir.path().join("hyps.jsonl");
    let mut args = vec!["decode", "--labels", p(&labels), "--utt", "u1", "--out", p(&hyps)];
    args.extend(files.iter().map(|f| p(f)));
    let o = revfuse(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let decoded = read_hypotheses(std::fs::read(&hyps).unwrap().as_slice()).unwrap();
    assert_eq!(decoded.iter().map(|h| h.text()).collect::<Vec<_>>(), ["a b c", "a b c", "a c"]);
    assert_eq!(decoded[0].system_id, "s1");

    let voted = dir.path().join("rover.jsonl");
    let o = revfuse(&["rover", "--out", p(&voted), p(&hyps)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = read_hypotheses(std::fs::read(&voted).unwrap().as_slice()).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].text(), "a b c");
    assert_eq!(out[0].utterance_id.as_deref(), Some("u1"));

    let refs = dir.path().join("ref.txt");
    std::fs::write(&refs, "u1 A B C\n").unwrap();
    let o = revfuse(&["score", "--ref", p(&refs), "--hyp", p(&hyps)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("s1\tWER 0.00%"), "{text}");
    assert!(text.contains("s3\tWER 33.33%\tS=0 D=1 I=0 N=3"), "{text}");

    let plain = dir.path().join("hyp.txt");
    std::fs::write(&plain, "u1 a x c\n").unwrap();
    let o = revfuse(&["score", "--ref", p(&refs), "--hyp", p(&plain)]);
    assert!(stdout(&o).contains("WER 33.33%\tS=1"), "{}", stdout(&o));

    let o = revfuse(&["rover", p(&dir.path().join("nope.jsonl"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_reproduces_table_averages() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    std::fs::write(
        &grid,
        "system,0.47,0.84,1.27,1.77\nMelFB,3.35,4.78,6.61,9.22\nLNFB,3.68,5.15,6.70,9.64\nPNCC,3.40,5.04,6.64,9.44\nRPLP,4.33,6.78,8.62,11.92\n",
    )
    .unwrap();
    let csv_out = dir.path().join("table.csv");
    let o = revfuse(&["report", "--grid", p(&grid), "--csv", p(&csv_out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    for (row, avg) in [("MelFB", "5.99"), ("LNFB", "6.29"), ("PNCC", "6.13"), ("RPLP", "7.91")] {
        let line = text.lines().find(|l| l.starts_with(row)).unwrap();
        assert!(line.contains(avg), "{line}");
    }
    // an exported table can be fed back in
    let o2 = revfuse(&["report", "--grid", p(&csv_out)]);
    assert_eq!(stdout(&o2), text);

    std::fs::write(&grid, "system,a,b\nx,1,2\ny,1,\n").unwrap();
    assert_eq!(code(&revfuse(&["report", "--grid", p(&grid)])), 2);
}

#[test]
fn pipeline_demo_is_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = revfuse(&["pipeline", "--demo", "--seed", "5", "--jobs", "1"]);
    let b = revfuse(&["pipeline", "--demo", "--seed", "5", "--jobs", "4"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    for row in ["melfb", "lnfb", "pncc", "rplp", "fusion", "rover", "cascade"] {
        assert!(stdout(&a).lines().any(|l| l.starts_with(row)), "missing {row}");
    }

    let env_seed = Command::new(env!("CARGO_BIN_EXE_revfuse"))
        .args(["pipeline", "--demo"])
        .env("REVFUSE_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(env_seed.stdout, a.stdout);
    let overridden = Command::new(env!("CARGO_BIN_EXE_revfuse"))
        .args(["pipeline", "--demo", "--seed", "5"])
        .env("REVFUSE_SEED", "6")
        .output()
        .unwrap();
    assert_eq!(overridden.stdout, a.stdout);

    let out = dir.path().join("run");
    let o = revfuse(&["pipeline", "--demo", "--seed", "5", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(out.join("report.txt")).unwrap(), a.stdout);
    let log = std::fs::read_to_string(out.join("run.log")).unwrap();
    assert!(log.contains(revfuse::VERSION) && log.contains("seed = 5"), "{log}");
    assert!(out.join("hypotheses.jsonl").exists() && out.join("report.csv").exists());
}

#[test]
fn pipeline_without_scores_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "seed = 1\n").unwrap();
    let o = revfuse(&["pipeline", "--config", p(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("scores unavailable"), "{}", stderr(&o));
    assert_eq!(code(&revfuse(&["pipeline"])), 1);
}

#[test]
fn rir_catalog_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let protocol = dir.path().join("protocol.toml");
    std::fs::write(&protocol, "rt_range_s = [0.4, 0.45]\n").unwrap();
    let run = |seed: &str, out: &Path| revfuse(&["rir", "--seed", seed, "--count", "2", "--protocol", p(&protocol), "--out", p(out)]);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(code(&run("9", &a)), 0);
    assert_eq!(code(&run("9", &b)), 0);
    assert_eq!(code(&run("10", &c)), 0);
    let bytes = |d: &Path| std::fs::read(d.join("rir_00001.wav")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));
    let catalog = std::fs::read_to_string(a.join("rirs.csv")).unwrap();
    assert_eq!(catalog.lines().count(), 3);
    let rir = wav::read_f32::<f64>(a.join("rir_00000.wav")).unwrap();
    assert_eq!(rir.sample_rate_hz(), 16_000);

    assert_eq!(code(&revfuse(&["rir", "--count", "0", "--out", p(&a)])), 1);
}

#[test]
fn augment_plans_then_executes() {
    let dir = tempfile::tempdir().unwrap();
    write_tone(&dir.path().join("u1.wav"), 0.4);
    write_tone(&dir.path().join("u2.wav"), 0.4);
    let list = dir.path().join("inputs.txt");
    std::fs::write(&list, "u1 u1.wav\nu2 u2.wav\n").unwrap();
    let protocol = dir.path().join("protocol.toml");
    std::fs::write(&protocol, "rt_range_s = [0.4, 0.45]\ncatalog_size = 50\n").unwrap();
    let manifest = dir.path().join("manifest.csv");
    let out = dir.path().join("aug");

    let o = revfuse(&[
        "augment", "--manifest", p(&manifest), "--protocol", p(&protocol), "--inputs", p(&list), "--out", p(&out),
        "--plan-only", "--seed", "4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let planned = std::fs::read_to_string(&manifest).unwrap();
    assert_eq!(planned.lines().count(), 1 + 8);
    assert_eq!(planned.lines().filter(|l| l.contains(",clean,")).count(), 2);
    assert!(!out.exists());

    let o = revfuse(&["augment", "--manifest", p(&manifest), "--protocol", p(&protocol), "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("u1.wav").exists() && out.join("u2_rev3.wav").exists());
    let executed = std::fs::read_to_string(&manifest).unwrap();
    let header: Vec<&str> = executed.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "achieved_rt60_s").unwrap();
    let filled = executed.lines().skip(1).filter(|l| !l.split(',').nth(col).unwrap().is_empty()).count();
    assert_eq!(filled, 6);
}
