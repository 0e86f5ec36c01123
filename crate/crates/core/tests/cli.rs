//! End-to-end runs of the `beatgen` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use beatgen::dataset::{save_beats_csv, ClassLabel};
use beatgen::evaluation::EvaluationReport;
use beatgen::models::load_checkpoint;
use beatgen::synth::{synth_two_class, SynthConfig};

fn beatgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beatgen"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn beatgen")
}

fn ok(args: &[&str]) -> String {
    let out = beatgen(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn err_code(args: &[&str]) -> String {
    let out = beatgen(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8(out.stderr).unwrap();
    stderr.split(':').next().unwrap_or_default().trim().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Raw two-class CSV plus an ingested normal-beat directory.
fn fixture(dir: &Path) {
    let raw = synth_two_class((ClassLabel::L, 60), (ClassLabel::N, 60), &SynthConfig::default(), 5).unwrap();
    save_beats_csv(dir.join("raw.csv"), &raw).unwrap();
    let manifest = ok(&[
        "ingest", "--input", p(&dir.join("raw.csv")), "--class", "N", "--out", p(&dir.join("normal")),
    ]);
    assert!(manifest.contains("beat_length"), "{manifest}");
    ok(&["ingest", "--input", p(&dir.join("raw.csv")), "--out", p(&dir.join("all"))]);
}

#[test]
fn classic_run_directory_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixture(d);
    let run = d.join("runs/c7");
    ok(&["train", "--model", "classic", "--data", p(&d.join("normal")), "--seed", "7", "--out", p(&run)]);
    let losses = fs::read_to_string(run.join("losses.csv")).unwrap();
    assert_eq!(losses.lines().count(), 31, "header plus 30 epochs");
    assert_eq!(fs::read_dir(run.join("snapshots")).unwrap().count(), 30);
    assert!(run.join("checkpoints/epoch_030.ckpt").exists());
    assert!(run.join("curve.csv").exists());
    let ckpt = load_checkpoint(run.join("final.ckpt")).unwrap();
    assert_eq!((ckpt.epoch, ckpt.config.batch_size, ckpt.config.latent_dim), (30, 9, 100));
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(config["config_hash"], summary["config_hash"]);
    assert_eq!(summary["seed"], 7);

    // evaluate the snapshots directory with the default threshold
    let eval = d.join("eval");
    ok(&[
        "evaluate", "--method", "4", "--metric", "dtw", "--gen", p(&run.join("snapshots")), "--real",
        p(&d.join("normal")), "--template", "random", "--seed", "3", "--out", p(&eval),
    ]);
    let report = EvaluationReport::from_json(&fs::read_to_string(eval.join("method4_dtw.json")).unwrap()).unwrap();
    assert_eq!(report.n_gen, 300);
    assert!(report.score > 0.0 && report.threshold.is_some());
    assert!(eval.join("method4_dtw.txt").exists());

    // a second method-4 run can reuse that threshold
    let again = d.join("eval2");
    ok(&[
        "evaluate", "--method", "4", "--metric", "dtw", "--gen", p(&run.join("final.ckpt")), "--n-gen", "50",
        "--real", p(&d.join("normal")), "--calibration", p(&eval.join("method4_dtw.json")), "--out", p(&again),
    ]);
    let reused = EvaluationReport::from_json(&fs::read_to_string(again.join("method4_dtw.json")).unwrap()).unwrap();
    assert_eq!(reused.threshold, report.threshold);
    assert_eq!(reused.n_gen, 50);

    ok(&[
        "evaluate", "--method", "3", "--metric", "frechet", "--gen", p(&run.join("snapshots")), "--template",
        "sab", "--real", p(&d.join("normal")), "--out", p(&eval),
    ]);
    let best = EvaluationReport::from_json(&fs::read_to_string(eval.join("method3_frechet.json")).unwrap()).unwrap();
    assert!(best.best_index.is_some());

    ok(&["plot", "curve", "--input", p(&run.join("curve.csv")), "--out", p(&d.join("fig"))]);
    ok(&[
        "plot", "best", "--gen", p(&run.join("final.ckpt")), "--n-gen", "20", "--real", p(&d.join("normal")),
        "--out", p(&d.join("fig")),
    ]);
    for f in ["curve.svg", "curve.csv", "best_dtw.svg", "best_frechet.svg", "best_euclid.svg", "best_dtw.csv"] {
        assert!(d.join("fig").join(f).exists(), "{f}");
    }
}

#[test]
fn wgan_critic_weights_are_clipped() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixture(d);
    let run = d.join("w");
    ok(&[
        "train", "--model", "wgan-fc", "--data", p(&d.join("normal")), "--epochs", "2", "--clip", "0.01",
        "--n-critic", "5", "--out", p(&run),
    ]);
    let ckpt = load_checkpoint(run.join("final.ckpt")).unwrap();
    assert!(ckpt.model.discriminator.max_abs_param() <= 0.01);
}

#[test]
fn generate_experiment_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixture(d);
    let run = d.join("run");
    let normal = d.join("normal");
    let train = ["train", "--model", "vaegan", "--data", p(&normal), "--epochs", "2", "--out", p(&run)];
    ok(&train);
    assert_eq!(err_code(&train), "RUN_DIR_NOT_EMPTY");
    let mut forced = train.to_vec();
    forced.push("--force");
    ok(&forced);

    let gen = d.join("gen.csv");
    ok(&["generate", "--ckpt", p(&run.join("final.ckpt")), "--n", "25", "--seed", "4", "--out", p(&gen)]);
    let rows = fs::read_to_string(&gen).unwrap();
    assert_eq!(rows.lines().count(), 25);
    assert!(rows.lines().all(|l| l.starts_with("G,")));

    let exp = d.join("exp");
    let summary = ok(&[
        "experiment", "--data", p(&d.join("all")), "--majority", "L", "--minority", "N", "--balanced-count", "30",
        "--minority-count", "6", "--test-count", "20", "--gen-ckpt", p(&run.join("final.ckpt")), "--out", p(&exp),
    ]);
    for s in ["balanced", "imbalanced", "augmented"] {
        assert!(summary.contains(s), "{summary}");
    }
    assert!(exp.join("summary.json").exists() && exp.join("summary.txt").exists());

    assert_eq!(
        err_code(&[
            "experiment", "--data", p(&d.join("all")), "--gen-ckpt", p(&d.join("missing.ckpt")), "--balanced-count",
            "30", "--minority-count", "6", "--test-count", "20",
        ]),
        "FILE_NOT_FOUND"
    );

    let mut bytes = fs::read(run.join("final.ckpt")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let bad = d.join("bad.ckpt");
    fs::write(&bad, bytes).unwrap();
    assert_eq!(
        err_code(&["generate", "--ckpt", p(&bad), "--n", "3", "--out", p(&d.join("x.csv"))]),
        "CHECKSUM_MISMATCH"
    );
    assert_eq!(
        err_code(&["evaluate", "--method", "1", "--gen", p(&gen)]),
        "USAGE"
    );
    assert_eq!(
        err_code(&["evaluate", "--method", "1", "--gen", p(&gen), "--real", p(&d.join("normal")), "--sample", "500"]),
        "SAMPLE_TOO_LARGE"
    );
}

#[test]
fn run_root_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fixture(d);
    let out = Command::new(env!("CARGO_BIN_EXE_beatgen"))
        .args(["train", "--data", p(&d.join("normal")), "--epochs", "1", "--seed", "3"])
        .env("BEATGEN_RUN_ROOT", d.join("root"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("root/classic-seed3/final.ckpt").exists());
}

#[test]
fn help_lists_defaults() {
    let train = ok(&["train", "--help"]);
    for needle in ["[default: 30]", "[default: 9]", "[default: 0.0002]", "[default: 0.5]", "[default: 0.999]"] {
        assert!(train.contains(needle), "{needle}");
    }
    let eval = ok(&["evaluate", "--help"]);
    assert!(eval.contains("[default: 300]") && eval.contains("[default: dtw]"));
    let exp = ok(&["experiment", "--help"]);
    assert!(exp.contains("[default: 500]"));
    for cmd in ["ingest", "generate", "plot"] {
        ok(&[cmd, "--help"]);
    }
}
