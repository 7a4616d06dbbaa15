use std::path::Path;
use std::process::{Command, Output};

fn attnrec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attnrec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

/// Small dataset plus a short training run, for the commands that need one.
fn small_run(dir: &Path) {
    let out = attnrec(
        &[
            "synth",
            "--out-dir",
            "data",
            "--grid",
            "3",
            "--feat-dim",
            "4",
            "--classes",
            "3",
            "--clip-len",
            "8",
            "--train-clips",
            "6",
            "--test-clips",
            "3",
            "--seed",
            "2",
        ],
        dir,
    );
    assert!(out.status.success(), "{}", text(&out));
    let out = attnrec(
        &[
            "train",
            "--data",
            "data/manifest.tsv",
            "--out-dir",
            "run",
            "--block-len",
            "6",
            "--hidden-dim",
            "5",
            "--layers",
            "2",
            "--epochs",
            "2",
            "--batch-size",
            "4",
        ],
        dir,
    );
    assert!(out.status.success(), "{}", text(&out));
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = attnrec(&[], dir.path());
    assert!(!out.status.success());
    assert!(text(&out).contains("Usage: attnrec <COMMAND>"));
}

#[test]
fn help_shows_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = attnrec(&["train", "--help"], dir.path());
    assert!(out.status.success());
    let help = text(&out);
    for flag in [
        "--lambda",
        "--gamma",
        "--epochs",
        "--fps-step",
        "--block-len",
        "--stride",
        "--layers",
        "--hidden-dim",
    ] {
        assert!(help.contains(flag), "{flag} missing");
    }
    assert!(help.contains("[default: 30]"));
    assert!(help.contains("[default: 15]"));
}

#[test]
fn synth_train_eval_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = attnrec(&["synth", "--out-dir", "data"], d);
    assert!(out.status.success(), "{}", text(&out));
    assert!(d.join("data/manifest.tsv").exists());
    assert!(d.join("data/test_0059.fcub").exists());

    let out = attnrec(
        &["train", "--data", "data/manifest.tsv", "--out-dir", "run"],
        d,
    );
    assert!(out.status.success(), "{}", text(&out));
    assert!(d.join("run/model.grnn").exists());
    let curve = std::fs::read_to_string(d.join("run/loss_curve.tsv")).unwrap();
    assert_eq!(curve.lines().count(), 16);

    let out = attnrec(
        &[
            "eval",
            "--data",
            "data/manifest.tsv",
            "--checkpoint",
            "run/model.grnn",
            "--out-dir",
            "eval",
        ],
        d,
    );
    assert!(out.status.success(), "{}", text(&out));
    let report = std::fs::read_to_string(d.join("eval/report.txt")).unwrap();
    assert!(report.starts_with("clips\t60\naccuracy\t"));
    let scores = std::fs::read_to_string(d.join("eval/scores.tsv")).unwrap();
    assert_eq!(scores.lines().count(), 61);
    for sub in ["data", "run", "eval"] {
        assert!(d.join(sub).join("resolved_config.txt").exists());
    }
}

#[test]
fn gradcheck_passes_and_fails_by_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = attnrec(&["gradcheck"], dir.path());
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).contains("max relative error"));

    let out = attnrec(
        &[
            "gradcheck",
            "--eps",
            "0.1",
            "--tolerance",
            "1e-9",
            "--trials",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4), "{}", text(&out));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d);
    let out = attnrec(
        &[
            "train",
            "--config",
            "run/resolved_config.txt",
            "--out-dir",
            "again",
        ],
        d,
    );
    assert!(out.status.success(), "{}", text(&out));
    for file in ["model.grnn", "loss_curve.tsv"] {
        let a = std::fs::read(d.join("run").join(file)).unwrap();
        let b = std::fs::read(d.join("again").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d);
    std::fs::write(
        d.join("c.cfg"),
        "# small\nepochs = 1\nhidden_dim=3\nblock-len=6\n",
    )
    .unwrap();
    let out = attnrec(
        &[
            "train",
            "--config",
            "c.cfg",
            "--data",
            "data/manifest.tsv",
            "--out-dir",
            "r",
            "--epochs",
            "3",
        ],
        d,
    );
    assert!(out.status.success(), "{}", text(&out));
    let echo = std::fs::read_to_string(d.join("r/resolved_config.txt")).unwrap();
    assert!(echo.contains("epochs=3\n"));
    assert!(echo.contains("hidden-dim=3\n"));
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d);

    std::fs::write(d.join("bad.cfg"), "epochs=1\nlearning_speed=3\n").unwrap();
    let out = attnrec(
        &[
            "train",
            "--config",
            "bad.cfg",
            "--data",
            "data/manifest.tsv",
            "--out-dir",
            "x",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));

    let out = attnrec(
        &[
            "train",
            "--data",
            "data/manifest.tsv",
            "--out-dir",
            "x",
            "--frobnicate",
            "1",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2));

    let out = attnrec(
        &[
            "train",
            "--data",
            "data/manifest.tsv",
            "--out-dir",
            "x",
            "--block-len",
            "6",
            "--dropout",
            "1.5",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));

    let out = attnrec(
        &["train", "--data", "nowhere/manifest.tsv", "--out-dir", "x"],
        d,
    );
    assert_eq!(out.status.code(), Some(5), "{}", text(&out));

    let cube = d.join("data/test_0000.fcub");
    let mut bytes = std::fs::read(&cube).unwrap();
    bytes[40] ^= 0xff;
    std::fs::write(&cube, bytes).unwrap();
    let out = attnrec(
        &[
            "eval",
            "--data",
            "data/manifest.tsv",
            "--checkpoint",
            "run/model.grnn",
            "--out-dir",
            "e",
            "--block-len",
            "6",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(3), "{}", text(&out));
    assert!(text(&out).contains("crc mismatch"), "{}", text(&out));
}

fn check_pgm(path: &Path, side: usize) {
    let bytes = std::fs::read(path).unwrap();
    let header = format!("P5\n{side} {side}\n255\n");
    assert!(bytes.starts_with(header.as_bytes()));
    assert_eq!(bytes.len(), header.len() + side * side);
    assert!(bytes[header.len()..].contains(&255));
}

#[test]
fn viz_and_reglimpse_write_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d);
    let out = attnrec(
        &[
            "viz",
            "--checkpoint",
            "run/model.grnn",
            "--clip",
            "data/test_0001.fcub",
            "--out-dir",
            "viz",
            "--block-len",
            "6",
            "--upsample",
            "5",
        ],
        d,
    );
    assert!(out.status.success(), "{}", text(&out));
    // 8 frames, 6-frame blocks at stride 1: three blocks of six steps.
    check_pgm(&d.join("viz/block002_step005.pgm"), 15);
    let grid = std::fs::read_to_string(d.join("viz/block000_step000.tsv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert!(grid.lines().all(|l| l.split('\t').count() == 3));

    let out = attnrec(
        &[
            "reglimpse",
            "--checkpoint",
            "run/model.grnn",
            "--clip",
            "data/test_0001.fcub",
            "--out-dir",
            "rg",
            "--block-len",
            "6",
            "--steps",
            "5",
            "--upsample",
            "2",
        ],
        d,
    );
    assert!(out.status.success(), "{}", text(&out));
    check_pgm(&d.join("rg/before/block000_step000.pgm"), 6);
    check_pgm(&d.join("rg/after/block000_step000.pgm"), 6);
    let losses = std::fs::read_to_string(d.join("rg/losses.tsv")).unwrap();
    assert_eq!(losses.lines().count(), 7);
    assert!(d.join("rg/glimpse.grnn").exists());

    let out = attnrec(
        &[
            "train",
            "--data",
            "data/manifest.tsv",
            "--out-dir",
            "avg",
            "--model",
            "avg_pool",
            "--block-len",
            "6",
            "--hidden-dim",
            "3",
            "--layers",
            "1",
            "--epochs",
            "1",
        ],
        d,
    );
    assert!(out.status.success(), "{}", text(&out));
    let out = attnrec(
        &[
            "viz",
            "--checkpoint",
            "avg/model.grnn",
            "--clip",
            "data/test_0001.fcub",
            "--out-dir",
            "v2",
            "--block-len",
            "6",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
}
