use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn acube(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acube")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn golden(name: &str) -> PathBuf {
    repo().join("crates/core/tests/golden/ref").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains a two-iteration denoiser on two golden crops; returns `(dir, checkpoint)`.
fn tiny_checkpoint() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    for name in ["camera.pgm", "moon.pgm"] {
        fs::copy(golden(name), data.join(name)).unwrap();
    }
    let cfg = dir.path().join("tiny.cfg");
    fs::write(
        &cfg,
        "task = denoise\nsigma = 25\nchannels = 4\ngroups = 1\nunits = 1\nreduction = 2\nmax_iters = 2\nbatch = 1\npatch = 16\nlog_every = 1\n",
    )
    .unwrap();
    let ckpt = dir.path().join("tiny.ckpt");
    let out = acube(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&ckpt)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = stdout(&out);
    let iters: Vec<_> = log.lines().filter(|l| l.starts_with("iter=")).collect();
    assert_eq!(iters.len(), 2, "{log}");
    assert!(iters[1].starts_with("iter=2 lr=2e-4 loss="), "{log}");
    (dir, ckpt)
}

#[test]
fn params_prints_exact_and_rounded_counts() {
    let cfg = repo().join("configs/ablation_baseline.cfg");
    let out = acube(&["params", "--config", s(&cfg)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1369859 (1370K)");
}

#[test]
fn gradcheck_passes_on_the_tiny_config() {
    let cfg = repo().join("configs/tiny.cfg");
    let out = acube(&["gradcheck", "--config", s(&cfg), "--size", "6"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    let err: f64 = text.trim().strip_prefix("max_rel_error=").unwrap().parse().unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn train_eval_and_infer_round_trip() {
    let (dir, ckpt) = tiny_checkpoint();
    let data = dir.path().join("data");

    let table = dir.path().join("metrics.tsv");
    let out = acube(&[
        "eval", "--ckpt", s(&ckpt), "--data", s(&data), "--task", "denoise", "--sigma", "25", "--table", s(&table),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tsv = fs::read_to_string(&table).unwrap();
    assert_eq!(tsv, stdout(&out));
    let lines: Vec<_> = tsv.lines().collect();
    assert_eq!(lines[0], "image\tinput_psnr\tpsnr\tssim");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("camera.pgm\t"), "{tsv}");
    assert!(lines[3].starts_with("mean\t"));
    assert!(lines.iter().skip(1).all(|l| l.split('\t').count() == 4));

    // the denoiser cannot run on a JPEG task
    let out = acube(&["eval", "--ckpt", s(&ckpt), "--data", s(&data), "--task", "deblock", "--quality", "10"]);
    assert!(!out.status.success());

    let restored = dir.path().join("restored.pgm");
    let out = acube(&["infer", "--ckpt", s(&ckpt), "--in", s(&golden("coins.pgm")), "--out", s(&restored)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = fs::read(&restored).unwrap();
    assert!(bytes.starts_with(b"P5\n64 64\n255\n"), "{:?}", &bytes[..16]);
    assert_eq!(bytes.len(), 13 + 64 * 64);

    let resumed = dir.path().join("resumed.ckpt");
    let cfg = dir.path().join("tiny.cfg");
    let out = acube(&[
        "train", "--config", s(&cfg), "--data", s(&data), "--out", s(&resumed), "--resume", s(&ckpt),
    ]);
    // already at max_iters: nothing to do, checkpoint unchanged
    assert!(out.status.success());
    assert_eq!(fs::read(&resumed).unwrap(), fs::read(&ckpt).unwrap());
}

#[test]
fn degrade_writes_deterministic_images() {
    let dir = tempfile::tempdir().unwrap();
    let input = golden("camera.pgm");
    for (spec, side) in [("awgn:30,seed=4", 64), ("jpeg:10", 64), ("bicubic_down:2", 32)] {
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        for p in [&a, &b] {
            let out = acube(&["degrade", "--in", s(&input), "--out", s(p), "--spec", spec]);
            assert!(out.status.success(), "{spec}: {}", String::from_utf8_lossy(&out.stderr));
        }
        let bytes = fs::read(&a).unwrap();
        assert_eq!(bytes, fs::read(&b).unwrap(), "{spec}");
        let header = format!("P5\n{side} {side}\n255\n");
        assert!(bytes.starts_with(header.as_bytes()), "{spec}");
        assert_ne!(bytes, fs::read(&input).unwrap(), "{spec}");
    }
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.cfg");
    fs::write(&bad_cfg, "task = denoise\ncolour = 3\n").unwrap();
    let input = golden("camera.pgm");
    let missing = dir.path().join("missing.ckpt");
    let garbage = dir.path().join("garbage.ckpt");
    fs::write(&garbage, b"not a checkpoint").unwrap();
    let out_path = dir.path().join("o.pgm");

    for args in [
        vec!["params", "--config", s(&bad_cfg)],
        vec!["params"],
        vec!["frobnicate"],
        vec!["degrade", "--in", s(&input), "--out", s(&out_path), "--spec", "blur:3"],
        vec!["degrade", "--in", s(&input), "--out", s(&out_path), "--spec", "jpeg:0"],
        vec!["infer", "--ckpt", s(&missing), "--in", s(&input), "--out", s(&out_path)],
        vec!["infer", "--ckpt", s(&garbage), "--in", s(&input), "--out", s(&out_path)],
        vec!["eval", "--ckpt", s(&garbage), "--data", s(&input), "--task", "denoise"],
    ] {
        let out = acube(&args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    assert!(!out_path.exists());
}
