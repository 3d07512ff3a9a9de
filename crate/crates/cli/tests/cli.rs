use std::path::Path;
use std::process::{Command, Output};

fn aedet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aedet")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(
        &p,
        "[synth]\nn_recordings = 6\nduration_s = 4.0\n\n[split]\nn_train = 4\nn_test = 2\n\n\
         [model]\nk = 3\nn_k = 4\nn_d = 8\n\n[train]\nmax_epochs = 2\n",
    )
    .unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_and_version_succeed() {
    let o = aedet(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["synth", "train", "eval", "predict", "crossval", "visualize"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert_eq!(code(&aedet(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&aedet(&[])), 2);
    assert_eq!(code(&aedet(&["frobnicate"])), 2);
    assert_eq!(code(&aedet(&["synth", "--seed", "minus-one"])), 2);
}

#[test]
fn config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    assert_eq!(code(&aedet(&["synth", "--config", "/nonexistent/config.toml", "--out", out])), 2);
    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nfamily = \"transformer\"\n").unwrap();
    assert_eq!(code(&aedet(&["synth", "--config", bad.to_str().unwrap(), "--out", out])), 2);
    assert_eq!(code(&aedet(&["train", "--family", "gbm", "--out", out])), 2);
    assert_eq!(code(&aedet(&["synth", "--set", "train.max_epochs=99", "--out", out])), 2);
    assert_eq!(code(&aedet(&["eval", "--split", "validation", "--out", out])), 2);
}

#[test]
fn data_errors_exit_3() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    assert_eq!(code(&aedet(&["train", "--out", out])), 3);
    let junk = d.path().join("junk.wav");
    std::fs::write(&junk, b"not a wav").unwrap();
    let cfg = small_config(d.path());
    assert_eq!(code(&aedet(&["--config", &cfg, "synth", "--out", out])), 0);
    assert_eq!(code(&aedet(&["--config", &cfg, "train", "--out", out])), 0);
    assert_eq!(code(&aedet(&["--config", &cfg, "predict", "--out", out, junk.to_str().unwrap()])), 3);
}

#[test]
fn small_pipeline_end_to_end() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let out_s = out.to_str().unwrap();
    let cfg = small_config(d.path());
    for cmd in [vec!["synth"], vec!["train"], vec!["eval"], vec!["eval", "--split", "train"], vec!["visualize"]] {
        let mut args = vec!["--config", cfg.as_str(), "--seed", "3", "--out", out_s];
        args.extend(cmd.iter().copied());
        let o = aedet(&args);
        assert_eq!(code(&o), 0, "{cmd:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let wav = out.join("corpus/synth_000.wav");
    let o = aedet(&["--config", &cfg, "--seed", "3", "--out", out_s, "predict", wav.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "models/cnn_cwt.model",
        "reports/cnn_cwt_test.csv",
        "reports/cnn_cwt_train.csv",
        "reports/predictions_cnn_cwt.csv",
        "spectra/cnn_cwt_spectra.csv",
        "run_manifest.toml",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest = std::fs::read_to_string(out.join("run_manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 3"));
}
