"""Smoke test for the aedet Python extension.

Build and run:
    cargo build --release -p aedet-py --features extension-module
    cp target/release/libaedet.so python/aedet.so   # aedet.pyd / libaedet.dylib elsewhere
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import aedet  # noqa: E402


def tone(freq, seconds=1.0, fs=8000):
    return [0.5 * math.sin(2 * math.pi * freq * i / fs) for i in range(int(seconds * fs))]


def check_primitives():
    rows, freqs, rate = aedet.stft(tone(1000.0), 8000, 256)
    col = [r[0] for r in rows]
    assert col.index(max(col)) == 63, "1000 Hz should peak at bin 63"
    assert rate == 31.25 and len(freqs) == 256

    rows, freqs, _ = aedet.cwt(tone(650.0), 8000, 64, 100.0, 2000.0)
    mean = [sum(r) / len(r) for r in rows]
    peak = freqs[mean.index(max(mean))]
    assert abs(peak - 650.0) < 60.0, peak

    assert aedet.bump_wavelet(5.0) == 1.0
    assert len(aedet.extract_features(tone(440.0))[0]) == 304

    scores, labels = [0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]
    assert aedet.roc_area(scores, labels) == 1.0
    assert aedet.pr_area(scores, labels) == 1.0
    assert aedet.evaluate_scores(scores, labels)["f1"] == 1.0
    assert aedet.median_filter([0.0, 1.0, 0.0, 0.0], 3) == [0.0, 0.0, 0.0, 0.0]


def check_pipeline(out):
    overrides = [
        f'paths.out_dir="{out}"',
        "synth.n_recordings=8",
        "synth.duration_s=4.0",
        "split.n_train=5",
        "split.n_test=3",
        "model.k=3",
        "model.n_k=4",
        "model.n_d=8",
        "train.max_epochs=3",
        "crossval.folds=2",
    ]
    cfg = aedet.Config(None, overrides)
    assert aedet.Config(cfg.to_toml()) == cfg
    assert cfg.model_name == "cnn_cwt"

    aedet.synth(cfg)
    summary = aedet.train(cfg)
    assert 1 <= len(summary["history"]) <= 3

    report = aedet.evaluate(cfg)
    for key in ("raw", "filtered"):
        assert 0.0 <= report[key]["pr_area"] <= 1.0

    model = aedet.Model.load(summary["model_path"])
    scores, rate = model.score(tone(650.0, 2.0), 8000)
    assert rate == 3.125 and all(0.0 <= s <= 1.0 for s in scores)

    wav = os.path.join(out, "corpus", "synth_000.wav")
    preds = aedet.predict(cfg, [wav])
    assert list(preds) == ["synth_000"]

    spectra = aedet.visualize(cfg)
    assert len(spectra["freq_hz"]) == 256

    best, grid = aedet.crossval(cfg.with_overrides(['crossval.points=["k=2,n_k=8,n_d=16"]']))
    assert best == "k=2,n_k=8,n_d=16" and len(grid) == 1

    try:
        aedet.Config(None, ["train.max_epochs=50"]).validate()
    except aedet.ConfigError:
        pass
    else:
        raise AssertionError("max_epochs > 20 must be a ConfigError")
    try:
        aedet.Model.load(os.path.join(out, "missing.model"))
    except aedet.DataError:
        pass
    else:
        raise AssertionError("missing model must be a DataError")


if __name__ == "__main__":
    check_primitives()
    with tempfile.TemporaryDirectory() as d:
        check_pipeline(d)
    print("smoke test passed")
