import json
import os

import numpy as np
import pytest

from faeduq.cli import load_config_file, main
from faeduq.data import load_dataset_dir, synth_dataset, save_dataset_dir
from faeduq.errors import ConfigError, DataError
from faeduq.harness import (
    ExperimentConfig,
    SweepSpec,
    cmd_embed,
    cmd_metrics,
    cmd_sweep,
    cmd_train,
    read_embeddings,
    write_embeddings,
)
from faeduq.metrics import EmbeddingTensor
from faeduq.nn import ArchitectureConfig, TrainConfig

DESK_ARCH = dict(
    input_side=16, input_channels=3, encoder_channels=(4, 8), kernel=4,
    stride=2, latent_dim=8, dropout_rate=0.1,
)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic datasets plus one trained checkpoint, built once."""
    root = tmp_path_factory.mktemp("ws")
    blobs = root / "blobs"
    stripes = root / "stripes"
    save_dataset_dir(synth_dataset("blobs", 48, 16, seed=1), str(blobs))
    save_dataset_dir(synth_dataset("stripes", 16, 16, seed=2), str(stripes))
    ckpt = root / "model.ckpt"
    cmd_train(
        ExperimentConfig(
            arch=ArchitectureConfig(**DESK_ARCH),
            train=TrainConfig(epochs=2, batch_size=16, seed=5),
            train_data=str(blobs),
            out_checkpoint=str(ckpt),
            verbose=False,
        )
    )
    return root


# -- file formats -----------------------------------------------------------


def test_embedding_file_round_trip(tmp_path):
    rs = np.random.RandomState(0)
    t = EmbeddingTensor(rs.randn(5, 3, 4), seed=123456789)
    path = str(tmp_path / "t.emb")
    write_embeddings(path, t)
    back = read_embeddings(path)
    assert np.array_equal(back.data, t.data)
    assert back.seed == 123456789


def test_embedding_file_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.emb"
    p.write_bytes(b"WRONGMAG" + bytes(32))
    with pytest.raises(DataError):
        read_embeddings(str(p))


def test_embedding_file_rejects_truncation(tmp_path):
    rs = np.random.RandomState(1)
    path = str(tmp_path / "t.emb")
    write_embeddings(path, EmbeddingTensor(rs.randn(4, 2, 3)))
    with open(path, "rb") as f:
        blob = f.read()
    with open(path, "wb") as f:
        f.write(blob[:-8])
    with pytest.raises(DataError):
        read_embeddings(path)


def test_config_file_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nepochs = 7\nlatent-dim = 16  # inline\n\nseed=3\n")
    values = load_config_file(str(cfg))
    assert values == {"epochs": "7", "latent_dim": "16", "seed": "3"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("epochs 7\n")
    with pytest.raises(ConfigError):
        load_config_file(str(bad))


# -- commands ----------------------------------------------------------------


def test_train_writes_history_rows(workspace):
    hist = (workspace / "model.ckpt.history.csv").read_text().strip().splitlines()
    assert hist[0] == "epoch,train_loss,val_loss"
    assert len(hist) == 1 + 2  # header + one row per epoch


def test_train_rerun_is_byte_identical(workspace, tmp_path):
    cfg = ExperimentConfig(
        arch=ArchitectureConfig(**DESK_ARCH),
        train=TrainConfig(epochs=2, batch_size=16, seed=5),
        train_data=str(workspace / "blobs"),
        out_checkpoint=str(tmp_path / "again.ckpt"),
        verbose=False,
    )
    cmd_train(cfg)
    assert (tmp_path / "again.ckpt").read_bytes() == (workspace / "model.ckpt").read_bytes()
    assert (tmp_path / "again.ckpt.history.csv").read_bytes() == (
        workspace / "model.ckpt.history.csv"
    ).read_bytes()


def test_embed_round_trip_and_rerun_identical(workspace, tmp_path):
    out1 = str(tmp_path / "e1.emb")
    out2 = str(tmp_path / "e2.emb")
    cmd_embed(str(workspace / "model.ckpt"), str(workspace / "blobs"), 3, 9, out1)
    cmd_embed(str(workspace / "model.ckpt"), str(workspace / "blobs"), 3, 9, out2)
    with open(out1, "rb") as f1, open(out2, "rb") as f2:
        assert f1.read() == f2.read()
    t = read_embeddings(out1)
    assert (t.n_inputs, t.n_samples, t.latent_dim) == (48, 3, 8)


def test_metrics_self_comparison_near_zero(workspace, tmp_path):
    emb = str(tmp_path / "self.emb")
    cmd_embed(str(workspace / "model.ckpt"), str(workspace / "blobs"), 4, 11, emb)
    report_path = str(tmp_path / "report.json")
    rep = cmd_metrics(emb, emb, report_path)
    with open(report_path) as f:
        data = json.load(f)
    assert data["mean_faed"] == rep.mean_faed
    assert data["mean_faed"] == pytest.approx(np.mean(data["faed_per_j"]), rel=1e-12)
    assert data["seed"] == 11  # echoes the test embedding seed
    assert data["n_samples"] == 4
    # same population, dropout jitter only: small but nonzero distance
    assert rep.mean_faed < 1.0


def test_metrics_rerun_byte_identical(workspace, tmp_path):
    emb = str(tmp_path / "e.emb")
    cmd_embed(str(workspace / "model.ckpt"), str(workspace / "stripes"), 3, 4, emb)
    p1, p2 = str(tmp_path / "r1.json"), str(tmp_path / "r2.json")
    cmd_metrics(emb, emb, p1)
    cmd_metrics(emb, emb, p2)
    with open(p1, "rb") as f1, open(p2, "rb") as f2:
        assert f1.read() == f2.read()


def test_sweep_rows_match_counts(workspace, tmp_path):
    ref = str(tmp_path / "ref.emb")
    cmd_embed(str(workspace / "model.ckpt"), str(workspace / "blobs"), 3, 21, ref)
    out = str(tmp_path / "sweep.csv")
    rows = cmd_sweep(
        checkpoint=str(workspace / "model.ckpt"),
        base_dataset=str(workspace / "blobs"),
        sweep=SweepSpec(overlay_counts=(0, 2), foreign_source=str(workspace / "stripes"), patch_side=7),
        ref_embeddings=ref,
        seed=33,
        out=out,
        j_samples=3,
    )
    with open(out) as f:
        lines = f.read().strip().splitlines()
    assert lines[0] == "overlay_count,mean_faed,sigma_faed,pvar"
    assert len(lines) == 3
    assert [r[0] for r in rows] == [0, 2]


def test_sweep_single_zero_count_is_baseline(workspace, tmp_path):
    ref = str(tmp_path / "ref0.emb")
    cmd_embed(str(workspace / "model.ckpt"), str(workspace / "blobs"), 3, 21, ref)
    rows = cmd_sweep(
        checkpoint=str(workspace / "model.ckpt"),
        base_dataset=str(workspace / "blobs"),
        sweep=SweepSpec(overlay_counts=(0,), foreign_source=str(workspace / "stripes"), patch_side=7),
        ref_embeddings=ref,
        seed=21,
        out=str(tmp_path / "s.csv"),
        j_samples=3,
    )
    assert len(rows) == 1 and rows[0][0] == 0


def test_sweep_spec_validation(workspace):
    with pytest.raises(ConfigError):
        SweepSpec(overlay_counts=(3, 1), foreign_source="x")
    with pytest.raises(ConfigError):
        SweepSpec(overlay_counts=(), foreign_source="x")


# -- CLI ----------------------------------------------------------------------


def test_cli_usage_error_exit_code(capsys):
    assert main(["train"]) == 1  # missing required --out
    assert main(["metrics", "--test", "a", "--ref", "b", "--out", "c"]) == 2  # missing file
    capsys.readouterr()


def test_cli_end_to_end(tmp_path, capsys):
    d = str(tmp_path)
    assert main(["synth", "--family", "blobs", "--n", "24", "--side", "16",
                 "--seed", "1", "--out", f"{d}/data"]) == 0
    assert main(["train", "--data", f"{d}/data", "--side", "16", "--channels", "4,8",
                 "--latent-dim", "8", "--dropout", "0.1", "--epochs", "1",
                 "--batch-size", "8", "--seed", "1", "--out", f"{d}/m.ckpt", "--quiet"]) == 0
    assert main(["embed", "--checkpoint", f"{d}/m.ckpt", "--data", f"{d}/data",
                 "--j-samples", "3", "--seed", "2", "--out", f"{d}/e.emb"]) == 0
    assert main(["metrics", "--test", f"{d}/e.emb", "--ref", f"{d}/e.emb",
                 "--out", f"{d}/r.json"]) == 0
    with open(f"{d}/r.json") as f:
        report = json.load(f)
    assert set(report) == {
        "mean_faed", "sigma_faed", "pvar", "n_inputs", "n_samples",
        "latent_dim", "seed", "warnings", "faed_per_j",
    }
    assert main(["augment", "--data", f"{d}/data", "--mode", "self-overlay",
                 "--count", "2", "--patch-side", "7", "--seed", "4",
                 "--out", f"{d}/aug"]) == 0
    assert len(load_dataset_dir(f"{d}/aug")) == 24
    capsys.readouterr()


def test_cli_config_file_and_override(tmp_path, capsys):
    d = str(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("family = blobs\nn = 8\nside = 16\nseed = 7\n")
    assert main(["synth", "--config", str(cfg), "--out", f"{d}/a"]) == 0
    assert main(["synth", "--config", str(cfg), "--n", "4", "--out", f"{d}/b"]) == 0
    assert len(load_dataset_dir(f"{d}/a")) == 8
    assert len(load_dataset_dir(f"{d}/b")) == 4  # flag overrides config
    capsys.readouterr()


def test_cli_paper_scale_defaults():
    # the train subcommand defaults mirror the published recipe
    from faeduq.cli import build_parser

    parser = build_parser()
    args = parser.parse_args(["train", "--data", "x", "--out", "y"])
    # defaults resolve inside run(); here we check the documented fallbacks
    from faeduq.cli import _resolve

    assert _resolve(args, {}, "epochs", int, 25) == 25
    assert _resolve(args, {}, "batch_size", int, 16) == 16
    assert _resolve(args, {}, "latent_dim", int, 256) == 256
    assert _resolve(args, {}, "dropout", float, 0.10) == 0.10
