"""Experiment commands and on-disk formats.

Every command is a pure function of its configuration and input files, so
rerunning one produces byte-identical outputs. Embeddings and checkpoints
use small binary formats with magic headers; reports are JSON; training
histories and sweeps are CSV for external plotting.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .data import (
    Dataset,
    STREAM_NOISE,
    STREAM_OVERLAY,
    augment_noise,
    augment_overlay,
    load_dataset_dir,
    resize_bilinear,
    save_dataset_dir,
    synth_dataset,
)
from .errors import ConfigError, DataError
from .metrics import EmbeddingTensor, MetricReport, metric_report
from .nn import (
    ArchitectureConfig,
    Autoencoder,
    TrainConfig,
    build,
    encode_mc,
    fit,
    load_checkpoint,
    save_checkpoint,
)
from .rng import RngStream

EMBEDDING_MAGIC = b"FAEDEMB1"
EMBEDDING_VERSION = 1


@dataclass
class ExperimentConfig:
    """Everything cmd_train needs: architecture, training recipe, data."""

    arch: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    train_data: str = ""
    val_data: str | None = None
    val_fraction: float = 0.1
    out_checkpoint: str = "model.ckpt"
    history_path: str | None = None
    verbose: bool = True


@dataclass(frozen=True)
class SweepSpec:
    """Overlay-count ladder for the augmentation-strength sweep."""

    overlay_counts: tuple[int, ...]
    foreign_source: str
    patch_side: int = 31

    def __post_init__(self):
        counts = tuple(int(c) for c in self.overlay_counts)
        if not counts:
            raise ConfigError("SweepSpec: overlay_counts must not be empty")
        if any(b <= a for a, b in zip(counts, counts[1:])):
            raise ConfigError(f"SweepSpec: overlay_counts must be ascending, got {counts}")
        if counts[0] < 0:
            raise ConfigError("SweepSpec: overlay counts must be >= 0")
        object.__setattr__(self, "overlay_counts", counts)


# ---------------------------------------------------------------------------
# Embedding and report files


def write_embeddings(path: str, tensor: EmbeddingTensor) -> None:
    with open(path, "wb") as f:
        f.write(EMBEDDING_MAGIC)
        f.write(
            struct.pack(
                "<IIIIQ",
                EMBEDDING_VERSION,
                tensor.n_inputs,
                tensor.n_samples,
                tensor.latent_dim,
                tensor.seed & (2**64 - 1),
            )
        )
        f.write(tensor.data.astype("<f8").tobytes())


def read_embeddings(path: str) -> EmbeddingTensor:
    with open(path, "rb") as f:
        head = f.read(8)
        if head != EMBEDDING_MAGIC:
            raise DataError(f"{path}: not an embedding file (bad magic)")
        meta = f.read(24)
        if len(meta) != 24:
            raise DataError(f"{path}: truncated embedding header")
        version, n_inputs, n_samples, latent_dim, seed = struct.unpack("<IIIIQ", meta)
        if version != EMBEDDING_VERSION:
            raise DataError(f"{path}: unsupported embedding version {version}")
        count = n_inputs * n_samples * latent_dim
        buf = f.read(8 * count)
        if len(buf) != 8 * count:
            raise DataError(f"{path}: truncated embedding payload")
    data = np.frombuffer(buf, dtype="<f8").astype(np.float64)
    return EmbeddingTensor(data.reshape(n_inputs, n_samples, latent_dim), seed=seed)


def write_report(path: str, report: MetricReport) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")


def read_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


# ---------------------------------------------------------------------------
# Commands


def _resize_dataset(ds: Dataset, side: int) -> np.ndarray:
    if ds.images[0].side == side:
        return ds.to_batch()
    return np.stack([resize_bilinear(img, side).pixels for img in ds.images])


def cmd_train(config: ExperimentConfig) -> str:
    """Train, keep the best-validation snapshot, write checkpoint + history."""
    ds = load_dataset_dir(config.train_data)
    images = _resize_dataset(ds, config.arch.input_side)
    if config.val_data:
        val = _resize_dataset(load_dataset_dir(config.val_data), config.arch.input_side)
        train = images
    else:
        n_val = max(1, int(round(len(ds) * config.val_fraction)))
        if n_val >= len(ds):
            raise DataError(
                f"cmd_train: validation fraction {config.val_fraction} leaves no training data"
            )
        train, val = images[:-n_val], images[-n_val:]

    model = build(config.arch, config.train.seed)
    best, history = fit(model, train, val, config.train, verbose=config.verbose)

    out = config.out_checkpoint
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    save_checkpoint(out, best)
    hist_path = config.history_path or out + ".history.csv"
    with open(hist_path, "w", encoding="utf-8") as f:
        f.write("epoch,train_loss,val_loss\n")
        for epoch, tl, vl in history:
            f.write(f"{epoch},{tl!r},{vl!r}\n")
    return out


def cmd_embed(checkpoint: str, dataset: str, j_samples: int, seed: int, out: str) -> str:
    """Extract MC-dropout embeddings for a dataset directory."""
    model = load_checkpoint(checkpoint)
    ds = load_dataset_dir(dataset)
    images = _resize_dataset(ds, model.arch.input_side)
    tensor = encode_mc(model, images, j_samples, seed)
    write_embeddings(out, tensor)
    return out


def cmd_metrics(
    test_embeddings: str,
    ref_embeddings: str,
    out: str,
    ref_mode: str = "fixed-j0",
    seed: int | None = None,
) -> MetricReport:
    """Metric report for a test embedding file against a reference one.

    The echoed seed defaults to the one stored in the test embedding file.
    """
    test = read_embeddings(test_embeddings)
    ref = read_embeddings(ref_embeddings)
    report = metric_report(test, ref, seed if seed is not None else test.seed, ref_mode=ref_mode)
    write_report(out, report)
    return report


def apply_augmentation(
    ds: Dataset,
    mode: str,
    seed: int,
    foreign: Dataset | None = None,
    count: int = 5,
    patch_side: int = 31,
) -> Dataset:
    """One augmentation rung over a whole dataset (per-image sub-streams)."""
    if mode == "noise":
        root = RngStream(seed, STREAM_NOISE)
        images = [augment_noise(img, root.derive(i)) for i, img in enumerate(ds.images)]
    elif mode in ("self-overlay", "foreign-overlay"):
        root = RngStream(seed, STREAM_OVERLAY)
        if mode == "foreign-overlay":
            if foreign is None or not foreign.images:
                raise ConfigError("foreign-overlay needs a non-empty foreign dataset")
            pool = foreign.images
        else:
            pool = None
        images = [
            augment_overlay(
                img,
                [img] if pool is None else pool,
                count,
                patch_side,
                root.derive(i),
            )
            for i, img in enumerate(ds.images)
        ]
    else:
        raise ConfigError(f"unknown augmentation mode {mode!r}")
    return Dataset(images, name=f"{ds.name}+{mode}", labels=ds.labels)


def cmd_augment(
    data: str,
    out: str,
    mode: str,
    seed: int,
    foreign: str | None = None,
    count: int = 5,
    patch_side: int = 31,
) -> str:
    ds = load_dataset_dir(data)
    foreign_ds = load_dataset_dir(foreign) if foreign else None
    save_dataset_dir(apply_augmentation(ds, mode, seed, foreign_ds, count, patch_side), out)
    return out


def cmd_sweep(
    checkpoint: str,
    base_dataset: str,
    sweep: SweepSpec,
    ref_embeddings: str,
    seed: int,
    out: str,
    j_samples: int = 200,
    ref_mode: str = "fixed-j0",
) -> list[tuple[int, float, float, float]]:
    """Metrics as a function of foreign-overlay count; one CSV row per count.

    All counts share per-image overlay streams, so the patches of a smaller
    count are a prefix of a larger one and the corruption grows monotonically
    by construction.
    """
    model = load_checkpoint(checkpoint)
    base = load_dataset_dir(base_dataset)
    foreign = load_dataset_dir(sweep.foreign_source)
    ref = read_embeddings(ref_embeddings)
    overlay_root = RngStream(seed, STREAM_OVERLAY)

    side = model.arch.input_side
    base_images = [
        img if img.side == side else resize_bilinear(img, side) for img in base.images
    ]

    rows: list[tuple[int, float, float, float]] = []
    for count in sweep.overlay_counts:
        if count == 0:
            batch = np.stack([img.pixels for img in base_images])
        else:
            batch = np.stack(
                [
                    augment_overlay(
                        img, foreign.images, count, sweep.patch_side, overlay_root.derive(i)
                    ).pixels
                    for i, img in enumerate(base_images)
                ]
            )
        tensor = encode_mc(model, batch, j_samples, seed)
        report = metric_report(tensor, ref, seed, ref_mode=ref_mode)
        rows.append((count, report.mean_faed, report.sigma_faed, report.pvar))

    with open(out, "w", encoding="utf-8") as f:
        f.write("overlay_count,mean_faed,sigma_faed,pvar\n")
        for count, mean, sigma, pv in rows:
            f.write(f"{count},{mean!r},{sigma!r},{pv!r}\n")
    return rows


def cmd_synth(family: str, n: int, side: int, seed: int, out: str) -> str:
    save_dataset_dir(synth_dataset(family, n, side, seed), out)
    return out
