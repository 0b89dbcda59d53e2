"""Command line interface.

Subcommands: synth, train, embed, metrics, sweep, augment. Options may come
from a flat ``key = value`` config file (--config); explicit command line
flags override config values, which override built-in defaults. Exit codes:
0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import EXIT_CONFIG, ConfigError, FaedUqError
from .harness import (
    ExperimentConfig,
    SweepSpec,
    cmd_augment,
    cmd_embed,
    cmd_metrics,
    cmd_sweep,
    cmd_synth,
    cmd_train,
)
from .nn import ArchitectureConfig, TrainConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def load_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment, blanks ignored."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {text!r}")
            key, value = text.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _parse_channels(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(c) for c in text.split(",") if c.strip())
    except ValueError as exc:
        raise ConfigError(f"bad channel list {text!r}") from exc


def _parse_counts(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(c) for c in text.split(",") if c.strip())
    except ValueError as exc:
        raise ConfigError(f"bad count list {text!r}") from exc


_CASTS = {int: int, float: float, str: str}


def _resolve(args: argparse.Namespace, config: dict[str, str], key: str, cast, default):
    """CLI flag > config file entry > default."""
    cli_value = getattr(args, key, None)
    if cli_value is not None:
        return cli_value
    if key in config:
        raw = config[key]
        try:
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: bad value {raw!r}") from exc
    return default


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="faeduq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic PPM dataset")
    _add_common(p)
    p.add_argument("--family", choices=("blobs", "stripes"), default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the autoencoder")
    _add_common(p)
    p.add_argument("--data", default=None, help="training dataset directory")
    p.add_argument("--val-data", dest="val_data", default=None)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--channels", default=None, help="comma separated encoder channels")
    p.add_argument("--kernel", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--latent-dim", dest="latent_dim", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--history", default=None, help="loss history CSV path")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("embed", help="extract MC-dropout embeddings")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--j-samples", dest="j_samples", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="FAED report for test vs reference embeddings")
    _add_common(p)
    p.add_argument("--test", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--ref-mode", dest="ref_mode", choices=("fixed-j0", "paired-j"), default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="metrics vs foreign-overlay count")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--foreign", default=None)
    p.add_argument("--counts", default=None, help="comma separated ascending counts")
    p.add_argument("--patch-side", dest="patch_side", type=int, default=None)
    p.add_argument("--j-samples", dest="j_samples", type=int, default=None)
    p.add_argument("--ref", required=True)
    p.add_argument("--ref-mode", dest="ref_mode", choices=("fixed-j0", "paired-j"), default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="apply one augmentation rung to a dataset")
    _add_common(p)
    p.add_argument("--data", default=None)
    p.add_argument("--mode", choices=("noise", "self-overlay", "foreign-overlay"), default=None)
    p.add_argument("--foreign", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--patch-side", dest="patch_side", type=int, default=None)
    p.add_argument("--out", required=True)

    return parser


def _require(value, what: str):
    if value in (None, ""):
        raise ConfigError(f"missing required option: {what}")
    return value


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = load_config_file(args.config) if getattr(args, "config", None) else {}

    def opt(key, cast, default):
        return _resolve(args, config, key, cast, default)

    seed = opt("seed", int, 0)

    if args.command == "synth":
        cmd_synth(
            family=_require(opt("family", str, None), "--family"),
            n=_require(opt("n", int, None), "--n"),
            side=_require(opt("side", int, None), "--side"),
            seed=seed,
            out=args.out,
        )
    elif args.command == "train":
        arch = ArchitectureConfig(
            input_side=opt("side", int, 128),
            encoder_channels=_parse_channels(str(opt("channels", str, "128,256,512"))),
            kernel=opt("kernel", int, 4),
            stride=opt("stride", int, 2),
            latent_dim=opt("latent_dim", int, 256),
            dropout_rate=opt("dropout", float, 0.10),
        )
        train = TrainConfig(
            epochs=opt("epochs", int, 25),
            batch_size=opt("batch_size", int, 16),
            learning_rate=opt("lr", float, 1e-3),
            seed=seed,
        )
        cmd_train(
            ExperimentConfig(
                arch=arch,
                train=train,
                train_data=_require(opt("data", str, None), "--data"),
                val_data=opt("val_data", str, None),
                val_fraction=opt("val_fraction", float, 0.1),
                out_checkpoint=args.out,
                history_path=opt("history", str, None),
                verbose=not args.quiet,
            )
        )
    elif args.command == "embed":
        cmd_embed(
            checkpoint=args.checkpoint,
            dataset=_require(opt("data", str, None), "--data"),
            j_samples=opt("j_samples", int, 200),
            seed=seed,
            out=args.out,
        )
    elif args.command == "metrics":
        cmd_metrics(
            test_embeddings=args.test,
            ref_embeddings=args.ref,
            out=args.out,
            ref_mode=opt("ref_mode", str, "fixed-j0"),
        )
    elif args.command == "sweep":
        counts_text = _require(opt("counts", str, None), "--counts")
        spec = SweepSpec(
            overlay_counts=_parse_counts(str(counts_text)),
            foreign_source=_require(opt("foreign", str, None), "--foreign"),
            patch_side=opt("patch_side", int, 31),
        )
        cmd_sweep(
            checkpoint=args.checkpoint,
            base_dataset=_require(opt("data", str, None), "--data"),
            sweep=spec,
            ref_embeddings=args.ref,
            seed=seed,
            out=args.out,
            j_samples=opt("j_samples", int, 200),
            ref_mode=opt("ref_mode", str, "fixed-j0"),
        )
    elif args.command == "augment":
        mode = _require(opt("mode", str, None), "--mode")
        cmd_augment(
            data=_require(opt("data", str, None), "--data"),
            out=args.out,
            mode=mode,
            seed=seed,
            foreign=opt("foreign", str, None),
            count=opt("count", int, 5),
            patch_side=opt("patch_side", int, 31),
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except FaedUqError as exc:
        print(f"faeduq: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"faeduq: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
