"""Command-line front end: dataset generation, training, link-level
evaluation, complexity reporting, and gradient verification.

Every command resolves its parameters as defaults < config file (--config,
JSON key/value) < explicit flags, echoes the resolved configuration to
``<outdir>/<out>.config.json``, and routes all randomness through a single
seed, so outputs are byte-identical on reruns.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import complexity as cx
from . import evaluation as ev
from . import rnn, training
from .channel import default_profile, load_profile

_GEN_DEFAULTS = {
    "scenario": "very_high",
    "scheme": "16qam",
    "snr": 40.0,
    "train_frames": 16000,
    "test_frames": 2000,
    "frames": None,
    "symbols": 100,
    "pilots": None,
    "seed": 1,
    "profile": None,
    "out": "dataset",
    "outdir": ".",
}

_TRAIN_DEFAULTS = {
    "train": None,
    "val": None,
    "cell": "gru",
    "hidden": 32,
    "activation": "relu",
    "epochs": 500,
    "batch_size": 128,
    "lr": 1e-3,
    "clip_norm": None,
    "recurrent_init": "glorot",
    "update_bias": 0.0,
    "forget_bias": 0.0,
    "seed": 0,
    "verbose": False,
    "out": "model",
    "outdir": ".",
}

_EVAL_DEFAULTS = {
    "scenario": "very_high",
    "scheme": "16qam",
    "snr": "0:5:40",
    "frames": 2000,
    "symbols": 100,
    "pilots": None,
    "seed": 3,
    "profile": None,
    "estimator": ["perfect"],
    "workers": None,
    "emit_plot_script": False,
    "out": "sweep",
    "outdir": ".",
}

_CX_DEFAULTS = {
    "kon": 52,
    "hidden": 32,
    "pilots": 3,
    "symbols": 100,
    "json": False,
    "out": "complexity",
    "outdir": ".",
}

_GRADCHECK_DEFAULTS = {
    "dims": "6,4,5",
    "seed": 0,
    "tol": 1e-5,
    "activation": "tanh",
    "out": "gradcheck",
    "outdir": ".",
}


def _parse_snr_list(text) -> list[float]:
    """'0:5:40' (start:step:stop, inclusive) or '0,10,20' or a single value."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if ":" in text:
        start, step, stop = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("SNR step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    return [float(v) for v in text.split(",")]


def _resolve(args: argparse.Namespace, defaults: dict, config_path) -> dict:
    """Defaults < config file < explicit flags (None marks 'not given')."""
    resolved = dict(defaults)
    if config_path:
        with open(config_path) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved

def _echo_config(resolved: dict, outdir: Path, stem: str) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / f"{stem}.config.json", "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_profile_arg(path):
    return load_profile(path) if path else default_profile()


def cmd_gen_dataset(args) -> int:
    cfg = _resolve(args, _GEN_DEFAULTS, args.config)
    outdir = Path(cfg["outdir"])
    _echo_config(cfg, outdir, cfg["out"])
    train_frames = cfg["train_frames"]
    test_frames = cfg["test_frames"]
    if cfg["frames"] is not None:  # smoke-run shorthand
        train_frames, test_frames = cfg["frames"], 0
    profile = _load_profile_arg(cfg["profile"])
    splits = [("train", train_frames, cfg["seed"])]
    if test_frames:
        splits.append(("test", test_frames, cfg["seed"] + 1))
    for split, n_frames, seed in splits:
        ds = training.generate_dataset(
            cfg["scenario"],
            n_frames,
            cfg["snr"],
            cfg["scheme"],
            seed,
            profile=profile,
            n_symbols=cfg["symbols"],
            n_pilots=cfg["pilots"],
        )
        path = outdir / f"{cfg['out']}.{split}.ds"
        training.save_dataset(ds, path)
        print(f"wrote {path} ({n_frames} frames)")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args, _TRAIN_DEFAULTS, args.config)
    if not cfg["train"]:
        raise ValueError("--train dataset path is required")
    outdir = Path(cfg["outdir"])
    _echo_config(cfg, outdir, cfg["out"])
    train_ds = training.load_dataset(cfg["train"])
    val_ds = training.load_dataset(cfg["val"]) if cfg["val"] else None
    if val_ds is not None and val_ds.inputs.shape[1:] != train_ds.inputs.shape[1:]:
        raise ValueError("train/validation frame geometries differ")
    model = rnn.init_model(
        cfg["cell"],
        cfg["hidden"],
        2 * train_ds.k_on,
        activation=cfg["activation"],
        seed=cfg["seed"],
        recurrent_init=cfg["recurrent_init"],
        update_bias=cfg["update_bias"],
        forget_bias=cfg["forget_bias"],
    )
    tc = training.TrainingConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        train_samples=len(train_ds),
        test_samples=len(val_ds) if val_ds else 0,
        train_snr_db=train_ds.snr_db,
        learning_rate=cfg["lr"],
        clip_norm=cfg["clip_norm"],
        seed=cfg["seed"],
    )
    result = training.train(
        model,
        train_ds.inputs,
        train_ds.targets,
        tc,
        val_inputs=None if val_ds is None else val_ds.inputs,
        val_targets=None if val_ds is None else val_ds.targets,
        verbose=1 if cfg["verbose"] else 0,
    )
    result.model.meta.update({"k_on": train_ds.k_on, "n_symbols": train_ds.n_symbols})
    weights_path = outdir / f"{cfg['out']}.weights"
    rnn.save_model(result.model, weights_path)
    training.write_history_csv(result.history, outdir / f"{cfg['out']}.history.csv")
    print(f"wrote {weights_path} (best epoch {result.best_epoch})")
    return 0


def _parse_estimators(specs: list[str]) -> list[ev.EstimatorChoice]:
    choices = []
    for item in specs:
        name, _, weights = item.partition(":")
        model = rnn.load_model(weights) if weights else None
        choices.append(ev.EstimatorChoice(name=name, model=model))
    return choices


def cmd_evaluate(args) -> int:
    cfg = _resolve(args, _EVAL_DEFAULTS, args.config)
    outdir = Path(cfg["outdir"])
    _echo_config(cfg, outdir, cfg["out"])
    choices = _parse_estimators(cfg["estimator"])
    workers = cfg["workers"] or os.cpu_count() or 1
    reports = ev.run_link_sim(
        choices,
        cfg["scenario"],
        cfg["scheme"],
        _parse_snr_list(cfg["snr"]),
        cfg["frames"],
        cfg["seed"],
        profile=_load_profile_arg(cfg["profile"]),
        n_symbols=cfg["symbols"],
        n_pilots=cfg["pilots"],
        workers=workers,
    )
    csv_path = outdir / f"{cfg['out']}.csv"
    ev.write_ber_csv(reports, csv_path)
    print(f"wrote {csv_path}")
    if cfg["emit_plot_script"]:
        script = outdir / f"{cfg['out']}_plot.py"
        ev.write_plot_script(csv_path, script)
        print(f"wrote {script}")
    return 0


def cmd_complexity(args) -> int:
    cfg = _resolve(args, _CX_DEFAULTS, args.config)
    outdir = Path(cfg["outdir"])
    _echo_config(cfg, outdir, cfg["out"])
    report = cx.build_report(
        k_on=cfg["kon"],
        hidden=cfg["hidden"],
        n_pilots=cfg["pilots"],
        n_symbols=cfg["symbols"],
    )
    print(cx.format_table(report))
    cx.write_complexity_csv(report, outdir / f"{cfg['out']}.csv")
    if cfg["json"]:
        cx.write_complexity_json(report, outdir / f"{cfg['out']}.json")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _resolve(args, _GRADCHECK_DEFAULTS, args.config)
    _echo_config(cfg, Path(cfg["outdir"]), cfg["out"])
    dims = tuple(int(v) for v in str(cfg["dims"]).split(","))
    if len(dims) != 3:
        raise ValueError("--dims must be n_features,hidden,steps")
    failures = 0
    for kind in ("srnn", "lstm", "gru"):
        err = training.grad_check(kind, dims=dims, seed=cfg["seed"], activation=cfg["activation"])
        status = "PASS" if err < cfg["tol"] else "FAIL"
        if status == "FAIL":
            failures += 1
        print(f"{kind:5s} max relative gradient error {err:.3e}  {status}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofdmchest",
        description="Doubly-selective OFDM channel estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; explicit flags win")
        p.add_argument("--out", help="output file stem")
        p.add_argument("--outdir", help="output directory (default '.')")

    p = sub.add_parser("gen-dataset", help="simulate frames into a training container")
    p.add_argument("--scenario", choices=["low", "high", "very_high"])
    p.add_argument("--scheme", choices=["qpsk", "16qam"])
    p.add_argument("--snr", type=float, help="generation SNR in dB")
    p.add_argument("--train-frames", type=int, dest="train_frames")
    p.add_argument("--test-frames", type=int, dest="test_frames")
    p.add_argument("--frames", type=int, help="shorthand: train frames only, no test split")
    p.add_argument("--symbols", type=int, help="frame length in OFDM symbols")
    p.add_argument("--pilots", type=int, help="override the scenario pilot count")
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", help="channel profile JSON path")
    add_common(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train a recurrent interpolator on a dataset")
    p.add_argument("--train", help="training dataset path")
    p.add_argument("--val", help="validation dataset path")
    p.add_argument("--cell", choices=["srnn", "lstm", "gru"])
    p.add_argument("--hidden", type=int)
    p.add_argument("--activation", choices=["tanh", "relu"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--clip-norm", type=float, dest="clip_norm")
    p.add_argument("--recurrent-init", choices=["glorot", "orthogonal"], dest="recurrent_init")
    p.add_argument("--update-bias", type=float, dest="update_bias")
    p.add_argument("--forget-bias", type=float, dest="forget_bias")
    p.add_argument("--seed", type=int)
    p.add_argument("--verbose", action="store_const", const=True)
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="BER/NMSE sweep over SNR")
    p.add_argument("--scenario", choices=["low", "high", "very_high"])
    p.add_argument("--scheme", choices=["qpsk", "16qam"])
    p.add_argument("--snr", help="'start:step:stop' or comma list, dB")
    p.add_argument("--frames", type=int, help="frames per SNR point")
    p.add_argument("--symbols", type=int)
    p.add_argument("--pilots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", help="channel profile JSON path")
    p.add_argument(
        "--estimator",
        action="append",
        help="estimator name, optionally 'name:weights_path'; repeatable",
    )
    p.add_argument("--workers", type=int, help="Monte-Carlo worker processes")
    p.add_argument("--emit-plot-script", action="store_const", const=True, dest="emit_plot_script")
    add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("complexity", help="analytic multiplication/division counts")
    p.add_argument("--kon", type=int, help="active subcarrier count")
    p.add_argument("--hidden", type=int)
    p.add_argument("--pilots", type=int)
    p.add_argument("--symbols", type=int)
    p.add_argument("--json", action="store_const", const=True, help="also emit a JSON report")
    add_common(p)
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("gradcheck", help="verify BPTT gradients against finite differences")
    p.add_argument("--dims", help="n_features,hidden,steps (default 6,4,5)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--activation", choices=["tanh", "relu"])
    add_common(p)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
