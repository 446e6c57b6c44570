"""Command-line front end.

Every command prints one JSON line of metrics on stdout (``params`` and
``rho-bound`` print a small table unless ``--json`` is given) and writes its
artifacts under ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import DATASET_RHO, VARIANTS, TrainConfig, read_config_file
from .data import SynthConfig, load_dataset, save_dataset, synthesize
from .model import load_checkpoint, save_checkpoint
from .trnn import count_params_mlstm, count_params_tlstm, rho_upper_bound
from .workflows import (
    FutureTask,
    evaluate_future,
    evaluate_recovery,
    future_rows,
    prepare_future,
    prepare_recovery,
    recovery_rows,
    train_task,
)

CHECKPOINT = "checkpoint.bin"

# flag name -> TrainConfig field
_TRAIN_FLAGS = {
    "variant": str,
    "hidden": int,
    "hidden_rnn": int,
    "rho": float,
    "omega": int,
    "lr": float,
    "mu1": float,
    "mu2": float,
    "epochs": int,
    "seed": int,
    "batch_size": int,
    "stride": int,
    "activation": str,
    "cell_output": str,
    "clip": float,
}


class CliError(Exception):
    pass


def _dims(text: str) -> tuple:
    try:
        dims = tuple(int(s) for s in text.replace("x", ",").split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}") from None
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"dimensions must be positive integers, got {text!r}")
    return dims


def _emit(metrics: dict, out: Path | None = None) -> None:
    line = json.dumps(metrics, sort_keys=True)
    if out is not None:
        (out / "metrics.json").write_text(line + "\n")
    print(line)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def resolve_config(args) -> TrainConfig:
    """Flags override the config file, which overrides defaults."""
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    if getattr(args, "preset", None):
        values.setdefault("rho", DATASET_RHO[args.preset])
    for name in _TRAIN_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return TrainConfig.from_dict(values)


def _task(ds, task: str, fraction: float, split_seed: int):
    if task == "future":
        return prepare_future(ds, fraction)
    return prepare_recovery(ds, fraction, split_seed)


def _evaluate(task, params, omega):
    if isinstance(task, FutureTask):
        return evaluate_future(task, params, omega)
    return evaluate_recovery(task, params, omega)


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        dims=args.dims,
        core=args.core,
        T=args.T,
        noise=args.noise,
        spectral_radius=args.radius,
        innovation=args.innovation,
    )
    ds = synthesize(cfg, args.seed)
    out = save_dataset(ds, args.out)
    _emit({"command": "synth", "shape": list(ds.values.shape), "path": str(out)})
    return 0


def cmd_train(args) -> int:
    config = resolve_config(args)
    ds = load_dataset(args.data)
    task = _task(ds, args.task, args.fraction, args.split_seed)
    result = train_task(task, config, validate=args.log_validation)
    out = _out_dir(args)
    meta = {
        "task": args.task,
        "fraction": args.fraction,
        "split_seed": args.split_seed,
        "shape": list(ds.values.shape),
    }
    save_checkpoint(out / CHECKPOINT, result.params, config, meta)
    result.write_log(out / "train_log.jsonl")
    metrics = {"command": "train", "final_train_loss": result.history[-1]["train_loss"]}
    scores = _evaluate(task, result.params, config.omega)
    metrics["val_rmse"] = scores.pop("rmse")
    metrics.update(scores)
    _emit(metrics, out)
    return 0


def _restore(args):
    ds = load_dataset(args.data)
    params, config, meta = load_checkpoint(args.checkpoint, ds.networks)
    if meta.get("shape") and list(meta["shape"][:-1]) != list(ds.values.shape[:-1]):
        raise CliError("checkpoint was trained on a dataset with different node modes")
    return ds, params, config, meta


def _write_rows(path: Path, rows, n_modes: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{m}" for m in range(n_modes)] + ["t", "truth", "prediction"])
        for idx, truth, pred in rows:
            w.writerow(list(idx) + [repr(truth), repr(pred)])


def cmd_predict(args) -> int:
    ds, params, config, meta = _restore(args)
    fraction = args.fraction or (meta.get("fraction") if meta.get("task") == "future" else None) or 0.1
    task = prepare_future(ds, fraction)
    rows = future_rows(task, params, config.omega, args.horizon)
    out = _out_dir(args)
    _write_rows(out / "predictions.csv", rows, len(ds.networks))
    metrics = {"command": "predict", "rows": len(rows), "boundary": task.boundary}
    metrics.update(evaluate_future(task, params, config.omega))
    _emit(metrics, out)
    return 0


def cmd_recover(args) -> int:
    ds, params, config, meta = _restore(args)
    same = meta.get("task") == "recovery"
    fraction = args.fraction if args.fraction is not None else (meta.get("fraction") if same else 0.2)
    seed = args.split_seed if args.split_seed is not None else (meta.get("split_seed", 0) if same else 0)
    task = prepare_recovery(ds, fraction, seed)
    rows = recovery_rows(task, params, config.omega)
    out = _out_dir(args)
    _write_rows(out / "recovery.csv", rows, len(ds.networks))
    metrics = {"command": "recover", "rows": len(rows)}
    metrics.update(evaluate_recovery(task, params, config.omega))
    _emit(metrics, out)
    return 0


def cmd_eval(args) -> int:
    ds, params, config, meta = _restore(args)
    kind = meta.get("task", "future")
    fraction = args.fraction or meta.get("fraction", 0.1)
    seed = meta.get("split_seed", 0) if args.split_seed is None else args.split_seed
    task = _task(ds, kind, fraction, seed)
    metrics = {"command": "eval", "task": kind}
    metrics.update(_evaluate(task, params, config.omega))
    _emit(metrics, _out_dir(args) if args.out else None)
    return 0


def param_report(dims, rho, d, dp) -> dict:
    tl = count_params_tlstm(dims, rho, d, dp)
    ml = count_params_mlstm(dims, d, dp)
    return {
        "dims": list(dims),
        "rho": rho,
        "tlstm": tl,
        "mlstm": ml,
        "reduction_pct": round(100.0 * (1.0 - tl / ml), 2),
        "rho_max": rho_upper_bound(dims, d, dp),
    }


def cmd_params(args) -> int:
    rep = param_report(args.dims, args.rho, args.d, args.dp)
    if args.json:
        print(json.dumps(rep, sort_keys=True))
    else:
        print(f"{'TLSTM params':<16}{rep['tlstm']:>12,}")
        print(f"{'mLSTM params':<16}{rep['mlstm']:>12,}")
        print(f"{'reduction':<16}{rep['reduction_pct']:>11.2f}%")
        print(f"{'rho_max':<16}{rep['rho_max']:>12.4f}")
    if args.rho > rep["rho_max"] or rep["reduction_pct"] <= 0:
        print(
            f"warning: rho={args.rho} exceeds rho_max={rep['rho_max']:.4f}, savings are not guaranteed; "
            f"reduction is {rep['reduction_pct']:.2f}%",
            file=sys.stderr,
        )
    return 0


def cmd_rho_bound(args) -> int:
    bound = rho_upper_bound(args.dims, args.d, args.dp)
    if args.json:
        print(json.dumps({"dims": list(args.dims), "rho_max": bound}))
    else:
        print(f"rho_max {bound:.2f}")
    return 0


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and optimizer (override --config)")
    g.add_argument("--config", help="key=value file with training settings")
    g.add_argument("--preset", choices=sorted(DATASET_RHO), help="use this dataset's rho unless set elsewhere")
    g.add_argument("--variant", choices=sorted(VARIANTS))
    for name, typ in _TRAIN_FLAGS.items():
        if name != "variant":
            g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)


def _add_split_flags(p, default_fraction=None) -> None:
    p.add_argument("--fraction", type=float, default=default_fraction, help="held-out fraction")
    p.add_argument("--split-seed", type=int, default=None, help="seed for the recovery mask")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="net3", description="Networked tensor time series models.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic low-rank dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--dims", type=_dims, default=SynthConfig.dims)
    p.add_argument("--core", type=_dims, default=SynthConfig.core)
    p.add_argument("--T", type=int, default=SynthConfig.T)
    p.add_argument("--noise", type=float, default=SynthConfig.noise)
    p.add_argument("--radius", type=float, default=SynthConfig.spectral_radius)
    p.add_argument("--innovation", type=float, default=SynthConfig.innovation)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit a model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=("future", "recovery"), default="future")
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--log-validation", action="store_true", help="score the held-out split every epoch")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("predict", cmd_predict, "roll the model over the future split"),
        ("recover", cmd_recover, "fill held-out entries"),
        ("eval", cmd_eval, "score a checkpoint on its split"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--data", required=True)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--out", required=name != "eval")
        _add_split_flags(p)
        if name == "predict":
            p.add_argument("--horizon", type=int, default=None, help="steps to roll out (default: test length)")
        p.set_defaults(func=func)

    p = sub.add_parser("params", help="parameter counts of the tensor and per-node LSTM")
    p.add_argument("dims", type=_dims)
    p.add_argument("rho", type=float)
    p.add_argument("d", type=int)
    p.add_argument("dp", type=int, metavar="d'")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("rho-bound", help="largest rho that still saves parameters")
    p.add_argument("dims", type=_dims)
    p.add_argument("d", type=int)
    p.add_argument("dp", type=int, metavar="d'")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_rho_bound)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
