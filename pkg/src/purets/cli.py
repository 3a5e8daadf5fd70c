"""Command-line entry point: ``purets {train,eval,profile,bench,figure3}``.

Every option can also come from a flat ``key = value`` config file passed with
``--config``; keys are the long option names with dashes or underscores.
Command-line flags win over file values.

Exit codes: 0 success, 1 runtime or numeric failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import study
from ._io import write_text
from .data import CsvSchema, SineSpec, generate_sine, load_csv, load_registry, make_windows, split_and_normalize
from .errors import DataError, NumericError, ParseError, ShapeError
from .model import MODEL_KINDS, build_model, forward, load_checkpoint, save_checkpoint
from .profile import benchmark_inference, write_scatter
from .tensor import RandomSource
from .train import TrainConfig, evaluate_model, train

log = logging.getLogger("purets")

OUTPUT_ENV = "PURETS_OUTPUT_DIR"
PROFILE_HORIZONS = (48, 168, 336, 720)


class ConfigError(Exception):
    """Bad or inconsistent run configuration (exit code 2)."""


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--output-dir", help=f"where to write results (default ${OUTPUT_ENV} or ./runs)")
    p.add_argument("-v", "--verbose", action="store_true", default=None)


def _add_data(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--dataset", help="registry name (e.g. ETTh1) or 'sine'")
    g.add_argument("--csv", help="path to a CSV file, bypassing the registry")
    g.add_argument("--registry", help="JSON dataset registry file")
    g.add_argument("--data-dir", help="directory holding <name>.csv files for the built-in registry")
    g.add_argument("--policy", help="split policy, e.g. 6/2/2 or ett-hourly")
    g.add_argument("--no-date", action="store_true", default=None, help="CSV has no leading date column")
    g.add_argument("--sine-points", type=int)
    g.add_argument("--sine-step", type=float)
    g.add_argument("--sine-amplitude", type=float)
    g.add_argument("--sine-phase", type=float)
    g.add_argument("--sine-noise", type=float)


def _add_model(p: argparse.ArgumentParser, horizon: bool = True) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODEL_KINDS, help="model kind (default PureTS)")
    g.add_argument("--depth", type=int, help="number of temporal layers")
    g.add_argument("--hidden", type=_int_list, help="comma-separated hidden widths")
    g.add_argument("--window", type=int, help="lookback length T (default: T = horizon)")
    g.add_argument("--per-channel", action="store_true", default=None,
                   help="separate temporal weights for every channel")
    if horizon:
        g.add_argument("--horizon", type=int, help="forecast length T'")


def _add_train(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--lr", type=float, help="learning rate (default 1e-3)")
    g.add_argument("--epochs", type=int, help="max epochs (default 100)")
    g.add_argument("--batch-size", type=int, help="mini-batch size (default 32)")
    g.add_argument("--patience", type=int, help="early-stopping patience (default 10)")
    g.add_argument("--optimizer", choices=("adam", "sgd"))


def _add_bench(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("benchmark")
    g.add_argument("--features", type=int, help="number of channels N")
    g.add_argument("--repeats", type=int, help="timed passes (default 20)")
    g.add_argument("--warmup", type=int, help="untimed passes (default 2)")
    g.add_argument("--threads", type=int, help="BLAS threads (default 1; 0 = library default)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="purets", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("train", help="train a model and evaluate it on the test split")
    _add_common(p), _add_data(p), _add_model(p), _add_train(p)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint on the test split")
    _add_common(p), _add_data(p)
    p.add_argument("--checkpoint", help="model.npz written by 'train'")

    p = sub.add_parser("profile", help="parameters / MACs / latency across horizons")
    _add_common(p), _add_data(p), _add_model(p, horizon=False), _add_train(p), _add_bench(p)
    p.add_argument("--horizons", type=_int_list, help="comma-separated horizons (default 48,168,336,720)")

    p = sub.add_parser("bench", help="time inference for one model configuration")
    _add_common(p), _add_model(p), _add_bench(p)
    p.add_argument("--batch-size", type=int, help="windows per forward pass (default 1)")

    p = sub.add_parser("figure3", help="run the synthetic sine study")
    _add_common(p)
    p.add_argument("--seeds", type=int, help="also compare fluctuation over this many seeds")
    return parser


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Fill unset options from the config file, converting with each option's type."""
    if not getattr(args, "config", None):
        return args
    actions = {a.dest: a for a in parser.subcommands[args.command]._actions}
    for key, raw in read_config_file(args.config).items():
        if key not in actions or key in ("config", "help"):
            raise ConfigError(f"unknown config key {key!r} for '{args.command}'")
        if getattr(args, key) is not None:
            continue
        action = actions[key]
        try:
            if action.type is not None:
                value = action.type(raw)
            elif action.const is True or isinstance(action, argparse._StoreTrueAction):
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                value = raw
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"bad value for {key}: {raw!r} (choose from {list(action.choices)})")
        setattr(args, key, value)
    return args


def _opt(args, name, default):
    v = getattr(args, name, None)
    return default if v is None else v


def output_dir(args) -> Path:
    return Path(_opt(args, "output_dir", os.environ.get(OUTPUT_ENV, "runs")))


def load_data(args):
    """Dataset selected by --dataset/--csv/sine options, split and normalized."""
    name = getattr(args, "dataset", None)
    csv_path = getattr(args, "csv", None)
    if csv_path:
        if not Path(csv_path).exists():
            raise ConfigError(f"dataset not found: {csv_path}")
        ds = load_csv(csv_path, CsvSchema(has_date=not _opt(args, "no_date", False)), name=name)
        return split_and_normalize(ds, _opt(args, "policy", "7/1/2"))
    if name is None:
        raise ConfigError("no dataset given (use --dataset NAME, --dataset sine or --csv PATH)")
    if name == "sine":
        base = SineSpec()
        spec = SineSpec(
            n_points=_opt(args, "sine_points", base.n_points),
            step=_opt(args, "sine_step", base.step),
            amplitude=_opt(args, "sine_amplitude", base.amplitude),
            phase=_opt(args, "sine_phase", base.phase),
            noise_std=_opt(args, "sine_noise", base.noise_std),
            seed=_opt(args, "seed", 0),
        )
        return split_and_normalize(generate_sine(spec), _opt(args, "policy", "7/1/2"))
    reg = load_registry(getattr(args, "registry", None), getattr(args, "data_dir", None))
    if name not in reg or not Path(reg[name].path).exists():
        raise ConfigError(f"dataset not found: {name}")
    entry = reg[name]
    ds = load_csv(entry.path, entry.schema, entry.name)
    return split_and_normalize(ds, _opt(args, "policy", entry.policy))


def train_config(args) -> TrainConfig:
    try:
        return TrainConfig(
            learning_rate=_opt(args, "lr", 1e-3),
            max_epochs=_opt(args, "epochs", 100),
            batch_size=_opt(args, "batch_size", 32),
            patience=_opt(args, "patience", 10),
            seed=_opt(args, "seed", 0),
            optimizer=_opt(args, "optimizer", "adam"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def make_model(args, n_features: int, horizon: int):
    window = _opt(args, "window", horizon)
    if window < 1 or horizon < 1:
        raise ConfigError("window and horizon must be >= 1")
    try:
        return build_model(
            _opt(args, "model", "PureTS"), window, horizon, n_features,
            depth=getattr(args, "depth", None), hidden=getattr(args, "hidden", None),
            rng=RandomSource(_opt(args, "seed", 0)), per_channel=bool(_opt(args, "per_channel", False)),
        )
    except (ValueError, ShapeError) as exc:
        raise ConfigError(str(exc)) from None


def _run_record(args) -> dict:
    skip = {"config", "verbose", "output_dir"}
    return {k: v for k, v in sorted(vars(args).items()) if v is not None and k not in skip}


def _first_window_csv(pred: np.ndarray, truth: np.ndarray, columns) -> str:
    cols = columns or [f"ch{i}" for i in range(truth.shape[-1])]
    header = ["step"] + [f"{c}_truth" for c in cols] + [f"{c}_pred" for c in cols]
    lines = [",".join(header)]
    for i in range(truth.shape[0]):
        lines.append(",".join([str(i)] + [repr(float(v)) for v in truth[i]] + [repr(float(v)) for v in pred[i]]))
    return "\n".join(lines) + "\n"


def _summary_line(report) -> str:
    line = f"mse={report.mse:.6g} mae={report.mae:.6g}"
    if report.rse is not None:
        line += f" rse={report.rse:.6g}"
    if report.corr is not None:
        line += f" corr={report.corr:.6g}"
    if report.fluctuation_index is not None:
        line += f" fluctuation={report.fluctuation_index:.4g}"
        if report.over_fluctuating:
            line += " (over-fluctuating)"
    return line


def cmd_train(args) -> int:
    ds = load_data(args)
    horizon = getattr(args, "horizon", None)
    if horizon is None:
        raise ConfigError("--horizon is required")
    model = make_model(args, ds.n_features, horizon)
    cfg = train_config(args)
    out = output_dir(args)
    trained, trace = train(model, ds, cfg)
    report = evaluate_model(trained, ds, "test")

    record = _run_record(args)
    save_checkpoint(trained, out / "model.npz", record)
    trace.save(out / "trace.csv")
    write_text(out / "metrics.json", report.to_json())
    first = make_windows(ds, "test", trained.input_window, trained.horizon).take([0])
    pred = forward(trained, first.inputs)[0]
    write_text(out / "predictions.csv", _first_window_csv(pred, first.targets[0], ds.columns))
    print(f"trained {len(trace)} epochs (best {trace.best_epoch}); test {_summary_line(report)}")
    return 0


def cmd_eval(args) -> int:
    ckpt = getattr(args, "checkpoint", None)
    if ckpt is None:
        raise ConfigError("--checkpoint is required")
    if not Path(ckpt).exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    model, saved = load_checkpoint(ckpt)
    for key, value in saved.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, value)
    ds = load_data(args)
    if ds.n_features != model.n_features:
        raise ConfigError(f"checkpoint expects {model.n_features} features, dataset has {ds.n_features}")
    report = evaluate_model(model, ds, "test")
    write_text(output_dir(args) / "eval_metrics.json", report.to_json())
    print(f"test {_summary_line(report)}")
    return 0


def _threads(args):
    t = _opt(args, "threads", 1)
    return None if t == 0 else t


def cmd_bench(args) -> int:
    horizon = getattr(args, "horizon", None)
    if horizon is None:
        raise ConfigError("--horizon is required")
    model = make_model(args, _opt(args, "features", 7), horizon)
    rep = benchmark_inference(
        model, _opt(args, "batch_size", 1), _opt(args, "repeats", 20), _opt(args, "warmup", 2),
        _threads(args), _opt(args, "seed", 0),
    )
    write_text(output_dir(args) / "bench.json", rep.to_json())
    print(f"{rep.shape_summary}: params={rep.parameter_count} macs={rep.mac_count} "
          f"latency={rep.mean_latency * 1e3:.4f}ms +/- {rep.latency_std * 1e3:.4f}ms")
    return 0


def cmd_profile(args) -> int:
    ds = load_data(args) if getattr(args, "dataset", None) or getattr(args, "csv", None) else None
    n_features = ds.n_features if ds is not None else _opt(args, "features", 7)
    if getattr(args, "window", None) is None:
        args.window = 336
    horizons = _opt(args, "horizons", list(PROFILE_HORIZONS))
    reports, rows = [], []
    for h in horizons:
        model = make_model(args, n_features, h)
        rep = benchmark_inference(model, 1, _opt(args, "repeats", 20), _opt(args, "warmup", 2),
                                  _threads(args), _opt(args, "seed", 0))
        err = None
        if ds is not None:
            trained, _ = train(model, ds, train_config(args))
            err = evaluate_model(trained, ds, "test").mse
        reports.append({"horizon": h, **rep.to_dict(), "mse": err})
        rows.append({"horizon": h, "parameters": rep.parameter_count, "macs": rep.mac_count,
                     "latency": repr(rep.mean_latency), "mse": None if err is None else repr(err)})
        print(f"T'={h}: params={rep.parameter_count} macs={rep.mac_count} latency={rep.mean_latency * 1e3:.4f}ms"
              + (f" mse={err:.4g}" if err is not None else ""))
    out = output_dir(args)
    write_text(out / "profile.json", json.dumps(reports, indent=2) + "\n")
    write_scatter(out / "scatter.csv", rows)
    return 0


def cmd_figure3(args) -> int:
    out = output_dir(args)
    summary = study.reproduce_figure3(out, seed=_opt(args, "seed", 0))
    for key, row in summary["conditions"].items():
        fi = row["fluctuation_index"]
        print(f"({key}) {row['label']}: mse={row['mse']:.3g} peak_ratio={row['peak_amplitude_ratio']:.4f}"
              + (f" fluctuation={fi:.4f}" if fi is not None else ""))
    n = getattr(args, "seeds", None)
    if n:
        cmp = study.fluctuation_comparison(range(n))
        write_text(out / "fluctuation.json", json.dumps(cmp, indent=2) + "\n")
        print(f"median fluctuation: linear={cmp['linear_median']:.5f} sigmoid={cmp['sigmoid_median']:.5f}")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "profile": cmd_profile, "bench": cmd_bench,
            "figure3": cmd_figure3}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = resolve(args, parser)
        return COMMANDS[args.command](args)
    except (ConfigError, ParseError, DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
