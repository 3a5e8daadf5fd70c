"""Synthetic sine-wave study: what a pure linear stack can and cannot fit.

Five conditions are trained on a sine series with a 64-step lookback:

1. one-step forecast, single linear layer, noiseless series
2. 64-step forecast, two linear layers
3. 256-step forecast, two linear layers
4. 64-step forecast, single linear layer (compare with 2)
5. 64-step forecast, two layers with a sigmoid in between (compare with 2)

Conditions 2-5 use the same series with a small amount of observation noise
(std 0.01).  A linear forecaster of a noiseless sine is exact at any horizon,
so without noise there is no peak/trend trade-off to observe.

Every condition gets the same fixed budget of 10 epochs so convergence speed
differences show up in the results instead of being trained away.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._io import write_text
from .data import SeriesDataset, SineSpec, generate_sine, make_windows, split_and_normalize
from .metrics import MetricReport, evaluate, mse
from .model import LinearStack, build_model, collapsed_model
from .plot import emit_line_plot
from .tensor import RandomSource
from .train import ConvergenceTrace, TrainConfig, predict, train

WINDOW = 64
SPLIT_POLICY = "7/1/2"
CLEAN_SINE = SineSpec(n_points=4000, step=0.1)
NOISY_SINE = replace(CLEAN_SINE, noise_std=0.01)
STUDY_TRAIN = TrainConfig(learning_rate=1e-3, max_epochs=10, patience=10, batch_size=32)


@dataclass(frozen=True)
class Condition:
    key: str
    label: str
    kind: str
    depth: int
    horizon: int
    noisy: bool = True


CONDITIONS = (
    Condition("1", "T'=1, 1 linear layer", "PureTS", 1, 1, noisy=False),
    Condition("2", "T'=64, 2 linear layers", "PureTS", 2, 64),
    Condition("3", "T'=256, 2 linear layers", "PureTS", 2, 256),
    Condition("4", "T'=64, 1 linear layer", "PureTS", 1, 64),
    Condition("5", "T'=64, sigmoid hidden layer", "SigmoidMLP", 2, 64),
)
CONDITION_BY_KEY = {c.key: c for c in CONDITIONS}


@dataclass
class ConditionResult:
    condition: Condition
    model: LinearStack
    trace: ConvergenceTrace
    report: MetricReport
    pred: np.ndarray
    truth: np.ndarray
    mean_baseline_mse: float

    def summary(self) -> dict:
        return {
            "label": self.condition.label,
            "epochs": len(self.trace),
            **self.report.to_dict(),
            "mean_baseline_mse": self.mean_baseline_mse,
        }


def study_dataset(noisy: bool) -> SeriesDataset:
    return split_and_normalize(generate_sine(NOISY_SINE if noisy else CLEAN_SINE), SPLIT_POLICY)


def run_condition(cond: Condition, seed: int = 0, config: TrainConfig = STUDY_TRAIN,
                  dataset: SeriesDataset | None = None) -> ConditionResult:
    ds = dataset if dataset is not None else study_dataset(cond.noisy)
    model = build_model(cond.kind, WINDOW, cond.horizon, 1, depth=cond.depth, rng=RandomSource(seed))
    model, trace = train(model, ds, replace(config, seed=seed))
    pred, truth = predict(model, make_windows(ds, "test", WINDOW, cond.horizon))
    baseline = mse(np.full_like(truth, ds.split("train").mean()), truth)
    return ConditionResult(cond, model, trace, evaluate(pred, truth), pred, truth, baseline)


def fluctuation_comparison(seeds=range(5), config: TrainConfig = STUDY_TRAIN) -> dict:
    """Fluctuation index of conditions 2 (linear) and 5 (sigmoid) over several seeds."""
    ds = study_dataset(noisy=True)
    out = {"seeds": list(seeds), "linear": [], "sigmoid": []}
    for seed in seeds:
        for name, key in (("linear", "2"), ("sigmoid", "5")):
            res = run_condition(CONDITION_BY_KEY[key], seed, config, ds)
            out[name].append(res.report.fluctuation_index)
    out["linear_median"] = float(np.median(out["linear"]))
    out["sigmoid_median"] = float(np.median(out["sigmoid"]))
    return out


def _prediction_csv(pred: np.ndarray, truth: np.ndarray) -> str:
    lines = ["step,truth,prediction"]
    lines += [f"{i},{t!r},{p!r}" for i, (t, p) in enumerate(zip(truth.tolist(), pred.tolist()))]
    return "\n".join(lines) + "\n"


def _overlay(res: ConditionResult) -> tuple[np.ndarray, np.ndarray]:
    # one-step models are shown as a rolling forecast over 256 consecutive windows
    if res.condition.horizon == 1:
        return res.pred[:256, 0, 0], res.truth[:256, 0, 0]
    return res.pred[0, :, 0], res.truth[0, :, 0]


def reproduce_figure3(output_dir, seed: int = 0) -> dict:
    """Run all five conditions and write predictions, traces, plots and a summary."""
    out = Path(output_dir)
    datasets = {False: study_dataset(False), True: study_dataset(True)}
    results = {c.key: run_condition(c, seed, dataset=datasets[c.noisy]) for c in CONDITIONS}

    for key, res in results.items():
        pred, truth = _overlay(res)
        write_text(out / f"condition{key}_predictions.csv", _prediction_csv(pred, truth))
        res.trace.save(out / f"condition{key}_trace.csv")
        emit_line_plot([truth, pred], ["truth", "PureTS" if res.condition.kind != "SigmoidMLP" else "sigmoid"],
                       out / f"condition{key}.svg", title=f"({key}) {res.condition.label}")

    n_epochs = max(len(r.trace) for r in results.values())
    curves = [np.pad(r.trace.val_loss, (0, n_epochs - len(r.trace)), mode="edge") for r in results.values()]
    emit_line_plot(curves, [f"({k})" for k in results], out / "convergence.svg",
                   title="validation MSE per epoch (log10)", log_y=True)

    two_layer = results["2"]
    collapsed = collapsed_model(two_layer.model)
    cpred, _ = predict(collapsed, make_windows(datasets[True], "test", WINDOW, 64))
    summary = {
        "seed": seed,
        "conditions": {k: r.summary() for k, r in results.items()},
        "collapsed_two_layer_mse": mse(cpred, two_layer.truth),
        "max_abs_collapse_diff": float(np.max(np.abs(cpred - two_layer.pred))),
    }
    write_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    return summary
