"""Mini-batch training with early stopping on validation MSE."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from ._io import write_text
from .data import SeriesDataset, Windows, make_windows
from .errors import DataError, NumericError, ShapeError
from .metrics import MetricReport, evaluate
from .model import LinearStack, backward, forward, forward_trace
from .tensor import RandomSource

OPTIMIZERS = ("adam", "sgd")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 100
    batch_size: int = 32
    patience: int = 10
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class ConvergenceTrace:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    @property
    def best_epoch(self) -> int:
        """1-based epoch with the lowest validation loss."""
        return int(np.argmin(self.val_loss)) + 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "seconds"])
        for i, row in enumerate(zip(self.train_loss, self.val_loss, self.seconds), start=1):
            w.writerow([i, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    def save(self, path) -> None:
        write_text(path, self.to_csv())


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state have different lengths")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"parameter shape {p.shape} != gradient shape {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
    return params, state


def sgd_step(params, grads, learning_rate: float):
    for p, g in zip(params, grads):
        p -= learning_rate * g
    return params


class Optimizer:
    """Binds a parameter list to SGD or Adam updates."""

    def __init__(self, params, config: TrainConfig):
        self.params = params
        self.config = config
        self.state = AdamState.zeros_like(params) if config.optimizer == "adam" else None

    def step(self, grads) -> None:
        if self.state is not None:
            adam_step(self.params, grads, self.state, self.config)
        else:
            sgd_step(self.params, grads, self.config.learning_rate)


def predict(model: LinearStack, windows: Windows, batch_size: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Forecasts and targets for every window, in window order."""
    preds, targets = [], []
    for batch in windows.iter_batches(batch_size):
        preds.append(forward(model, batch.inputs))
        targets.append(batch.targets)
    return np.concatenate(preds), np.concatenate(targets)


def windows_mse(model: LinearStack, windows: Windows, batch_size: int = 256) -> float:
    total, count = 0.0, 0
    for batch in windows.iter_batches(batch_size):
        d = forward(model, batch.inputs) - batch.targets
        total += float(np.sum(d * d))
        count += d.size
    return total / count


def evaluate_model(model: LinearStack, ds: SeriesDataset, split: str = "test") -> MetricReport:
    """Metric report on the normalized scale for every window of ``split``."""
    pred, truth = predict(model, make_windows(ds, split, model.input_window, model.horizon))
    return evaluate(pred, truth)


def train(model: LinearStack, dataset: SeriesDataset, config: TrainConfig) -> tuple[LinearStack, ConvergenceTrace]:
    """Fit ``model`` on the train split, early-stopping on validation MSE.

    The input model is not modified.  The returned model carries the
    parameters of the epoch with the lowest validation loss.  Training stops
    after ``patience`` epochs without improvement, at ``max_epochs``, or as
    soon as the validation loss is exactly zero.
    """
    try:
        train_w = make_windows(dataset, "train", model.input_window, model.horizon)
        val_w = make_windows(dataset, "val", model.input_window, model.horizon)
    except DataError as exc:
        raise DataError(f"cannot train: {exc}") from None
    if len(train_w) == 0 or len(val_w) == 0:
        raise DataError("cannot train: empty train or validation split")

    rng = RandomSource(config.seed)
    model = model.copy()
    params = model.parameters()
    opt = Optimizer(params, config)
    trace = ConvergenceTrace()
    best, best_val, stale = model.copy(), np.inf, 0
    start = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        total, count = 0.0, 0
        try:
            for batch in train_w.iter_batches(config.batch_size, rng):
                tr = forward_trace(model, batch.inputs)
                loss, grad = mse_loss(tr[2], batch.targets)
                opt.step(backward(model, batch.inputs, grad, trace=tr).arrays())
                total += loss * len(batch)
                count += len(batch)
            val = windows_mse(model, val_w)
        except NumericError as exc:
            raise NumericError(f"training diverged in epoch {epoch}: {exc}") from None
        train_loss = total / count
        if not (np.isfinite(train_loss) and np.isfinite(val)):
            raise NumericError(f"training diverged in epoch {epoch}: loss is not finite")
        trace.train_loss.append(train_loss)
        trace.val_loss.append(val)
        trace.seconds.append(time.perf_counter() - start)

        if val < best_val:
            best, best_val, stale = model.copy(), val, 0
        else:
            stale += 1
        if val == 0.0 or stale >= config.patience:
            break
    return best, trace
