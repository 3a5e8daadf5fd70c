"""Parameter, MAC and latency accounting for :class:`LinearStack` models.

One MAC is one multiply-accumulate.  Bias additions are plain adds and are
tallied separately in ``add_count``; permutes cost nothing.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ._io import write_text
from .model import LinearStack, forward
from .tensor import RandomSource

log = logging.getLogger(__name__)


def count_parameters(model) -> int:
    """Weights plus biases over all layers (a model or a plain list of layers).

    Per-channel layers count one ``out x in`` matrix and bias per channel.
    """
    layers = model.layers() if isinstance(model, LinearStack) else list(model)
    if not layers:
        log.warning("count_parameters: empty layer stack")
    return sum(layer.weight.size + layer.bias.size for layer in layers)


def count_macs(model: LinearStack, batch: int = 1) -> int:
    """Multiply-accumulates for one forward pass over ``batch`` windows."""
    n = model.n_features
    macs = sum(n * layer.out_dim * layer.in_dim for layer in model.temporal_layers)
    if model.spatial_layer is not None:
        macs += model.horizon * n * n
    return batch * macs


def count_adds(model: LinearStack, batch: int = 1) -> int:
    """Bias additions for one forward pass over ``batch`` windows."""
    n = model.n_features
    adds = sum(n * layer.out_dim for layer in model.temporal_layers)
    if model.spatial_layer is not None:
        adds += model.horizon * n
    return batch * adds


def shape_summary(model: LinearStack) -> str:
    widths = " -> ".join(str(w) for w in model.config()["widths"])
    acts = {layer.activation for layer in model.temporal_layers} - {None}
    text = f"{model.kind}: T={model.input_window} T'={model.horizon} N={model.n_features} time[{widths}]"
    if acts:
        text += f" act={','.join(sorted(acts))}"
    if model.per_channel:
        text += " per-channel"
    if model.spatial_layer is not None:
        text += f" feat[{model.n_features} -> {model.n_features}]"
    return text


@dataclass
class ProfileReport:
    parameter_count: int
    mac_count: int
    add_count: int
    mean_latency: float
    latency_std: float
    shape_summary: str
    samples: list[float] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.parameter_count > 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def benchmark_inference(
    model: LinearStack,
    batch_size: int = 1,
    repeats: int = 20,
    warmup: int = 2,
    threads: int | None = 1,
    seed: int = 0,
) -> ProfileReport:
    """Time ``repeats`` forward passes on a fixed random input.

    ``threads`` caps the BLAS thread pool (``None`` leaves it alone).
    """
    if repeats < 5:
        raise ValueError("repeats must be >= 5")
    if warmup < 1:
        raise ValueError("warmup must be >= 1")
    x = RandomSource(seed).normal(size=(batch_size, model.input_window, model.n_features))
    samples = []
    with threadpool_limits(limits=threads):
        for _ in range(warmup):
            forward(model, x)
        for _ in range(repeats):
            t0 = time.perf_counter()
            forward(model, x)
            samples.append(time.perf_counter() - t0)
    return ProfileReport(
        parameter_count=count_parameters(model),
        mac_count=count_macs(model, batch_size),
        add_count=count_adds(model, batch_size),
        mean_latency=float(np.mean(samples)),
        latency_std=float(np.std(samples)),
        shape_summary=shape_summary(model),
        samples=samples,
    )


SCATTER_FIELDS = ("horizon", "parameters", "macs", "latency", "mse")


def scatter_csv(rows: list[dict]) -> str:
    """MACs / latency / MSE table, one row per model setting.

    Missing ``mse`` values are written as empty cells.
    """
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SCATTER_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row[k]) for k in SCATTER_FIELDS})
    return buf.getvalue()


def write_scatter(path, rows: list[dict]) -> None:
    write_text(path, scatter_csv(rows))

