"""PureTS-style forecasters built from stacks of affine layers.

A :class:`LinearStack` maps a ``(batch, T, N)`` input window to a
``(batch, T', N)`` forecast.  The input is permuted so that time becomes the
last axis, a chain of affine layers projects each channel's length-``T``
history to a length-``T'`` forecast, and the result is permuted back.  By
default each layer holds one weight matrix shared by all channels; with
``per_channel=True`` every channel gets its own.  The ``PureTS_S`` variant follows this with one
``N -> N`` affine map across channels.

Three configurations are provided:

* ``PureTS``      temporal stack only, no activations
* ``PureTS_S``    temporal stack plus the feature-axis map
* ``SigmoidMLP``  temporal stack with a sigmoid after every hidden layer; used
  as the nonlinear contrast model

Gradients are computed by hand (no autodiff).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from ._io import atomic_open
from .errors import NumericError, ShapeError, UnsupportedModelError
from .tensor import DTYPE, RandomSource, as_tensor, batched_affine, channel_affine, permute_time_feature

MODEL_KINDS = ("PureTS", "PureTS_S", "SigmoidMLP")
ACTIVATIONS = (None, "sigmoid")
CHECKPOINT_FORMAT = "purets-checkpoint/1"


@dataclass
class AffineLayer:
    weight: np.ndarray  # (out_dim, in_dim), or (n_channels, out_dim, in_dim) per channel
    bias: np.ndarray  # (out_dim,) or (n_channels, out_dim)
    activation: str | None = None

    def __post_init__(self):
        self.weight = as_tensor(self.weight)
        self.bias = as_tensor(self.bias)
        if self.weight.ndim not in (2, 3):
            raise ShapeError(f"weight must be rank 2 or 3, got shape {self.weight.shape}")
        if self.bias.shape != self.weight.shape[:-1]:
            raise ShapeError(f"bias shape {self.bias.shape} does not match weight shape {self.weight.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def per_channel(self) -> bool:
        return self.weight.ndim == 3

    @property
    def in_dim(self) -> int:
        return self.weight.shape[-1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[-2]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Affine map (no activation) along the last axis of ``(B, N, in_dim)``."""
        if self.per_channel:
            return channel_affine(x, self.weight, self.bias)
        return batched_affine(x, self.weight, self.bias)

    def copy(self) -> "AffineLayer":
        return AffineLayer(self.weight.copy(), self.bias.copy(), self.activation)


@dataclass
class LinearStack:
    temporal_layers: list[AffineLayer]
    input_window: int
    horizon: int
    n_features: int
    spatial_layer: AffineLayer | None = None
    kind: str = "PureTS"

    def __post_init__(self):
        if not self.temporal_layers:
            raise ValueError("a LinearStack needs at least one temporal layer")
        if self.temporal_layers[0].in_dim != self.input_window:
            raise ShapeError(
                f"first layer expects {self.temporal_layers[0].in_dim} steps, window is {self.input_window}"
            )
        for k, (a, b) in enumerate(zip(self.temporal_layers, self.temporal_layers[1:])):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"layer {k} outputs {a.out_dim} but layer {k + 1} expects {b.in_dim}")
        if self.temporal_layers[-1].out_dim != self.horizon:
            raise ShapeError(
                f"last layer produces {self.temporal_layers[-1].out_dim} steps, horizon is {self.horizon}"
            )
        for k, layer in enumerate(self.temporal_layers):
            if layer.per_channel and layer.weight.shape[0] != self.n_features:
                raise ShapeError(
                    f"layer {k} has weights for {layer.weight.shape[0]} channels, model has {self.n_features}"
                )
        if self.spatial_layer is not None:
            shape = self.spatial_layer.weight.shape
            if shape != (self.n_features, self.n_features):
                raise ShapeError(f"spatial weight must be {self.n_features}x{self.n_features}, got {shape}")

    @property
    def depth(self) -> int:
        return len(self.temporal_layers)

    @property
    def per_channel(self) -> bool:
        return any(layer.per_channel for layer in self.temporal_layers)

    @property
    def has_activation(self) -> bool:
        layers = self.temporal_layers + ([self.spatial_layer] if self.spatial_layer else [])
        return any(layer.activation is not None for layer in layers)

    def layers(self) -> list[AffineLayer]:
        """All layers in parameter order: temporal first, then spatial."""
        return self.temporal_layers + ([self.spatial_layer] if self.spatial_layer is not None else [])

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order (weight, bias per layer).

        The arrays are the live buffers; optimizers update them in place.
        """
        out = []
        for layer in self.layers():
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "LinearStack":
        return LinearStack(
            [layer.copy() for layer in self.temporal_layers],
            self.input_window,
            self.horizon,
            self.n_features,
            self.spatial_layer.copy() if self.spatial_layer is not None else None,
            self.kind,
        )

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "input_window": self.input_window,
            "horizon": self.horizon,
            "n_features": self.n_features,
            "widths": [self.input_window] + [layer.out_dim for layer in self.temporal_layers],
            "activations": [layer.activation for layer in self.temporal_layers],
            "spatial": self.spatial_layer is not None,
            "per_channel": self.per_channel,
        }


@dataclass
class GradientSet:
    temporal: list[tuple[np.ndarray, np.ndarray]]
    spatial: tuple[np.ndarray, np.ndarray] | None = None

    def arrays(self) -> list[np.ndarray]:
        """Gradients in the same order as :meth:`LinearStack.parameters`."""
        out = []
        for gw, gb in self.temporal:
            out += [gw, gb]
        if self.spatial is not None:
            out += list(self.spatial)
        return out


def default_widths(input_window: int, horizon: int, depth: int) -> list[int]:
    """``T -> max(T, T') -> ... -> T'``, so no hidden layer is a bottleneck."""
    hidden = max(input_window, horizon)
    return [input_window] + [hidden] * (depth - 1) + [horizon]


def build_model(
    kind: str,
    input_window: int,
    horizon: int,
    n_features: int,
    depth: int | None = None,
    hidden: list[int] | None = None,
    rng: RandomSource | None = None,
    per_channel: bool = False,
) -> LinearStack:
    """Create a model of the given kind with freshly initialized parameters.

    ``depth`` defaults to 3 for the linear models and 2 for ``SigmoidMLP``.
    ``hidden`` overrides the hidden widths (``depth - 1`` entries).
    ``per_channel`` gives every channel its own temporal weights.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if depth is None:
        depth = 2 if kind == "SigmoidMLP" else 3
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if kind == "SigmoidMLP" and depth < 2:
        raise ValueError("SigmoidMLP needs at least one hidden layer (depth >= 2)")
    if hidden is None:
        widths = default_widths(input_window, horizon, depth)
    else:
        if len(hidden) != depth - 1:
            raise ValueError(f"expected {depth - 1} hidden widths, got {len(hidden)}")
        widths = [input_window, *hidden, horizon]

    act = "sigmoid" if kind == "SigmoidMLP" else None
    lead = (n_features,) if per_channel else ()
    layers = [
        AffineLayer(
            np.zeros(lead + (widths[k + 1], widths[k])),
            np.zeros(lead + (widths[k + 1],)),
            act if k < depth - 1 else None,
        )
        for k in range(depth)
    ]
    spatial = None
    if kind == "PureTS_S":
        spatial = AffineLayer(np.zeros((n_features, n_features)), np.zeros(n_features))
    model = LinearStack(layers, input_window, horizon, n_features, spatial, kind)
    return init_parameters(model, rng if rng is not None else RandomSource(0))


def init_parameters(model: LinearStack, rng: RandomSource) -> LinearStack:
    """Return a copy with weights ~ U(-1/sqrt(in_dim), 1/sqrt(in_dim)) and zero biases."""
    new = model.copy()
    for layer in new.layers():
        bound = 1.0 / np.sqrt(layer.in_dim)
        layer.weight[...] = rng.uniform(-bound, bound, size=layer.weight.shape)
        layer.bias[...] = 0.0
    return new


def _activate(a: np.ndarray, activation: str | None) -> np.ndarray:
    if activation == "sigmoid":
        return expit(a)
    return a


def _check_input(model: LinearStack, x) -> np.ndarray:
    x = as_tensor(x, 3)
    if x.shape[1] != model.input_window or x.shape[2] != model.n_features:
        raise ShapeError(
            f"input shape {x.shape} does not match model (batch, {model.input_window}, {model.n_features})"
        )
    return x


def forward_trace(model: LinearStack, x) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Forward pass keeping every intermediate the backward pass needs.

    Returns ``(hidden, pre_spatial, out)`` where ``hidden[0]`` is the permuted
    input and ``hidden[k]`` is the (activated) output of temporal layer ``k``.
    """
    h = permute_time_feature(_check_input(model, x))
    hidden = [h]
    for k, layer in enumerate(model.temporal_layers):
        h = _activate(layer.apply(h), layer.activation)
        if not np.isfinite(h).all():
            raise NumericError(f"non-finite output in temporal layer {k}")
        hidden.append(h)
    y = permute_time_feature(h)
    out = y
    if model.spatial_layer is not None:
        out = batched_affine(y, model.spatial_layer.weight, model.spatial_layer.bias)
        if not np.isfinite(out).all():
            raise NumericError("non-finite output in spatial layer")
    return hidden, y, out


def forward(model: LinearStack, x) -> np.ndarray:
    """Forecast ``(B, T', N)`` from an input window ``(B, T, N)``."""
    return forward_trace(model, x)[2]


def backward(model: LinearStack, x, grad_out, trace=None) -> GradientSet:
    """Gradient of a scalar loss w.r.t. every parameter, given dL/d(output).

    ``trace`` is the result of :func:`forward_trace` on the same input; it is
    recomputed when omitted.
    """
    x = _check_input(model, x)
    grad_out = as_tensor(grad_out, 3)
    expected = (x.shape[0], model.horizon, model.n_features)
    if grad_out.shape != expected:
        raise ShapeError(f"grad_out shape {grad_out.shape} != forward output shape {expected}")
    hidden, y, _ = trace if trace is not None else forward_trace(model, x)

    g = grad_out
    spatial = None
    if model.spatial_layer is not None:
        n = model.n_features
        g2 = g.reshape(-1, n)
        spatial = (g2.T @ y.reshape(-1, n), g2.sum(axis=0))
        g = g @ model.spatial_layer.weight

    g = permute_time_feature(g)
    temporal = []
    for k in range(model.depth - 1, -1, -1):
        layer = model.temporal_layers[k]
        if layer.activation == "sigmoid":
            s = hidden[k + 1]
            g = g * s * (1.0 - s)
        if layer.per_channel:
            # per channel n: dW[n] = sum_b g[b, n]^T h[b, n]
            gw = np.einsum("bno,bni->noi", g, hidden[k])
            temporal.append((gw, g.sum(axis=0)))
            if k > 0:
                g = np.einsum("bno,noi->bni", g, layer.weight)
            continue
        g2 = g.reshape(-1, layer.out_dim)
        temporal.append((g2.T @ hidden[k].reshape(-1, layer.in_dim), g2.sum(axis=0)))
        if k > 0:
            g = g @ layer.weight
    temporal.reverse()
    return GradientSet(temporal, spatial)


def collapse_to_affine(model: LinearStack) -> tuple[np.ndarray, np.ndarray]:
    """Fold an activation-free temporal stack into one ``(T' x T)`` map and bias.

    Per-channel stacks give an ``(N, T', T)`` map and ``(N, T')`` bias.  A
    spatial layer is only accepted when it is exactly the identity map.
    """
    if model.has_activation:
        raise UnsupportedModelError("cannot collapse a model containing activations")
    sp = model.spatial_layer
    if sp is not None and not (np.array_equal(sp.weight, np.eye(model.n_features)) and not sp.bias.any()):
        raise UnsupportedModelError("cannot collapse a non-identity spatial layer into a temporal map")
    first = model.temporal_layers[0]
    w, b = first.weight.copy(), first.bias.copy()
    if model.per_channel and not first.per_channel:
        w = np.broadcast_to(w, (model.n_features,) + w.shape).copy()
        b = np.broadcast_to(b, (model.n_features,) + b.shape).copy()
    for layer in model.temporal_layers[1:]:
        w = layer.weight @ w
        b = (layer.weight @ b[..., None])[..., 0] + layer.bias
    return w, b


def collapsed_model(model: LinearStack) -> LinearStack:
    """Depth-1 ``PureTS`` with the same input/output behaviour."""
    w, b = collapse_to_affine(model)
    return LinearStack([AffineLayer(w, b)], model.input_window, model.horizon, model.n_features)


def save_checkpoint(model: LinearStack, path, config: dict | None = None) -> None:
    """Write the model to an ``.npz`` container.

    Each parameter is stored as its own little-endian float64 array; a JSON
    ``meta`` entry records layer order, shapes, activations and the run
    config.
    """
    arrays = {}
    meta_layers = []
    for idx, layer in enumerate(model.layers()):
        role = "spatial" if model.spatial_layer is layer else "temporal"
        arrays[f"layer{idx}_weight"] = layer.weight.astype("<f8")
        arrays[f"layer{idx}_bias"] = layer.bias.astype("<f8")
        meta_layers.append(
            {"role": role, "shape": list(layer.weight.shape), "activation": layer.activation}
        )
    meta = {
        "format": CHECKPOINT_FORMAT,
        "model": model.config(),
        "layers": meta_layers,
        "config": config or {},
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with atomic_open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[LinearStack, dict]:
    path = Path(path)
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a purets checkpoint")
        temporal, spatial = [], None
        for idx, info in enumerate(meta["layers"]):
            layer = AffineLayer(
                np.asarray(data[f"layer{idx}_weight"], dtype=DTYPE),
                np.asarray(data[f"layer{idx}_bias"], dtype=DTYPE),
                info["activation"],
            )
            if info["role"] == "spatial":
                spatial = layer
            else:
                temporal.append(layer)
    cfg = meta["model"]
    model = LinearStack(temporal, cfg["input_window"], cfg["horizon"], cfg["n_features"], spatial, cfg["kind"])
    return model, meta["config"]


def checkpoint_float_count(path) -> int:
    """Number of float64 values held in a checkpoint's parameter buffers."""
    with np.load(path, allow_pickle=False) as data:
        return sum(data[k].size for k in data.files if k != "meta")
