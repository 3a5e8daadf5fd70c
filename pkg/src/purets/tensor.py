"""Dense float64 array helpers the models are built on.

Arrays are plain ``numpy.ndarray`` objects.  A rank-2 array plays the role of a
weight matrix, a rank-3 array is a ``(batch, axis1, axis2)`` block.  The helpers
below add shape checking, a materialized permute, and an optional multiply
counter used by the profiler tests.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

DTYPE = np.float64


@dataclass
class OpCounter:
    """Tally of multiply-accumulates and bias additions actually executed."""

    macs: int = 0
    adds: int = 0


_active_counters: list[OpCounter] = []


@contextlib.contextmanager
def count_ops():
    """Record the work done by :func:`matmul` and :func:`batched_affine`.

    >>> with count_ops() as c:
    ...     _ = matmul(np.ones((2, 3)), np.ones((3, 4)))
    >>> c.macs
    24
    """
    counter = OpCounter()
    _active_counters.append(counter)
    try:
        yield counter
    finally:
        _active_counters.remove(counter)


def _tally(macs: int, adds: int = 0) -> None:
    for c in _active_counters:
        c.macs += macs
        c.adds += adds


def as_tensor(x, ndim: int | None = None) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=DTYPE)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"expected rank-{ndim} array, got shape {arr.shape}")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product of two rank-2 arrays."""
    a = as_tensor(a, 2)
    b = as_tensor(b, 2)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    _tally(a.shape[0] * a.shape[1] * b.shape[1])
    return a @ b


def permute_time_feature(x) -> np.ndarray:
    """Swap the last two axes of a rank-3 array, returning a contiguous copy."""
    x = as_tensor(x, 3)
    return np.ascontiguousarray(x.transpose(0, 2, 1))


def batched_affine(x, w, bias=None) -> np.ndarray:
    """Apply ``w @ v + bias`` to every last-axis vector ``v`` of ``x``.

    ``w`` has shape ``(out_dim, in_dim)`` and ``x`` has ``in_dim`` as its last
    axis.  The same map is shared over all leading indices.
    """
    x = as_tensor(x, 3)
    w = as_tensor(w, 2)
    if x.shape[2] != w.shape[1]:
        raise ShapeError(f"batched_affine: input {x.shape} does not match weight {w.shape}")
    out_dim, in_dim = w.shape
    rows = x.shape[0] * x.shape[1]
    out = (x.reshape(rows, in_dim) @ w.T).reshape(x.shape[0], x.shape[1], out_dim)
    if bias is not None:
        bias = as_tensor(bias, 1)
        if bias.shape[0] != out_dim:
            raise ShapeError(f"batched_affine: bias length {bias.shape[0]} != {out_dim}")
        out += bias
        _tally(rows * out_dim * in_dim, rows * out_dim)
    else:
        _tally(rows * out_dim * in_dim)
    return out


def channel_affine(x, w, bias=None) -> np.ndarray:
    """Like :func:`batched_affine` but with a separate map per axis-1 index.

    ``x`` is ``(batch, n, in_dim)``, ``w`` is ``(n, out_dim, in_dim)`` and
    ``bias`` is ``(n, out_dim)``.
    """
    x = as_tensor(x, 3)
    w = as_tensor(w, 3)
    if x.shape[1] != w.shape[0] or x.shape[2] != w.shape[2]:
        raise ShapeError(f"channel_affine: input {x.shape} does not match weight {w.shape}")
    n, out_dim, in_dim = w.shape
    # (n, batch, in) @ (n, in, out) -> (n, batch, out)
    out = np.ascontiguousarray((x.transpose(1, 0, 2) @ w.transpose(0, 2, 1)).transpose(1, 0, 2))
    rows = x.shape[0] * n
    if bias is not None:
        bias = as_tensor(bias, 2)
        if bias.shape != (n, out_dim):
            raise ShapeError(f"channel_affine: bias shape {bias.shape} != {(n, out_dim)}")
        out += bias
        _tally(rows * out_dim * in_dim, rows * out_dim)
    else:
        _tally(rows * out_dim * in_dim)
    return out


class RandomSource:
    """Seeded generator backed by numpy's PCG64 bit generator.

    PCG64 gives the same stream for a given seed on every platform numpy
    supports, which is what the reproducibility guarantees rely on.
    """

    def __init__(self, seed: int = 0, _stream: int | None = None):
        self.seed = int(seed)
        entropy = self.seed if _stream is None else [self.seed, _stream]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def spawn(self, offset: int) -> "RandomSource":
        """Independent source derived deterministically from this seed."""
        return RandomSource(self.seed, _stream=offset)
