"""
Building and running a linear stack
===================================

A forecaster maps a lookback window of T steps to the next T' steps, for
every channel independently, using only affine layers along the time axis.
"""

import numpy as np

from purets import RandomSource, build_model, collapse_to_affine, collapsed_model, forward

# a batch of 4 windows, 96 steps, 7 channels
rng = RandomSource(0)
x = rng.normal(size=(4, 96, 7))

model = build_model("PureTS", 96, 24, 7, rng=rng.spawn(1))
print(model.config()["widths"])  # 96 -> 96 -> 96 -> 24
y = forward(model, x)
print(y.shape)

###############################################################################
# Without activations the whole stack is one affine map.

w, b = collapse_to_affine(model)
print(w.shape, b.shape)
flat = collapsed_model(model)
print(np.max(np.abs(forward(flat, x) - y)))

###############################################################################
# The feature-mixing variant adds an N x N layer after the temporal stack,
# and the sigmoid variant puts a nonlinearity after every hidden layer.

mixed = build_model("PureTS_S", 96, 24, 7, rng=rng.spawn(2))
sig = build_model("SigmoidMLP", 96, 24, 7, rng=rng.spawn(3))
print(forward(mixed, x).shape, forward(sig, x).shape)
