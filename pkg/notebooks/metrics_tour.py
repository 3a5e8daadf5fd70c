"""
Forecast metrics
================

Point metrics plus two shape diagnostics: how much a forecast wiggles
relative to the truth, and how well it reaches the peaks.
"""

import numpy as np

from purets import evaluate, fluctuation_index, peak_amplitude_ratio

t = np.linspace(0, 8 * np.pi, 200)
truth = np.sin(t)[None, :, None]

smooth = 0.8 * truth
jittery = truth + 0.1 * np.cos(25 * t)[None, :, None]

print("smooth  FI", fluctuation_index(smooth, truth), "PAR", peak_amplitude_ratio(smooth, truth))
print("jittery FI", fluctuation_index(jittery, truth), "PAR", peak_amplitude_ratio(jittery, truth))

###############################################################################
# ``evaluate`` bundles everything; FI above 1.15 flags over-fluctuation.

rep = evaluate(jittery, truth)
print(rep.to_json())
print("over-fluctuating:", rep.over_fluctuating)
