"""
Training on a synthetic series
==============================

Fit a one-layer model to a noisy sine wave and inspect the convergence trace.
"""

from purets import RandomSource, SineSpec, TrainConfig, build_model, generate_sine, split_and_normalize, train
from purets.train import evaluate_model

# 7/1/2 chronological split; statistics come from the train part only
ds = split_and_normalize(generate_sine(SineSpec(n_points=3000, step=0.1, noise_std=0.05, seed=1)), "7/1/2")
print(ds.split_bounds)

model = build_model("PureTS", 64, 32, 1, depth=1, rng=RandomSource(0))
best, trace = train(model, ds, TrainConfig(max_epochs=30, seed=0))
print(f"{len(trace)} epochs, best at {trace.best_epoch}")
print(trace.to_csv().splitlines()[:4])

report = evaluate_model(best, ds, "test")
print(report.to_json())
