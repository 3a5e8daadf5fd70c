"""
Counting parameters, MACs and latency
=====================================

Costs grow linearly in the horizon for a fixed lookback.
"""

from purets import benchmark_inference, build_model, count_macs, count_parameters
from purets.profile import scatter_csv

rows = []
for horizon in (48, 168, 336, 720):
    m = build_model("PureTS", 336, horizon, 7)
    rep = benchmark_inference(m, repeats=10)
    rows.append({"horizon": horizon, "parameters": count_parameters(m), "macs": count_macs(m),
                 "latency": rep.mean_latency, "mse": None})
    print(rep.shape_summary)

print(scatter_csv(rows))
