"""Penalized-cost segmentation as a frequentist baseline.

Runs the pruned exact search on the piecewise-constant benchmark with the
default penalty (2 * variance * log n, variance estimated robustly from first
differences) and verifies the pruning against the unpruned quadratic-time
recursion.
"""

import math

from cpslab import (
    estimate_noise_variance,
    gen_example1,
    optimal_partition_dp,
    pelt_detect,
)

dataset, truth = gen_example1(seed=2)
sigma2_hat = estimate_noise_variance(dataset.y)
penalty = 2 * sigma2_hat * math.log(dataset.n)
print(f"estimated noise variance: {sigma2_hat:.4f} (true 0.04)")
print(f"penalty: {penalty:.3f}")

res = pelt_detect(dataset.y, penalty=penalty, min_seg=2)
print(f"\ndetected changepoints: {res.changepoints}")
print(f"true changepoints:     {truth.true_changepoints}")

ref = optimal_partition_dp(dataset.y, penalty=penalty, min_seg=2)
print(f"\npruned equals unpruned search: {res.changepoints == ref.changepoints}")
print(f"total penalized cost: {res.total_cost:.2f}")

print("\nsegment fits:")
for seg in res.segment_params:
    print(
        f"  [{seg['start']:3d}, {seg['end']:3d}]  mean {seg['mean']:+.3f}  "
        f"variance {seg['variance']:.4f}"
    )
