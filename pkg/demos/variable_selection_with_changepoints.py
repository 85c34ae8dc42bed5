"""Joint changepoint detection and covariate selection, 250 covariates.

The changing linear model has three regimes (breaks after observations 75
and 175) and only covariates 2, 3 and 12 ever matter.  The spike-and-slab
layer reports a posterior inclusion probability per covariate; the Bernoulli
changepoint layer reports a probability per location.  Takes a minute or two.
"""

import numpy as np

from cpslab import PriorConfig, SamplerConfig, gen_example2, run_chain

dataset, truth = gen_example2(seed=1)
print(
    f"series: n = {dataset.n}, p = {dataset.X.shape[1]}, "
    f"true changepoints {truth.true_changepoints}, "
    f"active covariates {truth.true_active_set}"
)

summary = run_chain(
    dataset,
    PriorConfig(),
    SamplerConfig(iterations=8000, burn_in=4000, seed=1),
)

print("\nposterior over number of blocks:")
for count, prob in summary.partition_count_dist.items():
    print(f"  {count} blocks: {prob:.3f}")

print("\ncovariates with inclusion probability > 0.5:")
for j in np.flatnonzero(summary.pip > 0.5):
    print(f"  x{j + 1}: {summary.pip[j]:.3f}")

print("\nchangepoint probabilities above 0.3:")
for i in np.flatnonzero(summary.cp_prob > 0.3):
    print(f"  index {i + 1}: {summary.cp_prob[i]:.3f}")
