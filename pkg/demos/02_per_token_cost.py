#!/usr/bin/env python3
"""How the per-token privacy cost tracks batch agreement.

The cost of sampling a token is driven by the gap between the batch median
and its adjacent order statistics. Identical vectors cost exactly zero;
as the batch spreads out, the cost grows.
"""

import numpy as np

from dpsynth import token_cost_bounds

rng = np.random.default_rng(0)
bound, temperature = 6.0, 1.5
base = rng.normal(scale=2.0, size=8)

print(f"batch of 5 vectors drawn around one profile, vocab={base.size}")
print(f"{'spread':>8}  {'cost (nats)':>12}  {'lower ratio':>12}  {'upper ratio':>12}")
for spread in (0.0, 0.01, 0.1, 0.5, 1.0, 2.0):
    batch = base + rng.normal(scale=spread, size=(5, base.size))
    if spread == 0.0:
        batch = np.tile(base, (5, 1))
    bounds = token_cost_bounds(batch, token=0, bound=bound, temperature=temperature)
    print(
        f"{spread:>8.2f}  {bounds.cost:>12.6f}  {bounds.lower_ratio:>12.6f}  {bounds.upper_ratio:>12.6f}"
    )

print()
print(
    "lower/upper bracket the probability ratio of the sampled token against\n"
    "any batch that differs by one seed; the cost is the worse of the two\n"
    "log-ratios and is what the ledger accumulates."
)
