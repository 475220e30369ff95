#!/usr/bin/env python3
"""Clipping and the two aggregation rules, on a tiny hand-sized batch.

Clipping shifts each logit vector so its top score sits at +c and floors
everything at -c. That bounds how far any one vector can drag an aggregate,
and it aligns vectors that agree on the next-token distribution even when
their raw scores differ by an arbitrary offset.
"""

import numpy as np

from dpsynth import aggregate_mean, aggregate_median, clip, median_triple

bound = 2.0

print("== clip ==")
for raw in ([0.0, -20.0, -1.0], [5.0, 5.0, 5.0], [2.0, -2.0, 0.0]):
    print(f"  clip({raw}, c={bound}) -> {clip(raw, bound)}")

print()
print("== a batch that mostly agrees ==")
batch = np.array(
    [
        [3.0, 1.0, -4.0],
        [2.5, 0.5, -3.0],
        [3.2, 1.2, -5.0],
        [9.0, -9.0, -9.0],  # one outlier pulling toward token 0
    ]
)
print("clipped rows:")
for row in batch:
    print(f"  {clip(row, bound)}")

print(f"mean aggregate:   {aggregate_mean(batch, bound)}")
print(f"median aggregate: {aggregate_median(batch, bound)}")

triple = median_triple(batch, bound)
print()
print("median with its adjacent order statistics (the local-sensitivity window):")
print(f"  left:  {triple.left}")
print(f"  mid:   {triple.mid}")
print(f"  right: {triple.right}")
print()
print(
    "The outlier moved the mean noticeably but barely touched the median;\n"
    "the [left, right] window is what any single add/remove can reach."
)
