#!/usr/bin/env python3
"""Public-center clustering with private rebalancing, on a 2-D mixture.

Centers are fit on public points only (no privacy cost). The private step
adds Laplace noise to each center's seed count and keeps the top k'; seeds
are then re-assigned among the survivors and batched within clusters.
"""

import numpy as np

from dpsynth import SeedRecord, assign_many, kmeans, plan_batches, rebalance, v_measure

rng = np.random.default_rng(1)
angles = np.linspace(0, 2 * np.pi, 6, endpoint=False)
means = np.column_stack([np.cos(angles), np.sin(angles)]) * 12.0

private = np.vstack([mu + rng.normal(scale=0.05, size=(150, 2)) for mu in means])
truth = np.repeat(np.arange(6), 150)
public = np.vstack([mu + rng.normal(scale=1.0, size=(80, 2)) for mu in means])

model = kmeans(public, k=24, rng_seed=0)
print(f"public k-means: {model.k} centers, final objective {model.inertia_history[-1]:.1f}")

kept = rebalance(model, private, k_prime=6, epsilon_count=0.1, rng_seed=0)
labels = assign_many(kept, private)
score = v_measure(truth.tolist(), labels.tolist())
print(f"after rebalancing to {kept.k} centers at epsilon={kept.clustering_epsilon}:")
print(f"  V-measure vs. ground truth: {score.v:.3f}")
sizes = np.bincount(labels)
print(f"  cluster sizes: {sizes.tolist()}")

seeds = [SeedRecord(seed_id=f"s{i:04d}", tokens=()) for i in range(len(private))]
plan = plan_batches(seeds, labels, batch_size=32, rng_seed=0)
print(f"batch plan: {len(plan.batches)} batches, {len(plan.dropped_seed_ids)} seed(s) dropped")
for batch in plan.batches[:4]:
    print(f"  batch {batch.batch_id}: cluster {batch.cluster_id}, {batch.size} seeds")
