"""Clustering quality metrics: homogeneity, completeness, V-measure.

Computed from first principles on the contingency table, in nats. Used to
compare a cluster assignment against a reference labeling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = ["VMeasure", "v_measure", "cluster_sizes"]


@dataclass(frozen=True)
class VMeasure:
    homogeneity: float
    completeness: float
    v: float


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    probs = counts[counts > 0] / total
    return float(-(probs * np.log(probs)).sum())


def v_measure(reference_labels, cluster_labels, beta: float = 1.0) -> VMeasure:
    """Harmonic mean of homogeneity and completeness (weighted by ``beta``).

    Homogeneity is 1 when every cluster contains members of a single
    reference class; completeness is 1 when every class sits inside a
    single cluster. Degenerate zero-entropy sides score 1 by convention.
    """
    reference = list(reference_labels)
    clusters = list(cluster_labels)
    if len(reference) != len(clusters):
        raise InvalidInputError("label sequences must have equal length")
    if not reference:
        raise InvalidInputError("cannot score an empty labeling")

    ref_ids = {label: i for i, label in enumerate(dict.fromkeys(reference))}
    clu_ids = {label: i for i, label in enumerate(dict.fromkeys(clusters))}
    table = np.zeros((len(ref_ids), len(clu_ids)))
    for ref, clu in zip(reference, clusters):
        table[ref_ids[ref], clu_ids[clu]] += 1.0

    n = table.sum()
    h_ref = _entropy(table.sum(axis=1))
    h_clu = _entropy(table.sum(axis=0))
    h_ref_given_clu = sum(
        (table[:, j].sum() / n) * _entropy(table[:, j]) for j in range(table.shape[1])
    )
    h_clu_given_ref = sum(
        (table[i, :].sum() / n) * _entropy(table[i, :]) for i in range(table.shape[0])
    )

    homogeneity = 1.0 if h_ref == 0.0 else 1.0 - h_ref_given_clu / h_ref
    completeness = 1.0 if h_clu == 0.0 else 1.0 - h_clu_given_ref / h_clu
    if homogeneity + completeness == 0.0:
        v = 0.0
    else:
        v = (
            (1.0 + beta)
            * homogeneity
            * completeness
            / (beta * homogeneity + completeness)
        )
    return VMeasure(homogeneity=float(homogeneity), completeness=float(completeness), v=float(v))


def cluster_sizes(cluster_labels) -> dict[int, int]:
    """Count members per cluster id, sorted by id."""
    sizes: dict[int, int] = {}
    for label in cluster_labels:
        key = int(label)
        sizes[key] = sizes.get(key, 0) + 1
    return dict(sorted(sizes.items()))
