"""Per-token privacy costs and the append-only privacy ledger.

Median mode charges each sampled token a data-dependent cost derived from
how far the batch median could move if one vector were added or removed
(the gap to the adjacent order statistics). Mean mode charges a constant
per token from the global sensitivity of the clipped mean. The ledger
collects the realized costs per batch; the reported generation guarantee
is the maximum per-batch sum, and the clustering cost composes additively
on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aggregation import MedianTriple, median_triple
from .errors import InvalidInputError

__all__ = [
    "CostBounds",
    "PerTokenCost",
    "PrivacyLedger",
    "PrivacyReport",
    "triple_cost_bounds",
    "token_cost_bounds",
    "mean_mode_token_cost",
    "build_report",
]


@dataclass(frozen=True)
class CostBounds:
    """Likelihood-ratio bounds for one sampled token against any neighbor batch.

    ``lower_ratio <= 1 <= upper_ratio`` bound the probability ratio of the
    realized token under the actual batch versus any batch differing by one
    vector; ``cost`` is ``max(log(1/lower_ratio), log(upper_ratio))`` in nats.
    """

    lower_ratio: float
    upper_ratio: float
    cost: float


def _log_sum_exp(values: np.ndarray) -> float:
    peak = values.max()
    return float(peak + np.log(np.exp(values - peak).sum()))


def _check_temperature(temperature: float) -> float:
    temperature = float(temperature)
    if not np.isfinite(temperature) or temperature <= 0.0:
        raise InvalidInputError(f"temperature must be a positive real, got {temperature!r}")
    return temperature


def triple_cost_bounds(triple: MedianTriple, token: int, temperature: float) -> CostBounds:
    """Cost bounds for sampling ``token`` from the median of a clipped batch.

    Works directly on the precomputed order statistics so the generation
    loop can reuse one :func:`~dpsynth.aggregation.median_triple` call for
    both sampling and accounting.
    """
    temperature = _check_temperature(temperature)
    scale = 1.0 / temperature
    lse_left = _log_sum_exp(triple.left * scale)
    lse_mid = _log_sum_exp(triple.mid * scale)
    lse_right = _log_sum_exp(triple.right * scale)
    log_lower = (triple.mid[token] - triple.right[token]) * scale + lse_left - lse_mid
    log_upper = (triple.mid[token] - triple.left[token]) * scale + lse_right - lse_mid
    # Rounding can leave a harmless -1e-16; the true cost is never negative.
    cost = max(0.0, -log_lower, log_upper)
    return CostBounds(
        lower_ratio=float(np.exp(log_lower)),
        upper_ratio=float(np.exp(log_upper)),
        cost=float(cost),
    )


def token_cost_bounds(vectors, token: int, bound: float, temperature: float) -> CostBounds:
    """Clip ``vectors``, take the median order statistics, and bound the token cost."""
    return triple_cost_bounds(median_triple(vectors, bound), token, temperature)


def mean_mode_token_cost(batch_size: int, bound: float, temperature: float) -> float:
    """Constant per-token cost of mean aggregation for a batch of ``batch_size``.

    The clipped componentwise mean of ``k`` vectors moves by at most
    ``2 * bound / (k - 1)`` when one vector is added or removed, and sampling
    from the softmax of a vector perturbed by ``delta`` changes any token's
    probability by a factor of at most ``exp(2 * delta / temperature)``,
    giving ``4 * bound / (temperature * (k - 1))``.
    """
    batch_size = int(batch_size)
    if batch_size < 2:
        raise InvalidInputError(
            f"mean-mode accounting requires a batch of at least 2, got {batch_size}"
        )
    temperature = _check_temperature(temperature)
    bound = float(bound)
    if not np.isfinite(bound) or bound <= 0.0:
        raise InvalidInputError(f"clip bound must be a positive real, got {bound!r}")
    return 4.0 * bound / (temperature * (batch_size - 1))


@dataclass(frozen=True)
class PerTokenCost:
    """Realized cost of one sampled token: which batch, position (1-based), token id."""

    batch_id: int
    position: int
    token: int
    cost: float


@dataclass
class PrivacyLedger:
    """Append-only log of realized per-token costs plus the clustering charge.

    Appends are merge-safe: all derived quantities sort the records by
    ``(batch_id, position)`` first, so concurrently generated batches can
    append in any order without changing a single reported number.
    """

    mode: str
    temperature: float
    clip: float
    clustering_epsilon: float = 0.0
    costs: list[PerTokenCost] = field(default_factory=list)

    def append(self, cost: PerTokenCost) -> None:
        self.costs.append(cost)

    def extend(self, costs) -> None:
        self.costs.extend(costs)

    def merge(self, other: "PrivacyLedger") -> None:
        """Fold another ledger's records into this one (same run parameters)."""
        if (other.mode, other.temperature, other.clip) != (self.mode, self.temperature, self.clip):
            raise InvalidInputError("cannot merge ledgers with different run parameters")
        self.costs.extend(other.costs)

    def _sorted_costs(self) -> list[PerTokenCost]:
        return sorted(self.costs, key=lambda c: (c.batch_id, c.position))

    def per_batch_sums(self) -> dict[int, float]:
        sums: dict[int, float] = {}
        for record in self._sorted_costs():
            sums[record.batch_id] = sums.get(record.batch_id, 0.0) + record.cost
        return sums

    def generation_epsilon(self) -> float:
        sums = self.per_batch_sums()
        return max(sums.values()) if sums else 0.0

    def total_epsilon(self) -> float:
        return self.generation_epsilon() + self.clustering_epsilon

    def to_records(self) -> list[dict]:
        """Full per-token granularity, e.g. for auditing a report from raw data."""
        return [
            {"batch_id": c.batch_id, "position": c.position, "token": c.token, "cost": c.cost}
            for c in self._sorted_costs()
        ]


@dataclass(frozen=True)
class PrivacyReport:
    """Aggregated view of a ledger: per-batch sums, their max, and totals."""

    mode: str
    temperature: float
    clip: float
    clustering_epsilon: float
    per_batch: list[tuple[int, float]]
    generation_epsilon: float
    total_epsilon: float
    per_position_mean_cost: list[float]
    batch_epsilon_histogram: tuple[list[int], list[float]]

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "temperature": self.temperature,
            "clip": self.clip,
            "clustering_epsilon": self.clustering_epsilon,
            "per_batch": [
                {"batch_id": batch_id, "epsilon": epsilon}
                for batch_id, epsilon in self.per_batch
            ],
            "generation_epsilon": self.generation_epsilon,
            "total_epsilon": self.total_epsilon,
            "per_position_mean_gamma": self.per_position_mean_cost,
            "batch_epsilon_histogram": {
                "counts": self.batch_epsilon_histogram[0],
                "bin_edges": self.batch_epsilon_histogram[1],
            },
        }


def build_report(ledger: PrivacyLedger, histogram_bins: int = 10) -> PrivacyReport:
    """Summarize a ledger.

    ``generation_epsilon`` is the maximum per-batch sum of realized costs,
    ``total_epsilon`` adds the clustering charge on top (basic composition),
    and ``per_position_mean_cost`` averages the cost at each token position
    over the batches that reached it.
    """
    sums = ledger.per_batch_sums()
    per_batch = sorted(sums.items())
    generation = max(sums.values()) if sums else 0.0

    by_position: dict[int, list[float]] = {}
    for record in ledger.costs:
        by_position.setdefault(record.position, []).append(record.cost)
    per_position = [
        float(np.mean(by_position[pos])) for pos in sorted(by_position)
    ]

    if per_batch:
        counts, edges = np.histogram([eps for _, eps in per_batch], bins=histogram_bins)
        histogram = (counts.tolist(), edges.tolist())
    else:
        histogram = ([], [])

    return PrivacyReport(
        mode=ledger.mode,
        temperature=ledger.temperature,
        clip=ledger.clip,
        clustering_epsilon=ledger.clustering_epsilon,
        per_batch=per_batch,
        generation_epsilon=generation,
        total_epsilon=generation + ledger.clustering_epsilon,
        per_position_mean_cost=per_position,
        batch_epsilon_histogram=histogram,
    )
