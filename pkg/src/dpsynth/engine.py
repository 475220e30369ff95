"""Batched token-by-token generation with pluggable aggregation.

Each batch produces one synthetic sequence: at every step the provider's
logit vectors for all seeds (seed text plus tokens generated so far) are
aggregated with the clipped mean or clipped componentwise median, and the
next token is sampled from the softmax of the aggregate at the configured
temperature. Median mode records the realized data-dependent cost of every
sampled token; mean mode records the constant per-token charge.

Every batch draws from its own counter-based random stream keyed by
``(rng_seed, batch_id)``, so generating batches in any order, or in
parallel, produces bit-identical output.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .aggregation import aggregate_mean, median_triple
from .clustering import BatchAssignment
from .errors import ConfigError, EmptyBatchError, InvalidInputError
from .lm import LogitsProvider, SeedRecord
from .privacy import PerTokenCost, PrivacyLedger, mean_mode_token_cost, triple_cost_bounds

__all__ = [
    "GenerationConfig",
    "SyntheticExample",
    "batch_rng",
    "sample_token",
    "generate_batch",
    "generate_all",
]

logger = logging.getLogger(__name__)

MODES = ("mean", "median")
DEFAULT_CLIP = {"mean": 9.0, "median": 6.0}


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs of the generation loop.

    ``clip`` defaults per mode (9 for mean, 6 for median) when left unset.
    """

    mode: str = "median"
    temperature: float = 1.5
    clip: float | None = None
    max_tokens: int = 64
    rng_seed: int = 0
    stop_at_eos: bool = True

    def validated(self) -> "GenerationConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        clip = self.clip if self.clip is not None else DEFAULT_CLIP[self.mode]
        if not clip > 0:
            raise ConfigError(f"clip must be positive, got {clip}")
        if self.max_tokens < 1:
            raise ConfigError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.rng_seed < 0:
            raise ConfigError(f"rng_seed must be non-negative, got {self.rng_seed}")
        return replace(self, clip=float(clip))


@dataclass
class SyntheticExample:
    """One generated sequence with its per-token accounting."""

    batch_id: int
    cluster_id: int
    label: str | None
    tokens: list[int]
    per_token_cost: list[float]

    def costs(self) -> list[PerTokenCost]:
        return [
            PerTokenCost(batch_id=self.batch_id, position=pos, token=tok, cost=cost)
            for pos, (tok, cost) in enumerate(zip(self.tokens, self.per_token_cost), start=1)
        ]


def batch_rng(rng_seed: int, batch_id: int) -> np.random.Generator:
    """Counter-based stream for one batch; independent of processing order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([rng_seed, batch_id])))


def sample_token(rng: np.random.Generator, logits: np.ndarray, temperature: float) -> int:
    """Draw from softmax(logits / temperature) via Gumbel-max in log space.

    Working in log space keeps extreme temperatures safe: as temperature
    shrinks toward zero this becomes greedy argmax instead of underflowing.
    """
    if not temperature > 0:
        raise InvalidInputError(f"temperature must be positive, got {temperature}")
    noise = rng.gumbel(size=logits.shape[0])
    return int(np.argmax(logits / temperature + noise))


def generate_batch(
    seeds: list[SeedRecord],
    provider: LogitsProvider,
    config: GenerationConfig,
    batch_id: int = 0,
    cluster_id: int = 0,
    label: str | None = None,
) -> SyntheticExample:
    """Generate one synthetic sequence from a batch of seeds.

    Mean mode needs at least two seeds (its per-token cost is stated for
    a deletion neighbor and would be unbounded for a singleton); median
    mode accepts a single seed.
    """
    config = config.validated()
    if len(seeds) == 0:
        raise EmptyBatchError("cannot generate from an empty batch")
    if config.mode == "mean" and len(seeds) < 2:
        raise EmptyBatchError("mean mode requires a batch of at least 2 seeds")

    rng = batch_rng(config.rng_seed, batch_id)
    eos = provider.vocab.eos_id
    if config.mode == "mean":
        flat_cost = mean_mode_token_cost(len(seeds), config.clip, config.temperature)

    generated: list[int] = []
    costs: list[float] = []
    for _ in range(config.max_tokens):
        stacked = np.stack([provider.next_logits(seed, generated) for seed in seeds])
        if config.mode == "median":
            triple = median_triple(stacked, config.clip)
            aggregated = triple.mid
        else:
            aggregated = aggregate_mean(stacked, config.clip)
        token = sample_token(rng, aggregated, config.temperature)
        if config.mode == "median":
            costs.append(triple_cost_bounds(triple, token, config.temperature).cost)
        else:
            costs.append(flat_cost)
        generated.append(token)
        if config.stop_at_eos and token == eos:
            break

    return SyntheticExample(
        batch_id=batch_id,
        cluster_id=cluster_id,
        label=label,
        tokens=generated,
        per_token_cost=costs,
    )


def generate_all(
    seeds: list[SeedRecord],
    plan: BatchAssignment,
    provider: LogitsProvider,
    config: GenerationConfig,
    clustering_epsilon: float = 0.0,
    jobs: int = 1,
) -> tuple[list[SyntheticExample], PrivacyLedger]:
    """Generate one example per planned batch and assemble the ledger.

    Batches too small for the configured mode are skipped with a log line.
    Output is sorted by batch id and bit-identical for any ``jobs`` value.
    """
    config = config.validated()
    by_id = {seed.seed_id: seed for seed in seeds}
    minimum = 2 if config.mode == "mean" else 1

    runnable = []
    for batch in plan.batches:
        if batch.size < minimum:
            logger.info(
                "skipping batch %d (size %d below %s-mode minimum %d)",
                batch.batch_id, batch.size, config.mode, minimum,
            )
            continue
        runnable.append(batch)

    def run(batch):
        members = [by_id[seed_id] for seed_id in batch.seed_ids]
        return generate_batch(
            members,
            provider,
            config,
            batch_id=batch.batch_id,
            cluster_id=batch.cluster_id,
            label=batch.label,
        )

    if jobs > 1 and len(runnable) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            examples = list(pool.map(run, runnable))
    else:
        examples = [run(batch) for batch in runnable]
    examples.sort(key=lambda ex: ex.batch_id)

    ledger = PrivacyLedger(
        mode=config.mode,
        temperature=config.temperature,
        clip=config.clip,
        clustering_epsilon=float(clustering_epsilon),
    )
    for example in examples:
        ledger.extend(example.costs())
    return examples, ledger
