"""Embedding-space clustering, private rebalancing, and batch planning.

Cluster centers are fit on public data only (no privacy cost). The private
step is rebalancing: each seed's nearest-center count gets independent
Laplace noise (sensitivity 1 under add/remove) and only the highest-count
centers survive. Batches are then formed within each (label, cluster) group
so a batch never mixes labels or clusters.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, InvalidInputError
from .jsonio import read_json, read_jsonl, write_json
from .lm import SeedRecord

__all__ = [
    "ClusterModel",
    "Batch",
    "BatchAssignment",
    "kmeans",
    "assign",
    "assign_many",
    "rebalance",
    "plan_batches",
    "toy_embed",
    "load_embeddings",
]

logger = logging.getLogger(__name__)


@dataclass
class ClusterModel:
    """A set of cluster centers plus where they came from.

    ``clustering_epsilon`` records the privacy cost spent selecting the
    centers (zero for purely public fits, the noisy-count charge after
    rebalancing).
    """

    centers: np.ndarray
    source: str = "public"
    clustering_epsilon: float = 0.0
    inertia_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.ndim != 2 or self.centers.shape[0] < 1:
            raise InvalidInputError("centers must be a (k, dim) array with k >= 1")
        if not np.all(np.isfinite(self.centers)):
            raise InvalidInputError("cluster centers must be finite")

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def save(self, path, extra: dict | None = None) -> None:
        payload = {
            "dim": self.dim,
            "k": self.k,
            "centers": self.centers.tolist(),
            "source": self.source,
            "clustering_epsilon": self.clustering_epsilon,
        }
        if extra:
            payload.update(extra)
        write_json(path, payload)

    @classmethod
    def load(cls, path) -> "ClusterModel":
        payload = read_json(path)
        try:
            centers = np.asarray(payload["centers"], dtype=np.float64)
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: malformed cluster model ({exc})") from exc
        if "k" in payload and int(payload["k"]) != centers.shape[0]:
            raise DataError(f"{path}: declared k={payload['k']} but {centers.shape[0]} centers")
        if "dim" in payload and centers.size and int(payload["dim"]) != centers.shape[1]:
            raise DataError(f"{path}: declared dim does not match centers")
        return cls(
            centers=centers,
            source=str(payload.get("source", "external-file")),
            clustering_epsilon=float(payload.get("clustering_epsilon", 0.0)),
        )


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, np.newaxis, :] - centers[np.newaxis, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    sq_dists = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = sq_dists.sum()
        if total > 0:
            choice = rng.choice(n, p=sq_dists / total)
        else:
            choice = rng.integers(n)
        centers[i] = points[choice]
        sq_dists = np.minimum(sq_dists, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def kmeans(points, k: int, max_iters: int = 100, rng_seed: int = 0) -> ClusterModel:
    """Lloyd's algorithm with k-means++ initialization.

    Deterministic for a fixed ``rng_seed``. The sum of squared distances to
    the nearest center never increases between iterations; the per-iteration
    values are kept on the returned model for auditing.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise InvalidInputError(f"points must be a (n, dim) array, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise InvalidInputError("points must be finite")
    n = points.shape[0]
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if k > n:
        raise InvalidInputError(f"k={k} exceeds the number of points ({n})")

    rng = np.random.default_rng(rng_seed)
    centers = _kmeans_pp_init(points, k, rng)
    history: list[float] = []
    labels = None
    for _ in range(max_iters):
        sq_dists = _pairwise_sq_dists(points, centers)
        new_labels = sq_dists.argmin(axis=1)
        history.append(float(sq_dists[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = points[labels == j]
            if members.shape[0] > 0:
                centers[j] = members.mean(axis=0)
    return ClusterModel(centers=centers, source="public", inertia_history=history)


def assign(model: ClusterModel, embedding) -> int:
    """Index of the nearest center in Euclidean norm; ties go to the lowest index."""
    e = np.asarray(embedding, dtype=np.float64)
    if e.shape != (model.dim,):
        raise InvalidInputError(f"embedding has shape {e.shape}, expected ({model.dim},)")
    return int(((model.centers - e) ** 2).sum(axis=1).argmin())


def assign_many(model: ClusterModel, points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != model.dim:
        raise InvalidInputError(f"points have shape {points.shape}, expected (n, {model.dim})")
    return _pairwise_sq_dists(points, model.centers).argmin(axis=1)


def rebalance(
    model: ClusterModel,
    seed_embeddings,
    k_prime: int,
    epsilon_count: float,
    rng_seed: int = 0,
) -> ClusterModel:
    """Keep the ``k_prime`` centers with the highest Laplace-noised seed counts.

    Counting a seed's nearest center has add/remove sensitivity 1, so each
    count gets independent Laplace noise of scale ``1 / epsilon_count``.
    The spent ``epsilon_count`` is recorded on the returned model.
    """
    if k_prime < 1 or k_prime > model.k:
        raise ConfigError(f"k_prime must be in [1, {model.k}], got {k_prime}")
    if not epsilon_count > 0:
        raise ConfigError(f"epsilon_count must be positive, got {epsilon_count}")
    labels = assign_many(model, seed_embeddings)
    counts = np.bincount(labels, minlength=model.k).astype(np.float64)
    rng = np.random.default_rng(rng_seed)
    noisy = counts + rng.laplace(loc=0.0, scale=1.0 / epsilon_count, size=model.k)
    keep = np.argsort(-noisy, kind="stable")[:k_prime]
    return ClusterModel(
        centers=model.centers[keep].copy(),
        source=model.source,
        clustering_epsilon=float(epsilon_count),
    )


@dataclass(frozen=True)
class Batch:
    """One generation batch: seeds sharing a cluster and (if present) a label."""

    batch_id: int
    cluster_id: int
    label: str | None
    seed_ids: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.seed_ids)


@dataclass
class BatchAssignment:
    """Partition of the retained seeds into batches, plus the audit trail."""

    batches: list[Batch]
    assignment: dict[str, tuple[int, int]]
    dropped_seed_ids: list[str]


def _group_rng(rng_seed: int, label: str | None, cluster_id: int) -> np.random.Generator:
    digest = hashlib.blake2b(
        f"batch|{label}|{cluster_id}".encode("utf-8"), digest_size=8
    ).digest()
    key = int.from_bytes(digest, "big")
    return np.random.default_rng(np.random.SeedSequence([rng_seed, key]))


def plan_batches(
    seeds: list[SeedRecord],
    cluster_ids,
    batch_size: int | None = None,
    num_batches: int | None = None,
    min_batch_size: int = 2,
    rng_seed: int = 0,
) -> BatchAssignment:
    """Partition seeds into batches within each (label, cluster) group.

    Exactly one of ``batch_size`` (fixed-size mode: shuffle the group and
    chunk it, dropping a trailing remainder smaller than ``min_batch_size``)
    and ``num_batches`` (random mode: each seed draws a uniform sub-batch
    index) must be given. Deterministic in ``rng_seed`` and independent of
    the input order: groups are keyed by content, members sorted by seed id.
    """
    if (batch_size is None) == (num_batches is None):
        raise ConfigError("exactly one of batch_size and num_batches must be set")
    if batch_size is not None and batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if num_batches is not None and num_batches < 1:
        raise ConfigError(f"num_batches must be >= 1, got {num_batches}")
    if len(cluster_ids) != len(seeds):
        raise InvalidInputError("cluster_ids must align with seeds")

    groups: dict[tuple[str, int], list[SeedRecord]] = {}
    for seed, cluster_id in zip(seeds, cluster_ids):
        groups.setdefault((seed.label or "", int(cluster_id)), []).append(seed)

    batches: list[Batch] = []
    assignment: dict[str, tuple[int, int]] = {}
    dropped: list[str] = []
    next_batch_id = 0
    for (label_key, cluster_id) in sorted(groups):
        members = sorted(groups[(label_key, cluster_id)], key=lambda s: s.seed_id)
        label = label_key or None
        rng = _group_rng(rng_seed, label, cluster_id)
        if batch_size is not None:
            order = rng.permutation(len(members))
            chunks = [
                [members[i] for i in order[start : start + batch_size]]
                for start in range(0, len(members), batch_size)
            ]
            if chunks and len(chunks[-1]) < min_batch_size:
                remainder = chunks.pop()
                dropped.extend(s.seed_id for s in remainder)
                logger.info(
                    "dropped %d seed(s) from cluster %d (label %r): remainder below %d",
                    len(remainder), cluster_id, label, min_batch_size,
                )
        else:
            draws = rng.integers(num_batches, size=len(members))
            buckets: dict[int, list[SeedRecord]] = {}
            for seed, draw in zip(members, draws):
                buckets.setdefault(int(draw), []).append(seed)
            chunks = [buckets[i] for i in sorted(buckets)]

        for sub_index, chunk in enumerate(chunks):
            batch = Batch(
                batch_id=next_batch_id,
                cluster_id=cluster_id,
                label=label,
                seed_ids=tuple(s.seed_id for s in chunk),
            )
            batches.append(batch)
            for seed in chunk:
                assignment[seed.seed_id] = (cluster_id, sub_index)
            next_batch_id += 1

    return BatchAssignment(batches=batches, assignment=assignment, dropped_seed_ids=dropped)


def _sign_row(gram: str, dim: int, rng_seed: int) -> np.ndarray:
    digest = hashlib.blake2b(
        gram.encode("utf-8"),
        digest_size=(dim + 7) // 8,
        salt=int(rng_seed).to_bytes(8, "big", signed=True),
    ).digest()
    bits = np.unpackbits(np.frombuffer(digest, dtype=np.uint8))[:dim]
    return bits.astype(np.float64) * 2.0 - 1.0


def toy_embed(text: str, dim: int = 32, ngram_sizes=(1, 2, 3), rng_seed: int = 0) -> np.ndarray:
    """Deterministic stand-in for a sentence embedder.

    Character n-gram counts are projected onto ``dim`` dimensions through a
    hash-seeded random sign matrix and L2-normalized, so identical texts map
    to identical unit vectors and texts sharing n-grams land closer together.
    """
    if dim < 1:
        raise InvalidInputError(f"dim must be >= 1, got {dim}")
    if not text:
        raise InvalidInputError("cannot embed an empty text")
    grams: dict[str, int] = {}
    for size in ngram_sizes:
        for start in range(max(0, len(text) - size + 1)):
            gram = text[start : start + size]
            grams[gram] = grams.get(gram, 0) + 1
    vec = np.zeros(dim)
    for gram, count in grams.items():
        vec += count * _sign_row(gram, dim, rng_seed)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise InvalidInputError("text produced no usable features")
    return vec / norm


def load_embeddings(path) -> dict[str, np.ndarray]:
    """Read a JSONL embeddings file: one ``{"id", "vec"}`` record per line."""
    table: dict[str, np.ndarray] = {}
    for record in read_jsonl(path):
        try:
            table[str(record["id"])] = np.asarray(record["vec"], dtype=np.float64)
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: malformed embedding record ({exc})") from exc
    return table
