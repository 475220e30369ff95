"""Token vocabulary, seed records, and next-token logit providers.

Two providers implement the same interface: a smoothed n-gram model trained
on a public corpus (deterministic, closed-form probabilities), and a replay
provider that serves pre-recorded logit vectors keyed by seed id and
generated prefix, which makes exact enumeration tests possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import DataError, EmptyBatchError, InvalidInputError
from .jsonio import read_jsonl, write_jsonl

__all__ = [
    "BOS",
    "EOS",
    "Vocabulary",
    "SeedRecord",
    "LogitsProvider",
    "NGramModel",
    "train_ngram",
    "ReplayProvider",
    "tokenize",
    "detokenize",
]

BOS = "<bos>"
EOS = "<eos>"


def tokenize(text: str, mode: str = "char") -> list[str]:
    """Split ``text`` into tokens: one per character or whitespace-separated."""
    if mode == "char":
        return list(text)
    if mode == "whitespace":
        return text.split()
    raise InvalidInputError(f"unknown tokenizer mode: {mode!r}")


def detokenize(tokens: Sequence[str], mode: str = "char") -> str:
    if mode == "char":
        return "".join(tokens)
    if mode == "whitespace":
        return " ".join(tokens)
    raise InvalidInputError(f"unknown tokenizer mode: {mode!r}")


class Vocabulary:
    """Bijection between token strings and stable integer ids.

    The end-of-sequence token always has id 0 and is part of the samplable
    vocabulary (logit vectors have one entry per samplable token). The
    begin-of-sequence marker is a context-only sentinel with id ``size``;
    it never appears in a logit vector and is never generated.
    """

    def __init__(self, tokens: Sequence[str]):
        ordered = [t for t in dict.fromkeys(tokens) if t not in (BOS, EOS)]
        self.tokens: tuple[str, ...] = (EOS, *ordered)
        self._ids = {token: index for index, token in enumerate(self.tokens)}
        self._ids[BOS] = len(self.tokens)

    @property
    def size(self) -> int:
        """Number of samplable tokens; the length of every logit vector."""
        return len(self.tokens)

    @property
    def eos_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise DataError(f"token not in vocabulary: {token!r}") from None

    def token_of(self, token_id: int) -> str:
        if token_id == self.bos_id:
            return BOS
        if 0 <= token_id < self.size:
            return self.tokens[token_id]
        raise DataError(f"token id out of range: {token_id}")

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids: Sequence[int], drop_reserved: bool = True) -> list[str]:
        tokens = [self.token_of(i) for i in ids]
        if drop_reserved:
            tokens = [t for t in tokens if t not in (BOS, EOS)]
        return tokens

    @classmethod
    def from_corpus(cls, texts: Sequence[str], tokenizer: str = "char") -> "Vocabulary":
        seen: dict[str, None] = {}
        for text in texts:
            for token in tokenize(text, tokenizer):
                seen[token] = None
        return cls(sorted(seen))

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __repr__(self) -> str:
        return f"Vocabulary(size={self.size})"


@dataclass
class SeedRecord:
    """One sensitive example: token ids plus optional label and embedding."""

    seed_id: str
    tokens: tuple[int, ...]
    label: str | None = None
    embedding: np.ndarray | None = None


class LogitsProvider(Protocol):
    """Next-token logits for a seed continued by the generated prefix."""

    vocab: Vocabulary

    def next_logits(self, seed: SeedRecord, generated: Sequence[int]) -> np.ndarray: ...


@dataclass
class NGramModel:
    """Add-lambda smoothed n-gram model over a fixed vocabulary.

    Conditional probabilities over the samplable vocabulary sum to one for
    every context; contexts never seen in training fall back to the uniform
    distribution (pure smoothing). Immutable after training, so instances
    are safe to share across threads.
    """

    vocab: Vocabulary
    order: int
    smoothing: float
    counts: dict[tuple[int, ...], np.ndarray] = field(default_factory=dict)

    def _context_key(self, context: Sequence[int]) -> tuple[int, ...]:
        width = self.order - 1
        if width == 0:
            return ()
        padded = [self.vocab.bos_id] * width + list(context)
        return tuple(padded[-width:])

    def logits(self, context: Sequence[int]) -> np.ndarray:
        """Log of the smoothed next-token distribution given ``context``.

        Only the trailing ``order - 1`` tokens matter. ``softmax(logits)``
        recovers the conditional distribution exactly.
        """
        for token_id in context:
            if not (0 <= token_id <= self.vocab.bos_id):
                raise DataError(f"token id out of range: {token_id}")
        key = self._context_key(context)
        observed = self.counts.get(key)
        size = self.vocab.size
        if observed is None:
            observed = np.zeros(size)
        probs = (observed + self.smoothing) / (observed.sum() + self.smoothing * size)
        return np.log(probs)

    def next_logits(self, seed: SeedRecord, generated: Sequence[int]) -> np.ndarray:
        return self.logits(tuple(seed.tokens) + tuple(generated))


def train_ngram(
    corpus: Sequence[Sequence[str]],
    order: int,
    smoothing: float,
    vocab: Vocabulary | None = None,
) -> NGramModel:
    """Count all length-``order`` windows of the corpus with BOS/EOS padding.

    ``corpus`` is a list of token-string sequences (a plain string works as
    a character sequence). The vocabulary defaults to the sorted set of
    corpus tokens plus the reserved markers.
    """
    if order < 1:
        raise InvalidInputError(f"order must be >= 1, got {order}")
    if not smoothing > 0:
        raise InvalidInputError(f"smoothing must be positive, got {smoothing}")
    if len(corpus) == 0:
        raise EmptyBatchError("training corpus is empty")

    if vocab is None:
        seen: set[str] = set()
        for sequence in corpus:
            seen.update(sequence)
        vocab = Vocabulary(sorted(seen))

    model = NGramModel(vocab=vocab, order=order, smoothing=float(smoothing))
    width = order - 1
    for sequence in corpus:
        ids = [vocab.bos_id] * width + vocab.encode(list(sequence)) + [vocab.eos_id]
        for start in range(len(ids) - order + 1):
            context = tuple(ids[start : start + width])
            target = ids[start + width]
            row = model.counts.get(context)
            if row is None:
                row = np.zeros(vocab.size)
                model.counts[context] = row
            row[target] += 1.0
    return model


class ReplayProvider:
    """Serves recorded logit vectors keyed by ``(seed_id, generated prefix)``."""

    def __init__(self, vocab: Vocabulary, table: dict[tuple[str, tuple[int, ...]], np.ndarray]):
        self.vocab = vocab
        self._table = {
            (seed_id, tuple(prefix)): np.asarray(row, dtype=np.float64)
            for (seed_id, prefix), row in table.items()
        }

    def next_logits(self, seed: SeedRecord, generated: Sequence[int]) -> np.ndarray:
        key = (seed.seed_id, tuple(generated))
        try:
            return self._table[key]
        except KeyError:
            raise DataError(
                f"no recorded logits for seed {seed.seed_id!r} at prefix {tuple(generated)}"
            ) from None

    @classmethod
    def from_jsonl(cls, path, vocab: Vocabulary) -> "ReplayProvider":
        table = {}
        for record in read_jsonl(path):
            try:
                key = (str(record["seed_id"]), tuple(int(t) for t in record["prefix"]))
                row = np.asarray(record["logits"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}: malformed trace record ({exc})") from exc
            if row.shape != (vocab.size,):
                raise DataError(
                    f"{path}: trace logits have length {row.size}, expected {vocab.size}"
                )
            table[key] = row
        return cls(vocab, table)

    def to_jsonl(self, path) -> None:
        records = [
            {"seed_id": seed_id, "prefix": list(prefix), "logits": row.tolist()}
            for (seed_id, prefix), row in sorted(self._table.items())
        ]
        write_jsonl(path, records)
