"""Command-line pipeline: cluster, rebalance, generate, evaluate.

All randomness flows from ``--rng-seed``; reruns with identical inputs and
flags produce byte-identical outputs, and every output file carries a
fingerprint of the resolved configuration. Exit codes: 0 on success, 2 for
configuration errors, 3 for data errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .clustering import (
    ClusterModel,
    assign_many,
    kmeans,
    load_embeddings,
    plan_batches,
    rebalance,
    toy_embed,
)
from .engine import GenerationConfig, generate_all
from .errors import ConfigError, DataError, DpsynthError
from .jsonio import read_json, read_jsonl, write_json, write_jsonl
from .lm import ReplayProvider, SeedRecord, Vocabulary, detokenize, tokenize, train_ngram
from .metrics import cluster_sizes, v_measure
from .privacy import build_report
from . import __version__

logger = logging.getLogger(__name__)


def file_digest(path) -> str | None:
    """Content hash of an input file; None for absent optional inputs."""
    if path is None:
        return None
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    return hashlib.sha256(path.read_bytes()).hexdigest()


def config_fingerprint(command: str, params: dict) -> str:
    """Stable hash of the semantic configuration plus input-content digests.

    Output locations and the parallelism degree are deliberately excluded:
    the same inputs, flags, and seed must produce byte-identical outputs
    wherever and however they run.
    """
    payload = {"command": command, "version": __version__, **params}
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _read_text_lines(path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    return [line.rstrip("\n") for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def load_seeds(path) -> list[dict]:
    records = read_jsonl(path)
    if not records:
        raise DataError(f"{path}: no seed records")
    seeds = []
    seen = set()
    for record in records:
        if "id" not in record or "text" not in record:
            raise DataError(f"{path}: seed records need 'id' and 'text' fields")
        seed_id = str(record["id"])
        if seed_id in seen:
            raise DataError(f"{path}: duplicate seed id {seed_id!r}")
        seen.add(seed_id)
        seeds.append(
            {"id": seed_id, "text": str(record["text"]), "label": record.get("label")}
        )
    return seeds


def _seed_embeddings(seeds: list[dict], args) -> np.ndarray:
    if getattr(args, "embeddings", None):
        table = load_embeddings(args.embeddings)
        rows = []
        for seed in seeds:
            if seed["id"] not in table:
                raise DataError(f"no embedding for seed id {seed['id']!r}")
            rows.append(table[seed["id"]])
        return np.asarray(rows)
    return np.asarray(
        [toy_embed(seed["text"], dim=args.embed_dim, rng_seed=args.embed_seed) for seed in seeds]
    )


def cmd_cluster(args) -> int:
    if (args.public_corpus is None) == (args.public_embeddings is None):
        raise ConfigError("provide exactly one of --public-corpus and --public-embeddings")
    if args.public_embeddings:
        table = load_embeddings(args.public_embeddings)
        if not table:
            raise DataError(f"{args.public_embeddings}: no embeddings")
        points = np.asarray([table[key] for key in sorted(table)])
    else:
        lines = _read_text_lines(args.public_corpus)
        if not lines:
            raise DataError(f"{args.public_corpus}: empty corpus")
        points = np.asarray(
            [toy_embed(line, dim=args.embed_dim, rng_seed=args.embed_seed) for line in lines]
        )
    model = kmeans(points, k=args.num_clusters, max_iters=args.max_iters, rng_seed=args.rng_seed)
    fingerprint = config_fingerprint(
        "cluster",
        {
            "public_corpus": file_digest(args.public_corpus),
            "public_embeddings": file_digest(args.public_embeddings),
            "num_clusters": args.num_clusters,
            "max_iters": args.max_iters,
            "embed_dim": args.embed_dim,
            "embed_seed": args.embed_seed,
            "rng_seed": args.rng_seed,
        },
    )
    model.save(args.out, extra={"config_fingerprint": fingerprint})
    logger.info("wrote %d centers to %s", model.k, args.out)
    return 0


def cmd_rebalance(args) -> int:
    model = ClusterModel.load(args.model)
    seeds = load_seeds(args.seeds)
    embeddings = _seed_embeddings(seeds, args)
    rebalanced = rebalance(
        model,
        embeddings,
        k_prime=args.k_prime,
        epsilon_count=args.epsilon_count,
        rng_seed=args.rng_seed,
    )
    fingerprint = config_fingerprint(
        "rebalance",
        {
            "model": file_digest(args.model),
            "seeds": file_digest(args.seeds),
            "embeddings": file_digest(args.embeddings),
            "k_prime": args.k_prime,
            "epsilon_count": args.epsilon_count,
            "embed_dim": args.embed_dim,
            "embed_seed": args.embed_seed,
            "rng_seed": args.rng_seed,
        },
    )
    rebalanced.save(args.out, extra={"config_fingerprint": fingerprint})
    logger.info(
        "kept %d of %d centers at clustering epsilon %.6g", rebalanced.k, model.k, args.epsilon_count
    )
    return 0


def cmd_generate(args) -> int:
    if (args.batch_size is None) == (args.num_batches is None):
        raise ConfigError("provide exactly one of --batch-size and --num-batches")

    corpus_lines = _read_text_lines(args.public_corpus)
    if not corpus_lines:
        raise DataError(f"{args.public_corpus}: empty public corpus")
    vocab = Vocabulary.from_corpus(corpus_lines, tokenizer=args.tokenizer)

    if args.replay_trace:
        provider = ReplayProvider.from_jsonl(args.replay_trace, vocab)
    else:
        provider = train_ngram(
            [tokenize(line, args.tokenizer) for line in corpus_lines],
            order=args.ngram_order,
            smoothing=args.smoothing,
            vocab=vocab,
        )

    raw_seeds = load_seeds(args.seeds)
    records = [
        SeedRecord(
            seed_id=seed["id"],
            tokens=tuple(vocab.encode(tokenize(seed["text"], args.tokenizer))),
            label=seed["label"],
        )
        for seed in raw_seeds
    ]

    if args.model:
        model = ClusterModel.load(args.model)
        embeddings = _seed_embeddings(raw_seeds, args)
        cluster_ids = assign_many(model, embeddings)
        clustering_epsilon = (
            args.clustering_epsilon
            if args.clustering_epsilon is not None
            else model.clustering_epsilon
        )
    else:
        cluster_ids = np.zeros(len(records), dtype=int)
        clustering_epsilon = args.clustering_epsilon or 0.0

    plan = plan_batches(
        records,
        cluster_ids,
        batch_size=args.batch_size,
        num_batches=args.num_batches,
        min_batch_size=args.min_batch_size,
        rng_seed=args.rng_seed,
    )

    config = GenerationConfig(
        mode=args.mode,
        temperature=args.temperature,
        clip=args.clip_c,
        max_tokens=args.max_tokens,
        rng_seed=args.rng_seed,
        stop_at_eos=args.stop_at_eos,
    ).validated()
    examples, ledger = generate_all(
        records,
        plan,
        provider,
        config,
        clustering_epsilon=clustering_epsilon,
        jobs=args.jobs,
    )

    fingerprint = config_fingerprint(
        "generate",
        {
            "seeds": file_digest(args.seeds),
            "public_corpus": file_digest(args.public_corpus),
            "model": file_digest(args.model),
            "replay_trace": file_digest(args.replay_trace),
            "embeddings": file_digest(args.embeddings),
            "mode": config.mode,
            "clip": config.clip,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
            "stop_at_eos": config.stop_at_eos,
            "batch_size": args.batch_size,
            "num_batches": args.num_batches,
            "min_batch_size": args.min_batch_size,
            "ngram_order": args.ngram_order,
            "smoothing": args.smoothing,
            "tokenizer": args.tokenizer,
            "clustering_epsilon": clustering_epsilon,
            "embed_dim": args.embed_dim,
            "embed_seed": args.embed_seed,
            "rng_seed": args.rng_seed,
        },
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    synthetic = []
    for example in examples:
        record = {
            "id": f"synthetic-{example.batch_id:06d}",
            "text": detokenize(vocab.decode(example.tokens), args.tokenizer),
            "synthetic": True,
        }
        if example.label is not None:
            record["label"] = example.label
        synthetic.append(record)
    write_jsonl(out_dir / "synthetic.jsonl", synthetic)

    report = build_report(ledger).to_json_dict()
    report["config_fingerprint"] = fingerprint
    report["per_token_records"] = ledger.to_records()
    write_json(out_dir / "privacy_report.json", report)

    generated_ids = {example.batch_id for example in examples}
    write_json(
        out_dir / "synthetic.meta.json",
        {
            "config_fingerprint": fingerprint,
            "num_examples": len(examples),
            "num_planned_batches": len(plan.batches),
            "skipped_batch_ids": [b.batch_id for b in plan.batches if b.batch_id not in generated_ids],
            "dropped_seed_ids": plan.dropped_seed_ids,
        },
    )
    logger.info(
        "generated %d example(s); generation epsilon %.6g, total %.6g",
        len(examples), ledger.generation_epsilon(), ledger.total_epsilon(),
    )
    return 0


def cmd_evaluate(args) -> int:
    if args.model is None and args.report is None:
        raise ConfigError("provide --model (clustering metrics) and/or --report (epsilon metrics)")

    fingerprint = config_fingerprint(
        "evaluate",
        {
            "model": file_digest(args.model),
            "seeds": file_digest(args.seeds),
            "report": file_digest(args.report),
            "histogram_bins": args.histogram_bins,
            "embed_dim": args.embed_dim,
            "embed_seed": args.embed_seed,
        },
    )
    metrics: dict = {"config_fingerprint": fingerprint}

    if args.model:
        if args.seeds is None:
            raise ConfigError("--model requires --seeds with reference labels")
        model = ClusterModel.load(args.model)
        seeds = load_seeds(args.seeds)
        labels = [seed["label"] for seed in seeds]
        if any(label is None for label in labels):
            raise DataError(f"{args.seeds}: every seed needs a 'label' for evaluation")
        cluster_ids = assign_many(model, _seed_embeddings(seeds, args))
        score = v_measure(labels, cluster_ids.tolist())
        sizes = cluster_sizes(cluster_ids.tolist())
        metrics["v_measure"] = {
            "homogeneity": score.homogeneity,
            "completeness": score.completeness,
            "v": score.v,
        }
        metrics["cluster_sizes"] = {str(k): v for k, v in sizes.items()}

    if args.report:
        report = read_json(args.report)
        per_batch = [entry["epsilon"] for entry in report.get("per_batch", [])]
        if per_batch:
            counts, edges = np.histogram(per_batch, bins=args.histogram_bins)
            metrics["per_batch_epsilon_histogram"] = {
                "counts": counts.tolist(),
                "bin_edges": edges.tolist(),
            }
        metrics["per_position_mean_gamma"] = report.get("per_position_mean_gamma", [])
        metrics["generation_epsilon"] = report.get("generation_epsilon")
        metrics["total_epsilon"] = report.get("total_epsilon")

    write_json(args.out, metrics)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rng-seed", type=int, default=0, help="master random seed")
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")


def _add_embedding_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--embeddings", type=Path, default=None, help="seed embeddings JSONL")
    parser.add_argument("--embed-dim", type=int, default=32, help="toy embedder output dimension")
    parser.add_argument(
        "--embed-seed", type=int, default=0,
        help="seed of the toy embedder's sign matrix (must match across commands)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpsynth",
        description="Generate differentially private synthetic token sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cluster = sub.add_parser("cluster", help="fit k-means centers on public data")
    p_cluster.add_argument("--public-corpus", type=Path, default=None, help="public text, one line per example")
    p_cluster.add_argument("--public-embeddings", type=Path, default=None, help="public embeddings JSONL")
    p_cluster.add_argument("--num-clusters", type=int, required=True)
    p_cluster.add_argument("--max-iters", type=int, default=100)
    p_cluster.add_argument("--embed-dim", type=int, default=32)
    p_cluster.add_argument("--embed-seed", type=int, default=0)
    p_cluster.add_argument("--out", type=Path, required=True)
    _add_common(p_cluster)
    p_cluster.set_defaults(func=cmd_cluster)

    p_rebalance = sub.add_parser("rebalance", help="keep the k' centers with highest noisy counts")
    p_rebalance.add_argument("--model", type=Path, required=True)
    p_rebalance.add_argument("--seeds", type=Path, required=True, help="private seeds JSONL")
    p_rebalance.add_argument("--k-prime", type=int, required=True)
    p_rebalance.add_argument("--epsilon-count", type=float, default=0.1)
    _add_embedding_flags(p_rebalance)
    p_rebalance.add_argument("--out", type=Path, required=True)
    _add_common(p_rebalance)
    p_rebalance.set_defaults(func=cmd_rebalance)

    p_generate = sub.add_parser("generate", help="generate the synthetic corpus and privacy report")
    p_generate.add_argument("--seeds", type=Path, required=True)
    p_generate.add_argument("--public-corpus", type=Path, required=True)
    p_generate.add_argument("--model", type=Path, default=None, help="cluster model JSON")
    p_generate.add_argument("--mode", choices=("mean", "median"), default="median")
    p_generate.add_argument("--clip-c", type=float, default=None, help="clip bound (default 9 mean / 6 median)")
    p_generate.add_argument("--temperature", type=float, default=1.5)
    p_generate.add_argument("--max-tokens", type=int, default=64)
    p_generate.add_argument("--batch-size", type=int, default=None)
    p_generate.add_argument("--num-batches", type=int, default=None, help="random sub-batches per cluster")
    p_generate.add_argument("--min-batch-size", type=int, default=2)
    p_generate.add_argument("--ngram-order", type=int, default=3)
    p_generate.add_argument("--smoothing", type=float, default=1.0)
    p_generate.add_argument("--tokenizer", choices=("char", "whitespace"), default="char")
    p_generate.add_argument("--replay-trace", type=Path, default=None, help="serve recorded logits instead of the n-gram model")
    p_generate.add_argument("--clustering-epsilon", type=float, default=None, help="override the model's recorded clustering cost")
    p_generate.add_argument("--jobs", type=int, default=1)
    p_generate.add_argument("--stop-at-eos", action=argparse.BooleanOptionalAction, default=True)
    _add_embedding_flags(p_generate)
    p_generate.add_argument("--out-dir", type=Path, required=True)
    _add_common(p_generate)
    p_generate.set_defaults(func=cmd_generate)

    p_evaluate = sub.add_parser("evaluate", help="score a clustering and summarize a privacy report")
    p_evaluate.add_argument("--model", type=Path, default=None)
    p_evaluate.add_argument("--seeds", type=Path, default=None)
    p_evaluate.add_argument("--report", type=Path, default=None, help="privacy report JSON")
    p_evaluate.add_argument("--histogram-bins", type=int, default=10)
    _add_embedding_flags(p_evaluate)
    p_evaluate.add_argument("--out", type=Path, required=True)
    _add_common(p_evaluate)
    p_evaluate.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DpsynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
