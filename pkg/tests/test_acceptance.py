"""Acceptance gate: one test per criterion, each printing a PASS line.

Criteria with stated runtime caps assert the elapsed wall time as well.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from dpsynth.aggregation import clip_stack, median_triple
from dpsynth.cli import main as cli_main
from dpsynth.clustering import assign, assign_many, kmeans, rebalance
from dpsynth.engine import GenerationConfig, batch_rng, generate_batch, sample_token
from dpsynth.lm import ReplayProvider, SeedRecord, Vocabulary
from dpsynth.metrics import cluster_sizes, v_measure
from dpsynth.privacy import (
    PerTokenCost,
    PrivacyLedger,
    build_report,
    token_cost_bounds,
    triple_cost_bounds,
)

from oracles import check_instance, conditional_law, random_instance

DATA = Path(__file__).parent / "data"
PUBLIC = DATA / "tiny_public.txt"
SEEDS = DATA / "tiny_seeds.jsonl"


def report_pass(number, name, elapsed=None):
    suffix = f" ({elapsed:.1f}s)" if elapsed is not None else ""
    print(f"ACCEPTANCE {number:02d} {name}: PASS{suffix}")


class TestCriterion1DpRatioOracle:
    def test_ratio_bound_over_enumerated_neighbors(self):
        started = time.monotonic()
        rng = np.random.default_rng(20240601)
        checked = {"median": 0, "mean": 0}
        for index in range(200):
            instance = random_instance(rng, homogeneous=(index % 4 == 0))
            for mode in ("median", "mean"):
                checked[mode] += check_instance(instance, mode, rtol=1e-9)
            if index < 20:
                self._engine_costs_match_enumeration(instance)
        elapsed = time.monotonic() - started
        assert checked["median"] > 20_000 and checked["mean"] > 20_000
        assert elapsed <= 60.0
        report_pass(1, "DP ratio oracle (median ex-post, mean formula)", elapsed)

    @staticmethod
    def _engine_costs_match_enumeration(instance):
        """The engine's realized per-token costs equal the enumerated table."""
        vocab = Vocabulary([f"t{i}" for i in range(instance.vocab_size - 1)])
        table = {
            (seed_id, prefix): row
            for seed_id, rows in instance.tables.items()
            for prefix, row in rows.items()
        }
        provider = ReplayProvider(vocab, table)
        seeds = [SeedRecord(seed_id=s, tokens=()) for s in instance.base_ids]
        config = GenerationConfig(
            mode="median",
            clip=instance.bound,
            temperature=instance.temperature,
            max_tokens=instance.length,
            rng_seed=7,
            stop_at_eos=False,
        )
        example = generate_batch(seeds, provider, config, batch_id=0)
        _, costs = conditional_law(instance, instance.base_ids, "median")
        prefix = ()
        for token, cost in zip(example.tokens, example.per_token_cost):
            assert cost == pytest.approx(costs[prefix][token], rel=1e-12, abs=1e-15)
            prefix = prefix + (token,)


class TestCriterion2MedianSandwich:
    def test_exhaustive_neighbors_exact(self):
        """10^4 multisets; every removal and every insertion plateau, exactly.

        Each scalar multiset rides through the real kernel as the first
        component of (value, bound) vectors, which clipping leaves unchanged.
        Insertion candidates cover every ordering a clipped value can take:
        both saturation endpoints, every existing value, and every midpoint
        of adjacent values.
        """
        started = time.monotonic()
        rng = np.random.default_rng(77)
        bound = 3.0
        per_size = 10_000 // 8
        for m in range(2, 10):
            # dyadic grid keeps clip's shift-by-zero bit-exact, so raw values,
            # order statistics, and midpoints all compare exactly
            values = np.round(rng.uniform(-bound, bound, size=(per_size, m)) * 2**20) / 2**20
            ordered = np.sort(values, axis=1)
            left = np.empty(per_size)
            right = np.empty(per_size)
            for row in range(per_size):
                stack = np.column_stack([values[row], np.full(m, bound)])
                triple = median_triple(stack, bound)
                left[row] = triple.left[0]
                right[row] = triple.right[0]

            for j in range(m):
                neighbor = np.delete(ordered, j, axis=1)
                med = np.median(neighbor, axis=1)
                assert np.all(left <= med)
                assert np.all(med <= right)

            candidates = [np.full(per_size, -bound), np.full(per_size, bound)]
            candidates.extend(ordered[:, i] for i in range(m))
            candidates.extend((ordered[:, i] + ordered[:, i + 1]) / 2.0 for i in range(m - 1))
            for extra in candidates:
                grown = np.sort(np.column_stack([ordered, extra]), axis=1)
                med = np.median(grown, axis=1)
                assert np.all(left <= med)
                assert np.all(med <= right)
        elapsed = time.monotonic() - started
        assert elapsed <= 5.0
        report_pass(2, "median sandwich over all neighbors", elapsed)


class TestCriterion3CostProperties:
    def test_cost_nonnegative_zero_for_identical_and_worked_example(self):
        rng = np.random.default_rng(13)
        sizes = rng.integers(1, 8, size=100_000)
        vocabs = rng.integers(2, 7, size=100_000)
        for i in range(100_000):
            stack = rng.normal(scale=4.0, size=(sizes[i], vocabs[i]))
            token = int(rng.integers(vocabs[i]))
            assert token_cost_bounds(stack, token, bound=3.0, temperature=1.5).cost >= 0.0

        for _ in range(1_000):
            row = rng.normal(scale=4.0, size=rng.integers(2, 7))
            stack = np.tile(row, (rng.integers(2, 8), 1))
            token = int(rng.integers(row.size))
            assert token_cost_bounds(stack, token, bound=3.0, temperature=1.5).cost == 0.0

        from dpsynth.aggregation import MedianTriple

        triple = MedianTriple(
            left=np.array([-1.0, 0.5]), mid=np.array([0.0, 0.5]), right=np.array([1.0, 0.5])
        )
        bounds = triple_cost_bounds(triple, 0, temperature=1.0)
        assert abs(math.log(bounds.upper_ratio) - 1.5) <= 1e-12
        assert abs(bounds.cost - 1.5) <= 1e-12
        report_pass(3, "per-token cost properties and worked value")


class TestCriterion4ClipContract:
    def test_hundred_thousand_random_vectors(self):
        rng = np.random.default_rng(4)
        remaining = 100_000
        while remaining > 0:
            rows = min(remaining, 10_000)
            width = int(rng.integers(2, 12))
            bound = float(rng.uniform(0.5, 9.0))
            stack = rng.normal(scale=20.0, size=(rows, width))
            clipped = clip_stack(stack, bound)
            maxima = clipped.max(axis=1)
            assert np.all(np.abs(maxima - bound) <= np.spacing(bound))
            assert np.all(clipped >= -bound)
            assert np.all(clipped <= bound)
            assert np.array_equal(np.argmax(stack, axis=1), np.argmax(clipped, axis=1))
            remaining -= rows
        report_pass(4, "clip contract on 1e5 vectors")


class TestCriterion5HomogeneousZeroCost:
    def test_identical_seed_batches_spend_only_clustering(self, tmp_path):
        seeds = tmp_path / "identical.jsonl"
        records = []
        for label, text in (("t0", "the cat sat"), ("t1", "the dog sat"), ("t2", "a bird flew")):
            for i in range(4):
                records.append({"id": f"{label}-{i}", "text": text, "label": label})
        seeds.write_text("".join(json.dumps(r) + "\n" for r in records))
        rc = cli_main(
            [
                "generate", "--seeds", str(seeds), "--public-corpus", str(PUBLIC),
                "--mode", "median", "--max-tokens", "12", "--batch-size", "2",
                "--clustering-epsilon", "0.1", "--rng-seed", "5",
                "--out-dir", str(tmp_path / "out"),
            ]
        )
        assert rc == 0
        report = json.load((tmp_path / "out" / "privacy_report.json").open())
        assert report["generation_epsilon"] == 0.0
        assert report["total_epsilon"] == 0.1
        report_pass(5, "homogeneous batches cost exactly the clustering epsilon")


class TestCriterion6ClusteringQuality:
    def test_rebalanced_public_centers_recover_mixture(self):
        started = time.monotonic()
        rng = np.random.default_rng(0)
        angles = np.linspace(0, 2 * np.pi, 10, endpoint=False)
        means = np.column_stack([np.cos(angles), np.sin(angles)]) * 20.0
        private_parts, truth = [], []
        for i, mu in enumerate(means):
            private_parts.append(mu + rng.normal(scale=0.05, size=(500, 2)))
            truth.extend([i] * 500)
        private = np.vstack(private_parts)
        # disjoint, broader public sample: same means, larger spread
        public = np.vstack([mu + rng.normal(scale=1.0, size=(200, 2)) for mu in means])

        model = kmeans(public, k=50, rng_seed=0)
        kept = rebalance(model, private, k_prime=10, epsilon_count=0.1, rng_seed=0)
        labels = assign_many(kept, private)
        score = v_measure(truth, labels.tolist())
        sizes = cluster_sizes(labels.tolist())
        elapsed = time.monotonic() - started
        assert score.v >= 0.9
        assert min(sizes.values()) >= 100
        assert elapsed <= 30.0
        report_pass(6, f"clustering quality (V={score.v:.3f}, min size={min(sizes.values())})", elapsed)


class TestCriterion7KmeansContracts:
    def test_objective_monotone_and_assign_oracle(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            points = rng.normal(size=(int(rng.integers(10, 60)), int(rng.integers(2, 4)))) * 5.0
            k = int(rng.integers(1, min(8, points.shape[0]) + 1))
            model = kmeans(points, k=k, rng_seed=trial)
            assert np.all(np.diff(model.inertia_history) <= 1e-9)

        model = kmeans(rng.normal(size=(300, 3)) * 4.0, k=20, rng_seed=1)
        queries = rng.normal(size=(10_000, 3)) * 4.0
        for query in queries:
            best, best_distance = 0, math.inf
            for index in range(model.k):
                diff = model.centers[index] - query
                distance = float(diff @ diff)
                if distance < best_distance:
                    best, best_distance = index, distance
            assert assign(model, query) == best
        report_pass(7, "k-means monotonicity and assignment oracle")


class TestCriterion8Determinism:
    def test_pipeline_reruns_and_jobs_are_byte_identical(self, tmp_path):
        seeds = tmp_path / "seeds.jsonl"
        rng = np.random.default_rng(3)
        words = ["cat", "dog", "bird", "fish", "tree", "pond", "log", "mat"]
        records = []
        for i in range(36):
            text = " ".join(rng.choice(words, size=3))
            records.append({"id": f"s{i:03d}", "text": text, "label": f"l{i % 2}"})
        seeds.write_text("".join(json.dumps(r) + "\n" for r in records))

        def pipeline(tag, jobs):
            base = tmp_path / tag
            assert cli_main(
                [
                    "cluster", "--public-corpus", str(PUBLIC), "--num-clusters", "4",
                    "--embed-dim", "8", "--rng-seed", "11", "--out", str(base / "model.json"),
                ]
            ) == 0
            assert cli_main(
                [
                    "rebalance", "--model", str(base / "model.json"), "--seeds", str(seeds),
                    "--k-prime", "2", "--epsilon-count", "0.1", "--embed-dim", "8",
                    "--rng-seed", "11", "--out", str(base / "rebalanced.json"),
                ]
            ) == 0
            assert cli_main(
                [
                    "generate", "--seeds", str(seeds), "--public-corpus", str(PUBLIC),
                    "--model", str(base / "rebalanced.json"), "--mode", "median",
                    "--max-tokens", "10", "--batch-size", "3", "--embed-dim", "8",
                    "--rng-seed", "11", "--jobs", str(jobs), "--out-dir", str(base / "out"),
                ]
            ) == 0
            return base

        first = pipeline("run1", jobs=1)
        second = pipeline("run2", jobs=1)
        eight = pipeline("run8", jobs=8)
        for name in ("model.json", "rebalanced.json", "out/synthetic.jsonl",
                     "out/privacy_report.json", "out/synthetic.meta.json"):
            reference = (first / name).read_bytes()
            assert reference == (second / name).read_bytes()
            assert reference == (eight / name).read_bytes()
        report_pass(8, "byte-identical reruns and --jobs parity")


class TestCriterion9SamplerStatistics:
    @pytest.mark.parametrize("temperature", [0.5, 1.5])
    def test_frequencies_match_softmax(self, temperature):
        logits = np.array([1.2, -0.3, 0.4, -1.0, 0.0])
        draws = 100_000
        rng = batch_rng(17, 0)
        counts = np.bincount(
            [sample_token(rng, logits, temperature) for _ in range(draws)],
            minlength=logits.size,
        )
        scaled = logits / temperature
        probs = np.exp(scaled - scaled.max())
        probs /= probs.sum()
        for token, probability in enumerate(probs):
            expected = draws * probability
            width = 4.0 * math.sqrt(draws * probability * (1.0 - probability))
            assert abs(counts[token] - expected) <= width
        report_pass(9, f"sampler statistics at temperature {temperature}")


class TestCriterion10ReportArithmetic:
    def test_totals_recomputed_from_raw_records(self):
        rng = np.random.default_rng(10)
        ledger = PrivacyLedger(mode="median", temperature=1.5, clip=6.0, clustering_epsilon=0.1)
        for batch_id in range(12):
            length = int(rng.integers(1, 9))
            for position in range(1, length + 1):
                ledger.append(
                    PerTokenCost(
                        batch_id=batch_id,
                        position=position,
                        token=int(rng.integers(5)),
                        cost=float(rng.uniform(0.0, 0.3)),
                    )
                )
        report = build_report(ledger)

        sums = {}
        for record in ledger.to_records():
            sums[record["batch_id"]] = sums.get(record["batch_id"], 0.0) + record["cost"]
        assert report.per_batch == sorted(sums.items())
        assert report.generation_epsilon == max(sums.values())
        assert report.total_epsilon == report.generation_epsilon + 0.1
        report_pass(10, "report arithmetic recomputable from raw ledger records")
