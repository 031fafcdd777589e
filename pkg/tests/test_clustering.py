import itertools
import json
from pathlib import Path

import numpy as np
import pytest

from qir.clustering import (BAKEOFF_ALGORITHMS, BcubedScore, ClusteringError,
                            agglomerative_ward, bakeoff, bcubed, gmm_em, kmeans,
                            spherical_kmeans, ward_merge_sequence)
from qir.corpus import preprocess
from qir.embedding import embed_phrase, load_embeddings

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "qir" / "data"


def wcss(X, labels, k):
    total = 0.0
    labels = np.asarray(labels)
    for c in range(k):
        members = X[labels == c]
        if len(members):
            total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


def exhaustive_min_wcss(X, k):
    best = np.inf
    for labels in itertools.product(range(k), repeat=len(X)):
        if len(set(labels)) != k:
            continue
        best = min(best, wcss(X, labels, k))
    return best


def two_blobs(rng, per_blob=3, gap=8.0):
    return np.vstack([rng.normal((0.0, 0.0), 0.3, (per_blob, 2)),
                      rng.normal((gap, gap), 0.3, (per_blob, 2))])


class TestKmeans:
    def test_k1_centroid_is_mean(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(7, 3))
        a = kmeans(X, 1, seed=0)
        np.testing.assert_allclose(a.centroids[0], X.mean(axis=0), atol=1e-9)

    def test_k_equals_n_zero_wcss(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(5, 2))
        a = kmeans(X, 5, seed=0)
        assert wcss(X, a.labels, 5) < 1e-18
        assert sorted(set(a.labels)) == list(range(5))

    def test_two_blob_partition_matches_exhaustive(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = two_blobs(rng)
            a = kmeans(X, 2, seed=seed)
            assert abs(wcss(X, a.labels, 2) - exhaustive_min_wcss(X, 2)) < 1e-8

    def test_wcss_monotone(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 4))
        a = kmeans(X, 4, seed=0)
        hist = a.objective_history
        assert all(hist[i + 1] <= hist[i] + 1e-9 for i in range(len(hist) - 1))

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(25, 3))
        assert kmeans(X, 3, seed=9).labels == kmeans(X, 3, seed=9).labels

    def test_all_clusters_used(self):
        # coincident points force empty-cluster repair
        X = np.array([[0.0, 0.0]] * 6 + [[5.0, 5.0]])
        a = kmeans(X, 3, seed=0)
        assert a.empty_clusters() == []

    def test_k_larger_than_n(self):
        with pytest.raises(ClusteringError):
            kmeans(np.zeros((2, 2)), 3, seed=0)


class TestSphericalKmeans:
    def test_single_ray(self):
        X = np.array([[1.0, 0.0], [2.0, 0.0], [5.0, 0.0]])
        a = spherical_kmeans(X, 1, seed=0)
        assert a.objective_history[-1] < 1e-12

    def test_scale_invariance_coclusters(self):
        v = np.array([1.0, 1.0])
        X = np.vstack([v, 3 * v, [-5.0, 5.0]])
        a = spherical_kmeans(X, 2, seed=0)
        assert a.labels[0] == a.labels[1] != a.labels[2]

    def test_angular_partition_matches_exhaustive(self):
        # oracle: exhaustive 2-partition under the cosine objective
        def cosine_cost(U, labels, k):
            total = 0.0
            for c in range(k):
                members = U[np.asarray(labels) == c]
                if len(members) == 0:
                    continue
                s = members.sum(axis=0)
                norm = np.linalg.norm(s)
                center = s / norm if norm > 0 else s
                total += float((1.0 - members @ center).sum())
            return total

        angles = np.deg2rad([0.0, 5.0, 90.0])
        X = np.stack([np.cos(angles), np.sin(angles)], axis=1) * np.array([[1.0], [4.0], [2.0]])
        a = spherical_kmeans(X, 2, seed=0)
        assert a.labels[0] == a.labels[1] != a.labels[2]
        U = X / np.linalg.norm(X, axis=1, keepdims=True)
        best = min(cosine_cost(U, labels, 2)
                   for labels in itertools.product(range(2), repeat=3)
                   if len(set(labels)) == 2)
        assert abs(cosine_cost(U, a.labels, 2) - best) < 1e-9

    def test_zero_vector_rejected(self):
        with pytest.raises(ClusteringError, match="zero"):
            spherical_kmeans(np.array([[0.0, 0.0], [1.0, 0.0]]), 1, seed=0)


def naive_ward_oracle(X):
    """Recompute every pairwise Ward cost from scratch at each merge."""
    clusters = {i: [i] for i in range(len(X))}
    merges = []
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(sorted(clusters), 2):
            A, B = X[clusters[a]], X[clusters[b]]
            cost = 2 * len(A) * len(B) / (len(A) + len(B)) * \
                float(((A.mean(axis=0) - B.mean(axis=0)) ** 2).sum())
            if best is None or cost < best[0] - 1e-15:
                best = (cost, a, b)
        cost, a, b = best
        merges.append((a, b, cost))
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    return merges


class TestWard:
    def test_identity_at_k_equals_n(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(6, 2))
        a = agglomerative_ward(X, 6)
        assert sorted(a.labels) == list(range(6))

    def test_two_tight_pairs(self):
        X = np.array([[0.0, 0.0], [0.1, 0.0], [9.0, 9.0], [9.1, 9.0]])
        a = agglomerative_ward(X, 2)
        assert a.labels[0] == a.labels[1] != a.labels[2] == a.labels[3]

    def test_merge_sequence_matches_naive_oracle(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(8, 2))
            got = ward_merge_sequence(X)
            want = naive_ward_oracle(X)
            assert [(a, b) for a, b, _ in got] == [(a, b) for a, b, _ in want]
            np.testing.assert_allclose([c for _, _, c in got],
                                       [c for _, _, c in want], atol=1e-8)


class TestGmm:
    def test_k1_recovers_sample_statistics(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 3))
        params, _ = gmm_em(X, 1, seed=0)
        np.testing.assert_allclose(params.means[0], X.mean(axis=0), atol=1e-8)
        np.testing.assert_allclose(params.covariances[0],
                                   np.cov(X.T, bias=True), atol=1e-4)

    def test_responsibilities_normalized(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(30, 2))
        params, _ = gmm_em(X, 3, seed=0)
        np.testing.assert_allclose(params.responsibilities.sum(axis=1),
                                   np.ones(30), atol=1e-12)

    def test_two_gaussians_recovered(self):
        rng = np.random.default_rng(7)
        X = np.vstack([rng.normal((0, 0), 0.5, (50, 2)),
                       rng.normal((6, 6), 0.5, (50, 2))])
        truth = np.array([0] * 50 + [1] * 50)
        _, assignment = gmm_em(X, 2, seed=0)
        labels = np.asarray(assignment.labels)
        agreement = max(float((labels == truth).mean()),
                        float((labels == 1 - truth).mean()))
        assert agreement >= 0.95

    def test_loglik_monotone(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(25, 2))
            params, _ = gmm_em(X, 3, seed=seed)
            h = params.loglik_history
            assert all(h[i + 1] >= h[i] - 1e-9 for i in range(len(h) - 1))

    def test_needs_more_points_than_dims(self):
        with pytest.raises(ClusteringError):
            gmm_em(np.zeros((3, 5)), 1, seed=0)


class TestBcubed:
    def test_perfect_clustering(self):
        s = bcubed([0, 1, 2, 0, 1, 2], ["a", "b", "c", "a", "b", "c"])
        assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)

    def test_two_categories_one_cluster(self):
        # hand evaluation: P = 0.5, R = 1.0, F = 2/3
        s = bcubed([0, 0, 0, 0], ["a", "a", "b", "b"])
        assert abs(s.precision - 0.5) < 1e-12
        assert abs(s.recall - 1.0) < 1e-12
        assert abs(s.f1 - 2.0 / 3.0) < 1e-12

    def test_all_singletons(self):
        s = bcubed([0, 1, 2, 3], ["a", "a", "b", "b"])
        assert abs(s.precision - 1.0) < 1e-12
        assert abs(s.recall - 0.5) < 1e-12

    def test_invariant_under_cluster_relabeling(self):
        rng = np.random.default_rng(8)
        labels = list(rng.integers(0, 3, size=20))
        cats = list(rng.integers(0, 3, size=20))
        base = bcubed(labels, cats)
        perm = {0: 2, 1: 0, 2: 1}
        relabeled = [perm[x] for x in labels]
        s = bcubed(relabeled, cats)
        assert abs(s.precision - base.precision) < 1e-12
        assert abs(s.recall - base.recall) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ClusteringError, match="mismatch"):
            bcubed([0, 1], ["a"])


@pytest.fixture(scope="module")
def mini():
    table = load_embeddings(DATA_DIR / "mini_vectors.txt")
    points, labels = [], []
    with open(DATA_DIR / "mini_corpus.jsonl", encoding="utf-8") as fh:
        for line in fh:
            item = json.loads(line)
            points.append(embed_phrase(preprocess(item["text"]), table))
            labels.append(item["category"])
    return np.array(points), labels


class TestBakeoff:
    def test_report_shape(self, mini):
        points, labels = mini
        report = bakeoff(points, labels, k=3, seed=0)
        assert set(report.scores) == set(BAKEOFF_ALGORITHMS)
        for score in report.scores.values():
            assert isinstance(score, BcubedScore)
            assert 0.0 <= score.f1 <= 1.0
        parsed = json.loads(report.to_json())
        assert set(parsed["scores"]) == set(BAKEOFF_ALGORITHMS)
        text = report.to_text()
        assert "KMeans with Euclidean" in text and len(text.splitlines()) == 5

    def test_kmeans_leads_the_table(self, mini):
        points, labels = mini
        report = bakeoff(points, labels, k=3, seed=0)
        km = report.scores["kmeans"].f1
        for name in ("spherical", "ward", "gmm"):
            assert km >= report.scores[name].f1 - 0.02
