"""Four candidate clustering algorithms and BCubed evaluation.

K-Means (k-means++ init), spherical K-Means (cosine distance), Ward
agglomerative clustering (Lance-Williams update), and full-covariance
Gaussian mixture EM.  Every algorithm is deterministic under a fixed seed
and records its objective per iteration so monotonicity can be checked.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

MAX_ITER = 300
CENTROID_TOL = 1e-6
LOGLIK_TOL = 1e-7
GMM_COV_REG = 1e-6


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    """Labels in 0..k-1, one per input point, plus the final centroids.

    ``objective_history`` holds the per-iteration objective (WCSS for the
    K-Means family, cosine cost for spherical); empty for Ward.
    """

    labels: tuple[int, ...]
    k: int
    centroids: np.ndarray | None = None
    objective_history: tuple[float, ...] = ()

    def empty_clusters(self) -> list[int]:
        used = set(self.labels)
        return [c for c in range(self.k) if c not in used]

    def members(self, cluster_id: int) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab == cluster_id]


@dataclass(frozen=True)
class GmmParams:
    weights: np.ndarray        # (k,), sums to 1
    means: np.ndarray          # (k, d)
    covariances: np.ndarray    # (k, d, d), symmetric positive-definite
    responsibilities: np.ndarray | None = None   # (n, k), rows sum to 1
    loglik_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class BcubedScore:
    precision: float
    recall: float
    f1: float


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ClusteringError("points must be a non-empty 2-D array")
    return X


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: iteratively sample centers ∝ squared distance."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest_sq = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            probs = closest_sq / total
            idx = int(rng.choice(n, p=probs))
        centers[j] = X[idx]
        closest_sq = np.minimum(closest_sq, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _repair_empty(labels: np.ndarray, centers: np.ndarray, X: np.ndarray,
                  dist_to_own: np.ndarray) -> None:
    """Reseed each empty cluster from the point farthest from its centroid."""
    for c in range(centers.shape[0]):
        if np.any(labels == c):
            continue
        far = int(np.argmax(dist_to_own))
        centers[c] = X[far]
        labels[far] = c
        dist_to_own[far] = 0.0


def kmeans(points, k: int, seed: int = 0) -> ClusterAssignment:
    """Lloyd iterations with k-means++ init; WCSS non-increasing per iteration."""
    X = _as_points(points)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} not in 1..{n}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(X, k, rng)
    labels = np.full(n, -1, dtype=int)
    history = []
    for _ in range(MAX_ITER):
        d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)          # ties break toward lower id
        dist_to_own = d2[np.arange(n), new_labels]
        _repair_empty(new_labels, centers, X, dist_to_own)
        new_centers = np.array([X[new_labels == c].mean(axis=0) for c in range(k)])
        history.append(float(np.sum((X - new_centers[new_labels]) ** 2)))
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        converged = np.array_equal(new_labels, labels) or shift < CENTROID_TOL
        labels, centers = new_labels, new_centers
        if converged:
            break
    return ClusterAssignment(labels=tuple(int(x) for x in labels), k=k,
                             centroids=centers, objective_history=tuple(history))


def spherical_kmeans(points, k: int, seed: int = 0) -> ClusterAssignment:
    """K-Means under cosine distance; centroids renormalized each iteration."""
    X = _as_points(points)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise ClusteringError("spherical_kmeans cannot handle zero vectors")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} not in 1..{n}")
    U = X / norms[:, None]
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(U, k, rng)
    cnorm = np.linalg.norm(centers, axis=1)
    centers = centers / np.where(cnorm == 0.0, 1.0, cnorm)[:, None]
    labels = np.full(n, -1, dtype=int)
    history = []
    for _ in range(MAX_ITER):
        cos_dist = 1.0 - U @ centers.T
        new_labels = np.argmin(cos_dist, axis=1)
        dist_to_own = cos_dist[np.arange(n), new_labels]
        _repair_empty(new_labels, centers, U, dist_to_own)
        new_centers = np.empty_like(centers)
        for c in range(k):
            s = U[new_labels == c].sum(axis=0)
            sn = np.linalg.norm(s)
            new_centers[c] = s / sn if sn > 0 else centers[c]
        history.append(float(np.sum(1.0 - np.einsum("ij,ij->i", U, new_centers[new_labels]))))
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        converged = np.array_equal(new_labels, labels) or shift < CENTROID_TOL
        labels, centers = new_labels, new_centers
        if converged:
            break
    return ClusterAssignment(labels=tuple(int(x) for x in labels), k=k,
                             centroids=centers, objective_history=tuple(history))


def ward_merge_sequence(points) -> list[tuple[int, int, float]]:
    """Full Ward merge order: (cluster_a, cluster_b, merge_cost) per step.

    Clusters are tracked by the lowest original point index they contain.
    Costs follow the Lance-Williams recurrence on squared Euclidean
    distances, so cost = 2 * n_a*n_b/(n_a+n_b) * ||mean_a - mean_b||^2.
    Ties break toward the lexicographically smallest (a, b) pair.
    """
    X = _as_points(points)
    n = X.shape[0]
    active = list(range(n))
    sizes = {i: 1 for i in range(n)}
    D: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            D[(i, j)] = float(np.sum((X[i] - X[j]) ** 2))
    merges = []
    while len(active) > 1:
        best = None
        for i_pos in range(len(active)):
            for j_pos in range(i_pos + 1, len(active)):
                a, b = active[i_pos], active[j_pos]
                cost = D[(a, b)]
                if best is None or cost < best[0] - 1e-15:
                    best = (cost, a, b)
        cost, a, b = best
        merges.append((a, b, cost))
        # Lance-Williams update of every remaining distance to the merged cluster
        na, nb = sizes[a], sizes[b]
        for c in active:
            if c in (a, b):
                continue
            nc = sizes[c]
            dac = D[(min(a, c), max(a, c))]
            dbc = D[(min(b, c), max(b, c))]
            dab = D[(a, b)]
            D[(min(a, c), max(a, c))] = ((na + nc) * dac + (nb + nc) * dbc - nc * dab) / (na + nb + nc)
        sizes[a] = na + nb
        active.remove(b)
    return merges


def agglomerative_ward(points, k: int) -> ClusterAssignment:
    """Bottom-up Ward clustering, stopping at k clusters."""
    X = _as_points(points)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} not in 1..{n}")
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, _cost in ward_merge_sequence(X)[: n - k]:
        parent[find(b)] = find(a)
    # relabel roots 0..k-1 in order of first appearance
    relabel: dict[int, int] = {}
    labels = []
    for i in range(n):
        root = find(i)
        if root not in relabel:
            relabel[root] = len(relabel)
        labels.append(relabel[root])
    centroids = np.array([X[np.array(labels) == c].mean(axis=0) for c in range(k)])
    return ClusterAssignment(labels=tuple(labels), k=k, centroids=centroids)


def _log_gaussian(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ClusteringError("singular covariance despite regularization") from exc
    diff = X - mean
    sol = solve_triangular(chol, diff.T, lower=True)
    maha = np.sum(sol ** 2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)


def gmm_em(points, k: int, seed: int = 0) -> tuple[GmmParams, ClusterAssignment]:
    """Full-covariance Gaussian mixture fitted by EM, seeded from K-Means.

    The log-likelihood is non-decreasing across iterations (up to the
    diagonal regularization, well within 1e-9 in practice).
    """
    X = _as_points(points)
    n, d = X.shape
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} not in 1..{n}")
    if n <= d:
        raise ClusteringError(f"full covariance needs more points ({n}) than dimensions ({d})")
    init = kmeans(X, k, seed)
    labels0 = np.array(init.labels)
    weights = np.array([(labels0 == c).sum() / n for c in range(k)])
    means = init.centroids.copy()
    covariances = np.empty((k, d, d))
    global_cov = np.cov(X.T, bias=False).reshape(d, d) + GMM_COV_REG * np.eye(d)
    for c in range(k):
        member = X[labels0 == c]
        if member.shape[0] > d:
            covariances[c] = np.cov(member.T, bias=False).reshape(d, d) + GMM_COV_REG * np.eye(d)
        else:
            covariances[c] = global_cov.copy()

    history = []
    resp = np.empty((n, k))
    prev_ll = -np.inf
    for _ in range(MAX_ITER):
        # E step
        log_prob = np.empty((n, k))
        for c in range(k):
            log_prob[:, c] = np.log(max(weights[c], 1e-300)) + _log_gaussian(X, means[c], covariances[c])
        mx = log_prob.max(axis=1, keepdims=True)
        log_norm = mx[:, 0] + np.log(np.exp(log_prob - mx).sum(axis=1))
        resp = np.exp(log_prob - log_norm[:, None])
        ll = float(log_norm.sum())
        history.append(ll)
        if ll - prev_ll < LOGLIK_TOL and np.isfinite(prev_ll):
            break
        prev_ll = ll
        # M step
        nk = resp.sum(axis=0)
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for c in range(k):
            diff = X - means[c]
            covariances[c] = (resp[:, c][:, None] * diff).T @ diff / nk[c] + GMM_COV_REG * np.eye(d)

    labels = tuple(int(x) for x in np.argmax(resp, axis=1))
    params = GmmParams(weights=weights, means=means, covariances=covariances,
                       responsibilities=resp, loglik_history=tuple(history))
    assignment = ClusterAssignment(labels=labels, k=k, centroids=means,
                                   objective_history=tuple(history))
    return params, assignment


def bcubed(assignment, labels: Sequence) -> BcubedScore:
    """BCubed precision/recall/F1 of a clustering against category labels.

    Per item: precision = same-category items in its cluster / cluster size,
    recall = same-category items in its cluster / category size; both include
    the item itself and are averaged over all items.
    """
    cluster_labels = list(assignment.labels) if isinstance(assignment, ClusterAssignment) \
        else list(assignment)
    categories = list(labels)
    if len(categories) != len(cluster_labels):
        raise ClusteringError(
            f"length mismatch: {len(cluster_labels)} cluster labels vs {len(categories)} categories")
    n = len(cluster_labels)
    cluster_size: dict = {}
    category_size: dict = {}
    joint: dict = {}
    for cl, cat in zip(cluster_labels, categories):
        cluster_size[cl] = cluster_size.get(cl, 0) + 1
        category_size[cat] = category_size.get(cat, 0) + 1
        joint[(cl, cat)] = joint.get((cl, cat), 0) + 1
    precision = sum(joint[(cl, cat)] / cluster_size[cl] for cl, cat in zip(cluster_labels, categories)) / n
    recall = sum(joint[(cl, cat)] / category_size[cat] for cl, cat in zip(cluster_labels, categories)) / n
    f1 = 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)
    return BcubedScore(precision=precision, recall=recall, f1=f1)


BAKEOFF_ALGORITHMS = ("spherical", "kmeans", "ward", "gmm")

_ALGORITHM_TITLES = {
    "spherical": "Sphere clustering (KMeans with cosine similarity)",
    "kmeans": "KMeans with Euclidean",
    "ward": "Agglomerative Clustering",
    "gmm": "GMM Clustering",
}


@dataclass(frozen=True)
class BakeoffReport:
    k: int
    seed: int
    scores: dict[str, BcubedScore]

    def to_json(self) -> str:
        return json.dumps({
            "k": self.k,
            "seed": self.seed,
            "scores": {
                name: {"precision": s.precision, "recall": s.recall, "f1": s.f1}
                for name, s in self.scores.items()
            },
        }, indent=2, sort_keys=True)

    def to_text(self) -> str:
        width = max(len(_ALGORITHM_TITLES[a]) for a in BAKEOFF_ALGORITHMS)
        lines = [f"{'Algorithm'.ljust(width)}  Precision  Recall  F score"]
        for name in BAKEOFF_ALGORITHMS:
            s = self.scores[name]
            lines.append(f"{_ALGORITHM_TITLES[name].ljust(width)}  "
                         f"{s.precision:9.2f}  {s.recall:6.2f}  {s.f1:7.2f}")
        return "\n".join(lines)


def bakeoff(points, labels: Sequence, k: int = 3, seed: int = 0) -> BakeoffReport:
    """Run all four algorithms on a labelled corpus and score them with BCubed."""
    X = _as_points(points)
    scores = {
        "spherical": bcubed(spherical_kmeans(X, k, seed), labels),
        "kmeans": bcubed(kmeans(X, k, seed), labels),
        "ward": bcubed(agglomerative_ward(X, k), labels),
        "gmm": bcubed(gmm_em(X, k, seed)[1], labels),
    }
    return BakeoffReport(k=k, seed=seed, scores=scores)
