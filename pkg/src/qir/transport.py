"""Word Mover's Distance via the transportation simplex, and the CRM.

WMD is solved exactly as a balanced transportation problem: north-west
corner rule for the starting basis, MODI (u-v) reduced costs for the
optimality check, and cycle pivots.  Degenerate bases are handled by
perturbing the marginals with 1e-12 dummy flows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .embedding import EmbeddingTable, OovError

FEASIBILITY_TOL = 1e-9
REDUCED_COST_TOL = 1e-12
PERTURBATION = 1e-12
MAX_PIVOTS = 10_000


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class NBow:
    """Normalized bag of words: distinct vocab, weights summing to 1."""

    vocab: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        if len(self.vocab) != len(self.weights):
            raise ValueError("vocab/weights length mismatch")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("nBOW weights must sum to 1")


@dataclass(frozen=True)
class FlowMatrix:
    """Non-negative flows whose marginals match the two nBOW weight vectors."""

    flows: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.flows.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.flows.sum(axis=0)


def nbow(tokens: Sequence, vocab) -> NBow:
    """Eq.-1 style normalized term frequencies over in-vocabulary tokens.

    ``tokens`` may be Token objects or bare strings; words outside ``vocab``
    are dropped before normalization.  Vocab order is first appearance.
    """
    words = [t.lemma if hasattr(t, "lemma") else str(t) for t in tokens]
    counts: dict[str, int] = {}
    for w in words:
        if w in vocab:
            counts[w] = counts.get(w, 0) + 1
    if not counts:
        raise OovError(f"no in-vocabulary tokens in: {' '.join(words)!r}")
    total = sum(counts.values())
    return NBow(vocab=tuple(counts), weights=np.array([c / total for c in counts.values()]))


def cost_matrix(words1: Sequence[str], words2: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Pairwise Euclidean distances between the words' embeddings."""
    X1 = np.array([table[w] for w in words1])
    X2 = np.array([table[w] for w in words2])
    diff = X1[:, None, :] - X2[None, :, :]
    return np.sqrt(np.sum(diff ** 2, axis=2))


def _northwest_corner(supply: np.ndarray, demand: np.ndarray):
    """Initial basic feasible solution; returns (flows, ordered basis cells)."""
    m, n = supply.size, demand.size
    flows = np.zeros((m, n))
    a = supply.copy()
    b = demand.copy()
    basis: list[tuple[int, int]] = []
    i = j = 0
    while True:
        f = min(a[i], b[j])
        flows[i, j] = f
        basis.append((i, j))
        a[i] -= f
        b[j] -= f
        if i == m - 1 and j == n - 1:
            break
        if a[i] == 0.0 and i < m - 1:
            i += 1
        else:
            j += 1
    return flows, basis


def _solve_potentials(basis: list[tuple[int, int]], costs: np.ndarray, m: int, n: int):
    """u_i + v_j = c_ij over the basis tree, anchored at u_0 = 0."""
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    row_cells: list[list[tuple[int, int]]] = [[] for _ in range(m)]
    col_cells: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for (i, j) in basis:
        row_cells[i].append((i, j))
        col_cells[j].append((i, j))
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for (i, j) in row_cells[idx]:
                if np.isnan(v[j]):
                    v[j] = costs[i, j] - u[i]
                    stack.append(("c", j))
        else:
            for (i, j) in col_cells[idx]:
                if np.isnan(u[i]):
                    u[i] = costs[i, j] - v[j]
                    stack.append(("r", i))
    if np.any(np.isnan(u)) or np.any(np.isnan(v)):
        raise TransportError("basis graph is not connected")
    return u, v


def _find_cycle(basis: set[tuple[int, int]], enter: tuple[int, int]) -> list[tuple[int, int]]:
    """Unique alternating cycle created by adding ``enter`` to the basis tree.

    Returned as a cell sequence starting at ``enter``; even positions gain
    flow, odd positions lose it.
    """
    ei, ej = enter
    # adjacency over the bipartite row/col node graph
    by_row: dict[int, list[int]] = {}
    by_col: dict[int, list[int]] = {}
    for (i, j) in basis:
        by_row.setdefault(i, []).append(j)
        by_col.setdefault(j, []).append(i)
    # path from column node ej back to row node ei using basis edges
    parent: dict[tuple[str, int], tuple[str, int]] = {}
    start, goal = ("c", ej), ("r", ei)
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        if node == goal:
            break
        kind, idx = node
        neighbors = ([("r", i) for i in by_col.get(idx, [])] if kind == "c"
                     else [("c", j) for j in by_row.get(idx, [])])
        for nxt in neighbors:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = node
                stack.append(nxt)
    else:
        raise TransportError("no cycle found for entering cell")
    path_nodes = [goal]
    while path_nodes[-1] != start:
        path_nodes.append(parent[path_nodes[-1]])
    # stitch node path into cells: r->c or c->r step = one basis cell
    cells = [enter]
    for a, b in zip(path_nodes, path_nodes[1:]):
        (ka, ia), (kb, ib) = a, b
        cells.append((ia, ib) if ka == "r" else (ib, ia))
    return cells


def solve_transport(supply: np.ndarray, demand: np.ndarray, costs: np.ndarray):
    """Exact balanced transportation problem; returns (objective, flows).

    Marginals must both sum to 1 (an nBOW pair).  The returned flow matrix
    satisfies the marginals within FEASIBILITY_TOL.
    """
    supply = np.asarray(supply, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.float64)
    m, n = supply.size, demand.size
    if costs.shape != (m, n):
        raise TransportError(f"cost matrix shape {costs.shape} != ({m}, {n})")
    if abs(supply.sum() - demand.sum()) > FEASIBILITY_TOL:
        raise TransportError("unbalanced transportation problem")
    # anti-degeneracy: tiny dummy flows on the supplies, absorbed by the last demand
    a = supply + PERTURBATION
    b = demand.copy()
    b[-1] += PERTURBATION * m

    flows, basis_list = _northwest_corner(a, b)
    basis = set(basis_list)
    for _ in range(MAX_PIVOTS):
        u, v = _solve_potentials(basis_list, costs, m, n)
        reduced = costs - u[:, None] - v[None, :]
        reduced_masked = reduced.copy()
        for (i, j) in basis:
            reduced_masked[i, j] = 0.0
        enter = np.unravel_index(np.argmin(reduced_masked), reduced_masked.shape)
        if reduced_masked[enter] >= -REDUCED_COST_TOL:
            break
        cycle = _find_cycle(basis, (int(enter[0]), int(enter[1])))
        losing = cycle[1::2]
        theta_idx = min(range(len(losing)), key=lambda idx: (flows[losing[idx]], losing[idx]))
        leave = losing[theta_idx]
        theta = flows[leave]
        for pos, cell in enumerate(cycle):
            flows[cell] += theta if pos % 2 == 0 else -theta
        flows[leave] = 0.0
        basis.discard(leave)
        basis.add((int(enter[0]), int(enter[1])))
        basis_list = list(basis)
    else:
        raise TransportError("transportation simplex exceeded pivot limit")

    flows = np.where(flows < 0.0, 0.0, flows)
    objective = float(np.sum(flows * costs))
    return objective, flows


def wmd(d1: NBow, d2: NBow, table: EmbeddingTable) -> tuple[float, FlowMatrix]:
    """Minimum total cost of moving d1's word mass onto d2's."""
    costs = cost_matrix(d1.vocab, d2.vocab, table)
    distance, flows = solve_transport(d1.weights, d2.weights, costs)
    return distance, FlowMatrix(flows=flows)


@dataclass(frozen=True)
class Crm:
    """Symmetric, zero-diagonal cluster relationship matrix in [0, 1]."""

    n: int
    entries: np.ndarray

    def off_diagonal(self) -> np.ndarray:
        mask = ~np.eye(self.n, dtype=bool)
        return self.entries[mask]

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def drop(self, cluster_id: int) -> "Crm":
        keep = [i for i in range(self.n) if i != cluster_id]
        return Crm(n=self.n - 1, entries=self.entries[np.ix_(keep, keep)])

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "entries": self.entries.flatten().tolist()})

    @classmethod
    def from_entries(cls, entries: np.ndarray) -> "Crm":
        entries = np.asarray(entries, dtype=np.float64)
        return cls(n=entries.shape[0], entries=entries)


def crm(clusters: Sequence[Iterable[str]], table: EmbeddingTable,
        aggregate: str = "mean") -> Crm:
    """Inter-cluster distance matrix from word-pair WMDs.

    Between single words WMD collapses to the embedding Euclidean distance,
    so each raw entry is the sum of pairwise distances, divided by
    |cluster_i|*|cluster_j| when ``aggregate`` is "mean" (the default; "sum"
    keeps the plain sum).  The whole matrix is then min-max normalized over
    the off-diagonal entries and the diagonal forced to zero.
    """
    if aggregate not in ("mean", "sum"):
        raise ValueError(f"unknown aggregate mode: {aggregate!r}")
    word_lists = [sorted(set(c)) for c in clusters]
    n = len(word_lists)
    if n < 2:
        raise TransportError("crm needs at least 2 clusters")
    for idx, words in enumerate(word_lists):
        if not words:
            raise TransportError(f"cluster {idx} is empty")
    vectors = [np.array([table[w] for w in words]) for words in word_lists]

    raw = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            diff = vectors[i][:, None, :] - vectors[j][None, :, :]
            total = float(np.sqrt(np.sum(diff ** 2, axis=2)).sum())
            if aggregate == "mean":
                total /= len(word_lists[i]) * len(word_lists[j])
            raw[i, j] = raw[j, i] = total

    mask = ~np.eye(n, dtype=bool)
    off = raw[mask]
    lo, hi = float(off.min()), float(off.max())
    if hi - lo <= 0.0:
        normalized = np.zeros((n, n))
    else:
        normalized = (raw - lo) / (hi - lo)
        normalized[~mask] = 0.0
        normalized[mask] = np.clip(normalized[mask], 0.0, 1.0)
    return Crm(n=n, entries=normalized)
