"""Balanced k-means: k-means++ seeding, slot-based balanced assignment, mean update."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class Clustering:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    iterations: int
    objective: float
    history: tuple[float, ...] = ()

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def hungarian_min_cost(cost) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect assignment of rows to columns of a square matrix.

    Returns (perm, total) with perm[i] the column given to row i.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=int)
    perm[rows] = cols
    return perm, float(cost[rows, cols].sum())


def sse(points: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Within-cluster sum of squared distances to the cluster means."""
    total = 0.0
    for c in range(k):
        m = points[labels == c]
        if len(m):
            total += float(((m - m.mean(axis=0)) ** 2).sum())
    return total


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = [points[rng.integers(n)]]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def balanced_assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Optimal assignment under slot capacities: slot s belongs to cluster s mod k."""
    n, k = len(points), len(centroids)
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    slot_cluster = np.arange(n) % k
    perm, _ = hungarian_min_cost(d2[:, slot_cluster])
    return slot_cluster[perm]


def _improve(points: np.ndarray, labels: np.ndarray, k: int, max_steps: int) -> tuple[np.ndarray, int]:
    """Best-improvement local search over pairwise swaps and size-preserving single moves.

    Every accepted step strictly lowers the exact within-cluster SSE and keeps
    cluster sizes within {floor(n/k), ceil(n/k)}.
    """
    labels = labels.copy()
    sq = (points ** 2).sum(axis=1)
    scale = max(float(np.ptp(points, axis=0).max()) ** 2, 1.0)
    steps = 0
    while steps < max_steps:
        sizes = np.bincount(labels, minlength=k).astype(float)
        means = np.array([points[labels == c].mean(axis=0) for c in range(k)])
        mu = means[labels]
        inv = 1.0 / sizes[labels]
        # swap i <-> j across clusters
        diff_mu = mu[:, None, :] - mu[None, :, :]
        diff_x = points[:, None, :] - points[None, :, :]
        d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
        swap = 2.0 * (diff_mu * diff_x).sum(axis=2) - d2 * (inv[:, None] + inv[None, :])
        swap[labels[:, None] == labels[None, :]] = np.inf
        best_swap = np.unravel_index(np.argmin(swap), swap.shape)
        gain_swap = swap[best_swap]
        # move i from a larger cluster to a cluster one smaller
        to_c = ((points[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        own = to_c[np.arange(len(points)), labels]
        ni = sizes[labels]
        with np.errstate(divide="ignore", invalid="ignore"):
            move = -ni / (ni - 1.0) * own
            move = move[:, None] + sizes[None, :] / (sizes[None, :] + 1.0) * to_c
        move[sizes[None, :] != (ni - 1.0)[:, None]] = np.inf
        best_move = np.unravel_index(np.argmin(move), move.shape) if move.size else (0, 0)
        gain_move = move[best_move] if move.size else np.inf
        if min(gain_swap, gain_move) >= -1e-12 * scale:
            break
        if gain_swap <= gain_move:
            i, j = best_swap
            labels[i], labels[j] = labels[j], labels[i]
        else:
            i, c = best_move
            labels[i] = c
        steps += 1
    return labels, steps


def default_restarts(n: int) -> int:
    """Restart budget: small instances are cheap and prone to poor seedings."""
    return int(min(10, max(1, 200 // max(n, 1))))


def balanced_kmeans(
    points, k: int, seed: int = 0, max_iters: int = 100, local_search: bool = True, n_init: int | None = None
) -> Clustering:
    """Balanced k-means; cluster sizes differ by at most one.

    Lloyd-style alternation with a Hungarian balanced assignment step, followed
    (when `local_search`) by swap/move refinement and one more Lloyd pass.
    The best of `n_init` seeded restarts is kept. Deterministic in `seed`.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    if n == 0:
        raise ValueError("no points to cluster")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    n_init = default_restarts(n) if n_init is None else max(1, int(n_init))
    streams = np.random.SeedSequence(seed).spawn(n_init)
    best = None
    for ss in streams:
        cl = _single_run(points, k, np.random.default_rng(ss), max_iters, local_search)
        if best is None or cl.objective < best.objective - 1e-12 * max(1.0, best.objective):
            best = cl
    return best


def _single_run(points: np.ndarray, k: int, rng: np.random.Generator, max_iters: int, local_search: bool) -> Clustering:
    n = len(points)
    centroids = _kmeanspp(points, k, rng)
    labels = None
    history = []
    it = 0
    refined = not local_search or k == 1
    while it < max_iters:
        it += 1
        new = balanced_assign(points, centroids)
        if labels is not None and sse(points, new, k) > history[-1]:
            new = labels  # ties in the assignment may reshuffle; never accept a worse labeling
        centroids = np.array([points[new == c].mean(axis=0) for c in range(k)])
        history.append(sse(points, new, k))
        stable = labels is not None and np.array_equal(new, labels)
        labels = new
        if stable:
            if refined:
                break
            improved, steps = _improve(points, labels, k, max_steps=4 * n)
            refined = True
            if steps == 0:
                break
            labels = improved
            centroids = np.array([points[labels == c].mean(axis=0) for c in range(k)])
            history.append(sse(points, labels, k))
    return Clustering(k, labels, centroids, it, history[-1], tuple(history))
