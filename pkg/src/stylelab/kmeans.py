"""Seeded k-means with k-means++ initialization and Lloyd updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class KmeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list[float]


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # [N, K] squared euclidean distances
    diff = x[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _init_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass at existing centers; pick uniformly
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def kmeans(x: np.ndarray, k: int, seed: int, max_iter: int = 100,
           tol: float = 1e-8) -> KmeansResult:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError(f"expected a [N, D] matrix, got shape {x.shape}")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")

    rng = np.random.default_rng(seed)
    centers = _init_plus_plus(x, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    prev_inertia = np.inf
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(x, centers)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        history.append(inertia)
        new_centers = centers.copy()
        for j in range(k):
            mask = labels == j
            if mask.any():
                new_centers[j] = x[mask].mean(axis=0)
            else:
                # empty cluster: reseed to the point farthest from its center
                dist_to_own = d2[np.arange(n), labels]
                new_centers[j] = x[int(np.argmax(dist_to_own))]
        centers = new_centers
        if prev_inertia - inertia <= tol:
            break
        prev_inertia = inertia

    d2 = _sq_dists(x, centers)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    history.append(inertia)
    return KmeansResult(labels=labels, centers=centers, inertia=inertia,
                        n_iter=n_iter, inertia_history=history)
