"""Behavioral sub-class discovery by spectral clustering of day vectors.

Each participant-day is a point in R^1440 (its numeric location codes). A
Gaussian affinity with self-similarity ``mu`` on the diagonal gives the
symmetric normalized Laplacian; sweeping the kernel scale and watching the
gaps between sorted eigenvalues picks the cluster count and scale.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn.cluster import KMeans

from .mobility import LocationDay

logger = logging.getLogger(__name__)

DEFAULT_MODES: tuple[tuple[int, int], ...] = tuple((i, i + 1) for i in range(1, 7))


@dataclass(frozen=True)
class SpectralParams:
    sigma: float
    self_similarity: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.self_similarity <= 1.0:
            raise ValueError(f"self-similarity must lie in [0, 1], got {self.self_similarity}")


@dataclass
class EigenGapCurve:
    mode: tuple[int, int]
    sigmas: np.ndarray
    gaps: np.ndarray


@dataclass
class SweepResult:
    sigmas: np.ndarray
    eigenvalues: np.ndarray  # (len(sigmas), n) ascending per row
    curves: dict[tuple[int, int], EigenGapCurve]
    failed: list[float] = field(default_factory=list)


@dataclass
class SpectralResult:
    labels: np.ndarray
    k: int
    sigma: float
    eigenvalues: np.ndarray
    n_vectors: int
    degenerate: bool = False


def day_vectors(days: Sequence[LocationDay]) -> np.ndarray:
    return np.vstack([d.codes.astype(float) for d in days])


def similarity(x_i, x_j, p: SpectralParams, same: bool = False) -> float:
    """Gaussian kernel between two day vectors; ``same`` marks the diagonal."""
    if same:
        return p.self_similarity
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape:
        raise ValueError("day vectors differ in length")
    d2 = float(np.sum((x_i - x_j) ** 2))
    return math.exp(-d2 / (2.0 * p.sigma**2))


def squared_distances(X: np.ndarray) -> np.ndarray:
    return squareform(pdist(np.asarray(X, dtype=float), "sqeuclidean"))


def affinity(sq_dist: np.ndarray, p: SpectralParams) -> np.ndarray:
    A = np.exp(-sq_dist / (2.0 * p.sigma**2))
    np.fill_diagonal(A, p.self_similarity)
    return A


def laplacian_from_affinity(A: np.ndarray) -> np.ndarray:
    deg = A.sum(axis=1)
    if np.any(deg <= 0):
        raise ValueError("zero row sum in affinity matrix; raise sigma or self-similarity")
    inv_sqrt = 1.0 / np.sqrt(deg)
    L = np.eye(len(A)) - inv_sqrt[:, None] * A * inv_sqrt[None, :]
    return 0.5 * (L + L.T)


def build_laplacian(X: np.ndarray, p: SpectralParams) -> np.ndarray:
    """Symmetric normalized Laplacian ``I - D^-1/2 A D^-1/2``.

    The degree matrix is diagonal (row sums of A, diagonal included).
    """
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        raise ValueError("need at least two day vectors")
    return laplacian_from_affinity(affinity(squared_distances(X), p))


def default_grid(X: np.ndarray, points: int = 32, span=(0.01, 0.5)) -> np.ndarray:
    d = pdist(np.asarray(X, dtype=float))
    med = float(np.median(d)) if len(d) else 0.0
    if med <= 0:
        med = 1.0
    return np.logspace(math.log10(span[0] * med), math.log10(span[1] * med), points)


def sigma_sweep(
    X: np.ndarray,
    grid: Sequence[float] | None = None,
    modes: Sequence[tuple[int, int]] = DEFAULT_MODES,
    self_similarity: float = 1.0,
    workers: int = 1,
) -> SweepResult:
    """Eigen gaps of the Laplacian for each kernel scale in ``grid``.

    The gap for mode (x, y) is ``lambda_y - lambda_x`` with 1-based indices
    into the ascending eigenvalues. Modes beyond the number of days, and grid
    points where the eigensolver fails, give NaN.
    """
    X = np.asarray(X, dtype=float)
    sigmas = default_grid(X) if grid is None else np.asarray(grid, dtype=float)
    if len(sigmas) == 0:
        raise ValueError("empty sigma grid")
    if np.any(np.diff(sigmas) <= 0):
        raise ValueError("sigma grid must be strictly increasing")
    sq = squared_distances(X)
    n = len(X)

    def one(sigma):
        try:
            L = laplacian_from_affinity(affinity(sq, SpectralParams(sigma, self_similarity)))
            return np.linalg.eigvalsh(L)
        except (np.linalg.LinAlgError, ValueError) as exc:
            logger.warning("eigendecomposition failed at sigma=%g: %s", sigma, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, sigmas))
    else:
        results = [one(s) for s in sigmas]

    eig = np.full((len(sigmas), n), np.nan)
    failed = []
    for i, vals in enumerate(results):
        if vals is None:
            failed.append(float(sigmas[i]))
        else:
            eig[i] = vals
    curves = {}
    for x, y in modes:
        if not 1 <= x < y:
            raise ValueError(f"bad mode {(x, y)}")
        gaps = eig[:, y - 1] - eig[:, x - 1] if y <= n else np.full(len(sigmas), np.nan)
        curves[(x, y)] = EigenGapCurve((x, y), sigmas, gaps)
    return SweepResult(sigmas, eig, curves, failed)


def select_mode(curves) -> tuple[int, float, tuple[int, int]]:
    """Prominent mode and dominant scale.

    The prominent mode is the (mode, sigma) pair with the largest gap; ties go
    to the lower mode, then the smaller sigma. Returns ``(k, sigma, mode)``
    with ``k`` the mode's lower index.
    """
    if isinstance(curves, dict):
        curves = list(curves.values())
    best = None
    for c in sorted(curves, key=lambda c: c.mode):
        gaps = np.asarray(c.gaps, dtype=float)
        for i in np.argsort(c.sigmas, kind="stable"):
            g = gaps[i]
            if not np.isfinite(g):
                continue
            if best is None or g > best[0]:
                best = (g, c.mode, float(c.sigmas[i]))
    if best is None:
        raise ValueError("every eigen gap is NaN; no mode can be selected")
    _, mode, sigma = best
    return mode[0], sigma, mode


def _canonical(labels: np.ndarray) -> np.ndarray:
    out = np.empty_like(labels)
    seen: dict[int, int] = {}
    for i, v in enumerate(labels.tolist()):
        if v not in seen:
            seen[v] = len(seen)
        out[i] = seen[v]
    return out


def spectral_cluster(
    X: np.ndarray,
    k: int,
    sigma: float,
    self_similarity: float = 1.0,
    seed: int = 0,
    n_init: int = 10,
    tol: float = 1e-8,
) -> SpectralResult:
    """Partition days into ``k`` groups.

    Rows of the eigenvectors for the ``k`` smallest eigenvalues are clustered
    with k-means (k-means++ seeding, best of ``n_init`` by inertia). When the
    eigenvalue at the cut is repeated the whole tied eigenspace is used and
    the result is flagged degenerate. Labels are renumbered by first
    appearance.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, {n}], got {k}")
    L = build_laplacian(X, SpectralParams(sigma, self_similarity))
    vals, vecs = np.linalg.eigh(L)
    m = k
    degenerate = False
    if k < n and abs(vals[k] - vals[k - 1]) < tol:
        degenerate = True
        while m < n and abs(vals[m] - vals[k - 1]) < tol:
            m += 1
        logger.warning(
            "eigenvalue %g repeated at the k=%d cut; using %d eigenvectors", vals[k - 1], k, m
        )
    emb = vecs[:, :m]
    if k == n:
        labels = np.arange(n)
    else:
        km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=seed)
        labels = km.fit_predict(emb)
        if len(np.unique(labels)) < k:
            degenerate = True
    return SpectralResult(_canonical(np.asarray(labels)), k, float(sigma), vals, m, degenerate)


def cluster_days(
    days: Sequence[LocationDay],
    grid: Sequence[float] | None = None,
    modes: Sequence[tuple[int, int]] = DEFAULT_MODES,
    self_similarity: float = 1.0,
    seed: int = 0,
    workers: int = 1,
) -> tuple[SpectralResult, SweepResult, tuple[int, int]]:
    """Sweep, select, and cluster one occupation's days.

    A prominent mode of 1-2 means no sub-structure; every day gets label 0.
    """
    X = day_vectors(days)
    sweep = sigma_sweep(X, grid, modes, self_similarity, workers)
    k, sigma, mode = select_mode(sweep.curves)
    if k < 2:
        L = build_laplacian(X, SpectralParams(sigma, self_similarity))
        vals = np.linalg.eigvalsh(L)
        return SpectralResult(np.zeros(len(X), dtype=int), 1, sigma, vals, 1), sweep, mode
    return spectral_cluster(X, k, sigma, self_similarity, seed), sweep, mode


def report(result: SpectralResult, sweep: SweepResult, mode: tuple[int, int]) -> dict:
    """JSON-ready summary of one occupation's clustering."""
    return {
        "mode": f"{mode[0]}-{mode[1]}",
        "k": result.k,
        "sigma": result.sigma,
        "degenerate": result.degenerate,
        "eigenvalues": [float(v) for v in result.eigenvalues[:20]],
        "cluster_sizes": np.bincount(result.labels).tolist(),
        "sweep": {
            "sigmas": sweep.sigmas.tolist(),
            "gaps": {
                f"{m[0]}-{m[1]}": [None if not np.isfinite(g) else float(g) for g in c.gaps]
                for m, c in sweep.curves.items()
            },
            "failed_sigmas": sweep.failed,
        },
    }
