"""Coupling distances between discrete measures and total variation limits."""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_CAP = 2000


def _ot():
    # keep POT from importing GPU/autodiff backends it would never use here
    for name in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
    import ot

    return ot


@dataclass(frozen=True)
class PseudoMetric:
    """``min(1, |x - y| / eps)`` (kind="scaled") or a user function (kind="custom")."""

    kind: str = "scaled"
    eps: float = 1.0
    func: Callable | None = None

    def __post_init__(self):
        if self.kind == "scaled":
            if not (self.eps > 0):
                raise ValueError("eps must be positive")
        elif self.kind == "custom":
            if self.func is None:
                raise ValueError("custom pseudo-metric needs func")
        else:
            raise ValueError(f"unknown pseudo-metric kind {self.kind!r}")

    @classmethod
    def scaled(cls, eps: float) -> "PseudoMetric":
        return cls("scaled", eps)

    @classmethod
    def discrete(cls) -> "PseudoMetric":
        """The metric ``1{x != y}`` (total variation cost)."""
        return cls("custom", func=lambda X, Y: (_pairwise_dist(X, Y) > 0).astype(float))

    def pairwise(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        Y = np.atleast_2d(np.asarray(Y, float))
        if self.kind == "scaled":
            return np.minimum(1.0, _pairwise_dist(X, Y) / self.eps)
        return np.asarray(self.func(X, Y), float)

    def __call__(self, x, y) -> float:
        return float(self.pairwise(np.atleast_2d(x), np.atleast_2d(y))[0, 0])


def _pairwise_dist(X, Y):
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    d2 = np.sum(X * X, 1)[:, None] + np.sum(Y * Y, 1)[None, :] - 2 * X @ Y.T
    d = np.sqrt(np.maximum(d2, 0.0))
    # exact zeros for identical points (the expansion above can leave roundoff)
    same = np.all(X[:, None, :] == Y[None, :, :], axis=-1) if X.size * Y.shape[0] < 5e7 else None
    if same is not None:
        d[same] = 0.0
    return d


@dataclass(frozen=True)
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, float)
        if pts.ndim == 1:
            pts = pts[:, None]  # scalar support points
        w = np.asarray(self.weights, float)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("need one weight per support point")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "EmpiricalMeasure":
        pts = np.asarray(points, float)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @classmethod
    def dirac(cls, x) -> "EmpiricalMeasure":
        return cls(np.atleast_2d(np.asarray(x, float)), np.array([1.0]))

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return self.points.shape[0]


class UnequalMassError(ValueError):
    pass


class SupportCapError(ValueError):
    pass


def _check_pair(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, cap: int, tol: float = 1e-12):
    if abs(mu1.mass - 1.0) > 1e-9 or abs(mu2.mass - 1.0) > 1e-9:
        if abs(mu1.mass - mu2.mass) > tol * max(mu1.mass, mu2.mass, 1.0):
            raise UnequalMassError(f"masses differ: {mu1.mass} vs {mu2.mass}")
    if len(mu1) > cap or len(mu2) > cap:
        raise SupportCapError(
            f"support sizes {len(mu1)}, {len(mu2)} exceed cap {cap}; subsample the measures"
        )


def coupling_distance(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, d: PseudoMetric,
                      cap: int = DEFAULT_CAP, return_coupling: bool = False):
    """Exact optimal transport cost (network simplex)."""
    _check_pair(mu1, mu2, cap)
    a = mu1.weights / mu1.mass
    b = mu2.weights / mu2.mass
    C = d.pairwise(mu1.points, mu2.points)
    ot = _ot()
    plan = ot.emd(a, b, C, numItermax=10_000_000)
    cost = float(np.sum(plan * C)) * mu1.mass
    if return_coupling:
        return cost, plan * mu1.mass
    return cost


def cost_matrix_distance(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> float:
    ot = _ot()
    return float(np.sum(ot.emd(a, b, C) * C))


# --------------------------------------------------------------------------
# brute-force oracle


def _basis_maps(m: int, n: int):
    """For every choice of m+n-1 cells with an invertible constraint block, the
    linear map from the marginals (a, b[:-1]) to the basic variables."""
    cells = [(i, j) for i in range(m) for j in range(n)]
    A = np.zeros((m + n - 1, m * n))
    for c, (i, j) in enumerate(cells):
        A[i, c] = 1.0
        if j < n - 1:
            A[m + j, c] = 1.0
    out = []
    for sub in itertools.combinations(range(m * n), m + n - 1):
        B = A[:, sub]
        if abs(np.linalg.det(B)) < 0.5:  # totally unimodular: det is 0 or +-1
            continue
        out.append((np.array(sub), np.linalg.inv(B)))
    return out


_MAPS: dict = {}


def vertex_enumeration_cost(a: np.ndarray, b: np.ndarray, C: np.ndarray, tol: float = 1e-12) -> float:
    """Minimum of the transport cost over all vertices of the coupling polytope."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    m, n = C.shape
    if (m, n) not in _MAPS:
        maps = _basis_maps(m, n)
        _MAPS[(m, n)] = (
            np.stack([s for s, _ in maps]),
            np.stack([inv for _, inv in maps]),
        )
    subs, invs = _MAPS[(m, n)]
    rhs = np.concatenate([a, b[:-1]])
    X = invs @ rhs  # (n_bases, m+n-1)
    feasible = np.all(X >= -tol, axis=1)
    costs = np.sum(X * C.ravel()[subs], axis=1)
    return float(np.min(costs[feasible]))


def is_lipschitz(f: np.ndarray, D: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(f[:, None] - f[None, :]) <= D + tol))


def duality_lower_bound(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, d: PseudoMetric,
                        rng: np.random.Generator, n_samples: int = 200) -> float:
    """Best ``int f dmu1 - int f dmu2`` over a family of functions that are 1-Lipschitz for ``d``.

    The family holds the distance functions to each support point, random
    functions made Lipschitz by a min-plus extension, and the min-plus
    extension of the transport dual potentials.  Each candidate is checked to
    be Lipschitz on the joint support before it is used, so the result is a
    certified lower bound for the transport cost.
    """
    pts = np.vstack([mu1.points, mu2.points])
    D = d.pairwise(pts, pts)
    k = pts.shape[0]
    n1 = len(mu1)
    w = np.concatenate([mu1.weights, -mu2.weights])
    cands = [D[i] for i in range(k)]
    for _ in range(n_samples):
        f0 = rng.uniform(-1, 1, k)
        cands.append(np.min(f0[:, None] + D, axis=0))
    ot = _ot()
    C = D[:n1, n1:]
    _, log = ot.emd(mu1.weights, mu2.weights, C, log=True)
    g = np.asarray(log["v"])
    cands.append(np.min(D[:, n1:] - g[None, :], axis=1))
    best = 0.0
    for f in cands:
        if not is_lipschitz(f, D):
            continue
        val = float(w @ f)
        best = max(best, val, -val)
    return best


# --------------------------------------------------------------------------
# total variation as a limit


def discrete_tv(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure) -> float:
    """``1/2 sum |w1(x) - w2(x)|`` after merging identical support points."""
    pts = np.vstack([mu1.points, mu2.points])
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.ravel()
    w = np.zeros(len(uniq))
    np.add.at(w, inv[: len(mu1)], mu1.weights)
    np.add.at(w, inv[len(mu1):], -mu2.weights)
    return 0.5 * float(np.abs(w).sum())


@dataclass
class TVLimit:
    epsilons: np.ndarray
    distances: np.ndarray
    tv: float
    nondecreasing: bool
    converged: bool


def tv_limit_estimate(mu1, mu2, epsilons, tol: float = 1e-9) -> TVLimit:
    """Distances under ``min(1, |x-y|/eps_n)`` for a decreasing sequence of ``eps_n``."""
    eps = np.asarray(epsilons, float)
    if np.any(np.diff(eps) > 0):
        raise ValueError("epsilons must be nonincreasing so the pseudo-metrics increase")
    dist = np.array([coupling_distance(mu1, mu2, PseudoMetric.scaled(e)) for e in eps])
    tv = discrete_tv(mu1, mu2)
    nondec = bool(np.all(np.diff(dist) >= -tol))
    return TVLimit(eps, dist, tv, nondec, abs(dist[-1] - tv) <= 1e-9 if len(dist) else False)
