"""Approximation of positive-orthant distributions by finite Erlang mixtures.

A target law is discretised onto the cells
``C(n, k) = {x : (k_i - 1)/n < x_i <= k_i/n}``, truncated at ``k <= m``; the
cell probabilities become the weights of a mixture of vectors with
independent ``Erlang(k_i, n)`` components, which is itself an mPH model.
"""

from dataclasses import dataclass, field
import itertools

import numpy as np
from scipy import stats

from .core import MphModel, cdf as mph_cdf
from .errors import InvalidArgumentError, ValidationError


@dataclass
class ErlangMixtureSpec:
    """Grid rate ``n``, truncation ``m`` and lexicographically ordered cells.

    ``cells`` is a list of ``(k, weight)`` with ``k`` a tuple of positive
    ints; the list position of a cell is its block index in the compiled
    model. ``truncation_mass`` is ``F(m/n)``, the target mass kept.
    """

    n: int
    m: tuple
    cells: list = field(default_factory=list)
    truncation_mass: float = 1.0

    def __post_init__(self):
        self.m = tuple(int(v) for v in self.m)
        self.cells = [(tuple(int(v) for v in k), float(w)) for k, w in self.cells]
        if self.n < 1:
            raise ValidationError("grid rate must be a positive integer", "n")
        if any(v < 1 for v in self.m):
            raise ValidationError("truncation must be >= 1 in every coordinate", "m")
        for idx, (k, w) in enumerate(self.cells):
            if len(k) != len(self.m) or any(not 1 <= ki <= mi for ki, mi in zip(k, self.m)):
                raise ValidationError(f"cell {k} outside truncation {self.m}",
                                      f"cells[{idx}].k")
            if not w > 0:
                raise ValidationError("cell weights must be positive", f"cells[{idx}].w")
        total = sum(w for _, w in self.cells)
        if self.cells and abs(total - 1.0) > 1e-12:
            raise ValidationError(f"cell weights sum to {total!r}", "cells")

    @property
    def d(self):
        return len(self.m)

    @property
    def truncation_bound(self):
        """``2 (1 - F(m/n))``, the sup-norm distance to the untruncated mixture."""
        return 2.0 * (1.0 - self.truncation_mass)

    def to_dict(self):
        return {"n": self.n, "m": list(self.m),
                "cells": [{"k": list(k), "w": w} for k, w in self.cells],
                "truncation_mass": self.truncation_mass}

    @classmethod
    def from_dict(cls, obj):
        return cls(int(obj["n"]), obj["m"], [(c["k"], c["w"]) for c in obj["cells"]],
                   float(obj.get("truncation_mass", 1.0)))


def _finalize(n, m, counts):
    cells = sorted((k, w) for k, w in counts.items() if w > 0)
    total = sum(w for _, w in cells)
    return [(k, w / total) for k, w in cells], total


def discretize_sample(data, n, m):
    """Empirical cell weights; rows outside ``x <= m/n`` are dropped."""
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    m = tuple(int(v) for v in np.atleast_1d(m))
    if len(m) != X.shape[1]:
        raise InvalidArgumentError(f"m has {len(m)} entries, data has {X.shape[1]} columns")
    if n < 1 or any(v < 1 for v in m):
        raise InvalidArgumentError("n and m must be positive")
    if np.any(X <= 0) or not np.all(np.isfinite(X)):
        raise InvalidArgumentError("data must be finite and strictly positive")
    K = np.ceil(X * n).astype(int)
    inside = np.all(K <= np.array(m), axis=1)
    if not inside.any():
        raise InvalidArgumentError("no observations inside the truncation box")
    keys, counts = np.unique(K[inside], axis=0, return_counts=True)
    cells = [(tuple(int(v) for v in k), c / inside.sum()) for k, c in zip(keys, counts)]
    return ErlangMixtureSpec(int(n), m, sorted(cells), float(inside.mean()))


def discretize_cdf(F, n, m, neg_tol=1e-8):
    """Cell probabilities of a target distribution function ``F``.

    ``F`` maps an ``(N, d)`` array of points to ``N`` probabilities. Each cell
    mass comes from inclusion-exclusion over its ``2^d`` corners.
    """
    m = tuple(int(v) for v in np.atleast_1d(m))
    d = len(m)
    if n < 1 or any(v < 1 for v in m):
        raise InvalidArgumentError("n and m must be positive")
    # F on the full corner lattice {0..m_1} x ... x {0..m_d} / n
    axes = [np.arange(mi + 1) / n for mi in m]
    lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    G = np.asarray(F(lattice), dtype=float).reshape([mi + 1 for mi in m])
    mass = G
    for ax in range(d):
        mass = np.diff(mass, axis=ax)
    if np.any(mass < -neg_tol):
        raise InvalidArgumentError(
            f"target is not a distribution function (cell mass {mass.min():.3g})")
    mass = np.clip(mass, 0.0, None)
    total = float(mass.sum())
    if total <= 0:
        raise InvalidArgumentError("target puts no mass inside the truncation box")
    cells = [(tuple(int(v) + 1 for v in idx), float(mass[idx]) / total)
             for idx in itertools.product(*(range(mi) for mi in m)) if mass[idx] > 0]
    return ErlangMixtureSpec(int(n), m, cells, float(G[tuple(m)]))


def _block_layout(spec):
    M = len(spec.cells)
    K = max(max(k) for k, _ in spec.cells)
    n = float(spec.n)
    p = M * K
    pi = np.zeros(p)
    mats = [np.zeros((p, p)) for _ in range(spec.d)]
    for c, (k, w) in enumerate(spec.cells):
        base = c * K
        pi[base] = w
        for i, T in enumerate(mats):
            for ell in range(K):
                T[base + ell, base + ell] = -n
                # phases past k_i are unreachable and exit directly
                if ell + 1 < k[i]:
                    T[base + ell, base + ell + 1] = n
    return MphModel(pi, mats)


def _shared_layout(spec):
    M = len(spec.cells)
    K = max(max(k) for k, _ in spec.cells)
    n = float(spec.n)
    p = M + K - 1
    pi = np.zeros(p)
    mats = [np.zeros((p, p)) for _ in range(spec.d)]
    # ladder state M + r - 1 has r phases left (r = 1..K-1); state M + 0 exits
    for T in mats:
        for r in range(1, K):
            s = M + r - 1
            T[s, s] = -n
            if r > 1:
                T[s, s - 1] = n
    for c, (k, w) in enumerate(spec.cells):
        pi[c] = w
        for i, T in enumerate(mats):
            T[c, c] = -n
            if k[i] > 1:
                T[c, M + k[i] - 2] = n
    return MphModel(pi, mats)


def build_erlang_mixture(spec, layout="shared"):
    """Compile a spec into an mPH model.

    ``layout="block"`` gives every cell its own block of ``K = max k`` phases
    (``p = M K`` states). ``layout="shared"`` (default) gives every cell one
    entry state and lets all cells share a single countdown ladder of
    ``K - 1`` phases (``p = M + K - 1``); both represent the same law.
    """
    if not spec.cells:
        raise ValidationError("spec has no cells", "cells")
    if layout == "block":
        return _block_layout(spec)
    if layout == "shared":
        return _shared_layout(spec)
    raise InvalidArgumentError(f"unknown layout {layout!r}")


def erlang_mixture_cdf(spec, x):
    """Direct evaluation of ``sum_k w_k prod_i ErlangCDF(x_i; k_i, n)``."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(X.shape[0])
    for k, w in spec.cells:
        term = np.full(X.shape[0], w)
        for i, ki in enumerate(k):
            term *= stats.gamma.cdf(X[:, i], ki, scale=1.0 / spec.n)
        out += term
    return out


@dataclass
class ApproximationReport:
    sup_error: float
    truncation_bound: float | None


def approximation_error(target_cdf, model, grid, spec=None):
    """Largest ``|F_target - F_model|`` over ``grid`` plus the truncation bound."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    err = float(np.max(np.abs(np.asarray(target_cdf(grid)) - mph_cdf(model, grid))))
    bound = spec.truncation_bound if spec is not None else None
    return ApproximationReport(err, bound)
