"""Inhomogeneous (time-changed) and fractional mPH models.

``MiphModel``: margin ``i`` of a base mPH vector ``Y`` is mapped through a
deterministic clock, ``X_i = g_i(Y_i)``, with ``g_i^{-1}(x) = int_0^x
lambda_i(u) du``. Weibull clocks give matrix-Weibull margins, Gompertz
clocks give Gompertz-like tails.

``FracMphModel``: matrix exponentials are replaced by matrix Mittag-Leffler
functions. Equivalently ``X_i = Y_i^(1/alpha) S_i`` with ``Y`` a base mPH
vector and i.i.d. positive ``alpha``-stable scales ``S_i`` (Laplace
transform ``exp(-u^alpha)``): given ``S``, ``P(Y_i > (x/S)^alpha)`` averages
to ``E_alpha(T x^alpha)`` exactly as the scalar Mittag-Leffler law does.
The heavy stable factor makes every margin regularly varying with index
``alpha``.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import core, sampling
from .errors import DomainError, InvalidArgumentError
from .linalg import DEFAULT_CONFIG, mittag_leffler_matrix


@dataclass(frozen=True)
class TimeChange:
    kind: str = "identity"
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "weibull", "gompertz"):
            raise InvalidArgumentError(f"unknown time change {self.kind!r}")
        if not self.beta > 0:
            raise InvalidArgumentError("beta must be positive")

    def g_inverse(self, x):
        """Integrated intensity ``int_0^x lambda(u) du``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "weibull":
            return x ** self.beta
        if self.kind == "gompertz":
            return np.expm1(self.beta * x) / self.beta
        return x

    def intensity(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "weibull":
            return self.beta * x ** (self.beta - 1.0)
        if self.kind == "gompertz":
            return np.exp(self.beta * x)
        return np.ones_like(x)

    def g(self, y):
        """Inverse clock: maps base absorption times to the new time scale."""
        y = np.asarray(y, dtype=float)
        if self.kind == "weibull":
            return y ** (1.0 / self.beta)
        if self.kind == "gompertz":
            return np.log1p(self.beta * y) / self.beta
        return y


class MiphModel:
    def __init__(self, base, time_changes):
        time_changes = tuple(time_changes)
        if len(time_changes) != base.d:
            raise InvalidArgumentError(
                f"need one time change per margin ({base.d}), got {len(time_changes)}")
        self.base = base
        self.time_changes = time_changes

    @property
    def d(self):
        return self.base.d

    def _clock(self, X):
        return np.column_stack([tc.g_inverse(X[:, i])
                                for i, tc in enumerate(self.time_changes)])


def _as_points(d, x):
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    if X.shape[1] != d:
        raise InvalidArgumentError(f"points must have {d} coordinates")
    return X, x.ndim == 1


def miph_density(model, x):
    X, scalar = _as_points(model.d, x)
    if np.any(X <= 0):
        raise DomainError("density requires strictly positive coordinates")
    with np.errstate(over="ignore", invalid="ignore"):
        jac = np.prod([tc.intensity(X[:, i]) for i, tc in enumerate(model.time_changes)],
                      axis=0)
        clock = model._clock(X)
        base = core.density(model.base, clock)
        # a clock that overflowed to inf has zero base density
        vals = np.where(base > 0, base * jac, 0.0)
    return float(vals[0]) if scalar else vals


def miph_cdf(model, x):
    X, scalar = _as_points(model.d, x)
    if np.any(X < 0):
        raise DomainError("coordinates must be nonnegative")
    with np.errstate(over="ignore"):
        vals = core.cdf(model.base, model._clock(X))
    return float(vals[0]) if scalar else vals


def miph_survival(model, x):
    X, scalar = _as_points(model.d, x)
    if np.any(X < 0):
        raise DomainError("coordinates must be nonnegative")
    with np.errstate(over="ignore"):
        vals = core.survival(model.base, model._clock(X))
    return float(vals[0]) if scalar else vals


def miph_sample(model, n, seed=0):
    Y = sampling.sample(model.base, n, seed)
    return np.column_stack([tc.g(Y[:, i]) for i, tc in enumerate(model.time_changes)])


# ---------------------------------------------------------------------------
# fractional
# ---------------------------------------------------------------------------

class FracMphModel:
    def __init__(self, base, alpha):
        alpha = float(alpha)
        if not 0 < alpha <= 1:
            raise InvalidArgumentError("alpha must lie in (0, 1]")
        self.base = base
        self.alpha = alpha

    @property
    def d(self):
        return self.base.d


def _frac_products(model, X, kind, config):
    base, a = model.base, model.alpha
    p = base.p
    e = np.ones(p)
    prod = np.ones((X.shape[0], p))
    beta = a if kind == "density" else 1.0
    for i, (Ti, ti) in enumerate(zip(base.T, base.exits)):
        for r, xr in enumerate(X[:, i]):
            if xr == 0:
                E = np.eye(p) * (1.0 if beta == 1.0 else 1.0 / math.gamma(beta))
            else:
                E = mittag_leffler_matrix(Ti * xr ** a, a, beta, config)
            if kind == "density":
                prod[r] *= xr ** (a - 1.0) * (E @ ti)
            elif kind == "survival":
                prod[r] *= E @ e
            else:
                prod[r] *= 1.0 - E @ e
    return prod @ base.pi


def frac_density(model, x, config=DEFAULT_CONFIG):
    X, scalar = _as_points(model.d, x)
    if np.any(X <= 0):
        raise DomainError("density requires strictly positive coordinates")
    vals = _frac_products(model, X, "density", config)
    return float(vals[0]) if scalar else vals


def frac_cdf(model, x, config=DEFAULT_CONFIG):
    X, scalar = _as_points(model.d, x)
    if np.any(X < 0):
        raise DomainError("coordinates must be nonnegative")
    vals = np.clip(_frac_products(model, X, "cdf", config), 0.0, 1.0)
    return float(vals[0]) if scalar else vals


def frac_survival(model, x, config=DEFAULT_CONFIG):
    X, scalar = _as_points(model.d, x)
    if np.any(X < 0):
        raise DomainError("coordinates must be nonnegative")
    vals = np.clip(_frac_products(model, X, "survival", config), 0.0, 1.0)
    return float(vals[0]) if scalar else vals


def positive_stable(alpha, size, rng):
    """Positive ``alpha``-stable draws with Laplace transform ``exp(-u^alpha)``.

    Kanter's representation: with ``U ~ U(0, pi)`` and ``E ~ Exp(1)``,
    ``sin(alpha U) / sin(U)^(1/alpha) * (sin((1-alpha) U) / E)^((1-alpha)/alpha)``.
    """
    if not 0 < alpha <= 1:
        raise InvalidArgumentError("alpha must lie in (0, 1]")
    if alpha == 1:
        return np.ones(size)
    U = rng.uniform(0.0, math.pi, size)
    E = rng.standard_exponential(size)
    return (np.sin(alpha * U) / np.sin(U) ** (1.0 / alpha)
            * (np.sin((1.0 - alpha) * U) / E) ** ((1.0 - alpha) / alpha))


def frac_sample(model, n, seed=0):
    """``Y^(1/alpha)`` times independent positive-stable scales, ``Y`` the base sample.

    The power on ``Y`` is what makes the draws follow :func:`frac_cdf`: the
    plain product ``Y * S`` has a different law whenever ``alpha < 1``.
    """
    Y = sampling.sample(model.base, n, seed)
    if model.alpha == 1:
        return Y
    # a stream disjoint from the ones the base sampler spawns from ``seed``
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2 ** 31,)))
    return Y ** (1.0 / model.alpha) * positive_stable(model.alpha, Y.shape, rng)
