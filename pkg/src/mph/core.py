"""The mPH model and its closed-form functionals.

A model is an initial distribution ``pi`` over ``p`` transient states plus
one sub-intensity matrix per margin. All margins start in the same randomly
drawn state and then evolve independently until absorption; the vector of
absorption times is the random vector being modelled. Conditionally on the
start state the margins are independent, which is what makes every
functional below a ``pi``-weighted sum of products of univariate
phase-type quantities.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, sparse, special
from scipy.sparse import linalg as sparse_linalg

from .errors import DomainError, InvalidArgumentError, UnsupportedCaseError, ValidationError
from .linalg import DEFAULT_CONFIG, expm, kron_sum, kron_sum_many, real_matrix_power

SURVIVAL_KRON_CAP = 4096
EXP_BATCH_BYTES = 32 * 2 ** 20
SPARSE_ORDER = 64


class MphModel:
    """Multivariate phase-type distribution ``mPH(pi, [T_1, ..., T_d])``.

    Parameters
    ----------
    pi : array_like, shape (p,)
        Initial probabilities; must sum to one (no atom at zero).
    T : sequence of array_like, each (p, p)
        Sub-intensity matrix of each margin.
    check : bool
        Run :func:`validate` on construction (default).

    Arrays are stored read-only, so a validated model stays valid.
    """

    def __init__(self, pi, T, *, check=True):
        pi = np.array(pi, dtype=float)
        if isinstance(T, np.ndarray) and T.ndim == 2:
            T = [T]
        mats = tuple(np.array(Ti, dtype=float) for Ti in T)
        pi.setflags(write=False)
        for Ti in mats:
            Ti.setflags(write=False)
        self.pi = pi
        self.T = mats
        if check:
            validate(self)

    @property
    def p(self):
        return self.pi.shape[0]

    @property
    def d(self):
        return len(self.T)

    @property
    def exits(self):
        """Exit-rate vectors ``t_i = -T_i e``."""
        return tuple(-Ti.sum(axis=1) for Ti in self.T)

    def __repr__(self):
        return f"MphModel(p={self.p}, d={self.d})"

    def __eq__(self, other):
        if not isinstance(other, MphModel):
            return NotImplemented
        return (self.d == other.d and np.array_equal(self.pi, other.pi)
                and all(np.array_equal(a, b) for a, b in zip(self.T, other.T)))

    __hash__ = None


def _absorption_reachable(T):
    p = T.shape[0]
    exits = -T.sum(axis=1) > 0
    reach = exits.copy()
    adj = (T > 0) & ~np.eye(p, dtype=bool)
    while True:
        new = reach | (adj & reach[None, :]).any(axis=1)
        if np.array_equal(new, reach):
            return reach
        reach = new


def validate(model, config=DEFAULT_CONFIG):
    """Raise :class:`ValidationError` naming the first violated invariant."""
    pi = model.pi
    if model.d < 1:
        raise ValidationError("model needs at least one margin", "T")
    if pi.ndim != 1 or pi.size < 1:
        raise ValidationError("pi must be a nonempty vector", "pi")
    if not np.all(np.isfinite(pi)):
        raise ValidationError("pi has non-finite entries", "pi")
    if np.any(pi < 0):
        raise ValidationError("pi has negative entries", "pi")
    if abs(pi.sum() - 1.0) > config.stochastic_tol:
        raise ValidationError(f"pi not stochastic (sums to {pi.sum()!r})", "pi")
    p = pi.size
    for i, Ti in enumerate(model.T):
        path = f"T[{i}]"
        if Ti.shape != (p, p):
            raise ValidationError(
                f"all components must share order p={p}, got shape {Ti.shape}", path)
        if not np.all(np.isfinite(Ti)):
            raise ValidationError("non-finite entries", path)
        diag = np.diag(Ti)
        if np.any(diag >= 0):
            k = int(np.argmax(diag >= 0))
            raise ValidationError("diagonal must be negative", f"{path}[{k}, {k}]")
        off = Ti - np.diag(diag)
        if np.any(off < 0):
            k, s = np.argwhere(off < 0)[0]
            raise ValidationError("off-diagonal rates must be nonnegative",
                                  f"{path}[{k}, {s}]")
        rows = Ti.sum(axis=1)
        scale = np.abs(Ti).sum(axis=1)
        bad = rows > config.stochastic_tol * np.maximum(scale, 1.0)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ValidationError("row sums must be <= 0", f"{path}[{k}]")
        reach = _absorption_reachable(Ti)
        if not reach.all():
            k = int(np.argmin(reach))
            raise ValidationError(
                "state cannot reach absorption (T singular)", f"{path}[{k}]")


# ---------------------------------------------------------------------------
# evaluation helpers
# ---------------------------------------------------------------------------

def _points(model, x, strict_positive=False):
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    X = np.atleast_2d(x)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise InvalidArgumentError(
            f"points must have {model.d} coordinates, got shape {x.shape}")
    if np.any(np.isnan(X)):
        raise DomainError("points contain NaN")
    if strict_positive and np.any(X <= 0):
        raise DomainError("density requires strictly positive coordinates")
    if np.any(X < 0):
        raise DomainError("coordinates must be nonnegative")
    return X, scalar


def _finish(values, scalar):
    return float(values[0]) if scalar else values


def _exp_batch(T, xs):
    """``exp(T x)`` for every ``x`` in ``xs``; infinite ``x`` maps to 0."""
    xs = np.asarray(xs, dtype=float)
    finite = np.isfinite(xs)
    out = np.zeros(xs.shape + T.shape)
    if finite.any():
        out[finite] = expm(T[None] * xs[finite][:, None, None])
    return out


def _exp_apply(T, xs, v):
    """``exp(T x) v`` for every ``x`` in ``xs``, in memory-bounded batches."""
    xs = np.asarray(xs, dtype=float)
    if T.shape[0] > SPARSE_ORDER and np.count_nonzero(T) < 0.1 * T.size:
        # large sparse generators (e.g. compiled Erlang mixtures)
        A = sparse.csr_matrix(T)
        out = np.zeros((xs.shape[0], T.shape[0]))
        for r, x in enumerate(xs):
            if np.isfinite(x):
                out[r] = sparse_linalg.expm_multiply(A * x, v)
        return out
    step = max(1, EXP_BATCH_BYTES // (8 * T.shape[0] ** 2))
    out = np.empty((xs.shape[0], T.shape[0]))
    for s in range(0, xs.shape[0], step):
        out[s:s + step] = _exp_batch(T, xs[s:s + step]) @ v
    return out


def _conditional_products(model, X, kind):
    prod = np.ones((X.shape[0], model.p))
    e = np.ones(model.p)
    for i, (Ti, ti) in enumerate(zip(model.T, model.exits)):
        if kind == "density":
            prod *= _exp_apply(Ti, X[:, i], ti)
        elif kind == "survival":
            prod *= _exp_apply(Ti, X[:, i], e)
        else:
            prod *= 1.0 - _exp_apply(Ti, X[:, i], e)
    return prod


def density(model, x):
    """Joint density ``sum_j pi_j prod_i e_j' exp(T_i x_i) t_i``.

    ``x`` is one point of shape ``(d,)`` or a batch ``(n, d)``.
    """
    X, scalar = _points(model, x, strict_positive=True)
    return _finish(_conditional_products(model, X, "density") @ model.pi, scalar)


def cdf(model, x):
    """Joint distribution function ``P(X <= x)``; ``+inf`` coordinates allowed."""
    X, scalar = _points(model, x)
    vals = _conditional_products(model, X, "cdf") @ model.pi
    return _finish(np.clip(vals, 0.0, 1.0), scalar)


def survival(model, x):
    """Joint survival function ``P(X > x)`` in product form."""
    X, scalar = _points(model, x)
    vals = _conditional_products(model, X, "survival") @ model.pi
    return _finish(np.clip(vals, 0.0, 1.0), scalar)


def survival_kron(model, x, cap=SURVIVAL_KRON_CAP):
    """Joint survival through the ``p**d``-dimensional Kronecker representation.

    ``P(X > x) = sum_j pi_j (e_j' x ... x e_j') exp(T_1 x_1 (+) ... (+) T_d x_d) e``.
    Exists as an independent check on :func:`survival`.
    """
    X, scalar = _points(model, x)
    p, d = model.p, model.d
    dim = p ** d
    if dim > cap:
        raise InvalidArgumentError(f"Kronecker dimension p**d={dim} exceeds cap {cap}")
    diag_idx = np.zeros(p, dtype=int)
    for _ in range(d):
        diag_idx = diag_idx * p + np.arange(p)
    out = np.empty(X.shape[0])
    for r, xr in enumerate(X):
        K = kron_sum_many([Ti * xi for Ti, xi in zip(model.T, xr)])
        rows = expm(K)[diag_idx].sum(axis=1)
        out[r] = model.pi @ rows
    return _finish(out, scalar)


def laplace(model, u):
    """Joint Laplace transform ``E exp(-<u, X>)``."""
    U, scalar = _points(model, u)
    p = model.p
    prod = np.ones((U.shape[0], p))
    for i, (Ti, ti) in enumerate(zip(model.T, model.exits)):
        M = U[:, i, None, None] * np.eye(p) - Ti
        prod *= np.linalg.solve(M, np.broadcast_to(ti, (U.shape[0], p))[..., None])[..., 0]
    return _finish(prod @ model.pi, scalar)


# ---------------------------------------------------------------------------
# moments and dependence
# ---------------------------------------------------------------------------

def _conditional_fractional_moment(Ti, ti, theta):
    """``E[X^theta | J_0 = j]`` for every start state, by quadrature."""
    p = Ti.shape[0]
    out = np.empty(p)
    for j in range(p):
        ej = np.eye(p)[j]

        def f(x):
            return ej @ expm(Ti * x) @ ti

        if theta < 0:
            head = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(theta, 0.0))[0]
        else:
            head = integrate.quad(lambda x: x ** theta * f(x), 0.0, 1.0)[0]
        tail = integrate.quad(lambda x: x ** theta * f(x), 1.0, np.inf, limit=200)[0]
        out[j] = head + tail
    return out


def moment(model, theta, full_output=False, config=DEFAULT_CONFIG):
    """Cross moment ``E[X_1^theta_1 ... X_d^theta_d]`` for ``theta_i > -1``.

    Non-integer orders go through a spectral matrix power; when ``-T_i`` is
    too close to defective for that, the conditional moments are integrated
    numerically instead. With ``full_output=True`` returns
    ``(value, info)`` where ``info["quadrature"]`` lists the margins that
    needed the fallback.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != model.d:
        raise InvalidArgumentError(f"theta must have {model.d} entries")
    if np.any(theta <= -1):
        raise DomainError("moment orders must exceed -1")
    e = np.ones(model.p)
    prod = np.ones(model.p)
    fallback = []
    for i, (Ti, ti, th) in enumerate(zip(model.T, model.exits, theta)):
        if th == 0:
            continue
        try:
            v = special.gamma(th + 1) * real_matrix_power(-Ti, th, config) @ e
        except UnsupportedCaseError:
            v = _conditional_fractional_moment(Ti, ti, th)
            fallback.append(i)
        prod *= v
    value = float(model.pi @ prod)
    if full_output:
        return value, {"quadrature": fallback}
    return value


def _check_pair(model, k, l):
    for idx in (k, l):
        if not 0 <= idx < model.d:
            raise InvalidArgumentError(f"margin index {idx} out of range")
    if k == l:
        raise DomainError("dependence measures need two distinct margins")


def _inverse_moments(Ti, order):
    return real_matrix_power(-Ti, order) @ np.ones(Ti.shape[0])


def marginal_sd(model, k):
    pi = model.pi
    m1 = pi @ _inverse_moments(model.T[k], 1)
    m2 = pi @ _inverse_moments(model.T[k], 2)
    return math.sqrt(2.0 * m2 - m1 ** 2)


def pearson(model, k, l):
    """Pearson correlation between margins ``k`` and ``l``."""
    _check_pair(model, k, l)
    pi = model.pi
    vk = _inverse_moments(model.T[k], 1)
    vl = _inverse_moments(model.T[l], 1)
    cov = pi @ (vk * vl) - (pi @ vk) * (pi @ vl)
    return float(cov / (marginal_sd(model, k) * marginal_sd(model, l)))


def _pair_integrals(Ti, ti):
    """``A[i, j] = int_0^inf e_i' exp(T x) e * e_j' exp(T x) t dx``.

    Equals ``(e_i (x) e_j)' [-(T (+) T)]^{-1} (e (x) t)``.
    """
    p = Ti.shape[0]
    rhs = np.kron(np.ones(p), ti)
    return np.linalg.solve(-kron_sum(Ti, Ti), rhs).reshape(p, p)


def kendall(model, k, l):
    """Kendall's tau between margins ``k`` and ``l``."""
    _check_pair(model, k, l)
    Ak = _pair_integrals(model.T[k], model.exits[k])
    Al = _pair_integrals(model.T[l], model.exits[l])
    pi = model.pi
    return float(4.0 * pi @ (Ak * Al) @ pi - 1.0)


def spearman(model, k, l):
    """Spearman's rho between margins ``k`` and ``l``."""
    _check_pair(model, k, l)
    pi = model.pi
    ck = pi @ _pair_integrals(model.T[k], model.exits[k])
    cl = pi @ _pair_integrals(model.T[l], model.exits[l])
    return float(12.0 * pi @ ((1.0 - ck) * (1.0 - cl)) - 3.0)


def dependence_matrices(model):
    """Pearson, Kendall and Spearman matrices (unit diagonal)."""
    d = model.d
    out = {name: np.eye(d) for name in ("pearson", "kendall", "spearman")}
    for k in range(d):
        for l in range(k + 1, d):
            for name, fn in (("pearson", pearson), ("kendall", kendall),
                             ("spearman", spearman)):
                out[name][k, l] = out[name][l, k] = fn(model, k, l)
    return out


# ---------------------------------------------------------------------------
# margins, quantiles, copulas
# ---------------------------------------------------------------------------

def marginal(model, i):
    """Univariate phase-type representation ``(pi, T_i)`` of margin ``i``."""
    if not 0 <= i < model.d:
        raise InvalidArgumentError(f"margin index {i} out of range")
    return model.pi, model.T[i]


def sub_model(model, idx):
    """The mPH law of the sub-vector ``X[idx]``."""
    return MphModel(model.pi, [model.T[i] for i in idx], check=False)


def ph_survival(pi, T, x):
    x = np.asarray(x, dtype=float)
    T = np.asarray(T, dtype=float)
    return (_exp_apply(T, x.reshape(-1), np.ones(T.shape[0])) @ pi).reshape(x.shape)


def ph_cdf(pi, T, x):
    return 1.0 - ph_survival(pi, T, x)


def ph_density(pi, T, x):
    T = np.asarray(T, dtype=float)
    x = np.asarray(x, dtype=float)
    return (_exp_apply(T, x.reshape(-1), -T.sum(axis=1)) @ pi).reshape(x.shape)


def ph_quantile(pi, T, u, tol=1e-10, max_iter=200):
    """Quantiles of a univariate PH law by bracketed bisection.

    The upper bracket is doubled until the survival drops below ``1 - u``;
    bisection stops once the CDF at the midpoint is within ``tol`` of ``u``
    (tolerance on the probability scale).
    """
    u = np.asarray(u, dtype=float)
    flat = u.reshape(-1)
    if np.any((flat <= 0) | (flat >= 1)):
        raise DomainError("quantile levels must lie strictly inside (0, 1)")
    lo = np.zeros_like(flat)
    hi = np.ones_like(flat)
    while True:
        short = ph_survival(pi, T, hi) >= 1.0 - flat
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    mid = 0.5 * (lo + hi)
    done = np.zeros(flat.shape, dtype=bool)
    for _ in range(max_iter):
        F = ph_cdf(pi, T, mid)
        done |= np.abs(F - flat) <= tol
        if done.all():
            break
        below = F < flat
        lo = np.where(~done & below, mid, lo)
        hi = np.where(~done & ~below, mid, hi)
        mid = np.where(done, mid, 0.5 * (lo + hi))
    return mid.reshape(u.shape)


def copula_density_grid(model, k, l, grid, tol=1e-10):
    """Copula density of ``(X_k, X_l)`` at points ``(u, v)`` of the open unit square.

    Each margin is inverted numerically and the joint density is divided by
    the product of marginal densities.
    """
    _check_pair(model, k, l)
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    if np.any((grid <= 0) | (grid >= 1)):
        raise DomainError("copula grid points must lie strictly inside (0, 1)^2")
    pi = model.pi
    # invert each distinct level once
    uu, iu = np.unique(grid[:, 0], return_inverse=True)
    vv, iv = np.unique(grid[:, 1], return_inverse=True)
    x1 = ph_quantile(pi, model.T[k], uu, tol)[iu]
    x2 = ph_quantile(pi, model.T[l], vv, tol)[iv]
    pair = sub_model(model, (k, l))
    joint = density(pair, np.column_stack([x1, x2]))
    return joint / (ph_density(pi, model.T[k], x1) * ph_density(pi, model.T[l], x2))


# ---------------------------------------------------------------------------
# embedding into the reward-based class
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MphStarRepresentation:
    """Reward representation ``(pi_tilde, T_tilde, R_tilde)`` of dimension ``p^2 d``."""

    pi_tilde: np.ndarray
    T_tilde: np.ndarray
    R_tilde: np.ndarray


def to_mphstar(model):
    """Embed an mPH model as a single chain collecting margin-specific rewards.

    For each start state ``k`` there is one block of ``p d`` states: the chain
    runs margin 1, and on absorption restarts margin 2 in state ``k``, and so
    on; reward column ``i`` is collected while running margin ``i``.
    """
    p, d = model.p, model.d
    pd_ = p * d
    R = np.kron(np.eye(d), np.ones((p, 1)))
    pi_t = np.zeros(p * pd_)
    T_t = np.zeros((p * pd_, p * pd_))
    for k in range(p):
        base = k * pd_
        pi_t[base + k] = model.pi[k]
        for i, (Ti, ti) in enumerate(zip(model.T, model.exits)):
            r0 = base + i * p
            T_t[r0:r0 + p, r0:r0 + p] = Ti
            if i + 1 < d:
                T_t[r0:r0 + p, r0 + p + k] = ti
    return MphStarRepresentation(pi_t, T_t, np.tile(R, (p, 1)))
