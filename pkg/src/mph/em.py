"""Maximum-likelihood estimation of mPH models by the EM algorithm.

The E-step needs, per observation ``x`` and margin ``i``, the matrices
``exp(T_i x_i)`` and ``int_0^{x_i} exp(T_i (x_i - u)) t_i w exp(T_i u) du``
where ``w_j = pi_j prod_{l != i} e_j' exp(T_l x_l) t_l``. The integral is
linear in ``w``, so one Van Loan block exponential per (observation,
margin) gives every ``b_{ski}`` at once. All exponentials of a sweep are
evaluated in batches.

Far-out observations would underflow ``exp(T_i x_i)`` itself, so every
margin is exponentiated with its dominant decay rate shifted out, and
products over margins are carried with a per-margin scale in log form.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os

import numpy as np

from .core import MphModel
from .errors import InvalidArgumentError, NumericalError
from .linalg import expm, vanloan_integral

CHUNK_ROWS = 4096
STARVATION = 1e-12


@dataclass
class ExpectedStats:
    """Conditional expectations of the complete-data sufficient statistics."""

    B: np.ndarray        # (p,)
    Z: np.ndarray        # (d, p)
    N_trans: np.ndarray  # (d, p, p), zero diagonal
    N_exit: np.ndarray   # (d, p)

    def __add__(self, other):
        return ExpectedStats(self.B + other.B, self.Z + other.Z,
                             self.N_trans + other.N_trans, self.N_exit + other.N_exit)


@dataclass
class FitConfig:
    p: int
    max_iters: int = 2000
    tol: float = 1e-7
    restarts: int = 1
    seed: int = 0
    structure_mask: object = None
    """Optional ``(d, p, p)`` (or ``(p, p)`` shared) boolean array of allowed jumps."""

    def __post_init__(self):
        if self.p < 1:
            raise InvalidArgumentError("p must be >= 1")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if self.restarts < 1:
            raise InvalidArgumentError("restarts must be >= 1")


@dataclass
class FitResult:
    model: MphModel
    loglik_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    restart_index: int = 0

    @property
    def loglik(self):
        return self.loglik_trace[-1]


def _check_data(data, d=None):
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidArgumentError("data must be a nonempty (n, d) array")
    if d is not None and X.shape[1] != d:
        raise InvalidArgumentError(f"data has {X.shape[1]} columns, model has {d}")
    if not np.all(np.isfinite(X)) or np.any(X <= 0):
        bad = np.argwhere(~(np.isfinite(X) & (X > 0)))[0]
        raise InvalidArgumentError(
            f"data must be finite and strictly positive (row {bad[0]}, column {bad[1]})")
    return X


def _decay_rates(model):
    """``chi_i`` with ``-chi_i`` the dominant eigenvalue of ``T_i``."""
    return [max(0.0, -float(np.max(np.linalg.eigvals(Ti).real))) for Ti in model.T]


def _scaled_exit_products(model, X, offset=0):
    """Per margin: shifted ``exp((T_i + chi_i) x_i)``, scaled exit vectors and log scales.

    ``exp(T_i x_i) t_i = exp(-chi_i x_i) c_i v_i`` with ``max(v_i) = 1``;
    the returned log scale is ``log c_i - chi_i x_i`` and the returned
    exponentials carry the factor ``exp(chi_i x_i)``.
    """
    exps, vecs, cs, logs = [], [], [], []
    for i, (Ti, ti, chi) in enumerate(zip(model.T, model.exits, _decay_rates(model))):
        E = expm((Ti + chi * np.eye(model.p))[None] * X[:, i, None, None])
        a = E @ ti
        c = a.max(axis=1)
        if np.any(c <= 0):
            row = int(np.argmax(c <= 0)) + offset
            raise NumericalError(
                f"density underflow at observation {row} (margin {i})", row=row)
        exps.append(E)
        vecs.append(a / c[:, None])
        cs.append(c)
        logs.append(np.log(c) - chi * X[:, i])
    return exps, vecs, cs, logs


def _e_step_chunk(model, X, offset):
    p, d = model.p, model.d
    pi = model.pi
    exps, vecs, scales, logs = _scaled_exit_products(model, X, offset)
    prod = np.prod(vecs, axis=0)                    # a_k / prod_i scale_i
    a = prod @ pi
    if np.any(a <= 0):
        row = int(np.argmax(a <= 0)) + offset
        raise NumericalError(f"density underflow at observation {row}", row=row)
    loglik = float(np.sum(np.log(a) + np.sum(logs, axis=0)))
    chis = _decay_rates(model)

    B = d * pi * (prod / a[:, None]).sum(axis=0)
    Z = np.empty((d, p))
    N_trans = np.empty((d, p, p))
    N_exit = np.empty((d, p))
    for i, (Ti, ti) in enumerate(zip(model.T, model.exits)):
        others = np.ones_like(prod)
        for l in range(d):
            if l != i:
                others = others * vecs[l]
        w = pi * others                              # pi_j a_{j,-i} / prod_{l!=i} c_l
        # shifted exponentials and integrals both carry exp(chi_i x_i), which
        # cancels against the unshifted scale of margin i
        weight = 1.0 / (a * scales[i])
        F = vanloan_integral(Ti + chis[i] * np.eye(p), ti, w, X[:, i]).integral_block
        Bsum = np.einsum("n,nsk->sk", weight, F)     # sum_m b_{ski} / a
        Z[i] = np.diag(Bsum)
        N_trans[i] = (Ti - np.diag(np.diag(Ti))) * Bsum.T
        a_tilde = np.einsum("nj,njk->nk", w, exps[i])
        N_exit[i] = ti * (weight @ a_tilde)
    return ExpectedStats(B, Z, N_trans, N_exit), loglik


def _threads():
    try:
        return max(1, int(os.environ.get("MPH_THREADS", "1")))
    except ValueError:
        return 1


def _e_step(model, X):
    chunks = [(X[s:s + CHUNK_ROWS], s) for s in range(0, X.shape[0], CHUNK_ROWS)]
    workers = min(_threads(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _e_step_chunk(model, *c), chunks))
    else:
        parts = [_e_step_chunk(model, *c) for c in chunks]
    stats = parts[0][0]
    for part in parts[1:]:
        stats = stats + part[0]
    return stats, math.fsum(part[1] for part in parts)


def e_step(model, data):
    """Conditional expectations of ``B``, ``Z``, ``N_trans`` and ``N_exit`` given ``data``."""
    X = _check_data(data, model.d)
    return _e_step(model, X)[0]


def log_likelihood(model, data):
    """Observed-data log-likelihood ``sum_m log f(x_m)``; ``-inf`` on zero density."""
    X = _check_data(data, model.d)
    total = 0.0
    for s in range(0, X.shape[0], CHUNK_ROWS):
        try:
            _, vecs, _, logs = _scaled_exit_products(model, X[s:s + CHUNK_ROWS])
        except NumericalError:
            return -math.inf
        dens = np.prod(vecs, axis=0) @ model.pi
        if np.any(dens <= 0):
            return -math.inf
        total += float(np.sum(np.log(dens) + np.sum(logs, axis=0)))
    return total


def _normalize_mask(mask, p, d):
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    if mask.shape == (p, p):
        mask = np.broadcast_to(mask, (d, p, p))
    if mask.shape != (d, p, p):
        raise InvalidArgumentError(f"structure_mask must have shape ({d}, {p}, {p})")
    return mask


def m_step(stats, n, d, mask=None, previous=None):
    """Closed-form maximiser of the expected complete-data likelihood.

    Rows of a margin whose expected occupation time is below ``1e-12`` are
    copied from ``previous`` (which must then be given) instead of being
    re-estimated from a vanishing denominator.
    """
    p = stats.B.shape[0]
    pi = stats.B / (d * n)
    pi = pi / pi.sum()
    mask = _normalize_mask(mask, p, d)
    mats = []
    for i in range(d):
        Z = stats.Z[i]
        T = np.zeros((p, p))
        starving = Z < STARVATION
        if starving.any() and previous is None:
            raise NumericalError(f"state(s) {np.nonzero(starving)[0].tolist()} of "
                                 f"margin {i} have no expected occupation time")
        safe = np.where(starving, 1.0, Z)
        off = stats.N_trans[i] / safe[:, None]
        np.fill_diagonal(off, 0.0)
        if mask is not None:
            off = np.where(mask[i], off, 0.0)
            np.fill_diagonal(off, 0.0)
        exit_rates = stats.N_exit[i] / safe
        T = off - np.diag(off.sum(axis=1) + exit_rates)
        if starving.any():
            T[starving] = previous.T[i][starving]
        mats.append(T)
    return MphModel(pi, mats)


def initialize(p, d, seed, data, mask=None):
    """Random starting model whose marginal means match the sample means."""
    X = _check_data(data, d)
    rng = np.random.default_rng(seed)
    pi = rng.dirichlet(np.ones(p))
    mask = _normalize_mask(mask, p, d)
    mats = []
    for i in range(d):
        off = rng.uniform(size=(p, p))
        np.fill_diagonal(off, 0.0)
        if mask is not None:
            off = np.where(mask[i], off, 0.0)
            np.fill_diagonal(off, 0.0)
        exit_rates = rng.uniform(size=p)
        T = off - np.diag(off.sum(axis=1) + exit_rates)
        mean = pi @ np.linalg.solve(-T, np.ones(p))
        mats.append(T * (mean / X[:, i].mean()))
    return MphModel(pi, mats)


def _run(X, config, restart, seed):
    n, d = X.shape
    model = initialize(config.p, d, seed, X, config.structure_mask)
    trace = []
    converged = False
    iterations = 0
    while True:
        stats, ll = _e_step(model, X)
        trace.append(ll)
        if len(trace) >= 2 and trace[-1] - trace[-2] < config.tol:
            converged = True
            break
        if iterations >= config.max_iters:
            break
        model = m_step(stats, n, d, config.structure_mask, previous=model)
        iterations += 1
    return FitResult(model, trace, iterations, converged, restart)


def fit(data, config):
    """Fit an mPH model of order ``config.p`` by EM, best of ``config.restarts`` runs.

    Each run iterates until the log-likelihood gains less than ``config.tol``
    or ``config.max_iters`` sweeps were done. The winner is the run with the
    highest final log-likelihood (earliest run on ties).
    """
    X = _check_data(data)
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    workers = min(_threads(), config.restarts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda r: _run(X, config, r, seeds[r]),
                                    range(config.restarts)))
    else:
        results = [_run(X, config, r, seeds[r]) for r in range(config.restarts)]
    best = results[0]
    for res in results[1:]:
        if res.loglik > best.loglik:
            best = res
    return best


def degrees_of_freedom(p, d):
    """Free parameters: ``p - 1`` initial probabilities plus ``d p^2`` rates."""
    return (p - 1) + d * p * p


def fit_report(result, n):
    """Summary dictionary with log-likelihood, AIC and BIC."""
    model = result.model
    df = degrees_of_freedom(model.p, model.d)
    ll = result.loglik
    return {
        "loglik": ll,
        "df": df,
        "aic": 2 * df - 2 * ll,
        "bic": df * math.log(n) - 2 * ll,
        "iterations": result.iterations,
        "converged": result.converged,
        "restart_index": result.restart_index,
        "trace": list(result.loglik_trace),
    }
