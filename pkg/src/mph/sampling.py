"""Exact simulation of mPH vectors.

One start state is drawn per row; each margin then runs its own jump chain
(exponential holding times, one uniform per jump compared against the
cumulative jump/exit probabilities in fixed state order) until absorption.
Rows are simulated in fixed-size blocks, each with its own random stream
spawned from the seed, so the output does not depend on how many threads
process the blocks.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import os

import numpy as np

from .errors import InvalidArgumentError

BLOCK_ROWS = 8192


@dataclass
class PathStats:
    """Latent path statistics accumulated over all simulated rows.

    B : (p,) number of chains started in each state (``d`` per row)
    Z : (d, p) total occupation time per margin and state
    N_trans : (d, p, p) jump counts ``k -> s`` per margin
    N_exit : (d, p) absorption counts from each state per margin
    """

    B: np.ndarray
    Z: np.ndarray
    N_trans: np.ndarray
    N_exit: np.ndarray

    def __add__(self, other):
        return PathStats(self.B + other.B, self.Z + other.Z,
                         self.N_trans + other.N_trans, self.N_exit + other.N_exit)


def _threads():
    try:
        return max(1, int(os.environ.get("MPH_THREADS", "1")))
    except ValueError:
        return 1


def _jump_tables(model):
    """Cumulative jump probabilities, columns ``0..p-1`` states, ``p`` exit."""
    tables = []
    for Ti, ti in zip(model.T, model.exits):
        rates = -np.diag(Ti)
        P = np.column_stack([Ti - np.diag(np.diag(Ti)), np.maximum(ti, 0.0)])
        cum = np.cumsum(P / rates[:, None], axis=1)
        cum[:, -1] = np.inf
        tables.append((rates, cum))
    return tables


def _simulate_block(model, tables, m, rng, with_paths):
    p, d = model.p, model.d
    cum_pi = np.cumsum(model.pi)
    start = np.minimum(np.searchsorted(cum_pi, rng.random(m), side="right"), p - 1)
    X = np.zeros((m, d))
    stats = None
    if with_paths:
        stats = PathStats(d * np.bincount(start, minlength=p).astype(float),
                          np.zeros((d, p)), np.zeros((d, p, p)), np.zeros((d, p)))
    for i, (rates, cum) in enumerate(tables):
        rows = np.arange(m)
        state = start.copy()
        elapsed = np.zeros(m)
        while rows.size:
            hold = rng.standard_exponential(rows.size) / rates[state]
            elapsed[rows] += hold
            nxt = np.argmax(rng.random(rows.size)[:, None] < cum[state], axis=1)
            if with_paths:
                stats.Z[i] += np.bincount(state, weights=hold, minlength=p)
                absorbed = nxt == p
                stats.N_exit[i] += np.bincount(state[absorbed], minlength=p)
                np.add.at(stats.N_trans[i], (state[~absorbed], nxt[~absorbed]), 1.0)
            alive = nxt < p
            X[rows[~alive], i] = elapsed[rows[~alive]]
            rows = rows[alive]
            state = nxt[alive]
    return X, stats


def _simulate(model, n, seed, with_paths):
    if int(n) != n or n < 1:
        raise InvalidArgumentError("n must be a positive integer")
    n = int(n)
    tables = _jump_tables(model)
    sizes = [min(BLOCK_ROWS, n - b) for b in range(0, n, BLOCK_ROWS)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(b):
        return _simulate_block(model, tables, sizes[b], np.random.default_rng(streams[b]),
                               with_paths)

    workers = min(_threads(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    X = np.concatenate([part[0] for part in parts])
    if not with_paths:
        return X
    stats = parts[0][1]
    for part in parts[1:]:
        stats = stats + part[1]
    return X, stats


def sample(model, n, seed=0):
    """Draw ``n`` i.i.d. rows from ``model``; returns an ``(n, d)`` array."""
    return _simulate(model, n, seed, with_paths=False)


def sample_with_paths(model, n, seed=0):
    """As :func:`sample`, also returning the latent :class:`PathStats`.

    Uses the same random streams, so the sample equals ``sample(model, n, seed)``.
    """
    return _simulate(model, n, seed, with_paths=True)
