"""Hot loop: expected-entropy objective for every joint action, batched over beliefs.

Each row of ``cond`` holds the marginals of the few cells any candidate action
can visit.  ``visits[a, j]`` is the column observed by the ``j``-th reading of
action ``a`` (readings ordered step-major, robot-minor).  The kernel
enumerates all ``2**V`` binary outcomes exactly and returns, per row and
action, the expected sum over future steps of the change in ``sum_i h(p_i)``
with ``h(p) = p ln p + (1-p) ln(1-p)``.

Set ``MRAC_DISABLE_NUMBA=1`` to force the pure-numpy path.
"""

from __future__ import annotations

import math
import os

import numpy as np

CLAMP = 1e-12
TIE_TOL = 1e-12

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("MRAC_DISABLE_NUMBA", "").strip().lower() not in ("1", "true", "yes")


def _h_scalar(p):
    out = 0.0
    if p > 0.0:
        out += p * math.log(p)
    q = 1.0 - p
    if q > 0.0:
        out += q * math.log(q)
    return out


def _deltas_python(cond, visits, n_robots, p_d, p_f, out):
    n_items, n_cols = cond.shape
    n_actions, n_reads = visits.shape
    n_outcomes = 1 << n_reads
    loc = np.empty(n_cols)
    h0 = np.empty(n_cols)
    for i in range(n_items):
        for c in range(n_cols):
            h0[c] = _h_scalar(cond[i, c])
        for a in range(n_actions):
            total = 0.0
            for mask in range(n_outcomes):
                for c in range(n_cols):
                    loc[c] = cond[i, c]
                prob = 1.0
                acc = 0.0
                for j in range(n_reads):
                    c = visits[a, j]
                    q = loc[c]
                    p1 = p_d * q + p_f * (1.0 - q)
                    if (mask >> j) & 1:
                        f = p1
                        l1 = p_d
                    else:
                        f = 1.0 - p1
                        l1 = 1.0 - p_d
                    prob *= f
                    if prob <= 0.0:
                        break
                    post = l1 * q / f
                    if 0.0 < q < 1.0:
                        if post < CLAMP:
                            post = CLAMP
                        elif post > 1.0 - CLAMP:
                            post = 1.0 - CLAMP
                    loc[c] = post
                    if (j + 1) % n_robots == 0:
                        step = 0.0
                        for cc in range(n_cols):
                            if loc[cc] != cond[i, cc]:
                                step += _h_scalar(loc[cc]) - h0[cc]
                        acc += step
                if prob > 0.0:
                    total += prob * acc
            out[i, a] = total


if _HAVE_NUMBA:
    _h_nb = numba.njit(cache=True)(_h_scalar)

    @numba.njit(cache=True)
    def _deltas_numba(cond, visits, n_robots, p_d, p_f, out):
        n_items, n_cols = cond.shape
        n_actions, n_reads = visits.shape
        n_outcomes = 1 << n_reads
        loc = np.empty(n_cols)
        h0 = np.empty(n_cols)
        for i in range(n_items):
            for c in range(n_cols):
                h0[c] = _h_nb(cond[i, c])
            for a in range(n_actions):
                total = 0.0
                for mask in range(n_outcomes):
                    for c in range(n_cols):
                        loc[c] = cond[i, c]
                    prob = 1.0
                    acc = 0.0
                    for j in range(n_reads):
                        c = visits[a, j]
                        q = loc[c]
                        p1 = p_d * q + p_f * (1.0 - q)
                        if (mask >> j) & 1:
                            f = p1
                            l1 = p_d
                        else:
                            f = 1.0 - p1
                            l1 = 1.0 - p_d
                        prob *= f
                        if prob <= 0.0:
                            break
                        post = l1 * q / f
                        if 0.0 < q < 1.0:
                            if post < CLAMP:
                                post = CLAMP
                            elif post > 1.0 - CLAMP:
                                post = 1.0 - CLAMP
                        loc[c] = post
                        if (j + 1) % n_robots == 0:
                            step = 0.0
                            for cc in range(n_cols):
                                if loc[cc] != cond[i, cc]:
                                    step += _h_nb(loc[cc]) - h0[cc]
                            acc += step
                    if prob > 0.0:
                        total += prob * acc
                out[i, a] = total


def _entropy_terms(p):
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
        b = np.where(q > 0.0, q * np.log(np.where(q > 0.0, q, 1.0)), 0.0)
    return a + b


def _deltas_numpy(cond, visits, n_robots, p_d, p_f, out):
    """Same arithmetic as the compiled loop, vectorised over the item axis."""
    n_items, n_cols = cond.shape
    n_actions, n_reads = visits.shape
    h0 = _entropy_terms(cond)
    for a in range(n_actions):
        total = np.zeros(n_items)
        for mask in range(1 << n_reads):
            loc = cond.copy()
            prob = np.ones(n_items)
            acc = np.zeros(n_items)
            for j in range(n_reads):
                c = visits[a, j]
                q = loc[:, c]
                p1 = p_d * q + p_f * (1.0 - q)
                if (mask >> j) & 1:
                    f, l1 = p1, p_d
                else:
                    f, l1 = 1.0 - p1, 1.0 - p_d
                prob = prob * f
                with np.errstate(divide="ignore", invalid="ignore"):
                    post = l1 * q / f
                    post = np.where((q > 0.0) & (q < 1.0), np.clip(post, CLAMP, 1.0 - CLAMP), post)
                loc[:, c] = np.where(prob > 0.0, post, q)
                if (j + 1) % n_robots == 0:
                    changed = loc != cond
                    acc = acc + np.where(changed, _entropy_terms(loc) - h0, 0.0).sum(axis=1)
            total = total + np.where(prob > 0.0, prob * acc, 0.0)
        out[:, a] = total


def objective_deltas(cond, visits, n_robots: int, p_d: float, p_f: float, backend: str | None = None) -> np.ndarray:
    """``(n_items, n_actions)`` expected reward gains over the current belief."""
    cond = np.ascontiguousarray(np.atleast_2d(cond), dtype=np.float64)
    visits = np.ascontiguousarray(visits, dtype=np.int64)
    out = np.empty((cond.shape[0], visits.shape[0]))
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        _deltas_numba(cond, visits, int(n_robots), float(p_d), float(p_f), out)
    elif backend == "numpy":
        _deltas_numpy(cond, visits, int(n_robots), float(p_d), float(p_f), out)
    elif backend == "python":
        _deltas_python(cond, visits, int(n_robots), float(p_d), float(p_f), out)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out


def argmax_lowest(values: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Row-wise argmax; entries within ``tol`` of the row max go to the lowest index."""
    values = np.atleast_2d(values)
    best = values.max(axis=1, keepdims=True)
    return np.argmax(values >= best - tol, axis=1)
