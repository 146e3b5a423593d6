"""Favored actions and likelihoods over a missing-observation space.

The argmax only looks at the marginals of cells some candidate action can
visit ("relevant" cells), and readings of distinct cells are independent given
the common belief.  Two consequences make large spaces cheap:

* the favored action of a realization depends only on how many ``z=1``
  readings land on each relevant cell, so realizations collapse into classes
  indexed by those counts;
* readings on irrelevant cells marginalise out of every class mass exactly.

A :class:`SpacePartition` offers both views.  Class-level sums give the exact
cumulative likelihoods; the realization-level view evaluates canonical-order
chunks lazily, which is what the bound-based verifier walks through.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .belief_core import Evidence, as_evidence
from .errors import EnumerationLimitError
from .planning import ObsSeqSpace, Problem

DEFAULT_CLASS_CAP = 1 << 20


def _factor(q, k, n, p_d, p_f):
    """Probability of one specific reading sequence with ``k`` ones out of ``n`` on a cell."""
    return q * p_d**k * (1.0 - p_d) ** (n - k) + (1.0 - q) * p_f**k * (1.0 - p_f) ** (n - k)


class SpacePartition:
    """Lazily evaluated partition of ``space`` by favored action, under ``common``."""

    def __init__(self, common, space: ObsSeqSpace, problem: Problem, class_cap: int = DEFAULT_CLASS_CAP):
        self.common: Evidence = as_evidence(common)
        self.space = space
        self.problem = problem
        m = problem.model
        self._pd, self._pf = m.p_detect, m.p_false_alarm

        cells = space.cells()
        touched = np.unique(cells)
        self._touched = touched
        self._slot_touched = np.searchsorted(touched, cells)
        self._n_per_touched = np.bincount(self._slot_touched, minlength=touched.size) if cells.size else np.zeros(0, int)
        self._q_touched = self.common.probs(m, touched)

        rel_col = {int(c): i for i, c in enumerate(problem.relevant_cells)}
        self._rel_touched = np.array([i for i, c in enumerate(touched) if int(c) in rel_col], dtype=np.int64)
        self._rel_cols = np.array([rel_col[int(touched[i])] for i in self._rel_touched], dtype=np.int64)
        self.class_shape = tuple(int(self._n_per_touched[i]) + 1 for i in self._rel_touched)
        self.n_classes = int(np.prod(self.class_shape, dtype=np.int64)) if self.class_shape else 1
        if self.n_classes > class_cap:
            raise EnumerationLimitError(len(space), class_cap)
        self._base_probs = problem.relevant_probs(self.common)
        self._class_fav = np.full(self.n_classes, -1, dtype=np.int64)

    @property
    def size(self) -> int:
        return self.space.size

    # -- class view -------------------------------------------------------

    def _class_counts(self, ids: np.ndarray) -> np.ndarray:
        if not self.class_shape:
            return np.zeros((ids.size, 0), dtype=np.int64)
        return np.stack(np.unravel_index(ids, self.class_shape), axis=1).astype(np.int64)

    def class_favored(self, ids) -> np.ndarray:
        """Favored action positions for class ids, evaluating uncached classes in one batch."""
        ids = np.asarray(ids, dtype=np.int64)
        todo = np.unique(ids[self._class_fav[ids] < 0])
        if todo.size:
            k = self._class_counts(todo)
            ones = np.zeros((todo.size, self._base_probs.size), dtype=np.int64)
            zeros = np.zeros_like(ones)
            n = self._n_per_touched[self._rel_touched]
            ones[:, self._rel_cols] = k
            zeros[:, self._rel_cols] = n - k
            cond = self.problem.relevant_probs(self.common, ones, zeros)
            self._class_fav[todo] = self.problem.favored_positions(cond)
        return self._class_fav[ids]

    def classes(self) -> tuple[np.ndarray, np.ndarray]:
        """``(favored_position, probability_mass)`` of every class in canonical order."""
        ids = np.arange(self.n_classes, dtype=np.int64)
        fav = self.class_favored(ids)
        k = self._class_counts(ids)
        mass = np.ones(self.n_classes)
        for j, t in enumerate(self._rel_touched):
            n = int(self._n_per_touched[t])
            kk = k[:, j]
            mult = np.array([comb(n, int(v)) for v in range(n + 1)], dtype=np.float64)[kk]
            mass *= mult * _factor(self._q_touched[t], kk, n, self._pd, self._pf)
        return fav, mass

    def class_multiplicity(self) -> np.ndarray:
        """Number of realizations in each class (irrelevant slots included)."""
        ids = np.arange(self.n_classes, dtype=np.int64)
        k = self._class_counts(ids)
        out = np.full(self.n_classes, float(2 ** (len(self.space) - int(self._n_per_touched[self._rel_touched].sum()))))
        for j, t in enumerate(self._rel_touched):
            n = int(self._n_per_touched[t])
            out *= np.array([comb(n, int(v)) for v in range(n + 1)], dtype=np.float64)[k[:, j]]
        return out

    def cumulative(self) -> np.ndarray:
        """Exact cumulative likelihood per action position."""
        fav, mass = self.classes()
        return np.bincount(fav, weights=mass, minlength=len(self.problem.actions))

    def owner(self) -> int | None:
        """Position of the action every realization favors, if there is one."""
        fav = self.class_favored(np.arange(self.n_classes, dtype=np.int64))
        return int(fav[0]) if np.all(fav == fav[0]) else None

    # -- realization view -------------------------------------------------

    def realizations(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """``(favored_position, likelihood)`` for canonical realizations ``start..stop-1``."""
        p = len(self.space)
        if p > 62:
            raise EnumerationLimitError(p, 62)
        idx = np.arange(start, stop, dtype=np.int64)[:, None]
        bits = (idx >> np.arange(p - 1, -1, -1, dtype=np.int64)) & 1
        return self._evaluate_bits(bits)

    def evaluate(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Same as :meth:`realizations` for explicit realizations (rows of 0/1)."""
        arr = np.asarray(z, dtype=np.int64)
        rows = arr.shape[0] if arr.ndim else 1
        bits = arr.reshape(rows, len(self.space))
        return self._evaluate_bits(bits)

    def _evaluate_bits(self, bits: np.ndarray):
        n_t = self._touched.size
        ones = np.zeros((bits.shape[0], n_t), dtype=np.int64)
        for j, t in enumerate(self._slot_touched):
            ones[:, t] += bits[:, j]
        n = self._n_per_touched
        like = np.prod(_factor(self._q_touched, ones, n, self._pd, self._pf), axis=1)
        if self.class_shape:
            ids = np.ravel_multi_index(tuple(ones[:, self._rel_touched].T), self.class_shape)
        else:
            ids = np.zeros(bits.shape[0], dtype=np.int64)
        return self.class_favored(ids), like
