"""Norms and distances for step functions, kernels and recorded trajectories."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import lp_norm
from .stepfunction import StepFunction, regrid


def _prefix(values):
    """Unscaled prefix sums with a leading zero row, shape (M + 1, S)."""
    P = np.zeros((values.shape[0] + 1, values.shape[1]))
    np.cumsum(values, axis=0, out=P[1:])
    return P


def interval_norm(f):
    """``sup_I |int_I f|`` over subintervals, summed over components.

    For a step function the prefix integral is piecewise linear, so the
    supremum is attained between grid points and equals the range of the
    prefix sums.
    """
    v = f.values if isinstance(f, StepFunction) else np.atleast_2d(np.asarray(f, dtype=float).T).T
    M = v.shape[0]
    P = _prefix(v)
    return float(np.sum((P.max(axis=0) - P.min(axis=0)) / M))


def interval_norm_bruteforce(f):
    """Reference ``O(M^2)`` enumeration of all grid-aligned intervals."""
    v = f.values
    M = v.shape[0]
    P = _prefix(v)
    total = 0.0
    for s in range(v.shape[1]):
        best = 0.0
        for a in range(M + 1):
            for b in range(a + 1, M + 1):
                best = max(best, abs(P[b, s] - P[a, s]) / M)
        total += best
    return total


def _common(f, g):
    if f.n_states != g.n_states:
        raise ValueError("component counts differ")
    L = math.lcm(f.grid_size, g.grid_size)
    return regrid(f.values, L), regrid(g.values, L)


def l1_distance(f, g=None):
    """``sum_s int |f_s - g_s|``, exact on the common refinement."""
    if g is None:
        return float(np.abs(f.values).mean(axis=0).sum())
    a, b = _common(f, g)
    return float(np.abs(a - b).mean(axis=0).sum())


def l2_distance(f, g):
    a, b = _common(f, g)
    return float(np.sqrt(((a - b) ** 2).mean(axis=0).sum()))


def kernel_l1(kernel, M=1000):
    return lp_norm(kernel, 1, M)


def kernel_l2(kernel, M=1000):
    return lp_norm(kernel, 2, M)


def interval_cut_surrogate(kernel, M):
    """``max |int_{S x T} W|`` over grid-aligned intervals ``S``, ``T``.

    A lower bound on the cut norm. For each row interval the column
    integrals form a prefix function whose range is the best column
    interval, so the search costs ``O(M^3)`` instead of ``O(M^4)``.
    """
    M = int(M)
    if M < 1:
        raise ValueError("M must be >= 1")
    C = np.asarray(kernel.cell_matrix(M), dtype=float)
    P = np.zeros((M + 1, M + 1))
    P[1:, 1:] = C.cumsum(axis=0).cumsum(axis=1)
    best = 0.0
    for a in range(M):
        R = P[a + 1 :] - P[a]
        best = max(best, float((R.max(axis=1) - R.min(axis=1)).max()))
    return best / (M * M)


# ---------------------------------------------------------------------------
# trajectories


def _frames(x):
    if hasattr(x, "densities"):
        return x.densities
    return x.values


@dataclass(eq=False)
class TrajectoryComparison:
    times: np.ndarray
    interval_norm_gap: np.ndarray
    l1_gap: np.ndarray

    @property
    def sup_gap(self):
        return float(self.interval_norm_gap.max())

    @property
    def sup_l1_gap(self):
        return float(self.l1_gap.max())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "interval_gap", "l1_gap"])
            for row in zip(self.times, self.interval_norm_gap, self.l1_gap):
                w.writerow([repr(float(x)) for x in row])

    def summary(self, **params):
        return {"sup_gap": self.sup_gap, "sup_l1_gap": self.sup_l1_gap, **params}

    def to_json(self, path, **params):
        Path(path).write_text(json.dumps(self.summary(**params), indent=2, sort_keys=True))


def compare_trajectories(sim, mf):
    """Per-time interval-norm and L1 gaps between two recorded trajectories.

    Accepts :class:`~graphon_mf.dynamics.Trajectory` or
    :class:`~graphon_mf.meanfield.MeanFieldSolution` on either side. The
    first argument's times form the common grid; each is matched to the
    nearest recorded time of the second within half its spacing.
    """
    A, B = _frames(sim), _frames(mf)
    if A.shape[1:] != B.shape[1:]:
        raise ValueError(f"grid/state mismatch: {A.shape[1:]} vs {B.shape[1:]}")
    if tuple(sim.labels) != tuple(mf.labels):
        raise ValueError(f"state labels differ: {sim.labels} vs {mf.labels}")
    ta, tb = np.asarray(sim.times, float), np.asarray(mf.times, float)
    j = np.clip(np.searchsorted(tb, ta), 0, tb.size - 1)
    left = np.clip(j - 1, 0, tb.size - 1)
    j = np.where(np.abs(tb[left] - ta) <= np.abs(tb[j] - ta), left, j)
    spacing = np.diff(ta).min() if ta.size > 1 else np.inf
    if np.any(np.abs(tb[j] - ta) > spacing / 2 + 1e-9):
        raise ValueError("recorded times cannot be matched within half a recording step")
    D = A - B[j]
    M = D.shape[1]
    P = np.zeros((D.shape[0], M + 1, D.shape[2]))
    np.cumsum(D, axis=1, out=P[:, 1:])
    interval = ((P.max(axis=1) - P.min(axis=1)) / M).sum(axis=1)
    l1 = np.abs(D).mean(axis=1).sum(axis=1)
    return TrajectoryComparison(ta.copy(), interval, l1)
