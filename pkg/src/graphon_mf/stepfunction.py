"""Vector-valued step functions on a uniform grid of [0, 1]."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def cell_index(x, M, side="right"):
    """Index of the grid cell holding ``x``.

    Cells are half-open, ``[(k-1)/M, k/M)``, with the last one closed at 1.
    ``side="left"`` returns the cell approached from the left instead, so a
    grid point ``k/M`` maps to cell ``k-1`` (0-based) rather than ``k``.
    """
    x = np.asarray(x, dtype=float)
    if side == "right":
        idx = np.floor(x * M)
    elif side == "left":
        idx = np.ceil(x * M) - 1
    else:
        raise ValueError(f"unknown side {side!r}")
    return np.clip(idx, 0, M - 1).astype(np.intp)


def midpoints(M):
    return (np.arange(M) + 0.5) / M


def right_endpoints(M):
    return np.arange(1, M + 1) / M


def refine_values(values, factor):
    """Repeat each cell ``factor`` times (exact refinement of a step function)."""
    if factor == 1:
        return values
    return np.repeat(values, factor, axis=0)


def coarsen_values(values, factor):
    """Average consecutive blocks of ``factor`` cells."""
    if factor == 1:
        return values
    M = values.shape[0]
    if M % factor:
        raise ValueError(f"cannot coarsen {M} cells by {factor}")
    return values.reshape(M // factor, factor, *values.shape[1:]).mean(axis=1)


def regrid(values, M_new):
    """Cell averages of a step function after moving it onto an ``M_new`` grid.

    Exact: both grids are refined to their least common multiple first.
    """
    M = values.shape[0]
    if M == M_new:
        return values
    L = math.lcm(M, M_new)
    return coarsen_values(refine_values(values, L // M), L // M_new)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Piecewise-constant function on ``M`` equal cells of [0, 1].

    ``values`` has shape ``(M, n_states)``; scalar functions use one column.
    """

    values: np.ndarray
    labels: tuple = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError(f"values must be (M, n_states), got shape {v.shape}")
        labels = self.labels
        if labels is None:
            labels = tuple(str(s) for s in range(v.shape[1])) if v.shape[1] > 1 else ("f",)
        labels = tuple(labels)
        if len(labels) != v.shape[1]:
            raise ValueError(f"{len(labels)} labels for {v.shape[1]} components")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def constant(cls, value, M=1, labels=None):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.tile(value, (M, 1)), labels)

    @classmethod
    def from_function(cls, func, M, labels=None, nodes=8):
        """Cell averages of ``func`` by Gauss-Legendre quadrature in each cell.

        ``func`` maps an array of points to an array of values (shape ``(n,)``
        or ``(n, n_states)``).
        """
        g, w = np.polynomial.legendre.leggauss(nodes)
        left = np.arange(M) / M
        pts = left[:, None] + (g[None, :] + 1) / (2 * M)
        vals = np.asarray(func(pts.ravel()), dtype=float)
        vals = vals.reshape(M, nodes, -1)
        avg = np.einsum("kqs,q->ks", vals, w) / 2
        return cls(avg, labels)

    @classmethod
    def sample(cls, func, M, labels=None, points="midpoint"):
        """Point samples of ``func`` at cell midpoints or right endpoints."""
        xs = midpoints(M) if points == "midpoint" else right_endpoints(M)
        return cls(np.asarray(func(xs), dtype=float), labels)

    @property
    def grid_size(self):
        return self.values.shape[0]

    @property
    def n_states(self):
        return self.values.shape[1]

    def __len__(self):
        return self.grid_size

    def integral(self):
        """Per-component integral over [0, 1]."""
        return self.values.mean(axis=0)

    def evaluate(self, x, side="right"):
        return self.values[cell_index(x, self.grid_size, side)]

    def __call__(self, x):
        out = self.evaluate(x)
        return out[..., 0] if self.n_states == 1 else out

    def component(self, label):
        j = self.labels.index(label) if not isinstance(label, int) else label
        return StepFunction(self.values[:, j], (self.labels[j],))

    def on_grid(self, M):
        """Exact cell averages on an ``M`` grid (refining or averaging)."""
        return StepFunction(regrid(self.values, M), self.labels)

    def refine(self, factor):
        return StepFunction(refine_values(self.values, factor), self.labels)

    def _aligned(self, other):
        if not isinstance(other, StepFunction):
            return self.values, np.asarray(other, dtype=float)
        L = math.lcm(self.grid_size, other.grid_size)
        return regrid(self.values, L), regrid(other.values, L)

    def __add__(self, other):
        a, b = self._aligned(other)
        return StepFunction(a + b, self.labels)

    def __sub__(self, other):
        a, b = self._aligned(other)
        return StepFunction(a - b, self.labels)

    def __mul__(self, c):
        return StepFunction(self.values * float(c), self.labels)

    __rmul__ = __mul__

    def __neg__(self):
        return StepFunction(-self.values, self.labels)

    def __repr__(self):
        return f"StepFunction(M={self.grid_size}, labels={self.labels})"
