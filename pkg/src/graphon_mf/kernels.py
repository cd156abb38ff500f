"""Graphon kernels and their integral operators.

A kernel is a symmetric function ``W`` on ``[0, 1]^2``. Four representations
are supported:

* :class:`GridEvaluable` -- any vectorised point evaluator ``W(x, y)``;
* :class:`Blockwise` -- constant on the cells of an ``M x M`` grid (dense or
  scipy-sparse cell matrix, e.g. an empirical graphon);
* :class:`Separable` -- ``phi(x) phi(y)`` with ``phi`` a callable or a
  :class:`~graphon_mf.stepfunction.StepFunction`;
* :class:`FiniteRank` -- ``sum_k lam_k f_k(x) f_k(y)`` with step-function
  eigenfunctions.

Kernels are immutable. ``in_w0`` marks kernels whose values must lie in
``[0, 1]``; this is checked when the kernel is built.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .stepfunction import (
    StepFunction,
    cell_index,
    midpoints,
    refine_values,
    regrid,
    right_endpoints,
)

SYMMETRY_TOL = 1e-12
_PROBE = np.concatenate([np.linspace(0.0, 1.0, 33), [0.1234567, 0.5 ** 0.5, math.pi / 4]])


class KernelError(ValueError):
    pass


def _check_unit(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise KernelError(f"{name} must lie in [0, 1]")
    return x


class GraphonKernel:
    """Base class. Subclasses implement ``__call__`` and the grid helpers."""

    in_w0 = True
    lipschitz = None
    name = "kernel"

    def __call__(self, x, y):
        raise NotImplementedError

    def _validate(self):
        xx, yy = np.meshgrid(_PROBE, _PROBE, indexing="ij")
        vals = np.asarray(self(xx, yy), dtype=float)
        asym = np.max(np.abs(vals - vals.T))
        if asym > SYMMETRY_TOL:
            raise KernelError(f"{self.name}: kernel is not symmetric (max asymmetry {asym:.3g})")
        if self.in_w0 and (vals.min() < -SYMMETRY_TOL or vals.max() > 1 + SYMMETRY_TOL):
            raise KernelError(
                f"{self.name}: values in [{vals.min():.4g}, {vals.max():.4g}] leave [0, 1]"
            )

    def point_matrix(self, xs, ys=None):
        ys = xs if ys is None else ys
        return np.asarray(self(xs[:, None], ys[None, :]), dtype=float)

    def grid_values(self, M):
        """``W(k/M, l/M)`` for k, l = 1..M."""
        return self.point_matrix(right_endpoints(M))

    def cell_matrix(self, M):
        """Cell averages of ``W`` on the ``M`` grid (midpoint rule by default)."""
        return self.point_matrix(midpoints(M))

    def upper_bound(self):
        """A bound ``max W`` used by the sparse sampler."""
        return 1.0 if self.in_w0 else float(np.abs(self.point_matrix(_PROBE)).max())

    def _apply(self, f, Mq):
        L = math.lcm(Mq, f.shape[0])
        fL = regrid(f, L)
        g = self.cell_matrix(L) @ fL / L
        return regrid(g, Mq)


class GridEvaluable(GraphonKernel):
    """Kernel given by a vectorised evaluator ``func(x, y)``."""

    def __init__(self, func, in_w0=True, lipschitz=None, name="evaluator"):
        self.func = func
        self.in_w0 = bool(in_w0)
        self.lipschitz = lipschitz
        self.name = name
        self._validate()

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.asarray(self.func(x, y), dtype=float) * np.ones_like(x)

    def __repr__(self):
        return f"GridEvaluable({self.name})"


class Blockwise(GraphonKernel):
    """Kernel constant on the cells of an ``M x M`` grid.

    ``values`` may be a dense array or a scipy sparse matrix; sparse input is
    kept sparse (empirical graphons of large graphs).
    """

    def __init__(self, values, in_w0=None, name="blockwise"):
        if sp.issparse(values):
            v = sp.csr_matrix(values, dtype=float)
            if v.shape[0] != v.shape[1]:
                raise KernelError(f"cell matrix must be square, got {v.shape}")
            if (v != v.T).nnz:
                raise KernelError(f"{name}: cell matrix is not symmetric")
            implicit_zero = v.nnz < v.shape[0] ** 2
            vmin = float(min(v.data.min(initial=np.inf), 0.0 if implicit_zero else np.inf))
            vmax = float(max(v.data.max(initial=-np.inf), 0.0 if implicit_zero else -np.inf))
        else:
            v = np.array(values, dtype=float, ndmin=2)
            if v.shape[0] != v.shape[1]:
                raise KernelError(f"cell matrix must be square, got {v.shape}")
            if not np.array_equal(v, v.T):
                if np.max(np.abs(v - v.T)) > SYMMETRY_TOL:
                    raise KernelError(f"{name}: cell matrix is not symmetric")
                v = (v + v.T) / 2
            v.setflags(write=False)
            vmin, vmax = float(v.min()), float(v.max())
        self.values = v
        self.name = name
        if in_w0 is None:
            in_w0 = vmin >= 0.0 and vmax <= 1.0
        self.in_w0 = bool(in_w0)
        if self.in_w0 and (vmin < 0.0 or vmax > 1.0):
            raise KernelError(f"{name}: values in [{vmin:.4g}, {vmax:.4g}] leave [0, 1]")
        self._max = max(abs(vmin), abs(vmax))
        self.lipschitz = 0.0 if (self.M == 1 or vmin == vmax and not sp.issparse(v)) else None

    @property
    def M(self):
        return self.values.shape[0]

    @property
    def is_sparse(self):
        return sp.issparse(self.values)

    def dense(self):
        return self.values.toarray() if self.is_sparse else np.asarray(self.values)

    def _lookup(self, ix, iy):
        if self.is_sparse:
            ix, iy = np.broadcast_arrays(ix, iy)
            return np.asarray(self.values[ix.ravel(), iy.ravel()]).reshape(ix.shape)
        return self.values[ix, iy]

    def __call__(self, x, y, side="right"):
        return self._lookup(cell_index(x, self.M, side), cell_index(y, self.M, side))

    def grid_values(self, M):
        # the cell approached from the left, so a kernel discretized on its
        # own grid (or a multiple) is reproduced exactly
        if M % self.M == 0:
            return refine_values(refine_values(self.dense(), M // self.M).T, M // self.M).T
        idx = cell_index(right_endpoints(M), self.M, side="left")
        return self._lookup(idx[:, None], idx[None, :])

    def cell_matrix(self, M):
        if M == self.M:
            return self.dense()
        return regrid(regrid(self.dense(), M).T, M).T

    def upper_bound(self):
        return self._max

    def _apply(self, f, Mq):
        c = regrid(f, self.M) / self.M  # integrals of f over the kernel cells
        g = self.values @ c
        return regrid(np.asarray(g), Mq)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Blockwise(M={self.M}, {kind})"


class Separable(GraphonKernel):
    """``W(x, y) = phi(x) phi(y)``."""

    def __init__(self, phi, in_w0=True, lipschitz=None, name="separable"):
        if isinstance(phi, StepFunction) and phi.n_states != 1:
            raise KernelError("phi must be scalar")
        self.phi = phi
        self.in_w0 = bool(in_w0)
        self.lipschitz = lipschitz
        self.name = name
        self._validate()

    def phi_at(self, x, side="right"):
        if isinstance(self.phi, StepFunction):
            return self.phi.evaluate(x, side)[..., 0]
        return np.asarray(self.phi(np.asarray(x, float)), dtype=float) * np.ones_like(x, dtype=float)

    def __call__(self, x, y):
        return self.phi_at(x) * self.phi_at(y)

    def grid_values(self, M):
        p = self.phi_at(right_endpoints(M), side="left")
        return np.outer(p, p)

    def cell_matrix(self, M):
        if isinstance(self.phi, StepFunction):
            p = self.phi.on_grid(M).values[:, 0]
        else:
            p = self.phi_at(midpoints(M))
        return np.outer(p, p)

    def upper_bound(self):
        if isinstance(self.phi, StepFunction):
            return float(np.max(self.phi.values ** 2))
        return super().upper_bound()

    def _apply(self, f, Mq):
        if isinstance(self.phi, StepFunction):
            L = math.lcm(f.shape[0], self.phi.grid_size)
            p = regrid(self.phi.values, L)
            inner = (p * regrid(f, L)).mean(axis=0)
            return regrid(self.phi.values, Mq) * inner[None, :]
        L = math.lcm(Mq, f.shape[0])
        p = self.phi_at(midpoints(L))
        inner = (p[:, None] * regrid(f, L)).mean(axis=0)
        return regrid(p[:, None] * inner[None, :], Mq)

    def __repr__(self):
        return f"Separable({self.name})"


class FiniteRank(GraphonKernel):
    """``W(x, y) = sum_k lam_k f_k(x) f_k(y)`` with step-function ``f_k``."""

    def __init__(self, eigenvalues, eigenfunctions, in_w0=False, name="finite_rank"):
        lam = np.asarray(eigenvalues, dtype=float).ravel()
        fs = [f if isinstance(f, StepFunction) else StepFunction(np.asarray(f, float)) for f in eigenfunctions]
        if len(fs) != lam.size:
            raise KernelError(f"{lam.size} eigenvalues but {len(fs)} eigenfunctions")
        if any(f.n_states != 1 for f in fs):
            raise KernelError("eigenfunctions must be scalar")
        L = math.lcm(*[f.grid_size for f in fs]) if fs else 1
        F = np.column_stack([regrid(f.values, L)[:, 0] for f in fs]) if fs else np.zeros((1, 0))
        F.setflags(write=False)
        lam.setflags(write=False)
        self.eigenvalues = lam
        self.eigenfunctions = tuple(fs)
        self._F = F  # (L, K) eigenfunction values on the common grid
        self.in_w0 = bool(in_w0)
        self.name = name
        self._validate()

    @property
    def M(self):
        return self._F.shape[0]

    def _rows(self, x, side="right"):
        return self._F[cell_index(x, self.M, side)]

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.einsum("...k,k,...k->...", self._rows(x), self.eigenvalues, self._rows(y))

    def grid_values(self, M):
        R = self._rows(right_endpoints(M), side="left")
        return (R * self.eigenvalues) @ R.T

    def cell_matrix(self, M):
        R = regrid(self._F, M)
        return (R * self.eigenvalues) @ R.T

    def upper_bound(self):
        if not self.eigenvalues.size:
            return 0.0
        return float(np.abs((self._F * self.eigenvalues) @ self._F.T).max())

    def _apply(self, f, Mq):
        L = math.lcm(f.shape[0], self.M)
        FL = regrid(self._F, L)
        inner = FL.T @ regrid(f, L) / L  # (K, S)
        return regrid(self._F, Mq) @ (self.eigenvalues[:, None] * inner)

    def __repr__(self):
        return f"FiniteRank(K={self.eigenvalues.size}, M={self.M})"


# ---------------------------------------------------------------------------
# constructors


def constant(p):
    return Blockwise([[float(p)]], name=f"constant({p})")


def product_xy():
    return GridEvaluable(lambda x, y: x * y, lipschitz=2.0, name="product_xy")


def separable_poly(coeffs):
    """Separable kernel with ``phi(x) = sum_i coeffs[i] x**i``."""
    poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    xs = np.linspace(0, 1, 2049)
    lip = 2.0 * np.abs(poly(xs)).max() * np.abs(poly.deriv()(xs)).max()
    return Separable(poly, lipschitz=float(lip), name=f"separable_poly({list(coeffs)})")


def blockwise(matrix):
    return Blockwise(np.asarray(matrix, dtype=float))


# ---------------------------------------------------------------------------
# operations


def evaluate(kernel, x, y):
    """Point value ``W(x, y)``; coordinates must lie in [0, 1]."""
    _check_unit(x, "x")
    _check_unit(y, "y")
    return float(kernel(np.float64(x), np.float64(y)))


def apply_operator(kernel, f, quadrature_M=None):
    """``(W f)(x) = int W(x, y) f(y) dy`` as a step function on the quadrature grid.

    Blockwise, FiniteRank and step-function Separable kernels are integrated
    exactly; evaluator kernels use the midpoint rule on the common refinement
    of the quadrature grid and the grid of ``f``.
    """
    if quadrature_M is None:
        quadrature_M = f.grid_size
    if int(quadrature_M) <= 0:
        raise KernelError("quadrature_M must be positive")
    out = kernel._apply(f.values, int(quadrature_M))
    return StepFunction(np.asarray(out, dtype=float), f.labels)


def degree_function(kernel, M):
    """``d_W(x) = (W 1)(x)`` on an ``M`` grid."""
    return apply_operator(kernel, StepFunction.constant(1.0, 1), M)


def discretize(kernel, M):
    """Blockwise kernel with cell (k, l) equal to ``W(k/M, l/M)``."""
    M = int(M)
    if M < 1:
        raise KernelError("M must be >= 1")
    if isinstance(kernel, Blockwise) and kernel.M == M:
        return kernel
    return Blockwise(kernel.grid_values(M), in_w0=kernel.in_w0, name=f"{kernel.name}^({M})")


def delta_M(kernel, M, probe_M=None):
    """Largest ``|W^(M) - W|`` over the probe points ``p / probe_M``, p = 0..probe_M.

    A lower bound on the true supremum. Nested probe grids (``probe_M`` a
    multiple of a previous one) give nondecreasing values.
    """
    probe_M = 10 * M if probe_M is None else int(probe_M)
    if probe_M < M:
        raise KernelError("probe_M must be >= M")
    disc = discretize(kernel, M)
    xs = np.arange(probe_M + 1) / probe_M
    worst = 0.0
    for chunk in np.array_split(xs, max(1, xs.size // 512)):
        diff = disc(chunk[:, None], xs[None, :]) - kernel.point_matrix(chunk, xs)
        worst = max(worst, float(np.abs(diff).max()))
    return worst


def lp_norm(kernel, p=1, M=1000):
    """Kernel ``L^p`` norm by cell averages on an ``M`` grid."""
    C = kernel.cell_matrix(M)
    if p == np.inf:
        return float(np.abs(C).max())
    return float(np.mean(np.abs(C) ** p) ** (1.0 / p))


def block_average(kernel, C):
    """Conditional expectation of a Blockwise kernel onto a ``C``-cell grid.

    The fine and coarse grids need not be nested; fractional cell overlaps are
    weighted exactly. Averaging is an orthogonal projection, so it never
    increases the L2 operator norm.
    """
    N = kernel.M
    if C >= N:
        return kernel
    i = np.arange(N)
    a0 = (i * C) // N
    a1 = ((i + 1) * C - 1) // N
    w0 = np.minimum((i + 1) * C, (a0 + 1) * N) - i * C
    w1 = (i + 1) * C - np.maximum(i * C, a1 * N)
    rows = np.concatenate([a0, a1[a1 != a0]])
    cols = np.concatenate([i, i[a1 != a0]])
    data = np.concatenate([w0, w1[a1 != a0]]).astype(float) / (C * N)
    O = sp.csr_matrix((data, (rows, cols)), shape=(C, N))
    K = kernel.values if kernel.is_sparse else np.asarray(kernel.values)
    coarse = O @ K @ O.T
    coarse = coarse.toarray() if sp.issparse(coarse) else np.asarray(coarse)
    coarse = coarse * C * C
    return Blockwise((coarse + coarse.T) / 2, in_w0=False, name=f"{kernel.name}|avg{C}")


def difference(a, b, M):
    """Blockwise ``a - b`` on an ``M`` grid from exact/midpoint cell averages."""
    return Blockwise(a.cell_matrix(M) - b.cell_matrix(M), in_w0=False, name=f"{a.name}-{b.name}")


# ---------------------------------------------------------------------------
# configuration


def kernel_from_config(cfg):
    """Build a kernel from a JSON-style mapping ``{"type": ..., parameters}``."""
    cfg = dict(cfg)
    kind = cfg.pop("type", None)
    if kind == "constant":
        return constant(cfg.get("p", 1.0))
    if kind == "product_xy":
        return product_xy()
    if kind == "blockwise":
        m = np.asarray(cfg["matrix"], dtype=float)
        if m.ndim == 1:
            n = math.isqrt(m.size)
            if n * n != m.size:
                raise KernelError("row-major blockwise matrix must have a square length")
            m = m.reshape(n, n)
        return Blockwise(m)
    if kind == "separable_poly":
        return separable_poly(cfg.get("coeffs", [0.0, 1.0]))
    if kind == "finite_rank":
        return FiniteRank(cfg["eigenvalues"], cfg["eigenfunctions"], in_w0=cfg.get("in_w0", False))
    raise KernelError(f"unknown kernel type {kind!r}")


def parse_kernel(spec):
    """Kernel from a short string (``constant:0.5``, ``product_xy``,
    ``separable_poly:0,1``, ``blockwise:0.8,0.2;0.2,0.8``), a JSON file path,
    or a mapping."""
    if isinstance(spec, GraphonKernel):
        return spec
    if isinstance(spec, dict):
        return kernel_from_config(spec)
    spec = str(spec).strip()
    if spec.endswith(".json") or Path(spec).is_file():
        return kernel_from_config(json.loads(Path(spec).read_text()))
    kind, _, arg = spec.partition(":")
    if kind == "constant":
        return constant(float(arg) if arg else 1.0)
    if kind == "product_xy":
        return product_xy()
    if kind == "separable_poly":
        return separable_poly([float(c) for c in arg.split(",")])
    if kind == "blockwise":
        return Blockwise([[float(c) for c in row.split(",")] for row in arg.split(";")])
    raise KernelError(f"cannot parse kernel spec {spec!r}")


def kernel_to_config(kernel):
    """Inverse of :func:`kernel_from_config` where the representation allows it."""
    if isinstance(kernel, Blockwise) and not kernel.is_sparse:
        if kernel.M == 1:
            return {"type": "constant", "p": float(kernel.values[0, 0])}
        return {"type": "blockwise", "matrix": kernel.values.tolist()}
    if kernel.name == "product_xy":
        return {"type": "product_xy"}
    if isinstance(kernel, Separable) and isinstance(kernel.phi, np.polynomial.Polynomial):
        return {"type": "separable_poly", "coeffs": kernel.phi.coef.tolist()}
    if isinstance(kernel, FiniteRank):
        return {
            "type": "finite_rank",
            "eigenvalues": kernel.eigenvalues.tolist(),
            "eigenfunctions": [f.values[:, 0].tolist() for f in kernel.eigenfunctions],
        }
    return {"type": "custom", "name": kernel.name}
