"""Mean-field equations on a cell grid and SIS-specific closed forms.

The limit equation ``du/dt = Q(W u) u`` is discretized in space by replacing
the kernel with its grid sampling and ``u`` with cell averages, which gives
``M * |S|`` coupled ODEs

    dv_k/dt = Q((1/M) sum_l W(k/M, l/M) v_l) v_k

integrated with the classical fixed-step Runge-Kutta scheme.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _engine
from .dynamics import RateModel, sis
from .kernels import Blockwise, GraphonKernel, Separable, discretize
from .stepfunction import StepFunction, midpoints, right_endpoints

SIMPLEX_TOL = 1e-6
INPUT_SIMPLEX_TOL = 1e-9
BISECTION_MAXITER = 400


class SimplexDriftError(ArithmeticError):
    pass


class DieOut:
    """Subcritical marker: the only equilibrium is ``g* = 0``."""

    def __repr__(self):
        return "DIE_OUT"

    def __bool__(self):
        return False


DIE_OUT = DieOut()


@dataclass(eq=False)
class MeanFieldSolution:
    """Recorded states ``values[r, k, s]`` at ``times[r]`` on an ``M`` grid."""

    times: np.ndarray
    values: np.ndarray
    labels: tuple
    model: RateModel
    kernel: GraphonKernel
    dt: float

    @property
    def grid_size(self):
        return self.values.shape[1]

    def at(self, r):
        return StepFunction(self.values[r], self.labels)

    @property
    def final(self):
        return self.at(-1)

    def mean(self):
        """``(R, S)`` array of spatial averages over time."""
        return self.values.mean(axis=1)

    def simplex_drift(self):
        """``(max |sum_s v_s - 1|, most negative component)`` over the run."""
        sums = self.values.sum(axis=2)
        return float(np.abs(sums - 1.0).max()), float(min(self.values.min(), 0.0))

    def check_simplex(self, tol=SIMPLEX_TOL):
        gap, low = self.simplex_drift()
        if gap > tol or low < -tol or self.values.max() > 1 + tol:
            raise SimplexDriftError(f"left the simplex: sum gap {gap:.3g}, min component {low:.3g}")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "cell", "state", "value"])
            for r, t in enumerate(self.times):
                for k in range(self.grid_size):
                    for s, lab in enumerate(self.labels):
                        w.writerow([repr(float(t)), k, lab, repr(float(self.values[r, k, s]))])


def _generator_parts(model):
    """``(G0, G1)`` with ``dv = v G0 + (phi (x) v) G1`` per cell, where row
    ``r * S + f`` of ``G1`` is the coefficient of ``phi_r v_f``."""
    S = model.n_states
    idx = np.arange(S)
    G0 = model.base_rates.copy()
    G0[idx, idx] = -model.base_rates.sum(axis=1)
    G1 = np.transpose(model.interaction_rates, (2, 0, 1)).copy()
    G1[:, idx, idx] = -model.interaction_rates.sum(axis=1).T
    return G0, np.ascontiguousarray(G1.reshape(S * S, S))


def _field(model, A):
    """Vector field ``v -> Q(A v) v`` for ``v`` of shape (M, S)."""
    G0, G1 = _generator_parts(model)
    S = model.n_states

    def f(v):
        phi = A @ v
        return v @ G0 + (phi[:, :, None] * v[:, None, :]).reshape(v.shape[0], S * S) @ G1

    return f


def rhs(kernel_disc, model, v):
    """``Q(W^(M) v) v`` per cell, for ``v`` on the kernel's grid."""
    if not isinstance(kernel_disc, Blockwise):
        raise ValueError("rhs needs a Blockwise kernel; use discretize() first")
    M = kernel_disc.M
    if v.grid_size != M:
        raise ValueError(f"v has {v.grid_size} cells, kernel has {M}")
    if v.n_states != model.n_states:
        raise ValueError(f"v has {v.n_states} components, model has {model.n_states}")
    A = kernel_disc.dense() / M
    return StepFunction(_field(model, A)(v.values), model.states)


def _check_input(u0, model):
    if u0.n_states != model.n_states:
        raise ValueError(f"u0 has {u0.n_states} components, model has {model.n_states}")
    v = u0.values
    if v.min() < -INPUT_SIMPLEX_TOL or np.abs(v.sum(axis=1) - 1).max() > INPUT_SIMPLEX_TOL:
        raise ValueError("u0 must lie in the probability simplex in every cell")


def solve(kernel, model, u0, M, dt, T, record_dt=None, check=True):
    """Integrate the grid mean-field system up to ``T``.

    ``u0`` is a StepFunction; cell ``k`` starts at the average of ``u0`` over
    cell ``k``. States are recorded every ``record_dt`` (rounded to a whole
    number of steps; default: start and end only). The last step is shortened
    when ``T`` is not a multiple of ``dt``. With ``check`` the run raises
    :class:`SimplexDriftError` if any recorded state leaves the simplex by more
    than ``1e-6``.
    """
    M = int(M)
    if dt <= 0 or T <= 0:
        raise ValueError("dt and T must be positive")
    if M < 1:
        raise ValueError("M must be >= 1")
    _check_input(u0, model)
    A = np.ascontiguousarray(discretize(kernel, M).dense() / M)
    G0, G1 = _generator_parts(model)
    v = np.array(u0.on_grid(M).values, dtype=float)

    n_full = int(np.floor(T / dt + 1e-9))
    tail = T - n_full * dt
    if tail <= 1e-12 * T:
        tail = 0.0
    stride = n_full if record_dt is None else max(1, int(round(record_dt / dt)))

    times = [0.0]
    frames = [v.copy()]
    done = 0
    while done < n_full:
        n = min(stride, n_full - done)
        _engine.rk4(v, A, G0, G1, float(dt), n)
        done += n
        if done % stride == 0 or (done == n_full and not tail):
            times.append(done * dt if done < n_full or tail else float(T))
            frames.append(v.copy())
    if tail:
        _engine.rk4(v, A, G0, G1, float(tail), 1)
        times.append(float(T))
        frames.append(v.copy())
    sol = MeanFieldSolution(np.array(times), np.array(frames), model.states, model, kernel, float(dt))
    if check:
        sol.check_simplex()
    return sol


# ---------------------------------------------------------------------------
# SIS closed forms


def _phi_values(phi, quadrature_M, nodes):
    if nodes not in ("midpoint", "right"):
        raise ValueError(f"unknown nodes {nodes!r}")
    xs = midpoints(quadrature_M) if nodes == "midpoint" else right_endpoints(quadrature_M)
    if isinstance(phi, Separable):
        p = phi.phi_at(xs, side="left")
    elif isinstance(phi, StepFunction):
        p = phi.evaluate(xs, side="left")[:, 0]
    else:
        p = np.asarray(phi(xs), dtype=float) * np.ones_like(xs)
    if p.min() < 0:
        raise ValueError("phi must be nonnegative")
    return p


def separable_k(phi, beta, quadrature_M=100_000, tol=1e-12, nodes="midpoint"):
    """Root ``k`` of ``1 = int beta phi^2 / (1 + beta phi k)``, or None when
    ``beta ||phi||_2^2 <= 1``.

    The integral is the equal-weight rule at cell midpoints (``nodes="midpoint"``)
    or right endpoints (``nodes="right"``). With right endpoints and
    ``quadrature_M = M`` the root is exact for the grid-sampled kernel.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    p = _phi_values(phi, quadrature_M, nodes)

    def residual(k):
        return float(np.mean(beta * p * p / (1.0 + beta * p * k))) - 1.0

    if residual(0.0) <= 0:
        return None
    lo, hi = 0.0, 1.0
    while residual(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e300:
            raise ArithmeticError("could not bracket k")
    for _ in range(BISECTION_MAXITER):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if abs(r) < tol or hi - lo <= 4 * np.finfo(float).eps * hi:
            return mid
        if r > 0:
            lo = mid
        else:
            hi = mid
    raise ArithmeticError("bisection did not converge")


def sis_equilibrium_separable(phi, beta, quadrature_M=100_000, tol=1e-12, nodes="midpoint"):
    """Endemic SIS equilibrium ``g* = beta phi k / (1 + beta phi k)`` for
    ``W(x, y) = phi(x) phi(y)``, as a step function on the quadrature grid.

    Returns :data:`DIE_OUT` in the subcritical case.
    """
    k = separable_k(phi, beta, quadrature_M, tol, nodes)
    if k is None:
        return DIE_OUT
    p = _phi_values(phi, quadrature_M, nodes)
    return StepFunction(beta * p * k / (1.0 + beta * p * k), ("I",))


def sis_initial(u_I, M=1):
    """Two-state (S, I) step function from an infected fraction (scalar,
    array of cell values or StepFunction)."""
    if isinstance(u_I, StepFunction):
        vals = u_I.values[:, 0]
    else:
        vals = np.atleast_1d(np.asarray(u_I, dtype=float))
        if vals.size == 1:
            vals = np.full(M, vals[0])
    return StepFunction(np.column_stack([1 - vals, vals]), ("S", "I"))


def long_run_prevalence(kernel, beta=None, M=50, T=100.0, dt=0.05, u0=0.01, model=None):
    """``int u_I(T, x) dx`` for SIS started from ``u_I(0) = u0``."""
    if model is None:
        if beta is None:
            raise ValueError("need beta or model")
        model = sis(beta)
    sol = solve(kernel, model, sis_initial(u0, 1), M, dt, T)
    return float(sol.values[-1, :, model.index("I")].mean())
