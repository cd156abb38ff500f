"""Eigen-decomposition of kernel operators by grid discretization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import Blockwise, FiniteRank, KernelError, discretize
from .stepfunction import StepFunction

DENSE_LIMIT = 2000
POWER_TOL = 1e-10
POWER_MAXITER = 10_000


class DegenerateKernelError(KernelError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """Top eigenpairs ordered by descending ``|lambda|``.

    Eigenfunctions are step functions on the ``grid_size`` grid with unit L2
    norm; each is signed so that its largest-magnitude cell is positive.
    Eigenvalues tied in magnitude come back in no particular order.
    """

    eigenvalues: np.ndarray
    eigenfunctions: tuple
    grid_size: int

    def __len__(self):
        return self.eigenvalues.size


def operator_matrix(kernel, M):
    """Symmetric matrix with entries ``W(k/M, l/M) / M``."""
    disc = discretize(kernel, M)
    return disc.dense() / M


def _fix_signs(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _order(vals, vecs, K):
    order = np.argsort(-np.abs(vals), kind="stable")[:K]
    return vals[order], vecs[:, order]


def power_iteration(A, K, tol=POWER_TOL, maxiter=POWER_MAXITER, seed=0):
    """Top-``K`` eigenpairs of a symmetric matrix by power iteration with
    Hotelling deflation.

    Stops each pair when the Rayleigh quotient moves by less than
    ``tol * max(1, |lambda|)``. Convergence is geometric in
    ``|lambda_{k+1} / lambda_k|``, so clustered spectra may hit ``maxiter``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    vals, vecs = [], []

    def deflated(x):
        y = A @ x
        for v, l in zip(vecs, vals):
            y -= l * (v @ x) * v
        return y

    for _ in range(K):
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        y = deflated(x)
        lam = x @ y
        for _ in range(maxiter):
            norm = np.linalg.norm(y)
            if norm == 0.0:
                lam = 0.0
                break
            x = y / norm
            y = deflated(x)
            lam_new = x @ y
            done = abs(lam_new - lam) <= tol * max(1.0, abs(lam_new))
            lam = lam_new
            if done:
                break
        vals.append(lam)
        vecs.append(x)
    return np.array(vals), np.column_stack(vecs) if vecs else np.zeros((n, 0))


def spectrum(kernel, M, K=1, method="auto"):
    """Top-``K`` eigenpairs of the operator ``W`` discretized on an ``M`` grid.

    ``method`` is ``"dense"`` (full symmetric eigensolve), ``"power"`` (power
    iteration with deflation) or ``"auto"``: dense for ``M <= 2000``, power
    iteration above that.
    """
    M, K = int(M), int(K)
    if K < 1 or K > M:
        raise KernelError(f"need 1 <= K <= M, got K={K}, M={M}")
    A = operator_matrix(kernel, M)
    if method == "auto":
        method = "dense" if M <= DENSE_LIMIT else "power"
    if method == "dense":
        vals, vecs = np.linalg.eigh(A)
        vals, vecs = _order(vals, vecs, K)
    elif method == "power":
        vals, vecs = power_iteration(A, K)
        vals, vecs = _order(vals, vecs, K)
    else:
        raise ValueError(f"unknown method {method!r}")
    vecs = _fix_signs(vecs) * np.sqrt(M)
    funcs = tuple(StepFunction(vecs[:, k]) for k in range(K))
    return Spectrum(vals, funcs, M)


def eigenvalues(kernel, M):
    """All eigenvalues of the discretized operator, by descending magnitude."""
    vals = np.linalg.eigvalsh(operator_matrix(kernel, M))
    return vals[np.argsort(-np.abs(vals), kind="stable")]


def truncate(kernel, K, M):
    """Finite-rank kernel from the top-``K`` eigenpairs."""
    spec = spectrum(kernel, M, K)
    return FiniteRank(spec.eigenvalues, spec.eigenfunctions, in_w0=False, name=f"{kernel.name}_K{K}")


def op2_norm(kernel, M):
    """``||W||_op,2 = |lambda_1|`` of the discretized operator."""
    if isinstance(kernel, Blockwise) and kernel.M == M and kernel.is_sparse:
        A = kernel.dense() / M
    else:
        A = operator_matrix(kernel, M)
    if M <= DENSE_LIMIT:
        vals = np.linalg.eigvalsh(A)
        return float(np.abs(vals).max())
    vals, _ = power_iteration(A, 1)
    return float(abs(vals[0]))


def epidemic_threshold(kernel, M, tol=1e-12):
    """Critical SIS infection rate ``1 / lambda_1``."""
    if isinstance(kernel, FiniteRank):
        lam1 = float(kernel.eigenvalues[np.argmax(np.abs(kernel.eigenvalues))]) if kernel.eigenvalues.size else 0.0
    else:
        lam1 = float(spectrum(kernel, M, 1).eigenvalues[0])
    if lam1 <= tol:
        raise DegenerateKernelError(f"dominant eigenvalue {lam1:.3g} is not positive")
    return 1.0 / lam1


def lambda1_gap(kernel, M):
    """``lambda_1`` at grid sizes M and 2M, and their difference, as a
    discretization error indicator."""
    a = spectrum(kernel, M, 1).eigenvalues[0]
    b = spectrum(kernel, 2 * M, 1).eigenvalues[0]
    return float(a), float(b), float(abs(b - a))
