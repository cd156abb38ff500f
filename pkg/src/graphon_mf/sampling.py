"""Sampling simple graphs from graphons, and graphs back to empirical graphons."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._rng import RNG_ALGORITHM, make_rng
from .kernels import Blockwise, KernelError

VERTEX_MODES = ("grid", "ordered_uniform")
SPARSE_CUTOFF = 0.1
_BLOCK_PAIRS = 1 << 22
_MAGIC = b"GMFG"


class SamplingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SampledGraph:
    """Simple undirected graph in CSR form with its sampling metadata.

    Vertices are 0-based. ``positions[i]`` is the point ``U_i`` of vertex
    ``i`` in [0, 1].
    """

    n: int
    positions: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    kappa: float = 1.0
    seed: int | None = None
    vertex_mode: str = "grid"
    rng_algorithm: str = RNG_ALGORITHM
    _degrees: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("positions", "indptr", "indices"):
            getattr(self, name).setflags(write=False)
        deg = np.diff(self.indptr)
        deg.setflags(write=False)
        object.__setattr__(self, "_degrees", deg)

    @classmethod
    def from_edges(cls, n, rows, cols, **meta):
        """Build from the upper-triangle edge list ``rows[e] < cols[e]``."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.size and (np.any(rows >= cols) or rows.min() < 0 or cols.max() >= n):
            raise SamplingError("edges must satisfy 0 <= i < j < n")
        key = rows * n + cols
        if key.size > 1 and np.any(np.diff(key) <= 0):
            key = np.unique(key)
            rows, cols = key // n, key % n
        # neighbours of v: lower ones (edges (r, v), already in r order) then
        # upper ones (edges (v, c), already in c order)
        lower_cnt = np.bincount(cols, minlength=n)
        upper_cnt = np.bincount(rows, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(lower_cnt + upper_cnt, out=indptr[1:])
        itype = np.int32 if n < 2**31 else np.int64
        indices = np.empty(2 * rows.size, dtype=itype)
        upper_start = np.cumsum(upper_cnt) - upper_cnt
        upper = sp.csr_matrix(
            (np.ones(rows.size, np.int8), cols, np.append(upper_start, rows.size)), shape=(n, n)
        )
        lower = upper.T.tocsr()  # O(nnz) transpose keeps row order
        owner = np.repeat(np.arange(n), lower_cnt)
        rank = np.arange(owner.size) - lower.indptr[owner]
        indices[indptr[owner] + rank] = lower.indices
        rank = np.arange(rows.size) - upper_start[rows]
        indices[indptr[rows] + lower_cnt[rows] + rank] = cols
        positions = meta.pop("positions", None)
        if positions is None:
            positions = grid_positions(n)
        return cls(n=int(n), positions=np.asarray(positions, float), indptr=indptr, indices=indices, **meta)

    @property
    def degrees(self):
        return self._degrees

    @property
    def n_edges(self):
        return int(self.indices.size // 2)

    def neighbors(self, i):
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def degree(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"vertex {i} out of range for n={self.n}")
        return int(self._degrees[i])

    def edges(self):
        """Upper-triangle edge list in lexicographic order."""
        src = np.repeat(np.arange(self.n), self._degrees)
        keep = src < self.indices
        return src[keep], self.indices[keep].astype(np.int64)

    def adjacency(self):
        data = np.ones(self.indices.size, dtype=float)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def __repr__(self):
        return f"SampledGraph(n={self.n}, edges={self.n_edges}, kappa={self.kappa}, seed={self.seed})"


def grid_positions(n):
    return np.arange(1, n + 1, dtype=float) / n


def _positions(n, mode, rng):
    if mode == "grid":
        return grid_positions(n)
    if mode == "ordered_uniform":
        return np.sort(rng.random(n))
    raise SamplingError(f"vertex_mode must be one of {VERTEX_MODES}")


def _row_offsets(n):
    """Number of pairs (i, j), i < j, preceding row i in lexicographic order."""
    i = np.arange(n, dtype=np.int64)
    return i * (n - 1) - i * (i - 1) // 2


def _pairs_from_linear(lin, n, offsets):
    i = np.searchsorted(offsets, lin, side="right") - 1
    j = i + 1 + (lin - offsets[i])
    return i, j


def _sample_dense(kernel, U, kappa, rng):
    n = U.size
    rows_out, cols_out = [], []
    start = 0
    while start < n - 1:
        # rows [start, stop) hold roughly _BLOCK_PAIRS pairs
        stop = start + 1
        count = n - 1 - start
        while stop < n - 1 and count + (n - 1 - stop) <= _BLOCK_PAIRS:
            count += n - 1 - stop
            stop += 1
        r = np.arange(start, stop)
        c = np.arange(n)
        mask = c[None, :] > r[:, None]
        prob = kappa * np.asarray(kernel(U[r][:, None], U[None, :]), dtype=float)
        prob = prob[mask]  # row-major, i.e. lexicographic pair order
        if prob.size and (prob.max() > 1.0 + 1e-12 or prob.min() < 0.0):
            raise SamplingError("kappa * W leaves [0, 1]: invalid edge probability")
        hit = rng.random(prob.size) < prob
        rr, cc = np.nonzero(mask)
        rows_out.append(r[rr[hit]])
        cols_out.append(cc[hit])
        start = stop
    if not rows_out:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(rows_out), np.concatenate(cols_out)


def _sample_sparse(kernel, U, kappa, p_max, rng):
    """Geometric skips over the pair sequence at rate ``p_max``, then thinning."""
    n = U.size
    total = n * (n - 1) // 2
    offsets = _row_offsets(n)
    pos = -1
    rows_out, cols_out = [], []
    batch = int(min(max(1024, 1.2 * total * p_max + 64), 1 << 22))
    while True:
        gaps = rng.geometric(p_max, size=batch)
        lin = pos + np.cumsum(gaps)
        done = lin[-1] >= total
        lin = lin[lin < total]
        if lin.size:
            pos = lin[-1]
            i, j = _pairs_from_linear(lin, n, offsets)
            accept = rng.random(lin.size)
            prob = kappa * np.asarray(kernel(U[i], U[j]), dtype=float)
            if prob.size and (prob.max() > p_max * (1 + 1e-12) or prob.min() < 0.0):
                raise SamplingError("kernel exceeds its declared upper bound")
            keep = accept * p_max < prob
            rows_out.append(i[keep])
            cols_out.append(j[keep])
        if done:
            break
    if not rows_out:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(rows_out), np.concatenate(cols_out)


def sample_graph(kernel, n, kappa=1.0, vertex_mode="grid", seed=0):
    """Sample a simple graph on ``n`` vertices.

    Each pair ``i < j`` is joined independently with probability
    ``kappa * W(U_i, U_j)``. Positions are ``U_i = i/n`` (``grid``) or sorted
    uniforms (``ordered_uniform``). Pairs are visited in lexicographic order;
    when ``kappa * max W <= 0.1`` the visit skips ahead geometrically, which
    keeps the cost proportional to the number of edges.
    """
    n = int(n)
    if n < 1:
        raise SamplingError("n must be >= 1")
    kappa = float(kappa)
    if not 0.0 < kappa <= 1.0:
        raise SamplingError("kappa must lie in (0, 1]")
    if not kernel.in_w0:
        raise KernelError("sampling needs a kernel with values in [0, 1]")
    rng = make_rng(seed)
    U = _positions(n, vertex_mode, rng)
    p_max = kappa * kernel.upper_bound()
    if p_max > 1.0 + 1e-12:
        raise SamplingError(f"kappa * max W = {p_max:.4g} exceeds 1")
    if n < 2 or p_max == 0.0:
        rows = cols = np.zeros(0, np.int64)
    elif p_max <= SPARSE_CUTOFF:
        rows, cols = _sample_sparse(kernel, U, kappa, p_max, rng)
    else:
        rows, cols = _sample_dense(kernel, U, kappa, rng)
    return SampledGraph.from_edges(
        n, rows, cols, positions=U, kappa=kappa, seed=seed, vertex_mode=vertex_mode
    )


def empirical_graphon(graph):
    """Blockwise kernel on the ``n`` grid whose cell (i, j) is ``a_ij``."""
    return Blockwise(graph.adjacency(), in_w0=True, name=f"empirical(n={graph.n})")


def degree(graph, i):
    return graph.degree(i)


def kappa_schedule(n, c=1.0, gamma=0.0):
    """Density parameter ``kappa_N = c * N**(-gamma)``."""
    return float(c) * float(n) ** (-float(gamma))


# ---------------------------------------------------------------------------
# serialization


def _restore_positions(n, mode, seed, positions=None):
    if positions is not None:
        return positions
    if mode == "grid":
        return grid_positions(n)
    return _positions(n, mode, make_rng(seed))


def write_edgelist(graph, path):
    """Text form: header ``N kappa seed [mode]`` then one ``i j`` per line."""
    rows, cols = graph.edges()
    with open(path, "w") as fh:
        fh.write(f"{graph.n} {graph.kappa!r} {graph.seed} {graph.vertex_mode}\n")
        np.savetxt(fh, np.column_stack([rows, cols]), fmt="%d")


def read_edgelist(path):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) < 3:
            raise SamplingError(f"{path}: malformed header")
        n, kappa, seed = int(head[0]), float(head[1]), head[2]
        seed = None if seed == "None" else int(seed)
        mode = head[3] if len(head) > 3 else "grid"
        data = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    rows, cols = (data[:, 0], data[:, 1]) if data.size else (np.zeros(0, np.int64),) * 2
    U = _restore_positions(n, mode, seed)
    return SampledGraph.from_edges(n, rows, cols, positions=U, kappa=kappa, seed=seed, vertex_mode=mode)


def write_binary(graph, path):
    """Compact binary form: header, float64 positions, uint32/int64 edge pairs."""
    rows, cols = graph.edges()
    wide = graph.n >= 2**32
    mode = graph.vertex_mode.encode()
    seed = -1 if graph.seed is None else int(graph.seed)
    header = struct.pack("<4sBQdqQB", _MAGIC, 1, graph.n, graph.kappa, seed, rows.size, len(mode))
    etype = np.int64 if wide else np.uint32
    with open(path, "wb") as fh:
        fh.write(header + mode + bytes([int(wide)]))
        fh.write(np.ascontiguousarray(graph.positions, dtype="<f8").tobytes())
        fh.write(np.column_stack([rows, cols]).astype(etype).tobytes())


def read_binary(path):
    raw = Path(path).read_bytes()
    size = struct.calcsize("<4sBQdqQB")
    magic, version, n, kappa, seed, m, mlen = struct.unpack("<4sBQdqQB", raw[:size])
    if magic != _MAGIC or version != 1:
        raise SamplingError(f"{path}: not a graph file")
    off = size
    mode = raw[off : off + mlen].decode()
    wide = bool(raw[off + mlen])
    off += mlen + 1
    U = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    etype = np.int64 if wide else np.uint32
    e = np.frombuffer(raw, dtype=etype, count=2 * m, offset=off).reshape(m, 2).astype(np.int64)
    return SampledGraph.from_edges(
        n, e[:, 0], e[:, 1], positions=U, kappa=kappa, seed=None if seed < 0 else seed, vertex_mode=mode
    )
