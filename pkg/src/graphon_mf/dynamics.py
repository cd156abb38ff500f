"""Exact simulation of local-density-dependent Markov processes on graphs.

Each vertex holds a state from a finite set. A vertex in state ``f`` jumps to
``t`` at rate ``q_tf(phi_i)``, where ``phi_i[s] = (1 / (N kappa)) * #{neighbours
of i in state s}`` is its environment vector. Rates are affine in ``phi`` with
nonnegative coefficients.

The simulator is Gillespie's direct method: the next event time is
exponential in the total rate, the vertex is picked from a sum tree in
``O(log N)``, and a flip updates the neighbour counts and rates of the
flipping vertex's neighbours only.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _engine
from ._rng import derive_seed, make_rng
from .stepfunction import StepFunction, cell_index

_UNIFORM_CHUNK = 1 << 16
_SIMPLEX_TOL = 1e-9


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# rate models


@dataclass(frozen=True, eq=False)
class RateModel:
    """Affine transition rates ``q_{t<-f}(phi) = base_rates[f, t] + sum_r
    interaction_rates[f, t, r] * phi[r]``.

    Index order is always ``[from, to(, via)]``. Diagonal entries are forced
    to zero; the diagonal of the generator is derived.
    """

    states: tuple
    base_rates: np.ndarray
    interaction_rates: np.ndarray
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        S = len(states)
        if S < 1 or len(set(states)) != S:
            raise ModelError("states must be distinct and nonempty")
        a = np.array(self.base_rates, dtype=float)
        b = np.array(self.interaction_rates, dtype=float)
        if a.shape != (S, S) or b.shape != (S, S, S):
            raise ModelError(f"rate arrays must be ({S},{S}) and ({S},{S},{S})")
        if np.any(a < 0) or np.any(b < 0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ModelError("rates must be finite and nonnegative")
        idx = np.arange(S)
        a[idx, idx] = 0.0
        b[idx, idx, :] = 0.0
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "base_rates", a)
        object.__setattr__(self, "interaction_rates", b)

    @property
    def n_states(self):
        return len(self.states)

    def index(self, label):
        if isinstance(label, (int, np.integer)):
            return int(label)
        try:
            return self.states.index(str(label))
        except ValueError:
            raise ModelError(f"unknown state {label!r}") from None

    @property
    def is_zero(self):
        return not (self.base_rates.any() or self.interaction_rates.any())

    def rates(self, phi):
        """Rates ``[..., from, to]`` for environment vectors ``phi[..., r]``."""
        phi = np.asarray(phi, dtype=float)
        return self.base_rates + np.einsum("...r,ftr->...ft", phi, self.interaction_rates)

    def rate_matrix(self, phi):
        """Generator ``Q(phi)`` with ``Q[t, f]`` the rate ``f -> t`` and
        columns summing to zero."""
        R = self.rates(phi)
        Q = np.swapaxes(R, -1, -2).copy()
        idx = np.arange(self.n_states)
        Q[..., idx, idx] = -R.sum(axis=-1)
        return Q

    @property
    def lipschitz(self):
        """``L[f, t] = sum_r b[f, t, r]``, the Lipschitz constant of ``q_{t<-f}``
        in the l1 norm of ``phi`` (up to the max over ``r``)."""
        return self.interaction_rates.sum(axis=2)

    @property
    def lipschitz_Q(self):
        """Lipschitz constant of ``phi -> Q(phi)`` in the l1-induced norm."""
        return 2.0 * float(self.interaction_rates.sum(axis=1).max(initial=0.0))

    @property
    def q_max(self):
        """``max_{phi in simplex} ||Q(phi)||`` (l1-induced norm)."""
        per_vertex = self.base_rates.sum(axis=1)[:, None] + self.interaction_rates.sum(axis=1)
        return 2.0 * float(per_vertex.max(initial=0.0))

    def to_config(self):
        if self.name in PRESETS:
            return {"preset": self.name, **self.params}
        S = self.states
        base = [[S[f], S[t], float(self.base_rates[f, t])] for f, t in zip(*np.nonzero(self.base_rates))]
        inter = [
            [S[f], S[t], S[r], float(self.interaction_rates[f, t, r])]
            for f, t, r in zip(*np.nonzero(self.interaction_rates))
        ]
        return {"states": list(S), "base": base, "interaction": inter}

    def __repr__(self):
        extra = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"RateModel({self.name}{', ' + extra if extra else ''}, states={self.states})"


def sis(beta, recovery=1.0):
    """SIS: ``I -> S`` at ``recovery``; ``S -> I`` at ``beta * phi_I``."""
    a = np.zeros((2, 2))
    b = np.zeros((2, 2, 2))
    a[1, 0] = recovery
    b[0, 1, 1] = beta
    params = {"beta": float(beta)} if recovery == 1.0 else {"beta": float(beta), "recovery": float(recovery)}
    return RateModel(("S", "I"), a, b, name="sis", params=params)


def sir(beta, recovery=1.0):
    """SIR: ``S -> I`` at ``beta * phi_I``; ``I -> R`` at ``recovery``."""
    a = np.zeros((3, 3))
    b = np.zeros((3, 3, 3))
    a[1, 2] = recovery
    b[0, 1, 1] = beta
    params = {"beta": float(beta)} if recovery == 1.0 else {"beta": float(beta), "recovery": float(recovery)}
    return RateModel(("S", "I", "R"), a, b, name="sir", params=params)


def zero_model(states=("S", "I")):
    S = len(states)
    return RateModel(states, np.zeros((S, S)), np.zeros((S, S, S)), name="zero")


PRESETS = {"sis": sis, "sir": sir}


def model_from_config(cfg):
    """RateModel from ``{"preset": "sis", "beta": 2}`` or
    ``{"states": [...], "base": [[from, to, rate]...],
    "interaction": [[from, to, via, coeff]...]}``."""
    cfg = dict(cfg)
    if "preset" in cfg:
        name = cfg.pop("preset")
        if name not in PRESETS:
            raise ModelError(f"unknown preset {name!r}")
        return PRESETS[name](**cfg)
    states = tuple(cfg["states"])
    S = len(states)
    a = np.zeros((S, S))
    b = np.zeros((S, S, S))
    pos = {s: k for k, s in enumerate(states)}
    try:
        for f, t, rate in cfg.get("base", []):
            a[pos[f], pos[t]] += rate
        for f, t, r, coeff in cfg.get("interaction", []):
            b[pos[f], pos[t], pos[r]] += coeff
    except KeyError as exc:
        raise ModelError(f"unknown state {exc.args[0]!r}") from None
    return RateModel(states, a, b)


def parse_model(spec, beta=None):
    """Model from a preset name (with ``beta``), a JSON path or a mapping."""
    if isinstance(spec, RateModel):
        return spec
    if isinstance(spec, dict):
        return model_from_config(spec)
    spec = str(spec)
    if spec in PRESETS:
        if beta is None:
            raise ModelError(f"preset {spec!r} needs beta")
        return PRESETS[spec](beta)
    if spec == "zero":
        return zero_model()
    return model_from_config(json.loads(Path(spec).read_text()))


# ---------------------------------------------------------------------------
# initial conditions


@dataclass(frozen=True)
class Explicit:
    """Per-vertex states (indices or labels)."""

    states: object


@dataclass(frozen=True)
class FromDensity:
    """Independent draws: vertex ``i`` takes state ``s`` with probability
    ``density(U_i)[s]``."""

    density: StepFunction


@dataclass(frozen=True)
class DegreeZero:
    """``infected`` exactly on degree-zero vertices, ``other`` elsewhere."""

    infected: str = "I"
    other: str = "S"


def _initial_states(graph, model, initial, rng):
    n = graph.n
    if isinstance(initial, str) and initial in ("degree_zero", "degree-zero"):
        initial = DegreeZero()
    elif isinstance(initial, StepFunction):
        initial = FromDensity(initial)
    elif not isinstance(initial, (Explicit, FromDensity, DegreeZero)):
        initial = Explicit(initial)

    if isinstance(initial, Explicit):
        raw = np.asarray(initial.states)
        if raw.shape != (n,):
            raise ModelError(f"need {n} initial states, got shape {raw.shape}")
        if raw.dtype.kind in "iu":
            st = raw.astype(np.int64)
        else:
            st = np.array([model.index(s) for s in raw], dtype=np.int64)
        if st.size and (st.min() < 0 or st.max() >= model.n_states):
            raise ModelError("initial state index out of range")
        return st
    if isinstance(initial, DegreeZero):
        st = np.full(n, model.index(initial.other), dtype=np.int64)
        st[graph.degrees == 0] = model.index(initial.infected)
        return st
    dens = initial.density
    if dens.n_states != model.n_states:
        raise ModelError(f"density has {dens.n_states} components, model has {model.n_states}")
    v = dens.values
    if v.min() < -_SIMPLEX_TOL or np.abs(v.sum(axis=1) - 1).max() > _SIMPLEX_TOL:
        raise ModelError("initial density must lie in the probability simplex in every cell")
    p = np.clip(dens.evaluate(graph.positions, side="left"), 0.0, None)
    cum = np.cumsum(p, axis=1)
    cum /= cum[:, -1:]
    draws = rng.random(n)
    return np.minimum((draws[:, None] >= cum).sum(axis=1), model.n_states - 1).astype(np.int64)


# ---------------------------------------------------------------------------
# process state


@dataclass(frozen=True)
class TransitionEvent:
    time: float
    vertex: int
    source: int
    target: int


class Absorbed:
    """Returned by :meth:`MarkovProcess.step` when the total rate is zero."""

    def __repr__(self):
        return "ABSORBED"


ABSORBED = Absorbed()


@dataclass(eq=False)
class Trajectory:
    """Recorded box-aggregated densities.

    ``densities[r, k, s]`` is the box density of state ``s`` in cell ``k`` at
    ``times[r]``; ``mean_density[r, s]`` is the fraction of all vertices in
    state ``s``.
    """

    times: np.ndarray
    densities: np.ndarray
    mean_density: np.ndarray
    labels: tuple
    n_events: int = 0

    @property
    def grid_size(self):
        return self.densities.shape[1]

    def at(self, r):
        return StepFunction(self.densities[r], self.labels)

    def series(self, label):
        return self.mean_density[:, self.labels.index(label)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "cell", "state", "value"])
            for r, t in enumerate(self.times):
                for k in range(self.grid_size):
                    for s, lab in enumerate(self.labels):
                        w.writerow([repr(float(t)), k, lab, repr(float(self.densities[r, k, s]))])


class MarkovProcess:
    """Mutable simulation state on a fixed graph. Single owner; not thread safe."""

    def __init__(self, graph, model, states, seed=0):
        if graph.kappa <= 0:
            raise ModelError("kappa must be positive")
        self.graph = graph
        self.model = model
        self.seed = seed
        self.scale = 1.0 / (graph.n * graph.kappa)
        S = model.n_states
        self.vertex_state = np.ascontiguousarray(states, dtype=np.int64)
        self._indptr = np.ascontiguousarray(graph.indptr, dtype=np.int64)
        self._indices = np.ascontiguousarray(graph.indices)
        self.counts = self._count_neighbours()
        self.vertex_total_rate = self._recompute_rates(self.counts)
        n = graph.n
        self._cap = 1 << max(0, (n - 1).bit_length())
        self.tree = _engine.build_tree(self.vertex_total_rate, self._cap)
        self._base = np.ascontiguousarray(model.base_rates)
        self._inter = np.ascontiguousarray(model.interaction_rates)
        self._nodes = np.zeros(n + 1, dtype=np.int64)
        self._mark = np.zeros(2 * self._cap, dtype=np.int64)
        self._stamp = np.zeros(1, dtype=np.int64)
        self._clock = np.zeros(1)
        self._last = np.zeros(3, dtype=np.int64)
        self._rng = make_rng(derive_seed(seed, "dynamics"))
        self._u = np.zeros(0)
        self._upos = np.zeros(1, dtype=np.int64)
        self.n_events = 0
        del S

    # -- derived quantities ---------------------------------------------------

    @property
    def time(self):
        return float(self._clock[0])

    @property
    def env_vectors(self):
        return self.counts * self.scale

    @property
    def total_rate(self):
        return float(self.tree[1])

    def _count_neighbours(self):
        S = self.model.n_states
        onehot = np.zeros((self.graph.n, S))
        onehot[np.arange(self.graph.n), self.vertex_state] = 1.0
        return np.rint(self.graph.adjacency() @ onehot).astype(np.int64)

    def _recompute_rates(self, counts):
        R = self.model.rates(counts * self.scale)  # (N, from, to)
        own = R[np.arange(self.graph.n), self.vertex_state]  # (N, to)
        own[np.arange(self.graph.n), self.vertex_state] = 0.0
        return np.ascontiguousarray(own.sum(axis=1))

    def check_consistency(self):
        """Relative gaps between the maintained structures and a recomputation."""
        counts = self._count_neighbours()
        rates = self._recompute_rates(counts)
        denom = np.maximum(np.abs(rates), 1e-300)
        rel_rates = float(np.max(np.abs(rates - self.vertex_total_rate) / denom, initial=0.0))
        total = float(np.sum(rates))
        rel_root = abs(self.tree[1] - total) / total if total > 0 else abs(self.tree[1])
        return {
            "counts_equal": bool(np.array_equal(counts, self.counts)),
            "rate_rel_error": rel_rates,
            "root_rel_error": float(rel_root),
        }

    def box_index(self, M):
        """Box of each vertex; a position on a cell boundary joins the cell to
        its left, so grid positions ``i/N`` fill every box with ``N/M``
        vertices when ``M`` divides ``N``."""
        return cell_index(self.graph.positions, M, side="left")

    def aggregate(self, M, box=None):
        """Box densities ``(1 / (N/M)) * sum_{i in box k} xi_i``, shape (M, S)."""
        S = self.model.n_states
        box = self.box_index(M) if box is None else box
        c = np.bincount(box * S + self.vertex_state, minlength=M * S).reshape(M, S)
        return c * (M / self.graph.n)

    def mean_density(self):
        return np.bincount(self.vertex_state, minlength=self.model.n_states) / self.graph.n

    # -- evolution ------------------------------------------------------------

    def _refill(self):
        left = self._u[self._upos[0] :]
        self._u = np.concatenate([left, self._rng.random(_UNIFORM_CHUNK)])
        self._upos[0] = 0

    def _advance(self, t_stop, max_events):
        while True:
            status, k = _engine.advance(
                self.vertex_state, self.counts, self.vertex_total_rate, self.tree, self._cap,
                self._indptr, self._indices, self._base, self._inter, self.scale,
                self._clock, t_stop, max_events, self._u, self._upos,
                self._nodes, self._mark, self._stamp, self._last,
            )
            self.n_events += k
            max_events -= k
            if status == _engine.NEED_RANDOMS:
                self._refill()
                continue
            return status

    def step(self):
        """Perform one transition, or return :data:`ABSORBED`."""
        status = self._advance(np.inf, 1)
        if status == _engine.ABSORBED:
            return ABSORBED
        v, f, t = (int(x) for x in self._last)
        return TransitionEvent(self.time, v, f, t)

    def advance_to(self, t):
        """Evolve until time ``t`` (the state at ``t`` is exact in law)."""
        if t > self.time:
            self._advance(float(t), np.iinfo(np.int64).max)

    def run(self, T, record_grid_M=1, record_dt=None):
        """Evolve to time ``T``, recording box densities every ``record_dt``."""
        if T <= 0:
            raise ModelError("T must be positive")
        record_dt = T if record_dt is None else float(record_dt)
        if record_dt <= 0 or record_grid_M < 1:
            raise ModelError("record_dt and record_grid_M must be positive")
        t0 = self.time
        n_rec = int(np.floor((T - t0) / record_dt + 1e-9)) + 1
        times = t0 + record_dt * np.arange(n_rec)
        box = self.box_index(record_grid_M)
        dens = np.empty((n_rec, record_grid_M, self.model.n_states))
        mean = np.empty((n_rec, self.model.n_states))
        for r, t in enumerate(times):
            self.advance_to(t)
            dens[r] = self.aggregate(record_grid_M, box)
            mean[r] = self.mean_density()
        self.advance_to(T)
        return Trajectory(times, dens, mean, self.model.states, self.n_events)


def init_process(graph, model, initial, seed=0):
    """Set up a process on ``graph`` at time 0.

    ``initial`` is an :class:`Explicit`, :class:`FromDensity`,
    :class:`DegreeZero`, a per-vertex state array, a StepFunction density, or
    the string ``"degree_zero"``.
    """
    rng = make_rng(derive_seed(seed, "initial"))
    states = _initial_states(graph, model, initial, rng)
    return MarkovProcess(graph, model, states, seed=seed)


def run(process, T, record_grid_M=1, record_dt=None):
    return process.run(T, record_grid_M, record_dt)


def step(process):
    return process.step()
