"""Agents, communication graphs and recurrently connected link failures.

Agent ``i`` controls ``x_i``. Dual variable ``z_l`` is integrated by its
owner, the lowest-index agent with a nonzero coefficient in row ``l``.
Agent ids are 0-based in the API and 1-based in JSON files.

During an interval ``[t_k, t_{k+1})`` with failing edges ``F(k)``, an
agent reads a neighbour's ``x_j`` (or an owner's ``z_l``) from the
snapshot taken at ``t_k`` whenever the connecting edge is in ``F(k)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import IntegratorConfig, Trajectory, _check_nonnegative, _residual_parts, _sampler, fresh_velocity, run_euler
from .errors import InvalidInput, ZeroRow
from .lp_model import PrimalDualState, StandardFormLP, ValidationReport


def _edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class CommGraph:
    n_agents: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        if self.n_agents < 1:
            raise InvalidInput("graph needs at least one agent")
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise InvalidInput(f"self-loop at agent {i + 1}")
            if not (0 <= i < self.n_agents and 0 <= j < self.n_agents):
                raise InvalidInput(f"edge ({i + 1}, {j + 1}) outside 1..{self.n_agents}")
            norm.add(_edge(int(i), int(j)))
        object.__setattr__(self, "edges", frozenset(norm))

    def has_edge(self, i: int, j: int) -> bool:
        return _edge(i, j) in self.edges

    def neighbors(self, i: int) -> list[int]:
        return sorted({j for e in self.edges for j in e if i in e and j != i})

    @classmethod
    def complete(cls, n: int) -> "CommGraph":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def from_coupling(cls, A: np.ndarray) -> "CommGraph":
        """Smallest graph connected with respect to ``A``: one edge per coupled pair."""
        edges = set()
        for row in np.asarray(A):
            nz = np.flatnonzero(row)
            edges.update((int(i), int(j)) for k, i in enumerate(nz) for j in nz[k + 1:])
        return cls(np.asarray(A).shape[1], frozenset(edges))

    def to_dict(self) -> dict:
        return {"n": self.n_agents, "edges": [[i + 1, j + 1] for i, j in sorted(self.edges)]}


def graph_from_dict(data: dict) -> CommGraph:
    try:
        n = int(data["n"])
        edges = [(int(i) - 1, int(j) - 1) for i, j in data.get("edges", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"graph JSON needs 'n' and 'edges' as 1-based pairs ({exc})") from None
    return CommGraph(n, frozenset(edges))


@dataclass(frozen=True)
class FailureSchedule:
    """Breakpoints ``t_0 < t_1 < ...`` and the edges down on each interval.

    ``failing[k]`` applies on ``[t_k, t_{k+1})``; odd intervals must be
    failure-free. Before ``t_0`` and after the last breakpoint the base
    graph is fully available.
    """

    breakpoints: tuple
    failing: tuple
    base_graph: CommGraph

    def __post_init__(self):
        bps = tuple(float(t) for t in self.breakpoints)
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise InvalidInput("breakpoints must be strictly increasing")
        if bps and bps[0] < 0:
            raise InvalidInput("breakpoints must be nonnegative")
        failing = tuple(frozenset(_edge(*e) for e in f) for f in self.failing)
        if len(failing) > len(bps):
            raise InvalidInput("more failure sets than intervals")
        failing = failing + (frozenset(),) * (len(bps) - len(failing))
        for k, f in enumerate(failing):
            if f and k % 2 == 1:
                raise InvalidInput(f"interval {k} must be connected (odd intervals have no failures)")
            if not f <= self.base_graph.edges:
                raise InvalidInput(f"interval {k} fails edges outside the base graph")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "failing", failing)

    @classmethod
    def alternating(cls, base_graph: CommGraph, disconnected: float, connected: float, cycles: int,
                    start: float = 0.0, fail: str = "all", seed: int = 0) -> "FailureSchedule":
        """``cycles`` repetitions of a failure window followed by a connected window.

        ``fail="all"`` drops every base edge during failure windows;
        ``fail="random"`` drops a random number of random edges.
        """
        if disconnected <= 0 or connected <= 0:
            raise InvalidInput("interval lengths must be positive")
        rng = np.random.default_rng(seed)
        edges = sorted(base_graph.edges)
        bps, failing = [], []
        t = start
        for _ in range(cycles):
            bps += [t, t + disconnected]
            if fail == "all":
                down = frozenset(edges)
            elif fail == "random":
                count = int(rng.integers(0, len(edges) + 1)) if edges else 0
                down = frozenset(edges[i] for i in rng.choice(len(edges), size=count, replace=False)) if count else frozenset()
            else:
                raise InvalidInput(f"unknown failure mode {fail!r}")
            failing += [down, frozenset()]
            t += disconnected + connected
        return cls(tuple(bps), tuple(failing), base_graph)

    @property
    def t_disc_max(self) -> float:
        bps = self.breakpoints
        return max((bps[k + 1] - bps[k] for k in range(0, len(bps) - 1, 2)), default=0.0)

    def interval_at(self, t: float) -> int:
        """Index ``k`` with ``t`` in ``[t_k, t_{k+1})``; -1 before ``t_0``."""
        return int(np.searchsorted(self.breakpoints, t, side="right")) - 1

    def failed_at(self, t: float) -> frozenset:
        k = self.interval_at(t)
        return self.failing[k] if k >= 0 else frozenset()

    def checkpoints(self) -> list[float]:
        """The even breakpoints ``t_{2k}`` at which convergence is assessed."""
        return list(self.breakpoints[0::2])

    @classmethod
    def none(cls, base_graph: CommGraph) -> "FailureSchedule":
        return cls((), (), base_graph)


def schedule_from_dict(data: dict, base_graph: CommGraph) -> FailureSchedule:
    """Parse one of the schedule JSON forms.

    * ``{"breakpoints": [...], "fail_all": true}``
    * ``{"breakpoints": [...], "failing": [[k, [[i, j], ...]], ...]}``
    * ``{"alternating": {"disconnected": 4, "connected": 1, "cycles": 40, "fail": "all", "seed": 0}}``
    """
    if "alternating" in data:
        p = data["alternating"]
        return FailureSchedule.alternating(base_graph, float(p["disconnected"]), float(p["connected"]),
                                           int(p["cycles"]), float(p.get("start", 0.0)),
                                           p.get("fail", "all"), int(p.get("seed", 0)))
    bps = data.get("breakpoints")
    if bps is None:
        raise InvalidInput("schedule needs 'breakpoints' or 'alternating'")
    if data.get("fail_all"):
        failing = [base_graph.edges if k % 2 == 0 else frozenset() for k in range(len(bps))]
    else:
        failing = [frozenset()] * len(bps)
        for k, pairs in data.get("failing", []):
            if not 0 <= int(k) < len(bps):
                raise InvalidInput(f"failure interval {k} out of range")
            failing[int(k)] = frozenset(_edge(int(i) - 1, int(j) - 1) for i, j in pairs)
    return FailureSchedule(tuple(bps), tuple(failing), base_graph)


@dataclass
class StaleCache:
    x_snapshot: np.ndarray
    z_snapshot: np.ndarray
    snapshot_time: float = 0.0

    @classmethod
    def of(cls, s: PrimalDualState, t: float = 0.0) -> "StaleCache":
        return cls(np.array(s.x), np.array(s.z), t)


def is_connected_wrt(g: CommGraph, A: np.ndarray) -> bool:
    """Every pair of agents sharing a constraint row must be adjacent."""
    A = np.asarray(A)
    if g.n_agents != A.shape[1]:
        raise InvalidInput(f"graph has {g.n_agents} agents but A has {A.shape[1]} columns")
    for row in A:
        nz = np.flatnonzero(row)
        for k, i in enumerate(nz):
            for j in nz[k + 1:]:
                if not g.has_edge(int(i), int(j)):
                    return False
    return True


def z_owner(A: np.ndarray, row: int) -> int:
    nz = np.flatnonzero(np.asarray(A)[row])
    if nz.size == 0:
        raise ZeroRow(f"row {row + 1} of A is zero and has no owner")
    return int(nz[0])


def owners(A: np.ndarray) -> np.ndarray:
    return np.array([z_owner(A, ell) for ell in range(np.asarray(A).shape[0])], dtype=int)


def validate_distributed(lp: StandardFormLP, g: CommGraph) -> ValidationReport:
    """Check that the dynamics can run on ``g`` and list what each agent must know."""
    report = ValidationReport()
    A = lp.A
    if g.n_agents != lp.n:
        report.error(f"graph has {g.n_agents} agents but the program has {lp.n} variables")
        return report
    missing = []
    for ell, row in enumerate(A):
        nz = np.flatnonzero(row)
        missing += [(int(i), int(j), ell) for k, i in enumerate(nz) for j in nz[k + 1:] if not g.has_edge(int(i), int(j))]
    if missing:
        pairs = ", ".join(f"({i + 1},{j + 1}) via row {ell + 1}" for i, j, ell in missing[:10])
        report.error(f"violates (D3): graph is not connected with respect to A; missing {pairs}")
    zero_rows = [ell for ell in range(lp.m) if not np.any(A[ell])]
    if zero_rows:
        report.error(f"zero rows {[r + 1 for r in zero_rows]} have no owner")
        return report
    own = owners(A)
    for i in range(lp.n):
        rows = np.flatnonzero(A[:, i]).tolist()
        owned = [ell + 1 for ell in range(lp.m) if own[ell] == i]
        report.info(
            f"agent {i + 1}: knows c_{i + 1}, b and nonzero coefficients of rows {[r + 1 for r in rows]} (D1); "
            f"controls x_{i + 1} (D2); tracks z {[r + 1 for r in rows]}; owns z {owned}"
        )
    report.info("(D4) agents read neighbour variables over the graph edges")
    return report


def _failure_matrix(n: int, failed) -> np.ndarray:
    F = np.zeros((n, n), dtype=bool)
    for i, j in failed:
        F[i, j] = F[j, i] = True
    return F


def _rcg_velocity_arrays(A, AT, b, c, own, x, z, x_snap, z_snap, F):
    f, r, slack = fresh_velocity(A, AT, b, c, x, z)
    res = _residual_parts(r, slack, x, z, b, c)
    if F is None:
        return f, r, res
    # corrections relative to fresh information vanish exactly when nothing is stale
    dx = np.where(F, x_snap - x, 0.0)  # dx[i, j]: agent i's error on x_j
    dz = np.where(F[:, own], z_snap - z, 0.0)  # dz[i, l]: agent i's error on z_l
    r_err = dx @ AT  # r_err[i, l]: agent i's error on row l of Ax - b
    f = f - np.einsum("li,il->i", A, dz + r_err)
    zdot = r + r_err[own, np.arange(A.shape[0])]
    return f, zdot, res


def rcg_velocity(lp: StandardFormLP, s: PrimalDualState, cache: StaleCache, failed) -> tuple[np.ndarray, np.ndarray]:
    """Velocity of the dynamics with stale reads across the ``failed`` edges."""
    _check_nonnegative(s.x)
    F = _failure_matrix(lp.n, failed) if failed else None
    f, zdot, _ = _rcg_velocity_arrays(lp.A, lp.A.T, lp.b, lp.c, owners(lp.A),
                                      np.asarray(s.x), np.asarray(s.z), cache.x_snapshot, cache.z_snapshot, F)
    return np.where(s.x > 0, f, np.maximum(0.0, f)), zdot


@dataclass
class _Clock:
    """Maps step indices to schedule intervals and keeps the snapshot cache."""

    schedule: FailureSchedule
    dt: float
    n: int
    snap_steps: dict = field(default_factory=dict)
    matrices: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, t in enumerate(self.schedule.breakpoints):
            self.snap_steps.setdefault(int(round(t / self.dt)), k)
        for k, f in enumerate(self.schedule.failing):
            self.matrices[k] = _failure_matrix(self.n, f) if f else None


def rcg_integrate(
    lp: StandardFormLP,
    g: CommGraph,
    sched: FailureSchedule,
    s0: PrimalDualState,
    cfg: IntegratorConfig,
    dist=None,
    *,
    star: PrimalDualState | None = None,
) -> Trajectory:
    """Euler integration under a recurrently connected graph.

    The snapshot cache refreshes at the first step on or after every
    breakpoint. The returned trajectory carries ``extras["checkpoints"]``
    (times ``t_{2k}`` reached) and ``extras["checkpoint_residuals"]``.
    """
    if not is_connected_wrt(g, lp.A):
        raise InvalidInput("base graph is not connected with respect to A")
    if sched.base_graph != g:
        raise InvalidInput("schedule was built for a different base graph")
    A, AT, b, c = lp.A, np.ascontiguousarray(lp.A.T), lp.b, lp.c
    own = owners(A)
    clock = _Clock(sched, cfg.dt, lp.n)
    state = {"k": -1, "x": np.array(s0.x), "z": np.array(s0.z)}
    checkpoints, residuals = [], []

    def velocity(step, x, z):
        if step in clock.snap_steps:
            state["k"] = clock.snap_steps[step]
            state["x"], state["z"] = x, z
            if state["k"] % 2 == 0:
                checkpoints.append(step * cfg.dt)
                residuals.append(_residual_parts(A @ x - b, AT @ z + c, x, z, b, c))
        F = clock.matrices.get(state["k"]) if state["k"] >= 0 else None
        return _rcg_velocity_arrays(A, AT, b, c, own, x, z, state["x"], state["z"], F)

    traj = run_euler(lp, s0, cfg, velocity, _sampler(dist, cfg.dt), star=star)
    traj.extras["checkpoints"] = checkpoints
    traj.extras["checkpoint_residuals"] = residuals
    return traj


def search_connected_length(lp: StandardFormLP, g: CommGraph, s0: PrimalDualState, disconnected: float,
                            cfg: IntegratorConfig, cycles: int = 10, start: float = 0.25,
                            max_doublings: int = 12) -> tuple[float, list[float]]:
    """Double the connected window until checkpoint residuals strictly decrease.

    Failure windows drop every base edge. Returns the first sufficient
    connected length and its checkpoint residuals (from the first
    reconnection on). Residuals already below ``1e-12`` count as settled.
    """
    length = start
    for _ in range(max_doublings):
        sched = FailureSchedule.alternating(g, disconnected, length, cycles)
        horizon = cycles * (disconnected + length)
        run_cfg = IntegratorConfig(cfg.dt, horizon, 0.0, cfg.record_every)
        res = rcg_integrate(lp, g, sched, s0, run_cfg).extras["checkpoint_residuals"][1:]
        if all(b < a or a < 1e-12 for a, b in zip(res, res[1:])):
            return length, res
        length *= 2
    raise InvalidInput(f"no connected length up to {length / 2:g} s gave decreasing residuals")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from None
