"""Scenario runner, optimal-control reduction and the no-ISS construction."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import oracle
from .disturbances import DisturbanceSignal, disturbance_from_dict
from .dynamics import IntegratorConfig, Trajectory, integrate
from .errors import BoundedFeasibleSet, InvalidInput
from .lp_model import (
    PerturbationVector,
    PrimalDualState,
    StandardFormLP,
    kkt_residual,
    lp_from_dict,
    load_lp,
    perturbed_program,
    require_valid,
)
from .network import CommGraph, FailureSchedule, graph_from_dict, rcg_integrate, schedule_from_dict, validate_distributed

log = logging.getLogger(__name__)

BLOCKS = ("x_plus", "x_minus", "u_plus", "u_minus")


@dataclass(frozen=True, eq=False)
class OptimalControlSpec:
    """``min sum_tau |x(tau+1)|_1 + |u(tau)|_1`` s.t. ``x(tau+1) = G x(tau) + diag(h) u(tau)``."""

    G: np.ndarray
    H_diag: np.ndarray
    x0: np.ndarray
    T: int

    def __post_init__(self):
        G = np.array(self.G, dtype=float, ndmin=2)
        h = np.array(self.H_diag, dtype=float, ndmin=1)
        x0 = np.array(self.x0, dtype=float, ndmin=1)
        N = G.shape[0]
        if G.shape != (N, N) or h.shape != (N,) or x0.shape != (N,):
            raise InvalidInput("G must be N x N and H_diag, x0 of length N")
        if int(self.T) != self.T or self.T < 0:
            raise InvalidInput("T must be a nonnegative integer")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H_diag", h)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "T", int(self.T))

    @property
    def N(self) -> int:
        return self.G.shape[0]

    def var_index(self, agent: int, tau: int, block: str) -> int:
        """Column of ``block`` for ``agent`` at step ``tau`` (states are ``x(tau+1)``)."""
        return (agent * (self.T + 1) + tau) * 4 + BLOCKS.index(block)

    def row_index(self, agent: int, tau: int) -> int:
        return agent * (self.T + 1) + tau

    def agent_variables(self, agent: int) -> dict[str, list[int]]:
        """Columns owned by ``agent``, split into control and state variables."""
        ctrl = [self.var_index(agent, t, b) for t in range(self.T + 1) for b in ("u_plus", "u_minus")]
        state = [self.var_index(agent, t, b) for t in range(self.T + 1) for b in ("x_plus", "x_minus")]
        return {"controls": ctrl, "states": state}


def spec_from_dict(data: dict) -> OptimalControlSpec:
    try:
        return OptimalControlSpec(data["G"], data["H_diag"], data["x0"], data["T"])
    except KeyError as exc:
        raise InvalidInput(f"optimal-control spec missing {exc}") from None


def build_optimal_control_lp(spec: OptimalControlSpec) -> StandardFormLP:
    N, T = spec.N, spec.T
    n, m = 4 * N * (T + 1), N * (T + 1)
    A = np.zeros((m, n))
    b = np.zeros(m)
    for i in range(N):
        for tau in range(T + 1):
            row = spec.row_index(i, tau)
            A[row, spec.var_index(i, tau, "x_plus")] = 1.0
            A[row, spec.var_index(i, tau, "x_minus")] = -1.0
            A[row, spec.var_index(i, tau, "u_plus")] = -spec.H_diag[i]
            A[row, spec.var_index(i, tau, "u_minus")] = spec.H_diag[i]
            if tau == 0:
                b[row] = spec.G[i] @ spec.x0
                continue
            for j in np.flatnonzero(spec.G[i]):
                A[row, spec.var_index(j, tau - 1, "x_plus")] -= spec.G[i, j]
                A[row, spec.var_index(j, tau - 1, "x_minus")] += spec.G[i, j]
    return StandardFormLP(A, b, np.ones(n), name=f"optctrl-N{N}-T{T}")


def _block(x_solution, spec, block):
    x = np.asarray(x_solution)
    return np.array([[x[spec.var_index(i, t, block)] for i in range(spec.N)] for t in range(spec.T + 1)])


def extract_controls(x_solution, spec: OptimalControlSpec) -> np.ndarray:
    """Controls ``u(0..T)`` as a ``(T+1, N)`` array."""
    return _block(x_solution, spec, "u_plus") - _block(x_solution, spec, "u_minus")


def extract_states(x_solution, spec: OptimalControlSpec) -> np.ndarray:
    return _block(x_solution, spec, "x_plus") - _block(x_solution, spec, "x_minus")


def rollout(spec: OptimalControlSpec, controls) -> np.ndarray:
    """States ``x(1..T+1)`` as a ``(T+1, N)`` array."""
    u = np.asarray(controls, dtype=float).reshape(-1, spec.N)
    if u.shape[0] != spec.T + 1:
        raise InvalidInput(f"need {spec.T + 1} controls, got {u.shape[0]}")
    xs, x = [], spec.x0
    for tau in range(spec.T + 1):
        x = spec.G @ x + spec.H_diag * u[tau]
        xs.append(x)
    return np.array(xs)


def control_cost(spec: OptimalControlSpec, controls) -> float:
    u = np.asarray(controls).reshape(-1, spec.N)
    return float(np.abs(rollout(spec, u)).sum() + np.abs(u).sum())


def optimal_control_graph(spec: OptimalControlSpec) -> CommGraph:
    """Links among all variables of subsystems whose dynamics are coupled through G.

    Two subsystems count as coupled when both enter the update of some
    subsystem, which is what connectivity with respect to A requires.
    """
    B = ((spec.G != 0) | np.eye(spec.N, dtype=bool)).astype(int)
    coupled = (B.T @ B) > 0
    cols = {i: [spec.var_index(i, t, blk) for t in range(spec.T + 1) for blk in BLOCKS] for i in range(spec.N)}
    edges = set()
    for i, j in zip(*np.nonzero(coupled)):
        for p in cols[i]:
            edges.update((p, q) for q in cols[j] if q != p)
    return CommGraph(4 * spec.N * (spec.T + 1), frozenset(edges))


def five_agent_spec(T: int = 11) -> OptimalControlSpec:
    """Synthesised underactuated, open-loop unstable and controllable 5-agent network.

    Agents are coupled along a ring; only agents 1 and 4 carry actuators.
    """
    G = np.array([
        [1.05, 0.20, 0.00, 0.00, 0.15],
        [0.20, 0.90, 0.20, 0.00, 0.00],
        [0.00, 0.20, 1.02, 0.20, 0.00],
        [0.00, 0.00, 0.20, 0.95, 0.20],
        [0.15, 0.00, 0.00, 0.20, 1.00],
    ])
    return OptimalControlSpec(G, [1.0, 0.0, 0.0, 1.0, 0.0], [1.0, -0.5, 0.8, 0.3, -0.6], T)


@dataclass
class IssCertificate:
    w_bar: PerturbationVector
    x_hat: np.ndarray
    nu: np.ndarray
    eta: np.ndarray
    z_bar: np.ndarray
    samples: list = field(default_factory=list)  # dicts: lam, point, perturbed_kkt, distance

    def to_dict(self) -> dict:
        return {
            "w_bar": {"w_x": self.w_bar.w_x.tolist(), "w_z": self.w_bar.w_z.tolist()},
            "x_hat": self.x_hat.tolist(),
            "nu": self.nu.tolist(),
            "eta": self.eta.tolist(),
            "z_bar": self.z_bar.tolist(),
            "samples": [{**s, "point": np.asarray(s["point"]).tolist()} for s in self.samples],
        }


def iss_counterexample(lp: StandardFormLP, lambdas=(0.0, 1.0, 10.0, 100.0), budget: int = oracle.DEFAULT_BUDGET) -> IssCertificate:
    """Constant disturbance whose perturbed program has an unbounded solution set.

    Picks a feasible vertex ``x_hat`` and an extreme ray ``nu`` of the
    feasible set, then the cost ``eta = A^T 1 + s`` where ``s`` is the
    indicator of coordinates outside ``supp(x_hat) | supp(nu)``. Every
    point ``x_hat + lam * nu`` minimises ``eta^T x`` over the feasible set,
    and ``w_x = c - eta`` (with ``w_z = 0``) turns the cost into ``eta``.
    """
    require_valid(lp)
    A = lp.A
    rays = oracle.recession_rays(A, budget)
    if not rays:
        raise BoundedFeasibleSet("feasible set is bounded; only the primal construction is implemented")
    # any feasible vertex works; the zero-cost program yields the lexicographically first one
    x_hat = oracle.solve_primal_dual(StandardFormLP(A, lp.b, np.zeros(lp.n)), budget).x_star
    nu = rays[0] / np.linalg.norm(rays[0])
    support = (x_hat > 1e-12) | (nu > 1e-12)
    s = (~support).astype(float)
    y0 = np.ones(lp.m)
    if np.linalg.norm(A.T @ y0) < 1e-9:
        y0 = np.eye(lp.m)[0]
    eta = A.T @ y0 + s
    w_bar = PerturbationVector(lp.c - eta, np.zeros(lp.m))
    pert = perturbed_program(lp, w_bar)
    sol = oracle.solve_primal_dual(pert, budget)
    base = oracle.solve_primal_dual(lp, budget)
    cert = IssCertificate(w_bar, x_hat, nu, eta, sol.z_star)
    for lam in lambdas:
        point = x_hat + lam * nu
        dist = min(np.linalg.norm(point - v) for v in base.primal_vertices)
        cert.samples.append({
            "lam": float(lam),
            "point": point,
            "perturbed_kkt": kkt_residual(pert, PrimalDualState(point, sol.z_star)),
            "distance": float(dist),
        })
    return cert


@dataclass
class ScenarioConfig:
    lp: StandardFormLP
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    disturbance: DisturbanceSignal | None = None
    initial: PrimalDualState | None = None
    graph: CommGraph | None = None
    schedule: FailureSchedule | None = None
    out_dir: Path | None = None
    optimal_control: OptimalControlSpec | None = None

    def __post_init__(self):
        if self.schedule is not None and self.graph is None:
            raise InvalidInput("a failure schedule requires a graph")


@dataclass
class RunMetrics:
    terminal_kkt: float
    terminal_value_gap: float | None
    time_to_tol: float | None
    steps: int
    perturbed_kkt: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _initial_from_dict(data, lp, sol) -> PrimalDualState:
    if not data:
        return PrimalDualState.zeros(lp)
    if data.get("at_optimum"):
        if sol is None:
            raise InvalidInput("initial.at_optimum needs an oracle solution")
        return PrimalDualState(sol.x_star, sol.z_star)
    if "seed" in data:
        rng = np.random.default_rng(int(data["seed"]))
        return PrimalDualState(rng.uniform(0, 1, lp.n), rng.uniform(-1, 1, lp.m))
    x = np.asarray(data.get("x", np.zeros(lp.n)), dtype=float)
    z = np.asarray(data.get("z", np.zeros(lp.m)), dtype=float)
    if x.shape != (lp.n,) or z.shape != (lp.m,):
        raise InvalidInput("initial x/z have the wrong length")
    return PrimalDualState(x, z)


def load_scenario(path) -> tuple[ScenarioConfig, dict]:
    """Read a scenario JSON; relative file references resolve against its folder.

    Returns the config and the raw ``initial`` block, which may need the
    oracle solution to resolve.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read scenario {path}: {exc}") from None
    return scenario_from_dict(data, base=path.parent)


def scenario_from_dict(data: dict, base: Path = Path(".")) -> tuple[ScenarioConfig, dict]:
    spec = None
    if "optimal_control" in data:
        spec = spec_from_dict(data["optimal_control"])
        lp = build_optimal_control_lp(spec)
    elif "lp" in data:
        lp = lp_from_dict(data["lp"])
    elif "lp_file" in data:
        lp = load_lp(base / data["lp_file"])
    else:
        raise InvalidInput("scenario needs 'lp', 'lp_file' or 'optimal_control'")
    require_valid(lp)
    try:
        integ = IntegratorConfig(**data.get("integrator", {}))
    except TypeError as exc:
        raise InvalidInput(f"bad integrator settings: {exc}") from None
    dist = disturbance_from_dict(data.get("disturbance"), lp.n, lp.m)
    graph = schedule = None
    if "graph" in data:
        graph = graph_from_dict(data["graph"])
    elif spec is not None and "schedule" in data:
        graph = optimal_control_graph(spec)
    if "schedule" in data:
        if graph is None:
            raise InvalidInput("a failure schedule requires a graph")
        schedule = schedule_from_dict(data["schedule"], graph)
    out = data.get("output", {}).get("dir")
    cfg = ScenarioConfig(lp, integ, dist, None, graph, schedule, base / out if out else None, spec)
    return cfg, data.get("initial", {})


def run_scenario(cfg: ScenarioConfig, initial: dict | None = None) -> tuple[RunMetrics, Trajectory]:
    """Run one experiment and write ``trajectory.csv`` and ``metrics.json`` if ``out_dir`` is set."""
    lp = require_valid(cfg.lp)
    if cfg.graph is not None:
        report = validate_distributed(lp, cfg.graph)
        for msg in report.errors:
            log.warning(msg)
    sol = oracle.solve(lp)
    s0 = cfg.initial or _initial_from_dict(initial, lp, sol)
    star = PrimalDualState(sol.x_star, sol.z_star)

    dist = cfg.disturbance
    limit = dist.limit if dist is not None and dist.kind in ("constant", "finite_variation") else None
    pert = perturbed_program(lp, limit) if limit is not None else None
    target = pert if pert is not None else lp
    if cfg.schedule is not None:
        traj = rcg_integrate(lp, cfg.graph, cfg.schedule, s0, cfg.integrator, dist, star=star)
    else:
        traj = integrate(lp, s0, cfg.integrator, dist, star=star, target=target)

    final = traj.terminal
    metrics = RunMetrics(
        terminal_kkt=kkt_residual(lp, final),
        terminal_value_gap=abs(float(lp.c @ final.x) - sol.optimal_value),
        time_to_tol=traj.time_to_tol,
        steps=traj.steps,
        perturbed_kkt=kkt_residual(pert, final) if pert is not None else None,
    )
    if cfg.out_dir is not None:
        write_outputs(cfg.out_dir, metrics, traj)
    return metrics, traj


def write_outputs(out_dir, metrics: RunMetrics, traj: Trajectory) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "trajectory.csv")
    (out / "metrics.json").write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")


def basis_sigma(lp: StandardFormLP, sol: oracle.OracleSolution) -> float:
    """Smallest singular value of the optimal basis matrix behind ``sol.x_star``.

    The local convergence rate of the dynamics scales with its square.
    """
    if not sol.optimal_bases:
        return math.nan
    return float(np.linalg.svd(lp.A[:, list(sol.optimal_bases[0])], compute_uv=False).min())


def random_lp(rng: np.random.Generator, n_max: int = 8, m_max: int = 4, max_tries: int = 200,
              min_sigma: float = 0.0) -> StandardFormLP:
    """Random feasible program with a bounded primal-dual solution set.

    Entries of A and c are uniform on [-2, 2]; ``b = A x_feas`` with a
    nonnegative ``x_feas``. Draws failing the oracle checks, or whose
    optimal basis has :func:`basis_sigma` below ``min_sigma``, are rejected.
    """
    for _ in range(max_tries):
        m = int(rng.integers(1, m_max + 1))
        n = int(rng.integers(m + 1, n_max + 1))
        A = rng.uniform(-2, 2, (m, n))
        x_feas = rng.uniform(0, 1, n)
        lp = StandardFormLP(A, A @ x_feas, rng.uniform(-2, 2, n), name=f"random-{m}x{n}")
        try:
            sol = oracle.solve_primal_dual(lp)
        except (oracle.Unbounded, oracle.Infeasible):
            continue
        if oracle.is_solution_set_bounded(lp, sol) and not basis_sigma(lp, sol) < min_sigma:
            return lp
    raise RuntimeError("could not draw a bounded random program")


def seeded_perturbation(rng: np.random.Generator, n: int, m: int, radius: float) -> PerturbationVector:
    """Uniform direction with norm drawn uniformly in ``[0, radius]``."""
    v = rng.standard_normal(n + m)
    v *= rng.uniform(0, radius) / np.linalg.norm(v)
    return PerturbationVector(v[:n], v[n:])


def distance(a: PrimalDualState, b: PrimalDualState) -> float:
    return math.sqrt(float(np.sum((a.x - b.x) ** 2) + np.sum((a.z - b.z) ** 2)))
