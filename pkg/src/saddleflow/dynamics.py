"""Discontinuous saddle-point dynamics and its explicit Euler integrator.

The primal velocity is the nominal flow ``-c - A^T(z + Ax - b)`` with a
positive projection on components sitting at zero; the dual velocity is
the constraint residual ``Ax - b``. Running the dynamics never needs the
penalty parameter K; :class:`KParameters` exists for diagnostics only.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidInput, NegativePrimal, NonFinite
from .lp_model import PerturbationVector, PrimalDualState, StandardFormLP, residual_arrays

NEG_TOL = 1e-12


@dataclass(frozen=True)
class KParameters:
    K1: float
    K_star: float

    @property
    def K(self) -> float:
        return max(self.K1, self.K_star)


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step settings.

    ``min_time`` disables the early stop before that simulated time, so a
    run can be made to last past the onset of a late disturbance.
    """

    dt: float = 0.01
    t_max: float = 100.0
    stop_tol: float = 1e-3
    record_every: int = 1
    min_time: float = 0.0

    def __post_init__(self):
        if not 0 < self.dt <= 0.1:
            raise InvalidInput(f"dt must lie in (0, 0.1], got {self.dt}")
        if not self.t_max > 0:
            raise InvalidInput("t_max must be positive")
        if self.stop_tol < 0:
            raise InvalidInput("stop_tol must be nonnegative")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise InvalidInput("record_every must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))


@dataclass
class Trajectory:
    """Recorded samples of a run. Row ``k`` of every array belongs to ``times[k]``.

    ``steps`` counts the Euler steps actually taken; ``time_to_tol`` is the
    first time the residual fell to the stop tolerance (``None`` if never).
    """

    times: np.ndarray
    xs: np.ndarray
    zs: np.ndarray
    lyapunov: np.ndarray
    residuals: np.ndarray
    w_x: np.ndarray
    w_z: np.ndarray
    steps: int = 0
    time_to_tol: float | None = None
    extras: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def states(self) -> list[PrimalDualState]:
        return [PrimalDualState(x, z) for x, z in zip(self.xs, self.zs)]

    @property
    def disturbance_log(self) -> list[PerturbationVector]:
        return [PerturbationVector(wx, wz) for wx, wz in zip(self.w_x, self.w_z)]

    @property
    def terminal(self) -> PrimalDualState:
        return PrimalDualState(self.xs[-1], self.zs[-1])

    def write_csv(self, path) -> None:
        """Columns ``t,x_1..x_n,z_1..z_m,V,kkt`` with 17 significant digits."""
        n, m = self.xs.shape[1], self.zs.shape[1]
        header = ["t", *(f"x_{i + 1}" for i in range(n)), *(f"z_{j + 1}" for j in range(m)), "V", "kkt"]
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(len(self.times)):
                row = [self.times[k], *self.xs[k], *self.zs[k], self.lyapunov[k], self.residuals[k]]
                writer.writerow([f"{v:.17g}" for v in row])


def nominal_flow(lp: StandardFormLP, s: PrimalDualState) -> np.ndarray:
    return fresh_velocity(lp.A, lp.A.T, lp.b, lp.c, np.asarray(s.x), np.asarray(s.z))[0]


def _check_nonnegative(x):
    if np.any(x < -NEG_TOL):
        raise NegativePrimal(f"primal state has negative entries (min {x.min():.3g})")


def projected_velocity(lp: StandardFormLP, s: PrimalDualState, w: PerturbationVector | None = None):
    """Velocity ``(x_dot, z_dot)`` of the disturbed discontinuous dynamics.

    Components with ``x_i > 0`` follow the (disturbed) nominal flow; those
    at zero keep only its positive part.
    """
    _check_nonnegative(s.x)
    f = nominal_flow(lp, s)
    r = lp.A @ s.x - lp.b
    if w is not None:
        f = f + w.w_x
        r = r + w.w_z
    xdot = np.where(s.x > 0, f, np.maximum(0.0, f))
    return xdot, r


def saddle_velocity_interval(lp: StandardFormLP, K: float, s: PrimalDualState):
    """Componentwise bounds ``(lo, hi)`` of the penalised saddle-point inclusion.

    A primal component at zero may move anywhere in ``[f_i, f_i + K]``; a
    strictly negative one is pushed by the full ``K``; the dual components
    are exact.
    """
    if K < 0:
        raise InvalidInput("K must be nonnegative")
    f = nominal_flow(lp, s)
    lo = np.where(s.x < 0, f + K, f)
    hi = np.where(s.x > 0, f, f + K)
    r = lp.A @ s.x - lp.b
    return np.concatenate([lo, r]), np.concatenate([hi, r])


def compute_K1(lp: StandardFormLP, center: PrimalDualState, rho: float) -> float:
    """Exact maximum of ``||f_nom||_inf`` over the ball ``V <= rho`` around ``center``.

    Each component of the nominal flow is affine with gradient equal to
    a row of ``[-A^T A, -A^T]``, so its largest magnitude over a ball of
    radius ``sqrt(2 rho)`` is ``|f_i(center)| + ||row_i|| sqrt(2 rho)``.
    """
    if rho < 0:
        raise InvalidInput("rho must be nonnegative")
    J = -np.hstack([lp.A.T @ lp.A, lp.A.T])
    f0 = np.abs(nominal_flow(lp, center))
    return float(np.max(f0 + np.linalg.norm(J, axis=1) * math.sqrt(2.0 * rho), initial=0.0))


def lyapunov_value(s: PrimalDualState, star: PrimalDualState) -> float:
    dx = s.x - star.x
    dz = s.z - star.z
    return 0.5 * float(dx @ dx + dz @ dz)


def step(lp: StandardFormLP, s: PrimalDualState, dt: float, w: PerturbationVector | None = None) -> PrimalDualState:
    _check_nonnegative(s.x)
    f, r, _ = fresh_velocity(lp.A, lp.A.T, lp.b, lp.c, np.asarray(s.x), np.asarray(s.z))
    if w is not None:
        f = f + w.w_x
        r = r + w.w_z
    return PrimalDualState(*_advance(np.asarray(s.x), np.asarray(s.z), f, r, dt))


def fresh_velocity(A, AT, b, c, x, z):
    """Unprojected primal velocity, the residual ``Ax - b`` and the dual slack ``A^T z + c``."""
    r = A @ x - b
    slack = AT @ z + c
    return -slack - AT @ r, r, slack


def _residual_parts(r, slack, x, z, b, c) -> float:
    return max(
        float(np.abs(r).max(initial=0.0)),
        -float(x.min(initial=0.0)),
        -float(slack.min(initial=0.0)),
        abs(float(slack @ x)),
        abs(float(c @ x + b @ z)),
    )


def _advance(x, z, f, zdot, dt):
    # clamping the Euler update reproduces the projection at x_i = 0
    return np.maximum(0.0, x + dt * f), z + dt * zdot


def k_parameters(lp: StandardFormLP, sol, s0: PrimalDualState, rho: float | None = None) -> KParameters:
    """K1 and K* for runs started at ``s0``; ``rho`` defaults to V(s0) around the oracle pair."""
    from .oracle import compute_K_star

    star = PrimalDualState(sol.x_star, sol.z_star)
    if rho is None:
        rho = lyapunov_value(s0, star)
    rho = max(rho, 1e-12)
    return KParameters(K1=compute_K1(lp, star, rho), K_star=compute_K_star(lp, sol, rho))


# velocity hook: (k, x, z) -> (f, z_dot, residual or None); f and z_dot are
# taken before the nonnegativity clamp and before any disturbance is added
VelocityFn = Callable[[int, np.ndarray, np.ndarray], tuple]


def run_euler(
    lp: StandardFormLP,
    s0: PrimalDualState,
    cfg: IntegratorConfig,
    velocity: VelocityFn,
    sample_w: Callable[[int], PerturbationVector | None],
    star: PrimalDualState | None = None,
    target: StandardFormLP | None = None,
) -> Trajectory:
    """Shared fixed-step loop used by the plain and the link-failure integrators.

    When ``target`` is given, its residual replaces the one returned by
    ``velocity``.
    """
    _check_nonnegative(s0.x)
    x = np.array(s0.x, dtype=float)
    z = np.array(s0.z, dtype=float)
    n, m = x.size, z.size
    times, xs, zs, kkts, ws = [], [], [], [], {}
    time_to_tol = None
    steps = 0
    dt, tol, every, last = cfg.dt, cfg.stop_tol, cfg.record_every, cfg.n_steps

    for k in range(last + 1):
        t = k * dt
        f, zdot, res = velocity(k, x, z)
        if target is not None or res is None:
            tgt = target or lp
            res = residual_arrays(tgt.A, tgt.b, tgt.c, x, z)
        if res <= tol and time_to_tol is None:
            time_to_tol = t
        stop = k == last or (res <= tol and t >= cfg.min_time)
        w = sample_w(k)
        if k % every == 0 or stop:
            times.append(t)
            xs.append(x)
            zs.append(z)
            kkts.append(res)
            if w is not None:
                ws[len(times) - 1] = w
        if stop:
            break
        if w is not None:
            f = f + w.w_x
            zdot = zdot + w.w_z
        x, z = _advance(x, z, f, zdot, dt)
        steps += 1
        if not (np.isfinite(x).all() and np.isfinite(z).all()):
            raise NonFinite(f"state became non-finite at t={t + dt:.6g}; reduce dt")

    X = np.array(xs).reshape(-1, n)
    Z = np.array(zs).reshape(-1, m)
    if star is None:
        V = np.full(len(times), math.nan)
    else:
        V = 0.5 * (((X - star.x) ** 2).sum(axis=1) + ((Z - star.z) ** 2).sum(axis=1))
    WX = np.zeros_like(X)
    WZ = np.zeros_like(Z)
    for idx, w in ws.items():
        WX[idx], WZ[idx] = w.w_x, w.w_z
    return Trajectory(
        times=np.array(times),
        xs=X,
        zs=Z,
        lyapunov=V,
        residuals=np.array(kkts),
        w_x=WX,
        w_z=WZ,
        steps=steps,
        time_to_tol=time_to_tol,
    )


def integrate(
    lp: StandardFormLP,
    s0: PrimalDualState,
    cfg: IntegratorConfig,
    dist=None,
    *,
    star: PrimalDualState | None = None,
    target: StandardFormLP | None = None,
) -> Trajectory:
    """Euler integration of the (disturbed) discontinuous dynamics.

    Parameters
    ----------
    dist : DisturbanceSignal, optional
        Sampled at the start of each step; ``None`` means no disturbance.
    star : PrimalDualState, optional
        Center of the recorded Lyapunov values (NaN when omitted).
    target : StandardFormLP, optional
        Program whose KKT residual is recorded and tested against
        ``cfg.stop_tol``; defaults to ``lp``. Pass the perturbed program
        to stop on convergence under a constant disturbance.
    """
    A, AT, b, c = lp.A, np.ascontiguousarray(lp.A.T), lp.b, lp.c

    def velocity(k, x, z):
        f, r, slack = fresh_velocity(A, AT, b, c, x, z)
        return f, r, _residual_parts(r, slack, x, z, b, c)

    return run_euler(lp, s0, cfg, velocity, _sampler(dist, cfg.dt), star=star, target=target)


def _sampler(dist, dt):
    if dist is None or getattr(dist, "kind", None) == "zero":
        return lambda k: None
    return lambda k: dist.sample(k * dt)
