"""Exact primal-dual solutions of small programs by basis enumeration.

Every column subset of size rank(A) is tried. Primal-feasible bases give
the candidate vertices; the same bases give the dual vertices
``z = -A_B^{-T} c_B``. Extreme rays of ``{Ad = 0, d >= 0}`` are found the
same way on the system ``[A; 1^T] d = [0; 1]``.

For programs too large to enumerate, :func:`solve_reference` wraps the
HiGHS solver shipped with scipy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import BudgetExceeded, Infeasible, InvalidInput, NumericalFailure, Unbounded, UnboundedSolutionSet
from .lp_model import StandardFormLP, require_valid, residual_arrays

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-10
DEFAULT_BUDGET = 200_000


@dataclass
class OracleSolution:
    x_star: np.ndarray
    z_star: np.ndarray
    optimal_value: float
    optimal_bases: list[tuple[int, ...]] = field(default_factory=list)
    dual_vertices: list[np.ndarray] = field(default_factory=list)
    primal_vertices: list[np.ndarray] = field(default_factory=list)
    recession_rays: list[np.ndarray] = field(default_factory=list)
    method: str = "enumeration"


def solve_square(M: np.ndarray, rhs: np.ndarray, tol: float = PIVOT_TOL) -> np.ndarray | None:
    """Gaussian elimination with partial pivoting; ``None`` if ``M`` is singular."""
    k = M.shape[0]
    if k == 0:
        return np.zeros(0)
    T = np.hstack([M.astype(float), np.asarray(rhs, dtype=float).reshape(k, -1)])
    scale = max(1.0, float(np.max(np.abs(M))))
    for col in range(k):
        piv = col + int(np.argmax(np.abs(T[col:, col])))
        if abs(T[piv, col]) <= tol * scale:
            return None
        if piv != col:
            T[[col, piv]] = T[[piv, col]]
        T[col + 1:] -= np.outer(T[col + 1:, col] / T[col, col], T[col])
    out = np.zeros((k, T.shape[1] - k))
    for row in range(k - 1, -1, -1):
        out[row] = (T[row, k:] - T[row, row + 1:k] @ out[row + 1:]) / T[row, row]
    return out[:, 0] if out.shape[1] == 1 else out


def _independent_rows(A: np.ndarray, b: np.ndarray) -> list[int]:
    """Greedy maximal set of linearly independent rows; raises Infeasible
    when a dependent row has an inconsistent right-hand side."""
    keep: list[int] = []
    for i in range(A.shape[0]):
        trial = keep + [i]
        if np.linalg.matrix_rank(A[trial], tol=PIVOT_TOL * max(1.0, np.abs(A).max())) == len(trial):
            keep = trial
    if keep and len(keep) < A.shape[0]:
        coef, *_ = np.linalg.lstsq(A[keep].T, A.T, rcond=None)
        if np.max(np.abs(coef.T @ b[keep] - b), initial=0.0) > 1e-8 * (1 + np.abs(b).max()):
            raise Infeasible("equality constraints are inconsistent")
    return keep


def _check_budget(n: int, k: int, budget: int) -> None:
    if math.comb(n, k) > budget:
        raise BudgetExceeded(f"C({n},{k}) = {math.comb(n, k)} bases exceeds budget {budget}")


def _basic_solutions(A: np.ndarray, rhs: np.ndarray):
    """Yield ``(basis, x_B)`` for every nonsingular column basis, in lexicographic order."""
    k, n = A.shape
    for basis in itertools.combinations(range(n), k):
        xb = solve_square(A[:, basis], rhs)
        if xb is not None:
            yield basis, xb


def recession_rays(A: np.ndarray, budget: int = DEFAULT_BUDGET) -> list[np.ndarray]:
    """Extreme rays of ``{d >= 0 : Ad = 0}``, normalised to ``sum(d) = 1``."""
    m, n = A.shape
    rows = _independent_rows(A, np.zeros(m)) if m else []
    M = np.vstack([A[rows], np.ones((1, n))])
    if np.linalg.matrix_rank(M) <= len(rows):
        # ones lies in the row space of A, so Ad = 0 forces sum(d) = 0
        return []
    rhs = np.zeros(len(rows) + 1)
    rhs[-1] = 1.0
    _check_budget(n, len(rows) + 1, budget)
    rays = []
    for basis, db in _basic_solutions(M, rhs):
        if np.all(db >= -FEAS_TOL):
            d = np.zeros(n)
            d[list(basis)] = np.maximum(db, 0.0)
            if not any(np.allclose(d, r, atol=1e-9) for r in rays):
                rays.append(d)
    return rays


def _enumerate(A, b, c, budget, feas_tol=FEAS_TOL):
    m, n = A.shape
    rows = _independent_rows(A, b) if m else []
    Ar, br = A[rows], b[rows]
    r = len(rows)
    _check_budget(n, r, budget)
    feasible = []  # (basis, x, cost)
    duals = []  # (basis, z_full)
    for basis, xb in _basic_solutions(Ar, br):
        zr = -solve_square(Ar[:, basis].T, c[list(basis)])
        z = np.zeros(m)
        z[rows] = zr
        duals.append((basis, z))
        if np.all(xb >= -feas_tol):
            x = np.zeros(n)
            x[list(basis)] = np.maximum(xb, 0.0)
            feasible.append((basis, x, float(c @ x)))
    return rows, feasible, duals


def _phase_one_gap(A, b, budget) -> float:
    """Minimal total infeasibility ``min 1^T a  s.t.  Ax + Da = b, x, a >= 0``."""
    rows = _independent_rows(A, b)
    Ar, br = A[rows], b[rows]
    D = np.diag(np.where(br < 0, -1.0, 1.0))
    A1 = np.hstack([Ar, D])
    c1 = np.r_[np.zeros(A.shape[1]), np.ones(len(rows))]
    _, feasible, _ = _enumerate(A1, br, c1, budget)
    return min(cost for _, _, cost in feasible)


def solve_primal_dual(lp: StandardFormLP, budget: int = DEFAULT_BUDGET) -> OracleSolution:
    """Exact solution by enumerating every basis.

    Raises
    ------
    Infeasible
        No basic feasible solution exists (confirmed by a phase-one enumeration).
    Unbounded
        A recession direction ``d >= 0, Ad = 0`` with ``c^T d < 0`` exists.
    BudgetExceeded
        The number of candidate bases exceeds ``budget``.
    """
    require_valid(lp)
    A, b, c = lp.A, lp.b, lp.c
    rows, feasible, duals = _enumerate(A, b, c, budget)
    if not feasible:
        gap = _phase_one_gap(A, b, budget)
        if gap > 1e-9:
            raise Infeasible(f"no feasible point; minimal constraint violation {gap:.3g}")
        rows, feasible, duals = _enumerate(A, b, c, budget, feas_tol=1e-7)
        if not feasible:
            raise Infeasible("phase one found a nearly-feasible point but no basis is feasible")

    rays = recession_rays(A, budget)
    scale = 1.0 + float(np.abs(c).max(initial=0.0))
    for d in rays:
        if c @ d < -1e-9 * scale:
            raise Unbounded(f"cost decreases along the feasible ray {np.round(d, 6).tolist()}")

    opt = min(cost for _, _, cost in feasible)
    tie = 1e-9 * (1.0 + abs(opt))
    optimal = [(basis, x) for basis, x, cost in feasible if cost <= opt + tie]

    primal_vertices: list[np.ndarray] = []
    for _, x in optimal:
        if not any(np.allclose(x, v, atol=1e-9) for v in primal_vertices):
            primal_vertices.append(x)

    dual_vertices: list[np.ndarray] = []
    z_star = None
    for _, z in duals:
        slack = A.T @ z + c
        if np.all(slack >= -1e-9 * scale) and -(b @ z) >= opt - tie:
            if z_star is None:
                z_star = z
            if not any(np.allclose(z, v, atol=1e-9) for v in dual_vertices):
                dual_vertices.append(z)
    if z_star is None:
        # a finite optimum always has a dual-feasible optimal basis; reaching
        # here means tolerances rejected it
        raise NumericalFailure("numerically ill-conditioned program: no dual-optimal basis found")

    return OracleSolution(
        x_star=optimal[0][1],
        z_star=z_star,
        optimal_value=opt,
        optimal_bases=[basis for basis, _ in optimal],
        dual_vertices=dual_vertices,
        primal_vertices=primal_vertices,
        recession_rays=rays,
    )


def solve_reference(lp: StandardFormLP) -> OracleSolution:
    """Large-instance fallback using HiGHS. Reports one primal-dual pair only."""
    require_valid(lp)
    res = linprog(lp.c, A_eq=lp.A, b_eq=lp.b, bounds=(0, None), method="highs")
    if res.status == 2:
        raise Infeasible(res.message)
    if res.status == 3:
        raise Unbounded(res.message)
    if res.status != 0:
        raise NumericalFailure(f"reference solver failed: {res.message}")
    x = np.maximum(res.x, 0.0)
    # HiGHS marginals are d(objective)/d(b_eq); the dual here uses the opposite sign
    z = -np.asarray(res.eqlin.marginals, dtype=float)
    return OracleSolution(
        x_star=x,
        z_star=z,
        optimal_value=float(lp.c @ x),
        dual_vertices=[z],
        primal_vertices=[x],
        method="highs",
    )


def solve(lp: StandardFormLP, budget: int = DEFAULT_BUDGET) -> OracleSolution:
    """Enumerate when affordable, otherwise fall back to :func:`solve_reference`."""
    try:
        return solve_primal_dual(lp, budget)
    except BudgetExceeded:
        return solve_reference(lp)


def _dual_face_rays(A: np.ndarray, b: np.ndarray, budget: int) -> list[np.ndarray]:
    """Extreme rays of the pointed cone ``{e : A^T e >= 0, b^T e = 0}``.

    Each ray has m-1 linearly independent tight constraints among the rows
    of ``[A^T; b^T]``.
    """
    m, n = A.shape
    M = np.vstack([A.T, b.reshape(1, -1)])
    _check_budget(n + 1, m - 1, budget)
    scale = max(1.0, float(np.abs(M).max()))
    rays = []
    for subset in itertools.combinations(range(n + 1), m - 1):
        sub = M[list(subset)]
        if m == 1:
            basis = np.ones((1, 1))
        else:
            _, s, vt = np.linalg.svd(sub)
            if s[-1] <= PIVOT_TOL * scale:
                continue
            basis = vt[-1:].T
        for sign in (1.0, -1.0):
            e = sign * basis[:, 0]
            if np.all(A.T @ e >= -1e-9 * scale) and abs(b @ e) <= 1e-9 * scale:
                rays.append(e)
    return rays


def is_solution_set_bounded(lp: StandardFormLP, sol: OracleSolution, budget: int = DEFAULT_BUDGET) -> bool:
    """Whether both the primal and the dual optimal faces are bounded.

    The primal face is unbounded iff some extreme ray of the feasible set
    has zero cost. The dual face ``{A^T z + c >= 0, -b^T z = opt}`` is
    unbounded iff A is row-rank deficient or the cone
    ``{A^T e >= 0, b^T e = 0}`` has an extreme ray.
    """
    if sol.method != "enumeration":
        raise InvalidInput("boundedness check needs the enumeration oracle")
    A, b, c = lp.A, lp.b, lp.c
    scale = 1.0 + float(np.abs(c).max(initial=0.0))
    if any(abs(c @ d) <= 1e-9 * scale for d in sol.recession_rays):
        return False
    if np.linalg.matrix_rank(A) < lp.m:
        return False
    return not _dual_face_rays(A, b, budget)


def compute_K_star(lp: StandardFormLP, sol: OracleSolution, rho: float) -> float:
    """Penalty bound ``max ||A^T z + c||_inf`` over the dual optimal vertices.

    This ignores the restriction to the sublevel set of radius ``rho``, so
    it over-approximates the smallest valid value.
    """
    if rho <= 0:
        raise InvalidInput("rho must be positive")
    if sol.method == "enumeration" and not is_solution_set_bounded(lp, sol):
        raise UnboundedSolutionSet("primal-dual solution set is unbounded")
    candidates = [sol.z_star, *sol.dual_vertices]
    return max(float(np.max(np.abs(lp.A.T @ z + lp.c), initial=0.0)) for z in candidates)


def certify(lp: StandardFormLP, sol: OracleSolution) -> float:
    """KKT residual of the reported pair."""
    return residual_arrays(lp.A, lp.b, lp.c, sol.x_star, sol.z_star)
