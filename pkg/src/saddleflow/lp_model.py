"""Standard-form linear programs, the penalised Lagrangian and optimality residuals.

A program is ``min c^T x  s.t.  Ax = b, x >= 0`` with dual
``max -b^T z  s.t.  A^T z + c >= 0``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StandardFormLP:
    """Problem data (A, b, c). Arrays are copied and made read-only.

    Construction only coerces types; use :func:`validate_lp` to check
    dimensions and degenerate rows.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = "lp"

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(1, -1)
        if A.ndim != 2:
            raise InvalidInput(f"A must be a matrix, got {A.ndim}-d array")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", _frozen(self.b, 1))
        object.__setattr__(self, "c", _frozen(self.c, 1))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def to_dict(self) -> dict:
        return {"name": self.name, "A": self.A.tolist(), "b": self.b.tolist(), "c": self.c.tolist()}


@dataclass(frozen=True, eq=False)
class PrimalDualState:
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x, 1))
        object.__setattr__(self, "z", _frozen(self.z, 1))

    @classmethod
    def zeros(cls, lp: StandardFormLP) -> "PrimalDualState":
        return cls(np.zeros(lp.n), np.zeros(lp.m))


@dataclass(frozen=True, eq=False)
class PerturbationVector:
    """Additive disturbance ``w = (w_x, w_z)`` on the primal and dual velocities."""

    w_x: np.ndarray
    w_z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w_x", _frozen(self.w_x, 1))
        object.__setattr__(self, "w_z", _frozen(self.w_z, 1))

    @classmethod
    def zeros(cls, n: int, m: int) -> "PerturbationVector":
        return cls(np.zeros(n), np.zeros(m))

    def is_zero(self) -> bool:
        return not (np.any(self.w_x) or np.any(self.w_z))

    def norm(self) -> float:
        return float(np.sqrt(self.w_x @ self.w_x + self.w_z @ self.w_z))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.w_x, self.w_z])


@dataclass
class ValidationReport:
    """Diagnostics are strings prefixed with ``error:`` or ``info:``."""

    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def errors(self) -> list[str]:
        return [msg for msg in self.messages if msg.startswith("error:")]

    def error(self, text: str) -> None:
        self.messages.append(f"error: {text}")

    def info(self, text: str) -> None:
        self.messages.append(f"info: {text}")


@dataclass(frozen=True, eq=False)
class DualLP:
    """``max objective^T z  s.t.  constraint_matrix @ z + offset >= 0``."""

    objective: np.ndarray
    constraint_matrix: np.ndarray
    offset: np.ndarray
    sense: str = "max"


def validate_lp(lp: StandardFormLP) -> ValidationReport:
    report = ValidationReport()
    m, n = lp.A.shape
    if lp.b.shape != (m,):
        report.error(f"dimension mismatch: A has {m} rows but b has length {lp.b.size}")
    if lp.c.shape != (n,):
        report.error(f"dimension mismatch: A has {n} columns but c has length {lp.c.size}")
    for name, arr in (("A", lp.A), ("b", lp.b), ("c", lp.c)):
        if not np.all(np.isfinite(arr)):
            report.error(f"non-finite entries in {name}")
    for row in np.flatnonzero(~np.any(lp.A != 0, axis=1)):
        report.error(f"zero row {row + 1} in A")
    if report.ok:
        report.info(f"{m} constraints, {n} variables")
    return report


def dual_of(lp: StandardFormLP) -> DualLP:
    return DualLP(objective=-lp.b, constraint_matrix=lp.A.T, offset=lp.c)


def lagrangian_value(lp: StandardFormLP, K: float, s: PrimalDualState) -> float:
    """``c^T x + |Ax-b|^2/2 + z^T(Ax-b) + K * sum(max(0, -x))``."""
    if K < 0:
        raise InvalidInput("K must be nonnegative")
    r = lp.A @ s.x - lp.b
    return float(lp.c @ s.x + 0.5 * (r @ r) + s.z @ r + K * np.maximum(0.0, -s.x).sum())


def kkt_residual(lp: StandardFormLP, s: PrimalDualState) -> float:
    """Largest violation among primal feasibility, dual feasibility,
    complementary slackness and strong duality. Zero exactly on the
    primal-dual solution set."""
    return residual_arrays(lp.A, lp.b, lp.c, s.x, s.z)


def residual_arrays(A, b, c, x, z) -> float:
    slack = A.T @ z + c
    terms = (
        np.max(np.abs(A @ x - b), initial=0.0),
        np.max(-np.minimum(x, 0.0), initial=0.0),
        np.max(-np.minimum(slack, 0.0), initial=0.0),
        abs(slack @ x),
        abs(c @ x + b @ z),
    )
    return float(max(terms))


def perturbed_program(lp: StandardFormLP, w: PerturbationVector) -> StandardFormLP:
    """Program whose undisturbed dynamics equals the dynamics of ``lp``
    under the constant disturbance ``w``."""
    if w.is_zero():
        return lp
    return StandardFormLP(
        A=lp.A,
        b=lp.b - w.w_z,
        c=lp.c - w.w_x - lp.A.T @ w.w_z,
        name=f"{lp.name}-perturbed",
    )


def lp_from_dict(data: dict) -> StandardFormLP:
    try:
        rows = data["A"]
        b, c = data["b"], data["c"]
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"LP JSON needs keys A, b, c ({exc})") from None
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InvalidInput("A must be a non-empty list of rows")
    if len({len(r) for r in rows}) != 1:
        raise InvalidInput("A is not rectangular")
    try:
        return StandardFormLP(A=rows, b=b, c=c, name=str(data.get("name", "lp")))
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"bad LP data: {exc}") from None


def load_lp(path) -> StandardFormLP:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read LP file {path}: {exc}") from None
    return lp_from_dict(data)


def require_valid(lp: StandardFormLP) -> StandardFormLP:
    report = validate_lp(lp)
    if not report.ok:
        raise InvalidInput("; ".join(report.errors))
    return lp
