"""Time-parameterised additive disturbances ``w(t) = (w_x(t), w_z(t))``.

Every kind is a pure function of ``t`` (and the seed), so repeated runs
are bit-identical. Seeded noise is piecewise constant over steps of
length ``dt`` and drawn from a generator keyed on ``(seed, step index)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .lp_model import PerturbationVector

KINDS = ("zero", "constant", "finite_energy", "finite_variation", "seeded_noise")

# defaults for the decaying waveform; the burst shape is a modelling choice
DEFAULT_DECAY = 0.5
DEFAULT_OMEGA = 5.0


@dataclass(frozen=True, eq=False)
class DisturbanceSignal:
    """A disturbance for a program with ``n`` primal and ``m`` dual variables.

    ``params`` by kind:

    * ``constant``: ``w_x``, ``w_z``
    * ``finite_energy``: ``amplitude``, ``onset``, ``decay``, ``shape``
      (``"sinusoid"`` or ``"pulse"``), ``omega``, optional 0-based
      ``component`` for a single-component pulse
    * ``finite_variation``: ``w_x``, ``w_z`` (the limit) plus any
      ``finite_energy`` parameter for the vanishing part
    * ``seeded_noise``: ``amplitude``, ``dt``
    """

    kind: str
    n: int
    m: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown disturbance kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("finite_energy", "finite_variation") and self.params.get("decay", DEFAULT_DECAY) <= 0:
            raise InvalidInput("decay rate must be positive for a finite-energy term")
        if self.kind in ("constant", "finite_variation"):
            for key, size in (("w_x", self.n), ("w_z", self.m)):
                if np.shape(self.params.get(key, np.zeros(size))) != (size,):
                    raise InvalidInput(f"{key} must have length {size}")
        if self.kind == "seeded_noise" and self.params.get("dt", 0.01) <= 0:
            raise InvalidInput("noise dt must be positive")
        rng = np.random.default_rng(self.seed)
        # per-component phases and a unit pulse direction, fixed at construction
        object.__setattr__(self, "_phases", rng.uniform(0.0, 2 * math.pi, self.n + self.m))
        direction = rng.standard_normal(self.n + self.m)
        object.__setattr__(self, "_direction", direction / np.linalg.norm(direction))

    @classmethod
    def zero(cls, n: int, m: int) -> "DisturbanceSignal":
        return cls("zero", n, m)

    @classmethod
    def constant(cls, w: PerturbationVector) -> "DisturbanceSignal":
        return cls("constant", w.w_x.size, w.w_z.size, {"w_x": w.w_x.tolist(), "w_z": w.w_z.tolist()})

    @classmethod
    def finite_energy(cls, n: int, m: int, amplitude=1.0, onset=0.0, decay=DEFAULT_DECAY,
                      shape="sinusoid", omega=DEFAULT_OMEGA, component=None, seed=0) -> "DisturbanceSignal":
        params = {"amplitude": amplitude, "onset": onset, "decay": decay, "shape": shape, "omega": omega}
        if component is not None:
            params["component"] = component
        return cls("finite_energy", n, m, params, seed)

    @classmethod
    def finite_variation(cls, w: PerturbationVector, amplitude=1.0, onset=0.0, decay=1.0,
                         shape="pulse", component=None, seed=0) -> "DisturbanceSignal":
        params = {"w_x": w.w_x.tolist(), "w_z": w.w_z.tolist(), "amplitude": amplitude,
                  "onset": onset, "decay": decay, "shape": shape}
        if component is not None:
            params["component"] = component
        return cls("finite_variation", w.w_x.size, w.w_z.size, params, seed)

    @classmethod
    def seeded_noise(cls, n: int, m: int, amplitude=0.1, dt=0.01, seed=0) -> "DisturbanceSignal":
        return cls("seeded_noise", n, m, {"amplitude": amplitude, "dt": dt}, seed)

    @property
    def limit(self) -> PerturbationVector:
        """Constant value the signal settles to (zero for vanishing kinds)."""
        if self.kind in ("constant", "finite_variation"):
            return PerturbationVector(self.params.get("w_x", np.zeros(self.n)), self.params.get("w_z", np.zeros(self.m)))
        return PerturbationVector.zeros(self.n, self.m)

    def _decaying(self, t: float) -> np.ndarray:
        p = self.params
        onset = p.get("onset", 0.0)
        out = np.zeros(self.n + self.m)
        if t < onset:
            return out
        envelope = p.get("amplitude", 1.0) * math.exp(-p.get("decay", DEFAULT_DECAY) * (t - onset))
        if p.get("shape", "sinusoid") == "pulse":
            if "component" in p:
                out[int(p["component"])] = envelope
                return out
            return envelope * self._direction
        return envelope * np.sin(p.get("omega", DEFAULT_OMEGA) * (t - onset) + self._phases)

    def sample(self, t: float) -> PerturbationVector:
        if t < 0:
            raise InvalidInput("disturbance sampled at negative time")
        if self.kind == "zero":
            return PerturbationVector.zeros(self.n, self.m)
        if self.kind == "constant":
            return self.limit
        if self.kind == "seeded_noise":
            k = int(math.floor(t / self.params.get("dt", 0.01) + 1e-9))
            rng = np.random.default_rng([self.seed, k])
            a = self.params.get("amplitude", 0.1)
            w = rng.uniform(-a, a, self.n + self.m)
        else:
            w = self._decaying(t)
            if self.kind == "finite_variation":
                w = w + self.limit.as_array()
        return PerturbationVector(w[: self.n], w[self.n:])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}


def disturbance_from_dict(data: dict | None, n: int, m: int) -> DisturbanceSignal:
    """Parse ``{"kind": ..., "params": {...}, "seed": int}``; ``None`` means zero."""
    if not data:
        return DisturbanceSignal.zero(n, m)
    if "kind" not in data:
        raise InvalidInput("disturbance needs a 'kind'")
    return DisturbanceSignal(data["kind"], n, m, dict(data.get("params", {})), int(data.get("seed", 0)))


def variation_integral(sig: DisturbanceSignal, w_bar: PerturbationVector, horizon: float, dt: float) -> float:
    """Left Riemann sum of ``||w(t) - w_bar||`` over ``[0, horizon]``."""
    if dt <= 0 or horizon <= 0:
        raise InvalidInput("horizon and dt must be positive")
    ref = w_bar.as_array()
    steps = int(round(horizon / dt))
    return float(sum(np.linalg.norm(sig.sample(k * dt).as_array() - ref) for k in range(steps)) * dt)
