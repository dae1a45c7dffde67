"""Step-size schedules and Euclidean projection onto the probability simplex."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FORMS = ("inverse-time", "power-law", "constant-for-testing")
FEASIBLE_TOL = 1e-12


@dataclass(frozen=True)
class Schedule:
    """Step size ``scale / (t + offset) ** exponent``.

    ``inverse-time`` pins the exponent to 1. ``constant-for-testing`` ignores
    ``t`` entirely and does not satisfy the Robbins-Monro conditions.
    """

    form: str = "inverse-time"
    scale: float = 1.0
    exponent: float = 1.0
    offset: int = 1

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown schedule form {self.form!r}; expected one of {FORMS}")
        if self.scale <= 0:
            raise ValueError("schedule scale must be positive")
        if self.offset < 1:
            raise ValueError("schedule offset must be a positive integer")
        if self.form == "inverse-time" and self.exponent != 1.0:
            raise ValueError("inverse-time schedules have exponent 1")
        if self.form == "power-law" and not 0.5 < self.exponent <= 1.0:
            raise ValueError("power-law exponent must lie in (0.5, 1]")

    @classmethod
    def relative(cls, horizon: float, exponent: float = 1.0, scale: float = 1.0) -> "Schedule":
        """``scale / (1 + t/horizon) ** exponent`` expressed in offset form."""
        form = "inverse-time" if exponent == 1.0 else "power-law"
        return cls(form, scale * horizon**exponent, exponent, int(horizon))

    @property
    def conformant(self) -> bool:
        """True when sum(rate) diverges and sum(rate**2) converges."""
        return self.form != "constant-for-testing" and 0.5 < self.exponent <= 1.0

    def rate(self, t: int) -> float:
        if self.form == "constant-for-testing":
            return self.scale
        return self.scale / (t + self.offset) ** self.exponent

    def __call__(self, t: int) -> float:
        return self.rate(t)


def rate(schedule: Schedule, t: int) -> float:
    return schedule.rate(t)


@dataclass(frozen=True)
class TwoTimescale:
    fast: Schedule
    slow: Schedule

    def check(self, horizon: int = 10**6) -> list[str]:
        """Violations of slow < fast and of a non-increasing slow/fast ratio on [1, horizon]."""
        problems = []
        t = np.arange(1, horizon + 1, dtype=np.float64)
        fast = _rates(self.fast, t)
        slow = _rates(self.slow, t)
        if not np.all(slow < fast):
            first = int(t[np.argmax(slow >= fast)])
            problems.append(f"slow rate >= fast rate at t={first}")
        ratio = slow / fast
        # a constant ratio is allowed; ignore rounding jitter
        rising = np.diff(ratio) > 1e-12 * ratio[1:]
        if np.any(rising):
            first = int(t[np.argmax(rising)])
            problems.append(f"slow/fast ratio increases after t={first}")
        return problems


def _rates(schedule, t):
    if schedule.form == "constant-for-testing":
        return np.full_like(t, schedule.scale)
    return schedule.scale / (t + schedule.offset) ** schedule.exponent


# Defaults shared by every algorithm: weights/critic on the fast clock,
# policy on the slow one. t counts environment steps.
DEFAULT_HORIZON = 250


def default_fast() -> Schedule:
    return Schedule.relative(DEFAULT_HORIZON, exponent=0.6, scale=0.1)


def default_slow() -> Schedule:
    return Schedule.relative(DEFAULT_HORIZON, exponent=1.0, scale=0.09)


def default_two_timescale() -> TwoTimescale:
    return TwoTimescale(default_fast(), default_slow())


def project_simplex_list(v) -> list[float]:
    """Sort-based Euclidean projection of a short sequence onto the simplex.

    Pure Python: the vectors seen in training have 4 or 5 entries, where
    numpy call overhead dominates.
    """
    n = len(v)
    if n == 0:
        raise ValueError("cannot project an empty vector")
    if min(v) >= 0.0 and abs(math.fsum(v) - 1.0) <= FEASIBLE_TOL:
        return list(v)
    u = sorted(v, reverse=True)
    cumsum = 0.0
    theta = 0.0
    for k, uk in enumerate(u, start=1):
        cumsum += uk
        t = (cumsum - 1.0) / k
        if uk - t > 0.0:
            theta = t
    return [x - theta if x > theta else 0.0 for x in v]


def project_simplex(v) -> np.ndarray:
    """Euclidean-nearest point of the probability simplex to ``v``."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a vector with non-finite entries")
    return np.array(project_simplex_list(v.tolist()))


def project_policy_row(v) -> np.ndarray:
    return project_simplex(v)
