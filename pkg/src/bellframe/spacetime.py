"""Inertial frames, Lorentz boosts, event chronology and v_QI lower bounds.

All coordinates are SI and refer to the laboratory frame unless stated
otherwise.  A :class:`Frame` is identified by its velocity relative to the
laboratory.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "C",
    "Frame",
    "LAB",
    "SpacetimeEvent",
    "Order",
    "ChronologyVerdict",
    "BoundInput",
    "VqiBound",
    "SweepPoint",
    "boost",
    "interval",
    "chronology",
    "frame_time_gap",
    "before_before",
    "required_relative_speed",
    "min_required_speed",
    "vqi_bound",
    "vqi_bound_sweep",
    "divergence_window",
]

C = 299_792_458.0
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DT_TOL = 1e-15


def _vec3(v: Sequence[float], name: str) -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class Frame:
    """Inertial frame moving with ``velocity`` (m/s) relative to the lab."""

    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        v = _vec3(self.velocity, "velocity")
        if math.hypot(*v) >= C:
            raise ValueError("frame speed must be below c")
        object.__setattr__(self, "velocity", v)

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)

    @property
    def beta(self) -> float:
        return self.speed / C

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.beta**2)

    def gamma_minus_one(self) -> float:
        # cancellation-free form; gamma - 1 is ~1e-14 at wheel speeds
        b2 = self.beta**2
        root = math.sqrt(1.0 - b2)
        return b2 / (root * (1.0 + root))

    def inverse(self) -> "Frame":
        return Frame(tuple(-x for x in self.velocity))


LAB = Frame()


@dataclass(frozen=True)
class SpacetimeEvent:
    t: float
    x: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError("event time must be finite")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", _vec3(self.x, "position"))


def boost(event: SpacetimeEvent, frame: Frame) -> SpacetimeEvent:
    """Coordinates of ``event`` in ``frame`` (pure boost, no rotation)."""
    v = np.array(frame.velocity)
    speed2 = float(v @ v)
    if speed2 == 0.0:
        return event
    x = np.array(event.x)
    gamma = frame.gamma
    vx = float(v @ x)
    t_new = gamma * (event.t - vx / C**2)
    x_new = x + (frame.gamma_minus_one() * vx / speed2 - gamma * event.t) * v
    return SpacetimeEvent(t_new, tuple(x_new))


def interval(e1: SpacetimeEvent, e2: SpacetimeEvent) -> float:
    """``c^2 dt^2 - |dx|^2``; negative for spacelike separation."""
    dt = e2.t - e1.t
    dx = np.subtract(e2.x, e1.x)
    return C**2 * dt**2 - float(dx @ dx)


def frame_time_gap(event_a: SpacetimeEvent, event_b: SpacetimeEvent, frame: Frame) -> float:
    """``t'_B - t'_A`` in ``frame``.

    Computed from the lab differences so that nearly simultaneous events far
    from the origin keep their precision.
    """
    dt = event_b.t - event_a.t
    dx = np.subtract(event_b.x, event_a.x)
    return frame.gamma * (dt - float(np.dot(frame.velocity, dx)) / C**2)


class Order(enum.Enum):
    A_FIRST = "A_FIRST"
    B_FIRST = "B_FIRST"
    SIMULTANEOUS_WITHIN_TOLERANCE = "SIMULTANEOUS_WITHIN_TOLERANCE"


@dataclass(frozen=True)
class ChronologyVerdict:
    order: Order
    delta_t: float


def chronology(event_a: SpacetimeEvent, event_b: SpacetimeEvent, frame: Frame,
               tolerance: float = 0.0) -> ChronologyVerdict:
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    dt = frame_time_gap(event_a, event_b, frame)
    if abs(dt) <= tolerance:
        order = Order.SIMULTANEOUS_WITHIN_TOLERANCE
    elif dt > 0:
        order = Order.A_FIRST
    else:
        order = Order.B_FIRST
    return ChronologyVerdict(order, dt)


def before_before(event_a: SpacetimeEvent, event_b: SpacetimeEvent,
                  frame_a: Frame, frame_b: Frame,
                  alignment_uncertainty: float = 0.0) -> bool:
    """True when each device acts first in its own rest frame, with margin.

    A must precede B in ``frame_a`` and B must precede A in ``frame_b``, both
    by more than ``alignment_uncertainty`` seconds.
    """
    if alignment_uncertainty < 0:
        raise ValueError("alignment uncertainty must be non-negative")
    gap_a = frame_time_gap(event_a, event_b, frame_a)
    gap_b = frame_time_gap(event_a, event_b, frame_b)
    return gap_a > alignment_uncertainty and -gap_b > alignment_uncertainty


def required_relative_speed(length: float, jitter: float) -> float:
    """Relative speed whose simultaneity shift ``v L / c^2`` equals ``jitter``."""
    if length <= 0 or jitter < 0:
        raise ValueError("length must be positive and jitter non-negative")
    return C**2 * jitter / length


# -- speed-of-influence bounds -------------------------------------------------

def _required_speed(dt, dx, frame_v, gamma):
    """|dx'| / (c |dt'|) for lab offsets ``dt`` (array) and separation ``dx``.

    ``frame_v`` and ``dx`` broadcast against ``dt`` along a trailing 3-axis.
    Returns +inf where the boosted time gap is exactly zero.
    """
    dt = np.asarray(dt, dtype=float)
    speed2 = np.sum(frame_v * frame_v, axis=-1)
    vdx = np.sum(frame_v * dx, axis=-1)
    dt_p = gamma * (dt - vdx / C**2)
    # parallel and perpendicular parts of the boosted separation
    with np.errstate(invalid="ignore", divide="ignore"):
        n = np.where(speed2[..., None] > 0, frame_v / np.sqrt(speed2)[..., None], 0.0)
    dpar = np.sum(n * dx, axis=-1)
    dperp2 = np.maximum(np.sum(dx * dx, axis=-1) - dpar**2, 0.0)
    par_p = gamma * (dpar - np.sqrt(speed2) * dt)
    num = np.sqrt(par_p**2 + dperp2)
    with np.errstate(divide="ignore"):
        return np.where(dt_p == 0.0, np.inf, num / (C * np.abs(dt_p)))


def _golden_min(f, lo, hi, tol=DT_TOL, max_iter=300):
    """Vectorized golden-section search for a quasiconvex ``f`` on [lo, hi].

    Returns the smallest value among the converged point and both endpoints.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    a, b = lo.copy(), hi.copy()
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = f1 <= f2
        a, b = np.where(left, a, x1), np.where(left, x2, b)
        new_x1 = np.where(left, b - _GOLDEN * (b - a), x2)
        new_x2 = np.where(left, x1, a + _GOLDEN * (b - a))
        fp = f(np.where(left, new_x1, new_x2))
        f1, f2 = np.where(left, fp, f2), np.where(left, f1, fp)
        x1, x2 = new_x1, new_x2
    return np.minimum(np.minimum(f(0.5 * (a + b)), f(lo)), f(hi))


def min_required_speed(separation, dt_center: float, halfwidth: float, frame_velocity):
    """Smallest influence speed (units of c) compatible with a timing window.

    The second event lies at lab offset ``dt_center +- halfwidth`` after the
    first and at displacement ``separation`` (m).  For each candidate frame
    velocity (m/s, shape ``(3,)`` or ``(n, 3)``) this returns the minimum over
    the window of ``|dx'| / (c |dt'|)`` together with a flag telling whether
    the window contains the frame's simultaneity point (``dt' = 0``).
    """
    dx = np.asarray(separation, dtype=float).reshape(3)
    v = np.atleast_2d(np.asarray(frame_velocity, dtype=float))
    speed = np.sqrt(np.sum(v * v, axis=-1))
    if np.any(speed >= C):
        raise ValueError("frame speed must be below c")
    gamma = 1.0 / np.sqrt(1.0 - (speed / C) ** 2)
    lo = np.full(v.shape[0], dt_center - halfwidth)
    hi = np.full(v.shape[0], dt_center + halfwidth)
    t0 = (v @ dx) / C**2
    divergent = (t0 >= lo) & (t0 <= hi)

    def f(dt):
        return _required_speed(dt, dx, v, gamma)

    # split at the simultaneity point: each side is quasiconvex on its own
    left_hi = np.where(divergent, t0, hi)
    right_lo = np.where(divergent, t0, lo)
    best = _golden_min(f, lo, left_hi)
    best = np.where(divergent, np.minimum(best, _golden_min(f, right_lo, hi)), best)
    return best, divergent


@dataclass(frozen=True)
class BoundInput:
    """Station separation (m), timing half-width (s), frame speed/c, alignment angle (rad)."""

    length: float
    jitter: float
    beta: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("length must be positive")
        if not self.jitter > 0:
            raise ValueError("jitter must be positive")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")


@dataclass(frozen=True)
class VqiBound:
    bound: float
    divergent: bool


@dataclass(frozen=True)
class SweepPoint:
    rho: float
    bound: float
    divergent: bool


def _bound_many(length, jitter, beta, rhos):
    rhos = np.asarray(rhos, dtype=float)
    v = beta * C * np.stack([np.cos(rhos), np.sin(rhos), np.zeros_like(rhos)], axis=-1)
    return min_required_speed((length, 0.0, 0.0), 0.0, jitter, v)


def vqi_bound(inp: BoundInput) -> VqiBound:
    """Guaranteed lower bound on v_QI / c in a frame moving at ``beta`` c.

    The frame velocity makes angle ``rho`` with the A-B axis.  The true
    emission offset is only known to lie within ``+-jitter``, so the bound is
    the worst case (minimum) of the required speed over that window.
    ``divergent`` flags windows containing the frame's simultaneity point.
    """
    bound, divergent = _bound_many(inp.length, inp.jitter, inp.beta, [inp.rho])
    return VqiBound(float(bound[0]), bool(divergent[0]))


def vqi_bound_sweep(length: float, jitter: float, beta: float,
                    samples: int) -> list[SweepPoint]:
    """Evaluate :func:`vqi_bound` at ``samples`` angles spread evenly over [0, pi]."""
    if samples < 2:
        raise ValueError("need at least two samples")
    BoundInput(length, jitter, beta)  # validation
    rhos = np.linspace(0.0, math.pi, samples)
    bound, divergent = _bound_many(length, jitter, beta, rhos)
    return [SweepPoint(float(r), float(b), bool(d)) for r, b, d in zip(rhos, bound, divergent)]


def divergence_window(length: float, jitter: float, beta: float) -> tuple[float, float]:
    """Closed interval of ``rho`` in [0, pi] where the bound is flagged divergent.

    That is where ``|beta L cos(rho) / c| <= jitter``.
    """
    if beta == 0.0:
        return (0.0, math.pi)
    x = jitter * C / (beta * length)
    if x >= 1.0:
        return (0.0, math.pi)
    half = math.asin(x)
    return (math.pi / 2 - half, math.pi / 2 + half)
