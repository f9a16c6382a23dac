"""Two-qubit pure states, Born-rule statistics and remote state preparation.

Measurements are projective two-outcome measurements along a direction in
the x-z plane of each qubit (spin-1/2 convention), so that the singlet gives
``E(a, b) = -cos(a - b)``.  The product basis is ordered
``(1,1), (1,2), (2,1), (2,2)`` where index 1 is the ``+1`` eigenstate of the
angle-0 measurement.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "InvalidStateError",
    "Outcome",
    "TwoQubitState",
    "JointDistribution",
    "Collapse",
    "canonical_angle",
    "make_state",
    "eigenvector",
    "joint_probability",
    "joint_table",
    "marginal_plus",
    "correlation",
    "collapse_after_A",
]

NORM_TOL = 1e-9
TWO_PI = 2.0 * math.pi


class InvalidStateError(ValueError):
    """Raised for amplitude vectors that cannot be normalized."""


class Outcome(enum.IntEnum):
    PLUS = 1
    MINUS = -1
    NO_DETECTION = 0

    def __mul__(self, other):
        if self is Outcome.NO_DETECTION or other == Outcome.NO_DETECTION:
            raise ValueError("NO_DETECTION does not enter correlation arithmetic")
        return int(self) * int(other)

    __rmul__ = __mul__


def canonical_angle(angle: float) -> float:
    """Map any real angle into ``[0, 2*pi)``."""
    a = math.fmod(float(angle), TWO_PI)
    if a < 0.0:
        a += TWO_PI
    # fmod of a value just below 0 can round up to exactly 2*pi
    return 0.0 if a >= TWO_PI else a


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """Normalized amplitude 4-vector in the ordered product basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape != (4,):
            raise InvalidStateError(f"expected 4 amplitudes, got {amps.size}")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidStateError(f"state not normalized (norm^2={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def __eq__(self, other):
        if not isinstance(other, TwoQubitState):
            return NotImplemented
        return bool(np.array_equal(self.amplitudes, other.amplitudes))

    def __hash__(self):
        return hash(self.amplitudes.tobytes())

    @property
    def matrix(self) -> np.ndarray:
        """Amplitudes as a 2x2 matrix ``M[i, j]`` for basis ``(i+1, j+1)``."""
        return self.amplitudes.reshape(2, 2)


def _normalize(amps) -> np.ndarray:
    amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
    norm = math.sqrt(float(np.sum(np.abs(amps) ** 2)))
    if norm == 0.0 or not math.isfinite(norm):
        raise InvalidStateError("amplitude vector has zero (or non-finite) norm")
    return amps / norm


def make_state(kind: str = "singlet", params: Sequence | None = None) -> TwoQubitState:
    """Build a named or raw two-qubit state.

    Parameters
    ----------
    kind : str
        ``"singlet"``, ``"phi_plus"``, ``"raw"`` (``params`` is a list of four
        amplitudes) or ``"superposition"`` (``params`` is
        ``(alpha1, beta1, alpha2, beta2)``, each a 2-component subsystem
        vector, giving ``alpha1 (x) beta1 + alpha2 (x) beta2``).
    params : sequence, optional
        Amplitudes or subsystem vectors, depending on ``kind``.
    """
    s = 1.0 / math.sqrt(2.0)
    if kind == "singlet":
        return TwoQubitState(np.array([0.0, s, -s, 0.0]))
    if kind == "phi_plus":
        return TwoQubitState(np.array([s, 0.0, 0.0, s]))
    if kind == "raw":
        if params is None:
            raise InvalidStateError("raw state needs an amplitude list")
        return TwoQubitState(_normalize(params))
    if kind == "superposition":
        if params is None or len(params) != 4:
            raise InvalidStateError("superposition needs (alpha1, beta1, alpha2, beta2)")
        a1, b1, a2, b2 = (np.asarray(p, dtype=np.complex128).reshape(2) for p in params)
        return TwoQubitState(_normalize(np.kron(a1, b1) + np.kron(a2, b2)))
    raise InvalidStateError(f"unknown state kind {kind!r}")


def eigenvector(angle: float, outcome: int) -> np.ndarray:
    """Eigenvector of the measurement along ``angle`` for outcome +1 or -1."""
    h = 0.5 * angle
    if outcome == 1:
        return np.array([math.cos(h), math.sin(h)], dtype=np.complex128)
    if outcome == -1:
        return np.array([-math.sin(h), math.cos(h)], dtype=np.complex128)
    raise ValueError(f"outcome must be +1 or -1, got {outcome!r}")


@dataclass(frozen=True)
class JointDistribution:
    """Probabilities of the joint outcomes ``(+,+), (+,-), (-,+), (-,-)``."""

    pp: float
    pm: float
    mp: float
    mm: float

    def __post_init__(self):
        probs = self.as_array()
        if np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"not a probability distribution: {probs}")

    def as_array(self) -> np.ndarray:
        return np.array([self.pp, self.pm, self.mp, self.mm])

    def __getitem__(self, key: tuple[int, int]) -> float:
        oa, ob = key
        return float(self.as_array()[(oa == -1) * 2 + (ob == -1)])

    @property
    def marginal_a(self) -> float:
        """Probability that station A reads +1."""
        return self.pp + self.pm

    @property
    def marginal_b(self) -> float:
        return self.pp + self.mp

    @property
    def correlation(self) -> float:
        return self.pp + self.mm - self.pm - self.mp


def joint_table(state: TwoQubitState, a: float, b: float) -> np.ndarray:
    """Joint probabilities as an array ordered ``(+,+), (+,-), (-,+), (-,-)``."""
    m = state.matrix
    out = np.empty(4)
    k = 0
    for oa in (1, -1):
        va = eigenvector(a, oa).conj()
        for ob in (1, -1):
            vb = eigenvector(b, ob).conj()
            out[k] = abs(va @ m @ vb) ** 2
            k += 1
    return out


def joint_probability(state: TwoQubitState, a: float, b: float) -> JointDistribution:
    p = joint_table(state, a, b)
    return JointDistribution(*(float(x) for x in p))


def marginal_plus(state: TwoQubitState, angle: float, station: str) -> float:
    """Born probability of +1 at one station (independent of the remote setting)."""
    m = state.matrix
    v = eigenvector(angle, 1).conj()
    if station == "A":
        amp = v @ m
    elif station == "B":
        amp = m @ v
    else:
        raise ValueError(f"station must be 'A' or 'B', got {station!r}")
    return float(np.sum(np.abs(amp) ** 2))


def correlation(state: TwoQubitState, a: float, b: float) -> float:
    """Expectation value of the product of the two ±1 outcomes."""
    p = joint_table(state, a, b)
    return float(p[0] + p[3] - p[1] - p[2])


@dataclass(frozen=True)
class Collapse:
    """Result of measuring A: branch probability and B's conditional state.

    ``state_b`` is ``None`` (and ``defined`` False) for a zero-probability branch.
    """

    probability: float
    state_b: np.ndarray | None

    @property
    def defined(self) -> bool:
        return self.state_b is not None


def collapse_after_A(state: TwoQubitState, a: float, outcome_a: int) -> Collapse:
    """Project subsystem A onto ``outcome_a`` along ``a`` and return B's state."""
    if outcome_a not in (1, -1):
        raise ValueError(f"outcome must be +1 or -1, got {outcome_a!r}")
    unnormalized = eigenvector(a, outcome_a).conj() @ state.matrix
    prob = float(np.sum(np.abs(unnormalized) ** 2))
    if prob <= 1e-15:
        return Collapse(0.0, None)
    return Collapse(prob, unnormalized / math.sqrt(prob))
