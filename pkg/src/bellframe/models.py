"""Collapse hypotheses as per-trial rules deciding whether a pair stays correlated.

Five candidate rules are supported next to standard quantum mechanics:

* ``PREFERRED_FRAME`` -- collapse propagates at ``v_qi`` (units of c) in one
  fixed frame (the laboratory, the cosmic background rest frame, ...).
* ``TRIGGER_DEVICE_FRAME`` -- each absorber or detector defines the frame in
  which it collapses the state; a before-before geometry breaks the chain.
* ``CHOICE_DEVICE_FRAME`` -- the same with beam splitters / analyzers.
* ``PER_FRAME_STATE_VECTOR`` -- one state vector per frame: a device in
  motion sees its own state and loses the correlation with the rest.

Uncorrelated trials draw each station from its exact Born marginal, so
singles rates and no-signaling are untouched.  Under
``TRIGGER_DEVICE_FRAME`` the wheel geometry yields a vanishing S, while the
real before-before experiment kept the violation: the model's prediction is
the falsified branch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .qstate import TwoQubitState, Outcome, joint_table, marginal_plus
from .spacetime import (
    LAB,
    Frame,
    SpacetimeEvent,
    before_before,
    min_required_speed,
)

__all__ = [
    "CollapseKind",
    "CollapseModel",
    "StationGeometry",
    "Reason",
    "TrialVerdict",
    "MultiPsiOutcome",
    "trial_verdict",
    "generate_outcomes",
    "generate_multi_psi",
    "moving_station_of",
    "sample_joint",
    "sample_marginal",
    "MOVING_PORT",
]

# port of the moving station's analyzer that feeds the moving detector
MOVING_PORT = 1

_JOINT_A = np.array([1, 1, -1, -1], dtype=np.int8)
_JOINT_B = np.array([1, -1, 1, -1], dtype=np.int8)


class CollapseKind(enum.Enum):
    STANDARD_QM = "STANDARD_QM"
    PREFERRED_FRAME = "PREFERRED_FRAME"
    TRIGGER_DEVICE_FRAME = "TRIGGER_DEVICE_FRAME"
    CHOICE_DEVICE_FRAME = "CHOICE_DEVICE_FRAME"
    PER_FRAME_STATE_VECTOR = "PER_FRAME_STATE_VECTOR"


@dataclass(frozen=True)
class CollapseModel:
    kind: CollapseKind = CollapseKind.STANDARD_QM
    preferred_frame: Frame | None = None
    v_qi: float | None = None
    moving_station: str | None = None

    def __post_init__(self):
        kind = CollapseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is CollapseKind.PREFERRED_FRAME:
            if self.preferred_frame is None:
                object.__setattr__(self, "preferred_frame", LAB)
            if self.v_qi is None or not self.v_qi > 1.0:
                raise ValueError("v_qi must exceed 1 (a superluminal speed, in units of c)")
        if self.moving_station not in (None, "A", "B"):
            raise ValueError("moving_station must be 'A', 'B' or None")

    @classmethod
    def standard(cls) -> "CollapseModel":
        return cls(CollapseKind.STANDARD_QM)

    @classmethod
    def preferred(cls, v_qi: float, frame: Frame = LAB) -> "CollapseModel":
        return cls(CollapseKind.PREFERRED_FRAME, frame, v_qi)


@dataclass(frozen=True)
class StationGeometry:
    """Where and when a photon meets the analyzer (choice) and the absorber (trigger).

    ``alignment_uncertainty`` (s) is the margin demanded by before-before
    checks; ``timing_jitter`` (s) widens the window used for finite-speed
    influence checks.
    """

    choice_event: SpacetimeEvent
    trigger_event: SpacetimeEvent
    choice_frame: Frame = LAB
    trigger_frame: Frame = LAB
    alignment_uncertainty: float = 0.0
    timing_jitter: float = 0.0

    def __post_init__(self):
        if self.trigger_event.t < self.choice_event.t:
            raise ValueError("trigger event must not precede the choice event in the lab")
        if self.alignment_uncertainty < 0 or self.timing_jitter < 0:
            raise ValueError("uncertainties must be non-negative")

    @property
    def window(self) -> float:
        return max(self.alignment_uncertainty, self.timing_jitter)


class Reason(enum.Enum):
    STANDARD = "STANDARD"
    INFLUENCE_ARRIVES = "INFLUENCE_ARRIVES"
    INFLUENCE_TOO_SLOW = "INFLUENCE_TOO_SLOW"
    TRIGGER_ORDERED = "TRIGGER_ORDERED"
    BEFORE_BEFORE_TRIGGER = "BEFORE_BEFORE_TRIGGER"
    CHOICE_ORDERED = "CHOICE_ORDERED"
    BEFORE_BEFORE_CHOICE = "BEFORE_BEFORE_CHOICE"
    SHARED_FRAME = "SHARED_FRAME"
    FRAMES_IN_RELATIVE_MOTION = "FRAMES_IN_RELATIVE_MOTION"
    LOCAL_HIDDEN_VARIABLE = "LOCAL_HIDDEN_VARIABLE"


@dataclass(frozen=True)
class TrialVerdict:
    correlated: bool
    reason: Reason


def trial_verdict(model: CollapseModel, station_a: StationGeometry,
                  station_b: StationGeometry) -> TrialVerdict:
    kind = model.kind
    if kind is CollapseKind.STANDARD_QM:
        return TrialVerdict(True, Reason.STANDARD)

    if kind is CollapseKind.PREFERRED_FRAME:
        ea, eb = station_a.trigger_event, station_b.trigger_event
        separation = np.subtract(eb.x, ea.x)
        window = max(station_a.window, station_b.window)
        if math.isinf(model.v_qi):
            return TrialVerdict(True, Reason.INFLUENCE_ARRIVES)
        # correlation is lost only if no admissible timing lets the influence arrive
        needed, _ = min_required_speed(separation, eb.t - ea.t, window,
                                       model.preferred_frame.velocity)
        if model.v_qi >= float(needed[0]):
            return TrialVerdict(True, Reason.INFLUENCE_ARRIVES)
        return TrialVerdict(False, Reason.INFLUENCE_TOO_SLOW)

    margin = max(station_a.alignment_uncertainty, station_b.alignment_uncertainty)
    if kind is CollapseKind.TRIGGER_DEVICE_FRAME:
        if before_before(station_a.trigger_event, station_b.trigger_event,
                         station_a.trigger_frame, station_b.trigger_frame, margin):
            return TrialVerdict(False, Reason.BEFORE_BEFORE_TRIGGER)
        return TrialVerdict(True, Reason.TRIGGER_ORDERED)

    if kind is CollapseKind.CHOICE_DEVICE_FRAME:
        if before_before(station_a.choice_event, station_b.choice_event,
                         station_a.choice_frame, station_b.choice_frame, margin):
            return TrialVerdict(False, Reason.BEFORE_BEFORE_CHOICE)
        return TrialVerdict(True, Reason.CHOICE_ORDERED)

    if kind is CollapseKind.PER_FRAME_STATE_VECTOR:
        frames = {station_a.choice_frame, station_a.trigger_frame,
                  station_b.choice_frame, station_b.trigger_frame}
        if len(frames) > 1:
            return TrialVerdict(False, Reason.FRAMES_IN_RELATIVE_MOTION)
        return TrialVerdict(True, Reason.SHARED_FRAME)

    raise ValueError(f"unsupported model kind {kind!r}")


def moving_station_of(model: CollapseModel, station_a: StationGeometry,
                      station_b: StationGeometry) -> str:
    """The station whose devices move relative to the lab, unless set explicitly."""
    if model.moving_station is not None:
        return model.moving_station
    moving = [name for name, st in (("A", station_a), ("B", station_b))
              if st.trigger_frame != LAB or st.choice_frame != LAB]
    if len(moving) != 1:
        raise ValueError("exactly one station must be moving for the per-frame state model")
    return moving[0]


# -- samplers ------------------------------------------------------------------

def sample_joint(tables: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Draw joint outcomes from per-trial tables ``(n, 4)`` using uniforms ``u``."""
    cum = np.cumsum(tables, axis=-1)
    k = (u[:, None] >= cum[:, :3]).sum(axis=1)
    return _JOINT_A[k], _JOINT_B[k]


def sample_marginal(p_plus: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.where(u < p_plus, np.int8(1), np.int8(-1))


def _uniforms(rng, n):
    return np.random.default_rng(rng).random(n)


def generate_outcomes(model: CollapseModel, verdict: TrialVerdict, state: TwoQubitState,
                      a: float, b: float, rng=None) -> tuple[Outcome, Outcome]:
    """One pair's outcomes given a verdict.

    Correlated pairs follow the joint Born distribution; uncorrelated pairs
    draw each side independently from its Born marginal.
    """
    u = _uniforms(rng, 2)
    if verdict.correlated:
        oa, ob = sample_joint(joint_table(state, a, b)[None, :], u[:1])
        return Outcome(int(oa[0])), Outcome(int(ob[0]))
    pa = marginal_plus(state, a, "A")
    pb = marginal_plus(state, b, "B")
    return (Outcome(1 if u[0] < pa else -1), Outcome(1 if u[1] < pb else -1))


@dataclass(frozen=True)
class MultiPsiOutcome:
    """One pair under the one-state-per-frame hypothesis.

    ``moving_outcome`` is the analyzer port chosen for the moving station's
    particle by the moving device's state; ``static_outcome`` is the other
    station's result; ``static_chain_outcome`` is the port the same moving-side
    particle takes according to the state seen by the static devices.
    """

    moving_outcome: Outcome
    static_outcome: Outcome
    static_chain_outcome: Outcome

    @property
    def moving_detector_fires(self) -> bool:
        return self.moving_outcome == MOVING_PORT

    @property
    def static_chain_fires(self) -> bool:
        return self.static_chain_outcome != MOVING_PORT

    @property
    def double_detection(self) -> bool:
        return self.moving_detector_fires and self.static_chain_fires

    @property
    def no_detection(self) -> bool:
        return not self.moving_detector_fires and not self.static_chain_fires


def multi_psi_arrays(moving_station: str, table: np.ndarray, p_moving_plus: np.ndarray,
                     u_joint: np.ndarray, u_moving: np.ndarray):
    """Vectorized core of :func:`generate_multi_psi`.

    ``table`` holds joint (A, B) Born tables per trial.  Returns
    ``(moving, static, static_chain)`` outcome arrays.
    """
    oa, ob = sample_joint(table, u_joint)
    moving = sample_marginal(p_moving_plus, u_moving)
    if moving_station == "B":
        return moving, oa, ob
    return moving, ob, oa


def generate_multi_psi(moving_station: str, state: TwoQubitState, a: float, b: float,
                       rng=None) -> MultiPsiOutcome:
    """Sample a pair with one state vector for the moving device and one for the rest.

    The static devices (the far station and the static detector behind the
    moving station's analyzer) share the ordinary joint Born statistics.  The
    moving detector follows its own state, whose single-station marginal is
    the Born marginal but which carries no correlation with anything else.
    Because the moving and static detectors on the same station consult
    different states, a particle can fire both or neither.
    """
    if moving_station not in ("A", "B"):
        raise ValueError("moving_station must be 'A' or 'B'")
    u = _uniforms(rng, 2)
    table = joint_table(state, a, b)[None, :]
    angle = b if moving_station == "B" else a
    p = np.array([marginal_plus(state, angle, moving_station)])
    moving, static, chain = multi_psi_arrays(moving_station, table, p, u[:1], u[1:])
    return MultiPsiOutcome(Outcome(int(moving[0])), Outcome(int(static[0])), Outcome(int(chain[0])))
