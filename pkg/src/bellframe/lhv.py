"""Local hidden-variable strategies, including a detection-loophole model.

Each pair carries an angle ``lam`` drawn uniformly on [0, 2pi).  Station A
answers ``sign(cos(setting - lam))`` and station B the opposite sign, which
reproduces the singlet's perfect anticorrelation at equal settings with a
sawtooth correlation ``E(theta) = -1 + 2 theta / pi``.  In the
detection-loophole variant a detector stays silent whenever
``|cos(setting - lam)| < tau``, so coincidence post-selection keeps a biased
subsample of the pairs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .bell import BOUND_RTOL, LOCAL_BOUND, ChshResult, SettingQuad, best_quad_indices, chsh_value
from .exceptions import InsufficientStatisticsError
from .qstate import TWO_PI, Outcome, canonical_angle

__all__ = [
    "LhvKind",
    "LhvModel",
    "LoopholeCalibration",
    "DEFAULT_TAU_GRID",
    "draw_lambda",
    "local_outcome",
    "station_outcomes",
    "postselected_chsh",
    "full_sample_chsh",
    "calibrate_loophole",
]

MIN_COINCIDENCES = 100
DEFAULT_TAU_GRID = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


class LhvKind(enum.Enum):
    DETERMINISTIC_SIGN = "DETERMINISTIC_SIGN"
    DETECTION_LOOPHOLE = "DETECTION_LOOPHOLE"


@dataclass(frozen=True)
class LhvModel:
    kind: LhvKind = LhvKind.DETERMINISTIC_SIGN
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LhvKind(self.kind))
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


def draw_lambda(rng=None, size=None):
    """Hidden variable(s) uniform on [0, 2pi)."""
    rng = np.random.default_rng(rng)
    lam = rng.random(size) * TWO_PI
    return float(lam) if size is None else lam


def station_outcomes(model: LhvModel, station: str, setting, lam) -> np.ndarray:
    """Vectorized outcomes (int8: +1, -1, 0 for no detection)."""
    c = np.cos(np.asarray(setting, dtype=float) - np.asarray(lam, dtype=float))
    out = np.where(c >= 0.0, 1, -1).astype(np.int8)
    if station == "B":
        out = -out
    elif station != "A":
        raise ValueError(f"station must be 'A' or 'B', got {station!r}")
    if model.kind is LhvKind.DETECTION_LOOPHOLE and model.tau > 0.0:
        out = np.where(np.abs(c) < model.tau, np.int8(0), out)
    return out


def local_outcome(model: LhvModel, station: str, setting: float, lam: float) -> Outcome:
    """Outcome of one station; depends only on its own setting and ``lam``."""
    value = station_outcomes(model, station, canonical_angle(setting), lam)
    return Outcome(int(value))


def _simulate(model, quad, trials, rng):
    rng = np.random.default_rng(rng)
    lam = draw_lambda(rng, trials)
    choice_a = rng.random(trials) < 0.5
    choice_b = rng.random(trials) < 0.5
    angle_a = np.where(choice_a, quad.a_prime, quad.a)
    angle_b = np.where(choice_b, quad.b_prime, quad.b)
    oa = station_outcomes(model, "A", angle_a, lam)
    ob = station_outcomes(model, "B", angle_b, lam)
    pair = 2 * choice_a.astype(np.int64) + choice_b
    return pair, oa, ob


def postselected_chsh(model: LhvModel, quad: SettingQuad, trials: int,
                      rng=None) -> tuple[ChshResult, float]:
    """CHSH estimated on coincidences only, plus the coincidence fraction.

    Settings are chosen independently and uniformly per trial at each station.
    """
    if trials < 10_000:
        raise ValueError("trials must be at least 1e4")
    pair, oa, ob = _simulate(model, quad, trials, rng)
    both = (oa != 0) & (ob != 0)
    estimates, variances, short = [], [], []
    for p in range(4):
        sel = both & (pair == p)
        n = int(sel.sum())
        if n < MIN_COINCIDENCES:
            short.append(p)
            continue
        e = float(np.mean(oa[sel].astype(np.int64) * ob[sel]))
        estimates.append(e)
        variances.append((1.0 - e * e) / n)
    if short:
        raise InsufficientStatisticsError(
            f"setting pairs {short} kept fewer than {MIN_COINCIDENCES} coincidences", short)
    result = chsh_value(*estimates, stderr=math.sqrt(sum(variances)))
    return result, float(both.mean())


def full_sample_chsh(model: LhvModel, quad: SettingQuad, trials: int, rng=None) -> ChshResult:
    """CHSH over all emitted pairs, a missing detection counting as outcome 0."""
    pair, oa, ob = _simulate(model, quad, trials, rng)
    prod = oa.astype(np.int64) * ob
    estimates, variances = [], []
    for p in range(4):
        x = prod[pair == p]
        estimates.append(float(x.mean()))
        variances.append(float(x.var()) / x.size)
    return chsh_value(*estimates, stderr=math.sqrt(sum(variances)))


@dataclass(frozen=True)
class LoopholeCalibration:
    tau: float
    quad: SettingQuad
    s: float
    detected_fraction: float
    pair_fractions: tuple[float, ...] = field(default=())

    @property
    def violates_local(self) -> bool:
        return abs(self.s) > LOCAL_BOUND + BOUND_RTOL


def calibrate_loophole(tau_grid=DEFAULT_TAU_GRID, quad_resolution: int = 16,
                       trials: int = 200_000, rng=0) -> LoopholeCalibration:
    """Search thresholds and setting quads for the largest post-selected |S|.

    Every (tau, setting) combination is evaluated on one shared sample of
    hidden variables, so a finer angle grid, which contains the coarser one
    whenever the resolutions divide, can only raise the optimum.  Ties keep
    the earliest tau in ``tau_grid`` and the lexicographically smallest angles.
    """
    tau_grid = list(tau_grid)
    if not tau_grid:
        raise ValueError("tau grid must not be empty")
    lam = draw_lambda(rng, trials)
    angles = np.arange(quad_resolution) * (TWO_PI / quad_resolution)
    best = None
    for tau in tau_grid:
        model = LhvModel(LhvKind.DETECTION_LOOPHOLE, tau)
        oa = np.stack([station_outcomes(model, "A", t, lam) for t in angles]).astype(np.float64)
        ob = np.stack([station_outcomes(model, "B", t, lam) for t in angles]).astype(np.float64)
        coinc = (oa != 0).astype(np.float64) @ (ob != 0).T.astype(np.float64)
        valid = coinc >= MIN_COINCIDENCES
        with np.errstate(invalid="ignore", divide="ignore"):
            e = np.where(valid, (oa @ ob.T) / coinc, 0.0)
        idx, val = best_quad_indices(e, valid)
        if idx is None or (best is not None and val <= best[0]):
            continue
        ia, iap, ib, ibp = idx
        pairs = [(ia, ib), (ia, ibp), (iap, ib), (iap, ibp)]
        s = e[ia, ib] + e[ia, ibp] + e[iap, ib] - e[iap, ibp]
        fractions = tuple(float(coinc[i, j]) / trials for i, j in pairs)
        quad = SettingQuad(angles[ia], angles[iap], angles[ib], angles[ibp])
        best = (val, LoopholeCalibration(tau, quad, float(s), float(np.mean(fractions)), fractions))
    if best is None:
        raise InsufficientStatisticsError("no threshold left enough coincidences on any quad")
    return best[1]
