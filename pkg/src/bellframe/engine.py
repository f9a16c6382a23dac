"""Seeded Monte Carlo runner for Bell scenarios.

Each trial ``i`` takes its random numbers from Philox counter blocks
``2i`` and ``2i+1`` under the scenario seed, so any trial can be regenerated
on its own and the totals do not depend on how trials are split across
workers.  Per trial: each station picks one of its two settings uniformly,
the model produces outcomes, each detection survives with the station's
efficiency, and only coincidences enter the correlation estimates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .bell import ChshResult, SettingQuad, chsh_value
from .exceptions import InsufficientStatisticsError
from .lhv import LhvModel, station_outcomes
from .models import (
    MOVING_PORT,
    CollapseKind,
    CollapseModel,
    Reason,
    StationGeometry,
    TrialVerdict,
    moving_station_of,
    multi_psi_arrays,
    sample_joint,
    sample_marginal,
    trial_verdict,
)
from .qstate import TWO_PI, Outcome, TwoQubitState, joint_table, marginal_plus

__all__ = [
    "Scenario",
    "TrialRecord",
    "CorrelationEstimate",
    "ResultSet",
    "trial_uniforms",
    "simulate_block",
    "run",
    "replay",
    "summarize",
    "format_report",
    "PAIR_LABELS",
]

PAIR_LABELS = ("a,b", "a,b'", "a',b", "a',b'")
UNIFORMS_PER_TRIAL = 8
MIN_COINCIDENCES = 2
DEFAULT_CHUNK = 1 << 16

# columns of the per-trial uniform block
_CHOICE_A, _CHOICE_B, _JOINT, _SECOND, _EFF_A, _EFF_B, _LAMBDA = range(7)

Model = Union[CollapseModel, LhvModel]


def trial_uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """Uniforms on [0, 1) for trials ``start..stop-1``, shape ``(n, 8)``."""
    n = stop - start
    if n <= 0:
        return np.empty((0, UNIFORMS_PER_TRIAL))
    gen = np.random.Philox(key=seed, counter=2 * start)
    raw = gen.random_raw(UNIFORMS_PER_TRIAL * n)
    return ((raw >> np.uint64(11)) * (1.0 / 9007199254740992.0)).reshape(n, UNIFORMS_PER_TRIAL)


@dataclass(frozen=True)
class Scenario:
    state: TwoQubitState
    model: Model
    quad: SettingQuad
    station_a: StationGeometry
    station_b: StationGeometry
    efficiency: tuple[float, float] = (1.0, 1.0)
    trials: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        eff = tuple(float(e) for e in self.efficiency)
        if len(eff) != 2 or not all(0.0 < e <= 1.0 for e in eff):
            raise ValueError("efficiencies must lie in (0, 1]")
        object.__setattr__(self, "efficiency", eff)


@dataclass(frozen=True)
class TrialRecord:
    index: int
    choice_a: int
    choice_b: int
    setting_a: float
    setting_b: float
    outcome_a: Outcome
    outcome_b: Outcome
    verdict: TrialVerdict
    lam: float | None = None
    static_chain: Outcome | None = None


@dataclass
class _Prepared:
    verdict: TrialVerdict
    tables: np.ndarray | None = None
    p_plus_a: np.ndarray | None = None
    p_plus_b: np.ndarray | None = None
    moving: str | None = None


def _prepare(scenario: Scenario) -> _Prepared:
    model = scenario.model
    if isinstance(model, LhvModel):
        return _Prepared(TrialVerdict(False, Reason.LOCAL_HIDDEN_VARIABLE))
    verdict = trial_verdict(model, scenario.station_a, scenario.station_b)
    q, st = scenario.quad, scenario.state
    tables = np.stack([joint_table(st, a, b) for a, b in q.pairs])
    p_a = np.array([marginal_plus(st, a, "A") for a, _ in q.pairs])
    p_b = np.array([marginal_plus(st, b, "B") for _, b in q.pairs])
    moving = None
    if model.kind is CollapseKind.PER_FRAME_STATE_VECTOR and not verdict.correlated:
        moving = moving_station_of(model, scenario.station_a, scenario.station_b)
    return _Prepared(verdict, tables, p_a, p_b, moving)


@dataclass
class TrialBlock:
    """Per-trial arrays for a contiguous or explicit set of trial indices."""

    index: np.ndarray
    choice_a: np.ndarray
    choice_b: np.ndarray
    outcome_a: np.ndarray
    outcome_b: np.ndarray
    lam: np.ndarray | None = None
    static_chain: np.ndarray | None = None
    moving_port: np.ndarray | None = None

    @property
    def pair(self) -> np.ndarray:
        return 2 * self.choice_a + self.choice_b


def _simulate(scenario: Scenario, prep: _Prepared, index: np.ndarray, u: np.ndarray) -> TrialBlock:
    quad = scenario.quad
    ca = (u[:, _CHOICE_A] < 0.5).astype(np.int64)
    cb = (u[:, _CHOICE_B] < 0.5).astype(np.int64)
    pair = 2 * ca + cb
    lam = chain = moving = None
    model = scenario.model
    if isinstance(model, LhvModel):
        lam = u[:, _LAMBDA] * TWO_PI
        oa = station_outcomes(model, "A", np.where(ca == 1, quad.a_prime, quad.a), lam)
        ob = station_outcomes(model, "B", np.where(cb == 1, quad.b_prime, quad.b), lam)
    elif prep.verdict.correlated:
        oa, ob = sample_joint(prep.tables[pair], u[:, _JOINT])
    elif prep.moving is not None:
        p_moving = (prep.p_plus_b if prep.moving == "B" else prep.p_plus_a)[pair]
        moving, static, chain = multi_psi_arrays(
            prep.moving, prep.tables[pair], p_moving, u[:, _JOINT], u[:, _SECOND])
        oa, ob = (static, moving) if prep.moving == "B" else (moving, static)
    else:
        oa = sample_marginal(prep.p_plus_a[pair], u[:, _JOINT])
        ob = sample_marginal(prep.p_plus_b[pair], u[:, _SECOND])
    eff_a, eff_b = scenario.efficiency
    oa = np.where(u[:, _EFF_A] < eff_a, oa, np.int8(0)).astype(np.int8)
    ob = np.where(u[:, _EFF_B] < eff_b, ob, np.int8(0)).astype(np.int8)
    return TrialBlock(index, ca, cb, oa, ob, lam, chain, moving)


def simulate_block(scenario: Scenario, start: int, stop: int) -> TrialBlock:
    """Simulate trials ``start..stop-1`` exactly as :func:`run` does."""
    prep = _prepare(scenario)
    return _simulate(scenario, prep, np.arange(start, stop), trial_uniforms(scenario.seed, start, stop))


# -- accumulation ----------------------------------------------------------------

def _outcome_slot(o: np.ndarray) -> np.ndarray:
    """+1 -> 0, -1 -> 1, no detection -> 2."""
    return np.where(o == 1, 0, np.where(o == -1, 1, 2))


@dataclass
class _Counts:
    coincidences: np.ndarray = field(default_factory=lambda: np.zeros((4, 2, 2), np.int64))
    singles: np.ndarray = field(default_factory=lambda: np.zeros((2, 4, 3), np.int64))
    trials: np.ndarray = field(default_factory=lambda: np.zeros(4, np.int64))
    double: int = 0
    none: int = 0
    moving_clicks: int = 0
    chain_clicks: int = 0
    chain_coincidences: np.ndarray = field(default_factory=lambda: np.zeros((4, 2, 2), np.int64))

    def __add__(self, other: "_Counts") -> "_Counts":
        return _Counts(
            self.coincidences + other.coincidences,
            self.singles + other.singles,
            self.trials + other.trials,
            self.double + other.double,
            self.none + other.none,
            self.moving_clicks + other.moving_clicks,
            self.chain_clicks + other.chain_clicks,
            self.chain_coincidences + other.chain_coincidences,
        )


def _count(block: TrialBlock, prep: _Prepared) -> _Counts:
    c = _Counts()
    pair = block.pair
    sa, sb = _outcome_slot(block.outcome_a), _outcome_slot(block.outcome_b)
    c.trials = np.bincount(pair, minlength=4).astype(np.int64)
    c.singles[0] = np.bincount(pair * 3 + sa, minlength=12).reshape(4, 3)
    c.singles[1] = np.bincount(pair * 3 + sb, minlength=12).reshape(4, 3)
    both = (sa < 2) & (sb < 2)
    flat = pair[both] * 4 + sa[both] * 2 + sb[both]
    c.coincidences = np.bincount(flat, minlength=16).reshape(4, 2, 2).astype(np.int64)
    if block.static_chain is not None:
        static = block.outcome_a if prep.moving == "B" else block.outcome_b
        # port flags assume perfect detectors, so they use the unthinned ports
        fires_m = block.moving_port == MOVING_PORT
        fires_s = block.static_chain != MOVING_PORT
        c.double = int(np.sum(fires_m & fires_s))
        c.none = int(np.sum(~fires_m & ~fires_s))
        c.moving_clicks = int(np.sum(fires_m))
        c.chain_clicks = int(np.sum(fires_s))
        s_slot, ch_slot = _outcome_slot(static), _outcome_slot(block.static_chain)
        ok = s_slot < 2
        flat = pair[ok] * 4 + s_slot[ok] * 2 + ch_slot[ok]
        c.chain_coincidences = np.bincount(flat, minlength=16).reshape(4, 2, 2).astype(np.int64)
    return c


@dataclass(frozen=True)
class CorrelationEstimate:
    e: float
    stderr: float
    n: int

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "CorrelationEstimate":
        """Estimate from a 2x2 count table indexed ``[+/-, +/-]``."""
        n = int(counts.sum())
        e = float(counts[0, 0] + counts[1, 1] - counts[0, 1] - counts[1, 0]) / n
        return cls(e, math.sqrt(max(1.0 - e * e, 0.0) / n), n)


def _estimates(coincidences: np.ndarray) -> list[CorrelationEstimate | None]:
    return [CorrelationEstimate.from_counts(coincidences[p])
            if coincidences[p].sum() >= MIN_COINCIDENCES else None for p in range(4)]


def _chsh(estimates) -> ChshResult | None:
    if any(e is None for e in estimates):
        return None
    stderr = math.sqrt(sum(e.stderr**2 for e in estimates))
    return chsh_value(*(e.e for e in estimates), stderr=stderr)


@dataclass(frozen=True, eq=False)
class ResultSet:
    """Counts and estimates of one run.

    ``coincidences[p, i, j]`` counts pair ``p`` (order of ``PAIR_LABELS``)
    with A outcome ``i`` and B outcome ``j`` (0 is +1, 1 is -1).
    ``singles[s, p, k]`` counts station ``s`` (0 = A) outcomes ``+1, -1``
    and non-detections under pair ``p``.
    """

    trials: int
    verdict: TrialVerdict
    coincidences: np.ndarray
    singles: np.ndarray
    pair_trials: np.ndarray
    estimates: tuple[CorrelationEstimate | None, ...]
    chsh: ChshResult | None
    multi_psi: dict | None = None

    @property
    def detected_pair_fraction(self) -> float:
        return float(self.coincidences.sum()) / self.trials

    @property
    def verdict_counts(self) -> dict[str, int]:
        return {self.verdict.reason.value: self.trials}

    def as_dict(self) -> dict:
        out = {
            "trials": self.trials,
            "coincidences": self.coincidences.tolist(),
            "singles": self.singles.tolist(),
            "pair_trials": self.pair_trials.tolist(),
            "verdict": [self.verdict.correlated, self.verdict.reason.value],
        }
        if self.multi_psi is not None:
            out["multi_psi"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                                for k, v in self.multi_psi.items()}
        return out

    def __eq__(self, other):
        if not isinstance(other, ResultSet):
            return NotImplemented
        return self.as_dict() == other.as_dict()


def _chunks(trials: int, size: int):
    return [(i, min(i + size, trials)) for i in range(0, trials, size)]


def run(scenario: Scenario, workers: int = 1, chunk_size: int = DEFAULT_CHUNK,
        strict: bool = True) -> ResultSet:
    """Simulate every trial of ``scenario`` and estimate correlations.

    Raises :class:`InsufficientStatisticsError` when ``strict`` and a setting
    pair kept fewer than two coincidences; otherwise that pair's estimate is
    ``None``.
    """
    if workers < 1:
        raise ValueError("workers must be positive")
    prep = _prepare(scenario)

    def work(bounds):
        start, stop = bounds
        u = trial_uniforms(scenario.seed, start, stop)
        return _count(_simulate(scenario, prep, np.arange(start, stop), u), prep)

    chunks = _chunks(scenario.trials, chunk_size)
    if workers == 1:
        parts = [work(b) for b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    total = _Counts()
    for part in parts:
        total = total + part

    estimates = _estimates(total.coincidences)
    short = [PAIR_LABELS[p] for p, e in enumerate(estimates) if e is None]
    if short and strict:
        raise InsufficientStatisticsError(
            f"fewer than {MIN_COINCIDENCES} coincidences for setting pair(s) {', '.join(short)}",
            short)
    multi = None
    if prep.moving is not None:
        multi = {
            "moving_station": prep.moving,
            "double_detection": total.double,
            "no_detection": total.none,
            "moving_detector_clicks": total.moving_clicks,
            "static_chain_clicks": total.chain_clicks,
            "static_chain_coincidences": total.chain_coincidences,
        }
    return ResultSet(scenario.trials, prep.verdict, total.coincidences, total.singles,
                     total.trials, tuple(estimates), _chsh(estimates), multi)


def replay(scenario: Scenario, indices: Sequence[int]) -> list[TrialRecord]:
    """Regenerate the listed trials without simulating the others."""
    prep = _prepare(scenario)
    records = []
    for i in indices:
        i = int(i)
        if not 0 <= i < scenario.trials:
            raise IndexError(f"trial index {i} outside 0..{scenario.trials - 1}")
        b = _simulate(scenario, prep, np.array([i]), trial_uniforms(scenario.seed, i, i + 1))
        ca, cb = int(b.choice_a[0]), int(b.choice_b[0])
        records.append(TrialRecord(
            index=i,
            choice_a=ca,
            choice_b=cb,
            setting_a=scenario.quad.setting_a(ca),
            setting_b=scenario.quad.setting_b(cb),
            outcome_a=Outcome(int(b.outcome_a[0])),
            outcome_b=Outcome(int(b.outcome_b[0])),
            verdict=prep.verdict,
            lam=None if b.lam is None else float(b.lam[0]),
            static_chain=None if b.static_chain is None else Outcome(int(b.static_chain[0])),
        ))
    return records


def summarize(results: ResultSet) -> dict:
    """Machine-readable report; :func:`format_report` renders it as text."""
    pairs = []
    for label, est, counts in zip(PAIR_LABELS, results.estimates, results.coincidences):
        entry = {"pair": label, "n_pp": int(counts[0, 0]), "n_pm": int(counts[0, 1]),
                 "n_mp": int(counts[1, 0]), "n_mm": int(counts[1, 1])}
        if est is None:
            entry.update(status="UNDERSAMPLED", e=None, stderr=None, n=int(counts.sum()))
        else:
            entry.update(status="OK", e=est.e, stderr=est.stderr, n=est.n)
        pairs.append(entry)

    singles = {}
    for s, name in enumerate("AB"):
        tot = results.singles[s].sum(axis=0)
        singles[name] = {
            "plus": int(tot[0]), "minus": int(tot[1]), "none": int(tot[2]),
            "plus_rate": float(tot[0]) / results.trials,
            "minus_rate": float(tot[1]) / results.trials,
        }

    report = {
        "trials": results.trials,
        "correlations": pairs,
        "singles": singles,
        "detected_pair_fraction": results.detected_pair_fraction,
        "verdicts": {
            "correlated": results.verdict.correlated,
            "reasons": results.verdict_counts,
        },
    }
    chsh = results.chsh
    if chsh is None:
        report.update(s=None, abs_s=None, s_stderr=None, violates_local=None, z_score=None)
    else:
        report.update(s=chsh.s, abs_s=chsh.abs_s, s_stderr=chsh.stderr,
                      violates_local=chsh.violates_local, z_score=chsh.z_score)
    if results.multi_psi is not None:
        m = results.multi_psi
        chain_est = _estimates(m["static_chain_coincidences"])
        chain_chsh = _chsh(chain_est)
        report["multi_psi"] = {
            "moving_station": m["moving_station"],
            "double_detection": m["double_detection"],
            "no_detection": m["no_detection"],
            "double_detection_rate": m["double_detection"] / results.trials,
            "no_detection_rate": m["no_detection"] / results.trials,
            "moving_detector_rate": m["moving_detector_clicks"] / results.trials,
            "static_chain_rate": m["static_chain_clicks"] / results.trials,
            "static_chain_abs_s": None if chain_chsh is None else chain_chsh.abs_s,
        }
    return report


def format_report(report: dict) -> str:
    lines = [f"trials: {report['trials']}"]
    if report["abs_s"] is None:
        lines.append("S: undefined (undersampled setting pair)")
    else:
        z = report["z_score"]
        lines.append(f"S = {report['s']:.6g} +- {report['s_stderr']:.3g}  "
                     f"(|S| = {report['abs_s']:.6g}, violates local bound: "
                     f"{'yes' if report['violates_local'] else 'no'}"
                     + (f", z = {z:.3g})" if z is not None else ")"))
    for p in report["correlations"]:
        if p["status"] == "UNDERSAMPLED":
            lines.append(f"  E({p['pair']}): UNDERSAMPLED (n={p['n']})")
        else:
            lines.append(f"  E({p['pair']}) = {p['e']:.6g} +- {p['stderr']:.3g} (n={p['n']})")
    for reason, count in report["verdicts"]["reasons"].items():
        lines.append(f"verdict {reason}: {count} ({100.0 * count / report['trials']:.1f}%)")
    for name, s in report["singles"].items():
        lines.append(f"singles {name}: +1 {s['plus']}, -1 {s['minus']}, none {s['none']}")
    lines.append(f"detected pair fraction: {report['detected_pair_fraction']:.6g}")
    if "multi_psi" in report:
        m = report["multi_psi"]
        lines.append(f"double detections: {m['double_detection']} "
                     f"({m['double_detection_rate']:.4g}), no detections: {m['no_detection']} "
                     f"({m['no_detection_rate']:.4g})")
    return "\n".join(lines)
