"""CHSH functional, per-trial local bound and analyzer-setting optimization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qstate import TwoQubitState, canonical_angle, correlation, eigenvector

__all__ = [
    "LOCAL_BOUND",
    "QUANTUM_BOUND",
    "SettingQuad",
    "ChshResult",
    "chsh_value",
    "per_trial_value",
    "quantum_chsh",
    "correlation_grid",
    "best_quad_indices",
    "optimize_settings",
]

LOCAL_BOUND = 2.0
# slack for float rounding when comparing against the local bound
BOUND_RTOL = 1e-9
QUANTUM_BOUND = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class SettingQuad:
    """Two settings per station; angles are stored canonicalized into [0, 2pi)."""

    a: float
    a_prime: float
    b: float
    b_prime: float

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            object.__setattr__(self, name, canonical_angle(getattr(self, name)))

    @property
    def pairs(self) -> tuple[tuple[float, float], ...]:
        """Setting pairs in CHSH order: (a,b), (a,b'), (a',b), (a',b')."""
        return (
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.a_prime, self.b, self.b_prime)

    def setting_a(self, choice: int) -> float:
        return self.a_prime if choice else self.a

    def setting_b(self, choice: int) -> float:
        return self.b_prime if choice else self.b


@dataclass(frozen=True)
class ChshResult:
    s: float
    stderr: float | None = None

    @property
    def abs_s(self) -> float:
        return abs(self.s)

    @property
    def violates_local(self) -> bool:
        return self.abs_s > LOCAL_BOUND + BOUND_RTOL

    @property
    def z_score(self) -> float | None:
        """Distance of |S| above the local bound in standard errors."""
        if not self.stderr:
            return None
        return (self.abs_s - LOCAL_BOUND) / self.stderr


def chsh_value(e_ab: float, e_abp: float, e_apb: float, e_apbp: float,
               stderr: float | None = None) -> ChshResult:
    """``S = E(a,b) + E(a,b') + E(a',b) - E(a',b')``."""
    values = (e_ab, e_abp, e_apb, e_apbp)
    for e in values:
        if not -1.0 - 1e-12 <= e <= 1.0 + 1e-12:
            raise ValueError(f"correlation {e!r} outside [-1, 1]")
    return ChshResult(e_ab + e_abp + e_apb - e_apbp, stderr)


def per_trial_value(alpha: int, beta: int, alpha_p: int, beta_p: int) -> int:
    """``alpha*(beta + beta') + alpha'*(beta - beta')``, always +2 or -2."""
    for v in (alpha, beta, alpha_p, beta_p):
        if v not in (1, -1):
            raise ValueError(f"per-trial values must be +1 or -1, got {v!r}")
    return alpha * (beta + beta_p) + alpha_p * (beta - beta_p)


def quantum_chsh(state: TwoQubitState, quad: SettingQuad) -> ChshResult:
    return chsh_value(*(correlation(state, a, b) for a, b in quad.pairs))


def _projectors(angles: np.ndarray) -> np.ndarray:
    """Observable ``P(+) - P(-)`` for each angle, shape ``(n, 2, 2)``."""
    out = np.empty((angles.size, 2, 2), dtype=np.complex128)
    for k, t in enumerate(angles):
        vp = eigenvector(t, 1)
        vm = eigenvector(t, -1)
        out[k] = np.outer(vp, vp.conj()) - np.outer(vm, vm.conj())
    return out


def correlation_grid(state: TwoQubitState, angles_a: np.ndarray,
                     angles_b: np.ndarray) -> np.ndarray:
    """``E[i, j] = correlation(state, angles_a[i], angles_b[j])``."""
    m = state.matrix
    oa = _projectors(np.asarray(angles_a, dtype=float))
    ob = _projectors(np.asarray(angles_b, dtype=float))
    # <psi| A (x) B |psi> = sum conj(m_ij) A_ik B_jl m_kl
    return np.einsum("ij,aik,bjl,kl->ab", m.conj(), oa, ob, m, optimize=True).real


def best_quad_indices(e: np.ndarray, valid: np.ndarray | None = None):
    """Maximize |S| over index quads of a correlation matrix ``e``.

    ``S[a, a', b, b'] = e[a,b] + e[a,b'] + e[a',b] - e[a',b']``; entries whose
    pairs are not all ``valid`` are skipped.  The first maximum in
    lexicographic index order wins.  Returns ``(indices, |S|)`` with indices
    ``None`` if nothing is valid.
    """
    n = e.shape[0]
    best_val, best_idx = -1.0, None
    # one `a` slab at a time bounds memory at n**3
    for ia in range(n):
        s = (e[ia, :, None] + e[ia, None, :])[None] + e[:, :, None] - e[:, None, :]
        mag = np.abs(s)
        if valid is not None:
            ok = ((valid[ia, :, None] & valid[ia, None, :])[None]
                  & valid[:, :, None] & valid[:, None, :])
            mag = np.where(ok, mag, -1.0)
        flat = int(np.argmax(mag))
        if mag.flat[flat] > best_val:
            best_val = float(mag.flat[flat])
            best_idx = (ia, *(int(i) for i in np.unravel_index(flat, mag.shape)))
    return best_idx, best_val


def optimize_settings(state: TwoQubitState, resolution: int = 64) -> tuple[SettingQuad, ChshResult]:
    """Grid search over setting quads, then coordinate-descent refinement.

    The grid uses ``resolution`` equally spaced angles per setting.  The
    refinement tries ``+-step`` on each angle in turn, accepts strict
    improvements of ``|S|`` and halves the step once no move helps, until the
    step drops below 1e-6 rad.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    grid = np.arange(resolution) * (2.0 * math.pi / resolution)
    e = correlation_grid(state, grid, grid)
    (ia, iap, ib, ibp), best = best_quad_indices(e)
    x = [grid[ia], grid[iap], grid[ib], grid[ibp]]

    def score(v):
        return abs(quantum_chsh(state, SettingQuad(*v)).s)

    best = score(x)
    step = 2.0 * math.pi / resolution
    while step >= 1e-6:
        improved = True
        while improved:
            improved = False
            for k in range(4):
                for sign in (1.0, -1.0):
                    trial = list(x)
                    trial[k] = x[k] + sign * step
                    val = score(trial)
                    if val > best:
                        best, x, improved = val, trial, True
                        break
        step *= 0.5
    quad = SettingQuad(*x)
    return quad, quantum_chsh(state, quad)
