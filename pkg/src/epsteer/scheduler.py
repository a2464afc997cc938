"""Dwell-time schedules: uniform baseline and stable conversion.

Stable conversion walks the loop once and, at every interval, solves for
the smallest dwell that pins the dominant-state proportion at the target
P0 when the state arrives at the next point. Points whose re-expansion
already meets P0 are skipped with a zero dwell (instantaneous jump); for a
two-level system the pinning dwell has the closed form

    dt = [ln(P0/(1-P0)) - ln(|a1|^2/|a2|^2)] / (2 (Im w1 - Im w2)),

with a_n the next-basis amplitudes of the current state. Higher dimensions
fall back to monotone bisection of the proportion formula.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DwellCapWarning, InputError, PinningExemptionWarning, SchedulerError
from .evolution import (
    EvolutionTrace,
    EvolutionState,
    LoopEigensystems,
    _as_cache,
    mode_index,
    run_trace,
)
from .hamiltonian import Eigensystem

__all__ = [
    "Schedule",
    "SchedulerConfig",
    "uniform_schedule",
    "dwell_for_target",
    "stable_schedule",
    "engagement",
]


@dataclass(frozen=True, eq=False)
class Schedule:
    """A dwell per loop interval; zeros are instantaneous jumps."""

    dwells: np.ndarray
    method: str
    total_time: float = field(init=False)

    def __post_init__(self):
        dw = np.asarray(self.dwells, dtype=float)
        if dw.ndim != 1:
            raise InputError(f"dwells must be 1-d, got shape {dw.shape}")
        if not np.all(np.isfinite(dw)) or np.any(dw < 0.0):
            raise InputError("all dwells must be finite and >= 0")
        dw = dw.copy()
        dw.setflags(write=False)
        object.__setattr__(self, "dwells", dw)
        object.__setattr__(self, "total_time", float(dw.sum()))

    def __len__(self) -> int:
        return self.dwells.shape[0]

    def reversed(self) -> "Schedule":
        """Dwells in reversed interval order, for clockwise replay."""
        return Schedule(dwells=self.dwells[::-1].copy(), method=self.method)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dwells": [float(v) for v in self.dwells],
            "total_time": self.total_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return cls(dwells=np.asarray(d["dwells"], dtype=float), method=str(d["method"]))


@dataclass(frozen=True)
class SchedulerConfig:
    """Stable-conversion solver settings.

    ``dwell_cap`` bounds any single dwell: near the degenerate axis the
    imaginary gap closes and the pinning dwell diverges; the cap converts
    that into a clamped dwell plus a DwellCapWarning.
    """

    p0: float = 0.9
    dwell_cap: float = 50.0
    tol: float = 1e-9

    def __post_init__(self):
        _check_p0(self.p0)
        if self.dwell_cap <= 0.0 or not math.isfinite(self.dwell_cap):
            raise InputError(f"dwell_cap must be positive and finite, got {self.dwell_cap}")
        if not (0.0 < self.tol < 1.0):
            raise InputError(f"tol must be in (0, 1), got {self.tol}")


def _check_p0(p0: float) -> None:
    if not (0.0 < p0 < 1.0):
        raise InputError(
            f"P₀ must be less than 1 and greater than 0, got {p0}"
        )


def uniform_schedule(n_intervals: int, total_time: float) -> Schedule:
    """Equal dwell at every point: constant speed on the arc."""
    if n_intervals < 1:
        raise InputError(f"n_intervals must be >= 1, got {n_intervals}")
    if not (total_time > 0.0) or not math.isfinite(total_time):
        raise InputError(f"total_time must be positive, got {total_time}")
    return Schedule(
        dwells=np.full(n_intervals, total_time / n_intervals), method="uniform"
    )


def _p1_of_dt(a: np.ndarray, omegas: np.ndarray, dt: float) -> float:
    """Dominant proportion after dwelling dt on the next point's spectrum."""
    w = np.abs(a * np.exp(-1j * omegas * dt)) ** 2
    return float(w[0] / w.sum())


def _solve_dwell(a: np.ndarray, omegas: np.ndarray, p0: float, cap: float, tol: float):
    """Smallest dwell bringing the dominant proportion up to p0.

    Returns (dt, status) with status one of 'skip', 'pinned', 'capped'.
    Raises SchedulerError when no dwell can work: a degenerate imaginary
    spectrum with the target unmet, or a vanishing dominant amplitude.
    """
    w = np.abs(a) ** 2
    total = w.sum()
    if total == 0.0:
        raise SchedulerError("state has zero amplitude at the next point")
    if w[0] / total >= p0:
        return 0.0, "skip"
    im = omegas.imag
    gap = float(im[0] - im[1:].max())
    if w[0] == 0.0:
        raise SchedulerError("dominant mode unreachable: its amplitude is zero")
    if gap <= 0.0:
        raise SchedulerError(
            "dominant proportion below target but Im(omega_1) is not "
            "strictly the largest; no dwell can restore it"
        )
    if a.shape[0] == 2:
        dt = (math.log(p0 / (1.0 - p0)) - math.log(w[0] / w[1])) / (2.0 * gap)
        dt = max(dt, 0.0)
    else:
        if _p1_of_dt(a, omegas, cap) < p0:
            return cap, "capped"
        lo, hi = 0.0, cap
        while hi - lo > 1e-15 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if _p1_of_dt(a, omegas, mid) >= p0:
                hi = mid
            else:
                lo = mid
            if abs(_p1_of_dt(a, omegas, hi) - p0) <= tol:
                break
        dt = hi
    if dt > cap:
        return cap, "capped"
    return dt, "pinned"


def dwell_for_target(
    state: EvolutionState,
    next_es: Eigensystem,
    p0: float,
    *,
    config: Optional[SchedulerConfig] = None,
) -> float:
    """Dwell at the next point that pins the dominant proportion to p0.

    Returns 0 when the proportion already meets p0 on arrival (skip rule).
    Dwells beyond the cap are clamped with a DwellCapWarning.
    """
    _check_p0(p0)
    cfg = config or SchedulerConfig(p0=p0)
    a = next_es.left_covectors @ state.psi
    dt, status = _solve_dwell(a, next_es.eigenvalues, p0, cfg.dwell_cap, cfg.tol)
    if status == "capped":
        warnings.warn(
            f"pinning dwell exceeds the cap {cfg.dwell_cap}; clamped",
            DwellCapWarning,
            stacklevel=2,
        )
    return dt


@dataclass(frozen=True)
class WalkInfo:
    """Bookkeeping from a stable-conversion walk (point indices)."""

    first_engaged: Optional[int]
    capped: tuple[int, ...]
    exempt: tuple[int, ...]


def stable_schedule(
    loop,
    family,
    mode,
    p0: float = 0.9,
    *,
    config: Optional[SchedulerConfig] = None,
    return_info: bool = False,
):
    """Walk the loop once, pinning the dominant proportion to p0.

    ``loop`` may be an OrientedLoop or a prebuilt LoopEigensystems. Returns
    ``(Schedule, EvolutionTrace)``, or ``(Schedule, EvolutionTrace,
    WalkInfo)`` with ``return_info=True``.

    The head of the traversal is skipped (zero dwells) while the proportion
    still exceeds p0. If the traversal closes on the degenerate axis, the
    final point swaps sorted labels and has zero imaginary gap, so no dwell
    there can raise the proportion; that single closing point is exempted
    with a zero dwell (and a warning) instead of failing the walk, since
    dwelling on a real spectrum provably cannot change any proportion.
    """
    _check_p0(p0)
    cfg = config or SchedulerConfig(p0=p0)
    cache = _as_cache(loop, family)
    n = cache.n_intervals
    idx = mode_index(mode)
    c = np.zeros(cache.dimension, dtype=complex)
    c[idx] = 1.0

    dwells = np.zeros(n)
    capped: list[int] = []
    exempt: list[int] = []
    for j in range(1, n + 1):
        a = cache.transfer[j] @ c
        try:
            dt, status = _solve_dwell(a, cache.omegas[j], p0, cfg.dwell_cap, cfg.tol)
        except SchedulerError as err:
            im = cache.omegas[j].imag
            degenerate = float(im[0] - im[1:].max()) <= 0.0
            if j == n and degenerate:
                # closing point on the degenerate axis: proportions are
                # frozen there, the conversion outcome is already decided
                dt, status = 0.0, "exempt"
                exempt.append(j)
                warnings.warn(
                    "closing point sits on the degenerate axis; its "
                    "proportion cannot be pinned and the point is exempted",
                    PinningExemptionWarning,
                    stacklevel=2,
                )
            else:
                raise SchedulerError(f"point {j}: {err}") from err
        if status == "capped":
            capped.append(j)
            warnings.warn(
                f"point {j}: pinning dwell exceeds cap {cfg.dwell_cap}; clamped",
                DwellCapWarning,
                stacklevel=2,
            )
        dwells[j - 1] = dt
        c = a * np.exp(-1j * cache.omegas[j] * dt)
        c /= np.linalg.norm(c)

    schedule = Schedule(dwells=dwells, method="stable")
    trace = run_trace(cache, None, schedule, mode)
    if not return_info:
        return schedule, trace
    pos = np.nonzero(dwells)[0]
    first = int(pos[0] + 1) if pos.size else None
    return schedule, trace, WalkInfo(
        first_engaged=first, capped=tuple(capped), exempt=tuple(exempt)
    )


def engagement(
    schedule: Schedule,
    trace: EvolutionTrace,
    p0: float,
    *,
    config: Optional[SchedulerConfig] = None,
) -> np.ndarray:
    """Boolean mask of engaged points of a stable-conversion trace.

    A point is engaged once the first positive dwell has been emitted,
    excluding capped dwells (clamped, so the target is knowingly missed)
    and the degenerate-axis closing exemption (zero dwell with the
    proportion below target). The pinning guarantee P1 >= p0 - tol applies
    exactly to the engaged points.
    """
    cfg = config or SchedulerConfig(p0=p0)
    dwells = schedule.dwells
    n = len(dwells)
    mask = np.zeros(n + 1, dtype=bool)
    pos = np.nonzero(dwells)[0]
    if pos.size == 0:
        return mask
    first = int(pos[0]) + 1
    p1 = trace.p1()
    for j in range(first, n + 1):
        dt = dwells[j - 1]
        if dt >= cfg.dwell_cap * (1.0 - 1e-12):
            continue
        if dt == 0.0 and p1[j] < p0 - cfg.tol:
            # the degenerate-axis closing exemption
            continue
        mask[j] = True
    return mask
