"""Discrete difference-iteration evolution along an oriented loop.

The state at point j is held as coefficients c_{n,j} in the instantaneous
sorted biorthonormal basis, Psi_j = sum_n c_{n,j} psi_{n,j}. A step to the
next point re-expands the physical state in the next basis and multiplies
each coefficient by exp(-1i * omega_{n,j+1} * dt_j): dwells are spent at
the point just jumped to, and a zero dwell is an instantaneous jump that
leaves the physical state unchanged.

Per-point eigensystems of a traversal are computed once (gauge-continuous
along the path) and cached in :class:`LoopEigensystems`; traces and the
optimizer's batched fitness evaluations share that cache.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import InputError, InvalidStateError, StepError, DegeneracyError
from .hamiltonian import (
    EP_EXCLUSION_RADIUS,
    Eigensystem,
    HamiltonianFamily,
    ParameterPoint,
    eigensystem,
    evaluate,
    locate_eps,
)
from .path import OrientedLoop, min_ep_distance

__all__ = [
    "MODE_A",
    "MODE_B",
    "ModeBasis",
    "EvolutionState",
    "TraceSample",
    "EvolutionTrace",
    "LoopEigensystems",
    "mode_index",
    "init_state",
    "step",
    "proportions",
    "weighted_eigenvalue",
    "mode_projection",
    "run_trace",
]

MODE_A = "A"
MODE_B = "B"

# exp(x) overflows past ~709; refuse steps whose per-step amplification
# exponent cannot be represented.
_MAX_EXPONENT = 700.0

_STATE_TOL = 1e-10


def mode_index(mode) -> int:
    """Map mode label A/B (or an index) to the sorted-basis index 0/1."""
    if isinstance(mode, str):
        m = mode.strip().upper()
        if m == MODE_A:
            return 0
        if m == MODE_B:
            return 1
        raise InputError(f"mode must be 'A' or 'B', got {mode!r}")
    idx = int(mode)
    if idx not in (0, 1):
        raise InputError(f"mode index must be 0 or 1, got {mode!r}")
    return idx


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """Start-point modes: A and B are the first and second sorted eigenstates
    at the traversal's starting point."""

    theta_a: np.ndarray
    theta_b: np.ndarray
    psi_a: np.ndarray
    psi_b: np.ndarray

    @classmethod
    def from_eigensystem(cls, es: Eigensystem) -> "ModeBasis":
        return cls(
            theta_a=es.left(0).copy(),
            theta_b=es.left(1).copy(),
            psi_a=es.right(0).copy(),
            psi_b=es.right(1).copy(),
        )


@dataclass(frozen=True, eq=False)
class EvolutionState:
    """Physical state plus its coefficients in the instantaneous basis."""

    psi: np.ndarray
    coeffs: np.ndarray
    step_index: int
    eigensystem: Eigensystem

    def __post_init__(self):
        if not np.any(self.coeffs):
            raise InvalidStateError("all coefficients are zero")
        resid = np.linalg.norm(self.psi - self.eigensystem.right_vectors @ self.coeffs)
        scale = max(np.linalg.norm(self.psi), 1e-300)
        if resid / scale > _STATE_TOL:
            raise InvalidStateError(
                f"state is inconsistent with its basis expansion "
                f"(relative residual {resid / scale:.3g})"
            )


@dataclass(frozen=True, eq=False)
class TraceSample:
    """Per-point record of a traversal.

    ``dt`` is the dwell spent at this point on arrival (0 at the start
    point); ``speed`` is the arc increment of the incoming interval over
    that dwell, +inf for instantaneous jumps. ``log_scale`` accumulates the
    natural log of the state norm dropped by per-step renormalization; every
    reported quantity is scale invariant.
    """

    j: int
    point: ParameterPoint
    dt: float
    t_cum: float
    proportions: np.ndarray
    omega_bar: complex
    zeta_a: float
    zeta_b: float
    speed: float
    log_scale: float


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """One sample per loop point, in traversal order."""

    samples: tuple
    direction: str
    mode: str
    schedule: object

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def end(self) -> TraceSample:
        return self.samples[-1]

    @property
    def total_time(self) -> float:
        return self.samples[-1].t_cum

    @property
    def zeta_end(self) -> tuple[float, float]:
        return (self.samples[-1].zeta_a, self.samples[-1].zeta_b)

    def p1(self) -> np.ndarray:
        """Dominant-state proportion at every sample."""
        return np.array([s.proportions[0] for s in self.samples])


class LoopEigensystems:
    """Per-point eigensystems of one oriented traversal, plus the overlap
    (transfer) matrices between consecutive bases.

    Built once per (loop, direction) and reused across schedules: the
    optimizer evaluates thousands of dwell vectors against the same cache.
    Immutable after construction; safe to share between threads.
    """

    def __init__(self, points, dc, direction, systems: Sequence[Eigensystem], family=None):
        self.points = np.asarray(points, dtype=float)
        self.dc = np.asarray(dc, dtype=float)
        self.direction = direction
        self.family = family
        self.systems = tuple(systems)
        n = len(self.systems)
        if n != self.points.shape[0]:
            raise InputError("one eigensystem per loop point is required")
        ndim = self.systems[0].dimension
        self.omegas = np.empty((n, ndim), dtype=complex)
        self.right = np.empty((n, ndim, ndim), dtype=complex)
        self.left = np.empty((n, ndim, ndim), dtype=complex)
        for j, es in enumerate(self.systems):
            self.omegas[j] = es.eigenvalues
            self.right[j] = es.right_vectors
            self.left[j] = es.left_covectors
        self.transfer = np.empty((n, ndim, ndim), dtype=complex)
        self.transfer[0] = np.eye(ndim)
        for j in range(1, n):
            self.transfer[j] = self.left[j] @ self.right[j - 1]
        self.mode_basis = ModeBasis.from_eigensystem(self.systems[0])
        # start-mode covectors applied to every point's right basis: row a of
        # zmat[j] maps coefficients at point j to the raw mode-a amplitude
        theta = np.stack([self.mode_basis.theta_a, self.mode_basis.theta_b])
        self.zmat = np.einsum("an,jnm->jam", theta, self.right)
        for arr in (self.points, self.dc, self.omegas, self.right, self.left,
                    self.transfer, self.zmat):
            arr.setflags(write=False)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.n_points - 1

    @property
    def dimension(self) -> int:
        return self.omegas.shape[1]

    def eigensystem_at(self, j: int) -> Eigensystem:
        return self.systems[j]

    @classmethod
    def build(
        cls,
        oriented: OrientedLoop,
        family: HamiltonianFamily,
        *,
        cond_bound: float = 1e8,
        ep_guard: bool = True,
    ) -> "LoopEigensystems":
        """Diagonalize the family along a traversal with path-gauge continuity.

        With ``ep_guard`` (smooth families only) the traversal is rejected if
        any point comes within EP_EXCLUSION_RADIUS of an exceptional point.
        """
        pts = oriented.points
        if ep_guard and family.smooth:
            lo = pts.min(axis=0) - 1.0
            hi = pts.max(axis=0) + 1.0
            eps = locate_eps(family, (lo[0], hi[0], lo[1], hi[1]))
            d = min_ep_distance(pts, eps)
            if d < EP_EXCLUSION_RADIUS:
                raise DegeneracyError(
                    f"loop passes within {d:.3g} of an exceptional point"
                )
        systems = []
        prev = None
        for j in range(pts.shape[0]):
            es = eigensystem(
                evaluate(family, pts[j]),
                prev,
                point=pts[j],
                cond_bound=cond_bound,
            )
            systems.append(es)
            prev = es
        return cls(pts, oriented.dc, oriented.direction, systems, family=family)


def init_state(start: Eigensystem, mode) -> EvolutionState:
    """State prepared in mode A or B of the traversal's start eigensystem."""
    idx = mode_index(mode)
    c = np.zeros(start.dimension, dtype=complex)
    c[idx] = 1.0
    return EvolutionState(
        psi=start.right_vectors[:, idx].copy(),
        coeffs=c,
        step_index=0,
        eigensystem=start,
    )


def step(state: EvolutionState, next_es: Eigensystem, dt: float) -> EvolutionState:
    """One difference-iteration step onto the next point's eigensystem.

    Implements the spectral propagator literally: the new coefficients are
    the next-basis amplitudes of the current physical state, damped or
    amplified by exp(-1i*omega*dt). No renormalization is applied here, so
    the result equals expm(-1i*H_next*dt) @ psi; trace runs renormalize
    between steps (see :func:`run_trace`).
    """
    if not math.isfinite(dt):
        raise InputError(f"dwell time {dt!r} is not finite")
    if dt < 0.0:
        raise InputError(f"dwell time must be >= 0, got {dt}")
    grow = float(np.max(next_es.eigenvalues.imag * dt))
    if grow > _MAX_EXPONENT:
        raise StepError(
            f"exp({grow:.1f}) overflows; renormalize the state between steps "
            f"or split the dwell (policy: run_trace renormalizes after every "
            f"step and tracks the dropped scale)"
        )
    a = next_es.left_covectors @ state.psi
    c = a * np.exp(-1j * next_es.eigenvalues * dt)
    return EvolutionState(
        psi=next_es.right_vectors @ c,
        coeffs=c,
        step_index=state.step_index + 1,
        eigensystem=next_es,
    )


def proportions(state: EvolutionState) -> np.ndarray:
    """Normalized eigenstate weights P_n = |c_n|^2 / sum_m |c_m|^2."""
    w = np.abs(state.coeffs) ** 2
    total = w.sum()
    if total == 0.0:
        raise InvalidStateError("all coefficients are zero")
    return w / total


def weighted_eigenvalue(state: EvolutionState) -> complex:
    """Proportion-weighted eigenvalue locating the state between sheets."""
    return complex(np.dot(proportions(state), state.eigensystem.eigenvalues))


def mode_projection(state: EvolutionState, basis: ModeBasis) -> tuple[float, float]:
    """Fractions of the state on the start-point modes A and B.

    Normalized over the two modes only, so zeta_a + zeta_b = 1.
    """
    wa = abs(np.dot(basis.theta_a, state.psi)) ** 2
    wb = abs(np.dot(basis.theta_b, state.psi)) ** 2
    total = wa + wb
    if total == 0.0:
        raise InvalidStateError("state has no overlap with either mode")
    return (wa / total, wb / total)


def _as_cache(loop, family) -> LoopEigensystems:
    if isinstance(loop, LoopEigensystems):
        return loop
    if isinstance(loop, OrientedLoop):
        if family is None:
            raise InputError("a Hamiltonian family is required to build the cache")
        return LoopEigensystems.build(loop, family)
    raise InputError(f"cannot run a trace over a {type(loop).__name__}")


def run_trace(loop, family, schedule, mode) -> EvolutionTrace:
    """Evolve one input mode over a full traversal under a schedule.

    ``loop`` may be an OrientedLoop (the eigensystem cache is built on the
    fly) or a prebuilt LoopEigensystems. The schedule supplies one dwell per
    interval, spent at the interval's end point.
    """
    cache = _as_cache(loop, family)
    dwells = np.asarray(getattr(schedule, "dwells", schedule), dtype=float)
    if dwells.shape != (cache.n_intervals,):
        raise InputError(
            f"schedule length {dwells.shape} does not match "
            f"{cache.n_intervals} loop intervals"
        )
    if not np.all(np.isfinite(dwells)) or np.any(dwells < 0.0):
        raise InputError("dwells must be finite and >= 0")
    grow = cache.omegas[1:].imag.max(axis=1) * dwells
    if np.any(grow > _MAX_EXPONENT):
        j = int(np.argmax(grow > _MAX_EXPONENT))
        raise StepError(
            f"dwell {dwells[j]} at point {j + 1} overflows the propagator "
            f"exponential; renormalize or shorten the dwell"
        )

    idx = mode_index(mode)
    c0 = np.zeros(cache.dimension, dtype=complex)
    c0[idx] = 1.0
    coeffs, logscale = _kernels.propagate_coeffs(
        cache.transfer, cache.omegas, cache.right, dwells, c0
    )

    w = np.abs(coeffs) ** 2
    props = w / w.sum(axis=1, keepdims=True)
    omega_bar = np.einsum("jn,jn->j", props, cache.omegas)
    amps = np.einsum("jam,jm->ja", cache.zmat, coeffs)
    wz = np.abs(amps) ** 2
    zeta = wz / wz.sum(axis=1, keepdims=True)

    t_cum = np.concatenate([[0.0], np.cumsum(dwells)])
    samples = []
    for j in range(cache.n_points):
        dt = 0.0 if j == 0 else float(dwells[j - 1])
        speed = math.inf if dt == 0.0 else float(cache.dc[j - 1] / dt)
        samples.append(
            TraceSample(
                j=j,
                point=cache.eigensystem_at(j).point,
                dt=dt,
                t_cum=float(t_cum[j]),
                proportions=props[j],
                omega_bar=complex(omega_bar[j]),
                zeta_a=float(zeta[j, 0]),
                zeta_b=float(zeta[j, 1]),
                speed=speed,
                log_scale=float(logscale[j]),
            )
        )
    return EvolutionTrace(
        samples=tuple(samples),
        direction=cache.direction,
        mode=MODE_A if idx == 0 else MODE_B,
        schedule=schedule,
    )
