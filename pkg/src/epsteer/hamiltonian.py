"""Parametric non-Hermitian Hamiltonian families and their eigensystems.

The built-in family is the two-level gain/loss system with unit coupling,

    H(x, y) = [[x + iy, 1], [1, -(x + iy)]],

whose eigenvalues +/-sqrt((x+iy)^2 + 1) coalesce at the exceptional points
(0, 1) and (0, -1). Eigensystems are biorthonormal (left covectors are the
rows of the inverse right-eigenvector matrix), sorted by descending
imaginary part with ties broken by descending real part, and carry a
deterministic gauge: unit-norm right vectors whose largest-modulus component
is real positive, or, when a previous eigensystem is supplied, phases chosen
for continuity with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import DegeneracyError, InputError

__all__ = [
    "EP_EXCLUSION_RADIUS",
    "ParameterPoint",
    "HamiltonianFamily",
    "Eigensystem",
    "two_level_family",
    "table_family",
    "as_point",
    "evaluate",
    "eigensystem",
    "regauge",
    "locate_eps",
    "sheet_sample",
]

# Parameter-distance guard around exceptional points: paths and grid nodes
# closer than this are rejected (eigenvector conditioning diverges at an EP).
EP_EXCLUSION_RADIUS = 1e-6

# Eigenvector-matrix condition bound above which a matrix counts as
# near-defective.
DEFAULT_COND_BOUND = 1e8

# Two Im(omega) values closer than this (relative to the spectral scale) are
# treated as tied and ordered by descending Re(omega).
_IM_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ParameterPoint:
    """Position in the family's parameter plane (detuning x, gain/loss y)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InputError(f"parameter point ({self.x}, {self.y}) is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance(self, other: "ParameterPoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def as_point(p) -> ParameterPoint:
    """Coerce a ParameterPoint, 2-sequence, or 2-array to a ParameterPoint."""
    if isinstance(p, ParameterPoint):
        return p
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.size != 2:
        raise InputError(f"expected a point with 2 components, got {arr.size}")
    return ParameterPoint(float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class HamiltonianFamily:
    """A parametric matrix family over the (x, y) plane.

    ``evaluator`` must be deterministic: the same point yields the same
    matrix, entrywise exact. ``smooth`` marks families that can be evaluated
    anywhere in the plane (needed by the discriminant root search); table
    lookups are not smooth.
    """

    dimension: int
    evaluator: Callable[[float, float], np.ndarray]
    name: str = "custom"
    smooth: bool = True

    def __post_init__(self):
        if self.dimension < 2:
            raise InputError("family dimension must be >= 2")


def two_level_family() -> HamiltonianFamily:
    """The built-in family [[x+iy, 1], [1, -x-iy]]."""

    def _eval(x: float, y: float) -> np.ndarray:
        z = complex(x, y)
        return np.array([[z, 1.0], [1.0, -z]], dtype=complex)

    return HamiltonianFamily(dimension=2, evaluator=_eval, name="two_level")


def table_family(
    points: Sequence, matrices: Sequence, tol: float = 1e-9, name: str = "table"
) -> HamiltonianFamily:
    """Family backed by a finite point -> matrix table.

    Lookup matches points within ``tol`` (Euclidean); evaluating anywhere
    else raises. Intended for custom systems supplied already in matrix
    form, traversed along a polyline through exactly the tabled points.
    """
    pts = np.asarray([as_point(p).as_array() for p in points], dtype=float)
    mats = [np.asarray(m, dtype=complex) for m in matrices]
    if len(mats) != len(pts):
        raise InputError(
            f"table has {len(pts)} points but {len(mats)} matrices"
        )
    if not mats:
        raise InputError("matrix table is empty")
    dim = mats[0].shape[0]
    for i, m in enumerate(mats):
        if m.shape != (dim, dim):
            raise InputError(f"table matrix {i} is not {dim}x{dim}")

    def _eval(x: float, y: float) -> np.ndarray:
        d = np.hypot(pts[:, 0] - x, pts[:, 1] - y)
        k = int(np.argmin(d))
        if d[k] > tol:
            raise InputError(
                f"point ({x}, {y}) is not in the matrix table (nearest is "
                f"{d[k]:.3g} away, tol {tol:.3g})"
            )
        return mats[k].copy()

    return HamiltonianFamily(dimension=dim, evaluator=_eval, name=name, smooth=False)


def evaluate(family: HamiltonianFamily, p) -> np.ndarray:
    """Evaluate the family matrix at a parameter point."""
    pt = as_point(p)
    mat = np.asarray(family.evaluator(pt.x, pt.y), dtype=complex)
    n = family.dimension
    if mat.shape != (n, n):
        raise InputError(
            f"family evaluator returned shape {mat.shape}, expected {(n, n)}"
        )
    return mat


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Sorted biorthonormal eigensystem at one parameter point.

    ``right_vectors`` holds unit-norm right eigenvectors as columns;
    ``left_covectors`` holds the matching left covectors as rows, i.e. the
    inverse of the right-vector matrix, so <theta_m|psi_n> = delta_mn.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_covectors: np.ndarray
    point: Optional[ParameterPoint] = None

    @property
    def dimension(self) -> int:
        return self.eigenvalues.shape[0]

    def right(self, n: int) -> np.ndarray:
        """Right eigenvector of the n-th sorted eigenvalue."""
        return self.right_vectors[:, n]

    def left(self, n: int) -> np.ndarray:
        """Left covector of the n-th sorted eigenvalue (row vector)."""
        return self.left_covectors[n, :]

    def reconstruct(self) -> np.ndarray:
        """Sum of omega_n |psi_n><theta_n|; equals the source matrix."""
        return (self.right_vectors * self.eigenvalues[None, :]) @ self.left_covectors


def _sort_order(eigvals: np.ndarray) -> np.ndarray:
    """Indices sorting by Im descending; Im-ties sorted by Re descending."""
    scale = max(1.0, float(np.max(np.abs(eigvals))))
    tol = _IM_TIE_RTOL * scale
    order = sorted(
        range(eigvals.shape[0]),
        key=lambda i: (-eigvals[i].imag, -eigvals[i].real),
    )
    # group indices whose Im parts are within tol and re-sort each group by Re
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and abs(
            eigvals[order[j]].imag - eigvals[order[i]].imag
        ) <= tol:
            j += 1
        group = sorted(order[i:j], key=lambda k: -eigvals[k].real)
        out.extend(group)
        i = j
    return np.array(out, dtype=int)


def _eig2(mat: np.ndarray):
    """Closed-form eigenvalues/vectors of a 2x2 complex matrix."""
    a, b = mat[0, 0], mat[0, 1]
    c, d = mat[1, 0], mat[1, 1]
    half_tr = 0.5 * (a + d)
    s = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    lams = np.array([half_tr + s, half_tr - s])
    vecs = np.empty((2, 2), dtype=complex)
    for k, lam in enumerate(lams):
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, c])
        n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
        if n1 == 0.0 and n2 == 0.0:
            # scalar matrix: any basis diagonalizes; use the standard one
            v, nv = np.eye(2, dtype=complex)[:, k], 1.0
        elif n1 >= n2:
            v, nv = v1, n1
        else:
            v, nv = v2, n2
        vecs[:, k] = v / nv
    return lams, vecs


def eigensystem(
    matrix: np.ndarray,
    previous: Optional[Eigensystem] = None,
    *,
    point=None,
    cond_bound: float = DEFAULT_COND_BOUND,
) -> Eigensystem:
    """Sorted, gauge-fixed, biorthonormal eigensystem of a square matrix.

    Parameters
    ----------
    matrix : (N, N) complex array
        Must be diagonalizable: the right-eigenvector matrix condition
        number must stay below ``cond_bound``.
    previous : Eigensystem, optional
        When given, each right vector is re-phased (after sorting) so its
        overlap with the same-index previous vector has non-negative real
        part, keeping traces along a path gauge-continuous.
    point : optional
        Parameter point stored on the result and named in degeneracy errors.

    Raises
    ------
    DegeneracyError
        If the matrix is defective or near-defective.
    """
    mat = np.asarray(matrix, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InputError(f"matrix must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat.view(float))):
        raise InputError("matrix has non-finite entries")
    pt = as_point(point) if point is not None else None
    n = mat.shape[0]
    if n == 2:
        lams, vecs = _eig2(mat)
    else:
        lams, vecs = np.linalg.eig(mat)
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)

    order = _sort_order(lams)
    lams = lams[order]
    vecs = vecs[:, order]

    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > cond_bound:
        where = f" at point ({pt.x}, {pt.y})" if pt is not None else ""
        raise DegeneracyError(
            f"matrix{where} is defective or near-defective "
            f"(eigenvector condition {cond:.3g} exceeds {cond_bound:.3g})"
        )

    # standalone gauge: largest-modulus component made real positive
    for k in range(n):
        idx = int(np.argmax(np.abs(vecs[:, k])))
        phase = vecs[idx, k] / abs(vecs[idx, k])
        vecs[:, k] /= phase
    # path gauge: non-negative real overlap with the previous same-index vector
    if previous is not None:
        for k in range(n):
            ov = np.vdot(previous.right_vectors[:, k], vecs[:, k])
            if abs(ov) > 0.0:
                vecs[:, k] *= ov.conjugate() / abs(ov)

    left = np.linalg.inv(vecs)
    return Eigensystem(
        eigenvalues=lams, right_vectors=vecs, left_covectors=left, point=pt
    )


def regauge(es: Eigensystem, phases) -> Eigensystem:
    """Re-phase each eigenvector pair by a unit-modulus factor.

    Physical observables (proportions, weighted eigenvalue, mode fractions)
    are invariant under this; used to test exactly that.
    """
    ph = np.asarray(phases, dtype=complex)
    if ph.shape != (es.dimension,):
        raise InputError(f"need {es.dimension} phases, got shape {ph.shape}")
    if not np.allclose(np.abs(ph), 1.0, atol=1e-12):
        raise InputError("gauge phases must have unit modulus")
    return Eigensystem(
        eigenvalues=es.eigenvalues.copy(),
        right_vectors=es.right_vectors * ph[None, :],
        left_covectors=es.left_covectors / ph[:, None],
        point=es.point,
    )


def _discriminant(family: HamiltonianFamily, x: float, y: float) -> complex:
    """Characteristic-polynomial discriminant prod_{i<j} (l_i - l_j)^2."""
    lams = np.linalg.eigvals(evaluate(family, (x, y)))
    disc = 1.0 + 0.0j
    n = lams.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            disc *= (lams[i] - lams[j]) ** 2
    return disc


def locate_eps(
    family: HamiltonianFamily,
    region,
    *,
    grid: int = 41,
    tol: float = 1e-9,
) -> list[ParameterPoint]:
    """Exceptional points of ``family`` inside a rectangular region.

    ``region`` is (xmin, xmax, ymin, ymax). Seeds are grid-local minima of
    the discriminant magnitude, refined by a 2-d root solve on its real and
    imaginary parts; duplicates within the EP exclusion radius are merged.
    Returns an empty list when the region contains no exceptional point.
    """
    if not family.smooth:
        raise InputError("locate_eps requires a smooth family (not a table)")
    xmin, xmax, ymin, ymax = (float(v) for v in region)
    if not all(math.isfinite(v) for v in (xmin, xmax, ymin, ymax)):
        raise InputError("region bounds must be finite")
    if xmax <= xmin or ymax <= ymin:
        raise InputError("region must be non-empty (xmin < xmax, ymin < ymax)")

    xs = np.linspace(xmin, xmax, grid)
    ys = np.linspace(ymin, ymax, grid)
    mag = np.empty((grid, grid))
    for i, yv in enumerate(ys):
        for j, xv in enumerate(xs):
            mag[i, j] = abs(_discriminant(family, xv, yv))

    seeds = []
    for i in range(grid):
        for j in range(grid):
            lo = max(i - 1, 0)
            hi = min(i + 2, grid)
            lo2 = max(j - 1, 0)
            hi2 = min(j + 2, grid)
            if mag[i, j] <= mag[lo:hi, lo2:hi2].min():
                seeds.append((xs[j], ys[i]))

    scale = max(1.0, float(np.median(mag)))

    def f(v):
        d = _discriminant(family, v[0], v[1])
        return [d.real, d.imag]

    found: list[np.ndarray] = []
    for seed in seeds:
        sol = optimize.root(f, np.array(seed), method="hybr", options={"xtol": 1e-13})
        if not sol.success:
            continue
        root = sol.x
        if not (
            xmin - tol <= root[0] <= xmax + tol
            and ymin - tol <= root[1] <= ymax + tol
        ):
            continue
        if abs(_discriminant(family, root[0], root[1])) > 1e-6 * scale:
            continue
        if any(np.hypot(*(root - r)) < max(EP_EXCLUSION_RADIUS, 10 * tol) for r in found):
            continue
        found.append(root)

    found.sort(key=lambda r: (r[0], r[1]))
    return [ParameterPoint(float(r[0]), float(r[1])) for r in found]


def sheet_sample(family: HamiltonianFamily, grid, *, eps=None) -> np.ndarray:
    """Im-sorted eigenvalues on a rectangular grid, for surface plots.

    ``grid`` is a pair (xs, ys) of 1-d coordinate arrays. Every node must
    stay at least EP_EXCLUSION_RADIUS away from every exceptional point;
    ``eps`` may supply the EP list, otherwise it is located automatically
    over the (slightly padded) grid bounding box.

    Returns a complex array of shape (len(ys), len(xs), N).
    """
    xs = np.asarray(grid[0], dtype=float).reshape(-1)
    ys = np.asarray(grid[1], dtype=float).reshape(-1)
    if xs.size == 0 or ys.size == 0:
        raise InputError("sheet grid must be non-empty")
    if eps is None and family.smooth:
        pad = EP_EXCLUSION_RADIUS
        eps = locate_eps(
            family,
            (xs.min() - pad, xs.max() + pad, ys.min() - pad, ys.max() + pad),
        )
    eps = [as_point(p) for p in (eps or [])]

    out = np.empty((ys.size, xs.size, family.dimension), dtype=complex)
    for i, yv in enumerate(ys):
        for j, xv in enumerate(xs):
            for ep in eps:
                if math.hypot(xv - ep.x, yv - ep.y) < EP_EXCLUSION_RADIUS:
                    raise DegeneracyError(
                        f"grid node ({xv}, {yv}) is within {EP_EXCLUSION_RADIUS} "
                        f"of the exceptional point ({ep.x}, {ep.y})"
                    )
            es = eigensystem(evaluate(family, (xv, yv)), point=(xv, yv))
            out[i, j] = es.eigenvalues
    return out
