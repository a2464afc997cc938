"""Hot propagation kernels.

Everything here operates on the precomputed per-point arrays of an oriented
loop (see :class:`epsteer.evolution.LoopEigensystems`):

    transfer[j]  (N, N)  left covectors at point j applied to the right
                         vectors at point j-1; transfer[0] is unused
    omegas[j]    (N,)    sorted eigenvalues at point j
    right[j]     (N, N)  right eigenvectors at point j, as columns

A step from point j-1 to point j re-expands the coefficient vector through
``transfer[j]`` and multiplies each component by ``exp(-1i*omega*dt)``. The
state is renormalized after every step so long dwells on amplifying points
cannot overflow; all quantities derived from the coefficients are ratios, so
the dropped scale is physically irrelevant (it is still tracked in log space
by the trace kernel).

Two implementations with identical semantics are provided; see
:mod:`epsteer._backend` for how ``EPSTEER_BACKEND`` selects between them.
The ``*_numpy`` versions are always importable (the benchmark compares both).
"""

import numpy as np

from ._backend import USE_NUMBA

__all__ = [
    "propagate_coeffs",
    "propagate_end_batch",
    "propagate_coeffs_numpy",
    "propagate_end_batch_numpy",
    "propagate_coeffs_numba",
    "propagate_end_batch_numba",
]


def propagate_coeffs_numpy(transfer, omegas, right, dwells, c0):
    """Propagate coefficients along a full traversal, recording every point.

    Returns ``(coeffs, logscale)`` where ``coeffs[j]`` holds the coefficients
    of the (unit-norm) physical state at point j and ``logscale[j]`` the
    accumulated natural log of the normalization dropped up to point j.
    """
    n, ndim = omegas.shape
    coeffs = np.empty((n, ndim), dtype=np.complex128)
    logscale = np.empty(n, dtype=np.float64)
    s = np.linalg.norm(right[0] @ c0)
    c = c0 / s
    coeffs[0] = c
    logscale[0] = np.log(s)
    for j in range(1, n):
        a = transfer[j] @ c
        c = a * np.exp(-1j * omegas[j] * dwells[j - 1])
        s = np.linalg.norm(right[j] @ c)
        c /= s
        coeffs[j] = c
        logscale[j] = logscale[j - 1] + np.log(s)
    return coeffs, logscale


def propagate_end_batch_numpy(transfer, omegas, dwells_batch, c0):
    """End-point coefficients for a batch of dwell vectors sharing one start.

    The coefficient vector is renormalized (by its own 2-norm; the outputs
    are scale invariant) after every step. Returns an array (batch, N).
    """
    n, ndim = omegas.shape
    nb = dwells_batch.shape[0]
    c = np.broadcast_to(c0, (nb, ndim)).astype(np.complex128).copy()
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    for j in range(1, n):
        a = c @ transfer[j].T
        c = a * np.exp(-1j * omegas[j][None, :] * dwells_batch[:, j - 1][:, None])
        c /= np.linalg.norm(c, axis=1, keepdims=True)
    return c


if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def propagate_coeffs_numba(transfer, omegas, right, dwells, c0):
        n, ndim = omegas.shape
        coeffs = np.empty((n, ndim), dtype=np.complex128)
        logscale = np.empty(n, dtype=np.float64)
        c = np.empty(ndim, dtype=np.complex128)
        a = np.empty(ndim, dtype=np.complex128)
        nrm = 0.0
        for r in range(ndim):
            acc = 0.0 + 0.0j
            for m in range(ndim):
                acc += right[0, r, m] * c0[m]
            nrm += acc.real * acc.real + acc.imag * acc.imag
        s = np.sqrt(nrm)
        for m in range(ndim):
            c[m] = c0[m] / s
        coeffs[0] = c
        logscale[0] = np.log(s)
        for j in range(1, n):
            dt = dwells[j - 1]
            for r in range(ndim):
                acc = 0.0 + 0.0j
                for m in range(ndim):
                    acc += transfer[j, r, m] * c[m]
                a[r] = acc * np.exp(-1j * omegas[j, r] * dt)
            nrm = 0.0
            for r in range(ndim):
                acc = 0.0 + 0.0j
                for m in range(ndim):
                    acc += right[j, r, m] * a[m]
                nrm += acc.real * acc.real + acc.imag * acc.imag
            s = np.sqrt(nrm)
            for m in range(ndim):
                c[m] = a[m] / s
            coeffs[j] = c
            logscale[j] = logscale[j - 1] + np.log(s)
        return coeffs, logscale

    @njit(cache=True)
    def propagate_end_batch_numba(transfer, omegas, dwells_batch, c0):
        n, ndim = omegas.shape
        nb = dwells_batch.shape[0]
        out = np.empty((nb, ndim), dtype=np.complex128)
        a = np.empty(ndim, dtype=np.complex128)
        c = np.empty(ndim, dtype=np.complex128)
        for b in range(nb):
            nrm = 0.0
            for m in range(ndim):
                nrm += c0[m].real * c0[m].real + c0[m].imag * c0[m].imag
            s = np.sqrt(nrm)
            for m in range(ndim):
                c[m] = c0[m] / s
            for j in range(1, n):
                dt = dwells_batch[b, j - 1]
                nrm = 0.0
                for r in range(ndim):
                    acc = 0.0 + 0.0j
                    for m in range(ndim):
                        acc += transfer[j, r, m] * c[m]
                    acc = acc * np.exp(-1j * omegas[j, r] * dt)
                    a[r] = acc
                    nrm += acc.real * acc.real + acc.imag * acc.imag
                s = np.sqrt(nrm)
                for m in range(ndim):
                    c[m] = a[m] / s
            out[b] = c
        return out

    propagate_coeffs = propagate_coeffs_numba
    propagate_end_batch = propagate_end_batch_numba
else:
    propagate_coeffs_numba = None
    propagate_end_batch_numba = None
    propagate_coeffs = propagate_coeffs_numpy
    propagate_end_batch = propagate_end_batch_numpy
