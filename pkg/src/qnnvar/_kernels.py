"""Fused numba kernels for batches of circuits with a fixed gate structure.

Each circuit's state stays in cache for the whole gate sequence, which is
several times faster than the broadcast numpy kernels in :mod:`qnnvar.sim`
(those remain the reference implementation and the fallback when numba is
missing).  Gate kinds are encoded as 0 = Rx, 1 = Ry, 2 = Rzz.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

RX, RY, RZZ = 0, 1, 2

if njit is not None:

    @njit(cache=True)
    def _apply(psi, kind, q1, q2, angle, n):
        c = np.cos(0.5 * angle)
        s = np.sin(0.5 * angle)
        dim = 1 << n
        if kind == RZZ:
            same = complex(c, -s)
            diff = complex(c, s)
            for i in range(dim):
                if ((i >> q1) ^ (i >> q2)) & 1:
                    psi[i] *= diff
                else:
                    psi[i] *= same
            return
        m = 1 << q1
        low = m - 1
        for k in range(dim >> 1):
            i = ((k & ~low) << 1) | (k & low)
            j = i | m
            a0 = psi[i]
            a1 = psi[j]
            if kind == RX:
                psi[i] = c * a0 - 1j * s * a1
                psi[j] = c * a1 - 1j * s * a0
            else:
                psi[i] = c * a0 - s * a1
                psi[j] = s * a0 + c * a1

    @njit(cache=True)
    def _probs_into(psi, out):
        for i in range(psi.shape[0]):
            out[i] = psi[i].real ** 2 + psi[i].imag ** 2

    @njit(cache=True)
    def run_rows(angles, kinds, q1, q2, n):
        """Probabilities after running every row of ``angles`` from ``|0>``."""
        rows, n_gates = angles.shape
        out = np.empty((rows, 1 << n))
        psi = np.empty(1 << n, dtype=np.complex128)
        for r in range(rows):
            psi[:] = 0.0
            psi[0] = 1.0
            for g in range(n_gates):
                _apply(psi, kinds[g], q1[g], q2[g], angles[r, g], n)
            _probs_into(psi, out[r])
        return out

    @njit(cache=True)
    def run_shifted(base, kinds, q1, q2, n, shift):
        """Probabilities of every single-gate-shifted circuit.

        ``out[i, g, 0]`` has gate ``g`` of input ``i`` shifted by ``+shift``,
        ``out[i, g, 1]`` by ``-shift``.  The unshifted prefix of each circuit
        is shared.
        """
        n_x, n_gates = base.shape
        dim = 1 << n
        out = np.empty((n_x, n_gates, 2, dim))
        psi = np.empty(dim, dtype=np.complex128)
        work = np.empty(dim, dtype=np.complex128)
        for i in range(n_x):
            psi[:] = 0.0
            psi[0] = 1.0
            for g in range(n_gates):
                for s in range(2):
                    work[:] = psi
                    delta = shift if s == 0 else -shift
                    _apply(work, kinds[g], q1[g], q2[g], base[i, g] + delta, n)
                    for h in range(g + 1, n_gates):
                        _apply(work, kinds[h], q1[h], q2[h], base[i, h], n)
                    _probs_into(work, out[i, g, s])
                _apply(psi, kinds[g], q1[g], q2[g], base[i, g], n)
        return out

    AVAILABLE = True
else:  # pragma: no cover
    run_rows = run_shifted = None
    AVAILABLE = False
