"""Minimal statevector engine.

Only the three gate kinds used by the QNN circuit are provided: ``Rx``, ``Ry``
and ``Rzz``.  Qubit ``q`` is bit ``q`` of the basis-state index, so qubit 0 is
the least significant bit and the basis state ``|b_{n-1} ... b_1 b_0>`` has
index ``sum_q b_q 2**q``.

The kernels work on arrays of shape ``(..., 2**n)`` so a whole batch of
circuits that share a gate structure (but not angles) can be simulated at
once.  :class:`Statevector` wraps a single state for the public API.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from qnnvar.errors import CapacityError, CountsError, QubitIndexError

MAX_QUBITS = 24

__all__ = [
    "MAX_QUBITS",
    "MeasurementCounts",
    "RngStream",
    "Statevector",
    "apply_rx",
    "apply_ry",
    "apply_rzz",
    "exact_probabilities",
    "new_zero_state",
    "sample_counts",
    "sample_count_arrays",
    "zero_states",
    "rx_kernel",
    "ry_kernel",
    "rzz_kernel",
    "zz_signs",
]


def _check_n_qubits(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


def _check_qubit(q: int, n_qubits: int) -> None:
    if not 0 <= q < n_qubits:
        raise QubitIndexError(f"qubit {q} out of range for {n_qubits} qubits")


# --------------------------------------------------------------------------
# batched kernels
# --------------------------------------------------------------------------


def _split(amps: np.ndarray, n_qubits: int, q: int) -> np.ndarray:
    lead = amps.shape[:-1]
    return amps.reshape(*lead, 2 ** (n_qubits - q - 1), 2, 2**q)


def _half_angle(angles, lead_ndim: int):
    half = 0.5 * np.asarray(angles, dtype=float)
    half = half.reshape(half.shape + (1, 1))
    # broadcast scalars against any leading batch shape
    if half.ndim < lead_ndim + 2:
        half = half.reshape((1,) * (lead_ndim + 2 - half.ndim) + half.shape)
    return np.cos(half), np.sin(half)


def rx_kernel(amps: np.ndarray, n_qubits: int, q: int, angles) -> np.ndarray:
    """Return ``exp(-i angle X_q / 2)`` applied to ``amps`` (shape ``(..., 2**n)``)."""
    psi = _split(amps, n_qubits, q)
    c, s = _half_angle(angles, amps.ndim - 1)
    a0 = psi[..., 0, :]
    a1 = psi[..., 1, :]
    out = np.empty_like(psi)
    out[..., 0, :] = c * a0 - 1j * s * a1
    out[..., 1, :] = c * a1 - 1j * s * a0
    return out.reshape(amps.shape)


def ry_kernel(amps: np.ndarray, n_qubits: int, q: int, angles) -> np.ndarray:
    """Return ``exp(-i angle Y_q / 2)`` applied to ``amps``."""
    psi = _split(amps, n_qubits, q)
    c, s = _half_angle(angles, amps.ndim - 1)
    a0 = psi[..., 0, :]
    a1 = psi[..., 1, :]
    out = np.empty_like(psi)
    out[..., 0, :] = c * a0 - s * a1
    out[..., 1, :] = s * a0 + c * a1
    return out.reshape(amps.shape)


def zz_signs(n_qubits: int, q1: int, q2: int) -> np.ndarray:
    """Eigenvalue ``z_q1 * z_q2`` of ``Z_q1 Z_q2`` for every basis state."""
    idx = np.arange(2**n_qubits)
    parity = ((idx >> q1) ^ (idx >> q2)) & 1
    return 1.0 - 2.0 * parity


def rzz_kernel(amps: np.ndarray, n_qubits: int, q1: int, q2: int, angles, signs=None) -> np.ndarray:
    """Return ``exp(-i angle Z_q1 Z_q2 / 2)`` applied to ``amps``.

    ``signs`` may carry a cached :func:`zz_signs` vector.
    """
    if signs is None:
        signs = zz_signs(n_qubits, q1, q2)
    half = 0.5 * np.asarray(angles, dtype=float)[..., None]
    phase = np.cos(half) - 1j * np.sin(half) * signs
    return amps * phase


def zero_states(n_qubits: int, batch: int) -> np.ndarray:
    """``batch`` copies of ``|0...0>`` as a ``(batch, 2**n)`` array."""
    _check_n_qubits(n_qubits)
    amps = np.zeros((batch, 2**n_qubits), dtype=np.complex128)
    amps[:, 0] = 1.0
    return amps


# --------------------------------------------------------------------------
# single-state API
# --------------------------------------------------------------------------


@dataclass
class Statevector:
    """A pure state of ``n_qubits`` qubits (little-endian basis indices)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2 ** self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


def new_zero_state(n_qubits: int) -> Statevector:
    """Return ``|0...0>`` on ``n_qubits`` qubits."""
    _check_n_qubits(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


def apply_rx(state: Statevector, q: int, angle: float) -> Statevector:
    _check_qubit(q, state.n_qubits)
    return Statevector(state.n_qubits, rx_kernel(state.amplitudes, state.n_qubits, q, angle))


def apply_ry(state: Statevector, q: int, angle: float) -> Statevector:
    _check_qubit(q, state.n_qubits)
    return Statevector(state.n_qubits, ry_kernel(state.amplitudes, state.n_qubits, q, angle))


def apply_rzz(state: Statevector, q1: int, q2: int, angle: float) -> Statevector:
    _check_qubit(q1, state.n_qubits)
    _check_qubit(q2, state.n_qubits)
    if q1 == q2:
        raise QubitIndexError(f"Rzz needs two distinct qubits, got {q1} twice")
    return Statevector(
        state.n_qubits, rzz_kernel(state.amplitudes, state.n_qubits, q1, q2, angle)
    )


def exact_probabilities(state: Statevector | np.ndarray) -> np.ndarray:
    """Born-rule probabilities ``|amplitude_b|**2``.

    Accepts a :class:`Statevector` or a raw amplitude array of shape
    ``(..., 2**n)``.
    """
    amps = state.amplitudes if isinstance(state, Statevector) else state
    return amps.real**2 + amps.imag**2


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream addressed by ``(seed, key)``.

    The stream is a Philox generator whose 128-bit key is the seed and whose
    counter's upper three words hold ``key`` (e.g. ``(iteration, circuit)``).
    Streams with different keys are therefore 2**64 blocks apart and a given
    ``(seed, key)`` always replays the same sequence, whatever order the
    streams are consumed in.
    """

    seed: int
    key: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if len(self.key) > 3:
            raise ValueError(f"stream key has at most 3 components, got {self.key}")
        if any(k < 0 for k in self.key):
            raise ValueError(f"stream key components must be >= 0, got {self.key}")

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.key + (int(index),))

    def generator(self) -> np.random.Generator:
        counter = [0, 0, 0, 0]
        for i, k in enumerate(self.key):
            counter[i + 1] = int(k) & _MASK64
        return np.random.Generator(
            np.random.Philox(key=int(self.seed) & _MASK64, counter=counter)
        )


@dataclass(frozen=True)
class MeasurementCounts:
    """Outcome histogram of one circuit run with ``shots`` repetitions."""

    n_qubits: int
    shots: int
    counts: dict[int, int]

    def __post_init__(self):
        if self.shots < 1:
            raise CountsError("shots must be positive")
        total = 0
        for b, c in self.counts.items():
            if not 0 <= b < 2**self.n_qubits:
                raise CountsError(f"basis index {b} out of range for {self.n_qubits} qubits")
            if c < 0:
                raise CountsError(f"negative count for basis index {b}")
            total += c
        if total != self.shots:
            raise CountsError(f"counts sum to {total}, expected {self.shots}")

    @classmethod
    def from_dict(cls, counts: dict[int, int], n_qubits: int) -> "MeasurementCounts":
        if not counts:
            raise CountsError("empty counts")
        return cls(n_qubits, int(sum(counts.values())), dict(counts))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "MeasurementCounts":
        n_qubits = int(np.log2(arr.shape[-1]))
        nz = np.flatnonzero(arr)
        return cls(n_qubits, int(arr.sum()), {int(b): int(arr[b]) for b in nz})

    def to_array(self) -> np.ndarray:
        arr = np.zeros(2**self.n_qubits, dtype=np.int64)
        for b, c in self.counts.items():
            arr[b] = c
        return arr

    def frequencies(self) -> np.ndarray:
        return self.to_array() / self.shots


def _draw(probs: np.ndarray, shots: int, rng: RngStream) -> np.ndarray:
    p = np.clip(probs, 0.0, None)
    return rng.generator().multinomial(shots, p / p.sum())


def sample_counts(state: Statevector, shots: int, rng: RngStream) -> MeasurementCounts:
    """Draw ``shots`` computational-basis measurements of ``state``."""
    if shots < 1:
        raise CountsError(f"shots must be >= 1, got {shots}")
    return MeasurementCounts.from_array(_draw(exact_probabilities(state), shots, rng))


def sample_count_arrays(probs: np.ndarray, shots: int, rngs) -> np.ndarray:
    """Sample one histogram per row of ``probs`` (shape ``(B, 2**n)``).

    Row ``k`` uses stream ``rngs[k]``; the result is identical to calling
    :func:`sample_counts` on each row separately.
    """
    if shots < 1:
        raise CountsError(f"shots must be >= 1, got {shots}")
    out = np.empty(probs.shape, dtype=np.int64)
    for k, rng in enumerate(rngs):
        out[k] = _draw(probs[k], shots, rng)
    return out
