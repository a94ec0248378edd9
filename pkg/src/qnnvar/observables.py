"""Diagonal cost operators and the statistics read off one set of counts.

Every operator here is diagonal in the computational basis, so ``C`` and
``C**2`` (and the derivatives of ``C`` with respect to its coefficients) are
all estimated from the same histogram.  Three variants exist:

``SumZ``
    ``phi0 * I + sum_p phi_p Z_p``
``IsingZZ``
    ``phi1 * I + phi2 * sum_p Z_p + phi3 * sum_{p>q} Z_p Z_q``
``ProjectorQubit``
    ``|outcome><outcome|`` on a single qubit (idempotent, no coefficients)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from qnnvar.errors import CountsError, ObservableError, QubitIndexError
from qnnvar.sim import MeasurementCounts

__all__ = [
    "DiagonalObservable",
    "IsingZZ",
    "ProjectorQubit",
    "SumZ",
    "cost_gradient_from_counts",
    "diag_value",
    "expectation_from_counts",
    "make_observable",
    "squared_expectation_from_counts",
    "std_of_mean",
    "variance_from_counts",
    "z_table",
]


@lru_cache(maxsize=32)
def _z_table(n_qubits: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    bits = (idx[None, :] >> np.arange(n_qubits)[:, None]) & 1
    table = 1.0 - 2.0 * bits
    table.setflags(write=False)
    return table


def z_table(n_qubits: int) -> np.ndarray:
    """``(n_qubits, 2**n_qubits)`` array of ``z_p = 1 - 2*bit_p``."""
    return _z_table(n_qubits)


class DiagonalObservable:
    """Base class; subclasses define the diagonal and its coefficient basis."""

    n_qubits: int

    @property
    def coefficients(self) -> np.ndarray:
        raise NotImplementedError

    def with_coefficients(self, coefficients) -> "DiagonalObservable":
        raise NotImplementedError

    def basis(self) -> np.ndarray:
        """Diagonals of ``dC/dphi_m``, shape ``(n_coefficients, 2**n_qubits)``."""
        raise NotImplementedError

    def diagonal(self) -> np.ndarray:
        """Eigenvalue of ``C`` for every basis state."""
        return self.coefficients @ self.basis()

    @property
    def n_coefficients(self) -> int:
        return len(self.coefficients)

    @property
    def kind(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class SumZ(DiagonalObservable):
    phi0: float
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float).copy())
        if self.phi.ndim != 1 or len(self.phi) < 1:
            raise ObservableError("SumZ needs one coefficient per qubit")

    @property
    def n_qubits(self) -> int:
        return len(self.phi)

    @property
    def kind(self) -> str:
        return "sumz"

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([[self.phi0], self.phi])

    def with_coefficients(self, coefficients) -> "SumZ":
        c = np.asarray(coefficients, dtype=float)
        return SumZ(float(c[0]), c[1:])

    def basis(self) -> np.ndarray:
        z = z_table(self.n_qubits)
        return np.vstack([np.ones(z.shape[1]), z])


@dataclass(frozen=True, eq=False)
class IsingZZ(DiagonalObservable):
    n_qubits: int
    phi1: float
    phi2: float
    phi3: float

    @property
    def kind(self) -> str:
        return "ising"

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2, self.phi3], dtype=float)

    def with_coefficients(self, coefficients) -> "IsingZZ":
        c = np.asarray(coefficients, dtype=float)
        return IsingZZ(self.n_qubits, float(c[0]), float(c[1]), float(c[2]))

    def basis(self) -> np.ndarray:
        zsum = z_table(self.n_qubits).sum(axis=0)
        # sum_{p>q} z_p z_q = ((sum z)^2 - n) / 2 since z_p^2 = 1
        pairs = 0.5 * (zsum**2 - self.n_qubits)
        return np.vstack([np.ones_like(zsum), zsum, pairs])


@dataclass(frozen=True, eq=False)
class ProjectorQubit(DiagonalObservable):
    n_qubits: int
    qubit: int
    outcome: int = 0

    def __post_init__(self):
        if not 0 <= self.qubit < self.n_qubits:
            raise QubitIndexError(f"qubit {self.qubit} out of range for {self.n_qubits} qubits")
        if self.outcome not in (0, 1):
            raise ObservableError(f"outcome must be 0 or 1, got {self.outcome}")

    @property
    def kind(self) -> str:
        return "projector"

    @property
    def coefficients(self) -> np.ndarray:
        return np.zeros(0)

    def with_coefficients(self, coefficients) -> "ProjectorQubit":
        if len(coefficients):
            raise ObservableError("ProjectorQubit has no coefficients")
        return self

    def basis(self) -> np.ndarray:
        return np.zeros((0, 2**self.n_qubits))

    def diagonal(self) -> np.ndarray:
        bits = (np.arange(2**self.n_qubits) >> self.qubit) & 1
        return (bits == self.outcome).astype(float)


def make_observable(kind: str, n_qubits: int, coefficients=None) -> DiagonalObservable:
    """Build an observable by name with default coefficients.

    Defaults: ``sumz`` starts at ``phi0 = 0, phi_p = 1/n``; ``ising`` at
    ``(0, 1/n, 0)``; ``projector`` measures ``|0>`` on qubit 0.
    Operators with ``X`` or ``Y`` terms cannot be measured from
    computational-basis counts and are rejected.
    """
    kind = kind.lower()
    if kind == "sumz":
        obs = SumZ(0.0, np.full(n_qubits, 1.0 / n_qubits))
    elif kind == "ising":
        obs = IsingZZ(n_qubits, 0.0, 1.0 / n_qubits, 0.0)
    elif kind == "projector":
        obs = ProjectorQubit(n_qubits, 0, 0)
    elif any(tag in kind for tag in ("x", "y", "transverse")):
        raise ObservableError(f"observable {kind!r} is not diagonal in the computational basis")
    else:
        raise ObservableError(f"unknown observable kind {kind!r}")
    if coefficients is not None:
        obs = obs.with_coefficients(coefficients)
    return obs


# --------------------------------------------------------------------------
# statistics from counts
# --------------------------------------------------------------------------


def diag_value(obs: DiagonalObservable, bitstring: int) -> float:
    """Eigenvalue of ``obs`` on basis state ``bitstring``."""
    if not 0 <= bitstring < 2**obs.n_qubits:
        raise QubitIndexError(f"bitstring {bitstring} out of range for {obs.n_qubits} qubits")
    z = 1 - 2 * ((bitstring >> np.arange(obs.n_qubits)) & 1)
    if isinstance(obs, SumZ):
        return float(obs.phi0 + np.dot(obs.phi, z))
    if isinstance(obs, IsingZZ):
        s = int(z.sum())
        return float(obs.phi1 + obs.phi2 * s + obs.phi3 * (s * s - obs.n_qubits) / 2)
    if isinstance(obs, ProjectorQubit):
        return float(((bitstring >> obs.qubit) & 1) == obs.outcome)
    raise ObservableError(f"unsupported observable {type(obs).__name__}")


def _freqs(obs: DiagonalObservable, counts: MeasurementCounts) -> np.ndarray:
    if not counts.counts:
        raise CountsError("empty counts")
    if counts.n_qubits != obs.n_qubits:
        raise CountsError(
            f"counts over {counts.n_qubits} qubits, observable over {obs.n_qubits}"
        )
    return counts.frequencies()


def expectation_from_counts(obs: DiagonalObservable, counts: MeasurementCounts) -> float:
    return float(np.sum(_freqs(obs, counts) * obs.diagonal()))


def squared_expectation_from_counts(obs: DiagonalObservable, counts: MeasurementCounts) -> float:
    if isinstance(obs, ProjectorQubit):
        return expectation_from_counts(obs, counts)
    return float(np.sum(_freqs(obs, counts) * obs.diagonal() ** 2))


def variance_from_counts(obs: DiagonalObservable, counts: MeasurementCounts) -> float:
    """Population variance ``<C^2> - <C>^2`` over the empirical distribution."""
    freqs = _freqs(obs, counts)
    if isinstance(obs, ProjectorQubit):
        p = float(np.sum(freqs * obs.diagonal()))
        return p * (1.0 - p)
    d = obs.diagonal()
    mean = np.sum(freqs * d)
    # centred form keeps the result >= 0 up to rounding
    return float(max(np.sum(freqs * (d - mean) ** 2), 0.0))


def std_of_mean(variance: float, shots: int) -> float:
    """Standard deviation of a ``shots``-sample mean."""
    return float(np.sqrt(variance / shots))


def cost_gradient_from_counts(obs: DiagonalObservable, counts: MeasurementCounts) -> np.ndarray:
    """``<dC/dphi_m>`` for every coefficient, from the same counts."""
    return np.sum(_freqs(obs, counts)[None, :] * obs.basis(), axis=1)
