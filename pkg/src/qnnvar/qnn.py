"""Chebyshev-encoded QNN: circuit construction, evaluation and gradients.

The circuit on ``n`` qubits with ``l`` layers is

    Ry(ry_initial_q) on every qubit
    repeat l times:
        Rx(encode_{l,q} * arccos(x_{feature(q)})) on every qubit
        Rzz(entangle_{l,k}) on nearest neighbours (0,1), (1,2), ... [, (n-1,0)]
    Ry(ry_final_q) on every qubit

followed by a measurement of a diagonal cost operator.  Each circuit
parameter drives exactly one gate, and gate ``g`` is driven by entry ``g`` of
:meth:`ModelParams.circuit_vector`, so the realised angle of gate ``g`` at
input ``x`` is ``theta_g * scale_g(x)`` with ``scale_g = arccos(x_f)`` for the
encoding gates and ``1`` otherwise.

Derivatives use the two-term shift rule on the realised angle,

    d<C>/d angle = (<C>(angle + pi/2) - <C>(angle - pi/2)) / 2,

multiplied by ``scale_g`` (chain rule).  ``C**2`` is diagonal too, so the
shifted histograms also give ``d<C^2>``, and the variance gradient
``d<C^2> - 2 <C> d<C>`` costs no extra circuits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from qnnvar import _kernels
from qnnvar.errors import DomainError, QnnVarError
from qnnvar.observables import DiagonalObservable, SumZ, make_observable
from qnnvar.sim import (
    RngStream,
    exact_probabilities,
    rx_kernel,
    ry_kernel,
    rzz_kernel,
    sample_count_arrays,
    zero_states,
    zz_signs,
)

__all__ = [
    "EXACT",
    "BatchEvaluation",
    "CircuitLayout",
    "EvaluationResult",
    "ExecutionCounter",
    "Gate",
    "ModelParams",
    "Shots",
    "build_circuit",
    "chebyshev_curve",
    "evaluate",
    "evaluate_batch",
    "gradient_batch",
    "init_params",
    "parameter_shift_gradient",
    "variance_gradient",
]

# rows * amplitudes per block on the numpy path (fits in cache)
_CHUNK_AMPLITUDES = 1 << 15


# --------------------------------------------------------------------------
# layout and parameters
# --------------------------------------------------------------------------


class _GateSpec(NamedTuple):
    kind: str  # "ry" | "rx" | "rzz"
    qubits: tuple[int, ...]
    feature: int  # input feature scaling the angle, -1 if none


class Gate(NamedTuple):
    kind: str
    qubits: tuple[int, ...]
    angle: float


@dataclass(frozen=True)
class CircuitLayout:
    """Shape of the circuit.

    ``entangling`` is ``"circular"`` (chain closed by an ``(n-1, 0)`` gate),
    ``"linear"`` (open chain, the hardware-efficient variant) or ``"none"``.
    With two qubits the closing gate would duplicate ``(0, 1)`` and is
    omitted.  Features are assigned cyclically, qubit ``q`` reading feature
    ``q % n_features``, unless ``feature_of_qubit`` is given.
    """

    n_qubits: int
    n_layers: int
    entangling: str = "circular"
    n_features: int = 1
    feature_of_qubit: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.n_layers < 0:
            raise ValueError(f"n_layers must be >= 0, got {self.n_layers}")
        if self.entangling not in ("circular", "linear", "none"):
            raise ValueError(f"unknown entangling {self.entangling!r}")
        if not 1 <= self.n_features <= self.n_qubits:
            raise ValueError(
                f"n_features must be in [1, n_qubits={self.n_qubits}], got {self.n_features}"
            )
        if self.feature_of_qubit is None:
            fmap = tuple(q % self.n_features for q in range(self.n_qubits))
            object.__setattr__(self, "feature_of_qubit", fmap)
        else:
            fmap = tuple(int(f) for f in self.feature_of_qubit)
            if len(fmap) != self.n_qubits or not all(0 <= f < self.n_features for f in fmap):
                raise ValueError(f"invalid feature_of_qubit {fmap}")
            object.__setattr__(self, "feature_of_qubit", fmap)

    @property
    def entangling_pairs(self) -> list[tuple[int, int]]:
        n = self.n_qubits
        if self.entangling == "none" or n < 2:
            return []
        pairs = [(q, q + 1) for q in range(n - 1)]
        if self.entangling == "circular" and n > 2:
            pairs.append((n - 1, 0))
        return pairs

    @property
    def gate_specs(self) -> list[_GateSpec]:
        n = self.n_qubits
        specs = [_GateSpec("ry", (q,), -1) for q in range(n)]
        for _ in range(self.n_layers):
            specs += [_GateSpec("rx", (q,), self.feature_of_qubit[q]) for q in range(n)]
            specs += [_GateSpec("rzz", p, -1) for p in self.entangling_pairs]
        specs += [_GateSpec("ry", (q,), -1) for q in range(n)]
        return specs

    @property
    def n_circuit_params(self) -> int:
        return self.n_qubits * (2 + self.n_layers) + self.n_layers * len(self.entangling_pairs)


@dataclass
class ModelParams:
    """All trainable parameters: circuit angles plus cost coefficients."""

    ry_initial: np.ndarray
    encode: np.ndarray  # (n_layers, n_qubits)
    entangle: np.ndarray  # (n_layers, n_pairs)
    ry_final: np.ndarray
    cost: DiagonalObservable

    def circuit_vector(self) -> np.ndarray:
        """Circuit parameters in gate order (see :attr:`CircuitLayout.gate_specs`)."""
        parts = [self.ry_initial]
        for enc, ent in zip(self.encode, self.entangle):
            parts += [enc, ent]
        parts.append(self.ry_final)
        return np.concatenate(parts).astype(float)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.circuit_vector(), self.cost.coefficients])

    @property
    def size(self) -> int:
        return len(self.to_vector())

    @classmethod
    def from_vector(
        cls, layout: CircuitLayout, theta, cost: DiagonalObservable
    ) -> "ModelParams":
        """Inverse of :meth:`to_vector`; ``cost`` supplies the operator type."""
        theta = np.asarray(theta, dtype=float)
        n, n_pairs = layout.n_qubits, len(layout.entangling_pairs)
        expected = layout.n_circuit_params + cost.n_coefficients
        if theta.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got shape {theta.shape}")
        pos = n
        encode, entangle = [], []
        for _ in range(layout.n_layers):
            encode.append(theta[pos : pos + n])
            pos += n
            entangle.append(theta[pos : pos + n_pairs])
            pos += n_pairs
        p = layout.n_circuit_params
        return cls(
            ry_initial=theta[:n].copy(),
            encode=np.array(encode, dtype=float).reshape(layout.n_layers, n),
            entangle=np.array(entangle, dtype=float).reshape(layout.n_layers, n_pairs),
            ry_final=theta[pos : pos + n].copy(),
            cost=cost.with_coefficients(theta[p:]),
        )


def init_params(
    layout: CircuitLayout,
    beta_encoding: float = 2.0,
    seed: int = 0,
    observable: str | DiagonalObservable = "sumz",
) -> ModelParams:
    """Chebyshev-tower initialisation.

    Encoding degrees rise linearly from 0.01 to ``beta_encoding`` across the
    qubits of every layer; the remaining angles are uniform in [-pi, pi].
    """
    rng = np.random.default_rng(seed)
    n, n_pairs = layout.n_qubits, len(layout.entangling_pairs)
    tower = np.linspace(0.01, beta_encoding, n)
    if isinstance(observable, str):
        observable = make_observable(observable, n)
    return ModelParams(
        ry_initial=rng.uniform(-np.pi, np.pi, n),
        encode=np.tile(tower, (layout.n_layers, 1)),
        entangle=rng.uniform(-np.pi, np.pi, (layout.n_layers, n_pairs)),
        ry_final=rng.uniform(-np.pi, np.pi, n),
        cost=observable,
    )


# --------------------------------------------------------------------------
# circuit construction
# --------------------------------------------------------------------------


def _as_inputs(layout: CircuitLayout, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None] if layout.n_features == 1 else X[None, :]
    if X.shape[1] != layout.n_features:
        raise ValueError(f"expected {layout.n_features} features, got {X.shape[1]}")
    if np.any(~np.isfinite(X)) or np.any(np.abs(X) > 1.0):
        raise DomainError("inputs must lie in [-1, 1] for the arccos encoding")
    return X


def _angle_scales(layout: CircuitLayout, X: np.ndarray) -> np.ndarray:
    """``(n_points, n_gates)`` factors turning parameters into gate angles."""
    acos = np.arccos(X)
    scales = np.ones((len(X), layout.n_circuit_params))
    for g, spec in enumerate(layout.gate_specs):
        if spec.feature >= 0:
            scales[:, g] = acos[:, spec.feature]
    return scales


def build_circuit(layout: CircuitLayout, params: ModelParams, x) -> list[Gate]:
    """Gate sequence (with realised angles) for a single input ``x``."""
    X = _as_inputs(layout, x)
    if len(X) != 1:
        raise ValueError("build_circuit takes a single input")
    angles = params.circuit_vector() * _angle_scales(layout, X)[0]
    return [Gate(s.kind, s.qubits, float(a)) for s, a in zip(layout.gate_specs, angles)]


@dataclass
class ExecutionCounter:
    """Counts simulated circuit executions (one per batch row)."""

    circuits: int = 0


def _gate_arrays(layout: CircuitLayout):
    code = {"rx": _kernels.RX, "ry": _kernels.RY, "rzz": _kernels.RZZ}
    specs = layout.gate_specs
    kinds = np.array([code[s.kind] for s in specs], dtype=np.int64)
    q1 = np.array([s.qubits[0] for s in specs], dtype=np.int64)
    q2 = np.array([s.qubits[-1] for s in specs], dtype=np.int64)
    return kinds, q1, q2


def _use_fused() -> bool:
    return _kernels.AVAILABLE and not os.environ.get("QNNVAR_NO_NUMBA")


def _run_numpy(layout: CircuitLayout, angles: np.ndarray) -> np.ndarray:
    """Reference path: broadcast kernels over cache-sized row blocks."""
    n = layout.n_qubits
    specs = layout.gate_specs
    signs = {p: zz_signs(n, *p) for p in layout.entangling_pairs}
    out = np.empty((len(angles), 2**n))
    rows = max(1, _CHUNK_AMPLITUDES >> n)
    for start in range(0, len(angles), rows):
        block = angles[start : start + rows]
        amps = zero_states(n, len(block))
        for g, spec in enumerate(specs):
            a = block[:, g]
            if spec.kind == "ry":
                amps = ry_kernel(amps, n, spec.qubits[0], a)
            elif spec.kind == "rx":
                amps = rx_kernel(amps, n, spec.qubits[0], a)
            else:
                amps = rzz_kernel(amps, n, *spec.qubits, a, signs=signs[spec.qubits])
        out[start : start + len(block)] = exact_probabilities(amps)
    return out


def _run(layout: CircuitLayout, angles: np.ndarray, counter: ExecutionCounter | None):
    """Exact output probabilities, one row per row of ``angles``."""
    angles = np.ascontiguousarray(angles, dtype=float)
    if counter is not None:
        counter.circuits += len(angles)
    if _use_fused():
        return _kernels.run_rows(angles, *_gate_arrays(layout), layout.n_qubits)
    return _run_numpy(layout, angles)


def _run_shifted(layout: CircuitLayout, base: np.ndarray, counter: ExecutionCounter | None):
    """Probabilities of all ``+/- pi/2`` single-gate shifts, shape ``(n_x * G * 2, dim)``.

    Row ``2 * (i * G + g) + s`` shifts gate ``g`` of input ``i`` by ``+pi/2``
    (``s = 0``) or ``-pi/2`` (``s = 1``).
    """
    n_x, G = base.shape
    if counter is not None:
        counter.circuits += 2 * n_x * G
    if not _use_fused():
        shifted = np.repeat(base[:, None, None, :], G, axis=1).repeat(2, axis=2)
        eye = np.eye(G) * (np.pi / 2)
        shifted[:, :, 0, :] += eye
        shifted[:, :, 1, :] -= eye
        return _run_numpy(layout, shifted.reshape(-1, G))
    base = np.ascontiguousarray(base, dtype=float)
    gates = _gate_arrays(layout)
    return _kernels.run_shifted(base, *gates, layout.n_qubits, np.pi / 2).reshape(
        2 * n_x * G, -1
    )


# --------------------------------------------------------------------------
# evaluation modes
# --------------------------------------------------------------------------


class _Exact:
    def __repr__(self):
        return "EXACT"


EXACT = _Exact()


@dataclass(frozen=True)
class Shots:
    """Finite-shot mode: circuit ``k`` of a batch samples from ``rng.child(start + k)``."""

    n: int
    rng: RngStream = field(default_factory=lambda: RngStream(0, (0,)))
    start: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise QnnVarError(f"shot count must be >= 1, got {self.n}")


def _sample(probs: np.ndarray, mode) -> np.ndarray:
    """Exact probabilities, or empirical frequencies in shot mode."""
    if not isinstance(mode, Shots):
        return probs
    streams = [mode.rng.child(mode.start + k) for k in range(len(probs))]
    return sample_count_arrays(probs, mode.n, streams) / mode.n


def _moments(dist: np.ndarray, diag: np.ndarray):
    mean = np.sum(dist * diag, axis=1)
    second = np.sum(dist * diag**2, axis=1)
    var = np.maximum(np.sum(dist * (diag - mean[:, None]) ** 2, axis=1), 0.0)
    return mean, second, var


@dataclass
class EvaluationResult:
    value: float
    variance: float
    shots_used: int | None  # None in exact mode

    @property
    def exact(self) -> bool:
        return self.shots_used is None


@dataclass
class BatchEvaluation:
    """Model outputs at many inputs; ``dists`` are the per-input histograms."""

    values: np.ndarray
    variances: np.ndarray
    dists: np.ndarray
    shots_used: int | None


def evaluate_batch(
    layout: CircuitLayout,
    params: ModelParams,
    X,
    mode=EXACT,
    counter: ExecutionCounter | None = None,
) -> BatchEvaluation:
    """``f`` and ``sigma^2_f`` at every row of ``X``; both from one histogram per input."""
    X = _as_inputs(layout, X)
    angles = params.circuit_vector()[None, :] * _angle_scales(layout, X)
    dists = _sample(_run(layout, angles, counter), mode)
    mean, _, var = _moments(dists, params.cost.diagonal())
    shots = mode.n if isinstance(mode, Shots) else None
    return BatchEvaluation(mean, var, dists, shots)


def evaluate(layout, params, x, mode=EXACT, counter=None) -> EvaluationResult:
    res = evaluate_batch(layout, params, x, mode, counter)
    if len(res.values) != 1:
        raise ValueError("evaluate takes a single input; use evaluate_batch")
    return EvaluationResult(float(res.values[0]), float(res.variances[0]), res.shots_used)


# --------------------------------------------------------------------------
# gradients
# --------------------------------------------------------------------------


def _shift_derivatives(layout, params, X, mode, counter):
    """Circuit-parameter derivatives of ``<C>`` and ``<C^2>`` at every input.

    Rows are ordered ``(input, gate, +/-)`` so circuit index
    ``2 * (i * G + g) + s`` is stable for a given batch.
    """
    G = layout.n_circuit_params
    n_x = len(X)
    scales = _angle_scales(layout, X)
    base = params.circuit_vector()[None, :] * scales
    dists = _sample(_run_shifted(layout, base, counter), mode)
    mean, second, _ = _moments(dists, params.cost.diagonal())
    mean = mean.reshape(n_x, G, 2)
    second = second.reshape(n_x, G, 2)
    d_mean = 0.5 * (mean[..., 0] - mean[..., 1]) * scales
    d_second = 0.5 * (second[..., 0] - second[..., 1]) * scales
    return d_mean, d_second


def gradient_batch(
    layout: CircuitLayout,
    params: ModelParams,
    X,
    mode=EXACT,
    base: BatchEvaluation | None = None,
    counter: ExecutionCounter | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``f`` and ``sigma^2_f`` w.r.t. the full parameter vector.

    Returns two ``(n_points, n_params)`` arrays in :meth:`ModelParams.to_vector`
    order.  ``base`` supplies the unshifted histograms (the loss-evaluation
    intermediates); the cost-coefficient derivatives are read from it.  If it
    is omitted an exact evaluation is used in exact mode, otherwise one
    sampled evaluation with the same shot count.
    """
    X = _as_inputs(layout, X)
    if base is None:
        base = evaluate_batch(layout, params, X, mode, counter)
        if isinstance(mode, Shots):
            # keep shifted circuits clear of the base circuits' stream indices
            mode = Shots(mode.n, mode.rng, mode.start + len(X))
    d_mean, d_second = _shift_derivatives(layout, params, X, mode, counter)
    d_var = d_second - 2.0 * base.values[:, None] * d_mean

    basis = params.cost.basis()  # (M, dim)
    diag = params.cost.diagonal()
    cost_mean = base.dists @ basis.T
    # d<C^2>/dphi_m = <2 C dC/dphi_m>
    cost_second = 2.0 * (base.dists * diag) @ basis.T
    cost_var = cost_second - 2.0 * base.values[:, None] * cost_mean
    return np.hstack([d_mean, cost_mean]), np.hstack([d_var, cost_var])


def parameter_shift_gradient(layout, params, x, mode=EXACT, counter=None) -> np.ndarray:
    """``df/dtheta`` for the circuit parameters at a single input."""
    X = _as_inputs(layout, x)
    if len(X) != 1:
        raise ValueError("parameter_shift_gradient takes a single input")
    d_mean, _ = _shift_derivatives(layout, params, X, mode, counter)
    return d_mean[0]


def variance_gradient(layout, params, x, mode=EXACT, counter=None) -> np.ndarray:
    """``d sigma^2_f / dtheta`` for all parameters (circuit then cost) at one input."""
    X = _as_inputs(layout, x)
    if len(X) != 1:
        raise ValueError("variance_gradient takes a single input")
    _, d_var = gradient_batch(layout, params, X, mode, counter=counter)
    return d_var[0]


def chebyshev_curve(phi: float, x: Sequence[float] | np.ndarray) -> np.ndarray:
    """``<Z>`` of the one-qubit circuit ``Rx(phi * arccos x)|0>`` on a grid.

    For integer ``phi`` this is the Chebyshev polynomial ``T_phi(x)``.
    """
    layout = CircuitLayout(1, 1, entangling="none")
    params = ModelParams(
        ry_initial=np.zeros(1),
        encode=np.array([[float(phi)]]),
        entangle=np.zeros((1, 0)),
        ry_final=np.zeros(1),
        cost=SumZ(0.0, [1.0]),
    )
    return evaluate_batch(layout, params, np.asarray(x, dtype=float)).values
