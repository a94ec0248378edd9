from __future__ import annotations

import numpy as np
import pytest

from qnnvar.observables import IsingZZ, ProjectorQubit, SumZ
from qnnvar.qnn import CircuitLayout, ModelParams, init_params
from qnnvar.sim import apply_rx, apply_ry, apply_rzz, exact_probabilities, new_zero_state


def random_model(n_qubits=4, n_layers=2, observable="ising", seed=0, entangling="circular", n_features=1):
    """Random layout and parameters, cost coefficients included."""
    rng = np.random.default_rng(seed)
    layout = CircuitLayout(n_qubits, n_layers, entangling, n_features=n_features)
    if observable == "ising":
        cost = IsingZZ(n_qubits, *rng.uniform(-1, 1, 3))
    elif observable == "sumz":
        cost = SumZ(rng.uniform(-1, 1), rng.uniform(-1, 1, n_qubits))
    else:
        cost = ProjectorQubit(n_qubits, int(rng.integers(n_qubits)), int(rng.integers(2)))
    params = init_params(layout, 2.0, seed, cost)
    theta = params.to_vector()
    theta[: layout.n_circuit_params] = rng.uniform(-np.pi, np.pi, layout.n_circuit_params)
    return layout, ModelParams.from_vector(layout, theta, cost)


def reference_probabilities(layout, params, x):
    """Hand-rolled circuit on the single-state API, following the documented gate order."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = layout.n_qubits
    s = new_zero_state(n)
    for q in range(n):
        s = apply_ry(s, q, params.ry_initial[q])
    pairs = [(q, q + 1) for q in range(n - 1)]
    if layout.entangling == "circular" and n > 2:
        pairs.append((n - 1, 0))
    if layout.entangling == "none":
        pairs = []
    for l in range(layout.n_layers):
        for q in range(n):
            s = apply_rx(s, q, params.encode[l, q] * np.arccos(x[q % layout.n_features]))
        for k, (a, b) in enumerate(pairs):
            s = apply_rzz(s, a, b, params.entangle[l, k])
    for q in range(n):
        s = apply_ry(s, q, params.ry_final[q])
    return exact_probabilities(s)


def reference_moments(layout, params, x):
    """Brute-force sum over all outcomes: (mean, variance)."""
    p = reference_probabilities(layout, params, x)
    d = np.array([_brute_diag(params.cost, b) for b in range(2**layout.n_qubits)])
    mean = float(np.sum(p * d))
    return mean, float(np.sum(p * d * d) - mean**2)


def _brute_diag(cost, b):
    n = cost.n_qubits
    z = [1 - 2 * ((b >> p) & 1) for p in range(n)]
    if isinstance(cost, SumZ):
        return cost.phi0 + sum(cost.phi[p] * z[p] for p in range(n))
    if isinstance(cost, IsingZZ):
        pairs = sum(z[p] * z[q] for p in range(n) for q in range(p))
        return cost.phi1 + cost.phi2 * sum(z) + cost.phi3 * pairs
    return float(((b >> cost.qubit) & 1) == cost.outcome)


@pytest.fixture(params=["fused", "numpy"])
def backend(request, monkeypatch):
    """Run a test on both the numba and the pure-numpy simulation path."""
    if request.param == "numpy":
        monkeypatch.setenv("QNNVAR_NO_NUMBA", "1")
    else:
        monkeypatch.delenv("QNNVAR_NO_NUMBA", raising=False)
    return request.param


# --------------------------------------------------------------------------
# acceptance reporting: one line per criterion in the terminal summary
# --------------------------------------------------------------------------

ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: [int(p) if p.isdigit() else p for p in k.split(".")]):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
