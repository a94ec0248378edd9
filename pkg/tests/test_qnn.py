from __future__ import annotations

import numpy as np
import pytest
from conftest import random_model, reference_moments, reference_probabilities
from hypothesis import given, settings
from hypothesis import strategies as st

from qnnvar.errors import DomainError, QnnVarError
from qnnvar.observables import SumZ, std_of_mean
from qnnvar.qnn import (
    EXACT,
    CircuitLayout,
    ExecutionCounter,
    ModelParams,
    Shots,
    build_circuit,
    chebyshev_curve,
    evaluate,
    evaluate_batch,
    gradient_batch,
    init_params,
    parameter_shift_gradient,
    variance_gradient,
)
from qnnvar.sim import RngStream


def chebyshev_t(n, x):
    t0, t1 = np.ones_like(x), x
    if n == 0:
        return t0
    for _ in range(n - 1):
        t0, t1 = t1, 2 * x * t1 - t0
    return t1


def one_qubit(encode=0.0, ry_initial=0.0, ry_final=0.0, layers=1):
    layout = CircuitLayout(1, layers, entangling="none")
    params = ModelParams(
        ry_initial=np.array([ry_initial]),
        encode=np.full((layers, 1), encode),
        entangle=np.zeros((layers, 0)),
        ry_final=np.array([ry_final]),
        cost=SumZ(0.0, np.array([1.0])),
    )
    return layout, params


def central_difference(fn, theta, h=1e-5):
    out = np.empty_like(theta)
    for j in range(len(theta)):
        e = np.zeros_like(theta)
        e[j] = h
        out[j] = (fn(theta + e) - fn(theta - e)) / (2 * h)
    return out


class TestLayout:
    def test_linear_gate_count(self):
        assert len(CircuitLayout(5, 1, "linear").entangling_pairs) == 4

    def test_circular_gate_count(self):
        pairs = CircuitLayout(5, 1, "circular").entangling_pairs
        assert len(pairs) == 5 and pairs[-1] == (4, 0)

    def test_cyclic_features(self):
        assert CircuitLayout(7, 1, n_features=3).feature_of_qubit == (0, 1, 2, 0, 1, 2, 0)

    def test_too_many_features(self):
        with pytest.raises(ValueError):
            CircuitLayout(2, 1, n_features=3)

    def test_every_parameter_in_one_gate(self):
        layout, params = random_model(4, 2)
        gates = build_circuit(layout, params, 0.3)
        assert len(gates) == layout.n_circuit_params == len(params.circuit_vector())


class TestBuildCircuit:
    def test_chebyshev_single_gate(self):
        layout, params = one_qubit(encode=3.0)
        gates = build_circuit(layout, params, 0.2)
        rx = [g for g in gates if g.kind == "rx"]
        assert len(rx) == 1
        assert rx[0].angle == pytest.approx(3.0 * np.arccos(0.2))
        assert all(g.angle == 0 for g in gates if g.kind == "ry")

    def test_x_one_zero_encoding(self):
        layout, params = random_model(3, 2)
        assert all(g.angle == 0 for g in build_circuit(layout, params, 1.0) if g.kind == "rx")

    @pytest.mark.parametrize("x", [1.5, -1.5, np.nan])
    def test_domain_guard(self, x):
        layout, params = random_model(2, 1)
        with pytest.raises(DomainError):
            build_circuit(layout, params, x)

    def test_gate_order(self):
        layout = CircuitLayout(3, 1, "linear")
        kinds = [g.kind for g in build_circuit(layout, init_params(layout), 0.0)]
        assert kinds == ["ry"] * 3 + ["rx"] * 3 + ["rzz"] * 2 + ["ry"] * 3


class TestEvaluate:
    def test_t2_at_half(self):
        layout, params = one_qubit(encode=2.0)
        assert evaluate(layout, params, 0.5).value == pytest.approx(-0.5, abs=1e-14)

    def test_x_one_is_deterministic(self):
        layout, params = one_qubit(encode=2.0)
        res = evaluate(layout, params, 1.0)
        assert res.value == pytest.approx(1.0) and res.variance == pytest.approx(0.0, abs=1e-15)
        assert res.exact

    @pytest.mark.parametrize("observable", ["ising", "sumz", "projector"])
    @pytest.mark.parametrize("seed", range(4))
    def test_brute_force_variance(self, observable, seed, backend):
        layout, params = random_model(4, 2, observable, seed)
        xs = np.random.default_rng(seed).uniform(-1, 1, 5)
        res = evaluate_batch(layout, params, xs)
        for k, x in enumerate(xs):
            mean, var = reference_moments(layout, params, x)
            assert abs(res.values[k] - mean) < 1e-12
            assert abs(res.variances[k] - var) < 1e-12

    @pytest.mark.parametrize("entangling", ["circular", "linear", "none"])
    def test_probabilities_match_reference(self, entangling, backend):
        layout, params = random_model(3, 2, "sumz", 1, entangling, n_features=2)
        x = np.array([0.3, -0.7])
        res = evaluate_batch(layout, params, x[None, :])
        np.testing.assert_allclose(res.dists[0], reference_probabilities(layout, params, x), atol=1e-13)

    def test_shot_mode_consistency(self):
        layout, params = random_model(4, 2, "ising", 5)
        exact = evaluate(layout, params, 0.4)
        shot = evaluate(layout, params, 0.4, Shots(10**6, RngStream(1, (0,))))
        assert abs(shot.value - exact.value) < 5 * std_of_mean(exact.variance, 10**6)
        assert shot.shots_used == 10**6

    def test_shot_mode_deterministic(self):
        layout, params = random_model(3, 1, "sumz", 2)
        mode = Shots(500, RngStream(8, (2,)))
        a = evaluate_batch(layout, params, [0.1, 0.2], mode)
        b = evaluate_batch(layout, params, [0.1, 0.2], mode)
        np.testing.assert_array_equal(a.values, b.values)

    def test_shot_variance_from_same_counts(self):
        layout, params = random_model(3, 1, "projector", 0)
        res = evaluate(layout, params, 0.1, Shots(1000, RngStream(0, (0,))))
        assert res.variance == pytest.approx(res.value * (1 - res.value), abs=1e-12)

    def test_zero_shots_rejected(self):
        with pytest.raises(QnnVarError):
            Shots(0)


class TestParameterShift:
    def test_ry_at_zero(self):
        layout, params = one_qubit(ry_initial=0.0)
        assert parameter_shift_gradient(layout, params, 1.0)[0] == pytest.approx(0, abs=1e-15)

    def test_ry_at_half_pi(self):
        layout, params = one_qubit(ry_initial=np.pi / 2)
        assert parameter_shift_gradient(layout, params, 1.0)[0] == pytest.approx(-1, abs=1e-14)

    def test_circuit_count(self):
        layout, params = random_model(3, 2)
        counter = ExecutionCounter()
        parameter_shift_gradient(layout, params, 0.2, counter=counter)
        assert counter.circuits == 2 * layout.n_circuit_params

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_difference(self, seed, backend):
        layout, params = random_model(4, 2, "ising", seed)
        theta = params.to_vector()
        cost = params.cost
        x = np.random.default_rng(seed + 100).uniform(-0.95, 0.95)

        def f(t):
            return evaluate(layout, ModelParams.from_vector(layout, t, cost), x).value

        fd = central_difference(f, theta)
        dvalue, _ = gradient_batch(layout, params, [x])
        assert np.max(np.abs(dvalue[0] - fd)) < 1e-6
        ps = parameter_shift_gradient(layout, params, x)
        np.testing.assert_allclose(ps, dvalue[0, : layout.n_circuit_params], atol=1e-14)

    def test_multi_feature_finite_difference(self):
        layout, params = random_model(4, 2, "sumz", 9, n_features=3)
        x = np.array([0.2, -0.5, 0.8])
        theta = params.to_vector()

        def f(t):
            return evaluate(layout, ModelParams.from_vector(layout, t, params.cost), x[None, :]).value

        dvalue, _ = gradient_batch(layout, params, x[None, :])
        assert np.max(np.abs(dvalue[0] - central_difference(f, theta))) < 1e-6


class TestVarianceGradient:
    def test_one_qubit_at_zero(self):
        layout, params = one_qubit(ry_initial=0.0)
        assert variance_gradient(layout, params, 1.0)[0] == pytest.approx(0, abs=1e-14)

    def test_one_qubit_at_quarter_pi(self):
        layout, params = one_qubit(ry_initial=np.pi / 4)
        assert variance_gradient(layout, params, 1.0)[0] == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("observable", ["ising", "sumz", "projector"])
    def test_finite_difference(self, observable, backend):
        layout, params = random_model(4, 2, observable, 3)
        theta = params.to_vector()
        x = -0.35

        def var(t):
            return evaluate(layout, ModelParams.from_vector(layout, t, params.cost), x).variance

        fd = central_difference(var, theta)
        assert np.max(np.abs(variance_gradient(layout, params, x) - fd)) < 1e-6

    def test_plus_sign_would_fail(self):
        # the opposite sign in front of 2<C>d<C> disagrees with finite differences
        layout, params = random_model(4, 2, "ising", 4)
        theta = params.to_vector()
        x = 0.25
        dvalue, dvar = gradient_batch(layout, params, [x])
        mean = evaluate(layout, params, x).value
        d_second = dvar[0] + 2 * mean * dvalue[0]
        wrong = d_second + 2 * mean * dvalue[0]

        def var(t):
            return evaluate(layout, ModelParams.from_vector(layout, t, params.cost), x).variance

        assert np.max(np.abs(wrong - central_difference(var, theta))) > 1e-3

    def test_shift_circuit_reuse(self):
        layout, params = random_model(3, 2)
        X = [0.1, -0.4]
        only_value = ExecutionCounter()
        for x in X:
            parameter_shift_gradient(layout, params, x, counter=only_value)
        joint = ExecutionCounter()
        base = evaluate_batch(layout, params, X)
        gradient_batch(layout, params, X, base=base, counter=joint)
        assert joint.circuits == only_value.circuits

    def test_shot_mode_close_to_exact(self):
        layout, params = random_model(3, 1, "sumz", 6)
        exact_v, exact_s = gradient_batch(layout, params, [0.3])
        mode = Shots(200_000, RngStream(2, (0,)))
        shot_v, shot_s = gradient_batch(layout, params, [0.3], mode)
        assert np.max(np.abs(shot_v - exact_v)) < 0.02
        assert np.max(np.abs(shot_s - exact_s)) < 0.05

    def test_backends_agree_in_shot_mode(self, monkeypatch):
        layout, params = random_model(3, 2, "ising", 1)
        mode = Shots(1000, RngStream(4, (1,)))
        fused = gradient_batch(layout, params, [0.2, 0.6], mode)
        monkeypatch.setenv("QNNVAR_NO_NUMBA", "1")
        plain = gradient_batch(layout, params, [0.2, 0.6], mode)
        for a, b in zip(fused, plain):
            np.testing.assert_allclose(a, b, atol=1e-12)


class TestChebyshev:
    @pytest.mark.parametrize("n", range(6))
    def test_integer_degrees(self, n):
        x = np.linspace(-0.99, 0.99, 101)
        assert np.max(np.abs(chebyshev_curve(n, x) - chebyshev_t(n, x))) < 1e-10

    def test_t2(self):
        assert chebyshev_curve(2, [0.5])[0] == pytest.approx(-0.5, abs=1e-14)

    def test_t3(self):
        assert chebyshev_curve(3, [0.5])[0] == pytest.approx(-1.0, abs=1e-14)

    def test_non_integer_at_one(self):
        assert chebyshev_curve(2.5, [1.0])[0] == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(phi=st.floats(0, 6), x=st.floats(-1, 1))
    def test_closed_form(self, phi, x):
        assert chebyshev_curve(phi, [x])[0] == pytest.approx(np.cos(phi * np.arccos(x)), abs=1e-12)


class TestInitParams:
    def test_tower(self):
        layout = CircuitLayout(3, 2)
        params = init_params(layout, 2.01, seed=0)
        for row in params.encode:
            np.testing.assert_allclose(row, [0.01, 1.01, 2.01])

    def test_seeded(self):
        layout = CircuitLayout(4, 2)
        a, b = init_params(layout, seed=7), init_params(layout, seed=7)
        np.testing.assert_array_equal(a.to_vector(), b.to_vector())

    def test_encoding_away_from_zero(self):
        params = init_params(CircuitLayout(6, 3), 2.0, 1)
        assert np.all(params.encode >= 0.01)

    def test_angles_in_range(self):
        params = init_params(CircuitLayout(6, 3), 2.0, 1)
        for arr in (params.ry_initial, params.entangle, params.ry_final):
            assert np.all(np.abs(arr) <= np.pi)

    def test_cost_defaults(self):
        params = init_params(CircuitLayout(4, 1))
        assert params.cost.phi0 == 0
        np.testing.assert_allclose(params.cost.phi, 0.25)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 1000), n=st.integers(1, 5), L=st.integers(0, 3))
    def test_vector_round_trip(self, seed, n, L):
        layout = CircuitLayout(n, L)
        params = init_params(layout, 2.0, seed, "sumz")
        back = ModelParams.from_vector(layout, params.to_vector(), params.cost)
        np.testing.assert_array_equal(back.to_vector(), params.to_vector())
