"""Variance-regularised training.

The loss minimised at iteration ``i`` is ``L_fit + alpha(i) * L_var`` where
``L_fit`` is the (weighted) squared error over the training points and
``L_var`` the sum of model output variances at the regularisation points.
In shot mode the loss is evaluated with ``max_shots`` and the number of
shots spent on the gradient circuits is chosen so that the relative standard
deviation of ``L_fit`` stays below ``rsd_bound``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from qnnvar.errors import NumericAbort
from qnnvar.qnn import (
    EXACT,
    BatchEvaluation,
    CircuitLayout,
    ModelParams,
    Shots,
    evaluate_batch,
    gradient_batch,
)
from qnnvar.sim import RngStream

log = logging.getLogger(__name__)

__all__ = [
    "AdamState",
    "AlphaSchedule",
    "IterationRecord",
    "Regularization",
    "ShotPolicy",
    "TrainLog",
    "TrainSettings",
    "adam_step",
    "alpha_at",
    "estimate_fit_loss_variance",
    "fit_loss",
    "loss_gradient",
    "shots_for_gradient",
    "total_loss",
    "train",
    "var_loss",
]


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------


def _weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    return w


def fit_loss(predictions, labels, weights=None) -> float:
    """Weighted squared error ``sum_i w_i (f_i - y_i)^2``."""
    f = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    if f.shape != y.shape:
        raise ValueError(f"predictions {f.shape} and labels {y.shape} differ in shape")
    return float(np.sum(_weights(weights, len(f)) * (f - y) ** 2))


def var_loss(variances) -> float:
    return float(np.sum(np.asarray(variances, dtype=float)))


def total_loss(fit: float, var: float, alpha: float) -> float:
    return fit + alpha * var


def estimate_fit_loss_variance(residuals, variances, weights=None, shots: int = 1) -> float:
    """First-order estimate of ``var(L_fit)`` from per-point output variances.

    ``4 * sum_i w_i^2 r_i^2 sigma_i^2 / shots`` with ``r_i = f_i - y_i``.
    """
    r = np.asarray(residuals, dtype=float)
    w = _weights(weights, len(r))
    return float(4.0 * np.sum(w**2 * r**2 * np.asarray(variances, dtype=float)) / shots)


@dataclass(frozen=True)
class AlphaSchedule:
    """Modified sigmoid decaying from ~1 to the plateau ``v``.

    ``a`` sets the slope of the decay, ``b`` the width of the initial plateau
    (in iterations), ``v`` the final regularisation strength.
    """

    a: float = 0.08
    b: float = 20.0
    v: float = 0.005

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be > 0, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"b must be > 0, got {self.b}")
        if not 0 < self.v < 1:
            raise ValueError(f"v must be in (0, 1), got {self.v}")


def alpha_at(schedule: AlphaSchedule, i) -> float:
    a, b, v = schedule.a, schedule.b, schedule.v
    # b e^{a(b-i)} / (b e^{a(b-i)} + 1) written as a logistic in log-space
    z = math.log(b) + a * (b - i)
    if z >= 0:
        frac = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        frac = e / (1.0 + e)
    return (1.0 - v) * frac + v


@dataclass(frozen=True)
class Regularization:
    """``mode`` is ``"none"``, ``"constant"`` (fixed ``alpha``) or ``"scheduled"``."""

    mode: str = "scheduled"
    alpha: float = 0.005
    schedule: AlphaSchedule = field(default_factory=AlphaSchedule)

    def __post_init__(self):
        if self.mode not in ("none", "constant", "scheduled"):
            raise ValueError(f"unknown regularization mode {self.mode!r}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")

    def alpha_at(self, i: int) -> float:
        if self.mode == "none":
            return 0.0
        if self.mode == "constant":
            return self.alpha
        return alpha_at(self.schedule, i)


# --------------------------------------------------------------------------
# shot budgeting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotPolicy:
    rsd_bound: float = 0.1
    min_shots: int = 100
    max_shots: int = 5000

    def __post_init__(self):
        if not self.rsd_bound > 0:
            raise ValueError(f"rsd_bound must be > 0, got {self.rsd_bound}")
        if not 1 <= self.min_shots <= self.max_shots:
            raise ValueError(
                f"need 1 <= min_shots <= max_shots, got {self.min_shots}, {self.max_shots}"
            )


def _rsd(num: float, loss: float, shots: int) -> float:
    return math.sqrt(num / shots) / loss


def shots_for_gradient(residuals, variances, weights, policy: ShotPolicy) -> int:
    """Smallest shot count keeping the relative std of ``L_fit`` below the bound.

    Solves ``sqrt(4 sum w^2 r^2 s^2 / N) / sum w r^2 <= rsd_bound`` for ``N``
    and clamps to ``[min_shots, max_shots]``.  A vanishing loss returns
    ``max_shots``.
    """
    r = np.asarray(residuals, dtype=float)
    w = _weights(weights, len(r))
    s2 = np.maximum(np.asarray(variances, dtype=float), 0.0)
    loss = float(np.sum(w * r**2))
    num = float(4.0 * np.sum(w**2 * r**2 * s2))
    if loss <= 0.0 or not math.isfinite(loss):
        return policy.max_shots
    if num <= 0.0:
        return policy.min_shots
    # compare the unsquared ratio first; num / (beta * loss)**2 under- or overflows
    ratio = math.sqrt(num) / (policy.rsd_bound * loss)
    if not ratio < math.sqrt(policy.max_shots):
        return policy.max_shots
    need = ratio * ratio
    n = max(1, math.ceil(need))
    while n < policy.max_shots and _rsd(num, loss, n) > policy.rsd_bound:
        n += 1
    return int(min(max(n, policy.min_shots), policy.max_shots))


# --------------------------------------------------------------------------
# optimiser
# --------------------------------------------------------------------------


@dataclass
class AdamState:
    learning_rate: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step: int = 0


def adam_step(state: AdamState, params: np.ndarray, gradient: np.ndarray):
    """One bias-corrected ADAM update; returns ``(new_state, new_params)``."""
    g = np.asarray(gradient, dtype=float)
    m = np.zeros_like(g) if state.m is None else state.m
    v = np.zeros_like(g) if state.v is None else state.v
    t = state.step + 1
    m = state.beta1 * m + (1.0 - state.beta1) * g
    v = state.beta2 * v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new = np.asarray(params, dtype=float) - state.learning_rate * m_hat / (
        np.sqrt(v_hat) + state.epsilon
    )
    return (
        AdamState(state.learning_rate, state.beta1, state.beta2, state.epsilon, m, v, t),
        new,
    )


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    fit_loss: float
    var_loss: float
    alpha: float
    shots: int  # gradient shots; 0 in exact mode
    wall_time: float


@dataclass
class TrainLog:
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def final_averages(self, last: int = 10) -> tuple[float, float]:
        """Mean ``(L_fit, L_var)`` over the last ``last`` iterations."""
        if not self.records:
            raise ValueError("empty training log")
        tail = self.records[-last:]
        return (
            float(np.mean([r.fit_loss for r in tail])),
            float(np.mean([r.var_loss for r in tail])),
        )


@dataclass(frozen=True)
class TrainSettings:
    regularization: Regularization = field(default_factory=Regularization)
    shot_policy: ShotPolicy | None = field(default_factory=ShotPolicy)  # None: exact mode
    learning_rate: float = 0.1
    max_iters: int = 300
    seed: int = 0

    @property
    def exact(self) -> bool:
        return self.shot_policy is None


def loss_gradient(
    layout: CircuitLayout,
    params: ModelParams,
    X,
    y,
    weights=None,
    alpha: float = 0.0,
    var_X=None,
    mode=EXACT,
    gradient_mode=None,
    base: BatchEvaluation | None = None,
    var_base: BatchEvaluation | None = None,
):
    """Evaluate the losses and the gradient of ``L_fit + alpha * L_var``.

    ``mode`` drives the loss evaluation, ``gradient_mode`` (default: same as
    ``mode``) the shifted circuits.  Precomputed loss evaluations may be
    passed as ``base`` / ``var_base``.  In shot mode circuit stream indices
    are laid out as: training points, regularisation points (if separate),
    then shifted circuits.  Returns ``(fit, var, gradient)``.
    """
    y = np.asarray(y, dtype=float)
    w = _weights(weights, len(y))
    gradient_mode = mode if gradient_mode is None else gradient_mode
    if base is None:
        base = evaluate_batch(layout, params, X, mode)
    n_base = len(y)
    if var_X is None:
        var_base = base
    else:
        if var_base is None:
            var_base = evaluate_batch(layout, params, var_X, _offset(mode, n_base))
        n_base += len(var_base.values)
    residual = base.values - y
    fit = float(np.sum(w * residual**2))
    var = var_loss(var_base.variances)

    d_f, d_var = gradient_batch(layout, params, X, _offset(gradient_mode, n_base), base=base)
    grad = (2.0 * w * residual) @ d_f
    if var_X is None:
        grad = grad + alpha * d_var.sum(axis=0)
    elif alpha != 0.0:
        start = n_base + 2 * len(y) * layout.n_circuit_params
        _, d_var_k = gradient_batch(
            layout, params, var_X, _offset(gradient_mode, start), base=var_base
        )
        grad = grad + alpha * d_var_k.sum(axis=0)
    return fit, var, grad


def _offset(mode, start: int):
    if isinstance(mode, Shots):
        return Shots(mode.n, mode.rng, start)
    return mode


def train(
    layout: CircuitLayout,
    params: ModelParams,
    X,
    y,
    settings: TrainSettings,
    weights=None,
    var_X=None,
    callback=None,
) -> tuple[ModelParams, TrainLog]:
    """Run ``settings.max_iters`` ADAM iterations.

    Each iteration evaluates the losses (exact, or ``max_shots`` per circuit),
    records them, picks the gradient shot count, computes the gradient of the
    regularised loss by parameter shift and takes one ADAM step.  All
    randomness is keyed by ``(settings.seed, iteration, circuit)``.
    ``var_X`` optionally replaces the training inputs as regularisation points.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = _weights(weights, len(y))
    theta = params.to_vector()
    cost = params.cost
    adam = AdamState(learning_rate=settings.learning_rate)
    record_log = TrainLog()
    policy = settings.shot_policy
    t0 = time.perf_counter()

    for i in range(settings.max_iters):
        current = ModelParams.from_vector(layout, theta, cost)
        alpha = settings.regularization.alpha_at(i)
        stream = RngStream(settings.seed, (i,))
        if policy is None:
            shots = 0
            fit, var, grad = loss_gradient(layout, current, X, y, w, alpha, var_X)
        else:
            mode = Shots(policy.max_shots, stream)
            base = evaluate_batch(layout, current, X, mode)
            var_base = None
            if var_X is not None:
                var_base = evaluate_batch(layout, current, var_X, _offset(mode, len(y)))
            shots = shots_for_gradient(base.values - y, base.variances, w, policy)
            fit, var, grad = loss_gradient(
                layout, current, X, y, w, alpha, var_X,
                mode=mode, gradient_mode=Shots(shots, stream), base=base, var_base=var_base,
            )
        if not (math.isfinite(fit) and math.isfinite(var) and np.all(np.isfinite(grad))):
            raise NumericAbort(
                f"non-finite loss or gradient at iteration {i} (L_fit={fit}, L_var={var})",
                params=current,
                log=record_log,
            )
        rec = IterationRecord(i, fit, var, alpha, shots, time.perf_counter() - t0)
        record_log.records.append(rec)
        if callback is not None:
            callback(rec)
        log.debug("iter %d L_fit=%.6g L_var=%.6g alpha=%.4g shots=%d", i, fit, var, alpha, shots)
        adam, theta = adam_step(adam, theta, grad)

    return ModelParams.from_vector(layout, theta, cost), record_log
