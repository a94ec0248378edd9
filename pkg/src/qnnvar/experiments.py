"""Benchmark datasets, the water-PES pipeline and evaluation metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from qnnvar.errors import DataFormatError
from qnnvar.qnn import CircuitLayout, ModelParams, Shots, evaluate_batch
from qnnvar.sim import RngStream
from qnnvar.training import AlphaSchedule, Regularization, TrainLog, TrainSettings, train

__all__ = [
    "FUNCTION_KINDS",
    "Dataset",
    "LinearScaler",
    "PesRecord",
    "alpha_sweep",
    "confidence_interval",
    "gen_function_dataset",
    "gen_inference_grid",
    "gen_synthetic_pes",
    "load_pes_csv",
    "prepare_pes_dataset",
    "r2_score",
    "write_pes_csv",
]

FUNCTION_KINDS = ("log", "abs", "oscillation")

_DEFAULT_DOMAINS = {"log": (0.05, 1.0), "abs": (-1.0, 1.0), "oscillation": (-1.0, 1.0)}
_GRID_SPACING = {"log": 0.002, "abs": 0.004, "oscillation": 0.004}


@dataclass(frozen=True)
class LinearScaler:
    """Affine map sending ``[lo, hi]`` onto ``[target_lo, target_hi]`` (per column)."""

    lo: np.ndarray
    hi: np.ndarray
    target_lo: float
    target_hi: float

    @classmethod
    def fit(cls, data, target_lo: float, target_hi: float) -> "LinearScaler":
        data = np.asarray(data, dtype=float)
        lo, hi = data.min(axis=0), data.max(axis=0)
        if np.any(hi <= lo):
            raise ValueError("cannot rescale a constant column")
        return cls(lo, hi, target_lo, target_hi)

    def transform(self, data) -> np.ndarray:
        u = (np.asarray(data, dtype=float) - self.lo) / (self.hi - self.lo)
        return self.target_lo + u * (self.target_hi - self.target_lo)

    def inverse(self, data) -> np.ndarray:
        u = (np.asarray(data, dtype=float) - self.target_lo) / (self.target_hi - self.target_lo)
        return self.lo + u * (self.hi - self.lo)

    def inverse_scale(self, width) -> np.ndarray:
        """Map a width (e.g. a CI half-width) back to original units."""
        return np.asarray(width, dtype=float) * (self.hi - self.lo) / (self.target_hi - self.target_lo)


@dataclass
class Dataset:
    """Rescaled regression data.

    ``inputs`` has shape ``(n, d)`` inside the arccos domain; ``labels`` are
    rescaled targets.  ``label_scaler`` maps labels back to original units.
    """

    inputs: np.ndarray
    labels: np.ndarray
    weights: np.ndarray | None = None
    split: str = "train"
    label_scaler: LinearScaler | None = None
    input_scaler: LinearScaler | None = None
    indices: np.ndarray | None = None  # positions in the source record list

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs[:, None]
        self.labels = np.asarray(self.labels, dtype=float)
        if len(self.inputs) != len(self.labels):
            raise ValueError("inputs and labels differ in length")
        if np.any(np.abs(self.inputs) > 1.0):
            raise ValueError("inputs must lie in [-1, 1]")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.labels.shape or np.any(self.weights <= 0):
                raise ValueError("weights must be positive, one per point")
        if self.split not in ("train", "test"):
            raise ValueError(f"unknown split {self.split!r}")

    def __len__(self):
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]


def _target(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "log":
        return np.log(x)
    if kind == "abs":
        return np.abs(x)
    if kind == "oscillation":
        return x * np.sin(5 * np.pi * x)
    raise ValueError(f"unknown function kind {kind!r}; expected one of {FUNCTION_KINDS}")


def gen_function_dataset(
    kind: str,
    n_points: int = 20,
    domain: tuple[float, float] | None = None,
    seed: int = 0,
) -> Dataset:
    """Equidistant training set for one of the benchmark functions.

    ``log`` samples ``ln x`` on ``[0.05, 1]``, ``abs`` samples ``|x|`` on
    ``[-1, 1]`` with weights ``2 exp(-x^2)``, ``oscillation`` samples
    ``x sin(5 pi x)`` on ``[-1, 1]``.  Inputs are mapped affinely onto
    ``[-1, 1]`` and labels onto ``[0, 1]``.  The grid is deterministic, so
    ``seed`` is accepted for interface symmetry only.
    """
    if kind not in FUNCTION_KINDS:
        raise ValueError(f"unknown function kind {kind!r}; expected one of {FUNCTION_KINDS}")
    if n_points < 2:
        raise ValueError("need at least two points")
    lo, hi = domain if domain is not None else _DEFAULT_DOMAINS[kind]
    x = np.linspace(lo, hi, n_points)
    y = _target(kind, x)
    in_scaler = LinearScaler.fit(x[:, None], -1.0, 1.0)
    out_scaler = LinearScaler.fit(y, 0.0, 1.0)
    inputs = np.clip(in_scaler.transform(x[:, None]), -1.0, 1.0)
    weights = 2.0 * np.exp(-(x**2)) if kind == "abs" else None
    return Dataset(inputs, out_scaler.transform(y), weights, "train", out_scaler, in_scaler)


def gen_inference_grid(kind: str) -> np.ndarray:
    """Equidistant test grid on ``[-1, 1]``: spacing 0.002 for ``log``, 0.004 otherwise."""
    if kind not in _GRID_SPACING:
        raise ValueError(f"unknown function kind {kind!r}")
    h = _GRID_SPACING[kind]
    return np.linspace(-1.0, 1.0, int(round(2.0 / h)) + 1)


def function_reference(kind: str, dataset: Dataset, grid: np.ndarray) -> np.ndarray:
    """Exact target on ``grid`` (rescaled input units) in rescaled label units."""
    x = dataset.input_scaler.inverse(np.asarray(grid, dtype=float)[:, None])[:, 0]
    return dataset.label_scaler.transform(_target(kind, x))


# --------------------------------------------------------------------------
# potential energy surface
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PesRecord:
    """One geometry: O-H distances ``r1``, ``r2``, H-O-H ``angle`` (radians), ``energy`` (Hartree)."""

    r1: float
    r2: float
    angle: float
    energy: float

    def __post_init__(self):
        if not (self.r1 > 0 and self.r2 > 0):
            raise ValueError(f"bond lengths must be positive, got {self.r1}, {self.r2}")
        if not 0 < self.angle < math.pi:
            raise ValueError(f"angle must be in (0, pi) radians, got {self.angle}")
        if not math.isfinite(self.energy):
            raise ValueError("energy must be finite")


_PES_HEADERS = {
    ("r1", "r2", "angle_rad", "energy_hartree"): 1.0,
    ("r1", "r2", "angle_deg", "energy_hartree"): math.pi / 180.0,
}


def load_pes_csv(path) -> list[PesRecord]:
    """Read ``r1,r2,angle_rad|angle_deg,energy_hartree`` rows."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"PES file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = tuple(c.strip().lower() for c in rows[0][1])
    if header not in _PES_HEADERS:
        raise DataFormatError(
            f"{path}: header must be r1,r2,angle_rad,energy_hartree or "
            f"r1,r2,angle_deg,energy_hartree; got {','.join(header)}",
            row=rows[0][0],
        )
    to_rad = _PES_HEADERS[header]
    records = []
    for lineno, row in rows[1:]:
        if len(row) != 4:
            raise DataFormatError(f"expected 4 fields, got {len(row)}", row=lineno)
        try:
            r1, r2, ang, e = (float(c) for c in row)
        except ValueError as exc:
            raise DataFormatError(f"malformed number ({exc})", row=lineno) from None
        try:
            records.append(PesRecord(r1, r2, ang * to_rad, e))
        except ValueError as exc:
            raise DataFormatError(str(exc), row=lineno) from None
    if not records:
        raise DataFormatError(f"{path}: no data rows")
    return records


def write_pes_csv(path, records: Sequence[PesRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r1", "r2", "angle_rad", "energy_hartree"])
        for r in records:
            w.writerow([repr(r.r1), repr(r.r2), repr(r.angle), repr(r.energy)])


# Synthetic water-like surface. Lengths in Angstrom, energies in Hartree.
PES_R0 = 0.9572
PES_THETA0 = math.radians(104.52)
PES_K_R = 0.27
PES_K_THETA = 0.08
PES_K_C = -0.02
PES_R_RANGE = (0.80, 1.20)
PES_THETA_RANGE = (math.radians(90.0), math.radians(120.0))


def synthetic_pes_energy(r1, r2, theta):
    """Harmonic stretch/bend surface with a stretch-stretch coupling term."""
    d1 = np.asarray(r1) - PES_R0
    d2 = np.asarray(r2) - PES_R0
    return PES_K_R * (d1**2 + d2**2) + PES_K_THETA * (np.asarray(theta) - PES_THETA0) ** 2 + PES_K_C * d1 * d2


def gen_synthetic_pes(n_samples: int = 97, seed: int = 0) -> list[PesRecord]:
    """Uniformly sampled geometries on :func:`synthetic_pes_energy`."""
    rng = np.random.default_rng(seed)
    r1 = rng.uniform(*PES_R_RANGE, n_samples)
    r2 = rng.uniform(*PES_R_RANGE, n_samples)
    th = rng.uniform(*PES_THETA_RANGE, n_samples)
    e = synthetic_pes_energy(r1, r2, th)
    return [PesRecord(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(r1, r2, th, e)]


def prepare_pes_dataset(
    records: Sequence[PesRecord], seed: int = 0, n_train: int = 50
) -> tuple[Dataset, Dataset]:
    """Rescale features to [-0.9, 0.9] and energies to [0, 1]; seeded train/test split.

    Both datasets carry the scalers, so ``label_scaler.inverse`` returns
    Hartree.
    """
    if not 0 < n_train < len(records):
        raise ValueError(f"n_train must be in (0, {len(records)}), got {n_train}")
    feats = np.array([[r.r1, r.r2, r.angle] for r in records])
    energy = np.array([r.energy for r in records])
    fx = LinearScaler.fit(feats, -0.9, 0.9)
    fe = LinearScaler.fit(energy, 0.0, 1.0)
    X = fx.transform(feats)
    y = fe.transform(energy)
    order = np.random.default_rng(seed).permutation(len(records))
    tr, te = np.sort(order[:n_train]), np.sort(order[n_train:])
    train_set = Dataset(X[tr], y[tr], None, "train", fe, fx, tr)
    test_set = Dataset(X[te], y[te], None, "test", fe, fx, te)
    return train_set, test_set


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def r2_score(predictions, labels) -> float:
    f = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=float)
    ss_tot = np.sum((y - y.mean()) ** 2)
    ss_res = np.sum((y - f) ** 2)
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else -math.inf
    return float(1.0 - ss_res / ss_tot)


def confidence_interval(
    layout: CircuitLayout,
    params: ModelParams,
    X,
    repeats: int = 100,
    shots: int | None = 5000,
    rng: RngStream | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and 95% half-width (1.96 sample std) of repeated shot evaluations.

    Repeat ``j`` at input ``i`` is circuit ``j * n_points + i`` of ``rng``.
    ``shots=None`` evaluates exactly (half-width 0).
    """
    if shots is None:
        res = evaluate_batch(layout, params, X)
        return res.values, np.zeros_like(res.values)
    if repeats < 2:
        raise ValueError("need at least two repeats for a sample std")
    rng = RngStream(0, (0,)) if rng is None else rng
    X = np.asarray(X, dtype=float)
    X2 = X[:, None] if X.ndim == 1 and layout.n_features == 1 else np.atleast_2d(X)
    n = len(X2)
    tiled = np.tile(X2, (repeats, 1))
    vals = evaluate_batch(layout, params, tiled, Shots(shots, rng)).values.reshape(repeats, n)
    return vals.mean(axis=0), 1.96 * vals.std(axis=0, ddof=1)


def alpha_sweep(
    layout: CircuitLayout,
    params: ModelParams,
    dataset: Dataset,
    schedules: Sequence[AlphaSchedule],
    settings: TrainSettings,
) -> list[TrainLog]:
    """Exact-mode training once per schedule from the same initial parameters."""
    logs = []
    for sched in schedules:
        s = replace(
            settings,
            regularization=Regularization("scheduled", schedule=sched),
            shot_policy=None,
        )
        _, log = train(layout, params, dataset.inputs, dataset.labels, s, dataset.weights)
        logs.append(log)
    return logs
