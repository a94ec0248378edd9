"""Plain-text artifacts: CSV logs, parameter files and JSON summaries.

Floats are written with ``repr`` (shortest round-trip form), so a rerun
with the same inputs produces byte-identical files and every file reads
back to the exact values written.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from qnnvar.errors import DataFormatError
from qnnvar.observables import make_observable
from qnnvar.qnn import CircuitLayout, ModelParams
from qnnvar.training import TrainLog

LOG_COLUMNS = ("iter", "L_fit", "L_var", "alpha", "shots")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns: Sequence[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a CSV written by :func:`write_csv` into column arrays.

    Numeric columns become float arrays; anything else stays a string array.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise DataFormatError(f"{path}: expected {len(header)} fields", row=i + 2)
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([float(c) for c in col])
        except ValueError:
            out[name] = np.array(col)
    return out


def write_log_csv(path, log: TrainLog) -> Path:
    rows = ((r.iteration, r.fit_loss, r.var_loss, r.alpha, r.shots) for r in log.records)
    return write_csv(path, LOG_COLUMNS, rows)


def write_mean_trajectory(path, logs: Sequence[TrainLog]) -> Path:
    """Per-iteration means over several runs of equal length."""
    n = min(len(log) for log in logs)
    cols = {
        name: np.mean([log.column(name)[:n] for log in logs], axis=0)
        for name in ("fit_loss", "var_loss", "alpha", "shots")
    }
    rows = zip(range(n), cols["fit_loss"], cols["var_loss"], cols["alpha"], cols["shots"])
    return write_csv(path, LOG_COLUMNS, rows)


# --------------------------------------------------------------------------
# parameter files
# --------------------------------------------------------------------------


def write_params(path, layout: CircuitLayout, params: ModelParams) -> Path:
    """One ``label value`` pair per line; header lines describe the layout."""
    lines = [
        f"layout.n_qubits {layout.n_qubits}",
        f"layout.n_layers {layout.n_layers}",
        f"layout.entangling {layout.entangling}",
        f"layout.n_features {layout.n_features}",
        f"layout.feature_of_qubit {','.join(map(str, layout.feature_of_qubit))}",
        f"cost.kind {params.cost.kind}",
    ]
    if params.cost.kind == "projector":
        lines += [f"cost.qubit {params.cost.qubit}", f"cost.outcome {params.cost.outcome}"]
    for q, v in enumerate(params.ry_initial):
        lines.append(f"ry_initial.{q} {float(v)!r}")
    for l in range(layout.n_layers):
        for q, v in enumerate(params.encode[l]):
            lines.append(f"encode.{l}.{q} {float(v)!r}")
        for k, v in enumerate(params.entangle[l]):
            lines.append(f"entangle.{l}.{k} {float(v)!r}")
    for q, v in enumerate(params.ry_final):
        lines.append(f"ry_final.{q} {float(v)!r}")
    for m, v in enumerate(params.cost.coefficients):
        lines.append(f"cost.{m} {float(v)!r}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_params(path) -> tuple[CircuitLayout, ModelParams]:
    from qnnvar.observables import ProjectorQubit

    entries: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataFormatError(f"expected 'label value', got {line!r}", row=lineno)
        entries[parts[0]] = parts[1]
    try:
        layout = CircuitLayout(
            int(entries["layout.n_qubits"]),
            int(entries["layout.n_layers"]),
            entries["layout.entangling"],
            int(entries["layout.n_features"]),
            tuple(int(f) for f in entries["layout.feature_of_qubit"].split(",")),
        )
        kind = entries["cost.kind"]
        if kind == "projector":
            cost = ProjectorQubit(
                layout.n_qubits, int(entries["cost.qubit"]), int(entries["cost.outcome"])
            )
        else:
            cost = make_observable(kind, layout.n_qubits)
        n, L = layout.n_qubits, layout.n_layers
        n_pairs = len(layout.entangling_pairs)
        theta = [float(entries[f"ry_initial.{q}"]) for q in range(n)]
        for l in range(L):
            theta += [float(entries[f"encode.{l}.{q}"]) for q in range(n)]
            theta += [float(entries[f"entangle.{l}.{k}"]) for k in range(n_pairs)]
        theta += [float(entries[f"ry_final.{q}"]) for q in range(n)]
        theta += [float(entries[f"cost.{m}"]) for m in range(cost.n_coefficients)]
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing entry {exc.args[0]}") from None
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    return layout, ModelParams.from_vector(layout, np.array(theta), cost)


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
