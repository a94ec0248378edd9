"""Training configuration: YAML file plus ``section.key=value`` overrides.

Example (every key optional; shown values are the defaults)::

    seed: 0
    seeds: null            # list of seeds for a batch run
    output_dir: null       # falls back to $QNNVAR_OUTPUT_DIR, then ./runs
    dataset:
      kind: log            # log | abs | oscillation | pes | pes_synthetic
      n_points: 20         # function benchmarks
      path: null           # CSV file for kind: pes
      n_samples: 97        # kind: pes_synthetic
      n_train: 50          # PES train split size
      split_seed: 0
    layout:
      n_qubits: 10
      n_layers: 3
      entangling: circular # circular | linear | none
      observable: sumz     # sumz | ising | projector
      beta_encoding: 2.0
    regularization:
      mode: scheduled      # none | constant | scheduled
      alpha: 0.005         # constant mode
      a: 0.08
      b: 20
      v: 0.005
    shots:
      mode: shots          # shots | exact
      rsd_bound: 0.1
      min_shots: 100
      max_shots: 5000
    optimizer:
      learning_rate: null  # 0.1, or 0.01 for PES datasets
      max_iters: 300
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from qnnvar.errors import ConfigError
from qnnvar.experiments import (
    FUNCTION_KINDS,
    Dataset,
    gen_function_dataset,
    gen_synthetic_pes,
    load_pes_csv,
    prepare_pes_dataset,
)
from qnnvar.qnn import CircuitLayout, ModelParams, init_params
from qnnvar.training import AlphaSchedule, Regularization, ShotPolicy, TrainSettings

OUTPUT_DIR_ENV = "QNNVAR_OUTPUT_DIR"
DATASET_KINDS = FUNCTION_KINDS + ("pes", "pes_synthetic")

DEFAULTS: dict = {
    "seed": 0,
    "seeds": None,
    "output_dir": None,
    "dataset": {
        "kind": "log",
        "n_points": 20,
        "path": None,
        "n_samples": 97,
        "n_train": 50,
        "split_seed": 0,
    },
    "layout": {
        "n_qubits": 10,
        "n_layers": 3,
        "entangling": "circular",
        "observable": "sumz",
        "beta_encoding": 2.0,
    },
    "regularization": {"mode": "scheduled", "alpha": 0.005, "a": 0.08, "b": 20, "v": 0.005},
    "shots": {"mode": "shots", "rsd_bound": 0.1, "min_shots": 100, "max_shots": 5000},
    "optimizer": {"learning_rate": None, "max_iters": 300},
}


@dataclass
class TrainConfig:
    """Fully resolved configuration; ``data`` mirrors :data:`DEFAULTS`."""

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __getitem__(self, section):
        return self.data[section]

    # ---- derived objects -------------------------------------------------

    @property
    def is_pes(self) -> bool:
        return self.data["dataset"]["kind"] in ("pes", "pes_synthetic")

    @property
    def learning_rate(self) -> float:
        lr = self.data["optimizer"]["learning_rate"]
        if lr is None:
            return 0.01 if self.is_pes else 0.1
        return float(lr)

    @property
    def seeds(self) -> list[int]:
        seeds = self.data["seeds"]
        return [int(s) for s in seeds] if seeds else [int(self.data["seed"])]

    @property
    def output_dir(self) -> Path:
        out = self.data["output_dir"] or os.environ.get(OUTPUT_DIR_ENV) or "runs"
        return Path(out)

    def layout(self) -> CircuitLayout:
        lay = self.data["layout"]
        return CircuitLayout(
            int(lay["n_qubits"]),
            int(lay["n_layers"]),
            lay["entangling"],
            n_features=3 if self.is_pes else 1,
        )

    def init_params(self, seed: int) -> ModelParams:
        lay = self.data["layout"]
        return init_params(self.layout(), float(lay["beta_encoding"]), seed, lay["observable"])

    def settings(self, seed: int) -> TrainSettings:
        reg = self.data["regularization"]
        shots = self.data["shots"]
        policy = None
        if shots["mode"] == "shots":
            policy = ShotPolicy(
                float(shots["rsd_bound"]), int(shots["min_shots"]), int(shots["max_shots"])
            )
        return TrainSettings(
            regularization=Regularization(
                reg["mode"],
                float(reg["alpha"]),
                AlphaSchedule(float(reg["a"]), float(reg["b"]), float(reg["v"])),
            ),
            shot_policy=policy,
            learning_rate=self.learning_rate,
            max_iters=int(self.data["optimizer"]["max_iters"]),
            seed=seed,
        )

    def datasets(self) -> tuple[Dataset, Dataset | None]:
        """``(train, test)``; ``test`` is None for the function benchmarks."""
        ds = self.data["dataset"]
        kind = ds["kind"]
        if kind in FUNCTION_KINDS:
            return gen_function_dataset(kind, int(ds["n_points"])), None
        if kind == "pes":
            records = load_pes_csv(ds["path"])
        else:
            records = gen_synthetic_pes(int(ds["n_samples"]), int(ds["split_seed"]))
        return prepare_pes_dataset(records, int(ds["split_seed"]), int(ds["n_train"]))

    def to_dict(self) -> dict:
        out = copy.deepcopy(self.data)
        out["optimizer"]["learning_rate"] = self.learning_rate
        return out


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


def _merge(base: dict, new: dict, prefix: str = "") -> None:
    for key, value in new.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(name, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(name, "expected a mapping")
            _merge(base[key], value, name + ".")
        else:
            base[key] = value


def _override(data: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(item, "override must look like section.key=value")
    dotted, raw = item.split("=", 1)
    keys = dotted.strip().split(".")
    nested: dict = yaml.safe_load(raw) if raw.strip() else None
    for k in reversed(keys):
        nested = {k: nested}
    _merge(data, nested)


def _check(cond: bool, key: str, message: str) -> None:
    if not cond:
        raise ConfigError(key, message)


def _validate(cfg: TrainConfig) -> None:
    d = cfg.data
    ds, lay, reg, sh, opt = (d[k] for k in ("dataset", "layout", "regularization", "shots", "optimizer"))

    def integer(section: str, key: str, value, lo: int = 0) -> None:
        name = f"{section}.{key}" if section else key
        _check(isinstance(value, int) and not isinstance(value, bool), name, "expected an integer")
        _check(value >= lo, name, f"must be >= {lo}")

    def number(section: str, key: str, value) -> None:
        _check(
            isinstance(value, (int, float)) and not isinstance(value, bool),
            f"{section}.{key}",
            "expected a number",
        )

    integer("", "seed", d["seed"])
    if d["seeds"] is not None:
        _check(isinstance(d["seeds"], list) and d["seeds"], "seeds", "expected a non-empty list")
        for s in d["seeds"]:
            integer("", "seeds", s)

    _check(ds["kind"] in DATASET_KINDS, "dataset.kind", f"expected one of {DATASET_KINDS}")
    integer("dataset", "n_points", ds["n_points"], 2)
    integer("dataset", "n_samples", ds["n_samples"], 2)
    integer("dataset", "n_train", ds["n_train"], 1)
    integer("dataset", "split_seed", ds["split_seed"])
    if ds["kind"] == "pes":
        _check(ds["path"] is not None, "dataset.path", "required for kind 'pes'")
        _check(Path(ds["path"]).is_file(), "dataset.path", f"file not found: {ds['path']}")

    integer("layout", "n_qubits", lay["n_qubits"], 1)
    _check(lay["n_qubits"] <= 24, "layout.n_qubits", "must be <= 24")
    if cfg.is_pes:
        _check(lay["n_qubits"] >= 3, "layout.n_qubits", "PES data needs >= 3 qubits")
    integer("layout", "n_layers", lay["n_layers"], 1)
    _check(
        lay["entangling"] in ("circular", "linear", "none"),
        "layout.entangling",
        "expected circular, linear or none",
    )
    _check(
        lay["observable"] in ("sumz", "ising", "projector"),
        "layout.observable",
        "expected sumz, ising or projector",
    )
    number("layout", "beta_encoding", lay["beta_encoding"])
    _check(lay["beta_encoding"] > 0.01, "layout.beta_encoding", "must exceed 0.01")

    _check(
        reg["mode"] in ("none", "constant", "scheduled"),
        "regularization.mode",
        "expected none, constant or scheduled",
    )
    for k in ("alpha", "a", "b", "v"):
        number("regularization", k, reg[k])
    _check(reg["alpha"] >= 0, "regularization.alpha", "must be >= 0")
    _check(reg["a"] > 0, "regularization.a", "must be > 0")
    _check(reg["b"] > 0, "regularization.b", "must be > 0")
    _check(0 < reg["v"] < 1, "regularization.v", "must be in (0, 1)")

    _check(sh["mode"] in ("shots", "exact"), "shots.mode", "expected shots or exact")
    number("shots", "rsd_bound", sh["rsd_bound"])
    _check(sh["rsd_bound"] > 0, "shots.rsd_bound", "must be > 0")
    integer("shots", "min_shots", sh["min_shots"], 1)
    integer("shots", "max_shots", sh["max_shots"], 1)
    _check(sh["min_shots"] <= sh["max_shots"], "shots.min_shots", "must be <= shots.max_shots")

    if opt["learning_rate"] is not None:
        number("optimizer", "learning_rate", opt["learning_rate"])
        _check(opt["learning_rate"] > 0, "optimizer.learning_rate", "must be > 0")
    integer("optimizer", "max_iters", opt["max_iters"])


def parse_config(path=None, overrides=(), base: dict | None = None) -> TrainConfig:
    """Load defaults, then ``path`` (YAML), then ``overrides``; validate.

    ``base`` replaces the defaults (used to layer a config on a saved echo).
    """
    cfg = TrainConfig(copy.deepcopy(base if base is not None else DEFAULTS))
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"invalid YAML: {exc}") from None
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ConfigError("config", "top level must be a mapping")
            _merge(cfg.data, loaded)
    for item in overrides:
        _override(cfg.data, item)
    _validate(cfg)
    return cfg
