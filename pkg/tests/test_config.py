from __future__ import annotations

import pytest

from qnnvar.config import OUTPUT_DIR_ENV, parse_config
from qnnvar.errors import ConfigError


def cfg_file(tmp_path, text):
    p = tmp_path / "cfg.yaml"
    p.write_text(text, encoding="utf-8")
    return p


class TestDefaults:
    def test_empty_config_paper_values(self, tmp_path):
        cfg = parse_config(cfg_file(tmp_path, ""))
        s = cfg.settings(0)
        sched = s.regularization.schedule
        assert (sched.a, sched.b, sched.v) == (0.08, 20, 0.005)
        assert s.regularization.mode == "scheduled"
        p = s.shot_policy
        assert (p.rsd_bound, p.min_shots, p.max_shots) == (0.1, 100, 5000)
        assert s.learning_rate == 0.1 and s.max_iters == 300
        assert cfg["dataset"]["kind"] == "log"
        layout = cfg.layout()
        assert (layout.n_qubits, layout.n_layers) == (10, 3)

    def test_pes_learning_rate(self):
        assert parse_config(overrides=["dataset.kind=pes_synthetic"]).learning_rate == 0.01

    def test_explicit_learning_rate_wins(self):
        cfg = parse_config(overrides=["dataset.kind=pes_synthetic", "optimizer.learning_rate=0.05"])
        assert cfg.learning_rate == 0.05

    def test_pes_uses_three_features(self):
        assert parse_config(overrides=["dataset.kind=pes_synthetic"]).layout().n_features == 3

    def test_exact_mode(self):
        assert parse_config(overrides=["shots.mode=exact"]).settings(0).shot_policy is None


class TestValidation:
    def test_zero_qubits(self):
        with pytest.raises(ConfigError) as info:
            parse_config(overrides=["layout.n_qubits=0"])
        assert info.value.key == "layout.n_qubits"

    def test_unknown_top_level_key(self, tmp_path):
        with pytest.raises(ConfigError, match="learningrate"):
            parse_config(cfg_file(tmp_path, "learningrate: 0.1\n"))

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config(overrides=["optimizer.learningrate=0.1"])
        assert info.value.key == "optimizer.learningrate"

    def test_missing_dataset_path(self):
        with pytest.raises(ConfigError) as info:
            parse_config(overrides=["dataset.kind=pes"])
        assert info.value.key == "dataset.path"

    def test_nonexistent_dataset_path(self, tmp_path):
        with pytest.raises(ConfigError, match="dataset.path"):
            parse_config(overrides=["dataset.kind=pes", f"dataset.path={tmp_path / 'x.csv'}"])

    @pytest.mark.parametrize(
        "item, key",
        [
            ("regularization.v=1.5", "regularization.v"),
            ("regularization.a=0", "regularization.a"),
            ("regularization.mode=sometimes", "regularization.mode"),
            ("shots.min_shots=6000", "shots.min_shots"),
            ("shots.rsd_bound=-1", "shots.rsd_bound"),
            ("layout.entangling=ring", "layout.entangling"),
            ("layout.observable=transverse", "layout.observable"),
            ("layout.n_qubits=25", "layout.n_qubits"),
            ("optimizer.max_iters=ten", "optimizer.max_iters"),
            ("seeds=[]", "seeds"),
        ],
    )
    def test_invariant_violations_name_key(self, item, key):
        with pytest.raises(ConfigError) as info:
            parse_config(overrides=[item])
        assert info.value.key == key

    def test_bad_yaml(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(cfg_file(tmp_path, "layout: [unclosed\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "none.yaml")

    def test_override_needs_equals(self):
        with pytest.raises(ConfigError):
            parse_config(overrides=["layout.n_qubits"])


class TestLayering:
    def test_override_beats_file(self, tmp_path):
        cfg = parse_config(cfg_file(tmp_path, "layout: {n_qubits: 4}\n"), ["layout.n_qubits=6"])
        assert cfg.layout().n_qubits == 6

    def test_seed_list(self):
        assert parse_config(overrides=["seeds=[3, 1]"]).seeds == [3, 1]
        assert parse_config(overrides=["seed=7"]).seeds == [7]

    def test_output_dir_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
        assert parse_config().output_dir == tmp_path / "env"
        assert parse_config(overrides=[f"output_dir={tmp_path}"]).output_dir == tmp_path

    def test_echo_round_trip(self):
        cfg = parse_config(overrides=["layout.n_qubits=5", "regularization.mode=none"])
        again = parse_config(base=cfg.to_dict())
        assert again.data == cfg.to_dict()
