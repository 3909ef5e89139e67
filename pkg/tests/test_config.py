import json

import pytest

from config import (
    apply_overrides,
    build_run_config,
    config_hash,
    config_reference_markdown,
    load_run_config,
    save_run_config,
)
from core.errors import ConfigurationError
from core.models import RunConfig
from tunneling.model import RampShape, barrier_suppression_field


def test_defaults():
    cfg = RunConfig()
    assert cfg.grid.L == 200.0
    assert cfg.grid.N == 4096
    assert cfg.system.alphas == [1.2, 1.4, 1.6, 1.8]
    assert cfg.system.Ip_target == 0.67
    assert cfg.field.F0_list == [0.04, 0.05, 0.06, 0.07]
    assert cfg.field.ramp_shape == RampShape.SIN2
    assert cfg.field.T_ramp == 20.0
    assert cfg.propagation.dt == 0.01
    assert cfg.propagation.dtau == 0.005
    assert cfg.mask.eta == 5.0 and cfg.mask.m == 4.0
    assert cfg.x_cap == pytest.approx(160.0)
    assert cfg.rates.rate_floor == 1e-12
    assert cfg.calibration.tol_Ip == 1e-4
    assert cfg.protocol == "A"
    assert cfg.field.curve_F0_list[0] == 0.03 and cfg.field.curve_F0_list[-1] == 0.1


@pytest.mark.parametrize(
    "data",
    [
        {"grid": {"N": 4095}},
        {"grid": {"L": 100.0}, "mask": {"x_cap": 100.0}},
        {"protocol": "B", "system": {"Ip_target": None}},
        {"protocol": "A", "system": {"a": None}},
        {"system": {"alphas": [1.0]}},
        {"system": {"alphas": [2.1]}},
        {"system": {"alphas": [1.5, 1.5]}},
        {"system": {"alphas": []}},
        {"field": {"F0_list": [0.05, -0.01]}},
        {"field": {"F0_list": [0.05, 0.05]}},
        {"field": {"ramp_shape": "cosine"}},
        {"propagation": {"T_min": 5000.0, "T_max": 1000.0}},
        {"mask": {"m": 1.0}},
        {"calibration": {"expansion_factor": 1.0}},
        {"protocol": "C"},
        {"grid": {"dx": 0.1}},
        {"unknown_section": {}},
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigurationError):
        build_run_config(data)


def test_protocol_b_without_fixed_softening_is_valid():
    cfg = build_run_config({"protocol": "B", "system": {"a": None, "Ip_target": 0.5}})
    assert cfg.system.a is None


def test_apply_overrides_sets_nested_keys_and_skips_none():
    merged = apply_overrides({"grid": {"L": 50.0}}, {"grid.N": 1024, "propagation.dt": 0.02, "mask.x_cap": None})
    assert merged == {"grid": {"L": 50.0, "N": 1024}, "propagation": {"dt": 0.02}}


def test_apply_overrides_does_not_mutate_input():
    data = {"grid": {"L": 50.0}}
    apply_overrides(data, {"grid.L": 80.0})
    assert data == {"grid": {"L": 50.0}}


def test_apply_overrides_rejects_non_section():
    with pytest.raises(ConfigurationError):
        apply_overrides({"protocol": "A"}, {"protocol.value": "B"})


def test_load_and_save_round_trip(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"grid": {"L": 120.0, "N": 2048}, "system": {"alphas": [1.5, 2.0]}}), encoding="utf-8")
    cfg = load_run_config(path, {"field.F0_list": [0.05, 0.06, 0.07]})
    assert cfg.grid.N == 2048
    assert cfg.field.F0_list == [0.05, 0.06, 0.07]

    saved = save_run_config(cfg, tmp_path / "nested" / "saved.json")
    assert load_run_config(saved) == cfg
    assert not (tmp_path / "nested" / "saved.json.tmp").exists()


def test_load_without_path_gives_defaults():
    assert load_run_config() == RunConfig()


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("  \n", encoding="utf-8")
    assert load_run_config(path) == RunConfig()


@pytest.mark.parametrize("content", ["{not json", "[1, 2, 3]"])
def test_malformed_files(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_run_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_run_config(tmp_path / "missing.json")


def test_hash_ignores_execution_only_fields():
    base = RunConfig()
    moved = build_run_config({"out_dir": "elsewhere", "workers": 3})
    assert config_hash(base) == config_hash(moved)
    assert len(config_hash(base)) == 16


def test_hash_tracks_physics_fields():
    assert config_hash(RunConfig()) != config_hash(build_run_config({"grid": {"N": 8192}}))
    assert config_hash(RunConfig()) != config_hash(build_run_config({"mask": {"eta": 10.0}}))


def test_config_reference_lists_every_field():
    text = config_reference_markdown()
    for name in ("grid.N", "system.alphas", "field.F_ref", "propagation.T_max", "mask.x_cap", "rates.x_c", "calibration.tol_Ip"):
        assert f"`{name}`" in text
    assert "`protocol`" in text
    assert "| `mask.eta` | `float` | `5.0` |" in text


def test_default_fields_stay_below_barrier_suppression():
    cfg = RunConfig()
    limit = barrier_suppression_field(cfg.system.Ip_target, cfg.system.Z)
    assert all(F0 < limit for F0 in cfg.field.F0_list)
