# test_config.py
import logging

import pytest

from channel_sim import YieldModel
from config import get_policy, reload_policy
from config_doctor import diagnose, emit_once
from decoy_core import equal_spacing_schedule, multimode_estimate
from decoy_errors import ConfigError, InvalidPulseCount, ModeCountOverflow
from experiment_config import config_from_dict, load_experiment_config
from gain_records import GainRecord


# ---------- numerics policy ----------

def test_policy_defaults():
    p = get_policy()
    assert p.float_exact_threshold == 8
    assert p.tensor_cap == 1_000_000
    assert p.golden_digits == 30
    assert p.log_level == "INFO"


def test_env_override(policy_env):
    p = policy_env(tensor_cap=8, log_level="debug")
    assert p.tensor_cap == 8
    assert p.log_level == "DEBUG"
    rec = GainRecord.from_values({(0.0, 0.0): 0.0})
    with pytest.raises(ModeCountOverflow):
        multimode_estimate(rec, equal_spacing_schedule(2), 2)


def test_env_override_bad_value(policy_env):
    with pytest.raises(ConfigError):
        policy_env(tensor_cap="lots")


def test_numerics_file_override(monkeypatch, tmp_path):
    f = tmp_path / "numerics.yaml"
    f.write_text("float_exact_threshold: 5\nworkers: 3\n", encoding="utf-8")
    monkeypatch.setenv("DECOY_NUMERICS_FILE", str(f))
    p = reload_policy()
    assert p.float_exact_threshold == 5
    assert p.workers == 3
    assert p.tensor_cap == 1_000_000


# ---------- experiment config ----------

def test_params_promotion_top_level_wins():
    cfg = config_from_dict({"params": {"L": 3, "seed": 4}, "seed": 9})
    assert cfg.L == 3
    assert cfg.seed == 9
    assert cfg.resolve_schedule().L == 3


def test_integral_floats_accepted_for_counts():
    cfg = config_from_dict({"L": 2, "pulses": 1e6})
    assert cfg.pulses == 1_000_000
    assert isinstance(cfg.pulses, int)


@pytest.mark.parametrize("doc", [
    {"L": 2, "colour": "blue"},
    {"L": 2, "pulses": True},
    {"L": "two"},
    {"L": 2, "pulses": 10, "budget": 100},
    {"L": 2, "seed": -1},
    {"L": 2, "arithmetic_mode": "decimal"},
    {"L": 2, "delta_model": "guess"},
    {"L": 2, "model": {"kind": "loss_dark", "eta": 2.0}},
    {"L": 2, "source": "thermal"},
    {"params": [1, 2]},
])
def test_invalid_configs(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_invalid_pulse_count():
    with pytest.raises(InvalidPulseCount):
        config_from_dict({"L": 2, "pulses": 0})


def test_single_mode_model_is_replicated():
    cfg = config_from_dict({"L": 1, "modes": 3, "model": {"kind": "loss_dark", "eta": 0.2, "y0": 0.0}})
    model = cfg.yield_model()
    assert model.mode_count == 3
    assert model.components == (YieldModel.loss_dark(0.2, 0.0),) * 3


def test_model_mode_mismatch():
    with pytest.raises(ConfigError):
        config_from_dict({"L": 1, "modes": 3, "model": {"kind": "ideal_coincidence", "modes": 2}})


def test_load_config_file_and_overrides(tmp_path):
    f = tmp_path / "run.json"
    f.write_text('{"schedule": [0.5, 1.0], "seed": 1}', encoding="utf-8")
    cfg = load_experiment_config(str(f), {"seed": 5, "pulses": None})
    assert cfg.seed == 5
    assert cfg.pulses is None
    assert [float(x) for x in cfg.resolve_schedule().intensities] == [0.0, 0.5, 1.0]
    with pytest.raises(ConfigError):
        load_experiment_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_experiment_config(str(bad))


def test_term_models_follow_config():
    cfg = config_from_dict({"schedule": [0.5, 1.0], "delta_model": "exact"})
    assert cfg.term_model("delta").kind == "exact"
    assert cfg.term_model("delta").schedule.L == 2
    assert cfg.term_model("f").kind == "fitted"
    assert cfg.term_model("f", default="exact").schedule.L == 2
    assert cfg.term_model("delta", default="fitted").kind == "exact"


# ---------- doctor ----------

def test_doctor_clean_config():
    r = diagnose(config_from_dict({"L": 2, "pulses": 100_000, "seed": 1}))
    assert r.ok
    assert r.warnings == []


def test_doctor_flags_risky_settings():
    r = diagnose(config_from_dict({"L": 10, "pulses": 100}))
    assert not r.ok
    text = " ".join(r.warnings)
    assert "float mode with L=10" in text
    assert "100 pulses per setting" in text
    assert "without a seed" in text
    assert len(r.hints) == len(r.warnings)


def test_doctor_flags_large_tensor_and_contradicting_flags():
    r = diagnose(config_from_dict({"L": 9, "modes": 6, "exact_gains": True, "pulses": 5000}))
    text = " ".join(r.warnings)
    assert "gain tensor has 1000000 settings" in text
    assert "exact_gains set together" in text


def test_emit_once_logs_one_line(caplog):
    with caplog.at_level(logging.INFO, logger="decoy_cli"):
        emit_once(config_from_dict({"L": 2, "pulses": 100_000, "seed": 1}))
        emit_once(config_from_dict({"L": 2, "pulses": 10}))
    msgs = [r.getMessage() for r in caplog.records if r.name == "decoy_cli"]
    assert msgs[0] == "[CONFIG] PASS"
    assert msgs[1].startswith("[CONFIG] WARN 2")


def test_emit_once_truncates_and_logs_hints(caplog):
    cfg = config_from_dict({"L": 10, "pulses": 10})
    with caplog.at_level(logging.DEBUG, logger="decoy_cli"):
        r = emit_once(cfg, limit=1)
    msgs = [rec.getMessage() for rec in caplog.records if rec.name == "decoy_cli"]
    assert msgs[0] == f"[CONFIG] WARN {len(r.warnings)} — {r.warnings[0]} (+{len(r.warnings) - 1} more)"
    assert [m for m in msgs if m.startswith("[CONFIG] hint: ")] == [f"[CONFIG] hint: {h}" for h in r.hints]
