"""
Pipeline configuration: defaults, overrides and validation.
"""
import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from utils.config.run_config import (
    DETECTOR_KINDS,
    RUN_JSON_KEYS,
    CorpusSpec,
    PipelineConfig,
    TrainConfig,
    attack_defaults,
    detector_defaults,
    load_pipeline_config,
)

DESK_CONFIG = Path(__file__).resolve().parent.parent / "config" / "desk_config.json"


def test_defaults_follow_the_training_schedules():
    det, att = detector_defaults(), attack_defaults()
    assert (det.lr, det.epochs, det.lr_half_every, det.batch) == (5e-4, 20, 4, 32)
    assert (att.lr, att.epochs, att.lr_half_every, att.batch, att.alpha) == (1e-4, 32, None, 16, 20.0)
    assert att.final_relu


def test_desk_config_loads():
    cfg = load_pipeline_config(str(DESK_CONFIG))
    assert cfg.archs == list(DETECTOR_KINDS)
    assert cfg.corpus.d_real == 4000 and cfg.corpus.probe_size == 128
    assert cfg.eval.alpha_grid[0] == 1 and cfg.eval.alpha_grid[-1] == 200
    assert cfg.workers == 4


def test_seed_and_precision_propagate():
    cfg = load_pipeline_config(None, {"seed": 11, "precision": "float64", "corpus_dir": "c"})
    assert cfg.corpus.master_seed == 11
    assert cfg.detector.seed == cfg.attack.seed == 11
    assert cfg.attack.precision == "float64" and cfg.detector.corpus_dir == "c"


def test_overrides_win_over_the_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"attack": {"alpha": 5.0, "epochs": 2}}))
    cfg = load_pipeline_config(str(path), {"attack.alpha": 60.0, "attack.batch": None})
    assert cfg.attack.alpha == 60.0
    assert cfg.attack.epochs == 2
    assert cfg.attack.batch == 16
    assert cfg.attack.lr == 1e-4


def test_missing_or_malformed_config(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_pipeline_config(str(tmp_path / "nope.json"))
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(ValueError):
        load_pipeline_config(str(tmp_path / "list.json"))
    (tmp_path / "extra.json").write_text(json.dumps({"learning_rate": 1}))
    with pytest.raises(ValidationError):
        load_pipeline_config(str(tmp_path / "extra.json"))


def test_unknown_detector_kind():
    with pytest.raises(ValidationError):
        PipelineConfig(archs=["plainnet", "xception"])
    with pytest.raises(ValidationError):
        PipelineConfig(always_exclude=["vgg"])


def test_ensemble_weights():
    cfg = attack_defaults(ensemble=["a", "b", "c"], victim="d")
    assert cfg.beta == pytest.approx([1 / 3] * 3)
    assert cfg.scenario == "zero-knowledge"
    assert attack_defaults(victim="a").scenario == "white-box"
    for bad in ([0.5, 0.5], [0.5, 0.6, -0.1], [0.2, 0.2, 0.2]):
        with pytest.raises(ValidationError):
            attack_defaults(ensemble=["a", "b", "c"], beta=bad)
    with pytest.raises(ValidationError):
        attack_defaults(ensemble=["a", "b"], victim="a")
    with pytest.raises(ValidationError):
        attack_defaults(ensemble=["a", "a"])
    with pytest.raises(ValidationError):
        attack_defaults(beta=[1.0])


@pytest.mark.parametrize("field,value", [("lr", 0.0), ("epochs", 0), ("batch", 0), ("alpha", -1.0)])
def test_train_config_ranges(field, value):
    with pytest.raises(ValidationError):
        attack_defaults(**{field: value})


def test_corpus_spec_needs_even_sizes():
    with pytest.raises(ValidationError):
        CorpusSpec(probe_size=127)


def test_run_json_has_the_documented_keys():
    run = TrainConfig(stage="attack", lr=1e-4, epochs=1, batch=2, victim="plainnet").run_json()
    assert tuple(run) == RUN_JSON_KEYS
    assert run["victim"] == "plainnet"
