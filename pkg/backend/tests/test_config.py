import copy
import json
import logging
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from src.configuration.config_file import load_experiment_config, merge_overrides, read_config_file, write_used_config
from src.configuration.log import JsonFormatter, get_logger, log_fields
from src.configuration.solver_config import AVAILABLE_PRESETS, ExperimentConfig, GanConfig, SifConfig


class TestConfigFile:
  def test_sections_fill_solver_configs(self, tmp_path):
    path = tmp_path / "experiment.ini"
    path.write_text("[data]\nd = 12\nm = 4\nsnr = 1, 10, inf\n\n[gan]\nB = 16\nlambda = 5\n\n[em]\nmax_iters = 40\n")
    config = load_experiment_config(path)
    assert (config.d, config.m) == (12, 4)
    assert config.snr == [1.0, 10.0, math.inf]
    assert config.gan.B == 16 and config.gan.lam == 5.0
    assert config.em.max_iters == 40

  def test_sectionless_file_with_dotted_keys(self, tmp_path):
    path = tmp_path / "short.ini"
    path.write_text("d = 8\nm = 8\ngan.tau = 0.3\nsigma = none\n")
    values = read_config_file(path)
    assert values == {"d": "8", "m": "8", "gan": {"tau": "0.3"}, "sigma": None}
    assert load_experiment_config(path).gan.tau == 0.3

  def test_used_config_reads_back(self, tmp_path):
    config = ExperimentConfig.from_dict(copy.deepcopy(AVAILABLE_PRESETS["snr-sweep"]))
    write_used_config(tmp_path / "config.used", config, extra={"init": 3, "sigma": 0.25})
    text = (tmp_path / "config.used").read_text()
    assert text.startswith("# init=3\n# sigma=0.25\n")
    assert "gan.lambda=10" in text
    assert load_experiment_config(tmp_path / "config.used").model_dump() == config.model_dump()

  def test_overrides_win(self, tmp_path):
    path = tmp_path / "experiment.ini"
    path.write_text("m = 30\nd = 60\n")
    config = load_experiment_config(path, overrides={"m": 25, "d": None})
    assert (config.m, config.d) == (25, 60)

  def test_merge_keeps_explicit_none_when_asked(self):
    base = {"sigma": 0.1, "gan": {"sigma": 0.2, "B": 10}}
    assert merge_overrides(base, {"sigma": None, "gan": {"sigma": None}}) == base
    merged = merge_overrides(base, {"sigma": None, "gan": {"sigma": None}}, skip_none=False)
    assert merged == {"sigma": None, "gan": {"sigma": None, "B": 10}}


class TestValidation:
  @pytest.mark.parametrize("name", sorted(AVAILABLE_PRESETS))
  def test_presets_validate(self, name):
    config = ExperimentConfig.from_dict(copy.deepcopy(AVAILABLE_PRESETS[name]))
    assert config.m <= config.d

  def test_sweep_presets(self):
    segment = ExperimentConfig.from_dict(copy.deepcopy(AVAILABLE_PRESETS["m-sweep"]))
    assert segment.sweep_values == [15, 20, 25, 30, 35, 40, 45, 50, 55]
    assert segment.sigma == 0.01 and segment.gan.ell == 300
    snr = ExperimentConfig.from_dict(copy.deepcopy(AVAILABLE_PRESETS["snr-sweep"]))
    assert len(snr.sweep_values) == 6 and snr.m == 18
    assert snr.gan.total_iters == 50_000

  def test_critic_width_must_be_even(self):
    with pytest.raises(ValidationError):
      GanConfig(ell=7)

  def test_lambda_alias(self):
    assert GanConfig.model_validate({"lambda": 3.0}).lam == 3.0
    assert GanConfig(lam=2.0).lam == 2.0
    assert GanConfig().model_dump(by_alias=True)["lambda"] == 10.0

  def test_unknown_keys_are_rejected(self):
    with pytest.raises(ValidationError):
      GanConfig.model_validate({"batch": 4})

  @pytest.mark.parametrize(
    "values",
    [
      {"d": 10, "m": 11},
      {"snr": [0.0]},
      {"snr": []},
      {"signal": "from-file"},
      {"pmf": "one-hot", "pmf_index": 60},
    ],
  )
  def test_inconsistent_experiments(self, values):
    with pytest.raises(ValidationError):
      ExperimentConfig.from_dict(values)

  def test_moment_weights_default_to_segment_length(self):
    assert SifConfig().weights(4) == (1.0, 0.25, 0.0625)
    assert SifConfig(w2=2.0).weights(4) == (1.0, 2.0, 0.0625)


class TestLogging:
  def test_structured_fields_land_in_the_json_record(self):
    record = logging.LogRecord("msr-gan", logging.INFO, __file__, 10, "Init %d finished", (3,), None)
    record.__dict__.update(log_fields({"rel_error": np.float64(0.25), "path": Path("runs/a")}))
    payload = json.loads(JsonFormatter().format(record))
    assert payload["message"] == "Init 3 finished"
    assert payload["rel_error"] == 0.25
    assert payload["path"] == "runs/a"

  def test_one_handler_however_often_it_is_fetched(self):
    assert get_logger() is get_logger()
    assert len(get_logger().handlers) == 1
