import configparser
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from src.configuration.solver_config import ExperimentConfig
from src.msr.io import format_cell

SOLVER_SECTIONS = ("gan", "em", "sif")
TOP_LEVEL_SECTIONS = ("data", "run", "sweep")
LIST_KEYS = ("snr", "sweep_values", "solvers", "pmf_centres", "pmf_widths", "pmf_weights")
NONE_VALUES = ("", "none", "null")


def _parse_value(key: str, raw: str) -> Any:
  raw = raw.strip()
  if key in LIST_KEYS:
    return [item.strip() for item in raw.split(",") if item.strip()]
  if raw.lower() in NONE_VALUES:
    return None
  # pydantic coerces the remaining strings to int / float / bool
  return raw


def assign_setting(target: Dict[str, Any], key: str, raw: str) -> None:
  section, dot, sub = key.partition(".")
  if dot and section in SOLVER_SECTIONS:
    target.setdefault(section, {})[sub] = _parse_value(sub, raw)
  else:
    target[key] = _parse_value(key, raw)


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
  """
  Flat `key = value` file with `[section]` headers. `[gan]`, `[em]` and `[sif]` fill the
  solver sub-configs; every other section merges into the top level. Dotted keys such as
  `gan.B` are accepted anywhere, so a `config.used` snapshot can be read back directly.
  """
  text = Path(path).read_text(encoding="utf-8")
  if not text.lstrip().startswith("["):
    text = "[run]\n" + text
  parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
  parser.optionxform = str  # keep key case (B, N)
  parser.read_string(text)

  values: Dict[str, Any] = {}
  for section in parser.sections():
    for key, raw in parser.items(section):
      if section in SOLVER_SECTIONS:
        values.setdefault(section, {})[key] = _parse_value(key, raw)
      else:
        assign_setting(values, key, raw)
  return values


def merge_overrides(base: Mapping[str, Any], overrides: Mapping[str, Any], skip_none: bool = True) -> Dict[str, Any]:
  """Later values win. With `skip_none`, None means "not given" (unset CLI flags)."""
  merged: Dict[str, Any] = {key: (dict(value) if isinstance(value, dict) else value) for key, value in base.items()}
  for key, value in overrides.items():
    if value is None and skip_none:
      continue
    if isinstance(value, dict):
      merged.setdefault(key, {}).update({k: v for k, v in value.items() if v is not None or not skip_none})
    else:
      merged[key] = value
  return merged


def load_experiment_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
  values = read_config_file(path) if path else {}
  return ExperimentConfig.from_dict(merge_overrides(values, overrides or {}))


def write_used_config(path: Union[str, Path], config: ExperimentConfig, extra: Optional[Mapping[str, Any]] = None) -> None:
  # extras (seed of this init, realized sigma, ...) are comments so the file still parses as a config
  lines = [f"# {key}={format_cell(value)}" for key, value in (extra or {}).items()]
  for key, value in config.to_flat_dict().items():
    if isinstance(value, (list, tuple)):
      value = ",".join(format_cell(v) for v in value)
    lines.append(f"{key}={format_cell(value)}")
  Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
