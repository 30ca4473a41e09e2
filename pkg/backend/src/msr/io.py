import configparser
import math
from itertools import takewhile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.configuration.log import get_logger
from src.msr.exceptions import ArgumentError
from src.msr.types import MeasurementSet

logger = get_logger()

PathLike = Union[str, Path]
MEASUREMENT_KEYS = ("d", "m", "N", "sigma", "seed", "snr")
# 17 significant digits round-trip exactly through float()
FLOAT_FORMAT = "%.17g"


def format_float(value: float) -> str:
  return FLOAT_FORMAT % float(value)


def format_cell(value: Any) -> str:
  """CSV cell: empty for missing diagnostics, exact text for floats."""
  if value is None:
    return ""
  if isinstance(value, (float, np.floating)):
    return "" if math.isnan(value) else format_float(value)
  return str(value)


def _read_header(path: Path) -> List[str]:
  with path.open(encoding="utf-8") as f:
    return [line.lstrip("#").strip() for line in takewhile(lambda line: line.startswith("#"), f)]


def write_key_values(path: PathLike, values: Mapping[str, Any]) -> None:
  lines = [f"{key}={format_cell(value)}" for key, value in values.items()]
  Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_key_values(path: PathLike) -> Dict[str, str]:
  parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
  parser.optionxform = str
  try:
    parser.read_string("[values]\n" + Path(path).read_text(encoding="utf-8"))
  except configparser.Error as e:
    raise ArgumentError(f"{path}: expected key=value lines ({e})") from e
  return dict(parser["values"])


def write_matrix(path: PathLike, matrix: np.ndarray) -> None:
  matrix = np.atleast_2d(matrix)
  np.savetxt(path, matrix, fmt=FLOAT_FORMAT, delimiter=",", header=f"{matrix.shape[0]},{matrix.shape[1]}", comments="# ")


def read_matrix(path: PathLike) -> np.ndarray:
  path = Path(path)
  header = _read_header(path)
  if not header:
    raise ArgumentError(f"{path}: missing '# rows,cols' header")
  n_rows, n_cols = (int(v) for v in header[0].split(","))
  matrix = np.loadtxt(path, comments="#", delimiter=",", ndmin=2)
  if matrix.shape != (n_rows, n_cols):
    raise ArgumentError(f"{path}: header says {n_rows}x{n_cols}, found {matrix.shape}")
  return matrix


def location_path(path: PathLike) -> Path:
  path = Path(path)
  return path.with_name(path.stem + ".loc")


def write_measurements(path: PathLike, measurements: MeasurementSet, with_locations: bool = True) -> Path:
  """
  Write a measurement file: `# key=value` header lines, then N rows of m comma-separated floats.
  True locations (when present) go to the `<name>.loc` sidecar.
  """
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  header = {
    "d": measurements.d,
    "m": measurements.m,
    "N": measurements.N,
    "sigma": measurements.sigma,
    "seed": measurements.seed,
    "snr": measurements.snr,
  }
  header_text = "\n".join(f"{key}={format_cell(value)}" for key, value in header.items())
  np.savetxt(path, measurements.data, fmt=FLOAT_FORMAT, delimiter=",", header=header_text, comments="# ")
  if with_locations and measurements.has_locations:
    np.savetxt(location_path(path), measurements.diagnostic_locations(), fmt="%d")
  logger.info(f"Wrote {measurements.N} measurements to {path}")
  return path


def read_measurements(path: PathLike, with_locations: bool = False) -> MeasurementSet:
  """
  Read a measurement file. The `.loc` sidecar is only loaded when asked for (diagnostics).
  """
  path = Path(path)
  logger.info(f"Reading measurement file {path} ...")
  header = dict(line.partition("=")[::2] for line in _read_header(path))
  missing = [key for key in MEASUREMENT_KEYS if key not in header]
  if missing:
    raise ArgumentError(f"{path}: header is missing {', '.join(missing)}")

  data = np.loadtxt(path, comments="#", delimiter=",", ndmin=2)
  if data.shape != (int(header["N"]), int(header["m"])):
    raise ArgumentError(f"{path}: header declares {header['N']}x{header['m']} but the file holds {data.shape}")

  locations: Optional[np.ndarray] = None
  sidecar = location_path(path)
  if with_locations and sidecar.exists():
    locations = np.loadtxt(sidecar, dtype=np.int64, ndmin=1)

  return MeasurementSet(
    data=data,
    d=int(header["d"]),
    sigma=float(header["sigma"]),
    seed=int(header["seed"]),
    snr=float(header["snr"]),
    _true_locations=locations,
  )


def write_xy(path: PathLike, y: Iterable[float], x: Optional[Sequence[float]] = None) -> None:
  """Two-column `x,y` plot file; x defaults to 1-based indices."""
  y = np.asarray(list(y), dtype=np.float64)
  x = np.arange(1, y.size + 1) if x is None else np.asarray(x, dtype=np.float64)
  np.savetxt(path, np.column_stack([x, y]), fmt=FLOAT_FORMAT, delimiter=",", header="x,y", comments="")


def read_xy(path: PathLike) -> np.ndarray:
  """Return the y column of a two-column `x,y` file."""
  path = Path(path)
  with path.open(encoding="utf-8") as f:
    first = f.readline().strip()
  if first != "x,y":
    raise ArgumentError(f"{path}: expected an 'x,y' header")
  return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)[:, 1]


def write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
  """CSV table; None and NaN cells are left blank."""
  frame = pd.DataFrame(list(rows), columns=list(header))
  frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
