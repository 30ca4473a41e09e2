"""
Experiment orchestration behind the CLI verbs.

Run directory layout:
  <out>/config.used, measurements.txt (+ .loc), x_true.dat, p_true.dat, summary.csv
  <out>/init_XXX/config.used, history.csv, x_hat.dat, p_hat.dat, eval.csv
Sweeps nest one such directory per solver under `point_<axis>_<value>/`.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.configuration.config_file import write_used_config
from src.configuration.log import get_logger, log_fields
from src.configuration.solver_config import ExperimentConfig
from src.msr.exceptions import ArgumentError, SolverAbortError
from src.msr.forward_model import clean_variance, realized_snr, sigma_from_snr, synthesize
from src.msr.io import FLOAT_FORMAT, format_float, read_measurements, read_xy, write_measurements, write_rows, write_xy
from src.msr.metrics import evaluate, median_rel_error, success_rate
from src.msr.rng import named_stream
from src.msr.signals import load_pmf, load_signal, make_pmf, make_signal
from src.msr.solvers.solver_factory import create_solver
from src.msr.types import MeasurementSet, SegmentPmf, Signal
from src.pydantic_classes import EvalReport, InitResult

logger = get_logger()

SUMMARY_COLUMNS = ["init", "rel_error", "tv", "wallclock_s"]
SWEEP_COLUMNS = ["axis", "value", "solver", "success_rate", "median_rel_error", "median_tv"]
EVAL_HEADER = ("rel_error", "tv", "aligning_shift_x", "aligning_shift_p", "tv_joint")
DONE_MARKER = "DONE"


@dataclass
class Dataset:
  measurements: MeasurementSet
  x_true: Optional[Signal] = None
  p_true: Optional[SegmentPmf] = None
  path: Optional[Path] = None
  x_path: Optional[Path] = None
  p_path: Optional[Path] = None

  @property
  def ground_truth(self) -> Optional[Tuple[Signal, SegmentPmf]]:
    if self.x_true is None or self.p_true is None:
      return None
    return self.x_true, self.p_true


@dataclass
class SolveOutcome:
  run_dir: Path
  results: List[InitResult]

  @property
  def all_aborted(self) -> bool:
    return all(result.aborted for result in self.results)


def build_dataset(config: ExperimentConfig) -> Dataset:
  """Read the measurement file named in the config, or synthesize one from the signal and PMF specs."""
  if config.measurements:
    measurements = read_measurements(config.measurements)
    x_true = load_signal(config.x_true, measurements.d) if config.x_true else None
    p_true = load_pmf(config.p_true, measurements.d) if config.p_true else None
    return Dataset(
      measurements,
      x_true,
      p_true,
      path=Path(config.measurements),
      x_path=Path(config.x_true) if config.x_true else None,
      p_path=Path(config.p_true) if config.p_true else None,
    )

  x_true, p_true = make_signal(config), make_pmf(config)
  if config.sigma is not None:
    sigma = config.sigma
    snr = clean_variance(x_true, p_true, config.m) / sigma**2 if sigma > 0 else math.inf
  else:
    snr = config.snr[0]
    sigma = sigma_from_snr(x_true, p_true, config.m, snr)
  measurements = synthesize(x_true, p_true, config.m, sigma, config.N, config.seed, snr=snr)
  return Dataset(measurements, x_true, p_true)


def write_dataset(dataset: Dataset, out_dir: Path) -> Dataset:
  out_dir.mkdir(parents=True, exist_ok=True)
  dataset.path = write_measurements(out_dir / "measurements.txt", dataset.measurements)
  if dataset.x_true is not None:
    dataset.x_path = out_dir / "x_true.dat"
    write_xy(dataset.x_path, dataset.x_true.values)
  if dataset.p_true is not None:
    dataset.p_path = out_dir / "p_true.dat"
    write_xy(dataset.p_path, dataset.p_true.probs)
  return dataset


def generate(config: ExperimentConfig) -> Dict[str, Any]:
  """Synthesize a dataset into `config.out` and report its realized SNR."""
  if config.measurements:
    raise ArgumentError("generate synthesizes its own measurements; drop the measurements option")
  out_dir = Path(config.out)
  dataset = write_dataset(build_dataset(config), out_dir)
  write_used_config(out_dir / "config.used", config)
  snr = realized_snr(dataset.measurements, dataset.x_true)
  logger.info("Generated dataset", extra=log_fields({"path": dataset.path, "sigma": dataset.measurements.sigma, "realized_snr": snr}))
  return {"path": dataset.path, "sigma": dataset.measurements.sigma, "realized_snr": snr}


def initial_guess(d: int, seed: int, x_init_std: float = 1.0) -> Tuple[Signal, SegmentPmf]:
  """Shared by every solver so that one init index starts all of them from the same (x, p)."""
  return Signal(named_stream(seed, "init").normal(0.0, x_init_std, d)), SegmentPmf.uniform(d)


def _init_config(config: ExperimentConfig, dataset: Dataset, seed: int) -> ExperimentConfig:
  # a single-init config pointing at the stored dataset re-runs this init exactly
  return config.model_copy(
    update={
      "seed": seed,
      "n_inits": 1,
      "threads": 1,
      "measurements": str(dataset.path) if dataset.path else None,
      "x_true": str(dataset.x_path) if dataset.x_path else None,
      "p_true": str(dataset.p_path) if dataset.p_path else None,
    }
  )


def write_eval(path: Path, report: EvalReport) -> None:
  write_rows(path, EVAL_HEADER, [tuple(report.model_dump()[key] for key in EVAL_HEADER)])


def run_init(config: ExperimentConfig, dataset: Dataset, init: int, run_dir: Path) -> InitResult:
  seed = config.seed + init
  init_dir = run_dir / f"init_{init:03d}"
  init_dir.mkdir(parents=True, exist_ok=True)
  extra = {"init": init, "sigma": dataset.measurements.sigma}
  write_used_config(init_dir / "config.used", _init_config(config, dataset, seed), extra=extra)

  measurements = dataset.measurements
  x0, p0 = initial_guess(measurements.d, seed, config.gan.x_init_std)
  solver_config = getattr(config, config.solver).model_copy(update={"seed": seed})
  fixed_pmf = dataset.p_true if config.solver == "gan" and config.gan.mode == "known-pmf" else None

  start = time.perf_counter()
  try:
    solver = create_solver(config.solver, solver_config, measurements, dataset.ground_truth, fixed_pmf)
    result = solver.solve(x0, p0)
  except SolverAbortError as e:
    logger.error(f"Init {init} aborted: {e}", extra=log_fields({"init": init, "seed": seed, "solver": config.solver}))
    return InitResult(init=init, seed=seed, wallclock_s=time.perf_counter() - start, aborted=True)
  wallclock = time.perf_counter() - start
  solver.save(result, init_dir)

  rel, tv = float("nan"), float("nan")
  if dataset.ground_truth is not None:
    report = evaluate(dataset.x_true, dataset.p_true, result.x_hat, result.p_hat)
    write_eval(init_dir / "eval.csv", report)
    rel, tv = report.rel_error, report.tv
  logger.info(
    f"Init {init} finished in {wallclock:.2f} seconds",
    extra=log_fields({"init": init, "seed": seed, "solver": config.solver, "rel_error": rel, "tv": tv}),
  )
  return InitResult(init=init, seed=seed, rel_error=rel, tv=tv, wallclock_s=wallclock)


def write_summary(path: Path, results: List[InitResult]) -> pd.DataFrame:
  frame = pd.DataFrame([result.model_dump() for result in results], columns=SUMMARY_COLUMNS)
  frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="NaN")
  return frame


def solve(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> SolveOutcome:
  """
  Run `n_inits` independent initializations with seeds seed+0 .. seed+n_inits-1. An init that
  aborts is logged and kept as a NaN row.
  """
  run_dir = Path(config.out)
  run_dir.mkdir(parents=True, exist_ok=True)
  if dataset is None:
    dataset = build_dataset(config)
    if dataset.path is None:
      write_dataset(dataset, run_dir)
  write_used_config(run_dir / "config.used", config)

  logger.info(
    f"Solving with {config.solver}",
    extra=log_fields({"n_inits": config.n_inits, "threads": config.threads, "run_dir": run_dir, "seed": config.seed}),
  )
  inits = range(config.n_inits)
  if config.threads > 1:
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
      results = list(pool.map(lambda i: run_init(config, dataset, i, run_dir), inits))
  else:
    results = [run_init(config, dataset, i, run_dir) for i in inits]

  write_summary(run_dir / "summary.csv", results)
  return SolveOutcome(run_dir, results)


def _point_config(config: ExperimentConfig, axis: str, value: float, point_dir: Path) -> ExperimentConfig:
  data = config.model_dump(by_alias=True)
  data.update(measurements=None, x_true=None, p_true=None, out=str(point_dir))
  if axis == "m":
    data["m"] = int(value)
  else:
    data["snr"] = [float(value)]
    data["sigma"] = None
  return ExperimentConfig.from_dict(data)


def point_key(axis: str, value: float) -> str:
  return f"point_{axis}_{int(value)}" if axis == "m" else f"point_{axis}_{format_float(value)}"


def _drop_rows(sweep_csv: Path, value: float) -> None:
  # rows of a point that was interrupted before its DONE marker
  if not sweep_csv.exists():
    return
  frame = pd.read_csv(sweep_csv)
  kept = frame[frame["value"] != value]
  if len(kept) != len(frame):
    kept.to_csv(sweep_csv, index=False, float_format=FLOAT_FORMAT, na_rep="NaN")


def _append_rows(sweep_csv: Path, rows: List[Dict[str, Any]]) -> None:
  frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
  frame.to_csv(sweep_csv, mode="a", header=not sweep_csv.exists(), index=False, float_format=FLOAT_FORMAT, na_rep="NaN")


def write_curves(sweep_csv: Path, axis: str, out_dir: Path) -> List[Path]:
  """Success rate against m, or median rel-error against log10(SNR), one `.dat` per solver."""
  frame = pd.read_csv(sweep_csv)
  paths = []
  for solver, rows in frame.groupby("solver", sort=True):
    rows = rows.sort_values("value")
    if axis == "m":
      path = out_dir / f"success_{solver}.dat"
      write_xy(path, rows["success_rate"], rows["value"].astype(int).tolist())
    else:
      path = out_dir / f"median_{solver}.dat"
      write_xy(path, rows["median_rel_error"], np.log10(rows["value"].to_numpy()).tolist())
    paths.append(path)
  return paths


def sweep(config: ExperimentConfig) -> Path:
  """
  Every solver runs on the same dataset and the same initial guesses at each point. Finished
  points carry a DONE marker and are skipped when the sweep is resumed.
  """
  sweep_dir = Path(config.out)
  sweep_dir.mkdir(parents=True, exist_ok=True)
  axis = config.sweep_axis
  values = config.sweep_values or ([config.m] if axis == "m" else list(config.snr))
  if axis == "m" and any(v != int(v) for v in values):
    raise ArgumentError(f"m sweep values must be integers, got {values}")
  write_used_config(sweep_dir / "config.used", config)
  sweep_csv = sweep_dir / "sweep.csv"

  for value in values:
    point_dir = sweep_dir / point_key(axis, value)
    if (point_dir / DONE_MARKER).exists():
      logger.info(f"Skipping finished sweep point {point_dir.name}")
      continue
    _drop_rows(sweep_csv, value)
    point_config = _point_config(config, axis, value, point_dir)
    dataset = write_dataset(build_dataset(point_config), point_dir)

    rows = []
    for solver in config.solvers:
      solver_config = point_config.model_copy(update={"solver": solver, "out": str(point_dir / solver)})
      outcome = solve(solver_config, dataset)
      rel_errors = [result.rel_error for result in outcome.results]
      rows.append(
        {
          "axis": axis,
          "value": value,
          "solver": solver,
          "success_rate": success_rate(rel_errors),
          "median_rel_error": median_rel_error(rel_errors),
          "median_tv": median_rel_error([result.tv for result in outcome.results]),
        }
      )
    _append_rows(sweep_csv, rows)
    (point_dir / DONE_MARKER).write_text("", encoding="utf-8")
    logger.info(f"Finished sweep point {point_dir.name}", extra=log_fields({"axis": axis, "value": value}))

  write_curves(sweep_csv, axis, sweep_dir)
  return sweep_dir


def evaluate_run(run_dir: str, x_true_path: str, p_true_path: str) -> List[Tuple[Path, EvalReport]]:
  """
  Evaluate `x_hat.dat`/`p_hat.dat` in `run_dir`, or in each of its `init_*` subdirectories,
  and write `eval.csv` next to them.
  """
  root = Path(run_dir)
  if not root.is_dir():
    raise FileNotFoundError(f"run directory not found: {root}")
  x_true = Signal(read_xy(x_true_path))
  p_true = load_pmf(p_true_path, x_true.d)

  candidates = [root] if (root / "x_hat.dat").exists() else sorted(root.glob("init_*"))
  reports = []
  for directory in candidates:
    if not (directory / "x_hat.dat").exists():
      logger.warning(f"No estimate in {directory}, skipping")
      continue
    report = evaluate(x_true, p_true, load_signal(str(directory / "x_hat.dat"), x_true.d), load_pmf(str(directory / "p_hat.dat"), x_true.d))
    write_eval(directory / "eval.csv", report)
    reports.append((directory, report))
  if not reports:
    raise FileNotFoundError(f"no x_hat.dat found in {root} or its init_* directories")
  return reports
