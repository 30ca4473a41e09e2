from typing import Sequence, Tuple

import numpy as np

from src.msr.exceptions import ArgumentError
from src.msr.forward_model import clean_variance
from src.msr.types import MeasurementSet, SegmentPmf, Signal
from src.pydantic_classes import EvalReport

SUCCESS_THRESHOLD = 0.02
SIMPLEX_TOL = 1e-6


def _all_shifts(v: np.ndarray) -> np.ndarray:
  """Row s holds R_s v = np.roll(v, s)."""
  d = v.size
  return v[(np.arange(d)[None, :] - np.arange(d)[:, None]) % d]


def rel_error(x_true: Signal, x_hat: Signal) -> Tuple[float, int]:
  if x_true.d != x_hat.d:
    raise ArgumentError(f"signals differ in length: {x_true.d} vs {x_hat.d}")
  energy = float(np.sum(x_true.values**2))
  if energy == 0:
    raise ArgumentError("relative error is undefined for a zero ground-truth signal")
  errors = np.sum((x_true.values[None, :] - _all_shifts(x_hat.values)) ** 2, axis=1) / energy
  shift = int(np.argmin(errors))
  return float(errors[shift]), shift


def _simplex(p: np.ndarray, name: str) -> np.ndarray:
  p = np.asarray(p, dtype=np.float64).reshape(-1)
  if np.any(p < -SIMPLEX_TOL) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
    raise ArgumentError(f"{name} is not a probability vector (sum={p.sum():.3g}, min={p.min():.3g})")
  return p


def tv_distance(p_true, p_hat) -> Tuple[float, int]:
  """Accepts SegmentPmf instances or raw probability vectors."""
  p = _simplex(p_true.probs if isinstance(p_true, SegmentPmf) else p_true, "p_true")
  q = _simplex(p_hat.probs if isinstance(p_hat, SegmentPmf) else p_hat, "p_hat")
  if p.size != q.size:
    raise ArgumentError(f"PMFs differ in length: {p.size} vs {q.size}")
  distances = 0.5 * np.sum(np.abs(p[None, :] - _all_shifts(q)), axis=1)
  shift = int(np.argmin(distances))
  return float(min(distances[shift], 1.0)), shift


def snr_of(measurements: MeasurementSet, x: Signal, p: SegmentPmf) -> float:
  if measurements.sigma == 0:
    return float("inf")
  return clean_variance(x, p, measurements.m) / measurements.sigma**2


def success_rate(rel_errors: Sequence[float], threshold: float = SUCCESS_THRESHOLD) -> float:
  values = np.asarray(rel_errors, dtype=np.float64)
  if values.size == 0:
    raise ArgumentError("success rate of an empty list is undefined")
  # NaN (failed init) compares False and counts as a failure
  return float(np.mean(values < threshold))


def median_rel_error(rel_errors: Sequence[float]) -> float:
  values = np.asarray(rel_errors, dtype=np.float64)
  values = values[~np.isnan(values)]
  return float(np.median(values)) if values.size else float("nan")


def evaluate(x_true: Signal, p_true: SegmentPmf, x_hat: Signal, p_hat: SegmentPmf) -> EvalReport:
  """
  Signal and PMF are aligned independently; `tv_joint` reuses the signal's shift for the PMF.
  """
  error, shift_x = rel_error(x_true, x_hat)
  tv, shift_p = tv_distance(p_true, p_hat)
  tv_joint = 0.5 * float(np.sum(np.abs(p_true.probs - np.roll(p_hat.probs, shift_x))))
  return EvalReport(rel_error=error, tv=tv, aligning_shift_x=shift_x, aligning_shift_p=shift_p, tv_joint=min(tv_joint, 1.0))
