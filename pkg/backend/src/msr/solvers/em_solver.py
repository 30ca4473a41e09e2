from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp
from tqdm import tqdm

from src.configuration.log import get_logger, log_fields
from src.configuration.solver_config import EmConfig
from src.msr.exceptions import ArgumentError, SolverAbortError
from src.msr.forward_model import all_segments, scatter_segments
from src.msr.solvers.base_solver import BaseSolver, SolveResult
from src.msr.types import MeasurementSet, SegmentPmf, Signal

logger = get_logger()

HISTORY_HEADER = ("iter", "log_likelihood")
MONOTONE_SLACK = 1e-9


@dataclass
class Posterior:
  """w[j, s] = P(s_j = s | xi_j, x, p)."""

  w: np.ndarray

  @property
  def N(self) -> int:
    return int(self.w.shape[0])


def _probs(p: Union[SegmentPmf, np.ndarray]) -> np.ndarray:
  return p.probs if isinstance(p, SegmentPmf) else np.asarray(p, dtype=np.float64)


def _values(x: Union[Signal, np.ndarray]) -> np.ndarray:
  return x.values if isinstance(x, Signal) else np.asarray(x, dtype=np.float64)


def effective_sigma(sigma: float, floor: float = 1e-3) -> float:
  return max(float(sigma), floor)


def e_step(
  measurements: MeasurementSet, x: Union[Signal, np.ndarray], p: Union[SegmentPmf, np.ndarray], sigma_eff: float
) -> Tuple[Posterior, float]:
  """
  Responsibilities over the d shifts and the marginal log-likelihood, constant included:
  sum_j logsumexp_s(log p[s] - ||xi_j - M_s x||^2 / (2 sigma^2)) - N m / 2 log(2 pi sigma^2).
  """
  if not sigma_eff > 0:
    raise ArgumentError(f"sigma_eff must be positive, got {sigma_eff}")
  data = measurements.data
  segments = all_segments(_values(x), measurements.m)
  squared = np.sum(data**2, axis=1)[:, None] - 2.0 * data @ segments.T + np.sum(segments**2, axis=1)[None, :]
  with np.errstate(divide="ignore"):
    log_prior = np.log(_probs(p))
  log_joint = log_prior[None, :] - np.maximum(squared, 0.0) / (2.0 * sigma_eff**2)
  log_norm = logsumexp(log_joint, axis=1, keepdims=True)
  constant = -0.5 * measurements.N * measurements.m * np.log(2.0 * np.pi * sigma_eff**2)
  return Posterior(np.exp(log_joint - log_norm)), float(np.sum(log_norm) + constant)


def _m_step_arrays(
  measurements: MeasurementSet, posterior: Posterior, x_prev: Optional[Union[Signal, np.ndarray]] = None
) -> Tuple[np.ndarray, np.ndarray]:
  w = posterior.w
  d, m = measurements.d, measurements.m
  numerator = scatter_segments(w.T @ measurements.data, d)
  denominator = scatter_segments(np.repeat(w.sum(axis=0)[:, None], m, axis=1), d)
  previous = np.zeros(d) if x_prev is None else _values(x_prev)
  covered = denominator > 0
  x_new = np.where(covered, numerator / np.where(covered, denominator, 1.0), previous)
  return x_new, w.mean(axis=0)


def m_step(
  measurements: MeasurementSet, posterior: Posterior, x_prev: Optional[Union[Signal, np.ndarray]] = None
) -> Tuple[Signal, SegmentPmf]:
  """
  Weighted least squares for x and responsibility averaging for p. Positions no segment
  covers with positive weight keep their previous value (0 without one).
  """
  x_new, probs = _m_step_arrays(measurements, posterior, x_prev)
  return Signal(x_new), SegmentPmf.from_probs(probs)


def run_em(
  measurements: MeasurementSet,
  x0: Signal,
  p0: SegmentPmf,
  sigma: float,
  max_iters: int = 5000,
  tol: float = 1e-8,
  sigma_floor: float = 1e-3,
  verbose: bool = False,
) -> Tuple[Signal, SegmentPmf, List[float]]:
  """Alternate E and M steps until the relative log-likelihood change drops below `tol`."""
  sigma_eff = effective_sigma(sigma, sigma_floor)
  x, probs = x0.values.copy(), p0.probs
  ll_trace: List[float] = []

  for iteration in tqdm(range(max_iters), desc="EM", disable=not verbose):
    posterior, ll = e_step(measurements, x, probs, sigma_eff)
    if not np.isfinite(ll):
      raise SolverAbortError("e_step", iteration, f"log-likelihood {ll}")
    if ll_trace and ll < ll_trace[-1] - MONOTONE_SLACK * max(1.0, abs(ll_trace[-1])):
      logger.warning("EM log-likelihood decreased", extra=log_fields({"iteration": iteration, "previous": ll_trace[-1], "current": ll}))
    ll_trace.append(ll)
    if len(ll_trace) > 1 and abs(ll_trace[-1] - ll_trace[-2]) < tol * abs(ll_trace[-1]):
      break
    x, probs = _m_step_arrays(measurements, posterior, x)

  logger.info("EM finished", extra=log_fields({"iterations": len(ll_trace), "log_likelihood": ll_trace[-1], "sigma_eff": sigma_eff}))
  return Signal(x), SegmentPmf.from_probs(probs), ll_trace


class EmSolver(BaseSolver):
  name = "em"
  config: EmConfig

  def solve(self, x0: Signal, p0: SegmentPmf) -> SolveResult:
    x_hat, p_hat, ll_trace = run_em(
      self.measurements,
      x0,
      p0,
      self.measurements.sigma,
      max_iters=self.config.max_iters,
      tol=self.config.tol,
      sigma_floor=self.config.sigma_floor,
      verbose=self.config.verbose,
    )
    return SolveResult(
      x_hat=x_hat,
      p_hat=p_hat,
      history_header=HISTORY_HEADER,
      history=[(i, ll) for i, ll in enumerate(ll_trace)],
      extra={"iterations": len(ll_trace)},
    )

