"""
Moment matching baseline: fit (x, p) to the first three empirical moments of the segments.

Noise enters the model moments through the Gaussian identities E[e e^T] = sigma^2 I and
E[(a + e)^{(x)3}] = a^{(x)3} + sigma^2 (M1 (x) I terms), so no separate debiasing pass is
needed on the data side.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Tuple

import numpy as np
from tqdm import tqdm

from src.configuration.log import get_logger, log_fields
from src.configuration.solver_config import SifConfig
from src.msr.exceptions import ArgumentError
from src.msr.forward_model import all_segments, scatter_segments
from src.msr.solvers.base_solver import BaseSolver, SolveResult
from src.msr.types import MeasurementSet, SegmentPmf, Signal

logger = get_logger()

HISTORY_HEADER = ("iter", "loss", "grad_norm")
# Upper bound on the entries of one chunk of pairwise products
CHUNK_ENTRIES = 4_000_000


@dataclass
class MomentSet:
  M1: np.ndarray
  M2: np.ndarray
  M3: np.ndarray
  N_used: int = 0

  @property
  def m(self) -> int:
    return int(self.M1.size)


class SifOutcome(NamedTuple):
  x_hat: Signal
  p_hat: SegmentPmf
  loss_trace: List[float]
  grad_norms: List[float]
  line_search_failed: bool


def _third_power_sum(rows: np.ndarray, weights: np.ndarray) -> np.ndarray:
  """sum_j weights[j] rows[j] (x) rows[j] (x) rows[j] as an m x m x m tensor."""
  n, m = rows.shape
  pairs = (rows[:, :, None] * rows[:, None, :]).reshape(n, m * m)
  return ((rows * weights[:, None]).T @ pairs).reshape(m, m, m)


def empirical_moments(measurements: MeasurementSet) -> MomentSet:
  """Sample moments up to third order, accumulated over the rows in one pass."""
  data = measurements.data
  N, m = data.shape
  chunk = max(1, CHUNK_ENTRIES // (m * m))
  M1 = np.zeros(m)
  M2 = np.zeros((m, m))
  M3 = np.zeros((m, m, m))
  for start in range(0, N, chunk):
    rows = data[start : start + chunk]
    M1 += rows.sum(axis=0)
    M2 += rows.T @ rows
    M3 += _third_power_sum(rows, np.ones(rows.shape[0]))
  return MomentSet(M1 / N, M2 / N, M3 / N, N_used=N)


def _noise_bias(M1: np.ndarray, sigma: float) -> np.ndarray:
  eye = np.eye(M1.size)
  return sigma**2 * (M1[:, None, None] * eye[None, :, :] + M1[None, :, None] * eye[:, None, :] + M1[None, None, :] * eye[:, :, None])


def _model_moments(segments: np.ndarray, probs: np.ndarray, sigma: float) -> MomentSet:
  m = segments.shape[1]
  M1 = probs @ segments
  M2 = segments.T @ (probs[:, None] * segments) + sigma**2 * np.eye(m)
  M3 = _third_power_sum(segments, probs) + _noise_bias(M1, sigma)
  return MomentSet(M1, M2, M3)


def analytic_moments(x: Signal, p: SegmentPmf, m: int, sigma: float) -> MomentSet:
  """Population moments of M_s x + e with s ~ p and e ~ N(0, sigma^2 I_m)."""
  if x.d != p.d:
    raise ArgumentError(f"signal length {x.d} and PMF length {p.d} differ")
  if sigma < 0:
    raise ArgumentError(f"sigma must be non-negative, got {sigma}")
  return _model_moments(all_segments(x.values, m), p.probs, sigma)


def moment_loss(
  x: np.ndarray,
  p_logits: np.ndarray,
  target: MomentSet,
  weights: Tuple[float, float, float],
  sigma: float,
) -> Tuple[float, np.ndarray, np.ndarray]:
  """
  w1 ||M1 - M1*||^2 + w2 ||M2 - M2*||_F^2 + w3 ||M3 - M3*||_F^2 and its exact gradients
  with respect to the signal and the PMF logits.
  """
  w1, w2, w3 = weights
  x = np.asarray(x, dtype=np.float64)
  d, m = x.size, target.m
  A = all_segments(x, m)
  probs = SegmentPmf(p_logits).probs
  model = _model_moments(A, probs, sigma)

  R1, R2, R3 = model.M1 - target.M1, model.M2 - target.M2, model.M3 - target.M3
  value = float(w1 * np.sum(R1**2) + w2 * np.sum(R2**2) + w3 * np.sum(R3**2))

  # M1 also feeds the noise bias of M3
  G1 = 2.0 * w1 * R1 + 2.0 * w3 * sigma**2 * (
    np.einsum("ikk->i", R3) + np.einsum("jij->i", R3) + np.einsum("jji->i", R3)
  )
  G2 = 2.0 * w2 * R2
  G3 = 2.0 * w3 * R3

  T = np.einsum("ijk,sk->sij", G3, A)
  U = np.einsum("ijk,si->sjk", G3, A)
  c1 = np.einsum("sij,sj->si", T, A)
  c2 = np.einsum("sij,si->sj", T, A)
  c3 = np.einsum("sjk,sj->sk", U, A)

  grad_p = A @ G1 + np.einsum("si,ij,sj->s", A, G2, A) + np.einsum("si,si->s", c1, A)
  grad_A = probs[:, None] * (G1[None, :] + A @ (G2 + G2.T).T + c1 + c2 + c3)

  grad_x = scatter_segments(grad_A, d)
  grad_logits = probs * (grad_p - probs @ grad_p)
  return value, grad_x, grad_logits


def run_sif(
  measurements: MeasurementSet,
  x0: Signal,
  p0: SegmentPmf,
  config: SifConfig,
) -> SifOutcome:
  """
  Gradient descent on the moment loss over (x, logits) with Armijo backtracking. Accepted steps
  never increase the loss. A step that shrinks below `min_step` ends the run with the flag set.
  """
  if x0.d != measurements.d or p0.d != measurements.d:
    raise ArgumentError(f"initial guess must have length d={measurements.d}")
  target = empirical_moments(measurements)
  weights = config.weights(measurements.m)
  sigma = measurements.sigma
  d = measurements.d

  x, logits = x0.values.copy(), p0.logits.copy()
  loss, grad_x, grad_logits = moment_loss(x, logits, target, weights, sigma)
  grad_norm = float(np.sqrt(np.sum(grad_x**2) + np.sum(grad_logits**2)))
  loss_trace, grad_norms = [loss], [grad_norm]
  step = config.initial_step
  failed = False

  for iteration in tqdm(range(config.max_iters), desc="SIF", disable=not config.verbose):
    if grad_norm < config.tol:
      break
    step = min(config.initial_step, 2.0 * step)
    while True:
      x_new = x - step * grad_x
      logits_new = logits - step * grad_logits
      loss_new, gx_new, gl_new = moment_loss(x_new, logits_new, target, weights, sigma)
      if np.isfinite(loss_new) and loss_new <= loss - config.armijo_c * step * grad_norm**2:
        break
      step *= 0.5
      if step < config.min_step:
        failed = True
        break
    if failed:
      logger.warning("SIF line search failed", extra=log_fields({"iteration": iteration, "loss": loss, "grad_norm": grad_norm}))
      break
    x, logits = x_new, logits_new - logits_new.max()
    loss, grad_x, grad_logits = loss_new, gx_new, gl_new
    grad_norm = float(np.sqrt(np.sum(grad_x**2) + np.sum(grad_logits**2)))
    loss_trace.append(loss)
    grad_norms.append(grad_norm)

  logger.info(
    "SIF finished",
    extra=log_fields({"iterations": len(loss_trace) - 1, "loss": loss, "grad_norm": grad_norm, "line_search_failed": failed, "d": d}),
  )
  return SifOutcome(Signal(x), SegmentPmf(logits), loss_trace, grad_norms, failed)


class SifSolver(BaseSolver):
  name = "sif"
  config: SifConfig

  def solve(self, x0: Signal, p0: SegmentPmf) -> SolveResult:
    outcome = run_sif(self.measurements, x0, p0, self.config)
    return SolveResult(
      x_hat=outcome.x_hat,
      p_hat=outcome.p_hat,
      history_header=HISTORY_HEADER,
      history=[(i, loss, norm) for i, (loss, norm) in enumerate(zip(outcome.loss_trace, outcome.grad_norms))],
      extra={"iterations": len(outcome.loss_trace) - 1, "line_search_failed": outcome.line_search_failed},
    )
