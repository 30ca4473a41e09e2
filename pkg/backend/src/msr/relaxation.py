"""
Gumbel noise and the Gumbel-Softmax relaxation of categorical samples.

The relaxation is evaluated directly on PMF logits: since log p = theta - logsumexp(theta),
the per-row constant cancels inside the softmax and tiny probabilities never go through a log.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import softmax

from src.msr.exceptions import ArgumentError
from src.msr.types import SegmentPmf

UNIFORM_EPS = 1e-12
DEFAULT_TAU = 0.5


@dataclass
class SoftAssignment:
  """B relaxed one-hot rows over d locations, with the Gumbel draws that produced them."""

  q: np.ndarray
  tau: float
  gumbel: np.ndarray

  @property
  def B(self) -> int:
    return int(self.q.shape[0])

  def hard_locations(self) -> np.ndarray:
    return np.argmax(self.q, axis=1)


def gumbel_from_uniform(u: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
  """g = -log(-log(u)) with u clamped to [eps, 1 - eps]."""
  u = np.clip(u, UNIFORM_EPS, 1.0 - UNIFORM_EPS)
  return -np.log(-np.log(u))


def gumbel_noise(rng: np.random.Generator, size: Optional[Union[int, Tuple[int, ...]]] = None) -> Union[float, np.ndarray]:
  return gumbel_from_uniform(rng.uniform(0.0, 1.0, size=size))


def gumbel_sample(rng: np.random.Generator) -> float:
  return float(gumbel_noise(rng))


def relaxed_from_gumbel(logits: np.ndarray, gumbel: np.ndarray, tau: float) -> np.ndarray:
  if tau <= 0:
    raise ArgumentError(f"temperature must be positive, got {tau}")
  # scipy's softmax subtracts the row max before exponentiating
  return softmax((np.atleast_2d(gumbel) + logits[None, :]) / tau, axis=1)


def gumbel_softmax(p: SegmentPmf, tau: float, B: int, rng: np.random.Generator) -> SoftAssignment:
  if tau <= 0:
    raise ArgumentError(f"temperature must be positive, got {tau}")
  if B < 1:
    raise ArgumentError(f"batch size must be at least 1, got {B}")
  gumbel = np.asarray(gumbel_noise(rng, (B, p.d)))
  return SoftAssignment(q=relaxed_from_gumbel(p.logits, gumbel, tau), tau=tau, gumbel=gumbel)


def gumbel_softmax_backward(q_row: np.ndarray, p: SegmentPmf, tau: float) -> np.ndarray:
  """
  Jacobian dq_s / dtheta_i of one relaxed row with respect to the PMF logits.

  With log p = theta - logsumexp(theta), dlog p_s / dtheta_i = delta_si - p_i, and the
  p_i terms cancel between the two halves of the chain rule, leaving
  (1 / tau) * q_s * (delta_si - q_i).
  """
  if tau <= 0:
    raise ArgumentError(f"temperature must be positive, got {tau}")
  q_row = np.asarray(q_row, dtype=np.float64).reshape(-1)
  if q_row.size != p.d:
    raise ArgumentError(f"relaxed row has length {q_row.size}, PMF has {p.d} locations")
  dlogp = np.eye(p.d) - p.probs[None, :]
  centred = dlogp - q_row @ dlogp
  return q_row[:, None] * centred / tau


def logits_vjp(q: np.ndarray, upstream: np.ndarray, tau: float) -> np.ndarray:
  """
  Sum over rows b of J_b^T upstream_b, i.e. the logits gradient of sum_{b,s} upstream[b, s] * q[b, s].

  Equivalent to accumulating `gumbel_softmax_backward(q[b]).T @ upstream[b]` without forming d x d matrices.
  """
  weighted = q * upstream
  return (weighted - q * weighted.sum(axis=1, keepdims=True)).sum(axis=0) / tau
