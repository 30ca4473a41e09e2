from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import log_softmax, softmax

from src.msr.exceptions import ArgumentError, ContractViolationError


@dataclass
class Signal:
  """The unknown d-length real sequence."""

  values: np.ndarray

  def __post_init__(self):
    self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
    if self.values.size < 1:
      raise ArgumentError("a signal needs at least one entry")
    if not np.all(np.isfinite(self.values)):
      raise ArgumentError("signal entries must be finite")

  @property
  def d(self) -> int:
    return int(self.values.size)

  def copy(self) -> "Signal":
    return Signal(self.values.copy())


@dataclass
class SegmentPmf:
  """Categorical distribution over the d segment start locations, stored as logits."""

  logits: np.ndarray

  def __post_init__(self):
    self.logits = np.asarray(self.logits, dtype=np.float64).reshape(-1)
    if self.logits.size < 1:
      raise ArgumentError("a PMF needs at least one location")
    if not np.all(np.isfinite(self.logits)):
      raise ArgumentError("PMF logits must be finite")

  @property
  def d(self) -> int:
    return int(self.logits.size)

  @property
  def probs(self) -> np.ndarray:
    return softmax(self.logits)

  @property
  def log_probs(self) -> np.ndarray:
    return log_softmax(self.logits)

  @classmethod
  def uniform(cls, d: int) -> "SegmentPmf":
    return cls(np.zeros(d))

  @classmethod
  def from_probs(cls, probs: np.ndarray, floor: float = 1e-300) -> "SegmentPmf":
    """
    Build logits from probabilities. Zero entries are floored so the logits stay finite.
    """
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0, atol=1e-6):
      raise ArgumentError("probabilities must be non-negative and sum to one")
    return cls(np.log(np.maximum(probs, floor)))

  @classmethod
  def one_hot(cls, d: int, index: int, mass: float = 1.0) -> "SegmentPmf":
    if not 0 <= index < d:
      raise ArgumentError(f"one-hot index {index} outside [0, {d})")
    probs = np.full(d, (1.0 - mass) / max(d - 1, 1))
    probs[index] = mass if d > 1 else 1.0
    return cls.from_probs(probs)

  def copy(self) -> "SegmentPmf":
    return SegmentPmf(self.logits.copy())


@dataclass
class MeasurementSet:
  """N noisy segments of length m plus the metadata they were generated with."""

  data: np.ndarray
  d: int
  sigma: float
  seed: int = 0
  snr: float = float("inf")
  _true_locations: Optional[np.ndarray] = field(default=None, repr=False)

  def __post_init__(self):
    self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
    n_rows, m = self.data.shape
    if n_rows < 1:
      raise ArgumentError("a measurement set needs at least one row")
    if not 1 <= m <= self.d:
      raise ArgumentError(f"segment length m={m} must satisfy 1 <= m <= d={self.d}")
    if self.sigma < 0:
      raise ArgumentError(f"sigma must be non-negative, got {self.sigma}")
    if self._true_locations is not None:
      self._true_locations = np.asarray(self._true_locations, dtype=np.int64).reshape(-1)
      if self._true_locations.size != n_rows:
        raise ContractViolationError("one true location is needed per measurement row")

  @property
  def m(self) -> int:
    return int(self.data.shape[1])

  @property
  def N(self) -> int:
    return int(self.data.shape[0])

  @property
  def has_locations(self) -> bool:
    return self._true_locations is not None

  def diagnostic_locations(self) -> np.ndarray:
    """
    True segment locations, for diagnostics and tests only. Solvers never call this.
    """
    if self._true_locations is None:
      raise ContractViolationError("this measurement set carries no true locations")
    return self._true_locations
