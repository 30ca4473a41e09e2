"""Built-in ground-truth signals and segment-location PMFs for synthetic experiments."""

import numpy as np

from src.configuration.solver_config import ExperimentConfig
from src.msr.exceptions import ArgumentError
from src.msr.io import read_xy
from src.msr.rng import named_stream
from src.msr.types import SegmentPmf, Signal


def sine_signal(d: int) -> Signal:
  """One period of sin over d samples."""
  return Signal(np.sin(2.0 * np.pi * np.arange(d) / d))


def triangle_signal(d: int) -> Signal:
  """Symmetric ramp 0 -> 1 -> 0 over d samples."""
  if d == 1:
    return Signal(np.ones(1))
  n = np.arange(d)
  return Signal(1.0 - np.abs(2.0 * n / (d - 1) - 1.0))


def random_gaussian_signal(d: int, rng: np.random.Generator) -> Signal:
  """i.i.d. N(0, 1) entries scaled to unit max-abs."""
  values = rng.standard_normal(d)
  peak = np.max(np.abs(values))
  return Signal(values / peak if peak > 0 else values)


def wrapped_gaussian_mixture(d: int, centres, widths, weights) -> SegmentPmf:
  """
  Mixture of discrete Gaussians wrapped on {0..d-1}. Centres and widths are fractions of d.
  """
  if not (len(centres) == len(widths) == len(weights)) or not centres:
    raise ArgumentError("mixture centres, widths and weights need the same non-zero length")
  if any(w <= 0 for w in widths) or any(w < 0 for w in weights) or sum(weights) <= 0:
    raise ArgumentError("mixture widths must be positive and weights non-negative")
  n = np.arange(d)
  probs = np.zeros(d)
  for centre, width, weight in zip(centres, widths, weights):
    offset = np.abs(n - centre * d)
    distance = np.minimum(offset, d - offset)
    component = np.exp(-0.5 * (distance / (width * d)) ** 2)
    probs += weight * component / component.sum()
  return SegmentPmf.from_probs(probs / probs.sum())


def load_pmf(path: str, d: int) -> SegmentPmf:
  probs = read_xy(path)
  if probs.size != d:
    raise ArgumentError(f"{path}: PMF has {probs.size} entries, expected d={d}")
  if np.any(probs < 0) or probs.sum() <= 0:
    raise ArgumentError(f"{path}: PMF entries must be non-negative with positive total")
  return SegmentPmf.from_probs(probs / probs.sum())


def load_signal(path: str, d: int) -> Signal:
  values = read_xy(path)
  if values.size != d:
    raise ArgumentError(f"{path}: signal has {values.size} entries, expected d={d}")
  return Signal(values)


def make_signal(config: ExperimentConfig) -> Signal:
  if config.signal == "sine":
    return sine_signal(config.d)
  elif config.signal == "triangle":
    return triangle_signal(config.d)
  elif config.signal == "random-gaussian":
    return random_gaussian_signal(config.d, named_stream(config.seed, "signal"))
  else:
    return load_signal(config.signal_file, config.d)


def make_pmf(config: ExperimentConfig) -> SegmentPmf:
  d = config.d
  if config.pmf == "uniform":
    return SegmentPmf.uniform(d)
  elif config.pmf == "one-hot":
    return SegmentPmf.one_hot(d, config.pmf_index)
  elif config.pmf == "random-dirichlet":
    rng = named_stream(config.seed, "pmf")
    return SegmentPmf.from_probs(rng.dirichlet(np.full(d, config.pmf_concentration)))
  elif config.pmf == "two-gaussians":
    return wrapped_gaussian_mixture(d, config.pmf_centres, config.pmf_widths, config.pmf_weights)
  else:
    return load_pmf(config.pmf_file, d)
