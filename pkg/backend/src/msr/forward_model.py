from typing import Union

import numpy as np

from src.configuration.log import get_logger, log_fields
from src.msr.exceptions import ArgumentError
from src.msr.relaxation import gumbel_noise
from src.msr.rng import RngStreams
from src.msr.types import MeasurementSet, SegmentPmf, Signal

logger = get_logger()


def _check_shift(s: int, m: int, d: int) -> None:
  if not 0 <= s < d:
    raise ArgumentError(f"shift s={s} outside [0, {d})")
  if not 1 <= m <= d:
    raise ArgumentError(f"segment length m={m} outside [1, {d}]")


def shift_indices(d: int, m: int) -> np.ndarray:
  """d x m table with entry [s, n] = (n + s) mod d."""
  if not 1 <= m <= d:
    raise ArgumentError(f"segment length m={m} outside [1, {d}]")
  return (np.arange(d)[:, None] + np.arange(m)[None, :]) % d


def mask(x: Signal, s: int, m: int) -> np.ndarray:
  _check_shift(s, m, x.d)
  return x.values[(np.arange(m) + s) % x.d]


def mask_adjoint(y: np.ndarray, s: int, d: int) -> np.ndarray:
  y = np.asarray(y, dtype=np.float64).reshape(-1)
  _check_shift(s, y.size, d)
  out = np.zeros(d)
  out[(np.arange(y.size) + s) % d] = y
  return out


def all_segments(x: Union[Signal, np.ndarray], m: int) -> np.ndarray:
  """Rows s = 0..d-1 hold M_s x."""
  values = x.values if isinstance(x, Signal) else np.asarray(x, dtype=np.float64)
  return values[shift_indices(values.size, m)]


def scatter_segments(rows: np.ndarray, d: int) -> np.ndarray:
  """Adjoint of `all_segments`: sum_s M_s^T rows[s]."""
  rows = np.asarray(rows, dtype=np.float64)
  out = np.zeros(d)
  np.add.at(out, shift_indices(d, rows.shape[1]), rows)
  return out


def sample_locations(p: SegmentPmf, n: int, rng: np.random.Generator) -> np.ndarray:
  """Gumbel-Max: argmax_s (g_s + log p[s]) for n independent rows."""
  g = gumbel_noise(rng, (n, p.d))
  return np.argmax(g + p.log_probs[None, :], axis=1)


def sample_location(p: SegmentPmf, rng: np.random.Generator) -> int:
  return int(sample_locations(p, 1, rng)[0])


def clean_variance(x: Signal, p: SegmentPmf, m: int) -> float:
  """
  Pooled variance of the entries of a clean segment under (x, p): each entry is
  x[(n + s) mod d] with probability p[s] / m.
  """
  segments = all_segments(x, m)
  weights = p.probs[:, None] / m
  mean = float(np.sum(weights * segments))
  return float(np.sum(weights * (segments - mean) ** 2))


def sigma_from_snr(x: Signal, p: SegmentPmf, m: int, snr: float) -> float:
  if not snr > 0:
    raise ArgumentError(f"SNR must be positive or infinite, got {snr}")
  if np.isinf(snr):
    return 0.0
  return float(np.sqrt(clean_variance(x, p, m) / snr))


def synthesize(x: Signal, p: SegmentPmf, m: int, sigma: float, N: int, seed: int, snr: float = float("inf")) -> MeasurementSet:
  """
  Draw N measurements xi_j = M_{s_j} x + eps_j with s_j ~ p and eps_j ~ N(0, sigma^2 I_m).
  """
  if N < 1:
    raise ArgumentError(f"need at least one measurement, got N={N}")
  if sigma < 0:
    raise ArgumentError(f"sigma must be non-negative, got {sigma}")
  if x.d != p.d:
    raise ArgumentError(f"signal length {x.d} and PMF length {p.d} differ")
  if not 1 <= m <= x.d:
    raise ArgumentError(f"segment length m={m} outside [1, {x.d}]")

  streams = RngStreams(seed)
  locations = sample_locations(p, N, streams["locations"])
  clean = x.values[shift_indices(x.d, m)[locations]]
  noise = streams["noise"].standard_normal((N, m)) * sigma if sigma > 0 else np.zeros((N, m))
  logger.debug("Synthesized measurements", extra=log_fields({"d": x.d, "m": m, "N": N, "sigma": sigma, "seed": seed}))
  return MeasurementSet(data=clean + noise, d=x.d, sigma=float(sigma), seed=seed, snr=snr, _true_locations=locations)


def realized_snr(measurements: MeasurementSet, x: Signal) -> float:
  """Pooled variance of the realized clean segment matrix divided by sigma^2."""
  if measurements.sigma == 0:
    return float("inf")
  locations = measurements.diagnostic_locations()
  clean = x.values[shift_indices(x.d, measurements.m)[locations]]
  return float(np.var(clean) / measurements.sigma**2)
