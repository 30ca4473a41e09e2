import zlib
from typing import Dict

import numpy as np

# Named consumers of randomness, one independent stream each.
STREAM_NAMES = ("locations", "noise", "gumbel", "init", "critic", "batches", "interpolation", "signal", "pmf")


def stream_key(name: str) -> int:
  """Stable 32-bit key for a stream name (independent of PYTHONHASHSEED)."""
  return zlib.crc32(name.encode("utf-8"))


def named_stream(seed: int, name: str) -> np.random.Generator:
  """
  Derive an independent generator for `name` from a 64-bit seed.

  The derivation goes through `SeedSequence` spawn keys, so streams are
  statistically independent and reproducible regardless of call order.
  """
  if seed < 0:
    raise ValueError(f"seed must be non-negative, got {seed}")
  sequence = np.random.SeedSequence(entropy=seed, spawn_key=(stream_key(name),))
  return np.random.Generator(np.random.PCG64(sequence))


class RngStreams:
  """Lazily created named generators sharing one seed."""

  def __init__(self, seed: int):
    self.seed = int(seed)
    self._streams: Dict[str, np.random.Generator] = {}

  def __getitem__(self, name: str) -> np.random.Generator:
    if name not in STREAM_NAMES:
      raise KeyError(f"unknown random stream {name!r}, expected one of {STREAM_NAMES}")
    if name not in self._streams:
      self._streams[name] = named_stream(self.seed, name)
    return self._streams[name]

  def __repr__(self) -> str:
    return f"RngStreams(seed={self.seed}, active={sorted(self._streams)})"
