import numpy as np
import pytest

from src.msr.forward_model import synthesize
from src.msr.types import MeasurementSet, SegmentPmf, Signal


@pytest.fixture
def rng() -> np.random.Generator:
  return np.random.default_rng(20240613)


@pytest.fixture
def small_truth(rng) -> tuple[Signal, SegmentPmf]:
  d = 6
  x = Signal(rng.standard_normal(d))
  p = SegmentPmf.from_probs(rng.dirichlet(np.ones(d)))
  return x, p


@pytest.fixture
def small_measurements(small_truth) -> MeasurementSet:
  x, p = small_truth
  return synthesize(x, p, m=3, sigma=0.3, N=400, seed=7)
