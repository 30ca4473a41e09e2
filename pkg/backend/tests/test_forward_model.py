import numpy as np
import pytest

from src.msr.exceptions import ArgumentError, ContractViolationError
from src.msr.forward_model import (
  all_segments,
  clean_variance,
  mask,
  mask_adjoint,
  realized_snr,
  sample_location,
  sample_locations,
  scatter_segments,
  shift_indices,
  sigma_from_snr,
  synthesize,
)
from src.msr.types import MeasurementSet, SegmentPmf, Signal


class TestMask:
  def test_wraps_around(self):
    x = Signal([1.0, 2.0, 3.0, 4.0, 5.0])
    np.testing.assert_array_equal(mask(x, 3, 3), [4.0, 5.0, 1.0])

  def test_full_length_is_cyclic_shift(self):
    x = Signal(np.arange(6.0))
    np.testing.assert_array_equal(mask(x, 2, 6), np.roll(x.values, -2))

  @pytest.mark.parametrize("s,m", [(-1, 2), (5, 2), (0, 0), (0, 6)])
  def test_rejects_bad_arguments(self, s, m):
    with pytest.raises(ArgumentError):
      mask(Signal(np.ones(5)), s, m)

  def test_adjoint_identity_exhaustive(self, rng):
    for d in range(1, 9):
      for m in range(1, d + 1):
        for s in range(d):
          x = rng.standard_normal(d)
          y = rng.standard_normal(m)
          lhs = mask(Signal(x), s, m) @ y
          rhs = x @ mask_adjoint(y, s, d)
          assert lhs == pytest.approx(rhs, abs=1e-12)

  def test_linear_in_the_signal(self, rng):
    x, y = rng.standard_normal(7), rng.standard_normal(7)
    for s in range(7):
      combined = mask(Signal(2.5 * x - 0.7 * y), s, 4)
      np.testing.assert_allclose(combined, 2.5 * mask(Signal(x), s, 4) - 0.7 * mask(Signal(y), s, 4), rtol=1e-12, atol=1e-12)

  def test_adjoint_places_entries(self):
    np.testing.assert_array_equal(mask_adjoint([7.0, 8.0], 4, 5), [8.0, 0.0, 0.0, 0.0, 7.0])


class TestSegmentTables:
  def test_shift_indices(self):
    np.testing.assert_array_equal(shift_indices(4, 2), [[0, 1], [1, 2], [2, 3], [3, 0]])

  def test_all_segments_rows_are_masks(self, rng):
    x = Signal(rng.standard_normal(7))
    segments = all_segments(x, 4)
    for s in range(7):
      np.testing.assert_array_equal(segments[s], mask(x, s, 4))

  def test_scatter_is_sum_of_adjoints(self, rng):
    rows = rng.standard_normal((7, 3))
    expected = sum(mask_adjoint(rows[s], s, 7) for s in range(7))
    np.testing.assert_allclose(scatter_segments(rows, 7), expected, atol=1e-14)


class TestSampling:
  def test_frequencies_match_pmf(self):
    p = SegmentPmf.from_probs(np.array([0.5, 0.3, 0.15, 0.05]))
    locations = sample_locations(p, 200_000, np.random.default_rng(3))
    np.testing.assert_allclose(np.bincount(locations, minlength=4) / locations.size, p.probs, atol=0.005)

  def test_one_hot_always_hits_its_location(self):
    p = SegmentPmf.one_hot(8, 5)
    assert np.all(sample_locations(p, 1000, np.random.default_rng(0)) == 5)
    assert sample_location(p, np.random.default_rng(1)) == 5


class TestSynthesize:
  def test_noiseless_rows_are_segments(self, small_truth):
    x, p = small_truth
    measurements = synthesize(x, p, m=4, sigma=0.0, N=50, seed=1)
    locations = measurements.diagnostic_locations()
    np.testing.assert_array_equal(measurements.data, all_segments(x, 4)[locations])

  def test_same_seed_same_data(self, small_truth):
    x, p = small_truth
    first = synthesize(x, p, m=3, sigma=0.5, N=100, seed=11)
    second = synthesize(x, p, m=3, sigma=0.5, N=100, seed=11)
    np.testing.assert_array_equal(first.data, second.data)
    third = synthesize(x, p, m=3, sigma=0.5, N=100, seed=12)
    assert not np.array_equal(first.data, third.data)

  def test_noise_level(self, small_truth):
    x, p = small_truth
    measurements = synthesize(x, p, m=3, sigma=0.2, N=20_000, seed=2)
    clean = all_segments(x, 3)[measurements.diagnostic_locations()]
    assert np.std(measurements.data - clean) == pytest.approx(0.2, rel=0.02)

  def test_rejects_bad_arguments(self, small_truth):
    x, p = small_truth
    with pytest.raises(ArgumentError):
      synthesize(x, p, m=3, sigma=-1.0, N=10, seed=0)
    with pytest.raises(ArgumentError):
      synthesize(x, p, m=7, sigma=0.0, N=10, seed=0)
    with pytest.raises(ArgumentError):
      synthesize(x, SegmentPmf.uniform(4), m=3, sigma=0.0, N=10, seed=0)

  def test_locations_only_through_diagnostics(self):
    measurements = MeasurementSet(data=np.zeros((3, 2)), d=4, sigma=0.0)
    assert not measurements.has_locations
    with pytest.raises(ContractViolationError):
      measurements.diagnostic_locations()


class TestSnr:
  def test_infinite_snr_means_no_noise(self, small_truth):
    x, p = small_truth
    assert sigma_from_snr(x, p, 3, float("inf")) == 0.0

  def test_sigma_matches_clean_variance(self, small_truth):
    x, p = small_truth
    sigma = sigma_from_snr(x, p, 3, 4.0)
    assert sigma**2 * 4.0 == pytest.approx(clean_variance(x, p, 3))

  @pytest.mark.parametrize("snr", [0.0, -2.0])
  def test_rejects_non_positive(self, small_truth, snr):
    x, p = small_truth
    with pytest.raises(ArgumentError):
      sigma_from_snr(x, p, 3, snr)

  def test_realized_snr_close_to_requested(self, small_truth):
    x, p = small_truth
    sigma = sigma_from_snr(x, p, 3, 10.0)
    measurements = synthesize(x, p, m=3, sigma=sigma, N=50_000, seed=5, snr=10.0)
    assert realized_snr(measurements, x) == pytest.approx(10.0, rel=0.05)
    assert realized_snr(synthesize(x, p, m=3, sigma=0.0, N=10, seed=5), x) == float("inf")
