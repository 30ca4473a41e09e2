import numpy as np
import pytest

from src.msr.critic import (
  PARAM_NAMES,
  clip_grad_norm,
  combine,
  forward,
  forward_batch,
  global_norm,
  grad_input,
  grad_params,
  gradient_penalty,
  init_critic,
  load_checkpoint,
  save_checkpoint,
  spectral_normalize,
)
from src.msr.exceptions import ArgumentError, ContractViolationError
from tests.helpers import central_difference, random_critic


def with_tensor(params, name, value):
  changed = params.copy()
  setattr(changed, name, np.asarray(value).reshape(getattr(params, name).shape))
  return changed


class TestInit:
  def test_shapes(self, rng):
    params = init_critic(10, 4, rng)
    assert params.W1.shape == (10, 4)
    assert params.W2.shape == (5, 10)
    assert params.w3.shape == (1, 5)
    assert params.b3.shape == (1,)

  def test_weight_variance(self, rng):
    params = init_critic(200, 60, rng)
    assert np.var(params.W1) == pytest.approx(1e-4, rel=0.2)
    assert np.all(params.b1 == 0)

  @pytest.mark.parametrize("ell", [3, 0])
  def test_rejects_odd_or_empty_width(self, rng, ell):
    with pytest.raises(ArgumentError):
      init_critic(ell, 4, rng)


class TestSpectralNormalization:
  def test_converges_to_largest_singular_value(self, rng):
    params = spectral_normalize(init_critic(8, 5, rng), n_iters=500)
    np.testing.assert_allclose(params.sigmas[0], np.linalg.svd(params.W1, compute_uv=False)[0], rtol=1e-6)
    np.testing.assert_allclose(params.sigmas[1], np.linalg.svd(params.W2, compute_uv=False)[0], rtol=1e-6)
    np.testing.assert_allclose(params.sigmas[2], np.linalg.norm(params.w3), rtol=1e-12)
    A1, _, _ = params.effective()
    assert np.linalg.svd(A1, compute_uv=False)[0] == pytest.approx(1.0, rel=1e-6)

  def test_normalized_critic_is_lipschitz(self, rng):
    params = spectral_normalize(random_critic(rng, ell=8, m=5, scale=2.0), n_iters=500)
    _, _, a3 = params.effective()
    first, second = rng.standard_normal((200, 5)), 3.0 * rng.standard_normal((200, 5))
    gaps = np.abs(forward_batch(params, first)[0] - forward_batch(params, second)[0])
    bound = np.linalg.norm(a3) * np.linalg.norm(first - second, axis=1)
    assert np.all(gaps <= bound * (1.0 + 1e-5))

  def test_zero_weights_keep_unit_sigma(self, rng):
    params = init_critic(4, 3, rng)
    params.W1[:] = 0.0
    spectral_normalize(params)
    assert params.sigmas[0] == 1.0

  def test_stale_tape_is_rejected(self, rng):
    params = spectral_normalize(init_critic(6, 3, rng))
    _, tape = forward_batch(params, rng.standard_normal((4, 3)))
    spectral_normalize(params)
    with pytest.raises(ContractViolationError):
      grad_params(params, tape, 1.0)
    with pytest.raises(ContractViolationError):
      grad_input(params, tape)


class TestForward:
  def test_single_matches_batch(self, rng):
    params = random_critic(rng)
    xi = rng.standard_normal((3, 5))
    scores, _ = forward_batch(params, xi)
    value, tape = forward(params, xi[1])
    assert value == pytest.approx(scores[1], abs=1e-14)
    assert grad_input(params, tape).shape == (5,)

  def test_rejects_wrong_input_length(self, rng):
    with pytest.raises(ArgumentError):
      forward_batch(random_critic(rng), np.zeros((2, 4)))


class TestGradients:
  @pytest.mark.parametrize("seed", range(12))
  def test_grad_params_matches_finite_differences(self, seed):
    rng = np.random.default_rng(seed)
    params = random_critic(rng)
    xi = rng.standard_normal((4, 5))
    upstream = rng.standard_normal(4)
    _, tape = forward_batch(params, xi)
    grads = grad_params(params, tape, upstream)
    for name in PARAM_NAMES:
      numeric = central_difference(
        lambda theta: float(upstream @ forward_batch(with_tensor(params, name, theta), xi)[0]), getattr(params, name)
      )
      np.testing.assert_allclose(grads[name], numeric, rtol=1e-5, atol=1e-8, err_msg=name)

  @pytest.mark.parametrize("seed", range(12))
  def test_grad_input_matches_finite_differences(self, seed):
    rng = np.random.default_rng(100 + seed)
    params = random_critic(rng)
    xi = rng.standard_normal(5)
    value, tape = forward(params, xi)
    numeric = central_difference(lambda v: forward(params, v)[0], xi)
    np.testing.assert_allclose(grad_input(params, tape), numeric, rtol=1e-5, atol=1e-8)

  @pytest.mark.parametrize("seed", range(12))
  def test_gradient_penalty_matches_finite_differences(self, seed):
    rng = np.random.default_rng(200 + seed)
    params = random_critic(rng)
    xi = rng.standard_normal((3, 5))
    value, grads = gradient_penalty(params, xi)
    assert value >= 0
    for name in PARAM_NAMES:
      numeric = central_difference(lambda theta: gradient_penalty(with_tensor(params, name, theta), xi)[0], getattr(params, name))
      np.testing.assert_allclose(grads[name], numeric, rtol=1e-5, atol=1e-8, err_msg=name)

  def test_gradient_penalty_value(self, rng):
    params = random_critic(rng)
    xi = rng.standard_normal((5, 5))
    _, tape = forward_batch(params, xi)
    norms = np.linalg.norm(grad_input(params, tape), axis=1)
    assert gradient_penalty(params, xi)[0] == pytest.approx(np.sum((norms - 1.0) ** 2), rel=1e-12)

  @pytest.mark.parametrize("seed", range(5))
  def test_gradient_penalty_matches_autograd(self, seed):
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(300 + seed)
    params = random_critic(rng, ell=10, m=6)
    xi = rng.standard_normal((7, 6))

    tensors = {name: torch.tensor(value, dtype=torch.float64, requires_grad=True) for name, value in params.tensors().items()}
    sigmas = torch.tensor(params.sigmas, dtype=torch.float64)
    inputs = torch.tensor(xi, dtype=torch.float64, requires_grad=True)
    h1 = torch.relu(inputs @ (tensors["W1"] / sigmas[0]).T + tensors["b1"])
    h2 = torch.relu(h1 @ (tensors["W2"] / sigmas[1]).T + tensors["b2"])
    scores = h2 @ (tensors["w3"][0] / sigmas[2]) + tensors["b3"][0]
    (input_grads,) = torch.autograd.grad(scores.sum(), inputs, create_graph=True)
    penalty = ((input_grads.norm(dim=1) - 1.0) ** 2).sum()
    oracle = torch.autograd.grad(penalty, [tensors[name] for name in PARAM_NAMES], allow_unused=True)

    value, grads = gradient_penalty(params, xi)
    assert value == pytest.approx(penalty.item(), rel=1e-12)
    for name, expected in zip(PARAM_NAMES, oracle):
      expected = np.zeros_like(grads[name]) if expected is None else expected.detach().numpy()
      np.testing.assert_allclose(grads[name], expected, rtol=1e-10, atol=1e-12, err_msg=name)


class TestGradientUtilities:
  def test_clip_scales_to_max_norm(self, rng):
    grads = {name: rng.standard_normal(3) * 10 for name in PARAM_NAMES}
    clipped = clip_grad_norm(grads, 1.0)
    assert global_norm(clipped) == pytest.approx(1.0)
    np.testing.assert_allclose(clipped["W1"] / grads["W1"], clipped["b3"] / grads["b3"])

  def test_clip_leaves_small_gradients(self, rng):
    grads = {name: np.full(2, 0.01) for name in PARAM_NAMES}
    assert clip_grad_norm(grads, 1.0) is grads

  def test_combine(self):
    ones = {name: np.ones(2) for name in PARAM_NAMES}
    twos = {name: np.full(2, 2.0) for name in PARAM_NAMES}
    np.testing.assert_array_equal(combine((-1.0, ones), (3.0, twos))["W2"], [5.0, 5.0])


class TestCheckpoint:
  def test_restores_exact_values(self, rng, tmp_path):
    params = spectral_normalize(random_critic(rng))
    save_checkpoint(params, tmp_path / "critic", 1234)
    restored, iteration = load_checkpoint(tmp_path / "critic")
    assert iteration == 1234
    for name in (*PARAM_NAMES, "u1", "u2", "sigmas"):
      np.testing.assert_array_equal(getattr(restored, name), getattr(params, name))
    xi = rng.standard_normal((2, 5))
    np.testing.assert_array_equal(forward_batch(restored, xi)[0], forward_batch(params, xi)[0])
