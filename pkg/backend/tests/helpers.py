import numpy as np

from src.msr.critic import CriticParams, from_weights


def central_difference(f, theta: np.ndarray, h: float = 1e-6) -> np.ndarray:
  """Central finite-difference gradient of a scalar function of an array of any shape."""
  theta = np.array(theta, dtype=np.float64)
  grad = np.zeros_like(theta)
  for index in np.ndindex(theta.shape):
    step = np.zeros_like(theta)
    step[index] = h
    grad[index] = (f(theta + step) - f(theta - step)) / (2 * h)
  return grad


def random_critic(rng: np.random.Generator, ell: int = 8, m: int = 5, scale: float = 0.5) -> CriticParams:
  """Weights large enough that most ReLUs are active, with non-trivial normalizers."""
  params = from_weights(
    rng.normal(0.0, scale, (ell, m)),
    rng.normal(0.0, 0.1, ell),
    rng.normal(0.0, scale, (ell // 2, ell)),
    rng.normal(0.0, 0.1, ell // 2),
    rng.normal(0.0, scale, ell // 2),
    0.3,
  )
  params.sigmas = np.array([1.3, 0.8, 1.7])
  return params
