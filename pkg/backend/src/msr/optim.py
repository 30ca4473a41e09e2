from typing import Dict, Mapping, Optional

import numpy as np

from src.msr.exceptions import ArgumentError


class SGDMomentum:
  """
  Plain SGD with heavy-ball momentum over a dict of named numpy arrays:
  v <- momentum * v + grad;  param <- param - lr * v.
  Parameters are updated in place.
  """

  def __init__(self, lr: float, momentum: float = 0.9):
    if lr <= 0.0:
      raise ArgumentError(f"Invalid learning rate: {lr}")
    if not 0.0 <= momentum < 1.0:
      raise ArgumentError(f"Invalid momentum: {momentum}")
    self.lr = lr
    self.momentum = momentum
    self.velocity: Optional[Dict[str, np.ndarray]] = None

  def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
    if self.velocity is None:
      self.velocity = {name: np.zeros_like(value) for name, value in params.items()}
    for name, param in params.items():
      velocity = self.velocity[name]
      velocity *= self.momentum
      velocity += grads[name]
      param -= self.lr * velocity


class NormalizedGradientDescent:
  """Steps of length lr along the unit-L2-normalized negative gradient (no momentum)."""

  def __init__(self, lr: float):
    if lr <= 0.0:
      raise ArgumentError(f"Invalid learning rate: {lr}")
    self.lr = lr

  def step(self, param: np.ndarray, grad: np.ndarray) -> None:
    norm = np.linalg.norm(grad)
    if norm > 0.0:
      param -= self.lr * grad / norm


def decayed(rate: float, iteration: int, every: int, factor: float) -> float:
  """Apply one decay when `iteration` is a positive multiple of `every`."""
  if iteration > 0 and iteration % every == 0:
    return rate * factor
  return rate
