"""
Three-layer fully connected ReLU critic with spectral normalization.

Every gradient here is derived by hand for this fixed architecture:

  z1 = A1 xi + b1,  h1 = relu(z1)
  z2 = A2 h1 + b2,  h2 = relu(z2)
  D  = a3 . h2 + b3

where A_k = W_k / sigma_k are the spectrally normalized weights. The input gradient is
grad_xi D = A1^T (r1 * (A2^T (r2 * a3))) with r_k the ReLU activity masks, so the gradient
penalty can be differentiated in closed form (the ReLU second derivative is zero almost
everywhere). sigma_k is treated as a constant during backprop.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from src.configuration.log import get_logger
from src.msr.exceptions import ArgumentError, ContractViolationError
from src.msr.io import read_key_values, read_matrix, write_key_values, write_matrix

logger = get_logger()

PARAM_NAMES = ("W1", "b1", "W2", "b2", "w3", "b3")
WEIGHT_NAMES = ("W1", "W2", "w3")
INIT_STD = 0.01
DEGENERATE_SIGMA = 1e-12

Grads = Dict[str, np.ndarray]


@dataclass
class CriticParams:
  W1: np.ndarray
  b1: np.ndarray
  W2: np.ndarray
  b2: np.ndarray
  w3: np.ndarray
  b3: np.ndarray
  u1: np.ndarray
  u2: np.ndarray
  u3: np.ndarray
  # a sigma of 1 means the raw weight is used as is
  sigmas: np.ndarray = field(default_factory=lambda: np.ones(3))
  version: int = 0

  @property
  def ell(self) -> int:
    return int(self.W1.shape[0])

  @property
  def m(self) -> int:
    return int(self.W1.shape[1])

  def effective(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return self.W1 / self.sigmas[0], self.W2 / self.sigmas[1], self.w3[0] / self.sigmas[2]

  def tensors(self) -> Dict[str, np.ndarray]:
    return {name: getattr(self, name) for name in PARAM_NAMES}

  def touch(self) -> None:
    """Invalidate tapes recorded against the previous parameter values."""
    self.version += 1

  def copy(self) -> "CriticParams":
    return CriticParams(
      **{name: getattr(self, name).copy() for name in (*PARAM_NAMES, "u1", "u2", "u3", "sigmas")},
      version=self.version,
    )


@dataclass
class CriticTape:
  """Cached activations of one batch forward pass."""

  xi: np.ndarray
  z1: np.ndarray
  h1: np.ndarray
  z2: np.ndarray
  h2: np.ndarray
  version: int
  single: bool = False

  @property
  def r1(self) -> np.ndarray:
    return (self.z1 > 0).astype(np.float64)

  @property
  def r2(self) -> np.ndarray:
    return (self.z2 > 0).astype(np.float64)


def _unit(rng: np.random.Generator, n: int) -> np.ndarray:
  u = rng.standard_normal(n)
  return u / np.linalg.norm(u)


def from_weights(W1, b1, W2, b2, w3, b3) -> CriticParams:
  """Wrap explicit weights (raw, un-normalized) into a parameter set."""
  W1, W2 = np.asarray(W1, dtype=np.float64), np.asarray(W2, dtype=np.float64)
  w3 = np.asarray(w3, dtype=np.float64).reshape(1, -1)
  return CriticParams(
    W1=W1,
    b1=np.asarray(b1, dtype=np.float64).reshape(-1),
    W2=W2,
    b2=np.asarray(b2, dtype=np.float64).reshape(-1),
    w3=w3,
    b3=np.asarray(b3, dtype=np.float64).reshape(1),
    u1=np.ones(W1.shape[0]) / np.sqrt(W1.shape[0]),
    u2=np.ones(W2.shape[0]) / np.sqrt(W2.shape[0]),
    u3=np.ones(1),
  )


def init_critic(ell: int, m: int, rng: np.random.Generator) -> CriticParams:
  if ell < 2 or ell % 2:
    raise ArgumentError(f"layer width must be an even integer >= 2, got {ell}")
  if m < 1:
    raise ArgumentError(f"input length must be positive, got {m}")
  half = ell // 2
  return CriticParams(
    W1=rng.normal(0.0, INIT_STD, (ell, m)),
    b1=np.zeros(ell),
    W2=rng.normal(0.0, INIT_STD, (half, ell)),
    b2=np.zeros(half),
    w3=rng.normal(0.0, INIT_STD, (1, half)),
    b3=np.zeros(1),
    u1=_unit(rng, ell),
    u2=_unit(rng, half),
    u3=np.ones(1),
  )


def power_iteration(W: np.ndarray, u: np.ndarray, n_iters: int = 1) -> Tuple[float, np.ndarray]:
  """Estimate the largest singular value of W; returns (sigma_hat, updated u)."""
  sigma = 1.0
  for _ in range(n_iters):
    v = W.T @ u
    v_norm = np.linalg.norm(v)
    if v_norm < DEGENERATE_SIGMA:
      return 1.0, u
    v /= v_norm
    Wv = W @ v
    sigma = float(np.linalg.norm(Wv))
    if sigma < DEGENERATE_SIGMA:
      return 1.0, u
    u = Wv / sigma
  return sigma, u


def spectral_normalize(params: CriticParams, n_iters: int = 1) -> CriticParams:
  """
  One (or more) power-iteration steps per weight matrix. The effective weights used by
  every forward pass are W / sigma_hat.
  """
  for k, (name, u_name) in enumerate(zip(WEIGHT_NAMES, ("u1", "u2", "u3"))):
    sigma, u = power_iteration(getattr(params, name), getattr(params, u_name), n_iters)
    setattr(params, u_name, u)
    params.sigmas[k] = sigma
  params.touch()
  return params


def forward_batch(params: CriticParams, xi: np.ndarray) -> Tuple[np.ndarray, CriticTape]:
  xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
  if xi.shape[1] != params.m:
    raise ArgumentError(f"critic expects inputs of length {params.m}, got {xi.shape[1]}")
  A1, A2, a3 = params.effective()
  z1 = xi @ A1.T + params.b1
  h1 = np.maximum(z1, 0.0)
  z2 = h1 @ A2.T + params.b2
  h2 = np.maximum(z2, 0.0)
  scores = h2 @ a3 + params.b3[0]
  return scores, CriticTape(xi=xi, z1=z1, h1=h1, z2=z2, h2=h2, version=params.version)


def forward(params: CriticParams, xi: np.ndarray) -> Tuple[float, CriticTape]:
  xi = np.asarray(xi, dtype=np.float64)
  if xi.ndim != 1:
    raise ArgumentError("forward takes a single measurement; use forward_batch for matrices")
  scores, tape = forward_batch(params, xi[None, :])
  tape.single = True
  return float(scores[0]), tape


def _check_tape(params: CriticParams, tape: CriticTape) -> None:
  if tape.version != params.version:
    raise ContractViolationError(f"tape recorded at parameter version {tape.version}, parameters are at {params.version}")


def _to_raw(params: CriticParams, effective_grads: Tuple[np.ndarray, np.ndarray, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  gA1, gA2, ga3 = effective_grads
  return gA1 / params.sigmas[0], gA2 / params.sigmas[1], ga3.reshape(1, -1) / params.sigmas[2]


def grad_params(params: CriticParams, tape: CriticTape, upstream: Union[float, np.ndarray]) -> Grads:
  """Reverse-mode gradient of sum_b upstream_b * D(xi_b) with respect to every parameter."""
  _check_tape(params, tape)
  _, A2, a3 = params.effective()
  up = np.broadcast_to(np.asarray(upstream, dtype=np.float64), (tape.xi.shape[0],))
  dz2 = up[:, None] * a3[None, :] * tape.r2
  dz1 = (dz2 @ A2) * tape.r1
  W1, W2, w3 = _to_raw(params, (dz1.T @ tape.xi, dz2.T @ tape.h1, up @ tape.h2))
  return {
    "W1": W1,
    "b1": dz1.sum(axis=0),
    "W2": W2,
    "b2": dz2.sum(axis=0),
    "w3": w3,
    "b3": np.array([up.sum()]),
  }


def _input_gradient_parts(params: CriticParams, tape: CriticTape) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  A1, A2, a3 = params.effective()
  c2 = tape.r2 * a3[None, :]
  c1 = tape.r1 * (c2 @ A2)
  return c1 @ A1, c1, c2


def grad_input(params: CriticParams, tape: CriticTape) -> np.ndarray:
  """grad_xi D for every row of the tape (a vector when the tape holds a single input)."""
  _check_tape(params, tape)
  g, _, _ = _input_gradient_parts(params, tape)
  return g[0] if tape.single else g


def gradient_penalty(params: CriticParams, xi_int: np.ndarray) -> Tuple[float, Grads]:
  """
  sum_b (||grad_xi D(xi_b)|| - 1)^2 and its exact parameter gradient (double backprop).

  Biases only move the ReLU kinks, so their penalty gradient is zero almost everywhere.
  """
  _, tape = forward_batch(params, xi_int)
  A1, A2, _ = params.effective()
  g, c1, c2 = _input_gradient_parts(params, tape)
  norms = np.linalg.norm(g, axis=1)
  value = float(np.sum((norms - 1.0) ** 2))

  # d gp / d g, with the subgradient 0 where the input gradient vanishes
  scale = np.divide(2.0 * (norms - 1.0), norms, out=np.zeros_like(norms), where=norms > 0)
  e = scale[:, None] * g
  f = tape.r1 * (e @ A1.T)
  gA1 = c1.T @ e
  gA2 = c2.T @ f
  ga3 = np.sum(tape.r2 * (f @ A2.T), axis=0)
  W1, W2, w3 = _to_raw(params, (gA1, gA2, ga3))
  return value, {
    "W1": W1,
    "b1": np.zeros_like(params.b1),
    "W2": W2,
    "b2": np.zeros_like(params.b2),
    "w3": w3,
    "b3": np.zeros(1),
  }


def global_norm(grads: Grads) -> float:
  return float(np.sqrt(sum(float(np.sum(g**2)) for g in grads.values())))


def clip_grad_norm(grads: Grads, max_norm: float = 1.0) -> Grads:
  norm = global_norm(grads)
  if norm <= max_norm or norm == 0.0:
    return grads
  factor = max_norm / norm
  return {name: g * factor for name, g in grads.items()}


def combine(*weighted: Tuple[float, Grads]) -> Grads:
  """Linear combination sum_k c_k * grads_k over matching parameter names."""
  return {name: sum(c * grads[name] for c, grads in weighted) for name in PARAM_NAMES}


def save_checkpoint(params: CriticParams, directory: Union[str, Path], iteration: int) -> Path:
  directory = Path(directory)
  directory.mkdir(parents=True, exist_ok=True)
  for name in (*PARAM_NAMES, "u1", "u2", "u3", "sigmas"):
    write_matrix(directory / f"{name}.txt", np.atleast_2d(getattr(params, name)))
  write_key_values(directory / "critic.meta", {"ell": params.ell, "m": params.m, "iteration": iteration})
  return directory


def load_checkpoint(directory: Union[str, Path]) -> Tuple[CriticParams, int]:
  directory = Path(directory)
  meta = read_key_values(directory / "critic.meta")
  tensors = {name: read_matrix(directory / f"{name}.txt") for name in (*PARAM_NAMES, "u1", "u2", "u3", "sigmas")}
  params = CriticParams(
    W1=tensors["W1"],
    b1=tensors["b1"].reshape(-1),
    W2=tensors["W2"],
    b2=tensors["b2"].reshape(-1),
    w3=tensors["w3"].reshape(1, -1),
    b3=tensors["b3"].reshape(1),
    u1=tensors["u1"].reshape(-1),
    u2=tensors["u2"].reshape(-1),
    u3=tensors["u3"].reshape(-1),
    sigmas=tensors["sigmas"].reshape(-1),
  )
  if params.ell != int(meta["ell"]) or params.m != int(meta["m"]):
    raise ContractViolationError(f"checkpoint in {directory} does not match its critic.meta")
  logger.info(f"Loaded critic checkpoint from {directory} at iteration {meta['iteration']}")
  return params, int(meta["iteration"])
