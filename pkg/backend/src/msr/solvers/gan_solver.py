"""
Adversarial reconstruction: alternating critic ascent and generator (x, p) descent.

The critic maximizes sum_b D(real_b) - D(sim_b) - lambda * GP(int_b) (WGAN-GP). The generator
minimizes L_G = -sum_b sum_s q[b, s] D(M_s x + eps_b) where q are Gumbel-Softmax relaxed
location samples, so L_G is differentiable in the PMF logits.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.configuration.log import get_logger, log_fields
from src.configuration.solver_config import GanConfig
from src.msr.critic import (
  CriticParams,
  clip_grad_norm,
  combine,
  forward_batch,
  grad_input,
  grad_params,
  gradient_penalty,
  init_critic,
  save_checkpoint,
  spectral_normalize,
)
from src.msr.exceptions import ArgumentError, ContractViolationError, SolverAbortError
from src.msr.forward_model import sample_locations, scatter_segments, shift_indices
from src.msr.metrics import rel_error, tv_distance
from src.msr.optim import NormalizedGradientDescent, SGDMomentum, decayed
from src.msr.relaxation import gumbel_softmax, logits_vjp
from src.msr.rng import RngStreams
from src.msr.solvers.base_solver import BaseSolver, SolveResult
from src.msr.types import MeasurementSet, SegmentPmf, Signal

logger = get_logger()

HISTORY_HEADER = ("iter", "critic_loss", "gen_loss", "rel_error", "tv")


@dataclass
class TrainerState:
  config: GanConfig
  data: np.ndarray
  sigma: float
  x: np.ndarray
  logits: np.ndarray
  critic: CriticParams
  critic_opt: SGDMomentum
  x_opt: SGDMomentum
  p_opt: NormalizedGradientDescent
  streams: RngStreams
  indices: np.ndarray
  iteration: int = 0
  batch_order: Optional[np.ndarray] = None
  batch_cursor: int = 0
  epoch: int = 0

  @property
  def x_est(self) -> Signal:
    return Signal(self.x.copy())

  @property
  def pmf_est(self) -> SegmentPmf:
    return SegmentPmf(self.logits.copy())

  @property
  def updates_pmf(self) -> bool:
    return self.config.mode == "joint"


def init_trainer(
  config: GanConfig,
  measurements: MeasurementSet,
  x0: Optional[Signal] = None,
  p0: Optional[SegmentPmf] = None,
  fixed_pmf: Optional[SegmentPmf] = None,
) -> TrainerState:
  """
  x starts i.i.d. N(0, x_init_std^2) unless given; p starts uniform (zero logits).
  known-pmf mode pins p to `fixed_pmf`, fixed-uniform-pmf mode pins it to uniform.
  """
  d, m = measurements.d, measurements.m
  streams = RngStreams(config.seed)

  x = x0.values.copy() if x0 is not None else streams["init"].normal(0.0, config.x_init_std, d)
  if x.size != d:
    raise ArgumentError(f"initial signal has length {x.size}, measurements need {d}")

  if config.mode == "known-pmf":
    if fixed_pmf is None:
      raise ArgumentError("known-pmf mode needs the true PMF")
    logits = fixed_pmf.logits.copy()
  elif config.mode == "joint" and p0 is not None:
    logits = p0.logits.copy()
  else:
    logits = np.zeros(d)
  if logits.size != d:
    raise ArgumentError(f"PMF has {logits.size} locations, measurements need {d}")

  critic = spectral_normalize(init_critic(config.ell, m, streams["critic"]))
  sigma = measurements.sigma if config.sigma is None else config.sigma

  return TrainerState(
    config=config,
    data=measurements.data,
    sigma=float(sigma),
    x=x,
    logits=logits,
    critic=critic,
    critic_opt=SGDMomentum(config.alpha_phi, config.momentum),
    x_opt=SGDMomentum(config.alpha_x, config.momentum),
    p_opt=NormalizedGradientDescent(config.alpha_p),
    streams=streams,
    indices=shift_indices(d, m),
  )


def next_real_batch(state: TrainerState) -> np.ndarray:
  """B rows drawn without replacement within an epoch; the order is reshuffled every epoch."""
  n_rows = state.data.shape[0]
  picked: List[np.ndarray] = []
  needed = state.config.B
  while needed > 0:
    if state.batch_order is None or state.batch_cursor >= n_rows:
      state.batch_order = state.streams["batches"].permutation(n_rows)
      state.batch_cursor = 0
      state.epoch += 1
    take = state.batch_order[state.batch_cursor : state.batch_cursor + needed]
    state.batch_cursor += take.size
    needed -= take.size
    picked.append(take)
  return state.data[np.concatenate(picked)]


def simulate_batch(state: TrainerState, B: int) -> np.ndarray:
  """Hard samples M_s x + eps with s ~ p via Gumbel-Max."""
  locations = sample_locations(state.pmf_est, B, state.streams["locations"])
  noise = state.streams["noise"].standard_normal((B, state.indices.shape[1]))
  return state.x[state.indices[locations]] + state.sigma * noise


def critic_step(state: TrainerState, real_batch: np.ndarray) -> float:
  """
  One clipped SGD-momentum step on the critic. Returns the minimized critic loss
  -(sum D(real) - sum D(sim) - lambda * GP).
  """
  B = real_batch.shape[0]
  critic = state.critic
  sim_batch = simulate_batch(state, B)
  alpha = state.streams["interpolation"].uniform(0.0, 1.0, (B, 1))
  interpolated = alpha * real_batch + (1.0 - alpha) * sim_batch

  real_scores, real_tape = forward_batch(critic, real_batch)
  sim_scores, sim_tape = forward_batch(critic, sim_batch)
  if not (np.any(real_tape.z2 > 0) or np.any(sim_tape.z2 > 0)):
    # every parameter gradient is zero from here on, so the critic cannot recover
    raise SolverAbortError("critic_step", state.iteration, "every second-layer unit is inactive on the batch", reason="has a dead critic")
  gp, gp_grads = gradient_penalty(critic, interpolated)
  loss = -(float(real_scores.sum()) - float(sim_scores.sum()) - state.config.lam * gp)
  if not np.isfinite(loss):
    raise SolverAbortError("critic_step", state.iteration, f"gp={gp}")

  grads = combine(
    (-1.0, grad_params(critic, real_tape, 1.0)),
    (1.0, grad_params(critic, sim_tape, 1.0)),
    (state.config.lam, gp_grads),
  )
  grads = clip_grad_norm(grads, state.config.clip_norm)
  state.critic_opt.step(critic.tensors(), grads)
  spectral_normalize(critic)
  return loss


def generator_objective(critic: CriticParams, x: np.ndarray, q: np.ndarray, noise: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
  """
  L_G = -sum_b sum_s q[b, s] D(M_s x + noise_b), evaluated with all d shifts per batch element.

  Returns (L_G, dL_G/dx, dL_G/dq). The noise of element b is shared by its d shift terms.
  """
  B, d = q.shape
  m = noise.shape[1]
  indices = shift_indices(d, m)
  inputs = x[indices][None, :, :] + noise[:, None, :]
  scores, tape = forward_batch(critic, inputs.reshape(B * d, m))
  scores = scores.reshape(B, d)
  input_grads = grad_input(critic, tape).reshape(B, d, m)
  weighted = -np.einsum("bs,bsn->sn", q, input_grads)
  return -float(np.sum(q * scores)), scatter_segments(weighted, d), -scores


def generator_step(state: TrainerState) -> float:
  config = state.config
  m = state.indices.shape[1]
  relaxed = gumbel_softmax(state.pmf_est, config.tau, config.B, state.streams["gumbel"])
  noise = state.sigma * state.streams["noise"].standard_normal((config.B, m))

  loss, grad_x, grad_q = generator_objective(state.critic, state.x, relaxed.q, noise)
  if not np.isfinite(loss):
    raise SolverAbortError("generator_step", state.iteration)

  # alpha_x is a per-sample rate: L_G sums over B elements
  state.x_opt.step({"x": state.x}, {"x": grad_x / config.B})
  if state.updates_pmf:
    state.p_opt.step(state.logits, logits_vjp(relaxed.q, grad_q, config.tau))
  return loss


def lr_schedule(state: TrainerState) -> Tuple[float, float, float]:
  config = state.config
  state.critic_opt.lr = decayed(state.critic_opt.lr, state.iteration, config.decay_every_phi, config.decay_factor)
  state.x_opt.lr = decayed(state.x_opt.lr, state.iteration, config.decay_every_x, config.decay_factor)
  state.p_opt.lr = decayed(state.p_opt.lr, state.iteration, config.decay_every_p, config.decay_factor)
  return state.critic_opt.lr, state.x_opt.lr, state.p_opt.lr


def _diagnostics(state: TrainerState, ground_truth: Optional[Tuple[Signal, SegmentPmf]]) -> Tuple[Optional[float], Optional[float]]:
  probs = state.pmf_est.probs
  if not (np.all(probs > 0) and abs(probs.sum() - 1.0) < 1e-9):
    raise ContractViolationError(f"PMF estimate left the simplex at iteration {state.iteration}")
  if ground_truth is None:
    return None, None
  x_true, p_true = ground_truth
  return rel_error(x_true, state.x_est)[0], tv_distance(p_true, state.pmf_est)[0]


def run_trainer(state: TrainerState, ground_truth: Optional[Tuple[Signal, SegmentPmf]] = None) -> List[Sequence[Optional[float]]]:
  """Run `total_iters` outer iterations (n_disc critic steps, one generator step, schedule)."""
  config = state.config
  history: List[Sequence[Optional[float]]] = []
  for _ in tqdm(range(config.total_iters), desc="Training", disable=not config.verbose):
    critic_loss = 0.0
    for _ in range(config.n_disc):
      critic_loss = critic_step(state, next_real_batch(state))
    gen_loss = generator_step(state)
    state.iteration += 1
    lr_schedule(state)

    rel, tv = None, None
    if state.iteration % config.eval_every == 0 or state.iteration == config.total_iters:
      rel, tv = _diagnostics(state, ground_truth)
      logger.info(
        f"Iteration {state.iteration}/{config.total_iters}",
        extra=log_fields({"critic_loss": critic_loss, "gen_loss": gen_loss, "rel_error": rel, "tv": tv, "epoch": state.epoch}),
      )
    if state.iteration % config.log_every == 0 or rel is not None or tv is not None:
      history.append((state.iteration, critic_loss, gen_loss, rel, tv))
  return history


def train(
  config: GanConfig,
  measurements: MeasurementSet,
  x0: Optional[Signal] = None,
  p0: Optional[SegmentPmf] = None,
  fixed_pmf: Optional[SegmentPmf] = None,
  ground_truth: Optional[Tuple[Signal, SegmentPmf]] = None,
) -> Tuple[Signal, SegmentPmf, List[Sequence[Optional[float]]]]:
  state = init_trainer(config, measurements, x0=x0, p0=p0, fixed_pmf=fixed_pmf)
  history = run_trainer(state, ground_truth)
  return state.x_est, state.pmf_est, history


class GanSolver(BaseSolver):
  name = "gan"
  config: GanConfig

  def __init__(
    self,
    config: GanConfig,
    measurements: MeasurementSet,
    ground_truth: Optional[Tuple[Signal, SegmentPmf]] = None,
    fixed_pmf: Optional[SegmentPmf] = None,
  ):
    super().__init__(config, measurements, ground_truth)
    self.fixed_pmf = fixed_pmf
    self.state: Optional[TrainerState] = None

  def solve(self, x0: Signal, p0: SegmentPmf) -> SolveResult:
    self.state = init_trainer(self.config, self.measurements, x0=x0, p0=p0, fixed_pmf=self.fixed_pmf)
    history = run_trainer(self.state, self.ground_truth)
    return SolveResult(
      x_hat=self.state.x_est,
      p_hat=self.state.pmf_est,
      history_header=HISTORY_HEADER,
      history=history,
      extra={"iterations": self.state.iteration, "epochs": self.state.epoch},
    )

  def _save_extra(self, result: SolveResult, run_dir: Path) -> None:
    if self.config.checkpoint and self.state is not None:
      save_checkpoint(self.state.critic, run_dir / "critic", self.state.iteration)
