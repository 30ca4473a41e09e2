import math
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

GanMode = Literal["joint", "known-pmf", "fixed-uniform-pmf"]
SolverName = Literal["gan", "em", "sif"]
SignalKind = Literal["sine", "triangle", "random-gaussian", "from-file"]
PmfKind = Literal["uniform", "one-hot", "random-dirichlet", "two-gaussians", "from-file"]
SweepAxis = Literal["m", "snr"]

DEFAULT_N = 30_000


class GanConfig(BaseModel):
  model_config = ConfigDict(populate_by_name=True, extra="forbid")

  B: int = Field(200, ge=1, description="Batch size")
  n_disc: int = Field(4, ge=1, description="Critic steps per generator step")
  lam: float = Field(10.0, ge=0.0, alias="lambda", description="Gradient penalty weight")
  tau: float = Field(0.5, gt=0.0, description="Gumbel-Softmax temperature")
  alpha_phi: float = Field(1e-3, gt=0.0, description="Critic learning rate")
  alpha_x: float = Field(1e-3, gt=0.0, description="Signal learning rate, applied to the batch-averaged gradient")
  alpha_p: float = Field(1e-3, gt=0.0, description="PMF logits learning rate (normalized-gradient steps)")
  decay_factor: float = Field(0.9, gt=0.0, le=1.0)
  decay_every_phi: int = Field(2000, ge=1)
  decay_every_x: int = Field(2000, ge=1)
  decay_every_p: int = Field(3000, ge=1)
  momentum: float = Field(0.9, ge=0.0, lt=1.0)
  clip_norm: float = Field(1.0, gt=0.0, description="Global norm the critic gradient is clipped to")
  total_iters: int = Field(30_000, ge=1, description="30000 for high SNR, 50000 for low SNR")
  ell: int = Field(100, ge=2, description="Critic hidden width; layers are ell, ell/2, 1")
  mode: GanMode = "joint"
  sigma: Optional[float] = Field(None, ge=0.0, description="Generator noise level; None reads it from the measurements")
  x_init_std: float = Field(1.0, gt=0.0)
  eval_every: int = Field(500, ge=1, description="Diagnostics and logging interval")
  log_every: int = Field(10, ge=1, description="Loss history interval")
  checkpoint: bool = True
  seed: int = Field(0, ge=0)
  verbose: bool = False

  @field_validator("ell")
  @classmethod
  def _even_width(cls, ell: int) -> int:
    if ell % 2:
      raise ValueError(f"ell must be even, got {ell}")
    return ell


class EmConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  max_iters: int = Field(5000, ge=1)
  tol: float = Field(1e-8, gt=0.0, description="Relative log-likelihood change that stops the iterations")
  sigma_floor: float = Field(1e-3, gt=0.0, description="Lower bound on the noise level used by the likelihood")
  seed: int = Field(0, ge=0)
  verbose: bool = False


class SifConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  w1: float = Field(1.0, ge=0.0)
  w2: Optional[float] = Field(None, ge=0.0, description="None means 1/m")
  w3: Optional[float] = Field(None, ge=0.0, description="None means 1/m^2")
  tol: float = Field(1e-10, gt=0.0, description="Gradient-norm stopping tolerance")
  max_iters: int = Field(20_000, ge=1)
  armijo_c: float = Field(1e-4, gt=0.0, lt=1.0)
  initial_step: float = Field(1.0, gt=0.0)
  min_step: float = Field(1e-16, gt=0.0)
  seed: int = Field(0, ge=0)
  verbose: bool = False

  def weights(self, m: int) -> tuple[float, float, float]:
    return (self.w1, 1.0 / m if self.w2 is None else self.w2, 1.0 / m**2 if self.w3 is None else self.w3)


class ExperimentConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  signal: SignalKind = "random-gaussian"
  signal_file: Optional[str] = None
  d: int = Field(60, ge=1)
  pmf: PmfKind = "uniform"
  pmf_file: Optional[str] = None
  pmf_index: int = Field(0, ge=0, description="Location of the one-hot PMF")
  pmf_concentration: float = Field(1.0, gt=0.0, description="Dirichlet concentration")
  pmf_centres: List[float] = Field(default_factory=lambda: [0.25, 0.7], description="Mixture centres as fractions of d")
  pmf_widths: List[float] = Field(default_factory=lambda: [0.08, 0.12], description="Mixture widths as fractions of d")
  pmf_weights: List[float] = Field(default_factory=lambda: [0.6, 0.4])
  m: int = Field(18, ge=1)
  N: int = Field(DEFAULT_N, ge=1)
  snr: List[float] = Field(default_factory=lambda: [math.inf])
  sigma: Optional[float] = Field(None, ge=0.0, description="Explicit noise level; overrides snr when set")
  solver: SolverName = "gan"
  solvers: List[SolverName] = Field(default_factory=lambda: ["gan", "em", "sif"], description="Solvers compared in a sweep")
  sweep_axis: SweepAxis = "m"
  sweep_values: List[float] = Field(default_factory=list)
  n_inits: int = Field(10, ge=1)
  seed: int = Field(0, ge=0)
  out: str = "runs"
  measurements: Optional[str] = None
  x_true: Optional[str] = None
  p_true: Optional[str] = None
  threads: int = Field(1, ge=1)
  gan: GanConfig = Field(default_factory=GanConfig)
  em: EmConfig = Field(default_factory=EmConfig)
  sif: SifConfig = Field(default_factory=SifConfig)

  @field_validator("snr")
  @classmethod
  def _positive_snr(cls, values: List[float]) -> List[float]:
    if not values or any(not v > 0 for v in values):
      raise ValueError("every SNR must be positive (use inf for noiseless data)")
    return values

  @model_validator(mode="after")
  def _check_lengths(self) -> "ExperimentConfig":
    if self.m > self.d:
      raise ValueError(f"segment length m={self.m} exceeds signal length d={self.d}")
    if self.signal == "from-file" and not self.signal_file:
      raise ValueError("signal=from-file needs signal_file")
    if self.pmf == "from-file" and not self.pmf_file:
      raise ValueError("pmf=from-file needs pmf_file")
    if self.pmf == "one-hot" and self.pmf_index >= self.d:
      raise ValueError(f"pmf_index={self.pmf_index} outside [0, {self.d})")
    return self

  @classmethod
  def from_dict(cls, config_dict: Dict[str, Any]) -> "ExperimentConfig":
    return cls.model_validate(config_dict)

  def to_flat_dict(self) -> Dict[str, Any]:
    """Every effective value, with solver sections flattened as `gan.B`, `em.tol`, ..."""
    flat: Dict[str, Any] = {}
    for key, value in self.model_dump(by_alias=True).items():
      if isinstance(value, dict):
        flat.update({f"{key}.{sub}": sub_value for sub, sub_value in value.items()})
      else:
        flat[key] = value
    return flat


def _gan_preset(ell: int) -> Dict[str, Any]:
  return {"ell": ell}


# Predefined experiment configurations
SINE_DEMO_PRESET: Dict[str, Any] = {
  "signal": "sine",
  "d": 64,
  "m": 24,
  "N": 50_000,
  "pmf": "two-gaussians",
  "snr": [math.inf],
  "gan": _gan_preset(100),
}

SEGMENT_SWEEP_PRESET: Dict[str, Any] = {
  "signal": "random-gaussian",
  "d": 60,
  "m": 15,
  "N": DEFAULT_N,
  "sigma": 0.01,
  "pmf": "random-dirichlet",
  "sweep_axis": "m",
  "sweep_values": [15, 20, 25, 30, 35, 40, 45, 50, 55],
  "gan": _gan_preset(300),
}

SNR_SWEEP_PRESET: Dict[str, Any] = {
  "signal": "random-gaussian",
  "d": 60,
  "m": 18,
  "N": DEFAULT_N,
  "pmf": "random-dirichlet",
  "sweep_axis": "snr",
  "sweep_values": [10**e for e in (-0.5, 0.2, 0.9, 1.6, 2.3, 3.0)],
  "gan": {**_gan_preset(300), "total_iters": 50_000},
}

# Dictionary of available presets
AVAILABLE_PRESETS = {"sine-demo": SINE_DEMO_PRESET, "m-sweep": SEGMENT_SWEEP_PRESET, "snr-sweep": SNR_SWEEP_PRESET}
