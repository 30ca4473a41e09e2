from typing import Any, Dict, Optional, Tuple, Union

from pydantic import BaseModel

from src.configuration.solver_config import EmConfig, GanConfig, SifConfig
from src.msr.exceptions import ArgumentError
from src.msr.solvers.base_solver import BaseSolver
from src.msr.solvers.em_solver import EmSolver
from src.msr.solvers.gan_solver import GanSolver
from src.msr.solvers.moment_solver import SifSolver
from src.msr.types import MeasurementSet, SegmentPmf, Signal

SOLVER_CONFIGS = {"gan": GanConfig, "em": EmConfig, "sif": SifConfig}


def create_solver(
  name: str,
  solver_config: Union[BaseModel, Dict[str, Any]],
  measurements: MeasurementSet,
  ground_truth: Optional[Tuple[Signal, SegmentPmf]] = None,
  fixed_pmf: Optional[SegmentPmf] = None,
) -> BaseSolver:
  """Factory function to create the solver registered under `name`"""

  if name not in SOLVER_CONFIGS:
    raise ArgumentError(f"Unsupported solver: {name}")
  if isinstance(solver_config, dict):
    solver_config = SOLVER_CONFIGS[name].model_validate(solver_config)
  if not isinstance(solver_config, SOLVER_CONFIGS[name]):
    raise ArgumentError(f"{name} solver needs a {SOLVER_CONFIGS[name].__name__}, got {type(solver_config).__name__}")

  if name == "gan":
    return GanSolver(solver_config, measurements, ground_truth, fixed_pmf)
  elif name == "em":
    return EmSolver(solver_config, measurements, ground_truth)
  else:
    return SifSolver(solver_config, measurements, ground_truth)
