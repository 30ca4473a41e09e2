from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel

from src.configuration.log import get_logger, log_fields
from src.msr.io import write_rows, write_xy
from src.msr.types import MeasurementSet, SegmentPmf, Signal


@dataclass
class SolveResult:
  x_hat: Signal
  p_hat: SegmentPmf
  history_header: Tuple[str, ...]
  history: List[Sequence[Any]] = field(default_factory=list)
  aborted: bool = False
  extra: Dict[str, Any] = field(default_factory=dict)


class BaseSolver(ABC):
  """Base class for reconstruction solvers"""

  name: str = "base"

  def __init__(self, config: BaseModel, measurements: MeasurementSet, ground_truth: Optional[Tuple[Signal, SegmentPmf]] = None):
    """
    Initialize the solver

    Args:
        config (BaseModel): The solver's hyperparameters
        measurements (MeasurementSet): The observed segments
        ground_truth (Optional[Tuple[Signal, SegmentPmf]]): Diagnostics only, never used by the updates
    """
    self.config = config
    self.measurements = measurements
    self.ground_truth = ground_truth
    self.logger = get_logger()
    self.logger.info(
      f"Initialized {self.name} solver",
      extra=log_fields({"solver": self.name, "d": measurements.d, "m": measurements.m, "N": measurements.N, **config.model_dump()}),
    )

  @abstractmethod
  def solve(self, x0: Signal, p0: SegmentPmf) -> SolveResult:
    """All solvers must implement this method to reconstruct (x, p) from an initial guess"""
    pass

  def _save_extra(self, result: SolveResult, run_dir: Path) -> None:
    """Hook for solver-specific outputs (checkpoints, traces)"""
    pass

  def save(self, result: SolveResult, run_dir: Union[str, Path]) -> Path:
    """Standard run-directory layout shared by every solver"""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_rows(run_dir / "history.csv", result.history_header, result.history)
    write_xy(run_dir / "x_hat.dat", result.x_hat.values)
    write_xy(run_dir / "p_hat.dat", result.p_hat.probs)
    self._save_extra(result, run_dir)
    return run_dir
