from typing import Optional

from pydantic import BaseModel, Field


class EvalReport(BaseModel):
  rel_error: float = Field(..., ge=0.0, description="Shift-aligned squared error of the signal, relative to ||x||^2")
  tv: float = Field(..., ge=0.0, le=1.0, description="Half the minimal L1 distance between the PMFs over cyclic shifts")
  aligning_shift_x: int = Field(..., description="Cyclic shift applied to x_hat that minimizes the signal error")
  aligning_shift_p: int = Field(..., description="Cyclic shift applied to p_hat that minimizes the PMF distance")
  tv_joint: Optional[float] = Field(None, description="Diagnostic: TV distance after applying the signal's aligning shift to p_hat")


class InitResult(BaseModel):
  init: int = Field(..., ge=0, description="Initialization index")
  seed: int = Field(..., description="Seed used for this initialization")
  rel_error: float = Field(float("nan"), description="NaN when the init failed or no ground truth is available")
  tv: float = Field(float("nan"), description="NaN when the init failed or no ground truth is available")
  wallclock_s: float = Field(0.0, ge=0.0, description="Wall-clock time of the solve")
  aborted: bool = Field(False, description="True when the solver stopped on a non-finite value or a dead critic")
