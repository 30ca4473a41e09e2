class MsrError(Exception):
  """Base class for all errors raised by the reconstruction toolkit"""


class ArgumentError(MsrError, ValueError):
  """An operation was called with arguments outside its domain"""


class ContractViolationError(MsrError, RuntimeError):
  """An internal contract was broken, e.g. a tape used after the parameters changed"""


class SolverAbortError(MsrError, RuntimeError):
  """A solver produced a non-finite loss or likelihood, or its critic died, and stopped"""

  def __init__(self, step: str, iteration: int, detail: str = "", reason: str = "produced a non-finite value"):
    self.step = step
    self.iteration = iteration
    message = f"{step} {reason} at iteration {iteration}"
    if detail:
      message = f"{message}: {detail}"
    super().__init__(message)
