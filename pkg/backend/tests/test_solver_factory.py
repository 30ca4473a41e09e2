import pytest

from src.configuration.solver_config import EmConfig, GanConfig
from src.msr.exceptions import ArgumentError
from src.msr.solvers.em_solver import EmSolver
from src.msr.solvers.gan_solver import GanSolver
from src.msr.solvers.moment_solver import SifSolver
from src.msr.solvers.solver_factory import create_solver


@pytest.mark.parametrize("name,expected", [("gan", GanSolver), ("em", EmSolver), ("sif", SifSolver)])
def test_dict_configs_are_validated(name, expected, small_measurements):
  solver = create_solver(name, {"seed": 3}, small_measurements)
  assert isinstance(solver, expected)
  assert solver.config.seed == 3


def test_known_pmf_reaches_the_gan_solver(small_truth, small_measurements):
  _, p = small_truth
  solver = create_solver("gan", GanConfig(mode="known-pmf"), small_measurements, fixed_pmf=p)
  assert solver.fixed_pmf is p


def test_unknown_solver(small_measurements):
  with pytest.raises(ArgumentError):
    create_solver("lbfgs", {}, small_measurements)


def test_mismatched_config(small_measurements):
  with pytest.raises(ArgumentError):
    create_solver("gan", EmConfig(), small_measurements)
