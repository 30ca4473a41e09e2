"""
Command-line entry point: `python -m src <generate|solve|sweep|eval> [options]`.

Values are layered preset < config file < flags. Exit codes: 0 success, 1 argument or
file error, 2 solver abort.
"""

import argparse
import copy
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from src.configuration.config_file import assign_setting, merge_overrides, read_config_file
from src.configuration.environment import MSR_OUTPUT_DIR, MSR_THREADS
from src.configuration.log import get_logger, log_fields
from src.configuration.solver_config import AVAILABLE_PRESETS, ExperimentConfig
from src.msr.exceptions import ArgumentError, SolverAbortError
from src.msr.harness import evaluate_run, generate, solve, sweep

logger = get_logger()

EXIT_OK = 0
EXIT_ARGUMENT = 1
EXIT_ABORT = 2


class CliParser(argparse.ArgumentParser):
  """argparse exits with status 2 on bad flags; route those through ArgumentError instead."""

  def error(self, message: str):
    raise ArgumentError(message)


def _csv(value: str) -> List[str]:
  return [item.strip() for item in value.split(",") if item.strip()]


def _split_kind(value: Optional[str]) -> Tuple[Optional[str], Optional[str]]:
  """`from-file:path/to/p.dat` -> ("from-file", "path/to/p.dat")."""
  if value is None:
    return None, None
  kind, sep, path = value.partition(":")
  return (kind, path) if sep else (value, None)


def _key_value(value: str) -> Tuple[str, str]:
  key, sep, raw = value.partition("=")
  if not sep or not key.strip():
    raise argparse.ArgumentTypeError(f"expected key=value, got {value!r}")
  return key.strip(), raw.strip()


def _add_common(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--config", help="INI config file ([data], [run], [gan], [em], [sif] sections)")
  parser.add_argument("--preset", choices=sorted(AVAILABLE_PRESETS), help="Start from a predefined experiment")
  parser.add_argument("--seed", type=int)
  parser.add_argument("--out", help=f"Output directory (default {MSR_OUTPUT_DIR})")
  parser.add_argument("--threads", type=int, help=f"Parallel inits (default MSR_THREADS={MSR_THREADS})")
  parser.add_argument(
    "--set",
    dest="settings",
    action="append",
    type=_key_value,
    default=[],
    metavar="KEY=VALUE",
    help="Any config key, e.g. gan.alpha_x=1e-3",
  )
  parser.add_argument("--verbose", action="store_true", help="Show solver progress bars")


def _add_data(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--signal", help="sine | triangle | random-gaussian | from-file:<path>")
  parser.add_argument("--d", type=int)
  parser.add_argument("--pmf", help="uniform | one-hot | random-dirichlet | two-gaussians | from-file:<path>")
  parser.add_argument("--pmf-index", type=int)
  parser.add_argument("--m", type=int)
  parser.add_argument("--N", type=int)
  parser.add_argument("--snr", type=_csv, help="Comma-separated SNR values, 'inf' for noiseless")
  parser.add_argument("--sigma", type=float, help="Noise level; overrides --snr")


def _add_solver(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--n-inits", type=int)
  parser.add_argument("--measurements", help="Measurement file written by `generate`")
  parser.add_argument("--x-true", help="Ground-truth signal for diagnostics")
  parser.add_argument("--p-true", help="Ground-truth PMF for diagnostics and known-pmf mode")
  parser.add_argument("--mode", choices=["joint", "known-pmf", "fixed-uniform-pmf"])
  parser.add_argument("--total-iters", type=int)
  parser.add_argument("--ell", type=int)
  parser.add_argument("--batch-size", type=int)
  parser.add_argument("--n-disc", type=int)
  parser.add_argument("--tau", type=float)
  parser.add_argument("--lambda", dest="lam", type=float)
  parser.add_argument("--em-max-iters", type=int)
  parser.add_argument("--sif-max-iters", type=int)


def build_parser() -> argparse.ArgumentParser:
  parser = CliParser(prog="msr-gan", description="Multi-segment reconstruction experiments")
  verbs = parser.add_subparsers(dest="verb", required=True, parser_class=CliParser)

  generate_parser = verbs.add_parser("generate", help="Synthesize a measurement file and ground truth")
  _add_common(generate_parser)
  _add_data(generate_parser)

  solve_parser = verbs.add_parser("solve", help="Reconstruct (x, p) from n_inits initializations")
  _add_common(solve_parser)
  _add_data(solve_parser)
  _add_solver(solve_parser)
  solve_parser.add_argument("--solver", choices=["gan", "em", "sif"])

  sweep_parser = verbs.add_parser("sweep", help="Compare solvers over segment lengths or SNRs")
  _add_common(sweep_parser)
  _add_data(sweep_parser)
  _add_solver(sweep_parser)
  sweep_parser.add_argument("--solvers", type=_csv, help="Comma-separated solvers, e.g. gan,em,sif")
  sweep_parser.add_argument("--sweep-axis", choices=["m", "snr"])
  sweep_parser.add_argument("--sweep-values", type=_csv)

  eval_parser = verbs.add_parser("eval", help="Score a run directory against ground truth")
  eval_parser.add_argument("run_dir")
  eval_parser.add_argument("--x-true", required=True)
  eval_parser.add_argument("--p-true", required=True)
  return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
  def arg(name: str) -> Any:
    return getattr(args, name, None)

  signal, signal_file = _split_kind(arg("signal"))
  pmf, pmf_file = _split_kind(arg("pmf"))
  overrides: Dict[str, Any] = {
    "signal": signal,
    "signal_file": signal_file,
    "pmf": pmf,
    "pmf_file": pmf_file,
    "pmf_index": arg("pmf_index"),
    "d": arg("d"),
    "m": arg("m"),
    "N": arg("N"),
    "snr": arg("snr"),
    "sigma": arg("sigma"),
    "seed": arg("seed"),
    "out": arg("out"),
    "threads": arg("threads"),
    "n_inits": arg("n_inits"),
    "measurements": arg("measurements"),
    "x_true": arg("x_true"),
    "p_true": arg("p_true"),
    "solver": arg("solver"),
    "solvers": arg("solvers"),
    "sweep_axis": arg("sweep_axis"),
    "sweep_values": arg("sweep_values"),
    "gan": {
      "mode": arg("mode"),
      "total_iters": arg("total_iters"),
      "ell": arg("ell"),
      "B": arg("batch_size"),
      "n_disc": arg("n_disc"),
      "tau": arg("tau"),
      "lambda": arg("lam"),
    },
    "em": {"max_iters": arg("em_max_iters")},
    "sif": {"max_iters": arg("sif_max_iters")},
  }
  if arg("verbose"):
    for section in ("gan", "em", "sif"):
      overrides[section]["verbose"] = True
  return overrides


def _settings(pairs: Sequence[Tuple[str, str]]) -> Dict[str, Any]:
  # same parsing as a config file line
  values: Dict[str, Any] = {}
  for key, raw in pairs:
    assign_setting(values, key, raw)
  return values


def load_config(args: argparse.Namespace) -> ExperimentConfig:
  values: Dict[str, Any] = copy.deepcopy(AVAILABLE_PRESETS[args.preset]) if args.preset else {}
  if args.config:
    values = merge_overrides(values, read_config_file(args.config), skip_none=False)
  values = merge_overrides(values, _settings(args.settings), skip_none=False)
  values = merge_overrides(values, _overrides(args))
  values.setdefault("threads", MSR_THREADS)
  values.setdefault("out", MSR_OUTPUT_DIR)
  return ExperimentConfig.from_dict(values)


def run(args: argparse.Namespace) -> int:
  if args.verb == "eval":
    for directory, report in evaluate_run(args.run_dir, args.x_true, args.p_true):
      print(f"{directory}: {report.model_dump_json()}")
    return EXIT_OK

  config = load_config(args)
  if args.verb == "generate":
    outcome = generate(config)
    print(f"Wrote {outcome['path']} (sigma={outcome['sigma']:.6g}, realized SNR={outcome['realized_snr']:.6g})")
  elif args.verb == "solve":
    outcome = solve(config)
    print(f"Run directory: {outcome.run_dir}")
    if outcome.all_aborted:
      logger.error("Every initialization aborted", extra=log_fields({"run_dir": outcome.run_dir}))
      return EXIT_ABORT
  else:
    print(f"Sweep directory: {sweep(config)}")
  return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
  try:
    args = build_parser().parse_args(argv)
    return run(args)
  except (ArgumentError, ValidationError, OSError) as e:
    logger.error(f"Argument error: {e}")
    print(f"error: {e}", file=sys.stderr)
    return EXIT_ARGUMENT
  except SolverAbortError as e:
    logger.error(f"Solver aborted: {e}")
    print(f"error: {e}", file=sys.stderr)
    return EXIT_ABORT
