"""Command-line entry point for the eFGM toolkit.

Run as ``python -m runtime.cli <command> [options]``. Exit status is 0 on
success, 2 on invalid input and 1 on numerical failure; errors are written to
standard error as one JSON object.
"""

import argparse
import json
import logging
import os
import sys
from io import StringIO
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from efgm.errors import EFGMError, InadmissibleError, InvalidInputError, NumericError
from efgm.estimation import DEFAULT_MAX_ITER, DEFAULT_TOL, em_fit, pseudo_observations
from efgm.evaluation import copula_cdf, copula_density
from efgm.geometry import admissibility_check, enumerate_extreme_points
from efgm.model_spec import ModelSpec, load_model
from efgm.ordering import end_nd_pmf, end_theta, epd_nd_pmf, epd_theta
from efgm.sampling import sample, sample_mixture
from efgm.study import simulation_study

logger = logging.getLogger(__name__)

SAMPLE_FLOAT_FORMAT = "%.17g"
THREADS_ENV = "EFGM_THREADS"


# ---------------------------------------------------------------------------
# Local / S3 I/O
# ---------------------------------------------------------------------------


def _is_s3_path(path: str) -> bool:
    """Check if path is S3 path (starts with s3://)."""
    return path.startswith("s3://")


def _s3_client():
    import boto3
    return boto3.client("s3")


def _split_s3(path: str):
    bucket, key = path.replace("s3://", "").split("/", 1)
    return bucket, key


def _read_csv(path: str, **kwargs: Any) -> pd.DataFrame:
    """Read CSV file from S3 or local filesystem."""
    if _is_s3_path(path):
        bucket, key = _split_s3(path)
        obj = _s3_client().get_object(Bucket=bucket, Key=key)
        return pd.read_csv(obj["Body"], **kwargs)
    if not os.path.exists(path):
        raise FileNotFoundError(f"Data file not found: {path}")
    return pd.read_csv(path, **kwargs)


def _write_text(text: str, path: Optional[str]) -> None:
    """Write to S3, a local file, or standard output when no path is given."""
    if path is None:
        sys.stdout.write(text)
    elif _is_s3_path(path):
        bucket, key = _split_s3(path)
        _s3_client().put_object(Bucket=bucket, Key=key, Body=text)
    else:
        directory = os.path.dirname(path)
        if directory and not os.path.exists(directory):
            os.makedirs(directory)
        with open(path, "w") as f:
            f.write(text)


def _write_csv(df: pd.DataFrame, path: Optional[str], float_format: Optional[str] = None) -> None:
    buffer = StringIO()
    df.to_csv(buffer, index=False, float_format=float_format, lineterminator="\n")
    _write_text(buffer.getvalue(), path)


def _emit(df: pd.DataFrame, fmt: str, path: Optional[str] = None) -> None:
    if fmt == "json":
        _write_text(json.dumps(df.to_dict(orient="records")) + "\n", path)
    else:
        _write_csv(df, path)


def _emit_mapping(payload: Dict[str, Any], path: Optional[str] = None) -> None:
    _write_text(json.dumps(payload) + "\n", path)


def _read_data(path: str) -> np.ndarray:
    """Numeric matrix from a CSV with an optional header row."""
    frame = _read_csv(path, header=None)
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if len(numeric) and numeric.iloc[0].isna().all():
        numeric = numeric.iloc[1:]
    if numeric.empty or numeric.isna().any().any():
        raise InvalidInputError(f"Data file {path} must contain only numeric values", invariant="data-format")
    return numeric.to_numpy(dtype=float)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _resolve_threads(value: Optional[int]) -> int:
    raw = value if value is not None else os.environ.get(THREADS_ENV, 1)
    try:
        threads = int(raw)
    except (TypeError, ValueError):
        raise InvalidInputError(f"Thread count must be an integer, got {raw!r}", invariant="threads")
    if threads < 1:
        raise InvalidInputError(f"Thread count must be at least 1, got {threads}", invariant="threads")
    return threads


def _parse_point(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InvalidInputError(f"Point must be comma-separated reals, got {text!r}", invariant="point-format")


def _theta_columns(d: int) -> List[str]:
    return [f"theta_{k}" for k in range(2, d + 1)]


def _cmd_check(args: argparse.Namespace) -> None:
    spec = load_model(args.model)
    theta = spec.representation() if spec.type == "theta" else spec.to_model().theta
    report = admissibility_check(theta)
    if not report.admissible:
        m = report.worst_m
        raise InadmissibleError(
            f"Inadmissible parameters: sign constraint margin g({m}) = {report.margins[m]:.6g} < 0",
            invariant="theta-admissible",
            index=m,
        )
    if args.format == "json":
        _emit_mapping(report.to_dict())
    else:
        _write_csv(pd.DataFrame({"m": range(len(report.margins)), "margin": report.margins}), None)


def _cmd_convert(args: argparse.Namespace) -> None:
    model = load_model(args.model).to_model()
    if args.to == "theta":
        values, columns = model.theta.theta, _theta_columns(model.d)
    elif args.to == "ndpmf":
        values, columns = model.pmf.p, [f"p_{k}" for k in range(model.d + 1)]
    else:
        values, columns = model.zeta.zeta, [f"zeta_{k}" for k in range(model.d + 1)]
    _emit(pd.DataFrame([list(values)], columns=columns), args.format)


def extreme_points_frame(d: int) -> pd.DataFrame:
    """One row per extreme point: j1, j2, p_j1, p_j2, theta_2..theta_d."""
    rows = []
    for pt in enumerate_extreme_points(d):
        rows.append([pt.j1, pt.j2, pt.pmf.p[pt.j1], pt.pmf.p[pt.j2], *pt.theta.theta])
    return pd.DataFrame(rows, columns=["j1", "j2", "p_j1", "p_j2", *_theta_columns(d)])


def bounds_frame(d: int) -> pd.DataFrame:
    """END and EPD parameters and N_d laws."""
    columns = ["bound", *_theta_columns(d), *[f"p_{k}" for k in range(d + 1)]]
    rows = [
        ["END", *end_theta(d).theta, *end_nd_pmf(d).p],
        ["EPD", *epd_theta(d).theta, *epd_nd_pmf(d).p],
    ]
    return pd.DataFrame(rows, columns=columns)


def _cmd_extreme_points(args: argparse.Namespace) -> None:
    _emit(extreme_points_frame(args.d), args.format)


def _cmd_bounds(args: argparse.Namespace) -> None:
    _emit(bounds_frame(args.d), args.format)


def _emit_value(value: float, fmt: str) -> None:
    if fmt == "json":
        _emit_mapping({"value": value})
    else:
        sys.stdout.write(f"{value!r}\n")


def _cmd_cdf(args: argparse.Namespace) -> None:
    model = load_model(args.model).to_model()
    _emit_value(copula_cdf(model, _parse_point(args.point)), args.format)


def _cmd_density(args: argparse.Namespace) -> None:
    model = load_model(args.model).to_model()
    _emit_value(copula_density(model, _parse_point(args.point)), args.format)


def _cmd_sample(args: argparse.Namespace, threads: int) -> None:
    spec: ModelSpec = load_model(args.model)
    if args.mixture:
        if not spec.is_mixing:
            raise InvalidInputError(f"--mixture needs a mixing model, got type {spec.type}", invariant="model-type")
        batch = sample_mixture(spec.mixing(), args.n, spec.d, args.seed, threads=threads)
    else:
        batch = sample(spec.to_model(), args.n, args.seed, threads=threads)
    logger.info(f"Sampled {batch.n} rows of dimension {batch.d}")
    _write_csv(batch.to_frame(), args.out, float_format=SAMPLE_FLOAT_FORMAT)


def _cmd_estimate(args: argparse.Namespace, threads: int) -> None:
    data = _read_data(args.input)
    logger.info(f"Input data loaded: {data.shape[0]} rows, {data.shape[1]} columns")
    if args.pseudo_obs:
        data = pseudo_observations(data)
    fit = em_fit(data, data.shape[1], tol=args.tol, max_iter=args.max_iter, threads=threads)
    payload = {
        "theta": list(fit.theta.theta),
        "loglik": fit.loglik,
        "iterations": fit.iterations,
        "converged": fit.converged,
    }
    _emit_mapping(payload, args.out)
    if args.weights_out:
        frame = pd.DataFrame({
            "j1": [pt.j1 for pt in enumerate_extreme_points(data.shape[1])],
            "j2": [pt.j2 for pt in enumerate_extreme_points(data.shape[1])],
            "weight": fit.weights.values,
        })
        _write_csv(frame, args.weights_out)


def _cmd_simstudy(args: argparse.Namespace, threads: int) -> None:
    model = load_model(args.model).to_model() if args.model else None
    result = simulation_study(args.d, args.n, args.reps, args.seed, model=model,
                              tol=args.tol, max_iter=args.max_iter, threads=threads)
    summary = result.summary.reset_index().rename(columns={"index": "statistic"})
    _emit(summary, args.format, args.out)
    if args.boxplot_out:
        _write_csv(result.estimates, args.boxplot_out)


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=None, help=f"Worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    parser = argparse.ArgumentParser(prog="efgm", description="Exchangeable FGM copula toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", parents=[common], help="Admissibility report for a model")
    check.add_argument("--model", required=True)

    convert = commands.add_parser("convert", parents=[common], help="Print a model in another parameterization")
    convert.add_argument("--model", required=True)
    convert.add_argument("--to", choices=("theta", "ndpmf", "zeta"), default="theta")

    extreme = commands.add_parser("extreme-points", parents=[common], help="Extreme points of the parameter set")
    extreme.add_argument("--d", type=int, required=True)

    bounds = commands.add_parser("bounds", parents=[common], help="END and EPD copulas")
    bounds.add_argument("--d", type=int, required=True)

    for name in ("cdf", "density"):
        cmd = commands.add_parser(name, parents=[common], help=f"Copula {name} at one point")
        cmd.add_argument("--model", required=True)
        cmd.add_argument("--point", required=True, help="Comma-separated coordinates")

    sampler = commands.add_parser("sample", parents=[common], help="Draw a copula sample")
    sampler.add_argument("--model", required=True)
    sampler.add_argument("--n", type=int, required=True)
    sampler.add_argument("--seed", type=int, required=True)
    sampler.add_argument("--out", default=None)
    sampler.add_argument("--mixture", action="store_true", help="Sample through the mixing variable")

    estimate = commands.add_parser("estimate", parents=[common], help="EM fit of a data set")
    estimate.add_argument("--input", required=True)
    estimate.add_argument("--pseudo-obs", action="store_true")
    estimate.add_argument("--tol", type=float, default=DEFAULT_TOL)
    estimate.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    estimate.add_argument("--out", default=None)
    estimate.add_argument("--weights-out", default=None)

    study = commands.add_parser("simstudy", parents=[common], help="Repeated sample-and-fit study")
    study.add_argument("--d", type=int, required=True)
    study.add_argument("--n", type=int, required=True)
    study.add_argument("--reps", type=int, required=True)
    study.add_argument("--seed", type=int, required=True)
    study.add_argument("--model", "--theta-file", dest="model", default=None)
    study.add_argument("--tol", type=float, default=DEFAULT_TOL)
    study.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    study.add_argument("--out", default=None)
    study.add_argument("--boxplot-out", default=None)
    return parser


def _dispatch(args: argparse.Namespace) -> None:
    simple = {
        "check": _cmd_check,
        "convert": _cmd_convert,
        "extreme-points": _cmd_extreme_points,
        "bounds": _cmd_bounds,
        "cdf": _cmd_cdf,
        "density": _cmd_density,
    }
    if args.command in simple:
        simple[args.command](args)
        return
    threads = _resolve_threads(args.threads)
    {"sample": _cmd_sample, "estimate": _cmd_estimate, "simstudy": _cmd_simstudy}[args.command](args, threads)


def _report(error: Dict[str, Any]) -> None:
    sys.stderr.write(json.dumps(error) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Exit status: 0 success, 2 invalid input, 1 numerical failure
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        logger.info(f"Command {args.command} started")
        _dispatch(args)
        logger.info(f"Command {args.command} finished")
        return 0
    except InvalidInputError as e:
        _report(e.to_dict())
        return 2
    except FileNotFoundError as e:
        _report({"error": "FileNotFoundError", "invariant": "file-exists", "message": str(e)})
        return 2
    except NumericError as e:
        logger.error(f"Numerical failure in {args.command}: {e.message}")
        _report(e.to_dict())
        return 1
    except EFGMError as e:
        _report(e.to_dict())
        return 1


if __name__ == "__main__":
    sys.exit(main())
