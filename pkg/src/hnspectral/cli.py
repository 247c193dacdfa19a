"""Command-line front end.

Problem files are JSON documents with top-level keys ``potential``, ``f``,
``F`` and ``solver``::

    {"potential": {"type": "constant", "c": 1.0},
     "f": {"h0": 0.0, "h": 0.0, "poles": [{"hk": 2.0, "delta": 1.0}]},
     "F": {"h0": 0.0, "h": 1.0, "poles": []},
     "solver": {"n_max": 300}}

Exit codes: 0 ok, 1 verification failed, 2 config error, 3 solver error,
4 recovery-shape error, 5 recovery convergence error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from typing import Optional

from .direct_solver import PotentialSpec, ProblemSpec, SolverParams, Spectrum, find_eigenvalues
from .errors import (
    BracketingFailure,
    DegenerateEigenfunction,
    IntegrationFailure,
    NoConvergence,
    NonPositiveNorming,
    NotAnEigenvalue,
    NotHerglotz,
    NotPositiveDefinite,
    PoleProximity,
    UnderdeterminedProblem,
)
from .hn_functions import RationalHNFunction, omega_poly
from .identity_engine import residuals
from .inverse_recovery import PartialSpectrum, recover_boundary_coefficient, recover_missing
from .spectral_sums import sigma_vector

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_RECOVERY_SHAPE = 4
EXIT_RECOVERY_CONVERGENCE = 5

_SOLVER_ERRORS = (
    IntegrationFailure,
    BracketingFailure,
    NotAnEigenvalue,
    NonPositiveNorming,
    DegenerateEigenfunction,
    PoleProximity,
)


class ConfigError(Exception):
    pass


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# --- serialization -------------------------------------------------------------


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _encode(obj.item(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: insertion-ordered keys, floats with 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def spectrum_to_csv(spectrum: Spectrum) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "lambda", "gamma", "beta", "chi_prime"])
    for d in spectrum.data:
        row = [d.n] + [("" if v is None else format(v, ".17g")) for v in (d.lambda_n, d.gamma_n, d.beta_n, d.chi_prime)]
        writer.writerow(row)
    return buf.getvalue()


def _write(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    # Write to a sibling temp file first so a failure never leaves a partial result.
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_json(path: str, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} file {path!r}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{what} file {path!r} must contain a JSON object")
    return data


# --- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    output: Optional[str] = None
    fmt: str = "json"
    tail: bool = True
    threshold: float = 1e-4
    spectrum_in: Optional[str] = None
    spectrum_out: Optional[str] = None


def parse_problem(data: dict, n_max: Optional[int] = None) -> ProblemSpec:
    """Validate and build a :class:`ProblemSpec` from the config document."""
    unknown = set(data) - {"potential", "f", "F", "solver"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        q = PotentialSpec.from_dict(data.get("potential", {"type": "zero"}))
        f = RationalHNFunction.from_dict(data.get("f", {}))
        F = RationalHNFunction.from_dict(data.get("F", {}))
        solver = dict(data.get("solver", {}))
        if n_max is not None:
            solver["n_max"] = n_max
        params = SolverParams.from_dict(solver)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(str(exc)) from exc
    return ProblemSpec(q, f, F, params)


def _build_config(args) -> RunConfig:
    if args.n_max is not None and args.n_max < 1:
        raise ConfigError("n_max must be ≥ 1")
    threshold = getattr(args, "threshold", 1e-4)
    if not threshold > 0:
        raise ConfigError("threshold must be positive")
    if args.config is not None:
        problem = parse_problem(_read_json(args.config, "config"), args.n_max)
    else:
        problem = None
    return RunConfig(
        problem=problem,
        output=args.output,
        fmt=args.format,
        tail=not getattr(args, "no_tail", False),
        threshold=threshold,
        spectrum_in=args.spectrum_in,
        spectrum_out=args.spectrum_out,
    )


def _load_spectrum(path: str) -> Spectrum:
    try:
        return Spectrum.from_dict(_read_json(path, "spectrum"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid spectrum file {path!r}: {exc}") from exc


def _obtain_spectrum(config: RunConfig) -> Spectrum:
    if config.spectrum_in:
        spectrum = _load_spectrum(config.spectrum_in)
    else:
        if config.problem is None:
            raise ConfigError("a config file or --spectrum-in is required")
        try:
            spectrum = find_eigenvalues(config.problem)
        except _SOLVER_ERRORS as exc:
            raise _Exit(EXIT_SOLVER, f"find_eigenvalues failed: {type(exc).__name__}: {exc}") from exc
    if config.spectrum_out:
        _write(dumps(spectrum.to_dict()), config.spectrum_out)
    return spectrum


# --- commands ------------------------------------------------------------------


def cmd_spectrum(config: RunConfig) -> int:
    spectrum = _obtain_spectrum(config)
    text = spectrum_to_csv(spectrum) if config.fmt == "csv" else dumps(spectrum.to_dict())
    _write(text, config.output)
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    if config.problem is None:
        raise ConfigError("verify needs a config file for f")
    spectrum = _obtain_spectrum(config)
    sig = sigma_vector(spectrum, tail=config.tail, ind_f=config.problem.ind_f)
    om = omega_poly(config.problem.f)
    res = residuals(om, sig)
    worst = float(max(abs(r) for r in res))
    ok = worst < config.threshold
    report = {
        "ind_f": sig.ind_f,
        "n_used": sig.n_used,
        "sigmas": list(sig.sigmas),
        "tail_estimates": list(sig.tail_estimates),
        "omegas": list(om.omegas),
        "residuals": [float(r) for r in res],
        "max_residual": worst,
        "threshold": config.threshold,
        "passed": ok,
    }
    for k, r in enumerate(res):
        print(f"residual[{k}] = {r:.3e}", file=sys.stderr)
    print(f"max |residual| = {worst:.3e} ({'ok' if ok else 'FAILED'}, threshold {config.threshold:g})", file=sys.stderr)
    _write(dumps(report), config.output)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_recover_bc(config: RunConfig, ind_f: int) -> int:
    spectrum = _obtain_spectrum(config)
    try:
        f, info = recover_boundary_coefficient(spectrum, ind_f, tail=config.tail, full_output=True)
    except (NotHerglotz, NotPositiveDefinite) as exc:
        raise _Exit(EXIT_RECOVERY_SHAPE, f"recover_boundary_coefficient failed: {type(exc).__name__}: {exc}") from exc
    res = [float(r) for r in info["residuals"]]
    report = {
        "f": f.to_dict(),
        "ind_f": ind_f,
        "sigmas": list(info["sigmas"].sigmas),
        "tail_estimates": list(info["sigmas"].tail_estimates),
        "omegas": list(info["omegas"].omegas),
        "residuals": res,
        "max_residual": max(abs(r) for r in res),
    }
    _write(dumps(report), config.output)
    return EXIT_OK


def cmd_recover_missing(config: RunConfig, partial_in: str) -> int:
    if config.problem is None:
        raise ConfigError("recover-missing needs a config file for f and F")
    try:
        partial = PartialSpectrum.from_dict(_read_json(partial_in, "partial spectrum"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid partial spectrum file {partial_in!r}: {exc}") from exc
    try:
        completed, info = recover_missing(partial, config.problem.f, config.problem.F, tail=config.tail, full_output=True)
    except (NoConvergence, UnderdeterminedProblem) as exc:
        raise _Exit(EXIT_RECOVERY_CONVERGENCE, f"recover_missing failed: {type(exc).__name__}: {exc}") from exc
    missing = {s.n for s in partial.missing}
    report = {
        "recovered": [d.to_dict() for d in completed.data if d.n in missing],
        "residual": info["residual"],
        "iterations": info["iterations"],
        "spectrum": completed.to_dict(),
    }
    if config.spectrum_out:
        _write(dumps(completed.to_dict()), config.spectrum_out)
    _write(dumps(report), config.output)
    return EXIT_OK


def cmd_selfcheck(verbose: bool = True) -> int:
    from ._selfcheck import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_VERIFY_FAILED


# --- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hnspectral",
        description="Spectra, spectral sums and recovery for Schrodinger problems with rational "
        "Herglotz-Nevanlinna boundary conditions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n-max", type=int, default=None, help="number of eigenvalues (overrides the config)")
    common.add_argument("--spectrum-in", default=None, help="read the spectrum from this JSON file instead of solving")
    common.add_argument("--spectrum-out", default=None, help="also save the spectrum used to this JSON file")
    common.add_argument("-o", "--output", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-tail", action="store_true", help="disable the asymptotic tail correction")

    p = sub.add_parser("spectrum", parents=[common], help="compute eigenvalues and norming constants")
    p.add_argument("config", nargs="?")

    p = sub.add_parser("verify", parents=[common], help="check the identities against a computed spectrum")
    p.add_argument("config")
    p.add_argument("--threshold", type=float, default=1e-4)

    p = sub.add_parser("recover-bc", parents=[common], help="recover f from spectral data")
    p.add_argument("config", nargs="?")
    p.add_argument("--ind-f", type=int, required=True)

    p = sub.add_parser("recover-missing", parents=[common], help="recover missing eigenvalues / norming constants")
    p.add_argument("config")
    p.add_argument("partial_in", help="partial spectrum JSON with a 'missing' list")

    sub.add_parser("selfcheck", help="run the built-in oracle suite")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selfcheck":
            return cmd_selfcheck()
        config = _build_config(args)
        if args.command == "spectrum":
            return cmd_spectrum(config)
        if args.command == "verify":
            return cmd_verify(config)
        if args.command == "recover-bc":
            if args.ind_f < 0:
                raise ConfigError("ind_f must be nonnegative")
            return cmd_recover_bc(config, args.ind_f)
        return cmd_recover_missing(config, args.partial_in)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
