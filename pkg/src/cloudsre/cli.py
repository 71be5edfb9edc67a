"""
``cloudsre`` command line.

Exit codes: 0 success, 1 a diagnostic check failed, 2 usage or domain error
(including an unwritable ``--out``), 3 numeric anomaly (divergence guard,
non-summable series).
"""

import argparse
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .cloud import CloudParams, gen_drops
from .diagnostics import (
    ALPHA,
    BURN_IN,
    DiagnosticsReport,
    as_dict,
    check_theorem2_conditions,
    coupling_decay,
    estimate_lyapunov,
    stationarity_test,
)
from .errors import CloudSREError, DomainError, NonSummableError
from .noise import NoiseStream
from .sre import (
    AR1B,
    CoeffProcess,
    ConstA,
    ConstB,
    GaussianA,
    GaussianB,
    iterate_abs,
    iterate_linear,
    series_solution,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_ANOMALY = 0, 1, 2, 3
COMMANDS = ("generate", "simulate", "series", "lyapunov", "couple", "stationarity")
MAX_REJECTION_RATE = 0.05

_EPILOG = """\
exit codes:
  0  success
  1  a diagnostic check failed
  2  usage or domain error (bad flag, He <= 0, |rho| >= 1, unwritable --out)
  3  numeric anomaly (divergence guard tripped, series not summable)
"""


class UsageError(CloudSREError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    format: str = "json"
    out: str | None = None
    threads: int | None = None
    params: dict = field(default_factory=dict)


def _finite(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return v


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer: {text}")
    return v


def _count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _nonneg(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text}")
    return v


def _float_list(text):
    return [_finite(t) for t in text.split(",") if t.strip()]


def _int_list(text):
    return [_count(t) for t in text.split(",") if t.strip()]


def _a_source(text):
    kind, _, rest = text.partition(":")
    try:
        if kind == "const":
            return ConstA(_finite(rest))
        if kind == "gauss":
            return GaussianA(_finite(rest))
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    raise argparse.ArgumentTypeError(f"expected const:<v> or gauss:<scale>, got {text!r}")


def _b_source(text):
    kind, _, rest = text.partition(":")
    vals = _float_list(rest)
    try:
        if kind == "const" and len(vals) == 1:
            return ConstB(vals[0])
        if kind == "gauss" and len(vals) == 2:
            return GaussianB(*vals)
        if kind == "ar1" and len(vals) == 3:
            return AR1B(*vals)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    raise argparse.ArgumentTypeError(
        f"expected const:<v>, gauss:<m>,<s> or ar1:<m>,<rho>,<s>, got {text!r}"
    )


def _build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_u64, default=0, help="u64 seed (default 0)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--threads", type=_count, default=None)

    parser = _Parser(
        prog="cloudsre",
        description="p-order cloud model and its stochastic recurrence form.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"cloudsre {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(
            name,
            parents=[common],
            help=help_,
            description=help_,
            epilog=_EPILOG,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )

    p = add(
        "generate",
        "cloud drops: x_1 = R_N(En_p, He), x_i = R_N(En_{p-i+1}, |x_{i-1}|) "
        "(def 1) or x_i = En + |x_{i-1}| eps_i (def 2)",
    )
    p.add_argument("--en", type=_float_list, required=True, help="En_1,...,En_p")
    p.add_argument("--he", type=_finite, required=True)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--def", dest="definition", choices=("1", "2"), default="2")

    p = add("simulate", "trajectory of X_t = A_t X_{t-1} + B_t (linear) or A_t |X_{t-1}| + B_t (abs)")
    p.add_argument("--form", choices=("linear", "abs"), required=True)
    p.add_argument("--a", type=_a_source, required=True, help="const:<v> | gauss:<scale>")
    p.add_argument("--b", type=_b_source, required=True, help="const:<v> | gauss:<m>,<s> | ar1:<m>,<rho>,<s>")
    p.add_argument("--x0", type=_finite, default=0.0)
    p.add_argument("--steps", type=_count, required=True)

    p = add("series", "stationary solution X = sum_k (prod_{i<=k} A_{n-i}) B_{n-k-1}, truncated")
    p.add_argument("--a", type=_a_source, required=True)
    p.add_argument("--b", type=_b_source, required=True)
    p.add_argument("--kmax", type=_count, default=10_000)
    p.add_argument("--tol", type=_finite, default=1e-12)

    p = add("lyapunov", "Monte Carlo E[log|A|] for A = scale*eps vs log(scale) - (gamma + log 2)/2")
    p.add_argument("--scale", type=_finite, required=True)
    p.add_argument("--samples", type=_count, default=1_000_000)

    p = add("couple", "coupled abs-form paths; checks |D_t| <= |A_t| |D_{t-1}|")
    p.add_argument("--scale", type=_finite, default=1.0)
    p.add_argument("--b", type=_b_source, default=ConstB(1.0))
    p.add_argument("--x0", type=_finite, default=0.0)
    p.add_argument("--x0-alt", dest="x0_alt", type=_finite, default=100.0)
    p.add_argument("--steps", type=_count, default=500)

    p = add("stationarity", "KS test of X at burn-in vs burn-in + lag across replicas")
    p.add_argument("--scale", type=_finite, default=1.0)
    p.add_argument("--b", type=_b_source, default=ConstB(1.0))
    p.add_argument("--x0", type=_finite, default=0.0)
    p.add_argument("--burn-in", dest="burn_in", type=_nonneg, default=BURN_IN)
    p.add_argument("--lags", type=_int_list, default=[50, 100, 200])
    p.add_argument("--replicas", type=_count, default=500)
    return parser


def parse_args(argv):
    """Parse ``argv`` into a validated :class:`RunConfig`.

    Raises
    ------
    UsageError
        For unknown or missing flags, unparseable numbers, ``He <= 0`` or
        ``|rho| >= 1``.
    """
    ns = _build_parser().parse_args(list(argv))
    params = {
        k: v
        for k, v in vars(ns).items()
        if k not in ("command", "seed", "format", "out", "threads")
    }
    if ns.command == "generate":
        try:
            params["cloud"] = CloudParams(params.pop("en"), params.pop("he"))
        except DomainError as exc:
            raise UsageError(f"cloudsre generate: {exc}") from None
    if ns.command in ("lyapunov", "couple", "stationarity"):
        try:
            GaussianA(params["scale"])
        except DomainError as exc:
            raise UsageError(f"cloudsre {ns.command}: {exc}") from None
    if ns.command == "lyapunov" and params["samples"] < 1000:
        raise UsageError("cloudsre lyapunov: --samples must be at least 1000")
    if ns.command == "couple":
        if params["x0"] == params["x0_alt"]:
            raise UsageError("cloudsre couple: --x0 and --x0-alt must differ")
        if params["steps"] < 10:
            raise UsageError("cloudsre couple: --steps must be at least 10")
    if ns.command == "stationarity" and params["replicas"] < 50:
        raise UsageError("cloudsre stationarity: --replicas must be at least 50")
    if ns.command == "series" and not params["tol"] > 0:
        raise UsageError("cloudsre series: --tol must be positive")
    return RunConfig(ns.command, ns.seed, ns.format, ns.out, ns.threads, params)


# -- serialization ---------------------------------------------------------


def _fmt(x):
    return format(float(x), ".17g")


def _jsonable(value):
    if hasattr(value, "describe"):
        return value.describe()
    if isinstance(value, CloudParams):
        return value.to_dict()
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _meta(config):
    return {
        "command": config.command,
        "seed": config.seed,
        "parameters": _jsonable(config.params),
        "version": __version__,
    }


def _dump_json(obj):
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


# -- commands --------------------------------------------------------------


def _generate(config):
    p = config.params
    which = "def1" if p["definition"] == "1" else "def2"
    batch = gen_drops(p["cloud"], p["n"], NoiseStream(config.seed), which)
    if config.format == "csv":
        return _csv("drop", ([_fmt(v)] for v in batch.values)), EXIT_OK
    doc = {
        "params": batch.params.to_dict(),
        "seed": config.seed,
        "definition": which,
        "values": batch.values,
        "meta": _meta(config),
    }
    return _dump_json(doc), EXIT_OK


def _simulate(config):
    p = config.params
    coeffs = CoeffProcess(p["a"], p["b"])
    engine = iterate_abs if p["form"] == "abs" else iterate_linear
    traj = engine(coeffs, p["x0"], p["steps"], NoiseStream(config.seed))
    code = EXIT_ANOMALY if traj.diverged else EXIT_OK
    if config.format == "csv":
        rows = ([str(t), _fmt(x)] for t, x in enumerate(traj.values))
        return _csv("t,x", rows), code
    doc = {
        "form": traj.form,
        "x0": traj.x0,
        "seed": traj.seed,
        "diverged_at": traj.diverged_at,
        "values": traj.values,
        "meta": _meta(config),
    }
    if traj.diverged:
        doc["anomaly"] = "divergence_guard"
    return _dump_json(doc), code


def _series(config):
    p = config.params
    coeffs = CoeffProcess(p["a"], p["b"])
    try:
        s = series_solution(coeffs, NoiseStream(config.seed), p["kmax"], p["tol"])
    except NonSummableError as exc:
        doc = {"anomaly": "non_summable", "message": str(exc), "meta": _meta(config)}
        return _dump_json(doc), EXIT_ANOMALY
    if config.format == "csv":
        return _csv("value,terms_used,last_weight", [[_fmt(s.value), str(s.terms_used), _fmt(s.last_weight)]]), EXIT_OK
    return _dump_json({**as_dict(s), "meta": _meta(config)}), EXIT_OK


def _report(config, report, code=None):
    doc = {**report.to_dict(), "meta": _meta(config)}
    if code is None:
        code = EXIT_OK if report.passed else EXIT_FAILED
    return _dump_json(doc), code


def _lyapunov(config):
    p = config.params
    a = GaussianA(p["scale"])
    est = estimate_lyapunov(a, p["samples"], NoiseStream(config.seed))
    verdict = check_theorem2_conditions(
        CoeffProcess(a, ConstB(1.0)), 10_000, NoiseStream(config.seed).substream(0)
    ).verdict
    report = DiagnosticsReport(
        lyapunov={**as_dict(est), "verdict": verdict},
        checks={"estimate_within_4se_of_closed_form": est.within(est.closed_form)},
    )
    return _report(config, report)


def _couple(config):
    p = config.params
    coeffs = CoeffProcess(GaussianA(p["scale"]), p["b"])
    res = coupling_decay(coeffs, p["x0"], p["x0_alt"], p["steps"], NoiseStream(config.seed))
    section = as_dict(res)
    section["final_abs_delta"] = float(abs(res.deltas[-1]))
    report = DiagnosticsReport(
        coupling=section,
        checks={"no_contraction_violations": res.contraction_violations == 0},
    )
    if res.diverged_at is not None:
        report.anomaly = "divergence_guard"
        return _report(config, report, EXIT_ANOMALY)
    return _report(config, report)


def _stationarity(config):
    p = config.params
    coeffs = CoeffProcess(GaussianA(p["scale"]), p["b"])
    res = stationarity_test(
        coeffs,
        p["x0"],
        p["burn_in"],
        p["lags"],
        p["replicas"],
        NoiseStream(config.seed),
        threads=config.threads,
    )
    report = DiagnosticsReport(stationarity={**as_dict(res), "alpha": ALPHA})
    if res.diverged:
        report.anomaly = "divergence_guard"
        report.checks = {"no_divergence": False}
        return _report(config, report, EXIT_ANOMALY)
    report.checks = {"rejection_rate_at_most_5pct": res.rejection_rate <= MAX_REJECTION_RATE}
    return _report(config, report)


_HANDLERS = {
    "generate": _generate,
    "simulate": _simulate,
    "series": _series,
    "lyapunov": _lyapunov,
    "couple": _couple,
    "stationarity": _stationarity,
}


def run(config, stdout=None, stderr=None):
    """Execute ``config``; write the output and return the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if config.threads is None:
        config.threads = os.cpu_count() or 1
    try:
        text, code = _HANDLERS[config.command](config)
    except DomainError as exc:
        print(f"cloudsre {config.command}: {exc}", file=stderr)
        return EXIT_USAGE
    except CloudSREError as exc:
        print(f"cloudsre {config.command}: numeric anomaly: {exc}", file=stderr)
        return EXIT_ANOMALY
    if config.out is None:
        stdout.write(text)
    else:
        try:
            with open(config.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cloudsre: cannot write {config.out}: {exc}", file=stderr)
            return EXIT_USAGE
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return exc.code or 0
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
