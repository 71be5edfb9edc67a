"""
Empirical checks of the stationarity theory for the abs-form recursion.

* :func:`estimate_lyapunov` and :func:`estimate_logplus_b` estimate the two
  moment conditions ``E[log|A|] < 0`` and ``E[log+|B|] < inf``.
* :func:`coupling_decay` runs two copies on one coefficient realization and
  checks the pathwise contraction ``|D_t| <= |A_t| |D_{t-1}|``.
* :func:`stationarity_test` and :func:`fixed_point_check` compare marginals
  with the two-sample Kolmogorov-Smirnov test (asymptotic p-values).
* :func:`check_theorem2_conditions` turns the moment estimates into a verdict.

All acceptance bands are four standard errors wide.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from scipy import special, stats

from .errors import DegenerateSampleError, DomainError, NumericAnomalyError
from .special_fn import logplus_abs_normal_quadrature
from .sre import (
    CoefficientDrawer,
    CoeffProcess,
    ConstA,
    ConstB,
    GaussianB,
    _run,
    iterate_ensemble,
)

__all__ = [
    "ALPHA",
    "BURN_IN",
    "N_SIGMA",
    "Estimate",
    "CouplingResult",
    "KSResult",
    "KSStat",
    "StationarityResult",
    "Moments",
    "Theorem2Check",
    "DiagnosticsReport",
    "estimate_lyapunov",
    "estimate_logplus_b",
    "coupling_decay",
    "ks_2samp",
    "stationarity_test",
    "fixed_point_check",
    "moments",
    "check_theorem2_conditions",
    "as_dict",
]

ALPHA = 0.01
N_SIGMA = 4.0
BURN_IN = 500
# Relative roundoff allowance for the contraction inequality.
CONTRACTION_RTOL = 1e-12
# Smallest |D| kept in the slope fit; avoids logs of underflowed values.
SLOPE_FLOOR = 1e-300


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo mean with its standard error and, if known, the exact value."""

    estimate: float
    stderr: float
    closed_form: float | None = None
    n: int = 0

    def within(self, target, n_sigma=N_SIGMA):
        if self.stderr == 0:
            return self.estimate == target
        return abs(self.estimate - target) <= n_sigma * self.stderr


def estimate_lyapunov(a_source, n, stream):
    """Sample mean of ``log|A_i|`` over ``n`` draws.

    Exact zeros (possible only through floating point) are redrawn and
    counted.

    Raises
    ------
    DomainError
        If ``n < 1000``.
    NumericAnomalyError
        If more than ``n / 1000`` zeros had to be redrawn, or a constant
        source is zero.
    """
    if n < 1000:
        raise DomainError(f"n must be at least 1000, got {n}")
    closed = a_source.log_moment()
    if a_source.draws == 0:
        a = float(a_source.sample(None, 1)[0])
        if a == 0:
            raise NumericAnomalyError("constant A = 0 has log|A| = -inf")
        return Estimate(math.log(abs(a)), 0.0, closed, int(n))

    A = a_source.sample(stream.normals(n), n)
    zeros = 0
    bad = np.flatnonzero(A == 0)
    while bad.size:
        zeros += bad.size
        if zeros > n / 1000:
            raise NumericAnomalyError(f"{zeros} exact zeros among {n} draws of A")
        A[bad] = a_source.sample(stream.normals(bad.size), bad.size)
        bad = np.flatnonzero(A == 0)
    logs = np.log(np.abs(A))
    return Estimate(float(logs.mean()), float(logs.std(ddof=1) / math.sqrt(n)), closed, int(n))


def estimate_logplus_b(b_source, n, stream):
    """Sample mean of ``max(log|B_i|, 0)`` over ``n`` consecutive draws."""
    if n < 1000:
        raise DomainError(f"n must be at least 1000, got {n}")
    _, B = CoefficientDrawer(CoeffProcess(ConstA(0.0), b_source), stream).draw(n)
    with np.errstate(divide="ignore"):
        lp = np.maximum(np.log(np.abs(B)), 0.0)
    closed = None
    if isinstance(b_source, ConstB):
        closed = max(math.log(abs(b_source.value)), 0.0) if b_source.value else 0.0
    elif isinstance(b_source, GaussianB):
        closed = logplus_abs_normal_quadrature(b_source.mean, b_source.sd)
    return Estimate(float(lp.mean()), float(lp.std(ddof=1) / math.sqrt(n)), closed, int(n))


@dataclass(frozen=True)
class CouplingResult:
    deltas: np.ndarray
    slope: float
    contraction_violations: int
    merged_at: int | None
    diverged_at: int | None = None


def coupling_decay(coeffs, x0, x0_alt, n, stream):
    """Couple two abs-form trajectories on the same coefficients.

    Parameters
    ----------
    coeffs : CoeffProcess
    x0, x0_alt : float
        Distinct initial states.
    n : int
        Steps, at least 10.
    stream : NoiseStream

    Returns
    -------
    CouplingResult
        ``deltas[t] = X_t - X'_t``.  ``slope`` is the least-squares slope of
        ``log|D_t|`` against ``t`` over the steps before the paths merge (and
        with ``|D_t| > 1e-300``).  A violation is a step where
        ``|D_t| > |A_t| |D_{t-1}|`` beyond roundoff, measured relative to the
        magnitude of the states involved.
    """
    if x0 == x0_alt:
        raise DomainError("coupling needs two distinct initial states")
    if n < 10:
        raise DomainError(f"n must be at least 10, got {n}")
    A, B = CoefficientDrawer(coeffs, stream).draw(int(n))
    x, dx = _run("abs", A, B, x0)
    y, dy = _run("abs", A, B, x0_alt)
    m = min(len(x), len(y))
    x, y = x[:m], y[:m]
    diverged_at = m - 1 if (dx is not None or dy is not None) else None
    deltas = x - y

    d_prev, d_next = np.abs(deltas[:-1]), np.abs(deltas[1:])
    a = np.abs(A[: m - 1])
    scale = a * (np.abs(x[:-1]) + np.abs(y[:-1])) + np.abs(x[1:]) + np.abs(y[1:])
    with np.errstate(invalid="ignore"):
        excess = d_next - a * d_prev
        violations = int((excess > CONTRACTION_RTOL * (scale + a * d_prev)).sum())

    zero = np.flatnonzero(deltas == 0)
    merged_at = int(zero[0]) if zero.size else None
    prefix = np.abs(deltas[: merged_at if merged_at is not None else m])
    t = np.flatnonzero(prefix > SLOPE_FLOOR)
    if diverged_at is not None:
        t = t[t < diverged_at]
    slope = float(np.polyfit(t, np.log(prefix[t]), 1)[0]) if t.size >= 2 else math.nan
    return CouplingResult(deltas, slope, violations, merged_at, diverged_at)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float


def ks_2samp(x, y):
    """Two-sample Kolmogorov-Smirnov statistic with asymptotic p-value.

    ``D = sup |F_x - F_y|`` over the pooled sample; the p-value is the
    Kolmogorov survival function at ``sqrt(n m / (n + m)) * D``.
    """
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise DomainError("KS test needs two nonempty samples")
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / n
    cdf_y = np.searchsorted(y, pooled, side="right") / m
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    p = float(special.kolmogorov(math.sqrt(n * m / (n + m)) * d))
    return KSResult(d, min(max(p, 0.0), 1.0))


@dataclass(frozen=True)
class KSStat:
    lag: int
    statistic: float
    p_value: float


@dataclass(frozen=True)
class StationarityResult:
    """KS comparisons of ``X_burn_in`` against ``X_{burn_in + lag}``.

    When any replica crosses the divergence threshold the test is not run:
    ``diverged`` is set, ``ks_stats`` is empty and ``rejection_rate`` is None.
    """

    ks_stats: list
    rejection_rate: float | None
    diverged: bool = False
    n_diverged: int = 0
    n_diverged_before_burn_in: int = 0
    first_divergence: int | None = None


def stationarity_test(coeffs, x0, burn_in, lags, replicas, stream, alpha=ALPHA, threads=None):
    """Check invariance in time of the ensemble marginal.

    Runs ``replicas`` independent abs-form trajectories (replica ``r`` on
    ``stream.substream(r)``) and, for every lag, KS-compares the cross-replica
    sample at ``burn_in`` with the sample at ``burn_in + lag``.
    ``rejection_rate`` is the fraction of lags with ``p < alpha``.
    """
    if replicas < 50:
        raise DomainError(f"replicas must be at least 50, got {replicas}")
    if burn_in < 0:
        raise DomainError("burn_in must be nonnegative")
    lags = [int(lag) for lag in np.atleast_1d(lags)]
    if not lags or min(lags) < 1:
        raise DomainError("lags must be positive integers")
    horizon = burn_in + max(lags)
    ens = iterate_ensemble(coeffs, x0, horizon, stream, replicas, form="abs", threads=threads)
    div = ens.diverged_at[ens.diverged_at >= 0]
    if div.size:
        return StationarityResult(
            [], None, True, int(div.size), int((div <= burn_in).sum()), int(div.min())
        )
    base = ens.values[burn_in]
    ks = []
    for lag in lags:
        r = ks_2samp(base, ens.values[burn_in + lag])
        ks.append(KSStat(lag, r.statistic, r.p_value))
    rate = sum(k.p_value < alpha for k in ks) / len(ks)
    return StationarityResult(ks, rate)


def fixed_point_check(coeffs, stationary_sample, stream):
    """KS-compare a sample with its image under one step ``x -> A|x| + B``.

    Each sample point gets a fresh coefficient pair read sequentially from
    ``stream``.  For a sample from the stationary law both have the same
    distribution.
    """
    x = np.asarray(stationary_sample, dtype=float)
    if x.size < 200:
        raise DomainError(f"sample size must be at least 200, got {x.size}")
    A, B = CoefficientDrawer(coeffs, stream).draw(x.size)
    return ks_2samp(x, A * np.abs(x) + B)


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float


def moments(sample):
    """Mean, unbiased variance and bias-corrected skewness / excess kurtosis.

    Raises
    ------
    DegenerateSampleError
        For a zero-variance sample; ``mean`` and ``variance`` ride along on
        the exception.
    """
    x = np.asarray(sample, dtype=float)
    if x.size < 4:
        raise DomainError(f"need at least 4 values, got {x.size}")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    if var == 0:
        raise DegenerateSampleError("zero variance: skewness and kurtosis undefined", mean, var)
    skew = float(stats.skew(x, bias=False))
    kurt = float(stats.kurtosis(x, fisher=True, bias=False))
    return Moments(mean, var, skew, kurt)


@dataclass(frozen=True)
class Theorem2Check:
    lyapunov_ok: bool
    logplus_ok: bool
    verdict: Literal["stationary_expected", "unstable_expected", "boundary"]
    lyapunov: Estimate
    logplus_b: Estimate


def check_theorem2_conditions(coeffs, n, stream, boundary_tol=1e-12):
    """Evaluate ``E[log|A|] < 0`` and ``E[log+|B|] < inf`` for ``coeffs``.

    The verdict uses the exact log-moment of the A source when one is known
    (values within ``boundary_tol`` of 0 count as the boundary), otherwise
    the Monte Carlo estimate with a four-standard-error band.
    """
    if n < 10_000:
        raise DomainError(f"n must be at least 1e4, got {n}")
    lyap = estimate_lyapunov(coeffs.a, n, stream)
    if not hasattr(coeffs.b, "draws"):
        # Finite schedules: every B is one of finitely many finite values.
        _, B = CoefficientDrawer(CoeffProcess(ConstA(0.0), coeffs.b), stream).draw(n)
        with np.errstate(divide="ignore"):
            lp = np.maximum(np.log(np.abs(B)), 0.0)
        logplus = Estimate(float(lp.mean()), float(lp.std(ddof=1) / math.sqrt(n)), None, n)
    else:
        logplus = estimate_logplus_b(coeffs.b, n, stream)

    if lyap.closed_form is not None and math.isfinite(lyap.closed_form):
        centre, spread = lyap.closed_form, boundary_tol
    else:
        centre, spread = lyap.estimate, N_SIGMA * lyap.stderr
    if centre + spread < 0:
        verdict = "stationary_expected"
    elif centre - spread > 0:
        verdict = "unstable_expected"
    else:
        verdict = "boundary"
    return Theorem2Check(
        lyapunov_ok=verdict == "stationary_expected",
        logplus_ok=math.isfinite(logplus.estimate),
        verdict=verdict,
        lyapunov=lyap,
        logplus_b=logplus,
    )


@dataclass
class DiagnosticsReport:
    """JSON-ready bundle of whatever diagnostics a run produced."""

    lyapunov: dict | None = None
    logplus_b: dict | None = None
    coupling: dict | None = None
    stationarity: dict | None = None
    moments: dict | None = None
    checks: dict = field(default_factory=dict)
    anomaly: str | None = None

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if v is not None}
        out["passed"] = self.passed
        return out


def as_dict(obj):
    """``dataclasses.asdict`` with arrays turned into lists."""
    d = asdict(obj)
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}

