"""
Stochastic recurrence engines.

Two one-step maps are supported,

    linear:  X_t = A_t * X_{t-1} + B_t
    abs:     X_t = A_t * |X_{t-1}| + B_t

driven by a coefficient process ``{(A_t, B_t)}`` whose ``A`` part and ``B``
part are independent.

Index convention
----------------
A coefficient pair carries the time of the state it *produces*: ``(A_t, B_t)``
maps ``X_{t-1}`` to ``X_t``.  Recursions written as ``X_{m+1} = A_m |X_m| + B_m``
are the same thing with the pair relabelled ``m + 1 -> m``.  Trajectories hold
``values[0] = x0`` and ``values[t]`` for ``t = 1..n``.

Coefficient realizations
------------------------
Sequential engines (:func:`iterate_linear`, :func:`iterate_abs`,
:func:`series_solution`) read coefficients from the stream in step order:
for each step the ``A`` draw (if any) comes first, then the ``B`` draw.

Partial solutions need the same coefficients at a given calendar time ``t`` no
matter where the recursion starts.  There the pair at time ``t`` is drawn from
``stream.substream(time_key(t))``, a pure function of ``(seed, t)``.

The cloud model is the abs form with ``A = eps`` (scale 1), ``x0 = He`` and
``B_t = En_{p-t+1}`` for ``t = 1..p`` (:class:`CloudB`); after ``p`` steps the
last state is a cloud drop.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import signal, special

from .cloud import CloudParams
from .errors import DivergenceError, DomainError, NonSummableError
from .special_fn import expected_log_abs_std_normal

__all__ = [
    "DIVERGENCE_THRESHOLD",
    "GaussianA",
    "ConstA",
    "ConstB",
    "GaussianB",
    "AR1B",
    "ResampleB",
    "CloudB",
    "CoeffProcess",
    "CoefficientDrawer",
    "Trajectory",
    "Ensemble",
    "SeriesApprox",
    "time_key",
    "time_indexed_coefficients",
    "iterate_linear",
    "iterate_abs",
    "iterate_ensemble",
    "series_solution",
    "partial_solution",
    "partial_solution_path",
    "dominating_sequence",
    "dominating_sequence_path",
]

DIVERGENCE_THRESHOLD = 1e12


# -- coefficient sources ---------------------------------------------------


@dataclass(frozen=True)
class GaussianA:
    """``A = scale * eps`` with ``eps ~ N(0, 1)``."""

    scale: float = 1.0
    draws = 1

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"gaussian A scale must be positive and finite, got {self.scale}")

    def sample(self, z, n):
        return self.scale * z

    def log_moment(self):
        """Exact ``E[log|A|] = log(scale) - (gamma + log 2) / 2``."""
        return math.log(self.scale) + expected_log_abs_std_normal().value

    def describe(self):
        return {"kind": "gauss", "scale": self.scale}


@dataclass(frozen=True)
class ConstA:
    value: float
    draws = 0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError("constant A must be finite")

    def sample(self, z, n):
        return np.full(n, float(self.value))

    def log_moment(self):
        return math.log(abs(self.value)) if self.value != 0 else -math.inf

    def describe(self):
        return {"kind": "const", "value": self.value}


class _StationaryB:
    """Shared plumbing for B sources with a fixed number of draws per step."""

    def draws_per_step(self, step0, n):
        return np.full(n, self.draws, dtype=np.int64)

    def time_indexed(self, zb_of_time, times):
        return self.sequential(zb_of_time(times), 0, None)


@dataclass(frozen=True)
class ConstB(_StationaryB):
    value: float
    draws = 0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError("constant B must be finite")

    def sequential(self, zb, step0, prev):
        return np.full(len(zb), float(self.value))

    def describe(self):
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True)
class GaussianB(_StationaryB):
    mean: float = 0.0
    sd: float = 1.0
    draws = 1

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.sd) and self.sd > 0):
            raise DomainError("gaussian B needs finite mean and positive finite sd")

    def sequential(self, zb, step0, prev):
        return self.mean + self.sd * zb

    def describe(self):
        return {"kind": "gauss", "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class AR1B(_StationaryB):
    """Stationary AR(1): ``B_t = mean + rho (B_{t-1} - mean) + sd * eta_t``.

    Sequential sampling starts from the stationary law
    ``N(mean, sd^2 / (1 - rho^2))``.  Time-indexed sampling uses the moving
    average representation truncated where ``|rho|^J < 1e-17``.
    """

    mean: float = 0.0
    rho: float = 0.0
    sd: float = 1.0
    draws = 1

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise DomainError(f"AR(1) B-source requires |rho| < 1, got {self.rho}")
        if not (math.isfinite(self.mean) and math.isfinite(self.sd) and self.sd > 0):
            raise DomainError("AR(1) B needs finite mean and positive finite sd")

    @property
    def stationary_sd(self):
        return self.sd / math.sqrt(1.0 - self.rho**2)

    @property
    def ma_length(self):
        if self.rho == 0:
            return 1
        return int(math.ceil(math.log(1e-17) / math.log(abs(self.rho)))) + 1

    def sequential(self, zb, step0, prev):
        e = self.sd * np.asarray(zb, dtype=float)
        if len(e) == 0:
            return e
        if prev is None:
            e = e.copy()
            e[0] = self.stationary_sd * zb[0]
            zi = [0.0]
        else:
            zi = [self.rho * (prev - self.mean)]
        dev, _ = signal.lfilter([1.0], [1.0, -self.rho], e, zi=zi)
        return self.mean + dev

    def time_indexed(self, zb_of_time, times):
        J = self.ma_length
        times = np.asarray(times)
        eta = zb_of_time(np.arange(times[0] - J + 1, times[-1] + 1))
        weights = self.rho ** np.arange(J)
        windows = np.lib.stride_tricks.sliding_window_view(eta, J)[:, ::-1]
        return self.mean + self.sd * (windows * weights).sum(axis=1)

    def describe(self):
        return {"kind": "ar1", "mean": self.mean, "rho": self.rho, "sd": self.sd}


@dataclass(frozen=True)
class ResampleB(_StationaryB):
    """I.i.d. uniform choice among ``values``, indexed by ``Phi(eps)``."""

    values: tuple
    draws = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values or not all(math.isfinite(v) for v in self.values):
            raise DomainError("ResampleB needs a nonempty list of finite values")

    def sequential(self, zb, step0, prev):
        m = len(self.values)
        idx = np.minimum((special.ndtr(zb) * m).astype(np.int64), m - 1)
        return np.asarray(self.values)[idx]

    def describe(self):
        return {"kind": "resample", "values": list(self.values)}


@dataclass(frozen=True)
class CloudB:
    """Finite B schedule ``En_p, En_{p-1}, ..., En_1`` of a cloud model.

    Steps past the schedule need an explicit infinite extension: ``"hold"``
    repeats ``En_1``; any stationary B source continues the process; ``None``
    makes running past the schedule an error.
    """

    params: CloudParams
    extension: object = "hold"

    def __post_init__(self):
        ext = self.extension
        if not (ext is None or isinstance(ext, str) and ext == "hold" or isinstance(ext, _StationaryB)):
            raise DomainError(f"unsupported cloud_b extension {ext!r}")

    @property
    def schedule(self):
        return np.asarray(self.params.en[::-1])

    def _ext_draws(self):
        return self.extension.draws if isinstance(self.extension, _StationaryB) else 0

    def draws_per_step(self, step0, n):
        steps = np.arange(step0 + 1, step0 + n + 1)
        return np.where(steps > self.params.p, self._ext_draws(), 0).astype(np.int64)

    def sequential(self, zb, step0, prev):
        p = self.params.p
        n = len(zb)
        steps = np.arange(step0 + 1, step0 + n + 1)
        out = np.empty(n)
        inside = steps <= p
        out[inside] = self.schedule[steps[inside] - 1]
        beyond = ~inside
        if beyond.any():
            if self.extension is None:
                raise DomainError(
                    f"cloud_b schedule has {p} steps; pass an extension to run further"
                )
            if isinstance(self.extension, str):
                out[beyond] = self.params.en[0]
            else:
                ext_prev = prev if step0 > p else None
                out[beyond] = self.extension.sequential(zb[beyond], 0, ext_prev)
        return out

    def time_indexed(self, zb_of_time, times):
        raise DomainError("cloud_b is a finite schedule and has no time-indexed realization")

    def describe(self):
        ext = self.extension
        ext = ext.describe() if isinstance(ext, _StationaryB) else ext
        return {"kind": "cloud", **self.params.to_dict(), "extension": ext}


@dataclass(frozen=True)
class CoeffProcess:
    """Independent pair of an A source and a B source."""

    a: object
    b: object

    def describe(self):
        return {"a": self.a.describe(), "b": self.b.describe()}


# -- coefficient drawing ---------------------------------------------------


class CoefficientDrawer:
    """Reads ``(A_t, B_t)`` for consecutive steps from one stream.

    Keeps the step counter and the last ``B`` so stateful sources (AR(1))
    continue seamlessly across calls.
    """

    def __init__(self, coeffs, stream):
        self.coeffs = coeffs
        self.stream = stream
        self.step = 0
        self._prev_b = None

    def draw(self, n):
        a, b = self.coeffs.a, self.coeffs.b
        da = a.draws
        db = b.draws_per_step(self.step, n)
        counts = da + db
        z = self.stream.normals(int(counts.sum()))
        offsets = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
        za = z[offsets] if da else None
        zb = np.full(n, np.nan)
        has_b = db > 0
        zb[has_b] = z[offsets[has_b] + da]
        A = a.sample(za, n)
        B = b.sequential(zb, self.step, self._prev_b)
        self.step += n
        if n:
            self._prev_b = float(B[-1])
        return A, B


def time_key(t):
    """Map a calendar time in Z to a substream index in N (zig-zag)."""
    t = int(t)
    return 2 * t if t >= 0 else -2 * t - 1


def time_indexed_coefficients(coeffs, stream, t_start, t_end):
    """Coefficients ``(A_t, B_t)`` for ``t = t_start..t_end`` inclusive.

    The pair at time ``t`` depends only on ``(stream.seed, stream.key, t)``.
    """
    if t_end < t_start:
        return np.empty(0), np.empty(0)
    a, b = coeffs.a, coeffs.b
    da, db = a.draws, getattr(b, "draws", 0)
    cache = {}

    def draws_at(t):
        if t not in cache:
            cache[t] = stream.substream(time_key(t)).normals(da + db)
        return cache[t]

    times = np.arange(t_start, t_end + 1)
    za = np.array([draws_at(t)[0] for t in times]) if da else None

    def zb_of_time(ts):
        if not db:
            return np.full(len(ts), np.nan)
        return np.array([draws_at(int(t))[da] for t in ts])

    A = a.sample(za, len(times))
    B = b.time_indexed(zb_of_time, times)
    return A, B


# -- engines ---------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Realized path ``X_0..X_n``; truncated at the first divergent state."""

    values: np.ndarray
    x0: float
    seed: int | None
    form: Literal["linear", "abs"]
    diverged_at: int | None = None

    @property
    def diverged(self):
        return self.diverged_at is not None


def _run(form, A, B, x0, threshold=DIVERGENCE_THRESHOLD):
    n = len(A)
    out = np.empty(n + 1)
    out[0] = x = float(x0)
    absolute = form == "abs"
    for t in range(n):
        x = A[t] * (abs(x) if absolute else x) + B[t]
        out[t + 1] = x
        if not abs(x) <= threshold:
            return out[: t + 2], t + 1
    return out, None


def _check_steps(n):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _iterate(form, coeffs, x0, n, stream):
    n = _check_steps(n)
    if not math.isfinite(x0):
        raise DomainError("x0 must be finite")
    A, B = CoefficientDrawer(coeffs, stream).draw(n)
    values, diverged_at = _run(form, A, B, x0)
    return Trajectory(values, float(x0), getattr(stream, "seed", None), form, diverged_at)


def iterate_linear(coeffs, x0, n, stream):
    """Run ``X_t = A_t X_{t-1} + B_t`` for ``n`` steps."""
    return _iterate("linear", coeffs, x0, n, stream)


def iterate_abs(coeffs, x0, n, stream):
    """Run ``X_t = A_t |X_{t-1}| + B_t`` for ``n`` steps."""
    return _iterate("abs", coeffs, x0, n, stream)


@dataclass(frozen=True)
class Ensemble:
    """Independent trajectories stacked as columns.

    ``values`` has shape ``(n + 1, replicas)``; entries after a replica's
    divergence step are NaN.  ``diverged_at[r]`` is -1 for replicas that
    never crossed the threshold.
    """

    values: np.ndarray
    diverged_at: np.ndarray
    form: str

    @property
    def n_diverged(self):
        return int((self.diverged_at >= 0).sum())


def iterate_ensemble(coeffs, x0, n, stream, replicas, form="abs", threads=None):
    """Run ``replicas`` trajectories, replica ``r`` on ``stream.substream(r)``.

    Column ``r`` equals ``iterate_abs(coeffs, x0, n, stream.substream(r))``
    (or the linear analogue) up to the divergence step.
    """
    n = _check_steps(n)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (replicas,))

    def draw(r):
        return CoefficientDrawer(coeffs, stream.substream(r)).draw(n)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(draw, range(replicas)))
    else:
        pairs = [draw(r) for r in range(replicas)]
    A = np.stack([p[0] for p in pairs], axis=1)
    B = np.stack([p[1] for p in pairs], axis=1)

    values = np.empty((n + 1, replicas))
    values[0] = x = x0.copy()
    diverged_at = np.full(replicas, -1, dtype=np.int64)
    absolute = form == "abs"
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(n):
            x = A[t] * (np.abs(x) if absolute else x) + B[t]
            bad = ~(np.abs(x) <= DIVERGENCE_THRESHOLD) & (diverged_at < 0)
            diverged_at[bad] = t + 1
            values[t + 1] = x
            # Freeze diverged replicas; the divergent state itself stays recorded.
            x = np.where(diverged_at >= 0, np.nan, x)
    return Ensemble(values, diverged_at, form)


@dataclass(frozen=True)
class SeriesApprox:
    value: float
    terms_used: int
    last_weight: float


def series_solution(coeffs, stream, k_max, tol):
    """Truncated series ``sum_k (prod_{i=1..k} A_{n-i}) B_{n-k-1}``.

    Pairs ``(A_{n-1}, B_{n-1}), (A_{n-2}, B_{n-2}), ...`` are read from the
    stream going back in time.  Summation stops once the running product
    ``|A_{n-1} ... A_{n-k}|`` is below ``tol``; that product is reported as
    ``last_weight``.

    Raises
    ------
    NonSummableError
        If the product is still ``>= tol`` after ``k_max`` terms.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    if int(k_max) != k_max or k_max < 1:
        raise DomainError("k_max must be a positive integer")
    drawer = CoefficientDrawer(coeffs, stream)
    chunk = int(min(k_max + 1, 4096))
    A, B = drawer.draw(chunk)
    i = 0  # index of the pair (A_{n-1-i}, B_{n-1-i}) in the current chunk

    def pair():
        nonlocal A, B, i
        if i == len(A):
            A, B = drawer.draw(chunk)
            i = 0
        i += 1
        return A[i - 1], B[i - 1]

    a, b = pair()
    value = float(b)
    weight = float(a)
    terms = 1
    while abs(weight) >= tol:
        if terms >= k_max:
            raise NonSummableError(
                f"|prod A| = {abs(weight):.3g} still >= tol after {k_max} terms; "
                "E[log|A|] < 0 probably fails"
            )
        a, b = pair()
        value += weight * b
        weight *= a
        terms += 1
        if not math.isfinite(weight):
            raise NonSummableError(f"coefficient product overflowed after {terms} terms")
    return SeriesApprox(value, terms, abs(weight))


def _partial_window(coeffs, k, n, stream):
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    if n < -k:
        raise DomainError(f"n must be >= -k, got n={n}, k={k}")
    return time_indexed_coefficients(coeffs, stream, -k + 1, n)


def _scan(A, B, absolute_coeffs):
    out = np.empty(len(A) + 1)
    out[0] = x = 0.0
    for t in range(len(A)):
        if absolute_coeffs:
            x = abs(A[t]) * x + abs(B[t])
        else:
            x = A[t] * abs(x) + B[t]
        out[t + 1] = x
        if not abs(x) <= DIVERGENCE_THRESHOLD:
            raise DivergenceError(f"|X| exceeded {DIVERGENCE_THRESHOLD:g}", step=t + 1)
    return out


def partial_solution_path(coeffs, k, n, stream):
    """States ``X^{(-k)}_t`` for ``t = -k..n`` of the recursion started at 0.

    Coefficients are time-indexed, so paths for different ``k`` share the
    realization on their common times.
    """
    A, B = _partial_window(coeffs, k, n, stream)
    return _scan(A, B, absolute_coeffs=False)


def partial_solution(coeffs, k, n, stream):
    """``X^{(-k)}_n``: start at ``X_{-k} = 0`` and run the abs form to time ``n``."""
    return float(partial_solution_path(coeffs, k, n, stream)[-1])


def dominating_sequence_path(coeffs, k, n, stream):
    """States ``Y_t`` for ``t = -k..n`` of ``Y_t = |A_t| Y_{t-1} + |B_t|``, ``Y_{-k} = 0``."""
    A, B = _partial_window(coeffs, k, n, stream)
    return _scan(A, B, absolute_coeffs=True)


def dominating_sequence(coeffs, k, n, stream):
    """``Y_n`` on the same time-indexed realization as :func:`partial_solution`."""
    return float(dominating_sequence_path(coeffs, k, n, stream)[-1])
