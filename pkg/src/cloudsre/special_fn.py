"""
Constants and log-moments of the standard normal coefficient.

The stability of the cloud recursion hinges on a single number, the mean of
``log|eps|`` for ``eps ~ N(0, 1)``.  It has the closed form

    E[log|eps|] = (psi(1/2) + log 2) / 2 = -(gamma + log 2) / 2 ~ -0.63518

where ``psi`` is the digamma function and ``gamma`` the Euler-Mascheroni
constant.  :func:`log_moment_quadrature` evaluates the defining integral
numerically, without going through Gamma-function identities, and serves as
the independent check on the closed form.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError

__all__ = [
    "LogMomentResult",
    "euler_gamma",
    "gamma_half",
    "psi_half",
    "expected_log_abs_std_normal",
    "log_moment_quadrature",
    "logplus_abs_normal_quadrature",
]

# Truncated quadrature needs a finite upper limit; this many subintervals is
# far more than any smooth Gaussian-weighted integrand here requires.
_QUAD_LIMIT = 200
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class LogMomentResult:
    """A value of ``E[log|A|]`` together with how it was obtained.

    ``stderr`` is zero for the deterministic methods and the Monte Carlo
    standard error otherwise.
    """

    value: float
    method: Literal["closed_form", "quadrature", "monte_carlo"]
    stderr: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"log-moment must be finite, got {self.value!r}")
        if self.stderr < 0:
            raise DomainError("stderr must be nonnegative")
        if self.method != "monte_carlo" and self.stderr != 0.0:
            raise DomainError(f"stderr must be 0 for method {self.method!r}")


def euler_gamma():
    """Euler-Mascheroni constant to double precision."""
    return float(np.euler_gamma)


def gamma_half():
    """Gamma(1/2), equal to sqrt(pi)."""
    return math.sqrt(math.pi)


def psi_half():
    """Digamma at 1/2: ``-gamma - 2 log 2``."""
    return -euler_gamma() - 2.0 * math.log(2.0)


def expected_log_abs_std_normal():
    """Closed form of ``E[log|eps|]`` for a standard normal ``eps``.

    Returns
    -------
    LogMomentResult
        ``value = -(gamma + log 2) / 2``, strictly negative.
    """
    return LogMomentResult(-(euler_gamma() + math.log(2.0)) / 2.0, "closed_form")


def _quad(f, a, b, epsabs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=0.0, limit=_QUAD_LIMIT)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {exc}") from exc
    if err > epsabs:
        raise QuadratureError(
            f"quadrature on [{a}, {b}] reached error {err:.3g}, requested {epsabs:.3g}"
        )
    return val, err


def _gauss_tail_cutoff(bound):
    """Smallest ``u >= 1`` with ``phi(u) <= bound``.

    Because ``log a <= a`` for ``a >= 1``, ``integral_u^inf log(a) phi(a) da``
    is at most ``phi(u)``, so this cutoff bounds the truncation error.
    """
    return max(1.0, math.sqrt(-2.0 * math.log(bound / _INV_SQRT_2PI)))


def log_moment_quadrature(tol):
    """Numerically integrate ``2 * integral_0^inf log(a) phi(a) da``.

    The domain is split at ``a = 1``.  On ``(0, 1)`` the substitution
    ``a = exp(-t)`` removes the logarithmic singularity, giving the smooth
    integrand ``-t * phi(exp(-t)) * exp(-t)`` on ``(0, inf)``.  Both halves
    are truncated where the discarded tail is below ``tol / 10``.

    Parameters
    ----------
    tol : float
        Absolute error budget, ``0 < tol < 1e-2``.

    Returns
    -------
    LogMomentResult
        With ``method == "quadrature"``.

    Raises
    ------
    DomainError
        If ``tol`` is out of range.
    QuadratureError
        If the adaptive rule cannot meet the budget.
    """
    if not (0.0 < tol < 1e-2):
        raise DomainError(f"tol must satisfy 0 < tol < 1e-2, got {tol!r}")
    # Factor 2 from symmetry: every piece gets tol/20 so the total stays <= tol.
    piece = tol / 20.0

    # (0, 1) after a = exp(-t): tail beyond T is phi(0) * (T + 1) * exp(-T).
    t_max = 1.0
    while _INV_SQRT_2PI * (t_max + 1.0) * math.exp(-t_max) > piece / 2.0:
        t_max += 1.0
    lower, _ = _quad(
        lambda t: -t * math.exp(-0.5 * math.exp(-2.0 * t)) * math.exp(-t) * _INV_SQRT_2PI,
        0.0,
        t_max,
        piece / 2.0,
    )

    a_max = _gauss_tail_cutoff(piece / 2.0)
    upper, _ = _quad(
        lambda a: math.log(a) * math.exp(-0.5 * a * a) * _INV_SQRT_2PI, 1.0, a_max, piece / 2.0
    )
    return LogMomentResult(2.0 * (lower + upper), "quadrature")


def logplus_abs_normal_quadrature(mean=0.0, sd=1.0, tol=1e-10):
    """``E[max(log|b|, 0)]`` for ``b ~ N(mean, sd**2)`` by quadrature.

    Only ``|b| > 1`` contributes.  Each side is integrated on a finite range
    whose Gaussian tail beyond the cutoff is below ``tol / 10``.
    """
    if sd <= 0:
        raise DomainError("sd must be positive")
    if not (0.0 < tol < 1e-2):
        raise DomainError(f"tol must satisfy 0 < tol < 1e-2, got {tol!r}")

    def density(b):
        z = (b - mean) / sd
        return math.exp(-0.5 * z * z) * _INV_SQRT_2PI / sd

    # Standardized cutoff with a generous margin for the log factor.
    z_cut = _gauss_tail_cutoff(tol / 40.0) + 2.0
    hi = abs(mean) + sd * z_cut + 1.0
    total = 0.0
    for lo_, hi_ in ((1.0, hi), (-hi, -1.0)):
        val, _ = _quad(lambda b: math.log(abs(b)) * density(b), lo_, hi_, tol / 10.0)
        total += val
    return total
