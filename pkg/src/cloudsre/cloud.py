"""
The p-order Gaussian cloud model.

A model of order ``p`` has characteristics ``En_1, ..., En_p`` and hyper-entropy
``He > 0``; ``En_1`` is the expectation ``Ex``.  A cloud drop is the last value
of a chain of ``p`` nested Gaussian draws, started at the top of the parameter
list:

    x_1 = R_N(En_p, He)
    x_i = R_N(En_{p-i+1}, |x_{i-1}|),   2 <= i <= p

where ``R_N(mu, sigma)`` is a normal draw with mean ``mu`` and standard
deviation ``sigma``.  Writing ``R_N(mu, sigma) = mu + sigma * eps`` makes the
noise explicit (:func:`gen_drop_def2`).  Both generators take one ``eps`` per
step from the same stream and therefore return identical floats.

``En`` values may be any finite reals, including zero and negatives; only
``He`` is sign-constrained.
"""

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError

__all__ = [
    "CloudParams",
    "DropBatch",
    "validate",
    "r_n",
    "gen_drop_def1",
    "gen_drop_def2",
    "gen_drops",
    "second_order_excess_kurtosis",
    "second_order_variance",
]


@dataclass(frozen=True)
class CloudParams:
    """Numerical characteristics ``(En_1, ..., En_p, He)``.

    ``en`` is stored in the conventional order, expectation first.
    """

    en: tuple
    he: float

    def __post_init__(self):
        object.__setattr__(self, "en", tuple(float(v) for v in np.atleast_1d(self.en)))
        object.__setattr__(self, "he", float(self.he))
        validate(self)

    @property
    def p(self):
        return len(self.en)

    @property
    def ex(self):
        return self.en[0]

    def to_dict(self):
        return {"en": list(self.en), "he": self.he, "p": self.p}


def validate(params):
    """Check the model invariants and return ``params`` unchanged.

    Raises
    ------
    DomainError
        If ``en`` is empty, any entry is non-finite, or ``he <= 0``.
    """
    if len(params.en) == 0:
        raise DomainError("a cloud model needs at least one En value")
    if not all(math.isfinite(v) for v in params.en):
        raise DomainError(f"En values must be finite, got {params.en}")
    if not math.isfinite(params.he) or params.he <= 0:
        raise DomainError(f"He must be a finite positive number, got {params.he}")
    return params


@dataclass(frozen=True)
class DropBatch:
    values: np.ndarray
    params: CloudParams
    seed: int | None
    definition_used: Literal["def1", "def2"]

    def __len__(self):
        return len(self.values)


def r_n(mu, sigma, stream):
    """One normal draw with mean ``mu`` and standard deviation ``sigma``.

    ``sigma == 0`` is a degenerate normal: the result is ``mu``, but a draw is
    still consumed so noise accounting does not depend on the path.
    """
    return mu + sigma * stream.next_gaussian()


def gen_drop_def1(params, stream):
    """One cloud drop by nested normal draws; consumes ``p`` draws."""
    en, p = params.en, params.p
    x = r_n(en[p - 1], params.he, stream)
    for i in range(2, p + 1):
        x = r_n(en[p - i], abs(x), stream)
    return x


def gen_drop_def2(params, stream):
    """One cloud drop with explicit noise: ``x_i = En + |x_{i-1}| * eps_i``."""
    en, p = params.en, params.p
    eps = stream.next_gaussian()
    x = en[p - 1] + params.he * eps
    for i in range(2, p + 1):
        eps = stream.next_gaussian()
        x = en[p - i] + abs(x) * eps
    return x


def _drops_def1(params, eps):
    en, p = params.en, params.p
    x = r_n(en[p - 1], params.he, _Column(eps[:, 0]))
    for i in range(2, p + 1):
        x = r_n(en[p - i], np.abs(x), _Column(eps[:, i - 1]))
    return x


def _drops_def2(params, eps):
    en, p = params.en, params.p
    x = en[p - 1] + params.he * eps[:, 0]
    for i in range(2, p + 1):
        x = en[p - i] + np.abs(x) * eps[:, i - 1]
    return x


class _Column:
    # Lets r_n consume a whole column of eps at once.
    def __init__(self, col):
        self._col = col

    def next_gaussian(self):
        return self._col


def gen_drops(params, n, stream, which="def2"):
    """Generate ``n`` independent drops from one stream.

    Drops are produced in order, drop ``j`` consuming draws
    ``j*p .. j*p + p - 1``, so the result equals ``n`` calls of the scalar
    generator on the same stream.

    Parameters
    ----------
    params : CloudParams
    n : int
        Number of drops, at least 1.
    stream : NoiseStream
    which : {"def1", "def2"}

    Returns
    -------
    DropBatch
    """
    validate(params)
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if which not in ("def1", "def2"):
        raise DomainError(f"which must be 'def1' or 'def2', got {which!r}")
    seed = getattr(stream, "seed", None)
    eps = stream.normals(int(n) * params.p).reshape(int(n), params.p)
    values = _drops_def1(params, eps) if which == "def1" else _drops_def2(params, eps)
    return DropBatch(values, params, seed, which)


def second_order_variance(params):
    """Variance of a second-order drop: ``E[x_1^2] = En_2^2 + He^2``."""
    if params.p != 2:
        raise DomainError("closed form only for p = 2")
    return params.en[1] ** 2 + params.he**2


def second_order_excess_kurtosis(params):
    """Excess kurtosis of a second-order drop when ``En_1 == 0``.

    ``x_2 = |x_1| * eps`` is a normal scale mixture, so
    ``E[x_2^4] = 3 E[x_1^4]`` and ``E[x_2^2] = E[x_1^2]`` with
    ``x_1 ~ N(En_2, He^2)``.
    """
    if params.p != 2 or params.en[0] != 0.0:
        raise DomainError("closed form only for p = 2 with En_1 = 0")
    m, s = params.en[1], params.he
    m2 = m**2 + s**2
    m4 = m**4 + 6 * m**2 * s**2 + 3 * s**4
    return 3.0 * m4 / m2**2 - 3.0
