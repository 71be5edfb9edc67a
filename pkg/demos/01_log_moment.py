"""
Why the cloud recursion settles down
====================================

Each step of the cloud recursion multiplies the previous magnitude by a
standard normal ``eps``.  Over many steps the product behaves like
``exp(n * E[log|eps|])``, so everything hinges on the sign of that mean.

Three independent routes to the same number:
"""

import math

from cloudsre.diagnostics import estimate_lyapunov
from cloudsre.noise import NoiseStream
from cloudsre.special_fn import euler_gamma, expected_log_abs_std_normal, log_moment_quadrature
from cloudsre.sre import GaussianA

# %% Closed form through the digamma value at 1/2
closed = expected_log_abs_std_normal().value
print(f"-(gamma + log 2) / 2      = {closed:.16f}   (gamma = {euler_gamma():.16f})")

# %% Direct numerical integration of log|a| against the normal density
quad = log_moment_quadrature(1e-12).value
print(f"quadrature                = {quad:.16f}   |diff| = {abs(quad - closed):.1e}")

# %% Monte Carlo over a million draws
est = estimate_lyapunov(GaussianA(1.0), 10**6, NoiseStream(0))
print(f"Monte Carlo (n = 1e6)     = {est.estimate:.6f} +- {est.stderr:.6f}")

# %% Rescaling the coefficient shifts the exponent by log(scale).  The
# stability boundary sits at scale = exp(0.6352) ~ 1.887.
for scale in (0.5, 1.0, math.exp(-closed), 3.0):
    a = GaussianA(scale)
    print(f"scale {scale:6.4f}: E[log|A|] = {a.log_moment():+.4f}")
