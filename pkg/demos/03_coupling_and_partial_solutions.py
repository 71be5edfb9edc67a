"""
Forgetting the starting point
=============================

Run the absolute-value recursion ``X_t = A_t |X_{t-1}| + B_t`` twice on the
same coefficients from very different starts.  The gap shrinks at least as
fast as the running product of ``|A_t|``, and in floating point the two paths
eventually coincide exactly.

Starting instead from zero further and further in the past (partial
solutions) gives a Cauchy sequence whose limit is the stationary value at
time 0; every partial solution is bounded by the recursion driven by
``|A|`` and ``|B|``.
"""

import numpy as np

from cloudsre.diagnostics import coupling_decay
from cloudsre.noise import NoiseStream
from cloudsre.sre import CoeffProcess, ConstB, GaussianA, dominating_sequence, partial_solution

coeffs = CoeffProcess(GaussianA(1.0), ConstB(1.0))

# %% Coupling from x0 = 0 and x0 = 100
res = coupling_decay(coeffs, 0.0, 100.0, 500, NoiseStream(3))
print(f"merged at step {res.merged_at}, fitted log-gap slope {res.slope:.3f} (theory -0.635)")
print("first gaps:", np.array2string(np.abs(res.deltas[:8]), precision=3))

slopes = [coupling_decay(coeffs, 0.0, 100.0, 500, NoiseStream(s)).slope for s in range(200)]
print(f"median slope over 200 seeds {np.median(slopes):.3f}")

# %% Partial solutions X^(-k)_0 and their dominating bound
stream = NoiseStream(11)
for k in (1, 2, 4, 8, 16, 32, 64, 128):
    x = partial_solution(coeffs, k, 0, stream)
    y = dominating_sequence(coeffs, k, 0, stream)
    print(f"k = {k:3d}: X = {x:+.15f}   Y = {y:.6f}")
