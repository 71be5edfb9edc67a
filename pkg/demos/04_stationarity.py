"""
Is the ensemble law time invariant?
===================================

After a burn-in the cross-replica distribution of ``X_t`` should not change
with ``t``.  Two-sample KS tests at several lags say so for the standard
cloud coefficient; a point-mass start with no burn-in is flagged at once;
and with ``A = 3 eps`` the log-moment condition fails and the paths blow up.
"""

from cloudsre.diagnostics import (
    check_theorem2_conditions,
    fixed_point_check,
    stationarity_test,
)
from cloudsre.noise import NoiseStream
from cloudsre.sre import CoeffProcess, ConstB, GaussianA, iterate_ensemble

stable = CoeffProcess(GaussianA(1.0), ConstB(1.0))
unstable = CoeffProcess(GaussianA(3.0), ConstB(1.0))

# %% Stationary regime
res = stationarity_test(stable, 0.0, 500, [50, 100, 200], 500, NoiseStream(0))
for k in res.ks_stats:
    print(f"lag {k.lag:3d}: D = {k.statistic:.4f}, p = {k.p_value:.3f}")

# %% One-step invariance of the stationary sample
sample = iterate_ensemble(stable, 0.0, 500, NoiseStream(1), 1000).values[-1]
fp = fixed_point_check(stable, sample, NoiseStream(2))
print(f"X vs A|X| + B: D = {fp.statistic:.4f}, p = {fp.p_value:.3f}")

# %% Transient: every replica starts at 1e6
t = stationarity_test(stable, 1e6, 0, [1], 500, NoiseStream(0)).ks_stats[0]
print(f"no burn-in from 1e6: D = {t.statistic:.3f}, p = {t.p_value:.1e}")

# %% Unstable coefficient
for name, c in (("scale 1", stable), ("scale 3", unstable)):
    print(name, check_theorem2_conditions(c, 10**4, NoiseStream(0)).verdict)
bad = stationarity_test(unstable, 0.0, 500, [50], 200, NoiseStream(0))
print(f"scale 3: {bad.n_diverged}/200 replicas crossed 1e12, first at step {bad.first_divergence}")
