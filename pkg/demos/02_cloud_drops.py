"""
Cloud drops two ways
====================

A p-order cloud drop can be generated by nesting normal draws whose standard
deviation is the previous drop, or by writing each draw as ``mean + sd * eps``
with the noise made explicit.  On a shared stream the two give the same
floats.  The second-order model is a normal scale mixture and therefore
leptokurtic.
"""

import numpy as np

from cloudsre.cloud import CloudParams, gen_drops, second_order_excess_kurtosis
from cloudsre.diagnostics import moments
from cloudsre.noise import NoiseStream

params = CloudParams(en=[0.0, 1.0], he=1.0)  # Ex = 0, En_2 = 1, He = 1

# %% Same seed, both generators
nested = gen_drops(params, 10**6, NoiseStream(7), "def1")
explicit = gen_drops(params, 10**6, NoiseStream(7), "def2")
print("bit-identical:", np.array_equal(nested.values, explicit.values))

# %% Shape of the distribution
m = moments(explicit.values)
print(f"mean {m.mean:+.4f}  variance {m.variance:.4f}  (expected 0 and En_2^2 + He^2 = 2)")
print(f"excess kurtosis {m.excess_kurtosis:.3f}  (scale-mixture value {second_order_excess_kurtosis(params)})")

# %% Higher orders keep stacking uncertainty
for en in ([0.0], [0.0, 1.0], [0.0, 1.0, 0.5], [0.0, 1.0, 0.5, 0.25]):
    x = gen_drops(CloudParams(en, 0.1), 200_000, NoiseStream(1)).values
    print(f"p = {len(en)}: std {x.std():.3f}, 99.9% quantile of |x| {np.quantile(np.abs(x), 0.999):.3f}")
