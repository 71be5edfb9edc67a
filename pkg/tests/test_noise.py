import math

import numpy as np
import pytest
from scipy import special

from cloudsre.errors import DomainError
from cloudsre.noise import FixedNoise, NoiseStream, new_stream, next_gaussian, substream

N = 10**6


class TestDeterminism:
    def test_same_seed_bit_identical(self):
        a, b = new_stream(42), new_stream(42)
        xs = [next_gaussian(a) for _ in range(1000)]
        ys = [next_gaussian(b) for _ in range(1000)]
        assert xs == ys

    def test_distinct_seeds_differ(self):
        assert new_stream(42).next_gaussian() != new_stream(43).next_gaussian()

    def test_zero_seed_is_valid(self):
        s = new_stream(0)
        assert s.position == 0
        assert math.isfinite(s.next_gaussian())

    def test_max_seed(self):
        NoiseStream(2**64 - 1).next_gaussian()

    @pytest.mark.parametrize("seed", [-1, 2**64, 1.5, "3"])
    def test_bad_seed(self, seed):
        with pytest.raises(DomainError):
            NoiseStream(seed)

    def test_batch_equals_scalar(self):
        a, b = NoiseStream(7), NoiseStream(7)
        batch = a.normals(5000)
        scalar = np.array([b.next_gaussian() for _ in range(5000)])
        assert np.array_equal(batch, scalar)
        assert a.position == b.position == 5000

    def test_position_counts_draws(self):
        s = NoiseStream(1)
        for i in range(1, 6):
            s.next_gaussian()
            assert s.position == i
        s.normals(10)
        assert s.position == 15

    def test_replay(self):
        s = NoiseStream(11).substream(4)
        draws = s.normals(300)
        assert s.replay(0) == draws[0]
        assert s.replay(257) == draws[257]
        assert s.position == 300

    def test_substream_deterministic(self):
        s = NoiseStream(9)
        assert np.array_equal(substream(s, 5).normals(1000), substream(s, 5).normals(1000))

    def test_substream_ignores_parent_position(self):
        s = NoiseStream(9)
        first = s.substream(2).normals(10)
        s.normals(123)
        assert np.array_equal(first, s.substream(2).normals(10))

    def test_nested_substreams_differ(self):
        s = NoiseStream(3)
        assert s.substream(1).substream(0).next_gaussian() != s.substream(1).next_gaussian()


@pytest.fixture(scope="module")
def draws():
    return NoiseStream(2024).normals(N)


class TestDistribution:
    def test_mean(self, draws):
        assert abs(draws.mean()) < 4 / math.sqrt(N)

    def test_variance(self, draws):
        assert abs(draws.var(ddof=1) - 1) < 4 * math.sqrt(2 / N)

    def test_tail_fraction(self, draws):
        frac = np.mean(np.abs(draws) > 1.96)
        p = 2 * special.ndtr(-1.96)
        assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / N)
        assert abs(frac - 0.05) < 0.001

    def test_substream_correlation(self):
        s = NoiseStream(77)
        x, y = s.substream(0).normals(10**5), s.substream(1).normals(10**5)
        assert abs(np.corrcoef(x, y)[0, 1]) < 4 / math.sqrt(10**5)

    def test_pooled_substreams(self):
        s = NoiseStream(78)
        pooled = np.concatenate([s.substream(k).normals(10**4) for k in range(100)])
        assert abs(pooled.mean()) < 4 / math.sqrt(pooled.size)
        assert abs(pooled.var(ddof=1) - 1) < 4 * math.sqrt(2 / pooled.size)

    def test_ks_against_normal_cdf(self):
        n = 10**5
        crit = 1.63 / math.sqrt(n)
        ecdf_hi = np.arange(1, n + 1) / n
        ecdf_lo = np.arange(n) / n
        passed = 0
        for seed in range(100):
            x = np.sort(NoiseStream(seed).normals(n))
            cdf = special.ndtr(x)
            d = max(np.max(ecdf_hi - cdf), np.max(cdf - ecdf_lo))
            passed += d < crit
        assert passed >= 95


class TestFixedNoise:
    def test_serves_values_in_order(self):
        f = FixedNoise([1.0, -2.0, 3.0])
        assert f.next_gaussian() == 1.0
        assert list(f.normals(2)) == [-2.0, 3.0]
        assert f.position == 3
        with pytest.raises(IndexError):
            f.next_gaussian()
