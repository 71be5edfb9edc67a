import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudsre.cloud import CloudParams, gen_drop_def2
from cloudsre.errors import DivergenceError, DomainError, NonSummableError
from cloudsre.noise import NoiseStream
from cloudsre.sre import (
    AR1B,
    DIVERGENCE_THRESHOLD,
    CloudB,
    CoefficientDrawer,
    CoeffProcess,
    ConstA,
    ConstB,
    GaussianA,
    GaussianB,
    ResampleB,
    dominating_sequence,
    dominating_sequence_path,
    iterate_abs,
    iterate_ensemble,
    iterate_linear,
    partial_solution,
    partial_solution_path,
    series_solution,
    time_indexed_coefficients,
    time_key,
)

GAUSS_B1 = CoeffProcess(GaussianA(1.0), ConstB(1.0))
HALF_ONE = CoeffProcess(ConstA(0.5), ConstB(1.0))


class TestSources:
    def test_ar1_requires_stationarity(self):
        with pytest.raises(DomainError):
            AR1B(0.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            AR1B(0.0, -1.2, 1.0)

    def test_gaussian_a_scale_positive(self):
        with pytest.raises(DomainError):
            GaussianA(0.0)

    def test_gaussian_a_log_moment(self):
        assert GaussianA(1.0).log_moment() == pytest.approx(-0.6351814227, abs=1e-10)
        assert GaussianA(3.0).log_moment() == pytest.approx(math.log(3) - 0.6351814227)

    def test_ar1_sequential_moments(self):
        b = AR1B(2.0, 0.6, 0.5)
        _, B = CoefficientDrawer(CoeffProcess(ConstA(0.0), b), NoiseStream(5)).draw(200_000)
        # AR(1) sample mean: variance inflated by (1 + rho) / (1 - rho)
        se = b.stationary_sd * math.sqrt((1 + b.rho) / (1 - b.rho) / B.size)
        assert abs(B.mean() - 2.0) < 4 * se
        assert B.std() == pytest.approx(b.stationary_sd, rel=0.02)
        lag1 = np.corrcoef(B[:-1], B[1:])[0, 1]
        assert lag1 == pytest.approx(0.6, abs=0.01)

    def test_ar1_continues_across_draw_calls(self):
        coeffs = CoeffProcess(GaussianA(1.0), AR1B(0.0, 0.9, 1.0))
        A, B = CoefficientDrawer(coeffs, NoiseStream(1)).draw(50)
        d = CoefficientDrawer(coeffs, NoiseStream(1))
        parts = [d.draw(20), d.draw(30)]
        assert np.array_equal(A, np.concatenate([p[0] for p in parts]))
        assert np.allclose(B, np.concatenate([p[1] for p in parts]), rtol=0, atol=1e-14)

    def test_ar1_time_indexed_is_window_independent(self):
        coeffs = CoeffProcess(GaussianA(1.0), AR1B(1.0, 0.5, 2.0))
        _, wide = time_indexed_coefficients(coeffs, NoiseStream(8), -20, 10)
        _, narrow = time_indexed_coefficients(coeffs, NoiseStream(8), 3, 10)
        assert np.allclose(wide[-8:], narrow, rtol=0, atol=1e-13)

    def test_resample_picks_from_values(self):
        b = ResampleB([1.0, 2.0, 5.0])
        _, B = CoefficientDrawer(CoeffProcess(ConstA(0.0), b), NoiseStream(2)).draw(30_000)
        vals, counts = np.unique(B, return_counts=True)
        assert list(vals) == [1.0, 2.0, 5.0]
        assert np.all(np.abs(counts / B.size - 1 / 3) < 4 * math.sqrt(2 / 9 / B.size))

    def test_draw_order_a_then_b(self):
        coeffs = CoeffProcess(GaussianA(2.0), GaussianB(10.0, 3.0))
        A, B = CoefficientDrawer(coeffs, NoiseStream(4)).draw(5)
        z = NoiseStream(4).normals(10).reshape(5, 2)
        assert np.array_equal(A, 2.0 * z[:, 0])
        assert np.array_equal(B, 10.0 + 3.0 * z[:, 1])

    def test_time_key_is_bijective_on_window(self):
        keys = [time_key(t) for t in range(-50, 51)]
        assert sorted(keys) == list(range(101))


class TestIterate:
    def test_zero_a_kills_state(self):
        traj = iterate_linear(CoeffProcess(ConstA(0.0), ConstB(7.0)), 100.0, 10, NoiseStream(0))
        assert traj.values[0] == 100.0
        assert np.all(traj.values[1:] == 7.0)

    def test_geometric_closed_form(self):
        traj = iterate_linear(HALF_ONE, 0.0, 60, NoiseStream(0))
        n = np.arange(61)
        assert np.allclose(traj.values, 2 * (1 - 0.5**n), rtol=0, atol=1e-15)
        assert traj.values[-1] == pytest.approx(2.0, abs=1e-15)

    def test_unit_a_has_no_limit(self):
        traj = iterate_linear(CoeffProcess(ConstA(1.0), ConstB(1.0)), 0.0, 100, NoiseStream(0))
        assert np.array_equal(traj.values, np.arange(101.0))

    def test_abs_equals_linear_on_nonnegative_orbit(self):
        a = iterate_linear(HALF_ONE, 0.0, 40, NoiseStream(0))
        b = iterate_abs(HALF_ONE, 0.0, 40, NoiseStream(0))
        assert np.array_equal(a.values, b.values)
        assert b.form == "abs"

    def test_abs_negative_coefficient(self):
        traj = iterate_abs(CoeffProcess(ConstA(-0.5), ConstB(0.0)), 1.0, 10, NoiseStream(0))
        n = np.arange(1, 11)
        assert np.array_equal(traj.values[1:], -0.5 * 0.5 ** (n - 1))

    def test_cloud_identification(self):
        params = CloudParams([0, 1, 0.5], 0.1)
        coeffs = CoeffProcess(GaussianA(1.0), CloudB(params))
        for seed in range(50):
            traj = iterate_abs(coeffs, params.he, 3, NoiseStream(seed))
            assert traj.values[3] == gen_drop_def2(params, NoiseStream(seed))

    def test_cloud_schedule_needs_extension(self):
        coeffs = CoeffProcess(GaussianA(1.0), CloudB(CloudParams([0, 1], 1.0), extension=None))
        iterate_abs(coeffs, 1.0, 2, NoiseStream(0))
        with pytest.raises(DomainError):
            iterate_abs(coeffs, 1.0, 3, NoiseStream(0))

    def test_cloud_extension_hold_and_source(self):
        params = CloudParams([4.0, 1.0, 2.0], 1.0)
        hold = CoeffProcess(ConstA(0.0), CloudB(params))
        assert list(iterate_abs(hold, 1.0, 5, NoiseStream(0)).values) == [1, 2, 1, 4, 4, 4]
        ext = CoeffProcess(ConstA(0.0), CloudB(params, GaussianB(0.0, 1.0)))
        vals = iterate_abs(ext, 1.0, 5, NoiseStream(0)).values
        assert list(vals[:4]) == [1, 2, 1, 4]
        assert np.array_equal(vals[4:], NoiseStream(0).normals(2))

    def test_divergence_guard(self):
        traj = iterate_linear(CoeffProcess(ConstA(10.0), ConstB(1.0)), 1.0, 100, NoiseStream(0))
        assert traj.diverged
        assert abs(traj.values[traj.diverged_at]) > DIVERGENCE_THRESHOLD
        assert len(traj.values) == traj.diverged_at + 1
        assert np.all(np.abs(traj.values[:-1]) <= DIVERGENCE_THRESHOLD)

    def test_deterministic(self):
        a = iterate_abs(GAUSS_B1, 0.3, 200, NoiseStream(99))
        b = iterate_abs(GAUSS_B1, 0.3, 200, NoiseStream(99))
        assert np.array_equal(a.values, b.values)

    def test_bad_steps(self):
        with pytest.raises(DomainError):
            iterate_abs(GAUSS_B1, 0.0, 0, NoiseStream(0))

    @pytest.mark.parametrize("threads", [None, 4])
    def test_ensemble_columns_match_single_runs(self, threads):
        ens = iterate_ensemble(GAUSS_B1, 0.0, 80, NoiseStream(6), 8, threads=threads)
        for r in range(8):
            single = iterate_abs(GAUSS_B1, 0.0, 80, NoiseStream(6).substream(r))
            assert np.array_equal(ens.values[:, r], single.values)

    def test_ensemble_divergence_bookkeeping(self):
        coeffs = CoeffProcess(GaussianA(3.0), ConstB(1.0))
        ens = iterate_ensemble(coeffs, 0.0, 200, NoiseStream(6), 20)
        for r in range(20):
            single = iterate_abs(coeffs, 0.0, 200, NoiseStream(6).substream(r))
            if single.diverged:
                assert ens.diverged_at[r] == single.diverged_at
                k = single.diverged_at
                assert np.array_equal(ens.values[: k + 1, r], single.values)
                assert np.all(np.isnan(ens.values[k + 1 :, r]))
            else:
                assert ens.diverged_at[r] == -1


class TestSeries:
    def test_zero_a(self):
        s = series_solution(CoeffProcess(ConstA(0.0), ConstB(5.0)), NoiseStream(0), 10, 1e-12)
        assert s.value == 5.0 and s.terms_used == 1 and s.last_weight == 0.0

    def test_geometric(self):
        s = series_solution(HALF_ONE, NoiseStream(0), 1000, 1e-12)
        assert abs(s.value - 2.0) <= 1e-11
        assert s.last_weight <= 1e-12

    @pytest.mark.parametrize("a, b", [(0.5, 1.0), (-0.7, 2.0), (0.9, -3.0)])
    def test_constant_coefficients_closed_form(self, a, b):
        tol = 1e-10
        s = series_solution(CoeffProcess(ConstA(a), ConstB(b)), NoiseStream(0), 10_000, tol)
        assert abs(s.value - b / (1 - a)) <= 10 * tol * max(1, abs(b))

    def test_non_summable(self):
        with pytest.raises(NonSummableError):
            series_solution(CoeffProcess(ConstA(1.5), ConstB(1.0)), NoiseStream(0), 100, 1e-12)

    def test_random_series_matches_backward_iteration(self):
        # Sum the same history explicitly from the oldest pair forward.
        coeffs = CoeffProcess(GaussianA(1.0), GaussianB(0.0, 1.0))
        s = series_solution(coeffs, NoiseStream(13), 10_000, 1e-14)
        A, B = CoefficientDrawer(coeffs, NoiseStream(13)).draw(s.terms_used)
        x = 0.0
        for k in range(s.terms_used - 1, -1, -1):
            x = (A[k] * x if k < s.terms_used - 1 else 0.0) + B[k]
        assert x == pytest.approx(s.value, abs=1e-12)

    def test_chunk_boundary(self):
        coeffs = CoeffProcess(ConstA(0.999), ConstB(1.0))
        s = series_solution(coeffs, NoiseStream(0), 100_000, 1e-12)
        assert s.terms_used > 4096
        assert s.value == pytest.approx(1000.0, rel=1e-9)


class TestPartialSolutions:
    def test_initial_condition(self):
        for k in (1, 5, 30):
            assert partial_solution(GAUSS_B1, k, -k, NoiseStream(1)) == 0.0
            assert dominating_sequence(GAUSS_B1, k, -k, NoiseStream(1)) == 0.0

    def test_geometric_in_k(self):
        vals = [partial_solution(HALF_ONE, k, 0, NoiseStream(0)) for k in range(1, 40)]
        for k, v in enumerate(vals, start=1):
            assert v == pytest.approx(2 * (1 - 0.5**k), abs=1e-15)
        assert all(b > a for a, b in zip(vals, vals[1:10]))

    def test_one_step_dominating(self):
        coeffs = CoeffProcess(ConstA(-0.5), ConstB(-1.0))
        for k in (1, 4):
            assert dominating_sequence(coeffs, k, -k + 1, NoiseStream(0)) == 1.0

    def test_shared_realization_across_k(self):
        # Restarting from the state at t = -10 on a freshly fetched window of
        # time-indexed coefficients must land on the same end point.
        s = NoiseStream(21)
        long = partial_solution_path(GAUSS_B1, 11, 5, s)
        A, B = time_indexed_coefficients(GAUSS_B1, s, -9, 5)
        x = long[1]
        for t in range(len(A)):
            x = A[t] * abs(x) + B[t]
        assert x == long[-1]

    def test_cauchy(self):
        gaps = []
        for k in (8, 16, 32, 64):
            a = partial_solution(GAUSS_B1, k, 0, NoiseStream(3))
            b = partial_solution(GAUSS_B1, 2 * k, 0, NoiseStream(3))
            gaps.append(abs(a - b))
        assert gaps[-1] < 1e-12
        assert gaps[-1] <= gaps[0]

    def test_max_gap_over_seeds_shrinks(self):
        ks = (8, 16, 32, 64)
        worst = dict.fromkeys(ks, 0.0)
        for seed in range(100):
            s = NoiseStream(seed)
            x = {k: partial_solution(GAUSS_B1, k, 0, s) for k in ks + (128,)}
            for k in ks:
                worst[k] = max(worst[k], abs(x[2 * k] - x[k]))
        gaps = [worst[k] for k in ks]
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**63), k=st.integers(1, 50), n=st.integers(-50, 20))
    def test_domination(self, seed, k, n):
        n = max(n, -k)
        coeffs = CoeffProcess(GaussianA(1.0), GaussianB(0.5, 2.0))
        x = partial_solution_path(coeffs, k, n, NoiseStream(seed))
        y = dominating_sequence_path(coeffs, k, n, NoiseStream(seed))
        assert np.all(np.abs(x) <= y)

    def test_cloud_b_not_time_indexed(self):
        coeffs = CoeffProcess(GaussianA(1.0), CloudB(CloudParams([0, 1], 1.0)))
        with pytest.raises(DomainError):
            partial_solution(coeffs, 3, 0, NoiseStream(0))

    def test_divergence_raises(self):
        with pytest.raises(DivergenceError):
            partial_solution(CoeffProcess(ConstA(100.0), ConstB(1.0)), 20, 0, NoiseStream(0))

    def test_bad_arguments(self):
        with pytest.raises(DomainError):
            partial_solution(GAUSS_B1, 0, 0, NoiseStream(0))
        with pytest.raises(DomainError):
            partial_solution(GAUSS_B1, 3, -4, NoiseStream(0))
