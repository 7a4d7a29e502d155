import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadiclab import stationary as stn

mp.mp.dps = 40
U21 = stn.u_of_beta(2.1)


def mp_interval(u):
    u = mp.mpf(u)
    s = mp.sqrt((1 - 3 * u) / (1 + u))
    return (1 - s) / (2 * u), (1 + s) / (2 * u)


@pytest.fixture(scope="module")
def profile():
    return stn.find_a1(U21)


class TestInterval:
    def test_quarter(self):
        A, B = stn.fixed_point_interval(0.25)
        mA, mB = mp_interval("0.25")
        assert A == pytest.approx(1.1055728, abs=1e-7)
        assert B == pytest.approx(2.8944272, abs=1e-7)
        assert A == pytest.approx(float(mA), rel=1e-15)
        assert B == pytest.approx(float(mB), rel=1e-15)

    @given(st.floats(1e-3, 0.33))
    def test_vieta(self, u):
        A, B = stn.fixed_point_interval(u)
        assert A * B == pytest.approx(1 / (u * (1 + u)), rel=1e-13)
        assert A + B == pytest.approx(1 / u, rel=1e-13)

    @given(st.floats(1e-3, 0.33))
    def test_endpoint_algebra(self, u):
        for t in stn.fixed_point_interval(u):
            val = u * (1 + u) * t * t - (1 + u) * t + 1
            assert abs(val) <= 1e-13 * max(1.0, (1 + u) * t)

    @pytest.mark.parametrize("u", [0.05, 0.15, 0.25])
    def test_constant_fixed_point_inside(self, u):
        A, B = stn.fixed_point_interval(u)
        assert A <= 1 / (1 - u) <= B

    @pytest.mark.parametrize("u", [0.34, 1 / 3, 0.0, -0.1])
    def test_bad_u(self, u):
        with pytest.raises(ValueError):
            stn.fixed_point_interval(u)

    def test_u_below_one_for_beta_below_three(self):
        assert all(stn.u_of_beta(b) < 1 for b in np.linspace(2.0, 2.999, 50))
        assert U21 == pytest.approx(2 ** -1.8, rel=1e-15)


class TestRecursion:
    def test_examples(self):
        assert stn.recursion_step(0.0, 1.0, 0.3) == 1.0
        a = 1 / (1 - 0.2)
        assert stn.recursion_step(a, a, 0.2) == pytest.approx(a, rel=1e-15)
        assert stn.recursion_step(1.0, 1.0, 0.25) == 1.25

    def test_zero_denominator(self):
        with pytest.raises(ZeroDivisionError):
            stn.recursion_step(1.0, 0.0, 0.25)

    def test_sequence_start(self):
        a = stn.sequence(0.7, 0.25, 5)
        assert a[0] == 0.7 and a[1] == 1.0
        assert a[2] == pytest.approx(1 + 0.25 * 0.49)

    @pytest.mark.parametrize("u", [0.05, 0.25, U21, 0.33])
    def test_interval_closure(self, u):
        A, B = stn.fixed_point_interval(u)
        rng = np.random.default_rng(7)
        p, c = rng.uniform(A, B, 10_000), rng.uniform(A, B, 10_000)
        out = 1 + u * p * p / c
        assert np.all((out >= A * (1 - 1e-15)) & (out <= B * (1 + 1e-15)))
        for p in (A, B):
            for c in (A, B):
                assert A * (1 - 1e-15) <= stn.recursion_step(p, c, u) <= B * (1 + 1e-15)


class TestFindA1:
    def test_beta_21(self, profile):
        assert profile.a1 == pytest.approx(2.0921, abs=1e-4)
        assert profile.n_star == 39
        tail = profile.a[profile.n_star - 1:]
        assert np.all((tail >= profile.A) & (tail <= profile.B))

    def test_quarter(self):
        p = stn.find_a1(0.25)
        a = stn.sequence(p.a1, 0.25, p.n_max)
        tail = a[p.n_star - 1:]
        assert np.all((tail >= p.A) & (tail <= p.B))

    def test_bracket_sides(self, profile):
        assert stn.classify(profile.a1, U21, 200).label == "captured"
        assert stn.classify(profile.a1 + 1e-9, U21, 200).label != "captured"

    def test_bad_u(self):
        with pytest.raises(ValueError):
            stn.find_a1(0.34)

    def test_small_n_max(self):
        with pytest.raises(ValueError):
            stn.find_a1(0.25, n_max=10)


class TestGamma:
    def test_residual_and_partial_sums(self, profile):
        rep = stn.build_gamma(profile, 0.01, 2.1)
        assert rep.max_scaled_residual <= 1e-10
        assert rep.max_partial_sum_defect <= 1e-10

    def test_zero_sequence(self):
        res, _ = stn.stat_residual(np.zeros(20), 0.1, 2.3)
        assert np.all(res == 0)

    def test_residual_independent_oracle(self, profile):
        g = stn.build_gamma(profile, 0.02, 2.1).gamma
        mp.mp.dps = 50
        for n in (1, 2, 5, 40, 120):
            gn, gp1 = mp.mpf(g[n - 1]), mp.mpf(g[n])
            gm1 = mp.mpf(g[n - 2]) if n > 1 else 0
            lam = lambda k: mp.mpf(2) ** k
            r = (mp.mpf("0.02") * lam(n) ** 2 * gn + lam(n) ** mp.mpf(2.1) * gn * gp1
                 - (lam(n - 1) ** mp.mpf(2.1) * gm1 ** 2 if n > 1 else 0))
            scale = abs(mp.mpf("0.02") * lam(n) ** 2 * gn)
            assert abs(r) / scale <= 1e-12

    @pytest.mark.parametrize("k", [3, 10, 50])
    def test_perturbation_hits_three_indices(self, profile, k):
        a = profile.a.copy()
        a[k - 1] *= 1 + 1e-6
        gamma = -0.01 * stn.gamma_weights(2.1, a.size) * a
        res, scale = stn.stat_residual(gamma, 0.01, 2.1)
        bad = np.nonzero(np.abs(res) > 1e-12 * scale)[0] + 1
        assert list(bad) == [k - 1, k, k + 1]

    def test_first_shell_equation_free(self, profile):
        # a_2 = 1 makes the n = 1 equation hold for any a_1
        for a1 in (0.0, 0.5, 3.0):
            a = stn.sequence(a1, U21, 10)
            res, scale = stn.stat_residual(-0.01 * stn.gamma_weights(2.1, 10) * a, 0.01, 2.1)
            assert abs(res[0]) <= 1e-15 * max(scale[0], 1e-300)

    def test_mismatched_beta(self, profile):
        with pytest.raises(ValueError):
            stn.build_gamma(profile, 0.01, 2.3)
        with pytest.raises(ValueError):
            stn.build_gamma(profile, 0.0, 2.1)

    def test_decay_band(self, profile):
        nu = 0.01
        g = stn.build_gamma(profile, nu, 2.1).gamma
        band = stn.decay_check(g, 2.1)
        assert band.n0 == 1 and band.negative_after_n0
        a_tail = profile.a[1:]
        assert band.c1 == pytest.approx(nu * 2 ** 0.1 * a_tail.min(), rel=1e-12)
        assert band.c2 == pytest.approx(nu * 2 ** 0.1 * a_tail.max(), rel=1e-12)
        assert band.c1 > 0

    def test_decay_zero_rejected(self):
        with pytest.raises(ValueError):
            stn.decay_check(np.zeros(5), 2.1)
