import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadiclab import diagnostics as dg
from dyadiclab.shell_model import ModelParams, ShellState
from dyadiclab.stepper import StepControl, integrate


def desk_run(nu=0.01, n=16, t_end=1.0, rel=1e-10, abs_=1e-12):
    p = ModelParams(beta=2.5, nu=nu, n_shells=n)
    return integrate(p, 2.0 ** -np.arange(1, n + 1), t_end, StepControl(rel_tol=rel, abs_tol=abs_))


class TestNorms:
    def test_examples(self):
        assert dg.norm(np.ones(3), dg.EnergyH()) == 3.0
        assert dg.norm([1.0, 0, 0], dg.SobolevLike(1.0)) == 4.0
        assert dg.norm([1.0, 1.0], dg.WeightedSup(1.0)) == 4.0
        assert dg.norm(ShellState(0.0, [0.5, 0.25]), dg.WeightedSup(1.0)) == 1.0

    def test_rows(self):
        v = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(dg.norm(v, dg.SobolevLike(0.5)), [2.0, 4.0], rtol=1e-15)

    def test_bad_spec(self):
        with pytest.raises(TypeError):
            dg.norm(np.ones(2), "energy")
        with pytest.raises(ValueError):
            dg.SobolevLike(np.inf)

    @given(st.lists(st.floats(-3, 3), min_size=1, max_size=20), st.floats(0, 2))
    def test_sobolev_dominates_energy(self, x, s):
        assert dg.norm(x, dg.SobolevLike(s)) >= dg.norm(x, dg.EnergyH()) * (1 - 1e-15)

    def test_sup_over_time_includes_samples(self):
        tr = desk_run(t_end=0.2)
        spec = dg.WeightedSup(0.5)
        assert dg.sup_over_time(tr, spec) >= np.max(dg.norm(tr.values, spec))


class TestEnergy:
    def test_inequality_holds(self):
        rep = dg.energy_inequality_report(desk_run(), 0.01)
        assert rep.worst <= 1e-8
        assert rep.s < rep.t

    def test_inviscid_equality(self):
        tr = desk_run(nu=0.0, n=10, t_end=0.3)
        rep = dg.energy_inequality_report(tr, 0.0)
        assert rep.max_abs_drift <= 1e-9 and abs(rep.worst) <= 1e-9

    def test_dissipation_single_shell(self):
        p = ModelParams(beta=2.5, nu=1.0, n_shells=1)
        tr = integrate(p, [1.0], 1.0)
        # int_0^t (2 e^{-4s})^2 ds = (1 - e^{-8t}) / 2
        I = dg.dissipation_integral(tr)
        np.testing.assert_allclose(I, 0.5 * (1 - np.exp(-8 * tr.times)), rtol=1e-9, atol=1e-14)

    def test_gauss_beats_trapezoid(self):
        tr = desk_run()
        g = dg.energy_inequality_report(tr, 0.01, "gauss")
        t = dg.energy_inequality_report(tr, 0.01, "trapezoid")
        assert g.worst <= t.worst


@pytest.fixture(scope="module")
def pair():
    return desk_run(rel=1e-8, abs_=1e-10), desk_run(rel=1e-11, abs_=1e-13)


class TestGap:
    def test_small(self, pair):
        assert dg.uniqueness_gap(*pair, 15).sup <= 1e-10

    def test_self_gap_zero(self, pair):
        g = dg.uniqueness_gap(pair[0], pair[0], 15)
        assert np.all(g.values == 0)

    def test_monotone_in_n(self, pair):
        sups = [dg.uniqueness_gap(*pair, n).values for n in range(1, 16)]
        for lo, hi in zip(sups, sups[1:]):
            assert np.all(hi >= lo)

    def test_initial_gap(self):
        p = ModelParams(beta=2.5, nu=0.1, n_shells=4)
        a = integrate(p, [0.5, 0.2, 0.1, 0.0], 0.1)
        b = integrate(p, [0.4, 0.2, 0.1, 0.1], 0.1)
        g = dg.uniqueness_gap(a, b, 4, times=[0.0, 0.05])
        assert g.values[0] == pytest.approx(0.01 / 2 + 0.01 / 16)

    def test_bad_n(self, pair):
        with pytest.raises(ValueError):
            dg.uniqueness_gap(*pair, 40)


class TestClaims:
    def test_claim1(self, eps_half):
        x0 = 2.0 ** -(0.6 * np.arange(1, 17))
        run = dg.claim1_protocol(2.5, eps_half, 0.01, x0, 0.5)
        assert run.ratio <= 10.1
        assert run.ratio_y <= 10.1
        assert np.max(run.y_traj.values[0]) == pytest.approx(0.1, rel=1e-14)

    def test_claim1_ratio_single_shell(self):
        p = ModelParams(beta=2.5, nu=1.0, n_shells=1)
        tr = integrate(p, [1.0], 1.0)
        assert dg.claim1_ratio(tr, 0.0, 2.5, 0.0) == 1.0

    def test_rescaled_consistency(self, eps_half):
        r = dg.rescaled_consistency(2.5, eps_half, 0.01, 2.0 ** -(0.6 * np.arange(1, 11)), 0.2)
        assert r["ok"], r

    def test_vcompare_single_shell(self):
        p = ModelParams(beta=2.5, nu=0.5, n_shells=1)
        tr = integrate(p, [1.0], 1.0)
        rep = dg.vcompare(tr, 0.0, 0.5, 2.5)
        assert rep.holds and not rep.truncated
        # V = e^{-nu (4 - 2) t}, Vt = e^{-2 nu t}: equal
        np.testing.assert_allclose(rep.v[:, 0], rep.v_tilde[:, 0], rtol=1e-9)

    def test_vcompare_desk(self):
        tr = desk_run(nu=0.1, n=15, t_end=0.5)
        rep = dg.vcompare(tr, 0.0, 0.1, 2.5)
        assert rep.holds, rep.max_excess


class TestSweep:
    def test_identical_runs(self):
        tr = desk_run(t_end=0.2, n=8)
        cmp = dg.nu_sweep_compare([tr, tr, tr], [0.01, 0.01, 0.01], 8)
        assert np.all(cmp.d == 0) and cmp.c0_variation == 0.0

    def test_requires_ordering(self):
        tr = desk_run(t_end=0.2, n=8)
        with pytest.raises(ValueError):
            dg.nu_sweep_compare([tr, tr], [0.01, 0.02], 8)

    def test_small_sweep(self):
        p = ModelParams(beta=2.5, nu=0.0, n_shells=12, truncation="MirrorLast")
        x0 = 2.0 ** -(0.6 * np.arange(1, 13))
        nus = [0.25, 0.125, 0.0625, 0.0]
        stops = np.linspace(0, 0.5, 51)[1:-1]
        trs = [integrate(p.replace(nu=nu), x0, 0.5, t_stops=stops) for nu in nus]
        cmp = dg.nu_sweep_compare(trs, nus, 4, times=np.linspace(0, 0.5, 51))
        for n in range(1, 5):
            assert cmp.decreasing_in_k(n) and cmp.first_increase(n) is None
        np.testing.assert_array_equal(cmp.last_gap, cmp.d[-1])
        assert np.all(np.diff(cmp.to_inviscid, axis=0) <= 0)


class TestMonitors:
    def test_blowup_series_at_start(self):
        tr = desk_run(t_end=0.1, n=6)
        assert dg.blowup_series(tr, 3.0)[0] == pytest.approx(sum(4.0 ** k * 4.0 ** -k
                                                                  for k in range(1, 7)))

    def test_monitor_keys(self):
        m = dg.uniqueness_monitors(desk_run(t_end=0.1, n=6), 2.5, 0.01)
        assert set(m) == {"viscous_beta_minus_3", "inviscid_beta_minus_1", "inviscid_third"}
        assert all(np.isfinite(v) for v in m.values())

    def test_min_value(self):
        assert dg.min_value(desk_run(t_end=0.1, n=6)) >= 0
