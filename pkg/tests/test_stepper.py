import math

import numpy as np
import pytest

from dyadiclab.shell_model import ModelParams, ShellState, energy, rhs
from dyadiclab.stepper import (BlowupNorm, Custom, PositivityLoss, StepControl, TerminationCause,
                               integrate, integrate_exact_linear_reference, integrate_table,
                               register_monitor)


def test_control_validation():
    for bad in (dict(rel_tol=0), dict(min_step=1.0, max_step=0.5), dict(safety=1.5),
                dict(initial_step=-1.0), dict(method="euler"), dict(chunk=0)):
        with pytest.raises(ValueError):
            StepControl(**bad)


def test_t_end_must_advance():
    with pytest.raises(ValueError):
        integrate(ModelParams(beta=2.5, n_shells=2), ShellState(1.0, [1, 0]), 1.0)


@pytest.mark.parametrize("method", ["etd45", "auto"])
def test_single_shell_decay_exact(method):
    p = ModelParams(beta=2.5, nu=1.0, n_shells=1)
    tr = integrate(p, [1.0], 2.0, StepControl(method=method))
    assert tr.cause is TerminationCause.TIME_REACHED
    np.testing.assert_allclose(tr.values[:, 0], np.exp(-4.0 * tr.times), rtol=1e-12, atol=0)
    assert tr.t_final == 2.0


def test_single_shell_decay_rosenbrock():
    # the Rosenbrock stability function is rational, so accuracy is tolerance-limited
    p = ModelParams(beta=2.5, nu=1.0, n_shells=1)
    tr = integrate(p, [1.0], 2.0, StepControl(method="rodas4"))
    np.testing.assert_allclose(tr.values[:, 0], np.exp(-4.0 * tr.times), rtol=1e-8, atol=1e-12)


def test_zero_data_stays_zero():
    tr = integrate(ModelParams(beta=2.5, nu=0.1, n_shells=8), np.zeros(8), 1.0)
    assert np.all(tr.values == 0)


def test_inviscid_energy_drift():
    p = ModelParams(beta=2.5, nu=0.0, n_shells=12)
    x0 = 2.0 ** -np.arange(1, 13)
    tr = integrate(p, x0, 0.5)
    e = np.array([energy(v) for v in tr.values])
    assert np.max(np.abs(e / e[0] - 1)) <= 1e-8


def test_t_stops_are_hit_exactly():
    p = ModelParams(beta=2.3, nu=0.1, n_shells=6)
    stops = [0.1, 0.25, 0.7]
    tr = integrate(p, 2.0 ** -np.arange(1, 7), 1.0, t_stops=stops)
    for s in stops:
        assert s in tr.times


def test_deterministic():
    p = ModelParams(beta=2.5, nu=0.01, n_shells=10)
    x0 = 2.0 ** -(0.6 * np.arange(1, 11))
    t1, t2 = integrate(p, x0, 0.5), integrate(p, x0, 0.5)
    assert np.array_equal(t1.times, t2.times) and np.array_equal(t1.values, t2.values)


def test_agrees_with_fixed_step_reference():
    p = ModelParams(beta=2.5, nu=0.05, n_shells=6)
    x0 = 2.0 ** -np.arange(1, 7)
    ref = integrate_exact_linear_reference(p, x0, 0.25, n_steps=8192)
    for m in ("etd45", "rodas4", "auto"):
        tr = integrate(p, x0, 0.25, StepControl(rel_tol=1e-12, abs_tol=1e-15, method=m))
        np.testing.assert_allclose(tr.final.values, ref.values[-1], rtol=1e-9, atol=1e-14)


def test_dense_output_matches_direct_integration():
    p = ModelParams(beta=2.5, nu=0.05, n_shells=6)
    x0 = 2.0 ** -np.arange(1, 7)
    ctrl = StepControl(rel_tol=1e-12, abs_tol=1e-15)
    tr = integrate(p, x0, 0.25, ctrl)
    direct = integrate(p, x0, 0.13, ctrl).final.values
    np.testing.assert_allclose(tr.evaluate(0.13), direct, rtol=1e-7, atol=1e-12)


def _orders(method):
    p = ModelParams(beta=2.5, nu=0.05, n_shells=6)
    x0 = 2.0 ** -np.arange(1, 7)
    ref = integrate(p, x0, 0.25, StepControl(rel_tol=1e-13, abs_tol=1e-16, method="rodas4"))
    errs = []
    for k in range(7, 12):
        h = 2.0 ** -k
        ctrl = StepControl(rel_tol=1e-2, abs_tol=1e-2, max_step=h, initial_step=h, method=method)
        errs.append(np.max(np.abs(integrate(p, x0, 0.25, ctrl).final.values
                                  - ref.final.values)))
    return np.log2(np.array(errs[:-1]) / np.array(errs[1:]))


@pytest.mark.parametrize("method", ["etd45", "rodas4"])
def test_convergence_order(method):
    # fixed steps h = 2^-7..2^-11; mean observed order over the last three halvings
    orders = _orders(method)
    assert np.mean(orders[-3:]) >= 4.0, orders


def test_auto_switches_on_stiff_problem():
    p = ModelParams(beta=2.5, nu=0.01, n_shells=16)
    tr = integrate(p, 2.0 ** -np.arange(1, 17), 0.2)
    assert tr.cause is TerminationCause.TIME_REACHED
    assert [m for _, m in tr.method_log][-1] == "rodas4"
    assert tr.accepted < 20000


def test_blowup_event_localized():
    p = ModelParams(beta=3.5, nu=0.0, n_shells=30)
    x0 = np.zeros(30)
    x0[:3] = 1.0
    ev = BlowupNorm(s=3.5 / 3, threshold=1e3)
    tr = integrate(p, x0, 1.0, events=[ev])
    assert tr.cause is TerminationCause.EVENT
    assert tr.event.t < 1.0 and tr.event.t == tr.times[-1]
    lam = 2.0 ** np.arange(1, 31)
    norm = lambda v: np.sum((lam ** (3.5 / 3) * v) ** 2)
    assert norm(tr.event.values) >= 1e3 * norm(x0)
    # the sample before the event has not yet crossed
    assert norm(tr.values[-2]) < 1e3 * norm(x0)


def test_custom_monitor_fires():
    register_monitor("shell2_above", lambda v: v[1] > 0.3)
    p = ModelParams(beta=2.5, nu=0.0, n_shells=4)
    tr = integrate(p, [1.0, 0, 0, 0], 1.0, events=[Custom("shell2_above")],
                   ctrl=StepControl(min_step=1e-14))
    assert tr.cause is TerminationCause.EVENT
    assert tr.event.values[1] == pytest.approx(0.3, abs=1e-9)


def test_positivity_event_silent_on_cone():
    p = ModelParams(beta=2.5, nu=0.1, n_shells=6)
    tr = integrate(p, 2.0 ** -np.arange(1, 7), 1.0, events=[PositivityLoss()])
    assert tr.cause is TerminationCause.TIME_REACHED
    assert np.all(tr.values >= 0)


def test_step_underflow_reported():
    p = ModelParams(beta=2.5, nu=0.0, n_shells=4)
    ctrl = StepControl(rel_tol=1e-14, abs_tol=1e-300, min_step=0.5, max_step=1.0,
                       method="etd45")
    tr = integrate(p, [1.0, 1.0, 1.0, 1.0], 10.0, ctrl)
    assert tr.cause is TerminationCause.STEP_UNDERFLOW
    assert tr.t_final < 10.0


def test_table_interface_matches_params():
    p = ModelParams(beta=2.2, nu=0.1, n_shells=5, truncation="MirrorLast")
    co = p.coefficients
    x0 = 2.0 ** -np.arange(1, 6)
    a = integrate(p, x0, 0.3)
    b = integrate_table(co.a, co.b, co.d, True, x0, 0.0, 0.3)
    assert np.array_equal(a.values, b.values)


def test_derivs_are_field_values():
    p = ModelParams(beta=2.4, nu=0.1, n_shells=5)
    tr = integrate(p, 2.0 ** -np.arange(1, 6), 0.3)
    for v, f in zip(tr.values[::7], tr.derivs[::7]):
        np.testing.assert_allclose(f, rhs(v, p), rtol=1e-14, atol=1e-300)
