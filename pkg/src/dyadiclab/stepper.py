"""Adaptive time integration of the cascade systems.

The default method is a Lawson (integrating-factor) Dormand-Prince 5(4)
pair: the diagonal dissipation -nu lambda_n^2 is applied through its exact
exponential and the explicit pair works on the remaining quadratic part.
Along the truncated rescaled systems the quadratic part itself becomes
stiff (its Jacobian has eigenvalues of order 1e9 and more at N=20), so in
``auto`` mode a stiffness detector hands the run over to a Rosenbrock
method (RODAS4) on the tridiagonal Jacobian. Which method produced each
step is recorded in the trajectory.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _pykernels, kernels
from .shell_model import LAMBDA, ModelParams, NonFiniteStateError, ShellState, _check

METHODS = {"etd45": kernels.ETD45, "rodas4": kernels.RODAS4}


@dataclass(frozen=True)
class StepControl:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    min_step: float = 1e-20
    safety: float = 0.9
    initial_step: Optional[float] = None
    method: str = "auto"
    chunk: int = 4096

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.min_step <= self.max_step:
            raise ValueError("need 0 < min_step <= max_step")
        if not 0 < self.safety <= 1:
            raise ValueError("safety factor must lie in (0, 1]")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.method not in ("auto", "etd45", "rodas4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.chunk < 1:
            raise ValueError("chunk must be >= 1")


class TerminationCause(str, enum.Enum):
    TIME_REACHED = "time_reached"
    EVENT = "event_fired"
    STEP_UNDERFLOW = "step_underflow"


# ---------------------------------------------------------------- events

class EventSpec:
    """Base class. ``arm`` binds the event to a run and returns a predicate
    mapping a 2-d array of states to a boolean array (True = fired)."""

    kind = "event"

    def arm(self, params: ModelParams, y0: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class BlowupNorm(EventSpec):
    """Fires when sum_n (lambda_n^s Z_n)^2 exceeds ``threshold``.

    With ``relative`` the threshold multiplies the norm of the initial state.
    """

    s: float
    threshold: float = 1e6
    relative: bool = True
    kind = "blowup_norm"

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")

    def arm(self, params, y0):
        w = LAMBDA ** (self.s * np.arange(1, len(y0) + 1))
        limit = self.threshold * (float(np.sum((w * y0) ** 2)) if self.relative else 1.0)

        def fired(ys):
            with np.errstate(over="ignore"):
                return np.sum((ys * w) ** 2, axis=-1) > limit
        return fired

    def describe(self):
        return {"kind": self.kind, "s": self.s, "threshold": self.threshold,
                "relative": self.relative}


@dataclass(frozen=True)
class RegionExit(EventSpec):
    """Fires when a consecutive pair (Z_n, Z_{n+1}) leaves the region."""

    region: object
    tol: float = 1e-9
    kind = "region_exit"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def arm(self, params, y0):
        region, tol = self.region, self.tol

        def fired(ys):
            return ~region.contains_all(ys, tol)
        return fired

    def describe(self):
        return {"kind": self.kind, "tol": self.tol}


@dataclass(frozen=True)
class PositivityLoss(EventSpec):
    tol_pos: float = 1e-10
    kind = "positivity_loss"

    def __post_init__(self):
        if not self.tol_pos > 0:
            raise ValueError("tol_pos must be positive")

    def arm(self, params, y0):
        lim = -self.tol_pos
        return lambda ys: np.min(ys, axis=-1) < lim

    def describe(self):
        return {"kind": self.kind, "tol_pos": self.tol_pos}


_MONITORS: dict = {}


def register_monitor(name: str, fn: Callable[[np.ndarray], bool]) -> None:
    """Register a state predicate usable through ``Custom(name)``."""
    _MONITORS[name] = fn


@dataclass(frozen=True)
class Custom(EventSpec):
    monitor_id: str
    kind = "custom"

    def arm(self, params, y0):
        try:
            fn = _MONITORS[self.monitor_id]
        except KeyError:
            raise KeyError(f"no monitor registered as {self.monitor_id!r}") from None
        return lambda ys: np.array([bool(fn(row)) for row in np.atleast_2d(ys)])

    def describe(self):
        return {"kind": self.kind, "monitor_id": self.monitor_id}


@dataclass(frozen=True)
class EventRecord:
    index: int
    spec: EventSpec
    t: float
    values: np.ndarray


# ---------------------------------------------------------------- trajectory

@dataclass
class Trajectory:
    params: ModelParams
    times: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    step_kind: np.ndarray  # per interval: 0 = exponential RK, 1 = Rosenbrock
    decay: np.ndarray = None  # diagonal dissipation d_n; from params when None
    accepted: int = 0
    rejected: int = 0
    cause: TerminationCause = TerminationCause.TIME_REACHED
    event: Optional[EventRecord] = None
    method_log: list = field(default_factory=list)

    def __len__(self):
        return self.times.shape[0]

    @property
    def states(self):
        return [ShellState(t, v) for t, v in zip(self.times, self.values)]

    @property
    def final(self) -> ShellState:
        return ShellState(self.times[-1], self.values[-1])

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def _interval(self, t):
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(i, 0), len(self.times) - 2)

    def evaluate(self, t: float) -> np.ndarray:
        """Dense output at time ``t`` (cubic Hermite per step)."""
        if len(self.times) == 1:
            if t != self.times[0]:
                raise ValueError("single-sample trajectory has no dense output")
            return self.values[0].copy()
        if not self.times[0] <= t <= self.times[-1]:
            raise ValueError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        i = self._interval(t)
        return self._hermite(i, t)

    def _hermite(self, i, t):
        t0, t1 = self.times[i], self.times[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        y0, y1 = self.values[i], self.values[i + 1]
        f0, f1 = self.derivs[i], self.derivs[i + 1]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        plain = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        if self.step_kind[i] != 0:
            return plain
        # interpolate Z = e^{d (tau - t0)} y, whose derivative is the
        # quadratic part only, where the factor stays moderate
        d = self.decay if self.decay is not None else self.params.coefficients.d
        dh = d * h
        ok = dh <= 30.0
        if not np.any(ok & (d > 0)):
            return plain
        e1 = np.exp(np.where(ok, dh, 0.0))
        z1 = e1 * y1
        g0 = f0 + d * y0
        g1 = e1 * (f1 + d * y1)
        z = h00 * y0 + h10 * h * g0 + h01 * z1 + h11 * h * g1
        pre = np.exp(-np.where(ok, d * (t - t0), 0.0)) * z
        return np.where(ok, pre, plain)

    def at_stops(self, stops: Sequence[float]) -> np.ndarray:
        """States at ``stops``: exact samples when present, dense output otherwise."""
        out = np.empty((len(stops), self.values.shape[1]))
        for k, t in enumerate(stops):
            j = int(np.searchsorted(self.times, t))
            if j < len(self.times) and self.times[j] == t:
                out[k] = self.values[j]
            else:
                out[k] = self.evaluate(float(t))
        return out

    def midpoints(self) -> np.ndarray:
        """Dense-output states at the midpoint of every step."""
        if len(self.times) < 2:
            return np.empty((0, self.values.shape[1]))
        tm = 0.5 * (self.times[:-1] + self.times[1:])
        return np.array([self._hermite(i, t) for i, t in enumerate(tm)])

    def summary(self) -> dict:
        return {
            "n_samples": int(len(self.times)),
            "t_final": self.t_final,
            "accepted": int(self.accepted),
            "rejected": int(self.rejected),
            "cause": self.cause.value,
            "event": None if self.event is None else {
                **self.event.spec.describe(), "t": self.event.t},
            "methods": [{"t": t, "method": m} for t, m in self.method_log],
        }


# ---------------------------------------------------------------- integrate

def _initial_step(y, f, ctrl, span):
    sc = ctrl.abs_tol + ctrl.rel_tol * np.abs(y)
    d0 = math.sqrt(float(np.mean((y / sc) ** 2)))
    d1 = math.sqrt(float(np.mean((f / sc) ** 2)))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return max(min(h, span, ctrl.max_step), ctrl.min_step)


def _locate(traj_part, i, pred, min_step):
    """Bisect on the dense output of step i; returns (t, state) of the
    earliest located time at which the predicate holds."""
    lo, hi = traj_part.times[i], traj_part.times[i + 1]
    yhi = traj_part.values[i + 1]
    while hi - lo > min_step:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        ym = traj_part._hermite(i, mid)
        if pred(ym[None, :])[0]:
            hi, yhi = mid, ym
        else:
            lo = mid
    return hi, yhi


def integrate(params: ModelParams, initial, t_end: float, ctrl: StepControl = None,
              events: Sequence[EventSpec] = (), t_stops: Sequence[float] = None,
              max_steps: int = 10_000_000) -> Trajectory:
    """Integrate ``params`` from ``initial`` to ``t_end``.

    ``t_stops`` are times the integrator lands on exactly (each becomes a
    sample). Events are checked on every accepted sample and localized by
    bisection on the dense output to within ``ctrl.min_step``.
    """
    if not isinstance(initial, ShellState):
        initial = ShellState(0.0, initial)
    y0 = _check(initial, params).copy()
    co = params.coefficients
    return integrate_table(co.a, co.b, co.d, params.mirror, y0, initial.t, t_end, ctrl,
                           events, t_stops, max_steps, params=params)


def integrate_table(a, b, d, mirror: bool, y0, t0: float, t_end: float,
                    ctrl: StepControl = None, events: Sequence[EventSpec] = (),
                    t_stops: Sequence[float] = None, max_steps: int = 10_000_000,
                    params: ModelParams = None) -> Trajectory:
    """Integrate the cascade form with an explicit coefficient table
    f_n = -d_n y_n + a_n y_{n-1}^2 - b_n y_n y_{n+1}."""
    ctrl = ctrl or StepControl()
    a, b, d = (np.asarray(v, dtype=float) for v in (a, b, d))
    y0 = np.array(y0, dtype=float)
    if not (a.shape == b.shape == d.shape == y0.shape) or y0.ndim != 1:
        raise ValueError("coefficient table and state must have equal length")
    if not np.all(np.isfinite(y0)):
        raise NonFiniteStateError("initial state contains non-finite entries")
    t0 = float(t0)
    if not t_end > t0:
        raise ValueError("t_end must exceed the initial time")

    preds = [ev.arm(params, y0) for ev in events]
    f0 = kernels.rhs(y0, a, b, d, mirror)
    times, vals, ders, kinds = [np.array([t0])], [y0[None, :]], [f0[None, :]], []

    method_name = "etd45" if ctrl.method == "auto" else ctrl.method
    method_log = [(t0, method_name)]
    detect = ctrl.method == "auto"

    def build(cause, event=None):
        return Trajectory(params, np.concatenate(times), np.concatenate(vals),
                          np.concatenate(ders),
                          np.concatenate(kinds) if kinds else np.zeros(0, np.int8),
                          d, n_acc, n_rej, cause, event, method_log)

    n_acc = n_rej = 0
    for k, pred in enumerate(preds):
        if pred(y0[None, :])[0]:
            return build(TerminationCause.EVENT, EventRecord(k, events[k], t0, y0.copy()))

    targets = sorted({float(s) for s in (t_stops if t_stops is not None else ()) if t0 < s < t_end})
    targets.append(float(t_end))
    h = ctrl.initial_step or _initial_step(y0, f0, ctrl, t_end - t0)
    y, t = y0, t0
    n_stiff = n_nonstiff = 0

    for target in targets:
        while t < target:
            if n_acc >= max_steps:
                raise RuntimeError(f"exceeded max_steps={max_steps}")
            m = METHODS[method_name]
            (ts, ys, fs, acc, rej, status, h, n_stiff, n_nonstiff) = kernels.advance(
                m, y, t, target, a, b, d, mirror, ctrl.rel_tol, ctrl.abs_tol, h,
                ctrl.min_step, ctrl.max_step, ctrl.safety, ctrl.chunk,
                detect and m == kernels.ETD45, n_stiff, n_nonstiff)
            n_acc += acc
            n_rej += rej
            if acc:
                if not np.all(np.isfinite(ys)):
                    raise NonFiniteStateError("integration produced non-finite values")
                t_prev, y_prev, f_prev = times[-1][-1], vals[-1][-1], ders[-1][-1]
                seg = Trajectory(params, np.concatenate(([t_prev], ts)),
                                 np.vstack((y_prev, ys)), np.vstack((f_prev, fs)),
                                 np.full(acc, m, np.int8), d)
                hit = None
                for kk, pred in enumerate(preds):
                    fired = np.nonzero(pred(ys))[0]
                    if fired.size and (hit is None or fired[0] < hit[1]):
                        hit = (kk, int(fired[0]))
                if hit is not None:
                    kk, j = hit
                    te, ye = _locate(seg, j, preds[kk], ctrl.min_step)
                    # an earlier event may trigger inside the same step
                    for k2, p2 in enumerate(preds):
                        if k2 != kk and p2(ye[None, :])[0]:
                            t2, y2 = _locate(seg, j, p2, ctrl.min_step)
                            if t2 < te:
                                kk, te, ye = k2, t2, y2
                    fe = kernels.rhs(ye, a, b, d, mirror)
                    times.append(np.concatenate((ts[:j], [te])))
                    vals.append(np.vstack((ys[:j], ye)))
                    ders.append(np.vstack((fs[:j], fe)))
                    kinds.append(np.full(j + 1, m, np.int8))
                    return build(TerminationCause.EVENT, EventRecord(kk, events[kk], te, ye))
                times.append(ts)
                vals.append(ys)
                ders.append(fs)
                kinds.append(np.full(acc, m, np.int8))
                t, y = float(ts[-1]), ys[-1]
            if status == kernels.UNDERFLOW:
                return build(TerminationCause.STEP_UNDERFLOW)
            if status == kernels.STIFF:
                method_name = "rodas4"
                method_log.append((t, method_name))
    return build(TerminationCause.TIME_REACHED)


def integrate_exact_linear_reference(params: ModelParams, initial, t_end: float,
                                     n_steps: int = 4096) -> Trajectory:
    """Fixed-step classical RK4 in integrating-factor (Lawson) form.

    Pure numpy, independent of the adaptive kernels; meant as a test oracle
    for non-stiff cases.
    """
    if not isinstance(initial, ShellState):
        initial = ShellState(0.0, initial)
    y = _check(initial, params).copy()
    t0 = initial.t
    if not t_end > t0:
        raise ValueError("t_end must exceed the initial time")
    co = params.coefficients
    a, b, d, mirror = co.a, co.b, co.d, params.mirror
    h = (t_end - t0) / n_steps
    e_half = np.exp(-d * h / 2)
    e_full = e_half * e_half

    def nl(v):
        return _pykernels.nonlinear(v, a, b, mirror)

    ts = t0 + h * np.arange(n_steps + 1)
    ts[-1] = t_end
    ys = np.empty((n_steps + 1, y.size))
    ys[0] = y
    for i in range(n_steps):
        k1 = nl(y)
        k2 = nl(e_half * (y + 0.5 * h * k1))
        k3 = nl(e_half * y + 0.5 * h * k2)
        k4 = nl(e_full * y + h * e_half * k3)
        y = e_full * y + (h / 6) * (e_full * k1 + 2 * e_half * (k2 + k3) + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError("reference integration produced non-finite values")
        ys[i + 1] = y
    fs = np.array([_pykernels.rhs(v, a, b, d, mirror) for v in ys])
    return Trajectory(params, ts, ys, fs, np.zeros(n_steps, np.int8), d,
                      accepted=n_steps, method_log=[(t0, "lawson_rk4_fixed")])
