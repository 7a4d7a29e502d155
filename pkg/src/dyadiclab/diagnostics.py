"""Monitored quantities along trajectories.

Norms, the energy inequality, the uniqueness gap, weighted sup bounds,
the comparison variable V_n = X_n exp(nu lambda_n (t - t0)), and the
shell-wise comparison across a viscosity sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .shell_model import LAMBDA, Formulation, ModelParams, Truncation, y_to_x
from .stepper import BlowupNorm, StepControl, Trajectory, integrate, integrate_table


# ------------------------------------------------------------ norms

@dataclass(frozen=True)
class EnergyH:
    kind = "energy"


@dataclass(frozen=True)
class SobolevLike:
    s: float
    kind = "sobolev"

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ValueError("exponent must be finite")


@dataclass(frozen=True)
class WeightedSup:
    g: float
    kind = "weighted_sup"

    def __post_init__(self):
        if not math.isfinite(self.g):
            raise ValueError("exponent must be finite")


NormSpec = (EnergyH, SobolevLike, WeightedSup)


def _weights(n: int, p: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        w = LAMBDA ** (p * np.arange(1, n + 1, dtype=float))
    if not np.all(np.isfinite(w)):
        raise OverflowError(f"weights lambda_n^{p} overflow")
    return w


def norm(state, spec) -> np.ndarray | float:
    """Norm of one state (1-d) or of every row of a 2-d array."""
    v = np.asarray(getattr(state, "values", state), dtype=float)
    n = v.shape[-1]
    with np.errstate(over="ignore", invalid="ignore"):
        if isinstance(spec, EnergyH):
            out = np.sum(v * v, axis=-1)
        elif isinstance(spec, SobolevLike):
            out = np.sum((_weights(n, spec.s) * v) ** 2, axis=-1)
        elif isinstance(spec, WeightedSup):
            out = np.max(_weights(n, spec.g) * v, axis=-1)
        else:
            raise TypeError(f"unknown norm spec {spec!r}")
    if not np.all(np.isfinite(out)):
        raise OverflowError("norm overflowed")
    return float(out) if np.ndim(out) == 0 else out


def sup_over_time(traj: Trajectory, spec, t_from: float = None, midpoints: bool = True) -> float:
    """Sup over samples (and step midpoints) of a norm, from ``t_from`` on."""
    t_from = traj.times[0] if t_from is None else t_from
    sel = traj.times >= t_from
    best = float(np.max(norm(traj.values[sel], spec)))
    if midpoints and len(traj) > 1:
        tm = 0.5 * (traj.times[:-1] + traj.times[1:])
        msel = traj.times[:-1] >= t_from
        if np.any(msel):
            mids = traj.midpoints()[msel]
            best = max(best, float(np.max(norm(mids, spec))))
    return best


# ------------------------------------------------------------ energy inequality

@dataclass(frozen=True)
class EnergyInequalityReport:
    worst: float  # max over s < t of the normalized defect (<= 0 when satisfied)
    s: float
    t: float
    max_abs_drift: float  # max |E(t) - E(0)| / E(0)

    def to_dict(self):
        return dict(self.__dict__)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)


def dissipation_integral(traj: Trajectory, quadrature: str = "gauss", max_sub: float = None):
    """Cumulative integral of sum_n (lambda_n X_n)^2 at the samples.

    ``trapezoid`` uses the samples only; ``gauss`` applies 3-point
    Gauss-Legendre on the dense output, subdividing each step to length
    at most ``max_sub`` (default: horizon / 256).
    """
    ts, ys = traj.times, traj.values
    lam2 = _weights(ys.shape[1], 2.0)
    if len(ts) < 2:
        return np.zeros(len(ts))
    if quadrature == "trapezoid":
        f = ys * ys @ lam2
        return np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(ts))))
    if quadrature != "gauss":
        raise ValueError(f"unknown quadrature {quadrature!r}")
    max_sub = max_sub or (ts[-1] - ts[0]) / 256.0
    inc = np.empty(len(ts) - 1)
    for i in range(len(ts) - 1):
        a, b = ts[i], ts[i + 1]
        k = max(1, int(math.ceil((b - a) / max_sub)))
        edges = np.linspace(a, b, k + 1)
        acc = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
            for xg, wg in zip(_GL_X, _GL_W):
                y = traj._hermite(i, mid + half * xg)
                acc += wg * half * float(lam2 @ (y * y))
        inc[i] = acc
    return np.concatenate(([0.0], np.cumsum(inc)))


def energy_inequality_report(traj: Trajectory, nu: float, quadrature: str = "gauss"):
    """max over sample pairs s < t of
    [|X(t)|^2 + 2 nu int_s^t sum (lambda_n X_n)^2 - |X(s)|^2] / |X(s)|^2."""
    E = np.sum(traj.values ** 2, axis=1)
    I = dissipation_integral(traj, quadrature)
    F = E + 2.0 * nu * I
    if len(E) < 2:
        return EnergyInequalityReport(0.0, float(traj.times[0]), float(traj.times[0]), 0.0)
    # for each s, the largest F(t) over t > s
    suffix = np.maximum.accumulate(F[::-1])[::-1]
    best_after = suffix[1:]
    arg_after = np.empty(len(F) - 1, dtype=int)
    run, idx = -np.inf, -1
    for j in range(len(F) - 1, 0, -1):
        if F[j] > run:
            run, idx = F[j], j
        arg_after[j - 1] = idx
    with np.errstate(divide="ignore", invalid="ignore"):
        defect = np.where(E[:-1] > 0, (best_after - F[:-1]) / E[:-1], 0.0)
    i = int(np.argmax(defect))
    drift = float(np.max(np.abs(E - E[0])) / E[0]) if E[0] > 0 else 0.0
    return EnergyInequalityReport(float(defect[i]), float(traj.times[i]),
                                  float(traj.times[arg_after[i]]), drift)


# ------------------------------------------------------------ uniqueness gap

@dataclass(frozen=True)
class GapSeries:
    times: np.ndarray
    values: np.ndarray
    n: int

    @property
    def sup(self) -> float:
        return float(np.max(self.values))


def uniqueness_gap(traj_a: Trajectory, traj_b: Trajectory, n: int, times=None) -> GapSeries:
    """psi_N(t) = sum_{k<=N} 2^-k (A_k(t) - B_k(t))^2 on a common grid.

    Without ``times`` the grid is the samples of ``traj_a`` inside the span
    of ``traj_b``; samples present in both are used exactly.
    """
    if n < 1 or n > traj_a.values.shape[1] or n > traj_b.values.shape[1]:
        raise ValueError("N out of range")
    if times is None:
        if traj_a.times.shape == traj_b.times.shape and np.array_equal(traj_a.times, traj_b.times):
            ya, yb, times = traj_a.values, traj_b.values, traj_a.times
        else:
            sel = (traj_a.times >= traj_b.times[0]) & (traj_a.times <= traj_b.times[-1])
            times = traj_a.times[sel]
            ya, yb = traj_a.values[sel], traj_b.at_stops(times)
    else:
        times = np.asarray(times, dtype=float)
        ya, yb = traj_a.at_stops(times), traj_b.at_stops(times)
    w = 2.0 ** -np.arange(1, n + 1, dtype=float)
    diff = ya[:, :n] - yb[:, :n]
    return GapSeries(np.asarray(times), diff * diff @ w, n)


# ------------------------------------------------------------ claim-1 bound

def claim1_ratio(traj: Trajectory, t0: float, beta: float, eps: float,
                 midpoints: bool = True) -> float:
    """sup_{t>=t0} sup_n lambda_n^(beta-2+eps) X_n(t) over the same at t0."""
    j = np.nonzero(traj.times == t0)[0]
    if j.size == 0:
        raise ValueError("t0 must be a sample time")
    spec = WeightedSup(beta - 2.0 + eps)
    den = norm(traj.values[j[0]], spec)
    if den == 0:
        raise ZeroDivisionError("zero state at t0")
    return sup_over_time(traj, spec, t0, midpoints) / den


@dataclass
class Claim1Run:
    ratio: float
    ratio_y: float  # sup of the rescaled amplitudes over delta
    k0: float
    alpha: float
    nu_bar: float
    y_traj: Trajectory
    x_traj: Trajectory


def claim1_protocol(beta: float, eps: float, nu: float, x0, t_end: float,
                    delta: float = 0.1, ctrl: StepControl = None) -> Claim1Run:
    """Rescale positive X data so every amplitude is at most delta,
    evolve the truncated Y-system (MirrorLast) with viscosity
    nu_bar = alpha nu, alpha = delta / K0, for rescaled time t_end / alpha,
    map back to X and return the claim-1 ratio from t0 = 0."""
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 < 0):
        raise ValueError("claim-1 protocol needs positive data")
    n = x0.size
    s = beta - 2.0 + eps
    w = _weights(n, s)
    k0 = float(np.max(w * x0))
    if k0 <= 0:
        raise ZeroDivisionError("zero initial state")
    alpha = delta / k0
    py = ModelParams(beta=beta, nu=alpha * nu, epsilon=eps, n_shells=n,
                     truncation=Truncation.MIRROR_LAST, formulation=Formulation.Y)
    ybar0 = alpha * w * x0
    ytr = integrate(py, ybar0, t_end / alpha, ctrl or StepControl())
    # X_n(alpha t) = Ybar_n(t) / (alpha lambda_n^s)
    xs = ytr.values / (alpha * w)
    xd = ytr.derivs / (alpha * w) / alpha
    xtr = Trajectory(None, alpha * ytr.times, xs, xd, ytr.step_kind, ytr.decay / alpha,
                     ytr.accepted, ytr.rejected, ytr.cause, None,
                     [(alpha * t, m) for t, m in ytr.method_log])
    ratio = claim1_ratio(xtr, 0.0, beta, eps)
    ratio_y = sup_over_time(ytr, WeightedSup(0.0)) / delta
    return Claim1Run(ratio, ratio_y, k0, alpha, alpha * nu, ytr, xtr)


def rescaled_consistency(beta: float, eps: float, nu: float, x0, t_end: float,
                         delta: float = 0.1, n_compare: int = 41, ctrl: StepControl = None):
    """Check that Ybar_n(t) = alpha lambda_n^s X_n(alpha t) solves the Y
    equation with viscosity alpha nu (ZeroPad on both sides)."""
    ctrl = ctrl or StepControl(rel_tol=1e-11, abs_tol=1e-13)
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    s = beta - 2.0 + eps
    w = _weights(n, s)
    alpha = delta / float(np.max(w * x0))
    px = ModelParams(beta=beta, nu=nu, epsilon=eps, n_shells=n)
    py = px.replace(nu=alpha * nu, formulation=Formulation.Y)
    tx = np.linspace(0.0, t_end, n_compare)
    xtr = integrate(px, x0, t_end, ctrl, t_stops=tx)
    ytr = integrate(py, alpha * w * x0, t_end / alpha, ctrl, t_stops=tx / alpha)
    mapped = alpha * w * xtr.at_stops(tx)
    ys = ytr.at_stops(tx / alpha)
    dev = float(np.max(np.abs(mapped - ys)))
    bound = 100.0 * (ctrl.abs_tol + ctrl.rel_tol * float(np.max(np.abs(ys))))
    return {"max_deviation": dev, "bound": bound, "ok": dev <= bound, "alpha": alpha}


# ------------------------------------------------------------ comparison variable

@dataclass
class VCompareReport:
    times: np.ndarray
    v: np.ndarray
    v_tilde: np.ndarray
    # max of (V - Vtilde (1 + rtol) - atol) exp(-nu lambda_n (t - t0)); <= 0 when it holds
    max_excess: float
    holds: bool
    t_valid: float  # end of the interval on which Vtilde was finite
    truncated: bool


def vcompare(traj: Trajectory, t0: float, nu: float, beta: float, t_end: float = None,
             rtol: float = 1e-8, atol: float = 1e-12, ctrl: StepControl = None) -> VCompareReport:
    """Compare V_n = X_n e^{nu lambda_n (t - t0)} with the supersolution
    dVt_n = -(nu/2) lambda_n^2 Vt_n + lambda_{n-1}^beta Vt_{n-1}^2, Vt(t0) = V(t0),
    on the samples of ``traj`` in [t0, t_end]."""
    j = np.nonzero(traj.times == t0)[0]
    if j.size == 0:
        raise ValueError("t0 must be a sample time")
    t_end = traj.times[-1] if t_end is None else t_end
    sel = (traj.times >= t0) & (traj.times <= t_end)
    times = traj.times[sel]
    x = traj.values[sel]
    n = x.shape[1]
    lam = _weights(n, 1.0)
    # exp(-nu lambda_n (t - t0)) never overflows; V itself may (reported as inf)
    damp = np.exp(-nu * np.outer(times - t0, lam))
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(x == 0, 0.0, x / damp)
    if times.size < 2:
        return VCompareReport(times, v, v.copy(), 0.0, True, float(t0), False)
    a = np.concatenate(([0.0], lam[:-1] ** beta))
    tr = integrate_table(a, np.zeros(n), 0.5 * nu * lam ** 2, False, v[0], t0, float(times[-1]),
                         ctrl or StepControl(rel_tol=1e-11, abs_tol=1e-14),
                         events=[BlowupNorm(0.0, 1e24)], t_stops=times[1:-1])
    t_valid = tr.t_final
    keep = times <= t_valid
    vt = tr.at_stops(times[keep])
    # V - Vt (1 + rtol) - atol, multiplied by the positive damping factor
    dk = damp[keep]
    excess = x[keep] - (vt * (1.0 + rtol) + atol) * dk
    worst = float(np.max(excess))
    return VCompareReport(times[keep], v[keep], vt, worst, worst <= 0.0, float(t_valid),
                          bool(t_valid < times[-1]))


# ------------------------------------------------------------ viscosity sweep

@dataclass
class SweepComparison:
    nus: np.ndarray
    d: np.ndarray  # D[k][n-1] = sup_t |X^{nu_k}_n - X^{nu_{k+1}}_n|
    last_gap: np.ndarray  # sup_t |X^{nu_K}_n - X^{nu=0}_n| (when the sweep ends at nu=0)
    to_inviscid: np.ndarray  # [k][n-1] = sup_t |X^{nu_k}_n - X^{nu=0}_n|, NaN without a nu=0 run
    c0_per_run: np.ndarray
    c0: float
    c0_variation: float  # (max - min) / max over runs
    gamma: float
    n_max: int

    def decreasing_in_k(self, n: int) -> bool:
        """Whether D[k][n] strictly decreases along the viscous sweep (1-based n).

        The row against the inviscid run is excluded: it compares a
        different spacing of viscosities.
        """
        col = self.d[:-1, n - 1] if self.nus[-1] == 0 else self.d[:, n - 1]
        return bool(np.all(np.diff(col) < 0))

    def first_increase(self, n: int):
        """Index k of the first D[k+1][n] >= D[k][n], or None."""
        col = self.d[:-1, n - 1] if self.nus[-1] == 0 else self.d[:, n - 1]
        bad = np.nonzero(np.diff(col) >= 0)[0]
        return int(bad[0]) if bad.size else None

    def to_dict(self):
        return {"nus": self.nus.tolist(), "D": self.d.tolist(), "last_gap": self.last_gap.tolist(),
                "to_inviscid": np.where(np.isfinite(self.to_inviscid), self.to_inviscid,
                                        None).tolist(),
                "c0_per_run": self.c0_per_run.tolist(), "c0": self.c0,
                "c0_variation": self.c0_variation, "gamma": self.gamma, "n_max": self.n_max}


def nu_sweep_compare(trajs: Sequence[Trajectory], nus: Sequence[float], n_max: int,
                     times=None, gamma: float = 0.6) -> SweepComparison:
    """Shell-wise sup-in-time differences between consecutive viscosities.

    ``trajs`` are ordered by decreasing viscosity and share an initial
    condition and horizon; differences are taken on ``times`` (default: the
    samples of the first run that every run also contains).
    """
    nus = np.asarray(nus, dtype=float)
    if len(trajs) != nus.size or nus.size < 2:
        raise ValueError("need at least two runs with matching viscosities")
    if np.any(np.diff(nus) > 0):
        raise ValueError("viscosities must be non-increasing")
    x0 = trajs[0].values[0]
    for tr in trajs[1:]:
        if not np.array_equal(tr.values[0], x0) or tr.times[0] != trajs[0].times[0]:
            raise ValueError("runs do not share the initial condition")
        if tr.t_final != trajs[0].t_final:
            raise ValueError("runs do not share the horizon")
    if times is None:
        times = trajs[0].times
        for tr in trajs[1:]:
            times = np.intersect1d(times, tr.times)
    states = [tr.at_stops(times)[:, :n_max] for tr in trajs]
    d = np.array([np.max(np.abs(states[k] - states[k + 1]), axis=0)
                  for k in range(len(trajs) - 1)])
    if nus[-1] == 0:
        last = d[-1]
        inv = np.array([np.max(np.abs(st - states[-1]), axis=0) for st in states[:-1]])
    else:
        last = np.full(n_max, np.nan)
        inv = np.full((len(trajs) - 1, n_max), np.nan)
    c0s = np.array([sup_over_time(tr, WeightedSup(gamma)) for tr in trajs])
    return SweepComparison(nus, d, last, inv, c0s, float(np.max(c0s)),
                           float((np.max(c0s) - np.min(c0s)) / np.max(c0s)), gamma, n_max)


# ------------------------------------------------------------ monitors

def blowup_series(traj: Trajectory, beta: float) -> np.ndarray:
    """sum_n (lambda_n^{beta/3} X_n)^2 at every sample."""
    return norm(traj.values, SobolevLike(beta / 3.0))


def uniqueness_monitors(traj: Trajectory, beta: float, eps: float) -> dict:
    """Sup-in-time weighted bounds tied to the uniqueness criteria (all
    truncated at the run's N): viscous exponent beta - 3, inviscid
    exponents beta - 1 and (beta - 1)/3 + eps."""
    return {
        "viscous_beta_minus_3": sup_over_time(traj, WeightedSup(beta - 3.0)),
        "inviscid_beta_minus_1": sup_over_time(traj, WeightedSup(beta - 1.0)),
        "inviscid_third": sup_over_time(traj, WeightedSup((beta - 1.0) / 3.0 + eps)),
    }


def min_value(traj: Trajectory) -> float:
    return float(np.min(traj.values))


def y_run_to_x(traj: Trajectory, params: ModelParams) -> np.ndarray:
    """X-amplitudes of every sample of a Y-formulation run."""
    return np.array([y_to_x(v, params) for v in traj.values])
